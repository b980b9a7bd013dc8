"""Time-dependent norms, estimate verifiers and pullback-attractor approximation.

Every verifier returns an :class:`EstimateReport` holding ``lhs <= rhs`` at
each sample.  Constants that the estimates leave implicit (the sup of
``||grad u||^2 + ||u||_p^p`` along a run) are measured on the run itself.
"""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.spatial.distance import cdist
from scipy.stats import norm, qmc

from .dynamics import NORM_COLUMNS, evolve_many
from .errors import ComparabilityError, ConfigurationError, EmptySetError, NormRangeError
from .memory import decaying_past_history, kernel_weights, mu_norm_sq
from .model import SystemState, eval_epsilon, state_norms
from .reports import EstimateReport, fmt
from .spectral import lp_norm_p, sobolev_norm_sq

log = logging.getLogger(__name__)

ENSEMBLE_DIM = 8
HISTORY_RATE = 0.5


def _check_sigma(sigma):
    if not 0.0 <= sigma <= 1.0:
        raise NormRangeError(f"sigma must lie in [0, 1], got {sigma}")


def mt_norm_sq(state, config, sigma=1.0):
    """``||u||_sigma^2 + eps(t) ||u||_{sigma+1}^2 + ||eta||_{mu,sigma+1}^2`` at ``state.t``."""
    _check_sigma(sigma)
    b = config.basis
    eps, _ = eval_epsilon(config.eps, state.t)
    return float(sobolev_norm_sq(state.u, b, sigma) + eps * sobolev_norm_sq(state.u, b, sigma + 1)
                 + mu_norm_sq(state.eta, config.kernel, b, sigma + 1))


def growth_sup(trajectory, config):
    """``sup_n ||grad u^n||^2 + ||u^n||_p^p`` over every step of the run."""
    b = config.basis
    u = trajectory.u_steps
    grad = (u * u) @ b.eigenvalues
    lp = lp_norm_p(u, b, config.nonlinearity.p)
    return float(np.max(grad + lp))


def dissipation_constant(trajectories, config):
    """``(2 l G + ||g||^2) / alpha`` with ``G`` the largest ``growth_sup`` over the runs."""
    if not isinstance(trajectories, (list, tuple)):
        trajectories = [trajectories]
    growth = max(growth_sup(tr, config) for tr in trajectories)
    return (2.0 * config.l * growth + config.g_norm_sq) / config.alpha, growth


def dissipative_bound_check(trajectory, config, Q=None, tolerance=0.0):
    """``||z(t)||^2 <= exp(-alpha (t - tau)) ||z(tau)||^2 + Q`` in the ``M_t^1`` norm."""
    growth = None
    if Q is None:
        Q, growth = dissipation_constant(trajectory, config)
    e = trajectory.norms["mt1"]
    elapsed = trajectory.times - trajectory.tau
    rhs = np.exp(-config.alpha * elapsed) * e[0] + Q
    info = {"Q": float(Q), "alpha": float(config.alpha)}
    if growth is not None:
        info["growth_sup"] = growth
    return EstimateReport("dissipative", trajectory.times, e, rhs, tolerance, info)


def absorbing_entry_time(R, Q, alpha):
    """Entry time ``max(0, ln(R^2 / (1 + Q)) / alpha)`` into the ball of radius^2 ``2Q + 1``."""
    if not alpha > 0:
        raise ConfigurationError(f"alpha must be positive, got {alpha}")
    if not R > 0 or Q < 0:
        raise ConfigurationError("need R > 0 and Q >= 0")
    return max(0.0, math.log(R * R / (1.0 + Q)) / alpha)


def absorbing_check(trajectories, config, R, Q=None, tolerance=0.0):
    """Every sample after ``tau + t0`` lies in the ball ``||z||^2 <= 2Q + 1``."""
    if Q is None:
        Q, _ = dissipation_constant(list(trajectories), config)
    t0 = absorbing_entry_time(R, Q, config.alpha)
    ts, lhs = [], []
    for tr in trajectories:
        late = tr.times >= tr.tau + t0 - 1e-12
        ts.append(tr.times[late])
        lhs.append(tr.norms["mt1"][late])
    t = np.concatenate(ts) if ts else np.empty(0)
    lhs = np.concatenate(lhs) if lhs else np.empty(0)
    return EstimateReport("absorbing", t, lhs, np.full(t.shape, 2.0 * Q + 1.0), tolerance,
                          {"Q": float(Q), "t0": float(t0), "R": float(R), "alpha": float(config.alpha)})


def _check_pair(a, b):
    if (a.step_times.shape != b.step_times.shape or not np.array_equal(a.step_times, b.step_times)
            or not np.array_equal(a.times, b.times)):
        raise ComparabilityError("trajectories do not share a step grid and sample times")
    if a.states is None or b.states is None:
        raise ComparabilityError("contraction checks need the sampled states (keep_states=True)")


def gradient_gap_integral(a, b, config):
    """``int_tau^t ||grad(u_a - u_b)||^2 dr`` at each sample (trapezoid over all steps)."""
    d = a.u_steps - b.u_steps
    sq = (d * d) @ config.basis.eigenvalues
    cum = cumulative_trapezoid(sq, a.step_times, initial=0.0)
    return cum[a.sample_index]


def contraction_check(a, b, config, lipschitz_slack=10.0):
    """Difference estimates for two runs on the same step grid.

    Returns
    -------
    (EstimateReport, EstimateReport)
        ``uniqueness``: ``||zbar(t)||^2 <= exp(2l(t-tau)) ||zbar(tau)||^2 (1 + slack*dt)``;
        ``decomposition``: ``||zbar(t)||^2 <= exp(-alpha_s (t-tau)) ||zbar(tau)||^2 + Psi``
        with ``Psi = 2l int ||grad(u_a - u_b)||^2`` and ``alpha_s = min(lambda_1, 1/L, rho)``.
    """
    _check_pair(a, b)
    diff = np.array([mt_norm_sq(sa - sb, config) for sa, sb in zip(a.states, b.states)])
    elapsed = a.times - a.tau
    l = config.l
    uniq_rhs = np.exp(2 * l * elapsed) * diff[0] * (1 + lipschitz_slack * a.dt)
    psi = 2 * l * gradient_gap_integral(a, b, config)
    dec_rhs = np.exp(-config.alpha_strong * elapsed) * diff[0] + psi
    info = {"l": float(l), "dt": float(a.dt)}
    return (EstimateReport("uniqueness", a.times, diff, uniq_rhs, 0.0, dict(info)),
            EstimateReport("decomposition", a.times, diff, dec_rhs, 0.0,
                           {**info, "alpha_strong": float(config.alpha_strong), "psi_end": float(psi[-1])}))


def energy_inequality_check(trajectory, config, Q=None, tolerance=None):
    """Discrete form of ``dE/dt + alpha E <= alpha Q`` with ``E = ||z||_{M_t^1}^2``.

    ``dE/dt`` is the forward difference between samples and ``E`` is averaged
    over the interval; the default tolerance is the sample spacing times the
    largest observed ``|dE/dt|``, the size of the quadrature error.
    """
    if Q is None:
        Q, _ = dissipation_constant(trajectory, config)
    e = trajectory.norms["mt1"]
    t = trajectory.times
    h = np.diff(t)
    rate = np.diff(e) / h
    lhs = rate + config.alpha * 0.5 * (e[1:] + e[:-1])
    rhs = np.full(lhs.shape, config.alpha * Q)
    if tolerance is None:
        tolerance = float(np.max(h) * np.max(np.abs(rate), initial=0.0))
    return EstimateReport("energy_inequality", t[:-1], lhs, rhs, tolerance,
                          {"Q": float(Q), "alpha": float(config.alpha)})


def _embedding(states, config, sigma):
    """Rows whose Euclidean distances are ``M_t^sigma`` distances between states."""
    t = states[0].t
    if any(s.t != t for s in states):
        raise ComparabilityError("states in a set must share the same time")
    lam = config.basis.eigenvalues
    eps, _ = eval_epsilon(config.eps, t)
    wu = np.sqrt(lam ** sigma + eps * lam ** (sigma + 1))
    kw = kernel_weights(config.kernel, config.grid)
    we = np.sqrt(np.outer(np.clip(kw, 0.0, None), lam ** (sigma + 1)))
    return np.array([np.concatenate((wu * s.u, (we * s.eta.coeffs).ravel())) for s in states]), t


def hausdorff_semidistance(B, C, config, sigma=1.0):
    """``sup_{x in B} inf_{y in C} ||x - y||_{M_t^sigma}`` over finite state sets."""
    _check_sigma(sigma)
    if len(B) == 0 or len(C) == 0:
        raise EmptySetError("Hausdorff semidistance needs non-empty sets")
    xb, tb = _embedding(list(B), config, sigma)
    xc, tc = _embedding(list(C), config, sigma)
    if tb != tc:
        raise ComparabilityError(f"sets live at different times {tb} and {tc}")
    return float(np.max(np.min(cdist(xb, xc), axis=1)))


def ensemble_directions(n, dim=ENSEMBLE_DIM):
    """Deterministic unit vectors from a Halton sequence pushed through the normal quantile."""
    pts = qmc.Halton(d=dim, scramble=False).random(n + 1)[1:]
    v = norm.ppf(pts)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def ball_ensemble(config, n, norms_sq, t=0.0, history_rate=HISTORY_RATE):
    """Initial states with prescribed ``||z||_{M_t^1}^2``.

    ``u`` points along :func:`ensemble_directions` in the leading modes and the
    history is that of the past ``u(t - r) = exp(-history_rate*r) u``; each
    state is then scaled to its target norm.
    """
    norms_sq = np.broadcast_to(np.asarray(norms_sq, dtype=float), (n,))
    dim = min(ENSEMBLE_DIM, config.basis.n_modes)
    dirs = ensemble_directions(n, dim)
    states = []
    for d, target in zip(dirs, norms_sq):
        u = config.basis.zeros()
        u[:dim] = d
        z = SystemState(float(t), u, decaying_past_history(u, config.grid, history_rate))
        states.append(z.scaled(math.sqrt(target / mt_norm_sq(z, config))))
    return states


@dataclass(eq=False)
class AttractorSnapshot:
    """Trajectory endpoints at a common time ``t`` standing in for the attractor section."""

    t: float
    points: list
    taus: tuple
    radius: float
    config: object = field(default=None, repr=False)

    def __post_init__(self):
        if any(p.t != self.t for p in self.points):
            raise ComparabilityError("snapshot points must share the snapshot time")

    def write_csv(self, stream):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(("index", "t") + NORM_COLUMNS)
        for i, p in enumerate(self.points):
            n = state_norms(p, self.config)
            writer.writerow([i, fmt(self.t)] + [fmt(n[c]) for c in NORM_COLUMNS])


def pullback_attractor_approx(t, tau_list, ensemble_size, R, config, dt=None, reference=None,
                              workers=1, sigma=1.0, tolerance=1e-12):
    """Pull an ensemble from the ``R``-sphere at each ``tau_k`` forward to ``t``.

    Parameters
    ----------
    t : float
        Observation time.
    tau_list : sequence of float
        Strictly decreasing initial times, all ``<= t``.
    ensemble_size : int
    R : float
        Initial states have ``||z||_{M_tau^1} = R``.
    config : ModelConfig
    dt : float, optional
        Step, by default ``config.numerics.dt``.
    reference : list of SystemState, optional
        Target set; by default the endpoints from the most negative ``tau``.
    workers : int
    sigma : float
        Norm index for the distances.
    tolerance : float
        Allowed increase between successive distances.

    Returns
    -------
    (AttractorSnapshot, EstimateReport)
        The report has ``lhs = d_k`` and ``rhs = d_{k-1}`` (``d_1`` for the
        first entry), so it passes iff the distances never increase.
    """
    taus = np.asarray(tau_list, dtype=float)
    if taus.ndim != 1 or taus.size == 0:
        raise ConfigurationError("tau_list must be a non-empty sequence")
    if np.any(np.diff(taus) >= 0) or np.any(taus > t):
        raise ConfigurationError("tau_list must be strictly decreasing and not exceed t")
    dt = config.numerics.dt if dt is None else dt
    states, starts = [], []
    for tau in taus:
        states += ball_ensemble(config, ensemble_size, R * R, t=tau)
        starts += [tau] * ensemble_size
    trajs = evolve_many(states, starts, t, dt, config, workers=workers, keep_states=False)
    ends = [tr.final for tr in trajs]
    groups = [ends[k * ensemble_size:(k + 1) * ensemble_size] for k in range(taus.size)]
    snapshot = AttractorSnapshot(float(ends[0].t), groups[-1], tuple(float(x) for x in taus), float(R), config)
    target = snapshot.points if reference is None else list(reference)
    d = np.array([hausdorff_semidistance(g, target, config, sigma) for g in groups])
    prev = np.concatenate((d[:1], d[:-1]))
    report = EstimateReport("pullback_monotone", taus, d, prev, tolerance,
                            {"R": float(R), "ensemble": int(ensemble_size), "t": float(t)})
    return snapshot, report
