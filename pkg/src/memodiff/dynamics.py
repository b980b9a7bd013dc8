"""Semi-implicit Galerkin time stepping and the solution process U(t, tau).

One step from ``t_n`` to ``t_{n+1} = t_n + dt`` solves, mode by mode,

    (1 + eps(t_{n+1}) lam) (u^{n+1} - u^n) + dt lam u^{n+1}
        = dt (g - M[eta^n] - P f(u^n))

with the memory forcing ``M`` and the nonlinearity taken explicitly, then
transports the history with ``u^{n+1}`` held over the step.

:func:`evolve` runs the same scheme on a ring buffer of cumulative
integrals ``U(t - s_k)`` (so that ``eta(s_k) = U(t) - U(t - s_k)``): a shift
by whole grid cells then costs a few row writes instead of a copy of the
whole history, and the memory forcing is one matrix-vector product.
"""

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DivergenceError, ShapeError
from .memory import HistoryField, advance_history, kernel_weights, memory_term
from .model import SystemState, eval_epsilon, state_norms
from .reports import fmt
from .spectral import from_physical, resolvent_solve, to_physical

log = logging.getLogger(__name__)

NORM_COLUMNS = ("u_l2", "u_h1", "u_h2", "eta_mu1", "eta_mu2", "mt0", "mt1", "eps")


def eval_nonlinearity(nonlinearity, u_phys):
    """Apply ``f`` pointwise to physical values."""
    return nonlinearity(u_phys)


def nonlinear_coeffs(config, u):
    """Galerkin projection ``P f(u)`` evaluated on the collocation grid."""
    b = config.basis
    return from_physical(config.nonlinearity(to_physical(u, b)), b)


def _check_state(state, config):
    if state.eta.grid is not config.grid and (
            state.eta.grid.nodes.shape != config.grid.nodes.shape
            or not np.array_equal(state.eta.grid.nodes, config.grid.nodes)):
        raise ShapeError("state history lives on a different s-grid than the configuration")
    if state.u.shape != (config.basis.n_modes,):
        raise ShapeError("state has the wrong number of modes")


def step(state, dt, config):
    """Advance one step of the semi-implicit scheme.

    Returns a new :class:`SystemState` at ``state.t + dt``.
    """
    _check_state(state, config)
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    t1 = state.t + dt
    eps1, _ = eval_epsilon(config.eps, t1)
    b = config.basis
    m = memory_term(state.eta, config.kernel, b)
    rhs = (1.0 + eps1 * b.eigenvalues) * state.u + dt * (config.g - m - nonlinear_coeffs(config, state.u))
    u1 = resolvent_solve(1.0, eps1 + dt, rhs, b)
    if not np.all(np.isfinite(u1)):
        raise DivergenceError("non-finite state", 1, t1)
    return SystemState(t1, u1, advance_history(state.eta, u1, dt))


class _RingHistory:
    """History stored as cumulative integrals ``P_k = U(t - s_k)`` in a doubled ring.

    Every physical row ``p`` mirrors row ``p + C`` so that the logical window
    ``P_0..P_M`` is always the contiguous slice ``buf[head:head + C]``.
    """

    def __init__(self, eta, q):
        self.grid = eta.grid
        self.C = eta.coeffs.shape[0]
        self.q = q
        self.buf = np.empty((2 * self.C, eta.n_modes))
        self.buf[:self.C] = -eta.coeffs
        self.buf[self.C:] = -eta.coeffs
        self.head = 0
        self._lead = (q - np.arange(q))[:, None] * self.grid.step

    @property
    def window(self):
        return self.buf[self.head:self.head + self.C]

    def memory_integral(self, kw, kw_total):
        """``sum_k kw_k eta(s_k)`` without forming eta."""
        return kw_total * self.buf[self.head] - kw @ self.window

    def push(self, u_new):
        rows = self.buf[self.head] + self._lead * u_new
        pos = (self.head - self.q + np.arange(self.q)) % self.C
        self.buf[pos] = rows
        self.buf[pos + self.C] = rows
        self.head = int(pos[0])

    def history(self):
        w = self.window
        coeffs = w[0] - w
        coeffs[0] = 0.0
        return HistoryField(coeffs, self.grid)


@dataclass(eq=False)
class Trajectory:
    """Output of :func:`evolve`.

    Attributes
    ----------
    tau, dt : float
        Initial time and step.
    step_times : ndarray, shape (N+1,)
        ``tau + n*dt``.
    u_steps : ndarray, shape (N+1, n_modes)
        ``u`` at every step (cheap; used for time integrals and sup bounds).
    times : ndarray
        Sample times.
    norms : dict of ndarray
        Squared norms at the sample times, keyed by :data:`NORM_COLUMNS`.
    states : list of SystemState or None
        Full states at the sample times when requested.
    initial, final : SystemState
    off_grid : bool
        True when ``dt`` is not a whole number of s-grid cells.
    """

    tau: float
    dt: float
    step_times: np.ndarray
    u_steps: np.ndarray
    times: np.ndarray
    norms: dict
    states: list
    initial: SystemState
    final: SystemState
    off_grid: bool = False
    sample_index: np.ndarray = field(default=None, repr=False)

    def write_csv(self, stream):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(("t",) + NORM_COLUMNS)
        for i, t in enumerate(self.times):
            writer.writerow([fmt(t)] + [fmt(self.norms[c][i]) for c in NORM_COLUMNS])


def _n_steps(tau, t, dt):
    if t < tau:
        raise ConfigurationError(f"final time {t} precedes initial time {tau}")
    n = round((t - tau) / dt)
    if abs(n * dt - (t - tau)) > 1e-9 * max(1.0, abs(t - tau)):
        raise ConfigurationError(f"t - tau = {t - tau} is not a whole number of steps dt = {dt}")
    return int(n)


def _sample_steps(n_steps, dt, sample_every):
    if sample_every is None:
        return np.array([0, n_steps]) if n_steps else np.array([0])
    stride = max(1, round(sample_every / dt))
    idx = np.arange(0, n_steps + 1, stride)
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    return idx


def evolve(z_tau, tau, t, dt, config, sample_every=None, keep_states=True):
    """Apply the process ``U(t, tau)`` to ``z_tau``.

    Parameters
    ----------
    z_tau : SystemState
        Initial state; its ``t`` is overridden by ``tau``.
    tau, t : float
        Initial and final times, ``t - tau`` a whole number of steps.
    dt : float
        Time step.
    config : ModelConfig
    sample_every : float, optional
        Spacing of recorded samples; by default only the endpoints.
    keep_states : bool
        Keep full states at the samples (norms are always recorded).

    Returns
    -------
    Trajectory
    """
    _check_state(z_tau, config)
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    n_steps = _n_steps(tau, t, dt)
    z0 = z_tau.at(float(tau))
    samples = _sample_steps(n_steps, dt, sample_every)
    q = config.grid.steps_per(dt)
    if q is None:
        log.warning("dt=%g is not a multiple of the s-grid step %g: history transport degrades to "
                    "first order in the grid step", dt, config.grid.step)
    b = config.basis
    lam = b.eigenvalues
    g = config.g
    step_times = tau + dt * np.arange(n_steps + 1)
    step_times[-1] = t
    u_steps = np.empty((n_steps + 1, b.n_modes))
    u_steps[0] = z0.u
    norms = {c: np.empty(samples.size) for c in NORM_COLUMNS}
    states = [] if keep_states else None

    def record(i, state):
        for c, v in state_norms(state, config).items():
            norms[c][i] = v
        if keep_states:
            states.append(state)

    record(0, z0)
    next_sample = 1
    kw = kernel_weights(config.kernel, config.grid)
    kw_total = float(kw.sum())
    has_memory = not config.kernel.is_zero
    has_f = config.nonlinearity.kind != "zero"
    ring = _RingHistory(z0.eta, q) if q is not None else None
    eta = z0.eta
    u = z0.u.copy()
    eps_all, _ = config.eps(step_times)
    # overflow is caught by the finiteness check below
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, n_steps + 1):
            eps1 = float(eps_all[n])
            if ring is not None:
                m = lam * ring.memory_integral(kw, kw_total) if has_memory else 0.0
            else:
                m = memory_term(eta, config.kernel, b)
            f = from_physical(config.nonlinearity(u @ b.modes.T), b) if has_f else 0.0
            rhs = (1.0 + eps1 * lam) * u + dt * (g - m - f)
            u = rhs / (1.0 + (eps1 + dt) * lam)
            if not np.all(np.isfinite(u)):
                raise DivergenceError("non-finite state", n, step_times[n])
            u_steps[n] = u
            if ring is not None:
                ring.push(u)
            else:
                eta = advance_history(eta, u, dt)
            if next_sample < samples.size and samples[next_sample] == n:
                hist = ring.history() if ring is not None else eta
                record(next_sample, SystemState(float(step_times[n]), u.copy(), hist))
                next_sample += 1
    final_state = states[-1] if keep_states else None
    if final_state is None:
        hist = ring.history() if ring is not None else eta
        final_state = SystemState(float(step_times[-1]), u.copy(), hist) if n_steps else z0
    return Trajectory(float(tau), float(dt), step_times, u_steps, step_times[samples], norms, states,
                      z0, final_state, q is None, samples)


def _evolve_job(args):
    z, tau, t, dt, config, kwargs = args
    return evolve(z, tau, t, dt, config, **kwargs)


def evolve_many(states, tau, t, dt, config, workers=1, **kwargs):
    """Evolve independent initial states; results keep the input order.

    ``tau`` may be a scalar or one initial time per state.
    """
    taus = np.broadcast_to(np.asarray(tau, dtype=float), (len(states),))
    jobs = [(z, float(ta), t, dt, config, kwargs) for z, ta in zip(states, taus)]
    if workers <= 1 or len(jobs) <= 1:
        return [_evolve_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evolve_job, jobs))
