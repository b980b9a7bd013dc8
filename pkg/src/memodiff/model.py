"""Model configuration: viscosity coefficient, nonlinearity, forcing and state.

``ModelConfig`` bundles everything the structural assumptions constrain and
derives the constants the energy estimates use:

* ``lambda_tilde`` - the embedding constant, taken sharp as ``lambda_1``;
* ``L``            - a bound for ``sup |eps| + |eps'|``;
* ``rho``          - the memory pairing constant;
* ``alpha``        - ``min(lambda_tilde/2, 1/(2L), rho)``, the decay rate of
  the dissipative estimate;
* ``alpha_strong`` - ``min(lambda_tilde, 1/L, rho)``, the decay rate of the
  difference estimate.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError, EpsilonValidationError, NonlinearityValidationError, ShapeError
from .memory import (DEFAULT_TAIL_TOL, ExponentialKernel, HistoryField, build_sgrid, mu_norm_sq,
                     validate_kernel, zero_history)
from .spectral import EigenBasis, build_basis, check_field, sobolev_norm_sq

log = logging.getLogger(__name__)


class AutonomousModeWarning(UserWarning):
    """A constant viscosity coefficient does not decay to zero."""


@dataclass(frozen=True)
class EpsilonSpec:
    """Time-dependent coefficient of the ``-eps(t) Delta u_t`` term.

    ``logistic``: ``eps(t) = eps0 / (1 + exp(kappa*t))``, decreasing to 0.
    ``constant``: ``eps(t) = eps0``; does not decay, so it is only meant for
    comparisons against autonomous closed forms.
    """

    kind: str = "logistic"
    eps0: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.kind not in ("logistic", "constant"):
            raise EpsilonValidationError(f"unknown epsilon kind {self.kind!r}")
        if not (math.isfinite(self.eps0) and self.eps0 > 0):
            raise EpsilonValidationError(f"eps0 must be positive and finite, got {self.eps0}")
        if self.kind == "logistic" and not (math.isfinite(self.kappa) and self.kappa > 0):
            raise EpsilonValidationError(f"logistic kappa must be positive, got {self.kappa}")

    @property
    def autonomous(self):
        return self.kind == "constant"

    @property
    def L_bound(self):
        if self.kind == "constant":
            return self.eps0
        return self.eps0 * (1.0 + self.kappa / 4.0)

    def __call__(self, t):
        """Return ``(eps(t), eps'(t))``."""
        if self.kind == "constant":
            return self.eps0 + 0.0 * np.asarray(t, dtype=float), 0.0 * np.asarray(t, dtype=float)
        kt = self.kappa * np.asarray(t, dtype=float)
        lo = expit(-kt)
        return self.eps0 * lo, -self.eps0 * self.kappa * lo * expit(kt)


def check_epsilon(eps_spec, n_samples=4001):
    """Sampled check that eps is positive, non-increasing and within ``L_bound``."""
    span = 60.0 / eps_spec.kappa if eps_spec.kind == "logistic" else 60.0
    t = np.linspace(-span, span, n_samples)
    eps, deps = eps_spec(t)
    if np.any(eps <= 0):
        raise EpsilonValidationError("eps must stay positive")
    if np.any(np.diff(eps) > 1e-15) or np.any(deps > 0):
        raise EpsilonValidationError("eps must be non-increasing")
    if np.max(np.abs(eps) + np.abs(deps)) > eps_spec.L_bound * (1 + 1e-12):
        raise EpsilonValidationError("sup |eps| + |eps'| exceeds the declared bound L")
    if eps_spec.autonomous:
        warnings.warn("constant eps does not decay to zero: autonomous-comparison mode",
                      AutonomousModeWarning, stacklevel=2)


@dataclass(frozen=True)
class NonlinearitySpec:
    """Polynomial nonlinearity ``f(u) = |u|^(p-2) u - l*u`` (``cubic`` fixes p = 4).

    ``zero`` is ``f = 0`` (p = 2, l = 0), the linear reduction used by the
    closed-form comparisons.

    Growth constants follow from ``f(s)s = |s|^p - l s^2``::

        beta1 |s|^p - gamma1 <= f(s)s <= beta2 |s|^p + gamma2
        tbeta1 |s|^p - tgamma1 <= F(s) <= tbeta2 |s|^p + tgamma2

    with ``F(s) = int_0^s f``.
    """

    kind: str = "cubic"
    l: float = None
    p: float = 4.0

    def __post_init__(self):
        if self.l is None:
            object.__setattr__(self, "l", 0.0 if self.kind == "zero" else 1.0)
        if self.kind == "cubic":
            object.__setattr__(self, "p", 4.0)
        elif self.kind == "zero":
            if self.l != 0:
                raise NonlinearityValidationError("the zero nonlinearity has l = 0")
            object.__setattr__(self, "p", 2.0)
            object.__setattr__(self, "l", 0.0)
        elif self.kind != "odd_power":
            raise NonlinearityValidationError(f"unknown nonlinearity kind {self.kind!r}")
        if not (math.isfinite(self.l) and self.l >= 0):
            raise NonlinearityValidationError(f"l must be non-negative, got {self.l}")
        if not self.p >= 2:
            raise NonlinearityValidationError(f"p must be >= 2, got {self.p}")
        if self.p == 2 and self.l >= 1 and self.kind != "zero":
            raise NonlinearityValidationError("p = 2 requires l < 1 for a coercive lower bound")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(u)
        if self.kind == "cubic":
            return u * u * u - self.l * u
        return np.abs(u) ** (self.p - 2) * u - self.l * u

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(u)
        return (self.p - 1) * np.abs(u) ** (self.p - 2) - self.l

    def primitive(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(u)
        return np.abs(u) ** self.p / self.p - 0.5 * self.l * u * u

    @property
    def growth_constants(self):
        """``(beta1, gamma1, beta2, gamma2)``."""
        p, l = self.p, self.l
        if self.kind == "zero":
            return 0.0, 0.0, 0.0, 0.0
        if p == 2:
            return 1.0 - l, 0.0, 1.0 - l, 0.0
        x = (4 * l / p) ** (2 / (p - 2))
        return 0.5, l * x - 0.5 * x ** (p / 2), 1.0, 0.0

    @property
    def primitive_constants(self):
        """``(tbeta1, tgamma1, tbeta2, tgamma2)``."""
        p, l = self.p, self.l
        if self.kind == "zero":
            return 0.0, 0.0, 0.0, 0.0
        if p == 2:
            return (1.0 - l) / 2, 0.0, (1.0 - l) / 2, 0.0
        x = (2 * l) ** (2 / (p - 2))
        return 1 / (2 * p), 0.5 * l * x - x ** (p / 2) / (2 * p), 1 / p, 0.0


def check_nonlinearity(nonlinearity, s=None, tol=1e-9):
    """Sampled check of ``f(0) = 0``, ``f' >= -l`` and both growth bounds."""
    if s is None:
        s = np.linspace(-10.0, 10.0, 20001)
    if nonlinearity(0.0) != 0.0:
        raise NonlinearityValidationError("f(0) must vanish")
    scale = 1.0 + np.abs(s) ** nonlinearity.p
    if np.any(nonlinearity.derivative(s) < -nonlinearity.l - tol):
        raise NonlinearityValidationError("f' >= -l violated")
    b1, g1, b2, g2 = nonlinearity.growth_constants
    fs = nonlinearity(s) * s
    a = np.abs(s) ** nonlinearity.p
    if np.any(fs < b1 * a - g1 - tol * scale) or np.any(fs > b2 * a + g2 + tol * scale):
        raise NonlinearityValidationError("growth bounds on f(s)s violated")
    tb1, tg1, tb2, tg2 = nonlinearity.primitive_constants
    F = nonlinearity.primitive(s)
    if np.any(F < tb1 * a - tg1 - tol * scale) or np.any(F > tb2 * a + tg2 + tol * scale):
        raise NonlinearityValidationError("growth bounds on F violated")


@dataclass(frozen=True)
class Numerics:
    """Run-level numerical settings (not constrained by the model assumptions)."""

    dt: float = 0.01
    t_start: float = 0.0
    t_end: float = 50.0
    sample_every: float = 0.1
    radius: float = 10.0
    ensemble: int = 8
    pullback_spacing: float = 10.0
    pullback_levels: int = 5

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.t_start:
            raise ConfigurationError("t_end must not precede t_start")
        if not self.sample_every > 0:
            raise ConfigurationError("sample_every must be positive")
        if not self.radius > 0:
            raise ConfigurationError("radius must be positive")
        if int(self.ensemble) != self.ensemble or self.ensemble < 1:
            raise ConfigurationError("ensemble must be a positive integer")
        if not self.pullback_spacing > 0:
            raise ConfigurationError("pullback_spacing must be positive")
        if int(self.pullback_levels) != self.pullback_levels or self.pullback_levels < 1:
            raise ConfigurationError("pullback_levels must be a positive integer")


@dataclass(frozen=True, eq=False)
class ModelConfig:
    """Validated model plus its derived constants.  Build with :func:`make_config`."""

    basis: EigenBasis
    kernel: object
    grid: object
    eps: EpsilonSpec
    nonlinearity: NonlinearitySpec
    g: np.ndarray
    varrho: float
    admissibility_bound: float
    numerics: Numerics = field(default_factory=Numerics)
    tail_tol: float = DEFAULT_TAIL_TOL

    @property
    def lambda_tilde(self):
        return self.basis.lambda1

    @property
    def L(self):
        return self.eps.L_bound

    @property
    def rho(self):
        return self.kernel.rho

    @property
    def alpha(self):
        return min(self.lambda_tilde / 2, 1 / (2 * self.L), self.rho)

    @property
    def alpha_strong(self):
        return min(self.lambda_tilde, 1 / self.L, self.rho)

    @property
    def l(self):
        return self.nonlinearity.l

    @property
    def g_norm_sq(self):
        return float(sobolev_norm_sq(self.g, self.basis, 0))

    def derived_constants(self):
        return {
            "lambda_tilde": self.lambda_tilde, "L": self.L, "rho": self.rho, "delta": self.kernel.delta,
            "alpha": self.alpha, "alpha_strong": self.alpha_strong, "l": self.l,
            "g_norm_sq": self.g_norm_sq, "S_max": self.grid.s_max, "s_step": self.grid.step,
            "n_s_intervals": self.grid.n_intervals,
        }

    def replace(self, **changes):
        """Rebuild with some ingredients changed (re-running all validation)."""
        kw = dict(domain_length=self.basis.domain_length, n_modes=self.basis.n_modes,
                  n_quad=self.basis.n_quad, eps=self.eps, kernel=self.kernel,
                  nonlinearity=self.nonlinearity, g=self.g, s_step=self.grid.step,
                  tail_tol=self.tail_tol, varrho=self.varrho,
                  admissibility_bound=self.admissibility_bound, numerics=self.numerics)
        if "numerics" not in changes:
            num_keys = {k: changes.pop(k) for k in list(changes) if k in Numerics.__dataclass_fields__}
            if num_keys:
                kw["numerics"] = replace(self.numerics, **num_keys)
        if any(k in changes for k in ("domain_length", "n_modes", "n_quad")) and "g" not in changes:
            old = self.g
            n = changes.get("n_modes", self.basis.n_modes)
            kw["g"] = np.pad(old, (0, max(0, n - old.size)))[:n]
        kw.update(changes)
        return make_config(**kw)


def make_config(domain_length=math.pi, n_modes=32, n_quad=128, eps=None, kernel=None,
                nonlinearity=None, g="w1", s_step=0.01, tail_tol=DEFAULT_TAIL_TOL,
                varrho=1.0, admissibility_bound=1e3, numerics=None):
    """Validate the model ingredients and derive all constants.

    ``g`` may be a coefficient vector, ``"w1"`` (the first mode) or ``None``/0
    for no forcing.  Defaults reproduce the shipped configuration.
    """
    basis = build_basis(domain_length, n_modes, n_quad)
    eps = EpsilonSpec() if eps is None else eps
    kernel = ExponentialKernel() if kernel is None else kernel
    nonlinearity = NonlinearitySpec() if nonlinearity is None else nonlinearity
    numerics = Numerics() if numerics is None else numerics
    if isinstance(g, str):
        if g != "w1":
            raise ConfigurationError(f"unknown forcing shorthand {g!r}")
        g = basis.mode(1)
    elif g is None or (np.isscalar(g) and g == 0):
        g = basis.zeros()
    g = check_field(g, basis).copy()
    if g.ndim != 1:
        raise ShapeError("forcing must be a coefficient vector")
    if not np.all(np.isfinite(g)):
        raise ConfigurationError("forcing must have finite coefficients")
    g.setflags(write=False)
    if not (varrho > 0 and varrho <= kernel.delta * (1 + 1e-12)):
        raise ConfigurationError(f"admissibility rate varrho must lie in (0, delta], got {varrho}")
    if not admissibility_bound > 0:
        raise ConfigurationError("admissibility bound must be positive")

    check_epsilon(eps)
    check_nonlinearity(nonlinearity)
    grid = build_sgrid(kernel, s_step, tail_tol)
    validate_kernel(kernel, grid)
    config = ModelConfig(basis, kernel, grid, eps, nonlinearity, g, float(varrho),
                         float(admissibility_bound), numerics, tail_tol)
    if not config.alpha > 0:
        raise ConfigurationError("alpha must be positive")
    log.debug("derived constants: %s", config.derived_constants())
    return config


@dataclass(frozen=True, eq=False)
class SystemState:
    """A point ``z = (u, eta)`` of the phase space at time ``t``."""

    t: float
    u: np.ndarray
    eta: HistoryField

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 1 or u.shape[0] != self.eta.n_modes:
            raise ShapeError("u and eta disagree on the number of modes")
        object.__setattr__(self, "u", u)

    def __sub__(self, other):
        return SystemState(self.t, self.u - other.u, self.eta - other.eta)

    def __add__(self, other):
        return SystemState(self.t, self.u + other.u, self.eta + other.eta)

    def scaled(self, c):
        return SystemState(self.t, c * self.u, self.eta * c)

    def at(self, t):
        return SystemState(t, self.u, self.eta)

    def copy(self):
        return SystemState(self.t, self.u.copy(), HistoryField(self.eta.coeffs.copy(), self.eta.grid))


def zero_state(config, t=0.0):
    return SystemState(float(t), config.basis.zeros(), zero_history(config.grid, config.basis.n_modes))


def eval_epsilon(eps_spec, t):
    """Return ``(eps(t), eps'(t))`` as floats."""
    e, de = eps_spec(t)
    return float(e), float(de)


def state_norms(state, config):
    """Squared norms of a state (the trajectory CSV columns)."""
    b, k = config.basis, config.kernel
    eps, _ = eval_epsilon(config.eps, state.t)
    u0, u1, u2 = (float(sobolev_norm_sq(state.u, b, s)) for s in (0, 1, 2))
    e1 = mu_norm_sq(state.eta, k, b, 1)
    e2 = mu_norm_sq(state.eta, k, b, 2)
    return {"u_l2": u0, "u_h1": u1, "u_h2": u2, "eta_mu1": e1, "eta_mu2": e2,
            "mt0": u0 + eps * u1 + e1, "mt1": u1 + eps * u2 + e2, "eps": eps}
