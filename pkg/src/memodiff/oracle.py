"""Reference solutions that share no code path with the main stepper.

* :func:`linear_mode_exact` - closed form of one mode of the linear,
  memoryless problem with constant eps.
* :func:`prony_evolve` - for ``mu = c*exp(-delta*s)`` the memory integral
  ``m_j = int mu eta_j ds`` obeys ``m_j' = -delta m_j + (c/delta) u_j``, so the
  whole system closes as 2*n_modes ODEs, integrated here with classical RK4.
* :func:`prony_linear_exact` - the same ODEs solved by matrix exponentials
  when ``f = 0`` and eps is constant.
* :func:`direct_convolution_memory` - the memory forcing evaluated from the
  raw past trajectory as ``A int k(s) u(t-s) ds`` rather than through eta.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import ConfigurationError, CoverageError, InapplicableOracleError, ShapeError
from .memory import kernel_weights, quadrature_weights
from .spectral import check_field, from_physical, to_physical


def linear_mode_exact(lam, eps_const, u0, t):
    """``u0 * exp(-lam*t / (1 + eps*lam))``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or eps_const < 0:
        raise ConfigurationError("lambda and eps must be non-negative")
    return u0 * np.exp(-lam * np.asarray(t, dtype=float) / (1.0 + eps_const * lam))


@dataclass(frozen=True, eq=False)
class PronySystem:
    """Closed ODE system for ``(u_j, m_j)`` under an exponential kernel.

    Attributes
    ----------
    config : ModelConfig
    rate : float
        Kernel decay rate ``delta``.
    mass : float
        ``int_0^inf mu = c/delta``.
    """

    config: object
    rate: float
    mass: float

    @property
    def dimension(self):
        return 2 * self.config.basis.n_modes

    def rhs(self, t, u, m):
        cfg = self.config
        b = cfg.basis
        lam = b.eigenvalues
        eps, _ = cfg.eps(t)
        f = from_physical(cfg.nonlinearity(to_physical(u, b)), b)
        du = (cfg.g - lam * u - lam * m - f) / (1.0 + eps * lam)
        dm = -self.rate * m + self.mass * u
        return du, dm


def prony_system(config):
    kernel = config.kernel
    if not getattr(kernel, "is_exponential", False):
        raise InapplicableOracleError("the Prony reduction needs an exactly exponential kernel")
    return PronySystem(config, float(kernel.rate), float(kernel.total_mass))


def initial_memory(state, config):
    """``m_j = int mu eta_j ds`` of the initial history (same quadrature as the s-grid)."""
    return kernel_weights(config.kernel, state.eta.grid) @ state.eta.coeffs


@dataclass(eq=False)
class PronyTrajectory:
    """RK4 reference solution sampled at the output times."""

    times: np.ndarray
    u: np.ndarray
    m: np.ndarray

    @property
    def final_u(self):
        return self.u[-1]


def prony_evolve(config, z_tau, tau, t, dt, dt_ref=None):
    """Integrate the Prony system from ``tau`` to ``t`` with RK4.

    Parameters
    ----------
    config : ModelConfig
        Must carry an :class:`ExponentialKernel`.
    z_tau : SystemState
    tau, t : float
    dt : float
        Output spacing (the main scheme's step).
    dt_ref : float, optional
        RK4 step, by default ``dt/10``; must divide ``dt``.

    Returns
    -------
    PronyTrajectory
    """
    system = prony_system(config)
    if dt_ref is None:
        dt_ref = dt / 10.0
    if not (dt > 0 and dt_ref > 0 and t >= tau):
        raise ConfigurationError("need dt > 0, dt_ref > 0 and t >= tau")
    sub = round(dt / dt_ref)
    n_out = round((t - tau) / dt)
    if sub < 1 or abs(sub * dt_ref - dt) > 1e-9 * dt or abs(n_out * dt - (t - tau)) > 1e-9 * max(1.0, t - tau):
        raise ConfigurationError("dt_ref must divide dt and dt must divide t - tau")
    h = dt / sub
    u = np.array(z_tau.u, dtype=float)
    m = initial_memory(z_tau, config)
    us = np.empty((n_out + 1, u.size))
    ms = np.empty_like(us)
    us[0], ms[0] = u, m
    s = float(tau)
    for i in range(1, n_out + 1):
        for _ in range(sub):
            k1u, k1m = system.rhs(s, u, m)
            k2u, k2m = system.rhs(s + h / 2, u + h / 2 * k1u, m + h / 2 * k1m)
            k3u, k3m = system.rhs(s + h / 2, u + h / 2 * k2u, m + h / 2 * k2m)
            k4u, k4m = system.rhs(s + h, u + h * k3u, m + h * k3m)
            u = u + h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
            m = m + h / 6 * (k1m + 2 * k2m + 2 * k3m + k4m)
            s += h
        s = tau + i * dt
        us[i], ms[i] = u, m
    return PronyTrajectory(tau + dt * np.arange(n_out + 1), us, ms)


def prony_linear_exact(config, z_tau, tau, t):
    """Exact Prony solution for ``f = 0`` and constant eps, mode by mode.

    Each mode is the affine system ``d/dt (u, m, 1) = B (u, m, 1)`` solved by
    the matrix exponential of ``B (t - tau)``.
    """
    system = prony_system(config)
    if config.nonlinearity.kind != "zero":
        raise InapplicableOracleError("the exact linear solution needs f = 0")
    if not config.eps.autonomous:
        raise InapplicableOracleError("the exact linear solution needs constant eps")
    eps = config.eps.eps0
    lam = config.basis.eigenvalues
    u0 = np.asarray(z_tau.u, dtype=float)
    m0 = initial_memory(z_tau, config)
    u = np.empty_like(u0)
    m = np.empty_like(u0)
    for j, lj in enumerate(lam):
        a = 1.0 + eps * lj
        B = np.array([[-lj / a, -lj / a, config.g[j] / a],
                      [system.mass, -system.rate, 0.0],
                      [0.0, 0.0, 0.0]])
        y = expm(B * (t - tau)) @ np.array([u0[j], m0[j], 1.0])
        u[j], m[j] = y[0], y[1]
    return u, m


def direct_convolution_memory(u_past, dt, kernel, basis, s_max, boundary=True):
    """Memory forcing from the raw trajectory: ``A int_0^S k(s) u(t - s) ds``.

    Parameters
    ----------
    u_past : array_like, shape (N+1, n_modes)
        Chronological samples with spacing ``dt``; the last row is time ``t``.
    dt : float
    kernel : MemoryKernel
        Must provide ``k`` with ``-k' = mu``.
    basis : EigenBasis
    s_max : float
        Truncation point, a whole number of samples.
    boundary : bool
        Subtract ``A k(S) eta(S)``, the boundary term of the integration by
        parts, so that the result matches the truncated ``A int mu eta ds``.
    """
    u = check_field(u_past, basis)
    if u.ndim != 2:
        raise ShapeError("u_past must be a 2-D array of samples")
    n = round(s_max / dt)
    if abs(n * dt - s_max) > 1e-9 * max(1.0, s_max):
        raise ConfigurationError(f"S_max = {s_max} is not a whole number of samples dt = {dt}")
    if u.shape[0] - 1 < n:
        raise CoverageError(f"trajectory covers {(u.shape[0] - 1) * dt:.6g} < S_max = {s_max:.6g}")
    back = u[::-1][:n + 1]
    s = dt * np.arange(n + 1)
    conv = (quadrature_weights(n, dt) * kernel.k(s)) @ back
    if boundary:
        eta_end = np.trapezoid(back, dx=dt, axis=0)
        conv = conv - float(kernel.k(s[-1])) * eta_end
    return basis.eigenvalues * conv
