"""Memory kernels and the history variable on a truncated s-grid.

The history of a trajectory is stored as ``eta(s) = int_0^s u(t - r) dr``
sampled on a uniform grid ``0 = s_0 < ... < s_M = S_max`` for every spectral
mode.  The kernel ``mu = -k'`` weights the history in the memory forcing
``A int mu(s) eta(s) ds`` and in the norms ``||eta||_{mu,r}``.
"""

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import ConfigurationError, CoverageError, InvalidKernelError, ShapeError
from .reports import EstimateReport, fmt
from .spectral import check_field, sobolev_norm_sq, sobolev_weights

DEFAULT_TAIL_TOL = 1e-10
MIN_INTERVALS = 8
KERNEL_TOL = 1e-12

# fourth-order Gregory end corrections of the trapezoid rule
_GREGORY = np.array([3 / 8, 7 / 6, 23 / 24])


class OffGridWarning(UserWarning):
    """History shifted by a non-integer number of grid cells."""


class MemoryKernel:
    """Interface shared by the kernels: ``mu``, its derivative and ``k``.

    Subclasses provide ``__call__`` (mu), ``derivative`` (mu'), ``k``
    (with ``-k' = mu`` and ``k(inf) = 0``), and the attributes ``delta``
    (decay constant of the sign condition), ``rho`` (pairing constant) and
    ``total_mass``.
    """

    is_exponential = False

    @property
    def is_zero(self):
        return self.total_mass == 0.0


@dataclass(frozen=True)
class ExponentialKernel(MemoryKernel):
    """``mu(s) = amplitude * exp(-rate * s)``.

    ``delta`` is the decay constant claimed for the sign condition
    ``mu' + delta*mu <= 0``; it defaults to ``rate`` and is checked, not
    trusted, by :func:`validate_kernel`.
    """

    amplitude: float = 1.0
    rate: float = 1.0
    delta: float = None

    is_exponential = True

    def __post_init__(self):
        if not self.rate > 0:
            raise ConfigurationError(f"kernel rate must be positive, got {self.rate}")
        if self.amplitude < 0:
            raise ConfigurationError(f"kernel amplitude must be non-negative, got {self.amplitude}")
        if self.delta is None:
            object.__setattr__(self, "delta", float(self.rate))
        if not self.delta > 0:
            raise ConfigurationError(f"kernel delta must be positive, got {self.delta}")

    def __call__(self, s):
        return self.amplitude * np.exp(-self.rate * np.asarray(s, dtype=float))

    def derivative(self, s):
        return -self.rate * self(s)

    def k(self, s):
        return self(s) / self.rate

    @property
    def rho(self):
        return float(self.delta)

    @property
    def total_mass(self):
        return self.amplitude / self.rate


class TabulatedKernel(MemoryKernel):
    """Kernel given by samples, linearly interpolated and zero past the last node.

    Parameters
    ----------
    s, values : array_like
        Strictly increasing nodes starting at 0 and the kernel values there.
    delta : float
        Decay constant claimed for the sign condition.
    """

    def __init__(self, s, values, delta):
        s = np.asarray(s, dtype=float)
        values = np.asarray(values, dtype=float)
        if s.ndim != 1 or s.shape != values.shape or s.size < 3:
            raise ShapeError("tabulated kernel needs matching 1-D node and value arrays (>= 3 nodes)")
        if s[0] != 0 or np.any(np.diff(s) <= 0):
            raise ConfigurationError("tabulated kernel nodes must start at 0 and increase strictly")
        self.s = s
        self.values = values
        self.delta = float(delta)
        self._slope = np.gradient(values, s, edge_order=2)
        tail = cumulative_trapezoid(values[::-1], -s[::-1], initial=0.0)[::-1]
        self._k = tail

    def __call__(self, s):
        return np.interp(s, self.s, self.values, right=0.0)

    def derivative(self, s):
        return np.interp(s, self.s, self._slope, right=0.0)

    def k(self, s):
        return np.interp(s, self.s, self._k, right=0.0)

    @property
    def rho(self):
        positive = self.values > 0
        if not np.any(positive):
            return self.delta
        return float(np.min(-self._slope[positive] / self.values[positive]))

    @property
    def total_mass(self):
        return float(self._k[0])

    @property
    def s_max(self):
        return float(self.s[-1])


def quadrature_weights(n_intervals, h):
    """Trapezoid weights with fourth-order Gregory end corrections."""
    if n_intervals < 5:
        raise ConfigurationError(f"need at least 5 intervals for the s-quadrature, got {n_intervals}")
    w = np.full(n_intervals + 1, h)
    w[:3] *= _GREGORY
    w[-3:] *= _GREGORY[::-1]
    return w


@dataclass(frozen=True, eq=False)
class SGrid:
    """Uniform grid on ``[0, S_max]`` with quadrature weights."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def step(self):
        return float(self.nodes[1] - self.nodes[0])

    @property
    def n_intervals(self):
        return self.nodes.size - 1

    @property
    def s_max(self):
        return float(self.nodes[-1])

    def steps_per(self, dt):
        """Number of grid cells covered by ``dt`` if it is an integer, else None."""
        q = dt / self.step
        nq = round(q)
        if nq >= 1 and abs(q - nq) <= 1e-9 * max(1.0, q):
            return int(nq)
        return None


def uniform_sgrid(s_max, n_intervals):
    """Grid with ``n_intervals`` equal cells on ``[0, s_max]``."""
    if not s_max > 0:
        raise ConfigurationError(f"S_max must be positive, got {s_max}")
    n = int(n_intervals)
    h = s_max / n
    nodes = h * np.arange(n + 1)
    grid = SGrid(nodes, quadrature_weights(n, h))
    grid.nodes.setflags(write=False)
    grid.weights.setflags(write=False)
    return grid


def build_sgrid(kernel, step, tail_tol=DEFAULT_TAIL_TOL):
    """Grid of spacing ``step`` long enough that ``mu(S_max)/mu(0) <= tail_tol``.

    ``S_max = -ln(tail_tol)/delta`` rounded up to a whole number of cells.
    A zero kernel gets the minimal grid, as the history then carries no weight.
    """
    if not step > 0:
        raise ConfigurationError(f"s-grid step must be positive, got {step}")
    if not 0 < tail_tol < 1:
        raise ConfigurationError(f"tail tolerance must lie in (0, 1), got {tail_tol}")
    if kernel.is_zero:
        n = MIN_INTERVALS
    elif isinstance(kernel, TabulatedKernel):
        n = math.ceil(kernel.s_max / step - 1e-9)
    else:
        n = math.ceil(-math.log(tail_tol) / kernel.delta / step - 1e-9)
    n = max(n, MIN_INTERVALS)
    return uniform_sgrid(n * step, n)


def tail_ratio(kernel, grid):
    mu0 = float(kernel(0.0))
    return 0.0 if mu0 == 0 else float(kernel(grid.s_max)) / mu0


@dataclass(frozen=True, eq=False)
class HistoryField:
    """History ``eta`` sampled on an s-grid: ``coeffs[k, j]`` is mode ``j`` at ``s_k``."""

    coeffs: np.ndarray
    grid: SGrid

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != self.grid.nodes.size:
            raise ShapeError(f"history needs {self.grid.nodes.size} rows, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def n_modes(self):
        return self.coeffs.shape[1]

    def is_valid(self):
        return bool(np.all(np.isfinite(self.coeffs)) and not np.any(self.coeffs[0]))

    def __add__(self, other):
        return HistoryField(self.coeffs + other.coeffs, self.grid)

    def __sub__(self, other):
        return HistoryField(self.coeffs - other.coeffs, self.grid)

    def __mul__(self, c):
        return HistoryField(c * self.coeffs, self.grid)

    __rmul__ = __mul__


def zero_history(grid, n_modes):
    return HistoryField(np.zeros((grid.nodes.size, n_modes)), grid)


def profile_history(u, grid, profile):
    """History ``eta(s) = profile(s) * u`` for a scalar profile with ``profile(0) = 0``."""
    phi = np.asarray(profile(grid.nodes), dtype=float)
    coeffs = np.outer(phi, u)
    coeffs[0] = 0.0
    return HistoryField(coeffs, grid)


def constant_past_history(u, grid):
    """History of a trajectory that held the value ``u`` for all past times."""
    return profile_history(u, grid, lambda s: s)


def decaying_past_history(u, grid, rate):
    """History of the past trajectory ``u(t - r) = exp(-rate*r) * u``."""
    if rate == 0:
        return constant_past_history(u, grid)
    return profile_history(u, grid, lambda s: -np.expm1(-rate * s) / rate)


def validate_kernel(kernel, grid, tol=KERNEL_TOL, raise_on_fail=True):
    """Check ``mu >= 0``, ``mu' <= 0`` and ``mu' + delta*mu <= 0`` at every node.

    Returns
    -------
    EstimateReport
        ``lhs = mu' + delta*mu`` against ``rhs = 0`` at each node.

    Raises
    ------
    InvalidKernelError
        If any node violates a condition by more than ``tol`` and
        ``raise_on_fail`` is set.
    """
    s = grid.nodes
    mu = kernel(s)
    dmu = kernel.derivative(s)
    decay = dmu + kernel.delta * mu
    report = EstimateReport("kernel_sign_condition", s, decay, np.zeros_like(s), tolerance=tol,
                            info={"delta": float(kernel.delta)})
    if raise_on_fail:
        for label, bad in (("mu >= 0", mu < -tol), ("mu' <= 0", dmu > tol),
                           ("mu' + delta*mu <= 0", decay > tol)):
            if np.any(bad):
                node = float(s[np.argmax(bad)])
                raise InvalidKernelError(f"kernel violates {label} at s={node:.6g}", node=node)
    return report


def _interp_rows(values, spacing, s):
    """Linear interpolation in the first axis of rows sampled at ``i*spacing``."""
    pos = s / spacing
    near = np.rint(pos)
    pos = np.where(np.abs(pos - near) <= 1e-9 * np.maximum(1.0, near), near, pos)
    i0 = np.minimum(np.floor(pos).astype(int), values.shape[0] - 1)
    frac = pos - i0
    i1 = np.minimum(i0 + 1, values.shape[0] - 1)
    return (1.0 - frac)[:, None] * values[i0] + frac[:, None] * values[i1]


def history_from_trajectory(u_samples, dt, grid):
    """Build ``eta(s) = int_0^s u(t - r) dr`` from a sampled past trajectory.

    Parameters
    ----------
    u_samples : array_like, shape (N+1, n_modes)
        Chronological coefficient samples with uniform spacing ``dt``; the last
        row is the value at the current time ``t``.
    dt : float
        Sample spacing.
    grid : SGrid

    Returns
    -------
    HistoryField
        Composite-trapezoid values, interpolated linearly when grid nodes fall
        between samples.
    """
    u = np.asarray(u_samples, dtype=float)
    if u.ndim != 2:
        raise ShapeError(f"trajectory samples must be 2-D, got shape {u.shape}")
    covered = (u.shape[0] - 1) * dt
    if covered < grid.s_max * (1 - 1e-12):
        raise CoverageError(f"trajectory covers {covered:.6g} < S_max = {grid.s_max:.6g}")
    back = u[::-1]
    eta_lags = cumulative_trapezoid(back, dx=dt, axis=0, initial=0.0)
    coeffs = _interp_rows(eta_lags, dt, grid.nodes)
    coeffs[0] = 0.0
    return HistoryField(coeffs, grid)


def kernel_weights(kernel, grid):
    """Quadrature weights times kernel values, ``w_k * mu(s_k)``."""
    return grid.weights * kernel(grid.nodes)


def memory_term(history, kernel, basis):
    """Memory forcing ``A int mu(s) eta(s) ds`` as a coefficient vector."""
    if history.n_modes != basis.n_modes:
        raise ShapeError("history and basis disagree on the number of modes")
    return basis.eigenvalues * (kernel_weights(kernel, history.grid) @ history.coeffs)


def mu_norm_sq(history, kernel, basis, r):
    """``||eta||_{mu,r}**2 = int mu(s) ||eta(s)||_r**2 ds``."""
    lam_r = sobolev_weights(basis, r)
    return float(kernel_weights(kernel, history.grid) @ ((history.coeffs ** 2) @ lam_r))


def advance_history(history, u_new, dt):
    """Transport the history over one step in which ``u`` equals ``u_new``.

    Solves ``eta_t = -eta_s + u`` along characteristics:
    ``eta(s) <- eta(s - dt) + dt*u_new`` for ``s >= dt`` and
    ``eta(s) <- s*u_new`` for ``s < dt``.  When ``dt`` is a whole number of
    grid cells the shift is exact; otherwise ``eta(s - dt)`` is linearly
    interpolated and an :class:`OffGridWarning` is issued.
    """
    grid = history.grid
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if dt > grid.s_max:
        raise ConfigurationError(f"dt = {dt} exceeds S_max = {grid.s_max}")
    u_new = np.asarray(u_new, dtype=float)
    if u_new.shape != (history.n_modes,):
        raise ShapeError(f"u_new must have {history.n_modes} coefficients")
    s = grid.nodes
    q = grid.steps_per(dt)
    new = np.empty_like(history.coeffs)
    if q is not None:
        new[q:] = history.coeffs[:-q] + dt * u_new
        new[:q] = np.outer(s[:q], u_new)
    else:
        warnings.warn(f"dt={dt} is not a multiple of the s-grid step {grid.step}; "
                      "history transport is only first-order accurate", OffGridWarning, stacklevel=2)
        inside = s >= dt
        new[inside] = _interp_rows(history.coeffs, grid.step, s[inside] - dt) + dt * u_new
        new[~inside] = np.outer(s[~inside], u_new)
    new[0] = 0.0
    return HistoryField(new, grid)


def s_derivative(history):
    """Fourth-order finite-difference ``d eta / ds`` on the grid."""
    e = history.coeffs
    h = history.grid.step
    if e.shape[0] < 5:
        raise ShapeError("need at least 5 grid nodes for the s-derivative")
    d = np.empty_like(e)
    d[2:-2] = (e[:-4] - 8 * e[1:-3] + 8 * e[3:-1] - e[4:]) / (12 * h)
    d[0] = (-25 * e[0] + 48 * e[1] - 36 * e[2] + 16 * e[3] - 3 * e[4]) / (12 * h)
    d[1] = (-3 * e[0] - 10 * e[1] + 18 * e[2] - 6 * e[3] + e[4]) / (12 * h)
    d[-1] = (25 * e[-1] - 48 * e[-2] + 36 * e[-3] - 16 * e[-4] + 3 * e[-5]) / (12 * h)
    d[-2] = (3 * e[-1] + 10 * e[-2] - 18 * e[-3] + 6 * e[-4] - e[-5]) / (12 * h)
    return d


def memory_pairing(history, kernel, basis, r):
    """``<eta, eta_s>_{mu,r} = int mu(s) <eta(s), eta_s(s)>_r ds``."""
    lam_r = sobolev_weights(basis, r)
    integrand = (history.coeffs * s_derivative(history)) @ lam_r
    return float(kernel_weights(kernel, history.grid) @ integrand)


def pairing_by_parts(history, kernel, basis, r):
    """Right side of the integration-by-parts identity for the pairing.

    ``-1/2 int mu'(s) ||eta(s)||_r^2 ds + 1/2 mu(S) ||eta(S)||_r^2``, the last
    term being the boundary contribution at the truncation point.
    """
    lam_r = sobolev_weights(basis, r)
    grid = history.grid
    sq = (history.coeffs ** 2) @ lam_r
    interior = -0.5 * float((grid.weights * kernel.derivative(grid.nodes)) @ sq)
    return interior + 0.5 * float(kernel(grid.s_max)) * float(sq[-1])


def pairing_lower_bound_check(history, kernel, basis, r, tol=1e-6):
    """Check ``<eta, eta_s>_{mu,r} >= (rho/2) ||eta||_{mu,r}^2``.

    ``tol`` is relative to ``||eta||_{mu,r}^2``.  The bound is stored in
    ``lhs`` and the pairing in ``rhs``, so the margin is pairing minus bound.
    """
    norm = mu_norm_sq(history, kernel, basis, r)
    bound = 0.5 * kernel.rho * norm
    pairing = memory_pairing(history, kernel, basis, r)
    return EstimateReport(f"pairing_r{fmt(r)}", [0.0], [bound], [pairing], tolerance=tol * norm,
                          info={"rho": float(kernel.rho), "norm_sq": norm})


def admissibility_integral(u_samples, dt, basis, varrho):
    """``int_0^T exp(-varrho*s) ||grad u(-s)||^2 ds`` for chronological samples."""
    u = check_field(u_samples, basis)[::-1]
    s = dt * np.arange(u.shape[0])
    grad_sq = (u ** 2) @ basis.eigenvalues
    return float(np.trapezoid(np.exp(-varrho * s) * grad_sq, dx=dt))


def decaying_past_admissibility(u, basis, rate, varrho):
    """Closed form of :func:`admissibility_integral` for the past ``u(-s) = exp(-rate*s) u``."""
    return float(sobolev_norm_sq(u, basis, 1)) / (varrho + 2.0 * rate)


def write_history_csv(history, stream):
    """Write ``s, mode, coefficient`` rows (modes are 1-based)."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("s", "mode", "coefficient"))
    for s, row in zip(history.grid.nodes, history.coeffs):
        for j, c in enumerate(row, start=1):
            writer.writerow((fmt(s), j, fmt(c)))
