"""Dirichlet sine eigenbasis of -d^2/dx^2 on an interval (0, length).

A spatial field is held as its coefficient vector against the orthonormal
modes ``w_j(x) = sqrt(2/length) * sin(j*pi*x/length)``, so every operator
built from the Laplacian is diagonal.  Coefficient vectors are plain float
arrays whose last axis runs over modes; leading axes are treated as a batch.

The physical grid is ``x_k = k*length/(n_quad+1)``, ``k = 1..n_quad``, with
uniform weights.  On this grid the sampled modes are exactly orthonormal for
``j <= n_quad`` (the DST-I identity), so projection is exact for any
polynomial nonlinearity whose product modes stay below ``n_quad + 1``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NormRangeError, ShapeError, SingularOperatorError

MAX_SOBOLEV_EXPONENT = 3.0


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Truncated eigenbasis together with its collocation grid.

    Attributes
    ----------
    domain_length : float
        Length of the interval.
    n_modes : int
        Number of retained modes.
    eigenvalues : ndarray, shape (n_modes,)
        ``(j*pi/length)**2`` for ``j = 1..n_modes``.
    x : ndarray, shape (n_quad,)
        Interior collocation points.
    weight : float
        Uniform quadrature weight of every collocation point.
    modes : ndarray, shape (n_quad, n_modes)
        Orthonormal modes sampled on ``x``.
    """

    domain_length: float
    n_modes: int
    eigenvalues: np.ndarray
    x: np.ndarray
    weight: float
    modes: np.ndarray

    @property
    def n_quad(self):
        return self.x.size

    @property
    def lambda1(self):
        return float(self.eigenvalues[0])

    def mode(self, j, amplitude=1.0):
        """Coefficient vector of ``amplitude * w_j`` (``j`` is 1-based)."""
        if not 1 <= j <= self.n_modes:
            raise ShapeError(f"mode index {j} outside 1..{self.n_modes}")
        c = np.zeros(self.n_modes)
        c[j - 1] = amplitude
        return c

    def zeros(self):
        return np.zeros(self.n_modes)


def build_basis(domain_length, n_modes, n_quad):
    """Build the Dirichlet eigenbasis on ``(0, domain_length)``.

    Parameters
    ----------
    domain_length : float
        Interval length, > 0.
    n_modes : int
        Number of modes, >= 1.
    n_quad : int
        Number of collocation points, >= 4 * n_modes.

    Returns
    -------
    EigenBasis
    """
    if not np.isfinite(domain_length) or domain_length <= 0:
        raise ConfigurationError(f"domain length must be positive, got {domain_length}")
    if int(n_modes) != n_modes or n_modes < 1:
        raise ConfigurationError(f"n_modes must be a positive integer, got {n_modes}")
    if int(n_quad) != n_quad or n_quad < 4 * n_modes:
        raise ConfigurationError(f"n_quad must be an integer >= 4*n_modes = {4 * n_modes}, got {n_quad}")
    n_modes, n_quad = int(n_modes), int(n_quad)
    length = float(domain_length)
    j = np.arange(1, n_modes + 1)
    eigenvalues = (j * np.pi / length) ** 2
    x = length * np.arange(1, n_quad + 1) / (n_quad + 1)
    weight = length / (n_quad + 1)
    modes = np.sqrt(2.0 / length) * np.sin(np.outer(x, j) * np.pi / length)
    for a in (eigenvalues, x, modes):
        a.setflags(write=False)
    return EigenBasis(length, n_modes, eigenvalues, x, weight, modes)


def check_field(field, basis):
    """Return ``field`` as a float array whose last axis matches the basis."""
    c = np.asarray(field, dtype=float)
    if c.ndim == 0 or c.shape[-1] != basis.n_modes:
        raise ShapeError(f"expected {basis.n_modes} coefficients, got shape {c.shape}")
    return c


def _check_exponent(s):
    if not 0.0 <= s <= MAX_SOBOLEV_EXPONENT:
        raise NormRangeError(f"Sobolev exponent {s} outside [0, {MAX_SOBOLEV_EXPONENT}]")


def sobolev_weights(basis, s):
    """Diagonal weights ``lambda_j**s`` of the squared ``H_s`` norm."""
    _check_exponent(s)
    return basis.eigenvalues ** s


def sobolev_norm_sq(field, basis, s):
    """Squared norm ``sum_j lambda_j**s * c_j**2``; ``s=0`` is the L2 norm."""
    c = check_field(field, basis)
    return np.sum(sobolev_weights(basis, s) * c * c, axis=-1)


def resolvent_solve(a, b, rhs, basis):
    """Solve ``(a I + b A) v = rhs`` with ``A = -d^2/dx^2``.

    ``b`` may be a scalar or a per-mode array.
    """
    r = check_field(rhs, basis)
    denom = a + b * basis.eigenvalues
    if np.any(denom == 0):
        raise SingularOperatorError(f"a + b*lambda_j vanishes for a={a}, b={b}")
    return r / denom


def apply_operator(a, b, field, basis):
    """Apply ``a I + b A``; inverse of :func:`resolvent_solve`."""
    return (a + b * basis.eigenvalues) * check_field(field, basis)


def to_physical(field, basis):
    """Values of the field on the collocation grid."""
    return check_field(field, basis) @ basis.modes.T


def from_physical(values, basis):
    """Project grid values onto the retained modes."""
    v = np.asarray(values, dtype=float)
    if v.ndim == 0 or v.shape[-1] != basis.n_quad:
        raise ShapeError(f"expected {basis.n_quad} grid values, got shape {v.shape}")
    return basis.weight * (v @ basis.modes)


def evaluate(field, basis, x):
    """Evaluate the field at arbitrary points ``x`` in ``[0, length]``."""
    c = check_field(field, basis)
    x = np.asarray(x, dtype=float)
    j = np.arange(1, basis.n_modes + 1)
    w = np.sqrt(2.0 / basis.domain_length) * np.sin(np.multiply.outer(x, j) * np.pi / basis.domain_length)
    return w @ c


def lp_norm_p(field, basis, p):
    """``||u||_p**p`` approximated on the collocation grid."""
    u = to_physical(field, basis)
    return basis.weight * np.sum(np.abs(u) ** p, axis=-1)
