"""Sine-basis spectral fields for Dirichlet problems on the unit interval.

The state space is spanned by the orthonormal eigenfunctions
e_i(x) = sqrt(2) sin(i pi x) of the Dirichlet Laplacian A = -d^2/dx^2,
with eigenvalues lambda_i = pi^2 i^2.  A field is stored as its first N
coefficients; grid representations live on the interior points
x_k = k/(M+1), k = 1..M, where the boundary values are identically zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dst

_SQRT2 = np.sqrt(2.0)


@lru_cache(maxsize=None)
def eigenvalues(n_modes: int) -> np.ndarray:
    """Eigenvalues pi^2 i^2 of the Dirichlet Laplacian, modes i = 1..n_modes."""
    if n_modes < 1:
        raise ValueError("need at least one mode")
    lam = (np.pi * np.arange(1, n_modes + 1)) ** 2
    lam.flags.writeable = False
    return lam


def grid_points(m: int) -> np.ndarray:
    """Interior grid x_k = k/(M+1), k = 1..M."""
    if m < 1:
        raise ValueError("grid must contain at least one interior point")
    return np.arange(1, m + 1) / (m + 1)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Immutable coefficient vector (a_1, ..., a_N) against e_i = sqrt(2) sin(i pi x)."""

    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("coefficients must form a non-empty 1-d vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite coefficient in spectral field")
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    @property
    def n_modes(self) -> int:
        return self.coeffs.size


@dataclass(frozen=True, eq=False)
class GridField:
    """Immutable values at the M interior grid points; boundary values are zero."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("values must form a non-empty 1-d vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite value in grid field")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def m(self) -> int:
        return self.values.size


# Raw-array kernels used by the integrator hot loop; the public wrappers below
# add the dataclass types and precondition checks.

def coeffs_to_values(coeffs: np.ndarray, m: int) -> np.ndarray:
    # DST-I of the zero-padded coefficients gives 2 * sum a_i sin(i pi x_k);
    # the basis carries an extra sqrt(2).
    buf = np.zeros(m)
    buf[: coeffs.size] = coeffs
    return dst(buf, type=1) / _SQRT2


def values_to_coeffs(values: np.ndarray, n_modes: int) -> np.ndarray:
    m = values.size
    return dst(values, type=1)[:n_modes] * (_SQRT2 / (2.0 * (m + 1)))


def inverse_transform(field: SpectralField, m: int) -> GridField:
    """Evaluate the field at the M interior grid points.

    M >= N is required so every mode is representable on the grid; the
    round trip forward_transform(inverse_transform(X)) is then exact.
    """
    if m < field.n_modes:
        raise ValueError(
            f"grid with {m} interior points cannot represent {field.n_modes} modes"
        )
    return GridField(coeffs_to_values(field.coeffs, m))


def forward_transform(grid: GridField, n_modes: int) -> SpectralField:
    """Project grid values onto the first n_modes sine coefficients.

    Uses the discrete orthogonality of sin(i pi x_k) on the uniform grid:
    a_i = sqrt(2)/(M+1) * sum_k values_k sin(i pi x_k).  Exact (not just
    approximate) whenever the underlying function is band-limited to at
    most M modes.
    """
    if n_modes < 1:
        raise ValueError("need at least one mode")
    if grid.m < n_modes:
        raise ValueError(
            f"grid with {grid.m} interior points cannot resolve {n_modes} modes"
        )
    return SpectralField(values_to_coeffs(grid.values, n_modes))


def apply_semigroup(field: SpectralField, t: float) -> SpectralField:
    """Apply the heat semigroup S(t) = exp(-tA), diagonal in the sine basis."""
    if t < 0:
        raise ValueError(f"semigroup time must be nonnegative, got {t}")
    lam = eigenvalues(field.n_modes)
    return SpectralField(field.coeffs * np.exp(-t * lam))


def apply_fractional_power(field: SpectralField, gamma: float) -> SpectralField:
    """Apply A^(gamma/2) mode-wise, the scaling behind the H^gamma norms.

    gamma may be negative; A has no zero eigenvalue.
    """
    lam = eigenvalues(field.n_modes)
    return SpectralField(field.coeffs * lam ** (gamma / 2.0))


def l2_norm(field: SpectralField) -> float:
    """L2 norm via Parseval: the Euclidean norm of the coefficients."""
    return float(np.linalg.norm(field.coeffs))


def sobolev_norm(field: SpectralField, beta: float) -> float:
    """Norm of A^(beta/2) X, i.e. the H^beta Dirichlet norm."""
    lam = eigenvalues(field.n_modes)
    return float(np.linalg.norm(field.coeffs * lam ** (beta / 2.0)))


def sup_norm(field: SpectralField, oversample: int = 4) -> float:
    """Max of |X| on an oversampled grid (a lower bound on the true sup norm).

    Diagnostic only; oversample >= 2 keeps the bound reasonably tight.
    """
    if oversample < 1:
        raise ValueError("oversample factor must be at least 1")
    vals = coeffs_to_values(field.coeffs, oversample * field.n_modes)
    return float(np.max(np.abs(vals)))


def lp_norm(field: SpectralField, p: int, m: int | None = None) -> float:
    """L^p norm, p in {2, 4, 6}, by uniform-grid quadrature with M points.

    The quadrature is (1/(M+1)) sum |X(x_k)|^p; the boundary terms of the
    trapezoid rule vanish because the field does.  Defaults to M = 2N,
    which integrates |X|^4 exactly for band-limited X.
    """
    if p not in (2, 4, 6):
        raise ValueError(f"unsupported norm order p={p}; expected one of 2, 4, 6")
    n = field.n_modes
    if m is None:
        m = 2 * n
    if m < 2 * n:
        raise ValueError(f"quadrature grid m={m} must be at least 2N={2 * n}")
    vals = coeffs_to_values(field.coeffs, m)
    return float(((vals**p).sum() / (m + 1)) ** (1.0 / p))
