"""Symmetric positive-semidefinite matrix numerics.

Covariances live here as SymPsdMatrix: only the lower triangle is stored, so
symmetry holds by construction rather than by discipline. Factorization is
Cholesky-based with an escalating jitter ladder; eigenvalue queries go through
LAPACK's symmetric solver (numpy.linalg.eigvalsh).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch, NotPositiveSemidefinite

# Largest supported matrix dimension. Feature spaces in this library need
# k in {2, 5}; the cap leaves headroom without inviting sizes the dense
# algorithms here were never profiled for.
MAX_DIM = 16

# Relative tolerance below which a matrix still counts as PSD.
PSD_TOL = 1e-9

# Jitter escalation ladder, each step relative to the matrix scale.
JITTER_STEPS = (1e-12, 1e-10, 1e-8)


class SymPsdMatrix:
    """Symmetric nonnegative-definite matrix of dimension k.

    Storage is the lower triangle, row-major, k(k+1)/2 entries. Semidefinite
    inputs are legal; "PSD" is enforced only up to PSD_TOL times the matrix
    scale, so tiny negative eigenvalues from upstream rounding pass through.
    """

    __slots__ = ("dim", "_tri")

    def __init__(self, dim: int, tri: np.ndarray):
        if dim < 1:
            raise DimensionMismatch("matrix dimension must be at least 1")
        if dim > MAX_DIM:
            raise DimensionMismatch(f"matrix dimension {dim} above supported cap {MAX_DIM}")
        tri = np.asarray(tri, dtype=np.float64).reshape(-1)
        if tri.size != dim * (dim + 1) // 2:
            raise DimensionMismatch(
                f"lower triangle of a {dim}x{dim} matrix needs {dim * (dim + 1) // 2} "
                f"entries, got {tri.size}"
            )
        if not np.all(np.isfinite(tri)):
            raise ValueError("matrix entries must be finite")
        self.dim = dim
        self._tri = tri

    @classmethod
    def from_full(cls, full: np.ndarray) -> "SymPsdMatrix":
        """Build from a dense square array, symmetrizing by averaging.

        The averaging step means an almost-symmetric input (rounding noise in
        the upper triangle) lands on one well-defined matrix.
        """
        full = np.asarray(full, dtype=np.float64)
        if full.ndim != 2 or full.shape[0] != full.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {full.shape}")
        sym = 0.5 * (full + full.T)
        k = full.shape[0]
        return cls(k, sym[np.tril_indices(k)])

    @classmethod
    def from_lower(cls, dim: int, entries) -> "SymPsdMatrix":
        """Build from the row-major lower-triangle entries."""
        return cls(dim, np.asarray(entries, dtype=np.float64))

    @classmethod
    def identity(cls, dim: int) -> "SymPsdMatrix":
        return cls.from_full(np.eye(dim))

    @classmethod
    def diagonal(cls, values) -> "SymPsdMatrix":
        return cls.from_full(np.diag(np.asarray(values, dtype=np.float64)))

    @classmethod
    def zeros(cls, dim: int) -> "SymPsdMatrix":
        return cls(dim, np.zeros(dim * (dim + 1) // 2))

    def full(self) -> np.ndarray:
        """Dense (k, k) symmetric array; a fresh copy each call."""
        k = self.dim
        out = np.zeros((k, k))
        il = np.tril_indices(k)
        out[il] = self._tri
        out.T[il] = self._tri
        return out

    def lower_triangle(self) -> np.ndarray:
        """The stored row-major lower-triangle entries (copy)."""
        return self._tri.copy()

    def trace(self) -> float:
        k = self.dim
        # diagonal entry j sits at triangle offset j(j+1)/2 + j
        idx = np.arange(k) * (np.arange(k) + 3) // 2
        return float(self._tri[idx].sum())

    def scale(self) -> float:
        """Scale factor max(1, trace/k) used to make tolerances relative."""
        return max(1.0, self.trace() / self.dim)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.full())[0])

    def is_psd(self, tol: float = PSD_TOL) -> bool:
        return self.min_eigenvalue() >= -tol * self.scale()

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymPsdMatrix):
            return NotImplemented
        return self.dim == other.dim and bool(np.array_equal(self._tri, other._tri))

    def __hash__(self):
        return hash((self.dim, self._tri.tobytes()))

    def __repr__(self) -> str:
        return f"SymPsdMatrix(dim={self.dim}, tri={self._tri.tolist()})"


class CholFactor:
    """Lower-triangular factor L with nonnegative diagonal, L @ L.T = m + delta*I."""

    __slots__ = ("dim", "lower")

    def __init__(self, dim: int, lower: np.ndarray):
        self.dim = dim
        self.lower = np.asarray(lower, dtype=np.float64)

    def matrix(self) -> SymPsdMatrix:
        """Reassemble the factored matrix."""
        return SymPsdMatrix.from_full(self.lower @ self.lower.T)

    def __repr__(self) -> str:
        return f"CholFactor(dim={self.dim})"


def _clamped_lower(a: np.ndarray, tol: float) -> np.ndarray | None:
    """Textbook lower Cholesky that tolerates pivots in [-tol, 0].

    A pivot in that band is clamped to zero; that is only sound when the
    residual column entries are small enough that the corresponding 2x2
    Schur minors stay PSD within tol. Returns None when the input is
    indefinite beyond tolerance.
    """
    k = a.shape[0]
    low = np.zeros_like(a)
    for j in range(k):
        d = float(a[j, j] - low[j, :j] @ low[j, :j])
        if d > 0.0:
            low[j, j] = math.sqrt(d)
            for i in range(j + 1, k):
                low[i, j] = (a[i, j] - low[i, :j] @ low[j, :j]) / low[j, j]
        elif d >= -tol:
            low[j, j] = 0.0
            for i in range(j + 1, k):
                r = float(a[i, j] - low[i, :j] @ low[j, :j])
                s_ii = float(a[i, i] - low[i, :j] @ low[i, :j])
                # minor [[d, r], [r, s_ii]] must be PSD within tol
                if r * r > tol * (max(s_ii, 0.0) + tol):
                    return None
                low[i, j] = 0.0
        else:
            return None
    return low


def cholesky(m: SymPsdMatrix, jitter_policy: str = "auto") -> CholFactor:
    """Lower Cholesky factor of m, jittering if the bare factorization fails.

    With jitter_policy="none" only the direct factorization is attempted
    (zero pivots are still clamped for exactly-singular inputs). With "auto",
    failure escalates through delta = JITTER_STEPS * scale before giving up
    with NotPositiveSemidefinite.
    """
    if jitter_policy not in ("auto", "none"):
        raise ValueError(f"unknown jitter policy {jitter_policy!r}")
    dense = m.full()
    scale = m.scale()
    try:
        return CholFactor(m.dim, np.linalg.cholesky(dense))
    except np.linalg.LinAlgError:
        pass
    low = _clamped_lower(dense, PSD_TOL * scale)
    if low is not None:
        return CholFactor(m.dim, low)
    if jitter_policy == "none":
        raise NotPositiveSemidefinite(
            f"matrix is indefinite beyond tolerance (min eig {m.min_eigenvalue():.3e})"
        )
    eye = np.eye(m.dim)
    for step in JITTER_STEPS:
        try:
            return CholFactor(m.dim, np.linalg.cholesky(dense + step * scale * eye))
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveSemidefinite(
        f"matrix stayed indefinite after jitter up to {JITTER_STEPS[-1]:g}*scale "
        f"(min eig {m.min_eigenvalue():.3e})"
    )


def pd_lower(a: np.ndarray, scale: float | None = None) -> np.ndarray:
    """Strictly-positive-pivot lower factor of a dense symmetric array.

    Unlike cholesky() this never clamps: inverse and log-determinant paths
    need invertible factors, so singular inputs are lifted by the jitter
    ladder instead.
    """
    if scale is None:
        scale = max(1.0, float(np.trace(a)) / a.shape[0])
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(a.shape[0])
    for step in JITTER_STEPS:
        try:
            return np.linalg.cholesky(a + step * scale * eye)
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveSemidefinite("matrix stayed indefinite after jitter escalation")


def spd_inverse(m: SymPsdMatrix) -> SymPsdMatrix:
    """Inverse via Cholesky; singular inputs are inverted after jitter."""
    low = pd_lower(m.full(), m.scale())
    low_inv = np.linalg.inv(low)
    return SymPsdMatrix.from_full(low_inv.T @ low_inv)


def loewner_dominates(a: SymPsdMatrix, b: SymPsdMatrix, tol: float = PSD_TOL) -> bool:
    """True iff a - b is PSD within tol, i.e. min eig(a - b) >= -tol * scale(a)."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"cannot compare {a.dim}x{a.dim} against {b.dim}x{b.dim}")
    w = np.linalg.eigvalsh(a.full() - b.full())
    return bool(w[0] >= -tol * a.scale())


def size_measure(m: SymPsdMatrix, objective: str) -> float:
    """Scalar size of a covariance: "trace" or "logdet".

    The logdet path factors through pd_lower, so exactly singular inputs
    return the (large negative, finite) log-determinant of the jittered
    matrix instead of -inf.
    """
    if objective == "trace":
        return m.trace()
    if objective == "logdet":
        low = pd_lower(m.full(), m.scale())
        return float(2.0 * np.sum(np.log(np.diag(low))))
    raise ValueError(f"unknown size objective {objective!r}")
