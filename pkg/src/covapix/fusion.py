"""Fusion operators over Gaussian-style (mean, covariance) estimates.

Four binary operators, each returning a FusionResult:

  kf_fuse   independent-error combination (both algebraic forms)
  ci_fuse   covariance intersection, valid under unknown correlation
  cu_fuse   covariance union, a bound covering both inputs' spreads
  ca_bound  covariance addition, a bound on the sum of two uncertain vectors

ci_fuse and cu_fuse pick their free parameter by minimizing a size objective
("logdet" or "trace") with a deterministic golden-section search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, DimensionMismatch, EmptyInput
from .psd import SymPsdMatrix, pd_lower, spd_inverse

GOLDEN_TOL = 1e-12
GOLDEN_MAX_ITER = 200

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Estimate:
    """A mean vector with its covariance."""

    mu: np.ndarray
    cov: SymPsdMatrix

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(mu)):
            raise ValueError("mean entries must be finite")
        if mu.size != self.cov.dim:
            raise DimensionMismatch(
                f"mean has {mu.size} entries but covariance is {self.cov.dim}x{self.cov.dim}"
            )
        object.__setattr__(self, "mu", mu)

    @property
    def dim(self) -> int:
        return self.cov.dim


@dataclass(frozen=True)
class FusionResult:
    """Fused estimate plus the operator's auxiliary parameter.

    aux is the CI weight omega, the CU mean position t, the CA trace ratio
    gamma, or 0.0 for operators with no free parameter.
    """

    estimate: Estimate
    aux: float = 0.0


def _check_pair(a: Estimate, b: Estimate) -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"estimate dimensions differ: {a.dim} vs {b.dim}")


def golden_section(fn, lo: float, hi: float,
                   tol: float = GOLDEN_TOL, max_iter: int = GOLDEN_MAX_ITER) -> float:
    """Deterministic golden-section minimizer on [lo, hi].

    Ties move the bracket toward the lower end; the midpoint of the final
    bracket is returned once its width drops below tol.
    """
    a, b = float(lo), float(hi)
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = fn(x1), fn(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = fn(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = fn(x2)
    return 0.5 * (a + b)


def kf_fuse(a: Estimate, b: Estimate, form: str = "information") -> FusionResult:
    """Fuse two independent estimates.

    form="information": C = (Ca^-1 + Cb^-1)^-1, mu = C (Ca^-1 mua + Cb^-1 mub).
    form="moment":      K = Ca (Ca + Cb)^-1, mu = mua + K (mub - mua),
                        C = (I - K) Ca.
    The two forms are algebraically identical; both are kept because their
    rounding behavior differs and cross-checking them catches conditioning
    trouble early.
    """
    _check_pair(a, b)
    if form == "information":
        ia = spd_inverse(a.cov).full()
        ib = spd_inverse(b.cov).full()
        cov = spd_inverse(SymPsdMatrix.from_full(ia + ib))
        mu = cov.full() @ (ia @ a.mu + ib @ b.mu)
        return FusionResult(Estimate(mu, cov), 0.0)
    if form == "moment":
        ca = a.cov.full()
        cb = b.cov.full()
        s_inv = spd_inverse(SymPsdMatrix.from_full(ca + cb)).full()
        gain = ca @ s_inv
        mu = a.mu + gain @ (b.mu - a.mu)
        cov = SymPsdMatrix.from_full((np.eye(a.dim) - gain) @ ca)
        return FusionResult(Estimate(mu, cov), 0.0)
    raise ValueError(f"unknown kf form {form!r}")


def _canonical_pair(a: Estimate, b: Estimate):
    """Deterministic orientation for order-symmetric operators.

    Swapped arguments then take the identical arithmetic path, so the
    swap-symmetry of CI and CU holds bit for bit, with aux mapped through
    w <-> 1-w for the caller's orientation.
    """
    key_a = (a.cov.lower_triangle().tobytes(), a.mu.tobytes())
    key_b = (b.cov.lower_triangle().tobytes(), b.mu.tobytes())
    if key_a <= key_b:
        return a, b, False
    return b, a, True


def _ci_weight(ix: np.ndarray, iy: np.ndarray, objective: str) -> float:
    """argmin over [0, 1] of the chosen size of C(w).

    Golden section localizes the minimum; because both size objectives are
    convex along the segment w ix + (1-w) iy, the minimizer is then pinned
    down by sign bisection on the analytic derivative. Plain value search
    alone stalls on a sqrt(eps)-wide plateau around flat minima, which is
    too coarse for the 1e-8 weight accuracy promised here.
    """
    d = ix - iy

    def slope(w: float) -> float:
        m_inv = np.linalg.inv(w * ix + (1.0 - w) * iy)
        if objective == "logdet":
            return -float(np.trace(m_inv @ d))
        return -float(np.trace(m_inv @ d @ m_inv))

    g0 = slope(0.0)
    if g0 >= 0.0:
        return 0.0
    g1 = slope(1.0)
    if g1 <= 0.0:
        return 1.0

    def cost(w: float) -> float:
        low = pd_lower(w * ix + (1.0 - w) * iy)
        if objective == "logdet":
            # logdet C(w) = -logdet of the information matrix
            return float(-2.0 * np.sum(np.log(np.diag(low))))
        low_inv = np.linalg.inv(low)
        return float(np.sum(low_inv * low_inv))

    w = golden_section(cost, 0.0, 1.0)
    lo, hi = max(0.0, w - 1e-6), min(1.0, w + 1e-6)
    if not (slope(lo) < 0.0 < slope(hi)):
        lo, hi = 0.0, 1.0
    for _ in range(GOLDEN_MAX_ITER):
        if hi - lo <= 1e-15:
            break
        mid = 0.5 * (lo + hi)
        gm = slope(mid)
        if gm < 0.0:
            lo = mid
        elif gm > 0.0:
            hi = mid
        else:
            return mid
    return 0.5 * (lo + hi)


def ci_fuse(a: Estimate, b: Estimate, objective: str = "logdet") -> FusionResult:
    """Covariance intersection: C(w) = (w Ca^-1 + (1-w) Cb^-1)^-1.

    The weight w in [0, 1] minimizes the chosen size of C(w); the result is
    consistent for any true cross-covariance between the inputs' errors.
    """
    _check_pair(a, b)
    if objective not in ("logdet", "trace"):
        raise ValueError(f"unknown size objective {objective!r}")
    x, y, swapped = _canonical_pair(a, b)
    ix = spd_inverse(x.cov).full()
    iy = spd_inverse(y.cov).full()
    w = _ci_weight(ix, iy, objective)
    cov = spd_inverse(SymPsdMatrix.from_full(w * ix + (1.0 - w) * iy))
    mu = cov.full() @ (w * (ix @ x.mu) + (1.0 - w) * (iy @ y.mu))
    return FusionResult(Estimate(mu, cov), float(1.0 - w if swapped else w))


def _cu_parts(a: Estimate, b: Estimate, t: float):
    """Candidate CU pieces at mean position mu = mua + t (mub - mua).

    Returns (mu, La, W) where La is a strict lower factor of
    Ca + da da^T and W = La^-1 (Cb + db db^T) La^-T is the second input's
    shifted covariance in the first one's whitened frame.
    """
    mu = a.mu + t * (b.mu - a.mu)
    da = mu - a.mu
    db = mu - b.mu
    a_shift = a.cov.full() + np.outer(da, da)
    b_shift = b.cov.full() + np.outer(db, db)
    low = pd_lower(a_shift)
    low_inv = np.linalg.inv(low)
    w = low_inv @ b_shift @ low_inv.T
    return mu, low, 0.5 * (w + w.T)


def cu_fuse(a: Estimate, b: Estimate, objective: str = "logdet") -> FusionResult:
    """Covariance union: the result covers both inputs in the Loewner order.

    For a candidate mean mu(t) on the segment between the two input means,
    the smallest covariance dominating both Ca + da da^T and Cb + db db^T is
    built by clamping eigenvalues below 1 in the whitened frame of the first.
    t is chosen by golden-section on the covariance size.
    """
    _check_pair(a, b)
    if objective not in ("logdet", "trace"):
        raise ValueError(f"unknown size objective {objective!r}")
    x, y, swapped = _canonical_pair(a, b)

    def cost(t: float) -> float:
        _, low, w = _cu_parts(x, y, t)
        lam, vec = np.linalg.eigh(w)
        lam = np.maximum(lam, 1.0)
        if objective == "logdet":
            return float(2.0 * np.sum(np.log(np.diag(low))) + np.sum(np.log(lam)))
        cols = low @ vec
        return float(np.sum(lam * np.sum(cols * cols, axis=0)))

    t = golden_section(cost, 0.0, 1.0)
    mu, low, w = _cu_parts(x, y, t)
    lam, vec = np.linalg.eigh(w)
    lam = np.maximum(lam, 1.0)
    cols = low @ vec
    cov = SymPsdMatrix.from_full((cols * lam) @ cols.T)
    return FusionResult(Estimate(mu, cov), float(1.0 - t if swapped else t))


def ca_bound(a: Estimate, b: Estimate) -> FusionResult:
    """Covariance addition: bound on the sum of two uncertain vectors.

    mu = mua + mub and C = (1 + g) Ca + (1 + 1/g) Cb with
    g = sqrt(trace(Cb) / trace(Ca)), which dominates Ca + Cb + Cab + Cab^T
    for every admissible cross-covariance Cab. A zero-trace input makes the
    formula collapse to the other covariance (aux reports the limit of g);
    two zero-trace inputs leave nothing to bound.
    """
    _check_pair(a, b)
    ta = a.cov.trace()
    tb = b.cov.trace()
    mu = a.mu + b.mu
    if ta == 0.0 and tb == 0.0:
        raise DegenerateInput("both covariances have zero trace")
    if tb == 0.0:
        return FusionResult(Estimate(mu, a.cov), 0.0)
    if ta == 0.0:
        return FusionResult(Estimate(mu, b.cov), math.inf)
    g = math.sqrt(tb / ta)
    cov = SymPsdMatrix.from_full((1.0 + g) * a.cov.full() + (1.0 + 1.0 / g) * b.cov.full())
    return FusionResult(Estimate(mu, cov), g)


_OPERATORS = ("kf", "ci", "cu", "ca")


def fuse_reduce(items, operator: str, objective: str = "logdet") -> FusionResult:
    """Left fold of a binary fusion operator over a sequence of estimates.

    kf folds use the information form. The returned aux is the final fold
    step's parameter (0.0 for a single-element sequence). Errors raised by a
    step are re-raised with the offending item's index prepended.
    """
    if operator not in _OPERATORS:
        raise ValueError(f"unknown operator {operator!r}, expected one of {_OPERATORS}")
    items = list(items)
    if not items:
        raise EmptyInput("fuse_reduce needs at least one estimate")
    acc = items[0]
    aux = 0.0
    for i, est in enumerate(items[1:], start=1):
        try:
            if operator == "kf":
                res = kf_fuse(acc, est, form="information")
            elif operator == "ci":
                res = ci_fuse(acc, est, objective)
            elif operator == "cu":
                res = cu_fuse(acc, est, objective)
            else:
                res = ca_bound(acc, est)
        except (DimensionMismatch, DegenerateInput) as err:
            raise type(err)(f"item {i}: {err}") from err
        acc = res.estimate
        aux = res.aux
    return FusionResult(acc, aux)
