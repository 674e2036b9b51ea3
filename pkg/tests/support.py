"""Shared generators and comparison helpers for the test suite."""

from __future__ import annotations

from collections import deque

import numpy as np

from covapix import Estimate, ImageBuffer, SymPsdMatrix


def rel_diff(x, y) -> float:
    """Scale-aware difference: ||x - y|| / max(1, ||x||, ||y||)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    return float(np.linalg.norm(x - y) / max(1.0, nx, ny))


def random_psd(rng: np.random.Generator, dim: int,
               eig_lo: float = 0.1, eig_hi: float = 10.0) -> SymPsdMatrix:
    """Random PSD matrix with log-uniform eigenvalues in [eig_lo, eig_hi].

    Conditioning stays below eig_hi/eig_lo by construction, which keeps
    dual-form comparisons meaningful.
    """
    gauss = rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(gauss)
    q = q * np.sign(np.diag(r))
    eigs = np.exp(rng.uniform(np.log(eig_lo), np.log(eig_hi), size=dim))
    return SymPsdMatrix.from_full((q * eigs) @ q.T)


def random_estimate(rng: np.random.Generator, dim: int, mu_scale: float = 3.0,
                    eig_lo: float = 0.1, eig_hi: float = 10.0) -> Estimate:
    return Estimate(rng.normal(scale=mu_scale, size=dim),
                    random_psd(rng, dim, eig_lo, eig_hi))


def sample_cross_covariance(rng: np.random.Generator, low_a: np.ndarray,
                            low_b: np.ndarray, strength: float | None = None) -> np.ndarray:
    """A cross-covariance Cab keeping the joint [[Ca, Cab], [Cab^T, Cb]] PSD.

    Writing Ca = La La^T and Cb = Lb Lb^T, any Cab = La X Lb^T with a
    contraction X (spectral norm <= 1) gives a PSD joint matrix.
    """
    dim = low_a.shape[0]
    x = rng.normal(size=(dim, dim))
    top = np.linalg.norm(x, ord=2)
    if top > 0.0:
        scale = strength if strength is not None else rng.uniform(0.0, 1.0)
        x *= scale / top
    return low_a @ x @ low_b.T


def gradient_image(width: int, height: int) -> ImageBuffer:
    """Smooth three-channel gradient, handy for refinement tests."""
    x = np.linspace(0.0, 1.0, width)[None, :]
    y = np.linspace(0.0, 1.0, height)[:, None]
    data = np.empty((height, width, 3))
    data[:, :, 0] = np.broadcast_to(x, (height, width))
    data[:, :, 1] = np.broadcast_to(y, (height, width))
    data[:, :, 2] = (x + y) / 2.0
    return ImageBuffer(width, height, "rgb", data)


def quadrant_image(size: int) -> ImageBuffer:
    """Four solid-color quadrants with strong color contrast."""
    half = size // 2
    data = np.empty((size, size, 3))
    data[:half, :half] = (0.9, 0.1, 0.1)
    data[:half, half:] = (0.1, 0.8, 0.1)
    data[half:, :half] = (0.1, 0.2, 0.9)
    data[half:, half:] = (0.9, 0.9, 0.2)
    return ImageBuffer(size, size, "rgb", data)


def random_image(rng: np.random.Generator, width: int, height: int) -> ImageBuffer:
    return ImageBuffer(width, height, "rgb", rng.uniform(size=(height, width, 3)))


def regions_are_4_connected(lm) -> bool:
    """Oracle: BFS from each region's first pixel must reach its whole region."""
    arr = lm.labels
    h, w = arr.shape
    seen = np.zeros((h, w), dtype=bool)
    for rid in range(lm.region_count):
        ys, xs = np.nonzero(arr == rid)
        if ys.size == 0:
            return False
        queue = deque([(int(ys[0]), int(xs[0]))])
        seen[ys[0], xs[0]] = True
        reached = 0
        while queue:
            y, x = queue.popleft()
            reached += 1
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if 0 <= ny < h and 0 <= nx < w and not seen[ny, nx] and arr[ny, nx] == rid:
                    seen[ny, nx] = True
                    queue.append((ny, nx))
        if reached != ys.size:
            return False
    return True
