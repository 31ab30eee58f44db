"""Discrete gradient / divergence, isotropic TV, and the proximal maps used by the solver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError
from .image import Image, ImageGrid
from .operators import LinearOperatorChain


@dataclass
class GradientField:
    """Forward differences of an image; ``dx`` along columns, ``dy`` along rows."""

    grid: ImageGrid
    dx: np.ndarray
    dy: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.stack([self.dx, self.dy])

    @classmethod
    def from_stacked(cls, grid: ImageGrid, g: np.ndarray) -> "GradientField":
        return cls(grid, g[0].copy(), g[1].copy())


def grad2d(x: np.ndarray) -> np.ndarray:
    """(2, n, n) forward differences with Neumann boundary, unit spacing."""
    g = np.zeros((2,) + x.shape)
    g[0, :, :-1] = x[:, 1:] - x[:, :-1]
    g[1, :-1, :] = x[1:, :] - x[:-1, :]
    return g


def div2d(g: np.ndarray) -> np.ndarray:
    """Negative transpose of :func:`grad2d`."""
    dx, dy = g[0], g[1]
    out = np.zeros(dx.shape)
    out[:, :-1] += dx[:, :-1]
    out[:, 1:] -= dx[:, :-1]
    out[:-1, :] += dy[:-1, :]
    out[1:, :] -= dy[:-1, :]
    return out


def gradient(x: Image) -> GradientField:
    return GradientField.from_stacked(x.grid, grad2d(x.values))


def divergence(g: GradientField) -> Image:
    return Image(g.grid, div2d(g.stacked()))


def gradient_chain(shape: tuple[int, int]) -> LinearOperatorChain:
    return LinearOperatorChain(
        grad2d, lambda g: -div2d(g), tuple(shape), (2,) + tuple(shape), "∇"
    )


def tv_value(x) -> float:
    """Isotropic total variation: sum of pointwise gradient magnitudes."""
    v = x.values if isinstance(x, Image) else np.asarray(x, dtype=np.float64)
    g = grad2d(v)
    return float(np.sqrt(g[0] ** 2 + g[1] ** 2).sum())


def project_l2_ball(g: np.ndarray, alpha: float) -> np.ndarray:
    """Project each 2-vector ``g[:, i, j]`` onto the ball of radius ``alpha``."""
    if alpha < 0:
        raise InvalidParameterError(f"alpha must be >= 0, got {alpha}")
    if alpha == 0:
        return np.zeros_like(g)
    mag = np.sqrt(g[0] ** 2 + g[1] ** 2)
    return g * (alpha / np.maximum(alpha, mag))


def prox_tv_dual(g: GradientField, alpha: float) -> GradientField:
    return GradientField.from_stacked(g.grid, project_l2_ball(g.stacked(), alpha))


def prox_nonneg(x):
    """Elementwise max(x, 0); accepts an Image or an array."""
    if isinstance(x, Image):
        return Image(x.grid, np.maximum(x.values, 0.0))
    return np.maximum(x, 0.0)


def prox_fidelity_conjugate(p, sigma: float, b):
    """Prox of sigma * f^* for f(v) = ||v - b||^2 (no 1/2 factor).

    f^*(q) = <q, b> + ||q||^2 / 4, so the prox is (p - sigma b) / (1 + sigma / 2).
    Works on arrays or on Sinogram-like objects carrying ``values``.
    """
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    pv = getattr(p, "values", p)
    bv = getattr(b, "values", b)
    if np.shape(pv) != np.shape(bv):
        raise DimensionMismatchError(f"shape mismatch {np.shape(pv)} vs {np.shape(bv)}")
    out = (pv - sigma * bv) / (1.0 + 0.5 * sigma)
    if hasattr(p, "values"):
        return type(p)(p.geometry, p.time, out)
    return out
