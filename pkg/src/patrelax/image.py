"""Pixel grids, images, and the ellipse phantom."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, GridTooCoarseError, InvalidSpecError


@dataclass(frozen=True)
class ImageGrid:
    """Square grid of ``n`` x ``n`` pixels covering ``[-half_width, half_width]^2``.

    Row ``i`` indexes the vertical (y) axis, column ``j`` the horizontal (x) axis.
    """

    n: int = 128
    half_width: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidSpecError(f"grid needs n >= 2, got {self.n}")
        if not self.half_width > 0:
            raise InvalidSpecError(f"half_width must be positive, got {self.half_width}")

    @property
    def pixel_size(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (X, Y) arrays of pixel-center coordinates, each n x n."""
        c = -self.half_width + (np.arange(self.n) + 0.5) * self.pixel_size
        X, Y = np.meshgrid(c, c, indexing="xy")
        return X, Y


@dataclass
class Image:
    grid: ImageGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise DimensionMismatchError(
                f"image values have shape {self.values.shape}, grid expects {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise InvalidSpecError("image contains non-finite values")

    @classmethod
    def zeros(cls, grid: ImageGrid) -> "Image":
        return cls(grid, np.zeros(grid.shape))


@dataclass(frozen=True)
class EllipseSpec:
    center: tuple[float, float]
    semi_axes: tuple[float, float]
    angle: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        a, b = self.semi_axes
        if not (a > 0 and b > 0):
            raise InvalidSpecError(f"semi-axes must be positive, got {self.semi_axes}")


def ellipse_mask(grid: ImageGrid, spec: EllipseSpec) -> np.ndarray:
    """Boolean mask of pixels whose centers fall inside the rotated ellipse."""
    X, Y = grid.centers()
    dx = X - spec.center[0]
    dy = Y - spec.center[1]
    # rotate by -angle into the ellipse frame
    ca, sa = math.cos(spec.angle), math.sin(spec.angle)
    u = ca * dx + sa * dy
    v = -sa * dx + ca * dy
    a, b = spec.semi_axes
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def rasterize_ellipse(grid: ImageGrid, spec: EllipseSpec, target: Image) -> Image:
    """Add ``spec.amplitude`` to every pixel of ``target`` inside the ellipse (in place)."""
    if target.grid != grid:
        raise DimensionMismatchError("target image lives on a different grid")
    target.values[ellipse_mask(grid, spec)] += spec.amplitude
    return target


# Ring, upside-down "A" (two legs and a crossbar) in the upper rows, faint blob below.
# Coordinates are physical for half_width = 1 and scale with the grid.
_RING_OUTER = ((0.0, 0.0), (0.88, 0.80))
_RING_THICKNESS_PX128 = 3.0
_GLYPH = (
    EllipseSpec((-0.13, -0.36), (0.032, 0.27), angle=-0.38, amplitude=1.0),
    EllipseSpec((0.13, -0.36), (0.032, 0.27), angle=0.38, amplitude=1.0),
    EllipseSpec((0.0, -0.43), (0.15, 0.028), angle=0.0, amplitude=1.0),
)
_BLOB = EllipseSpec((0.05, 0.45), (0.13, 0.085), angle=0.3, amplitude=0.5)


def phantom_specs(grid: ImageGrid) -> list[EllipseSpec]:
    """Ellipse list that makes up the default phantom on ``grid``."""
    s = grid.half_width
    thick = _RING_THICKNESS_PX128 * 2.0 / 128  # 3 pixels at n=128, h=1
    (cx, cy), (a, b) = _RING_OUTER
    specs = [
        EllipseSpec((cx * s, cy * s), (a * s, b * s), 0.0, 1.0),
        EllipseSpec((cx * s, cy * s), ((a - thick) * s, (b - thick) * s), 0.0, -1.0),
    ]
    for e in (*_GLYPH, _BLOB):
        specs.append(
            EllipseSpec(
                (e.center[0] * s, e.center[1] * s),
                (e.semi_axes[0] * s, e.semi_axes[1] * s),
                e.angle,
                e.amplitude,
            )
        )
    return specs


def make_paper_phantom(grid: ImageGrid) -> Image:
    """Deterministic ring/glyph/blob phantom with values in [0, 1]."""
    if grid.n < 32:
        raise GridTooCoarseError(f"phantom needs n >= 32, got {grid.n}")
    img = Image.zeros(grid)
    for spec in phantom_specs(grid):
        rasterize_ellipse(grid, spec, img)
    np.clip(img.values, 0.0, 1.0, out=img.values)
    return img


def image_stats(x: Image) -> tuple[float, float, float, float]:
    """(min, max, mean, mean_abs) of the pixel values."""
    v = x.values
    return float(v.min()), float(v.max()), float(v.mean()), float(np.abs(v).mean())
