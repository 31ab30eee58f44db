"""Discrete 2D photoacoustic forward operator.

The model integrates the image over circles centered at each detector (radius
``c * t_k``), then differentiates in time.  Circle integrals are evaluated by
equispaced angular quadrature with bilinear interpolation; the interpolation
weights are stored in sparse matrices so the adjoint is the exact transpose.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatchError, InvalidSpecError, TooFewSamplesError
from .image import Image, ImageGrid
from .operators import LinearOperatorChain

# Detectors per sparse block.  Fixed so that results do not depend on the
# number of worker threads.
DETECTORS_PER_BLOCK = 8
MIN_ARC_SAMPLES = 16


@dataclass(frozen=True)
class DetectorGeometry:
    count: int = 64
    radius: float = 1.2

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise InvalidSpecError(f"detector count must be a positive integer, got {self.count}")
        if not self.radius > 0:
            raise InvalidSpecError(f"detector radius must be positive, got {self.radius}")

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.count) / self.count

    @property
    def positions(self) -> np.ndarray:
        a = self.angles
        return np.stack([self.radius * np.cos(a), self.radius * np.sin(a)], axis=1)

    def check_outside(self, grid: ImageGrid) -> None:
        # Detectors must sit outside the disc inscribed in the image square.
        if not self.radius > grid.half_width:
            raise InvalidSpecError(
                f"detector radius {self.radius} must exceed half_width {grid.half_width}"
            )


@dataclass(frozen=True)
class TimeGrid:
    samples: int = 357
    dt: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if int(self.samples) != self.samples or self.samples < 1:
            raise InvalidSpecError(f"samples must be a positive integer, got {self.samples}")
        if not (self.c > 0 and self.dt > 0):
            raise InvalidSpecError("sound speed and dt must be positive")

    @classmethod
    def covering(
        cls, geometry: DetectorGeometry, grid: ImageGrid, samples: int = 357, c: float = 1.0
    ) -> "TimeGrid":
        """Time grid whose last sample reaches the farthest image corner."""
        if samples < 2:
            raise InvalidSpecError("need at least two time samples")
        reach = geometry.radius + grid.half_width * math.sqrt(2.0)
        return cls(samples, reach / (c * (samples - 1)), c)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.samples)

    @property
    def radii(self) -> np.ndarray:
        return self.c * self.times


@dataclass
class Sinogram:
    geometry: DetectorGeometry
    time: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        shape = (self.geometry.count, self.time.samples)
        if self.values.shape != shape:
            raise DimensionMismatchError(f"sinogram shape {self.values.shape} != {shape}")
        if not np.all(np.isfinite(self.values)):
            raise InvalidSpecError("sinogram contains non-finite values")


def _arc_weights(
    grid: ImageGrid,
    center: np.ndarray,
    radii: np.ndarray,
    arc_step: float,
) -> sp.csr_matrix:
    """Sparse (T, n*n) quadrature weights for circles around one detector."""
    n, h, px = grid.n, grid.half_width, grid.pixel_size
    counts = np.zeros(len(radii), dtype=np.int64)
    pos = radii > 0
    counts[pos] = np.maximum(
        MIN_ARC_SAMPLES, np.ceil(2.0 * np.pi * radii[pos] / arc_step).astype(np.int64)
    )
    if counts.sum() == 0:
        return sp.csr_matrix((len(radii), n * n))
    row = np.repeat(np.arange(len(radii)), counts)
    start = np.repeat(np.cumsum(counts) - counts, counts)
    local = np.arange(counts.sum()) - start
    n_row = counts[row]
    theta = 2.0 * np.pi * local / n_row
    r = radii[row]
    weight = r * (2.0 * np.pi / n_row)

    # fractional pixel index of each sample; pixel centers sit at integers
    cf = (center[0] + r * np.cos(theta) + h) / px - 0.5
    rf = (center[1] + r * np.sin(theta) + h) / px - 0.5
    near = (cf > -1) & (cf < n) & (rf > -1) & (rf < n)
    cf, rf, row, weight = cf[near], rf[near], row[near], weight[near]
    j0 = np.floor(cf).astype(np.int64)
    i0 = np.floor(rf).astype(np.int64)
    fx = cf - j0
    fy = rf - i0

    rows, cols, vals = [], [], []
    for di, dj, w in (
        (0, 0, (1 - fx) * (1 - fy)),
        (0, 1, fx * (1 - fy)),
        (1, 0, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        ii, jj = i0 + di, j0 + dj
        inside = (ii >= 0) & (ii < n) & (jj >= 0) & (jj < n)
        rows.append(row[inside])
        cols.append(ii[inside] * n + jj[inside])
        vals.append(weight[inside] * w[inside])
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(radii), n * n),
    )
    return mat.tocsr()


def _derivative(s: np.ndarray, dt: float) -> np.ndarray:
    if s.shape[-1] < 3:
        raise TooFewSamplesError(f"time derivative needs >= 3 samples, got {s.shape[-1]}")
    out = np.empty_like(s)
    out[..., 1:-1] = (s[..., 2:] - s[..., :-2]) / (2.0 * dt)
    out[..., 0] = (s[..., 1] - s[..., 0]) / dt
    out[..., -1] = (s[..., -1] - s[..., -2]) / dt
    return out


def _derivative_adjoint(u: np.ndarray, dt: float) -> np.ndarray:
    if u.shape[-1] < 3:
        raise TooFewSamplesError(f"time derivative needs >= 3 samples, got {u.shape[-1]}")
    out = np.zeros_like(u)
    half = u[..., 1:-1] / (2.0 * dt)
    out[..., 2:] += half
    out[..., :-2] -= half
    out[..., 1] += u[..., 0] / dt
    out[..., 0] -= u[..., 0] / dt
    out[..., -1] += u[..., -1] / dt
    out[..., -2] -= u[..., -1] / dt
    return out


@dataclass
class PatForwardModel:
    """Circle-integral + time-derivative operator for one grid/geometry/time setup.

    ``arc_step_fraction`` sets the quadrature spacing along each circle as a
    fraction of the pixel size.  ``workers`` only changes how many threads share
    the fixed detector blocks; outputs are bit-identical for any value.
    """

    grid: ImageGrid
    geometry: DetectorGeometry
    time: TimeGrid
    arc_step_fraction: float = 0.5
    workers: int = 1
    _blocks: list = field(init=False, repr=False)

    def __post_init__(self):
        step = self.arc_step_fraction * self.grid.pixel_size
        radii = self.time.radii
        pos = self.geometry.positions
        self._blocks = []
        for b0 in range(0, self.geometry.count, DETECTORS_PER_BLOCK):
            det = range(b0, min(b0 + DETECTORS_PER_BLOCK, self.geometry.count))
            block = sp.vstack([_arc_weights(self.grid, pos[m], radii, step) for m in det])
            block = block.tocsr()
            self._blocks.append((block, block.T.tocsr()))

    @property
    def image_shape(self) -> tuple[int, int]:
        return self.grid.shape

    @property
    def data_shape(self) -> tuple[int, int]:
        return (self.geometry.count, self.time.samples)

    @property
    def nnz(self) -> int:
        return sum(b.nnz for b, _ in self._blocks)

    def _map(self, fn, items):
        if self.workers > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                return list(pool.map(fn, items))
        return [fn(it) for it in items]

    # raw array interface -------------------------------------------------
    def integrate(self, x: np.ndarray) -> np.ndarray:
        flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
        parts = self._map(lambda b: b[0] @ flat, self._blocks)
        return np.concatenate(parts).reshape(self.data_shape)

    def integrate_adjoint(self, u: np.ndarray) -> np.ndarray:
        flat = np.ascontiguousarray(u, dtype=np.float64).ravel()
        offsets = np.cumsum([0] + [b[0].shape[0] for b in self._blocks])
        chunks = [
            (bt, flat[offsets[i] : offsets[i + 1]]) for i, (_, bt) in enumerate(self._blocks)
        ]
        parts = self._map(lambda c: c[0] @ c[1], chunks)
        out = np.zeros(self.grid.n * self.grid.n)
        for p in parts:  # fixed block order
            out += p
        return out.reshape(self.image_shape)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return _derivative(self.integrate(x), self.time.dt)

    def apply_adjoint(self, u: np.ndarray) -> np.ndarray:
        return self.integrate_adjoint(_derivative_adjoint(np.asarray(u, np.float64), self.time.dt))

    def chain(self) -> LinearOperatorChain:
        return LinearOperatorChain(
            self.apply, self.apply_adjoint, self.image_shape, self.data_shape, "A"
        )

    # typed interface -----------------------------------------------------
    def _check_image(self, x: Image) -> None:
        if x.grid != self.grid:
            raise DimensionMismatchError("image grid does not match the forward model")

    def _check_sinogram(self, s: Sinogram) -> None:
        if s.geometry != self.geometry or s.time != self.time:
            raise DimensionMismatchError("sinogram geometry/time grid does not match the model")

    def circular_mean_integral(self, x: Image) -> Sinogram:
        self._check_image(x)
        return Sinogram(self.geometry, self.time, self.integrate(x.values))

    def forward(self, x: Image) -> Sinogram:
        self._check_image(x)
        return Sinogram(self.geometry, self.time, self.apply(x.values))

    def adjoint(self, u: Sinogram) -> Image:
        self._check_sinogram(u)
        return Image(self.grid, self.apply_adjoint(u.values))


def circular_mean_integral(
    x: Image, geom: DetectorGeometry, time: TimeGrid, arc_step_fraction: float = 0.5
) -> Sinogram:
    return PatForwardModel(x.grid, geom, time, arc_step_fraction).circular_mean_integral(x)


def time_derivative(s: Sinogram) -> Sinogram:
    """Central differences inside, one-sided first-order differences at both ends."""
    return Sinogram(s.geometry, s.time, _derivative(s.values, s.time.dt))


def time_derivative_adjoint(s: Sinogram) -> Sinogram:
    return Sinogram(s.geometry, s.time, _derivative_adjoint(s.values, s.time.dt))
