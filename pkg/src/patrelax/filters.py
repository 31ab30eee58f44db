"""Zero-phase temporal filters applied along the time axis of a sinogram."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidSpecError
from .forward import Sinogram
from .operators import LinearOperatorChain

KINDS = ("delta", "gauss", "bandpass")


@dataclass(frozen=True)
class FilterSpec:
    """Filter description; all frequencies are fractions of the Nyquist frequency."""

    kind: str = "delta"
    f_center: float | None = None
    f_sigma: float | None = None
    f_lo: float | None = None
    f_hi: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpecError(f"unknown filter kind {self.kind!r}")
        if self.kind == "gauss":
            if self.f_center is None or not 0.0 <= self.f_center <= 1.0:
                raise InvalidSpecError("gauss filter needs f_center in [0, 1]")
            if self.f_sigma is None or not self.f_sigma > 0:
                raise InvalidSpecError("gauss filter needs f_sigma > 0")
        elif self.kind == "bandpass":
            if self.f_lo is None or self.f_hi is None or not 0.0 <= self.f_lo < self.f_hi <= 1.0:
                raise InvalidSpecError("bandpass filter needs 0 <= f_lo < f_hi <= 1")

    @classmethod
    def delta(cls) -> "FilterSpec":
        return cls("delta")

    @classmethod
    def gauss(cls, f_center: float, f_sigma: float) -> "FilterSpec":
        return cls("gauss", f_center=f_center, f_sigma=f_sigma)

    @classmethod
    def bandpass(cls, f_lo: float, f_hi: float) -> "FilterSpec":
        return cls("bandpass", f_lo=f_lo, f_hi=f_hi)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for key in ("f_center", "f_sigma", "f_lo", "f_hi"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d


# Defaults: system PSF, narrow Gaussian relaxation, wide band-pass relaxation.
SYSTEM_PSF = FilterSpec.gauss(0.20, 0.08)
GAUSS_RELAX = FilterSpec.gauss(0.20, 0.05)
BANDPASS_RELAX = FilterSpec.bandpass(0.08, 0.35)


@dataclass(frozen=True)
class FrequencyResponse:
    freqs: np.ndarray
    magnitude: np.ndarray


@dataclass(frozen=True, eq=False)
class TemporalFilter:
    """Magnitude response on the rFFT bins of the 2T zero-padded signal."""

    spec: FilterSpec
    T: int
    dt: float
    response: np.ndarray

    @property
    def f_nyq(self) -> float:
        return 0.5 / self.dt

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(self.T + 1) / (2.0 * self.T * self.dt)

    def center_bin(self) -> int | None:
        if self.spec.kind != "gauss":
            return None
        return int(round(self.spec.f_center * self.T))


def build_filter(spec: FilterSpec, T: int, dt: float) -> TemporalFilter:
    """Evaluate the magnitude response of ``spec`` on bins ``j / (2 T dt)``, j = 0..T.

    The Gaussian center is snapped to the nearest bin so the peak is exactly 1.
    """
    if int(T) != T or T < 2:
        raise InvalidSpecError(f"filter needs T >= 2, got {T}")
    if not dt > 0:
        raise InvalidSpecError(f"filter needs dt > 0, got {dt}")
    f_nyq = 0.5 / dt
    j = np.arange(T + 1)
    if spec.kind == "delta":
        resp = np.ones(T + 1)
    elif spec.kind == "gauss":
        jc = int(round(spec.f_center * T))
        s = spec.f_sigma * f_nyq
        # offsets in whole bins keep the center sample exactly zero
        resp = np.exp(-(((j - jc) / (2.0 * T * dt)) ** 2) / (2.0 * s * s))
    else:
        # edges compared in bin units (f_j / f_nyq = j / T) and inclusive
        ratio = j / T
        resp = ((ratio >= spec.f_lo) & (ratio <= spec.f_hi)).astype(np.float64)
    return TemporalFilter(spec, int(T), float(dt), resp)


def _filter_rows(response: np.ndarray, values: np.ndarray) -> np.ndarray:
    T = values.shape[-1]
    spec = np.fft.rfft(values, n=2 * T, axis=-1)
    spec *= response
    return np.fft.irfft(spec, n=2 * T, axis=-1)[..., :T]


def filter_array(f: TemporalFilter, values: np.ndarray) -> np.ndarray:
    """Filter each row of a (detectors, T) array.

    Pad to 2T, multiply the spectrum, truncate to T.  The response is real and
    even, so the circulant step is symmetric and the padding and truncation are
    transposes of each other: the operator is its own adjoint.
    """
    if values.shape[-1] != f.T:
        raise DimensionMismatchError(f"filter built for T={f.T}, data has {values.shape[-1]}")
    if f.spec.kind == "delta":  # identity; skip the FFT round-off
        return np.array(values, dtype=np.float64)
    return _filter_rows(f.response, np.asarray(values, dtype=np.float64))


filter_array_adjoint = filter_array


def apply_filter(f: TemporalFilter, s: Sinogram) -> Sinogram:
    if f.T != s.time.samples or not np.isclose(f.dt, s.time.dt, rtol=1e-12, atol=0):
        raise DimensionMismatchError("filter and sinogram time grids differ")
    return Sinogram(s.geometry, s.time, filter_array(f, s.values))


def apply_filter_adjoint(f: TemporalFilter, s: Sinogram) -> Sinogram:
    return apply_filter(f, s)


def frequency_response(f: TemporalFilter) -> FrequencyResponse:
    return FrequencyResponse(f.freqs, f.response.copy())


def filter_chain(f: TemporalFilter, data_shape: tuple[int, int]) -> LinearOperatorChain:
    if data_shape[-1] != f.T:
        raise DimensionMismatchError(f"filter built for T={f.T}, data has {data_shape[-1]}")
    name = "Φ" if f.spec.kind != "delta" else "δ"
    return LinearOperatorChain(
        lambda s: filter_array(f, s),
        lambda s: filter_array_adjoint(f, s),
        tuple(data_shape),
        tuple(data_shape),
        f"{name}[{f.spec.kind}]",
    )


def compose_filtered_forward(f: TemporalFilter, A: LinearOperatorChain) -> LinearOperatorChain:
    """Chain ``Φ ∘ A`` with adjoint ``A^T ∘ Φ^T``."""
    return A.then(filter_chain(f, A.range_shape))
