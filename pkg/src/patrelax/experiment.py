"""Simulation of band-limited noisy data and the three-way fidelity comparison."""
from __future__ import annotations

import json
import logging
import math
import shutil
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError, InvalidReferenceError, StageError
from .filters import (
    BANDPASS_RELAX,
    GAUSS_RELAX,
    SYSTEM_PSF,
    FilterSpec,
    TemporalFilter,
    build_filter,
    compose_filtered_forward,
    filter_array,
)
from .forward import DetectorGeometry, PatForwardModel, Sinogram, TimeGrid
from .image import Image, ImageGrid, make_paper_phantom
from .io import export_pgm, write_array, write_csv
from .operators import LinearOperatorChain, max_adjoint_residual, operator_norm
from .regularization import gradient_chain
from .rng import gaussian_noise
from .solver import SolverConfig, SolveTrace, make_fidelity_chain, objective, solve

log = logging.getLogger(__name__)

# Spectral norm the forward operator is rescaled to.  Together with the fixed
# alpha this sets the balance between data term and TV.
FORWARD_NORM = 0.18
PSNR_IDENTICAL = math.inf
METRICS_HEADER = ["fidelity", "psnr", "rel_l2_error", "fidelity_residual", "wall_seconds"]
FORMAT_VERSION = "1"


@dataclass(frozen=True)
class NoiseSpec:
    factor: float = 2.0
    seed: int = 0
    mean_mode: str = "abs"

    def __post_init__(self):
        if not self.factor >= 0:
            raise InvalidParameterError("noise factor must be >= 0")
        if self.mean_mode not in ("abs", "raw"):
            raise InvalidParameterError(f"mean_mode must be 'abs' or 'raw', got {self.mean_mode!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    grid: ImageGrid = ImageGrid(128, 1.0)
    geometry: DetectorGeometry = DetectorGeometry(64, 1.2)
    samples: int = 357
    speed_c: float = 1.0
    forward_norm: float | None = FORWARD_NORM
    system_psf: FilterSpec = SYSTEM_PSF
    # fidelity name -> "l2" or a FilterSpec, run in insertion order
    fidelities: dict = field(
        default_factory=lambda: {"l2": "l2", "gauss": GAUSS_RELAX, "bandpass": BANDPASS_RELAX}
    )
    solver: SolverConfig = SolverConfig()
    noise: NoiseSpec = NoiseSpec()
    out_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.fidelities:
            raise InvalidParameterError("at least one fidelity is required")
        for name, fid in self.fidelities.items():
            if not (fid == "l2" or isinstance(fid, FilterSpec)):
                raise InvalidParameterError(f"fidelity {name!r} must be 'l2' or a FilterSpec")
        if self.forward_norm is not None and not self.forward_norm > 0:
            raise InvalidParameterError("forward_norm must be positive")

    @property
    def time(self) -> TimeGrid:
        return TimeGrid.covering(self.geometry, self.grid, self.samples, self.speed_c)

    def to_dict(self) -> dict:
        return {
            "grid": {"n": self.grid.n, "half_width": self.grid.half_width},
            "detectors": {"count": self.geometry.count, "radius": self.geometry.radius},
            "time": {"samples": self.samples, "dt": self.time.dt},
            "speed_c": self.speed_c,
            "forward_norm": self.forward_norm,
            "system_psf": self.system_psf.to_dict(),
            "fidelities": {
                k: (v if isinstance(v, str) else v.to_dict()) for k, v in self.fidelities.items()
            },
            "solver": asdict(self.solver),
            "noise": asdict(self.noise),
        }


@dataclass
class Metrics:
    psnr: float
    rel_l2_error: float
    fidelity_residual: float


@dataclass
class Setup:
    """Forward model and filters shared by every reconstruction of one config."""

    config: ExperimentConfig
    model: PatForwardModel
    A: LinearOperatorChain
    raw_norm: float
    scale: float
    psf: TemporalFilter

    @property
    def time(self) -> TimeGrid:
        return self.model.time

    def filter(self, spec: FilterSpec) -> TemporalFilter:
        return build_filter(spec, self.time.samples, self.time.dt)

    def sinogram(self, values) -> Sinogram:
        return Sinogram(self.model.geometry, self.time, values)


def build_setup(config: ExperimentConfig) -> Setup:
    config.geometry.check_outside(config.grid)
    model = PatForwardModel(config.grid, config.geometry, config.time, workers=config.workers)
    chain = model.chain()
    raw = operator_norm(
        chain, config.solver.norm_power_iters, config.solver.norm_tol, config.solver.seed
    )
    scale = 1.0 if config.forward_norm is None or raw == 0 else config.forward_norm / raw
    A = chain.scaled(scale) if scale != 1.0 else chain
    psf = build_filter(config.system_psf, model.time.samples, model.time.dt)
    return Setup(config, model, A, raw, scale, psf)


def simulate_clean(x0: Image, psf: TemporalFilter, A: LinearOperatorChain) -> np.ndarray:
    return filter_array(psf, A.apply(x0.values))


def noise_std(clean: np.ndarray, noise: NoiseSpec) -> float:
    level = np.abs(clean).mean() if noise.mean_mode == "abs" else abs(clean.mean())
    return float(noise.factor * level)


def simulate_data(
    x0: Image, psf: TemporalFilter, noise: NoiseSpec, A: LinearOperatorChain
) -> np.ndarray:
    """Band-limited data ``psf * A x0`` plus white noise scaled to its mean magnitude."""
    clean = simulate_clean(x0, psf, A)
    return clean + gaussian_noise(clean.shape, noise_std(clean, noise), noise.seed)


def psnr(x, reference) -> float:
    """10 log10(max(reference)^2 / MSE); ``PSNR_IDENTICAL`` when MSE is zero."""
    xv = np.asarray(getattr(x, "values", x), dtype=np.float64)
    rv = np.asarray(getattr(reference, "values", reference), dtype=np.float64)
    if xv.shape != rv.shape:
        raise InvalidReferenceError(f"shape mismatch {xv.shape} vs {rv.shape}")
    peak = float(rv.max())
    if peak == 0.0:
        raise InvalidReferenceError("reference has zero peak")
    mse = float(np.mean((xv - rv) ** 2))
    if mse == 0.0:
        return PSNR_IDENTICAL
    return 10.0 * math.log10(peak * peak / mse)


def rel_l2_error(x, reference) -> float:
    xv = np.asarray(getattr(x, "values", x), dtype=np.float64)
    rv = np.asarray(getattr(reference, "values", reference), dtype=np.float64)
    denom = float(np.linalg.norm(rv))
    if denom == 0.0:
        raise InvalidReferenceError("reference is identically zero")
    return float(np.linalg.norm(xv - rv)) / denom


def reconstruct(
    y_B: np.ndarray,
    fidelity,
    setup: Setup,
    x_true: Image | None = None,
    *,
    solver: SolverConfig | None = None,
    keep_iterates: bool = False,
) -> tuple[Image, SolveTrace, Metrics | None]:
    """Solve the filtered-fidelity TV problem for one fidelity choice."""
    if isinstance(fidelity, FilterSpec):
        fidelity = setup.filter(fidelity)
    K1, b = make_fidelity_chain(fidelity, setup.A, np.asarray(y_B, dtype=np.float64))
    cfg = solver or setup.config.solver
    x, trace = solve(K1, b, cfg, keep_iterates=keep_iterates)
    image = Image(setup.config.grid, x)
    metrics = None
    if x_true is not None:
        residual = objective(x, K1, b, cfg.alpha).fidelity
        metrics = Metrics(psnr(x, x_true), rel_l2_error(x, x_true), residual)
    return image, trace, metrics


@dataclass
class RunResult:
    name: str
    image: Image
    trace: SolveTrace
    metrics: Metrics
    wall_seconds: float


@dataclass
class ComparisonReport:
    config: ExperimentConfig
    phantom: Image
    data: np.ndarray
    clean: np.ndarray
    runs: list[RunResult]
    meta: dict

    def metrics_rows(self, with_wall: bool = True):
        for r in self.runs:
            m = r.metrics
            p = "identical" if m.psnr == PSNR_IDENTICAL else m.psnr
            row = [r.name, p, m.rel_l2_error, m.fidelity_residual]
            yield row + [r.wall_seconds] if with_wall else row

    def psnr(self, name: str) -> float:
        return next(r.metrics.psnr for r in self.runs if r.name == name)


def _stage(name):
    def wrap(fn):
        def inner(*a, **kw):
            try:
                return fn(*a, **kw)
            except StageError:
                raise
            except Exception as exc:  # abort with the stage name attached
                raise StageError(name, exc) from exc

        return inner

    return wrap


def adjoint_report(setup: Setup, pairs: int = 5) -> dict:
    """Relative adjoint-test residuals for A, each filtered chain, and the gradient."""
    out = {"A": max_adjoint_residual(setup.A, pairs, seed=setup.config.solver.seed)}
    for name, fid in setup.config.fidelities.items():
        if isinstance(fid, FilterSpec):
            K = compose_filtered_forward(setup.filter(fid), setup.A)
            out[name] = max_adjoint_residual(K, pairs, seed=setup.config.solver.seed)
    out["grad"] = max_adjoint_residual(gradient_chain(setup.config.grid.shape), pairs)
    return out


def run_comparison(config: ExperimentConfig, out_dir=None) -> ComparisonReport:
    """Simulate once, reconstruct with every fidelity, optionally write all outputs.

    On failure no partial outputs are left behind: files are staged in a
    temporary directory and only moved into ``out_dir`` after every stage ran.
    """
    out_dir = out_dir if out_dir is not None else config.out_dir
    t_start = time.perf_counter()
    setup = _stage("setup")(build_setup)(config)
    phantom = _stage("phantom")(make_paper_phantom)(config.grid)
    clean = _stage("simulate")(simulate_clean)(phantom, setup.psf, setup.A)
    data = clean + gaussian_noise(clean.shape, noise_std(clean, config.noise), config.noise.seed)

    runs = []
    norms = {}
    for name, fid in config.fidelities.items():
        t0 = time.perf_counter()
        image, trace, metrics = _stage(f"reconstruct[{name}]")(reconstruct)(
            data, fid, setup, phantom
        )
        runs.append(RunResult(name, image, trace, metrics, time.perf_counter() - t0))
        norms[name] = trace.norm_estimate
        log.info("%s: psnr %.3f dB, rel err %.4f", name, metrics.psnr, metrics.rel_l2_error)

    meta = {
        "format_version": FORMAT_VERSION,
        "config": config.to_dict(),
        "operator_norms": {
            "A_unscaled": setup.raw_norm,
            "A_scale": setup.scale,
            "stacked": norms,
        },
        "adjoint_test": _stage("adjoint-test")(adjoint_report)(setup),
        "noise_std": noise_std(clean, config.noise),
        "wall_seconds": {r.name: r.wall_seconds for r in runs},
        "total_wall_seconds": time.perf_counter() - t_start,
    }
    report = ComparisonReport(config, phantom, data, clean, runs, meta)
    if out_dir is not None:
        _stage("write")(write_outputs)(report, Path(out_dir))
    return report


def write_outputs(report: ComparisonReport, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir.parent))
    try:
        write_array(staging / "phantom.rtkd", report.phantom.values)
        write_array(staging / "sinogram.rtkd", report.data)
        export_pgm(report.phantom, staging / "phantom.pgm")
        for r in report.runs:
            write_array(staging / f"recon_{r.name}.rtkd", r.image.values)
            export_pgm(r.image, staging / f"recon_{r.name}.pgm")
            r.trace.write_csv(staging / f"trace_{r.name}.csv")
        write_csv(staging / "metrics.csv", METRICS_HEADER, report.metrics_rows())
        (staging / "meta.json").write_text(json.dumps(report.meta, indent=2, default=float))
        out_dir.mkdir(exist_ok=True)
        for f in staging.iterdir():
            f.replace(out_dir / f.name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
