import csv
import json
import math

import numpy as np
import pytest

from patrelax.errors import DivergenceError, InvalidReferenceError, StageError
from patrelax.experiment import (
    METRICS_HEADER,
    PSNR_IDENTICAL,
    ExperimentConfig,
    NoiseSpec,
    build_setup,
    psnr,
    reconstruct,
    rel_l2_error,
    run_comparison,
    simulate_clean,
    simulate_data,
)
from patrelax.filters import FilterSpec
from patrelax.forward import DetectorGeometry
from patrelax.image import ImageGrid, make_paper_phantom
from patrelax.io import read_array
from patrelax.operators import operator_norm
from patrelax.solver import SolverConfig, make_fidelity_chain, objective


def small_config(**kw):
    base = dict(
        grid=ImageGrid(32),
        geometry=DetectorGeometry(16, 1.2),
        samples=64,
        solver=SolverConfig(iterations=60, trace_every=20),
    )
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def ci_setup():
    cfg = ExperimentConfig(
        grid=ImageGrid(64),
        geometry=DetectorGeometry(32, 1.2),
        samples=128,
        system_psf=FilterSpec.delta(),
        noise=NoiseSpec(factor=0.0),
    )
    return build_setup(cfg)


def test_psnr_values():
    ref = np.zeros((4, 4))
    ref[0, 0] = 2.0
    assert psnr(ref, ref) == PSNR_IDENTICAL
    # MSE equal to peak^2 gives 0 dB
    assert psnr(ref + 2.0, ref) == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(0)
    x, r = rng.random((5, 7)), rng.random((5, 7))
    mse = sum((x[i, j] - r[i, j]) ** 2 for i in range(5) for j in range(7)) / 35
    assert psnr(x, r) == pytest.approx(10 * math.log10(r.max() ** 2 / mse), rel=1e-12)
    with pytest.raises(InvalidReferenceError):
        psnr(x, np.zeros((5, 7)))
    with pytest.raises(InvalidReferenceError):
        psnr(x, r[:4])


def test_rel_l2_error():
    r = np.array([[3.0, 4.0]])
    assert rel_l2_error(r, r) == 0.0
    assert rel_l2_error(np.zeros_like(r), r) == pytest.approx(1.0)
    with pytest.raises(InvalidReferenceError):
        rel_l2_error(r, np.zeros_like(r))


def test_forward_is_normalized():
    setup = build_setup(small_config(forward_norm=0.3))
    assert operator_norm(setup.A, 200, 1e-10) == pytest.approx(0.3, rel=1e-4)
    raw = build_setup(small_config(forward_norm=None))
    assert raw.scale == 1.0


def test_exact_data_without_noise_or_psf():
    setup = build_setup(small_config(system_psf=FilterSpec.delta()))
    x0 = make_paper_phantom(setup.config.grid)
    y = simulate_data(x0, setup.psf, NoiseSpec(factor=0.0), setup.A)
    assert np.array_equal(y, setup.A.apply(x0.values))


def test_bandlimited_data_has_negative_samples():
    setup = build_setup(small_config())
    clean = simulate_clean(make_paper_phantom(setup.config.grid), setup.psf, setup.A)
    assert clean.min() < 0


def test_noise_level():
    setup = build_setup(small_config())
    x0 = make_paper_phantom(setup.config.grid)
    clean = simulate_clean(x0, setup.psf, setup.A)
    noisy = simulate_data(x0, setup.psf, NoiseSpec(2.0, seed=3), setup.A)
    target = 2.0 * np.abs(clean).mean()
    assert abs((noisy - clean).std() - target) < 0.02 * target
    raw = simulate_data(x0, setup.psf, NoiseSpec(2.0, seed=3, mean_mode="raw"), setup.A)
    assert abs((raw - clean).std() - 2.0 * abs(clean.mean())) < 0.02 * 2.0 * abs(clean.mean())


def test_l2_matches_delta_filter():
    setup = build_setup(small_config())
    x0 = make_paper_phantom(setup.config.grid)
    y = simulate_data(x0, setup.psf, setup.config.noise, setup.A)
    a, _, ma = reconstruct(y, "l2", setup, x0)
    b, _, mb = reconstruct(y, FilterSpec.delta(), setup, x0)
    assert np.abs(a.values - b.values).max() <= 1e-12
    assert ma.rel_l2_error >= 0


def test_noiseless_recovery_improves(ci_setup):
    x0 = make_paper_phantom(ci_setup.config.grid)
    y = simulate_data(x0, ci_setup.psf, ci_setup.config.noise, ci_setup.A)
    errs = []
    for its in (100, 500, 2000):
        img, _, m = reconstruct(y, "l2", ci_setup, x0, solver=SolverConfig(iterations=its))
        errs.append(m.rel_l2_error)
        assert img.values.min() >= 0
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.25


def test_run_comparison_outputs(tmp_path):
    cfg = small_config()
    report = run_comparison(cfg, tmp_path / "out")
    out = tmp_path / "out"
    names = sorted(p.name for p in out.iterdir())
    expected = {"phantom.rtkd", "phantom.pgm", "sinogram.rtkd", "metrics.csv", "meta.json"}
    for f in ("l2", "gauss", "bandpass"):
        expected |= {f"recon_{f}.rtkd", f"recon_{f}.pgm", f"trace_{f}.csv"}
    assert set(names) == expected
    rows = list(csv.reader(open(out / "metrics.csv")))
    assert rows[0] == METRICS_HEADER
    assert [r[0] for r in rows[1:]] == ["l2", "gauss", "bandpass"]
    meta = json.loads((out / "meta.json").read_text())
    assert meta["format_version"] == "1"
    assert max(meta["adjoint_test"].values()) < 1e-10
    assert np.array_equal(read_array(out / "sinogram.rtkd"), report.data)

    setup = build_setup(cfg)
    for run in report.runs:
        assert run.image.values.min() >= 0
        fid = cfg.fidelities[run.name]
        K1, b = make_fidelity_chain(
            fid if fid == "l2" else setup.filter(fid), setup.A, report.data
        )
        end = objective(run.image.values, K1, b, cfg.solver.alpha).total
        start = objective(np.zeros(cfg.grid.shape), K1, b, cfg.solver.alpha).total
        assert end <= start


def _without_wall(path):
    return [r[:-1] for r in csv.reader(open(path))]


def test_rerun_is_reproducible(tmp_path):
    cfg = small_config()
    run_comparison(cfg, tmp_path / "a")
    run_comparison(cfg, tmp_path / "b")
    assert _without_wall(tmp_path / "a" / "metrics.csv") == _without_wall(tmp_path / "b" / "metrics.csv")
    for f in ("l2", "gauss", "bandpass"):
        assert (tmp_path / "a" / f"trace_{f}.csv").read_bytes() == (
            tmp_path / "b" / f"trace_{f}.csv"
        ).read_bytes()


def test_failure_leaves_no_outputs(tmp_path, monkeypatch):
    import patrelax.experiment as ex

    real = ex.solve

    def flaky(K1, b, cfg, **kw):
        if "∘" in K1.descriptor:
            raise DivergenceError(7)
        return real(K1, b, cfg, **kw)

    monkeypatch.setattr(ex, "solve", flaky)
    with pytest.raises(StageError) as err:
        run_comparison(small_config(), tmp_path / "out")
    assert "reconstruct[gauss]" in str(err.value)
    assert not (tmp_path / "out").exists()
    assert list(tmp_path.iterdir()) == []
