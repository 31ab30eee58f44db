"""Quick internal consistency checks run by ``patrelax selftest``."""
from __future__ import annotations

import numpy as np

from .filters import BANDPASS_RELAX, GAUSS_RELAX, SYSTEM_PSF, build_filter, compose_filtered_forward
from .forward import DetectorGeometry, PatForwardModel, TimeGrid
from .image import ImageGrid
from .operators import identity_chain, max_adjoint_residual
from .regularization import div2d, grad2d, gradient_chain, project_l2_ball, prox_fidelity_conjugate
from .solver import SolverConfig, solve

ADJOINT_TOL = 1e-10


def run_selftest(emit=print) -> bool:
    ok = True

    def check(name, passed, detail):
        nonlocal ok
        ok &= bool(passed)
        emit(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")

    grid = ImageGrid(32, 1.0)
    geom = DetectorGeometry(16, 1.2)
    model = PatForwardModel(grid, geom, TimeGrid.covering(geom, grid, 64))
    A = model.chain()
    worst = max_adjoint_residual(A, 10, seed=1)
    for spec in (SYSTEM_PSF, GAUSS_RELAX, BANDPASS_RELAX):
        f = build_filter(spec, model.time.samples, model.time.dt)
        worst = max(worst, max_adjoint_residual(compose_filtered_forward(f, A), 10, seed=2))
    worst = max(worst, max_adjoint_residual(gradient_chain(grid.shape), 10, seed=3))
    check("adjoint", worst < ADJOINT_TOL, f"max relative residual {worst:.3e}")

    rng = np.random.default_rng(0)
    g = rng.standard_normal((2, 6, 6)) * 3
    proj = project_l2_ball(g, 1.0)
    mag = np.hypot(g[0], g[1])
    expected = g / np.maximum(1.0, mag)
    err = np.abs(proj - expected).max()
    x = rng.standard_normal((6, 6))
    div_err = abs(np.vdot(grad2d(x), g) + np.vdot(x, div2d(g)))
    p, b = rng.standard_normal((2, 8))
    q = prox_fidelity_conjugate(p, 0.7, b)
    opt = np.abs((q - p) / 0.7 + b + q / 2).max()
    check("prox", max(err, div_err, opt) < 1e-12, f"ball {err:.1e}, div {div_err:.1e}, fid {opt:.1e}")

    b = np.array([[-1.0, 2.0], [0.5, -0.3]])
    xs, _ = solve(identity_chain((2, 2)), b, SolverConfig(iterations=2000, alpha=0.0, trace_every=500))
    dist = np.abs(xs - np.maximum(b, 0)).max()
    check("tiny-solve", dist < 1e-6, f"max |x - max(b,0)| = {dist:.2e}")
    return ok
