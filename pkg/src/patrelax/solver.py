"""Chambolle-Pock primal-dual solver for filtered-fidelity TV reconstruction.

Minimizes ``||K1 x - b||^2 + alpha * TV(x)`` subject to ``x >= 0`` using the
stacked dual formulation with ``K = (K1; grad)``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatchError, DivergenceError, InvalidParameterError
from .filters import FilterSpec, TemporalFilter, build_filter, compose_filtered_forward, filter_array
from .forward import Sinogram
from .operators import LinearOperatorChain, operator_norm
from .regularization import div2d, grad2d, project_l2_ball, tv_value

log = logging.getLogger(__name__)

STEP_SAFETY = 1.01


@dataclass(frozen=True)
class SolverConfig:
    iterations: int = 5000
    alpha: float = 6e-6
    theta: float = 1.0
    norm_power_iters: int = 100
    norm_tol: float = 1e-6
    trace_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise InvalidParameterError("iterations must be a positive integer")
        if not self.alpha >= 0:
            raise InvalidParameterError("alpha must be >= 0")
        if not 0.0 <= self.theta <= 1.0:
            raise InvalidParameterError("theta must lie in [0, 1]")
        if self.norm_power_iters < 1 or self.trace_every < 1:
            raise InvalidParameterError("norm_power_iters and trace_every must be >= 1")


@dataclass
class SolveTrace:
    iteration: list[int] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    fidelity: list[float] = field(default_factory=list)
    tv: list[float] = field(default_factory=list)
    step_norm: list[float] = field(default_factory=list)
    # populated only when solve(..., keep_iterates=True)
    iterates: list[np.ndarray] = field(default_factory=list, repr=False)
    sigma: float = float("nan")
    tau: float = float("nan")
    norm_estimate: float = float("nan")

    def rows(self):
        return zip(self.iteration, self.objective, self.fidelity, self.tv, self.step_norm)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "objective", "fidelity", "tv", "step_norm"])
            for it, obj, fid, tv, st in self.rows():
                w.writerow([it] + [f"{v:.17g}" for v in (obj, fid, tv, st)])


class ObjectiveValue(NamedTuple):
    total: float
    fidelity: float
    tv: float
    feasible: bool


def objective(x, K1: LinearOperatorChain, b, alpha: float) -> ObjectiveValue:
    """Fidelity ``||K1 x - b||^2`` plus ``alpha * TV(x)``; infinite total off x >= 0."""
    xv = np.asarray(getattr(x, "values", x), dtype=np.float64)
    bv = np.asarray(getattr(b, "values", b), dtype=np.float64)
    if bv.shape != K1.range_shape:
        raise DimensionMismatchError(f"data shape {bv.shape} != {K1.range_shape}")
    r = K1.apply(xv) - bv
    fid = float(np.vdot(r, r))
    tv = tv_value(xv)
    feasible = bool(np.all(xv >= 0))
    total = fid + alpha * tv if feasible else math.inf
    return ObjectiveValue(total, fid, tv, feasible)


def stacked_norm(K1: LinearOperatorChain, config: SolverConfig) -> float:
    """Norm of ``(K1; grad)`` by power iteration on ``K1^T K1 - div grad``."""
    stacked = LinearOperatorChain(
        lambda x: np.concatenate([K1.apply_fn(x).ravel(), grad2d(x).ravel()]),
        lambda u: (
            K1.adjoint_fn(u[: math.prod(K1.range_shape)].reshape(K1.range_shape))
            - div2d(u[math.prod(K1.range_shape) :].reshape((2,) + K1.domain_shape))
        ),
        K1.domain_shape,
        (math.prod(K1.range_shape) + 2 * math.prod(K1.domain_shape),),
        f"({K1.descriptor}; ∇)",
    )
    return operator_norm(stacked, config.norm_power_iters, config.norm_tol, config.seed)


def solve(
    K1: LinearOperatorChain,
    b,
    config: SolverConfig = SolverConfig(),
    x_init=None,
    *,
    keep_iterates: bool = False,
    norm: float | None = None,
) -> tuple[np.ndarray, SolveTrace]:
    """Run ``config.iterations`` Chambolle-Pock steps; returns (x, trace).

    ``norm`` overrides the power-iteration estimate of ``||(K1; grad)||``.
    """
    bv = np.asarray(getattr(b, "values", b), dtype=np.float64)
    if bv.shape != K1.range_shape:
        raise DimensionMismatchError(f"data shape {bv.shape} != {K1.range_shape}")
    L = stacked_norm(K1, config) if norm is None else float(norm)
    L *= STEP_SAFETY
    sigma = tau = 1.0 / L if L > 0 else 1.0
    alpha, theta = config.alpha, config.theta

    if x_init is None:
        x = np.zeros(K1.domain_shape)
    else:
        x = np.array(getattr(x_init, "values", x_init), dtype=np.float64)
    xbar = x.copy()
    p = np.zeros(K1.range_shape)
    q = np.zeros((2,) + K1.domain_shape)
    trace = SolveTrace(sigma=sigma, tau=tau, norm_estimate=L / STEP_SAFETY)
    shrink = 1.0 + 0.5 * sigma

    for k in range(1, config.iterations + 1):
        p = (p + sigma * K1.apply_fn(xbar) - sigma * bv) / shrink
        q = project_l2_ball(q + sigma * grad2d(xbar), alpha)
        x_new = np.maximum(x - tau * (K1.adjoint_fn(p) - div2d(q)), 0.0)
        xbar = x_new + theta * (x_new - x)
        step = x_new - x
        x = x_new

        if k % config.trace_every == 0 or k == config.iterations:
            step_norm = float(np.linalg.norm(step))
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p)) and math.isfinite(step_norm)):
                raise DivergenceError(k)
            val = objective(x, K1, bv, alpha)
            trace.iteration.append(k)
            trace.objective.append(val.total)
            trace.fidelity.append(val.fidelity)
            trace.tv.append(val.tv)
            trace.step_norm.append(step_norm)
            if keep_iterates:
                trace.iterates.append(x.copy())
            log.debug("iter %d objective %.6g", k, val.total)
    return x, trace


def make_fidelity_chain(
    fidelity, A: LinearOperatorChain, y_B
) -> tuple[LinearOperatorChain, np.ndarray]:
    """Operator/data pair with ``||K1 x - b||^2 = ||phi * (A x - y_B)||^2``.

    ``fidelity`` is ``"l2"``, a :class:`FilterSpec`, or a built :class:`TemporalFilter`.
    """
    yv = np.asarray(getattr(y_B, "values", y_B), dtype=np.float64)
    if yv.shape != A.range_shape:
        raise DimensionMismatchError(f"data shape {yv.shape} != {A.range_shape}")
    if isinstance(fidelity, str):
        if fidelity != "l2":
            raise InvalidParameterError(f"unknown fidelity {fidelity!r}")
        return A, yv.copy()
    if isinstance(fidelity, FilterSpec):
        if not isinstance(y_B, Sinogram):
            raise InvalidParameterError("a FilterSpec fidelity needs a Sinogram to size the filter")
        fidelity = build_filter(fidelity, y_B.time.samples, y_B.time.dt)
    if not isinstance(fidelity, TemporalFilter):
        raise InvalidParameterError(f"unsupported fidelity {fidelity!r}")
    return compose_filtered_forward(fidelity, A), filter_array(fidelity, yv)
