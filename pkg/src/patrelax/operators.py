"""Linear operator chains with paired adjoints, and power-iteration norm estimates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError

ArrayMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LinearOperatorChain:
    """A linear map given by ``apply`` together with its exact transpose ``adjoint``.

    Both callables take and return plain float64 arrays of ``domain_shape`` /
    ``range_shape`` respectively.
    """

    apply_fn: ArrayMap
    adjoint_fn: ArrayMap
    domain_shape: tuple[int, ...]
    range_shape: tuple[int, ...]
    descriptor: str = "K"

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.domain_shape:
            raise DimensionMismatchError(
                f"{self.descriptor}: input shape {x.shape} != {self.domain_shape}"
            )
        return self.apply_fn(x)

    def adjoint(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != self.range_shape:
            raise DimensionMismatchError(
                f"{self.descriptor}^T: input shape {u.shape} != {self.range_shape}"
            )
        return self.adjoint_fn(u)

    def then(self, outer: "LinearOperatorChain") -> "LinearOperatorChain":
        """Composition ``outer ∘ self``."""
        if outer.domain_shape != self.range_shape:
            raise DimensionMismatchError(
                f"cannot compose {outer.descriptor} after {self.descriptor}: "
                f"{outer.domain_shape} != {self.range_shape}"
            )
        return LinearOperatorChain(
            lambda x: outer.apply_fn(self.apply_fn(x)),
            lambda u: self.adjoint_fn(outer.adjoint_fn(u)),
            self.domain_shape,
            outer.range_shape,
            f"{outer.descriptor}∘{self.descriptor}",
        )

    def scaled(self, factor: float) -> "LinearOperatorChain":
        return LinearOperatorChain(
            lambda x: factor * self.apply_fn(x),
            lambda u: factor * self.adjoint_fn(u),
            self.domain_shape,
            self.range_shape,
            f"{factor:g}·{self.descriptor}",
        )


def identity_chain(shape: tuple[int, ...], descriptor: str = "I") -> LinearOperatorChain:
    return LinearOperatorChain(
        lambda x: x.copy(), lambda u: u.copy(), tuple(shape), tuple(shape), descriptor
    )


def adjoint_residual(op: LinearOperatorChain, x: np.ndarray, u: np.ndarray) -> float:
    """|<Kx, u> - <x, K^T u>| / (||Kx|| ||u||), 0 when the denominator vanishes."""
    Kx = op.apply(x)
    lhs = float(np.vdot(Kx, u))
    rhs = float(np.vdot(x, op.adjoint(u)))
    denom = float(np.linalg.norm(Kx) * np.linalg.norm(u))
    if denom == 0.0:
        return abs(lhs - rhs)
    return abs(lhs - rhs) / denom


def max_adjoint_residual(op: LinearOperatorChain, pairs: int = 20, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        x = rng.standard_normal(op.domain_shape)
        u = rng.standard_normal(op.range_shape)
        worst = max(worst, adjoint_residual(op, x, u))
    return worst


def operator_norm(
    op: LinearOperatorChain, iterations: int = 100, tol: float = 1e-6, seed: int = 0
) -> float:
    """Largest singular value of ``op`` by power iteration on ``op^T op``."""
    if iterations < 1:
        raise InvalidParameterError("operator_norm needs at least one iteration")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.domain_shape)
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(iterations):
        y = op.adjoint(op.apply(x))
        lam = float(np.linalg.norm(y))
        if lam == 0.0:
            return 0.0
        x = y / lam
        new = np.sqrt(lam)
        if estimate > 0 and abs(new - estimate) < tol * new:
            estimate = new
            break
        estimate = new
    return float(estimate)
