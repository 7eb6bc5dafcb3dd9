"""Robust loss ``RES^T G^{-1} RES`` and the quantities derived from it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gram import GramMatrix

__all__ = [
    "LossEvaluation",
    "robust_loss",
    "loss_gradient_cotangent",
    "residual_representative",
    "error_bounds",
    "pinn_loss",
    "NEGATIVE_TOLERANCE",
]

# round-off allowance before a negative quadratic form is treated as a non-SPD Gram
NEGATIVE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class LossEvaluation:
    loss: float
    q: np.ndarray
    res: np.ndarray

    @property
    def sqrt_loss(self) -> float:
        return float(np.sqrt(self.loss))


def robust_loss(res, gram: GramMatrix) -> LossEvaluation:
    """Solve ``G q = res`` once with the cached factorization; loss is ``res . q``."""
    res = np.asarray(res, dtype=np.float64)
    if res.shape != (gram.dim,):
        raise ValueError(f"residual has shape {res.shape}, Gram has dimension {gram.dim}")
    q = gram.solve(res)
    loss = float(res @ q)
    if loss < 0.0:
        scale = NEGATIVE_TOLERANCE * max(1.0, float(res @ res))
        if loss < -scale:
            raise ArithmeticError(f"negative loss {loss:.3e}: Gram matrix is not positive definite")
        loss = 0.0
    return LossEvaluation(loss, q, res)


def loss_gradient_cotangent(ev: LossEvaluation) -> np.ndarray:
    """``d loss / d res = 2 q`` (G is constant and symmetric)."""
    return 2.0 * ev.q


def residual_representative(res, gram: GramMatrix):
    """Coefficients of the representative ``r`` with ``G r = res``, scattered to the grid.

    Returns grid functions for scalar DOF sets and a dict of fields for the
    Stokes layout.
    """
    r = gram.solve(np.asarray(res, dtype=np.float64))
    dofs = gram.dofs
    return dofs.scatter(r)


def error_bounds(loss: float, mu: float, alpha: float) -> tuple[float, float]:
    """Two-sided error estimate ``(sqrt(loss)/mu, sqrt(loss)/alpha)``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if mu < alpha:
        raise ValueError(f"need mu >= alpha, got mu={mu}, alpha={alpha}")
    s = float(np.sqrt(max(loss, 0.0)))
    return s / mu, s / alpha


def pinn_loss(res) -> float:
    """Mean squared residual (identity Gram, baseline only)."""
    res = np.asarray(res, dtype=np.float64)
    return float(np.mean(res ** 2)) if res.size else 0.0
