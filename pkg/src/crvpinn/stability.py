"""Discrete inf-sup and continuity constants of the first-order Stokes system."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .gram import Convention, StokesDofLayout, gram_stokes, stokes_operator_matrix
from .grid_ops import GridSpec
from .sparse_linalg import factorize, generalized_eig_smallest

__all__ = ["InfSupReport", "infsup_constant", "continuity_ratios", "scalar_stability_constants", "MAX_N"]

# dense eigensolve budget
MAX_N = 16


@dataclass(frozen=True)
class InfSupReport:
    N: int
    lambda0: float
    lambda1: float
    alpha: float
    kernel_pressure_deviation: float
    kernel_other_norm: float
    rayleigh_lambda1: float

    def as_row(self) -> dict:
        return {
            "N": self.N,
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "alpha": self.alpha,
            "kernel_pressure_deviation": self.kernel_pressure_deviation,
        }


def _assemble(N: int):
    spec = GridSpec(N)
    layout = StokesDofLayout(spec)
    B = stokes_operator_matrix(spec, layout)
    G = gram_stokes(spec, layout).matrix
    return spec, layout, B, G


def infsup_constant(N: int) -> InfSupReport:
    """``alpha = sqrt(lambda_1)`` of ``R v = lambda G v`` with ``R = B M^{-1} B^T``.

    ``M`` is the trial Gram (identity in the unweighted scaling); it is still
    applied through a factorization so that the code does not rely on that.
    """
    if N > MAX_N:
        raise ValueError(f"dense eigensolve limited to N <= {MAX_N}, got {N}")
    spec, layout, B, G = _assemble(N)
    M = np.eye(layout.total) * Convention.UNWEIGHTED.weight(spec)
    Fm = factorize(M)
    Bd = B.toarray()
    R = Bd @ Fm.solve(Bd.T)
    R = 0.5 * (R + R.T)
    Gd = G.toarray()
    lam, V = generalized_eig_smallest(R, Gd, 2, return_vectors=True)
    lam0, lam1 = float(lam[0]), float(lam[1])
    parts = layout.split(V[:, 0])
    p = parts["p"]
    scale = np.max(np.abs(p)) or 1.0
    dev = float(np.max(np.abs(p - p.mean())) / scale)
    other = float(np.linalg.norm(np.concatenate([parts[k] for k in parts if k != "p"])) / scale)
    v1 = V[:, 1]
    rq = float(v1 @ R @ v1 / (v1 @ Gd @ v1))
    return InfSupReport(N, lam0, lam1, float(np.sqrt(max(lam1, 0.0))), dev, other, rq)


def continuity_ratios(N: int, trials: int = 100, seed: int = 0) -> np.ndarray:
    """``<A u, v> / (||u||_U ||v||_V)`` for random pairs; bounded by 1."""
    spec, layout, B, G = _assemble(N)
    rng = np.random.default_rng(seed)
    out = np.empty(trials)
    for t in range(trials):
        u = rng.standard_normal(layout.total)
        v = rng.standard_normal(layout.total)
        out[t] = abs(v @ (B @ u)) / (np.linalg.norm(u) * np.sqrt(v @ (G @ v)))
    return out


def scalar_stability_constants(disc) -> tuple:
    """Discrete ``(alpha_h, mu_h)`` of a scalar problem.

    Extremal square roots of ``A^T G^{-1} A w = lambda E w`` with ``A`` the
    residual operator on trial DOFs, ``G`` the test Gram and ``E`` the error
    matrix.  For any admissible field ``err / sqrt(LOSS)`` lies in
    ``[1/mu_h, 1/alpha_h]``.
    """
    if disc.problem.kind != "scalar":
        raise ValueError("scalar problems only; use infsup_constant for Stokes")
    if disc.spec.N > 4 * MAX_N:
        raise ValueError(f"dense eigensolve limited to N <= {4 * MAX_N}, got {disc.spec.N}")
    A = (disc.operator @ disc.dofs.selection().T).toarray()
    E = disc.error_matrix.toarray()
    R = A.T @ disc.gram.solve(A)
    R = 0.5 * (R + R.T)
    lam = scipy.linalg.eigh(R, E, eigvals_only=True)
    return float(np.sqrt(max(lam[0], 0.0))), float(np.sqrt(lam[-1]))
