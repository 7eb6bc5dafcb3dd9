"""Gram matrices of the discrete inner products, and the Stokes operator.

Two scalings are supported.  ``UNWEIGHTED`` drops the ``h^2`` factor of the
weighted inner product, which matches pointwise strong residuals and gives the
Laplace stencil ``h^-2 {4, -1}``.  ``WEIGHTED`` keeps ``h^2``.  The two differ
by one global factor, so loss-to-error ratios do not depend on the choice.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .grid_ops import DofSet, GridFunction, GridSpec, difference_matrix
from .sparse_linalg import Factorization, factorize

__all__ = [
    "Convention",
    "GramMatrix",
    "StokesDofLayout",
    "STOKES_FIELDS",
    "gram_laplace",
    "gram_variable_diffusion",
    "fundamental_blocks",
    "gram_stokes",
    "stokes_operator_matrix",
    "stokes_operator_full",
]


class Convention(enum.Enum):
    UNWEIGHTED = "unweighted"
    WEIGHTED = "weighted"

    def weight(self, spec: GridSpec) -> float:
        """Factor multiplying point sums in inner products."""
        return 1.0 if self is Convention.UNWEIGHTED else spec.h ** 2

    def from_weighted(self, spec: GridSpec) -> float:
        """Factor converting a squared weighted norm into this convention."""
        return spec.inv_h ** 2 if self is Convention.UNWEIGHTED else 1.0


@dataclass(eq=False)
class GramMatrix:
    matrix: sp.csr_matrix
    dofs: object
    convention: Convention = Convention.UNWEIGHTED

    @cached_property
    def factorization(self) -> Factorization:
        return factorize(self.matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def solve(self, b):
        return self.factorization.solve(b)


def _symmetrize(A) -> sp.csr_matrix:
    A = sp.csr_matrix(A)
    A = ((A + A.T) * 0.5).tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def gram_laplace(spec: GridSpec, convention: Convention = Convention.UNWEIGHTED) -> GramMatrix:
    """Gram matrix of ``(grad_+ u, grad_+ v)`` over the Kronecker-delta basis of D_{0,h}."""
    dofs = DofSet.interior(spec)
    E = dofs.selection()
    Dx = difference_matrix(spec, 0, "+")
    Dy = difference_matrix(spec, 1, "+")
    K = E @ (Dx.T @ Dx + Dy.T @ Dy) @ E.T
    return GramMatrix(_symmetrize(K * convention.weight(spec)), dofs, convention)


def gram_variable_diffusion(
    spec: GridSpec, eps: GridFunction, convention: Convention = Convention.UNWEIGHTED
) -> GramMatrix:
    """Gram matrix of ``sum eps(p) grad_+ u(p) . grad_+ v(p)``.

    Each forward difference leaving point ``(i, j)`` is weighted by
    ``eps[i, j]``; with ``eps == 1`` this is exactly :func:`gram_laplace`.
    """
    if eps.spec != spec:
        raise ValueError("eps lives on a different grid")
    if not np.all(eps.values > 0):
        raise ValueError("diffusion coefficient must be strictly positive")
    dofs = DofSet.interior(spec)
    E = dofs.selection()
    W = sp.diags(eps.flat)
    Dx = difference_matrix(spec, 0, "+")
    Dy = difference_matrix(spec, 1, "+")
    K = E @ (Dx.T @ W @ Dx + Dy.T @ W @ Dy) @ E.T
    return GramMatrix(_symmetrize(K * convention.weight(spec)), dofs, convention)


def fundamental_blocks(
    spec: GridSpec,
    test: DofSet,
    trial: DofSet,
    plus_region: np.ndarray | None = None,
    minus_region: np.ndarray | None = None,
    convention: Convention = Convention.UNWEIGHTED,
) -> dict[str, sp.csr_matrix]:
    """Matrices of the scalar bilinear forms used to build the Stokes Gram.

    Rows index ``test`` functions ``g``, columns index ``trial`` functions
    ``f``.  Products of forward differences are summed over ``plus_region``,
    products of backward differences over ``minus_region`` (boolean masks;
    by default the forward/backward validity sets of the grid).

    Keys: ``M``; ``Kx+ Ky+ K+ Kx- Ky- K-`` for ``(d f, d g)``;
    ``S+ S-`` for ``(d_x f, d_y g)``; ``Ax+ Ay+ Ax- Ay-`` for ``(d f, g)``.
    """
    if plus_region is None:
        plus_region = spec.forward_valid()
    if minus_region is None:
        minus_region = spec.backward_valid()
    w = convention.weight(spec)
    Et, Ef = test.selection(), trial.selection()
    Rp = sp.diags(np.asarray(plus_region, dtype=float).reshape(-1))
    Rm = sp.diags(np.asarray(minus_region, dtype=float).reshape(-1))
    D = {
        ("x", "+"): difference_matrix(spec, 0, "+"),
        ("y", "+"): difference_matrix(spec, 1, "+"),
        ("x", "-"): difference_matrix(spec, 0, "-"),
        ("y", "-"): difference_matrix(spec, 1, "-"),
    }

    def prod(a, sa, b, sb):
        # (d_a f, d_b g) -> matrix [g, f]
        R = Rp if sa == "+" else Rm
        return (Et @ D[b, sb].T @ R @ D[a, sa] @ Ef.T * w).tocsr()

    out = {"M": (Et @ Ef.T * w).tocsr()}
    for s in "+-":
        out[f"Kx{s}"] = prod("x", s, "x", s)
        out[f"Ky{s}"] = prod("y", s, "y", s)
        out[f"K{s}"] = (out[f"Kx{s}"] + out[f"Ky{s}"]).tocsr()
        out[f"S{s}"] = prod("x", s, "y", s)
        for a in "xy":
            # (d_a f, g): g is a point value, summed over the difference's own rows
            out[f"A{a}{s}"] = (Et @ D[a, s] @ Ef.T * w).tocsr()
    return out


STOKES_FIELDS = ("s11", "s12", "s21", "s22", "u1", "u2", "p")


@dataclass(eq=False)
class StokesDofLayout:
    """Degrees of freedom of the first-order Stokes system.

    ``s11, s21`` vanish on the left edge, ``s12, s22`` on the bottom edge,
    velocities on the whole boundary, and the pressure on the left edge, the
    bottom edge and the corner ``(1, 1)``.  ``zero_mean_pressure`` marks that
    pressure vectors are to be taken modulo constants; the stored basis is
    always the extended one.
    """

    spec: GridSpec
    zero_mean_pressure: bool = False
    fields: dict = field(init=False)
    offsets: dict = field(init=False)

    def __post_init__(self):
        spec = self.spec
        N = spec.N
        i, j = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
        left = i >= 1
        bottom = j >= 1
        p_mask = (i >= 1) & (j >= 1) & ~((i == N) & (j == N))
        masks = {
            "s11": left,
            "s12": bottom,
            "s21": left,
            "s22": bottom,
            "u1": spec.interior_mask(),
            "u2": spec.interior_mask(),
            "p": p_mask,
        }
        self.fields = {k: DofSet(spec, masks[k], k) for k in STOKES_FIELDS}
        self.offsets = {}
        off = 0
        for k in STOKES_FIELDS:
            self.offsets[k] = off
            off += len(self.fields[k])
        self.total = off

    def block(self, name: str) -> slice:
        start = self.offsets[name]
        return slice(start, start + len(self.fields[name]))

    def gamma_p(self) -> list[tuple[int, int]]:
        return [p for p in np.ndindex(*self.spec.shape) if not self.fields["p"].mask[p]]

    def gather(self, grids: dict) -> np.ndarray:
        return np.concatenate([self.fields[k].gather(grids[k]) for k in STOKES_FIELDS])

    def split(self, vec) -> dict[str, np.ndarray]:
        vec = np.asarray(vec)
        if vec.shape[0] != self.total:
            raise ValueError(f"expected length {self.total}, got {vec.shape[0]}")
        return {k: vec[self.block(k)] for k in STOKES_FIELDS}

    def scatter(self, vec) -> dict[str, GridFunction]:
        return {k: self.fields[k].scatter(v) for k, v in self.split(vec).items()}

    def pressure_indicator(self) -> np.ndarray:
        c = np.zeros(self.total)
        c[self.block("p")] = 1.0
        return c

    def remove_pressure_mean(self, vec) -> np.ndarray:
        out = np.array(vec, dtype=float)
        sl = self.block("p")
        out[sl] -= out[sl].mean()
        return out


def gram_stokes(
    spec: GridSpec,
    layout: StokesDofLayout | None = None,
    convention: Convention = Convention.UNWEIGHTED,
) -> GramMatrix:
    """Gram matrix of the adjoint graph norm on the Stokes test space.

    Forward-difference products are summed over interior points, where the
    momentum equations are tested, and backward-difference products over
    ``1 <= i, j <= N``.  With this choice the matrix equals ``B B^T + M``
    for the operator matrix ``B``, so the continuity constant is exactly 1.
    """
    layout = layout or StokesDofLayout(spec)
    F = layout.fields
    interior = spec.interior_mask()

    def fb(test, trial):
        return fundamental_blocks(
            spec, F[test], F[trial], plus_region=interior, convention=convention
        )

    b = {}

    def put(r, c, M):
        b[r, c] = b.get((r, c), 0) + M

    # sigma-sigma: (div_+ sigma, div_+ tau) + 2 (sigma, tau)
    for row_pair in (("s11", "s12"), ("s21", "s22")):
        xr, yr = row_pair
        put(xr, xr, fb(xr, xr)["Kx+"] + 2 * fb(xr, xr)["M"])
        put(yr, yr, fb(yr, yr)["Ky+"] + 2 * fb(yr, yr)["M"])
        put(yr, xr, fb(yr, xr)["S+"])
        put(xr, yr, fb(yr, xr)["S+"].T)
    # u-u: (div_- u, div_- v) + (grad_- u, grad_- v) + (u, v)
    uu = fb("u1", "u1")
    put("u1", "u1", 2 * uu["Kx-"] + uu["Ky-"] + uu["M"])
    put("u2", "u2", uu["Kx-"] + 2 * uu["Ky-"] + uu["M"])
    put("u2", "u1", uu["S-"])
    put("u1", "u2", uu["S-"].T)
    # p-p: (grad_+ p, grad_+ q) + (p, q)
    pp = fb("p", "p")
    put("p", "p", pp["K+"] + pp["M"])
    # sigma-u: (grad_- u, tau)
    for s, u, a in (("s11", "u1", "Ax-"), ("s12", "u1", "Ay-"), ("s21", "u2", "Ax-"), ("s22", "u2", "Ay-")):
        blk = fb(s, u)[a]
        put(s, u, blk)
        put(u, s, blk.T)
    # sigma-p: -(grad_+ p, div_+ tau)
    sp_blocks = {
        "s11": -fb("s11", "p")["Kx+"],
        "s12": -fb("s12", "p")["S+"],
        "s21": -fb("p", "s21")["S+"].T,
        "s22": -fb("s22", "p")["Ky+"],
    }
    for s, blk in sp_blocks.items():
        put(s, "p", blk)
        put("p", s, blk.T)

    grid = [[b.get((r, c)) for c in STOKES_FIELDS] for r in STOKES_FIELDS]
    G = sp.bmat(grid, format="csr")
    return GramMatrix(_symmetrize(G), layout, convention)


def stokes_operator_full(
    spec: GridSpec,
    layout: StokesDofLayout | None = None,
    convention: Convention = Convention.UNWEIGHTED,
) -> sp.csr_matrix:
    """First-order Stokes operator acting on full-grid field values.

    Rows are the test DOFs (in layout order); columns are the seven fields
    stacked in layout order, each over all ``(N+1)^2`` points.  Row blocks:
    ``sigma - grad_- u`` (four), ``-div_+ sigma + grad_+ p`` (two),
    ``div_- u`` (one).
    """
    layout = layout or StokesDofLayout(spec)
    F = layout.fields
    n = spec.size
    Dxp = difference_matrix(spec, 0, "+")
    Dyp = difference_matrix(spec, 1, "+")
    Dxm = difference_matrix(spec, 0, "-")
    Dym = difference_matrix(spec, 1, "-")
    I = sp.identity(n, format="csr")
    col = {k: i for i, k in enumerate(STOKES_FIELDS)}

    def row(test, terms):
        E = F[test].selection()
        blocks = [None] * len(STOKES_FIELDS)
        for name, op in terms:
            blocks[col[name]] = E @ op
        for k in range(len(blocks)):
            if blocks[k] is None:
                blocks[k] = sp.csr_matrix((len(F[test]), n))
        return blocks

    rows = [
        row("s11", [("s11", I), ("u1", -Dxm)]),
        row("s12", [("s12", I), ("u1", -Dym)]),
        row("s21", [("s21", I), ("u2", -Dxm)]),
        row("s22", [("s22", I), ("u2", -Dym)]),
        row("u1", [("s11", -Dxp), ("s12", -Dyp), ("p", Dxp)]),
        row("u2", [("s21", -Dxp), ("s22", -Dyp), ("p", Dyp)]),
        row("p", [("u1", Dxm), ("u2", Dym)]),
    ]
    B = sp.bmat(rows, format="csr") * convention.weight(spec)
    B.eliminate_zeros()
    B.sort_indices()
    return B


def stokes_operator_matrix(
    spec: GridSpec,
    layout: StokesDofLayout | None = None,
    convention: Convention = Convention.UNWEIGHTED,
) -> sp.csr_matrix:
    """Square matrix of ``(A u, v)`` over the (extended) Stokes DOFs."""
    layout = layout or StokesDofLayout(spec)
    full = stokes_operator_full(spec, layout, convention)
    return (full @ _dof_columns(layout).T).tocsr()


def _dof_columns(layout: StokesDofLayout) -> sp.csr_matrix:
    """Selection from stacked full-grid fields onto the layout DOFs."""
    blocks = [layout.fields[k].selection() for k in STOKES_FIELDS]
    return sp.block_diag(blocks, format="csr")
