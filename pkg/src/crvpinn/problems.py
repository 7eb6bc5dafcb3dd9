"""Benchmark problems: exact solutions, forcings, residual operators and oracles.

Scalar problems share one discrete operator,

    L_h u = beta . grad_+ u - div_- (eps grad_+ u)

evaluated at interior points, and a residual ``sign * L_h u + fcoef * f``.
Its weak form against Kronecker deltas is ``(beta . grad_+ u, v) +
(eps grad_+ u, grad_+ v)``, which is what the Gram norms are built around.

Forcings are hand-differentiated from the exact solutions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb
from typing import Callable

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import Polynomial as P
from scipy.sparse.linalg import spsolve

from .grid_ops import DofSet, GridFunction, GridSpec, difference_matrix, partial
from .gram import (
    STOKES_FIELDS,
    Convention,
    StokesDofLayout,
    gram_laplace,
    gram_stokes,
    gram_variable_diffusion,
    stokes_operator_full,
)
from .neural import BoundaryTreatment, bubble, max_lift, transfinite_lift

__all__ = [
    "ProblemSpec",
    "PROBLEMS",
    "get_problem",
    "exact_solution",
    "forcing",
    "robustness_constants",
    "eriksson_johnson_rates",
    "Discretization",
    "discretize",
    "STOKES_NET_FIELDS",
]

PI = np.pi

# network output order for the Stokes system: u1, u2, p, w1=s11, w2=s12, z1=s21, z2=s22
STOKES_NET_FIELDS = ("u1", "u2", "p", "s11", "s12", "s21", "s22")


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    kind: str  # "scalar" or "stokes"
    fields: tuple
    exact: Callable
    forcing: Callable
    mu: float
    alpha: float
    beta: tuple = (0.0, 0.0)
    eps: Callable | float = 1.0
    res_sign: float = -1.0
    f_coef: float = 1.0
    variable_gram: bool = False
    description: str = ""

    def eps_on(self, spec: GridSpec) -> GridFunction:
        if callable(self.eps):
            return GridFunction.sample(spec, self.eps)
        return GridFunction(spec, np.full(spec.shape, float(self.eps)))


# laplace, sin-sin
def _sinsin(x, y):
    return {"u": np.sin(2 * PI * x) * np.sin(2 * PI * y)}


def _sinsin_f(x, y):
    return {"u": 8 * PI ** 2 * np.sin(2 * PI * x) * np.sin(2 * PI * y)}


# laplace, exp-sin
def _expsin(x, y):
    return {"u": -np.exp(PI * (x - 2 * y)) * np.sin(2 * PI * x) * np.sin(PI * y)}


def _expsin_f(x, y):
    e = np.exp(PI * (x - 2 * y))
    return {
        "u": 4 * PI ** 2 * e * (np.cos(2 * PI * x) * np.sin(PI * y) - np.sin(2 * PI * x) * np.cos(PI * y))
    }


# advection-diffusion boundary layer
EJ_EPS = 0.1


def eriksson_johnson_rates(eps: float = EJ_EPS) -> tuple[float, float]:
    d = np.sqrt(1.0 + 4.0 * eps ** 2 * PI ** 2)
    return (1.0 + d) / (2.0 * eps), (1.0 - d) / (2.0 * eps)


def _ej(x, y):
    r1, r2 = eriksson_johnson_rates()
    num = np.exp(r1 * (x - 1)) - np.exp(r2 * (x - 1))
    return {"u": num / (np.exp(-r1) - np.exp(-r2)) * np.sin(PI * y)}


def _ej_f(x, y):
    return {"u": np.zeros(np.broadcast(x, y).shape)}


# variable diffusion: div(eps grad u) = f
def _vd_eps(x, y):
    return 2.0 * (y + 1.0) + 0.0 * x


def _vd(x, y):
    return {"u": np.sin(2 * PI * x) * np.sin(PI * y)}


def _vd_f(x, y):
    u = np.sin(2 * PI * x) * np.sin(PI * y)
    uy = PI * np.sin(2 * PI * x) * np.cos(PI * y)
    return {"u": _vd_eps(x, y) * (-5 * PI ** 2) * u + 2.0 * uy}


# steep internal layer: laplace(u) = f
def _jump(x, y):
    t = 0.45 * np.tanh(100 * (y - 0.5)) + 0.55
    return {"u": t * np.sin(PI * x) * np.sin(PI * y)}


def _jump_f(x, y):
    th = np.tanh(100 * (y - 0.5))
    sech2 = 1.0 - th ** 2
    t = 0.45 * th + 0.55
    t1 = 45.0 * sech2
    t2 = -9000.0 * sech2 * th
    s, c = np.sin(PI * y), np.cos(PI * y)
    return {"u": np.sin(PI * x) * (-2 * PI ** 2 * t * s + 2 * PI * t1 * c + t2 * s)}


# Stokes: u1 = A(x) B(y), u2 = C(x) D(y) with A, C = exp(x) * polynomial
_X = P([0, 1])
_PA = 2 * (_X - 1) ** 2 * _X ** 2
_PC = -(_X - 1) * _X * (_X ** 2 + 3 * _X - 2)
_QB = (_X ** 2 - _X) * (2 * _X - 1)
_QD = (_X - 1) ** 2 * _X ** 2


def _expoly(p: P, x, order: int):
    # d^k/dx^k [exp(x) p(x)] = exp(x) * sum_j C(k, j) p^(j)(x)
    acc = p(x)
    for j in range(1, order + 1):
        acc = acc + comb(order, j) * p.deriv(j)(x)
    return np.exp(x) * acc


def _stokes_q(y):
    return y ** 2 - y


def _stokes_E(x, q):
    return 456 + x ** 2 * (228 - 5 * q) + 2 * x * (-228 + q) + 2 * x ** 3 * (-36 + q) + x ** 4 * (12 + q)


def _stokes_p(x, y):
    q = _stokes_q(y)
    return -424 + 156 * np.e + q * (-456 + np.exp(x) * _stokes_E(x, q))


def _stokes_exact(x, y):
    A, Ax = _expoly(_PA, x, 0), _expoly(_PA, x, 1)
    C, Cx = _expoly(_PC, x, 0), _expoly(_PC, x, 1)
    B, By = _QB(y), _QB.deriv()(y)
    D, Dy = _QD(y), _QD.deriv()(y)
    return {
        "u1": A * B,
        "u2": C * D,
        "p": _stokes_p(x, y) + 0.0 * x,
        "s11": Ax * B,
        "s12": A * By,
        "s21": Cx * D,
        "s22": C * Dy,
    }


def _stokes_f(x, y):
    A, Axx = _expoly(_PA, x, 0), _expoly(_PA, x, 2)
    C, Cxx = _expoly(_PC, x, 0), _expoly(_PC, x, 2)
    B, Byy = _QB(y), _QB.deriv(2)(y)
    D, Dyy = _QD(y), _QD.deriv(2)(y)
    q = _stokes_q(y)
    E = _stokes_E(x, q)
    Ex = 2 * x * (228 - 5 * q) + 2 * (-228 + q) + 6 * x ** 2 * (-36 + q) + 4 * x ** 3 * (12 + q)
    Eq = -5 * x ** 2 + 2 * x + 2 * x ** 3 + x ** 4
    px = q * np.exp(x) * (E + Ex)
    py = (2 * y - 1) * (-456 + np.exp(x) * (E + q * Eq))
    zero = np.zeros(np.broadcast(x, y).shape)
    return {
        "u1": -(Axx * B + A * Byy) + px,
        "u2": -(Cxx * D + C * Dyy) + py,
        "p": zero,
        "s11": zero,
        "s12": zero,
        "s21": zero,
        "s22": zero,
    }


PROBLEMS: dict[str, ProblemSpec] = {
    p.name: p
    for p in [
        ProblemSpec(
            "laplace-sinsin", "scalar", ("u",), _sinsin, _sinsin_f, 1.0, 1.0,
            description="-lap u = f, u = sin(2 pi x) sin(2 pi y)",
        ),
        ProblemSpec(
            "laplace-expsin", "scalar", ("u",), _expsin, _expsin_f, 1.0, 1.0,
            description="-lap u = f, u = -exp(pi (x - 2y)) sin(2 pi x) sin(pi y)",
        ),
        ProblemSpec(
            "advection-diffusion", "scalar", ("u",), _ej, _ej_f, 4.1, 0.1,
            beta=(1.0, 0.0), eps=EJ_EPS, res_sign=1.0, f_coef=0.0,
            description="beta . grad u - eps lap u = 0, boundary layer at x = 1",
        ),
        ProblemSpec(
            "poisson-vardiff", "scalar", ("u",), _vd, _vd_f, 1.0, 1.0,
            eps=_vd_eps, res_sign=-1.0, f_coef=-1.0, variable_gram=True,
            description="div(eps grad u) = f, eps = 2 (y + 1)",
        ),
        ProblemSpec(
            "poisson-jump", "scalar", ("u",), _jump, _jump_f, 1.0, 1.0,
            res_sign=-1.0, f_coef=-1.0,
            description="lap u = f, internal layer at y = 1/2",
        ),
        ProblemSpec(
            "stokes", "stokes", STOKES_NET_FIELDS, _stokes_exact, _stokes_f, 1.0, 0.125,
            description="first-order Stokes system, manufactured solution",
        ),
    ]
}


def get_problem(name: str) -> ProblemSpec:
    try:
        return PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; valid names: {', '.join(PROBLEMS)}") from None


def exact_solution(problem, x1, x2) -> dict:
    p = problem if isinstance(problem, ProblemSpec) else get_problem(problem)
    return p.exact(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))


def forcing(problem, x1, x2) -> dict:
    p = problem if isinstance(problem, ProblemSpec) else get_problem(problem)
    return p.forcing(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))


def robustness_constants(problem) -> tuple[float, float]:
    p = problem if isinstance(problem, ProblemSpec) else get_problem(problem)
    return p.mu, p.alpha


def _sample(spec: GridSpec, fn: Callable, name: str) -> GridFunction:
    return GridFunction.sample(spec, lambda x, y: fn(x, y)[name])


class Discretization:
    """Everything that depends on the grid: Gram, operator, lifts, oracle.

    ``operator`` maps the stacked full-grid field values (fields in
    ``problem.fields`` order) to the residual vector; ``residual = operator
    @ stack + offset``.  Residual rows, Gram rows and trial DOFs share one
    ordering.
    """

    def __init__(
        self,
        problem: ProblemSpec,
        N: int,
        convention: Convention = Convention.UNWEIGHTED,
        lift: str = "transfinite",
    ):
        if lift not in ("transfinite", "max"):
            raise ValueError(f"lift must be 'transfinite' or 'max', got {lift!r}")
        self.problem = problem
        self.spec = GridSpec(N)
        self.convention = convention
        self.lift_kind = lift
        if problem.kind == "stokes":
            self._build_stokes()
        else:
            self._build_scalar()

    # scalar problems

    def _scalar_L(self) -> sp.csr_matrix:
        s = self.spec
        eps = sp.diags(self.problem.eps_on(s).flat)
        bx, by = self.problem.beta
        Dxp, Dyp = difference_matrix(s, 0, "+"), difference_matrix(s, 1, "+")
        Dxm, Dym = difference_matrix(s, 0, "-"), difference_matrix(s, 1, "-")
        return (bx * Dxp + by * Dyp - Dxm @ eps @ Dxp - Dym @ eps @ Dyp).tocsr()

    def _build_scalar(self):
        s, p = self.spec, self.problem
        w = self.convention.weight(s)
        self.dofs = DofSet.interior(s)
        E = self.dofs.selection()
        self.operator = (p.res_sign * w * (E @ self._scalar_L())).tocsr()
        self.offset = p.f_coef * w * self.dofs.gather(_sample(s, p.forcing, "u"))
        if p.variable_gram:
            self.gram = gram_variable_diffusion(s, p.eps_on(s), self.convention)
        else:
            self.gram = gram_laplace(s, self.convention)
        self.error_matrix = self.gram.matrix
        exact = p.exact
        lift_fn = transfinite_lift if self.lift_kind == "transfinite" else max_lift
        self.treatment = BoundaryTreatment(
            cutoff={"u": bubble(s)},
            lift={"u": lift_fn(s, lambda x, y: exact(x, y)["u"])},
        )

    # Stokes

    def _build_stokes(self):
        s = self.spec
        layout = StokesDofLayout(s)
        self.layout = layout
        self.dofs = layout
        full = stokes_operator_full(s, layout, self.convention)
        n = s.size
        # reorder column blocks from the layout order to the network order
        perm = [STOKES_FIELDS.index(k) for k in self.problem.fields]
        self.operator = sp.hstack(
            [full[:, b * n:(b + 1) * n] for b in perm], format="csr"
        )
        f = _stokes_f
        F = np.zeros(layout.total)
        F[layout.block("u1")] = layout.fields["u1"].gather(_sample(s, f, "u1"))
        F[layout.block("u2")] = layout.fields["u2"].gather(_sample(s, f, "u2"))
        self.offset = -self.convention.weight(s) * F
        self.gram = gram_stokes(s, layout, self.convention)
        self.error_matrix = sp.identity(layout.total, format="csr") * self.convention.weight(s)
        exact = self.problem.exact
        lift_fn = transfinite_lift if self.lift_kind == "transfinite" else max_lift
        cut, lift = {}, {}
        for k in self.problem.fields:
            if k in ("u1", "u2"):
                cut[k] = bubble(s)
                lift[k] = lift_fn(s, lambda x, y, k=k: exact(x, y)[k])
            else:
                cut[k] = GridFunction(s, layout.fields[k].mask.astype(float))
                lift[k] = GridFunction.zeros(s)
        self.treatment = BoundaryTreatment(cutoff=cut, lift=lift)

    # shared

    @property
    def dim(self) -> int:
        return self.operator.shape[0]

    def stack(self, fields: dict) -> np.ndarray:
        return np.concatenate([fields[k].flat for k in self.problem.fields])

    def unstack(self, vec) -> dict:
        n = self.spec.size
        return {k: GridFunction(self.spec, vec[i * n:(i + 1) * n]) for i, k in enumerate(self.problem.fields)}

    def residual(self, fields: dict) -> np.ndarray:
        return self.operator @ self.stack(fields) + self.offset

    def residual_stencil(self, fields: dict) -> np.ndarray:
        """Same residual computed pointwise with grid_ops stencils (independent route)."""
        s, p = self.spec, self.problem
        w = self.convention.weight(s)
        if p.kind == "scalar":
            u = fields["u"]
            eps = p.eps_on(s)
            bx, by = p.beta
            flux_x = eps * partial(u, 0, "+")
            flux_y = eps * partial(u, 1, "+")
            Lu = bx * partial(u, 0, "+") + by * partial(u, 1, "+") - partial(flux_x, 0, "-") - partial(flux_y, 1, "-")
            fvals = _sample(s, p.forcing, "u")
            r = p.res_sign * Lu + p.f_coef * fvals
            return w * self.dofs.gather(r)
        F = self.layout.fields
        d = lambda g, a, sgn: partial(g, a, sgn)  # noqa: E731
        f = _stokes_f
        rows = {
            "s11": fields["s11"] - d(fields["u1"], 0, "-"),
            "s12": fields["s12"] - d(fields["u1"], 1, "-"),
            "s21": fields["s21"] - d(fields["u2"], 0, "-"),
            "s22": fields["s22"] - d(fields["u2"], 1, "-"),
            "u1": -d(fields["s11"], 0, "+") - d(fields["s12"], 1, "+") + d(fields["p"], 0, "+") - _sample(s, f, "u1"),
            "u2": -d(fields["s21"], 0, "+") - d(fields["s22"], 1, "+") + d(fields["p"], 1, "+") - _sample(s, f, "u2"),
            "p": d(fields["u1"], 0, "-") + d(fields["u2"], 1, "-"),
        }
        return w * np.concatenate([F[k].gather(rows[k]) for k in STOKES_FIELDS])

    def exact_fields(self) -> dict:
        return {k: _sample(self.spec, self.problem.exact, k) for k in self.problem.fields}

    def trial_vector(self, fields: dict) -> np.ndarray:
        """Trial-DOF coefficients of the fields (pressure mean removed for Stokes)."""
        if self.problem.kind == "scalar":
            return self.dofs.gather(fields["u"])
        v = self.layout.gather(fields)
        return self.layout.remove_pressure_mean(v)

    def from_trial_vector(self, vec) -> dict:
        if self.problem.kind == "scalar":
            lifted = self.treatment.lift["u"].values * self.spec.boundary_mask()
            return {"u": self.dofs.scatter(vec) + lifted}
        return self.layout.scatter(vec)

    def norm(self, vec) -> float:
        vec = np.asarray(vec, dtype=float)
        return float(np.sqrt(max(vec @ (self.error_matrix @ vec), 0.0)))

    def error(self, fields: dict, reference: dict) -> float:
        return self.norm(self.trial_vector(fields) - self.trial_vector(reference))

    @cached_property
    def discrete_solution(self) -> dict:
        return self.direct_solve()

    def direct_solve(self) -> dict:
        """Discrete solution ``u*_h`` from a sparse direct solve."""
        s = self.spec
        if self.problem.kind == "scalar":
            E = self.dofs.selection()
            A = (self.operator @ E.T).tocsc()
            bnd = self.treatment.lift["u"].flat * s.boundary_mask().reshape(-1)
            rhs = -(self.offset + self.operator @ bnd)
            x = spsolve(A, rhs)
            if not np.all(np.isfinite(x)):
                raise np.linalg.LinAlgError("singular scalar system")
            return self.from_trial_vector(x)
        layout = self.layout
        E = sp.block_diag([layout.fields[k].selection() for k in self.problem.fields], format="csr")
        B = (self.operator @ E.T).tocsr()
        # trial columns are in network order; move them to layout order
        col_perm = np.concatenate(
            [np.arange(layout.total)[self._net_block(k)] for k in STOKES_FIELDS]
        )
        B = B[:, col_perm]
        c = layout.pressure_indicator()
        K = sp.bmat([[B, sp.csr_matrix(c[:, None])], [sp.csr_matrix(c[None, :]), None]], format="csc")
        sol = spsolve(K, np.concatenate([-self.offset, [0.0]]))
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError("singular Stokes system")
        return layout.scatter(sol[:-1])

    def _net_block(self, name: str) -> slice:
        F = self.layout.fields
        off = 0
        for k in self.problem.fields:
            if k == name:
                return slice(off, off + len(F[k]))
            off += len(F[k])
        raise KeyError(name)


def discretize(problem, N: int, convention: Convention = Convention.UNWEIGHTED, lift: str = "transfinite") -> Discretization:
    p = problem if isinstance(problem, ProblemSpec) else get_problem(problem)
    return Discretization(p, N, convention, lift)
