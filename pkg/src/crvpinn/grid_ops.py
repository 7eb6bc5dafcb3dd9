"""Grid functions on the uniform collocation grid of the unit square.

Values are stored as ``(N+1, N+1)`` arrays indexed ``[i, j]`` with
``u[i, j] = u(i*h, j*h)``.  Flattening is row-major, so the flat index of
``(i, j)`` is ``i*(N+1) + j`` (lexicographic, ``i`` outer).

Inner products follow the weighted definition ``(u, v)_h = h^2 sum u v``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "GridSpec",
    "GridFunction",
    "DofSet",
    "inner_h",
    "norm_h",
    "grad_forward",
    "grad_backward",
    "partial",
    "inner_grad_h",
    "norm_grad_h",
    "laplacian_h",
    "translate_x",
    "difference_matrix",
]


@dataclass(frozen=True)
class GridSpec:
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def inv_h(self) -> float:
        # exact for integer N; keeps stencil weights free of rounding
        return float(self.N)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N + 1, self.N + 1)

    @property
    def size(self) -> int:
        return (self.N + 1) ** 2

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        t = np.arange(self.N + 1) * self.h
        return np.meshgrid(t, t, indexing="ij")

    def flat_index(self, i, j):
        return np.asarray(i) * (self.N + 1) + np.asarray(j)

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m

    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask()

    def forward_valid(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[:-1, :-1] = True
        return m

    def backward_valid(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[1:, 1:] = True
        return m


class GridFunction:
    """Real values on the ``(N+1)^2`` collocation points.

    The stored array is read-only; arithmetic returns new objects.
    """

    __slots__ = ("spec", "values")

    def __init__(self, spec: GridSpec, values):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim == 1:
            if arr.size != spec.size:
                raise ValueError(f"expected {spec.size} values, got {arr.size}")
            arr = arr.reshape(spec.shape)
        if arr.shape != spec.shape:
            raise ValueError(f"expected shape {spec.shape}, got {arr.shape}")
        arr.setflags(write=False)
        self.spec = spec
        self.values = arr

    @classmethod
    def zeros(cls, spec: GridSpec) -> "GridFunction":
        return cls(spec, np.zeros(spec.shape))

    @classmethod
    def delta(cls, spec: GridSpec, i: int, j: int) -> "GridFunction":
        v = np.zeros(spec.shape)
        v[i, j] = 1.0
        return cls(spec, v)

    @classmethod
    def sample(cls, spec: GridSpec, fn: Callable) -> "GridFunction":
        x, y = spec.coords()
        return cls(spec, np.broadcast_to(fn(x, y), spec.shape))

    @classmethod
    def random_interior(cls, spec: GridSpec, rng: np.random.Generator) -> "GridFunction":
        v = np.zeros(spec.shape)
        v[1:-1, 1:-1] = rng.standard_normal((spec.N - 1, spec.N - 1))
        return cls(spec, v)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    @property
    def is_interior(self) -> bool:
        """True when every boundary value is exactly zero (membership in D_{0,h})."""
        v = self.values
        return not (v[0, :].any() or v[-1, :].any() or v[:, 0].any() or v[:, -1].any())

    def _coerce(self, other):
        if isinstance(other, GridFunction):
            _check_same(self, other)
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.spec, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.spec, self.values - self._coerce(other))

    def __rsub__(self, other):
        return GridFunction(self.spec, self._coerce(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.spec, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.spec, -self.values)

    def __repr__(self):
        return f"GridFunction(N={self.spec.N})"


def _check_same(u: GridFunction, v: GridFunction):
    if u.spec != v.spec:
        raise ValueError(f"grid mismatch: N={u.spec.N} vs N={v.spec.N}")


def _require_interior(u: GridFunction, what: str):
    if not u.is_interior:
        raise ValueError(f"{what} requires a function with zero boundary values")


class DofSet:
    """Ordered grid indices forming the unknowns of a constrained subspace.

    Indices are kept in lexicographic ``(i, j)`` order so that Gram assembly,
    residual assembly and solves all agree on the layout.
    """

    def __init__(self, spec: GridSpec, mask: np.ndarray, name: str = ""):
        mask = np.array(mask, dtype=bool)
        if mask.shape != spec.shape:
            raise ValueError("mask shape does not match the grid")
        self.spec = spec
        self.name = name
        self.mask = mask
        self.mask.setflags(write=False)
        self.flat_indices = np.flatnonzero(mask.reshape(-1))

    @classmethod
    def interior(cls, spec: GridSpec) -> "DofSet":
        return cls(spec, spec.interior_mask(), "interior")

    @classmethod
    def from_points(cls, spec: GridSpec, points: Sequence[tuple[int, int]], name="") -> "DofSet":
        m = np.zeros(spec.shape, dtype=bool)
        for i, j in points:
            if not (0 <= i <= spec.N and 0 <= j <= spec.N):
                raise ValueError(f"index {(i, j)} outside the grid")
            m[i, j] = True
        return cls(spec, m, name)

    def __len__(self):
        return self.flat_indices.size

    @property
    def points(self) -> list[tuple[int, int]]:
        i, j = np.divmod(self.flat_indices, self.spec.N + 1)
        return list(zip(i.tolist(), j.tolist()))

    def gather(self, u) -> np.ndarray:
        vals = u.values if isinstance(u, GridFunction) else np.asarray(u)
        return vals.reshape(-1)[self.flat_indices]

    def scatter(self, vec) -> GridFunction:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (len(self),):
            raise ValueError(f"expected a vector of length {len(self)}, got {vec.shape}")
        out = np.zeros(self.spec.size)
        out[self.flat_indices] = vec
        return GridFunction(self.spec, out)

    def selection(self) -> sp.csr_matrix:
        """Rows pick the DOF values out of a flat full-grid vector."""
        n = len(self)
        return sp.csr_matrix(
            (np.ones(n), (np.arange(n), self.flat_indices)), shape=(n, self.spec.size)
        )

    def __eq__(self, other):
        return (
            isinstance(other, DofSet)
            and self.spec == other.spec
            and np.array_equal(self.flat_indices, other.flat_indices)
        )

    def __hash__(self):
        return hash((self.spec, self.flat_indices.tobytes()))

    def __repr__(self):
        return f"DofSet({self.name or 'custom'}, N={self.spec.N}, n={len(self)})"


def inner_h(u: GridFunction, v: GridFunction, region: np.ndarray | None = None) -> float:
    """Weighted inner product ``h^2 sum_p u(p) v(p)``.

    ``region`` optionally restricts the sum to a boolean mask of points.
    """
    _check_same(u, v)
    prod = u.values * v.values
    if region is not None:
        prod = prod[region]
    return float(u.spec.h ** 2 * np.sum(prod))


def norm_h(u: GridFunction) -> float:
    return float(np.sqrt(max(inner_h(u, u), 0.0)))


def partial(u: GridFunction, axis: int, direction: str) -> GridFunction:
    """One-sided difference along ``axis`` wherever the neighbour exists.

    Points without the required neighbour (the last line for ``"+"``, the
    first line for ``"-"``) are set to zero.
    """
    v = u.values
    out = np.zeros_like(v)
    k = u.spec.inv_h
    if direction == "+":
        if axis == 0:
            out[:-1, :] = (v[1:, :] - v[:-1, :]) * k
        else:
            out[:, :-1] = (v[:, 1:] - v[:, :-1]) * k
    elif direction == "-":
        if axis == 0:
            out[1:, :] = (v[1:, :] - v[:-1, :]) * k
        else:
            out[:, 1:] = (v[:, 1:] - v[:, :-1]) * k
    else:
        raise ValueError(f"direction must be '+' or '-', got {direction!r}")
    return GridFunction(u.spec, out)


def grad_forward(u: GridFunction) -> tuple[GridFunction, GridFunction]:
    """``(grad_x+ u, grad_y+ u)``, valid for ``0 <= i, j <= N-1`` and zero elsewhere."""
    valid = u.spec.forward_valid()
    gx = partial(u, 0, "+").values * valid
    gy = partial(u, 1, "+").values * valid
    return GridFunction(u.spec, gx), GridFunction(u.spec, gy)


def grad_backward(u: GridFunction) -> tuple[GridFunction, GridFunction]:
    """``(grad_x- u, grad_y- u)``, valid for ``1 <= i, j <= N`` and zero elsewhere."""
    valid = u.spec.backward_valid()
    gx = partial(u, 0, "-").values * valid
    gy = partial(u, 1, "-").values * valid
    return GridFunction(u.spec, gx), GridFunction(u.spec, gy)


def inner_grad_h(u: GridFunction, v: GridFunction, direction: str = "+") -> float:
    _check_same(u, v)
    _require_interior(u, "inner_grad_h")
    _require_interior(v, "inner_grad_h")
    grad = grad_forward if direction == "+" else grad_backward
    ux, uy = grad(u)
    vx, vy = grad(v)
    return inner_h(ux, vx) + inner_h(uy, vy)


def norm_grad_h(u: GridFunction) -> float:
    return float(np.sqrt(max(inner_grad_h(u, u), 0.0)))


def laplacian_h(u: GridFunction) -> GridFunction:
    v = u.values
    out = np.zeros_like(v)
    k2 = u.spec.inv_h ** 2
    c = v[1:-1, 1:-1]
    out[1:-1, 1:-1] = (
        (v[2:, 1:-1] - 2.0 * c + v[:-2, 1:-1]) + (v[1:-1, 2:] - 2.0 * c + v[1:-1, :-2])
    ) * k2
    return GridFunction(u.spec, out)


def translate_x(u: GridFunction, require_interior: bool = True) -> GridFunction:
    """Shift values one step in ``-x``: ``(tau u)[i, j] = u[i+1, j]``, zero on ``i = N``."""
    if require_interior:
        _require_interior(u, "translate_x")
    out = np.zeros_like(u.values)
    out[:-1, :] = u.values[1:, :]
    return GridFunction(u.spec, out)


def difference_matrix(spec: GridSpec, axis: int, direction: str) -> sp.csr_matrix:
    """Sparse form of :func:`partial` acting on flat full-grid vectors."""
    idx = np.arange(spec.size).reshape(spec.shape)
    k = spec.inv_h
    if direction == "+":
        rows = idx[:-1, :] if axis == 0 else idx[:, :-1]
        nbr = idx[1:, :] if axis == 0 else idx[:, 1:]
        sign = 1.0
    elif direction == "-":
        rows = idx[1:, :] if axis == 0 else idx[:, 1:]
        nbr = idx[:-1, :] if axis == 0 else idx[:, :-1]
        sign = -1.0
    else:
        raise ValueError(f"direction must be '+' or '-', got {direction!r}")
    rows = rows.ravel()
    nbr = nbr.ravel()
    r = np.concatenate([rows, rows])
    c = np.concatenate([nbr, rows])
    v = np.concatenate([np.full(rows.size, sign * k), np.full(rows.size, -sign * k)])
    return sp.csr_matrix((v, (r, c)), shape=(spec.size, spec.size))
