"""Tanh multilayer perceptron with hand-written reverse mode, and strong
imposition of Dirichlet data on its outputs.

The network only supplies point values on the grid.  Spatial derivatives of
the approximation are always the discrete difference operators.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .grid_ops import GridFunction, GridSpec

__all__ = [
    "MlpConfig",
    "MlpParams",
    "init_params",
    "forward",
    "backward",
    "BoundaryTreatment",
    "bubble",
    "transfinite_lift",
    "max_lift",
    "apply_boundary",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass(frozen=True)
class MlpConfig:
    """Architecture of the network; ``layers`` counts hidden layers."""

    n_in: int = 2
    n_out: int = 1
    layers: int = 2
    width: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1 or self.width < 1:
            raise ValueError("need at least one hidden layer of width >= 1")
        if self.n_in < 1 or self.n_out < 1:
            raise ValueError("input and output dimensions must be positive")

    @property
    def sizes(self) -> list[int]:
        return [self.n_in] + [self.width] * self.layers + [self.n_out]


class MlpParams:
    """Flat parameter vector with views onto per-layer weights and biases.

    Weights are stored ``(fan_in, fan_out)`` so that a layer is ``a @ W + b``.
    """

    def __init__(self, config: MlpConfig, flat=None):
        self.config = config
        self.slices = []
        off = 0
        for fi, fo in zip(config.sizes[:-1], config.sizes[1:]):
            w = slice(off, off + fi * fo)
            off += fi * fo
            b = slice(off, off + fo)
            off += fo
            self.slices.append((w, (fi, fo), b))
        self.size = off
        if flat is None:
            flat = np.zeros(off)
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (off,):
            raise ValueError(f"expected {off} parameters, got shape {flat.shape}")
        self.flat = flat

    def weights(self, k: int) -> np.ndarray:
        w, shape, _ = self.slices[k]
        return self.flat[w].reshape(shape)

    def bias(self, k: int) -> np.ndarray:
        return self.flat[self.slices[k][2]]

    @property
    def n_layers(self) -> int:
        return len(self.slices)

    def copy(self) -> "MlpParams":
        return MlpParams(self.config, self.flat.copy())


def init_params(config: MlpConfig) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(config.seed)
    p = MlpParams(config)
    for w, (fi, fo), _ in p.slices:
        bound = np.sqrt(6.0 / (fi + fo))
        p.flat[w] = rng.uniform(-bound, bound, size=fi * fo)
    return p


def _points(points) -> np.ndarray:
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("points must be an (n, n_in) array")
    return X


def forward(params: MlpParams, points, return_cache: bool = False):
    """Network outputs, shape ``(n_points, n_out)``; no activation on the last layer."""
    X = _points(points)
    if X.shape[1] != params.config.n_in:
        raise ValueError(f"points have {X.shape[1]} coordinates, network expects {params.config.n_in}")
    acts = [X]
    a = X
    last = params.n_layers - 1
    for k in range(params.n_layers):
        z = a @ params.weights(k) + params.bias(k)
        a = z if k == last else np.tanh(z)
        acts.append(a)
    return (a, acts) if return_cache else a


def backward(params: MlpParams, points, cotangent, cache=None) -> np.ndarray:
    """Gradient of ``sum(cotangent * forward(params, points))`` w.r.t. ``params.flat``."""
    if cache is None:
        _, cache = forward(params, points, return_cache=True)
    n = cache[0].shape[0]
    g = np.asarray(cotangent, dtype=np.float64)
    if g.ndim == 1 and params.config.n_out == 1:
        g = g[:, None]
    if g.shape != (n, params.config.n_out):
        raise ValueError(f"cotangent shape {g.shape} does not match outputs {(n, params.config.n_out)}")
    grad = np.zeros(params.size)
    for k in range(params.n_layers - 1, -1, -1):
        w, _, b = params.slices[k]
        a_in = cache[k]
        grad[w] = (a_in.T @ g).reshape(-1)
        grad[b] = g.sum(axis=0)
        if k:
            g = (g @ params.weights(k).T) * (1.0 - cache[k] ** 2)
    return grad


@dataclass
class BoundaryTreatment:
    """Per-field ``u = raw * cutoff + lift``.

    ``cutoff`` vanishes wherever the field is prescribed, ``lift`` carries
    the prescribed values there.
    """

    cutoff: dict
    lift: dict

    def fields(self) -> tuple:
        return tuple(self.cutoff)


def bubble(spec: GridSpec) -> GridFunction:
    """``16 x (1-x) y (1-y)``: zero on the boundary, one at the centre."""
    return GridFunction.sample(spec, lambda x, y: 16.0 * x * (1 - x) * y * (1 - y))


def _pin_boundary(spec: GridSpec, values: np.ndarray, g: Callable) -> GridFunction:
    x, y = spec.coords()
    bnd = spec.boundary_mask()
    out = np.array(values, dtype=float)
    out[bnd] = np.broadcast_to(g(x, y), spec.shape)[bnd]
    return GridFunction(spec, out)


def transfinite_lift(spec: GridSpec, g: Callable) -> GridFunction:
    """Coons-patch blend of the four edge traces of ``g`` with corner correction."""
    x, y = spec.coords()
    z0, z1 = np.zeros_like(x), np.ones_like(x)

    def G(a, b):
        return np.broadcast_to(g(a, b), x.shape)

    lift = (
        (1 - x) * G(z0, y) + x * G(z1, y) + (1 - y) * G(x, z0) + y * G(x, z1)
        - (1 - x) * (1 - y) * G(z0, z0) - x * (1 - y) * G(z1, z0)
        - (1 - x) * y * G(z0, z1) - x * y * G(z1, z1)
    )
    return _pin_boundary(spec, lift, g)


def max_lift(spec: GridSpec, g: Callable) -> GridFunction:
    """``max(1-x, x, 1-y, y) * g``, equal to ``g`` on the boundary."""
    x, y = spec.coords()
    w = np.maximum.reduce([1 - x, x, 1 - y, y])
    return _pin_boundary(spec, w * g(x, y), g)


def apply_boundary(raw: Mapping[str, GridFunction], treatment: BoundaryTreatment) -> dict:
    out = {}
    for name, cut in treatment.cutoff.items():
        if name not in raw:
            raise KeyError(f"missing raw field {name!r}")
        out[name] = raw[name] * cut + treatment.lift[name]
    return out


def save_checkpoint(path, params: MlpParams, iteration: int = 0, extra: dict | None = None) -> Path:
    """One JSON header line followed by little-endian float64 parameters."""
    header = {"config": asdict(params.config), "iteration": int(iteration), "size": params.size}
    if extra:
        header.update(extra)
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(params.flat.astype("<f8").tobytes())
    return path


def load_checkpoint(path) -> tuple[MlpParams, dict]:
    with Path(path).open("rb") as fh:
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    cfg = MlpConfig(**header["config"])
    return MlpParams(cfg, data), header
