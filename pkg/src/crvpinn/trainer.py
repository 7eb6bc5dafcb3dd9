"""Full-batch Adam training of the network against the robust or plain loss."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .gram import Convention
from .grid_ops import GridFunction
from .loss import error_bounds, loss_gradient_cotangent, pinn_loss, robust_loss
from .neural import MlpConfig, MlpParams, backward, forward, init_params
from .problems import Discretization, discretize, get_problem

__all__ = [
    "TrainConfig",
    "AdamState",
    "adam_step",
    "TrainingRecord",
    "TrainResult",
    "NumericalFailure",
    "Pipeline",
    "train",
    "run_training",
    "direct_solve",
    "write_records_csv",
    "write_manifest",
    "benchmark",
    "CSV_HEADER",
    "MANIFEST_SCHEMA",
]

CSV_HEADER = ("iter", "loss", "sqrt_loss", "err_discrete", "err_analytic", "lower_bound", "upper_bound", "elapsed_ms")
MANIFEST_SCHEMA = "crvpinn.run/1"


class NumericalFailure(ArithmeticError):
    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message if iteration is None else f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True)
class TrainConfig:
    problem: str = "laplace-sinsin"
    N: int = 32
    layers: int = 2
    width: int = 50
    lr: float = 1e-3
    iterations: int = 5000
    seed: int = 0
    loss: str = "crvpinn"
    log_every: int = 1
    convention: str = Convention.UNWEIGHTED.value
    lift: str = "transfinite"
    out_dir: str | None = None

    def __post_init__(self):
        get_problem(self.problem)
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.loss not in ("crvpinn", "pinn"):
            raise ValueError(f"loss must be 'crvpinn' or 'pinn', got {self.loss!r}")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        Convention(self.convention)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n))


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if grad.shape != params.shape or state.m.shape != params.shape:
        raise ValueError("parameter, gradient and moment shapes differ")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1 - b1) * grad
    state.v *= b2
    state.v += (1 - b2) * grad * grad
    mhat = state.m / (1 - b1 ** state.step)
    vhat = state.v / (1 - b2 ** state.step)
    params -= lr * mhat / (np.sqrt(vhat) + state.eps)
    return params


@dataclass(frozen=True)
class TrainingRecord:
    iteration: int
    loss: float
    sqrt_loss: float
    err_discrete: float
    err_analytic: float
    lower_bound: float | None
    upper_bound: float | None
    elapsed_ms: float


@dataclass
class TrainResult:
    records: list
    params: MlpParams
    discretization: Discretization
    config: TrainConfig


class Pipeline:
    """Network -> boundary treatment -> residual -> loss, with its adjoint."""

    def __init__(self, disc: Discretization, mlp: MlpConfig, loss: str = "crvpinn"):
        self.disc = disc
        self.mlp = mlp
        self.loss_kind = loss
        x, y = disc.spec.coords()
        self.points = np.column_stack([x.ravel(), y.ravel()])
        self.fields = disc.problem.fields
        self.cutoff = np.column_stack([disc.treatment.cutoff[k].flat for k in self.fields])
        self.lift = np.column_stack([disc.treatment.lift[k].flat for k in self.fields])
        self.op = disc.operator
        self.op_t = disc.operator.T.tocsr()

    def prepare(self):
        # the one factorization of the run
        return self.disc.gram.factorization

    def fields_from_output(self, out: np.ndarray) -> dict:
        vals = out * self.cutoff + self.lift
        return {k: GridFunction(self.disc.spec, vals[:, i]) for i, k in enumerate(self.fields)}

    def evaluate(self, params: MlpParams, with_grad: bool = True):
        out, cache = forward(params, self.points, return_cache=True)
        u = out * self.cutoff + self.lift
        res = self.op @ u.reshape(-1, order="F") + self.disc.offset
        if self.loss_kind == "crvpinn":
            ev = robust_loss(res, self.disc.gram)
            loss = ev.loss
            cot_res = loss_gradient_cotangent(ev) if with_grad else None
        else:
            loss = pinn_loss(res)
            cot_res = 2.0 * res / res.size if with_grad else None
        grad = None
        if with_grad:
            cot_u = (self.op_t @ cot_res).reshape(u.shape, order="F")
            grad = backward(params, self.points, cot_u * self.cutoff, cache)
        return loss, grad, u

    def loss_and_grad(self, params: MlpParams):
        loss, grad, _ = self.evaluate(params)
        return loss, grad


def _fields_dict(disc: Discretization, u: np.ndarray) -> dict:
    return {k: GridFunction(disc.spec, u[:, i]) for i, k in enumerate(disc.problem.fields)}


def run_training(config: TrainConfig, callback=None) -> TrainResult:
    problem = get_problem(config.problem)
    disc = discretize(problem, config.N, Convention(config.convention), config.lift)
    mlp = MlpConfig(n_out=len(problem.fields), layers=config.layers, width=config.width, seed=config.seed)
    params = init_params(mlp)
    pipe = Pipeline(disc, mlp, config.loss)
    start = time.perf_counter()
    try:
        pipe.prepare()
    except ArithmeticError as exc:
        raise NumericalFailure(f"Gram factorization failed: {exc}", 0) from exc
    u_star = disc.discrete_solution
    exact = disc.exact_fields()
    ref_star = disc.trial_vector(u_star)
    ref_exact = disc.trial_vector(exact)
    state = AdamState.zeros(params.size)
    records = []
    for it in range(1, config.iterations + 1):
        loss, grad, u = pipe.evaluate(params)
        if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
            raise NumericalFailure(f"non-finite loss {loss}", it)
        if it == 1 or it % config.log_every == 0 or it == config.iterations:
            fields = _fields_dict(disc, u)
            vec = disc.trial_vector(fields)
            if config.loss == "crvpinn":
                lo, hi = error_bounds(loss, problem.mu, problem.alpha)
            else:
                lo = hi = None
            rec = TrainingRecord(
                it, loss, math.sqrt(loss),
                disc.norm(vec - ref_star), disc.norm(vec - ref_exact),
                lo, hi, (time.perf_counter() - start) * 1e3,
            )
            records.append(rec)
            if callback is not None:
                callback(rec)
        adam_step(state, params.flat, grad, config.lr)
    return TrainResult(records, params, disc, config)


def train(config: TrainConfig) -> list:
    return run_training(config).records


def direct_solve(problem, N: int, convention: Convention = Convention.UNWEIGHTED) -> dict:
    return discretize(problem, N, convention).direct_solve()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_records_csv(path, records) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([_fmt(getattr(r, f)) for f in (
                "iteration", "loss", "sqrt_loss", "err_discrete", "err_analytic",
                "lower_bound", "upper_bound", "elapsed_ms",
            )])
    return path


def write_manifest(path, config: TrainConfig, extra: dict | None = None) -> Path:
    data = {
        "schema": MANIFEST_SCHEMA,
        "library_version": __version__,
        "seed": config.seed,
        "config": asdict(config),
    }
    if extra:
        data.update(extra)
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def benchmark(problem: str, N: int, iters: int, layers: int = 2, width: int = 100, seed: int = 0, lr: float = 1e-3) -> dict:
    """Mean per-iteration wall time (ms) of plain vs robust loss training steps.

    The Gram factorization happens before timing starts.
    """
    disc = discretize(problem, N)
    mlp = MlpConfig(n_out=len(disc.problem.fields), layers=layers, width=width, seed=seed)
    out = {}
    for kind in ("pinn", "crvpinn"):
        pipe = Pipeline(disc, mlp, kind)
        pipe.prepare()
        params = init_params(mlp)
        state = AdamState.zeros(params.size)
        pipe.loss_and_grad(params)  # warm-up
        times = []
        for _ in range(iters):
            t0 = time.perf_counter()
            _, g = pipe.loss_and_grad(params)
            adam_step(state, params.flat, g, lr)
            times.append(time.perf_counter() - t0)
        out[kind] = 1e3 * float(np.mean(times))
    out["ratio"] = out["crvpinn"] / out["pinn"]
    return out
