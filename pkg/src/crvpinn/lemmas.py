"""Randomized checks of the discrete calculus identities on interior functions.

Each check draws ``trials`` random pairs per grid size from
``default_rng([seed, N, trial])``; a failure reports that triple so the
offending pair can be regenerated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_ops import GridFunction, GridSpec, inner_h, norm_grad_h, norm_h, partial

__all__ = [
    "LemmaResult",
    "check_integration_by_parts",
    "check_product_rule",
    "check_norm_equivalence",
    "run_all",
    "DEFAULT_SIZES",
]

DEFAULT_SIZES = (4, 16, 64)
IDENTITY_RTOL = 1e-12


@dataclass(frozen=True)
class LemmaResult:
    lemma: str
    N: int
    trials: int
    passed: bool
    worst: float
    witness: tuple | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        msg = f"{status} {self.lemma:<24} N={self.N:<4} trials={self.trials:<4} worst={self.worst:.3e}"
        if self.witness is not None:
            msg += f" witness(seed, N, trial)={self.witness}"
        return msg


def _rng(seed: int, N: int, t: int) -> np.random.Generator:
    return np.random.default_rng([seed, N, t])


def _dminus(u: GridFunction, axis: int, inject_bug: bool) -> GridFunction:
    d = partial(u, axis, "-")
    # negative control: a backward difference with the wrong sign
    return -d if inject_bug else d


def check_integration_by_parts(N: int, trials: int = 100, seed: int = 0, inject_bug: bool = False) -> LemmaResult:
    """``(d_+ u, v)_h + (u, d_- v)_h = 0`` along both axes."""
    spec = GridSpec(N)
    worst, witness = 0.0, None
    for t in range(trials):
        rng = _rng(seed, N, t)
        u = GridFunction.random_interior(spec, rng)
        v = GridFunction.random_interior(spec, rng)
        for axis in (0, 1):
            a = inner_h(partial(u, axis, "+"), v)
            b = inner_h(u, _dminus(v, axis, inject_bug))
            scale = norm_h(partial(u, axis, "+")) * norm_h(v) + norm_h(u) * norm_h(partial(v, axis, "-"))
            err = abs(a + b) / scale
            if err > worst:
                worst = err
                if err > IDENTITY_RTOL:
                    witness = witness or (seed, N, t)
    return LemmaResult("integration-by-parts", N, trials, worst <= IDENTITY_RTOL, worst, witness)


def check_product_rule(N: int, trials: int = 100, seed: int = 0) -> LemmaResult:
    """``d_+(uv)[i] = u[i+1] d_+ v[i] + d_+ u[i] v[i]`` pointwise, both axes."""
    spec = GridSpec(N)
    worst, witness = 0.0, None
    for t in range(trials):
        rng = _rng(seed, N, t)
        u = GridFunction.random_interior(spec, rng)
        v = GridFunction.random_interior(spec, rng)
        for axis in (0, 1):
            lhs = partial(u * v, axis, "+").values
            shifted = np.zeros(spec.shape)
            if axis == 0:
                shifted[:-1, :] = u.values[1:, :]
            else:
                shifted[:, :-1] = u.values[:, 1:]
            rhs = shifted * partial(v, axis, "+").values + partial(u, axis, "+").values * v.values
            scale = np.max(np.abs(shifted * partial(v, axis, "+").values)) + np.max(
                np.abs(partial(u, axis, "+").values * v.values)
            )
            err = float(np.max(np.abs(lhs - rhs)) / scale)
            if err > worst:
                worst = err
                if err > IDENTITY_RTOL:
                    witness = witness or (seed, N, t)
    return LemmaResult("product-rule", N, trials, worst <= IDENTITY_RTOL, worst, witness)


def check_norm_equivalence(N: int, trials: int = 100, seed: int = 0) -> LemmaResult:
    """``(h / 2 sqrt 2) |u|_grad <= |u|_h <= 2 |u|_grad``.

    ``worst`` is the largest violation ratio observed; below 1 means pass.
    """
    spec = GridSpec(N)
    c = spec.h / (2.0 * np.sqrt(2.0))
    worst, witness = 0.0, None
    ok = True
    for t in range(trials):
        rng = _rng(seed, N, t)
        u = GridFunction.random_interior(spec, rng)
        g, n = norm_grad_h(u), norm_h(u)
        ratio = max(c * g / n, n / (2.0 * g))
        worst = max(worst, ratio)
        if ratio > 1.0 and ok:
            ok = False
            witness = (seed, N, t)
    return LemmaResult("norm-equivalence", N, trials, ok, worst, witness)


def run_all(sizes=DEFAULT_SIZES, trials: int = 100, seed: int = 0, inject_bug: bool = False) -> list[LemmaResult]:
    out = []
    for N in sizes:
        out.append(check_integration_by_parts(N, trials, seed, inject_bug))
        out.append(check_product_rule(N, trials, seed))
        out.append(check_norm_equivalence(N, trials, seed))
    return out
