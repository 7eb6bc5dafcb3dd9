import csv
import json
import math

import numpy as np
import pytest

from crvpinn.neural import MlpConfig, init_params
from crvpinn.problems import discretize
from crvpinn.sparse_linalg import Factorization
from crvpinn.stability import scalar_stability_constants
from crvpinn.trainer import (
    CSV_HEADER,
    MANIFEST_SCHEMA,
    AdamState,
    NumericalFailure,
    Pipeline,
    TrainConfig,
    adam_step,
    benchmark,
    direct_solve,
    run_training,
    train,
    write_manifest,
    write_records_csv,
)


def small(problem="laplace-sinsin", **kw):
    base = dict(problem=problem, N=8, layers=1, width=8, iterations=20, log_every=5)
    base.update(kw)
    return TrainConfig(**base)


class TestAdam:
    def test_zero_gradient_is_noop(self):
        p = np.arange(5.0)
        st = AdamState.zeros(5)
        for _ in range(3):
            adam_step(st, p, np.zeros(5), 1e-3)
        assert np.array_equal(p, np.arange(5.0))

    def test_first_step_moves_by_lr(self):
        p = np.zeros(4)
        adam_step(AdamState.zeros(4), p, np.ones(4), 1e-3)
        assert np.allclose(p, -1e-3, rtol=1e-6)

    def test_sign_invariant_magnitude(self):
        p = np.zeros(3)
        adam_step(AdamState.zeros(3), p, np.array([5.0, -0.01, 100.0]), 0.1)
        assert np.allclose(np.abs(p), 0.1, rtol=1e-5)

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            adam_step(AdamState.zeros(3), np.zeros(4), np.zeros(4), 1e-3)


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [dict(iterations=0), dict(lr=0.0), dict(loss="mse"), dict(log_every=0), dict(convention="x")],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            small(**kw)

    def test_unknown_problem(self):
        with pytest.raises(KeyError):
            small(problem="bogus")


class TestPipelineGradient:
    @pytest.mark.parametrize("problem", ["laplace-sinsin", "advection-diffusion", "poisson-vardiff", "stokes"])
    @pytest.mark.parametrize("loss", ["crvpinn", "pinn"])
    def test_full_gradient_fd(self, problem, loss):
        d = discretize(problem, 8)
        mlp = MlpConfig(n_out=len(d.problem.fields), layers=1, width=8, seed=2)
        pipe = Pipeline(d, mlp, loss)
        p = init_params(mlp)
        _, g = pipe.loss_and_grad(p)
        step = 1e-6
        fd = np.empty(p.size)
        for k in range(p.size):
            q = p.copy()
            q.flat[k] += step
            lp = pipe.evaluate(q, with_grad=False)[0]
            q.flat[k] -= 2 * step
            lm = pipe.evaluate(q, with_grad=False)[0]
            fd[k] = (lp - lm) / (2 * step)
        scale = np.abs(fd).max()
        assert np.abs(g - fd).max() <= 1e-5 * scale

    def test_boundary_values_exact(self):
        d = discretize("advection-diffusion", 8)
        mlp = MlpConfig(layers=1, width=4)
        pipe = Pipeline(d, mlp)
        u = pipe.fields_from_output(np.full((81, 1), 1e6))["u"]
        m = d.spec.boundary_mask()
        assert np.array_equal(u.values[m], d.treatment.lift["u"].values[m])


class TestTraining:
    def test_record_schedule(self):
        recs = train(small(iterations=12, log_every=5))
        assert [r.iteration for r in recs] == [1, 5, 10, 12]

    def test_single_iteration(self):
        recs = train(small(iterations=1))
        assert len(recs) == 1 and recs[0].elapsed_ms > 0

    def test_deterministic(self):
        a = run_training(small(seed=3))
        b = run_training(small(seed=3))
        assert np.array_equal(a.params.flat, b.params.flat)
        assert [r.loss for r in a.records] == [r.loss for r in b.records]

    def test_loss_decreases(self):
        recs = train(small(iterations=300, lr=1e-2, log_every=300))
        assert recs[-1].loss < 0.2 * recs[0].loss

    @pytest.mark.parametrize("problem", ["laplace-sinsin", "laplace-expsin", "poisson-vardiff", "poisson-jump"])
    def test_sqrt_loss_is_discrete_error(self, problem):
        for r in train(small(problem, iterations=30, log_every=3)):
            assert abs(r.sqrt_loss - r.err_discrete) <= 1e-9 * r.err_discrete
            assert r.lower_bound == pytest.approx(r.sqrt_loss) and r.upper_bound == pytest.approx(r.sqrt_loss)

    def test_stokes_bounds_contain_discrete_error(self):
        for r in train(small("stokes", N=12, iterations=60, lr=1e-2, log_every=4)):
            assert r.lower_bound <= r.err_discrete * (1 + 1e-9)
            assert r.err_discrete <= r.upper_bound * (1 + 1e-9)

    def test_advection_discrete_constants_bound_error(self):
        # the continuous 1/alpha can be exceeded at coarse N; the discrete
        # constants cannot
        res = run_training(small("advection-diffusion", N=12, iterations=60, lr=1e-2, log_every=4))
        a_h, m_h = scalar_stability_constants(res.discretization)
        for r in res.records:
            assert r.sqrt_loss / m_h <= r.err_discrete * (1 + 1e-9)
            assert r.err_discrete <= r.sqrt_loss / a_h * (1 + 1e-9)
            assert r.lower_bound <= r.err_discrete

    def test_pinn_has_no_bounds(self):
        recs = train(small(loss="pinn"))
        assert all(r.lower_bound is None and r.upper_bound is None for r in recs)

    def test_one_factorization_per_run(self):
        before = Factorization.count
        train(small(iterations=15))
        assert Factorization.count - before == 1

    def test_nan_raises_with_iteration(self, monkeypatch):
        calls = {"n": 0}
        orig = Pipeline.evaluate

        def broken(self, params, with_grad=True):
            loss, g, u = orig(self, params, with_grad)
            calls["n"] += 1
            return (math.nan if calls["n"] == 4 else loss), g, u

        monkeypatch.setattr(Pipeline, "evaluate", broken)
        with pytest.raises(NumericalFailure) as ei:
            train(small())
        assert ei.value.iteration == 4

    def test_callback_sees_every_record(self):
        seen = []
        res = run_training(small(), callback=seen.append)
        assert seen == res.records


class TestOutputs:
    def test_csv(self, tmp_path):
        recs = train(small(iterations=6, log_every=2))
        recs += train(small(iterations=2, loss="pinn"))
        path = write_records_csv(tmp_path / "r.csv", recs)
        raw = path.read_bytes()
        assert b"\r" not in raw
        rows = list(csv.reader(raw.decode().splitlines()))
        assert tuple(rows[0]) == CSV_HEADER
        assert len(rows) == 1 + len(recs)
        first = rows[1]
        assert float(first[1]) == recs[0].loss  # round-trips at 17 digits
        assert rows[-1][5] == "" and rows[-1][6] == ""

    def test_manifest(self, tmp_path):
        cfg = small(seed=9)
        data = json.loads(write_manifest(tmp_path / "m.json", cfg, {"extra": 1}).read_text())
        assert data["schema"] == MANIFEST_SCHEMA and data["seed"] == 9
        assert data["config"]["N"] == 8 and data["extra"] == 1


def test_direct_solve_fields():
    sol = direct_solve("stokes", 6)
    assert set(sol) == {"u1", "u2", "p", "s11", "s12", "s21", "s22"}


def test_benchmark_keys():
    out = benchmark("laplace-sinsin", 8, 3, layers=1, width=8)
    assert set(out) == {"pinn", "crvpinn", "ratio"}
    assert out["ratio"] == pytest.approx(out["crvpinn"] / out["pinn"])
