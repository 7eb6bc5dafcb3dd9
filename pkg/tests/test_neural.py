import numpy as np
import pytest

from crvpinn.grid_ops import GridFunction, GridSpec
from crvpinn.neural import (
    BoundaryTreatment,
    MlpConfig,
    MlpParams,
    apply_boundary,
    backward,
    bubble,
    forward,
    init_params,
    load_checkpoint,
    max_lift,
    save_checkpoint,
    transfinite_lift,
)


def pts(n, seed=0):
    return np.random.default_rng(seed).uniform(0, 1, (n, 2))


class TestParams:
    def test_size(self):
        cfg = MlpConfig(n_out=7, layers=2, width=16)
        assert init_params(cfg).size == (2 + 1) * 16 + (16 + 1) * 16 + (16 + 1) * 7

    def test_index_map_round_trip(self):
        p = init_params(MlpConfig(layers=3, width=5, seed=4))
        rebuilt = np.concatenate([np.concatenate([p.weights(k).ravel(), p.bias(k)]) for k in range(p.n_layers)])
        assert np.array_equal(rebuilt, p.flat)

    def test_deterministic(self):
        a = init_params(MlpConfig(seed=11))
        b = init_params(MlpConfig(seed=11))
        assert np.array_equal(a.flat, b.flat)

    def test_seeds_differ(self):
        assert not np.array_equal(init_params(MlpConfig(seed=0)).flat, init_params(MlpConfig(seed=1)).flat)

    def test_glorot_bounds_and_zero_bias(self):
        p = init_params(MlpConfig(layers=2, width=30, n_out=3))
        for k, (fi, fo) in enumerate(zip(p.config.sizes[:-1], p.config.sizes[1:])):
            assert np.abs(p.weights(k)).max() <= np.sqrt(6 / (fi + fo))
            assert not p.bias(k).any()

    def test_bad_config(self):
        with pytest.raises(ValueError):
            MlpConfig(layers=0)
        with pytest.raises(ValueError):
            MlpConfig(width=0)

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            MlpParams(MlpConfig(), np.zeros(3))


class TestForward:
    def test_zero_weights_give_final_bias(self):
        cfg = MlpConfig(n_out=2, layers=2, width=4)
        p = MlpParams(cfg)
        p.flat[p.slices[-1][2]] = [1.5, -2.0]
        out = forward(p, pts(7))
        assert np.array_equal(out, np.tile([1.5, -2.0], (7, 1)))

    def test_identity_wiring(self):
        # hidden tanh layer sees a tiny input, output undoes the scaling: ~ x1
        cfg = MlpConfig(n_out=1, layers=1, width=2)
        p = MlpParams(cfg)
        p.weights(0)[:] = [[1e-4, 0], [0, 1e-4]]
        p.weights(1)[:] = [[1e4], [0]]
        X = pts(5)
        assert np.allclose(forward(p, X)[:, 0], X[:, 0], atol=1e-7)

    def test_input_dim_checked(self):
        with pytest.raises(ValueError):
            forward(init_params(MlpConfig()), np.zeros((3, 3)))


def _fd_grad(p, X, cot, step=1e-5):
    g = np.zeros(p.size)
    for k in range(p.size):
        q = p.copy()
        q.flat[k] += step
        fp = np.sum(cot * forward(q, X))
        q.flat[k] -= 2 * step
        fm = np.sum(cot * forward(q, X))
        g[k] = (fp - fm) / (2 * step)
    return g


class TestBackward:
    def test_zero_cotangent(self):
        p = init_params(MlpConfig(width=8))
        assert not backward(p, pts(4), np.zeros((4, 1))).any()

    def test_single_point_fd(self):
        p = init_params(MlpConfig(width=6, seed=3))
        X = pts(1)
        g = backward(p, X, np.ones((1, 1)))
        ref = _fd_grad(p, X, np.ones((1, 1)))
        assert np.allclose(g, ref, rtol=1e-6, atol=1e-9)

    def test_random_configs_fd(self):
        rng = np.random.default_rng(0)
        for t in range(10):
            cfg = MlpConfig(n_out=int(rng.integers(1, 4)), layers=int(rng.integers(1, 3)), width=int(rng.integers(2, 17)), seed=t)
            p = init_params(cfg)
            p.flat[:] += 0.1 * rng.standard_normal(p.size)
            X = pts(6, t)
            cot = rng.standard_normal((6, cfg.n_out))
            g = backward(p, X, cot)
            ref = _fd_grad(p, X, cot)
            rel = np.abs(g - ref) / np.maximum(np.abs(ref), 1e-6)
            assert np.mean(rel <= 1e-5) >= 0.99

    def test_directional_derivative(self):
        p = init_params(MlpConfig(width=10, n_out=2, seed=7))
        X = pts(9)
        rng = np.random.default_rng(1)
        cot = rng.standard_normal((9, 2))
        d = rng.standard_normal(p.size)
        step = 1e-5
        qp, qm = p.copy(), p.copy()
        qp.flat[:] += step * d
        qm.flat[:] -= step * d
        fd = (np.sum(cot * forward(qp, X)) - np.sum(cot * forward(qm, X))) / (2 * step)
        assert backward(p, X, cot) @ d == pytest.approx(fd, rel=1e-6)

    def test_linearity(self):
        p = init_params(MlpConfig(width=12, n_out=3))
        X = pts(10)
        rng = np.random.default_rng(2)
        c1, c2 = rng.standard_normal((10, 3)), rng.standard_normal((10, 3))
        a = backward(p, X, c1 + c2)
        b = backward(p, X, c1) + backward(p, X, c2)
        assert np.allclose(a, b, rtol=1e-13, atol=1e-14)

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            backward(init_params(MlpConfig()), pts(3), np.zeros((3, 2)))

    def test_bitwise_reproducible(self):
        p = init_params(MlpConfig())
        X, cot = pts(50), np.ones((50, 1))
        assert np.array_equal(backward(p, X, cot), backward(p, X, cot))


class TestBoundary:
    def test_bubble(self):
        s = GridSpec(4)
        b = bubble(s)
        assert b.values[2, 2] == 1.0
        assert not b.values[s.boundary_mask()].any()
        assert np.all(b.values[s.interior_mask()] > 0)

    def test_zero_dirichlet(self):
        s = GridSpec(8)
        t = BoundaryTreatment({"u": bubble(s)}, {"u": GridFunction.zeros(s)})
        raw = {"u": GridFunction(s, np.random.default_rng(0).standard_normal(s.shape) * 1e3)}
        assert not apply_boundary(raw, t)["u"].values[s.boundary_mask()].any()

    def test_transfinite_reproduces_shift(self):
        s = GridSpec(16)
        x, y = s.coords()
        g = lambda a, b: np.where(a == 0, np.sin(np.pi * b), 0.0)  # noqa: E731
        lift = transfinite_lift(s, g)
        assert np.allclose(lift.values, (1 - x) * np.sin(np.pi * y), atol=1e-14)
        t = BoundaryTreatment({"u": bubble(s)}, {"u": lift})
        u = apply_boundary({"u": GridFunction(s, np.ones(s.shape))}, t)["u"]
        assert np.array_equal(u.values[0, :], g(x, y)[0, :])

    @pytest.mark.parametrize("maker", [transfinite_lift, max_lift])
    def test_lift_boundary_exact(self, maker):
        s = GridSpec(10)
        g = lambda a, b: np.exp(a) * np.cos(3 * b) + a * b  # noqa: E731
        x, y = s.coords()
        lift = maker(s, g)
        m = s.boundary_mask()
        assert np.abs(lift.values[m] - g(x, y)[m]).max() <= 1e-14

    def test_missing_field(self):
        s = GridSpec(3)
        t = BoundaryTreatment({"u": bubble(s)}, {"u": GridFunction.zeros(s)})
        with pytest.raises(KeyError):
            apply_boundary({}, t)


def test_checkpoint_round_trip(tmp_path):
    p = init_params(MlpConfig(n_out=7, width=9, seed=5))
    path = save_checkpoint(tmp_path / "c.bin", p, iteration=42)
    q, header = load_checkpoint(path)
    assert header["iteration"] == 42 and header["config"]["seed"] == 5
    assert np.array_equal(p.flat, q.flat)
    raw = path.read_bytes()
    assert raw.index(b"\n") + 1 + 8 * p.size == len(raw)
