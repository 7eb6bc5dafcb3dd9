"""Independent finite-difference oracles for the manufactured solutions.

Fourth-order central stencils in double precision.  The step 2e-4 resolves
the tanh layer of the jump problem (width ~0.01) while keeping round-off
below 1e-8 of the forcing scale.
"""

import numpy as np

from crvpinn.problems import exact_solution, forcing

STEP = 2e-4


def random_interior_points(n, seed=0, margin=0.01):
    rng = np.random.default_rng(seed)
    return rng.uniform(margin, 1 - margin, n), rng.uniform(margin, 1 - margin, n)


def _shift(fn, x, y, axis, k, h):
    return fn(x + k * h, y) if axis == 0 else fn(x, y + k * h)


def fd_d1(fn, x, y, axis, h=STEP):
    f = lambda k: _shift(fn, x, y, axis, k, h)  # noqa: E731
    return (-f(2) + 8 * f(1) - 8 * f(-1) + f(-2)) / (12 * h)


def fd_d2(fn, x, y, axis, h=STEP):
    f = lambda k: _shift(fn, x, y, axis, k, h)  # noqa: E731
    return (-f(2) + 16 * f(1) - 30 * f(0) + 16 * f(-1) - f(-2)) / (12 * h * h)


def pde_residual_oracle(name, x, y):
    """Return (strong residual via FD minus analytic forcing, forcing scale)."""
    ex = lambda k: (lambda a, b: exact_solution(name, a, b)[k])  # noqa: E731
    f = forcing(name, x, y)
    if name == "stokes":
        out, scale = [], 0.0
        for i, k in enumerate(("u1", "u2")):
            lhs = -(fd_d2(ex(k), x, y, 0) + fd_d2(ex(k), x, y, 1)) + fd_d1(ex("p"), x, y, i)
            out.append(lhs - f[k])
            scale = max(scale, np.abs(f[k]).max())
        return np.concatenate(out), scale
    u = ex("u")
    lap = fd_d2(u, x, y, 0) + fd_d2(u, x, y, 1)
    if name.startswith("laplace"):
        lhs = -lap
    elif name == "poisson-jump":
        lhs = lap
    elif name == "advection-diffusion":
        lhs = fd_d1(u, x, y, 0) - 0.1 * lap
    elif name == "poisson-vardiff":
        eps = lambda a, b: 2 * (b + 1)  # noqa: E731
        fx = lambda a, b: eps(a, b) * fd_d1(u, a, b, 0)  # noqa: E731
        fy = lambda a, b: eps(a, b) * fd_d1(u, a, b, 1)  # noqa: E731
        lhs = fd_d1(fx, x, y, 0) + fd_d1(fy, x, y, 1)
    else:
        raise KeyError(name)
    # homogeneous problems: scale by the size of the individual terms
    scale = max(np.abs(f["u"]).max(), np.abs(lap).max())
    return lhs - f["u"], scale
