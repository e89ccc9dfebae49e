import numpy as np
import pytest

from mageo.grid import make_grid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_grid():
    return make_grid(1, 8, 8, 9)


def trig_field(grid, rng, n_terms=4, amp=0.05):
    """Random trigonometric polynomial in (x, y) times a polynomial in t, with its analytic Hessian."""
    terms = []
    for _ in range(n_terms):
        kx, ky = rng.integers(-2, 3, size=2)
        terms.append((float(rng.normal() * amp), int(kx), int(ky), float(rng.uniform(0, 2 * np.pi)),
                      float(rng.normal())))

    def value(x, y, t):
        out = 0.0 * x + 0.0 * y + 0.0 * t
        for c, kx, ky, ph, s in terms:
            out = out + c * np.cos(2 * np.pi * (kx * x + ky * y) + ph) * (1 + s * t * t)
        return out

    def hessian(x, y, t):
        H = np.zeros((3, 3))
        for c, kx, ky, ph, s in terms:
            arg = 2 * np.pi * (kx * x + ky * y) + ph
            cs, sn = np.cos(arg), np.sin(arg)
            k = 2 * np.pi * np.array([kx, ky])
            g = 1 + s * t * t
            H[:2, :2] += -c * cs * g * np.outer(k, k)
            H[:2, 2] += -c * sn * k * 2 * s * t
            H[2, 2] += c * cs * 2 * s
        H[2, :2] = H[:2, 2]
        return H

    return value, hessian
