"""Independent reference solutions.

* the closed-form eps-solution for zero boundary data,
* manufactured solutions for the nondegenerate equation,
* the exact geodesic for data depending on x only, obtained by linearly
  interpolating Legendre duals of the convex profiles ``2 x^2 + phi(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, ConvexityError
from .grid import GridSpec, ScalarField, gradient_arrays, slot_arrays

TWO_PI = 2.0 * np.pi
E2 = np.exp(2.0)


# ---------------------------------------------------------------------------
# discrete Legendre transform


@dataclass
class ConvexProfile:
    x: np.ndarray
    values: np.ndarray

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.x)

    @property
    def margin(self) -> float:
        """Smallest divided second difference."""
        mid = 0.5 * (self.x[2:] - self.x[:-2])
        return float(np.min(np.diff(self.slopes) / mid))


def legendre_transform(profile: ConvexProfile, p=None, tol: float = 1e-9) -> ConvexProfile:
    """Discrete Legendre-Fenchel transform ``max_i (p x_i - f_i)``.

    For convex samples the maximizer for slope ``p`` is the vertex whose left
    and right chord slopes bracket ``p``; locating it for sorted ``p`` is a
    single merge against the nondecreasing chord slopes.  ``p`` defaults to
    a uniform grid over the chord-slope range with as many points as ``x``.
    """
    x, f = np.asarray(profile.x, float), np.asarray(profile.values, float)
    s = np.diff(f) / np.diff(x)
    ds = np.diff(s)
    if ds.size and ds.min() < -tol * max(1.0, np.abs(s).max()):
        raise ConvexityError(f"input is not convex (slope drop {ds.min():.3e})")
    s = np.maximum.accumulate(s)
    if p is None:
        p = np.linspace(s[0], s[-1], len(x))
    p = np.asarray(p, dtype=float)
    j = np.searchsorted(s, p, side="left")
    return ConvexProfile(p, p * x[j] - f[j])


def _periodic_callable(phi):
    """Turn periodic samples on ``j / N`` into their trigonometric interpolant."""
    if callable(phi):
        return phi
    s = np.asarray(phi, dtype=float).ravel()
    n = s.size
    c = np.fft.rfft(s) / n
    k = np.arange(c.size)
    w = np.full(c.size, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0

    def fn(x):
        x = np.asarray(x, dtype=float)
        phase = np.exp(1j * TWO_PI * np.multiply.outer(x, k))
        return np.real(phase @ (w * c))

    return fn


def convex_profile(phi, n_per_period: int = 16384) -> ConvexProfile:
    """Samples of ``2 x^2 + phi(x)`` on the three-period window [-1, 2]."""
    fn = _periodic_callable(phi)
    x = np.linspace(-1.0, 2.0, 3 * n_per_period + 1)
    return ConvexProfile(x, 2.0 * x * x + fn(np.mod(x, 1.0)))


def toric_geodesic_oracle(phi0, phi1, t, x_eval=None, n_per_period: int = 16384) -> np.ndarray:
    """Geodesic ``phi_t`` between two x-only potentials.

    ``phi0``/``phi1`` are vectorized periodic callables or periodic samples.
    Returns ``((1 - t) psi0* + t psi1*)* - 2 x^2`` at ``x_eval`` (default: 64
    points on [0, 1)).  ``t`` may be a scalar or a sequence; for a sequence the
    result has one row per ``t``.
    """
    if x_eval is None:
        x_eval = np.arange(64) / 64.0
    x_eval = np.asarray(x_eval, dtype=float)
    prof = [convex_profile(phi, n_per_period) for phi in (phi0, phi1)]
    for name, pr in zip(("phi0", "phi1"), prof):
        if pr.margin <= 0:
            raise ConvexityError(
                f"{name}: 2x^2 + phi is not strictly convex (margin {pr.margin:.3e}); "
                "equivalently 1 + phi''/4 <= 0 somewhere")
    s0, s1 = prof[0].slopes, prof[1].slopes
    p = np.linspace(max(s0[0], s1[0]), min(s0[-1], s1[-1]), 3 * n_per_period + 1)
    d0 = legendre_transform(prof[0], p).values
    d1 = legendre_transform(prof[1], p).values
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    rows = []
    for tt in ts:
        chi = ConvexProfile(p, (1.0 - tt) * d0 + tt * d1)
        rows.append(legendre_transform(chi, x_eval).values - 2.0 * x_eval ** 2)
    out = np.array(rows)
    return out[0] if np.ndim(t) == 0 else out


def oracle_field(grid: GridSpec, phi0, phi1, n_per_period: int = 16384) -> ScalarField:
    """The x-only oracle geodesic sampled on every node of ``grid``."""
    x = np.arange(grid.nx) * grid.hx
    rows = toric_geodesic_oracle(phi0, phi1, grid.t_nodes(), x, n_per_period)
    return ScalarField(grid, np.broadcast_to(rows[:, None, :], grid.shape).copy())


def slot_det_residual(psi: ScalarField) -> float:
    """Sup over interior nodes of the discrete slot determinant."""
    a, br, bi, c = slot_arrays(psi)
    return float(np.max(np.abs(a * c - br * br - bi * bi)))


# ---------------------------------------------------------------------------
# closed forms


def trivial_profile(t, eps: float):
    return eps * (np.exp(2.0 * t) - 1.0 - (E2 - 1.0) * t)


def trivial_eps_solution(grid: GridSpec, eps: float) -> ScalarField:
    """Exact solution for zero boundary data: ``eps (e^{2t} - 1 - (e^2 - 1) t)``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return ScalarField.from_function(grid, lambda x, y, t: trivial_profile(t, eps) + 0 * x + 0 * y)


@dataclass(frozen=True)
class ManufacturedSolution:
    """``psi = alpha t^2 + beta cos(2 pi x) sin(pi t)`` with its exact slot determinant."""

    alpha: float = 2.0
    beta: float = 0.1

    def value(self, x, y, t):
        return self.alpha * t * t + self.beta * np.cos(TWO_PI * x) * np.sin(np.pi * t) + 0 * y

    def slots(self, x, y, t):
        cs = np.cos(TWO_PI * x) * np.sin(np.pi * t)
        psi_xx = -TWO_PI ** 2 * self.beta * cs
        psi_tt = 2.0 * self.alpha - np.pi ** 2 * self.beta * cs
        psi_xt = -TWO_PI * np.pi * self.beta * np.sin(TWO_PI * x) * np.cos(np.pi * t)
        return 1.0 + psi_xx / 4.0, psi_xt / 4.0, psi_tt / 4.0 + 0 * y

    def density(self, x, y, t):
        a, b, c = self.slots(x, y, t)
        return a * c - b * b

    def field(self, grid: GridSpec) -> ScalarField:
        return ScalarField.from_function(grid, self.value)

    def start(self, grid: GridSpec, k: float = 0.5) -> ScalarField:
        """Perturbed admissible start: adding ``k t (t - 1)`` only raises the t-t slot."""
        return ScalarField.from_function(grid, lambda x, y, t: self.value(x, y, t) + k * t * (t - 1))


def manufactured_rhs(psi_true: ScalarField) -> np.ndarray:
    """Discrete slot determinant of ``psi_true`` at interior nodes."""
    a, br, bi, c = slot_arrays(psi_true)
    det = a * c - br * br - bi * bi
    if np.any(a <= 0) or np.any(det <= 0):
        k, j, i = np.unravel_index(np.argmin(np.minimum(a, det)), det.shape)
        raise AdmissibilityError(f"manufactured field is inadmissible at {(i, j, k + 1)}",
                                 node=(int(i), int(j), int(k) + 1))
    return det


# ---------------------------------------------------------------------------
# comparisons


@dataclass
class FieldComparison:
    sup: float
    l2: float
    c1: float
    slice_sup: np.ndarray   # per t-node
    slice_c1: np.ndarray


def compare_fields(f: ScalarField, g: ScalarField) -> FieldComparison:
    """Sup, L2 (cell-weighted) and gradient-sup distances, with per-slice breakdowns."""
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: {f.grid} vs {g.grid}")
    grid = f.grid
    diff = np.abs(f.values - g.values)
    gd = np.linalg.norm(gradient_arrays(f) - gradient_arrays(g), axis=-1)
    w = grid.hx * grid.hy * grid.ht
    return FieldComparison(
        sup=float(diff.max()),
        l2=float(np.sqrt(np.sum(diff ** 2) * w)),
        c1=float(gd.max()),
        slice_sup=diff.max(axis=(1, 2)),
        slice_c1=gd.max(axis=(1, 2)),
    )
