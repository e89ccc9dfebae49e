"""Eps-geodesic boundary-value problems between two Kähler potentials on the torus.

The unknown ``psi(x, y, t)`` lives on T^2 x [0, 1] with ``psi(., 0) = phi0`` and
``psi(., 1) = phi1`` and solves

    (pi^* omega + sqrt(-1) ddbar psi)^2 = eps * exp(2 t)   (slot determinant form)

which is the eps-regularized geodesic equation after absorbing the strip's
reference form into the unknown.  As eps -> 0 the slices ``psi(., t)`` tend to
the weak geodesic ``phi_t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import AdmissibilityError
from .grid import GridSpec, ScalarField, slot_arrays
from .solver import NewtonConfig, SolveReport, continuity_sweep, eps_density

TWO_PI = 2.0 * np.pi


def torus_laplacian(phi: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Periodic 5-point Laplacian of a ``(ny, nx)`` slice."""
    return ((np.roll(phi, -1, 1) - 2 * phi + np.roll(phi, 1, 1)) / grid.hx ** 2
            + (np.roll(phi, -1, 0) - 2 * phi + np.roll(phi, 1, 0)) / grid.hy ** 2)


@dataclass
class PotentialPair:
    grid: GridSpec
    phi0: np.ndarray
    phi1: np.ndarray
    m0: float = field(init=False)
    m1: float = field(init=False)

    def __post_init__(self):
        shape = (self.grid.ny, self.grid.nx)
        self.phi0 = np.array(self.phi0, dtype=np.float64).reshape(shape)
        self.phi1 = np.array(self.phi1, dtype=np.float64).reshape(shape)
        self.m0 = float(np.min(1.0 + torus_laplacian(self.phi0, self.grid) / 4.0))
        self.m1 = float(np.min(1.0 + torus_laplacian(self.phi1, self.grid) / 4.0))

    @property
    def admissible(self) -> bool:
        return self.m0 > 0 and self.m1 > 0

    def is_x_only(self, tol: float = 1e-12) -> bool:
        return all(np.max(np.abs(p - p[:1])) <= tol for p in (self.phi0, self.phi1))


def pair_from_functions(grid: GridSpec, f0: Callable, f1: Callable) -> PotentialPair:
    """Sample ``f(x, y)`` on the torus nodes for both endpoints."""
    x, y, _ = grid.coords()
    x, y = x[0], y[0]
    shape = (grid.ny, grid.nx)
    return PotentialPair(grid, np.broadcast_to(f0(x, y), shape), np.broadcast_to(f1(x, y), shape))


# amplitude 0.05 keeps 1 + phi_xx/4 >= 1 - 0.05 pi^2 ~ 0.51
XONLY_AMPLITUDE = 0.05


def builtin_pair(name: str, grid: GridSpec, **params) -> PotentialPair:
    """Built-in boundary data sets.

    ``trivial``         phi0 = phi1 = 0
    ``constant-shift``  phi0 = 0, phi1 = c            (param ``shift``, default 0.5)
    ``xonly-cos``       phi0 = 0, phi1 = A cos(2 pi x) (param ``amplitude``)
    ``generic-2d``      genuinely two-dimensional smooth pair
    """
    zero = lambda x, y: 0.0 * x + 0.0 * y
    if name == "trivial":
        return pair_from_functions(grid, zero, zero)
    if name == "constant-shift":
        c = float(params.get("shift", 0.5))
        return pair_from_functions(grid, zero, lambda x, y: c + 0.0 * (x + y))
    if name == "xonly-cos":
        amp = float(params.get("amplitude", XONLY_AMPLITUDE))
        return pair_from_functions(grid, zero, lambda x, y: amp * np.cos(TWO_PI * x) + 0.0 * y)
    if name == "generic-2d":
        return pair_from_functions(
            grid,
            lambda x, y: 0.03 * np.cos(TWO_PI * x) * np.cos(TWO_PI * y),
            lambda x, y: 0.03 * np.sin(TWO_PI * (x + y)) + 0.01 * np.cos(TWO_PI * x),
        )
    raise KeyError(f"unknown builtin data set {name!r}")


BUILTINS = ("trivial", "constant-shift", "xonly-cos", "generic-2d")


def default_schedule(eps_start: float = 1e-1, eps_end: float = 1e-4,
                     ratio: float = 10 ** -0.5) -> list[float]:
    """Geometric schedule from ``eps_start`` down to ``eps_end`` inclusive."""
    if not (0 < eps_end <= eps_start <= 1) or not 0 < ratio < 1:
        raise ValueError("need 0 < eps_end <= eps_start <= 1 and 0 < ratio < 1")
    n = int(np.floor(np.log(eps_end / eps_start) / np.log(ratio) + 1e-9))
    return [eps_start * ratio ** i for i in range(n + 1)]


@dataclass
class EpsProblem:
    pair: PotentialPair
    grid: GridSpec
    schedule: list
    k_init: float
    k_min: float

    def rhs(self, eps: float):
        return eps_density(eps)

    def linear_part(self) -> ScalarField:
        t = self.grid.t_nodes()[:, None, None]
        return ScalarField(self.grid, (1.0 - t) * self.pair.phi0 + t * self.pair.phi1)

    @property
    def initial_guess(self) -> ScalarField:
        """``(1 - t) phi0 + t phi1 + k t (t - 1)`` with exact Dirichlet layers."""
        t = self.grid.t_nodes()[:, None, None]
        vals = self.linear_part().values + self.k_init * t * (t - 1.0)
        vals[0] = self.pair.phi0
        vals[-1] = self.pair.phi1
        return ScalarField(self.grid, vals)


def build_problem(pair: PotentialPair, grid: GridSpec, schedule: Sequence[float]) -> EpsProblem:
    """Set up the eps-geodesic problem and a strictly admissible initial guess.

    The convexification constant is found by scanning every interior node for
    the smallest ``k`` that makes the slot determinant of the initial guess at
    least ``eps_first * exp(2 t) / 2``.
    """
    if pair.grid != grid:
        raise ValueError("potential pair was sampled on a different grid")
    if not pair.admissible:
        which = "phi0" if pair.m0 <= 0 else "phi1"
        raise AdmissibilityError(
            f"{which} is not a Kähler potential (margins m0={pair.m0:.3g}, m1={pair.m1:.3g})")
    schedule = [float(e) for e in schedule]
    if not schedule or any(not 0 < e <= 1 for e in schedule) or any(
            b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly decreasing inside (0, 1]")
    problem = EpsProblem(pair, grid, schedule, k_init=0.0, k_min=0.0)
    a, br, bi, _ = slot_arrays(problem.linear_part())
    t = grid.t_nodes()[1:-1, None, None]
    target = schedule[0] * np.exp(2.0 * t) / 2.0
    # slot c of k t (t - 1) is k / 2, so det >= target iff k >= 2 (target + |b|^2) / a
    need = 2.0 * (target + br * br + bi * bi) / a
    flat = int(np.argmax(need))
    k_min = float(need.ravel()[flat])
    if not np.isfinite(k_min) or k_min <= 0:
        k, j, i = np.unravel_index(flat, need.shape)
        raise AdmissibilityError(f"no admissible k (worst node {(i, j, k + 1)})",
                                 node=(int(i), int(j), int(k) + 1))
    problem.k_min = k_min
    problem.k_init = k_min * (1.0 + 1e-9)
    return problem


def solve_geodesic(problem: EpsProblem, cfg: NewtonConfig | None = None,
                   on_solution: Callable | None = None):
    """Run the eps continuation; ``on_solution(eps, psi, report)`` is called per eps."""
    cfg = cfg or NewtonConfig()
    results = continuity_sweep(problem, cfg)
    for eps, psi, report in results:
        assert np.array_equal(psi.values[0], problem.pair.phi0)
        assert np.array_equal(psi.values[-1], problem.pair.phi1)
        if on_solution is not None:
            on_solution(eps, psi, report)
    return results


@dataclass
class GeodesicPath:
    t: np.ndarray          # (nt,)
    slices: np.ndarray     # (nt, ny, nx); slices[k] = phi_{t_k}
    velocity: np.ndarray   # (nt, ny, nx)
    grid: GridSpec


def extract_path(psi: ScalarField) -> GeodesicPath:
    """Slices ``phi_t = psi(., t)`` at the grid t-nodes and their t-derivatives.

    Centered differences at interior nodes, second-order one-sided at t = 0, 1.
    """
    g = psi.grid
    v = psi.values
    vel = np.empty_like(v)
    vel[1:-1] = (v[2:] - v[:-2]) / (2 * g.ht)
    vel[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * g.ht)
    vel[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * g.ht)
    return GeodesicPath(g.t_nodes(), v.copy(), vel, g)


def geodesic_speed(path: GeodesicPath) -> np.ndarray:
    """Discrete ``int phi_dot^2 (1 + lap(phi_t)/4) dx dy`` at each interior t-node."""
    g = path.grid
    out = np.empty(g.nt - 2)
    for k in range(1, g.nt - 1):
        vol = 1.0 + torus_laplacian(path.slices[k], g) / 4.0
        out[k - 1] = np.sum(path.velocity[k] ** 2 * vol) * g.hx * g.hy
    return out


def speed_variation(speed: np.ndarray) -> float:
    """``(max - min) / mean`` of the speed profile."""
    mean = float(np.mean(speed))
    if mean <= 0:
        return float("inf")
    return float((speed.max() - speed.min()) / mean)


__all__ = [
    "PotentialPair", "EpsProblem", "GeodesicPath", "SolveReport", "build_problem",
    "builtin_pair", "default_schedule", "extract_path", "geodesic_speed", "solve_geodesic",
    "speed_variation", "pair_from_functions",
]
