"""Grids, scalar fields and finite-difference stencils on T^2 x [0, 1].

Coordinates are (x, y) on the unit torus and ``t`` (the log-radius on the
strip) in [0, 1].  Field values are stored as arrays of shape ``(nt, ny, nx)``
so that a C-order flattening runs x fastest, then y, then t.  A node is the
index triple ``(i, j, k)`` = (x index, y index, t index).

The reference Kähler form on the torus is ``sqrt(-1) dz ^ dzbar`` with local
potential ``|z|^2``, so ``d_z d_zbar = (d_xx + d_yy) / 4`` and the torus slot of
the complex Hessian is ``1 + lap(f) / 4``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridError, StencilError

AXES = {"x": 2, "y": 1, "t": 0}


@dataclass(frozen=True)
class GridSpec:
    m: int
    nx: int
    ny: int
    nt: int

    @property
    def hx(self) -> float:
        return 1.0 / self.nx

    @property
    def hy(self) -> float:
        return 1.0 / self.ny

    @property
    def ht(self) -> float:
        return 1.0 / (self.nt - 1)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nt, self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nt * self.ny * self.nx

    @property
    def n_interior(self) -> int:
        return (self.nt - 2) * self.ny * self.nx

    def spacing(self, axis: str) -> float:
        return {"x": self.hx, "y": self.hy, "t": self.ht}[axis]

    def coords(self):
        """Return broadcastable coordinate arrays ``(x, y, t)``."""
        x = np.arange(self.nx) * self.hx
        y = np.arange(self.ny) * self.hy
        t = np.arange(self.nt) * self.ht
        return x[None, None, :], y[None, :, None], t[:, None, None]

    def t_nodes(self) -> np.ndarray:
        return np.arange(self.nt) * self.ht


def make_grid(m: int, nx: int, ny: int, nt: int) -> GridSpec:
    """Validate grid parameters and return a :class:`GridSpec`."""
    if m != 1:
        raise GridError("m", f"unsupported complex dimension {m} (only m=1)")
    for name, n in (("nx", nx), ("ny", ny)):
        if not isinstance(n, (int, np.integer)):
            raise GridError(name, f"must be an integer, got {n!r}")
        if n % 2:
            raise GridError(name, f"must be even, got {n} (odd)")
        if n < 8:
            raise GridError(name, f"must be >= 8, got {n}")
    if not isinstance(nt, (int, np.integer)) or nt < 9:
        raise GridError("nt", f"must be an integer >= 9, got {nt!r}")
    return GridSpec(int(m), int(nx), int(ny), int(nt))


@dataclass
class ScalarField:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise GridError("values", f"shape {values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        self.values = values

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "ScalarField":
        """Sample ``fn(x, y, t)`` (vectorized) at every node."""
        x, y, t = grid.coords()
        return cls(grid, np.broadcast_to(fn(x, y, t), grid.shape).copy())

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def __eq__(self, other):
        if not isinstance(other, ScalarField):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]

    def with_boundary(self, phi0: np.ndarray, phi1: np.ndarray) -> "ScalarField":
        """Copy of the field with the t=0 and t=1 layers replaced."""
        out = self.values.copy()
        out[0] = phi0
        out[-1] = phi1
        return ScalarField(self.grid, out)


@dataclass(frozen=True)
class HermitianSlot:
    """Complex Hessian ``[[a, b], [conj(b), c]]`` relative to the flat reference."""

    a: float
    b: complex
    c: float

    @property
    def det(self) -> float:
        return self.a * self.c - abs(self.b) ** 2

    @property
    def trace(self) -> float:
        return self.a + self.c

    @property
    def admissible(self) -> bool:
        return self.a > 0 and self.det > 0

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [np.conj(self.b), self.c]], dtype=complex)


# ---------------------------------------------------------------------------
# per-node stencils


def _check_node(grid: GridSpec, node, need_interior: bool):
    i, j, k = node
    if not (0 <= k < grid.nt):
        raise StencilError(f"t index {k} outside [0, {grid.nt - 1}]")
    if need_interior and not (1 <= k <= grid.nt - 2):
        raise StencilError(f"t index {k} is a Dirichlet layer; stencil needs an interior node")
    return i % grid.nx, j % grid.ny, k


def _at(f: ScalarField, i, j, k) -> float:
    g = f.grid
    return f.values[k, j % g.ny, i % g.nx]


def _shift(axis: str, s: int):
    return {"x": (s, 0, 0), "y": (0, s, 0), "t": (0, 0, s)}[axis]


def second_diff(f: ScalarField, node, pair: str) -> float:
    """Centered second difference of ``f`` at ``node``.

    ``pair`` is a two-letter string over ``x``, ``y``, ``t`` such as ``"xx"``
    or ``"xt"``.  Pure directions use the 3-point stencil, mixed ones the
    4-point cross stencil.  x and y wrap periodically.
    """
    if len(pair) != 2 or any(p not in AXES for p in pair):
        raise ValueError(f"bad direction pair {pair!r}")
    g = f.grid
    i, j, k = _check_node(g, node, need_interior="t" in pair)
    p, q = pair
    if p == q:
        di, dj, dk = _shift(p, 1)
        h = g.spacing(p)
        return (_at(f, i + di, j + dj, k + dk) - 2.0 * _at(f, i, j, k)
                + _at(f, i - di, j - dj, k - dk)) / (h * h)
    a1, b1, c1 = _shift(p, 1)
    a2, b2, c2 = _shift(q, 1)
    pp = _at(f, i + a1 + a2, j + b1 + b2, k + c1 + c2)
    pm = _at(f, i + a1 - a2, j + b1 - b2, k + c1 - c2)
    mp = _at(f, i - a1 + a2, j - b1 + b2, k - c1 + c2)
    mm = _at(f, i - a1 - a2, j - b1 - b2, k - c1 - c2)
    return (pp - pm - mp + mm) / (4.0 * g.spacing(p) * g.spacing(q))


def first_diff(f: ScalarField, node, axis: str) -> float:
    """Centered first difference; second-order one-sided on the t boundary layers."""
    g = f.grid
    i, j, k = _check_node(g, node, need_interior=False)
    h = g.spacing(axis)
    if axis == "t" and k == 0:
        return (-3.0 * _at(f, i, j, 0) + 4.0 * _at(f, i, j, 1) - _at(f, i, j, 2)) / (2 * h)
    if axis == "t" and k == g.nt - 1:
        n = g.nt - 1
        return (3.0 * _at(f, i, j, n) - 4.0 * _at(f, i, j, n - 1) + _at(f, i, j, n - 2)) / (2 * h)
    di, dj, dk = _shift(axis, 1)
    return (_at(f, i + di, j + dj, k + dk) - _at(f, i - di, j - dj, k - dk)) / (2 * h)


def complex_hessian(f: ScalarField, node) -> HermitianSlot:
    fxx = second_diff(f, node, "xx")
    fyy = second_diff(f, node, "yy")
    a = 1.0 + (fxx + fyy) / 4.0
    b = complex(second_diff(f, node, "xt"), -second_diff(f, node, "yt")) / 4.0
    c = second_diff(f, node, "tt") / 4.0
    return HermitianSlot(a, b, c)


def real_hessian(f: ScalarField, node) -> np.ndarray:
    """3x3 chart Hessian over (x, y, t); the eta direction is identically zero and omitted."""
    _check_node(f.grid, node, need_interior=True)
    names = "xyt"
    H = np.empty((3, 3))
    for r in range(3):
        for s in range(r, 3):
            H[r, s] = H[s, r] = second_diff(f, node, names[r] + names[s])
    return H


def grad_norm_sq(f: ScalarField, node) -> float:
    """``|df|^2 = (f_x^2 + f_y^2 + f_t^2) / 2``."""
    return 0.5 * sum(first_diff(f, node, ax) ** 2 for ax in "xyt")


# ---------------------------------------------------------------------------
# vectorized stencils over interior t layers


def _roll(v, shift, axis):
    return np.roll(v, shift, axis=AXES[axis])


def hessian_arrays(f: ScalarField) -> dict[str, np.ndarray]:
    """All six second differences at every interior node, shape ``(nt-2, ny, nx)``."""
    g = f.grid
    v = f.values
    hx, hy, ht = g.hx, g.hy, g.ht
    xp, xm = _roll(v, -1, "x"), _roll(v, 1, "x")
    yp, ym = _roll(v, -1, "y"), _roll(v, 1, "y")
    out = {
        "xx": ((xp - 2.0 * v + xm) / (hx * hx))[1:-1],
        "yy": ((yp - 2.0 * v + ym) / (hy * hy))[1:-1],
        "tt": (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (ht * ht),
    }
    out["xy"] = ((_roll(xp, -1, "y") - _roll(xp, 1, "y") - _roll(xm, -1, "y")
                  + _roll(xm, 1, "y")) / (4.0 * hx * hy))[1:-1]
    out["xt"] = (xp[2:] - xp[:-2] - xm[2:] + xm[:-2]) / (4.0 * hx * ht)
    out["yt"] = (yp[2:] - yp[:-2] - ym[2:] + ym[:-2]) / (4.0 * hy * ht)
    return out


def slot_arrays(f: ScalarField):
    """Slot entries ``(a, b_re, b_im, c)`` at every interior node."""
    d = hessian_arrays(f)
    a = 1.0 + (d["xx"] + d["yy"]) / 4.0
    return a, d["xt"] / 4.0, -d["yt"] / 4.0, d["tt"] / 4.0


def slot_det(f: ScalarField) -> np.ndarray:
    a, br, bi, c = slot_arrays(f)
    return a * c - (br * br + bi * bi)


def real_hessian_array(f: ScalarField) -> np.ndarray:
    """Stacked 3x3 chart Hessians, shape ``(nt-2, ny, nx, 3, 3)``."""
    d = hessian_arrays(f)
    H = np.empty(d["xx"].shape + (3, 3))
    names = "xyt"
    for r in range(3):
        for s in range(r, 3):
            key = names[r] + names[s]
            H[..., r, s] = d[key]
            H[..., s, r] = d[key]
    return H


def gradient_arrays(f: ScalarField) -> np.ndarray:
    """Discrete gradient at every node, shape ``(nt, ny, nx, 3)`` over (x, y, t)."""
    g = f.grid
    v = f.values
    gx = (_roll(v, -1, "x") - _roll(v, 1, "x")) / (2 * g.hx)
    gy = (_roll(v, -1, "y") - _roll(v, 1, "y")) / (2 * g.hy)
    gt = np.empty_like(v)
    gt[1:-1] = (v[2:] - v[:-2]) / (2 * g.ht)
    gt[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2 * g.ht)
    gt[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2 * g.ht)
    return np.stack([gx, gy, gt], axis=-1)


def grad_norm_sq_array(f: ScalarField) -> np.ndarray:
    grad = gradient_arrays(f)
    return 0.5 * np.sum(grad * grad, axis=-1)
