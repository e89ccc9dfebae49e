"""Monitored quantities on solved eps-fields and the boundedness verdicts.

The quantities follow the maximum-principle argument for the real Hessian
bound: the largest Hessian eigenvalue, the test function

    Q = log lam1 + h(|d psi|^2) - A (psi - max psi),

gradient and Laplacian suprema, the slot determinant, and a discrete
C^{1,alpha} seminorm.  Verdicts ask whether a supremum stops growing as
eps -> 0.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .eigencalc import eigvalsh_desc, h_values
from .geodesic import extract_path, geodesic_speed, speed_variation
from .grid import (ScalarField, gradient_arrays, grad_norm_sq_array, hessian_arrays,
                   real_hessian_array, slot_arrays)

CSV_COLUMNS = ("eps", "sup_psi", "sup_grad", "sup_lap", "sup_lambda1", "min_det", "sup_Q",
               "speed_var", "holder")

PLATEAU_SLOPE = 0.05
PLATEAU_GROWTH = 0.10
DET_FACTOR = 2.0


@dataclass
class QFieldConfig:
    A: float = 3.0
    normalize: bool = True

    def __post_init__(self):
        if not self.A > 1:
            raise ValueError("A must exceed 1")


@dataclass
class LambdaField:
    values: np.ndarray   # interior nodes, (nt-2, ny, nx)
    max: float
    argmax: tuple        # (i, j, k)


def _node(flat, shape):
    k, j, i = np.unravel_index(flat, shape)
    return int(i), int(j), int(k) + 1


def hessian_eigen_field(psi: ScalarField) -> LambdaField:
    """Top eigenvalue of the 3x3 chart Hessian at every interior node."""
    lam = eigvalsh_desc(real_hessian_array(psi))[..., 0]
    flat = int(np.argmax(lam))
    return LambdaField(lam, float(lam.ravel()[flat]), _node(flat, lam.shape))


# 13 directions of the 3x3x3 stencil neighbourhood, up to sign
PROBE_DIRECTIONS = np.array(
    [d for d in itertools.product((-1, 0, 1), repeat=3)
     if d > (0, 0, 0)], dtype=float)
PROBE_DIRECTIONS /= np.linalg.norm(PROBE_DIRECTIONS, axis=1)[:, None]


def probe_lambda1(psi: ScalarField) -> np.ndarray:
    """Max Rayleigh quotient over the fixed probe directions; a lower bound for lam1."""
    H = real_hessian_array(psi)
    return np.einsum("...ij,pi,pj->...p", H, PROBE_DIRECTIONS, PROBE_DIRECTIONS).max(axis=-1)


@dataclass
class QFieldResult:
    values: np.ndarray   # NaN where lam1 <= 0
    sup: float
    argmax: tuple | None
    excluded: int
    argmax_interior: bool


def q_field(psi: ScalarField, cfg: QFieldConfig | None = None) -> QFieldResult:
    """The maximum-principle quantity at interior nodes with ``lam1 > 0``.

    ``s_max`` is the maximum of ``|d psi|^2`` over all nodes.  Nodes with
    ``lam1 <= 0`` lie outside the domain of Q and are counted, not used.
    """
    cfg = cfg or QFieldConfig()
    vals = psi.values - psi.values.max() if cfg.normalize else psi.values
    shifted = ScalarField(psi.grid, vals)
    lam = hessian_eigen_field(shifted).values
    s = grad_norm_sq_array(shifted)
    s_max = float(s.max())
    ok = lam > 0
    q = np.full(lam.shape, np.nan)
    q[ok] = (np.log(lam[ok]) + h_values(s[1:-1][ok], s_max) - cfg.A * vals[1:-1][ok])
    excluded = int((~ok).sum())
    if not ok.any():
        return QFieldResult(q, float("nan"), None, excluded, False)
    flat = int(np.nanargmax(q))
    node = _node(flat, q.shape)
    g = psi.grid
    interior = 1 < node[2] < g.nt - 2
    return QFieldResult(q, float(q.ravel()[flat]), node, excluded, interior)


# ---------------------------------------------------------------------------
# Hölder seminorm of the gradient


def holder_pairs(grid, seed: int = 0, n_far: int = 10_000, radius: float = 4.0):
    """Offsets of all near pairs and a fixed random sample of far pairs.

    Near pairs are every node offset within ``radius * h`` (``h`` the
    smallest spacing), listed once per unordered pair.  Far pairs are
    ``(flat_index_p, flat_index_q)`` arrays drawn with a fixed seed.
    """
    h = min(grid.hx, grid.hy, grid.ht)
    r = radius * h
    ri = [int(np.floor(r / s + 1e-12)) for s in (grid.hx, grid.hy, grid.ht)]
    offsets = []
    for di in range(-ri[0], ri[0] + 1):
        for dj in range(-ri[1], ri[1] + 1):
            for dk in range(0, ri[2] + 1):
                if (dk, dj, di) <= (0, 0, 0):
                    continue
                d = np.sqrt((di * grid.hx) ** 2 + (dj * grid.hy) ** 2 + (dk * grid.ht) ** 2)
                if d <= r + 1e-12:
                    offsets.append((di, dj, dk))
    rng = np.random.default_rng(seed)
    p = rng.integers(0, grid.size, n_far)
    q = rng.integers(0, grid.size, n_far)
    keep = p != q
    return offsets, (p[keep], q[keep])


def _torus_dist(grid, i1, j1, k1, i2, j2, k2):
    dx = np.abs(i1 - i2) % grid.nx
    dx = np.minimum(dx, grid.nx - dx) * grid.hx
    dy = np.abs(j1 - j2) % grid.ny
    dy = np.minimum(dy, grid.ny - dy) * grid.hy
    dt = np.abs(k1 - k2) * grid.ht
    return np.sqrt(dx * dx + dy * dy + dt * dt)


def holder_seminorm(psi: ScalarField, alpha: float = 0.5, seed: int = 0,
                    n_far: int = 10_000) -> float:
    """Max of ``|grad psi(p) - grad psi(q)| / dist(p, q)^alpha`` over sampled pairs."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    g = psi.grid
    grad = gradient_arrays(psi)
    offsets, (fp, fq) = holder_pairs(g, seed, n_far)
    best = 0.0
    for di, dj, dk in offsets:
        other = np.roll(grad, shift=(-dj, -di), axis=(1, 2))[dk:]
        diff = np.linalg.norm(grad[:g.nt - dk] - other, axis=-1)
        d = _torus_dist(g, 0, 0, 0, di, dj, dk)
        best = max(best, float(diff.max()) / d ** alpha)
    flat = grad.reshape(-1, 3)
    kp, jp, ip = np.unravel_index(fp, g.shape)
    kq, jq, iq = np.unravel_index(fq, g.shape)
    d = _torus_dist(g, ip, jp, kp, iq, jq, kq)
    diff = np.linalg.norm(flat[fp] - flat[fq], axis=-1)
    if d.size:
        best = max(best, float(np.max(diff / d ** alpha)))
    return best


# ---------------------------------------------------------------------------
# per-eps rows and verdicts


@dataclass
class DiagnosticsRow:
    eps: float
    sup_psi: float
    sup_grad: float
    sup_lap: float
    sup_lambda1: float
    min_det: float
    sup_Q: float
    speed_var: float
    holder: float
    q_argmax: tuple | None = None
    q_argmax_interior: bool = False
    q_excluded: int = 0


def diagnose(eps: float, psi: ScalarField, qcfg: QFieldConfig | None = None,
             alpha: float = 0.5) -> DiagnosticsRow:
    d = hessian_arrays(psi)
    a, br, bi, c = slot_arrays(psi)
    q = q_field(psi, qcfg)
    return DiagnosticsRow(
        eps=float(eps),
        sup_psi=float(np.abs(psi.values).max()),
        sup_grad=float(np.linalg.norm(gradient_arrays(psi), axis=-1).max()),
        sup_lap=float((d["xx"] + d["yy"] + d["tt"]).max()),
        sup_lambda1=hessian_eigen_field(psi).max,
        min_det=float((a * c - br * br - bi * bi).min()),
        sup_Q=q.sup,
        speed_var=speed_variation(geodesic_speed(extract_path(psi))),
        holder=holder_seminorm(psi, alpha),
        q_argmax=q.argmax,
        q_argmax_interior=q.argmax_interior,
        q_excluded=q.excluded,
    )


@dataclass
class Verdict:
    check: str
    value: float
    threshold: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def as_json(self) -> dict:
        out = {"check": self.check, "value": self.value, "threshold": self.threshold,
               "pass": self.passed}
        if self.detail:
            out["detail"] = self.detail
        return out


def _get(row, key):
    return row[key] if isinstance(row, dict) else getattr(row, key)


def plateau_test(rows, key: str) -> Verdict:
    """Does ``key`` stop growing as eps -> 0?

    Least-squares slope of the value against ``log(1/eps)`` over the last
    three rows must be at most 0.05 times the value scale (max absolute value
    over those rows), and the last value may exceed the previous one by at
    most 10% of that scale.
    """
    if len(rows) < 3:
        raise ValueError("plateau_test needs at least three rows")
    tail = rows[-3:]
    x = np.log(1.0 / np.array([_get(r, "eps") for r in tail], dtype=float))
    v = np.array([_get(r, key) for r in tail], dtype=float)
    scale = max(float(np.abs(v).max()), 1e-300)
    xc = x - x.mean()
    slope = float(np.dot(xc, v - v.mean()) / np.dot(xc, xc))
    growth = float((v[-1] - v[-2]) / scale)
    rel_slope = slope / scale
    ok = bool(rel_slope <= PLATEAU_SLOPE and growth <= PLATEAU_GROWTH)
    return Verdict(f"plateau:{key}", rel_slope, PLATEAU_SLOPE, ok,
                   {"slope": slope, "scale": scale, "last_growth": growth,
                    "growth_threshold": PLATEAU_GROWTH})


def det_tracking(rows) -> Verdict:
    """``min_det / eps`` must lie in ``[1/2, 2 e^2]`` for every row."""
    ratios = [_get(r, "min_det") / _get(r, "eps") for r in rows]
    lo, hi = 1.0 / DET_FACTOR, DET_FACTOR * np.exp(2.0)
    worst = min(ratios, key=lambda q: min(q / lo, hi / q))
    ok = all(lo <= q <= hi for q in ratios)
    return Verdict("min_det_tracks_eps", float(worst), float(lo), bool(ok),
                   {"ratios": [float(q) for q in ratios], "band": [lo, float(hi)]})


@dataclass
class DiagnosticsReport:
    rows: list
    verdicts: list = field(default_factory=list)

    HEADER = (f"# plateau: slope/scale <= {PLATEAU_SLOPE}, last growth/scale <= "
              f"{PLATEAU_GROWTH}; det band [eps/{DET_FACTOR:g}, {DET_FACTOR:g} e^2 eps]")

    def evaluate(self) -> list:
        self.verdicts = [plateau_test(self.rows, "sup_lambda1"),
                         plateau_test(self.rows, "holder"),
                         det_tracking(self.rows)]
        return self.verdicts

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([repr(float(getattr(r, c))) for c in CSV_COLUMNS])
        return buf.getvalue()

    def verdicts_json(self) -> str:
        return json.dumps([v.as_json() for v in self.verdicts], indent=2, sort_keys=True) + "\n"

    def rows_json(self) -> list:
        return [asdict(r) for r in self.rows]
