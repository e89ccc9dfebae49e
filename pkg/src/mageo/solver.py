"""Damped Newton solver for the discrete complex Monge-Ampère equation.

The equation is solved in log form,

    r = log(a c - |b|^2) - log(rho) = 0

at every interior node, where ``(a, b, c)`` is the slot matrix of the field
and ``rho`` a positive density.  The t = 0 and t = 1 layers are Dirichlet
data and never change.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AdmissibilityError, ConvergenceError, LineSearchError, SolverError
from .grid import GridSpec, ScalarField, hessian_arrays, slot_arrays

log = logging.getLogger(__name__)

MIN_STEP = 1e-12


@dataclass
class ResidualField:
    grid: GridSpec
    values: np.ndarray  # shape (nt-2, ny, nx)

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass
class NewtonConfig:
    tol_res: float = 1e-9
    max_outer: int = 50
    armijo: float = 0.5
    armijo_slope: float = 1e-4
    linear_tol: float = 1e-8
    linear_max: int = 500
    linear_solver: str = "krylov"   # or "direct"
    preconditioner: str = "ilu"     # or "jacobi"

    def __post_init__(self):
        for name in ("tol_res", "max_outer", "armijo_slope", "linear_tol", "linear_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.armijo < 1:
            raise ValueError("armijo factor must lie in (0, 1)")
        if self.linear_solver not in ("direct", "krylov"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")
        if self.preconditioner not in ("jacobi", "ilu"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class SolveReport:
    outer_iters: int = 0
    residual_history: list = field(default_factory=list)
    min_admissibility: float = float("nan")
    linear_iter_counts: list = field(default_factory=list)
    step_lengths: list = field(default_factory=list)
    wall_time: float = 0.0


def rhs_array(grid: GridSpec, rhs) -> np.ndarray:
    """Evaluate a density at the interior nodes.

    ``rhs`` is either an array of shape ``(nt-2, ny, nx)`` or a vectorized
    callable ``rhs(x, y, t)``.
    """
    if callable(rhs):
        x, y, t = grid.coords()
        vals = np.broadcast_to(rhs(x, y, t[1:-1]), (grid.nt - 2, grid.ny, grid.nx))
    else:
        vals = np.asarray(rhs, dtype=np.float64)
        if vals.shape != (grid.nt - 2, grid.ny, grid.nx):
            raise ValueError(f"rhs shape {vals.shape} does not match interior of {grid}")
    if not np.all(vals > 0):
        raise ValueError("density must be positive at every interior node")
    return np.array(vals, dtype=np.float64)


def eps_density(eps: float):
    """Density ``eps * exp(2 t)`` of the eps-geodesic problem in the log chart."""
    return lambda x, y, t: eps * np.exp(2.0 * t)


def _first_bad(a, det):
    bad = (a <= 0) | (det <= 0)
    if not bad.any():
        return None
    k, j, i = np.unravel_index(np.argmax(bad), bad.shape)
    return int(i), int(j), int(k) + 1


def _raise_inadmissible(psi: ScalarField, slots, det):
    a, br, bi, c = slots
    node = _first_bad(a, det)
    i, j, k = node
    slot = (float(a[k - 1, j, i]), complex(br[k - 1, j, i], bi[k - 1, j, i]), float(c[k - 1, j, i]))
    raise AdmissibilityError(
        f"inadmissible node {node}: a={slot[0]:.3e}, b={slot[1]:.3e}, c={slot[2]:.3e}, "
        f"det={det[k - 1, j, i]:.3e}", node=node, slot=slot)


def _log_residual(psi: ScalarField, log_rho: np.ndarray):
    slots = slot_arrays(psi)
    a, br, bi, c = slots
    det = a * c - (br * br + bi * bi)
    if np.any(a <= 0) or np.any(det <= 0):
        _raise_inadmissible(psi, slots, det)
    return np.log(det) - log_rho, slots, det


def residual_log(psi: ScalarField, rhs) -> ResidualField:
    r, _, _ = _log_residual(psi, np.log(rhs_array(psi.grid, rhs)))
    return ResidualField(psi.grid, r)


def admissibility_check(psi: ScalarField):
    """Return ``(ok, min_det, worst_node)`` over interior nodes.

    ``worst_node`` is the location of the smallest slot determinant, or of the
    first node with ``a <= 0`` if there is one.
    """
    a, br, bi, c = slot_arrays(psi)
    det = a * c - (br * br + bi * bi)
    min_det = float(det.min())
    bad_a = a <= 0
    if bad_a.any():
        flat = int(np.argmax(bad_a))
    else:
        flat = int(np.argmin(det))
    k, j, i = np.unravel_index(flat, det.shape)
    ok = bool(not bad_a.any() and min_det > 0)
    return ok, min_det, (int(i), int(j), int(k) + 1)


def linearize_apply(psi: ScalarField, delta: ScalarField) -> ScalarField:
    """Action of the residual Jacobian at ``psi`` on ``delta``: ``tr(M^-1 dM)`` per node.

    The result lives on interior nodes; its boundary layers are zero.
    """
    a, br, bi, c = slot_arrays(psi)
    det = a * c - (br * br + bi * bi)
    if np.any(a <= 0) or np.any(det <= 0):
        _raise_inadmissible(psi, (a, br, bi, c), det)
    d = hessian_arrays(delta)
    ddet = (c * (d["xx"] + d["yy"]) / 4.0 + a * d["tt"] / 4.0
            - (br * d["xt"] - bi * d["yt"]) / 2.0)
    out = np.zeros(psi.grid.shape)
    out[1:-1] = ddet / det
    return ScalarField(psi.grid, out)


@lru_cache(maxsize=16)
def _operators(grid: GridSpec):
    """Sparse difference operators acting on interior unknowns (x fastest)."""

    def periodic(n, h):
        e = np.ones(n)
        second = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], format="lil")
        second[0, n - 1] = second[n - 1, 0] = 1.0
        first = sp.diags([-e[:-1], e[:-1]], [-1, 1], format="lil")
        first[0, n - 1], first[n - 1, 0] = -1.0, 1.0
        return second.tocsr() / (h * h), first.tocsr() / (2 * h)

    Lx, Cx = periodic(grid.nx, grid.hx)
    Ly, Cy = periodic(grid.ny, grid.hy)
    m = grid.nt - 2
    e = np.ones(m)
    Lt = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], format="csr") / grid.ht ** 2
    Ct = sp.diags([-e[:-1], e[:-1]], [-1, 1], format="csr") / (2 * grid.ht)
    Ix, Iy, It = (sp.identity(n, format="csr") for n in (grid.nx, grid.ny, m))
    kron = lambda A, B, C: sp.kron(A, sp.kron(B, C, format="csr"), format="csr")
    return {
        "lap": kron(It, Iy, Lx) + kron(It, Ly, Ix),
        "tt": kron(Lt, Iy, Ix),
        "xt": kron(Ct, Iy, Cx),
        "yt": kron(Ct, Cy, Ix),
    }


def jacobian_matrix(psi: ScalarField, slots=None) -> sp.csr_matrix:
    """Sparse Jacobian of :func:`residual_log` with respect to interior values."""
    a, br, bi, c = slots if slots is not None else slot_arrays(psi)
    det = (a * c - (br * br + bi * bi)).ravel()
    ops = _operators(psi.grid)
    D = lambda w: sp.diags(w.ravel() / det)
    return (D(c / 4.0) @ ops["lap"] + D(a / 4.0) @ ops["tt"]
            - D(br / 2.0) @ ops["xt"] + D(bi / 2.0) @ ops["yt"]).tocsr()


def _linear_solve(J, rhs, cfg: NewtonConfig, rtol: float):
    """Solve ``J x = rhs`` to relative tolerance ``rtol``; returns ``(x, iterations)``.

    The Krylov path is restarted GMRES since the Jacobian is not symmetric.
    """
    if cfg.linear_solver == "direct":
        return spla.splu(J.tocsc()).solve(rhs), 1
    if cfg.preconditioner == "ilu":
        ilu = spla.spilu(J.tocsc(), drop_tol=1e-2, fill_factor=5)
        M = spla.LinearOperator(J.shape, ilu.solve)
    else:
        diag = J.diagonal()
        M = spla.LinearOperator(J.shape, lambda v: v / diag)
    restart = min(100, cfg.linear_max)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.gmres(J, rhs, rtol=rtol, atol=0.0, restart=restart,
                         maxiter=-(-cfg.linear_max // restart), M=M, callback=cb,
                         callback_type="pr_norm")
    if info < 0:
        raise SolverError(f"Krylov breakdown (info={info})")
    if info > 0:
        log.debug("GMRES stopped at %d iterations above rtol %.1e", count[0], rtol)
    return x, count[0]


def _line_search(psi, step, norm, log_rho, cfg):
    """Admissibility-gated Armijo backtracking; returns None when the step shrinks below MIN_STEP."""
    alpha = 1.0
    while alpha >= MIN_STEP:
        trial = psi.values.copy()
        trial[1:-1] += alpha * step
        trial_field = ScalarField(psi.grid, trial)
        try:
            r_new, slots_new, det_new = _log_residual(trial_field, log_rho)
        except AdmissibilityError:
            alpha *= 0.5
            continue
        norm_new = float(np.abs(r_new).max())
        if norm_new <= (1.0 - cfg.armijo_slope * alpha) * norm:
            return alpha, trial_field, r_new, slots_new, det_new, norm_new
        alpha *= cfg.armijo
    return None


def newton_solve(psi0: ScalarField, rhs, cfg: NewtonConfig | None = None):
    """Solve ``log det = log rho`` from an admissible start.

    Returns the solution and a :class:`SolveReport`.  Steps are halved until
    the trial field is admissible, then backtracked (Armijo) on the sup norm
    of the residual.  Krylov solves use the inexact tolerance
    ``max(linear_tol, min(0.1 |r|, 0.1))``; if the line search fails on such a
    step it is recomputed once at ``linear_tol``.
    """
    cfg = cfg or NewtonConfig()
    t0 = time.perf_counter()
    log_rho = np.log(rhs_array(psi0.grid, rhs))
    psi = psi0.copy()
    report = SolveReport()
    r, slots, det = _log_residual(psi, log_rho)
    norm = float(np.abs(r).max())
    report.residual_history.append(norm)
    report.min_admissibility = float(det.min())

    def fail(exc_type, msg):
        report.wall_time = time.perf_counter() - t0
        raise exc_type(msg, report=report)

    while norm > cfg.tol_res:
        if report.outer_iters >= cfg.max_outer:
            fail(ConvergenceError,
                 f"no convergence in {cfg.max_outer} Newton steps (residual {norm:.3e})")
        J = jacobian_matrix(psi, slots)
        rtol = max(cfg.linear_tol, min(0.1 * norm, 0.1))
        while True:
            step, lin_its = _linear_solve(J, -r.ravel(), cfg, rtol)
            report.linear_iter_counts.append(lin_its)
            found = _line_search(psi, step.reshape(r.shape), norm, log_rho, cfg)
            if found is not None:
                break
            if cfg.linear_solver == "direct" or rtol <= cfg.linear_tol:
                fail(LineSearchError, f"line search failed at residual {norm:.3e}")
            log.debug("line search failed on inexact step; re-solving at rtol %.1e",
                      cfg.linear_tol)
            rtol = cfg.linear_tol
        alpha, psi, r, slots, det, norm = found
        report.outer_iters += 1
        report.step_lengths.append(alpha)
        report.residual_history.append(norm)
        log.debug("newton %d: |r| = %.3e, step %.3g", report.outer_iters, norm, alpha)

    report.min_admissibility = float(det.min())
    report.wall_time = time.perf_counter() - t0
    return psi, report


class SweepResult(list):
    """Completed ``(eps, field, report)`` triples; ``failure`` holds the error that stopped the sweep."""

    failure: SolverError | None = None


def continuity_sweep(problem, cfg: NewtonConfig | None = None) -> SweepResult:
    """Warm-started continuation along a decreasing eps schedule.

    ``problem`` needs ``schedule``, ``initial_guess`` (a field) and
    ``rhs(eps)``.  A failure at the first eps is raised; later failures end
    the sweep and are stored on the returned list's ``failure`` attribute.
    """
    cfg = cfg or NewtonConfig()
    schedule = list(problem.schedule)
    if not schedule or any(not 0 < e <= 1 for e in schedule):
        raise ValueError("eps schedule must lie in (0, 1]")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("eps schedule must be strictly decreasing")
    out = SweepResult()
    guess = problem.initial_guess
    for eps in schedule:
        try:
            psi, report = newton_solve(guess, problem.rhs(eps), cfg)
        except (SolverError, AdmissibilityError) as exc:
            err = SolverError(str(exc), eps=eps, report=getattr(exc, "report", None))
            if not out:
                raise err from exc
            log.warning("sweep stopped: %s", err)
            out.failure = err
            return out
        out.append((eps, psi, report))
        guess = psi
    return out
