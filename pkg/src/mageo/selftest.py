"""Seeded property checks over the eigenvalue calculus and the field core.

Every check returns ``(passed, value, threshold)``; the table is printed
without timings so repeated runs produce identical bytes.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import eigencalc as ec
from .fieldio import read_field, write_field
from .grid import ScalarField, make_grid, real_hessian_array, second_diff, slot_arrays

SEED = 20240531
FAULTS = ("d2-sign",)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float


def _random_sym(rng, n, min_gap=0.1):
    while True:
        A = rng.standard_normal((n, n))
        A = 0.5 * (A + A.T)
        lam = np.linalg.eigvalsh(A)
        if lam[-1] - lam[-2] >= min_gap:
            return A


def _random_dir(rng, n):
    D = rng.standard_normal((n, n))
    return 0.5 * (D + D.T)


def _lam1(A):
    return ec.eigen_decompose(A).lambdas[0]


def fd_second(f, A, D, h=1e-3):
    """Fourth-order central second difference of ``f(A + s D)`` at ``s = 0``."""
    v = [f(A + k * h * D) for k in (-2, -1, 0, 1, 2)]
    return (-v[0] + 16 * v[1] - 30 * v[2] + 16 * v[3] - v[4]) / (12 * h * h)


class _Suite:
    def __init__(self, fault: str | None):
        if fault is not None and fault not in FAULTS:
            raise ValueError(f"unknown fault {fault!r}")
        self.fault = fault
        self.rng = np.random.default_rng(SEED)

    def d2(self, E, P, Q):
        v = ec.d2_lambda1(E, P, Q)
        return -v if self.fault == "d2-sign" else v

    # -- eigencalc ---------------------------------------------------------

    def eigen_reconstruction(self):
        worst = 0.0
        for n in (2, 3, 4):
            for _ in range(20):
                A = self.rng.standard_normal((n, n))
                A = A + A.T
                E = ec.eigen_decompose(A)
                res = np.linalg.norm(A - E.reconstruct()) / (1 + np.linalg.norm(A))
                orth = np.linalg.norm(E.vectors.T @ E.vectors - np.eye(n))
                worst = max(worst, res, orth)
        return worst <= 1e-10, worst, 1e-10

    def eigen_ties(self):
        E = ec.eigen_decompose(np.eye(3))
        err = np.abs(E.vectors - np.eye(3)).max() + np.abs(E.lambdas - 1).max()
        return err == 0.0, float(err), 0.0

    def d_lambda1_fd(self):
        worst = 0.0
        for n in (3, 4):
            for _ in range(20):
                A, D = _random_sym(self.rng, n), _random_dir(self.rng, n)
                h = 1e-5
                fd = (_lam1(A + h * D) - _lam1(A - h * D)) / (2 * h)
                an = float(np.sum(ec.d_lambda1(ec.eigen_decompose(A)) * D))
                worst = max(worst, abs(fd - an) / max(1.0, abs(an)))
        return worst <= 1e-6, worst, 1e-6

    def d2_lambda1_fd(self):
        worst = 0.0
        for n in (3, 4):
            for _ in range(20):
                A, D = _random_sym(self.rng, n), _random_dir(self.rng, n)
                fd = fd_second(_lam1, A, D)
                an = self.d2(ec.eigen_decompose(A), D, D)
                worst = max(worst, abs(fd - an) / max(1.0, abs(an)))
        return worst <= 1e-5, worst, 1e-5

    def d2_lambda1_hand(self):
        P = np.zeros((3, 3))
        P[0, 1] = P[1, 0] = 1 / np.sqrt(2)
        val = self.d2(ec.eigen_decompose(np.diag([5.0, 2.0, 1.0])), P, P)
        err = abs(val - 1 / 3)
        return err <= 1e-12, err, 1e-12

    def d2_lambda1_psd(self):
        worst = np.inf
        for _ in range(50):
            A = _random_sym(self.rng, 4)
            D = _random_dir(self.rng, 4)
            worst = min(worst, self.d2(ec.eigen_decompose(A), D, D))
        return worst >= -1e-12, float(worst), -1e-12

    def h_identities(self):
        s_max = 3.0
        s = np.linspace(0.0, s_max, 1000)
        vals = np.array([ec.h_eval(ec.HFunState(float(v), s_max)) for v in s])
        ident = np.abs(vals[:, 2] - 2 * vals[:, 1] ** 2).max()
        lo = 1 / (2 + 2 * s_max)
        bounds = np.all((vals[:, 1] >= lo - 1e-15) & (vals[:, 1] <= 0.5 + 1e-15))
        return bool(ident <= 1e-12 and bounds), float(ident), 1e-12

    def perturbation_kernel(self):
        worst = 0.0
        for _ in range(50):
            v = self.rng.standard_normal(4)
            v /= np.linalg.norm(v)
            worst = max(worst, np.abs(ec.perturbation_B(v).array @ v).max())
        return worst <= 1e-12, worst, 1e-12

    def phi_preserves_top(self):
        worst = 0.0
        for _ in range(50):
            A = _random_sym(self.rng, 4)
            E = ec.eigen_decompose(A)
            Phi = ec.phi_endomorphism(A, ec.perturbation_B(E.vectors[:, 0]))
            worst = max(worst, abs(_lam1(Phi.array) - E.lambdas[0]))
        return worst <= 1e-10, worst, 1e-10

    def phi_dominated(self):
        worst = -np.inf
        for _ in range(200):
            A = _random_sym(self.rng, 4)
            v = self.rng.standard_normal(4)
            v /= np.linalg.norm(v)
            Phi = ec.phi_endomorphism(A, ec.perturbation_B(v))
            worst = max(worst, _lam1(Phi.array) - _lam1(A))
        return worst <= 1e-12, float(worst), 1e-12

    # -- field core --------------------------------------------------------

    def stencil_exact_quadratics(self):
        g = make_grid(1, 8, 8, 9)
        c = self.rng.standard_normal(4)
        f = ScalarField.from_function(
            g, lambda x, y, t: c[0] * t * t + c[1] * t + c[2] + 0 * x + 0 * y)
        err = abs(second_diff(f, (3, 2, 4), "tt") - 2 * c[0])
        return err <= 1e-10, float(err), 1e-10

    def slot_trace_identity(self):
        g = make_grid(1, 8, 8, 9)
        f = ScalarField(g, 0.01 * self.rng.standard_normal(g.shape))
        a = slot_arrays(f)[0]
        H = real_hessian_array(f)
        err = np.abs(4 * (a - 1) - (H[..., 0, 0] + H[..., 1, 1])).max()
        return err <= 1e-9, float(err), 1e-9

    def slot_det_bound(self):
        g = make_grid(1, 8, 8, 9)
        f = ScalarField(g, 0.01 * self.rng.standard_normal(g.shape))
        a, br, bi, c = slot_arrays(f)
        excess = float(((a * c - br * br - bi * bi) - a * c).max())
        return excess <= 0.0, excess, 0.0

    def field_roundtrip(self):
        g = make_grid(1, 8, 8, 9)
        f = ScalarField(g, self.rng.standard_normal(g.shape))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "f.mafld"
            write_field(f, path)
            same = read_field(path) == f
        return same, 0.0 if same else 1.0, 0.0

    CHECKS = ("eigen_reconstruction", "eigen_ties", "d_lambda1_fd", "d2_lambda1_fd",
              "d2_lambda1_hand", "d2_lambda1_psd", "h_identities", "perturbation_kernel",
              "phi_preserves_top", "phi_dominated", "stencil_exact_quadratics",
              "slot_trace_identity", "slot_det_bound", "field_roundtrip")


def run_selftest(fault: str | None = None) -> list[CheckResult]:
    suite = _Suite(fault)
    out = []
    for name in suite.CHECKS:
        try:
            ok, value, thr = getattr(suite, name)()
        except Exception as exc:  # a crashing check is a failing check
            ok, value, thr = False, float("nan"), float("nan")
            name = f"{name} ({type(exc).__name__}: {exc})"
        out.append(CheckResult(name, bool(ok), float(value), float(thr)))
    return out


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  {'value':>12}  {'threshold':>12}"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  "
                     f"{r.value:>12.3e}  {r.threshold:>12.3e}")
    failed = [r.name for r in results if not r.passed]
    lines.append(f"{len(results) - len(failed)}/{len(results)} checks passed"
                 + (f"; failing: {', '.join(failed)}" if failed else ""))
    return "\n".join(lines) + "\n"
