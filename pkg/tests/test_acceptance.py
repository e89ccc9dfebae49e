"""End-to-end acceptance checks at desk scale.

Each test measures one property of the implementation against an independent
reference (numpy eigenvalues, closed-form solutions, the Legendre oracle) at a
fixed tolerance, and also asserts a wall-clock budget.  The heavy x-only and
two-dimensional sweeps are shared through module-scoped fixtures.

``test_legendre_oracle_agreement_for_stated_cosine_amplitude`` is expected to
fail: with amplitude 0.2 the boundary potential 0.2 cos(2 pi x) is not a
Kähler potential on this torus (1 + phi_xx/4 dips to about -0.97), so no
geodesic exists for the solver to find.  The same checks pass at amplitude 0.05.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from mageo import eigencalc as ec
from mageo.diagnostics import det_tracking, diagnose, plateau_test
from mageo.errors import AdmissibilityError
from mageo.geodesic import (build_problem, builtin_pair, default_schedule, geodesic_speed,
                            extract_path, solve_geodesic, speed_variation)
from mageo.grid import make_grid
from mageo.oracle import (ManufacturedSolution, compare_fields, oracle_field,
                          trivial_eps_solution)
from mageo.selftest import fd_second
from mageo.solver import newton_solve

SEED = 2024


def _top(A):
    return np.linalg.eigvalsh(A)[-1]


def _gapped_matrices(rng, count, min_gap=0.1):
    out = []
    while len(out) < count:
        n = 3 + len(out) % 2
        A = rng.standard_normal((n, n))
        A = 0.5 * (A + A.T)
        lam = np.linalg.eigvalsh(A)
        if lam[-1] - lam[-2] >= min_gap:
            D = rng.standard_normal((n, n))
            out.append((A, 0.5 * (D + D.T)))
    return out


# ---------------------------------------------------------------------------
# eigenvalue calculus


def test_top_eigenvalue_derivatives_match_finite_differences():
    start = time.perf_counter()
    h = 1e-5
    worst1 = worst2 = 0.0
    for A, D in _gapped_matrices(np.random.default_rng(SEED), 200):
        E = ec.eigen_decompose(A)
        an1 = float(np.sum(ec.d_lambda1(E) * D))
        fd1 = (_top(A + h * D) - _top(A - h * D)) / (2 * h)
        an2 = ec.d2_lambda1(E, D, D)
        fd2 = fd_second(_top, A, D)
        worst1 = max(worst1, abs(fd1 - an1) / abs(an1))
        worst2 = max(worst2, abs(fd2 - an2) / abs(an2))
    elapsed = time.perf_counter() - start
    assert worst1 <= 1e-6, worst1
    assert worst2 <= 1e-5, worst2
    assert elapsed < 5.0, elapsed


def test_gradient_weight_identities_and_bounds():
    start = time.perf_counter()
    s_max = 2.5
    s = np.random.default_rng(SEED).uniform(0.0, s_max, 10_000)
    s[:2] = 0.0, s_max
    vals = np.array([ec.h_eval(ec.HFunState(float(v), s_max)) for v in s])
    residual = np.abs(vals[:, 2] - 2 * vals[:, 1] ** 2).max()
    elapsed = time.perf_counter() - start
    assert residual <= 1e-12
    assert np.all(vals[:, 1] >= 1 / (2 + 2 * s_max))
    assert np.all(vals[:, 1] <= 0.5)
    assert elapsed < 1.0, elapsed


def test_perturbed_endomorphism_keeps_and_dominates_top_eigenvalue():
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst_equal = worst_excess = 0.0
    checked = 0
    while checked < 1000:
        n = 3 + checked % 2
        H0 = rng.standard_normal((n, n))
        H0 = H0 + H0.T
        lam = np.linalg.eigvalsh(H0)
        if lam[-1] - lam[-2] < 0.1:
            continue
        B = ec.perturbation_B(ec.eigen_decompose(H0).vectors[:, 0])
        worst_equal = max(worst_equal, abs(_top(ec.phi_endomorphism(H0, B).array) - lam[-1]))
        # the frame is frozen at the construction point; the Hessian moves nearby
        dH = rng.standard_normal((n, n))
        H = H0 + 0.1 * (dH + dH.T)
        worst_excess = max(worst_excess, _top(ec.phi_endomorphism(H, B).array) - _top(H))
        checked += 1
    elapsed = time.perf_counter() - start
    assert worst_equal <= 1e-10, worst_equal
    assert worst_excess <= 1e-12, worst_excess
    assert elapsed < 2.0, elapsed


# ---------------------------------------------------------------------------
# solver against exact solutions


def test_trivial_data_matches_closed_form_with_second_order_refinement():
    start = time.perf_counter()
    schedule = [1e-1, 1e-2, 1e-3]
    errors = {}
    for nt in (33, 65):
        grid = make_grid(1, 16, 16, nt)
        results = solve_geodesic(build_problem(builtin_pair("trivial", grid), grid, schedule))
        assert results.failure is None
        assert [e for e, _, _ in results] == schedule
        errors[nt] = np.array([compare_fields(psi, trivial_eps_solution(grid, e)).sup
                               for e, psi, _ in results])
    elapsed = time.perf_counter() - start
    assert np.all(errors[33] <= 1e-3), errors[33]
    ratios = errors[33] / errors[65]
    assert np.all((ratios >= 3.5) & (ratios <= 4.5)), ratios
    assert elapsed < 120.0, elapsed


def test_manufactured_solution_second_order_and_superlinear_newton():
    start = time.perf_counter()
    ms = ManufacturedSolution()
    sizes = (16, 32, 64)
    errors = []
    for n in sizes:
        grid = make_grid(1, n, 8, n + 1)
        psi, report = newton_solve(ms.start(grid), ms.density)
        errors.append(compare_fields(psi, ms.field(grid)).sup)
        hist = report.residual_history
        assert len(hist) >= 3
        assert hist[-1] / hist[-2] <= 1e-2, hist
    elapsed = time.perf_counter() - start
    rates = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(np.abs(rates - 2.0) <= 0.2), (errors, rates)
    assert elapsed < 300.0, elapsed


# ---------------------------------------------------------------------------
# x-only data against the Legendre oracle


def _run_sweep(name, shape, **params):
    start = time.perf_counter()
    grid = make_grid(1, *shape)
    pair = builtin_pair(name, grid, **params)
    results = solve_geodesic(build_problem(pair, grid, default_schedule()))
    rows = [diagnose(e, psi) for e, psi, _ in results]
    return {"grid": grid, "pair": pair, "results": results, "rows": rows,
            "elapsed": time.perf_counter() - start}


@pytest.fixture(scope="module")
def xonly_sweep():
    return _run_sweep("xonly-cos", (64, 8, 65), amplitude=0.05)


@pytest.fixture(scope="module")
def generic_sweep():
    return _run_sweep("generic-2d", (16, 16, 33))


def _oracle_checks(sweep):
    grid, pair, results = sweep["grid"], sweep["pair"], sweep["results"]
    ref = oracle_field(grid, pair.phi0[0], pair.phi1[0])
    c0 = [compare_fields(psi, ref).sup for _, psi, _ in results]
    final_speed = speed_variation(geodesic_speed(extract_path(results[-1][1])))
    return c0, final_speed


def _assert_oracle_agreement(sweep):
    results = sweep["results"]
    assert results.failure is None
    assert results[-1][0] == pytest.approx(1e-4)
    c0, speed_var = _oracle_checks(sweep)
    assert c0[-1] <= 5e-3, c0
    assert all(b < a for a, b in zip(c0, c0[1:])), c0
    assert speed_var <= 0.02, speed_var


def test_legendre_oracle_agreement_for_stated_cosine_amplitude():
    start = time.perf_counter()
    try:
        sweep = _run_sweep("xonly-cos", (64, 8, 65), amplitude=0.2)
    except AdmissibilityError as exc:
        pytest.fail(f"boundary data 0.2 cos(2 pi x) rejected as inadmissible: {exc}")
    _assert_oracle_agreement(sweep)
    assert time.perf_counter() - start < 600.0


def test_legendre_oracle_agreement_for_admissible_cosine_amplitude(xonly_sweep):
    start = time.perf_counter()
    _assert_oracle_agreement(xonly_sweep)
    assert xonly_sweep["elapsed"] + time.perf_counter() - start < 600.0


# ---------------------------------------------------------------------------
# uniform estimates across the eps sweep


@pytest.mark.parametrize("dataset", ["xonly_sweep", "generic_sweep"])
def test_top_hessian_eigenvalue_plateaus_while_determinant_degenerates(dataset, request):
    sweep = request.getfixturevalue(dataset)
    assert sweep["results"].failure is None
    rows = sweep["rows"]
    assert rows[-1].eps == pytest.approx(1e-4)
    plateau = plateau_test(rows, "sup_lambda1")
    det = det_tracking(rows)
    assert plateau.passed, plateau.as_json()
    assert det.passed, det.as_json()


@pytest.mark.parametrize("dataset", ["xonly_sweep", "generic_sweep"])
def test_half_holder_seminorm_stays_bounded(dataset, request):
    sweep = request.getfixturevalue(dataset)
    verdict = plateau_test(sweep["rows"], "holder")
    assert verdict.passed, verdict.as_json()


def test_sweeps_fit_desk_budget(xonly_sweep, generic_sweep):
    assert xonly_sweep["elapsed"] + generic_sweep["elapsed"] < 900.0
