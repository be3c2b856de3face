"""Newton solver: convergence, oracle accuracy, minimizer verification,
and the gradient-norm bound for the remainder."""

import dataclasses
import json
import math

import numpy as np
import pytest

from blowup.energy import (
    ExponentOverflowError,
    build_singular_part,
    energy,
    energy_gap,
)
from blowup.geometry import Box, Disk, default_profile
from blowup.grid import Grid, ScalarField
from blowup.solver import (
    LineSearchError,
    SolveReport,
    SolverConfig,
    _pcg,
    corollary4_check,
    disk_exact_solution,
    liouville_residual,
    oracle_errors,
    solve,
    verify_minimizer,
)

DISK = Disk((0.0, 0.0), 1.0)


@pytest.fixture(scope="module")
def disk64():
    grid = Grid(DISK, 1 / 64)
    sp = build_singular_part(DISK, default_profile(DISK), grid)
    report = solve(DISK, default_profile(DISK), grid, singular_part=sp)
    return grid, sp, report


@pytest.fixture(scope="module")
def disk128():
    grid = Grid(DISK, 1 / 128)
    sp = build_singular_part(DISK, default_profile(DISK), grid)
    report = solve(DISK, default_profile(DISK), grid, singular_part=sp)
    return grid, sp, report


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(gradient_tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(linear_rtol=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(backtrack_ratio=1.0)
    with pytest.raises(ValueError):
        SolverConfig(armijo_c=1.5)
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=0)
    with pytest.raises(ValueError):
        SolverConfig(preconditioner="ilu")


def test_initial_guess_shape_rejected():
    grid = Grid(DISK, 1 / 16)
    with pytest.raises(ValueError):
        solve(DISK, default_profile(DISK), grid, initial_guess=np.zeros(3))


# ---------------------------------------------------------------------------
# convergence basics
# ---------------------------------------------------------------------------


def test_disk_solve_converges(disk64):
    _, _, rep = disk64
    assert rep.converged
    assert rep.final_grad_norm <= SolverConfig().gradient_tol
    assert rep.iterations >= 2


def test_energy_history_strictly_decreasing(disk64):
    _, _, rep = disk64
    hist = rep.energy_history
    assert hist[0] == 0.0
    assert all(b < a for a, b in zip(hist, hist[1:]))


def test_energy_negative_when_residual_nonzero(disk64):
    _, _, rep = disk64
    assert rep.energy_history[-1] < 0.0


def test_every_step_reported(disk64):
    _, _, rep = disk64
    assert len(rep.steps) == rep.iterations
    for s in rep.steps:
        assert s["cg_iterations"] >= 1
        assert 0.0 < s["step_scale"] <= 1.0


def test_not_converged_within_one_iteration():
    grid = Grid(DISK, 1 / 32)
    cfg = SolverConfig(max_iterations=1)
    rep = solve(DISK, default_profile(DISK), grid, cfg)
    assert not rep.converged
    assert rep.iterations == 1


def test_overflowing_initial_guess_raises():
    grid = Grid(DISK, 1 / 16)
    with pytest.raises(ExponentOverflowError):
        solve(
            DISK,
            default_profile(DISK),
            grid,
            initial_guess=np.full(grid.n_interior, 400.0),
        )


# ---------------------------------------------------------------------------
# oracle accuracy
# ---------------------------------------------------------------------------


def test_disk_oracle_sup_error(disk128):
    _, _, rep = disk128
    assert rep.oracle is not None
    assert rep.oracle["sup_error"] < 5e-3
    assert rep.oracle["l2_error"] < rep.oracle["sup_error"] * 10
    assert rep.oracle["excluded_layer_width"] == 0.05


def test_oracle_error_shrinks_under_refinement(disk64, disk128):
    _, _, r64 = disk64
    _, _, r128 = disk128
    assert r128.oracle["sup_error"] < r64.oracle["sup_error"] / 1.5


def test_exact_solution_general_disk():
    # u = -ln((R^2 - rho^2)/R) solves -Lap u + 4 e^{2u} = 0 for any radius;
    # check by a tight central stencil at off-center sample points
    disk = Disk((1.0, -0.5), 2.0)
    u = disk_exact_solution(disk)
    eps = 1e-4
    for p in [(1.0, -0.5), (2.1, 0.3), (0.2, -1.1)]:
        p = np.array(p)
        lap = (
            u(p + [eps, 0]) + u(p - [eps, 0]) + u(p + [0, eps]) + u(p - [0, eps]) - 4 * u(p)
        ) / eps**2
        assert abs(-lap + 4 * math.exp(2 * u(p))) < 1e-5


def test_oracle_absent_off_disk():
    box = Box((0.0, 0.0), (1.0, 1.0))
    rep = solve(box, default_profile(box), Grid(box, 1 / 32))
    assert rep.converged
    assert rep.oracle is None


def test_oracle_region_helper(disk64):
    grid, _, rep = disk64
    out = oracle_errors(rep.u, DISK, region_depth=0.3)
    assert out["nodes_compared"] < grid.n_interior
    assert out["sup_error"] <= rep.oracle["sup_error"]


# ---------------------------------------------------------------------------
# remainder structure
# ---------------------------------------------------------------------------


def test_remainder_is_order_of_distance(disk64, disk128):
    ratios = []
    for grid, sp, rep in (disk64, disk128):
        ratios.append(float(np.max(np.abs(rep.w.values) / sp.d.values)))
    assert ratios[0] < 1.0 and ratios[1] < 1.0
    assert abs(ratios[1] - ratios[0]) < 0.05 * ratios[0]


def test_radial_symmetry_under_quarter_turns(disk64):
    grid, _, rep = disk64
    idx = np.argwhere(grid.interior_mask)
    ai = idx[:, 0] + grid.i0
    aj = idx[:, 1] + grid.j0
    ri = -aj - grid.i0
    rj = ai - grid.j0
    assert (ri >= 0).all() and (ri < grid.nx).all()
    assert (rj >= 0).all() and (rj < grid.ny).all()
    target = grid.index[ri, rj]
    assert (target >= 0).all()
    assert np.max(np.abs(rep.w.values - rep.w.values[target])) < 1e-7


def test_uniqueness_from_random_starts():
    grid = Grid(DISK, 1 / 32)
    sp = build_singular_part(DISK, default_profile(DISK), grid)
    rng = np.random.default_rng(7)
    taper = np.minimum(grid.delta, 0.3)
    sols = []
    for _ in range(2):
        guess = 0.01 * rng.standard_normal(grid.n_interior) * taper
        rep = solve(DISK, default_profile(DISK), grid, singular_part=sp, initial_guess=guess)
        assert rep.converged
        sols.append(rep.w.values)
    assert np.max(np.abs(sols[0] - sols[1])) < 10 * SolverConfig().linear_rtol


# ---------------------------------------------------------------------------
# degenerate forcing
# ---------------------------------------------------------------------------


def test_zero_residual_gives_zero_remainder(disk64):
    grid, sp, _ = disk64
    quiet = dataclasses.replace(sp, r=ScalarField.zeros(grid))
    rep = solve(DISK, default_profile(DISK), grid, singular_part=quiet)
    assert rep.converged
    assert rep.iterations == 0
    assert np.all(rep.w.values == 0.0)
    out = corollary4_check(rep, quiet, 2.0)
    assert out["lhs"] == 0.0
    assert out["pass"]


# ---------------------------------------------------------------------------
# minimizer verification
# ---------------------------------------------------------------------------


def test_verify_minimizer_all_gaps_nonnegative(disk64):
    _, sp, rep = disk64
    verify_minimizer(rep, sp, trials=25, seed=3)
    v = rep.verification
    assert v["passed"]
    assert v["failures"] == 0
    assert v["worst_gap"] >= -1e-8
    assert v["worst_identity_rel"] < 1e-6


def test_gap_vanishes_only_with_amplitude(disk64):
    grid, sp, rep = disk64
    rng = np.random.default_rng(11)
    shape = rng.standard_normal(grid.n_interior) * np.minimum(grid.delta, 0.3)
    shape /= np.max(np.abs(shape))
    gaps = []
    for amp in (1e-1, 1e-2, 1e-3):
        lhs, _ = energy_gap(ScalarField(grid, amp * shape), rep.w, sp)
        gaps.append(lhs)
    assert gaps[0] > gaps[1] > gaps[2] > 0.0


def test_restoring_zero_perturbation(disk64):
    # phi = -w brings the field back to zero, where the energy is 0
    grid, sp, rep = disk64
    e_w = energy(rep.w, sp).total
    phi = ScalarField(grid, -rep.w.values)
    lhs, rhs = energy_gap(phi, rep.w, sp)
    assert abs(lhs - (0.0 - e_w)) < 1e-12
    assert lhs > 0.0


# ---------------------------------------------------------------------------
# gradient-norm bound of the remainder
# ---------------------------------------------------------------------------


def test_corollary_bound_on_disk(disk64):
    _, sp, rep = disk64
    out = corollary4_check(rep, sp, 2.0)
    assert out["pass"]
    assert out["lhs"] > 0.0
    assert out["margin"] > 0.0
    assert rep.corollary4 == out


def test_intermediate_forcing_bound(disk64):
    # -sum 2 r phi h^2 <= K |grad phi| with K = 2 H |Lap d|, spot-checked
    # on seeded random Dirichlet fields
    grid, sp, _ = disk64
    H = 2.0
    K = 2.0 * H * math.sqrt(float(np.sum(sp.delta_d.values**2)) * grid.h**2)
    rng = np.random.default_rng(5)
    for _ in range(20):
        phi = rng.standard_normal(grid.n_interior) * np.minimum(grid.delta, 0.3)
        lhs = -2.0 * float(np.sum(sp.r.values * phi)) * grid.h**2
        rhs = K * math.sqrt(grid.dirichlet_energy(phi))
        assert lhs <= rhs


# ---------------------------------------------------------------------------
# pointwise equation defect
# ---------------------------------------------------------------------------


def test_lattice_mode_defect_tracks_tolerance():
    grid = Grid(DISK, 1 / 48)
    sp = build_singular_part(
        DISK, default_profile(DISK), grid, residual_mode="lattice"
    )
    maxima = []
    for tol in (1e-4, 1e-10):
        rep = solve(
            DISK,
            default_profile(DISK),
            grid,
            SolverConfig(gradient_tol=tol),
            singular_part=sp,
        )
        maxima.append(liouville_residual(rep, sp)["max_weighted_residual"])
    assert maxima[1] < maxima[0] / 100.0
    assert maxima[1] < 1e-9


def test_continuum_mode_defect_floor_is_bounded(disk64):
    grid, sp, rep = disk64
    out = liouville_residual(rep, sp)
    assert out["residual_mode"] == "continuum"
    # rim floor from the stencil truncation of the log profile
    assert out["max_weighted_residual"] < 1.0
    # away from the rim only the profile-blend truncation remains
    assert out["max_weighted_residual_deep"] < 0.1
    # the energy gradient itself is at solver tolerance
    assert out["max_weighted_gradient"] < 1e-7


# ---------------------------------------------------------------------------
# linear solver
# ---------------------------------------------------------------------------


def test_pcg_deterministic_and_accurate():
    rng = np.random.default_rng(0)
    n = 80
    m = rng.standard_normal((n, n))
    a = m @ m.T + n * np.eye(n)
    b = rng.standard_normal(n)
    apply_op = lambda x: a @ x
    x1, it1, res1 = _pcg(apply_op, b, 1e-10, 500)
    x2, it2, res2 = _pcg(apply_op, b, 1e-10, 500)
    assert it1 == it2
    assert np.array_equal(x1, x2)
    assert np.linalg.norm(a @ x1 - b) <= 1e-9 * np.linalg.norm(b)


def test_pcg_zero_rhs():
    x, it, res = _pcg(lambda x: 2.0 * x, np.zeros(5), 1e-8, 50)
    assert np.all(x == 0.0) and it == 0 and res == 0.0


def test_jacobi_preconditioner_agrees():
    grid = Grid(DISK, 1 / 32)
    sp = build_singular_part(DISK, default_profile(DISK), grid)
    rep_a = solve(DISK, default_profile(DISK), grid, SolverConfig(), singular_part=sp)
    rep_b = solve(
        DISK,
        default_profile(DISK),
        grid,
        SolverConfig(preconditioner="jacobi"),
        singular_part=sp,
    )
    assert np.max(np.abs(rep_a.w.values - rep_b.w.values)) < 1e-7


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------


def test_report_serializes(disk64):
    _, sp, rep = disk64
    corollary4_check(rep, sp, 2.0)
    verify_minimizer(rep, sp, trials=3)
    payload = rep.to_json_dict()
    text = json.dumps(payload, sort_keys=True)
    assert "energy_history" in payload
    assert payload["converged"] is True
    assert json.loads(text)["oracle"]["sup_error"] == rep.oracle["sup_error"]


def test_line_search_error_carries_diagnostics():
    err = LineSearchError("no decrease", {"iteration": 3, "grad_norm": 1.0})
    assert err.diagnostics["iteration"] == 3
