import numpy as np
import pytest

from fmkt.errors import ValidationError
from fmkt.lp import (
    LinearProgram,
    active_kernel,
    available_kernels,
    set_kernel,
    solve_lp,
)


@pytest.fixture(autouse=True)
def restore_kernel():
    prev = active_kernel()
    yield
    set_kernel(prev)


def test_bounded_max():
    s = solve_lp(
        LinearProgram("max", np.array([1.0]), a_ub=np.array([[1.0]]), b_ub=np.array([1.0]))
    )
    assert s.status == "optimal"
    assert s.x[0] == pytest.approx(1.0, abs=1e-12)
    assert s.objective == pytest.approx(1.0, abs=1e-12)


def test_unbounded_with_ray():
    s = solve_lp(LinearProgram("max", np.array([1.0])))
    assert s.status == "unbounded"
    assert s.certificate[0] > 0.0  # improving direction


def test_infeasible_with_farkas_certificate():
    s = solve_lp(
        LinearProgram(
            "min", np.array([0.0]), a_ub=np.array([[1.0]]), b_ub=np.array([-1.0])
        )
    )
    assert s.status == "infeasible"
    y = s.certificate
    # Farkas: y.A <= 0 on the nonnegative variable, y.b > 0
    assert y[0] * 1.0 <= 1e-12
    assert y[0] * -1.0 > 1e-9


def test_infeasible_equalities_certificate():
    a_eq = np.array([[1.0, 1.0], [1.0, 1.0]])
    b_eq = np.array([1.0, 2.0])
    s = solve_lp(LinearProgram("min", np.zeros(2), a_eq=a_eq, b_eq=b_eq))
    assert s.status == "infeasible"
    y = s.certificate
    assert float(y @ b_eq) > 1e-9
    assert np.all(y @ a_eq <= 1e-9)


def test_free_variables():
    # min x + y with x free, y >= 0, x + y >= -3  ->  x = -3 at y = 0
    s = solve_lp(
        LinearProgram(
            "min",
            np.array([1.0, 1.0]),
            a_ub=np.array([[-1.0, -1.0]]),
            b_ub=np.array([3.0]),
            free=np.array([True, False]),
        )
    )
    assert s.status == "optimal"
    assert s.objective == pytest.approx(-3.0, abs=1e-9)


def test_nan_coefficient_rejected():
    with pytest.raises(ValidationError, match="non-finite"):
        solve_lp(LinearProgram("min", np.array([np.nan])))


def test_dimension_mismatch_rejected():
    with pytest.raises(ValidationError, match="columns"):
        solve_lp(
            LinearProgram(
                "min", np.array([1.0]), a_ub=np.array([[1.0, 2.0]]), b_ub=np.array([1.0])
            )
        )


def test_redundant_rows_get_zero_duals():
    a_eq = np.array([[1.0, 1.0], [2.0, 2.0]])
    b_eq = np.array([1.0, 2.0])
    s = solve_lp(LinearProgram("min", np.array([1.0, 2.0]), a_eq=a_eq, b_eq=b_eq))
    assert s.status == "optimal"
    assert s.objective == pytest.approx(1.0, abs=1e-9)
    dual = float(s.duals_eq @ b_eq)
    assert dual == pytest.approx(s.objective, abs=1e-7)


def test_beale_degenerate_cycle_terminates():
    # classic cycling instance for Dantzig's rule; Bland switch must finish it
    c = np.array([-0.75, 150.0, -0.02, 6.0])
    a_ub = np.array(
        [
            [0.25, -60.0, -0.04, 9.0],
            [0.5, -90.0, -0.02, 3.0],
            [0.0, 0.0, 1.0, 0.0],
        ]
    )
    b_ub = np.array([0.0, 0.0, 1.0])
    s = solve_lp(LinearProgram("min", c, a_ub=a_ub, b_ub=b_ub))
    assert s.status == "optimal"
    assert s.objective == pytest.approx(-0.05, abs=1e-9)


def _random_program(rng):
    n = int(rng.integers(2, 51))
    me = int(rng.integers(0, 4))
    mu = int(rng.integers(1, 8))
    x0 = rng.uniform(0.0, 2.0, n)
    a_eq = rng.normal(size=(me, n))
    b_eq = a_eq @ x0
    a_ub = rng.normal(size=(mu, n))
    b_ub = a_ub @ x0 + rng.uniform(0.0, 1.0, mu)
    a_ub = np.vstack([a_ub, np.eye(n)])
    b_ub = np.concatenate([b_ub, np.full(n, 10.0)])
    c = rng.normal(size=n)
    sense = "min" if rng.random() < 0.5 else "max"
    return LinearProgram(sense, c, a_eq, b_eq, a_ub, b_ub)


def test_strong_duality_on_500_random_programs():
    rng = np.random.default_rng(2024)
    for _ in range(500):
        p = _random_program(rng)
        s = solve_lp(p)
        assert s.status == "optimal"
        dual = float(p.b_eq @ s.duals_eq) + float(p.b_ub @ s.duals_ub)
        assert dual == pytest.approx(s.objective, rel=1e-7, abs=1e-7)
        # primal feasibility at the stated tolerance
        scale = 1.0 + float(np.abs(s.x).max())
        assert float(np.abs(p.a_eq @ s.x - p.b_eq).max(initial=0.0)) < 1e-9 * scale
        assert float((p.a_ub @ s.x - p.b_ub).max(initial=0.0)) < 1e-9 * scale
        assert float((-s.x).max(initial=0.0)) < 1e-9 * scale
        # complementary slackness on inequality rows
        slack = p.b_ub - p.a_ub @ s.x
        assert float(np.abs(slack * s.duals_ub).max()) < 1e-7 * (1 + abs(s.objective))


def test_determinism_same_bytes():
    rng = np.random.default_rng(5)
    p = _random_program(rng)
    s1 = solve_lp(p)
    s2 = solve_lp(p)
    assert np.array_equal(s1.x, s2.x)
    assert s1.objective == s2.objective
    assert s1.iterations == s2.iterations
    assert np.array_equal(s1.duals_eq, s2.duals_eq)
    assert np.array_equal(s1.duals_ub, s2.duals_ub)


@pytest.mark.skipif(
    "compiled" not in available_kernels(), reason="extension not built"
)
def test_kernels_take_identical_pivot_paths():
    rng = np.random.default_rng(77)
    for _ in range(60):
        p = _random_program(rng)
        set_kernel("python")
        s1 = solve_lp(p)
        set_kernel("compiled")
        s2 = solve_lp(p)
        assert s1.status == s2.status
        assert s1.iterations == s2.iterations
        assert np.array_equal(s1.x, s2.x)
        assert np.array_equal(s1.duals_ub, s2.duals_ub)


def test_duals_sign_convention():
    # max: inequality duals >= 0; min: <= 0
    p = LinearProgram(
        "max", np.array([1.0, 1.0]), a_ub=np.array([[1.0, 2.0]]), b_ub=np.array([2.0])
    )
    s = solve_lp(p)
    assert np.all(s.duals_ub >= -1e-12)
    p2 = LinearProgram(
        "min", np.array([-1.0, -1.0]), a_ub=np.array([[1.0, 2.0]]), b_ub=np.array([2.0])
    )
    s2 = solve_lp(p2)
    assert np.all(s2.duals_ub <= 1e-12)
