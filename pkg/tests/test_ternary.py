"""The ternary example: closed-form curve vs. evaluated candidates."""

import math

import numpy as np
import pytest

from cascade_secrecy.bounds import check_inner_constraints, eval_inner_tuple
from cascade_secrecy.ternary import (
    DEFAULT_GRID,
    LOG2_3,
    analytic_pi,
    corner_candidate,
    mixture_candidate,
    ternary_example,
    time_shared_candidate,
    verify_example,
    zero_key_candidate,
)

EX = ternary_example()


def test_payoff_support_is_the_distinct_triples():
    mask = EX.payoff.finite_mask
    for ix in range(3):
        for iy2 in range(3):
            for iy3 in range(3):
                assert mask[ix, iy2, iy3] == (len({ix, iy2, iy3}) == 3)
    # on the allowed triples the payoff is a pure guessing penalty
    vals = EX.payoff.values
    assert vals[0, 1, 2, 0] == 0.0 and vals[0, 1, 2, 1] == 1.0 and vals[0, 1, 2, 2] == 1.0


def test_analytic_curve_values():
    assert analytic_pi(0.0) == 0.0
    assert analytic_pi(0.5) == 0.25
    assert analytic_pi(1.0) == 0.5
    assert analytic_pi(1.2) == pytest.approx(0.5569837097117152, abs=1e-15)
    assert analytic_pi(LOG2_3) == pytest.approx(2.0 / 3.0, abs=1e-12)
    assert analytic_pi(7.0) == pytest.approx(2.0 / 3.0, abs=1e-15)
    with pytest.raises(ValueError):
        analytic_pi(-0.01)


def test_candidates_satisfy_all_constraints():
    for cand in (zero_key_candidate(), corner_candidate(1), corner_candidate(2)):
        report = check_inner_constraints(cand, p_x=EX.p_x)
        assert report.passed, str(report)


def test_corner_index_validation():
    with pytest.raises(ValueError):
        corner_candidate(3)


def test_mixture_weights_validation():
    c = corner_candidate(1)
    with pytest.raises(ValueError):
        mixture_candidate([(0.4, c), (0.4, zero_key_candidate())])
    with pytest.raises(ValueError):
        mixture_candidate([(0.0, c)])
    # a degenerate mixture is just the branch itself
    same = mixture_candidate([(1.0, c), (0.0, zero_key_candidate())])
    assert same is c


def test_mixture_is_linear_in_rates_and_payoff():
    rng = np.random.default_rng(20240817)
    zero = zero_key_candidate()
    one = corner_candidate(1)
    t_zero = eval_inner_tuple(zero, EX.side, EX.payoff, p_x=EX.p_x).as_array()
    t_one = eval_inner_tuple(one, EX.side, EX.payoff, p_x=EX.p_x).as_array()
    for _ in range(5):
        lam = float(rng.uniform(0.05, 0.95))
        mix = mixture_candidate([(1.0 - lam, zero), (lam, one)])
        report = check_inner_constraints(mix, p_x=EX.p_x)
        assert report.passed, str(report)
        got = eval_inner_tuple(mix, EX.side, EX.payoff, p_x=EX.p_x).as_array()
        want = (1.0 - lam) * t_zero + lam * t_one
        # R1 and R2 are not linear in general, but here both branches
        # share them; R0 and the payoff must interpolate exactly
        assert got[0] == pytest.approx(want[0], abs=1e-9)
        assert got[3] == pytest.approx(want[3], abs=1e-9)
        assert got[1] == pytest.approx(LOG2_3, abs=1e-9)
        assert got[2] == pytest.approx(LOG2_3 - 1.0, abs=1e-9)


def test_time_shared_endpoints_are_pure():
    t0 = eval_inner_tuple(time_shared_candidate(0.0), EX.side, EX.payoff, p_x=EX.p_x)
    assert t0.r0 == pytest.approx(0.0, abs=1e-12)
    assert t0.pi == pytest.approx(0.0, abs=1e-12)
    t_hi = eval_inner_tuple(time_shared_candidate(2.5), EX.side, EX.payoff, p_x=EX.p_x)
    assert t_hi.r0 == pytest.approx(LOG2_3, abs=1e-9)
    assert t_hi.pi == pytest.approx(2.0 / 3.0, abs=1e-9)
    with pytest.raises(ValueError):
        time_shared_candidate(-1.0)


def test_full_curve_verification():
    report = verify_example()
    assert report.determinism_ok
    assert report.passed
    assert len(report.rows) == len(DEFAULT_GRID)
    for row in report.rows:
        assert row.pi_evaluated == pytest.approx(row.pi_analytic, abs=1e-6)
        assert row.r0_evaluated <= min(row.r0, LOG2_3) + 1e-9
    c1, c2 = report.corner_tuples
    assert c1.pi == pytest.approx(0.5, abs=1e-9)
    assert c2.pi == pytest.approx(2.0 / 3.0, abs=1e-9)


def test_curve_on_a_dense_random_grid():
    rng = np.random.default_rng(7)
    grid = sorted(float(r) for r in rng.uniform(0.0, 2.0, size=8))
    report = verify_example(grid, tol=1e-9)
    assert report.passed
    # the curve is nondecreasing and concave on [0, log2 3]
    pis = [analytic_pi(r) for r in np.linspace(0, LOG2_3, 50)]
    assert all(b >= a - 1e-12 for a, b in zip(pis, pis[1:]))
    diffs = np.diff(pis)
    assert all(b <= a + 1e-12 for a, b in zip(diffs, diffs[1:]))


def test_key_rate_one_halves_the_guessing_error():
    # frozen oracle: at key rate 1 the adversary is reduced to a fair
    # coin flip between two source symbols
    t = eval_inner_tuple(corner_candidate(1), EX.side, EX.payoff, p_x=EX.p_x)
    assert math.isclose(t.pi, 0.5, abs_tol=1e-9)
    assert math.isclose(t.r0, 1.0, abs_tol=1e-9)
