"""Randomized-restart searches over the inner bound and the disclosure family.

The ternary worked example pins the search floor: its optimum at unit key
rate is exactly 1/2, reachable within the stated cardinality caps, so a
deterministic run must land there.  Binary Hamming configurations give the
equivocation search closed-form targets.
"""

import json
import math

import numpy as np
import pytest

from cascade_secrecy.bounds import (
    RatePayoffTuple,
    check_equivocation_membership,
    check_inner_constraints,
    equivocation_value,
    eval_inner_tuple,
)
from cascade_secrecy.payoff import PayoffTable
from cascade_secrecy.probability import Alphabet, Pmf
from cascade_secrecy.search import (
    CardinalityCaps,
    EquivocationProblem,
    InnerSearchProblem,
    RateBudget,
    SearchResult,
    equivocation_sweep,
    min_key_rate,
    search_equivocation,
    search_inner,
)
from cascade_secrecy.ternary import ternary_example

EX = ternary_example()
HAMMING = np.array([[0.0, 1.0], [1.0, 0.0]])


def ternary_problem(budget, caps=CardinalityCaps(u1=6, u2=3, v1=27, v2=9)):
    return InnerSearchProblem(
        p_x=EX.p_x, payoff=EX.payoff, side=EX.side, budget=budget, caps=caps
    )


def binary_equiv_problem(d_cap, r0):
    return EquivocationProblem(
        p_x=Pmf.uniform(Alphabet("X", 2)),
        secret_set=("X",),
        y2_alphabet=Alphabet("Y2", 2),
        y3_alphabet=Alphabet("Y3", 2),
        d1=HAMMING,
        d2=HAMMING,
        max_d1=d_cap,
        max_d2=d_cap,
        r0=r0,
        r1=1.0,
        r2=1.0,
        cap_v1=4,
        cap_v2=4,
    )


# ---------------------------------------------------------------------------
# input validation


def test_rate_budget_rejects_negative_and_nan():
    with pytest.raises(ValueError):
        RateBudget(-0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        RateBudget(1.0, math.nan, 1.0)
    b = RateBudget(0.0, math.inf, 2.0)
    assert b.r1 == math.inf


def test_cardinality_caps_reject_nonpositive():
    with pytest.raises(ValueError):
        CardinalityCaps(0, 1, 1, 1)
    with pytest.raises(ValueError):
        CardinalityCaps(1, 1, -2, 1)


def test_search_inner_rejects_zero_restarts():
    problem = ternary_problem(RateBudget(1.0, 1.6, 0.6))
    with pytest.raises(ValueError):
        search_inner(problem, restarts=0)


def test_equivocation_problem_validates_distortion_shape():
    with pytest.raises(ValueError):
        EquivocationProblem(
            p_x=Pmf.uniform(Alphabet("X", 2)),
            secret_set=("X",),
            y2_alphabet=Alphabet("Y2", 2),
            y3_alphabet=Alphabet("Y3", 2),
            d1=np.zeros((3, 2)),
            d2=HAMMING,
            max_d1=0.0,
            max_d2=0.0,
            r0=1.0,
            r1=1.0,
            r2=1.0,
            cap_v1=2,
            cap_v2=2,
        )


# ---------------------------------------------------------------------------
# inner search on the ternary example


def test_ternary_unit_key_reaches_half():
    # optimum 1/2 is reachable within caps; the balanced anchors make the
    # outcome independent of sampling luck
    problem = ternary_problem(RateBudget(1.0, 1.6, 0.6))
    res = search_inner(problem, restarts=16, seed=0)
    assert res.feasible
    assert res.tuple.pi >= 0.48
    assert res.tuple.r0 <= 1.0 + 1e-9
    assert res.tuple.r1 <= 1.6 + 1e-9
    assert res.tuple.r2 <= 0.6 + 1e-9
    # the witness re-evaluates to the reported tuple
    report = check_inner_constraints(res.candidate, p_x=EX.p_x, tol=1e-7)
    assert report.passed, str(report)
    again = eval_inner_tuple(res.candidate, EX.side, EX.payoff, check=False)
    assert abs(again.pi - res.tuple.pi) < 1e-9
    assert abs(again.r0 - res.tuple.r0) < 1e-9


def test_ternary_zero_key_payoff_is_zero():
    # the tradeoff curve starts at zero: everything public, adversary
    # guesses the source exactly
    problem = ternary_problem(
        RateBudget(0.0, 1.6, 0.6), caps=CardinalityCaps(6, 3, 9, 3)
    )
    res = search_inner(problem, restarts=8, seed=1)
    assert res.feasible
    assert 0.0 <= res.tuple.pi <= 1e-9
    assert res.tuple.r0 <= 1e-9


def test_single_cell_caps_infeasible_under_guarded_payoff():
    # with |V1| = 1 the actions cannot avoid the source symbol, and every
    # schedule hits a forbidden triple
    problem = ternary_problem(
        RateBudget(1.0, 1.6, 0.6), caps=CardinalityCaps(1, 1, 1, 1)
    )
    res = search_inner(problem, restarts=4, seed=0)
    assert not res.feasible
    assert res.candidate is None and res.tuple is None


def test_single_cell_caps_feasible_when_payoff_finite():
    # replacing -inf with a finite penalty re-opens the no-information
    # scheme: all rates zero, payoff = best blind value
    vals = np.where(np.isneginf(EX.payoff.values), -2.0, EX.payoff.values)
    payoff = PayoffTable(
        EX.payoff.x_alphabet,
        EX.payoff.y2_alphabet,
        EX.payoff.y3_alphabet,
        EX.payoff.z_alphabet,
        vals,
    )
    problem = InnerSearchProblem(
        p_x=EX.p_x,
        payoff=payoff,
        side=EX.side,
        budget=RateBudget(0.0, 0.0, 0.0),
        caps=CardinalityCaps(1, 1, 1, 1),
    )
    res = search_inner(problem, restarts=4, seed=0)
    px = EX.p_x.probs
    blind = max(
        min(float(px @ vals[:, y2, y3, z]) for z in range(3))
        for y2 in range(3)
        for y3 in range(3)
    )
    assert res.feasible
    assert abs(res.tuple.pi - blind) < 1e-9
    assert res.tuple.r0 <= 1e-12 and res.tuple.r1 <= 1e-12 and res.tuple.r2 <= 1e-12


def test_search_deterministic_across_worker_counts():
    problem = ternary_problem(
        RateBudget(1.0, 1.6, 0.6), caps=CardinalityCaps(6, 3, 9, 3)
    )
    blobs = []
    for workers in (1, 2):
        res = search_inner(problem, restarts=8, seed=3, workers=workers)
        obj = res.to_json()
        obj.pop("wall_time")
        blobs.append(json.dumps(obj, sort_keys=True))
    assert blobs[0] == blobs[1]


def test_search_result_json_uses_minus_inf_sentinel():
    res = SearchResult(
        feasible=True,
        tuple=RatePayoffTuple(0.0, 0.0, 0.0, -math.inf, True),
        candidate=None,
        seed=0,
        restarts=1,
        wall_time=0.0,
    )
    obj = res.to_json()
    assert obj["tuple"]["pi"] == "-inf"
    json.loads(json.dumps(obj))  # valid JSON end to end


def test_random_budgets_never_violate_rates():
    # whatever the search returns feasible must satisfy the budget under
    # independent re-evaluation
    rng = np.random.default_rng(20260816)
    for trial in range(4):
        budget = RateBudget(
            float(rng.uniform(0, 1.2)),
            float(rng.uniform(0.8, 2.0)),
            float(rng.uniform(0.3, 1.2)),
        )
        problem = ternary_problem(budget, caps=CardinalityCaps(6, 3, 9, 3))
        res = search_inner(
            problem, restarts=6, seed=trial, refine_top=6, enum_limit=0
        )
        if not res.feasible:
            continue
        report = check_inner_constraints(res.candidate, p_x=EX.p_x, tol=1e-6)
        assert report.passed, str(report)
        t = eval_inner_tuple(res.candidate, EX.side, EX.payoff, check=False)
        assert t.r0 <= budget.r0 + 1e-7
        assert t.r1 <= budget.r1 + 1e-7
        assert t.r2 <= budget.r2 + 1e-7
        assert abs(t.pi - res.tuple.pi) < 1e-9


def test_min_key_rate_brackets_the_curve():
    # the tradeoff is bounded above by half the key budget, so clearing
    # target 0.45 needs at least 0.9 bits; a unit key certainly suffices
    problem = ternary_problem(
        RateBudget(1.0, 1.6, 0.6), caps=CardinalityCaps(6, 3, 9, 3)
    )
    out = min_key_rate(problem, 0.45, tol=0.05, restarts=8, seed=0, refine_top=8)
    assert out.feasible
    assert 0.9 - 0.05 <= out.r0 <= 1.0
    assert out.result.tuple.pi >= 0.45
    assert out.evaluations >= 2


def test_min_key_rate_rejects_unreachable_target():
    problem = ternary_problem(
        RateBudget(1.0, 1.6, 0.6), caps=CardinalityCaps(6, 3, 9, 3)
    )
    out = min_key_rate(problem, 0.9, tol=0.05, restarts=4, seed=0)
    assert not out.feasible
    assert out.r0 is None


def test_min_key_rate_needs_finite_budget():
    problem = ternary_problem(RateBudget(math.inf, 1.6, 0.6))
    with pytest.raises(ValueError):
        min_key_rate(problem, 0.4)


# ---------------------------------------------------------------------------
# equivocation search on binary Hamming configurations


def test_equivocation_zero_distortion_unit_key():
    # zero distortion forces the actions onto the source; a full key
    # re-hides the necessary disclosure
    res = search_equivocation(binary_equiv_problem(0.0, 1.0), restarts=16, seed=0)
    assert res.feasible
    assert abs(res.value - 1.0) < 1e-6


def test_equivocation_zero_distortion_no_key():
    res = search_equivocation(binary_equiv_problem(0.0, 0.0), restarts=16, seed=0)
    assert res.feasible
    assert abs(res.value - 0.0) < 1e-6


def test_equivocation_vacuous_distortion_no_key():
    # fair-coin actions meet distortion 1/2 while revealing nothing
    res = search_equivocation(binary_equiv_problem(0.5, 0.0), restarts=16, seed=0)
    assert res.feasible
    assert abs(res.value - 1.0) < 1e-6


def test_equivocation_witness_is_a_family_member():
    res = search_equivocation(binary_equiv_problem(0.0, 1.0), restarts=16, seed=0)
    report = check_equivocation_membership(
        res.candidate, p_x=Pmf.uniform(Alphabet("X", 2)), tol=1e-7
    )
    assert report.passed, str(report)
    direct = equivocation_value(res.candidate, ("X",), 1.0, check=False)
    assert abs(direct - res.value) < 1e-9


def test_equivocation_infeasible_distortion():
    # demanding better-than-zero Hamming distortion cannot be met
    prob = binary_equiv_problem(-0.25, 1.0)
    res = search_equivocation(prob, restarts=8, seed=0)
    assert not res.feasible


def test_equivocation_sweep_monotone():
    grid = [i * 1.25 / 19 for i in range(20)]
    pts = equivocation_sweep(binary_equiv_problem(0.0, 0.0), grid, restarts=8, seed=0)
    vals = [p.value for p in pts]
    assert len(vals) == 20
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    assert abs(vals[0] - 0.0) < 1e-6
    assert abs(vals[-1] - 1.0) < 1e-6


def test_equivocation_deterministic_across_worker_counts():
    blobs = []
    for workers in (1, 2):
        res = search_equivocation(
            binary_equiv_problem(0.5, 0.25), restarts=12, seed=5, workers=workers
        )
        obj = res.to_json()
        obj.pop("wall_time")
        blobs.append(json.dumps(obj, sort_keys=True))
    assert blobs[0] == blobs[1]
