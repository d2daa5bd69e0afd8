"""Candidate joints for the cascade secrecy region, their constraint
checks, and rate/payoff evaluation.

A candidate is a joint distribution over the source X, the two actions
Y2 and Y3, and auxiliary variables, together with a role map saying
which joint variables play which part.  Roles may name groups of
variables (flattened row-major in the listed order), so composite
auxiliaries can be kept as separate axes or packed into product
alphabets, whichever is convenient.

Outer-bound candidates carry one public auxiliary U; inner (achievable)
candidates refine it into the superposition pair U1, U2.  Evaluation
produces the rate/payoff tuple

    R0 = I(W ; V1 | U)     key rate
    R1 = I(X ; V1)         first-hop message rate
    R2 = I(X ; V2)         second-hop message rate
    Pi = adversary value when the adversary observes U,

where the side information W = (W1, W2, W3) is adjoined through the
per-coordinate disclosure channels acting on X, Y2, Y3 respectively.
Inner candidates evaluate with U := U1.  Rate constraints are reported
at these boundary values; where the achievability argument needs strict
inequalities, the closure is what the evaluator returns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .payoff import LogLossPayoff, PayoffTable, adversary_value
from .probability import (
    Alphabet,
    Channel,
    JointDistribution,
    Pmf,
    attach_channel,
    conditional_entropy,
    conditional_mutual_information,
    entropy,
    channel_from_json,
    channel_to_json,
    joint_from_json,
    joint_to_json,
    marginalize,
)

__all__ = [
    "SideInfoSpec",
    "OuterCandidate",
    "InnerCandidate",
    "EquivocationCandidate",
    "RatePayoffTuple",
    "ConstraintCheck",
    "ConstraintReport",
    "ConstraintViolationError",
    "check_outer_constraints",
    "check_inner_constraints",
    "check_equivocation_membership",
    "eval_outer_tuple",
    "eval_inner_tuple",
    "equivocation_value",
    "inner_to_outer",
    "candidate_to_json",
    "outer_candidate_from_json",
    "inner_candidate_from_json",
    "equivocation_candidate_from_json",
    "side_info_to_json",
    "side_info_from_json",
]

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class SideInfoSpec:
    """Per-coordinate disclosure channels feeding the adversary.

    The three channels act memorylessly and independently on X, Y2 and
    Y3 respectively; their outputs form the disclosed tuple W.
    """

    ch1: Channel
    ch2: Channel
    ch3: Channel

    def __post_init__(self) -> None:
        for tag, ch in (("ch1", self.ch1), ("ch2", self.ch2), ("ch3", self.ch3)):
            if len(ch.input_alphabets) != 1:
                raise ValueError(f"{tag} must be a single-input channel")

    @staticmethod
    def identity(x: Alphabet, y2: Alphabet, y3: Alphabet) -> "SideInfoSpec":
        """Full causal disclosure: the adversary sees the triple itself."""
        return SideInfoSpec(
            Channel.identity(x, "W1"),
            Channel.identity(y2, "W2"),
            Channel.identity(y3, "W3"),
        )

    @staticmethod
    def blank(x: Alphabet, y2: Alphabet, y3: Alphabet) -> "SideInfoSpec":
        """No disclosure: every channel output is a constant."""
        point = Pmf(Alphabet("W", 1, ("*",)), np.ones(1))
        return SideInfoSpec(
            Channel.constant((x,), point),
            Channel.constant((y2,), point),
            Channel.constant((y3,), point),
        )


@dataclass(frozen=True)
class RatePayoffTuple:
    """Evaluated (R0, R1, R2, Pi) with the forbidden-event flag."""

    r0: float
    r1: float
    r2: float
    pi: float
    forbidden: bool = False

    def as_array(self) -> np.ndarray:
        return np.array([self.r0, self.r1, self.r2, self.pi])


@dataclass(frozen=True)
class ConstraintCheck:
    """One verified condition: measured value against its tolerance."""

    name: str
    kind: str  # "markov" | "determinism" | "marginal" | "structural"
    value: float
    tol: float
    passed: bool


@dataclass(frozen=True)
class ConstraintReport:
    checks: tuple[ConstraintCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> tuple[ConstraintCheck, ...]:
        return tuple(c for c in self.checks if not c.passed)

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            mark = "pass" if c.passed else "FAIL"
            lines.append(f"[{mark}] {c.name}: {c.value:.3e} (tol {c.tol:.1e})")
        return "\n".join(lines)


class ConstraintViolationError(ValueError):
    """A candidate failed its structural checks; carries the report."""

    def __init__(self, report: ConstraintReport):
        self.report = report
        super().__init__(
            "candidate violates structural constraints:\n" + str(report)
        )


def _roles_tuple(value: str | Iterable[str]) -> tuple[str, ...]:
    return (value,) if isinstance(value, str) else tuple(value)


def _validate_roles(joint: JointDistribution, roles: dict[str, tuple[str, ...]]) -> None:
    for role, names in roles.items():
        if not names:
            raise ValueError(f"role {role} must name at least one variable")
        for n in names:
            joint.axis(n)  # raises with the unknown name
    for a, b in (("x", "y2"), ("x", "y3"), ("y2", "y3")):
        if set(roles[a]) & set(roles[b]):
            raise ValueError(f"roles {a} and {b} share variables")


@dataclass(frozen=True)
class OuterCandidate:
    """Converse-side candidate: joint over (X, Y2, Y3, U, V1, V2)."""

    joint: JointDistribution
    x: str | tuple[str, ...] = "X"
    y2: str | tuple[str, ...] = "Y2"
    y3: str | tuple[str, ...] = "Y3"
    u: str | tuple[str, ...] = "U"
    v1: str | tuple[str, ...] = "V1"
    v2: str | tuple[str, ...] = "V2"

    def __post_init__(self) -> None:
        for role in ("x", "y2", "y3", "u", "v1", "v2"):
            object.__setattr__(self, role, _roles_tuple(getattr(self, role)))
        _validate_roles(
            self.joint,
            {r: getattr(self, r) for r in ("x", "y2", "y3", "u", "v1", "v2")},
        )


@dataclass(frozen=True)
class InnerCandidate:
    """Achievability-side candidate: joint over (X, Y2, Y3, U1, U2, V1, V2)."""

    joint: JointDistribution
    x: str | tuple[str, ...] = "X"
    y2: str | tuple[str, ...] = "Y2"
    y3: str | tuple[str, ...] = "Y3"
    u1: str | tuple[str, ...] = "U1"
    u2: str | tuple[str, ...] = "U2"
    v1: str | tuple[str, ...] = "V1"
    v2: str | tuple[str, ...] = "V2"

    def __post_init__(self) -> None:
        for role in ("x", "y2", "y3", "u1", "u2", "v1", "v2"):
            object.__setattr__(self, role, _roles_tuple(getattr(self, role)))
        _validate_roles(
            self.joint,
            {r: getattr(self, r) for r in ("x", "y2", "y3", "u1", "u2", "v1", "v2")},
        )


@dataclass(frozen=True)
class EquivocationCandidate:
    """Log-loss disclosure candidate: joint over (X, Y2, Y3, V1, V2)."""

    joint: JointDistribution
    x: str | tuple[str, ...] = "X"
    y2: str | tuple[str, ...] = "Y2"
    y3: str | tuple[str, ...] = "Y3"
    v1: str | tuple[str, ...] = "V1"
    v2: str | tuple[str, ...] = "V2"

    def __post_init__(self) -> None:
        for role in ("x", "y2", "y3", "v1", "v2"):
            object.__setattr__(self, role, _roles_tuple(getattr(self, role)))
        _validate_roles(
            self.joint,
            {r: getattr(self, r) for r in ("x", "y2", "y3", "v1", "v2")},
        )


def _minus(a: tuple[str, ...], b: Iterable[str]) -> tuple[str, ...]:
    bs = set(b)
    return tuple(n for n in a if n not in bs)


def _cmi(dist, a, b, given) -> float:
    """I(a ; b | given) tolerating role overlaps with the conditioner."""
    a, b = _minus(tuple(a), given), _minus(tuple(b), given)
    if not a or not b:
        return 0.0
    return conditional_mutual_information(dist, a, b, given)


def _cond_ent(dist, targets, given) -> float:
    """H(targets | given) tolerating role overlaps with the conditioner."""
    t = _minus(tuple(targets), given)
    return conditional_entropy(dist, t, given) if t else 0.0


def _mi_groups(dist, a, b) -> float:
    """I(a ; b) tolerating shared variables between the two groups."""
    a = tuple(dict.fromkeys(a))
    b = tuple(dict.fromkeys(b))
    union = tuple(dict.fromkeys(a + b))
    value = entropy(dist, a) + entropy(dist, b) - entropy(dist, union)
    return max(0.0, value)


def _x_marginal_check(joint, x_vars, p_x, tol) -> ConstraintCheck:
    m = marginalize(joint, x_vars)
    table = np.transpose(m.table, [m.names.index(n) for n in x_vars]).reshape(-1)
    gap = float(np.abs(table - p_x.probs).max())
    return ConstraintCheck("x marginal matches the source law", "marginal", gap, tol, gap <= tol)


def _common_chain_checks(joint, x, y2, y3, v1, v2, tol) -> list[ConstraintCheck]:
    m1 = _cmi(joint, x, y2, v1)
    m2 = _cmi(joint, tuple(x) + tuple(v1) + tuple(y2), y3, v2)
    return [
        ConstraintCheck("x -- v1 -- y2 chain", "markov", m1, tol, m1 <= tol),
        ConstraintCheck("(x,v1,y2) -- v2 -- y3 chain", "markov", m2, tol, m2 <= tol),
    ]


def check_outer_constraints(
    cand: OuterCandidate,
    *,
    tol: float = DEFAULT_TOL,
    p_x: Pmf | None = None,
) -> ConstraintReport:
    """Verify the converse-side structural constraints.

    The side-information factorization cannot be violated here because W
    only ever enters through :func:`eval_outer_tuple` attaching the
    per-coordinate channels, so it is reported as a structural given.
    """
    joint = cand.joint
    checks: list[ConstraintCheck] = []
    if p_x is not None:
        checks.append(_x_marginal_check(joint, cand.x, p_x, tol))
    checks.extend(_common_chain_checks(joint, cand.x, cand.y2, cand.y3, cand.v1, cand.v2, tol))
    det = _cond_ent(joint, tuple(cand.v2) + tuple(cand.u), cand.v1)
    checks.append(
        ConstraintCheck("(v2, u) determined by v1", "determinism", det, tol, det <= tol)
    )
    checks.append(
        ConstraintCheck(
            "side information enters only through per-coordinate channels",
            "structural",
            0.0,
            tol,
            True,
        )
    )
    return ConstraintReport(tuple(checks))


def check_inner_constraints(
    cand: InnerCandidate,
    *,
    tol: float = DEFAULT_TOL,
    p_x: Pmf | None = None,
) -> ConstraintReport:
    """Verify the achievability-side structural constraints (U := U1)."""
    joint = cand.joint
    checks: list[ConstraintCheck] = []
    if p_x is not None:
        checks.append(_x_marginal_check(joint, cand.x, p_x, tol))
    checks.extend(_common_chain_checks(joint, cand.x, cand.y2, cand.y3, cand.v1, cand.v2, tol))
    det1 = _cond_ent(joint, tuple(cand.v2) + tuple(cand.u1), cand.v1)
    det2 = _cond_ent(joint, cand.u2, cand.u1)
    det3 = _cond_ent(joint, cand.u2, cand.v2)
    chain = _cmi(joint, cand.u1, cand.v2, cand.u2)
    checks.extend(
        [
            ConstraintCheck("(v2, u1) determined by v1", "determinism", det1, tol, det1 <= tol),
            ConstraintCheck("u2 determined by u1", "determinism", det2, tol, det2 <= tol),
            ConstraintCheck("u2 determined by v2", "determinism", det3, tol, det3 <= tol),
            ConstraintCheck("u1 -- u2 -- v2 chain", "markov", chain, tol, chain <= tol),
        ]
    )
    checks.append(
        ConstraintCheck(
            "side information enters only through per-coordinate channels",
            "structural",
            0.0,
            tol,
            True,
        )
    )
    return ConstraintReport(tuple(checks))


def check_equivocation_membership(
    cand: EquivocationCandidate,
    *,
    tol: float = DEFAULT_TOL,
    p_x: Pmf | None = None,
) -> ConstraintReport:
    """Verify membership in the log-loss disclosure family."""
    joint = cand.joint
    checks: list[ConstraintCheck] = []
    if p_x is not None:
        checks.append(_x_marginal_check(joint, cand.x, p_x, tol))
    checks.extend(_common_chain_checks(joint, cand.x, cand.y2, cand.y3, cand.v1, cand.v2, tol))
    det = _cond_ent(joint, cand.v2, cand.v1)
    checks.append(ConstraintCheck("v2 determined by v1", "determinism", det, tol, det <= tol))
    return ConstraintReport(tuple(checks))


def _fresh_names(joint: JointDistribution, wanted: Sequence[str]) -> list[str]:
    names = []
    taken = set(joint.names)
    for w in wanted:
        n = w
        while n in taken:
            n = "_" + n
        taken.add(n)
        names.append(n)
    return names


def _attach_side_info(
    joint: JointDistribution,
    side: SideInfoSpec,
    x: tuple[str, ...],
    y2: tuple[str, ...],
    y3: tuple[str, ...],
) -> tuple[JointDistribution, tuple[str, str, str]]:
    """Adjoin the disclosure tuple W = (W1, W2, W3) and return its names.

    The per-coordinate channels take single inputs, so multi-variable
    roles are first packed into an identity-copied product variable.
    """
    w1, w2, w3 = _fresh_names(joint, ("W1", "W2", "W3"))
    for names, ch, w in ((x, side.ch1, w1), (y2, side.ch2, w2), (y3, side.ch3, w3)):
        if len(names) != 1:
            raise ValueError(
                f"side-information channels need single-variable roles, got {names}"
            )
        joint = attach_channel(joint, ch, names[0], w)
    return joint, (w1, w2, w3)


def _duplicate_overlap(
    joint: JointDistribution, role: tuple[str, ...], observation: set[str]
) -> tuple[JointDistribution, tuple[str, ...]]:
    """Copy role variables that also sit in the observation set.

    The adversary's posterior over (X, Y2, Y3) is well defined even when
    the observed auxiliary literally contains one of those variables;
    identity copies keep the groups disjoint for the evaluator.
    """
    out = []
    for n in role:
        if n in observation:
            (copy_name,) = _fresh_names(joint, (n + "_dup",))
            joint = attach_channel(joint, Channel.identity(joint.alphabet(n)), n, copy_name)
            out.append(copy_name)
        else:
            out.append(n)
    return joint, tuple(out)


def _evaluate_tuple(
    joint: JointDistribution,
    side: SideInfoSpec,
    payoff: PayoffTable | LogLossPayoff,
    x: tuple[str, ...],
    y2: tuple[str, ...],
    y3: tuple[str, ...],
    u: tuple[str, ...],
    v1: tuple[str, ...],
    v2: tuple[str, ...],
) -> RatePayoffTuple:
    triple = tuple(dict.fromkeys(x + y2 + y3))
    r1 = _mi_groups(marginalize(joint, tuple(dict.fromkeys(x + v1))), x, v1)
    r2 = _mi_groups(marginalize(joint, tuple(dict.fromkeys(x + v2))), x, v2)

    small = marginalize(joint, tuple(dict.fromkeys(triple + u + v1)))
    with_w, w_names = _attach_side_info(small, side, x, y2, y3)
    r0 = _cmi(with_w, w_names, v1, u)

    obs = marginalize(joint, tuple(dict.fromkeys(triple + u)))
    obs, x_eff = _duplicate_overlap(obs, x, set(u))
    obs, y2_eff = _duplicate_overlap(obs, y2, set(u))
    obs, y3_eff = _duplicate_overlap(obs, y3, set(u))
    adv = adversary_value(obs, u, payoff, x=x_eff, y2=y2_eff, y3=y3_eff)
    return RatePayoffTuple(r0, r1, r2, adv.value, adv.forbidden)


def eval_outer_tuple(
    cand: OuterCandidate,
    side: SideInfoSpec,
    payoff: PayoffTable | LogLossPayoff,
    *,
    check: bool = True,
    tol: float = DEFAULT_TOL,
    p_x: Pmf | None = None,
) -> RatePayoffTuple:
    """Rates and adversary payoff achieved by an outer candidate."""
    if check:
        report = check_outer_constraints(cand, tol=tol, p_x=p_x)
        if not report.passed:
            raise ConstraintViolationError(report)
    return _evaluate_tuple(
        cand.joint, side, payoff, cand.x, cand.y2, cand.y3, cand.u, cand.v1, cand.v2
    )


def eval_inner_tuple(
    cand: InnerCandidate,
    side: SideInfoSpec,
    payoff: PayoffTable | LogLossPayoff,
    *,
    check: bool = True,
    tol: float = DEFAULT_TOL,
    p_x: Pmf | None = None,
) -> RatePayoffTuple:
    """Rates and adversary payoff achieved by an inner candidate (U := U1)."""
    if check:
        report = check_inner_constraints(cand, tol=tol, p_x=p_x)
        if not report.passed:
            raise ConstraintViolationError(report)
    return _evaluate_tuple(
        cand.joint, side, payoff, cand.x, cand.y2, cand.y3, cand.u1, cand.v1, cand.v2
    )


def inner_to_outer(cand: InnerCandidate) -> OuterCandidate:
    """Reinterpret an inner candidate as an outer one with U := U1.

    Variables used only by the U2 role are marginalized away; shared
    variables stay.  The evaluated tuple is unchanged because none of
    the four coordinates involves U2.
    """
    keep_roles = cand.x + cand.y2 + cand.y3 + cand.u1 + cand.v1 + cand.v2
    keep = tuple(dict.fromkeys(keep_roles))
    joint = cand.joint if set(keep) == set(cand.joint.names) else marginalize(cand.joint, keep)
    return OuterCandidate(
        joint, x=cand.x, y2=cand.y2, y3=cand.y3, u=cand.u1, v1=cand.v1, v2=cand.v2
    )


def equivocation_value(
    cand: EquivocationCandidate,
    secret_set: Sequence[str],
    r0: float,
    *,
    check: bool = True,
    tol: float = DEFAULT_TOL,
    p_x: Pmf | None = None,
) -> float:
    """Best attainable log-loss payoff H(S) - [I(S ; V1) - R0]+ in bits.

    ``secret_set`` names roles among X, Y2, Y3; the key budget ``r0`` is
    in bits per symbol.  Rate and distortion budgets are properties of a
    search problem, not of this candidate-level evaluation.
    """
    if r0 < 0:
        raise ValueError("key rate must be nonnegative")
    roles = {"X": cand.x, "Y2": cand.y2, "Y3": cand.y3}
    canonical = LogLossPayoff(tuple(secret_set)).secret_set
    if check:
        report = check_equivocation_membership(cand, tol=tol, p_x=p_x)
        if not report.passed:
            raise ConstraintViolationError(report)
    secret_vars = tuple(dict.fromkeys(n for r in canonical for n in roles[r]))
    h_s = entropy(cand.joint, secret_vars)
    leak = _mi_groups(cand.joint, secret_vars, cand.v1)
    return h_s - max(0.0, leak - r0)


# --------------------------------------------------------------------------
# JSON: a candidate is its joint plus the declared roles.


def candidate_to_json(cand: OuterCandidate | InnerCandidate | EquivocationCandidate) -> dict:
    role_names = {
        OuterCandidate: ("x", "y2", "y3", "u", "v1", "v2"),
        InnerCandidate: ("x", "y2", "y3", "u1", "u2", "v1", "v2"),
        EquivocationCandidate: ("x", "y2", "y3", "v1", "v2"),
    }[type(cand)]
    return {
        "joint": joint_to_json(cand.joint),
        "roles": {r: list(getattr(cand, r)) for r in role_names},
    }


def _candidate_from_json(obj, cls):
    joint = joint_from_json(obj["joint"])
    roles = {k: tuple(v) for k, v in obj["roles"].items()}
    return cls(joint, **roles)


def outer_candidate_from_json(obj) -> OuterCandidate:
    return _candidate_from_json(obj, OuterCandidate)


def inner_candidate_from_json(obj) -> InnerCandidate:
    return _candidate_from_json(obj, InnerCandidate)


def equivocation_candidate_from_json(obj) -> EquivocationCandidate:
    return _candidate_from_json(obj, EquivocationCandidate)


def side_info_to_json(side: SideInfoSpec) -> dict:
    return {tag: channel_to_json(getattr(side, tag)) for tag in ("ch1", "ch2", "ch3")}


def side_info_from_json(obj) -> SideInfoSpec:
    return SideInfoSpec(*(channel_from_json(obj[tag]) for tag in ("ch1", "ch2", "ch3")))
