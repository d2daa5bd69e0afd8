"""Randomized search for good auxiliary structures under cardinality caps.

The inner search looks for a joint over (X, Y2, Y3, U1, U2, V1, V2) that
maximizes the adversary's best-response payoff subject to a key/message
rate budget.  Rather than optimizing a raw joint table and penalizing
structure violations, candidates are built from a parameterization that
satisfies every structural constraint identically:

* V1 is the composite (U2, A, B, C) with U1 := (U2, A) and V2 := (U2, B),
  so all determinism requirements are projections;
* the distribution over (U2, A, B, C) factors as
  P(u2) P(a|u2) P(b|u2) P(c|u2,a,b), which forces U1 - U2 - V2;
* X, Y2 are emitted from V1 and Y3 from V2 through channels, giving both
  Markov chains for free.

The only soft constraint left is the source marginal (X must match P_X);
it is handed to SLSQP as an equality constraint along with the rate
budget inequalities, while the restart stage samples channel structures
(support-aware around the payoff's forbidden set) and Dirichlet weights.
When the space of deterministic channel maps is small enough the search
enumerates it exhaustively instead of sampling.

Results are merged by payoff and then by candidate hash, so the outcome
is a deterministic function of (problem, seed, restarts) regardless of
how many workers run the restarts.

The equivocation search targets the log-loss disclosure family, where
the reverse parameterization P(V1|X) makes even the source marginal
exact by construction; only distortion and message-rate budgets remain
as optimizer constraints.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linprog, minimize, nnls

from .bounds import (
    EquivocationCandidate,
    InnerCandidate,
    RatePayoffTuple,
    SideInfoSpec,
    candidate_to_json,
    equivocation_value,
)
from .payoff import LogLossPayoff, PayoffTable, _batched_values
from .probability import Alphabet, JointDistribution, Pmf

__all__ = [
    "DEFAULT_ENUM_LIMIT",
    "RateBudget",
    "CardinalityCaps",
    "InnerSearchProblem",
    "SearchResult",
    "search_inner",
    "EquivocationProblem",
    "EquivocationSearchResult",
    "search_equivocation",
    "SweepPoint",
    "equivocation_sweep",
    "KeyRateResult",
    "min_key_rate",
]

#: Deterministic-map spaces at most this large are enumerated exhaustively.
DEFAULT_ENUM_LIMIT = 1_000_000

_RATE_SLACK = 1e-9  # accepted overage on rate/distortion budgets
_MARGINAL_SLACK = 1e-6  # accepted source-marginal gap for search results
_BACKOFF = 1e-7  # refinement aims slightly inside the rate budget
_ENUM_REFINE_ALL = 2048  # refine every enumerated map below this count
_ENUM_REFINE_TOP = 256  # otherwise refine only this many screened maps


@dataclass(frozen=True)
class RateBudget:
    """Upper limits on (R0, R1, R2) in bits; ``inf`` disables a limit."""

    r0: float
    r1: float
    r2: float

    def __post_init__(self) -> None:
        for tag, v in (("r0", self.r0), ("r1", self.r1), ("r2", self.r2)):
            if math.isnan(v) or v < 0:
                raise ValueError(f"budget {tag} must be >= 0, got {v}")


@dataclass(frozen=True)
class CardinalityCaps:
    """Alphabet-size caps for the searched variables.

    ``y2``/``y3`` default to the payoff's action alphabets; smaller values
    restrict the system to a prefix of the action symbols.
    """

    u1: int
    u2: int
    v1: int
    v2: int
    y2: int | None = None
    y3: int | None = None

    def __post_init__(self) -> None:
        for tag in ("u1", "u2", "v1", "v2"):
            if getattr(self, tag) < 1:
                raise ValueError(f"cap {tag} must be >= 1")
        for tag in ("y2", "y3"):
            v = getattr(self, tag)
            if v is not None and v < 1:
                raise ValueError(f"cap {tag} must be >= 1")


@dataclass(frozen=True)
class InnerSearchProblem:
    p_x: Pmf
    payoff: PayoffTable | LogLossPayoff
    side: SideInfoSpec
    budget: RateBudget
    caps: CardinalityCaps
    y2_alphabet: Alphabet | None = None  # required for LogLossPayoff
    y3_alphabet: Alphabet | None = None

    def __post_init__(self) -> None:
        if isinstance(self.payoff, PayoffTable):
            object.__setattr__(self, "y2_alphabet", self.payoff.y2_alphabet)
            object.__setattr__(self, "y3_alphabet", self.payoff.y3_alphabet)
            if self.payoff.x_alphabet.size != self.p_x.alphabet.size:
                raise ValueError("payoff X alphabet does not match the source pmf")
        elif self.y2_alphabet is None or self.y3_alphabet is None:
            raise ValueError("log-loss problems must name y2/y3 alphabets")
        sizes = (self.p_x.alphabet.size, self.y2_alphabet.size, self.y3_alphabet.size)
        for ch, size, tag in zip(
            (self.side.ch1, self.side.ch2, self.side.ch3), sizes, ("ch1", "ch2", "ch3")
        ):
            if ch.input_alphabets[0].size != size:
                raise ValueError(f"side-info {tag} input does not match the {tag[-1]} alphabet")
        if self.caps.y2 is not None and self.caps.y2 > self.y2_alphabet.size:
            raise ValueError("y2 cap exceeds the action alphabet")
        if self.caps.y3 is not None and self.caps.y3 > self.y3_alphabet.size:
            raise ValueError("y3 cap exceeds the action alphabet")

    @property
    def y2_used(self) -> int:
        return self.caps.y2 or self.y2_alphabet.size

    @property
    def y3_used(self) -> int:
        return self.caps.y3 or self.y3_alphabet.size


@dataclass(frozen=True)
class SearchResult:
    """Outcome of a search run; ``feasible=False`` carries no witness."""

    feasible: bool
    tuple: RatePayoffTuple | None
    candidate: InnerCandidate | None
    seed: int
    restarts: int
    wall_time: float
    message: str = ""

    def to_json(self) -> dict:
        t = None
        if self.tuple is not None:
            pi = "-inf" if self.tuple.pi == -math.inf else self.tuple.pi
            t = {
                "r0": self.tuple.r0,
                "r1": self.tuple.r1,
                "r2": self.tuple.r2,
                "pi": pi,
                "forbidden": self.tuple.forbidden,
            }
        return {
            "feasible": self.feasible,
            "tuple": t,
            "candidate": candidate_to_json(self.candidate) if self.candidate else None,
            "seed": self.seed,
            "restarts": self.restarts,
            "wall_time": self.wall_time,
            "message": self.message,
        }


def _entropy_bits(arr: np.ndarray) -> float:
    a = arr[arr > 0.0]
    return float(-(a * np.log2(a)).sum()) if a.size else 0.0


def _rng_for(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed % 2**64, index % 2**64]))


# ---------------------------------------------------------------------------
# inner search: structures


@dataclass
class _Structure:
    """One restart's discrete choices: dimensions and emission channels."""

    dims: tuple[int, int, int, int]  # (cU2, cA, cB, cC)
    px_rows: np.ndarray  # (nV1, |X|)
    py2_rows: np.ndarray  # (nV1, |Y2|)
    py3_rows: np.ndarray  # (nV2, |Y3|)

    @property
    def n_v1(self) -> int:
        c = self.dims
        return c[0] * c[1] * c[2] * c[3]

    @property
    def n_v2(self) -> int:
        return self.dims[0] * self.dims[2]


def _decompositions(caps: CardinalityCaps) -> list[tuple[int, int, int, int]]:
    """All (|U2|, |A|, |B|, |C|) splits consistent with the caps.

    Ordered largest-|U2| first and then by |V1| descending, so the
    round-robin restart assignment visits rich structures early; a larger
    structure can always emulate a smaller one with zero weights.
    """
    out = []
    for c_u2 in range(1, caps.u2 + 1):
        for c_a in range(1, caps.u1 // c_u2 + 1):
            for c_b in range(1, caps.v2 // c_u2 + 1):
                for c_c in range(1, caps.v1 // (c_u2 * c_a * c_b) + 1):
                    out.append((c_u2, c_a, c_b, c_c))
    out.sort(key=lambda d: (-d[0], -(d[0] * d[1] * d[2] * d[3]), d))
    return out


def _finite_pairs(problem: InnerSearchProblem) -> list[list[np.ndarray]]:
    """For each y3 symbol, the (x, y2) pairs with all-z-finite payoff."""
    n_x = problem.p_x.alphabet.size
    if isinstance(problem.payoff, LogLossPayoff):
        mask = np.ones((n_x, problem.y2_used, problem.y3_used), dtype=bool)
    else:
        mask = problem.payoff.finite_mask[:, : problem.y2_used, : problem.y3_used]
    out = []
    for y3 in range(problem.y3_used):
        pairs = np.argwhere(mask[:, :, y3])
        out.append([pairs[i] for i in range(len(pairs))])
    return out


def _one_hot(indices: np.ndarray, width: int) -> np.ndarray:
    rows = np.zeros((len(indices), width))
    rows[np.arange(len(indices)), indices] = 1.0
    return rows


def _balanced_structure(
    dims: tuple[int, int, int, int],
    problem: InnerSearchProblem,
    pairs_by_y3: list[list[np.ndarray]],
    shift: int,
) -> _Structure | None:
    """Deterministic channel maps that spread actions evenly.

    Round-robin y3 over the V2 cells and alternating (x, y2) pair choices
    keep every action reachable and the source marginal inside the hull,
    which random one-hot assignments often miss.  These seed-independent
    structures anchor the restart pool.
    """
    c_u2, c_a, c_b, c_c = dims
    n_v1, n_v2 = c_u2 * c_a * c_b * c_c, c_u2 * c_b
    n_x = problem.p_x.alphabet.size
    n_y2, n_y3 = problem.y2_alphabet.size, problem.y3_alphabet.size
    y3_of = [(v2 + shift) % problem.y3_used for v2 in range(n_v2)]
    if any(not pairs_by_y3[y] for y in set(y3_of)):
        return None
    px = np.zeros((n_v1, n_x))
    py2 = np.zeros((n_v1, n_y2))
    for v1 in range(n_v1):
        i, j, k, l = (int(v) for v in np.unravel_index(v1, dims))
        pairs = pairs_by_y3[y3_of[i * c_b + k]]
        x0, y0 = pairs[(i + j + k + l + shift) % len(pairs)]
        px[v1, x0] = 1.0
        py2[v1, y0] = 1.0
    return _Structure(dims, px, py2, _one_hot(np.array(y3_of), n_y3))


def _blind_structure(problem: InnerSearchProblem) -> _Structure:
    """Single-cell candidate that reveals nothing: P(x|v1) = p_x.

    All three rates are zero, so this is feasible under every budget and
    guarantees the search never reports infeasible when a no-information
    scheme would do.  The constant (y2, y3) pair is chosen to maximize the
    blind payoff, ties broken by index.
    """
    dims = (1, 1, 1, 1)
    n_y2, n_y3 = problem.y2_alphabet.size, problem.y3_alphabet.size
    px = problem.p_x.probs[None, :]
    best = None
    for y2 in range(problem.y2_used):
        for y3 in range(problem.y3_used):
            struct = _Structure(
                dims, px, _one_hot(np.array([y2]), n_y2), _one_hot(np.array([y3]), n_y3)
            )
            stats = _InnerEvaluator(struct, problem).stats(np.ones(dims))
            if best is None or stats.pi > best[0]:
                best = (stats.pi, struct)
    return best[1]


def _sample_structure(
    rng: np.random.Generator,
    dims: tuple[int, int, int, int],
    problem: InnerSearchProblem,
    pairs_by_y3: list[list[np.ndarray]],
    stochastic: bool,
) -> _Structure:
    c_u2, c_a, c_b, c_c = dims
    n_v1, n_v2 = c_u2 * c_a * c_b * c_c, c_u2 * c_b
    n_x = problem.p_x.alphabet.size
    n_y2, n_y3 = problem.y2_alphabet.size, problem.y3_alphabet.size

    y3_of_v2 = rng.integers(problem.y3_used, size=n_v2)
    py3 = _one_hot(y3_of_v2, n_y3)

    px = np.zeros((n_v1, n_x))
    py2 = np.zeros((n_v1, n_y2))
    spread_x = stochastic and bool(rng.integers(2))
    for v1 in range(n_v1):
        i, _, k, _ = np.unravel_index(v1, dims)
        y3 = int(y3_of_v2[i * c_b + k])
        pairs = pairs_by_y3[y3]
        if pairs:
            x0, y0 = pairs[int(rng.integers(len(pairs)))]
        else:  # no finite triple exists for this y3; candidate is doomed
            x0, y0 = int(rng.integers(n_x)), int(rng.integers(problem.y2_used))
        if not stochastic:
            px[v1, x0] = 1.0
            py2[v1, y0] = 1.0
        elif spread_x:
            support = [x for x in range(n_x) if any(p[0] == x and p[1] == y0 for p in pairs)] or [x0]
            px[v1, support] = rng.dirichlet(np.ones(len(support)))
            py2[v1, y0] = 1.0
        else:
            support = [y for y in range(problem.y2_used) if any(p[0] == x0 and p[1] == y for p in pairs)] or [y0]
            py2[v1, support] = rng.dirichlet(np.ones(len(support)))
            px[v1, x0] = 1.0
    return _Structure(dims, px, py2, py3)


# ---------------------------------------------------------------------------
# inner search: weights and fast evaluation


class _ThetaLayout:
    """Packs the weight parameters into one flat SLSQP vector.

    When |A| or |B| is 1 the chain U1 - U2 - V2 holds for any joint over
    the V1 cells, so a single flat simplex parameterizes the weights and
    the source-marginal constraint becomes linear.  Otherwise the joint
    must factor as P(u2) P(a|u2) P(b|u2) P(c|u2,a,b), one simplex block
    per row; simplexes of size one carry no freedom and are omitted.
    """

    def __init__(self, dims: tuple[int, int, int, int]):
        c_u2, c_a, c_b, c_c = dims
        n_v1 = c_u2 * c_a * c_b * c_c
        self.dims = dims
        self.flat = c_a == 1 or c_b == 1
        self.blocks: list[tuple[str, int, int]] = []  # (key, rows, cols)
        if self.flat:
            if n_v1 > 1:
                self.blocks.append(("w", 1, n_v1))
        else:
            if c_u2 > 1:
                self.blocks.append(("p", 1, c_u2))
            self.blocks.append(("a", c_u2, c_a))
            self.blocks.append(("b", c_u2, c_b))
            if c_c > 1:
                self.blocks.append(("c", c_u2 * c_a * c_b, c_c))
        self.size = sum(r * c for _, r, c in self.blocks)

    def weights(self, theta: np.ndarray, normalized: bool = False) -> np.ndarray:
        """The V1 joint w[u2, a, b, c] implied by the packed parameters."""
        c_u2, c_a, c_b, c_c = self.dims
        parts = {}
        at = 0
        for key, rows, cols in self.blocks:
            parts[key] = np.clip(theta[at : at + rows * cols], 0.0, None).reshape(rows, cols)
            at += rows * cols
        if self.flat:
            w = parts.get("w", np.ones((1, 1))).reshape(self.dims)
            return w / w.sum() if normalized else w
        p = parts.get("p", np.ones((1, c_u2)))
        a, b = parts["a"], parts["b"]
        c = parts.get("c", np.ones((c_u2 * c_a * c_b, c_c)))
        if normalized:
            p = p / p.sum()
            a = a / a.sum(axis=1, keepdims=True)
            b = b / b.sum(axis=1, keepdims=True)
            c = c / c.sum(axis=1, keepdims=True)
        return (
            p.reshape(c_u2, 1, 1, 1)
            * a.reshape(c_u2, c_a, 1, 1)
            * b.reshape(c_u2, 1, c_b, 1)
            * c.reshape(c_u2, c_a, c_b, c_c)
        )

    def pack(self, rng: np.random.Generator | None) -> np.ndarray:
        """Dirichlet(1) start, or the uniform point when rng is None."""
        out = np.empty(self.size)
        at = 0
        for _, rows, cols in self.blocks:
            for _ in range(rows):
                out[at : at + cols] = 1.0 / cols if rng is None else rng.dirichlet(np.ones(cols))
                at += cols
        return out

    def simplex_constraints(self) -> list[dict]:
        cons = []
        at = 0
        for _, rows, cols in self.blocks:
            for r in range(rows):
                sl = slice(at + r * cols, at + (r + 1) * cols)
                cons.append(
                    {"type": "eq", "fun": (lambda th, s=sl: th[s].sum() - 1.0)}
                )
            at += rows * cols
        return cons


@dataclass
class _InnerStats:
    r0: float
    r1: float
    r2: float
    pi: float
    forbidden: bool
    marginal_gap: float


def _concentrated_theta(
    rng: np.random.Generator,
    layout: _ThetaLayout,
    struct: _Structure,
    p_x: np.ndarray,
    r0_budget: float,
) -> np.ndarray | None:
    """A start for flat-mode refinement that already sits in a feasible basin.

    Uniform weights have I(W;V1|U1) near log2(cells per U2 group), far above
    a tight key budget, and SLSQP rarely recovers from so infeasible a start.
    Instead, concentrate each group on about 2**R0 cells and fit the cell
    weights to the source marginal with NNLS; resample the support a few
    times if the fit fails.
    """
    if not layout.flat or layout.size == 0:
        return None
    c_u2, c_a, c_b, c_c = layout.dims
    group = c_a * c_b * c_c  # cells per U2 value
    per = int(np.clip(round(2.0 ** min(r0_budget, math.log2(group))), 1, group))
    n_v1 = c_u2 * group
    for _ in range(5):
        support = np.concatenate(
            [i * group + rng.choice(group, size=per, replace=False) for i in range(c_u2)]
        )
        m = np.vstack([struct.px_rows[support].T, np.ones(len(support))])
        rhs = np.concatenate([p_x, [1.0]])
        sol, residual = nnls(m, rhs)
        if residual < 1e-8:
            theta = np.zeros(n_v1)
            jitter = rng.dirichlet(np.ones(len(support)))
            theta[support] = np.clip(sol, 0.0, None) + 0.02 * jitter
            return theta / theta.sum()
    return None


class _InnerEvaluator:
    """Exact rate/payoff statistics straight from the parameter arrays.

    Mirrors :func:`cascade_secrecy.bounds.eval_inner_tuple` on the
    factored family, but works on raw tensors so the optimizer can call
    it thousands of times; the official evaluator re-checks the winner.
    """

    def __init__(self, struct: _Structure, problem: InnerSearchProblem):
        c_u2, c_a, c_b, c_c = struct.dims
        self.dims = struct.dims
        self.problem = problem
        self.px4 = struct.px_rows.reshape(c_u2, c_a, c_b, c_c, -1)
        self.py24 = struct.py2_rows.reshape(c_u2, c_a, c_b, c_c, -1)
        self.py32 = struct.py3_rows.reshape(c_u2, c_b, -1)
        self.p_x = problem.p_x.probs
        # side information enters through per-coordinate channel matrices
        self.wx = np.einsum("ijklx,xp->ijklp", self.px4, problem.side.ch1.rows)
        self.wy2 = np.einsum("ijkly,yq->ijklq", self.py24, problem.side.ch2.rows)
        self.wy3 = np.einsum("ikt,tr->ikr", self.py32, problem.side.ch3.rows)
        self.payoff = problem.payoff
        if isinstance(self.payoff, LogLossPayoff):
            axes = {"X": 2, "Y2": 3, "Y3": 4}  # axes of the (i,j,x,y,t) array
            self.secret_axes = tuple(axes[s] for s in self.payoff.secret_set)

    def stats(self, w4: np.ndarray) -> _InnerStats:
        p = self.problem
        vx = w4[..., None] * self.px4
        xm = vx.sum(axis=(0, 1, 2, 3))
        gap = float(np.abs(xm - self.p_x).max())
        h_x = _entropy_bits(xm)
        r1 = max(0.0, h_x + _entropy_bits(w4) - _entropy_bits(vx))
        v2x = vx.sum(axis=(1, 3))
        r2 = max(0.0, h_x + _entropy_bits(w4.sum(axis=(1, 3))) - _entropy_bits(v2x))

        t_wv = np.einsum("ijkl,ijklp,ijklq,ikr->ijklpqr", w4, self.wx, self.wy2, self.wy3)
        t_wu = t_wv.sum(axis=(2, 3))
        h_u1 = _entropy_bits(w4.sum(axis=(2, 3)))
        r0 = max(
            0.0,
            (_entropy_bits(t_wu) - h_u1) - (_entropy_bits(t_wv) - _entropy_bits(w4)),
        )

        j_sys = np.einsum("ijkl,ijklx,ijkly,ikt->ijxyt", w4, self.px4, self.py24, self.py32)
        if isinstance(self.payoff, LogLossPayoff):
            keep = (0, 1) + self.secret_axes
            drop = tuple(ax for ax in range(5) if ax not in keep)
            j_su = j_sys.sum(axis=drop) if drop else j_sys
            pi = _entropy_bits(j_su) - h_u1
            forbidden = False
        else:
            n_u1 = w4.shape[0] * w4.shape[1]
            vals = _batched_values(j_sys.reshape(n_u1, -1), self.payoff)
            per_u = vals.min(axis=1)
            pi = float(per_u.sum())
            forbidden = not math.isfinite(pi)
        return _InnerStats(r0, r1, r2, pi, forbidden, gap)


def _rate_ok(stats: _InnerStats, budget: RateBudget, slack: float = _RATE_SLACK) -> bool:
    return (
        stats.r0 <= budget.r0 + slack
        and stats.r1 <= budget.r1 + slack
        and stats.r2 <= budget.r2 + slack
    )


def _is_feasible(stats: _InnerStats, budget: RateBudget) -> bool:
    return (
        not stats.forbidden
        and math.isfinite(stats.pi)
        and stats.marginal_gap <= _MARGINAL_SLACK
        and _rate_ok(stats, budget)
    )


def _relaxed_score(stats: _InnerStats, budget: RateBudget) -> float:
    """Ranking score for picking refinement candidates: payoff minus
    heavy penalties for budget/marginal violations."""
    if stats.forbidden or not math.isfinite(stats.pi):
        return -math.inf
    pen = stats.marginal_gap
    for got, cap in ((stats.r0, budget.r0), (stats.r1, budget.r1), (stats.r2, budget.r2)):
        if math.isfinite(cap):
            pen += max(0.0, got - cap)
    return stats.pi - 100.0 * pen


class _FlatModel:
    """Per-cell arrays backing the sequential-LP refinement in flat mode.

    With a flat weight simplex the payoff sum_u min_z <pi_uz, w> is concave
    piecewise-linear (an exact LP epigraph), and I(W;V1|U1) and I(X;V1)
    are concave in w — conditional entropy is concave in the joint and the
    H(.|V1) terms are linear — so their tangent-plane linearizations can
    only overestimate, making linearized rate cuts safe.  I(X;V2) is not
    concave; its linearization is guarded by the trust region and by exact
    re-evaluation of every accepted step.
    """

    def __init__(self, struct: _Structure, problem: InnerSearchProblem):
        c_u2, c_a, c_b, c_c = struct.dims
        self.dims = struct.dims
        n_v1 = c_u2 * c_a * c_b * c_c
        idx = np.arange(n_v1)
        self.u_of = idx // (c_b * c_c)
        self.v2_of = (idx // (c_a * c_b * c_c)) * c_b + (idx // c_c) % c_b
        self.n_u1, self.n_v2 = c_u2 * c_a, c_u2 * c_b
        self.px = struct.px_rows
        py3c = struct.py3_rows[self.v2_of]
        wx = self.px @ problem.side.ch1.rows
        wy2 = struct.py2_rows @ problem.side.ch2.rows
        wy3 = py3c @ problem.side.ch3.rows
        self.pw = np.einsum("cp,cq,cr->cpqr", wx, wy2, wy3).reshape(n_v1, -1)
        self.h_w_cell = np.array([_entropy_bits(r) for r in self.pw])
        self.h_x_cell = np.array([_entropy_bits(r) for r in self.px])
        self.p_x = problem.p_x.probs
        self.payoff = problem.payoff
        if isinstance(problem.payoff, LogLossPayoff):
            marg = {"X": self.px, "Y2": struct.py2_rows, "Y3": py3c}
            parts = [marg[s] for s in problem.payoff.secret_set]
            ps = parts[0]
            for extra in parts[1:]:
                ps = (ps[:, :, None] * extra[:, None, :]).reshape(n_v1, -1)
            self.ps = ps
            self.pi_cz = None
        else:
            vals = problem.payoff.values
            finite = np.isfinite(vals)
            masked = np.where(finite, vals, 0.0)
            spread = float(np.abs(masked).max()) if masked.size else 1.0
            big = 1e6 * (1.0 + spread)
            pi_cz = np.einsum("cx,cy,ct,xytz->cz", self.px, struct.py2_rows, py3c, masked)
            hits = np.einsum(
                "cx,cy,ct,xytz->cz", self.px, struct.py2_rows, py3c, (~finite).astype(float)
            )
            self.pi_cz = np.where(hits > 1e-15, -big, pi_cz)

    def _scatter(self, w: np.ndarray, rows: np.ndarray, groups: np.ndarray, n: int):
        q = np.zeros((n, rows.shape[1]))
        np.add.at(q, groups, rows * w[:, None])
        return q

    def rates_and_grads(self, w: np.ndarray):
        """(values, gradients) for (r0, r1, r2) at the point w."""
        c0 = 1.0 / math.log(2.0)

        def h_and_grad(q_rows, per_cell_rows, groups):
            q = q_rows.reshape(-1)
            h = _entropy_bits(q)
            glog = np.log2(np.maximum(q_rows, 1e-300))
            grad = -(per_cell_rows * glog[groups]).sum(axis=1) - c0
            return h, grad

        q_wu = self._scatter(w, self.pw, self.u_of, self.n_u1)
        h_wu, g_wu = h_and_grad(q_wu, self.pw, self.u_of)
        q_u = np.zeros(self.n_u1)
        np.add.at(q_u, self.u_of, w)
        h_u = _entropy_bits(q_u)
        g_u = -np.log2(np.maximum(q_u, 1e-300))[self.u_of] - c0
        r0 = max(0.0, h_wu - h_u - float(self.h_w_cell @ w))
        g_r0 = g_wu - g_u - self.h_w_cell

        q_x = self.px.T @ w
        h_x = _entropy_bits(q_x)
        g_x = -(self.px * np.log2(np.maximum(q_x, 1e-300))).sum(axis=1) - c0
        r1 = max(0.0, h_x - float(self.h_x_cell @ w))
        g_r1 = g_x - self.h_x_cell

        q_xv = self._scatter(w, self.px, self.v2_of, self.n_v2)
        h_xv, g_xv = h_and_grad(q_xv, self.px, self.v2_of)
        q_v = np.zeros(self.n_v2)
        np.add.at(q_v, self.v2_of, w)
        h_v = _entropy_bits(q_v)
        g_v = -np.log2(np.maximum(q_v, 1e-300))[self.v2_of] - c0
        r2 = max(0.0, h_x + h_v - h_xv)
        g_r2 = g_x + g_v - g_xv
        return (r0, r1, r2), (g_r0, g_r1, g_r2)

    def payoff_grad(self, w: np.ndarray) -> np.ndarray:
        """Gradient of the log-loss payoff H(S|U1); table payoffs use the
        exact epigraph instead."""
        c0 = 1.0 / math.log(2.0)
        q_su = self._scatter(w, self.ps, self.u_of, self.n_u1)
        glog = np.log2(np.maximum(q_su, 1e-300))
        g_su = -(self.ps * glog[self.u_of]).sum(axis=1) - c0
        q_u = np.zeros(self.n_u1)
        np.add.at(q_u, self.u_of, w)
        g_u = -np.log2(np.maximum(q_u, 1e-300))[self.u_of] - c0
        return g_su - g_u


def _refine_flat_slp(
    struct: _Structure,
    evaluator: _InnerEvaluator,
    problem: InnerSearchProblem,
    budget: RateBudget,
    theta0: np.ndarray,
    maxiter: int = 30,
) -> np.ndarray | None:
    """Trust-region sequential LP over the flat weight simplex.

    Alternates a feasibility phase (shrink rate violations) with a climb
    phase (maximize the payoff subject to linearized rate cuts); every
    step is re-evaluated exactly before acceptance.
    """
    model = _FlatModel(struct, problem)
    # LP steps converge in a few dozen iterations when they converge at
    # all; the larger budgets quoted for the smooth refiner buy nothing
    maxiter = min(maxiter, 40)
    n_v1 = len(theta0)
    w = np.clip(theta0, 0.0, None)
    w /= w.sum()
    caps = [budget.r0, budget.r1, budget.r2]
    use_epigraph = model.pi_cz is not None
    n_t = model.n_u1 if use_epigraph else 0
    n_z = model.pi_cz.shape[1] if use_epigraph else 0

    a_eq = np.vstack([model.px.T, np.ones((1, n_v1))])
    b_eq = np.concatenate([model.p_x, [1.0]])

    def rate_violation(point: np.ndarray) -> float:
        vals, _ = model.rates_and_grads(point)
        return sum(
            max(0.0, rk - cap) for rk, cap in zip(vals, caps) if math.isfinite(cap)
        )

    def feasibility_step(delta: float) -> np.ndarray | None:
        """One LP step minimizing linearized rate violation on the manifold."""
        rates, grads = model.rates_and_grads(w)
        tight = [
            (rk, gk, cap)
            for rk, gk, cap in zip(rates, grads, caps)
            if math.isfinite(cap)
        ]
        n_s = len(tight)
        a_ub = np.zeros((n_s, n_v1 + n_s))
        b_ub = np.zeros(n_s)
        for s, (rk, gk, cap) in enumerate(tight):
            a_ub[s, :n_v1] = gk
            a_ub[s, n_v1 + s] = -1.0
            b_ub[s] = max(cap - _BACKOFF, 0.0) - rk + float(gk @ w)
        c = np.concatenate([np.zeros(n_v1), np.ones(n_s)])
        lo = np.maximum(w - delta, 0.0)
        hi = np.minimum(w + delta, 1.0)
        bounds = list(zip(lo, hi)) + [(0.0, None)] * n_s
        eq = np.hstack([a_eq, np.zeros((a_eq.shape[0], n_s))])
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=eq, b_eq=b_eq, bounds=bounds, method="highs")
        if not res.success:
            return None
        out = np.clip(res.x[:n_v1], 0.0, None)
        return out / out.sum()

    best_w, best_pi = None, -math.inf
    start_stats = evaluator.stats(w.reshape(model.dims))
    if _is_feasible(start_stats, budget):
        best_w, best_pi = w.copy(), start_stats.pi
    if start_stats.marginal_gap > 1e-9:
        # land exactly on the source-marginal manifold; every later step
        # preserves it through the LP equalities
        projected = feasibility_step(1.0)
        if projected is None:
            return best_w
        w = projected

    delta = 0.3
    stall = 0
    fstall = 0
    for _ in range(maxiter):
        stats = evaluator.stats(w.reshape(model.dims))
        if _is_feasible(stats, budget) and stats.pi > best_pi:
            best_w, best_pi = w.copy(), stats.pi
        if delta < 1e-5 or stall > 6 or fstall > 8:
            break
        violation = rate_violation(w)
        if violation > _RATE_SLACK:
            w_new = feasibility_step(delta)
            improved = violation - rate_violation(w_new) if w_new is not None else 0.0
            if improved > 1e-12:
                w = w_new
                delta = min(delta * 1.5, 0.4)
                # geometric convergence shrinks the violation by a steady
                # fraction; anything slower is creep toward an unreachable
                # budget and gets cut off
                fstall = fstall + 1 if improved < max(1e-8, 1e-3 * violation) else 0
            else:
                delta *= 0.5
                fstall += 1
            continue

        # climb phase: exact piecewise-linear payoff, linearized rate cuts
        rates, grads = model.rates_and_grads(w)
        rows = []
        rhs = []
        for rk, gk, cap in zip(rates, grads, caps):
            if math.isfinite(cap):
                row = np.zeros(n_v1 + n_t)
                row[:n_v1] = gk
                rows.append(row)
                rhs.append(max(cap - _BACKOFF, 0.0) - rk + float(gk @ w))
        if use_epigraph:
            for u in range(model.n_u1):
                cells = model.u_of == u
                for z in range(n_z):
                    row = np.zeros(n_v1 + n_t)
                    row[:n_v1][cells] = -model.pi_cz[cells, z]
                    row[n_v1 + u] = 1.0
                    rows.append(row)
                    rhs.append(0.0)
            c = np.concatenate([np.zeros(n_v1), -np.ones(n_t)])
        else:
            c = -model.payoff_grad(w)
        lo = np.maximum(w - delta, 0.0)
        hi = np.minimum(w + delta, 1.0)
        bounds = list(zip(lo, hi)) + [(None, None)] * n_t
        eq = np.hstack([a_eq, np.zeros((a_eq.shape[0], n_t))]) if n_t else a_eq
        res = linprog(
            c,
            A_ub=np.vstack(rows) if rows else None,
            b_ub=np.array(rhs) if rows else None,
            A_eq=eq,
            b_eq=b_eq,
            bounds=bounds,
            method="highs",
        )
        if not res.success:
            delta *= 0.5
            stall += 1
            continue
        target = np.clip(res.x[:n_v1], 0.0, None)
        target /= target.sum()
        # backtrack toward w: I(X;V2) is convex along the on-manifold
        # segment, so a short enough step re-enters the feasible region
        accepted = False
        baseline = stats.pi if _is_feasible(stats, budget) else -math.inf
        for t in (1.0, 0.5, 0.25, 0.125):
            w_try = w + t * (target - w)
            try_stats = evaluator.stats(w_try.reshape(model.dims))
            if _is_feasible(try_stats, budget) and try_stats.pi > baseline + 1e-12:
                w = w_try
                delta = min(delta * 1.5, 0.4)
                accepted = True
                break
        if accepted:
            stall = 0
        else:
            delta *= 0.5
            stall += 1
    return best_w


def _refine_weights(
    layout: _ThetaLayout,
    evaluator: _InnerEvaluator,
    theta0: np.ndarray,
    budget: RateBudget,
    maxiter: int,
) -> np.ndarray | None:
    if layout.size == 0:
        return None
    cache: dict[bytes, _InnerStats] = {}

    def stats_at(theta: np.ndarray) -> _InnerStats:
        key = theta.tobytes()
        hit = cache.get(key)
        if hit is None:
            if len(cache) > 8192:
                cache.clear()
            hit = evaluator.stats(layout.weights(theta))
            cache[key] = hit
        return hit

    cons = layout.simplex_constraints()
    cons.append(
        {
            "type": "eq",
            "fun": lambda th: np.einsum(
                "ijkl,ijklx->x", layout.weights(th), evaluator.px4
            )
            - evaluator.p_x,
        }
    )
    # skip rate constraints that no candidate in this structure can violate
    prob = evaluator.problem
    c_u2, c_a, c_b, c_c = layout.dims
    h_x_cap = math.log2(prob.p_x.alphabet.size)
    h_w_cap = sum(
        math.log2(ch.output_alphabet.size)
        for ch in (prob.side.ch1, prob.side.ch2, prob.side.ch3)
    )
    bound = {
        "r0": min(math.log2(c_u2 * c_a * c_b * c_c), h_w_cap),
        "r1": h_x_cap,
        "r2": min(h_x_cap, math.log2(c_u2 * c_b)),
    }
    active: list[tuple[str, float]] = []
    for rate, cap in (("r0", budget.r0), ("r1", budget.r1), ("r2", budget.r2)):
        if math.isfinite(cap) and cap < bound[rate]:
            eff = max(cap - _BACKOFF, 0.0)
            active.append((rate, eff))
            cons.append(
                {
                    "type": "ineq",
                    "fun": (lambda th, r=rate, e=eff: e - getattr(stats_at(th), r)),
                }
            )

    def objective(theta: np.ndarray) -> float:
        s = stats_at(theta)
        if not math.isfinite(s.pi):
            return 1e6
        # the hinge keeps iterates from drifting deep into rate-infeasible
        # territory, where the linearized subproblems go inconsistent
        pen = sum(max(0.0, getattr(s, r) - e) ** 2 for r, e in active)
        return -s.pi + 50.0 * pen

    try:
        res = minimize(
            objective,
            theta0,
            method="SLSQP",
            bounds=[(0.0, 1.0)] * layout.size,
            constraints=cons,
            options={"maxiter": maxiter, "ftol": 1e-12},
        )
    except (ValueError, FloatingPointError):
        return None
    return np.asarray(res.x)


def _assemble_inner(
    struct: _Structure, w4: np.ndarray, problem: InnerSearchProblem
) -> InnerCandidate:
    c_u2, c_a, c_b, c_c = struct.dims
    px4 = struct.px_rows.reshape(c_u2, c_a, c_b, c_c, -1)
    py24 = struct.py2_rows.reshape(c_u2, c_a, c_b, c_c, -1)
    py32 = struct.py3_rows.reshape(c_u2, c_b, -1)
    table = np.einsum("ijkl,ijklx,ijkly,ikt->xytijkl", w4, px4, py24, py32)
    table = np.clip(table, 0.0, None)
    table /= table.sum()
    variables = (
        ("X", problem.p_x.alphabet),
        ("Y2", problem.y2_alphabet),
        ("Y3", problem.y3_alphabet),
        ("U2", Alphabet("U2", c_u2)),
        ("A", Alphabet("A", c_a)),
        ("B", Alphabet("B", c_b)),
        ("C", Alphabet("C", c_c)),
    )
    return InnerCandidate(
        JointDistribution(variables, table),
        u1=("U2", "A"),
        u2="U2",
        v1=("U2", "A", "B", "C"),
        v2=("U2", "B"),
    )


def _candidate_digest(cand: InnerCandidate | EquivocationCandidate) -> str:
    payload = json.dumps(candidate_to_json(cand), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class _Scored:
    stats: _InnerStats
    struct: _Structure
    w4: np.ndarray


def _score_weights(
    struct: _Structure,
    evaluator: _InnerEvaluator,
    layout: _ThetaLayout,
    theta: np.ndarray | None,
) -> _Scored:
    if theta is None or layout.size == 0:
        theta = layout.pack(None)  # uniform start; empty when nothing is free
    w4 = layout.weights(theta, normalized=True)
    return _Scored(evaluator.stats(w4), struct, w4)


def _map_space_size(problem: InnerSearchProblem, dims, pairs_by_y3) -> int:
    """Number of deterministic channel maps for one decomposition."""
    c_u2, c_a, c_b, c_c = dims
    fiber = c_a * c_c  # v1 cells sharing one v2 cell
    n_pairs = np.array([len(p) for p in pairs_by_y3], dtype=float)
    per_v2 = float((n_pairs**fiber).sum())
    if per_v2 == 0.0:
        return 0
    total = per_v2 ** (c_u2 * c_b)
    return int(total) if total < 2**62 else 2**62


def _enumerate_structures(
    problem: InnerSearchProblem, dims, pairs_by_y3
) -> list[_Structure]:
    """All support-aware deterministic channel assignments for one split."""
    c_u2, c_a, c_b, c_c = dims
    n_v1, n_v2 = c_u2 * c_a * c_b * c_c, c_u2 * c_b
    n_x = problem.p_x.alphabet.size
    n_y2, n_y3 = problem.y2_alphabet.size, problem.y3_alphabet.size
    out = []
    for y3_map in itertools.product(range(problem.y3_used), repeat=n_v2):
        options = []
        feasible = True
        for v1 in range(n_v1):
            i, _, k, _ = np.unravel_index(v1, dims)
            pairs = pairs_by_y3[y3_map[i * c_b + k]]
            if not pairs:
                feasible = False
                break
            options.append(pairs)
        if not feasible:
            continue
        py3 = _one_hot(np.array(y3_map), n_y3)
        for combo in itertools.product(*options):
            px = np.zeros((n_v1, n_x))
            py2 = np.zeros((n_v1, n_y2))
            for v1, (x0, y0) in enumerate(combo):
                px[v1, x0] = 1.0
                py2[v1, y0] = 1.0
            out.append(_Structure(dims, px, py2, py3))
    return out


def search_inner(
    problem: InnerSearchProblem,
    *,
    restarts: int = 64,
    seed: int = 0,
    workers: int = 1,
    refine_top: int = 24,
    maxiter: int = 120,
    enum_limit: int = DEFAULT_ENUM_LIMIT,
) -> SearchResult:
    """Best rate-feasible candidate found for the inner achievability bound.

    Deterministic given (problem, seed, restarts) for any worker count.
    Infeasibility is a result, not an exception.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    started = time.perf_counter()
    budget = problem.budget
    decomps = _decompositions(problem.caps)
    pairs_by_y3 = _finite_pairs(problem)

    # stage 0: exhaustive enumeration of deterministic channel maps
    enum_jobs: list[tuple[_Structure, bool]] = []  # (structure, refine?)
    total_maps = sum(_map_space_size(problem, d, pairs_by_y3) for d in decomps)
    if 0 < total_maps <= enum_limit:
        structures = [
            s for d in decomps for s in _enumerate_structures(problem, d, pairs_by_y3)
        ]
        if total_maps <= _ENUM_REFINE_ALL:
            enum_jobs = [(s, True) for s in structures]
        else:
            screened = []
            for s in structures:
                sc = _score_weights(s, _InnerEvaluator(s, problem), _ThetaLayout(s.dims), None)
                screened.append((_relaxed_score(sc.stats, budget), len(screened), s))
            screened.sort(key=lambda t: (-t[0], t[1]))
            enum_jobs = [(s, True) for _, _, s in screened[:_ENUM_REFINE_TOP]]
            enum_jobs += [(s, False) for _, _, s in screened[_ENUM_REFINE_TOP:]]

    # seed-independent anchors: the no-information candidate (stochastic
    # source row, so never covered by the deterministic enumeration) plus
    # balanced maps over the leading decompositions
    canon_jobs: list[_Structure] = [_blind_structure(problem)]
    if total_maps == 0 or total_maps > _ENUM_REFINE_ALL:
        seen: set[bytes] = set()
        # every (c_u2, c_a, 1, 1) decomposition pins V1 = U1, hence key
        # rate identically zero: the natural anchors for small budgets
        anchor_dims = decomps[:16] + [d for d in decomps if d[2] == 1 and d[3] == 1]
        for dims in anchor_dims:
            for shift in (0, 1):
                struct = _balanced_structure(dims, problem, pairs_by_y3, shift)
                if struct is None:
                    continue
                key = (
                    repr(dims).encode()
                    + struct.px_rows.tobytes()
                    + struct.py2_rows.tobytes()
                    + struct.py3_rows.tobytes()
                )
                if key not in seen:
                    seen.add(key)
                    canon_jobs.append(struct)

    # stage 1: sample and score restarts (cheap, no refinement yet)
    indices = list(range(restarts))

    def sample_one(index: int):
        rng = _rng_for(seed, index)
        dims = decomps[index % len(decomps)]
        stochastic = rng.random() < 0.25
        struct = _sample_structure(rng, dims, problem, pairs_by_y3, stochastic)
        layout = _ThetaLayout(struct.dims)
        theta0 = None
        if rng.random() < 0.7:
            theta0 = _concentrated_theta(rng, layout, struct, problem.p_x.probs, budget.r0)
        if theta0 is None:
            theta0 = layout.pack(None if rng.random() < 0.15 else rng)
        evaluator = _InnerEvaluator(struct, problem)
        scored = _score_weights(struct, evaluator, layout, theta0)
        return (index, struct, theta0, scored)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sampled = list(pool.map(sample_one, indices))
    else:
        sampled = [sample_one(i) for i in indices]

    # stage 2: refine the most promising restarts plus the enumerated maps
    ranked = sorted(
        sampled, key=lambda t: (-_relaxed_score(t[3].stats, budget), t[0])
    )
    refine_jobs: list[tuple[_Structure, np.ndarray | None, _Scored | None]] = [
        (struct, theta0, scored) for _, struct, theta0, scored in ranked[:refine_top]
    ]
    refine_jobs += [(struct, None, None) for struct in canon_jobs]
    keep_unrefined = [scored for _, _, _, scored in sampled]
    for struct, do_refine in enum_jobs:
        if do_refine:
            refine_jobs.append((struct, None, None))
        else:
            keep_unrefined.append(
                _score_weights(struct, _InnerEvaluator(struct, problem), _ThetaLayout(struct.dims), None)
            )

    def refine_one(job) -> list[_Scored]:
        struct, theta0, scored = job
        layout = _ThetaLayout(struct.dims)
        evaluator = _InnerEvaluator(struct, problem)
        if theta0 is None:
            theta0 = layout.pack(None)
            scored = _score_weights(struct, evaluator, layout, theta0)
        out = [scored]
        if layout.flat and layout.size > 0:
            theta1 = _refine_flat_slp(struct, evaluator, problem, budget, theta0, maxiter)
            if theta1 is not None:
                out.append(_score_weights(struct, evaluator, layout, theta1))
        else:
            theta1 = _refine_weights(layout, evaluator, theta0, budget, maxiter)
            if theta1 is not None:
                polished = _score_weights(struct, evaluator, layout, theta1)
                out.append(polished)
                if not _is_feasible(polished.stats, budget):
                    # a restart from the stalled point resets the quadratic
                    # model and often completes convergence
                    theta2 = _refine_weights(layout, evaluator, theta1, budget, maxiter)
                    if theta2 is not None:
                        out.append(_score_weights(struct, evaluator, layout, theta2))
        return out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            refined_lists = list(pool.map(refine_one, refine_jobs))
    else:
        refined_lists = [refine_one(j) for j in refine_jobs]

    pool_all = keep_unrefined + [s for lst in refined_lists for s in lst]
    feasible = [s for s in pool_all if _is_feasible(s.stats, budget)]
    wall = time.perf_counter() - started
    if not feasible:
        return SearchResult(
            False,
            None,
            None,
            seed,
            restarts,
            wall,
            "infeasible: no candidate met the rate budget within tolerance",
        )

    # deterministic merge: best payoff, ties by candidate digest
    best_pi = max(s.stats.pi for s in feasible)
    finalists = [s for s in feasible if s.stats.pi >= best_pi - 1e-12]
    assembled = [(_assemble_inner(s.struct, s.w4, problem), s) for s in finalists]
    assembled.sort(key=lambda pair: (-pair[1].stats.pi, _candidate_digest(pair[0])))
    winner_cand, winner = assembled[0]
    tup = RatePayoffTuple(
        winner.stats.r0,
        winner.stats.r1,
        winner.stats.r2,
        winner.stats.pi,
        winner.stats.forbidden,
    )
    msg = f"source-marginal gap {winner.stats.marginal_gap:.2e}"
    return SearchResult(True, tup, winner_cand, seed, restarts, wall, msg)


# ---------------------------------------------------------------------------
# equivocation search (log-loss disclosure family)


@dataclass(frozen=True)
class EquivocationProblem:
    """Maximize H(S) - [I(S;V1) - R0]+ over the disclosure family.

    Distortion tables: d1 over (X, Y2) and d2 over (X, Y3), with budgets
    max_d1/max_d2; message rates r1/r2 cap I(X;V1)/I(X;V2).
    """

    p_x: Pmf
    secret_set: tuple[str, ...]
    y2_alphabet: Alphabet
    y3_alphabet: Alphabet
    d1: np.ndarray
    d2: np.ndarray
    max_d1: float
    max_d2: float
    r0: float
    r1: float
    r2: float
    cap_v1: int
    cap_v2: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "secret_set", LogLossPayoff(tuple(self.secret_set)).secret_set)
        d1 = np.asarray(self.d1, dtype=np.float64)
        d2 = np.asarray(self.d2, dtype=np.float64)
        if d1.shape != (self.p_x.alphabet.size, self.y2_alphabet.size):
            raise ValueError(f"d1 must have shape (|X|, |Y2|), got {d1.shape}")
        if d2.shape != (self.p_x.alphabet.size, self.y3_alphabet.size):
            raise ValueError(f"d2 must have shape (|X|, |Y3|), got {d2.shape}")
        if not (np.isfinite(d1).all() and np.isfinite(d2).all()):
            raise ValueError("distortion tables must be finite")
        object.__setattr__(self, "d1", d1)
        object.__setattr__(self, "d2", d2)
        if self.cap_v1 < 1 or self.cap_v2 < 1:
            raise ValueError("cardinality caps must be >= 1")
        for tag in ("r0", "r1", "r2"):
            if getattr(self, tag) < 0:
                raise ValueError(f"rate {tag} must be >= 0")


@dataclass(frozen=True)
class EquivocationSearchResult:
    feasible: bool
    value: float | None
    candidate: EquivocationCandidate | None
    seed: int
    restarts: int
    wall_time: float
    message: str = ""

    def to_json(self) -> dict:
        return {
            "feasible": self.feasible,
            "value": self.value,
            "candidate": candidate_to_json(self.candidate) if self.candidate else None,
            "seed": self.seed,
            "restarts": self.restarts,
            "wall_time": self.wall_time,
            "message": self.message,
        }


@dataclass
class _EquivParams:
    """One candidate of the family: P(v1|x) rows, emission rows, V2 map."""

    e_rows: np.ndarray  # (|X|, nV1)
    py2: np.ndarray  # (nV1, |Y2|)
    py3: np.ndarray  # (nV2, |Y3|)
    g: np.ndarray  # (nV1,) -> v2 index


@dataclass
class _EquivStats:
    value: float
    h_s: float
    leak: float
    ed1: float
    ed2: float
    i_xv1: float
    i_xv2: float


def _equiv_stats(params: _EquivParams, problem: EquivocationProblem, r0: float) -> _EquivStats:
    p_x = problem.p_x.probs
    jxv = p_x[:, None] * params.e_rows  # (x, v1)
    f = jxv[:, :, None, None] * params.py2[None, :, :, None] * params.py3[params.g][None, :, None, :]
    # f axes: (x, v1, y2, y3)
    axis_of = {"X": 0, "Y2": 2, "Y3": 3}
    s_axes = tuple(axis_of[s] for s in problem.secret_set)
    keep_s = f.sum(axis=tuple(ax for ax in (0, 2, 3) if ax not in s_axes) + (1,))
    keep_sv = f.sum(axis=tuple(ax for ax in (0, 2, 3) if ax not in s_axes))
    h_s = _entropy_bits(keep_s)
    pv1 = jxv.sum(axis=0)
    leak = max(0.0, h_s + _entropy_bits(pv1) - _entropy_bits(keep_sv))
    value = h_s - max(0.0, leak - r0)

    pxy2 = f.sum(axis=(1, 3))
    pxy3 = f.sum(axis=(1, 2))
    ed1 = float((pxy2 * problem.d1).sum())
    ed2 = float((pxy3 * problem.d2).sum())
    h_x = _entropy_bits(p_x)
    i_xv1 = max(0.0, h_x + _entropy_bits(pv1) - _entropy_bits(jxv))
    n_v2 = params.py3.shape[0]
    jxv2 = np.zeros((len(p_x), n_v2))
    np.add.at(jxv2.T, params.g, jxv.T)
    i_xv2 = max(0.0, h_x + _entropy_bits(jxv2.sum(axis=0)) - _entropy_bits(jxv2))
    return _EquivStats(value, h_s, leak, ed1, ed2, i_xv1, i_xv2)


def _equiv_feasible(stats: _EquivStats, problem: EquivocationProblem) -> bool:
    return (
        stats.ed1 <= problem.max_d1 + _RATE_SLACK
        and stats.ed2 <= problem.max_d2 + _RATE_SLACK
        and stats.i_xv1 <= problem.r1 + _RATE_SLACK
        and stats.i_xv2 <= problem.r2 + _RATE_SLACK
    )


def _assemble_equiv(params: _EquivParams, problem: EquivocationProblem) -> EquivocationCandidate:
    n_v1 = params.e_rows.shape[1]
    n_v2 = params.py3.shape[0]
    p_x = problem.p_x.probs
    table = np.zeros(
        (len(p_x), problem.y2_alphabet.size, problem.y3_alphabet.size, n_v1, n_v2)
    )
    for v1 in range(n_v1):
        v2 = int(params.g[v1])
        table[:, :, :, v1, v2] = (
            (p_x * params.e_rows[:, v1])[:, None, None]
            * params.py2[v1][None, :, None]
            * params.py3[v2][None, None, :]
        )
    table = np.clip(table, 0.0, None)
    table /= table.sum()
    variables = (
        ("X", problem.p_x.alphabet),
        ("Y2", problem.y2_alphabet),
        ("Y3", problem.y3_alphabet),
        ("V1", Alphabet("V1", n_v1)),
        ("V2", Alphabet("V2", n_v2)),
    )
    return EquivocationCandidate(JointDistribution(variables, table))


def _equiv_enumeration_size(problem: EquivocationProblem) -> int:
    n_x = problem.p_x.alphabet.size
    try:
        total = (
            problem.cap_v1**n_x
            * problem.cap_v2**problem.cap_v1
            * problem.y2_alphabet.size**problem.cap_v1
            * problem.y3_alphabet.size**problem.cap_v2
        )
    except OverflowError:
        return 2**62
    return min(total, 2**62)


def _enumerate_equiv(problem: EquivocationProblem):
    n_x = problem.p_x.alphabet.size
    n_v1, n_v2 = problem.cap_v1, problem.cap_v2
    n_y2, n_y3 = problem.y2_alphabet.size, problem.y3_alphabet.size
    eye_v1 = np.eye(n_v1)
    eye_y2 = np.eye(n_y2)
    eye_y3 = np.eye(n_y3)
    for m in itertools.product(range(n_v1), repeat=n_x):
        e_rows = eye_v1[list(m)]
        for g in itertools.product(range(n_v2), repeat=n_v1):
            g_arr = np.array(g)
            for h2 in itertools.product(range(n_y2), repeat=n_v1):
                py2 = eye_y2[list(h2)]
                for h3 in itertools.product(range(n_y3), repeat=n_v2):
                    yield _EquivParams(e_rows, py2, eye_y3[list(h3)], g_arr)


def _sample_equiv(rng: np.random.Generator, problem: EquivocationProblem) -> _EquivParams:
    n_x = problem.p_x.alphabet.size
    n_v1, n_v2 = problem.cap_v1, problem.cap_v2
    n_y2, n_y3 = problem.y2_alphabet.size, problem.y3_alphabet.size

    def rows(n, k, deterministic):
        if deterministic:
            return _one_hot(rng.integers(k, size=n), k)
        return rng.dirichlet(np.ones(k), size=n)

    det = rng.random() < 0.5
    return _EquivParams(
        rows(n_x, n_v1, det),
        rows(n_v1, n_y2, det),
        rows(n_v2, n_y3, det),
        rng.integers(n_v2, size=n_v1),
    )


def _refine_equiv(
    params: _EquivParams, problem: EquivocationProblem, r0: float, maxiter: int
) -> _EquivParams | None:
    n_x = problem.p_x.alphabet.size
    n_v1, n_v2 = params.e_rows.shape[1], params.py3.shape[0]
    n_y2, n_y3 = problem.y2_alphabet.size, problem.y3_alphabet.size
    blocks = []
    if n_v1 > 1:
        blocks.append(("e", n_x, n_v1))
    if n_y2 > 1:
        blocks.append(("y2", n_v1, n_y2))
    if n_y3 > 1:
        blocks.append(("y3", n_v2, n_y3))
    size = sum(r * c for _, r, c in blocks)
    if size == 0:
        return None

    def split(theta):
        parts = {"e": params.e_rows, "y2": params.py2, "y3": params.py3}
        at = 0
        for key, rows, cols in blocks:
            parts[key] = np.clip(theta[at : at + rows * cols], 0.0, None).reshape(rows, cols)
            at += rows * cols
        return _EquivParams(parts["e"], parts["y2"], parts["y3"], params.g)

    cache: dict[bytes, _EquivStats] = {}

    def stats_at(theta):
        key = theta.tobytes()
        hit = cache.get(key)
        if hit is None:
            if len(cache) > 8192:
                cache.clear()
            hit = _equiv_stats(split(theta), problem, r0)
            cache[key] = hit
        return hit

    theta0 = np.concatenate(
        [
            {"e": params.e_rows, "y2": params.py2, "y3": params.py3}[key].reshape(-1)
            for key, _, _ in blocks
        ]
    )
    cons = []
    at = 0
    for _, rows, cols in blocks:
        for r in range(rows):
            sl = slice(at + r * cols, at + (r + 1) * cols)
            cons.append({"type": "eq", "fun": (lambda th, s=sl: th[s].sum() - 1.0)})
        at += rows * cols
    for attr, cap in (
        ("ed1", problem.max_d1),
        ("ed2", problem.max_d2),
        ("i_xv1", problem.r1),
        ("i_xv2", problem.r2),
    ):
        if math.isfinite(cap):
            cons.append(
                {"type": "ineq", "fun": (lambda th, a=attr, c=cap: c - getattr(stats_at(th), a))}
            )
    try:
        res = minimize(
            lambda th: -stats_at(th).value,
            theta0,
            method="SLSQP",
            bounds=[(0.0, 1.0)] * size,
            constraints=cons,
            options={"maxiter": maxiter, "ftol": 1e-12},
        )
    except (ValueError, FloatingPointError):
        return None
    refined = split(np.asarray(res.x))
    # renormalize rows exactly
    def norm(rows_arr):
        s = rows_arr.sum(axis=1, keepdims=True)
        s[s == 0.0] = 1.0
        return rows_arr / s

    return _EquivParams(norm(refined.e_rows), norm(refined.py2), norm(refined.py3), params.g)


def search_equivocation(
    problem: EquivocationProblem,
    *,
    restarts: int = 64,
    seed: int = 0,
    workers: int = 1,
    refine_top: int = 16,
    maxiter: int = 80,
    enum_limit: int = DEFAULT_ENUM_LIMIT,
) -> EquivocationSearchResult:
    """Best disclosure-family value found under distortion/rate budgets."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    started = time.perf_counter()
    pool: list[tuple[_EquivStats, _EquivParams]] = []

    if _equiv_enumeration_size(problem) <= enum_limit:
        for params in _enumerate_equiv(problem):
            stats = _equiv_stats(params, problem, problem.r0)
            if _equiv_feasible(stats, problem):
                pool.append((stats, params))

    def run_restart(index: int):
        rng = _rng_for(seed, index)
        params = _sample_equiv(rng, problem)
        return (index, params, _equiv_stats(params, problem, problem.r0))

    indices = list(range(restarts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as tpool:
            sampled = list(tpool.map(run_restart, indices))
    else:
        sampled = [run_restart(i) for i in indices]

    def relaxed(stats: _EquivStats) -> float:
        pen = 0.0
        for got, cap in (
            (stats.ed1, problem.max_d1),
            (stats.ed2, problem.max_d2),
            (stats.i_xv1, problem.r1),
            (stats.i_xv2, problem.r2),
        ):
            if math.isfinite(cap):
                pen += max(0.0, got - cap)
        return stats.value - 100.0 * pen

    for _, params, stats in sampled:
        if _equiv_feasible(stats, problem):
            pool.append((stats, params))
    ranked = sorted(sampled, key=lambda t: (-relaxed(t[2]), t[0]))

    def refine_one(job):
        _, params, _ = job
        out = []
        better = _refine_equiv(params, problem, problem.r0, maxiter)
        if better is not None:
            st = _equiv_stats(better, problem, problem.r0)
            if _equiv_feasible(st, problem):
                out.append((st, better))
        return out

    jobs = ranked[:refine_top]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as tpool:
            refined = list(tpool.map(refine_one, jobs))
    else:
        refined = [refine_one(j) for j in jobs]
    for lst in refined:
        pool.extend(lst)

    wall = time.perf_counter() - started
    if not pool:
        return EquivocationSearchResult(
            False,
            None,
            None,
            seed,
            restarts,
            wall,
            "infeasible: no candidate met the distortion/rate budget",
        )
    best_value = max(st.value for st, _ in pool)
    finalists = [(st, p) for st, p in pool if st.value >= best_value - 1e-12]
    assembled = [(_assemble_equiv(p, problem), st) for st, p in finalists]
    assembled.sort(key=lambda pair: (-pair[1].value, _candidate_digest(pair[0])))
    cand, st = assembled[0]
    return EquivocationSearchResult(True, st.value, cand, seed, restarts, wall)


@dataclass(frozen=True)
class SweepPoint:
    r0: float
    value: float


def equivocation_sweep(
    problem: EquivocationProblem,
    r0_grid: list[float] | tuple[float, ...],
    *,
    restarts: int = 64,
    seed: int = 0,
    workers: int = 1,
    **kwargs,
) -> list[SweepPoint]:
    """The value curve over a grid of key rates.

    Witnesses found at any grid point are pooled: family membership does
    not involve R0, so every witness is valid at every R0 and the curve
    is nondecreasing by construction.
    """
    witnesses: list[tuple[float, float]] = []  # (h_s, leak)
    for gi, r0 in enumerate(r0_grid):
        res = search_equivocation(
            replace(problem, r0=float(r0)),
            restarts=restarts,
            seed=seed + 7919 * gi,
            workers=workers,
            **kwargs,
        )
        if res.feasible:
            h_s = equivocation_value(res.candidate, problem.secret_set, 10**9, check=False)
            leak = h_s - equivocation_value(res.candidate, problem.secret_set, 0.0, check=False)
            witnesses.append((h_s, leak))
    out = []
    for r0 in r0_grid:
        vals = [h - max(0.0, leak - r0) for h, leak in witnesses]
        out.append(SweepPoint(float(r0), max(vals) if vals else -math.inf))
    return out


@dataclass(frozen=True)
class KeyRateResult:
    feasible: bool
    r0: float | None
    result: SearchResult | None
    target_pi: float
    evaluations: int


def min_key_rate(
    problem: InnerSearchProblem,
    target_pi: float,
    *,
    tol: float = 1e-3,
    restarts: int = 32,
    seed: int = 0,
    workers: int = 1,
    **kwargs,
) -> KeyRateResult:
    """Smallest key budget (within ``tol``) whose search clears ``target_pi``.

    Bisects the R0 budget, reusing the search at each midpoint.  Requires
    a finite R0 budget in ``problem`` as the upper end.
    """
    hi = problem.budget.r0
    if not math.isfinite(hi):
        raise ValueError("min_key_rate needs a finite r0 budget as the upper end")

    def attempt(r0: float, step: int) -> SearchResult:
        budget = RateBudget(r0, problem.budget.r1, problem.budget.r2)
        return search_inner(
            replace(problem, budget=budget),
            restarts=restarts,
            seed=seed + 104729 * step,
            workers=workers,
            **kwargs,
        )

    evaluations = 1
    best = attempt(hi, 0)
    if not (best.feasible and best.tuple.pi >= target_pi):
        return KeyRateResult(False, None, best, target_pi, evaluations)
    lo, best_r0 = 0.0, hi
    step = 1
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        res = attempt(mid, step)
        evaluations += 1
        step += 1
        if res.feasible and res.tuple.pi >= target_pi:
            hi, best, best_r0 = mid, res, mid
        else:
            lo = mid
    return KeyRateResult(True, best_r0, best, target_pi, evaluations)
