"""Operational simulation of the cascade scheme at tiny blocklength.

The encoder holds random superposition codebooks: a coarse codebook of
u2-sequences, refined per key value by v2-sequences, and a second layer
(u1, then v1) refining both.  A likelihood encoder picks indices with
probability proportional to the source sequence's likelihood under the
indexed codewords; nodes 2 and 3 emit their actions memorylessly from
the selected v1 and v2 codewords.  The adversary knows the codebooks
and the public messages but not the key, and acts at each time t after
seeing the disclosed signals of times before t.

Everything here is exact: the system joint is enumerated in full at
small blocklength, and the Monte Carlo estimator samples only the outer
expectation over histories — each sampled history is still scored
against its exactly-computed posterior.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import (
    ConstraintViolationError,
    InnerCandidate,
    SideInfoSpec,
    candidate_to_json,
    check_inner_constraints,
    inner_candidate_from_json,
    side_info_from_json,
    side_info_to_json,
)
from .payoff import LogLossPayoff, PayoffTable, _batched_values
from .probability import (
    Alphabet,
    CapExceededError,
    JointDistribution,
    ZeroProbabilityError,
    conditional_mutual_information,
    mutual_information,
    product_alphabet,
)
from .rng import (
    STREAM_ENCODER,
    STREAM_SAMPLE,
    STREAM_U1,
    STREAM_U2,
    STREAM_V1,
    STREAM_V2,
    sample_pmf,
    sample_rows,
    stream,
)

__all__ = [
    "DEFAULT_EPSILON",
    "DEFAULT_CELL_CAP",
    "IndexBits",
    "SchemeSpec",
    "CodebookSet",
    "SystemTable",
    "auto_index_bits",
    "build_codebooks",
    "encoder_distribution",
    "likelihood_encode",
    "run_system_exact",
    "simulate_payoff",
    "empirical_equivocation",
    "history_posterior",
    "mc_estimate",
    "scheme_spec_to_json",
    "scheme_spec_from_json",
]

DEFAULT_EPSILON = 0.1
DEFAULT_CELL_CAP = 1 << 24


@dataclass(frozen=True)
class IndexBits:
    """Bit counts for the four message indices and the key.

    Index spaces have sizes 2**bits, so zero bits means a singleton
    index.  ``key`` is the per-block key budget b0.
    """

    a: int
    b: int
    c: int
    d: int
    key: int

    def __post_init__(self) -> None:
        for tag in ("a", "b", "c", "d", "key"):
            v = getattr(self, tag)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 0:
                raise ValueError(f"index bits {tag} must be a nonnegative integer")
            object.__setattr__(self, tag, int(v))

    @property
    def sizes(self) -> tuple[int, int, int, int, int]:
        return (2**self.a, 2**self.b, 2**self.c, 2**self.d, 2**self.key)


def _bits_for(n: int, rate: float) -> int:
    # ceil of n*rate with a dust guard so exact integers stay put
    return max(0, math.ceil(n * rate - 1e-9))


def auto_index_bits(
    inner: InnerCandidate, n: int, *, key: int, epsilon: float = DEFAULT_EPSILON
) -> IndexBits:
    """Index sizes covering the superposition rates at blocklength n.

    Each message layer gets ceil(n * (I + epsilon)) bits, with the
    mutual informations read off the candidate; the key budget is
    explicit because it is the experiment's independent variable.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    joint = inner.joint
    i_a = mutual_information(joint, inner.x, inner.u2)
    i_b = conditional_mutual_information(joint, inner.x, inner.v2, inner.u2)
    i_c = conditional_mutual_information(joint, inner.x, inner.u1, inner.v2)
    i_d = conditional_mutual_information(
        joint, inner.x, inner.v1, inner.u1 + inner.v2
    )
    return IndexBits(
        a=_bits_for(n, i_a + epsilon),
        b=_bits_for(n, i_b + epsilon),
        c=_bits_for(n, i_c + epsilon),
        d=_bits_for(n, i_d + epsilon),
        key=key,
    )


@dataclass(frozen=True)
class SchemeSpec:
    """A complete, reproducible scheme configuration.

    The candidate supplies every conditional the construction needs; the
    seed pins the codebook draw.  ``epsilon`` records the rate slack the
    index sizes were derived with (informational when they are set by
    hand).
    """

    n: int
    inner: InnerCandidate
    index_bits: IndexBits
    side: SideInfoSpec
    seed: int = 0
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError("blocklength n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")
        report = check_inner_constraints(self.inner)
        if not report.passed:
            raise ConstraintViolationError(report)
        sizes = {
            "ch1": _role_size(self.inner, self.inner.x),
            "ch2": _role_size(self.inner, self.inner.y2),
            "ch3": _role_size(self.inner, self.inner.y3),
        }
        for tag, want in sizes.items():
            got = getattr(self.side, tag).input_alphabets[0].size
            if got != want:
                raise ValueError(
                    f"side-info {tag} expects an input of size {got}, "
                    f"the candidate's role has size {want}"
                )


def _role_size(cand: InnerCandidate, role: tuple[str, ...]) -> int:
    return math.prod(cand.joint.alphabet(name).size for name in role)


def _role_alphabet(cand: InnerCandidate, role: tuple[str, ...], name: str) -> Alphabet:
    if len(role) == 1:
        base = cand.joint.alphabet(role[0])
        return Alphabet(name, base.size, base.labels)
    return product_alphabet(name, *(cand.joint.alphabet(r) for r in role))


def _grouped(joint: JointDistribution, *groups: tuple[str, ...]) -> np.ndarray:
    """Joint probability table over flattened role groups (row-major).

    Groups may share variables; cells where shared variables disagree
    get zero mass, which is exactly the joint's own statement.
    """
    names: list[str] = []
    for g in groups:
        for n in g:
            if n not in names:
                names.append(n)
    axis_of = {n: i for i, n in enumerate(names)}
    drop = tuple(i for i, (nm, _) in enumerate(joint.variables) if nm not in axis_of)
    marg = joint.table.sum(axis=drop) if drop else joint.table
    present = [nm for nm, _ in joint.variables if nm in axis_of]
    marg = np.transpose(marg, [present.index(nm) for nm in names])
    grids = np.indices(marg.shape)
    out = np.zeros(tuple(math.prod(joint.alphabet(n).size for n in g) for g in groups))
    flat = tuple(
        np.ravel_multi_index(
            [grids[axis_of[n]] for n in g], tuple(joint.alphabet(n).size for n in g)
        ).ravel()
        for g in groups
    )
    np.add.at(out, flat, marg.ravel())
    return out


def _conditional_rows(joint_ab: np.ndarray) -> np.ndarray:
    """P(B|A) rows from a grouped joint whose last axis is B.

    Rows of zero-mass conditions are unreachable; they get a uniform
    placeholder that no draw ever selects.
    """
    flat = joint_ab.reshape(-1, joint_ab.shape[-1])
    mass = flat.sum(axis=1, keepdims=True)
    safe = np.where(mass > 0.0, mass, 1.0)
    rows = flat / safe
    rows[mass[:, 0] == 0.0] = 1.0 / joint_ab.shape[-1]
    return rows.reshape(joint_ab.shape)


class _Scheme:
    """Compiled conditionals of a spec, flattened to plain arrays."""

    def __init__(self, spec: SchemeSpec):
        cand = spec.inner
        joint = cand.joint
        self.spec = spec
        self.x_alphabet = _role_alphabet(cand, cand.x, "X")
        self.y2_alphabet = _role_alphabet(cand, cand.y2, "Y2")
        self.y3_alphabet = _role_alphabet(cand, cand.y3, "Y3")
        self.nx = self.x_alphabet.size
        self.ny2 = self.y2_alphabet.size
        self.ny3 = self.y3_alphabet.size
        self.nu1 = _role_size(cand, cand.u1)
        self.nu2 = _role_size(cand, cand.u2)
        self.nv1 = _role_size(cand, cand.v1)
        self.nv2 = _role_size(cand, cand.v2)

        self.p_x = _grouped(joint, cand.x)
        self.p_u2 = _grouped(joint, cand.u2)
        self.v2_of_u2 = _conditional_rows(_grouped(joint, cand.u2, cand.v2))
        self.u1_of_u2 = _conditional_rows(_grouped(joint, cand.u2, cand.u1))
        self.v1_of_u1v2 = _conditional_rows(
            _grouped(joint, cand.u1, cand.v2, cand.v1)
        )
        self.x_of_v1v2 = _conditional_rows(_grouped(joint, cand.v1, cand.v2, cand.x))
        self.y2_of_v1 = _conditional_rows(_grouped(joint, cand.v1, cand.y2))
        self.y3_of_v2 = _conditional_rows(_grouped(joint, cand.v2, cand.y3))

        side = spec.side
        d = np.einsum(
            "xa,yb,zc->xyzabc", side.ch1.rows, side.ch2.rows, side.ch3.rows
        )
        self.n_w = (
            side.ch1.output_alphabet.size
            * side.ch2.output_alphabet.size
            * side.ch3.output_alphabet.size
        )
        self.disclosure = d.reshape(self.nx * self.ny2 * self.ny3, self.n_w)
        self.w_alphabet = product_alphabet(
            "W",
            side.ch1.output_alphabet,
            side.ch2.output_alphabet,
            side.ch3.output_alphabet,
        )


@dataclass(frozen=True)
class CodebookSet:
    """Drawn codebooks; all sequences are symbols of the flattened roles.

    Shapes: u2 (Ma, n), v2 (Ma, Mb, K, n), u1 (Ma, Mc, n),
    v1 (Ma, Mb, Mc, Md, K, n).  The key axis is drawn leading, so
    enlarging the key space keeps the existing codewords in place.
    """

    spec: SchemeSpec
    u2: np.ndarray
    v2: np.ndarray
    u1: np.ndarray
    v1: np.ndarray


def build_codebooks(spec: SchemeSpec, *, cell_cap: int = DEFAULT_CELL_CAP) -> CodebookSet:
    """Sample the nested codebooks from the spec's seed.

    Raises CapExceededError with the required sizes when the index
    spaces are too large to materialize.
    """
    scheme = _Scheme(spec)
    n = spec.n
    m_a, m_b, m_c, m_d, n_k = spec.index_bits.sizes
    need = {
        "u2": m_a * n,
        "v2": m_a * m_b * n_k * n,
        "u1": m_a * m_c * n,
        "v1": m_a * m_b * m_c * m_d * n_k * n,
    }
    total = sum(need.values())
    if total > cell_cap:
        raise CapExceededError(
            f"codebooks need {total} cells ({need}), cap is {cell_cap}"
        )
    seed = spec.seed

    u2 = sample_pmf(stream(seed, STREAM_U2), scheme.p_u2, (m_a, n))

    # key-leading draw order makes a larger key space an extension of a
    # smaller one (same seed): the monotonicity-in-key property needs it
    given_v2 = np.broadcast_to(u2[None, :, None, :], (n_k, m_a, m_b, n))
    v2 = sample_rows(stream(seed, STREAM_V2), scheme.v2_of_u2, given_v2)
    v2 = np.ascontiguousarray(np.moveaxis(v2, 0, 2))

    given_u1 = np.broadcast_to(u2[:, None, :], (m_a, m_c, n))
    u1 = sample_rows(stream(seed, STREAM_U1), scheme.u1_of_u2, given_u1)

    pair_rows = scheme.v1_of_u1v2.reshape(scheme.nu1 * scheme.nv2, scheme.nv1)
    u1_b = u1[None, :, None, :, None, :]
    v2_b = np.moveaxis(v2, 2, 0)[:, :, :, None, None, :]
    given_v1 = (
        np.broadcast_to(u1_b, (n_k, m_a, m_b, m_c, m_d, n)) * scheme.nv2
        + np.broadcast_to(v2_b, (n_k, m_a, m_b, m_c, m_d, n))
    )
    v1 = sample_rows(stream(seed, STREAM_V1), pair_rows, given_v1)
    v1 = np.ascontiguousarray(np.moveaxis(v1, 0, 4))

    cb = CodebookSet(spec, u2, v2, u1, v1)
    _verify_support(scheme, cb)
    return cb


def _verify_support(scheme: _Scheme, cb: CodebookSet) -> None:
    """Every drawn symbol must be possible under its conditioning parents."""
    n_k = cb.v2.shape[2]
    m_a, m_b, m_c, m_d = cb.v1.shape[:4]
    n = cb.u2.shape[1]
    checks = [
        scheme.p_u2[cb.u2],
        np.take_along_axis(
            scheme.v2_of_u2[np.broadcast_to(cb.u2[:, None, None, :], cb.v2.shape)],
            cb.v2[..., None],
            axis=-1,
        ),
        np.take_along_axis(
            scheme.u1_of_u2[np.broadcast_to(cb.u2[:, None, :], cb.u1.shape)],
            cb.u1[..., None],
            axis=-1,
        ),
    ]
    u1_full = np.broadcast_to(cb.u1[:, None, :, None, None, :], cb.v1.shape)
    v2_full = np.broadcast_to(cb.v2[:, :, None, None, :, :], cb.v1.shape)
    rows = scheme.v1_of_u1v2[u1_full, v2_full]
    checks.append(np.take_along_axis(rows, cb.v1[..., None], axis=-1))
    for arr in checks:
        if arr.size and float(arr.min()) <= 0.0:
            raise ValueError("codebook draw hit a zero-probability symbol")


def _encoder_weights(scheme: _Scheme, cb: CodebookSet, k: int) -> np.ndarray:
    """Unnormalized likelihood of every (m, x^n) cell at key value k.

    Shape (Ma, Mb, Mc, Md) + (|X|,)*n.
    """
    n = cb.spec.n
    m_shape = cb.v1.shape[:4]
    v1k = cb.v1[..., k, :]
    v2k = cb.v2[:, :, k, :][:, :, None, None, :]
    out = np.ones(m_shape + (scheme.nx,) * n)
    for t in range(n):
        rows = scheme.x_of_v1v2[v1k[..., t], np.broadcast_to(v2k[..., t], m_shape)]
        shape = m_shape + tuple(scheme.nx if s == t else 1 for s in range(n))
        out = out * rows.reshape(shape)
    return out


def encoder_distribution(x_seq, k: int, cb: CodebookSet) -> np.ndarray:
    """Exact conditional distribution of the index tuple given (x^n, k)."""
    scheme = _Scheme(cb.spec)
    x_seq = _validated_sequence(x_seq, cb.spec.n, scheme.nx, "x_seq")
    n_k = cb.v2.shape[2]
    if not 0 <= k < n_k:
        raise ValueError(f"key value {k} outside range 0..{n_k - 1}")
    weights = _encoder_weights(scheme, cb, k)[(...,) + tuple(x_seq)]
    total = weights.sum()
    if total <= 0.0:
        raise ZeroProbabilityError("source sequence outside scheme support")
    return weights / total


def likelihood_encode(x_seq, k: int, cb: CodebookSet, seed: int) -> tuple[int, int, int, int]:
    """Sample the index tuple proportionally to codeword likelihood."""
    dist = encoder_distribution(x_seq, k, cb)
    flat = int(sample_pmf(stream(seed, STREAM_ENCODER), dist.ravel(), ()))
    return tuple(int(i) for i in np.unravel_index(flat, dist.shape))


def _validated_sequence(seq, n: int, size: int, what: str) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.int64)
    if arr.shape != (n,):
        raise ValueError(f"{what} must be a length-{n} sequence")
    if arr.size and (arr.min() < 0 or arr.max() >= size):
        raise ValueError(f"{what} entries must lie in 0..{size - 1}")
    return arr


@dataclass(frozen=True)
class SystemTable:
    """Exact joint of one fixed codebook draw.

    Axes are (K, Ma, Mb, Mc, Md, X_1..X_n, Y2_1..Y2_n, Y3_1..Y3_n); the
    disclosed signals are not materialized — they are a memoryless
    channel of the per-time triples and get adjoined where needed.
    """

    spec: SchemeSpec
    codebooks: CodebookSet
    table: np.ndarray

    def to_joint(self) -> JointDistribution:
        scheme = _Scheme(self.spec)
        m_a, m_b, m_c, m_d, n_k = self.spec.index_bits.sizes
        n = self.spec.n
        variables = [
            ("K", Alphabet("K", n_k)),
            ("Ma", Alphabet("Ma", m_a)),
            ("Mb", Alphabet("Mb", m_b)),
            ("Mc", Alphabet("Mc", m_c)),
            ("Md", Alphabet("Md", m_d)),
        ]
        for t in range(n):
            variables.append((f"X{t + 1}", Alphabet(f"X{t + 1}", scheme.nx, scheme.x_alphabet.labels)))
        for t in range(n):
            variables.append((f"Y2_{t + 1}", Alphabet(f"Y2_{t + 1}", scheme.ny2, scheme.y2_alphabet.labels)))
        for t in range(n):
            variables.append((f"Y3_{t + 1}", Alphabet(f"Y3_{t + 1}", scheme.ny3, scheme.y3_alphabet.labels)))
        return JointDistribution(tuple(variables), self.table)


def run_system_exact(spec: SchemeSpec, *, cell_cap: int = DEFAULT_CELL_CAP) -> SystemTable:
    """Enumerate the full system joint for one codebook draw."""
    scheme = _Scheme(spec)
    cb = build_codebooks(spec, cell_cap=cell_cap)
    n = spec.n
    m_a, m_b, m_c, m_d, n_k = spec.index_bits.sizes
    m_cells = m_a * m_b * m_c * m_d
    sym_cells = (scheme.nx * scheme.ny2 * scheme.ny3) ** n
    if n_k * m_cells * sym_cells > cell_cap:
        raise CapExceededError(
            f"system table needs {n_k * m_cells * sym_cells} cells, cap is {cell_cap}"
        )

    px_block = np.ones((scheme.nx,) * n)
    for t in range(n):
        px_block = px_block * scheme.p_x.reshape(
            tuple(scheme.nx if s == t else 1 for s in range(n))
        )

    shape = (n_k, m_a, m_b, m_c, m_d) + (scheme.nx,) * n + (scheme.ny2,) * n + (scheme.ny3,) * n
    table = np.zeros(shape)
    for k in range(n_k):
        weights = _encoder_weights(scheme, cb, k)
        denom = weights.reshape(m_cells, -1).sum(axis=0).reshape((scheme.nx,) * n)
        if float(denom.min()) <= 0.0:
            raise ZeroProbabilityError("source sequence outside scheme support")
        enc = weights / denom
        prior = (px_block / n_k) * enc
        for m in np.ndindex(m_a, m_b, m_c, m_d):
            v1_seq = cb.v1[m][k]
            v2_seq = cb.v2[m[0], m[1], k]
            block = prior[m].reshape((scheme.nx,) * n + (1,) * (2 * n))
            y2_block = np.ones((1,) * n + (scheme.ny2,) * n + (1,) * n)
            y3_block = np.ones((1,) * (2 * n) + (scheme.ny3,) * n)
            for t in range(n):
                y2_shape = [1] * (3 * n)
                y2_shape[n + t] = scheme.ny2
                y2_block = y2_block * scheme.y2_of_v1[v1_seq[t]].reshape(y2_shape)
                y3_shape = [1] * (3 * n)
                y3_shape[2 * n + t] = scheme.ny3
                y3_block = y3_block * scheme.y3_of_v2[v2_seq[t]].reshape(y3_shape)
            table[(k,) + m] = block * y2_block * y3_block

    total = float(table.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"system table sums to {total}, expected 1")
    return SystemTable(spec, cb, table)


def _time_grouped(table: SystemTable) -> tuple[np.ndarray, _Scheme]:
    """Messages flattened, per-time (x, y2, y3) triples flattened."""
    scheme = _Scheme(table.spec)
    n = table.spec.n
    m_cells = math.prod(table.spec.index_bits.sizes[:4])
    q = table.table.sum(axis=0)
    perm = list(range(4)) + [
        4 + block * n + t for t in range(n) for block in range(3)
    ]
    q = np.transpose(q, perm)
    j = scheme.nx * scheme.ny2 * scheme.ny3
    return q.reshape((m_cells,) + (j,) * n), scheme


def _row_values(rows: np.ndarray, payoff, scheme: _Scheme) -> np.ndarray:
    """Adversary-minimized expected payoff of each unnormalized row."""
    if isinstance(payoff, LogLossPayoff):
        shaped = rows.reshape(rows.shape[0], scheme.nx, scheme.ny2, scheme.ny3)
        drop = tuple(
            1 + i for i, role in enumerate(("X", "Y2", "Y3"))
            if role not in payoff.secret_set
        )
        p_s = shaped.sum(axis=drop) if drop else shaped
        p_s = p_s.reshape(rows.shape[0], -1)
        mass = p_s.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(p_s > 0.0, p_s * np.log2(p_s), 0.0)
            mlogm = np.where(mass > 0.0, mass * np.log2(mass), 0.0)
        return -plogp.sum(axis=1) + mlogm
    return _batched_values(rows, payoff).min(axis=1)


def simulate_payoff(table: SystemTable, payoff) -> float:
    """Average adversary-optimal payoff over times and histories.

    Strictly causal: the time-t posterior conditions on the messages and
    the disclosed signals of times 1..t-1 only.
    """
    _check_payoff_alphabets(payoff, _Scheme(table.spec))
    q, scheme = _time_grouped(table)
    n = table.spec.n
    j = scheme.nx * scheme.ny2 * scheme.ny3
    total = 0.0
    for t in range(n):
        cur = q.sum(axis=tuple(range(2 + t, 1 + n)))
        for _ in range(t):
            # disclose the leading prefix triple, moving its signal last
            cur = np.tensordot(cur, scheme.disclosure, axes=([1], [0]))
        # axes now (m, current triple, w_1..w_{t-1}); histories flat
        cur = np.moveaxis(cur, 1, -1)
        rows = cur.reshape(-1, j)
        total += float(_row_values(rows, payoff, scheme).sum())
    return total / n


def _check_payoff_alphabets(payoff, scheme: _Scheme) -> None:
    if isinstance(payoff, LogLossPayoff):
        return
    want = (scheme.nx, scheme.ny2, scheme.ny3)
    got = (
        payoff.x_alphabet.size,
        payoff.y2_alphabet.size,
        payoff.y3_alphabet.size,
    )
    if want != got:
        raise ValueError(f"payoff alphabets {got} do not match the scheme's {want}")


def empirical_equivocation(table: SystemTable, secret_set) -> float:
    """Exact per-symbol equivocation (1/n) H(S^n | messages)."""
    roles = LogLossPayoff(tuple(secret_set)).secret_set
    q, scheme = _time_grouped(table)
    n = table.spec.n
    shaped = q.reshape(
        (q.shape[0],) + (scheme.nx, scheme.ny2, scheme.ny3) * n
    )
    drop = tuple(
        1 + 3 * t + i
        for t in range(n)
        for i, role in enumerate(("X", "Y2", "Y3"))
        if role not in roles
    )
    p_sm = shaped.sum(axis=drop) if drop else shaped
    p_m = p_sm.reshape(p_sm.shape[0], -1).sum(axis=1)
    return (_entropy_bits(p_sm) - _entropy_bits(p_m)) / n


def _entropy_bits(table: np.ndarray) -> float:
    p = table[table > 0.0]
    return float(-(p * np.log2(p)).sum())


class _PosteriorEngine:
    """Exact adversary posteriors for one codebook set.

    The encoder weights are enumerated once per key value; a posterior
    query then costs one pass over (k, x^n) for the sampled message and
    disclosure prefix — the incremental computation that the Monte
    Carlo estimator and the trace output share.
    """

    def __init__(self, cb: CodebookSet):
        self.cb = cb
        self.scheme = _Scheme(cb.spec)
        self.n = cb.spec.n
        m_a, m_b, m_c, m_d, self.n_k = cb.spec.index_bits.sizes
        self.m_cells = m_a * m_b * m_c * m_d
        scheme = self.scheme
        px_block = np.ones((scheme.nx,) * self.n)
        for t in range(self.n):
            px_block = px_block * scheme.p_x.reshape(
                tuple(scheme.nx if s == t else 1 for s in range(self.n))
            )
        self.enc = np.zeros((self.n_k, m_a, m_b, m_c, m_d) + (scheme.nx,) * self.n)
        for k in range(self.n_k):
            weights = _encoder_weights(scheme, cb, k)
            denom = weights.reshape(self.m_cells, -1).sum(axis=0)
            denom = denom.reshape((scheme.nx,) * self.n)
            if float(denom.min()) <= 0.0:
                raise ZeroProbabilityError("source sequence outside scheme support")
            self.enc[k] = (px_block / self.n_k) * (weights / denom)

    def posterior(self, m: tuple[int, int, int, int], w_prefix) -> np.ndarray:
        """Normalized posterior over the time-t triple, t = len(w_prefix)."""
        scheme = self.scheme
        t = len(w_prefix)
        if t >= self.n:
            raise ValueError("disclosure prefix must be shorter than the block")
        d = scheme.disclosure.reshape(
            scheme.nx, scheme.ny2 * scheme.ny3, scheme.n_w
        )
        post = np.zeros(scheme.nx * scheme.ny2 * scheme.ny3)
        for k in range(self.n_k):
            v1_seq = self.cb.v1[m][k]
            v2_seq = self.cb.v2[m[0], m[1], k]
            w = self.enc[(k,) + m]
            for s in range(t):
                emit = np.outer(
                    scheme.y2_of_v1[v1_seq[s]], scheme.y3_of_v2[v2_seq[s]]
                ).ravel()
                f_s = d[:, :, w_prefix[s]] @ emit  # per-x disclosure likelihood
                shape = tuple(scheme.nx if r == s else 1 for r in range(self.n))
                w = w * f_s.reshape(shape)
            margin = w.sum(axis=tuple(r for r in range(self.n) if r != t))
            emit_t = np.outer(
                scheme.y2_of_v1[v1_seq[t]], scheme.y3_of_v2[v2_seq[t]]
            )
            post += (margin[:, None, None] * emit_t.reshape(1, scheme.ny2, scheme.ny3)).ravel()
        total = post.sum()
        if total <= 0.0:
            raise ZeroProbabilityError("history has zero probability")
        return post / total


def history_posterior(cb: CodebookSet, m, w_prefix) -> np.ndarray:
    """Exact posterior of the current (x, y2, y3) triple given a history.

    ``m`` is the message tuple, ``w_prefix`` the disclosed signals of
    earlier times; the result is the flat posterior the adversary best-
    responds to at time len(w_prefix) + 1.
    """
    m = tuple(int(i) for i in m)
    if len(m) != 4:
        raise ValueError("message must be a 4-tuple of indices")
    return _PosteriorEngine(cb).posterior(m, list(w_prefix))


def mc_estimate(
    spec: SchemeSpec,
    payoff,
    samples: int,
    seed: int,
    *,
    workers: int = 1,
    trace=None,
) -> tuple[float, float]:
    """Monte Carlo payoff estimate with its CLT standard error.

    Histories are sampled; each history is scored against its exact
    posterior, so the only noise is the outer expectation.  Per-sample
    streams make the result independent of the worker count.  The draw
    order within a sample is fixed: key, source symbols, encoder index,
    node-2 actions, node-3 actions, disclosed signals.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples for a standard error")
    engine = _PosteriorEngine(build_codebooks(spec))
    scheme = engine.scheme
    _check_payoff_alphabets(payoff, scheme)
    n = spec.n
    key_pmf = np.full(engine.n_k, 1.0 / engine.n_k)

    def one(sample: int) -> tuple[float, list[list]]:
        gen = stream(seed, STREAM_SAMPLE, row=sample)
        k = int(sample_pmf(gen, key_pmf, ()))
        x_seq = sample_pmf(gen, scheme.p_x, (n,))
        # engine.enc[k] is prior * encoder; slicing at x^n leaves a
        # vector proportional to the encoder conditional
        weights = engine.enc[(k,) + (...,) + tuple(x_seq)]
        enc = weights / weights.sum()
        m = tuple(
            int(i)
            for i in np.unravel_index(
                int(sample_pmf(gen, enc.ravel(), ())), enc.shape
            )
        )
        v1_seq = engine.cb.v1[m][k]
        v2_seq = engine.cb.v2[m[0], m[1], k]
        y2_seq = sample_rows(gen, scheme.y2_of_v1, v1_seq)
        y3_seq = sample_rows(gen, scheme.y3_of_v2, v2_seq)
        triples = np.ravel_multi_index(
            (x_seq, y2_seq, y3_seq), (scheme.nx, scheme.ny2, scheme.ny3)
        )
        w_seq = sample_rows(gen, scheme.disclosure, triples)
        value = 0.0
        rows = []
        for t in range(n):
            post = engine.posterior(m, list(w_seq[:t]))
            v = float(_row_values(post[None, :], payoff, scheme)[0])
            value += v
            if trace is not None:
                history = ":".join(str(i) for i in m)
                if t:
                    history += "|" + ",".join(str(int(w)) for w in w_seq[:t])
                rows.append(
                    [sample, t + 1, history, round(_entropy_bits(post), 12),
                     _action_label(post, payoff), v]
                )
        return value / n, rows

    indices = range(samples)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, indices))
    else:
        results = [one(i) for i in indices]

    values = np.array([v for v, _ in results])
    if trace is not None:
        _write_trace(trace, (row for _, rows in results for row in rows))
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(samples))
    return mean, se


def _action_label(post: np.ndarray, payoff) -> str:
    if isinstance(payoff, LogLossPayoff):
        return "posterior"
    vals = _batched_values(post[None, :], payoff)[0]
    return payoff.z_alphabet.label(int(np.argmin(vals)))


def _write_trace(trace, rows) -> None:
    header = ["sample", "t", "history", "posterior_entropy", "action", "payoff"]
    if hasattr(trace, "write"):
        writer = csv.writer(trace, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    with open(trace, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def scheme_spec_to_json(spec: SchemeSpec) -> dict:
    return {
        "n": spec.n,
        "inner": candidate_to_json(spec.inner),
        "index_bits": {
            "a": spec.index_bits.a,
            "b": spec.index_bits.b,
            "c": spec.index_bits.c,
            "d": spec.index_bits.d,
            "key": spec.index_bits.key,
        },
        "side": side_info_to_json(spec.side),
        "seed": spec.seed,
        "epsilon": spec.epsilon,
    }


def scheme_spec_from_json(obj) -> SchemeSpec:
    bits = obj["index_bits"]
    return SchemeSpec(
        n=int(obj["n"]),
        inner=inner_candidate_from_json(obj["inner"]),
        index_bits=IndexBits(
            a=int(bits["a"]),
            b=int(bits["b"]),
            c=int(bits["c"]),
            d=int(bits["d"]),
            key=int(bits["key"]),
        ),
        side=side_info_from_json(obj["side"]),
        seed=int(obj.get("seed", 0)),
        epsilon=float(obj.get("epsilon", DEFAULT_EPSILON)),
    )
