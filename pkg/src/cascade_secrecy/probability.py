"""Exact probability calculus on finite alphabets.

Distributions are dense float64 tensors with one axis per named variable,
always in row-major (C) layout.  All information measures are in bits
(base-2 logarithms) and use the convention 0 log 0 = 0.  Every type is a
frozen dataclass whose array payload is copied on construction and marked
read-only, so instances can be shared freely; all operations are pure
functions returning new objects.

Tensor growth (products, channel attachment) is guarded by a cell cap,
``DEFAULT_CELL_CAP`` cells by default, so an over-ambitious construction
fails with :class:`CapExceededError` instead of exhausting memory.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "DEFAULT_CELL_CAP",
    "PROB_SUM_TOL",
    "CapExceededError",
    "ZeroProbabilityError",
    "Alphabet",
    "Pmf",
    "Channel",
    "JointDistribution",
    "product_alphabet",
    "entropy",
    "conditional_entropy",
    "mutual_information",
    "conditional_mutual_information",
    "marginalize",
    "condition",
    "attach_channel",
    "is_markov",
    "is_deterministic",
    "from_factors",
    "pmf_to_json",
    "pmf_from_json",
    "channel_to_json",
    "channel_from_json",
    "joint_to_json",
    "joint_from_json",
]

#: Hard ceiling on dense table sizes (number of cells).  Module-level so a
#: caller who really needs bigger tables can raise it deliberately.
DEFAULT_CELL_CAP = 100_000_000

#: Absolute tolerance for "probabilities sum to one" validation.
PROB_SUM_TOL = 1e-12

#: Negative values of entropy-like quantities beyond this magnitude would
#: indicate a genuine bug rather than float rounding; smaller ones are
#: clamped to zero.
_NEG_ROUNDING_TOL = 1e-10


class CapExceededError(ValueError):
    """A construction would allocate more cells than the configured cap."""


class ZeroProbabilityError(ValueError):
    """Conditioning on an event of probability zero."""


def _check_cap(n_cells: int, what: str) -> None:
    if n_cells > DEFAULT_CELL_CAP:
        raise CapExceededError(
            f"{what} would need {n_cells} cells, above the cap of "
            f"{DEFAULT_CELL_CAP}; reduce alphabet sizes or raise "
            "cascade_secrecy.probability.DEFAULT_CELL_CAP deliberately"
        )


def _frozen_array(values, shape=None) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"expected array of shape {tuple(shape)}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Alphabet:
    """A named finite symbol set.

    Symbols are the indices ``0 .. size-1``; ``labels`` optionally gives
    them display names (distinct, one per symbol).
    """

    name: str
    size: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("alphabet name must be non-empty")
        if self.size < 1:
            raise ValueError(f"alphabet {self.name!r} must have size >= 1")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
            if len(self.labels) != self.size:
                raise ValueError(
                    f"alphabet {self.name!r}: {len(self.labels)} labels for "
                    f"{self.size} symbols"
                )
            if len(set(self.labels)) != self.size:
                raise ValueError(f"alphabet {self.name!r}: labels must be distinct")

    def label(self, symbol: int) -> str:
        if not 0 <= symbol < self.size:
            raise ValueError(f"symbol {symbol} out of range for alphabet {self.name!r}")
        return self.labels[symbol] if self.labels is not None else str(symbol)

    def index_of(self, label) -> int:
        """Map a label (or an in-range integer) back to its symbol index."""
        if isinstance(label, (int, np.integer)):
            i = int(label)
            if not 0 <= i < self.size:
                raise ValueError(f"symbol {i} out of range for alphabet {self.name!r}")
            return i
        if self.labels is None:
            raise ValueError(f"alphabet {self.name!r} has no labels to look up {label!r}")
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise ValueError(f"label {label!r} not in alphabet {self.name!r}") from None


def product_alphabet(name: str, *parts: Alphabet) -> Alphabet:
    """Cartesian product alphabet, indexed row-major over ``parts``.

    The flat symbol for component symbols ``(i_1, .., i_k)`` is
    ``numpy.ravel_multi_index`` in C order, and labels join the component
    labels with ``|``.
    """
    if not parts:
        raise ValueError("product alphabet needs at least one component")
    size = math.prod(p.size for p in parts)
    labels = []
    for flat in range(size):
        idx = np.unravel_index(flat, tuple(p.size for p in parts))
        labels.append("|".join(p.label(int(i)) for p, i in zip(parts, idx)))
    return Alphabet(name, size, tuple(labels))


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over one alphabet."""

    alphabet: Alphabet
    probs: np.ndarray

    def __post_init__(self) -> None:
        arr = _frozen_array(self.probs, shape=(self.alphabet.size,))
        if (arr < 0).any():
            raise ValueError(f"pmf over {self.alphabet.name!r} has negative entries")
        if abs(arr.sum() - 1.0) > PROB_SUM_TOL:
            raise ValueError(
                f"pmf over {self.alphabet.name!r} sums to {arr.sum()!r}, not 1"
            )
        object.__setattr__(self, "probs", arr)

    @staticmethod
    def uniform(alphabet: Alphabet) -> "Pmf":
        return Pmf(alphabet, np.full(alphabet.size, 1.0 / alphabet.size))


@dataclass(frozen=True)
class Channel:
    """Conditional distribution of one output variable given input variables.

    ``rows`` has shape ``(*input sizes, output size)``; each row (slice over
    the last axis) is a pmf.
    """

    input_alphabets: tuple[Alphabet, ...]
    output_alphabet: Alphabet
    rows: np.ndarray

    def __post_init__(self) -> None:
        inputs = tuple(self.input_alphabets)
        object.__setattr__(self, "input_alphabets", inputs)
        if not inputs:
            raise ValueError("channel needs at least one input alphabet")
        shape = tuple(a.size for a in inputs) + (self.output_alphabet.size,)
        arr = _frozen_array(self.rows, shape=shape)
        if (arr < 0).any():
            raise ValueError("channel rows have negative entries")
        sums = arr.sum(axis=-1)
        if np.abs(sums - 1.0).max() > PROB_SUM_TOL:
            raise ValueError("every channel row must sum to 1")
        object.__setattr__(self, "rows", arr)

    @staticmethod
    def identity(alphabet: Alphabet, output_name: str | None = None) -> "Channel":
        """Noiseless copy of a single input."""
        out = Alphabet(output_name or f"{alphabet.name}_copy", alphabet.size, alphabet.labels)
        return Channel((alphabet,), out, np.eye(alphabet.size))

    @staticmethod
    def constant(input_alphabets: Sequence[Alphabet], output_pmf: Pmf) -> "Channel":
        """Output drawn from ``output_pmf`` regardless of the input."""
        inputs = tuple(input_alphabets)
        shape = tuple(a.size for a in inputs) + (output_pmf.alphabet.size,)
        rows = np.broadcast_to(output_pmf.probs, shape)
        return Channel(inputs, output_pmf.alphabet, np.array(rows))


@dataclass(frozen=True)
class JointDistribution:
    """Joint law of named variables as one dense tensor.

    ``variables`` pairs each name with its alphabet, in axis order; ``table``
    has the matching shape and sums to one.
    """

    variables: tuple[tuple[str, Alphabet], ...]
    table: np.ndarray

    def __post_init__(self) -> None:
        variables = tuple((str(n), a) for n, a in self.variables)
        object.__setattr__(self, "variables", variables)
        names = [n for n, _ in variables]
        if not names:
            raise ValueError("joint distribution needs at least one variable")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names in {names}")
        shape = tuple(a.size for _, a in variables)
        _check_cap(math.prod(shape), "joint distribution table")
        arr = _frozen_array(self.table, shape=shape)
        if (arr < 0).any():
            raise ValueError("joint table has negative entries")
        if abs(arr.sum() - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"joint table sums to {arr.sum()!r}, not 1")
        object.__setattr__(self, "table", arr)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.variables)

    def alphabet(self, name: str) -> Alphabet:
        for n, a in self.variables:
            if n == name:
                return a
        raise ValueError(f"unknown variable {name!r}; have {self.names}")

    def axis(self, name: str) -> int:
        for i, (n, _) in enumerate(self.variables):
            if n == name:
                return i
        raise ValueError(f"unknown variable {name!r}; have {self.names}")


def _as_names(dist: JointDistribution, vars: str | Iterable[str]) -> tuple[str, ...]:
    """Normalize a variable spec to a tuple of known names (order preserved)."""
    names = (vars,) if isinstance(vars, str) else tuple(vars)
    seen = set()
    for n in names:
        dist.axis(n)  # raises on unknown names
        if n in seen:
            raise ValueError(f"variable {n!r} listed twice")
        seen.add(n)
    return names


def _marginal_table(dist: JointDistribution, keep: tuple[str, ...]) -> np.ndarray:
    """Marginal over ``keep`` (in original axis order), as a bare array."""
    drop = tuple(i for i, (n, _) in enumerate(dist.variables) if n not in keep)
    return dist.table.sum(axis=drop) if drop else dist.table


def _entropy_of(table: np.ndarray) -> float:
    p = table[table > 0.0]
    return float(-(p * np.log2(p)).sum()) if p.size else 0.0


def _clamped(value: float) -> float:
    """Clamp tiny negative float residue of provably nonnegative quantities."""
    return 0.0 if value < 0.0 else value


def entropy(dist: JointDistribution, targets: str | Iterable[str]) -> float:
    """H(targets) in bits."""
    names = _as_names(dist, targets)
    if not names:
        return 0.0
    return _entropy_of(_marginal_table(dist, names))


def conditional_entropy(
    dist: JointDistribution,
    targets: str | Iterable[str],
    given: str | Iterable[str] = (),
) -> float:
    """H(targets | given) in bits, via the chain rule on marginal entropies."""
    t = _as_names(dist, targets)
    g = _as_names(dist, given)
    if set(t) & set(g):
        raise ValueError(f"targets and conditioners overlap: {set(t) & set(g)}")
    if not t:
        return 0.0
    joint = entropy(dist, t + g)
    return _clamped(joint - entropy(dist, g)) if g else joint


def mutual_information(
    dist: JointDistribution,
    a: str | Iterable[str],
    b: str | Iterable[str],
) -> float:
    """I(a ; b) in bits, clamped to zero against float rounding."""
    return conditional_mutual_information(dist, a, b, ())


def conditional_mutual_information(
    dist: JointDistribution,
    a: str | Iterable[str],
    b: str | Iterable[str],
    given: str | Iterable[str] = (),
) -> float:
    """I(a ; b | given) in bits.

    Computed from four marginal entropies; float residue down to -1e-10 is
    rounding and comes back as exactly 0.
    """
    an = _as_names(dist, a)
    bn = _as_names(dist, b)
    gn = _as_names(dist, given)
    for x, y, tag in ((an, bn, "a/b"), (an, gn, "a/given"), (bn, gn, "b/given")):
        if set(x) & set(y):
            raise ValueError(f"variable groups overlap ({tag}): {set(x) & set(y)}")
    if not an or not bn:
        return 0.0
    value = (
        entropy(dist, an + gn)
        + entropy(dist, bn + gn)
        - entropy(dist, an + bn + gn)
        - entropy(dist, gn)
    )
    return _clamped(value)


def marginalize(dist: JointDistribution, keep: str | Iterable[str]) -> JointDistribution:
    """Marginal joint over ``keep``, axes in their original order."""
    names = _as_names(dist, keep)
    if not names:
        raise ValueError("must keep at least one variable")
    ordered = tuple(v for v in dist.variables if v[0] in names)
    return JointDistribution(ordered, _marginal_table(dist, names))


def condition(dist: JointDistribution, evidence: Mapping[str, object]) -> JointDistribution:
    """Condition on ``evidence`` (variable name -> symbol index or label).

    All variables stay in place; evidence variables collapse to point masses.
    Raises :class:`ZeroProbabilityError` if the evidence event has
    probability zero.
    """
    if not evidence:
        raise ValueError("evidence must name at least one variable")
    index: list[object] = [slice(None)] * dist.table.ndim
    for name, value in evidence.items():
        ax = dist.axis(name)
        index[ax] = dist.alphabet(name).index_of(value)
    sliced = np.zeros_like(dist.table)
    sliced[tuple(index)] = dist.table[tuple(index)]
    mass = sliced.sum()
    if mass <= 0.0:
        described = {n: dist.alphabet(n).label(dist.alphabet(n).index_of(v)) for n, v in evidence.items()}
        raise ZeroProbabilityError(f"conditioning event {described} has probability zero")
    return JointDistribution(dist.variables, sliced / mass)


def attach_channel(
    dist: JointDistribution,
    channel: Channel,
    inputs: str | Iterable[str],
    new_name: str,
) -> JointDistribution:
    """Adjoin a channel output as a new last variable.

    ``inputs`` names existing variables matching ``channel.input_alphabets``
    in order and size; the output is conditionally independent of everything
    else given the inputs.
    """
    in_names = _as_names(dist, inputs)
    if len(in_names) != len(channel.input_alphabets):
        raise ValueError(
            f"channel expects {len(channel.input_alphabets)} inputs, got {len(in_names)}"
        )
    for n, a in zip(in_names, channel.input_alphabets):
        have = dist.alphabet(n)
        if have.size != a.size:
            raise ValueError(
                f"input {n!r} has size {have.size}, channel expects {a.size}"
            )
    if new_name in dist.names:
        raise ValueError(f"variable {new_name!r} already present")
    _check_cap(dist.table.size * channel.output_alphabet.size, "channel attachment")

    # Broadcast channel rows across the joint: index rows by the input axes.
    in_axes = [dist.axis(n) for n in in_names]
    # Move input axes to the front of a view, multiply, move back.
    src = np.moveaxis(dist.table, in_axes, range(len(in_axes)))
    rows_shape = channel.rows.shape[:-1]
    expand = channel.rows.reshape(
        rows_shape + (1,) * (src.ndim - len(in_axes)) + (channel.output_alphabet.size,)
    )
    out = src[..., None] * expand
    out = np.moveaxis(out, range(len(in_axes)), in_axes)
    variables = dist.variables + ((new_name, channel.output_alphabet),)
    return JointDistribution(variables, out)


def is_markov(
    dist: JointDistribution,
    a: str | Iterable[str],
    b: str | Iterable[str],
    c: str | Iterable[str],
    tol: float = 1e-9,
) -> tuple[bool, float]:
    """Does the chain a - b - c hold?  Returns (verdict, I(a;c|b) in bits)."""
    value = conditional_mutual_information(dist, a, c, b)
    return value <= tol, value


def is_deterministic(
    dist: JointDistribution,
    targets: str | Iterable[str],
    given: str | Iterable[str],
    tol: float = 1e-9,
) -> tuple[bool, float]:
    """Is ``targets`` a function of ``given``?  Returns (verdict, H(targets|given))."""
    value = conditional_entropy(dist, targets, given)
    return value <= tol, value


def from_factors(
    variables: Sequence[tuple[str, Alphabet]],
    factors: Sequence[tuple[np.ndarray, Sequence[str]]],
) -> JointDistribution:
    """Build a joint as a product of factors, each spanning a subset of axes.

    Each factor is ``(array, names)`` with one axis per named variable, in
    that order.  The factors are broadcast-multiplied; the result must be a
    valid joint (caller is responsible for normalization).
    """
    names = [n for n, _ in variables]
    sizes = {n: a.size for n, a in variables}
    shape = tuple(sizes[n] for n in names)
    _check_cap(math.prod(shape), "factor product")
    table = np.ones(shape)
    for arr, fnames in factors:
        arr = np.asarray(arr, dtype=np.float64)
        fnames = list(fnames)
        if arr.shape != tuple(sizes[n] for n in fnames):
            raise ValueError(f"factor over {fnames} has shape {arr.shape}")
        expand = [names.index(n) for n in fnames]
        view_shape = [1] * len(names)
        for ax, n in zip(expand, fnames):
            view_shape[ax] = sizes[n]
        # Axes of the factor must land on the joint axes in joint order.
        order = np.argsort(expand)
        table = table * np.transpose(arr, order).reshape(view_shape)
    return JointDistribution(tuple(variables), table)


# --------------------------------------------------------------------------
# JSON serialization.  Floats pass through Python's json module, whose
# shortest-repr encoding round-trips float64 exactly.


def _alphabet_to_json(a: Alphabet) -> dict:
    obj: dict = {"name": a.name, "size": a.size}
    if a.labels is not None:
        obj["labels"] = list(a.labels)
    return obj


def _alphabet_from_json(obj: Mapping) -> Alphabet:
    labels = tuple(obj["labels"]) if "labels" in obj and obj["labels"] is not None else None
    return Alphabet(str(obj["name"]), int(obj["size"]), labels)


def pmf_to_json(pmf: Pmf) -> dict:
    return {"variables": [_alphabet_to_json(pmf.alphabet)], "table": pmf.probs.tolist()}


def pmf_from_json(obj: Mapping) -> Pmf:
    (alpha,) = [_alphabet_from_json(v) for v in obj["variables"]]
    return Pmf(alpha, np.array(obj["table"], dtype=np.float64))


def channel_to_json(ch: Channel) -> dict:
    return {
        "inputs": [_alphabet_to_json(a) for a in ch.input_alphabets],
        "output": _alphabet_to_json(ch.output_alphabet),
        "rows": np.ravel(ch.rows, order="C").tolist(),
    }


def channel_from_json(obj: Mapping) -> Channel:
    inputs = tuple(_alphabet_from_json(a) for a in obj["inputs"])
    output = _alphabet_from_json(obj["output"])
    shape = tuple(a.size for a in inputs) + (output.size,)
    rows = np.array(obj["rows"], dtype=np.float64).reshape(shape)
    return Channel(inputs, output, rows)


def joint_to_json(dist: JointDistribution) -> dict:
    return {
        "variables": [
            dict(_alphabet_to_json(a), name=n) for n, a in dist.variables
        ],
        "table": np.ravel(dist.table, order="C").tolist(),
    }


def joint_from_json(obj: Mapping) -> JointDistribution:
    variables = tuple(
        (str(v["name"]), _alphabet_from_json(v)) for v in obj["variables"]
    )
    shape = tuple(a.size for _, a in variables)
    table = np.array(obj["table"], dtype=np.float64).reshape(shape)
    return JointDistribution(variables, table)


def joint_dumps(dist: JointDistribution) -> str:
    """Canonical one-line JSON text for hashing and on-disk artifacts."""
    return json.dumps(joint_to_json(dist), separators=(",", ":"), sort_keys=True)
