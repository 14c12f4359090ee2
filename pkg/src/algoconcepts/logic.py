"""Propositional DNF rules over per-unit concept vectors.

A :class:`Term` is stored as two bitmasks: ``mask`` marks the concepts it
mentions and ``bits`` their required values, so a packed concept row ``r``
satisfies the term iff ``r & mask == bits``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels

log = logging.getLogger(__name__)

MAX_SIMPLIFY_WIDTH = 24
EXACT_COVER_WIDTH = 16
MAX_EQUIV_WIDTH = 20
DEFAULT_MAX_CONFLICT = 0.10


@dataclass(frozen=True)
class LogicConfig:
    """Extraction settings: binarisation threshold and don't-care minimisation."""

    threshold: float = 0.5
    dont_care: bool = True
    max_conflict: float = DEFAULT_MAX_CONFLICT

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie strictly between 0 and 1")
        if not 0.0 <= self.max_conflict <= 1.0:
            raise ValueError("max_conflict must lie in [0, 1]")


class LogicError(ValueError):
    pass


class ContradictoryDataError(LogicError):
    def __init__(self, message: str, conflicts: dict):
        super().__init__(message)
        self.conflicts = conflicts


@dataclass(frozen=True, order=True)
class Literal:
    concept_index: int
    positive: bool = True

    def __str__(self):
        return ("" if self.positive else "¬") + f"c{self.concept_index}"


@dataclass(frozen=True)
class Term:
    mask: int
    bits: int

    def __post_init__(self):
        if self.bits & ~self.mask:
            raise LogicError("term bits outside its mask")

    @classmethod
    def from_literals(cls, literals: Iterable[Literal | tuple[int, bool]]) -> "Term":
        mask = bits = 0
        for lit in literals:
            idx, pos = (lit.concept_index, lit.positive) if isinstance(lit, Literal) else lit
            bit = 1 << int(idx)
            if mask & bit:
                raise LogicError(f"concept {idx} appears twice in a term")
            mask |= bit
            if pos:
                bits |= bit
        return cls(mask, bits)

    @property
    def literals(self) -> tuple[Literal, ...]:
        out, m, i = [], self.mask, 0
        while m:
            if m & 1:
                out.append(Literal(i, bool((self.bits >> i) & 1)))
            m >>= 1
            i += 1
        return tuple(out)

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def sort_key(self):
        return tuple((lit.concept_index, not lit.positive) for lit in self.literals)

    def holds(self, packed: int) -> bool:
        return packed & self.mask == self.bits


TRUE_TERM = Term(0, 0)


@dataclass(frozen=True)
class DnfFormula:
    width: int
    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        uniq = sorted(set(self.terms), key=Term.sort_key)
        object.__setattr__(self, "terms", tuple(uniq))
        top = 1 << self.width
        for t in self.terms:
            if t.mask >= top:
                raise LogicError(f"term mentions a concept beyond width {self.width}")

    @classmethod
    def false(cls, width: int) -> "DnfFormula":
        return cls(width, ())

    @classmethod
    def true(cls, width: int) -> "DnfFormula":
        return cls(width, (TRUE_TERM,))

    @property
    def mentioned(self) -> tuple[int, ...]:
        m = 0
        for t in self.terms:
            m |= t.mask
        return tuple(i for i in range(self.width) if (m >> i) & 1)

    def literal_count(self) -> int:
        return sum(len(t) for t in self.terms)

    def size(self) -> tuple[int, int]:
        return len(self.terms), self.literal_count()

    def term_set(self) -> frozenset:
        return frozenset(self.terms)


def _check_width(width: int, n: int):
    if n != width:
        raise LogicError(f"concept vector of width {n} does not match formula width {width}")


def term_from_sample(concepts: Sequence[float], threshold: float = 0.5) -> Term:
    """Conjunction fixing every concept: positive iff ``c_j >= threshold``."""
    if not 0.0 < threshold < 1.0:
        raise LogicError("threshold must lie strictly between 0 and 1")
    return Term.from_literals((j, bool(c >= threshold)) for j, c in enumerate(concepts))


def _project(samples: np.ndarray, relevant: Sequence[int]) -> np.ndarray:
    """Packed rows restricted to ``relevant`` (bit positions preserved)."""
    packed = _kernels.pack_rows(samples)
    mask = 0
    for j in relevant:
        mask |= 1 << int(j)
    return packed & np.uint64(mask), mask


def conflicting_patterns(samples, labels, relevant: Sequence[int] | None = None) -> dict[int, set[int]]:
    """Projected patterns realised under more than one label -> those labels."""
    samples = np.asarray(samples, dtype=bool)
    relevant = range(samples.shape[1]) if relevant is None else relevant
    packed, _ = _project(samples, relevant)
    seen: dict[int, set[int]] = {}
    for p, y in zip(packed.tolist(), np.asarray(labels).tolist()):
        seen.setdefault(p, set()).add(int(y))
    return {p: ls for p, ls in seen.items() if len(ls) > 1}


def class_formula(samples, labels, target_label: int, relevant: Sequence[int] | None = None,
                  threshold: float = 0.5, max_conflict: float = DEFAULT_MAX_CONFLICT) -> DnfFormula:
    """Disjunction of the distinct projected sample terms carrying ``target_label``.

    Patterns that also occur with another label are dropped; if more than
    ``max_conflict`` of the rows are contradictory, or nothing remains for a
    label that does occur, :class:`ContradictoryDataError` is raised.
    """
    samples = np.asarray(samples, dtype=float)
    labels = np.asarray(labels)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise LogicError("need a non-empty sample matrix")
    width = samples.shape[1]
    relevant = tuple(range(width)) if relevant is None else tuple(sorted(set(int(r) for r in relevant)))
    if any(not 0 <= r < width for r in relevant):
        raise LogicError("relevant concept index out of range")
    binary = samples >= threshold
    conflicts = conflicting_patterns(binary, labels, relevant)
    packed, mask = _project(binary, relevant)
    bad = np.isin(packed, np.array(list(conflicts), dtype=np.uint64)) if conflicts else np.zeros(len(packed), bool)
    if bad.any():
        frac = float(bad.mean())
        log.warning("%d of %d rows (%.2f%%) have contradictory projected concepts",
                    int(bad.sum()), len(bad), 100 * frac)
        if frac > max_conflict:
            raise ContradictoryDataError(
                f"{100 * frac:.1f}% contradictory rows exceeds {100 * max_conflict:.0f}%", conflicts)
    chosen = sorted(set(packed[(labels == target_label) & ~bad].tolist()))
    if not chosen and (labels == target_label).any():
        raise ContradictoryDataError(f"every row of label {target_label} is contradictory", conflicts)
    return DnfFormula(width, tuple(Term(mask, int(p)) for p in chosen))


def observed_patterns(samples, relevant: Sequence[int] | None = None) -> DnfFormula:
    """All realised projected patterns as a formula (used to derive don't-cares)."""
    samples = np.asarray(samples, dtype=bool)
    relevant = range(samples.shape[1]) if relevant is None else relevant
    packed, mask = _project(samples, relevant)
    return DnfFormula(samples.shape[1], tuple(Term(mask, int(p)) for p in set(packed.tolist())))


# --------------------------------------------------------------------------
# Quine-McCluskey


def _compress(value: int, variables: Sequence[int]) -> int:
    return sum(((value >> v) & 1) << k for k, v in enumerate(variables))


def _expand(value: int, variables: Sequence[int]) -> int:
    return sum(((value >> k) & 1) << v for k, v in enumerate(variables))


def _minterms(f: DnfFormula, variables: Sequence[int]) -> set[int]:
    m = len(variables)
    out: set[int] = set()
    for t in f.terms:
        cm, cb = _compress(t.mask, variables), _compress(t.bits, variables)
        free = [k for k in range(m) if not (cm >> k) & 1]
        for combo in range(1 << len(free)):
            out.add(cb | _expand(combo, free))
    return out


def prime_implicants(on: set[int], dc: set[int], m: int) -> list[tuple[int, int]]:
    """Prime implicants as (care mask, value) cubes over ``m`` variables."""
    full = (1 << m) - 1
    current = {(full, x) for x in on | dc}
    primes: set[tuple[int, int]] = set()
    while current:
        groups: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for mask, val in current:
            groups.setdefault((mask, bin(val).count("1")), []).append((mask, val))
        merged: set[tuple[int, int]] = set()
        used: set[tuple[int, int]] = set()
        for (mask, ones), cubes in groups.items():
            nxt = groups.get((mask, ones + 1))
            if not nxt:
                continue
            for a in cubes:
                for b in nxt:
                    diff = a[1] ^ b[1]
                    if diff & (diff - 1) == 0:
                        merged.add((mask & ~diff, a[1] & ~diff))
                        used.add(a)
                        used.add(b)
        primes |= current - used
        current = merged
    return [p for p in primes if any(x & p[0] == p[1] for x in on)]


def _cube_key(cube: tuple[int, int], m: int):
    mask, val = cube
    return tuple((k, not (val >> k) & 1) for k in range(m) if (mask >> k) & 1)


def _select_cover(primes: list[tuple[int, int]], on: set[int], m: int, exact: bool) -> list[tuple[int, int]]:
    """Cover ``on`` with primes minimising (terms, literals, lexicographic key)."""
    primes = sorted(primes, key=lambda c: (bin(c[0]).count("1"), _cube_key(c, m)))
    lits = [bin(p[0]).count("1") for p in primes]
    covers = [frozenset(x for x in on if x & p[0] == p[1]) for p in primes]
    owners = {x: [i for i, c in enumerate(covers) if x in c] for x in on}
    chosen = sorted({o[0] for o in owners.values() if len(o) == 1})  # essential primes
    remaining = set(on).difference(*(covers[i] for i in chosen))
    if not remaining:
        return [primes[i] for i in chosen]

    def cost(sel):
        return (len(sel), sum(lits[i] for i in sel), [_cube_key(primes[i], m) for i in sorted(sel)])

    best: list[int] | None = None
    if exact:
        min_lit = min(lits)
        budget = [500_000]

        def search(sel: list[int], left: frozenset):
            if budget[0] <= 0:
                return
            budget[0] -= 1
            nonlocal best
            if not left:
                if best is None or cost(sel) < cost(best):
                    best = list(sel)
                return
            if best is not None:
                bound = (len(sel) + 1, sum(lits[i] for i in sel) + min_lit)
                if bound > tuple(cost(best)[:2]):
                    return
            pivot = min(left, key=lambda x: (len(owners[x]), x))
            for i in owners[pivot]:
                sel.append(i)
                search(sel, left - covers[i])
                sel.pop()

        search(list(chosen), frozenset(remaining))
        if budget[0] <= 0:
            log.info("exact cover search budget exhausted; falling back to greedy")
            best = None
    if best is None:  # greedy: most new minterms, then fewest literals
        best = list(chosen)
        while remaining:
            i = max((i for i in range(len(primes)) if covers[i] & remaining),
                    key=lambda i: (len(covers[i] & remaining), -lits[i], -i))
            best.append(i)
            remaining -= covers[i]
    return [primes[i] for i in sorted(set(best))]


def simplify(f: DnfFormula, dont_care: DnfFormula | None = None) -> DnfFormula:
    """Minimum-size equivalent DNF (terms, then literals) via Quine-McCluskey.

    Variables are the concepts mentioned by ``f``; combinations covered by
    ``dont_care`` (restricted to those variables) may be assigned freely.
    """
    if not f.terms:
        return DnfFormula.false(f.width)
    variables = f.mentioned
    if not variables:
        return DnfFormula.true(f.width)
    m = len(variables)
    if m > MAX_SIMPLIFY_WIDTH:
        raise LogicError(f"{m} mentioned concepts exceed the {MAX_SIMPLIFY_WIDTH}-concept limit; "
                         "project onto relevant concepts first")
    on = _minterms(f, variables)
    dc: set[int] = set()
    if dont_care is not None and dont_care.terms:
        vmask = sum(1 << v for v in variables)
        restricted = DnfFormula(f.width, tuple(
            Term(t.mask & vmask, t.bits & vmask) for t in dont_care.terms if not t.mask & ~vmask))
        dc = _minterms(restricted, variables) - on
    if len(on) == 1 << m:
        return DnfFormula.true(f.width)
    primes = prime_implicants(on, dc, m)
    cover = _select_cover(primes, on, m, exact=m <= EXACT_COVER_WIDTH)
    terms = tuple(Term(_expand(mask, variables), _expand(val, variables)) for mask, val in cover)
    out = DnfFormula(f.width, terms)
    if dont_care is None and out.size() > f.size():
        return f  # greedy cover can lose to the input; never return something longer
    return out


def extract_formula(samples, labels, target_label: int, relevant: Sequence[int] | None = None,
                    dont_care: bool = False, threshold: float = 0.5,
                    max_conflict: float = DEFAULT_MAX_CONFLICT) -> DnfFormula:
    """Class formula followed by simplification, with optional data-driven don't-cares.

    With ``dont_care`` the projected concept combinations never observed
    (under any label) are free during minimisation.
    """
    raw = class_formula(samples, labels, target_label, relevant, threshold, max_conflict)
    dc = None
    if dont_care:
        binary = np.asarray(samples, dtype=float) >= threshold
        rel = tuple(range(binary.shape[1])) if relevant is None else tuple(relevant)
        seen = observed_patterns(binary, rel)
        variables = raw.mentioned
        if variables:
            m = len(variables)
            seen_min = _minterms(seen, variables)
            unseen = [x for x in range(1 << m) if x not in seen_min]
            full = sum(1 << v for v in variables)
            dc = DnfFormula(raw.width, tuple(Term(full, _expand(x, variables)) for x in unseen))
    return simplify(raw, dc)


# --------------------------------------------------------------------------
# evaluation


def eval_dnf(f: DnfFormula, concepts: Sequence[int | bool]) -> bool:
    concepts = list(concepts)
    _check_width(f.width, len(concepts))
    packed = sum(1 << i for i, c in enumerate(concepts) if c)
    return any(t.holds(packed) for t in f.terms)


def eval_dnf_rows(f: DnfFormula, rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=bool)
    _check_width(f.width, rows.shape[1])
    packed = _kernels.pack_rows(rows)
    out = np.zeros(rows.shape[0], dtype=bool)
    for t in f.terms:
        out |= (packed & np.uint64(t.mask)) == np.uint64(t.bits)
    return out


def truth_table(f: DnfFormula, k: int) -> np.ndarray:
    if k > MAX_EQUIV_WIDTH:
        raise LogicError(f"exhaustive check limited to {MAX_EQUIV_WIDTH} concepts")
    if f.mentioned and max(f.mentioned) >= k:
        raise LogicError("formula mentions concepts beyond the checked width")
    xs = np.arange(1 << k, dtype=np.uint64)
    out = np.zeros(xs.shape[0], dtype=bool)
    for t in f.terms:
        out |= (xs & np.uint64(t.mask)) == np.uint64(t.bits)
    return out


def equivalent(f: DnfFormula, g: DnfFormula, k: int | None = None) -> bool:
    """Exhaustive comparison over all 2**k assignments."""
    k = max(f.width, g.width) if k is None else k
    return bool(np.array_equal(truth_table(f, k), truth_table(g, k)))


def format_formula(f: DnfFormula, schema, abbreviate: bool = False, unit: str | None = None) -> str:
    """Render with named concepts, e.g. ``(lEV(e) ∧ ¬nISS(e) ∧ ¬eIM(e))``."""
    names = schema.abbreviations if abbreviate else schema.names
    _check_width(f.width, len(names))
    unit = schema.unit if unit is None else unit
    if not f.terms:
        return "false"
    if any(t.mask == 0 for t in f.terms):
        return "true"

    def term_text(t: Term) -> str:
        return " ∧ ".join(("" if lit.positive else "¬") + f"{names[lit.concept_index]}({unit})"
                          for lit in t.literals)

    if len(f.terms) == 1:
        return term_text(f.terms[0])
    return " ∨ ".join(f"({term_text(t)})" for t in f.terms)


def parse_formula(text: str, schema, unit: str | None = None) -> DnfFormula:
    """Inverse of :func:`format_formula` (full or abbreviated names)."""
    text = text.strip()
    if text == "false":
        return DnfFormula.false(schema.width)
    if text == "true":
        return DnfFormula.true(schema.width)
    unit = schema.unit if unit is None else unit
    terms = []
    for chunk in text.split("∨"):
        lits = []
        chunk = chunk.strip()
        if chunk.startswith("(") and chunk.endswith(")"):
            chunk = chunk[1:-1]
        for raw in chunk.split("∧"):
            raw = raw.strip()
            pos = not raw.startswith("¬")
            name = raw.lstrip("¬").removesuffix(f"({unit})")
            try:
                lits.append((schema.index(name), pos))
            except ValueError:
                raise LogicError(f"unknown concept {name!r} in {text!r}") from None
        terms.append(Term.from_literals(lits))
    return DnfFormula(schema.width, tuple(terms))
