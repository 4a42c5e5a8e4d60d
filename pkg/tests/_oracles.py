"""Independent reference implementations the real modules are checked against.

Deliberately simple and slow: full rescans, explicit recursion, no
shared code with the package beyond the core datatypes.
"""

from __future__ import annotations

import re
from functools import lru_cache

from kinship_forge.errors import ClosureConflictError
from kinship_forge.familygraph import Fact, KinshipGraph
from kinship_forge.ontology import (
    Atom,
    Gender,
    Predicate,
    RuleBase,
    genders_consistent,
)
from kinship_forge.solver import SolveResult, solve

_FACT_STRING = re.compile(r"([a-z-]+|SO)\(([^,]+),([^)]+)\)")


def record_facts(record, include_noise: bool):
    """Rebuild Fact/gender structures from a row's serialized strings."""
    strings = record.facts + (record.noise_facts if include_noise else ())
    ids: dict[str, int] = {}
    facts: list[Fact] = []
    for rendered in strings:
        m = _FACT_STRING.fullmatch(rendered)
        assert m, rendered
        pred, head, tail = Predicate(m.group(1)), m.group(2), m.group(3)
        facts.append(
            Fact(ids.setdefault(head, len(ids)), ids.setdefault(tail, len(ids)), pred)
        )
    genders = {ids[tok]: Gender(record.genders[tok]) for tok in ids}
    return facts, ids, genders


def resolve_record(record, rb: RuleBase, include_noise: bool = True) -> SolveResult:
    """Re-answer a row's query from nothing but its serialized fields."""
    facts, ids, genders = record_facts(record, include_noise)
    return solve(facts, (ids[record.query_head], ids[record.query_tail]), genders, rb)


def naive_close(g: KinshipGraph, rb: RuleBase) -> KinshipGraph:
    """Round-based closure via full O(V^3) rescan each round.

    Each round collects every head derivable from two currently labeled
    edges landing on an unlabeled pair; two distinct heads for one pair
    in the same round is a conflict; earlier rounds' labels are final.
    """
    out = g.copy()
    while True:
        candidates: dict[tuple[int, int], set[Predicate]] = {}
        for x in sorted(out.entities):
            for z, first in sorted(out.out_of(x).items()):
                for y, second in sorted(out.out_of(z).items()):
                    if x == y or out.predicate(x, y) is not None:
                        continue
                    head = rb.compose(first, second)
                    if head is not None:
                        candidates.setdefault((x, y), set()).add(head)
        if not candidates:
            break
        for (x, y), heads in sorted(candidates.items()):
            if len(heads) > 1:
                raise ClosureConflictError(
                    f"pair ({x},{y}) derivable as {sorted(h.value for h in heads)}"
                )
            out.add_edge(x, y, next(iter(heads)))
    out.closed = True
    return out


def brute_force_shape_keys(k: int, rb: RuleBase) -> set[tuple[Atom, ...]]:
    """All gendered atom sequences of length k with a nonempty fold."""
    alphabet = [
        (p, g)
        for p in sorted(rb.rule_bearing, key=lambda p: p.value)
        for g in (Gender.FEMALE, Gender.MALE)
    ]

    sequences: list[tuple[Atom, ...]] = [()]
    for _ in range(k):
        sequences = [seq + (atom,) for seq in sequences for atom in alphabet]
    return {
        seq
        for seq in sequences
        if genders_consistent(seq) and brute_force_fold(tuple(p for p, _ in seq), rb)
    }


def brute_force_fold(preds: tuple[Predicate, ...], rb: RuleBase) -> frozenset[Predicate]:
    """All predicates a sequence folds to, by explicit recursion over splits."""

    @lru_cache(maxsize=None)
    def fold(seq: tuple[Predicate, ...]) -> frozenset[Predicate]:
        if len(seq) == 1:
            return frozenset(seq)
        heads: set[Predicate] = set()
        for cut in range(1, len(seq)):
            for left in fold(seq[:cut]):
                for right in fold(seq[cut:]):
                    head = rb.compose(left, right)
                    if head is not None:
                        heads.add(head)
        return frozenset(heads)

    return fold(tuple(preds))
