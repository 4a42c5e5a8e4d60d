"""Symbolic oracle: span-fold derivation over fact paths.

The fold is a CYK-style dynamic program: a span derives every head any
bracketing of pairwise composition can reach. solve() works on a bag of
facts: it first mirrors each fact with its inverse spelling (a stored
un(Randolph, Christopher) also provides the Christopher -> Randolph leg
as inv-un), then enumerates simple paths between the query entities and
folds each one.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from .errors import AmbiguousAnswerError, DisconnectedPathError, NoPathError
from .familygraph import Fact
from .ontology import (
    Gender,
    PREDICATE_ORDER,
    Predicate,
    RuleBase,
    default_rulebase,
    inverse_of,
    surface,
)

SpanTable = dict[tuple[int, int], frozenset[Predicate]]


def fold_predicates(preds: Sequence[Predicate], rb: RuleBase | None = None) -> frozenset[Predicate]:
    """Every predicate derivable for the whole sequence, any bracketing."""
    if rb is None:
        rb = default_rulebase()
    table = _span_table([frozenset((p,)) for p in preds], rb)
    return table[(0, len(preds))]


def _span_table(leaf_sets: Sequence[frozenset[Predicate]], rb: RuleBase) -> SpanTable:
    n = len(leaf_sets)
    table: SpanTable = {(i, i + 1): leaf_sets[i] for i in range(n)}
    for span in range(2, n + 1):
        for i in range(0, n - span + 1):
            j = i + span
            derived = set()
            for m in range(i + 1, j):
                for a in table[(i, m)]:
                    for b in table[(m, j)]:
                        head = rb.compose(a, b)
                        if head:
                            derived.add(head)
            table[(i, j)] = frozenset(derived)
    return table


def cyk_fold(facts: Sequence[Fact], rb: RuleBase | None = None) -> frozenset[Predicate]:
    """Fold a connected edge path fact[0].src -> ... -> fact[-1].dst."""
    if not facts:
        raise DisconnectedPathError("empty fact path")
    for before, after in zip(facts, facts[1:]):
        if before.dst != after.src:
            raise DisconnectedPathError(f"{before} does not connect to {after}")
    return fold_predicates([f.pred for f in facts], rb)


@dataclass(frozen=True)
class SolveResult:
    predicate: Predicate
    label: str
    path: tuple[Fact, ...]
    proof: str


@dataclass(frozen=True)
class ConfluenceReport:
    """Per-path derivations for a query over a fact set."""

    paths: int
    derivable_paths: int
    predicates: frozenset[Predicate]
    agree: bool
    details: tuple[tuple[tuple[int, ...], frozenset[Predicate]], ...]


def _augmented(facts: Iterable[Fact]) -> dict[tuple[int, int], frozenset[Predicate]]:
    pairs: dict[tuple[int, int], set[Predicate]] = {}
    for f in facts:
        pairs.setdefault((f.src, f.dst), set()).add(f.pred)
        pairs.setdefault((f.dst, f.src), set()).add(inverse_of(f.pred))
    return {pair: frozenset(preds) for pair, preds in pairs.items()}


def _iter_simple_paths(
    pairs: Mapping[tuple[int, int], frozenset[Predicate]],
    start: int,
    goal: int,
    max_len: int,
):
    adjacency: dict[int, list[int]] = {}
    for a, b in pairs:
        adjacency.setdefault(a, []).append(b)
    for node in adjacency:
        adjacency[node].sort()
    stack = [(start, (start,))]
    while stack:
        node, path = stack.pop()
        for nxt in reversed(adjacency.get(node, ())):
            if nxt in path:
                continue
            if nxt == goal:
                yield path + (nxt,)
            elif len(path) <= max_len - 1:
                stack.append((nxt, path + (nxt,)))


def _path_fold(
    vertices: Sequence[int],
    pairs: Mapping[tuple[int, int], frozenset[Predicate]],
    rb: RuleBase,
) -> SpanTable:
    leaves = [pairs[(a, b)] for a, b in zip(vertices, vertices[1:])]
    return _span_table(leaves, rb)


def _witness(
    table: SpanTable,
    vertices: Sequence[int],
    i: int,
    j: int,
    target: Predicate,
    rb: RuleBase,
    name_of,
) -> str:
    if j == i + 1:
        return f"{target.value}({name_of(vertices[i])},{name_of(vertices[j])})"
    for m in range(i + 1, j):
        for a in sorted(table[(i, m)], key=PREDICATE_ORDER.__getitem__):
            for b in sorted(table[(m, j)], key=PREDICATE_ORDER.__getitem__):
                if rb.compose(a, b) is target:
                    left = _witness(table, vertices, i, m, a, rb, name_of)
                    right = _witness(table, vertices, m, j, b, rb, name_of)
                    return f"({left} + {right} => {target.value})"
    raise AssertionError("span table lost its derivation")


def solve(
    facts: Iterable[Fact],
    query: tuple[int, int],
    genders: Mapping[int, Gender],
    rb: RuleBase | None = None,
    max_path_len: int = 12,
    name_of=None,
) -> SolveResult:
    """Derive the unique relation label for query = (head, tail).

    The answer reads "tail is the <label> of head". Raises NoPathError
    when no simple path derives anything, AmbiguousAnswerError when
    different paths or bracketings disagree.
    """
    if rb is None:
        rb = default_rulebase()
    if name_of is None:
        name_of = str
    facts = tuple(facts)
    start, goal = query
    pairs = _augmented(facts)
    known = {e for pair in pairs for e in pair}
    if start not in known or goal not in known:
        raise NoPathError(f"query entity missing from facts: {query}")
    derived: set[Predicate] = set()
    witness_path: tuple[int, ...] | None = None
    witness_table: SpanTable | None = None
    for vertices in _iter_simple_paths(pairs, start, goal, max_path_len):
        table = _path_fold(vertices, pairs, rb)
        heads = table[(0, len(vertices) - 1)]
        derived.update(heads)
        if heads and witness_path is None:
            witness_path = vertices
            witness_table = table
    if not derived:
        raise NoPathError(f"no derivable path from {start} to {goal}")
    if len(derived) > 1:
        raise AmbiguousAnswerError(derived)
    predicate = derived.pop()
    assert witness_path is not None and witness_table is not None
    proof = _witness(
        witness_table, witness_path, 0, len(witness_path) - 1, predicate, rb, name_of
    )
    path_facts = tuple(
        Fact(a, b, next(iter(pairs[(a, b)])))
        for a, b in zip(witness_path, witness_path[1:])
    )
    return SolveResult(predicate, surface(predicate, genders[goal]), path_facts, proof)


def check_confluence(
    facts: Iterable[Fact],
    query: tuple[int, int],
    rb: RuleBase | None = None,
    max_path_len: int = 12,
) -> ConfluenceReport:
    """Fold every simple path independently and report agreement.

    agree is True when at least one path derives something and the union
    of all derivations is a single predicate.
    """
    if rb is None:
        rb = default_rulebase()
    pairs = _augmented(tuple(facts))
    start, goal = query
    details = []
    union: set[Predicate] = set()
    derivable = 0
    for vertices in _iter_simple_paths(pairs, start, goal, max_path_len):
        table = _path_fold(vertices, pairs, rb)
        heads = table[(0, len(vertices) - 1)]
        if heads:
            derivable += 1
            union.update(heads)
        details.append((vertices, heads))
    return ConfluenceReport(
        paths=len(details),
        derivable_paths=derivable,
        predicates=frozenset(union),
        agree=len(union) == 1,
        details=tuple(details),
    )
