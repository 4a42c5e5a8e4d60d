"""Reasoning chains and noise paths sampled from closed family graphs.

Backward chaining starts from a single target fact and applies k-1
expansions, each replacing one chain fact with the two body facts of a
rule that derives it through a fresh midpoint. The resulting facts form
a simple path whose fold rederives the target.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from .errors import ClosureConflictError, ConfigError, NoiseSearchError, UnexpandableError
from .familygraph import (
    BackboneParams,
    Fact,
    KinshipGraph,
    close_graph,
    generate_backbone,
)
from .ontology import Atom, Gender, Predicate, Rule, RuleBase, default_rulebase


@dataclass(frozen=True)
class TargetFact:
    head: int
    tail: int
    pred: Predicate

    def as_fact(self) -> Fact:
        return Fact(self.head, self.tail, self.pred)


@dataclass(frozen=True)
class TraceStep:
    """One expansion: chain fact at fact_index was split at midpoint."""

    fact_index: int
    rule: Rule
    midpoint: int


@dataclass(frozen=True)
class ReasoningChain:
    target: TargetFact
    facts: tuple[Fact, ...]
    atoms: tuple[Atom, ...]
    trace: tuple[TraceStep, ...]

    @property
    def k(self) -> int:
        return len(self.facts)

    @property
    def vertices(self) -> tuple[int, ...]:
        return (self.facts[0].src,) + tuple(f.dst for f in self.facts)


class NoiseKind(Enum):
    SUPPORTING = "supporting"
    IRRELEVANT = "irrelevant"
    DISCONNECTED = "disconnected"


@dataclass(frozen=True)
class NoisePath:
    kind: NoiseKind
    facts: tuple[Fact, ...]
    atoms: tuple[Atom, ...]

    @property
    def vertices(self) -> tuple[int, ...]:
        return (self.facts[0].src,) + tuple(f.dst for f in self.facts)


def _atoms_of(g: KinshipGraph, facts: tuple[Fact, ...]) -> tuple[Atom, ...]:
    return tuple((f.pred, g.gender(f.dst)) for f in facts)


def sample_target(g: KinshipGraph, seed: int = 0) -> TargetFact:
    """Uniform draw over every edge of the graph."""
    facts = g.facts()
    if not facts:
        raise ConfigError("cannot sample a target from an edgeless graph")
    fact = random.Random(seed).choice(facts)
    return TargetFact(fact.src, fact.dst, fact.pred)


def backward_chain(
    g: KinshipGraph,
    target: TargetFact,
    k: int,
    seed: int = 0,
    rb: RuleBase | None = None,
    max_restarts: int = 50,
) -> ReasoningChain:
    """Expand target into a k-fact simple path of graph edges.

    Each step picks a chain fact uniformly, then a rule uniformly among
    rules with at least one valid grounding, then a midpoint uniformly.
    Midpoints already on the path are rejected. An attempt with an
    unexpandable pick restarts from scratch; the restart budget exhausted
    raises UnexpandableError.
    """
    if rb is None:
        rb = default_rulebase()
    if k < 1:
        raise ConfigError(f"chain length must be >= 1, got {k}")
    if g.predicate(target.head, target.tail) is not target.pred:
        raise ConfigError(f"target {target} is not an edge of the graph")
    rng = random.Random(seed)
    for _ in range(max_restarts):
        facts = [target.as_fact()]
        on_path = {target.head, target.tail}
        trace: list[TraceStep] = []
        while len(facts) < k:
            index = rng.randrange(len(facts))
            fact = facts[index]
            options: list[tuple[Rule, list[int]]] = []
            for rule in rb.rules_for_head(fact.pred):
                first, second = rule.body
                midpoints = sorted(
                    z
                    for z, pred in g.out_of(fact.src).items()
                    if pred is first
                    and z not in on_path
                    and g.predicate(z, fact.dst) is second
                )
                if midpoints:
                    options.append((rule, midpoints))
            if not options:
                break
            rule, midpoints = rng.choice(options)
            z = rng.choice(midpoints)
            facts[index : index + 1] = [
                Fact(fact.src, z, rule.body[0]),
                Fact(z, fact.dst, rule.body[1]),
            ]
            on_path.add(z)
            trace.append(TraceStep(index, rule, z))
        if len(facts) == k:
            return ReasoningChain(target, tuple(facts), _atoms_of(g, tuple(facts)), tuple(trace))
    raise UnexpandableError(
        f"no length-{k} expansion of {target} within {max_restarts} restarts"
    )


def replay_trace(
    target: TargetFact, trace: tuple[TraceStep, ...], rb: RuleBase | None = None
) -> tuple[Fact, ...]:
    """Rebuild the chain from its trace, validating every step."""
    if rb is None:
        rb = default_rulebase()
    facts = [target.as_fact()]
    on_path = {target.head, target.tail}
    for step in trace:
        fact = facts[step.fact_index]
        if rb.compose(*step.rule.body) is not fact.pred:
            raise ConfigError(f"trace step {step} does not derive {fact}")
        if step.midpoint in on_path:
            raise ConfigError(f"trace step {step} revisits entity {step.midpoint}")
        facts[step.fact_index : step.fact_index + 1] = [
            Fact(fact.src, step.midpoint, step.rule.body[0]),
            Fact(step.midpoint, fact.dst, step.rule.body[1]),
        ]
        on_path.add(step.midpoint)
    return tuple(facts)


def _paths_between(
    g: KinshipGraph,
    start: int,
    goal: int,
    min_len: int,
    max_len: int,
    banned_interior: set[int],
    banned_pairs: set[frozenset[int]],
) -> list[tuple[Fact, ...]]:
    """Simple directed start -> goal paths with banned interiors and edges."""
    found: list[tuple[Fact, ...]] = []

    def dfs(node: int, facts: tuple[Fact, ...], visited: frozenset[int]) -> None:
        for nxt, pred in sorted(g.out_of(node).items()):
            if nxt in visited or frozenset((node, nxt)) in banned_pairs:
                continue
            fact = Fact(node, nxt, pred)
            if nxt == goal:
                if len(facts) + 1 >= min_len:
                    found.append(facts + (fact,))
                continue
            if nxt in banned_interior or len(facts) + 1 >= max_len:
                continue
            dfs(nxt, facts + (fact,), visited | {nxt})

    dfs(start, (), frozenset((start,)))
    return found


def _paths_from(
    g: KinshipGraph, start: int, min_len: int, max_len: int, banned: set[int]
) -> list[tuple[Fact, ...]]:
    """Simple directed paths out of start avoiding banned vertices."""
    found: list[tuple[Fact, ...]] = []

    def dfs(node: int, facts: tuple[Fact, ...], visited: frozenset[int]) -> None:
        for nxt, pred in sorted(g.out_of(node).items()):
            if nxt in visited or nxt in banned:
                continue
            path = facts + (Fact(node, nxt, pred),)
            if len(path) >= min_len:
                found.append(path)
            if len(path) < max_len:
                dfs(nxt, path, visited | {nxt})

    dfs(start, (), frozenset((start,)))
    return found


def _pick_path(
    rng: random.Random, candidates: list[tuple[Fact, ...]]
) -> tuple[Fact, ...]:
    """Uniform over available lengths, then uniform within the length."""
    by_len: dict[int, list[tuple[Fact, ...]]] = {}
    for path in candidates:
        by_len.setdefault(len(path), []).append(path)
    length = rng.choice(sorted(by_len))
    ranked = sorted(
        by_len[length], key=lambda p: tuple((f.src, f.dst, f.pred.value) for f in p)
    )
    return rng.choice(ranked)


def sample_supporting_noise(
    g: KinshipGraph, chain: ReasoningChain, seed: int = 0
) -> NoisePath:
    """A 2-3 edge alternative route between two chain vertices.

    Endpoints are chain vertices vi, vj with i < j; interior vertices
    leave the chain; no edge reuses a chain edge even reversed. The
    result closes a cycle with the chain segment it parallels.
    """
    if chain.k < 2:
        raise ConfigError("supporting noise requires a chain of length >= 2")
    rng = random.Random(seed)
    vertices = chain.vertices
    on_chain = set(vertices)
    chain_pairs = {frozenset((f.src, f.dst)) for f in chain.facts}
    index_pairs = [
        (i, j) for i in range(len(vertices)) for j in range(i + 1, len(vertices))
    ]
    for i, j in rng.sample(index_pairs, len(index_pairs)):
        candidates = _paths_between(
            g,
            vertices[i],
            vertices[j],
            min_len=2,
            max_len=3,
            banned_interior=on_chain,
            banned_pairs=chain_pairs,
        )
        if candidates:
            facts = _pick_path(rng, candidates)
            return NoisePath(NoiseKind.SUPPORTING, facts, _atoms_of(g, facts))
    raise NoiseSearchError("no supporting path between any two chain vertices")


def sample_irrelevant_noise(
    g: KinshipGraph, chain: ReasoningChain, seed: int = 0
) -> NoisePath:
    """A 1-3 edge dead-end hanging off one query entity.

    The anchor is chosen uniformly between the chain endpoints; every
    other vertex of the path avoids the chain, so the only shared vertex
    is the anchor itself.
    """
    rng = random.Random(seed)
    endpoints = [chain.vertices[0], chain.vertices[-1]]
    anchor = rng.choice(endpoints)
    on_chain = set(chain.vertices)
    for candidate_anchor in (anchor, *(e for e in endpoints if e != anchor)):
        candidates = _paths_from(
            g, candidate_anchor, min_len=1, max_len=3, banned=on_chain
        )
        if candidates:
            facts = _pick_path(rng, candidates)
            return NoisePath(NoiseKind.IRRELEVANT, facts, _atoms_of(g, facts))
    raise NoiseSearchError("no off-chain path from either query entity")


def sample_disconnected_noise(
    params: BackboneParams,
    seed: int = 0,
    id_offset: int = 0,
    rb: RuleBase | None = None,
) -> tuple[NoisePath, KinshipGraph]:
    """A 1-3 edge path in a fresh, unrelated closed family graph.

    Entity ids are offset to stay disjoint from the caller's graph; the
    returned graph is unnamed, and callers must name it disjointly from
    the story's other entities.
    """
    rng = random.Random(seed)
    for attempt in range(20):
        world = generate_backbone(
            BackboneParams(
                params.generations, params.max_children, params.p_marry, seed + attempt
            )
        )
        try:
            closed = close_graph(_shift_ids(world, id_offset), rb)
        except ClosureConflictError:
            continue
        starts = sorted(closed.entities)
        for start in rng.sample(starts, len(starts)):
            candidates = _paths_from(closed, start, min_len=1, max_len=3, banned=set())
            if candidates:
                facts = _pick_path(rng, candidates)
                return (
                    NoisePath(NoiseKind.DISCONNECTED, facts, _atoms_of(closed, facts)),
                    closed,
                )
    raise NoiseSearchError("could not build a disconnected noise world")


def _shift_ids(g: KinshipGraph, offset: int) -> KinshipGraph:
    if offset == 0:
        return g
    out = KinshipGraph(id_base=offset)
    for i in sorted(g.entities):
        ent = g.entities[i]
        out.add_entity(ent.gender, ent.name)
    for fact in g.facts():
        out.add_edge(
            fact.src + offset,
            fact.dst + offset,
            fact.pred,
            backbone=(fact.src, fact.dst) in g.backbone,
        )
    out.closed = g.closed
    return out
