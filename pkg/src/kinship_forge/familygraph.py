"""Family world sampling: backbones, rule closure, name assignment.

A backbone is a forest-of-couples family tree; closure extends it with
every relation the rule base can derive. Edges are directed and carry
exactly one predicate per ordered entity pair.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .errors import ClosureConflictError, ConfigError, EdgeConflictError, PoolExhaustedError
from .ontology import Gender, Predicate, RuleBase, default_rulebase, parse_gender


@dataclass(frozen=True)
class Fact:
    """Directed edge: pred(src, dst), gendering dst."""

    src: int
    dst: int
    pred: Predicate

    def __str__(self) -> str:
        return f"{self.pred.value}({self.src},{self.dst})"


@dataclass
class Entity:
    id: int
    gender: Gender
    name: str = ""


@dataclass(frozen=True)
class BackboneParams:
    generations: int = 3
    max_children: int = 3
    p_marry: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.generations < 2:
            raise ConfigError("generations must be >= 2")
        if self.max_children < 1:
            raise ConfigError("max_children must be >= 1")
        if not 0.0 <= self.p_marry <= 1.0:
            raise ConfigError("p_marry must lie in [0, 1]")


class KinshipGraph:
    """Mutable relation graph over integer entity ids.

    Keeps out- and in-adjacency for the closure and the chain sampler.
    `id_base` offsets fresh ids so two graphs can stay disjoint.
    """

    def __init__(self, id_base: int = 0) -> None:
        self.entities: dict[int, Entity] = {}
        self.backbone: set[tuple[int, int]] = set()
        self.closed = False
        self._id_base = id_base
        self._out: dict[int, dict[int, Predicate]] = {}
        self._in: dict[int, dict[int, Predicate]] = {}

    def add_entity(self, gender: Gender, name: str = "") -> Entity:
        ent = Entity(self._id_base + len(self.entities), gender, name)
        self.entities[ent.id] = ent
        self._out[ent.id] = {}
        self._in[ent.id] = {}
        return ent

    def add_edge(self, src: int, dst: int, pred: Predicate, backbone: bool = False) -> None:
        if src == dst:
            raise ConfigError(f"self-loop edge on entity {src}")
        if src not in self.entities or dst not in self.entities:
            raise ConfigError(f"edge endpoints {src},{dst} not both in graph")
        existing = self._out[src].get(dst)
        if existing is not None and existing is not pred:
            raise EdgeConflictError(
                f"({src},{dst}) already {existing.value}, refusing {pred.value}"
            )
        self._out[src][dst] = pred
        self._in[dst][src] = pred
        if backbone:
            self.backbone.add((src, dst))

    def predicate(self, src: int, dst: int) -> Predicate | None:
        out = self._out.get(src)
        return out.get(dst) if out else None

    def out_of(self, src: int) -> dict[int, Predicate]:
        return self._out.get(src, {})

    def in_of(self, dst: int) -> dict[int, Predicate]:
        return self._in.get(dst, {})

    def gender(self, entity_id: int) -> Gender:
        return self.entities[entity_id].gender

    def facts(self) -> tuple[Fact, ...]:
        """All edges as Facts, sorted for determinism."""
        return tuple(
            Fact(src, dst, pred)
            for src in sorted(self._out)
            for dst, pred in sorted(self._out[src].items())
        )

    @property
    def edge_count(self) -> int:
        return sum(len(d) for d in self._out.values())

    def copy(self) -> "KinshipGraph":
        dup = KinshipGraph(self._id_base)
        dup.entities = {i: replace(e) for i, e in self.entities.items()}
        dup.backbone = set(self.backbone)
        dup.closed = self.closed
        dup._out = {i: dict(d) for i, d in self._out.items()}
        dup._in = {i: dict(d) for i, d in self._in.items()}
        return dup

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KinshipGraph):
            return NotImplemented
        return (
            {i: (e.gender, e.name) for i, e in self.entities.items()}
            == {i: (e.gender, e.name) for i, e in other.entities.items()}
            and self._out == other._out
            and self.backbone == other.backbone
        )


def generate_backbone(params: BackboneParams) -> KinshipGraph:
    """Sample a family tree rooted at one founding couple.

    Couples draw Uniform{1..max_children} children with fair coin genders.
    Every non-final-generation person marries a fresh opposite-gender
    entity with probability p_marry; only couples bear children.
    """
    rng = random.Random(params.seed)
    g = KinshipGraph()
    husband = g.add_entity(Gender.MALE)
    wife = g.add_entity(Gender.FEMALE)
    _marry(g, husband.id, wife.id)
    couples = [(husband.id, wife.id)]
    for gen in range(1, params.generations):
        next_couples: list[tuple[int, int]] = []
        for a, b in couples:
            kids = []
            for _ in range(rng.randint(1, params.max_children)):
                gender = Gender.MALE if rng.random() < 0.5 else Gender.FEMALE
                kid = g.add_entity(gender)
                kids.append(kid.id)
                for parent in (a, b):
                    g.add_edge(parent, kid.id, Predicate.CHILD, backbone=True)
                    g.add_edge(kid.id, parent, Predicate.INV_CHILD, backbone=True)
            for x in kids:
                for y in kids:
                    if x != y:
                        g.add_edge(x, y, Predicate.SIBLING, backbone=True)
            if gen + 1 < params.generations:
                for kid in kids:
                    if rng.random() < params.p_marry:
                        spouse = g.add_entity(g.gender(kid).opposite)
                        _marry(g, kid, spouse.id)
                        next_couples.append((kid, spouse.id))
        couples = next_couples
        if not couples:
            break
    return g


def _marry(g: KinshipGraph, a: int, b: int) -> None:
    g.add_edge(a, b, Predicate.SO, backbone=True)
    g.add_edge(b, a, Predicate.SO, backbone=True)


def close_graph(g: KinshipGraph, rb: RuleBase | None = None) -> KinshipGraph:
    """Least-fixpoint rule closure, in rounds, shortest derivation first.

    Each round derives heads for X -> Z -> Y chains over the current
    edges. A pair keeps its first label: later rounds never relabel.
    Two different predicates first derivable for one pair in the same
    round mean the world is inconsistent; callers resample the backbone.
    Idempotent, and independent of scan order by round construction.
    """
    if rb is None:
        rb = default_rulebase()
    out = g.copy()
    if out.closed:
        return out
    frontier: list[tuple[int, int]] = [(f.src, f.dst) for f in out.facts()]
    while frontier:
        candidates: dict[tuple[int, int], set[Predicate]] = {}
        for x, z in frontier:
            first = out.predicate(x, z)
            for y, second in out.out_of(z).items():
                if y != x and out.predicate(x, y) is None:
                    head = rb.compose(first, second)
                    if head:
                        candidates.setdefault((x, y), set()).add(head)
            for w, before in out.in_of(x).items():
                if w != z and out.predicate(w, z) is None:
                    head = rb.compose(before, first)
                    if head:
                        candidates.setdefault((w, z), set()).add(head)
        frontier = []
        for pair in sorted(candidates):
            preds = candidates[pair]
            if len(preds) > 1:
                names = ", ".join(sorted(p.value for p in preds))
                raise ClosureConflictError(f"pair {pair} derives {{{names}}} in one round")
            out.add_edge(pair[0], pair[1], preds.pop())
            frontier.append(pair)
    out.closed = True
    return out


def load_name_pool(path: str | Path) -> tuple[tuple[str, Gender], ...]:
    """Read `name,gender` lines into an ordered pool."""
    pool = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        try:
            name, gender_text = line.split(",")
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: expected 'name,gender'") from None
        pool.append((name.strip(), parse_gender(gender_text.strip())))
    names = [n for n, _ in pool]
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}: duplicate names in pool")
    return tuple(pool)


def default_name_pool() -> tuple[tuple[str, Gender], ...]:
    source = resources.files("kinship_forge").joinpath("data/names.txt")
    with resources.as_file(source) as path:
        return load_name_pool(path)


def assign_names(
    g: KinshipGraph,
    pool: tuple[tuple[str, Gender], ...] | None = None,
    seed: int = 0,
) -> KinshipGraph:
    """Return a copy with fresh gender-matched, graph-unique names."""
    if pool is None:
        pool = default_name_pool()
    rng = random.Random(seed)
    out = g.copy()
    for gender in Gender:
        ids = sorted(i for i, e in out.entities.items() if e.gender is gender)
        names = [n for n, ng in pool if ng is gender]
        if len(names) < len(ids):
            raise PoolExhaustedError(
                f"{len(ids)} {gender.value} entities but only {len(names)} pool names"
            )
        for entity_id, name in zip(ids, rng.sample(names, len(ids))):
            out.entities[entity_id].name = name
    return out


def dump_graph(g: KinshipGraph) -> str:
    """Stable debug listing: entity table, then `src predicate dst` lines."""
    lines = [f"# entities ({len(g.entities)})"]
    for i in sorted(g.entities):
        e = g.entities[i]
        name = e.name or "-"
        lines.append(f"{e.id} {e.gender.value} {name}")
    lines.append(f"# edges ({g.edge_count})")
    for fact in g.facts():
        tag = " backbone" if (fact.src, fact.dst) in g.backbone else ""
        lines.append(f"{fact.src} {fact.pred.value} {fact.dst}{tag}")
    return "\n".join(lines)
