"""Story rendering from template banks.

Templates address entities through [ENT_0]..[ENT_n] slots, one per path
vertex of their shape key. A story partitions its chain into 1-3 fact
segments, renders each from an eligible template, then splices noise
sentences in at random sentence boundaries without reordering the main
narrative.
"""

from __future__ import annotations

import json
import math
import random
import re
import warnings
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .chains import NoisePath, ReasoningChain
from .errors import (
    BankFormatError,
    ConfigError,
    CoverageError,
    InsufficientTemplatesError,
    NoEligibleTemplateError,
    PoolExhaustedError,
)
from .familygraph import Entity
from .ontology import (
    Atom,
    Gender,
    RuleBase,
    default_rulebase,
    enumerate_shapes,
    parse_gender,
    parse_predicate,
    shape_keys,
    surface,
)
from .solver import fold_predicates

SLOT_RE = re.compile(r"\[ENT_(\d+)\]")
_BRACKET_RE = re.compile(r"\[[^\]]*\]")
_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")


class Split(Enum):
    TRAIN = "train"
    TEST = "test"
    UNSPLIT = "unsplit"


class Naming(Enum):
    NAMES = "names"
    CLOZE = "cloze"


class AnswerLeakWarning(UserWarning):
    """A template mentions the surface form its own key derives."""


@dataclass(frozen=True)
class Template:
    id: str
    key: tuple[Atom, ...]
    text: str
    split: Split = Split.UNSPLIT


class TemplateBank:
    """Keyed template store; lookup by gendered shape key and split."""

    def __init__(self, templates: Iterable[Template], provenance: str = "memory") -> None:
        self.provenance = provenance
        self._by_key: dict[tuple[Atom, ...], list[Template]] = {}
        seen: set[str] = set()
        for t in templates:
            if t.id in seen:
                raise BankFormatError(f"duplicate template id {t.id!r}")
            seen.add(t.id)
            self._by_key.setdefault(t.key, []).append(t)

    def keys(self) -> tuple[tuple[Atom, ...], ...]:
        return tuple(sorted(self._by_key, key=_key_sort))

    def templates_for(self, key: tuple[Atom, ...]) -> tuple[Template, ...]:
        return tuple(self._by_key.get(key, ()))

    def eligible(self, key: tuple[Atom, ...], split: Split) -> tuple[Template, ...]:
        pool = self._by_key.get(key)
        if not pool:
            raise CoverageError(f"bank has no templates for key {key}")
        chosen = tuple(t for t in pool if t.split is split or t.split is Split.UNSPLIT)
        if not chosen:
            raise NoEligibleTemplateError(
                f"all templates for key {key} sit outside split {split.value}"
            )
        return chosen

    def all_templates(self) -> tuple[Template, ...]:
        return tuple(t for key in self.keys() for t in self._by_key[key])

    def __len__(self) -> int:
        return sum(len(v) for v in self._by_key.values())

    def __contains__(self, key: tuple[Atom, ...]) -> bool:
        return key in self._by_key


def _key_sort(key: tuple[Atom, ...]) -> tuple:
    from .ontology import GENDER_ORDER, PREDICATE_ORDER

    return tuple((PREDICATE_ORDER[p], GENDER_ORDER[g]) for p, g in key)


def _validate_slots(template: Template) -> None:
    for token in _BRACKET_RE.findall(template.text):
        if not SLOT_RE.fullmatch(token):
            raise BankFormatError(f"template {template.id}: unknown slot token {token}")
    slots = {int(m) for m in SLOT_RE.findall(template.text)}
    expected = set(range(len(template.key) + 1))
    if slots != expected:
        raise BankFormatError(
            f"template {template.id}: slots {sorted(slots)} do not cover 0..{len(template.key)}"
        )


def _leak_words(key: tuple[Atom, ...], rb: RuleBase) -> tuple[str, ...]:
    heads = fold_predicates([p for p, _ in key], rb)
    return tuple(sorted(surface(h, key[-1][1]) for h in heads))


def _check_leak(template: Template, rb: RuleBase) -> None:
    lowered = template.text.lower()
    for word in _leak_words(template.key, rb):
        if re.search(rf"(?<![a-z]){re.escape(word)}(?![a-z-])", lowered):
            warnings.warn(
                f"template {template.id} mentions its own answer {word!r}",
                AnswerLeakWarning,
                stacklevel=3,
            )


def load_bank(path: str | Path, rb: RuleBase | None = None) -> TemplateBank:
    """Parse a line-delimited JSON bank; leaky templates warn, not fail."""
    if rb is None:
        rb = default_rulebase()
    templates = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BankFormatError(f"{path}:{lineno}: bad JSON ({exc.msg})") from None
        try:
            key = tuple(
                (parse_predicate(p), parse_gender(g)) for p, g in record["key"]
            )
            template = Template(
                id=str(record["id"]),
                key=key,
                text=str(record["text"]),
                split=Split(record.get("split", "unsplit")),
            )
        except (KeyError, TypeError, ValueError, ConfigError) as exc:
            raise BankFormatError(f"{path}:{lineno}: {exc}") from None
        _validate_slots(template)
        _check_leak(template, rb)
        templates.append(template)
    return TemplateBank(templates, provenance=str(path))


def save_bank(bank: TemplateBank, path: str | Path) -> None:
    with open(path, "w") as fh:
        for t in bank.all_templates():
            record = {
                "id": t.id,
                "key": [[p.value, g.value] for p, g in t.key],
                "text": t.text,
            }
            if t.split is not Split.UNSPLIT:
                record["split"] = t.split.value
            fh.write(json.dumps(record) + "\n")


_VARIANT_PATTERNS = (
    "[ENT_{b}] is the {rel} of [ENT_{a}].",
    "The {rel} of [ENT_{a}] is [ENT_{b}].",
    "[ENT_{a}] has a {rel} named [ENT_{b}].",
)


def synth_bank(
    rb: RuleBase | None = None, max_k: int = 3, variants: int = 1
) -> TemplateBank:
    """Deterministic bank covering every enumerable key up to max_k.

    variant 0 renders each fact as "[ENT_i] is the <relation> of
    [ENT_i-1]."; further variants use alternate fixed phrasings so the
    bank can survive a template split.
    """
    if rb is None:
        rb = default_rulebase()
    if not 1 <= variants <= len(_VARIANT_PATTERNS):
        raise ConfigError(f"variants must lie in 1..{len(_VARIANT_PATTERNS)}")
    templates = []
    for k in range(1, max_k + 1):
        for index, key in enumerate(shape_keys(enumerate_shapes(k, rb))):
            for v in range(variants):
                sentences = [
                    _VARIANT_PATTERNS[v].format(
                        a=i, b=i + 1, rel=surface(pred, gender)
                    )
                    for i, (pred, gender) in enumerate(key)
                ]
                templates.append(
                    Template(
                        id=f"syn-k{k}-{index:04d}-v{v}",
                        key=key,
                        text=" ".join(sentences),
                    )
                )
    return TemplateBank(templates, provenance="synthetic")


def split_bank(bank: TemplateBank, holdout_frac: float = 0.2, seed: int = 0) -> TemplateBank:
    """Tag ceil(frac * n) templates per key as test, the rest as train."""
    if not 0.0 <= holdout_frac <= 1.0:
        raise ConfigError("holdout_frac must lie in [0, 1]")
    if holdout_frac == 0.0:
        return TemplateBank(bank.all_templates(), provenance=bank.provenance)
    rng = random.Random(seed)
    tagged = []
    for key in bank.keys():
        pool = bank.templates_for(key)
        n_test = math.ceil(holdout_frac * len(pool))
        if n_test >= len(pool):
            raise InsufficientTemplatesError(
                f"key {key}: {len(pool)} templates cannot give up {n_test} to test"
            )
        test_ids = set(rng.sample([t.id for t in pool], n_test))
        tagged.extend(
            replace(t, split=Split.TEST if t.id in test_ids else Split.TRAIN)
            for t in pool
        )
    return TemplateBank(tagged, provenance=bank.provenance)


def _partitions(length: int) -> list[tuple[int, ...]]:
    """Ordered compositions of length into parts of size 1..3."""
    if length == 0:
        return [()]
    out = []
    for part in (1, 2, 3):
        if part <= length:
            out.extend((part,) + rest for rest in _partitions(length - part))
    return out


def partition_chain(
    atoms: Sequence[Atom], bank: TemplateBank, seed: int = 0
) -> list[tuple[Atom, ...]]:
    """Uniform draw over partitions whose segment keys the bank covers."""
    rng = random.Random(seed)
    return _partition_with(rng, tuple(atoms), bank)


def _partition_with(
    rng: random.Random, atoms: tuple[Atom, ...], bank: TemplateBank
) -> list[tuple[Atom, ...]]:
    valid = []
    for parts in _partitions(len(atoms)):
        segments = []
        offset = 0
        for part in parts:
            segments.append(atoms[offset : offset + part])
            offset += part
        if all(seg in bank for seg in segments):
            valid.append(segments)
    if not valid:
        raise CoverageError(f"no bank-coverable partition of {atoms}")
    return rng.choice(valid)


@dataclass(frozen=True)
class StoryRender:
    text: str
    sentence_spans: tuple[tuple[int, int], ...]
    entity_mentions: dict[int, str]
    anonymized: bool
    template_ids: tuple[str, ...]


def _instantiate(template: Template, tokens: Sequence[str]) -> str:
    return SLOT_RE.sub(lambda m: tokens[int(m.group(1))], template.text)


def _render_path(
    rng: random.Random,
    atoms: tuple[Atom, ...],
    vertices: tuple[int, ...],
    token_of: Mapping[int, str],
    bank: TemplateBank,
    split: Split,
) -> tuple[list[str], list[str]]:
    """Partition, template, and instantiate one fact path.

    Returns (sentences, template ids used).
    """
    sentences: list[str] = []
    used: list[str] = []
    offset = 0
    for segment in _partition_with(rng, atoms, bank):
        template = rng.choice(bank.eligible(segment, split))
        seg_vertices = vertices[offset : offset + len(segment) + 1]
        block = _instantiate(template, [token_of[v] for v in seg_vertices])
        sentences.extend(s for s in _SENTENCE_RE.split(block.strip()) if s)
        used.append(template.id)
        offset += len(segment)
    return sentences, used


def render_story(
    chain: ReasoningChain,
    noise: Sequence[NoisePath],
    bank: TemplateBank,
    entities: Mapping[int, Entity],
    split: Split = Split.UNSPLIT,
    naming: Naming = Naming.NAMES,
    seed: int = 0,
    cloze_pool_size: int = 100,
) -> StoryRender:
    """Compose the story text for a chain plus noise paths.

    Main-fact sentences keep path order; each noise path renders as its
    own contiguous block inserted at a uniformly chosen sentence boundary
    of the main narrative. Cloze tokens are resampled per story.
    """
    rng = random.Random(seed)
    story_entities: list[int] = []
    for vertex in chain.vertices + tuple(v for np in noise for v in np.vertices):
        if vertex not in story_entities:
            story_entities.append(vertex)
    if naming is Naming.CLOZE:
        if len(story_entities) > cloze_pool_size:
            raise PoolExhaustedError(
                f"story needs {len(story_entities)} cloze tokens, pool has {cloze_pool_size}"
            )
        pool = [f"@entity-{n}" for n in range(cloze_pool_size)]
        drawn = rng.sample(pool, len(story_entities))
        token_of = dict(zip(story_entities, drawn))
    else:
        token_of = {}
        for vertex in story_entities:
            name = entities[vertex].name
            if not name:
                raise ConfigError(f"entity {vertex} has no name; assign names first")
            token_of[vertex] = name
        if len(set(token_of.values())) != len(token_of):
            raise ConfigError("entity names collide within one story")
    main_sentences, template_ids = _render_path(
        rng, chain.atoms, chain.vertices, token_of, bank, split
    )
    insertions: list[tuple[int, list[str]]] = []
    for noise_path in noise:
        noise_sentences, noise_ids = _render_path(
            rng, noise_path.atoms, noise_path.vertices, token_of, bank, split
        )
        template_ids.extend(noise_ids)
        insertions.append((rng.randint(0, len(main_sentences)), noise_sentences))
    sentences: list[str] = []
    for boundary in range(len(main_sentences) + 1):
        for position, block in insertions:
            if position == boundary:
                sentences.extend(block)
        if boundary < len(main_sentences):
            sentences.append(main_sentences[boundary])
    text = " ".join(sentences)
    spans = []
    cursor = 0
    for sentence in sentences:
        start = text.index(sentence, cursor)
        spans.append((start, start + len(sentence)))
        cursor = start + len(sentence)
    return StoryRender(
        text=text,
        sentence_spans=tuple(spans),
        entity_mentions={v: token_of[v] for v in story_entities},
        anonymized=naming is Naming.CLOZE,
        template_ids=tuple(template_ids),
    )
