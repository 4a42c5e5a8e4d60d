"""Benchmark assembly: split configs, row generation, files, statistics.

Every row is generated from a seed derived purely from (master seed,
split, k, row index), so corpora are byte-reproducible regardless of
worker count or completion order. A row is only emitted after the
solver certifies its story facts entail exactly the recorded label.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import random
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .chains import (
    NoiseKind,
    NoisePath,
    ReasoningChain,
    backward_chain,
    sample_disconnected_noise,
    sample_irrelevant_noise,
    sample_supporting_noise,
    sample_target,
)
from .errors import (
    AmbiguousAnswerError,
    ClosureConflictError,
    ConfigError,
    CoverageError,
    GenerationBudgetError,
    NoEligibleTemplateError,
    NoiseSearchError,
    NoPathError,
    PoolExhaustedError,
    SchemaError,
    UnexpandableError,
)
from .familygraph import (
    BackboneParams,
    KinshipGraph,
    assign_names,
    close_graph,
    default_name_pool,
    generate_backbone,
)
from .narrative import (
    SLOT_RE,
    Naming,
    Split,
    TemplateBank,
    render_story,
    split_bank,
)
from .ontology import RuleBase, default_rulebase, enumerate_shapes, shape_id, shape_keys, surface
from .solver import solve

_MAIN_PARAMS = BackboneParams()
_NOISE_WORLD_PARAMS = BackboneParams(generations=2, max_children=3)
_NOISE_ID_OFFSET = 10_000


def derive_seed(*parts: object) -> int:
    """Stable 64-bit seed from structured parts; process-independent."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class SplitConfig:
    train_ks: tuple[int, ...] = (2, 3)
    test_ks: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8, 9, 10)
    n_train_per_k: int = 5000
    n_test_per_k: int = 100
    template_holdout_frac: float = 0.2
    shape_holdout_frac: float = 0.1
    train_noise: NoiseKind | None = None
    test_noise: NoiseKind | None = None
    naming: Naming = Naming.NAMES
    master_seed: int = 0
    max_row_attempts: int = 300

    def __post_init__(self) -> None:
        for label, ks in (("train_ks", self.train_ks), ("test_ks", self.test_ks)):
            if not ks:
                raise ConfigError(f"{label} must not be empty")
            if sorted(set(ks)) != sorted(ks):
                raise ConfigError(f"{label} contains duplicates")
            if any(k < 1 for k in ks):
                raise ConfigError(f"{label} entries must be >= 1")
        for label, frac in (
            ("template_holdout_frac", self.template_holdout_frac),
            ("shape_holdout_frac", self.shape_holdout_frac),
        ):
            if not 0.0 <= frac <= 1.0:
                raise ConfigError(f"{label} must lie in [0, 1]")
        if self.n_train_per_k < 0 or self.n_test_per_k < 0:
            raise ConfigError("row counts must be >= 0")
        if self.max_row_attempts < 1:
            raise ConfigError("max_row_attempts must be >= 1")
        for label, kind, ks in (
            ("train", self.train_noise, self.train_ks),
            ("test", self.test_noise, self.test_ks),
        ):
            if kind is NoiseKind.SUPPORTING and min(ks) < 2:
                raise ConfigError(f"supporting noise needs every {label} k >= 2")

    def noise_for(self, split: str) -> NoiseKind | None:
        return self.train_noise if split == "train" else self.test_noise

    def as_dict(self) -> dict:
        raw = asdict(self)
        raw["train_ks"] = sorted(self.train_ks)
        raw["test_ks"] = sorted(self.test_ks)
        raw["train_noise"] = self.train_noise.value if self.train_noise else None
        raw["test_noise"] = self.test_noise.value if self.test_noise else None
        raw["naming"] = self.naming.value
        return raw


PRESETS: dict[str, SplitConfig] = {
    "gen-k23": SplitConfig(train_ks=(2, 3)),
    "gen-k234": SplitConfig(train_ks=(2, 3, 4)),
    "robust-clean": SplitConfig(train_ks=(2, 3), test_ks=(2, 3)),
    "robust-supporting": SplitConfig(
        train_ks=(2, 3),
        test_ks=(2, 3),
        train_noise=NoiseKind.SUPPORTING,
        test_noise=NoiseKind.SUPPORTING,
    ),
    "robust-irrelevant": SplitConfig(
        train_ks=(2, 3),
        test_ks=(2, 3),
        train_noise=NoiseKind.IRRELEVANT,
        test_noise=NoiseKind.IRRELEVANT,
    ),
    "robust-disconnected": SplitConfig(
        train_ks=(2, 3),
        test_ks=(2, 3),
        train_noise=NoiseKind.DISCONNECTED,
        test_noise=NoiseKind.DISCONNECTED,
    ),
}


@dataclass(frozen=True)
class PuzzleRecord:
    id: str
    split: str
    k: int
    label: str
    query_head: str
    query_tail: str
    story: str
    genders: dict[str, str]
    facts: tuple[str, ...]
    noise_facts: tuple[str, ...]
    noise_kind: str | None
    shape_id: str
    shape_held_out: bool
    template_ids: tuple[str, ...]
    proof_trace: str
    seed: int


COLUMNS = (
    "id",
    "split",
    "k",
    "label",
    "query_head",
    "query_tail",
    "story",
    "genders",
    "facts",
    "noise_facts",
    "noise_kind",
    "shape_id",
    "shape_held_out",
    "template_ids",
    "proof_trace",
    "seed",
)


def _prepare_bank(bank: TemplateBank, cfg: SplitConfig) -> TemplateBank:
    """Apply the template holdout unless the bank arrived pre-tagged."""
    pre_tagged = any(t.split is not Split.UNSPLIT for t in bank.all_templates())
    if pre_tagged or cfg.template_holdout_frac == 0.0:
        return bank
    return split_bank(
        bank, cfg.template_holdout_frac, derive_seed(cfg.master_seed, "template-split")
    )


def _check_atom_coverage(bank: TemplateBank, rb: RuleBase) -> None:
    """Every single-fact key must be renderable on both sides of the split."""
    missing = []
    for shape in enumerate_shapes(1, rb):
        for split in (Split.TRAIN, Split.TEST):
            try:
                bank.eligible(shape.key, split)
            except (CoverageError, NoEligibleTemplateError):
                missing.append((shape.key, split.value))
    if missing:
        raise CoverageError(
            f"bank cannot render {len(missing)} single-fact key/split combinations, "
            f"first: {missing[0]}"
        )


def draw_held_out_shapes(cfg: SplitConfig, rb: RuleBase) -> dict[int, frozenset[str]]:
    """Once per master seed, reserve a fraction of each k>2 train-k's shapes."""
    held: dict[int, frozenset[str]] = {}
    if cfg.shape_holdout_frac == 0.0:
        return held
    for k in sorted(cfg.train_ks):
        if k <= 2:
            continue
        ids = sorted(shape_id(key) for key in shape_keys(enumerate_shapes(k, rb)))
        n = math.ceil(cfg.shape_holdout_frac * len(ids))
        rng = random.Random(derive_seed(cfg.master_seed, "shape-holdout", k))
        held[k] = frozenset(rng.sample(ids, n))
    return held


_RETRYABLE = (
    ClosureConflictError,
    UnexpandableError,
    NoiseSearchError,
    NoPathError,
    AmbiguousAnswerError,
    NoEligibleTemplateError,
    CoverageError,
    PoolExhaustedError,
)


def _sample_noise(
    g: KinshipGraph,
    chain: ReasoningChain,
    kind: NoiseKind,
    seed: int,
    rb: RuleBase,
) -> tuple[NoisePath, KinshipGraph | None]:
    if kind is NoiseKind.SUPPORTING:
        return sample_supporting_noise(g, chain, seed), None
    if kind is NoiseKind.IRRELEVANT:
        return sample_irrelevant_noise(g, chain, seed), None
    params = BackboneParams(
        _NOISE_WORLD_PARAMS.generations,
        _NOISE_WORLD_PARAMS.max_children,
        _NOISE_WORLD_PARAMS.p_marry,
        derive_seed(seed, "noise-world"),
    )
    return sample_disconnected_noise(params, seed, id_offset=_NOISE_ID_OFFSET, rb=rb)


def _generate_row(
    cfg: SplitConfig,
    bank: TemplateBank,
    held_out: frozenset[str],
    split: str,
    k: int,
    index: int,
    rb: RuleBase,
) -> PuzzleRecord:
    row_seed = derive_seed(cfg.master_seed, split, k, index)
    noise_kind = cfg.noise_for(split)
    bank_split = Split.TRAIN if split == "train" else Split.TEST
    last_error: Exception | None = None
    for attempt in range(cfg.max_row_attempts):
        try:
            record = _attempt_row(
                cfg, bank, held_out, split, k, index, rb,
                row_seed, attempt, noise_kind, bank_split,
            )
        except _RETRYABLE as exc:
            last_error = exc
            continue
        if record is not None:
            return record
    raise GenerationBudgetError(
        f"row {split}/k={k}/i={index}: no certified puzzle in "
        f"{cfg.max_row_attempts} attempts (last error: {last_error})"
    )


def _attempt_row(
    cfg: SplitConfig,
    bank: TemplateBank,
    held_out: frozenset[str],
    split: str,
    k: int,
    index: int,
    rb: RuleBase,
    row_seed: int,
    attempt: int,
    noise_kind: NoiseKind | None,
    bank_split: Split,
) -> PuzzleRecord | None:
    g = close_graph(
        generate_backbone(
            BackboneParams(seed=derive_seed(row_seed, attempt, "backbone"))
        ),
        rb,
    )
    target = sample_target(g, derive_seed(row_seed, attempt, "target"))
    chain = backward_chain(g, target, k, derive_seed(row_seed, attempt, "chain"), rb)
    sid = shape_id(chain.atoms)
    if split == "train" and sid in held_out:
        return None
    noise_paths: list[NoisePath] = []
    noise_world: KinshipGraph | None = None
    if noise_kind is not None:
        noise_path, noise_world = _sample_noise(
            g, chain, noise_kind, derive_seed(row_seed, attempt, "noise"), rb
        )
        noise_paths.append(noise_path)
    entities = dict(g.entities)
    if cfg.naming is Naming.NAMES:
        pool = default_name_pool()
        named = assign_names(g, pool, derive_seed(row_seed, attempt, "names"))
        entities = dict(named.entities)
        if noise_world is not None:
            used = {e.name for e in named.entities.values()}
            rest = tuple(p for p in pool if p[0] not in used)
            named_world = assign_names(
                noise_world, rest, derive_seed(row_seed, attempt, "noise-names")
            )
            entities.update(named_world.entities)
    elif noise_world is not None:
        entities.update(noise_world.entities)
    rendered = render_story(
        chain,
        noise_paths,
        bank,
        entities,
        split=bank_split,
        naming=cfg.naming,
        seed=derive_seed(row_seed, attempt, "render"),
    )
    token_of = rendered.entity_mentions
    genders_by_id = {i: entities[i].gender for i in token_of}
    name_of = token_of.__getitem__
    query = (target.head, target.tail)
    base = solve(chain.facts, query, genders_by_id, rb, name_of=name_of)
    if base.predicate is not target.pred:
        return None
    noise_facts = tuple(f for np in noise_paths for f in np.facts)
    if noise_facts:
        full = solve(
            chain.facts + noise_facts, query, genders_by_id, rb, name_of=name_of
        )
        if full.predicate is not target.pred:
            return None
    label = surface(target.pred, genders_by_id[target.tail])
    return PuzzleRecord(
        id=f"{split}-k{k}-{index:05d}",
        split=split,
        k=k,
        label=label,
        query_head=token_of[target.head],
        query_tail=token_of[target.tail],
        story=rendered.text,
        genders={token_of[i]: genders_by_id[i].value for i in token_of},
        facts=tuple(
            f"{f.pred.value}({token_of[f.src]},{token_of[f.dst]})" for f in chain.facts
        ),
        noise_facts=tuple(
            f"{f.pred.value}({token_of[f.src]},{token_of[f.dst]})" for f in noise_facts
        ),
        noise_kind=noise_kind.value if noise_kind else None,
        shape_id=sid,
        shape_held_out=sid in held_out,
        template_ids=rendered.template_ids,
        proof_trace=base.proof,
        seed=row_seed,
    )


_WORKER: dict = {}


def _init_worker(cfg: SplitConfig, bank: TemplateBank, held: dict, rb: RuleBase) -> None:
    _WORKER.update(cfg=cfg, bank=bank, held=held, rb=rb)


def _row_task(spec: tuple[str, int, int]) -> PuzzleRecord:
    split, k, index = spec
    held = _WORKER["held"].get(k, frozenset())
    return _generate_row(
        _WORKER["cfg"], _WORKER["bank"], held, split, k, index, _WORKER["rb"]
    )


def generate_dataset(
    cfg: SplitConfig,
    bank: TemplateBank,
    rb: RuleBase | None = None,
    jobs: int = 1,
) -> tuple[list[PuzzleRecord], list[PuzzleRecord], dict]:
    """Produce (train rows, test rows, manifest) for one configuration.

    Row order is (split, ascending k, row index) and never depends on
    jobs. Held-out shapes are excluded from train rows; test rows carry
    a flag instead so both regimes stay measurable.
    """
    if rb is None:
        rb = default_rulebase()
    prepared = _prepare_bank(bank, cfg)
    _check_atom_coverage(prepared, rb)
    held = draw_held_out_shapes(cfg, rb)
    specs = [
        ("train", k, i) for k in sorted(cfg.train_ks) for i in range(cfg.n_train_per_k)
    ] + [("test", k, i) for k in sorted(cfg.test_ks) for i in range(cfg.n_test_per_k)]
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if jobs == 1 or len(specs) < 2:
        _init_worker(cfg, prepared, held, rb)
        rows = [_row_task(spec) for spec in specs]
    else:
        with ProcessPoolExecutor(
            max_workers=jobs,
            initializer=_init_worker,
            initargs=(cfg, prepared, held, rb),
        ) as pool:
            chunk = max(1, len(specs) // (jobs * 8))
            rows = list(pool.map(_row_task, specs, chunksize=chunk))
    train = [r for r in rows if r.split == "train"]
    test = [r for r in rows if r.split == "test"]
    manifest = build_manifest(cfg, prepared, rb, held, train, test)
    return train, test, manifest


def bank_fingerprint(bank: TemplateBank) -> str:
    payload = json.dumps(
        sorted(
            (t.id, [[p.value, g.value] for p, g in t.key], t.text, t.split.value)
            for t in bank.all_templates()
        )
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def rules_fingerprint(rb: RuleBase) -> str:
    payload = "\n".join(str(rule) for rule in rb.rules)
    return hashlib.sha256(payload.encode()).hexdigest()


def build_manifest(
    cfg: SplitConfig,
    bank: TemplateBank,
    rb: RuleBase,
    held: dict[int, frozenset[str]],
    train: list[PuzzleRecord],
    test: list[PuzzleRecord],
) -> dict:
    counts: dict[str, dict[str, int]] = {"train": {}, "test": {}}
    for row in train:
        counts["train"][str(row.k)] = counts["train"].get(str(row.k), 0) + 1
    for row in test:
        counts["test"][str(row.k)] = counts["test"].get(str(row.k), 0) + 1
    config_payload = json.dumps(
        {
            "config": cfg.as_dict(),
            "bank": bank_fingerprint(bank),
            "rules": rules_fingerprint(rb),
        },
        sort_keys=True,
    )
    by_split: dict[str, list[str]] = {"train": [], "test": [], "unsplit": []}
    for t in bank.all_templates():
        by_split[t.split.value].append(t.id)
    return {
        "tool": "kinship-forge",
        "version": __version__,
        "master_seed": cfg.master_seed,
        "seed_scheme": "sha256(master_seed:split:k:index), first 8 bytes",
        "config": cfg.as_dict(),
        "config_hash": hashlib.sha256(config_payload.encode()).hexdigest(),
        "bank": {
            "provenance": bank.provenance,
            "templates": len(bank),
            "fingerprint": bank_fingerprint(bank),
        },
        "rules_fingerprint": rules_fingerprint(rb),
        "template_split": {
            "train_ids": sorted(by_split["train"]),
            "test_ids": sorted(by_split["test"]),
            "unsplit_ids": sorted(by_split["unsplit"]),
        },
        "shape_holdout_policy": "per-k over train ks greater than 2",
        "held_out_shapes": {str(k): sorted(ids) for k, ids in sorted(held.items())},
        "counts": counts,
    }


def _encode_cell(column: str, value: object) -> str:
    if column in ("genders", "facts", "noise_facts", "template_ids"):
        if isinstance(value, tuple):
            value = list(value)
        return json.dumps(value, separators=(",", ":"))
    if column == "shape_held_out":
        return "true" if value else "false"
    if column == "noise_kind":
        return "" if value is None else str(value)
    return str(value)


def _decode_cell(column: str, raw: str) -> object:
    if column in ("genders", "facts", "noise_facts", "template_ids"):
        value = json.loads(raw)
        return tuple(value) if isinstance(value, list) else value
    if column == "shape_held_out":
        if raw not in ("true", "false"):
            raise SchemaError(f"shape_held_out must be true/false, got {raw!r}")
        return raw == "true"
    if column == "noise_kind":
        return raw or None
    if column in ("k", "seed"):
        return int(raw)
    return raw


def write_rows(rows: list[PuzzleRecord], path: str | Path, format: str = "csv") -> None:
    """Serialize rows; identical input always yields identical bytes."""
    path = Path(path)
    if format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(COLUMNS)
            for row in rows:
                raw = asdict(row)
                writer.writerow([_encode_cell(c, raw[c]) for c in COLUMNS])
    elif format == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                raw = asdict(row)
                obj = {
                    c: list(raw[c]) if isinstance(raw[c], tuple) else raw[c]
                    for c in COLUMNS
                }
                fh.write(json.dumps(obj, separators=(",", ":")) + "\n")
    else:
        raise ConfigError(f"unknown format {format!r}; expected csv or jsonl")


def _record_from_mapping(obj: dict, origin: str) -> PuzzleRecord:
    missing = [c for c in COLUMNS if c not in obj]
    if missing:
        raise SchemaError(f"{origin}: missing column(s) {', '.join(missing)}")
    for col in ("facts", "noise_facts", "template_ids"):
        if isinstance(obj[col], list):
            obj[col] = tuple(obj[col])
    return PuzzleRecord(**{c: obj[c] for c in COLUMNS})


def read_rows(path: str | Path) -> list[PuzzleRecord]:
    """Inverse of write_rows; format inferred from the file suffix."""
    path = Path(path)
    rows = []
    if path.suffix == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError(f"{path}: empty file") from None
            missing = [c for c in COLUMNS if c not in header]
            if missing:
                raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
            index = {c: header.index(c) for c in COLUMNS}
            for lineno, cells in enumerate(reader, 2):
                obj = {c: _decode_cell(c, cells[index[c]]) for c in COLUMNS}
                rows.append(_record_from_mapping(obj, f"{path}:{lineno}"))
    elif path.suffix == ".jsonl":
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            rows.append(_record_from_mapping(json.loads(line), f"{path}:{lineno}"))
    else:
        raise ConfigError(f"cannot infer format from suffix of {path}")
    return rows


@dataclass(frozen=True)
class BankStats:
    templates_per_k: dict[int, int]
    keys_per_k: dict[int, int]
    unique_words: int
    unigram_jaccard: float
    bigram_jaccard: float


def _stat_tokens(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", SLOT_RE.sub(" ", text).lower())


def _jaccard(a: frozenset, b: frozenset) -> float:
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def compute_stats(bank: TemplateBank) -> BankStats:
    """Within-key mean pairwise Jaccard overlap, averaged across keys.

    Keys with a single template carry no pairs and drop out of the
    average; a bank with no multi-template key reports 0.0 overlap.
    Entity slots never count as words.
    """
    if len(bank) == 0:
        raise ConfigError("cannot compute statistics of an empty bank")
    templates_per_k: dict[int, int] = {}
    keys_per_k: dict[int, int] = {}
    vocabulary: set[str] = set()
    uni_means: list[float] = []
    bi_means: list[float] = []
    for key in bank.keys():
        pool = bank.templates_for(key)
        k = len(key)
        templates_per_k[k] = templates_per_k.get(k, 0) + len(pool)
        keys_per_k[k] = keys_per_k.get(k, 0) + 1
        unigrams = []
        bigrams = []
        for t in pool:
            tokens = _stat_tokens(t.text)
            vocabulary.update(tokens)
            unigrams.append(frozenset(tokens))
            bigrams.append(frozenset(zip(tokens, tokens[1:])))
        if len(pool) < 2:
            continue
        pairs = [(i, j) for i in range(len(pool)) for j in range(i + 1, len(pool))]
        uni_means.append(
            sum(_jaccard(unigrams[i], unigrams[j]) for i, j in pairs) / len(pairs)
        )
        bi_means.append(
            sum(_jaccard(bigrams[i], bigrams[j]) for i, j in pairs) / len(pairs)
        )
    return BankStats(
        templates_per_k=templates_per_k,
        keys_per_k=keys_per_k,
        unique_words=len(vocabulary),
        unigram_jaccard=sum(uni_means) / len(uni_means) if uni_means else 0.0,
        bigram_jaccard=sum(bi_means) / len(bi_means) if bi_means else 0.0,
    )
