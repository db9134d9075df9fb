"""Triple datasets: loading, vocabularies, the filter index and relation statistics."""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
CATEGORIES = ("1-to-1", "1-to-N", "N-to-1", "N-to-N")
PATTERNS = ("Sym", "Inv", "Com", "Others")
UNCATEGORIZED = "uncategorized"
MAPPING_THRESHOLD = 1.5


class DataError(ValueError):
    """Raised for missing dataset files or malformed triple lines."""


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


class Vocab:
    """Dense name <-> id bijections for entities and relations."""

    def __init__(self, entities: Sequence[str], relations: Sequence[str]):
        self.entities = tuple(entities)
        self.relations = tuple(relations)
        self.entity_ids = {name: i for i, name in enumerate(self.entities)}
        self.relation_ids = {name: i for i, name in enumerate(self.relations)}
        if len(self.entity_ids) != len(self.entities):
            raise ValueError("duplicate entity names")
        if len(self.relation_ids) != len(self.relations):
            raise ValueError("duplicate relation names")

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    def encode(self, h: str, r: str, t: str) -> Triple:
        return Triple(self.entity_ids[h], self.relation_ids[r], self.entity_ids[t])

    def decode(self, triple) -> tuple[str, str, str]:
        h, r, t = (int(x) for x in triple)
        return self.entities[h], self.relations[r], self.entities[t]

    def to_json(self) -> dict:
        return {"entities": list(self.entities), "relations": list(self.relations)}

    @classmethod
    def from_json(cls, data: dict) -> "Vocab":
        return cls(data["entities"], data["relations"])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Vocab)
            and self.entities == other.entities
            and self.relations == other.relations
        )


class FilterIndex:
    """Known-true completions over all splits, used by filtered ranking."""

    def __init__(self, triples: np.ndarray):
        tails = defaultdict(set)
        heads = defaultdict(set)
        for h, r, t in triples.tolist():
            tails[(h, r)].add(t)
            heads[(r, t)].add(h)
        self.tails_of = {k: frozenset(v) for k, v in tails.items()}
        self.heads_of = {k: frozenset(v) for k, v in heads.items()}

    def true_tails(self, h: int, r: int) -> frozenset:
        return self.tails_of.get((h, r), frozenset())

    def true_heads(self, r: int, t: int) -> frozenset:
        return self.heads_of.get((r, t), frozenset())

    def __contains__(self, triple) -> bool:
        h, r, t = (int(x) for x in triple)
        return t in self.true_tails(h, r)


def _as_array(triples) -> np.ndarray:
    arr = np.asarray(triples, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 3), dtype=np.int64)
    return arr.reshape(-1, 3)


@dataclass
class KnowledgeGraph:
    vocab: Vocab
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    name: str = ""
    filter: FilterIndex = field(init=False, repr=False)

    def __post_init__(self):
        self.train = _as_array(self.train)
        self.valid = _as_array(self.valid)
        self.test = _as_array(self.test)
        for split in SPLITS:
            arr = self.split(split)
            if len(arr) == 0:
                continue
            if arr.min() < 0:
                raise ValueError(f"negative id in {split}")
            if arr[:, [0, 2]].max() >= self.num_entities or arr[:, 1].max() >= self.num_relations:
                raise ValueError(f"{split} references an id outside the vocabulary")
        seen = [set(map(tuple, self.split(s).tolist())) for s in SPLITS]
        for i in range(3):
            for j in range(i + 1, 3):
                overlap = len(seen[i] & seen[j])
                if overlap:
                    log.warning("%d triples shared by %s and %s", overlap, SPLITS[i], SPLITS[j])
        self.filter = FilterIndex(np.concatenate([self.train, self.valid, self.test]))

    @property
    def num_entities(self) -> int:
        return self.vocab.num_entities

    @property
    def num_relations(self) -> int:
        return self.vocab.num_relations

    def split(self, name: str) -> np.ndarray:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def triples(self, name: str) -> list[Triple]:
        return [Triple(*row) for row in self.split(name).tolist()]

    @classmethod
    def from_named(
        cls,
        train: Iterable[tuple[str, str, str]],
        valid: Iterable[tuple[str, str, str]] = (),
        test: Iterable[tuple[str, str, str]] = (),
        name: str = "",
    ) -> "KnowledgeGraph":
        """Build a graph from raw name triples; ids follow first appearance."""
        splits = {}
        entities: dict[str, None] = {}
        relations: dict[str, None] = {}
        for split, rows in zip(SPLITS, (train, valid, test)):
            rows = _dedupe(list(rows), split)
            for h, r, t in rows:
                entities.setdefault(h)
                relations.setdefault(r)
                entities.setdefault(t)
            splits[split] = rows
        vocab = Vocab(list(entities), list(relations))
        encoded = {s: [vocab.encode(*row) for row in rows] for s, rows in splits.items()}
        return cls(vocab, encoded["train"], encoded["valid"], encoded["test"], name=name)


def _dedupe(rows: list, split: str) -> list:
    unique = list(dict.fromkeys(tuple(r) for r in rows))
    dropped = len(rows) - len(unique)
    if dropped:
        log.info("dropped %d duplicate lines in %s", dropped, split)
    return unique


def read_triples(path: Path) -> list[tuple[str, str, str]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
            rows.append((parts[0], parts[1], parts[2]))
    return rows


def load_dataset(directory) -> KnowledgeGraph:
    """Load ``train.txt``, ``valid.txt`` and ``test.txt`` from ``directory``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"missing dataset directory: {directory}")
    raw = [read_triples(directory / f"{s}.txt") for s in SPLITS]
    return KnowledgeGraph.from_named(*raw, name=directory.name)


def write_triples(path, triples: Iterable[tuple[str, str, str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for h, r, t in triples:
            fh.write(f"{h}\t{r}\t{t}\n")


def save_dataset(kg: KnowledgeGraph, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for s in SPLITS:
        write_triples(directory / f"{s}.txt", (kg.vocab.decode(x) for x in kg.split(s)))


@dataclass(frozen=True)
class RelationStats:
    relation: int
    hpt: float
    tph: float
    category: str


def categorize(hpt: float, tph: float) -> str:
    many_heads = hpt >= MAPPING_THRESHOLD
    many_tails = tph >= MAPPING_THRESHOLD
    if many_heads and many_tails:
        return "N-to-N"
    if many_heads:
        return "N-to-1"
    if many_tails:
        return "1-to-N"
    return "1-to-1"


def relation_stats(train) -> list[RelationStats]:
    """Average heads-per-tail / tails-per-head for every relation seen in ``train``."""
    train = _as_array(train)
    if len(train) == 0:
        raise ValueError("relation_stats needs a non-empty train split")
    train = np.unique(train, axis=0)
    out = []
    for r in np.unique(train[:, 1]).tolist():
        rows = train[train[:, 1] == r]
        n = len(rows)
        tph = n / len(np.unique(rows[:, 0]))
        hpt = n / len(np.unique(rows[:, 2]))
        out.append(RelationStats(r, hpt, tph, categorize(hpt, tph)))
    return out


def category_map(stats: Iterable[RelationStats]) -> dict[int, str]:
    return {s.relation: s.category for s in stats}


@dataclass
class PatternCensus:
    counts: dict[str, int]
    labels: list[str]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def percentages(self) -> dict[str, float]:
        total = self.total
        return {k: (100.0 * v / total if total else 0.0) for k, v in self.counts.items()}


def classify_test_triplets(kg: KnowledgeGraph, max_path_len: int = 3) -> PatternCensus:
    """Bucket each test triple by how it can be inferred from train.

    Priority is Sym, then Inv, then Com (a simple directed path of 2 to
    ``max_path_len`` train edges from head to tail), otherwise Others.
    """
    if max_path_len not in (2, 3):
        raise ValueError("max_path_len must be 2 or 3")
    pair_rels: dict[tuple[int, int], set[int]] = defaultdict(set)
    out_nb: dict[int, set[int]] = defaultdict(set)
    in_nb: dict[int, set[int]] = defaultdict(set)
    for h, r, t in kg.train.tolist():
        pair_rels[(h, t)].add(r)
        out_nb[h].add(t)
        in_nb[t].add(h)

    empty: set[int] = set()

    def has_path(h: int, t: int) -> bool:
        first = out_nb.get(h, empty) - {h, t}
        if not first:
            return False
        preds = in_nb.get(t, empty) - {h, t}
        if not preds:
            return False
        if not first.isdisjoint(preds):
            return True
        if max_path_len == 3:
            for x in first:
                nxt = out_nb.get(x, empty)
                if len(nxt) > len(preds):
                    if any(y != x and y in nxt for y in preds):
                        return True
                elif any(y != x and y in preds for y in nxt):
                    return True
        return False

    labels = []
    for h, r, t in kg.test.tolist():
        back = pair_rels.get((t, h), empty)
        if r in back:
            labels.append("Sym")
        elif back:
            labels.append("Inv")
        elif has_path(h, t):
            labels.append("Com")
        else:
            labels.append("Others")
    counts = Counter(labels)
    return PatternCensus({p: counts.get(p, 0) for p in PATTERNS}, labels)


def mapping_census(kg: KnowledgeGraph, stats: Iterable[RelationStats]) -> dict[str, float]:
    """Percentage of test triples per relation category of their relation."""
    cats = category_map(stats)
    counts = Counter(cats.get(r, UNCATEGORIZED) for r in kg.test[:, 1].tolist())
    total = len(kg.test)
    out = {c: (100.0 * counts.get(c, 0) / total if total else 0.0) for c in CATEGORIES}
    if counts.get(UNCATEGORIZED):
        out[UNCATEGORIZED] = 100.0 * counts[UNCATEGORIZED] / total
    return out


def dataset_report(kg: KnowledgeGraph, max_path_len: int = 3) -> dict:
    stats = relation_stats(kg.train)
    census = classify_test_triplets(kg, max_path_len)
    return {
        "name": kg.name,
        "num_entities": kg.num_entities,
        "num_relations": kg.num_relations,
        "num_train": len(kg.train),
        "num_valid": len(kg.valid),
        "num_test": len(kg.test),
        "pattern_census": {"counts": census.counts, "percent": census.percentages},
        "mapping_census": mapping_census(kg, stats),
        "relations": [
            {"relation": kg.vocab.relations[s.relation], "hpt": s.hpt, "tph": s.tph, "category": s.category}
            for s in stats
        ],
    }
