"""Filtered link-prediction ranking, metrics, category breakdowns and AUC-PR."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .kgdata import CATEGORIES, UNCATEGORIZED, FilterIndex, KnowledgeGraph, Triple, category_map, relation_stats
from .model import EmbeddingStore, score_all_heads, score_all_tails

PREDICT_HEAD = "predict-head"
PREDICT_TAIL = "predict-tail"
DIRECTIONS = (PREDICT_HEAD, PREDICT_TAIL)


class RankRecord(NamedTuple):
    triple: Triple
    direction: str
    rank: float


def tie_averaged_rank(scores: np.ndarray, target: int, excluded: Iterable[int] = ()) -> float:
    """1 + #strictly better + half the ties, over candidates not in ``excluded``."""
    keep = np.ones(len(scores), dtype=bool)
    excluded = [e for e in excluded if e != target]
    keep[excluded] = False
    keep[target] = False
    cand = scores[keep]
    s = scores[target]
    return 1.0 + float(np.count_nonzero(cand < s)) + 0.5 * float(np.count_nonzero(cand == s))


def rank_one(store: EmbeddingStore, triple, direction: str, filter: FilterIndex | None) -> RankRecord:
    h, r, t = (int(x) for x in triple)
    if direction == PREDICT_TAIL:
        scores = score_all_tails(store, h, r)
        known = filter.true_tails(h, r) if filter is not None else ()
        rank = tie_averaged_rank(scores, t, known)
    elif direction == PREDICT_HEAD:
        scores = score_all_heads(store, r, t)
        known = filter.true_heads(r, t) if filter is not None else ()
        rank = tie_averaged_rank(scores, h, known)
    else:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    return RankRecord(Triple(h, r, t), direction, rank)


@dataclass
class MetricsReport:
    mr: float
    mrr: float
    hits1: float
    hits3: float
    hits10: float
    count: int
    breakdowns: dict = field(default_factory=dict)
    records: list[RankRecord] = field(default_factory=list, repr=False)

    @classmethod
    def from_ranks(cls, ranks) -> "MetricsReport":
        ranks = np.asarray(ranks, dtype=np.float64)
        if len(ranks) == 0:
            raise ValueError("no ranks to aggregate")
        return cls(
            mr=float(ranks.mean()),
            mrr=float((1.0 / ranks).mean()),
            hits1=float((ranks <= 1).mean()),
            hits3=float((ranks <= 3).mean()),
            hits10=float((ranks <= 10).mean()),
            count=len(ranks),
        )

    def summary(self) -> dict:
        return {k: getattr(self, k) for k in ("mr", "mrr", "hits1", "hits3", "hits10", "count")}

    def to_json(self) -> dict:
        out = self.summary()
        out["breakdowns"] = {
            direction: {key: sub.summary() for key, sub in per.items()} for direction, per in self.breakdowns.items()
        }
        return out


def _rank_chunk(store, triples, filt, direction):
    return [rank_one(store, x, direction, filt) for x in triples]


def rank_split(store: EmbeddingStore, kg: KnowledgeGraph, split: str, workers: int = 1, filtered: bool = True) -> list[RankRecord]:
    if store.num_entities != kg.num_entities or store.num_relations != kg.num_relations:
        raise ValueError("store does not match the knowledge graph vocabulary")
    triples = kg.split(split).tolist()
    filt = kg.filter if filtered else None
    jobs = [(d, triples[i : i + 256]) for d in DIRECTIONS for i in range(0, len(triples), 256)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: _rank_chunk(store, job[1], filt, job[0]), jobs))
    else:
        parts = [_rank_chunk(store, chunk, filt, d) for d, chunk in jobs]
    by_dir = {d: [] for d in DIRECTIONS}
    for (d, _), part in zip(jobs, parts):
        by_dir[d].extend(part)
    # interleave: head then tail rank for each triple, in split order
    return [rec for pair in zip(by_dir[PREDICT_HEAD], by_dir[PREDICT_TAIL]) for rec in pair]


def evaluate(store: EmbeddingStore, kg: KnowledgeGraph, split: str = "test", workers: int = 1, stats=None) -> MetricsReport:
    """Filtered MR/MRR/Hits@{1,3,10} over both directions of every ``split`` triple."""
    records = rank_split(store, kg, split, workers)
    report = MetricsReport.from_ranks([rec.rank for rec in records])
    report.records = records
    report.breakdowns = _breakdowns(records, kg, stats)
    return report


def _breakdowns(records: list[RankRecord], kg: KnowledgeGraph, stats=None) -> dict:
    cats = category_map(stats if stats is not None else relation_stats(kg.train))
    out = {}
    for d in DIRECTIONS:
        per = {"all": MetricsReport.from_ranks([x.rank for x in records if x.direction == d])}
        for c in CATEGORIES + (UNCATEGORIZED,):
            ranks = [x.rank for x in records if x.direction == d and cats.get(x.triple.relation, UNCATEGORIZED) == c]
            if ranks:
                per[c] = MetricsReport.from_ranks(ranks)
        out[d] = per
    return out


def evaluate_by_category(store: EmbeddingStore, kg: KnowledgeGraph, stats=None, split: str = "test", workers: int = 1) -> dict:
    """Hits@10 and MRR per direction and relation category; empty categories are absent."""
    report = evaluate(store, kg, split, workers, stats)
    return {
        d: {c: {"hits10": sub.hits10, "mrr": sub.mrr, "count": sub.count} for c, sub in per.items() if c != "all"}
        for d, per in report.breakdowns.items()
    }


def report_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["direction", "category", "count", "mr", "mrr", "hits1", "hits3", "hits10"])
    for d, per in report.breakdowns.items():
        for c, sub in per.items():
            writer.writerow([d, c, sub.count, repr(sub.mr), repr(sub.mrr), repr(sub.hits1), repr(sub.hits3), repr(sub.hits10)])
    return buf.getvalue()


def report_json(report: MetricsReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"


def ranks_csv(records: list[RankRecord], kg: KnowledgeGraph) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["head", "relation", "tail", "direction", "rank"])
    for rec in records:
        writer.writerow([*kg.vocab.decode(rec.triple), rec.direction, repr(rec.rank)])
    return buf.getvalue()


def auc_pr(scores, labels) -> float:
    """Average precision with lower scores ranked as more plausible.

    Equal scores enter the sweep together, so a tie block contributes its
    positives at the block's (pessimistic) precision.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).astype(bool).ravel()
    if len(scores) != len(labels):
        raise ValueError("scores and labels differ in length")
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("auc_pr needs at least one positive label")
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    y = labels[order]
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[ends]
    seen = ends + 1
    new_pos = np.diff(np.r_[0, tp])
    return float(np.sum((tp / seen) * new_pos) / n_pos)


def countries_auc_pr(store: EmbeddingStore, kg: KnowledgeGraph, relation: str, regions: list[str], split: str = "test") -> float:
    """Score every held-out ``relation(country, region)`` query against all regions."""
    r = kg.vocab.relation_ids[relation]
    region_ids = np.array([kg.vocab.entity_ids[x] for x in regions])
    scores, labels = [], []
    for h, rel, t in kg.split(split).tolist():
        if rel != r:
            continue
        scores.append(score_all_tails(store, h, r)[region_ids])
        labels.append(region_ids == t)
    if not scores:
        raise ValueError(f"no {relation} triples in {split}")
    return auc_pr(np.concatenate(scores), np.concatenate(labels))


def evaluate_countries(stores, kg: KnowledgeGraph, regions: list[str], relation: str = "locatedIn", split: str = "test") -> list[float]:
    """AUC-PR of each independently trained store on the held-out region queries."""
    return [countries_auc_pr(store, kg, relation, regions, split) for store in stores]
