"""Countries reasoning tasks S1/S2/S3.

The base table holds every fact: ``locatedIn(country, subregion)``,
``locatedIn(subregion, region)``, ``locatedIn(country, region)`` and a
symmetric ``neighborOf``. Each task holds out ``locatedIn(c, region)`` for
a set of test and validation countries, then removes progressively more
supporting evidence:

* S1 keeps everything else, so the region follows from the subregion.
* S2 also drops ``locatedIn(c, subregion)`` for held-out countries; the
  region must come from a neighbour.
* S3 also drops ``locatedIn(n, region)`` for every neighbour ``n`` of a
  held-out country; the neighbour's subregion is the only remaining route.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .evaluator import evaluate_countries
from .kgdata import DataError, KnowledgeGraph, load_dataset, save_dataset
from .trainer import TrainConfig, train

log = logging.getLogger(__name__)

LOCATED_IN = "locatedIn"
NEIGHBOR_OF = "neighborOf"
TASKS = ("S1", "S2", "S3")
REGIONS_FILE = "regions.txt"

# picked on S3 seeds 0-3; S1 and S2 reach 1.0 with it as well
COUNTRIES_CONFIG = TrainConfig(
    dim=40, batch_size=256, num_negatives=32, learning_rate=0.02, max_steps=3000, gamma=2.0, lam=0.1
)


@dataclass
class CountriesTable:
    """Raw facts: country -> (subregion, region) and undirected borders."""

    located: dict[str, tuple[str, str]]
    borders: set[frozenset]

    @property
    def regions(self) -> list[str]:
        return sorted({r for _, r in self.located.values()})

    @property
    def subregions(self) -> list[str]:
        return sorted({s for s, _ in self.located.values()})

    def neighbors(self, c: str) -> set[str]:
        return {x for pair in self.borders if c in pair for x in pair if x != c}

    def triples(self) -> list[tuple[str, str, str]]:
        out = []
        for c in sorted(self.located):
            s, r = self.located[c]
            out += [(c, LOCATED_IN, s), (c, LOCATED_IN, r)]
        subs = {s: r for s, r in self.located.values()}
        out += [(s, LOCATED_IN, subs[s]) for s in sorted(subs)]
        for a, b in sorted(tuple(sorted(p)) for p in self.borders):
            out += [(a, NEIGHBOR_OF, b), (b, NEIGHBOR_OF, a)]
        return out


def choose_held_out(table: CountriesTable, count: int, rng: np.random.Generator) -> list[str]:
    """Pick ``count`` countries with borders so each keeps a neighbour outside the held set."""
    candidates = sorted(c for c in table.located if table.neighbors(c))
    order = [candidates[i] for i in rng.permutation(len(candidates))]
    held: list[str] = []
    for c in order:
        if len(held) == count:
            break
        trial = set(held) | {c}
        if all(table.neighbors(x) - trial for x in trial):
            held.append(c)
    if len(held) < count:
        raise DataError(f"could only hold out {len(held)} of {count} countries")
    return held


def build_task(table: CountriesTable, task: str, test: list[str], valid: list[str]) -> KnowledgeGraph:
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}")
    held = set(test) | set(valid)
    drop = {(c, LOCATED_IN, table.located[c][1]) for c in held}
    if task in ("S2", "S3"):
        drop |= {(c, LOCATED_IN, table.located[c][0]) for c in held}
    if task == "S3":
        near = {n for c in held for n in table.neighbors(c)} - held
        drop |= {(n, LOCATED_IN, table.located[n][1]) for n in near}
    train = [x for x in table.triples() if x not in drop]
    to_test = lambda cs: [(c, LOCATED_IN, table.located[c][1]) for c in cs]
    kg = KnowledgeGraph.from_named(train, to_test(valid), to_test(test), name=f"countries-{task}")
    missing = [x for x in table.regions + table.subregions if x not in kg.vocab.entity_ids]
    if missing:
        raise DataError(f"{task}: entities absent from train: {missing}")
    return kg


def build_tasks(table: CountriesTable, held_out: int = 24, seed: int = 0) -> dict[str, KnowledgeGraph]:
    rng = np.random.default_rng(seed)
    chosen = choose_held_out(table, 2 * held_out, rng)
    test, valid = chosen[:held_out], chosen[held_out:]
    return {task: build_task(table, task, test, valid) for task in TASKS}


def write_tasks(tasks: dict[str, KnowledgeGraph], regions: list[str], directory) -> None:
    directory = Path(directory)
    for task, kg in tasks.items():
        save_dataset(kg, directory / task)
        (directory / task / REGIONS_FILE).write_text("".join(r + "\n" for r in regions), encoding="utf-8")


def load_task(data_dir, task: str) -> tuple[KnowledgeGraph, list[str]]:
    """Load ``<data_dir>/<task>`` and its region list."""
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}")
    path = Path(data_dir) / task
    regions_path = path / REGIONS_FILE
    if not regions_path.is_file():
        raise DataError(f"missing {regions_path}")
    regions = [x.strip() for x in regions_path.read_text(encoding="utf-8").splitlines() if x.strip()]
    return load_dataset(path), regions


@dataclass
class CountriesResult:
    task: str
    scores: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores))

    @property
    def std(self) -> float:
        return float(np.std(self.scores))

    def to_json(self) -> dict:
        return {"task": self.task, "auc_pr": self.scores, "mean": self.mean, "std": self.std}


def run_countries(data_dir, task: str, cfg, seeds=(0, 1, 2, 3, 4), on_record=None) -> CountriesResult:
    """Train one model per seed and score held-out ``locatedIn`` queries by AUC-PR."""
    kg, regions = load_task(data_dir, task)
    stores = []
    for seed in seeds:
        result = train(kg, replace(cfg, seed=seed), on_record=on_record)
        stores.append(result.store)
    scores = evaluate_countries(stores, kg, regions)
    log.info("%s AUC-PR per seed: %s", task, scores)
    return CountriesResult(task, scores)


def read_table(directory) -> CountriesTable:
    """Read ``locations.tsv`` (country, subregion, region) and ``borders.tsv`` (a, b)."""
    directory = Path(directory)
    located, borders = {}, set()
    for path, width in ((directory / "locations.tsv", 3), (directory / "borders.tsv", 2)):
        if not path.is_file():
            raise DataError(f"missing {path}")
        for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != width:
                raise DataError(f"{path}:{n}: expected {width} tab-separated fields")
            if width == 3:
                located[parts[0]] = (parts[1], parts[2])
            else:
                borders.add(frozenset(parts))
    unknown = {c for pair in borders for c in pair} - located.keys()
    if unknown:
        raise DataError(f"borders mention unknown countries: {sorted(unknown)}")
    return CountriesTable(located, borders)


def write_table(table: CountriesTable, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = [f"{c}\t{s}\t{r}\n" for c, (s, r) in sorted(table.located.items())]
    (directory / "locations.tsv").write_text("".join(rows), encoding="utf-8")
    pairs = sorted(tuple(sorted(p)) for p in table.borders)
    (directory / "borders.tsv").write_text("".join(f"{a}\t{b}\n" for a, b in pairs), encoding="utf-8")
