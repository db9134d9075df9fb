"""Published statistics and settings for the four standard link-prediction benchmarks.

The numbers are reference constants: the datasets themselves are not
shipped. :func:`stats_mismatches` compares a :func:`kgdata.dataset_report`
against them.
"""

from __future__ import annotations

from .trainer import TrainConfig

# counts, then test-triple percentages per pattern and per mapping category
DATASET_STATS = {
    "FB15k": dict(
        num_entities=14951, num_relations=1345, num_train=483142, num_valid=50000, num_test=59071,
        patterns={"Sym": 7.34, "Inv": 70.22, "Com": 22.37, "Others": 0.06},
        mapping={"1-to-1": 1.63, "1-to-N": 9.56, "N-to-1": 15.80, "N-to-N": 73.02},
    ),
    "WN18": dict(
        num_entities=40943, num_relations=18, num_train=141442, num_valid=5000, num_test=5000,
        patterns={"Sym": 21.74, "Inv": 72.22, "Com": 3.0, "Others": 3.04},
        mapping={"1-to-1": 0.84, "1-to-N": 36.94, "N-to-1": 39.62, "N-to-N": 22.60},
    ),
    "FB15k-237": dict(
        num_entities=14541, num_relations=237, num_train=272115, num_valid=17535, num_test=20466,
        patterns={"Sym": 0.0, "Inv": 0.0, "Com": 90.40, "Others": 9.60},
        mapping={"1-to-1": 0.94, "1-to-N": 6.32, "N-to-1": 22.03, "N-to-N": 70.72},
    ),
    "WN18RR": dict(
        num_entities=40943, num_relations=11, num_train=86835, num_valid=3034, num_test=3134,
        patterns={"Sym": 34.65, "Inv": 0.29, "Com": 8.33, "Others": 56.73},
        mapping={"1-to-1": 1.34, "1-to-N": 15.16, "N-to-1": 47.45, "N-to-N": 36.06},
    ),
}

COUNT_KEYS = ("num_entities", "num_relations", "num_train", "num_valid", "num_test")
MAPPING_TOLERANCE = 0.5
PATTERN_TOLERANCE = 5.0

# scaled run; learning rate and duration are not published
WN18RR_CONFIG = TrainConfig(
    dim=200, batch_size=1024, num_negatives=128, alpha=0.5, beta=1.0, gamma=12.0,
    learning_rate=1e-3, max_steps=100_000, valid_every=10_000,
)
WN18RR_TARGETS = {"mrr": 0.40, "hits10": 0.50}


def stats_mismatches(report: dict, expected: dict) -> list[str]:
    """Human-readable differences beyond tolerance; empty when everything matches."""
    out = []
    for key in COUNT_KEYS:
        if report[key] != expected[key]:
            out.append(f"{key}: {report[key]} != {expected[key]}")
    for name, value in expected["mapping"].items():
        got = report["mapping_census"].get(name, 0.0)
        if abs(got - value) > MAPPING_TOLERANCE:
            out.append(f"{name}: {got:.2f}% vs {value}%")
    for name, value in expected["patterns"].items():
        got = report["pattern_census"]["percent"].get(name, 0.0)
        if abs(got - value) > PATTERN_TOLERANCE:
            out.append(f"#{name}: {got:.2f}% vs {value}%")
    return out
