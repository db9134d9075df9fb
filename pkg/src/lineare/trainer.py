"""Mini-batch training with self-adversarial negatives and a sparse Adam."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .kgdata import KnowledgeGraph
from .model import (
    LINEARE,
    MODES,
    PARAM_KINDS,
    TRANSE,
    EmbeddingStore,
    GradientSlice,
    ModelConfig,
    NumericalError,
    batch_objective,
    init_embeddings,
)

log = logging.getLogger(__name__)

HEAD = "head"
TAIL = "tail"

# hyperparameter search ranges used for the published grid
GRID = {
    "alpha": (0.5, 1.0),
    "gamma": (6, 9, 12, 15, 18, 24, 30),
    "beta": (0.75, 1.0, 1.25),
    "dim": (250, 500, 1000),
    "batch_size": (512, 1024, 2048),
    "num_negatives": (128, 256, 512, 1024),
}


@dataclass
class TrainConfig:
    alpha: float = 0.5
    beta: float = 1.0
    gamma: float = 12.0
    lam: float = 0.0
    dim: int = 200
    batch_size: int = 1024
    num_negatives: int = 128
    learning_rate: float = 1e-4
    max_steps: int = 1000
    valid_every: int = 0
    seed: int = 0
    mode: str = LINEARE
    lr_decay: float = 0.1
    lr_decay_at: float = 0.5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    filter_negatives: bool = False
    literal_weights: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.num_negatives < 1:
            raise ValueError("num_negatives must be >= 1")
        for name in ("beta", "dim", "batch_size", "learning_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("alpha", "lam", "max_steps", "valid_every"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def grid_warnings(self) -> list[str]:
        out = []
        for name, allowed in GRID.items():
            value = getattr(self, name)
            if value not in allowed:
                out.append(f"{name}={value} is outside the search grid {allowed}")
        return out

    def lr_at(self, step: int) -> float:
        if self.max_steps and step >= self.lr_decay_at * self.max_steps:
            return self.learning_rate * self.lr_decay
        return self.learning_rate

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_ALIASES = {"lambda": "lam", "lr": "learning_rate", "k": "dim", "b": "batch_size", "n": "num_negatives"}


def _coerce(name: str, value):
    types = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    kind = types[name]
    if isinstance(value, str):
        value = value.strip()
        if kind in ("bool", bool):
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"{name}: not a boolean: {value!r}")
        if kind in ("int", int):
            return int(float(value)) if "e" in value.lower() else int(value)
        if kind in ("float", float):
            return float(value)
    return value


def config_from_mapping(values: dict, base: TrainConfig | None = None) -> TrainConfig:
    base = base or TrainConfig()
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    updates = {}
    for key, value in values.items():
        name = _ALIASES.get(key, key)
        if name not in known:
            raise ValueError(f"unknown config key {key!r}")
        updates[name] = _coerce(name, value)
    return dataclasses.replace(base, **updates)


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path, overrides: dict | None = None, base: TrainConfig | None = None) -> TrainConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8")) if path else {}
    values.update(overrides or {})
    return config_from_mapping(values, base)


def dump_config(cfg: TrainConfig) -> str:
    return "".join(f"{k}={v}\n" for k, v in cfg.to_dict().items())


def sample_negatives(positive, n: int, side: str, rng: np.random.Generator, num_entities: int) -> list[tuple]:
    """Corrupt one side of ``positive`` with entities drawn uniformly from E minus the original."""
    h, r, t = (int(x) for x in positive)
    ents = corrupt_entities(np.array([h if side == HEAD else t]), n, rng, num_entities)[0]
    if side == HEAD:
        return [(int(e), r, t) for e in ents]
    if side == TAIL:
        return [(h, r, int(e)) for e in ents]
    raise ValueError(f"side must be {HEAD!r} or {TAIL!r}")


def corrupt_entities(original: np.ndarray, n: int, rng: np.random.Generator, num_entities: int) -> np.ndarray:
    """(B, n) replacement ids, uniform over all entities except each row's original."""
    if num_entities < 2:
        raise ValueError("cannot corrupt a triple with fewer than two entities")
    if n < 1:
        raise ValueError("n must be >= 1")
    draws = rng.integers(0, num_entities - 1, size=(len(original), n))
    return draws + (draws >= original[:, None])


def adversarial_weights(neg_scores, alpha: float, literal: bool = False) -> np.ndarray:
    """Softmax of ``-alpha * score`` over the last axis: close negatives weigh more.

    ``literal=True`` uses ``+alpha * score`` instead, which up-weights easy
    (distant) negatives; kept only for comparison runs.
    """
    f = np.asarray(neg_scores, dtype=np.float64)
    if f.size == 0:
        raise ValueError("need at least one negative score")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if not np.isfinite(f).all():
        raise NumericalError("non-finite negative score")
    logits = (alpha if literal else -alpha) * f
    logits = logits - logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    return w / w.sum(axis=-1, keepdims=True)


def batch_loss(positives, negatives, store: EmbeddingStore, cfg: TrainConfig, weights=None):
    """Mean loss and sparse gradient over a batch.

    ``negatives`` is (B, n, 3). If ``weights`` is None they are computed
    from the current scores with :func:`adversarial_weights`.
    """
    if weights is None:
        weights = lambda f: adversarial_weights(f, cfg.alpha, cfg.literal_weights)  # noqa: E731
    loss, grads, _, _ = batch_objective(store, positives, negatives, weights, cfg.gamma, cfg.beta, cfg.lam)
    return loss, grads


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, store: EmbeddingStore, beta1=0.9, beta2=0.999, epsilon=1e-8) -> "AdamState":
        m = {k: np.zeros_like(store.param(k)) for k in PARAM_KINDS}
        v = {k: np.zeros_like(store.param(k)) for k in PARAM_KINDS}
        return cls(m, v, 0, beta1, beta2, epsilon)


def adam_step(store: EmbeddingStore, grads: GradientSlice, state: AdamState, lr: float) -> None:
    """In-place sparse Adam: only rows present in ``grads`` move or update moments."""
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    frozen = ("rel_w1", "rel_w2") if store.mode == TRANSE else ()
    updates = {}
    for kind, (ids, g) in grads.rows.items():
        if kind in frozen or len(ids) == 0:
            continue
        if not np.isfinite(g).all():
            row = int(ids[np.argmax(~np.isfinite(g).all(axis=1))])
            raise NumericalError(f"non-finite gradient in {kind} row {row}", kind, row)
        m = state.beta1 * state.m[kind][ids] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[kind][ids] + (1.0 - state.beta2) * (g * g)
        new = store.param(kind)[ids] - lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
        bad = ~np.isfinite(new).all(axis=1)
        if bad.any():
            row = int(ids[np.argmax(bad)])
            raise NumericalError(f"non-finite update in {kind} row {row}", kind, row)
        updates[kind] = (ids, m, v, new)
    for kind, (ids, m, v, new) in updates.items():
        state.m[kind][ids] = m
        state.v[kind][ids] = v
        store.param(kind)[ids] = new


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, store: EmbeddingStore, log_records: list[dict], step: int):
        super().__init__(message)
        self.store = store
        self.log = log_records
        self.step = step


@dataclass
class TrainResult:
    store: EmbeddingStore
    log: list[dict] = field(default_factory=list)
    best_step: int = 0
    best_valid_mrr: float | None = None


class _BatchSampler:
    def __init__(self, train: np.ndarray, batch_size: int, rng: np.random.Generator):
        self.train = train
        self.size = min(batch_size, len(train))
        self.rng = rng
        self.order = np.zeros(0, dtype=np.int64)
        self.pos = 0

    def next(self) -> np.ndarray:
        parts = []
        need = self.size
        while need:
            if self.pos >= len(self.order):
                self.order = self.rng.permutation(len(self.train))
                self.pos = 0
            take = self.order[self.pos : self.pos + need]
            self.pos += len(take)
            need -= len(take)
            parts.append(take)
        return self.train[np.concatenate(parts)]


def _make_negatives(pos: np.ndarray, head_count: int, cfg: TrainConfig, rng, num_entities: int, known=None) -> np.ndarray:
    """(B, n, 3) negatives; the first ``head_count`` rows corrupt heads, the rest tails."""
    n = cfg.num_negatives
    rows = np.arange(len(pos))[:, None]
    slots = np.arange(n)[None, :]
    cols = np.where(np.arange(len(pos)) < head_count, 0, 2)[:, None]
    original = pos[rows[:, 0], cols[:, 0]]
    neg = np.repeat(pos[:, None, :], n, axis=1)
    neg[rows, slots, cols] = corrupt_entities(original, n, rng, num_entities)
    if known is not None:
        for _ in range(10):
            clash = np.array([[tuple(x) in known for x in row] for row in neg.tolist()])
            if not clash.any():
                break
            redraw = corrupt_entities(original, n, rng, num_entities)
            neg[rows, slots, cols] = np.where(clash, redraw, neg[rows, slots, cols])
    return neg


def train(
    kg: KnowledgeGraph,
    cfg: TrainConfig,
    store: EmbeddingStore | None = None,
    on_record: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Train on ``kg.train``; returns the store with the best validation MRR.

    Without validation (``valid_every == 0`` or an empty valid split) the
    final store is returned.
    """
    from .evaluator import evaluate

    for msg in cfg.grid_warnings():
        log.debug(msg)
    if store is None:
        store = init_embeddings(kg.num_entities, kg.num_relations, ModelConfig(cfg.dim, cfg.mode, cfg.seed))
    else:
        store = store.copy()
    if store.dim != cfg.dim or store.mode != cfg.mode:
        raise ValueError("store does not match config")
    rng = np.random.default_rng(cfg.seed)
    state = AdamState.zeros_like(store, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    sampler = _BatchSampler(kg.train, cfg.batch_size, rng)
    known = set(map(tuple, kg.train.tolist())) if cfg.filter_negatives else None
    records: list[dict] = []
    validate = cfg.valid_every > 0 and len(kg.valid) > 0
    best = store.copy()
    best_step, best_mrr = 0, None

    def emit(rec):
        records.append(rec)
        if on_record:
            on_record(rec)

    def run_valid(step):
        nonlocal best, best_step, best_mrr
        mrr = evaluate(store, kg, "valid", workers=cfg.workers).mrr
        if best_mrr is None or mrr > best_mrr:
            best, best_step, best_mrr = store.copy(), step, mrr
        return mrr

    if validate and cfg.max_steps == 0:
        run_valid(0)
    last_good = store.copy()
    for step in range(1, cfg.max_steps + 1):
        pos = sampler.next()
        if len(pos) == 1:
            head_count = step % 2
        else:
            head_count = len(pos) // 2
        neg = _make_negatives(pos, head_count, cfg, rng, kg.num_entities, known)
        try:
            loss, grads = batch_loss(pos, neg, store, cfg)
            adam_step(store, grads, state, cfg.lr_at(step - 1))
        except NumericalError as exc:
            raise TrainingDiverged(f"step {step}: {exc}", best if best_mrr is not None else last_good, records, step) from exc
        rec = {"step": step, "loss": loss}
        if validate and (step % cfg.valid_every == 0 or step == cfg.max_steps):
            rec["valid_mrr"] = run_valid(step)
        emit(rec)
        if not validate and step % 100 == 0:
            last_good = store.copy()
    if not validate:
        return TrainResult(store, records, cfg.max_steps, None)
    return TrainResult(best, records, best_step, best_mrr)
