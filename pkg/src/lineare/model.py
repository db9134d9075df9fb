"""LineaRE embeddings, scoring, analytic loss gradients and checkpoints.

A relation ``r`` holds two weight vectors and a bias; a triple scores

    f_r(h, t) = || w1_r * h + b_r - w2_r * t ||_1

(lower is more plausible). TransE is the special case ``w1 = w2 = 1``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .kgdata import DataError, Vocab

LINEARE = "LineaRE"
TRANSE = "TransE"
MODES = (LINEARE, TRANSE)
PARAM_KINDS = ("entity", "rel_w1", "rel_w2", "rel_b")

MAGIC = b"LINEARE1"
_HEADER = struct.Struct("<8sQQQ8s")


class NumericalError(FloatingPointError):
    """A non-finite value appeared in a loss, gradient or parameter row."""

    def __init__(self, message: str, kind: str | None = None, row: int | None = None):
        super().__init__(message)
        self.kind = kind
        self.row = row


class CheckpointError(DataError):
    """Unreadable or inconsistent checkpoint file."""


@dataclass
class ModelConfig:
    dim: int
    mode: str = LINEARE
    init_seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass
class EmbeddingStore:
    entity: np.ndarray
    rel_w1: np.ndarray
    rel_w2: np.ndarray
    rel_b: np.ndarray
    mode: str = LINEARE

    def __post_init__(self):
        k = self.entity.shape[1]
        for kind in PARAM_KINDS:
            arr = np.ascontiguousarray(getattr(self, kind), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != k:
                raise ValueError(f"{kind} must be a 2-d array with {k} columns")
            setattr(self, kind, arr)
        if not (len(self.rel_w1) == len(self.rel_w2) == len(self.rel_b)):
            raise ValueError("relation matrices disagree on |R|")

    @property
    def dim(self) -> int:
        return self.entity.shape[1]

    @property
    def num_entities(self) -> int:
        return self.entity.shape[0]

    @property
    def num_relations(self) -> int:
        return self.rel_b.shape[0]

    def param(self, kind: str) -> np.ndarray:
        return getattr(self, kind)

    def copy(self) -> "EmbeddingStore":
        return EmbeddingStore(*(getattr(self, k).copy() for k in PARAM_KINDS), mode=self.mode)

    def equals(self, other: "EmbeddingStore") -> bool:
        return self.mode == other.mode and all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in PARAM_KINDS
        )


def init_embeddings(num_entities: int, num_relations: int, config: ModelConfig) -> EmbeddingStore:
    if num_entities < 1 or num_relations < 1:
        raise ValueError("need at least one entity and one relation")
    k = config.dim
    bound = 6.0 / np.sqrt(k)
    rng = np.random.default_rng(config.init_seed)
    entity = rng.uniform(-bound, bound, size=(num_entities, k))
    noise1 = rng.uniform(-0.01, 0.01, size=(num_relations, k))
    noise2 = rng.uniform(-0.01, 0.01, size=(num_relations, k))
    bias = rng.uniform(-bound, bound, size=(num_relations, k))
    if config.mode == TRANSE:
        w1 = np.ones((num_relations, k))
        w2 = np.ones((num_relations, k))
    else:
        w1 = 1.0 + noise1
        w2 = 1.0 + noise2
    return EmbeddingStore(entity, w1, w2, bias, mode=config.mode)


def score(store: EmbeddingStore, h: int, r: int, t: int) -> float:
    return float(np.abs(store.rel_w1[r] * store.entity[h] + store.rel_b[r] - store.rel_w2[r] * store.entity[t]).sum())


def residuals(store: EmbeddingStore, heads, rels, tails) -> np.ndarray:
    """Per-dimension ``w1*h + b - w2*t`` for broadcastable id arrays."""
    e = store.entity
    return store.rel_w1[rels] * e[heads] + store.rel_b[rels] - store.rel_w2[rels] * e[tails]


def score_triples(store: EmbeddingStore, triples) -> np.ndarray:
    triples = np.asarray(triples, dtype=np.int64)
    return np.abs(residuals(store, triples[..., 0], triples[..., 1], triples[..., 2])).sum(-1)


def score_all_tails(store: EmbeddingStore, h: int, r: int) -> np.ndarray:
    return np.abs(store.rel_w1[r] * store.entity[h] + store.rel_b[r] - store.rel_w2[r] * store.entity).sum(-1)


def score_all_heads(store: EmbeddingStore, r: int, t: int) -> np.ndarray:
    return np.abs(store.rel_w1[r] * store.entity + store.rel_b[r] - store.rel_w2[r] * store.entity[t]).sum(-1)


def softplus(x, beta: float):
    return np.logaddexp(0.0, beta * np.asarray(x, dtype=np.float64)) / beta


@dataclass
class GradientSlice:
    """Sparse gradient: per parameter kind, unique row ids and their partials."""

    rows: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def get(self, kind: str) -> tuple[np.ndarray, np.ndarray]:
        return self.rows.get(kind, (np.zeros(0, dtype=np.int64), np.zeros((0, 0))))

    def dense(self, kind: str, shape) -> np.ndarray:
        out = np.zeros(shape)
        ids, vals = self.get(kind)
        if len(ids):
            out[ids] = vals
        return out

    def check_finite(self) -> None:
        for kind, (ids, vals) in self.rows.items():
            bad = ~np.isfinite(vals).all(axis=1)
            if bad.any():
                row = int(ids[np.argmax(bad)])
                raise NumericalError(f"non-finite gradient in {kind} row {row}", kind, row)


def _scatter(ids: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ids = ids.reshape(-1)
    values = values.reshape(len(ids), -1)
    # stable sort then segment sums; much faster than np.add.at
    order = np.argsort(ids, kind="stable")
    ids = ids[order]
    starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
    return ids[starts], np.add.reduceat(values[order], starts, axis=0)


def batch_objective(store: EmbeddingStore, positives, negatives, weights, gamma: float, beta: float, lam: float):
    """Mean softplus margin loss over a batch plus entity regularization.

    ``positives`` is (B, 3); ``negatives`` is (B, n, 3) with the same relation
    as its positive; ``weights`` is (B, n), or a callable mapping the (B, n)
    negative scores to weights. Either way it is treated as a constant.
    The regularizer ``lam / |U| * sum_{e in U} ||e||^2`` runs over the set U
    of entity rows touched by the batch, an unbiased stand-in for the
    full ``lam / |E| * sum_e ||e||^2``.
    """
    pos = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    neg = np.asarray(negatives, dtype=np.int64).reshape(len(pos), -1, 3)
    batch = len(pos)
    e = store.entity

    res_p = residuals(store, pos[:, 0], pos[:, 1], pos[:, 2])
    f_p = np.abs(res_p).sum(-1)
    res_n = residuals(store, neg[..., 0], neg[..., 1], neg[..., 2])
    f_n = np.abs(res_n).sum(-1)
    w = weights(f_n) if callable(weights) else np.asarray(weights, dtype=np.float64).reshape(neg.shape[:2])

    data = softplus(f_p - gamma, beta) + (w * softplus(gamma - f_n, beta)).sum(-1)
    loss = data.mean()

    touched = np.unique(np.concatenate([pos[:, [0, 2]].ravel(), neg[..., [0, 2]].ravel()]))
    reg = 0.0
    if lam:
        reg = lam / len(touched) * float((e[touched] ** 2).sum())
    loss = float(loss + reg)
    if not np.isfinite(loss):
        raise NumericalError("non-finite loss")

    # dL/df for each scored triple; sign(0) = 0 from np.sign
    c_p = expit(beta * (f_p - gamma)) / batch
    c_n = -w * expit(beta * (gamma - f_n)) / batch
    s_p = np.sign(res_p) * c_p[:, None]
    s_n = np.sign(res_n) * c_n[..., None]

    all_h = np.concatenate([pos[:, 0], neg[..., 0].ravel()])
    all_r = np.concatenate([pos[:, 1], neg[..., 1].ravel()])
    all_t = np.concatenate([pos[:, 2], neg[..., 2].ravel()])
    sgn = np.concatenate([s_p, s_n.reshape(-1, store.dim)])

    w1 = store.rel_w1[all_r]
    w2 = store.rel_w2[all_r]
    ent_ids = np.concatenate([all_h, all_t])
    ent_vals = np.concatenate([w1 * sgn, -w2 * sgn])
    if lam:
        ent_ids = np.concatenate([ent_ids, touched])
        ent_vals = np.concatenate([ent_vals, (2.0 * lam / len(touched)) * e[touched]])

    grads = GradientSlice(
        {
            "entity": _scatter(ent_ids, ent_vals),
            "rel_w1": _scatter(all_r, e[all_h] * sgn),
            "rel_w2": _scatter(all_r, -e[all_t] * sgn),
            "rel_b": _scatter(all_r, sgn),
        }
    )
    grads.check_finite()
    return loss, grads, f_p, f_n


def loss_gradients(store: EmbeddingStore, positive, negatives, weights, cfg):
    """Loss and sparse gradient for one positive triple and its negatives.

    ``cfg`` needs ``gamma``, ``beta`` and ``lam`` attributes.
    """
    negatives = np.asarray(negatives, dtype=np.int64).reshape(-1, 3)
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if len(negatives) != len(weights):
        raise ValueError("need one weight per negative")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")
    loss, grads, _, _ = batch_objective(
        store, [positive], negatives[None], weights[None], cfg.gamma, cfg.beta, cfg.lam
    )
    return loss, grads


def save_checkpoint(path, store: EmbeddingStore, vocab: Vocab) -> None:
    """Binary header + four float64 matrices, with a JSON vocab sidecar."""
    path = Path(path)
    if vocab.num_entities != store.num_entities or vocab.num_relations != store.num_relations:
        raise ValueError("vocab does not match store")
    header = _HEADER.pack(MAGIC, store.dim, store.num_entities, store.num_relations, store.mode.encode().ljust(8, b"\0"))
    with open(path, "wb") as fh:
        fh.write(header)
        for kind in PARAM_KINDS:
            fh.write(np.ascontiguousarray(store.param(kind), dtype="<f8").tobytes())
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(vocab.to_json(), fh, ensure_ascii=False)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".vocab.json")


def load_checkpoint(path) -> tuple[EmbeddingStore, Vocab]:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated checkpoint")
    magic, k, n_ent, n_rel, mode = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    mode = mode.rstrip(b"\0").decode()
    if mode not in MODES:
        raise CheckpointError(f"{path}: unknown mode {mode!r}")
    shapes = [(n_ent, k), (n_rel, k), (n_rel, k), (n_rel, k)]
    expected = _HEADER.size + 8 * sum(a * b for a, b in shapes)
    if len(raw) != expected:
        raise CheckpointError(f"{path}: expected {expected} bytes, found {len(raw)}")
    with open(sidecar_path(path), encoding="utf-8") as fh:
        vocab = Vocab.from_json(json.load(fh))
    if vocab.num_entities != n_ent or vocab.num_relations != n_rel:
        raise CheckpointError(f"{path}: sidecar has {vocab.num_entities}/{vocab.num_relations} names, header {n_ent}/{n_rel}")
    mats = []
    offset = _HEADER.size
    for rows, cols in shapes:
        count = rows * cols
        mats.append(np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(rows, cols).astype(np.float64))
        offset += 8 * count
    return EmbeddingStore(*mats, mode=mode), vocab
