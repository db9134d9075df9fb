"""Per-dimension line geometry of trained relations.

Dimension ``i`` of relation ``r`` is the line ``w1*h + b = w2*t`` in the
(h, t) plane. Angles are measured from the h axis, in degrees on [0, 180).
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .model import EmbeddingStore

log = logging.getLogger(__name__)

DEFAULT_BIN_WIDTH = 2.0
DEFAULT_STEEP_TOLERANCE = 20.0


class LineParams(NamedTuple):
    w1: float
    w2: float
    b: float


def line_angle(p: LineParams) -> float:
    """Angle of the direction vector ``(w2, w1)``; raises on a degenerate line."""
    w1, w2 = float(p[0]), float(p[1])
    if w1 == 0.0 and w2 == 0.0:
        raise ValueError("degenerate line: w1 = w2 = 0")
    return float(line_angles(w1, w2))


def line_angles(w1, w2) -> np.ndarray:
    """Vectorised :func:`line_angle`; degenerate dimensions come back as NaN."""
    w1 = np.asarray(w1, dtype=np.float64)
    w2 = np.asarray(w2, dtype=np.float64)
    ang = np.degrees(np.arctan2(w1, w2)) % 180.0
    ang = np.where(ang >= 180.0, 0.0, ang)
    return np.where((w1 == 0) & (w2 == 0), np.nan, ang)


def reflect_angle(angle):
    """Angle of the mirror image across the line h = t."""
    return (90.0 - np.asarray(angle, dtype=np.float64)) % 180.0


def angle_difference(a, b):
    """Angle between two lines, as ``(a - b) mod 180``."""
    d = (np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) % 180.0
    return np.where(d >= 180.0, 0.0, d)


def circular_distance(angles, target: float):
    """Distance to ``target`` on the 180-degree circle of line directions."""
    d = np.abs(np.asarray(angles, dtype=np.float64) - target) % 180.0
    return np.minimum(d, 180.0 - d)


@dataclass
class AngleHistogram:
    relation: str
    kind: str
    angles: np.ndarray
    bin_width: float = DEFAULT_BIN_WIDTH
    degenerate: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=np.float64)
        nbins = int(round(180.0 / self.bin_width))
        self.edges = np.linspace(0.0, 180.0, nbins + 1)
        self.counts, _ = np.histogram(self.angles, bins=self.edges)

    def mass_near(self, targets: Sequence[float], tol: float) -> float:
        """Fraction of angles within ``tol`` degrees of any target (mod 180)."""
        if len(self.angles) == 0:
            return 0.0
        near = np.zeros(len(self.angles), dtype=bool)
        for t in targets:
            near |= circular_distance(self.angles, t) <= tol
        return float(near.mean())

    def max_bin_fraction(self) -> float:
        return float(self.counts.max() / max(len(self.angles), 1))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_start", "bin_end", "count"])
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            w.writerow([f"{lo:g}", f"{hi:g}", int(c)])
        return buf.getvalue()


def _relation_lines(store: EmbeddingStore, r: int):
    return store.rel_w1[r], store.rel_w2[r], store.rel_b[r]


def _histogram(name, kind, angles, bin_width, **extra) -> AngleHistogram:
    bad = np.isnan(angles)
    return AngleHistogram(name, kind, angles[~bad], bin_width, int(bad.sum()), extra)


def symmetry_diagnostic(store: EmbeddingStore, r: int, name: str = "", bin_width: float = DEFAULT_BIN_WIDTH) -> AngleHistogram:
    w1, w2, _ = _relation_lines(store, r)
    return _histogram(name or str(r), "symmetry", line_angles(w1, w2), bin_width)


def inversion_diagnostic(store: EmbeddingStore, r1: int, r2: int, name: str = "", bin_width: float = DEFAULT_BIN_WIDTH) -> AngleHistogram:
    """Angle between each line of ``r1`` and the h = t mirror of ``r2``'s line."""
    a1 = line_angles(store.rel_w1[r1], store.rel_w2[r1])
    a2 = reflect_angle(line_angles(store.rel_w1[r2], store.rel_w2[r2]))
    return _histogram(name or f"{r1}~{r2}^-1", "inversion", angle_difference(a1, a2), bin_width)


def compose(store: EmbeddingStore, r2: int, r3: int):
    """Line parameters of ``r2`` followed by ``r3`` (h -> e -> t)."""
    w1 = store.rel_w1[r2] * store.rel_w1[r3]
    w2 = store.rel_w2[r2] * store.rel_w2[r3]
    b = store.rel_b[r2] * store.rel_w1[r3] + store.rel_b[r3] * store.rel_w2[r2]
    return w1, w2, b


def composition_diagnostic(
    store: EmbeddingStore, r1: int, r2: int, r3: int, name: str = "", bin_width: float = DEFAULT_BIN_WIDTH
) -> AngleHistogram:
    w1, w2, _ = compose(store, r2, r3)
    composite = line_angles(w1, w2)
    target = line_angles(store.rel_w1[r1], store.rel_w2[r1])
    return _histogram(name or f"{r2}*{r3}~{r1}", "composition", angle_difference(composite, target), bin_width)


def mapping_diagnostic(
    store: EmbeddingStore,
    r: int,
    name: str = "",
    steep_tolerance: float = DEFAULT_STEEP_TOLERANCE,
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> AngleHistogram:
    """Line-angle histogram plus counts of steep (near 90 degrees) and gentle dimensions."""
    w1, w2, _ = _relation_lines(store, r)
    hist = _histogram(name or str(r), "mapping", line_angles(w1, w2), bin_width)
    steep = int((np.abs(hist.angles - 90.0) <= steep_tolerance).sum())
    hist.extra.update(steep=steep, gentle=len(hist.angles) - steep, steep_tolerance=steep_tolerance)
    return hist


def scatter_export(store: EmbeddingStore, r: int, dims: Sequence[int], pairs, entity_names=None) -> str:
    """CSV of the selected dimensions' lines and the (h, t) coordinates of ``pairs``.

    Pairs are (head_id, tail_id); unknown ids are skipped with a warning.
    """
    k = store.dim
    for d in dims:
        if not 0 <= d < k:
            raise ValueError(f"dimension {d} outside 0..{k - 1}")
    valid = []
    for h, t in pairs:
        if 0 <= h < store.num_entities and 0 <= t < store.num_entities:
            valid.append((h, t))
        else:
            log.warning("skipping unknown entity pair (%s, %s)", h, t)
    names = entity_names or [str(i) for i in range(store.num_entities)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dim", "w1", "w2", "b", "entity_pair", "h_coord", "t_coord"])
    for d in dims:
        w1, w2, b = (repr(float(x)) for x in (store.rel_w1[r, d], store.rel_w2[r, d], store.rel_b[r, d]))
        for h, t in valid:
            w.writerow([d, w1, w2, b, f"{names[h]}|{names[t]}", repr(float(store.entity[h, d])), repr(float(store.entity[t, d]))])
    return buf.getvalue()
