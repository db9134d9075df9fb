"""Small knowledge graphs with one planted relation pattern each.

Every generator holds out triples that can be inferred from the pattern
(e.g. the reverse of a symmetric fact) and splits them between valid and
test. Relation roles are returned alongside the graph so tests and scripts
can look up which relation plays which part.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kgdata import KnowledgeGraph


@dataclass
class PatternKG:
    kg: KnowledgeGraph
    roles: dict[str, str]

    def rel(self, role: str) -> int:
        return self.kg.vocab.relation_ids[self.roles[role]]


def _split_held(held: list, rng: np.random.Generator):
    held = [held[i] for i in rng.permutation(len(held))]
    half = len(held) // 2
    return held[:half], held[half:]


def symmetry_kg(num_entities: int = 50, held_out: int = 10, seed: int = 0) -> PatternKG:
    """A symmetric pairing relation; held-out facts are reverses of train facts."""
    rng = np.random.default_rng(seed)
    ents = [f"e{i}" for i in range(num_entities)]
    order = rng.permutation(num_entities)
    pairs = [(ents[order[i]], ents[order[i + 1]]) for i in range(0, num_entities - 1, 2)]
    rel = "similar_to"
    train, held = [], []
    for i, (a, b) in enumerate(pairs):
        if i < held_out:
            train.append((a, rel, b))
            held.append((b, rel, a))
        else:
            train += [(a, rel, b), (b, rel, a)]
    valid, test = _split_held(held, rng)
    kg = KnowledgeGraph.from_named(train, valid, test, name="synthetic-symmetry")
    return PatternKG(kg, {"symmetric": rel})


def antisymmetry_kg(num_pairs: int = 25, held_out: int = 10, seed: int = 0) -> PatternKG:
    """Disjoint owner/item pairs: ``owns`` (never reversible) and its inverse ``owned_by``.

    Held-out ``owns`` facts are inferable through ``owned_by``, which is
    always in train.
    """
    rng = np.random.default_rng(seed)
    held_idx = set(rng.choice(num_pairs, size=held_out, replace=False).tolist())
    train, held = [], []
    for i in range(num_pairs):
        owner, item = f"owner{i}", f"item{i}"
        train.append((item, "owned_by", owner))
        (held if i in held_idx else train).append((owner, "owns", item))
    valid, test = _split_held(held, rng)
    kg = KnowledgeGraph.from_named(train, valid, test, name="synthetic-antisymmetry")
    return PatternKG(kg, {"antisymmetric": "owns", "inverse": "owned_by"})


def inversion_kg(num_parents: int = 10, children: int = 4, held_out: int = 10, seed: int = 0) -> PatternKG:
    """A two-level taxonomy: ``hypernym(child, parent)`` and its inverse ``hyponym``.

    Held-out facts of either relation have their inverse in train.
    """
    rng = np.random.default_rng(seed)
    links = [(f"c{p}_{j}", f"p{p}") for p in range(num_parents) for j in range(children)]
    held_idx = rng.choice(len(links), size=held_out, replace=False).tolist()
    train, held = [], []
    for i, (c, p) in enumerate(links):
        hyper, hypo = (c, "hypernym", p), (p, "hyponym", c)
        if i in held_idx:
            # alternate which direction is hidden
            hidden, shown = (hyper, hypo) if held_idx.index(i) % 2 else (hypo, hyper)
            train.append(shown)
            held.append(hidden)
        else:
            train += [hyper, hypo]
    valid, test = _split_held(held, rng)
    kg = KnowledgeGraph.from_named(train, valid, test, name="synthetic-inversion")
    return PatternKG(kg, {"r1": "hypernym", "r2": "hyponym"})


def composition_kg(layer: int = 16, held_out: int = 8, seed: int = 0) -> PatternKG:
    """``born_in`` (A to B) then ``city_of`` (B to C) compose to ``nationality`` (A to C).

    Held-out ``nationality`` facts follow from the two-step path in train.
    """
    rng = np.random.default_rng(seed)
    a = [f"person{i}" for i in range(layer)]
    b = [f"city{i}" for i in range(layer)]
    c = [f"country{i}" for i in range(layer)]
    ab = rng.permutation(layer)
    bc = rng.permutation(layer)
    train, held = [], []
    held_idx = set(rng.choice(layer, size=held_out, replace=False).tolist())
    for i in range(layer):
        mid = ab[i]
        end = bc[mid]
        train.append((a[i], "born_in", b[mid]))
        train.append((b[mid], "city_of", c[end]))
        (held if i in held_idx else train).append((a[i], "nationality", c[end]))
    valid, test = _split_held(held, rng)
    kg = KnowledgeGraph.from_named(train, valid, test, name="synthetic-composition")
    return PatternKG(kg, {"r1": "nationality", "r2": "born_in", "r3": "city_of"})


def one_to_many_kg(size: int = 7, groupings: int = 6, held_out: int = 40, seed: int = 0) -> PatternKG:
    """Members of a ``size`` x ``size`` grid, each in one group of every grouping.

    Grouping ``g`` puts member (i, j) in group i, j, or ``(i + (g - 1) * j) mod size``;
    for prime ``size`` these are mutually orthogonal, so any two groups of
    different groupings share exactly one member. Each grouping has a 1-to-N
    relation ``<g>_has`` and its N-to-1 inverse ``in_<g>``. ``pair`` links
    row i to column i as a 1-to-1 control. Held-out 1-to-N facts have their
    inverse in train.
    """
    if not 2 <= groupings <= size + 1:
        raise ValueError("groupings must be between 2 and size + 1")
    rng = np.random.default_rng(seed)
    names = ["row", "col"] + [f"diag{g}" for g in range(1, groupings - 1)]
    facts = []
    for i in range(size):
        for j in range(size):
            m = f"m{i}_{j}"
            for g, name in enumerate(names):
                key = i if g == 0 else j if g == 1 else (i + (g - 1) * j) % size
                group = f"{name}{key}"
                facts.append(((group, f"{name}_has", m), (m, f"in_{name}", group)))
    held_idx = set(rng.choice(len(facts), size=held_out, replace=False).tolist())
    train, held = [], []
    for i, (one_to_n, inverse) in enumerate(facts):
        train.append(inverse)
        (held if i in held_idx else train).append(one_to_n)
    train += [(f"row{i}", "pair", f"col{i}") for i in range(size)]
    valid, test = _split_held(held, rng)
    kg = KnowledgeGraph.from_named(train, valid, test, name="synthetic-1-to-N")
    return PatternKG(kg, {"one_to_many": "row_has", "one_to_many_b": "col_has", "control": "pair"})


GENERATORS = {
    "symmetry": symmetry_kg,
    "antisymmetry": antisymmetry_kg,
    "inversion": inversion_kg,
    "composition": composition_kg,
    "one_to_many": one_to_many_kg,
}
