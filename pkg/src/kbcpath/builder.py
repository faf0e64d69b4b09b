"""Candidate path construction from model predictions.

For a pair ``(e1, e2)`` the type-appropriate relations are selected from the
query types, each endpoint is queried for its top-n predictions under those
relations, and the predicted entities are joined to the endpoint that
produced them.  Entities linked to both endpoints yield 1-hop paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import ValidationError
from .graph import KnowledgeGraph
from .mining import Path

SOURCE = "source"
TARGET = "target"


class CandidateEdge(NamedTuple):
    a: int  # the pair endpoint that was queried
    b: int  # the predicted entity
    relation: int
    pred_rank: int
    pred_score: float
    origin: str


@dataclass
class CandidateGraph:
    source: int
    target: int
    edges: list = field(default_factory=list)

    def __post_init__(self):
        self._index = {frozenset((e.a, e.b)): e for e in self.edges}

    def edge(self, a, b):
        return self._index.get(frozenset((a, b)))

    def neighbors(self, v):
        return sorted(e.b if e.a == v else e.a for e in self.edges if v in (e.a, e.b))

    @property
    def vertices(self):
        vs = {self.source, self.target}
        for e in self.edges:
            vs.update((e.a, e.b))
        return sorted(vs)


def relations_for_query(pair_types, query_types, g: KnowledgeGraph):
    """Relations to query per endpoint, as ``(relation_id, SOURCE|TARGET)`` pairs.

    A query type ``S-M-T`` contributes the ``S``-``M`` relations on the side
    whose type is ``S`` and the ``M``-``T`` relations on the other side.
    """
    ts, tt = pair_types
    out = []
    for qt in query_types:
        s, mid, t = qt
        if (s, t) == (ts, tt):
            links = ((s, SOURCE), (t, TARGET))
        elif (t, s) == (ts, tt):
            links = ((t, SOURCE), (s, TARGET))
        else:
            raise ValidationError(
                f"query type {'-'.join(g.type_names[x] for x in qt)} does not fit pair types "
                f"{g.type_names[ts]}:{g.type_names[tt]}")
        for end_type, side in links:
            rels = g.relations_between(end_type, mid)
            if not rels:
                raise ValidationError(
                    f"no relation {g.type_names[end_type]}_{g.type_names[mid]} in vocabulary")
            for r in rels:
                if (r, side) not in out:
                    out.append((r, side))
    return sorted(out, key=lambda rs: (rs[1] != SOURCE, rs[0]))


def build_candidate_graph(model, g: KnowledgeGraph, e1, e2, query_types, n_pred,
                          relations=None) -> CandidateGraph:
    """Query the model from both endpoints and keep the best-ranked edge per entity pair.

    ``relations`` may be passed pre-computed from :func:`relations_for_query`.
    """
    if n_pred < 1:
        raise ValidationError("n_pred must be >= 1")
    e1, e2 = g.check_entity(e1), g.check_entity(e2)
    if relations is None:
        relations = relations_for_query((g.entity_type(e1), g.entity_type(e2)), query_types, g)
    best = {}
    for r, side in relations:
        anchor, other = (e1, e2) if side == SOURCE else (e2, e1)
        want = g.other_endpoint_type(r, g.entity_type(anchor))
        for pred in model.predict_tails(anchor, r, n_pred):
            x = pred.entity
            if x == other or g.entity_types[x] != want:
                continue
            key = (anchor, x)
            cur = best.get(key)
            if cur is None or (pred.rank, r) < (cur.pred_rank, cur.relation):
                best[key] = CandidateEdge(anchor, x, r, pred.rank, pred.score, side)
    edges = sorted(best.values(), key=lambda e: (e.origin != SOURCE, e.b))
    return CandidateGraph(e1, e2, edges)


def enumerate_one_hop_paths(cg: CandidateGraph):
    """All ``source - x - target`` paths through entities adjacent to both endpoints."""
    src = {e.b: e for e in cg.edges if e.a == cg.source}
    tgt = {e.b: e for e in cg.edges if e.a == cg.target}
    return [Path(cg.source, src[x].relation, x, tgt[x].relation, cg.target)
            for x in sorted(src.keys() & tgt.keys())]


def extend_paths(cg: CandidateGraph, model, g: KnowledgeGraph, n_pred, depth=1):
    """Paths of up to ``depth`` intermediate entities (at most 2).

    Depth 2 queries the model from each source-side entity for entities already
    attached to the target, returning ``(source, r1, x, r2, y, r3, target)``
    tuples.  This is an extension point and is not used by the experiments.
    """
    if depth < 1 or depth > 2:
        raise ValidationError("depth must be 1 or 2")
    if depth == 1:
        return enumerate_one_hop_paths(cg)
    src = {e.b: e for e in cg.edges if e.a == cg.source}
    tgt = {e.b: e for e in cg.edges if e.a == cg.target}
    out = []
    for x in sorted(src):
        tx = g.entity_type(x)
        found = {}
        for y_type in sorted({g.entity_type(y) for y in tgt if y != x}):
            for r in g.relations_between(tx, y_type):
                for pred in model.predict_tails(x, r, n_pred):
                    y = pred.entity
                    if y in tgt and y != x and g.entity_types[y] == y_type:
                        cur = found.get(y)
                        if cur is None or (pred.rank, r) < cur:
                            found[y] = (pred.rank, r)
        for y in sorted(found):
            out.append((cg.source, src[x].relation, x, found[y][1], y, tgt[y].relation, cg.target))
    return out
