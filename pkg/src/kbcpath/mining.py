"""Co-occurrence path mining, frequency-ranked ground truth and leave-one-out splits.

Two triples seen in the same document that share exactly one entity are read
as a 1-hop path from one outer entity to the other through the shared one.
Counting those paths across documents gives a frequency per path, and
per-pair frequency rankings serve as ground truth for path ranking.
"""

from __future__ import annotations

import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ConsistencyError, ParseError, UnknownKeyError, ValidationError
from .graph import KnowledgeGraph, Triple, TripleRecord, _check_record, _open_text


class Path(NamedTuple):
    source: int
    rel1: int
    mid: int
    rel2: int
    target: int

    def reversed(self):
        return Path(self.target, self.rel2, self.mid, self.rel1, self.source)

    def edges(self):
        return ((self.source, self.rel1, self.mid), (self.mid, self.rel2, self.target))


class QueryType(NamedTuple):
    """Ordered triple of entity type ids, e.g. Gene-Phenotype-Disease."""

    first: int
    middle: int
    last: int

    def outer(self):
        return self.first, self.last


class DocTriple(NamedTuple):
    doc_id: str
    triple: Triple


def parse_query_type(text, g: KnowledgeGraph) -> QueryType:
    parts = text.strip().split("-")
    if len(parts) != 3 or not all(parts):
        raise ValidationError(f"query type {text!r} is not of the form TypeA-TypeB-TypeC")
    try:
        return QueryType(*(g.type_id(p) for p in parts))
    except UnknownKeyError as exc:
        raise ValidationError(f"query type {text!r}: {exc}") from None


def format_query_type(qt: QueryType, g: KnowledgeGraph):
    return "-".join(g.type_names[t] for t in qt)


def read_query_types(source, g: KnowledgeGraph):
    """Query types from a text file (one ``A-B-C`` per line) or a comma list."""
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, encoding="utf-8") as fh:
            items = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    elif isinstance(source, str):
        items = [s for s in source.split(",") if s.strip()]
    else:
        items = list(source)
    return [parse_query_type(s, g) for s in items]


def check_query_type(qt, g: KnowledgeGraph):
    if not all(isinstance(t, (int, np.integer)) and 0 <= t < len(g.type_names) for t in qt):
        raise ValidationError(f"query type {tuple(qt)!r} references an unknown entity type")


def path_types(p: Path, g: KnowledgeGraph):
    et = g.entity_types
    return int(et[p.source]), int(et[p.mid]), int(et[p.target])


def path_key(p: Path, g: KnowledgeGraph):
    """Canonical tie-break key: (rel1 name, mid surface, rel2 name)."""
    return g.relation_names[p.rel1], g.entity_surfaces[p.mid], g.relation_names[p.rel2]


def orient(p: Path, g: KnowledgeGraph) -> Path:
    """Put the outer entity that sorts first by (type name, surface) at the source."""
    et = g.entity_types
    if (et[p.target], p.target) < (et[p.source], p.source):
        return p.reversed()
    return p


# -- document triples ----------------------------------------------------------------


def read_doc_triples(source):
    """Parse a document-triple file into ``(KnowledgeGraph, list[DocTriple])``.

    Columns: ``doc_id, head, head_type, relation, tail, tail_type``.  The graph
    weight of a triple is the number of distinct documents it appears in.
    """
    rows = []
    fh = _open_text(source)
    try:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 6 or any(not f for f in fields):
                raise ParseError("expected 6 non-empty tab-separated fields", lineno)
            rec = TripleRecord(*fields[1:], 1)
            try:
                _check_record(rec)
            except ValidationError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from None
            rows.append((fields[0], rec))
    finally:
        if fh is not source:
            fh.close()
    return doc_triples_from_records(rows)


def doc_triples_from_records(rows):
    """Build the graph and id-based document triples from ``(doc_id, TripleRecord)`` rows."""
    per_doc = defaultdict(set)
    for doc_id, rec in rows:
        a, b = sorted(((rec.head, rec.head_type), (rec.tail, rec.tail_type)))
        per_doc[doc_id].add((a, rec.relation, b))
    records = [TripleRecord(a[0], a[1], rel, b[0], b[1], 1)
               for doc in per_doc.values() for a, rel, b in doc]
    g = KnowledgeGraph.from_records(records)
    docs = []
    for doc_id in sorted(per_doc):
        for a, rel, b in sorted(per_doc[doc_id]):
            docs.append(DocTriple(doc_id, Triple(g.entity_id(a[0]), g.relation_id(rel),
                                                 g.entity_id(b[0]), 1)))
    return g, docs


def mine_one_hop_paths(docs: Iterable[DocTriple], g: KnowledgeGraph) -> Counter:
    """Count 1-hop paths formed by same-document triples sharing exactly one entity.

    Returns a ``Counter`` mapping canonically oriented :class:`Path` to the
    number of (document, triple pair) occurrences.
    """
    by_doc = defaultdict(set)
    for d in docs:
        if not d.doc_id:
            raise ValidationError("empty document id")
        t = d.triple
        a, b = (t.head, t.tail) if t.head < t.tail else (t.tail, t.head)
        by_doc[d.doc_id].add((a, t.relation, b))

    counts = Counter()
    for triples in by_doc.values():
        incident = defaultdict(list)
        for a, r, b in triples:
            incident[a].append((b, r))
            incident[b].append((a, r))
        for mid, ends in incident.items():
            if len(ends) < 2:
                continue
            for i in range(len(ends)):
                x, rx = ends[i]
                for j in range(i + 1, len(ends)):
                    y, ry = ends[j]
                    if x == y:
                        continue
                    counts[orient(Path(x, rx, mid, ry, y), g)] += 1
    return counts


# -- ground truth --------------------------------------------------------------------


@dataclass(frozen=True)
class GroundTruthPair:
    source: int
    target: int
    query_types: tuple
    ranked_paths: tuple  # ((Path, frequency), ...), best first

    @property
    def top_path(self) -> Path:
        return self.ranked_paths[0][0]

    @property
    def paths(self):
        return [p for p, _ in self.ranked_paths]

    @property
    def frequencies(self):
        return [f for _, f in self.ranked_paths]


@dataclass(frozen=True)
class GroundTruthSet:
    pairs: tuple = field(default_factory=tuple)
    query_types: tuple = field(default_factory=tuple)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def total_paths(self):
        return sum(len(p.ranked_paths) for p in self.pairs)


def matching_query_types(source_type, target_type, query_types):
    return tuple(qt for qt in query_types
                 if qt.outer() in ((source_type, target_type), (target_type, source_type)))


def _types_match(types, qt):
    return types == tuple(qt) or types == tuple(reversed(qt))


def build_ground_truth(paths, g: KnowledgeGraph, query_types, min_freq=2, min_paths=2,
                       max_pairs=None) -> GroundTruthSet:
    """Filter mined paths by query type and frequency and rank them per entity pair.

    Pairs with fewer than ``min_paths`` surviving paths are dropped; of the
    rest, up to ``max_pairs`` with the most paths are kept (ties by pair ids).
    """
    if min_freq < 1 or min_paths < 1:
        raise ValidationError("min_freq and min_paths must be >= 1")
    query_types = tuple(QueryType(*qt) for qt in query_types)
    for qt in query_types:
        check_query_type(qt, g)

    grouped = defaultdict(list)
    for p, freq in paths.items():
        if freq < min_freq:
            continue
        p = orient(p, g)
        types = path_types(p, g)
        if any(_types_match(types, qt) for qt in query_types):
            grouped[p.source, p.target].append((p, int(freq)))

    eligible = [(pair, lst) for pair, lst in grouped.items() if len(lst) >= min_paths]
    eligible.sort(key=lambda item: (-len(item[1]), item[0]))
    if max_pairs is not None:
        eligible = eligible[:max_pairs]

    pairs = []
    for (s, t), lst in eligible:
        lst.sort(key=lambda pf: (-pf[1], path_key(pf[0], g)))
        qts = matching_query_types(int(g.entity_types[s]), int(g.entity_types[t]), query_types)
        pairs.append(GroundTruthPair(s, t, qts, tuple(lst)))
    return GroundTruthSet(tuple(pairs), query_types)


def format_ground_truth(gt: GroundTruthSet, g: KnowledgeGraph, header_comments=()):
    lines = [f"# {c}" for c in header_comments]
    lines.append("# query_types\t" + ",".join(format_query_type(q, g) for q in gt.query_types))
    lines.append("# src\ttgt\trank\tfreq\trel1\tmid\trel2")
    S, R = g.entity_surfaces, g.relation_names
    for pair in gt.pairs:
        for rank, (p, freq) in enumerate(pair.ranked_paths, 1):
            lines.append("\t".join((S[p.source], S[p.target], str(rank), str(freq),
                                    R[p.rel1], S[p.mid], R[p.rel2])))
    return "".join(line + "\n" for line in lines)


def read_ground_truth(source, g: KnowledgeGraph) -> GroundTruthSet:
    """Parse a ground-truth file against the vocabulary of ``g``."""
    query_types = ()
    grouped = {}
    fh = _open_text(source)
    try:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if line.startswith("# query_types\t"):
                spec = line.split("\t", 1)[1]
                query_types = tuple(parse_query_type(s, g) for s in spec.split(",") if s)
                continue
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 7:
                raise ParseError("expected 7 tab-separated fields", lineno)
            try:
                src, tgt, mid = (g.entity_id(fields[i]) for i in (0, 1, 5))
                rel1, rel2 = g.relation_id(fields[4]), g.relation_id(fields[6])
                rank, freq = int(fields[2]), int(fields[3])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            except UnknownKeyError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from None
            lst = grouped.setdefault((src, tgt), [])
            if rank != len(lst) + 1:
                raise ParseError(f"ranks for pair must run 1..k in order, got {rank}", lineno)
            if lst and freq > lst[-1][1]:
                raise ParseError("frequencies must be non-increasing with rank", lineno)
            lst.append((Path(src, rel1, mid, rel2, tgt), freq))
    finally:
        if fh is not source:
            fh.close()
    pairs = []
    for (s, t), lst in grouped.items():
        qts = matching_query_types(int(g.entity_types[s]), int(g.entity_types[t]), query_types)
        pairs.append(GroundTruthPair(s, t, qts, tuple(lst)))
    return GroundTruthSet(tuple(pairs), query_types)


# -- leave-one-out -------------------------------------------------------------------


class HeldOut(NamedTuple):
    source: int
    target: int
    removed: Triple
    top_path: Path


@dataclass(frozen=True)
class LeaveOneOutSplit:
    train: tuple
    held_out: tuple

    def train_graph(self, g: KnowledgeGraph) -> KnowledgeGraph:
        """Training triples over the full vocabulary of ``g``."""
        return g.with_triples(self.train)

    def removed_triples(self):
        return {(x.removed.head, x.removed.relation, x.removed.tail) for x in self.held_out}


def make_leave_one_out(g: KnowledgeGraph, gt: GroundTruthSet, rng_seed: int) -> LeaveOneOutSplit:
    """Remove one (seeded-random) edge of each pair's top path from the training triples."""
    rng = np.random.default_rng(rng_seed)
    held, removed = [], set()
    for pair in gt.pairs:
        p = pair.top_path
        for a, r, b in p.edges():
            if not g.has_edge(a, r, b):
                raise ConsistencyError(
                    f"edge ({g.entity_surfaces[a]}, {g.relation_names[r]}, "
                    f"{g.entity_surfaces[b]}) of a ground-truth path is missing from the graph")
        a, r, b = p.edges()[int(rng.integers(2))]
        a, b = min(a, b), max(a, b)
        removed.add((a, r, b))
        held.append(HeldOut(pair.source, pair.target, Triple(a, r, b, g.edge_weight(a, r, b)), p))
    train = tuple(t for t in g.triples() if (t.head, t.relation, t.tail) not in removed)
    return LeaveOneOutSplit(train, tuple(held))


def format_held_out(split: LeaveOneOutSplit, g: KnowledgeGraph, header_comments=()):
    S, R = g.entity_surfaces, g.relation_names
    lines = [f"# {c}" for c in header_comments]
    lines.append("# src\ttgt\thead\trelation\ttail\tweight\trel1\tmid\trel2")
    for h in split.held_out:
        x, p = h.removed, h.top_path
        lines.append("\t".join((S[h.source], S[h.target], S[x.head], R[x.relation], S[x.tail],
                                str(x.weight), R[p.rel1], S[p.mid], R[p.rel2])))
    return "".join(line + "\n" for line in lines)


def read_held_out(source, g: KnowledgeGraph):
    out = []
    fh = _open_text(source)
    try:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            f = line.split("\t")
            if len(f) != 9:
                raise ParseError("expected 9 tab-separated fields", lineno)
            try:
                s, t = g.entity_id(f[0]), g.entity_id(f[1])
                removed = Triple(g.entity_id(f[2]), g.relation_id(f[3]), g.entity_id(f[4]), int(f[5]))
                path = Path(s, g.relation_id(f[6]), g.entity_id(f[7]), g.relation_id(f[8]), t)
            except (ValueError, UnknownKeyError) as exc:
                raise ParseError(str(exc), lineno) from None
            out.append(HeldOut(s, t, removed, path))
    finally:
        if fh is not source:
            fh.close()
    return out
