"""Typed, weighted, undirected knowledge graph.

Entities are identified by their surface string and carry exactly one entity
type.  Relation names follow the ``TypeA_TypeB`` grammar, which fixes the pair
of entity types a relation may connect.  Edges are stored canonically with
``head < tail`` (the graph is undirected) and duplicate edges are merged by
summing their document-count weights.

Entity, type and relation ids are assigned by sorting the corresponding
strings, so the same multiset of rows always yields the same graph no matter
in which order the rows were read.
"""

from __future__ import annotations

import hashlib
import io
import os
from collections import defaultdict
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DeserializationError, ParseError, UnknownKeyError, ValidationError

GRAPH_MAGIC = "KBCGRAPH"
GRAPH_FORMAT_VERSION = 1


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int
    weight: int = 1


class TripleRecord(NamedTuple):
    """A triple as read from a file, before ids are assigned."""

    head: str
    head_type: str
    relation: str
    tail: str
    tail_type: str
    weight: int = 1


def parse_relation_name(name):
    """Split ``TypeA_TypeB`` into its two endpoint type names."""
    parts = name.split("_")
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise ValidationError(f"relation name {name!r} is not of the form TypeA_TypeB")
    return parts[0], parts[1]


def _check_record(rec: TripleRecord):
    a, b = parse_relation_name(rec.relation)
    if (rec.head_type, rec.tail_type) not in ((a, b), (b, a)):
        raise ValidationError(
            f"triple ({rec.head}, {rec.relation}, {rec.tail}): endpoint types "
            f"({rec.head_type}, {rec.tail_type}) do not match relation types ({a}, {b})"
        )
    if rec.head == rec.tail:
        raise ValidationError(f"triple ({rec.head}, {rec.relation}, {rec.tail}) is a self-loop")


class KnowledgeGraph:
    """Immutable typed multi-relational graph with a symmetric adjacency index.

    Use :meth:`from_records` (or :func:`load_triples`) to build one from
    string-keyed rows.  The constructor takes already-canonical arrays and is
    mostly meant for deserialisation and :meth:`with_triples`.
    """

    def __init__(self, entity_surfaces, entity_types, type_names, relation_names,
                 heads=(), relations=(), tails=(), weights=()):
        self.entity_surfaces = tuple(entity_surfaces)
        self.type_names = tuple(type_names)
        self.relation_names = tuple(relation_names)
        self.entity_types = np.asarray(entity_types, dtype=np.int64).reshape(-1)

        if list(self.entity_surfaces) != sorted(set(self.entity_surfaces)):
            raise ValidationError("entity surfaces must be unique and sorted")
        if list(self.type_names) != sorted(set(self.type_names)):
            raise ValidationError("type names must be unique and sorted")
        if list(self.relation_names) != sorted(set(self.relation_names)):
            raise ValidationError("relation names must be unique and sorted")
        if len(self.entity_types) != len(self.entity_surfaces):
            raise ValidationError("one entity type per entity required")
        if len(self.entity_types) and (self.entity_types.min() < 0
                                       or self.entity_types.max() >= len(self.type_names)):
            raise ValidationError("entity type id out of range")

        self._entity_index = {s: i for i, s in enumerate(self.entity_surfaces)}
        self._type_index = {s: i for i, s in enumerate(self.type_names)}
        self._relation_index = {s: i for i, s in enumerate(self.relation_names)}
        endpoints = []
        for name in self.relation_names:
            a, b = parse_relation_name(name)
            if a not in self._type_index or b not in self._type_index:
                raise ValidationError(f"relation {name!r} names an unknown entity type")
            endpoints.append((self._type_index[a], self._type_index[b]))
        self.relation_endpoints = tuple(endpoints)

        h = np.asarray(heads, dtype=np.int64).reshape(-1)
        r = np.asarray(relations, dtype=np.int64).reshape(-1)
        t = np.asarray(tails, dtype=np.int64).reshape(-1)
        w = np.asarray(weights, dtype=np.int64).reshape(-1)
        if not (len(h) == len(r) == len(t) == len(w)):
            raise ValidationError("triple columns differ in length")
        self._set_triples(h, r, t, w)

    def _set_triples(self, h, r, t, w):
        n_ent, n_rel = self.num_entities, self.num_relations
        if len(h):
            if min(h.min(), t.min()) < 0 or max(h.max(), t.max()) >= n_ent:
                raise ValidationError("entity id out of range in triples")
            if r.min() < 0 or r.max() >= n_rel:
                raise ValidationError("relation id out of range in triples")
            if w.min() < 1:
                raise ValidationError("triple weights must be >= 1")
            if np.any(h >= t):
                raise ValidationError("triples must be stored with head < tail")
            order = np.lexsort((t, r, h))
            h, r, t, w = h[order], r[order], t[order], w[order]
            dup = (h[1:] == h[:-1]) & (r[1:] == r[:-1]) & (t[1:] == t[:-1])
            if np.any(dup):
                raise ValidationError("duplicate triples")
            for hi, ri, ti in zip(h.tolist(), r.tolist(), t.tolist()):
                ea, eb = self.relation_endpoints[ri]
                types = (int(self.entity_types[hi]), int(self.entity_types[ti]))
                if types not in ((ea, eb), (eb, ea)):
                    raise ValidationError(
                        f"triple ({self.entity_surfaces[hi]}, {self.relation_names[ri]}, "
                        f"{self.entity_surfaces[ti]}) violates the relation's endpoint types"
                    )
        for arr in (h, r, t, w):
            arr.setflags(write=False)
        self.heads, self.relations, self.tails, self.weights = h, r, t, w

        adj = defaultdict(list)
        for hi, ri, ti, wi in zip(h.tolist(), r.tolist(), t.tolist(), w.tolist()):
            adj[hi, ri].append((ti, wi))
            adj[ti, ri].append((hi, wi))
        self._adjacency = {
            key: tuple(sorted(vals, key=lambda nw: (-nw[1], nw[0]))) for key, vals in adj.items()
        }
        deg = np.zeros(n_ent, dtype=np.int64)
        np.add.at(deg, h, 1)
        np.add.at(deg, t, 1)
        deg.setflags(write=False)
        self.degrees = deg

    @classmethod
    def from_records(cls, records: Iterable[TripleRecord], extra_entities=()):
        """Validate string-keyed rows, merge duplicates and assign canonical ids.

        ``extra_entities`` is an iterable of ``(surface, type)`` pairs that
        should be part of the vocabulary even without edges.
        """
        etype = {}
        merged = defaultdict(int)
        relation_names = set()

        def note_entity(surface, typ):
            prev = etype.setdefault(surface, typ)
            if prev != typ:
                raise ValidationError(f"entity {surface!r} has two types: {prev!r} and {typ!r}")

        for surface, typ in extra_entities:
            note_entity(surface, typ)
        for rec in records:
            _check_record(rec)
            note_entity(rec.head, rec.head_type)
            note_entity(rec.tail, rec.tail_type)
            relation_names.add(rec.relation)
            a, b = sorted((rec.head, rec.tail))
            merged[a, rec.relation, b] += rec.weight

        type_set = set(etype.values())
        for name in relation_names:
            type_set.update(parse_relation_name(name))
        type_names = sorted(type_set)
        tindex = {n: i for i, n in enumerate(type_names)}
        surfaces = sorted(etype)
        eindex = {s: i for i, s in enumerate(surfaces)}
        rel_names = sorted(relation_names)
        rindex = {n: i for i, n in enumerate(rel_names)}

        n = len(merged)
        h = np.empty(n, dtype=np.int64)
        r = np.empty(n, dtype=np.int64)
        t = np.empty(n, dtype=np.int64)
        w = np.empty(n, dtype=np.int64)
        for i, ((a, rel, b), weight) in enumerate(merged.items()):
            h[i], r[i], t[i], w[i] = eindex[a], rindex[rel], eindex[b], weight
        return cls(surfaces, [tindex[etype[s]] for s in surfaces], type_names, rel_names,
                   h, r, t, w)

    def with_triples(self, triples: Iterable[Triple]):
        """Return a graph over the same vocabulary holding only ``triples``."""
        rows = [(min(x.head, x.tail), x.relation, max(x.head, x.tail), x.weight) for x in triples]
        cols = list(zip(*rows)) if rows else [(), (), (), ()]
        return KnowledgeGraph(self.entity_surfaces, self.entity_types, self.type_names,
                              self.relation_names, *cols)

    # -- vocabulary ------------------------------------------------------------------

    @property
    def num_entities(self):
        return len(self.entity_surfaces)

    @property
    def num_relations(self):
        return len(self.relation_names)

    @property
    def num_triples(self):
        return len(self.heads)

    def __len__(self):
        return self.num_triples

    def entity_id(self, surface):
        try:
            return self._entity_index[surface]
        except KeyError:
            raise UnknownKeyError(f"unknown entity {surface!r}") from None

    def relation_id(self, name):
        try:
            return self._relation_index[name]
        except KeyError:
            raise UnknownKeyError(f"unknown relation {name!r}") from None

    def type_id(self, name):
        try:
            return self._type_index[name]
        except KeyError:
            raise UnknownKeyError(f"unknown entity type {name!r}") from None

    def check_entity(self, e):
        if not isinstance(e, (int, np.integer)) or not 0 <= e < self.num_entities:
            raise UnknownKeyError(f"unknown entity id {e!r}")
        return int(e)

    def check_relation(self, r):
        if not isinstance(r, (int, np.integer)) or not 0 <= r < self.num_relations:
            raise UnknownKeyError(f"unknown relation id {r!r}")
        return int(r)

    def entity_type(self, e):
        return int(self.entity_types[self.check_entity(e)])

    def entity_type_name(self, e):
        return self.type_names[self.entity_type(e)]

    def relations_between(self, type_a, type_b):
        """Relation ids whose endpoint types are ``{type_a, type_b}``, ascending."""
        return [i for i, (a, b) in enumerate(self.relation_endpoints)
                if (a, b) == (type_a, type_b) or (b, a) == (type_a, type_b)]

    def other_endpoint_type(self, r, type_id):
        a, b = self.relation_endpoints[self.check_relation(r)]
        if type_id == a:
            return b
        if type_id == b:
            return a
        raise ValidationError(
            f"relation {self.relation_names[r]!r} does not touch type {self.type_names[type_id]!r}")

    def vocab_hash(self):
        """SHA-256 over the entity, type and relation vocabularies."""
        h = hashlib.sha256()
        for name in self.type_names:
            h.update(b"T" + name.encode() + b"\0")
        for s, t in zip(self.entity_surfaces, self.entity_types.tolist()):
            h.update(b"E" + s.encode() + b"\0" + str(t).encode() + b"\0")
        for name in self.relation_names:
            h.update(b"R" + name.encode() + b"\0")
        return h.hexdigest()

    # -- edges -----------------------------------------------------------------------

    def triples(self):
        return [Triple(*row) for row in zip(self.heads.tolist(), self.relations.tolist(),
                                            self.tails.tolist(), self.weights.tolist())]

    def neighbors(self, e, r):
        """Entities adjacent to ``e`` via relation ``r`` as ``(entity, weight)`` pairs.

        Ordered by descending weight, then ascending entity id.
        """
        e = self.check_entity(e)
        r = self.check_relation(r)
        return list(self._adjacency.get((e, r), ()))

    def has_edge(self, a, r, b):
        return any(n == b for n, _ in self._adjacency.get((a, r), ()))

    def edge_weight(self, a, r, b):
        for n, w in self._adjacency.get((a, r), ()):
            if n == b:
                return w
        return 0

    def __eq__(self, other):
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return (self.entity_surfaces == other.entity_surfaces
                and self.type_names == other.type_names
                and self.relation_names == other.relation_names
                and np.array_equal(self.entity_types, other.entity_types)
                and np.array_equal(self.heads, other.heads)
                and np.array_equal(self.relations, other.relations)
                and np.array_equal(self.tails, other.tails)
                and np.array_equal(self.weights, other.weights))

    def __repr__(self):
        return (f"KnowledgeGraph(entities={self.num_entities}, relations={self.num_relations}, "
                f"triples={self.num_triples})")


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, encoding="utf-8")
    return source


def read_triple_records(source):
    """Yield :class:`TripleRecord` rows from a tab-separated triple file.

    Columns: ``head, head_type, relation, tail, tail_type[, weight]``.
    """
    fh = _open_text(source)
    try:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) not in (5, 6):
                raise ParseError(f"expected 5 or 6 tab-separated fields, got {len(fields)}", lineno)
            if any(not f for f in fields[:5]):
                raise ParseError("empty field", lineno)
            weight = 1
            if len(fields) == 6:
                try:
                    weight = int(fields[5])
                except ValueError:
                    raise ParseError(f"weight {fields[5]!r} is not an integer", lineno) from None
                if weight < 1:
                    raise ParseError(f"weight must be >= 1, got {weight}", lineno)
            try:
                _check_record(TripleRecord(*fields[:5], weight))
            except ValidationError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from None
            yield TripleRecord(*fields[:5], weight)
    finally:
        if fh is not source:
            fh.close()


def load_triples(source):
    """Read a triple file (path or text handle) into a :class:`KnowledgeGraph`."""
    return KnowledgeGraph.from_records(read_triple_records(source))


def format_triples(g: KnowledgeGraph, triples=None):
    """Render triples in the tab-separated triple file format."""
    triples = g.triples() if triples is None else triples
    out = []
    for x in triples:
        out.append("\t".join((g.entity_surfaces[x.head], g.entity_type_name(x.head),
                              g.relation_names[x.relation], g.entity_surfaces[x.tail],
                              g.entity_type_name(x.tail), str(x.weight))))
    return "".join(line + "\n" for line in out)


# -- serialisation -------------------------------------------------------------------


def dumps_graph(g: KnowledgeGraph, header_comments=()):
    body = io.StringIO()
    body.write(f"E\t{g.num_entities}\n")
    for s, t in zip(g.entity_surfaces, g.entity_types.tolist()):
        body.write(f"{s}\t{t}\n")
    body.write(f"Y\t{len(g.type_names)}\n")
    for name in g.type_names:
        body.write(f"{name}\n")
    body.write(f"R\t{g.num_relations}\n")
    for name in g.relation_names:
        body.write(f"{name}\n")
    body.write(f"T\t{g.num_triples}\n")
    for row in zip(g.heads.tolist(), g.relations.tolist(), g.tails.tolist(), g.weights.tolist()):
        body.write("\t".join(map(str, row)) + "\n")
    text = body.getvalue()
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    head = f"{GRAPH_MAGIC}\t{GRAPH_FORMAT_VERSION}\n"
    head += "".join(f"# {c}\n" for c in header_comments)
    return head + text + f"SHA256\t{digest}\n"


def loads_graph(text):
    lines = text.split("\n")
    if not lines or not lines[0].startswith(GRAPH_MAGIC + "\t"):
        raise DeserializationError("not a serialized graph (bad magic)")
    try:
        version = int(lines[0].split("\t")[1])
    except (IndexError, ValueError):
        raise DeserializationError("bad format version field") from None
    if version != GRAPH_FORMAT_VERSION:
        raise DeserializationError(f"unsupported graph format version {version}")
    i = 1
    while i < len(lines) and lines[i].startswith("#"):
        i += 1
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[-1].startswith("SHA256\t"):
        raise DeserializationError("missing checksum trailer")
    body = "".join(line + "\n" for line in lines[i:-1])
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != lines[-1].split("\t", 1)[1]:
        raise DeserializationError("checksum mismatch")

    pos = i

    def section(tag):
        nonlocal pos
        parts = lines[pos].split("\t")
        if len(parts) != 2 or parts[0] != tag:
            raise DeserializationError(f"expected section {tag!r} at line {pos + 1}")
        count = int(parts[1])
        rows = lines[pos + 1:pos + 1 + count]
        if len(rows) != count:
            raise DeserializationError(f"section {tag!r} truncated")
        pos += 1 + count
        return rows

    try:
        ents = [row.split("\t") for row in section("E")]
        types = section("Y")
        rels = section("R")
        tri = [tuple(map(int, row.split("\t"))) for row in section("T")]
        surfaces = [e[0] for e in ents]
        etypes = [int(e[1]) for e in ents]
    except (ValueError, IndexError) as exc:
        raise DeserializationError(f"malformed graph payload: {exc}") from None
    cols = list(zip(*tri)) if tri else [(), (), (), ()]
    try:
        return KnowledgeGraph(surfaces, etypes, types, rels, *cols)
    except ValidationError as exc:
        raise DeserializationError(f"invalid graph payload: {exc}") from None


def save_graph(g: KnowledgeGraph, sink, header_comments=()):
    """Write ``g`` to a path or text handle in the versioned text format."""
    text = dumps_graph(g, header_comments)
    if isinstance(sink, (str, os.PathLike)):
        from .io_utils import atomic_write_text

        atomic_write_text(sink, text)
    else:
        sink.write(text)


def load_graph(source):
    fh = _open_text(source)
    try:
        return loads_graph(fh.read())
    finally:
        if fh is not source:
            fh.close()


def load_any_graph(path):
    """Load either a serialized graph or a raw triple file, sniffing the magic."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if first.startswith(GRAPH_MAGIC):
        return load_graph(path)
    return load_triples(path)
