"""ProjE-style embedding model for knowledge base completion.

For a query entity ``e`` and relation ``r`` the combined query vector is
``q = tanh(s_e * E[e] + s_r * R[r] + b_c)`` and every entity ``c`` is scored
as ``sigmoid(q . E[c] + b_p)``.  The graph is undirected, so head and tail
queries share the same operator.

Training minimises binary cross-entropy over the true candidate and a uniform
sample of negatives, plus an L2 penalty, with Adam.  The inner loss/gradient
loop lives in :mod:`kbcpath.kernels`.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import math
import os
import struct
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import (DeserializationError, IncompatibleModelError, TrainingError,
                     UnknownKeyError, ValidationError)
from .graph import KnowledgeGraph

log = logging.getLogger(__name__)

MODEL_MAGIC = b"KBCMODEL"
MODEL_FORMAT_VERSION = 1
PARAM_NAMES = ("entity", "relation", "entity_scale", "relation_scale", "combine_bias",
               "projection_bias")


@dataclass(frozen=True)
class Hyperparams:
    """Training settings; defaults are the values used for the 200-d PubMed model."""

    dim: int = 200
    epochs: int = 200
    learning_rate: float = 1e-4
    batch_size: int = 128
    dropout_rate: float = 0.5
    l2_weight: float = 1e-4
    neg_rate: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if not 0 <= self.dropout_rate < 1:
            raise ValidationError("dropout_rate must be in [0, 1)")
        if not 0 < self.neg_rate <= 1:
            raise ValidationError("neg_rate must be in (0, 1]")
        if self.learning_rate <= 0 or self.l2_weight < 0:
            raise ValidationError("learning_rate must be > 0 and l2_weight >= 0")

    @classmethod
    def from_dict(cls, d):
        types = {f: type(v) for f, v in asdict(cls()).items()}
        unknown = set(d) - set(types)
        if unknown:
            raise ValidationError(f"unknown hyperparameters: {sorted(unknown)}")
        try:
            return cls(**{k: types[k](v) for k, v in d.items()})
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad hyperparameter value: {exc}") from None


class Prediction(NamedTuple):
    entity: int
    score: float
    rank: int


class Batch(NamedTuple):
    """One minibatch of sampled candidate lists.

    ``cand[:, 0]`` holds the true entity; padded negatives have weight 0.
    """

    query_entity: np.ndarray
    query_relation: np.ndarray
    cand: np.ndarray
    labels: np.ndarray
    weights: np.ndarray
    drop: np.ndarray


def init_params(n_entities, n_relations, dim, rng):
    bound = math.sqrt(3.0 / dim)
    return {
        "entity": rng.uniform(-bound, bound, size=(n_entities, dim)),
        "relation": rng.uniform(-bound, bound, size=(n_relations, dim)),
        "entity_scale": np.ones(dim),
        "relation_scale": np.ones(dim),
        "combine_bias": np.zeros(dim),
        "projection_bias": np.zeros(1),
    }


def loss_and_grads(params, batch: Batch, l2_weight, backend=None):
    """Mean batch loss (plus L2 penalty) and its gradient for every parameter group."""
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    n = len(batch.query_entity)
    loss, gbp = kernels.get_kernel(backend)(
        params["entity"], params["relation"], params["entity_scale"],
        params["relation_scale"], params["combine_bias"], float(params["projection_bias"][0]),
        batch.query_entity, batch.query_relation, batch.cand, batch.labels, batch.weights,
        batch.drop, 1.0 / n,
        grads["entity"], grads["relation"], grads["entity_scale"], grads["relation_scale"],
        grads["combine_bias"])
    grads["projection_bias"][0] += gbp
    if l2_weight:
        for k, v in params.items():
            loss += l2_weight * float(np.sum(v * v))
            grads[k] += 2.0 * l2_weight * v
    return loss, grads


class Adam:
    """Adam with bias correction over a dict of parameter arrays (updated in place)."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = grads[k]
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class _PositiveIndex:
    """Known positives per (entity, relation) query in CSR layout."""

    def __init__(self, qe, qr, qc, n_relations):
        keys = qe * n_relations + qr
        order = np.lexsort((qc, keys))
        keys, self.values = keys[order], qc[order]
        self.keys, self.starts, counts = np.unique(keys, return_index=True, return_counts=True)
        self.counts = counts
        self.n_relations = n_relations

    def rows_cols(self, qe, qr):
        slot = np.searchsorted(self.keys, qe * self.n_relations + qr)
        lengths = self.counts[slot]
        starts = self.starts[slot]
        rows = np.repeat(np.arange(len(qe)), lengths)
        offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
        return rows, self.values[np.repeat(starts, lengths) + offsets]


def _training_examples(g: KnowledgeGraph):
    h, r, t = g.heads, g.relations, g.tails
    return np.concatenate([h, t]), np.concatenate([r, r]), np.concatenate([t, h])


def sample_batch(qe, qr, qc, positives: _PositiveIndex, n_entities, n_neg, dim, dropout_rate,
                 rng):
    """Draw negatives (uniform, without replacement, excluding known positives and the
    query entity) and a dropout mask for one minibatch."""
    b = len(qe)
    keys = rng.random((b, n_entities))
    rows, cols = positives.rows_cols(qe, qr)
    keys[rows, cols] = np.inf
    keys[np.arange(b), qe] = np.inf
    if n_neg < n_entities:
        neg = np.argpartition(keys, n_neg - 1, axis=1)[:, :n_neg]
    else:
        neg = np.broadcast_to(np.arange(n_entities), (b, n_entities)).copy()
    neg.sort(axis=1)
    valid = np.isfinite(np.take_along_axis(keys, neg, axis=1))
    cand = np.concatenate([qc[:, None], neg], axis=1).astype(np.int64)
    labels = np.zeros(cand.shape)
    labels[:, 0] = 1.0
    weights = np.concatenate([np.ones((b, 1)), valid.astype(np.float64)], axis=1)
    if dropout_rate > 0:
        drop = (rng.random((b, dim)) >= dropout_rate) / (1.0 - dropout_rate)
    else:
        drop = np.ones((b, dim))
    return Batch(np.ascontiguousarray(qe, dtype=np.int64), np.ascontiguousarray(qr, dtype=np.int64),
                 cand, labels, weights, drop)


def train(g: KnowledgeGraph, hp: Hyperparams, backend=None, progress=None) -> "EmbeddingModel":
    """Fit an :class:`EmbeddingModel` to every triple of ``g`` in both query directions.

    All randomness (initialisation, shuffling, negatives, dropout) comes from
    ``hp.seed``, so a fixed backend reproduces parameters bit for bit.
    ``progress`` is called as ``progress(epoch, mean_loss)`` after each epoch.
    """
    if g.num_triples == 0:
        raise ValidationError("cannot train on an empty graph")
    rng = np.random.default_rng(hp.seed)
    n_ent, n_rel = g.num_entities, g.num_relations
    params = init_params(n_ent, n_rel, hp.dim, rng)
    opt = Adam(params, hp.learning_rate)

    qe, qr, qc = _training_examples(g)
    positives = _PositiveIndex(qe, qr, qc, n_rel)
    n_neg = min(math.ceil(hp.neg_rate * n_ent), n_ent)
    n_ex = len(qe)
    history = []
    for epoch in range(1, hp.epochs + 1):
        order = rng.permutation(n_ex)
        total = 0.0
        n_batches = 0
        for n_batches, start in enumerate(range(0, n_ex, hp.batch_size), 1):
            idx = order[start:start + hp.batch_size]
            batch = sample_batch(qe[idx], qr[idx], qc[idx], positives, n_ent, n_neg, hp.dim,
                                 hp.dropout_rate, rng)
            loss, grads = loss_and_grads(params, batch, hp.l2_weight, backend)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at epoch {epoch}, batch {n_batches}")
            opt.step(grads)
            total += loss
        mean = total / n_batches
        history.append(mean)
        for k, v in params.items():
            if not np.all(np.isfinite(v)):
                raise TrainingError(f"non-finite parameter {k!r} after epoch {epoch}")
        if progress is not None:
            progress(epoch, mean)
        log.debug("epoch %d loss %.6f", epoch, mean)
    return EmbeddingModel(params, hp, g.vocab_hash(), history)


class EmbeddingModel:
    """Trained, immutable parameter set answering ranked head/tail queries."""

    def __init__(self, params, hp: Hyperparams, vocab_hash: str, loss_history=()):
        missing = set(PARAM_NAMES) - set(params)
        if missing:
            raise ValidationError(f"missing parameters: {sorted(missing)}")
        self.params = {}
        for k in PARAM_NAMES:
            arr = np.array(params[k], dtype=np.float64, order="C")
            arr.setflags(write=False)
            self.params[k] = arr
        self.hp = hp
        self.vocab_hash = vocab_hash
        self.loss_history = tuple(float(x) for x in loss_history)
        self._normed = None

    entity_emb = property(lambda self: self.params["entity"])
    relation_emb = property(lambda self: self.params["relation"])
    combine_entity_scale = property(lambda self: self.params["entity_scale"])
    combine_relation_scale = property(lambda self: self.params["relation_scale"])
    combine_bias = property(lambda self: self.params["combine_bias"])
    projection_bias = property(lambda self: float(self.params["projection_bias"][0]))

    @property
    def num_entities(self):
        return self.entity_emb.shape[0]

    @property
    def num_relations(self):
        return self.relation_emb.shape[0]

    @property
    def dim(self):
        return self.entity_emb.shape[1]

    def _check(self, e, r=None):
        if not isinstance(e, (int, np.integer)) or not 0 <= e < self.num_entities:
            raise UnknownKeyError(f"unknown entity id {e!r}")
        if r is not None and (not isinstance(r, (int, np.integer))
                              or not 0 <= r < self.num_relations):
            raise UnknownKeyError(f"unknown relation id {r!r}")

    def query_vector(self, e, r):
        self._check(e, r)
        return np.tanh(self.combine_entity_scale * self.entity_emb[e]
                       + self.combine_relation_scale * self.relation_emb[r] + self.combine_bias)

    def scores(self, e, r):
        """Sigmoid score of every entity as the answer to query ``(e, r)``."""
        logits = self.entity_emb @ self.query_vector(e, r) + self.projection_bias
        return 1.0 / (1.0 + np.exp(-logits))

    def predict_tails(self, e, r, n):
        """Top ``n`` entities for ``(e, r, ?)``; the query entity itself is never returned.

        Ranks start at 1; equal scores are ordered by ascending entity id.
        """
        if n < 1:
            raise ValidationError("n must be >= 1")
        s = self.scores(e, r)
        ids = np.arange(len(s))
        order = np.lexsort((ids, -s))
        order = order[order != e][:n]
        return [Prediction(int(c), float(s[c]), i) for i, c in enumerate(order.tolist(), 1)]

    def predict_heads(self, e, r, n):
        """Top ``n`` entities for ``(?, r, e)``; identical to :meth:`predict_tails`."""
        return self.predict_tails(e, r, n)

    def entity_embedding(self, e):
        self._check(e)
        return self.entity_emb[e]

    def cosine_matrix_row(self, e):
        """Cosine similarity of entity ``e`` to every entity (0 for zero vectors)."""
        self._check(e)
        if self._normed is None:
            norms = np.linalg.norm(self.entity_emb, axis=1)
            safe = np.where(norms > 0, norms, 1.0)
            normed = self.entity_emb / safe[:, None]
            normed[norms == 0] = 0.0
            normed.setflags(write=False)
            self._normed = normed
        return self._normed @ self._normed[e]

    def __eq__(self, other):
        if not isinstance(other, EmbeddingModel):
            return NotImplemented
        return (self.hp == other.hp and self.vocab_hash == other.vocab_hash
                and all(np.array_equal(self.params[k], other.params[k]) for k in PARAM_NAMES))


# -- serialisation -------------------------------------------------------------------


def dumps_model(m: EmbeddingModel, provenance=None) -> bytes:
    if m.num_entities == 0:
        raise ValidationError("refusing to save a model with an empty entity vocabulary")
    meta = {
        "hyperparams": asdict(m.hp),
        "vocab_hash": m.vocab_hash,
        "shapes": {k: list(m.params[k].shape) for k in PARAM_NAMES},
        "dtype": "<f8",
        "loss_history": list(m.loss_history),
    }
    if provenance:
        meta["provenance"] = provenance
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MODEL_MAGIC)
    buf.write(struct.pack("<B", MODEL_FORMAT_VERSION))
    buf.write(b"<")
    buf.write(struct.pack("<I", len(meta_bytes)))
    buf.write(meta_bytes)
    for k in PARAM_NAMES:
        buf.write(m.params[k].astype("<f8").tobytes(order="C"))
    body = buf.getvalue()
    return body + hashlib.sha256(body).digest()


def loads_model(data: bytes, graph: KnowledgeGraph | None = None) -> EmbeddingModel:
    header = len(MODEL_MAGIC) + 2 + 4
    if len(data) < header + 32 or not data.startswith(MODEL_MAGIC):
        raise DeserializationError("not a model file (bad magic or truncated)")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise DeserializationError("model checksum mismatch")
    version = body[len(MODEL_MAGIC)]
    if version != MODEL_FORMAT_VERSION:
        raise DeserializationError(f"unsupported model format version {version}")
    if body[len(MODEL_MAGIC) + 1:len(MODEL_MAGIC) + 2] != b"<":
        raise DeserializationError("unsupported byte order")
    (meta_len,) = struct.unpack("<I", body[len(MODEL_MAGIC) + 2:header])
    try:
        meta = json.loads(body[header:header + meta_len].decode("utf-8"))
        hp = Hyperparams(**meta["hyperparams"])
        pos = header + meta_len
        params = {}
        for k in PARAM_NAMES:
            shape = tuple(meta["shapes"][k])
            size = int(np.prod(shape)) * 8
            chunk = body[pos:pos + size]
            if len(chunk) != size:
                raise DeserializationError("parameter block truncated")
            params[k] = np.frombuffer(chunk, dtype="<f8").reshape(shape).astype(np.float64)
            pos += size
    except (KeyError, TypeError, ValueError) as exc:
        raise DeserializationError(f"malformed model metadata: {exc}") from None
    if pos != len(body):
        raise DeserializationError("trailing bytes in model file")
    m = EmbeddingModel(params, hp, meta["vocab_hash"], meta.get("loss_history", ()))
    if graph is not None:
        check_compatible(m, graph)
    return m


def check_compatible(m: EmbeddingModel, g: KnowledgeGraph):
    if m.vocab_hash != g.vocab_hash():
        raise IncompatibleModelError("model vocabulary hash does not match the graph")


def save_model(m: EmbeddingModel, sink, provenance=None):
    data = dumps_model(m, provenance)
    if isinstance(sink, (str, os.PathLike)):
        from .io_utils import atomic_write_bytes

        atomic_write_bytes(sink, data)
    else:
        sink.write(data)


def load_model(source, graph: KnowledgeGraph | None = None) -> EmbeddingModel:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
    return loads_model(data, graph)
