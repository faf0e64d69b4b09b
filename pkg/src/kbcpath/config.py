"""Run configuration files.

An INI-style key/value file with explicit seeds, e.g.::

    [data]
    docs = docs.tsv
    query_types = Gene-Drug-Disease, Gene-Phenotype-Disease
    min_freq = 2
    min_paths = 2
    max_pairs = 50

    [hyperparams]
    dim = 32
    epochs = 40
    learning_rate = 0.005
    seed = 0

    [experiment]
    n_preds = 10, 25, 50
    cutoffs = 1, 10, 25, 100
    split_seed = 0

    [output]
    dir = out

Instead of ``docs`` (mined on the fly) a run may name a ``graph`` and a
``ground_truth`` file.  Relative paths resolve against the config file's
directory.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, field

from .errors import ValidationError
from .model import Hyperparams


def _ints(text):
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ValidationError(f"expected a comma-separated list of integers, got {text!r}") from None


@dataclass
class RunConfig:
    source: str
    hyperparams: Hyperparams
    docs: str | None = None
    graph: str | None = None
    ground_truth: str | None = None
    query_types: tuple = ()
    min_freq: int = 2
    min_paths: int = 2
    max_pairs: int | None = None
    n_preds: tuple = (100, 300, 500)
    cutoffs: tuple = (1, 10, 25, 100)
    n_pred: int = 1500
    cohorts: tuple = (10, 20)
    scorer: str = "cosine"
    split_seed: int | None = None
    perm_seed: int | None = None
    out_dir: str = "out"
    raw: dict = field(default_factory=dict)

    def as_dict(self):
        d = asdict(self)
        d.pop("source")
        d.pop("raw")
        return d

    def require(self, *names):
        for name in names:
            if getattr(self, name) is None:
                raise ValidationError(f"config {self.source}: missing required setting {name!r}")


def load_config(path) -> RunConfig:
    if not os.path.exists(path):
        raise ValidationError(f"config file {path} does not exist")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ValidationError(f"config {path}: {exc}") from None
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    data = dict(cp["data"]) if cp.has_section("data") else {}
    hp_raw = dict(cp["hyperparams"]) if cp.has_section("hyperparams") else {}
    exp = dict(cp["experiment"]) if cp.has_section("experiment") else {}
    out = dict(cp["output"]) if cp.has_section("output") else {}
    known = {"data": {"docs", "graph", "ground_truth", "query_types", "min_freq", "min_paths",
                      "max_pairs"},
             "experiment": {"n_preds", "cutoffs", "n_pred", "cohorts", "scorer", "split_seed",
                            "perm_seed"},
             "output": {"dir"}}
    for section, keys in known.items():
        extra = set(dict(cp[section]) if cp.has_section(section) else {}) - keys
        if extra:
            raise ValidationError(f"config {path}: unknown keys in [{section}]: {sorted(extra)}")
    if "seed" not in hp_raw:
        raise ValidationError(f"config {path}: [hyperparams] seed must be set explicitly")

    try:
        cfg = RunConfig(
            source=str(path),
            hyperparams=Hyperparams.from_dict(hp_raw),
            docs=resolve(data["docs"]) if "docs" in data else None,
            graph=resolve(data["graph"]) if "graph" in data else None,
            ground_truth=resolve(data["ground_truth"]) if "ground_truth" in data else None,
            query_types=tuple(q.strip() for q in data.get("query_types", "").split(",")
                              if q.strip()),
            min_freq=int(data.get("min_freq", 2)),
            min_paths=int(data.get("min_paths", 2)),
            max_pairs=int(data["max_pairs"]) if "max_pairs" in data else None,
            n_preds=_ints(exp.get("n_preds", "100,300,500")),
            cutoffs=_ints(exp.get("cutoffs", "1,10,25,100")),
            n_pred=int(exp.get("n_pred", 1500)),
            cohorts=_ints(exp.get("cohorts", "10,20")),
            scorer=exp.get("scorer", "cosine"),
            split_seed=int(exp["split_seed"]) if "split_seed" in exp else None,
            perm_seed=int(exp["perm_seed"]) if "perm_seed" in exp else None,
            out_dir=resolve(out.get("dir", "out")),
            raw={s: dict(cp[s]) for s in cp.sections()},
        )
    except ValueError as exc:
        raise ValidationError(f"config {path}: {exc}") from None

    if cfg.docs is None and (cfg.graph is None or cfg.ground_truth is None):
        raise ValidationError(f"config {path}: set either docs or both graph and ground_truth")
    for f in (cfg.docs, cfg.graph, cfg.ground_truth):
        if f is not None and not os.path.exists(f):
            raise ValidationError(f"config {path}: input file {f} does not exist")
    if cfg.docs is not None and not cfg.query_types:
        raise ValidationError(f"config {path}: mining from docs needs query_types")
    return cfg


def format_config(sections: dict) -> str:
    lines = []
    for name, values in sections.items():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {v}" for k, v in values.items())
        lines.append("")
    return "\n".join(lines)
