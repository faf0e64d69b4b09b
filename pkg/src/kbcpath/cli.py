"""Command line front end.

Every command writes its outputs atomically, stamps text outputs with the
tool version and a hash of its effective configuration, and on failure exits
non-zero after printing one line ``error code=<CODE> message=<json string>``
on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, fields

from . import __version__, kernels
from .builder import build_candidate_graph
from .config import format_config, load_config
from .errors import KbcPathError, ValidationError
from .experiments import (evaluate_experiment1, evaluate_experiment2, format_report_rows,
                          format_scatter)
from .graph import dumps_graph, format_triples, load_any_graph, load_triples
from .io_utils import atomic_write_bytes, atomic_write_text, config_hash, provenance_line
from .mining import (build_ground_truth, doc_triples_from_records, format_ground_truth,
                     format_held_out, make_leave_one_out, matching_query_types,
                     mine_one_hop_paths, parse_query_type, read_doc_triples, read_ground_truth, read_query_types)
from .model import Hyperparams, dumps_model, load_model, train
from .scoring import Scorer, baseline_rank, format_ranked, rank_candidate_paths

log = logging.getLogger("kbcpath")


# flags that cannot change any output byte are left out of the config hash
_UNHASHED = ("func", "threads", "verbose", "output", "graph_out")


def _stamp(args, **extra):
    settings = {k: v for k, v in vars(args).items() if k not in _UNHASHED}
    settings["backend"] = kernels.active_backend()
    settings.update(extra)
    return provenance_line(config_hash(settings))


def _config_stamp(cfg):
    settings = cfg.as_dict()
    settings.pop("out_dir")
    settings["backend"] = kernels.active_backend()
    return provenance_line(config_hash(settings))


def _hp_from_args(args, base=None):
    base = base or Hyperparams()
    values = asdict(base)
    for f in fields(Hyperparams):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return Hyperparams(**values)


# -- commands ------------------------------------------------------------------------


def cmd_ingest(args):
    g = load_triples(args.triples)
    atomic_write_text(args.output, dumps_graph(g, [_stamp(args)]))
    log.info("ingested %r", g)


def cmd_mine(args):
    g, docs = read_doc_triples(args.docs)
    qts = read_query_types(args.query_types, g)
    paths = mine_one_hop_paths(docs, g)
    gt = build_ground_truth(paths, g, qts, args.min_freq, args.min_paths, args.max_pairs)
    stamp = _stamp(args)
    atomic_write_text(args.output, format_ground_truth(gt, g, [stamp]))
    if args.graph_out:
        atomic_write_text(args.graph_out, dumps_graph(g, [stamp]))
    log.info("mined %d distinct paths, kept %d pairs", len(paths), len(gt))


def cmd_split(args):
    g = load_any_graph(args.graph)
    gt = read_ground_truth(args.ground_truth, g)
    split = make_leave_one_out(g, gt, args.seed)
    stamp = _stamp(args)
    os.makedirs(args.output, exist_ok=True)
    atomic_write_text(os.path.join(args.output, "train.tsv"),
                      f"# {stamp}\n" + format_triples(g, split.train))
    atomic_write_text(os.path.join(args.output, "train.graph"),
                      dumps_graph(split.train_graph(g), [stamp]))
    atomic_write_text(os.path.join(args.output, "heldout.tsv"),
                      format_held_out(split, g, [stamp]))


def cmd_train(args):
    g = load_any_graph(args.graph)
    base = Hyperparams()
    if args.config:
        base = load_config(args.config).hyperparams
    hp = _hp_from_args(args, base)
    m = train(g, hp)
    atomic_write_bytes(args.output, dumps_model(m, _stamp(args, hyperparams=asdict(hp))))


def cmd_build(args):
    g = load_any_graph(args.graph)
    m = load_model(args.model, g)
    e1, e2 = g.entity_id(args.pair[0]), g.entity_id(args.pair[1])
    qts = matching_query_types(g.entity_type(e1), g.entity_type(e2),
                               read_query_types(args.query_types, g))
    if not qts:
        raise ValidationError(f"no query type fits the pair types "
                              f"{g.entity_type_name(e1)}:{g.entity_type_name(e2)}")
    scorer = Scorer(args.scorer)
    if scorer is Scorer.BASELINE:
        ranked = baseline_rank(m, g, e1, e2, qts, args.k)
    else:
        cg = build_candidate_graph(m, g, e1, e2, qts, args.n_pred)
        ranked = rank_candidate_paths(cg, scorer, m)
    atomic_write_text(args.output, format_ranked([ranked], g, [_stamp(args)]))


def _prepare(cfg, stamp):
    """Graph and ground truth for an experiment config; writes the ground truth used."""
    if cfg.docs:
        g, docs = read_doc_triples(cfg.docs)
        qts = [parse_query_type(q, g) for q in cfg.query_types]
        gt = build_ground_truth(mine_one_hop_paths(docs, g), g, qts, cfg.min_freq,
                                cfg.min_paths, cfg.max_pairs)
    else:
        g = load_any_graph(cfg.graph)
        gt = read_ground_truth(cfg.ground_truth, g)
    os.makedirs(cfg.out_dir, exist_ok=True)
    atomic_write_text(os.path.join(cfg.out_dir, "ground_truth.tsv"),
                      format_ground_truth(gt, g, [stamp]))
    return g, gt


def cmd_eval_exp1(args):
    cfg = load_config(args.config)
    cfg.require("split_seed")
    stamp = _config_stamp(cfg)
    g, gt = _prepare(cfg, stamp)
    split = make_leave_one_out(g, gt, cfg.split_seed)
    atomic_write_text(os.path.join(cfg.out_dir, "heldout.tsv"), format_held_out(split, g, [stamp]))
    model = train(split.train_graph(g), cfg.hyperparams)
    atomic_write_bytes(os.path.join(cfg.out_dir, "model.bin"), dumps_model(model, stamp))
    report = evaluate_experiment1(model, g, gt, cfg.n_preds, cfg.cutoffs, args.threads)
    atomic_write_text(os.path.join(cfg.out_dir, "exp1_report.tsv"),
                      format_report_rows(report.rows(), [stamp]))
    atomic_write_text(os.path.join(cfg.out_dir, "exp1_report.txt"),
                      f"# {stamp}\n# pairs: {report.n_pairs}\n" + report.table())
    sys.stdout.write(report.table())


def cmd_eval_exp2(args):
    cfg = load_config(args.config)
    cfg.require("perm_seed")
    stamp = _config_stamp(cfg)
    g, gt = _prepare(cfg, stamp)
    model = train(g, cfg.hyperparams)
    atomic_write_bytes(os.path.join(cfg.out_dir, "model.bin"), dumps_model(model, stamp))
    report = evaluate_experiment2(model, g, gt, cfg.n_pred, cfg.cohorts, cfg.perm_seed,
                                  cfg.scorer, args.threads)
    atomic_write_text(os.path.join(cfg.out_dir, "exp2_report.tsv"),
                      format_report_rows(report.rows(), [stamp]))
    atomic_write_text(os.path.join(cfg.out_dir, "exp2_report.txt"), f"# {stamp}\n" + report.table())
    atomic_write_text(os.path.join(cfg.out_dir, "exp2_scatter.tsv"),
                      format_scatter(report, g, [stamp]))
    sys.stdout.write(report.table())


def cmd_synth(args):
    from . import synth

    cfg = synth.SynthConfig(seed=args.seed, entities_per_type=args.entities_per_type,
                            target_triples=args.target_triples, planted_pairs=args.planted_pairs)
    rows = synth.generate(cfg)
    stamp = _stamp(args)
    out = args.output
    os.makedirs(out, exist_ok=True)
    g, _ = doc_triples_from_records(rows)
    atomic_write_text(os.path.join(out, "docs.tsv"), f"# {stamp}\n" + synth.format_doc_triples(rows))
    atomic_write_text(os.path.join(out, "triples.tsv"), f"# {stamp}\n" + format_triples(g))
    for name, qts in (("exp1", synth.EXP1_QUERY_TYPES), ("exp2", synth.EXP2_QUERY_TYPES)):
        atomic_write_text(os.path.join(out, f"query_types_{name}.txt"),
                          f"# {stamp}\n" + "".join(q + "\n" for q in qts))
    hp = synth.DESK_HYPERPARAMS
    hp_section = {k: v for k, v in asdict(hp).items()}
    hp_section["seed"] = args.seed
    exp1 = {"data": {"docs": "docs.tsv", "query_types": ", ".join(synth.EXP1_QUERY_TYPES),
                     "min_freq": 2, "min_paths": 2, "max_pairs": 50},
            "hyperparams": hp_section,
            "experiment": {"n_preds": ", ".join(map(str, synth.DESK_N_PREDS)),
                           "cutoffs": "1, 10, 25, 100", "split_seed": args.seed},
            "output": {"dir": "out_exp1"}}
    exp2 = {"data": {"docs": "docs.tsv", "query_types": ", ".join(synth.EXP2_QUERY_TYPES),
                     "min_freq": 2, "min_paths": 10, "max_pairs": 30},
            "hyperparams": hp_section,
            "experiment": {"n_pred": 1500, "cohorts": "10, 20", "scorer": "cosine",
                           "perm_seed": args.seed},
            "output": {"dir": "out_exp2"}}
    for name, sections in (("exp1", exp1), ("exp2", exp2)):
        atomic_write_text(os.path.join(out, f"{name}.cfg"),
                          f"# {stamp}\n" + format_config(sections))


# -- argument parsing ----------------------------------------------------------------


def _add_hp_flags(p):
    for f in fields(Hyperparams):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=type(f.default),
                       default=None)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error code=E_USAGE message={json.dumps(message)}", file=sys.stderr)
        sys.exit(2)


def build_parser():
    p = _Parser(prog="kbcpath", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"kbcpath {__version__}")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for per-pair evaluation (1 = serial)")
    p.add_argument("--backend", choices=kernels.available_backends(), default=None,
                   help="training kernel (default: compiled when available)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="validate a triple file and serialize the graph")
    s.add_argument("triples")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("mine", help="mine 1-hop paths and write ranked ground truth")
    s.add_argument("docs")
    s.add_argument("--query-types", required=True, help="file or comma list of A-B-C")
    s.add_argument("--min-freq", type=int, default=2)
    s.add_argument("--min-paths", type=int, default=2)
    s.add_argument("--max-pairs", type=int, default=None)
    s.add_argument("--graph-out", default=None, help="also write the document graph here")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_mine)

    s = sub.add_parser("split", help="leave-one-out split for path recovery")
    s.add_argument("graph")
    s.add_argument("ground_truth")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("-o", "--output", required=True, help="output directory")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train", help="train the embedding model")
    s.add_argument("graph")
    s.add_argument("--config", default=None, help="take [hyperparams] from a run config")
    _add_hp_flags(s)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("build", help="build and rank paths for one entity pair")
    s.add_argument("model")
    s.add_argument("graph")
    s.add_argument("--pair", nargs=2, required=True, metavar=("SOURCE", "TARGET"))
    s.add_argument("--query-types", required=True)
    s.add_argument("--n-pred", type=int, default=100)
    s.add_argument("--scorer", choices=[x.value for x in Scorer], default="cosine")
    s.add_argument("-k", type=int, default=100, help="mids kept by the baseline")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_build)

    for name, func, text in (("eval-exp1", cmd_eval_exp1, "path recovery experiment"),
                             ("eval-exp2", cmd_eval_exp2, "known-path ranking experiment")):
        s = sub.add_parser(name, help=text)
        s.add_argument("config")
        s.set_defaults(func=func)

    s = sub.add_parser("synth", help="generate a seeded synthetic corpus and run configs")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--entities-per-type", type=int, default=100)
    s.add_argument("--target-triples", type=int, default=20000)
    s.add_argument("--planted-pairs", type=int, default=60)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    previous = kernels.active_backend()
    if args.backend:
        kernels.set_backend(args.backend)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        args.func(args)
    except KbcPathError as exc:
        print(f"error code={exc.code} message={json.dumps(str(exc))}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error code=E_IO message={json.dumps(str(exc))}", file=sys.stderr)
        return 2
    finally:
        kernels.set_backend(previous)
    return 0


if __name__ == "__main__":
    sys.exit(main())
