import re

import pytest

from kbcpath.cli import main

FAST = ["--dim", "8", "--epochs", "30", "--learning-rate", "0.02", "--seed", "0"]

TABLE1 = """\
CA1\tGene\tGene_Phenotype\tHypothermia\tPhenotype\t3
Hypothermia\tPhenotype\tDisease_Phenotype\tIschemia\tDisease\t2
CA1\tGene\tGene_Phenotype\tFever\tPhenotype\t1
Fever\tPhenotype\tDisease_Phenotype\tSepsis\tDisease\t1
CA2\tGene\tGene_Phenotype\tFever\tPhenotype\t1
CA2\tGene\tDisease_Gene\tSepsis\tDisease\t1
Hypoxia\tPhenotype\tDisease_Phenotype\tIschemia\tDisease\t1
CA2\tGene\tGene_Phenotype\tHypoxia\tPhenotype\t1
"""


def run(*argv):
    return main([str(a) for a in argv])


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def error_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    m = re.fullmatch(r'error code=(E_[A-Z_]+) message=".*"', err[0])
    assert m, err
    return m.group(1)


@pytest.fixture
def table1(tmp_path):
    p = tmp_path / "t1.tsv"
    p.write_text(TABLE1)
    return tmp_path, p


def test_table1_build(table1):
    d, triples = table1
    assert run("ingest", triples, "-o", d / "g.graph") == 0
    assert run("train", d / "g.graph", *FAST, "-o", d / "m.bin") == 0
    for scorer in ("cosine", "predrank", "baseline"):
        out = d / f"ranked_{scorer}.tsv"
        assert run("build", d / "m.bin", d / "g.graph", "--pair", "CA1", "Ischemia",
                   "--query-types", "Gene-Phenotype-Disease", "--n-pred", 10,
                   "--scorer", scorer, "-o", out) == 0
        rows = [line.split("\t") for line in out.read_text().splitlines() if not line.startswith("#")]
        mids = {r[6] for r in rows}
        assert "Hypothermia" in mids
        assert mids <= {"Hypothermia", "Fever", "Hypoxia"}
        assert all(r[0] == "CA1" and r[1] == "Ischemia" and r[4] == scorer for r in rows)


def test_outputs_carry_provenance(table1):
    d, triples = table1
    run("ingest", triples, "-o", d / "g.graph")
    run("train", d / "g.graph", *FAST, "-o", d / "m.bin")
    run("build", d / "m.bin", d / "g.graph", "--pair", "CA1", "Ischemia",
        "--query-types", "Gene-Phenotype-Disease", "-o", d / "r.tsv")
    assert re.search(r"# kbcpath \S+ config=[0-9a-f]{16}", (d / "g.graph").read_text())
    assert re.match(r"# kbcpath \S+ config=[0-9a-f]{16}", (d / "r.tsv").read_text())
    assert b"config=" in read(d / "m.bin")


def test_byte_identical_reruns(table1):
    d, triples = table1
    outs = []
    for rep in range(2):
        o = d / f"run{rep}"
        o.mkdir()
        run("ingest", triples, "-o", o / "g.graph")
        run("train", o / "g.graph", *FAST, "-o", o / "m.bin")
        run("build", o / "m.bin", o / "g.graph", "--pair", "CA1", "Ischemia",
            "--query-types", "Gene-Phenotype-Disease", "-o", o / "r.tsv")
        outs.append(o)
    # input paths differ between the two runs, so compare the model and ranked rows
    assert read(outs[0] / "m.bin").split(b"config=")[0] == read(outs[1] / "m.bin").split(b"config=")[0]
    strip = lambda p: [x for x in p.read_text().splitlines() if not x.startswith("# kbcpath")]
    assert strip(outs[0] / "r.tsv") == strip(outs[1] / "r.tsv")
    assert strip(outs[0] / "g.graph") == strip(outs[1] / "g.graph")


def test_missing_file(tmp_path, capsys):
    assert run("ingest", tmp_path / "nope.tsv", "-o", tmp_path / "g") == 2
    assert error_line(capsys) == "E_IO"
    assert not (tmp_path / "g").exists()


def test_parse_error(tmp_path, capsys):
    p = tmp_path / "bad.tsv"
    p.write_text("a\tGene\tDrug_Gene\n")
    assert run("ingest", p, "-o", tmp_path / "g") == 2
    assert error_line(capsys) == "E_PARSE"


def test_incompatible_model(table1, capsys):
    d, triples = table1
    run("ingest", triples, "-o", d / "g.graph")
    run("train", d / "g.graph", *FAST, "-o", d / "m.bin")
    other = d / "other.tsv"
    other.write_text("X\tGene\tGene_Phenotype\tY\tPhenotype\t1\n")
    run("ingest", other, "-o", d / "o.graph")
    capsys.readouterr()
    assert run("build", d / "m.bin", d / "o.graph", "--pair", "X", "Y",
               "--query-types", "Gene-Phenotype-Disease", "-o", d / "r.tsv") == 2
    assert error_line(capsys) == "E_INCOMPATIBLE"


def test_unknown_entity_and_usage(table1, capsys):
    d, triples = table1
    run("ingest", triples, "-o", d / "g.graph")
    run("train", d / "g.graph", *FAST, "-o", d / "m.bin")
    capsys.readouterr()
    assert run("build", d / "m.bin", d / "g.graph", "--pair", "CA9", "Ischemia",
               "--query-types", "Gene-Phenotype-Disease", "-o", d / "r.tsv") == 2
    assert error_line(capsys) == "E_LOOKUP"
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 2
    assert error_line(capsys) == "E_USAGE"


def test_config_requires_seed(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    (tmp_path / "docs.tsv").write_text("")
    cfg.write_text("[data]\ndocs = docs.tsv\nquery_types = Gene-Drug-Disease\n[hyperparams]\ndim = 4\n")
    assert run("eval-exp1", cfg) == 2
    assert error_line(capsys) == "E_VALIDATION"


def small_synth(d):
    assert run("synth", "--seed", 3, "--entities-per-type", 20, "--target-triples", 1200,
               "--planted-pairs", 10, "-o", d) == 0
    for name in ("exp1.cfg", "exp2.cfg"):
        text = (d / name).read_text()
        text = re.sub(r"dim = \d+", "dim = 8", text)
        text = re.sub(r"epochs = \d+", "epochs = 3", text)
        (d / name).write_text(text)


def test_synth_pipeline_end_to_end(tmp_path):
    d = tmp_path / "s"
    small_synth(d)
    assert run("eval-exp1", d / "exp1.cfg") == 0
    assert run("eval-exp2", d / "exp2.cfg") == 0
    for f in ("out_exp1/exp1_report.tsv", "out_exp1/exp1_report.txt", "out_exp1/model.bin",
              "out_exp1/heldout.tsv", "out_exp1/ground_truth.tsv", "out_exp2/exp2_report.tsv",
              "out_exp2/exp2_scatter.tsv"):
        assert (d / f).stat().st_size > 0, f
    rows = [x.split("\t") for x in (d / "out_exp1/exp1_report.tsv").read_text().splitlines()
            if not x.startswith("#")]
    assert {r[2] for r in rows} == {"predrank", "cosine", "baseline"}
    # mine + split + train on the same corpus through the individual commands
    assert run("mine", d / "docs.tsv", "--query-types", d / "query_types_exp1.txt",
               "--max-pairs", 5, "--graph-out", d / "docs.graph", "-o", d / "gt.tsv") == 0
    assert run("split", d / "docs.graph", d / "gt.tsv", "--seed", 1, "-o", d / "split") == 0
    assert run("train", d / "split/train.graph", "--config", d / "exp1.cfg", "-o", d / "m.bin") == 0


def test_threads_match_serial(tmp_path):
    d = tmp_path / "s"
    small_synth(d)
    assert run("eval-exp1", d / "exp1.cfg") == 0
    serial = read(d / "out_exp1/exp1_report.tsv")
    assert run("--threads", 4, "eval-exp1", d / "exp1.cfg") == 0
    assert read(d / "out_exp1/exp1_report.tsv") == serial


def test_build_ignores_query_types_of_other_pairs(table1, capsys):
    d, triples = table1
    run("ingest", triples, "-o", d / "g.graph")
    run("train", d / "g.graph", *FAST, "-o", d / "m.bin")
    qt = "Gene-Phenotype-Disease,Phenotype-Gene-Disease"
    assert run("build", d / "m.bin", d / "g.graph", "--pair", "CA1", "Ischemia",
               "--query-types", qt, "-o", d / "r.tsv") == 0
    assert run("build", d / "m.bin", d / "g.graph", "--pair", "CA1", "Fever",
               "--query-types", qt, "-o", d / "r2.tsv") == 2
    assert error_line(capsys) == "E_VALIDATION"
