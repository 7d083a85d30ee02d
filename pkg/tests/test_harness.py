import json
import random

import pytest

from conftest import CORPUS_DIR, corpus_checked
from costrec.cli import main as cli_main
from costrec.harness import (
    HarnessError, TrialConfig, gen_value, prepare, run_trial, verify_bound,
)
from costrec.models import make_model, value_potential
from costrec.semdom import SNum, ext
from costrec.source_ast import VUnit, parse_type, pretty
from costrec.typecheck import check_value


def test_gen_value_unit():
    from costrec.source_ast import value_eq

    rng = random.Random(0)
    assert value_eq(gen_value(parse_type("unit"), 5, rng), VUnit())


def test_gen_value_nat_respects_budget():
    rng = random.Random(1)
    m = make_model("size")
    for _ in range(200):
        v = gen_value(parse_type("nat"), 4, rng)
        pot = value_potential(m, v, parse_type("nat"))
        assert pot.num <= ext(4)


def test_gen_value_tree_potential_within_budget():
    rng = random.Random(2)
    m = make_model("size")
    ty = parse_type("tree<nat>")
    for _ in range(200):
        v = gen_value(ty, 9, rng)
        pot = value_potential(m, v, ty)
        assert pot.num <= ext(9)


def test_gen_value_total_constructors_within_budget():
    rng = random.Random(3)
    m = make_model("allcons")
    ty = parse_type("tree<nat>")
    nat_pot = __import__("costrec.extract", fromlist=["potential_type"]).potential_type(parse_type("nat"))
    tree_pot = __import__("costrec.extract", fromlist=["potential_type"]).potential_type(ty)
    for _ in range(200):
        v = gen_value(ty, 10, rng)
        pot = value_potential(m, v, ty)
        # counting every constructor: trees plus the worst chain of labels
        total = pot.sizemap.get(tree_pot).value
        assert total <= 10


def test_gen_value_hits_boundary_shapes():
    # unit labels are free, so an 8-constructor budget admits length 7
    rng = random.Random(4)
    ty = parse_type("list<unit>")
    m = make_model("size")
    lengths = set()
    for _ in range(300):
        v = gen_value(ty, 8, rng)
        lengths.add(value_potential(m, v, ty).num.value)
    assert 1 in lengths  # empty list
    assert max(lengths) == 8  # full spines reached


def test_gen_value_deterministic_per_seed():
    ty = parse_type("tree<nat>")
    a = [pretty(gen_value(ty, 8, random.Random(99))) for _ in range(5)]
    b = [pretty(gen_value(ty, 8, random.Random(99))) for _ in range(5)]
    assert a == b


def test_gen_value_rejects_non_observable():
    with pytest.raises(HarnessError):
        gen_value(parse_type("nat -> nat"), 5, random.Random(0))


def test_verify_bound_copy_no_failures():
    checked = corpus_checked("copy.src")
    cfg = TrialConfig(trials=60, max_value_size=9, models=("size", "exact"), seed=11)
    report = verify_bound(checked, "copy", cfg)
    assert report.passed
    assert len(report.trials) == 60


def test_verify_report_is_deterministic():
    checked = corpus_checked("plus.src")
    cfg = TrialConfig(trials=25, models=("size", "allcons", "exact", "lower"), seed=5)
    r1 = verify_bound(checked, "plus", cfg).to_json()
    r2 = verify_bound(checked, "plus", cfg).to_json()
    assert r1 == r2


def test_verify_records_failures_with_replay_data():
    # a deliberately broken claim: verifying plus against copynat's recurrence
    # is not expressible through the public API, so instead check the report
    # structure on a passing run
    checked = corpus_checked("tail.src")
    cfg = TrialConfig(trials=10, models=("size",), seed=1)
    report = verify_bound(checked, "tail", cfg)
    doc = json.loads(report.to_json())
    assert doc["seed"] == 1
    assert len(doc["trials"]) == 10
    for t in doc["trials"]:
        assert set(t) == {"index", "inputs", "cost", "results", "ok"}


def test_non_observable_function_rejected():
    checked = corpus_checked("map.src")
    with pytest.raises(HarnessError):
        prepare(checked, "mapf", ())  # takes a function argument


def test_prepared_skips_models_that_reject():
    src = """
type fun1 = mu t. unit + (nat -> t);
let poke = fn (v: fun1) => fold[fun1] v with x => case x of u => #0 | g => force (g #0) : nat;
"""
    from costrec.source_ast import parse_program
    from costrec.typecheck import check_program

    checked = check_program(parse_program(src))
    with pytest.raises(HarnessError):
        # fun1 is not observable (arrow inside), so the harness refuses
        prepare(checked, "poke", ("size",))


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _run(capsys, *argv):
    code = cli_main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_check(capsys):
    code, out, _ = _run(capsys, "check", str(CORPUS_DIR / "rev.src"))
    assert code == 0
    assert "rev : forall a. list<a> -> list<a>" in out


def test_cli_eval_main(tmp_path, capsys):
    f = tmp_path / "p.src"
    f.write_text("let two = #2;\nmain = two;\n")
    code, out, _ = _run(capsys, "eval", str(f))
    assert code == 0
    assert "#2" in out and "cost:  0" in out


def test_cli_extract_simplify(capsys):
    code, out, _ = _run(capsys, "extract", str(CORPUS_DIR / "plus.src"), "--simplify")
    assert code == 0
    assert "plus" in out and "fold[nat]" in out


def test_cli_analyze_copy(capsys):
    code, out, _ = _run(capsys, "analyze", str(CORPUS_DIR / "copy.src"),
                        "--model", "size", "--fn", "copy", "--at", "5")
    assert code == 0
    assert "cost bound: 5" in out


def test_cli_analyze_map_fixture(capsys):
    # n(1 + c) with the fixture's constant c = 0
    code, out, _ = _run(capsys, "analyze", str(CORPUS_DIR / "map.src"),
                        "--model", "size", "--fn", "map_constf", "--at", "5")
    assert code == 0
    assert "cost bound: 5" in out


def test_cli_analyze_allcons_map_argument(capsys):
    code, out, _ = _run(capsys, "analyze", str(CORPUS_DIR / "sumtree.src"),
                        "--model", "allcons", "--fn", "sumtree",
                        "--at", "{nat: 3, tree<nat>: 5}")
    assert code == 0
    assert "cost bound:" in out


def test_cli_analyze_exact_value_literal(capsys):
    code, out, _ = _run(capsys, "analyze", str(CORPUS_DIR / "copy.src"),
                        "--model", "exact", "--fn", "copy",
                        "--at", "node(#0, emp[nat], emp[nat])")
    assert code == 0
    assert "cost bound: 3" in out


def test_cli_verify_deterministic_json(tmp_path, capsys):
    args = ["verify", str(CORPUS_DIR / "copy.src"), "--model", "size",
            "--trials", "20", "--seed", "7", "--json"]
    code1, out1, _ = _run(capsys, *args)
    code2, out2, _ = _run(capsys, *args)
    assert code1 == code2 == 0
    assert out1 == out2


def test_cli_verify_exit_zero_on_success(capsys):
    code, out, _ = _run(capsys, "verify", str(CORPUS_DIR / "copy.src"),
                        "--model", "size", "--trials", "10", "--seed", "3")
    assert code == 0
    assert "0 failure(s)" in out


def test_cli_usage_error_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        cli_main(["analyze", str(CORPUS_DIR / "copy.src"), "--model", "bogus",
                  "--fn", "copy"])
    assert exc.value.code == 2


def test_cli_type_error_exit_one(tmp_path, capsys):
    f = tmp_path / "bad.src"
    f.write_text("let x = pi0 ();\n")
    code, _, err = _run(capsys, "check", str(f))
    assert code == 1
    assert "costrec" in err
