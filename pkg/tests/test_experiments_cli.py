import csv
import json
from fractions import Fraction

import pytest

from soscert import catalog
from soscert.certificates import FEASIBLE, INFEASIBLE
from soscert.cli import main
from soscert.experiments import (
    CertificateSink,
    ExperimentError,
    degeneration_trace,
    denominator_search,
    diagonal_multiplier,
    factored_condition,
    lambda_probe,
    lambda_scan,
    parse_grid,
    quartic_condition,
    resolve_form,
    run_report,
    scaled_product,
    triangle_grid,
    triangle_triples,
)
from soscert.forms import mul, parse_form, scale_variables
from soscert.sos import check_sos

SPHERE = parse_form("x^2 + y^2 + z^2", 3)


def test_conditions_agree_identically():
    for a, b, c in triangle_triples(parse_grid("1/2:3:1/2")):
        assert quartic_condition(a, b, c) == factored_condition(a, b, c)


def test_grid_parsing():
    assert parse_grid("1:3") == [1, 2, 3]
    assert parse_grid("1/2:1:1/4") == [Fraction(1, 2), Fraction(3, 4), Fraction(1)]
    assert parse_grid("1,5/2") == [1, Fraction(5, 2)]
    with pytest.raises(ExperimentError):
        parse_grid("0:2")
    # one triple per ray
    assert (2, 2, 2) not in triangle_triples(parse_grid("1:2"))


def test_triangle_examples():
    sink = CertificateSink()
    res = triangle_grid("M", triples=[(1, 1, 1), (3, 1, 1), (2, 1, 1)], sink=sink)
    by = {(c.a, c.b, c.c): c for c in res.cells}
    assert by[(1, 1, 1)].status == FEASIBLE and by[(1, 1, 1)].agree
    assert by[(3, 1, 1)].status == INFEASIBLE and by[(3, 1, 1)].agree
    assert by[(2, 1, 1)].status == FEASIBLE and by[(2, 1, 1)].boundary and by[(2, 1, 1)].quartic_sign == 0
    assert sink.ok
    with pytest.raises(ExperimentError):
        triangle_grid("stengle")


def test_lambda_scan_errors_and_history():
    M = catalog.get("M").form
    with pytest.raises(ExperimentError):
        lambda_scan(M, SPHERE, (3, 4), Fraction(1, 4))  # Infeasible at both ends
    with pytest.raises(ExperimentError):
        lambda_scan(M, SPHERE, (1, 4), 0)
    res = lambda_scan(M, SPHERE, (1, 4), Fraction(1, 2))
    lo, hi = res.boundary_bracket
    assert lo <= 2 <= hi and hi - lo <= Fraction(1, 2) and res.monotone()
    assert all(s in (FEASIBLE, INFEASIBLE) for _, s in res.history)
    d = res.as_dict()
    assert d["boundary_bracket"][0] == [str(lo.numerator), str(lo.denominator)]


def test_finite_multiplier_sets_fail_for_large_lambda():
    # every multiplier from a fixed finite set fails once lambda is large
    q = scale_variables(catalog.get("M").form, [1, 8, 8])
    triples = triangle_triples(parse_grid("1:3"))[:10]
    statuses = [check_sos(mul(diagonal_multiplier(a, b, c), q)).status for a, b, c in triples]
    assert statuses == [INFEASIBLE] * 10
    assert check_sos(scaled_product(catalog.get("M").form, SPHERE, 8)).status == INFEASIBLE


def test_denominator_search_examples():
    assert denominator_search(catalog.get("M").form, 2).N == 1
    assert denominator_search(catalog.get("S").form, 2).N == 1
    r = denominator_search(parse_form("(x^2 + y^2)^2", 2), 2)
    assert r.N == 0 and r.tried == [(0, FEASIBLE)]


def test_degeneration_examples():
    M = catalog.get("M").form
    rs = [1, 2, 4, 8]
    trace = degeneration_trace(SPHERE, M, rs)
    assert [s for _, s in trace.entries] == [lambda_probe(M, SPHERE, r).status for r in rs]
    assert all(s == INFEASIBLE for _, s in degeneration_trace(parse_form("x^2", 3), M, rs).entries)
    sq = mul(SPHERE, SPHERE)
    assert all(s == FEASIBLE for _, s in degeneration_trace(SPHERE, sq, rs).entries)
    with pytest.raises(ExperimentError):
        degeneration_trace(parse_form("x^2", 2), M, rs)


def test_resolve_form(tmp_path):
    assert resolve_form("M") == catalog.get("M").form
    f = tmp_path / "p.form"
    f.write_text("# a comment\nx^2 + y^2\n")
    assert resolve_form(str(f)) == parse_form("x^2 + y^2", 2)
    assert resolve_form("x1^2 + x4^2").n_vars == 4
    with pytest.raises(ExperimentError):
        resolve_form("x^2 +")


def test_report_plumbing(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text('''
[settings]
output = "out"

[[experiment]]
kind = "lambda_scan"
form = "M"
tolerance = "1/4"

[[experiment]]
kind = "check_sos"
form = "x^2*y^2 + y^2*z^2 + z^2*x^2"

[[experiment]]
kind = "polya"
form = "x^4 - x^2*y^2 + y^4"
mode = "even"
depth = 4
''')
    report, code = run_report(cfg)
    assert code == 0
    out = tmp_path / "out"
    assert (out / "report.json").exists()
    names = [e["file"] for e in report["experiments"]]
    scan = json.loads((out / names[0]).read_text())
    assert scan["result"]["boundary_bracket"] is not None
    rows = list(csv.DictReader(open(out / "summary.csv")))
    assert rows and {"experiment", "item", "status"} <= set(rows[0])
    assert report["certificates"]["count"] > 0 and not report["certificates"]["failures"]
    assert len(list((out / "certificates").glob("*.json"))) == report["certificates"]["count"]


def test_report_empty_and_errors(tmp_path):
    empty = tmp_path / "empty.toml"
    empty.write_text("[settings]\n")
    report, code = run_report(empty, tmp_path / "o1")
    assert code == 0 and report["experiments"] == []
    bad = tmp_path / "bad.toml"
    bad.write_text('[[experiment]]\nkind = "lambda_scan"\nform = "nope"\n')
    assert main(["report", "--config", str(bad)]) == 2
    broken = tmp_path / "broken.toml"
    broken.write_text("[[experiment]\n")
    assert main(["report", "--config", str(broken)]) == 2
    unknown = tmp_path / "unknown.toml"
    unknown.write_text('[[experiment]]\nkind = "dance"\n')
    assert main(["report", "--config", str(unknown)]) == 2


def test_cli_commands(capsys, tmp_path):
    assert main(["catalog", "list"]) == 0
    assert "Motzkin" in capsys.readouterr().out
    assert main(["check-sos", "M", "--save", str(tmp_path)]) == 0
    assert "Infeasible" in capsys.readouterr().out
    assert list(tmp_path.glob("*.json"))
    assert main(["check-sos", "x^2 + y^2", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["status"] == FEASIBLE
    assert main(["polya", "--form", "x^2 - x*y + y^2", "--mode", "simplex", "--depth", "4"]) == 0
    assert "N measured" in capsys.readouterr().out
    assert main(["degeneration", "--h", "x^2+y^2+z^2", "--p", "M", "--r", "1,4"]) == 0
    out = capsys.readouterr().out
    assert "r=1  Feasible" in out and "r=4  Infeasible" in out
    assert main(["denominator-search", "--form", "M", "--nmax", "1"]) == 0
    assert main(["check-sos", "x^3", "--vars", "2"]) == 2
    assert main(["lambda-scan", "--form", "Q"]) == 2
    assert main([]) == 2
