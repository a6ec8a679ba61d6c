"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every certificate produced here goes through a shared CertificateSink that
writes it to disk and re-checks the file with the stand-alone checker; the
last test fails if any of those re-checks failed.
"""

import random
import time
from collections import Counter
from fractions import Fraction

import pytest
import sympy

from soscert import catalog
from soscert.certificates import FEASIBLE, INFEASIBLE, extract_squares
from soscert.checker import check_file
from soscert.experiments import (
    CertificateSink,
    degeneration_trace,
    lambda_probe,
    lambda_scan,
    stengle_power_check,
    triangle_grid,
)
from soscert.forms import Form, divides, monomials_of_degree, parse_form
from soscert.polya import even_denominator_search, polya_bound, polya_exponent_search, sphere_extrema
from soscert.sos import SosOptions, check_sos

# limits pinned from the acceptance criteria
CLASSIC_SECONDS = 10
SCAN_SECONDS = 300
PRODUCT_SECONDS = 60
POWER_SECONDS = 1800
SCAN_TOL = Fraction(1, 64)
GRID_MARGIN = Fraction(1, 100)
GRID_MIN_CELLS = 200

SPHERE = parse_form("x^2 + y^2 + z^2", 3)


@pytest.fixture(scope="module")
def sink(tmp_path_factory):
    return CertificateSink(tmp_path_factory.mktemp("certificates"))


def report(log, name, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip()
    print(line)
    log.append(line)
    assert ok, line


def run(sink, tag, p, options=None):
    t0 = time.perf_counter()
    v = check_sos(p, options)
    secs = time.perf_counter() - t0
    sink.record(tag, p, v)
    return v, secs


def test_c01_classic_forms_infeasible(sink, criterion_log):
    details, ok = [], True
    for key in ("M", "R", "S", "stengle"):
        v, secs = run(sink, f"c01_{key}", catalog.get(key).form)
        good = v.status == INFEASIBLE and v.dual is not None and secs < CLASSIC_SECONDS
        ok &= good
        details.append(f"{key}:{v.status}/{secs:.2f}s")
    report(criterion_log, "C1 classic non-sos forms", ok, " ".join(details))


@pytest.mark.parametrize("family", ["M", "R", "S"])
def test_c02_lambda_boundary(family, sink, criterion_log):
    p = catalog.get(family).form
    t0 = time.perf_counter()
    res = lambda_scan(p, SPHERE, (1, 4), SCAN_TOL, sink=sink, form_key=f"c02_{family}")
    at2 = lambda_probe(p, SPHERE, 2, sink=sink, tag=f"c02_{family}").status
    past = lambda_probe(p, SPHERE, Fraction(33, 16), sink=sink, tag=f"c02_{family}").status
    secs = time.perf_counter() - t0
    lo, hi = res.boundary_bracket
    ok = (res.honest and lo <= 2 <= hi and hi - lo <= SCAN_TOL and at2 == FEASIBLE and past == INFEASIBLE
          and res.monotone() and secs < SCAN_SECONDS)
    report(criterion_log, f"C2 lambda boundary {family}", ok,
           f"bracket=[{lo},{hi}] lambda=2:{at2} lambda=33/16:{past} {secs:.1f}s")


@pytest.mark.parametrize("family", ["M", "R", "S"])
def test_c03_triangle_condition(family, sink, criterion_log):
    res = triangle_grid(family, "1:7", margin=GRID_MARGIN, sink=sink)
    interior = res.interior
    signs = all(c.quartic_sign == c.factored_sign for c in res.cells)
    ok = len(interior) >= GRID_MIN_CELLS and res.agreement() == 1.0 and signs
    report(criterion_log, f"C3 triangle condition {family}", ok,
           f"cells={len(interior)} agreement={res.agreement():.3f} factored_sign_match={signs}")


def test_c04_choi_lam_product(sink, criterion_log):
    v, secs = run(sink, "c04_S_product", catalog.get("S_product").form, SosOptions(basis="full"))
    size = v.diagnostics.get("basis_size")
    ok = v.status == FEASIBLE and v.certificate is not None and size == 28 and secs < PRODUCT_SECONDS
    report(criterion_log, "C4 S(x,y,z)S(x,z,y) is sos", ok, f"{v.status} basis={size} {secs:.2f}s")


def test_c05_stengle_powers(sink, criterion_log):
    t0 = time.perf_counter()
    out = stengle_power_check([0, 1], sink=sink, basis="full")
    secs = time.perf_counter() - t0
    by_exp = {e["exponent"]: e for e in out["entries"]}
    ok = (by_exp[2]["status"] == FEASIBLE and by_exp[3]["status"] == INFEASIBLE
          and by_exp[3]["basis_size"] == 55 and out["all_expected"] and secs < POWER_SECONDS)
    report(criterion_log, "C5 Stengle powers", ok,
           " ".join(f"p^{k}:{e['status']}/{e['seconds']}s" for k, e in sorted(by_exp.items())))


def _random_form(rng, n, d, lo=-3, hi=3):
    return Form(n, {e: rng.randint(lo, hi) for e in monomials_of_degree(n, d)})


def _random_linear(rng, n):
    while True:
        c = [rng.randint(-3, 3) for _ in range(n)]
        if any(c):
            return Form.linear(c)


def test_c06_peeling(sink, criterion_log):
    rng = random.Random(2024)
    sos_ok = 0
    for i in range(50):
        n = rng.choice([2, 3])
        q = Form(n)
        for _ in range(rng.randint(1, 6)):
            q = q + _random_form(rng, n, 2) ** 2
        if q.is_zero():
            q = Form.linear([1] * n) ** 4
        ell = _random_linear(rng, n)
        v, _ = run(sink, f"c06_sos_{i}", ell * ell * q)
        if v.status == FEASIBLE and all(divides(ell, g) for _, g in extract_squares(v.certificate)):
            sos_ok += 1
    keys = ["M", "R", "S", "S_swap", "stengle"]
    non_ok = 0
    for i in range(10):
        ell = _random_linear(rng, 3)
        v, _ = run(sink, f"c06_non_{i}", ell * ell * catalog.get(keys[i % 5]).form)
        non_ok += v.status == INFEASIBLE
    report(criterion_log, "C6 peeling", sos_ok == 50 and non_ok == 10, f"sos {sos_ok}/50 non-sos {non_ok}/10")


_T = sympy.Symbol("t")


def _nonneg_on_line(coeffs_high_first) -> bool:
    """Univariate oracle: every real root has even multiplicity and the sign elsewhere is positive."""
    poly = sympy.Poly(coeffs_high_first, _T)
    if poly.is_zero:
        return True
    if any(m % 2 for m in Counter(sympy.real_roots(poly)).values()):
        return False
    for k in range(-10, 11):
        v = poly.eval(k)
        if v != 0:
            return v > 0
    return True


def binary_psd_oracle(p: Form) -> bool:
    m = p.degree
    f = [p.coeff((k, m - k)) for k in range(m, -1, -1)]  # p(t, 1)
    g = [p.coeff((m - k, k)) for k in range(m, -1, -1)]  # p(1, t)
    return _nonneg_on_line(f) and _nonneg_on_line(g)


def _random_binary_sextic(rng, i):
    def lin():
        return Form.linear([rng.randint(-3, 3), rng.randint(1, 3)])

    kind = i % 4
    if kind == 0:
        p = Form(2, {(6 - k, k): rng.randint(-5, 5) for k in range(7)})
    elif kind == 1:
        p = lin() ** 2 * lin() ** 2 * (lin() ** 2 + lin() ** 2)
    elif kind == 2:
        p = lin() ** 2 * (lin() ** 4 + Form(2, {(4 - k, k): rng.randint(-2, 2) for k in range(5)}))
    else:
        p = (lin() ** 2 + lin() ** 2) * (lin() ** 2 + lin() ** 2) * (lin() ** 2 + Form(2, {(2, 0): rng.randint(-1, 1), (0, 2): 1}))
    return p if not p.is_zero() else Form(2, {(6, 0): 1, (0, 6): 1})


def test_c07_binary_sextics(sink, criterion_log):
    rng = random.Random(11)
    agree, tally = 0, Counter()
    for i in range(100):
        p = _random_binary_sextic(rng, i)
        psd = binary_psd_oracle(p)
        v, _ = run(sink, f"c07_{i}", p)
        tally[(psd, v.status)] += 1
        agree += v.status == (FEASIBLE if psd else INFEASIBLE)
    report(criterion_log, "C7 binary sextics vs root oracle", agree == 100,
           f"agree {agree}/100 psd={sum(n for (k, _), n in tally.items() if k)}")


def test_c08_polya(criterion_log):
    bound = polya_bound(3, 6, Fraction(1, 3))
    exponent = polya_exponent_search(parse_form("x^2 - x*y + y^2", 2), 20, "strict")
    rng = random.Random(5)
    found = 0
    for _ in range(10):
        while True:
            f = {e: rng.randint(-4, 6) for e in monomials_of_degree(3, 3)}
            p = Form(3, {tuple(2 * k for k in e): c for e, c in f.items()})
            est = sphere_extrema(p, depth=6)
            if est.epsilon_lower is not None and est.epsilon_lower > 0:
                break
        b = polya_bound(3, 6, est.epsilon_lower)
        n = even_denominator_search(p, b)
        found += n is not None and n <= b
    ok = bound == 93 and exponent == 3 and found == 10
    report(criterion_log, "C8 Polya machinery", ok, f"bound(3,6,1/3)={bound} exponent={exponent} even {found}/10")


def test_c09_four_squares(criterion_log):
    rng = random.Random(9)
    good = 0
    for _ in range(100):
        n, d = rng.choice([(2, 1), (2, 2), (3, 1), (3, 2)])
        a = [_random_form(rng, n, d, -4, 4) for _ in range(4)]
        b = [_random_form(rng, n, d, -4, 4) for _ in range(4)]
        c = catalog.four_square_compose(a, b)
        good += catalog.sum_of_squares(c) == catalog.sum_of_squares(a) * catalog.sum_of_squares(b)
    report(criterion_log, "C9 four-square identity", good == 100, f"{good}/100")


def test_degeneration_trace_matches_scan(sink, criterion_log):
    M = catalog.get("M").form
    trace = degeneration_trace(SPHERE, M, [1, 2, 4, 8], sink=sink, tag="trace_M")
    statuses = [s for _, s in trace.entries]
    probes = [lambda_probe(M, SPHERE, r, sink=sink, tag="trace_probe_M").status for r, _ in trace.entries]
    ok = statuses == [FEASIBLE, FEASIBLE, INFEASIBLE, INFEASIBLE] and statuses == probes
    report(criterion_log, "Degeneration trace equals lambda probes (lambda = r)", ok,
           f"trace={statuses} probes={probes}")


def test_c10_certificates_recheck(sink, criterion_log):
    files = [r["path"] for r in sink.records if r["path"]]
    rechecked = sum(check_file(path)[0] for path in files)
    ok = len(files) > 0 and sink.ok and rechecked == len(files)
    report(criterion_log, "C10 certificate soundness", ok,
           f"{rechecked}/{len(files)} files re-verified, {len(sink.failures)} failures")
