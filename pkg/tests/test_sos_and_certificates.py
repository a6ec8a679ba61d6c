import json
from fractions import Fraction

import pytest

from soscert import catalog
from soscert.certificates import (
    FEASIBLE,
    INFEASIBLE,
    DualCertificate,
    GramCertificate,
    certificate_from_json,
    certificate_to_json,
    extract_squares,
    load_certificate,
    save_certificate,
    verify_dual_exact,
    verify_gram_exact,
)
from soscert.checker import check_certificate_json, check_file
from soscert.checker import main as checker_main
from soscert.forms import Form, FormError, mul, parse_form, power
from soscert.sos import SosOptions, check_sos, sign_symmetry_blocks
from soscert.basis import half_newton_basis


def P(text, n=3):
    return parse_form(text, n)


@pytest.fixture(scope="module")
def motzkin_dual():
    M = catalog.get("M").form
    v = check_sos(M)
    assert v.status == INFEASIBLE
    return M, v.dual


@pytest.fixture(scope="module")
def sphere_motzkin_gram():
    p = mul(P("x^2 + y^2 + z^2"), catalog.get("M").form)
    v = check_sos(p)
    assert v.status == FEASIBLE
    return p, v.certificate


@pytest.mark.parametrize("text,n", [("x^2 + y^2", 2), ("x^4 + y^4 + z^4", 3), ("(x - y)^2*(x + 2*z)^4", 3),
                                    ("x^2*y^2 + y^2*z^2 + z^2*x^2", 3), ("0*x", 2)])
def test_feasible_examples(text, n):
    p = P(text, n)
    v = check_sos(p)
    assert v.status == FEASIBLE
    if not p.is_zero():
        assert verify_gram_exact(p, v.certificate)


@pytest.mark.parametrize("text,n", [("x*y", 2), ("x^2 - y^2", 2), ("x^4 - x^2*y^2", 2), ("-x^2", 1)])
def test_infeasible_examples(text, n):
    p = P(text, n)
    v = check_sos(p)
    assert v.status == INFEASIBLE


def test_odd_degree_is_an_error():
    with pytest.raises(FormError):
        check_sos(P("x^3", 2))


def test_dual_certificate_is_valid(motzkin_dual):
    M, dual = motzkin_dual
    assert verify_dual_exact(M, dual)
    assert dual.value(M) < 0


def test_tampered_gram_rejected(sphere_motzkin_gram):
    p, cert = sphere_motzkin_gram
    g = [list(r) for r in cert.gram]
    g[0][0] += 1
    assert not verify_gram_exact(p, GramCertificate(cert.basis, tuple(tuple(r) for r in g)))
    # a Gram matrix for the right form but indefinite
    assert not verify_gram_exact(P("x*y", 2), GramCertificate(half_newton_basis(P("x^2 + y^2", 2)),
                                                               ((Fraction(0), Fraction(1, 2)),
                                                                (Fraction(1, 2), Fraction(0)))))


def test_tampered_dual_rejected(motzkin_dual):
    M, dual = motzkin_dual
    f = dict(dual.functional)
    key = next(e for e in M.support() if M.coeff(e) < 0)
    f[key] = f.get(key, Fraction(0)) - 10**6  # flips the sign of y(M)
    assert not verify_dual_exact(M, DualCertificate(dual.basis, f, dual.exclusions))
    assert not verify_dual_exact(M, DualCertificate(dual.basis, dual.functional, {}) if dual.exclusions else
                                 DualCertificate(dual.basis, {k: -v for k, v in dual.functional.items()}))


def _canonical(cert):
    # zero moments are not serialised
    if isinstance(cert, DualCertificate):
        return DualCertificate(cert.basis, {k: v for k, v in cert.functional.items() if v}, cert.exclusions)
    return cert


def test_json_round_trip(tmp_path, motzkin_dual, sphere_motzkin_gram):
    for target, cert in (motzkin_dual, sphere_motzkin_gram):
        obj = certificate_to_json(cert, target)
        back = certificate_from_json(json.loads(json.dumps(obj)))
        assert _canonical(back) == _canonical(cert)
        path = save_certificate(tmp_path / "c.json", cert, target)
        loaded, form = load_certificate(path)
        assert _canonical(loaded) == _canonical(cert) and form == target
        assert check_file(path) == (True, "ok")


def test_checker_rejects_tampering(motzkin_dual, sphere_motzkin_gram, tmp_path):
    p, cert = sphere_motzkin_gram
    obj = certificate_to_json(cert, p)
    bad = json.loads(json.dumps(obj))
    bad["gram"][1][1] = [str(int(bad["gram"][1][1][0]) + 1), bad["gram"][1][1][1]]
    assert not check_certificate_json(bad)[0]
    M, dual = motzkin_dual
    obj = certificate_to_json(dual, M)
    bad = json.loads(json.dumps(obj))
    # a negative diagonal moment makes the moment matrix indefinite
    diag = [2 * k for k in obj["basis"][0]]
    bad["functional"] = [[e, (["-1", "1"] if e == diag else c)] for e, c in bad["functional"]]
    assert not check_certificate_json(bad)[0]
    # on the positive part of M (a sum of monomial squares) the functional is >= 0
    other = json.loads(json.dumps(obj))
    other["form"]["terms"] = [[e, c] for e, c in other["form"]["terms"] if int(c[0]) > 0]
    assert check_certificate_json(other) == (False, "functional is not negative on the form")
    nameless = dict(obj)
    nameless.pop("form")
    assert not check_certificate_json(nameless)[0]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert checker_main([str(path)]) == 1
    assert checker_main([]) == 2


def test_extracted_squares_sum_back(sphere_motzkin_gram):
    p, cert = sphere_motzkin_gram
    total = Form(p.n_vars)
    for w, g in extract_squares(cert):
        assert w > 0
        total = total + Form(p.n_vars, {e: w * c for e, c in (g * g).items()})
    assert total == p


def test_symmetry_blocks_partition():
    M = catalog.get("M").form
    b = half_newton_basis(M)
    blocks = sign_symmetry_blocks(M, b)
    assert sorted(i for bl in blocks for i in bl) == list(range(len(b.monomials)))
    assert len(blocks) > 1


def test_symmetry_off_gives_same_verdict():
    M = catalog.get("M").form
    assert check_sos(M, SosOptions(use_symmetry=False)).status == INFEASIBLE


def test_perfect_square_route():
    v = check_sos(power(catalog.stengle(), 2))
    assert v.status == FEASIBLE and v.diagnostics["route"] == "perfect-square"


def test_stengle_cube_undecided_without_arcs_is_honest():
    # without the curve branches the exact facial reduction cannot finish;
    # the engine must not claim either answer
    v = check_sos(power(catalog.stengle(), 3))
    assert v.status in ("Undecided", INFEASIBLE)
    if v.status == INFEASIBLE:
        assert verify_dual_exact(power(catalog.stengle(), 3), v.dual)


def test_irrational_zero_face():
    # a sum of two squares whose common real zeros are irrational
    g1 = P("3*x^2 - 3*x*y + 3*x*z + y^2 - y*z - 3*z^2")
    g2 = P("3*x^2 + 2*x*y + 3*x*z - y^2 + 2*y*z + 3*z^2")
    v = check_sos(g1 * g1 + g2 * g2)
    assert v.status == FEASIBLE
