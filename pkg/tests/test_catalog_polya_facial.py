import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soscert import catalog
from soscert.facial import arc_moments, grid_functional
from soscert.forms import Form, FormError, evaluate, monomials_of_degree, mul, parse_form, power, scale_variables
from soscert.polya import (
    LN2_LOWER,
    LN2_UPPER,
    even_denominator_search,
    monomial_square_certificate,
    polya_bound,
    polya_exponent_search,
    polya_report,
    sphere_extrema,
)


def P(text, n=3):
    return parse_form(text, n)


# -- catalog ---------------------------------------------------------------------------

def test_catalog_forms_vanish_at_ones():
    for key in ("M", "R", "S"):
        assert evaluate(catalog.get(key).form, (1, 1, 1)) == 0
        assert catalog.get(key).form.degree == 6


def test_catalog_lookup():
    assert catalog.get("motzkin") is catalog.get("M")
    with pytest.raises(KeyError):
        catalog.get("nope")


def test_stengle_matches_its_definition():
    curve = catalog.stengle_curve()
    assert catalog.stengle() == P("x^3*z^3") + curve * curve


def test_stengle_arcs_lie_on_the_curve():
    order = 20
    for arc in catalog.stengle_arcs(order):
        # the cubic vanishes along the arc to the truncation order
        vals = arc_moments(arc, [(3, 0, 0), (0, 2, 1), (1, 0, 2)], order)
        series = [vals[(0, 2, 1)][k] - vals[(3, 0, 0)][k] - vals[(1, 0, 2)][k] for k in range(order + 1)]
        assert not any(series)


def test_hilbert_bound():
    assert [catalog.hilbert_degree_bound(m) for m in (4, 6, 8, 10)] == [0, 2, 4, 8]
    with pytest.raises(ValueError):
        catalog.hilbert_degree_bound(5)


forms_small = st.builds(lambda cs: Form(2, dict(zip(monomials_of_degree(2, 2), cs))),
                        st.lists(st.integers(-5, 5), min_size=3, max_size=3))


@settings(max_examples=50)
@given(st.lists(forms_small, min_size=8, max_size=8))
def test_four_square_identity(fs):
    a, b = fs[:4], fs[4:]
    c = catalog.four_square_compose(a, b)
    assert catalog.sum_of_squares(c) == catalog.sum_of_squares(a) * catalog.sum_of_squares(b)


def test_four_square_rejects_mismatch():
    x = P("x", 2)
    with pytest.raises(FormError):
        catalog.four_square_compose([x, x, x, x * x], [x, x, x, x])
    with pytest.raises(FormError):
        catalog.four_square_compose([x, x, x], [x, x, x, x])


# -- Polya ------------------------------------------------------------------------------

def test_ln2_enclosure():
    import math

    assert float(LN2_LOWER) < math.log(2) < float(LN2_UPPER)


def test_polya_bound_examples():
    assert polya_bound(3, 6, Fraction(1, 3)) == 93
    assert polya_bound(3, 6, 1) == 28
    with pytest.raises(ValueError):
        polya_bound(3, 6, 0)


def _binary_expansion(coeffs, N):
    """Coefficients of (x + y)^N f for binary f given by coefficients of x^d, x^(d-1) y, ... (oracle)."""
    import math

    out = [0] * (len(coeffs) + N)
    for i, c in enumerate(coeffs):
        for j in range(N + 1):
            out[i + j] += c * math.comb(N, j)
    return out


def test_exponent_search_against_expansion():
    f = P("x^2 - x*y + y^2", 2)
    assert polya_exponent_search(f, 20) == 3
    assert min(_binary_expansion([1, -1, 1], 3)) > 0
    assert all(min(_binary_expansion([1, -1, 1], N)) <= 0 for N in range(3))
    assert polya_exponent_search(P("x + y", 2), 5) == 0
    assert polya_exponent_search(P("x - y", 2), 5) is None
    assert polya_exponent_search(P("x^2 - x*y + y^2", 2), 2) is None


def test_even_denominator_search():
    assert even_denominator_search(P("x^4 - x^2*y^2 + y^4", 2), 5) == 1
    assert even_denominator_search(catalog.get("M").form, 5) is None
    assert even_denominator_search(P("(x^2 + y^2)^2", 2), 5) == 0
    with pytest.raises(FormError):
        even_denominator_search(P("x*y", 2), 3)


def test_even_search_is_monotone():
    p = P("x^4 - x^2*y^2 + y^4", 2)
    n = even_denominator_search(p, 10)
    q = P("x^2 + y^2", 2)
    for extra in range(3):
        g = mul(power(q, n + extra), p)
        assert all(c >= 0 for _, c in g.items())


def test_sphere_extrema_exact_cases():
    e = sphere_extrema(P("x^2 + y^2 + z^2"))
    assert e.inf_lower == e.inf_upper == e.sup_lower == e.sup_upper == 1
    assert e.epsilon_lower == e.epsilon_upper == 1
    e = sphere_extrema(P("x^4 + y^4 + z^4"))
    assert e.inf_lower <= Fraction(1, 3) <= e.inf_upper and e.sup_lower <= 1 <= e.sup_upper
    m = sphere_extrema(catalog.get("M").form)
    assert m.inf_lower <= 0 <= m.inf_upper


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=6, max_size=6))
def test_bernstein_brackets_contain_samples(cs):
    p = Form(3, {tuple(2 * k for k in e): c for e, c in zip(monomials_of_degree(3, 2), cs)})
    est = sphere_extrema(p, depth=4)
    rng = random.Random(sum(cs))
    for _ in range(20):
        v = [Fraction(rng.randint(-9, 9), 7) for _ in range(3)]
        r2 = sum(x * x for x in v)
        if r2 == 0:
            continue
        val = evaluate(p, v) / r2 ** 2
        assert est.inf_lower <= val <= est.sup_upper


@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=6, max_size=6), st.integers(1, 5))
def test_epsilon_scale_invariant(cs, k):
    p = Form(3, {tuple(2 * k for k in e): c for e, c in zip(monomials_of_degree(3, 2), cs)})
    e1 = sphere_extrema(p, depth=3)
    e2 = sphere_extrema(Form(3, {e: k * c for e, c in p.items()}), depth=3)
    assert e1.epsilon_lower == e2.epsilon_lower and e1.epsilon_upper == e2.epsilon_upper


def test_grid_method_for_non_even_forms():
    p = P("x^2 + x*y + y^2", 2)
    e = sphere_extrema(p, depth=5)
    assert e.method == "lipschitz-grid"
    assert e.inf_lower <= Fraction(1, 2) <= e.inf_upper
    assert e.sup_lower <= Fraction(3, 2) <= e.sup_upper


def test_monomial_square_certificate_and_report():
    q = mul(P("x^2 + y^2", 2), P("x^4 - x^2*y^2 + y^4", 2))
    assert monomial_square_certificate(q) is not None
    assert monomial_square_certificate(P("x^2 - y^2", 2)) is None
    rep = polya_report(P("x^4 - x^2*y^2 + y^4", 2), "quartic", "even", depth=6)
    assert rep.N_measured == 1 and rep.N_bound is not None and rep.N_bound >= rep.N_measured
    assert rep.stats["diagonal_certificate"]
    rep = polya_report(P("x^2 - x*y + y^2", 2), "simplex", "simplex", depth=6)
    assert rep.N_measured == 3


# -- facial reduction ---------------------------------------------------------------------

def test_grid_functional_is_positive_definite():
    from soscert.basis import full_basis
    from soscert.exact import is_psd

    b = full_basis(3, 3)
    keys = {tuple(x + y for x, y in zip(u, v)) for u in b.monomials for v in b.monomials}
    y = grid_functional(keys, 3, (3 + 2) // 2)
    mom = [[y[tuple(x + z for x, z in zip(u, v))] for v in b.monomials] for u in b.monomials]
    assert is_psd(mom, strict=True)


def test_degenerate_scaling_relation():
    # h(x, y/r, z/r) * M and h * M(x, r y, r z) differ by an invertible change of variables
    h = P("x^2 + y^2 + z^2")
    M = catalog.get("M").form
    r = Fraction(4)
    left = mul(scale_variables(h, [1, 1 / r, 1 / r]), M)
    right = mul(h, scale_variables(M, [1, r, r]))
    assert scale_variables(left, [1, r, r]) == right
