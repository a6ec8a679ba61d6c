from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from soscert.forms import (
    Form,
    FormError,
    FormSyntaxError,
    add,
    determinant,
    divide_by_linear_square,
    divide_exact,
    divides,
    evaluate,
    format_form,
    is_even_form,
    linear_change,
    monomials_of_degree,
    mul,
    parse_form,
    power,
    scale_variables,
    square_root,
    substitute_permutation,
)

small = st.integers(-4, 4)
ratio = st.fractions(min_value=-3, max_value=3, max_denominator=5)


@st.composite
def forms(draw, n=3, max_deg=3):
    d = draw(st.integers(0, max_deg))
    mons = monomials_of_degree(n, d)
    coeffs = draw(st.lists(small, min_size=len(mons), max_size=len(mons)))
    return Form(n, dict(zip(mons, coeffs)))


points = st.lists(ratio, min_size=3, max_size=3)


def test_parse_examples():
    p = parse_form("x^4*y^2 + x^2*y^4 + z^6 - 3*x^2*y^2*z^2", 3)
    assert p.degree == 6 and len(p) == 4 and p.coeff((2, 2, 2)) == -3
    assert parse_form("(x + y)^2", 2) == Form(2, {(2, 0): 1, (1, 1): 2, (0, 2): 1})
    assert parse_form("x1*x2 - 1/2*x3^2", 3).coeff((0, 0, 2)) == Fraction(-1, 2)


@pytest.mark.parametrize("text", ["x^2 + y", "x^", "x + + ", "w^2", "x^-1", "(x + y"])
def test_parse_rejects(text):
    with pytest.raises(FormError):
        parse_form(text, 2)


def test_syntax_error_is_form_error():
    assert issubclass(FormSyntaxError, FormError)


@given(forms())
def test_format_parse_round_trip(p):
    assert parse_form(format_form(p), 3) == p


@given(forms(), forms(), points)
def test_ring_homomorphism(p, q, v):
    assert evaluate(mul(p, q), v) == evaluate(p, v) * evaluate(q, v)
    if p.is_zero() or q.is_zero() or p.degree == q.degree:
        assert evaluate(add(p, q), v) == evaluate(p, v) + evaluate(q, v)


def test_add_rejects_mixed_degree():
    with pytest.raises(FormError):
        add(parse_form("x^2", 2), parse_form("x", 2))


nonzero_points = st.lists(ratio.filter(bool), min_size=3, max_size=3)


@given(forms(), nonzero_points, points)
def test_scale_identity(p, s, v):
    scaled = scale_variables(p, s)
    assert evaluate(scaled, v) == evaluate(p, [a * b for a, b in zip(s, v)])


@settings(max_examples=40)
@given(forms(max_deg=2), st.lists(st.lists(small, min_size=3, max_size=3), min_size=3, max_size=3),
       st.lists(st.lists(small, min_size=3, max_size=3), min_size=3, max_size=3))
def test_linear_change_composition(p, A, B):
    assume(determinant(A) != 0 and determinant(B) != 0)
    AB = [[sum(A[i][k] * B[k][j] for k in range(3)) for j in range(3)] for i in range(3)]
    assert linear_change(linear_change(p, A), B) == linear_change(p, AB)


def test_linear_change_example():
    p = parse_form("x^2 - y^2", 2)
    assert linear_change(p, [[1, 1], [1, -1]]) == parse_form("4*x*y", 2)
    with pytest.raises(FormError):
        linear_change(p, [[1, 1], [1, 1]])
    assert determinant([[1, 2], [3, 4]]) == -2


@given(forms(max_deg=2), st.lists(small, min_size=3, max_size=3).filter(any))
def test_divide_by_linear_square(q, c):
    ell = Form.linear(c)
    p = mul(mul(ell, ell), q)
    assert divide_by_linear_square(p, ell) == q
    if not q.is_zero():
        assert divides(ell, p)


def test_divide_exact_rejects_remainder():
    with pytest.raises(FormError):
        divide_exact(parse_form("x^2 + y^2", 2), parse_form("x + y", 2))
    assert divides(parse_form("x - y", 2), parse_form("x^2 - y^2", 2))
    assert not divides(parse_form("x - y", 2), parse_form("x^2 + y^2", 2))


@given(forms(max_deg=2))
def test_square_root(r):
    if r.is_zero():
        return
    root = square_root(power(r, 2))
    assert root is not None and power(root, 2) == power(r, 2)


def test_square_root_none():
    assert square_root(parse_form("x^2 + y^2", 2)) is None


def test_scale_rejects_zero():
    with pytest.raises(FormError):
        scale_variables(parse_form("x + y", 2), [1, 0])


def test_permutation_and_even():
    p = parse_form("x^4*y^2 + y^4*z^2", 3)
    assert substitute_permutation(p, (0, 2, 1)) == parse_form("x^4*z^2 + y^2*z^4", 3)
    assert is_even_form(p) and not is_even_form(parse_form("x*y", 2))


def test_operators_match_functions():
    p, q = parse_form("x + 2*y", 2), parse_form("x - y", 2)
    assert p * q == mul(p, q) and p ** 3 == power(p, 3) and p - q == add(p, -q)
    assert p(1, 1) == 3
