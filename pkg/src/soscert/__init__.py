"""Exact sum-of-squares certificates for forms with rational coefficients."""

from .basis import MonomialBasis, basis_for, full_basis, half_newton_basis
from .catalog import CATALOG, NamedForm, four_square_compose, hilbert_degree_bound
from .certificates import (
    FEASIBLE,
    INFEASIBLE,
    UNDECIDED,
    DualCertificate,
    GramCertificate,
    SosVerdict,
    certificate_from_json,
    certificate_to_json,
    extract_squares,
    load_certificate,
    save_certificate,
    verify_dual_exact,
    verify_gram_exact,
)
from .forms import (
    Form,
    FormError,
    FormSyntaxError,
    add,
    divide_by_linear_square,
    evaluate,
    format_form,
    linear_change,
    mul,
    parse_form,
    power,
    scale_variables,
)
from .polya import even_denominator_search, polya_bound, polya_exponent_search, sphere_extrema
from .sos import SosOptions, check_sos, gram_system, sign_symmetry_blocks

__version__ = "0.1.0"
