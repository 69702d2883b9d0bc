import numpy as np
import pytest

from heatlab.errors import AccuracyError, ArgumentError
from heatlab.geometry import CurvatureEndomorphism, asymptotic_diagonal
from heatlab.torus import (
    EllipticCurveBundle,
    heat_trace_exact,
    heat_trace_truncated,
    landau_spectrum,
    magnetic_torus_operator,
    morse_trace_inequality,
    product_torus_morse,
    riemann_roch_dims,
    validate_landau_levels,
)


def test_bundle_identity_lambda_area():
    b = EllipticCurveBundle(0.3 + 1.7j, 4)
    assert abs(b.lambda_scalar * b.area - 2 * np.pi * b.degree) < 1e-12
    with pytest.raises(ArgumentError):
        EllipticCurveBundle(1.0 - 0.5j, 1)
    with pytest.raises(ArgumentError):
        EllipticCurveBundle(1j, 0)


# ---------------------------------------------------------------------------
# landau_spectrum


def test_ground_multiplicity_is_riemann_roch():
    b = EllipticCurveBundle(1j, 1)
    table = landau_spectrum(b, 1, 0, 3)
    assert table.rows[0] == (0.0, 1)
    assert riemann_roch_dims(1, 1) == (1, 0)
    # k = 3, d = 2 -> ground multiplicity 6
    b2 = EllipticCurveBundle(1j, 2)
    assert landau_spectrum(b2, 3, 0, 2).rows[0][1] == 6 == riemann_roch_dims(3, 2)[0]


def test_q1_spectrum_starts_at_first_level():
    b = EllipticCurveBundle(1j, 1)
    k = 2
    table = landau_spectrum(b, k, 1, 4)
    np.testing.assert_allclose(table.rows[0][0], k * b.lambda_scalar)
    assert riemann_roch_dims(k, 1)[1] == 0  # no harmonic (0,1) classes


def test_negative_degree_uses_duality():
    b = EllipticCurveBundle(1j, -2)
    dual = EllipticCurveBundle(1j, 2)
    t0 = landau_spectrum(b, 3, 0, 4)
    t1 = landau_spectrum(dual, 3, 1, 4)
    np.testing.assert_allclose(t0.eigenvalues(), t1.eigenvalues())
    np.testing.assert_allclose(t0.multiplicities(), t1.multiplicities())


# ---------------------------------------------------------------------------
# heat traces


def test_trace_closed_forms():
    b = EllipticCurveBundle(1j, 2)
    k, t = 3, 0.8
    lam = b.lambda_scalar
    np.testing.assert_allclose(
        heat_trace_exact(b, k, 0, t), k * 2 / (1 - np.exp(-t * lam)), rtol=1e-14
    )
    np.testing.assert_allclose(
        heat_trace_exact(b, k, 1, t), k * 2 * np.exp(-t * lam) / (1 - np.exp(-t * lam)),
        rtol=1e-14,
    )


def test_trace_equals_area_times_limit_diagonal():
    # constant curvature: the normalized trace equals area times the
    # asymptotic diagonal at every k, in both form degrees
    b = EllipticCurveBundle(2j, 3)
    for k in (1, 2, 7):
        for t in (0.3, 1.0):
            for q in (0, 1):
                diag = asymptotic_diagonal(
                    CurvatureEndomorphism.diagonal([b.lambda_scalar]), q, t
                ).matrix[0, 0].real
                np.testing.assert_allclose(
                    heat_trace_exact(b, k, q, t) / k, b.area * diag, rtol=1e-13
                )


def test_trace_q1_vanishes_at_large_time():
    b = EllipticCurveBundle(1j, 1)
    assert heat_trace_exact(b, 1, 1, 100.0) < 1e-40


def test_alternating_trace_is_index():
    b = EllipticCurveBundle(1j, 2)
    for k in (1, 4):
        for t in (0.1, 1.0, 10.0):
            alt = heat_trace_exact(b, k, 0, t) - heat_trace_exact(b, k, 1, t)
            np.testing.assert_allclose(alt, k * b.degree, rtol=1e-12)


def test_truncated_trace_agrees_and_errors_when_short():
    b = EllipticCurveBundle(1j, 1)
    k, t = 2, 0.5
    cutoff = int(np.ceil(50.0 / (t * b.lambda_scalar)))
    got = heat_trace_truncated(b, k, 0, t, cutoff)
    np.testing.assert_allclose(got, heat_trace_exact(b, k, 0, t), rtol=1e-12)
    with pytest.raises(AccuracyError) as err:
        heat_trace_truncated(b, k, 0, t, 2)
    assert err.value.bound is not None


# ---------------------------------------------------------------------------
# Morse trace inequalities


def test_equality_at_top_degree():
    b = EllipticCurveBundle(1j, 1)
    for k in range(1, 6):
        for t in (0.25, 1.0, 4.0):
            rec = morse_trace_inequality(b, k, 1, t)
            assert rec.holds and rec.equality
            np.testing.assert_allclose(rec.rhs, rec.lhs, atol=1e-10 * max(1, abs(rec.lhs)))


def test_strict_inequality_at_q0():
    b = EllipticCurveBundle(1j, 2)
    rec = morse_trace_inequality(b, 3, 0, 1.0)
    assert rec.holds and not rec.equality
    assert rec.lhs == 6
    assert rec.rhs > rec.lhs


def test_dual_degree_bound():
    b = EllipticCurveBundle(1j, -1)
    k = 4
    assert riemann_roch_dims(k, -1) == (0, k)
    rec = morse_trace_inequality(b, k, 0, 1.0)
    lam = 2 * np.pi  # dual-model eigenvalue
    expect = k * np.exp(-lam) / (1 - np.exp(-lam))
    assert rec.lhs == 0
    np.testing.assert_allclose(rec.rhs, expect, rtol=1e-12)
    assert rec.holds


# ---------------------------------------------------------------------------
# product torus


def test_product_q1_slope_matches_morse_integral():
    b1 = EllipticCurveBundle(1j, 2)
    b2 = EllipticCurveBundle(1.5j, -3)
    for k in (1, 3):
        rec = product_torus_morse(b1, b2, k, 1, 0.7)
        assert rec.lhs == (k**2) * 2 * 3  # -h0 + h1 with only h1 nonzero
        np.testing.assert_allclose(rec.morse_integral, 6.0, rtol=1e-12)
        np.testing.assert_allclose(rec.normalized_lhs, rec.morse_integral, rtol=1e-12)
        assert rec.holds


def test_product_q0_empty_index_set():
    from heatlab.geometry import CurvatureField, morse_bound

    b1 = EllipticCurveBundle(1j, 1)
    b2 = EllipticCurveBundle(1j, -1)
    rec = product_torus_morse(b1, b2, 2, 0, 1.0)
    assert rec.lhs == 0 and rec.holds
    curv = CurvatureEndomorphism.diagonal([b1.lambda_scalar, b2.lambda_scalar])
    field = CurvatureField.constant(curv, b1.area * b2.area, 4)
    assert morse_bound(field, 0).value == 0.0


def test_product_q2_equality_for_all_t():
    b1 = EllipticCurveBundle(1j, 1)
    b2 = EllipticCurveBundle(1j, -2)
    for t in (0.25, 1.0, 4.0):
        rec = product_torus_morse(b1, b2, 2, 2, t)
        assert rec.equality
        assert rec.lhs == -(2**2) * 2
        np.testing.assert_allclose(rec.normalized_lhs, -rec.morse_integral, rtol=1e-12)


def test_product_rejects_wrong_sign_pattern():
    b1 = EllipticCurveBundle(1j, 1)
    with pytest.raises(ArgumentError):
        product_torus_morse(b1, b1, 1, 1, 1.0)


# ---------------------------------------------------------------------------
# discretized magnetic oracle


def test_magnetic_operator_is_hermitian_with_uniform_flux():
    h = magnetic_torus_operator(3, 12, 1.0)
    assert np.abs(h - h.getH()).max() < 1e-12 * np.abs(h).max()


def test_landau_validation_small():
    b = EllipticCurveBundle(1j, 1)
    val = validate_landau_levels(b, 1, eigen_count=6, resolutions=(16, 32))
    assert val.all_match
    assert val.expected_multiplicity == 1
    np.testing.assert_allclose(val.expected[1], b.lambda_scalar)
