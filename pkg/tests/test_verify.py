import math

import numpy as np
import pytest

from mimox.channel import ChannelRealization, sample_channel_set
from mimox.constellation import PHI_CPD, make_constellation
from mimox.receiver import ljj_R
from mimox.channel import effective_channels, ljj_precoders
from mimox.stbc import sr_codeword
from mimox.verify import (
    CLAIMED_REGRESSION,
    REGRESSION_H22,
    check_appendixE_pivots,
    check_js_alignment,
    check_R_fullrank,
    g2_prime_bracket,
    gaussian_q,
    ljj_R_from_pipeline,
    p_by_second_difference,
    pep_probe,
    pivot_regression_expression,
)


def test_R_from_pipeline_matches_closed_form():
    ch = sample_channel_set(2, "gaussian", 0, size=20)
    eff = effective_channels(ch, ljj_precoders(ch), 1)
    np.testing.assert_allclose(ljj_R_from_pipeline(ch), ljj_R(eff.hhat, eff.ghat), atol=1e-12)


@pytest.mark.parametrize("dist", ["gaussian", "uniform:-1:1"])
def test_R_fullrank_small(dist):
    rep = check_R_fullrank(10_000, dist, np.random.default_rng(1))
    assert rep.failures == 0 and rep.min_sigma_ratio > 1e-12
    assert "min_sigma_ratio=" in rep.to_text()


def test_R_fullrank_reproducible():
    a = check_R_fullrank(2000, "gaussian", 5)
    b = check_R_fullrank(2000, "gaussian", 5)
    assert a == b


def test_R_with_repeated_links_is_a_rank_two_exception():
    # H11 = H12 and H21 = H22 make both effective channels scalar multiples
    # of I, so row 3 of R equals row 1 and row 2 is minus row 4: rank 2, not 4.
    h = sample_channel_set(2, "gaussian", 2).h.copy()
    h[0, 1] = h[0, 0]
    h[1, 1] = h[1, 0]
    R = ljj_R_from_pipeline(ChannelRealization(2, h))
    np.testing.assert_allclose(R[2], R[0], atol=1e-12)
    np.testing.assert_allclose(R[1], -R[3], atol=1e-12)
    assert np.linalg.matrix_rank(R, tol=1e-10) == 2
    # any generic perturbation of one link restores full rank
    h[0, 1] += 0.1 * sample_channel_set(2, "gaussian", 3).h[0, 0]
    s = np.linalg.svd(ljj_R_from_pipeline(ChannelRealization(2, h)), compute_uv=False)
    assert s[-1] / s[0] > 1e-6


def test_js_alignment_report_and_homogeneity():
    ch = sample_channel_set(4, "gaussian", 3, size=500)
    rep = check_js_alignment(ch)
    assert np.max(rep.align1) < 1e-10 and np.max(rep.align2) < 1e-10
    assert np.all(rep.signal_rank == 12)
    rep10 = check_js_alignment(ch.scaled(10.0))
    assert np.max(rep10.align1) < 1e-10
    np.testing.assert_array_equal(rep10.signal_rank, rep.signal_rank)


def test_pivots_nonzero_for_all_theta():
    ch = sample_channel_set(4, "gaussian", 4, size=2000)
    for theta in (math.pi / 6, math.pi / 4, 1.0):
        rep = check_appendixE_pivots(ch, theta)
        assert np.min(np.abs(rep.p_value)) > 0
        assert np.min(np.abs(rep.final_entry)) > 0
        assert np.min(rep.stage_norms) > 0


@pytest.mark.parametrize("theta", [math.pi / 6, math.pi / 4, 1.0])
def test_p_matches_second_difference(theta):
    ch = sample_channel_set(4, "gaussian", 5, size=50)
    p = check_appendixE_pivots(ch, theta).p_value
    np.testing.assert_allclose(p_by_second_difference(ch, theta), p, rtol=1e-9)
    # exactly quadratic: a different step gives the same coefficient
    np.testing.assert_allclose(p_by_second_difference(ch, theta, 0.25), p, rtol=1e-8)


def test_regression_matrices_have_the_listed_inverse_entries():
    inv1 = np.linalg.inv(REGRESSION_H22[0])
    inv2 = np.linalg.inv(REGRESSION_H22[1])
    expect = np.array([[1, 1, 2, 2], [1, 1, 2, 3], [1, 0, 0, 0], [0, 1, 0, 0]], dtype=float)
    np.testing.assert_allclose(inv1, expect, atol=1e-12)
    expect[1, 3] = 4
    np.testing.assert_allclose(inv2, expect, atol=1e-12)


@pytest.mark.parametrize("theta", [math.pi / 6, math.pi / 4])
def test_regression_expression_independent_evaluation(theta):
    # Hand evaluation with a11=a12=a21=a22=1, a13=a14=a23=2, a24 in {3, 4}:
    # row norms are both 2, so the value is 2*(2 - a24) * exp(-j theta).
    for h22, a24 in zip(REGRESSION_H22, (3, 4)):
        expect = 2 * (2 - a24) * np.exp(-1j * theta)
        assert pivot_regression_expression(h22, theta) == pytest.approx(expect, abs=1e-10)


@pytest.mark.parametrize("theta", [math.pi / 6, math.pi / 4])
def test_regression_expression_is_coefficient_of_bracket(theta):
    # the bracket is a quadratic form in the first row of H21; with only its
    # second entry nonzero it equals |h|^2 times the regression expression
    for h22 in REGRESSION_H22:
        val = pivot_regression_expression(h22, theta)
        for t in (1.0, 2.0, 0.5 + 0.5j):
            row = np.array([0, t, 0, 0])
            assert g2_prime_bracket(row, h22, theta) == pytest.approx(abs(t) ** 2 * val, abs=1e-9)


def test_regression_values_differ_between_matrices():
    # what the non-constancy argument needs, independent of the stated values
    a, b = (pivot_regression_expression(h, math.pi / 4) for h in REGRESSION_H22)
    assert abs(a - b) > 1.0
    assert CLAIMED_REGRESSION == (-1.0, -2.0)


def test_pep_zero_difference_is_half():
    rep = pep_probe(np.zeros((4, 4)), np.zeros((4, 4)), [0, 10], 1000, 0)
    np.testing.assert_allclose(rep.pep, 0.5)
    assert gaussian_q(0.0) == 0.5


def test_pep_decays_steeply_and_monotonically():
    c = make_constellation("bpsk", PHI_CPD)
    d = np.zeros(8, complex)
    d[0] = c.points[0] - c.points[1]
    dX = sr_codeword(d, math.pi / 4)
    assert abs(np.linalg.det(dX)) > 0
    p_db = np.array([0.0, 3.0, 6.0, 9.0, 12.0])
    rep = pep_probe(dX, np.zeros((4, 4)), p_db, 100_000, np.random.default_rng(0))
    assert np.all(np.diff(rep.pep) <= 2 * rep.stderr[1:])
    slope = (np.log10(rep.pep[-1]) - np.log10(rep.pep[-2])) / ((p_db[-1] - p_db[-2]) / 10)
    assert slope <= -3.5
