import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kpme.alphaskp import (
    EwaldConfig,
    NumericalFailure,
    QuadratureRule,
    RuleRangeError,
    assemble_alpha,
    bundled_rule_path,
    load_tabulated_rule,
    nkpa_svd,
    optimal_term_lower_bound,
    rule_max_error,
    save_tabulated_rule,
    sinc_rule,
    sinc_rule_for_eps,
    skp_from_quadrature,
)
from kpme.oracle import dense_rebuild_skp


def test_config_validation():
    with pytest.raises(ValueError):
        EwaldConfig(0.0, 2)
    with pytest.raises(ValueError):
        EwaldConfig(1.0, -1)
    with pytest.raises(ValueError):
        EwaldConfig(1.0, 1.5)


def test_alpha_entries():
    a = assemble_alpha(EwaldConfig(math.pi, 2))
    c = 2
    assert a[c, c, c] == 0.0
    assert a[c + 1, c, c] == pytest.approx(math.exp(-1), rel=1e-15)
    assert a[c + 1, c + 1, c + 1] == pytest.approx(math.exp(-3) / 3, rel=1e-15)


def test_alpha_sign_flip_symmetry():
    a = assemble_alpha(EwaldConfig(2.5, 3))
    for axes in [(0,), (1,), (2,), (0, 1), (0, 1, 2)]:
        assert np.array_equal(a, np.flip(a, axis=axes))


def test_nkpa_rank_one_input(rng):
    u, v, w = rng.standard_normal(5), rng.standard_normal(4), rng.standard_normal(6)
    t = np.einsum("i,j,k->ijk", u, v, w)
    dec = nkpa_svd(t, 1e-10)
    assert len(dec) == 1
    assert np.linalg.norm(dec.terms[0].tensor() - t) <= 1e-12 * np.linalg.norm(t)


def test_nkpa_zero_tensor():
    dec = nkpa_svd(np.zeros((3, 3, 3)))
    assert len(dec) == 0 and dec.error_bound == 0.0


def test_nkpa_rejects_bad_input():
    with pytest.raises(ValueError):
        nkpa_svd(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        nkpa_svd(np.ones((3, 3, 3)), 1e-8, 1e-4)
    bad = np.ones((3, 3, 3))
    bad[0, 0, 0] = np.nan
    with pytest.raises(NumericalFailure):
        nkpa_svd(bad)


def _rebuild(dec, shape):
    out = np.zeros(shape)
    for t in dec.terms:
        out += t.tensor()
    return out


@pytest.mark.parametrize("tol", [1e-2, 1e-4, 1e-8])
def test_nkpa_bound_on_alpha(tol):
    cfg = EwaldConfig(4.0, 4)
    a = assemble_alpha(cfg)
    dec = nkpa_svd(a, tol)
    err = np.linalg.norm(dense_rebuild_skp(dec) - a)
    assert err <= dec.error_bound * (1 + 1e-10) + 1e-15
    assert len(dec) <= (2 * cfg.M + 1) ** 2


@given(st.integers(0, 2**32 - 1), st.sampled_from([1e-1, 1e-3, 1e-6]))
def test_nkpa_bound_random(seed, tol):
    t = np.random.default_rng(seed).standard_normal((4, 5, 3))
    dec = nkpa_svd(t, tol)
    assert np.linalg.norm(_rebuild(dec, t.shape) - t) <= dec.error_bound * (1 + 1e-10) + 1e-13


def test_sinc_nodes_at_l0_and_h_star():
    rule = sinc_rule(12, 3)
    mid = 12
    assert rule.nodes[mid] == pytest.approx(math.log(2), rel=1e-15)
    assert rule.weights[mid] == pytest.approx(rule.h / 2, rel=1e-15)
    assert math.pi / math.sqrt(2 * 12 + 1) == pytest.approx(0.6283185307, rel=1e-10)
    h_star = math.pi / 5
    assert h_star / 4 * (1 - 1e-12) <= rule.h <= 4 * h_star * (1 + 1e-12)


@pytest.mark.parametrize("n_quad,M", [(5, 2), (20, 4), (40, 8)])
def test_sinc_error_recomputed_independently(n_quad, M):
    rule = sinc_rule(n_quad, M)
    worst = 0.0
    for r in range(1, 3 * M * M + 1):
        approx = sum(w * math.exp(-lam * r) for lam, w in zip(rule.nodes, rule.weights))
        worst = max(worst, abs(1.0 / r - approx))
    assert worst == pytest.approx(rule.eps, rel=1e-8, abs=1e-16)


def test_quadrature_zero_mode_cancels():
    cfg = EwaldConfig(3.0, 3)
    dec = skp_from_quadrature(sinc_rule(10, 3), cfg)
    rebuilt = dense_rebuild_skp(dec)
    assert abs(rebuilt[3, 3, 3]) <= 1e-13 * dec.correction


def test_quadrature_sup_error_within_eps():
    cfg = EwaldConfig(3.0, 4)
    rule = sinc_rule_for_eps(1e-8, 4)
    dec = skp_from_quadrature(rule, cfg)
    assert np.max(np.abs(dense_rebuild_skp(dec) - assemble_alpha(cfg))) <= 1e-8


def test_skp_rejects_uncovered_rule():
    rule = sinc_rule(8, 2)
    with pytest.raises(RuleRangeError):
        skp_from_quadrature(rule, EwaldConfig(3.0, 3))


def test_bundled_rule_accepts_m12_rejects_m13():
    rule = load_tabulated_rule(bundled_rule_path(), 12)
    assert len(rule) == 27 and rule.measured_error <= 1e-14
    with pytest.raises(RuleRangeError):
        load_tabulated_rule(bundled_rule_path(), 13)


def test_bundled_rule_beats_sinc_at_m12():
    sinc = sinc_rule_for_eps(1e-14, 12)
    assert sinc.eps <= 1e-14
    assert len(sinc) == 203 > 27


def test_degenerate_rule_loads(tmp_path):
    path = tmp_path / "one.txt"
    path.write_text("# single node\n1\n0.0 1.0\n1 12 1e-3\n")
    with pytest.warns(RuntimeWarning):
        rule = load_tabulated_rule(path, 2)
    assert rule.measured_error == pytest.approx(1 - 1 / 12)


def test_rule_file_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_tabulated_rule(tmp_path / "nope.txt")
    bad = tmp_path / "bad.txt"
    bad.write_text("2\n0.1 0.2\n1 12 1e-3\n")
    with pytest.raises(ValueError):
        load_tabulated_rule(bad)


def test_rule_round_trip(tmp_path):
    rule = sinc_rule(6, 2)
    path = tmp_path / "r.txt"
    save_tabulated_rule(path, rule)
    back = load_tabulated_rule(path, 2)
    assert np.array_equal(back.nodes, rule.nodes) and np.array_equal(back.weights, rule.weights)
    assert back.measured_error == pytest.approx(rule_max_error(rule, 2))


def test_optimal_term_lower_bound():
    assert optimal_term_lower_bound(16 * math.exp(-math.pi)) == 1
    # ln(1e-14 / 16) = -35.0088, so the bound is ceil(124.18)
    assert optimal_term_lower_bound(1e-14) == 125
    assert optimal_term_lower_bound(1e-8) == 46
    with pytest.raises(ValueError):
        optimal_term_lower_bound(0.0)


def test_sinc_relative_rank_drops_with_m():
    rr = [skp_from_quadrature(sinc_rule_for_eps(1e-8, M), EwaldConfig(3.0, M)).relative_rank for M in (2, 4, 8)]
    assert rr[0] > rr[1] > rr[2]


def test_quadrature_rule_covers():
    r = QuadratureRule(np.zeros(1), np.ones(1), 1.0, 12.0, 1e-3)
    assert r.covers(2) and not r.covers(3)
