import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import ALPHA075, build
from semistable_renewal.density import DensityEvaluator
from semistable_renewal.dists import lattice_from_pmf
from semistable_renewal.errors import DomainError, ResourceError
from semistable_renewal.llt_verify import (
    llt_report,
    merging_error_against,
    pmf_powers,
    sn_pmf_exact,
    stone_mc_error,
    write_llt_csv,
    write_stone_json,
)
from semistable_renewal.model import norming_A, position_gamma


def test_degenerate_sum():
    r = sn_pmf_exact(lattice_from_pmf([0.0, 1.0]), 7, 10)
    expected = np.zeros(11)
    expected[7] = 1.0
    assert np.array_equal(r.p, expected)
    assert r.deficit == 0.0


def test_uniform_two_point():
    r = sn_pmf_exact(lattice_from_pmf([0.0, 0.5, 0.5]), 2, 6)
    assert r.p[2:5].tolist() == [0.25, 0.5, 0.25]
    assert r.p.sum() == 1.0


def test_two_fold_factorization(case075):
    d = case075[0]
    K = 5000
    r = sn_pmf_exact(d, 2, K)
    f = d.pmf(K)
    F = np.cumsum(f)
    # P(S_2 <= K) = sum_j f_j F(K - j)
    assert math.fsum(r.p) == pytest.approx(math.fsum(f * F[::-1]), abs=1e-12)
    assert math.fsum(r.p) >= math.fsum(f[:K // 2 + 1]) ** 2 - 1e-15


def test_finite_support_factorization():
    d = lattice_from_pmf([0.0, 0.2, 0.3, 0.1, 0.4])
    r = sn_pmf_exact(d, 2, 8)
    assert math.fsum(r.p) == pytest.approx(math.fsum(d.pmf(4)[: 4 + 1]) ** 2, abs=1e-12)


@pytest.mark.parametrize("n,K", [(64, 1 << 12), (64, 1 << 15), (5, 20_000)])
def test_truncation_exactness(case075, n, K):
    d = case075[0]
    a = sn_pmf_exact(d, n, K)
    b = sn_pmf_exact(d, n, 2 * K)
    assert np.max(np.abs(a.p - b.p[:K + 1])) < 1e-12
    assert a.deficit <= a.tail_bound + 1e-12


def test_powers_match_exponentiation(case075):
    d = case075[0]
    M = 3000
    by_power = dict(pmf_powers(d.pmf(M), M, 9))
    for n in (1, 2, 5, 9):
        assert np.max(np.abs(by_power[n] - sn_pmf_exact(d, n, M).p)) < 1e-13


def test_memory_guard(case075):
    with pytest.raises(ResourceError):
        sn_pmf_exact(case075[0], 64, 10 ** 7, max_bytes=1e6)
    with pytest.raises(DomainError):
        sn_pmf_exact(case075[0], 0, 10)


def test_uniform_pmf_bound(case075):
    d, _, s, e = case075
    for n in (64, 256):
        r = sn_pmf_exact(d, n, 1 << 16)
        assert r.p.max() <= (1 + e.sup_g()) / norming_A(s, n)


def test_report_baseline_and_fields(case075):
    d, _, s, e = case075
    one = llt_report(d, s, e, 1, K=2000)
    assert math.isfinite(one.llt_error) and one.llt_error > 0
    rep = llt_report(d, s, e, 64)
    assert rep.gamma == position_gamma(s, 64.0, extend=True)
    assert rep.A_n == pytest.approx(64 ** (4 / 3))
    assert rep.deficit <= rep.tail_bound
    assert rep.llt_error < rep.sup_g
    assert 0 < rep.merging_error < 1


def test_drift_centering_lowers_error(case075):
    from semistable_renewal.charfn import drift_constant
    d, _, s, e = case075
    delta = drift_constant(d)
    plain = llt_report(d, s, e, 256)
    shifted = llt_report(d, s, e, 256, C=256 * delta)
    assert shifted.llt_error < 0.2 * plain.llt_error
    assert shifted.merging_error < 0.2 * plain.merging_error


def test_degenerate_negative_control(case075):
    # X = 1 never spreads out: the semistable target is far away
    _, _, s, e = case075
    n = 64
    pmf = sn_pmf_exact(lattice_from_pmf([0.0, 1.0]), n, 4000)
    A = norming_A(s, n)
    gam = position_gamma(s, float(n))
    err = merging_error_against(pmf, A, 0.0, lambda x: e.G_monotone(gam, x))
    assert err > 0.99


def test_stone_seed_and_noise_scaling(tmp_path):
    d, spec, s = build({**ALPHA075, "support": "nonlattice"})
    e = DensityEvaluator(spec)
    a = stone_mc_error(d, s, e, 16, samples=100_000, seed=3)
    b = stone_mc_error(d, s, e, 16, samples=100_000, seed=3)
    write_stone_json(a, tmp_path / "a.json")
    write_stone_json(b, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert json.loads((tmp_path / "a.json").read_text())["samples"] == 100_000
    c = stone_mc_error(d, s, e, 16, samples=400_000, seed=4)
    ratio = np.median(c.radius) / np.median(a.radius)
    assert abs(ratio / 0.5 - 1) < 0.2
    with pytest.raises(DomainError):
        stone_mc_error(d, s, e, 16, samples=1000)


def test_writers(tmp_path, case075):
    d, _, s, e = case075
    rep = llt_report(d, s, e, 8, K=500)
    write_llt_csv([rep], tmp_path / "l.csv")
    lines = (tmp_path / "l.csv").read_text().splitlines()
    assert lines[0] == "n,llt_sup_error,merging_sup_error,K,deficit"
    assert lines[1].startswith("8,")


@settings(deadline=None, max_examples=15)
@given(st.lists(st.floats(0.05, 1.0), min_size=2, max_size=6), st.integers(1, 9))
def test_sum_pmf_properties(weights, n):
    p = np.array([0.0, *weights])
    d = lattice_from_pmf(p / p.sum())
    K = n * len(weights)
    r = sn_pmf_exact(d, n, K)
    assert np.all(r.p >= 0)
    assert math.fsum(r.p) == pytest.approx(1.0, abs=1e-12)
    mean = float(np.arange(K + 1) @ r.p)
    assert mean == pytest.approx(n * float(np.arange(p.size) @ (p / p.sum())), rel=1e-12)


def test_stone_centering_override():
    d, spec, s = build({**ALPHA075, "support": "nonlattice"})
    e = DensityEvaluator(spec)
    base = stone_mc_error(d, s, e, 16, samples=100_000, seed=1)
    assert stone_mc_error(d, s, e, 16, samples=100_000, seed=1, C=0.0).to_dict() == base.to_dict()
    moved = stone_mc_error(d, s, e, 16, samples=100_000, seed=1, C=-50.0)
    assert moved.p_hat == base.p_hat and moved.g != base.g
