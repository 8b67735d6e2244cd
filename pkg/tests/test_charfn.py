import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma, zeta

from helpers import ALPHA06, ALPHA075, build
from semistable_renewal.charfn import (
    W,
    W_integral,
    charfn_asymptotic_ratio,
    drift_constant,
    imag_ratio_index_one,
    levy_exponent,
    nu_bound_scan,
    one_minus_phi,
    p2_amplitude,
    p2_amplitude_mellin,
    phi_exact,
    positivity_scan,
    psi_lambda,
    scaling_relation_check,
    write_charfn_csv,
)
from semistable_renewal.dists import counterexample_dist, lattice_from_pmf, make_semistable_lattice, truncated_mean_L
from semistable_renewal.errors import DomainError, PreconditionError
from semistable_renewal.model import LogPeriodic, SemistableSpec

DEGENERATE = lattice_from_pmf([0.0, 1.0])


def test_phi_examples(case075):
    d = case075[0]
    assert phi_exact(d, 0.0) == 1.0
    assert abs(phi_exact(d, 2 * math.pi) - 1.0) < 1e-15
    assert abs(phi_exact(DEGENERATE, math.pi / 2) - 1j) < 1e-15


def test_phi_matches_direct_sum():
    d, _, _ = build(ALPHA075)
    f = d.pmf(2_000_000)
    k = np.arange(f.size)
    for t in (0.3, 1.7, -2.9):
        direct = np.sum(f * np.exp(1j * t * k)) + 0j
        # the omitted tail mass is below 2e-5; compare the partial sum to within it
        assert abs(phi_exact(d, t) - direct) < 2 * float(d.tail(f.size - 1))


@settings(deadline=None, max_examples=25)
@given(st.floats(-20.0, 20.0))
def test_phi_conjugate_symmetry(t):
    d, _, _ = build(ALPHA075)
    assert abs(phi_exact(d, -t) - np.conj(phi_exact(d, t))) < 1e-12
    assert abs(phi_exact(d, t)) <= 1 + 1e-12


def test_nonarithmetic_phi_phase():
    a = (math.sqrt(5) - 1) / 2
    d, _, _ = build(ALPHA075, offset_a=a)
    base, _, _ = build(ALPHA075)
    t = 0.9
    assert abs(phi_exact(d, t) - cmath.exp(1j * t * a) * phi_exact(base, t)) < 1e-14


def test_psi_stable_closed_form():
    spec = SemistableSpec(0.5, 2.0, LogPeriodic.constant(1.3, 4.0))
    for t in (-2.0, 0.4, 3.0):
        closed = cmath.exp(-1.3 * math.sqrt(abs(t)) * math.sqrt(math.pi / 2) * (1 - 1j * np.sign(t)))
        assert abs(psi_lambda(spec, 1.0, t, "quad") - closed) < 1e-8
        assert abs(psi_lambda(spec, 1.0, t, "mellin") - closed) < 1e-12
    assert psi_lambda(spec, 1.0, 0.0) == 1.0


def test_psi_periodic_in_lambda(case075):
    spec = case075[1]
    for t in (0.5, 1.3, -4.0):
        assert abs(psi_lambda(spec, 2.0 * 0.7, t) - psi_lambda(spec, 0.7, t)) < 1e-9
        assert abs(psi_lambda(spec, 2.0 * 0.7, t, "quad") - psi_lambda(spec, 0.7, t, "quad")) < 1e-9


def test_exponent_routes_agree(case075):
    spec = case075[1]
    for lam, t in ((0.6, 0.2), (0.9, 3.0), (1.0, -1.5)):
        assert abs(levy_exponent(spec, lam, t, "quad") - levy_exponent(spec, lam, t, "mellin")) < 1e-9


def test_scaling_relation(case075):
    spec = case075[1]
    assert scaling_relation_check(spec, 0.8, 2.0) < 1e-9
    assert scaling_relation_check(spec, 1.0, 1.7) == 0.0
    assert scaling_relation_check(spec, spec.c, 1.0) < 1e-9


@pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9])
def test_p2_gamma_oracle(alpha):
    h = LogPeriodic.constant(1.0, 2.0)
    oracle = gamma(1 - alpha) * cmath.exp(1j * math.pi * (1 - alpha) / 2)
    assert abs(p2_amplitude(h, None, alpha, 0.37) - oracle) < 1e-6


def test_p2_index_one_sinc():
    assert abs(p2_amplitude(LogPeriodic.constant(1.0, 2.0), None, 1.0, 0.01) - math.pi / 2) < 1e-8


def test_p2_symmetric_is_imaginary():
    h = LogPeriodic.fourier([1.0, 0.1], period=2.0 ** (1 / 0.6))
    v = p2_amplitude(h, h, 0.6, 0.02)
    assert abs(v.real) < 1e-8
    assert v.imag == pytest.approx(2 * p2_amplitude(h, None, 0.6, 0.02).imag, rel=1e-8)


def test_p2_routes_agree():
    h = LogPeriodic.fourier([1.0, 0.05, 0.01], [0.02], period=2.0 ** (4 / 3))
    for t in (1e-3, 0.37, 5.0):
        assert abs(p2_amplitude(h, None, 0.75, t) - p2_amplitude_mellin(h, 0.75, t)) < 1e-8


def test_p2_log_periodic_in_t():
    r = 2.0 ** (4 / 3)
    h = LogPeriodic.fourier([1.0, 0.1], period=r)
    assert abs(p2_amplitude(h, None, 0.75, 0.01 * r) - p2_amplitude(h, None, 0.75, 0.01)) < 1e-8


def test_p2_rejects_non_monotone():
    h = LogPeriodic.fourier([1.0, 0.9], period=2.0)
    with pytest.raises(PreconditionError):
        p2_amplitude(h, None, 0.6, 0.1)
    with pytest.raises(DomainError):
        p2_amplitude(LogPeriodic.constant(1.0, 2.0), None, 0.6, 0.0)


def test_asymptotic_ratio_alpha06():
    d, _, _ = build(ALPHA06)
    row = charfn_asymptotic_ratio(d, [1e-4])[0]
    assert abs(row["abs_ratio"] - 1) < 0.05


def test_index_one_imaginary_ratio():
    assert abs(imag_ratio_index_one(counterexample_dist(), 1e-5) - 1) < 0.1


def test_W_examples(case075):
    assert W(DEGENERATE, math.pi) == pytest.approx(0.5, abs=1e-15)
    assert np.all(W(case075[0], np.geomspace(1e-6, 0.1, 20)) > 0)
    with pytest.raises(DomainError):
        W(DEGENERATE, 2 * math.pi)


def test_W_integral_index_one():
    d = counterexample_dist()
    x = 1e6
    assert abs(W_integral(d, x) * truncated_mean_L(d, x) * 2 / math.pi - 1) < 0.1


def test_nu_bounds(case075):
    nu = nu_bound_scan(case075[0])
    assert nu["nu1"] > 0 and nu["nu2"] > 0 and nu["nu3"] > 0
    assert nu["violations"] == 0


def test_positivity(case075):
    pos = positivity_scan(case075[0])
    assert pos["nu"] > 0 and pos["violations"] == 0


def test_drift_pareto_oracle():
    # P(X > k) = k**-alpha gives 1 - phi(t) = Gamma(1 - alpha)(-it)**alpha - i (zeta(alpha) + 1) t + o(t)
    alpha = 0.5
    d = make_semistable_lattice(SemistableSpec(alpha, 2.0, LogPeriodic.constant(1.0, 4.0)))
    assert drift_constant(d) == pytest.approx(zeta(alpha) + 1, abs=2e-5)


def test_drift_needs_index_below_one():
    with pytest.raises(PreconditionError):
        drift_constant(counterexample_dist())


def test_charfn_csv(tmp_path):
    d, _, _ = build(ALPHA06)
    path = tmp_path / "c.csv"
    write_charfn_csv(charfn_asymptotic_ratio(d, [1e-3, 1e-4]), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,re_phi,im_phi,abs_one_minus_phi,predicted_abs,ratio"
    assert len(lines) == 3


def test_drift_stable_across_t(case075):
    d = case075[0]
    assert drift_constant(d, 1e-7) == pytest.approx(drift_constant(d, 1e-9), abs=1e-4)
    assert drift_constant(d, 1e-10) == pytest.approx(drift_constant(d, 1e-9), abs=1e-4)


def test_two_term_expansion_alpha075(case075):
    # the one-term ratio is 0.94 at t = 1e-4; the drift term closes the gap
    d = case075[0]
    t = 1e-4
    lead = -1j * t ** 0.75 * p2_amplitude(d.M, None, 0.75, t)
    om = one_minus_phi(d, t)
    assert abs(abs(om) / abs(lead) - 0.9395) < 1e-3
    assert abs(abs(om) / abs(lead - 1j * drift_constant(d) * t) - 1) < 1e-5
