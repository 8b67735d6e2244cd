import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma

from helpers import ALPHA075, GOLDEN, build
from semistable_renewal.dists import (
    counterexample_dist,
    geometric_dist,
    lattice_from_pmf,
    lattice_from_tail,
    truncated_mean_L,
)
from semistable_renewal.errors import DomainError, PreconditionError
from semistable_renewal.renewal import (
    nonarithmetic_window_mass,
    renewal_function_residual,
    renewal_function_values,
    renewal_inversion,
    renewal_sequence,
    rotation_average,
    srt_a1_residual,
    srt_residual,
    write_renewal_function_csv,
    write_srt_csv,
)

GOLDEN_A = (math.sqrt(5.0) - 1.0) / 2.0


@pytest.mark.parametrize("method", ["direct", "series"])
def test_degenerate_every_integer(method):
    t = renewal_sequence(lattice_from_pmf([0.0, 1.0]), 500, method)
    assert np.allclose(t.u, 1.0, rtol=0, atol=1e-13)


@pytest.mark.parametrize("method", ["direct", "series"])
def test_geometric_memoryless(method):
    p = 0.3
    t = renewal_sequence(geometric_dist(p), 5000, method)
    assert t.u[0] == 1.0
    assert np.max(np.abs(t.u[1:] - p)) < 1e-12


def test_table_invariants(case075):
    t = renewal_sequence(case075[0], 20_000, "series")
    assert t.u[0] == 1.0
    assert np.all((t.u >= 0) & (t.u <= 1))
    assert np.all(np.diff(t.U) >= 0)
    assert t.check(case075[0].pmf(t.N), spot=100, seed=1) < 1e-10


def _random_law(seed):
    rng = np.random.default_rng(seed)
    size = int(rng.integers(2, 60))
    p = rng.random(size + 1)
    p[0] = 0.0
    p[rng.random(size + 1) < 0.3] = 0.0
    p[-1] = max(p[-1], 0.01)
    return lattice_from_pmf(p / p.sum())


@pytest.mark.parametrize("seed", range(5))
def test_methods_agree(seed):
    d = _random_law(seed)
    a = renewal_sequence(d, 10_000, "direct").u
    b = renewal_sequence(d, 10_000, "series").u
    assert np.max(np.abs(a - b)) < 1e-10


def test_methods_agree_heavy_tail(case075):
    a = renewal_sequence(case075[0], 10_000, "direct").u
    b = renewal_sequence(case075[0], 10_000, "series").u
    assert np.max(np.abs(a - b)) < 1e-10


@settings(deadline=None, max_examples=20)
@given(st.lists(st.one_of(st.just(0.0), st.floats(0.01, 1.0)), min_size=2, max_size=12))
def test_eventually_positive_when_aperiodic(weights):
    p = np.array([0.0, *weights, 1.0])
    d = lattice_from_pmf(p / p.sum())
    u = renewal_sequence(d, 200, "direct").u
    ks = np.nonzero(p[:-1] * p[1:] > 0)[0]
    if ks.size:
        n0 = 2 * ks[0] * ks[0] + 2
        assert np.all(u[n0:] > 0)
    assert np.all((u >= 0) & (u <= 1 + 1e-12))


@pytest.mark.slow
def test_inversion_formula_cross_check(case075):
    rng = np.random.default_rng(2024)
    ns = sorted(rng.choice(np.arange(1, 1001), 10, replace=False).tolist())
    u = renewal_sequence(case075[0], 1000, "direct").u
    inv = renewal_inversion(case075[0], ns)
    assert np.max(np.abs(np.asarray(inv) - u[ns])) < 1e-6


def test_inversion_finite_mean():
    u = renewal_inversion(geometric_dist(0.4), [1, 7, 50])
    assert np.max(np.abs(np.asarray(u) - 0.4)) < 1e-10


def test_srt_stable_reduction(stable05):
    d, _, s, e = stable05
    t = renewal_sequence(d, 100_000, "series")
    rows = srt_residual(t, e, s, [1000, 10_000, 100_000])
    assert abs(rows[-1]["relative"]) < 0.05
    assert rows[-1]["rhs"] == pytest.approx(1 / math.pi, rel=1e-6)
    res = [abs(r["residual"]) for r in rows]
    assert res[0] > res[1] > res[2]


def test_srt_rejects_short_table(stable05):
    d, _, s, e = stable05
    with pytest.raises(DomainError):
        srt_residual(renewal_sequence(d, 100), e, s, [1000])


def test_renewal_function_consistency(case075):
    d, _, s, e = case075
    t = renewal_sequence(d, 3000, "series")
    assert t.U[2999] == pytest.approx(math.fsum(t.u[:3000]), rel=1e-14)
    assert renewal_function_values(d, 2999.0)[0] == pytest.approx(t.U[2999], rel=1e-12)
    row = renewal_function_residual(t, e, s, [2999.0])[0]
    assert row["U"] == t.U[2999]


def test_karamata_stable_constant(stable05):
    # P(X > x) = x**-alpha gives U(y) ~ y**alpha / (Gamma(1 - alpha) Gamma(1 + alpha))
    d = stable05[0]
    y = 100_000
    U = renewal_sequence(d, y, "series").U[y]
    assert abs(y ** -0.5 * U * gamma(0.5) * gamma(1.5) - 1) < 0.05


def test_nonlattice_renewal_bracket():
    d, _, _ = build({**ALPHA075, "support": "nonlattice"})
    U, width = renewal_function_values(d, 200.0, step=0.05)
    assert width >= 0 and width < 0.05 * U
    U2, width2 = renewal_function_values(d, 200.0, step=0.025)
    assert abs(U2 - U) <= width + width2


def test_index_one_counterexample():
    rows = srt_a1_residual(counterexample_dist(), [10_000, 100_000])
    assert abs(rows[-1]["L_u"] - 1) < 0.1
    assert abs(rows[-1]["W_integral_scaled"] - 1) < 0.1


def test_index_one_regular_variation():
    # P(X > k) = 1/k; the classical index-one case
    d = lattice_from_tail(lambda k: np.minimum(1.0, 1.0 / np.maximum(k, 1.0)), name="harmonic")
    rows = srt_a1_residual(d, [1000, 100_000], with_integral=False)
    gaps = [abs(r["L_u"] - 1) for r in rows]
    assert gaps[1] < gaps[0] and gaps[1] < 0.1


def test_index_one_rejects_finite_mean():
    with pytest.raises(PreconditionError):
        srt_a1_residual(geometric_dist(0.5), [100])


def test_counterexample_truncated_mean_ratio():
    # L grows like (log x)**2 / (2 log 2), so L(2x)/L(x) - 1 decays like 2 log 2 / log x
    d = counterexample_dist()
    xs = [1e4, 1e5, 1e6, 1e7, 1e8]
    ratios = [truncated_mean_L(d, 2 * x) / truncated_mean_L(d, x) for x in xs]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    for x, q in zip(xs, ratios):
        assert abs((q - 1) * math.log(x) / (2 * math.log(2)) - 1) < 0.35


def test_degenerate_window_enumeration():
    a = GOLDEN_A
    d = lattice_from_pmf([0.0, 1.0], offset=a)
    for y in (10.0, 37.3, 250.0, 999.9):
        for h in (0.1, 0.25, 0.49):
            got = nonarithmetic_window_mass(d, y, h)["window"]
            ks = np.arange(1, int(y) + 2)
            expected = np.count_nonzero((ks * (1 + a) > y - h) & (ks * (1 + a) <= y + h))
            assert got == pytest.approx(expected, abs=1e-12)


def test_window_rejects_bad_h():
    d = lattice_from_pmf([0.0, 1.0], offset=GOLDEN_A)
    for h in (0.0, 0.5, 0.7):
        with pytest.raises(DomainError):
            nonarithmetic_window_mass(d, 10.0, h)


def test_window_independent_of_h():
    d, _, s = build(GOLDEN)
    w1 = nonarithmetic_window_mass(d, 10_000.0, 0.25)["window"] / 0.5
    w2 = nonarithmetic_window_mass(d, 10_000.0, 0.49)["window"] / 0.98
    assert abs(w1 / w2 - 1) < 0.1


def test_rotation_controls():
    y = np.linspace(0.0, 1.0, 21)
    assert rotation_average(GOLDEN_A, 0.25, 10_000, range(0, 100_000, 997), y) < 0.01
    for h in (0.1, 0.25, 0.4):
        assert rotation_average(GOLDEN_A, h, 1, range(0, 50), y) == pytest.approx(max(2 * h, 1 - 2 * h))
    # rational rotation: the orbit visits two points only
    assert rotation_average(0.5, 0.1, 10_000, range(0, 1000, 7), y) > 0.1


def test_writers(tmp_path):
    rows = [{"n": 10, "u_n": 0.5, "scaled": 1.0, "rhs": 1.0, "residual": 0.0}]
    write_srt_csv(rows, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines() == ["n,u_n,scaled,rhs,residual", "10,0.5,1,1,0"]
    rows = [{"y": 10.0, "U": 3.0, "scaled": 1.0, "rhs": 1.0, "residual": 0.0}]
    write_renewal_function_csv(rows, tmp_path / "u.csv")
    assert (tmp_path / "u.csv").read_text().splitlines()[1] == "10,3,1,1,0"
