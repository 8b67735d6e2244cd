"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line; the lines are repeated in
the terminal summary. Run with ``pytest tests/test_acceptance.py -v``.
"""
import math

import numpy as np
import pytest
from scipy.interpolate import PchipInterpolator

from helpers import ALPHA04, ALPHA06, ALPHA075, C16, GOLDEN, STABLE05, build, levy_density
from semistable_renewal.charfn import (
    charfn_asymptotic_ratio,
    imag_ratio_index_one,
    nu_bound_scan,
    p2_amplitude,
    positivity_scan,
)
from semistable_renewal.density import DensityEvaluator, srt_rhs_integral
from semistable_renewal.dists import (
    check_domain_membership,
    counterexample_dist,
    counterexample_spec,
    direct_form_residual,
)
from semistable_renewal.llt_verify import llt_report, stone_mc_error
from semistable_renewal.model import LogPeriodic
from semistable_renewal.renewal import (
    renewal_function_residual,
    renewal_sequence,
    rotation_average,
    srt_a1_residual,
    srt_residual,
    window_prediction,
)

RESULTS: dict[int, str] = {}


def record(num: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} [{num:2d}] {title}: {detail}"
    RESULTS[num] = line
    print(line)
    assert ok, line


def _case(cfg):
    d, spec, scheme = build(cfg)
    return d, spec, scheme, DensityEvaluator(spec)


@pytest.fixture(scope="module")
def c075():
    return _case(ALPHA075)


@pytest.fixture(scope="module")
def llt075(c075):
    d, _, s, e = c075
    return [llt_report(d, s, e, n) for n in (2 ** 6, 2 ** 8, 2 ** 10, 2 ** 12)]


def test_01_density_sanity(c075):
    spec, e = c075[1], c075[3]
    lams = spec.c ** (np.arange(8) / 8 - 1.0)
    norm_gap = max(abs(e.normalization(lam) - 1) for lam in lams)
    x = np.geomspace(0.05, 100.0, 200)
    period_gap = max(float(np.max(np.abs(e.g(spec.c * lam, x) - e.g(lam, x)))) for lam in lams)
    lip = e.lipschitz_lambda()
    ok = norm_gap < 1e-6 and period_gap < 1e-7 and math.isfinite(lip)
    record(1, "density sanity", ok,
           f"max|int g - 1| = {norm_gap:.2e} (< 1e-6), max|g_cl - g_l| = {period_gap:.2e} (< 1e-7), "
           f"lambda-Lipschitz = {lip:.3g}")


def test_02_stable_oracles():
    e = _case(STABLE05)[3]
    dens_gap = max(abs(e.g(1.0, x) - levy_density(x)) for x in (0.5, 1.0, 2.0, 7.0, 30.0))
    h = LogPeriodic.constant(1.0, 2.0)
    p2_gap = max(abs(p2_amplitude(h, None, a, 0.37) - math.gamma(1 - a) * np.exp(1j * math.pi * (1 - a) / 2))
                 for a in (0.3, 0.6, 0.9))
    record(2, "stable-reduction oracles", dens_gap < 1e-6 and p2_gap < 1e-6,
           f"density gap {dens_gap:.2e}, p2 gap {p2_gap:.2e} (both < 1e-6)")


def test_03_charfn_asymptotics(c075):
    gaps = {}
    for name, d in (("0.6", build(ALPHA06)[0]), ("0.75", c075[0])):
        gaps[name] = abs(charfn_asymptotic_ratio(d, [1e-4])[0]["abs_ratio"] - 1)
    imag_gap = abs(imag_ratio_index_one(counterexample_dist(), 1e-5) - 1)
    pos = positivity_scan(c075[0], np.geomspace(1e-6, 0.1, 300))
    ok = all(g < 0.05 for g in gaps.values()) and imag_gap < 0.1 and pos["nu"] > 0 and pos["violations"] == 0
    record(3, "charfn asymptotics", ok,
           f"ratio gaps alpha=0.6 {gaps['0.6']:.4f}, alpha=0.75 {gaps['0.75']:.4f} (< 0.05); "
           f"index-one imaginary gap {imag_gap:.4f} (< 0.1); nu = {pos['nu']:.3g}, "
           f"violations {pos['violations']}")


def test_04_nu_bounds(c075):
    scans = {"alpha=0.75": nu_bound_scan(c075[0]), "alpha=0.6": nu_bound_scan(build(ALPHA06)[0])}
    ok = all(min(v["nu1"], v["nu2"], v["nu3"]) > 0 and v["violations"] == 0 for v in scans.values())
    detail = "; ".join(f"{k}: nu1={v['nu1']:.3g} nu2={v['nu2']:.3g} nu3={v['nu3']:.3g} violations={v['violations']}"
                       for k, v in scans.items())
    record(4, "nu bounds", ok, detail)


def test_05_lattice_llt(llt075):
    errs = [r.llt_error for r in llt075]
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    frac = errs[-1] / llt075[-1].sup_g
    d, _, s, e = _case(C16)
    rep = llt_report(d, s, e, 1024)
    gain = 1 - rep.llt_error / rep.llt_error_fixed
    ok = decreasing and frac < 0.05 and gain >= 0.3
    record(5, "lattice LLT", ok,
           f"errors {', '.join(f'{v:.4f}' for v in errs)} at n = 2^6..2^12 (decreasing: {decreasing}); "
           f"final / sup g = {frac:.4f} (< 0.05); gamma gain on c=16 = {gain:.2f} (>= 0.3)")


def test_06_merging(llt075):
    m = llt075[-1].merging_error
    record(6, "merging", m < 0.02, f"merging error at n = 4096 is {m:.4f} (< 0.02)")


def test_07_srt():
    d, _, s, e = _case(ALPHA075)
    table = renewal_sequence(d, 100_000, "series")
    rows = srt_residual(table, e, s, [1000, 10_000, 100_000])
    res = [abs(r["residual"]) for r in rows]
    decreasing = all(b < a for a, b in zip(res, res[1:]))
    final = abs(rows[-1]["relative"])
    agree = float(np.max(np.abs(renewal_sequence(d, 10_000, "direct").u - renewal_sequence(d, 10_000, "series").u)))
    ok = decreasing and final < 0.05 and agree < 1e-10
    record(7, "strong renewal theorem", ok,
           f"|residual| {', '.join(f'{v:.4f}' for v in res)} (decreasing: {decreasing}); "
           f"final relative gap {final:.4f} (< 0.05); methods agree to {agree:.1e} (< 1e-10)")


def test_08_liminf():
    d, _, s, e = _case(ALPHA04)
    table = renewal_sequence(d, 100_000, "series")
    ns = np.arange(1000, 100_001)
    alpha = e.spec.alpha
    scaled = ns ** (1 - alpha) * np.asarray(s.ell(ns.astype(float))) * table.u[ns]
    # the right side is smooth in log n: tabulate it and certify the interpolant
    nodes = np.unique(np.round(np.geomspace(1000, 100_000, 121)).astype(int))
    rhs_nodes = np.array([srt_rhs_integral(e, s, float(n)) for n in nodes])
    interp = PchipInterpolator(np.log(nodes), rhs_nodes)
    rng = np.random.default_rng(8)
    probe = rng.choice(ns, 12, replace=False)
    interp_err = max(abs(float(interp(math.log(n))) - srt_rhs_integral(e, s, float(n))) for n in probe)
    residual = scaled - interp(np.log(ns))
    worst = int(ns[np.argmin(residual)])
    exact_worst = scaled[worst - 1000] - srt_rhs_integral(e, s, float(worst))
    lower = min(float(residual.min()) - 2 * interp_err, exact_worst)
    record(8, "liminf sign", lower >= -0.05,
           f"min residual over n in [1e3, 1e5] is {residual.min():.4f} at n = {worst} "
           f"(direct {exact_worst:.4f}, interpolation error {interp_err:.1e}); bound >= -0.05")


def test_09_renewal_function():
    gaps = {}
    for name, cfg in (("0.4", ALPHA04), ("0.75", ALPHA075)):
        d, _, s, e = _case(cfg)
        table = renewal_sequence(d, 100_000, "series")
        gaps[name] = abs(renewal_function_residual(table, e, s, [1e5])[0]["relative"])
    row = srt_a1_residual(counterexample_dist(), [100_000])[0]
    ok = (all(g < 0.05 for g in gaps.values()) and 0.9 <= row["U_L_over_n"] <= 1.1
          and 0.9 <= row["L_u"] <= 1.1 and abs(row["W_integral_scaled"] - 1) < 0.1)
    record(9, "renewal function", ok,
           f"relative gaps alpha=0.4 {gaps['0.4']:.4f}, alpha=0.75 {gaps['0.75']:.4f} (< 0.05); "
           f"index one: U L / y = {row['U_L_over_n']:.4f}, L u = {row['L_u']:.4f} (in [0.9, 1.1]), "
           f"W integral {row['W_integral_scaled']:.4f} (within 0.1 of 1)")


def test_10_nonarithmetic():
    d, _, s, e = _case(GOLDEN)
    gaps = {h: abs(window_prediction(d, e, s, 1e4, h)["relative"]) for h in (0.25, 0.4)}
    dev = rotation_average(d.offset, 0.25, 10_000, range(0, 100_000, 997), np.linspace(0.0, 1.0, 21))
    ok = all(g < 0.1 for g in gaps.values()) and dev < 0.01
    record(10, "nonarithmetic lattice", ok,
           f"window gaps h=0.25 {gaps[0.25]:.4f}, h=0.4 {gaps[0.4]:.4f} (< 0.1); rotation deviation {dev:.1e} (< 0.01)")


def test_11_stone():
    d, spec, s = build({**ALPHA075, "support": "nonlattice"})
    e = DensityEvaluator(spec)
    a = stone_mc_error(d, s, e, 256, samples=1_000_000, seed=12345)
    b = stone_mc_error(d, s, e, 256, samples=1_000_000, seed=12345)
    same = a.to_dict() == b.to_dict()
    excess = max(dv - rd - 0.05 * a.sup_g for dv, rd in zip(a.deviation, a.radius))
    fails = sum(dv > rd + 0.05 * a.sup_g for dv, rd in zip(a.deviation, a.radius))
    record(11, "nonlattice Stone LLT", a.passed and same,
           f"{fails}/{len(a.x)} grid points outside 3 sigma + 0.05 sup g (worst excess {excess:.4f}, "
           f"max deviation {a.max_deviation:.4f}); seed-reproducible: {same}")


def test_12_counterexample():
    d = counterexample_dist()
    spec, s, ell = counterexample_spec()
    rep = check_domain_membership(d, s, spec, [20, 25], np.linspace(1.01, 1.99, 50))
    p = LogPeriodic.table([1.0, 2.0], [1.0, 2.0], 2.0)
    worst = {}
    for m in range(2, 40):
        # period [2**m, 2**(m+1)); m = 39 reaches past 1e12
        xs = 2.0 ** np.linspace(m, m + 1, 200_001, endpoint=False)
        worst[m] = float(direct_form_residual(d, 1.0, ell, p, xs).max())
    low = {m: v for m, v in worst.items() if v <= 0.2}
    ok = rep.residuals[-1] < 0.05 and not low
    record(12, "counterexample fidelity", ok,
           f"membership residual at n=25 is {rep.residuals[-1]:.4f} (< 0.05); direct-form residual "
           f"> 0.2 in {len(worst) - len(low)}/{len(worst)} periods up to 2^40; "
           f"periods at or below 0.2: {', '.join(f'm={m}: {v:.3f}' for m, v in low.items()) or 'none'}")
