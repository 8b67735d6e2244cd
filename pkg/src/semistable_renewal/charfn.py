"""Characteristic functions, semistable exponents and tail amplitudes.

``phi_exact`` sums lattice characteristic functions through the identity
``1 - phi_K(t) = (1 - e^{it}) sum_{k>=0} P(K > k) e^{itk}``. The head of the
sum is explicit; the far tail is handled with the smooth tail description
(Euler-Maclaurin plus an accelerated oscillatory integral for small ``t``,
repeated summation by parts otherwise).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from .dists import LatticeDist
from .errors import DomainError, PreconditionError
from .model import LogPeriodic, SemistableSpec, SlowlyVarying
from .quadrature import _lp_kinks, lp_fourier_integral, oscillatory_integral

HEAD = 10_000
SMALL_T = 0.01
# below this the leading term is exact to ~t**(1 - alpha) and 1/t nears overflow
TINY_T = 1e-280


@dataclass(frozen=True)
class CharFnValue:
    t: float
    value: complex
    method: str  # exact-sum | levy-integral | asymptotic


@dataclass(frozen=True)
class AsymptoticAmplitude:
    t: float
    p2: complex
    regime: str  # alpha<1 | alpha>1 | alpha=1-real


# ----------------------------------------------------------------------
# lattice characteristic functions

def _finite_support(d: LatticeDist, limit: int = 1_000_000) -> int | None:
    if d.has_regular_tail or d.atoms is not None:
        return None
    n = 64
    while n <= limit:
        if d.tail_k(n) == 0.0:
            return n
        n *= 4
    return None


def _tail_sum_small_t(d: LatticeDist, t: float, N: int) -> complex:
    """``sum_{j>=N} Fc(j) e^{itj}`` by the midpoint Euler-Maclaurin rule, ``0 < t``."""
    a = N - 0.5
    alpha = d.alpha
    kinks = _lp_kinks(d.M, 1.0 / t)

    def amp(y):
        return d.continuous_tail(y / t) * t ** -alpha

    integral = oscillatory_integral(amp, t * a, 1, kinks=kinks, tol=1e-13) * t ** (alpha - 1.0)

    def f(x):
        return d.continuous_tail(x) * np.exp(1j * t * x)

    d1 = (f(a + 1.0) - f(a - 1.0)) / 2.0
    d3 = (f(a + 2.0) - 2 * f(a + 1.0) + 2 * f(a - 1.0) - f(a - 2.0)) / 2.0
    return integral + d1 / 24.0 - 7.0 * d3 / 5760.0


def _tail_sum_by_parts(d: LatticeDist, t: float, N: int, depth: int = 8) -> complex:
    """``sum_{j>=N} a_j z^j`` by repeated summation by parts, ``z = e^{it}``."""
    z = np.exp(1j * t)
    one_z = -2j * math.sin(t / 2) * np.exp(1j * t / 2)
    a = np.asarray(d.continuous_tail(np.arange(N, N + depth + 1, dtype=float)))
    total = 0.0 + 0.0j
    diff = a.copy()
    best = None
    for q in range(depth):
        term = diff[0] * z ** (N + q) / one_z ** (q + 1)
        noise = 2.0 ** q * 2.2e-16 * a[0] / abs(one_z) ** (q + 1)
        if best is not None and abs(term) < noise:
            break
        total += term
        best = abs(term)
        diff = np.diff(diff)
    return total


def _one_minus_phi_K(d: LatticeDist, t: float, tol: float) -> complex:
    """``1 - E e^{itK}`` for ``t`` in ``(0, pi]``."""
    one_z = -2j * math.sin(t / 2) * np.exp(1j * t / 2)
    if d.atoms is not None:
        pos, prob = d.atoms
        th = t * pos
        return complex((prob * (2 * np.sin(th / 2) ** 2 - 1j * np.sin(th))).sum())
    N = _finite_support(d)
    if N is not None:
        j = np.arange(N + 1, dtype=float)
        return complex(one_z * (d.tail_array(N) * np.exp(1j * t * j)).sum())
    if not d.has_regular_tail:
        N = 1024
        while d.tail_k(N) >= tol / 2:
            N *= 2
            if N > 2 ** 28:
                raise DomainError("tail too heavy for direct summation; give a log-periodic tail")
        j = np.arange(N + 1, dtype=float)
        return complex(one_z * (d.tail_array(N) * np.exp(1j * t * j)).sum())
    if t < TINY_T and d.alpha < 1:
        # p2 is log-periodic in t, so evaluate it one period up
        m = math.ceil(math.log(TINY_T / t) / math.log(d.M.period))
        t_up = t * d.M.period ** m
        return complex(-1j * t ** d.alpha * float(d.ell(1 / t)) * p2_amplitude(d.M, None, d.alpha, t_up))
    N = max(HEAD, d.k0 + 1)
    if t >= SMALL_T:
        N = max(N, min(int(2000 / t), 200_000))
    j = np.arange(N, dtype=float)
    head = (d.tail_array(N - 1) * np.exp(1j * t * j)).sum()
    tail = _tail_sum_small_t(d, t, N) if t < SMALL_T else _tail_sum_by_parts(d, t, N)
    return complex(one_z * (head + tail))


def one_minus_phi(d: LatticeDist, t, tol: float = 1e-12):
    """``1 - phi(t)`` computed without cancellation for small ``|t|``."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(ts.shape, dtype=complex)
    for i, tt in enumerate(ts):
        out[i] = _one_minus_phi_scalar(d, float(tt), tol)
    return out if np.ndim(t) else complex(out[0])


def _one_minus_phi_scalar(d: LatticeDist, t: float, tol: float) -> complex:
    if t == 0.0:
        return 0.0j
    # K is integer valued, so phi_K has period 2 pi
    tr = math.remainder(t, 2 * math.pi)
    if tr == 0.0:
        omk = 0.0j
    else:
        omk = _one_minus_phi_K(d, abs(tr), tol)
        if tr < 0:
            omk = omk.conjugate()
    if d.offset == 0.0:
        return omk
    e = np.exp(1j * t * d.offset)
    return complex(1.0 - e + e * omk)


def phi_exact(d: LatticeDist, t, tol: float = 1e-12):
    """Characteristic function ``E e^{itX}`` of a lattice law."""
    om = one_minus_phi(d, t, tol)
    return 1.0 - om


# ----------------------------------------------------------------------
# semistable exponents

def _mellin_available(spec: SemistableSpec) -> bool:
    return all(m.kind in ("const", "fourier") for _, m in spec.sides())


def levy_exponent_mellin(spec: SemistableSpec, lam: float, t: float) -> complex:
    """Closed form of the exponent for constant or Fourier tail functions.

    Writing ``M(x) = sum_j c_j x**(i w j)`` each harmonic is a stable-type
    term with complex index ``s_j = alpha - i w j``.
    """
    if t == 0:
        return 0.0j
    alpha = spec.alpha
    total = 0.0j
    if alpha == 1.0:
        _require_symmetric(spec)
        for _, m in spec.sides():
            js, cs = m.complex_coeffs()
            for j, cj in zip(js, cs):
                s = 1.0 - 1j * m.frequency * j
                if j == 0:
                    k = -math.pi / 2
                else:
                    k = s * gamma_fn(-s) * np.cos(np.pi * s / 2)
                total += cj * lam ** (1j * m.frequency * j) * k * abs(t) ** s
        return complex(total)
    for side, m in spec.sides():
        js, cs = m.complex_coeffs()
        w = m.frequency
        base = -1j * t * side
        for j, cj in zip(js, cs):
            s = alpha - 1j * w * j
            total += -cj * lam ** (1j * w * j / alpha) * gamma_fn(1 - s) * np.exp(s * np.log(base))
    return complex(total)


def _require_symmetric(spec: SemistableSpec) -> None:
    m_r, m_l = spec.M_R, spec.M_L
    if m_r is None or m_l is None or m_r.to_dict() != m_l.to_dict():
        raise DomainError("index-one exponents are provided for symmetric specs only")


def levy_exponent_quad(spec: SemistableSpec, lam: float, t: float) -> complex:
    """Exponent by integrating the tail form against ``e^{itx}`` numerically."""
    if t == 0:
        return 0.0j
    alpha = spec.alpha
    at = abs(t)
    sg = 1 if t > 0 else -1
    scale = lam ** (1 / alpha) / at
    if alpha == 1.0:
        _require_symmetric(spec)
        total = sum(lp_fourier_integral(m, scale, 1.0, "sin") for _, m in spec.sides())
        return complex(-at * total)
    kernel = "exp" if alpha < 1 else "exp1"
    total = 0.0j
    for side, m in spec.sides():
        total += side * lp_fourier_integral(m, scale, alpha, kernel, sg * side)
    return complex(1j * sg * at ** alpha * total)


def levy_exponent(spec: SemistableSpec, lam: float, t: float, method: str = "auto") -> complex:
    """``y_lam(t) = log psi_lam(t)``; zero drift below index one, zero mean above."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    if method == "auto":
        method = "mellin" if _mellin_available(spec) else "quad"
    if method == "mellin":
        return levy_exponent_mellin(spec, lam, t)
    if method == "quad":
        return levy_exponent_quad(spec, lam, t)
    raise ValueError(f"unknown method {method!r}")


def psi_lambda(spec: SemistableSpec, lam: float, t, method: str = "auto"):
    """Characteristic function of the position-``lam`` semistable law."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.array([np.exp(levy_exponent(spec, lam, float(tt), method)) for tt in ts])
    return out if np.ndim(t) else complex(out[0])


def scaling_relation_check(spec: SemistableSpec, lam: float, t: float, method: str = "quad") -> float:
    """``|y_lam(t) - lam y_1(t lam**(-1/alpha))|``; the drift term vanishes in both conventions."""
    lhs = levy_exponent(spec, lam, t, method)
    rhs = lam * levy_exponent(spec, 1.0, t * lam ** (-1 / spec.alpha), method)
    return float(abs(lhs - rhs))


# ----------------------------------------------------------------------
# tail amplitudes

def _check_ultimately_monotone(p: LogPeriodic | None, alpha: float, name: str) -> None:
    if p is None:
        return
    x = p.period ** np.linspace(0.0, 2.0, 4001)
    tail = p(x) * x ** -alpha
    if np.any(np.diff(tail) > 1e-12 * tail[:-1]):
        raise PreconditionError(f"{name}(x) x^-alpha is not nonincreasing")


def p2_amplitude(h: LogPeriodic | None, k: LogPeriodic | None, alpha: float, t: float) -> complex:
    """Amplitude ``p2(t)`` in ``1 - phi(t) ~ -i sgn(t) |t|**alpha ell(1/|t|) p2(t)``.

    For index one the real-part amplitude ``int sin(y)/y (h + k)(y/|t|) dy``
    is returned instead.
    """
    if t == 0:
        raise DomainError("p2_amplitude needs t != 0")
    at, sg = abs(t), (1 if t > 0 else -1)
    if alpha <= 1:
        _check_ultimately_monotone(h, alpha, "h")
        _check_ultimately_monotone(k, alpha, "k")
    if alpha == 1.0:
        total = 0.0
        for p in (h, k):
            if p is not None:
                total += lp_fourier_integral(p, 1 / at, 1.0, "sin")
        return complex(total)
    kernel = "exp" if alpha < 1 else "exp1"
    total = 0.0j
    if h is not None:
        total += lp_fourier_integral(h, 1 / at, alpha, kernel, sg)
    if k is not None:
        total -= lp_fourier_integral(k, 1 / at, alpha, kernel, -sg)
    return complex(total)


def p2_amplitude_mellin(h: LogPeriodic, alpha: float, t: float) -> complex:
    """Closed form of ``p2`` for a one-sided Fourier ``h`` and ``alpha < 1``."""
    js, cs = h.complex_coeffs()
    w = h.frequency
    total = 0.0j
    for j, cj in zip(js, cs):
        s = alpha - 1j * w * j
        total += cj * abs(t) ** (-1j * w * j) * gamma_fn(1 - s) * np.exp(1j * np.pi * (1 - s) / 2 * np.sign(t))
    return complex(total)


def amplitude_record(h, k, alpha: float, t: float) -> AsymptoticAmplitude:
    regime = "alpha<1" if alpha < 1 else ("alpha>1" if alpha > 1 else "alpha=1-real")
    return AsymptoticAmplitude(t, p2_amplitude(h, k, alpha, t), regime)


def charfn_asymptotic_ratio(d: LatticeDist, t_grid) -> list[dict]:
    """Rows with ``(1 - phi(t)) / (-i t**alpha ell(1/t) p2(t))`` for ``t > 0``."""
    if not d.has_regular_tail:
        raise PreconditionError("ratio needs a law with log-periodic tail description")
    rows = []
    for t in np.atleast_1d(t_grid):
        t = float(t)
        om = one_minus_phi(d, t)
        pred = -1j * t ** d.alpha * float(d.ell(1 / t)) * p2_amplitude(d.M, None, d.alpha, t)
        rows.append({"t": t, "one_minus_phi": om, "predicted": pred, "ratio": om / pred,
                     "abs_ratio": abs(om) / abs(pred)})
    return rows


def imag_ratio_index_one(d: LatticeDist, t: float) -> float:
    """``|Im phi(t)| / (t L(1/t))`` for a one-sided index-one law."""
    from .dists import truncated_mean_L
    om = one_minus_phi(d, t)
    return abs(om.imag) / (t * truncated_mean_L(d, 1 / t))


def W(d: LatticeDist, t) -> float:
    """``Re 1/(1 - phi(t))``."""
    om = one_minus_phi(d, t)
    om = np.atleast_1d(om)
    if np.any(om == 0):
        raise DomainError("phi(t) = 1: W has a pole here")
    out = om.real / np.abs(om) ** 2
    return out if np.ndim(t) else float(out[0])


def W_integral(d: LatticeDist, x: float, t_min: float = 1e-250, panels: int = 400) -> float:
    """``int_0^{1/x} W(t) dt`` integrated in ``log(1/t)``, truncated at ``t_min``."""
    from .quadrature import panel_nodes
    u_edges = np.linspace(math.log(x), math.log(1 / t_min), panels + 1)
    u, w = panel_nodes(u_edges, 16)
    t = np.exp(-u.ravel())
    om = _scaled_one_minus_phi_atoms(d, t) if d.atoms is not None else one_minus_phi(d, t) / t
    vals = om.real / np.abs(om) ** 2  # t W(t), finite as t -> 0
    return float((vals * w.ravel()).sum())


def _scaled_one_minus_phi_atoms(d: LatticeDist, t: np.ndarray) -> np.ndarray:
    pos, prob = d.atoms
    th = t[:, None] * pos[None, :]
    re = (prob * 2 * np.sin(th / 2) ** 2).sum(1) / t
    im = -(prob * np.sin(th)).sum(1) / t
    return re + 1j * im


def nu_bound_scan(d: LatticeDist, t_grid=None, pairs: int = 1000, seed: int = 0,
                  margin: float = 0.1) -> dict:
    """Empirical constants for the three bounds on ``phi`` near the origin.

    ``nu1``: ``|phi(t)| <= exp(-nu1 t**alpha ell(1/t))``, ``nu2``:
    ``|1 - phi(t)|**-1 <= nu2 t**-alpha / ell(1/t)`` and ``nu3``:
    ``|phi(t + h) - phi(t)| <= nu3 |h|**alpha ell(1/|h|)``. Constants are fitted
    on ``t_grid`` and a product grid of pairs, loosened by ``margin`` and then
    validated on an interleaved grid and random pairs.
    """
    alpha = d.alpha if d.alpha is not None else 1.0
    ell = d.ell or SlowlyVarying()
    if t_grid is None:
        t_grid = np.geomspace(1e-6, math.pi, 400)
    t_grid = np.asarray(t_grid, dtype=float)

    def scale(t):
        return t ** alpha * np.asarray(ell(1 / t))

    def fit(ts):
        om = one_minus_phi(d, ts)
        phi_abs = np.abs(1 - om)
        sc = scale(ts)
        return -np.log(phi_abs) / sc, sc / np.abs(om)

    r1, r2 = fit(t_grid)

    def pair_ratios(t, h):
        num = np.abs(one_minus_phi(d, t) - one_minus_phi(d, t + h))
        return num / scale(h)

    # fit nu3 on a product grid, validate on random pairs
    tt, hh = np.meshgrid(np.linspace(-math.pi, math.pi, 64), np.geomspace(1e-6, 1.0, 32))
    r3 = pair_ratios(tt.ravel(), hh.ravel())
    nu1 = float(r1.min()) * (1 - margin)
    nu2 = float(r2.max()) * (1 + margin)
    nu3 = float(r3.max()) * (1 + margin)
    check = np.sqrt(t_grid[:-1] * t_grid[1:])
    c1, c2 = fit(check)
    rng = np.random.default_rng(seed)
    c3 = pair_ratios(rng.uniform(-math.pi, math.pi, pairs),
                     np.exp(rng.uniform(math.log(1e-6), 0.0, pairs)))
    violations = int((c1 < nu1).sum() + (c2 > nu2).sum() + (c3 > nu3).sum())
    return {"nu1": nu1, "nu2": nu2, "nu3": nu3, "violations": violations,
            "grid_min": float(t_grid.min()), "grid_max": float(t_grid.max())}


def positivity_scan(d: LatticeDist, t_grid=None) -> dict:
    """Smallest ``Re(1 - phi(t)) / (t**alpha ell(1/t))`` on a grid."""
    alpha = d.alpha if d.alpha is not None else 1.0
    ell = d.ell or SlowlyVarying()
    if t_grid is None:
        t_grid = np.geomspace(1e-6, 0.1, 300)
    t_grid = np.asarray(t_grid, dtype=float)
    ratio = one_minus_phi(d, t_grid).real / (t_grid ** alpha * np.asarray(ell(1 / t_grid)))
    return {"nu": float(ratio.min()), "violations": int((ratio <= 0).sum())}


def write_charfn_csv(rows: list[dict], path) -> None:
    """Columns ``t, re_phi, im_phi, abs_one_minus_phi, predicted_abs, ratio``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "re_phi", "im_phi", "abs_one_minus_phi", "predicted_abs", "ratio"])
        for r in rows:
            phi = 1 - r["one_minus_phi"]
            w.writerow([f"{r['t']:.17g}", f"{phi.real:.17g}", f"{phi.imag:.17g}",
                        f"{abs(r['one_minus_phi']):.17g}", f"{abs(r['predicted']):.17g}",
                        f"{r['abs_ratio']:.17g}"])


def drift_constant(d, t: float = 1e-9) -> float:
    """Second-order drift ``delta`` in ``1 - phi(t) = -i t^alpha ell p2(t) - i delta t + o(t)``.

    For index below one, ``S_n - n delta`` approaches the limit at a faster
    rate than ``S_n`` itself. Lattice laws read ``delta`` off ``phi`` at small
    ``t``; continuous laws use ``int_0^inf (P(X > x) - ell x^-alpha M(x)) dx``.
    """
    from scipy import integrate

    from .dists import NonlatticeDist
    if d.alpha is None or not d.alpha < 1 or d.M is None:
        raise PreconditionError("drift constant needs a log-periodic tail with index below one")
    if isinstance(d, NonlatticeDist):
        if not d.ell.is_constant():
            raise PreconditionError("drift constant of a continuous law needs constant ell")
        smooth, _ = integrate.quad(lambda x: float(d.ell(x)) * x ** -d.alpha * float(d.M(x)), 0.0, d.x_min,
                                   epsabs=1e-13, limit=200)
        return d.x_min - smooth
    om = complex(one_minus_phi(d, t))
    pred = -1j * t ** d.alpha * float(d.ell(1 / t)) * p2_amplitude(d.M, None, d.alpha, t)
    return ((om - pred) / (-1j * t)).real
