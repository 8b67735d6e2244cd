"""Quadrature helpers: Gauss-Legendre panels, Wynn acceleration and
oscillatory Fourier-type integrals with log-periodic amplitudes."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import NumericError


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_nodes(edges: np.ndarray, n: int = 16):
    """Nodes and weights of composite Gauss-Legendre on consecutive panels."""
    x, w = gauss_legendre(n)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x
    return nodes, half * w


def integrate_panels(f, edges, n: int = 16) -> np.ndarray:
    """Integral of ``f`` over each panel ``[edges[i], edges[i+1]]``."""
    edges = np.asarray(edges, dtype=float)
    nodes, weights = panel_nodes(edges, n)
    return (f(nodes) * weights).sum(axis=1)


def wynn_epsilon(s) -> complex:
    """Wynn epsilon extrapolation of the partial sums ``s``."""
    s = list(s)
    n = len(s)
    if n < 3:
        return s[-1]
    prev = [0.0] * (n + 1)
    cur = list(s)
    best = s[-1]
    for k in range(1, n):
        nxt = []
        for j in range(len(cur) - 1):
            d = cur[j + 1] - cur[j]
            if d == 0:
                # sequence already converged at this level
                return cur[j + 1] if k % 2 == 1 else best
            nxt.append(prev[j + 1] + 1.0 / d)
        prev, cur = cur, nxt
        if k % 2 == 0 and cur:
            best = cur[-1]
        if len(cur) < 2:
            break
    return best


def _edges_with_kinks(edges: np.ndarray, kinks) -> np.ndarray:
    if kinks is None:
        return edges
    pts = kinks(edges[0], edges[-1])
    if pts.size == 0:
        return edges
    return np.unique(np.concatenate([edges, pts]))


def oscillatory_integral(f, lower: float, sign: int = 1, kinks=None, tol: float = 1e-12,
                         n: int = 16, batch: int = 32, max_segments: int = 200_000,
                         window: int = 24) -> complex:
    """``int_lower^inf f(y) exp(i sign y) dy`` for an eventually monotone ``f``.

    The range beyond ``pi`` is cut into half-periods ``[m pi, (m+1) pi]``. The
    resulting alternating partial sums are accelerated with the Wynn epsilon
    algorithm, and integration stops once three consecutive extrapolations
    agree to ``tol``.
    """
    if not lower > 0:
        raise ValueError("oscillatory_integral needs lower > 0")

    def g(y):
        return f(y) * np.exp(1j * sign * y)

    total = 0.0 + 0.0j
    start = lower
    if lower < math.pi:
        m = max(int(math.ceil(math.log(math.pi / lower) / math.log(2.0))), 1)
        edges = lower * (math.pi / lower) ** (np.arange(m + 1) / m)
        edges = _edges_with_kinks(edges, kinks)
        total += integrate_panels(g, edges, n).sum()
        start = math.pi
    m0 = math.floor(start / math.pi) + 1
    first = m0 * math.pi
    if first > start:
        edges = _edges_with_kinks(np.array([start, first]), kinks)
        total += integrate_panels(g, edges, n).sum()
    sums = [total]
    estimates = []
    m = m0
    while m - m0 < max_segments:
        seg_edges = math.pi * np.arange(m, m + batch + 1, dtype=float)
        edges = _edges_with_kinks(seg_edges, kinks)
        parts = integrate_panels(g, edges, n)
        # fold sub-panels back into half-period segments
        owner = np.minimum(((edges[:-1] - seg_edges[0]) / math.pi + 1e-9).astype(int), batch - 1)
        seg = np.bincount(owner, weights=parts.real, minlength=batch) + \
            1j * np.bincount(owner, weights=parts.imag, minlength=batch)
        acc = sums[-1] + np.cumsum(seg)
        sums.extend(acc.tolist())
        m += batch
        for j in range(len(sums) - batch, len(sums)):
            if j < 4:
                continue
            estimates.append(wynn_epsilon(sums[max(0, j - window):j + 1]))
        if len(estimates) >= 3:
            e = estimates[-3:]
            if abs(e[2] - e[1]) < tol and abs(e[1] - e[0]) < tol:
                return complex(e[2])
    raise NumericError(f"oscillatory integral failed to converge; last estimates {estimates[-3:]}")


def _lp_kinks(h, scale: float):
    """Kink locations of ``y -> h(y * scale)`` inside ``[a, b]``."""
    base = h.kinks()
    if base.size == 0:
        return None
    r = h.period

    def kinks(a, b):
        j0 = math.floor(math.log(a * scale) / math.log(r)) - 1
        j1 = math.ceil(math.log(b * scale) / math.log(r)) + 1
        pts = (base[None, :] * r ** np.arange(j0, j1 + 1)[:, None]).ravel() / scale
        return pts[(pts > a) & (pts < b)]

    return kinks


def lp_power_moments(h, scale: float, alpha: float, upper: float, powers) -> np.ndarray:
    """``int_0^upper y**(k - alpha) h(y scale) dy`` for each ``k`` in ``powers``.

    The integrand over ``[upper/r**(j+1), upper/r**j]`` is the one over the
    base period scaled by ``r**(-j (k + 1 - alpha))``, so the integral is a
    geometric series of one base-period integral.
    """
    powers = np.asarray(powers, dtype=float)
    r = h.period
    expo = powers + 1 - alpha
    if np.any(expo <= 0):
        raise ValueError("moment exponents must exceed -1")
    edges = upper * r ** (np.linspace(-1.0, 0.0, 17))
    kk = _lp_kinks(h, scale)
    if kk is not None:
        edges = _edges_with_kinks(edges, kk)
    nodes, weights = panel_nodes(edges, 16)
    hv = h(nodes * scale) * weights
    logy = np.log(nodes)
    out = np.empty(powers.size)
    for i, k in enumerate(powers):
        base = float((np.exp((k - alpha) * logy) * hv).sum())
        out[i] = base / (1.0 - r ** (-expo[i]))
    return out


def lp_fourier_integral(h, scale: float, alpha: float, kernel: str = "exp", sign: int = 1,
                        lower: float = 0.0, tol: float = 1e-12) -> complex:
    """``int_lower^inf y**-alpha h(y scale) K(y) dy`` for log-periodic ``h``.

    ``kernel`` selects ``K``: ``"exp"`` is ``exp(i sign y)`` (needs alpha < 1
    when ``lower = 0``), ``"exp1"`` is ``exp(i sign y) - 1`` (alpha in (1, 2)),
    and ``"sin"`` is ``sin(y)``. The part near zero is summed as a power
    series against exact log-periodic moments; the rest is an accelerated
    oscillatory integral.
    """
    y0 = 1.0
    r = h.period
    kinks = _lp_kinks(h, scale)

    def amp(y):
        return y ** -alpha * h(y * scale)

    if kernel == "exp":
        ks = np.arange(0, 30)
        coef = (1j * sign) ** ks / np.array([math.factorial(int(k)) for k in ks], dtype=float)
    elif kernel == "exp1":
        ks = np.arange(1, 30)
        coef = (1j * sign) ** ks / np.array([math.factorial(int(k)) for k in ks], dtype=float)
    elif kernel == "sin":
        ks = np.arange(1, 30, 2)
        coef = np.array([(-1) ** ((k - 1) // 2) / math.factorial(int(k)) for k in ks], dtype=complex)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")

    near = 0.0 + 0.0j
    a = max(lower, y0)
    if lower < y0:
        mom = lp_power_moments(h, scale, alpha, y0, ks)
        if lower > 0:
            mom = mom - lp_power_moments(h, scale, alpha, lower, ks)
        near = complex((coef * mom).sum())
    osc = oscillatory_integral(amp, a, 1 if kernel == "sin" else sign, kinks=kinks, tol=tol)
    if kernel == "sin":
        return near.real + osc.imag
    if kernel == "exp1":
        # subtract int_a^inf y^-alpha h dy, a geometric series over periods
        edges = a * r ** np.linspace(0.0, 1.0, 17)
        if kinks is not None:
            edges = _edges_with_kinks(edges, kinks)
        base = integrate_panels(amp, edges).sum()
        osc = osc - base / (1.0 - r ** (1.0 - alpha))
    return near + osc
