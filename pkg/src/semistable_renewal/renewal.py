"""Renewal sequences, renewal functions and their residuals against the
density-integral limits."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .charfn import W_integral, one_minus_phi, p2_amplitude
from .density import DensityEvaluator, renewal_rhs_integral, srt_rhs_integral
from .dists import LatticeDist, NonlatticeDist, lattice_from_tail, truncated_mean_L
from .errors import DomainError, NumericError, PreconditionError
from .model import NormingScheme
from .quadrature import panel_nodes

DIRECT_MAX = 100_000


@dataclass(frozen=True, eq=False)
class RenewalTable:
    """Renewal masses ``u_0..u_N`` and the cumulative ``U(n) = sum_{m <= n} u_m``."""

    u: np.ndarray
    U: np.ndarray
    dist_name: str
    method: str

    @property
    def N(self) -> int:
        return self.u.size - 1

    def check(self, f: np.ndarray, spot: int = 100, seed: int = 0, tol: float = 1e-10) -> float:
        """Largest recursion defect ``|u_n - sum f_k u_{n-k}|`` over random ``n``."""
        rng = np.random.default_rng(seed)
        ns = rng.integers(1, self.N + 1, size=min(spot, self.N))
        worst = max(abs(self.u[n] - float(np.dot(f[1:n + 1], self.u[n - 1::-1]))) for n in ns)
        if worst > tol:
            raise NumericError(f"renewal recursion defect {worst:.3g} exceeds {tol:.1g}")
        return worst


def _renewal_direct(f: np.ndarray) -> np.ndarray:
    N = f.size - 1
    u = np.zeros(N + 1)
    scale = 1.0 / (1.0 - f[0])
    u[0] = scale
    for n in range(1, N + 1):
        u[n] = scale * float(np.dot(f[1:n + 1], u[n - 1::-1]))
    return u


def _mul_trunc(a: np.ndarray, b: np.ndarray, m: int) -> np.ndarray:
    size = 1 << int(math.ceil(math.log2(a.size + b.size - 1)))
    return np.fft.irfft(np.fft.rfft(a, size) * np.fft.rfft(b, size), size)[:m]


def _renewal_series(f: np.ndarray) -> np.ndarray:
    """Power series of ``1 / (1 - F(z))`` by Newton doubling ``h <- h (2 - g h)``."""
    N = f.size - 1
    g = -f.copy()
    g[0] += 1.0
    h = np.array([1.0 / g[0]])
    m = 1
    while m < N + 1:
        m = min(2 * m, N + 1)
        gh = _mul_trunc(g[:m], h, m)
        e = -gh
        e[0] += 2.0
        h = _mul_trunc(h, e, m)
    return h


def renewal_sequence(d: LatticeDist, N: int, method: str = "auto") -> RenewalTable:
    """Exact renewal masses ``u_n = sum_k P(S_k = n)`` for ``n <= N``.

    ``method`` is ``direct`` (the recursion, quadratic), ``series`` (Newton
    reciprocal of the generating function) or ``auto``, which uses the
    recursion up to ``N = 1e5``.
    """
    if not d.arithmetic:
        raise DomainError("renewal_sequence needs an arithmetic law (offset 0)")
    if N < 1:
        raise DomainError("renewal_sequence needs N >= 1")
    f = d.pmf(N)
    if method == "auto":
        method = "direct" if N <= DIRECT_MAX else "series"
    if method == "direct":
        u = _renewal_direct(f)
        tag = "direct-recursion"
    elif method == "series":
        u = _renewal_series(f)
        tag = "series-reciprocal"
    else:
        raise ValueError(f"unknown method {method!r}")
    return RenewalTable(u, np.cumsum(u), d.name, tag)


def _inversion_head(d: LatticeDist, n: int, t_min: float) -> float:
    """``Re int_0^t_min e^{-int} / (1 - phi(t)) dt`` from the small-``t`` form of ``1 - phi``."""
    alpha = d.alpha
    if d.has_regular_tail and alpha < 1 and d.ell.is_constant():
        # 1 - phi ~ -i t^alpha ell p2(t) with p2 log-periodic of period r in t
        r = d.M.period
        t, w = panel_nodes(np.log(t_min) - np.log(r) * np.linspace(1.0, 0.0, 9), 16)
        t, w = np.exp(t.ravel()), w.ravel() * np.exp(t.ravel())
        p2 = np.array([p2_amplitude(d.M, None, alpha, float(tt)) for tt in t])
        vals = (1.0 / (-1j * t ** alpha * float(d.ell(1.0)) * p2)).real
        return float((vals * w).sum()) / (1.0 - r ** (alpha - 1.0))
    index = alpha if alpha is not None and alpha < 1 else 0.0
    return t_min * (np.exp(-1j * n * t_min) / complex(one_minus_phi(d, t_min))).real / (1.0 - index)


def _finite_mean(d: LatticeDist, limit: int = 1 << 24) -> float | None:
    """``E X`` when the tail is summable to round-off below ``limit``; else ``None``."""
    if d.has_regular_tail and d.alpha <= 1:
        return None
    N = 1024
    while N <= limit:
        tail = d.tail_array(N)
        if tail[-1] < 1e-17:
            return float(tail.sum()) + d.offset
        N *= 4
    return None


def renewal_inversion(d: LatticeDist, n, t_min: float = 1e-12, panels_per_decade: int = 12):
    """``u_n = (1/pi) Re int_0^pi e^{-int} / (1 - phi(t)) dt`` by quadrature.

    ``1/(1 - phi)`` is evaluated once on a grid fine enough for the largest
    ``n`` and reused. Below ``t_min`` the leading small-``t`` form of
    ``1 - phi`` is used, with ``e^{-int}`` replaced by one. For a finite mean
    ``mu`` the pole at zero is a principal value plus a point mass, which
    adds ``1/(2 mu)``.
    """
    ns = np.atleast_1d(np.asarray(n, dtype=int))
    decades = math.log10(math.pi / t_min)
    edges = np.geomspace(t_min, math.pi, int(decades * panels_per_decade) + 1)
    # one 16-node panel per half period of e^{-int}
    lin = np.arange(0.0, math.pi, math.pi / max(int(ns.max()), 1))[1:]
    edges = np.unique(np.concatenate([edges, lin]))
    t, w = panel_nodes(edges, 16)
    t, w = t.ravel(), w.ravel()
    inv = w / np.asarray(one_minus_phi(d, t))
    mu = _finite_mean(d)
    atom = 0.0 if mu is None else 0.5 / mu
    out = np.array([(float((np.exp(-1j * k * t) * inv).real.sum()) + _inversion_head(d, int(k), t_min)) / math.pi
                    + atom for k in ns])
    return out if np.ndim(n) else float(out[0])


def _ell(d, s: NormingScheme):
    return d.ell if getattr(d, "ell", None) is not None else s.ell


def srt_residual(table: RenewalTable, e: DensityEvaluator, s: NormingScheme, n_list, ell=None) -> list[dict]:
    """Rows ``(n, u_n, n**(1-alpha) ell(n) u_n, rhs, residual)``.

    Indices ``alpha <= 1/2`` are accepted: there only the lower bound on the
    lower limit of the residual is expected to hold.
    """
    alpha = e.spec.alpha
    ell = ell or s.ell
    rows = []
    for n in n_list:
        n = int(n)
        if n > table.N:
            raise DomainError(f"n = {n} exceeds the table length {table.N}")
        scaled = n ** (1 - alpha) * float(ell(n)) * table.u[n]
        rhs = srt_rhs_integral(e, s, float(n))
        rows.append({"n": n, "u_n": float(table.u[n]), "scaled": scaled, "rhs": rhs,
                     "residual": scaled - rhs, "relative": (scaled - rhs) / rhs})
    return rows


def renewal_function_values(d, y: float, step: float = 1.0, method: str = "auto") -> tuple[float, float]:
    """``U(y) = sum_k P(S_k <= y)`` with an error bracket.

    Lattice laws give the exact value (bracket width zero). A continuous law
    is squeezed between the renewal functions of its upward and downward
    discretizations on the grid ``step Z``.
    """
    if isinstance(d, LatticeDist):
        if not d.arithmetic:
            raise DomainError("renewal function of a shifted lattice law is not tabulated")
        table = renewal_sequence(d, int(math.floor(y)), method)
        return float(table.U[-1]), 0.0
    if not isinstance(d, NonlatticeDist):
        raise TypeError("expected a LatticeDist or NonlatticeDist")
    N = int(math.floor(y / step))
    up = lattice_from_tail(lambda k: d.tail(k * step), name="ceil")
    down = lattice_from_tail(lambda k: d.tail((k + 1) * step), name="floor")
    lo = float(renewal_sequence(up, N, method).U[-1])
    f = down.pmf(N)
    u = _renewal_series(f) if N > DIRECT_MAX or method == "series" else _renewal_direct(f)
    hi = float(u.sum())
    return 0.5 * (lo + hi), 0.5 * (hi - lo)


def renewal_function_residual(source, e: DensityEvaluator, s: NormingScheme, y_list, ell=None) -> list[dict]:
    """Rows ``(y, U(y), y**-alpha ell(y) U(y), rhs, residual)``.

    ``source`` is a ``RenewalTable`` (lattice path) or a distribution.
    """
    alpha = e.spec.alpha
    ell = ell or s.ell
    rows = []
    for y in y_list:
        y = float(y)
        if isinstance(source, RenewalTable):
            if y > source.N:
                raise DomainError(f"y = {y} exceeds the table length {source.N}")
            U, width = float(source.U[int(math.floor(y))]), 0.0
        else:
            U, width = renewal_function_values(source, y)
        scaled = y ** -alpha * float(ell(y)) * U
        rhs = renewal_rhs_integral(e, s, y)
        rows.append({"y": y, "U": U, "bracket": width, "scaled": scaled, "rhs": rhs,
                     "residual": scaled - rhs, "relative": (scaled - rhs) / rhs})
    return rows


def _require_infinite_mean(d, probe=(1e3, 1e6)) -> None:
    lo, hi = (truncated_mean_L(d, x) for x in probe)
    if hi - lo < 0.05 * hi:
        raise PreconditionError(
            f"truncated mean looks bounded (L({probe[0]:g}) = {lo:.6g}, L({probe[1]:g}) = {hi:.6g}); "
            "the index-one renewal theorem needs an infinite mean")


def srt_a1_residual(d: LatticeDist, n_list, table: RenewalTable | None = None, with_integral: bool = True) -> list[dict]:
    """Rows ``(n, L(n), u_n, L(n) u_n, U(n) L(n) / n)`` for an index-one law.

    With ``with_integral`` the rows also carry ``(2/pi) L(n) int_0^{1/n} W``,
    the integral of ``Re 1/(1 - phi)`` that drives the limit.
    """
    _require_infinite_mean(d)
    n_max = int(max(n_list))
    if table is None:
        table = renewal_sequence(d, n_max)
    rows = []
    for n in n_list:
        n = int(n)
        L = truncated_mean_L(d, float(n))
        row = {"n": n, "L": L, "u_n": float(table.u[n]), "L_u": L * float(table.u[n]),
               "U_L_over_n": float(table.U[n]) * L / n}
        if with_integral:
            row["W_integral_scaled"] = 2.0 / math.pi * L * W_integral(d, float(n))
        rows.append(row)
    return rows


def _window_indicators(a: float, y: float, h: float, ks: np.ndarray):
    """``(m_k, I_k)``: nearest integer to ``y - k a`` and whether it lies in ``(y - ka - h, y - ka + h]``."""
    z = y - ks * a
    m = np.rint(z)
    delta = z - m
    return m, (delta >= -h) & (delta < h)


def nonarithmetic_window_mass(d: LatticeDist, y: float, h: float, K_max: int | None = None) -> dict:
    """``U(y + h) - U(y - h)`` for ``X = a + K`` with irrational offset ``a``.

    ``S_k = k a + S~_k`` with ``S~_k`` a sum of the integer parts, so only the
    integer nearest to ``y - k a`` can contribute. Since ``K >= k0``, every
    ``k > (y + h) / (a + k0)`` gives zero, which bounds the sum exactly.
    """
    from .llt_verify import pmf_powers

    if not 0 < h < 0.5:
        raise DomainError(f"window half-width h must lie in (0, 1/2), got {h}")
    a = d.offset
    k_exact = int(math.floor((y + h) / (a + d.k0)))
    K_max = k_exact if K_max is None else min(int(K_max), k_exact)
    M = int(math.floor(y + h)) + 1
    ks = np.arange(1, K_max + 1, dtype=float)
    m, ind = _window_indicators(a, y, h, ks)
    f = d.pmf(M)
    total = 0.0
    for k, p in pmf_powers(f, M, K_max):
        if ind[k - 1] and 0 <= m[k - 1] <= M:
            total += p[int(m[k - 1])]
    return {"y": y, "h": h, "window": total, "K_max": K_max, "exact_bound": k_exact,
            "omitted_exact_zero": K_max == k_exact}


def window_prediction(d: LatticeDist, e: DensityEvaluator, s: NormingScheme, y: float, h: float) -> dict:
    """Scaled window mass ``y**(1-alpha) ell(y) W / (2h)`` next to the density integral."""
    res = nonarithmetic_window_mass(d, y, h)
    alpha = e.spec.alpha
    scaled = y ** (1 - alpha) * float(_ell(d, s)(y)) * res["window"] / (2 * h)
    rhs = srt_rhs_integral(e, s, y)
    return {**res, "scaled": scaled, "rhs": rhs, "relative": (scaled - rhs) / rhs}


def rotation_average(a: float, h: float, N: int, m_range, y_grid) -> float:
    """``sup |N^{-1} sum_{k=m+1}^{m+N} I_{k,y} - 2h|`` over window starts ``m`` and ``y``."""
    if not 0 < h < 0.5:
        raise DomainError(f"h must lie in (0, 1/2), got {h}")
    m_range = np.asarray(list(m_range), dtype=int)
    lo, hi = int(m_range.min()) + 1, int(m_range.max()) + N
    ks = np.arange(lo, hi + 1, dtype=float)
    worst = 0.0
    for y in np.atleast_1d(y_grid):
        _, ind = _window_indicators(a, float(y), h, ks)
        csum = np.concatenate([[0], np.cumsum(ind)])
        start = m_range + 1 - lo
        means = (csum[start + N] - csum[start]) / N
        worst = max(worst, float(np.abs(means - 2 * h).max()))
    return worst


def write_srt_csv(rows: list[dict], path) -> None:
    _write(rows, ["n", "u_n", "scaled", "rhs", "residual"], path)


def write_renewal_function_csv(rows: list[dict], path) -> None:
    _write(rows, ["y", "U", "scaled", "rhs", "residual"], path)


def _write(rows, cols, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([r[c] if isinstance(r[c], int) else f"{r[c]:.17g}" for c in cols])
