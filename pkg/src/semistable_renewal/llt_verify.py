"""Exact distributions of lattice sums and the local, merging and Stone
limit-theorem error metrics."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import fft as sp_fft
from scipy.interpolate import CubicSpline, PchipInterpolator

from .density import DensityEvaluator
from .dists import LatticeDist, NonlatticeDist
from .errors import DomainError, ResourceError
from .model import NormingScheme, centering_C, norming_A, position_gamma

DIRECT_CONV_MAX = 1 << 14
MAX_BYTES = 3 * 1024 ** 3


@dataclass(frozen=True, eq=False)
class SumPmf:
    """``P(S_n = k)`` for ``0 <= k <= K``.

    Truncating the summand law at ``K`` does not change these values because
    the support is nonnegative. ``deficit`` is ``P(S_n > K)``; ``tail_bound``
    is the union bound ``n P(X > K/n)``.
    """

    n: int
    K: int
    p: np.ndarray
    deficit: float
    tail_bound: float


def _fft_len(K: int) -> int:
    return sp_fft.next_fast_len(2 * K + 1, real=True)


def _conv_trunc(a: np.ndarray, b: np.ndarray, K: int) -> np.ndarray:
    if K < DIRECT_CONV_MAX:
        out = np.convolve(a, b)[:K + 1]
    else:
        size = _fft_len(K)
        fa = sp_fft.rfft(a, size)
        if b is a:
            fa *= fa
        else:
            fa *= sp_fft.rfft(b, size)
        out = sp_fft.irfft(fa, size, overwrite_x=True)[:K + 1].copy()
        del fa
    # FFT round-off can leave values of order -1e-18
    return np.maximum(out, 0.0, out=out)


def _check_memory(K: int, max_bytes: float) -> None:
    size = _fft_len(K)
    # result, base, one spectrum and one padded real transform
    need = 8 * (2 * (K + 1) + size + 2 * (size // 2 + 1)) + 8 * (K + 1)
    if need > max_bytes:
        raise ResourceError(f"pmf power with K = {K} needs about {need / 2**30:.1f} GiB "
                            f"(limit {max_bytes / 2**30:.1f} GiB)")


def sn_pmf_exact(d: LatticeDist, n: int, K: int, max_bytes: float = MAX_BYTES) -> SumPmf:
    """Exact ``P(S_n = k)``, ``k <= K``, by binary exponentiation of the truncated pmf."""
    if K < 1 or n < 1:
        raise DomainError("sn_pmf_exact needs n >= 1 and K >= 1")
    if not d.arithmetic:
        raise DomainError("sn_pmf_exact needs integer support; center the offset first")
    _check_memory(K, max_bytes)
    f = d.pmf(K)
    result = None
    base = f
    m = n
    while m:
        if m & 1:
            result = base if result is None else _conv_trunc(result, base, K)
        m >>= 1
        if m:
            base = _conv_trunc(base, base, K)
    deficit = max(0.0, 1.0 - math.fsum(result))
    return SumPmf(n, K, result, deficit, min(1.0, n * float(d.tail(K / n))))


def pmf_powers(f: np.ndarray, M: int, k_max: int):
    """Yield ``(k, P(S_k = .))`` truncated at ``M`` for ``k = 1..k_max``."""
    f = np.asarray(f[:M + 1], dtype=float)
    size = 1 << int(math.ceil(math.log2(2 * M + 1)))
    ff = np.fft.rfft(f, size)
    p = f.copy()
    yield 1, p
    for k in range(2, k_max + 1):
        p = np.maximum(np.fft.irfft(np.fft.rfft(p, size) * ff, size)[:M + 1], 0.0)
        yield k, p


# ----------------------------------------------------------------------
# limit densities on a grid

@dataclass
class _Target:
    x_lo: float
    x_hi: float
    logx: np.ndarray
    g: np.ndarray
    G: np.ndarray

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        inside = (x >= self.x_lo) & (x <= self.x_hi)
        out[inside] = np.maximum(CubicSpline(self.logx, self.g)(np.log(x[inside])), 0.0)
        return out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        inside = (x >= self.x_lo) & (x <= self.x_hi)
        out[inside] = PchipInterpolator(self.logx, self.G)(np.log(x[inside]))
        out[x > self.x_hi] = self.G[-1]
        return out


def _target(e: DensityEvaluator, lam: float, x_hi: float, points: int = 4000) -> _Target:
    if not e.spec.one_sided:
        raise DomainError("lattice limit checks need a one-sided spec")
    x_lo = e.x_lo
    logx = np.linspace(math.log(x_lo), math.log(x_hi), points)
    xs = np.exp(logx)
    g = np.asarray(e.g(np.full(points, lam), xs))
    G = np.maximum.accumulate(np.asarray(e.G(np.full(points, lam), xs)))
    return _Target(x_lo, x_hi, logx, g, G)


def _cutoff(e: DensityEvaluator, lam: float, level: float) -> float:
    """Smallest ``x`` beyond which ``g_lam`` stays below ``level`` (Levy density bound)."""
    x = 10.0
    while True:
        xs = x * e.spec.r ** np.linspace(0.0, 1.0, 65)
        if float(np.max(e.spec.levy_density(xs, lam))) < level and float(np.max(e.g(lam, xs))) < level:
            return x
        x *= 1.5


@dataclass
class LLTReport:
    n: int
    A_n: float
    C_n: float
    gamma: float
    K: int
    deficit: float
    tail_bound: float
    sup_g: float
    llt_error: float
    llt_error_fixed: float
    merging_error: float
    argmax_x: float

    def to_dict(self) -> dict:
        return asdict(self)


def _prepare(d: LatticeDist, s: NormingScheme, e: DensityEvaluator, n: int, K: int | None, level: float,
             C: float | None = None):
    A = float(norming_A(s, n))
    if C is None:
        C = centering_C(s, d, n)
    gam = float(position_gamma(s, float(n), extend=True))
    sup = e.sup_g()
    if K is None:
        x_cut = max(_cutoff(e, gam, level * sup), _cutoff(e, 1.0, level * sup))
        K = int(math.ceil(C + x_cut * A))
    return A, C, gam, sup, K


def llt_report(d: LatticeDist, s: NormingScheme, e: DensityEvaluator, n: int, K: int | None = None,
               level: float = 1e-4, pmf: SumPmf | None = None, C: float | None = None) -> LLTReport:
    """Local and merging errors of ``S_n`` against ``g_{gamma_n}`` and ``G_{gamma_n}``.

    The sup runs over ``k <= K`` where ``K`` puts ``g`` below ``level * sup g``.
    The error against the fixed density ``g_1`` is recorded as well. ``C``
    overrides the scheme's centering, e.g. with ``n * drift_constant(d)``.
    """
    A, C, gam, sup, K = _prepare(d, s, e, n, K, level, C)
    if pmf is None:
        pmf = sn_pmf_exact(d, n, K)
    k = np.arange(pmf.K + 1, dtype=float)
    x = (k - C) / A
    x_hi = max(float(x[-1]), 2.0 * e.x_lo)
    tgt = _target(e, gam, x_hi)
    dev = np.abs(A * pmf.p - tgt.density(x))
    i = int(np.argmax(dev))
    fixed = tgt if gam == 1.0 else _target(e, 1.0, x_hi)
    dev_fixed = float(np.max(np.abs(A * pmf.p - fixed.density(x))))
    Gx = tgt.cdf(x)
    F = np.cumsum(pmf.p)
    F_left = np.concatenate([[0.0], F[:-1]])
    merge = float(max(np.max(np.abs(F - Gx)), np.max(np.abs(F_left - Gx))))
    return LLTReport(n, A, C, gam, pmf.K, pmf.deficit, pmf.tail_bound, sup, float(dev[i]),
                     dev_fixed, merge, float(x[i]))


def llt_sup_error(d, s, e, n, K=None) -> float:
    """``sup_{k <= K} |A_n P(S_n = k) - g_{gamma_n}((k - C_n)/A_n)|``."""
    return llt_report(d, s, e, n, K).llt_error


def merging_sup_error(d, s, e, n, K=None) -> float:
    """``sup |P((S_n - C_n)/A_n <= x) - G_{gamma_n}(x)|`` over both sides of each jump."""
    return llt_report(d, s, e, n, K).merging_error


def merging_error_against(pmf: SumPmf, A: float, C: float, cdf) -> float:
    """Merging error of an exact pmf against an arbitrary target distribution function."""
    k = np.arange(pmf.K + 1, dtype=float)
    Gx = np.asarray(cdf((k - C) / A), dtype=float)
    F = np.cumsum(pmf.p)
    F_left = np.concatenate([[0.0], F[:-1]])
    return float(max(np.max(np.abs(F - Gx)), np.max(np.abs(F_left - Gx))))


# ----------------------------------------------------------------------
# Monte Carlo check for continuous laws

@dataclass
class StoneReport:
    n: int
    h: float
    samples: int
    seed: int
    sup_g: float
    x: list
    p_hat: list
    radius: list
    g: list
    deviation: list
    max_deviation: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def sample_sums(d: NonlatticeDist, n: int, samples: int, seed: int, chunk: int = 4000) -> np.ndarray:
    """``samples`` independent copies of ``S_n``, generated in fixed-size chunks.

    Summands use the unpolished table quantile; its relative error is far
    below the Monte Carlo noise.
    """
    rng = np.random.default_rng(seed)
    out = np.empty(samples)
    for start in range(0, samples, chunk):
        m = min(chunk, samples - start)
        u = rng.random((m, n))
        out[start:start + m] = np.asarray(d.quantile(u.ravel(), polish=0)).reshape(m, n).sum(axis=1)
    return out


def stone_mc_error(d: NonlatticeDist, s: NormingScheme, e: DensityEvaluator, n: int, h: float | None = None,
                   samples: int = 1_000_000, seed: int = 0, points: int = 50, budget: float = 0.05,
                   C: float | None = None) -> StoneReport:
    """Windowed Monte Carlo check of ``(A_n/2h) P(S_n in (x-h, x+h]) ~ g_{gamma_n}((x - C_n)/A_n)``.

    The grid covers ``x`` in ``[0.1, 3] A_n``. A point passes when the deviation
    is within three binomial standard errors plus ``budget * sup g``. ``C``
    overrides the scheme's centering as in ``llt_report``.
    """
    if samples < 100_000:
        raise DomainError("stone_mc_error needs at least 1e5 samples")
    A = float(norming_A(s, n))
    if C is None:
        C = centering_C(s, d, n)
    gam = float(position_gamma(s, float(n), extend=True))
    if h is None:
        h = 0.5 * A / points
    sums = np.sort(sample_sums(d, n, samples, seed))
    x = A * np.linspace(0.1, 3.0, points)
    # counts in (x - h, x + h]
    cnt = np.searchsorted(sums, x + h, side="right") - np.searchsorted(sums, x - h, side="right")
    p_hat = cnt / samples
    scale = A / (2 * h)
    radius = 3.0 * scale * np.sqrt(np.maximum(p_hat * (1 - p_hat), 1.0 / samples) / samples)
    g = np.asarray(e.g(np.full(points, gam), (x - C) / A))
    dev = np.abs(scale * p_hat - g)
    sup = e.sup_g()
    ok = bool(np.all(dev <= radius + budget * sup))
    return StoneReport(n, h, samples, seed, sup, x.tolist(), p_hat.tolist(), radius.tolist(), g.tolist(),
                       dev.tolist(), float(dev.max()), ok)


def write_llt_csv(reports: list[LLTReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "llt_sup_error", "merging_sup_error", "K", "deficit"])
        for r in reports:
            w.writerow([r.n, f"{r.llt_error:.17g}", f"{r.merging_error:.17g}", r.K, f"{r.deficit:.17g}"])


def write_stone_json(report: StoneReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
