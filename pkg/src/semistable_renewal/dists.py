"""Concrete renewal distributions with exact tails.

Lattice laws live on ``offset + {1, 2, ...}`` and are defined through the
integer tail ``P(K > k)`` of their integer part ``K``. Nonlattice laws are
defined through a continuous tail. Both carry the log-periodic description
of their tail when they come from a semistable construction, which the
characteristic-function code uses for tail sums.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, stats

from .errors import ConfigError, ConstructionError, DomainError, NumericError
from .model import (LogPeriodic, NormingScheme, SemistableSpec, SlowlyVarying, norming_A,
                    spec_from_dict)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_SCAN = 1_000_000


def _scalar_or_array(out):
    out = np.asarray(out)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class LatticeDist:
    """Law of ``offset + K`` with ``K`` a positive integer.

    ``tail_int`` maps an array of integers (stored as floats) to ``P(K > k)``.
    Semistable constructions also set ``alpha``, ``ell`` and ``M`` so that
    ``P(K > k) = ell(k) k**-alpha M(k)`` for ``k >= k0``. Laws whose tail is a
    step function with geometrically decaying steps instead list their atoms.
    """

    tail_int: Callable[[np.ndarray], np.ndarray]
    offset: float = 0.0
    k0: int = 1
    alpha: float | None = None
    ell: SlowlyVarying | None = None
    M: LogPeriodic | None = None
    atoms: tuple[np.ndarray, np.ndarray] | None = None
    name: str = "lattice"

    def __post_init__(self):
        if not 0.0 <= self.offset < 1.0:
            raise ConstructionError(f"offset must lie in [0, 1), got {self.offset}")

    @property
    def arithmetic(self) -> bool:
        return self.offset == 0.0

    @property
    def has_regular_tail(self) -> bool:
        return self.alpha is not None and self.M is not None

    def tail_k(self, k):
        """``P(K > k)`` for integer-valued ``k``; equal to 1 for ``k < 0``."""
        k = np.asarray(k, dtype=float)
        out = np.ones(k.shape)
        pos = k >= 0
        if np.any(pos):
            out[pos] = self.tail_int(k[pos])
        return _scalar_or_array(out)

    def tail(self, x):
        """``P(X > x)`` for real ``x``."""
        x = np.asarray(x, dtype=float)
        return self.tail_k(np.floor(x - self.offset))

    def cdf(self, x):
        return _scalar_or_array(1.0 - np.asarray(self.tail(x)))

    def continuous_tail(self, x):
        """Smooth extension ``ell(x) x**-alpha M(x)`` of the integer tail."""
        if not self.has_regular_tail:
            raise DomainError("this lattice law has no log-periodic tail description")
        x = np.asarray(x, dtype=float)
        return _scalar_or_array(self.ell(x) * x ** -self.alpha * self.M(x))

    def tail_array(self, N: int) -> np.ndarray:
        """``P(K > k)`` for ``k = 0..N``."""
        return np.asarray(self.tail_k(np.arange(N + 1, dtype=float)), dtype=float).reshape(-1)

    def pmf(self, N: int) -> np.ndarray:
        """``P(K = k)`` for ``k = 0..N``."""
        tail = self.tail_array(N)
        f = np.empty(N + 1)
        f[0] = 1.0 - tail[0]
        f[1:] = tail[:-1] - tail[1:]
        return f

    def quantile(self, s):
        """Generalized inverse ``inf{x : F(x) >= s}``."""
        s = np.asarray(s, dtype=float)
        u = 1.0 - s
        lo = np.zeros(s.shape)
        hi = np.ones(s.shape)
        # exponential bracketing then integer bisection on P(K > k) <= u
        while True:
            bad = np.asarray(self.tail_k(hi)) > u
            if not np.any(bad):
                break
            if np.max(hi) > 2.0 ** 60:
                raise NumericError("quantile bracket exceeded 2**60")
            hi = np.where(bad, hi * 2.0, hi)
        while np.any(hi - lo > 1):
            mid = np.floor((lo + hi) / 2)
            ok = np.asarray(self.tail_k(mid)) <= u
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
        k = np.where(np.asarray(self.tail_k(lo)) <= u, lo, hi)
        return _scalar_or_array(k + self.offset)

    def quantile_integral(self, lo: float, hi: float) -> float:
        """``int_lo^hi Q(s) ds`` summed exactly over the quantile steps."""
        kmax = int(np.asarray(self.quantile(hi)) - self.offset)
        if kmax > 100_000_000:
            raise NumericError(f"quantile integral needs {kmax} steps")
        ks = np.arange(kmax + 1, dtype=float)
        F = 1.0 - self.tail_array(kmax)
        left = np.concatenate([[0.0], F[:-1]])
        width = np.clip(np.minimum(F, hi) - np.maximum(left, lo), 0.0, None)
        return float(((ks + self.offset) * width).sum())

    def mean_K(self, N: int) -> float:
        """``E min(K, N + 1)``, the truncated mean of the integer part."""
        return float(self.tail_array(N).sum())


@dataclass(frozen=True, eq=False)
class NonlatticeDist:
    """Continuous law on ``[x_min, inf)`` given by its tail."""

    tail_fn: Callable[[np.ndarray], np.ndarray]
    x_min: float = 0.0
    alpha: float | None = None
    ell: SlowlyVarying | None = None
    M: LogPeriodic | None = None
    c: float | None = None
    name: str = "nonlattice"
    _base: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape)
        above = x > self.x_min
        if np.any(above):
            out[above] = np.minimum(self.tail_fn(x[above]), 1.0)
        return _scalar_or_array(out)

    def cdf(self, x):
        return _scalar_or_array(1.0 - np.asarray(self.tail(x)))

    @property
    def periodic(self) -> bool:
        return self._base is not None

    def quantile(self, s, polish: int = 2):
        """Generalized inverse of the distribution function.

        Periodic tails use a log-log table with about ``1e-11`` relative
        error, refined by ``polish`` Newton steps.
        """
        s = np.asarray(s, dtype=float)
        if self.periodic:
            return _scalar_or_array(self._periodic_quantile(s, polish))
        return _scalar_or_array(self._bisect_quantile(s))

    def _bisect_quantile(self, s):
        u = 1.0 - s
        lo = np.full(s.shape, max(self.x_min, 1e-300))
        hi = np.maximum(lo, 1.0) * 2.0
        while True:
            bad = np.asarray(self.tail(hi)) > u
            if not np.any(bad):
                break
            if np.max(hi) > 1e300:
                raise NumericError("quantile bracket overflow")
            hi = np.where(bad, hi * 2.0, hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            ok = np.asarray(self.tail(mid)) <= u
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
            if np.all(hi - lo <= 4e-16 * hi):
                break
        return np.where(s <= 0, self.x_min, hi)

    def _periodic_quantile(self, s, polish: int):
        # tail(r x) = tail(x) / c beyond x_min: reduce 1 - s into (1/c, 1]
        logx, logt = self._base
        c = self.c
        r = c ** (1 / self.alpha)
        u = np.clip(1.0 - s, 1e-300, 1.0)
        j = np.floor(-np.log(u) / math.log(c) + 1e-13)
        v = u * c ** j
        v = np.where(v > 1.0, v / c, v)
        j = np.where(v * c ** -j > u * (1 + 1e-12), j - 1, j)
        x = np.exp(np.interp(-np.log(v), -logt, logx))
        lo, hi = math.exp(logx[0]), math.exp(logx[-1])
        for _ in range(polish):
            f = np.asarray(self.tail_fn(x)) - v
            h = x * 1e-7
            d = (np.asarray(self.tail_fn(x + h)) - np.asarray(self.tail_fn(x - h))) / (2 * h)
            x = np.clip(x - f / np.where(d < 0, d, -1.0), lo, hi)
        return np.where(s <= 0, self.x_min, x * r ** j)


@dataclass
class DomainCheckReport:
    """Residuals ``sup_x |k_n P(X > A_{k_n} x) - M_R(x) x**-alpha|`` per ``n``."""

    n_grid: list[int]
    x_grid: list[float]
    residuals: list[float]
    residuals_left: list[float] | None
    tolerance: float
    member: bool

    def to_dict(self) -> dict:
        return {
            "n_grid": list(self.n_grid),
            "x_grid": list(self.x_grid),
            "residuals": list(self.residuals),
            "residuals_left": self.residuals_left,
            "tolerance": self.tolerance,
            "verdict": "member" if self.member else "not member",
        }


# ----------------------------------------------------------------------
# constructions

def lattice_from_pmf(probs, offset: float = 0.0, name: str = "finite") -> LatticeDist:
    """Finite-support lattice law with ``P(K = k) = probs[k]``."""
    p = np.asarray(probs, dtype=float)
    if np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=1e-12):
        raise ConstructionError("probabilities must be nonnegative and sum to 1")
    if p[0] > 0:
        raise ConstructionError("lattice renewal laws need P(K = 0) = 0")
    tail = np.clip(1.0 - np.cumsum(p), 0.0, 1.0)
    tail[np.cumsum(p[::-1])[::-1] <= 0] = 0.0

    def tail_int(k):
        idx = np.minimum(k.astype(np.int64), p.size - 1)
        return tail[idx]

    return LatticeDist(tail_int, offset=offset, name=name)


def lattice_from_tail(tail_fn, offset: float = 0.0, name: str = "lattice") -> LatticeDist:
    """Lattice law from a vectorized integer tail ``k -> P(K > k)``."""
    return LatticeDist(lambda k: np.asarray(tail_fn(k), dtype=float), offset=offset, name=name)


def geometric_dist(p: float) -> LatticeDist:
    """``P(K = k) = p (1 - p)**(k - 1)`` for ``k >= 1``."""
    return lattice_from_tail(lambda k: (1.0 - p) ** k, name=f"geometric({p})")


def make_semistable_lattice(spec: SemistableSpec, ell: SlowlyVarying | None = None,
                            offset: float = 0.0, scan: int = _SCAN) -> LatticeDist:
    """Lattice law with ``P(K > k) = min(1, ell(k) k**-alpha M_R(k))``.

    The support starts at the least ``k0 >= 1`` where the formula is at most
    one; all lower mass is folded into ``k0``.
    """
    if not spec.one_sided:
        raise ConstructionError("lattice construction supports one-sided specs only")
    ell = ell or SlowlyVarying()
    alpha, M = spec.alpha, spec.M_R

    def formula(k):
        return ell(k) * k ** -alpha * M(k)

    k0 = None
    start = 1
    while k0 is None:
        ks = np.arange(start, start + scan, dtype=float)
        ok = np.nonzero(np.asarray(formula(ks)) <= 1.0)[0]
        if ok.size:
            k0 = int(ks[ok[0]])
        start += scan
        if start > 1e9:
            raise ConstructionError("tail formula never drops below 1 on k < 1e9")
    ks = np.arange(k0, k0 + scan, dtype=float)
    vals = np.asarray(formula(ks))
    bad = np.nonzero(np.diff(vals) > 1e-13 * vals[:-1])[0]
    if bad.size:
        raise ConstructionError(f"tail ell(k) k^-alpha M_R(k) increases at k = {int(ks[bad[0] + 1])}")

    def tail_int(k):
        k = np.asarray(k, dtype=float)
        out = np.ones(k.shape)
        hi = k >= k0
        if np.any(hi):
            out[hi] = np.minimum(formula(k[hi]), 1.0)
        return out

    return LatticeDist(tail_int, offset=offset, k0=k0, alpha=alpha, ell=ell, M=M,
                       name="semistable-lattice")


def make_semistable_nonlattice(spec: SemistableSpec, ell: SlowlyVarying | None = None) -> NonlatticeDist:
    """Continuous law with tail ``min(1, ell(x) x**-alpha M_R(x))``."""
    if not spec.one_sided:
        raise ConstructionError("nonlattice construction supports one-sided specs only")
    ell = ell or SlowlyVarying()
    alpha, M = spec.alpha, spec.M_R

    def formula(x):
        return ell(x) * x ** -alpha * M(x)

    # support start: the largest crossing of level 1
    lo, hi = 1e-12, 1.0
    while formula(hi) > 1.0:
        hi *= 2.0
    xs = np.geomspace(lo, hi, 20001)
    above = np.nonzero(np.asarray(formula(xs)) > 1.0)[0]
    if above.size:
        a, b = xs[above[-1]], xs[min(above[-1] + 1, xs.size - 1)]
        for _ in range(200):
            m = 0.5 * (a + b)
            a, b = (m, b) if formula(m) > 1.0 else (a, m)
        x_min = b
    else:
        x_min = lo
    base = None
    if ell.is_constant():
        r = spec.r
        grid = x_min * r ** np.linspace(0.0, 1.0, 65537)
        base = (np.log(grid), np.log(np.asarray(formula(grid))))
    return NonlatticeDist(formula, x_min=x_min, alpha=alpha, ell=ell, M=M, c=spec.c,
                          name="semistable-nonlattice", _base=base)


def pareto_dist(alpha: float) -> NonlatticeDist:
    """``P(X > x) = x**-alpha`` on ``[1, inf)``."""
    spec = SemistableSpec(alpha, 2.0, LogPeriodic.constant(1.0, 2.0 ** (1 / alpha)))
    return make_semistable_nonlattice(spec)


# ----------------------------------------------------------------------
# the alpha = 1 example: tail 2**-floor(log2 x - log2 log2 x)

def _counter_m(k):
    """Largest ``m`` with ``2**m log2(k) <= k`` for ``k > 3``."""
    lk = np.log2(k)
    m = np.floor(np.log2(k / lk))
    m = np.where(np.ldexp(lk, (m + 1).astype(int)) <= k, m + 1, m)
    m = np.where(np.ldexp(lk, m.astype(int)) > k, m - 1, m)
    return m


def _counter_tail(k):
    k = np.asarray(k, dtype=float)
    out = np.ones(k.shape)
    big = k > 3
    if np.any(big):
        out[big] = 2.0 ** -_counter_m(k[big])
    return out


def _exact_log2_le(k: int, bound: float) -> bool:
    if k & (k - 1) == 0:
        return k.bit_length() - 1 <= bound
    return math.log2(k) <= bound


def _counter_steps(m_max: int = 80) -> np.ndarray:
    """``K_m``: least integer ``k >= 4`` with ``2**m log2(k) <= k``."""
    steps = []
    lo = 4
    for m in range(1, m_max + 1):
        def ok(k, m=m):
            return _exact_log2_le(k, k / 2 ** m) if k < 2 ** 1000 else True
        hi = max(lo, 2)
        while not ok(hi):
            hi *= 2
        a = lo
        while a < hi:
            mid = (a + hi) // 2
            if ok(mid):
                hi = mid
            else:
                a = mid + 1
        steps.append(hi)
        lo = hi
    return np.array([float(k) for k in steps])


def counterexample_dist() -> LatticeDist:
    """Lattice law with ``P(X > x) = 2**-floor(log2 x - log2 log2 x)`` for ``x > 3``.

    It lies in the domain of partial attraction along ``k_n = 2**n`` with
    index one, ``ell = log2`` and ``p_R(x) = 2**frac(log2 x)``, although the
    tail is not of the form ``ell(x) x**-1 p_R(x) (1 + o(1))``.
    """
    steps = _counter_steps()
    probs = 2.0 ** -np.arange(1, steps.size + 1)
    return LatticeDist(_counter_tail, offset=0.0, k0=4, atoms=(steps, probs), name="counterexample")


def counterexample_spec() -> tuple[SemistableSpec, NormingScheme, SlowlyVarying]:
    """Limit spec, norming scheme and slowly varying factor of the example."""
    ell = SlowlyVarying(kappa=1.0 / math.log(2.0), beta=1.0)
    p = LogPeriodic.table([1.0, 2.0], [1.0, 2.0], 2.0)
    spec = SemistableSpec(1.0, 2.0, p)
    return spec, NormingScheme(1.0, 2.0, ell), ell


# ----------------------------------------------------------------------
# checks

def check_domain_membership(d, s: NormingScheme, spec: SemistableSpec, n_grid, x_grid,
                            tolerance: float = 0.05) -> DomainCheckReport:
    """Residuals of ``k_n P(X > A_{k_n} x) -> M_R(x) x**-alpha`` along the subsequence.

    ``x_grid`` should avoid discontinuities of ``M_R``. The verdict is
    ``member`` when the residual at the largest ``n`` is below ``tolerance``.
    """
    x = np.asarray(x_grid, dtype=float)
    target = spec.levy_tail(x)
    res, res_left = [], None
    for n in n_grid:
        k = s.k(int(n))
        A = norming_A(s, float(k))
        if A * x.max() > 2.0 ** 53:
            raise DomainError(f"A_(k_n) x = {A * x.max():.3g} exceeds the exact tail range 2**53")
        res.append(float(np.max(np.abs(k * np.asarray(d.tail(A * x)) - target))))
    if spec.M_L is not None:
        res_left = [0.0] * len(res)
    return DomainCheckReport([int(n) for n in n_grid], x.tolist(), res, res_left, tolerance,
                             bool(res[-1] < tolerance))


def direct_form_residual(d, alpha: float, ell: SlowlyVarying, p: LogPeriodic, x) -> np.ndarray:
    """``|P(X > x) x**alpha / ell(x) - p(x)|``, the error of the direct tail form."""
    x = np.asarray(x, dtype=float)
    return np.abs(np.asarray(d.tail(x)) * x ** alpha / ell(x) - p(x))


def truncated_mean_L(d, x: float) -> float:
    """``L(x) = int_1^x P(X > u) du``."""
    if x < 1:
        raise DomainError("truncated_mean_L needs x >= 1")
    if x == 1:
        return 0.0
    if isinstance(d, LatticeDist):
        return _lattice_L(d, x)
    # continuous tail: split geometrically so each piece is smooth
    edges = np.geomspace(1.0, x, max(2, int(math.log(x) * 8) + 2))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, _ = integrate.quad(lambda u: float(d.tail(u)), a, b, epsrel=1e-12, epsabs=0.0, limit=200)
        total += v
    return total


def _lattice_L(d: LatticeDist, x: float) -> float:
    a = d.offset
    # P(X > u) is constant on [j + a, j + 1 + a)
    if d.atoms is not None:
        pos, prob = d.atoms
        tails = 1.0 - np.cumsum(prob)
        edges = np.concatenate([[-np.inf], pos])
        levels = np.concatenate([[1.0], tails])
        lo = np.clip(edges, 1.0, x)
        hi = np.clip(np.concatenate([pos, [np.inf]]), 1.0, x)
        return float(((hi - lo) * levels).sum())
    j_lo = math.floor(1.0 - a)
    j_hi = math.floor(x - a)
    total = 0.0
    chunk = 10_000_000
    for start in range(j_lo, j_hi + 1, chunk):
        j = np.arange(start, min(start + chunk, j_hi + 1), dtype=float)
        lo = np.maximum(j + a, 1.0)
        hi = np.minimum(j + 1 + a, x)
        total += float((np.clip(hi - lo, 0.0, None) * np.asarray(d.tail_k(j))).sum())
    return total


def sample(d, count: int, seed) -> np.ndarray:
    """``count`` iid draws by inverse transform of seeded uniforms."""
    if count < 1:
        raise DomainError("sample needs count >= 1")
    rng = np.random.default_rng(seed)
    return np.asarray(d.quantile(rng.random(count)), dtype=float).reshape(-1)


def ks_statistic(draws, d) -> tuple[float, float]:
    """Two-sided Kolmogorov-Smirnov statistic and p-value against ``d.cdf``."""
    res = stats.kstest(np.asarray(draws), lambda x: np.asarray(d.cdf(x)))
    return float(res.statistic), float(res.pvalue)


def write_pmf_csv(d: LatticeDist, N: int, path) -> None:
    """Rows ``(k, f_k, P(K > k))`` for ``k = 0..N``."""
    f = d.pmf(N)
    tail = d.tail_array(N)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "f_k", "tail_k"])
        for k in range(N + 1):
            w.writerow([k, f"{f[k]:.17g}", f"{tail[k]:.17g}"])


def dist_from_dict(cfg: dict):
    """Distribution, spec and scheme from a distribution config mapping.

    The mapping extends a spec file with ``support`` (``lattice`` or
    ``nonlattice``), ``offset_a`` and ``kappa_rescale``. A config with
    ``"example": "counterexample"`` selects the index-one example.
    """
    if cfg.get("example") == "counterexample":
        spec, scheme, _ = counterexample_spec()
        return counterexample_dist(), spec, scheme
    spec, scheme = spec_from_dict(cfg)
    support = cfg.get("support", "lattice")
    scale = float(cfg.get("kappa_rescale", 1.0))
    if not scale > 0:
        raise ConfigError(f"field 'kappa_rescale' must be positive, got {scale}")
    ell = SlowlyVarying(scheme.ell.kappa * scale, scheme.ell.beta)
    if scale != 1.0:
        scheme = NormingScheme(scheme.alpha, scheme.c, ell, scheme.ell1, scheme.centering)
    if support == "lattice":
        a = cfg.get("offset_a", 0.0)
        a = GOLDEN if a == "golden" else float(a)
        if not 0.0 <= a < 1.0:
            raise ConfigError(f"field 'offset_a' must lie in [0, 1), got {a}")
        d = make_semistable_lattice(spec, ell, offset=a)
    elif support == "nonlattice":
        d = make_semistable_nonlattice(spec, ell)
    else:
        raise ConfigError(f"field 'support' must be 'lattice' or 'nonlattice', got {support!r}")
    return d, spec, scheme
