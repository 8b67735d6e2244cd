"""Log-periodic functions, semistable specifications and norming schemes.

A semistable law here is described by its Levy tails
``Lambda((x, inf)) = M_R(x) x**-alpha`` and ``Lambda((-inf, -x)) = M_L(x) x**-alpha``
where ``M_R`` and ``M_L`` are multiplicatively periodic with period
``r = c**(1/alpha)``. The norming scheme collects the subsequence ``k_n``,
the norming ``A_n``, its asymptotic inverse ``B`` and the two position
functions used to index the merging family of limit laws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ConfigError, ConstructionError, DomainError, NumericError

_KINDS = ("const", "table", "fourier")


@dataclass(frozen=True, eq=False)
class LogPeriodic:
    """Positive function with ``p(r x) = p(x)``.

    Three representations are supported. ``const`` is a constant, ``table`` is
    piecewise linear in ``x`` between knots on ``[1, r]`` (a repeated knot
    encodes a right-continuous jump), and ``fourier`` is a trigonometric
    polynomial in ``2 pi log(x) / log(r)``.
    """

    period: float
    kind: str = "const"
    value: float = 1.0
    knots: np.ndarray | None = None
    values: np.ndarray | None = None
    cos: np.ndarray | None = None
    sin: np.ndarray | None = None

    def __post_init__(self):
        if not self.period > 1.0:
            raise ConstructionError(f"period must exceed 1, got {self.period}")
        if self.kind not in _KINDS:
            raise ConstructionError(f"unknown log-periodic kind {self.kind!r}")
        if self.kind == "table":
            knots = np.asarray(self.knots, dtype=float)
            vals = np.asarray(self.values, dtype=float)
            if knots.ndim != 1 or knots.shape != vals.shape or knots.size < 2:
                raise ConstructionError("table knots and values must be 1-d of equal length >= 2")
            if abs(knots[0] - 1.0) > 1e-12 or np.any(np.diff(knots) < 0):
                raise ConstructionError("table knots must start at 1 and be nondecreasing")
            if knots[-1] > self.period * (1 + 1e-12):
                raise ConstructionError("table knots must lie in [1, r]")
            if knots[-1] < self.period:
                # close the period continuously
                knots = np.append(knots, self.period)
                vals = np.append(vals, vals[0])
            object.__setattr__(self, "knots", knots)
            object.__setattr__(self, "values", vals)
        elif self.kind == "fourier":
            a = np.atleast_1d(np.asarray(self.cos, dtype=float))
            b = np.atleast_1d(np.asarray([] if self.sin is None else self.sin, dtype=float))
            n = max(a.size, b.size + 1)
            a = np.pad(a, (0, n - a.size))
            b = np.pad(b, (0, n - 1 - b.size))
            object.__setattr__(self, "cos", a)
            object.__setattr__(self, "sin", b)
        lo, hi = self.bounds()
        if not (lo > 0 and np.isfinite(hi)):
            raise ConstructionError(f"log-periodic function must be positive and bounded, range [{lo}, {hi}]")

    # constructors -------------------------------------------------------
    @classmethod
    def constant(cls, value: float, period: float) -> "LogPeriodic":
        return cls(period=period, kind="const", value=float(value))

    @classmethod
    def table(cls, knots, values, period: float) -> "LogPeriodic":
        return cls(period=period, kind="table", knots=knots, values=values)

    @classmethod
    def tabulate(cls, func, period: float, n: int = 256) -> "LogPeriodic":
        """Sample ``func`` at ``n`` geometric breakpoints of ``[1, r)``."""
        knots = period ** (np.arange(n) / n)
        return cls.table(knots, np.asarray(func(knots), dtype=float), period)

    @classmethod
    def fourier(cls, cos, sin=(), period: float = 2.0) -> "LogPeriodic":
        return cls(period=period, kind="fourier", cos=cos, sin=sin)

    # evaluation ---------------------------------------------------------
    @property
    def log_period(self) -> float:
        return math.log(self.period)

    def phase(self, x):
        """Fractional position of ``x`` inside its period, in ``[0, 1)``."""
        u = np.log(x) / self.log_period
        return u - np.floor(u)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise DomainError("log-periodic functions are defined for x > 0 only")
        if self.kind == "const":
            out = np.full(x.shape, self.value)
        elif self.kind == "fourier":
            theta = 2 * np.pi * self.phase(x)
            out = self._trig(theta)
        else:
            y = self.period ** self.phase(x)
            out = self._interp(y)
        return out if out.ndim else float(out)

    def _trig(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, self.cos[0])
        for j in range(1, self.cos.size):
            out = out + self.cos[j] * np.cos(j * theta) + self.sin[j - 1] * np.sin(j * theta)
        return out

    def _interp(self, y):
        kn, v = self.knots, self.values
        idx = np.clip(np.searchsorted(kn, y, side="right") - 1, 0, kn.size - 2)
        x0, x1 = kn[idx], kn[idx + 1]
        v0, v1 = v[idx], v[idx + 1]
        width = x1 - x0
        frac = np.where(width > 0, (y - x0) / np.where(width > 0, width, 1.0), 0.0)
        return v0 + (v1 - v0) * frac

    def reduce(self, x):
        """Representative of ``x`` in ``[1, r)``."""
        return self.period ** self.phase(x)

    def kinks(self) -> np.ndarray:
        """Points of ``[1, r)`` where the function is not smooth."""
        if self.kind != "table":
            return np.empty(0)
        k = np.unique(self.knots)
        return k[k < self.period]

    def bounds(self) -> tuple[float, float]:
        if self.kind == "const":
            return self.value, self.value
        if self.kind == "table":
            return float(self.values.min()), float(self.values.max())
        vals = self._trig(np.linspace(0, 2 * np.pi, 4097))
        return float(vals.min()), float(vals.max())

    def is_constant(self) -> bool:
        lo, hi = self.bounds()
        return hi - lo <= 1e-14 * max(abs(hi), 1.0)

    def complex_coeffs(self) -> tuple[np.ndarray, np.ndarray]:
        """Harmonics ``j`` and coefficients ``c_j`` with ``p = sum c_j x**(i j w)``.

        Only available for constant and Fourier representations.
        """
        if self.kind == "const":
            return np.array([0]), np.array([complex(self.value)])
        if self.kind != "fourier":
            raise DomainError("complex coefficients need a constant or Fourier representation")
        J = self.cos.size - 1
        js = np.arange(-J, J + 1)
        cs = np.zeros(2 * J + 1, dtype=complex)
        cs[J] = self.cos[0]
        for j in range(1, J + 1):
            cs[J + j] = 0.5 * (self.cos[j] - 1j * self.sin[j - 1])
            cs[J - j] = 0.5 * (self.cos[j] + 1j * self.sin[j - 1])
        return js, cs

    @property
    def frequency(self) -> float:
        return 2 * np.pi / self.log_period

    def max_log_slope(self, n: int = 8192) -> float:
        """Largest value of ``d log p / d log x`` over one period."""
        if self.kind == "const":
            return 0.0
        if self.kind == "table":
            kn, v = self.knots, self.values
            dk = np.diff(kn)
            ok = dk > 0
            slopes = np.diff(v)[ok] / dk[ok]
            # d log p / d log x = x p'(x) / p(x), extreme at segment ends
            s_lo = slopes * kn[:-1][ok] / v[:-1][ok]
            s_hi = slopes * kn[1:][ok] / np.maximum(self._interp(kn[1:][ok] * (1 - 1e-15)), 1e-300)
            return float(max(s_lo.max(initial=-np.inf), s_hi.max(initial=-np.inf)))
        theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
        j = np.arange(1, self.cos.size)[:, None]
        dp = (-self.cos[1:, None] * j * np.sin(j * theta) + self.sin[:, None] * j * np.cos(j * theta)).sum(0)
        return float((self.frequency * dp / self._trig(theta)).max())

    def to_dict(self) -> dict:
        if self.kind == "const":
            return {"kind": "const", "data": self.value}
        if self.kind == "table":
            return {"kind": "table", "data": {"knots": self.knots.tolist(), "values": self.values.tolist()}}
        return {"kind": "fourier", "data": {"cos": self.cos.tolist(), "sin": self.sin.tolist()}}


def eval_log_periodic(p: LogPeriodic, x):
    """Evaluate ``p`` at ``x > 0`` by reduction to the base period."""
    return p(x)


@dataclass(frozen=True)
class SlowlyVarying:
    """``kappa * max(log x, 1)**beta``."""

    kappa: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ConstructionError(f"kappa must be positive, got {self.kappa}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.beta == 0.0:
            out = np.full(x.shape, self.kappa)
        else:
            out = self.kappa * np.maximum(np.log(np.maximum(x, 1e-300)), 1.0) ** self.beta
        return out if out.ndim else float(out)

    def is_constant(self) -> bool:
        return self.beta == 0.0


@dataclass(frozen=True, eq=False)
class SemistableSpec:
    """Index ``alpha``, period ratio ``c`` and the Levy tail functions."""

    alpha: float
    c: float
    M_R: LogPeriodic | None
    M_L: LogPeriodic | None = None
    shift: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise ConstructionError(f"alpha must lie in (0, 2), got {self.alpha}")
        if not self.c > 1:
            raise ConstructionError(f"c must exceed 1, got {self.c}")
        if self.M_R is None and self.M_L is None:
            raise ConstructionError("M_R and M_L cannot both be zero")
        for side, m in (("M_R", self.M_R), ("M_L", self.M_L)):
            if m is not None and not math.isclose(m.period, self.r, rel_tol=1e-10):
                raise ConstructionError(f"{side} has period {m.period}, expected r = c**(1/alpha) = {self.r}")
        self.check_monotone()

    @property
    def r(self) -> float:
        return self.c ** (1.0 / self.alpha)

    @property
    def one_sided(self) -> bool:
        return self.M_L is None

    def sides(self):
        return [(s, m) for s, m in ((1, self.M_R), (-1, self.M_L)) if m is not None]

    def check_monotone(self, n: int = 10_000) -> None:
        """``M(x) x**-alpha`` must be nonincreasing on three periods."""
        x = self.r ** np.linspace(0.0, 3.0, n)
        for side, m in (("M_R", self.M_R), ("M_L", self.M_L)):
            if m is None:
                continue
            tail = m(x) * x ** -self.alpha
            bad = np.nonzero(np.diff(tail) > 1e-12 * tail[:-1])[0]
            if bad.size:
                raise ConstructionError(
                    f"{side}(x) x^-alpha increases near x = {x[bad[0]]:.6g}; "
                    "the Levy tail must be nonincreasing")

    def is_nonstable(self) -> bool:
        return any(not m.is_constant() for _, m in self.sides())

    def levy_tail(self, x, lam: float = 1.0, side: int = 1):
        """``Lambda_lam((x, inf))`` for ``side=1`` or ``Lambda_lam((-inf, -x))``."""
        m = self.M_R if side == 1 else self.M_L
        x = np.asarray(x, dtype=float)
        if m is None:
            return np.zeros(x.shape) if x.ndim else 0.0
        return x ** -self.alpha * m(lam ** (1 / self.alpha) * x)

    def levy_density(self, x, lam: float = 1.0, side: int = 1, h: float = 1e-6):
        """Density of the Levy measure, by central difference of the tail."""
        x = np.asarray(x, dtype=float)
        up = self.levy_tail(x * (1 - h), lam, side)
        dn = self.levy_tail(x * (1 + h), lam, side)
        return (up - dn) / (2 * h * x)

    def reduce_lambda(self, lam):
        """Representative of ``lam`` in ``(1/c, 1]``."""
        u = np.log(lam) / math.log(self.c)
        k = np.ceil(u - 1e-15)
        return lam * self.c ** (-k)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "c": self.c,
            "M_R": {"kind": "zero", "data": None} if self.M_R is None else self.M_R.to_dict(),
            "M_L": {"kind": "zero", "data": None} if self.M_L is None else self.M_L.to_dict(),
        }


def _floor_pow(c: float, n: int) -> int:
    """``floor(c**n)`` computed exactly when ``c`` is an integer."""
    if float(c).is_integer():
        return int(c) ** n
    return int(math.floor(c ** n))


@dataclass(frozen=True, eq=False)
class NormingScheme:
    """Subsequence, norming, centering and the position functions.

    ``ell`` is the slowly varying factor of the tail and ``B(y) = y**alpha / ell(y)``.
    With ``ell1=None`` the norming ``A`` is the exact inverse of ``B``; otherwise
    ``A_n = n**(1/alpha) * ell1(n)``.
    """

    alpha: float
    c: float
    ell: SlowlyVarying = field(default_factory=SlowlyVarying)
    ell1: SlowlyVarying | None = None
    centering: str = "zero"
    k_limit: float = 2.0 ** 62
    _k: np.ndarray = field(init=False, repr=False)
    _kexp: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise ConstructionError(f"alpha must lie in (0, 2), got {self.alpha}")
        if not self.c > 1:
            raise ConstructionError(f"c must exceed 1, got {self.c}")
        if self.centering not in ("zero", "quantile"):
            raise ConstructionError(f"unknown centering mode {self.centering!r}")
        ks, exps = [], []
        n = 0
        while _floor_pow(self.c, n) < 2:
            n += 1
        while True:
            k = _floor_pow(self.c, n)
            if k > self.k_limit:
                break
            if not ks or k > ks[-1]:
                ks.append(k)
                exps.append(n)
            n += 1
        # eager table: read-only after construction, safe to share
        object.__setattr__(self, "_k", np.array(ks, dtype=float))
        object.__setattr__(self, "_kexp", np.array(exps, dtype=int))

    @property
    def subsequence(self) -> np.ndarray:
        return self._k

    def k(self, n: int) -> int:
        """``k_n = floor(c**n)``."""
        return _floor_pow(self.c, n)

    def A(self, n):
        return norming_A(self, n)

    def B(self, x):
        return norming_B(self, x)


def norming_A(s: NormingScheme, n):
    """Norming ``A_n = n**(1/alpha) ell1(n)``, or the exact inverse of ``B``."""
    n = np.asarray(n, dtype=float)
    if np.any(n <= 0):
        raise DomainError("norming_A needs n >= 1")
    if s.ell1 is not None:
        out = n ** (1 / s.alpha) * s.ell1(n)
    elif s.ell.is_constant():
        out = (s.ell.kappa * n) ** (1 / s.alpha)
    else:
        out = _invert_B(s, n)
    return out if out.ndim else float(out)


def _invert_B(s: NormingScheme, n):
    # Newton in z = log y on alpha z - log ell(e^z) = log n
    logn = np.log(n) + math.log(s.ell.kappa)
    z = logn / s.alpha
    for _ in range(100):
        zz = np.maximum(z, 1.0)
        f = s.alpha * z - math.log(s.ell.kappa) - s.ell.beta * np.log(zz) - np.log(n)
        fp = s.alpha - np.where(z > 1.0, s.ell.beta / zz, 0.0)
        step = f / fp
        z = z - step
        if np.all(np.abs(step) < 1e-15 * np.maximum(1.0, np.abs(z))):
            break
    else:
        raise NumericError("inverse of B did not converge")
    return np.exp(z)


def norming_B(s: NormingScheme, x):
    """``B(x) = x**alpha / ell(x)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("norming_B needs x > 0")
    out = x ** s.alpha / s.ell(x)
    return out if out.ndim else float(out)


def position_gamma(s: NormingScheme, x, extend: bool = False):
    """``gamma(x) = x / k_n`` for the unique ``n`` with ``k_{n-1} < x <= k_n``.

    With ``extend=True`` arguments below the first subsequence element use the
    geometric continuation ``k_first * c**m`` for negative ``m``.
    """
    x = np.asarray(x, dtype=float)
    k = s._k
    if np.any(x > k[-1]):
        raise DomainError(f"x exceeds the tabulated subsequence (max {k[-1]:.3g})")
    below = x < k[0]
    if np.any(below) and not extend:
        raise DomainError(f"position_gamma needs x >= k_1 = {k[0]:.0f}")
    idx = np.searchsorted(k, x, side="left")
    idx = np.minimum(idx, k.size - 1)
    out = x / k[idx]
    if np.any(below):
        xb = x[below] if x.ndim else x
        m = np.ceil(np.log(xb / k[0]) / math.log(s.c) - 1e-14)
        g = xb / (k[0] * s.c ** m)
        g = np.where(g > 1.0, g / s.c, g)
        if x.ndim:
            out[below] = g
        else:
            out = g
    return out if np.ndim(out) else float(out)


def ratio_delta(s: NormingScheme, x):
    """``delta(x) = x / A_{k_n}`` with ``A_{k_n} <= x < A_{k_{n+1}}``."""
    x = np.asarray(x, dtype=float)
    Ak = norming_A(s, s._k)
    if np.any(x < Ak[0]):
        raise DomainError(f"ratio_delta needs x >= A_(k_1) = {Ak[0]:.6g}")
    if np.any(x >= Ak[-1]):
        raise DomainError("x exceeds the tabulated subsequence")
    idx = np.searchsorted(Ak, x, side="right") - 1
    out = x / Ak[idx]
    return out if out.ndim else float(out)


def centering_C(s: NormingScheme, dist, n: int) -> float:
    """Centering ``C_n``: zero, or ``n`` times the quantile integral over ``(1/n, 1-1/n)``."""
    if n < 1:
        raise DomainError("centering_C needs n >= 1")
    if s.centering == "zero":
        return 0.0
    if n <= 2:
        return 0.0
    lo, hi = 1.0 / n, 1.0 - 1.0 / n
    if hasattr(dist, "quantile_integral"):
        return n * dist.quantile_integral(lo, hi)
    val, err = integrate.quad(dist.quantile, lo, hi, epsrel=1e-10, limit=500)
    if not np.isfinite(val) or err > 1e-8 * max(abs(val), 1.0):
        raise NumericError(f"quantile integral did not converge (value {val}, error estimate {err})")
    return n * val


# ----------------------------------------------------------------------
# spec files

def log_periodic_from_dict(d: dict | None, period: float) -> LogPeriodic | None:
    if d is None:
        return None
    kind = d.get("kind")
    data = d.get("data")
    if kind == "zero":
        return None
    if kind == "const":
        return LogPeriodic.constant(float(data), period)
    if kind == "fourier":
        return LogPeriodic.fourier(data["cos"], data.get("sin", ()), period)
    if kind == "table":
        vals = np.asarray(data["values"], dtype=float)
        knots = data.get("knots")
        if knots is None:
            knots = period ** (np.arange(vals.size) / vals.size)
        return LogPeriodic.table(knots, vals, period)
    raise ConfigError(f"unknown log-periodic kind {kind!r}")


def slowly_varying_from_dict(d: dict | None) -> SlowlyVarying:
    if d is None:
        return SlowlyVarying()
    return SlowlyVarying(float(d.get("kappa", 1.0)), float(d.get("beta", 0.0)))


def spec_from_dict(d: dict) -> tuple[SemistableSpec, NormingScheme]:
    """Build a spec and its norming scheme from a spec-file mapping."""
    try:
        alpha = float(d["alpha"])
        c = float(d["c"])
    except KeyError as exc:
        raise ConfigError(f"missing field {exc.args[0]!r}") from None
    if not 0 < alpha < 2:
        raise ConfigError(f"field 'alpha' must lie in (0, 2), got {alpha}")
    if not c > 1:
        raise ConfigError(f"field 'c' must exceed 1, got {c}")
    if d.get("subsequence", "floor_c_pow_n") != "floor_c_pow_n":
        raise ConfigError(f"field 'subsequence' must be 'floor_c_pow_n', got {d['subsequence']!r}")
    r = c ** (1 / alpha)
    spec = SemistableSpec(alpha, c, log_periodic_from_dict(d.get("M_R"), r),
                          log_periodic_from_dict(d.get("M_L"), r))
    ell = slowly_varying_from_dict(d.get("ell"))
    ell1 = d.get("ell1")
    scheme = NormingScheme(alpha, c, ell, None if ell1 in (None, "inverse") else slowly_varying_from_dict(ell1),
                           centering=d.get("centering", "zero"))
    return spec, scheme
