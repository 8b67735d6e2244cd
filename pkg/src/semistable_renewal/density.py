"""Densities and distribution functions of the semistable family by Fourier inversion.

Two inversion routes are implemented. For one-sided laws with index below
one and closed-form exponents the inversion contour is rotated into the
lower half plane, ``t = rho e^{-i theta}``, where ``e^{-itx}`` decays for
``x > 0``; the rotated integrand is smooth and exponentially damped, so plain
Gauss-Legendre panels reach near machine precision. Every other spec goes
along the real axis with the exponent from quadrature.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn

from .charfn import levy_exponent
from .errors import DomainError, NumericError
from .model import NormingScheme, SemistableSpec, norming_B, position_gamma
from .quadrature import panel_nodes

NEG_FLOOR = -1e-9
RHO_MIN = 1e-12
X_ASYMPTOTIC = 1e5
X_FAR = 1e12


@dataclass(eq=False)
class DensityEvaluator:
    """Evaluates ``g_lam`` and ``G_lam`` for a fixed spec.

    ``lam`` is reduced into ``(1/c, 1]`` before use. ``eps`` is the target
    absolute accuracy of the inversion integrals.
    """

    spec: SemistableSpec
    eps: float = 1e-7
    n_lambda: int = 64
    n_x: int = 1024
    x_max_real: float = 100.0
    route: str = field(init=False)
    theta: float = field(init=False, default=0.0)
    nu: float = field(init=False, default=0.0)
    t_max: float = field(init=False, default=0.0)
    _nodes: np.ndarray = field(init=False, repr=False)
    _weights: np.ndarray = field(init=False, repr=False)
    _harm: list = field(init=False, repr=False)
    _cache: tuple | None = field(init=False, default=None, repr=False)
    _x_lo: float | None = field(init=False, default=None, repr=False)
    _sup: float | None = field(init=False, default=None, repr=False)

    def __post_init__(self):
        sp = self.spec
        closed = all(m.kind in ("const", "fourier") for _, m in sp.sides())
        if sp.one_sided and sp.alpha < 1 and closed:
            self.route = "contour"
            self._harm = self._harmonics()
            self._setup_contour()
        else:
            if sp.alpha == 1.0 and (sp.M_L is None or sp.M_R is None):
                raise DomainError("index-one densities need a symmetric spec")
            self.route = "real"
            self._setup_real()

    # ------------------------------------------------------------------
    # exponent on complex arguments

    def _harmonics(self):
        m = self.spec.M_R
        js, cs = m.complex_coeffs()
        w = m.frequency
        alpha = self.spec.alpha
        out = []
        for j, cj in zip(js, cs):
            s = alpha - 1j * w * j
            out.append((s, -cj * gamma_fn(1 - s), 1j * w * j / alpha))
        return out

    def _exponent_matrix(self, lams: np.ndarray, t: np.ndarray) -> np.ndarray:
        """``y_lam(t)`` for every pair of ``lams`` (rows) and complex ``t`` (columns)."""
        logt = np.log(-1j * t)
        loglam = np.log(lams)
        out = np.zeros((lams.size, t.size), dtype=complex)
        for s, coef, lam_pow in self._harm:
            out += np.exp(lam_pow * loglam)[:, None] * (coef * np.exp(s * logt))[None, :]
        return out

    def _decay_along(self, theta: float) -> float:
        """``min -Re y_lam(rho e^{-i phi}) / rho**alpha`` over ``phi`` in ``[0, theta]``.

        By the scaling ``y(r t) = c y(t)`` one period of ``rho`` suffices.
        """
        alpha = self.spec.alpha
        lams = self.spec.c ** (-np.arange(32) / 32.0)
        rho = self.spec.r ** np.linspace(0.0, 1.0, 257)
        worst = -np.inf
        for phi in np.linspace(0.0, theta, 33):
            y = self._exponent_matrix(lams, rho * np.exp(-1j * phi))
            worst = max(worst, float((y.real / rho ** alpha).max()))
        return -worst

    def _setup_contour(self):
        alpha = self.spec.alpha
        nu0 = self._decay_along(0.0)
        if not nu0 > 0:
            raise NumericError("characteristic function does not decay on the real axis")
        # widest rotation that keeps at least half of the real-axis decay
        theta = 0.8 * min(math.pi / 2, math.pi / (2 * alpha) - math.pi / 2)
        while self._decay_along(theta) < 0.5 * nu0:
            theta *= 0.8
            if theta < 1e-3:
                raise NumericError("no admissible rotation angle for the inversion contour")
        self.theta = theta
        self.nu = self._decay_along(theta)
        self.t_max = (45.0 / self.nu) ** (1 / alpha)
        n_pan = int(math.ceil(math.log(self.t_max / RHO_MIN) / math.log(1.1)))
        edges = np.geomspace(RHO_MIN, self.t_max, n_pan + 1)
        nodes, weights = panel_nodes(edges, 24)
        self._nodes = nodes.ravel() * np.exp(-1j * theta)
        self._weights = weights.ravel() * np.exp(-1j * theta)

    def _setup_real(self):
        alpha = self.spec.alpha
        # -Re y(t)/|t|^alpha is log-periodic in t, so one period fixes the decay
        ts = self.spec.r ** np.linspace(0.0, 1.0, 33)
        ratios = []
        for lam in self.spec.c ** (-np.arange(4) / 4.0):
            for t in ts:
                ratios.append(-levy_exponent(self.spec, lam, float(t)).real / t ** alpha)
        self.nu = float(min(ratios))
        if not self.nu > 0:
            raise NumericError("characteristic function does not decay; decay constant estimate failed")
        self.t_max = (math.log(2.0 / self.eps) / self.nu) ** (1 / alpha) * 1.2
        h = min(1.0, 2.0 / self.x_max_real)
        geo = np.geomspace(1e-12, min(1.0, self.t_max), 60)
        lin = np.arange(1.0 + h, self.t_max + h, h) if self.t_max > 1.0 else np.empty(0)
        edges = np.concatenate([geo, lin])
        nodes, weights = panel_nodes(edges, 16)
        self._nodes = nodes.ravel().astype(complex)
        self._weights = weights.ravel().astype(complex)
        self._psi_cache: dict[float, np.ndarray] = {}

    def _psi_real(self, lam: float) -> np.ndarray:
        key = round(float(lam), 15)
        if key not in self._psi_cache:
            t = self._nodes.real
            self._psi_cache[key] = np.exp([levy_exponent(self.spec, lam, float(tt)) for tt in t])
        return self._psi_cache[key]

    # ------------------------------------------------------------------
    # direct evaluation

    def reduce(self, lam):
        return np.asarray(self.spec.reduce_lambda(np.asarray(lam, dtype=float)))

    def _pairs(self, lam, x):
        lam, x = np.broadcast_arrays(np.asarray(lam, dtype=float), np.asarray(x, dtype=float))
        if np.any(lam <= 0):
            raise DomainError("lambda must be positive")
        return self.reduce(lam).ravel(), x.ravel().astype(float), lam.shape

    def _contour(self, lams, xs, kind):
        out = np.zeros(xs.size)
        pos = np.nonzero(xs > 0)[0]
        pos = pos[np.argsort(xs[pos])]
        rho = np.abs(self._nodes)
        damp = math.sin(self.theta)
        # the integrand is 1 (resp. x) on [0, RHO_MIN] up to O(RHO_MIN**alpha)
        head = RHO_MIN * np.exp(-1j * self.theta)
        for idx in np.array_split(pos, max(1, pos.size // 128)):
            if idx.size == 0:
                continue
            if kind == "g":
                # e^{-rho x sin(theta)} < e^{-45} beyond this node
                keep = rho <= 45.0 / (xs[idx[0]] * damp)
                t, w = self._nodes[keep], self._weights[keep]
            else:
                # the psi(t)/(it) part of the G integrand is not damped by x
                t, w = self._nodes, self._weights
            y = self._exponent_matrix(lams[idx], t)
            xt = -1j * xs[idx, None] * t[None, :]
            if kind == "g":
                vals = np.exp(xt + y) @ w + head
            else:
                vals = (np.exp(y) * -np.expm1(xt) / (1j * t[None, :])) @ w + head * xs[idx]
            out[idx] = vals.real / math.pi
        return out

    def _real(self, lams, xs, kind):
        out = np.empty(xs.size)
        t = self._nodes.real
        for lam in np.unique(lams):
            sel = lams == lam
            psi = self._psi_real(float(lam))
            ph = np.exp(-1j * xs[sel, None] * t[None, :]) * psi[None, :]
            if kind == "g":
                out[sel] = (ph @ self._weights).real / math.pi
            else:
                out[sel] = 0.5 - ((ph.imag / t[None, :]) @ self._weights.real) / math.pi
        return out

    def g(self, lam, x):
        """Density ``g_lam(x)``; round-off negatives above ``-1e-9`` are clamped."""
        lams, xs, shape = self._pairs(lam, x)
        vals = self._contour(lams, xs, "g") if self.route == "contour" else self._real(lams, xs, "g")
        if np.any(vals < NEG_FLOOR):
            raise NumericError(f"density inversion returned {vals.min():.3g} < {NEG_FLOOR}")
        vals = np.maximum(vals, 0.0).reshape(shape)
        return vals if vals.ndim else float(vals)

    def G(self, lam, x):
        """Distribution function ``G_lam(x)`` clipped to ``[0, 1]``."""
        lams, xs, shape = self._pairs(lam, x)
        vals = self._contour(lams, xs, "G") if self.route == "contour" else self._real(lams, xs, "G")
        vals = np.clip(vals, 0.0, 1.0).reshape(shape)
        return vals if vals.ndim else float(vals)

    def G_monotone(self, lam: float, x) -> np.ndarray:
        """``G_lam`` on a grid, made nondecreasing by a running maximum over sorted ``x``."""
        x = np.asarray(x, dtype=float)
        order = np.argsort(x)
        vals = np.asarray(self.G(np.full(x.size, lam), x[order]))
        out = np.empty_like(vals)
        out[order] = np.maximum.accumulate(vals)
        return out

    # ------------------------------------------------------------------
    # derived quantities

    @property
    def x_lo(self) -> float:
        """Below this point every ``g_lam`` is under ``1e-15`` (one-sided laws)."""
        if self._x_lo is None:
            if not self.spec.one_sided:
                raise DomainError("x_lo is defined for one-sided laws")
            xs = np.geomspace(1e-6, 10.0, 141)
            lams = self.spec.c ** (-np.arange(8) / 8.0)
            vals = self.g(lams[:, None], xs[None, :]).max(axis=0)
            above = np.nonzero(vals > 1e-15)[0]
            self._x_lo = float(xs[max(above[0] - 1, 0)])
        return self._x_lo

    def sup_g(self) -> float:
        if self._sup is None:
            lams = self.spec.c ** (-np.arange(16) / 16.0)
            if self.spec.one_sided:
                xs = np.geomspace(self.x_lo, 1e3, 600)
            else:
                xs = np.linspace(-50.0, 50.0, 801)
            self._sup = float(np.max(self.g(lams[:, None], xs[None, :])))
        return self._sup

    def levy_density(self, lam, x):
        return self.spec.levy_density(x, lam)

    def normalization(self, lam: float, x_far: float | None = None) -> float:
        """``int_0^X g_lam + P(V > X)`` with the far tail from the Levy tail.

        The Levy tail is accurate to ``O(X**(-2 alpha))``, so the default
        ``X`` puts that error near ``1e-8``; it is capped at ``1e8`` because
        absolute round-off in ``g`` accumulates over the range.
        """
        if not self.spec.one_sided:
            raise DomainError("normalization check implemented for one-sided laws")
        if x_far is None:
            x_far = min(1e8, max(X_ASYMPTOTIC, 1e-8 ** (-1 / (2 * self.spec.alpha))))
        n_pan = int(math.ceil(math.log(x_far / self.x_lo) / math.log(1.2)))
        edges = np.geomspace(self.x_lo, x_far, n_pan + 1)
        nodes, weights = panel_nodes(edges, 16)
        vals = self.g(np.full(nodes.size, lam), nodes.ravel())
        return float((vals * weights.ravel()).sum() + self.spec.levy_tail(x_far, lam))

    # cache ------------------------------------------------------------

    def _build_cache(self):
        if not self.spec.one_sided:
            raise DomainError("the (lambda, x) cache is implemented for one-sided laws")
        u = np.arange(self.n_lambda + 1) / self.n_lambda
        lams = self.spec.c ** (u - 1.0)
        logx = np.linspace(math.log(self.x_lo), math.log(X_ASYMPTOTIC), self.n_x)
        table = self.g(lams[:, None], np.exp(logx)[None, :])
        self._cache = (u, logx, table)

    def g_cached(self, lam, x):
        """Bilinear interpolation of ``g`` on the ``(log_c lam, log x)`` grid."""
        if self._cache is None:
            self._build_cache()
        u_grid, logx, table = self._cache
        lam, x = np.broadcast_arrays(np.asarray(lam, dtype=float), np.asarray(x, dtype=float))
        u = np.log(self.reduce(lam)) / math.log(self.spec.c) + 1.0
        u = np.clip(u, 0.0, 1.0)
        lx = np.log(np.maximum(x, 1e-300))
        fu = u * self.n_lambda
        i = np.minimum(fu.astype(int), self.n_lambda - 1)
        a = fu - i
        fx = (lx - logx[0]) / (logx[1] - logx[0])
        k = np.clip(fx.astype(int), 0, self.n_x - 2)
        b = np.clip(fx - k, 0.0, 1.0)
        val = ((1 - a) * (1 - b) * table[i, k] + a * (1 - b) * table[i + 1, k]
               + (1 - a) * b * table[i, k + 1] + a * b * table[i + 1, k + 1])
        val = np.where(lx < logx[0], 0.0, val)
        far = lx > logx[-1]
        if np.any(far):
            val = np.where(far, self.spec.levy_density(np.maximum(x, 1.0), lam), val)
        return val if val.ndim else float(val)

    def lipschitz_lambda(self, n_lam: int = 32, xs=None) -> float:
        """Largest ``sup_x |g_l1 - g_l2| / |l1 - l2|`` over adjacent grid values of lambda."""
        lams = self.spec.c ** (np.arange(n_lam + 1) / n_lam - 1.0)
        if xs is None:
            xs = np.geomspace(self.x_lo, 1e3, 400)
        vals = self.g(lams[:, None], np.asarray(xs)[None, :])
        return float((np.abs(np.diff(vals, axis=0)).max(axis=1) / np.diff(lams)).max())

    def x_derivative_bound(self, n_lam: int = 16, xs=None) -> float:
        """Largest finite-difference slope ``|dg/dx|`` over a lambda grid."""
        lams = self.spec.c ** (np.arange(n_lam) / n_lam - 1.0)
        if xs is None:
            xs = np.linspace(self.x_lo, 50.0, 2001)
        vals = self.g(lams[:, None], np.asarray(xs)[None, :])
        return float((np.abs(np.diff(vals, axis=1)) / np.diff(xs)).max())

    def metadata(self) -> dict:
        return {"route": self.route, "theta": self.theta, "t_max": self.t_max, "eps": self.eps,
                "nu": self.nu, "n_lambda": self.n_lambda, "alpha": self.spec.alpha, "c": self.spec.c}


def g_lambda(e: DensityEvaluator, lam, x):
    return e.g(lam, x)


def G_lambda(e: DensityEvaluator, lam, x):
    return e.G(lam, x)


# ----------------------------------------------------------------------
# right-hand sides of the renewal limit theorems

def _kink_edges(s: NormingScheme, alpha: float, Bn: float, x_lo: float, x_hi: float) -> np.ndarray:
    """Points where ``Bn x**-alpha`` crosses a subsequence element, plus the ends."""
    k = s.subsequence
    # continue the subsequence geometrically below k_1 far enough to reach x_hi
    m = max(1, int(math.ceil(math.log(k[0] * x_hi ** alpha / Bn) / math.log(s.c))) + 1)
    below = k[0] * s.c ** -np.arange(1, m + 1, dtype=float)
    ks = np.concatenate([below[::-1], k])
    xs = (Bn / ks) ** (1 / alpha)
    xs = xs[(xs > x_lo) & (xs < x_hi)]
    edges = np.unique(np.concatenate([[x_lo, x_hi], xs]))
    # keep pieces no wider than a factor 2 in x
    out = [edges[0]]
    for b in edges[1:]:
        a = out[-1]
        m = max(1, int(math.ceil(math.log(b / a) / math.log(2.0))))
        out.extend((a * (b / a) ** (np.arange(1, m + 1) / m)).tolist())
    return np.array(out)


def _rhs(e: DensityEvaluator, s: NormingScheme, scale_arg: float, kind: str, cached: bool) -> float:
    spec = e.spec
    alpha = spec.alpha
    if not 0 < alpha < 1:
        raise DomainError("right-hand-side integrals need alpha in (0, 1)")
    if not spec.one_sided:
        raise DomainError("right-hand-side integrals need a one-sided spec")
    Bn = float(norming_B(s, scale_arg))
    edges = _kink_edges(s, alpha, Bn, e.x_lo, X_ASYMPTOTIC)
    nodes, weights = panel_nodes(np.log(edges), 24)
    x = np.exp(nodes.ravel())
    w = weights.ravel() * x
    lam = position_gamma(s, Bn * x ** -alpha, extend=True)
    if kind == "g":
        vals = e.g_cached(lam, x) if cached else e.g(lam, x)
        body = alpha * float((vals * x ** -alpha * w).sum())
    else:
        vals = e.G(lam, x)
        body = alpha * float((vals * x ** (-alpha - 1) * w).sum())
    # far range: g by the Levy density, 1 - G by the Levy tail
    far = _kink_edges(s, alpha, Bn, X_ASYMPTOTIC, X_FAR)
    nodes, weights = panel_nodes(np.log(far), 16)
    x = np.exp(nodes.ravel())
    w = weights.ravel() * x
    lam = position_gamma(s, Bn * x ** -alpha, extend=True)
    if kind == "g":
        tail = alpha * float((spec.levy_density(x, lam) * x ** -alpha * w).sum())
    else:
        tail = X_ASYMPTOTIC ** -alpha - X_FAR ** -alpha
        tail -= alpha * float((spec.levy_tail(x, lam) * x ** (-alpha - 1) * w).sum())
    return body + tail


def srt_rhs_integral(e: DensityEvaluator, s: NormingScheme, n: float, cached: bool = False) -> float:
    """``alpha int_0^inf g_{gamma(B(n) x**-alpha)}(x) x**-alpha dx``."""
    return _rhs(e, s, n, "g", cached)


def renewal_rhs_integral(e: DensityEvaluator, s: NormingScheme, y: float) -> float:
    """``alpha int_0^inf G_{gamma(B(y) x**-alpha)}(x) x**(-alpha-1) dx``."""
    return _rhs(e, s, y, "G", False)


def write_density_csv(e: DensityEvaluator, lams, xs, path) -> None:
    """Rows ``(lambda, x, g, G)`` over the product grid."""
    lams = np.asarray(lams, dtype=float)
    xs = np.asarray(xs, dtype=float)
    L, X = np.meshgrid(lams, xs, indexing="ij")
    g = e.g(L, X)
    G = e.G(L, X)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "x", "g", "G"])
        for row in zip(L.ravel(), X.ravel(), np.ravel(g), np.ravel(G)):
            w.writerow([f"{v:.17g}" for v in row])


def write_density_metadata(e: DensityEvaluator, path) -> None:
    with open(path, "w") as fh:
        json.dump(e.metadata(), fh, indent=2, sort_keys=True)
