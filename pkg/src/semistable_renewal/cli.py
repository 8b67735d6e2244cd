"""Command-line experiment runner.

``semirenew list`` prints the bundled configs; ``semirenew run --config X``
runs one verification suite and writes its tables plus ``summary.json``.
Exit status: 0 all assertions pass, 1 some assertion fails, 2 config error,
3 numeric or resource error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import fft as sp_fft

from . import charfn, llt_verify, renewal
from .density import DensityEvaluator
from .dists import LatticeDist, NonlatticeDist, dist_from_dict
from .errors import (ConfigError, ConstructionError, DomainError, NumericError, PreconditionError,
                     ResourceError)

SCHEMA_VERSION = 1
SUITES = ("charfn", "llt", "merge", "srt", "srt-a1", "renewal-fn", "nonarith", "stone")
TOP_KEYS = {"name", "description", "suite", "distribution", "grids", "tolerances", "options", "seed"}
DIST_KEYS = {"alpha", "c", "M_R", "M_L", "ell", "ell1", "subsequence", "centering", "support", "offset_a",
             "kappa_rescale", "example"}
GRID_KEYS = {"n_list", "y_list", "t_grid", "h_list"}
TOLERANCE_KEYS = {"final_relative", "liminf", "method_agreement", "decreasing", "ratio", "imag_ratio",
                  "final_fraction", "merging", "gamma_gain", "band", "window_relative", "rotation", "budget"}
OPTION_KEYS = {"samples", "method", "drift_centering", "level"}
CACHE_ENV = "SEMIRENEW_CACHE_DIR"


@dataclass
class ExperimentConfig:
    name: str
    suite: str
    distribution: dict
    grids: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    seed: int = 0
    description: str = ""

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        _reject_unknown(raw, TOP_KEYS, "config")
        for key in ("name", "suite", "distribution"):
            if key not in raw:
                raise ConfigError(f"missing field {key!r}")
        if raw["suite"] not in SUITES:
            raise ConfigError(f"field 'suite' must be one of {', '.join(SUITES)}; got {raw['suite']!r}")
        dist = raw["distribution"]
        if not isinstance(dist, dict):
            raise ConfigError("field 'distribution' must be an object")
        _reject_unknown(dist, DIST_KEYS, "distribution")
        grids = raw.get("grids", {})
        _reject_unknown(grids, GRID_KEYS, "grids")
        for key, vals in grids.items():
            if not isinstance(vals, list) or not vals or not all(isinstance(v, (int, float)) and v > 0 for v in vals):
                raise ConfigError(f"field 'grids.{key}' must be a nonempty list of positive numbers")
        tol = raw.get("tolerances", {})
        _reject_unknown(tol, TOLERANCE_KEYS, "tolerances")
        opts = raw.get("options", {})
        _reject_unknown(opts, OPTION_KEYS, "options")
        seed = raw.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"field 'seed' must be a nonnegative integer, got {seed!r}")
        return cls(raw["name"], raw["suite"], dist, grids, tol, opts, seed, raw.get("description", ""))


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"field {where!r} must be an object")
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


@dataclass
class Assertion:
    name: str
    value: float
    threshold: float
    passed: bool

    @classmethod
    def at_most(cls, name, value, threshold):
        return cls(name, float(value), float(threshold), bool(value <= threshold))

    @classmethod
    def at_least(cls, name, value, threshold):
        return cls(name, float(value), float(threshold), bool(value >= threshold))


@dataclass
class Context:
    cfg: ExperimentConfig
    out: Path
    dist: object
    spec: object
    scheme: object
    _evaluator: DensityEvaluator | None = None

    @property
    def evaluator(self) -> DensityEvaluator:
        if self._evaluator is None:
            self._evaluator = DensityEvaluator(self.spec)
        return self._evaluator

    def grid(self, key: str, default=None):
        vals = self.cfg.grids.get(key, default)
        if vals is None:
            raise ConfigError(f"suite {self.cfg.suite!r} needs grids.{key}")
        return list(vals)

    def tol(self, key: str, default=None):
        return self.cfg.tolerances.get(key, default)

    def lattice(self) -> LatticeDist:
        if not isinstance(self.dist, LatticeDist):
            raise ConfigError(f"suite {self.cfg.suite!r} needs a lattice distribution")
        return self.dist


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_table(path: Path, cols: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])


def _cached_table(ctx: Context, N: int, method: str) -> renewal.RenewalTable:
    d = ctx.lattice()
    cache = os.environ.get(CACHE_ENV)
    if not cache:
        return renewal.renewal_sequence(d, N, method)
    key = hashlib.sha256(json.dumps([ctx.cfg.distribution, N, method], sort_keys=True).encode()).hexdigest()[:24]
    path = Path(cache) / f"renewal-{key}.npy"
    if path.exists():
        u = np.load(path)
        tag = "direct-recursion" if method == "direct" else "series-reciprocal"
        return renewal.RenewalTable(u, np.cumsum(u), d.name, tag)
    table = renewal.renewal_sequence(d, N, method)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, table.u)
    return table


# ----------------------------------------------------------------------
# suites

def suite_charfn(ctx: Context) -> list[Assertion]:
    d = ctx.lattice()
    out = []
    if d.alpha is None or d.alpha == 1.0:
        rows = []
        for t in ctx.grid("t_grid", [1e-5]):
            ratio = charfn.imag_ratio_index_one(d, float(t))
            rows.append({"t": float(t), "imag_ratio": ratio})
            out.append(Assertion.at_most(f"imag_ratio_gap[t={t:g}]", abs(ratio - 1), ctx.tol("imag_ratio", 0.1)))
        write_table(ctx.out / "charfn.csv", ["t", "imag_ratio"], rows)
        return out
    rows = charfn.charfn_asymptotic_ratio(d, ctx.grid("t_grid", [1e-4]))
    charfn.write_charfn_csv(rows, ctx.out / "charfn.csv")
    for r in rows:
        out.append(Assertion.at_most(f"ratio_gap[t={r['t']:g}]", abs(r["abs_ratio"] - 1), ctx.tol("ratio", 0.05)))
    pos = charfn.positivity_scan(d)
    out.append(Assertion.at_least("positivity_nu", pos["nu"], 1e-12))
    out.append(Assertion.at_most("positivity_violations", pos["violations"], 0))
    nu = charfn.nu_bound_scan(d, seed=ctx.cfg.seed)
    out.append(Assertion.at_most("nu_bound_violations", nu["violations"], 0))
    with open(ctx.out / "nu_bounds.json", "w") as fh:
        json.dump({"positivity": pos, "bounds": nu}, fh, indent=2, sort_keys=True)
    return out


def _llt_reports(ctx: Context) -> list[llt_verify.LLTReport]:
    d = ctx.lattice()
    e = ctx.evaluator
    delta = charfn.drift_constant(d) if ctx.cfg.options.get("drift_centering") else None
    reports = []
    for n in ctx.grid("n_list"):
        n = int(n)
        C = None if delta is None else n * delta
        reports.append(llt_verify.llt_report(d, ctx.scheme, e, n, level=ctx.cfg.options.get("level", 1e-4), C=C))
    llt_verify.write_llt_csv(reports, ctx.out / "llt.csv")
    with open(ctx.out / "llt_reports.json", "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2, sort_keys=True)
    return reports


def suite_llt(ctx: Context) -> list[Assertion]:
    reports = _llt_reports(ctx)
    out = []
    errs = [r.llt_error for r in reports]
    if len(errs) > 1:
        worst = max(b / a for a, b in zip(errs, errs[1:]))
        out.append(Assertion.at_most("llt_error_step_ratio", worst, 1.0 - 1e-12))
    last = reports[-1]
    if ctx.tol("final_fraction") is not None or ctx.tol("gamma_gain") is None:
        out.append(Assertion.at_most("llt_error_over_sup_g", last.llt_error / last.sup_g, ctx.tol("final_fraction", 0.05)))
    if ctx.tol("gamma_gain") is not None:
        gain = 1.0 - last.llt_error / last.llt_error_fixed
        out.append(Assertion.at_least("gamma_gain", gain, ctx.tol("gamma_gain")))
    return out


def suite_merge(ctx: Context) -> list[Assertion]:
    reports = _llt_reports(ctx)
    return [Assertion.at_most(f"merging_error[n={r.n}]", r.merging_error, ctx.tol("merging", 0.02))
            for r in reports[-1:]]


def suite_srt(ctx: Context) -> list[Assertion]:
    n_list = [int(n) for n in ctx.grid("n_list")]
    method = ctx.cfg.options.get("method", "series")
    table = _cached_table(ctx, max(n_list), method)
    rows = renewal.srt_residual(table, ctx.evaluator, ctx.scheme, n_list)
    renewal.write_srt_csv(rows, ctx.out / "srt.csv")
    out = []
    if ctx.tol("decreasing", True) and len(rows) > 1:
        res = [abs(r["residual"]) for r in rows]
        out.append(Assertion.at_most("residual_step_ratio", max(b / a for a, b in zip(res, res[1:])), 1.0 - 1e-12))
    if ctx.tol("final_relative") is not None:
        out.append(Assertion.at_most("final_relative_gap", abs(rows[-1]["relative"]), ctx.tol("final_relative")))
    if ctx.tol("liminf") is not None:
        out.append(Assertion.at_least("min_residual", min(r["residual"] for r in rows), ctx.tol("liminf")))
    if ctx.tol("method_agreement") is not None:
        N = min(10_000, max(n_list))
        a = renewal.renewal_sequence(ctx.lattice(), N, "direct")
        b = renewal.renewal_sequence(ctx.lattice(), N, "series")
        out.append(Assertion.at_most("method_agreement", float(np.max(np.abs(a.u - b.u))), ctx.tol("method_agreement")))
    return out


def suite_renewal_fn(ctx: Context) -> list[Assertion]:
    y_list = [float(y) for y in ctx.grid("y_list")]
    table = _cached_table(ctx, int(max(y_list)), ctx.cfg.options.get("method", "series"))
    rows = renewal.renewal_function_residual(table, ctx.evaluator, ctx.scheme, y_list)
    renewal.write_renewal_function_csv(rows, ctx.out / "renewal_fn.csv")
    return [Assertion.at_most(f"relative_gap[y={rows[-1]['y']:g}]", abs(rows[-1]["relative"]),
                              ctx.tol("final_relative", 0.05))]


def suite_srt_a1(ctx: Context) -> list[Assertion]:
    n_list = [int(n) for n in ctx.grid("n_list")]
    table = _cached_table(ctx, max(n_list), ctx.cfg.options.get("method", "series"))
    rows = renewal.srt_a1_residual(ctx.lattice(), n_list, table)
    write_table(ctx.out / "srt_a1.csv", ["n", "L", "u_n", "L_u", "U_L_over_n", "W_integral_scaled"], rows)
    band = ctx.tol("band", 0.1)
    last = rows[-1]
    return [Assertion.at_most(f"{key}_gap[n={last['n']}]", abs(last[key] - 1), band)
            for key in ("L_u", "U_L_over_n", "W_integral_scaled")]


def suite_nonarith(ctx: Context) -> list[Assertion]:
    d = ctx.lattice()
    if d.arithmetic:
        raise ConfigError("suite 'nonarith' needs a nonzero 'offset_a'")
    rows, out = [], []
    for y in ctx.grid("y_list"):
        for h in ctx.grid("h_list", [0.25]):
            r = renewal.window_prediction(d, ctx.evaluator, ctx.scheme, float(y), float(h))
            rows.append(r)
            out.append(Assertion.at_most(f"window_gap[y={y:g},h={h:g}]", abs(r["relative"]),
                                         ctx.tol("window_relative", 0.1)))
    write_table(ctx.out / "nonarith.csv", ["y", "h", "window", "K_max", "scaled", "rhs", "relative"], rows)
    dev = renewal.rotation_average(d.offset, 0.25, 10_000, range(0, 100_000, 997), np.linspace(0.0, 1.0, 21))
    out.append(Assertion.at_most("rotation_deviation", dev, ctx.tol("rotation", 0.01)))
    return out


def suite_stone(ctx: Context) -> list[Assertion]:
    if not isinstance(ctx.dist, NonlatticeDist):
        raise ConfigError("suite 'stone' needs a nonlattice distribution")
    out = []
    delta = charfn.drift_constant(ctx.dist) if ctx.cfg.options.get("drift_centering") else None
    for n in ctx.grid("n_list", [256]):
        rep = llt_verify.stone_mc_error(ctx.dist, ctx.scheme, ctx.evaluator, int(n),
                                        samples=int(ctx.cfg.options.get("samples", 1_000_000)),
                                        seed=ctx.cfg.seed, budget=ctx.tol("budget", 0.05),
                                        C=None if delta is None else int(n) * delta)
        llt_verify.write_stone_json(rep, ctx.out / f"stone_n{int(n)}.json")
        excess = max(dv - rd - rep.sup_g * ctx.tol("budget", 0.05) for dv, rd in zip(rep.deviation, rep.radius))
        out.append(Assertion.at_most(f"stone_excess[n={int(n)}]", excess, 0.0))
    return out


SUITE_FUNCS = {
    "charfn": suite_charfn, "llt": suite_llt, "merge": suite_merge, "srt": suite_srt, "srt-a1": suite_srt_a1,
    "renewal-fn": suite_renewal_fn, "nonarith": suite_nonarith, "stone": suite_stone,
}


# ----------------------------------------------------------------------
# entry points

def bundled_configs() -> dict[str, Path]:
    root = resources.files("semistable_renewal") / "configs"
    out = {}
    for p in sorted(root.iterdir(), key=lambda q: q.name):
        if p.name.endswith(".json"):
            with p.open() as fh:
                out[json.load(fh)["name"]] = Path(str(p))
    return out


def load_config(ref: str) -> ExperimentConfig:
    """Read a config from a path or a bundled config name."""
    path = Path(ref)
    if not path.exists():
        bundled = bundled_configs()
        if ref not in bundled:
            raise ConfigError(f"config {ref!r} is neither a file nor a bundled name")
        path = bundled[ref]
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return ExperimentConfig.from_dict(raw)


def run(cfg: ExperimentConfig, out_dir: Path, threads: int = 1) -> dict:
    """Run one suite; returns the summary written to ``summary.json``."""
    try:
        dist, spec, scheme = dist_from_dict(cfg.distribution)
    except ConstructionError as exc:
        raise ConfigError(str(exc)) from None
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx = Context(cfg, out_dir, dist, spec, scheme)
    with sp_fft.set_workers(threads):
        assertions = SUITE_FUNCS[cfg.suite](ctx)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "name": cfg.name,
        "suite": cfg.suite,
        "seed": cfg.seed,
        "assertions": [asdict(a) for a in assertions],
        "passed": all(a.passed for a in assertions),
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        out = Path(args.out) if args.out else Path("results") / cfg.name
        summary = run(cfg, out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, ResourceError, PreconditionError, DomainError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        for a in summary["assertions"]:
            mark = "PASS" if a["passed"] else "FAIL"
            print(f"{mark}  {a['name']}: {a['value']:.6g} (threshold {a['threshold']:.6g})")
        print(f"results in {out}")
    return 0 if summary["passed"] else 1


def _cmd_list(args) -> int:
    rows = []
    for name, path in bundled_configs().items():
        raw = json.loads(path.read_text())
        rows.append({"name": name, "suite": raw["suite"], "file": path.name,
                     "description": raw.get("description", "")})
    if args.json:
        print(json.dumps(rows, indent=2, sort_keys=True, ensure_ascii=False))
    else:
        width = max(len(r["name"]) for r in rows)
        for r in rows:
            print(f"{r['name']:<{width}}  {r['suite']:<10}  {r['description']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="semirenew", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one verification suite")
    r.add_argument("--config", required=True, help="config path or bundled config name")
    r.add_argument("--out", help="output directory (default results/<name>)")
    r.add_argument("--json", action="store_true", help="print the summary as JSON")
    r.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    r.set_defaults(func=_cmd_run)
    ls = sub.add_parser("list", help="list bundled configs")
    ls.add_argument("--json", action="store_true")
    ls.set_defaults(func=_cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
