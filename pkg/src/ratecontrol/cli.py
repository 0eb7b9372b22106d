"""Command-line front end: ``ratecontrol <subcommand> [--config FILE] [--set KEY=VALUE ...]``.

Configuration is one JSON document.  Values are resolved with this
precedence (highest first): ``--seed`` / ``--out`` flags, ``--set``
overrides, the JSON file, the ``RATECONTROL_SEED`` environment variable
(seed only), built-in defaults.

Exit codes: 0 success, 1 numerical failure (non-convergence or a tolerance
breach), 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import AdmissibilityError, ConvergenceError, DomainError, ParameterError, ScenarioError
from .gbm import (GbmParams, hjb_residual_gbm, value_gbm_large_xi, value_gbm_small_xi,
                  value_gbm_unrestricted)
from .io import dumps_json, heatmap_svg, write_csv, write_json, write_text
from .ou_hjb import (ProblemOU, SolverGrid, beta, extract_free_boundary, hjb_residual_ou,
                     solve_hjb_ou, value_bounds_ou, verify_regularity)
from .scenarios import quadratic_roots
from .validation import mc_suite
from .vasicek import DerivedParams, VasicekParams, log_discount, reparameterize
from .zero_bond import ProblemZB, feedback_control, optimal_strategy, value

SEED_ENV = "RATECONTROL_SEED"
DEFAULT_SEED = 20240601

EXAMPLE_CONFIG = {
    "model": "zero-bond", "parameterization": "derived",
    "a": 1.0, "sigma": 1.0, "b": -0.1, "r0": -0.2, "mu": 2.0, "xi": 4.0, "T": 4.0,
}
# critical times of the worked example, to four decimals
EXAMPLE_REFERENCE = {"w1": 0.2611, "w2": 2.0414, "t1": 0.1134, "t2": 0.4388}
EXAMPLE_TOL = 5e-4

REGION_COLORS = {0: "#1a1a1a", 1: "#8c8c8c", 2: "#e6e6e6", 3: "#c0392b"}
REGION_LABELS = {0: "wait", 1: "pay mu", 2: "pay xi", 3: "lump"}


class ConfigError(ParameterError):
    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


class NumericalFailure(RuntimeError):
    pass


# ------------------------------------------------------------------ configuration


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_dotted(cfg: dict, key: str, val) -> None:
    parts = key.split(".")
    node = cfg
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(key, "cannot override inside a non-object value")
    node[parts[-1]] = val


def load_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc}") from exc
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(_key_near(text, exc.pos),
                              f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config", "top level must be a JSON object")
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(item, "overrides must look like KEY=VALUE")
        key, raw = item.split("=", 1)
        _set_dotted(cfg, key.strip(), _parse_value(raw))
    if args.seed is not None:
        cfg["seed"] = args.seed
    elif "seed" not in cfg:
        env = os.environ.get(SEED_ENV)
        if env is not None:
            try:
                cfg["seed"] = int(env)
            except ValueError as exc:
                raise ConfigError(SEED_ENV, f"not an integer: {env!r}") from exc
    cfg.setdefault("seed", DEFAULT_SEED)
    if getattr(args, "out", None):
        cfg["output_dir"] = args.out
    return cfg


def _key_near(text: str, pos: int) -> str:
    # the last quoted key before the parse error
    head = text[:pos]
    end = head.rfind('":')
    if end < 0:
        return "config"
    start = head.rfind('"', 0, end)
    return head[start + 1:end] if start >= 0 else "config"


def _num(cfg: dict, key: str, default=None, *, positive=False, allow_inf=False) -> float:
    if key not in cfg:
        if default is None:
            raise ConfigError(key, "missing required value")
        return default
    raw = cfg[key]
    if allow_inf and (raw is None or raw in ("inf", "Infinity", "infinity")):
        return math.inf
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(key, f"expected a number, got {raw!r}")
    val = float(raw)
    if math.isnan(val) or (math.isinf(val) and not allow_inf):
        raise ConfigError(key, f"expected a finite number, got {raw!r}")
    if positive and not val > 0:
        raise ConfigError(key, f"must be > 0, got {raw!r}")
    return val


def _int(cfg: dict, key: str, default: int) -> int:
    raw = cfg.get(key, default)
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ConfigError(key, f"expected an integer, got {raw!r}")
    return raw


def _wrap(key: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except ParameterError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(key, str(exc)) from exc


def short_rate_params(cfg: dict) -> DerivedParams:
    """Vasicek parameters in (sigma_tilde, b_tilde) form by default, or (sigma, b)."""
    mode = cfg.get("parameterization", "original")
    a = _num(cfg, "a")
    r0 = _num(cfg, "r0", 0.0)
    if mode == "original":
        return reparameterize(_wrap("sigma_tilde", VasicekParams, a, _num(cfg, "sigma_tilde"),
                                    _num(cfg, "b_tilde"), r0))
    if mode == "derived":
        return _wrap("sigma", DerivedParams, a, _num(cfg, "sigma"), _num(cfg, "b"), r0)
    raise ConfigError("parameterization", f"must be 'original' or 'derived', got {mode!r}")


def zb_problem(cfg: dict) -> ProblemZB:
    d = short_rate_params(cfg)
    mu = _num(cfg, "mu")
    if mu < 0:
        raise ConfigError("mu", "must be >= 0")
    xi = _num(cfg, "xi", allow_inf=True, positive=True)
    T = _num(cfg, "T", positive=True)
    return _wrap("T", ProblemZB, d, mu, xi, T)


def gbm_params(cfg: dict) -> GbmParams:
    m = _num(cfg, "m")
    sigma = _num(cfg, "sigma")
    xi = _num(cfg, "xi", 1.0, allow_inf=True)
    try:
        return GbmParams(m, sigma, _num(cfg, "r0", 0.0), _num(cfg, "mu", 1.0), xi)
    except ParameterError as exc:
        key = "m" if "m > sigma" in str(exc) else ("sigma" if "sigma" in str(exc) else "xi")
        raise ConfigError(key, str(exc)) from exc


def ou_problem(cfg: dict) -> ProblemOU:
    d = short_rate_params(cfg)
    return _wrap("b_tilde", ProblemOU, d, _num(cfg, "mu"), _num(cfg, "xi", positive=True))


def ou_grid(cfg: dict, p: ProblemOU) -> SolverGrid:
    g = cfg.get("grid", {})
    if not isinstance(g, dict):
        raise ConfigError("grid", "must be an object")
    base = SolverGrid.default(p, _int(g, "n_r", 201), _int(g, "n_x", 201))
    try:
        return SolverGrid(
            _num(g, "r_min", base.r_min), _num(g, "r_max", base.r_max), _num(g, "x_max", base.x_max),
            base.n_r, base.n_x, _int(g, "max_iter", base.max_iter), _num(g, "tol", base.tol),
            _num(g, "damping", base.damping), g.get("boundary", base.boundary),
        )
    except ParameterError as exc:
        raise ConfigError("grid", str(exc)) from exc


def _output_dir(cfg: dict) -> Path:
    out = cfg.get("output_dir", "out")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir", "must be a non-empty path string")
    return Path(out)


# ------------------------------------------------------------------ commands


def cmd_classify(cfg: dict, out) -> dict:
    p = zb_problem({**cfg, "mu": cfg.get("mu", 0.0), "xi": cfg.get("xi", 1.0)})
    report = p.report.to_dict()
    roots = quadratic_roots(p.derived, p.r)
    report["D"] = roots.D
    out.write(dumps_json(report))
    return {"outputs": [], "result": report}


def _surface_rows(p: ProblemZB, ts, xs):
    rows = []
    cats = np.zeros((len(xs), len(ts)), int)
    for i, t in enumerate(ts):
        for j, x in enumerate(xs):
            rate, lump = feedback_control(p, float(t), float(x))
            v = value(p, float(t), float(x))
            if lump > 0 and t < p.T:
                kind, amount, cat = "lump", lump, 3
            else:
                kind, amount = "rate", rate
                cat = 0 if rate == 0 else (2 if rate == p.xi and rate != p.mu else 1)
            rows.append((t, x, v, amount, kind))
            cats[j, i] = cat
    return rows, cats


def _region_svg(p: ProblemZB, ts, xs, cats, title: str) -> str:
    marks = []
    rep = p.report
    for t in (rep.t1, rep.w1, rep.t2):
        if t is not None and 0 < t < p.T:
            marks.append(([t, t], [xs[0], xs[-1]], "#2e86c1"))
    used = sorted(set(int(c) for c in np.unique(cats)))
    return heatmap_svg(cats, ts, xs, REGION_COLORS, labels={k: REGION_LABELS[k] for k in used},
                       title=title, x_label="t", y_label="x", curves=marks)


def cmd_example(cfg: dict) -> dict:
    out_dir = _output_dir(cfg)
    p = zb_problem({**EXAMPLE_CONFIG, **{k: v for k, v in cfg.items() if k in EXAMPLE_CONFIG}})
    rep = p.report
    outputs = []
    scen = rep.to_dict()
    scen["D"] = quadratic_roots(p.derived, p.r).D
    outputs.append(write_json(out_dir / "scenario.json", scen))
    n_t, n_x = _int(cfg, "n_t", 201), _int(cfg, "n_x", 151)
    ts = np.linspace(0.0, p.T, n_t)
    xs = np.linspace(0.0, _num(cfg, "x_max", 3.0), n_x)
    rows, cats = _surface_rows(p, ts, xs)
    outputs.append(write_csv(out_dir / "surface.csv", ["t", "x", "value", "rate_or_lump", "kind"], rows))
    outputs.append(write_text(out_dir / "regions.svg",
                              _region_svg(p, ts, xs, cats, "Strategy regions, slices split at t1, w1, t2")))
    checks = {}
    for key, ref in EXAMPLE_REFERENCE.items():
        got = getattr(rep, key)
        err = abs(got - ref)
        checks[key] = {"computed": got, "reference": ref, "abs_error": err, "pass": err < EXAMPLE_TOL}
    f0, fw1, fT = 0.0, log_discount(p.derived, p.r, rep.w1), rep.fT
    checks["f_order"] = {"f0": f0, "f_w1": fw1, "f_T": fT, "pass": fw1 > fT > f0}
    col = lambda lo, hi: cats[:, (ts >= lo) & (ts < hi)]
    tail, pay, mixed = col(rep.t2, p.T + 1), col(rep.w1, rep.t2), col(rep.t1, rep.w1)
    checks["region_layout"] = {
        "wait_on_t2_T": bool(np.all(tail == 0)),
        "pay_on_w1_t2": bool(np.all(pay > 0)),
        "wait_and_pay_on_t1_w1": bool(np.any(mixed == 0) and np.any(mixed > 0)),
    }
    checks["region_layout"]["pass"] = all(checks["region_layout"].values())
    checks["all_pass"] = all(c["pass"] for c in checks.values() if isinstance(c, dict))
    outputs.append(write_json(out_dir / "check.json", checks))
    if not checks["all_pass"]:
        raise NumericalFailure("example check failed; see check.json")
    return {"outputs": outputs, "result": checks}


def _zb_states(cfg: dict, p: ProblemZB):
    if "states" in cfg:
        states = cfg["states"]
        if not isinstance(states, list) or not all(isinstance(s, list) and len(s) == 2 for s in states):
            raise ConfigError("states", "must be a list of [t, x] pairs")
        return [(float(t), float(x)) for t, x in states]
    ts = np.linspace(0.0, p.T, _int(cfg, "n_t", 11))
    xs = np.linspace(0.0, _num(cfg, "x_max", 3.0), _int(cfg, "n_x", 7))
    return [(float(t), float(x)) for t in ts for x in xs]


def cmd_zb_value(cfg: dict) -> dict:
    p = zb_problem(cfg)
    out_dir = _output_dir(cfg)
    rows = []
    for t, x in _wrap("states", _zb_states, cfg, p):
        v = _wrap("states", value, p, t, x)
        rate, lump = feedback_control(p, t, x)
        rows.append((t, x, v, lump, "lump") if lump > 0 and t < p.T else (t, x, v, rate, "rate"))
    path = write_csv(out_dir / "zb_value.csv", ["t", "x", "value", "rate_or_lump", "kind"], rows)
    return {"outputs": [path]}


def cmd_zb_strategy(cfg: dict) -> dict:
    p = zb_problem(cfg)
    out_dir = _output_dir(cfg)
    t0, x0 = _num(cfg, "t", 0.0), _num(cfg, "x", 0.0)
    strat = _wrap("t", optimal_strategy, p, t0, x0)
    events = [(a, "rate", c) for a, _, c in strat.segments] + [(s, "lump", m) for s, m in strat.lumps]
    events.sort(key=lambda e: (e[0], e[1] == "rate"))
    rows = []
    for s, kind, amount in events:
        s_eval = min(s, p.T)
        at_s = sum(m for u, m in strat.lumps if u == s)
        # surplus just before any lump paid at s
        x = x0 + p.mu * (s_eval - t0) - strat.consumed(s_eval) + at_s
        if kind == "rate":
            x -= at_s
        v = value(p, s_eval, max(x, 0.0))
        rows.append((s_eval, max(x, 0.0), v, amount, kind))
    path = write_csv(out_dir / "zb_strategy.csv", ["t", "x", "value", "rate_or_lump", "kind"], rows)
    return {"outputs": [path]}


def cmd_zb_surface(cfg: dict) -> dict:
    p = zb_problem(cfg)
    out_dir = _output_dir(cfg)
    ts = np.linspace(0.0, p.T, _int(cfg, "n_t", 101))
    xs = np.linspace(0.0, _num(cfg, "x_max", 3.0), _int(cfg, "n_x", 61))
    rows, cats = _wrap("T", _surface_rows, p, ts, xs)
    paths = [
        write_csv(out_dir / "zb_surface.csv", ["t", "x", "value", "rate_or_lump", "kind"], rows),
        write_text(out_dir / "zb_regions.svg", _region_svg(p, ts, xs, cats, "Strategy regions")),
    ]
    return {"outputs": paths}


def cmd_gbm_value(cfg: dict) -> dict:
    p = gbm_params(cfg)
    out_dir = _output_dir(cfg)
    rs = np.linspace(_num(cfg, "r_min", -1.0), _num(cfg, "r_max", 1.0), _int(cfg, "n_r", 11))
    xs = np.linspace(0.0, _num(cfg, "x_max", 3.0), _int(cfg, "n_x", 7))
    rows = []
    for r in rs:
        for x in xs:
            small = value_gbm_small_xi(p, r) if p.xi <= p.mu else math.nan
            large = value_gbm_large_xi(p, x, r) if p.mu < p.xi < math.inf else math.nan
            unres = value_gbm_unrestricted(p, x, r)
            res_s = hjb_residual_gbm(p, r, x, "small") if p.xi <= p.mu else math.nan
            res_l = hjb_residual_gbm(p, r, x, "large") if p.mu < p.xi < math.inf else math.nan
            res_u = hjb_residual_gbm(p, r, x, "unrestricted")
            rows.append((r, x, small, large, unres, res_s, res_l, res_u))
    header = ["r", "x", "value_small", "value_large", "value_unrestricted",
              "residual_small", "residual_large", "residual_unrestricted"]
    return {"outputs": [write_csv(out_dir / "gbm_value.csv", header, rows)]}


def cmd_ou_solve(cfg: dict) -> dict:
    p = ou_problem(cfg)
    g = ou_grid(cfg, p)
    out_dir = _output_dir(cfg)
    vs = solve_hjb_ou(p, g)
    R, X = np.meshgrid(vs.r, vs.x, indexing="ij")
    lower, upper = value_bounds_ou(p, R, X)
    reg = verify_regularity(p, vs)
    boundary = extract_free_boundary(p, vs)
    rows = [(float(r), float(x), float(v), float(c))
            for r, x, v, c in zip(R.ravel(), X.ravel(), vs.values.ravel(), vs.policy.ravel())]
    paths = [write_csv(out_dir / "ou_surface.csv", ["r", "x", "value", "policy"], rows)]
    report = {
        "iterations": vs.iterations, "residual": vs.residual_norm,
        "residual_interior": hjb_residual_ou(p, vs, g), "damped": vs.damped,
        "grid": {"r_min": g.r_min, "r_max": g.r_max, "x_max": g.x_max, "n_r": g.n_r, "n_x": g.n_x,
                 "boundary": g.boundary},
        "bound_violations": {
            "upper_count": int(np.sum(vs.values > upper)),
            "upper_max": float(np.max(vs.values - upper)),
            "lower_count": int(np.sum(vs.values < lower)),
            "lower_max": float(np.max(lower - vs.values)),
        },
        "regularity": reg.to_dict(),
        "free_boundary": boundary,
    }
    paths.append(write_json(out_dir / "ou_report.json", report))
    rs_neg = vs.r[(vs.r < 0) & (vs.r > vs.r[0])]
    curves = []
    if not p.small_cap and rs_neg.size:
        curves.append(((p.xi - p.mu) * beta(p, rs_neg), rs_neg, "#2e86c1"))
    # rows of the heatmap run along r, columns along x
    svg = heatmap_svg(np.where(vs.policy == 0, 0, np.where(vs.policy >= p.xi, 2, 1)), vs.x, vs.r,
                      REGION_COLORS, title="Feedback policy, beta curve overlaid", x_label="x",
                      y_label="r", labels={k: REGION_LABELS[k] for k in (0, 1, 2)}, curves=curves,
                      cell=2.0)
    paths.append(write_text(out_dir / "ou_policy.svg", svg))
    if vs.residual_norm >= g.tol:
        raise NumericalFailure(f"residual {vs.residual_norm:.3e} above tolerance {g.tol:.1e}")
    return {"outputs": paths, "result": {"iterations": vs.iterations, "residual": vs.residual_norm}}


def cmd_mc_check(cfg: dict) -> dict:
    out_dir = _output_dir(cfg)
    checks = mc_suite(seed=int(cfg["seed"]), n_paths=_int(cfg, "n_paths", 100_000))
    report = {"checks": [c.to_dict() for c in checks], "all_pass": all(c.passed for c in checks),
              "seed": cfg["seed"]}
    path = write_json(out_dir / "mc_check.json", report)
    if not report["all_pass"]:
        raise NumericalFailure("Monte Carlo cross-validation failed; see mc_check.json")
    return {"outputs": [path]}


COMMANDS = {
    "classify": None,
    "example": cmd_example,
    "zb-value": cmd_zb_value,
    "zb-strategy": cmd_zb_strategy,
    "zb-surface": cmd_zb_surface,
    "gbm-value": cmd_gbm_value,
    "ou-solve": cmd_ou_solve,
    "mc-check": cmd_mc_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ratecontrol", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field (dotted keys reach nested objects)")
        sp.add_argument("--seed", type=int, help=f"random seed (default: ${SEED_ENV} or {DEFAULT_SEED})")
        sp.add_argument("--out", help="output directory")
    return parser


def _manifest(command: str, cfg: dict, status: str, outputs, error: str | None) -> dict:
    return {
        "command": command, "config": cfg, "seed": cfg.get("seed"), "status": status,
        "error": error, "outputs": sorted(Path(p).name for p in outputs),
        "versions": {"ratecontrol": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg: dict = {}
    outputs: list = []
    status, error, code = "ok", None, 0
    started = time.perf_counter()
    try:
        cfg = load_config(args)
        if args.command == "classify":
            result = cmd_classify(cfg, sys.stdout)
        else:
            result = COMMANDS[args.command](cfg)
        outputs = result.get("outputs", [])
    except ConfigError as exc:
        status, error, code = "config_error", str(exc), 2
    except (ParameterError, DomainError, ScenarioError) as exc:
        status, error, code = "config_error", str(exc), 2
    except (ConvergenceError, AdmissibilityError, NumericalFailure) as exc:
        status, error, code = "numerical_failure", str(exc), 1
    elapsed = time.perf_counter() - started
    if error:
        print(f"ratecontrol {args.command}: {error}", file=sys.stderr)
    out_dir = cfg.get("output_dir") if isinstance(cfg.get("output_dir"), str) else args.out
    if args.command != "classify" and out_dir is None:
        # the manifest is written even when the configuration could not be read
        out_dir = "out"
    if out_dir is not None:
        try:
            write_json(Path(out_dir) / "manifest.json", _manifest(args.command, cfg, status, outputs, error))
            write_json(Path(out_dir) / "timings.json", {"command": args.command, "seconds": elapsed})
        except OSError as exc:
            print(f"ratecontrol: cannot write manifest: {exc}", file=sys.stderr)
            code = code or 2
    return code


if __name__ == "__main__":
    sys.exit(main())
