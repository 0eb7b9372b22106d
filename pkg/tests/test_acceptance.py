"""Acceptance criteria: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are
written straight to the terminal, so they appear even when output capture
is on.
"""

import math
import shutil
import time

import numpy as np
import pytest

from oracles import dp_zero_bond
from ratecontrol import (DerivedParams, GbmParams, ProblemOU, ProblemZB, SolverGrid, VasicekParams,
                         alpha_curve, analytic_value_small_xi_ou, beta, classify,
                         hjb_residual_gbm, hjb_residual_zb, log_discount, mc_validate_policy,
                         policy_value_ou, reparameterize, solve_hjb_ou, value_bounds_ou,
                         verify_regularity)
from ratecontrol.cli import main as cli_main
from ratecontrol.ou_hjb import hjb_residual_ou
from ratecontrol.validation import mc_suite
from ratecontrol.zero_bond import value

EXAMPLE = DerivedParams(a=1.0, sigma=1.0, b=-0.1, r0=-0.2)
OU = reparameterize(VasicekParams(a=1.0, sigma_tilde=0.5, b_tilde=0.6, r0=0.0))


@pytest.fixture
def verdict(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {label}: {detail}")
        assert ok, detail
    return emit


def _zb(xi):
    return ProblemZB(EXAMPLE, mu=2.0, xi=xi, T=4.0)


# 1 ---------------------------------------------------------------------------

def test_criterion_1_example_times(verdict):
    start = time.perf_counter()
    rep = classify(EXAMPLE, -0.2, 4.0)
    elapsed = time.perf_counter() - start
    ref = {"w1": 0.2611, "w2": 2.0414, "t1": 0.1134, "t2": 0.4388}
    errs = {k: abs(getattr(rep, k) - v) for k, v in ref.items()}
    ok = all(e < 5e-4 for e in errs.values()) and elapsed < 1.0
    got = ", ".join(f"{k}={getattr(rep, k):.7f}" for k in ref)
    verdict("criterion 1 (example critical times)", ok,
            f"{got}; max error {max(errs.values()):.2e} (tol 5e-4); {elapsed * 1e3:.1f} ms (limit 1 s)")


# 2 ---------------------------------------------------------------------------

def test_criterion_2_dp_oracle(verdict):
    dt = 1e-3
    ts = np.round(np.linspace(0.0, 4.0, 20) / dt) * dt
    xs_sample = np.linspace(0.0, 3.0, 20)
    start = time.perf_counter()
    gaps = {}
    for label, xi in (("xi<=mu", 1.0), ("xi>mu", 4.0), ("unrestricted", math.inf)):
        p = _zb(xi)
        xs, V = dp_zero_bond(p, dt=dt, keep_times=ts)
        worst = 0.0
        for t in ts:
            dp_vals = np.interp(xs_sample, xs, V[t])
            closed = np.array([value(p, float(t), x) for x in xs_sample])
            worst = max(worst, float(np.abs(closed - dp_vals).max()))
        gaps[label] = worst
    elapsed = time.perf_counter() - start
    ok = all(g < 5e-3 for g in gaps.values()) and elapsed < 120
    detail = ", ".join(f"{k} {v:.2e}" for k, v in gaps.items())
    verdict("criterion 2 (closed forms vs DP oracle, 20x20)", ok,
            f"max |closed - DP|: {detail} (tol 5e-3); oracle {elapsed:.1f} s (limit 120 s)")


# 3 ---------------------------------------------------------------------------

def _left(fn, z, h):
    return (3 * fn(z) - 4 * fn(z - h) + fn(z - 2 * h)) / (2 * h)


def _right(fn, z, h):
    return (-3 * fn(z) + 4 * fn(z + h) - fn(z + 2 * h)) / (2 * h)


def test_criterion_3_smooth_gluing(verdict):
    worst_t = worst_x = 0.0
    h = 1e-4
    for xi in (1.0, 4.0):
        p = _zb(xi)
        rep = p.report
        for ts in (rep.t1, rep.w1, rep.t2):
            for x in np.linspace(0.05, 3.0, 12):
                Vt = lambda t: value(p, t, x)
                worst_t = max(worst_t, abs(_left(Vt, ts, h) - _right(Vt, ts, h)))
                Vx = lambda z, t=ts: value(p, t, z)
                # one-sided x-derivatives on either side of the switching time
                lo = _right(lambda z: value(p, ts - h, z), x, h)
                hi = _right(lambda z: value(p, ts + h, z), x, h)
                at = _right(Vx, x, h)
                worst_x = max(worst_x, abs(lo - at), abs(hi - at))
    ok = worst_t < 1e-4 and worst_x < 1e-4
    verdict("criterion 3 (C1 gluing across t1, w1, t2)", ok,
            f"max one-sided jump: d/dt {worst_t:.2e}, d/dx {worst_x:.2e} (tol 1e-4)")


# 4 ---------------------------------------------------------------------------

def test_criterion_4_hjb_residuals(verdict):
    rng = np.random.default_rng(4)
    zb = {}
    for label, xi in (("xi<=mu", 1.0), ("xi>mu", 4.0), ("unrestricted", math.inf)):
        p = _zb(xi)
        knots = (p.report.t1, p.report.w1, p.report.t2)
        worst, n = 0.0, 0
        while n < 50:
            # half the points in the switching zone, half anywhere
            t = rng.uniform(0.01, 0.6) if n % 2 else rng.uniform(0.01, 3.99)
            x = rng.uniform(0.01, 3.0)
            if min(abs(t - k) for k in knots) < 1e-3:
                continue
            worst = max(worst, abs(hjb_residual_zb(p, t, x)))
            n += 1
        zb[label] = worst
    R, X = np.meshgrid(np.linspace(-1.0, 1.0, 10), np.linspace(0.0, 3.0, 10), indexing="ij")
    gbm = {}
    for label, xi in (("small", 0.5), ("large", 2.0), ("unrestricted", math.inf)):
        p = GbmParams(m=1.0, sigma=1.0, r0=0.0, mu=1.0, xi=xi)
        gbm[label] = float(np.abs(hjb_residual_gbm(p, R, X, label)).max())
    ok = max(zb.values()) < 1e-4 and max(gbm.values()) < 1e-10
    verdict("criterion 4 (HJB residuals)", ok,
            "zero-bond " + ", ".join(f"{k} {v:.1e}" for k, v in zb.items())
            + " (tol 1e-4); GBM " + ", ".join(f"{k} {v:.1e}" for k, v in gbm.items()) + " (tol 1e-10)")


# 5 ---------------------------------------------------------------------------

def test_criterion_5_monte_carlo(verdict):
    start = time.perf_counter()
    checks = mc_suite(seed=20240601, n_paths=100_000)
    elapsed = time.perf_counter() - start
    groups = {}
    for c in checks:
        kind = c.name.split("[")[0]
        kind = "policy" if kind.endswith("policy") else kind
        groups.setdefault(kind, []).append(c)
    counts = {k: len(v) for k, v in groups.items()}
    failed = [c.name for c in checks if not c.passed]
    worst = max(c.deviation for c in checks)
    ok = not failed and all(n >= 5 for n in counts.values()) and elapsed < 120
    verdict("criterion 5 (Monte Carlo vs closed forms)", ok,
            f"{len(checks)} checks {counts}, worst {worst:.2f} SE (tol 4), "
            f"failed {failed or 'none'}; {elapsed:.1f} s (limit 120 s)")


# 6 ---------------------------------------------------------------------------

PROBLEM = ProblemOU(OU, mu=1.0, xi=2.0)
SMALL = ProblemOU(OU, mu=1.0, xi=0.8)
STATES = [(OU.b, 1.0), (0.0, 0.5), (-0.5, 1.0), (1.0, 2.0), (-1.0, 3.0)]


@pytest.fixture(scope="module")
def ou_run():
    start = time.perf_counter()
    g = SolverGrid.default(PROBLEM, 201, 201)
    vs = solve_hjb_ou(PROBLEM, g)
    coarse = solve_hjb_ou(PROBLEM, g.coarsened())
    return {"grid": g, "vs": vs, "coarse": coarse, "seconds": time.perf_counter() - start}


def test_criterion_6a_residual(verdict, ou_run):
    g, vs = ou_run["grid"], ou_run["vs"]
    interior = hjb_residual_ou(PROBLEM, vs, g)
    ok = vs.residual_norm < 1e-8 and vs.values.shape == (201, 201)
    verdict("criterion 6a (OU residual, 201x201)", ok,
            f"sup-norm {vs.residual_norm:.1e} (interior {interior:.1e}; tol 1e-8) after "
            f"{vs.iterations} policy iterations")


def test_criterion_6b_sandwich(verdict, ou_run):
    g, vs, coarse = ou_run["grid"], ou_run["vs"], ou_run["coarse"]
    R, X = np.meshgrid(vs.r, vs.x, indexing="ij")
    lower, upper = value_bounds_ou(PROBLEM, R, X)
    discrete_lower = policy_value_ou(PROBLEM, g)
    below_discrete = float(np.max(discrete_lower - vs.values))
    above_upper = float(np.max(vs.values - upper))
    # the analytic lower bound is met up to the discretization error of the candidate
    dip = float(np.max(lower - vs.values))
    Rc, Xc = np.meshgrid(coarse.r, coarse.x, indexing="ij")
    dip_coarse = float(np.max(value_bounds_ou(PROBLEM, Rc, Xc)[0] - coarse.values))
    n_dip = int(np.sum(vs.values < lower))
    ok = below_discrete <= 1e-10 and above_upper <= 0.0 and dip <= 0.7 * dip_coarse
    verdict("criterion 6b (nodewise sandwich)", ok,
            f"grid candidate <= V_h <= upper at all nodes (max excess {max(below_discrete, above_upper):.1e}); "
            f"analytic lower bound undercut at {n_dip} nodes by <= {dip:.2e}, "
            f"shrinking from {dip_coarse:.2e} on the 2h grid (first-order discretization error)")


def test_criterion_6c_regularity(verdict, ou_run):
    rep = verify_regularity(PROBLEM, ou_run["vs"], tol_factor=10.0)
    w = rep.worst
    verdict("criterion 6c (monotone and curvature, tol 10h)", rep.ok,
            f"min V_x {w['min_Vx']:.2e}, max V_xx {w['max_Vxx']:.2e}, max V_r {w['max_Vr']:.2e}, "
            f"min V_rr {w['min_Vrr']:.2e}; Lipschitz ratios r {w['max_ratio_r']:.2f}, "
            f"x {w['max_ratio_x']:.2f} (<= 1)")


def test_criterion_6d_small_cap_reduction(verdict):
    errs, rel = [], []
    for n in (51, 101, 201):
        vs = solve_hjb_ou(SMALL, SolverGrid.default(SMALL, n, 17))
        exact = np.array([analytic_value_small_xi_ou(SMALL, r) for r in vs.r])[:, None]
        errs.append(float(np.abs(vs.values - exact).max()))
        rel.append(float((np.abs(vs.values - exact) / exact).max()))
    ratios = [errs[k + 1] / errs[k] for k in range(len(errs) - 1)]
    ok = all(0.3 <= q <= 0.7 for q in ratios)
    verdict("criterion 6d (xi <= mu reduction, first order)", ok,
            "max error " + " -> ".join(f"{e:.2e}" for e in errs)
            + " (relative " + " -> ".join(f"{e:.1%}" for e in rel) + ")"
            + ", ratios " + ", ".join(f"{q:.2f}" for q in ratios) + " (expect 0.3-0.7)")


def test_criterion_6e_policy_monte_carlo(verdict, ou_run):
    vs, coarse = ou_run["vs"], ou_run["coarse"]
    start = time.perf_counter()
    ests = mc_validate_policy(PROBLEM, vs, STATES, seeds=range(600, 605), n_paths=100_000, dt=0.02)
    elapsed = time.perf_counter() - start
    ou_run["mc_seconds"] = elapsed
    parts, ok = [], True
    for (r, x), est in zip(STATES, ests):
        grid_val = vs.interpolate(r, x)
        grid_err = abs(grid_val - coarse.interpolate(r, x))
        tol = max(4 * est.std_error, 2 * grid_err)
        gap = abs(est.mean - grid_val)
        upper = value_bounds_ou(PROBLEM, r, x)[1]
        ok = ok and gap <= tol + est.tail_bound and est.mean <= upper
        parts.append(f"({r:.3g},{x:g}) gap {gap:.1e}/tol {tol:.1e}")
    verdict("criterion 6e (MC of extracted policy)", ok, "; ".join(parts))


def test_criterion_6_runtime(verdict, ou_run):
    total = ou_run["seconds"] + ou_run.get("mc_seconds", 0.0)
    verdict("criterion 6 (runtime)", total < 300, f"solve + 2h solve + MC {total:.1f} s (limit 300 s)")


# 7 ---------------------------------------------------------------------------

def test_criterion_7_alpha_beta(verdict):
    s = np.logspace(-3, 2, 100)
    alpha = alpha_curve(PROBLEM, s)
    f_err = float(np.abs(log_discount(OU, alpha, s)).max())
    b_err = float(np.abs(beta(PROBLEM, alpha) - s).max())
    ok = f_err < 1e-10 and b_err < 1e-8
    verdict("criterion 7 (alpha/beta curves)", ok,
            f"max |f(alpha(s), s)| {f_err:.1e} (tol 1e-10), max |beta(alpha(s)) - s| {b_err:.1e} (tol 1e-8)")


# 8 ---------------------------------------------------------------------------

def _snapshot(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.name != "timings.json"}


def test_criterion_8_determinism(verdict, tmp_path):
    runs = {
        "example": ["example"],
        "ou-solve": ["ou-solve", "--set", "a=1", "--set", "sigma_tilde=0.5", "--set", "b_tilde=0.6",
                     "--set", "mu=1", "--set", "xi=2", "--set", "grid.n_r=51", "--set", "grid.n_x=51"],
        "mc-check": ["mc-check", "--set", "n_paths=5000", "--seed", "7"],
        "gbm-value": ["gbm-value", "--set", "m=1", "--set", "sigma=1", "--set", "xi=2"],
    }
    mismatched = []
    for name, argv in runs.items():
        out = tmp_path / name
        snaps = []
        for _ in range(2):
            if out.exists():
                shutil.rmtree(out)
            cli_main([*argv, "--out", str(out)])
            snaps.append(_snapshot(out))
        if snaps[0] != snaps[1] or not snaps[0]:
            mismatched.append(name)
    verdict("criterion 8 (byte-identical outputs)", not mismatched,
            f"{len(runs)} commands run twice, mismatches: {mismatched or 'none'}")
