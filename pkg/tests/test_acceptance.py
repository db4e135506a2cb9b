"""Acceptance criteria, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line (also collected in the
terminal summary) before asserting.
"""
import dataclasses
import io
import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conftest import ACCEPTANCE_LINES, make_triple
from levy_attractors import attractor as attr
from levy_attractors import cli
from levy_attractors.conditions import GateError, check_strong_monotonicity
from levy_attractors.flow import FlowConfig, cocycle_check, flow_property_check, solve_Z
from levy_attractors.levy_noise import NoiseSpec, refine, sample_path, trace_class_q
from levy_attractors.models import (bilaplacian, burgers_rde, ladyzhenskaya_pc, laplacian,
                                    p_laplace, porous_media, power_law_constants)
from levy_attractors.ou import (OUConfig, birkhoff_average, contraction_bound, h_power,
                                pullback_solve, stationary_section)


def report(n, ok, detail, elapsed=None):
    t = f" [{elapsed:.1f}s]" if elapsed is not None else ""
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}{t}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def builtin_flow(name):
    setup = cli.Setup(cli.load_config(name))
    pipe = cli.Pipeline(setup)
    path = sample_path(setup.noise, setup.seed)
    ou_cfg, flow, info = pipe.build_flow(path)
    return setup, path, ou_cfg, flow


# -- 1 -------------------------------------------------------------------------

GOLDEN = (3 + math.sqrt(5)) / 2


def test_criterion_1_closed_form_constants():
    t0 = time.perf_counter()
    pc = {d: ladyzhenskaya_pc(d) for d in range(2, 7)}
    theta, beta, admissible = power_law_constants(2, 2)
    checks = {
        "pc(6) in [2.36, 2.37]": 2.36 <= pc[6] <= 2.37,
        "pc(6) closed form": abs(pc[6] - (1.5 + math.sqrt(3) / 2)) <= 1e-12,
        "pc(d) < 2.618, d=3..6": all(pc[d] < 2.618 for d in range(3, 7)),
        "pc(d) < 2.618, d=2": pc[2] < 2.618,
        "theta(2,2) = 1/2": Fraction(theta) == Fraction(1, 2),
        "beta(2,2) = 2": Fraction(beta) == 2,
        "beta(alpha-1) = 2 admissible": Fraction(beta) * (2 - 1) == 2 and admissible,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = (f"pc(6)={pc[6]!r} pc(2)={pc[2]!r}; " +
              ("all sub-checks hold" if not failed else
               "failed: " + ", ".join(failed) + " (pc(2) = (3+sqrt 5)/2 = 2.6180339..., the bound 2.618 is "
               "a rounding of that value)"))
    report(1, not failed, detail, time.perf_counter() - t0)
    # attainable sub-checks are hard; the d=2 one is tracked by the xfail below
    assert all(v for k, v in checks.items() if k != "pc(d) < 2.618, d=2")
    assert pc[2] == pytest.approx(GOLDEN, abs=1e-15)


@pytest.mark.xfail(strict=True, reason="pc(2) = (3+sqrt 5)/2 = 2.6180339887 exceeds the stated 2.618; "
                   "the strict bound is a rounding of the golden ratio squared")
def test_criterion_1_d2_strict_bound():
    assert ladyzhenskaya_pc(2) < 2.618


# -- 2 -------------------------------------------------------------------------

def test_criterion_2_strong_monotonicity_certification():
    t0 = time.perf_counter()
    ops = {
        "laplacian": laplacian(make_triple(n=64)),
        "bilaplacian": bilaplacian(make_triple(n=64, v_order=2)),
        "p_laplace(4)": p_laplace(make_triple(n=64, v_exponent=4.0), 4.0),
        "porous(3)": porous_media(make_triple(n=64, v_order=0, v_exponent=4.0), 3.0),
    }
    worst = {}
    ok = True
    for name, M in ops.items():
        e = check_strong_monotonicity(M, 10_000, seed=7)
        worst[name] = float(np.max(e.margins))
        ok &= e.passed and len(e.margins) == 10_000
    detail = "max relative margin " + ", ".join(f"{k}={v:.2e}" for k, v in worst.items()) + \
             " (<= 1e-12 rounding allowance)"
    report(2, ok, detail, time.perf_counter() - t0)
    assert ok


# -- 3 -------------------------------------------------------------------------

def test_criterion_3_ou_closed_form():
    t0 = time.perf_counter()
    T = make_triple(n=16)
    M = laplacian(T)
    q = trace_class_q(16, 16)
    target = q / (2 * T.weights)
    spec = NoiseSpec(q=tuple(q), base_dt=2.0 ** -7, horizon=(-4.0, 0.0))
    draws = np.array([pullback_solve(M, 1.0, sample_path(spec, seed), -4.0, 0.0, np.zeros(16))
                      for seed in range(200)])
    var = (draws ** 2).mean(axis=0)  # mean is known to be zero
    se = target * math.sqrt(2 / 200)
    zs = (var - target) / se
    long = NoiseSpec(q=tuple(q), base_dt=2.0 ** -6, horizon=(-4104.0, 0.0))
    sec = stationary_section(OUConfig(model=M, sigma=1.0, schedule=(-4100.0, -4104.0), cauchy_tol=1e-8),
                             sample_path(long, 11), (-4096.0, 0.0))
    avg = birkhoff_average(sec, h_power(2)).final
    rel = abs(avg - target.sum()) / target.sum()
    ok = bool(np.all(np.abs(zs) <= 3) and rel < 0.05)
    report(3, ok, f"max |z| over 16 modes = {np.abs(zs).max():.2f} (<= 3); "
                  f"Birkhoff |u|_H^2 rel error = {rel:.4f} (< 0.05)", time.perf_counter() - t0)
    assert ok


# -- 4 -------------------------------------------------------------------------

def test_criterion_4_pullback_contraction():
    t0 = time.perf_counter()
    T = make_triple(n=32, v_exponent=4.0)
    M = p_laplace(T, 4.0)
    c_est = check_strong_monotonicity(M, 1000, seed=0).estimates["c_mono_est"]
    sigma, lam = 1.0, T.embedding_constant
    k = np.arange(1, 17)
    spec = NoiseSpec(q=tuple(trace_class_q(16, 16)), base_dt=2.0 ** -8, horizon=(-8.0, 0.0),
                     jump_rate=0.5, jump_scale=tuple(0.5 / k))
    p = sample_path(spec, 0)
    rng = np.random.default_rng(4)
    decay = 1.0 / np.arange(1, 33)
    worst = {e: 0.0 for e in (1, 2, 4, 8)}
    for i in range(50):
        x, y = rng.standard_normal(32) * decay, rng.standard_normal(32) * decay
        x *= rng.uniform(0, 10) / np.linalg.norm(x)
        y *= rng.uniform(0, 10) / np.linalg.norm(y)
        if i % 5 == 0:
            x *= 10 / np.linalg.norm(x)
            y = -x
        for e in worst:
            d = pullback_solve(M, sigma, p, -e, 0.0, x) - pullback_solve(M, sigma, p, -e, 0.0, y)
            worst[e] = max(worst[e], float(d @ d) / contraction_bound(4.0, c_est, sigma, lam, e))
    ok = all(v <= 1.0 for v in worst.values())
    report(4, ok, f"c_est={c_est:.6f}; max |dX|^2/bound per elapsed " +
           ", ".join(f"{e}:{v:.2e}" for e, v in worst.items()) + " (<= 1)", time.perf_counter() - t0)
    assert ok


# -- 5 -------------------------------------------------------------------------

def test_criterion_5_flow_and_cocycle():
    t0 = time.perf_counter()
    setup, path, ou_cfg, flow = builtin_flow("burgers-1d")
    rng = np.random.default_rng(5)
    lo, hi = round(-4.0 / path.dt), round(1.0 / path.dt)
    defects = []
    for _ in range(100):
        s, r, t = np.sort(rng.integers(lo, hi + 1, size=3)) * path.dt
        x = rng.standard_normal(setup.triple.size) / np.arange(1, setup.triple.size + 1)
        defects.append(flow_property_check(flow, path, s, r, t, x))
    flow_ok = max(defects) == 0.0
    coc = {}
    for name in ("burgers-1d", "kse-1d"):
        setup, path, ou_cfg, flow = builtin_flow(name) if name != "burgers-1d" else (setup, path, ou_cfg, flow)
        tol = setup.cfg["ou"]["cauchy_tol"]
        worst = 0.0
        # shifted path keeps two schedule starts inside its horizon only for s >= -2
        for s, t in ((-2.0, 0.5), (-1.0, 1.0), (-1.5, -0.25)):
            x = rng.standard_normal(setup.triple.size) / np.arange(1, setup.triple.size + 1)
            worst = max(worst, cocycle_check(flow, path, s, t, x, ou_config=ou_cfg))
        coc[name] = (worst, 2 * tol)
    ok = flow_ok and all(w <= b for w, b in coc.values())
    report(5, ok, f"flow-property max defect {max(defects)!r} over 100 triples (== 0); cocycle " +
           ", ".join(f"{k}={w:.2e} (<= {b:.0e})" for k, (w, b) in coc.items()), time.perf_counter() - t0)
    assert ok


# -- 6 -------------------------------------------------------------------------

def ode_oracle(p0, x, fine_levels=6):
    """DOP853 on the 2-mode Burgers system with the noise interpolated linearly."""
    xg, wg = np.polynomial.legendre.leggauss(40)
    xg, wg = (xg + 1) / 2, wg / 2
    k = np.arange(1, 3) * np.pi
    phi = math.sqrt(2) * np.sin(np.outer(xg, k))
    dphi = math.sqrt(2) * np.cos(np.outer(xg, k)) * k

    def rhs(c):
        return -k ** 2 * c + phi.T @ (wg * (phi @ c) * (dphi @ c))

    fine = p0
    for _ in range(fine_levels):
        fine = refine(fine)
    n = round(1 / fine.dt)
    vals = np.array([fine.value(j * fine.dt) for j in range(n + 1)])
    y, out = x.copy(), [x.copy()]
    for j in range(n):
        a, slope = vals[j], (vals[j + 1] - vals[j]) / fine.dt
        tj = j * fine.dt
        sol = solve_ivp(lambda t, v: rhs(v + a + slope * (t - tj)), (tj, tj + fine.dt), y,
                        method="DOP853", rtol=1e-12, atol=1e-14)
        y = sol.y[:, -1]
        out.append(y + vals[j + 1])
    return np.array(out)[::2 ** fine_levels]


def test_criterion_6_oracle_equivalence():
    t0 = time.perf_counter()
    T = make_triple(n=2)
    A, M = burgers_rde(T, {"slope": 1.0}), laplacian(T)
    p = sample_path(NoiseSpec(q=(0.1, 0.1), base_dt=2.0 ** -6, horizon=(-8.0, 1.0)), 5)
    x = np.array([3.0, -2.0])
    ref = ode_oracle(p, x)
    errs = []
    for level in range(4):
        sec = stationary_section(OUConfig(model=M, sigma=1.0, schedule=(-4.0, -8.0), cauchy_tol=1e-6),
                                 p, (0.0, 1.0))
        tr = solve_Z(FlowConfig(model=A, monotone=M, sigma=1.0, section=sec), p, 0.0, 1.0, x - sec.at(0.0))
        S = (tr.values + sec.values)[::2 ** level]
        errs.append(float(np.sqrt(np.sum((S - ref) ** 2, axis=1)).max()))
        p = refine(p)
    ratios = [errs[i] / errs[i + 1] for i in range(3)]
    ok = all(1.7 <= r <= 2.3 for r in ratios)
    report(6, ok, "sup-t H errors " + ", ".join(f"{e:.4f}" for e in errs) +
           "; ratios " + ", ".join(f"{r:.3f}" for r in ratios) + " (in [1.7, 2.3])", time.perf_counter() - t0)
    assert ok


# -- 7 -------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["burgers-1d", "ch-1d", "kse-1d", "plaplace-1d"])
def test_criterion_7_absorption(name):
    t0 = time.perf_counter()
    setup, path, ou_cfg, flow = builtin_flow(name)
    ac = setup.cfg["attractor"]
    schedule = sorted(ac["schedule"], reverse=True)
    family = attr.TemperedFamily("ball", 10.0, n_samples=ac["family"]["n_samples"])
    radius = attr.absorption_radius(flow)
    rep = attr.check_absorption(flow, path, family, schedule, radius.R, setup.seed)
    beyond = [i for i, s in enumerate(schedule) if s <= radius.s0]
    absorbed = bool(beyond) and all(rep.max_sq_norms[i] <= radius.R for i in beyond)
    est = attr.estimate_attractor(flow, path, [family], schedule, ac["cluster_tol"], setup.seed)
    curve = np.array(est.curve[0])[beyond]
    band = ac["cluster_tol"]
    monotone = bool(np.all(np.diff(curve) <= band))
    ok = absorbed and monotone
    report(f"7 [{name}]", ok, f"R={radius.R:.4g} s0={radius.s0}; max |Z|^2 beyond s0 = "
           f"{max(rep.max_sq_norms[i] for i in beyond) if beyond else float('nan'):.3e}; "
           f"curve increments max {np.diff(curve).max() if len(curve) > 1 else 0.0:.2e} (<= {band:.0e})",
           time.perf_counter() - t0)
    assert ok


# -- 8 -------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["plaplace-1d", "porous-1d"])
def test_criterion_8_singleton_attractor(name):
    t0 = time.perf_counter()
    setup, path, ou_cfg, flow = builtin_flow(name)
    M, T = setup.monotone, setup.triple
    alpha = M.constants.alpha
    c_est = check_strong_monotonicity(M, 1000, seed=0).estimates["c_mono_est"]
    ac = setup.cfg["attractor"]
    schedule = sorted(ac["schedule"], reverse=True)
    bounds = [contraction_bound(alpha, c_est, flow.sigma, T.embedding_constant, -s) for s in schedule]
    k = next(i for i, b in enumerate(bounds) if b < 1e-6)
    sched = schedule[:k + 1]
    fams = [attr.TemperedFamily(**ac["family"])]
    est = attr.estimate_attractor(flow, path, fams, sched, ac["cluster_tol"], setup.seed)
    S = attr.estimate_attractor_S(flow, path, fams, sched, ac["cluster_tol"], setup.seed)
    conj = attr.hausdorff_distance(S, est.points_z + est.u0)
    ok = est.raw_diameter < 1e-6 and est.n_clusters == 1 and conj <= ac["cluster_tol"]
    report(f"8 [{name}]", ok, f"depth {sched[-1]} (bound {bounds[k]:.2e}); diameter {est.raw_diameter:.2e} "
           f"(< 1e-6); conjugation distance {conj:.2e} (<= {ac['cluster_tol']:.0e})", time.perf_counter() - t0)
    assert ok


# -- 9 -------------------------------------------------------------------------

def refusal(setup):
    try:
        cli.Pipeline(setup).run(("attractor",))
    except GateError as exc:
        return str(exc)
    return None


def test_criterion_9_gate_enforcement():
    t0 = time.perf_counter()
    msgs = {}
    for factor in (1.0, 4.0):
        setup = cli.Setup(cli.load_config("burgers-1d"))
        k = setup.model.constants
        lam = setup.triple.embedding_constant
        setup.model = dataclasses.replace(setup.model, constants=dataclasses.replace(k, K=factor * k.gamma * lam / 4))
        msgs[f"K={factor}*gamma*lambda/4"] = (refusal(setup), "dissipativity K < gamma*lambda/4")
    cfg = cli.load_config("ch-1d")
    T = cli.Setup(cfg).triple
    bound = math.sqrt(T.embedding_constant) / 2
    cfg["model"]["params"] = {"phi_spec": {"linear": -bound}, "c_gn": 1.0}
    msgs["CH C_phi at boundary"] = (refusal(cli.Setup(cfg)), "C_phi < sqrt(lambda)/(2 C_GN^2)")
    ok = all(m is not None and gate in m for m, gate in msgs.values())
    report(9, ok, "; ".join(f"{k}: {'refused naming ' + repr(g) if m and g in m else 'NOT refused'}"
                            for k, (m, g) in msgs.items()), time.perf_counter() - t0)
    assert ok


# -- 10 ------------------------------------------------------------------------

def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()
    same = {}
    for name in sorted(cli.BUILTINS):
        mans = []
        for threads in (1, 8):
            out = tmp_path / f"{name}-{threads}"
            code = cli.main(["run", name, "--out", str(out), "--threads", str(threads)], out=io.StringIO())
            mans.append((code, (out / "manifest.json").read_bytes()))
        same[name] = mans[0] == mans[1]
    ok = all(same.values())
    report(10, ok, "manifests identical at 1 and 8 threads: " +
           ", ".join(f"{k}={'yes' if v else 'NO'}" for k, v in same.items()), time.perf_counter() - t0)
    assert ok
