"""Command line runner for the builtin experiments.

    python -m levy_attractors list
    python -m levy_attractors describe kse-1d
    python -m levy_attractors check plaplace-1d --out out/
    python -m levy_attractors run burgers-1d --seed 3 --threads 4 --out out/
"""

import argparse
import copy
import csv
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import attractor as attr
from .conditions import GateError, certify, check_admissibility
from .flow import FlowConfig, fit_energy_bound, save_trajectory, solve_Z
from .function_space import BasisSpec, ConfigurationError, build_triple, v_norm
from .levy_noise import NoiseSpec, sample_path, save_path, trace_class_q
from .models import build_model, scaled
from .ou import (OUConfig, birkhoff_average, choose_sigma, h_power, save_section,
                 stationary_section, sublinear_growth_check, v_power)

DT = 2.0 ** -7


def _noise(modes, amplitude=1.0, decay=2.0, jump_rate=0.5, jump_size=0.5, dt=DT, horizon=(-12.0, 1.0)):
    return {"modes": modes, "decay": decay, "amplitude": amplitude, "base_dt": dt,
            "horizon": list(horizon), "jump_rate": jump_rate, "jump_size": jump_size,
            "jump_law": "gaussian", "jump_amplitude": 1.0}


def _attractor(schedule, radius=10.0, n_samples=4, cluster_tol=1e-6, invariance_time=0.5):
    return {"schedule": list(schedule), "family": {"rule": "ball", "radius": radius,
                                                  "n_samples": n_samples},
            "cluster_tol": cluster_tol, "n_deep": 1, "invariance_time": invariance_time}


BUILTINS = {
    "burgers-1d": {
        "description": "stochastic Burgers equation u_t = u_xx + u u_x + noise on (0, 1), Dirichlet",
        "reproduces": "Burgers-type and reaction-diffusion examples (one-dimensional, Dirichlet case)",
        "basis": {"dimension": 1, "length": 1.0, "boundary": "dirichlet", "mode_count": 16, "v_order": 1},
        "model": {"name": "burgers_rde", "params": {"f_lip": {"slope": 1.0}}},
        "monotone": {"name": "laplacian", "params": {"coefficient": 1.0}},
        "drift": "model",
        "noise": _noise(8),
        "ou": {"sigma": 1.0, "auto_sigma": True, "schedule": [-9.0, -10.0, -12.0], "cauchy_tol": 1e-8},
        "attractor": _attractor([-1.0, -2.0, -4.0, -8.0]),
    },
    "rde-1d": {
        "description": "reaction-diffusion u_t = u_xx + 0.5 u - |u| u + noise on (0, 1), Dirichlet",
        "reproduces": "Burgers-type and reaction-diffusion examples (reaction term, gate K < lambda/8)",
        "basis": {"dimension": 1, "length": 1.0, "boundary": "dirichlet", "mode_count": 16, "v_order": 1},
        "model": {"name": "burgers_rde",
                  "params": {"f_lip": {"slope": 0.0},
                             "f0_spec": {"linear": 0.5, "power": -1.0, "exponent": 2.0}}},
        "monotone": {"name": "laplacian", "params": {"coefficient": 1.0}},
        "drift": "model",
        "noise": _noise(8),
        "ou": {"sigma": 1.0, "auto_sigma": True, "schedule": [-9.0, -10.0, -12.0], "cauchy_tol": 1e-8},
        "attractor": _attractor([-1.0, -2.0, -4.0, -8.0]),
    },
    "nse-2d": {
        "description": "2D Navier-Stokes on the torus [0, 2 pi)^2, divergence-free Fourier basis",
        "reproduces": "two-dimensional Navier-Stokes example",
        "basis": {"dimension": 2, "length": 6.283185307179586, "boundary": "periodic", "mode_count": 8,
                  "v_order": 1, "divergence_free": True},
        "model": {"name": "nse2d", "params": {"viscosity": 1.0}},
        "monotone": {"name": "laplacian", "params": {"coefficient": 1.0}},
        "drift": "model",
        "noise": _noise(8, dt=2.0 ** -6, horizon=(-32.0, 1.0)),
        "ou": {"sigma": 1.0, "auto_sigma": True, "schedule": [-24.0, -28.0, -32.0], "cauchy_tol": 1e-6},
        "attractor": _attractor([-1.0, -2.0, -4.0, -8.0]),
    },
    "ch-1d": {
        "description": "Cahn-Hilliard type u_t = -u_xxxx + (phi(u))_xx, phi(u) = 0.5|u|u - 0.4u, Neumann, zero mean",
        "reproduces": "Cahn-Hilliard type example (gate C_phi < sqrt(lambda)/(2 C_GN^2))",
        "basis": {"dimension": 1, "length": 1.5707963267948966, "boundary": "neumann", "mode_count": 16,
                  "v_order": 2},
        "model": {"name": "cahn_hilliard",
                  "params": {"phi_spec": {"linear": -0.4, "power": 0.5, "exponent": 2.0}}},
        "monotone": {"name": "bilaplacian", "params": {"coefficient": 1.0}},
        "drift": "model",
        "noise": _noise(8),
        "ou": {"sigma": 1.0, "auto_sigma": True, "schedule": [-9.0, -10.0, -12.0], "cauchy_tol": 1e-8},
        "attractor": _attractor([-1.0, -2.0, -4.0, -8.0]),
    },
    "kse-1d": {
        "description": "Kuramoto-Sivashinsky u_t = -u_xxxx - u_xx - u u_x, period pi, zero mean",
        "reproduces": "Kuramoto-Sivashinsky example (periodic, phi(u) = -u)",
        "basis": {"dimension": 1, "length": 3.141592653589793, "boundary": "periodic", "mode_count": 16,
                  "v_order": 2},
        "model": {"name": "kuramoto_sivashinsky", "params": {"phi_spec": {"linear": -1.0}}},
        "monotone": {"name": "bilaplacian", "params": {"coefficient": 1.0}},
        "drift": "model",
        "noise": _noise(8),
        "ou": {"sigma": 1.0, "auto_sigma": True, "schedule": [-9.0, -10.0, -12.0], "cauchy_tol": 1e-8},
        "attractor": _attractor([-1.0, -2.0, -4.0, -8.0]),
    },
    "plaplace-1d": {
        "description": "p-Laplace (p = 4) du = sigma div(|u_x|^2 u_x) dt + dN on (0, 1), Dirichlet",
        "reproduces": "strongly monotone examples (p-Laplace, singleton attractor)",
        "basis": {"dimension": 1, "length": 1.0, "boundary": "dirichlet", "mode_count": 32, "v_order": 1,
                  "v_exponent": 4.0},
        "model": {"name": "p_laplace", "params": {"p": 4.0, "coefficient": 1.0}},
        "monotone": {"name": "p_laplace", "params": {"p": 4.0, "coefficient": 1.0}},
        "drift": "sigma_monotone",
        "noise": _noise(16, jump_rate=0.5, horizon=(-20.0, 1.0)),
        "ou": {"sigma": 2000.0, "auto_sigma": False, "schedule": [-17.0, -18.0, -20.0], "cauchy_tol": 1e-8},
        "attractor": _attractor([-1.0, -2.0, -4.0, -8.0, -16.0]),
    },
    "porous-1d": {
        "description": "porous media (r = 3) du = sigma (|u|^2 u)_xx dt + dN on (0, 1), H = H^-1",
        "reproduces": "strongly monotone examples (porous media, singleton attractor)",
        "basis": {"dimension": 1, "length": 1.0, "boundary": "dirichlet", "mode_count": 32, "v_order": 0,
                  "v_exponent": 4.0},
        "model": {"name": "porous_media", "params": {"r": 3.0, "coefficient": 1.0}},
        "monotone": {"name": "porous_media", "params": {"r": 3.0, "coefficient": 1.0}},
        "drift": "sigma_monotone",
        "noise": _noise(16, jump_rate=0.5, horizon=(-20.0, 1.0)),
        "ou": {"sigma": 2000.0, "auto_sigma": False, "schedule": [-17.0, -18.0, -20.0], "cauchy_tol": 1e-8},
        "attractor": _attractor([-1.0, -2.0, -4.0, -8.0, -16.0]),
    },
}

DEFAULTS = {"seed": 0, "check": {"budget": 200}, "flow": {"scheme": "imex"}}


# -- configuration -------------------------------------------------------------

def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config):
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(experiment=None, path=None, seed=None):
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        base_name = user.pop("base", None) or user.get("experiment")
        base = BUILTINS.get(base_name, {}) if base_name else {}
        cfg = _merge(_merge(DEFAULTS, base), user)
        cfg.setdefault("experiment", base_name or os.path.splitext(os.path.basename(path))[0])
    else:
        if experiment not in BUILTINS:
            raise ConfigurationError("experiment", f"unknown experiment {experiment!r}; see 'list'")
        cfg = _merge(DEFAULTS, BUILTINS[experiment])
        cfg["experiment"] = experiment
    if seed is not None:
        cfg["seed"] = int(seed)
    return cfg


class Setup:
    """Validated objects for a config; no compute beyond construction."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.spec = BasisSpec.from_dict(cfg["basis"])
        self.triple = build_triple(self.spec)
        T = self.triple
        self.monotone = build_model(cfg["monotone"]["name"], T, cfg["monotone"].get("params"))
        if self.monotone.monotone is None and not self.monotone.linear:
            raise ConfigurationError("monotone", "the OU drift must be a strongly monotone operator")
        oc = cfg["ou"]
        self.sigma = float(oc["sigma"])
        drift = cfg.get("drift", "model")
        if drift == "sigma_monotone":
            self.model = scaled(self.monotone, self.sigma, name=f"sigma*{self.monotone.name}")
        elif drift == "model":
            self.model = build_model(cfg["model"]["name"], T, cfg["model"].get("params"))
        else:
            raise ConfigurationError("drift", f"unknown drift {drift!r}")
        nc = cfg["noise"]
        if nc["modes"] > T.size:
            raise ConfigurationError("noise.modes", f"{nc['modes']} noise modes exceed the {T.size} basis modes")
        k = np.arange(1, nc["modes"] + 1, dtype=float)
        q = trace_class_q(nc["modes"], nc["modes"], nc.get("decay", 2.0), nc.get("amplitude", 1.0))
        jump_scale = tuple(nc.get("jump_size", 0.0) / k) if nc.get("jump_rate", 0.0) > 0 else None
        self.noise = NoiseSpec(q=tuple(q), base_dt=nc["base_dt"], horizon=tuple(nc["horizon"]),
                               jump_rate=nc.get("jump_rate", 0.0), jump_scale=jump_scale,
                               jump_law=nc.get("jump_law", "gaussian"),
                               jump_amplitude=nc.get("jump_amplitude", 1.0))
        self.noise.validate()
        ac = cfg["attractor"]
        for key, sched in (("attractor.schedule", ac["schedule"]), ("ou.schedule", oc["schedule"])):
            if not sched or max(sched) >= 0:
                raise ConfigurationError(key, "pullback starts must be negative times")
        deepest = min(ac["schedule"])
        if deepest < self.noise.horizon[0]:
            raise ConfigurationError("attractor.schedule", "deepest start lies before the noise horizon")
        if min(oc["schedule"]) < self.noise.horizon[0]:
            raise ConfigurationError("ou.schedule", "pullback starts must lie inside the noise horizon")
        if max(oc["schedule"]) > deepest:
            raise ConfigurationError("ou.schedule", "pullback starts must precede the attractor schedule")
        self.family = attr.TemperedFamily(**ac["family"])
        self.seed = int(cfg.get("seed", 0))

    def ou_config(self, sigma):
        oc = self.cfg["ou"]
        return OUConfig(model=self.monotone, sigma=sigma, schedule=tuple(oc["schedule"]),
                        cauchy_tol=oc["cauchy_tol"], scheme=oc.get("scheme", "auto"))

    def window(self):
        return (min(self.cfg["attractor"]["schedule"]), self.noise.horizon[1])

    def admissibility(self):
        return check_admissibility(self.model.constants, self.triple, self.model.params)


# -- pipeline ------------------------------------------------------------------

class Pipeline:
    def __init__(self, setup, threads=1):
        self.setup = setup
        self.threads = max(1, int(threads))
        self.files = {}
        self.gates = {}

    def emit(self, name, data):
        self.files[name] = data if isinstance(data, bytes) else data.encode()

    def mapper(self):
        if self.threads == 1:
            return map
        pool = ThreadPoolExecutor(max_workers=self.threads)
        self._pool = pool
        return pool.map

    def close(self):
        pool = getattr(self, "_pool", None)
        if pool is not None:
            pool.shutdown()

    def build_flow(self, path):
        S = self.setup
        window = S.window()
        oc = S.cfg["ou"]
        cache = {}

        def attempt(sigma):
            ou_cfg = S.ou_config(sigma)
            sec = stationary_section(ou_cfg, path, window)
            model = S.model if S.cfg.get("drift") != "sigma_monotone" else scaled(S.monotone, sigma)
            eb = fit_energy_bound(model, S.monotone, sigma, sec.values, seed=S.seed)
            neg = sec.times <= 1e-12
            vn = [v_norm(u, S.triple) ** model.constants.alpha for u in sec.values[neg]]
            expectation = float(np.trapezoid(vn, sec.times[neg]) / (-sec.times[0]))
            ok, bound = attr.birkhoff_gate(eb, expectation)
            cache[sigma] = (ou_cfg, sec, model, eb, expectation, bound)
            return ok and sec.converged

        if oc.get("auto_sigma", False):
            sigma = choose_sigma(attempt, oc["sigma"])
        else:
            sigma = S.sigma
            attempt(sigma)
        ou_cfg, sec, model, eb, expectation, bound = cache[sigma]
        flow = FlowConfig(model=model, monotone=S.monotone, sigma=sigma, section=sec, energy=eb,
                          scheme=S.cfg.get("flow", {}).get("scheme", "imex"))
        self.gates["ou_section_converged"] = bool(sec.converged)
        self.gates["birkhoff_gate"] = bool(expectation < bound)
        return ou_cfg, flow, {"sigma": sigma, "birkhoff_expectation": expectation,
                              "birkhoff_bound": bound}

    def run(self, stages=("ou", "attractor")):
        S = self.setup
        adm = S.admissibility()
        self.gates["admissibility"] = adm.passed
        adm.raise_if_failed()
        cfg = S.cfg
        summary = {"experiment": cfg["experiment"], "config_hash": config_hash(cfg), "seed": S.seed,
                   "model": S.model.name, "constants": S.model.constants.to_dict(),
                   "admissibility": adm.lines()}
        self.emit("config.json", json.dumps(cfg, sort_keys=True, indent=2) + "\n")
        path = sample_path(S.noise, S.seed)
        buf = io.BytesIO()
        save_path(path, buf)
        self.emit("noise_path.bin", buf.getvalue())
        ou_cfg, flow, info = self.build_flow(path)
        summary.update(info)
        summary["energy_bound"] = flow.energy.to_dict()
        sec = flow.section
        buf = io.BytesIO()
        save_section(sec, buf)
        self.emit("section.bin", buf.getvalue())
        if "ou" in stages:
            summary.update(self.ou_reports(sec, flow))
        if "attractor" in stages:
            summary.update(self.attractor_reports(path, flow))
        summary["gates"] = dict(self.gates)
        summary["passed"] = all(self.gates.values())
        summary = plain(summary)
        self.emit("summary.txt", format_summary(summary))
        return summary

    def ou_reports(self, sec, flow):
        S = self.setup
        neg = sec.times <= 1e-12
        from .ou import StationarySection
        past = StationarySection(sec.times[neg], sec.values[neg], sec.gap, sec.depth, sec.converged,
                                 sec.gaps, sec.dt, sec.sigma, sec.meta)
        alpha = S.monotone.constants.alpha
        bv = birkhoff_average(past, v_power(S.triple, alpha))
        bh = birkhoff_average(past, h_power(2))
        growth = sublinear_growth_check(past)
        rows = io.StringIO()
        w = csv.writer(rows, lineterminator="\n")
        w.writerow(["window", "avg_V_alpha", "avg_H2"])
        for a, b, c in zip(bv.window_lengths, bv.averages, bh.averages):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(c))])
        self.emit("birkhoff.csv", rows.getvalue())
        return {"ou": {"depth": sec.depth, "gap": sec.gap, "gaps": sec.gaps,
                       "birkhoff_V_alpha": bv.final, "birkhoff_H2": bh.final,
                       "sublinear_growth": growth.passed}}

    def attractor_reports(self, path, flow):
        S = self.setup
        ac = S.cfg["attractor"]
        schedule = sorted(ac["schedule"], reverse=True)
        radius = attr.absorption_radius(flow)
        absorb = check_absorption_parallel(flow, path, S.family, schedule, radius.R, S.seed, self.mapper())
        est = attr.estimate_attractor(flow, path, [S.family], schedule, ac["cluster_tol"], S.seed,
                                      ac.get("n_deep", 1), mapper=self.mapper())
        t_inv = ac.get("invariance_time", 0.0)
        inv = None
        if t_inv and t_inv <= path.t_max:
            inv = attr.invariance_check(flow, path, est, t_inv, [S.family],
                                        [s for s in schedule if s + t_inv >= flow.section.times[0]],
                                        ac["cluster_tol"], S.seed, ac.get("n_deep", 1))
            est.invariance_defect = inv
        deep_traj = solve_Z(flow, path, schedule[-1], 0.0, S.family.sample(
            schedule[-1], S.triple.size, np.random.default_rng([S.seed, 99]))[0] - flow.u(schedule[-1]))
        buf = io.BytesIO()
        save_trajectory(deep_traj, buf)
        self.emit("trajectory.bin", buf.getvalue())
        rows = io.StringIO()
        w = csv.writer(rows, lineterminator="\n")
        w.writerow(["family", "s", "semidistance", "max_sq_norm"])
        for fi, curve in est.curve.items():
            for s, d, m in zip(est.schedule, curve, absorb.max_sq_norms):
                w.writerow([fi, repr(s), repr(d), repr(m)])
        self.emit("decay_curve.csv", rows.getvalue())
        rows = io.StringIO()
        w = csv.writer(rows, lineterminator="\n")
        w.writerow(["time"] + [f"c{k}" for k in range(S.triple.size)])
        for p in est.points:
            w.writerow(["0.0"] + [repr(float(v)) for v in p])
        self.emit("attractor_cloud.csv", rows.getvalue())
        self.gates["absorption"] = absorb.passed
        self.gates["attractor_converged"] = est.converged
        self.gates["energy_inequality"] = deep_traj.energy_violations == 0
        return {"absorption": radius.to_dict(),
                "absorption_check": {"s0_observed": absorb.s0_observed,
                                     "violations": len(absorb.violations)},
                "attractor": est.to_summary()}


def check_absorption_parallel(flow, path, family, schedule, R, seed, mapper):
    reports = list(mapper(lambda s: attr.check_absorption(flow, path, family, [s], R, seed), schedule))
    maxes = [r.max_sq_norms[0] for r in reports]
    violations = [v for r in reports for v in r.violations]
    s0 = None
    for k in range(len(schedule) - 1, -1, -1):
        if maxes[k] > R:
            break
        s0 = schedule[k]
    return attr.AbsorptionReport(list(schedule), maxes, R, s0, violations)


def plain(v):
    """numpy scalars and arrays to builtin types, recursively."""
    if isinstance(v, dict):
        return {str(k): plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return plain(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return json.dumps(v, sort_keys=True, default=str)


def format_summary(summary, prefix=""):
    lines = []
    for k in sorted(summary):
        v = summary[k]
        if isinstance(v, dict):
            lines.append(f"{prefix}{k}:")
            lines.append(format_summary(v, prefix + "  ").rstrip("\n"))
        else:
            lines.append(f"{prefix}{k}: {_fmt(v)}")
    return "\n".join(lines) + "\n"


def write_outputs(files, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    manifest = {}
    for name in sorted(files):
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(files[name])
        manifest[name] = hashlib.sha256(files[name]).hexdigest()
    blob = json.dumps({"files": manifest}, sort_keys=True, indent=2) + "\n"
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        fh.write(blob)
    return manifest


# -- subcommands ---------------------------------------------------------------

def cmd_list(args, out):
    for name in sorted(BUILTINS):
        out.write(f"{name}\t{BUILTINS[name]['description']}\n")
    return 0


def cmd_describe(args, out):
    cfg = load_config(args.name or args.experiment, args.config, args.seed)
    name = cfg["experiment"]
    out.write(f"experiment: {name}\n")
    info = BUILTINS.get(name, {})
    if info:
        out.write(f"description: {info['description']}\n")
        out.write(f"reproduces: {info['reproduces']}\n")
    out.write(f"config_hash: {config_hash(cfg)}\n")
    out.write(json.dumps(cfg, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_check(args, out):
    cfg = load_config(args.name or args.experiment, args.config, args.seed)
    setup = Setup(cfg)
    budget = int(cfg.get("check", {}).get("budget", 200))
    report = certify(setup.model, budget=budget, seed=setup.seed)
    adm = setup.admissibility()
    text = report.to_text() + "".join(f"gate: {line}\n" for line in adm.lines())
    passed = report.passed and adm.passed
    text += f"check: {'PASS' if passed else 'FAIL'}\n"
    out.write(text)
    if args.out:
        write_outputs({"conditions.txt": text.encode(), "margins.csv": report.to_csv().encode(),
                       "config.json": (json.dumps(cfg, sort_keys=True, indent=2) + "\n").encode()},
                      args.out)
    return 0 if passed else 1


def _run_stages(args, out, stages):
    cfg = load_config(args.name or args.experiment, args.config, args.seed)
    setup = Setup(cfg)
    pipe = Pipeline(setup, threads=args.threads)
    try:
        summary = pipe.run(stages)
        code = 0 if summary["passed"] else 1
    except GateError as exc:
        pipe.emit("summary.txt", f"refused: {exc}\n")
        out.write(f"refused: {exc}\n")
        code = 2
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        # compute failure: keep what was produced so far
        pipe.emit("summary.txt", f"failed: {type(exc).__name__}: {exc}\n")
        out.write(f"failed: {exc}\n")
        code = 3
    finally:
        pipe.close()
    if args.out:
        write_outputs(pipe.files, args.out)
    if code in (0, 1):
        out.write(pipe.files["summary.txt"].decode())
    return code


def cmd_ou(args, out):
    return _run_stages(args, out, ("ou",))


def cmd_run(args, out):
    return _run_stages(args, out, ("ou", "attractor"))


def cmd_attractor(args, out):
    return _run_stages(args, out, ("attractor",))


COMMANDS = {"list": cmd_list, "describe": cmd_describe, "check": cmd_check, "ou": cmd_ou,
            "run": cmd_run, "attractor": cmd_attractor}


def build_parser():
    p = argparse.ArgumentParser(prog="levy_attractors", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name != "list":
            sp.add_argument("name", nargs="?", help="builtin experiment name")
            sp.add_argument("--experiment", help="builtin experiment name")
            sp.add_argument("--config", help="JSON config file (may set 'base' to a builtin)")
            sp.add_argument("--seed", type=int)
            sp.add_argument("--out", help="output directory")
            sp.add_argument("--threads", type=int, default=1)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    if args.command != "list" and not (args.name or args.experiment or args.config):
        out.write("error: give an experiment name, --experiment or --config\n")
        return 2
    try:
        return COMMANDS[args.command](args, out)
    except ConfigurationError as exc:
        out.write(f"invalid configuration: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
