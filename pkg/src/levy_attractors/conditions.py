"""Falsification-based checks of the structural hypotheses on a drift.

Nothing here proves an inequality.  Each check samples random Galerkin fields
over several spectral decay rates and a geometric amplitude ladder, records the
worst margin together with the witness that produced it, and fits the smallest
constant consistent with the samples.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .function_space import norms, dual_norm, v_norm, ConfigurationError

DECAYS = (0.5, 1.0, 2.0)
AMPLITUDES = tuple(2.0 ** k for k in range(-3, 7))
ROUNDING = 1e-12


@dataclass
class ConditionEntry:
    name: str
    n_samples: int
    worst_margin: float
    witness: dict
    passed: bool
    estimates: dict = field(default_factory=dict)
    margins: np.ndarray | None = None
    details: dict = field(default_factory=dict)

    def summary(self):
        est = ", ".join(f"{k}={v:.6g}" for k, v in sorted(self.estimates.items()))
        return (f"{self.name}: {'PASS' if self.passed else 'FAIL'} n={self.n_samples} "
                f"worst_margin={self.worst_margin:.6g}" + (f" [{est}]" if est else ""))


@dataclass
class ConditionReport:
    model: str
    seed: int
    budget: int
    entries: list
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def estimates(self):
        out = {}
        for e in self.entries:
            for k, v in e.estimates.items():
                out[f"{e.name}.{k}"] = v
        return out

    def to_text(self):
        lines = [f"model: {self.model}", f"seed: {self.seed}", f"budget: {self.budget}",
                 f"overall: {'PASS' if self.passed else 'FAIL'}"]
        for e in self.entries:
            lines.append(f"[{e.name}]")
            lines.append(f"  passed: {e.passed}")
            lines.append(f"  n_samples: {e.n_samples}")
            lines.append(f"  worst_margin: {e.worst_margin!r}")
            for k, v in sorted(e.estimates.items()):
                lines.append(f"  estimate.{k}: {v!r}")
            for k, v in sorted(e.details.items()):
                lines.append(f"  {k}: {v!r}")
            for k, v in sorted(e.witness.items()):
                lines.append(f"  witness.{k}: {np.array2string(np.asarray(v), precision=17, max_line_width=10**6)}")
        for n in self.notes:
            lines.append(f"note: {n}")
        return "\n".join(lines) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["condition", "sample", "margin"])
        for e in self.entries:
            if e.margins is None:
                continue
            for i, m in enumerate(e.margins):
                w.writerow([e.name, i, repr(float(m))])
        return buf.getvalue()


# -- sampling ------------------------------------------------------------------

def _rng(seed, tag):
    return np.random.default_rng([int(seed), int(tag)])


def sample_fields(triple, rng, n):
    """n fields sweeping the decay exponents and the amplitude ladder."""
    out = np.empty((n, triple.size))
    for i in range(n):
        decay = DECAYS[i % len(DECAYS)]
        amp = AMPLITUDES[(i // len(DECAYS)) % len(AMPLITUDES)]
        c = triple.random_coefficients(rng, decay)
        c *= amp / max(np.linalg.norm(c), 1e-300)
        out[i] = c
    return out


def sample_pairs(triple, rng, n):
    """Independent, antithetic (v2 = -s v1) and near-diagonal pairs."""
    a = sample_fields(triple, rng, n)
    b = sample_fields(triple, rng, n)
    kind = np.arange(n) % 4
    s = rng.uniform(0.5, 1.5, size=n)
    b[kind == 1] = -a[kind == 1] * s[kind == 1, None]
    near = kind == 2
    b[near] = a[near] + 1e-3 * b[near]
    return a, b


def _witness(**arrays):
    return {k: np.asarray(v).copy() for k, v in arrays.items()}


def _entry(name, margins, witnesses, passed, estimates=None, details=None, scale=None):
    margins = np.asarray(margins, dtype=float)
    i = int(np.argmax(margins)) if margins.size else 0
    return ConditionEntry(name=name, n_samples=int(margins.size),
                          worst_margin=float(margins[i]) if margins.size else float("-inf"),
                          witness=witnesses(i) if margins.size else {}, passed=bool(passed),
                          estimates=estimates or {}, margins=margins, details=details or {})


# -- conditions ----------------------------------------------------------------

def check_local_monotonicity(model, budget, seed, constant=None):
    """2<A(v1)-A(v2), v1-v2> <= (C + eta(v1) + rho(v2)) |v1-v2|_H^2."""
    T = model.triple
    C = model.constants.C if constant is None else constant
    a, b = sample_pairs(T, _rng(seed, 1), budget)
    margins = np.empty(budget)
    ratio = np.empty(budget)
    for i in range(budget):
        d = a[i] - b[i]
        lhs = 2 * np.dot(model.apply(a[i]) - model.apply(b[i]), d)
        h2 = np.dot(d, d)
        loc = model.eta(a[i]) + model.rho(b[i])
        margins[i] = (lhs - (C + loc) * h2) / (abs(lhs) + (C + loc) * h2 + 1e-300)
        ratio[i] = lhs / h2 - loc if h2 > 0 else -np.inf
    c_est = max(0.0, float(ratio.max()))
    return _entry("local_monotonicity", margins,
                  lambda i: _witness(v1=a[i], v2=b[i]),
                  passed=margins.max() <= ROUNDING,
                  estimates={"C_est": c_est}, details={"C_used": C})


def check_strong_monotonicity(monotone, budget, seed, c_mono=None):
    """2<M(v1)-M(v2), v1-v2> <= -c |v1-v2|_V^alpha, margin relative to the two sides."""
    T = monotone.triple
    alpha = monotone.constants.alpha
    c = monotone.constants.c_mono if c_mono is None else c_mono
    a, b = sample_pairs(T, _rng(seed, 2), budget)
    margins = np.empty(budget)
    ratio = np.empty(budget)
    for i in range(budget):
        d = a[i] - b[i]
        lhs = 2 * np.dot(monotone.apply(a[i]) - monotone.apply(b[i]), d)
        vn = v_norm(d, T) ** alpha
        margins[i] = (lhs + c * vn) / (abs(lhs) + c * vn + 1e-300)
        ratio[i] = -lhs / vn if vn > 0 else np.inf
    return _entry("strong_monotonicity", margins,
                  lambda i: _witness(v1=a[i], v2=b[i]),
                  passed=margins.max() <= ROUNDING,
                  estimates={"c_mono_est": float(ratio.min())}, details={"c_mono_used": c,
                                                                        "alpha": alpha})


def check_coercivity(model, budget, seed):
    """2<A(v), v> <= -gamma |v|_V^alpha + K |v|_H^2 + C, plus (A2') for the monotone part."""
    T, k = model.triple, model.constants
    vs = sample_fields(T, _rng(seed, 3), budget)
    margins = np.empty(budget)
    k_ratio = np.empty(budget)
    for i in range(budget):
        v = vs[i]
        lhs = 2 * np.dot(model.apply(v), v)
        h2 = np.dot(v, v)
        vn = v_norm(v, T) ** k.alpha
        rhs = -k.gamma * vn + k.K * h2 + k.C
        margins[i] = (lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-300)
        k_ratio[i] = (lhs + k.gamma * vn - k.C) / h2
    entry = _entry("coercivity", margins, lambda i: _witness(v=vs[i]),
                   passed=margins.max() <= ROUNDING,
                   estimates={"K_est": max(0.0, float(k_ratio.max()))},
                   details={"gamma": k.gamma, "K": k.K, "C": k.C, "alpha": k.alpha})
    if model.monotone is not None:
        entry.details["strong_monotonicity"] = check_strong_monotonicity(
            model.monotone, max(budget // 2, 1), seed).summary()
    return entry


def _ladder_pass(ratios, levels):
    """Growth exponents are consistent if the fitted ratio does not climb with amplitude."""
    levels = np.asarray(levels)
    top = ratios[levels >= len(AMPLITUDES) - 2]
    rest = ratios[levels < len(AMPLITUDES) - 2]
    if top.size == 0 or rest.size == 0:
        return True
    return bool(np.all(np.isfinite(ratios)) and top.max() <= 2.0 * rest.max() + 1e-300)


def _levels(n):
    return (np.arange(n) // len(DECAYS)) % len(AMPLITUDES)


def check_growth(model, budget, seed):
    """|A(v)|_{V*}^{alpha/(alpha-1)} <= C (1 + |v|_V^alpha)(1 + |v|_H^beta)."""
    T, k = model.triple, model.constants
    vs = sample_fields(T, _rng(seed, 4), budget)
    ratios = np.empty(budget)
    for i in range(budget):
        h, vn, _ = norms(vs[i], T)
        lhs = dual_norm(model.apply(vs[i]), T) ** (k.alpha / (k.alpha - 1))
        ratios[i] = lhs / ((1 + vn ** k.alpha) * (1 + h ** k.beta))
    c_est = float(ratios.max())
    margins = ratios - c_est
    return _entry("growth", margins, lambda i: _witness(v=vs[i]),
                  passed=_ladder_pass(ratios, _levels(budget)),
                  estimates={"C_est": c_est}, details={"alpha": k.alpha, "beta": k.beta})


def check_eta_rho(model, budget, seed):
    """Growth bound on eta + rho and subadditivity of each functional."""
    T, k = model.triple, model.constants
    rng = _rng(seed, 5)
    vs = sample_fields(T, rng, budget)
    a, b = sample_pairs(T, rng, budget)
    ratios = np.empty(budget)
    sub = np.zeros(budget)
    for i in range(budget):
        h, vn, _ = norms(vs[i], T)
        ratios[i] = (model.eta(vs[i]) + model.rho(vs[i])) / ((1 + vn ** k.alpha) * (1 + h ** k.kappa))
        for fn in (model.eta, model.rho):
            top = fn(a[i] + b[i])
            bot = fn(a[i]) + fn(b[i])
            if bot > 0:
                sub[i] = max(sub[i], top / bot)
            elif top > 0:
                sub[i] = np.inf
    c_est = float(ratios.max())
    return _entry("eta_rho", ratios - c_est, lambda i: _witness(v=vs[i]),
                  passed=_ladder_pass(ratios, _levels(budget)) and np.all(np.isfinite(sub)),
                  estimates={"C_est": c_est, "C_subadditive": float(sub.max())},
                  details={"kappa": k.kappa})


def check_hemicontinuity(model, budget, seed, refinements=4):
    """s -> <A(v1 + s v2), v> sampled on refining grids: jumps must shrink."""
    T = model.triple
    rng = _rng(seed, 6)
    n = max(1, min(budget, 20))
    worst = []
    for _ in range(n):
        v1, v2, v = sample_fields(T, rng, 3)
        jumps = []
        for r in range(refinements):
            s = np.linspace(-1, 1, 2 ** (r + 3) + 1)
            f = np.array([np.dot(model.apply(v1 + si * v2), v) for si in s])
            jumps.append(np.abs(np.diff(f)).max())
        worst.append(max(jumps[i + 1] / max(jumps[i], 1e-300) for i in range(refinements - 1)))
    worst = np.asarray(worst)
    return _entry("hemicontinuity", worst - 0.75, lambda i: {}, passed=worst.max() <= 0.75,
                  details={"refinements": refinements})


# -- Gagliardo-Nirenberg -------------------------------------------------------

def validate_gn_exponents(d, n, q, m, theta):
    if m <= 0 or not n / m <= theta <= 1:
        raise ValueError(f"theta={theta} outside [n/m, 1] = [{n / m if m else float('nan')}, 1]")
    lhs = 0.0 if math.isinf(q) else 1.0 / q
    rhs = 0.5 + n / d - m * theta / d
    if abs(lhs - rhs) > 1e-12:
        raise ValueError(f"inconsistent exponents: 1/q = {lhs} but 1/2 + n/d - m theta/d = {rhs}")


def gn_ratio(triple, c, target):
    n, q, m, theta = target
    T = triple
    if T.spec.dimension == 1:
        mats = {0: T.synthesis, 1: T.synthesis_dx, 2: T.synthesis_dxx}
        top = T.lebesgue_norm(mats[n] @ c, q)
    else:
        if n == 0:
            top = T.lebesgue_norm(T.torus_velocity(c), q)
        elif n == 1:
            g = T.torus_gradient(c)
            top = T.lebesgue_norm(np.sqrt(np.sum(g ** 2, axis=(0, 1)))[None], q)
        else:
            raise ValueError("2D GN check supports n <= 1")
    dm = math.sqrt(np.dot(T.eigenvalues ** m * c, c))
    h = math.sqrt(np.dot(c, c))
    return top / (dm ** theta * h ** (1 - theta))


def estimate_gn_constant(triple, target, budget=2000, seed=0, polish=4):
    """Observed supremum of |D^n u|_q / (|D^m u|^theta |u|^(1-theta)) over the Galerkin space."""
    n, q, m, theta = target
    validate_gn_exponents(triple.spec.dimension, n, q, m, theta)
    rng = _rng(seed, 7)
    vs = sample_fields(triple, rng, budget)
    ratios = np.array([gn_ratio(triple, v, target) for v in vs])
    # single modes are the natural extremal candidates for spectral bases
    modes = np.eye(triple.size)[: min(triple.size, 8)]
    mode_r = np.array([gn_ratio(triple, v, target) for v in modes])
    best = float(max(ratios.max(), mode_r.max()))
    starts = [vs[i] for i in np.argsort(ratios)[-polish:]] + [modes[int(np.argmax(mode_r))]]
    for x0 in starts:
        res = minimize(lambda x: -gn_ratio(triple, x, target) if np.any(x) else 0.0, x0,
                       method="L-BFGS-B", options={"maxiter": 200})
        best = max(best, float(-res.fun))
    return best


# -- closed-form gates ---------------------------------------------------------

class GateError(ValueError):
    """A closed-form admissibility gate failed; the message names the gate."""


@dataclass
class Gate:
    name: str
    value: float
    bound: float
    strict: bool
    passed: bool

    @property
    def slack(self):
        return self.bound - self.value


@dataclass
class AdmissibilityReport:
    gates: list

    @property
    def passed(self):
        return all(g.passed for g in self.gates)

    def failures(self):
        return [g for g in self.gates if not g.passed]

    def raise_if_failed(self):
        bad = self.failures()
        if bad:
            raise GateError("; ".join(f"gate '{g.name}' failed: {g.value:.17g} vs bound {g.bound:.17g}"
                                      for g in bad))

    def lines(self):
        return [f"{g.name}: value={g.value!r} bound={g.bound!r} slack={g.slack!r} "
                f"{'PASS' if g.passed else 'FAIL'}" for g in self.gates]


def _gate(name, value, bound, strict):
    ok = value < bound if strict else value <= bound
    return Gate(name, float(value), float(bound), strict, bool(ok))


def check_admissibility(constants, triple, model_params=None, sigma=None, moment=None):
    """Evaluate every closed-form gate relevant to the constants.

    moment = (delta, p) adds the OU moment gate sigma > 8 delta / (p c lambda).
    """
    lam = triple.embedding_constant
    k = constants
    gates = [_gate("beta*(alpha-1) <= 2", k.beta * (k.alpha - 1), 2.0, strict=False)]
    if k.alpha == 2:
        gates.append(_gate("dissipativity K < gamma*lambda/4", k.K, k.gamma * lam / 4, strict=True))
    params = model_params or {}
    if "C_phi" in params and "C_GN" in params:
        gates.append(_gate("C_phi < sqrt(lambda)/(2 C_GN^2)", params["C_phi"],
                           math.sqrt(lam) / (2 * params["C_GN"] ** 2), strict=True))
    if moment is not None and sigma is not None:
        delta, p = moment
        gates.append(_gate("sigma > 8 delta / (p c lambda)", -sigma,
                           -8 * delta / (p * k.c_mono * lam), strict=True))
    return AdmissibilityReport(gates)


def certify(model, budget=200, seed=0):
    """Run every sampled check and return a ConditionReport."""
    entries = [
        check_hemicontinuity(model, budget, seed),
        check_local_monotonicity(model, budget, seed),
        check_coercivity(model, budget, seed),
        check_growth(model, budget, seed),
        check_eta_rho(model, budget, seed),
    ]
    if model.monotone is not None:
        entries.append(check_strong_monotonicity(model.monotone, budget, seed))
    notes = ["constants marked estimated are fitted from samples: " + ", ".join(model.constants.estimated)]
    return ConditionReport(model=model.name, seed=seed, budget=budget, entries=entries, notes=notes)
