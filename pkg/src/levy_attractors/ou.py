"""Stationary nonlinear Ornstein-Uhlenbeck process du = sigma M(u) dt + dN by pullback.

For a linear diagonal M the default stepper is the exponential integrator

    u_{n+1} = e^{-z} u_n + sqrt((1 - e^{-2z}) / (2z)) dW_n + sum_jumps e^{-sigma w (t_{n+1} - tau)} dL,

with z = sigma w dt, which is exact in law (stationary variance q/(2 sigma w)
at every dt).  Nonlinear M uses implicit Euler with the increment added to the
explicit side, solved by damped Newton.
"""

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .function_space import v_norm
from .conditions import GateError

SCHEMES = ("auto", "exponential", "implicit-euler")


class SolverError(RuntimeError):
    def __init__(self, time, message):
        super().__init__(f"t={time!r}: {message}")
        self.time = time


@dataclass
class OUConfig:
    model: object
    sigma: float
    schedule: tuple = (-2.0, -4.0, -8.0, -16.0, -32.0)
    cauchy_tol: float = 1e-6
    scheme: str = "auto"
    newton_tol: float = 1e-12
    newton_maxiter: int = 50
    max_halvings: int = 8

    def __post_init__(self):
        self.sigma = float(self.sigma)
        self.schedule = tuple(float(s) for s in self.schedule)
        self.validate()

    def validate(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if any(b >= a for a, b in zip(self.schedule, self.schedule[1:])):
            raise ValueError("pullback schedule must be strictly decreasing")
        if not self.cauchy_tol > 0:
            raise ValueError("cauchy_tol must be > 0")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.model.constants.beta != 0:
            raise ValueError("the OU drift must satisfy the growth bound with beta = 0")

    @property
    def resolved_scheme(self):
        return resolve_scheme(self.model, self.scheme)


def resolve_scheme(M, scheme):
    if scheme == "auto":
        return "exponential" if (M.linear and not M.newton) else "implicit-euler"
    if scheme == "exponential" and not (M.linear and not M.newton):
        raise ValueError("the exponential integrator needs a linear diagonal M")
    return scheme


def _padded(arr, size):
    arr = np.asarray(arr)
    if arr.shape[-1] == size:
        return arr
    if arr.shape[-1] > size:
        raise ValueError(f"noise has {arr.shape[-1]} modes but the basis only {size}")
    out = np.zeros(arr.shape[:-1] + (size,))
    out[..., :arr.shape[-1]] = arr
    return out


def _exponential_inputs(M, sigma, path, i0, i1):
    """Per-interval forcing for the exponential integrator on intervals i0..i1-1."""
    N = M.triple.size
    w = -M.diagonal
    z = sigma * w * path.dt
    with np.errstate(invalid="ignore", divide="ignore"):
        gfac = np.where(z > 0, np.sqrt(-np.expm1(-2 * z) / (2 * np.where(z > 0, z, 1))), 1.0)
    g = _padded(path.gauss[i0 - path.n_lo:i1 - path.n_lo], N) * gfac
    lo = np.searchsorted(path.jump_interval, i0, side="left")
    hi = np.searchsorted(path.jump_interval, i1, side="left")
    if hi > lo:
        offs = path.jump_offset[lo:hi, None]
        marks = _padded(path.jump_marks[lo:hi], N)
        np.add.at(g, path.jump_interval[lo:hi] - i0, np.exp(-sigma * w * offs) * marks)
    return np.exp(-z), g


def newton_implicit(F_apply, F_jac, b, h, x_guess, tol, maxiter):
    """Solve y - h F(y) = b by damped Newton; returns (y, iterations, residual) or None."""
    y = x_guess.copy()
    scale = 1.0 + np.linalg.norm(b)
    r = y - h * F_apply(y) - b
    rn = np.linalg.norm(r)
    eye = np.eye(b.size)
    for it in range(1, maxiter + 1):
        if rn <= tol * scale:
            return y, it - 1, rn
        J = eye - h * F_jac(y)
        try:
            step = np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        while True:
            y_new = y - lam * step
            r_new = y_new - h * F_apply(y_new) - b
            rn_new = np.linalg.norm(r_new)
            if np.isfinite(rn_new) and rn_new < rn:
                break
            lam *= 0.5
            if lam < 2.0 ** -30:
                return (y, it, rn) if rn <= 1e3 * tol * scale else None
        y, r, rn = y_new, r_new, rn_new
    return (y, maxiter, rn) if rn <= tol * scale else None


def _implicit_step(M, sigma, x, dn, dt, cfg, t):
    """One implicit Euler step y - dt sigma M(y) = x + dn, halving on failure."""
    if not M.newton:
        return (x + dn) / (1.0 - dt * sigma * M.diagonal)
    apply = M.implicit_apply
    jac = M.implicit_jacobian
    F = lambda c: sigma * apply(c)
    DF = lambda c: sigma * jac(c)
    for level in range(cfg.max_halvings + 1):
        n_sub = 2 ** level
        h = dt / n_sub
        y = x
        ok = True
        for k in range(n_sub):
            b = y + dn if k == 0 else y
            res = newton_implicit(F, DF, b, h, b, cfg.newton_tol, cfg.newton_maxiter)
            if res is None:
                ok = False
                break
            y = res[0]
        if ok:
            return y
    raise SolverError(t, "implicit OU step failed after step halving")


def ou_states(M, sigma, path, s, t, x0, scheme="auto", cfg=None, record=True):
    """X(r, s) x0 for grid times r in [s, t]; returns (times, states) or the endpoint."""
    cfg = cfg or OUConfig(model=M, sigma=sigma, scheme=scheme)
    i0, i1 = path.index(s), path.index(t)
    if i0 > i1:
        raise ValueError("pullback_solve needs s <= t")
    N = M.triple.size
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (N,):
        raise ValueError(f"initial state must have {N} coefficients")
    scheme = resolve_scheme(M, scheme)
    if scheme == "exponential":
        decay, g = _exponential_inputs(M, sigma, path, i0, i1)
        out = np.empty((i1 - i0 + 1, N))
        out[0] = x0
        for k in range(N):
            if i1 > i0:
                y, _ = lfilter([1.0], [1.0, -decay[k]], g[:, k], zi=[decay[k] * x0[k]])
                out[1:, k] = y
    else:
        inc = _padded(path.increments[i0 - path.n_lo:i1 - path.n_lo], N)
        out = np.empty((i1 - i0 + 1, N)) if record else None
        x = x0.copy()
        if record:
            out[0] = x
        for n in range(i1 - i0):
            x = _implicit_step(M, sigma, x, inc[n], path.dt, cfg, (i0 + n + 1) * path.dt)
            if not np.all(np.isfinite(x)):
                raise SolverError((i0 + n + 1) * path.dt, "non-finite OU state")
            if record:
                out[n + 1] = x
        if not record:
            return x
    if not np.all(np.isfinite(out)):
        raise SolverError(t, "non-finite OU state")
    times = np.arange(i0, i1 + 1) * path.dt
    return (times, out) if record else out[-1].copy()


def pullback_solve(M, sigma, path, s, t, x0, scheme="auto"):
    """Galerkin approximation of X(t, s; omega) x0."""
    return ou_states(M, sigma, path, s, t, x0, scheme=scheme, record=False)


@dataclass
class StationarySection:
    times: np.ndarray
    values: np.ndarray
    gap: float
    depth: float
    converged: bool
    gaps: list
    dt: float
    sigma: float
    meta: dict = field(default_factory=dict)

    def index(self, t):
        k = int(round((t - self.times[0]) / self.dt))
        if not 0 <= k < len(self.times) or abs(self.times[0] + k * self.dt - t) > 1e-9 * max(1, abs(t)):
            raise ValueError(f"time {t!r} outside the section window [{self.times[0]}, {self.times[-1]}]")
        return k

    def at(self, t):
        return self.values[self.index(t)]

    def covers(self, s, t):
        return self.times[0] - 1e-12 <= s and t <= self.times[-1] + 1e-12

    def shifted(self, tau):
        """Section of the shifted path obtained by relabeling times by -tau."""
        m = int(round(tau / self.dt))
        return StationarySection(times=self.times - m * self.dt, values=self.values, gap=self.gap,
                                 depth=self.depth, converged=self.converged, gaps=list(self.gaps),
                                 dt=self.dt, sigma=self.sigma, meta=dict(self.meta, shift=tau))


def zero_section(triple, times, dt, sigma=1.0):
    times = np.asarray(times, dtype=float)
    return StationarySection(times=times, values=np.zeros((len(times), triple.size)), gap=0.0,
                             depth=0.0, converged=True, gaps=[0.0], dt=dt, sigma=sigma,
                             meta={"kind": "zero"})


def stationary_section(config, path, window, x0=None):
    """Pull back from each schedule start until successive windows agree within cauchy_tol."""
    a, b = window
    path.index(a), path.index(b)
    M, sigma = config.model, config.sigma
    N = M.triple.size
    x0 = np.zeros(N) if x0 is None else np.asarray(x0, dtype=float)
    ia = path.index(a)
    prev = None
    gaps = []
    for s in config.schedule:
        if s > a:
            continue
        if s < path.s_min - 1e-12:
            break
        head = ou_states(M, sigma, path, s, a, x0, scheme=config.scheme, cfg=config, record=False)
        times, vals = ou_states(M, sigma, path, a, b, head, scheme=config.scheme, cfg=config)
        if prev is not None:
            gap = float(np.sqrt(np.max(np.sum((vals - prev) ** 2, axis=1))))
            gaps.append(gap)
            if gap <= config.cauchy_tol:
                return StationarySection(times, vals, gap, -s, True, gaps, path.dt, sigma,
                                         meta={"seed": path.seed, "window": [a, b]})
        prev = vals
        depth = -s
    if prev is None:
        raise ValueError("no schedule start lies before the window and inside the path horizon")
    return StationarySection(times, prev, gaps[-1] if gaps else float("inf"), depth, False, gaps,
                             path.dt, sigma, meta={"seed": path.seed, "window": [a, b],
                                                   "partial": True})


def contraction_bound(alpha, c_mono, sigma, lam, elapsed):
    """Envelope for |X(t,s)x - X(t,s)y|_H^2 after time `elapsed`.

    alpha > 2: ((alpha/2 - 1) c sigma lam^(alpha/2) elapsed)^(-2/(alpha-2)), uniform in x, y.
    alpha = 2: the factor exp(-c sigma lam elapsed) multiplying |x - y|_H^2.
    """
    if alpha < 2:
        raise ValueError("alpha must be >= 2")
    if not elapsed > 0:
        raise ValueError("elapsed must be > 0")
    if alpha == 2:
        return math.exp(-c_mono * sigma * lam * elapsed)
    base = (alpha / 2 - 1) * c_mono * sigma * lam ** (alpha / 2) * elapsed
    return base ** (-2.0 / (alpha - 2))


# -- functionals and averages --------------------------------------------------

def v_power(triple, alpha):
    return lambda c: v_norm(c, triple) ** alpha


def h_power(p):
    return lambda c: float(np.dot(c, c)) ** (p / 2)


@dataclass
class BirkhoffResult:
    window_lengths: np.ndarray
    averages: np.ndarray

    @property
    def final(self):
        return float(self.averages[-1])

    @property
    def relative_fluctuation(self):
        if len(self.averages) < 2:
            return 0.0
        a, b = self.averages[-2], self.averages[-1]
        return float(abs(b - a) / max(abs(b), 1e-300))


def running_values(section, functional):
    return np.array([functional(v) for v in section.values])


def birkhoff_average(section, functional, min_window=None):
    """Trapezoid time averages over doubling windows ending at the section's last time."""
    f = running_values(section, functional)
    dt = section.dt
    n = len(f) - 1
    if n < 1:
        return BirkhoffResult(np.array([0.0]), np.array([f[0]]))
    m0 = max(1, int(round((min_window or dt) / dt)))
    lens, avgs = [], []
    m = m0
    while True:
        m = min(m, n)
        seg = f[n - m:]
        avgs.append(float(np.trapezoid(seg, dx=dt) / (m * dt)))
        lens.append(m * dt)
        if m == n:
            break
        m *= 2
    return BirkhoffResult(np.array(lens), np.array(avgs))


def ensemble_expectation(states, functional):
    vals = np.array([functional(v) for v in states])
    se = vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else float("inf")
    return float(vals.mean()), float(se)


@dataclass
class GrowthReport:
    t_mins: np.ndarray
    ratios: np.ndarray
    passed: bool


def sublinear_growth_check(section, p=2.0, t_mins=None):
    """max_{|t| >= t_min} |u_t|_H^p / |t| for doubling t_min; must not increase."""
    t = section.times
    norms_p = np.sum(section.values ** 2, axis=1) ** (p / 2)
    tmax = np.abs(t).max()
    if t_mins is None:
        t_mins = []
        tm = max(section.dt, tmax / 64)
        while tm <= tmax / 2 + 1e-12:
            t_mins.append(tm)
            tm *= 2
    ratios = []
    for tm in t_mins:
        sel = np.abs(t) >= tm
        ratios.append(float(np.max(norms_p[sel] / np.abs(t[sel]))) if sel.any() else 0.0)
    ratios = np.asarray(ratios)
    passed = bool(np.all(np.diff(ratios) <= 1e-12 * (1 + ratios[:-1])))
    return GrowthReport(np.asarray(t_mins, dtype=float), ratios, passed)


def moment_gate(delta, p, c_mono, lam):
    return 8.0 * delta / (p * c_mono * lam)


@dataclass
class MomentReport:
    estimate: float
    standard_error: float
    sigma: float
    gate: float


def moment_bound_check(sections, delta, p, c_mono, lam, alpha, triple):
    """Monte Carlo estimate of e^{-delta t} E int e^{delta r} |u_r|_V^alpha |u_r|_H^(p-2) dr."""
    sigma = sections[0].sigma
    gate = moment_gate(delta, p, c_mono, lam)
    if not sigma > gate:
        raise GateError(f"gate 'sigma > 8 delta / (p c lambda)' failed: sigma={sigma!r} <= {gate!r}")
    vals = []
    for sec in sections:
        t = sec.times
        f = np.array([v_norm(v, triple) ** alpha * float(np.dot(v, v)) ** ((p - 2) / 2)
                      for v in sec.values])
        w = np.exp(delta * (t - t[-1]))
        vals.append(float(np.trapezoid(w * f, t)))
    vals = np.asarray(vals)
    se = vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else float("inf")
    return MomentReport(float(vals.mean()), float(se), sigma, gate)


def choose_sigma(accept, sigma0=1.0, max_doublings=20):
    """Smallest sigma0 * 2^k for which accept(sigma) holds."""
    sigma = float(sigma0)
    for _ in range(max_doublings + 1):
        if accept(sigma):
            return sigma
        sigma *= 2
    raise GateError(f"no sigma up to {sigma / 2!r} satisfies the gates")


# -- persistence ---------------------------------------------------------------

TRAJECTORY_MAGIC = b"LEVYTRAJ"


def write_trajectory_file(fh, times, values, meta):
    times = np.ascontiguousarray(times, dtype="<f8")
    values = np.ascontiguousarray(values, dtype="<f8")
    header = dict(meta, n_times=int(values.shape[0]), n_modes=int(values.shape[1]))
    blob = json.dumps(header, sort_keys=True).encode()
    fh.write(TRAJECTORY_MAGIC)
    fh.write(struct.pack("<I", len(blob)))
    fh.write(blob)
    fh.write(times.tobytes())
    fh.write(values.tobytes())


def read_trajectory_file(fh):
    if fh.read(8) != TRAJECTORY_MAGIC:
        raise ValueError("not a trajectory file")
    (n,) = struct.unpack("<I", fh.read(4))
    header = json.loads(fh.read(n))
    nt, nm = header["n_times"], header["n_modes"]
    times = np.frombuffer(fh.read(8 * nt), dtype="<f8").copy()
    values = np.frombuffer(fh.read(8 * nt * nm), dtype="<f8").reshape(nt, nm).copy()
    return times, values, header


def save_section(section, fh):
    meta = {"kind": "stationary_section", "gap": section.gap, "depth": section.depth,
            "converged": section.converged, "gaps": list(section.gaps), "dt": section.dt,
            "sigma": section.sigma, "meta": section.meta}
    write_trajectory_file(fh, section.times, section.values, meta)


def load_section(fh):
    times, values, h = read_trajectory_file(fh)
    return StationarySection(times=times, values=values, gap=h["gap"], depth=h["depth"],
                             converged=h["converged"], gaps=h["gaps"], dt=h["dt"],
                             sigma=h["sigma"], meta=h["meta"])
