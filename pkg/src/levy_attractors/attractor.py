"""Absorption radii, pullback attractor estimates and the set-distance predicates.

Everything is computed on the transformed flow Z and mapped back through the
conjugation S(0, s) x = u_0 + Z(0, s)(x - u_s).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import cdist, pdist

from .conditions import GateError, check_admissibility
from .flow import solve_Z
from .levy_noise import shift
from .function_space import v_norm

RULES = ("ball", "polynomial", "exponential", "cloud")


def admissibility_gate(model):
    """Refuse to run the attractor pipeline when a closed-form gate fails."""
    report = check_admissibility(model.constants, model.triple, model.params)
    report.raise_if_failed()
    return report


def hausdorff_semidistance(A, B):
    """sup_{a in A} inf_{b in B} |a - b|_H, with +inf when A (or B) is empty."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.size == 0 or B.size == 0:
        return math.inf
    A = A.reshape(len(A), -1)
    B = B.reshape(len(B), -1)
    return float(cdist(A, B).min(axis=1).max())


def hausdorff_distance(A, B):
    return max(hausdorff_semidistance(A, B), hausdorff_semidistance(B, A))


@dataclass
class TemperedFamily:
    """Initial sets D(theta_s omega) for pullback experiments.

    ball: B(0, radius); polynomial: B(0, radius (1 + |s|)^growth);
    exponential: B(0, radius e^{rate |s|}) (not tempered, used to exercise the
    gate); cloud: fixed sample points.
    """

    rule: str = "ball"
    radius: float = 10.0
    growth: float = 0.0
    rate: float = 0.0
    n_samples: int = 8
    points: np.ndarray | None = None

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown family rule {self.rule!r}")
        if self.rule == "cloud" and self.points is None:
            raise ValueError("cloud family needs points")

    def radius_at(self, s):
        a = abs(s)
        if self.rule == "ball":
            return self.radius
        if self.rule == "polynomial":
            return self.radius * (1 + a) ** self.growth
        if self.rule == "exponential":
            return self.radius * math.exp(self.rate * a)
        return float(np.linalg.norm(self.points, axis=1).max())

    def is_tempered(self, etas=(0.05, 0.1, 0.5, 1.0), depth=1024.0):
        """|D(theta_s omega)| e^{-eta |s|} -> 0 along s = -2^k for every eta in the grid."""
        ss = -np.array([2.0 ** k for k in range(int(math.log2(depth)) + 1)])
        for eta in etas:
            vals = np.array([self._log_radius(s) - eta * abs(s) for s in ss])
            if not (vals[-1] < math.log(1e-6) and vals[-1] < vals[0]):
                return False
        return True

    def _log_radius(self, s):
        if self.rule == "exponential":
            return math.log(self.radius) + self.rate * abs(s)
        r = self.radius_at(s)
        return math.log(r) if r > 0 else -math.inf

    def sample(self, s, size, rng):
        if self.rule == "cloud":
            return np.asarray(self.points, dtype=float)
        r = self.radius_at(s)
        g = rng.standard_normal((self.n_samples, size))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rad = r * rng.random(self.n_samples) ** (1.0 / size)
        rad[0] = r  # always include a boundary point
        return g * rad[:, None]

    def to_dict(self):
        return {"rule": self.rule, "radius": self.radius, "growth": self.growth, "rate": self.rate,
                "n_samples": self.n_samples}


def _family_rng(seed, family_index, s, dt):
    return np.random.default_rng([int(seed), 17, int(family_index), int(round(-s / dt))])


# -- absorption ----------------------------------------------------------------

@dataclass
class AbsorptionRadius:
    R: float
    s0: float
    truncation_error: float
    c_tilde: float
    C: float
    birkhoff_average: float
    gate: float
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"R": self.R, "s0": self.s0, "truncation_error": self.truncation_error,
                "c_tilde": self.c_tilde, "C": self.C, "birkhoff_average": self.birkhoff_average,
                "gate": self.gate, "notes": list(self.notes)}


def _trapz_cumulative_from_right(f, dt):
    """I[i] = int_{t_i}^{t_end} f dr by the trapezoid rule."""
    seg = 0.5 * (f[1:] + f[:-1]) * dt
    out = np.zeros_like(f)
    out[:-1] = np.cumsum(seg[::-1])[::-1]
    return out


def birkhoff_gate(energy, expectation):
    """E|u_0|_V^alpha < c_tilde / (2C)."""
    bound = energy.c_tilde / (2 * energy.C)
    return expectation < bound, bound


def absorption_radius(config, path=None, s0=None, expectation=None):
    """R(omega) = 1 + int_{-inf}^{s0} e^{c r/2} f(r) dr + int_{s0}^0 e^{int_r^0 c(tau) dtau} f(r) dr.

    c(tau) = -c_tilde + C |u_tau|_V^alpha and f = C phi(u) come from the fitted
    EnergyBound of the flow config; the tail below the section window is
    truncated and its exponential envelope reported.
    """
    admissibility_gate(config.model)
    eb = config.energy
    if eb is None:
        raise ValueError("absorption_radius needs a fitted energy bound on the flow config")
    sec = config.section
    if sec is None:
        raise ValueError("absorption_radius needs a stationary section")
    sel = sec.times <= 1e-12
    t = sec.times[sel]
    us = sec.values[sel]
    if abs(t[-1]) > 1e-9:
        raise ValueError("section must extend to time 0")
    vn = np.array([v_norm(u, eb.triple) ** eb.alpha for u in us])
    if expectation is None:
        expectation = float(np.trapezoid(vn, t) / (t[-1] - t[0])) if len(t) > 1 else float(vn[0])
    ok, bound = birkhoff_gate(eb, expectation)
    if not ok:
        raise GateError(f"gate 'E|u_0|_V^alpha < c_tilde/(2C)' failed: {expectation!r} >= {bound!r}; "
                        "increase sigma")
    rate = np.array([eb.rate(u) for u in us])
    forcing = np.array([eb.forcing(u) for u in us])
    I = _trapz_cumulative_from_right(rate, sec.dt)
    if s0 is None:
        depth = -t
        avg = np.where(depth > 0, I / np.where(depth > 0, depth, 1), -np.inf)
        good = avg <= -eb.c_tilde / 2
        # s0: the latest time such that every deeper start satisfies the averaged bound
        bad = np.nonzero(~good)[0]
        if bad.size and bad[0] == 0:
            raise GateError("averaged dissipation does not reach -c_tilde/2 inside the section window")
        s0 = 0.0 if bad.size == 0 else float(t[bad[0] - 1])
    k0 = int(round((s0 - t[0]) / sec.dt))
    head = np.exp(eb.c_tilde * t[:k0 + 1] / 2) * forcing[:k0 + 1]
    tail = np.exp(I[k0:]) * forcing[k0:]
    first = float(np.trapezoid(head, t[:k0 + 1])) if k0 > 0 else 0.0
    second = float(np.trapezoid(tail, t[k0:])) if k0 < len(t) - 1 else 0.0
    trunc = float(forcing.max() * 2 / eb.c_tilde * math.exp(eb.c_tilde * t[0] / 2))
    return AbsorptionRadius(1.0 + first + second, s0, trunc, eb.c_tilde, eb.C, expectation, bound,
                            notes=["c_tilde from closed-form constants, C fitted from samples",
                                   "radius bounds the squared H-norm of Z(0,s)x_s"])


@dataclass
class AbsorptionReport:
    schedule: list
    max_sq_norms: list
    R: float
    s0_observed: float | None
    violations: list

    @property
    def passed(self):
        return self.s0_observed is not None


def check_absorption(config, path, family, schedule, R, seed=0):
    """Verify |Z(0,s)(x_s - u_s)|_H^2 <= R for sampled x_s in D(theta_s omega)."""
    if not family.is_tempered():
        raise GateError(f"family {family.rule!r} is not tempered; absorption is not checked")
    T = config.model.triple
    maxes, violations = [], []
    for s in schedule:
        rng = _family_rng(seed, 0, s, path.dt)
        xs = family.sample(s, T.size, rng)
        us = config.u(s)
        worst = 0.0
        for i, x in enumerate(xs):
            z0 = x - us if us is not None else x
            z = solve_Z(config, path, s, 0.0, z0, record=False).final
            sq = float(np.dot(z, z))
            worst = max(worst, sq)
            if sq > R:
                violations.append((s, i, sq))
        maxes.append(worst)
    passing = [m <= R for m in maxes]
    s0 = None
    for k in range(len(schedule) - 1, -1, -1):
        if not passing[k]:
            break
        s0 = schedule[k]
    return AbsorptionReport(list(schedule), maxes, R, s0, violations)


# -- attractor estimate --------------------------------------------------------

@dataclass
class AttractorEstimate:
    points: np.ndarray
    points_z: np.ndarray
    u0: np.ndarray
    schedule: list
    curve: dict
    diameter: float
    raw_diameter: float
    labels: np.ndarray
    cluster_tol: float
    converged: bool
    n_clusters: int
    invariance_defect: float | None = None
    endpoints_z: dict = field(default_factory=dict)

    def to_summary(self):
        return {"n_points": int(len(self.points)), "n_clusters": self.n_clusters,
                "diameter": self.diameter, "raw_diameter": self.raw_diameter,
                "cluster_tol": self.cluster_tol, "converged": self.converged,
                "schedule": list(self.schedule),
                "invariance_defect": self.invariance_defect}


def pullback_endpoints(config, path, family, s, seed=0, family_index=0):
    """Z(0, s)(x - u_s) for the sampled points of D(theta_s omega)."""
    T = config.model.triple
    rng = _family_rng(seed, family_index, s, path.dt)
    xs = family.sample(s, T.size, rng)
    us = config.u(s)
    out = []
    for x in xs:
        z0 = x - us if us is not None else x
        out.append(solve_Z(config, path, s, 0.0, z0, record=False).final.copy())
    return np.array(out)


def cluster_points(points, tol):
    if len(points) == 1:
        return points.copy(), np.zeros(1, dtype=int)
    labels = fcluster(linkage(points, method="single"), t=tol, criterion="distance") - 1
    reps = np.array([points[labels == k].mean(axis=0) for k in range(labels.max() + 1)])
    return reps, labels


def estimate_attractor(config, path, families, schedule, cluster_tol, seed=0, n_deep=1,
                       band=None, mapper=map):
    """Cluster the deepest pullback endpoints and record the semidistance decay curve."""
    admissibility_gate(config.model)
    schedule = sorted(schedule, reverse=True)
    jobs = [(fi, s) for fi in range(len(families)) for s in schedule]
    results = list(mapper(lambda job: pullback_endpoints(config, path, families[job[0]], job[1],
                                                         seed, job[0]), jobs))
    ends = {job: res for job, res in zip(jobs, results)}
    deep = schedule[-n_deep:]
    cloud = np.concatenate([ends[(fi, s)] for fi in range(len(families)) for s in deep])
    reps, labels = cluster_points(cloud, cluster_tol)
    raw_diam = float(pdist(cloud).max()) if len(cloud) > 1 else 0.0
    diam = float(pdist(reps).max()) if len(reps) > 1 else 0.0
    curve = {fi: [hausdorff_semidistance(ends[(fi, s)], reps) for s in schedule]
             for fi in range(len(families))}
    band = cluster_tol if band is None else band
    converged = all(np.all(np.diff(c) <= band) for c in curve.values())
    u0 = config.u(0.0)
    u0 = np.zeros(config.model.triple.size) if u0 is None else u0
    return AttractorEstimate(points=reps + u0, points_z=reps, u0=u0, schedule=schedule, curve=curve,
                             diameter=diam, raw_diameter=raw_diam, labels=labels,
                             cluster_tol=cluster_tol, converged=bool(converged),
                             n_clusters=int(len(reps)),
                             endpoints_z={f"{fi}:{s!r}": ends[(fi, s)] for fi, s in jobs})


def estimate_attractor_S(config, path, families, schedule, cluster_tol, seed=0, n_deep=1):
    """Direct estimate on S: endpoints S(0,s)x = u_0 + Z(0,s)(x - u_s), clustered in H."""
    est = estimate_attractor(config, path, families, schedule, cluster_tol, seed, n_deep)
    deep = est.schedule[-n_deep:]
    cloud = np.concatenate([est.endpoints_z[f"{fi}:{s!r}"] for fi in range(len(families))
                            for s in deep]) + est.u0
    reps, _ = cluster_points(cloud, cluster_tol)
    return reps


def invariance_check(config, path, estimate, t, families, schedule, cluster_tol, seed=0, n_deep=1):
    """Hausdorff distance between S(t,0) A(omega) and the estimate at the fiber theta_t omega."""
    if t == 0:
        return 0.0
    pushed = []
    u0, ut = config.u(0.0), config.u(t)
    for a in estimate.points:
        z = solve_Z(config, path, 0.0, t, a - u0, record=False).final
        pushed.append(z + ut)
    shifted_path = shift(path, t)
    shifted_cfg = config.with_section(config.section.shifted(t))
    other = estimate_attractor(shifted_cfg, shifted_path, families, schedule, cluster_tol, seed, n_deep)
    return hausdorff_distance(np.array(pushed), other.points)


def contained_in_ball(estimate, R):
    """Cloud of Z-endpoints inside the absorbing ball (R bounds squared norms)."""
    return bool(np.all(np.sum(estimate.points_z ** 2, axis=1) <= R))
