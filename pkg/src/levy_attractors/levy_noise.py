"""Two-sided Levy paths N_t = W_t + compound Poisson jumps, on a uniform grid.

Random numbers come from counter-based Philox streams addressed by
(seed, mode, block of intervals) for the Gaussian part and (seed, time block,
jump index) for jumps, so a realization does not depend on horizon, mode
count, generation order or thread count.

All increments are rounded to multiples of 2**-32.  Sums of such dyadic numbers
are exact in float64 as long as partial sums stay below 2**20, so increments,
anchored path values and Wiener shifts are bit-exact bookkeeping identities
regardless of summation order.
"""

import hashlib
import json
import struct
from dataclasses import dataclass, asdict

import numpy as np

QUANTUM = 2.0 ** -32
MAGNITUDE_LIMIT = 2.0 ** 20
GAUSS_BLOCK = 512
JUMP_BLOCK_TIME = 1.0
JUMP_LAWS = ("gaussian", "two_point")


def quantize(x):
    return np.rint(np.asarray(x) / QUANTUM) * QUANTUM


def _grid_index(t, dt, what="time"):
    n = round(t / dt)
    if abs(n * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"{what} {t!r} is not on the grid of step {dt!r}")
    return int(n)


@dataclass(frozen=True)
class NoiseSpec:
    q: tuple
    base_dt: float
    horizon: tuple
    jump_rate: float = 0.0
    jump_scale: tuple | None = None
    jump_law: str = "gaussian"
    jump_amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))
        object.__setattr__(self, "horizon", tuple(float(v) for v in self.horizon))
        if self.jump_scale is not None:
            object.__setattr__(self, "jump_scale", tuple(float(v) for v in self.jump_scale))

    @property
    def n_modes(self):
        return len(self.q)

    def validate(self):
        q = np.asarray(self.q)
        if q.size == 0 or np.any(q < 0) or not np.all(np.isfinite(q)):
            raise ValueError("q eigenvalues must be finite and nonnegative")
        if not self.base_dt > 0:
            raise ValueError("base_dt must be positive")
        s_min, t_max = self.horizon
        if not s_min < t_max:
            raise ValueError("horizon is empty")
        if s_min > 0 or t_max < 0:
            raise ValueError("horizon must contain time 0 (the path is anchored there)")
        _grid_index(s_min, self.base_dt, "horizon start")
        _grid_index(t_max, self.base_dt, "horizon end")
        if self.jump_rate < 0:
            raise ValueError("jump_rate must be nonnegative")
        if self.jump_law not in JUMP_LAWS:
            raise ValueError(f"jump_law must be one of {JUMP_LAWS}")
        if self.jump_scale is not None and len(self.jump_scale) != self.n_modes:
            raise ValueError("jump_scale length must match q")

    def scale(self):
        if self.jump_scale is None:
            return np.zeros(self.n_modes)
        return np.asarray(self.jump_scale)

    def radial_moments(self):
        """(E xi^2, E xi^4) of the scalar mark law; both laws are centered."""
        if self.jump_law == "gaussian":
            return 1.0, 3.0
        a = self.jump_amplitude
        return a * a, a ** 4

    def trace(self):
        return float(np.sum(self.q))

    def second_moment_rate(self):
        """Per-mode variance per unit time: q_k + lambda_J * E z_k^2."""
        m2, _ = self.radial_moments()
        return np.asarray(self.q) + self.jump_rate * self.scale() ** 2 * m2

    def to_dict(self):
        d = asdict(self)
        d["q"] = list(self.q)
        d["horizon"] = list(self.horizon)
        if self.jump_scale is not None:
            d["jump_scale"] = list(self.jump_scale)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def with_horizon(self, horizon):
        d = self.to_dict()
        d["horizon"] = list(horizon)
        return NoiseSpec.from_dict(d)


def trace_class_q(n_modes, k_q, decay=2.0, amplitude=1.0):
    """q_k = amplitude * k^-decay for k <= k_q, zero beyond (finite trace)."""
    k = np.arange(1, n_modes + 1, dtype=float)
    q = amplitude * k ** (-decay)
    q[k > k_q] = 0.0
    return q


def _zigzag(k):
    k = int(k)
    return 2 * k if k >= 0 else -2 * k - 1


def _stream(seed, *key):
    # block indices are negative before time 0; zigzag keeps keys non-negative
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_zigzag(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


class NoisePath:
    """Immutable realization on grid indices n_lo..n_hi (time n * dt).

    Interval j is (j dt, (j+1) dt]; ``gauss[j - n_lo]`` is its Gaussian
    increment.  Jumps are stored with their containing interval and their
    offset before the interval end, which is what the solvers consume.
    """

    def __init__(self, spec, seed, dt, n_lo, n_hi, gauss, jump_interval, jump_offset,
                 jump_time, jump_marks, level=0):
        self.spec = spec
        self.seed = int(seed)
        self.dt = float(dt)
        self.n_lo = int(n_lo)
        self.n_hi = int(n_hi)
        self.level = int(level)
        self.gauss = gauss
        order = np.argsort(jump_interval, kind="stable")
        self.jump_interval = np.asarray(jump_interval, dtype=np.int64)[order]
        self.jump_offset = np.asarray(jump_offset, dtype=float)[order]
        self.jump_time = np.asarray(jump_time, dtype=float)[order]
        self.jump_marks = np.asarray(jump_marks, dtype=float).reshape(-1, gauss.shape[1])[order]
        for arr in (self.gauss, self.jump_interval, self.jump_offset, self.jump_time, self.jump_marks):
            arr.setflags(write=False)
        self._build_values()

    def _build_values(self):
        jumps = np.zeros_like(self.gauss)
        np.add.at(jumps, self.jump_interval - self.n_lo, self.jump_marks)
        inc = self.gauss + jumps
        z = -self.n_lo
        vals = np.zeros((self.n_hi - self.n_lo + 1, inc.shape[1]))
        vals[z + 1:] = np.cumsum(inc[z:], axis=0)
        if z > 0:
            vals[:z] = -np.cumsum(inc[:z][::-1], axis=0)[::-1]
        if np.abs(vals).max(initial=0.0) >= MAGNITUDE_LIMIT:
            raise OverflowError("path magnitude exceeds the exact dyadic range")
        self.jump_sums = jumps
        self.increments = inc
        self.values = vals
        for arr in (jumps, inc, vals):
            arr.setflags(write=False)

    @property
    def n_modes(self):
        return self.gauss.shape[1]

    @property
    def s_min(self):
        return self.n_lo * self.dt

    @property
    def t_max(self):
        return self.n_hi * self.dt

    def index(self, t):
        n = _grid_index(t, self.dt)
        if not self.n_lo <= n <= self.n_hi:
            raise ValueError(f"time {t!r} outside path horizon [{self.s_min}, {self.t_max}]")
        return n

    def value(self, t):
        return self.values[self.index(t) - self.n_lo]

    def value_at_index(self, n):
        return self.values[n - self.n_lo]

    def jumps_in(self, j):
        """(offsets, marks) of jumps in interval j."""
        lo = np.searchsorted(self.jump_interval, j, side="left")
        hi = np.searchsorted(self.jump_interval, j, side="right")
        return self.jump_offset[lo:hi], self.jump_marks[lo:hi]

    def __eq__(self, other):
        if not isinstance(other, NoisePath):
            return NotImplemented
        return (self.dt == other.dt and self.n_lo == other.n_lo and self.n_hi == other.n_hi
                and np.array_equal(self.gauss, other.gauss)
                and np.array_equal(self.jump_interval, other.jump_interval)
                and np.array_equal(self.jump_offset, other.jump_offset)
                and np.array_equal(self.jump_marks, other.jump_marks))

    __hash__ = None


def _gaussian_block(spec, seed, n_lo, n_hi, dt):
    n_modes = spec.n_modes
    gauss = np.zeros((n_hi - n_lo, n_modes))
    b_lo = n_lo // GAUSS_BLOCK
    b_hi = (n_hi - 1) // GAUSS_BLOCK
    sd = np.sqrt(np.asarray(spec.q) * dt)
    for k in range(n_modes):
        if sd[k] == 0:
            continue
        for b in range(b_lo, b_hi + 1):
            xi = _stream(seed, 0, b, k).standard_normal(GAUSS_BLOCK)
            j0 = b * GAUSS_BLOCK
            a, e = max(j0, n_lo), min(j0 + GAUSS_BLOCK, n_hi)
            gauss[a - n_lo:e - n_lo, k] = xi[a - j0:e - j0]
    return quantize(gauss * sd)


def _jump_events(spec, seed, t_lo, t_hi):
    """Jump times in (t_lo, t_hi] and their marks."""
    n_modes = spec.n_modes
    times, marks = [], []
    if spec.jump_rate > 0:
        scale = spec.scale()
        b_lo = int(np.floor(t_lo / JUMP_BLOCK_TIME))
        b_hi = int(np.floor(t_hi / JUMP_BLOCK_TIME))
        for b in range(b_lo, b_hi + 1):
            rng = _stream(seed, 1, b)
            count = rng.poisson(spec.jump_rate * JUMP_BLOCK_TIME)
            ts = (b + rng.random(count)) * JUMP_BLOCK_TIME
            for i, t in enumerate(ts):
                if not t_lo < t <= t_hi:
                    continue
                mrng = _stream(seed, 2, b, i)
                if spec.jump_law == "gaussian":
                    xi = mrng.standard_normal(n_modes)
                else:
                    xi = spec.jump_amplitude * np.where(mrng.random(n_modes) < 0.5, -1.0, 1.0)
                times.append(t)
                marks.append(quantize(scale * xi))
    return np.asarray(times, dtype=float), np.asarray(marks, dtype=float).reshape(-1, n_modes)


def _bin_jumps(times, dt):
    interval = np.ceil(times / dt).astype(np.int64) - 1
    offset = (interval + 1) * dt - times
    return interval, np.clip(offset, 0.0, dt)


def sample_path(spec, seed):
    """Deterministic realization of the Levy path for (spec, seed)."""
    spec.validate()
    dt = spec.base_dt
    n_lo = _grid_index(spec.horizon[0], dt)
    n_hi = _grid_index(spec.horizon[1], dt)
    gauss = _gaussian_block(spec, seed, n_lo, n_hi, dt)
    times, marks = _jump_events(spec, seed, n_lo * dt, n_hi * dt)
    interval, offset = _bin_jumps(times, dt)
    keep = (interval >= n_lo) & (interval < n_hi)
    return NoisePath(spec, seed, dt, n_lo, n_hi, gauss, interval[keep], offset[keep],
                     times[keep], marks[keep])


def increment(path, s, t):
    """N_t - N_s for grid times s <= t."""
    i, j = path.index(s), path.index(t)
    if i > j:
        raise ValueError("increment needs s <= t")
    return path.values[j - path.n_lo] - path.values[i - path.n_lo]


def summed_increment(path, s, t):
    """Same quantity summed interval by interval (independent summation order)."""
    i, j = path.index(s), path.index(t)
    if i > j:
        raise ValueError("increment needs s <= t")
    return np.sum(path.increments[i - path.n_lo:j - path.n_lo], axis=0)


def shift(path, tau, window=None):
    """Wiener shift: the path N'_t = N_{t+tau} - N_tau, re-anchored at 0."""
    m = _grid_index(tau, path.dt, "shift")
    n_lo, n_hi = path.n_lo - m, path.n_hi - m
    if not n_lo <= 0 <= n_hi:
        raise ValueError("shift moves the anchor outside the path horizon")
    if window is not None:
        a, b = window
        if a < n_lo * path.dt - 1e-12 or b > n_hi * path.dt + 1e-12:
            raise ValueError("shifted path does not cover the requested window")
    if m == 0:
        return path
    return NoisePath(path.spec, path.seed, path.dt, n_lo, n_hi, path.gauss,
                     path.jump_interval - m, path.jump_offset, path.jump_time - m * path.dt,
                     path.jump_marks, level=path.level)


def refine(path):
    """Halve the step: Brownian-bridge split of each Gaussian increment, jumps re-binned.

    The two halves sum exactly to the coarse increment, so coarse increments of
    the refined path are bit-identical to the original ones.
    """
    spec, dt = path.spec, path.dt / 2
    level = path.level + 1
    n_lo, n_hi = 2 * path.n_lo, 2 * path.n_hi
    g = path.gauss
    sd = np.sqrt(np.asarray(spec.q) * dt / 2)
    xi = np.zeros_like(g)
    b_lo = path.n_lo // GAUSS_BLOCK
    b_hi = (path.n_hi - 1) // GAUSS_BLOCK
    for k in range(path.n_modes):
        if sd[k] == 0:
            continue
        for b in range(b_lo, b_hi + 1):
            z = _stream(path.seed, 3, level, b, k).standard_normal(GAUSS_BLOCK)
            j0 = b * GAUSS_BLOCK
            a, e = max(j0, path.n_lo), min(j0 + GAUSS_BLOCK, path.n_hi)
            xi[a - path.n_lo:e - path.n_lo, k] = z[a - j0:e - j0]
    first = quantize(g / 2 + sd * xi)
    fine = np.empty((2 * g.shape[0], g.shape[1]))
    fine[0::2] = first
    fine[1::2] = g - first
    interval, offset = _bin_jumps(path.jump_time, dt)
    return NoisePath(spec, path.seed, dt, n_lo, n_hi, fine, interval, offset,
                     path.jump_time, path.jump_marks, level=level)


def empirical_moments(spec, n_paths, window, seed=0):
    """Monte Carlo moments of N_b - N_a over independent seeds.

    Returns a dict with per-mode mean, variance, kurtosis and standard errors,
    plus the closed-form variance (q_k + lambda_J E z_k^2) |window|.
    """
    if n_paths < 100:
        raise ValueError("n_paths must be at least 100")
    a, b = window
    spec = spec.with_horizon((min(0.0, a), max(0.0, b)))
    samples = np.array([increment(sample_path(spec, seed + i), a, b) for i in range(n_paths)])
    mean = samples.mean(axis=0)
    centered = samples - mean
    var = (centered ** 2).mean(axis=0)
    m4 = (centered ** 4).mean(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        kurt = np.where(var > 0, m4 / var ** 2, 0.0)
    n = n_paths
    expected = spec.second_moment_rate() * (b - a)
    return {
        "n_paths": n,
        "mean": mean,
        "mean_se": np.sqrt(var / n),
        "variance": var,
        "variance_se": np.sqrt(np.maximum(m4 - var ** 2, 0.0) / n),
        "kurtosis": kurt,
        "expected_variance": expected,
        "trace": spec.trace(),
    }


# -- persistence ---------------------------------------------------------------

PATH_MAGIC = b"LEVYPATH"


def save_path(path, fh):
    """Binary layout (little-endian):

    8 bytes magic, uint32 header length, UTF-8 JSON header (spec, spec hash,
    seed, dt, n_lo, n_hi, level, n_jumps), then the Gaussian increment block as
    float64[n_hi - n_lo, n_modes] row-major, then n_jumps records of
    int64 interval, float64 offset, float64 time, float64[n_modes] mark.
    """
    header = {
        "spec": path.spec.to_dict(),
        "spec_hash": path.spec.digest(),
        "seed": path.seed,
        "dt": path.dt,
        "n_lo": path.n_lo,
        "n_hi": path.n_hi,
        "level": path.level,
        "n_modes": path.n_modes,
        "n_jumps": int(path.jump_interval.size),
    }
    blob = json.dumps(header, sort_keys=True).encode()
    fh.write(PATH_MAGIC)
    fh.write(struct.pack("<I", len(blob)))
    fh.write(blob)
    fh.write(np.ascontiguousarray(path.gauss, dtype="<f8").tobytes())
    rec = np.dtype([("interval", "<i8"), ("offset", "<f8"), ("time", "<f8"),
                    ("mark", "<f8", (path.n_modes,))])
    table = np.zeros(path.jump_interval.size, dtype=rec)
    table["interval"] = path.jump_interval
    table["offset"] = path.jump_offset
    table["time"] = path.jump_time
    table["mark"] = path.jump_marks
    fh.write(table.tobytes())


def load_path(fh):
    if fh.read(8) != PATH_MAGIC:
        raise ValueError("not a Levy path file")
    (n,) = struct.unpack("<I", fh.read(4))
    header = json.loads(fh.read(n).decode())
    spec = NoiseSpec.from_dict(header["spec"])
    rows, n_modes = header["n_hi"] - header["n_lo"], header["n_modes"]
    gauss = np.frombuffer(fh.read(8 * rows * n_modes), dtype="<f8").reshape(rows, n_modes).astype(float)
    rec = np.dtype([("interval", "<i8"), ("offset", "<f8"), ("time", "<f8"),
                    ("mark", "<f8", (n_modes,))])
    table = np.frombuffer(fh.read(rec.itemsize * header["n_jumps"]), dtype=rec)
    return NoisePath(spec, header["seed"], header["dt"], header["n_lo"], header["n_hi"], gauss,
                     table["interval"].astype(np.int64), table["offset"].astype(float),
                     table["time"].astype(float), table["mark"].astype(float), level=header["level"])
