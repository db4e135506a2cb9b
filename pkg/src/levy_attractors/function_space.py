"""Spectral realization of the Gelfand triple V in H in V*.

Every element of V, H or V* is stored as one real coefficient vector in a fixed
H-orthonormal eigenbasis.  Hilbert-type spaces V get diagonal norms; the two
Banach-type spaces needed by the quasilinear models (W^{1,q}_0 for p-Laplace,
L^q with an H^{-1} pivot for porous media) are normed by quadrature on the
padded collocation grid.
"""

import math
from dataclasses import dataclass, field, asdict
from functools import cached_property

import numpy as np
from scipy.optimize import minimize_scalar


class ConfigurationError(ValueError):
    """Raised when a spec combination is not supported."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


BOUNDARIES = ("dirichlet", "periodic", "neumann")


@dataclass(frozen=True)
class BasisSpec:
    dimension: int = 1
    length: float = 1.0
    boundary: str = "dirichlet"
    mode_count: int = 32
    v_order: int = 1
    # None: Hilbert V with spectral weights.  q: V normed by an L^q quadrature
    # of the v_order-th derivative (v_order 1: W^{1,q}_0, v_order 0: L^q with
    # H^{-1} as pivot space).
    v_exponent: float | None = None
    divergence_free: bool = False

    def validate(self):
        if self.dimension not in (1, 2):
            raise ConfigurationError("dimension", "must be 1 or 2")
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError("boundary", f"unknown boundary {self.boundary!r}")
        if not self.length > 0:
            raise ConfigurationError("length", "must be positive")
        if self.mode_count < 2:
            raise ConfigurationError("mode_count", "must be at least 2")
        if self.v_order not in (0, 1, 2):
            raise ConfigurationError("v_order", "must be 0, 1 or 2")
        if self.divergence_free and (self.dimension != 2 or self.boundary != "periodic"):
            raise ConfigurationError("divergence_free", "requires dimension 2 and periodic boundary")
        if self.dimension == 2:
            if self.boundary != "periodic" or not self.divergence_free:
                raise ConfigurationError("dimension", "2D is only supported as a divergence-free torus")
            if self.v_order != 1 or self.v_exponent is not None:
                raise ConfigurationError("v_order", "2D torus supports v_order 1 Hilbert V only")
        if self.boundary == "periodic" and self.dimension == 1 and self.mode_count % 2:
            raise ConfigurationError("mode_count", "periodic 1D basis needs an even mode count (cos/sin pairs)")
        if self.v_exponent is not None:
            if self.boundary != "dirichlet" or self.dimension != 1:
                raise ConfigurationError("v_exponent", "L^q-type V only on the 1D Dirichlet interval")
            if self.v_exponent < 2:
                raise ConfigurationError("v_exponent", "must be >= 2")
            if self.v_order not in (0, 1):
                raise ConfigurationError("v_order", "L^q-type V needs v_order 0 or 1")
        elif self.v_order == 0:
            raise ConfigurationError("v_order", "v_order 0 requires v_exponent")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(sorted(unknown)[0], "unknown basis field")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class SpectralField:
    coefficients: np.ndarray
    triple: "GelfandTriple" = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (self.triple.size,):
            raise ValueError(f"expected {self.triple.size} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficients")
        object.__setattr__(self, "coefficients", c)


class GelfandTriple:
    """Eigenbasis, weights and grid machinery for one BasisSpec.

    ``eigenvalues`` are the Laplacian eigenvalues mu_k of the chosen boundary
    problem; ``weights`` are the V-weights w_k = mu_k ** v_order (Hilbert V) and
    ``embedding_constant`` is the lambda with lambda |v|_H^2 <= |v|_V^2.
    """

    def __init__(self, spec):
        spec.validate()
        self.spec = spec
        self.L = float(spec.length)
        if spec.dimension == 1:
            self._init_1d()
        else:
            self._init_torus()
        order = max(spec.v_order, 1)
        self.weights = self.eigenvalues ** order
        if spec.v_exponent is None:
            self.embedding_constant = float(self.weights.min())
        else:
            q = spec.v_exponent
            self.embedding_constant = float(self.eigenvalues.min() * self.L ** (-(q - 2.0) / q))

    # -- construction -------------------------------------------------------

    def _init_1d(self):
        spec, L = self.spec, self.L
        n = spec.mode_count
        if spec.boundary == "periodic":
            kmax = n // 2
            self.wavenumbers = np.repeat(np.arange(1, kmax + 1), 2)
            self.eigenvalues = (2 * np.pi * self.wavenumbers / L) ** 2
            m = 3 * kmax + 2
            x = np.arange(m) * L / m
            arg = 2 * np.pi * np.outer(x, np.arange(1, kmax + 1)) / L
            kk = 2 * np.pi * np.arange(1, kmax + 1) / L
            s2 = np.sqrt(2.0 / L)
            phi = np.empty((m, n))
            dphi = np.empty((m, n))
            phi[:, 0::2] = s2 * np.cos(arg)
            phi[:, 1::2] = s2 * np.sin(arg)
            dphi[:, 0::2] = -s2 * kk * np.sin(arg)
            dphi[:, 1::2] = s2 * kk * np.cos(arg)
            d2phi = -phi * (2 * np.pi * self.wavenumbers / L) ** 2
        else:
            self.wavenumbers = np.arange(1, n + 1)
            self.eigenvalues = (np.pi * self.wavenumbers / L) ** 2
            m = (3 * n) // 2 + 2
            if spec.v_exponent is not None:
                # products of q factors are integrated exactly for integer q
                m = max(m, int(math.ceil(spec.v_exponent * n / 2)) + 2)
            x = (np.arange(m) + 0.5) * L / m
            kk = np.pi * self.wavenumbers / L
            arg = np.outer(x, kk)
            s2 = np.sqrt(2.0 / L)
            if spec.boundary == "dirichlet":
                phi = s2 * np.sin(arg)
                dphi = s2 * kk * np.cos(arg)
            else:
                # cosine modes, mean mode removed (see Neumann note in the README)
                phi = s2 * np.cos(arg)
                dphi = -s2 * kk * np.sin(arg)
            d2phi = -phi * kk ** 2
        self.size = n
        self.grid = x
        self.quad_weight = L / m
        self._pivot_scale = np.ones(n)
        if spec.v_order == 0:
            # H^{-1} pivot: H-orthonormal modes are sqrt(mu_k) phi_k
            self._pivot_scale = np.sqrt(self.eigenvalues)
        self.synthesis = phi * self._pivot_scale
        self.synthesis_dx = dphi * self._pivot_scale
        self.synthesis_dxx = d2phi * self._pivot_scale
        # dual coefficients f_k act as pairing sum_k f_k a_k; the L^2 function
        # representing f is sum_k f_k phi_k / pivot_scale_k
        self.dual_synthesis = phi / self._pivot_scale
        if spec.boundary == "dirichlet":
            # antiderivative of the dual function, up to a constant: cosine series
            self.dual_antiderivative = (s2 * np.cos(np.outer(x, np.pi * self.wavenumbers / L))
                                        / np.sqrt(self.eigenvalues))

    def _init_torus(self):
        spec, L = self.spec, self.L
        kmax = spec.mode_count // 2
        ks = []
        for kx in range(-kmax, kmax + 1):
            for ky in range(-kmax, kmax + 1):
                if (kx, ky) == (0, 0):
                    continue
                if kx > 0 or (kx == 0 and ky > 0):
                    ks.append((kx, ky))
        ks.sort(key=lambda k: (k[0] ** 2 + k[1] ** 2, k))
        ks = np.array(ks, dtype=int)
        self.wavevectors = ks
        k2 = (ks ** 2).sum(axis=1).astype(float)
        self.eigenvalues = np.repeat((2 * np.pi / L) ** 2 * k2, 2)
        self.size = 2 * len(ks)
        m = 3 * kmax + 2
        m += m % 2
        self.grid_points = m
        self.quad_weight = (L / m) ** 2
        kn = np.sqrt(k2)
        self.directions = np.stack([-ks[:, 1] / kn, ks[:, 0] / kn], axis=1)
        self._ix = ks[:, 0] % m
        self._iy = ks[:, 1] % m
        self._jx = (-ks[:, 0]) % m
        self._jy = (-ks[:, 1]) % m
        freq = np.fft.fftfreq(m, d=1.0 / m)
        self._kx_grid = (2 * np.pi / L) * freq[:, None] * np.ones((1, m))
        self._ky_grid = (2 * np.pi / L) * freq[None, :] * np.ones((m, 1))
        x = np.arange(m) * L / m
        self.grid = np.stack(np.meshgrid(x, x, indexing="ij"))

    # -- torus transforms ----------------------------------------------------

    def _torus_spectrum(self, c):
        """Full complex spectrum (2, m, m) of the velocity, numpy-fft scaled."""
        m = self.grid_points
        a, b = c[0::2], c[1::2]
        amp = (np.sqrt(2.0) / self.L) * (a - 1j * b) / 2.0 * m * m
        spec = np.zeros((2, m, m), dtype=complex)
        for comp in range(2):
            v = amp * self.directions[:, comp]
            spec[comp, self._ix, self._iy] = v
            spec[comp, self._jx, self._jy] = np.conj(v)
        return spec

    def _torus_coefficients(self, spectrum):
        m = self.grid_points
        hat = spectrum[:, self._ix, self._iy] / (m * m)
        proj = (hat * self.directions.T).sum(axis=0)
        c = np.empty(self.size)
        c[0::2] = np.sqrt(2.0) * self.L * proj.real
        c[1::2] = -np.sqrt(2.0) * self.L * proj.imag
        return c

    def torus_velocity(self, c):
        return np.fft.ifft2(self._torus_spectrum(c)).real

    def torus_gradient(self, c):
        """Array g[i, j] = d_j u_i on the grid."""
        spec = self._torus_spectrum(c)
        out = np.empty((2, 2) + spec.shape[1:])
        for i in range(2):
            out[i, 0] = np.fft.ifft2(1j * self._kx_grid * spec[i]).real
            out[i, 1] = np.fft.ifft2(1j * self._ky_grid * spec[i]).real
        return out

    def torus_project(self, values):
        """Coefficients of the divergence-free part of a grid vector field."""
        return self._torus_coefficients(np.fft.fft2(values))

    # -- generic helpers -----------------------------------------------------

    @property
    def is_hilbert(self):
        return self.spec.v_exponent is None

    @property
    def pivot(self):
        return "H-1" if self.spec.v_order == 0 else "L2"

    def check(self, field):
        if isinstance(field, SpectralField):
            if field.triple is not self and field.triple.spec != self.spec:
                raise ValueError("basis mismatch: field belongs to a different triple")
            return field.coefficients
        c = np.asarray(field, dtype=float)
        if c.shape[-1] != self.size:
            raise ValueError(f"basis mismatch: expected {self.size} coefficients, got {c.shape[-1]}")
        return c

    def field(self, coefficients):
        return SpectralField(np.asarray(coefficients, dtype=float), self)

    def zeros(self):
        return np.zeros(self.size)

    def quad(self, values):
        """Quadrature of grid values over the domain (last axes are the grid)."""
        if self.spec.dimension == 1:
            return self.quad_weight * np.sum(values, axis=-1)
        return self.quad_weight * np.sum(values, axis=(-2, -1))

    def lebesgue_norm(self, values, q):
        values = np.abs(values)
        if self.spec.dimension == 2:
            values = np.sqrt(np.sum(values ** 2, axis=0))
        if np.isinf(q):
            return float(values.max())
        return float(self.quad(values ** q) ** (1.0 / q))

    @cached_property
    def _dual_exponent(self):
        q = self.spec.v_exponent
        return q / (q - 1.0)

    def random_coefficients(self, rng, decay=1.0, amplitude=1.0, size=None):
        """Gaussian spectral field with coefficient std amplitude * mu_k^(-decay/2)."""
        scale = amplitude * (self.eigenvalues / self.eigenvalues[0]) ** (-decay / 2.0)
        shape = (self.size,) if size is None else (size, self.size)
        return rng.standard_normal(shape) * scale


def build_triple(spec):
    """Closed-form eigenvalues and weights for ``spec``."""
    return GelfandTriple(spec)


def norms(field, triple):
    """(|v|_H, |v|_V, |v|_{V*}) of one field."""
    c = triple.check(field)
    h = float(np.sqrt(np.dot(c, c)))
    return h, v_norm(c, triple), dual_norm(c, triple)


def v_norm(field, triple):
    c = triple.check(field)
    if triple.is_hilbert:
        return float(np.sqrt(np.dot(triple.weights * c, c)))
    q = triple.spec.v_exponent
    if triple.spec.v_order == 1:
        return triple.lebesgue_norm(triple.synthesis_dx @ c, q)
    return triple.lebesgue_norm(triple.synthesis @ c, q)


def dual_norm(f, triple):
    """|f|_{V*} for a dual coefficient vector."""
    f = triple.check(f)
    if triple.is_hilbert:
        return float(np.sqrt(np.dot(f / triple.weights, f)))
    qd = triple._dual_exponent
    if triple.spec.v_order == 0:
        return triple.lebesgue_norm(triple.dual_synthesis @ f, qd)
    # W^{1,q}_0: <f, v> = -int F v' with v' of zero mean, so the dual norm is
    # the distance of the antiderivative F to the constants in L^{q'}
    g = triple.dual_antiderivative @ f
    if not np.any(g):
        return 0.0
    span = float(np.abs(g).max())
    res = minimize_scalar(lambda s: triple.quad(np.abs(g - s) ** qd),
                          bounds=(-span, span), method="bounded",
                          options={"xatol": 1e-12 * span})
    return float(res.fun ** (1.0 / qd))


def pairing(f, v, triple=None):
    """Duality pairing sum_k f_k v_k."""
    if isinstance(f, SpectralField) and isinstance(v, SpectralField):
        if f.triple.spec != v.triple.spec:
            raise ValueError("basis mismatch in pairing")
        return float(np.dot(f.coefficients, v.coefficients))
    if triple is not None:
        f, v = triple.check(f), triple.check(v)
    f = f.coefficients if isinstance(f, SpectralField) else np.asarray(f, dtype=float)
    v = v.coefficients if isinstance(v, SpectralField) else np.asarray(v, dtype=float)
    if f.shape != v.shape:
        raise ValueError("basis mismatch in pairing")
    return float(np.dot(f, v))


def to_grid(field, triple=None):
    """Values of a field on the collocation grid of its triple."""
    if triple is None:
        triple = field.triple
    c = triple.check(field)
    if triple.spec.dimension == 2:
        return triple.torus_velocity(c)
    return triple.synthesis @ c


def from_grid(values, triple):
    """Quadrature projection of grid values onto the basis (exact on band-limited data)."""
    values = np.asarray(values, dtype=float)
    if triple.spec.dimension == 2:
        return triple.torus_project(values)
    # H-coefficients: <v, e_k>_H, which for the H^{-1} pivot is int v phi_k / sqrt(mu_k)
    return triple.quad_weight * (triple.synthesis / triple._pivot_scale ** 2).T @ values


def to_dual(values, triple):
    """Dual coefficients of the L^2 function given by grid values: f_k = int g e_k."""
    values = np.asarray(values, dtype=float)
    if triple.spec.dimension == 2:
        return triple.torus_project(values)
    return triple.quad_weight * triple.synthesis.T @ values


def leray_project(vector_field, triple):
    """Helmholtz-Leray projection of a grid vector field on the 2D torus."""
    if triple.spec.dimension != 2 or triple.spec.boundary != "periodic":
        raise ConfigurationError("boundary", "Leray projection needs the 2D periodic basis")
    u = np.asarray(vector_field, dtype=float)
    if u.shape != (2, triple.grid_points, triple.grid_points):
        raise ValueError("vector field must have shape (2, m, m)")
    hat = np.fft.fft2(u)
    kx, ky = triple._kx_grid, triple._ky_grid
    k2 = kx ** 2 + ky ** 2
    k2[0, 0] = 1.0
    div = (kx * hat[0] + ky * hat[1]) / k2
    out = np.stack([hat[0] - kx * div, hat[1] - ky * div])
    out[:, 0, 0] = 0.0
    # Nyquist row/column has no conjugate partner on an even grid; drop it
    n2 = triple.grid_points // 2
    out[:, n2, :] = 0.0
    out[:, :, n2] = 0.0
    return np.fft.ifft2(out).real
