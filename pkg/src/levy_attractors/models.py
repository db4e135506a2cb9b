"""Drift operators A: V -> V* with their monotone parts M and constants.

Each operator maps a coefficient vector to the dual coefficient vector
f_k = <A(v), e_k>, so that pairing(A(v), w) = f . w.  Nonlinear terms are
weak forms evaluated by quadrature on the padded grid of the triple.
"""

import math
from dataclasses import dataclass, asdict, field

import numpy as np

from .function_space import BasisSpec, ConfigurationError, build_triple


@dataclass(frozen=True)
class ConstantsRecord:
    alpha: float
    beta: float
    gamma: float
    K: float = 0.0
    C: float = 0.0
    c_mono: float = 1.0
    kappa: float = 0.0
    sigma: float = 1.0
    estimated: tuple = ()

    def __post_init__(self):
        if self.alpha < 2:
            raise ValueError("alpha must be >= 2")
        if self.beta < 0 or self.gamma <= 0 or self.K < 0 or self.C < 0:
            raise ValueError("constants out of range")
        if self.beta * (self.alpha - 1) > 2 + 1e-12:
            raise ValueError(f"beta*(alpha-1) = {self.beta * (self.alpha - 1):g} exceeds 2")

    def to_dict(self):
        d = asdict(self)
        d["estimated"] = list(self.estimated)
        return d

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return ConstantsRecord(**d)


def _zero(c):
    return 0.0


@dataclass(eq=False)
class ModelOperator:
    """A Galerkin drift.

    ``diagonal`` is the stiff linear part treated implicitly (dual coefficients
    diagonal * c); when ``newton`` is set the implicit part is the nonlinear
    monotone operator ``implicit_apply`` with Jacobian ``implicit_jacobian``.
    """

    name: str
    triple: object
    apply: callable
    constants: ConstantsRecord
    monotone: "ModelOperator | None" = None
    eta: callable = _zero
    rho: callable = _zero
    diagonal: np.ndarray | None = None
    implicit_apply: callable = None
    implicit_jacobian: callable = None
    linear: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.implicit_apply is None:
            d = self.diagonal if self.diagonal is not None else np.zeros(self.triple.size)
            self.diagonal = np.asarray(d, dtype=float)
            self.implicit_apply = lambda c, d=self.diagonal: d * c
            self.implicit_jacobian = lambda c, d=self.diagonal: np.diag(d)
            self.newton = False
        else:
            self.newton = True

    def __call__(self, c):
        return self.apply(c)


def scaled(model, factor, name=None):
    """factor * model, keeping the implicit structure."""
    factor = float(factor)
    base = model
    out = ModelOperator(
        name=name or f"{factor:g}*{model.name}",
        triple=model.triple,
        apply=lambda c: factor * base.apply(c),
        constants=model.constants.replace(gamma=factor * model.constants.gamma,
                                          c_mono=factor * model.constants.c_mono,
                                          C=factor * model.constants.C,
                                          K=factor * model.constants.K),
        monotone=model.monotone,
        eta=lambda c: factor * base.eta(c),
        rho=lambda c: factor * base.rho(c),
        diagonal=None if model.newton else factor * model.diagonal,
        implicit_apply=(lambda c: factor * base.implicit_apply(c)) if model.newton else None,
        implicit_jacobian=(lambda c: factor * base.implicit_jacobian(c)) if model.newton else None,
        linear=model.linear,
        params=dict(model.params, scale=factor),
    )
    return out


def _require(triple, name, **req):
    spec = triple.spec
    for key, val in req.items():
        have = getattr(spec, key)
        ok = have in val if isinstance(val, tuple) else have == val
        if not ok:
            raise ConfigurationError(key, f"model {name} requires {key}={val!r}, got {have!r}")


# -- linear monotone parts -----------------------------------------------------

def laplacian(triple, coefficient=1.0):
    """coefficient * Delta on a v_order 1 Hilbert triple (or the H^-1 pivot)."""
    if triple.is_hilbert:
        _require(triple, "laplacian", v_order=1)
    elif triple.spec.v_order != 0:
        raise ConfigurationError("v_order", "laplacian needs a Hilbert or H^-1 pivot triple")
    d = -coefficient * triple.eigenvalues
    consts = ConstantsRecord(alpha=2, beta=0, gamma=2 * coefficient, c_mono=2 * coefficient)
    return ModelOperator(name="laplacian", triple=triple, apply=lambda c: d * c,
                         constants=consts, diagonal=d, linear=True,
                         params={"coefficient": coefficient})


def bilaplacian(triple, coefficient=1.0):
    """-coefficient * Delta^2 on a v_order 2 triple."""
    _require(triple, "bilaplacian", v_order=2)
    d = -coefficient * triple.eigenvalues ** 2
    consts = ConstantsRecord(alpha=2, beta=0, gamma=2 * coefficient, c_mono=2 * coefficient)
    return ModelOperator(name="bilaplacian", triple=triple, apply=lambda c: d * c,
                         constants=consts, diagonal=d, linear=True,
                         params={"coefficient": coefficient})


def _with_monotone(model):
    model.monotone = model
    return model


# -- scalar nonlinearities -----------------------------------------------------

@dataclass(frozen=True)
class Polynomial1D:
    """g(x) = constant + linear x + power * |x|^(exponent-1) x + tanh_coef tanh(x)."""

    constant: float = 0.0
    linear: float = 0.0
    power: float = 0.0
    exponent: float = 2.0
    tanh_coef: float = 0.0

    @classmethod
    def from_spec(cls, spec):
        if spec is None:
            return cls()
        if isinstance(spec, cls):
            return spec
        return cls(**spec)

    def __call__(self, x):
        out = self.linear * x + self.constant
        if self.power:
            out = out + self.power * np.abs(x) ** (self.exponent - 1) * x
        if self.tanh_coef:
            out = out + self.tanh_coef * np.tanh(x)
        return out

    def derivative(self, x):
        out = np.full_like(x, self.linear, dtype=float)
        if self.power:
            out = out + self.power * self.exponent * np.abs(x) ** (self.exponent - 1)
        if self.tanh_coef:
            out = out + self.tanh_coef / np.cosh(x) ** 2
        return out

    @property
    def growth(self):
        """Growth exponent p with |g(x)| <= C(1 + |x|^p)."""
        return self.exponent if self.power else (1.0 if (self.linear or self.tanh_coef) else 0.0)

    def lower_slope(self):
        """C_phi with g' >= -C_phi (requires power >= 0 when exponent > 1)."""
        low = self.linear + min(self.tanh_coef, 0.0)
        return max(0.0, -low)

    def lipschitz_type(self):
        """L with |g(x)-g(y)| <= L (1 + |x|^(p-1) + |y|^(p-1)) |x - y|."""
        return abs(self.linear) + abs(self.tanh_coef) + abs(self.power) * self.exponent

    def is_zero(self):
        return not (self.constant or self.linear or self.power or self.tanh_coef)


# -- catalog -------------------------------------------------------------------

def burgers_rde(triple, f_lip=None, f0_spec=None):
    """Delta u + f_1(u) u_x + f_0(u) in 1D (Dirichlet or zero-mean periodic).

    f_lip = {"slope": a} gives f_1(x) = a x (a = 1 is classical Burgers);
    f0_spec is a Polynomial1D spec with growth exponent at most 2.
    """
    _require(triple, "burgers_rde", dimension=1, v_order=1, boundary=("dirichlet", "periodic"))
    if not triple.is_hilbert:
        raise ConfigurationError("v_exponent", "burgers_rde needs a Hilbert triple")
    slope = float((f_lip or {}).get("slope", 0.0))
    f0 = Polynomial1D.from_spec(f0_spec)
    if f0.power and f0.exponent > 2:
        raise ConfigurationError("f0_spec", f"growth exponent r={f0.exponent:g} > 2 is outside the variational setting")
    if f0.power > 0 and f0.exponent > 1:
        raise ConfigurationError("f0_spec", "superlinear reaction must be dissipative (power <= 0)")
    phi, dphi, w = triple.synthesis, triple.synthesis_dx, triple.quad_weight
    d = -triple.eigenvalues
    f0_zero = f0.is_zero()

    def apply(c):
        out = d * c
        if slope or not f0_zero:
            u = phi @ c
            g = np.zeros_like(u)
            if slope:
                g = g + slope * u * (dphi @ c)
            if not f0_zero:
                g = g + f0(u)
            out = out + w * (phi.T @ g)
        return out

    # 2<f0(u), u> <= 2 max(linear, 0)|u|^2 + |u|^2 + constant^2 L (power term dissipative)
    K = 2 * max(f0.linear, 0.0) + 2 * abs(f0.tanh_coef) + (1.0 if f0.constant else 0.0)
    C = f0.constant ** 2 * triple.L
    rho_coef = 0.375 * abs(slope) ** (4.0 / 3.0)
    weights = triple.weights

    def rho(c):
        return rho_coef * float(np.dot(weights * c, c)) ** (2.0 / 3.0)

    consts = ConstantsRecord(alpha=2, beta=2, gamma=0.5, K=K,
                             C=C + 2 * max(f0.linear, 0.0) + 2 * abs(f0.tanh_coef),
                             c_mono=2.0, kappa=0.0, estimated=("C",))
    model = ModelOperator(name="burgers_rde", triple=triple, apply=apply, constants=consts,
                          monotone=laplacian(triple), rho=rho, diagonal=d,
                          linear=(slope == 0 and f0_zero),
                          params={"slope": slope, "f0": asdict(f0)})
    return model


def nse2d(triple, viscosity=1.0, forcing=None):
    """nu P_H Delta u - P_H[(u.grad)u] + f on the divergence-free torus basis."""
    if not triple.spec.divergence_free:
        raise ConfigurationError("divergence_free", "nse2d requires the divergence-free torus basis")
    nu = float(viscosity)
    d = -nu * triple.eigenvalues
    f = np.zeros(triple.size) if forcing is None else np.asarray(forcing, dtype=float)

    def transport(c):
        u = triple.torus_velocity(c)
        g = triple.torus_gradient(c)
        adv = np.einsum("jxy,ijxy->ixy", u, g)
        return -triple.torus_project(adv)

    def apply(c):
        return d * c + transport(c) + f

    rho_coef = 6.75 / nu ** 3

    def rho(c):
        u = triple.torus_velocity(c)
        return rho_coef * float(triple.quad(np.sum(u * u, axis=0) ** 2))

    # 2<f, v> <= nu |v|_V^2 + |f|_{V*}^2 / nu
    C = float(np.dot(f / triple.weights, f)) / nu
    consts = ConstantsRecord(alpha=2, beta=2, gamma=nu, K=0.0, C=C, c_mono=2 * nu, kappa=2.0,
                             estimated=("C",))
    model = ModelOperator(name="nse2d", triple=triple, apply=apply, constants=consts,
                          monotone=laplacian(triple, nu), rho=rho, diagonal=d,
                          params={"viscosity": nu})
    model.transport = transport
    return model


def _ch_nonlinear(triple, phi_fun):
    dd, w, syn = triple.synthesis_dxx, triple.quad_weight, triple.synthesis

    def lap_phi(c):
        return w * (dd.T @ phi_fun(syn @ c))
    return lap_phi


def _ch_constants(triple, phi_fun, c_gn):
    cphi = phi_fun.lower_slope()
    p = max(phi_fun.growth, 1.0)
    if p > 2:
        raise ConfigurationError("phi_spec", "beta*(alpha-1) <= 2 forces growth p <= 2")
    # 2<Delta phi(v), v> <= 2 C_phi C_GN^2 |v|_V |v|_H <= |v|_V^2 + C_phi^2 C_GN^4 |v|_H^2
    K = cphi ** 2 * c_gn ** 4
    return cphi, p, K


def cahn_hilliard(triple, phi_spec=None, c_gn=1.0):
    """-Delta^2 u + Delta phi(u) on the zero-mean cosine basis (v_order 2)."""
    _require(triple, "cahn_hilliard", dimension=1, boundary="neumann", v_order=2)
    phi_fun = Polynomial1D.from_spec(phi_spec)
    if phi_fun.power < 0 and phi_fun.exponent > 1:
        raise ConfigurationError("phi_spec", "phi' must be bounded below (power >= 0)")
    cphi, p, K = _ch_constants(triple, phi_fun, c_gn)
    d = -triple.eigenvalues ** 2
    nonlin = _ch_nonlinear(triple, phi_fun)
    lin_only = not phi_fun.power and not phi_fun.tanh_coef and not phi_fun.constant
    dlin = d - phi_fun.linear * triple.eigenvalues

    def apply(c):
        if lin_only:
            return dlin * c
        return d * c + nonlin(c)

    eta, rho, c3 = _ch_locality(triple, phi_fun, p)
    consts = ConstantsRecord(alpha=2, beta=2 * (p - 1), gamma=1.0, K=K, C=c3, c_mono=2.0,
                             kappa=2.0, estimated=("C",))
    model = ModelOperator(name="cahn_hilliard", triple=triple, apply=apply, constants=consts,
                          monotone=bilaplacian(triple), eta=eta, rho=rho, diagonal=d,
                          linear=lin_only,
                          params={"phi": asdict(phi_fun), "C_phi": cphi, "p": p, "C_GN": c_gn})
    return model


def _ch_locality(triple, phi_fun, p):
    lip = phi_fun.lipschitz_type()
    coef = 3.0 * lip ** 2
    syn = triple.synthesis

    def sup_power(c):
        if p <= 1:
            return 0.0
        return coef * float(np.abs(syn @ c).max()) ** (2 * (p - 1))
    return sup_power, sup_power, coef


def kuramoto_sivashinsky(triple, phi_spec=None, c_gn=1.0):
    """-u_xxxx + (phi(u))_xx - u u_x on the zero-mean periodic basis (v_order 2)."""
    _require(triple, "kuramoto_sivashinsky", dimension=1, boundary="periodic", v_order=2)
    phi_fun = Polynomial1D.from_spec(phi_spec if phi_spec is not None else {"linear": -1.0})
    if phi_fun.power < 0 and phi_fun.exponent > 1:
        raise ConfigurationError("phi_spec", "phi' must be bounded below (power >= 0)")
    cphi, p, K = _ch_constants(triple, phi_fun, c_gn)
    d = -triple.eigenvalues ** 2
    nonlin = _ch_nonlinear(triple, phi_fun)
    syn, dsyn, w = triple.synthesis, triple.synthesis_dx, triple.quad_weight
    lin_phi = not phi_fun.power and not phi_fun.tanh_coef and not phi_fun.constant
    dlin = d - phi_fun.linear * triple.eigenvalues

    def transport(c):
        u = syn @ c
        return -w * (syn.T @ (u * (dsyn @ c)))

    def apply(c):
        base = dlin * c if lin_phi else d * c + nonlin(c)
        return base + transport(c)

    eta_ch, rho_ch, c3 = _ch_locality(triple, phi_fun, p)

    def rho(c):
        return rho_ch(c) + float(np.abs(dsyn @ c).max())

    consts = ConstantsRecord(alpha=2, beta=2, gamma=1.0, K=K, C=c3, c_mono=2.0, kappa=2.0,
                             estimated=("C",))
    model = ModelOperator(name="kuramoto_sivashinsky", triple=triple, apply=apply,
                          constants=consts, monotone=bilaplacian(triple), eta=eta_ch, rho=rho,
                          diagonal=d,
                          params={"phi": asdict(phi_fun), "C_phi": cphi, "p": p, "C_GN": c_gn})
    model.transport = transport
    return model


def check_zero_mean(triple, c):
    """Initial data for the periodic models lives in the zero-mean subspace by construction;
    grid data with a nonzero mean is rejected."""
    values = np.asarray(c, dtype=float)
    if values.shape[-1] != triple.size:
        mean = triple.quad(values) / triple.L
        if abs(mean) > 1e-10 * (1 + np.abs(values).max()):
            raise ValueError("initial data must have zero mean")
        from .function_space import from_grid
        return from_grid(values, triple)
    return values


def p_laplace(triple, p, coefficient=1.0):
    """coefficient * div(|grad v|^(p-2) grad v) on V = W^{1,p}_0."""
    if p < 2:
        raise ConfigurationError("p", "p < 2 (shear thinning) is out of scope")
    _require(triple, "p_laplace", dimension=1, boundary="dirichlet", v_order=1)
    if triple.spec.v_exponent != p:
        raise ConfigurationError("v_exponent", f"p_laplace needs V = W^(1,{p:g}), got v_exponent={triple.spec.v_exponent}")
    k = float(coefficient)
    dsyn, w = triple.synthesis_dx, triple.quad_weight

    def apply(c):
        g = dsyn @ c
        return -k * w * (dsyn.T @ (np.abs(g) ** (p - 2) * g))

    def jac(c):
        g = dsyn @ c
        return -k * (p - 1) * w * (dsyn.T * np.abs(g) ** (p - 2)) @ dsyn

    consts = ConstantsRecord(alpha=p, beta=0, gamma=2 * k, K=0.0, C=k ** (p / (p - 1)),
                             c_mono=2 * k * 2.0 ** (2 - p), kappa=0.0)
    model = ModelOperator(name="p_laplace", triple=triple, apply=apply, constants=consts,
                          implicit_apply=apply, implicit_jacobian=jac, linear=(p == 2),
                          params={"p": p, "coefficient": k})
    return _with_monotone(model)


def porous_media(triple, r, coefficient=1.0):
    """coefficient * Delta(|v|^(r-1) v) on V = L^(r+1) with H = H^-1 as pivot."""
    if r < 1:
        raise ConfigurationError("r", "porous media needs r >= 1")
    _require(triple, "porous_media", dimension=1, boundary="dirichlet", v_order=0)
    if triple.spec.v_exponent != r + 1:
        raise ConfigurationError("v_exponent", f"porous_media needs V = L^{r + 1:g}")
    k = float(coefficient)
    syn, w = triple.synthesis, triple.quad_weight

    def apply(c):
        v = syn @ c
        return -k * w * (syn.T @ (np.abs(v) ** (r - 1) * v))

    def jac(c):
        v = syn @ c
        return -k * r * w * (syn.T * np.abs(v) ** (r - 1)) @ syn

    consts = ConstantsRecord(alpha=r + 1, beta=0, gamma=2 * k, K=0.0, C=k ** ((r + 1) / r),
                             c_mono=2 * k * 2.0 ** (1 - r), kappa=0.0)
    model = ModelOperator(name="porous_media", triple=triple, apply=apply, constants=consts,
                          implicit_apply=apply, implicit_jacobian=jac, linear=(r == 1),
                          params={"r": r, "coefficient": k})
    return _with_monotone(model)


# -- closed-form constants -----------------------------------------------------

def power_law_constants(d, p):
    """(theta, beta, admissible) for power-law fluids in dimension d."""
    if not 2 <= d <= 4:
        raise ValueError("power-law constants are defined for 2 <= d <= 4")
    theta = d / ((d + 2) * p - 2 * d)
    beta = (3 - p) * p / (p - 1)
    admissible = (d + 2) / 2 <= p <= 3 and beta * (p - 1) <= 2
    return theta, beta, admissible


def ladyzhenskaya_pc(d):
    """Critical exponent p_c = 3/2 + sqrt((d+18)/(d+2)) / 2 for the Ladyzhenskaya model."""
    if not 2 <= d <= 6:
        raise ValueError("p_c is derived for 2 <= d <= 6")
    return 1.5 + 0.5 * math.sqrt((d + 18) / (d + 2))


MODEL_BUILDERS = {
    "burgers_rde": burgers_rde,
    "nse2d": nse2d,
    "cahn_hilliard": cahn_hilliard,
    "kuramoto_sivashinsky": kuramoto_sivashinsky,
    "p_laplace": p_laplace,
    "porous_media": porous_media,
    "laplacian": laplacian,
    "bilaplacian": bilaplacian,
}


def build_model(name, triple, params=None):
    if name not in MODEL_BUILDERS:
        raise ConfigurationError("model", f"unknown model {name!r}")
    try:
        return MODEL_BUILDERS[name](triple, **(params or {}))
    except TypeError as exc:
        raise ConfigurationError("params", f"{name}: {exc}") from None
