import math

import numpy as np
import pytest

from conftest import make_triple, torus
from levy_attractors.conditions import (AMPLITUDES, GateError, certify, check_admissibility,
                                        check_coercivity, check_eta_rho, check_growth,
                                        check_hemicontinuity, check_local_monotonicity,
                                        check_strong_monotonicity, estimate_gn_constant,
                                        gn_ratio, sample_fields, sample_pairs,
                                        validate_gn_exponents)
from levy_attractors.models import (ConstantsRecord, burgers_rde, cahn_hilliard,
                                    kuramoto_sivashinsky, laplacian, nse2d, p_laplace)


def test_sample_fields_ladder(rng):
    T = make_triple(n=8)
    vs = sample_fields(T, rng, 60)
    norms = np.linalg.norm(vs, axis=1)
    assert np.allclose(norms[:3], AMPLITUDES[0])
    assert np.allclose(norms[3:6], AMPLITUDES[1])
    a, b = sample_pairs(T, rng, 8)
    s = -b[1] / a[1]
    assert np.allclose(s, s[0])


def test_linear_laplacian_monotonicity_margins():
    T = make_triple(n=16)
    L = laplacian(T)
    e = check_local_monotonicity(L, 100, 0)
    assert e.passed and e.estimates["C_est"] == 0.0
    s = check_strong_monotonicity(L, 100, 0)
    assert s.passed
    assert np.all(np.abs(s.margins) < 1e-12)
    assert s.estimates["c_mono_est"] == pytest.approx(2.0, rel=1e-12)


def test_laplacian_coercivity_is_equality():
    T = make_triple(n=16)
    e = check_coercivity(laplacian(T), 60, 0)
    assert e.passed
    assert np.all(np.abs(e.margins) < 1e-12)


def test_p_laplace_strongly_monotone():
    T = make_triple(n=16, v_exponent=4.0)
    M = p_laplace(T, 4.0)
    e = check_strong_monotonicity(M, 400, 3)
    assert e.passed and e.worst_margin <= 0
    assert e.estimates["c_mono_est"] >= M.constants.c_mono


def test_nse_local_monotonicity_reports_constant():
    T = torus(4)
    e = check_local_monotonicity(nse2d(T), 100, 1)
    assert e.passed
    assert e.estimates["C_est"] >= 0.0


def test_burgers_coercivity_matches_laplacian():
    T = make_triple(n=16)
    b = check_coercivity(burgers_rde(T, {"slope": 1.0}), 60, 0)
    lap = check_coercivity(burgers_rde(T), 60, 0)
    assert b.passed and lap.passed
    assert np.allclose(b.margins, lap.margins, atol=1e-9)


def test_ch_coercivity_estimate_within_closed_form():
    T = make_triple("neumann", n=16, v_order=2, length=np.pi / 2)
    A = cahn_hilliard(T, {"linear": -0.4})
    e = check_coercivity(A, 200, 0)
    assert e.passed
    c_phi, c_gn = A.params["C_phi"], A.params["C_GN"]
    assert e.estimates["K_est"] <= c_phi ** 2 * c_gn ** 4 / 2 + 1e-9


def test_eta_rho_trivial_and_subadditive():
    T = make_triple(n=8)
    e = check_eta_rho(laplacian(T), 30, 0)
    assert e.passed and e.estimates["C_est"] == 0.0
    e = check_eta_rho(nse2d(torus(4)), 30, 0)
    assert e.passed and e.estimates["C_subadditive"] <= 8.0
    kse = kuramoto_sivashinsky(make_triple("periodic", n=8, length=np.pi, v_order=2))
    e = check_eta_rho(kse, 30, 0)
    assert e.estimates["C_subadditive"] <= 1.0 + 1e-12


def test_growth_and_hemicontinuity():
    T = make_triple(n=8)
    A = burgers_rde(T, {"slope": 1.0})
    assert check_growth(A, 60, 0).passed
    assert check_hemicontinuity(A, 10, 0).passed


def test_certify_report_format():
    T = make_triple(n=8, v_exponent=4.0)
    r = certify(p_laplace(T, 4.0), budget=40, seed=2)
    assert r.passed
    text = r.to_text()
    assert "overall: PASS" in text and "[strong_monotonicity]" in text
    rows = r.to_csv().splitlines()
    assert rows[0] == "condition,sample,margin" and len(rows) > 40
    assert "strong_monotonicity.c_mono_est" in r.estimates()


def test_certify_detects_wrong_constant():
    T = make_triple(n=8)
    e = check_strong_monotonicity(laplacian(T), 40, 0, c_mono=3.0)
    assert not e.passed
    assert set(e.witness) == {"v1", "v2"}


def test_gn_single_sine_mode_closed_form():
    # |u|_inf <= C |u_x|^(1/2) |u|^(1/2): for sqrt2 sin(pi x), ratio = sqrt2 / sqrt(pi)
    T = make_triple(n=8)
    c = np.eye(8)[0]
    r = gn_ratio(T, c, (0, math.inf, 1, 0.5))
    # the sup is taken on the collocation grid, which misses x = 1/2
    assert r == pytest.approx(math.sqrt(2) / math.sqrt(math.pi), rel=1e-2)
    assert r <= math.sqrt(2) / math.sqrt(math.pi)


def test_gn_exponent_validation():
    validate_gn_exponents(1, 0, math.inf, 1, 0.5)
    with pytest.raises(ValueError):
        validate_gn_exponents(1, 1, 2.0, 2, 0.25)
    with pytest.raises(ValueError):
        validate_gn_exponents(1, 0, 4.0, 1, 0.5)


def test_gn_estimate_holds_on_holdout():
    T = make_triple(n=8)
    target = (0, math.inf, 1, 0.5)
    C = estimate_gn_constant(T, target, budget=400, seed=0)
    fresh = sample_fields(T, np.random.default_rng(99), 10_000)
    assert max(gn_ratio(T, v, target) for v in fresh) <= C * (1 + 1e-9)


def test_gate_arithmetic():
    T = make_triple(n=8)
    k = ConstantsRecord(alpha=2, beta=2, gamma=0.5, K=1.0)
    r = check_admissibility(k, T)
    assert r.passed
    assert r.gates[1].bound == pytest.approx(np.pi ** 2 / 8)
    assert r.gates[0].slack == 0.0 and r.gates[0].passed


def test_gate_refusal_names_the_gate():
    T = make_triple(n=8)
    k = ConstantsRecord(alpha=2, beta=2, gamma=0.5, K=np.pi ** 2 / 8)
    with pytest.raises(GateError, match="dissipativity K < gamma\\*lambda/4"):
        check_admissibility(k, T).raise_if_failed()


def test_ch_boundary_is_excluded():
    T = make_triple("neumann", n=8, v_order=2, length=np.pi / 2)
    lam = T.embedding_constant
    c_gn = 0.9
    bound = math.sqrt(lam) / (2 * c_gn ** 2)
    A = cahn_hilliard(T, {"linear": -bound}, c_gn=c_gn)
    r = check_admissibility(A.constants, T, A.params)
    assert [g.name for g in r.failures()][-1] == "C_phi < sqrt(lambda)/(2 C_GN^2)"


def test_moment_gate():
    T = make_triple(n=8)
    k = laplacian(T).constants
    # c = 2 for the Laplacian: 8 delta / (p c lambda) = 8 / (2 * 2 * pi^2)
    r = check_admissibility(k, T, sigma=0.25, moment=(1.0, 2.0))
    assert r.passed and -r.gates[-1].bound == pytest.approx(2 / np.pi ** 2)
    assert not check_admissibility(k, T, sigma=0.2, moment=(1.0, 2.0)).passed
