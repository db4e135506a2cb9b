import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_triple
from levy_attractors.conditions import GateError
from levy_attractors.levy_noise import NoiseSpec, sample_path, trace_class_q
from levy_attractors.models import laplacian, p_laplace, burgers_rde
from levy_attractors.ou import (OUConfig, StationarySection, birkhoff_average, choose_sigma,
                                contraction_bound, h_power, load_section, moment_bound_check,
                                moment_gate, ou_states, pullback_solve, save_section,
                                stationary_section, sublinear_growth_check)

DT = 2.0 ** -5


def noise(n, horizon=(-16.0, 1.0), q=None, seed=0, **kw):
    q = trace_class_q(n, n) if q is None else q
    return sample_path(NoiseSpec(q=tuple(q), base_dt=DT, horizon=horizon, **kw), seed)


def test_zero_noise_zero_start_stays_zero():
    T = make_triple(n=8)
    p = noise(8, q=np.zeros(8))
    times, states = ou_states(laplacian(T), 1.0, p, -4.0, 1.0, np.zeros(8))
    assert not np.any(states)


@pytest.mark.parametrize("scheme", ["exponential", "implicit-euler"])
def test_deterministic_decay(scheme):
    T = make_triple(n=6)
    M = laplacian(T)
    p = noise(6, q=np.zeros(6))
    x = np.ones(6)
    sigma, s, t = 0.5, -1.0, 0.0
    n = round((t - s) / DT)
    got = pullback_solve(M, sigma, p, s, t, x, scheme=scheme)
    w = T.weights
    ref = np.exp(-sigma * w * (t - s)) if scheme == "exponential" else (1 + sigma * w * DT) ** (-n)
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-300)


def test_exponential_integrator_matches_scalar_recurrence():
    T = make_triple(n=2, length=2.0)
    M = laplacian(T)
    p = noise(2, q=(1.0, 0.5), horizon=(-4.0, 1.0), jump_rate=1.0, jump_scale=(0.3, 0.2))
    sigma = 0.7
    times, states = ou_states(M, sigma, p, -4.0, 1.0, np.array([0.5, -0.25]))
    for k in range(2):
        w = T.weights[k]
        z = sigma * w * DT
        e = math.exp(-z)
        gf = math.sqrt((1 - math.exp(-2 * z)) / (2 * z))
        x = [0.5, -0.25][k]
        ref = [x]
        for n in range(len(times) - 1):
            i = p.index(times[n]) - p.n_lo
            x = e * x + gf * p.gauss[i, k]
            for j in np.nonzero(p.jump_interval == p.index(times[n]))[0]:
                x += math.exp(-sigma * w * p.jump_offset[j]) * p.jump_marks[j, k]
            ref.append(x)
        assert np.allclose(states[:, k], ref, rtol=0, atol=1e-12)


def test_beta_must_vanish():
    T = make_triple(n=8)
    with pytest.raises(ValueError):
        OUConfig(model=burgers_rde(T, {"slope": 1.0}), sigma=1.0)
    with pytest.raises(ValueError):
        OUConfig(model=laplacian(T), sigma=1.0, schedule=(-1.0, -1.0))


def test_zero_noise_section_is_zero():
    T = make_triple(n=8)
    cfg = OUConfig(model=laplacian(T), sigma=1.0, schedule=(-2.0, -4.0))
    sec = stationary_section(cfg, noise(8, q=np.zeros(8)), (-1.0, 1.0))
    assert sec.converged and sec.depth == 4.0
    assert not np.any(sec.values)


def test_gaps_decay_like_linear_contraction():
    T = make_triple(n=8, length=np.pi)
    M = laplacian(T)
    sigma = 1.0
    p = noise(8, horizon=(-24.0, 1.0))
    starts = [-2.0 - 2 * k for k in range(11)]
    cfg = OUConfig(model=M, sigma=sigma, schedule=starts, cauchy_tol=1e-300)
    sec = stationary_section(cfg, p, (-1.0, 0.0))
    assert not sec.converged and len(sec.gaps) == 10
    slope = np.polyfit(-np.array(starts[:-1]), np.log(sec.gaps), 1)[0]
    # gap after depth d ~ e^{-sigma lambda d}; lambda = 1 here
    assert slope == pytest.approx(-sigma * T.embedding_constant, rel=0.15)


def test_section_independent_of_start_state(rng):
    T = make_triple(n=8)
    cfg = OUConfig(model=laplacian(T), sigma=1.0, schedule=(-4.0, -6.0, -8.0, -10.0), cauchy_tol=1e-9)
    p = noise(8)
    a = stationary_section(cfg, p, (-2.0, 1.0))
    b = stationary_section(cfg, p, (-2.0, 1.0), x0=rng.standard_normal(8) * 10)
    assert a.converged and b.converged
    assert np.max(np.abs(a.values - b.values)) <= 2 * cfg.cauchy_tol


def test_section_shift_relabels_times():
    T = make_triple(n=4)
    cfg = OUConfig(model=laplacian(T), sigma=1.0, schedule=(-4.0, -8.0))
    sec = stationary_section(cfg, noise(4), (-2.0, 1.0))
    sh = sec.shifted(0.5)
    assert np.array_equal(sh.at(-1.0), sec.at(-0.5))
    with pytest.raises(ValueError):
        sec.at(2.0)


def test_nonlinear_ou_section_converges():
    T = make_triple(n=8, v_exponent=4.0)
    M = p_laplace(T, 4.0)
    cfg = OUConfig(model=M, sigma=50.0, schedule=(-2.0, -3.0, -4.0), cauchy_tol=1e-8)
    assert cfg.resolved_scheme == "implicit-euler"
    sec = stationary_section(cfg, noise(8, horizon=(-4.0, 1.0)), (-1.0, 1.0))
    assert sec.converged


def test_contraction_bound():
    assert contraction_bound(4.0, 1.0, 1.0, 1.0, 1.0) == 1.0
    b = [contraction_bound(4.0, 0.5, 2.0, 3.0, e) for e in (1, 2, 4, 8)]
    assert all(x > y for x, y in zip(b, b[1:]))
    assert contraction_bound(2.0, 1.0, 1.0, 2.0, 1.0) == pytest.approx(math.exp(-2.0))
    with pytest.raises(ValueError):
        contraction_bound(4.0, 1.0, 1.0, 1.0, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(2.1, 8.0), st.floats(0.1, 10.0), st.floats(0.1, 10.0))
def test_contraction_bound_formula(alpha, c_sigma, elapsed):
    b = contraction_bound(alpha, c_sigma, 1.0, 1.0, elapsed)
    assert b == pytest.approx(((alpha / 2 - 1) * c_sigma * elapsed) ** (-2 / (alpha - 2)), rel=1e-12)
    assert b > contraction_bound(alpha, c_sigma, 1.0, 1.0, 2 * elapsed)


def constant_section(c, n=65):
    times = -DT * np.arange(n)[::-1]
    return StationarySection(times, np.tile(c, (n, 1)), 0.0, 1.0, True, [0.0], DT, 1.0)


def test_birkhoff_constant_section():
    c = np.array([1.0, -2.0, 0.5])
    res = birkhoff_average(constant_section(c), h_power(2))
    assert np.allclose(res.averages, np.dot(c, c), rtol=1e-14)
    assert res.relative_fluctuation < 1e-14


def test_birkhoff_linear_ou_average():
    # long section of a 4-mode linear OU; batch means give the standard error
    T = make_triple(n=4, length=np.pi)
    q = np.array([1.0, 0.25, 1 / 9, 1 / 16])
    spec = NoiseSpec(q=tuple(q), base_dt=DT, horizon=(-1040.0, 0.0))
    p = sample_path(spec, 42)
    cfg = OUConfig(model=laplacian(T), sigma=1.0, schedule=(-1032.0, -1040.0), cauchy_tol=1e-6)
    sec = stationary_section(cfg, p, (-1024.0, 0.0))
    res = birkhoff_average(sec, h_power(2), min_window=64.0)
    expected = float(np.sum(q / (2 * T.weights)))
    vals = np.sum(sec.values ** 2, axis=1)[1:].reshape(64, -1).mean(axis=1)
    se = vals.std(ddof=1) / 8
    assert abs(res.final - expected) < 3 * se


def test_sublinear_growth():
    T = make_triple(n=8)
    cfg = OUConfig(model=laplacian(T), sigma=1.0, schedule=(-40.0,))
    sec = stationary_section(cfg, noise(8, horizon=(-40.0, 0.0)), (-32.0, 0.0))
    rep = sublinear_growth_check(sec)
    assert rep.passed and rep.ratios[-1] < rep.ratios[0]
    zero = sublinear_growth_check(constant_section(np.zeros(3)))
    assert np.all(zero.ratios == 0)


def test_moment_gate_and_check():
    assert moment_gate(1.0, 2.0, 1.0, np.pi ** 2) == pytest.approx(8 / (2 * np.pi ** 2))
    assert moment_gate(1.0, 2.0, 1.0, np.pi ** 2) == pytest.approx(0.40528473456935, rel=1e-12)
    T = make_triple(n=8)
    M = laplacian(T)
    est = []
    for sigma in (1.0, 2.0):
        cfg = OUConfig(model=M, sigma=sigma, schedule=(-8.0, -12.0))
        secs = [stationary_section(cfg, noise(8, horizon=(-12.0, 0.0), seed=s), (-4.0, 0.0))
                for s in range(4)]
        est.append(moment_bound_check(secs, 1.0, 2.0, 2.0, T.embedding_constant, 2.0, T).estimate)
    assert 0 < est[1] / est[0] < 1
    cfg = OUConfig(model=M, sigma=0.01, schedule=(-8.0,))
    sec = stationary_section(cfg, noise(8, horizon=(-8.0, 0.0)), (-4.0, 0.0))
    with pytest.raises(GateError, match="sigma > 8 delta"):
        moment_bound_check([sec], 1.0, 2.0, 2.0, T.embedding_constant, 2.0, T)


def test_zero_noise_moment_is_zero():
    T = make_triple(n=4)
    r = moment_bound_check([constant_section(np.zeros(4))], 1.0, 2.0, 2.0, 10.0, 2.0, T)
    assert r.estimate == 0.0


def test_choose_sigma():
    assert choose_sigma(lambda s: s >= 5.0, 1.0) == 8.0
    with pytest.raises(GateError):
        choose_sigma(lambda s: False, 1.0, max_doublings=3)


def test_section_file_round_trip():
    T = make_triple(n=4)
    cfg = OUConfig(model=laplacian(T), sigma=1.0, schedule=(-4.0, -8.0))
    sec = stationary_section(cfg, noise(4), (-2.0, 1.0))
    buf = io.BytesIO()
    save_section(sec, buf)
    raw = buf.getvalue()
    assert raw[:8] == b"LEVYTRAJ"
    back = load_section(io.BytesIO(raw))
    assert np.array_equal(back.values, sec.values) and np.array_equal(back.times, sec.times)
    assert back.gaps == sec.gaps and back.converged == sec.converged
