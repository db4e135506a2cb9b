"""Pullback contraction of the p-Laplace OU process (p = 4).

Two far-apart starting states are pulled back over growing times and their
squared distance at time 0 is compared with the closed-form envelope.
"""
import numpy as np

from levy_attractors.conditions import check_strong_monotonicity
from levy_attractors.function_space import BasisSpec, build_triple
from levy_attractors.levy_noise import NoiseSpec, sample_path, trace_class_q
from levy_attractors.models import p_laplace
from levy_attractors.ou import contraction_bound, pullback_solve

T = build_triple(BasisSpec(dimension=1, length=1.0, boundary="dirichlet", mode_count=16, v_order=1,
                           v_exponent=4.0))
M = p_laplace(T, 4.0)
c_est = check_strong_monotonicity(M, 500, seed=0).estimates["c_mono_est"]
path = sample_path(NoiseSpec(q=tuple(trace_class_q(8, 8)), base_dt=2.0 ** -8, horizon=(-8.0, 0.0),
                             jump_rate=1.0, jump_scale=(0.5,) * 8), seed=0)

x = np.zeros(16)
x[0] = 10.0
for elapsed in (0.25, 0.5, 1.0, 2.0, 4.0):
    d = pullback_solve(M, 1.0, path, -elapsed, 0.0, x) - pullback_solve(M, 1.0, path, -elapsed, 0.0, -x)
    env = contraction_bound(4.0, c_est, 1.0, T.embedding_constant, elapsed)
    print(f"t - s = {elapsed:4.2f}: |X x - X y|^2 = {d @ d:.3e}   envelope {env:.3e}")
