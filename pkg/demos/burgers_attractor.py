"""Random attractor of the stochastic Burgers builtin.

Builds the flow exactly as the CLI does, then prints the absorption radius,
the absorption check per depth and the semidistance decay curve.
"""
from levy_attractors import attractor as attr
from levy_attractors.cli import Pipeline, Setup, load_config
from levy_attractors.levy_noise import sample_path

setup = Setup(load_config("burgers-1d"))
path = sample_path(setup.noise, setup.seed)
ou_cfg, flow, info = Pipeline(setup).build_flow(path)
print(f"sigma = {info['sigma']}, E|u_0|_V^2 = {info['birkhoff_expectation']:.4f} "
      f"< {info['birkhoff_bound']:.4f}")

radius = attr.absorption_radius(flow)
print(f"R = {radius.R:.5f}, s0 = {radius.s0}, fitted C = {radius.C:.3e}, c_tilde = {radius.c_tilde:.4f}")

schedule = [-1.0, -2.0, -4.0, -8.0]
family = attr.TemperedFamily("ball", 10.0, n_samples=8)
rep = attr.check_absorption(flow, path, family, schedule, radius.R)
for s, m in zip(schedule, rep.max_sq_norms):
    print(f"s = {s:5.1f}: max |Z(0,s)(x - u_s)|^2 = {m:.3e}")

est = attr.estimate_attractor(flow, path, [family], schedule, 1e-6)
print("decay curve:", ", ".join(f"{d:.2e}" for d in est.curve[0]))
print(f"{est.n_clusters} cluster(s), diameter {est.raw_diameter:.2e}, converged: {est.converged}")
