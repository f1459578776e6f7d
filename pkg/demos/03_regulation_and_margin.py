"""Pose regulation with the energy-shaping controller and its safety margin.

Drives the vehicle to a target pose from a few meters away, logs the shaped
energy (a Lyapunov function: it never increases), and shows the safety margin
staying nonnegative while the position stays inside the certified ball.
"""

import numpy as np

from hamnav import se3
from hamnav.control import default_gains, desired_hamiltonian, dsm, reference_state, regulate
from hamnav.rigid_body import AnalyticModel, hexarotor_params, state_from

params = hexarotor_params()
model = AnalyticModel(params)
gains = default_gains(params)

target = reference_state(se3.pack_coord([0.0, 0.0, 1.0], np.eye(3)))
start = state_from(
    se3.pack_coord([1.6, -1.1, 0.4], se3.so3_exp(np.deg2rad(35) * np.array([0.2, 0.9, 0.4]) / np.linalg.norm([0.2, 0.9, 0.4]))),
    np.zeros(6))

times, states, energies = regulate(start, target, gains, model, model, dt=0.01, steps=1500)
err = np.linalg.norm(states[:, :3] - target[:3], axis=1)
print(f"position error: {err[0]:.3f} m -> {err[-1]:.5f} m after {times[-1]:.0f} s")
print(f"shaped energy: {energies[0]:.4f} J -> {energies[-1]:.2e} J, "
      f"max per-step increase {np.max(np.diff(energies)):.2e}")

# safety margin for a hypothetical obstacle 2.2 m from the target
dbar = 2.2
margins = [dsm(x, target, dbar, gains, model) for x in states]
print(f"margin: min {min(margins):.4f} (stays nonnegative), start {margins[0]:.4f}")
print(f"max excursion from target {err.max():.3f} m <= certified {dbar} m")
assert min(margins) >= 0.0 and err.max() <= dbar
