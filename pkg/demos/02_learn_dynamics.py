"""Learn the dynamics from simulated flights, then inspect the recovered constants.

Uses a reduced dataset and iteration count so it finishes in about a minute;
the full protocol (432 windows, 5000 iterations) lives behind `hamnav train`.
The learned inverse inertia and input matrix are only determined up to one
shared scale, so the inspection normalizes by that gauge factor.
"""

import numpy as np

from hamnav import se3
from hamnav.learning import LearnedModelView, TrainConfig, generate_dataset, train
from hamnav.rigid_body import hexarotor_params

params = hexarotor_params()
print("generating 96 constant-input windows of simulated flight...")
dataset = generate_dataset(params, n_windows=96, horizon=5, seed=3)

cfg = TrainConfig(iterations=400, learning_rate=1e-3, seed=3)
print("training for 400 iterations...")
model, history = train(dataset, cfg, mass=params.mass)
print(f"loss: {history[0]:.4g} -> {history[-1]:.4g} "
      f"({history[0] / history[-1]:.0f}x decrease)")

view = LearnedModelView(model)
q = se3.pack_coord([0, 0, 0], np.eye(3))
jinv_learned = view.minv(q)[3:, 3:]
b_learned = view.b(q)
gamma = float(np.mean(np.diag(b_learned)[3:]))
jinv_true = np.linalg.inv(params.inertia)

print("\nlearned inverse inertia (gauge-normalized) vs truth:")
print(np.round(gamma * np.diag(jinv_learned), 1), " vs ", np.round(np.diag(jinv_true), 1))
print("learned input matrix diagonal (force block should be ~1, torque block ~gamma):")
print(np.round(np.diag(b_learned), 4), f"   gamma ~ {gamma:.4f}")
