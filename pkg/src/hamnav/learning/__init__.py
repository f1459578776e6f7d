"""Dynamics learning: dataset generation, model, training, and evaluation."""

from .dataset import (
    Trajectory,
    estimate_input_scales,
    estimate_minv_scale,
    generate_dataset,
    load_dataset,
    save_dataset,
    stack_dataset,
    translate_to_origin,
)
from .model import (
    HamiltonianModel,
    LearnedModelView,
    ModelEval,
    load_model,
    model_eval,
    save_model,
)
from .training import (
    TrainConfig,
    TrainingDiverged,
    batch_loss,
    loss_gradient,
    rollout,
    train,
    tse3_loss,
)

__all__ = [
    "Trajectory", "estimate_input_scales", "estimate_minv_scale", "generate_dataset", "load_dataset",
    "save_dataset", "stack_dataset", "translate_to_origin",
    "HamiltonianModel", "LearnedModelView", "ModelEval", "load_model",
    "model_eval", "save_model",
    "TrainConfig", "TrainingDiverged", "batch_loss", "loss_gradient",
    "rollout", "train", "tse3_loss",
]
