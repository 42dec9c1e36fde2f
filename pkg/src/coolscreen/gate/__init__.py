"""Multi-task geometrically aligned transfer model and the STL baseline."""

from .data import MultiTaskDataset, latent_factors, make_synthetic_tasks, pearson, structure_features
from .losses import EmptyBatch, MissingLabels, loss_auto, loss_cons, loss_dis, loss_map, loss_reg
from .model import GateModel, StlModel, build_model, load_model, save_model
from .train import DivergenceDetected, TrainConfig, TrainResult, gate_step_loss, train_gate, train_stl


def predict(g, model):
    """Per-task predictions (task units) for one molecule, keyed by task."""
    row = model.predict_many([g])[0]
    return dict(zip(model.tasks, (float(v) for v in row)))


def manifold_embed(g, model):
    """Shared-manifold point for one molecule."""
    return model.manifold([g])[0]


__all__ = [
    "DivergenceDetected",
    "EmptyBatch",
    "GateModel",
    "MissingLabels",
    "MultiTaskDataset",
    "StlModel",
    "TrainConfig",
    "TrainResult",
    "build_model",
    "gate_step_loss",
    "latent_factors",
    "load_model",
    "loss_auto",
    "loss_cons",
    "loss_dis",
    "loss_map",
    "loss_reg",
    "make_synthetic_tasks",
    "manifold_embed",
    "pearson",
    "predict",
    "save_model",
    "structure_features",
    "train_gate",
    "train_stl",
]
