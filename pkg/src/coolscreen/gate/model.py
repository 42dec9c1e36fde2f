"""GATE multi-task model and the single-task baseline."""

from dataclasses import asdict

import numpy as np

from .. import nncore as nn
from ..encoder import Encoder, EncoderConfig, GraphBatch, featurize

HEAD_HIDDEN = 32
TRANSFER_HIDDEN = 32


class _Predictor(nn.Module):
    """Shared pieces: encoder, per-task heads, label scaling."""

    def _init_common(self, tasks, encoder_config, seed):
        self._tasks = tuple(tasks)
        self._seed = int(seed)
        self._encoder_config = encoder_config
        self.encoder = Encoder(encoder_config, nn.make_rng(seed, "encoder"))
        d = encoder_config.latent
        self.heads = {t: nn.MLP([d, HEAD_HIDDEN, 1], nn.make_rng(seed, "head", t)) for t in self._tasks}
        self._label_mean = np.zeros(len(self._tasks))
        self._label_std = np.ones(len(self._tasks))

    @property
    def tasks(self):
        return self._tasks

    @property
    def latent_dim(self):
        return self._encoder_config.latent

    def set_label_scaling(self, mean, std):
        self._label_mean = np.asarray(mean, dtype=float).copy()
        self._label_std = np.asarray(std, dtype=float).copy()

    def scale_labels(self, Y):
        return (Y - self._label_mean) / self._label_std

    def latent(self, graphs):
        """Latent ``z`` rows for a list of graphs (inference path)."""
        if not graphs:
            return np.zeros((0, self.latent_dim))
        return self.encoder.infer(GraphBatch([featurize(g) for g in graphs]))

    def predict_scaled(self, z):
        return np.hstack([self.heads[t].infer(z) for t in self._tasks])

    def predict_latent(self, z):
        """Predictions in task units from latent rows."""
        return self.predict_scaled(z) * self._label_std + self._label_mean

    def predict_many(self, graphs):
        return self.predict_latent(self.latent(graphs))

    def weights(self):
        state = self.state_dict()
        state["label_mean"] = self._label_mean.reshape(1, -1).copy()
        state["label_std"] = self._label_std.reshape(1, -1).copy()
        return state

    def load_weights(self, state):
        state = dict(state)
        self.set_label_scaling(state.pop("label_mean").ravel(), state.pop("label_std").ravel())
        self.load_state_dict(state)

    def hyperparameters(self):
        return {
            "kind": type(self).__name__,
            "tasks": list(self._tasks),
            "seed": self._seed,
            "encoder": asdict(self._encoder_config),
        }


class GateModel(_Predictor):
    """Shared encoder; per task a head, a transfer net onto the shared
    manifold and an inverse transfer net back to latent coordinates."""

    def __init__(self, tasks, encoder_config=None, seed=0):
        encoder_config = encoder_config or EncoderConfig()
        self._init_common(tasks, encoder_config, seed)
        d = encoder_config.latent
        self.transfer = {t: nn.MLP([d, TRANSFER_HIDDEN, d], nn.make_rng(seed, "transfer", t)) for t in self._tasks}
        self.inverse = {t: nn.MLP([d, TRANSFER_HIDDEN, d], nn.make_rng(seed, "inverse", t)) for t in self._tasks}

    def manifold_latent(self, z):
        """Consensus manifold point: mean over tasks of transfer_t(z)."""
        return np.mean([self.transfer[t].infer(z) for t in self._tasks], axis=0)

    def manifold(self, graphs):
        return self.manifold_latent(self.latent(graphs))


class StlModel(_Predictor):
    """Encoder + regression head for one task; no transfer modules."""

    def __init__(self, task, encoder_config=None, seed=0):
        self._init_common([task], encoder_config or EncoderConfig(), seed)

    @property
    def task(self):
        return self._tasks[0]


def build_model(hyper):
    enc = EncoderConfig(**hyper["encoder"])
    if hyper["kind"] == "StlModel":
        return StlModel(hyper["tasks"][0], enc, hyper["seed"])
    return GateModel(hyper["tasks"], enc, hyper["seed"])


def save_model(path, model, extra=None):
    hyper = model.hyperparameters()
    if extra:
        hyper.update(extra)
    return nn.save_weights(path, model.weights(), hyper)


def load_model(path):
    tensors, hyper = nn.load_weights(path)
    model = build_model(hyper)
    model.load_weights(tensors)
    return model, hyper
