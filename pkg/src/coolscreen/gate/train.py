"""Training loops for GATE and the single-task baseline."""

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .. import nncore as nn
from ..encoder import EncoderConfig, GraphBatch, featurize
from .data import pearson
from .losses import loss_auto, loss_cons, loss_dis, loss_map, loss_reg
from .model import GateModel, StlModel, save_model


class DivergenceDetected(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 600
    batch: int = 512
    lr: float = 5e-5
    weight_decay: float = 0.01
    perturbations: int = 10
    sigma: float = 0.05
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    delta: float = 1.0
    seed: int = 0
    val_fraction: float = 0.1
    hidden: int = 64
    latent: int = 16
    depth: int = 2

    def __post_init__(self):
        if self.perturbations < 1:
            raise ValueError("need at least one perturbation per sample")
        if min(self.alpha, self.beta, self.gamma, self.delta) < 0:
            raise ValueError("loss weights must be non-negative")

    @property
    def encoder_config(self):
        return EncoderConfig(hidden=self.hidden, latent=self.latent, depth=self.depth)


@dataclass
class TrainResult:
    model: object
    history: list
    checkpoint: str = None
    weights_sha256: str = None

    def final_val_r(self, task):
        return self.history[-1]["val_r"][task]


def _label_scaling(Y):
    mean = np.nanmean(Y, axis=0)
    std = np.nanstd(Y, axis=0)
    mean = np.where(np.isnan(mean), 0.0, mean)
    std = np.where((std > 0) & ~np.isnan(std), std, 1.0)
    return mean, std


def gate_step_loss(model, batch, Yb, pair, config, noise):
    """Five-term loss for one minibatch and task pair ``(s, t)``.

    ``Yb`` holds scaled labels (NaN when missing); ``noise`` is the (N*M, d)
    standard normal draw for latent perturbations.  Returns the total and a
    dict of component tensors.
    """
    z = model.encoder(batch)
    parts = {}
    reg = None
    for k, task in enumerate(model.tasks):
        rows = np.flatnonzero(~np.isnan(Yb[:, k]))
        if rows.size == 0:
            continue
        term = loss_reg(Yb[rows, k:k + 1], nn.take_rows(model.heads[task](z), rows))
        reg = term if reg is None else nn.add(reg, term)
    if reg is None:
        raise ValueError("minibatch has no labels")
    parts["reg"] = reg
    terms = [(1.0, reg)]
    if isinstance(model, GateModel):
        s, t = pair
        h_s, h_t = model.transfer[s], model.transfer[t]
        m_s, m_t = h_s(z), h_t(z)
        auto = loss_auto(z, model.inverse[s](m_s))
        if t != s:
            auto = nn.scale(nn.add(auto, loss_auto(z, model.inverse[t](m_t))), 0.5)
        rows = np.flatnonzero(~np.isnan(Yb[:, model.tasks.index(t)]))
        k = model.tasks.index(t)
        mapped = model.heads[t](model.inverse[t](m_s))
        parts["auto"] = auto
        parts["cons"] = loss_cons(m_s, m_t)
        parts["map"] = loss_map(Yb[rows, k:k + 1], nn.take_rows(mapped, rows))
        M = config.perturbations
        perturbed = nn.add(nn.repeat_rows(z, M), nn.Tensor(config.sigma * noise))
        parts["dis"] = loss_dis(z, perturbed, h_s, h_t)
        terms += [
            (config.alpha, parts["auto"]),
            (config.beta, parts["cons"]),
            (config.gamma, parts["map"]),
            (config.delta, parts["dis"]),
        ]
    return nn.weighted_sum(terms), parts


def _sample_pair(tasks_present, rng):
    if len(tasks_present) == 1:
        return tasks_present[0], tasks_present[0]
    i, j = rng.choice(len(tasks_present), size=2, replace=False)
    return tasks_present[i], tasks_present[j]


def _fit(model, train, val, config, log_path=None, checkpoint=None):
    seed = config.seed
    cols = [train.task_index(t) for t in model.tasks]
    Y = train.Y[:, cols]
    keep = np.flatnonzero(~np.all(np.isnan(Y), axis=1))
    if keep.size == 0:
        raise ValueError("no labelled training molecules")
    Y = Y[keep]
    mean, std = _label_scaling(Y)
    model.set_label_scaling(mean, std)
    Ys = model.scale_labels(Y)
    feats = [featurize(train.graphs[i]) for i in keep]
    val_feats = GraphBatch([featurize(g) for g in val.graphs]) if len(val) else None
    val_Y = val.Y[:, [val.task_index(t) for t in model.tasks]] if len(val) else None

    params = model.parameters()
    opt = nn.AdamW(params, lr=config.lr, weight_decay=config.weight_decay)
    shuffle_rng = nn.make_rng(seed, "shuffle")
    pair_rng = nn.make_rng(seed, "pairs")
    perturb_rng = nn.make_rng(seed, "perturb")
    n = len(keep)
    bs = min(config.batch, n)
    history = []
    log = open(log_path, "w") if log_path else None
    try:
        for epoch in range(1, config.epochs + 1):
            order = shuffle_rng.permutation(n)
            sums = {}
            steps = 0
            for start in range(0, n, bs):
                idx = order[start:start + bs]
                batch = GraphBatch([feats[i] for i in idx])
                Yb = Ys[idx]
                present = [t for k, t in enumerate(model.tasks) if np.any(~np.isnan(Yb[:, k]))]
                pair = _sample_pair(present, pair_rng) if isinstance(model, GateModel) else None
                noise = None
                if isinstance(model, GateModel):
                    noise = perturb_rng.standard_normal((len(idx) * config.perturbations, model.latent_dim))
                with nn.Tape() as tape:
                    total, parts = gate_step_loss(model, batch, Yb, pair, config, noise)
                    value = total.item()
                    if not np.isfinite(value):
                        raise DivergenceDetected(f"non-finite loss at epoch {epoch}")
                    tape.backward(total)
                opt.step()
                steps += 1
                sums["total"] = sums.get("total", 0.0) + value
                for name, p in parts.items():
                    sums[name] = sums.get(name, 0.0) + p.item()
            record = {"epoch": epoch, **{k: v / steps for k, v in sums.items()}}
            if val_feats is not None:
                pred = model.predict_latent(model.encoder.infer(val_feats))
                record["val_r"] = {
                    t: pearson(pred[~np.isnan(val_Y[:, k]), k], val_Y[~np.isnan(val_Y[:, k]), k])
                    for k, t in enumerate(model.tasks)
                }
            history.append(record)
            if log:
                log.write(json.dumps(record, sort_keys=True) + "\n")
    finally:
        if log:
            log.close()
    result = TrainResult(model, history)
    if checkpoint:
        result.checkpoint = checkpoint
        result.weights_sha256 = save_model(checkpoint, model, {"train": asdict(config)})
    return result


def _prepare(dataset, config, out_dir, stem):
    train, val = dataset.split(config.val_fraction, config.seed)
    log_path = checkpoint = None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        log_path = os.path.join(out_dir, f"{stem}_metrics.jsonl")
        checkpoint = os.path.join(out_dir, f"{stem}.cfw")
    return train, val, log_path, checkpoint


def train_gate(dataset, config=None, tasks=None, out_dir=None):
    """Train a GATE model on every task of ``dataset`` (or ``tasks``)."""
    config = config or TrainConfig()
    tasks = tuple(tasks or dataset.tasks)
    counts = dataset.label_counts()
    if any(counts[t] == 0 for t in tasks):
        raise ValueError("every task needs at least one label")
    model = GateModel(tasks, config.encoder_config, config.seed)
    train, val, log_path, checkpoint = _prepare(dataset, config, out_dir, "gate")
    return _fit(model, train, val, config, log_path, checkpoint)


def train_stl(dataset, task, config=None, out_dir=None):
    """Encoder + head for ``task`` trained on the regression loss only."""
    config = config or TrainConfig()
    if dataset.label_counts()[task] == 0:
        raise ValueError(f"task {task!r} has no labels")
    model = StlModel(task, config.encoder_config, config.seed)
    train, val, log_path, checkpoint = _prepare(dataset, config, out_dir, f"stl_{task}")
    return _fit(model, train, val, config, log_path, checkpoint)
