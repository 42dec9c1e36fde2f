"""Distilled pair predictor over precomputed reactant embeddings.

Each reactant is embedded once by the teacher and stored in a lookup table.
A product is then scored from the concatenation of its two parents'
embeddings, so an n x m grid costs n + m teacher embeddings instead of n*m.
"""

import csv
import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from . import nncore as nn
from .gate.data import pearson
from .gate.train import DivergenceDetected
from .properties import PROPERTY_NAMES

EMB_MAGIC = b"EMB1"
TRUNK = (64, 50)
TOWER = (32, 16, 1)
SLOPE = 0.01


class TeacherUnavailable(RuntimeError):
    pass


class MissingEmbedding(KeyError):
    pass


class ProvenanceMismatch(ValueError):
    pass


class Teacher:
    """Wraps a trained GATE model and counts every molecule it encodes.

    ``embed`` returns shared-manifold points; ``predict`` returns property
    rows in task units.  Both count one call per molecule.
    """

    def __init__(self, model, weights_sha256=None):
        if model is None:
            raise TeacherUnavailable("no teacher model loaded")
        self.model = model
        if weights_sha256 is None:
            weights_sha256 = nn.weights_hash(model.weights())
        self.weights_sha256 = weights_sha256
        self.embed_calls = 0

    @property
    def latent_dim(self):
        return self.model.latent_dim

    def embed(self, graphs):
        graphs = list(graphs)
        self.embed_calls += len(graphs)
        return self.model.manifold(graphs)

    def predict(self, graphs, chunk=2048):
        graphs = list(graphs)
        self.embed_calls += len(graphs)
        out = [self.model.predict_many(graphs[i:i + chunk]) for i in range(0, len(graphs), chunk)]
        return np.vstack(out) if out else np.zeros((0, len(self.model.tasks)))


class EmbeddingTable:
    """Immutable id -> embedding map tagged with the teacher weight hash."""

    def __init__(self, ids, matrix, provenance):
        ids = [str(i) for i in ids]
        matrix = np.array(matrix, dtype=np.float64, copy=True).reshape(len(ids), -1) if ids else np.zeros((0, 0))
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate reactant ids")
        matrix.setflags(write=False)
        self._ids = tuple(ids)
        self._index = {k: i for i, k in enumerate(ids)}
        self._matrix = matrix
        self.provenance = provenance

    def __len__(self):
        return len(self._ids)

    def __contains__(self, key):
        return key in self._index

    @property
    def ids(self):
        return self._ids

    @property
    def dim(self):
        return self._matrix.shape[1] if len(self) else 0

    @property
    def matrix(self):
        return self._matrix

    def __getitem__(self, key):
        try:
            return self._matrix[self._index[key]]
        except KeyError:
            raise MissingEmbedding(key) from None

    def rows(self, keys):
        try:
            return self._matrix[[self._index[k] for k in keys]]
        except KeyError as exc:
            raise MissingEmbedding(exc.args[0]) from None

    def check_provenance(self, teacher_hash):
        if teacher_hash != self.provenance:
            raise ProvenanceMismatch(f"table built from {self.provenance[:12]}, teacher is {teacher_hash[:12]}")

    def to_bytes(self):
        prov = self.provenance.encode("ascii")
        out = [EMB_MAGIC, struct.pack("<IIH", len(self), self.dim, len(prov)), prov]
        for key, row in zip(self._ids, self._matrix):
            name = key.encode("utf-8")
            out.append(struct.pack("<H", len(name)))
            out.append(name)
            out.append(row.astype("<f8").tobytes())
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data):
        if data[:4] != EMB_MAGIC:
            raise ValueError("not an EMB1 table")
        n, d, plen = struct.unpack_from("<IIH", data, 4)
        pos = 14
        prov = data[pos:pos + plen].decode("ascii")
        pos += plen
        ids, rows = [], []
        for _ in range(n):
            (klen,) = struct.unpack_from("<H", data, pos)
            pos += 2
            ids.append(data[pos:pos + klen].decode("utf-8"))
            pos += klen
            rows.append(np.frombuffer(data, dtype="<f8", count=d, offset=pos))
            pos += 8 * d
        if pos != len(data):
            raise ValueError("trailing bytes in EMB1 table")
        return cls(ids, np.array(rows).reshape(n, d), prov)

    def save(self, path):
        data = self.to_bytes()
        with open(path, "wb") as fh:
            fh.write(data)
        return hashlib.sha256(data).hexdigest()

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def build_lookup(reactants, teacher):
    """Embed every reactant once.  ``reactants`` is a list of (id, graph)."""
    if teacher is None:
        raise TeacherUnavailable("cannot build a lookup table without a teacher")
    reactants = list(reactants)
    if not reactants:
        return EmbeddingTable([], np.zeros((0, 0)), teacher.weights_sha256)
    ids = [k for k, _ in reactants]
    return EmbeddingTable(ids, teacher.embed([g for _, g in reactants]), teacher.weights_sha256)


def surrogate_input(r1, r2, table):
    """Alcohol-slot embedding followed by the partner embedding."""
    return np.concatenate([table[r1], table[r2]])


def pair_inputs(pairs, table):
    pairs = list(pairs)
    if not pairs:
        return np.zeros((0, 2 * table.dim))
    left = table.rows([a for a, _ in pairs])
    right = table.rows([b for _, b in pairs])
    return np.hstack([left, right])


class SurrogateModel(nn.Module):
    """Shared trunk 2d -> 64 -> 50 and one 50 -> 32 -> 16 -> 1 tower per task."""

    def __init__(self, latent_dim=16, tasks=PROPERTY_NAMES, seed=0):
        self._tasks = tuple(tasks)
        self._latent_dim = latent_dim
        self._seed = seed
        rng = nn.make_rng(seed, "surrogate", "trunk")
        sizes = (2 * latent_dim,) + TRUNK
        self.trunk = [nn.Linear(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
        self.towers = {}
        for t in self._tasks:
            trng = nn.make_rng(seed, "surrogate", "tower", t)
            sizes = (TRUNK[-1],) + TOWER
            self.towers[t] = [nn.Linear(a, b, trng) for a, b in zip(sizes[:-1], sizes[1:])]
        self._mean = np.zeros(len(self._tasks))
        self._std = np.ones(len(self._tasks))

    @property
    def tasks(self):
        return self._tasks

    @property
    def latent_dim(self):
        return self._latent_dim

    def named_parameters(self, prefix=""):
        for k, layer in enumerate(self.trunk):
            yield from layer.named_parameters(f"{prefix}trunk.{k}.")
        for t in self._tasks:
            for k, layer in enumerate(self.towers[t]):
                yield from layer.named_parameters(f"{prefix}towers.{t}.{k}.")

    def __call__(self, x):
        """Scaled outputs (N, n_tasks) on the tape."""
        h = nn.as_tensor(x)
        for layer in self.trunk:
            h = nn.leaky_relu(layer(h), SLOPE)
        out = None
        for t in self._tasks:
            y = h
            tower = self.towers[t]
            for k, layer in enumerate(tower):
                y = layer(y)
                if k < len(tower) - 1:
                    y = nn.leaky_relu(y, SLOPE)
            out = y if out is None else nn.concat(out, y)
        return out

    def infer_scaled(self, x):
        h = np.asarray(x, dtype=float)
        for layer in self.trunk:
            h = layer.infer(h)
            h = np.where(h > 0, h, SLOPE * h)
        cols = []
        for t in self._tasks:
            y = h
            tower = self.towers[t]
            for k, layer in enumerate(tower):
                y = layer.infer(y)
                if k < len(tower) - 1:
                    y = np.where(y > 0, y, SLOPE * y)
            cols.append(y)
        return np.hstack(cols)

    def infer(self, x):
        """Predictions in task units for input rows ``x`` (N, 2d)."""
        return self.infer_scaled(x) * self._std + self._mean

    def set_label_scaling(self, mean, std):
        self._mean = np.asarray(mean, dtype=float).copy()
        self._std = np.asarray(std, dtype=float).copy()

    def weights(self):
        state = self.state_dict()
        state["label_mean"] = self._mean.reshape(1, -1).copy()
        state["label_std"] = self._std.reshape(1, -1).copy()
        return state

    def load_weights(self, state):
        state = dict(state)
        self.set_label_scaling(state.pop("label_mean").ravel(), state.pop("label_std").ravel())
        self.load_state_dict(state)

    def hyperparameters(self):
        return {"kind": "SurrogateModel", "latent_dim": self._latent_dim, "tasks": list(self._tasks), "seed": self._seed}

    def save(self, path, extra=None):
        hyper = self.hyperparameters()
        hyper.update(extra or {})
        return nn.save_weights(path, self.weights(), hyper)

    @classmethod
    def load(cls, path):
        tensors, hyper = nn.load_weights(path)
        model = cls(hyper["latent_dim"], hyper["tasks"], hyper["seed"])
        model.load_weights(tensors)
        return model, hyper


def predict_pair(r1, r2, model, table):
    """Property row for one product from its parents' table entries."""
    return model.infer(surrogate_input(r1, r2, table)[None, :])[0]


@dataclass
class SurrogateConfig:
    epochs: int = 300
    batch: int = 256
    lr: float = 1e-3
    val_fraction: float = 0.1
    seed: int = 0


@dataclass
class SurrogateResult:
    model: SurrogateModel
    history: list
    val_r: dict


def sample_pairs(n_left, n_right, fraction, seed):
    """Uniform sample without replacement of ``fraction`` of the grid."""
    total = n_left * n_right
    k = max(1, int(round(fraction * total)))
    flat = np.random.default_rng(seed).choice(total, size=k, replace=False)
    return [(int(f // n_right), int(f % n_right)) for f in np.sort(flat)]


def train_surrogate(X, Y, config=None, latent_dim=None, tasks=PROPERTY_NAMES):
    """Fit the surrogate to teacher predictions ``Y`` on pair inputs ``X``.

    The loss is the unweighted sum of per-task mean squared errors on
    standardized targets.  A fixed-seed 90/10 split gives validation r.
    """
    config = config or SurrogateConfig()
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    latent_dim = latent_dim or X.shape[1] // 2
    model = SurrogateModel(latent_dim, tasks, config.seed)
    n = X.shape[0]
    perm = nn.make_rng(config.seed, "surrogate", "split").permutation(n)
    n_val = int(round(config.val_fraction * n)) if n > 1 else 0
    val, train = perm[:n_val], perm[n_val:]
    mean = Y[train].mean(axis=0)
    std = Y[train].std(axis=0)
    std = np.where(std > 0, std, 1.0)
    model.set_label_scaling(mean, std)
    Ys = (Y - mean) / std
    opt = nn.Adam(model.parameters(), lr=config.lr)
    rng = nn.make_rng(config.seed, "surrogate", "shuffle")
    history = []
    bs = min(config.batch, len(train))
    for epoch in range(1, config.epochs + 1):
        order = train[rng.permutation(len(train))]
        total, steps = 0.0, 0
        for start in range(0, len(order), bs):
            idx = order[start:start + bs]
            with nn.Tape() as tape:
                pred = model(nn.Tensor(X[idx]))
                loss = nn.scale(nn.l2_sq(pred, nn.Tensor(Ys[idx])), 1.0 / len(idx))
                value = loss.item()
                if not np.isfinite(value):
                    raise DivergenceDetected(f"surrogate loss non-finite at epoch {epoch}")
                tape.backward(loss)
            opt.step()
            total += value
            steps += 1
        history.append({"epoch": epoch, "loss": total / steps})
    val_r = {}
    if n_val >= 2:
        pred = model.infer(X[val])
        val_r = {t: pearson(pred[:, k], Y[val, k]) for k, t in enumerate(model.tasks)}
    return SurrogateResult(model, history, val_r)


def fidelity_report(pred, teacher_pred, tasks=PROPERTY_NAMES, path=None):
    """Per-task Pearson r and MAE of surrogate vs teacher predictions."""
    pred, teacher_pred = np.asarray(pred, float), np.asarray(teacher_pred, float)
    rows = []
    for k, t in enumerate(tasks):
        rows.append({
            "task": t,
            "pearson_r": pearson(pred[:, k], teacher_pred[:, k]),
            "mae": float(np.mean(np.abs(pred[:, k] - teacher_pred[:, k]))) if len(pred) else float("nan"),
        })
    if path:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["task", "pearson_r", "mae"])
            w.writeheader()
            for r in rows:
                w.writerow({"task": r["task"], "pearson_r": f"{r['pearson_r']:.6f}", "mae": f"{r['mae']:.6g}"})
    return rows
