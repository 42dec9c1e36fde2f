"""Sparse multi-task datasets and the synthetic correlated-task generator."""

import csv
from dataclasses import dataclass, field

import numpy as np

from ..molgraph import parse_smiles, ring_atoms, write_smiles
from ..molgraph.elements import Element
from ..molgraph.graph import BondOrder
from ..synthetic import random_molecules


@dataclass
class MultiTaskDataset:
    """Molecules with a (n, T) label matrix; NaN marks a missing label.

    ``is_val`` optionally pins the validation rows; otherwise trainers use a
    fixed-seed 90/10 split.
    """

    smiles: list
    graphs: list
    tasks: tuple
    Y: np.ndarray
    is_val: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tasks = tuple(self.tasks)
        self.Y = np.asarray(self.Y, dtype=float)
        if self.Y.shape != (len(self.graphs), len(self.tasks)):
            raise ValueError(f"label matrix {self.Y.shape} does not match {len(self.graphs)} x {len(self.tasks)}")

    def __len__(self):
        return len(self.graphs)

    def task_index(self, task):
        return self.tasks.index(task)

    def labelled(self, task):
        return ~np.isnan(self.Y[:, self.task_index(task)])

    def label_counts(self):
        return {t: int(self.labelled(t).sum()) for t in self.tasks}

    def subset(self, idx, tasks=None):
        idx = np.asarray(idx, dtype=np.int64)
        tasks = tuple(tasks) if tasks is not None else self.tasks
        cols = [self.task_index(t) for t in tasks]
        return MultiTaskDataset(
            [self.smiles[i] for i in idx],
            [self.graphs[i] for i in idx],
            tasks,
            self.Y[np.ix_(idx, cols)],
            None if self.is_val is None else self.is_val[idx],
            dict(self.meta),
        )

    def split(self, val_fraction=0.1, seed=0):
        """(train, val) datasets; honours ``is_val`` when set."""
        if self.is_val is not None:
            val = np.flatnonzero(self.is_val)
            train = np.flatnonzero(~self.is_val)
        else:
            perm = np.random.default_rng(seed).permutation(len(self))
            n_val = max(1, int(round(val_fraction * len(self)))) if len(self) > 1 else 0
            val, train = np.sort(perm[:n_val]), np.sort(perm[n_val:])
        return self.subset(train), self.subset(val)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["smiles", "task_id", "value"])
            for i, s in enumerate(self.smiles):
                for k, t in enumerate(self.tasks):
                    if not np.isnan(self.Y[i, k]):
                        w.writerow([s, t, repr(float(self.Y[i, k]))])

    @classmethod
    def from_csv(cls, path):
        rows = {}
        tasks = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"smiles", "task_id", "value"} - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
            for rec in reader:
                t = rec["task_id"]
                if t not in tasks:
                    tasks.append(t)
                rows.setdefault(rec["smiles"], {})[t] = float(rec["value"])
        smiles = list(rows)
        graphs = [parse_smiles(s) for s in smiles]
        Y = np.full((len(smiles), len(tasks)), np.nan)
        for i, s in enumerate(smiles):
            for t, v in rows[s].items():
                Y[i, tasks.index(t)] = v
        return cls(smiles, graphs, tasks, Y)


def structure_features(g):
    """Size-independent structural features used to build synthetic labels."""
    n = len(g.atoms)
    count = {}
    for a in g.atoms:
        count[a.element] = count.get(a.element, 0) + 1
    deg = np.array([g.degree(i) for i in range(n)])
    unsat = sum(1 for b in g.bonds if b.order is not BondOrder.SINGLE)
    carbonyl = sum(1 for b in g.bonds if b.order is BondOrder.DOUBLE
                   and Element.O in (g.atoms[b.begin].element, g.atoms[b.end].element))
    hetero_links = sum(1 for b in g.bonds if {g.atoms[b.begin].element, g.atoms[b.end].element} != {Element.C})
    return np.array([
        count.get(Element.O, 0) / n,
        count.get(Element.Si, 0) / n,
        count.get(Element.N, 0) / n,
        np.mean(deg == 1),
        np.mean(deg == 2),
        np.mean(deg == 3),
        np.mean(deg == 4),
        len(ring_atoms(g)) / n,
        unsat / max(1, len(g.bonds)),
        carbonyl / n,
        hetero_links / max(1, len(g.bonds)),
    ])


def quadratic_basis(F, mean=None, std=None):
    """Standardized features plus all pairwise products (nonlinear basis).

    ``mean``/``std`` default to the column statistics of ``F``.
    """
    mean = F.mean(axis=0) if mean is None else mean
    sd = F.std(axis=0) if std is None else std
    F = (F - mean) / np.where(sd > 0, sd, 1.0)
    i, j = np.triu_indices(F.shape[1])
    return np.hstack([F, F[:, i] * F[:, j]])


def _standardize(v):
    sd = v.std()
    return (v - v.mean()) / (sd if sd > 0 else 1.0)


def latent_factors(graphs, k, seed):
    """``k`` mutually orthogonal, unit-variance factors over ``graphs``.

    Each factor is a random direction in a quadratic feature basis; later
    factors are Gram-Schmidt orthogonalized against earlier ones so that the
    empirical correlation between factors is zero.
    """
    F = quadratic_basis(np.array([structure_features(g) for g in graphs]))
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(k):
        v = F @ rng.normal(size=F.shape[1])
        v = v - v.mean()
        for u in out:
            v = v - (v @ u) / (u @ u) * u
        out.append(_standardize(v))
    return np.column_stack(out)


def make_synthetic_tasks(n_mols, tasks=("A", "B"), rho=0.9, noise=0.1, seed=0, label_counts=None,
                         val_fraction=0.1, graphs=None):
    """Correlated synthetic tasks over random molecules.

    The first task is the factor f1; every other task is
    rho*f1 + sqrt(1 - rho^2)*f_k with its own orthogonal factor, plus
    Gaussian noise of scale ``noise``.  A random ``val_fraction`` of rows
    form the validation split and keep every label; ``label_counts`` caps
    the labelled training rows per task.
    """
    if not -1.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [-1, 1]")
    tasks = tuple(tasks)
    rng = np.random.default_rng(seed)
    if graphs is None:
        graphs = random_molecules(n_mols, rng)
    graphs = list(graphs)
    n = len(graphs)
    f = latent_factors(graphs, len(tasks), seed + 1)
    Y = np.empty((n, len(tasks)))
    Y[:, 0] = f[:, 0]
    for k in range(1, len(tasks)):
        Y[:, k] = rho * f[:, 0] + np.sqrt(1.0 - rho * rho) * f[:, k]
    Y += noise * rng.normal(size=Y.shape)
    truth = Y.copy()
    n_val = int(round(val_fraction * n))
    is_val = np.zeros(n, dtype=bool)
    is_val[rng.permutation(n)[:n_val]] = True
    if label_counts:
        train_rows = np.flatnonzero(~is_val)
        for k, t in enumerate(tasks):
            cap = label_counts.get(t)
            if cap is None or cap >= len(train_rows):
                continue
            drop = rng.permutation(train_rows)[cap:]
            Y[drop, k] = np.nan
    smiles = [write_smiles(g) for g in graphs]
    meta = {"rho": rho, "noise": noise, "seed": seed, "truth": truth}
    return MultiTaskDataset(smiles, graphs, tasks, Y, is_val, meta)


def pearson(a, b):
    a, b = np.asarray(a, float).ravel(), np.asarray(b, float).ravel()
    if a.size < 2:
        return float("nan")
    a, b = a - a.mean(), b - b.mean()
    den = np.sqrt((a @ a) * (b @ b))
    return float(a @ b / den) if den > 0 else 0.0
