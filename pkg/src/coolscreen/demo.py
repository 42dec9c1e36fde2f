"""Seeded desk-scale world: synthetic property formulas, a GATE teacher
trained on them, reactant sets and surrogate distillation.

Property "truth" is a fixed random mixture of structural features mapped
into physical units around the screening thresholds, so every stage of the
pipeline can run end to end without external data.
"""

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nncore as nn
from .gate import MultiTaskDataset, TrainConfig, train_gate
from .gate.data import quadratic_basis, structure_features
from .molgraph import write_smiles
from .properties import PROPERTY_NAMES
from .reactor import ReactantSets, Reaction
from .screening import build_product
from .surrogate import SurrogateConfig, Teacher, fidelity_report, pair_inputs, sample_pairs, train_surrogate
from .synthetic import random_molecules, random_reactants

# (kind, centre, spread): value = centre + spread*u, or centre*exp(spread*u) for "log"
PROPERTY_SCALES = {
    "boiling_point": ("lin", 165.0, 35.0),
    "melting_point": ("lin", -40.0, 25.0),
    "flash_point": ("lin", 148.0, 20.0),
    "critical_temperature": ("lin", 185.0, 45.0),
    "decomposition_temperature": ("lin", 170.0, 35.0),
    "specific_heat": ("lin", 2.0, 0.3),
    "vapor_pressure": ("log", 0.45, 0.9),
    "dynamic_viscosity": ("log", 0.01, 0.6),
    "density": ("lin", 950.0, 120.0),
    "dielectric_constant": ("log", 3.0, 0.45),
}


@dataclass
class DemoConfig:
    seed: int = 0
    n_alcohols: int = 200
    n_chlorides: int = 75
    n_acids: int = 75
    n_purchasables: int = 60
    corpus_molecules: int = 500
    corpus_products: int = 700
    label_noise: float = 0.05
    teacher_epochs: int = 40
    teacher_lr: float = 2e-3
    teacher_batch: int = 256
    surrogate_fraction: float = 0.005
    surrogate_epochs: int = 400
    surrogate_lr: float = 1e-3
    fidelity_pairs: int = 2000
    margin: float = 0.15

    @classmethod
    def from_dict(cls, data):
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class World:
    """Fixed mixing from the quadratic feature basis to property space."""

    feat_mean: np.ndarray
    feat_std: np.ndarray
    mix: np.ndarray
    u_std: np.ndarray = field(default=None)

    @classmethod
    def create(cls, graphs, seed):
        F = np.array([structure_features(g) for g in graphs])
        mean, std = F.mean(axis=0), F.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        B = quadratic_basis(F, mean, std)
        mix = nn.make_rng(seed, "world").normal(size=(B.shape[1], len(PROPERTY_NAMES))) / np.sqrt(B.shape[1])
        U = B @ mix
        return cls(mean, std, mix, U.std(axis=0))

    def latent(self, graphs):
        F = np.array([structure_features(g) for g in graphs]).reshape(-1, len(self.feat_mean))
        return quadratic_basis(F, self.feat_mean, self.feat_std) @ self.mix / self.u_std

    def properties(self, graphs, noise=0.0, rng=None):
        U = self.latent(graphs)
        if noise:
            U = U + noise * rng.standard_normal(U.shape)
        return to_units(U)


def to_units(U):
    out = np.empty_like(U)
    for k, name in enumerate(PROPERTY_NAMES):
        kind, centre, spread = PROPERTY_SCALES[name]
        out[:, k] = centre * np.exp(spread * U[:, k]) if kind == "log" else centre + spread * U[:, k]
    return out


def make_reactants(cfg, seed_offset=0):
    rng = nn.make_rng(cfg.seed + seed_offset, "reactants")
    alcohols = random_reactants(cfg.n_alcohols, "alcohol", rng)
    chlorides = random_reactants(cfg.n_chlorides, "chloride", rng)
    acids = random_reactants(cfg.n_acids, "acid", rng)
    return ReactantSets(alcohols, chlorides, acids)


def make_purchasables(cfg):
    rng = nn.make_rng(cfg.seed, "purchasables")
    return random_molecules(cfg.n_purchasables, rng, min_atoms=6, max_atoms=22)


def teacher_corpus(cfg):
    """Random molecules plus products from an unrelated reactant draw."""
    rng = nn.make_rng(cfg.seed, "corpus")
    graphs = random_molecules(cfg.corpus_molecules, rng, min_atoms=4, max_atoms=24)
    other = make_reactants(cfg, seed_offset=7919)
    n_a, n_c, n_x = len(other.alcohols), len(other.chlorides), len(other.acids)
    pick = rng.choice(n_a * (n_c + n_x), size=cfg.corpus_products, replace=False)
    for f in np.sort(pick):
        i, j = divmod(int(f), n_c + n_x)
        if j < n_c:
            graphs.append(build_product(other, Reaction.Ether, i, j))
        else:
            graphs.append(build_product(other, Reaction.Ester, i, j - n_c))
    return graphs


def build_teacher(cfg, out_dir=None):
    """Train the GATE teacher on the demo world; returns (model, world, result)."""
    graphs = teacher_corpus(cfg)
    world = World.create(graphs, cfg.seed)
    rng = nn.make_rng(cfg.seed, "labels")
    Y = world.properties(graphs, cfg.label_noise, rng)
    ds = MultiTaskDataset([write_smiles(g) for g in graphs], graphs, PROPERTY_NAMES, Y)
    tcfg = TrainConfig(epochs=cfg.teacher_epochs, lr=cfg.teacher_lr, batch=cfg.teacher_batch, seed=cfg.seed)
    result = train_gate(ds, tcfg, out_dir=out_dir)
    return result.model, world, result


def grid_pairs(sets):
    """Alcohol x partner (alcohol id, partner id) pairs for the full grid."""
    partners = sets.chloride_smiles + sets.acid_smiles
    return [(a, b) for a in sets.alcohol_smiles for b in partners]


def product_of(sets, pair_index):
    n_c = len(sets.chlorides)
    i, j = divmod(pair_index, n_c + len(sets.acids))
    return build_product(sets, Reaction.Ether, i, j) if j < n_c else build_product(sets, Reaction.Ester, i, j - n_c)


@dataclass
class Distillation:
    surrogate: object
    table: object
    train_pairs: list
    fidelity: list
    history: list
    val_r: dict
    teacher_calls: int
    seconds: float


def distill(cfg, sets, teacher, table):
    """Sample ``surrogate_fraction`` of the grid, label it with the teacher
    and fit the surrogate; fidelity is measured on other held-out pairs."""
    t0 = time.perf_counter()
    n_left = len(sets.alcohols)
    n_right = len(sets.chlorides) + len(sets.acids)
    all_pairs = grid_pairs(sets)
    sample = sample_pairs(n_left, n_right, cfg.surrogate_fraction, cfg.seed)
    idx = [i * n_right + j for i, j in sample]
    calls0 = teacher.embed_calls
    Y = teacher.predict([product_of(sets, k) for k in idx])
    X = pair_inputs([all_pairs[k] for k in idx], table)
    scfg = SurrogateConfig(epochs=cfg.surrogate_epochs, lr=cfg.surrogate_lr, seed=cfg.seed)
    result = train_surrogate(X, Y, scfg, latent_dim=table.dim)
    rest = np.setdiff1d(np.arange(len(all_pairs)), idx)
    held = np.sort(nn.make_rng(cfg.seed, "fidelity").choice(rest, size=min(cfg.fidelity_pairs, len(rest)),
                                                               replace=False))
    T = teacher.predict([product_of(sets, int(k)) for k in held])
    S = result.model.infer(pair_inputs([all_pairs[k] for k in held], table))
    rows = fidelity_report(S, T)
    return Distillation(result.model, table, [all_pairs[k] for k in idx], rows, result.history, result.val_r,
                        teacher.embed_calls - calls0, time.perf_counter() - t0)


def config_dict(cfg):
    return asdict(cfg)


__all__ = [
    "DemoConfig",
    "Distillation",
    "PROPERTY_SCALES",
    "Teacher",
    "World",
    "build_teacher",
    "config_dict",
    "distill",
    "grid_pairs",
    "make_purchasables",
    "make_reactants",
    "product_of",
    "teacher_corpus",
    "to_units",
]
