"""Directed message-passing encoder with a bottleneck autoencoder.

Messages live on directed bonds and exclude the reverse edge.  Atom states
are read out from incoming messages, mean-pooled per molecule, and projected
to the latent ``z`` by the bottleneck encoder.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import nncore as nn
from ._kernels import edge_message_sum
from .molgraph import BondOrder
from .molgraph.elements import ELEMENT_ORDER

N_ELEMENTS = len(ELEMENT_ORDER)
MAX_DEGREE = 4
ATOM_DIM = N_ELEMENTS + MAX_DEGREE + 1 + 1  # element, degree 0..4, aromatic
BOND_DIM = 4
_EL_INDEX = {e: i for i, e in enumerate(ELEMENT_ORDER)}
_BOND_INDEX = {BondOrder.SINGLE: 0, BondOrder.DOUBLE: 1, BondOrder.TRIPLE: 2, BondOrder.AROMATIC: 3}


@dataclass(frozen=True)
class FeaturizedGraph:
    atom_features: np.ndarray  # (n_atoms, ATOM_DIM)
    edge_features: np.ndarray  # (n_edges, BOND_DIM), directed
    src: np.ndarray
    dst: np.ndarray
    rev: np.ndarray

    @property
    def n_atoms(self):
        return self.atom_features.shape[0]

    @property
    def n_edges(self):
        return self.src.shape[0]


def featurize(g):
    n = len(g.atoms)
    X = np.zeros((n, ATOM_DIM))
    for i, a in enumerate(g.atoms):
        X[i, _EL_INDEX[a.element]] = 1.0
        X[i, N_ELEMENTS + min(g.degree(i), MAX_DEGREE)] = 1.0
        X[i, ATOM_DIM - 1] = 1.0 if a.aromatic else 0.0
    m = len(g.bonds)
    src = np.empty(2 * m, dtype=np.int64)
    dst = np.empty(2 * m, dtype=np.int64)
    E = np.zeros((2 * m, BOND_DIM))
    for k, b in enumerate(g.bonds):
        src[2 * k], dst[2 * k] = b.begin, b.end
        src[2 * k + 1], dst[2 * k + 1] = b.end, b.begin
        E[2 * k, _BOND_INDEX[b.order]] = 1.0
        E[2 * k + 1, _BOND_INDEX[b.order]] = 1.0
    rev = np.arange(2 * m, dtype=np.int64) ^ 1
    return FeaturizedGraph(X, E, src, dst, rev)


class GraphBatch:
    """Disjoint union of featurized graphs plus the constant sparse operators
    used by the tape forward pass."""

    def __init__(self, graphs):
        graphs = list(graphs)
        self.size = len(graphs)
        atom_off = np.cumsum([0] + [f.n_atoms for f in graphs])
        edge_off = np.cumsum([0] + [f.n_edges for f in graphs])
        self.n_atoms = int(atom_off[-1])
        self.n_edges = int(edge_off[-1])
        self.X = np.vstack([f.atom_features for f in graphs]) if graphs else np.zeros((0, ATOM_DIM))
        self.E = np.vstack([f.edge_features for f in graphs]) if self.n_edges else np.zeros((0, BOND_DIM))
        self.src = np.concatenate([f.src + atom_off[k] for k, f in enumerate(graphs)] or [np.zeros(0, np.int64)])
        self.dst = np.concatenate([f.dst + atom_off[k] for k, f in enumerate(graphs)] or [np.zeros(0, np.int64)])
        self.rev = np.concatenate([f.rev + edge_off[k] for k, f in enumerate(graphs)] or [np.zeros(0, np.int64)])
        self.mol_of_atom = np.repeat(np.arange(self.size), [f.n_atoms for f in graphs])
        counts = np.array([f.n_atoms for f in graphs], dtype=float)
        self._ops = None
        self._counts = counts

    @property
    def ops(self):
        if self._ops is None:
            ne, na = self.n_edges, self.n_atoms
            ones = np.ones(ne)
            incoming = sp.csr_matrix((ones, (self.dst, np.arange(ne))), shape=(na, ne))
            src_sel = sp.csr_matrix((ones, (np.arange(ne), self.src)), shape=(ne, na))
            reverse = sp.csr_matrix((ones, (np.arange(ne), self.rev)), shape=(ne, ne))
            msg = (src_sel @ incoming - reverse).tocsr()
            msg.eliminate_zeros()
            pool = sp.csr_matrix(
                (1.0 / self._counts[self.mol_of_atom], (self.mol_of_atom, np.arange(na))),
                shape=(self.size, na),
            )
            edge_input = np.hstack([self.X[self.src], self.E]) if ne else np.zeros((0, ATOM_DIM + BOND_DIM))
            self._ops = {"incoming": incoming, "msg": msg, "pool": pool, "edge_input": edge_input}
        return self._ops


@dataclass
class EncoderConfig:
    hidden: int = 64
    latent: int = 16
    depth: int = 2
    slope: float = 0.01


class Encoder(nn.Module):
    def __init__(self, config, rng):
        h, d = config.hidden, config.latent
        if d > h:
            raise ValueError("bottleneck latent must not exceed hidden width")
        self._config = config
        self.edge_init = nn.Linear(ATOM_DIM + BOND_DIM, h, rng)
        self.message = nn.Linear(h, h, rng)
        self.readout = nn.Linear(ATOM_DIM + h, h, rng)
        self.bottleneck = nn.Linear(h, d, rng)
        self.decoder = nn.Linear(d, h, rng)

    @property
    def config(self):
        return self._config

    def pooled(self, batch):
        """Mean-pooled atom states (tape path)."""
        ops = batch.ops
        slope = self._config.slope
        h0 = nn.leaky_relu(self.edge_init(nn.Tensor(ops["edge_input"])), slope)
        h = h0
        for _ in range(self._config.depth):
            m = nn.spmm(ops["msg"], h)
            h = nn.leaky_relu(nn.add(h0, self.message(m)), slope)
        if self._config.depth == 0:
            atom_msg = nn.Tensor(np.zeros((batch.n_atoms, self._config.hidden)))
        else:
            atom_msg = nn.spmm(ops["incoming"], h)
        atom_h = nn.leaky_relu(self.readout(nn.concat(nn.Tensor(batch.X), atom_msg)), slope)
        return nn.spmm(ops["pool"], atom_h)

    def __call__(self, batch):
        """Latent ``z`` (batch.size x latent) on the tape."""
        return self.bottleneck(self.pooled(batch))

    def reconstruct(self, z):
        """Decoder output in hidden space (tape path)."""
        return self.decoder(z)

    def reconstruction_loss(self, batch):
        """(1/N) sum ||p - decoder(bottleneck(p))||^2 over pooled states p;
        the bottleneck autoencoder's own objective for pretraining."""
        p = self.pooled(batch)
        return nn.scale(nn.l2_sq(p, self.reconstruct(self.bottleneck(p))), 1.0 / batch.size)

    def infer(self, batch):
        """Latent ``z`` as a numpy array without recording a tape."""
        slope = self._config.slope

        def act(x):
            return np.where(x > 0, x, slope * x)

        h0 = act(self.edge_init.infer(np.hstack([batch.X[batch.src], batch.E])))
        h = h0
        for _ in range(self._config.depth):
            m = edge_message_sum(h, batch.src, batch.dst, batch.rev, batch.n_atoms)
            h = act(h0 + self.message.infer(m))
        atom_msg = np.zeros((batch.n_atoms, self._config.hidden))
        if self._config.depth > 0 and batch.n_edges:
            np.add.at(atom_msg, batch.dst, h)
        atom_h = act(self.readout.infer(np.hstack([batch.X, atom_msg])))
        pooled = np.zeros((batch.size, self._config.hidden))
        np.add.at(pooled, batch.mol_of_atom, atom_h)
        pooled /= batch._counts[:, None]
        return self.bottleneck.infer(pooled)


def encode(g, encoder):
    """Latent vector for one molecule (inference path)."""
    return encoder.infer(GraphBatch([featurize(g)]))[0]
