"""Threshold criteria, the six-cell partition, figures of merit and the
two-stage surrogate -> teacher screen."""

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import biaslab
from .filters import postfilter
from .molgraph import write_smiles
from .properties import PROPERTY_NAMES, PropertyVector
from .reactor import Reaction, esterify, williamson
from .surrogate import build_lookup, pair_inputs


class NonPositiveInput(ValueError):
    pass


class RelaxationInversion(ValueError):
    pass


class Direction(str, Enum):
    greater = "greater"
    less = "less"
    leq = "leq"


@dataclass(frozen=True)
class ThresholdSpec:
    property: str
    direction: Direction
    value: float

    def __post_init__(self):
        if self.property not in PROPERTY_NAMES:
            raise ValueError(f"unknown property {self.property!r}")
        object.__setattr__(self, "direction", Direction(self.direction))
        if not math.isfinite(self.value):
            raise ValueError("threshold value must be finite")

    @property
    def column(self):
        return PROPERTY_NAMES.index(self.property)

    def test(self, x):
        """Elementwise pass test on a scalar or array of property values."""
        if self.direction is Direction.greater:
            return x > self.value
        if self.direction is Direction.less:
            return x < self.value
        return x <= self.value

    def to_dict(self):
        return {"property": self.property, "direction": self.direction.value, "value": self.value}


@dataclass(frozen=True)
class CriteriaSet:
    thresholds: tuple

    def __post_init__(self):
        props = [t.property for t in self.thresholds]
        if len(set(props)) != len(props):
            raise ValueError("at most one threshold per property")
        object.__setattr__(self, "thresholds", tuple(self.thresholds))

    def __len__(self):
        return len(self.thresholds)

    def get(self, prop):
        for t in self.thresholds:
            if t.property == prop:
                return t
        return None

    def to_json(self):
        return [t.to_dict() for t in self.thresholds]

    @classmethod
    def from_json(cls, data):
        return cls(tuple(ThresholdSpec(d["property"], d["direction"], float(d["value"])) for d in data))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)


DEFAULT_CRITERIA = CriteriaSet((
    ThresholdSpec("boiling_point", "greater", 150.0),
    ThresholdSpec("melting_point", "less", -30.0),
    ThresholdSpec("flash_point", "greater", 140.0),
    ThresholdSpec("critical_temperature", "greater", 155.0),
    ThresholdSpec("decomposition_temperature", "greater", 150.0),
    ThresholdSpec("vapor_pressure", "less", 0.8),
    ThresholdSpec("dynamic_viscosity", "less", 0.015),
    ThresholdSpec("density", "less", 2000.0),
    ThresholdSpec("dielectric_constant", "leq", 6.0),
))


@dataclass(frozen=True)
class Evaluation:
    passes: dict
    passed: bool


def evaluate(pv, criteria=DEFAULT_CRITERIA):
    pv = PropertyVector(*pv)
    passes = {t.property: bool(t.test(getattr(pv, t.property))) for t in criteria.thresholds}
    return Evaluation(passes, all(passes.values()))


def evaluate_matrix(P, criteria=DEFAULT_CRITERIA):
    """(N, k) boolean pass matrix for property rows ``P`` (N, 10)."""
    P = np.asarray(P, dtype=float).reshape(-1, len(PROPERTY_NAMES))
    if not criteria.thresholds:
        return np.ones((P.shape[0], 0), dtype=bool)
    return np.column_stack([t.test(P[:, t.column]) for t in criteria.thresholds])


DIELECTRIC_EDGES = (2.3, 4.0, 6.0)
FLASH_LOW, FLASH_MID = 140.0, 150.0


def dielectric_bin(eps):
    for k, edge in enumerate(DIELECTRIC_EDGES):
        if eps <= edge:
            return k
    return None


def flash_bin(fp):
    if fp > FLASH_MID:
        return 0
    if fp >= FLASH_LOW:
        return 1
    return None


def assign_partition(pv):
    """Criterion index 1-6 from the dielectric x flash-point grid.

    Criteria 1-3 are the flash > 150 row (dielectric <= 2.3, (2.3, 4], (4, 6]);
    criteria 4-6 are the same dielectric bins with flash in [140, 150].
    """
    pv = PropertyVector(*pv)
    e, f = dielectric_bin(pv.dielectric_constant), flash_bin(pv.flash_point)
    if e is None or f is None:
        return None
    return 1 + e + 3 * f


def partition_array(P):
    P = np.asarray(P, dtype=float).reshape(-1, len(PROPERTY_NAMES))
    eps = P[:, PROPERTY_NAMES.index("dielectric_constant")]
    fp = P[:, PROPERTY_NAMES.index("flash_point")]
    e = np.full(len(P), -1)
    for k, edge in reversed(list(enumerate(DIELECTRIC_EDGES))):
        e[eps <= edge] = k
    f = np.where(fp > FLASH_MID, 0, np.where(fp >= FLASH_LOW, 1, -1))
    return np.where((e >= 0) & (f >= 0), 1 + e + 3 * f, 0)


@dataclass(frozen=True)
class FomInputs:
    k: float  # thermal conductivity W/(m K)
    beta: float  # thermal expansion 1/K
    rho: float  # density kg/m^3
    c_p: float  # specific heat
    mu: float  # dynamic viscosity N s/m^2

    def __post_init__(self):
        for name in ("k", "beta", "rho", "c_p", "mu"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise NonPositiveInput(f"{name} must be positive, got {v}")


def fom1(i):
    """Natural-convection figure of merit k (beta c_p rho^2 / (mu k))^0.2813."""
    return i.k * (i.beta * i.c_p * i.rho ** 2 / (i.mu * i.k)) ** 0.2813


def fom2(i):
    """Developing laminar flow figure of merit k rho c_p / mu."""
    return i.k * i.rho * i.c_p / i.mu


def fom3(i):
    return i.mu


def _lenient(t, margin):
    shift = margin * abs(t.value)
    if t.direction is Direction.greater:
        return ThresholdSpec(t.property, t.direction, t.value - shift)
    return ThresholdSpec(t.property, t.direction, t.value + shift)


def relax(criteria=DEFAULT_CRITERIA, margin=0.15):
    """Shift every threshold by ``margin`` x |value| in the lenient direction.

    ``margin`` may be a float or a dict keyed by property (missing keys
    keep the threshold unchanged).
    """
    out = []
    for t in criteria.thresholds:
        m = margin.get(t.property, 0.0) if isinstance(margin, dict) else margin
        out.append(_lenient(t, m))
    return CriteriaSet(tuple(out))


def check_relaxation(relaxed, final):
    """Raise unless every vector passing ``final`` also passes ``relaxed``."""
    for r in relaxed.thresholds:
        f = final.get(r.property)
        if f is None:
            raise RelaxationInversion(f"relaxed set constrains {r.property}, final set does not")
        upper = f.direction is Direction.greater
        if upper != (r.direction is Direction.greater):
            raise RelaxationInversion(f"{r.property}: relaxed and final thresholds point different ways")
        if upper:
            ok = r.value <= f.value
        elif r.direction is Direction.leq or f.direction is Direction.less:
            ok = r.value >= f.value
        else:
            # final <= v but relaxed < v' needs v' strictly above v
            ok = r.value > f.value
        if not ok:
            raise RelaxationInversion(f"{r.property}: relaxed {r.value} is stricter than final {f.value}")


@dataclass
class Candidate:
    smiles: str
    source: str  # purchasable | ether | ester
    criterion_index: int
    pv: PropertyVector
    key: tuple = None


CANDIDATE_HEADER = ["smiles", "source", "criterion_index", *PROPERTY_NAMES]


def write_candidates(path, candidates):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CANDIDATE_HEADER)
        for c in candidates:
            w.writerow([c.smiles, c.source, c.criterion_index, *(f"{v:.6g}" for v in c.pv)])


@dataclass
class ScreeningReport:
    library_size: int = 0
    prefilter_pass: int = 0
    surrogate_pass: int = 0
    postfilter_pass: int = 0
    teacher_pass: int = 0
    purchasables: int = 0
    purchasable_pass: int = 0
    criterion_counts: dict = field(default_factory=lambda: {i: 0 for i in range(1, 7)})
    marginal_pass: dict = field(default_factory=dict)
    scored: int = 0
    joint_pass: int = 0
    teacher_embed_calls: int = 0
    surrogate_calls: int = 0
    zero_margin: bool = False
    missed: int = None
    extra: int = None

    def merge(self, other):
        """Sum counters; bias figures recompute from the merged counts."""
        out = ScreeningReport()
        for name in ("library_size", "prefilter_pass", "surrogate_pass", "postfilter_pass", "teacher_pass",
                     "purchasables", "purchasable_pass", "scored", "joint_pass", "teacher_embed_calls",
                     "surrogate_calls"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        out.criterion_counts = {i: self.criterion_counts[i] + other.criterion_counts[i] for i in range(1, 7)}
        keys = set(self.marginal_pass) | set(other.marginal_pass)
        out.marginal_pass = {k: self.marginal_pass.get(k, 0) + other.marginal_pass.get(k, 0) for k in keys}
        out.zero_margin = self.zero_margin and other.zero_margin
        return out

    @property
    def marginal_rates(self):
        return {k: v / self.scored for k, v in sorted(self.marginal_pass.items())} if self.scored else {}

    @property
    def joint_rate(self):
        return self.joint_pass / self.scored if self.scored else 0.0

    @property
    def independence_product(self):
        return float(np.prod(list(self.marginal_rates.values()))) if self.scored else 0.0

    @property
    def bias_gap(self):
        return self.independence_product - self.joint_rate

    def to_dict(self):
        return {
            "stages": {
                "library_size": self.library_size,
                "prefilter_pass": self.prefilter_pass,
                "surrogate_pass": self.surrogate_pass,
                "postfilter_pass": self.postfilter_pass,
                "teacher_pass": self.teacher_pass,
                "purchasables": self.purchasables,
                "purchasable_pass": self.purchasable_pass,
            },
            "criterion_counts": {str(k): v for k, v in self.criterion_counts.items()},
            "teacher_scored": self.scored,
            "marginal_pass_rates": self.marginal_rates,
            "joint_pass_rate": self.joint_rate,
            "independence_product": self.independence_product,
            "bias_gap": self.bias_gap,
            "teacher_embed_calls": self.teacher_embed_calls,
            "surrogate_calls": self.surrogate_calls,
            "zero_margin": self.zero_margin,
            "missed_candidates": self.missed,
            "extra_candidates": self.extra,
        }

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _grid(sets):
    """(reaction, partners, partner smiles, role, builder) per reaction."""
    return [
        (Reaction.Ether, sets.chlorides, sets.chloride_smiles, "chloride", williamson),
        (Reaction.Ester, sets.acids, sets.acid_smiles, "acid", esterify),
    ]


def build_product(sets, reaction, i, j):
    role = "chloride" if reaction is Reaction.Ether else "acid"
    partners = sets.chlorides if reaction is Reaction.Ether else sets.acids
    make = williamson if reaction is Reaction.Ether else esterify
    return make(sets.alcohols[i], partners[j], (i, j), (sets.site("alcohol", i), sets.site(role, j))).product


def _pair_keys(sets):
    keys = []
    for reaction, _, partner_smiles, _, _ in _grid(sets):
        for i, a in enumerate(sets.alcohol_smiles):
            for j, b in enumerate(partner_smiles):
                if a != b:
                    keys.append((reaction, i, j))
    return keys


def _record(report, P, criteria):
    passes = evaluate_matrix(P, criteria)
    report.scored += len(P)
    for k, t in enumerate(criteria.thresholds):
        report.marginal_pass[t.property] = report.marginal_pass.get(t.property, 0) + int(passes[:, k].sum())
    ok = np.all(passes, axis=1)
    report.joint_pass += int(ok.sum())
    return ok


def _score_with_teacher(graphs, teacher, final, report, chunk=2048):
    """Teacher predictions, final pass mask and partition indices."""
    P = teacher.predict(graphs, chunk) if graphs else np.zeros((0, len(PROPERTY_NAMES)))
    ok = _record(report, P, final)
    cells = partition_array(P)
    return P, ok & (cells > 0), cells


def two_stage_screen(sets, teacher, surrogate, relaxed, final=DEFAULT_CRITERIA, purchasables=(), oracle=None,
                     scored_sink=None):
    """Surrogate pre-screen of every alcohol x partner product against
    ``relaxed``, teacher rescoring of survivors against ``final``.

    Purchasables (list of graphs) go straight to the teacher.  When
    ``oracle`` (a set of product keys from :func:`brute_force_screen`) is
    given, the report records missed and extra candidates.  ``scored_sink``
    receives (smiles, source, property row) for every teacher-scored molecule.
    Returns (report, candidates).
    """
    check_relaxation(relaxed, final)
    report = ScreeningReport(zero_margin=relaxed == final)
    start_calls = teacher.embed_calls

    reactants = [(s, g) for s, g in zip(sets.alcohol_smiles, sets.alcohols)]
    reactants += [(s, g) for s, g in zip(sets.chloride_smiles, sets.chlorides)]
    reactants += [(s, g) for s, g in zip(sets.acid_smiles, sets.acids)]
    table = build_lookup(reactants, teacher)

    keys = _pair_keys(sets)
    report.library_size = len(keys)
    report.prefilter_pass = len(keys)  # reactants are prefiltered on load
    pairs = []
    for reaction, i, j in keys:
        partners = sets.chloride_smiles if reaction is Reaction.Ether else sets.acid_smiles
        pairs.append((sets.alcohol_smiles[i], partners[j]))
    X = pair_inputs(pairs, table)
    S = surrogate.infer(X) if len(X) else np.zeros((0, len(PROPERTY_NAMES)))
    report.surrogate_calls = len(keys)
    keep = np.all(evaluate_matrix(S, relaxed), axis=1) if len(S) else np.zeros(0, dtype=bool)
    survivors = [keys[k] for k in np.flatnonzero(keep)]
    report.surrogate_pass = len(survivors)

    graphs, kept = [], []
    for key in survivors:
        g = build_product(sets, *key)
        if postfilter(g).passed:
            graphs.append(g)
            kept.append(key)
    report.postfilter_pass = len(kept)
    P, ok, cells = _score_with_teacher(graphs, teacher, final, report)
    report.teacher_pass = int(ok.sum())
    if scored_sink is not None:
        for n, (reaction, _, _) in enumerate(kept):
            scored_sink(write_smiles(graphs[n]), reaction.value.lower(), P[n])

    candidates = []
    for n in np.flatnonzero(ok):
        reaction, i, j = kept[n]
        candidates.append(Candidate(write_smiles(graphs[n]), reaction.value.lower(), int(cells[n]),
                                    PropertyVector.from_array(P[n]), kept[n]))
        report.criterion_counts[int(cells[n])] += 1

    purch = [g for g in purchasables if postfilter(g).passed]
    report.purchasables = len(purch)
    Pp, okp, cellsp = _score_with_teacher(purch, teacher, final, report)
    report.purchasable_pass = int(okp.sum())
    if scored_sink is not None:
        for n, g in enumerate(purch):
            scored_sink(write_smiles(g), "purchasable", Pp[n])
    for n in np.flatnonzero(okp):
        candidates.append(Candidate(write_smiles(purch[n]), "purchasable", int(cellsp[n]),
                                    PropertyVector.from_array(Pp[n]), ("purchasable", int(n))))
        report.criterion_counts[int(cellsp[n])] += 1

    report.teacher_embed_calls = teacher.embed_calls - start_calls
    if oracle is not None:
        found = {c.key for c in candidates if c.source != "purchasable"}
        report.missed = len(oracle - found)
        report.extra = len(found - oracle)
    return report, candidates


def brute_force_screen(sets, teacher, final=DEFAULT_CRITERIA, chunk=2048):
    """Teacher over every product: the reference candidate key set."""
    keys = _pair_keys(sets)
    found = set()
    for start in range(0, len(keys), chunk):
        block = keys[start:start + chunk]
        graphs, kept = [], []
        for key in block:
            g = build_product(sets, *key)
            if postfilter(g).passed:
                graphs.append(g)
                kept.append(key)
        P = teacher.predict(graphs, chunk)
        ok = np.all(evaluate_matrix(P, final), axis=1) & (partition_array(P) > 0)
        found.update(kept[n] for n in np.flatnonzero(ok))
    return found


@dataclass(frozen=True)
class BiasReport:
    properties: tuple
    marginals: tuple
    product: float
    joint: float
    gap: float
    gap_se: float
    indicator_cov: np.ndarray

    def to_dict(self):
        return {
            "properties": list(self.properties),
            "marginal_pass_rates": dict(zip(self.properties, self.marginals)),
            "independence_product": self.product,
            "joint_pass_rate": self.joint,
            "gap": self.gap,
            "gap_std_err": self.gap_se,
            "indicator_cov": self.indicator_cov.tolist(),
        }


def bias_report(P, criteria=DEFAULT_CRITERIA):
    """Independence product of marginal pass rates vs the joint pass rate."""
    if len(criteria) < 2:
        raise ValueError("bias report needs at least two thresholds")
    passes = evaluate_matrix(P, criteria)
    if passes.shape[0] == 0:
        raise biaslab.EmptySample("no property vectors")
    marg = passes.mean(axis=0)
    joint = float(np.all(passes, axis=1).mean())
    product = float(np.prod(marg))
    return BiasReport(
        tuple(t.property for t in criteria.thresholds),
        tuple(float(m) for m in marg),
        product,
        joint,
        product - joint,
        biaslab.product_gap_se(passes),
        biaslab.pairwise_indicator_cov(passes),
    )
