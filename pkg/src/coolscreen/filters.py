"""Structure-based screening rules."""

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum

from .molgraph import Element

STRAINED_MAX = 4


class Violation(str, Enum):
    HalogenFBrI = "HalogenFBrI"
    Sulfur = "Sulfur"
    AromaticRing = "AromaticRing"
    StrainedRing = "StrainedRing"
    Chlorine = "Chlorine"


@dataclass(frozen=True)
class FilterVerdict:
    passed: bool
    violations: tuple

    @classmethod
    def of(cls, violations):
        v = tuple(violations)
        return cls(not v, v)


def _base_violations(g):
    elements = {a.element for a in g.atoms}
    out = []
    if elements & {Element.F, Element.Br, Element.I}:
        out.append(Violation.HalogenFBrI)
    if Element.S in elements:
        out.append(Violation.Sulfur)
    rings = g.ring_info
    if any(r.aromatic for r in rings) or any(a.aromatic for a in g.atoms):
        out.append(Violation.AromaticRing)
    if any(len(r) <= STRAINED_MAX for r in rings):
        out.append(Violation.StrainedRing)
    return out, elements


def prefilter(g):
    """Reject F/Br/I, sulfur, aromatic rings and rings of <= 4 atoms.
    Chlorine is allowed at this stage (alkyl chloride reactants)."""
    out, _ = _base_violations(g)
    return FilterVerdict.of(out)


def postfilter(g):
    out, elements = _base_violations(g)
    if Element.Cl in elements:
        out.append(Violation.Chlorine)
    return FilterVerdict.of(out)


STAGES = {"pre": prefilter, "post": postfilter}


class FilterReport:
    """Aggregated counts over a molecule stream; merge is associative."""

    def __init__(self):
        self.total = 0
        self.passed = 0
        self.violations = Counter()

    def add(self, verdict):
        self.total += 1
        self.passed += verdict.passed
        self.violations.update(v.value for v in verdict.violations)

    def merge(self, other):
        out = FilterReport()
        out.total = self.total + other.total
        out.passed = self.passed + other.passed
        out.violations = self.violations + other.violations
        return out

    def to_dict(self):
        return {
            "total": self.total,
            "passed": self.passed,
            "violations": {v.value: self.violations.get(v.value, 0) for v in Violation},
        }

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
