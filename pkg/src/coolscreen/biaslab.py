"""Disjoint-property bias: indicator covariance, Gaussian orthant
probabilities and the multi-criteria false-positive simulation.

For events U, V on one population the joint pass rate splits exactly as
P(U and V) = P(U) P(V) + Cov(1_U, 1_V); multiplying marginals therefore
overestimates the joint whenever the indicator covariance is negative.
"""

import csv
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtr

from ._kernels import bvn_rect

UPPER = 8.0
GL_POINTS = 16
_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(GL_POINTS)


class EmptySample(ValueError):
    pass


class NonPSDMatrix(ValueError):
    pass


class Direction(str, Enum):
    greater = "greater"
    less = "less"


@dataclass(frozen=True)
class EventSpec:
    variable: str  # "X" or "Y"
    direction: Direction
    threshold: float

    def __post_init__(self):
        if self.variable not in ("X", "Y"):
            raise ValueError(f"variable must be X or Y, got {self.variable!r}")
        object.__setattr__(self, "direction", Direction(self.direction))
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")

    def indicator(self, samples):
        col = samples[:, 0 if self.variable == "X" else 1]
        if self.direction is Direction.greater:
            return col > self.threshold
        return col < self.threshold


@dataclass(frozen=True)
class BiasEstimate:
    p_joint: float
    p_u: float
    p_v: float
    product: float
    cov_indicators: float
    gap: float
    mc_std_err: float

    @property
    def identity_residual(self):
        return self.p_joint - self.product - self.cov_indicators


def gap_influence(passes):
    """Per-sample influence of prod_j p_j - p_joint (delta method).

    ``passes`` is an (n, k) boolean matrix of per-criterion indicators.  The
    influence of sample i is sum_j (prod_{l != j} p_l)(a_ij - p_j) minus
    (J_i - p_joint), with J the all-pass indicator.
    """
    a = np.asarray(passes, dtype=float)
    p = a.mean(axis=0)
    joint = np.all(a > 0, axis=1).astype(float)
    infl = -(joint - joint.mean())
    for j in range(a.shape[1]):
        infl += np.prod(np.delete(p, j)) * (a[:, j] - p[j])
    return infl


def product_gap_se(passes):
    """Delta-method standard error of the independence-product gap."""
    n = np.shape(passes)[0]
    if n < 2:
        return float("nan")
    return float(gap_influence(passes).std(ddof=1) / math.sqrt(n))


def indicator_cov(samples, u, v):
    """Empirical bias decomposition for events ``u`` and ``v``."""
    samples = np.asarray(samples, dtype=float).reshape(-1, 2)
    if samples.shape[0] == 0:
        raise EmptySample("need at least one sample")
    a = u.indicator(samples).astype(float)
    b = v.indicator(samples).astype(float)
    p_u, p_v = a.mean(), b.mean()
    p_joint = (a * b).mean()
    cov = ((a - p_u) * (b - p_v)).mean()
    product = p_u * p_v
    est = BiasEstimate(
        float(p_joint), float(p_u), float(p_v), float(product), float(cov),
        float(product - p_joint), product_gap_se(np.column_stack([a, b])),
    )
    if abs(est.identity_residual) > 1e-12:
        raise ArithmeticError(f"indicator identity violated by {est.identity_residual:.3e}")
    return est


def pairwise_indicator_cov(passes):
    """(k, k) covariance matrix of boolean pass indicators."""
    a = np.asarray(passes, dtype=float)
    if a.shape[0] == 0:
        raise EmptySample("need at least one sample")
    c = a - a.mean(axis=0)
    return c.T @ c / a.shape[0]


def _adaptive(x0, x1, y0, y1, rho, tol, depth=0):
    whole = bvn_rect(x0, x1, y0, y1, rho, _NODES, _WEIGHTS)
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    quads = [
        bvn_rect(x0, xm, y0, ym, rho, _NODES, _WEIGHTS),
        bvn_rect(xm, x1, y0, ym, rho, _NODES, _WEIGHTS),
        bvn_rect(x0, xm, ym, y1, rho, _NODES, _WEIGHTS),
        bvn_rect(xm, x1, ym, y1, rho, _NODES, _WEIGHTS),
    ]
    fine = sum(quads)
    if abs(fine - whole) <= tol or depth >= 12:
        return fine
    sub = tol / 4.0
    return (
        _adaptive(x0, xm, y0, ym, rho, sub, depth + 1)
        + _adaptive(xm, x1, y0, ym, rho, sub, depth + 1)
        + _adaptive(x0, xm, ym, y1, rho, sub, depth + 1)
        + _adaptive(xm, x1, ym, y1, rho, sub, depth + 1)
    )


def upper_orthant(t1, t2, rho, tol=1e-11):
    """P(X > t1, Y > t2) for a standard bivariate normal with correlation rho."""
    if not -1.0 <= rho <= 1.0:
        raise ValueError("correlation must lie in [-1, 1]")
    if rho == 1.0:
        return float(ndtr(-max(t1, t2)))
    if rho == -1.0:
        return float(max(0.0, ndtr(-t2) - ndtr(t1)))
    x0, y0 = max(t1, -UPPER), max(t2, -UPPER)
    if x0 >= UPPER or y0 >= UPPER:
        return 0.0
    return float(min(1.0, max(0.0, _adaptive(x0, UPPER, y0, UPPER, rho, tol))))


def gaussian_joint(t1, t2, rho, directions=("greater", "greater")):
    """Joint probability of two threshold events on a standard bivariate
    normal.  ``less`` events are reflected (t -> -t, rho -> -rho) onto the
    upper orthant."""
    d1, d2 = (Direction(d) for d in directions)
    if d1 is Direction.less:
        t1, rho = -t1, -rho
    if d2 is Direction.less:
        t2, rho = -t2, -rho
    return upper_orthant(t1, t2, rho)


def tail(t, direction="greater"):
    return float(ndtr(-t) if Direction(direction) is Direction.greater else ndtr(t))


def orthant_closed_form(rho):
    """P(X > 0, Y > 0) = 1/4 + asin(rho) / (2 pi)."""
    return 0.25 + math.asin(rho) / (2.0 * math.pi)


INTEGRATOR_TOL = 1e-8


def case1_check(rho, t1, t2):
    """Non-positive correlation, same-direction events: joint <= product."""
    if rho > 0:
        raise ValueError("case I needs rho <= 0")
    joint = gaussian_joint(t1, t2, rho, ("greater", "greater"))
    return joint <= tail(t1) * tail(t2) + INTEGRATOR_TOL


def case2_check(rho, t1, t2):
    """Non-negative correlation, opposing events X > t1, Y < t2: joint <= product."""
    if rho < 0:
        raise ValueError("case II needs rho >= 0")
    joint = gaussian_joint(t1, t2, rho, ("greater", "less"))
    return joint <= tail(t1) * tail(t2, "less") + INTEGRATOR_TOL


def monotonicity_scan(t1, t2, rhos):
    """Upper-orthant probability along a sorted rho grid.

    Returns (rows, monotone) with rows of (rho, probability).
    """
    rhos = [float(r) for r in rhos]
    if any(b < a for a, b in zip(rhos, rhos[1:])):
        raise ValueError("rho grid must be sorted")
    rows = [(r, gaussian_joint(t1, t2, r)) for r in rhos]
    monotone = all(b[1] >= a[1] - INTEGRATOR_TOL for a, b in zip(rows, rows[1:]))
    return rows, monotone


def check_psd(corr, tol=1e-12):
    corr = np.asarray(corr, dtype=float)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise NonPSDMatrix(f"correlation matrix must be square, got {corr.shape}")
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise NonPSDMatrix("correlation matrix is not symmetric")
    if not np.allclose(np.diag(corr), 1.0):
        raise NonPSDMatrix("correlation matrix needs a unit diagonal")
    low = float(np.linalg.eigvalsh(corr).min())
    if low < -tol:
        raise NonPSDMatrix(f"correlation matrix has eigenvalue {low:.4f} < 0")
    return corr


def equicorrelation(k, rho):
    c = np.full((k, k), float(rho))
    np.fill_diagonal(c, 1.0)
    return c


def banded_correlation(k, rho):
    """Adjacent criteria correlated by rho, others independent."""
    c = np.eye(k)
    idx = np.arange(k - 1)
    c[idx, idx + 1] = c[idx + 1, idx] = rho
    return c


@dataclass(frozen=True)
class InflationPoint:
    k: int
    product: float
    joint: float
    gap: float
    gap_se: float
    step_se: float
    predicted_pass: float
    fp_fraction: float
    fp_se: float


def fp_inflation_sim(corr, thresholds, sigma_pred=0.0, n=1_000_000, seed=0, ks=None):
    """False-positive inflation as criteria accumulate.

    True properties are drawn from N(0, corr); each predictor adds
    independent N(0, sigma_pred^2) noise.  For each k the first k criteria
    (X_j > thresholds[j]) are combined and the independence product of
    marginal pass rates is compared with the true joint pass rate.  The
    false-positive fraction is the share of predicted passes that truly
    fail at least one criterion.
    """
    corr = check_psd(corr)
    K = corr.shape[0]
    thresholds = np.broadcast_to(np.asarray(thresholds, dtype=float), (K,))
    ks = list(ks or range(1, K + 1))
    rng = np.random.default_rng(seed)
    w, V = np.linalg.eigh(corr)
    L = V * np.sqrt(np.clip(w, 0.0, None))
    X = rng.standard_normal((n, K)) @ L.T
    passes = X > thresholds
    pred = passes
    if sigma_pred > 0:
        pred = (X + sigma_pred * rng.standard_normal((n, K))) > thresholds
    out = []
    prev = None
    for k in ks:
        a = passes[:, :k]
        p = a.mean(axis=0)
        joint = float(np.all(a, axis=1).mean())
        product = float(np.prod(p))
        infl = gap_influence(a)
        gap_se = float(infl.std(ddof=1) / math.sqrt(n))
        # paired error of gap_k - gap_(previous k) on the same samples
        step_se = float((infl - prev).std(ddof=1) / math.sqrt(n)) if prev is not None else float("nan")
        prev = infl
        pp = np.all(pred[:, :k], axis=1)
        n_pp = int(pp.sum())
        if n_pp:
            fp = float((~np.all(a[pp], axis=1)).mean())
            fp_se = math.sqrt(fp * (1 - fp) / n_pp)
        else:
            fp, fp_se = 0.0, 0.0
        out.append(InflationPoint(k, product, joint, product - joint, gap_se, step_se, n_pp / n, fp, fp_se))
    return out


def write_curve(path, points):
    """Plot-ready CSV with one row per k."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "product", "joint", "gap", "gap_err", "step_err", "predicted_pass", "fp_fraction", "fp_err"])
        for p in points:
            w.writerow([p.k, f"{p.product:.8f}", f"{p.joint:.8f}", f"{p.gap:.8f}", f"{p.gap_se:.8f}", f"{p.step_se:.8f}",
                        f"{p.predicted_pass:.8f}", f"{p.fp_fraction:.8f}", f"{p.fp_se:.8f}"])


def strictly_increasing(points, n_se=3.0):
    """True when each gap exceeds the previous one by more than ``n_se``
    paired standard errors."""
    return all(b.gap - a.gap > n_se * b.step_se for a, b in zip(points, points[1:]))
