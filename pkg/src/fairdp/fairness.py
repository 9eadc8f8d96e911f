"""ERMI dependence estimators, the quadratic dual saddle function, and
empirical fairness-violation metrics.

ERMI (exponential Renyi mutual information) between predictions and
sensitive groups is

    sum_{j,r} p(j,r)^2 / (p_yhat(j) * p_s(r)) - 1,

a chi-squared style dependence measure that is nonnegative and zero iff the
joint factorizes. The training objective never touches ERMI directly:
each sample contributes a function psi_i(theta, W) that is quadratic and
strongly concave in a k x l dual matrix W, and the batch maximum of the
averaged psi over W recovers the soft-prediction ERMI exactly. That is
what makes unbiased minibatch gradients (and hence private stochastic
optimization) possible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classifier import ModelParams, predict_proba
from .dataset import SensitiveStats, TabularDataset
from .exceptions import (
    DegenerateConditionalError,
    DegenerateGroupError,
    SingularityError,
)

DEMOGRAPHIC_PARITY = "demographic_parity"
EQUALIZED_ODDS = "equalized_odds"


@dataclass(frozen=True)
class DualMatrix:
    """A k x l dual variable with the entrywise box it is projected onto."""

    w: np.ndarray
    box_radius: float = math.inf

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError("dual variable must be a k x l matrix")
        if self.box_radius <= 0:
            raise ValueError("box_radius must be positive")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class FermiConfig:
    """Fairness-regularization weight and the notion it targets."""

    lam: float
    notion: str = DEMOGRAPHIC_PARITY

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.notion not in (DEMOGRAPHIC_PARITY, EQUALIZED_ODDS):
            raise ValueError(f"unknown fairness notion {self.notion!r}")


@dataclass(frozen=True)
class DualStack:
    """Per-label dual matrices and label-conditional group stats.

    Used by the equalized-odds variant: each label y owns one k x l dual
    block W_y and the sensitive-group stats conditional on Y = y; a sample
    only ever touches its own label's block.
    """

    mats: tuple[DualMatrix, ...]
    stats: tuple[SensitiveStats, ...]
    label_probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.mats) != len(self.stats) or len(self.mats) < 2:
            raise ValueError("need one dual matrix and stats object per label, l >= 2")
        lp = np.array(self.label_probs, dtype=np.float64)
        lp.setflags(write=False)
        object.__setattr__(self, "label_probs", lp)

    @property
    def l(self) -> int:
        return len(self.mats)

    @classmethod
    def initial(cls, ds: TabularDataset, box_radius: float = math.inf) -> "DualStack":
        """Zero duals plus conditional stats computed once from `ds`.

        Raises DegenerateConditionalError if any label class is absent or
        any (label, group) cell is empty.
        """
        mats, stats = [], []
        for y in range(1, ds.l + 1):
            mask = ds.labels == y
            if not mask.any():
                raise DegenerateConditionalError(f"label class {y} has no samples")
            try:
                stats.append(SensitiveStats.from_groups(ds.sensitive[mask], ds.k))
            except DegenerateGroupError as exc:
                raise DegenerateConditionalError(
                    f"within label class {y}: {exc}"
                ) from None
            mats.append(DualMatrix(np.zeros((ds.k, ds.l)), box_radius))
        label_probs = np.bincount(ds.labels - 1, minlength=ds.l) / ds.n
        return cls(tuple(mats), tuple(stats), label_probs)


def _joint_from_codes(a: np.ndarray, b: np.ndarray, dim_a: int, dim_b: int) -> np.ndarray:
    """Empirical joint distribution of two 1-based code vectors."""
    flat = np.bincount((a - 1) * dim_b + (b - 1), minlength=dim_a * dim_b)
    return flat.reshape(dim_a, dim_b) / a.shape[0]


def _ermi_from_joint(joint: np.ndarray) -> float:
    """sum p(j,r)^2 / (p_j * p_r) - 1 with 0-probability cells contributing 0."""
    p_rows = joint.sum(axis=1)
    p_cols = joint.sum(axis=0)
    mask = joint > 0
    denom = np.outer(p_rows, p_cols)
    return float((joint[mask] ** 2 / denom[mask]).sum() - 1.0)


def ermi_hard(preds: np.ndarray, s: np.ndarray, k: int | None = None, l: int | None = None) -> float:
    """ERMI of realized (hard) predictions against sensitive groups.

    Every group in 1..k must be present; prediction classes may have zero
    marginals (those cells contribute nothing).
    """
    preds = np.asarray(preds, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    if preds.shape != s.shape or preds.ndim != 1 or preds.size == 0:
        raise ValueError("preds and s must be equal-length nonempty vectors")
    k = int(s.max()) if k is None else k
    l = int(preds.max()) if l is None else l
    counts = np.bincount(s - 1, minlength=k)
    if counts.min() < 1:
        raise DegenerateGroupError("every sensitive group must appear at least once")
    return _ermi_from_joint(_joint_from_codes(preds, s, l, k))


def soft_distribution(
    theta: ModelParams, ds: TabularDataset, stats: SensitiveStats
) -> tuple[np.ndarray, np.ndarray]:
    """Soft joint p(j, r) = mean_i F_j(x_i) 1{s_i = r} and marginal p(j)."""
    probs = predict_proba(theta, ds.features)  # (n, l)
    by_group = np.zeros((stats.k, ds.l))
    np.add.at(by_group, ds.sensitive - 1, probs)
    return by_group.T / ds.n, probs.mean(axis=0)


def ermi_soft(theta: ModelParams, ds: TabularDataset, stats: SensitiveStats) -> float:
    """ERMI of the randomized classifier that predicts j with probability F_j."""
    joint, marginal = soft_distribution(theta, ds, stats)
    mask = joint > 0
    denom = marginal[:, None] * stats.probabilities[None, :]
    return float((joint[mask] ** 2 / denom[mask]).sum() - 1.0)


def ermi_conditional(
    preds: np.ndarray,
    s: np.ndarray,
    y: np.ndarray,
    k: int | None = None,
    l: int | None = None,
) -> float:
    """Label-conditional ERMI: sum_y p(y) * ERMI(preds; s | Y = y).

    Zero iff predictions are conditionally independent of the groups given
    the true label, i.e. iff equalized odds holds on this sample.
    """
    preds = np.asarray(preds, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if not preds.shape == s.shape == y.shape or preds.size == 0:
        raise ValueError("preds, s and y must be equal-length nonempty vectors")
    k = int(s.max()) if k is None else k
    l = int(max(preds.max(), y.max())) if l is None else l
    total = 0.0
    for label in np.unique(y):
        mask = y == label
        p_y = mask.mean()
        s_y = s[mask]
        if np.bincount(s_y - 1, minlength=k).min() < 1:
            raise DegenerateConditionalError(
                f"some sensitive group is absent within label class {label}"
            )
        joint = _joint_from_codes(preds[mask], s_y, l, k)
        total += p_y * (_ermi_from_joint(joint) + 1.0)
    return float(total - 1.0)


def _check_dual(theta: ModelParams, w: np.ndarray, stats: SensitiveStats) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (stats.k, theta.l):
        raise ValueError(f"dual must be {(stats.k, theta.l)}, got {w.shape}")
    return w


def psi(
    theta: ModelParams,
    w: DualMatrix | np.ndarray,
    x: np.ndarray,
    s: int,
    stats: SensitiveStats,
) -> float:
    """Per-sample saddle value.

    psi = -Tr(W diag(F) W^T) + 2 Tr(W^T P_S^{-1/2} B) - 1 with
    B[r, j] = 1{s = r} F_j(x, theta); strongly concave in W, and the batch
    maximum over W of the averaged psi equals the soft ERMI.
    """
    w = _check_dual(theta, w.w if isinstance(w, DualMatrix) else w, stats)
    probs = predict_proba(theta, x)
    quad = float((w ** 2).sum(axis=0) @ probs)
    coupling = float(w[s - 1] @ probs) * stats.inv_sqrt[s - 1]
    return -quad + 2.0 * coupling - 1.0


def psi_grad_w(
    theta: ModelParams,
    w: DualMatrix | np.ndarray,
    x: np.ndarray,
    s: int,
    stats: SensitiveStats,
) -> np.ndarray:
    """Exact dual gradient -2 W diag(F) + 2 P_S^{-1/2} B."""
    w = _check_dual(theta, w.w if isinstance(w, DualMatrix) else w, stats)
    probs = predict_proba(theta, x)
    grad = -2.0 * w * probs[None, :]
    grad[s - 1] += 2.0 * stats.inv_sqrt[s - 1] * probs
    return grad


def _psi_coeffs(w: np.ndarray, s: np.ndarray, inv_sqrt: np.ndarray) -> np.ndarray:
    """Coefficients c with psi = c . F - 1 for samples with group codes s."""
    diag_quad = (w ** 2).sum(axis=0)  # (l,)
    return -diag_quad[None, :] + 2.0 * inv_sqrt[s - 1, None] * w[s - 1, :]


def psi_grad_theta(
    theta: ModelParams,
    w: DualMatrix | np.ndarray,
    x: np.ndarray,
    s: int,
    stats: SensitiveStats,
) -> np.ndarray:
    """Model gradient of psi, chained through the probability Jacobian.

    psi depends on theta only through F, linearly: psi = sum_j c_j F_j - 1
    with c_j = -(W^T W)_{jj} + 2 W[s, j] / sqrt(p_S(s)), so the gradient is
    J^T c where J is jacobian_proba.
    """
    w = _check_dual(theta, w.w if isinstance(w, DualMatrix) else w, stats)
    x = np.asarray(x, dtype=np.float64)
    probs = predict_proba(theta, x)
    c = _psi_coeffs(w, np.array([s]), stats.inv_sqrt)[0]
    # J^T c without materializing J: a = (diag(F) - F F^T) c
    a = probs * c - probs * float(probs @ c)
    return np.concatenate([np.outer(a, x).ravel(), a])


def mean_psi_terms(
    theta: ModelParams,
    w: np.ndarray,
    features: np.ndarray,
    s: np.ndarray,
    stats: SensitiveStats,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Batch-averaged (theta-gradient, W-gradient, psi value) in one pass.

    Equivalent to averaging the per-sample psi_grad_* functions; vectorized
    for the training loop.
    """
    features = np.asarray(features, dtype=np.float64)
    s = np.asarray(s, dtype=np.int64)
    m = s.shape[0]
    probs = predict_proba(theta, features)  # (m, l)
    coeffs = _psi_coeffs(w, s, stats.inv_sqrt)  # (m, l)
    a = probs * coeffs - probs * (probs * coeffs).sum(axis=1, keepdims=True)
    grad_theta = np.concatenate([(a.T @ features).ravel(), a.sum(axis=0)]) / m

    marginal = probs.mean(axis=0)
    joint = np.zeros((stats.k, theta.l))
    np.add.at(joint, s - 1, probs)
    joint /= m
    grad_w = -2.0 * w * marginal[None, :] + 2.0 * stats.inv_sqrt[:, None] * joint

    value = float((coeffs * probs).sum() / m - 1.0)
    return grad_theta, grad_w, value


def mean_psi_terms_eo(
    theta: ModelParams,
    stack: DualStack,
    features: np.ndarray,
    s: np.ndarray,
    y: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Equalized-odds analogue of mean_psi_terms.

    Returns the batch-averaged theta gradient, an (l, k, l) array of dual
    gradients (block y collects only the samples with label y, still divided
    by the full batch size), and the averaged psi value.
    """
    features = np.asarray(features, dtype=np.float64)
    s = np.asarray(s, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    m = s.shape[0]
    l = stack.l
    probs = predict_proba(theta, features)
    w_stack = np.stack([dm.w for dm in stack.mats])  # (l, k, l)
    inv_stack = np.stack([st.inv_sqrt for st in stack.stats])  # (l, k)

    diag_quad = (w_stack ** 2).sum(axis=1)  # (l, l): row y = diag coeffs of W_y
    coeffs = -diag_quad[y - 1] + 2.0 * inv_stack[y - 1, s - 1, None] * w_stack[y - 1, s - 1, :]
    a = probs * coeffs - probs * (probs * coeffs).sum(axis=1, keepdims=True)
    grad_theta = np.concatenate([(a.T @ features).ravel(), a.sum(axis=0)]) / m

    grad_w = np.zeros((l, stack.stats[0].k, l))
    for label in range(1, l + 1):
        mask = y == label
        if not mask.any():
            continue
        p_block = probs[mask]
        marginal = p_block.sum(axis=0) / m
        joint = np.zeros((stack.stats[0].k, l))
        np.add.at(joint, s[mask] - 1, p_block)
        joint /= m
        grad_w[label - 1] = (
            -2.0 * w_stack[label - 1] * marginal[None, :]
            + 2.0 * stack.stats[label - 1].inv_sqrt[:, None] * joint
        )

    value = float((coeffs * probs).sum() / m - 1.0)
    return grad_theta, grad_w, value


def eo_psi_grads(
    theta: ModelParams,
    stack: DualStack,
    x: np.ndarray,
    s: int,
    y: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample equalized-odds gradients (theta part, dual block of label y)."""
    if not 1 <= y <= stack.l:
        raise ValueError(f"label {y} out of range 1..{stack.l}")
    stats_y = stack.stats[y - 1]
    w_y = stack.mats[y - 1]
    return (
        psi_grad_theta(theta, w_y, x, s, stats_y),
        psi_grad_w(theta, w_y, x, s, stats_y),
    )


def inner_max_closed_form(
    theta: ModelParams,
    ds: TabularDataset,
    stats: SensitiveStats,
    ridge: float | None = 1e-8,
) -> DualMatrix:
    """Maximizer of the batch-averaged psi over unconstrained W.

    First-order condition of the strongly concave quadratic gives
    W*[r, j] = p(j, r) / (sqrt(p_S(r)) * p_yhat(j)) with soft distributions.
    A zero soft marginal (saturated model) gets a small ridge added before
    the inversion; pass ridge=None to raise SingularityError instead.
    """
    joint, marginal = soft_distribution(theta, ds, stats)
    if marginal.min() <= 0.0:
        if ridge is None:
            raise SingularityError("a soft class marginal is zero")
        marginal = marginal + ridge
    w_star = joint.T * stats.inv_sqrt[:, None] / marginal[None, :]
    return DualMatrix(w_star)


def dp_violation(preds: np.ndarray, s: np.ndarray, k: int | None = None) -> float:
    """Worst-case gap max_{j, r1, r2} |P[yhat=j | s=r1] - P[yhat=j | s=r2]|."""
    preds = np.asarray(preds, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    if preds.shape != s.shape or preds.size == 0:
        raise ValueError("preds and s must be equal-length nonempty vectors")
    k = int(s.max()) if k is None else k
    l = int(preds.max())
    counts = np.bincount(s - 1, minlength=k).astype(float)
    if counts.min() < 1:
        raise DegenerateGroupError("every sensitive group must appear at least once")
    joint = _joint_from_codes(preds, s, l, k)  # rows: class, cols: group
    conditionals = joint / (counts / preds.shape[0])[None, :]
    return float((conditionals.max(axis=1) - conditionals.min(axis=1)).max())


def eo_violation(
    preds: np.ndarray, s: np.ndarray, y: np.ndarray, k: int | None = None, l: int | None = None
) -> float:
    """Worst-case equalized-odds gap.

    For every class j and group pair, compares P[yhat=j | s, y=j] and
    P[yhat=j | s, y!=j] across groups and returns the largest absolute
    difference. Every (class, group) stratum on both sides must be nonempty.
    """
    preds = np.asarray(preds, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if not preds.shape == s.shape == y.shape or preds.size == 0:
        raise ValueError("preds, s and y must be equal-length nonempty vectors")
    k = int(s.max()) if k is None else k
    l = int(max(preds.max(), y.max())) if l is None else l
    worst = 0.0
    for j in range(1, l + 1):
        for stratum in (y == j, y != j):
            rates = np.empty(k)
            for r in range(1, k + 1):
                cell = stratum & (s == r)
                if not cell.any():
                    raise DegenerateConditionalError(
                        f"empty stratum for class {j}, group {r}"
                    )
                rates[r - 1] = (preds[cell] == j).mean()
            worst = max(worst, float(rates.max() - rates.min()))
    return worst
