"""Acquisition scores and batch selectors.

Scored strategies (``mell``, ``mezl``, ``bald``, ``entropy``, ``entropy_mc``,
``random``) produce one real per candidate and are turned into a batch by
:func:`select_top_k`. ``coreset`` and ``badge`` select batches directly.

Every per-candidate reduction runs in a fixed order (validation points
ascending, posterior samples ascending, class cells ascending), so scoring a
partition of the pool gives bit-identical values to scoring it whole.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from eerlab.errors import ConfigError, InvalidTensorError
from eerlab.posterior import (
    PosteriorPredictiveTensor,
    _plogp,
    entropy_rows,
)

STRATEGIES = ("mell", "mezl", "bald", "entropy", "entropy_mc", "random", "coreset", "badge")
#: strategies that need Monte Carlo posterior samples
TENSOR_STRATEGIES = frozenset({"mell", "mezl", "bald", "entropy_mc"})
#: strategies that score against the unlabeled validation set
VALIDATION_STRATEGIES = frozenset({"mell", "mezl"})
#: strategies that need the model's penultimate representation
EMBEDDING_STRATEGIES = frozenset({"coreset", "badge"})

_BLOCK = 64

# relative gap below which two scores count as tied (see rank_order)
TIE_RTOL = 1e-9


@dataclass
class SelectionBatch:
    """Ordered batch of chosen indices.

    ``rationale[k]`` is the score (top-k), the covering distance (coreset) or
    the sampling weight (badge) in effect when ``chosen[k]`` was picked.
    ``truncated`` is set when fewer than the requested number were available.
    """

    chosen: np.ndarray
    rationale: np.ndarray
    truncated: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.chosen)

    def tolist(self) -> list[int]:
        return [int(i) for i in self.chosen]


def _as_index(idx, n: int, name: str) -> np.ndarray:
    arr = np.asarray(idx, dtype=np.intp).reshape(-1)
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        raise IndexError(f"{name} contains indices outside [0, {n})")
    return arr


def _check_pool_val(tensor, pool_idx, val_idx):
    n = tensor.n_points
    pool = _as_index(pool_idx, n, "pool_idx")
    val = _as_index(val_idx, n, "val_idx")
    if val.size == 0:
        raise ConfigError("expected-error-reduction scores need a nonempty validation set")
    if pool.size == 0:
        raise ConfigError("pool_idx is empty")
    if np.intersect1d(pool, val).size:
        raise ConfigError("pool_idx and val_idx must be disjoint")
    return pool, val


def _ordered_sum(x: np.ndarray, axis: int) -> np.ndarray:
    """Sum along ``axis`` strictly in ascending index order."""
    x = np.moveaxis(x, axis, 0)
    total = np.zeros(x.shape[1:], dtype=np.float64)
    for k in range(x.shape[0]):
        total += x[k]
    return total


def pair_joints(pool_probs: np.ndarray, val_probs: np.ndarray) -> np.ndarray:
    """Batched pairwise joints.

    ``pool_probs`` is ``(T, B, C)``, ``val_probs`` is ``(T, L, C)``; the result
    is ``(B, L, C, C)`` with ``out[b, l, c, c'] = mean_t p_t(b, c) p_t(l, c')``.
    """
    T, B, C = pool_probs.shape
    L = val_probs.shape[1]
    acc = np.zeros((B, L, C, C))
    buf = np.empty_like(acc)
    for t in range(T):
        np.multiply(pool_probs[t][:, None, :, None], val_probs[t][None, :, None, :], out=buf)
        acc += buf
    acc /= T
    return acc


def _cell_entropy(joints: np.ndarray) -> np.ndarray:
    """Entropy of each ``(C, C)`` table in a ``(B, L, C, C)`` stack."""
    B, L, C, _ = joints.shape
    terms = _plogp(joints).reshape(B, L, C * C)
    return -_ordered_sum(terms, axis=2)


def _blocks(pool: np.ndarray):
    for start in range(0, pool.size, _BLOCK):
        yield slice(start, start + _BLOCK)


def score_mell(tensor: PosteriorPredictiveTensor, pool_idx, val_idx) -> np.ndarray:
    """Minimum expected log-loss score ``n_val H(Y_i) - sum_j H(Y_j, Y_i)``.

    Equals ``-sum_j H(Y_j | Y_i)``, the negated expected log loss on the
    validation set after observing ``Y_i``, and differs from
    ``sum_j I(Y_i; Y_j)`` only by the candidate-independent ``sum_j H(Y_j)``.
    """
    pool, val = _check_pool_val(tensor, pool_idx, val_idx)
    probs = tensor.probs
    val_probs = np.ascontiguousarray(probs[:, val])
    h_pool = entropy_rows(_ordered_sum(probs[:, pool], axis=0) / tensor.n_samples)
    scores = np.empty(pool.size)
    for blk in _blocks(pool):
        joints = pair_joints(np.ascontiguousarray(probs[:, pool[blk]]), val_probs)
        h_joint = _ordered_sum(_cell_entropy(joints), axis=1)
        scores[blk] = val.size * h_pool[blk] - h_joint
    return scores


def score_mezl(tensor: PosteriorPredictiveTensor, pool_idx, val_idx) -> np.ndarray:
    """Minimum expected zero-one loss score ``sum_c sum_j max_c' Pr(Y_j=c', Y_i=c)``.

    The constant ``-n_val`` is dropped.
    """
    pool, val = _check_pool_val(tensor, pool_idx, val_idx)
    probs = tensor.probs
    val_probs = np.ascontiguousarray(probs[:, val])
    scores = np.empty(pool.size)
    for blk in _blocks(pool):
        joints = pair_joints(np.ascontiguousarray(probs[:, pool[blk]]), val_probs)
        best = joints.max(axis=3)  # (B, L, C): best validation class per candidate class
        scores[blk] = _ordered_sum(_ordered_sum(best, axis=2), axis=1)
    return scores


def score_eer_full(tensor: PosteriorPredictiveTensor, pool_idx, val_idx, loss: str = "log") -> np.ndarray:
    """Two-term expected loss reduction evaluated literally.

    First term: summed optimal expected loss on the validation set now.
    Second term: the same after conditioning on each possible label of the
    candidate, averaged over that label. Used to cross-check the reduced
    ``mell``/``mezl`` scores, which drop the first (constant) term.
    """
    if loss not in ("log", "zero-one"):
        raise ConfigError(f"unknown loss {loss!r}")
    pool, val = _check_pool_val(tensor, pool_idx, val_idx)
    probs = tensor.probs
    val_marg = probs[:, val].mean(axis=0)
    pool_marg = probs[:, pool].mean(axis=0)
    if loss == "log":
        current = entropy_rows(val_marg).sum()
    else:
        current = (1.0 - val_marg.max(axis=1)).sum()

    val_probs = np.ascontiguousarray(probs[:, val])
    scores = np.empty(pool.size)
    for blk in _blocks(pool):
        joints = pair_joints(np.ascontiguousarray(probs[:, pool[blk]]), val_probs)
        p_label = pool_marg[blk]  # (B, C)
        denom = np.where(p_label > 0, p_label, 1.0)[:, None, :, None]
        cond = joints / denom  # Pr(Y_j = c' | Y_i = c)
        if loss == "log":
            per_label = entropy_rows(cond, axis=3)
        else:
            per_label = 1.0 - cond.max(axis=3)
        per_label = np.where(p_label[:, None, :] > 0, per_label, 0.0)
        expected = (per_label * p_label[:, None, :]).sum(axis=(1, 2))
        scores[blk] = current - expected
    return scores


def score_bald(tensor: PosteriorPredictiveTensor, pool_idx) -> np.ndarray:
    """Mutual information between label and parameters.

    Entropy of the mean predictive minus the mean per-sample entropy.
    """
    pool = _as_index(pool_idx, tensor.n_points, "pool_idx")
    probs = tensor.probs[:, pool]
    total = entropy_rows(_ordered_sum(probs, axis=0) / tensor.n_samples)
    aleatoric = _ordered_sum(entropy_rows(probs), axis=0) / tensor.n_samples
    return total - aleatoric


def score_entropy_mc(tensor: PosteriorPredictiveTensor, pool_idx) -> np.ndarray:
    """Entropy of the Monte Carlo mean predictive."""
    pool = _as_index(pool_idx, tensor.n_points, "pool_idx")
    return entropy_rows(_ordered_sum(tensor.probs[:, pool], axis=0) / tensor.n_samples)


def score_entropy(point_probs, pool_idx) -> np.ndarray:
    """Entropy of the point-estimate predictive (no posterior sampling)."""
    point_probs = np.asarray(point_probs, dtype=np.float64)
    pool = _as_index(pool_idx, point_probs.shape[0], "pool_idx")
    rows = point_probs[pool]
    if np.any(rows < 0) or np.any(np.abs(rows.sum(axis=1) - 1.0) > 1e-9):
        raise InvalidTensorError("point_probs rows must be probability distributions")
    return entropy_rows(rows)


def score_random(seed, n: int) -> np.ndarray:
    """``n`` uniform draws on ``[0, 1)``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return np.random.default_rng(seed).random(n)


def rank_order(scores, rtol: float = TIE_RTOL) -> np.ndarray:
    """Positions from best to worst score, with numerical ties in index order.

    Scores that are mathematically equal (e.g. every MELL score when the
    posterior has a single sample) come out of floating point with noise of
    order 1e-11. Walking the sorted scores, a new tie group starts whenever
    the drop from the previous score exceeds ``rtol * max(1, max|score|)``;
    within a group positions are ascending.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        return np.empty(0, dtype=np.intp)
    order = np.argsort(-scores, kind="stable")
    tol = rtol * max(1.0, float(np.abs(scores).max()))
    group = np.concatenate([[0], np.cumsum(-np.diff(scores[order]) > tol)])
    return order[np.lexsort((order, group))]


def select_top_k(scores, k: int) -> SelectionBatch:
    """Positions of the ``k`` largest scores; ties go to the lower position."""
    scores = np.asarray(scores, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be at least 1")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    truncated = k > scores.size
    order = rank_order(scores)[:k]
    return SelectionBatch(order, scores[order], truncated)


def select_coreset(embeddings, labeled_idx, pool_idx, k: int) -> SelectionBatch:
    """Greedy k-center: repeatedly take the pool point farthest from all centers.

    Centers are the labeled points plus everything chosen so far. Distances are
    Euclidean. With no labeled points the first pick is the lowest pool index.
    Returns pool indices (global row numbers of ``embeddings``).
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be at least 1")
    labeled = _as_index(labeled_idx, emb.shape[0], "labeled_idx")
    pool = np.sort(_as_index(pool_idx, emb.shape[0], "pool_idx"))
    truncated = k > pool.size
    k = min(k, pool.size)
    cand = emb[pool]

    if labeled.size:
        min_dist = np.full(pool.size, np.inf)
        centers = emb[labeled]
        for start in range(0, centers.shape[0], 256):
            d = _sq_dist(cand, centers[start:start + 256]).min(axis=1)
            np.minimum(min_dist, d, out=min_dist)
    else:
        min_dist = np.full(pool.size, np.inf)

    available = np.ones(pool.size, dtype=bool)
    chosen, rationale = [], []
    for _ in range(k):
        if not labeled.size and not chosen:
            pos = 0
        else:
            masked = np.where(available, min_dist, -np.inf)
            pos = int(np.argmax(masked))
        chosen.append(int(pool[pos]))
        rationale.append(float(np.sqrt(min_dist[pos])) if np.isfinite(min_dist[pos]) else np.inf)
        available[pos] = False
        np.minimum(min_dist, _sq_dist(cand, cand[pos:pos + 1])[:, 0], out=min_dist)
    return SelectionBatch(np.asarray(chosen, dtype=np.intp), np.asarray(rationale), truncated)


def _sq_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return cdist(a, b, "sqeuclidean")


def badge_embedding(prob_row, penultimate) -> np.ndarray:
    """Last-layer cross-entropy gradient for the hypothesised label.

    ``(p - onehot(argmax p)) ⊗ h`` flattened class-major; argmax ties go to
    the lowest class.
    """
    p = np.asarray(prob_row, dtype=np.float64)
    h = np.asarray(penultimate, dtype=np.float64)
    if h.size == 0:
        raise ValueError("empty feature vector")
    resid = p.copy()
    resid[int(np.argmax(p))] -= 1.0
    return np.outer(resid, h).reshape(-1)


def badge_embeddings(probs, features) -> np.ndarray:
    """Row-wise :func:`badge_embedding` for ``(N, C)`` probs and ``(N, d)`` features."""
    probs = np.asarray(probs, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    resid = probs.copy()
    resid[np.arange(len(probs)), probs.argmax(axis=1)] -= 1.0
    return (resid[:, :, None] * features[:, None, :]).reshape(len(probs), -1)


def select_badge(grad_embeddings, k: int, seed) -> SelectionBatch:
    """k-means++ seeding over gradient embeddings.

    The first center is uniform; each later center is drawn with probability
    proportional to the squared distance to its nearest chosen center. When
    every remaining distance is zero the draw is uniform over unchosen rows.
    Returns row positions.
    """
    emb = np.asarray(grad_embeddings, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be at least 1")
    n = emb.shape[0]
    truncated = k > n
    k = min(k, n)
    rng = np.random.default_rng(seed)
    available = np.ones(n, dtype=bool)
    min_dist = np.full(n, np.inf)
    chosen, weights = [], []
    for step in range(k):
        if step == 0:
            pos = int(rng.integers(n))
            weights.append(1.0 / n)
        else:
            d = np.where(available, min_dist, 0.0)
            total = d.sum()
            if total > 0:
                prob = d / total
            else:
                prob = available / available.sum()
            pos = int(rng.choice(n, p=prob))
            weights.append(float(prob[pos]))
        chosen.append(pos)
        available[pos] = False
        np.minimum(min_dist, _sq_dist(emb, emb[pos:pos + 1])[:, 0], out=min_dist)
    return SelectionBatch(np.asarray(chosen, dtype=np.intp), np.asarray(weights), truncated)


def verify_optimal_prediction(joint, trials: int, seed) -> bool:
    """Check that the conditional predictive minimises expected log loss.

    For every conditioning value with positive mass, the expected loss of
    ``Pr(Y_j | Y_i = y)`` is compared against ``trials`` random points of the
    simplex; returns ``False`` if any alternative wins by more than 1e-9.
    """
    joint = np.asarray(joint, dtype=np.float64)
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    C = joint.shape[1]
    for row in joint:
        mass = row.sum()
        if mass <= 0:
            continue
        cond = row / mass
        best = expected_log_loss(cond, cond)
        alternatives = rng.dirichlet(np.ones(C), size=trials)
        for alt in alternatives:
            if expected_log_loss(cond, alt) < best - 1e-9:
                return False
    return True


def expected_log_loss(p, a) -> float:
    """``E_{y ~ p}[-log a_y]``; infinite if ``a`` misses support of ``p``."""
    p = np.asarray(p, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    support = p > 0
    if np.any(a[support] <= 0):
        return np.inf
    return float(-(p[support] * np.log(a[support])).sum())
