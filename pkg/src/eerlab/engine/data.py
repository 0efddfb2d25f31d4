"""Synthetic Gaussian-mixture data, split construction and subsampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from eerlab.errors import ConfigError


@dataclass(frozen=True)
class MixtureSpec:
    """Class-conditional Gaussian mixtures with isotropic components.

    ``means`` has shape ``(C, clusters_per_class, d)``; when omitted the
    component means are drawn from ``N(0, separation^2 I)`` with ``seed``.
    ``brightness_std`` adds one class-independent offset per point to every
    feature, so the shift proxy (lowest feature mean) cuts across classes
    instead of isolating one cluster.
    """

    n_features: int = 2
    n_classes: int = 3
    clusters_per_class: int = 1
    separation: float = 3.0
    cluster_std: float = 1.0
    brightness_std: float = 0.0
    means: np.ndarray | None = None

    def component_means(self, rng) -> np.ndarray:
        if self.means is not None:
            means = np.asarray(self.means, dtype=np.float64)
            if means.ndim == 2:
                means = means[:, None, :]
            return means
        return rng.normal(0.0, self.separation, (self.n_classes, self.clusters_per_class, self.n_features))


def make_synthetic_dataset(spec: MixtureSpec, n: int, seed) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw ``n`` labelled points; returns ``(features, labels, means)``.

    Labels are balanced up to rounding, then shuffled.
    """
    if spec.n_classes < 2:
        raise ConfigError("need at least two classes")
    rng = np.random.default_rng(seed)
    means = spec.component_means(rng)
    C, k, d = means.shape
    labels = np.arange(n) % C
    rng.shuffle(labels)
    comp = rng.integers(k, size=n)
    X = means[labels, comp] + rng.normal(0.0, spec.cluster_std, (n, d))
    if spec.brightness_std > 0:
        X += rng.normal(0.0, spec.brightness_std, (n, 1))
    return X, labels, means


def bayes_posterior(X, means, cluster_std: float) -> np.ndarray:
    """Exact class posterior for a balanced mixture with equal-weight components."""
    X = np.asarray(X, dtype=np.float64)
    sq = ((X[:, None, None, :] - means[None]) ** 2).sum(axis=-1)  # (n, C, k)
    log_comp = -0.5 * sq / cluster_std ** 2
    log_class = logsumexp(log_comp, axis=2)
    return np.exp(log_class - logsumexp(log_class, axis=1, keepdims=True))


@dataclass
class DataSplitState:
    """Features, hidden labels and the evolving index sets.

    ``labeled_idx`` starts equal to ``seed_idx`` and grows as labels are
    revealed; ``pool_idx`` shrinks by the same amount.
    """

    features: np.ndarray
    hidden_labels: np.ndarray
    seed_idx: np.ndarray
    pool_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    labeled_idx: np.ndarray

    def reveal(self, chosen) -> "DataSplitState":
        chosen = np.asarray(chosen, dtype=np.intp)
        if np.setdiff1d(chosen, self.pool_idx).size or np.unique(chosen).size != chosen.size:
            raise ValueError("selection must be distinct pool indices")
        keep = ~np.isin(self.pool_idx, chosen)
        return DataSplitState(
            self.features, self.hidden_labels, self.seed_idx, self.pool_idx[keep],
            self.val_idx, self.test_idx, np.concatenate([self.labeled_idx, chosen]),
        )

    def check_disjoint(self) -> None:
        sets = [self.seed_idx, self.pool_idx, self.val_idx, self.test_idx]
        total = np.concatenate(sets)
        if np.unique(total).size != total.size:
            raise AssertionError("base index sets overlap")


def induce_shift(features, n_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Split into source (``n_seed`` lowest feature means) and target (the rest).

    Ties at the cutoff are broken by lower index. Both arrays are sorted.
    """
    features = np.asarray(features, dtype=np.float64)
    if n_seed > features.shape[0]:
        raise ConfigError("not enough points for the requested source size")
    order = np.lexsort((np.arange(features.shape[0]), features.mean(axis=1)))
    return np.sort(order[:n_seed]), np.sort(order[n_seed:])


def make_splits(features, labels, n_seed, n_val, n_pool, n_test, shift: str, seed) -> DataSplitState:
    """Build seed / pool / val / test index sets.

    Without shift all four are a uniform random partition. With induced shift
    the seed set is the low-feature-mean source and the other three are
    drawn uniformly from the target.
    """
    n = len(features)
    need = n_seed + n_val + n_pool + n_test
    if need > n:
        raise ConfigError(f"need {need} points, dataset has {n}")
    rng = np.random.default_rng(seed)
    if shift == "induced":
        source, target = induce_shift(features, n_seed)
        seed_idx = source
        rest = rng.permutation(target)
    elif shift == "none":
        perm = rng.permutation(n)
        seed_idx, rest = np.sort(perm[:n_seed]), perm[n_seed:]
    else:
        raise ConfigError(f"unknown shift setting {shift!r}")
    val_idx = np.sort(rest[:n_val])
    pool_idx = np.sort(rest[n_val:n_val + n_pool])
    test_idx = np.sort(rest[n_val + n_pool:n_val + n_pool + n_test])
    state = DataSplitState(np.asarray(features), np.asarray(labels), seed_idx, pool_idx,
                           val_idx, test_idx, seed_idx.copy())
    state.check_disjoint()
    return state


def subsample(idx, m: int, seed) -> tuple[np.ndarray, bool]:
    """Uniform subset of size ``m`` without replacement, sorted.

    Returns ``(subset, truncated)``; ``truncated`` is set when ``m`` exceeds
    the set size and the whole set is returned.
    """
    idx = np.asarray(idx, dtype=np.intp)
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m >= idx.size:
        return idx.copy(), m > idx.size
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(idx, size=m, replace=False)), False
