"""The pool-based active-learning loop."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from eerlab import strategies as st
from eerlab.engine.config import ExperimentConfig
from eerlab.engine.data import DataSplitState, MixtureSpec, make_splits, make_synthetic_dataset, subsample
from eerlab.engine.metrics import auc_simpson
from eerlab.errors import ConfigError
from eerlab.models.mlp import DropoutMlp

log = logging.getLogger(__name__)

_STREAMS = {"split": 0, "train": 1, "posterior": 2, "pool": 3, "val": 4, "random": 5, "badge": 6}


def derive_seed(seed: int, iteration: int, stream: str) -> int:
    """Independent 64-bit seed for one (experiment, iteration, purpose) triple."""
    ss = np.random.SeedSequence([int(seed), int(iteration), _STREAMS[stream]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class IterationRecord:
    iteration: int
    n_labeled: int
    test_accuracy: float
    selected: list[int] = field(default_factory=list)
    train_seconds: float | None = None
    score_seconds: float | None = None
    flags: list[str] = field(default_factory=list)


@dataclass
class ExperimentResult:
    config: dict
    records: list[IterationRecord]
    auc: float
    auc_method: str

    @property
    def accuracies(self) -> list[float]:
        return [r.test_accuracy for r in self.records]

    @property
    def budgets(self) -> list[int]:
        return [r.n_labeled for r in self.records]

    @property
    def selections(self) -> list[list[int]]:
        return [r.selected for r in self.records]

    @property
    def strategy(self) -> str:
        return self.config["strategy"]

    @property
    def seed(self) -> int:
        return self.config["seed"]


def dataset_for(config: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    spec = MixtureSpec(config.n_features, config.n_classes, config.clusters_per_class,
                       config.separation, config.cluster_std, config.brightness_std)
    X, y, _ = make_synthetic_dataset(spec, config.n_total, config.data_seed)
    return X, y


def build_model(config: ExperimentConfig, n_features: int, seed) -> DropoutMlp:
    return DropoutMlp(
        n_features, config.n_classes, hidden=config.hidden, dropout=config.dropout,
        lr=config.lr, momentum=config.momentum, weight_decay=config.weight_decay,
        batch_size=config.batch_size, lr_step=config.lr_step or None, seed=seed,
    )


def check_compatibility(strategy: str, model) -> None:
    if strategy in st.TENSOR_STRATEGIES and not hasattr(model, "posterior_predictive"):
        raise ConfigError(f"{strategy} needs a model with posterior sampling")
    if strategy in st.EMBEDDING_STRATEGIES and not hasattr(model, "embeddings"):
        raise ConfigError(f"{strategy} needs a model that exposes embeddings")
    if strategy == "entropy" and not hasattr(model, "point_predictive"):
        raise ConfigError("entropy needs a point-estimate predictive")


def train(state: DataSplitState, config: ExperimentConfig, iteration: int) -> DropoutMlp:
    model = build_model(config, state.features.shape[1], derive_seed(config.seed, iteration, "train"))
    lab = state.labeled_idx
    model.fit(state.features[lab], state.hidden_labels[lab], config.train_iterations)
    return model


def evaluate_accuracy(model, state: DataSplitState) -> float:
    test = state.test_idx
    return float(np.mean(model.predict(state.features[test]) == state.hidden_labels[test]))


def select(model, state: DataSplitState, config: ExperimentConfig, iteration: int):
    """Choose ``n_query`` pool indices. Never reads pool or validation labels."""
    strategy = config.strategy
    X = state.features
    cand, cand_trunc = subsample(state.pool_idx, config.J, derive_seed(config.seed, iteration, "pool"))
    flags = ["pool_subsample_truncated"] if cand_trunc and config.J < len(state.pool_idx) else []
    k = config.n_query

    if strategy in st.TENSOR_STRATEGIES:
        if strategy in st.VALIDATION_STRATEGIES:
            val, _ = subsample(state.val_idx, config.L, derive_seed(config.seed, iteration, "val"))
        else:
            val = np.empty(0, dtype=np.intp)
        points = np.concatenate([cand, val])
        tensor = model.posterior_predictive(X[points], config.T, derive_seed(config.seed, iteration, "posterior"))
        pool_pos = np.arange(cand.size)
        val_pos = np.arange(cand.size, points.size)
        if strategy == "mell":
            scores = st.score_mell(tensor, pool_pos, val_pos)
        elif strategy == "mezl":
            scores = st.score_mezl(tensor, pool_pos, val_pos)
        elif strategy == "bald":
            scores = st.score_bald(tensor, pool_pos)
        else:
            scores = st.score_entropy_mc(tensor, pool_pos)
        chosen = cand[st.select_top_k(scores, k).chosen]
    elif strategy == "entropy":
        scores = st.score_entropy(model.point_predictive(X[cand]), np.arange(cand.size))
        chosen = cand[st.select_top_k(scores, k).chosen]
    elif strategy == "random":
        scores = st.score_random(derive_seed(config.seed, iteration, "random"), cand.size)
        chosen = cand[st.select_top_k(scores, k).chosen]
    elif strategy == "coreset":
        batch = st.select_coreset(model.embeddings(X), state.labeled_idx, cand, k)
        chosen = batch.chosen
    elif strategy == "badge":
        grads = st.badge_embeddings(model.point_predictive(X[cand]), model.embeddings(X[cand]))
        batch = st.select_badge(grads, k, derive_seed(config.seed, iteration, "badge"))
        chosen = cand[batch.chosen]
    else:  # pragma: no cover - guarded by config validation
        raise ConfigError(f"unknown strategy {strategy!r}")
    if len(chosen) < k:
        flags.append("batch_truncated")
    return np.asarray(chosen, dtype=np.intp), flags


def run_iteration(state: DataSplitState, config: ExperimentConfig, iteration: int,
                  query: bool = True) -> tuple[DataSplitState, IterationRecord]:
    """Train on the labeled set, record test accuracy, then query a batch.

    With ``query=False`` only the training and evaluation happen (used for
    the final evaluation after the last query).
    """
    timed = config.timing == "wall"
    t0 = time.perf_counter()
    model = train(state, config, iteration)
    t1 = time.perf_counter()
    check_compatibility(config.strategy, model)
    record = IterationRecord(iteration, int(state.labeled_idx.size), evaluate_accuracy(model, state))
    if timed:
        record.train_seconds = t1 - t0
    if query:
        if state.pool_idx.size == 0:
            raise ConfigError("pool is empty; cannot query")
        t2 = time.perf_counter()
        chosen, flags = select(model, state, config, iteration)
        if timed:
            record.score_seconds = time.perf_counter() - t2
        record.selected = [int(i) for i in chosen]
        record.flags = flags
        state = state.reveal(chosen)
    log.debug("iteration %d: %d labeled, accuracy %.4f", iteration, record.n_labeled, record.test_accuracy)
    return state, record


def initial_state(config: ExperimentConfig) -> DataSplitState:
    X, y = dataset_for(config)
    return make_splits(X, y, config.n_seed, config.n_val, config.n_pool, config.n_test,
                       config.shift, derive_seed(config.seed, 0, "split"))


def run_experiment(config: ExperimentConfig, state: DataSplitState | None = None) -> ExperimentResult:
    """``K`` query rounds plus the seed-only and final evaluations."""
    check_compatibility(config.strategy, build_model(config, config.n_features, 0))
    if state is None:
        state = initial_state(config)
    records = []
    for k in range(config.K + 1):
        state, record = run_iteration(state, config, k, query=k < config.K)
        records.append(record)
    xs = [r.n_labeled for r in records]
    ys = [r.test_accuracy for r in records]
    auc = auc_simpson(xs, ys)
    return ExperimentResult(config.to_dict(), records, auc.value, auc.method)
