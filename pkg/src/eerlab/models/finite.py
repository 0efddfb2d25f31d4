"""Finite-support Bayesian classifier used as an exact oracle.

The input space is a handful of discrete cells. Each of ``M`` hypotheses is a
full table ``Pr(Y = c | cell)``; the posterior is a weight vector over
hypotheses. Every predictive and information quantity is a finite sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from eerlab.errors import ImpossibleObservationError
from eerlab.posterior import PosteriorPredictiveTensor, entropy, entropy_rows


def _xlogy_ratio(p: np.ndarray, num: np.ndarray, den: np.ndarray) -> float:
    """``sum p log(num / den)`` over cells with ``p > 0``."""
    mask = p > 0
    return float((p[mask] * (np.log(num[mask]) - np.log(den[mask]))).sum())


@dataclass(frozen=True)
class DirichletCategoricalModel:
    """Hypothesis tables ``(M, n_cells, C)`` with posterior weights ``(M,)``."""

    tables: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        tables = np.array(self.tables, dtype=np.float64)
        weights = np.array(self.weights, dtype=np.float64)
        if tables.ndim != 3 or weights.shape != (tables.shape[0],):
            raise ValueError("tables must be (M, n_cells, C) and weights (M,)")
        if np.any(tables < 0) or np.any(np.abs(tables.sum(axis=2) - 1.0) > 1e-9):
            raise ValueError("every hypothesis row must be a distribution")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be a distribution")
        tables.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "tables", tables)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def random(cls, rng, n_cells: int = 4, n_hypotheses: int = 8, n_classes: int = 3,
               alpha: float = 1.0) -> "DirichletCategoricalModel":
        """Hypothesis rows and prior weights drawn from symmetric Dirichlets."""
        rng = np.random.default_rng(rng)
        tables = rng.dirichlet(np.full(n_classes, alpha), size=(n_hypotheses, n_cells))
        weights = rng.dirichlet(np.ones(n_hypotheses))
        return cls(tables, weights)

    @property
    def n_hypotheses(self) -> int:
        return self.tables.shape[0]

    @property
    def n_cells(self) -> int:
        return self.tables.shape[1]

    @property
    def n_classes(self) -> int:
        return self.tables.shape[2]

    def _cell(self, cell: int) -> int:
        if not 0 <= cell < self.n_cells:
            raise IndexError(f"cell {cell} not in grid of {self.n_cells}")
        return int(cell)

    # -- predictive quantities ---------------------------------------------

    def exact_predictive(self, cell: int) -> np.ndarray:
        return self.weights @ self.tables[:, self._cell(cell)]

    def exact_pairwise_joint(self, cell_i: int, cell_j: int) -> np.ndarray:
        """Joint of two distinct draws at ``cell_i`` and ``cell_j``."""
        pi = self.tables[:, self._cell(cell_i)]
        pj = self.tables[:, self._cell(cell_j)]
        return np.einsum("m,mc,md->cd", self.weights, pi, pj)

    def three_way(self, cell_i: int, cell_j: int) -> np.ndarray:
        """``Pr(theta = m, Y_i = a, Y_j = b)`` as an ``(M, C, C)`` array."""
        pi = self.tables[:, self._cell(cell_i)]
        pj = self.tables[:, self._cell(cell_j)]
        return self.weights[:, None, None] * pi[:, :, None] * pj[:, None, :]

    def exact_bayes_update(self, cell: int, label: int) -> "DirichletCategoricalModel":
        """Posterior after observing ``label`` at ``cell``."""
        if not 0 <= label < self.n_classes:
            raise ValueError(f"label {label} outside [0, {self.n_classes})")
        post = self.weights * self.tables[:, self._cell(cell), label]
        total = post.sum()
        if total <= 0:
            raise ImpossibleObservationError(f"label {label} at cell {cell} has zero probability")
        return DirichletCategoricalModel(self.tables, post / total)

    def sample_tensor(self, cells, T: int, rng) -> PosteriorPredictiveTensor:
        """Draw ``T`` hypotheses by weight and stack their rows for ``cells``."""
        rng = np.random.default_rng(rng)
        draws = rng.choice(self.n_hypotheses, size=T, p=self.weights)
        return PosteriorPredictiveTensor(self.tables[draws][:, np.asarray(cells)], check=False)

    def as_tensor(self, cells, resolution: int) -> PosteriorPredictiveTensor:
        """Equal-weight tensor that represents the posterior exactly.

        Hypothesis ``m`` is repeated ``w_m * resolution`` times; every weight
        must be an integer multiple of ``1 / resolution``.
        """
        counts = np.rint(self.weights * resolution).astype(int)
        if counts.sum() != resolution or np.any(np.abs(counts - self.weights * resolution) > 1e-9):
            raise ValueError("weights are not multiples of 1/resolution")
        draws = np.repeat(np.arange(self.n_hypotheses), counts)
        return PosteriorPredictiveTensor(self.tables[draws][:, np.asarray(cells)], check=False)

    # -- exact information quantities (definitional sums) -------------------

    def mi_label_theta(self, cell: int) -> float:
        """``I(Y; theta)`` at ``cell`` from the joint ``Pr(theta, Y)``."""
        rows = self.tables[:, self._cell(cell)]
        joint = self.weights[:, None] * rows
        marg = joint.sum(axis=0)
        return _xlogy_ratio(joint, joint, self.weights[:, None] * marg[None, :])

    def mi_labels(self, cell_i: int, cell_j: int) -> float:
        """``I(Y_i; Y_j)`` from the pairwise joint."""
        joint = self.exact_pairwise_joint(cell_i, cell_j)
        pi, pj = joint.sum(axis=1), joint.sum(axis=0)
        return _xlogy_ratio(joint, joint, np.outer(pi, pj))

    def cmi_label_theta_given(self, cell_i: int, cell_j: int) -> float:
        """``I(Y_i; theta | Y_j)`` from the three-way joint."""
        p = self.three_way(cell_i, cell_j)  # (m, a, b)
        p_b = p.sum(axis=(0, 1))
        p_mb = p.sum(axis=1)
        p_ab = p.sum(axis=0)
        num = p * p_b[None, None, :]
        den = p_mb[:, None, :] * p_ab[None, :, :]
        return _xlogy_ratio(p, num, den)

    def label_entropy(self, cell: int) -> float:
        return entropy(self.exact_predictive(cell))

    def aleatoric_entropy(self, cell: int) -> float:
        """``H(Y | theta)`` at ``cell``."""
        return float(self.weights @ entropy_rows(self.tables[:, self._cell(cell)]))

    def exact_scores(self, pool_cells, val_cells) -> dict[str, np.ndarray]:
        """MELL, MEZL and BALD scores computed from exact marginals and joints."""
        pool_cells = list(pool_cells)
        val_cells = list(val_cells)
        mell, mezl, bald = [], [], []
        for i in pool_cells:
            h_i = self.label_entropy(i)
            joints = [self.exact_pairwise_joint(i, j) for j in val_cells]
            mell.append(len(val_cells) * h_i - sum(entropy(J) for J in joints))
            mezl.append(sum(J.max(axis=1).sum() for J in joints))
            bald.append(h_i - self.aleatoric_entropy(i))
        return {"mell": np.array(mell), "mezl": np.array(mezl), "bald": np.array(bald)}
