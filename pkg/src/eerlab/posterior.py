"""Posterior-predictive tensor and the entropy / mutual-information kernels.

All quantities are in nats. The tensor is laid out ``[t, i, c]``: posterior
sample, data point, class.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from eerlab.errors import InvalidTensorError, NumericalError

#: probabilities below this are treated as exact zeros inside logarithms
LOG_FLOOR = 1e-12
#: row-sum tolerance for a valid distribution
SUM_TOL = 1e-9
#: negative information values larger than this in magnitude are bugs, not rounding
CLAMP_TOL = 1e-6

_MAGIC = b"PPT1"
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class TensorViolation:
    """First offending slice found by :func:`validate`."""

    t: int | None
    i: int | None
    reason: str

    def __str__(self) -> str:
        where = "" if self.t is None else f" at (t={self.t}, i={self.i})"
        return f"{self.reason}{where}"


def validate(probs) -> TensorViolation | None:
    """Check the tensor invariants; return ``None`` when they hold.

    Never raises: malformed input is reported as a violation.
    """
    try:
        arr = np.asarray(probs, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        return TensorViolation(None, None, f"not numeric: {exc}")
    if arr.ndim != 3:
        return TensorViolation(None, None, f"expected 3 dimensions, got {arr.ndim}")
    T, N, C = arr.shape
    if T < 1 or N < 1:
        return TensorViolation(None, None, f"empty tensor of shape {arr.shape}")
    if C < 2:
        return TensorViolation(None, None, f"need at least 2 classes, got {C}")
    bad = ~np.isfinite(arr).all(axis=2)
    if bad.any():
        t, i = np.argwhere(bad)[0]
        return TensorViolation(int(t), int(i), "non-finite entry")
    bad = ((arr < 0.0) | (arr > 1.0)).any(axis=2)
    if bad.any():
        t, i = np.argwhere(bad)[0]
        return TensorViolation(int(t), int(i), "entry outside [0, 1]")
    bad = np.abs(arr.sum(axis=2) - 1.0) > SUM_TOL
    if bad.any():
        t, i = np.argwhere(bad)[0]
        total = arr[t, i].sum()
        return TensorViolation(int(t), int(i), f"row sums to {total:.12g}")
    return None


class PosteriorPredictiveTensor:
    """Immutable ``(T, N, C)`` array of class probabilities.

    ``probs[t, i]`` is the predictive distribution of point ``i`` under the
    ``t``-th posterior parameter sample.
    """

    __slots__ = ("probs",)

    def __init__(self, probs, *, check: bool = True):
        arr = np.array(probs, dtype=np.float64, order="C", copy=True)
        if check:
            violation = validate(arr)
            if violation is not None:
                raise InvalidTensorError(violation)
        arr.setflags(write=False)
        self.probs = arr

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.probs.shape

    @property
    def n_samples(self) -> int:
        return self.probs.shape[0]

    @property
    def n_points(self) -> int:
        return self.probs.shape[1]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[2]

    def subset(self, idx) -> "PosteriorPredictiveTensor":
        """Tensor restricted to the points ``idx`` (in the given order)."""
        return PosteriorPredictiveTensor(self.probs[:, np.asarray(idx, dtype=np.intp)], check=False)

    def __repr__(self) -> str:
        T, N, C = self.shape
        return f"PosteriorPredictiveTensor(T={T}, N={N}, C={C})"


def _check_index(tensor: PosteriorPredictiveTensor, i: int) -> int:
    n = tensor.n_points
    if not 0 <= i < n:
        raise IndexError(f"point index {i} out of range for N={n}")
    return int(i)


def marginal(tensor: PosteriorPredictiveTensor, i: int) -> np.ndarray:
    """Monte Carlo estimate of ``Pr(Y_i = c)``: the mean over posterior samples."""
    i = _check_index(tensor, i)
    return tensor.probs[:, i, :].mean(axis=0)


def mean_predictive(tensor: PosteriorPredictiveTensor) -> np.ndarray:
    """``(N, C)`` matrix whose row ``i`` is ``marginal(tensor, i)``."""
    return tensor.probs.mean(axis=0)


def pairwise_joint(tensor: PosteriorPredictiveTensor, i: int, j: int) -> np.ndarray:
    """Monte Carlo estimate of ``Pr(Y_i = c, Y_j = c')`` as a ``(C, C)`` matrix.

    Labels are conditionally independent given the parameters, so each
    posterior sample contributes the outer product of its two rows.
    """
    i = _check_index(tensor, i)
    j = _check_index(tensor, j)
    pi = tensor.probs[:, i, :]
    pj = tensor.probs[:, j, :]
    return np.einsum("tc,td->cd", pi, pj) / tensor.n_samples


def _plogp(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    safe = np.where(p > LOG_FLOOR, p, 1.0)
    return np.where(p > LOG_FLOOR, p * np.log(safe), 0.0)


def entropy(p) -> float:
    """Shannon entropy of a distribution, ``0 log 0 = 0``."""
    return float(-_plogp(p).sum())


def entropy_rows(p, axis=-1) -> np.ndarray:
    """Entropy along ``axis`` (or a tuple of axes) of a batch of distributions."""
    return -_plogp(p).sum(axis=axis)


def joint_entropy(joint) -> float:
    """Entropy of a joint table, summed over all cells."""
    return float(-_plogp(joint).sum())


def clamp_nonnegative(value, what: str = "information"):
    """Clamp rounding-level negatives to zero; reject genuine negatives."""
    arr = np.asarray(value, dtype=np.float64)
    if np.any(arr < -CLAMP_TOL):
        raise NumericalError(f"negative {what}: {arr.min():.3e}")
    out = np.maximum(arr, 0.0)
    return float(out) if out.ndim == 0 else out


def conditional_entropy(joint) -> float:
    """``H(Y_j | Y_i)`` for a joint with rows indexed by ``Y_i``."""
    joint = np.asarray(joint, dtype=np.float64)
    h = joint_entropy(joint) - entropy(joint.sum(axis=1))
    return clamp_nonnegative(h, "conditional entropy")


def mutual_information(joint) -> float:
    """``I(Y_i; Y_j) = H(Y_i) + H(Y_j) - H(Y_i, Y_j)``."""
    joint = np.asarray(joint, dtype=np.float64)
    mi = entropy(joint.sum(axis=1)) + entropy(joint.sum(axis=0)) - joint_entropy(joint)
    return clamp_nonnegative(mi, "mutual information")


def save_tensor(tensor: PosteriorPredictiveTensor, path) -> None:
    """Write the ``PPT1`` binary dump: header then little-endian float64 data."""
    T, N, C = tensor.shape
    with open(Path(path), "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, T, N, C))
        fh.write(tensor.probs.astype("<f8", copy=False).tobytes(order="C"))


def load_tensor(path, *, check: bool = True) -> PosteriorPredictiveTensor:
    """Read a tensor written by :func:`save_tensor`."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise InvalidTensorError("truncated header")
    magic, T, N, C = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise InvalidTensorError(f"bad magic {magic!r}")
    expected = _HEADER.size + 8 * T * N * C
    if len(data) != expected:
        raise InvalidTensorError(f"expected {expected} bytes, got {len(data)}")
    probs = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(T, N, C)
    return PosteriorPredictiveTensor(probs, check=check)
