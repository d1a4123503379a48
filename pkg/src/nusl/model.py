"""Core domain types: dictionaries, support models, supports and signals.

Indices are 1-based wherever a :class:`Support` is exposed; arrays handed to
numpy are converted with :attr:`Support.zero_based`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

UNIT_NORM_TOL = 1e-12
RENORMALIZE_TOL = 1e-6
SUM_TOL = 1e-9


class ModelError(ValueError):
    """Invalid dictionary, probability vector, support or signal."""


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dictionary:
    """A real ``d x K`` synthesis matrix whose columns are the atoms."""

    entries: np.ndarray
    unit_norm: bool = False

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise ModelError(f"dictionary must be a nonempty 2-d matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ModelError("dictionary has non-finite entries")
        if self.unit_norm:
            dev = np.max(np.abs(np.linalg.norm(m, axis=0) - 1.0))
            if dev > UNIT_NORM_TOL:
                raise ModelError(f"unit_norm set but column norms deviate by {dev:.3g}")
        object.__setattr__(self, "entries", _frozen(m))

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def K(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def sub(self, support: "Support") -> np.ndarray:
        return self.entries[:, support.zero_based]


def as_matrix(x) -> np.ndarray:
    """Unwrap a :class:`Dictionary` (or anything array-like) to a float matrix."""
    if isinstance(x, Dictionary):
        return x.entries
    return np.asarray(x, dtype=float)


def validate_dictionary(entries, require_unit_norm: bool = True) -> Dictionary:
    """Check a matrix and wrap it as a :class:`Dictionary`.

    Columns within ``1e-6`` of unit norm are renormalized silently; anything
    further off is rejected so that a genuinely unnormalized input is not
    masked.
    """
    m = np.array(entries, dtype=float, copy=True)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2 or m.size == 0:
        raise ModelError("dictionary must be a nonempty 2-d matrix")
    if not np.all(np.isfinite(m)):
        raise ModelError("non-finite entry in dictionary")
    norms = np.linalg.norm(m, axis=0)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ModelError(f"zero column at index {zero[0] + 1}")
    if not require_unit_norm:
        return Dictionary(m, unit_norm=bool(np.all(np.abs(norms - 1.0) <= UNIT_NORM_TOL)))
    bad = np.flatnonzero(np.abs(norms - 1.0) > RENORMALIZE_TOL)
    if bad.size:
        k = bad[0]
        raise ModelError(f"column {k + 1} has norm {norms[k]:.6g}, not unit norm")
    return Dictionary(m / norms, unit_norm=True)


@dataclass(frozen=True, eq=False)
class SupportModel:
    """Inclusion probabilities ``p`` with integer sum ``S``."""

    p: np.ndarray
    S: int

    def __post_init__(self):
        object.__setattr__(self, "p", _frozen(np.ravel(self.p)))

    @property
    def K(self) -> int:
        return self.p.size

    @property
    def weights(self) -> np.ndarray:
        """Diagonal of the weight matrix ``W = diag(sqrt(p))``."""
        return np.sqrt(self.p)

    @property
    def W(self) -> np.ndarray:
        return np.diag(self.weights)


def build_support_model(p, tol: float = SUM_TOL) -> SupportModel:
    p = np.array(p, dtype=float).ravel()
    if p.size == 0:
        raise ModelError("probability vector is empty")
    if not np.all(np.isfinite(p)):
        raise ModelError("probability vector has non-finite entries")
    if np.any(p < 0.0) or np.any(p > 1.0):
        i = np.flatnonzero((p < 0.0) | (p > 1.0))[0]
        raise ModelError(f"entry {i + 1} = {p[i]:g} outside [0, 1]")
    total = float(p.sum())
    S = int(round(total))
    if abs(total - S) > tol:
        raise ModelError(f"sum {total:g} not integer")
    if S < 1:
        raise ModelError("sum of probabilities must be at least 1")
    if np.count_nonzero(p > 0.0) < S:
        raise ModelError(f"fewer than S={S} positive entries")
    return SupportModel(p, S)


@dataclass(frozen=True, order=True)
class Support:
    """A sorted set of 1-based atom indices."""

    indices: tuple = ()

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ModelError(f"support indices must be strictly increasing: {idx}")
        if idx and idx[0] < 1:
            raise ModelError("support indices are 1-based")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, indices: Iterable[int], K: Optional[int] = None) -> "Support":
        """Build from any iterable of 1-based indices, sorting and checking range."""
        idx = sorted(int(i) for i in indices)
        if len(set(idx)) != len(idx):
            raise ModelError("duplicate support index")
        if K is not None and idx and (idx[0] < 1 or idx[-1] > K):
            raise ModelError(f"support index outside 1..{K}")
        return cls(tuple(idx))

    @classmethod
    def from_zero_based(cls, idx) -> "Support":
        return cls(tuple(sorted(int(i) + 1 for i in np.ravel(idx))))

    @classmethod
    def from_mask(cls, mask: int) -> "Support":
        out, i = [], 1
        while mask:
            if mask & 1:
                out.append(i)
            mask >>= 1
            i += 1
        return cls(tuple(out))

    @property
    def zero_based(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp) - 1

    @property
    def mask(self) -> int:
        m = 0
        for i in self.indices:
            m |= 1 << (i - 1)
        return m

    def complement(self, K: int) -> "Support":
        s = set(self.indices)
        return Support(tuple(i for i in range(1, K + 1) if i not in s))

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return i in self.indices

    def __repr__(self):
        return "Support({" + ", ".join(map(str, self.indices)) + "})"


@dataclass(frozen=True, eq=False)
class SignalInstance:
    """``y = sum_k phi_{i_k} c_k sigma_k`` with its generating data.

    Magnitudes and signs are listed in increasing index order of the support.
    """

    y: np.ndarray
    support: Support
    magnitudes: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        for name in ("y", "magnitudes", "signs"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def S(self) -> int:
        return len(self.support)

    @property
    def coefficients_on_support(self) -> np.ndarray:
        return self.magnitudes * self.signs

    def coefficients(self, K: int) -> np.ndarray:
        x = np.zeros(K)
        x[self.support.zero_based] = self.coefficients_on_support
        return x


def make_signal(phi, support: Support, magnitudes, signs) -> SignalInstance:
    """Assemble ``y`` from dictionary, support, magnitudes and signs."""
    m = as_matrix(phi)
    c = np.asarray(magnitudes, dtype=float).ravel()
    s = np.asarray(signs, dtype=float).ravel()
    if not (c.size == s.size == len(support)):
        raise ModelError("support, magnitudes and signs must have equal length")
    if np.any(c <= 0):
        raise ModelError("magnitudes must be strictly positive")
    if not np.all(np.isin(s, (-1.0, 1.0))):
        raise ModelError("signs must be +1 or -1")
    if len(support) and support.indices[-1] > m.shape[1]:
        raise ModelError("support index exceeds number of atoms")
    y = m[:, support.zero_based] @ (c * s) if len(support) else np.zeros(m.shape[0])
    return SignalInstance(y, support, c, s)


@dataclass(frozen=True)
class GramQuantities:
    """The norms of a (cross-)Gram matrix that the tail bounds consume.

    ``mu`` is the largest absolute entry, ``hw_inf2`` the largest row norm of
    ``H W``, ``wh_21`` the largest column norm of ``W H`` and ``whw_op`` the
    operator norm of ``W H W``.
    """

    mu: float
    hw_inf2: float
    wh_21: float
    whw_op: float
    K: int

    def __post_init__(self):
        for name in ("mu", "hw_inf2", "wh_21", "whw_op"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ModelError(f"{name} must be finite and nonnegative, got {v}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "K", int(self.K))

    def as_row(self) -> dict:
        return {"mu": self.mu, "hw_inf2": self.hw_inf2, "wh_21": self.wh_21,
                "whw_op": self.whw_op, "K": self.K}
