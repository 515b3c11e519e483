"""Interpolated l2 seminorms over [n1, t] for real t.

For a sequence of nonnegative weights w_k (block norms or minimum moduli)

    S(n1, t)^2 = sum_{k=n1}^{floor t} w_k^2 + {t} w_{floor t + 1}^2,

which is piecewise affine in t. Prefix sums make each evaluation O(1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matspec
from .errors import WindowTooShort


@dataclass
class SeqWindow:
    """Weights ``values[i]`` attached to indices ``start_index + i``."""

    start_index: int
    values: np.ndarray
    _prefix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self._prefix = np.concatenate([[0.0], np.cumsum(self.values ** 2)])

    @classmethod
    def from_blocks(cls, start_index: int, blocks: np.ndarray, kind: str = "norm") -> "SeqWindow":
        """Window of operator norms (``kind="norm"``) or minimum moduli (``"minmod"``)."""
        if kind == "norm":
            vals = matspec.op_norm(blocks)
        elif kind == "minmod":
            vals = matspec.min_modulus(blocks)
        else:
            raise ValueError(f"unknown weight kind {kind!r}")
        return cls(start_index, vals)

    @property
    def end_index(self) -> int:
        """Last index covered."""
        return self.start_index + len(self.values) - 1

    def _cum(self, upto: np.ndarray) -> np.ndarray:
        # sum of squares for indices start..upto (inclusive)
        return self._prefix[np.asarray(upto) - self.start_index + 1]

    def interp_sq(self, n1: int, t) -> np.ndarray:
        """Squared seminorm over [n1, t]; ``t`` may be an array."""
        t = np.asarray(t, dtype=float)
        if n1 < self.start_index:
            raise WindowTooShort(f"window starts at {self.start_index}, need {n1}")
        if np.any(t < n1):
            raise WindowTooShort(f"t must be >= {n1}")
        fl = np.floor(t).astype(np.int64)
        frac = t - fl
        need = np.where(frac > 0, fl + 1, fl)
        if np.any(need > self.end_index):
            raise WindowTooShort(
                f"window ends at {self.end_index}, need index {int(np.max(need))}",
                end_index=self.end_index)
        nxt = np.minimum(fl + 1, self.end_index) - self.start_index
        head = self._cum(fl) - self._cum(n1 - 1)
        return head + frac * self.values[nxt] ** 2

    def interp(self, n1: int, t) -> np.ndarray:
        return np.sqrt(self.interp_sq(n1, t))


def interp_norm(window: SeqWindow, n1: int, t) -> float | np.ndarray:
    """||X||_[n1, t] from a window of weights; raises WindowTooShort."""
    out = window.interp(n1, t)
    return float(out) if np.ndim(out) == 0 else out


def ratio_monotone(w_u: SeqWindow, w_v: SeqWindow, n: int) -> tuple[float, float]:
    """Range of ||U||^2_[s, t] / ||V||^2_[s, t] for t in [n, n + 1].

    Both squared seminorms are affine on the unit interval, so their ratio is
    monotone there and the extremes are the two endpoint values. ``s`` is the
    common start index of the windows.
    """
    s = max(w_u.start_index, w_v.start_index)
    ends = np.array([n, n + 1], dtype=float)
    r = w_u.interp_sq(s, ends) / w_v.interp_sq(s, ends)
    return float(np.min(r)), float(np.max(r))
