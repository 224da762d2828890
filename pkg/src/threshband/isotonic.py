"""Weighted order-restricted least squares.

Exact projections onto monotone chains, fixed-mode unimodal (V-order)
sequences, and their bound-restricted variants. These are the projection
primitives behind the alternative-model infima: every fit minimizes
sum_a w_a (x_a - v_a)^2 / 2 subject to the stated order constraints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class OrderedFit:
    """Fitted values plus the weighted half-squared-error cost against the input."""

    values: np.ndarray
    cost: float


def _check(x, w):
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.ndim != 1 or x.shape != w.shape or x.shape[0] < 1:
        raise ValueError("x and w must be equal-length 1-D arrays")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    return x, w


def _fit(x, w, values) -> OrderedFit:
    values.setflags(write=False)
    return OrderedFit(values=values, cost=float(_kernels.weighted_cost(x, w, values)))


def isotonic_increasing(x, w) -> OrderedFit:
    """Projection onto nondecreasing sequences (pool-adjacent-violators)."""
    x, w = _check(x, w)
    return _fit(x, w, _kernels.pava_increasing(x, w))


def isotonic_decreasing(x, w) -> OrderedFit:
    """Projection onto nonincreasing sequences, by index reversal."""
    x, w = _check(x, w)
    return _fit(x, w, _kernels.pava_decreasing(x, w))


def unimodal_fixed_mode(x, w, mode: int) -> OrderedFit:
    """Projection onto sequences rising to a fixed apex and falling after.

    The feasible set is the V-shaped partial order: two monotone chains
    sharing the apex value at `mode`.
    """
    x, w = _check(x, w)
    if not 0 <= mode < x.shape[0]:
        raise ValueError(f"mode {mode} out of range")
    return _fit(x, w, _kernels.unimodal_fixed_mode(x, w, mode))


def unimodal_bounded(x, w, mode: int, bound: float) -> OrderedFit:
    """Fixed-mode unimodal projection with the apex value capped at `bound`.

    The solution is the elementwise min of the unbounded fit and the bound.
    """
    x, w = _check(x, w)
    if not 0 <= mode < x.shape[0]:
        raise ValueError(f"mode {mode} out of range")
    return _fit(x, w, _kernels.unimodal_bounded(x, w, mode, float(bound)))


def isotonic_bounded_split(x, w, split: int, bound: float) -> OrderedFit:
    """Projection onto increasing sequences passing through `bound` at `split`.

    Constraints: v[0] <= ... <= v[split] <= bound <= v[split+1] <= ... —
    two bound-restricted isotonic regressions that decouple at the split.
    """
    x, w = _check(x, w)
    if not 0 <= split < x.shape[0] - 1:
        raise ValueError(f"split {split} out of range")
    return _fit(x, w, _kernels.iso_split_bounded(x, w, split, float(bound)))
