"""Diagonal state rescaling and hyperplane normalization.

With ``D = diag(d)`` chosen so that ``|D x|_inf <= 1`` on the state box, each
row ``h x <= k`` becomes ``(h D^-1 / c) (D x) <= k / c`` with
``c = max(|h D^-1|_1, |k|)``, and each law becomes ``F D^-1``.  Afterwards
every row has ``|h|_1 <= 1`` and ``|k| <= 1``, so the facet residual bound
collapses to ``eps (n + 2 + n eps)`` for any rescaled state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .partition import AffineLaw, Hyperplane, PwaPartition, PartitionError, Region


@dataclass(frozen=True, eq=False)
class ScalingTransform:
    d: np.ndarray  # diagonal of D, per-coordinate scale in 1/state-unit

    def __post_init__(self):
        d = np.array(self.d, dtype=np.float64).reshape(-1)
        if np.any(~np.isfinite(d)) or np.any(d <= 0):
            raise ValueError("scaling entries must be finite and positive")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.d)

    @property
    def D_inv(self) -> np.ndarray:
        return np.diag(1.0 / self.d)

    def apply(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) * self.d

    def undo(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) / self.d


def compute_scaling(lo, hi) -> ScalingTransform:
    """``d_l = 1 / max(|lo_l|, |hi_l|)``."""
    lo = np.asarray(lo, dtype=np.float64).reshape(-1)
    hi = np.asarray(hi, dtype=np.float64).reshape(-1)
    if lo.shape != hi.shape:
        raise ValueError("box bounds must have equal length")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("state box must be bounded")
    if np.any(hi <= lo):
        raise ValueError("state box has a zero-width coordinate")
    return ScalingTransform(1.0 / np.maximum(np.abs(lo), np.abs(hi)))


def normalize_row(h, k, d) -> tuple[np.ndarray, float]:
    hd = np.asarray(h, dtype=np.float64) / d
    c = max(float(np.sum(np.abs(hd))), abs(float(k)))
    if c == 0.0:
        raise PartitionError("cannot normalize a zero constraint row")
    return hd / c, float(k) / c


def rescale_partition(p: PwaPartition, s: ScalingTransform) -> PwaPartition:
    d = s.d
    if d.shape != (p.n,):
        raise ValueError(f"scaling has length {d.shape[0]}, partition n={p.n}")
    regions, laws = [], []
    for reg, law in zip(p.regions, p.laws):
        hd = reg.H / d[None, :]
        c = np.maximum(np.sum(np.abs(hd), axis=1), np.abs(reg.K))
        if np.any(c == 0):
            raise PartitionError("cannot normalize a zero constraint row")
        witness = None if reg.witness is None else reg.witness * d
        regions.append(Region(hd / c[:, None], reg.K / c, witness))
        laws.append(AffineLaw(law.F / d[None, :], law.G))
    total = d if p.scaling is None else d * p.scaling
    return PwaPartition(p.n, p.m, regions, laws, p.lo * d, p.hi * d, scaling=total, name=p.name)


def rescaled_delta_bound(eps: float, n: int) -> float:
    return eps * (n + 2 + n * eps)


def rescaled_control_bound(F_i, F_j, hp: Hyperplane, D, x, eps: float, eps1: float, n: int | None = None) -> float:
    """Control-error bound in rescaled coordinates.

    ``F_i``, ``F_j`` are the original gains, ``hp`` a rescaled facet row,
    ``D`` the scaling (matrix, diagonal vector or :class:`ScalingTransform`),
    ``x`` a rescaled state.  ``eps`` is the region/state step and ``eps1``
    the law step, both after rescaling.
    """
    if isinstance(D, ScalingTransform):
        d = D.d
    else:
        D = np.asarray(D, dtype=np.float64)
        d = np.diag(D) if D.ndim == 2 else D.reshape(-1)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    n = x.shape[0] if n is None else n
    h = hp.h
    delta = rescaled_delta_bound(eps, n)
    Fi = np.atleast_2d(np.asarray(F_i, dtype=np.float64))
    Fj = np.atleast_2d(np.asarray(F_j, dtype=np.float64))
    facet = delta / float(h @ h) * float(np.max(np.abs(((Fi - Fj) / d[None, :]) @ h)))
    gain = float(np.max(np.sum(np.abs(Fi / d[None, :]), axis=1)))
    xinf = float(np.max(np.abs(x)))
    return facet + eps * gain + n * eps1 * xinf + n * eps * eps1 + eps1


__all__ = [
    "ScalingTransform",
    "compute_scaling",
    "normalize_row",
    "rescale_partition",
    "rescaled_control_bound",
    "rescaled_delta_bound",
]
