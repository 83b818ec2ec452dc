"""Control-error bounds for quantized piecewise-affine laws.

Notation: the true state ``x`` lies in region ``j``; the quantized state
``x^`` is located in quantized region ``i``.  When ``i == j`` the error is
bounded by the quantization terms of the law alone.  When the state jumps
across a shared facet ``h x = k`` (``<=`` on ``j``) the bound adds the facet
term ``delta / |h|_2^2 * |(F_i - F_j) h'|_inf``, where ``delta`` bounds the
change of the facet residual ``h x - k`` under quantization.

Two variants of the law term are reported:

* a posteriori, from the realized deltas:
  ``|dF_i|_inf |x|_inf + |dG_i|_inf + |F^_i|_inf eps``
* a priori, from original data only:
  ``eps (|F_i|_inf + n |x|_inf + n eps + 1)``

Formats may differ per data class.  ``delta`` uses
``max(eps_regions, eps_state)``; the a posteriori ``|F^| eps`` term uses
``eps_state``; the a priori term uses ``max(eps_laws, eps_state)``.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterator, Sequence

import numpy as np

from .errors import StateOutsidePartitionError
from .partition import (
    FacetPair,
    Hyperplane,
    PwaPartition,
    evaluate_many,
    locate_many,
)
from .quantize import QuantizedPartition, quantized_evaluate_many

ROUNDOFF_SLACK = 1e-12
NORM_MODES = ("pointwise", "box")


def _mat_inf(M) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    return float(np.max(np.sum(np.abs(M), axis=1)))


def _h_of(hp) -> np.ndarray:
    return hp.h if isinstance(hp, Hyperplane) else np.asarray(hp, dtype=np.float64).reshape(-1)


def delta_bound(hp, x, eps: float, n: int | None = None) -> float:
    """``eps * (|h|_1 + |x|_1 + n eps + 1)``: bound on the facet residual change."""
    h = _h_of(hp)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    n = x.shape[0] if n is None else n
    return eps * (float(np.sum(np.abs(h))) + float(np.sum(np.abs(x))) + n * eps + 1.0)


def jump_certificate(hp: Hyperplane, x, delta: float) -> bool:
    """True iff ``-delta < h x - k <= 0``, the only band a jump can start from."""
    y = float(hp.h @ np.asarray(x, dtype=np.float64).reshape(-1)) - hp.k
    return -delta < y <= 0.0


def first_term(F_i, F_j, hp, delta: float) -> float:
    h = _h_of(hp)
    dF = np.atleast_2d(np.asarray(F_i, dtype=np.float64)) - np.atleast_2d(np.asarray(F_j, dtype=np.float64))
    return delta * float(np.max(np.abs(dF @ h))) / float(h @ h)


def second_term_aposteriori(dF, dG, Fhat, x, eps: float) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    dG = np.asarray(dG, dtype=np.float64).reshape(-1)
    return _mat_inf(dF) * float(np.max(np.abs(x))) + float(np.max(np.abs(dG))) + _mat_inf(Fhat) * eps


def second_term_apriori(F, x, eps: float, n: int | None = None) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    n = x.shape[0] if n is None else n
    return eps * (_mat_inf(F) + n * float(np.max(np.abs(x))) + n * eps + 1.0)


# ---------------------------------------------------------------------------
# reports

CSV_FLOAT_COLUMNS = (
    "delta",
    "first_term",
    "second_apriori",
    "second_aposteriori",
    "bound_apriori",
    "bound_aposteriori",
    "actual_error",
)
FLAG_COLUMNS = ("same_region", "jump", "projection_in_facet", "no_region", "corner_jump")


@dataclass(frozen=True, eq=False)
class BoundReport:
    """Bounds and actual error for one state.

    ``bound_*`` are NaN when no claim is made (corner jump or no quantized
    region); ``delta`` and ``facet_residual`` are NaN unless the state jumped
    across a shared facet.
    """

    x: np.ndarray
    region_true: int
    region_quant: int | None
    delta: float
    first_term: float
    second_apriori: float
    second_aposteriori: float
    bound_apriori: float
    bound_aposteriori: float
    actual_error: float
    same_region: bool
    jump: bool
    projection_in_facet: bool
    no_region: bool
    corner_jump: bool
    facet_residual: float = float("nan")

    @property
    def flags(self) -> dict[str, bool]:
        return {name: getattr(self, name) for name in FLAG_COLUMNS}

    @property
    def claimed(self) -> bool:
        """Whether the state satisfies the hypotheses under which the bounds hold."""
        return self.same_region or (self.jump and self.projection_in_facet)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                v = v.tolist()
            elif isinstance(v, float) and np.isnan(v):
                v = None
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "BoundReport":
        kw = {}
        for f in fields(cls):
            v = obj.get(f.name)
            if f.name == "x":
                v = np.asarray(v, dtype=np.float64)
            elif f.name in FLAG_COLUMNS:
                v = bool(v)
            elif f.name in ("region_true",):
                v = int(v)
            elif f.name == "region_quant":
                v = None if v is None else int(v)
            else:
                v = float("nan") if v is None else float(v)
            kw[f.name] = v
        return cls(**kw)


_COLUMN_NAMES = tuple(f.name for f in fields(BoundReport))


class ReportBatch(Sequence):
    """Column-oriented sequence of :class:`BoundReport`.

    ``region_quant`` is stored as -1 where absent.  ``sample_index`` records
    the position of each state in the sampling order.
    """

    def __init__(self, columns: dict[str, np.ndarray], sample_index: np.ndarray | None = None):
        self.columns = columns
        size = columns["region_true"].shape[0]
        self.sample_index = np.arange(size) if sample_index is None else np.asarray(sample_index)

    def __len__(self) -> int:
        return self.columns["region_true"].shape[0]

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            if idx < 0:
                idx += len(self)
            if not 0 <= idx < len(self):
                raise IndexError("report index out of range")
            kw = {}
            for name in _COLUMN_NAMES:
                v = self.columns[name][idx]
                if name == "x":
                    v = np.array(v)
                elif name == "region_quant":
                    v = None if v < 0 else int(v)
                elif name == "region_true":
                    v = int(v)
                elif name in FLAG_COLUMNS:
                    v = bool(v)
                else:
                    v = float(v)
                kw[name] = v
            return BoundReport(**kw)
        return self.take(np.arange(len(self))[idx])

    def __iter__(self) -> Iterator[BoundReport]:
        for s in range(len(self)):
            yield self[s]

    def take(self, idx) -> "ReportBatch":
        idx = np.asarray(idx)
        return ReportBatch({k: v[idx] for k, v in self.columns.items()}, self.sample_index[idx])

    def __getattr__(self, name):
        columns = self.__dict__.get("columns")
        if columns is not None and name in columns:
            return columns[name]
        raise AttributeError(name)

    @property
    def claimed(self) -> np.ndarray:
        c = self.columns
        return c["same_region"] | (c["jump"] & c["projection_in_facet"])

    @classmethod
    def concat(cls, batches: Sequence["ReportBatch"], n: int) -> "ReportBatch":
        if not batches:
            return empty_batch(n)
        cols = {k: np.concatenate([b.columns[k] for b in batches]) for k in batches[0].columns}
        offsets, idx = 0, []
        for b in batches:
            idx.append(b.sample_index + offsets)
            offsets += len(b)
        return cls(cols, np.concatenate(idx))

    def dominance_violations(self, slack: float = ROUNDOFF_SLACK) -> np.ndarray:
        """Mask of claimed reports breaking ``actual <= a posteriori <= a priori``."""
        c = self.columns
        bad = (c["actual_error"] > c["bound_aposteriori"] + slack) | (
            c["bound_aposteriori"] > c["bound_apriori"] + slack
        )
        return self.claimed & bad


def empty_batch(n: int) -> ReportBatch:
    cols = {name: np.empty(0) for name in _COLUMN_NAMES}
    cols["x"] = np.empty((0, n))
    cols["region_true"] = np.empty(0, dtype=np.int64)
    cols["region_quant"] = np.empty(0, dtype=np.int64)
    for name in FLAG_COLUMNS:
        cols[name] = np.empty(0, dtype=bool)
    return ReportBatch(cols)


def _norms(p: PwaPartition, X: np.ndarray, norm_mode: str):
    if norm_mode == "pointwise":
        return np.sum(np.abs(X), axis=1), np.max(np.abs(X), axis=1)
    if norm_mode == "box":
        corner = np.maximum(np.abs(p.lo), np.abs(p.hi))
        N = X.shape[0]
        return np.full(N, float(np.sum(corner))), np.full(N, float(np.max(corner)))
    raise ValueError(f"norm_mode must be one of {NORM_MODES}, got {norm_mode!r}")


def compute_reports(
    p: PwaPartition,
    qp: QuantizedPartition,
    X,
    *,
    norm_mode: str = "pointwise",
    pairs: dict[tuple[int, int], FacetPair] | None = None,
) -> ReportBatch:
    """Bound reports for every row of ``X`` (vectorized).

    Every state must lie in some region of ``p``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, N = p.n, X.shape[0]
    if N == 0:
        return empty_batch(n)
    lookup = p.pair_lookup if pairs is None else pairs
    j = locate_many(p, X)
    if np.any(j < 0):
        s = int(np.flatnonzero(j < 0)[0])
        raise StateOutsidePartitionError(f"state outside partition: {X[s].tolist()}")
    _, i, Uhat = quantized_evaluate_many(qp, X)
    U = evaluate_many(p, j, X)
    no_region = i < 0
    with np.errstate(invalid="ignore"):
        actual = np.max(np.abs(Uhat - U), axis=1)

    eps_r, eps_l, eps_s = qp.fmt_regions.eps, qp.fmt_laws.eps, qp.fmt_state.eps
    eps_d = max(eps_r, eps_s)
    eps_a = max(eps_l, eps_s)
    x1, xinf = _norms(p, X, norm_mode)

    # law terms belong to the region whose quantized law is evaluated
    r2 = np.where(no_region, j, i)
    dF_inf = np.max(np.sum(np.abs(qp.dF), axis=2), axis=1)
    dG_inf = np.max(np.abs(qp.dG), axis=1)
    Fhat_inf = np.max(np.sum(np.abs(qp.base.F_all), axis=2), axis=1)
    F_inf = np.max(np.sum(np.abs(p.F_all), axis=2), axis=1)
    second_post = dF_inf[r2] * xinf + dG_inf[r2] + Fhat_inf[r2] * eps_s
    second_pri = eps_a * (F_inf[r2] + n * xinf + n * eps_a + 1.0)

    same = i == j
    moved = (~no_region) & (~same)
    delta = np.full(N, np.nan)
    first = np.where(same, 0.0, np.nan)
    resid = np.full(N, np.nan)
    jump = np.zeros(N, dtype=bool)
    proj_ok = np.zeros(N, dtype=bool)
    if moved.any():
        moved_idx = np.flatnonzero(moved)
        keys = np.stack([j[moved_idx], i[moved_idx]], axis=1)
        for jj, ii in np.unique(keys, axis=0).tolist():
            fp = lookup.get((jj, ii))
            if fp is None:
                continue
            sel = moved_idx[(keys[:, 0] == jj) & (keys[:, 1] == ii)]
            row = fp.facet_row(p, "i")
            h, k = row.h, row.k
            hh = float(h @ h)
            d = eps_d * (float(np.sum(np.abs(h))) + x1[sel] + n * eps_d + 1.0)
            gain_gap = float(np.max(np.abs((p.F_all[ii] - p.F_all[jj]) @ h)))
            y = X[sel] @ h - k
            delta[sel] = d
            first[sel] = d * gain_gap / hh
            resid[sel] = y
            jump[sel] = True
            xp = X[sel] + ((k - (X[sel] @ h)) / hh)[:, None] * h[None, :]
            reg = p.regions[ii]
            proj_ok[sel] = np.all(xp @ reg.H.T <= reg.K + p.tol, axis=1)
    corner = moved & ~jump
    second_post = np.where(no_region, np.nan, second_post)
    second_pri = np.where(no_region, np.nan, second_pri)
    cols = {
        "x": X.copy(),
        "region_true": j.astype(np.int64),
        "region_quant": i.astype(np.int64),
        "delta": delta,
        "first_term": first,
        "second_apriori": second_pri,
        "second_aposteriori": second_post,
        "bound_apriori": first + second_pri,
        "bound_aposteriori": first + second_post,
        "actual_error": actual,
        "same_region": same,
        "jump": jump,
        "projection_in_facet": proj_ok,
        "no_region": no_region,
        "corner_jump": corner,
        "facet_residual": resid,
    }
    return ReportBatch(cols)


def control_error_report(
    p: PwaPartition, qp: QuantizedPartition, x, *, norm_mode: str = "pointwise"
) -> BoundReport:
    """Full bound report for a single state inside the state box."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != p.n or not p.in_box(x):
        raise StateOutsidePartitionError(f"state outside partition: {x.tolist()}")
    return compute_reports(p, qp, x[None, :], norm_mode=norm_mode)[0]


def format_report(r: BoundReport) -> str:
    """Human-readable multi-line rendering."""
    def num(v):
        return "n/a" if np.isnan(v) else f"{v:.10g}"

    lines = [
        f"state               {r.x.tolist()}",
        f"region (true)       {r.region_true}",
        f"region (quantized)  {'none' if r.region_quant is None else r.region_quant}",
        f"delta               {num(r.delta)}",
        f"facet residual      {num(r.facet_residual)}",
        f"first term          {num(r.first_term)}",
        f"second a priori     {num(r.second_apriori)}",
        f"second a posteriori {num(r.second_aposteriori)}",
        f"bound a priori      {num(r.bound_apriori)}",
        f"bound a posteriori  {num(r.bound_aposteriori)}",
        f"actual error        {num(r.actual_error)}",
        "flags               " + ", ".join(k for k, v in r.flags.items() if v),
        f"bound claimed       {'yes' if r.claimed else 'no'}",
    ]
    return "\n".join(lines)


__all__ = [
    "BoundReport",
    "ROUNDOFF_SLACK",
    "ReportBatch",
    "compute_reports",
    "control_error_report",
    "delta_bound",
    "first_term",
    "format_report",
    "jump_certificate",
    "second_term_aposteriori",
    "second_term_apriori",
]
