"""Polyhedral piecewise-affine control laws.

A partition is a list of regions ``{x : H x <= K}`` with one affine law
``u = F x + G`` per region, over a bounded state box.  Point location is a
sequential search with the lowest region index winning on shared boundaries.
Region indices are 0-based throughout the package.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Iterable, Sequence, Union

import numpy as np

from . import _kernels
from .errors import (
    ContinuityError,
    DimensionMismatchError,
    EmptyRegionError,
    MalformedDocumentError,
    PartitionError,
)

logger = logging.getLogger(__name__)

CONTINUITY_TOL = 1e-8
MEMBERSHIP_REL_TOL = 2.0**-40
N_PROBES = 32
# canonical hyperplanes are compared entrywise at this tolerance
_HP_MATCH_TOL = 1e-9


def _frozen(a, dtype=np.float64, ndim=None):
    arr = np.array(a, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionMismatchError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """The hyperplane ``h x = k`` (and the half-space ``h x <= k``)."""

    h: np.ndarray
    k: float

    def __post_init__(self):
        h = _frozen(self.h, ndim=1)
        if not np.any(h):
            raise PartitionError("hyperplane normal must be nonzero")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "k", float(self.k))

    def residual(self, x):
        """``h x - k``; vectorized over the rows of a 2-d ``x``."""
        return np.asarray(x, dtype=np.float64) @ self.h - self.k

    def canonical(self) -> tuple["Hyperplane", bool]:
        """Unit 2-norm representative with a positive first nonzero entry.

        The flag tells whether the orientation was reversed.
        """
        scale = float(np.linalg.norm(self.h))
        h, k = self.h / scale, self.k / scale
        flipped = bool(h[np.flatnonzero(h)[0]] < 0)
        if flipped:
            h, k = -h, -k
        return Hyperplane(h, k), flipped

    def __neg__(self):
        return Hyperplane(-self.h, -self.k)

    def __repr__(self):
        return f"Hyperplane(h={self.h.tolist()}, k={self.k!r})"


@dataclass(frozen=True, eq=False)
class Region:
    H: np.ndarray
    K: np.ndarray
    witness: np.ndarray | None = None

    def __post_init__(self):
        H = _frozen(self.H, ndim=2)
        K = _frozen(self.K, ndim=1)
        if H.shape[0] != K.shape[0]:
            raise DimensionMismatchError(
                f"H has {H.shape[0]} rows but K has {K.shape[0]} entries"
            )
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "K", K)
        if self.witness is not None:
            object.__setattr__(self, "witness", _frozen(self.witness, ndim=1))

    @property
    def n_constraints(self) -> int:
        return self.K.shape[0]

    def contains(self, x, tol=0.0) -> bool:
        return bool(np.all(self.H @ np.asarray(x, dtype=np.float64) <= self.K + tol))

    def row(self, q: int) -> Hyperplane:
        return Hyperplane(self.H[q], self.K[q])


@dataclass(frozen=True, eq=False)
class AffineLaw:
    F: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        F = _frozen(self.F, ndim=2)
        G = _frozen(self.G, ndim=1)
        if F.shape[0] != G.shape[0]:
            raise DimensionMismatchError(f"F has {F.shape[0]} rows but G has {G.shape[0]}")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)

    def __call__(self, x):
        return self.F @ np.asarray(x, dtype=np.float64) + self.G


@dataclass(frozen=True, eq=False)
class FacetPair:
    """Two regions sharing the hyperplane ``hp``.

    Orientation is fixed by construction: ``hp.h x <= hp.k`` on region ``j``
    and ``>=`` on region ``i``.  ``hp`` is canonical (unit 2-norm, positive
    first nonzero entry).  ``row_i``/``row_j`` index the constraint rows that
    carry this hyperplane in each region's own (unnormalized) data.
    """

    i: int
    j: int
    hp: Hyperplane
    row_i: int
    row_j: int

    @property
    def regions(self) -> tuple[int, int]:
        return (min(self.i, self.j), max(self.i, self.j))

    def reversed(self) -> "FacetPair":
        return FacetPair(self.j, self.i, -self.hp, self.row_j, self.row_i)

    def facet_row(self, p: "PwaPartition", side: str = "i") -> Hyperplane:
        """Raw constraint row of region ``i`` or ``j``, oriented like ``hp``."""
        if side == "i":
            return -p.regions[self.i].row(self.row_i)
        return p.regions[self.j].row(self.row_j)

    def __repr__(self):
        return f"FacetPair(i={self.i}, j={self.j}, hp={self.hp!r})"


@dataclass(frozen=True, eq=False)
class PwaPartition:
    """Regions, their affine laws and the admissible state box."""

    n: int
    m: int
    regions: tuple[Region, ...]
    laws: tuple[AffineLaw, ...]
    lo: np.ndarray
    hi: np.ndarray
    scaling: np.ndarray | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "laws", tuple(self.laws))
        object.__setattr__(self, "lo", _frozen(self.lo, ndim=1))
        object.__setattr__(self, "hi", _frozen(self.hi, ndim=1))
        if self.scaling is not None:
            object.__setattr__(self, "scaling", _frozen(self.scaling, ndim=1))
        n, m = int(self.n), int(self.m)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", m)
        if n < 1 or m < 1:
            raise DimensionMismatchError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
        if not self.regions:
            raise PartitionError("partition has no regions")
        if len(self.regions) != len(self.laws):
            raise DimensionMismatchError(
                f"{len(self.regions)} regions but {len(self.laws)} control laws"
            )
        if self.lo.shape != (n,) or self.hi.shape != (n,):
            raise DimensionMismatchError("state_box bounds must have length n")
        for r, (reg, law) in enumerate(zip(self.regions, self.laws)):
            if reg.H.shape[1] != n:
                raise DimensionMismatchError(f"region {r}: H has {reg.H.shape[1]} columns, n={n}")
            if reg.n_constraints == 0:
                raise PartitionError(f"region {r} has no constraints")
            if law.F.shape != (m, n) or law.G.shape != (m,):
                raise DimensionMismatchError(
                    f"region {r}: law shapes F{law.F.shape}, G{law.G.shape} do not match m={m}, n={n}"
                )
            if reg.witness is not None and reg.witness.shape != (n,):
                raise DimensionMismatchError(f"region {r}: witness must have length n")

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @cached_property
    def row_start(self) -> np.ndarray:
        counts = [reg.n_constraints for reg in self.regions]
        return _frozen(np.concatenate([[0], np.cumsum(counts)]), dtype=np.int64)

    @cached_property
    def H_all(self) -> np.ndarray:
        return _frozen(np.vstack([reg.H for reg in self.regions]))

    @cached_property
    def K_all(self) -> np.ndarray:
        return _frozen(np.concatenate([reg.K for reg in self.regions]))

    @cached_property
    def F_all(self) -> np.ndarray:
        return _frozen(np.stack([law.F for law in self.laws]))

    @cached_property
    def G_all(self) -> np.ndarray:
        return _frozen(np.stack([law.G for law in self.laws]))

    @cached_property
    def tol(self) -> float:
        """Membership tolerance: 2**-40 times the largest |K| entry."""
        kmax = float(np.max(np.abs(self.K_all)))
        return MEMBERSHIP_REL_TOL * (kmax if kmax > 0 else 1.0)

    @cached_property
    def facet_pairs(self) -> tuple[FacetPair, ...]:
        return tuple(find_facet_pairs(self))

    @cached_property
    def pair_lookup(self) -> dict[tuple[int, int], FacetPair]:
        """``(j, i) -> pair`` oriented so that ``j`` is the ``<=`` side."""
        out = {}
        for fp in self.facet_pairs:
            out.setdefault((fp.j, fp.i), fp)
            out.setdefault((fp.i, fp.j), fp.reversed())
        return out

    def in_box(self, x, tol=None):
        tol = self.tol if tol is None else tol
        x = np.asarray(x, dtype=np.float64)
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def to_document(self) -> dict:
        regions = []
        for reg, law in zip(self.regions, self.laws):
            obj = {"H": reg.H.tolist(), "K": reg.K.tolist(), "F": law.F.tolist(), "G": law.G.tolist()}
            if reg.witness is not None:
                obj["witness"] = reg.witness.tolist()
            regions.append(obj)
        doc = {
            "n": self.n,
            "m": self.m,
            "state_box": {"lo": self.lo.tolist(), "hi": self.hi.tolist()},
            "regions": regions,
        }
        if self.name:
            doc["name"] = self.name
        if self.scaling is not None:
            doc["scaling"] = {"d": self.scaling.tolist()}
        return doc


# ---------------------------------------------------------------------------
# documents

Source = Union[bytes, bytearray, str, IO]


def _read_json(source: Source) -> dict:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, (bytes, bytearray)):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedDocumentError(f"not a JSON document: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocumentError("partition document must be a JSON object")
    return doc


def _field(obj, key, where="document"):
    try:
        return obj[key]
    except (KeyError, TypeError):
        raise MalformedDocumentError(f"{where}: missing field {key!r}") from None


def _numeric(value, where, ndim):
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise MalformedDocumentError(f"{where}: non-numeric entries ({exc})") from None
    if arr.ndim != ndim:
        if arr.size == 0 and ndim == 2:
            return arr.reshape(0, 0)
        raise DimensionMismatchError(f"{where}: expected {ndim}-d data, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise MalformedDocumentError(f"{where}: non-finite entries")
    return arr


def partition_from_document(doc: dict) -> PwaPartition:
    """Build a partition from a parsed document without running validation."""
    n = _field(doc, "n")
    m = _field(doc, "m")
    if not isinstance(n, int) or not isinstance(m, int):
        raise MalformedDocumentError("n and m must be integers")
    box = _field(doc, "state_box")
    lo = _numeric(_field(box, "lo", "state_box"), "state_box.lo", 1)
    hi = _numeric(_field(box, "hi", "state_box"), "state_box.hi", 1)
    raw_regions = _field(doc, "regions")
    if not isinstance(raw_regions, list):
        raise MalformedDocumentError("regions must be an array")
    regions, laws = [], []
    for r, obj in enumerate(raw_regions):
        where = f"region {r}"
        H = _numeric(_field(obj, "H", where), f"{where}.H", 2)
        K = _numeric(_field(obj, "K", where), f"{where}.K", 1)
        F = _numeric(_field(obj, "F", where), f"{where}.F", 2)
        G = _numeric(_field(obj, "G", where), f"{where}.G", 1)
        witness = obj.get("witness") if isinstance(obj, dict) else None
        if witness is not None:
            witness = _numeric(witness, f"{where}.witness", 1)
        try:
            regions.append(Region(H, K, witness))
            laws.append(AffineLaw(F, G))
        except DimensionMismatchError as exc:
            raise DimensionMismatchError(f"{where}: {exc}") from None
    scaling = doc.get("scaling")
    if scaling is not None:
        scaling = _numeric(_field(scaling, "d", "scaling"), "scaling.d", 1)
    return PwaPartition(n, m, regions, laws, lo, hi, scaling=scaling, name=str(doc.get("name", "")))


def load_partition(source: Source, *, continuity_tol: float = CONTINUITY_TOL) -> PwaPartition:
    """Parse and validate a partition document (bytes, text or file object)."""
    p = partition_from_document(_read_json(source))
    validate_partition(p, continuity_tol=continuity_tol)
    return p


def read_partition(path: str | os.PathLike, **kwargs) -> PwaPartition:
    with open(path, "rb") as fh:
        return load_partition(fh, **kwargs)


def dump_partition(p: PwaPartition) -> str:
    return json.dumps(p.to_document(), indent=1)


# ---------------------------------------------------------------------------
# location and evaluation


def locate_many(p: PwaPartition, X, tol: float | None = None) -> np.ndarray:
    """Region index per row of ``X`` (-1 where no region qualifies)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != p.n:
        raise DimensionMismatchError(f"states have length {X.shape[1]}, partition n={p.n}")
    tol = p.tol if tol is None else tol
    return _kernels.locate_float(X, p.H_all, p.K_all, p.row_start, tol)


def locate(p: PwaPartition, x, tol: float | None = None) -> int | None:
    """Smallest ``i`` with ``H_i x <= K_i + tol``, or None."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != p.n:
        raise DimensionMismatchError(f"state has length {x.shape[0]}, partition n={p.n}")
    r = int(locate_many(p, x[None, :], tol)[0])
    return None if r < 0 else r


def evaluate_law(p: PwaPartition, i: int, x) -> np.ndarray:
    if not 0 <= i < p.n_regions:
        raise IndexError(f"region index {i} out of range [0, {p.n_regions})")
    return p.laws[i](x)


def evaluate_many(p: PwaPartition, regions: np.ndarray, X) -> np.ndarray:
    """``F_r x + G_r`` row by row; ``regions`` must be valid indices."""
    X = np.asarray(X, dtype=np.float64)
    return np.einsum("smn,sn->sm", p.F_all[regions], X) + p.G_all[regions]


# ---------------------------------------------------------------------------
# geometry


def project_onto_hyperplane(x, hp: Hyperplane) -> tuple[np.ndarray, float]:
    """Orthogonal projection ``x_p = x + t h'`` with ``t = (k - h x) / |h|_2^2``."""
    x = np.asarray(x, dtype=np.float64)
    hh = float(hp.h @ hp.h)
    if hh == 0.0:
        raise PartitionError("cannot project onto a hyperplane with zero normal")
    t = (hp.k - float(hp.h @ x)) / hh
    return x + t * hp.h, t


def _project_rows(X, h, k):
    t = (k - X @ h) / float(h @ h)
    return X + t[:, None] * h[None, :]


def check_assumptions(p: PwaPartition, fp: FacetPair, x, tol: float | None = None) -> dict[str, bool]:
    """Geometric premises of the facet-jump bound for state ``x`` in ``P_j``."""
    tol = p.tol if tol is None else tol
    x = np.asarray(x, dtype=np.float64)
    xp, _ = project_onto_hyperplane(x, fp.hp)
    return {
        "projection_in_facet": p.regions[fp.i].contains(xp, tol),
        "x_on_correct_side": bool(fp.hp.h @ x <= fp.hp.k + tol),
    }


def _box_uniform(p: PwaPartition, rng: np.random.Generator, count: int) -> np.ndarray:
    return p.lo + (p.hi - p.lo) * rng.random((count, p.n))


def facet_points(
    p: PwaPartition,
    hp: Hyperplane,
    require: Sequence[int],
    count: int,
    rng: np.random.Generator,
    *,
    max_rounds: int = 16,
) -> np.ndarray:
    """Points on ``hp`` inside the box and inside every region in ``require``.

    Box-uniform draws are projected onto the hyperplane and filtered; the
    survivors are then mixed by random convex combinations (the facet is
    convex, so the mixtures stay on it).  May return fewer than ``count``
    points, or none, when the facet is tiny compared with the box.
    """
    h, k = hp.h, hp.k
    tol = p.tol
    found = []
    n_found = 0
    batch = max(4 * count, 64)
    for _ in range(max_rounds):
        cand = _project_rows(_box_uniform(p, rng, batch), h, k)
        keep = p.in_box(cand, tol)
        for r in require:
            reg = p.regions[r]
            keep &= np.all(cand @ reg.H.T <= reg.K + tol, axis=1)
        if keep.any():
            found.append(cand[keep])
            n_found += int(keep.sum())
        if n_found >= count:
            break
    if not found:
        return np.empty((0, p.n))
    base = np.vstack(found)[:count]
    if base.shape[0] < 2:
        return base
    # keep half as drawn, replace the rest by mixtures
    n_mix = base.shape[0] // 2
    w = rng.dirichlet(np.ones(base.shape[0]), size=n_mix)
    mixed = _project_rows(w @ base, h, k)
    return np.vstack([base[: base.shape[0] - n_mix], mixed])


def _match_row(region: Region, hp: Hyperplane) -> int | None:
    """Index of the row of ``region`` equal to ``hp`` up to positive scaling."""
    norms = np.linalg.norm(region.H, axis=1)
    for q in np.flatnonzero(norms > 0):
        if abs(region.K[q] / norms[q] - hp.k) > _HP_MATCH_TOL * max(1.0, abs(hp.k)):
            continue
        if np.max(np.abs(region.H[q] / norms[q] - hp.h)) <= _HP_MATCH_TOL:
            return int(q)
    return None


def find_facet_pairs(
    p: PwaPartition,
    probe_step: float | None = None,
    *,
    n_probes: int = N_PROBES,
    seed: int = 0,
) -> list[FacetPair]:
    """Detect pairs of regions sharing a facet by probing across each facet.

    For every constraint row of every region, probe points on the facet are
    stepped by ``+-probe_step`` along the unit normal and located.  Distinct
    regions on the two sides give a pair, kept only when both regions carry
    the hyperplane among their own rows (this filters steps that cross a
    corner into a third region).  Facets on the box boundary give nothing.
    """
    if probe_step is None:
        probe_step = 1e-6 * float(np.max(p.hi - p.lo))
    if probe_step <= 0:
        raise ValueError("probe_step must be positive")
    found: dict[tuple, FacetPair] = {}
    for r, reg in enumerate(p.regions):
        for q in range(reg.n_constraints):
            if not np.any(reg.H[q]):
                continue
            row = reg.row(q)
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(r, q))))
            pts = facet_points(p, row, [r], n_probes, rng)
            if pts.shape[0] == 0:
                continue
            unit = row.h / np.linalg.norm(row.h)
            below = locate_many(p, pts - probe_step * unit)
            above = locate_many(p, pts + probe_step * unit)
            hp, flipped = row.canonical()
            for lb, la in set(zip(below.tolist(), above.tolist())):
                if lb < 0 or la < 0 or lb == la:
                    continue
                j, i = (la, lb) if flipped else (lb, la)
                key = (j, i, *np.round(hp.h, 9).tolist(), round(hp.k, 9))
                if key in found:
                    continue
                row_j = _match_row(p.regions[j], hp)
                row_i = _match_row(p.regions[i], -hp)
                if row_j is None or row_i is None:
                    continue
                found[key] = FacetPair(i, j, hp, row_i, row_j)
    pairs = sorted(found.values(), key=lambda fp: (*fp.regions, fp.i))
    logger.debug("found %d facet pairs", len(pairs))
    return pairs


def continuity_residuals(
    p: PwaPartition,
    pairs: Iterable[FacetPair] | None = None,
    *,
    n_probes: int = N_PROBES,
    seed: int = 1,
) -> list[tuple[FacetPair, float]]:
    """Largest ``|(F_i - F_j) x + (G_i - G_j)|_inf`` over probes on each shared facet."""
    pairs = p.facet_pairs if pairs is None else pairs
    out = []
    for idx, fp in enumerate(pairs):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(idx,))))
        pts = facet_points(p, fp.hp, [fp.i, fp.j], n_probes, rng)
        if pts.shape[0] == 0:
            out.append((fp, 0.0))
            continue
        diff = evaluate_many(p, np.full(len(pts), fp.i), pts) - evaluate_many(p, np.full(len(pts), fp.j), pts)
        out.append((fp, float(np.max(np.abs(diff)))))
    return out


def _find_witness(p: PwaPartition, r: int, rng, attempts: int = 16, batch: int = 4096):
    reg = p.regions[r]
    for _ in range(attempts):
        X = _box_uniform(p, rng, batch)
        ok = np.all(X @ reg.H.T <= reg.K + p.tol, axis=1)
        if ok.any():
            return X[np.argmax(ok)]
    return None


@dataclass(frozen=True)
class ValidationSummary:
    pairs: tuple[FacetPair, ...]
    residuals: tuple[float, ...]

    @property
    def worst_residual(self) -> float:
        return max(self.residuals, default=0.0)


def validate_partition(p: PwaPartition, *, continuity_tol: float = CONTINUITY_TOL) -> ValidationSummary:
    """Check box, nonzero rows, nonempty regions and continuity across facets.

    Raises the matching :class:`PartitionError` subclass on the first
    violation; returns the detected facet pairs and their residuals.
    """
    if not np.all(np.isfinite(p.lo)) or not np.all(np.isfinite(p.hi)) or np.any(p.lo >= p.hi):
        raise PartitionError("state_box needs finite bounds with lo < hi")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(0, spawn_key=(0xB0,))))
    for r, reg in enumerate(p.regions):
        zero = np.flatnonzero(~np.any(reg.H, axis=1))
        if zero.size:
            raise PartitionError(f"region {r}: constraint row {int(zero[0])} has a zero normal")
        if reg.witness is not None:
            if not reg.contains(reg.witness, p.tol):
                raise EmptyRegionError(f"region {r}: stored witness violates the region constraints")
            if not p.in_box(reg.witness):
                raise PartitionError(f"region {r}: witness lies outside the state box")
        elif _find_witness(p, r, rng) is None:
            raise EmptyRegionError(f"region {r}: no point of the state box satisfies H x <= K")
    checked = continuity_residuals(p)
    if checked:
        worst_pair, worst = max(checked, key=lambda item: item[1])
        if worst > continuity_tol:
            raise ContinuityError(
                f"control law jumps by {worst:.6g} across the facet between regions "
                f"{worst_pair.i} and {worst_pair.j} (tolerance {continuity_tol:g})",
                pair=worst_pair,
                residual=worst,
            )
    return ValidationSummary(tuple(fp for fp, _ in checked), tuple(r for _, r in checked))


__all__ = [
    "AffineLaw",
    "CONTINUITY_TOL",
    "FacetPair",
    "Hyperplane",
    "PwaPartition",
    "Region",
    "ValidationSummary",
    "check_assumptions",
    "continuity_residuals",
    "dump_partition",
    "evaluate_law",
    "evaluate_many",
    "facet_points",
    "find_facet_pairs",
    "load_partition",
    "locate",
    "locate_many",
    "partition_from_document",
    "project_onto_hyperplane",
    "read_partition",
    "validate_partition",
]
