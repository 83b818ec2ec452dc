"""Seeded sampling experiments: sweeps, facet sensitivity tables, exports.

Randomness comes from PCG64 streams keyed by ``SeedSequence(seed,
spawn_key=...)``.  Samples are drawn in fixed-size chunks, each with its own
stream, so the result does not depend on how many threads process the
chunks or in which order they finish.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Callable, Sequence

import numpy as np

from .bounds import (
    CSV_FLOAT_COLUMNS,
    FLAG_COLUMNS,
    NORM_MODES,
    ROUNDOFF_SLACK,
    BoundReport,
    ReportBatch,
    compute_reports,
)
from .errors import QuantizationOverflowError
from .partition import FacetPair, PwaPartition, facet_points, locate_many
from .quantize import FixedPointFormat, QuantizedPartition, quantize_partition

logger = logging.getLogger(__name__)

MODES = ("box_uniform", "near_facets")
DEFAULT_SAMPLES = 100_000
DEFAULT_DROP = 1e-4
CHUNK = 4096


@dataclass(frozen=True)
class ExperimentConfig:
    """Sampling experiment settings.

    ``formats`` is ``(regions, laws, state)``.  ``band_width=None`` in
    near-facet mode picks, per facet pair, twice the largest distance from
    which quantization can push a state across that facet.
    """

    formats: tuple[FixedPointFormat, FixedPointFormat, FixedPointFormat]
    sample_count: int = DEFAULT_SAMPLES
    seed: int = 0
    mode: str = "box_uniform"
    band_width: float | None = None
    drop_threshold: float = DEFAULT_DROP
    norm_mode: str = "pointwise"
    chunk_size: int = CHUNK

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.band_width is not None and not self.band_width > 0:
            raise ValueError("band_width must be positive")
        if self.norm_mode not in NORM_MODES:
            raise ValueError(f"norm_mode must be one of {NORM_MODES}")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        if len(self.formats) != 3:
            raise ValueError("formats must be (regions, laws, state)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @classmethod
    def uniform_format(cls, a: int, b: int, **kwargs) -> "ExperimentConfig":
        f = FixedPointFormat(a, b)
        return cls(formats=(f, f, f), **kwargs)

    def quantize(self, p: PwaPartition) -> QuantizedPartition:
        return quantize_partition(p, *self.formats)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _chunks(total: int, size: int) -> list[int]:
    return [min(size, total - start) for start in range(0, total, size)]


def facet_band(p: PwaPartition, fp: FacetPair, cfg: ExperimentConfig) -> float:
    """Twice the largest facet distance from which a jump is possible."""
    if cfg.band_width is not None:
        return cfg.band_width
    eps = max(cfg.formats[0].eps, cfg.formats[2].eps)
    x1 = float(np.sum(np.maximum(np.abs(p.lo), np.abs(p.hi))))
    dist = 0.0
    for side in ("i", "j"):
        row = fp.facet_row(p, side)
        delta = eps * (float(np.sum(np.abs(row.h))) + x1 + p.n * eps + 1.0)
        dist = max(dist, delta / float(np.linalg.norm(row.h)))
    return 2.0 * dist


def _box_task(p, cfg, c, size):
    def run():
        rng = _rng(cfg.seed, 0, c)
        X = p.lo + (p.hi - p.lo) * rng.random((size, p.n))
        X = X[locate_many(p, X) >= 0]
        return X, np.full(X.shape[0], -1, dtype=np.int64)

    return run


def _facet_task(p, cfg, k, fp, c, size, band):
    def run():
        rng = _rng(cfg.seed, 1, k, c)
        pts = facet_points(p, fp.hp, [fp.i, fp.j], size, rng)
        m = pts.shape[0]
        dist = band * (1.0 - rng.random(m))  # (0, band]
        side = np.where(rng.random(m) < 0.5, -1.0, 1.0)
        X = pts + (side * dist)[:, None] * fp.hp.h[None, :]
        keep = p.in_box(X, 0.0)
        keep &= locate_many(p, X) >= 0
        X = X[keep]
        return X, np.full(X.shape[0], k, dtype=np.int64)

    return run


def _tasks(p: PwaPartition, cfg: ExperimentConfig) -> list[Callable]:
    if cfg.mode == "box_uniform":
        return [_box_task(p, cfg, c, size) for c, size in enumerate(_chunks(cfg.sample_count, cfg.chunk_size))]
    pairs = p.facet_pairs
    if not pairs:
        return []
    base, extra = divmod(cfg.sample_count, len(pairs))
    tasks = []
    for k, fp in enumerate(pairs):
        band = facet_band(p, fp, cfg)
        for c, size in enumerate(_chunks(base + (k < extra), cfg.chunk_size)):
            tasks.append(_facet_task(p, cfg, k, fp, c, size, band))
    return tasks


def _run(tasks, threads: int):
    if threads <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: t(), tasks))


def sample_states_with_pairs(p: PwaPartition, cfg: ExperimentConfig, *, threads: int = 1):
    """States plus the index of the facet pair that produced each (-1 in box mode)."""
    parts = _run(_tasks(p, cfg), threads)
    if not parts:
        return np.empty((0, p.n)), np.empty(0, dtype=np.int64)
    return np.vstack([x for x, _ in parts]), np.concatenate([k for _, k in parts])


def sample_states(p: PwaPartition, cfg: ExperimentConfig, *, threads: int = 1) -> np.ndarray:
    """Deterministic consistent states; box mode may return fewer than requested."""
    X, _ = sample_states_with_pairs(p, cfg, threads=threads)
    if X.shape[0] < cfg.sample_count:
        logger.info("sampled %d of %d requested states", X.shape[0], cfg.sample_count)
    return X


def _report_task(p, qp, cfg, task):
    def run():
        X, pair = task()
        try:
            batch = compute_reports(p, qp, X, norm_mode=cfg.norm_mode)
        except QuantizationOverflowError as exc:
            where = exc.location[1] if exc.location else ()
            if where:
                exc.state = X[where[0]]
            raise
        batch.columns["pair"] = pair
        return batch

    return run


def collect_reports(
    p: PwaPartition, qp: QuantizedPartition, cfg: ExperimentConfig, *, threads: int = 1
) -> ReportBatch:
    """Reports for every sampled state, in sampling order (nothing dropped)."""
    batches = _run([_report_task(p, qp, cfg, t) for t in _tasks(p, cfg)], threads)
    out = ReportBatch.concat(batches, p.n)
    if "pair" not in out.columns:
        out.columns["pair"] = np.empty(0, dtype=np.int64)
    return out


def run_sweep(
    p: PwaPartition,
    qp: QuantizedPartition | None,
    cfg: ExperimentConfig,
    *,
    threads: int = 1,
) -> ReportBatch:
    """Sampled reports with tiny ones dropped, sorted by a priori bound.

    A report is dropped when both its a posteriori bound and its actual error
    are below ``cfg.drop_threshold``.  The sort is stable over sampling order
    and places reports without a bound claim last.
    """
    qp = cfg.quantize(p) if qp is None else qp
    reports = collect_reports(p, qp, cfg, threads=threads)
    thr = cfg.drop_threshold
    c = reports.columns
    tiny = (c["bound_aposteriori"] < thr) & (c["actual_error"] < thr)
    kept = np.flatnonzero(~tiny)
    order = np.argsort(c["bound_apriori"][kept], kind="stable")
    return reports.take(kept[order])


@dataclass(frozen=True)
class SweepCheck:
    reports: int
    claimed: int
    jumps: int
    corner_jumps: int
    no_region: int
    violations: int
    unclaimed_violations: int
    localization_failures: int

    @property
    def ok(self) -> bool:
        return self.violations == 0 and self.localization_failures == 0


def check_sweep(reports: ReportBatch, p: PwaPartition | None = None, slack: float = ROUNDOFF_SLACK) -> SweepCheck:
    """Count dominance violations and jump-band failures in a report set."""
    c = reports.columns
    viol = reports.dominance_violations(slack)
    with np.errstate(invalid="ignore"):
        unclaimed_bad = ~reports.claimed & (c["actual_error"] > c["bound_aposteriori"] + slack)
        tol = 0.0 if p is None else p.tol
        y, d = c["facet_residual"], c["delta"]
        in_band = (-d < y) & (y <= tol)
    return SweepCheck(
        reports=len(reports),
        claimed=int(reports.claimed.sum()),
        jumps=int(c["jump"].sum()),
        corner_jumps=int(c["corner_jump"].sum()),
        no_region=int(c["no_region"].sum()),
        violations=int(viol.sum()),
        unclaimed_violations=int(unclaimed_bad.sum()),
        localization_failures=int((c["jump"] & ~in_band).sum()),
    )


# ---------------------------------------------------------------------------
# facet sensitivity


@dataclass(frozen=True)
class FacetSensitivityRow:
    pair: FacetPair
    max_aposteriori: float
    max_actual: float
    samples_used: int
    jumps: int = 0
    excluded: int = 0
    trivial: bool = field(default=False)

    @property
    def label(self) -> str:
        return "trivial" if self.trivial else "nontrivial"


def facet_report(
    p: PwaPartition,
    qp: QuantizedPartition | None,
    cfg: ExperimentConfig,
    *,
    threads: int = 1,
) -> list[FacetSensitivityRow]:
    """Maximal a posteriori bound and actual error per facet pair.

    Only samples whose true and quantized regions both belong to the pair,
    and whose bounds are claimed, enter the maxima; the rest are counted in
    ``excluded``.
    """
    if cfg.mode != "near_facets":
        raise ValueError("facet_report needs near_facets sampling")
    qp = cfg.quantize(p) if qp is None else qp
    reports = collect_reports(p, qp, cfg, threads=threads)
    c = reports.columns
    claimed = reports.claimed
    rows = []
    for k, fp in enumerate(p.facet_pairs):
        mine = c["pair"] == k
        members = np.isin(c["region_true"], fp.regions) & np.isin(c["region_quant"], fp.regions)
        used = mine & members & claimed
        post = float(np.max(c["bound_aposteriori"][used])) if used.any() else 0.0
        act = float(np.max(c["actual_error"][used])) if used.any() else 0.0
        rows.append(
            FacetSensitivityRow(
                pair=fp,
                max_aposteriori=post,
                max_actual=act,
                samples_used=int(used.sum()),
                jumps=int((mine & members & c["jump"]).sum()),
                excluded=int((mine & ~(members & claimed)).sum()),
                trivial=post < cfg.drop_threshold and act < cfg.drop_threshold,
            )
        )
    rows.sort(key=lambda r: (*r.pair.regions, r.pair.i))
    return rows


# ---------------------------------------------------------------------------
# export

SERIES = (("bound_apriori", "a priori"), ("bound_aposteriori", "a posteriori"), ("actual_error", "actual"))


def _fmt_float(v: float) -> str:
    return repr(float(v))


def csv_header(n: int) -> list[str]:
    return [f"x{c}" for c in range(n)] + ["region_true", "region_quant", *CSV_FLOAT_COLUMNS, *FLAG_COLUMNS]


def report_row(r: BoundReport) -> list[str]:
    row = [_fmt_float(v) for v in r.x]
    row.append(str(r.region_true))
    row.append("" if r.region_quant is None else str(r.region_quant))
    row.extend(_fmt_float(getattr(r, name)) for name in CSV_FLOAT_COLUMNS)
    row.extend("1" if getattr(r, name) else "0" for name in FLAG_COLUMNS)
    return row


def _reports_n(reports: Sequence[BoundReport]) -> int:
    if isinstance(reports, ReportBatch):
        return reports.columns["x"].shape[1]
    return len(reports[0].x) if len(reports) else 0


def sweep_csv(reports: Sequence[BoundReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header(_reports_n(reports)))
    for r in reports:
        writer.writerow(report_row(r))
    return buf.getvalue()


def sweep_json(reports: Sequence[BoundReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], allow_nan=False) + "\n"


def load_reports_json(text: str) -> list[BoundReport]:
    return [BoundReport.from_dict(obj) for obj in json.loads(text)]


def sweep_svg(reports: Sequence[BoundReport], *, width: int = 800, height: int = 480) -> str:
    """Index-versus-value scatter of the three error columns."""
    if len(reports) == 0:
        raise ValueError("cannot plot an empty report sequence")
    cols = {name: np.array([getattr(r, name) for r in reports], dtype=float) for name, _ in SERIES}
    finite = np.concatenate([v[np.isfinite(v)] for v in cols.values()])
    ymax = float(finite.max()) if finite.size else 1.0
    ymax = ymax if ymax > 0 else 1.0
    left, right, top, bottom = 60, 20, 20, 40
    pw, ph = width - left - right, height - top - bottom
    count = len(reports)

    def px(idx):
        return left + (pw * idx / max(count - 1, 1))

    def py(v):
        return top + ph * (1.0 - v / ymax)

    colours = ("#d62728", "#1f77b4", "#2ca02c")
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{left}" y="{height - 10}" font-size="12">state index (sorted by a priori bound)</text>',
        f'<text x="5" y="{top + 10}" font-size="12">{ymax:.4g}</text>',
        f'<text x="5" y="{top + ph}" font-size="12">0</text>',
    ]
    for (name, label), colour in zip(SERIES, colours):
        vals = cols[name]
        dots = "".join(
            f'<circle cx="{px(s):.2f}" cy="{py(v):.2f}" r="1.5"/>' for s, v in enumerate(vals) if math.isfinite(v)
        )
        out.append(f'<g class="series" data-label="{label}" fill="{colour}">{dots}</g>')
    for row, ((_, label), colour) in enumerate(zip(SERIES, colours)):
        y = top + 15 + 16 * row
        out.append(
            f'<g class="legend"><circle cx="{left + 15}" cy="{y - 4}" r="4" fill="{colour}"/>'
            f'<text x="{left + 25}" y="{y}" font-size="12">{label}</text></g>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


EXPORTERS = {"csv": sweep_csv, "json": sweep_json, "svg_scatter": sweep_svg}


def _write(text: str, destination) -> None:
    if hasattr(destination, "write"):
        destination.write(text)
        return
    with open(destination, "w", newline="") as fh:
        fh.write(text)


def export_sweep(reports: Sequence[BoundReport], destination: str | os.PathLike | IO, format: str = "csv") -> None:
    try:
        render = EXPORTERS[format]
    except KeyError:
        raise ValueError(f"format must be one of {sorted(EXPORTERS)}") from None
    _write(render(reports), destination)


FACET_COLUMNS = ("i", "j", "h", "k", "max_aposteriori", "max_actual", "samples_used", "jumps", "excluded", "label")


def facet_csv(rows: Sequence[FacetSensitivityRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FACET_COLUMNS)
    for r in rows:
        writer.writerow(
            [
                r.pair.i,
                r.pair.j,
                " ".join(_fmt_float(v) for v in r.pair.hp.h),
                _fmt_float(r.pair.hp.k),
                _fmt_float(r.max_aposteriori),
                _fmt_float(r.max_actual),
                r.samples_used,
                r.jumps,
                r.excluded,
                r.label,
            ]
        )
    return buf.getvalue()


def export_facets(rows: Sequence[FacetSensitivityRow], destination, format: str = "csv") -> None:
    if format == "csv":
        _write(facet_csv(rows), destination)
    elif format == "json":
        data = [
            {
                "i": r.pair.i,
                "j": r.pair.j,
                "h": r.pair.hp.h.tolist(),
                "k": r.pair.hp.k,
                "max_aposteriori": r.max_aposteriori,
                "max_actual": r.max_actual,
                "samples_used": r.samples_used,
                "jumps": r.jumps,
                "excluded": r.excluded,
                "label": r.label,
            }
            for r in rows
        ]
        _write(json.dumps(data, indent=1) + "\n", destination)
    else:
        raise ValueError("facet tables export as csv or json")


__all__ = [
    "ExperimentConfig",
    "FacetSensitivityRow",
    "SweepCheck",
    "check_sweep",
    "collect_reports",
    "export_facets",
    "export_sweep",
    "facet_band",
    "facet_report",
    "load_reports_json",
    "run_sweep",
    "sample_states",
    "sample_states_with_pairs",
    "sweep_csv",
    "sweep_json",
    "sweep_svg",
]
