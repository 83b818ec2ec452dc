"""Signed fixed-point formats and grid snapping of partitions.

A format ``(a, b)`` has ``a`` total bits including the sign bit and ``b``
fraction bits: the grid step is ``2**-b`` and the range is
``[-2**(a-1-b), 2**(a-1-b) - 2**-b]``.  Values are rounded to the nearest
grid point with ties going to the even mantissa, so ``|q(z) - z| <= 2**-(b+1)``.
Out-of-range values raise instead of saturating.

Quantized evaluation treats the stored data and the quantized state as exact
operands: sums and products are carried out on integer mantissas without
intermediate rounding.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import MalformedDocumentError, QuantizationOverflowError
from .partition import (
    AffineLaw,
    DimensionMismatchError,
    PwaPartition,
    Region,
    Source,
    _read_json,
    partition_from_document,
)

MAX_TOTAL_BITS = 64


@dataclass(frozen=True)
class FixedPointFormat:
    total_bits: int
    frac_bits: int

    def __post_init__(self):
        a, b = self.total_bits, self.frac_bits
        if not (isinstance(a, (int, np.integer)) and isinstance(b, (int, np.integer))):
            raise TypeError("format bit counts must be integers")
        if not 2 <= a <= MAX_TOTAL_BITS:
            raise ValueError(f"total bits must lie in [2, {MAX_TOTAL_BITS}], got {a}")
        if not 0 <= b <= a - 1:
            raise ValueError(f"fraction bits must lie in [0, a-1] = [0, {a - 1}], got {b}")
        object.__setattr__(self, "total_bits", int(a))
        object.__setattr__(self, "frac_bits", int(b))

    @property
    def a(self) -> int:
        return self.total_bits

    @property
    def b(self) -> int:
        return self.frac_bits

    @property
    def step(self) -> float:
        return math.ldexp(1.0, -self.frac_bits)

    eps = step

    @property
    def min_value(self) -> float:
        return -math.ldexp(1.0, self.total_bits - 1 - self.frac_bits)

    @property
    def max_value(self) -> float:
        # 2**(a-1-b) - 2**-b; may round in float64 for a > 53, callers compare mantissas
        return math.ldexp(float((1 << (self.total_bits - 1)) - 1), -self.frac_bits)

    @property
    def mantissa_min(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def mantissa_max(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    def to_dict(self) -> dict:
        return {"a": self.total_bits, "b": self.frac_bits}

    @classmethod
    def from_dict(cls, obj) -> "FixedPointFormat":
        try:
            return cls(int(obj["a"]), int(obj["b"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedDocumentError(f"bad format record {obj!r}: {exc}") from None

    def __str__(self):
        return f"fix(a={self.total_bits}, b={self.frac_bits})"


def _out_of_range(z: np.ndarray, fmt: FixedPointFormat) -> np.ndarray:
    """Entries outside the representable range, decided exactly.

    ``z * 2**b`` is exact in binary floating point, so the test runs on the
    scaled value against the integer mantissa limits.  Above 2**53 floats are
    spaced by at least 2, hence ``scaled > 2**(a-1) - 1`` iff ``scaled >= 2**(a-1)``.
    """
    scaled = np.ldexp(z, fmt.frac_bits)
    top = fmt.total_bits - 1
    with np.errstate(invalid="ignore"):
        low = scaled < -math.ldexp(1.0, top)
        if top <= 53:
            high = scaled > float(fmt.mantissa_max)
        else:
            high = scaled >= math.ldexp(1.0, top)
    return low | high | ~np.isfinite(z)


def to_mantissa(z, fmt: FixedPointFormat, *, where: str = "") -> np.ndarray:
    """Integer mantissas of ``round(z * 2**b)`` (ties to even) as int64."""
    z = np.asarray(z, dtype=np.float64)
    bad = _out_of_range(z, fmt)
    if np.any(bad):
        pos = tuple(int(i) for i in np.argwhere(bad)[0]) if z.ndim else ()
        value = float(z[pos]) if z.ndim else float(z)
        loc = f"{where} entry {pos}" if where else (f"entry {pos}" if pos else "value")
        raise QuantizationOverflowError(
            f"{loc} = {value!r} is outside the range of {fmt} "
            f"[{fmt.min_value!r}, {fmt.max_value!r}]; rescale or widen the format",
            value=value,
            fmt=fmt,
            location=(where, pos),
        )
    return np.rint(np.ldexp(z, fmt.frac_bits)).astype(np.int64)


def from_mantissa(mant, fmt: FixedPointFormat) -> np.ndarray:
    """Grid values ``mant * 2**-b``; exact for mantissas produced by ``to_mantissa``."""
    return np.ldexp(np.asarray(mant, dtype=np.float64), -fmt.frac_bits)


def quantize_scalar(z: float, fmt: FixedPointFormat) -> float:
    return float(from_mantissa(to_mantissa(float(z), fmt), fmt))


def quantize_vector(v, fmt: FixedPointFormat) -> np.ndarray:
    return from_mantissa(to_mantissa(np.asarray(v, dtype=np.float64).reshape(-1), fmt), fmt)


def quantize_matrix(M, fmt: FixedPointFormat) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise DimensionMismatchError(f"expected a matrix, got shape {M.shape}")
    return from_mantissa(to_mantissa(M, fmt), fmt)


def quantize_array(z, fmt: FixedPointFormat) -> np.ndarray:
    return from_mantissa(to_mantissa(z, fmt), fmt)


# ---------------------------------------------------------------------------
# partitions


def _bits_needed(n: int) -> int:
    return max(1, math.ceil(math.log2(n + 1)))


@dataclass(frozen=True, eq=False)
class QuantizedPartition:
    """Grid-snapped copy of a partition plus the formats used.

    ``base`` holds the quantized values (exact floats); the stacked integer
    mantissas mirror ``base.H_all``/``K_all``/``F_all``/``G_all``.  When the
    source partition is known (``original``), the quantization deltas are
    available as ``dH``/``dK``/``dF``/``dG`` (quantized minus original).
    """

    base: PwaPartition
    fmt_regions: FixedPointFormat
    fmt_laws: FixedPointFormat
    fmt_state: FixedPointFormat
    original: PwaPartition | None = None

    @cached_property
    def H_mant(self) -> np.ndarray:
        return to_mantissa(self.base.H_all, self.fmt_regions)

    @cached_property
    def K_mant(self) -> np.ndarray:
        return to_mantissa(self.base.K_all, self.fmt_regions)

    @cached_property
    def F_mant(self) -> np.ndarray:
        return to_mantissa(self.base.F_all, self.fmt_laws)

    @cached_property
    def G_mant(self) -> np.ndarray:
        return to_mantissa(self.base.G_all, self.fmt_laws)

    def _require_original(self):
        if self.original is None:
            raise ValueError("quantization deltas need the original partition")
        return self.original

    @cached_property
    def dH(self) -> np.ndarray:
        return self.base.H_all - self._require_original().H_all

    @cached_property
    def dK(self) -> np.ndarray:
        return self.base.K_all - self._require_original().K_all

    @cached_property
    def dF(self) -> np.ndarray:
        return self.base.F_all - self._require_original().F_all

    @cached_property
    def dG(self) -> np.ndarray:
        return self.base.G_all - self._require_original().G_all

    @property
    def exact_int64(self) -> bool:
        """Whether int64 mantissa arithmetic cannot overflow for these formats."""
        n = self.base.n
        fs = self.fmt_state
        need_loc = self.fmt_regions.a + fs.a - 1 + _bits_needed(n)
        need_law = self.fmt_laws.a + fs.a - 1 + _bits_needed(n)
        return max(need_loc, need_law) <= 63

    @cached_property
    def _location_data(self):
        shift = self.fmt_state.frac_bits
        if self.exact_int64:
            return self.H_mant, self.K_mant << np.int64(shift)
        Hm = self.H_mant.astype(object)
        Ks = np.array([int(k) << shift for k in self.K_mant], dtype=object)
        return Hm, Ks

    def state_mantissas(self, X) -> np.ndarray:
        return to_mantissa(X, self.fmt_state, where="state")

    def locate_mantissas(self, Xm: np.ndarray) -> np.ndarray:
        Hm, Ks = self._location_data
        if Hm.dtype == object:
            Xm = Xm.astype(object)
        return _kernels.locate_int(Xm, Hm, Ks, self.base.row_start)

    def evaluate_mantissas(self, regions: np.ndarray, Xm: np.ndarray) -> np.ndarray:
        """``F^_r x^ + G^_r`` as floats; exact up to the final conversion."""
        shift = self.fmt_state.frac_bits
        scale = self.fmt_laws.frac_bits + shift
        Fm = self.F_mant[regions]
        Gm = self.G_mant[regions]
        if self.exact_int64:
            num = np.einsum("smn,sn->sm", Fm, Xm) + (Gm << np.int64(shift))
            return np.ldexp(num.astype(np.float64), -scale)
        out = np.empty(Gm.shape, dtype=np.float64)
        for s in range(Gm.shape[0]):
            for c in range(Gm.shape[1]):
                num = sum(int(f) * int(x) for f, x in zip(Fm[s, c], Xm[s])) + (int(Gm[s, c]) << shift)
                out[s, c] = math.ldexp(num, -scale)
        return out

    def to_document(self) -> dict:
        doc = {
            "n": self.base.n,
            "m": self.base.m,
            "state_box": {"lo": self.base.lo.tolist(), "hi": self.base.hi.tolist()},
            "formats": {
                "regions": self.fmt_regions.to_dict(),
                "laws": self.fmt_laws.to_dict(),
                "state": self.fmt_state.to_dict(),
            },
            "encoding": "mantissa",
        }
        regions = []
        rs = self.base.row_start
        for r in range(self.base.n_regions):
            rows = slice(rs[r], rs[r + 1])
            regions.append(
                {
                    "H": self.H_mant[rows].tolist(),
                    "K": self.K_mant[rows].tolist(),
                    "F": self.F_mant[r].tolist(),
                    "G": self.G_mant[r].tolist(),
                }
            )
        doc["regions"] = regions
        if self.base.scaling is not None:
            doc["scaling"] = {"d": self.base.scaling.tolist()}
        if self.original is not None:
            doc["original"] = self.original.to_document()
        return doc


def quantize_partition(
    p: PwaPartition,
    fmt_regions: FixedPointFormat,
    fmt_laws: FixedPointFormat,
    fmt_state: FixedPointFormat | None = None,
) -> QuantizedPartition:
    """Snap ``H, K`` with ``fmt_regions`` and ``F, G`` with ``fmt_laws``.

    ``fmt_state`` (used on-line for ``x``) defaults to ``fmt_regions``.
    """
    fmt_state = fmt_regions if fmt_state is None else fmt_state
    regions, laws = [], []
    for r, (reg, law) in enumerate(zip(p.regions, p.laws)):
        H = from_mantissa(to_mantissa(reg.H, fmt_regions, where=f"region {r} H"), fmt_regions)
        K = from_mantissa(to_mantissa(reg.K, fmt_regions, where=f"region {r} K"), fmt_regions)
        F = from_mantissa(to_mantissa(law.F, fmt_laws, where=f"region {r} F"), fmt_laws)
        G = from_mantissa(to_mantissa(law.G, fmt_laws, where=f"region {r} G"), fmt_laws)
        regions.append(Region(H, K, reg.witness))
        laws.append(AffineLaw(F, G))
    base = PwaPartition(p.n, p.m, regions, laws, p.lo, p.hi, scaling=p.scaling, name=p.name)
    return QuantizedPartition(base, fmt_regions, fmt_laws, fmt_state, original=p)


def quantized_evaluate_many(qp: QuantizedPartition, X):
    """Vectorized on-line evaluation.

    Returns ``(X_hat, regions, U_hat)``; ``regions`` is -1 and the matching
    ``U_hat`` row NaN where no quantized region contains ``X_hat``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != qp.base.n:
        raise DimensionMismatchError(f"states have length {X.shape[1]}, partition n={qp.base.n}")
    Xm = qp.state_mantissas(X)
    regions = qp.locate_mantissas(Xm)
    U = np.full((X.shape[0], qp.base.m), np.nan)
    ok = regions >= 0
    if ok.any():
        U[ok] = qp.evaluate_mantissas(regions[ok], Xm[ok])
    return from_mantissa(Xm, qp.fmt_state), regions, U


def quantized_evaluate(qp: QuantizedPartition, x):
    """``(x_hat, region or None, u_hat or None)`` for a single state."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    Xh, regions, U = quantized_evaluate_many(qp, x)
    r = int(regions[0])
    if r < 0:
        return Xh[0], None, None
    return Xh[0], r, U[0]


# ---------------------------------------------------------------------------
# documents


def dump_quantized(qp: QuantizedPartition) -> str:
    return json.dumps(qp.to_document(), indent=1)


def load_quantized(source: Source) -> QuantizedPartition:
    """Rebuild a quantized partition from its mantissa document."""
    doc = _read_json(source)
    try:
        formats = doc["formats"]
        fr = FixedPointFormat.from_dict(formats["regions"])
        fl = FixedPointFormat.from_dict(formats["laws"])
        fs = FixedPointFormat.from_dict(formats["state"])
        raw_regions = doc["regions"]
    except (KeyError, TypeError) as exc:
        raise MalformedDocumentError(f"quantized document lacks {exc}") from None
    decoded = dict(doc)
    decoded_regions = []
    for r, obj in enumerate(raw_regions):
        out = {}
        for key, fmt in (("H", fr), ("K", fr), ("F", fl), ("G", fl)):
            try:
                mant = np.array(obj[key], dtype=object)
                if any(not isinstance(v, int) or isinstance(v, bool) for v in mant.ravel()):
                    raise ValueError("mantissas must be integers")
                mant = mant.astype(np.int64)
            except (KeyError, TypeError, ValueError, OverflowError) as exc:
                raise MalformedDocumentError(f"region {r}.{key}: {exc}") from None
            if np.any(mant < fmt.mantissa_min) or np.any(mant > fmt.mantissa_max):
                raise QuantizationOverflowError(f"region {r}.{key}: mantissa outside {fmt}", fmt=fmt)
            out[key] = from_mantissa(mant, fmt).tolist()
        decoded_regions.append(out)
    decoded["regions"] = decoded_regions
    base = partition_from_document(decoded)
    original = None
    if doc.get("original") is not None:
        original = partition_from_document(doc["original"])
        witnesses = [reg.witness for reg in original.regions]
        base = PwaPartition(
            base.n,
            base.m,
            [Region(reg.H, reg.K, w) for reg, w in zip(base.regions, witnesses)],
            base.laws,
            base.lo,
            base.hi,
            scaling=base.scaling,
            name=original.name,
        )
    return QuantizedPartition(base, fr, fl, fs, original=original)


__all__ = [
    "FixedPointFormat",
    "QuantizedPartition",
    "dump_quantized",
    "from_mantissa",
    "load_quantized",
    "quantize_array",
    "quantize_matrix",
    "quantize_partition",
    "quantize_scalar",
    "quantize_vector",
    "quantized_evaluate",
    "quantized_evaluate_many",
    "to_mantissa",
]
