"""Fixed-length bit chromosomes and their mapping to parameter vectors.

Bits inside a field are read most-significant-first in plain binary.
A continuous field of width w decodes integer k to
``lower + k * (upper - lower) / (2**w - 1)``; a discrete-multiple field
decodes to ``step * (k + index_offset)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Mapping

import numpy as np

from bioopt.rand_core import RandomSource

Chromosome = np.ndarray  # 1-D uint8 array of 0/1

FieldKind = Literal["continuous", "discrete"]


class LayoutError(ValueError):
    pass


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class FieldSpec:
    kind: FieldKind
    bit_width: int
    lower: float = 0.0
    upper: float = 1.0
    step: float = 0.0
    index_offset: int = 0

    def __post_init__(self):
        if self.bit_width < 1:
            raise LayoutError(f"bit_width must be >= 1, got {self.bit_width}")
        if self.bit_width > 62:
            raise LayoutError(f"bit_width {self.bit_width} does not fit a 64-bit integer")
        if self.kind == "continuous":
            if not self.upper > self.lower:
                raise LayoutError(f"continuous field needs upper > lower, got [{self.lower}, {self.upper}]")
        elif self.kind == "discrete":
            if not self.step > 0:
                raise LayoutError(f"discrete field needs step > 0, got {self.step}")
        else:
            raise LayoutError(f"unknown field kind {self.kind!r}")

    @property
    def levels(self) -> int:
        return 2**self.bit_width

    @property
    def min_value(self) -> float:
        if self.kind == "continuous":
            return self.lower
        return self.step * self.index_offset

    @property
    def max_value(self) -> float:
        if self.kind == "continuous":
            return self.upper
        return self.step * (self.levels - 1 + self.index_offset)

    @property
    def resolution(self) -> float:
        """Distance between adjacent decoded values."""
        if self.kind == "continuous":
            return (self.upper - self.lower) / (self.levels - 1)
        return self.step

    def value_of(self, k):
        if self.kind == "continuous":
            # multiply before dividing so the top level lands exactly on ``upper``
            return self.lower + (self.upper - self.lower) * k / (self.levels - 1)
        return self.step * (k + self.index_offset)

    def level_of(self, value: float) -> int:
        """Nearest integer level for ``value``; raises if not representable."""
        if not np.isfinite(value):
            raise EncodingError(f"cannot encode non-finite value {value}")
        if self.kind == "continuous":
            tol = 1e-12 * (self.upper - self.lower)
            if value < self.lower - tol or value > self.upper + tol:
                raise EncodingError(f"{value} outside [{self.lower}, {self.upper}]")
            k = round((value - self.lower) / self.resolution)
            return min(max(k, 0), self.levels - 1)
        k = round(value / self.step - self.index_offset)
        if not 0 <= k < self.levels:
            raise EncodingError(f"{value} outside representable multiples [{self.min_value}, {self.max_value}]")
        return k


@dataclass(frozen=True)
class GenomeLayout:
    fields: tuple[FieldSpec, ...]

    def __post_init__(self):
        if not self.fields:
            raise LayoutError("layout needs at least one field")
        object.__setattr__(self, "fields", tuple(self.fields))

    def __len__(self) -> int:
        return len(self.fields)

    @property
    def total_bits(self) -> int:
        return sum(f.bit_width for f in self.fields)

    @property
    def offsets(self) -> list[int]:
        return np.cumsum([0] + [f.bit_width for f in self.fields]).tolist()

    @property
    def bounds(self) -> np.ndarray:
        return np.array([[f.min_value, f.max_value] for f in self.fields], dtype=float)

    def to_config(self) -> list[str]:
        """``field.<i>.<key>=<value>`` lines understood by :meth:`from_config`."""
        lines = []
        for i, f in enumerate(self.fields):
            lines.append(f"field.{i}.kind={f.kind}")
            lines.append(f"field.{i}.bits={f.bit_width}")
            if f.kind == "continuous":
                lines.append(f"field.{i}.lower={f.lower!r}")
                lines.append(f"field.{i}.upper={f.upper!r}")
            else:
                lines.append(f"field.{i}.step={f.step!r}")
                lines.append(f"field.{i}.offset={f.index_offset}")
        return lines

    @classmethod
    def from_config(cls, entries: Mapping[int, Mapping[str, str]]) -> GenomeLayout:
        """Build a layout from parsed ``field.<i>.<key>`` entries, indices contiguous from 0."""
        if sorted(entries) != list(range(len(entries))):
            raise LayoutError(f"field indices must run 0..{len(entries) - 1}, got {sorted(entries)}")
        fields = []
        for i in range(len(entries)):
            spec = dict(entries[i])
            unknown = set(spec) - {"kind", "bits", "lower", "upper", "step", "offset"}
            if unknown:
                raise LayoutError(f"field.{i}: unknown keys {sorted(unknown)}")
            try:
                kind = spec.get("kind", "continuous")
                bits = int(spec["bits"])
                if kind == "discrete":
                    fields.append(FieldSpec("discrete", bits, step=float(spec["step"]), index_offset=int(spec.get("offset", 0))))
                else:
                    fields.append(FieldSpec(kind, bits, lower=float(spec["lower"]), upper=float(spec["upper"])))
            except KeyError as e:
                raise LayoutError(f"field.{i}: missing key {e.args[0]!r}") from None
            except ValueError as e:
                if isinstance(e, LayoutError):
                    raise
                raise LayoutError(f"field.{i}: {e}") from None
        return cls(tuple(fields))


def uniform_layout(n: int, bits: int, lower: float, upper: float) -> GenomeLayout:
    return GenomeLayout(tuple(FieldSpec("continuous", bits, lower, upper) for _ in range(n)))


def vessel_layout() -> GenomeLayout:
    """44-bit pressure-vessel genome: two 4-bit 0.0625 multiples, two 18-bit reals on [10, 100]."""
    return GenomeLayout(
        (
            FieldSpec("discrete", 4, step=0.0625, index_offset=16),  # shell 1.0 .. 1.9375
            FieldSpec("discrete", 4, step=0.0625, index_offset=5),  # head 0.3125 .. 1.25
            FieldSpec("continuous", 18, 10.0, 100.0),
            FieldSpec("continuous", 18, 10.0, 100.0),
        )
    )


def _field_integers(bits: np.ndarray, layout: GenomeLayout) -> np.ndarray:
    """Unsigned integer of every field, MSB first. ``bits`` is (..., total_bits)."""
    if bits.shape[-1] != layout.total_bits:
        raise LayoutError(f"chromosome has {bits.shape[-1]} bits, layout expects {layout.total_bits}")
    offsets = layout.offsets
    out = np.empty(bits.shape[:-1] + (len(layout),), dtype=np.int64)
    for i, f in enumerate(layout.fields):
        weights = np.left_shift(np.int64(1), np.arange(f.bit_width - 1, -1, -1, dtype=np.int64))
        out[..., i] = bits[..., offsets[i] : offsets[i + 1]].astype(np.int64) @ weights
    return out


def decode(chrom: Chromosome, layout: GenomeLayout) -> np.ndarray:
    return decode_many(np.asarray(chrom)[None, :], layout)[0]


def decode_many(population: np.ndarray, layout: GenomeLayout) -> np.ndarray:
    """Decode a (members, total_bits) array into (members, fields) values."""
    ints = _field_integers(np.asarray(population), layout)
    values = np.empty(ints.shape, dtype=float)
    for i, f in enumerate(layout.fields):
        values[:, i] = f.value_of(ints[:, i])
    return values


def encode(values: Iterable[float], layout: GenomeLayout) -> Chromosome:
    values = np.asarray(list(values), dtype=float)
    if values.shape != (len(layout),):
        raise LayoutError(f"expected {len(layout)} values, got {values.shape[0] if values.ndim else 'a scalar'}")
    parts = []
    for v, f in zip(values, layout.fields):
        k = f.level_of(float(v))
        parts.append(((k >> np.arange(f.bit_width - 1, -1, -1)) & 1).astype(np.uint8))
    return np.concatenate(parts)


def random_chromosome(length: int, src: RandomSource) -> Chromosome:
    if length < 1:
        raise LayoutError(f"chromosome length must be >= 1, got {length}")
    return src.bits(length)


def to_hex(chrom: Chromosome) -> str:
    """Hex digits of the bit string, MSB first, zero-padded to ceil(len / 4) digits."""
    chrom = np.asarray(chrom, dtype=np.uint8)
    digits = -(-chrom.size // 4)
    return format(int("".join(map(str, chrom.tolist())), 2), f"0{digits}x")
