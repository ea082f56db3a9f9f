"""Binary strings, run-length decomposition and simple bitwise metrics.

A :class:`Bits` value wraps a read-only ``uint8`` numpy array holding one
bit per element.  Everything downstream (channel, reconstructors, the
distance kernels) works on the underlying array, so the wrapper stays thin.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, TextIO

import numpy as np

__all__ = [
    "Bits",
    "RunSeq",
    "Partition",
    "as_array",
    "runs",
    "from_runs",
    "run_table",
    "hamming_distance",
    "density",
    "decode_lines",
    "encode_lines",
    "read_bits",
    "write_bits",
]

_ASCII_ZERO = ord("0")


class Bits:
    """Immutable binary string.

    Accepts a ``str`` of ``0``/``1`` characters, any iterable of 0/1
    integers, or a numpy array.
    """

    __slots__ = ("_a", "_hash")

    def __init__(self, data: "str | Iterable[int] | np.ndarray | Bits" = ()):
        if isinstance(data, Bits):
            arr = data._a
        elif isinstance(data, str):
            raw = np.frombuffer(data.encode("ascii"), dtype=np.uint8)
            arr = raw - _ASCII_ZERO
            if arr.size and arr.max() > 1:
                raise ValueError(f"not a binary string: {data[:40]!r}")
        else:
            arr = np.asarray(data if isinstance(data, np.ndarray) else list(data))
            if arr.size and (arr.min() < 0 or arr.max() > 1):
                raise ValueError("bits must be 0 or 1")
            arr = arr.astype(np.uint8).reshape(-1)
        arr.flags.writeable = False
        self._a = arr
        self._hash = None

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Bits":
        """Wrap a 0/1 array without validation.  The array is frozen in place."""
        obj = cls.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=np.uint8).reshape(-1)
        arr.flags.writeable = False
        obj._a = arr
        obj._hash = None
        return obj

    @classmethod
    def zeros(cls, n: int) -> "Bits":
        return cls.from_array(np.zeros(n, dtype=np.uint8))

    @classmethod
    def ones(cls, n: int) -> "Bits":
        return cls.from_array(np.ones(n, dtype=np.uint8))

    @property
    def array(self) -> np.ndarray:
        return self._a

    def __len__(self) -> int:
        return self._a.shape[0]

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return Bits.from_array(self._a[idx])
        return int(self._a[idx])

    def __iter__(self) -> Iterator[int]:
        return iter(self._a.tolist())

    def __add__(self, other: "Bits") -> "Bits":
        return Bits.from_array(np.concatenate([self._a, as_array(other)]))

    def __eq__(self, other) -> bool:
        if isinstance(other, str):
            other = Bits(other)
        if not isinstance(other, Bits):
            return NotImplemented
        return self._a.shape == other._a.shape and bool(np.array_equal(self._a, other._a))

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((len(self), self._a.tobytes()))
        return self._hash

    def count(self, v: int) -> int:
        ones = int(self._a.sum())
        return ones if v else len(self) - ones

    def to_text(self) -> str:
        return (self._a + _ASCII_ZERO).tobytes().decode("ascii")

    __str__ = to_text

    def __repr__(self) -> str:
        s = self.to_text()
        if len(s) > 48:
            s = s[:24] + "..." + s[-12:]
        return f"Bits({s!r}, n={len(self)})"

    @staticmethod
    def concat(parts: Iterable["Bits | np.ndarray"]) -> "Bits":
        arrays = [as_array(p) for p in parts]
        if not arrays:
            return Bits.from_array(np.zeros(0, dtype=np.uint8))
        return Bits.from_array(np.concatenate(arrays))


def as_array(x) -> np.ndarray:
    """Return the uint8 bit array behind ``x`` (Bits, str, or array-like)."""
    if isinstance(x, Bits):
        return x.array
    if isinstance(x, np.ndarray):
        return x.astype(np.uint8, copy=False)
    return Bits(x).array


@dataclass(frozen=True)
class RunSeq:
    """Run-length decomposition: the value of the first run and all run lengths."""

    first_value: int
    lengths: tuple[int, ...]

    def __post_init__(self):
        if self.first_value not in (0, 1):
            raise ValueError("first_value must be 0 or 1")
        if any(length < 1 for length in self.lengths):
            raise ValueError("run lengths must be positive")

    def __len__(self) -> int:
        return len(self.lengths)

    @property
    def values(self) -> tuple[int, ...]:
        return tuple((self.first_value + i) % 2 for i in range(len(self.lengths)))


def run_table(x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised run extraction: ``(values, starts, lengths)`` as int64 arrays."""
    a = as_array(x)
    if a.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    change = np.flatnonzero(a[1:] != a[:-1]) + 1
    starts = np.concatenate(([0], change)).astype(np.int64)
    lengths = np.diff(np.concatenate((starts, [a.size]))).astype(np.int64)
    return a[starts].astype(np.int64), starts, lengths


def runs(x) -> RunSeq:
    values, _, lengths = run_table(x)
    if values.size == 0:
        return RunSeq(0, ())
    return RunSeq(int(values[0]), tuple(int(v) for v in lengths))


def from_runs(r: RunSeq) -> Bits:
    if not r.lengths:
        return Bits.from_array(np.zeros(0, dtype=np.uint8))
    lengths = np.asarray(r.lengths, dtype=np.int64)
    if (lengths < 1).any():
        raise ValueError("run lengths must be positive")
    values = (np.arange(lengths.size) + r.first_value) % 2
    return Bits.from_array(np.repeat(values.astype(np.uint8), lengths))


@dataclass(frozen=True)
class Partition:
    """Cut points ``0 = c0 <= c1 <= ... <= cb = length`` splitting a string into b parts.

    Parts may be empty.
    """

    boundaries: tuple[int, ...]

    def __post_init__(self):
        c = self.boundaries
        if len(c) < 2 or c[0] != 0:
            raise ValueError("a partition needs at least two boundaries starting at 0")
        if any(b < a for a, b in zip(c, c[1:])):
            raise ValueError("boundaries must be weakly increasing")

    @classmethod
    def from_lengths(cls, lengths: Sequence[int]) -> "Partition":
        return cls(tuple(int(v) for v in np.concatenate(([0], np.cumsum(lengths, dtype=np.int64)))))

    @property
    def size(self) -> int:
        """Number of parts."""
        return len(self.boundaries) - 1

    @property
    def length(self) -> int:
        return self.boundaries[-1]

    def parts(self, x) -> list[Bits]:
        b = x if isinstance(x, Bits) else Bits(x)
        if len(b) != self.length:
            raise ValueError(f"partition covers {self.length} bits, string has {len(b)}")
        c = self.boundaries
        return [b[c[i]:c[i + 1]] for i in range(self.size)]


def hamming_distance(a, b) -> int:
    x, y = as_array(a), as_array(b)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    return int(np.count_nonzero(x != y))


def density(x, v: int) -> float:
    """Fraction of positions of ``x`` equal to ``v``."""
    a = as_array(x)
    if a.size == 0:
        raise ValueError("density of an empty string is undefined")
    ones = int(a.sum())
    return (ones if v else a.size - ones) / a.size


# Text codec: one string per line, ASCII 0/1, newline terminated.

def encode_lines(items: Iterable) -> str:
    return "".join(Bits(x).to_text() + "\n" for x in items)


def decode_lines(text: str) -> list[Bits]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [Bits(line.rstrip("\r")) for line in lines]


def read_bits(stream: TextIO) -> list[Bits]:
    return decode_lines(stream.read())


def write_bits(stream: TextIO, items: Iterable) -> None:
    stream.write(encode_lines(items))
