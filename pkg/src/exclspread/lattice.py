"""Configurations and the elementary moves.

``ExclusionConfig`` holds the right-shift process on a fixed window of Z.
``SpreadConfig`` holds the centered-spread process as an occupancy sequence
plus an anchor measured in half steps: cell ``i`` sits at physical position
``(anchor + 2 i) / 2``.  The active sublattice is Z when the anchor is even
and Z + 1/2 when it is odd, and the mass counter fixes that parity.

The public operations return new configurations.  The ``*_inplace`` kernels
below them are what the simulators call.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._jit import njit

__all__ = [
    "ExclusionConfig",
    "SpreadConfig",
    "exchange",
    "tau_shift",
    "tau_tilde_spread",
    "particle_count",
    "to_text",
    "from_text",
]

CELL_DTYPE = np.uint8


def _as_cells(cells):
    arr = np.ascontiguousarray(np.asarray(cells), dtype=CELL_DTYPE)
    if arr.ndim != 1:
        raise ValueError("cells must be one-dimensional")
    if arr.size and arr.max() > 1:
        raise ValueError("cells must be 0 or 1")
    return arr


@dataclass
class ExclusionConfig:
    """Occupancies of the sites ``window_left, ..., window_left + len - 1``."""

    window_left: int
    cells: np.ndarray
    out_right: int = 0
    out_right_particles: int = 0

    def __post_init__(self):
        self.window_left = int(self.window_left)
        self.cells = _as_cells(self.cells)

    def __len__(self):
        return self.cells.size

    @property
    def window_right(self):
        return self.window_left + self.cells.size - 1

    def sites(self):
        return self.window_left + np.arange(self.cells.size)

    def index_of(self, x):
        i = int(x) - self.window_left
        if int(x) != x or not 0 <= i < self.cells.size:
            raise IndexError(f"site {x} outside window [{self.window_left}, {self.window_right}]")
        return i

    def particle_count(self):
        return int(self.cells.sum(dtype=np.int64))

    def hole_count(self):
        return self.cells.size - self.particle_count()

    def copy(self):
        return ExclusionConfig(self.window_left, self.cells.copy(), self.out_right,
                               self.out_right_particles)

    def to_mapping(self):
        return {int(x): int(c) for x, c in zip(self.sites(), self.cells)}

    def __eq__(self, other):
        return (isinstance(other, ExclusionConfig) and self.window_left == other.window_left
                and np.array_equal(self.cells, other.cells))


@dataclass
class SpreadConfig:
    """Occupancy sequence on the active sublattice with a half-step anchor."""

    cells: np.ndarray
    anchor_pos: int = 0
    mass_n: int = 1
    out_right: int = 0
    lost_particles: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.cells = _as_cells(self.cells)
        self.anchor_pos = int(self.anchor_pos)
        self.mass_n = int(self.mass_n)
        if self.mass_n < 1:
            raise ValueError("mass counter must be positive")
        if (self.anchor_pos % 2 == 0) != (self.mass_n % 2 == 1):
            raise ValueError("anchor parity does not match the mass counter")

    def __len__(self):
        return self.cells.size

    @property
    def parity(self):
        """``"G1"`` (active sublattice Z) or ``"G2"`` (Z + 1/2)."""
        return "G1" if self.mass_n % 2 == 1 else "G2"

    def positions(self):
        """Physical positions of the cells, as floats."""
        return (self.anchor_pos + 2 * np.arange(self.cells.size)) / 2.0

    def index_of(self, x):
        twice = Fraction(x) * 2
        if twice.denominator != 1 or (int(twice) - self.anchor_pos) % 2:
            raise ValueError(f"position {x} is not on the active sublattice")
        i = (int(twice) - self.anchor_pos) // 2
        if not 0 <= i < self.cells.size:
            raise IndexError(f"position {x} outside the window")
        return i

    def particle_count(self):
        return int(self.cells.sum(dtype=np.int64))

    def copy(self):
        return SpreadConfig(self.cells.copy(), self.anchor_pos, self.mass_n,
                            self.out_right, self.lost_particles, dict(self.extra))

    def to_mapping(self):
        """``{position: occupancy}`` with exact half-integer keys."""
        return {Fraction(self.anchor_pos + 2 * i, 2): int(c) for i, c in enumerate(self.cells)}

    @classmethod
    def from_mapping(cls, mapping, mass_n=1):
        keys = sorted(mapping)
        if not keys:
            raise ValueError("empty mapping")
        anchor = int(Fraction(keys[0]) * 2)
        expected = [Fraction(anchor + 2 * i, 2) for i in range(len(keys))]
        if [Fraction(k) for k in keys] != expected:
            raise ValueError("positions must be consecutive on one sublattice")
        return cls(np.array([mapping[k] for k in keys]), anchor, mass_n)

    @classmethod
    def from_exclusion(cls, xi):
        """The centered-spread state ``(1, eta)`` with eta equal to xi on Z."""
        return cls(xi.cells.copy(), 2 * xi.window_left, 1)

    def __eq__(self, other):
        return (isinstance(other, SpreadConfig) and self.anchor_pos == other.anchor_pos
                and self.mass_n == other.mass_n and np.array_equal(self.cells, other.cells))


# --------------------------------------------------------------------------
# in-place kernels


@njit
def exchange_inplace(cells, i, j):
    """Swap two cells; returns True when the configuration changed."""
    a = cells[i]
    b = cells[j]
    if a == b:
        return False
    cells[i] = b
    cells[j] = a
    return True


@njit
def shift_inplace(cells, k):
    """Right shift of everything strictly right of index k; returns the discarded cell."""
    L = cells.shape[0]
    lost = cells[L - 1]
    for i in range(L - 1, k, -1):
        cells[i] = cells[i - 1]
    cells[k] = 0
    return lost


@njit
def window_shift_inplace(cells):
    """Shift of the whole window, refilling cell 0 with its old value."""
    L = cells.shape[0]
    lost = cells[L - 1]
    for i in range(L - 1, 0, -1):
        cells[i] = cells[i - 1]
    return lost


@njit
def spread_inplace(cells, k):
    """Insert an occupied cell before index k; returns the discarded cell."""
    L = cells.shape[0]
    lost = cells[L - 1]
    for i in range(L - 1, k, -1):
        cells[i] = cells[i - 1]
    cells[k] = 1
    return lost


# --------------------------------------------------------------------------
# public operations


def exchange(config, x, y):
    """Swap the occupancies at positions x and y."""
    i, j = config.index_of(x), config.index_of(y)
    out = config.copy()
    exchange_inplace(out.cells, i, j)
    return out


def tau_shift(config, z):
    """Apply the right shift at site z (rightmost cell discarded)."""
    k = config.index_of(z)
    out = config.copy()
    lost = shift_inplace(out.cells, k)
    out.out_right += 1
    out.out_right_particles += int(lost)
    return out


def tau_tilde_spread(config, x):
    """Apply the centered spread at position x of the active sublattice."""
    k = config.index_of(x)
    out = config.copy()
    lost = spread_inplace(out.cells, k)
    out.anchor_pos -= 1
    out.mass_n += 1
    out.out_right += 1
    out.lost_particles += int(lost)
    return out


def particle_count(config):
    return config.particle_count()


# --------------------------------------------------------------------------
# run-length text format
#
#   xi left=<int> out=<int> lost=<int> : <run> <run> ...
#   eta anchor=<half steps> n=<int> out=<int> lost=<int> : <run> ...
#
# with runs written ``<value>x<length>``, e.g. ``0x12 1x3 0x1``.

_HEADER = re.compile(r"^(xi|eta)((?:\s+\w+=-?\d+)*)\s*:\s*(.*)$")


def _runs(cells):
    if cells.size == 0:
        return ""
    edges = np.flatnonzero(np.diff(cells.astype(np.int8))) + 1
    starts = np.concatenate([[0], edges])
    lengths = np.diff(np.concatenate([starts, [cells.size]]))
    return " ".join(f"{int(cells[s])}x{int(n)}" for s, n in zip(starts, lengths))


def to_text(config):
    if isinstance(config, ExclusionConfig):
        head = (f"xi left={config.window_left} out={config.out_right} "
                f"lost={config.out_right_particles}")
    else:
        head = (f"eta anchor={config.anchor_pos} n={config.mass_n} "
                f"out={config.out_right} lost={config.lost_particles}")
    return f"{head} : {_runs(config.cells)}"


def from_text(text):
    m = _HEADER.match(text.strip())
    if not m:
        raise ValueError("not a run-length configuration line")
    kind, fields, body = m.groups()
    kv = {k: int(v) for k, v in re.findall(r"(\w+)=(-?\d+)", fields)}
    parts = []
    for tok in body.split():
        val, _, n = tok.partition("x")
        if val not in ("0", "1") or not n.isdigit():
            raise ValueError(f"bad run {tok!r}")
        parts.append(np.full(int(n), int(val), dtype=CELL_DTYPE))
    cells = np.concatenate(parts) if parts else np.zeros(0, dtype=CELL_DTYPE)
    if kind == "xi":
        return ExclusionConfig(kv["left"], cells, kv.get("out", 0), kv.get("lost", 0))
    return SpreadConfig(cells, kv["anchor"], kv["n"], kv.get("out", 0), kv.get("lost", 0))
