"""Lattice geometry and percolation configurations on the unit square.

Conventions (fixed; duality and enumeration depend on them):

* The macroscopic region is [0,1]^2 with cell size ``delta = 1/max(cols, rows)``.
  Site (i, j) sits at ((i + 1/2) * delta, (j + 1/2) * delta); j = 0 is the
  bottom row, j = rows - 1 the top.

* Site kind: one element per site, flat index ``j * cols + i``.

* Bond kind: the half-open convention — every site (i, j) owns an east bond
  E(i, j) toward (i+1, j) and a north bond N(i, j) toward (i, j+1).
  E bonds come first in row-major order (index ``j * cols + i``), then the
  N bonds (offset ``cols * rows``).  E(cols-1, j) and N(i, rows-1) dangle at
  the right/top edge; they never join two sites but they carry state so that
  every bond has a well-defined dual partner and ``element_count`` is exactly
  ``2 * cols * rows``.

* The planar dual of a bond configuration lives on the grid of plaquette
  centers (i + 1/2, j + 1/2), same (cols, rows) shape, with
  dE(i, j) = NOT N((i+1) mod cols, j) and dN(i, j) = NOT E(i, (j+1) mod rows);
  each dual bond crosses exactly the primal bond whose state it negates.
  Applying the dual twice translates the configuration by one cell in each
  axis, so duality is an involution up to that canonical re-identification.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

import numpy as np

from .rng import generator

ENUMERATION_LIMIT = 30


class LatticeKind(str, Enum):
    SITE = "site"
    BOND = "bond"


@dataclass(frozen=True)
class LatticeSpec:
    kind: LatticeKind
    cols: int
    rows: int

    def __post_init__(self):
        object.__setattr__(self, "kind", LatticeKind(self.kind))
        if self.cols < 1 or self.rows < 1:
            raise ValueError(
                f"lattice must have positive dimensions, got {self.cols}x{self.rows}"
            )

    @property
    def spacing(self) -> float:
        return 1.0 / max(self.cols, self.rows)

    @property
    def element_count(self) -> int:
        n = self.cols * self.rows
        return n if self.kind is LatticeKind.SITE else 2 * n

    @property
    def site_count(self) -> int:
        return self.cols * self.rows

    def site_index(self, i: int, j: int) -> int:
        if not (0 <= i < self.cols and 0 <= j < self.rows):
            raise ValueError(f"site ({i}, {j}) outside {self.cols}x{self.rows} grid")
        return j * self.cols + i

    def site_position(self, i: int, j: int) -> tuple[float, float]:
        d = self.spacing
        return ((i + 0.5) * d, (j + 0.5) * d)


@dataclass(frozen=True)
class Configuration:
    spec: LatticeSpec
    occupancy: np.ndarray  # bool, length element_count
    seed: int
    density: float

    def __post_init__(self):
        occ = np.asarray(self.occupancy, dtype=bool)
        if occ.shape != (self.spec.element_count,):
            raise ValueError(
                f"occupancy length {occ.shape} != element count "
                f"{self.spec.element_count}"
            )
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)

    # -- views ---------------------------------------------------------

    def site_grid(self) -> np.ndarray:
        """Occupancy as a (rows, cols) array (site kind only)."""
        if self.spec.kind is not LatticeKind.SITE:
            raise ValueError("site_grid is defined for site configurations")
        return self.occupancy.reshape(self.spec.rows, self.spec.cols)

    def east_bonds(self) -> np.ndarray:
        """E(i, j) as a (rows, cols) array; last column dangles."""
        if self.spec.kind is not LatticeKind.BOND:
            raise ValueError("east_bonds is defined for bond configurations")
        n = self.spec.site_count
        return self.occupancy[:n].reshape(self.spec.rows, self.spec.cols)

    def north_bonds(self) -> np.ndarray:
        """N(i, j) (toward row j+1) as a (rows, cols) array; top row dangles."""
        if self.spec.kind is not LatticeKind.BOND:
            raise ValueError("north_bonds is defined for bond configurations")
        n = self.spec.site_count
        return self.occupancy[n:].reshape(self.spec.rows, self.spec.cols)

    # -- serialization ---------------------------------------------------

    MAGIC = b"PLC1"

    def to_bytes(self) -> bytes:
        """Compact binary form: magic, kind, cols, rows, seed, density (all
        little-endian), then the occupancy bits packed MSB-first."""
        kind_byte = 0 if self.spec.kind is LatticeKind.SITE else 1
        header = self.MAGIC + struct.pack(
            "<BIIQd", kind_byte, self.spec.cols, self.spec.rows, self.seed, self.density
        )
        return header + np.packbits(self.occupancy).tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Configuration":
        if blob[:4] != cls.MAGIC:
            raise ValueError("not a percolab configuration blob")
        kind_byte, cols, rows, seed, density = struct.unpack_from("<BIIQd", blob, 4)
        kind = LatticeKind.SITE if kind_byte == 0 else LatticeKind.BOND
        spec = LatticeSpec(kind, cols, rows)
        n = spec.element_count
        bits = np.unpackbits(
            np.frombuffer(blob, dtype=np.uint8, offset=4 + struct.calcsize("<BIIQd"))
        )[:n].astype(bool)
        return cls(spec, bits, seed, density)


def sample_uniforms(spec: LatticeSpec, seed: int) -> np.ndarray:
    """The per-element uniform field behind sample_configuration.

    Exposed so callers can couple configurations at different densities
    (threshold the same field at p1 < p2) for exact monotonicity checks.
    """
    return generator(seed).random(spec.element_count)


def sample_configuration(spec: LatticeSpec, p: float, seed: int) -> Configuration:
    """Independent occupation with probability p, reproducible from the seed."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"density must lie in [0, 1], got {p}")
    occ = sample_uniforms(spec, seed) < p
    return Configuration(spec, occ, seed, p)


def dual_configuration(config: Configuration) -> Configuration:
    """Dual bond configuration on the plaquette-center grid.

    Each dual bond is open iff the primal bond crossing it is closed (see
    the module docstring for the exact index map).
    """
    if config.spec.kind is not LatticeKind.BOND:
        raise ValueError("duality is defined for bond configurations only")
    e = config.east_bonds()
    s = config.north_bonds()
    dual_e = ~np.roll(s, -1, axis=1)  # dE(i,j) crosses N(i+1, j)
    dual_s = ~np.roll(e, -1, axis=0)  # dN(i,j) crosses E(i, j+1)
    occ = np.concatenate([dual_e.ravel(), dual_s.ravel()])
    return Configuration(config.spec, occ, config.seed, 1.0 - config.density)


def enumerate_configurations(spec: LatticeSpec) -> Iterator[Configuration]:
    """All 2^element_count occupancy patterns, lexicographic in bit order.

    The density field is the sentinel 0.5; callers doing exact-weight
    calculations reweight per pattern themselves.  Refused above
    ENUMERATION_LIMIT elements.
    """
    n = spec.element_count
    if n > ENUMERATION_LIMIT:
        raise ValueError(
            f"enumeration of {n} elements exceeds the limit of {ENUMERATION_LIMIT}"
        )
    for code in range(1 << n):
        bits = np.array(
            [(code >> (n - 1 - k)) & 1 for k in range(n)], dtype=bool
        )
        yield Configuration(spec, bits, seed=code, density=0.5)
