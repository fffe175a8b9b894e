"""Lattice geometry and spin configurations.

Two storage backends cover the regimes the engines need:

* dense: every site of a finite torus ``Z_L1 x ... x Z_Ld`` carries a bit,
  stored as a flat row-major uint8 array;
* sparse: a finite set of occupied sites of the infinite lattice ``Z^d``,
  stored as a frozenset of coordinate tuples.

Configurations are immutable; engines copy into their own mutable buffers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .rng import INIT_FILL, Stream, derive_seed

Site = tuple[int, ...]


def _as_site(s, d: int) -> Site:
    """Normalize ints (d=1 convenience) and sequences to coordinate tuples."""
    if isinstance(s, (int, np.integer)):
        if d != 1:
            raise ValueError(f"scalar site given for a {d}-dimensional lattice")
        return (int(s),)
    t = tuple(int(c) for c in s)
    if len(t) != d:
        raise ValueError(f"site {t} has {len(t)} coordinates, lattice has {d}")
    return t


@dataclass(frozen=True)
class LatticeShape:
    """Dimension plus either torus extents or the infinite-lattice tag."""

    d: int
    extents: tuple[int, ...] | None  # None means the infinite lattice Z^d

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.extents is not None:
            if len(self.extents) != self.d:
                raise ValueError("extents length must equal the dimension")
            if any(e < 1 for e in self.extents):
                raise ValueError("torus extents must be positive")

    @classmethod
    def torus(cls, *extents: int) -> "LatticeShape":
        return cls(len(extents), tuple(int(e) for e in extents))

    @classmethod
    def infinite(cls, d: int = 1) -> "LatticeShape":
        return cls(d, None)

    @property
    def is_torus(self) -> bool:
        return self.extents is not None

    @property
    def n_sites(self) -> int:
        if self.extents is None:
            raise ValueError("infinite lattice has no site count")
        n = 1
        for e in self.extents:
            n *= e
        return n

    def wrap(self, site: Site) -> Site:
        if self.extents is None:
            return site
        return tuple(c % e for c, e in zip(site, self.extents))

    def flat_index(self, site: Site) -> int:
        """Row-major index of a (wrapped) torus site."""
        if self.extents is None:
            raise ValueError("flat indices are defined for tori only")
        idx = 0
        for c, e in zip(site, self.extents):
            idx = idx * e + (c % e)
        return idx

    def site_of_flat(self, idx: int) -> Site:
        if self.extents is None:
            raise ValueError("flat indices are defined for tori only")
        coords = []
        for e in reversed(self.extents):
            coords.append(idx % e)
            idx //= e
        return tuple(reversed(coords))

    def check_supports_radius(self, radius: int):
        """Tori must not let a rule's read/write window wrap onto itself."""
        if self.extents is not None:
            smallest = min(self.extents)
            if smallest < 2 * radius + 1:
                raise ValueError(
                    f"torus side {smallest} too small for interaction radius "
                    f"{radius}; need at least {2 * radius + 1}"
                )


class SpinConfig:
    """Immutable 0/1 configuration on a :class:`LatticeShape`."""

    __slots__ = ("shape", "bits", "support")

    def __init__(self, shape: LatticeShape, *, bits: np.ndarray | None = None,
                 support: frozenset[Site] | None = None):
        if (bits is None) == (support is None):
            raise ValueError("exactly one of bits/support must be given")
        if bits is not None:
            if not shape.is_torus:
                raise ValueError("dense storage requires a torus shape")
            arr = np.ascontiguousarray(bits, dtype=np.uint8).reshape(-1)
            if arr.size != shape.n_sites:
                raise ValueError("bit array size does not match the torus")
            if arr.max(initial=0) > 1:
                raise ValueError("bits must be 0 or 1")
            arr.setflags(write=False)
            object.__setattr__(self, "bits", arr)
            object.__setattr__(self, "support", None)
        else:
            object.__setattr__(self, "bits", None)
            object.__setattr__(self, "support", frozenset(support))
        object.__setattr__(self, "shape", shape)

    def __setattr__(self, *a):  # pragma: no cover - defensive
        raise AttributeError("SpinConfig is immutable")

    @property
    def is_dense(self) -> bool:
        return self.bits is not None

    def ones_count(self) -> int:
        if self.bits is not None:
            return int(self.bits.sum())
        return len(self.support)

    def value_at(self, site) -> int:
        site = _as_site(site, self.shape.d)
        if self.bits is not None:
            return int(self.bits[self.shape.flat_index(site)])
        return 1 if site in self.support else 0

    def occupied_sites(self) -> list[Site]:
        """Sorted occupied sites (torus sites unwrapped to their coords)."""
        if self.bits is not None:
            return [self.shape.site_of_flat(int(i)) for i in np.flatnonzero(self.bits)]
        return sorted(self.support)

    def toggled(self, sites: Iterable[Site]) -> "SpinConfig":
        """Copy with the given sites flipped (wrapped on a torus)."""
        if self.bits is not None:
            arr = self.bits.copy()
            for s in sites:
                arr[self.shape.flat_index(s)] ^= 1
            return SpinConfig(self.shape, bits=arr)
        supp = set(self.support)
        for s in sites:
            supp.symmetric_difference_update({s})
        return SpinConfig(self.shape, support=frozenset(supp))

    def flipped(self) -> "SpinConfig":
        """Global spin flip 0 <-> 1 (dense only; undefined for sparse)."""
        if self.bits is None:
            raise ValueError("global flip of a sparse configuration is not finite")
        return SpinConfig(self.shape, bits=1 - self.bits)

    def to_pattern(self) -> str:
        """Row-major '0'/'1' string (dense only)."""
        if self.bits is None:
            raise ValueError("pattern strings are for dense configurations")
        return "".join("1" if b else "0" for b in self.bits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpinConfig) or self.shape != other.shape:
            return NotImplemented if not isinstance(other, SpinConfig) else False
        if self.is_dense != other.is_dense:
            return False
        if self.is_dense:
            return bool(np.array_equal(self.bits, other.bits))
        return self.support == other.support

    def __hash__(self) -> int:
        if self.is_dense:
            return hash((self.shape, self.bits.tobytes()))
        return hash((self.shape, self.support))

    def __repr__(self) -> str:
        if self.is_dense:
            body = self.to_pattern() if self.bits.size <= 64 else f"<{self.ones_count()} ones>"
        else:
            body = f"support={sorted(self.support)!r}"
        return f"SpinConfig({self.shape.extents or 'Z^%d' % self.shape.d}, {body})"


# ---------------------------------------------------------------------------
# constructors

def zeros(shape: LatticeShape) -> SpinConfig:
    if shape.is_torus:
        return SpinConfig(shape, bits=np.zeros(shape.n_sites, dtype=np.uint8))
    return SpinConfig(shape, support=frozenset())


def ones(shape: LatticeShape) -> SpinConfig:
    if not shape.is_torus:
        raise ValueError("the all-ones state is not a finite sparse configuration")
    return SpinConfig(shape, bits=np.ones(shape.n_sites, dtype=np.uint8))


def from_pattern(shape: LatticeShape, pattern: str) -> SpinConfig:
    """Dense configuration from a row-major '0'/'1' string."""
    if not shape.is_torus:
        raise ValueError("pattern strings build dense configurations only")
    pattern = pattern.strip()
    if len(pattern) != shape.n_sites or set(pattern) - {"0", "1"}:
        raise ValueError(
            f"pattern must be {shape.n_sites} characters of 0/1, got {pattern!r}"
        )
    return SpinConfig(shape, bits=np.frombuffer(pattern.encode(), dtype=np.uint8) - ord("0"))


def product_random(shape: LatticeShape, p: float, seed: int) -> SpinConfig:
    """Independent Bernoulli(p) spins; reproducible from the seed alone."""
    if not shape.is_torus:
        raise ValueError("product measures need a finite torus")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    st = Stream(derive_seed(seed, INIT_FILL))
    arr = np.empty(shape.n_sites, dtype=np.uint8)
    for i in range(shape.n_sites):
        arr[i] = 1 if st.uniform() < p else 0
    return SpinConfig(shape, bits=arr)


def single_site(shape: LatticeShape, site=None) -> SpinConfig:
    site = (0,) * shape.d if site is None else _as_site(site, shape.d)
    if shape.is_torus:
        return zeros(shape).toggled([site])
    return SpinConfig(shape, support=frozenset({site}))


def sparse_config(shape: LatticeShape, sites: Iterable) -> SpinConfig:
    supp = frozenset(_as_site(s, shape.d) for s in sites)
    if shape.is_torus:
        # occupied-site list on a torus is allowed; wrap and densify
        return zeros(shape).toggled(supp)
    return SpinConfig(shape, support=supp)


def interval(shape: LatticeShape, start: int, stop: int) -> SpinConfig:
    """Ones exactly on {start, ..., stop} (one-dimensional lattices)."""
    if shape.d != 1:
        raise ValueError("interval initial states are one-dimensional")
    if stop < start:
        raise ValueError("empty interval; use zeros() for the empty state")
    sites = [(i,) for i in range(start, stop + 1)]
    if shape.is_torus:
        if stop - start + 1 > shape.extents[0]:
            raise ValueError("interval longer than the ring")
        return zeros(shape).toggled(sites)
    return SpinConfig(shape, support=frozenset(sites))


def make_config(shape: LatticeShape, init, seed: int | None = None) -> SpinConfig:
    """Dispatching constructor used by the CLI layer.

    ``init`` forms: ``"zeros"``, ``"ones"``, ``"single"``, a 0/1 pattern
    string, ``("product", p)``, ``("interval", a, b)``, ``("single", site)``,
    ``("sites", [...])``.
    """
    if isinstance(init, str):
        if init == "zeros":
            return zeros(shape)
        if init == "ones":
            return ones(shape)
        if init == "single":
            return single_site(shape)
        if init and set(init) <= {"0", "1"}:
            return from_pattern(shape, init)
        raise ValueError(f"unrecognized initial-state spec {init!r}")
    tag = init[0]
    if tag == "product":
        if seed is None:
            raise ValueError("product initial states need a seed")
        return product_random(shape, float(init[1]), seed)
    if tag == "interval":
        return interval(shape, int(init[1]), int(init[2]))
    if tag == "single":
        return single_site(shape, init[1])
    if tag == "sites":
        return sparse_config(shape, init[1])
    raise ValueError(f"unrecognized initial-state spec {init!r}")


# ---------------------------------------------------------------------------
# observables

@dataclass(frozen=True)
class ConfigStats:
    """Counts attached to one configuration (and optionally a pairing)."""

    ones: int
    gradient: int          # ordered nearest-neighbor pairs with unequal spins
    parity: int | None     # <x, y> mod 2 when a second configuration was given


def _dense_gradient(x: SpinConfig) -> int:
    arr = x.bits.reshape(x.shape.extents)
    total = 0
    for axis in range(x.shape.d):
        diff = arr != np.roll(arr, -1, axis=axis)
        total += 2 * int(diff.sum())  # both orientations of each unequal edge
    return total


def _sparse_gradient_count(x: SpinConfig) -> int:
    # ordered unequal pairs = 2 * (occupied, empty) adjacencies; each
    # unordered boundary edge is seen exactly once from its occupied end
    supp = x.support
    d = x.shape.d
    boundary = 0
    for s in supp:
        for axis in range(d):
            for step in (-1, 1):
                nb = s[:axis] + (s[axis] + step,) + s[axis + 1:]
                if nb not in supp:
                    boundary += 1
    return 2 * boundary


def overlap_parity(x: SpinConfig, y: SpinConfig) -> int:
    """<x, y> mod 2: the parity of the set of sites where both are 1."""
    if x.is_dense and y.is_dense:
        if x.shape != y.shape:
            raise ValueError("parity needs configurations on the same torus")
        return int(np.bitwise_and(x.bits, y.bits).sum()) & 1
    if not x.is_dense and not y.is_dense:
        if x.shape.d != y.shape.d:
            raise ValueError("parity needs configurations of equal dimension")
        return len(x.support & y.support) & 1
    dense, sparse = (x, y) if x.is_dense else (y, x)
    # sparse support read against torus sites; all support must fit the box
    total = 0
    for s in sparse.support:
        if any(not 0 <= c < e for c, e in zip(s, dense.shape.extents)):
            raise ValueError(
                f"sparse site {s} lies outside the torus box {dense.shape.extents}"
            )
        total += dense.bits[dense.shape.flat_index(s)]
    return int(total) & 1


def config_statistics(x: SpinConfig, y: SpinConfig | None = None) -> ConfigStats:
    grad = _dense_gradient(x) if x.is_dense else _sparse_gradient_count(x)
    par = overlap_parity(x, y) if y is not None else None
    return ConfigStats(ones=x.ones_count(), gradient=grad, parity=par)


def interface_map(x: SpinConfig) -> SpinConfig:
    """Domain-wall configuration y(i) = 1{x(i) != x(i+1)} on a ring.

    Defined for dense one-dimensional configurations; the result lives on
    the same ring and always has an even number of ones.
    """
    if not (x.is_dense and x.shape.d == 1):
        raise ValueError("the interface map is defined for dense rings")
    walls = np.bitwise_xor(x.bits, np.roll(x.bits, -1))
    return SpinConfig(x.shape, bits=walls)
