"""Lattice geometry: boxes, cut regions, sections, and site indexing.

Regions are stored symbolically (outer box plus an optional cut), so that
membership is O(r) arithmetic and large regions stay cheap.  Site
enumeration is only performed on demand.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

IntVec = tuple[int, ...]
Site = tuple[IntVec, IntVec, int]  # (k, n, xi) with xi in {+1, -1}

LESS = "<"
GREATER = ">"


class EmptyRegionError(ValueError):
    pass


class EmptySectionError(ValueError):
    pass


def sup_norm(v: Iterable[int]) -> int:
    vs = [abs(c) for c in v]
    return max(vs) if vs else 0


def sup_dist(x: Iterable[int], y: Iterable[int]) -> int:
    ds = [abs(a - b) for a, b in zip(x, y)]
    return max(ds) if ds else 0


def site_norm(site: Site) -> int:
    k, n, _ = site
    return max(sup_norm(k), sup_norm(n))


def _holds(value: int, rel: str) -> bool:
    if rel == LESS:
        return value < 0
    if rel == GREATER:
        return value > 0
    raise ValueError(f"unknown relation {rel!r}")


@dataclass(frozen=True)
class Region:
    """Box ``[lo, hi]`` in Z^r, optionally minus a translated copy of itself
    (``cut_vector``) or minus an orthant-style corner (``sign_cuts``).

    ``sign_cuts`` is a per-coordinate tuple with entries '<', '>' or None;
    the removed set is the box points satisfying *all* active (strict)
    relations, measured relative to ``cut_origin``.
    """

    lo: IntVec
    hi: IntVec
    cut_vector: Optional[IntVec] = None
    sign_cuts: Optional[tuple[Optional[str], ...]] = None
    cut_origin: Optional[IntVec] = None

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo/hi dimension mismatch")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError("empty box: lo > hi")
        if self.cut_vector is not None and self.sign_cuts is not None:
            raise ValueError("cut_vector and sign_cuts are mutually exclusive")
        if self.sign_cuts is not None:
            if len(self.sign_cuts) != len(self.lo):
                raise ValueError("sign_cuts dimension mismatch")
            if self.cut_origin is None:
                object.__setattr__(self, "cut_origin", tuple(
                    (l + h) // 2 for l, h in zip(self.lo, self.hi)))
        if self.cut_vector is not None and len(self.cut_vector) != len(self.lo):
            raise ValueError("cut_vector dimension mismatch")

    # -- constructors -------------------------------------------------
    @staticmethod
    def cube(r: int, N: int, center: Optional[IntVec] = None) -> "Region":
        if N < 0:
            raise ValueError("cube radius must be >= 0")
        c = center if center is not None else (0,) * r
        return Region(tuple(ci - N for ci in c), tuple(ci + N for ci in c))

    @staticmethod
    def box(lo: Iterable[int], hi: Iterable[int]) -> "Region":
        return Region(tuple(lo), tuple(hi))

    # -- basic geometry ----------------------------------------------
    @property
    def r(self) -> int:
        return len(self.lo)

    @property
    def side_lengths(self) -> IntVec:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    def n_active_cuts(self) -> int:
        if self.sign_cuts is None:
            return 0
        return sum(1 for s in self.sign_cuts if s is not None)

    def _in_box(self, y: IntVec) -> bool:
        return all(l <= c <= h for c, l, h in zip(y, self.lo, self.hi))

    def _removed(self, y: IntVec) -> bool:
        if self.cut_vector is not None:
            return self._in_box(tuple(c - z for c, z in zip(y, self.cut_vector)))
        if self.sign_cuts is not None:
            active = [(c - o, s) for c, o, s in
                      zip(y, self.cut_origin, self.sign_cuts) if s is not None]
            return bool(active) and all(_holds(v, s) for v, s in active)
        return False

    def contains(self, y: IntVec) -> bool:
        return self._in_box(y) and not self._removed(y)

    def sites(self) -> list[IntVec]:
        axes = [np.arange(l, h + 1) for l, h in zip(self.lo, self.hi)]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        keep = ~self._removed_mask(pts)
        return [tuple(row) for row in pts[keep].tolist()]

    def _removed_mask(self, pts: np.ndarray) -> np.ndarray:
        if self.cut_vector is not None:
            shifted = pts - np.asarray(self.cut_vector)
            return np.logical_and.reduce(
                (shifted >= np.asarray(self.lo))
                & (shifted <= np.asarray(self.hi)), axis=1)
        if self.sign_cuts is not None:
            mask = np.ones(pts.shape[0], dtype=bool)
            active = False
            for j, s in enumerate(self.sign_cuts):
                if s is None:
                    continue
                active = True
                rel = pts[:, j] - self.cut_origin[j]
                mask &= (rel < 0) if s == LESS else (rel > 0)
            return mask if active else np.zeros(pts.shape[0], dtype=bool)
        return np.zeros(pts.shape[0], dtype=bool)

    def site_set(self) -> frozenset:
        return frozenset(self.sites())

    def size(self) -> int:
        """Member count, computed symbolically."""
        box = 1
        for l, h in zip(self.lo, self.hi):
            box *= h - l + 1
        if self.cut_vector is not None:
            overlap = 1
            for l, h, z in zip(self.lo, self.hi, self.cut_vector):
                overlap *= max(0, (h - l + 1) - abs(z))
            return box - overlap
        if self.sign_cuts is not None:
            removed = 1
            active = False
            for l, h, o, s in zip(self.lo, self.hi, self.cut_origin,
                                  self.sign_cuts):
                if s is None:
                    removed *= h - l + 1
                    continue
                active = True
                if s == LESS:
                    removed *= max(0, min(h, o - 1) - l + 1)
                else:
                    removed *= max(0, h - max(l, o + 1) + 1)
            return box - removed if active else box
        return box

    def contains_array(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized membership test for an (m, r) integer array."""
        pts = np.asarray(pts)
        in_box = np.logical_and.reduce(
            (pts >= np.asarray(self.lo)) & (pts <= np.asarray(self.hi)),
            axis=1)
        return in_box & ~self._removed_mask(pts)

    def is_empty(self) -> bool:
        return not self.sites()

    def diameter(self) -> int:
        """Sup-norm diameter, computed exactly from the member sites."""
        pts = self.sites()
        if not pts:
            raise EmptyRegionError("diameter of empty region")
        arr = np.asarray(pts)
        return int((arr.max(axis=0) - arr.min(axis=0)).max())

    def translate(self, z: IntVec) -> "Region":
        lo = tuple(l + c for l, c in zip(self.lo, z))
        hi = tuple(h + c for h, c in zip(self.hi, z))
        origin = None
        if self.cut_origin is not None:
            origin = tuple(o + c for o, c in zip(self.cut_origin, z))
        return Region(lo, hi, self.cut_vector, self.sign_cuts, origin)

    # -- serialization -------------------------------------------------
    def to_record(self) -> dict:
        rec = {
            "center": [(l + h) / 2 for l, h in zip(self.lo, self.hi)],
            "widths": [(h - l) / 2 for l, h in zip(self.lo, self.hi)],
        }
        if self.cut_vector is not None:
            rec["cut_vector"] = list(self.cut_vector)
        if self.sign_cuts is not None:
            rec["sign_cuts"] = [s if s is not None else "" for s in self.sign_cuts]
            rec["cut_origin"] = list(self.cut_origin)
        return rec

    @staticmethod
    def from_record(rec: dict) -> "Region":
        lo = tuple(int(round(c - w)) for c, w in zip(rec["center"], rec["widths"]))
        hi = tuple(int(round(c + w)) for c, w in zip(rec["center"], rec["widths"]))
        cut = tuple(rec["cut_vector"]) if "cut_vector" in rec else None
        cuts = None
        origin = None
        if "sign_cuts" in rec:
            cuts = tuple(s if s else None for s in rec["sign_cuts"])
            origin = tuple(rec["cut_origin"])
        return Region(lo, hi, cut, cuts, origin)


def enumerate_elementary_regions(r: int, N: int,
                                 dedup_limit: int = 10_000) -> list[Region]:
    """All elementary regions of size N centered at the origin: the full
    cube plus every corner-cut variant with at least two active relations.

    Regions whose site sets coincide are returned once.  For r < 2 only the
    cube exists (no valid multi-cut).
    """
    if N <= 0:
        raise ValueError("region size must be >= 1")
    if r < 1:
        raise ValueError("dimension must be >= 1")
    cube = Region.cube(r, N)
    out = [cube]
    if r < 2:
        return out
    total_sites = (2 * N + 1) ** r
    seen = {cube.site_set()} if total_sites <= dedup_limit else None
    for pattern in itertools.product((LESS, GREATER, None), repeat=r):
        if sum(1 for s in pattern if s is not None) < 2:
            continue
        reg = Region(cube.lo, cube.hi, sign_cuts=pattern, cut_origin=(0,) * r)
        if seen is not None:
            key = reg.site_set()
            if key in seen:
                continue
            seen.add(key)
        out.append(reg)
    return out


@dataclass(frozen=True)
class SectionShape:
    """Classification of a region's section over the last d coordinates."""

    tag: str  # "elementary" or "wide_rectangle"
    payload: Region

    def __post_init__(self):
        if self.tag not in ("elementary", "wide_rectangle"):
            raise ValueError(f"unknown section tag {self.tag!r}")


def region_section(region: Region, b: int, k: IntVec) -> SectionShape:
    """Section {n : (k, n) in region} of a region over Z^{b+d}, classified
    symbolically as an elementary region or a wide rectangle.
    """
    r = region.r
    d = r - b
    if d < 1 or len(k) != b:
        raise ValueError("bad split: need len(k) == b and d >= 1")
    if region.cut_vector is not None:
        raise ValueError("sections are only defined for elementary regions")
    if not all(l <= c <= h for c, l, h in zip(k, region.lo[:b], region.hi[:b])):
        raise EmptySectionError(f"k={k} outside the projection")
    base = Region(region.lo[b:], region.hi[b:])
    if region.sign_cuts is None:
        return SectionShape("elementary", base)

    origin = region.cut_origin
    # Any violated k-relation empties the removed corner at this k.
    for i in range(b):
        rel = region.sign_cuts[i]
        if rel is not None and not _holds(k[i] - origin[i], rel):
            return SectionShape("elementary", base)

    induced = region.sign_cuts[b:]
    n_active = sum(1 for s in induced if s is not None)
    if n_active == 0:
        # The whole section lies in the removed corner.
        raise EmptySectionError(f"k={k} outside the projection (fully cut)")
    if n_active == 1:
        lo, hi = list(base.lo), list(base.hi)
        j = next(i for i, s in enumerate(induced) if s is not None)
        if induced[j] == GREATER:
            hi[j] = min(hi[j], origin[b + j])
        else:
            lo[j] = max(lo[j], origin[b + j])
        return SectionShape("wide_rectangle", Region(tuple(lo), tuple(hi)))
    return SectionShape(
        "elementary",
        Region(base.lo, base.hi, sign_cuts=induced, cut_origin=origin[b:]))


def section_site_set(region: Region, b: int, k: IntVec) -> frozenset:
    """Brute-force section, for verifying :func:`region_section`."""
    return frozenset(y[b:] for y in region.sites() if y[:b] == tuple(k))


# -- the +/- layered lattice ------------------------------------------


def frozen_mode_sites(anchor_ns: Iterable[IntVec]) -> frozenset:
    """The 2b excluded sites carrying the prescribed amplitudes:
    (e_l, n_l, +) and (-e_l, n_l, -)."""
    anchors = list(anchor_ns)
    b = len(anchors)
    out = set()
    for l, n in enumerate(anchors):
        e = tuple(1 if j == l else 0 for j in range(b))
        out.add((e, tuple(n), +1))
        out.add((tuple(-c for c in e), tuple(n), -1))
    return frozenset(out)


@dataclass(frozen=True)
class Indexing:
    """Deterministic bijection between layered sites and 0..m-1.

    Sites are ordered lexicographically on (k, n, xi) with + before -,
    which fixes the matrix layout globally.
    """

    sites: tuple[Site, ...]
    index: dict

    @property
    def m(self) -> int:
        return len(self.sites)

    def positions(self) -> np.ndarray:
        """(m, b+d) integer array of site coordinates (layer dropped)."""
        return np.asarray([k + n for k, n, _ in self.sites], dtype=np.int64)

    def __getitem__(self, site: Site) -> int:
        return self.index[site]


def index_region(region: Region, b: int,
                 exclude: Iterable[Site] = ()) -> Indexing:
    """Index the +/- layered sites of a region, minus an excluded site set."""
    excl = frozenset(exclude)
    sites = []
    for y in region.sites():
        k, n = y[:b], y[b:]
        for xi in (+1, -1):
            s = (k, n, xi)
            if s not in excl:
                sites.append(s)
    if not sites:
        raise EmptyRegionError("no sites left after exclusion")
    sites.sort(key=lambda s: (s[0], s[1], 0 if s[2] > 0 else 1))
    return Indexing(tuple(sites), {s: i for i, s in enumerate(sites)})


# -- generalized-region width ------------------------------------------


def has_width_at_least(site_set: frozenset, r: int, L: int) -> bool:
    """Check the inner-region width criterion: every member site admits,
    for each 0 < L' < L, an elementary region of size L' containing it,
    contained in the set, and separated from the complement by L'/2.

    Witness search is greedy over translated elementary regions; intended
    for small instances only (cost grows fast with L and r).
    """
    members = list(site_set)
    for x in members:
        for Lp in range(1, L):
            if not _find_width_witness(site_set, r, x, Lp):
                return False
    return True


def _find_width_witness(site_set, r, x, Lp):
    shapes = enumerate_elementary_regions(r, Lp)
    centers = itertools.product(*[range(c - Lp, c + Lp + 1) for c in x])
    for c in centers:
        shift = tuple(ci for ci in c)
        for shape in shapes:
            cand = shape.translate(shift)
            if not cand.contains(x):
                continue
            cand_sites = cand.site_set()
            if not cand_sites <= site_set:
                continue
            rest = site_set - cand_sites
            if not rest:
                return True
            if min(sup_dist(x, y) for y in rest) >= Lp / 2:
                return True
    return False
