import itertools
from collections import defaultdict, deque

import numpy as np
import pytest

from qpnls.lattice import (EmptyRegionError, EmptySectionError, Region,
                           enumerate_elementary_regions, frozen_mode_sites,
                           has_width_at_least, index_region, region_section,
                           section_site_set, site_norm, sup_dist, sup_norm)


def brute_force_shape_count(r, N):
    """Distinct site sets from all sign patterns with >= 2 active cuts,
    plus the full cube."""
    cube = Region.cube(r, N)
    seen = {cube.site_set()}
    for pattern in itertools.product(("<", ">", None), repeat=r):
        if sum(1 for s in pattern if s is not None) < 2:
            continue
        reg = Region(cube.lo, cube.hi, sign_cuts=pattern,
                     cut_origin=(0,) * r)
        seen.add(reg.site_set())
    return len(seen)


def is_connected(sites):
    """BFS connectivity under nearest-neighbor (1-norm) adjacency."""
    site_set = set(sites)
    start = next(iter(site_set))
    seen = {start}
    queue = deque([start])
    while queue:
        x = queue.popleft()
        for j in range(len(x)):
            for step in (-1, 1):
                y = list(x)
                y[j] += step
                y = tuple(y)
                if y in site_set and y not in seen:
                    seen.add(y)
                    queue.append(y)
    return len(seen) == len(site_set)


class TestEnumerateElementaryRegions:
    def test_contains_full_cube(self):
        regs = enumerate_elementary_regions(2, 1)
        cube = Region.cube(2, 1)
        assert any(r.site_set() == cube.site_set() for r in regs)

    def test_count_matches_brute_force(self):
        for r, N in [(2, 1), (2, 2), (3, 1)]:
            regs = enumerate_elementary_regions(r, N)
            assert len(regs) == brute_force_shape_count(r, N)
            sets = [reg.site_set() for reg in regs]
            assert len(sets) == len(set(sets))

    def test_r3_n2_diameter_and_connectivity(self):
        for reg in enumerate_elementary_regions(3, 2):
            assert reg.diameter() <= 4
            assert is_connected(reg.sites())

    def test_r1_returns_only_cube(self):
        regs = enumerate_elementary_regions(1, 3)
        assert len(regs) == 1
        assert regs[0].site_set() == Region.cube(1, 3).site_set()

    def test_invalid_size(self):
        with pytest.raises(ValueError):
            enumerate_elementary_regions(2, 0)

    def test_min_two_active_cuts(self):
        for reg in enumerate_elementary_regions(3, 2):
            if reg.sign_cuts is not None:
                assert reg.n_active_cuts() >= 2


class TestRegionBasics:
    def test_size_matches_enumeration(self):
        for r in (2, 3):
            for N in (1, 2, 3):
                for reg in enumerate_elementary_regions(r, N):
                    assert reg.size() == len(reg.sites())

    def test_translated_cut_region(self):
        reg = Region((0, 0), (3, 3), cut_vector=(2, 2))
        assert reg.size() == len(reg.sites())
        assert (3, 3) not in reg.site_set()
        assert (0, 0) in reg.site_set()

    def test_contains_array_agrees_with_contains(self):
        reg = Region.cube(2, 2, center=(1, -1))
        reg = Region(reg.lo, reg.hi, sign_cuts=(">", "<"),
                     cut_origin=(1, -1))
        pts = list(itertools.product(range(-4, 5), repeat=2))
        mask = reg.contains_array(np.asarray(pts))
        for p, m in zip(pts, mask):
            assert reg.contains(p) == bool(m)

    def test_serialization_round_trip(self):
        regs = enumerate_elementary_regions(3, 2)
        regs.append(Region((0, 0), (4, 2), cut_vector=(1, 1)))
        for reg in regs:
            back = Region.from_record(reg.to_record())
            assert back.site_set() == reg.site_set()

    def test_empty_box_rejected(self):
        with pytest.raises(ValueError):
            Region((1,), (0,))


class TestRegionSection:
    def test_full_cube_section(self):
        reg = Region.cube(3, 2)
        sec = region_section(reg, 1, (0,))
        assert sec.tag == "elementary"
        assert sec.payload.site_set() == Region.cube(2, 2).site_set()

    def test_k_cut_kept_side_gives_full_cube(self):
        reg = Region(Region.cube(3, 2).lo, Region.cube(3, 2).hi,
                     sign_cuts=(">", ">", None), cut_origin=(0, 0, 0))
        sec = region_section(reg, 1, (-1,))
        assert sec.tag == "elementary"
        assert sec.payload.site_set() == Region.cube(2, 2).site_set()

    def test_two_n_cuts_give_cut_section(self):
        reg = Region(Region.cube(3, 2).lo, Region.cube(3, 2).hi,
                     sign_cuts=(None, ">", ">"), cut_origin=(0, 0, 0))
        sec = region_section(reg, 1, (0,))
        assert sec.tag == "elementary"
        assert sec.payload.site_set() == section_site_set(reg, 1, (0,))

    def test_outside_projection_raises(self):
        reg = Region.cube(2, 1)
        with pytest.raises(EmptySectionError):
            region_section(reg, 1, (5,))

    def test_exhaustive_small(self):
        for r in (2, 3):
            for N in (1, 2, 3):
                for reg in enumerate_elementary_regions(r, N):
                    groups = defaultdict(set)
                    for y in reg.sites():
                        for b in range(1, r):
                            pass
                    for b in range(1, r):
                        groups = defaultdict(set)
                        for y in reg.sites():
                            groups[y[:b]].add(y[b:])
                        k_range = itertools.product(
                            *[range(l, h + 1)
                              for l, h in zip(reg.lo[:b], reg.hi[:b])])
                        for k in k_range:
                            truth = frozenset(groups.get(k, ()))
                            try:
                                sec = region_section(reg, b, k)
                            except EmptySectionError:
                                assert not truth
                                continue
                            assert sec.payload.site_set() == truth
                            if sec.tag == "wide_rectangle":
                                widths = [h - l for l, h in
                                          zip(sec.payload.lo, sec.payload.hi)]
                                assert min(widths) >= N


class TestIndexing:
    def test_single_site(self):
        idx = index_region(Region.cube(2, 0), 1)
        assert idx.m == 2  # one lattice point, two layers
        assert idx[idx.sites[0]] == 0

    def test_layered_cardinality(self):
        idx = index_region(Region.cube(2, 1), 1)
        assert idx.m == 18

    def test_exclusion_count(self):
        reg = Region.cube(2, 2)
        excl = frozen_mode_sites([(0,)])
        idx = index_region(reg, 1, exclude=excl)
        assert idx.m == reg.size() * 2 - 2

    def test_stable_bijection(self):
        reg = Region.cube(2, 2)
        idx1 = index_region(reg, 1)
        idx2 = index_region(reg, 1)
        assert idx1.sites == idx2.sites
        for i, s in enumerate(idx1.sites):
            assert idx1[s] == i

    def test_empty_after_exclusion(self):
        reg = Region.cube(2, 0)
        all_sites = {(tuple(y[:1]), tuple(y[1:]), xi)
                     for y in reg.sites() for xi in (1, -1)}
        with pytest.raises(EmptyRegionError):
            index_region(reg, 1, exclude=all_sites)


class TestWidth:
    def test_elementary_regions_have_declared_width(self):
        # every elementary region of size N has width N as a generalized
        # region (tested at tiny sizes; the search cost grows quickly)
        for r, N in [(2, 1), (2, 2)]:
            for reg in enumerate_elementary_regions(r, N):
                assert has_width_at_least(reg.site_set(), r, N)

    def test_thin_rectangle_lacks_width(self):
        thin = Region((0, 0), (6, 0))
        assert not has_width_at_least(thin.site_set(), 2, 2)


class TestNorms:
    def test_site_norm(self):
        assert site_norm(((2, -3), (1,), 1)) == 3
        assert sup_norm(()) == 0
        assert sup_dist((1, 5), (4, 3)) == 3
