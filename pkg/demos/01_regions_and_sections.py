"""Enumerate elementary regions and slice them into sections.

An elementary region is a cube with an orthant-shaped notch removed.
Sections over a fixed group of leading coordinates stay in a small
catalogue: full cubes, wide rectangles, or smaller cut regions.
"""

from collections import Counter

from qpnls.lattice import (EmptySectionError, Region,
                           enumerate_elementary_regions, region_section)


def main():
    r, N = 3, 4
    regions = enumerate_elementary_regions(r, N)
    print(f"elementary regions of dimension {r}, size {N}: {len(regions)}")

    reg = regions[len(regions) // 2]
    print(f"\nsample region: lo={reg.lo} hi={reg.hi} "
          f"signs={reg.sign_cuts} sites={reg.size()}")

    tags = Counter()
    for k in range(reg.lo[0], reg.hi[0] + 1):
        try:
            sec = region_section(reg, 1, (k,))
        except EmptySectionError:
            tags["empty"] += 1
            continue
        tags[sec.tag] += 1
    print("section shapes over the first coordinate:")
    for tag, count in sorted(tags.items()):
        print(f"  {tag}: {count}")

    cube = Region.cube(2, 3)
    shifted = cube.translate((5, -2))
    print(f"\ntranslated cube keeps its size: "
          f"{cube.size()} -> {shifted.size()}")


if __name__ == "__main__":
    main()
