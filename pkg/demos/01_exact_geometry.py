"""Exact integer area arithmetic on rectilinear layout shapes.

Everything in this package rests on nm-integer rectangles whose union,
clip and two-layer intersection areas are computed exactly (no floats,
no epsilons).  This script walks through the primitive operations.
"""

from ringfill import Rect, clip_area, intersection_area, rect_area, union_area

# A rectangle is (x0, y0, x1, y1) in integer nanometers.
a = Rect(0, 0, 10, 10)
b = Rect(5, 5, 15, 15)

print("single rect area:", rect_area(a), "nm^2")

# Overlaps count once: 100 + 100 - 25.
print("union of two overlapping rects:", union_area([a, b]))

# Splitting a shape changes nothing; the union is a set measure.
left = Rect(0, 0, 5, 10)
right = Rect(5, 0, 10, 10)
print("split invariance:", union_area([a]) == union_area([left, right]))

# Clipping restricts the union to a window.
window = Rect(0, 0, 100, 100)
print("half-in rect clipped:", clip_area([Rect(-50, 0, 50, 100)], window))

# Two-layer intersection measures area covered by BOTH rect sets;
# this is how "diffusion covered by an implant" is computed.
od_tiles = [Rect(x, 0, x + 200, 200) for x in range(0, 2000, 400)]
implant = [Rect(0, 0, 1000, 200)]
covered = intersection_area(od_tiles, implant)
print("tiles under the implant sheet:", covered, "of", union_area(od_tiles))

# All results are Python ints, so repeated runs are bit-identical.
assert covered == 3 * 200 * 200
print("ok")
