"""Exact integer-nanometer rectilinear geometry.

All coordinates are signed integer nanometers within the 4-byte GDSII
coordinate range.  Area arithmetic (union, clip, two-set intersection)
is exact: results are Python ints and repeated calls are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

COORD_LIMIT = 2**31 - 1


class LayerKind(Enum):
    """Mask layers the toolkit understands."""

    OD = "OD"  # active / diffusion
    PO = "PO"  # polysilicon gate
    NP = "NP"  # N+ implant
    PP = "PP"  # P+ implant
    NW = "NW"  # n-well


class DeviceKind(Enum):
    NMOS = "NMOS"
    PMOS = "PMOS"


#: Default GDSII (layer, datatype) assignment per mask layer.
DEFAULT_LAYER_MAP: dict[LayerKind, tuple[int, int]] = {
    LayerKind.OD: (6, 0),
    LayerKind.PO: (7, 0),
    LayerKind.NP: (11, 0),
    LayerKind.PP: (12, 0),
    LayerKind.NW: (3, 0),
}


@dataclass(frozen=True, order=True)
class Rect:
    """Axis-aligned rectangle, strictly non-degenerate (x0 < x1, y0 < y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self) -> None:
        for v in (self.x0, self.y0, self.x1, self.y1):
            if not isinstance(v, int):
                raise TypeError(f"Rect coordinates must be int, got {v!r}")
            if abs(v) > COORD_LIMIT:
                raise ValueError(f"coordinate {v} exceeds |{COORD_LIMIT}| nm")
        if self.x0 >= self.x1 or self.y0 >= self.y1:
            raise ValueError(
                f"degenerate rect ({self.x0},{self.y0},{self.x1},{self.y1}): "
                "requires x0 < x1 and y0 < y1"
            )

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height

    def center(self) -> tuple[int, int]:
        """Center point, rounded down to integer nm."""
        return ((self.x0 + self.x1) // 2, (self.y0 + self.y1) // 2)

    def intersects(self, other: Rect) -> bool:
        """True if the open interiors overlap (shared edges do not count)."""
        return (
            self.x0 < other.x1
            and other.x0 < self.x1
            and self.y0 < other.y1
            and other.y0 < self.y1
        )

    def touches(self, other: Rect) -> bool:
        """True if closed rects share at least a boundary point."""
        return (
            self.x0 <= other.x1
            and other.x0 <= self.x1
            and self.y0 <= other.y1
            and other.y0 <= self.y1
        )

    def contains(self, other: Rect) -> bool:
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )

    def clipped(self, window: Rect) -> Rect | None:
        """Intersection with ``window``, or None if empty."""
        x0 = max(self.x0, window.x0)
        y0 = max(self.y0, window.y0)
        x1 = min(self.x1, window.x1)
        y1 = min(self.y1, window.y1)
        if x0 >= x1 or y0 >= y1:
            return None
        return Rect(x0, y0, x1, y1)

    def expanded(self, d: int) -> Rect:
        return Rect(self.x0 - d, self.y0 - d, self.x1 + d, self.y1 + d)

    def translated(self, dx: int, dy: int) -> Rect:
        return Rect(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)


def rect_area(r: Rect) -> int:
    """Exact area in nm^2."""
    return r.area


def bounding_box(rects: Sequence[Rect]) -> Rect:
    if not rects:
        raise ValueError("bounding_box of empty rect list")
    return Rect(
        min(r.x0 for r in rects),
        min(r.y0 for r in rects),
        max(r.x1 for r in rects),
        max(r.y1 for r in rects),
    )


def _blanket_measure(rect_sets: Sequence[Sequence[Rect]]) -> int:
    """Exact area of the intersection of the unions of each rect set.

    One set -> plain union area.  Two sets -> area covered by both.
    Scanline over x with a coordinate-compressed occupancy counter per
    set along y; integer arithmetic end to end.
    """
    sets = [list(rs) for rs in rect_sets]
    if not sets or any(not rs for rs in sets):
        return 0
    ys = sorted({y for rs in sets for r in rs for y in (r.y0, r.y1)})
    heights = np.diff(np.asarray(ys, dtype=np.int64))
    iy = {y: i for i, y in enumerate(ys)}
    events: list[tuple[int, int, int, int, int]] = []
    for si, rs in enumerate(sets):
        for r in rs:
            events.append((r.x0, si, 1, iy[r.y0], iy[r.y1]))
            events.append((r.x1, si, -1, iy[r.y0], iy[r.y1]))
    events.sort(key=lambda e: e[0])

    counts = [np.zeros(len(heights), dtype=np.int32) for _ in sets]
    area = 0
    prev_x = events[0][0]
    i, n = 0, len(events)
    while i < n:
        x = events[i][0]
        if x > prev_x:
            covered = counts[0] > 0
            for c in counts[1:]:
                covered &= c > 0
            h = int(heights[covered].sum())
            if h:
                area += h * (x - prev_x)
            prev_x = x
        while i < n and events[i][0] == x:
            _, si, delta, i0, i1 = events[i]
            counts[si][i0:i1] += delta
            i += 1
    return area


def union_area(rects: Sequence[Rect]) -> int:
    """Exact area of the union in nm^2 (overlaps counted once)."""
    return _blanket_measure([rects])


def intersection_area(rects_a: Sequence[Rect], rects_b: Sequence[Rect]) -> int:
    """Exact area covered by both the union of ``rects_a`` and of ``rects_b``."""
    return _blanket_measure([rects_a, rects_b])


def clip_area(rects: Sequence[Rect], window: Rect) -> int:
    """Union area of ``rects`` restricted to ``window``, exact in nm^2."""
    clipped = [c for r in rects if (c := r.clipped(window)) is not None]
    return union_area(clipped)


@dataclass(frozen=True)
class DeviceInstance:
    """An annotated MOS device: gate fingers over one active envelope."""

    id: str
    kind: DeviceKind
    gate_rects: tuple[Rect, ...]
    active_rect: Rect
    fingers: int

    def __post_init__(self) -> None:
        if self.fingers < 1:
            raise ValueError(f"device {self.id!r}: fingers must be >= 1")
        object.__setattr__(self, "gate_rects", tuple(self.gate_rects))


@dataclass(frozen=True)
class Cell:
    """Named flat collection of (layer, rect) shapes."""

    name: str
    shapes: tuple[tuple[LayerKind, Rect], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "shapes", tuple(self.shapes))

    def rects_on(self, kind: LayerKind) -> list[Rect]:
        return [r for k, r in self.shapes if k is kind]


@dataclass(frozen=True)
class LayoutDb:
    """Flat rectilinear layout database.

    ``db_unit`` is meters per database unit (1e-9 = integer nanometers).
    The layer map must be bijective: one (gds_layer, datatype) pair per
    layer name.  Immutable once constructed; safe for concurrent reads.
    """

    db_unit: float = 1e-9
    cells: tuple[Cell, ...] = ()
    device_annotations: tuple[DeviceInstance, ...] = ()
    layer_map: dict[LayerKind, tuple[int, int]] = field(
        default_factory=lambda: dict(DEFAULT_LAYER_MAP)
    )

    def __post_init__(self) -> None:
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "device_annotations", tuple(self.device_annotations))
        if self.db_unit <= 0:
            raise ValueError(f"db_unit must be > 0, got {self.db_unit}")
        names = [c.name for c in self.cells]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate cell names in {names}")
        pairs = list(self.layer_map.values())
        if len(set(pairs)) != len(pairs):
            raise ValueError(f"layer map not bijective: {self.layer_map}")

    def rects_on(self, kind: LayerKind) -> list[Rect]:
        """All rects on a layer across every cell (layouts are flat)."""
        out: list[Rect] = []
        for c in self.cells:
            out.extend(c.rects_on(kind))
        return out

    def iter_shapes(self) -> Iterator[tuple[str, LayerKind, Rect]]:
        for c in self.cells:
            for kind, r in c.shapes:
                yield c.name, kind, r

    def device(self, device_id: str) -> DeviceInstance:
        for d in self.device_annotations:
            if d.id == device_id:
                return d
        raise KeyError(f"no device annotation with id {device_id!r}")

    def validate_devices(self) -> None:
        """Check that each gate finger's overlap with OD sits inside the
        device's active envelope."""
        od = self.rects_on(LayerKind.OD)
        for dev in self.device_annotations:
            for g in dev.gate_rects:
                for o in od:
                    c = g.clipped(o)
                    if c is not None and not dev.active_rect.contains(c):
                        raise ValueError(
                            f"device {dev.id!r}: gate {g} overlaps OD outside "
                            f"active envelope {dev.active_rect}"
                        )

    def geometry_key(self) -> tuple:
        """Canonical value for geometry equality: cell names, layers and
        rect coordinate multisets (annotation-independent)."""
        return tuple(
            (c.name, tuple(sorted((k.value, r.x0, r.y0, r.x1, r.y1) for k, r in c.shapes)))
            for c in self.cells
        )


def geometry_equal(a: LayoutDb, b: LayoutDb) -> bool:
    """Cell-by-cell geometric identity, ignoring device annotations."""
    return a.db_unit == b.db_unit and a.geometry_key() == b.geometry_key()
