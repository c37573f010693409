"""Layout context extraction: guard rings, STI spacing, fill densities.

Produces the per-device environment the ratio models consume: which
guard rings enclose the device (implant type, frame width), the
diffusion gap between device and innermost ring, and the N+/P+ OD fill
densities in a square window around the device.

All functions are read-only over the LayoutDb and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .geometry import (
    DeviceInstance,
    DeviceKind,
    LayerKind,
    LayoutDb,
    Rect,
    bounding_box,
    intersection_area,
    union_area,
)

DEFAULT_WINDOW_NM = 100_000  # 100 um square density window
DEFAULT_MAP_STEP_NM = 10_000

# Frame side widths may differ by at most this much and still count as
# one uniform guard ring.
_WIDTH_TOLERANCE_NM = 1
# Fraction of the frame area a single implant must cover to classify it.
_IMPLANT_COVER_NUM = 99
_IMPLANT_COVER_DEN = 100


class ExtractionError(Exception):
    """Layout does not match the structures this extractor understands."""


class AmbiguousImplant(ExtractionError):
    pass


class NonUniformWidth(ExtractionError):
    pass


class RingOverlap(ExtractionError):
    pass


class MoreThanTwoRings(ExtractionError):
    pass


class Implant(Enum):
    NPLUS = "Nplus"
    PPLUS = "Pplus"


class RingClass(Enum):
    NONE = "None"
    SINGLE = "Single"
    DOUBLE = "Double"


@dataclass(frozen=True)
class GuardRingInfo:
    """One rectilinear OD annulus: uniform-width frame around an opening."""

    implant: Implant
    inner: Rect
    outer: Rect
    od_width: int

    def __post_init__(self) -> None:
        if not (
            self.outer.x0 < self.inner.x0
            and self.outer.y0 < self.inner.y0
            and self.inner.x1 < self.outer.x1
            and self.inner.y1 < self.outer.y1
        ):
            raise ValueError(f"ring inner {self.inner} not strictly inside {self.outer}")
        if self.od_width <= 0:
            raise ValueError(f"od_width must be > 0, got {self.od_width}")


@dataclass(frozen=True)
class DeviceContext:
    """Extracted model inputs for one device."""

    device_id: str
    kind: DeviceKind
    rings: tuple[GuardRingInfo, ...]  # innermost first
    ring_class: RingClass
    sti_width: int | None  # nm, device edge to innermost ring opening edge
    d_nod: float
    d_pod: float
    window_nm: int = DEFAULT_WINDOW_NM

    def __post_init__(self) -> None:
        expected = {0: RingClass.NONE, 1: RingClass.SINGLE, 2: RingClass.DOUBLE}
        if expected.get(len(self.rings)) is not self.ring_class:
            raise ValueError(
                f"ring_class {self.ring_class} inconsistent with {len(self.rings)} rings"
            )
        if self.rings and (self.sti_width is None or self.sti_width <= 0):
            raise ValueError(f"sti_width must be > 0 with rings, got {self.sti_width}")
        for name, v in (("d_nod", self.d_nod), ("d_pod", self.d_pod)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {v}")
        if self.d_nod + self.d_pod > 1.0 + 1e-9:
            raise ValueError(f"d_nod + d_pod = {self.d_nod + self.d_pod} exceeds 1")


def _connected_components(rects: list[Rect]) -> list[list[Rect]]:
    """Group rects touching (boundary contact counts) into components."""
    n = len(rects)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if rects[i].touches(rects[j]):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    groups: dict[int, list[Rect]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(rects[i])
    return list(groups.values())


def _opening_span(
    rects: list[Rect], line: float, probe: float, horizontal: bool
) -> tuple[int, int] | None:
    """Extent of the material-free gap containing ``probe`` along one axis.

    With ``horizontal`` the scan is along x at height ``line``; otherwise
    along y at abscissa ``line``.  Returns None if ``probe`` sits inside
    material or the gap is unbounded on either side.
    """
    lo: int | None = None
    hi: int | None = None
    for r in rects:
        if horizontal:
            if not r.y0 < line < r.y1:
                continue
            a0, a1 = r.x0, r.x1
        else:
            if not r.x0 < line < r.x1:
                continue
            a0, a1 = r.y0, r.y1
        if a0 < probe < a1:
            return None
        if a1 <= probe:
            lo = a1 if lo is None else max(lo, a1)
        elif a0 >= probe:
            hi = a0 if hi is None else min(hi, a0)
    if lo is None or hi is None or lo >= hi:
        return None
    return lo, hi


def _try_annulus(component: list[Rect], active: Rect) -> tuple[Rect, Rect, int] | None:
    """Interpret a 4-rect component as a uniform frame enclosing ``active``.

    Returns (inner, outer, od_width) or None if the component is not an
    enclosing annulus.  Raises NonUniformWidth for a genuine annulus
    whose side widths disagree by more than the snap tolerance.
    """
    outer = bounding_box(component)
    if not outer.contains(active):
        return None
    cx = (active.x0 + active.x1) / 2.0
    cy = (active.y0 + active.y1) / 2.0
    xspan = _opening_span(component, cy, cx, horizontal=True)
    yspan = _opening_span(component, cx, cy, horizontal=False)
    if xspan is None or yspan is None:
        return None
    inner = Rect(xspan[0], yspan[0], xspan[1], yspan[1])
    if not (
        outer.x0 < inner.x0
        and outer.y0 < inner.y0
        and inner.x1 < outer.x1
        and inner.y1 < outer.y1
    ):
        return None
    if not inner.contains(active):
        return None
    if any(r.intersects(inner) for r in component):
        return None
    # The four rects must tile the frame exactly: no gaps, no overhang.
    if union_area(component) + inner.area != outer.area:
        return None
    widths = (
        inner.x0 - outer.x0,
        outer.x1 - inner.x1,
        inner.y0 - outer.y0,
        outer.y1 - inner.y1,
    )
    if max(widths) - min(widths) > _WIDTH_TOLERANCE_NM:
        raise NonUniformWidth(
            f"ring around {active} has side widths {widths} (tolerance "
            f"{_WIDTH_TOLERANCE_NM} nm)"
        )
    return inner, outer, min(widths)


def _classify_implant(db: LayoutDb, component: list[Rect]) -> Implant:
    frame_area = union_area(component)
    np_cover = intersection_area(component, db.rects_on(LayerKind.NP))
    pp_cover = intersection_area(component, db.rects_on(LayerKind.PP))
    if np_cover * _IMPLANT_COVER_DEN >= frame_area * _IMPLANT_COVER_NUM:
        return Implant.NPLUS
    if pp_cover * _IMPLANT_COVER_DEN >= frame_area * _IMPLANT_COVER_NUM:
        return Implant.PPLUS
    raise AmbiguousImplant(
        f"ring frame covered {np_cover / frame_area:.3f} by NP and "
        f"{pp_cover / frame_area:.3f} by PP; neither reaches "
        f"{_IMPLANT_COVER_NUM / _IMPLANT_COVER_DEN:.2f}"
    )


def detect_guard_rings(db: LayoutDb, device: DeviceInstance) -> list[GuardRingInfo]:
    """Find every 4-rect uniform-width OD annulus enclosing the device.

    Rings come back ordered innermost first (ascending opening area).
    Isolated fill tiles and the device's own diffusion never qualify.
    """
    active = device.active_rect
    candidates = []
    for r in db.rects_on(LayerKind.OD):
        if r.intersects(active):
            continue
        x_overlap = r.x0 < active.x1 and active.x0 < r.x1
        y_overlap = r.y0 < active.y1 and active.y0 < r.y1
        # Every piece of an enclosing frame faces one side of the device,
        # so it overlaps the device's x-band or y-band.
        if x_overlap or y_overlap:
            candidates.append(r)

    rings: list[GuardRingInfo] = []
    for component in _connected_components(candidates):
        if len(component) != 4:
            continue
        result = _try_annulus(component, active)
        if result is None:
            continue
        inner, outer, od_width = result
        implant = _classify_implant(db, component)
        rings.append(GuardRingInfo(implant, inner, outer, od_width))
    rings.sort(key=lambda g: g.inner.area)
    return rings


def extract_sti_width(device: DeviceInstance, ring: GuardRingInfo) -> int:
    """Minimum diffusion gap between the device edge and the ring opening."""
    active = device.active_rect
    gaps = (
        active.x0 - ring.inner.x0,
        ring.inner.x1 - active.x1,
        active.y0 - ring.inner.y0,
        ring.inner.y1 - active.y1,
    )
    if min(gaps) < 0:
        raise RingOverlap(
            f"device active {active} crosses ring opening {ring.inner}"
        )
    return min(gaps)


_IMPLANT_LAYER = {Implant.NPLUS: LayerKind.NP, Implant.PPLUS: LayerKind.PP}


def window_rect(center: tuple[int, int], window: int) -> Rect:
    """Square window of side ``window`` nm centered at ``center``."""
    if window <= 0:
        raise ValueError(f"window must be > 0, got {window}")
    x0 = center[0] - window // 2
    y0 = center[1] - window // 2
    return Rect(x0, y0, x0 + window, y0 + window)


def window_covered_area(db: LayoutDb, implant: Implant, window: Rect) -> int:
    """Exact nm^2 of OD covered by the given implant inside ``window``."""
    od = [c for r in db.rects_on(LayerKind.OD) if (c := r.clipped(window))]
    imp = [
        c
        for r in db.rects_on(_IMPLANT_LAYER[implant])
        if (c := r.clipped(window))
    ]
    return intersection_area(od, imp)


def window_density(
    db: LayoutDb,
    implant: Implant,
    center: tuple[int, int],
    window: int = DEFAULT_WINDOW_NM,
) -> float:
    """Fill density of implant-covered OD in a square window: area fraction."""
    w = window_rect(center, window)
    return window_covered_area(db, implant, w) / (window * window)


class CoverageGrid:
    """Compressed-coordinate coverage indicator with exact area queries.

    Cells are the cartesian product of the unique x and y coordinates of
    the input rects, so coverage is constant within a cell and the
    covered area of any query window is an exactly weighted sum of
    covered cells.  Build once, then each window query costs one small
    matrix-vector product instead of a full scanline; density_map uses
    this to keep fine-stepped maps cheap.
    """

    # Above this many cells the dense indicator is not worth the memory;
    # queries fall back to the scanline (identical results, just slower).
    MAX_CELLS = 4_000_000

    def __init__(self, rects_a: Sequence[Rect], rects_b: Sequence[Rect]):
        self._rects_a = list(rects_a)
        self._rects_b = list(rects_b)
        rects = self._rects_a + self._rects_b
        if rects:
            self.xs = np.array(
                sorted({x for r in rects for x in (r.x0, r.x1)}), dtype=np.int64
            )
            self.ys = np.array(
                sorted({y for r in rects for y in (r.y0, r.y1)}), dtype=np.int64
            )
        else:
            self.xs = np.zeros(0, dtype=np.int64)
            self.ys = np.zeros(0, dtype=np.int64)
        self.covered: np.ndarray | None
        if len(self.xs) < 2 or len(self.ys) < 2:
            self.covered = np.zeros((0, 0), dtype=np.int64)
        elif len(self.xs) * len(self.ys) > self.MAX_CELLS:
            self.covered = None
        else:
            self.covered = (
                self._indicator(self._rects_a) & self._indicator(self._rects_b)
            ).astype(np.int64)

    def _indicator(self, rects: Sequence[Rect]) -> np.ndarray:
        """Cell-wise union membership via a 2-D difference array."""
        diff = np.zeros((len(self.xs), len(self.ys)), dtype=np.int32)
        for r in rects:
            i0 = int(np.searchsorted(self.xs, r.x0))
            i1 = int(np.searchsorted(self.xs, r.x1))
            j0 = int(np.searchsorted(self.ys, r.y0))
            j1 = int(np.searchsorted(self.ys, r.y1))
            diff[i0, j0] += 1
            diff[i1, j0] -= 1
            diff[i0, j1] -= 1
            diff[i1, j1] += 1
        return diff.cumsum(axis=0).cumsum(axis=1)[:-1, :-1] > 0

    def area_in(self, window: Rect) -> int:
        """Exact covered area inside ``window``, nm^2."""
        if self.covered is None:
            return intersection_area(
                [c for r in self._rects_a if (c := r.clipped(window))],
                [c for r in self._rects_b if (c := r.clipped(window))],
            )
        if self.covered.size == 0:
            return 0
        # Per-cell overlap lengths with the window along each axis.
        cwx = np.minimum(self.xs[1:], window.x1) - np.maximum(self.xs[:-1], window.x0)
        cwy = np.minimum(self.ys[1:], window.y1) - np.maximum(self.ys[:-1], window.y0)
        np.clip(cwx, 0, None, out=cwx)
        np.clip(cwy, 0, None, out=cwy)
        # covered @ cwy stays within int64 (bounded by the window height);
        # the final dot runs in Python ints to rule out overflow entirely.
        col = self.covered @ cwy
        return sum(int(a) * int(b) for a, b in zip(cwx, col) if a and b)


@dataclass(frozen=True)
class DensityMap:
    """Window density sampled on a regular grid of centers.

    ``values[iy, ix]`` is the density at center
    (origin_x + ix*step, origin_y + iy*step); the grid is centered
    inside the requested region, so a 1x1 map samples the region center.
    """

    origin: tuple[int, int]
    step: int
    window: int
    values: np.ndarray  # shape (ny, nx), float64 in [0, 1]

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 2:
            raise ValueError("values must be a 2-D grid")
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise ValueError("density values must lie in [0, 1]")

    def to_csv(self) -> str:
        """One row per y (ascending), 6-decimal fractions."""
        lines = [",".join(f"{v:.6f}" for v in row) for row in self.values]
        return "\n".join(lines) + "\n"

    def to_pgm(self) -> str:
        """Plain PGM (P2), 255 = density 1.0, rows in ascending y."""
        ny, nx = self.values.shape
        rows = [
            " ".join(str(int(round(v * 255))) for v in row) for row in self.values
        ]
        return f"P2\n{nx} {ny}\n255\n" + "\n".join(rows) + "\n"


def coverage_grid(db: LayoutDb, implant: Implant) -> CoverageGrid:
    """Queryable coverage of OD under the given implant for this layout."""
    return CoverageGrid(db.rects_on(LayerKind.OD), db.rects_on(_IMPLANT_LAYER[implant]))


def density_map(
    db: LayoutDb,
    implant: Implant,
    region: Rect,
    step: int = DEFAULT_MAP_STEP_NM,
    window: int = DEFAULT_WINDOW_NM,
) -> DensityMap:
    """Evaluate window_density on a grid of centers spanning ``region``.

    Cells are independent and evaluation order does not affect values;
    one shared CoverageGrid answers every cell exactly.
    """
    if step <= 0:
        raise ValueError(f"step must be > 0, got {step}")
    nx = (region.x1 - region.x0) // step + 1
    ny = (region.y1 - region.y0) // step + 1
    ox = region.x0 + (region.x1 - region.x0 - (nx - 1) * step) // 2
    oy = region.y0 + (region.y1 - region.y0 - (ny - 1) * step) // 2
    grid = coverage_grid(db, implant)
    values = np.empty((ny, nx), dtype=np.float64)
    for iy in range(ny):
        for ix in range(nx):
            w = window_rect((ox + ix * step, oy + iy * step), window)
            values[iy, ix] = grid.area_in(w) / (window * window)
    return DensityMap((ox, oy), step, window, values)


def extract_device_context(
    db: LayoutDb, device: DeviceInstance, window: int = DEFAULT_WINDOW_NM
) -> DeviceContext:
    """Full model-input context for one annotated device.

    The density window is centered on the device's active-area center;
    the device's own diffusion counts toward the densities (negligible
    at the default window scale).
    """
    rings = detect_guard_rings(db, device)
    if len(rings) > 2:
        raise MoreThanTwoRings(
            f"device {device.id!r}: found {len(rings)} nested rings; at most 2 supported"
        )
    ring_class = {0: RingClass.NONE, 1: RingClass.SINGLE, 2: RingClass.DOUBLE}[len(rings)]
    sti = extract_sti_width(device, rings[0]) if rings else None
    center = device.active_rect.center()
    return DeviceContext(
        device_id=device.id,
        kind=device.kind,
        rings=tuple(rings),
        ring_class=ring_class,
        sti_width=sti,
        d_nod=window_density(db, Implant.NPLUS, center, window),
        d_pod=window_density(db, Implant.PPLUS, center, window),
        window_nm=window,
    )
