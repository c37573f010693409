"""Current-mirror test structure generator.

Builds the guard-ring / dummy-fill mirror fixtures as flat layouts:
an interdigitated two-device mirror in fine common-centroid finger
order, one or two uniform guard rings, first-level dummy replicas of
the mirror diffusion, and a second-level tile array solved to hit a
target OD density in the analysis window.  Generation is fully
deterministic, so fixtures serve as ground truth for the extractor.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

from .extraction import window_rect
from .geometry import (
    Cell,
    DeviceInstance,
    DeviceKind,
    LayerKind,
    LayoutDb,
    Rect,
    bounding_box,
)
from .measurements import DummyKind, MeasurementRow, RingSpec, paper_measurements

# Derived layout constants (nm).
_PO_PITCH_PER_L = 5  # gate pitch as a multiple of gate length
_PO_ENDCAP = 50
_TILE_SIZE = 2000
_TILE_MIN_SPACE = 200
_PITCH_STEP = 10
_REPLICA_GAP = 1000  # ring envelope to first-level dummy
_REPLICA_STACK_GAP = 1000
_KEEPOUT_MARGIN = 1000
_DENSITY_TOLERANCE = 0.01


class InfeasibleFill(ValueError):
    """Requested fill density cannot be met with the tile grid."""


@dataclass(frozen=True)
class TestStructureConfig:
    __test__ = False  # not a pytest collectible despite the name

    kind: DeviceKind
    ring: RingSpec
    dummy: DummyKind
    finger_w: int = 1000  # device width per finger, nm
    finger_l: int = 30  # gate length, nm
    fingers: int = 8  # total fingers, even, split between the two devices
    ring_gap: int = 1000  # active edge to ring opening, nm
    ring_odw_1x: int = 140
    ring_odw_2x: int = 280
    double_ring_gap: int = 400  # spacing between the two ring frames
    fill_target_density: float = 0.55  # total OD density in the window
    window: int = 100_000

    def __post_init__(self) -> None:
        if self.fingers < 2 or self.fingers % 2:
            raise ValueError(f"fingers must be even and >= 2, got {self.fingers}")
        for name in ("finger_w", "finger_l", "ring_gap", "ring_odw_1x",
                     "ring_odw_2x", "double_ring_gap", "window"):
            v = getattr(self, name)
            if v <= 0:
                raise ValueError(f"{name} must be > 0, got {v}")
        if not 0.5 < self.fill_target_density < 1.0:
            raise ValueError(
                "fill_target_density must exceed 0.50 (and stay below 1.0), "
                f"got {self.fill_target_density}"
            )


_RING_TOKEN = {
    RingSpec.DOUBLE: "double",
    RingSpec.SINGLE_1X: "single1x",
    RingSpec.SINGLE_2X: "single2x",
}
_DUMMY_TOKEN = {
    DummyKind.NPLUS_OD: "npod",
    DummyKind.PPLUS_OD: "ppod",
    DummyKind.MIXED: "mixed",
}


def fixture_name(kind: DeviceKind, ring: RingSpec, dummy: DummyKind) -> str:
    """Canonical fixture name, e.g. ``nmos_single2x_npod``."""
    return f"{kind.value.lower()}_{_RING_TOKEN[ring]}_{_DUMMY_TOKEN[dummy]}"


def _device_implant(kind: DeviceKind) -> LayerKind:
    """Implant covering the device's own source/drain diffusion."""
    return LayerKind.NP if kind is DeviceKind.NMOS else LayerKind.PP


def _protective_implant(kind: DeviceKind) -> LayerKind:
    """A P+ ring guards NMOS (tied to VSS); an N+ ring guards PMOS."""
    return LayerKind.PP if kind is DeviceKind.NMOS else LayerKind.NP


def _opposite(implant: LayerKind) -> LayerKind:
    return LayerKind.NP if implant is LayerKind.PP else LayerKind.PP


def _frame_rects(inner: Rect, outer: Rect) -> list[Rect]:
    """Split the annulus between inner and outer into 4 abutting rects."""
    return [
        Rect(outer.x0, outer.y0, outer.x1, inner.y0),  # bottom
        Rect(outer.x0, inner.y1, outer.x1, outer.y1),  # top
        Rect(outer.x0, inner.y0, inner.x0, inner.y1),  # left
        Rect(inner.x1, inner.y0, outer.x1, inner.y1),  # right
    ]


def _finger_pattern(total: int) -> list[str]:
    """Fine common-centroid interdigitation: A B B A A B B A ..."""
    return ["A" if i % 4 in (0, 3) else "B" for i in range(total)]


def _clip_len(a0: int, a1: int, w0: int, w1: int) -> int:
    return max(0, min(a1, w1) - max(a0, w0))


def _solve_tile_pitch(
    cfg: TestStructureConfig,
    window: Rect,
    keepout: Rect,
    existing_od_in_window: int,
    fill_region: Rect,
) -> tuple[int, float]:
    """Pick the 10 nm grid pitch whose achievable window density is
    closest to the target; exact integer area accounting throughout."""
    target = cfg.fill_target_density
    window_area = window.area
    best: tuple[float, int, float] | None = None  # (abs err, pitch, achieved)
    max_achieved = -1.0
    pitch_lo = _TILE_SIZE + _TILE_MIN_SPACE
    pitch_hi = 4 * _TILE_SIZE
    for pitch in range(pitch_lo, pitch_hi + 1, _PITCH_STEP):
        xs = _tile_starts(fill_region.x0, fill_region.x1, pitch)
        ys = _tile_starts(fill_region.y0, fill_region.y1, pitch)
        if not xs or not ys:
            continue
        cw = [_clip_len(x, x + _TILE_SIZE, window.x0, window.x1) for x in xs]
        ch = [_clip_len(y, y + _TILE_SIZE, window.y0, window.y1) for y in ys]
        skip_w = [
            w for x, w in zip(xs, cw)
            if x < keepout.x1 and keepout.x0 < x + _TILE_SIZE
        ]
        skip_h = [
            h for y, h in zip(ys, ch)
            if y < keepout.y1 and keepout.y0 < y + _TILE_SIZE
        ]
        tile_area = sum(cw) * sum(ch) - sum(skip_w) * sum(skip_h)
        achieved = (existing_od_in_window + tile_area) / window_area
        max_achieved = max(max_achieved, achieved)
        err = abs(achieved - target)
        if best is None or err < best[0]:
            best = (err, pitch, achieved)
    if best is None or best[0] > _DENSITY_TOLERANCE:
        closest = 0.0 if best is None else best[2]
        raise InfeasibleFill(
            f"target OD density {target:.3f} unreachable: closest achievable "
            f"{closest:.4f}, maximum achievable {max_achieved:.4f}"
        )
    return best[1], best[2]


def _tile_starts(r0: int, r1: int, pitch: int) -> list[int]:
    """Tile start coordinates of a grid centered in [r0, r1]."""
    span = r1 - r0
    if span < _TILE_SIZE:
        return []
    count = (span - _TILE_SIZE) // pitch + 1
    first = r0 + (span - ((count - 1) * pitch + _TILE_SIZE)) // 2
    return [first + i * pitch for i in range(count)]


def generate_test_structure(cfg: TestStructureConfig) -> LayoutDb:
    """Build one mirror fixture as a flat, annotated layout."""
    shapes: list[tuple[LayerKind, Rect]] = []

    # Interdigitated mirror: gates on a regular pitch over one OD strip.
    pitch = _PO_PITCH_PER_L * cfg.finger_l
    sd_ext = pitch
    width = (cfg.fingers - 1) * pitch + cfg.finger_l + 2 * sd_ext
    x_off = -(width // 2)
    y_off = -(cfg.finger_w // 2)
    active = Rect(x_off, y_off, x_off + width, y_off + cfg.finger_w)
    shapes.append((LayerKind.OD, active))
    dev_implant = _device_implant(cfg.kind)
    shapes.append((dev_implant, active))

    gates: dict[str, list[Rect]] = {"A": [], "B": []}
    for i, label in enumerate(_finger_pattern(cfg.fingers)):
        gx0 = x_off + sd_ext + i * pitch
        gate = Rect(gx0, active.y0 - _PO_ENDCAP, gx0 + cfg.finger_l,
                    active.y1 + _PO_ENDCAP)
        shapes.append((LayerKind.PO, gate))
        gates[label].append(gate)

    # Guard ring(s): inner ring protects the device kind; a double ring
    # adds the opposite implant outside it.
    prot = _protective_implant(cfg.kind)
    if cfg.ring is RingSpec.SINGLE_1X:
        ring_plan = [(cfg.ring_odw_1x, prot)]
    elif cfg.ring is RingSpec.SINGLE_2X:
        ring_plan = [(cfg.ring_odw_2x, prot)]
    else:
        ring_plan = [(cfg.ring_odw_2x, prot), (cfg.ring_odw_2x, _opposite(prot))]

    opening = active.expanded(cfg.ring_gap)
    envelope = active
    ring_rects = []
    for level, (odw, implant) in enumerate(ring_plan):
        if level > 0:
            opening = envelope.expanded(cfg.double_ring_gap)
        outer = opening.expanded(odw)
        for r in _frame_rects(opening, outer):
            ring_rects.append(r)
            shapes.append((LayerKind.OD, r))
            shapes.append((implant, r))
        envelope = outer

    # Ring moat sized for the widest ring plan the parameters allow, so
    # everything outside it (replicas, fill) is identical across ring
    # styles and only the frames themselves vary.
    max_odw = max(cfg.ring_odw_1x, cfg.ring_odw_2x)
    moat = active.expanded(cfg.ring_gap + 2 * max_odw + cfg.double_ring_gap)

    # First-level dummy: replicas of the mirror diffusion, two stacked
    # per side, flanking the ring moat.
    half_gap = _REPLICA_STACK_GAP // 2
    cy = (active.y0 + active.y1) // 2
    replicas = []
    for side in (-1, +1):
        if side < 0:
            rx1 = moat.x0 - _REPLICA_GAP
            rx0 = rx1 - active.width
        else:
            rx0 = moat.x1 + _REPLICA_GAP
            rx1 = rx0 + active.width
        for vert in (-1, +1):
            if vert < 0:
                ry1 = cy - half_gap
                ry0 = ry1 - active.height
            else:
                ry0 = cy + half_gap
                ry1 = ry0 + active.height
            replica = Rect(rx0, ry0, rx1, ry1)
            replicas.append(replica)
            shapes.append((LayerKind.OD, replica))
            shapes.append((dev_implant, replica))

    # Second-level dummy: tile array solved so the total OD density in
    # the window (device + rings + replicas + tiles) hits the target.
    # Existing shapes are mutually disjoint, so per-rect clipped areas
    # sum exactly.
    center = active.center()
    window = window_rect(center, cfg.window)
    existing_od = [active] + ring_rects + replicas
    existing_in_window = sum(
        c.area for r in existing_od if (c := r.clipped(window))
    )
    keepout = bounding_box([moat] + replicas).expanded(_KEEPOUT_MARGIN)
    fill_region = window_rect(center, cfg.window + 2 * _TILE_SIZE)
    tile_pitch, _ = _solve_tile_pitch(
        cfg, window, keepout, existing_in_window, fill_region
    )
    xs = _tile_starts(fill_region.x0, fill_region.x1, tile_pitch)
    ys = _tile_starts(fill_region.y0, fill_region.y1, tile_pitch)
    for j, ty in enumerate(ys):
        if ty < keepout.y1 and keepout.y0 < ty + _TILE_SIZE:
            y_blocked = True
        else:
            y_blocked = False
        for i, tx in enumerate(xs):
            if y_blocked and tx < keepout.x1 and keepout.x0 < tx + _TILE_SIZE:
                continue
            tile = Rect(tx, ty, tx + _TILE_SIZE, ty + _TILE_SIZE)
            if cfg.dummy is DummyKind.NPLUS_OD:
                implant = LayerKind.NP
            elif cfg.dummy is DummyKind.PPLUS_OD:
                implant = LayerKind.PP
            else:
                implant = LayerKind.NP if (i + j) % 2 == 0 else LayerKind.PP
            shapes.append((LayerKind.OD, tile))
            shapes.append((implant, tile))

    devices = tuple(
        DeviceInstance(
            id=f"M{label}",
            kind=cfg.kind,
            gate_rects=tuple(gates[label]),
            active_rect=active,
            fingers=cfg.fingers // 2,
        )
        for label in ("A", "B")
    )
    name = fixture_name(cfg.kind, cfg.ring, cfg.dummy)
    return LayoutDb(cells=(Cell(name, tuple(shapes)),), device_annotations=devices)


def paper_configs(**overrides) -> list[TestStructureConfig]:
    """The ten measured mirror configurations, in corpus order."""
    return [
        TestStructureConfig(kind=row.device_kind, ring=row.ring, dummy=row.dummy,
                            **overrides)
        for row in paper_measurements()
    ]


def config_for_row(row: MeasurementRow, **overrides) -> TestStructureConfig:
    return TestStructureConfig(kind=row.device_kind, ring=row.ring,
                               dummy=row.dummy, **overrides)


_SWEEP_AXES = ("ring_odw", "ring_gap", "fill_density")


def sweep(
    cfg_base: TestStructureConfig, axis: str, values: Iterable
) -> list[tuple[float, LayoutDb]]:
    """Generate one fixture per value along a parameter axis, all other
    parameters held fixed."""
    if axis not in _SWEEP_AXES:
        raise ValueError(f"axis must be one of {_SWEEP_AXES}, got {axis!r}")
    values = list(values)
    if not values:
        raise ValueError("sweep values must be non-empty")
    out = []
    for v in values:
        if axis == "ring_odw":
            if cfg_base.ring is RingSpec.SINGLE_1X:
                cfg = replace(cfg_base, ring_odw_1x=int(v))
            else:
                cfg = replace(cfg_base, ring_odw_2x=int(v))
        elif axis == "ring_gap":
            cfg = replace(cfg_base, ring_gap=int(v))
        else:
            cfg = replace(cfg_base, fill_target_density=float(v))
        out.append((v, generate_test_structure(cfg)))
    return out
