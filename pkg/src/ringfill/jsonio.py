"""Lossless JSON layout fixture format.

Unlike the GDSII subset this carries device annotations, so it is the
native interchange format for generated test structures.  All
coordinates are integer nanometers.

Schema::

    {
      "db_unit": 1e-9,                  # optional, defaults to 1e-9
      "cells":  [{"name": str,
                  "shapes": [{"layer": "OD", "x0": int, "y0": int,
                              "x1": int, "y1": int}, ...]}],
      "devices": [{"id": str, "kind": "NMOS"|"PMOS",
                   "active": {rect}, "gates": [{rect}, ...],
                   "fingers": int}]
    }
"""

from __future__ import annotations

import json
from typing import Any

from .geometry import (
    Cell,
    DEFAULT_LAYER_MAP,
    DeviceInstance,
    DeviceKind,
    LayerKind,
    LayoutDb,
    Rect,
)


class SchemaError(ValueError):
    """Fixture JSON violates the schema; message carries the JSON path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise SchemaError(path, message)


def _get(obj: dict, key: str, path: str) -> Any:
    _require(key in obj, path, f"missing required key {key!r}")
    return obj[key]


def _parse_rect(obj: Any, path: str) -> Rect:
    _require(isinstance(obj, dict), path, "expected an object")
    coords = {}
    for key in ("x0", "y0", "x1", "y1"):
        v = _get(obj, key, f"{path}.{key}")
        _require(isinstance(v, int) and not isinstance(v, bool), f"{path}.{key}",
                 f"expected integer nm, got {v!r}")
        coords[key] = v
    try:
        return Rect(**coords)
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from exc


def _parse_enum(enum_cls: type, value: Any, path: str):
    try:
        return enum_cls(value)
    except ValueError:
        allowed = [m.value for m in enum_cls]
        raise SchemaError(path, f"{value!r} is not one of {allowed}") from None


def parse_layout_json(text: str) -> LayoutDb:
    """Parse fixture JSON into a LayoutDb, validating against the schema."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "$", "top level must be an object")

    db_unit = doc.get("db_unit", 1e-9)
    _require(isinstance(db_unit, (int, float)) and db_unit > 0, "$.db_unit",
             f"must be a positive number, got {db_unit!r}")

    cells = []
    raw_cells = doc.get("cells", [])
    _require(isinstance(raw_cells, list), "$.cells", "expected a list")
    for ci, rc in enumerate(raw_cells):
        cpath = f"$.cells[{ci}]"
        _require(isinstance(rc, dict), cpath, "expected an object")
        name = _get(rc, "name", f"{cpath}.name")
        _require(isinstance(name, str) and name != "", f"{cpath}.name",
                 "expected a non-empty string")
        shapes = []
        raw_shapes = rc.get("shapes", [])
        _require(isinstance(raw_shapes, list), f"{cpath}.shapes", "expected a list")
        for si, rs in enumerate(raw_shapes):
            spath = f"{cpath}.shapes[{si}]"
            _require(isinstance(rs, dict), spath, "expected an object")
            kind = _parse_enum(LayerKind, _get(rs, "layer", f"{spath}.layer"),
                               f"{spath}.layer")
            shapes.append((kind, _parse_rect(rs, spath)))
        cells.append(Cell(name, tuple(shapes)))

    devices = []
    raw_devices = doc.get("devices", [])
    _require(isinstance(raw_devices, list), "$.devices", "expected a list")
    for di, rd in enumerate(raw_devices):
        dpath = f"$.devices[{di}]"
        _require(isinstance(rd, dict), dpath, "expected an object")
        dev_id = _get(rd, "id", f"{dpath}.id")
        _require(isinstance(dev_id, str) and dev_id != "", f"{dpath}.id",
                 "expected a non-empty string")
        kind = _parse_enum(DeviceKind, _get(rd, "kind", f"{dpath}.kind"),
                           f"{dpath}.kind")
        active = _parse_rect(_get(rd, "active", f"{dpath}.active"), f"{dpath}.active")
        raw_gates = _get(rd, "gates", f"{dpath}.gates")
        _require(isinstance(raw_gates, list), f"{dpath}.gates", "expected a list")
        gates = tuple(
            _parse_rect(g, f"{dpath}.gates[{gi}]") for gi, g in enumerate(raw_gates)
        )
        fingers = _get(rd, "fingers", f"{dpath}.fingers")
        _require(isinstance(fingers, int) and not isinstance(fingers, bool)
                 and fingers >= 1, f"{dpath}.fingers", "expected an integer >= 1")
        devices.append(DeviceInstance(dev_id, kind, gates, active, fingers))

    try:
        db = LayoutDb(db_unit=float(db_unit), cells=tuple(cells),
                      device_annotations=tuple(devices))
        db.validate_devices()
    except ValueError as exc:
        raise SchemaError("$", str(exc)) from exc
    return db


def _rect_obj(r: Rect) -> dict:
    return {"x0": r.x0, "y0": r.y0, "x1": r.x1, "y1": r.y1}


def write_layout_json(db: LayoutDb) -> str:
    """Serialize a LayoutDb (geometry and device annotations) to JSON."""
    doc = {
        "db_unit": db.db_unit,
        "cells": [
            {
                "name": c.name,
                "shapes": [
                    {"layer": kind.value, **_rect_obj(r)} for kind, r in c.shapes
                ],
            }
            for c in db.cells
        ],
        "devices": [
            {
                "id": d.id,
                "kind": d.kind.value,
                "active": _rect_obj(d.active_rect),
                "gates": [_rect_obj(g) for g in d.gate_rects],
                "fingers": d.fingers,
            }
            for d in db.device_annotations
        ],
    }
    return json.dumps(doc, indent=1)


def devices_sidecar_json(db: LayoutDb) -> str:
    """Device annotations alone, for pairing with a GDSII file."""
    doc = {
        "devices": [
            {
                "id": d.id,
                "kind": d.kind.value,
                "active": _rect_obj(d.active_rect),
                "gates": [_rect_obj(g) for g in d.gate_rects],
                "fingers": d.fingers,
            }
            for d in db.device_annotations
        ]
    }
    return json.dumps(doc, indent=1)


def parse_devices_sidecar(text: str) -> tuple[DeviceInstance, ...]:
    """Parse a device-annotation sidecar (the ``devices`` section only)."""
    stub = parse_layout_json(text)
    return stub.device_annotations


def parse_layer_map_json(text: str) -> dict[LayerKind, tuple[int, int]]:
    """Parse a layer-map file: ``{"OD": [6, 0], "PO": [7, 0], ...}``.

    Unlisted layers keep their defaults.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "$", "top level must be an object")
    lmap = dict(DEFAULT_LAYER_MAP)
    for key, value in doc.items():
        kind = _parse_enum(LayerKind, key, f"$.{key}")
        _require(
            isinstance(value, list) and len(value) == 2
            and all(isinstance(v, int) for v in value),
            f"$.{key}", f"expected [gds_layer, datatype], got {value!r}")
        lmap[kind] = (value[0], value[1])
    if len(set(lmap.values())) != len(lmap):
        raise SchemaError("$", f"layer map not bijective: {lmap}")
    return lmap
