"""JSON fixture format: round trips, defaults, schema errors with paths."""

from __future__ import annotations

import json

import pytest

from ringfill.geometry import (
    Cell,
    DeviceInstance,
    DeviceKind,
    LayerKind,
    LayoutDb,
    Rect,
)
from ringfill.jsonio import (
    SchemaError,
    devices_sidecar_json,
    parse_devices_sidecar,
    parse_layer_map_json,
    parse_layout_json,
    write_layout_json,
)


def sample_db() -> LayoutDb:
    od = Rect(0, 0, 1000, 500)
    gate = Rect(400, -50, 430, 550)
    return LayoutDb(
        cells=(
            Cell("top", ((LayerKind.OD, od), (LayerKind.PO, gate),
                         (LayerKind.NP, od))),
        ),
        device_annotations=(
            DeviceInstance("MA", DeviceKind.NMOS, (gate,), od, 1),
        ),
    )


class TestRoundTrip:
    def test_lossless_including_devices(self):
        db = sample_db()
        again = parse_layout_json(write_layout_json(db))
        assert again.db_unit == db.db_unit
        assert again.geometry_key() == db.geometry_key()
        assert again.device_annotations == db.device_annotations

    def test_sidecar_round_trip(self):
        db = sample_db()
        devices = parse_devices_sidecar(devices_sidecar_json(db))
        assert devices == db.device_annotations


class TestDefaults:
    def test_missing_db_unit_defaults(self):
        db = parse_layout_json('{"cells": [], "devices": []}')
        assert db.db_unit == 1e-9

    def test_missing_sections_default_empty(self):
        db = parse_layout_json("{}")
        assert db.cells == ()
        assert db.device_annotations == ()


class TestSchemaErrors:
    def test_negative_area_rect_rejected_with_path(self):
        text = json.dumps({
            "cells": [{"name": "t", "shapes": [
                {"layer": "OD", "x0": 10, "y0": 0, "x1": 0, "y1": 5}
            ]}]
        })
        with pytest.raises(SchemaError) as exc:
            parse_layout_json(text)
        assert "$.cells[0].shapes[0]" in str(exc.value)

    def test_bad_layer_enum_path(self):
        text = json.dumps({
            "cells": [{"name": "t", "shapes": [
                {"layer": "METAL9", "x0": 0, "y0": 0, "x1": 1, "y1": 1}
            ]}]
        })
        with pytest.raises(SchemaError) as exc:
            parse_layout_json(text)
        assert "$.cells[0].shapes[0].layer" in str(exc.value)

    def test_missing_coordinate_path(self):
        text = json.dumps({
            "cells": [{"name": "t", "shapes": [
                {"layer": "OD", "x0": 0, "y0": 0, "x1": 1}
            ]}]
        })
        with pytest.raises(SchemaError) as exc:
            parse_layout_json(text)
        assert ".y1" in str(exc.value)

    def test_float_coordinate_rejected(self):
        text = json.dumps({
            "cells": [{"name": "t", "shapes": [
                {"layer": "OD", "x0": 0.5, "y0": 0, "x1": 1, "y1": 1}
            ]}]
        })
        with pytest.raises(SchemaError) as exc:
            parse_layout_json(text)
        assert "x0" in str(exc.value)

    def test_bad_device_kind(self):
        text = json.dumps({
            "devices": [{"id": "M", "kind": "JFET", "active":
                         {"x0": 0, "y0": 0, "x1": 1, "y1": 1},
                         "gates": [], "fingers": 1}]
        })
        with pytest.raises(SchemaError) as exc:
            parse_layout_json(text)
        assert "$.devices[0].kind" in str(exc.value)

    def test_not_json(self):
        with pytest.raises(SchemaError):
            parse_layout_json("not json at all {")


class TestLayerMapFile:
    def test_overrides_merge_with_defaults(self):
        lmap = parse_layer_map_json('{"OD": [61, 5]}')
        assert lmap[LayerKind.OD] == (61, 5)
        assert lmap[LayerKind.PO] == (7, 0)

    def test_bad_pair(self):
        with pytest.raises(SchemaError):
            parse_layer_map_json('{"OD": [61]}')

    def test_unknown_layer_name(self):
        with pytest.raises(SchemaError):
            parse_layer_map_json('{"M1": [30, 0]}')

    def test_collision_rejected(self):
        with pytest.raises(SchemaError):
            parse_layer_map_json('{"OD": [7, 0]}')  # collides with PO default
