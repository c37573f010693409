"""Command-line interface: gen / extract / density / calibrate / predict.

Exit codes: 0 ok, 2 configuration error, 3 parse error, 4 extraction
error, 5 calibration error.  Machine-readable output goes to stdout or
the --out file; diagnostics go to stderr.  Reports carry no timestamps,
so identical inputs produce identical outputs.

Lengths on the command line are in micrometers unless the flag name
ends in ``-nm``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .calibration import CalibrationError, calibrate, residuals_csv
from .extraction import (
    DEFAULT_WINDOW_NM,
    DeviceContext,
    ExtractionError,
    Implant,
    density_map,
    extract_device_context,
)
from .gdsii import GdsError, parse_gds, write_gds
from .geometry import DeviceKind, LayoutDb, Rect, bounding_box
from .jsonio import (
    SchemaError,
    devices_sidecar_json,
    parse_devices_sidecar,
    parse_layer_map_json,
    parse_layout_json,
    write_layout_json,
)
from .measurements import CsvError, DummyKind, RingSpec, parse_measurements_csv
from .models import parse_model_json, write_model_json
from .testgen import TestStructureConfig, fixture_name, generate_test_structure

_RESIDUAL_GATE = 0.01


class NoDeviceAnnotations(ExtractionError):
    pass


def _err(message: str) -> None:
    print(f"ringfill: {message}", file=sys.stderr)


def _um_to_nm(um: float) -> int:
    return int(round(um * 1000))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_layout(args) -> tuple[LayoutDb, dict[str, str]]:
    """Load a layout file (.json fixture or .gds plus device sidecar)."""
    path = Path(args.layout)
    digests = {str(path): _sha256(path)}
    layer_map = None
    if getattr(args, "layer_map", None):
        lm_path = Path(args.layer_map)
        layer_map = parse_layer_map_json(lm_path.read_text())
        digests[str(lm_path)] = _sha256(lm_path)
    if path.suffix.lower() == ".gds":
        db = parse_gds(path.read_bytes(), layer_map=layer_map)
        sidecar = (
            Path(args.devices)
            if getattr(args, "devices", None)
            else path.with_suffix(".devices.json")
        )
        if sidecar.exists():
            devices = parse_devices_sidecar(sidecar.read_text())
            digests[str(sidecar)] = _sha256(sidecar)
            db = LayoutDb(
                db_unit=db.db_unit,
                cells=db.cells,
                device_annotations=devices,
                layer_map=db.layer_map,
            )
    else:
        db = parse_layout_json(path.read_text())
    return db, digests


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def _context_obj(ctx: DeviceContext) -> dict:
    return {
        "id": ctx.device_id,
        "kind": ctx.kind.value,
        "ring_class": ctx.ring_class.value,
        "rings": [
            {
                "implant": g.implant.value,
                "od_width_nm": g.od_width,
                "inner": [g.inner.x0, g.inner.y0, g.inner.x1, g.inner.y1],
                "outer": [g.outer.x0, g.outer.y0, g.outer.x1, g.outer.y1],
            }
            for g in ctx.rings
        ],
        "sti_width_nm": ctx.sti_width,
        "d_nod": ctx.d_nod,
        "d_pod": ctx.d_pod,
        "window_nm": ctx.window_nm,
    }


def _extract_all(db: LayoutDb, window_nm: int) -> list[DeviceContext]:
    if not db.device_annotations:
        raise NoDeviceAnnotations(
            "no device annotations: pair GDSII input with a JSON device sidecar"
        )
    return [extract_device_context(db, dev, window=window_nm)
            for dev in db.device_annotations]


# ---------------------------------------------------------------------------
# gen

_CONFIG_LENGTH_KEYS = {
    "finger_w_nm": "finger_w",
    "finger_l_nm": "finger_l",
    "ring_gap_nm": "ring_gap",
    "ring_odw_1x_nm": "ring_odw_1x",
    "ring_odw_2x_nm": "ring_odw_2x",
    "double_ring_gap_nm": "double_ring_gap",
    "window_nm": "window",
}


def _config_from_file(path: Path) -> TestStructureConfig:
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        doc = tomllib.loads(path.read_text())
    else:
        doc = json.loads(path.read_text())
    if not isinstance(doc, dict):
        raise ValueError("config file must hold a table/object")
    kwargs = {}
    for key, value in doc.items():
        if key == "kind":
            kwargs["kind"] = DeviceKind(value)
        elif key == "ring":
            kwargs["ring"] = RingSpec(value)
        elif key == "dummy":
            kwargs["dummy"] = DummyKind(value)
        elif key in _CONFIG_LENGTH_KEYS:
            kwargs[_CONFIG_LENGTH_KEYS[key]] = int(value)
        elif key in ("fingers",):
            kwargs["fingers"] = int(value)
        elif key == "fill_target_density":
            kwargs["fill_target_density"] = float(value)
        else:
            raise ValueError(f"unknown config key {key!r}")
    for required in ("kind", "ring", "dummy"):
        if required not in kwargs:
            raise ValueError(f"config file missing required key {required!r}")
    return TestStructureConfig(**kwargs)


def _emit_fixture(db: LayoutDb, out_dir: Path, name: str, fmt: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "json":
        path = out_dir / f"{name}.json"
        path.write_text(write_layout_json(db))
        written.append(path)
    else:
        path = out_dir / f"{name}.gds"
        path.write_bytes(write_gds(db))
        written.append(path)
        sidecar = out_dir / f"{name}.devices.json"
        sidecar.write_text(devices_sidecar_json(db))
        written.append(sidecar)
    return written


def cmd_gen(args) -> int:
    from .testgen import paper_configs

    out_dir = Path(args.out_dir)
    if args.all_paper_fixtures:
        configs = paper_configs()
    elif args.config:
        configs = [_config_from_file(Path(args.config))]
    else:
        raise ValueError("gen needs --config FILE or --all-paper-fixtures")
    for cfg in configs:
        db = generate_test_structure(cfg)
        name = fixture_name(cfg.kind, cfg.ring, cfg.dummy)
        for path in _emit_fixture(db, out_dir, name, args.format):
            print(path)
    return 0


# ---------------------------------------------------------------------------
# extract

def cmd_extract(args) -> int:
    db, digests = _load_layout(args)
    window_nm = _um_to_nm(args.window_um)
    contexts = _extract_all(db, window_nm)
    report = {
        "tool_version": __version__,
        "inputs": digests,
        "window_nm": window_nm,
        "devices": [_context_obj(c) for c in contexts],
        "warnings": [],
    }
    _write_or_print(json.dumps(report, indent=1, sort_keys=True), args.out)
    return 0


# ---------------------------------------------------------------------------
# density

def cmd_density(args) -> int:
    db, _ = _load_layout(args)
    implant = Implant.NPLUS if args.implant == "np" else Implant.PPLUS
    window_nm = _um_to_nm(args.window_um)
    step_nm = _um_to_nm(args.step_um)
    shapes = [r for _, _, r in db.iter_shapes()]
    if shapes:
        region = bounding_box(shapes)
    else:
        half = window_nm // 2
        region = Rect(-half, -half, half, half)
    dmap = density_map(db, implant, region, step=step_nm, window=window_nm)
    out = Path(args.out)
    if out.suffix.lower() == ".csv":
        out.write_text(dmap.to_csv())
    elif out.suffix.lower() == ".pgm":
        out.write_text(dmap.to_pgm())
    else:
        raise ValueError(f"--out must end in .csv or .pgm, got {out.name!r}")
    print(out)
    return 0


# ---------------------------------------------------------------------------
# calibrate

def _fixture_context(
    fixtures_dir: Path, name: str, window_nm: int, digests: dict[str, str]
) -> DeviceContext:
    path = fixtures_dir / f"{name}.json"
    if not path.exists():
        gds = fixtures_dir / f"{name}.gds"
        if gds.exists():
            db = parse_gds(gds.read_bytes())
            sidecar = fixtures_dir / f"{name}.devices.json"
            if sidecar.exists():
                db = LayoutDb(
                    db_unit=db.db_unit,
                    cells=db.cells,
                    device_annotations=parse_devices_sidecar(sidecar.read_text()),
                    layer_map=db.layer_map,
                )
            digests[str(gds)] = _sha256(gds)
        else:
            raise FileNotFoundError(f"no fixture {name}.json or {name}.gds in {fixtures_dir}")
    else:
        db = parse_layout_json(path.read_text())
        digests[str(path)] = _sha256(path)
    if not db.device_annotations:
        raise NoDeviceAnnotations(f"fixture {name} has no device annotations")
    return extract_device_context(db, db.device_annotations[0], window=window_nm)


def cmd_calibrate(args) -> int:
    csv_path = Path(args.measurements)
    corpus = parse_measurements_csv(csv_path.read_text())
    if not corpus:
        raise CalibrationError("measurement corpus is empty")
    digests = {str(csv_path): _sha256(csv_path)}
    fixtures_dir = Path(args.fixtures_dir)
    window_nm = _um_to_nm(args.window_um)
    contexts = {}
    for row in corpus:
        name = fixture_name(row.device_kind, row.ring, row.dummy)
        contexts[row.key] = _fixture_context(fixtures_dir, name, window_nm, digests)

    result = calibrate(
        corpus,
        contexts,
        odw_th=args.odw_th_nm,
        vt_ref=args.vt_ref,
        v_ov=args.vov,
    )
    model_text = write_model_json(result.model_params)
    _write_or_print(model_text, args.out)
    residual_path = (
        Path(args.residuals)
        if args.residuals
        else (Path(args.out).with_suffix(".residuals.csv") if args.out else None)
    )
    if residual_path:
        residual_path.write_text(residuals_csv(result))
    _err(
        f"calibrated {len(result.residuals)} rows; "
        f"max |residual| = {result.max_abs_residual:.3e}; "
        f"iterations = {result.iterations}"
    )
    if result.max_abs_residual > _RESIDUAL_GATE:
        _err(
            f"max |residual| {result.max_abs_residual:.4f} exceeds the "
            f"{_RESIDUAL_GATE} calibration gate"
        )
        return 5
    return 0


# ---------------------------------------------------------------------------
# predict

def cmd_predict(args) -> int:
    db, digests = _load_layout(args)
    model_path = Path(args.model)
    params = parse_model_json(model_path.read_text())
    digests[str(model_path)] = _sha256(model_path)
    window_nm = _um_to_nm(args.window_um)
    contexts = _extract_all(db, window_nm)
    from .models import dummy_current_factor, mobility_multiplier

    devices = []
    for ctx in contexts:
        ose = params.ose[ctx.kind]
        table = params.vt[ctx.kind]
        mobility = mobility_multiplier(ctx, ose, params.polarity)
        fill = dummy_current_factor(ctx, table)
        obj = _context_obj(ctx)
        obj["mobility_multiplier"] = mobility
        obj["dummy_factor"] = fill
        obj["predicted_ratio"] = mobility * fill
        devices.append(obj)
    report = {
        "tool_version": __version__,
        "inputs": digests,
        "window_nm": window_nm,
        "devices": devices,
        "warnings": [],
    }
    _write_or_print(json.dumps(report, indent=1, sort_keys=True), args.out)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ringfill",
        description="Guard-ring / dummy-fill context extraction and ratio modeling",
    )
    parser.add_argument("--version", action="version", version=f"ringfill {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate mirror test fixtures")
    p.add_argument("--config", help="fixture config file (.json or .toml)")
    p.add_argument("--all-paper-fixtures", action="store_true",
                   help="emit all ten measured configurations")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("json", "gds"), default="json")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("extract", help="extract per-device model context")
    p.add_argument("layout")
    p.add_argument("--layer-map", help="layer-map JSON for GDSII input")
    p.add_argument("--devices", help="device sidecar JSON for GDSII input")
    p.add_argument("--window-um", type=float, default=100.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("density", help="export a sliding-window density map")
    p.add_argument("layout")
    p.add_argument("--layer-map")
    p.add_argument("--devices")
    p.add_argument("--implant", choices=("np", "pp"), required=True)
    p.add_argument("--step-um", type=float, default=10.0)
    p.add_argument("--window-um", type=float, default=100.0)
    p.add_argument("--out", required=True, help="output path (.csv or .pgm)")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("calibrate", help="fit model parameters from measurements")
    p.add_argument("measurements", help="measurement CSV")
    p.add_argument("--fixtures-dir", required=True)
    p.add_argument("--odw-th-nm", type=float, default=280.0)
    p.add_argument("--vt-ref", type=float, default=0.4)
    p.add_argument("--vov", type=float, default=0.2)
    p.add_argument("--window-um", type=float, default=100.0)
    p.add_argument("--out", help="model parameter JSON output")
    p.add_argument("--residuals", help="residual report CSV output")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("predict", help="predict mirror ratios for a layout")
    p.add_argument("layout")
    p.add_argument("--layer-map")
    p.add_argument("--devices")
    p.add_argument("--model", required=True)
    p.add_argument("--window-um", type=float, default=100.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GdsError, SchemaError, CsvError, json.JSONDecodeError,
            FileNotFoundError, IsADirectoryError) as exc:
        _err(str(exc))
        return 3
    except ExtractionError as exc:
        _err(str(exc))
        return 4
    except CalibrationError as exc:
        _err(str(exc))
        return 5
    except (ValueError, KeyError, OSError) as exc:
        _err(str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
