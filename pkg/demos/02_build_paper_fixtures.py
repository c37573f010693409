"""Generate the ten measured current-mirror test structures.

Each fixture is a flat layout: an interdigitated mirror (ABBA finger
order), one or two guard rings, first-level dummy replicas of the
mirror diffusion, and a second-level OD tile array solved to hit the
target fill density.  Fixtures are written in both the JSON fixture
format (carries device annotations) and the GDSII subset.
"""

from pathlib import Path

from ringfill import LayerKind, fixture_name, paper_configs
from ringfill.gdsii import write_gds
from ringfill.jsonio import devices_sidecar_json, write_layout_json
from ringfill.testgen import generate_test_structure

out_dir = Path(__file__).parent / "output" / "fixtures"
out_dir.mkdir(parents=True, exist_ok=True)

print(f"{'fixture':32s} {'shapes':>7s} {'OD rects':>9s} {'gds bytes':>10s}")
for cfg in paper_configs():
    db = generate_test_structure(cfg)
    name = fixture_name(cfg.kind, cfg.ring, cfg.dummy)
    (out_dir / f"{name}.json").write_text(write_layout_json(db))
    gds = write_gds(db)
    (out_dir / f"{name}.gds").write_bytes(gds)
    (out_dir / f"{name}.devices.json").write_text(devices_sidecar_json(db))
    n_shapes = sum(len(c.shapes) for c in db.cells)
    n_od = len(db.rects_on(LayerKind.OD))
    print(f"{name:32s} {n_shapes:7d} {n_od:9d} {len(gds):10d}")

print(f"\nwrote {3 * len(paper_configs())} files under {out_dir}")
