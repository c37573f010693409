"""Model response: mirror ratio vs ring width and ring spacing.

Sweeps generated fixtures along one geometry axis at a time and
predicts the ratio for each, tracing the curves the model produces:
below the threshold width the narrow-ring correction suppresses the
gain; at and above it the ratio saturates at 1 + c_mu / gap.

Writes a PNG when matplotlib is importable, otherwise prints tables.
"""

from pathlib import Path

from ringfill import (
    DeviceKind,
    DummyKind,
    RingSpec,
    TestStructureConfig,
    extract_device_context,
)
from ringfill.calibration import calibrate
from ringfill.measurements import paper_measurements
from ringfill.testgen import generate_test_structure, paper_configs, sweep

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(parents=True, exist_ok=True)

# Calibrate once against the shipped corpus.
corpus = paper_measurements()
contexts = {}
for row, cfg in zip(corpus, paper_configs()):
    db = generate_test_structure(cfg)
    contexts[row.key] = extract_device_context(db, db.device_annotations[0])
model = calibrate(corpus, contexts).model_params

base = TestStructureConfig(
    kind=DeviceKind.NMOS, ring=RingSpec.SINGLE_2X, dummy=DummyKind.NPLUS_OD,
    window=30_000, fill_target_density=0.55,
)


def predicted(db, window):
    ctx = extract_device_context(db, db.device_annotations[0], window=window)
    return ctx, model.predict(ctx)


curves = {}
odw_values = [40, 70, 100, 140, 180, 220, 250, 280, 360, 480]
curves["ring OD width (nm)"] = [
    (v, predicted(db, base.window)[1]) for v, db in sweep(base, "ring_odw", odw_values)
]
gap_values = [500, 750, 1000, 1250, 1500]
curves["ring spacing (nm)"] = [
    (v, predicted(db, base.window)[1]) for v, db in sweep(base, "ring_gap", gap_values)
]

for axis, points in curves.items():
    print(f"\nratio vs {axis}:")
    for v, r in points:
        bar = "#" * int(round((r - 1.0) * 1000))
        print(f"  {v:6.0f}  {r:.4f}  {bar}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, (axis, points) in zip(axes, curves.items()):
        xs, ys = zip(*points)
        ax.plot(xs, ys, "o-")
        ax.set_xlabel(axis)
        ax.set_ylabel("predicted ratio")
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    png = out_dir / "response_curves.png"
    fig.savefig(png, dpi=120)
    print(f"\nplot written to {png}")
except ImportError:
    print("\nmatplotlib not installed; tables only")
