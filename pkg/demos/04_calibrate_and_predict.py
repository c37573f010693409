"""Full loop: fixtures -> extraction -> calibration -> prediction.

Calibrates the ring-stress and fill-shift parameters against the
shipped silicon measurement corpus, then predicts every configuration
back and prints the residual table.  The ring term has a closed-form
solution on this corpus (k = 2.0, c_mu = 50 nm for both kinds); the
simplex refinement must land on it.
"""

from pathlib import Path

from ringfill import extract_device_context, paper_measurements
from ringfill.calibration import calibrate, residuals_csv
from ringfill.models import write_model_json
from ringfill.testgen import generate_test_structure, paper_configs

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(parents=True, exist_ok=True)

corpus = paper_measurements()
print("extracting contexts from generated fixtures...")
contexts = {}
for row, cfg in zip(corpus, paper_configs()):
    db = generate_test_structure(cfg)
    contexts[row.key] = extract_device_context(db, db.device_annotations[0])

result = calibrate(corpus, contexts, odw_th=280.0, vt_ref=0.4, v_ov=0.2)

print("\nfitted ring-stress parameters:")
for kind, p in result.params.items():
    print(f"  {kind.value}: k = {p.k:.9f}, c_mu = {p.c_mu:.6f} nm "
          f"(threshold width {p.odw_th:.0f} nm)")

print("\nfill-shift anchors (fractional Vt shift at measured densities):")
for kind, table in result.vt_tables.items():
    for s in table.samples:
        print(f"  {kind.value}: f({s.d_nod:.4f}, {s.d_pod:.4f}) = {s.f:+.5f}")

print("\nper-row residuals:")
print(residuals_csv(result), end="")
print(f"max |residual| = {result.max_abs_residual:.3e} "
      f"({result.iterations} solver evaluations)")

model_path = out_dir / "model.json"
model_path.write_text(write_model_json(result.model_params))
print(f"\nmodel written to {model_path}")
