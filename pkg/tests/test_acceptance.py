"""Acceptance criteria, one test per criterion, at stated tolerances.

Each test records a PASS/FAIL line (printed in the terminal summary)
via :func:`conftest.record_criterion`.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from conftest import record_criterion
from grid_oracle import grid_intersection_area
from ringfill.calibration import RingObservation, calibrate_ose
from ringfill.cli import main
from ringfill.extraction import (
    Implant,
    RingClass,
    extract_device_context,
    window_covered_area,
    window_rect,
)
from ringfill.gdsii import parse_gds, write_gds
from ringfill.geometry import (
    Cell,
    DeviceKind,
    LayerKind,
    LayoutDb,
    Rect,
    geometry_equal,
)
from ringfill.measurements import DummyKind, RingSpec, paper_measurements
from ringfill.models import (
    OseParams,
    PolarityTable,
    dummy_current_factor,
    effective_sti_width,
    mobility_multiplier,
    predict_ratio,
)
from ringfill.testgen import (
    TestStructureConfig,
    fixture_name,
    generate_test_structure,
    paper_configs,
)

DATA_DIR = Path(__file__).parent / "data"


def test_criterion_1_table_reproduction(tmp_path):
    """Calibrate on the shipped corpus, predict over the ten fixtures."""
    start = time.perf_counter()
    fixtures = tmp_path / "fixtures"
    assert main(["gen", "--all-paper-fixtures", "--out-dir", str(fixtures)]) == 0

    from importlib import resources

    csv_path = tmp_path / "table1_2.csv"
    csv_path.write_text(
        resources.files("ringfill").joinpath("data/table1_2.csv").read_text()
    )
    model = tmp_path / "model.json"
    assert main(["calibrate", str(csv_path), "--fixtures-dir", str(fixtures),
                 "--odw-th-nm", "280", "--out", str(model)]) == 0

    worst = 0.0
    for row in paper_measurements():
        name = fixture_name(row.device_kind, row.ring, row.dummy)
        report_path = tmp_path / f"{name}.report.json"
        assert main(["predict", str(fixtures / f"{name}.json"),
                     "--model", str(model), "--out", str(report_path)]) == 0
        report = json.loads(report_path.read_text())
        for dev in report["devices"]:
            worst = max(worst, abs(dev["predicted_ratio"] - row.measured_ratio))
    elapsed = time.perf_counter() - start
    record_criterion(
        1,
        f"ten measured ratios reproduced (max err {worst:.2e}, {elapsed:.1f}s)",
        worst <= 0.005 and elapsed < 60.0,
    )


def test_criterion_2_closed_form_calibration(paper_bundle):
    result = paper_bundle["result"]
    ok = True
    for kind in DeviceKind:
        p = result.params[kind]
        ok &= abs(p.k - 2.0) <= 1e-6
        ok &= abs(p.c_mu - 50.0) <= 1e-6
    record_criterion(
        2,
        "fitted (k, c_mu) matches the algebraic solution within 1e-6",
        ok,
    )


def test_criterion_3_synthetic_recovery():
    start = time.perf_counter()
    rng = np.random.default_rng(20260810)
    stiw = 1000.0
    odw_th = 280.0
    worst_rel = 0.0
    for _ in range(100):
        k_true = rng.uniform(0.1, 5.0)
        c_true = rng.uniform(5.0, 200.0)
        truth = OseParams(k=k_true, odw_th=odw_th, c_mu=c_true)
        obs = [
            RingObservation(
                stiw, odw, 1.0 + c_true / effective_sti_width(stiw, odw, truth)
            )
            for odw in (140.0, 280.0)
        ]
        fitted, _ = calibrate_ose(obs, odw_th=odw_th)
        worst_rel = max(worst_rel,
                        abs(fitted.k - k_true) / k_true,
                        abs(fitted.c_mu - c_true) / c_true)
    elapsed = time.perf_counter() - start
    record_criterion(
        3,
        f"100 noiseless recoveries within 1e-5 (worst {worst_rel:.2e}, "
        f"{elapsed:.1f}s)",
        worst_rel <= 1e-5 and elapsed < 10.0,
    )


def test_criterion_4_density_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(41)
    grid = 10
    failures = 0
    for _ in range(200):
        def rand_rects(count):
            out = []
            for _ in range(count):
                x0 = int(rng.integers(-100, 95)) * grid
                y0 = int(rng.integers(-100, 95)) * grid
                w = int(rng.integers(1, 60)) * grid
                h = int(rng.integers(1, 60)) * grid
                out.append(Rect(x0, y0, x0 + w, y0 + h))
            return out

        od = rand_rects(int(rng.integers(1, 25)))
        np_r = rand_rects(int(rng.integers(0, 25)))
        pp_r = rand_rects(int(rng.integers(0, 25)))
        shapes = tuple(
            [(LayerKind.OD, r) for r in od]
            + [(LayerKind.NP, r) for r in np_r]
            + [(LayerKind.PP, r) for r in pp_r]
        )
        db = LayoutDb(cells=(Cell("t", shapes),))
        half_cells = int(rng.integers(10, 100))
        center = (int(rng.integers(-20, 20)) * grid,
                  int(rng.integers(-20, 20)) * grid)
        window = window_rect(center, 2 * half_cells * grid)
        for implant, imp_rects in ((Implant.NPLUS, np_r), (Implant.PPLUS, pp_r)):
            got = window_covered_area(db, implant, window)
            want = grid_intersection_area(
                [c for r in od if (c := r.clipped(window))],
                [c for r in imp_rects if (c := r.clipped(window))],
                window, grid,
            )
            if got != want:
                failures += 1
    elapsed = time.perf_counter() - start
    record_criterion(
        4,
        f"window density equals occupancy-grid oracle on 200 random layouts "
        f"({elapsed:.1f}s)",
        failures == 0 and elapsed < 30.0,
    )


def _random_db(rng) -> LayoutDb:
    cells = []
    for ci in range(int(rng.integers(1, 4))):
        shapes = []
        for _ in range(int(rng.integers(0, 30))):
            kind = list(LayerKind)[int(rng.integers(0, len(LayerKind)))]
            x0 = int(rng.integers(-1_000_000, 1_000_000))
            y0 = int(rng.integers(-1_000_000, 1_000_000))
            shapes.append(
                (kind, Rect(x0, y0,
                            x0 + int(rng.integers(1, 10_000)),
                            y0 + int(rng.integers(1, 10_000))))
            )
        cells.append(Cell(f"cell_{ci}", tuple(shapes)))
    return LayoutDb(cells=tuple(cells))


def test_criterion_5_gds_round_trip(paper_bundle):
    ok = True
    for _, db in paper_bundle["dbs"].values():
        ok &= geometry_equal(parse_gds(write_gds(db)), db)
    rng = np.random.default_rng(55)
    for _ in range(100):
        db = _random_db(rng)
        ok &= geometry_equal(parse_gds(write_gds(db)), db)

    from data.regen_golden import GOLDEN_CONFIG  # type: ignore

    golden = (DATA_DIR / "golden_nmos_single2x_npod.gds").read_bytes()
    regenerated = write_gds(generate_test_structure(GOLDEN_CONFIG))
    ok &= regenerated == golden
    ok &= geometry_equal(parse_gds(golden),
                         parse_gds(write_gds(parse_gds(golden))))
    record_criterion(
        5,
        "parse/write identity on paper fixtures + 100 random layouts, "
        "golden file byte-exact",
        ok,
    )


def test_criterion_6_directional_invariants(paper_bundle):
    result = paper_bundle["result"]
    contexts = paper_bundle["contexts"]
    pol = PolarityTable()
    ok = True

    # Single-ring ratio strictly increases with ring width below threshold.
    for kind in DeviceKind:
        p = result.params[kind]
        table = result.vt_tables[kind]
        base = contexts[next(
            k for k in contexts
            if k[0] is kind and k[1] is RingSpec.SINGLE_2X
        )]
        prev = None
        for odw in range(40, 281, 20):
            ring = base.rings[0]
            from ringfill.extraction import DeviceContext, GuardRingInfo

            scaled = DeviceContext(
                device_id=base.device_id, kind=kind,
                rings=(GuardRingInfo(ring.implant, ring.inner,
                                     ring.inner.expanded(odw), odw),),
                ring_class=RingClass.SINGLE, sti_width=base.sti_width,
                d_nod=base.d_nod, d_pod=base.d_pod, window_nm=base.window_nm,
            )
            ratio = predict_ratio(scaled, p, pol, table)
            if prev is not None:
                ok &= ratio > prev
            prev = ratio

    # Double rings: mobility multiplier is exactly 1.
    for key, ctx in contexts.items():
        if key[1] is RingSpec.DOUBLE:
            ok &= mobility_multiplier(ctx, result.params[key[0]], pol) == 1.0

    # NMOS P+ fill anchor gains current; PMOS fill factors stay small.
    nmos_ppod = contexts[(DeviceKind.NMOS, RingSpec.DOUBLE, DummyKind.PPLUS_OD)]
    ok &= dummy_current_factor(nmos_ppod, result.vt_tables[DeviceKind.NMOS]) > 1.0
    for key, ctx in contexts.items():
        if key[0] is DeviceKind.PMOS and key[1] is RingSpec.DOUBLE:
            factor = dummy_current_factor(ctx, result.vt_tables[DeviceKind.PMOS])
            ok &= 0.98 <= factor <= 1.02
    record_criterion(
        6,
        "ratio ordering, double-ring neutrality, fill polarity all hold",
        ok,
    )


def test_criterion_7_gap_model_properties():
    ok = True
    p = OseParams(k=2.0, odw_th=280.0, c_mu=50.0)

    # homogeneity in the physical gap (exact for power-of-two scaling)
    for stiw in (250.0, 1000.0, 4000.0):
        ok &= effective_sti_width(2.0 * stiw, 140.0, p) == \
            2.0 * effective_sti_width(stiw, 140.0, p)

    # strict monotonicity in ring width below threshold
    values = [effective_sti_width(1000.0, odw, p)
              for odw in (10.0, 70.0, 140.0, 279.0)]
    ok &= all(a > b for a, b in zip(values, values[1:]))

    # threshold behavior: exactly the physical gap at and above odw_th
    ok &= effective_sti_width(1000.0, 280.0, p) == 1000.0
    ok &= effective_sti_width(1000.0, 281.0, p) == 1000.0
    ok &= effective_sti_width(1000.0, 279.0, p) > 1000.0

    # k = 0 disables the correction entirely
    p0 = OseParams(k=0.0, odw_th=280.0, c_mu=50.0)
    ok &= all(effective_sti_width(1000.0, odw, p0) == 1000.0
              for odw in (1.0, 140.0, 280.0, 1000.0))
    record_criterion(
        7,
        "gap-model homogeneity, monotonicity, threshold, k=0 identity exact",
        ok,
    )


def _random_config(rng) -> TestStructureConfig:
    kind = DeviceKind.NMOS if rng.integers(0, 2) else DeviceKind.PMOS
    ring = [RingSpec.DOUBLE, RingSpec.SINGLE_1X, RingSpec.SINGLE_2X][
        int(rng.integers(0, 3))
    ]
    dummy = [DummyKind.NPLUS_OD, DummyKind.PPLUS_OD, DummyKind.MIXED][
        int(rng.integers(0, 3))
    ]
    odw_1x = int(rng.integers(6, 27)) * 10
    return TestStructureConfig(
        kind=kind, ring=ring, dummy=dummy,
        finger_w=int(rng.integers(3, 8)) * 200,
        fingers=int(rng.integers(1, 5)) * 2,
        ring_gap=int(rng.integers(40, 160)) * 10,
        ring_odw_1x=odw_1x,
        ring_odw_2x=int(rng.integers(28, 50)) * 10,
        fill_target_density=round(float(rng.uniform(0.51, 0.62)), 3),
        window=30_000,
    )


def test_criterion_8_generator_extractor_closure(paper_bundle):
    expected_odw = {RingSpec.SINGLE_1X: "ring_odw_1x",
                    RingSpec.SINGLE_2X: "ring_odw_2x",
                    RingSpec.DOUBLE: "ring_odw_2x"}
    expected_class = {RingSpec.SINGLE_1X: RingClass.SINGLE,
                      RingSpec.SINGLE_2X: RingClass.SINGLE,
                      RingSpec.DOUBLE: RingClass.DOUBLE}

    def check(cfg: TestStructureConfig, db: LayoutDb, ctx) -> bool:
        good = ctx.ring_class is expected_class[cfg.ring]
        good &= all(g.od_width == getattr(cfg, expected_odw[cfg.ring])
                    for g in ctx.rings)
        good &= ctx.sti_width == cfg.ring_gap
        prot = Implant.PPLUS if cfg.kind is DeviceKind.NMOS else Implant.NPLUS
        order = [prot] if ctx.ring_class is RingClass.SINGLE else \
            [prot, Implant.NPLUS if prot is Implant.PPLUS else Implant.PPLUS]
        good &= [g.implant for g in ctx.rings] == order
        good &= abs(ctx.d_nod + ctx.d_pod - cfg.fill_target_density) <= 0.01
        return good

    ok = True
    for key, (cfg, db) in paper_bundle["dbs"].items():
        ok &= check(cfg, db, paper_bundle["contexts"][key])

    rng = np.random.default_rng(88)
    for _ in range(50):
        cfg = _random_config(rng)
        db = generate_test_structure(cfg)
        ctx = extract_device_context(db, db.device_annotations[0],
                                     window=cfg.window)
        ok &= check(cfg, db, ctx)
    record_criterion(
        8,
        "extraction recovers every generated configuration "
        "(paper set + 50 random)",
        ok,
    )
