"""Guard-ring and dummy-fill layout context extraction and DFM ratio modeling.

The package measures guard-ring and fill context from flat rectilinear
layouts, predicts current-mirror ratio shifts from that context, and
calibrates the model parameters against a measured corpus.
"""

from .geometry import (
    Cell,
    DeviceInstance,
    DeviceKind,
    LayerKind,
    LayoutDb,
    Rect,
    clip_area,
    intersection_area,
    rect_area,
    union_area,
)
from .extraction import (
    CoverageGrid,
    DensityMap,
    DeviceContext,
    GuardRingInfo,
    Implant,
    RingClass,
    coverage_grid,
    density_map,
    detect_guard_rings,
    extract_device_context,
    extract_sti_width,
    window_density,
)
from .measurements import (
    DummyKind,
    MeasurementRow,
    RingSpec,
    paper_measurements,
    parse_measurements_csv,
)
from .models import (
    ModelParams,
    OseParams,
    PolarityTable,
    VtSample,
    VtTable,
    dummy_current_factor,
    effective_sti_width,
    mobility_multiplier,
    parse_model_json,
    predict_ratio,
    vt_effective,
    write_model_json,
)
from .calibration import (
    CalibrationResult,
    RingObservation,
    calibrate,
    calibrate_ose,
    calibrate_vt_table,
    fit_nonlinear,
)
from .testgen import (
    TestStructureConfig,
    fixture_name,
    generate_test_structure,
    paper_configs,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "Cell",
    "DeviceInstance",
    "DeviceKind",
    "LayerKind",
    "LayoutDb",
    "Rect",
    "clip_area",
    "intersection_area",
    "rect_area",
    "union_area",
    "CoverageGrid",
    "DensityMap",
    "DeviceContext",
    "GuardRingInfo",
    "Implant",
    "RingClass",
    "coverage_grid",
    "density_map",
    "detect_guard_rings",
    "extract_device_context",
    "extract_sti_width",
    "window_density",
    "DummyKind",
    "MeasurementRow",
    "RingSpec",
    "paper_measurements",
    "parse_measurements_csv",
    "ModelParams",
    "OseParams",
    "PolarityTable",
    "VtSample",
    "VtTable",
    "dummy_current_factor",
    "effective_sti_width",
    "mobility_multiplier",
    "parse_model_json",
    "predict_ratio",
    "vt_effective",
    "write_model_json",
    "CalibrationResult",
    "RingObservation",
    "calibrate",
    "calibrate_ose",
    "calibrate_vt_table",
    "fit_nonlinear",
    "TestStructureConfig",
    "fixture_name",
    "generate_test_structure",
    "paper_configs",
    "sweep",
    "__version__",
]
