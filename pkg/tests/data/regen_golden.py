"""Regenerate the byte-level golden GDSII reference.

Run from the repository root after any intentional change to the
generator or the GDSII writer:

    python tests/data/regen_golden.py

The golden fixture is the NMOS / Single2X / N+OD configuration at a
reduced 20 um analysis window (keeps the file small).
"""

from pathlib import Path

from ringfill.gdsii import write_gds
from ringfill.geometry import DeviceKind
from ringfill.measurements import DummyKind, RingSpec
from ringfill.testgen import TestStructureConfig, generate_test_structure

GOLDEN_CONFIG = TestStructureConfig(
    kind=DeviceKind.NMOS,
    ring=RingSpec.SINGLE_2X,
    dummy=DummyKind.NPLUS_OD,
    window=20_000,
)

GOLDEN_PATH = Path(__file__).parent / "golden_nmos_single2x_npod.gds"


def main() -> None:
    data = write_gds(generate_test_structure(GOLDEN_CONFIG))
    GOLDEN_PATH.write_bytes(data)
    print(f"wrote {GOLDEN_PATH} ({len(data)} bytes)")


if __name__ == "__main__":
    main()
