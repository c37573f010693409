"""Current-mirror measurement corpus: row schema and CSV parsing.

Each row records the measured output/reference current ratio of one
mirror configuration, keyed by (device kind, guard-ring style, dummy
fill style).  The silicon corpus shipped with the package lives in
``ringfill/data/table1_2.csv``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from importlib import resources

from .geometry import DeviceKind


class RingSpec(Enum):
    """Guard-ring style of a test configuration."""

    DOUBLE = "Double"
    SINGLE_1X = "Single1X"
    SINGLE_2X = "Single2X"


class DummyKind(Enum):
    """Second-level dummy fill implant style."""

    NPLUS_OD = "NplusOD"
    PPLUS_OD = "PplusOD"
    MIXED = "Mixed"


class CsvError(ValueError):
    """Measurement CSV parse failure; message carries the line number."""


class BadEnum(CsvError):
    pass


class BadNumber(CsvError):
    pass


class DuplicateKey(CsvError):
    pass


@dataclass(frozen=True)
class MeasurementRow:
    device_kind: DeviceKind
    ring: RingSpec
    dummy: DummyKind
    simulated_ratio: float
    measured_ratio: float

    def __post_init__(self) -> None:
        if self.simulated_ratio <= 0 or self.measured_ratio <= 0:
            raise ValueError(f"ratios must be > 0: {self}")

    @property
    def key(self) -> tuple[DeviceKind, RingSpec, DummyKind]:
        return (self.device_kind, self.ring, self.dummy)

    @property
    def key_str(self) -> str:
        return f"{self.device_kind.value}:{self.ring.value}:{self.dummy.value}"


_HEADER = ["kind", "ring", "dummy", "simulated_ratio", "measured_ratio"]


def _parse_enum(enum_cls, token: str, lineno: int, column: str):
    try:
        return enum_cls(token)
    except ValueError:
        allowed = [m.value for m in enum_cls]
        raise BadEnum(
            f"line {lineno}: {column} value {token!r} not one of {allowed}"
        ) from None


def _parse_number(token: str, lineno: int, column: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise BadNumber(f"line {lineno}: {column} value {token!r} is not a number") from None
    if value <= 0:
        raise BadNumber(f"line {lineno}: {column} must be > 0, got {value}")
    return value


def parse_measurements_csv(text: str) -> list[MeasurementRow]:
    """Parse measurement rows.

    Header must be ``kind,ring,dummy,simulated_ratio,measured_ratio``;
    lines starting with '#' are comments.  Duplicate (kind, ring, dummy)
    keys are an error.
    """
    rows: list[MeasurementRow] = []
    seen: dict[tuple, int] = {}
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if not header_seen:
            if fields != _HEADER:
                raise CsvError(
                    f"line {lineno}: header must be {','.join(_HEADER)!r}, got {line!r}"
                )
            header_seen = True
            continue
        if len(fields) != len(_HEADER):
            raise CsvError(
                f"line {lineno}: expected {len(_HEADER)} fields, got {len(fields)}"
            )
        kind = _parse_enum(DeviceKind, fields[0], lineno, "kind")
        ring = _parse_enum(RingSpec, fields[1], lineno, "ring")
        dummy = _parse_enum(DummyKind, fields[2], lineno, "dummy")
        simulated = _parse_number(fields[3], lineno, "simulated_ratio")
        measured = _parse_number(fields[4], lineno, "measured_ratio")
        key = (kind, ring, dummy)
        if key in seen:
            raise DuplicateKey(
                f"line {lineno}: duplicate row for "
                f"{kind.value}/{ring.value}/{dummy.value} (first at line {seen[key]})"
            )
        seen[key] = lineno
        rows.append(MeasurementRow(kind, ring, dummy, simulated, measured))
    return rows


def write_measurements_csv(rows: list[MeasurementRow]) -> str:
    lines = [",".join(_HEADER)]
    for r in rows:
        lines.append(
            f"{r.device_kind.value},{r.ring.value},{r.dummy.value},"
            f"{r.simulated_ratio:.2f},{r.measured_ratio:.2f}"
        )
    return "\n".join(lines) + "\n"


def paper_measurements() -> list[MeasurementRow]:
    """The silicon measurement corpus shipped with the package."""
    text = resources.files("ringfill").joinpath("data/table1_2.csv").read_text()
    return parse_measurements_csv(text)
