"""GDSII stream subset reader/writer.

Supports exactly the records needed for flat rectangle layouts:
HEADER, BGNLIB, LIBNAME, UNITS, BGNSTR, STRNAME, ENDSTR, BOUNDARY,
LAYER, DATATYPE, XY, ENDEL, ENDLIB.  Any other record is a hard error,
not a skip.  All multi-byte integers are big-endian; UNITS reals use
the 8-byte excess-64 format.  Timestamps are written as zeros so
output is byte-for-byte reproducible.

Device annotations are not carried by this format; see
:mod:`ringfill.jsonio` for the lossless fixture format.
"""

from __future__ import annotations

import struct

from .geometry import (
    COORD_LIMIT,
    Cell,
    DEFAULT_LAYER_MAP,
    LayerKind,
    LayoutDb,
    Rect,
)


class GdsError(Exception):
    """Malformed or unsupported GDSII stream content."""


class TruncatedStream(GdsError):
    pass


class UnknownRecord(GdsError):
    pass


class NonRectBoundary(GdsError):
    pass


class UnmappedLayer(GdsError):
    pass


class CoordOverflow(GdsError):
    pass


# (rectype, datatype_code) pairs of the supported subset.
HEADER = (0x00, 0x02)
BGNLIB = (0x01, 0x02)
LIBNAME = (0x02, 0x06)
UNITS = (0x03, 0x05)
ENDLIB = (0x04, 0x00)
BGNSTR = (0x05, 0x02)
STRNAME = (0x06, 0x06)
ENDSTR = (0x07, 0x00)
BOUNDARY = (0x08, 0x00)
LAYER = (0x0D, 0x02)
DATATYPE = (0x0E, 0x02)
XY = (0x10, 0x03)
ENDEL = (0x11, 0x00)

_SUPPORTED = {
    HEADER: "HEADER",
    BGNLIB: "BGNLIB",
    LIBNAME: "LIBNAME",
    UNITS: "UNITS",
    ENDLIB: "ENDLIB",
    BGNSTR: "BGNSTR",
    STRNAME: "STRNAME",
    ENDSTR: "ENDSTR",
    BOUNDARY: "BOUNDARY",
    LAYER: "LAYER",
    DATATYPE: "DATATYPE",
    XY: "XY",
    ENDEL: "ENDEL",
}

_LIBNAME = b"RINGFILL"
_ZERO_TIMESTAMPS = struct.pack(">12h", *([0] * 12))


def encode_real8(value: float) -> bytes:
    """Encode a float as a GDSII 8-byte excess-64 real."""
    if value == 0:
        return b"\x00" * 8
    sign = 0x00
    if value < 0:
        sign = 0x80
        value = -value
    exponent = 64
    m = value
    while m >= 1.0:
        m /= 16.0
        exponent += 1
    while m < 1.0 / 16.0:
        m *= 16.0
        exponent -= 1
    mant = round(m * (1 << 56))
    if mant >= 1 << 56:
        mant >>= 4
        exponent += 1
    if not 0 <= exponent <= 0x7F:
        raise GdsError(f"real {value} outside excess-64 exponent range")
    return bytes([sign | exponent]) + mant.to_bytes(7, "big")


def decode_real8(raw: bytes) -> float:
    """Decode a GDSII 8-byte excess-64 real.

    Exact for every value produced by :func:`encode_real8` from a
    double (the 56-bit mantissa is wider than a double's 53 bits).
    """
    if len(raw) != 8:
        raise GdsError(f"real8 needs 8 bytes, got {len(raw)}")
    mant = int.from_bytes(raw[1:], "big")
    if mant == 0:
        return 0.0
    exponent = (raw[0] & 0x7F) - 64
    shift = 4 * exponent - 56
    if shift >= 0:
        value = float(mant << shift)
    else:
        value = mant / (1 << -shift)  # single correctly-rounded division
    return -value if raw[0] & 0x80 else value


def _pad_string(s: bytes) -> bytes:
    return s + b"\x00" if len(s) % 2 else s


def _record(rectype: tuple[int, int], payload: bytes = b"") -> bytes:
    length = 4 + len(payload)
    if length % 2:
        raise GdsError("odd record length")
    return struct.pack(">HBB", length, rectype[0], rectype[1]) + payload


def write_gds(db: LayoutDb) -> bytes:
    """Serialize the layout geometry (cells, layers, rects) to bytes.

    Rects are emitted as 5-point closed BOUNDARY outlines,
    counterclockwise from the lower-left corner.
    """
    inverse_ok = len(set(db.layer_map.values())) == len(db.layer_map)
    if not inverse_ok:
        raise GdsError(f"layer map not bijective: {db.layer_map}")
    out = bytearray()
    out += _record(HEADER, struct.pack(">h", 600))
    out += _record(BGNLIB, _ZERO_TIMESTAMPS)
    out += _record(LIBNAME, _pad_string(_LIBNAME))
    user_per_db = db.db_unit / 1e-6
    out += _record(UNITS, encode_real8(user_per_db) + encode_real8(db.db_unit))
    for cell in db.cells:
        out += _record(BGNSTR, _ZERO_TIMESTAMPS)
        out += _record(STRNAME, _pad_string(cell.name.encode("ascii")))
        for kind, r in cell.shapes:
            gds_layer, gds_dt = db.layer_map[kind]
            for v in (r.x0, r.y0, r.x1, r.y1):
                if abs(v) > COORD_LIMIT:
                    raise CoordOverflow(f"coordinate {v} exceeds 4-byte range")
            out += _record(BOUNDARY)
            out += _record(LAYER, struct.pack(">h", gds_layer))
            out += _record(DATATYPE, struct.pack(">h", gds_dt))
            pts = [
                (r.x0, r.y0),
                (r.x1, r.y0),
                (r.x1, r.y1),
                (r.x0, r.y1),
                (r.x0, r.y0),
            ]
            out += _record(XY, struct.pack(">10l", *[c for p in pts for c in p]))
            out += _record(ENDEL)
        out += _record(ENDSTR)
    out += _record(ENDLIB)
    return bytes(out)


class _Reader:
    """Pulls one record at a time, never reading past its declared length."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def next_record(self) -> tuple[tuple[int, int], bytes, int]:
        offset = self.pos
        if offset + 4 > len(self.data):
            raise TruncatedStream(f"stream ends inside record header at byte {offset}")
        length, rectype, dt_code = struct.unpack_from(">HBB", self.data, offset)
        if length < 4:
            raise GdsError(f"record length {length} < 4 at byte {offset}")
        if length % 2:
            raise GdsError(f"odd record length {length} at byte {offset}")
        if offset + length > len(self.data):
            raise TruncatedStream(
                f"record at byte {offset} declares {length} bytes, "
                f"only {len(self.data) - offset} remain"
            )
        key = (rectype, dt_code)
        if key not in _SUPPORTED:
            raise UnknownRecord(
                f"unsupported record type 0x{rectype:02X}{dt_code:02X} at byte {offset}"
            )
        payload = self.data[offset + 4 : offset + length]
        self.pos = offset + length
        return key, payload, offset


def _parse_xy_rect(payload: bytes, cell: str, index: int, offset: int) -> Rect:
    if len(payload) % 8:
        raise NonRectBoundary(
            f"cell {cell!r} element {index}: XY payload not a whole number of points"
        )
    count = len(payload) // 8
    coords = struct.unpack(f">{2 * count}l", payload)
    pts = [(coords[2 * i], coords[2 * i + 1]) for i in range(count)]
    if count != 5 or pts[0] != pts[4]:
        raise NonRectBoundary(
            f"cell {cell!r} element {index} at byte {offset}: boundary is not a "
            f"closed 5-point outline: {pts}"
        )
    xs = sorted({p[0] for p in pts})
    ys = sorted({p[1] for p in pts})
    corner_ok = len(xs) == 2 and len(ys) == 2 and set(pts[:4]) == {
        (xs[0], ys[0]),
        (xs[1], ys[0]),
        (xs[1], ys[1]),
        (xs[0], ys[1]),
    }
    edges_ok = all(
        pts[i][0] == pts[i + 1][0] or pts[i][1] == pts[i + 1][1] for i in range(4)
    )
    if not (corner_ok and edges_ok):
        raise NonRectBoundary(
            f"cell {cell!r} element {index} at byte {offset}: boundary is not an "
            f"axis-aligned rectangle: {pts}"
        )
    return Rect(xs[0], ys[0], xs[1], ys[1])


def parse_gds(
    data: bytes, layer_map: dict[LayerKind, tuple[int, int]] | None = None
) -> LayoutDb:
    """Parse a GDSII stream into a :class:`LayoutDb`.

    Every BOUNDARY must describe an axis-aligned rectangle on a mapped
    (layer, datatype) pair.  Device annotations come back empty; pair
    GDSII input with a JSON sidecar to carry them.
    """
    lmap = dict(layer_map) if layer_map is not None else dict(DEFAULT_LAYER_MAP)
    inverse = {pair: kind for kind, pair in lmap.items()}
    reader = _Reader(data)

    def expect(expected: tuple[int, int]) -> tuple[bytes, int]:
        key, payload, offset = reader.next_record()
        if key != expected:
            raise GdsError(
                f"expected {_SUPPORTED[expected]} at byte {offset}, got {_SUPPORTED[key]}"
            )
        return payload, offset

    expect(HEADER)
    expect(BGNLIB)
    expect(LIBNAME)
    units_payload, units_off = expect(UNITS)
    if len(units_payload) != 16:
        raise GdsError(f"UNITS record at byte {units_off} must carry two 8-byte reals")
    db_unit = decode_real8(units_payload[8:])
    if db_unit <= 0:
        raise GdsError(f"non-positive database unit {db_unit}")

    cells: list[Cell] = []
    while True:
        key, payload, offset = reader.next_record()
        if key == ENDLIB:
            break
        if key != BGNSTR:
            raise GdsError(
                f"expected BGNSTR or ENDLIB at byte {offset}, got {_SUPPORTED[key]}"
            )
        name_payload, name_off = expect(STRNAME)
        try:
            cell_name = name_payload.rstrip(b"\x00").decode("ascii")
        except UnicodeDecodeError as exc:
            raise GdsError(f"non-ASCII cell name at byte {name_off}") from exc
        shapes: list[tuple[LayerKind, Rect]] = []
        index = 0
        while True:
            key, payload, offset = reader.next_record()
            if key == ENDSTR:
                break
            if key != BOUNDARY:
                raise GdsError(
                    f"expected BOUNDARY or ENDSTR at byte {offset}, got {_SUPPORTED[key]}"
                )
            layer_payload, layer_off = expect(LAYER)
            dt_payload, dt_off = expect(DATATYPE)
            xy_payload, xy_off = expect(XY)
            expect(ENDEL)
            if len(layer_payload) != 2:
                raise GdsError(f"LAYER record at byte {layer_off} must carry one int16")
            if len(dt_payload) != 2:
                raise GdsError(f"DATATYPE record at byte {dt_off} must carry one int16")
            pair = (
                struct.unpack(">h", layer_payload)[0],
                struct.unpack(">h", dt_payload)[0],
            )
            if pair not in inverse:
                raise UnmappedLayer(
                    f"cell {cell_name!r} element {index}: no layer mapped to "
                    f"(layer={pair[0]}, datatype={pair[1]})"
                )
            try:
                rect = _parse_xy_rect(xy_payload, cell_name, index, xy_off)
            except ValueError as exc:  # degenerate rectangle
                raise NonRectBoundary(
                    f"cell {cell_name!r} element {index}: {exc}"
                ) from exc
            shapes.append((inverse[pair], rect))
            index += 1
        cells.append(Cell(cell_name, tuple(shapes)))

    return LayoutDb(db_unit=db_unit, cells=tuple(cells), layer_map=lmap)
