#!/usr/bin/env python3
"""Builds the DICOM test fixtures byte-by-byte from the Part-10 wire format.

Independent of the Rust decoder: every element is assembled by hand here so
the decoder can be checked sample-for-sample against known bytes. Run from
the repository root; fixtures land in crates/core/tests/fixtures/.
"""

import struct
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "fixtures"

EXPLICIT_LE = b"1.2.840.10008.1.2.1"
IMPLICIT_LE = b"1.2.840.10008.1.2"
JPEG_LOSSLESS = b"1.2.840.10008.1.2.4.70"

SHORT_VRS = {b"AE", b"AS", b"AT", b"CS", b"DA", b"DS", b"DT", b"FL", b"FD",
             b"IS", b"LO", b"LT", b"PN", b"SH", b"SL", b"SS", b"ST", b"TM",
             b"UI", b"UL", b"US"}


def pad(value: bytes, pad_byte: bytes) -> bytes:
    return value + pad_byte if len(value) % 2 else value


def explicit(group: int, elem: int, vr: bytes, value: bytes) -> bytes:
    pad_byte = b"\x00" if vr in (b"UI", b"OB", b"OW", b"UN") else b" "
    value = pad(value, pad_byte)
    head = struct.pack("<HH", group, elem) + vr
    if vr in SHORT_VRS:
        return head + struct.pack("<H", len(value)) + value
    return head + b"\x00\x00" + struct.pack("<I", len(value)) + value


def implicit(group: int, elem: int, value: bytes, pad_byte: bytes = b"\x00") -> bytes:
    value = pad(value, pad_byte)
    return struct.pack("<HHI", group, elem, len(value)) + value


def us(v: int) -> bytes:
    return struct.pack("<H", v)


def meta_group(transfer_syntax: bytes) -> bytes:
    body = b"".join([
        explicit(0x0002, 0x0001, b"OB", b"\x00\x01"),
        explicit(0x0002, 0x0002, b"UI", b"1.2.840.10008.5.1.4.1.1.1.2"),
        explicit(0x0002, 0x0003, b"UI", b"1.2.826.0.1.3680043.0.1"),
        explicit(0x0002, 0x0010, b"UI", transfer_syntax),
        explicit(0x0002, 0x0012, b"UI", b"1.2.826.0.1.3680043.0.2"),
    ])
    group_length = explicit(0x0002, 0x0000, b"UL", struct.pack("<I", len(body)))
    return b"\x00" * 128 + b"DICM" + group_length + body


def pixel_bytes_16(samples):
    return b"".join(struct.pack("<H", s) for s in samples)


def undefined_sq_explicit() -> bytes:
    """Explicit-VR SQ with undefined length: one defined-length item plus one
    undefined-length item, both containing a nested element."""
    inner = explicit(0x0008, 0x1150, b"UI", b"1.2.840.10008.5.1.4.1.1.1.2")
    item_defined = struct.pack("<HHI", 0xFFFE, 0xE000, len(inner)) + inner
    item_undefined = (
        struct.pack("<HHI", 0xFFFE, 0xE000, 0xFFFFFFFF)
        + inner
        + struct.pack("<HHI", 0xFFFE, 0xE00D, 0)
    )
    body = item_defined + item_undefined + struct.pack("<HHI", 0xFFFE, 0xE0DD, 0)
    return (
        struct.pack("<HH", 0x0008, 0x1140)
        + b"SQ"
        + b"\x00\x00"
        + struct.pack("<I", 0xFFFFFFFF)
        + body
    )


def undefined_sq_implicit() -> bytes:
    inner = implicit(0x0008, 0x1150, b"1.2.840.10008.5.1.4.1.1.1.2")
    item_defined = struct.pack("<HHI", 0xFFFE, 0xE000, len(inner)) + inner
    item_undefined = (
        struct.pack("<HHI", 0xFFFE, 0xE000, 0xFFFFFFFF)
        + inner
        + struct.pack("<HHI", 0xFFFE, 0xE00D, 0)
    )
    body = item_defined + item_undefined + struct.pack("<HHI", 0xFFFE, 0xE0DD, 0)
    return struct.pack("<HHI", 0x0008, 0x1140, 0xFFFFFFFF) + body


SAMPLES_12BIT = [0, 291, 1365, 2730, 4095, 1234]   # 3 columns x 2 rows
SAMPLES_8BIT = list(range(8))                       # 4 columns x 2 rows
SAMPLES_MONO1 = [65535, 0, 32768, 1]                # 2 columns x 2 rows


def explicit_12bit() -> bytes:
    ds = b"".join([
        explicit(0x0008, 0x0016, b"UI", b"1.2.840.10008.5.1.4.1.1.1.2"),
        explicit(0x0008, 0x0018, b"UI", b"1.2.826.0.1.3680043.0.1"),
        undefined_sq_explicit(),
        explicit(0x0028, 0x0002, b"US", us(1)),
        explicit(0x0028, 0x0004, b"CS", b"MONOCHROME2"),
        explicit(0x0028, 0x0010, b"US", us(2)),   # Rows
        explicit(0x0028, 0x0011, b"US", us(3)),   # Columns
        explicit(0x0028, 0x0100, b"US", us(16)),  # BitsAllocated
        explicit(0x0028, 0x0101, b"US", us(12)),  # BitsStored
        explicit(0x0028, 0x0102, b"US", us(11)),  # HighBit
        explicit(0x0028, 0x0103, b"US", us(0)),
        explicit(0x7FE0, 0x0010, b"OW", pixel_bytes_16(SAMPLES_12BIT)),
    ])
    return meta_group(EXPLICIT_LE) + ds


def implicit_8bit() -> bytes:
    ds = b"".join([
        implicit(0x0008, 0x0016, b"1.2.840.10008.5.1.4.1.1.1.2"),
        undefined_sq_implicit(),
        implicit(0x0028, 0x0002, us(1)),
        implicit(0x0028, 0x0004, b"MONOCHROME2", b" "),
        implicit(0x0028, 0x0010, us(2)),
        implicit(0x0028, 0x0011, us(4)),
        implicit(0x0028, 0x0100, us(8)),
        implicit(0x0028, 0x0101, us(8)),
        implicit(0x0028, 0x0102, us(7)),
        implicit(0x0028, 0x0103, us(0)),
        implicit(0x7FE0, 0x0010, bytes(SAMPLES_8BIT)),
    ])
    return meta_group(IMPLICIT_LE) + ds


def mono1_16bit() -> bytes:
    ds = b"".join([
        explicit(0x0008, 0x0016, b"UI", b"1.2.840.10008.5.1.4.1.1.1.2"),
        explicit(0x0028, 0x0002, b"US", us(1)),
        explicit(0x0028, 0x0004, b"CS", b"MONOCHROME1"),
        explicit(0x0028, 0x0010, b"US", us(2)),
        explicit(0x0028, 0x0011, b"US", us(2)),
        explicit(0x0028, 0x0100, b"US", us(16)),
        explicit(0x0028, 0x0101, b"US", us(16)),
        explicit(0x0028, 0x0102, b"US", us(15)),
        explicit(0x0028, 0x0103, b"US", us(0)),
        explicit(0x0028, 0x1052, b"DS", b"0"),    # RescaleIntercept
        explicit(0x0028, 0x1053, b"DS", b"1"),    # RescaleSlope
        explicit(0x7FE0, 0x0010, b"OW", pixel_bytes_16(SAMPLES_MONO1)),
    ])
    return meta_group(EXPLICIT_LE) + ds


def rgb() -> bytes:
    ds = b"".join([
        explicit(0x0028, 0x0002, b"US", us(3)),
        explicit(0x0028, 0x0004, b"CS", b"RGB"),
        explicit(0x0028, 0x0010, b"US", us(2)),
        explicit(0x0028, 0x0011, b"US", us(2)),
        explicit(0x0028, 0x0100, b"US", us(8)),
        explicit(0x0028, 0x0101, b"US", us(8)),
        explicit(0x0028, 0x0103, b"US", us(0)),
        explicit(0x7FE0, 0x0010, b"OB", bytes(12)),
    ])
    return meta_group(EXPLICIT_LE) + ds


def compressed() -> bytes:
    return meta_group(JPEG_LOSSLESS) + explicit(0x0028, 0x0010, b"US", us(2))


def signed() -> bytes:
    ds = b"".join([
        explicit(0x0028, 0x0002, b"US", us(1)),
        explicit(0x0028, 0x0004, b"CS", b"MONOCHROME2"),
        explicit(0x0028, 0x0010, b"US", us(2)),
        explicit(0x0028, 0x0011, b"US", us(2)),
        explicit(0x0028, 0x0100, b"US", us(16)),
        explicit(0x0028, 0x0101, b"US", us(16)),
        explicit(0x0028, 0x0103, b"US", us(1)),   # signed
        explicit(0x7FE0, 0x0010, b"OW", pixel_bytes_16([0, 1, 2, 3])),
    ])
    return meta_group(EXPLICIT_LE) + ds


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    fixtures = {
        "explicit_le_12bit.dcm": explicit_12bit(),
        "implicit_le_8bit.dcm": implicit_8bit(),
        "mono1_16bit.dcm": mono1_16bit(),
        "rgb.dcm": rgb(),
        "compressed_ts.dcm": compressed(),
        "signed.dcm": signed(),
    }
    for name, data in fixtures.items():
        (OUT / name).write_bytes(data)
        print(f"wrote {name}: {len(data)} bytes")
    print("expected 12-bit samples:", SAMPLES_12BIT)
    print("expected 8-bit samples:", SAMPLES_8BIT)
    print("expected mono1 samples:", SAMPLES_MONO1)


if __name__ == "__main__":
    main()
