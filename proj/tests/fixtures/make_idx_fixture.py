#!/usr/bin/env python3
"""Writes the handcrafted IDX fixtures used by the loader tests.

four-images.idx: 4 images of 28x28, pixel (k, r, c) = (37k + 5r + 3c) mod 256
four-labels.idx: labels 3, 1, 4, 1
bad-magic.idx:   label file with magic 0x00000802
empty.idx:       zero bytes
"""
import pathlib
import struct

here = pathlib.Path(__file__).resolve().parent

pixels = bytes((37 * k + 5 * r + 3 * c) % 256 for k in range(4) for r in range(28) for c in range(28))
(here / "four-images.idx").write_bytes(struct.pack(">IIII", 0x00000803, 4, 28, 28) + pixels)
(here / "four-labels.idx").write_bytes(struct.pack(">II", 0x00000801, 4) + bytes([3, 1, 4, 1]))
(here / "bad-magic.idx").write_bytes(struct.pack(">II", 0x00000802, 4) + bytes([3, 1, 4, 1]))
(here / "empty.idx").write_bytes(b"")
