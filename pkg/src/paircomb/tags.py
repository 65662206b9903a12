"""
QTT1 binary time-tag files.

Layout (little endian):

    header:  magic   4 bytes  b"QTT1"
             version u16      (1)
             tick_ps u32      TDC bin [ps], 81 by default
             n_channels u16
             duration_ticks u64
    records: { timestamp_ticks u64, channel u8 }  packed, 9 bytes each,
             sorted by timestamp (ties in channel order)

Round trips are byte-exact; the reader validates magic, version, record
alignment and sortedness instead of silently truncating.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .detectors import TimeTagStream

MAGIC = b"QTT1"
VERSION = 1
_HEADER = struct.Struct("<4sHIHQ")
_RECORD_DTYPE = np.dtype([("t", "<u8"), ("ch", "u1")])


class TagFileError(ValueError):
    """Malformed or truncated QTT1 file."""


def write_timetags(streams: TimeTagStream | list[TimeTagStream], path: str | Path) -> None:
    """Write one or more tag streams (one channel each) to a QTT1 file."""
    if isinstance(streams, TimeTagStream):
        streams = [streams]
    if not streams:
        raise ValueError("nothing to write")
    tick_s = streams[0].tick_s
    duration_s = max(s.duration_s for s in streams)
    for s in streams:
        if s.tick_s != tick_s:
            raise ValueError("all streams in one file must share one tick")
    tick_ps = int(round(tick_s * 1e12))
    duration_ticks = int(round(duration_s / tick_s))
    n_records = sum(s.n for s in streams)
    records = np.empty(n_records, dtype=_RECORD_DTYPE)
    pos = 0
    for s in streams:
        records["t"][pos : pos + s.n] = s.ticks.astype(np.uint64)
        records["ch"][pos : pos + s.n] = np.uint8(s.channel_id)
        pos += s.n
    order = np.lexsort((records["ch"], records["t"]))
    records = records[order]
    header = _HEADER.pack(MAGIC, VERSION, tick_ps, len(streams), duration_ticks)
    with open(path, "wb") as fh:
        fh.write(header)
        records.tofile(fh)


def read_timetags(path: str | Path) -> list[TimeTagStream]:
    """Read a QTT1 file back into per-channel tag streams."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise TagFileError(f"{path}: file shorter than the header")
    magic, version, tick_ps, n_channels, duration_ticks = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise TagFileError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise TagFileError(f"{path}: unsupported version {version}")
    body = raw[_HEADER.size :]
    if len(body) % _RECORD_DTYPE.itemsize != 0:
        raise TagFileError(f"{path}: truncated record section ({len(body)} bytes)")
    records = np.frombuffer(body, dtype=_RECORD_DTYPE)
    if records.size and np.any(np.diff(records["t"].astype(np.int64)) < 0):
        raise TagFileError(f"{path}: records not sorted by timestamp")
    tick_s = tick_ps * 1e-12
    duration_s = duration_ticks * tick_s
    streams = []
    for ch in np.unique(records["ch"]):
        ticks = records["t"][records["ch"] == ch].astype(np.int64)
        streams.append(TimeTagStream(int(ch), ticks, tick_s, duration_s))
    if len(streams) != n_channels:
        raise TagFileError(
            f"{path}: header claims {n_channels} channels, found {len(streams)}"
        )
    return streams
