"""Measured-TDR extraction from timestamped packet reception logs.

The receiver side of a testbed produces a log of decoded packets: reception
time, tag ID, and whether the ID decoded cleanly. TDR is measured by tiling
the log into non-overlapping windows of one inventory period (L * T_cycle)
and counting, per window, the expected tags that never appear.

Trace CSV format (UTF-8, header required, comment lines start with '#'):

    recv_time_s,tag_id,decode_ok
    0.012345,A3,1

decode_ok is 0 or 1; recv_time_s is a decimal number of seconds.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import IO, Iterable

__all__ = ["ReceptionRecord", "TraceTdrReport", "TraceFormatError", "parse_trace", "window_tdr"]

_HEADER = ["recv_time_s", "tag_id", "decode_ok"]


class TraceFormatError(ValueError):
    """Raised on malformed trace input; carries 1-based line numbers."""


@dataclass(frozen=True)
class ReceptionRecord:
    recv_time_s: float
    tag_id: str
    decode_ok: bool

    def __post_init__(self) -> None:
        if self.recv_time_s < 0:
            raise ValueError(f"recv_time_s must be >= 0, got {self.recv_time_s}")


@dataclass(frozen=True)
class TraceTdrReport:
    """Windowed TDR measurement over one trace."""

    l_cycles: int
    t_cycle_s: float
    window_s: float
    n_windows: int
    expected_tags: frozenset[str]
    tdr: float
    per_window_missing: list[int] = field(repr=False)


def parse_trace(source: IO[bytes] | IO[str] | bytes | str) -> list[ReceptionRecord]:
    """Parse a trace CSV into records, in file order.

    Accepts a text or byte stream (or the raw content itself). Raises
    TraceFormatError for a missing/unknown header, an empty file, or any
    malformed line; the message lists the offending line numbers.
    """
    if isinstance(source, bytes):
        text: IO[str] = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str):
        text = io.StringIO(source)
    elif isinstance(source, io.TextIOBase):
        text = source
    else:
        text = io.TextIOWrapper(source, encoding="utf-8")

    records: list[ReceptionRecord] = []
    problems: list[str] = []
    header_seen = False
    for lineno, raw in enumerate(text, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = next(csv.reader([line]))
        if not header_seen:
            if [f.strip() for f in fields] != _HEADER:
                raise TraceFormatError(
                    f"line {lineno}: expected header {','.join(_HEADER)!r}, got {line!r}"
                )
            header_seen = True
            continue
        if len(fields) != 3:
            problems.append(f"line {lineno}: expected 3 fields, got {len(fields)}")
            continue
        time_s, tag, ok = (f.strip() for f in fields)
        try:
            t = float(time_s)
        except ValueError:
            problems.append(f"line {lineno}: non-numeric timestamp {time_s!r}")
            continue
        if t < 0 or math.isnan(t) or math.isinf(t):
            problems.append(f"line {lineno}: invalid timestamp {time_s!r}")
            continue
        if ok not in ("0", "1"):
            problems.append(f"line {lineno}: decode_ok must be 0 or 1, got {ok!r}")
            continue
        records.append(ReceptionRecord(recv_time_s=t, tag_id=tag, decode_ok=ok == "1"))
    if not header_seen:
        raise TraceFormatError("empty trace: no header line found")
    if problems:
        raise TraceFormatError("malformed trace lines: " + "; ".join(problems))
    return records


def window_tdr(
    records: Iterable[ReceptionRecord],
    expected_tags: Iterable[str],
    l_cycles: int,
    t_cycle_s: float,
) -> TraceTdrReport:
    """Measured TDR by windowing a trace into inventory periods.

    Windows of duration l_cycles * t_cycle_s tile [first, first + n * window)
    half-open, anchored at the first record's timestamp; the trailing partial
    window is discarded. A tag appears in a window when at least one of its
    successfully decoded packets falls inside it; records with decode_ok
    false never count. The TDR is the mean missing fraction over windows.
    """
    if l_cycles < 1:
        raise ValueError(f"l_cycles must be >= 1, got {l_cycles}")
    if t_cycle_s <= 0:
        raise ValueError(f"t_cycle_s must be > 0, got {t_cycle_s}")
    tags = frozenset(t.strip() for t in expected_tags)
    if not tags:
        raise ValueError("expected_tags must be non-empty")
    recs = list(records)
    if not recs:
        raise ValueError("no records: cannot form any window")

    window = l_cycles * t_cycle_s
    first = min(r.recv_time_s for r in recs)
    last = max(r.recv_time_s for r in recs)
    n_windows = int(math.floor((last - first) / window))
    if n_windows < 1:
        raise ValueError(
            f"trace spans {last - first:.6g} s, shorter than one window of {window:.6g} s"
        )

    seen: list[set[str]] = [set() for _ in range(n_windows)]
    for r in recs:
        if not r.decode_ok:
            continue
        tag = r.tag_id.strip()
        if tag not in tags:
            continue
        idx = int((r.recv_time_s - first) // window)
        if 0 <= idx < n_windows:
            seen[idx].add(tag)

    per_window_missing = [len(tags) - len(s) for s in seen]
    tdr = sum(per_window_missing) / (n_windows * len(tags))
    return TraceTdrReport(
        l_cycles=l_cycles,
        t_cycle_s=t_cycle_s,
        window_s=window,
        n_windows=n_windows,
        expected_tags=tags,
        tdr=tdr,
        per_window_missing=per_window_missing,
    )
