"""Capture records and dataset ingest.

The canonical interchange format is JSONL, one capture per line:

    {"t_ms": 0, "ch": 9, "rx": "front", "fp_idx": 8,
     "pose": {"x": 0.0, "y": 0.0, "yaw": 0.0},
     "pre": [[i, q], ...], "sts1": [[i, q], ...], "sts2": [[i, q], ...]}

``pre`` holds the preamble CIR used for peak detection; ``sts1`` and
``sts2`` hold the per-antenna scrambled-timestamp-sequence CIRs whose
phase difference carries the angle of arrival.  A flattened CSV variant
(``pre_i0, pre_q0, ...`` columns) is accepted for spreadsheet exports.
All ingest funnels through ``CirCapture`` so downstream stages never see
format quirks.
"""

import csv
import json
import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

# Hardware pushes one capture per ranging round at 96 Hz.
UPDATE_RATE_HZ = 96.0
FRAME_INTERVAL_MS = 1000.0 / UPDATE_RATE_HZ

# Largest finite stand-in for +/-infinity in JSON artifacts (JSON has no
# Infinity literal and the score sentinels must survive serialization).
JSON_FLOAT_CLAMP = 1e308


class Channel(IntEnum):
    CH5 = 5
    CH9 = 9


class CaptureError(ValueError):
    """Malformed capture record; message carries the source line number."""


class StreamOrderError(CaptureError):
    """Timestamps went backwards within one capture stream."""


def wrap_angle(angle: float) -> float:
    """Wrap an angle in radians to the half-open interval (-pi, pi]."""
    wrapped = math.pi - (math.pi - angle) % (2.0 * math.pi)
    # float % may round up to the modulus itself for tiny negative inputs
    return wrapped if wrapped > -math.pi else math.pi


def fractional_bandwidth(f_high_hz: float, f_low_hz: float) -> float:
    """Bandwidth divided by the arithmetic mean of the band edges.

    Radios qualify as ultra-wideband when this exceeds 0.2 or the absolute
    bandwidth exceeds 500 MHz.
    """
    if not (f_high_hz > f_low_hz > 0.0):
        raise ValueError(
            f"need f_high > f_low > 0, got f_high={f_high_hz} f_low={f_low_hz}"
        )
    return (f_high_hz - f_low_hz) / ((f_high_hz + f_low_hz) / 2.0)


@dataclass(frozen=True)
class ComplexSample:
    """One I/Q pair of a CIR tap."""

    i: float
    q: float

    def __post_init__(self):
        if not (math.isfinite(self.i) and math.isfinite(self.q)):
            raise ValueError(f"non-finite I/Q sample ({self.i}, {self.q})")


@dataclass(frozen=True)
class Pose:
    """Robot pose in the world frame: x/y in cm, yaw in radians.

    Yaw is normalized to (-pi, pi] at construction.
    """

    x: float
    y: float
    yaw: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.yaw)):
            raise ValueError(f"non-finite pose ({self.x}, {self.y}, {self.yaw})")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))


@dataclass(frozen=True)
class RadioConfig:
    """Static radio parameters of one UWB channel."""

    center_frequency_hz: float
    bandwidth_hz: float
    update_rate_hz: float = UPDATE_RATE_HZ
    sample_interval_ns: float = 1.0

    def __post_init__(self):
        # UWB channels are at least 499.2 MHz wide.
        if self.bandwidth_hz < 499e6:
            raise ValueError(f"bandwidth {self.bandwidth_hz} Hz below the UWB minimum")
        if self.sample_interval_ns <= 0.0:
            raise ValueError("sample interval must be positive")
        if self.center_frequency_hz <= 0.0 or self.update_rate_hz <= 0.0:
            raise ValueError("frequency and update rate must be positive")


CH5_RADIO = RadioConfig(center_frequency_hz=6.5e9, bandwidth_hz=500e6)
CH9_RADIO = RadioConfig(center_frequency_hz=8.0e9, bandwidth_hz=500e6)


def radio_preset(channel: Channel | int) -> RadioConfig:
    return CH5_RADIO if Channel(channel) is Channel.CH5 else CH9_RADIO


@dataclass(eq=False)
class CirCapture:
    """One radar frame from one receiver.

    The three CIR arrays are complex128 and share a common length of at
    least 8 taps; ``first_path_index`` points at the direct-path tap in
    those arrays, leaving room for the leading noise-floor region.
    """

    timestamp_ms: int
    channel: Channel
    receiver_id: str
    preamble_cir: np.ndarray
    sts1_cir: np.ndarray
    sts2_cir: np.ndarray
    first_path_index: int
    pose: Pose

    def __post_init__(self):
        self.channel = Channel(self.channel)
        self.preamble_cir = _as_cir_array(self.preamble_cir, "pre")
        self.sts1_cir = _as_cir_array(self.sts1_cir, "sts1")
        self.sts2_cir = _as_cir_array(self.sts2_cir, "sts2")
        n = len(self.preamble_cir)
        if n < 8:
            raise CaptureError(f"CIR length {n} below the minimum of 8")
        for name, arr in (("sts1", self.sts1_cir), ("sts2", self.sts2_cir)):
            if len(arr) != n:
                raise CaptureError(
                    f"length mismatch: {name}_cir has {len(arr)} samples, pre has {n}"
                )
        if not (0 <= self.first_path_index < n - 4):
            raise CaptureError(
                f"first_path_index {self.first_path_index} outside [0, {n - 4})"
            )

    def __len__(self) -> int:
        return len(self.preamble_cir)


def _as_cir_array(samples, name: str) -> np.ndarray:
    """Coerce [[i, q], ...] pairs or a complex array to complex128."""
    arr = np.asarray(samples)
    if arr.ndim == 2 and arr.shape[1] == 2:
        arr = arr[:, 0] + 1j * arr[:, 1]
    arr = np.asarray(arr, dtype=np.complex128)
    if arr.ndim != 1:
        raise CaptureError(f"{name}_cir is not a flat sample sequence")
    if not np.all(np.isfinite(arr.real) & np.isfinite(arr.imag)):
        raise CaptureError(f"{name}_cir contains non-finite samples")
    return arr


def estimate_first_path(mag: np.ndarray, n_noise: int = 4, factor: float = 6.0) -> int:
    """Fallback first-path locator for records without a hardware index.

    Returns the first tap after the noise-floor region whose magnitude
    exceeds ``factor`` times the noise RMS.
    """
    mag = np.asarray(mag, dtype=float)
    if len(mag) <= n_noise:
        raise CaptureError(f"capture of {len(mag)} samples has no signal region")
    rms = math.sqrt(float(np.mean(mag[:n_noise] ** 2)))
    above = np.flatnonzero(mag[n_noise:] > factor * rms)
    if len(above) == 0:
        raise CaptureError("no sample exceeds the first-path threshold")
    return int(above[0]) + n_noise


# --- JSONL ---------------------------------------------------------------


def _capture_from_obj(obj: dict, line_no: int) -> CirCapture:
    try:
        pose = obj["pose"]
        fp = obj.get("fp_idx")
        pre = obj["pre"]
        cap = CirCapture(
            timestamp_ms=int(obj["t_ms"]),
            channel=Channel(int(obj["ch"])),
            receiver_id=str(obj["rx"]),
            preamble_cir=pre,
            sts1_cir=obj["sts1"],
            sts2_cir=obj["sts2"],
            first_path_index=int(fp) if fp is not None
            else estimate_first_path(np.abs(_as_cir_array(pre, "pre"))),
            pose=Pose(float(pose["x"]), float(pose["y"]), float(pose["yaw"])),
        )
    except CaptureError as exc:
        raise CaptureError(f"line {line_no}: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise CaptureError(f"line {line_no}: bad capture record ({exc})") from None
    return cap


def _pairs(arr: np.ndarray) -> list:
    return [[float(s.real), float(s.imag)] for s in arr]


def capture_to_obj(cap: CirCapture) -> dict:
    return {
        "t_ms": cap.timestamp_ms,
        "ch": int(cap.channel),
        "rx": cap.receiver_id,
        "fp_idx": cap.first_path_index,
        "pose": {"x": cap.pose.x, "y": cap.pose.y, "yaw": cap.pose.yaw},
        "pre": _pairs(cap.preamble_cir),
        "sts1": _pairs(cap.sts1_cir),
        "sts2": _pairs(cap.sts2_cir),
    }


def serialize_capture(cap: CirCapture) -> str:
    """One JSONL line; floats use shortest-round-trip precision."""
    return json.dumps(capture_to_obj(cap), separators=(",", ":"))


# --- CSV -----------------------------------------------------------------

_CSV_FIXED = ["t_ms", "ch", "rx", "fp_idx", "pose_x", "pose_y", "pose_yaw"]


def csv_header(n_samples: int) -> list[str]:
    cols = list(_CSV_FIXED)
    for prefix in ("pre", "sts1", "sts2"):
        for k in range(n_samples):
            cols += [f"{prefix}_i{k}", f"{prefix}_q{k}"]
    return cols


def capture_to_csv_row(cap: CirCapture) -> list:
    row = [cap.timestamp_ms, int(cap.channel), cap.receiver_id,
           cap.first_path_index, cap.pose.x, cap.pose.y, cap.pose.yaw]
    for arr in (cap.preamble_cir, cap.sts1_cir, cap.sts2_cir):
        for s in arr:
            row += [float(s.real), float(s.imag)]
    return row


def _capture_from_csv_row(row: list[str], n_samples: int, line_no: int) -> CirCapture:
    expect = len(_CSV_FIXED) + 6 * n_samples
    if len(row) != expect:
        raise CaptureError(f"line {line_no}: expected {expect} fields, got {len(row)}")
    try:
        vals = [float(v) for v in row[len(_CSV_FIXED):]]
        arrs = []
        for b in range(3):
            block = vals[b * 2 * n_samples:(b + 1) * 2 * n_samples]
            arrs.append(np.array(block[0::2]) + 1j * np.array(block[1::2]))
        fp_field = row[3].strip()
        return CirCapture(
            timestamp_ms=int(row[0]),
            channel=Channel(int(row[1])),
            receiver_id=row[2],
            preamble_cir=arrs[0],
            sts1_cir=arrs[1],
            sts2_cir=arrs[2],
            first_path_index=int(fp_field) if fp_field not in ("", "-1")
            else estimate_first_path(np.abs(arrs[0])),
            pose=Pose(float(row[4]), float(row[5]), float(row[6])),
        )
    except CaptureError as exc:
        raise CaptureError(f"line {line_no}: {exc}") from None
    except ValueError as exc:
        raise CaptureError(f"line {line_no}: non-numeric field ({exc})") from None


# --- stream parsing ------------------------------------------------------


def parse_capture_stream(source, fmt: str = "jsonl"):
    """Yield ``CirCapture`` records from a file path or text stream.

    Records must arrive in non-decreasing timestamp order (ties are fine,
    several receivers may share one frame); a violation raises
    ``StreamOrderError``.  Malformed lines raise ``CaptureError`` naming
    the line number.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", newline="") as fh:
            yield from parse_capture_stream(fh, fmt=fmt)
        return

    last_t = None
    if fmt == "jsonl":
        for line_no, line in enumerate(source, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CaptureError(f"line {line_no}: invalid JSON ({exc})") from None
            cap = _capture_from_obj(obj, line_no)
            last_t = _check_order(cap, last_t, line_no)
            yield cap
    elif fmt == "csv":
        reader = csv.reader(source)
        header = next(reader, None)
        if header is None:
            return
        n_pre = sum(1 for c in header if c.startswith("pre_i"))
        if n_pre == 0 or header[:len(_CSV_FIXED)] != _CSV_FIXED:
            raise CaptureError("line 1: unrecognized CSV header")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            cap = _capture_from_csv_row(row, n_pre, line_no)
            last_t = _check_order(cap, last_t, line_no)
            yield cap
    else:
        raise ValueError(f"unknown capture format {fmt!r}")


def _check_order(cap: CirCapture, last_t, line_no: int) -> int:
    if last_t is not None and cap.timestamp_ms < last_t:
        raise StreamOrderError(
            f"line {line_no}: timestamp {cap.timestamp_ms} ms after {last_t} ms"
        )
    return cap.timestamp_ms


def write_captures_jsonl(captures, path) -> int:
    n = 0
    with open(path, "w") as fh:
        for cap in captures:
            fh.write(serialize_capture(cap) + "\n")
            n += 1
    return n


def write_captures_csv(captures, path) -> int:
    n = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header_written = False
        for cap in captures:
            if not header_written:
                writer.writerow(csv_header(len(cap)))
                header_written = True
            writer.writerow(capture_to_csv_row(cap))
            n += 1
    return n


def clamp_json_float(x: float) -> float:
    """Map +/-inf to the largest finite JSON-representable stand-in."""
    if math.isinf(x):
        return JSON_FLOAT_CLAMP if x > 0 else -JSON_FLOAT_CLAMP
    return float(x)
