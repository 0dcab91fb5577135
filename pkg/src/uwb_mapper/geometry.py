"""From filtered peaks to world-frame obstacle points.

The transmitter and the receiving antenna pair sit a fixed baseline
apart, so each CIR delay pins the obstacle to an ellipse with the TX and
RX at its foci.  The phase difference between the two RX antennas gives
the arrival angle, and the triangle TX / RX / obstacle then has a closed
form for the RX-to-obstacle range:

    r = (d^2 - b^2) / (2 (d + b sin(theta)))

with ``d`` the total TX-obstacle-RX path, ``b`` the TX-RX baseline and
``theta`` the arrival angle off boresight.  The sine appears because the
baseline runs 90 degrees clockwise from boresight: the transmitter sits
at receiver-relative (0, -b).  Angles are positive counter-clockwise.
"""

import json
import math
from dataclasses import dataclass, replace

from .capture import Channel, Pose, wrap_angle

SPEED_OF_LIGHT_CM_PER_NS = 29.9792458

# Fallback TX-RX baseline when no mounting survey is available, in cm.
DEFAULT_BASELINE_CM = 20.0

# Antenna spacing is slightly under half a wavelength, which compresses
# the phase-to-angle map by this factor.
AOA_SPACING_COEFF = 0.95

# Per-channel calibration offsets subtracted from range and angle.
DISTANCE_BIAS_CM = {Channel.CH5: 15.0, Channel.CH9: 13.0}
AOA_BIAS_RAD = {Channel.CH5: 0.0522, Channel.CH9: 0.0209}


class FrameDropped(ValueError):
    """Geometry rejected this frame (non-physical path or range)."""


@dataclass(frozen=True)
class GeometryParams:
    """Antenna geometry and calibration for one receiver."""

    d_tx_rx: float = DEFAULT_BASELINE_CM
    aoa_coeff: float = AOA_SPACING_COEFF
    bias_cm: float = 0.0
    bias_aoa_rad: float = 0.0
    sample_interval_ns: float = 1.0
    baseline_in_delay: bool = True
    c: float = SPEED_OF_LIGHT_CM_PER_NS

    def __post_init__(self):
        if self.d_tx_rx < 0.0:
            raise ValueError("baseline must be non-negative")
        if not 0.0 < self.aoa_coeff <= 1.0:
            raise ValueError("aoa coefficient must be in (0, 1]")
        if self.sample_interval_ns <= 0.0 or self.c <= 0.0:
            raise ValueError("sample interval and c must be positive")


@dataclass(frozen=True)
class Mount:
    """Receiver offset from the robot body frame: cm and radians."""

    dx: float = 0.0
    dy: float = 0.0
    dyaw: float = 0.0


IDENTITY_MOUNT = Mount()


@dataclass(frozen=True)
class DetectedPoint:
    """One world-frame obstacle detection from one frame."""

    x: float
    y: float
    snr_score: float
    timestamp_ms: int
    receiver_id: str
    aoa: float
    range_rx: float


def geometry_preset(channel: Channel | int,
                    d_tx_rx: float = DEFAULT_BASELINE_CM) -> GeometryParams:
    """Calibrated geometry for one channel."""
    channel = Channel(channel)
    return GeometryParams(d_tx_rx=d_tx_rx,
                          bias_cm=DISTANCE_BIAS_CM[channel],
                          bias_aoa_rad=AOA_BIAS_RAD[channel])


def load_geometry_overrides(params: GeometryParams, source) -> GeometryParams:
    """Apply overrides from a JSON parameters file or dict."""
    if not isinstance(source, dict):
        with open(source) as fh:
            source = json.load(fh)
    fields = {}
    for key in ("d_tx_rx", "aoa_coeff", "bias_cm", "bias_aoa_rad",
                "sample_interval_ns", "c"):
        if key in source:
            fields[key] = float(source[key])
    if "baseline_in_delay" in source:
        fields["baseline_in_delay"] = bool(source["baseline_in_delay"])
    return replace(params, **fields)


def aoa_from_pdoa(alpha: float, params: GeometryParams) -> float:
    """Arrival angle off boresight for a phase difference ``alpha``.

    Inverts the spacing-compressed phase map and subtracts the per-channel
    angle calibration offset.
    """
    if abs(alpha) > math.pi:
        raise ValueError(f"phase difference {alpha} outside [-pi, pi]")
    return math.asin(alpha / math.pi) / params.aoa_coeff - params.bias_aoa_rad


def total_path_length(refined_index: float, first_path_index: float,
                      params: GeometryParams) -> float:
    """Total TX-obstacle-RX path length for one peak, in cm.

    CIR delay is measured from the first path, which already traversed
    the TX-RX baseline, so the baseline is added back by default
    (``baseline_in_delay``).  Subtracts the per-channel range calibration
    offset.  A result not exceeding the baseline cannot come from a
    reflection and drops the frame.
    """
    delay_ns = (refined_index - first_path_index) * params.sample_interval_ns
    d = delay_ns * params.c - params.bias_cm
    if params.baseline_in_delay:
        d += params.d_tx_rx
    if d <= params.d_tx_rx:
        raise FrameDropped(
            f"path {d:.2f} cm does not exceed the {params.d_tx_rx:.2f} cm baseline"
        )
    return d


def range_from_rx(d: float, theta: float, params: GeometryParams) -> float:
    """Receiver-to-obstacle range on the delay ellipse, in cm."""
    b = params.d_tx_rx
    if d <= b:
        raise FrameDropped(f"path {d:.2f} cm inside the {b:.2f} cm baseline")
    r = (d * d - b * b) / (2.0 * (d + b * math.sin(theta)))
    if r <= 0.0:
        raise FrameDropped(f"non-positive range {r:.2f} cm")
    return r


def receiver_world(pose: Pose, mount: Mount = IDENTITY_MOUNT):
    """World position and boresight heading of a mounted receiver."""
    cos_y = math.cos(pose.yaw)
    sin_y = math.sin(pose.yaw)
    rx_x = pose.x + cos_y * mount.dx - sin_y * mount.dy
    rx_y = pose.y + sin_y * mount.dx + cos_y * mount.dy
    return rx_x, rx_y, wrap_angle(pose.yaw + mount.dyaw)


def to_world_frame(range_rx: float, theta: float, pose: Pose,
                   mount: Mount = IDENTITY_MOUNT, *, snr_score: float = 0.0,
                   timestamp_ms: int = 0, receiver_id: str = "") -> DetectedPoint:
    """Project a receiver-relative polar detection into the world frame."""
    rx_x, rx_y, heading = receiver_world(pose, mount)
    bearing = heading + theta
    return DetectedPoint(
        x=rx_x + range_rx * math.cos(bearing),
        y=rx_y + range_rx * math.sin(bearing),
        snr_score=snr_score,
        timestamp_ms=timestamp_ms,
        receiver_id=receiver_id,
        aoa=theta,
        range_rx=range_rx,
    )
