"""Local maxima of a CIR and their topographic properties.

Peak-ness is decided on the normalized magnitude CIR.  A peak is an
interior sample strictly above its left neighbour and at least as high as
its right neighbour; runs of equal samples (plateaus) count once and
report the run's left-midpoint index.  Runs touching either array end are
ramps, not peaks.

Prominence follows the topographic definition: walk outward from the peak
on each side until a strictly higher sample or the array end, take each
side's minimum, and measure down to the higher of the two minima.  Width
is the horizontal extent at half prominence, located by linear
interpolation between bracketing samples.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class RawPeak:
    """One detected CIR peak and its shape properties.

    ``index`` is the integer tap, ``refined_index`` the sub-sample vertex
    estimate (equal to ``index`` when refinement is off; never more than
    half a tap away from it).  ``truncated`` marks a width measurement
    clipped at an array end.
    """

    index: int
    refined_index: float
    amplitude_norm: float
    amplitude_raw: float
    prominence: float
    width: float
    truncated: bool = False


def _samples(x) -> np.ndarray:
    samples = getattr(x, "samples", x)
    return np.asarray(samples, dtype=float)


def find_local_maxima(x) -> list[int]:
    """Indices of interior local maxima, one per plateau.

    Accepts a NormalizedCir, MagnitudeCir or plain array.
    """
    y = _samples(x)
    n = len(y)
    out = []
    k = 1
    while k < n - 1:
        if y[k] <= y[k - 1]:
            k += 1
            continue
        # y[k] rises above its left neighbour; extend over the plateau.
        right = k
        while right < n - 1 and y[right + 1] == y[k]:
            right += 1
        if right < n - 1 and y[right + 1] < y[k]:
            out.append((k + right) // 2)
        # A run reaching the last sample is a ramp into the edge: no peak.
        k = right + 1
    return out


def prominence(x, k: int) -> float:
    """Height of peak ``k`` above the higher of its two side minima.

    Each side is scanned outward until a strictly higher sample or the
    array end; equal-height samples do not stop the scan.
    """
    y = _samples(x)
    n = len(y)
    peak = y[k]

    left_min = peak
    j = k - 1
    while j >= 0 and y[j] <= peak:
        if y[j] < left_min:
            left_min = y[j]
        j -= 1

    right_min = peak
    j = k + 1
    while j < n and y[j] <= peak:
        if y[j] < right_min:
            right_min = y[j]
        j += 1

    return float(peak - max(left_min, right_min))


def _half_prominence_crossings(y: np.ndarray, k: int, prom: float):
    """Interpolated positions where the CIR falls to half prominence.

    Returns (left_x, right_x, truncated); a side with no crossing before
    the array end is clipped at that end and flagged.
    """
    n = len(y)
    height = y[k] - prom / 2.0

    left_x = 0.0
    truncated = True
    for j in range(k - 1, -1, -1):
        if y[j] <= height:
            # crossing between j and j+1
            left_x = j + (height - y[j]) / (y[j + 1] - y[j])
            truncated = False
            break
    left_trunc = truncated

    right_x = float(n - 1)
    truncated = True
    for j in range(k + 1, n):
        if y[j] <= height:
            right_x = j - (height - y[j]) / (y[j - 1] - y[j])
            truncated = False
            break

    return left_x, right_x, left_trunc or truncated


def width_at_half_prominence(x, k: int, prom: float) -> float:
    """Width of peak ``k`` at the height (peak - prominence / 2), in taps."""
    if prom <= 0.0:
        raise ValueError("width needs a positive prominence")
    y = _samples(x)
    left_x, right_x, _ = _half_prominence_crossings(y, k, prom)
    return float(right_x - left_x)


def refine_peak_index(x, k: int) -> float:
    """Sub-sample vertex via a parabola through the peak and its neighbours.

    The offset is clamped to half a tap; a flat three-point neighbourhood
    keeps the integer index.
    """
    y = _samples(x)
    if k <= 0 or k >= len(y) - 1:
        return float(k)
    denom = y[k - 1] - 2.0 * y[k] + y[k + 1]
    if denom == 0.0:
        return float(k)
    delta = 0.5 * (y[k - 1] - y[k + 1]) / denom
    return k + float(np.clip(delta, -0.5, 0.5))


def detect_peaks(norm, mag, refine: bool = True) -> list[RawPeak]:
    """All interior peaks of a normalized CIR with their properties.

    ``norm`` drives detection and the shape measurements; ``mag`` supplies
    the raw amplitude each peak had before normalization.
    """
    y = _samples(norm)
    raw = _samples(mag)
    out = []
    for k in find_local_maxima(y):
        prom = prominence(y, k)
        if prom <= 0.0:
            continue
        left_x, right_x, truncated = _half_prominence_crossings(y, k, prom)
        out.append(RawPeak(
            index=k,
            refined_index=refine_peak_index(y, k) if refine else float(k),
            amplitude_norm=float(y[k]),
            amplitude_raw=float(raw[k]),
            prominence=prom,
            width=float(right_x - left_x),
            truncated=truncated,
        ))
    return out
