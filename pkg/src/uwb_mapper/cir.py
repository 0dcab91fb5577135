"""CIR conditioning: magnitude, phase, noise floor, normalization."""

import math
from dataclasses import dataclass

import numpy as np

# Leading taps recorded before the first path arrives; their RMS is the
# noise-floor reference for the SNR score.
NOISE_FLOOR_SAMPLES = 4


@dataclass
class MagnitudeCir:
    """Magnitude CIR with the noise-floor region stripped off."""

    samples: np.ndarray
    noise_rms: float
    first_path_index: int


@dataclass
class PhaseCir:
    """Per-tap phase in (-pi, pi]; ``degenerate`` flags (0, 0) inputs."""

    samples: np.ndarray
    degenerate: np.ndarray


@dataclass
class NormalizedCir:
    samples: np.ndarray
    scale_min: float
    scale_max: float
    degenerate: bool = False


def magnitude(cir) -> np.ndarray:
    """Tap-wise magnitude sqrt(I^2 + Q^2) of a complex CIR."""
    return np.abs(np.asarray(cir, dtype=np.complex128))


def phase(cir) -> PhaseCir:
    """Tap-wise full-quadrant phase of a complex CIR.

    Uses the two-argument arctangent so all four quadrants resolve, then
    folds the -pi branch edge onto +pi.  Zero-valued taps have no defined
    phase; they map to 0 and are flagged in the ``degenerate`` mask.
    """
    arr = np.asarray(cir, dtype=np.complex128)
    ph = np.arctan2(arr.imag, arr.real)
    ph[ph == -math.pi] = math.pi
    degenerate = (arr.real == 0.0) & (arr.imag == 0.0)
    ph[degenerate] = 0.0
    return PhaseCir(samples=ph, degenerate=degenerate)


def split_noise_floor(mag, first_path_index: int = 0,
                      n_noise: int = NOISE_FLOOR_SAMPLES) -> MagnitudeCir:
    """Strip the leading noise-floor taps from a magnitude CIR.

    The RMS of the stripped taps becomes the noise reference.  The
    first-path index is re-based to the trimmed array (clamped at 0 when
    the input index already sat inside the noise region).
    """
    mag = np.asarray(mag, dtype=float)
    if len(mag) <= n_noise:
        raise ValueError(f"CIR of {len(mag)} samples leaves no signal region")
    if np.any(mag < 0.0):
        raise ValueError("magnitude CIR must be non-negative")
    noise_rms = math.sqrt(float(np.mean(mag[:n_noise] ** 2)))
    return MagnitudeCir(
        samples=mag[n_noise:].copy(),
        noise_rms=noise_rms,
        first_path_index=max(0, int(first_path_index) - n_noise),
    )


def minmax_normalize(mag) -> NormalizedCir:
    """Rescale a magnitude CIR to [0, 1].

    A constant array cannot be rescaled; it maps to all zeros with the
    ``degenerate`` flag set so callers can skip the frame.
    """
    if isinstance(mag, MagnitudeCir):
        samples = mag.samples
    else:
        samples = np.asarray(mag, dtype=float)
    lo = float(np.min(samples))
    hi = float(np.max(samples))
    if hi == lo:
        return NormalizedCir(samples=np.zeros_like(samples, dtype=float),
                             scale_min=lo, scale_max=hi, degenerate=True)
    return NormalizedCir(samples=(samples - lo) / (hi - lo),
                         scale_min=lo, scale_max=hi)
