"""Multi-criteria peak filtering.

Every CIR peak is scored on four properties and must clear all four
thresholds to survive:

* width at half prominence (taps),
* prominence on the normalized CIR,
* SNR score: 20 log10(amplitude / noise RMS) plus a delay bonus that
  compensates two-way path loss, using the raw amplitude,
* phase difference of arrival between the two RX antennas, which must
  fall inside the usable field of view.

Thresholds are tuned per channel and obstacle material; the built-in
presets can be overridden from a JSON parameters file.
"""

import json
import math
from dataclasses import dataclass, replace
from enum import Enum

from .capture import Channel
from .peaks import RawPeak

# Delay bonus per tap of CIR delay, in dB.
SNR_DELAY_WEIGHT = 0.20

# Phase-difference bound mapping to the +/-45 deg usable field of view.
PDOA_GATE_RAD = 2.1325


class Material(str, Enum):
    METAL = "metal"
    CONCRETE = "concrete"
    PLYWOOD = "plywood"
    OVERALL = "overall"


@dataclass(frozen=True)
class FilterParams:
    """Per-peak acceptance thresholds (all comparisons inclusive)."""

    width_min: float
    prominence_min: float
    snr_min: float
    k: float = SNR_DELAY_WEIGHT
    pdoa_gate: float = PDOA_GATE_RAD

    def __post_init__(self):
        if min(self.width_min, self.prominence_min) < 0.0 or self.k < 0.0:
            raise ValueError("thresholds must be non-negative")
        if not 0.0 < self.pdoa_gate <= math.pi:
            raise ValueError(f"pdoa gate {self.pdoa_gate} outside (0, pi]")


@dataclass(frozen=True)
class ScoredPeak:
    raw: RawPeak
    snr_score: float
    delay_samples: int
    pdoa: float


# (width_min, prominence_min, snr_min) tuned per channel and material;
# "overall" is the single compromise row used when the material is unknown.
_PRESETS = {
    (Channel.CH5, Material.METAL): (1.0, 0.04, 25.0),
    (Channel.CH5, Material.CONCRETE): (1.0, 0.05, 20.0),
    (Channel.CH5, Material.PLYWOOD): (1.0, 0.02, 15.0),
    (Channel.CH5, Material.OVERALL): (1.0, 0.05, 20.0),
    (Channel.CH9, Material.METAL): (1.0, 0.05, 20.0),
    (Channel.CH9, Material.CONCRETE): (2.0, 0.03, 10.0),
    (Channel.CH9, Material.PLYWOOD): (0.10, 0.01, 10.0),
    (Channel.CH9, Material.OVERALL): (0.20, 0.03, 10.0),
}


def threshold_preset(channel: Channel | int,
                     material: Material | str = Material.OVERALL) -> FilterParams:
    """Built-in thresholds for one channel/material combination."""
    width_min, prominence_min, snr_min = _PRESETS[
        (Channel(channel), Material(material))
    ]
    return FilterParams(width_min=width_min, prominence_min=prominence_min,
                        snr_min=snr_min)


def load_filter_overrides(params: FilterParams, source) -> FilterParams:
    """Apply overrides from a JSON parameters file or dict.

    Unknown keys are ignored here; they may belong to the geometry or
    clustering sections of a shared file.
    """
    if not isinstance(source, dict):
        with open(source) as fh:
            source = json.load(fh)
    fields = {k: float(v) for k, v in source.items()
              if k in ("width_min", "prominence_min", "snr_min", "k", "pdoa_gate")}
    return replace(params, **fields)


def snr_score(amplitude_raw: float, noise_rms: float, delay_samples: int,
              k: float = SNR_DELAY_WEIGHT) -> float:
    """Delay-compensated SNR of one peak, in dB.

    Distant reflections lose amplitude to two-way spreading, so each tap
    of delay earns ``k`` dB back.  A zero amplitude scores -inf (never
    passes); a zero noise floor scores +inf (always passes).
    """
    if amplitude_raw < 0.0 or noise_rms < 0.0 or delay_samples < 0:
        raise ValueError("amplitude, noise and delay must be non-negative")
    if amplitude_raw == 0.0:
        return -math.inf
    if noise_rms == 0.0:
        return math.inf
    return 20.0 * math.log10(amplitude_raw / noise_rms) + k * delay_samples


def pdoa(phase_a: float, phase_b: float) -> float:
    """Phase difference between the two RX antennas, wrapped to [-pi, pi)."""
    wrapped = (-phase_a + phase_b + math.pi) % (2.0 * math.pi) - math.pi
    # float % may round up to the modulus itself for tiny negative inputs
    return wrapped if wrapped < math.pi else wrapped - 2.0 * math.pi


def score_peaks(raw_peaks, mag, phase_a, phase_b,
                k: float = SNR_DELAY_WEIGHT) -> list[ScoredPeak]:
    """Attach SNR score and PDoA to detected peaks.

    Peaks at or before the first path carry no obstacle information and
    are dropped; candidates keep at least one tap of delay.
    """
    out = []
    for pk in raw_peaks:
        delay = pk.index - mag.first_path_index
        if delay < 1:
            continue
        out.append(ScoredPeak(
            raw=pk,
            snr_score=snr_score(pk.amplitude_raw, mag.noise_rms, delay, k),
            delay_samples=delay,
            pdoa=pdoa(float(phase_a.samples[pk.index]),
                      float(phase_b.samples[pk.index])),
        ))
    return out


def apply_filters(peaks, params: FilterParams) -> list[ScoredPeak]:
    """Keep peaks clearing every threshold, preserving input order."""
    return [p for p in peaks
            if p.raw.width >= params.width_min
            and p.raw.prominence >= params.prominence_min
            and p.snr_score >= params.snr_min
            and abs(p.pdoa) <= params.pdoa_gate]


def select_target_peak(survivors) -> ScoredPeak | None:
    """The survivor with the highest raw amplitude; earliest tap on ties."""
    best = None
    for p in survivors:
        if (best is None or p.raw.amplitude_raw > best.raw.amplitude_raw
                or (p.raw.amplitude_raw == best.raw.amplitude_raw
                    and p.raw.index < best.raw.index)):
            best = p
    return best
