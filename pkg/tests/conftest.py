"""Shared builders for the test suite."""

import math

import numpy as np
import pytest

from uwb_mapper.capture import Pose, radio_preset
from uwb_mapper.clustering import ClusterParams
from uwb_mapper.filtering import threshold_preset
from uwb_mapper.geometry import DetectedPoint, GeometryParams
from uwb_mapper.pipeline import PipelineConfig
from uwb_mapper.sim import Scene, SceneObstacle, straight_trajectory


def make_point(x, y, t_ms=0, snr=20.0, rx="front"):
    return DetectedPoint(x=float(x), y=float(y), snr_score=float(snr),
                         timestamp_ms=int(t_ms), receiver_id=rx,
                         aoa=0.0, range_rx=float(math.hypot(x, y)))


def labels_of(points_xy, clusters, noise):
    """Recover an oracle-shaped label list for canonically ordered input."""
    order = sorted(range(len(points_xy)),
                   key=lambda i: (points_xy[i][0], points_xy[i][1]))
    slots = {}
    for rank, i in enumerate(order):
        slots.setdefault(points_xy[i], []).append(rank)
    labels = [None] * len(points_xy)

    def assign(p, value):
        labels[slots[(p.x, p.y)].pop(0)] = value

    for c in clusters:
        for p in c.members:
            assign(p, c.cluster_id)
    for p in noise:
        assign(p, -2)
    return labels


def calibration_free_geometry(**overrides) -> GeometryParams:
    """Channel 9 geometry with both calibration offsets zeroed.

    Synthetic scenes have no hardware biases, so evaluating them with
    the field calibration left in would shift every range on purpose.
    """
    fields = dict(d_tx_rx=20.0, bias_cm=0.0, bias_aoa_rad=0.0)
    fields.update(overrides)
    return GeometryParams(**fields)


def approach_scene(noise_sigma=0.0, seed=1, frames=300,
                   obstacle=(340.0, 0.0), reflect_amp=5.0e4) -> Scene:
    """Straight drive at a single obstacle dead ahead.

    Starts 340 cm out and stops about 100 cm short, the close-range
    regime where both the delay and the phase difference are clean.
    """
    return Scene(
        obstacles=[SceneObstacle(x=obstacle[0], y=obstacle[1],
                                 reflect_amp=reflect_amp, label="plate")],
        trajectory=straight_trajectory(Pose(0.0, 0.0, 0.0),
                                       Pose(240.0, 0.0, 0.0), frames),
        radio=radio_preset(9),
        geometry=calibration_free_geometry(),
        noise_sigma=noise_sigma,
        seed=seed,
    )


def approach_noise_sigma(scene: Scene) -> float:
    """AWGN sigma putting the farthest echo at about 20 dB peak SNR."""
    ob = scene.obstacles[0]
    t0, start = scene.trajectory[0]
    d_rx = math.hypot(ob.x - start.x, ob.y - start.y)
    d_tx = math.hypot(ob.x - start.x, ob.y - start.y + scene.geometry.d_tx_rx)
    far_amp = ob.reflect_amp / (d_rx * d_tx)
    return far_amp / (10.0 * math.sqrt(2.0))


def approach_config(**overrides) -> PipelineConfig:
    fields = dict(filter_params=threshold_preset(9, "overall"),
                  geometry=calibration_free_geometry())
    fields.update(overrides)
    return PipelineConfig(**fields)


@pytest.fixture
def rng():
    return np.random.default_rng(20260818)


@pytest.fixture
def cluster_params():
    return ClusterParams()
