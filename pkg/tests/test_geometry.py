"""Delay-to-range geometry, AoA inversion, world-frame projection."""

import math

import pytest

from oracles import forward_path_reference
from uwb_mapper.capture import Pose
from uwb_mapper.geometry import (
    AOA_SPACING_COEFF,
    DEFAULT_BASELINE_CM,
    SPEED_OF_LIGHT_CM_PER_NS,
    FrameDropped,
    GeometryParams,
    IDENTITY_MOUNT,
    Mount,
    aoa_from_pdoa,
    geometry_preset,
    load_geometry_overrides,
    range_from_rx,
    receiver_world,
    to_world_frame,
    total_path_length,
)


def plain_params(**overrides) -> GeometryParams:
    fields = dict(bias_cm=0.0, bias_aoa_rad=0.0)
    fields.update(overrides)
    return GeometryParams(**fields)


class TestAoa:
    def test_zero_phase_is_boresight(self):
        assert aoa_from_pdoa(0.0, plain_params()) == 0.0

    def test_spacing_compression_inverts(self):
        # a target at exactly 45 deg encodes as pi*sin(0.95 * pi/4)
        alpha = math.pi * math.sin(AOA_SPACING_COEFF * math.pi / 4.0)
        theta = aoa_from_pdoa(alpha, plain_params())
        assert theta == pytest.approx(math.pi / 4.0, abs=1e-12)
        assert aoa_from_pdoa(-alpha, plain_params()) == pytest.approx(-math.pi / 4.0)

    def test_round_trip_over_field_of_view(self):
        p = plain_params()
        for deg in range(-45, 46, 5):
            theta = math.radians(deg)
            alpha = math.pi * math.sin(p.aoa_coeff * theta)
            assert aoa_from_pdoa(alpha, p) == pytest.approx(theta, abs=1e-12)

    def test_calibration_offset_subtracts(self):
        biased = plain_params(bias_aoa_rad=0.0209)
        assert aoa_from_pdoa(0.0, biased) == pytest.approx(-0.0209)

    def test_rejects_out_of_range_phase(self):
        with pytest.raises(ValueError):
            aoa_from_pdoa(3.5, plain_params())


class TestTotalPath:
    def test_delay_times_c(self):
        p = plain_params(baseline_in_delay=False)
        assert total_path_length(14.0, 4.0, p) == pytest.approx(299.792458)

    def test_baseline_added_and_bias_subtracted(self):
        p = GeometryParams(d_tx_rx=20.0, bias_cm=13.0)
        assert total_path_length(14.0, 4.0, p) == pytest.approx(306.792458)

    def test_sample_interval_scales_delay(self):
        p = plain_params(baseline_in_delay=False, sample_interval_ns=2.0)
        assert total_path_length(9.0, 4.0, p) == pytest.approx(
            10.0 * SPEED_OF_LIGHT_CM_PER_NS)

    def test_sub_baseline_path_drops_frame(self):
        p = plain_params(baseline_in_delay=False)
        with pytest.raises(FrameDropped):
            total_path_length(4.5, 4.0, p)


class TestRangeFromRx:
    def test_boresight_ellipse(self):
        p = plain_params()
        assert range_from_rx(700.0, 0.0, p) == pytest.approx(349.71428571428572)

    def test_side_angles_shift_the_denominator(self):
        p = plain_params()
        assert range_from_rx(700.0, math.pi / 2.0, p) == pytest.approx(340.0)
        assert range_from_rx(700.0, -math.pi / 2.0, p) == pytest.approx(360.0)

    def test_monostatic_limit_is_half_path(self):
        p = plain_params(d_tx_rx=0.0)
        assert range_from_rx(250.0, 0.3, p) == pytest.approx(125.0)

    def test_path_inside_baseline_drops_frame(self):
        with pytest.raises(FrameDropped):
            range_from_rx(19.0, 0.0, plain_params())

    def test_forward_model_round_trip(self, rng):
        for _ in range(500):
            r = float(rng.uniform(30.0, 500.0))
            theta = float(rng.uniform(-math.pi / 4.0, math.pi / 4.0))
            b = float(rng.uniform(0.0, 50.0))
            d = forward_path_reference(r, theta, b)
            got = range_from_rx(d, theta, plain_params(d_tx_rx=b))
            assert got == pytest.approx(r, abs=1e-9)


class TestReceiverWorld:
    def test_identity_mount_is_the_pose(self):
        assert receiver_world(Pose(3.0, 4.0, 0.5)) == (3.0, 4.0, 0.5)

    def test_mount_offset_rotates_with_yaw(self):
        x, y, h = receiver_world(Pose(0.0, 0.0, math.pi / 2.0),
                                 Mount(dx=10.0, dy=0.0, dyaw=0.1))
        assert x == pytest.approx(0.0, abs=1e-12)
        assert y == pytest.approx(10.0)
        assert h == pytest.approx(math.pi / 2.0 + 0.1)

    def test_heading_wraps(self):
        _, _, h = receiver_world(Pose(0.0, 0.0, math.pi),
                                 Mount(dyaw=math.pi))
        assert -math.pi < h <= math.pi


class TestToWorldFrame:
    def test_boresight_detection_lands_ahead(self):
        p = to_world_frame(100.0, 0.0, Pose(0.0, 0.0, 0.0))
        assert (p.x, p.y) == (pytest.approx(100.0), pytest.approx(0.0, abs=1e-12))

    def test_left_detection_lands_left(self):
        p = to_world_frame(100.0, math.pi / 2.0, Pose(0.0, 0.0, 0.0))
        assert (p.x, p.y) == (pytest.approx(0.0, abs=1e-12), pytest.approx(100.0))

    def test_yawed_pose_rotates_the_bearing(self):
        p = to_world_frame(100.0 * math.sqrt(2.0), math.pi / 4.0,
                           Pose(50.0, 50.0, 0.0))
        assert (p.x, p.y) == (pytest.approx(150.0), pytest.approx(150.0))

    def test_metadata_carried_through(self):
        p = to_world_frame(42.0, 0.1, Pose(0.0, 0.0, 0.0),
                           snr_score=17.5, timestamp_ms=31, receiver_id="front")
        assert (p.snr_score, p.timestamp_ms, p.receiver_id) == (17.5, 31, "front")
        assert (p.aoa, p.range_rx) == (0.1, 42.0)

    def test_rigid_motion_invariance(self, rng):
        for _ in range(100):
            r = float(rng.uniform(10.0, 400.0))
            theta = float(rng.uniform(-math.pi / 4.0, math.pi / 4.0))
            pose = Pose(float(rng.uniform(-500, 500)), float(rng.uniform(-500, 500)),
                        float(rng.uniform(-math.pi, math.pi)))
            mount = Mount(float(rng.uniform(-20, 20)), float(rng.uniform(-20, 20)),
                          float(rng.uniform(-1, 1)))
            det = to_world_frame(r, theta, pose, mount)
            rx_x, rx_y, heading = receiver_world(pose, mount)
            assert math.hypot(det.x - rx_x, det.y - rx_y) == pytest.approx(r)
            bearing = math.atan2(det.y - rx_y, det.x - rx_x)
            want = math.atan2(math.sin(heading + theta), math.cos(heading + theta))
            assert bearing == pytest.approx(want)


class TestPresetsAndOverrides:
    def test_channel_calibration(self):
        p5 = geometry_preset(5)
        p9 = geometry_preset(9)
        assert (p5.bias_cm, p5.bias_aoa_rad) == (15.0, 0.0522)
        assert (p9.bias_cm, p9.bias_aoa_rad) == (13.0, 0.0209)
        assert p5.d_tx_rx == DEFAULT_BASELINE_CM
        assert p5.baseline_in_delay

    def test_custom_baseline(self):
        assert geometry_preset(9, d_tx_rx=35.0).d_tx_rx == 35.0

    def test_overrides(self, tmp_path):
        base = geometry_preset(9)
        got = load_geometry_overrides(base, {"d_tx_rx": 25.0,
                                             "baseline_in_delay": False,
                                             "snr_min": 99.0})
        assert got.d_tx_rx == 25.0
        assert not got.baseline_in_delay
        assert got.bias_cm == base.bias_cm

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            GeometryParams(d_tx_rx=-1.0)
        with pytest.raises(ValueError):
            GeometryParams(aoa_coeff=0.0)
