"""Obstacle mapping from IR-UWB radar channel impulse responses.

The pipeline turns per-frame CIR captures into a world-frame obstacle
map in three stages: peak detection on the normalized magnitude CIR,
multi-criteria filtering (width, prominence, SNR score, phase-difference
gate), and geometric projection followed by density clustering.  A
synthetic scene generator with exact ground truth and an evaluation
harness round out the toolkit.
"""

from .capture import (CH5_RADIO, CH9_RADIO, Channel, CirCapture, CaptureError,
                      ComplexSample, Pose, RadioConfig, StreamOrderError,
                      fractional_bandwidth, parse_capture_stream,
                      serialize_capture, wrap_angle)
from .cir import (MagnitudeCir, NormalizedCir, PhaseCir, magnitude,
                  minmax_normalize, phase, split_noise_floor)
from .clustering import (Cluster, ClusterParams, MapSnapshot,
                         accumulate_and_cluster, cluster_centroid, dbscan)
from .evaluation import (EvalMode, EvalReport, GroundTruth, TruthObject,
                         detection_metrics, distance_stats, evaluate,
                         load_truth, match_detections)
from .filtering import (FilterParams, Material, ScoredPeak, apply_filters,
                        pdoa, score_peaks, select_target_peak, snr_score,
                        threshold_preset)
from .geometry import (DetectedPoint, FrameDropped, GeometryParams, Mount,
                       aoa_from_pdoa, geometry_preset, range_from_rx,
                       to_world_frame, total_path_length)
from .peaks import (RawPeak, detect_peaks, find_local_maxima, prominence,
                    refine_peak_index, width_at_half_prominence)
from .pipeline import PipelineConfig, process_capture, run_stream
from .sim import (Scene, SceneObstacle, load_scene, straight_trajectory,
                  synth_capture, synth_scene_stream)

__version__ = "0.1.0"
