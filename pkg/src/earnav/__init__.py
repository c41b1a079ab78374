"""Earable inertial navigation: calibration, heading, PDR, fusion."""

from .angles import (circular_blend, circular_diff, circular_mean,
                     interp_circular, unwrap_series, wrap_angle)
from .calibration import (AccelCalib, AccelCalibrator, CalibrationError,
                          GyroCalib, MagCalibState, calibrate_gyro,
                          fit_accel_calibration, levenberg_marquardt,
                          mag_add_reference_point, mag_check_rollover,
                          stationary_windows)
from .datamodel import GRAVITY, DeviceTrace, ImuSample, Position2D
from .displacement import (STRIDE_LENGTH_FACTOR, StrideEvent, Track,
                           critically_damped_lowpass, detect_strides,
                           integrate_track, kinematics_track,
                           per_timestamp_distance, stride_length)
from .fusion import (GpsFix, average_stride_times, fuse_headings,
                     gps_position_filter, load_gps_fixes, make_gps_fixes,
                     write_gps_fixes)
from .heading import (HeadingSeries, MadgwickFilter, complementary_heading,
                      integrate_gyro, madgwick_heading, mag_heading,
                      mag_heading_series, tilt_angles)
from .metrics import (DriftReport, HeadingErrorReport, TTestResult, drift,
                      heading_error, paired_t_test)
from .pipeline import (METHODS, CalibrationSet, PipelineResult, fused_track,
                       load_calibration, run_mixed_rate, save_calibration,
                       single_track)
from .synth import (SynthOutput, SynthScenario, corridor_scenario, generate,
                    generate_calibration_trace, inject_miscalibration,
                    line_scenario, load_truth, square_loop_scenario,
                    write_truth)
from .trace_io import (ConfigError, RunConfig, TraceFormatError, load_config,
                       load_trace, resample, save_config, write_trace)

__version__ = "0.1.0"
