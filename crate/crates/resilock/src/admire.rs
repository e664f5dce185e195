//! Embedded fighter-jet benchmark fixtures: the reduced three-state model
//! (roll, pitch and yaw angular accelerations) with canard, elevon and rudder
//! surfaces, the published LQR gain, and the twelve-actuator
//! speed/pitch-rate/yaw-rate model used for the layout redesign study.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::resilience::ControlMatrix;

/// Radius of the target ball around the origin used by the jet scenarios.
pub const TARGET_RADIUS: f64 = 0.1;

const DEG: f64 = std::f64::consts::PI / 180.0;

/// Drift matrix of the reduced three-state jet model.
pub fn drift_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[
            -0.997, 0.0, 0.618, //
            0.0, -0.506, 0.0, //
            -0.094, 0.0, -0.213,
        ],
    )
}

/// Control matrix of the reduced jet model: canard, right elevon, left
/// elevon, rudder. Deflection ranges are in radians.
pub fn control_matrix() -> ControlMatrix {
    let entries = DMatrix::from_row_slice(
        3,
        4,
        &[
            0.0, -4.242, 4.242, 1.487, //
            1.653, -1.274, -1.274, 0.002, //
            0.0, -0.281, 0.281, -0.882,
        ],
    );
    ControlMatrix::new(entries)
        .and_then(|cm| {
            cm.with_labels(vec![
                "canard".into(),
                "right elevon".into(),
                "left elevon".into(),
                "rudder".into(),
            ])
        })
        .and_then(|cm| {
            cm.with_ranges(vec![
                (-25.0 * DEG, 55.0 * DEG),
                (-30.0 * DEG, 30.0 * DEG),
                (-30.0 * DEG, 30.0 * DEG),
                (-30.0 * DEG, 30.0 * DEG),
            ])
        })
        .expect("static fixture is valid")
}

/// LQR gain for the canard-loss split as published for the reduced model
/// (state weight and input weight both identity).
pub fn published_lqr_gain() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[
            -0.5825, -0.5358, -0.1659, //
            0.5826, -0.5360, 0.1653, //
            0.2198, 0.0007, -0.7564,
        ],
    )
}

const SPEED_PITCH_YAW_COLS: [[f64; 3]; 12] = [
    [-2.7, 7.1, -1.9],
    [-2.7, 7.1, 1.9],
    [-1.0, -7.7, -1.1],
    [-1.8, -13.0, -3.0],
    [-1.8, -13.0, 3.0],
    [-1.0, -7.7, 1.1],
    [-1.9, 0.0, -11.0],
    [-0.8, -0.5, 0.0],
    [-4.3, -0.7, 0.0],
    [1.2, 0.0, 0.0],
    [-71.0, 1.2, -710.0],
    [-113.0, -882.0, 0.0],
];

/// 1-based column indices of the yaw and pitch thrust-vectoring actuators in
/// the twelve-actuator model.
pub const THRUST_VECTORING_COLUMNS: [usize; 2] = [11, 12];

/// Twelve-actuator control matrix for speed, pitch rate and yaw rate; the
/// afterburner column is already scaled to its 20% thrust share.
pub fn speed_pitch_yaw_matrix() -> Result<ControlMatrix> {
    let entries = DMatrix::from_fn(3, 12, |i, j| SPEED_PITCH_YAW_COLS[j][i]);
    ControlMatrix::new(entries)?.with_labels(vec![
        "right canard".into(),
        "left canard".into(),
        "right outboard elevon".into(),
        "right inboard elevon".into(),
        "left inboard elevon".into(),
        "left outboard elevon".into(),
        "rudder".into(),
        "leading edge flaps".into(),
        "landing gear".into(),
        "afterburner".into(),
        "yaw thrust vectoring".into(),
        "pitch thrust vectoring".into(),
    ])
}
