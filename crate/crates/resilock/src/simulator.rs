//! Deterministic closed-loop simulation: stochastic energy-normalized
//! uncontrolled inputs, fixed-step fourth-order integration, and the embedded
//! fighter-jet scenarios.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::Write;

use crate::admire;
use crate::error::{Error, Result};
use crate::linalg::{care_lqr_gain, Tolerance};
use crate::resilience::{
    check_p_resilience, split, ControlMatrix, LossScenario, ResilienceReport, SplitSystem,
    DEFAULT_COMBINATION_CAP,
};
use crate::synthesis::{ResilientController, SynthesisGains};

/// Default dwell of the piecewise-constant uncontrolled input, in seconds.
pub const DEFAULT_DWELL: f64 = 0.1;

/// Drifted or driftless plant: `x' = A x + B u + C w`, with `A` ignored when
/// the model is declared driftless.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub a: DMatrix<f64>,
    pub bbar: ControlMatrix,
    pub driftless: bool,
}

impl SystemModel {
    pub fn new(a: DMatrix<f64>, bbar: ControlMatrix, driftless: bool) -> Result<Self> {
        if a.nrows() != bbar.n() || a.ncols() != bbar.n() {
            return Err(Error::InvalidInput("drift matrix dimension mismatch".into()));
        }
        Ok(SystemModel { a, bbar, driftless })
    }

    pub fn driftless_from(bbar: ControlMatrix) -> Self {
        let n = bbar.n();
        SystemModel {
            a: DMatrix::zeros(n, n),
            bbar,
            driftless: true,
        }
    }

    fn effective_a(&self) -> DMatrix<f64> {
        if self.driftless {
            DMatrix::zeros(self.a.nrows(), self.a.ncols())
        } else {
            self.a.clone()
        }
    }
}

/// Piecewise-constant signal on a uniform dwell grid over `[0, t_final]`.
#[derive(Debug, Clone)]
pub struct InputSignal {
    values: Vec<DVector<f64>>,
    dwell: f64,
    t_final: f64,
}

impl InputSignal {
    pub fn value_at(&self, t: f64) -> &DVector<f64> {
        let idx = ((t / self.dwell) as usize).min(self.values.len() - 1);
        &self.values[idx]
    }

    /// Exact energy norm of the piecewise-constant signal.
    pub fn l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            let start = k as f64 * self.dwell;
            let len = (self.t_final - start).min(self.dwell).max(0.0);
            acc += v.norm_squared() * len;
        }
        acc.sqrt()
    }

    pub fn channels(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }
}

/// Draws a piecewise-constant signal uniformly within the per-channel ranges
/// and rescales it into the unit energy ball: if its norm exceeds 1 the whole
/// signal is divided by that norm. Deterministic in the seed.
pub fn generate_w(
    ranges: &[(f64, f64)],
    seed: u64,
    t_final: f64,
    dwell: f64,
) -> Result<InputSignal> {
    if t_final <= 0.0 || dwell <= 0.0 {
        return Err(Error::InvalidInput("durations must be positive".into()));
    }
    let blocks = (t_final / dwell).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        let v = DVector::from_iterator(
            ranges.len(),
            ranges.iter().map(|&(lo, hi)| {
                if lo == hi {
                    lo
                } else {
                    rng.gen_range(lo..hi)
                }
            }),
        );
        values.push(v);
    }
    let mut signal = InputSignal {
        values,
        dwell,
        t_final,
    };
    let norm = signal.l2_norm();
    if norm > 1.0 {
        for v in &mut signal.values {
            *v /= norm;
        }
    }
    Ok(signal)
}

/// Feedback used during integration.
#[derive(Debug, Clone)]
pub enum Controller {
    Resilient(ResilientController),
    /// `u = -K x`, clamped to the given ranges when present.
    Lqr {
        k: DMatrix<f64>,
        ranges: Option<Vec<(f64, f64)>>,
    },
    None,
}

impl Controller {
    fn control(&self, x: &DVector<f64>, w: &DVector<f64>, m_controlled: usize) -> DVector<f64> {
        match self {
            Controller::Resilient(c) => c.control_input(x, w),
            Controller::Lqr { k, ranges } => {
                let mut u = -(k * x);
                if let Some(r) = ranges {
                    for (i, &(lo, hi)) in r.iter().enumerate() {
                        u[i] = u[i].clamp(lo, hi);
                    }
                }
                u
            }
            Controller::None => DVector::zeros(m_controlled),
        }
    }
}

/// Grid data of one simulation run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub disturbances: Vec<DVector<f64>>,
    pub distances: Vec<f64>,
}

impl Trajectory {
    pub fn final_distance(&self) -> f64 {
        *self.distances.last().unwrap()
    }

    fn quadrature(series: &[DVector<f64>], dt: f64) -> f64 {
        let steps = series.len().saturating_sub(1);
        (series[..steps]
            .iter()
            .map(|v| v.norm_squared() * dt)
            .sum::<f64>())
        .sqrt()
    }

    pub fn control_l2(&self) -> f64 {
        let dt = self.times[1] - self.times[0];
        Self::quadrature(&self.controls, dt)
    }

    pub fn disturbance_l2(&self) -> f64 {
        let dt = self.times[1] - self.times[0];
        Self::quadrature(&self.disturbances, dt)
    }

    /// Fraction of grid points at which any control channel sits on its bound.
    pub fn saturation_fraction(&self, ranges: &[(f64, f64)]) -> f64 {
        let hits = self
            .controls
            .iter()
            .filter(|u| {
                ranges
                    .iter()
                    .enumerate()
                    .any(|(i, &(lo, hi))| u[i] <= lo + 1e-12 || u[i] >= hi - 1e-12)
            })
            .count();
        hits as f64 / self.controls.len() as f64
    }

    /// CSV with columns `t, x1.., u1.., w1.., distance`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let nx = self.states[0].len();
        let nu = self.controls[0].len();
        let nw = self.disturbances[0].len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=nx).map(|i| format!("x{i}")));
        header.extend((1..=nu).map(|i| format!("u{i}")));
        header.extend((1..=nw).map(|i| format!("w{i}")));
        header.push("distance".into());
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.times.len() {
            let mut row = vec![format!("{:.6}", self.times[k])];
            row.extend(self.states[k].iter().map(|v| format!("{v:.9e}")));
            row.extend(self.controls[k].iter().map(|v| format!("{v:.9e}")));
            row.extend(self.disturbances[k].iter().map(|v| format!("{v:.9e}")));
            row.push(format!("{:.9e}", self.distances[k]));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Scalar summary of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub final_distance: f64,
    pub control_l2: f64,
    pub disturbance_l2: f64,
    pub saturation_fraction: Option<f64>,
}

/// Classical fixed-step fourth-order integration of
/// `x' = A x + B u + C w` with the control re-evaluated at every stage.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    model: &SystemModel,
    sys: &SplitSystem,
    controller: &Controller,
    w: &InputSignal,
    x0: &DVector<f64>,
    x_goal: &DVector<f64>,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    if dt <= 0.0 || t_final <= 0.0 {
        return Err(Error::InvalidInput("dt and t_final must be positive".into()));
    }
    let a = model.effective_a();
    let m_ctl = sys.b().ncols();
    let steps = (t_final / dt).round() as usize;
    let mut x = x0.clone();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    let mut disturbances = Vec::with_capacity(steps + 1);
    let mut distances = Vec::with_capacity(steps + 1);

    let rhs = |t: f64, x: &DVector<f64>| -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let wv = w.value_at(t).clone();
        let u = controller.control(x, &wv, m_ctl);
        let dx = &a * x + sys.b() * &u + sys.c() * &wv;
        (dx, u, wv)
    };

    for k in 0..=steps {
        let t = k as f64 * dt;
        let (_, u, wv) = rhs(t, &x);
        times.push(t);
        states.push(x.clone());
        controls.push(u);
        disturbances.push(wv);
        distances.push((&x - x_goal).norm());
        if k == steps {
            break;
        }
        let (k1, _, _) = rhs(t, &x);
        let (k2, _, _) = rhs(t + dt / 2.0, &(&x + &k1 * (dt / 2.0)));
        let (k3, _, _) = rhs(t + dt / 2.0, &(&x + &k2 * (dt / 2.0)));
        let (k4, _, _) = rhs(t + dt, &(&x + &k3 * dt));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState(t + dt));
        }
    }
    Ok(Trajectory {
        times,
        states,
        controls,
        disturbances,
        distances,
    })
}

/// Jet scenario selector: which actuator becomes uncontrolled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetScenario {
    CanardLoss,
    ElevonLoss,
    RudderLoss,
}

impl JetScenario {
    /// 1-based lost column in the four-actuator jet model.
    pub fn lost_column(self) -> usize {
        match self {
            JetScenario::CanardLoss => 1,
            JetScenario::ElevonLoss => 2,
            JetScenario::RudderLoss => 4,
        }
    }
}

/// Which controller closes the loop in a jet run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetController {
    /// Disturbance-cancelling law with saturation at the actuator ranges.
    Resilient,
    /// LQR gain computed here (identity weights), saturated.
    Lqr,
    /// The published LQR gain, saturated.
    LqrPublished,
}

/// Runs one jet scenario from `x0 = (1,1,1)` toward the origin over 25 s.
pub fn run_admire(
    scenario: JetScenario,
    controller: JetController,
    seed: u64,
    dt: Option<f64>,
) -> Result<(Trajectory, RunSummary)> {
    let tol = Tolerance::default();
    let dt = dt.unwrap_or(tol.ode_step);
    let bbar = admire::control_matrix();
    let a = admire::drift_matrix();
    let model = SystemModel::new(a.clone(), bbar.clone(), false)?;
    let loss = LossScenario::new(&[scenario.lost_column()], bbar.m())?;
    let sys = split(&bbar, &loss)?;
    let t_final = 25.0;
    let x0 = DVector::from_vec(vec![1.0, 1.0, 1.0]);
    let x_goal = DVector::zeros(3);
    let w = generate_w(
        sys.uncontrolled_ranges().unwrap(),
        seed,
        t_final,
        DEFAULT_DWELL,
    )?;
    let sat_ranges = sys.controlled_ranges().unwrap().to_vec();
    let ctrl = match controller {
        JetController::Resilient => {
            let gains = SynthesisGains::compute(&sys, &x0, &x_goal, None).map_err(|e| match e {
                Error::SingularGram => {
                    Error::NotWellDefined("BB^T is not invertible for this loss".into())
                }
                other => other,
            })?;
            Controller::Resilient(ResilientController::new(
                sys.clone(),
                gains,
                x_goal.clone(),
                Some(sat_ranges.clone()),
            )?)
        }
        JetController::Lqr => {
            let k = care_lqr_gain(
                &a,
                sys.b(),
                &DMatrix::identity(3, 3),
                &DMatrix::identity(3, 3),
            )?;
            Controller::Lqr {
                k,
                ranges: Some(sat_ranges.clone()),
            }
        }
        JetController::LqrPublished => Controller::Lqr {
            k: admire::published_lqr_gain(),
            ranges: Some(sat_ranges.clone()),
        },
    };
    let traj = integrate(&model, &sys, &ctrl, &w, &x0, &x_goal, t_final, dt)?;
    let summary = RunSummary {
        final_distance: traj.final_distance(),
        control_l2: traj.control_l2(),
        disturbance_l2: traj.disturbance_l2(),
        saturation_fraction: Some(traj.saturation_fraction(&sat_ranges)),
    };
    Ok((traj, summary))
}

/// Configuration of the twelve-actuator layout study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayoutConfig {
    /// Printed matrix as is.
    Nominal,
    /// Thrust-vectoring columns scaled by the given factor.
    ThrustScaled(f64),
}

/// Single-loss study of the twelve-actuator model: nominal, the two
/// thrust-vectoring losses are intolerable and the other ten tolerable; with
/// the thrust-vectoring columns scaled down far enough, every single loss
/// becomes tolerable.
pub fn run_admire_driftless(config: LayoutConfig) -> Result<ResilienceReport> {
    let tol = Tolerance::default();
    let bbar = admire::speed_pitch_yaw_matrix()?;
    let bbar = match config {
        LayoutConfig::Nominal => bbar,
        LayoutConfig::ThrustScaled(factor) => {
            bbar.scale_columns(&admire::THRUST_VECTORING_COLUMNS, factor)?
        }
    };
    check_p_resilience(&bbar, 1, &tol, DEFAULT_COMBINATION_CAP)
}
