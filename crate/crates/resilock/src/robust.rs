//! Robust-control comparison: ellipsoidal bounds on the control and
//! disturbance sets, the internal (guaranteed-reach) ellipsoid ODEs
//! parameterized by a direction, and the smallest radius a robust controller
//! can guarantee around the goal.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, SymMatrix};
use crate::resilience::SplitSystem;

/// Ellipsoid `{ x : (x - c)^T S (x - c) <= 1 }` given by center and shape.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    pub center: DVector<f64>,
    pub shape: SymMatrix,
}

/// Scalar disturbance bound: center is the midpoint, shape `4 / span^2`.
pub fn build_disturbance_ellipsoid(range: (f64, f64)) -> Result<Ellipsoid> {
    let (lo, hi) = range;
    if lo >= hi {
        return Err(Error::DegenerateRange);
    }
    let center = DVector::from_vec(vec![(lo + hi) / 2.0]);
    let q = 4.0 / (hi - lo).powi(2);
    Ok(Ellipsoid {
        center,
        shape: SymMatrix::new(DMatrix::from_element(1, 1, q))?,
    })
}

/// Diagonal control bound: each diagonal entry is the tighter of
/// `4 / span_i^2` and the disturbance scalar `q`.
pub fn build_control_ellipsoid(ranges: &[(f64, f64)], q_scalar: f64) -> Result<Ellipsoid> {
    if ranges.iter().any(|&(lo, hi)| lo >= hi) {
        return Err(Error::DegenerateRange);
    }
    let center = DVector::from_iterator(ranges.len(), ranges.iter().map(|&(lo, hi)| (lo + hi) / 2.0));
    let diag = DVector::from_iterator(
        ranges.len(),
        ranges
            .iter()
            .map(|&(lo, hi)| (4.0 / (hi - lo).powi(2)).min(q_scalar)),
    );
    Ok(Ellipsoid {
        center,
        shape: SymMatrix::new(DMatrix::from_diagonal(&diag))?,
    })
}

/// Configuration of the shape-matrix integration and the radius search.
#[derive(Debug, Clone, Copy)]
pub struct RobustConfig {
    pub t_final: f64,
    pub dt: f64,
    /// Initial shape `x0_shape * I`.
    pub x0_shape: f64,
    /// Floor applied to the normalization scalar pi(t).
    pub pi_floor: f64,
    /// When false, hitting the pi floor aborts with an error instead.
    pub regularize: bool,
    /// Upper bound of the radius bisection.
    pub mu_cap: f64,
    /// Slack allowed on intermediate eigenvalues before declaring failure.
    pub psd_slack: f64,
}

impl Default for RobustConfig {
    fn default() -> Self {
        RobustConfig {
            t_final: 25.0,
            dt: 0.01,
            x0_shape: 0.1,
            pi_floor: 0.01,
            regularize: true,
            mu_cap: 5000.0,
            psd_slack: 1e-10,
        }
    }
}

/// One integration of the internal-approximation ODEs for a fixed direction
/// and candidate radius.
#[derive(Debug, Clone)]
pub struct RobustRun {
    pub l: DVector<f64>,
    pub mu: f64,
    pub times: Vec<f64>,
    /// Minimal eigenvalue of the shape matrix at each grid time.
    pub min_eigs: Vec<f64>,
    pub final_center: DVector<f64>,
    pub feasible: bool,
    /// True when the pi floor was ever applied.
    pub regularized: bool,
}

struct ShapeDynamics {
    a: DMatrix<f64>,
    bpb: DMatrix<f64>,
    cqc: DMatrix<f64>,
    mu: f64,
    pi_floor: f64,
    regularize: bool,
}

impl ShapeDynamics {
    /// Returns the derivative, or None when the quadratic form collapsed and
    /// the run is infeasible. The flag reports floor regularization.
    fn eval(
        &self,
        x: &DMatrix<f64>,
        l: &DVector<f64>,
        t: f64,
    ) -> Result<Option<(DMatrix<f64>, bool)>> {
        let lxl = l.dot(&(x * l));
        if lxl <= 1e-300 {
            return Ok(None);
        }
        let lcl = l.dot(&(&self.cqc * l)).max(0.0);
        let mut regularized = false;
        let pi = {
            let raw = lcl.sqrt();
            if raw < self.pi_floor {
                if !self.regularize {
                    return Err(Error::PiSingular(t));
                }
                regularized = true;
                self.pi_floor
            } else {
                raw
            }
        };
        let k_ctl = (l.dot(&(&self.bpb * l)).max(0.0) / lxl).sqrt();
        let k_rad = l.norm() / lxl.sqrt();
        let dx = &self.a * x
            + x * self.a.transpose()
            + x * (2.0 * k_ctl + 2.0 * self.mu * k_rad - pi)
            - &self.cqc / pi.sqrt();
        Ok(Some((dx, regularized)))
    }
}

/// Integrates the center and shape of the guaranteed-reach ellipsoid for one
/// direction `l`. The direction is propagated as `l(t) = exp(A^T t) l`; the
/// shape matrix is symmetrized each step, and the run is feasible when it
/// stays positive semidefinite throughout and positive definite at the end.
#[allow(clippy::too_many_arguments)]
pub fn integrate_internal_approx(
    a: &DMatrix<f64>,
    sys: &SplitSystem,
    control: &Ellipsoid,
    disturbance: &Ellipsoid,
    l: &DVector<f64>,
    mu: f64,
    x0: &DVector<f64>,
    cfg: &RobustConfig,
) -> Result<RobustRun> {
    let n = a.nrows();
    if l.norm() < 1e-12 {
        return Err(Error::NotUnitVector(l.norm()));
    }
    let l_unit = l.normalize();
    let bpb = sys.b() * control.shape.as_matrix() * sys.b().transpose();
    let cqc = sys.c() * disturbance.shape.as_matrix() * sys.c().transpose();
    let dyn_ = ShapeDynamics {
        a: a.clone(),
        bpb,
        cqc,
        mu,
        pi_floor: cfg.pi_floor,
        regularize: cfg.regularize,
    };
    let steps = (cfg.t_final / cfg.dt).round() as usize;
    let phi = (a.transpose() * cfg.dt).exp();
    let phi_half = (a.transpose() * (cfg.dt / 2.0)).exp();

    let bu = sys.b() * &control.center;
    let cw = sys.c() * &disturbance.center;

    let mut x_shape = DMatrix::<f64>::identity(n, n) * cfg.x0_shape;
    let mut center = x0.clone();
    let mut lt = l_unit.clone();
    let mut times = Vec::with_capacity(steps + 1);
    let mut min_eigs = Vec::with_capacity(steps + 1);
    let mut feasible = true;
    let mut regularized = false;

    let record = |x: &DMatrix<f64>, eigs: &mut Vec<f64>| -> Result<f64> {
        let sym = SymMatrix::new(x.clone())?;
        let e = min_eigenvalue(&sym)?;
        eigs.push(e);
        Ok(e)
    };

    times.push(0.0);
    record(&x_shape, &mut min_eigs)?;

    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let l_mid = &phi_half * &lt;
        let l_end = &phi * &lt;
        let mut stage = |x: &DMatrix<f64>, l: &DVector<f64>, ts: f64| -> Result<Option<DMatrix<f64>>> {
            match dyn_.eval(x, l, ts)? {
                Some((dx, reg)) => {
                    regularized |= reg;
                    Ok(Some(dx))
                }
                None => Ok(None),
            }
        };
        let k1 = stage(&x_shape, &lt, t)?;
        let Some(k1) = k1 else {
            feasible = false;
            break;
        };
        let Some(k2) = stage(&(&x_shape + &k1 * (cfg.dt / 2.0)), &l_mid, t)? else {
            feasible = false;
            break;
        };
        let Some(k3) = stage(&(&x_shape + &k2 * (cfg.dt / 2.0)), &l_mid, t)? else {
            feasible = false;
            break;
        };
        let Some(k4) = stage(&(&x_shape + &k3 * cfg.dt), &l_end, t)? else {
            feasible = false;
            break;
        };
        x_shape += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (cfg.dt / 6.0);
        x_shape = (&x_shape + x_shape.transpose()) * 0.5;

        // Center moves under the nominal drive.
        let cdot = |c: &DVector<f64>| a * c + &bu + &cw;
        let c1 = cdot(&center);
        let c2 = cdot(&(&center + &c1 * (cfg.dt / 2.0)));
        let c3 = cdot(&(&center + &c2 * (cfg.dt / 2.0)));
        let c4 = cdot(&(&center + &c3 * cfg.dt));
        center += (c1 + c2 * 2.0 + c3 * 2.0 + c4) * (cfg.dt / 6.0);

        lt = l_end;
        times.push(t + cfg.dt);
        let e = record(&x_shape, &mut min_eigs)?;
        if e < -cfg.psd_slack {
            feasible = false;
            break;
        }
    }
    if feasible {
        feasible = *min_eigs.last().unwrap() > 0.0;
    }
    Ok(RobustRun {
        l: l_unit,
        mu,
        times,
        min_eigs,
        final_center: center,
        feasible,
        regularized,
    })
}

/// Comparison record emitted by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct RobustComparison {
    pub mu: f64,
    pub best_direction: Vec<f64>,
    pub initial_state_norm: f64,
    pub resilient_target_radius: f64,
}

/// Smallest radius for which the guaranteed-reach ellipsoid survives the full
/// horizon, minimized over the candidate directions. Feasibility is monotone
/// nondecreasing in the radius, so each direction is bisected independently;
/// candidates run on worker threads capped by `RESILOCK_THREADS`.
pub fn min_guaranteed_radius(
    a: &DMatrix<f64>,
    sys: &SplitSystem,
    control: &Ellipsoid,
    disturbance: &Ellipsoid,
    l_candidates: &[DVector<f64>],
    x0: &DVector<f64>,
    cfg: &RobustConfig,
) -> Result<(f64, DVector<f64>)> {
    if l_candidates.is_empty() {
        return Err(Error::InvalidInput("need at least one direction".into()));
    }
    let bisect_one = |l: &DVector<f64>| -> Result<Option<f64>> {
        let feasible = |mu: f64| -> Result<bool> {
            Ok(integrate_internal_approx(a, sys, control, disturbance, l, mu, x0, cfg)?.feasible)
        };
        if !feasible(cfg.mu_cap)? {
            return Ok(None);
        }
        let (mut lo, mut hi) = (0.0, cfg.mu_cap);
        while hi - lo > 1e-2 * hi + 1e-6 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Some(hi))
    };

    let workers = worker_cap().max(1);
    let mut results: Vec<Option<Result<Option<f64>>>> = Vec::new();
    results.resize_with(l_candidates.len(), || None);
    std::thread::scope(|scope| {
        let bisect = &bisect_one;
        let mut handles = Vec::new();
        for chunk_ids in partition(l_candidates.len(), workers) {
            let slots: Vec<(usize, &DVector<f64>)> =
                chunk_ids.iter().map(|&i| (i, &l_candidates[i])).collect();
            handles.push(scope.spawn(move || {
                slots
                    .into_iter()
                    .map(|(i, l)| (i, bisect(l)))
                    .collect::<Vec<_>>()
            }));
        }
        for handle in handles {
            for (i, res) in handle.join().expect("worker panicked") {
                results[i] = Some(res);
            }
        }
    });

    let mut best: Option<(f64, usize)> = None;
    for (i, slot) in results.into_iter().enumerate() {
        match slot.expect("all candidates processed") {
            Ok(Some(mu)) => {
                if best.map_or(true, |(b, _)| mu < b) {
                    best = Some((mu, i));
                }
            }
            Ok(None) => {}
            Err(e) => return Err(e),
        }
    }
    match best {
        Some((mu, i)) => Ok((mu, l_candidates[i].normalize())),
        None => Err(Error::NoFeasibleMu),
    }
}

/// Worker count from `RESILOCK_THREADS`, defaulting to the machine parallelism.
pub(crate) fn worker_cap() -> usize {
    std::env::var("RESILOCK_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn partition(len: usize, workers: usize) -> Vec<Vec<usize>> {
    let buckets = workers.min(len).max(1);
    let mut out = vec![Vec::new(); buckets];
    for i in 0..len {
        out[i % buckets].push(i);
    }
    out
}
