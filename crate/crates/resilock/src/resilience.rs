//! Decision procedures for tolerance to actuator loss: column splitting, the
//! `F = BB^T - CC^T` positive-definiteness criterion, exhaustive p-loss
//! enumeration, the degree of the strongest tolerated loss, the orthonormal
//! reduction with its singular-value criterion, and the determinant identity
//! relating actuator count to state dimension.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    compact_svd, is_positive_definite, max_singular_value, min_eigenvalue, pd_threshold,
    SymMatrix, Tolerance,
};

/// Default cap on the number of loss combinations enumerated per query.
pub const DEFAULT_COMBINATION_CAP: u128 = 1_000_000;

/// Full actuation matrix with optional actuator labels and input ranges.
#[derive(Debug, Clone)]
pub struct ControlMatrix {
    entries: DMatrix<f64>,
    labels: Option<Vec<String>>,
    ranges: Option<Vec<(f64, f64)>>,
}

impl ControlMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.ncols() == 0 || entries.nrows() == 0 {
            return Err(Error::InvalidInput(
                "control matrix must have at least one row and one column".into(),
            ));
        }
        Ok(ControlMatrix {
            entries,
            labels: None,
            ranges: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.m() {
            return Err(Error::InvalidInput(format!(
                "expected {} labels, got {}",
                self.m(),
                labels.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_ranges(mut self, ranges: Vec<(f64, f64)>) -> Result<Self> {
        if ranges.len() != self.m() {
            return Err(Error::InvalidInput(format!(
                "expected {} ranges, got {}",
                self.m(),
                ranges.len()
            )));
        }
        if ranges.iter().any(|&(lo, hi)| lo >= hi) {
            return Err(Error::DegenerateRange);
        }
        self.ranges = Some(ranges);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn m(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn ranges(&self) -> Option<&[(f64, f64)]> {
        self.ranges.as_deref()
    }

    /// Label of the 1-based column `j`, falling back to a numbered name.
    pub fn label(&self, j: usize) -> String {
        self.labels
            .as_ref()
            .and_then(|l| l.get(j - 1).cloned())
            .unwrap_or_else(|| format!("actuator {j}"))
    }

    /// Same matrix with the given 1-based columns scaled by `factor`.
    pub fn scale_columns(&self, columns: &[usize], factor: f64) -> Result<Self> {
        let mut entries = self.entries.clone();
        for &j in columns {
            if j == 0 || j > self.m() {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    m: self.m(),
                });
            }
            for i in 0..self.n() {
                entries[(i, j - 1)] *= factor;
            }
        }
        Ok(ControlMatrix {
            entries,
            labels: self.labels.clone(),
            ranges: self.ranges.clone(),
        })
    }
}

/// Sorted, distinct 1-based column indices declared uncontrolled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LossScenario {
    indices: Vec<usize>,
}

impl LossScenario {
    pub fn new(indices: &[usize], m: usize) -> Result<Self> {
        if indices.is_empty() || indices.len() >= m {
            return Err(Error::InvalidInput(format!(
                "a loss must leave at least one controlled actuator: p = {}, m = {}",
                indices.len(),
                m
            )));
        }
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        for pair in sorted.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::DuplicateIndex(pair[0]));
            }
        }
        for &j in &sorted {
            if j == 0 || j > m {
                return Err(Error::IndexOutOfRange { index: j, m });
            }
        }
        Ok(LossScenario { indices: sorted })
    }

    pub fn p(&self) -> usize {
        self.indices.len()
    }

    /// 1-based indices, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    fn contains(&self, one_based: usize) -> bool {
        self.indices.binary_search(&one_based).is_ok()
    }
}

/// Column partition of a control matrix into controlled part `B` and
/// uncontrolled part `C`.
#[derive(Debug, Clone)]
pub struct SplitSystem {
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    scenario: LossScenario,
    b_ranges: Option<Vec<(f64, f64)>>,
    c_ranges: Option<Vec<(f64, f64)>>,
}

impl SplitSystem {
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn scenario(&self) -> &LossScenario {
        &self.scenario
    }

    pub fn n(&self) -> usize {
        self.b.nrows()
    }

    /// Ranges of the controlled actuators, order matching the columns of `B`.
    pub fn controlled_ranges(&self) -> Option<&[(f64, f64)]> {
        self.b_ranges.as_deref()
    }

    /// Ranges of the uncontrolled actuators, order matching the columns of `C`.
    pub fn uncontrolled_ranges(&self) -> Option<&[(f64, f64)]> {
        self.c_ranges.as_deref()
    }
}

/// Partitions the columns of `bbar` into controlled and uncontrolled parts,
/// preserving column order within each part.
pub fn split(bbar: &ControlMatrix, scenario: &LossScenario) -> Result<SplitSystem> {
    let m = bbar.m();
    if let Some(&max) = scenario.indices().last() {
        if max > m {
            return Err(Error::IndexOutOfRange { index: max, m });
        }
    }
    let n = bbar.n();
    let p = scenario.p();
    let mut b = DMatrix::zeros(n, m - p);
    let mut c = DMatrix::zeros(n, p);
    let mut b_ranges = bbar.ranges().map(|_| Vec::with_capacity(m - p));
    let mut c_ranges = bbar.ranges().map(|_| Vec::with_capacity(p));
    let (mut bi, mut ci) = (0, 0);
    for j in 1..=m {
        let col = bbar.entries().column(j - 1);
        if scenario.contains(j) {
            c.set_column(ci, &col);
            if let (Some(r), Some(all)) = (c_ranges.as_mut(), bbar.ranges()) {
                r.push(all[j - 1]);
            }
            ci += 1;
        } else {
            b.set_column(bi, &col);
            if let (Some(r), Some(all)) = (b_ranges.as_mut(), bbar.ranges()) {
                r.push(all[j - 1]);
            }
            bi += 1;
        }
    }
    Ok(SplitSystem {
        b,
        c,
        scenario: scenario.clone(),
        b_ranges,
        c_ranges,
    })
}

/// The criterion matrix `F = BB^T - CC^T`.
pub fn compute_f(sys: &SplitSystem) -> SymMatrix {
    let f = sys.b() * sys.b().transpose() - sys.c() * sys.c().transpose();
    SymMatrix::new((&f + f.transpose()) * 0.5).expect("F is symmetric by construction")
}

/// Whether the given loss leaves the target reachable eventually, together
/// with the minimal eigenvalue of `F` for diagnostics.
pub fn is_loss_tolerable(sys: &SplitSystem, tol: &Tolerance) -> Result<(bool, f64)> {
    let f = compute_f(sys);
    let min = min_eigenvalue(&f)?;
    Ok((min > pd_threshold(&f, tol), min))
}

/// Verdict for a single loss combination.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    /// 1-based lost column indices.
    pub scenario: Vec<usize>,
    pub min_eig: f64,
    pub tolerable: bool,
    /// Set when the minimal eigenvalue sits within the decision margin and
    /// the verdict is data-dependent rather than clear-cut.
    pub indeterminate: bool,
}

/// Aggregate result of enumerating every loss of `p` actuators.
#[derive(Debug, Clone, Serialize)]
pub struct ResilienceReport {
    pub p: usize,
    pub verdicts: Vec<Verdict>,
    pub overall: bool,
    pub degree: Option<usize>,
}

/// Lexicographic enumeration of p-element subsets of {0, .., m-1}.
pub(crate) struct Combinations {
    m: usize,
    current: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub(crate) fn new(m: usize, p: usize) -> Self {
        Combinations {
            m,
            current: (0..p).collect(),
            done: p > m || p == 0,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let p = self.current.len();
        let mut i = p;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.current[i] < self.m - (p - i) {
                self.current[i] += 1;
                for k in i + 1..p {
                    self.current[k] = self.current[k - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

pub(crate) fn binomial(m: usize, p: usize) -> u128 {
    if p > m {
        return 0;
    }
    let p = p.min(m - p);
    let mut acc: u128 = 1;
    for i in 0..p {
        acc = acc.saturating_mul((m - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Enumerates every combination of `p` lost actuators and checks `F` for each.
/// `overall` is true only when every combination is tolerable.
pub fn check_p_resilience(
    bbar: &ControlMatrix,
    p: usize,
    tol: &Tolerance,
    cap: u128,
) -> Result<ResilienceReport> {
    let m = bbar.m();
    if p == 0 || p >= m {
        return Err(Error::InvalidInput(format!(
            "p must satisfy 1 <= p < m, got p = {p}, m = {m}"
        )));
    }
    let count = binomial(m, p);
    if count > cap {
        return Err(Error::CombinatorialBudgetExceeded {
            combinations: count,
            cap,
        });
    }
    let mut verdicts = Vec::with_capacity(count as usize);
    let mut overall = true;
    for combo in Combinations::new(m, p) {
        let one_based: Vec<usize> = combo.iter().map(|&j| j + 1).collect();
        let scenario = LossScenario::new(&one_based, m)?;
        let sys = split(bbar, &scenario)?;
        let f = compute_f(&sys);
        let min = min_eigenvalue(&f)?;
        let margin = pd_threshold(&f, tol);
        let tolerable = min > margin;
        let indeterminate = min.abs() <= margin;
        overall &= tolerable;
        verdicts.push(Verdict {
            scenario: one_based,
            min_eig: min,
            tolerable,
            indeterminate,
        });
    }
    Ok(ResilienceReport {
        p,
        verdicts,
        overall,
        degree: None,
    })
}

/// Largest `p` for which every p-loss is tolerable, or 0. Searches upward
/// from `p = 1`; tolerance to a p-loss implies tolerance to smaller losses,
/// so the first failure terminates the search.
pub fn degree_of_resilience(bbar: &ControlMatrix, tol: &Tolerance, cap: u128) -> Result<usize> {
    let mut degree = 0;
    while degree + 1 < bbar.m() {
        let report = check_p_resilience(bbar, degree + 1, tol, cap)?;
        if !report.overall {
            break;
        }
        degree += 1;
    }
    Ok(degree)
}

/// Orthonormal-row reduction: returns `V` from the compact SVD of the control
/// matrix and a flag telling whether the reduction is valid, i.e. whether the
/// Gram matrix is positive definite so both matrices share their loss
/// tolerance degree.
pub fn svd_reduce(bbar: &ControlMatrix, tol: &Tolerance) -> Result<(DMatrix<f64>, bool)> {
    let (_, _, v) = compact_svd(bbar.entries())?;
    let gram = bbar.entries() * bbar.entries().transpose();
    let gram = SymMatrix::new(gram)?;
    let valid = is_positive_definite(&gram, tol)?;
    Ok((v, valid))
}

/// For a matrix with orthonormal rows, p-loss tolerance is equivalent to each
/// p-column submatrix having largest singular value below `1/sqrt(2)`.
pub fn sigma_criterion(v: &DMatrix<f64>, p: usize, tol: &Tolerance) -> Result<bool> {
    let n = v.nrows();
    let m = v.ncols();
    let gap = (v * v.transpose() - DMatrix::identity(n, n)).amax();
    if gap > 1e-8 {
        return Err(Error::NotOrthonormalRows(gap));
    }
    if p == 0 || p >= m {
        return Err(Error::InvalidInput(format!(
            "p must satisfy 1 <= p < m, got p = {p}, m = {m}"
        )));
    }
    // Matches the F-criterion margin: for orthonormal rows
    // F = I - 2 CC^T, so min eig F > pd margin  <=>  sigma^2 < (1 - margin)/2.
    let sigma_sq_limit = 0.5 * (1.0 - 2.0 * tol.pd_eps);
    for combo in Combinations::new(m, p) {
        let mut c = DMatrix::zeros(n, p);
        for (k, &j) in combo.iter().enumerate() {
            c.set_column(k, &v.column(j));
        }
        let sigma = max_singular_value(&c.transpose())?;
        if sigma * sigma >= sigma_sq_limit {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Relative residual of the identity
/// `sum_i det(F_i) = det(Gram) * (m - 2n)` over all single-column losses.
pub fn verify_size_identity(bbar: &ControlMatrix) -> Result<f64> {
    let gram = SymMatrix::new(bbar.entries() * bbar.entries().transpose())?;
    if !is_positive_definite(&gram, &Tolerance::default())? {
        return Err(Error::SingularGram);
    }
    let det_gram = gram.as_matrix().determinant();
    let m = bbar.m();
    let n = bbar.n() as f64;
    let mut sum = 0.0;
    for j in 1..=m {
        let scenario = LossScenario::new(&[j], m)?;
        let sys = split(bbar, &scenario)?;
        sum += compute_f(&sys).as_matrix().determinant();
    }
    let rhs = det_gram * (m as f64 - 2.0 * n);
    Ok((sum - rhs).abs() / (1.0 + det_gram.abs() * m as f64))
}

/// Convenience wrapper around [`min_eigenvalue`] for the criterion matrix.
pub fn min_f_eigenvalue(sys: &SplitSystem) -> Result<f64> {
    min_eigenvalue(&compute_f(sys))
}

/// Builds a split directly from raw `B` and `C` blocks, treating the columns
/// of `C` as the trailing actuators. Used by tests and the reach procedures.
pub fn split_from_parts(b: DMatrix<f64>, c: DMatrix<f64>) -> Result<SplitSystem> {
    if b.nrows() != c.nrows() {
        return Err(Error::InvalidInput(
            "B and C must have the same row count".into(),
        ));
    }
    let m = b.ncols() + c.ncols();
    let indices: Vec<usize> = (b.ncols() + 1..=m).collect();
    let scenario = LossScenario::new(&indices, m)?;
    Ok(SplitSystem {
        b,
        c,
        scenario,
        b_ranges: None,
        c_ranges: None,
    })
}
