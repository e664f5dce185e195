//! Dense numerical kernel used by every other module: symmetric eigenvalue
//! decompositions, positive-definiteness tests with explicit margins, compact
//! SVD, SPD solves and square roots, Lyapunov solves and a CARE-based LQR gain.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYM_REL_TOL: f64 = 1e-12;
const ITER_CAP: usize = 10_000;

/// Numerical tolerances shared by the decision procedures.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    /// Relative margin for strict positive-definiteness verdicts.
    pub pd_eps: f64,
    /// Magnitude below which negative eigenvalues are treated as rounding.
    pub eig_eps: f64,
    /// Default integration step in seconds.
    pub ode_step: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            pd_eps: 1e-9,
            eig_eps: 1e-10,
            ode_step: 1e-3,
        }
    }
}

impl Tolerance {
    pub fn new(pd_eps: f64, eig_eps: f64, ode_step: f64) -> Result<Self> {
        if pd_eps <= 0.0 || eig_eps <= 0.0 || ode_step <= 0.0 {
            return Err(Error::InvalidInput(
                "tolerances must be strictly positive".into(),
            ));
        }
        Ok(Tolerance {
            pd_eps,
            eig_eps,
            ode_step,
        })
    }
}

/// Square matrix validated to be symmetric on construction and stored in
/// exactly symmetrized form.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    /// Accepts `m` if `max |M_ij - M_ji| <= 1e-12 * max |M_ij|`, then stores
    /// `(M + M^T) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax();
        let asym = (&m - m.transpose()).amax();
        let limit = SYM_REL_TOL * scale.max(1e-300);
        if asym > limit {
            return Err(Error::NotSymmetric { asym, limit });
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(SymMatrix { m: sym })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.m
    }

    pub fn max_diag_abs(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.m[(i, i)].abs())
            .fold(0.0, f64::max)
    }
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &SymMatrix) -> Result<Vec<f64>> {
    Ok(sym_eigen(m)?.0)
}

/// Eigenvalues (ascending) with matching eigenvector columns.
pub fn sym_eigen(m: &SymMatrix) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = nalgebra::SymmetricEigen::try_new(m.m.clone(), f64::EPSILON, ITER_CAP)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..m.dim()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.dim(), m.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((vals, vecs))
}

pub fn min_eigenvalue(m: &SymMatrix) -> Result<f64> {
    let vals = sym_eigenvalues(m)?;
    Ok(vals[0])
}

/// Strict positive-definiteness with a relative margin: the minimal eigenvalue
/// must exceed `pd_eps * (1 + max |diag|)`.
pub fn is_positive_definite(m: &SymMatrix, tol: &Tolerance) -> Result<bool> {
    let min = min_eigenvalue(m)?;
    Ok(min > pd_threshold(m, tol))
}

/// The relative margin used for strict PD verdicts.
pub fn pd_threshold(m: &SymMatrix, tol: &Tolerance) -> f64 {
    tol.pd_eps * (1.0 + m.max_diag_abs())
}

/// Compact SVD of a wide matrix (`m >= n`): returns `(U, D, V)` with `U` an
/// `n x n` orthogonal matrix, `D` the `n` singular values in descending order
/// and `V` an `n x m` matrix with orthonormal rows, so `M = U diag(D) V`.
pub fn compact_svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    if m.ncols() < m.nrows() {
        return Err(Error::InvalidInput(format!(
            "compact SVD expects at least as many columns as rows, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let svd = nalgebra::SVD::try_new(m.clone(), true, true, f64::EPSILON, ITER_CAP)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let u = svd.u.unwrap();
    let v = svd.v_t.unwrap();
    Ok((u, svd.singular_values, v))
}

/// Largest singular value of an arbitrary matrix.
pub fn max_singular_value(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0.0);
    }
    let svd = nalgebra::SVD::try_new(m.clone(), false, false, f64::EPSILON, ITER_CAP)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    Ok(svd.singular_values.max())
}

/// Solves `M x = rhs` for symmetric positive-definite `M` via Cholesky.
pub fn solve_spd(m: &SymMatrix, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = nalgebra::Cholesky::new(m.m.clone()).ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(rhs))
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(m: &SymMatrix) -> Result<SymMatrix> {
    let chol = nalgebra::Cholesky::new(m.m.clone()).ok_or(Error::NotPositiveDefinite)?;
    SymMatrix::new(chol.inverse())
}

/// Symmetric square root of a positive-semidefinite matrix. Eigenvalues in
/// `[-eig_eps, 0)` are clipped to zero; anything below fails.
pub fn spd_sqrt(m: &SymMatrix, tol: &Tolerance) -> Result<SymMatrix> {
    let (vals, vecs) = sym_eigen(m)?;
    let mut roots = Vec::with_capacity(vals.len());
    for &v in &vals {
        if v < -tol.eig_eps {
            return Err(Error::NotPositiveSemidefinite(v));
        }
        roots.push(v.max(0.0).sqrt());
    }
    let d = DMatrix::from_diagonal(&DVector::from_vec(roots));
    let r = &vecs * d * vecs.transpose();
    SymMatrix::new((&r + r.transpose()) * 0.5)
}

/// Largest real part over the (complex) spectrum of a square matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solves the continuous Lyapunov equation `A^T X + X A + Q = 0` by the
/// Kronecker-product linearization. Intended for small dimensions.
pub fn lyapunov_solve(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    // vec(A^T X) = (I (x) A^T) vec X, vec(X A) = (A^T (x) I) vec X.
    let coeff = id.kronecker(&at) + at.kronecker(&id);
    let rhs = DVector::from_column_slice(q.as_slice()) * -1.0;
    let sol = coeff
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalFailure("singular Lyapunov operator".into()))?;
    Ok(DMatrix::from_column_slice(n, n, sol.as_slice()))
}

/// LQR gain `K = R^-1 B^T X` where `X` solves the continuous algebraic
/// Riccati equation. The stable invariant subspace of the Hamiltonian matrix
/// is extracted with the matrix sign iteration, then `X` is polished by
/// Newton (Kleinman) steps. The returned gain makes `A - BK` Hurwitz.
pub fn care_lqr_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if b.nrows() != n || q.nrows() != n || q.ncols() != n || r.nrows() != b.ncols() {
        return Err(Error::InvalidInput("inconsistent CARE dimensions".into()));
    }
    let r_chol =
        nalgebra::Cholesky::new(r.clone()).ok_or_else(|| Error::RiccatiFailure("R not positive definite".into()))?;
    let rinv_bt = r_chol.solve(&b.transpose());
    let g = b * &rinv_bt;

    // Hamiltonian [A, -G; -Q, -A^T].
    let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    // Matrix sign iteration with determinant scaling.
    let mut z = h;
    for _ in 0..200 {
        let zinv = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::RiccatiFailure("Hamiltonian iterate became singular".into()))?;
        let det = z.determinant().abs();
        let c = if det.is_finite() && det > 0.0 {
            det.powf(1.0 / (2.0 * n as f64))
        } else {
            1.0
        };
        let next = (&z / c + zinv * c) * 0.5;
        let diff = (&next - &z).norm();
        let scale = z.norm();
        z = next;
        if diff <= 1e-13 * (1.0 + scale) {
            break;
        }
    }

    // Columns of (I - sign(H)) / 2 span the stable invariant subspace.
    let w = (DMatrix::<f64>::identity(2 * n, 2 * n) - &z) * 0.5;
    let svd = nalgebra::SVD::try_new(w, true, false, f64::EPSILON, ITER_CAP)
        .ok_or_else(|| Error::RiccatiFailure("subspace SVD did not converge".into()))?;
    let u = svd.u.unwrap();
    let basis = u.columns(0, n).into_owned();
    let u1 = basis.rows(0, n).into_owned();
    let u2 = basis.rows(n, n).into_owned();
    let x_t = u1
        .transpose()
        .lu()
        .solve(&u2.transpose())
        .ok_or_else(|| Error::RiccatiFailure("stable subspace has no graph representation".into()))?;
    let mut x = x_t.transpose();
    x = (&x + x.transpose()) * 0.5;

    let residual_of = |x: &DMatrix<f64>| -> f64 {
        (a.transpose() * x + x * a - x * &g * x + q).norm()
    };

    // Newton polish: solve (A - G X)^T X+ + X+ (A - G X) = -(Q + X G X).
    for _ in 0..25 {
        let res = residual_of(&x);
        if res <= 1e-12 * (1.0 + x.norm()) {
            break;
        }
        let acl = a - &g * &x;
        let rhs = q + &x * &g * &x;
        match lyapunov_solve(&acl, &rhs) {
            Ok(mut xn) => {
                xn = (&xn + xn.transpose()) * 0.5;
                if residual_of(&xn) < res {
                    x = xn;
                } else {
                    break;
                }
            }
            Err(_) => break,
        }
    }

    if residual_of(&x) > 1e-6 * (1.0 + x.norm()) {
        return Err(Error::RiccatiFailure(format!(
            "CARE residual {:.3e} above tolerance",
            residual_of(&x)
        )));
    }
    let k = &rinv_bt * &x;
    let acl = a - b * &k;
    if spectral_abscissa(&acl) >= 0.0 {
        return Err(Error::RiccatiFailure("closed loop is not Hurwitz".into()));
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sym(m: DMatrix<f64>) -> SymMatrix {
        SymMatrix::new(m).unwrap()
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(SymMatrix::new(m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn eigenvalues_identity_and_diagonal() {
        let vals = sym_eigenvalues(&sym(DMatrix::identity(2, 2))).unwrap();
        assert_eq!(vals, vec![1.0, 1.0]);
        let d = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -1.0]);
        let vals = sym_eigenvalues(&sym(d)).unwrap();
        assert_abs_diff_eq!(vals[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn eigen_reconstruction_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let raw = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-2.0..2.0));
            let s = sym((&raw + raw.transpose()) * 0.5);
            let (vals, vecs) = sym_eigen(&s).unwrap();
            let lam = DMatrix::from_diagonal(&DVector::from_vec(vals.clone()));
            let rec = &vecs * lam * vecs.transpose();
            let res = (s.as_matrix() - rec).norm();
            assert!(res <= 1e-8 * (1.0 + s.as_matrix().norm()));
            let trace: f64 = (0..5).map(|i| s.as_matrix()[(i, i)]).sum();
            let sum: f64 = vals.iter().sum();
            assert!((trace - sum).abs() <= 1e-8 * (1.0 + s.as_matrix().norm()));
        }
    }

    #[test]
    fn pd_basic_cases() {
        let tol = Tolerance::default();
        assert!(is_positive_definite(&sym(DMatrix::identity(3, 3)), &tol).unwrap());
        assert!(!is_positive_definite(&sym(DMatrix::zeros(3, 3)), &tol).unwrap());
    }

    #[test]
    fn pd_agrees_with_cholesky_away_from_margin() {
        let tol = Tolerance::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 1000 {
            let n = rng.gen_range(1..=5);
            let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let s = sym((&raw + raw.transpose()) * 0.5);
            let min = min_eigenvalue(&s).unwrap();
            let margin = pd_threshold(&s, &tol);
            if (min - margin).abs() < 1e-6 {
                continue;
            }
            let verdict = is_positive_definite(&s, &tol).unwrap();
            let chol_ok = nalgebra::Cholesky::new(s.as_matrix().clone()).is_some();
            assert_eq!(verdict, chol_ok, "min eig {min}");
            checked += 1;
        }
    }

    #[test]
    fn compact_svd_padded_identity() {
        let mut m = DMatrix::zeros(2, 3);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 1.0;
        let (_, d, v) = compact_svd(&m).unwrap();
        assert_abs_diff_eq!(d[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[1], 1.0, epsilon = 1e-12);
        let vvt = &v * v.transpose();
        assert!((vvt - DMatrix::identity(2, 2)).norm() <= 1e-10);
    }

    #[test]
    fn compact_svd_identity_pair() {
        let n = 3;
        let mut m = DMatrix::zeros(n, 2 * n);
        for i in 0..n {
            m[(i, i)] = 1.0;
            m[(i, n + i)] = 1.0;
        }
        let (_, d, _) = compact_svd(&m).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(d[i], 2.0_f64.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn compact_svd_reconstruction_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = DMatrix::from_fn(3, 8, |_, _| rng.gen_range(-1.0..1.0));
        let (u, d, v) = compact_svd(&m).unwrap();
        let rec = &u * DMatrix::from_diagonal(&d) * &v;
        assert!((&m - rec).norm() <= 1e-8 * (1.0 + m.norm()));
    }

    #[test]
    fn max_singular_value_cases() {
        let c = DMatrix::from_column_slice(3, 1, &[3.0, 0.0, 4.0]);
        assert_abs_diff_eq!(max_singular_value(&c).unwrap(), 5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            max_singular_value(&DMatrix::identity(2, 2)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = DMatrix::from_fn(4, 2, |_, _| rng.gen_range(-1.0..1.0));
        // Power iteration oracle on M^T M.
        let mtm = m.transpose() * &m;
        let mut v: DVector<f64> = DVector::from_element(2, 1.0);
        for _ in 0..500 {
            v = &mtm * v;
            v /= v.norm();
        }
        let oracle = (v.dot(&(&mtm * &v))).sqrt();
        assert_abs_diff_eq!(max_singular_value(&m).unwrap(), oracle, epsilon = 1e-8);
    }

    #[test]
    fn solve_spd_cases() {
        let m = sym(DMatrix::identity(3, 3));
        let rhs = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let x = solve_spd(&m, &rhs).unwrap();
        assert!((x - rhs).norm() < 1e-14);
        let d = sym(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]));
        let rhs = DMatrix::from_column_slice(2, 1, &[2.0, 4.0]);
        let x = solve_spd(&d, &rhs).unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[(1, 0)], 1.0, epsilon = 1e-12);
        let bad = sym(DMatrix::zeros(2, 2));
        assert!(matches!(
            solve_spd(&bad, &rhs),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn spd_sqrt_cases() {
        let tol = Tolerance::default();
        let r = spd_sqrt(&sym(DMatrix::identity(3, 3)), &tol).unwrap();
        assert!((r.as_matrix() - DMatrix::identity(3, 3)).norm() < 1e-12);
        let d = sym(DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]));
        let r = spd_sqrt(&d, &tol).unwrap();
        assert_abs_diff_eq!(r.as_matrix()[(0, 0)], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.as_matrix()[(1, 1)], 3.0, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let raw = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let spd = sym(&raw * raw.transpose() + DMatrix::identity(4, 4) * 0.1);
        let r = spd_sqrt(&spd, &tol).unwrap();
        let back = r.as_matrix() * r.as_matrix();
        assert!((back - spd.as_matrix()).norm() <= 1e-7 * (1.0 + spd.as_matrix().norm()));
        let neg = sym(DMatrix::from_row_slice(1, 1, &[-1.0]));
        assert!(matches!(
            spd_sqrt(&neg, &tol),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }

    #[test]
    fn care_scalar_closed_form() {
        let a = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let b = DMatrix::from_row_slice(1, 1, &[1.0]);
        let q = DMatrix::from_row_slice(1, 1, &[1.0]);
        let r = DMatrix::from_row_slice(1, 1, &[1.0]);
        let k = care_lqr_gain(&a, &b, &q, &r).unwrap();
        assert_abs_diff_eq!(k[(0, 0)], 2.0_f64.sqrt() - 1.0, epsilon = 1e-10);
    }

    #[test]
    fn care_random_residual() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, -0.2, -0.8]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.5]);
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::from_row_slice(1, 1, &[2.0]);
        let k = care_lqr_gain(&a, &b, &q, &r).unwrap();
        // Recover X from K and plug back into the CARE.
        let x_row = &r * &k; // B^T X
        // For 2x2 with 1 input this underdetermines X, so check the closed loop
        // abscissa and the gain magnitude are sane instead.
        assert!(spectral_abscissa(&(a.clone() - &b * &k)) < 0.0);
        assert!(x_row.norm() < 10.0);
    }

    #[test]
    fn lyapunov_residual() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.2, 0.0, -0.5]);
        let q = DMatrix::identity(2, 2);
        let x = lyapunov_solve(&a, &q).unwrap();
        let res = (a.transpose() * &x + &x * &a + &q).norm();
        assert!(res < 1e-12);
    }

    #[test]
    fn abscissa_cases() {
        assert_abs_diff_eq!(
            spectral_abscissa(&DMatrix::identity(2, 2)),
            1.0,
            epsilon = 1e-12
        );
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(spectral_abscissa(&rot).abs() < 1e-10);
    }
}
