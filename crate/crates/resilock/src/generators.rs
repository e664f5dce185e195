//! Constructions of loss-tolerant control matrices: identity stacks with a
//! mean column, orthogonal sign matrices built from Sylvester doublings, and
//! three embedded large sign-matrix fixtures known to tolerate any two losses.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::resilience::ControlMatrix;

/// `n x (2pn + 1)` matrix made of `2p` identity blocks followed by the
/// column `(1/sqrt(n)) * ones`. Tolerates the loss of any `p` actuators.
pub fn gen_identity_stack(n: usize, p: usize) -> Result<ControlMatrix> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput("n and p must be >= 1".into()));
    }
    let m = 2 * p * n + 1;
    let mut out = DMatrix::zeros(n, m);
    for block in 0..2 * p {
        for i in 0..n {
            out[(i, block * n + i)] = 1.0;
        }
    }
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    for i in 0..n {
        out[(i, m - 1)] = inv_sqrt_n;
    }
    ControlMatrix::new(out)
}

/// Square orthogonal sign matrix of the given order, built by Sylvester
/// doubling from order 1; only powers of two are supported.
pub fn gen_hadamard(order: usize) -> Result<DMatrix<f64>> {
    if order == 0 || !order.is_power_of_two() {
        return Err(Error::UnsupportedOrder(order));
    }
    let mut h = DMatrix::from_element(1, 1, 1.0);
    let mut size = 1;
    while size < order {
        let mut next = DMatrix::zeros(2 * size, 2 * size);
        next.view_mut((0, 0), (size, size)).copy_from(&h);
        next.view_mut((0, size), (size, size)).copy_from(&h);
        next.view_mut((size, 0), (size, size)).copy_from(&h);
        next.view_mut((size, size), (size, size)).copy_from(&(-&h));
        h = next;
        size *= 2;
    }
    Ok(h)
}

fn smallest_supported_order(n: usize, m: usize) -> usize {
    let mut order: usize = 1;
    while order < m || order < 2 * n + 1 || (n >= 1 && order < 1usize << (n - 1)) {
        order *= 2;
    }
    order
}

/// `n x m` matrix with orthonormal rows and equal column norms, taken from
/// rows of a Sylvester sign matrix and scaled by `1/sqrt(m)`. If `m` is not a
/// supported order, the smallest power of two at least `max(m, 2n+1)` is used
/// instead. Every column then has norm `sqrt(n/m) < 1/sqrt(2)`, so the result
/// tolerates any single actuator loss.
pub fn gen_sign_orthogonal(n: usize, m: usize) -> Result<ControlMatrix> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    let order = if m.is_power_of_two() && m >= 2 * n + 1 && (n == 1 || m >= 1usize << (n - 1)) {
        m
    } else {
        smallest_supported_order(n, m)
    };
    let h = gen_hadamard(order)?;
    // Row 0 is all ones; the following rows halve the block period each time,
    // reproducing the coarsest-to-finest sign patterns.
    let mut rows = Vec::with_capacity(n);
    rows.push(0);
    let mut r = order;
    for _ in 1..n {
        r /= 2;
        rows.push(r);
    }
    let scale = 1.0 / (order as f64).sqrt();
    let out = DMatrix::from_fn(n, order, |i, j| h[(rows[i], j)] * scale);
    ControlMatrix::new(out)
}

const FIX_6X24: [[i8; 24]; 6] = [
    [
        1, 1, 1, 1, 1, -1, -1, -1, -1, -1, 1, 1, 1, 1, 1, 1, 1, 1, -1, -1, -1, 1, -1, 1,
    ],
    [
        1, -1, 1, 1, 1, -1, 1, 1, 1, 1, -1, -1, 1, 1, 1, 1, 1, -1, 1, -1, 1, -1, 1, 1,
    ],
    [
        1, 1, 1, 1, 1, 1, -1, 1, 1, 1, -1, 1, -1, -1, -1, 1, -1, 1, -1, 1, -1, -1, 1, 1,
    ],
    [
        1, 1, -1, 1, 1, 1, 1, -1, 1, 1, 1, 1, -1, 1, 1, -1, -1, -1, 1, -1, -1, 1, 1, -1,
    ],
    [
        1, 1, 1, -1, 1, 1, 1, 1, -1, 1, 1, -1, 1, -1, 1, 1, -1, -1, -1, 1, 1, 1, -1, -1,
    ],
    [
        1, 1, 1, 1, -1, 1, 1, 1, 1, -1, 1, 1, 1, 1, -1, -1, 1, 1, 1, 1, 1, -1, -1, -1,
    ],
];

// Stored column-wise: each inner array is one column of the 8x32 matrix.
const FIX_8X32_COLS: [[i8; 8]; 32] = [
    [1, 1, 1, 1, 1, 1, 1, 1],
    [1, 1, 1, 1, 1, 1, 1, -1],
    [1, 1, 1, 1, 1, 1, -1, 1],
    [1, 1, 1, 1, 1, 1, -1, -1],
    [1, 1, 1, 1, -1, -1, 1, 1],
    [1, 1, -1, -1, 1, 1, 1, 1],
    [-1, -1, 1, 1, 1, 1, 1, 1],
    [1, 1, 1, 1, -1, -1, 1, -1],
    [1, 1, -1, -1, 1, 1, 1, -1],
    [-1, -1, 1, 1, 1, 1, 1, -1],
    [1, 1, 1, 1, -1, -1, -1, 1],
    [1, 1, -1, -1, 1, 1, -1, 1],
    [-1, -1, 1, 1, 1, 1, -1, 1],
    [1, -1, 1, -1, 1, -1, 1, 1],
    [1, -1, -1, 1, 1, -1, 1, 1],
    [-1, 1, 1, -1, 1, -1, 1, 1],
    [-1, 1, -1, 1, 1, -1, 1, 1],
    [1, -1, -1, 1, -1, 1, 1, 1],
    [1, -1, 1, -1, -1, 1, 1, 1],
    [-1, 1, -1, 1, -1, 1, 1, 1],
    [-1, 1, 1, -1, -1, 1, 1, 1],
    [1, 1, 1, 1, -1, -1, -1, -1],
    [1, 1, -1, -1, 1, 1, -1, -1],
    [1, -1, -1, 1, 1, -1, 1, -1],
    [1, -1, 1, -1, 1, -1, 1, -1],
    [1, -1, -1, 1, -1, 1, 1, -1],
    [1, -1, 1, -1, -1, 1, 1, -1],
    [1, -1, -1, 1, -1, 1, -1, 1],
    [1, -1, -1, 1, 1, -1, -1, 1],
    [1, -1, 1, -1, 1, -1, -1, 1],
    [1, -1, 1, -1, -1, 1, -1, 1],
    [1, 1, -1, -1, -1, -1, 1, 1],
];

// Stored column-wise: each inner array is one column of the 12x46 matrix.
const FIX_12X46_COLS: [[i8; 12]; 46] = [
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
    [-1, 1, 1, -1, 1, 1, 1, -1, -1, 1, -1, 1],
    [-1, -1, 1, 1, -1, 1, 1, 1, -1, -1, -1, -1],
    [-1, 1, -1, 1, 1, -1, 1, 1, -1, 1, -1, 1],
    [-1, -1, 1, -1, 1, 1, -1, 1, -1, -1, -1, -1],
    [-1, -1, -1, 1, -1, 1, 1, -1, -1, -1, -1, -1],
    [-1, -1, -1, -1, 1, -1, 1, 1, -1, -1, -1, -1],
    [-1, 1, -1, -1, -1, 1, -1, 1, -1, 1, -1, 1],
    [-1, 1, 1, -1, -1, -1, 1, -1, -1, 1, -1, 1],
    [-1, 1, 1, 1, -1, -1, -1, 1, -1, 1, -1, 1],
    [-1, -1, 1, 1, 1, -1, -1, -1, -1, -1, -1, -1],
    [-1, 1, -1, 1, 1, 1, -1, -1, -1, 1, -1, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1],
    [-1, 1, 1, -1, 1, 1, 1, -1, 1, -1, -1, 1],
    [-1, -1, 1, 1, -1, 1, 1, 1, 1, 1, -1, -1],
    [-1, 1, -1, 1, 1, -1, 1, 1, 1, -1, -1, 1],
    [-1, -1, 1, -1, 1, 1, -1, 1, 1, 1, -1, -1],
    [-1, -1, -1, 1, -1, 1, 1, -1, 1, 1, -1, -1],
    [-1, -1, -1, -1, 1, -1, 1, 1, 1, 1, -1, -1],
    [-1, 1, -1, -1, -1, 1, -1, 1, 1, -1, -1, 1],
    [-1, 1, 1, -1, -1, -1, 1, -1, 1, -1, -1, 1],
    [-1, 1, 1, 1, -1, -1, -1, 1, 1, -1, -1, 1],
    [-1, -1, 1, 1, 1, -1, -1, -1, 1, 1, -1, -1],
    [-1, 1, -1, 1, 1, 1, -1, -1, 1, -1, -1, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, -1, -1],
    [-1, 1, 1, -1, 1, 1, 1, -1, -1, 1, 1, -1],
    [-1, -1, 1, 1, -1, 1, 1, 1, -1, -1, 1, 1],
    [-1, 1, -1, 1, 1, -1, 1, 1, -1, 1, 1, -1],
    [-1, -1, 1, -1, 1, 1, -1, 1, -1, -1, 1, 1],
    [-1, -1, -1, 1, -1, 1, 1, -1, -1, -1, 1, 1],
    [-1, -1, -1, -1, 1, -1, 1, 1, -1, -1, 1, 1],
    [-1, 1, -1, -1, -1, 1, -1, 1, -1, 1, 1, -1],
    [-1, 1, 1, -1, -1, -1, 1, -1, -1, 1, 1, -1],
    [-1, 1, 1, 1, -1, -1, -1, 1, -1, 1, 1, -1],
    [-1, -1, 1, 1, 1, -1, -1, -1, -1, -1, 1, 1],
    [-1, 1, -1, 1, 1, 1, -1, -1, -1, 1, 1, -1],
    [1, 1, 1, 1, 1, 1, 1, 1, -1, -1, -1, -1],
    [-1, 1, 1, -1, 1, 1, 1, -1, 1, -1, 1, -1],
    [-1, -1, 1, 1, -1, 1, 1, 1, 1, 1, 1, 1],
    [-1, 1, -1, 1, 1, -1, 1, 1, 1, -1, 1, -1],
    [-1, -1, 1, -1, 1, 1, -1, 1, 1, 1, 1, 1],
    [-1, -1, -1, 1, -1, 1, 1, -1, 1, 1, 1, 1],
    [-1, -1, -1, -1, 1, -1, 1, 1, 1, 1, 1, 1],
    [-1, 1, -1, -1, -1, 1, -1, 1, 1, -1, 1, -1],
    [-1, 1, 1, -1, -1, -1, 1, -1, 1, -1, 1, -1],
    [-1, 1, 1, 1, -1, -1, -1, 1, 1, -1, 1, -1],
];

/// Embedded sign-matrix fixtures ("6x24", "8x32", "12x46"), each tolerating
/// the simultaneous loss of any two actuators.
pub fn appendix_fixture(name: &str) -> Result<ControlMatrix> {
    let entries = match name {
        "6x24" => DMatrix::from_fn(6, 24, |i, j| f64::from(FIX_6X24[i][j])),
        "8x32" => DMatrix::from_fn(8, 32, |i, j| f64::from(FIX_8X32_COLS[j][i])),
        "12x46" => DMatrix::from_fn(12, 46, |i, j| f64::from(FIX_12X46_COLS[j][i])),
        other => return Err(Error::UnknownFixture(other.to_string())),
    };
    ControlMatrix::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Tolerance;
    use crate::resilience::{check_p_resilience, DEFAULT_COMBINATION_CAP};
    use nalgebra::DMatrix;

    #[test]
    fn identity_stack_shapes_and_resilience() {
        let tol = Tolerance::default();
        let m = gen_identity_stack(2, 1).unwrap();
        assert_eq!((m.n(), m.m()), (2, 5));
        assert!(
            check_p_resilience(&m, 1, &tol, DEFAULT_COMBINATION_CAP)
                .unwrap()
                .overall
        );
        let ones = gen_identity_stack(1, 2).unwrap();
        assert_eq!((ones.n(), ones.m()), (1, 5));
        assert!(ones.entries().iter().all(|&v| v == 1.0));
        assert!(
            check_p_resilience(&ones, 2, &tol, DEFAULT_COMBINATION_CAP)
                .unwrap()
                .overall
        );
        let big = gen_identity_stack(3, 2).unwrap();
        assert_eq!((big.n(), big.m()), (3, 13));
        assert!(
            check_p_resilience(&big, 2, &tol, DEFAULT_COMBINATION_CAP)
                .unwrap()
                .overall
        );
    }

    #[test]
    fn hadamard_orders() {
        let h2 = gen_hadamard(2).unwrap();
        assert_eq!(h2, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]));
        for order in [4usize, 32] {
            let h = gen_hadamard(order).unwrap();
            let prod = &h * h.transpose();
            let expect = DMatrix::identity(order, order) * order as f64;
            assert!((prod - expect).amax() < 1e-12);
        }
        assert!(matches!(gen_hadamard(12), Err(Error::UnsupportedOrder(12))));
        assert!(matches!(gen_hadamard(0), Err(Error::UnsupportedOrder(0))));
    }

    #[test]
    fn sign_orthogonal_basic() {
        let tol = Tolerance::default();
        let m = gen_sign_orthogonal(2, 8).unwrap();
        assert_eq!((m.n(), m.m()), (2, 8));
        let vvt = m.entries() * m.entries().transpose();
        assert!((vvt - DMatrix::identity(2, 2)).amax() < 1e-12);
        assert!(
            check_p_resilience(&m, 1, &tol, DEFAULT_COMBINATION_CAP)
                .unwrap()
                .overall
        );
        // Equal column norms exactly.
        let norms: Vec<f64> = (0..m.m()).map(|j| m.entries().column(j).norm()).collect();
        for w in norms.windows(2) {
            assert_eq!(w[0], w[1]);
        }
    }

    #[test]
    fn sign_orthogonal_3x8_pattern() {
        let m = gen_sign_orthogonal(3, 8).unwrap();
        let s = 1.0 / 8.0_f64.sqrt();
        let expect = DMatrix::from_row_slice(
            3,
            8,
            &[
                s, s, s, s, s, s, s, s, //
                s, s, s, s, -s, -s, -s, -s, //
                s, s, -s, -s, s, s, -s, -s,
            ],
        );
        assert!((m.entries() - expect).amax() < 1e-14);
    }

    #[test]
    fn sign_orthogonal_auto_order() {
        // m = 3 is unsupported for n = 1; the next power of two >= 2n+1 is 4.
        let m = gen_sign_orthogonal(1, 3).unwrap();
        assert_eq!((m.n(), m.m()), (1, 4));
        assert!(m.entries().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn fixtures_shapes() {
        let f = appendix_fixture("6x24").unwrap();
        assert_eq!((f.n(), f.m()), (6, 24));
        let f = appendix_fixture("8x32").unwrap();
        assert_eq!((f.n(), f.m()), (8, 32));
        let f = appendix_fixture("12x46").unwrap();
        assert_eq!((f.n(), f.m()), (12, 46));
        assert!(matches!(
            appendix_fixture("5x5"),
            Err(Error::UnknownFixture(_))
        ));
    }

    #[test]
    fn fixture_6x24_two_loss_tolerance() {
        let tol = Tolerance::default();
        let f = appendix_fixture("6x24").unwrap();
        let report = check_p_resilience(&f, 2, &tol, DEFAULT_COMBINATION_CAP).unwrap();
        assert!(report.overall);
        assert_eq!(report.verdicts.len(), 276);
    }

    #[test]
    fn collinear_column_upgrade_to_two_loss_tolerance() {
        // Appending the negation of one column to an orthogonal sign matrix
        // with enough columns tolerates any two losses.
        let tol = Tolerance::default();
        for n in 1..=3usize {
            let mut m = 4 * n + 1;
            while !m.is_power_of_two() {
                m += 1;
            }
            let base = gen_sign_orthogonal(n, m).unwrap();
            let cols = base.m();
            let mut ext = DMatrix::zeros(n, cols + 1);
            ext.view_mut((0, 0), (n, cols)).copy_from(base.entries());
            let neg = -base.entries().column(0);
            ext.set_column(cols, &neg);
            let ext = ControlMatrix::new(ext).unwrap();
            let report = check_p_resilience(&ext, 2, &tol, DEFAULT_COMBINATION_CAP).unwrap();
            assert!(report.overall, "n = {n}, m = {}", cols + 1);
        }
    }
}
