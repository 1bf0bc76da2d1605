//! Real parameterization of complex Hermitian matrices.
//!
//! An `n x n` Hermitian `X` is stored as `n^2` reals: the diagonal, then the
//! real parts of the strict upper triangle, then their imaginary parts (row
//! major over `i < j`). The PSD constraint is imposed on the `2n x 2n` real
//! symmetric embedding `[Re X, -Im X; Im X, Re X]`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::HermitianMatrix;

pub fn num_params(n: usize) -> usize {
    n * n
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    // pairs in row-major order over i < j
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

pub fn re_index(n: usize, i: usize, j: usize) -> usize {
    n + pair_index(n, i, j)
}

pub fn im_index(n: usize, i: usize, j: usize) -> usize {
    n + n * (n - 1) / 2 + pair_index(n, i, j)
}

/// Coefficients `w` with `Tr(A X) = sum_k w[k] * params[k]`.
pub fn trace_coefficients(a: &HermitianMatrix) -> Vec<f64> {
    let n = a.nrows();
    let mut w = vec![0.0; num_params(n)];
    for i in 0..n {
        w[i] = a[(i, i)].re;
        for j in i + 1..n {
            // A_ij conj(X_ij) + conj(A_ij) X_ij = 2 (Re A Re X + Im A Im X)
            w[re_index(n, i, j)] = 2.0 * a[(i, j)].re;
            w[im_index(n, i, j)] = 2.0 * a[(i, j)].im;
        }
    }
    w
}

#[cfg(test)]
pub fn to_params(x: &HermitianMatrix) -> Vec<f64> {
    let n = x.nrows();
    let mut p = vec![0.0; num_params(n)];
    for i in 0..n {
        p[i] = x[(i, i)].re;
        for j in i + 1..n {
            p[re_index(n, i, j)] = x[(i, j)].re;
            p[im_index(n, i, j)] = x[(i, j)].im;
        }
    }
    p
}

pub fn from_params(n: usize, p: &[f64]) -> HermitianMatrix {
    let mut x = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        x[(i, i)] = Complex64::new(p[i], 0.0);
        for j in i + 1..n {
            let z = Complex64::new(p[re_index(n, i, j)], p[im_index(n, i, j)]);
            x[(i, j)] = z;
            x[(j, i)] = z.conj();
        }
    }
    x
}

/// `Re Tr(A X)` computed directly in complex arithmetic.
pub fn trace_product(a: &HermitianMatrix, x: &HermitianMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * x[(j, i)]).re;
        }
    }
    acc
}

#[cfg(test)]
pub fn real_embedding(x: &HermitianMatrix) -> DMatrix<f64> {
    let n = x.nrows();
    let mut y = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = x[(i, j)];
            y[(i, j)] = z.re;
            y[(i, n + j)] = -z.im;
            y[(n + i, j)] = z.im;
            y[(n + i, n + j)] = z.re;
        }
    }
    y
}

/// For each entry of the upper-triangular column-major `svec` of the real
/// embedding (off-diagonals scaled by `sqrt(2)`), the parameter it depends
/// on and the coefficient. Entries that are identically zero map to `None`.
pub fn svec_map(n: usize) -> Vec<Option<(usize, f64)>> {
    let m = 2 * n;
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(m * (m + 1) / 2);
    for col in 0..m {
        for row in 0..=col {
            let scale = if row == col { 1.0 } else { sqrt2 };
            out.push(embedded_entry(n, row, col).map(|(k, c)| (k, c * scale)));
        }
    }
    out
}

/// Entry `(row, col)` of the embedding as `coef * params[k]`.
fn embedded_entry(n: usize, row: usize, col: usize) -> Option<(usize, f64)> {
    let (bi, i) = (row / n, row % n);
    let (bj, j) = (col / n, col % n);
    // Re X_ij on the diagonal blocks, Im X_ij below, -Im X_ij above
    let re = |i: usize, j: usize| -> (usize, f64) {
        if i == j {
            (i, 1.0)
        } else {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            (re_index(n, a, b), 1.0)
        }
    };
    let im = |i: usize, j: usize| -> Option<(usize, f64)> {
        if i == j {
            None
        } else if i < j {
            Some((im_index(n, i, j), 1.0))
        } else {
            Some((im_index(n, j, i), -1.0))
        }
    };
    match (bi, bj) {
        (0, 0) | (1, 1) => Some(re(i, j)),
        (1, 0) => im(i, j),
        (0, 1) => im(i, j).map(|(k, c)| (k, -c)),
        _ => unreachable!(),
    }
}
