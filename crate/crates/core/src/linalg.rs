//! Dense factorization helpers.
//!
//! nalgebra's unblocked Cholesky and triangular solves run far below the speed
//! of its matrix product, so the large factorizations here are blocked and
//! push almost all of their work through `gemm`.

use nalgebra::{DMatrix, DVector};

const BLOCK: usize = 96;

/// Lower Cholesky factor of a symmetric matrix, or `None` when it is not
/// numerically positive definite. Only the lower triangle of `a` is read.
pub fn cholesky(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cholesky of a non-square matrix");
    if n <= 2 * BLOCK {
        return small_cholesky(a.clone());
    }
    let mut w = a.clone();
    let mut j = 0;
    while j < n {
        let b = BLOCK.min(n - j);
        let lkk = small_cholesky(w.view((j, j), (b, b)).clone_owned())?;
        w.view_mut((j, j), (b, b)).copy_from(&lkk);
        let rest = n - j - b;
        if rest > 0 {
            let lkk_inv_t = small_lower_inverse(&lkk).transpose();
            let panel = w.view((j + b, j), (rest, b)) * lkk_inv_t;
            w.view_mut((j + b, j), (rest, b)).copy_from(&panel);
            let panel_t = panel.transpose();
            w.view_mut((j + b, j + b), (rest, rest))
                .gemm(-1.0, &panel, &panel_t, 1.0);
        }
        j += b;
    }
    zero_upper(&mut w);
    Some(w)
}

fn small_cholesky(mut a: DMatrix<f64>) -> Option<DMatrix<f64>> {
    // Mirror the lower triangle so nalgebra sees a symmetric input.
    let n = a.nrows();
    for c in 0..n {
        for r in 0..c {
            a[(r, c)] = a[(c, r)];
        }
    }
    let l = a.cholesky()?.unpack();
    if l.iter().all(|v| v.is_finite()) {
        Some(l)
    } else {
        None
    }
}

fn zero_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for c in 1..n {
        for r in 0..c {
            m[(r, c)] = 0.0;
        }
    }
}

fn small_lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    l.solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("triangular factor with zero diagonal")
}

/// Inverse of a lower-triangular matrix with nonzero diagonal, by 2×2 block
/// recursion so the bulk of the work is matrix products.
pub fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    if n <= BLOCK {
        return small_lower_inverse(l);
    }
    let k = n / 2;
    let x11 = lower_inverse(&l.view((0, 0), (k, k)).clone_owned());
    let x22 = lower_inverse(&l.view((k, k), (n - k, n - k)).clone_owned());
    let x21 = -(&x22 * l.view((k, 0), (n - k, k))) * &x11;
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), (k, k)).copy_from(&x11);
    out.view_mut((k, k), (n - k, n - k)).copy_from(&x22);
    out.view_mut((k, 0), (n - k, k)).copy_from(&x21);
    out
}

/// `Aᵀ B` through an explicit transpose, which reaches the blocked product
/// kernel; nalgebra's `tr_mul` uses per-entry dot products.
pub fn at_b(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * b
}

/// `Lᵀ L` for lower-triangular `L`, skipping the structural zeros: column
/// block `J` of the lower half only needs rows `k ≥ min J` of `L`.
pub fn lower_gram(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let t = l.transpose();
    let mut c = DMatrix::zeros(n, n);
    let mut j = 0;
    while j < n {
        let b = (2 * BLOCK).min(n - j);
        c.view_mut((j, j), (n - j, b))
            .gemm(1.0, &t.view((j, j), (n - j, n - j)), &l.view((j, j), (n - j, b)), 0.0);
        j += b;
    }
    for col in 1..n {
        for row in 0..col {
            c[(row, col)] = c[(col, row)];
        }
    }
    c
}

/// log|A| from its Cholesky factor.
pub fn chol_logdet(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Solves `L x = b` for a lower-triangular `L`.
pub fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    l.solve_lower_triangular(b)
        .expect("triangular factor with zero diagonal")
}

/// Solves `Lᵀ x = b` for a lower-triangular `L`.
pub fn solve_lower_transpose(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    l.tr_solve_lower_triangular(b)
        .expect("triangular factor with zero diagonal")
}

/// Solves `A x = b` given the Cholesky factor of `A`.
pub fn chol_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    solve_lower_transpose(l, &solve_lower(l, b))
}

/// Neumaier-compensated sum; the result does not depend on summation order
/// beyond the last few ulps.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
