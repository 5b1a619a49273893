//! Dense complex linear-algebra helpers shared by the channel, sensing and
//! optimization modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Eigenvalues below this are treated as numerical noise around zero when
/// taking square roots or projecting onto the PSD cone.
pub const PSD_TOL: f64 = 1e-8;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `(M + Mᴴ) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn real_trace(m: &CMat) -> f64 {
    m.trace().re
}

/// `hᴴ M h`, real part.
pub fn quad_form(m: &CMat, h: &CVec) -> f64 {
    h.dotc(&(m * h)).re
}

pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// Sorted (ascending) eigenvalues and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && (m - m.adjoint()).camax() <= tol * m.camax().max(1.0)
}

/// Hermitian square root `M^{1/2}` of a PSD matrix. Eigenvalues in
/// `[-PSD_TOL, 0)` are clamped to zero; anything more negative is rejected.
/// Diagonal inputs get an exactly diagonal root.
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    if m.ncols() == n && (0..n).all(|i| (0..n).all(|j| if i == j { m[(i, i)].im == 0.0 } else { m[(i, j)] == Complex64::new(0.0, 0.0) })) {
        let mut root = zeros(n);
        for i in 0..n {
            let d = m[(i, i)].re;
            if d < -PSD_TOL {
                return Err(Error::NotPsd { min_eigenvalue: d });
            }
            root[(i, i)] = c(d.max(0.0).sqrt(), 0.0);
        }
        return Ok(root);
    }
    let (values, vectors) = hermitian_eigen(m);
    if let Some(&lo) = values.first() {
        if lo < -PSD_TOL {
            return Err(Error::NotPsd { min_eigenvalue: lo });
        }
    }
    let roots = DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| c(v.max(0.0).sqrt(), 0.0)),
    );
    Ok(&vectors * CMat::from_diagonal(&roots) * vectors.adjoint())
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues set to zero).
pub fn project_psd(m: &CMat) -> CMat {
    let (values, vectors) = hermitian_eigen(m);
    let clamped = DVector::from_iterator(values.len(), values.iter().map(|&v| c(v.max(0.0), 0.0)));
    hermitian_part(&(&vectors * CMat::from_diagonal(&clamped) * vectors.adjoint()))
}

/// One draw of `CN(0, I_n)`: real and imaginary parts independent with
/// variance 1/2 each.
pub fn complex_gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_iterator(
        n,
        (0..n).map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c(s * re, s * im)
        }),
    )
}

/// 2-norm condition number of a real square matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn check_square(m: &CMat, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}
