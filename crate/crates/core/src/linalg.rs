//! Small complex linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub use nalgebra::Complex;

/// Complex double.
pub type C64 = Complex<f64>;
/// Dense complex matrix.
pub type CMat = DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = DVector<C64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

#[inline]
pub fn cis(phase: f64) -> C64 {
    Complex::from_polar(1.0, phase)
}

/// `(m + mᴴ) / 2`.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn is_finite_mat(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn is_finite_vec(v: &CVec) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
///
/// Column `i` of the returned matrix is the eigenvector for eigenvalue `i`.
pub fn hermitian_eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitize(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigh(m).0.first().copied().unwrap_or(0.0)
}

/// `diag(v)` as a dense matrix.
pub fn diag_mat(v: &CVec) -> CMat {
    CMat::from_diagonal(v)
}

/// Real trace of `a * b` for Hermitian arguments.
pub fn trace_product(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// `aᴴ b`.
#[inline]
pub fn inner(a: &CVec, b: &CVec) -> C64 {
    a.dotc(b)
}

/// Frobenius norm squared.
pub fn fro2(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Real diagonal matrix helper used for congruence scaling.
pub fn real_diag(values: &[f64]) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| c(v, 0.0)),
    ))
}

/// Draw a circularly-symmetric complex Gaussian with unit variance.
pub fn crandn<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    use rand_distr::StandardNormal;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn crandn_vec<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    CVec::from_iterator(n, (0..n).map(|_| crandn(rng)))
}

pub fn crandn_mat<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| crandn(rng))
}

/// Random Hermitian matrix with standard Gaussian entries.
pub fn random_hermitian<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    hermitize(&crandn_mat(n, n, rng))
}

/// Random PSD matrix `B Bᴴ` with `B` of shape `n × rank`.
pub fn random_psd<R: rand::Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> CMat {
    let b = crandn_mat(n, rank, rng);
    hermitize(&(&b * b.adjoint()))
}
