//! Operator-splitting solver for the block Hermitian SDPs produced by the
//! transmit update:
//!
//! ```text
//! minimize    Σ_k tr(Q_k W_k)
//! subject to  Σ_k tr(A_j W_k) ≤ b_j          (shared inequalities)
//!             diag(Σ_k W_k) = d               (optional)
//!             [W_k]_{n-1,n-1} = c   ∀k        (optional corner equalities)
//!             W_k ⪰ 0
//! ```
//!
//! Each Hermitian block is packed into `n²` real coordinates (diagonal, then
//! `√2·Re` / `√2·Im` of the strict upper triangle) so the Euclidean geometry
//! of the packed vector is the Frobenius geometry of the blocks. Inequalities
//! get nonnegative slacks and join the affine set, so every iteration is one
//! affine projection plus one cone projection (PSD blocks × nonnegative
//! slacks), followed by a scaled dual update. The penalty is tuned by
//! residual balancing.
//!
//! Before iterating, the problem is rescaled: a diagonal congruence
//! `W = S W' S` normalizes the diagonal targets, every constraint row is
//! equilibrated to unit norm, and the objective is divided by its largest
//! coefficient. Residuals reported in [`SdpResiduals`] are in the original
//! units except `stationarity` and `gap`, which are relative.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigh, hermitize, is_finite_mat, real_diag, trace_product, CMat};

/// `Σ_k tr(matrix · W_k) ≤ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedInequality {
    pub matrix: CMat,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSdp {
    pub blocks: usize,
    pub dim: usize,
    pub objective: Vec<CMat>,
    pub inequalities: Vec<SharedInequality>,
    /// Right-hand side of `diag(Σ_k W_k) = d`.
    pub diag_rhs: Option<Vec<f64>>,
    /// Value of the last diagonal entry of every block.
    pub corner: Option<f64>,
}

impl BlockSdp {
    fn validate(&self) -> Result<()> {
        let n = self.dim;
        if self.blocks == 0 || n == 0 {
            return Err(Error::invalid("SDP needs at least one block of positive dimension"));
        }
        if self.objective.len() != self.blocks {
            return Err(Error::DimensionMismatch {
                context: "BlockSdp objective",
                expected: self.blocks,
                actual: self.objective.len(),
            });
        }
        let mats = self
            .objective
            .iter()
            .chain(self.inequalities.iter().map(|i| &i.matrix));
        for m in mats {
            if m.shape() != (n, n) {
                return Err(Error::DimensionMismatch {
                    context: "BlockSdp matrix",
                    expected: n,
                    actual: m.nrows(),
                });
            }
            if !is_finite_mat(m) {
                return Err(Error::NonFinite("BlockSdp matrix"));
            }
        }
        if let Some(d) = &self.diag_rhs {
            if d.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "BlockSdp diag_rhs",
                    expected: n,
                    actual: d.len(),
                });
            }
            if d.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("BlockSdp diag_rhs"));
            }
        }
        if self.inequalities.iter().any(|i| !i.rhs.is_finite())
            || self.corner.is_some_and(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("BlockSdp right-hand side"));
        }
        Ok(())
    }

    /// Objective `Σ_k tr(Q_k W_k)`.
    pub fn objective_value(&self, w: &[CMat]) -> f64 {
        self.objective
            .iter()
            .zip(w)
            .map(|(q, wk)| trace_product(q, wk))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSettings {
    pub tol: f64,
    pub max_iters: usize,
    /// Over-relaxation factor in (0, 2).
    pub relaxation: f64,
    /// Initial penalty.
    pub rho: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iters: 20_000,
            relaxation: 1.6,
            rho: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Solved,
    /// Iteration budget exhausted; residuals describe the returned point.
    Inaccurate,
    /// The equality constraints are inconsistent.
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SdpResiduals {
    /// Max absolute violation of the equality constraints.
    pub equality: f64,
    /// Max positive violation of the inequality constraints.
    pub inequality: f64,
    /// `max(0, -λ_min)` over the returned blocks.
    pub cone: f64,
    /// Relative norm of the dual stationarity residual.
    pub stationarity: f64,
    /// Relative duality gap.
    pub gap: f64,
}

impl SdpResiduals {
    pub fn max_primal(&self) -> f64 {
        self.equality.max(self.inequality).max(self.cone)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub w: Vec<CMat>,
    pub objective: f64,
    pub residuals: SdpResiduals,
    pub iterations: usize,
    pub status: SdpStatus,
}

/// Nearest PSD matrix in Frobenius norm (input is symmetrized first).
pub fn project_psd(h: &CMat) -> Result<CMat> {
    if !h.is_square() {
        return Err(Error::invalid("project_psd needs a square matrix"));
    }
    if !is_finite_mat(h) {
        return Err(Error::NonFinite("project_psd input"));
    }
    let (vals, vecs) = hermitian_eigh(h);
    let clamped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    Ok(hermitize(&(&vecs * real_diag(&clamped) * vecs.adjoint())))
}

// Packed Hermitian coordinates.

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn packed_len(n: usize) -> usize {
    n * n
}

fn pack_into(m: &CMat, out: &mut [f64]) {
    let n = m.nrows();
    for i in 0..n {
        out[i] = m[(i, i)].re;
    }
    let mut p = n;
    for i in 0..n {
        for j in (i + 1)..n {
            let z = m[(i, j)];
            out[p] = SQRT2 * z.re;
            out[p + 1] = SQRT2 * z.im;
            p += 2;
        }
    }
}

fn unpack(v: &[f64], n: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = c(v[i], 0.0);
    }
    let mut p = n;
    for i in 0..n {
        for j in (i + 1)..n {
            let z = c(v[p], v[p + 1]) / SQRT2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            p += 2;
        }
    }
    m
}

/// Fully assembled, scaled problem in packed coordinates.
struct Packed {
    n: usize,
    k: usize,
    n_ineq: usize,
    /// Per-index congruence scale.
    scale: Vec<f64>,
    /// Objective normalization factor.
    obj_scale: f64,
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    /// Pseudo-inverse of `A Aᵀ`.
    aat_pinv: DMatrix<f64>,
    /// Row kinds for unscaled residual reporting: `true` for inequalities.
    row_is_ineq: Vec<bool>,
    /// Factor turning a scaled row residual back into original units.
    row_unscale: Vec<f64>,
}

impl Packed {
    fn dim(&self) -> usize {
        self.k * packed_len(self.n) + self.n_ineq
    }

    fn block_range(&self, k: usize) -> std::ops::Range<usize> {
        let p = packed_len(self.n);
        k * p..(k + 1) * p
    }

    fn build(problem: &BlockSdp) -> Result<(Self, bool)> {
        let (n, k) = (problem.dim, problem.blocks);
        let p = packed_len(n);

        let scale: Vec<f64> = match &problem.diag_rhs {
            Some(d) => d
                .iter()
                .map(|&v| if v > 0.0 { (v / k as f64).sqrt() } else { 1.0 })
                .collect(),
            None => vec![1.0; n],
        };
        let s_mat = real_diag(&scale);
        let congruent = |m: &CMat| -> CMat { &s_mat * m * &s_mat };

        // With the diagonal fixed, Σ_k tr(A W_k) ≤ λ_max(A) Σ_i d_i, so rows
        // whose rhs exceeds that bound (including zero rows) never bind.
        let diag_total = problem.diag_rhs.as_ref().map(|d| d.iter().sum::<f64>());
        let mut ineqs = Vec::new();
        let mut infeasible = false;
        for ineq in &problem.inequalities {
            if let Some(total) = diag_total {
                let top = hermitian_eigh(&hermitize(&ineq.matrix)).0.last().copied().unwrap_or(0.0);
                if top >= 0.0 && total >= 0.0 && ineq.rhs >= top * total * (1.0 + 1e-12) {
                    continue;
                }
            }
            let scaled = congruent(&ineq.matrix);
            if scaled.iter().all(|z| z.norm_sqr() == 0.0) {
                if ineq.rhs < 0.0 {
                    infeasible = true;
                }
                continue;
            }
            ineqs.push((scaled, ineq.rhs));
        }
        let n_ineq = ineqs.len();
        let dim = k * p + n_ineq;

        let mut c_vec = DVector::zeros(dim);
        for (blk, q) in problem.objective.iter().enumerate() {
            pack_into(&congruent(q), &mut c_vec.as_mut_slice()[blk * p..(blk + 1) * p]);
        }
        let obj_scale = c_vec.amax().max(1e-300);
        c_vec /= obj_scale;

        let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
        if let Some(d) = &problem.diag_rhs {
            for i in 0..n {
                let mut row = vec![0.0; dim];
                for blk in 0..k {
                    row[blk * p + i] = scale[i] * scale[i];
                }
                rows.push((row, d[i], false));
            }
        }
        if let Some(cv) = problem.corner {
            let last = n - 1;
            for blk in 0..k {
                let mut row = vec![0.0; dim];
                row[blk * p + last] = scale[last] * scale[last];
                rows.push((row, cv, false));
            }
        }
        let mut packed_m = vec![0.0; p];
        for (j, (m, rhs)) in ineqs.iter().enumerate() {
            let mut row = vec![0.0; dim];
            pack_into(m, &mut packed_m);
            for blk in 0..k {
                row[blk * p..(blk + 1) * p].copy_from_slice(&packed_m);
            }
            // slack measured in the same units as the matrix part
            let matrix_norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            row[k * p + j] = matrix_norm;
            rows.push((row, *rhs, true));
        }

        let m_rows = rows.len();
        let mut a = DMatrix::zeros(m_rows, dim);
        let mut b = DVector::zeros(m_rows);
        let mut row_is_ineq = Vec::with_capacity(m_rows);
        let mut row_unscale = Vec::with_capacity(m_rows);
        for (r, (row, rhs, is_ineq)) in rows.into_iter().enumerate() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            for (col, v) in row.into_iter().enumerate() {
                a[(r, col)] = v / norm;
            }
            b[r] = rhs / norm;
            row_is_ineq.push(is_ineq);
            row_unscale.push(norm);
        }

        let aat = &a * a.transpose();
        let aat_pinv = if m_rows > 0 {
            let eig = SymmetricEigen::new(aat.clone());
            let top = eig.eigenvalues.amax();
            let inv = eig
                .eigenvalues
                .map(|l| if l > 1e-12 * top.max(1e-300) { 1.0 / l } else { 0.0 });
            &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
        } else {
            DMatrix::zeros(0, 0)
        };

        if m_rows > 0 {
            let reach = &aat * (&aat_pinv * &b);
            if (&reach - &b).amax() > 1e-9 * b.amax().max(1.0) {
                infeasible = true;
            }
        }

        Ok((
            Packed {
                n,
                k,
                n_ineq,
                scale,
                obj_scale,
                c: c_vec,
                a,
                b,
                aat_pinv,
                row_is_ineq,
                row_unscale,
            },
            infeasible,
        ))
    }

    /// Euclidean projection onto `{x : A x = b}`.
    fn project_affine(&self, y: &DVector<f64>) -> DVector<f64> {
        if self.a.nrows() == 0 {
            return y.clone();
        }
        let r = &self.a * y - &self.b;
        let lam = &self.aat_pinv * r;
        y - self.a.tr_mul(&lam)
    }

    /// Component of `v` in the null space of `A`.
    fn null_component(&self, v: &DVector<f64>) -> DVector<f64> {
        self.project_affine_homogeneous(v)
    }

    fn project_affine_homogeneous(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.a.nrows() == 0 {
            return v.clone();
        }
        let lam = &self.aat_pinv * (&self.a * v);
        v - self.a.tr_mul(&lam)
    }

    fn project_cone(&self, v: &mut DVector<f64>) -> Result<()> {
        let n = self.n;
        for blk in 0..self.k {
            let range = self.block_range(blk);
            let m = unpack(&v.as_slice()[range.clone()], n);
            let proj = project_psd(&m)?;
            pack_into(&proj, &mut v.as_mut_slice()[range]);
        }
        let start = self.k * packed_len(n);
        for s in v.as_mut_slice()[start..].iter_mut() {
            *s = s.max(0.0);
        }
        Ok(())
    }

    fn blocks_from(&self, z: &DVector<f64>) -> Vec<CMat> {
        let s_mat = real_diag(&self.scale);
        (0..self.k)
            .map(|blk| {
                let m = unpack(&z.as_slice()[self.block_range(blk)], self.n);
                hermitize(&(&s_mat * m * &s_mat))
            })
            .collect()
    }

    fn packed_from_blocks(&self, w: &[CMat]) -> DVector<f64> {
        let inv: Vec<f64> = self.scale.iter().map(|s| 1.0 / s).collect();
        let s_inv = real_diag(&inv);
        let mut z = DVector::zeros(self.dim());
        for (blk, wk) in w.iter().enumerate() {
            let range = self.block_range(blk);
            pack_into(&(&s_inv * wk * &s_inv), &mut z.as_mut_slice()[range]);
        }
        // slacks from the scaled inequality rows
        let ax = &self.a * &z;
        let mut ineq_idx = 0;
        let start = self.k * packed_len(self.n);
        for (r, &is_ineq) in self.row_is_ineq.iter().enumerate() {
            if is_ineq {
                let coef = self.a[(r, start + ineq_idx)];
                z[start + ineq_idx] = ((self.b[r] - ax[r]) / coef).max(0.0);
                ineq_idx += 1;
            }
        }
        z
    }

    /// Equality and inequality violations in original units.
    fn original_violations(&self, z: &DVector<f64>) -> (f64, f64) {
        let start = self.k * packed_len(self.n);
        let mut eq: f64 = 0.0;
        let mut ineq: f64 = 0.0;
        let ax = &self.a * z;
        let mut ineq_idx = 0;
        for r in 0..self.a.nrows() {
            let res = (ax[r] - self.b[r]) * self.row_unscale[r];
            if self.row_is_ineq[r] {
                // drop the slack contribution to get tr(A W) - b
                let slack = z[start + ineq_idx] * self.a[(r, start + ineq_idx)] * self.row_unscale[r];
                ineq = ineq.max(res - slack);
                ineq_idx += 1;
            } else {
                eq = eq.max(res.abs());
            }
        }
        (eq, ineq.max(0.0))
    }
}

struct Diagnostics {
    primal_rel: f64,
    dual_rel: f64,
    gap_rel: f64,
    eq: f64,
    ineq: f64,
}

fn diagnostics(pk: &Packed, z: &DVector<f64>, u: &DVector<f64>, rho: f64) -> Diagnostics {
    let az = &pk.a * z;
    let primal = (&az - &pk.b).amax();
    let primal_rel = primal / (1.0 + az.amax().max(pk.b.amax()));

    // dual cone variable; u lies in the polar cone after each update
    let s = u * (-rho);
    let diff = &s - &pk.c;
    let stat = pk.null_component(&diff);
    let dual_rel = stat.norm() / (1.0 + pk.c.norm().max(s.norm()));

    let primal_obj = pk.c.dot(z);
    let gap = if pk.a.nrows() > 0 {
        let lam = &pk.aat_pinv * (&pk.a * &diff);
        primal_obj + pk.b.dot(&lam)
    } else {
        primal_obj
    };
    let gap_rel = gap.abs() / (1.0 + primal_obj.abs());
    let (eq, ineq) = pk.original_violations(z);
    Diagnostics {
        primal_rel,
        dual_rel,
        gap_rel,
        eq,
        ineq,
    }
}

/// Solves `problem` from a cold start.
pub fn solve_block_sdp(problem: &BlockSdp, settings: &SdpSettings) -> Result<SdpSolution> {
    solve_block_sdp_from(problem, settings, None)
}

/// Solves `problem`, optionally starting the primal iterate from `initial`.
pub fn solve_block_sdp_from(
    problem: &BlockSdp,
    settings: &SdpSettings,
    initial: Option<&[CMat]>,
) -> Result<SdpSolution> {
    problem.validate()?;
    if !(settings.tol > 0.0) || !(settings.relaxation > 0.0 && settings.relaxation < 2.0) {
        return Err(Error::invalid("SDP settings need tol > 0 and relaxation in (0, 2)"));
    }
    let (pk, infeasible) = Packed::build(problem)?;
    let n = problem.dim;
    if infeasible {
        return Ok(SdpSolution {
            w: vec![CMat::zeros(n, n); problem.blocks],
            objective: f64::NAN,
            residuals: SdpResiduals::default(),
            iterations: 0,
            status: SdpStatus::Infeasible,
        });
    }

    let dim = pk.dim();
    let mut z = match initial {
        Some(w) if w.len() == problem.blocks && w.iter().all(|m| m.shape() == (n, n)) => {
            pk.packed_from_blocks(w)
        }
        _ => DVector::zeros(dim),
    };
    let mut u = DVector::zeros(dim);
    let mut rho = settings.rho;
    let alpha = settings.relaxation;
    let tol = settings.tol;
    let check_every = 10;
    let adapt_every = 50;

    let mut iterations = 0;
    let mut status = SdpStatus::Inaccurate;
    let mut z_prev;
    let mut last_diag = None;
    while iterations < settings.max_iters {
        iterations += 1;
        let y = &z - &u - &pk.c / rho;
        let x = pk.project_affine(&y);
        let x_hat = &x * alpha + &z * (1.0 - alpha);
        z_prev = z;
        let mut v = &x_hat + &u;
        pk.project_cone(&mut v)?;
        z = v;
        u += &x_hat - &z;

        if iterations % check_every == 0 || iterations == settings.max_iters {
            let d = diagnostics(&pk, &z, &u, rho);
            let done = d.primal_rel <= tol
                && d.dual_rel <= tol
                && d.gap_rel <= tol
                && d.eq <= tol
                && d.ineq <= tol;
            if done {
                status = SdpStatus::Solved;
                last_diag = Some(d);
                break;
            }
            if iterations % adapt_every == 0 {
                // residual balancing on the primal vs dual-change residuals
                let r_p = (&x - &z).norm() / (1.0 + x.norm().max(z.norm()));
                let r_d = rho * (&z - &z_prev).norm() / (1.0 + (u.norm() * rho).max(pk.c.norm()));
                if r_p > 10.0 * r_d {
                    rho *= 2.0;
                    u /= 2.0;
                } else if r_d > 10.0 * r_p {
                    rho /= 2.0;
                    u *= 2.0;
                }
            }
            last_diag = Some(d);
        }
    }

    let d = last_diag.unwrap_or_else(|| diagnostics(&pk, &z, &u, rho));
    let w = pk.blocks_from(&z);
    let cone = w
        .iter()
        .map(|m| (-crate::linalg::min_eigenvalue(m)).max(0.0))
        .fold(0.0, f64::max);
    let objective = problem.objective_value(&w);
    let _ = pk.obj_scale;
    Ok(SdpSolution {
        w,
        objective,
        residuals: SdpResiduals {
            equality: d.eq,
            inequality: d.ineq,
            cone,
            stationarity: d.dual_rel,
            gap: d.gap_rel,
        },
        iterations,
        status,
    })
}
