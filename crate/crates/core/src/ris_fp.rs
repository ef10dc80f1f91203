//! Active-RIS update with the transmit beamformer fixed.
//!
//! The log in the sum-rate is detached with the Lagrangian dual transform
//! (auxiliary `α`), the remaining ratios are decoupled with the quadratic
//! transform (auxiliary `ε`), and what is left is a concave quadratic in
//! `ψ = diag(Ψ)` under one ellipsoidal power constraint:
//!
//! ```text
//! maximize 2 Re(ψᴴ v) - ψᴴ U ψ   subject to   ψᴴ Π ψ ≤ P_a
//! ```
//!
//! The QCQP is solved through its multiplier: whiten with `Π^{-1/2}`,
//! eigendecompose the whitened `U` once, and bisect the secular equation
//! `‖ψ(λ)‖²_Π = P_a`.

use crate::channel::SelectedChannels;
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigh, hermitize, is_finite_mat, is_finite_vec, real_diag, CMat, CVec, C64};
use crate::metrics::{sinrs, EffectiveChannels, NoiseModel, RisState, TransmitBeamformer};
use crate::scenario::Scenario;

/// `α_k = γ_k`.
pub fn update_alpha(sinr: &[f64]) -> Vec<f64> {
    sinr.iter().map(|&g| g.max(0.0)).collect()
}

/// `ε_k = sqrt(μ_k (1 + α_k)) h_kᴴ t_k / (Σ_i |h_kᴴ t_i|² + σ₁²‖h_{r,k}ᴴΨᴴ‖² + σ_k²)`.
pub fn update_epsilon(
    t: &TransmitBeamformer,
    eff: &EffectiveChannels,
    noise: &NoiseModel,
    weights: &[f64],
    alpha: &[f64],
) -> Vec<C64> {
    (0..eff.num_users())
        .map(|k| {
            let terms = eff.link_terms(k, t, noise);
            terms.desired * ((weights[k] * (1.0 + alpha[k])).sqrt() / terms.received)
        })
        .collect()
}

/// Lagrangian dual transform objective
/// `Σ μ log2(1+α) - Σ μ α + Σ μ (1+α) γ / (1+γ)`.
pub fn dual_transform_objective(sinr: &[f64], alpha: &[f64], weights: &[f64]) -> f64 {
    sinr.iter()
        .zip(alpha)
        .zip(weights)
        .map(|((&g, &a), &w)| w * (1.0 + a).log2() - w * a + w * (1.0 + a) * g / (1.0 + g))
        .sum()
}

/// Quadratic transform objective
/// `Σ 2 sqrt(μ(1+α)) Re(ε* h_kᴴ t_k) - |ε|² (Σ_i |h_kᴴ t_i|² + σ₁²‖h_{r,k}ᴴΨᴴ‖² + σ_k²)`.
pub fn quadratic_transform_objective(
    t: &TransmitBeamformer,
    eff: &EffectiveChannels,
    noise: &NoiseModel,
    weights: &[f64],
    alpha: &[f64],
    epsilon: &[C64],
) -> f64 {
    (0..eff.num_users())
        .map(|k| {
            let terms = eff.link_terms(k, t, noise);
            2.0 * (weights[k] * (1.0 + alpha[k])).sqrt() * (epsilon[k].conj() * terms.desired).re
                - epsilon[k].norm_sqr() * terms.received
        })
        .sum()
}

/// Linear and quadratic coefficients of the `ψ` subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub v: CVec,
    /// Hermitian PSD.
    pub u: CMat,
    /// Hermitian positive definite constraint matrix.
    pub pi: CMat,
    /// RIS power budget `P_a`.
    pub budget: f64,
}

impl QuadraticForm {
    /// `2 Re(ψᴴ v) - ψᴴ U ψ`.
    pub fn objective(&self, psi: &CVec) -> f64 {
        2.0 * psi.dotc(&self.v).re - psi.dotc(&(&self.u * psi)).re
    }

    /// `ψᴴ Π ψ`.
    pub fn constraint(&self, psi: &CVec) -> f64 {
        psi.dotc(&(&self.pi * psi)).re
    }
}

/// `D X Dᴴ` with `D = diag(conj(h))`.
fn diag_conj_congruence(h: &CVec, x: &CMat) -> CMat {
    CMat::from_fn(x.nrows(), x.ncols(), |i, j| h[i].conj() * x[(i, j)] * h[j])
}

/// Assembles `v`, `U` and `Π` for a fixed transmit beamformer.
#[allow(clippy::too_many_arguments)]
pub fn assemble_quadratic(
    t: &TransmitBeamformer,
    g: &CMat,
    h_direct: &[CVec],
    h_ris: &[CVec],
    epsilon: &[C64],
    alpha: &[f64],
    weights: &[f64],
    ris_noise: f64,
    ris_budget: f64,
) -> Result<QuadraticForm> {
    let n = g.nrows();
    let k_users = t.num_users();
    if h_direct.len() != k_users || h_ris.len() != k_users || epsilon.len() != k_users {
        return Err(Error::DimensionMismatch {
            context: "assemble_quadratic: users",
            expected: k_users,
            actual: h_direct.len(),
        });
    }
    if g.ncols() != t.num_antennas() {
        return Err(Error::DimensionMismatch {
            context: "assemble_quadratic: G columns",
            expected: t.num_antennas(),
            actual: g.ncols(),
        });
    }
    let tx_cov = &t.t * t.t.adjoint();
    let g_cov = g * &tx_cov;
    let g_cov_g = hermitize(&(&g_cov * g.adjoint()));
    let incident = g * &t.t;

    let mut v = CVec::zeros(n);
    let mut u = CMat::zeros(n, n);
    for k in 0..k_users {
        let hr = &h_ris[k];
        let e2 = epsilon[k].norm_sqr();
        let amp = (weights[k] * (1.0 + alpha[k])).sqrt();
        let gt = incident.column(k);
        let gsh = &g_cov * &h_direct[k];
        for i in 0..n {
            let d = hr[i].conj();
            v[i] += epsilon[k].conj() * amp * d * gt[i] - d * gsh[i] * e2;
        }
        if e2 > 0.0 {
            let mut quad = diag_conj_congruence(hr, &g_cov_g);
            for i in 0..n {
                quad[(i, i)] += c(ris_noise * hr[i].norm_sqr(), 0.0);
            }
            u += quad * c(e2, 0.0);
        }
    }

    let pi_diag: Vec<f64> = (0..n)
        .map(|i| incident.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>() + ris_noise)
        .collect();
    Ok(QuadraticForm {
        v,
        u: hermitize(&u),
        pi: real_diag(&pi_diag),
        budget: ris_budget,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_bisection: usize,
}

impl Default for QcqpSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_bisection: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpSolution {
    pub psi: CVec,
    /// Multiplier of the power constraint (0 for an interior optimum).
    pub multiplier: f64,
    /// `(λ, g(λ))` for every multiplier evaluated while bracketing/bisecting.
    pub trace: Vec<(f64, f64)>,
}

/// Maximizes `2 Re(ψᴴ v) - ψᴴ U ψ` subject to `ψᴴ Π ψ ≤ P_a`.
pub fn solve_psi_qcqp(q: &QuadraticForm, settings: &QcqpSettings) -> Result<QcqpSolution> {
    let n = q.v.len();
    if q.u.shape() != (n, n) || q.pi.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "solve_psi_qcqp",
            expected: n,
            actual: q.u.nrows(),
        });
    }
    if !is_finite_vec(&q.v) || !is_finite_mat(&q.u) || !is_finite_mat(&q.pi) || !q.budget.is_finite() {
        return Err(Error::NonFinite("QCQP coefficients"));
    }
    let zero = || QcqpSolution {
        psi: CVec::zeros(n),
        multiplier: 0.0,
        trace: Vec::new(),
    };
    if q.budget <= 0.0 || q.v.iter().all(|z| z.norm_sqr() == 0.0) {
        return Ok(zero());
    }

    // whitening Π^{-1/2}
    let (pi_vals, pi_vecs) = hermitian_eigh(&q.pi);
    if pi_vals[0] <= 0.0 {
        return Err(Error::invalid("constraint matrix must be positive definite"));
    }
    let inv_sqrt: Vec<f64> = pi_vals.iter().map(|&l| 1.0 / l.sqrt()).collect();
    let whiten = &pi_vecs * real_diag(&inv_sqrt) * pi_vecs.adjoint();
    let u_white = hermitize(&(&whiten * &q.u * &whiten));
    let (mu, vecs) = hermitian_eigh(&u_white);
    let mu: Vec<f64> = mu.iter().map(|&m| m.max(0.0)).collect();
    let w = vecs.ad_mul(&(&whiten * &q.v));
    let w2: Vec<f64> = w.iter().map(|z| z.norm_sqr()).collect();
    let w_total: f64 = w2.iter().sum();

    let psi_at = |lambda: f64| -> CVec {
        let phi = CVec::from_iterator(
            n,
            w.iter().zip(&mu).map(|(wi, &m)| {
                let d = m + lambda;
                if d > 0.0 {
                    wi / d
                } else {
                    c(0.0, 0.0)
                }
            }),
        );
        &whiten * (&vecs * phi)
    };
    let excess = |lambda: f64| -> f64 {
        w2.iter()
            .zip(&mu)
            .map(|(&wi, &m)| {
                let d = m + lambda;
                if d > 0.0 {
                    wi / (d * d)
                } else if wi > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            - q.budget
    };

    let mut trace = Vec::new();
    // interior stationary point, if bounded and feasible
    let mu_max = mu.iter().cloned().fold(0.0, f64::max);
    let singular_cut = 1e-13 * mu_max.max(f64::MIN_POSITIVE);
    let unbounded = mu
        .iter()
        .zip(&w2)
        .any(|(&m, &wi)| m <= singular_cut && wi > 1e-28 * w_total);
    if !unbounded {
        let g0: f64 = w2
            .iter()
            .zip(&mu)
            .filter(|(_, &m)| m > singular_cut)
            .map(|(&wi, &m)| wi / (m * m))
            .sum::<f64>()
            - q.budget;
        trace.push((0.0, g0));
        if g0 <= 0.0 {
            let phi = CVec::from_iterator(
                n,
                w.iter()
                    .zip(&mu)
                    .map(|(wi, &m)| if m > singular_cut { wi / m } else { c(0.0, 0.0) }),
            );
            return Ok(QcqpSolution {
                psi: &whiten * (&vecs * phi),
                multiplier: 0.0,
                trace,
            });
        }
    }

    let tol_g = settings.abs_tol.max(settings.rel_tol * q.budget);
    // g(λ) ≤ ‖w‖²/λ² - P_a, so the bracket closes by λ = ‖w‖/√P_a
    let mut hi = (w_total / q.budget).sqrt() / 1024.0;
    let mut lo = 0.0;
    let mut g_hi = excess(hi);
    trace.push((hi, g_hi));
    while g_hi > 0.0 {
        lo = hi;
        hi *= 2.0;
        g_hi = excess(hi);
        trace.push((hi, g_hi));
    }
    let mut steps = 0;
    while g_hi < -tol_g && steps < settings.max_bisection {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = excess(mid);
        trace.push((mid, g_mid));
        if g_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
        steps += 1;
    }
    Ok(QcqpSolution {
        psi: psi_at(hi),
        multiplier: hi,
        trace,
    })
}

/// Amplitudes `|ψ_n|` and phases `arg ψ_n ∈ (-π, π]` (0 for `ψ_n = 0`).
pub fn split_psi(psi: &CVec) -> (Vec<f64>, Vec<f64>) {
    psi.iter()
        .map(|z| {
            let amp = z.norm();
            let phase = if amp == 0.0 {
                0.0
            } else {
                let a = z.im.atan2(z.re);
                if a <= -std::f64::consts::PI {
                    std::f64::consts::PI
                } else {
                    a
                }
            };
            (amp, phase)
        })
        .unzip()
}

/// Result of one `α → ε → ψ` pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FpPass {
    pub ris: RisState,
    pub alpha: Vec<f64>,
    pub epsilon: Vec<C64>,
    pub multiplier: f64,
}

/// One full RIS update for fixed `T`, starting from the current `ψ`.
pub fn fp_pass(
    t: &TransmitBeamformer,
    channels: &SelectedChannels,
    ris: &RisState,
    scenario: &Scenario,
    settings: &QcqpSettings,
) -> Result<FpPass> {
    let eff = EffectiveChannels::new(channels, ris)?;
    let gamma = sinrs(t, &eff, &scenario.noise);
    let alpha = update_alpha(&gamma);
    let epsilon = update_epsilon(t, &eff, &scenario.noise, &scenario.weights, &alpha);
    let q = assemble_quadratic(
        t,
        &channels.g,
        &channels.h_direct,
        &channels.h_ris,
        &epsilon,
        &alpha,
        &scenario.weights,
        scenario.noise.ris_noise,
        scenario.budget.ris_power(),
    )?;
    let sol = solve_psi_qcqp(&q, settings)?;
    Ok(FpPass {
        ris: RisState::new(sol.psi),
        alpha,
        epsilon,
        multiplier: sol.multiplier,
    })
}
