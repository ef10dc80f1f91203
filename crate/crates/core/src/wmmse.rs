//! Transmit-beamformer update with the RIS fixed.
//!
//! For fixed MMSE receivers `s_k` and weights `ω_k = μ_k / e_k`, the weighted
//! MSE is a convex quadratic in `T`. Homogenizing `t̃_k = [t_k; z_k]` and
//! lifting `W_k = t̃_k t̃_kᴴ` turns the per-antenna, radar and RIS power
//! constraints into linear constraints on `W_k`; dropping rank one gives the
//! block SDP handed to [`crate::sdp`]. A beamformer is then read back from
//! the principal eigenvectors, with Gaussian randomization as a fallback.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::SelectedChannels;
use crate::error::{Error, Result};
use crate::linalg::{c, crandn_vec, hermitian_eigh, hermitize, real_diag, CMat, CVec, C64};
use crate::metrics::{
    radar_power, wsr_effective, EffectiveChannels, NoiseModel, PowerBudget, RisState, TransmitBeamformer,
};
use crate::scenario::Scenario;
use crate::sdp::{solve_block_sdp_from, BlockSdp, SdpSettings, SdpStatus, SharedInequality};

/// MMSE receivers, their errors and the WMMSE weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseState {
    pub receivers: Vec<C64>,
    pub errors: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WmmseState {
    pub fn compute(t: &TransmitBeamformer, eff: &EffectiveChannels, noise: &NoiseModel, mu: &[f64]) -> Self {
        let errors = mmse_errors(t, eff, noise);
        Self {
            receivers: mmse_receivers(t, eff, noise),
            weights: wmmse_weights(mu, &errors),
            errors,
        }
    }
}

/// `s_k = t_kᴴ h_k / (Σ_i |h_kᴴ t_i|² + σ₁²‖h_{r,k}ᴴΨᴴ‖² + σ_k²)`.
pub fn mmse_receivers(t: &TransmitBeamformer, eff: &EffectiveChannels, noise: &NoiseModel) -> Vec<C64> {
    (0..eff.num_users())
        .map(|k| {
            let l = eff.link_terms(k, t, noise);
            l.desired.conj() / l.received
        })
        .collect()
}

/// `e_k = 1 - |h_kᴴ t_k|² / (Σ_i |h_kᴴ t_i|² + σ₁²‖h_{r,k}ᴴΨᴴ‖² + σ_k²)`.
pub fn mmse_errors(t: &TransmitBeamformer, eff: &EffectiveChannels, noise: &NoiseModel) -> Vec<f64> {
    (0..eff.num_users())
        .map(|k| {
            let l = eff.link_terms(k, t, noise);
            (1.0 - l.desired.norm_sqr() / l.received).clamp(f64::MIN_POSITIVE, 1.0)
        })
        .collect()
}

pub fn wmmse_weights(mu: &[f64], errors: &[f64]) -> Vec<f64> {
    mu.iter().zip(errors).map(|(m, e)| m / e).collect()
}

/// MSE of user `k` for an arbitrary receiver `s`:
/// `|s|² D_k - 2 Re(s h_kᴴ t_k) + 1`.
pub fn mse(k: usize, s: C64, t: &TransmitBeamformer, eff: &EffectiveChannels, noise: &NoiseModel) -> f64 {
    let l = eff.link_terms(k, t, noise);
    s.norm_sqr() * l.received - 2.0 * (s * l.desired).re + 1.0
}

/// Lifted transmit subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SdrProblem {
    /// `Q_k`, `(M_s+1) × (M_s+1)`.
    pub objective: Vec<CMat>,
    /// `Z̃`: `M_s I - a aᴴ` padded with a zero last row and column.
    pub radar: CMat,
    pub radar_rhs: f64,
    /// `Ỹ`: `Gᴴ Ψ Ψᴴ G`, padded.
    pub ris: CMat,
    /// `P̃_a = P_a - ‖ψ‖² σ₁²`.
    pub ris_rhs: f64,
    /// `[P_s/M_s, …, P_s/M_s, K]`.
    pub diag_rhs: Vec<f64>,
    /// `Σ_k ω_k (|s_k|² (σ₁²‖h_{r,k}ᴴΨᴴ‖² + σ_k²) + 1)`, so that
    /// `Σ_k tr(Q_k W_k) + constant` is the weighted MSE.
    pub constant: f64,
}

impl SdrProblem {
    pub fn to_block_sdp(&self) -> BlockSdp {
        BlockSdp {
            blocks: self.objective.len(),
            dim: self.diag_rhs.len(),
            objective: self.objective.clone(),
            inequalities: vec![
                SharedInequality {
                    matrix: self.radar.clone(),
                    rhs: self.radar_rhs,
                },
                SharedInequality {
                    matrix: self.ris.clone(),
                    rhs: self.ris_rhs,
                },
            ],
            diag_rhs: Some(self.diag_rhs.clone()),
            corner: Some(1.0),
        }
    }
}

fn pad(m: &CMat) -> CMat {
    let n = m.nrows();
    let mut out = CMat::zeros(n + 1, n + 1);
    out.view_mut((0, 0), (n, n)).copy_from(m);
    out
}

/// `t̃ = [t; 1]`.
pub fn homogenize(t: &TransmitBeamformer) -> Vec<CVec> {
    let ms = t.num_antennas();
    t.t.column_iter()
        .map(|col| {
            let mut v = CVec::zeros(ms + 1);
            v.rows_mut(0, ms).copy_from(&col);
            v[ms] = c(1.0, 0.0);
            v
        })
        .collect()
}

/// `Ȳ = Gᴴ Ψ Ψᴴ G`.
pub fn ris_quadratic(g: &CMat, ris: &RisState) -> CMat {
    let scaled = CMat::from_fn(g.nrows(), g.ncols(), |i, j| ris.psi[i].conj() * g[(i, j)]);
    hermitize(&scaled.ad_mul(&scaled))
}

/// Builds the SDR for fixed receivers and weights.
pub fn assemble_sdr(
    eff: &EffectiveChannels,
    state: &WmmseState,
    noise: &NoiseModel,
    steering: &CVec,
    budget: &PowerBudget,
    g: &CMat,
    ris: &RisState,
) -> Result<SdrProblem> {
    let k_users = eff.num_users();
    let ms = steering.len();
    if g.ncols() != ms || eff.h.iter().any(|h| h.len() != ms) {
        return Err(Error::DimensionMismatch {
            context: "assemble_sdr: selected antennas",
            expected: ms,
            actual: g.ncols(),
        });
    }
    if state.receivers.len() != k_users || state.weights.len() != k_users {
        return Err(Error::DimensionMismatch {
            context: "assemble_sdr: users",
            expected: k_users,
            actual: state.receivers.len(),
        });
    }
    let ris_rhs = budget.ris_power() - ris.power_gain() * noise.ris_noise;
    if ris_rhs < 0.0 {
        return Err(Error::InfeasibleRisBudget {
            residual_budget: ris_rhs,
        });
    }

    let n = ms + 1;
    let mut c1 = Vec::with_capacity(k_users);
    let mut c2 = Vec::with_capacity(k_users);
    let mut constant = 0.0;
    for k in 0..k_users {
        let h = &eff.h[k];
        let s = state.receivers[k];
        let hh = h * h.adjoint() * c(s.norm_sqr(), 0.0);
        let block1 = pad(&hh);
        let mut block2 = block1.clone();
        for m in 0..ms {
            block2[(m, ms)] = -s.conj() * h[m];
            block2[(ms, m)] = -s * h[m].conj();
        }
        c1.push(block1);
        c2.push(block2);
        constant += state.weights[k]
            * (s.norm_sqr() * (noise.ris_noise * eff.ris_noise_gain[k] + noise.user_noise[k]) + 1.0);
    }
    let objective = (0..k_users)
        .map(|k| {
            let mut q = &c2[k] * c(state.weights[k], 0.0);
            for j in (0..k_users).filter(|&j| j != k) {
                q += &c1[j] * c(state.weights[j], 0.0);
            }
            hermitize(&q)
        })
        .collect();

    let ms_f = ms as f64;
    let radar = pad(&(CMat::identity(ms, ms) * c(ms_f, 0.0) - steering * steering.adjoint()));
    let bs = budget.bs_power();
    let mut diag_rhs = vec![bs / ms_f; ms];
    diag_rhs.push(k_users as f64);
    debug_assert_eq!(diag_rhs.len(), n);
    Ok(SdrProblem {
        objective,
        radar: hermitize(&radar),
        radar_rhs: (1.0 - budget.radar_ratio) * ms_f * bs,
        ris: pad(&ris_quadratic(g, ris)),
        ris_rhs,
        diag_rhs,
        constant,
    })
}

/// Transmit-side constraints for a fixed RIS, with the tolerance used to
/// accept a candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitConstraints {
    pub per_antenna: f64,
    pub steering: CVec,
    pub radar_target: f64,
    /// `Ȳ`, `M_s × M_s`.
    pub ris_matrix: CMat,
    pub ris_rhs: f64,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub radar_power: f64,
    /// `Σ_k t_kᴴ Ȳ t_k`.
    pub ris_load: f64,
    /// Largest relative deviation of a row power from `P_s/M_s`.
    pub per_antenna_dev: f64,
    pub feasible: bool,
}

impl TransmitConstraints {
    pub fn new(scenario: &Scenario, steering: &CVec, g: &CMat, ris: &RisState) -> Self {
        let ms = steering.len();
        Self {
            per_antenna: scenario.per_antenna_power(ms),
            steering: steering.clone(),
            radar_target: scenario.budget.radar_target(),
            ris_matrix: ris_quadratic(g, ris),
            ris_rhs: scenario.budget.ris_power() - ris.power_gain() * scenario.noise.ris_noise,
            rel_tol: 1e-9,
        }
    }

    pub fn check(&self, t: &TransmitBeamformer) -> Feasibility {
        let radar = radar_power(t, &self.steering);
        let ris_load: f64 = t
            .t
            .column_iter()
            .map(|col| col.dotc(&(&self.ris_matrix * col)).re)
            .sum();
        let per_antenna_dev = t
            .antenna_powers()
            .iter()
            .map(|p| (p - self.per_antenna).abs() / self.per_antenna.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        let feasible = radar >= self.radar_target * (1.0 - self.rel_tol)
            && ris_load <= self.ris_rhs + self.rel_tol * self.ris_rhs.abs().max(f64::MIN_POSITIVE)
            && per_antenna_dev <= self.rel_tol;
        Feasibility {
            radar_power: radar,
            ris_load,
            per_antenna_dev,
            feasible,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryMethod {
    Eigen,
    Randomized,
    /// Shortest feasible step from the incumbent toward the eigen candidate.
    Blended,
}

/// Inputs that recovery needs to score and repair candidates.
#[derive(Debug, Clone)]
pub struct RecoveryContext<'a> {
    pub eff: &'a EffectiveChannels,
    pub noise: &'a NoiseModel,
    pub weights: &'a [f64],
    pub constraints: &'a TransmitConstraints,
    /// Feasible fallback for the blending step.
    pub incumbent: Option<&'a TransmitBeamformer>,
    pub candidates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub t: TransmitBeamformer,
    pub method: RecoveryMethod,
}

fn principal(w: &CMat) -> (f64, CVec) {
    let (vals, vecs) = hermitian_eigh(w);
    let last = vals.len() - 1;
    (vals[last].max(0.0), vecs.column(last).into_owned())
}

fn assemble_columns(cols: &[CVec], ms: usize) -> TransmitBeamformer {
    let mut t = CMat::zeros(ms, cols.len());
    for (k, v) in cols.iter().enumerate() {
        t.set_column(k, &v.rows(0, ms));
    }
    TransmitBeamformer::new(t)
}

/// Reads a beamformer out of relaxed blocks `W_k`.
pub fn recover_beamformer(w: &[CMat], ctx: &RecoveryContext) -> Result<Recovery> {
    let Some(first) = w.first() else {
        return Err(Error::invalid("no blocks to recover from"));
    };
    let n = first.nrows();
    if n < 2 || w.iter().any(|b| b.shape() != (n, n)) {
        return Err(Error::invalid("blocks must be square with a homogenizing entry"));
    }
    let ms = n - 1;

    // principal eigenvector, phase-fixed by the homogenizing entry
    let cols: Vec<CVec> = w
        .iter()
        .map(|wk| {
            let (lam, v) = principal(wk);
            let z = v[ms];
            if z.norm() > 1e-12 {
                v / z
            } else {
                v * c(lam.sqrt(), 0.0)
            }
        })
        .collect();
    let mut eigen = assemble_columns(&cols, ms);
    eigen.normalize_rows(ctx.constraints.per_antenna);
    let eigen_check = ctx.constraints.check(&eigen);
    if eigen_check.feasible {
        return Ok(Recovery {
            t: eigen,
            method: RecoveryMethod::Eigen,
        });
    }

    // Gaussian randomization: ξ_k ~ CN(0, W_k)
    let roots: Vec<CMat> = w
        .iter()
        .map(|wk| {
            let (vals, vecs) = hermitian_eigh(&hermitize(wk));
            let sq: Vec<f64> = vals.iter().map(|&l| l.max(0.0).sqrt()).collect();
            &vecs * real_diag(&sq)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut best: Option<(f64, TransmitBeamformer)> = None;
    for _ in 0..ctx.candidates {
        let cols: Vec<CVec> = roots
            .iter()
            .map(|r| {
                let xi = r * crandn_vec(n, &mut rng);
                let z = xi[ms];
                if z.norm() > 0.0 {
                    xi * (z.conj() / z.norm())
                } else {
                    xi
                }
            })
            .collect();
        let mut cand = assemble_columns(&cols, ms);
        cand.normalize_rows(ctx.constraints.per_antenna);
        if !ctx.constraints.check(&cand).feasible {
            continue;
        }
        let score = wsr_effective(&cand, ctx.eff, ctx.noise, ctx.weights);
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, cand));
        }
    }
    if let Some((_, t)) = best {
        return Ok(Recovery {
            t,
            method: RecoveryMethod::Randomized,
        });
    }

    if let Some(inc) = ctx.incumbent {
        if ctx.constraints.check(inc).feasible {
            let blend = |lam: f64| {
                let mut t = TransmitBeamformer::new(&inc.t * c(lam, 0.0) + &eigen.t * c(1.0 - lam, 0.0));
                t.normalize_rows(ctx.constraints.per_antenna);
                t
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            let mut best = inc.clone();
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                let cand = blend(mid);
                if ctx.constraints.check(&cand).feasible {
                    hi = mid;
                    best = cand;
                } else {
                    lo = mid;
                }
            }
            return Ok(Recovery {
                t: best,
                method: RecoveryMethod::Blended,
            });
        }
    }

    Err(Error::RankOneRecovery {
        diagnostics: format!(
            "eigen candidate radar {:.4e} (target {:.4e}), RIS load {:.4e} (budget {:.4e}); \
             no feasible candidate among {} randomized draws",
            eigen_check.radar_power,
            ctx.constraints.radar_target,
            eigen_check.ris_load,
            ctx.constraints.ris_rhs,
            ctx.candidates
        ),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmitSettings {
    pub sdp: SdpSettings,
    pub candidates: usize,
    pub seed: u64,
    /// Start the SDP iterate from the lifted current beamformer.
    pub warm_start: bool,
}

impl Default for TransmitSettings {
    fn default() -> Self {
        Self {
            sdp: SdpSettings::default(),
            candidates: 100,
            seed: 0,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmitUpdate {
    pub t: TransmitBeamformer,
    pub wsr: f64,
    pub sdp_iterations: usize,
    pub sdp_status: SdpStatus,
    /// `None` when the current beamformer was kept.
    pub method: Option<RecoveryMethod>,
}

/// One WMMSE/SDR step for fixed `Ψ`. The returned beamformer is feasible and
/// never has a lower WSR than a feasible `current`.
pub fn update_transmit_beamformer(
    current: &TransmitBeamformer,
    channels: &SelectedChannels,
    ris: &RisState,
    scenario: &Scenario,
    steering: &CVec,
    settings: &TransmitSettings,
) -> Result<TransmitUpdate> {
    let eff = EffectiveChannels::new(channels, ris)?;
    if current.num_antennas() != steering.len() || current.num_users() != eff.num_users() {
        return Err(Error::DimensionMismatch {
            context: "update_transmit_beamformer: T shape",
            expected: steering.len(),
            actual: current.num_antennas(),
        });
    }
    let state = WmmseState::compute(current, &eff, &scenario.noise, &scenario.weights);
    let sdr = assemble_sdr(&eff, &state, &scenario.noise, steering, &scenario.budget, &channels.g, ris)?;
    let problem = sdr.to_block_sdp();
    let lifted: Vec<CMat> = homogenize(current).iter().map(|v| v * v.adjoint()).collect();
    let initial = settings.warm_start.then_some(lifted.as_slice());
    let sol = solve_block_sdp_from(&problem, &settings.sdp, initial)?;
    if sol.status == SdpStatus::Infeasible {
        return Err(Error::Solver("transmit SDR has inconsistent equality constraints".into()));
    }

    let constraints = TransmitConstraints::new(scenario, steering, &channels.g, ris);
    let current_ok = constraints.check(current).feasible;
    let ctx = RecoveryContext {
        eff: &eff,
        noise: &scenario.noise,
        weights: &scenario.weights,
        constraints: &constraints,
        incumbent: current_ok.then_some(current),
        candidates: settings.candidates,
        seed: settings.seed,
    };
    let rec = recover_beamformer(&sol.w, &ctx)?;
    let new_wsr = wsr_effective(&rec.t, &eff, &scenario.noise, &scenario.weights);
    if current_ok {
        let old_wsr = wsr_effective(current, &eff, &scenario.noise, &scenario.weights);
        if new_wsr < old_wsr {
            return Ok(TransmitUpdate {
                t: current.clone(),
                wsr: old_wsr,
                sdp_iterations: sol.iterations,
                sdp_status: sol.status,
                method: None,
            });
        }
    }
    Ok(TransmitUpdate {
        t: rec.t,
        wsr: new_wsr,
        sdp_iterations: sol.iterations,
        sdp_status: sol.status,
        method: Some(rec.method),
    })
}
