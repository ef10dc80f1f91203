//! Alternating optimization of the transmit beamformer and the RIS.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{AntennaSubset, ChannelSet, SelectedChannels};
use crate::error::{Error, Result};
use crate::linalg::{c, cis, CMat, CVec};
use crate::metrics::{radar_power, ris_power, wsr_effective, EffectiveChannels, RisState, TransmitBeamformer};
use crate::ris_fp::{fp_pass, split_psi, QcqpSettings};
use crate::scenario::Scenario;
use crate::wmmse::{update_transmit_beamformer, TransmitConstraints, TransmitSettings};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub max_outer_iters: usize,
    pub wsr_tol: f64,
    pub transmit: TransmitSettings,
    pub qcqp: QcqpSettings,
    pub rng_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 50,
            wsr_tol: 1e-4,
            transmit: TransmitSettings::default(),
            qcqp: QcqpSettings::default(),
            rng_seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 {
            return Err(Error::invalid("max_outer_iters must be at least 1"));
        }
        if !(self.wsr_tol > 0.0) {
            return Err(Error::invalid("wsr_tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub subset: AntennaSubset,
    pub t: TransmitBeamformer,
    pub ris: RisState,
    /// `|ψ_n|`.
    pub amplitudes: Vec<f64>,
    /// `arg ψ_n`.
    pub phases: Vec<f64>,
    /// WSR after initialization followed by one entry per outer iteration.
    pub wsr_trace: Vec<f64>,
    pub wsr: f64,
    pub radar_power: f64,
    pub ris_power: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_ms: f64,
}

/// Matched beamformer on the effective channels through `ris`, with rows at
/// `P_s/M_s`, bent toward the radar beam `a cᵀ` just enough to meet the
/// probing-power target.
pub fn radar_feasible_matched(
    channels: &SelectedChannels,
    ris: &RisState,
    scenario: &Scenario,
    steering: &CVec,
) -> Result<TransmitBeamformer> {
    let ms = channels.num_selected();
    let k_users = channels.num_users();
    if steering.len() != ms || scenario.num_users() != k_users {
        return Err(Error::DimensionMismatch {
            context: "radar_feasible_matched",
            expected: ms,
            actual: steering.len(),
        });
    }
    let per_antenna = scenario.per_antenna_power(ms);
    let eff = EffectiveChannels::new(channels, ris)?;
    let mut comm = CMat::zeros(ms, k_users);
    for (k, h) in eff.h.iter().enumerate() {
        comm.set_column(k, h);
    }
    // c_k aligned to the phase of aᴴ t_k
    let radar_cols = CMat::from_fn(ms, k_users, |m, k| {
        let z = steering.dotc(&comm.column(k));
        let phase = if z.norm() > 0.0 { z / z.norm() } else { c(1.0, 0.0) };
        steering[m] * phase
    });
    let blend = |lam: f64| {
        let mut t = TransmitBeamformer::new(&comm * c(1.0 - lam, 0.0) + &radar_cols * c(lam, 0.0));
        t.normalize_rows(per_antenna);
        t
    };
    let target = scenario.budget.radar_target() * (1.0 + 1e-9);
    let mut t = blend(0.0);
    if radar_power(&t, steering) < target {
        let (mut lo, mut hi) = (0.0, 1.0);
        t = blend(1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let cand = blend(mid);
            if radar_power(&cand, steering) >= target {
                hi = mid;
                t = cand;
            } else {
                lo = mid;
            }
        }
    }
    Ok(t)
}

/// Unit-modulus random-phase RIS state.
pub fn random_phase_ris(n: usize, seed: u64) -> RisState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RisState::new(CVec::from_iterator(
        n,
        (0..n).map(|_| cis(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))),
    ))
}

/// Radar-feasible matched beamformer and a random-phase RIS scaled onto its
/// power budget.
pub fn initialize(
    channels: &SelectedChannels,
    scenario: &Scenario,
    steering: &CVec,
    seed: u64,
) -> Result<(TransmitBeamformer, RisState)> {
    let n = channels.num_ris_elements();
    let unit = random_phase_ris(n, seed);
    let t0 = radar_feasible_matched(channels, &unit, scenario, steering)?;
    let incident: f64 = (&channels.g * &t0.t).iter().map(|z| z.norm_sqr()).sum();
    let denom = incident + n as f64 * scenario.noise.ris_noise;
    let scale = if denom > 0.0 {
        (scenario.budget.ris_power() / denom).sqrt()
    } else {
        0.0
    };
    Ok((t0, RisState::new(unit.psi * c(scale, 0.0))))
}

/// Runs the alternation on the antennas in `subset`.
pub fn optimize(
    channels: &ChannelSet,
    subset: &AntennaSubset,
    scenario: &Scenario,
    config: &OptimizerConfig,
) -> Result<Solution> {
    scenario.validate()?;
    config.validate()?;
    let start = Instant::now();
    let selected = crate::channel::select_subchannels(channels, subset)?;
    let steering = scenario.steering(subset);
    let (mut t, mut ris) = initialize(&selected, scenario, &steering, config.rng_seed)?;
    let noise = &scenario.noise;
    let weights = &scenario.weights;

    let mut wsr = wsr_effective(&t, &EffectiveChannels::new(&selected, &ris)?, noise, weights);
    let mut trace = vec![wsr];
    let mut failures = 0;
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=config.max_outer_iters {
        iterations = iter;
        let prev = wsr;
        let settings = TransmitSettings {
            seed: config.rng_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(iter as u64),
            ..config.transmit.clone()
        };
        match update_transmit_beamformer(&t, &selected, &ris, scenario, &steering, &settings) {
            Ok(up) => {
                failures = 0;
                t = up.t;
                wsr = up.wsr;
            }
            Err(e) => {
                failures += 1;
                log::warn!("transmit update failed at iteration {iter}: {e}");
                if failures >= 2 {
                    return Err(Error::OptimizerAborted {
                        iteration: iter,
                        reason: e.to_string(),
                    });
                }
            }
        }

        let pass = fp_pass(&t, &selected, &ris, scenario, &config.qcqp).map_err(|e| Error::OptimizerAborted {
            iteration: iter,
            reason: format!("RIS update: {e}"),
        })?;
        let cand_wsr = wsr_effective(&t, &EffectiveChannels::new(&selected, &pass.ris)?, noise, weights);
        let constraints = TransmitConstraints::new(scenario, &steering, &selected.g, &pass.ris);
        if cand_wsr >= wsr && constraints.check(&t).feasible {
            ris = pass.ris;
            wsr = cand_wsr;
        }
        trace.push(wsr);
        if (wsr - prev).abs() <= config.wsr_tol {
            converged = true;
            break;
        }
    }

    let (amplitudes, phases) = split_psi(&ris.psi);
    Ok(Solution {
        subset: subset.clone(),
        radar_power: radar_power(&t, &steering),
        ris_power: ris_power(&t, &selected.g, &ris, noise.ris_noise),
        t,
        ris,
        amplitudes,
        phases,
        wsr_trace: trace,
        wsr,
        iterations,
        converged,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
