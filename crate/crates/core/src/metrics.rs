//! System-level quantities: effective channels, SINR, weighted sum-rate,
//! radar probing power, RIS power consumption and beampatterns.
//!
//! All powers are linear watts.

use serde::{Deserialize, Serialize};

use crate::channel::{steering_vector, AntennaSubset, SelectedChannels};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec};

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    /// Total system power `P` in watts.
    pub total: f64,
    /// `ρ`: fraction of `P` given to the BS.
    pub split_ratio: f64,
    /// `η`: fraction of the BS power that must reach the radar target.
    pub radar_ratio: f64,
}

impl PowerBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.total > 0.0) {
            return Err(Error::invalid("total power must be positive"));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio <= 1.0) {
            return Err(Error::invalid("split ratio must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.radar_ratio) {
            return Err(Error::invalid("radar ratio must lie in [0, 1]"));
        }
        Ok(())
    }

    /// `P_s = ρ P`.
    pub fn bs_power(&self) -> f64 {
        self.split_ratio * self.total
    }

    /// `P_a = (1 - ρ) P`.
    pub fn ris_power(&self) -> f64 {
        ((1.0 - self.split_ratio) * self.total).max(0.0)
    }

    /// Minimum probing power `η P_s`.
    pub fn radar_target(&self) -> f64 {
        self.radar_ratio * self.bs_power()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// `σ_k²` per user.
    pub user_noise: Vec<f64>,
    /// `σ₁²`, dynamic noise added per RIS element.
    pub ris_noise: f64,
}

impl NoiseModel {
    pub fn uniform(num_users: usize, user_noise: f64, ris_noise: f64) -> Self {
        Self {
            user_noise: vec![user_noise; num_users],
            ris_noise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.user_noise.iter().any(|&s| !(s > 0.0)) || !(self.ris_noise > 0.0) {
            return Err(Error::invalid("noise powers must be positive"));
        }
        Ok(())
    }
}

/// Active-RIS reflection coefficients `ψ = diag(AΘ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RisState {
    pub psi: CVec,
}

impl RisState {
    pub fn new(psi: CVec) -> Self {
        Self { psi }
    }

    pub fn off(n: usize) -> Self {
        Self {
            psi: CVec::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// `‖Ψ‖²_F = ‖ψ‖²`.
    pub fn power_gain(&self) -> f64 {
        self.psi.norm_squared()
    }
}

/// Transmit beamformer `T` (`M_s × K`); column `k` serves user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitBeamformer {
    pub t: CMat,
}

impl TransmitBeamformer {
    pub fn new(t: CMat) -> Self {
        Self { t }
    }

    pub fn num_antennas(&self) -> usize {
        self.t.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.t.ncols()
    }

    /// `diag(T Tᴴ)`.
    pub fn antenna_powers(&self) -> Vec<f64> {
        self.t
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }

    /// Rescales every row to squared norm `per_antenna`. All-zero rows are
    /// replaced by an equal split across users.
    pub fn normalize_rows(&mut self, per_antenna: f64) {
        let k = self.t.ncols();
        let target = per_antenna.sqrt();
        for mut row in self.t.row_iter_mut() {
            let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > f64::MIN_POSITIVE && norm.is_finite() {
                row.scale_mut(target / norm);
            } else {
                row.fill(c(target / (k as f64).sqrt(), 0.0));
            }
        }
    }
}

/// Per-user end-to-end channels for a fixed RIS state.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    /// `h_k = h_{d,k} + Gᴴ Ψ h_{r,k}`.
    pub h: Vec<CVec>,
    /// `‖h_{r,k}ᴴ Ψᴴ‖²`, the gain applied to the RIS thermal noise.
    pub ris_noise_gain: Vec<f64>,
}

impl EffectiveChannels {
    pub fn new(channels: &SelectedChannels, ris: &RisState) -> Result<Self> {
        let mut h = Vec::with_capacity(channels.num_users());
        let mut ris_noise_gain = Vec::with_capacity(channels.num_users());
        for (hd, hr) in channels.h_direct.iter().zip(&channels.h_ris) {
            h.push(effective_channel(hd, &channels.g, ris, hr)?);
            ris_noise_gain.push(
                ris.psi
                    .iter()
                    .zip(hr.iter())
                    .map(|(p, r)| (p * r).norm_sqr())
                    .sum(),
            );
        }
        Ok(Self { h, ris_noise_gain })
    }

    pub fn num_users(&self) -> usize {
        self.h.len()
    }

    /// `Σ_i |h_kᴴ t_i|² + σ₁² ‖h_{r,k}ᴴΨᴴ‖² + σ_k²` and the desired amplitude `h_kᴴ t_k`.
    pub fn link_terms(&self, k: usize, t: &TransmitBeamformer, noise: &NoiseModel) -> LinkTerms {
        let hk = &self.h[k];
        let mut total = 0.0;
        let mut desired = c(0.0, 0.0);
        for (i, col) in t.t.column_iter().enumerate() {
            let z = hk.dotc(&col);
            total += z.norm_sqr();
            if i == k {
                desired = z;
            }
        }
        LinkTerms {
            desired,
            received: total + noise.ris_noise * self.ris_noise_gain[k] + noise.user_noise[k],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkTerms {
    /// `h_kᴴ t_k`.
    pub desired: crate::linalg::C64,
    /// Total received power including noise (always positive).
    pub received: f64,
}

impl LinkTerms {
    pub fn sinr(&self) -> f64 {
        let s = self.desired.norm_sqr();
        (s / (self.received - s).max(f64::MIN_POSITIVE)).max(0.0)
    }
}

/// `h_{d,k} + Gᴴ Ψ h_{r,k}`.
pub fn effective_channel(h_direct_k: &CVec, g: &CMat, ris: &RisState, h_ris_k: &CVec) -> Result<CVec> {
    let (n, ms) = g.shape();
    if h_direct_k.len() != ms {
        return Err(Error::DimensionMismatch {
            context: "effective_channel: h_direct",
            expected: ms,
            actual: h_direct_k.len(),
        });
    }
    if ris.len() != n || h_ris_k.len() != n {
        return Err(Error::DimensionMismatch {
            context: "effective_channel: RIS side",
            expected: n,
            actual: if ris.len() != n { ris.len() } else { h_ris_k.len() },
        });
    }
    let reflected = ris.psi.component_mul(h_ris_k);
    Ok(h_direct_k + g.ad_mul(&reflected))
}

/// Per-user SINRs for every user.
pub fn sinrs(t: &TransmitBeamformer, eff: &EffectiveChannels, noise: &NoiseModel) -> Vec<f64> {
    (0..eff.num_users())
        .map(|k| eff.link_terms(k, t, noise).sinr())
        .collect()
}

/// SINR of user `k`.
pub fn sinr(
    k: usize,
    t: &TransmitBeamformer,
    channels: &SelectedChannels,
    ris: &RisState,
    noise: &NoiseModel,
) -> Result<f64> {
    if k >= channels.num_users() || t.num_users() != channels.num_users() {
        return Err(Error::invalid("user index or beamformer width inconsistent with K"));
    }
    let eff = EffectiveChannels::new(channels, ris)?;
    Ok(eff.link_terms(k, t, noise).sinr())
}

/// `Σ_k μ_k log2(1 + γ_k)` from precomputed SINRs.
pub fn wsr_from_sinrs(sinrs: &[f64], weights: &[f64]) -> f64 {
    sinrs
        .iter()
        .zip(weights)
        .map(|(g, w)| w * (1.0 + g).log2())
        .sum()
}

pub fn wsr_effective(
    t: &TransmitBeamformer,
    eff: &EffectiveChannels,
    noise: &NoiseModel,
    weights: &[f64],
) -> f64 {
    wsr_from_sinrs(&sinrs(t, eff, noise), weights)
}

/// Weighted sum-rate in bits/s/Hz.
pub fn wsr(
    t: &TransmitBeamformer,
    channels: &SelectedChannels,
    ris: &RisState,
    noise: &NoiseModel,
    weights: &[f64],
) -> Result<f64> {
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::invalid("user weights must be nonnegative"));
    }
    if weights.len() != channels.num_users() {
        return Err(Error::DimensionMismatch {
            context: "wsr: weights",
            expected: channels.num_users(),
            actual: weights.len(),
        });
    }
    let eff = EffectiveChannels::new(channels, ris)?;
    Ok(wsr_effective(t, &eff, noise, weights))
}

/// Probing power `aᴴ T Tᴴ a / M_s`.
pub fn radar_power(t: &TransmitBeamformer, a: &CVec) -> f64 {
    let ms = t.num_antennas().max(1) as f64;
    t.t.column_iter().map(|col| a.dotc(&col).norm_sqr()).sum::<f64>() / ms
}

/// A-RIS power consumption `Σ_k ‖Ψᴴ G t_k‖² + ‖ψ‖² σ₁²`.
pub fn ris_power(t: &TransmitBeamformer, g: &CMat, ris: &RisState, ris_noise: f64) -> f64 {
    let incident = g * &t.t;
    let amplified: f64 = incident
        .column_iter()
        .map(|col| {
            col.iter()
                .zip(ris.psi.iter())
                .map(|(x, p)| (p.conj() * x).norm_sqr())
                .sum::<f64>()
        })
        .sum();
    amplified + ris.power_gain() * ris_noise
}

/// Radar probing power over an angle grid (radians).
pub fn beampattern(
    t: &TransmitBeamformer,
    subset: &AntennaSubset,
    angles: &[f64],
    d_over_lambda: f64,
) -> Vec<f64> {
    angles
        .iter()
        .map(|&ang| radar_power(t, &steering_vector(ang, subset, d_over_lambda)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{crandn_mat, crandn_vec};
    use rand::SeedableRng;

    fn scalar_channels(h: f64, k: usize) -> SelectedChannels {
        SelectedChannels {
            g: CMat::zeros(1, 1),
            h_direct: vec![CVec::from_element(1, c(h, 0.0)); k],
            h_ris: vec![CVec::zeros(1); k],
        }
    }

    #[test]
    fn effective_channel_cases() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let g = crandn_mat(3, 2, &mut rng);
        let hd = crandn_vec(2, &mut rng);
        let hr = crandn_vec(3, &mut rng);
        let off = RisState::off(3);
        assert_eq!(effective_channel(&hd, &g, &off, &hr).unwrap(), hd);

        let ris = RisState::new(crandn_vec(3, &mut rng));
        let once = effective_channel(&hd, &g, &ris, &hr).unwrap() - &hd;
        let twice = effective_channel(&hd, &g, &RisState::new(&ris.psi * c(2.0, 0.0)), &hr).unwrap() - &hd;
        assert!((twice - once * c(2.0, 0.0)).norm() < 1e-12);

        // N = 1, M_s = 1, no direct path: conj(G) ψ h_r
        let g1 = CMat::from_element(1, 1, c(0.3, -0.7));
        let p1 = RisState::new(CVec::from_element(1, c(1.1, 0.2)));
        let r1 = CVec::from_element(1, c(-0.4, 0.9));
        let h = effective_channel(&CVec::zeros(1), &g1, &p1, &r1).unwrap();
        let expect = g1[(0, 0)].conj() * p1.psi[0] * r1[0];
        assert!((h[0] - expect).norm() < 1e-15);

        assert!(effective_channel(&CVec::zeros(3), &g, &ris, &hr).is_err());
    }

    #[test]
    fn sinr_examples() {
        let noise = NoiseModel::uniform(1, 1.0, 1.0);
        let ch = SelectedChannels {
            g: CMat::zeros(1, 2),
            h_direct: vec![CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])],
            h_ris: vec![CVec::zeros(1)],
        };
        let t = TransmitBeamformer::new(CMat::from_column_slice(2, 1, &[c(2.0, 0.0), c(0.0, 0.0)]));
        let g = sinr(0, &t, &ch, &RisState::off(1), &noise).unwrap();
        assert!((g - 4.0).abs() < 1e-14);

        let ch2 = scalar_channels(1.0, 2);
        let t2 = TransmitBeamformer::new(CMat::from_element(1, 2, c(1.0, 0.0)));
        let n2 = NoiseModel::uniform(2, 1.0, 1.0);
        let g1 = sinr(0, &t2, &ch2, &RisState::off(1), &n2).unwrap();
        assert!((g1 - 0.5).abs() < 1e-14);
        let r = wsr(&t2, &ch2, &RisState::off(1), &n2, &[0.7, 0.7]).unwrap();
        assert!((r - 2.0 * 0.7 * 1.5f64.log2()).abs() < 1e-14);
        assert_eq!(wsr(&t2, &ch2, &RisState::off(1), &n2, &[0.0, 0.0]).unwrap(), 0.0);
        assert!(wsr(&t2, &ch2, &RisState::off(1), &n2, &[-1.0, 0.0]).is_err());
    }

    #[test]
    fn sinr_scale_invariant_without_noise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let ch = SelectedChannels {
            g: crandn_mat(3, 2, &mut rng),
            h_direct: (0..2).map(|_| crandn_vec(2, &mut rng)).collect(),
            h_ris: (0..2).map(|_| crandn_vec(3, &mut rng)).collect(),
        };
        let ris = RisState::new(crandn_vec(3, &mut rng));
        let noise = NoiseModel::uniform(2, 1e-300, 1e-300);
        let t = TransmitBeamformer::new(crandn_mat(2, 2, &mut rng));
        let t3 = TransmitBeamformer::new(&t.t * c(3.0, 0.0));
        let a = sinr(1, &t, &ch, &ris, &noise).unwrap();
        let b = sinr(1, &t3, &ch, &ris, &noise).unwrap();
        assert!((a - b).abs() < 1e-10 * a.max(1.0));
    }

    #[test]
    fn wsr_single_user_unit_sinr() {
        let ch = scalar_channels(1.0, 1);
        let t = TransmitBeamformer::new(CMat::from_element(1, 1, c(1.0, 0.0)));
        let noise = NoiseModel::uniform(1, 1.0, 1.0);
        assert!((wsr(&t, &ch, &RisState::off(1), &noise, &[1.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn radar_power_cases() {
        let sub = AntennaSubset::new(vec![0, 2, 3], 6).unwrap();
        let a = steering_vector(0.4, &sub, 0.5);
        assert_eq!(radar_power(&TransmitBeamformer::new(CMat::zeros(3, 2)), &a), 0.0);
        let cst = 1.7;
        let t = TransmitBeamformer::new(CMat::from_column_slice(3, 1, (&a * c(cst, 0.0)).as_slice()));
        assert!((radar_power(&t, &a) - cst * cst * 3.0).abs() < 1e-12);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let t = TransmitBeamformer::new(crandn_mat(3, 4, &mut rng));
        let cov = &t.t * t.t.adjoint();
        let via_cov = (a.adjoint() * cov * &a)[(0, 0)].re / 3.0;
        assert!((via_cov - radar_power(&t, &a)).abs() < 1e-12);
        let t2 = TransmitBeamformer::new(&t.t * c(2.0, 0.0));
        assert!((radar_power(&t2, &a) - 4.0 * radar_power(&t, &a)).abs() < 1e-12);
    }

    #[test]
    fn ris_power_cases() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let g = crandn_mat(4, 3, &mut rng);
        let t = TransmitBeamformer::new(crandn_mat(3, 2, &mut rng));
        assert_eq!(ris_power(&t, &g, &RisState::off(4), 0.5), 0.0);
        let ones = RisState::new(CVec::from_element(4, c(1.0, 0.0)));
        let zero_t = TransmitBeamformer::new(CMat::zeros(3, 2));
        assert!((ris_power(&zero_t, &g, &ones, 0.25) - 1.0).abs() < 1e-15);
        // against the dense definition
        let ris = RisState::new(crandn_vec(4, &mut rng));
        let psi_mat = CMat::from_diagonal(&ris.psi);
        let dense: f64 = t
            .t
            .column_iter()
            .map(|col| (psi_mat.adjoint() * &g * col).norm_squared())
            .sum::<f64>()
            + psi_mat.norm_squared() * 0.3;
        assert!((ris_power(&t, &g, &ris, 0.3) - dense).abs() < 1e-12);
    }

    #[test]
    fn beampattern_cases() {
        let sub = AntennaSubset::contiguous(6);
        let grid: Vec<f64> = (0..=360).map(|i| (-90.0 + 0.5 * i as f64).to_radians()).collect();
        let phi = 30f64.to_radians();
        let a = steering_vector(phi, &sub, 0.5);
        let t = TransmitBeamformer::new(CMat::from_column_slice(6, 1, a.as_slice()));
        let bp = beampattern(&t, &sub, &grid, 0.5);
        let peak = bp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((grid[peak] - phi).abs() < 1e-9);
        for (ang, p) in grid.iter().zip(&bp).step_by(37) {
            assert_eq!(*p, radar_power(&t, &steering_vector(*ang, &sub, 0.5)));
        }
        let zero = beampattern(&TransmitBeamformer::new(CMat::zeros(6, 2)), &sub, &grid, 0.5);
        assert!(zero.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn normalize_rows_sets_per_antenna_power() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut t = TransmitBeamformer::new(crandn_mat(5, 3, &mut rng));
        t.t.row_mut(2).fill(c(0.0, 0.0));
        t.normalize_rows(0.02);
        for p in t.antenna_powers() {
            assert!((p - 0.02).abs() < 1e-15);
        }
    }

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watts(20.0) - 0.1).abs() < 1e-15);
        assert!((dbm_to_watts(-20.0) - 1e-5).abs() < 1e-20);
        assert!((watts_to_dbm(0.1) - 20.0).abs() < 1e-12);
    }
}
