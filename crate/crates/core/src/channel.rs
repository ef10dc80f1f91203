//! Channel realizations for the BS / active-RIS / users geometry.
//!
//! The BS and the RIS are uniform linear arrays whose axis is the y-axis, so
//! angles are measured from the x-axis (broadside) and a plane wave leaving
//! along angle `theta` picks up phase `2π (d/λ) m sin(theta)` on element `m`.
//!
//! Links that touch the RIS are Rician (geometric line-of-sight plus
//! Gaussian scatter); the direct BS-user links are Rayleigh. Every link is
//! scaled by `PL(dist) = PL₀ · dist^(-β)` so that `E|h|² = PL(dist)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cis, crandn, CMat, CVec};

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemGeometry {
    pub bs_position: Point,
    pub ris_position: Point,
    pub user_center: Point,
    pub user_radius: f64,
    pub num_users: usize,
    pub num_antennas: usize,
    pub num_ris_elements: usize,
    /// Radar target direction in radians.
    pub target_angle: f64,
}

impl Default for SystemGeometry {
    fn default() -> Self {
        Self {
            bs_position: [0.0, 0.0],
            ris_position: [150.0, 0.0],
            user_center: [150.0, 10.0],
            user_radius: 5.0,
            num_users: 4,
            num_antennas: 8,
            num_ris_elements: 36,
            target_angle: 30f64.to_radians(),
        }
    }
}

impl SystemGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_antennas == 0 || self.num_ris_elements == 0 {
            return Err(Error::invalid("K, M and N must all be at least 1"));
        }
        if !(self.user_radius >= 0.0) {
            return Err(Error::invalid("user radius must be nonnegative"));
        }
        if !(self.target_angle.abs() < PI / 2.0) {
            return Err(Error::invalid("target angle must lie in (-pi/2, pi/2)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path loss at the 1 m reference distance, in dB.
    pub pathloss_ref_db: f64,
    pub exponent_direct: f64,
    pub exponent_ris: f64,
    /// Linear Rician K-factor of the RIS-side links.
    pub rician_factor: f64,
    pub d_over_lambda: f64,
    pub rng_seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            pathloss_ref_db: -30.0,
            exponent_direct: 3.5,
            exponent_ris: 2.2,
            rician_factor: 10.0,
            d_over_lambda: 0.5,
            rng_seed: 0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.exponent_direct >= 0.0 && self.exponent_ris >= 0.0) {
            return Err(Error::invalid("path-loss exponents must be nonnegative"));
        }
        if !(self.rician_factor >= 0.0) {
            return Err(Error::invalid("Rician factor must be nonnegative"));
        }
        if !(self.d_over_lambda > 0.0) {
            return Err(Error::invalid("d/lambda must be positive"));
        }
        if !self.pathloss_ref_db.is_finite() {
            return Err(Error::NonFinite("pathloss_ref_db"));
        }
        Ok(())
    }

    /// `PL₀ · dist^(-exponent)` in linear scale.
    pub fn pathloss(&self, dist: f64, exponent: f64) -> f64 {
        10f64.powf(self.pathloss_ref_db / 10.0) * dist.powf(-exponent)
    }
}

/// One channel realization over the full antenna array.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS → RIS, `N × M`.
    pub g_full: CMat,
    /// BS → user `k`, length `M` each.
    pub h_direct_full: Vec<CVec>,
    /// RIS → user `k`, length `N` each.
    pub h_ris: Vec<CVec>,
    /// User positions drawn for this realization.
    pub user_positions: Vec<Point>,
}

impl ChannelSet {
    pub fn num_antennas(&self) -> usize {
        self.g_full.ncols()
    }

    pub fn num_ris_elements(&self) -> usize {
        self.g_full.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.h_ris.len()
    }
}

/// Ordered set of distinct selected antenna indices (0-based, ascending).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AntennaSubset(Vec<usize>);

impl AntennaSubset {
    /// Validates distinctness and range, then sorts into canonical order.
    pub fn new(mut indices: Vec<usize>, num_antennas: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("antenna subset must not be empty"));
        }
        if indices.len() > num_antennas {
            return Err(Error::invalid(format!(
                "subset of {} antennas exceeds array size {num_antennas}",
                indices.len()
            )));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("antenna indices must be distinct"));
        }
        if let Some(&last) = indices.last() {
            if last >= num_antennas {
                return Err(Error::invalid(format!(
                    "antenna index {last} out of range for M = {num_antennas}"
                )));
            }
        }
        Ok(Self(indices))
    }

    /// Antennas `0..count`.
    pub fn contiguous(count: usize) -> Self {
        Self((0..count).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    /// Compact `0;2;5` rendering used in CSV output.
    pub fn to_compact(&self) -> String {
        self.0
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(";")
    }
}

fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Sine of the direction `from → to` measured from the x-axis.
fn direction_sine(from: Point, to: Point) -> f64 {
    let d = distance(from, to);
    (to[1] - from[1]) / d
}

/// ULA response with `count` elements for direction sine `u`.
fn ula_response(count: usize, u: f64, d_over_lambda: f64) -> CVec {
    CVec::from_iterator(
        count,
        (0..count).map(|m| cis(2.0 * PI * d_over_lambda * m as f64 * u)),
    )
}

fn rician<R: Rng>(los: &CMat, kappa: f64, pathloss: f64, rng: &mut R) -> CMat {
    let los_w = (kappa / (1.0 + kappa)).sqrt();
    let nlos_w = (1.0 / (1.0 + kappa)).sqrt();
    let amp = pathloss.sqrt();
    CMat::from_fn(los.nrows(), los.ncols(), |i, j| {
        (los[(i, j)] * los_w + crandn(rng) * nlos_w) * amp
    })
}

/// Draws one channel realization; identical inputs give bit-identical output.
pub fn generate_channels(geometry: &SystemGeometry, params: &ChannelParams) -> Result<ChannelSet> {
    geometry.validate()?;
    params.validate()?;
    let (k, m, n) = (
        geometry.num_users,
        geometry.num_antennas,
        geometry.num_ris_elements,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);

    let users: Vec<Point> = (0..k)
        .map(|_| {
            let r = geometry.user_radius * rng.gen::<f64>().sqrt();
            let theta = 2.0 * PI * rng.gen::<f64>();
            [
                geometry.user_center[0] + r * theta.cos(),
                geometry.user_center[1] + r * theta.sin(),
            ]
        })
        .collect();

    let (bs, ris) = (geometry.bs_position, geometry.ris_position);
    let d_br = distance(bs, ris);
    if d_br <= 0.0 {
        return Err(Error::invalid("BS and RIS are co-located"));
    }
    for (i, &u) in users.iter().enumerate() {
        if distance(bs, u) <= 0.0 || distance(ris, u) <= 0.0 {
            return Err(Error::invalid(format!("user {i} co-located with BS or RIS")));
        }
    }
    let dl = params.d_over_lambda;

    let g_los = ula_response(n, direction_sine(ris, bs), dl)
        * ula_response(m, direction_sine(bs, ris), dl).adjoint();
    let g_full = rician(
        &g_los,
        params.rician_factor,
        params.pathloss(d_br, params.exponent_ris),
        &mut rng,
    );

    let h_direct_full = users
        .iter()
        .map(|&u| {
            let amp = params.pathloss(distance(bs, u), params.exponent_direct).sqrt();
            CVec::from_iterator(m, (0..m).map(|_| crandn(&mut rng) * amp))
        })
        .collect();

    let h_ris = users
        .iter()
        .map(|&u| {
            let los = CMat::from_column_slice(
                n,
                1,
                ula_response(n, direction_sine(ris, u), dl).as_slice(),
            );
            let pl = params.pathloss(distance(ris, u), params.exponent_ris);
            rician(&los, params.rician_factor, pl, &mut rng).column(0).into_owned()
        })
        .collect();

    Ok(ChannelSet {
        g_full,
        h_direct_full,
        h_ris,
        user_positions: users,
    })
}

/// `a(angle)` restricted to the selected antennas.
pub fn steering_vector(angle: f64, subset: &AntennaSubset, d_over_lambda: f64) -> CVec {
    let s = angle.sin();
    CVec::from_iterator(
        subset.len(),
        subset
            .indices()
            .iter()
            .map(|&m| cis(2.0 * PI * d_over_lambda * m as f64 * s)),
    )
}

/// Channels restricted to the selected antennas.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedChannels {
    /// `N × M_s`.
    pub g: CMat,
    pub h_direct: Vec<CVec>,
    pub h_ris: Vec<CVec>,
}

impl SelectedChannels {
    pub fn num_selected(&self) -> usize {
        self.g.ncols()
    }

    pub fn num_ris_elements(&self) -> usize {
        self.g.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.h_direct.len()
    }
}

pub fn select_subchannels(channels: &ChannelSet, subset: &AntennaSubset) -> Result<SelectedChannels> {
    let m = channels.num_antennas();
    if let Some(&bad) = subset.indices().iter().find(|&&i| i >= m) {
        return Err(Error::invalid(format!(
            "antenna index {bad} out of range for M = {m}"
        )));
    }
    let g = channels.g_full.select_columns(subset.indices());
    let h_direct = channels
        .h_direct_full
        .iter()
        .map(|h| h.select_rows(subset.indices()))
        .collect();
    Ok(SelectedChannels {
        g,
        h_direct,
        h_ris: channels.h_ris.clone(),
    })
}
