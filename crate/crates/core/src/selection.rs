//! Antenna selection by discrete cuckoo search.
//!
//! Nests hold `M_s` antenna indices as real coordinates. Each iteration moves
//! every nest by a Lévy flight, then by a local random walk along the
//! difference of two other nests; after each move the coordinates are
//! floored, clamped, de-duplicated and sorted back into a valid subset, and
//! the move is kept only if it improves that nest's fitness.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{select_subchannels, AntennaSubset, ChannelSet};
use crate::error::{Error, Result};
use crate::metrics::{wsr, RisState};
use crate::optimizer::{radar_feasible_matched, random_phase_ris};
use crate::par::Execution;
use crate::ris_fp::{fp_pass, QcqpSettings};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CuckooParams {
    pub population: usize,
    pub max_iters: usize,
    pub levy_exponent: f64,
    pub step_scale: f64,
    pub discard_prob: f64,
    pub stagnation_window: usize,
    pub rng_seed: u64,
}

impl Default for CuckooParams {
    fn default() -> Self {
        Self {
            population: 15,
            max_iters: 50,
            levy_exponent: 1.5,
            step_scale: 1.0,
            discard_prob: 0.25,
            stagnation_window: 10,
            rng_seed: 0,
        }
    }
}

impl CuckooParams {
    pub fn validate(&self) -> Result<()> {
        if self.population < 1 || self.max_iters < 1 || self.stagnation_window < 1 {
            return Err(Error::invalid("population, max_iters and stagnation_window must be positive"));
        }
        if !(self.levy_exponent > 0.0 && self.levy_exponent < 2.0) {
            return Err(Error::invalid("levy_exponent must lie in (0, 2)"));
        }
        if !(self.step_scale > 0.0) {
            return Err(Error::invalid("step_scale must be positive"));
        }
        if !(0.0..=1.0).contains(&self.discard_prob) {
            return Err(Error::invalid("discard_prob must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nest {
    pub subset: AntennaSubset,
    pub fitness: f64,
}

impl Nest {
    fn coords(&self) -> Vec<f64> {
        self.subset.indices().iter().map(|&i| i as f64).collect()
    }
}

/// Mantegna scale `σ_u` for Lévy exponent `δ`.
pub fn levy_sigma(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 2.0) {
        return Err(Error::invalid("Levy exponent must lie in (0, 2)"));
    }
    use statrs::function::gamma::gamma;
    let num = gamma(1.0 + delta) * (std::f64::consts::PI * delta / 2.0).sin();
    let den = gamma((1.0 + delta) / 2.0) * delta * 2f64.powf((delta - 1.0) / 2.0);
    Ok((num / den).powf(1.0 / delta))
}

/// `u / |s|^(1/δ)` with `u ~ N(0, σ_u²)` and `s ~ N(0, 1)`.
pub fn levy_step<R: Rng + ?Sized>(delta: f64, sigma: f64, rng: &mut R) -> f64 {
    let u: f64 = StandardNormal.sample(rng);
    loop {
        let s: f64 = StandardNormal.sample(rng);
        let denom = s.abs().powf(1.0 / delta);
        if denom > 0.0 && denom.is_finite() {
            return sigma * u / denom;
        }
    }
}

/// `C + α ⊙ ε` with i.i.d. Lévy steps.
pub fn levy_update<R: Rng + ?Sized>(coords: &[f64], step_scale: f64, delta: f64, rng: &mut R) -> Result<Vec<f64>> {
    let sigma = levy_sigma(delta)?;
    Ok(coords
        .iter()
        .map(|&x| x + step_scale * levy_step(delta, sigma, rng))
        .collect())
}

/// `C_l + γ ⊙ h(p - ζ) ⊙ (C_j - C_k)` with `γ, ζ ~ U[0, 1)` per coordinate.
pub fn local_random_update<R: Rng + ?Sized>(
    c_l: &[f64],
    c_j: &[f64],
    c_k: &[f64],
    p: f64,
    rng: &mut R,
) -> Vec<f64> {
    c_l.iter()
        .zip(c_j.iter().zip(c_k))
        .map(|(&l, (&j, &k))| {
            let gamma: f64 = rng.gen();
            let zeta: f64 = rng.gen();
            let fire = if p - zeta > 0.0 { 1.0 } else { 0.0 };
            l + gamma * fire * (j - k)
        })
        .collect()
}

/// Floors, clamps to `[0, M-1]`, replaces duplicates with random unused
/// indices and sorts.
pub fn repair<R: Rng + ?Sized>(raw: &[f64], num_antennas: usize, rng: &mut R) -> Result<AntennaSubset> {
    if raw.is_empty() || raw.len() > num_antennas {
        return Err(Error::invalid("raw nest length must lie in 1..=M"));
    }
    let top = (num_antennas - 1) as f64;
    let mut used = vec![false; num_antennas];
    let mut out = Vec::with_capacity(raw.len());
    let mut dup_slots = 0;
    for &x in raw {
        let v = if x.is_nan() { 0.0 } else { x.floor().clamp(0.0, top) };
        let idx = v as usize;
        if used[idx] {
            dup_slots += 1;
        } else {
            used[idx] = true;
            out.push(idx);
        }
    }
    for _ in 0..dup_slots {
        let free: Vec<usize> = (0..num_antennas).filter(|&i| !used[i]).collect();
        let &pick = free.choose(rng).expect("subset length ≤ M leaves a free index");
        used[pick] = true;
        out.push(pick);
    }
    AntennaSubset::new(out, num_antennas)
}

/// Deterministic WSR proxy used to rank subsets.
#[derive(Debug, Clone)]
pub struct FitnessModel<'a> {
    pub channels: &'a ChannelSet,
    pub scenario: &'a Scenario,
    /// Starting point of the RIS pass, shared by every subset.
    pub ris_init: RisState,
    pub qcqp: QcqpSettings,
}

impl<'a> FitnessModel<'a> {
    pub fn new(channels: &'a ChannelSet, scenario: &'a Scenario, seed: u64) -> Self {
        Self {
            channels,
            scenario,
            ris_init: random_phase_ris(channels.num_ris_elements(), seed),
            qcqp: QcqpSettings::default(),
        }
    }

    /// Radar-feasible matched beamformer, one RIS pass, WSR.
    pub fn evaluate(&self, subset: &AntennaSubset) -> Result<f64> {
        let sel = select_subchannels(self.channels, subset)?;
        let steering = self.scenario.steering(subset);
        let t = radar_feasible_matched(&sel, &self.ris_init, self.scenario, &steering)?;
        let pass = fp_pass(&t, &sel, &self.ris_init, self.scenario, &self.qcqp)?;
        let value = wsr(&t, &sel, &pass.ris, &self.scenario.noise, &self.scenario.weights)?;
        Ok(value.max(0.0))
    }
}

/// Fitness memo shared across one search.
struct Memo<'a> {
    model: FitnessModel<'a>,
    cache: HashMap<Vec<usize>, f64>,
    exec: Execution,
}

impl Memo<'_> {
    fn evaluate_all(&mut self, subsets: &[AntennaSubset]) -> Result<Vec<f64>> {
        let mut missing: Vec<AntennaSubset> = Vec::new();
        for s in subsets {
            if !self.cache.contains_key(s.indices()) && !missing.contains(s) {
                missing.push(s.clone());
            }
        }
        let values = self.exec.map(&missing, |s| self.model.evaluate(s));
        for (s, v) in missing.iter().zip(values) {
            self.cache.insert(s.indices().to_vec(), v?);
        }
        Ok(subsets.iter().map(|s| self.cache[s.indices()]).collect())
    }
}

/// Independent stream for `(seed, iteration, nest, phase)`.
fn substream(seed: u64, iter: usize, nest: usize, phase: u64) -> ChaCha8Rng {
    let mut z = seed
        ^ (iter as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (nest as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ phase.wrapping_mul(0x1656_67B1_9E37_79F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

fn random_subset<R: Rng + ?Sized>(m: usize, ms: usize, rng: &mut R) -> Result<AntennaSubset> {
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(rng);
    idx.truncate(ms);
    AntennaSubset::new(idx, m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: Nest,
    /// Best fitness after initialization and after every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Distinct subsets whose fitness was computed.
    pub evaluations: usize,
}

fn best_of(nests: &[Nest]) -> &Nest {
    nests
        .iter()
        .reduce(|a, b| if b.fitness > a.fitness { b } else { a })
        .expect("population is nonempty")
}

/// Cuckoo search for the `num_selected` antennas with the highest fitness.
pub fn cuckoo_search(
    channels: &ChannelSet,
    scenario: &Scenario,
    num_selected: usize,
    params: &CuckooParams,
    exec: Execution,
) -> Result<SearchResult> {
    params.validate()?;
    let m = channels.num_antennas();
    if num_selected == 0 || num_selected > m {
        return Err(Error::invalid("number of selected antennas must lie in 1..=M"));
    }
    let mut memo = Memo {
        model: FitnessModel::new(channels, scenario, params.rng_seed),
        cache: HashMap::new(),
        exec,
    };
    let seed = params.rng_seed;

    let init: Vec<AntennaSubset> = (0..params.population)
        .map(|l| random_subset(m, num_selected, &mut substream(seed, 0, l, 0)))
        .collect::<Result<_>>()?;
    let fit = memo.evaluate_all(&init)?;
    let mut nests: Vec<Nest> = init
        .into_iter()
        .zip(fit)
        .map(|(subset, fitness)| Nest { subset, fitness })
        .collect();
    let mut trace = vec![best_of(&nests).fitness];
    let mut stagnant = 0;
    let mut iterations = 0;

    for t in 1..=params.max_iters {
        iterations = t;
        // Lévy flights
        let cands: Vec<AntennaSubset> = nests
            .iter()
            .enumerate()
            .map(|(l, nest)| {
                let mut rng = substream(seed, t, l, 1);
                let raw = levy_update(&nest.coords(), params.step_scale, params.levy_exponent, &mut rng)?;
                repair(&raw, m, &mut rng)
            })
            .collect::<Result<_>>()?;
        accept(&mut nests, cands, &mut memo)?;

        // local random walk along the difference of two other nests
        let snapshot: Vec<Vec<f64>> = nests.iter().map(Nest::coords).collect();
        let cands: Vec<AntennaSubset> = (0..nests.len())
            .map(|l| {
                let mut rng = substream(seed, t, l, 2);
                let (j, k) = if nests.len() > 1 {
                    let j = rng.gen_range(0..nests.len());
                    let mut k = rng.gen_range(0..nests.len() - 1);
                    if k >= j {
                        k += 1;
                    }
                    (j, k)
                } else {
                    (0, 0)
                };
                let raw = local_random_update(&snapshot[l], &snapshot[j], &snapshot[k], params.discard_prob, &mut rng);
                repair(&raw, m, &mut rng)
            })
            .collect::<Result<_>>()?;
        accept(&mut nests, cands, &mut memo)?;

        let best = best_of(&nests).fitness;
        if best > *trace.last().expect("trace starts nonempty") {
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        trace.push(best);
        if stagnant >= params.stagnation_window {
            break;
        }
    }

    Ok(SearchResult {
        best: best_of(&nests).clone(),
        trace,
        iterations,
        evaluations: memo.cache.len(),
    })
}

fn accept(nests: &mut [Nest], cands: Vec<AntennaSubset>, memo: &mut Memo) -> Result<()> {
    let fit = memo.evaluate_all(&cands)?;
    for ((nest, subset), fitness) in nests.iter_mut().zip(cands).zip(fit) {
        if fitness > nest.fitness {
            *nest = Nest { subset, fitness };
        }
    }
    Ok(())
}

/// Best of `draws` uniformly random subsets under the same fitness.
pub fn random_search(
    channels: &ChannelSet,
    scenario: &Scenario,
    num_selected: usize,
    draws: usize,
    seed: u64,
    exec: Execution,
) -> Result<Nest> {
    let m = channels.num_antennas();
    if num_selected == 0 || num_selected > m || draws == 0 {
        return Err(Error::invalid("random search needs 1..=M antennas and at least one draw"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005E_ED0F_4A4D_0000);
    let subsets: Vec<AntennaSubset> = (0..draws)
        .map(|_| random_subset(m, num_selected, &mut rng))
        .collect::<Result<_>>()?;
    let mut memo = Memo {
        model: FitnessModel::new(channels, scenario, seed),
        cache: HashMap::new(),
        exec,
    };
    let fit = memo.evaluate_all(&subsets)?;
    let nests: Vec<Nest> = subsets
        .into_iter()
        .zip(fit)
        .map(|(subset, fitness)| Nest { subset, fitness })
        .collect();
    Ok(best_of(&nests).clone())
}

/// Every `M_s`-subset with its fitness, in lexicographic order.
pub fn exhaustive_search(channels: &ChannelSet, scenario: &Scenario, num_selected: usize, seed: u64) -> Result<Vec<Nest>> {
    let m = channels.num_antennas();
    if num_selected == 0 || num_selected > m {
        return Err(Error::invalid("number of selected antennas must lie in 1..=M"));
    }
    let model = FitnessModel::new(channels, scenario, seed);
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..num_selected).collect();
    loop {
        let subset = AntennaSubset::new(idx.clone(), m)?;
        let fitness = model.evaluate(&subset)?;
        out.push(Nest { subset, fitness });
        // next combination
        let mut i = num_selected;
        while i > 0 && idx[i - 1] == m - num_selected + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..num_selected {
            idx[j] = idx[j - 1] + 1;
        }
    }
    Ok(out)
}
