//! Closed-form identities linking the metrics, the WMMSE lifting and the
//! fractional-programming reformulation.

use aris_isac::channel::{generate_channels, select_subchannels, steering_vector, AntennaSubset, ChannelParams, SelectedChannels, SystemGeometry};
use aris_isac::linalg::{c, crandn, crandn_mat, crandn_vec, CMat, CVec, C64};
use aris_isac::metrics::{
    radar_power, ris_power, sinrs, wsr_effective, EffectiveChannels, NoiseModel, PowerBudget, RisState, TransmitBeamformer,
};
use aris_isac::ris_fp::{
    assemble_quadratic, dual_transform_objective, quadratic_transform_objective, update_alpha, update_epsilon,
};
use aris_isac::wmmse::{assemble_sdr, homogenize, mmse_errors, mse, WmmseState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * a.abs().max(b.abs()).max(1e-300)
}

struct Setup {
    ch: SelectedChannels,
    subset: AntennaSubset,
    t: TransmitBeamformer,
    ris: RisState,
    noise: NoiseModel,
    weights: Vec<f64>,
}

/// Realistic channel draw with a random beamformer and RIS, rescaled so the
/// SINRs are of order one and every term matters.
fn setup(seed: u64) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geo = SystemGeometry {
        num_ris_elements: 12,
        ..SystemGeometry::default()
    };
    let set = generate_channels(&geo, &ChannelParams { rng_seed: seed, ..ChannelParams::default() }).unwrap();
    let subset = AntennaSubset::new(vec![0, 2, 3, 5, 6, 7], 8).unwrap();
    let ch = select_subchannels(&set, &subset).unwrap();
    let k = ch.num_users();
    let t = TransmitBeamformer::new(crandn_mat(6, k, &mut rng) * c(0.1, 0.0));
    let ris = RisState::new(crandn_vec(12, &mut rng) * c(30.0, 0.0));
    let eff = EffectiveChannels::new(&ch, &ris).unwrap();
    let signal: f64 = (0..k).map(|j| eff.link_terms(j, &t, &NoiseModel::uniform(k, 0.0, 0.0)).received).sum();
    let noise = NoiseModel::uniform(k, signal / k as f64, 1e-3 * signal);
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    Setup { ch, subset, t, ris, noise, weights }
}

#[test]
fn mmse_error_is_one_over_one_plus_sinr() {
    for seed in 0..20 {
        let s = setup(seed);
        let eff = EffectiveChannels::new(&s.ch, &s.ris).unwrap();
        let g = sinrs(&s.t, &eff, &s.noise);
        for (e, gk) in mmse_errors(&s.t, &eff, &s.noise).iter().zip(&g) {
            assert!(close(*e, 1.0 / (1.0 + gk)), "seed {seed}: {e} vs {}", 1.0 / (1.0 + gk));
        }
    }
}

#[test]
fn transform_objectives_equal_wsr_at_their_auxiliaries() {
    for seed in 0..20 {
        let s = setup(seed);
        let eff = EffectiveChannels::new(&s.ch, &s.ris).unwrap();
        let g = sinrs(&s.t, &eff, &s.noise);
        let wsr = wsr_effective(&s.t, &eff, &s.noise, &s.weights);
        let alpha = update_alpha(&g);
        let dual = dual_transform_objective(&g, &alpha, &s.weights);
        assert!(close(dual, wsr), "seed {seed}: dual {dual} vs wsr {wsr}");

        let eps = update_epsilon(&s.t, &eff, &s.noise, &s.weights, &alpha);
        let qt = quadratic_transform_objective(&s.t, &eff, &s.noise, &s.weights, &alpha, &eps);
        let ratio: f64 = (0..g.len())
            .map(|k| s.weights[k] * (1.0 + alpha[k]) * g[k] / (1.0 + g[k]))
            .sum();
        assert!(close(qt, ratio), "seed {seed}: quadratic {qt} vs ratio term {ratio}");
        let log_part: f64 = (0..g.len())
            .map(|k| s.weights[k] * ((1.0 + alpha[k]).log2() - alpha[k]))
            .sum();
        assert!(close(log_part + qt, wsr));
    }
}

/// The quadratic-transform objective as a function of `ψ` is the QCQP
/// objective plus a `ψ`-independent term.
#[test]
fn psi_separation_holds_for_random_psi() {
    let s = setup(7);
    let eff0 = EffectiveChannels::new(&s.ch, &s.ris).unwrap();
    let g = sinrs(&s.t, &eff0, &s.noise);
    let alpha = update_alpha(&g);
    let eps = update_epsilon(&s.t, &eff0, &s.noise, &s.weights, &alpha);
    let q = assemble_quadratic(
        &s.t,
        &s.ch.g,
        &s.ch.h_direct,
        &s.ch.h_ris,
        &eps,
        &alpha,
        &s.weights,
        s.noise.ris_noise,
        1.0,
    )
    .unwrap();
    // terms that involve only the direct links
    let k = s.t.num_users();
    let constant: f64 = (0..k)
        .map(|u| {
            let hd = &s.ch.h_direct[u];
            let amp = (s.weights[u] * (1.0 + alpha[u])).sqrt();
            let direct_desired = hd.dotc(&s.t.t.column(u));
            let direct_power: f64 = (0..k).map(|i| hd.dotc(&s.t.t.column(i)).norm_sqr()).sum();
            2.0 * amp * (eps[u].conj() * direct_desired).re - eps[u].norm_sqr() * (direct_power + s.noise.user_noise[u])
        })
        .sum();

    let mut rng = ChaCha8Rng::seed_from_u64(70);
    for trial in 0..50 {
        let psi = crandn_vec(12, &mut rng) * c(rng.gen_range(0.1..50.0), 0.0);
        let ris = RisState::new(psi.clone());
        let eff = EffectiveChannels::new(&s.ch, &ris).unwrap();
        let lhs = quadratic_transform_objective(&s.t, &eff, &s.noise, &s.weights, &alpha, &eps);
        let rhs = q.objective(&psi) + constant;
        let scale = lhs.abs().max(q.objective(&psi).abs()).max(constant.abs());
        assert!((lhs - rhs).abs() <= TOL * scale, "trial {trial}: {lhs} vs {rhs}");

        let p = ris_power(&s.t, &s.ch.g, &ris, s.noise.ris_noise);
        assert!(close(p, q.constraint(&psi)), "trial {trial}: {p} vs {}", q.constraint(&psi));
    }
}

#[test]
fn ris_power_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (n, ms, k) = (rng.gen_range(1..10), rng.gen_range(1..6), rng.gen_range(1..4));
        let g = crandn_mat(n, ms, &mut rng);
        let t = TransmitBeamformer::new(crandn_mat(ms, k, &mut rng));
        let psi = crandn_vec(n, &mut rng);
        let s1 = rng.gen_range(0.0..2.0);
        let mut direct = psi.norm_squared() * s1;
        for j in 0..k {
            let x = &g * t.t.column(j);
            direct += (0..n).map(|i| (psi[i].conj() * x[i]).norm_sqr()).sum::<f64>();
        }
        let got = ris_power(&t, &g, &RisState::new(psi), s1);
        assert!(close(got, direct));
    }
}

/// `Σ_k tr(Q_k t̃_k t̃_kᴴ) + constant = Σ_k ω_k MSE_k`, for any `T`, with the
/// receivers and weights held at their values for a different `T`.
#[test]
fn lifted_objective_reproduces_weighted_mse() {
    for seed in 0..10 {
        let s = setup(seed);
        let eff = EffectiveChannels::new(&s.ch, &s.ris).unwrap();
        let state = WmmseState::compute(&s.t, &eff, &s.noise, &s.weights);
        let steering = steering_vector(0.5, &s.subset, 0.5);
        let budget = PowerBudget {
            total: 1e6,
            split_ratio: 0.5,
            radar_ratio: 0.5,
        };
        let sdr = assemble_sdr(&eff, &state, &s.noise, &steering, &budget, &s.ch.g, &s.ris).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let other = TransmitBeamformer::new(crandn_mat(6, s.t.num_users(), &mut rng) * c(0.1, 0.0));
        let lifted: Vec<CMat> = homogenize(&other).iter().map(|v| v * v.adjoint()).collect();
        let lhs: f64 = sdr
            .objective
            .iter()
            .zip(&lifted)
            .map(|(q, w)| (q * w).trace().re)
            .sum::<f64>()
            + sdr.constant;
        let rhs: f64 = (0..s.t.num_users())
            .map(|k| state.weights[k] * mse(k, state.receivers[k], &other, &eff, &s.noise))
            .sum();
        assert!(close(lhs, rhs), "seed {seed}: {lhs} vs {rhs}");

        // radar and RIS rows in lifted form
        let ms = 6.0;
        let total: f64 = other.t.iter().map(|z| z.norm_sqr()).sum();
        let radar_lifted: f64 = lifted.iter().map(|w| (&sdr.radar * w).trace().re).sum();
        assert!(close(radar_lifted, ms * total - ms * radar_power(&other, &steering)));
        let ris_lifted: f64 = lifted.iter().map(|w| (&sdr.ris * w).trace().re).sum();
        let direct = ris_power(&other, &s.ch.g, &s.ris, s.noise.ris_noise) - s.ris.power_gain() * s.noise.ris_noise;
        assert!(close(ris_lifted, direct));
    }
}

/// The MMSE receiver is a stationary point and global minimizer of the
/// scalar MSE, and its MSE equals the closed-form error.
#[test]
fn mmse_receiver_is_locally_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..10 {
        let s = setup(seed);
        let eff = EffectiveChannels::new(&s.ch, &s.ris).unwrap();
        let state = WmmseState::compute(&s.t, &eff, &s.noise, &s.weights);
        for k in 0..s.t.num_users() {
            let s_opt = state.receivers[k];
            let e_opt = mse(k, s_opt, &s.t, &eff, &s.noise);
            assert!(close(e_opt, state.errors[k]));
            for _ in 0..20 {
                let delta: C64 = crandn(&mut rng) * c(1e-3 * s_opt.norm().max(1e-12), 0.0);
                assert!(mse(k, s_opt + delta, &s.t, &eff, &s.noise) >= e_opt - TOL * e_opt);
            }
        }
    }
}

#[test]
fn steering_vector_has_unit_modulus_entries() {
    let subset = AntennaSubset::new(vec![1, 4, 5], 8).unwrap();
    let a: CVec = steering_vector(0.3, &subset, 0.5);
    assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
    // elements 1 and 4 are three half-wavelengths apart
    let expected = 3.0 * std::f64::consts::PI * 0.3f64.sin();
    let ratio = a[1] / a[0];
    let phase = ratio.im.atan2(ratio.re);
    let diff = (phase - expected).rem_euclid(2.0 * std::f64::consts::PI);
    assert!(diff < 1e-12 || (2.0 * std::f64::consts::PI - diff) < 1e-12);
}
