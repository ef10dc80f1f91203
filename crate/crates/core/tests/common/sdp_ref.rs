//! Independent reference solvers for the block SDP and the transmit update.

use aris_isac::channel::{steering_vector, AntennaSubset, SelectedChannels};
use aris_isac::linalg::{c, cis, crandn_mat, crandn_vec, hermitize, random_hermitian, CMat};
use aris_isac::metrics::{wsr_effective, EffectiveChannels, NoiseModel, PowerBudget, RisState, TransmitBeamformer};
use aris_isac::scenario::Scenario;
use aris_isac::sdp::{BlockSdp, SharedInequality};
use aris_isac::wmmse::{update_transmit_beamformer, TransmitConstraints, TransmitSettings};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const R2: f64 = std::f64::consts::SQRT_2;

pub fn pack(m: &CMat) -> DVector<f64> {
    let n = m.nrows();
    let mut v = Vec::with_capacity(n * n);
    for i in 0..n {
        v.push(m[(i, i)].re);
    }
    for i in 0..n {
        for j in i + 1..n {
            v.push(R2 * m[(i, j)].re);
            v.push(R2 * m[(i, j)].im);
        }
    }
    DVector::from_vec(v)
}

pub fn unpack(v: &[f64], n: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = c(v[i], 0.0);
    }
    let mut p = n;
    for i in 0..n {
        for j in i + 1..n {
            let z = c(v[p], v[p + 1]) / R2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            p += 2;
        }
    }
    m
}

/// Dense real Hermitian embedding for Cholesky / inversion.
pub fn real_embed(m: &CMat) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = m[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

pub fn complex_inverse(m: &CMat) -> Option<CMat> {
    let n = m.nrows();
    let r = Cholesky::new(real_embed(m))?.inverse();
    Some(CMat::from_fn(n, n, |i, j| c(r[(i, j)], r[(i + n, j)])))
}

pub fn is_pd(m: &CMat) -> bool {
    Cholesky::new(real_embed(m)).is_some()
}

pub fn log_det(m: &CMat) -> f64 {
    // the real embedding has determinant det(m)²
    let ch = Cholesky::new(real_embed(m)).expect("PD");
    ch.l().diagonal().iter().map(|d| d.ln()).sum()
}

pub struct Instance {
    pub sdp: BlockSdp,
    /// Strictly feasible start.
    pub start: Vec<CMat>,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let blocks = rng.gen_range(1..=2);
    let dim = rng.gen_range(2..=4);
    let corner = rng.gen_bool(0.5).then_some(1.0);
    let mut d: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.5..2.0)).collect();
    if let Some(cv) = corner {
        d[dim - 1] = blocks as f64 * cv;
    }
    let start: Vec<CMat> = (0..blocks)
        .map(|_| {
            let mut w = CMat::zeros(dim, dim);
            for i in 0..dim {
                w[(i, i)] = c(d[i] / blocks as f64, 0.0);
            }
            w
        })
        .collect();
    let objective = (0..blocks).map(|_| random_hermitian(dim, rng)).collect();
    let inequalities = (0..rng.gen_range(0..=2))
        .map(|_| {
            let matrix = random_hermitian(dim, rng);
            let at_start: f64 = start.iter().map(|w| (&matrix * w).trace().re).sum();
            SharedInequality {
                matrix,
                rhs: at_start + rng.gen_range(0.02..0.5),
            }
        })
        .collect();
    Instance {
        sdp: BlockSdp {
            blocks,
            dim,
            objective,
            inequalities,
            diag_rhs: Some(d),
            corner,
        },
        start,
    }
}

/// Feasible-start log-barrier method with equality-constrained Newton steps.
pub fn barrier_reference(inst: &Instance) -> f64 {
    let p = &inst.sdp;
    let (k, n) = (p.blocks, p.dim);
    let nn = n * n;
    let nv = k * nn;
    let cvec = DVector::from_iterator(nv, p.objective.iter().flat_map(|q| pack(q).iter().copied().collect::<Vec<_>>()));
    let scale = cvec.amax().max(1e-300);
    let cvec = cvec / scale;
    let ineq: Vec<(DVector<f64>, f64)> = p
        .inequalities
        .iter()
        .map(|i| {
            let a = pack(&i.matrix);
            (DVector::from_iterator(nv, (0..k).flat_map(|_| a.iter().copied().collect::<Vec<_>>())), i.rhs)
        })
        .collect();
    // equality rows: diag of Σ W (last one implied by corners when present), corners
    let mut eq_rows: Vec<DVector<f64>> = Vec::new();
    let diag_rows = if p.corner.is_some() { n - 1 } else { n };
    for i in 0..diag_rows {
        let mut r = DVector::zeros(nv);
        for b in 0..k {
            r[b * nn + i] = 1.0;
        }
        eq_rows.push(r);
    }
    if p.corner.is_some() {
        for b in 0..k {
            let mut r = DVector::zeros(nv);
            r[b * nn + n - 1] = 1.0;
            eq_rows.push(r);
        }
    }
    let ne = eq_rows.len();

    let mut x = DVector::from_iterator(nv, inst.start.iter().flat_map(|w| pack(w).iter().copied().collect::<Vec<_>>()));
    let blocks_of = |x: &DVector<f64>| -> Vec<CMat> { (0..k).map(|b| unpack(&x.as_slice()[b * nn..(b + 1) * nn], n)).collect() };
    let phi = |x: &DVector<f64>, t: f64| -> Option<f64> {
        let mut val = t * cvec.dot(x);
        for w in blocks_of(x) {
            if !is_pd(&w) {
                return None;
            }
            val -= log_det(&w);
        }
        for (a, b) in &ineq {
            let s = b - a.dot(x);
            if s <= 0.0 {
                return None;
            }
            val -= s.ln();
        }
        Some(val)
    };

    let m_barrier = (k * n + ineq.len()) as f64;
    let mut t = 1.0;
    loop {
        for _newton in 0..200 {
            let ws = blocks_of(&x);
            let mut grad = &cvec * t;
            let mut hess = DMatrix::zeros(nv, nv);
            for (b, w) in ws.iter().enumerate() {
                let winv = complex_inverse(w).expect("iterate stays PD");
                let mut seg = grad.rows_mut(b * nn, nn);
                seg -= pack(&winv);
                for col in 0..nn {
                    let mut e = vec![0.0; nn];
                    e[col] = 1.0;
                    let ecm = unpack(&e, n);
                    let hcol = pack(&(&winv * ecm * &winv));
                    hess.view_mut((b * nn, b * nn + col), (nn, 1)).copy_from(&hcol);
                }
            }
            for (a, bnd) in &ineq {
                let s = bnd - a.dot(&x);
                grad += a / s;
                hess += a * a.transpose() / (s * s);
            }
            let mut kkt = DMatrix::zeros(nv + ne, nv + ne);
            kkt.view_mut((0, 0), (nv, nv)).copy_from(&hess);
            for (r, row) in eq_rows.iter().enumerate() {
                kkt.view_mut((nv + r, 0), (1, nv)).copy_from(&row.transpose());
                kkt.view_mut((0, nv + r), (nv, 1)).copy_from(row);
            }
            let mut rhs = DVector::zeros(nv + ne);
            rhs.rows_mut(0, nv).copy_from(&(-&grad));
            let sol = kkt.lu().solve(&rhs).expect("KKT system is nonsingular");
            let dx = sol.rows(0, nv).into_owned();
            let decrement = -grad.dot(&dx);
            if decrement / 2.0 <= 1e-13 {
                break;
            }
            let f0 = phi(&x, t).expect("current iterate is interior");
            let mut step = 1.0;
            loop {
                let cand = &x + &dx * step;
                if let Some(f1) = phi(&cand, t) {
                    if f1 <= f0 - 0.25 * step * decrement {
                        x = cand;
                        break;
                    }
                }
                step *= 0.5;
                assert!(step > 1e-14, "line search failed");
            }
        }
        if m_barrier / t < 1e-11 {
            break;
        }
        t *= 8.0;
    }
    p.objective_value(&blocks_of(&x))
}

pub fn own_primal_residual(p: &BlockSdp, w: &[CMat]) -> f64 {
    let mut worst: f64 = 0.0;
    if let Some(d) = &p.diag_rhs {
        for (i, di) in d.iter().enumerate() {
            let s: f64 = w.iter().map(|m| m[(i, i)].re).sum();
            worst = worst.max((s - di).abs());
        }
    }
    if let Some(cv) = p.corner {
        for m in w {
            worst = worst.max((m[(p.dim - 1, p.dim - 1)].re - cv).abs());
        }
    }
    for ineq in &p.inequalities {
        let lhs: f64 = w.iter().map(|m| (&ineq.matrix * m).trace().re).sum();
        worst = worst.max(lhs - ineq.rhs);
    }
    for m in w {
        let eig = nalgebra::SymmetricEigen::new(hermitize(m));
        worst = worst.max(-eig.eigenvalues.min());
    }
    worst
}

pub struct GridCase {
    /// WSR after iterating the transmit update to a fixed point.
    pub update_wsr: f64,
    /// Best feasible WSR on the phase grid.
    pub grid_wsr: f64,
    pub update_feasible: bool,
}

/// K = 1, M_s = 2: every feasible beamformer is `√(P_s/2) [e^{jθ₁}, e^{jθ₂}]`,
/// so a grid over both phases bounds the achievable WSR. Returns `None` when
/// no grid point is feasible.
pub fn phase_grid_case(rng: &mut ChaCha8Rng) -> Option<GridCase> {
    let subset = AntennaSubset::new(vec![0, 1], 2).unwrap();
    let n_ris = 4;
    let channels = SelectedChannels {
        g: crandn_mat(n_ris, 2, rng) * c(0.05, 0.0),
        h_direct: vec![crandn_vec(2, rng) * c(0.05, 0.0)],
        h_ris: vec![crandn_vec(n_ris, rng) * c(0.05, 0.0)],
    };
    let scenario = Scenario {
        budget: PowerBudget {
            total: 1.0,
            split_ratio: 0.9,
            radar_ratio: 0.3,
        },
        noise: NoiseModel::uniform(1, 1e-3, 1e-4),
        weights: vec![1.0],
        target_angle: 0.5,
        d_over_lambda: 0.5,
    };
    let steering = steering_vector(scenario.target_angle, &subset, scenario.d_over_lambda);
    let ris = RisState::new(crandn_vec(n_ris, rng) * c(0.5, 0.0));
    let constraints = TransmitConstraints::new(&scenario, &steering, &channels.g, &ris);
    let eff = EffectiveChannels::new(&channels, &ris).unwrap();
    let amp = (scenario.budget.bs_power() / 2.0).sqrt();
    let beam = |th1: f64, th2: f64| TransmitBeamformer::new(CMat::from_column_slice(2, 1, &[cis(th1) * amp, cis(th2) * amp]));

    let (n1, n2) = (3600, 60);
    let mut best = f64::NEG_INFINITY;
    let mut start = None;
    for i in 0..n1 {
        for j in 0..n2 {
            let th1 = 2.0 * std::f64::consts::PI * i as f64 / n1 as f64;
            let th2 = 2.0 * std::f64::consts::PI * j as f64 / n2 as f64;
            let t = beam(th1, th2);
            if !constraints.check(&t).feasible {
                continue;
            }
            let w = wsr_effective(&t, &eff, &scenario.noise, &scenario.weights);
            if start.is_none() {
                start = Some(t);
            }
            best = best.max(w);
        }
    }
    let mut t = start?;
    let mut wsr = wsr_effective(&t, &eff, &scenario.noise, &scenario.weights);
    for _ in 0..30 {
        let up = update_transmit_beamformer(&t, &channels, &ris, &scenario, &steering, &TransmitSettings::default()).unwrap();
        let done = (up.wsr - wsr).abs() <= 1e-12 * wsr.abs().max(1.0);
        t = up.t;
        wsr = up.wsr;
        if done {
            break;
        }
    }
    Some(GridCase {
        update_wsr: wsr,
        grid_wsr: best,
        update_feasible: constraints.check(&t).feasible,
    })
}
