//! Accelerated projected-gradient reference for the RIS QCQP.

use aris_isac::linalg::{c, crandn_mat, crandn_vec, hermitize, CMat, CVec};
use aris_isac::ris_fp::QuadraticForm;
use nalgebra::{Cholesky, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_form(rng: &mut ChaCha8Rng) -> QuadraticForm {
    let n = rng.gen_range(1..=8);
    let rank = rng.gen_range(0..=n);
    let b = crandn_mat(n, rank.max(1), rng) * c(if rank == 0 { 0.0 } else { 1.0 }, 0.0);
    let u = hermitize(&(&b * b.adjoint()));
    let pi = if rng.gen_bool(0.5) {
        CMat::from_diagonal(&CVec::from_iterator(n, (0..n).map(|_| c(rng.gen_range(0.1..3.0), 0.0))))
    } else {
        let a = crandn_mat(n, n, rng);
        hermitize(&(&a * a.adjoint() + CMat::identity(n, n) * c(0.2, 0.0)))
    };
    let v = crandn_vec(n, rng) * c(rng.gen_range(0.1..3.0), 0.0);
    // spans cases where the unconstrained optimum is inside and far outside
    let budget = 10f64.powf(rng.gen_range(-2.0..2.0));
    QuadraticForm { v, u, pi, budget }
}

/// FISTA on `φ = Lᴴ ψ` with `Π = L Lᴴ`, where the feasible set is a ball.
pub fn projected_gradient(q: &QuadraticForm) -> CVec {
    let n = q.v.len();
    let l = Cholesky::new(q.pi.clone()).expect("Π is PD").l();
    let linv = l.clone().try_inverse().expect("L is invertible");
    let b = &linv * &q.v;
    let ut = hermitize(&(&linv * &q.u * linv.adjoint()));
    let lmax = SymmetricEigen::new(ut.clone()).eigenvalues.max().max(0.0);
    let step = 1.0 / (2.0 * lmax).max(1e-3);
    let radius = q.budget.sqrt();
    let project = |x: CVec| {
        let nx = x.norm();
        if nx > radius {
            x * c(radius / nx, 0.0)
        } else {
            x
        }
    };
    let obj = |x: &CVec| 2.0 * x.dotc(&b).re - x.dotc(&(&ut * x)).re;
    let mut x = CVec::zeros(n);
    let mut y = x.clone();
    let mut tk: f64 = 1.0;
    for _ in 0..60_000 {
        let grad = (&b - &ut * &y) * c(2.0, 0.0);
        let next = project(&y + grad * c(step, 0.0));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
        if obj(&next) < obj(&x) {
            // adaptive restart
            y = x.clone();
            tk = 1.0;
            continue;
        }
        y = &next + (&next - &x) * c((tk - 1.0) / t_next, 0.0);
        x = next;
        tk = t_next;
    }
    linv.adjoint() * x
}

