//! Reference implementations shared by the integration tests.
#![allow(dead_code)]

pub mod qcqp_ref;
pub mod sdp_ref;

use statrs::distribution::{Binomial, DiscreteCDF};

/// One-sided exact sign test: p-value of at least `wins` successes among the
/// untied pairs under a fair coin.
pub fn sign_test_p(wins: u64, untied: u64) -> f64 {
    if wins == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, untied).expect("valid binomial");
    1.0 - b.cdf(wins - 1)
}
