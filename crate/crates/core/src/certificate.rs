//! A-priori execution certificate: exact iteration count, flop budget, and
//! wall-time estimate, all computable from problem dimensions alone.
//!
//! The interior-point solver in [`crate::boxqp`] runs a fixed number of
//! iterations N that depends only on the number of box variables n and the
//! duality-gap tolerance ε — never on the problem data. That makes the
//! complete arithmetic cost of a solve a closed-form integer, which this
//! module evaluates. Dividing by a sustained flop rate turns the budget into
//! a worst-case-exact execution-time estimate, which is the property a
//! real-time MPC deployment certifies against.
//!
//! The per-stage polynomials here are the same numbers the
//! [`FlopCounter`](crate::flops::FlopCounter) measures when the pipeline
//! runs; the test suite asserts that agreement exactly.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Exact iteration count for n box variables at duality-gap tolerance ε:
///
/// N = ceil( log(2n/ε) / (−2·log(√(2n)/(√(2n)+√2−1))) ) + 1
///
/// Requires n ≥ 1 and 0 < ε < 2n. Values within 1e-12 of an integer are
/// treated as that integer before the ceiling is applied, so a result that
/// is mathematically integral cannot be pushed up a step by floating-point
/// dust.
pub fn iteration_count(n: usize, epsilon: f64) -> Result<u64> {
    if n == 0 {
        return Err(Error::InvalidConfig {
            message: "iteration count requires at least one box variable".into(),
        });
    }
    let two_n = 2.0 * n as f64;
    if !(epsilon > 0.0 && epsilon < two_n) {
        return Err(Error::InvalidTolerance {
            epsilon,
            limit: two_n,
        });
    }
    let root = two_n.sqrt();
    let shrink = root / (root + std::f64::consts::SQRT_2 - 1.0);
    let raw = (two_n / epsilon).ln() / (-2.0 * shrink.ln());
    let nearest = raw.round();
    let ceiled = if (raw - nearest).abs() <= 1e-12 {
        nearest
    } else {
        raw.ceil()
    };
    Ok(ceiled as u64 + 1)
}

/// Flops to factorize the m-by-m stage-cost matrix Q:
/// m³/3 + m²/2 + m/6, exactly m(m+1)(2m+1)/6.
pub fn factorization_flops(m: usize) -> u64 {
    let m = m as u64;
    m * (m + 1) * (2 * m + 1) / 6
}

/// Flops to assemble the box-QP quadratic term
/// H = diag(ρ)·G·Q⁻¹·Gᵀ·diag(ρ): nm² + nm + 2mn².
///
/// Itemized: row-scaling G by ρ (nm), one forward substitution per scaled
/// column against the Q factor (nm²), then the symmetric product of the
/// resulting m-by-n block with itself (2mn²).
pub fn hessian_build_flops(m: usize, n: usize) -> u64 {
    let (m, n) = (m as u64, n as u64);
    n * m * m + n * m + 2 * m * n * n
}

/// Flops to assemble the box-QP linear term h = H(e + 2r/ρ) with
/// r = G·Q⁻¹·(Fx) + g + (Sx): 2m² + 2mn + 4n + 2n².
///
/// The products F·x and S·x are problem inputs and are not charged here.
pub fn gradient_build_flops(m: usize, n: usize) -> u64 {
    let (m, n) = (m as u64, n as u64);
    2 * m * m + 2 * m * n + 4 * n + 2 * n * n
}

/// Flops for the zero test on h (one scan of n entries).
pub fn norm_scan_flops(n: usize) -> u64 {
    n as u64
}

/// Flops for the interior-point initialization: 5n + 3.
pub fn init_flops(n: usize) -> u64 {
    5 * n as u64 + 3
}

/// Flops for one interior-point iteration:
/// 1 + (n³/3 + n²/2 + n/6) + 2n² + 15n.
///
/// One path-parameter update, one Cholesky factorization of the n-by-n
/// Newton system, one forward and one backward substitution, and the
/// per-variable vector arithmetic (10n direction extraction + 5n state
/// update).
pub fn iteration_flops(n: usize) -> u64 {
    let nn = n as u64;
    1 + factorization_flops(n) + 2 * nn * nn + 15 * nn
}

/// Flops to recover the original-variable solution from the box-QP
/// solution: 2n + 2mn + 2m + 2m².
pub fn recovery_flops(m: usize, n: usize) -> u64 {
    let (m, n) = (m as u64, n as u64);
    2 * n + 2 * m * n + 2 * m + 2 * m * m
}

/// Wall-clock estimate in seconds for a flop total at a sustained rate.
pub fn time_estimate(flops: u64, flops_per_second: f64) -> f64 {
    flops as f64 / flops_per_second
}

/// A-priori execution certificate for one solve.
///
/// `offline_flops` is the one-time cost that a time-invariant deployment
/// amortizes (Q factorization and H assembly); `online_flops` is the cost
/// paid every control step. Without caching, everything is online. The flop
/// fields are absent when the certificate was issued from the variable
/// count alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Number of box variables (soft-constrained rows after condensing).
    pub n: usize,
    /// Number of original decision variables; absent for an
    /// iteration-count-only certificate.
    pub m: Option<usize>,
    /// Duality-gap tolerance the iteration count certifies.
    pub epsilon: f64,
    /// Exact, data-independent iteration count.
    pub iterations: u64,
    /// One-time flops (zero when nothing is cached offline).
    pub offline_flops: Option<u64>,
    /// Flops per control step.
    pub online_flops: Option<u64>,
    /// Assumed sustained flop rate, if one was supplied.
    pub flops_per_sec: Option<f64>,
    /// online_flops / flops_per_sec, if a rate was supplied.
    pub est_seconds: Option<f64>,
}

impl Certificate {
    /// Attach a sustained flop rate and derive the per-step time estimate.
    pub fn with_rate(mut self, flops_per_second: f64) -> Self {
        self.flops_per_sec = Some(flops_per_second);
        self.est_seconds = self
            .online_flops
            .map(|f| time_estimate(f, flops_per_second));
        self
    }

    /// Key-value text block, one field per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("n: {}\n", self.n));
        if let Some(m) = self.m {
            out.push_str(&format!("m: {m}\n"));
        }
        out.push_str(&format!("epsilon: {:e}\n", self.epsilon));
        out.push_str(&format!("iterations: {}\n", self.iterations));
        if let Some(f) = self.offline_flops {
            out.push_str(&format!("offline_flops: {f}\n"));
        }
        if let Some(f) = self.online_flops {
            out.push_str(&format!("online_flops: {f}\n"));
        }
        if let Some(r) = self.flops_per_sec {
            out.push_str(&format!("flops_per_sec: {r:e}\n"));
        }
        if let Some(t) = self.est_seconds {
            out.push_str(&format!("est_seconds: {t}\n"));
        }
        out
    }

    /// Pretty-printed JSON object.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

/// Certificate from the box-variable count alone (no flop budget).
pub fn iteration_certificate(n: usize, epsilon: f64) -> Result<Certificate> {
    Ok(Certificate {
        n,
        m: None,
        epsilon,
        iterations: iteration_count(n, epsilon)?,
        offline_flops: None,
        online_flops: None,
        flops_per_sec: None,
        est_seconds: None,
    })
}

/// Full flop budget for an m-variable problem with n box variables at
/// tolerance ε.
///
/// With `lti_cached` set, the Q factorization and H assembly count as
/// offline (their cost is paid once for time-invariant problem data);
/// otherwise everything is online and offline is zero.
pub fn flop_budget(m: usize, n: usize, epsilon: f64, lti_cached: bool) -> Result<Certificate> {
    let iterations = iteration_count(n, epsilon)?;
    let setup = factorization_flops(m) + hessian_build_flops(m, n);
    let recurring = gradient_build_flops(m, n)
        + norm_scan_flops(n)
        + init_flops(n)
        + iterations * iteration_flops(n)
        + recovery_flops(m, n);
    let (offline, online) = if lti_cached {
        (setup, recurring)
    } else {
        (0, setup + recurring)
    };
    Ok(Certificate {
        n,
        m: Some(m),
        epsilon,
        iterations,
        offline_flops: Some(offline),
        online_flops: Some(online),
        flops_per_sec: None,
        est_seconds: None,
    })
}
