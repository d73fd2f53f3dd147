//! Integer flop accounting.
//!
//! One flop is one floating multiply, add, subtract, or divide; square
//! roots also count one flop each. Kernels in [`crate::linalg`] tally their
//! counts from actual loop trip counts, so the totals are measurements, not
//! estimates: a Cholesky factorization of an m-by-m matrix lands on exactly
//! m(m+1)(2m+1)/6 = m^3/3 + m^2/2 + m/6 because that is how many operations
//! its loops perform.
//!
//! Two pipeline phases are charged at a documented model rate instead of
//! per-op (the interior-point initialization at 5n+3 and the per-iteration
//! vector arithmetic at 15n+1); see [`crate::boxqp`] for the itemization.
//! Everything the counter reports feeds the a-priori budget check in
//! [`crate::certificate`], so the charged amounts and the budget polynomials
//! must agree — that agreement is asserted by the test suite.

/// Kernel-level label for a flop contribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Cholesky factorizations.
    Factorize,
    /// Forward/backward triangular substitutions.
    Substitute,
    /// Matrix-matrix, matrix-vector, and dot products.
    Multiply,
    /// Elementwise vector arithmetic and scalar updates.
    Vector,
}

const PHASE_COUNT: usize = 4;

/// Monotone flop tally with per-phase subtotals.
///
/// A counter is monotone within one solve; call [`FlopCounter::reset`] only
/// between solves.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlopCounter {
    total: u64,
    per_phase: [u64; PHASE_COUNT],
}

impl FlopCounter {
    /// Fresh counter at zero.
    pub fn new() -> Self {
        Self::default()
    }

    /// Record `count` flops under `phase`.
    pub fn add(&mut self, phase: Phase, count: u64) {
        self.total += count;
        self.per_phase[phase as usize] += count;
    }

    /// Total flops recorded so far.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Flops recorded under one phase.
    pub fn phase(&self, phase: Phase) -> u64 {
        self.per_phase[phase as usize]
    }

    /// Zero the counter. Only meaningful between solves.
    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Per-stage flop totals for one soft-constrained solve, keyed by pipeline
/// stage. Stages correspond to the budget polynomials in
/// [`crate::certificate`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlopBreakdown {
    /// Cholesky factorization of the stage-cost matrix Q.
    pub factorize_q: u64,
    /// Assembly of the box-QP quadratic term H = diag(rho) G Q^-1 G^T diag(rho).
    pub build_hessian: u64,
    /// Assembly of the box-QP linear term h.
    pub build_gradient: u64,
    /// Zero test on the linear term (infinity-norm scan).
    pub norm_scan: u64,
    /// Interior-point initialization.
    pub init: u64,
    /// All interior-point iterations.
    pub iterate: u64,
    /// Recovery of the original-variable solution from z.
    pub recover: u64,
}

impl FlopBreakdown {
    /// Sum over every stage.
    pub fn total(&self) -> u64 {
        self.factorize_q
            + self.build_hessian
            + self.build_gradient
            + self.norm_scan
            + self.init
            + self.iterate
            + self.recover
    }

    /// Flops that recur every control step. With `cached` set, the Q
    /// factorization and H assembly are amortized offline (time-invariant
    /// problem data) and excluded.
    pub fn online_total(&self, cached: bool) -> u64 {
        let recurring = self.build_gradient + self.norm_scan + self.init + self.iterate + self.recover;
        if cached {
            recurring
        } else {
            recurring + self.factorize_q + self.build_hessian
        }
    }
}
