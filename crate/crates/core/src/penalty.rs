//! ℓ1 penalty transform: inequality-constrained QP → box QP and back.
//!
//! The front half of the pipeline. A general QP
//!
//! ```text
//! min ½·yᵀQy + yᵀFx   subject to   Gy ≤ g + Sx
//! ```
//!
//! is softened by replacing the constraints with an exact ℓ1 penalty
//! Σᵢ ρᵢ·max(0, (Gy − g − Sx)ᵢ). The penalized problem is always feasible,
//! and whenever every ρᵢ strictly exceeds the largest multiplier of the
//! hard problem, its minimizer is exactly the hard minimizer — softening
//! loses nothing on feasible instances while degrading gracefully on
//! infeasible ones.
//!
//! The penalized dual is the box QP ½ẑᵀMẑ + ẑᵀr over 0 ≤ ẑ ≤ ρ; the
//! affine change of variables z = 2ẑ/ρ − e maps it onto the unit box,
//! producing the [`BoxQp`](crate::boxqp::BoxQp) instance
//!
//! ```text
//! H = diag(ρ)·M·diag(ρ),   M = G·Q⁻¹·Gᵀ,
//! h = diag(ρ)·(M·ρ + 2r),  r = G·Q⁻¹·(Fx) + g + Sx,
//! ```
//!
//! solved by [`crate::boxqp`], after which the original variables come back
//! as ẑ = ρ·(z + e)/2 and y = −Q⁻¹(Fx + Gᵀẑ). Q is touched only through
//! its cached Cholesky factor — never inverted explicitly.
//!
//! F·x and S·x are treated as problem inputs (in a control loop they arrive
//! with the measured state) and are not flop-charged; every other stage's
//! count lands exactly on its budget polynomial in [`crate::certificate`].

use crate::boxqp::{self, BoxQp, SolverParams};
use crate::error::{Error, Result};
use crate::flops::{FlopBreakdown, FlopCounter, Phase};
use crate::linalg::{
    cholesky, forward_solve_in_place, matvec, solve_spd_in_place, DenseMatrix, LowerFactor,
};

/// Whether a constraint row is a hard requirement (input bounds) or a
/// soft preference (state corridor). The classification is advisory — the
/// transform treats every row the same — but it drives penalty-weight
/// checks and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Hard,
    Soft,
}

/// One inequality-constrained QP at a fixed parameter vector x:
/// min ½·yᵀQy + yᵀFx subject to Gy ≤ g + Sx.
#[derive(Debug, Clone, PartialEq)]
pub struct QpInstance {
    /// Positive definite cost matrix Q (m × m).
    pub q: DenseMatrix,
    /// Parameter-to-cost coupling F (m × n_x).
    pub f: DenseMatrix,
    /// Constraint matrix G (n × m).
    pub g: DenseMatrix,
    /// Constant constraint offset g (length n).
    pub b: Vec<f64>,
    /// Parameter-to-bound coupling S (n × n_x).
    pub s: DenseMatrix,
    /// Current parameter (state) vector x (length n_x).
    pub x: Vec<f64>,
}

impl QpInstance {
    /// Validate dimensions and finiteness.
    pub fn new(
        q: DenseMatrix,
        f: DenseMatrix,
        g: DenseMatrix,
        b: Vec<f64>,
        s: DenseMatrix,
        x: Vec<f64>,
    ) -> Result<Self> {
        let m = q.rows();
        let n = g.rows();
        let n_x = x.len();
        if q.cols() != m {
            return Err(Error::DimensionMismatch {
                context: "Q must be square",
                expected: m,
                got: q.cols(),
            });
        }
        if !q.is_symmetric(1e-10) {
            return Err(Error::InvalidConfig {
                message: "Q must be symmetric".into(),
            });
        }
        if f.rows() != m || f.cols() != n_x {
            return Err(Error::DimensionMismatch {
                context: "F must be m x n_x",
                expected: m * n_x,
                got: f.rows() * f.cols(),
            });
        }
        if g.cols() != m {
            return Err(Error::DimensionMismatch {
                context: "G must have m columns",
                expected: m,
                got: g.cols(),
            });
        }
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                context: "g must have one entry per constraint row",
                expected: n,
                got: b.len(),
            });
        }
        if s.rows() != n || s.cols() != n_x {
            return Err(Error::DimensionMismatch {
                context: "S must be n x n_x",
                expected: n * n_x,
                got: s.rows() * s.cols(),
            });
        }
        for (matrix, context) in [
            (&q, "Q"),
            (&f, "F"),
            (&g, "G"),
            (&s, "S"),
        ] {
            if !matrix.all_finite() {
                return Err(Error::NonFiniteData { context });
            }
        }
        if !b.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteData { context: "g" });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteData { context: "x" });
        }
        Ok(Self { q, f, g, b, s, x })
    }

    /// Number of decision variables.
    pub fn m(&self) -> usize {
        self.q.rows()
    }

    /// Number of constraint rows.
    pub fn n(&self) -> usize {
        self.g.rows()
    }

    /// Parameter (state) dimension.
    pub fn state_dim(&self) -> usize {
        self.x.len()
    }

    /// F·x and S·x, computed without flop charge: the pipeline treats them
    /// as inputs delivered alongside the state.
    fn input_products(&self) -> (Vec<f64>, Vec<f64>) {
        let fx = raw_matvec(&self.f, &self.x);
        let sx = raw_matvec(&self.s, &self.x);
        (fx, sx)
    }
}

/// Matrix-vector product with no counter — reserved for the uncharged
/// input products and diagnostics.
fn raw_matvec(a: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.rows()];
    for (i, yi) in y.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, &v) in a.row(i).iter().enumerate() {
            acc += v * x[k];
        }
        *yi = acc;
    }
    y
}

/// Per-row penalty weights with their hard/soft classification and the
/// precomputed ρ/2 and 2ρ vectors the online phases multiply by. ρ is
/// configuration, so those scalings are priced offline.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyVector {
    rho: Vec<f64>,
    kinds: Vec<ConstraintKind>,
    half_rho: Vec<f64>,
    two_rho: Vec<f64>,
}

impl PenaltyVector {
    /// Validate and precompute. Every weight must be finite and strictly
    /// positive; one kind per row.
    pub fn new(rho: Vec<f64>, kinds: Vec<ConstraintKind>) -> Result<Self> {
        if kinds.len() != rho.len() {
            return Err(Error::DimensionMismatch {
                context: "penalty kinds",
                expected: rho.len(),
                got: kinds.len(),
            });
        }
        for (i, &value) in rho.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidPenalty { index: i, value });
            }
        }
        let half_rho = rho.iter().map(|v| v / 2.0).collect();
        let two_rho = rho.iter().map(|v| 2.0 * v).collect();
        Ok(Self {
            rho,
            kinds,
            half_rho,
            two_rho,
        })
    }

    /// Same weight on every row.
    pub fn uniform(value: f64, kinds: Vec<ConstraintKind>) -> Result<Self> {
        let rho = vec![value; kinds.len()];
        Self::new(rho, kinds)
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    /// True when there are no rows.
    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// The weights ρ.
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// The per-row classifications.
    pub fn kinds(&self) -> &[ConstraintKind] {
        &self.kinds
    }

    /// Advisory checks that do not fail construction. Currently one: every
    /// hard row should carry at least as much penalty as any soft row,
    /// otherwise the solver may trade a hard violation for a soft one.
    pub fn advisory_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        let min_hard = self
            .rho
            .iter()
            .zip(&self.kinds)
            .filter(|(_, k)| **k == ConstraintKind::Hard)
            .map(|(v, _)| *v)
            .fold(f64::INFINITY, f64::min);
        let max_soft = self
            .rho
            .iter()
            .zip(&self.kinds)
            .filter(|(_, k)| **k == ConstraintKind::Soft)
            .map(|(v, _)| *v)
            .fold(0.0f64, f64::max);
        if min_hard < max_soft {
            warnings.push(format!(
                "hard-constraint penalty {min_hard} is below a soft-constraint penalty {max_soft}; \
                 hard rows may be traded away"
            ));
        }
        warnings
    }
}

/// Time-invariant precomputation: the Cholesky factor of Q, the box-QP
/// quadratic term H, and the unpenalized kernel M = G·Q⁻¹·Gᵀ (which the
/// per-step linear term is built from). In a control loop this is built
/// once; each step then only pays the state-dependent phases.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformCache {
    q_factor: LowerFactor,
    hessian: DenseMatrix,
    m_matrix: DenseMatrix,
    factorize_flops: u64,
    hessian_flops: u64,
}

impl TransformCache {
    /// The cached Cholesky factor of Q.
    pub fn q_factor(&self) -> &LowerFactor {
        &self.q_factor
    }

    /// The box-QP quadratic term H = diag(ρ)·M·diag(ρ).
    pub fn hessian(&self) -> &DenseMatrix {
        &self.hessian
    }

    /// The penalty-free kernel M = G·Q⁻¹·Gᵀ.
    pub fn m_matrix(&self) -> &DenseMatrix {
        &self.m_matrix
    }

    /// Flops recorded for the factorization / H assembly.
    pub fn recorded_flops(&self) -> (u64, u64) {
        (self.factorize_flops, self.hessian_flops)
    }
}

/// Factor Q and assemble H. Costs exactly m³/3 + m²/2 + m/6 for the
/// factorization plus nm² + nm + 2mn² for H: the rows of G are scaled by ρ
/// (nm), each scaled row is pushed through one forward substitution (nm²),
/// and H is the full symmetric product of the results (2mn², accumulating
/// each dot from zero). Fails with [`Error::NotPositiveDefinite`] when Q
/// is not.
pub fn precompute(
    qp: &QpInstance,
    rho: &PenaltyVector,
    counter: &mut FlopCounter,
) -> Result<TransformCache> {
    check_rho_len(qp, rho)?;
    let m = qp.m();
    let n = qp.n();
    let before = counter.total();
    let q_factor = cholesky(&qp.q, counter)?;
    let factorize_flops = counter.total() - before;

    let before = counter.total();
    // Rows of G scaled by the penalty, each solved against L in place.
    // scaled.row(i) ends up holding L⁻¹·(ρᵢ·Gᵢ)ᵀ.
    let mut scaled = DenseMatrix::zeros(n, m);
    for i in 0..n {
        let w = rho.rho[i];
        for j in 0..m {
            scaled.set(i, j, w * qp.g.get(i, j));
        }
    }
    counter.add(Phase::Multiply, (n * m) as u64);
    let mut row_buf = vec![0.0; m];
    for i in 0..n {
        row_buf.copy_from_slice(scaled.row(i));
        forward_solve_in_place(&q_factor, &mut row_buf, counter)?;
        for j in 0..m {
            scaled.set(i, j, row_buf[j]);
        }
    }
    // H(i, j) is the dot of solved rows i and j, accumulated from zero
    // (2m flops per entry). Identical summation order for (i, j) and
    // (j, i) makes H symmetric bit-for-bit.
    let mut hessian = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..m {
                acc += scaled.get(i, k) * scaled.get(j, k);
            }
            hessian.set(i, j, acc);
        }
    }
    counter.add(Phase::Multiply, (2 * m * n * n) as u64);
    let hessian_flops = counter.total() - before;

    // Recover the penalty-free kernel by dividing the weights back out —
    // cache bookkeeping (a deployment stores both forms), not pipeline
    // flops.
    let mut m_matrix = hessian.clone();
    for i in 0..n {
        for j in 0..n {
            m_matrix.set(i, j, m_matrix.get(i, j) / (rho.rho[i] * rho.rho[j]));
        }
    }

    Ok(TransformCache {
        q_factor,
        hessian,
        m_matrix,
        factorize_flops,
        hessian_flops,
    })
}

/// The state-dependent half of the transform: the box-QP instance at the
/// current x, plus the constraint residual r = G·Q⁻¹·(Fx) + g + Sx.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxQpBuild {
    /// The assembled unit-box QP.
    pub boxqp: BoxQp,
    /// The residual r; its sign pattern says which rows press against the
    /// unconstrained minimizer.
    pub residual: Vec<f64>,
}

/// Assemble the box-QP linear term h = diag(ρ)·(M·ρ + 2r) at the
/// instance's x. Costs exactly 2m² + 2mn + 4n + 2n²: one solve against
/// the cached factor (2m²), the product with G (2mn), the residual
/// assembly (2n), the kernel product M·ρ (2n² − n), and the fused finish
/// hᵢ = ρᵢ·(Mρ)ᵢ + (2ρᵢ)·rᵢ (3n).
pub fn build_boxqp(
    qp: &QpInstance,
    rho: &PenaltyVector,
    cache: &TransformCache,
    counter: &mut FlopCounter,
) -> Result<BoxQpBuild> {
    check_rho_len(qp, rho)?;
    let m = qp.m();
    let n = qp.n();
    let (fx, sx) = qp.input_products();

    let mut t = fx;
    solve_spd_in_place(&cache.q_factor, &mut t, counter)?; // 2m²
    // G·(Q⁻¹Fx), each row accumulated from zero: 2m flops per row.
    let mut residual = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for k in 0..m {
            acc += qp.g.get(i, k) * t[k];
        }
        residual[i] = acc;
    }
    counter.add(Phase::Multiply, (2 * m * n) as u64);
    // r = G·Q⁻¹·Fx + g + Sx: two adds per row.
    for i in 0..n {
        residual[i] = residual[i] + qp.b[i] + sx[i];
    }
    counter.add(Phase::Vector, (2 * n) as u64);
    // h = diag(ρ)·(M·ρ + 2r), with the doubled penalties precomputed.
    let m_rho = matvec(&cache.m_matrix, rho.rho(), counter)?;
    let mut h = vec![0.0; n];
    for i in 0..n {
        h[i] = rho.rho[i] * m_rho[i] + rho.two_rho[i] * residual[i];
    }
    counter.add(Phase::Vector, (3 * n) as u64);

    Ok(BoxQpBuild {
        boxqp: BoxQp::new(cache.hessian.clone(), h)?,
        residual,
    })
}

/// The original-variable solution recovered from a box-QP solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovered {
    /// Decision variables y = −Q⁻¹(Fx + Gᵀẑ).
    pub y: Vec<f64>,
    /// Penalty multipliers ẑ = ρ∘(z + e)/2, inside [0, ρ].
    pub multipliers: Vec<f64>,
    /// Constraint violations w = max(0, Gy − g − Sx); zero wherever the
    /// recovered point satisfies the row.
    pub violations: Vec<f64>,
}

/// Map the box solution back: ẑ = (ρ/2)∘(z + e), y = −Q⁻¹(Fx + Gᵀẑ).
/// Costs exactly 2n + 2mn + 2m + 2m² (multiplier map, Gᵀẑ accumulated
/// from zero, add Fx and negate, one solve-pair). The violation vector is
/// diagnostics and is not charged.
pub fn recover_solution(
    qp: &QpInstance,
    rho: &PenaltyVector,
    z: &[f64],
    cache: &TransformCache,
    counter: &mut FlopCounter,
) -> Result<Recovered> {
    check_rho_len(qp, rho)?;
    let m = qp.m();
    let n = qp.n();
    if z.len() != n {
        return Err(Error::DimensionMismatch {
            context: "recovery",
            expected: n,
            got: z.len(),
        });
    }
    let (fx, sx) = qp.input_products();

    let mut multipliers = vec![0.0; n];
    for i in 0..n {
        multipliers[i] = rho.half_rho[i] * (z[i] + 1.0);
    }
    counter.add(Phase::Vector, (2 * n) as u64);

    // Gᵀẑ, each entry accumulated from zero over the n rows of G.
    let mut t = vec![0.0; m];
    for j in 0..m {
        let mut acc = 0.0;
        for i in 0..n {
            acc += qp.g.get(i, j) * multipliers[i];
        }
        t[j] = acc;
    }
    counter.add(Phase::Multiply, (2 * m * n) as u64);

    for j in 0..m {
        t[j] += fx[j];
    }
    solve_spd_in_place(&cache.q_factor, &mut t, counter)?;
    let mut y = vec![0.0; m];
    for j in 0..m {
        y[j] = -t[j];
    }
    counter.add(Phase::Vector, (2 * m) as u64);

    // Diagnostics: how far the recovered point violates each row.
    let gy = raw_matvec(&qp.g, &y);
    let mut violations = vec![0.0; n];
    for i in 0..n {
        violations[i] = (gy[i] - qp.b[i] - sx[i]).max(0.0);
    }

    Ok(Recovered {
        y,
        multipliers,
        violations,
    })
}

/// Result of one soft-constrained solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftQpResult {
    /// Recovered decision variables.
    pub y: Vec<f64>,
    /// Box-QP solution the recovery came from.
    pub z: Vec<f64>,
    /// Penalty multipliers ẑ ∈ [0, ρ].
    pub multipliers: Vec<f64>,
    /// Per-row constraint violations at y (zero on satisfied rows).
    pub violations: Vec<f64>,
    /// Final duality gap of the scaled box problem.
    pub duality_gap: f64,
    /// Interior-point iterations executed.
    pub iterations: u64,
    /// Per-stage flop ledger for this solve.
    pub flops: FlopBreakdown,
}

/// One-shot soft-constrained solve: precompute, transform, solve, recover.
/// All stages count as online work.
pub fn solve_soft_qp(qp: &QpInstance, rho: &PenaltyVector, epsilon: f64) -> Result<SoftQpResult> {
    solve_soft_inner(qp, rho, epsilon, None)
}

/// Soft-constrained solve against an existing [`TransformCache`] (the
/// time-invariant deployment): the factorization and H assembly are not
/// re-run; their recorded offline cost is carried in the result's ledger.
pub fn solve_soft_qp_cached(
    qp: &QpInstance,
    rho: &PenaltyVector,
    epsilon: f64,
    cache: &TransformCache,
) -> Result<SoftQpResult> {
    solve_soft_inner(qp, rho, epsilon, Some(cache))
}

fn solve_soft_inner(
    qp: &QpInstance,
    rho: &PenaltyVector,
    epsilon: f64,
    cache: Option<&TransformCache>,
) -> Result<SoftQpResult> {
    check_rho_len(qp, rho)?;
    let mut counter = FlopCounter::new();
    let owned;
    let cache = match cache {
        Some(c) => c,
        None => {
            owned = precompute(qp, rho, &mut counter)?;
            &owned
        }
    };
    let (factorize_q, build_hessian) = cache.recorded_flops();

    let before = counter.total();
    let build = build_boxqp(qp, rho, cache, &mut counter)?;
    let build_gradient = counter.total() - before;

    let params = SolverParams::new(qp.n(), epsilon)?;
    let solved = boxqp::solve(&build.boxqp, &params)?;

    let before = counter.total();
    let recovered = recover_solution(qp, rho, &solved.z, cache, &mut counter)?;
    let recover = counter.total() - before;

    Ok(SoftQpResult {
        y: recovered.y,
        z: solved.z,
        multipliers: recovered.multipliers,
        violations: recovered.violations,
        duality_gap: solved.duality_gap,
        iterations: solved.iterations,
        flops: FlopBreakdown {
            factorize_q,
            build_hessian,
            build_gradient,
            norm_scan: solved.stage_flops.norm_scan,
            init: solved.stage_flops.init,
            iterate: solved.stage_flops.iterate,
            recover,
        },
    })
}

/// Indices of hard rows whose multiplier sits within 1% of its ceiling ρᵢ
/// — the signature of a penalty too small for exact recovery. An empty
/// result is the expected healthy state.
pub fn saturated_hard_rows(result: &SoftQpResult, rho: &PenaltyVector) -> Vec<usize> {
    result
        .multipliers
        .iter()
        .zip(rho.rho())
        .zip(rho.kinds())
        .enumerate()
        .filter(|(_, ((zhat, r), kind))| {
            **kind == ConstraintKind::Hard && **zhat >= 0.99 * **r
        })
        .map(|(i, _)| i)
        .collect()
}

fn check_rho_len(qp: &QpInstance, rho: &PenaltyVector) -> Result<()> {
    if rho.len() != qp.n() {
        return Err(Error::DimensionMismatch {
            context: "penalty vector",
            expected: qp.n(),
            got: rho.len(),
        });
    }
    Ok(())
}
