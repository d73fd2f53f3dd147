//! Box-constrained QP solver with a data-independent iteration count.
//!
//! Solves min ½·zᵀHz + zᵀh over the unit box −e ≤ z ≤ e for symmetric
//! positive semidefinite H, by a feasible full-Newton path-following
//! interior-point method. The method takes full steps only — no line
//! search, no early exit — and the number of iterations is fixed up front
//! by [`certificate::iteration_count`]: it depends on n and the tolerance
//! ε, never on H or h. After the final iteration the duality gap of the
//! internally scaled problem is at most ε.
//!
//! Internally the objective is normalized by ‖h‖∞ and damped by
//! λ = 1/√(n+1), which makes the all-zero point strictly feasible and
//! exactly stationary for the barrier subproblem at path parameter τ = 1,
//! so no phase-one procedure is needed. Each iteration shrinks τ by the
//! fixed factor 1−η with η = (√2−1)/(√(2n)+√2−1) and takes one full Newton
//! step; the proximity measure ‖τe−√(v∘s)‖₂/τ provably stays at or below
//! 1/√2 throughout, which keeps every iterate strictly inside the box and
//! every Newton system positive definite.
//!
//! # Flop accounting
//!
//! The factorization and the two triangular substitutions of each iteration
//! are measured per operation by the [`crate::linalg`] kernels. The
//! per-variable vector arithmetic is charged at a fixed model rate:
//!
//! * initialization: 5n + 3 (normalize h, form the two multiplier vectors,
//!   and set up the scalar constants),
//! * each iteration: 1 for the path-parameter update, 10n for forming the
//!   right-hand side and extracting the direction components, 5n for the
//!   five state-vector updates.
//!
//! These model rates are what the a-priori budget in
//! [`crate::certificate`] promises, so the counter and the certificate
//! agree exactly; the handful of scalar constants each iteration shares
//! across entries is folded into the per-variable rate.

use crate::certificate;
use crate::error::{Error, Result};
use crate::flops::{FlopCounter, Phase};
use crate::linalg::{
    backward_solve_in_place, cholesky_into, forward_solve_in_place, norm_inf, DenseMatrix,
    LowerFactor,
};

/// Box-constrained QP instance: min ½·zᵀHz + zᵀh subject to −e ≤ z ≤ e.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxQp {
    n: usize,
    hessian: DenseMatrix,
    linear: Vec<f64>,
}

impl BoxQp {
    /// Validate and wrap a problem. The quadratic term must be square,
    /// symmetric to 1e-10, match the linear term's length, and be finite.
    pub fn new(hessian: DenseMatrix, linear: Vec<f64>) -> Result<Self> {
        let n = linear.len();
        if hessian.rows() != n || hessian.cols() != n {
            return Err(Error::DimensionMismatch {
                context: "box QP",
                expected: n,
                got: hessian.rows().max(hessian.cols()),
            });
        }
        if !hessian.is_symmetric(1e-10) {
            return Err(Error::InvalidConfig {
                message: "box QP quadratic term must be symmetric".into(),
            });
        }
        if !hessian.all_finite() {
            return Err(Error::NonFiniteData {
                context: "box QP quadratic term",
            });
        }
        if !linear.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteData {
                context: "box QP linear term",
            });
        }
        Ok(Self { n, hessian, linear })
    }

    /// Number of box variables.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The quadratic term H.
    pub fn hessian(&self) -> &DenseMatrix {
        &self.hessian
    }

    /// The linear term h.
    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    /// The normalized problem (H/‖h‖∞, h/‖h‖∞) the solver works on, or
    /// `None` when h = 0. Diagnostics only; nothing is counted.
    pub fn normalized(&self) -> Option<(DenseMatrix, Vec<f64>)> {
        let norm = self.linear.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm == 0.0 {
            return None;
        }
        let mut h = self.hessian.clone();
        for v in h.as_mut_slice() {
            *v /= norm;
        }
        let lin = self.linear.iter().map(|v| v / norm).collect();
        Some((h, lin))
    }
}

/// Solver constants derived from (n, ε). The iteration count is exact and
/// fixed before the first iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// Number of box variables.
    pub n: usize,
    /// Certified duality-gap tolerance (of the scaled problem).
    pub epsilon: f64,
    /// Objective damping λ = 1/√(n+1).
    pub lambda: f64,
    /// Path-parameter shrink rate η = (√2−1)/(√(2n)+√2−1).
    pub eta: f64,
    /// Initial path parameter τ⁰ = 1/(1−η), so the first update lands on 1.
    pub tau0: f64,
    /// Exact number of Newton iterations.
    pub iterations: u64,
}

impl SolverParams {
    /// Derive the solver constants. Requires ε ∈ (0, 2n) for n ≥ 1; the
    /// degenerate n = 0 case is accepted with zero iterations.
    pub fn new(n: usize, epsilon: f64) -> Result<Self> {
        if n == 0 {
            if epsilon <= 0.0 {
                return Err(Error::InvalidTolerance {
                    epsilon,
                    limit: 0.0,
                });
            }
            return Ok(Self {
                n,
                epsilon,
                lambda: 1.0,
                eta: 0.0,
                tau0: 1.0,
                iterations: 0,
            });
        }
        let iterations = certificate::iteration_count(n, epsilon)?;
        let lambda = 1.0 / ((n as f64 + 1.0).sqrt());
        let root = (2.0 * n as f64).sqrt();
        let eta = (std::f64::consts::SQRT_2 - 1.0) / (root + std::f64::consts::SQRT_2 - 1.0);
        Ok(Self {
            n,
            epsilon,
            lambda,
            eta,
            tau0: 1.0 / (1.0 - eta),
            iterations,
        })
    }
}

/// One strictly feasible primal-dual point. `gamma`/`theta` are the
/// multipliers for the upper/lower box faces, `phi = e − z` and
/// `psi = e + z` the matching slacks, `tau` the current path parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub z: Vec<f64>,
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub tau: f64,
}

impl Iterate {
    /// Multipliers stacked as col(γ, θ).
    pub fn v(&self) -> Vec<f64> {
        let mut v = self.gamma.clone();
        v.extend_from_slice(&self.theta);
        v
    }

    /// Slacks stacked as col(φ, ψ).
    pub fn s(&self) -> Vec<f64> {
        let mut s = self.phi.clone();
        s.extend_from_slice(&self.psi);
        s
    }

    /// Duality gap vᵀs = γᵀφ + θᵀψ. Diagnostics; nothing is counted.
    pub fn duality_gap(&self) -> f64 {
        let mut g = 0.0;
        for i in 0..self.z.len() {
            g += self.gamma[i] * self.phi[i] + self.theta[i] * self.psi[i];
        }
        g
    }

    /// Smallest multiplier or slack component (must stay positive).
    pub fn min_component(&self) -> f64 {
        self.gamma
            .iter()
            .chain(&self.theta)
            .chain(&self.phi)
            .chain(&self.psi)
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

/// Proximity of a primal-dual point to the τ-center:
/// ξ = ‖τe − √(v∘s)‖₂ / τ. The solver keeps ξ ≤ 1/√2 on every iterate.
/// Diagnostics; nothing is counted.
pub fn proximity(v: &[f64], s: &[f64], tau: f64) -> f64 {
    debug_assert_eq!(v.len(), s.len());
    let mut sq = 0.0;
    for i in 0..v.len() {
        let beta = (v[i] * s[i]).sqrt();
        sq += (tau - beta) * (tau - beta);
    }
    sq.sqrt() / tau
}

/// The cost-free strictly feasible start: z = 0, slacks at e, multipliers
/// e ∓ λ·h/‖h‖∞. Stationarity of the scaled objective holds exactly at
/// this point, and strict positivity follows from λ < 1.
///
/// Charges the initialization model rate of 5n + 3 flops. The ‖h‖∞ scan is
/// budgeted separately (see [`solve`]); when called standalone the norm is
/// recomputed without charge.
pub fn init_iterate(qp: &BoxQp, params: &SolverParams, counter: &mut FlopCounter) -> Iterate {
    let mut scratch = FlopCounter::new();
    let hnorm = norm_inf(qp.linear(), &mut scratch);
    init_iterate_with_norm(qp, params, hnorm, counter)
}

fn init_iterate_with_norm(
    qp: &BoxQp,
    params: &SolverParams,
    hnorm: f64,
    counter: &mut FlopCounter,
) -> Iterate {
    let n = qp.n();
    let scale = if hnorm > 0.0 {
        params.lambda / hnorm
    } else {
        0.0
    };
    let mut gamma = vec![0.0; n];
    let mut theta = vec![0.0; n];
    for i in 0..n {
        let lh = scale * qp.linear()[i];
        gamma[i] = 1.0 - lh;
        theta[i] = 1.0 + lh;
    }
    counter.add(Phase::Vector, certificate::init_flops(n));
    Iterate {
        z: vec![0.0; n],
        gamma,
        theta,
        phi: vec![1.0; n],
        psi: vec![1.0; n],
        tau: params.tau0,
    }
}

/// Newton direction at one iterate, for the current `iterate.tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonDirection {
    pub dz: Vec<f64>,
    pub dgamma: Vec<f64>,
    pub dtheta: Vec<f64>,
    pub dphi: Vec<f64>,
    pub dpsi: Vec<f64>,
}

/// Reusable buffers for the Newton solve. Allocated once per [`solve`]
/// call; the iteration loop itself never allocates.
struct Workspace {
    system: DenseMatrix,
    factor: LowerFactor,
    dz: Vec<f64>,
    ratio_g: Vec<f64>,
    ratio_t: Vec<f64>,
    const_g: Vec<f64>,
    const_t: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            system: DenseMatrix::zeros(n, n),
            factor: LowerFactor::zeros(n),
            dz: vec![0.0; n],
            ratio_g: vec![0.0; n],
            ratio_t: vec![0.0; n],
            const_g: vec![0.0; n],
            const_t: vec![0.0; n],
        }
    }
}

/// Core of one iteration: assemble and solve the condensed Newton system,
/// leaving Δz in `ws.dz` and the extraction ingredients (multiplier
/// ratios and centering constants) in the workspace.
///
/// The scaled system (2λH̃ + diag(γ/φ) + diag(θ/ψ))Δz = 2(√(θ/ψ)τe −
/// √(γ/φ)τe + γ − θ) is solved in the algebraically identical form
/// (H + κ·diag(γ/φ + θ/ψ))Δz = κ·rhs with κ = ‖h‖∞/(2λ), which avoids
/// rescaling the whole matrix every iteration.
///
/// Charges 10n at the model rate plus the measured factorization and
/// substitution costs.
fn newton_solve(
    ws: &mut Workspace,
    hessian: &DenseMatrix,
    kappa: f64,
    it: &Iterate,
    tau: f64,
    counter: &mut FlopCounter,
) -> Result<()> {
    let n = it.z.len();
    // Copy H and add the scaled barrier diagonal; build the right-hand
    // side from the two centering constants so the direction extraction
    // below can reuse them.
    ws.system.as_mut_slice().copy_from_slice(hessian.as_slice());
    for i in 0..n {
        let rg = it.gamma[i] / it.phi[i];
        let rt = it.theta[i] / it.psi[i];
        ws.ratio_g[i] = rg;
        ws.ratio_t[i] = rt;
        ws.const_g[i] = 2.0 * (rg.sqrt() * tau - it.gamma[i]);
        ws.const_t[i] = 2.0 * (rt.sqrt() * tau - it.theta[i]);
        ws.dz[i] = kappa * (ws.const_t[i] - ws.const_g[i]);
        let d = ws.system.get(i, i) + kappa * (rg + rt);
        ws.system.set(i, i, d);
    }
    counter.add(Phase::Vector, 10 * n as u64);
    cholesky_into(&ws.system, &mut ws.factor, counter)?;
    forward_solve_in_place(&ws.factor, &mut ws.dz, counter)?;
    backward_solve_in_place(&ws.factor, &mut ws.dz, counter)?;
    Ok(())
}

/// Newton direction for a standalone iterate (test and inspection
/// surface; [`solve`] runs the same arithmetic through its workspace).
///
/// Charges the measured factorization/substitution cost plus the 10n model
/// rate for the vector arithmetic.
pub fn newton_direction(
    qp: &BoxQp,
    it: &Iterate,
    params: &SolverParams,
    counter: &mut FlopCounter,
) -> Result<NewtonDirection> {
    let n = qp.n();
    if it.z.len() != n {
        return Err(Error::DimensionMismatch {
            context: "newton direction",
            expected: n,
            got: it.z.len(),
        });
    }
    let mut scratch = FlopCounter::new();
    let hnorm = norm_inf(qp.linear(), &mut scratch);
    let kappa = if hnorm > 0.0 {
        hnorm / (2.0 * params.lambda)
    } else {
        1.0 / (2.0 * params.lambda)
    };
    let mut ws = Workspace::new(n);
    newton_solve(&mut ws, qp.hessian(), kappa, it, it.tau, counter)?;
    let mut dgamma = vec![0.0; n];
    let mut dtheta = vec![0.0; n];
    let mut dphi = vec![0.0; n];
    let mut dpsi = vec![0.0; n];
    for i in 0..n {
        dgamma[i] = ws.ratio_g[i] * ws.dz[i] + ws.const_g[i];
        dtheta[i] = ws.const_t[i] - ws.ratio_t[i] * ws.dz[i];
        dphi[i] = -ws.dz[i];
        dpsi[i] = ws.dz[i];
    }
    Ok(NewtonDirection {
        dz: ws.dz,
        dgamma,
        dtheta,
        dphi,
        dpsi,
    })
}

/// Per-stage flop subtotals of one [`solve`] call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStageFlops {
    /// Zero test on h.
    pub norm_scan: u64,
    /// Initialization.
    pub init: u64,
    /// All Newton iterations.
    pub iterate: u64,
}

/// Result of one box-QP solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxQpResult {
    /// Solution, strictly inside [−1−1e-9, 1+1e-9] componentwise.
    pub z: Vec<f64>,
    /// Final duality gap of the scaled problem (≤ ε unless h = 0, in
    /// which case it is exactly 0).
    pub duality_gap: f64,
    /// Iterations executed: exactly the certified count, or 0 when h = 0
    /// or n = 0.
    pub iterations: u64,
    /// Flop counter snapshot for this solve.
    pub flops: FlopCounter,
    /// The counter split by solver stage.
    pub stage_flops: SolveStageFlops,
}

/// Instrumentation record for one iteration of a traced solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// Path parameter this iteration's Newton system was solved at.
    pub tau: f64,
    /// Proximity ξ before the step, at the freshly shrunk τ.
    pub proximity_pre: f64,
    /// Proximity ξ after the full step, at the same τ.
    pub proximity_post: f64,
    /// Smallest multiplier/slack component after the step.
    pub min_component: f64,
    /// Duality gap vᵀs after the step.
    pub duality_gap: f64,
    /// The envelope 2n·τ² the gap must stay under.
    pub gap_bound: f64,
}

/// Per-iteration instrumentation from [`solve_traced`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
}

/// Solve the box QP. Runs exactly `params.iterations` full Newton steps —
/// data decides nothing about the control flow — and returns the final
/// iterate's z together with the flop ledger.
///
/// Special cases: n = 0 returns an empty solution and h = 0 returns z = 0,
/// both with zero iterations (z = 0 is exactly optimal for h = 0).
pub fn solve(qp: &BoxQp, params: &SolverParams) -> Result<BoxQpResult> {
    solve_inner(qp, params, None)
}

/// [`solve`] plus a per-iteration trace of the quantities the method's
/// correctness argument bounds (proximity, positivity, gap envelope).
/// Instrumentation arithmetic is not flop-counted, so traced and untraced
/// solves report identical ledgers.
pub fn solve_traced(qp: &BoxQp, params: &SolverParams) -> Result<(BoxQpResult, SolveTrace)> {
    let mut trace = SolveTrace::default();
    let result = solve_inner(qp, params, Some(&mut trace))?;
    Ok((result, trace))
}

fn solve_inner(
    qp: &BoxQp,
    params: &SolverParams,
    mut trace: Option<&mut SolveTrace>,
) -> Result<BoxQpResult> {
    let n = qp.n();
    if params.n != n {
        return Err(Error::DimensionMismatch {
            context: "solver params",
            expected: n,
            got: params.n,
        });
    }
    let mut counter = FlopCounter::new();
    if n == 0 {
        return Ok(BoxQpResult {
            z: Vec::new(),
            duality_gap: 0.0,
            iterations: 0,
            flops: counter,
            stage_flops: SolveStageFlops::default(),
        });
    }

    let hnorm = norm_inf(qp.linear(), &mut counter);
    let norm_scan = counter.total();
    if hnorm == 0.0 {
        return Ok(BoxQpResult {
            z: vec![0.0; n],
            duality_gap: 0.0,
            iterations: 0,
            flops: counter,
            stage_flops: SolveStageFlops {
                norm_scan,
                ..Default::default()
            },
        });
    }

    let mut it = init_iterate_with_norm(qp, params, hnorm, &mut counter);
    let init = counter.total() - norm_scan;
    let kappa = hnorm / (2.0 * params.lambda);
    let shrink = 1.0 - params.eta;
    let mut ws = Workspace::new(n);

    // The path parameter enters the first iteration at exactly 1: the
    // initial τ⁰ = 1/(1−η) exists precisely so that the first shrink lands
    // there, and writing the 1 directly keeps it exact in floating point.
    // One flop per iteration is charged for the update either way.
    let mut tau = params.tau0;
    for k in 0..params.iterations {
        tau = if k == 0 { 1.0 } else { tau * shrink };
        counter.add(Phase::Vector, 1);

        let proximity_pre = trace
            .as_ref()
            .map(|_| proximity(&it.v(), &it.s(), tau))
            .unwrap_or(0.0);

        newton_solve(&mut ws, qp.hessian(), kappa, &it, tau, &mut counter)?;

        for i in 0..n {
            let dz = ws.dz[i];
            it.z[i] += dz;
            it.gamma[i] += ws.ratio_g[i] * dz + ws.const_g[i];
            it.theta[i] += ws.const_t[i] - ws.ratio_t[i] * dz;
            it.phi[i] -= dz;
            it.psi[i] += dz;
        }
        counter.add(Phase::Vector, 5 * n as u64);
        it.tau = tau;

        if let Some(t) = trace.as_deref_mut() {
            t.records.push(IterationRecord {
                tau,
                proximity_pre,
                proximity_post: proximity(&it.v(), &it.s(), tau),
                min_component: it.min_component(),
                duality_gap: it.duality_gap(),
                gap_bound: 2.0 * n as f64 * tau * tau,
            });
        }
    }

    let iterate = counter.total() - norm_scan - init;
    Ok(BoxQpResult {
        duality_gap: it.duality_gap(),
        z: it.z,
        iterations: params.iterations,
        flops: counter,
        stage_flops: SolveStageFlops {
            norm_scan,
            init,
            iterate,
        },
    })
}
