//! Condensing a linear MPC problem into the solver's QP form.
//!
//! Given a discrete-time plant x⁺ = A·x + B·u, stage costs, input bounds,
//! and soft state corridors, this module eliminates the predicted states and
//! produces the parametric QP the penalty transform consumes:
//!
//! ```text
//! min ½·UᵀQ·U + Uᵀ·F·x₀   subject to   G·U ≤ g + S·x₀
//! ```
//!
//! over the stacked input sequence U = (u₀, …, u_{T−1}). Predictions follow
//! X = Γ·x₀ + Φ·U, where row block k of Γ is Aᵏ and block (k, j) of Φ is
//! A^{k−1−j}·B; the cost collapses to Q = ΦᵀQ̄Φ + R̄ and F = ΦᵀQ̄Γ with the
//! additive x₀-only constant dropped. Constraint rows are laid out hard
//! first — upper input bounds for every stage, then lower — followed by one
//! row per (stage, corridor) pair, so a penalty vector can weight the two
//! classes differently.
//!
//! Condensing is offline configuration work and is not flop-charged; the
//! runtime budget starts once the condensed matrices are fixed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flops::FlopCounter;
use crate::linalg::{cholesky, matmul, DenseMatrix};
use crate::penalty::{ConstraintKind, PenaltyVector, QpInstance};

/// Discrete-time linear plant x⁺ = A·x + B·u. The sampling period is
/// metadata — A and B are already discrete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantModel {
    /// State transition matrix A (square).
    pub a: DenseMatrix,
    /// Input matrix B (states × inputs).
    pub b: DenseMatrix,
    /// Sampling period in seconds.
    pub dt: f64,
}

impl PlantModel {
    /// Number of states.
    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    /// Number of inputs.
    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    /// Shape and finiteness checks.
    pub fn validate(&self) -> Result<()> {
        if self.a.cols() != self.a.rows() {
            return Err(Error::DimensionMismatch {
                context: "A must be square",
                expected: self.a.rows(),
                got: self.a.cols(),
            });
        }
        if self.b.rows() != self.a.rows() {
            return Err(Error::DimensionMismatch {
                context: "B must have one row per state",
                expected: self.a.rows(),
                got: self.b.rows(),
            });
        }
        if self.b.cols() == 0 {
            return Err(Error::InvalidConfig {
                message: "plant needs at least one input".into(),
            });
        }
        if !self.a.all_finite() || !self.b.all_finite() {
            return Err(Error::NonFiniteData { context: "plant" });
        }
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::InvalidConfig {
                message: format!("sampling period must be positive, got {}", self.dt),
            });
        }
        Ok(())
    }

    /// One plant update x⁺ = A·x + B·u. This is the simulated world, not
    /// controller work, so it carries no flop charge.
    pub fn step(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "plant state",
                expected: self.state_dim(),
                got: x.len(),
            });
        }
        if u.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "plant input",
                expected: self.input_dim(),
                got: u.len(),
            });
        }
        let mut next = vec![0.0; self.state_dim()];
        for (i, out) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &v) in self.a.row(i).iter().enumerate() {
                acc += v * x[k];
            }
            for (k, &v) in self.b.row(i).iter().enumerate() {
                acc += v * u[k];
            }
            *out = acc;
        }
        Ok(next)
    }
}

/// A soft state requirement normal·x ≤ offset, imposed on every predicted
/// state along the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    /// Row vector applied to the state.
    pub normal: Vec<f64>,
    /// Right-hand side bound.
    pub offset: f64,
}

/// Controller configuration: horizon, quadratic weights, input bounds,
/// soft state corridors, and the penalty weights for each constraint class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    /// Prediction horizon T ≥ 1.
    pub horizon: usize,
    /// Stage state weight (states × states, symmetric).
    pub state_weight: DenseMatrix,
    /// Terminal state weight (states × states, symmetric).
    pub terminal_weight: DenseMatrix,
    /// Stage input weight (inputs × inputs, symmetric).
    pub input_weight: DenseMatrix,
    /// Lower input bounds, one per input.
    pub u_min: Vec<f64>,
    /// Upper input bounds, one per input.
    pub u_max: Vec<f64>,
    /// Soft state corridors applied at every predicted state.
    pub state_constraints: Vec<HalfSpace>,
    /// Penalty weight on the (hard) input-bound rows.
    pub rho_hard: f64,
    /// Penalty weight on the (soft) state-corridor rows.
    pub rho_soft: f64,
}

/// How the condensed constraint rows are laid out: the first `hard_rows`
/// are input bounds (all uppers, then all lowers), the remaining
/// `soft_rows` are state corridors ordered stage-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowLayout {
    /// Number of leading input-bound rows.
    pub hard_rows: usize,
    /// Number of trailing state-corridor rows.
    pub soft_rows: usize,
}

impl RowLayout {
    /// Total constraint rows.
    pub fn total(&self) -> usize {
        self.hard_rows + self.soft_rows
    }
}

/// The condensed parametric QP, valid for every initial state of the same
/// plant. [`CondensedQp::instance`] binds it to one measured state.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedQp {
    /// Free-response map Γ (block k is Aᵏ, k = 1..T).
    pub gamma: DenseMatrix,
    /// Forced-response map Φ (block (k, j) is A^{k−1−j}·B for j < k).
    pub phi: DenseMatrix,
    /// Condensed quadratic cost Q = ΦᵀQ̄Φ + R̄ (positive definite).
    pub q: DenseMatrix,
    /// Condensed state-to-cost coupling F = ΦᵀQ̄Γ.
    pub f: DenseMatrix,
    /// Condensed constraint matrix G.
    pub g: DenseMatrix,
    /// Constant constraint offsets g.
    pub b: Vec<f64>,
    /// State-to-bound coupling S.
    pub s: DenseMatrix,
    /// Hard/soft row layout.
    pub layout: RowLayout,
}

impl CondensedQp {
    /// Stacked input dimension T·(number of inputs).
    pub fn input_dim(&self) -> usize {
        self.q.rows()
    }

    /// Total constraint rows.
    pub fn rows(&self) -> usize {
        self.layout.total()
    }

    /// Bind the parametric QP to one initial state.
    pub fn instance(&self, x: &[f64]) -> Result<QpInstance> {
        QpInstance::new(
            self.q.clone(),
            self.f.clone(),
            self.g.clone(),
            self.b.clone(),
            self.s.clone(),
            x.to_vec(),
        )
    }
}

/// Eliminate the predicted states and assemble the condensed QP.
///
/// Fails with [`Error::InvalidConfig`] / [`Error::DimensionMismatch`] on an
/// inconsistent configuration and with [`Error::NotPositiveDefinite`] when
/// the condensed cost is not positive definite (for example a zero input
/// weight on an input that never reaches the cost).
pub fn condense(plant: &PlantModel, config: &MpcConfig) -> Result<CondensedQp> {
    plant.validate()?;
    validate_config(plant, config)?;
    let n_s = plant.state_dim();
    let n_u = plant.input_dim();
    let t = config.horizon;
    let m = t * n_u;
    let mut scratch = FlopCounter::new();

    // Powers of A up to A^T.
    let mut apow = Vec::with_capacity(t + 1);
    apow.push(DenseMatrix::identity(n_s));
    for k in 1..=t {
        apow.push(matmul(&plant.a, &apow[k - 1], &mut scratch)?);
    }

    // Γ stacks A¹..A^T; Φ block (k, j) is A^{k−1−j}·B.
    let mut gamma = DenseMatrix::zeros(t * n_s, n_s);
    let mut phi = DenseMatrix::zeros(t * n_s, m);
    for k in 1..=t {
        let row0 = (k - 1) * n_s;
        for i in 0..n_s {
            for j in 0..n_s {
                gamma.set(row0 + i, j, apow[k].get(i, j));
            }
        }
        for j in 0..k {
            let block = matmul(&apow[k - 1 - j], &plant.b, &mut scratch)?;
            let col0 = j * n_u;
            for i in 0..n_s {
                for c in 0..n_u {
                    phi.set(row0 + i, col0 + c, block.get(i, c));
                }
            }
        }
    }

    // Q̄ = blockdiag(Q_x, …, Q_x, P) over the predicted states, R̄ over the
    // inputs.
    let mut qbar = DenseMatrix::zeros(t * n_s, t * n_s);
    for k in 0..t {
        let w = if k + 1 == t {
            &config.terminal_weight
        } else {
            &config.state_weight
        };
        for i in 0..n_s {
            for j in 0..n_s {
                qbar.set(k * n_s + i, k * n_s + j, w.get(i, j));
            }
        }
    }
    let mut rbar = DenseMatrix::zeros(m, m);
    for k in 0..t {
        for i in 0..n_u {
            for j in 0..n_u {
                rbar.set(k * n_u + i, k * n_u + j, config.input_weight.get(i, j));
            }
        }
    }

    let qbar_phi = matmul(&qbar, &phi, &mut scratch)?;
    let phi_t = phi.transpose();
    let mut q = matmul(&phi_t, &qbar_phi, &mut scratch)?;
    for i in 0..m {
        for j in 0..m {
            q.set(i, j, q.get(i, j) + rbar.get(i, j));
        }
    }
    // The product is symmetric up to rounding; make it exactly so, since
    // downstream validation insists on it.
    for i in 0..m {
        for j in (i + 1)..m {
            let avg = 0.5 * (q.get(i, j) + q.get(j, i));
            q.set(i, j, avg);
            q.set(j, i, avg);
        }
    }
    let qbar_gamma = matmul(&qbar, &gamma, &mut scratch)?;
    let f = matmul(&phi_t, &qbar_gamma, &mut scratch)?;

    // A positive definite cost is a precondition for everything downstream;
    // catch a failure here, where the configuration that caused it is still
    // in view.
    cholesky(&q, &mut scratch)?;

    // Constraint rows: all upper input bounds, all lower input bounds, then
    // one row per (stage, corridor).
    let n_c = config.state_constraints.len();
    let hard_rows = 2 * m;
    let soft_rows = t * n_c;
    let n = hard_rows + soft_rows;
    let mut g_mat = DenseMatrix::zeros(n, m);
    let mut b_vec = vec![0.0; n];
    let mut s_mat = DenseMatrix::zeros(n, n_s);
    for k in 0..t {
        for i in 0..n_u {
            let row = k * n_u + i;
            g_mat.set(row, k * n_u + i, 1.0);
            b_vec[row] = config.u_max[i];
            let row = m + k * n_u + i;
            g_mat.set(row, k * n_u + i, -1.0);
            b_vec[row] = -config.u_min[i];
        }
    }
    for k in 1..=t {
        let pred_row0 = (k - 1) * n_s;
        for (c, half_space) in config.state_constraints.iter().enumerate() {
            let row = hard_rows + (k - 1) * n_c + c;
            // G row: normalᵀ·Φ block-row k; S row: −normalᵀ·Γ block-row k.
            for col in 0..m {
                let mut acc = 0.0;
                for i in 0..n_s {
                    acc += half_space.normal[i] * phi.get(pred_row0 + i, col);
                }
                g_mat.set(row, col, acc);
            }
            for col in 0..n_s {
                let mut acc = 0.0;
                for i in 0..n_s {
                    acc += half_space.normal[i] * gamma.get(pred_row0 + i, col);
                }
                s_mat.set(row, col, -acc);
            }
            b_vec[row] = half_space.offset;
        }
    }

    Ok(CondensedQp {
        gamma,
        phi,
        q,
        f,
        g: g_mat,
        b: b_vec,
        s: s_mat,
        layout: RowLayout {
            hard_rows,
            soft_rows,
        },
    })
}

/// The penalty vector matching a condensed row layout: `rho_hard` on the
/// input-bound rows, `rho_soft` on the corridor rows.
pub fn assemble_penalty(config: &MpcConfig, layout: &RowLayout) -> Result<PenaltyVector> {
    let mut rho = Vec::with_capacity(layout.total());
    let mut kinds = Vec::with_capacity(layout.total());
    rho.extend(std::iter::repeat(config.rho_hard).take(layout.hard_rows));
    kinds.extend(std::iter::repeat(ConstraintKind::Hard).take(layout.hard_rows));
    rho.extend(std::iter::repeat(config.rho_soft).take(layout.soft_rows));
    kinds.extend(std::iter::repeat(ConstraintKind::Soft).take(layout.soft_rows));
    PenaltyVector::new(rho, kinds)
}

fn validate_config(plant: &PlantModel, config: &MpcConfig) -> Result<()> {
    let n_s = plant.state_dim();
    let n_u = plant.input_dim();
    if config.horizon == 0 {
        return Err(Error::InvalidConfig {
            message: "horizon must be at least 1".into(),
        });
    }
    for (weight, dim, name) in [
        (&config.state_weight, n_s, "state weight"),
        (&config.terminal_weight, n_s, "terminal weight"),
        (&config.input_weight, n_u, "input weight"),
    ] {
        if weight.rows() != dim || weight.cols() != dim {
            return Err(Error::InvalidConfig {
                message: format!("{name} must be {dim} x {dim}"),
            });
        }
        if !weight.is_symmetric(1e-10) {
            return Err(Error::InvalidConfig {
                message: format!("{name} must be symmetric"),
            });
        }
        if !weight.all_finite() {
            return Err(Error::NonFiniteData { context: "weights" });
        }
    }
    if config.u_min.len() != n_u || config.u_max.len() != n_u {
        return Err(Error::DimensionMismatch {
            context: "input bounds",
            expected: n_u,
            got: config.u_min.len().max(config.u_max.len()),
        });
    }
    for i in 0..n_u {
        let (lo, hi) = (config.u_min[i], config.u_max[i]);
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::InvalidConfig {
                message: format!("input bounds [{lo}, {hi}] on input {i} are invalid"),
            });
        }
    }
    for half_space in &config.state_constraints {
        if half_space.normal.len() != n_s {
            return Err(Error::DimensionMismatch {
                context: "state constraint normal",
                expected: n_s,
                got: half_space.normal.len(),
            });
        }
        if !half_space.normal.iter().all(|v| v.is_finite()) || !half_space.offset.is_finite() {
            return Err(Error::NonFiniteData {
                context: "state constraints",
            });
        }
    }
    Ok(())
}

/// The benchmark plant: a double integrator (position, velocity) with unit
/// coupling, one bounded input u ∈ [−1, 1], unit state and terminal
/// weights, input weight 0.1, and one soft corridor keeping position above
/// −1 (−x₁ ≤ 1).
pub fn double_integrator_preset(
    rho_hard: f64,
    rho_soft: f64,
    horizon: usize,
) -> (PlantModel, MpcConfig) {
    let plant = PlantModel {
        a: DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).expect("static shape"),
        b: DenseMatrix::from_rows(&[vec![0.0], vec![1.0]]).expect("static shape"),
        dt: 0.01,
    };
    let config = MpcConfig {
        horizon,
        state_weight: DenseMatrix::identity(2),
        terminal_weight: DenseMatrix::identity(2),
        input_weight: DenseMatrix::from_rows(&[vec![0.1]]).expect("static shape"),
        u_min: vec![-1.0],
        u_max: vec![1.0],
        state_constraints: vec![HalfSpace {
            normal: vec![-1.0, 0.0],
            offset: 1.0,
        }],
        rho_hard,
        rho_soft,
    };
    (plant, config)
}
