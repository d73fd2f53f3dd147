//! Closed-loop simulation of the condensed controller against its plant.
//!
//! Each step binds the condensed QP to the current state, runs the cached
//! soft-constrained solve, applies the first input of the optimal sequence
//! to the plant, and logs what a deployment would want audited afterwards:
//! violations, the iteration count (identical every step by construction),
//! the online flop count, and wall-clock solve time. The time-invariant
//! work — condensing, the cost factorization, the quadratic-term assembly —
//! happens once before the loop, matching the cached-deployment budget the
//! accompanying [`Certificate`](crate::certificate::Certificate) prices.
//!
//! Everything in the trajectory except `solve_seconds` is deterministic:
//! two runs of the same configuration produce bitwise-identical states,
//! inputs, violations, and flop counts.

use std::io::{self, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::certificate::{self, Certificate};
use crate::error::{Error, Result};
use crate::flops::FlopCounter;
use crate::mpc::{assemble_penalty, condense, MpcConfig, PlantModel};
use crate::penalty::{precompute, solve_soft_qp_cached};

/// A complete closed-loop experiment: plant, controller, initial state,
/// length, solver tolerance, and (optionally) the machine rate used to
/// convert the flop certificate into a time estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// The simulated plant (also the controller's prediction model).
    pub plant: PlantModel,
    /// Controller configuration.
    pub mpc: MpcConfig,
    /// Initial state.
    pub x0: Vec<f64>,
    /// Number of closed-loop steps.
    pub steps: usize,
    /// Solver duality-gap tolerance.
    pub epsilon: f64,
    /// Sustained flop rate of the target machine, for the a-priori
    /// per-solve time estimate. Optional; the flop counts stand alone.
    #[serde(default)]
    pub flops_per_second: Option<f64>,
}

/// One logged closed-loop step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    /// Step index, starting at 0.
    pub step: usize,
    /// State the controller saw (before this step's input is applied).
    pub state: Vec<f64>,
    /// Input applied to the plant (first stage of the optimal sequence).
    pub input: Vec<f64>,
    /// Largest corridor violation among the soft rows at this state.
    pub soft_violation: f64,
    /// Largest bound violation of the applied input.
    pub hard_violation: f64,
    /// Interior-point iterations spent by this solve.
    pub iterations: u64,
    /// Online flops spent by this solve (cached deployment).
    pub online_flops: u64,
    /// Wall-clock solve time. The only nondeterministic column.
    pub solve_seconds: f64,
}

/// The logged closed loop plus the a-priori certificate it ran under.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// One record per executed step.
    pub steps: Vec<TrajectoryStep>,
    /// State after the final step.
    pub final_state: Vec<f64>,
    /// The a-priori iteration/flop certificate for each step's solve.
    pub certificate: Certificate,
}

/// Aggregates the acceptance questions are asked about.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    /// State after the final step.
    pub final_state: Vec<f64>,
    /// Largest |input component| applied over the run.
    pub max_abs_input: f64,
    /// Largest soft-corridor violation observed.
    pub max_soft_violation: f64,
    /// Largest applied-input bound violation observed.
    pub max_hard_violation: f64,
    /// Minimum and maximum per-step iteration count (equal when the
    /// certificate holds).
    pub iterations_range: (u64, u64),
    /// Total online flops across all steps.
    pub total_online_flops: u64,
}

impl Trajectory {
    /// Write the trajectory as CSV: a header naming each state and input
    /// column, then one row per step. Floats carry 12 significant digits;
    /// every column except `solve_seconds` is deterministic.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let n_s = self.final_state.len();
        let n_u = self.steps.first().map_or(1, |s| s.input.len());
        let mut header = String::from("step");
        for i in 1..=n_s {
            header.push_str(&format!(",x{i}"));
        }
        if n_u == 1 {
            header.push_str(",u");
        } else {
            for i in 1..=n_u {
                header.push_str(&format!(",u{i}"));
            }
        }
        header.push_str(",soft_violation,hard_violation,iterations,online_flops,solve_seconds");
        writeln!(out, "{header}")?;
        for row in &self.steps {
            write!(out, "{}", row.step)?;
            for v in &row.state {
                write!(out, ",{v:.11e}")?;
            }
            for v in &row.input {
                write!(out, ",{v:.11e}")?;
            }
            writeln!(
                out,
                ",{:.11e},{:.11e},{},{},{:.11e}",
                row.soft_violation,
                row.hard_violation,
                row.iterations,
                row.online_flops,
                row.solve_seconds
            )?;
        }
        Ok(())
    }

    /// The CSV as a string.
    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    /// Reduce the run to the numbers a verdict needs.
    pub fn summary(&self) -> TrajectorySummary {
        let mut max_abs_input = 0.0f64;
        let mut max_soft = 0.0f64;
        let mut max_hard = 0.0f64;
        let mut iter_min = u64::MAX;
        let mut iter_max = 0u64;
        let mut total_flops = 0u64;
        for row in &self.steps {
            for v in &row.input {
                max_abs_input = max_abs_input.max(v.abs());
            }
            max_soft = max_soft.max(row.soft_violation);
            max_hard = max_hard.max(row.hard_violation);
            iter_min = iter_min.min(row.iterations);
            iter_max = iter_max.max(row.iterations);
            total_flops += row.online_flops;
        }
        if self.steps.is_empty() {
            iter_min = 0;
        }
        TrajectorySummary {
            final_state: self.final_state.clone(),
            max_abs_input,
            max_soft_violation: max_soft,
            max_hard_violation: max_hard,
            iterations_range: (iter_min, iter_max),
            total_online_flops: total_flops,
        }
    }
}

/// Run the closed loop. Condensing and the transform cache are built once
/// up front; each step then performs exactly the certified online work.
/// A failure inside step k comes back as [`Error::SimulationStep`] with
/// the underlying cause attached.
pub fn run(config: &SimConfig) -> Result<Trajectory> {
    let condensed = condense(&config.plant, &config.mpc)?;
    let rho = assemble_penalty(&config.mpc, &condensed.layout)?;
    let n_s = config.plant.state_dim();
    let n_u = config.plant.input_dim();
    if config.x0.len() != n_s {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: n_s,
            got: config.x0.len(),
        });
    }
    if !config.x0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteData { context: "x0" });
    }

    let mut certificate =
        certificate::flop_budget(condensed.input_dim(), condensed.rows(), config.epsilon, true)?;
    if let Some(rate) = config.flops_per_second {
        if !rate.is_finite() || rate <= 0.0 {
            return Err(Error::InvalidConfig {
                message: format!("flop rate must be positive, got {rate}"),
            });
        }
        certificate = certificate.with_rate(rate);
    }

    // Offline, once: factor the cost and assemble the quadratic term.
    let mut offline_counter = FlopCounter::new();
    let template = condensed.instance(&config.x0)?;
    let cache = precompute(&template, &rho, &mut offline_counter)?;

    let wrap = |step: usize| move |e: Error| Error::SimulationStep {
        step,
        source: Box::new(e),
    };

    let mut x = config.x0.clone();
    let mut steps = Vec::with_capacity(config.steps);
    for k in 0..config.steps {
        let inst = condensed.instance(&x).map_err(wrap(k))?;
        let start = Instant::now();
        let solved =
            solve_soft_qp_cached(&inst, &rho, config.epsilon, &cache).map_err(wrap(k))?;
        let solve_seconds = start.elapsed().as_secs_f64();
        let input = solved.y[..n_u].to_vec();
        let soft_violation = solved.violations[condensed.layout.hard_rows..]
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v));
        let mut hard_violation = 0.0f64;
        for i in 0..n_u {
            hard_violation = hard_violation
                .max(input[i] - config.mpc.u_max[i])
                .max(config.mpc.u_min[i] - input[i]);
        }
        steps.push(TrajectoryStep {
            step: k,
            state: x.clone(),
            input: input.clone(),
            soft_violation,
            hard_violation,
            iterations: solved.iterations,
            online_flops: solved.flops.online_total(true),
            solve_seconds,
        });
        x = config.plant.step(&x, &input).map_err(wrap(k))?;
    }

    Ok(Trajectory {
        steps,
        final_state: x,
        certificate,
    })
}
