//! On-disk JSON formats for problems and solutions.
//!
//! A problem file states its dimensions explicitly (`m` decision variables,
//! `n` constraint rows, `n_x` parameter entries) and then the data:
//!
//! ```json
//! {
//!   "m": 1, "n": 1, "n_x": 1,
//!   "Q": [[1.0]], "F": [[1.0]],
//!   "G": [[1.0]], "g": [0.5], "S": [[0.0]],
//!   "x": [1.0],
//!   "rho": [10.0],
//!   "hard_row_count": 0,
//!   "epsilon": 1e-6
//! }
//! ```
//!
//! The first `hard_row_count` rows are treated as hard constraints, the
//! rest as soft; that split only drives penalty-weight advisories and
//! diagnostics. Explicit dimensions let empty matrices (n = 0 or n_x = 0)
//! keep their intended shape.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use certiqp::linalg::DenseMatrix;
use certiqp::penalty::{ConstraintKind, PenaltyVector, QpInstance, SoftQpResult};

/// The problem file exactly as written on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    /// Decision-variable count.
    pub m: usize,
    /// Constraint-row count.
    pub n: usize,
    /// Parameter-vector length.
    pub n_x: usize,
    /// Positive definite cost matrix (m × m).
    #[serde(rename = "Q")]
    pub q: DenseMatrix,
    /// Parameter-to-cost coupling (m × n_x).
    #[serde(rename = "F")]
    pub f: DenseMatrix,
    /// Constraint matrix (n × m).
    #[serde(rename = "G")]
    pub g_matrix: DenseMatrix,
    /// Constant constraint offsets (length n).
    #[serde(rename = "g")]
    pub g_offset: Vec<f64>,
    /// Parameter-to-bound coupling (n × n_x).
    #[serde(rename = "S")]
    pub s: DenseMatrix,
    /// Parameter vector (length n_x).
    pub x: Vec<f64>,
    /// Per-row penalty weights (length n, all positive).
    pub rho: Vec<f64>,
    /// The first this-many rows are hard constraints.
    pub hard_row_count: usize,
    /// Solver duality-gap tolerance.
    pub epsilon: f64,
}

/// A problem file after validation, ready to solve.
#[derive(Debug)]
pub struct LoadedProblem {
    pub qp: QpInstance,
    pub rho: PenaltyVector,
    pub epsilon: f64,
}

/// Parse and validate problem JSON.
pub fn parse_problem(text: &str) -> Result<LoadedProblem, String> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| format!("problem JSON: {e}"))?;
    let ProblemFile {
        m,
        n,
        n_x,
        q,
        f,
        g_matrix,
        g_offset,
        s,
        x,
        rho,
        hard_row_count,
        epsilon,
    } = file;

    let q = reshape("Q", q, m, m)?;
    let f = reshape("F", f, m, n_x)?;
    let g_matrix = reshape("G", g_matrix, n, m)?;
    let s = reshape("S", s, n, n_x)?;
    check_len("g", g_offset.len(), n)?;
    check_len("x", x.len(), n_x)?;
    check_len("rho", rho.len(), n)?;
    if hard_row_count > n {
        return Err(format!(
            "hard_row_count {hard_row_count} exceeds the row count {n}"
        ));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(format!("epsilon must be positive, got {epsilon}"));
    }

    let qp = QpInstance::new(q, f, g_matrix, g_offset, s, x).map_err(|e| e.to_string())?;
    let kinds = (0..n)
        .map(|i| {
            if i < hard_row_count {
                ConstraintKind::Hard
            } else {
                ConstraintKind::Soft
            }
        })
        .collect();
    let rho = PenaltyVector::new(rho, kinds).map_err(|e| e.to_string())?;
    Ok(LoadedProblem { qp, rho, epsilon })
}

/// Read and validate a problem file.
pub fn load_problem(path: &Path) -> Result<LoadedProblem, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    parse_problem(&text)
}

/// A matrix must match its declared shape. An empty row list is accepted
/// for a zero-row shape (JSON `[]` cannot carry a column count).
fn reshape(name: &str, matrix: DenseMatrix, rows: usize, cols: usize) -> Result<DenseMatrix, String> {
    if rows == 0 && matrix.rows() == 0 {
        return Ok(DenseMatrix::zeros(0, cols));
    }
    if matrix.rows() != rows || matrix.cols() != cols {
        return Err(format!(
            "{name} must be {rows} x {cols}, got {} x {}",
            matrix.rows(),
            matrix.cols()
        ));
    }
    Ok(matrix)
}

fn check_len(name: &str, got: usize, expected: usize) -> Result<(), String> {
    if got != expected {
        return Err(format!("{name} must have {expected} entries, got {got}"));
    }
    Ok(())
}

/// The solution file written by `solve`: every output of one solve, plus
/// the certified counts it ran under.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    /// Recovered decision variables.
    pub y: Vec<f64>,
    /// Box-form solution.
    pub z: Vec<f64>,
    /// Penalty multipliers, inside [0, ρ].
    pub multipliers: Vec<f64>,
    /// Per-row constraint violations at y.
    pub violations: Vec<f64>,
    /// Final duality gap of the scaled box problem.
    pub duality_gap: f64,
    /// Interior-point iterations executed.
    pub iterations: u64,
    /// Flops spent by the full one-shot pipeline.
    pub online_flops: u64,
}

impl From<&SoftQpResult> for SolutionFile {
    fn from(result: &SoftQpResult) -> Self {
        Self {
            y: result.y.clone(),
            z: result.z.clone(),
            multipliers: result.multipliers.clone(),
            violations: result.violations.clone(),
            duality_gap: result.duality_gap,
            iterations: result.iterations,
            online_flops: result.flops.online_total(false),
        }
    }
}
