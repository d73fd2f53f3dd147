//! Shared oracles and generators for the integration tests.
//!
//! Everything here recomputes library results by a structurally different
//! route: Gaussian elimination with partial pivoting instead of Cholesky,
//! exhaustive active-set enumeration instead of interior-point steps,
//! step-by-step dynamics rollout instead of condensed prediction
//! operators. Agreement between the two routes is the evidence the tests
//! rest on, so nothing in this module calls the kernels it is meant to
//! check.

#![allow(dead_code)]

use certiqp::linalg::DenseMatrix;
use certiqp::mpc::{MpcConfig, PlantModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic generator; every test fixes its own seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m.set(i, j, rng.gen_range(-scale..scale));
        }
    }
    m
}

/// Symmetric positive definite matrix AᵀA + d·I with d ≥ `diag_boost`,
/// bitwise symmetric by construction.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, diag_boost: f64) -> DenseMatrix {
    let a = random_matrix(rng, n, n, 1.0);
    let d = diag_boost + rng.gen_range(0.0..1.0);
    let mut s = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a.get(k, i) * a.get(k, j);
            }
            if i == j {
                s.set(i, i, acc + d);
            } else {
                s.set(i, j, acc);
                s.set(j, i, acc);
            }
        }
    }
    s
}

/// Gaussian elimination with partial pivoting. Returns `None` for a
/// (numerically) singular system.
pub fn solve_linear(a: &DenseMatrix, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    assert_eq!(a.cols(), n, "square system");
    assert_eq!(rhs.len(), n, "rhs length");
    let mut work: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a.row(i).to_vec();
            row.push(rhs[i]);
            row
        })
        .collect();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&p, &q| {
                work[p][col]
                    .abs()
                    .partial_cmp(&work[q][col].abs())
                    .unwrap()
            })
            .unwrap();
        if work[pivot_row][col].abs() < 1e-12 {
            return None;
        }
        work.swap(col, pivot_row);
        for row in (col + 1)..n {
            let factor = work[row][col] / work[col][col];
            for k in col..=n {
                work[row][k] -= factor * work[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = work[row][n];
        for k in (row + 1)..n {
            acc -= work[row][k] * x[k];
        }
        x[row] = acc / work[row][row];
    }
    Some(x)
}

pub fn naive_matvec(a: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.cols(), x.len());
    (0..a.rows())
        .map(|i| a.row(i).iter().zip(x).map(|(v, w)| v * w).sum())
        .collect()
}

pub fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols(), b.rows());
    let mut out = DenseMatrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut acc = 0.0;
            for k in 0..a.cols() {
                acc += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, acc);
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Exact minimizer of ½·zᵀHz + hᵀz over the unit box, by enumerating all
/// 3ⁿ lower/free/upper bound patterns and keeping the KKT-consistent
/// candidate of least objective. H must be positive definite; n must stay
/// small (the work is 3ⁿ solves).
pub fn boxqp_enumeration_oracle(h_mat: &DenseMatrix, h_vec: &[f64]) -> Vec<f64> {
    let n = h_vec.len();
    assert!(n <= 8, "enumeration oracle is exponential in n");
    let mut best: Option<(f64, Vec<f64>)> = None;
    let patterns = 3usize.pow(n as u32);
    for code in 0..patterns {
        let mut pattern = Vec::with_capacity(n);
        let mut rest = code;
        for _ in 0..n {
            pattern.push((rest % 3) as i8 - 1); // -1 lower, 0 free, +1 upper
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 0).collect();
        let mut z: Vec<f64> = pattern.iter().map(|&p| p as f64).collect();
        if !free.is_empty() {
            // Solve the equality-restricted system H_ff z_f = −h_f − H_fb z_b.
            let mut sub = DenseMatrix::zeros(free.len(), free.len());
            let mut rhs = vec![0.0; free.len()];
            for (a, &i) in free.iter().enumerate() {
                let mut acc = -h_vec[i];
                for j in 0..n {
                    if pattern[j] != 0 {
                        acc -= h_mat.get(i, j) * z[j];
                    }
                }
                rhs[a] = acc;
                for (b, &j) in free.iter().enumerate() {
                    sub.set(a, b, h_mat.get(i, j));
                }
            }
            let zf = match solve_linear(&sub, &rhs) {
                Some(v) => v,
                None => continue,
            };
            for (a, &i) in free.iter().enumerate() {
                z[i] = zf[a];
            }
        }
        if z.iter().any(|v| v.abs() > 1.0 + 1e-9) {
            continue;
        }
        // KKT sign checks: at an active bound the gradient must push
        // outward.
        let grad = {
            let mut g = naive_matvec(h_mat, &z);
            for i in 0..n {
                g[i] += h_vec[i];
            }
            g
        };
        let consistent = (0..n).all(|i| match pattern[i] {
            -1 => grad[i] >= -1e-7,
            1 => grad[i] <= 1e-7,
            _ => true,
        });
        if !consistent {
            continue;
        }
        let mut objective = 0.0;
        for i in 0..n {
            objective += 0.5 * z[i] * grad[i] + 0.5 * z[i] * h_vec[i];
        }
        match &best {
            Some((f, _)) if *f <= objective => {}
            _ => best = Some((objective, z)),
        }
    }
    best.expect("positive definite box QP has a KKT point").1
}

/// Solution of a hard inequality-constrained QP found by enumerating
/// active sets: y minimizes ½yᵀQy + fᵀy subject to Gy ≤ b, with the full
/// multiplier vector (zero on inactive rows). Returns `None` when no
/// KKT-consistent candidate exists (e.g. the instance is infeasible).
pub struct HardQpSolution {
    pub y: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub objective: f64,
}

pub fn hard_qp_enumeration_oracle(
    q: &DenseMatrix,
    f: &[f64],
    g: &DenseMatrix,
    b: &[f64],
) -> Option<HardQpSolution> {
    let m = q.rows();
    let n = g.rows();
    assert!(n <= 12, "subset enumeration is exponential in n");
    let mut best: Option<HardQpSolution> = None;
    for mask in 0..(1usize << n) {
        let active: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let dim = m + active.len();
        // KKT system: [Q  G_Aᵀ; G_A  0]·[y; ζ_A] = [−f; b_A].
        let mut kkt = DenseMatrix::zeros(dim, dim);
        let mut rhs = vec![0.0; dim];
        for i in 0..m {
            for j in 0..m {
                kkt.set(i, j, q.get(i, j));
            }
            rhs[i] = -f[i];
        }
        for (a, &row) in active.iter().enumerate() {
            for j in 0..m {
                kkt.set(m + a, j, g.get(row, j));
                kkt.set(j, m + a, g.get(row, j));
            }
            rhs[m + a] = b[row];
        }
        let solution = match solve_linear(&kkt, &rhs) {
            Some(v) => v,
            None => continue,
        };
        let y = solution[..m].to_vec();
        let zeta_active = &solution[m..];
        if zeta_active.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let gy = naive_matvec(g, &y);
        if (0..n).any(|i| gy[i] > b[i] + 1e-8) {
            continue;
        }
        let mut objective = 0.0;
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                acc += q.get(i, j) * y[j];
            }
            objective += 0.5 * y[i] * acc + f[i] * y[i];
        }
        let improves = match &best {
            Some(current) => objective < current.objective - 1e-12,
            None => true,
        };
        if improves {
            let mut multipliers = vec![0.0; n];
            for (a, &row) in active.iter().enumerate() {
                multipliers[row] = zeta_active[a];
            }
            best = Some(HardQpSolution {
                y,
                multipliers,
                objective,
            });
        }
    }
    best
}

/// Penalized objective ½yᵀQy + fᵀy + Σᵢ ρᵢ·max(0, (Gy − b)ᵢ).
pub fn penalized_objective(
    q: &DenseMatrix,
    f: &[f64],
    g: &DenseMatrix,
    b: &[f64],
    rho: &[f64],
    y: &[f64],
) -> f64 {
    let qy = naive_matvec(q, y);
    let mut value = 0.0;
    for i in 0..y.len() {
        value += 0.5 * y[i] * qy[i] + f[i] * y[i];
    }
    let gy = naive_matvec(g, y);
    for i in 0..b.len() {
        value += rho[i] * (gy[i] - b[i]).max(0.0);
    }
    value
}

/// Roll the plant forward one input at a time: returns x(1), …, x(T).
pub fn rollout(plant: &PlantModel, x0: &[f64], inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut states = Vec::with_capacity(inputs.len());
    let mut x = x0.to_vec();
    for u in inputs {
        let mut next = naive_matvec(&plant.a, &x);
        let forced = naive_matvec(&plant.b, u);
        for i in 0..next.len() {
            next[i] += forced[i];
        }
        states.push(next.clone());
        x = next;
    }
    states
}

/// Total horizon cost of a rollout: stage state costs on x(1..T−1),
/// terminal cost on x(T), input costs on every input. This is the cost
/// the condensed quadratic reproduces up to an x0-only constant.
pub fn rollout_cost(config: &MpcConfig, states: &[Vec<f64>], inputs: &[Vec<f64>]) -> f64 {
    let t = states.len();
    let mut value = 0.0;
    for (k, x) in states.iter().enumerate() {
        let w = if k + 1 == t {
            &config.terminal_weight
        } else {
            &config.state_weight
        };
        let wx = naive_matvec(w, x);
        for i in 0..x.len() {
            value += 0.5 * x[i] * wx[i];
        }
    }
    for u in inputs {
        let ru = naive_matvec(&config.input_weight, u);
        for i in 0..u.len() {
            value += 0.5 * u[i] * ru[i];
        }
    }
    value
}
