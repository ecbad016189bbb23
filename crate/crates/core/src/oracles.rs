//! Membership tests and distance certificates.
//!
//! Membership comparisons use a relative slack: `a >= b` holds when
//! `a >= b - MEMBERSHIP_SLACK * max(|a|, |b|)`. Masses in these instances are
//! of order `1/n` while the perturbations that must be detected can be many
//! orders of magnitude smaller, so an absolute slack would hide them.
//!
//! Certificates report `lower_bound = weight * Σ per_unit_terms`.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::HalfcubeLayout;

pub const MEMBERSHIP_SLACK: f64 = 1e-12;

/// Largest domain the LP oracle accepts.
pub const LP_BUDGET: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Total,
    /// `[n]^d`, row-major with the first coordinate most significant;
    /// `i < j` iff every coordinate of `j` exceeds that of `i`.
    Lattice { n: usize, d: u32 },
}

impl Order {
    fn check_len(&self, len: usize) -> Result<()> {
        if let Order::Lattice { n, d } = *self {
            let expected = n.checked_pow(d).unwrap_or(usize::MAX);
            if expected != len {
                return Err(Error::LengthMismatch { expected, got: len });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CertificateMethod {
    Gamma1d,
    GammaHalfcube,
    SqrtTriple,
    LpExact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceCertificate {
    pub lower_bound: f64,
    pub per_unit_terms: Vec<f64>,
    pub weight: f64,
    pub method: CertificateMethod,
}

impl DistanceCertificate {
    fn from_terms(terms: Vec<f64>, weight: f64, method: CertificateMethod) -> Self {
        let lower_bound = weight * terms.iter().sum::<f64>();
        DistanceCertificate {
            lower_bound,
            per_unit_terms: terms,
            weight,
            method,
        }
    }
}

/// `a >= b` up to the relative membership slack.
pub fn geq_with_slack(a: f64, b: f64) -> bool {
    a >= b - MEMBERSHIP_SLACK * a.abs().max(b.abs())
}

pub fn is_monotone(p: &[f64], order: Order) -> bool {
    match order {
        Order::Total => p.windows(2).all(|w| geq_with_slack(w[0], w[1])),
        Order::Lattice { n, d } => {
            if order.check_len(p.len()).is_err() {
                return false;
            }
            let upper = orthant_max(p, n, d);
            let d = d as usize;
            let mut coords = vec![0usize; d];
            for (idx, &pi) in p.iter().enumerate() {
                if idx > 0 {
                    increment(&mut coords, n);
                }
                if coords.iter().all(|&c| c + 1 < n) {
                    let next = coords.iter().fold(0, |acc, &c| acc * n + c + 1);
                    if !geq_with_slack(pi, upper[next]) {
                        return false;
                    }
                }
            }
            true
        }
    }
}

/// `out[i] = max { p[j] : j >= i coordinatewise }`, one suffix pass per axis.
fn orthant_max(p: &[f64], n: usize, d: u32) -> Vec<f64> {
    let mut out = p.to_vec();
    for axis in 0..d {
        let stride = n.pow(d - 1 - axis);
        for idx in (0..out.len()).rev() {
            let coord = (idx / stride) % n;
            if coord + 1 < n {
                let v = out[idx + stride];
                if v > out[idx] {
                    out[idx] = v;
                }
            }
        }
    }
    out
}

fn increment(coords: &mut [usize], n: usize) {
    for c in coords.iter_mut().rev() {
        *c += 1;
        if *c < n {
            return;
        }
        *c = 0;
    }
}

pub fn is_log_concave(p: &[f64]) -> bool {
    let Some(first) = p.iter().position(|&x| x > 0.0) else {
        return false;
    };
    let last = p.iter().rposition(|&x| x > 0.0).unwrap_or(first);
    if p[first..=last].iter().any(|&x| x <= 0.0) {
        return false;
    }
    (first + 1..last).all(|i| geq_with_slack(p[i] * p[i], p[i - 1] * p[i + 1]))
}

pub fn gamma_distance_1d(p: &[f64]) -> Result<DistanceCertificate> {
    if !p.len().is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "pair certificate needs an even domain, got {}",
            p.len()
        )));
    }
    let terms = p
        .chunks_exact(2)
        .map(|w| if w[0] < w[1] { (w[1] - w[0]) / 2.0 } else { 0.0 })
        .collect();
    Ok(DistanceCertificate::from_terms(terms, 1.0, CertificateMethod::Gamma1d))
}

/// Per-cube `((2d-1)/(2d))^(d-1) * max(0, K - J)` on halfcube masses laid out
/// as `(J_1, K_1, J_2, K_2, ...)`; the bound is half their sum.
pub fn gamma_distance_halfcube(layout: &HalfcubeLayout, p: &[f64]) -> Result<DistanceCertificate> {
    if p.len() != layout.halfcube_count() {
        return Err(Error::LengthMismatch {
            expected: layout.halfcube_count(),
            got: p.len(),
        });
    }
    let d = f64::from(layout.d);
    let factor = ((2.0 * d - 1.0) / (2.0 * d)).powi(layout.d as i32 - 1);
    let terms = p
        .chunks_exact(2)
        .map(|w| factor * (w[1] - w[0]).max(0.0))
        .collect();
    Ok(DistanceCertificate::from_terms(terms, 0.5, CertificateMethod::GammaHalfcube))
}

/// Half the sum over triples `(3i-2, 3i-1, 3i)` of
/// `max(0, sqrt(p_{3i-2} p_{3i}) - p_{3i-1})`. Only sound inside the window
/// `p_{3i-2} > p_{3i} > 0.8 p_{3i-2}`, `p_{3i-1} > 0.75 p_{3i}`, which is
/// checked for every triple.
pub fn sqrt_triple_distance(p: &[f64]) -> Result<DistanceCertificate> {
    if !p.len().is_multiple_of(3) {
        return Err(Error::InvalidParameter(format!(
            "triple certificate needs a domain divisible by 3, got {}",
            p.len()
        )));
    }
    let mut terms = Vec::with_capacity(p.len() / 3);
    for (idx, t) in p.chunks_exact(3).enumerate() {
        let (a, b, c) = (t[0], t[1], t[2]);
        let triple = idx + 1;
        if !(a > c && c > 0.8 * a) {
            return Err(Error::HypothesisViolation {
                triple,
                reason: format!("need p1 > p3 > 0.8 p1, got p1 = {a:e}, p3 = {c:e}"),
            });
        }
        if !(b > 0.75 * c) {
            return Err(Error::HypothesisViolation {
                triple,
                reason: format!("need p2 > 0.75 p3, got p2 = {b:e}, p3 = {c:e}"),
            });
        }
        terms.push(((a * c).sqrt() - b).max(0.0));
    }
    Ok(DistanceCertificate::from_terms(terms, 0.5, CertificateMethod::SqrtTriple))
}

/// One constraint: terms, comparison, right-hand side.
type Row = (Vec<(Variable, f64)>, ComparisonOp, f64);

pub fn lp_distance_to_monotone(p: &[f64], order: Order) -> Result<DistanceCertificate> {
    solve_monotone_lp(p, order, None)
}

/// Same program with the constraint rows shuffled; used to check that the
/// reported optimum does not depend on row order.
pub fn lp_distance_to_monotone_shuffled(p: &[f64], order: Order, seed: u64) -> Result<DistanceCertificate> {
    solve_monotone_lp(p, order, Some(seed))
}

fn solve_monotone_lp(p: &[f64], order: Order, shuffle: Option<u64>) -> Result<DistanceCertificate> {
    let n = p.len();
    if n > LP_BUDGET {
        return Err(Error::BudgetExceeded {
            what: "LP domain size",
            needed: n as f64,
            budget: LP_BUDGET as f64,
        });
    }
    order.check_len(n)?;

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let q: Vec<Variable> = (0..n).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let t: Vec<Variable> = (0..n).map(|_| lp.add_var(0.5, (0.0, f64::INFINITY))).collect();

    let mut rows: Vec<Row> = Vec::new();
    for i in 0..n {
        rows.push((vec![(t[i], 1.0), (q[i], 1.0)], ComparisonOp::Ge, p[i]));
        rows.push((vec![(t[i], 1.0), (q[i], -1.0)], ComparisonOp::Ge, -p[i]));
    }
    rows.push((q.iter().map(|&v| (v, 1.0)).collect(), ComparisonOp::Eq, 1.0));
    match order {
        Order::Total => {
            for i in 0..n.saturating_sub(1) {
                rows.push((vec![(q[i], 1.0), (q[i + 1], -1.0)], ComparisonOp::Ge, 0.0));
            }
        }
        Order::Lattice { n: side, d } => {
            // u_i bounds q over the closed upper orthant of i; requiring
            // q_i >= u_{i+(1,..,1)} is then equivalent to q_i >= q_j for
            // every strictly dominating j.
            let u: Vec<Variable> = (0..n).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
            let mut coords = vec![0usize; d as usize];
            for i in 0..n {
                if i > 0 {
                    increment(&mut coords, side);
                }
                rows.push((vec![(u[i], 1.0), (q[i], -1.0)], ComparisonOp::Ge, 0.0));
                for (axis, &c) in coords.iter().enumerate() {
                    if c + 1 < side {
                        let stride = side.pow(d - 1 - axis as u32);
                        rows.push((vec![(u[i], 1.0), (u[i + stride], -1.0)], ComparisonOp::Ge, 0.0));
                    }
                }
                if coords.iter().all(|&c| c + 1 < side) {
                    let diag = coords.iter().fold(0, |acc, &c| acc * side + c + 1);
                    rows.push((vec![(q[i], 1.0), (u[diag], -1.0)], ComparisonOp::Ge, 0.0));
                }
            }
        }
    }
    if let Some(seed) = shuffle {
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    for (expr, op, rhs) in &rows {
        lp.add_constraint(expr.as_slice(), *op, *rhs);
    }
    let solution = lp.solve().map_err(|e| Error::Lp(e.to_string()))?;
    // Recompute the objective from the returned primal point so that the
    // reported value is the distance to an explicit q.
    let qs: Vec<f64> = q.iter().map(|&v| solution[v]).collect();
    let direct: f64 = 0.5 * p.iter().zip(&qs).map(|(a, b)| (a - b).abs()).sum::<f64>();
    let objective = solution.objective();
    if (direct - objective).abs() > 1e-9 {
        return Err(Error::Lp(format!(
            "objective {objective} disagrees with primal distance {direct}"
        )));
    }
    Ok(DistanceCertificate {
        lower_bound: objective.max(0.0),
        per_unit_terms: Vec::new(),
        weight: 1.0,
        method: CertificateMethod::LpExact,
    })
}
