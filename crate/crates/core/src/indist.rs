//! Indistinguishability of the yes and no ensembles from samples.
//!
//! With `N` samples, the count `B_i` falling in pair `i` has the same law on
//! both sides, and given `B_i` the count in the first bin is a mixture of
//! binomials over the kernel atoms. The total variation between the sample
//! laws is at most the sum over pairs of the expected conditional TV, which
//! [`aggregate_tv_bound`] computes; [`mc_tv_estimate`] estimates the TV itself
//! by importance sampling on count profiles.
//!
//! Conditional TVs at feasible parameters are far below `f64::MIN_POSITIVE`,
//! so [`pair_tv_ln`] also evaluates the mixture difference through the
//! moment expansion `D(ℓ) = C(B,ℓ) Σ_{j≥m} α^j gap_j S_j(ℓ)`, where
//! `α = A/(Q_j+Q_k)` and `S_j(ℓ) = [t^j] (β+t)^ℓ (1-β-t)^(B-ℓ)`. Terms below
//! order `m` cancel exactly. The expansion is used only when its own rounding
//! estimate is small; otherwise the direct mixture difference is returned.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::ensembles::{EnsembleSpec, multinomial};
use crate::error::{Error, Result};
use crate::instances::{Family, InstanceParams};
use crate::kernels::Side;

/// Worker count used by [`mc_tv_estimate`]; results depend on it.
pub const MC_WORKERS: usize = 8;
pub const DEFAULT_TRIALS: u64 = 100_000;

/// Absolute rounding allowance of [`pair_tv_direct`]: both mixtures sum to
/// one, so the summed differences carry a few units of `1e-16`.
const DIRECT_ABS_ERR: f64 = 1e-14;
/// Direct TVs above this are returned without trying the expansion.
const DIRECT_TRUSTED: f64 = 1e-8;
/// Largest conditioned count for the expansion route.
const EXPANSION_MAX_COUNT: u64 = 4096;
/// Relative rounding estimate the expansion must meet to be used.
const EXPANSION_MAX_REL_ERR: f64 = 1e-6;
/// Per-pair evaluation points of the conditional TV in the aggregate bound.
const GRID_POINTS: usize = 96;
/// Atom-evaluations allowed for one conditional TV inside the aggregate
/// bound; beyond it the TV is charged at 1.
const TV_WORK_BUDGET: u64 = 1 << 25;
/// Largest sample count the aggregate bound accepts.
const MAX_SAMPLES: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq)]
pub struct PairConditionalPmf {
    pub pair: usize,
    pub count: u64,
    pub pmf: Vec<f64>,
}

fn pair_weight(spec: &EnsembleSpec, i: usize) -> f64 {
    let pp = &spec.pairs[i];
    spec.base[pp.first] + spec.base[pp.second]
}

/// Success probability of the first bin given the atom shift.
fn split_probability(spec: &EnsembleSpec, i: usize, delta: f64) -> f64 {
    let pp = &spec.pairs[i];
    ((spec.base[pp.first] + delta) / pair_weight(spec, i)).clamp(0.0, 1.0)
}

/// `ln C(b, l) + l ln u + (b - l) ln(1 - u)`, with `0 * ln 0 = 0`.
fn ln_binomial_term(ln_choose: f64, l: u64, b: u64, u: f64) -> f64 {
    ln_binomial_term_logs(ln_choose, l, b, (u.ln(), (1.0 - u).ln()))
}

/// As [`ln_binomial_term`], given `(ln u, ln(1 - u))`.
fn ln_binomial_term_logs(ln_choose: f64, l: u64, b: u64, (lu, lv): (f64, f64)) -> f64 {
    let a = if l == 0 { 0.0 } else { l as f64 * lu };
    let c = if l == b { 0.0 } else { (b - l) as f64 * lv };
    ln_choose + a + c
}

fn ln_choose_row(b: u64) -> Vec<f64> {
    (0..=b).map(|l| ln_binomial(b, l)).collect()
}

pub fn binomial_pmf(b: u64, u: f64) -> Vec<f64> {
    let row = ln_choose_row(b);
    (0..=b)
        .map(|l| ln_binomial_term(row[l as usize], l, b, u).exp())
        .collect()
}

pub fn pair_conditional_pmf(spec: &EnsembleSpec, i: usize, side: Side, count: u64) -> PairConditionalPmf {
    let row = ln_choose_row(count);
    let kernel = spec.kernel(i, side);
    let mut pmf = vec![0.0; count as usize + 1];
    let weight = 1.0 / f64::from(spec.order);
    for (delta, _) in kernel.atoms() {
        let u = split_probability(spec, i, delta);
        for (l, slot) in pmf.iter_mut().enumerate() {
            *slot += weight * ln_binomial_term(row[l], l as u64, count, u).exp();
        }
    }
    PairConditionalPmf {
        pair: i,
        count,
        pmf,
    }
}

/// Conditional TV from the two mixtures directly; absolute error is a few
/// units of `1e-16`. The sum runs over a window of `±(12 sd + 40)` around
/// every atom's mean, which drops mass far below that error.
pub fn pair_tv_direct(spec: &EnsembleSpec, i: usize, count: u64) -> f64 {
    let (yes, no) = (split_probabilities(spec, i, Side::Yes), split_probabilities(spec, i, Side::No));
    let (lo, hi) = atom_window(yes.iter().chain(&no), count);
    let logs = |us: &[f64]| -> Vec<(f64, f64)> { us.iter().map(|&u| (u.ln(), (1.0 - u).ln())).collect() };
    let (yes, no) = (logs(&yes), logs(&no));
    let weight = 1.0 / f64::from(spec.order);
    let mixture = |table: &[(f64, f64)], ln_choose: f64, l: u64| {
        table
            .iter()
            .map(|&t| ln_binomial_term_logs(ln_choose, l, count, t).exp())
            .sum::<f64>()
            * weight
    };
    0.5 * (lo..=hi)
        .map(|l| {
            let ln_choose = ln_binomial(count, l);
            (mixture(&yes, ln_choose, l) - mixture(&no, ln_choose, l)).abs()
        })
        .sum::<f64>()
}

/// Smallest range of first-bin counts covering `±(12 sd + 40)` around the
/// mean of every split probability in `us`.
fn atom_window<'a>(us: impl Iterator<Item = &'a f64>, count: u64) -> (u64, u64) {
    us.fold((count, 0), |(lo, hi), &u| {
        let (a, b) = binomial_support(count, u);
        (lo.min(a), hi.max(b))
    })
}

fn split_probabilities(spec: &EnsembleSpec, i: usize, side: Side) -> Vec<f64> {
    spec.kernel(i, side)
        .atoms()
        .iter()
        .map(|&(d, _)| split_probability(spec, i, d))
        .collect()
}

/// Atom-evaluations needed by [`pair_tv_direct`] at `count`.
fn direct_work(spec: &EnsembleSpec, i: usize, count: u64) -> u64 {
    let (yes, no) = (split_probabilities(spec, i, Side::Yes), split_probabilities(spec, i, Side::No));
    let (lo, hi) = atom_window(yes.iter().chain(&no), count);
    2 * u64::from(spec.order) * (hi - lo + 1)
}

/// `ln(E_yes[c^j] - E_no[c^j])` for the unit cosine laws of order `m`, or
/// `-inf` when the gap is zero (`j < m` or `j - m` odd).
pub fn ln_cosine_moment_gap(m: u32, j: u64) -> f64 {
    let m = i64::from(m);
    let j = j as i64;
    let mut terms = Vec::new();
    for r in 0..=j {
        let freq = j - 2 * r;
        if freq % m == 0 && (freq / m).rem_euclid(2) == 1 {
            terms.push(ln_binomial(j as u64, r as u64));
        }
    }
    log_sum_exp(&terms) + (1 - j) as f64 * std::f64::consts::LN_2
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log of the conditional TV through the moment expansion, scaled by
/// `|α|^-m`, with a relative rounding estimate. `None` if the shape leaves
/// the open unit interval for the base split.
fn expansion_scaled(spec: &EnsembleSpec, i: usize, count: u64) -> Option<(f64, f64)> {
    let pp = &spec.pairs[i];
    let m = spec.order;
    let w = pair_weight(spec, i);
    let alpha = pp.amplitude / w;
    let beta = (spec.base[pp.first] + pp.amplitude * pp.offset) / w;
    let gamma = (spec.base[pp.second] - pp.amplitude * pp.offset) / w;
    if !(beta > 0.0 && gamma > 0.0) || alpha == 0.0 {
        return None;
    }
    let b = count;
    if b < u64::from(m) {
        return Some((f64::NEG_INFINITY, 0.0));
    }
    let (lb, lg, la) = (beta.ln(), gamma.ln(), alpha.abs().ln());
    let ln_fact: Vec<f64> = (0..=b).map(ln_factorial).collect();
    let ln_choose = |n: u64, k: u64| ln_fact[n as usize] - ln_fact[k as usize] - ln_fact[(n - k) as usize];

    // Orders j = m, m+2, ... until the crude size bound |α|^(j-m) C(B,j)/C(B,m)
    // drops out of double precision.
    let mut orders = Vec::new();
    let mut j = u64::from(m);
    while j <= b {
        let size = (j - u64::from(m)) as f64 * la + ln_choose(b, j) - ln_choose(b, u64::from(m));
        if j > u64::from(m) && size < -50.0 {
            break;
        }
        orders.push((j, ln_cosine_moment_gap(m, j) + (j - u64::from(m)) as f64 * la));
        j += 2;
    }

    let mut total = 0.0;
    let mut abs_total = 0.0;
    for l in 0..=b {
        let outer = ln_choose(b, l);
        let mut d = 0.0;
        let mut d_abs = 0.0;
        for &(j, ln_coef) in &orders {
            let r_lo = j.saturating_sub(b - l);
            let r_hi = j.min(l);
            for r in r_lo..=r_hi {
                let e_b = l - r;
                let e_g = b - l - (j - r);
                let mut lt = outer + ln_coef + ln_choose(l, r) + ln_choose(b - l, j - r);
                if e_b > 0 {
                    lt += e_b as f64 * lb;
                }
                if e_g > 0 {
                    lt += e_g as f64 * lg;
                }
                let t = lt.exp();
                // Sign (-1)^(j-r) from (γ - t)^(B-ℓ).
                if (j - r) % 2 == 0 {
                    d += t;
                } else {
                    d -= t;
                }
                d_abs += t;
            }
        }
        total += d.abs();
        abs_total += d_abs;
    }
    let scaled = 0.5 * total;
    if scaled == 0.0 {
        return Some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let rel_err = 64.0 * f64::EPSILON * abs_total / total;
    Some((scaled.ln(), rel_err))
}

/// Natural log of the conditional TV between `X_i^yes` and `X_i^no` given
/// `count` samples in the pair; `-inf` when it is exactly zero.
pub fn pair_tv_ln(spec: &EnsembleSpec, i: usize, count: u64) -> f64 {
    let direct = pair_tv_direct(spec, i, count);
    if direct >= DIRECT_TRUSTED || count > EXPANSION_MAX_COUNT {
        return direct.ln();
    }
    match expansion_scaled(spec, i, count) {
        Some((ln_scaled, rel_err)) if rel_err <= EXPANSION_MAX_REL_ERR || ln_scaled == f64::NEG_INFINITY => {
            let alpha = spec.pairs[i].amplitude / pair_weight(spec, i);
            ln_scaled + f64::from(spec.order) * alpha.abs().ln()
        }
        _ => direct.ln(),
    }
}

pub fn pair_tv(spec: &EnsembleSpec, i: usize, count: u64) -> f64 {
    pair_tv_ln(spec, i, count).exp()
}

/// Upper bound on the conditional TV for the aggregate: the direct value plus
/// its rounding allowance, skipping the expansion. Exact zero below the order
/// and for unperturbed pairs.
fn pair_tv_upper(spec: &EnsembleSpec, i: usize, count: u64) -> f64 {
    if count < u64::from(spec.order) || spec.pairs[i].amplitude == 0.0 {
        return 0.0;
    }
    let direct = pair_tv_direct(spec, i, count);
    (direct * (1.0 + 1e-10) + DIRECT_ABS_ERR).min(1.0)
}

/// `Bin(n, w)` masses on `lo..=hi`, rescaled to sum to one. For large `n`
/// the log-binomial coefficients carry rounding of order `1e-16 n`, which the
/// rescaling removes to first order; the neglected tail is bounded apart.
fn binomial_window(n: u64, w: f64, lo: u64, hi: u64) -> Vec<f64> {
    let logs = (w.ln(), (1.0 - w).ln());
    let mut pmf: Vec<f64> = (lo..=hi)
        .map(|b| ln_binomial_term_logs(ln_binomial(n, b), b, n, logs).exp())
        .collect();
    let total: f64 = pmf.iter().sum();
    if total > 0.0 {
        pmf.iter_mut().for_each(|q| *q /= total);
    }
    pmf
}

fn support_reach(n: u64, w: f64) -> (f64, f64) {
    let variance = n as f64 * w * (1.0 - w);
    (n as f64 * w, 12.0 * variance.sqrt() + 40.0)
}

/// Range of `Bin(n, w)` holding all but a negligible tail.
fn binomial_support(n: u64, w: f64) -> (u64, u64) {
    let (mean, reach) = support_reach(n, w);
    let lo = (mean - reach).floor().max(0.0) as u64;
    let hi = ((mean + reach).ceil() as u64).min(n);
    (lo, hi)
}

/// Bernstein bound on the mass of `Bin(n, w)` outside [`binomial_support`].
/// Summing the window and subtracting from 1 would instead leave the
/// rounding error of the window sum, which is far larger.
fn outside_support_bound(n: u64, w: f64) -> f64 {
    let (lo, hi) = binomial_support(n, w);
    if lo == 0 && hi == n {
        return 0.0;
    }
    let (_, t) = support_reach(n, w);
    let variance = n as f64 * w * (1.0 - w);
    let one_side = (-t * t / (2.0 * (variance + t / 3.0))).exp();
    (f64::from(u8::from(lo > 0)) + f64::from(u8::from(hi < n))) * one_side
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrudeBound {
    /// `B = 2 max_i w_i N`.
    pub threshold: f64,
    /// Union bound on `Pr(∃ i: B_i > B)`.
    pub tail: f64,
    /// `Σ_i max_{b ≤ B} TV_i(b)`.
    pub max_sum: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvReport {
    pub n_samples: u64,
    /// `Σ_i E_{B_i}[TV_i(B_i)]`.
    pub marginal_bound: f64,
    pub per_pair: Vec<f64>,
    pub crude: CrudeBound,
    pub warnings: Vec<String>,
}

/// Upper bound on `d_TV(D_yes^N, D_no^N)`.
///
/// Where the binomial window of `B_i` is wider than a fixed grid, the
/// conditional TV is evaluated on grid points and each block is charged the
/// value at its right end; the conditional TV is nondecreasing in the count
/// (dropping a uniformly random sample maps `B+1` samples to `B`), so this
/// stays an upper bound. Conditional TVs are taken from the direct mixture
/// difference plus its rounding allowance, so values far below `1e-14` are
/// not resolved here (use [`pair_tv`] for those). Mass outside the window is
/// bounded by a Bernstein tail and charged at TV = 1.
pub fn aggregate_tv_bound(spec: &EnsembleSpec, n_samples: u64) -> Result<TvReport> {
    if n_samples > MAX_SAMPLES {
        return Err(Error::BudgetExceeded {
            what: "sample count",
            needed: n_samples as f64,
            budget: MAX_SAMPLES as f64,
        });
    }
    let s = spec.pairs.len();
    let weights: Vec<f64> = (0..s).map(|i| pair_weight(spec, i)).collect();
    let mut warnings = Vec::new();
    if s > 0 {
        let min_w = weights.iter().copied().fold(f64::INFINITY, f64::min);
        let needed = 6.0 * (s as f64).ln() / min_w;
        if (n_samples as f64) <= needed {
            warnings.push(format!(
                "N = {n_samples} does not exceed 6 ln(s)/min w = {needed:.4e}; the bound is still valid"
            ));
        }
    }
    let max_w = weights.iter().copied().fold(0.0, f64::max);
    let threshold = 2.0 * max_w * n_samples as f64;
    let b_cap = (threshold.floor() as u64).min(n_samples);

    let per_pair: Vec<(f64, f64, f64, u64)> = (0..s)
        .into_par_iter()
        .map(|i| {
            let w = weights[i];
            let mut charged = 0u64;
            // Conditional TV, or 1 when it is too costly to evaluate.
            let mut tv_at = |b: u64| {
                if direct_work(spec, i, b) > TV_WORK_BUDGET {
                    charged += 1;
                    1.0
                } else {
                    pair_tv_upper(spec, i, b)
                }
            };
            let (lo, hi) = binomial_support(n_samples, w);
            let pmf = binomial_window(n_samples, w, lo, hi);
            let outside = outside_support_bound(n_samples, w);
            let marginal = if (hi - lo + 1) as usize <= GRID_POINTS {
                pmf.iter()
                    .enumerate()
                    .map(|(k, &q)| q * tv_at(lo + k as u64))
                    .sum::<f64>()
            } else {
                let width = hi - lo + 1;
                let step = width.div_ceil(GRID_POINTS as u64);
                let mut acc = 0.0;
                let mut start = lo;
                let mut saturated = false;
                while start <= hi {
                    let end = (start + step - 1).min(hi);
                    // Nondecreasing in the count, so once at 1 it stays there.
                    let tv = if saturated { 1.0 } else { tv_at(end) };
                    saturated = tv >= 1.0 - 1e-12;
                    let mass: f64 = pmf[(start - lo) as usize..=(end - lo) as usize].iter().sum();
                    acc += mass * tv;
                    start = end + 1;
                }
                acc
            };
            // Mass outside the window is charged to the tail wholesale.
            let tail_above: f64 = if b_cap >= n_samples {
                0.0
            } else if b_cap < lo {
                1.0
            } else if b_cap >= hi {
                outside
            } else {
                pmf[(b_cap + 1 - lo) as usize..].iter().sum::<f64>() + outside
            };
            let cap_tv = tv_at(b_cap);
            ((marginal + outside).min(1.0), tail_above.min(1.0), cap_tv, charged)
        })
        .collect();

    let charged: u64 = per_pair.iter().map(|p| p.3).sum();
    if charged > 0 {
        warnings.push(format!(
            "{charged} conditional TV evaluations exceeded the work budget and were charged at 1"
        ));
    }
    let marginal_bound: f64 = per_pair.iter().map(|p| p.0).sum();
    let tail: f64 = per_pair.iter().map(|p| p.1).sum();
    let max_sum: f64 = per_pair.iter().map(|p| p.2).sum();
    Ok(TvReport {
        n_samples,
        marginal_bound,
        per_pair: per_pair.iter().map(|p| p.0).collect(),
        crude: CrudeBound {
            threshold,
            tail,
            max_sum,
            total: tail + max_sum,
        },
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub conf_radius: f64,
    pub trials: u64,
}

struct Acc {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Acc {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Acc) -> Acc {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        Acc { count, mean, m2 }
    }
}

/// Per-pair `ln u` and `ln(1-u)` for every atom of both sides.
struct PairTables {
    yes: Vec<(f64, f64)>,
    no: Vec<(f64, f64)>,
    yes_u: Vec<f64>,
}

fn pair_tables(spec: &EnsembleSpec) -> Vec<PairTables> {
    (0..spec.pairs.len())
        .map(|i| {
            let side_table = |side| {
                spec.kernel(i, side)
                    .atoms()
                    .iter()
                    .map(|&(d, _)| {
                        let u = split_probability(spec, i, d);
                        (u.ln(), (1.0 - u).ln())
                    })
                    .collect::<Vec<_>>()
            };
            PairTables {
                yes: side_table(Side::Yes),
                no: side_table(Side::No),
                yes_u: spec
                    .kernel(i, Side::Yes)
                    .atoms()
                    .iter()
                    .map(|&(d, _)| split_probability(spec, i, d))
                    .collect(),
            }
        })
        .collect()
}

fn ln_mixture(table: &[(f64, f64)], l: u64, b: u64, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    for &(lu, lv) in table {
        let a = if l == 0 { 0.0 } else { l as f64 * lu };
        let c = if l == b { 0.0 } else { (b - l) as f64 * lv };
        scratch.push(a + c);
    }
    log_sum_exp(scratch)
}

fn mc_trial<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    tables: &[PairTables],
    weights: &[f64],
    n_samples: u64,
    rng: &mut R,
    scratch: &mut Vec<f64>,
) -> Result<f64> {
    let counts = multinomial(weights, n_samples, rng);
    let mut log_ratio = 0.0;
    for (i, t) in tables.iter().enumerate() {
        let b = counts[i];
        let atom = rng.random_range(0..spec.order) as usize;
        let u = t.yes_u[atom];
        let l = if b == 0 {
            0
        } else if u >= 1.0 {
            b
        } else if u <= 0.0 {
            0
        } else {
            Binomial::new(b, u).expect("probability in [0, 1]").sample(rng)
        };
        let ly = ln_mixture(&t.yes, l, b, scratch);
        if ly == f64::NEG_INFINITY {
            return Err(Error::DegenerateLikelihood);
        }
        log_ratio += ln_mixture(&t.no, l, b, scratch) - ly;
    }
    Ok(if log_ratio < 0.0 { -log_ratio.exp_m1() } else { 0.0 })
}

/// Monte Carlo estimate of `d_TV(D_yes^N, D_no^N)` as
/// `E_yes[(1 - L_no/L_yes)^+]` over sampled count profiles, with a 95%
/// normal confidence radius. Worker `w` draws from stream `w` of a ChaCha
/// generator keyed by `seed`.
pub fn mc_tv_estimate(spec: &EnsembleSpec, n_samples: u64, trials: u64, seed: u64) -> Result<McEstimate> {
    mc_tv_estimate_with_workers(spec, n_samples, trials, seed, MC_WORKERS)
}

pub fn mc_tv_estimate_with_workers(
    spec: &EnsembleSpec,
    n_samples: u64,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<McEstimate> {
    if trials == 0 || workers == 0 {
        return Err(Error::InvalidParameter("trials and workers must be positive".into()));
    }
    let tables = pair_tables(spec);
    let mut weights: Vec<f64> = (0..spec.pairs.len()).map(|i| pair_weight(spec, i)).collect();
    let paired: f64 = weights.iter().sum();
    weights.push((1.0 - paired).max(0.0));

    let per_worker: Vec<Result<Acc>> = (0..workers)
        .into_par_iter()
        .map(|w| {
            let share = trials / workers as u64 + u64::from((w as u64) < trials % workers as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(w as u64);
            let mut acc = Acc {
                count: 0,
                mean: 0.0,
                m2: 0.0,
            };
            let mut scratch = Vec::with_capacity(spec.order as usize);
            for _ in 0..share {
                acc.push(mc_trial(spec, &tables, &weights, n_samples, &mut rng, &mut scratch)?);
            }
            Ok(acc)
        })
        .collect();

    let mut total = Acc {
        count: 0,
        mean: 0.0,
        m2: 0.0,
    };
    for acc in per_worker {
        total = total.merge(acc?);
    }
    let var = if total.count > 1 {
        total.m2 / (total.count - 1) as f64
    } else {
        0.0
    };
    Ok(McEstimate {
        estimate: total.mean,
        conf_radius: 1.96 * (var / total.count as f64).sqrt(),
        trials: total.count,
    })
}

/// Constants standing in for the four `O(·)` terms of the sample bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop1Knobs {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl Default for Prop1Knobs {
    fn default() -> Self {
        Prop1Knobs {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub s: usize,
    pub m: u32,
    pub n_samples: f64,
    pub b: f64,
    pub x_max: f64,
    pub min_weight: f64,
    pub max_weight: f64,
    /// Constant in the hypothesis `m >= C ln s`.
    pub c: f64,
    pub knobs: Prop1Knobs,
}

impl BoundInputs {
    pub fn from_spec(spec: &EnsembleSpec, n_samples: f64, c: f64, knobs: Prop1Knobs) -> Self {
        let weights: Vec<f64> = (0..spec.pairs.len()).map(|i| pair_weight(spec, i)).collect();
        let max_weight = weights.iter().copied().fold(0.0, f64::max);
        BoundInputs {
            s: spec.pairs.len(),
            m: spec.order,
            n_samples,
            b: 2.0 * max_weight * n_samples,
            x_max: crate::instances::x_max(spec),
            min_weight: weights.iter().copied().fold(f64::INFINITY, f64::min),
            max_weight,
            c,
            knobs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Bound {
    pub value: f64,
    /// Log of the second summand, which can underflow.
    pub ln_product_term: f64,
    pub violations: Vec<String>,
}

/// `c1/s + m^4 s c2 (√(B ln s) + xB) (1+x)^(c3 (√(B ln s) + xB)) (c4 (√(x²B ln s) + x²B))^m`,
/// evaluated in log space.
pub fn prop1_bound(inputs: &BoundInputs) -> Prop1Bound {
    let BoundInputs {
        s,
        m,
        n_samples,
        b,
        x_max: x,
        min_weight,
        c,
        knobs,
        ..
    } = *inputs;
    let mut violations = Vec::new();
    if !(x < 0.1) {
        violations.push(format!("x_max = {x:.4e} is not below 1/10"));
    }
    let ln_s = (s.max(1) as f64).ln();
    if f64::from(m) < c * ln_s {
        violations.push(format!("m = {m} is below C ln s = {:.4}", c * ln_s));
    }
    if !(n_samples > 6.0 * ln_s / min_weight) {
        violations.push(format!(
            "N = {n_samples:.4e} does not exceed 6 ln(s)/min w = {:.4e}",
            6.0 * ln_s / min_weight
        ));
    }
    let spread = (b * ln_s).sqrt() + x * b;
    let inner = knobs.c4 * ((x * x * b * ln_s).sqrt() + x * x * b);
    let ln_product_term = 4.0 * f64::from(m).ln()
        + (s as f64).ln()
        + (knobs.c2 * spread).ln()
        + knobs.c3 * spread * x.ln_1p()
        + f64::from(m) * inner.ln();
    let ln_product_term = if ln_product_term.is_nan() {
        f64::NEG_INFINITY
    } else {
        ln_product_term
    };
    Prop1Bound {
        value: knobs.c1 / s.max(1) as f64 + ln_product_term.exp(),
        ln_product_term,
        violations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremKnobs {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl Default for TheoremKnobs {
    fn default() -> Self {
        TheoremKnobs {
            k1: 1.0,
            k2: 1.0,
            k3: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// The domain size attains the minimum.
    N,
    /// The ε-dependent cap attains the minimum.
    EpsilonCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremBound {
    pub samples: f64,
    pub branch: Branch,
    pub cap: f64,
    /// `d^-d`, 1 for one-dimensional families.
    pub dimension_factor: f64,
}

/// Sample-complexity lower bound with the hidden constants set by `knobs`.
pub fn theorem_lower_bound(params: &InstanceParams, knobs: &TheoremKnobs) -> TheoremBound {
    let eps = params.epsilon;
    let l = params.log_inv_eps();
    let n = params.n as f64;
    match params.family {
        Family::Monotone1d | Family::MonotoneDd => {
            let d = f64::from(params.d);
            let cap = d / (eps * l.powi(3));
            let (side, branch) = if n <= cap { (n, Branch::N) } else { (cap, Branch::EpsilonCap) };
            let dimension_factor = d.powf(-d);
            let samples = knobs.k1 * 2f64.powf(-knobs.k2 * d) * dimension_factor / (eps * eps * l.powi(7))
                * side.powf(d);
            TheoremBound {
                samples,
                branch,
                cap,
                dimension_factor,
            }
        }
        Family::LogConcave => {
            let cap = 1.0 / (eps.sqrt() * l.powf(1.5));
            let (side, branch) = if n <= cap { (n, Branch::N) } else { (cap, Branch::EpsilonCap) };
            TheoremBound {
                samples: knobs.k3 * side / (eps * eps * l.powi(7)),
                branch,
                cap,
                dimension_factor: 1.0,
            }
        }
    }
}
