//! Paired-bin perturbation ensembles.
//!
//! An ensemble fixes a base distribution `Q` and a set of disjoint bin pairs
//! `(j, k)`, each carrying a kernel shape `(A, g)`. A draw samples one kernel
//! atom `δ` per pair and moves that much mass from `k` to `j`:
//! `p_j = Q_j + δ`, `p_k = Q_k - δ`. Bins outside every pair keep `Q`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{MomentKernel, Side};

/// Tolerance on the total mass of a distribution.
pub const MASS_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    masses: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        for (i, &p) in masses.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!("mass {p} at bin {i}")));
            }
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_SUM_TOL {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}")));
        }
        Ok(DiscreteDistribution { masses })
    }

    /// Scales nonnegative weights to sum to one.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        DiscreteDistribution {
            masses: vec![1.0 / n as f64; n],
        }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn into_masses(self) -> Vec<f64> {
        self.masses
    }

    pub fn tv_distance(&self, other: &DiscreteDistribution) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(0.5
            * self
                .masses
                .iter()
                .zip(&other.masses)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPerturbation {
    pub first: usize,
    pub second: usize,
    pub amplitude: f64,
    pub offset: f64,
}

impl PairPerturbation {
    pub fn kernel(&self, order: u32, side: Side) -> MomentKernel {
        MomentKernel::new(self.amplitude, self.offset, order, side)
    }
}

/// First failed condition of [`EnsembleSpec::validate`]. Pair numbers are
/// 1-based, bin numbers 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    BaseMass { bin: usize, mass: f64 },
    BaseSum { total: f64 },
    ZeroOrder,
    BinOutOfRange { pair: usize, bin: usize, len: usize },
    BinReused { pair: usize, bin: usize },
    NonFinite { pair: usize },
    AmplitudeBound { pair: usize, amplitude: f64, limit: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::BaseMass { bin, mass } => write!(f, "base mass {mass} at bin {bin}"),
            Violation::BaseSum { total } => write!(f, "base masses sum to {total}"),
            Violation::ZeroOrder => write!(f, "kernel order is zero"),
            Violation::BinOutOfRange { pair, bin, len } => {
                write!(f, "pair {pair} references bin {bin} outside a domain of {len}")
            }
            Violation::BinReused { pair, bin } => {
                write!(f, "pair {pair} reuses bin {bin}")
            }
            Violation::NonFinite { pair } => write!(f, "pair {pair} has a non-finite shape"),
            Violation::AmplitudeBound {
                pair,
                amplitude,
                limit,
            } => write!(
                f,
                "pair {pair}: |A| = {amplitude:e} exceeds min(Q_j, Q_k)/(1+|g|) = {limit:e}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub base: Vec<f64>,
    pub pairs: Vec<PairPerturbation>,
    pub order: u32,
}

/// A single draw: the perturbed distribution plus the realized shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub distribution: DiscreteDistribution,
    pub deltas: Vec<f64>,
    pub atoms: Vec<u32>,
}

impl EnsembleSpec {
    pub fn new(base: Vec<f64>, pairs: Vec<PairPerturbation>, order: u32) -> Result<Self> {
        let spec = EnsembleSpec { base, pairs, order };
        spec.validate().map_err(Error::InvalidSpec)?;
        Ok(spec)
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn kernel(&self, pair: usize, side: Side) -> MomentKernel {
        self.pairs[pair].kernel(self.order, side)
    }

    pub fn validate(&self) -> std::result::Result<(), Violation> {
        if self.order == 0 {
            return Err(Violation::ZeroOrder);
        }
        for (bin, &mass) in self.base.iter().enumerate() {
            if !mass.is_finite() || mass < 0.0 {
                return Err(Violation::BaseMass { bin, mass });
            }
        }
        let total: f64 = self.base.iter().sum();
        if (total - 1.0).abs() > MASS_SUM_TOL {
            return Err(Violation::BaseSum { total });
        }
        let len = self.base.len();
        let mut used = vec![false; len];
        for (idx, pp) in self.pairs.iter().enumerate() {
            let pair = idx + 1;
            for bin in [pp.first, pp.second] {
                if bin >= len {
                    return Err(Violation::BinOutOfRange { pair, bin, len });
                }
                if used[bin] {
                    return Err(Violation::BinReused { pair, bin });
                }
                used[bin] = true;
            }
            if !pp.amplitude.is_finite() || !pp.offset.is_finite() {
                return Err(Violation::NonFinite { pair });
            }
            let limit = self.base[pp.first].min(self.base[pp.second]) / (1.0 + pp.offset.abs());
            if pp.amplitude.abs() > limit {
                return Err(Violation::AmplitudeBound {
                    pair,
                    amplitude: pp.amplitude.abs(),
                    limit,
                });
            }
        }
        Ok(())
    }

    /// Applies one shift per pair. Values that land below zero by rounding
    /// alone (a few ulps of the base mass) are flushed to zero.
    pub fn apply_deltas(&self, deltas: &[f64]) -> Result<DiscreteDistribution> {
        if deltas.len() != self.pairs.len() {
            return Err(Error::LengthMismatch {
                expected: self.pairs.len(),
                got: deltas.len(),
            });
        }
        let mut masses = self.base.clone();
        for (pp, &d) in self.pairs.iter().zip(deltas) {
            masses[pp.first] = flush(self.base[pp.first] + d, self.base[pp.first]);
            masses[pp.second] = flush(self.base[pp.second] - d, self.base[pp.second]);
        }
        DiscreteDistribution::new(masses)
    }

    pub fn deltas_for_atoms(&self, side: Side, atoms: &[u32]) -> Vec<f64> {
        self.pairs
            .iter()
            .zip(atoms)
            .map(|(pp, &a)| pp.kernel(self.order, side).atom(a))
            .collect()
    }

    pub fn draw_with_deltas<R: Rng + ?Sized>(&self, side: Side, rng: &mut R) -> Result<Draw> {
        let atoms: Vec<u32> = self
            .pairs
            .iter()
            .map(|pp| pp.kernel(self.order, side).sample_index(rng))
            .collect();
        let deltas = self.deltas_for_atoms(side, &atoms);
        let distribution = self.apply_deltas(&deltas)?;
        Ok(Draw {
            distribution,
            deltas,
            atoms,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, side: Side, rng: &mut R) -> Result<DiscreteDistribution> {
        self.draw_with_deltas(side, rng).map(|d| d.distribution)
    }

    /// Number of equally likely atoms of one side, `m^s`, as a float.
    pub fn atom_count(&self) -> f64 {
        f64::from(self.order).powi(self.pairs.len() as i32)
    }

    /// Lazily walks every atom of one side in odometer order.
    pub fn enumerate_atoms(&self, side: Side, budget: u64) -> Result<AtomIter<'_>> {
        let count = self.atom_count();
        if count > budget as f64 {
            return Err(Error::BudgetExceeded {
                what: "atom enumeration",
                needed: count,
                budget: budget as f64,
            });
        }
        Ok(AtomIter {
            spec: self,
            kernels: self
                .pairs
                .iter()
                .map(|pp| pp.kernel(self.order, side))
                .collect(),
            digits: vec![0; self.pairs.len()],
            prob: 1.0 / count,
            done: false,
        })
    }
}

fn flush(value: f64, scale: f64) -> f64 {
    if value < 0.0 && value >= -8.0 * f64::EPSILON * scale {
        0.0
    } else {
        value
    }
}

pub struct AtomIter<'a> {
    spec: &'a EnsembleSpec,
    kernels: Vec<MomentKernel>,
    digits: Vec<u32>,
    prob: f64,
    done: bool,
}

impl Iterator for AtomIter<'_> {
    type Item = (f64, DiscreteDistribution);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let deltas: Vec<f64> = self
            .kernels
            .iter()
            .zip(&self.digits)
            .map(|(k, &a)| k.atom(a))
            .collect();
        let item = self.spec.apply_deltas(&deltas).ok().map(|d| (self.prob, d));

        self.done = true;
        for d in self.digits.iter_mut() {
            *d += 1;
            if *d < self.spec.order {
                self.done = false;
                break;
            }
            *d = 0;
        }
        item
    }
}

/// Histogram of `n` i.i.d. samples from `p`, drawn as sequential binomials.
pub fn sample_dataset<R: Rng + ?Sized>(p: &DiscreteDistribution, n: u64, rng: &mut R) -> Vec<u64> {
    multinomial(p.masses(), n, rng)
}

pub(crate) fn multinomial<R: Rng + ?Sized>(weights: &[f64], n: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; weights.len()];
    let mut left = n;
    let mut rest: f64 = weights.iter().sum();
    for (c, &w) in counts.iter_mut().zip(weights) {
        if left == 0 {
            break;
        }
        if rest <= 0.0 {
            break;
        }
        let p = (w / rest).clamp(0.0, 1.0);
        let draw = if p >= 1.0 {
            left
        } else {
            Binomial::new(left, p).expect("probability in [0, 1]").sample(rng)
        };
        *c = draw;
        left -= draw;
        rest -= w;
    }
    counts
}
