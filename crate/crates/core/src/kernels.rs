//! Moment-matched perturbation kernels.
//!
//! A kernel of order `m` is a uniform law on `m` atoms. On the yes side the
//! atoms are `A (cos(2πa/m) + g)` for `a = 0..m`; on the no side the angles
//! are shifted by half a step, `A (cos(2π(a + 1/2)/m) + g)`. The two laws share
//! their first `m - 1` raw moments and differ at order `m` by exactly
//! `A^m 2^(2-m)`.

use std::f64::consts::PI;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Yes,
    No,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Yes => Side::No,
            Side::No => Side::Yes,
        }
    }

    fn phase(self) -> f64 {
        match self {
            Side::Yes => 0.0,
            Side::No => 0.5,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Yes => "yes",
            Side::No => "no",
        })
    }
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "yes" => Ok(Side::Yes),
            "no" => Ok(Side::No),
            other => Err(format!("unknown side '{other}' (expected yes|no)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentKernel {
    pub amplitude: f64,
    pub offset: f64,
    pub order: u32,
    pub side: Side,
}

/// Extremes of the atom values and how many of them are negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignProfile {
    pub min: f64,
    pub max: f64,
    pub negative_atoms: usize,
}

impl MomentKernel {
    /// Panics if `order` is zero; every caller derives the order from
    /// [`crate::instances::select_m`] or a validated descriptor.
    pub fn new(amplitude: f64, offset: f64, order: u32, side: Side) -> Self {
        assert!(order > 0, "kernel order must be positive");
        MomentKernel {
            amplitude,
            offset,
            order,
            side,
        }
    }

    pub fn with_side(self, side: Side) -> Self {
        MomentKernel { side, ..self }
    }

    /// Cosine of the `a`-th atom angle.
    pub fn cosine(&self, a: u32) -> f64 {
        let m = f64::from(self.order);
        (2.0 * PI * (f64::from(a) + self.side.phase()) / m).cos()
    }

    pub fn atom(&self, a: u32) -> f64 {
        self.amplitude * (self.cosine(a) + self.offset)
    }

    /// All atoms with their probabilities, in angle order.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let w = 1.0 / f64::from(self.order);
        (0..self.order).map(|a| (self.atom(a), w)).collect()
    }

    pub fn moment(&self, k: u32) -> f64 {
        let w = 1.0 / f64::from(self.order);
        (0..self.order).map(|a| self.atom(a).powi(k as i32)).sum::<f64>() * w
    }

    pub fn sign_profile(&self) -> SignProfile {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut negative_atoms = 0;
        for a in 0..self.order {
            let v = self.atom(a);
            min = min.min(v);
            max = max.max(v);
            if v < 0.0 {
                negative_atoms += 1;
            }
        }
        SignProfile {
            min,
            max,
            negative_atoms,
        }
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.random_range(0..self.order)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.atom(self.sample_index(rng))
    }
}

/// `E_yes[c^j] - E_no[c^j]` for the unit cosine laws of order `m`.
///
/// The cosine power expands as `2^-j Σ_r C(j,r) e^{iθ(j-2r)}`; averaging over
/// the atoms keeps only frequencies divisible by `m`, and the half-step shift
/// flips the sign of the odd multiples. Zero for `j < m`, `2^(2-m)` at `j = m`.
pub fn cosine_moment_gap(m: u32, j: u32) -> f64 {
    if j < m {
        return 0.0;
    }
    let m = i64::from(m);
    let mut acc = 0.0;
    for r in 0..=j {
        let freq = i64::from(j) - 2 * i64::from(r);
        if freq % m == 0 && (freq / m).rem_euclid(2) == 1 {
            acc += statrs::function::factorial::binomial(u64::from(j), u64::from(r));
        }
    }
    acc * 2f64.powi(1 - j as i32)
}
