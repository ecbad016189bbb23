//! Concrete hard-instance families.
//!
//! * `Monotone1d`: paired bins `(2i-1, 2i)` on a staircase base that drops by
//!   `1/n²` between pairs.
//! * `MonotoneDd`: the same idea on `[n]^d`, with each cube of side `2d` split
//!   into a first and second halfcube along the first axis.
//! * `LogConcave`: a discretized half-Gaussian with pairs `(6i-4, 6i-1)` and a
//!   deterministic shift that makes the middle of each triple `6i-2..6i` tight.
//!
//! Every builder checks its feasibility inequality explicitly and reports the
//! violated inequality instead of emitting an ensemble that breaks the
//! family property on the yes side.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ensembles::{DiscreteDistribution, EnsembleSpec, PairPerturbation};
use crate::error::{Error, Result};

pub const DEFAULT_C: f64 = 4.0;

/// Largest lattice a lift will materialize.
pub const LATTICE_BUDGET: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "monotone1d")]
    Monotone1d,
    #[serde(rename = "monotoneDd")]
    MonotoneDd,
    #[serde(rename = "logconcave")]
    LogConcave,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Monotone1d => "monotone1d",
            Family::MonotoneDd => "monotoneDd",
            Family::LogConcave => "logconcave",
        }
    }

    fn min_extent(self, d: u32) -> usize {
        match self {
            Family::Monotone1d => 4,
            Family::MonotoneDd => 2 * d as usize,
            Family::LogConcave => 6,
        }
    }

    fn step(self, d: u32) -> usize {
        match self {
            Family::Monotone1d => 2,
            Family::MonotoneDd => 2 * d as usize,
            Family::LogConcave => 6,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "monotone1d" => Ok(Family::Monotone1d),
            "monotoneDd" | "monotonedd" => Ok(Family::MonotoneDd),
            "logconcave" => Ok(Family::LogConcave),
            other => Err(format!(
                "unknown family '{other}' (expected monotone1d|monotoneDd|logconcave)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub family: Family,
    pub epsilon: f64,
    pub n: usize,
    pub d: u32,
    pub c: f64,
}

impl InstanceParams {
    pub fn new(family: Family, epsilon: f64, n: usize, d: u32, c: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1/2), got {epsilon}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
        }
        if d == 0 {
            return Err(Error::InvalidParameter("d must be positive".into()));
        }
        if family != Family::MonotoneDd && d != 1 {
            return Err(Error::InvalidParameter(format!(
                "{family} is one-dimensional, got d = {d}"
            )));
        }
        if !(c >= 1.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("C must be at least 1, got {c}")));
        }
        Ok(InstanceParams {
            family,
            epsilon,
            n,
            d,
            c,
        })
    }

    pub fn log_inv_eps(&self) -> f64 {
        (1.0 / self.epsilon).ln()
    }
}

/// Smallest odd integer strictly greater than `x` (and at least 1).
pub fn smallest_odd_above(x: f64) -> u32 {
    if x < 1.0 {
        return 1;
    }
    let mut m = x.floor() as u32 + 1;
    if m.is_multiple_of(2) {
        m += 1;
    }
    m
}

pub fn select_m(epsilon: f64, c: f64) -> u32 {
    smallest_odd_above(c * (1.0 / epsilon).ln())
}

/// Upper limit on the instance extent before padding.
pub fn domain_cap(params: &InstanceParams) -> f64 {
    let l = params.log_inv_eps();
    let (c, eps) = (params.c, params.epsilon);
    match params.family {
        Family::Monotone1d => 1.0 / (c.powi(4) * l.powi(3) * eps),
        Family::MonotoneDd => f64::from(params.d) / ((c * c * l).powi(3) * eps),
        Family::LogConcave => 1.0 / (c * c * eps.sqrt() * l.powf(1.5)),
    }
}

pub fn pad_domain(params: &InstanceParams) -> Result<usize> {
    let family = params.family;
    let cap = domain_cap(params);
    let limit = if cap >= params.n as f64 {
        params.n
    } else {
        cap.floor() as usize
    };
    let step = family.step(params.d);
    let n0 = limit / step * step;
    let min = family.min_extent(params.d);
    if n0 < min {
        return Err(Error::Infeasible(format!(
            "{family}: padded extent {n0} is below the minimum {min} (n = {}, cap = {cap:.6e})",
            params.n
        )));
    }
    Ok(n0)
}

/// Cube tiling of `[n]^d` by cubes of side `2d`, embedded in `[domain]^d`.
/// Halfcube `2c` is the first half of cube `c` (first coordinate in the lower
/// half of the cube), halfcube `2c + 1` the second. Cubes are numbered
/// row-major with the first coordinate most significant, as are lattice bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfcubeLayout {
    pub n: usize,
    pub d: u32,
    pub domain: usize,
}

impl HalfcubeLayout {
    pub fn new(n: usize, d: u32, domain: usize) -> Result<Self> {
        let side = 2 * d as usize;
        if d == 0 || n == 0 || !n.is_multiple_of(side) || domain < n {
            return Err(Error::InvalidParameter(format!(
                "halfcube layout needs 2d | n and n <= domain (n = {n}, d = {d}, domain = {domain})"
            )));
        }
        Ok(HalfcubeLayout { n, d, domain })
    }

    pub fn cube_side(&self) -> usize {
        2 * self.d as usize
    }

    pub fn cubes_per_axis(&self) -> usize {
        self.n / self.cube_side()
    }

    pub fn cube_count(&self) -> usize {
        self.cubes_per_axis().pow(self.d)
    }

    pub fn halfcube_count(&self) -> usize {
        2 * self.cube_count()
    }

    /// Lattice bins per halfcube, `(2d)^d / 2`.
    pub fn halfcube_size(&self) -> usize {
        self.cube_side().pow(self.d) / 2
    }

    pub fn lattice_size(&self) -> Result<usize> {
        self.domain
            .checked_pow(self.d)
            .filter(|&s| s <= LATTICE_BUDGET)
            .ok_or(Error::BudgetExceeded {
                what: "lattice size",
                needed: (self.domain as f64).powi(self.d as i32),
                budget: LATTICE_BUDGET as f64,
            })
    }

    /// 1-based cube coordinates of cube `c`.
    pub fn cube_coords(&self, c: usize) -> Vec<usize> {
        unflatten(c, self.cubes_per_axis(), self.d)
            .into_iter()
            .map(|x| x + 1)
            .collect()
    }

    /// Halfcube containing the 1-based lattice point, if it lies in `[n]^d`.
    pub fn halfcube_of(&self, point: &[usize]) -> Option<usize> {
        let side = self.cube_side();
        if point.iter().any(|&x| x == 0 || x > self.n) {
            return None;
        }
        let cube: Vec<usize> = point.iter().map(|&x| (x - 1) / side).collect();
        let c = flatten(&cube, self.cubes_per_axis());
        let first = (point[0] - 1) % side < self.d as usize;
        Some(2 * c + usize::from(!first))
    }

    /// 0-based lattice indices (in `[domain]^d`) of the bins of halfcube `h`.
    pub fn halfcube_bins(&self, h: usize) -> Vec<usize> {
        let side = self.cube_side();
        let d = self.d as usize;
        let corner: Vec<usize> = self
            .cube_coords(h / 2)
            .iter()
            .map(|&i| (i - 1) * side)
            .collect();
        let lo0 = if h.is_multiple_of(2) { 0 } else { d };
        let tail = side.pow(self.d - 1);
        let mut out = Vec::with_capacity(self.halfcube_size());
        for local in 0..self.halfcube_size() {
            let mut offs = vec![lo0 + local / tail];
            offs.extend(unflatten(local % tail, side, self.d - 1));
            let point: Vec<usize> = corner.iter().zip(&offs).map(|(c, o)| c + o).collect();
            out.push(flatten(&point, self.domain));
        }
        out
    }
}

fn unflatten(mut idx: usize, base: usize, d: u32) -> Vec<usize> {
    let mut out = vec![0; d as usize];
    for slot in out.iter_mut().rev() {
        *slot = idx % base;
        idx /= base;
    }
    out
}

pub(crate) fn flatten(coords: &[usize], base: usize) -> usize {
    coords.iter().fold(0, |acc, &x| acc * base + x)
}

pub fn lift_halfcube(layout: &HalfcubeLayout, p: &DiscreteDistribution) -> Result<DiscreteDistribution> {
    if p.len() != layout.halfcube_count() {
        return Err(Error::LengthMismatch {
            expected: layout.halfcube_count(),
            got: p.len(),
        });
    }
    let mut out = vec![0.0; layout.lattice_size()?];
    let size = layout.halfcube_size() as f64;
    for (h, &mass) in p.masses().iter().enumerate() {
        let share = mass / size;
        for bin in layout.halfcube_bins(h) {
            out[bin] = share;
        }
    }
    DiscreteDistribution::new(out)
}

/// A forged ensemble together with everything needed to interpret it.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub params: InstanceParams,
    pub m: u32,
    pub n0: usize,
    pub spec: EnsembleSpec,
    pub layout: Option<HalfcubeLayout>,
    /// Log-concave only: the deterministic per-pair shift `C_i/n³`.
    pub shifts: Option<Vec<f64>>,
}

impl Instance {
    /// Largest `|A_i|(1+|g_i|) / min(Q_j, Q_k)` over pairs.
    pub fn x_max(&self) -> f64 {
        x_max(&self.spec)
    }

    /// Both sides of the family's amplitude inequality, `lhs < rhs`.
    pub fn feasibility_margin(&self) -> (f64, f64) {
        amplitude_inequality(&self.params, self.m, self.n0)
    }
}

/// Left and right side of the amplitude condition each builder enforces.
pub fn amplitude_inequality(params: &InstanceParams, m: u32, n0: usize) -> (f64, f64) {
    let nf = n0 as f64;
    let m3 = f64::from(m).powi(3);
    let eps = params.epsilon;
    match params.family {
        Family::Monotone1d => (8.0 * m3 * eps / nf, 1.0 / (4.0 * nf * nf)),
        Family::MonotoneDd => {
            let d = params.d as i32;
            let df = f64::from(params.d);
            (
                2f64.powi(d + 2) * m3 * df.powi(d) * eps / nf.powi(d),
                2f64.powi(d - 3) * df.powi(d + 1) / nf.powi(d + 1),
            )
        }
        Family::LogConcave => {
            let (q, _) = half_gaussian(n0);
            let min_shift = (1..=n0 / 6)
                .map(|i| q[6 * i - 2] - (q[6 * i - 1] * q[6 * i - 3]).sqrt())
                .fold(f64::INFINITY, f64::min);
            (2.0 * params.c * m3 * eps / nf, min_shift)
        }
    }
}

pub fn x_max(spec: &EnsembleSpec) -> f64 {
    spec.pairs
        .iter()
        .map(|pp| {
            pp.amplitude.abs() * (1.0 + pp.offset.abs())
                / spec.base[pp.first].min(spec.base[pp.second])
        })
        .fold(0.0, f64::max)
}

pub fn build(params: &InstanceParams) -> Result<Instance> {
    match params.family {
        Family::Monotone1d => build_monotone_1d(params),
        Family::MonotoneDd => build_monotone_dd(params),
        Family::LogConcave => build_logconcave(params),
    }
}

fn finish(spec: EnsembleSpec) -> Result<EnsembleSpec> {
    spec.validate().map_err(Error::InvalidSpec)?;
    Ok(spec)
}

pub fn build_monotone_1d(params: &InstanceParams) -> Result<Instance> {
    if params.family != Family::Monotone1d {
        return Err(Error::InvalidParameter(format!("expected monotone1d, got {}", params.family)));
    }
    let n0 = pad_domain(params)?;
    let m = select_m(params.epsilon, params.c);
    let nf = n0 as f64;
    let amplitude = 8.0 * f64::from(m).powi(3) * params.epsilon / nf;
    let limit = 1.0 / (4.0 * nf * nf);
    if amplitude >= limit {
        return Err(Error::Infeasible(format!(
            "monotone1d: A = 8m^3 eps/n = {amplitude:.6e} must be below 1/(4n^2) = {limit:.6e} \
             (m = {m}, n = {n0}, eps = {:e})",
            params.epsilon
        )));
    }
    let g = (PI / f64::from(m)).cos();
    let mut base = vec![0.0; params.n];
    let mut pairs = Vec::with_capacity(n0 / 2);
    for i in 1..=n0 / 2 {
        let q = 5.0 / (4.0 * nf) + 1.0 / (2.0 * nf * nf) - i as f64 / (nf * nf);
        base[2 * i - 2] = q;
        base[2 * i - 1] = q;
        pairs.push(PairPerturbation {
            first: 2 * i - 2,
            second: 2 * i - 1,
            amplitude,
            offset: g,
        });
    }
    Ok(Instance {
        params: *params,
        m,
        n0,
        spec: finish(EnsembleSpec {
            base,
            pairs,
            order: m,
        })?,
        layout: None,
        shifts: None,
    })
}

pub fn build_monotone_dd(params: &InstanceParams) -> Result<Instance> {
    if params.family != Family::MonotoneDd {
        return Err(Error::InvalidParameter(format!("expected monotoneDd, got {}", params.family)));
    }
    let d = params.d;
    let df = f64::from(d);
    let dim_limit = (params.c * params.c * params.log_inv_eps()).powi(3);
    if df >= dim_limit {
        return Err(Error::Infeasible(format!(
            "monotoneDd: d = {d} must be below (C^2 ln(1/eps))^3 = {dim_limit:.6e}"
        )));
    }
    let n0 = pad_domain(params)?;
    let layout = HalfcubeLayout::new(n0, d, params.n)?;
    let m = select_m(params.epsilon, params.c);
    let nf = n0 as f64;
    let di = d as i32;
    let amplitude = 2f64.powi(di + 2) * f64::from(m).powi(3) * df.powi(di) * params.epsilon / nf.powi(di);
    let limit = 2f64.powi(di - 3) * df.powi(di + 1) / nf.powi(di + 1);
    if amplitude >= limit {
        return Err(Error::Infeasible(format!(
            "monotoneDd: A = 2^(d+2) m^3 d^d eps/n^d = {amplitude:.6e} must be below \
             2^(d-3) d^(d+1)/n^(d+1) = {limit:.6e} (m = {m}, n = {n0}, d = {d}, eps = {:e})",
            params.epsilon
        )));
    }
    let g = (PI / f64::from(m)).cos();
    let lead = 5.0 * (2.0 * df).powi(di) / (8.0 * nf.powi(di));
    let bump = 2f64.powi(di) * df.powi(di + 1) / (4.0 * nf.powi(di + 1));
    let slope = 2f64.powi(di - 1) * df.powi(di) / nf.powi(di + 1);
    let cubes = layout.cube_count();
    let mut base = vec![0.0; 2 * cubes];
    let mut pairs = Vec::with_capacity(cubes);
    for c in 0..cubes {
        let sum: usize = layout.cube_coords(c).iter().sum();
        let q = lead + bump - sum as f64 * slope;
        base[2 * c] = q;
        base[2 * c + 1] = q;
        pairs.push(PairPerturbation {
            first: 2 * c,
            second: 2 * c + 1,
            amplitude,
            offset: g,
        });
    }
    Ok(Instance {
        params: *params,
        m,
        n0,
        spec: finish(EnsembleSpec {
            base,
            pairs,
            order: m,
        })?,
        layout: Some(layout),
        shifts: None,
    })
}

/// Unshifted half-Gaussian base `Q_i = (b/n) e^{-(i/n)^2}` on `[n]`.
pub fn half_gaussian(n: usize) -> (Vec<f64>, f64) {
    let nf = n as f64;
    let raw: Vec<f64> = (1..=n).map(|i| (-(i as f64 / nf).powi(2)).exp()).collect();
    let b = nf / raw.iter().sum::<f64>();
    (raw.into_iter().map(|r| b * r / nf).collect(), b)
}

pub fn build_logconcave(params: &InstanceParams) -> Result<Instance> {
    if params.family != Family::LogConcave {
        return Err(Error::InvalidParameter(format!("expected logconcave, got {}", params.family)));
    }
    let n0 = pad_domain(params)?;
    let m = select_m(params.epsilon, params.c);
    let nf = n0 as f64;
    let (q, _) = half_gaussian(n0);
    // 1-based Q_k lives at q[k - 1].
    let shifts: Vec<f64> = (1..=n0 / 6)
        .map(|i| q[6 * i - 2] - (q[6 * i - 1] * q[6 * i - 3]).sqrt())
        .collect();
    let scale = params.c * f64::from(m).powi(3) * params.epsilon / nf;
    let min_shift = shifts.iter().copied().fold(f64::INFINITY, f64::min);
    if 2.0 * scale >= min_shift {
        return Err(Error::Infeasible(format!(
            "logconcave: 2Cm^3 eps/n = {:.6e} must be below min_i C_i/n^3 = {min_shift:.6e} \
             (m = {m}, n = {n0}, eps = {:e})",
            2.0 * scale,
            params.epsilon
        )));
    }
    let g = (PI / f64::from(m)).cos();
    let mut base = vec![0.0; params.n];
    base[..n0].copy_from_slice(&q);
    let mut pairs = Vec::with_capacity(n0 / 6);
    for (idx, &s) in shifts.iter().enumerate() {
        let i = idx + 1;
        let (j, k) = (6 * i - 5, 6 * i - 2);
        base[j] += s;
        base[k] -= s;
        pairs.push(PairPerturbation {
            first: j,
            second: k,
            amplitude: -scale,
            offset: g,
        });
    }
    Ok(Instance {
        params: *params,
        m,
        n0,
        spec: finish(EnsembleSpec {
            base,
            pairs,
            order: m,
        })?,
        layout: None,
        shifts: Some(shifts),
    })
}
