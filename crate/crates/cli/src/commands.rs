use clap::ValueEnum;
use lbforge_core::indist::{self, BoundInputs, Prop1Knobs, TheoremKnobs};
use lbforge_core::oracles::{self, Order};
use lbforge_core::{
    DiscreteDistribution, Error, Family, Instance, InstanceParams, Side, TheoremBound, build, lift_halfcube,
    sample_dataset,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Value, json};

use crate::CliError;
use crate::descriptor::{InstanceDescriptor, Real, SCHEMA_VERSION};

fn parse_family(s: &str) -> Result<Family, CliError> {
    s.parse().map_err(CliError::Usage)
}

fn knob_value(knobs: &[(String, f64)], allowed: &[&str]) -> Result<Vec<Option<f64>>, CliError> {
    let mut out = vec![None; allowed.len()];
    for (k, v) in knobs {
        let idx = allowed
            .iter()
            .position(|a| a == k)
            .ok_or_else(|| CliError::Usage(format!("unknown knob '{k}' (expected one of {})", allowed.join(", "))))?;
        out[idx] = Some(*v);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ForgeSummary {
    pub descriptor: InstanceDescriptor,
    pub instance: Instance,
}

impl ForgeSummary {
    pub fn describe(&self) -> String {
        let inst = &self.instance;
        let (lhs, rhs) = inst.feasibility_margin();
        format!(
            "family = {}\nn0 = {}\nm = {}\npairs = {}\nx_max = {:.6e}\namplitude condition: {lhs:.6e} < {rhs:.6e} (ratio {:.4})",
            inst.params.family,
            inst.n0,
            inst.m,
            inst.spec.pairs.len(),
            inst.x_max(),
            lhs / rhs
        )
    }
}

pub fn forge(family: &str, epsilon: f64, n: usize, d: u32, c: f64, seed: u64) -> Result<ForgeSummary, CliError> {
    let family = parse_family(family)?;
    if d == 0 {
        return Err(CliError::Usage("d ≥ 1 required".into()));
    }
    let params = InstanceParams::new(family, epsilon, n, d, c)?;
    let instance = build(&params)?;
    Ok(ForgeSummary {
        descriptor: InstanceDescriptor::from_instance(&instance, seed),
        instance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMode {
    /// Enumerate every yes-side atom when within budget, else sample.
    Auto,
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub draws: usize,
    pub seed: u64,
    pub mode: VerifyMode,
    pub farness_threshold: f64,
    pub enumeration_budget: u64,
    /// Largest domain on which the LP oracle is run per draw.
    pub lp_limit: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            draws: 1000,
            seed: 0,
            mode: VerifyMode::Auto,
            farness_threshold: 0.95,
            enumeration_budget: 1_000_000,
            lp_limit: 512,
        }
    }
}

impl VerifyOptions {
    pub fn apply_knobs(&mut self, knobs: &[(String, f64)]) -> Result<(), CliError> {
        let vals = knob_value(knobs, &["threshold", "budget", "lp-limit"])?;
        if let Some(t) = vals[0] {
            self.farness_threshold = t;
        }
        if let Some(b) = vals[1] {
            self.enumeration_budget = b as u64;
        }
        if let Some(l) = vals[2] {
            self.lp_limit = l as usize;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: &'static str,
    pub pass: bool,
    pub skipped: bool,
    pub message: String,
    pub metrics: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub family: Family,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check == name)
    }

    pub fn json_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                let mut v = serde_json::to_value(c).expect("check serializes");
                v["schema_version"] = json!(SCHEMA_VERSION);
                v.to_string()
            })
            .collect()
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.skipped {
                "SKIP"
            } else if c.pass {
                "PASS"
            } else {
                "FAIL"
            };
            out.push_str(&format!("[{status}] {}: {}\n", c.check, c.message));
        }
        out.push_str(if self.passed() { "verify: all checks passed" } else { "verify: FAILED" });
        out
    }
}

fn skipped(check: &'static str, why: &str) -> CheckResult {
    CheckResult {
        check,
        pass: false,
        skipped: true,
        message: format!("skipped: {why}"),
        metrics: Value::Null,
    }
}

/// The family property on a draw over the ensemble's bins.
fn has_property(inst: &Instance, p: &DiscreteDistribution) -> Result<bool, Error> {
    Ok(match inst.params.family {
        Family::Monotone1d => oracles::is_monotone(p.masses(), Order::Total),
        Family::MonotoneDd => {
            let layout = inst.layout.expect("layout checked on load");
            let lifted = lift_halfcube(&layout, p)?;
            oracles::is_monotone(
                lifted.masses(),
                Order::Lattice {
                    n: layout.domain,
                    d: layout.d,
                },
            )
        }
        Family::LogConcave => oracles::is_log_concave(p.masses()),
    })
}

/// Certified distance from a no-side draw to the property class, or the
/// reason no certificate applies.
fn certified_distance(inst: &Instance, p: &DiscreteDistribution, lp_limit: usize) -> Result<f64, String> {
    let eps = inst.params.epsilon;
    let masses = p.masses();
    match inst.params.family {
        Family::Monotone1d => {
            let gamma = oracles::gamma_distance_1d(&masses[..inst.n0]).map_err(|e| e.to_string())?;
            if gamma.lower_bound >= eps || masses.len() > lp_limit {
                return Ok(gamma.lower_bound);
            }
            oracles::lp_distance_to_monotone(masses, Order::Total)
                .map(|c| c.lower_bound.max(gamma.lower_bound))
                .map_err(|e| e.to_string())
        }
        Family::MonotoneDd => {
            let layout = inst.layout.expect("layout checked on load");
            let gamma = oracles::gamma_distance_halfcube(&layout, masses).map_err(|e| e.to_string())?;
            let lattice = layout.domain.pow(layout.d);
            if gamma.lower_bound >= eps || lattice > lp_limit {
                return Ok(gamma.lower_bound);
            }
            let lifted = lift_halfcube(&layout, p).map_err(|e| e.to_string())?;
            oracles::lp_distance_to_monotone(
                lifted.masses(),
                Order::Lattice {
                    n: layout.domain,
                    d: layout.d,
                },
            )
            .map(|c| c.lower_bound.max(gamma.lower_bound))
            .map_err(|e| e.to_string())
        }
        Family::LogConcave => oracles::sqrt_triple_distance(&masses[..inst.n0])
            .map(|c| c.lower_bound)
            .map_err(|e| e.to_string()),
    }
}

fn moment_check(inst: &Instance) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut worst_at = (0usize, 0u32);
    for (i, _) in inst.spec.pairs.iter().enumerate() {
        let yes = inst.spec.kernel(i, Side::Yes);
        let no = inst.spec.kernel(i, Side::No);
        let scale = yes.amplitude.abs() * (1.0 + yes.offset.abs());
        for k in 0..inst.m {
            let diff = (yes.moment(k) - no.moment(k)).abs() / scale.powi(k as i32).max(1.0);
            if diff > worst {
                worst = diff;
                worst_at = (i + 1, k);
            }
        }
    }
    let pass = worst <= 1e-10;
    CheckResult {
        check: "moments",
        pass,
        skipped: false,
        message: format!(
            "orders 0..{}: worst scaled moment gap {worst:.3e} (pair {}, order {})",
            inst.m, worst_at.0, worst_at.1
        ),
        metrics: json!({ "worst_scaled_gap": worst, "tolerance": 1e-10 }),
    }
}

fn yes_check(inst: &Instance, opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<CheckResult, CliError> {
    let atoms = inst.spec.atom_count();
    let exhaustive = match opts.mode {
        VerifyMode::Exhaustive => {
            if atoms > opts.enumeration_budget as f64 {
                return Err(CliError::Core(Error::BudgetExceeded {
                    what: "yes-side enumeration",
                    needed: atoms,
                    budget: opts.enumeration_budget as f64,
                }));
            }
            true
        }
        VerifyMode::Auto => atoms <= opts.enumeration_budget as f64,
        VerifyMode::Sampled => false,
    };
    let mut checked = 0u64;
    let mut violations = 0u64;
    if exhaustive {
        for (_, p) in inst.spec.enumerate_atoms(Side::Yes, opts.enumeration_budget)? {
            checked += 1;
            if !has_property(inst, &p)? {
                violations += 1;
            }
        }
    } else {
        for _ in 0..opts.draws {
            let p = inst.spec.draw(Side::Yes, rng)?;
            checked += 1;
            if !has_property(inst, &p)? {
                violations += 1;
            }
        }
    }
    Ok(CheckResult {
        check: "yes-side",
        pass: violations == 0,
        skipped: false,
        message: format!(
            "{violations} violations in {checked} {} yes-side distributions",
            if exhaustive { "enumerated" } else { "sampled" }
        ),
        metrics: json!({ "checked": checked, "violations": violations, "exhaustive": exhaustive }),
    })
}

fn no_check(inst: &Instance, opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<CheckResult, CliError> {
    let eps = inst.params.epsilon;
    let mut certified = 0usize;
    let mut uncertified = 0usize;
    let mut first_reason = None;
    let mut distances = Vec::with_capacity(opts.draws);
    for _ in 0..opts.draws {
        let p = inst.spec.draw(Side::No, rng)?;
        match certified_distance(inst, &p, opts.lp_limit) {
            Ok(dist) => {
                distances.push(dist);
                if dist >= eps {
                    certified += 1;
                }
            }
            Err(reason) => {
                uncertified += 1;
                first_reason.get_or_insert(reason);
            }
        }
    }
    let fraction = if opts.draws == 0 {
        0.0
    } else {
        certified as f64 / opts.draws as f64
    };
    let mean = if distances.is_empty() {
        0.0
    } else {
        distances.iter().sum::<f64>() / distances.len() as f64
    };
    let mut message = format!(
        "{certified}/{} draws certified at distance >= eps = {eps:e} (fraction {fraction:.4}, threshold {}); mean certified distance {mean:.4e}",
        opts.draws, opts.farness_threshold
    );
    if let Some(r) = &first_reason {
        message.push_str(&format!("; {uncertified} draws outside the certificate's hypotheses, first: {r}"));
    }
    Ok(CheckResult {
        check: "no-side-farness",
        pass: fraction >= opts.farness_threshold,
        skipped: false,
        message,
        metrics: json!({
            "draws": opts.draws,
            "certified": certified,
            "uncertified": uncertified,
            "fraction": fraction,
            "threshold": opts.farness_threshold,
            "mean_distance": mean,
        }),
    })
}

pub fn verify(desc: &InstanceDescriptor, opts: &VerifyOptions) -> Result<VerifyReport, CliError> {
    let inst = desc.to_instance()?;
    let mut checks = Vec::new();
    match inst.spec.validate() {
        Ok(()) => checks.push(CheckResult {
            check: "validate",
            pass: true,
            skipped: false,
            message: format!("{} pairs within the amplitude bound", inst.spec.pairs.len()),
            metrics: json!({ "pairs": inst.spec.pairs.len() }),
        }),
        Err(v) => {
            checks.push(CheckResult {
                check: "validate",
                pass: false,
                skipped: false,
                message: v.to_string(),
                metrics: Value::Null,
            });
            for name in ["moments", "yes-side", "no-side-farness"] {
                checks.push(skipped(name, "ensemble is invalid"));
            }
            return Ok(VerifyReport {
                family: inst.params.family,
                checks,
            });
        }
    }
    checks.push(moment_check(&inst));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    checks.push(yes_check(&inst, opts, &mut rng)?);
    checks.push(no_check(&inst, opts, &mut rng)?);
    Ok(VerifyReport {
        family: inst.params.family,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvRow {
    pub schema_version: u32,
    pub n_samples: u64,
    pub marginal_bound: f64,
    pub crude_tail: f64,
    pub crude_max_sum: f64,
    pub crude_bound: f64,
    pub mc_estimate: f64,
    pub mc_radius: f64,
    pub prop1_bound: f64,
    pub prop1_hypotheses_ok: bool,
}

pub fn tv_rows(
    desc: &InstanceDescriptor,
    samples: &[u64],
    trials: u64,
    seed: u64,
    c: f64,
    knobs: &[(String, f64)],
) -> Result<Vec<TvRow>, CliError> {
    let inst = desc.to_instance()?;
    inst.spec.validate().map_err(Error::InvalidSpec)?;
    let vals = knob_value(knobs, &["c1", "c2", "c3", "c4"])?;
    let mut pk = Prop1Knobs::default();
    for (slot, v) in [&mut pk.c1, &mut pk.c2, &mut pk.c3, &mut pk.c4].into_iter().zip(vals) {
        if let Some(v) = v {
            *slot = v;
        }
    }
    let mut rows = Vec::with_capacity(samples.len());
    for &n in samples {
        let report = indist::aggregate_tv_bound(&inst.spec, n)?;
        let mc = indist::mc_tv_estimate(&inst.spec, n, trials, seed)?;
        let prop1 = indist::prop1_bound(&BoundInputs::from_spec(&inst.spec, n as f64, c, pk));
        rows.push(TvRow {
            schema_version: SCHEMA_VERSION,
            n_samples: n,
            marginal_bound: report.marginal_bound,
            crude_tail: report.crude.tail,
            crude_max_sum: report.crude.max_sum,
            crude_bound: report.crude.total,
            mc_estimate: mc.estimate,
            mc_radius: mc.conf_radius,
            prop1_bound: prop1.value,
            prop1_hypotheses_ok: prop1.violations.is_empty(),
        });
    }
    Ok(rows)
}

pub fn rows_to_csv(rows: &[TvRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record([
            "schema_version",
            "n_samples",
            "marginal_bound",
            "crude_tail",
            "crude_max_sum",
            "crude_bound",
            "mc_estimate",
            "mc_radius",
            "prop1_bound",
            "prop1_hypotheses_ok",
        ])
        .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSummary {
    pub params: InstanceParams,
    pub bound: TheoremBound,
}

impl BoundSummary {
    pub fn describe(&self) -> String {
        let b = &self.bound;
        let branch = match b.branch {
            lbforge_core::Branch::N => "n",
            lbforge_core::Branch::EpsilonCap => "ε-cap",
        };
        let mut out = format!(
            "N = {:.6e}\nbranch = {branch} (n = {}, cap = {:.6e})",
            b.samples, self.params.n, b.cap
        );
        if self.params.family != Family::LogConcave {
            out.push_str(&format!(
                "\nd^-d factor = {:.6e} (d = {})",
                b.dimension_factor, self.params.d
            ));
        }
        out
    }
}

pub fn bound(family: &str, epsilon: f64, n: usize, d: u32, knobs: &[(String, f64)]) -> Result<BoundSummary, CliError> {
    let family = parse_family(family)?;
    if d == 0 {
        return Err(CliError::Usage("d ≥ 1 required".into()));
    }
    let params = InstanceParams::new(family, epsilon, n, d, lbforge_core::instances::DEFAULT_C)?;
    let vals = knob_value(knobs, &["k1", "k2", "k3"])?;
    let tk = TheoremKnobs {
        k1: vals[0].unwrap_or(1.0),
        k2: vals[1].unwrap_or(1.0),
        k3: vals[2].unwrap_or(1.0),
    };
    Ok(BoundSummary {
        params,
        bound: indist::theorem_lower_bound(&params, &tk),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFile {
    pub schema_version: u32,
    pub side: Side,
    pub n_samples: u64,
    pub seed: u64,
    pub deltas: Vec<Real>,
    pub counts: Vec<u64>,
}

impl SampleFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sample file serializes") + "\n"
    }
}

/// One draw from `side`, then `n` samples from it. Lattice instances are
/// sampled on `[n]^d`.
pub fn sample(desc: &InstanceDescriptor, side: Side, n: u64, seed: u64) -> Result<SampleFile, CliError> {
    let inst = desc.to_instance()?;
    inst.spec.validate().map_err(Error::InvalidSpec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = inst.spec.draw_with_deltas(side, &mut rng)?;
    let p = match inst.layout {
        Some(layout) => lift_halfcube(&layout, &draw.distribution)?,
        None => draw.distribution,
    };
    Ok(SampleFile {
        schema_version: SCHEMA_VERSION,
        side,
        n_samples: n,
        seed,
        deltas: draw.deltas.into_iter().map(Real).collect(),
        counts: sample_dataset(&p, n, &mut rng),
    })
}
