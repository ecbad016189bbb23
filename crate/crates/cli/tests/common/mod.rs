#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use lbforge_core::instances::{DEFAULT_C, domain_cap};
use lbforge_core::{Family, Instance, InstanceParams, build};

pub fn lbforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lbforge"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Largest ε on the grid `{5, 2, 1} × 10^-k` for which the instance builds
/// without the domain cap cutting it below `n` (up to the family's step).
pub fn feasible_epsilon(family: Family, n: usize, d: u32) -> Option<f64> {
    for k in 2..=16 {
        for mantissa in [5.0, 2.0, 1.0] {
            let eps = mantissa * 10f64.powi(-k);
            let Ok(params) = InstanceParams::new(family, eps, n, d, DEFAULT_C) else {
                continue;
            };
            if domain_cap(&params) < n as f64 {
                continue;
            }
            if build(&params).is_ok() {
                return Some(eps);
            }
        }
    }
    None
}

pub fn feasible_instance(family: Family, n: usize, d: u32) -> Option<Instance> {
    let eps = feasible_epsilon(family, n, d)?;
    build(&InstanceParams::new(family, eps, n, d, DEFAULT_C).ok()?).ok()
}

/// Smallest multiple of `2d` that admits a feasible instance.
pub fn smallest_feasible_dd(d: u32) -> Option<(usize, f64)> {
    let step = 2 * d as usize;
    (1..=12)
        .map(|k| k * step)
        .find_map(|n| feasible_epsilon(Family::MonotoneDd, n, d).map(|eps| (n, eps)))
}

pub fn forge_to(path: &Path, family: Family, eps: f64, n: usize, d: u32) -> Output {
    lbforge(&[
        "forge",
        "--family",
        family.name(),
        "--epsilon",
        &format!("{eps:e}"),
        "--n",
        &n.to_string(),
        "--d",
        &d.to_string(),
        "--out",
        path.to_str().unwrap(),
    ])
}
