//! On-disk form of a forged instance.
//!
//! Reals are written as decimal strings with 17 significant digits, which
//! round-trips every finite `f64` bit for bit.

use std::fmt;
use std::path::Path;

use lbforge_core::{EnsembleSpec, Family, HalfcubeLayout, Instance, InstanceParams, PairPerturbation};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// An `f64` serialized as a 17-significant-digit decimal string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:.16e}", self.0))
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct RealVisitor;

        impl Visitor<'_> for RealVisitor {
            type Value = Real;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a decimal string or number")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Real, E> {
                v.trim().parse::<f64>().map(Real).map_err(E::custom)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Real, E> {
                Ok(Real(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Real, E> {
                Ok(Real(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Real, E> {
                Ok(Real(v as f64))
            }
        }

        d.deserialize_any(RealVisitor)
    }
}

fn reals(v: &[f64]) -> Vec<Real> {
    v.iter().copied().map(Real).collect()
}

fn floats(v: &[Real]) -> Vec<f64> {
    v.iter().map(|r| r.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorParams {
    pub epsilon: Real,
    pub n: usize,
    pub n0: usize,
    pub d: u32,
    pub c: Real,
    pub m: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorPair {
    pub first: usize,
    pub second: usize,
    pub amplitude: Real,
    pub offset: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub schema_version: u32,
    pub family: Family,
    pub params: DescriptorParams,
    pub base: Vec<Real>,
    pub pairs: Vec<DescriptorPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halfcube_layout: Option<HalfcubeLayout>,
    /// Log-concave only: deterministic per-pair shifts folded into `base`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<Vec<Real>>,
    pub seed: u64,
}

impl InstanceDescriptor {
    pub fn from_instance(inst: &Instance, seed: u64) -> Self {
        InstanceDescriptor {
            schema_version: SCHEMA_VERSION,
            family: inst.params.family,
            params: DescriptorParams {
                epsilon: Real(inst.params.epsilon),
                n: inst.params.n,
                n0: inst.n0,
                d: inst.params.d,
                c: Real(inst.params.c),
                m: inst.m,
            },
            base: reals(&inst.spec.base),
            pairs: inst
                .spec
                .pairs
                .iter()
                .map(|pp| DescriptorPair {
                    first: pp.first,
                    second: pp.second,
                    amplitude: Real(pp.amplitude),
                    offset: Real(pp.offset),
                })
                .collect(),
            halfcube_layout: inst.layout,
            shifts: inst.shifts.as_deref().map(reals),
            seed,
        }
    }

    /// Rebuilds the instance without validating the ensemble, so that
    /// `verify` can report a corrupted one instead of refusing to load it.
    pub fn to_instance(&self) -> Result<Instance, CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Parse(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let p = &self.params;
        let params = InstanceParams::new(self.family, p.epsilon.0, p.n, p.d, p.c.0)?;
        if self.family == Family::MonotoneDd && self.halfcube_layout.is_none() {
            return Err(CliError::Parse("monotoneDd descriptor lacks a halfcube layout".into()));
        }
        let spec = EnsembleSpec {
            base: floats(&self.base),
            pairs: self
                .pairs
                .iter()
                .map(|dp| PairPerturbation {
                    first: dp.first,
                    second: dp.second,
                    amplitude: dp.amplitude.0,
                    offset: dp.offset.0,
                })
                .collect(),
            order: p.m,
        };
        Ok(Instance {
            params,
            m: p.m,
            n0: p.n0,
            spec,
            layout: self.halfcube_layout,
            shifts: self.shifts.as_deref().map(floats),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
