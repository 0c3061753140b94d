//! Versioned JSON documents: pseudogroup specs, presentations and fusion specs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cylinder::CylinderSet;
use crate::error::{input, Error, Result};
use crate::fusion::{FusionSpec, Gluing};
use crate::metric::{Metric, MetricSpace, WeightedMetric};
use crate::pseudogroup::{odometer_with_steps, sturmian_system, ActionKind, ContinuedFraction, PartialMap, Pseudogroup};
use crate::rational::Q;
use crate::solenoid::{ChainRule, IntMatrix, Presentation1D, SubgroupChainZn};
use crate::space::LevelSpace;
use crate::treespace::treespace_pseudogroup;

pub const PSEUDOGROUP_SCHEMA: &str = "matchbox.pseudogroup/1";
pub const PRESENTATION_SCHEMA: &str = "matchbox.presentation/1";
pub const FUSION_SCHEMA: &str = "matchbox.fusion/1";
pub const SPACE_SCHEMA: &str = "matchbox.space/1";

fn check_schema(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return input(format!("schema {found:?} where {expected:?} was expected"));
    }
    Ok(())
}

fn one_step() -> Vec<i64> {
    vec![1]
}

fn default_window() -> usize {
    2
}

/// Built-in systems, referenced by parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CatalogSpec {
    Odometer {
        degrees: Vec<u32>,
        #[serde(default = "one_step")]
        steps: Vec<i64>,
        #[serde(default)]
        metric: WeightedMetric,
    },
    Sturmian {
        #[serde(default = "ContinuedFraction::golden")]
        continued_fraction: ContinuedFraction,
        #[serde(default = "default_window")]
        window: usize,
        #[serde(default)]
        metric: WeightedMetric,
    },
    Treespace {
        n: u8,
        graph_order: usize,
    },
}

impl CatalogSpec {
    pub fn build(&self) -> Result<Pseudogroup> {
        match self {
            CatalogSpec::Odometer { degrees, steps, metric } => odometer_with_steps(degrees, steps, metric.clone()),
            CatalogSpec::Sturmian { continued_fraction, window, metric } => {
                sturmian_system(continued_fraction, *window, metric.clone())
            }
            CatalogSpec::Treespace { n, graph_order } => treespace_pseudogroup(*n, *graph_order),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub label: String,
    pub depth: usize,
    pub rules: Vec<(Vec<u32>, Vec<u32>)>,
    #[serde(with = "crate::rational::serde_q")]
    pub lipschitz: Q,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub space: LevelSpace,
    pub metric: Metric,
    pub depth: usize,
    #[serde(default)]
    pub kind: ActionKind,
    pub generators: Vec<GeneratorSpec>,
}

/// Either a catalog entry or an explicit system of rewrite tables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudogroupSpec {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<CatalogSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
}

impl PseudogroupSpec {
    pub fn catalog(c: CatalogSpec) -> Self {
        PseudogroupSpec { schema: PSEUDOGROUP_SCHEMA.into(), catalog: Some(c), system: None }
    }

    /// Explicit spec of an existing pseudogroup.
    pub fn from_pseudogroup(g: &Pseudogroup) -> Self {
        let generators = g
            .generators
            .iter()
            .map(|m| GeneratorSpec {
                label: m.label.clone(),
                depth: m.depth(),
                rules: m.rules().iter().map(|(a, b)| (a.clone(), b.clone())).collect(),
                lipschitz: m.lipschitz().clone(),
            })
            .collect();
        PseudogroupSpec {
            schema: PSEUDOGROUP_SCHEMA.into(),
            catalog: None,
            system: Some(SystemSpec {
                space: g.ms.space.clone(),
                metric: g.ms.metric.clone(),
                depth: g.depth,
                kind: g.kind,
                generators,
            }),
        }
    }

    pub fn build(&self) -> Result<Pseudogroup> {
        check_schema(&self.schema, PSEUDOGROUP_SCHEMA)?;
        match (&self.catalog, &self.system) {
            (Some(c), None) => c.build(),
            (None, Some(s)) => {
                let ms = MetricSpace::new(s.space.clone(), s.metric.clone())?;
                let gens = s
                    .generators
                    .iter()
                    .map(|g| PartialMap::new(&ms, g.label.clone(), g.depth, g.rules.iter().cloned(), g.lipschitz.clone()))
                    .collect::<Result<Vec<_>>>()?;
                Pseudogroup::new(ms, s.depth, gens, s.kind)
            }
            _ => input("a pseudogroup spec needs exactly one of \"catalog\" and \"system\""),
        }
    }
}

/// A metric space document, for dimension and doubling reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub schema: String,
    pub space: LevelSpace,
    #[serde(default)]
    pub metric: Metric,
}

impl SpaceSpec {
    pub fn new(ms: &MetricSpace) -> Self {
        SpaceSpec { schema: SPACE_SCHEMA.into(), space: ms.space.clone(), metric: ms.metric.clone() }
    }

    pub fn build(&self) -> Result<MetricSpace> {
        check_schema(&self.schema, SPACE_SCHEMA)?;
        MetricSpace::new(self.space.clone(), self.metric.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "base")]
pub enum PresentationBody {
    #[serde(rename = "S1")]
    Circle { degrees: Presentation1D },
    #[serde(rename = "Tn")]
    Torus {
        rank: usize,
        #[serde(default)]
        chain: Vec<IntMatrix>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rule: Option<ChainRule>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationSpec {
    pub schema: String,
    #[serde(flatten)]
    pub body: PresentationBody,
}

/// A validated presentation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Presentation {
    Circle(Presentation1D),
    Torus(SubgroupChainZn),
}

impl PresentationSpec {
    pub fn circle(p: Presentation1D) -> Self {
        PresentationSpec { schema: PRESENTATION_SCHEMA.into(), body: PresentationBody::Circle { degrees: p } }
    }

    pub fn torus(c: SubgroupChainZn) -> Self {
        PresentationSpec {
            schema: PRESENTATION_SCHEMA.into(),
            body: PresentationBody::Torus { rank: c.rank, chain: c.chain, rule: c.rule },
        }
    }

    pub fn build(&self) -> Result<Presentation> {
        check_schema(&self.schema, PRESENTATION_SCHEMA)?;
        match &self.body {
            PresentationBody::Circle { degrees } => {
                degrees.validate()?;
                Ok(Presentation::Circle(degrees.clone()))
            }
            PresentationBody::Torus { rank, chain, rule } => {
                if chain.is_empty() == rule.is_none() {
                    return input("a Z^n chain needs exactly one of \"chain\" and \"rule\"");
                }
                let c = SubgroupChainZn { rank: *rank, chain: chain.clone(), rule: rule.clone() };
                if let Some(m) = c.terms(1).first() {
                    if m.n() != *rank {
                        return input(format!("matrices have size {} but rank is {rank}", m.n()));
                    }
                }
                Ok(Presentation::Torus(c))
            }
        }
    }
}

/// Where a fusion input comes from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemRef {
    Path(PathBuf),
    Inline(Box<PseudogroupSpec>),
}

impl SystemRef {
    fn load(&self, base: Option<&Path>) -> Result<Pseudogroup> {
        match self {
            SystemRef::Inline(s) => s.build(),
            SystemRef::Path(p) => {
                let path = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
                let spec: PseudogroupSpec = serde_json::from_str(&text)?;
                spec.build()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionFile {
    pub schema: String,
    pub first: SystemRef,
    pub second: SystemRef,
    /// Prefixes of V1 and V2; empty means the whole space.
    pub v1: Vec<Vec<u32>>,
    pub v2: Vec<Vec<u32>>,
    pub gluing: Gluing,
}

impl FusionFile {
    /// Resolves referenced files relative to `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<FusionSpec> {
        check_schema(&self.schema, FUSION_SCHEMA)?;
        let g1 = self.first.load(base)?;
        let g2 = self.second.load(base)?;
        let set = |space: &LevelSpace, p: &[Vec<u32>]| {
            if p.is_empty() {
                CylinderSet::full()
            } else {
                CylinderSet::from_prefixes(space, p.iter().cloned())
            }
        };
        let v1 = set(&g1.ms.space, &self.v1);
        let v2 = set(&g2.ms.space, &self.v2);
        Ok(FusionSpec { g1, g2, v1, v2, h: self.gluing.clone() })
    }
}

/// Pretty JSON with a trailing newline, stable across runs.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Wraps a report with its schema tag.
pub fn tagged<T: Serialize>(schema: &str, report: &T) -> Result<serde_json::Value> {
    let mut map = BTreeMap::new();
    map.insert("schema".to_string(), serde_json::Value::from(schema));
    map.insert("report".to_string(), serde_json::to_value(report)?);
    Ok(serde_json::to_value(map)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_specs_parse() {
        let s: PseudogroupSpec =
            serde_json::from_str(r#"{"schema":"matchbox.pseudogroup/1","catalog":{"kind":"odometer","degrees":[2,2,2]}}"#).unwrap();
        let g = s.build().unwrap();
        assert_eq!(g.generators.len(), 1);
        let s: PseudogroupSpec =
            serde_json::from_str(r#"{"schema":"matchbox.pseudogroup/1","catalog":{"kind":"treespace","n":2,"graph_order":1}}"#).unwrap();
        assert_eq!(s.build().unwrap().generators.len(), 4);
    }

    #[test]
    fn explicit_round_trip() {
        let g = CatalogSpec::Odometer { degrees: vec![2, 3], steps: vec![1, 2], metric: WeightedMetric::default() }.build().unwrap();
        let spec = PseudogroupSpec::from_pseudogroup(&g);
        let text = to_json(&spec).unwrap();
        let back: PseudogroupSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.build().unwrap(), g);
    }

    #[test]
    fn presentations_parse() {
        let s: PresentationSpec = serde_json::from_str(
            r#"{"schema":"matchbox.presentation/1","base":"S1","degrees":{"prefix":[2],"rule":{"kind":"gap2exp","sparse":3,"dense":2}}}"#,
        )
        .unwrap();
        assert_eq!(s.build().unwrap(), Presentation::Circle(Presentation1D::gap_two_exp()));
        let s: PresentationSpec = serde_json::from_str(
            r#"{"schema":"matchbox.presentation/1","base":"Tn","rank":2,"chain":[[[2,0],[0,2]],[[4,0],[0,4]]]}"#,
        )
        .unwrap();
        assert!(matches!(s.build().unwrap(), Presentation::Torus(_)));
        let bad: PresentationSpec =
            serde_json::from_str(r#"{"schema":"other/1","base":"S1","degrees":{"prefix":[2]}}"#).unwrap();
        assert!(bad.build().is_err());
    }
}
