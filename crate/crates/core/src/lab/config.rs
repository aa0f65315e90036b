//! Experiment configuration, schema version 1 (TOML).
//!
//! ```toml
//! schema = 1
//! seed = 42
//! budget = 2000
//!
//! [model]
//! kind = "euclidean"   # euclidean | half_space | l1 | hyperboloid2
//! dim = 1
//!
//! [gauge]
//! kind = "log"         # log | power | porosity_power (s) | custom (knots, majorant)
//!
//! [metric]
//! kind = "series"      # series | weighted | pointwise
//!
//! [map]
//! kind = "affine1d"
//! a = 1.0
//! b = 1.0
//! ```
//!
//! Maps are constructor trees (see [`MapSpec`]); there is no expression
//! language. Sections not used by a command are ignored.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geodesic::{ModelKind, Point, SpaceModel};
use crate::mapping::NonexpMap;
use crate::metrics::gauge::{Gauge, GaugeKind};
use crate::metrics::MapMetric;
use crate::perturbation::{enlarge_modulus, isometry_patch, spike_map, SeparatedNet};

pub const SCHEMA_VERSION: u32 = 1;

fn cfg(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default = "one")]
    pub dim: usize,
}

fn one() -> usize {
    1
}

impl ModelSpec {
    pub fn build(&self) -> Result<SpaceModel> {
        SpaceModel::new(self.kind, self.dim).map_err(|e| cfg(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Series {
        #[serde(default)]
        truncation: Option<usize>,
    },
    Weighted {
        s: f64,
    },
    Pointwise {
        #[serde(default)]
        truncation: Option<usize>,
    },
}

/// Constructor tree of a map. Points are coordinate lists in the model's
/// storage convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Identity,
    Constant { point: Vec<f64> },
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// `x ↦ a x + b` on a one-dimensional model.
    Affine1d { a: f64, b: f64 },
    ContractToward {
        inner: Box<MapSpec>,
        #[serde(default)]
        theta: Option<Vec<f64>>,
        gamma: f64,
    },
    BlendConstant { inner: Box<MapSpec>, point: Vec<f64>, weight: f64 },
    Compose { outer: Box<MapSpec>, inner: Box<MapSpec> },
    Spike { x0: Vec<f64>, y0: Vec<f64>, v: Vec<f64>, t0: f64, lambda: f64 },
    EnlargeModulus {
        inner: Box<MapSpec>,
        #[serde(default)]
        z: Option<Vec<f64>>,
        gamma: f64,
        lambda: f64,
        t0: f64,
        radius: f64,
    },
    IsometryPatch {
        inner: Box<MapSpec>,
        net: Vec<Vec<f64>>,
        a: f64,
        eps: f64,
        #[serde(default)]
        theta: Option<Vec<f64>>,
    },
}

impl MapSpec {
    /// Builds the map; `theta` is the default basepoint for nodes that need
    /// one. Errors map to config errors.
    pub fn build(&self, model: &SpaceModel, theta: &Point) -> Result<NonexpMap> {
        let map = self.build_inner(model, theta).map_err(|e| match e {
            LabError::Config(_) => e,
            other => cfg(other.to_string()),
        })?;
        map.ensure_exportable().map_err(|e| cfg(e.to_string()))?;
        Ok(map)
    }

    fn build_inner(&self, model: &SpaceModel, theta: &Point) -> Result<NonexpMap> {
        let pt = |c: &Vec<f64>| -> Result<Point> {
            let p = Point::new(c.clone());
            model.validate(&p)?;
            Ok(p)
        };
        let or_theta = |c: &Option<Vec<f64>>| -> Result<Point> {
            match c {
                Some(c) => pt(c),
                None => Ok(theta.clone()),
            }
        };
        Ok(match self {
            MapSpec::Identity => NonexpMap::identity(model),
            MapSpec::Constant { point } => NonexpMap::constant(model, &pt(point)?)?,
            MapSpec::Affine { matrix, offset } => NonexpMap::affine(model, matrix, offset)?,
            MapSpec::Affine1d { a, b } => NonexpMap::affine_1d(model, *a, *b)?,
            MapSpec::ContractToward { inner, theta: t, gamma } => {
                NonexpMap::contract_toward(&inner.build_inner(model, theta)?, &or_theta(t)?, *gamma)?
            }
            MapSpec::BlendConstant { inner, point, weight } => {
                NonexpMap::blend_constant(&inner.build_inner(model, theta)?, &pt(point)?, *weight)?
            }
            MapSpec::Compose { outer, inner } => {
                NonexpMap::compose(&outer.build_inner(model, theta)?, &inner.build_inner(model, theta)?)?
            }
            MapSpec::Spike { x0, y0, v, t0, lambda } => spike_map(model, &pt(x0)?, &pt(y0)?, &pt(v)?, *t0, *lambda)?.map,
            MapSpec::EnlargeModulus { inner, z, gamma, lambda, t0, radius } => {
                enlarge_modulus(&inner.build_inner(model, theta)?, &or_theta(z)?, *gamma, *lambda, *t0, *radius)?.map
            }
            MapSpec::IsometryPatch { inner, net, a, eps, theta: t } => {
                let points = net.iter().map(pt).collect::<Result<Vec<_>>>()?;
                let net = SeparatedNet::from_points(model, points, *a)?;
                isometry_patch(&inner.build_inner(model, theta)?, &net, *a, *eps, &or_theta(t)?)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxiomsSection {
    /// Models to check; defaults to the `[model]` section.
    #[serde(default)]
    pub models: Option<Vec<ModelSpec>>,
    #[serde(default = "default_axiom_samples")]
    pub samples: usize,
    /// Overrides every model's tolerance.
    #[serde(default)]
    pub tolerance: Option<f64>,
}

fn default_axiom_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSection {
    pub f: MapSpec,
    pub g: MapSpec,
    /// Optional reference value checked against the estimate.
    #[serde(default)]
    pub expected: Option<f64>,
    #[serde(default = "default_expected_tol")]
    pub tolerance: f64,
}

fn default_expected_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceSection {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_n_max() -> usize {
    20
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    BallInvariance,
    Rakotch,
    Modcont,
    Shrink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessSection {
    pub kind: WitnessKind,
    pub r: f64,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub t0: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub x: Option<Vec<f64>>,
    #[serde(default)]
    pub y: Option<Vec<f64>>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    #[serde(default = "default_audit_n")]
    pub n_max: usize,
    #[serde(default)]
    pub second_start: Option<Vec<f64>>,
}

fn default_audit_n() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixpointSection {
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub audit: Option<AuditSection>,
    /// Iterate the center of the `[witness]` construction instead of `[map]`.
    #[serde(default)]
    pub from_witness: bool,
    /// Optional known fixed point checked against the limit.
    #[serde(default)]
    pub expected: Option<Vec<f64>>,
    #[serde(default = "default_tol")]
    pub expected_tol: f64,
    /// Residuals recorded as rows (every entry when absent).
    #[serde(default)]
    pub trajectory_rows: Option<usize>,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudSpec {
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub cloud: CloudSpec,
    /// Net levels: separation `a_j = 2^-j` for `j` in `j_min..=j_max`.
    #[serde(default = "one")]
    pub j_min: usize,
    #[serde(default = "one")]
    pub j_max: usize,
    /// Radii `2^{-j-k}` for `k` in `0..k_levels`.
    #[serde(default = "default_k_levels")]
    pub k_levels: usize,
    #[serde(default = "default_profile_eps")]
    pub eps: f64,
    /// Also profile the unpatched map against its claimed bound.
    #[serde(default)]
    pub compare_unpatched: bool,
}

fn default_k_levels() -> usize {
    3
}

fn default_profile_eps() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_members")]
    pub members: usize,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub out: Option<String>,
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub gauge: Option<GaugeKind>,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
    #[serde(default)]
    pub map: Option<MapSpec>,
    #[serde(default)]
    pub pair: Option<PairSection>,
    #[serde(default)]
    pub axioms: Option<AxiomsSection>,
    #[serde(default)]
    pub divergence: Option<DivergenceSection>,
    #[serde(default)]
    pub witness: Option<WitnessSection>,
    #[serde(default)]
    pub fixpoint: Option<FixpointSection>,
    #[serde(default)]
    pub profile: Option<ProfileSection>,
}

fn default_budget() -> usize {
    2000
}

fn default_members() -> usize {
    100
}

pub fn gauge_from_kind(kind: &GaugeKind) -> Result<Gauge> {
    match kind {
        GaugeKind::Log => Ok(Gauge::log()),
        GaugeKind::Power => Ok(Gauge::power()),
        GaugeKind::PorosityPower { s } => Gauge::porosity_power(*s),
        GaugeKind::Custom { knots, majorant } => Gauge::custom(knots.clone(), *majorant),
    }
    .map_err(|e| cfg(e.to_string()))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| cfg(e.to_string()))?;
        if c.schema != SCHEMA_VERSION {
            return Err(cfg(format!("unsupported schema version {} (expected {SCHEMA_VERSION})", c.schema)));
        }
        if c.budget == 0 {
            return Err(cfg("budget must be at least 1"));
        }
        if c.threads == Some(0) {
            return Err(cfg("threads must be at least 1"));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical JSON echo of the effective configuration.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("configs serialize")
    }

    pub fn space(&self) -> Result<SpaceModel> {
        self.model.as_ref().ok_or_else(|| cfg("missing [model] section"))?.build()
    }

    pub fn basepoint(&self, model: &SpaceModel) -> Result<Point> {
        match &self.theta {
            Some(c) => {
                let p = Point::new(c.clone());
                model.validate(&p).map_err(|e| cfg(e.to_string()))?;
                Ok(p)
            }
            None => Ok(model.origin()),
        }
    }

    pub fn gauge(&self) -> Result<Gauge> {
        gauge_from_kind(self.gauge.as_ref().unwrap_or(&GaugeKind::Log))
    }

    pub fn build_map(&self, model: &SpaceModel, theta: &Point) -> Result<NonexpMap> {
        self.map.as_ref().ok_or_else(|| cfg("missing [map] section"))?.build(model, theta)
    }

    pub fn build_metric(&self, model: &SpaceModel, theta: &Point) -> Result<MapMetric> {
        let spec = self.metric.as_ref().ok_or_else(|| cfg("missing [metric] section"))?;
        let m = match spec {
            MetricSpec::Series { truncation } => MapMetric::series(model, theta, &self.gauge()?, *truncation, self.budget),
            MetricSpec::Weighted { s } => MapMetric::weighted(model, theta, *s, self.budget),
            MetricSpec::Pointwise { truncation } => MapMetric::pointwise(model, *truncation),
        };
        m.map_err(|e| cfg(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BALL: &str = r#"
schema = 1
seed = 7
[model]
kind = "euclidean"
dim = 1
[gauge]
kind = "log"
[metric]
kind = "series"
[map]
kind = "affine1d"
a = 1.0
b = 1.0
[witness]
kind = "ball_invariance"
r = 0.5
"#;

    #[test]
    fn parses_and_builds() {
        let c = ExperimentConfig::from_toml(BALL).unwrap();
        let m = c.space().unwrap();
        let t = c.basepoint(&m).unwrap();
        let f = c.build_map(&m, &t).unwrap();
        assert_eq!(f.eval(&Point::scalar(2.0)).unwrap(), Point::scalar(3.0));
        assert!(matches!(c.build_metric(&m, &t).unwrap(), MapMetric::Series { .. }));
        assert_eq!(c.members, 100);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(ExperimentConfig::from_toml("schema = 2"), Err(LabError::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml("schema = 1\nbogus = 3"), Err(LabError::Config(_))));
        let c = ExperimentConfig::from_toml(&BALL.replace("a = 1.0", "a = 2.0")).unwrap();
        let m = c.space().unwrap();
        assert!(matches!(c.build_map(&m, &m.origin()), Err(LabError::Config(_))));
        let c = ExperimentConfig::from_toml(&BALL.replace("kind = \"log\"", "kind = \"power\"\n")).unwrap();
        assert!(c.gauge().is_ok());
    }

    #[test]
    fn echo_is_stable() {
        let c = ExperimentConfig::from_toml(BALL).unwrap();
        assert_eq!(c.echo(), ExperimentConfig::from_toml(BALL).unwrap().echo());
    }
}
