//! Metrics on spaces of self-mappings: the gauge series metric `d_{θ,φ}`,
//! the weighted sup metric `d_{θ,s}` and the pointwise metric `d_z`.
//!
//! Sup-based parts are sampled lower estimates; every value comes with a
//! certified bound for the part that was not evaluated (`tail_bound`).

pub mod gauge;
pub mod lemmas;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::geodesic::{extreme_points, DenseSequence, Point, SpaceModel};
use crate::mapping::NonexpMap;
use crate::sampling::{mix, par_argmax, SampleMode, Uniforms};
use crate::tolerances::{LOG_GAUGE_TRUNCATION, POWER_GAUGE_TRUNCATION, SUP_SAFETY_FACTOR};
use gauge::{Gauge, GaugeKind};

pub use gauge::{check_gauge_conditions, ConditionCheck, ConditionReport, TailMajorant};

/// Largest shell exponent of the weighted sup metric (`2^16`).
pub const WEIGHTED_MAX_SHELL: u32 = 16;
/// Default number of dense-sequence terms of the pointwise metric.
pub const POINTWISE_TRUNCATION: usize = 60;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MetricValue {
    /// Truncated or sampled value (a lower estimate for sup-based parts).
    pub value: f64,
    /// Certified bound on what the truncation or the sampled region leaves out.
    pub tail_bound: f64,
    pub budget_used: usize,
    /// Per-term sup estimates (`d_{n,θ}` for the series metric, per-shell
    /// maxima for the weighted metric, point distances for `d_z`).
    #[serde(skip)]
    pub terms: Vec<f64>,
    /// Where the largest sampled term was attained.
    #[serde(skip)]
    pub argmax: Option<Point>,
    pub sampled: bool,
}

impl MetricValue {
    fn zero() -> Self {
        MetricValue { value: 0.0, tail_bound: 0.0, budget_used: 0, terms: vec![], argmax: None, sampled: false }
    }

    /// `value + tail_bound`, with the sup safety factor on sampled values.
    pub fn certified(&self) -> f64 {
        if self.sampled {
            SUP_SAFETY_FACTOR * self.value + self.tail_bound
        } else {
            self.value + self.tail_bound
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapMetric {
    Series { theta: Point, gauge: Gauge, truncation: usize, budget: usize },
    WeightedSup { theta: Point, s: f64, budget: usize },
    Pointwise { sequence: DenseSequence, truncation: usize },
}

impl MapMetric {
    /// Series metric; refuses gauges without a certified tail.
    pub fn series(model: &SpaceModel, theta: &Point, gauge: &Gauge, truncation: Option<usize>, budget: usize) -> Result<Self> {
        model.validate(theta)?;
        gauge.require_summable()?;
        let truncation = truncation.unwrap_or_else(|| default_truncation(gauge));
        if truncation == 0 {
            return Err(invalid("truncation must be at least 1"));
        }
        if budget == 0 {
            return Err(invalid("budget must be at least 1"));
        }
        Ok(MapMetric::Series { theta: theta.clone(), gauge: gauge.clone(), truncation, budget })
    }

    pub fn weighted(model: &SpaceModel, theta: &Point, s: f64, budget: usize) -> Result<Self> {
        model.validate(theta)?;
        if !(s >= 1.0) || !s.is_finite() {
            return Err(invalid(format!("weight exponent s = {s} must be at least 1")));
        }
        if budget == 0 {
            return Err(invalid("budget must be at least 1"));
        }
        Ok(MapMetric::WeightedSup { theta: theta.clone(), s, budget })
    }

    pub fn pointwise(model: &SpaceModel, truncation: Option<usize>) -> Result<Self> {
        let truncation = truncation.unwrap_or(POINTWISE_TRUNCATION);
        if truncation == 0 {
            return Err(invalid("truncation must be at least 1"));
        }
        Ok(MapMetric::Pointwise { sequence: DenseSequence::new(model), truncation })
    }

    pub fn name(&self) -> String {
        match self {
            MapMetric::Series { gauge, .. } => format!("series[{}]", gauge.name()),
            MapMetric::WeightedSup { s, .. } => format!("weighted_sup[s={s}]"),
            MapMetric::Pointwise { .. } => "pointwise".into(),
        }
    }

    pub fn theta(&self) -> Option<&Point> {
        match self {
            MapMetric::Series { theta, .. } | MapMetric::WeightedSup { theta, .. } => Some(theta),
            MapMetric::Pointwise { .. } => None,
        }
    }

    pub fn distance(&self, f: &NonexpMap, g: &NonexpMap, seed: u64) -> Result<MetricValue> {
        match self {
            MapMetric::Series { theta, gauge, truncation, budget } => {
                series_metric(f, g, theta, gauge, *truncation, *budget, seed)
            }
            MapMetric::WeightedSup { theta, s, budget } => weighted_sup_metric(f, g, theta, *s, *budget, seed),
            MapMetric::Pointwise { sequence, truncation } => pointwise_metric(f, g, sequence, *truncation),
        }
    }
}

/// Default series truncation for a gauge.
pub fn default_truncation(gauge: &Gauge) -> usize {
    match gauge.kind {
        GaugeKind::Log => LOG_GAUGE_TRUNCATION,
        _ => POWER_GAUGE_TRUNCATION,
    }
}

fn same_model(f: &NonexpMap, g: &NonexpMap) -> Result<()> {
    if f.model() != g.model() {
        return Err(LabError::ModelMismatch { map_model: f.model().name(), other: g.model().name() });
    }
    Ok(())
}

pub(crate) fn hotspots_of(f: &NonexpMap, g: &NonexpMap) -> Vec<Vec<f64>> {
    let mut hs = f.hotspots();
    for h in g.hotspots() {
        if !hs.contains(&h) {
            hs.push(h);
        }
    }
    hs
}

/// Sampled maximum of `ρ(f(x),g(x))·w(ρ(x,θ))` over the shell
/// `r_in ≤ ρ(x,θ) ≤ r_out`, including axis extremes on both spheres, the
/// hotspots in the shell, and a local refinement of the best point.
pub(crate) fn shell_sup<W>(
    f: &NonexpMap,
    g: &NonexpMap,
    theta: &[f64],
    r_in: f64,
    r_out: f64,
    budget: usize,
    seed: u64,
    hotspots: &[Vec<f64>],
    weight: W,
) -> (f64, Option<Vec<f64>>, usize)
where
    W: Fn(f64) -> f64 + Sync,
{
    let m = f.model();
    let objective = |x: &[f64]| -> Option<f64> {
        let rho = m.d(x, theta);
        if rho > r_out * (1.0 + 1e-12) + 1e-12 || rho < r_in * (1.0 - 1e-12) {
            return None;
        }
        Some(m.d(&f.apply(x), &g.apply(x)) * weight(rho))
    };
    let mut best = par_argmax(budget, |b, len| {
        let mut u = Uniforms::new(SampleMode::Random, seed, b as u64);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..len {
            let x = m.sample_shell(theta, r_in, r_out, &mut u);
            if let Some(v) = objective(&x) {
                if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                    best = Some((v, x));
                }
            }
        }
        best
    });
    let center = Point::new(theta.to_vec());
    let mut candidates: Vec<Vec<f64>> = extreme_points(m, &center, r_out).into_iter().map(|p| p.coords).collect();
    if r_in > 0.0 {
        candidates.extend(extreme_points(m, &center, r_in).into_iter().skip(1).map(|p| p.coords));
    }
    candidates.extend(hotspots.iter().cloned());
    let mut used = budget;
    for x in candidates {
        used += 1;
        if let Some(v) = objective(&x) {
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, x));
            }
        }
    }
    if let Some((ref mut v, ref mut x)) = best {
        let mut u = Uniforms::new(SampleMode::Random, mix(seed, 0x5ef1_4e), u64::MAX);
        let mut sigma = 0.25 * (r_out - r_in).max(1e-12);
        for _ in 0..5 {
            for _ in 0..32 {
                let y = m.perturb(x, sigma * u.normal().abs(), &mut u);
                used += 1;
                if let Some(q) = objective(&y) {
                    if q > *v {
                        *v = q;
                        *x = y;
                    }
                }
            }
            sigma /= 4.0;
        }
    }
    match best {
        Some((v, x)) => (v, Some(x), used),
        None => (0.0, None, used),
    }
}

/// Sampled `d_{n,θ}(f,g) = sup{ρ(f(x),g(x)) : x ∈ B̄(θ,n)}`.
pub fn d_n_theta(f: &NonexpMap, g: &NonexpMap, n: usize, theta: &Point, budget: usize, seed: u64) -> Result<MetricValue> {
    same_model(f, g)?;
    let m = f.model();
    m.validate(theta)?;
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let radius = n as f64;
    if radius > m.max_radius() {
        return Err(invalid(format!("ball radius {radius} exceeds the usable range of {}", m.name())));
    }
    let hs = hotspots_of(f, g);
    let (v, x, used) = shell_sup(f, g, &theta.coords, 0.0, radius, budget, seed, &hs, |_| 1.0);
    Ok(MetricValue {
        value: v,
        tail_bound: 0.0,
        budget_used: used,
        terms: vec![v],
        argmax: x.map(Point::new),
        sampled: true,
    })
}

/// Sampled sup of `ρ(f(x),g(x))` over `B̄(θ,n)` for `n = 1..=count`: each
/// shell `(n-1, n]` is sampled separately and the results are prefix maxima.
pub(crate) fn ball_sups(f: &NonexpMap, g: &NonexpMap, theta: &Point, count: usize, budget: usize, seed: u64) -> (Vec<f64>, usize, Option<Point>) {
    let hs = hotspots_of(f, g);
    let shells: Vec<(f64, Option<Vec<f64>>, usize)> = (1..=count)
        .into_par_iter()
        .map(|n| {
            shell_sup(f, g, &theta.coords, (n - 1) as f64, n as f64, budget, mix(seed, n as u64), &hs, |_| 1.0)
        })
        .collect();
    let mut sups = Vec::with_capacity(count);
    let mut used = 0;
    let mut best = 0.0f64;
    let mut argmax = None;
    for (v, x, u) in shells {
        used += u;
        if v > best {
            best = v;
            argmax = x;
        }
        sups.push(best);
    }
    (sups, used, argmax.map(Point::new))
}

/// Truncated `d_{θ,φ}(f,g) = Σ φ⁻¹(1/n) d_{n,θ}/(1+d_{n,θ})` with a
/// certified tail `Σ_{n>N} φ⁻¹(1/n)`. On models with a finite usable
/// radius the terms beyond it are moved into the tail.
pub fn series_metric(
    f: &NonexpMap,
    g: &NonexpMap,
    theta: &Point,
    gauge: &Gauge,
    truncation: usize,
    budget: usize,
    seed: u64,
) -> Result<MetricValue> {
    same_model(f, g)?;
    f.model().validate(theta)?;
    gauge.require_summable()?;
    if truncation == 0 {
        return Err(invalid("truncation must be at least 1"));
    }
    let n_eff = truncation.min(f.model().max_radius().floor() as usize).max(1);
    let (sups, used, argmax) = ball_sups(f, g, theta, n_eff, budget.max(1), seed);
    let value = series_sum(gauge, &sups);
    Ok(MetricValue {
        value,
        tail_bound: gauge.tail(n_eff)?,
        budget_used: used,
        terms: sups,
        argmax,
        sampled: true,
    })
}

/// `Σ_n φ⁻¹(1/n) d_n/(1+d_n)` in index order.
pub fn series_sum(gauge: &Gauge, d: &[f64]) -> f64 {
    d.iter()
        .enumerate()
        .map(|(i, &dn)| if dn == 0.0 { 0.0 } else { gauge.phi_inv(1.0 / (i + 1) as f64) * (dn / (1.0 + dn)) })
        .sum()
}

/// Outer radius of weighted shell `k`, capped at the model's usable radius.
fn weighted_shell(model: &SpaceModel, k: u32) -> Option<(f64, f64)> {
    let r_out = (k as f64).exp2().min(model.max_radius());
    let r_in = if k == 0 { 0.0 } else { ((k - 1) as f64).exp2() };
    (r_in < r_out).then_some((r_in, r_out))
}

/// Sampled `d_{θ,s}(f,g) = sup ρ(f(x),g(x))/(1+ρ(x,θ)^s)` over shells of
/// outer radius `2^0, …, 2^16`. Beyond the covered radius `R` the bound
/// `ρ(f(x),g(x)) ≤ 2ρ(x,θ) + ρ(f(θ),g(θ))` gives the tail
/// `(2 + ρ(f(θ),g(θ))) R^(1-s)`.
pub fn weighted_sup_metric(f: &NonexpMap, g: &NonexpMap, theta: &Point, s: f64, budget: usize, seed: u64) -> Result<MetricValue> {
    same_model(f, g)?;
    let m = f.model();
    m.validate(theta)?;
    if !(s >= 1.0) || !s.is_finite() {
        return Err(invalid(format!("weight exponent s = {s} must be at least 1")));
    }
    let hs = hotspots_of(f, g);
    let shells: Vec<(f64, f64)> = (0..=WEIGHTED_MAX_SHELL).filter_map(|k| weighted_shell(m, k)).collect();
    let results: Vec<(f64, Option<Vec<f64>>, usize)> = shells
        .par_iter()
        .enumerate()
        .map(|(k, &(r_in, r_out))| {
            shell_sup(f, g, &theta.coords, r_in, r_out, budget.max(1), mix(seed, k as u64), &hs, |rho| {
                1.0 / (1.0 + rho.powf(s))
            })
        })
        .collect();
    let mut value = 0.0f64;
    let mut argmax = None;
    let mut used = 0;
    let mut terms = Vec::with_capacity(results.len());
    for (v, x, u) in results {
        used += u;
        terms.push(v);
        if v > value {
            value = v;
            argmax = x;
        }
    }
    let covered = shells.last().map(|s| s.1).unwrap_or(1.0).max(1.0);
    let c = m.d(&f.apply(&theta.coords), &g.apply(&theta.coords));
    let tail = (2.0 + c) * covered.powf(1.0 - s);
    Ok(MetricValue { value, tail_bound: tail, budget_used: used, terms, argmax: argmax.map(Point::new), sampled: true })
}

/// `d_z(f,g) = Σ_{n≤N} 2^-n ρ_n/(1+ρ_n)` with `ρ_n = ρ(f(z_n),g(z_n))`;
/// exact up to the tail `2^-N`.
pub fn pointwise_metric(f: &NonexpMap, g: &NonexpMap, sequence: &DenseSequence, truncation: usize) -> Result<MetricValue> {
    same_model(f, g)?;
    if &sequence.model != f.model() {
        return Err(LabError::ModelMismatch { map_model: f.model().name(), other: sequence.model.name() });
    }
    if truncation == 0 {
        return Err(invalid("truncation must be at least 1"));
    }
    let points = sequence.take(truncation);
    let m = f.model();
    let terms: Vec<f64> = points.par_iter().map(|z| m.d(&f.apply(&z.coords), &g.apply(&z.coords))).collect();
    Ok(pointwise_from_terms(terms))
}

/// Pointwise metric value from the distances at `z_1, z_2, …`.
pub fn pointwise_from_terms(terms: Vec<f64>) -> MetricValue {
    let n = terms.len();
    let value = terms
        .iter()
        .enumerate()
        .map(|(i, &r)| if r == 0.0 { 0.0 } else { (-((i + 1) as f64)).exp2() * (r / (1.0 + r)) })
        .sum();
    MetricValue { value, tail_bound: (-(n as f64)).exp2(), budget_used: n, terms, argmax: None, sampled: false }
}

impl Default for MetricValue {
    fn default() -> Self {
        Self::zero()
    }
}
