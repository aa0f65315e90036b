//! Sampled verification of the hyperbolicity identities.

use rayon::prelude::*;
use serde::Serialize;

use super::{ModelKind, SpaceModel};
use crate::error::{invalid, Result};
use crate::sampling::{batch_count, batch_len, SampleMode, Uniforms};

/// Worst violation of one property over the samples.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PropertyViolation {
    pub name: &'static str,
    pub max_violation: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct AxiomReport {
    pub model: String,
    pub samples: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub properties: Vec<PropertyViolation>,
}

pub const PROPERTY_NAMES: [&str; 5] = [
    "segment-position",
    "hyperbolic-inequality",
    "segment-parametrization",
    "ball-convexity",
    "ray-length",
];

/// Sampling radius used for the axiom check in each model.
pub fn default_scale(model: &SpaceModel) -> f64 {
    match model.kind {
        ModelKind::Hyperboloid2 => 5.0,
        _ => 50.0,
    }
}

/// Checks, on `sample_count` random tuples `(x, y, z, λ, μ)`:
/// - `ρ(x, c) = λρ(x,y)` and `ρ(c, y) = (1-λ)ρ(x,y)` for `c = (1-λ)x ⊕ λy`,
/// - `ρ((1-λ)x ⊕ λy, (1-λ)x ⊕ λz) ≤ λρ(y,z)`,
/// - `ρ((1-μ)x ⊕ μy, (1-λ)x ⊕ λy) = |λ-μ|ρ(x,y)`,
/// - balls around `z` are convex,
/// - ray shooting lands at the requested distance.
pub fn verify_hyperbolicity(model: &SpaceModel, sample_count: usize, seed: u64) -> Result<AxiomReport> {
    verify_hyperbolicity_with(model, sample_count, seed, model.tolerance(), default_scale(model))
}

pub fn verify_hyperbolicity_with(
    model: &SpaceModel,
    sample_count: usize,
    seed: u64,
    tolerance: f64,
    scale: f64,
) -> Result<AxiomReport> {
    if sample_count == 0 {
        return Err(invalid("sample_count must be at least 1"));
    }
    let o = model.origin().coords;
    let per_batch: Vec<[f64; 5]> = (0..batch_count(sample_count))
        .into_par_iter()
        .map(|b| {
            let mut u = Uniforms::new(SampleMode::Random, seed, b as u64);
            let mut worst = [0.0f64; 5];
            for _ in 0..batch_len(sample_count, b) {
                let x = model.sample_shell(&o, 0.0, scale, &mut u);
                let y = model.sample_shell(&o, 0.0, scale, &mut u);
                let z = model.sample_shell(&o, 0.0, scale, &mut u);
                let lam = u.uniform();
                let mu = u.uniform();
                let dxy = model.d(&x, &y);

                let c = model.comb(&x, &y, lam);
                let v0 = (model.d(&x, &c) - lam * dxy)
                    .abs()
                    .max((model.d(&c, &y) - (1.0 - lam) * dxy).abs());

                let cz = model.comb(&x, &z, lam);
                let v1 = (model.d(&c, &cz) - lam * model.d(&y, &z)).max(0.0);

                let cm = model.comb(&x, &y, mu);
                let v2 = (model.d(&cm, &c) - (lam - mu).abs() * dxy).abs();

                let r = model.d(&z, &x).max(model.d(&z, &y));
                let v3 = (model.d(&model.comb(&x, &y, mu), &z) - r).max(0.0);

                let t = scale * u.uniform();
                let dir = model.random_direction(&x, &mut u);
                let (p, _) = model.shoot(&x, &dir, t);
                let v4 = (model.d(&x, &p) - t).abs();

                for (w, v) in worst.iter_mut().zip([v0, v1, v2, v3, v4]) {
                    if v > *w || v.is_nan() {
                        *w = if v.is_nan() { f64::INFINITY } else { v };
                    }
                }
            }
            worst
        })
        .collect();
    let mut worst = [0.0f64; 5];
    for w in per_batch {
        for i in 0..5 {
            worst[i] = worst[i].max(w[i]);
        }
    }
    let max_violation = worst.iter().cloned().fold(0.0, f64::max);
    Ok(AxiomReport {
        model: model.name(),
        samples: sample_count,
        max_violation,
        tolerance,
        passed: max_violation <= tolerance,
        properties: PROPERTY_NAMES
            .iter()
            .zip(worst)
            .map(|(name, max_violation)| PropertyViolation { name, max_violation })
            .collect(),
    })
}
