//! Sampling closed balls and annuli.
//!
//! Points are drawn directly (random direction times a radius with the
//! model's volume law) rather than by bounding-box rejection, whose
//! acceptance rate collapses in higher dimension.

use rayon::prelude::*;

use super::{ModelKind, Point, SpaceModel};
use crate::error::{invalid, Result};
use crate::sampling::{batch_count, batch_len, SampleMode, Uniforms};

impl SpaceModel {
    /// Radius in `[r_in, r_out]` following the model's volume growth.
    fn radial_draw(&self, r_in: f64, r_out: f64, u: f64) -> f64 {
        match self.kind {
            ModelKind::Hyperboloid2 => {
                let (a, b) = (r_in.cosh(), r_out.cosh());
                (a + u * (b - a)).acosh().clamp(r_in, r_out)
            }
            _ => {
                if r_out <= 0.0 {
                    return 0.0;
                }
                let k = self.dim as f64;
                let a = (r_in / r_out).powf(k);
                (r_out * (a + u * (1.0 - a)).powf(1.0 / k)).clamp(r_in, r_out)
            }
        }
    }

    /// One point with `r_in <= ρ(center, p) <= r_out` (on the half-space the
    /// reflection step may move it closer to the center).
    pub fn sample_shell(&self, center: &[f64], r_in: f64, r_out: f64, u: &mut Uniforms) -> Vec<f64> {
        u.next_point();
        let rad = self.radial_draw(r_in, r_out, u.uniform());
        let dir = self.random_direction(center, u);
        let (mut p, _) = match self.kind {
            // Sample in the full space, then reflect into the half-space.
            ModelKind::HalfSpace => (center.iter().zip(&dir).map(|(a, b)| a + rad * b).collect(), false),
            _ => self.shoot(center, &dir, rad),
        };
        if self.kind == ModelKind::HalfSpace {
            let last = self.dim - 1;
            p[last] = p[last].abs();
        }
        p
    }

    /// Point near `x` at a given distance in a random direction, staying in
    /// the model.
    pub fn perturb(&self, x: &[f64], dist: f64, u: &mut Uniforms) -> Vec<f64> {
        let dir = self.random_direction(x, u);
        self.shoot(x, &dir, dist).0
    }
}

/// `count` points of the closed ball `B̄(center, radius)`, deterministic in `seed`.
pub fn ball_sampler(model: &SpaceModel, center: &Point, radius: f64, count: usize, seed: u64) -> Result<Vec<Point>> {
    ball_sampler_with(model, center, radius, count, seed, SampleMode::Random)
}

pub fn ball_sampler_with(
    model: &SpaceModel,
    center: &Point,
    radius: f64,
    count: usize,
    seed: u64,
    mode: SampleMode,
) -> Result<Vec<Point>> {
    model.validate(center)?;
    if !(radius > 0.0) {
        return Err(invalid(format!("ball radius {radius} must be positive")));
    }
    if radius > model.max_radius() {
        return Err(invalid(format!(
            "ball radius {radius} exceeds the usable range {} of {}",
            model.max_radius(),
            model.name()
        )));
    }
    let batches: Vec<Vec<Point>> = (0..batch_count(count))
        .into_par_iter()
        .map(|b| {
            let mut u = Uniforms::new(mode, seed, b as u64);
            (0..batch_len(count, b))
                .map(|_| Point::new(model.sample_shell(&center.coords, 0.0, radius, &mut u)))
                .collect()
        })
        .collect();
    Ok(batches.into_iter().flatten().collect())
}

/// Deterministic boundary extremes of `B̄(center, radius)`: the center and
/// the points at distance `radius` along ± every tangent axis.
pub fn extreme_points(model: &SpaceModel, center: &Point, radius: f64) -> Vec<Point> {
    let c = &center.coords;
    let mut out = vec![center.clone()];
    if radius <= 0.0 {
        return out;
    }
    for e in model.tangent_basis(c) {
        for sign in [1.0, -1.0] {
            let dir: Vec<f64> = e.iter().map(|a| sign * a).collect();
            let (p, fallback) = model.shoot(c, &dir, radius);
            if !fallback {
                out.push(Point::new(p));
            }
        }
    }
    out
}
