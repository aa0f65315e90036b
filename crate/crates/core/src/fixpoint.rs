//! Picard iteration with residual stopping, ball-invariance checks and an
//! audit of the Rakotch step inequality along trajectories.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geodesic::Point;
use crate::mapping::{NonexpMap, RakotchGauge};
use crate::metrics::{hotspots_of, shell_sup};

pub const DEFAULT_MAX_ITER: usize = 1_000_000;
/// Every iteration up to this index is recorded; later ones are thinned.
const DENSE_RECORD: usize = 1000;

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointReport {
    pub iterations: usize,
    pub final_point: Point,
    /// `ρ(x, f(x))` at the final point.
    pub residual: f64,
    pub tolerance: f64,
    /// `(iteration, residual)` pairs.
    pub trajectory: Vec<(usize, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauge_used: Option<RakotchGauge>,
    pub converged: bool,
    /// `residual/(1-L)` when the claimed bound `L` is below one.
    pub error_bound: Option<f64>,
}

struct Run {
    report: FixedPointReport,
    /// Consecutive step lengths `ρ(x_k, x_{k+1})`.
    steps: Vec<f64>,
}

fn run(f: &NonexpMap, x0: &Point, tol: f64, max_iter: usize, keep_steps: bool) -> Result<Run> {
    let m = f.model();
    m.validate(x0)?;
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance {tol} must be positive")));
    }
    if max_iter == 0 {
        return Err(invalid("max_iter must be at least 1"));
    }
    let mut x = x0.coords.clone();
    let mut fx = f.apply(&x);
    let mut residual = m.d(&x, &fx);
    let mut trajectory = vec![(0, residual)];
    let mut steps = Vec::new();
    let mut next_thin = DENSE_RECORD;
    let mut k = 0;
    while residual > tol && k < max_iter {
        x = fx;
        fx = f.apply(&x);
        k += 1;
        if keep_steps {
            steps.push(residual);
        }
        residual = m.d(&x, &fx);
        if k <= DENSE_RECORD || k >= next_thin {
            trajectory.push((k, residual));
            if k >= next_thin {
                next_thin = next_thin + next_thin / 10;
            }
        }
    }
    if trajectory.last().map(|t| t.0) != Some(k) {
        trajectory.push((k, residual));
    }
    let converged = residual <= tol;
    let lip = f.claimed_lip();
    Ok(Run {
        report: FixedPointReport {
            iterations: k,
            final_point: Point::new(x),
            residual,
            tolerance: tol,
            trajectory,
            gauge_used: None,
            converged,
            error_bound: (lip < 1.0).then(|| residual / (1.0 - lip)),
        },
        steps,
    })
}

/// Picard iteration `x_{k+1} = f(x_k)` until `ρ(x_k, f(x_k)) ≤ tol` or
/// `max_iter` applications of `f`.
pub fn iterate(f: &NonexpMap, x0: &Point, tol: f64, max_iter: usize) -> Result<FixedPointReport> {
    Ok(run(f, x0, tol, max_iter, false)?.report)
}

/// Largest `ρ(x_k, θ)` along the Picard orbit of `x0`, run with the same
/// stopping rule as [`iterate`]. Returns the distance and the step count.
pub fn max_orbit_distance(f: &NonexpMap, x0: &Point, theta: &Point, tol: f64, max_iter: usize) -> Result<(f64, usize)> {
    let m = f.model();
    m.validate(theta)?;
    let report = run(f, x0, tol, max_iter, false)?.report;
    let mut x = x0.coords.clone();
    let mut worst = m.d(&x, &theta.coords);
    for _ in 0..report.iterations {
        x = f.apply(&x);
        worst = worst.max(m.d(&x, &theta.coords));
    }
    Ok((worst, report.iterations))
}

#[derive(Debug, Clone, Serialize)]
pub struct BallCheck {
    pub radius: f64,
    pub passed: bool,
    /// `max ρ(f(x),θ) - M` over the sampled ball.
    pub worst_margin: f64,
    pub worst_point: Option<Point>,
    pub samples: usize,
}

/// Checks `f(B̄(θ,M)) ⊂ B̄(θ,M)` on samples, boundary axis points and the
/// map's hotspots.
pub fn ball_invariance_check(f: &NonexpMap, theta: &Point, m_radius: f64, budget: usize, seed: u64) -> Result<BallCheck> {
    let model = f.model();
    model.validate(theta)?;
    if !(m_radius > 0.0) || m_radius > model.max_radius() {
        return Err(invalid(format!("radius {m_radius} is out of range for {}", model.name())));
    }
    if budget == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    let centre = NonexpMap::constant(model, theta)?;
    let hs = hotspots_of(f, &centre);
    let (v, x, used) = shell_sup(f, &centre, &theta.coords, 0.0, m_radius, budget, seed, &hs, |_| 1.0);
    let worst = v - m_radius;
    Ok(BallCheck {
        radius: m_radius,
        passed: worst <= model.tolerance(),
        worst_margin: worst,
        worst_point: x.map(Point::new),
        samples: used,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RakotchAudit {
    pub primary: FixedPointReport,
    pub secondary: FixedPointReport,
    pub second_start: Point,
    pub step_checks: usize,
    pub step_violations: usize,
    /// Largest `ρ(x_{k+1},x_{k+2}) - φ(ρ(x_k,x_{k+1}))ρ(x_k,x_{k+1})`.
    pub worst_step_excess: f64,
    pub limit_gap: f64,
    /// Both runs converged and their limits agree within `10·tol`.
    pub unique: bool,
    /// Every gauge is below `1 - 1e-6`, so agreement is expected.
    pub uniqueness_expected: bool,
}

/// Iterates from `x0` and from a second start, checking the step inequality
/// `ρ(x_{k+1},x_{k+2}) ≤ φ_{f,M}(ρ(x_k,x_{k+1})) ρ(x_k,x_{k+1}) + tol` along
/// the first trajectory and comparing the two limits.
///
/// Both runs stop at `tol·(1-c)` with `c` the largest gauge, so that each
/// limit is within about `tol` of the fixed point.
pub fn rakotch_convergence_audit(
    f: &NonexpMap,
    theta: &Point,
    x0: &Point,
    gauge: &RakotchGauge,
    tol: f64,
    second_start: Option<&Point>,
) -> Result<RakotchAudit> {
    let m = f.model();
    m.validate(theta)?;
    if gauge.map_fingerprint != f.describe() || gauge.theta != *theta {
        return Err(invalid("gauge was computed for a different map or basepoint"));
    }
    let c = gauge.max_gauge();
    let inner_tol = tol * (1.0 - c).clamp(1e-6, 1.0);
    let primary = run(f, x0, inner_tol, DEFAULT_MAX_ITER, true)?;
    let second = match second_start {
        Some(p) => {
            m.validate(p)?;
            p.clone()
        }
        None => {
            let d = (gauge.n_max as f64).max(2.0 * m.d(&theta.coords, &x0.coords) + 1.0).min(m.max_radius() / 2.0);
            m.point_at_distance(theta, d, None)?.point
        }
    };
    let secondary = run(f, &second, inner_tol, DEFAULT_MAX_ITER, false)?.report;
    let steps = &primary.steps;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for w in steps.windows(2) {
        let excess = w[1] - gauge.step(w[0]) * w[0];
        worst = worst.max(excess);
        if excess > tol {
            violations += 1;
        }
    }
    let mut primary = primary.report;
    primary.gauge_used = Some(gauge.clone());
    let gap = m.d(&primary.final_point.coords, &secondary.final_point.coords);
    Ok(RakotchAudit {
        unique: primary.converged && secondary.converged && gap <= 10.0 * tol,
        uniqueness_expected: c < 1.0 - 1e-6,
        step_checks: steps.len().saturating_sub(1),
        step_violations: violations,
        worst_step_excess: if worst.is_finite() { worst } else { 0.0 },
        limit_gap: gap,
        primary,
        secondary,
        second_start: second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::SpaceModel;
    use crate::mapping::rakotch_gauges;

    fn line() -> SpaceModel {
        SpaceModel::euclidean(1).unwrap()
    }

    #[test]
    fn iterate_examples() {
        let m = line();
        let f = NonexpMap::affine_1d(&m, 0.5, 1.0).unwrap();
        let r = iterate(&f, &Point::scalar(0.0), 1e-8, 1000).unwrap();
        assert!(r.converged && r.iterations <= 35);
        assert!((r.final_point.coords[0] - 2.0).abs() < 3e-8);
        let c = NonexpMap::constant(&m, &Point::scalar(3.0)).unwrap();
        let r = iterate(&c, &Point::scalar(0.0), 1e-8, 10).unwrap();
        assert_eq!((r.iterations, r.final_point.coords[0]), (1, 3.0));
        let id = NonexpMap::identity(&m);
        let r = iterate(&id, &Point::scalar(7.0), 1e-8, 10).unwrap();
        assert_eq!((r.iterations, r.residual), (0, 0.0));
        let t = NonexpMap::affine_1d(&m, 1.0, 1.0).unwrap();
        let r = iterate(&t, &Point::scalar(0.0), 1e-8, 50).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 50);
    }

    #[test]
    fn trajectory_is_thinned() {
        let m = line();
        let t = NonexpMap::affine_1d(&m, 1.0, 1.0).unwrap();
        let r = iterate(&t, &Point::scalar(0.0), 1e-8, 20_000).unwrap();
        assert!(r.trajectory.len() < 1100);
        assert_eq!(r.trajectory.last().unwrap().0, 20_000);
    }

    #[test]
    fn ball_checks() {
        let m = line();
        let f = NonexpMap::affine_1d(&m, 11.0 / 12.0, 1.0).unwrap();
        let o = Point::scalar(0.0);
        let c = ball_invariance_check(&f, &o, 24.0, 256, 1).unwrap();
        assert!(c.passed && c.worst_margin <= -1.0 + 1e-12);
        assert!(ball_invariance_check(&f, &o, 30.0, 256, 1).unwrap().passed);
        let t = NonexpMap::affine_1d(&m, 1.0, 1.0).unwrap();
        let c = ball_invariance_check(&t, &o, 10.0, 256, 1).unwrap();
        assert!(!c.passed && (c.worst_margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn audit_affine_contraction() {
        let m = line();
        let f = NonexpMap::affine_1d(&m, 0.5, 1.0).unwrap();
        let o = Point::scalar(0.0);
        let g = rakotch_gauges(&f, &o, 8, 256, 1).unwrap();
        let a = rakotch_convergence_audit(&f, &o, &o, &g, 1e-8, Some(&Point::scalar(100.0))).unwrap();
        assert!(a.unique && a.step_violations == 0);
        assert!((a.primary.final_point.coords[0] - 2.0).abs() < 1e-7);
        assert!((a.secondary.final_point.coords[0] - 2.0).abs() < 1e-7);
        let other = NonexpMap::identity(&m);
        assert!(rakotch_convergence_audit(&other, &o, &o, &g, 1e-8, None).is_err());
    }
}
