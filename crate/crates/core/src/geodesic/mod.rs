//! Concrete unbounded geodesic spaces with a distinguished segment family.
//!
//! All four models are hyperbolic in the convex-combination sense: the
//! point `(1-λ)x ⊕ λy` lies on the chosen segment from `x` to `y` at
//! distance `λρ(x,y)` from `x`, and combinations toward a common endpoint
//! contract distances by `λ`.

pub mod axioms;
pub mod ball;
pub mod dense;

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{invalid, LabError, Result};
use crate::sampling::Uniforms;
use crate::tolerances::{
    EXACT_MODEL_TOL, HYPERBOLOID_CONSTRAINT_TOL, HYPERBOLOID_MAX_RADIUS, HYPERBOLOID_TOL,
    L1_DIM_LIMIT,
};

pub use axioms::{verify_hyperbolicity, AxiomReport};
pub use ball::{ball_sampler, ball_sampler_with, extreme_points};
pub use dense::DenseSequence;

/// A point given by its coordinates. On the hyperboloid these are ambient
/// Minkowski coordinates with the time coordinate last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    /// Point on a one-dimensional model.
    pub fn scalar(x: f64) -> Self {
        Point { coords: vec![x] }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point { coords }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Euclidean,
    /// Closed half-space `{x : x_last >= 0}`.
    HalfSpace,
    /// `R^dim` with the l1 metric and straight segments.
    L1,
    /// Hyperbolic plane in the hyperboloid model.
    Hyperboloid2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceModel {
    pub kind: ModelKind,
    pub dim: usize,
}

/// Outcome of ray shooting.
#[derive(Debug, Clone, PartialEq)]
pub struct RayPoint {
    pub point: Point,
    /// True when the requested ray left the half-space and a
    /// boundary-parallel direction was used instead.
    pub fallback: bool,
}

fn mink(x: &[f64], y: &[f64]) -> f64 {
    x[0] * y[0] + x[1] * y[1] - x[2] * y[2]
}

fn hyp_lift(mut p: Vec<f64>) -> Vec<f64> {
    // Re-project onto the upper sheet keeping the spatial coordinates.
    p[2] = (1.0 + p[0] * p[0] + p[1] * p[1]).sqrt();
    p
}

fn euclid_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a.abs()).sum()
}

impl SpaceModel {
    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(ModelKind::Euclidean, dim)
    }

    pub fn half_space(dim: usize) -> Result<Self> {
        Self::new(ModelKind::HalfSpace, dim)
    }

    pub fn l1(dim: usize) -> Result<Self> {
        Self::l1_with_limit(dim, L1_DIM_LIMIT)
    }

    pub fn l1_with_limit(dim: usize, limit: usize) -> Result<Self> {
        if dim > limit {
            return Err(invalid(format!("l1 dimension {dim} exceeds the limit {limit}")));
        }
        if dim == 0 {
            return Err(invalid("model dimension must be positive"));
        }
        Ok(SpaceModel { kind: ModelKind::L1, dim })
    }

    pub fn hyperboloid2() -> Self {
        SpaceModel { kind: ModelKind::Hyperboloid2, dim: 2 }
    }

    pub fn new(kind: ModelKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("model dimension must be positive"));
        }
        match kind {
            ModelKind::Hyperboloid2 if dim != 2 => {
                Err(invalid("the hyperboloid model is two-dimensional"))
            }
            ModelKind::L1 if dim > L1_DIM_LIMIT => Err(invalid(format!(
                "l1 dimension {dim} exceeds the limit {L1_DIM_LIMIT}"
            ))),
            _ => Ok(SpaceModel { kind, dim }),
        }
    }

    /// Number of stored coordinates per point.
    pub fn coord_len(&self) -> usize {
        match self.kind {
            ModelKind::Hyperboloid2 => 3,
            _ => self.dim,
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            ModelKind::Euclidean => format!("Euclidean({})", self.dim),
            ModelKind::HalfSpace => format!("HalfSpace({})", self.dim),
            ModelKind::L1 => format!("L1({})", self.dim),
            ModelKind::Hyperboloid2 => "Hyperboloid2".to_string(),
        }
    }

    /// Default tolerance for geodesic identities in this model.
    pub fn tolerance(&self) -> f64 {
        match self.kind {
            ModelKind::Hyperboloid2 => HYPERBOLOID_TOL,
            _ => EXACT_MODEL_TOL,
        }
    }

    /// Radius beyond which sampling is refused or truncated.
    pub fn max_radius(&self) -> f64 {
        match self.kind {
            ModelKind::Hyperboloid2 => HYPERBOLOID_MAX_RADIUS,
            _ => f64::INFINITY,
        }
    }

    /// Distinguished basepoint: the origin, or the hyperboloid apex.
    pub fn origin(&self) -> Point {
        match self.kind {
            ModelKind::Hyperboloid2 => Point::new(vec![0.0, 0.0, 1.0]),
            _ => Point::new(vec![0.0; self.dim]),
        }
    }

    /// Hyperboloid point at intrinsic polar coordinates around the apex.
    pub fn polar(&self, radius: f64, angle: f64) -> Result<Point> {
        if self.kind != ModelKind::Hyperboloid2 {
            return Err(invalid("polar coordinates are only defined on the hyperboloid"));
        }
        let s = radius.sinh();
        Ok(Point::new(hyp_lift(vec![s * angle.cos(), s * angle.sin(), 0.0])))
    }

    /// Lift a hyperboloid point from its two spatial coordinates.
    pub fn lift(&self, x: f64, y: f64) -> Point {
        Point::new(hyp_lift(vec![x, y, 0.0]))
    }

    pub fn validate(&self, p: &Point) -> Result<()> {
        if p.len() != self.coord_len() {
            return Err(LabError::DimensionMismatch { expected: self.coord_len(), got: p.len() });
        }
        if p.coords.iter().any(|c| !c.is_finite()) {
            return Err(self.bad(p, "non-finite coordinate"));
        }
        match self.kind {
            ModelKind::HalfSpace if p.coords[self.dim - 1] < 0.0 => {
                Err(self.bad(p, "last coordinate is negative"))
            }
            ModelKind::Hyperboloid2 => {
                let c = &p.coords;
                if c[2] <= 0.0 {
                    return Err(self.bad(p, "time coordinate is not positive"));
                }
                let q = mink(c, c) + 1.0;
                if q.abs() > HYPERBOLOID_CONSTRAINT_TOL * c[2] * c[2] {
                    return Err(self.bad(p, "Minkowski form differs from -1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn bad(&self, p: &Point, reason: &str) -> LabError {
        LabError::InvalidPoint { model: self.name(), reason: format!("{reason} at {p}") }
    }

    // ---- unchecked kernels on raw coordinates ----

    /// Distance on raw coordinates (no validation).
    pub fn d(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            ModelKind::Euclidean | ModelKind::HalfSpace => {
                x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            }
            ModelKind::L1 => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
            ModelKind::Hyperboloid2 => {
                let b = -mink(x, y);
                if b < 2.0 {
                    let w = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
                    let q = mink(&w, &w).max(0.0);
                    2.0 * (q.sqrt() / 2.0).asinh()
                } else {
                    b.acosh()
                }
            }
        }
    }

    /// Convex combination `(1-lam)x ⊕ lam y` on raw coordinates.
    pub fn comb(&self, x: &[f64], y: &[f64], lam: f64) -> Vec<f64> {
        if lam == 0.0 {
            return x.to_vec();
        }
        if lam == 1.0 {
            return y.to_vec();
        }
        match self.kind {
            ModelKind::Hyperboloid2 => {
                let d = self.d(x, y);
                if d < 1e-300 {
                    return x.to_vec();
                }
                let sd = d.sinh();
                let a = ((1.0 - lam) * d).sinh() / sd;
                let b = (lam * d).sinh() / sd;
                hyp_lift(vec![a * x[0] + b * y[0], a * x[1] + b * y[1], 0.0])
            }
            _ => x.iter().zip(y).map(|(a, b)| (1.0 - lam) * a + lam * b).collect(),
        }
    }

    /// Unit tangent at `from` pointing along the segment to `to`, or `None`
    /// when the points coincide.
    pub fn direction_toward(&self, from: &[f64], to: &[f64]) -> Option<Vec<f64>> {
        match self.kind {
            ModelKind::Hyperboloid2 => {
                let c = mink(from, to);
                let u: Vec<f64> = (0..3).map(|i| to[i] + c * from[i]).collect();
                let n2 = mink(&u, &u);
                if n2.is_nan() || n2 <= 1e-28 * (1.0 + from[2] * from[2]) {
                    return None;
                }
                let n = n2.sqrt();
                Some(u.into_iter().map(|a| a / n).collect())
            }
            _ => {
                let v: Vec<f64> = to.iter().zip(from).map(|(a, b)| a - b).collect();
                let n = self.tangent_norm(&v);
                if n == 0.0 || !n.is_finite() {
                    return None;
                }
                Some(v.into_iter().map(|a| a / n).collect())
            }
        }
    }

    fn tangent_norm(&self, v: &[f64]) -> f64 {
        match self.kind {
            ModelKind::L1 => l1_norm(v),
            ModelKind::Hyperboloid2 => mink(v, v).max(0.0).sqrt(),
            _ => euclid_norm(v),
        }
    }

    /// Orthonormal tangent basis at `at` (with respect to the model's norm
    /// for the flat models, the Minkowski form on the hyperboloid).
    pub fn tangent_basis(&self, at: &[f64]) -> Vec<Vec<f64>> {
        match self.kind {
            ModelKind::Hyperboloid2 => {
                let mut basis: Vec<Vec<f64>> = Vec::with_capacity(2);
                for axis in 0..2 {
                    let mut e = vec![0.0; 3];
                    e[axis] = 1.0;
                    let c = mink(at, &e);
                    let mut w: Vec<f64> = (0..3).map(|i| e[i] + c * at[i]).collect();
                    for b in &basis {
                        let c2 = mink(&w, b);
                        for i in 0..3 {
                            w[i] -= c2 * b[i];
                        }
                    }
                    let n = mink(&w, &w).sqrt();
                    basis.push(w.into_iter().map(|a| a / n).collect());
                }
                basis
            }
            _ => (0..self.dim)
                .map(|i| {
                    let mut e = vec![0.0; self.dim];
                    e[i] = 1.0;
                    e
                })
                .collect(),
        }
    }

    /// Random unit tangent direction at `at`.
    pub fn random_direction(&self, at: &[f64], u: &mut Uniforms) -> Vec<f64> {
        match self.kind {
            ModelKind::Hyperboloid2 => {
                let b = self.tangent_basis(at);
                let a = std::f64::consts::TAU * u.uniform();
                (0..3).map(|i| a.cos() * b[0][i] + a.sin() * b[1][i]).collect()
            }
            ModelKind::L1 => {
                // Uniform on the l1 sphere: normalized exponentials with random signs.
                let e: Vec<f64> = (0..self.dim)
                    .map(|_| {
                        let x = -(1.0 - u.uniform()).ln();
                        if u.uniform() < 0.5 {
                            -x
                        } else {
                            x
                        }
                    })
                    .collect();
                let n = l1_norm(&e);
                if n == 0.0 {
                    return self.tangent_basis(at).remove(0);
                }
                e.into_iter().map(|a| a / n).collect()
            }
            _ => loop {
                let g: Vec<f64> = (0..self.dim).map(|_| u.normal()).collect();
                let n = euclid_norm(&g);
                if n > 1e-12 {
                    break g.into_iter().map(|a| a / n).collect();
                }
            },
        }
    }

    /// Move distance `d` from `from` along the unit tangent `dir`.
    /// Returns the new coordinates and whether the half-space fallback fired.
    pub fn shoot(&self, from: &[f64], dir: &[f64], d: f64) -> (Vec<f64>, bool) {
        if d == 0.0 {
            return (from.to_vec(), false);
        }
        match self.kind {
            ModelKind::Hyperboloid2 => {
                let (c, s) = (d.cosh(), d.sinh());
                (hyp_lift(vec![c * from[0] + s * dir[0], c * from[1] + s * dir[1], 0.0]), false)
            }
            ModelKind::HalfSpace => {
                let last = self.dim - 1;
                if from[last] + d * dir[last] >= 0.0 {
                    return (from.iter().zip(dir).map(|(a, b)| a + d * b).collect(), false);
                }
                // The ray exits the half-space: go parallel to the boundary,
                // or straight up when no parallel direction exists.
                let mut v = dir.to_vec();
                v[last] = 0.0;
                let n = euclid_norm(&v);
                if n < 1e-12 {
                    v = vec![0.0; self.dim];
                    v[last] = 1.0;
                } else {
                    v.iter_mut().for_each(|a| *a /= n);
                }
                (from.iter().zip(&v).map(|(a, b)| a + d * b).collect(), true)
            }
            _ => (from.iter().zip(dir).map(|(a, b)| a + d * b).collect(), false),
        }
    }

    /// Default direction used when no hint is available.
    pub fn default_direction(&self, at: &[f64]) -> Vec<f64> {
        let basis = self.tangent_basis(at);
        match self.kind {
            // Pointing up keeps one-dimensional half-lines inside the set.
            ModelKind::HalfSpace if self.dim == 1 => vec![1.0],
            _ => basis[0].clone(),
        }
    }

    // ---- checked point API ----

    fn check_pair(&self, x: &Point, y: &Point) -> Result<()> {
        self.validate(x)?;
        self.validate(y)
    }

    pub fn dist(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_pair(x, y)?;
        Ok(self.d(&x.coords, &y.coords))
    }

    pub fn combine(&self, x: &Point, y: &Point, lam: f64) -> Result<Point> {
        self.check_pair(x, y)?;
        if !(0.0..=1.0).contains(&lam) {
            return Err(invalid(format!("combination weight {lam} is outside [0,1]")));
        }
        Ok(Point::new(self.comb(&x.coords, &y.coords, lam)))
    }

    /// Point at distance `d` from `from`. With a hint distinct from `from`
    /// the result lies on the geodesic ray from `from` through the hint.
    pub fn point_at_distance(&self, from: &Point, d: f64, hint: Option<&Point>) -> Result<RayPoint> {
        self.validate(from)?;
        if let Some(h) = hint {
            self.validate(h)?;
        }
        if !(d >= 0.0) || !d.is_finite() {
            return Err(invalid(format!("distance {d} must be finite and nonnegative")));
        }
        if d > self.max_radius() * 4.0 {
            return Err(invalid(format!("distance {d} is beyond the usable range of {}", self.name())));
        }
        let dir = hint
            .and_then(|h| self.direction_toward(&from.coords, &h.coords))
            .unwrap_or_else(|| self.default_direction(&from.coords));
        let (p, fallback) = self.shoot(&from.coords, &dir, d);
        Ok(RayPoint { point: Point::new(p), fallback })
    }

    /// Point at distance `d` from `from` on the ray pointing away from `away`.
    pub fn point_at_distance_away(&self, from: &Point, d: f64, away: &Point) -> Result<RayPoint> {
        self.validate(from)?;
        self.validate(away)?;
        if !(d >= 0.0) || !d.is_finite() {
            return Err(invalid(format!("distance {d} must be finite and nonnegative")));
        }
        let dir = match self.direction_toward(&from.coords, &away.coords) {
            Some(v) => self.reverse(&from.coords, &v),
            None => self.default_direction(&from.coords),
        };
        let (p, fallback) = self.shoot(&from.coords, &dir, d);
        Ok(RayPoint { point: Point::new(p), fallback })
    }

    /// Tangent pointing opposite to `v` at `at`.
    pub fn reverse(&self, _at: &[f64], v: &[f64]) -> Vec<f64> {
        v.iter().map(|a| -a).collect()
    }
}

impl fmt::Display for SpaceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn euclidean_distance_and_midpoint() {
        let m = SpaceModel::euclidean(1).unwrap();
        assert_eq!(m.dist(&Point::scalar(0.0), &Point::scalar(3.0)).unwrap(), 3.0);
        let mid = m.combine(&Point::scalar(0.0), &Point::scalar(2.0), 0.5).unwrap();
        assert_eq!(mid, Point::scalar(1.0));
    }

    #[test]
    fn l1_distance_sums_coordinates() {
        let m = SpaceModel::l1(2).unwrap();
        let d = m.dist(&Point::new(vec![0.0, 0.0]), &Point::new(vec![1.0, 2.0])).unwrap();
        assert_eq!(d, 3.0);
    }

    #[test]
    fn l1_dimension_cap() {
        assert!(SpaceModel::l1(9).is_err());
        assert!(SpaceModel::l1_with_limit(9, 12).is_ok());
    }

    #[test]
    fn combine_endpoints_are_exact() {
        let m = SpaceModel::hyperboloid2();
        let p = m.polar(1.3, 0.4).unwrap();
        let q = m.polar(2.0, 2.9).unwrap();
        assert_eq!(m.combine(&p, &q, 0.0).unwrap(), p);
        assert_eq!(m.combine(&p, &q, 1.0).unwrap(), q);
    }

    #[test]
    fn combine_rejects_weight_outside_unit_interval() {
        let m = SpaceModel::euclidean(1).unwrap();
        assert!(m.combine(&Point::scalar(0.0), &Point::scalar(1.0), 1.5).is_err());
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        let m = SpaceModel::euclidean(2).unwrap();
        let r = m.dist(&Point::scalar(0.0), &Point::new(vec![0.0, 1.0]));
        assert!(matches!(r, Err(LabError::DimensionMismatch { .. })));
    }

    #[test]
    fn hyperboloid_identity_and_midpoint() {
        let m = SpaceModel::hyperboloid2();
        let p = m.polar(0.7, 1.0).unwrap();
        let q = m.polar(3.1, -2.0).unwrap();
        assert_eq!(m.dist(&p, &p).unwrap(), 0.0);
        let d = m.dist(&p, &q).unwrap();
        let r = m.combine(&p, &q, 0.5).unwrap();
        assert!(close(m.dist(&p, &r).unwrap(), d / 2.0, 1e-9));
        assert!(close(m.dist(&r, &q).unwrap(), d / 2.0, 1e-9));
        m.validate(&r).unwrap();
    }

    #[test]
    fn hyperboloid_polar_distance_from_apex() {
        let m = SpaceModel::hyperboloid2();
        let p = m.polar(4.0, 0.3).unwrap();
        assert!(close(m.dist(&m.origin(), &p).unwrap(), 4.0, 1e-12));
    }

    #[test]
    fn point_at_distance_on_line_and_plane() {
        let m = SpaceModel::euclidean(1).unwrap();
        let r = m.point_at_distance(&Point::scalar(0.0), 5.0, Some(&Point::scalar(1.0))).unwrap();
        assert_eq!(r.point, Point::scalar(5.0));
        assert!(!r.fallback);
        let z = m.point_at_distance(&Point::scalar(2.0), 0.0, None).unwrap();
        assert_eq!(z.point, Point::scalar(2.0));

        let h = SpaceModel::hyperboloid2();
        let from = h.polar(1.0, 0.2).unwrap();
        let hint = h.polar(2.0, 1.2).unwrap();
        let r = h.point_at_distance(&from, 10.0, Some(&hint)).unwrap();
        assert!(close(h.dist(&from, &r.point).unwrap(), 10.0, 1e-9));
        // The hint lies on the segment from `from` to the result.
        let dh = h.dist(&from, &hint).unwrap();
        let on_ray = h.combine(&from, &r.point, dh / 10.0).unwrap();
        assert!(h.dist(&on_ray, &hint).unwrap() < 1e-7);
    }

    #[test]
    fn away_direction_extends_segment() {
        let m = SpaceModel::euclidean(1).unwrap();
        let u = m.point_at_distance_away(&Point::scalar(5.0), 0.75, &Point::scalar(0.0)).unwrap();
        assert_eq!(u.point, Point::scalar(5.75));
    }

    #[test]
    fn half_space_ray_falls_back_to_boundary_parallel() {
        let m = SpaceModel::half_space(2).unwrap();
        let from = Point::new(vec![0.0, 1.0]);
        let hint = Point::new(vec![1.0, 0.0]);
        let r = m.point_at_distance(&from, 10.0, Some(&hint)).unwrap();
        assert!(r.fallback);
        m.validate(&r.point).unwrap();
        assert!(close(m.dist(&from, &r.point).unwrap(), 10.0, 1e-12));
    }

    #[test]
    fn l1_ray_has_exact_length() {
        let m = SpaceModel::l1(3).unwrap();
        let from = Point::new(vec![1.0, -2.0, 0.5]);
        let hint = Point::new(vec![3.0, 1.0, 0.0]);
        let r = m.point_at_distance(&from, 7.0, Some(&hint)).unwrap();
        assert!(close(m.dist(&from, &r.point).unwrap(), 7.0, 1e-12));
    }

    #[test]
    fn validation_catches_off_sheet_points() {
        let m = SpaceModel::hyperboloid2();
        assert!(m.validate(&Point::new(vec![1.0, 0.0, 1.0])).is_err());
        assert!(m.validate(&Point::new(vec![0.0, 0.0, -1.0])).is_err());
        let hs = SpaceModel::half_space(1).unwrap();
        assert!(hs.validate(&Point::scalar(-0.1)).is_err());
    }
}
