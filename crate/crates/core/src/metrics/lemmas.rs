//! Relations between the metrics: pointwise bounds from series distances,
//! basepoint changes, the `d_{θ,1}` counterexample and the bounded-ball chain.

use serde::Serialize;

use super::gauge::Gauge;
use super::{ball_sups, d_n_theta, hotspots_of, shell_sup, weighted_sup_metric, MapMetric};
use crate::error::{invalid, Result};
use crate::geodesic::{Point, SpaceModel};
use crate::mapping::{empirical_lipschitz, Node, NonexpMap};
use crate::sampling::mix;
use crate::tolerances::STRICT_SLACK;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum LocalBound {
    Bound(f64),
    NoBound,
}

impl LocalBound {
    pub fn value(self) -> Option<f64> {
        match self {
            LocalBound::Bound(b) => Some(b),
            LocalBound::NoBound => None,
        }
    }
}

fn check_args(d_val: f64, m: usize) -> Result<()> {
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    if !(d_val >= 0.0) {
        return Err(invalid(format!("distance {d_val} must be nonnegative")));
    }
    Ok(())
}

/// If `d ≤ ½ φ⁻¹(1/m)`, every `z ∈ B̄(θ,m)` has `ρ(f(z),g(z)) ≤ 2d/φ⁻¹(1/m)`.
pub fn local_from_global(d_val: f64, m: usize, gauge: &Gauge) -> Result<LocalBound> {
    check_args(d_val, m)?;
    if d_val == 0.0 {
        return Ok(LocalBound::Bound(0.0));
    }
    let l = gauge.log2_phi_inv(1.0 / m as f64);
    let ld = d_val.log2();
    if ld > l - 1.0 {
        return Ok(LocalBound::NoBound);
    }
    Ok(LocalBound::Bound((1.0 + ld - l).exp2()))
}

/// `d ≤ (r/2) φ⁻¹(1/m)` with `r ∈ (0,1]` gives `ρ(f(z),g(z)) ≤ r` on `B̄(θ,m)`.
pub fn local_from_global_radius(d_val: f64, m: usize, r: f64, gauge: &Gauge) -> Result<bool> {
    check_args(d_val, m)?;
    if !(r > 0.0 && r <= 1.0) {
        return Err(invalid(format!("r = {r} must lie in (0,1]")));
    }
    Ok(d_val == 0.0 || d_val.log2() <= r.log2() - 1.0 + gauge.log2_phi_inv(1.0 / m as f64))
}

/// The `2m` form: for `m ≥ 1/φ(η)`, `d ≤ r φ⁻¹(1/(2m))` gives
/// `ρ(f(z),g(z)) ≤ r` on `B̄(θ,m)`. `None` when `m` is too small.
pub fn local_from_global_double(d_val: f64, m: usize, r: f64, gauge: &Gauge) -> Result<Option<bool>> {
    check_args(d_val, m)?;
    if !(r > 0.0 && r <= 1.0) {
        return Err(invalid(format!("r = {r} must lie in (0,1]")));
    }
    if (m as f64) < 1.0 / gauge.phi(gauge.eta) {
        return Ok(None);
    }
    Ok(Some(d_val == 0.0 || d_val.log2() <= r.log2() + gauge.log2_phi_inv(1.0 / (2 * m) as f64)))
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceRow {
    pub pair: usize,
    pub d_theta1: f64,
    pub d_theta2: f64,
    /// Constant in `d_{θ2} ≤ factor · d_{θ1}`.
    pub factor: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub metric: String,
    pub rho_theta: f64,
    pub factor: f64,
    pub rows: Vec<EquivalenceRow>,
    pub all_hold: bool,
}

/// Checks `d_{θ2} ≤ K d_{θ1}` on every pair, with `K = 2^s(1+ρ(θ1,θ2)^s)`
/// for the weighted metric and `K = C_k`, `k = ⌈ρ(θ1,θ2)⌉`, for the series
/// metric. Sampling errors are arranged to weaken the check: the left side
/// uses the sampled value, the right side the certified upper bound.
pub fn basepoint_equivalence_check(
    metric: &MapMetric,
    theta2: &Point,
    pairs: &[(NonexpMap, NonexpMap)],
    seed: u64,
) -> Result<EquivalenceReport> {
    if pairs.is_empty() {
        return Err(invalid("at least one map pair is required"));
    }
    let model = pairs[0].0.model();
    model.validate(theta2)?;
    let (other, rho, factor) = match metric {
        MapMetric::Series { theta, gauge, truncation, budget } => {
            let rho = model.d(&theta.coords, &theta2.coords);
            let k = rho.ceil() as u32;
            let other = MapMetric::Series { theta: theta2.clone(), gauge: gauge.clone(), truncation: *truncation, budget: *budget };
            (other, rho, gauge.c_k(k))
        }
        MapMetric::WeightedSup { theta, s, budget } => {
            let rho = model.d(&theta.coords, &theta2.coords);
            let other = MapMetric::WeightedSup { theta: theta2.clone(), s: *s, budget: *budget };
            (other, rho, s.exp2() * (1.0 + rho.powf(*s)))
        }
        MapMetric::Pointwise { .. } => return Err(invalid("the pointwise metric has no basepoint")),
    };
    let mut rows = Vec::with_capacity(pairs.len());
    for (i, (f, g)) in pairs.iter().enumerate() {
        let s = mix(seed, i as u64);
        let d1 = metric.distance(f, g, s)?;
        let d2 = other.distance(f, g, s)?;
        let holds = d2.value <= factor * d1.certified() + STRICT_SLACK;
        rows.push(EquivalenceRow { pair: i, d_theta1: d1.value, d_theta2: d2.value, factor, holds });
    }
    let all_hold = rows.iter().all(|r| r.holds);
    Ok(EquivalenceReport { metric: metric.name(), rho_theta: rho, factor, rows, all_hold })
}

/// `f_n(x) = (1-λ_n(x)) θ ⊕ λ_n(x) x_n` with `λ_n(x) = ½ max(1 - ρ(x,x_n)/n, 0)`
/// and `ρ(θ,x_n) = 2n`. Returns the map and `x_n`.
pub fn divergence_map(model: &SpaceModel, theta: &Point, n: usize) -> Result<(NonexpMap, Point)> {
    model.validate(theta)?;
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let nf = n as f64;
    if 3.0 * nf > model.max_radius() {
        return Err(invalid(format!("n = {n} exceeds the usable radius of {}", model.name())));
    }
    let xn = model.point_at_distance(theta, 2.0 * nf, None)?.point;
    let node = Node::DivergenceBump { theta: theta.coords.clone(), xn: xn.coords.clone(), n: nf };
    Ok((NonexpMap::from_node(model, node, 1.0), xn))
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceRow {
    pub n: usize,
    /// `n/(1+2n)`.
    pub expected: f64,
    /// Sampled `d_{θ,1}(f_n, const θ)`.
    pub measured: f64,
    /// Sampled sup of `ρ(f_n(x),θ)` over `B̄(θ,n)`; zero by construction.
    pub bounded_sup: f64,
    pub lip: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceReport {
    pub rows: Vec<DivergenceRow>,
    pub all_hold: bool,
}

/// Uniform convergence on bounded sets without `d_{θ,1}` convergence:
/// `f_n = θ` on `B̄(θ,n)` while `d_{θ,1}(f_n, const θ) ≥ n/(1+2n) ≥ 1/3`.
pub fn d_theta1_divergence_demo(
    model: &SpaceModel,
    theta: &Point,
    n_max: usize,
    budget: usize,
    seed: u64,
) -> Result<DivergenceReport> {
    if n_max < 3 {
        return Err(invalid("n_max must be at least 3"));
    }
    let g = NonexpMap::constant(model, theta)?;
    let mut rows = Vec::new();
    for n in 3..=n_max {
        let (f, _) = divergence_map(model, theta, n)?;
        let s = mix(seed, n as u64);
        let bounded = d_n_theta(&f, &g, n, theta, budget, s)?.value;
        let measured = weighted_sup_metric(&f, &g, theta, 1.0, budget, s)?.value;
        let lip = empirical_lipschitz(&f, theta, 3.0 * n as f64, budget, s)?.value;
        let expected = n as f64 / (1.0 + 2.0 * n as f64);
        let holds = bounded == 0.0 && measured >= expected - STRICT_SLACK && expected >= 1.0 / 3.0 && lip <= 1.0 + 1e-7;
        rows.push(DivergenceRow { n, expected, measured, bounded_sup: bounded, lip, holds });
    }
    let all_hold = rows.iter().all(|r| r.holds);
    Ok(DivergenceReport { rows, all_hold })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundedChainReport {
    /// Sampled sup distance on `B̄(θ,R)`.
    pub d_inf: f64,
    /// Series metric of the restrictions to `B̄(θ,R)`.
    pub series: f64,
    pub lower: f64,
    pub upper: f64,
    pub diameter: f64,
    pub holds: bool,
}

/// For the restrictions of `f, g` to `B̄(θ,R)` (diameter `C = 2R`,
/// `N = ⌈C⌉`) checks
/// `(1/(1+C)) (Σ_{n≥N} φ⁻¹(1/n)) d_∞ ≤ d_{θ,φ} ≤ d_∞ Σ_n φ⁻¹(1/n)`.
///
/// The restricted `d_{n,θ}` equals `d_∞` once `n ≥ R`, so the series is
/// evaluated exactly from the sampled ball suprema.
pub fn bounded_chain(
    f: &NonexpMap,
    g: &NonexpMap,
    theta: &Point,
    gauge: &Gauge,
    radius: f64,
    budget: usize,
    seed: u64,
) -> Result<BoundedChainReport> {
    gauge.require_summable()?;
    if !(radius > 0.0) || radius > f.model().max_radius() {
        return Err(invalid(format!("radius {radius} is out of range")));
    }
    let k = radius.ceil() as usize;
    // Balls B̄(θ,n) with n < R lie inside the restricted space; from n = k on
    // the restricted ball is all of B̄(θ,R).
    let (mut sups, _, _) = if k > 1 { ball_sups(f, g, theta, k - 1, budget, seed) } else { (vec![], 0, None) };
    let whole = shell_sup(f, g, &theta.coords, 0.0, radius, budget, mix(seed, 0xb0), &hotspots_of(f, g), |_| 1.0).0;
    let d_inf = whole.max(sups.last().copied().unwrap_or(0.0));
    sups.push(d_inf);
    let frac = |d: f64| d / (1.0 + d);
    let head: f64 = sups
        .iter()
        .enumerate()
        .map(|(i, &d)| if d == 0.0 { 0.0 } else { gauge.phi_inv(1.0 / (i + 1) as f64) * frac(d) })
        .sum();
    let series = head + frac(d_inf) * gauge.log2_sum_from(k + 1)?.exp2();
    let c = 2.0 * radius;
    // The chain is about self-maps of the bounded ball, where d_∞ ≤ C.
    if d_inf > c * (1.0 + 1e-12) {
        return Err(invalid(format!("sup distance {d_inf} exceeds the diameter {c}: the maps leave B(theta,R)")));
    }
    let n_big = c.ceil() as usize;
    let lower = gauge.log2_sum_from(n_big)?.exp2() * d_inf / (1.0 + c);
    let upper = d_inf * gauge.log2_sum_from(1)?.exp2();
    let tol = 1e-12 * (1.0 + upper);
    let holds = lower <= series + tol && series <= upper + tol;
    Ok(BoundedChainReport { d_inf, series, lower, upper, diameter: c, holds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> SpaceModel {
        SpaceModel::euclidean(1).unwrap()
    }

    #[test]
    fn local_from_global_examples() {
        let g = Gauge::log();
        assert_eq!(local_from_global(0.1, 2, &g).unwrap(), LocalBound::Bound(0.8));
        assert_eq!(local_from_global(0.0, 2, &g).unwrap(), LocalBound::Bound(0.0));
        assert_eq!(local_from_global(0.2, 2, &g).unwrap(), LocalBound::NoBound);
        assert!(local_from_global_radius(0.0625, 2, 0.5, &g).unwrap());
        assert!(!local_from_global_radius(0.07, 2, 0.5, &g).unwrap());
        // 1/φ(η) = 2/ln 2 ≈ 2.885
        assert_eq!(local_from_global_double(0.01, 2, 0.5, &g).unwrap(), None);
        assert_eq!(local_from_global_double(0.5 * (-6f64).exp2(), 3, 0.5, &g).unwrap(), Some(true));
    }

    #[test]
    fn divergence_map_examples() {
        let m = line();
        let o = Point::scalar(0.0);
        let (f5, x5) = divergence_map(&m, &o, 5).unwrap();
        assert_eq!(x5.coords, vec![10.0]);
        assert_eq!(f5.apply(&[10.0]), vec![5.0]);
        let (f2, _) = divergence_map(&m, &o, 2).unwrap();
        for x in [-2.0, -1.0, 0.0, 1.5, 2.0] {
            assert_eq!(f2.apply(&[x]), vec![0.0]);
        }
    }

    #[test]
    fn divergence_demo_small() {
        let m = line();
        let r = d_theta1_divergence_demo(&m, &Point::scalar(0.0), 5, 256, 1).unwrap();
        assert!(r.all_hold);
        for row in &r.rows {
            assert!((row.measured - row.expected).abs() < 1e-9);
        }
    }

    #[test]
    fn basepoint_weighted_example() {
        let m = line();
        let f = NonexpMap::constant(&m, &Point::scalar(0.0)).unwrap();
        let g = NonexpMap::constant(&m, &Point::scalar(1.0)).unwrap();
        let metric = MapMetric::weighted(&m, &Point::scalar(0.0), 2.0, 128).unwrap();
        let r = basepoint_equivalence_check(&metric, &Point::scalar(1.0), &[(f, g)], 3).unwrap();
        assert_eq!(r.factor, 8.0);
        assert!(r.all_hold);
    }

    #[test]
    fn bounded_chain_holds() {
        let m = line();
        let f = NonexpMap::identity(&m);
        let g = NonexpMap::affine_1d(&m, 0.5, 0.0).unwrap();
        let r = bounded_chain(&f, &g, &Point::scalar(0.0), &Gauge::log(), 2.5, 128, 1).unwrap();
        assert_eq!(r.d_inf, 1.25);
        assert!(r.holds, "{r:?}");
    }

    #[test]
    fn bounded_chain_rejects_maps_leaving_the_ball() {
        let m = line();
        let f = NonexpMap::identity(&m);
        let g = NonexpMap::affine_1d(&m, 1.0, 10.0).unwrap();
        assert!(bounded_chain(&f, &g, &Point::scalar(0.0), &Gauge::log(), 1.0, 64, 1).is_err());
    }
}
