//! Porosity witnesses: a center map close to a given map together with a
//! radius such that every map in the ball around the center satisfies a
//! good-set predicate.
//!
//! Witness radii can be far below the smallest `f64` (for the log gauge
//! `φ⁻¹(αr)` is `2^{-1/(αr)}`), so radii and member distance bounds are kept
//! as base-2 logarithms. Members are certified analytically: each member
//! differs from the center by a displacement profile with a closed-form
//! bound on its metric distance.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::radial_collapse;
use super::enlarge_modulus;
use crate::error::{invalid, LabError, Result};
use crate::fixpoint::ball_invariance_check;
use crate::geodesic::{Point, SpaceModel};
use crate::mapping::{rakotch_gauges, NonexpMap};
use crate::metrics::gauge::Gauge;
use crate::metrics::MapMetric;
use crate::sampling::{log2_add, log2_of, mix, SampleMode, Uniforms};
use crate::tolerances::{LIP_SLACK, STRICT_SLACK, SUP_SAFETY_FACTOR};

/// Sampled distances are only cross-checked for cheap truncations.
const CROSS_CHECK_MAX_TERMS: usize = 200;
/// Members whose sampled distance is compared with the analytic bound.
const CROSS_CHECK_MEMBERS: usize = 3;
/// Parameters below `2^-1000` are treated as not representable.
const MIN_LOG2_PARAM: f64 = -1000.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predicate {
    /// `h(B̄(θ,M_f)) ⊂ B̄(θ,M_f)`.
    BallInvariance { m_f: f64 },
    /// Sampled `c_{h,n} ≤ bound < 1`.
    RakotchGaugeBelowOne { n: usize, bound: f64 },
    /// `ρ(h(x0),h(y0)) > μ t0`.
    ModulusExceeds { t0: f64, mu: f64, x0: Point, y0: Point },
    /// `ρ(h(ξ),h(η)) < ρ(ξ,η)` on `B(x,r_pair) × B(y,r_pair)`.
    ShrinkPair { x: Point, y: Point, r_pair: f64 },
}

impl Predicate {
    pub fn name(&self) -> &'static str {
        match self {
            Predicate::BallInvariance { .. } => "ball_invariance",
            Predicate::RakotchGaugeBelowOne { .. } => "rakotch_gauge_below_one",
            Predicate::ModulusExceeds { .. } => "modulus_exceeds",
            Predicate::ShrinkPair { .. } => "shrink_pair",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PorosityWitness {
    pub base_f: NonexpMap,
    /// Scale: the center is certified to lie within `r` of `base_f`.
    pub r: f64,
    pub center_g: NonexpMap,
    /// Witness radius; zero when it underflows, see `radius_log2`.
    pub radius: f64,
    pub radius_log2: f64,
    pub predicate: Predicate,
    pub metric: MapMetric,
    /// Reference point of displacement profiles (the basepoint θ).
    pub theta: Point,
    /// Every constant used in the construction.
    pub params: BTreeMap<String, f64>,
}

impl PorosityWitness {
    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("r = {r} must lie in (0,1)")))
    }
}

fn check_model(f: &NonexpMap, metric: &MapMetric, theta: &Point) -> Result<()> {
    f.model().validate(theta)?;
    f.ensure_exportable()?;
    if let Some(t) = metric.theta() {
        f.model().validate(t)?;
        if t != theta {
            return Err(invalid("witness basepoint differs from the metric's basepoint"));
        }
    }
    if let MapMetric::Pointwise { sequence, .. } = metric {
        if &sequence.model != f.model() {
            return Err(LabError::ModelMismatch { map_model: f.model().name(), other: sequence.model.name() });
        }
    }
    Ok(())
}

/// `1/φ(η)`: the smallest `m` for which the doubled local bound applies.
fn local_threshold(gauge: &Gauge) -> f64 {
    1.0 / gauge.phi(gauge.eta)
}

/// `r₀ = min{1, φ(η)}` for the series metric.
fn series_r0(gauge: &Gauge) -> f64 {
    gauge.phi(gauge.eta).min(1.0)
}

/// Center `f_γ = (1-γ)f ⊕ γ f(θ)` with `γ = r/(3C_φ)` (series) or `r/3`
/// (weighted), `M_f = (1+ρ(f(θ),θ))/γ`, and a ball of maps that keep
/// `B̄(θ,M_f)` invariant.
///
/// For the series metric with `r ≥ r₀` the construction is still accepted
/// when the two inequalities its argument needs hold for the concrete
/// numbers: the radius is at most `r φ⁻¹(1/(2(⌈M_f⌉+1)))` and
/// `⌈M_f⌉+1 ≥ 1/φ(η)`.
pub fn ball_invariance_witness(f: &NonexpMap, r: f64, theta: &Point, metric: &MapMetric) -> Result<PorosityWitness> {
    check_model(f, metric, theta)?;
    check_r(r)?;
    let m = f.model();
    let rho = m.d(&f.apply(&theta.coords), &theta.coords);
    let (gamma, radius_log2, mut p) = match metric {
        MapMetric::Series { gauge, .. } => {
            let c = gauge.c_phi;
            let gamma = r / (3.0 * c);
            let m_f = (1.0 + rho) / gamma;
            let m_local = m_f.ceil() + 1.0;
            let alpha = 1.0 / (12.0 * c * (rho + 2.0)).sqrt();
            let alpha_t = 1.0 / (12.0 * c * (rho + 2.0) + 1.0);
            let log2_sq = gauge.log2_phi_inv((alpha * r).powi(2));
            let log2_t = gauge.log2_phi_inv(alpha_t * r);
            let chosen = if gauge.flags.c5 { log2_t } else { log2_sq };
            let target = r.log2() + gauge.log2_phi_inv(1.0 / (2.0 * m_local));
            let r0 = series_r0(gauge);
            let concrete = chosen <= target && m_local >= local_threshold(gauge);
            if !chosen.is_finite() || (r >= r0 && !concrete) {
                return Err(invalid(format!(
                    "r = {r} is not below r0 = {r0} and the radius inequalities fail for these constants"
                )));
            }
            let p = params(&[
                ("gamma", gamma),
                ("m_f", m_f),
                ("alpha", alpha),
                ("alpha_tilde", alpha_t),
                ("c_phi", c),
                ("r0", r0),
                ("r0_relaxed", f64::from(r >= r0)),
                ("uses_c5", f64::from(gauge.flags.c5)),
                ("log2_radius_alpha_sq", log2_sq),
                ("log2_radius_alpha_tilde", log2_t),
                ("log2_local_target", target),
            ]);
            (gamma, chosen, p)
        }
        MapMetric::WeightedSup { s, .. } => {
            let gamma = r / 3.0;
            let alpha_s = 1.0 / (6.0 * (2.0 + rho));
            let m_f = (1.0 + rho) / gamma;
            let p = params(&[("gamma", gamma), ("m_f", m_f), ("alpha_s", alpha_s), ("s", *s), ("r0", 1.0)]);
            (gamma, s * (alpha_s * r).log2(), p)
        }
        MapMetric::Pointwise { .. } => {
            return Err(invalid("ball invariance witnesses need the series or weighted metric"));
        }
    };
    let m_f = p["m_f"];
    if m_f > m.max_radius() {
        return Err(invalid(format!("M_f = {m_f} exceeds the usable radius of {}", m.name())));
    }
    p.insert("rho_f_theta".into(), rho);
    p.insert("r".into(), r);
    Ok(PorosityWitness {
        base_f: f.clone(),
        r,
        center_g: NonexpMap::contract_toward(f, theta, gamma)?,
        radius: radius_log2.exp2(),
        radius_log2,
        predicate: Predicate::BallInvariance { m_f },
        metric: metric.clone(),
        theta: theta.clone(),
        params: p,
    })
}

/// Center `f_γ` with `γ` the midpoint of `(r/(2C_φ), r/C_φ)` (series) or
/// `(r/2, r)` (weighted), radius `αr` with `α = φ⁻¹(1/n)/(8nC_φ)` or
/// `1/(4n(1+n^s))`; members have sampled `c_{h,n} ≤ 1-γ+r/(2C_φ)` (series)
/// or `1-γ+r/2` (weighted).
pub fn rakotch_witness(f: &NonexpMap, r: f64, n: usize, theta: &Point, metric: &MapMetric) -> Result<PorosityWitness> {
    check_model(f, metric, theta)?;
    check_r(r)?;
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if n as f64 > f.model().max_radius() {
        return Err(invalid(format!("n = {n} exceeds the usable radius of {}", f.model().name())));
    }
    let nf = n as f64;
    let (gamma, log2_alpha, bound, mut p) = match metric {
        MapMetric::Series { gauge, .. } => {
            let c = gauge.c_phi;
            let gamma = 0.75 * r / c;
            let log2_alpha = gauge.log2_phi_inv(1.0 / nf) - (8.0 * nf * c).log2();
            let bound = 1.0 - gamma + r / (2.0 * c);
            (gamma, log2_alpha, bound, params(&[("c_phi", c), ("gamma_low", r / (2.0 * c)), ("gamma_high", r / c)]))
        }
        MapMetric::WeightedSup { s, .. } => {
            let gamma = 0.75 * r;
            let alpha = 1.0 / (4.0 * nf * (1.0 + nf.powf(*s)));
            (gamma, alpha.log2(), 1.0 - gamma + r / 2.0, params(&[("s", *s), ("gamma_low", r / 2.0), ("gamma_high", r)]))
        }
        MapMetric::Pointwise { .. } => {
            return Err(invalid("Rakotch witnesses need the series or weighted metric"));
        }
    };
    let radius_log2 = log2_alpha + r.log2();
    p.extend(params(&[
        ("gamma", gamma),
        ("alpha", log2_alpha.exp2()),
        ("log2_alpha", log2_alpha),
        ("n", nf),
        ("bound", bound),
        ("r0", 1.0),
        ("r", r),
    ]));
    Ok(PorosityWitness {
        base_f: f.clone(),
        r,
        center_g: NonexpMap::contract_toward(f, theta, gamma)?,
        radius: radius_log2.exp2(),
        radius_log2,
        predicate: Predicate::RakotchGaugeBelowOne { n, bound },
        metric: metric.clone(),
        theta: theta.clone(),
        params: p,
    })
}

/// Center obtained by contracting `f` toward `f(θ)` and then enlarging its
/// modulus at distance `t0` far from `θ`; members `h` satisfy
/// `ρ(h(x0),h(y0)) > μt0`.
///
/// As for [`ball_invariance_witness`], series witnesses with `r ≥ r₀` are
/// accepted when `φ⁻¹(αr) ≤ ε φ⁻¹(1/(4N))` and `2N ≥ 1/φ(η)` hold.
pub fn modcont_witness(
    f: &NonexpMap,
    r: f64,
    t0: f64,
    mu: f64,
    theta: &Point,
    metric: &MapMetric,
) -> Result<PorosityWitness> {
    check_model(f, metric, theta)?;
    check_r(r)?;
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(invalid(format!("t0 = {t0} must be positive")));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(invalid(format!("mu = {mu} must lie in (0,1)")));
    }
    let eps = (t0 * (1.0 - mu) / 8.0).min(0.5);
    let lam = (1.0 + mu) / 2.0;
    let (gamma, big_r, radius_log2, mut p) = match metric {
        MapMetric::Series { gauge, .. } => {
            let c = gauge.c_phi;
            let gamma = r / (4.0 * c);
            let n = (4.0 * c * t0 / r).ceil();
            let alpha = eps / (4.0 + 16.0 * t0 * c);
            let radius_log2 = gauge.log2_phi_inv(alpha * r);
            let target = eps.log2() + gauge.log2_phi_inv(1.0 / (4.0 * n));
            let r0 = series_r0(gauge);
            let concrete = radius_log2 <= target && 2.0 * n >= local_threshold(gauge);
            if !radius_log2.is_finite() || (r >= r0 && !concrete) {
                return Err(invalid(format!(
                    "r = {r} is not below r0 = {r0} and the radius inequalities fail for these constants"
                )));
            }
            let p = params(&[
                ("c_phi", c),
                ("n_big", n),
                ("alpha", alpha),
                ("r0", r0),
                ("r0_relaxed", f64::from(r >= r0)),
                ("log2_local_target", target),
            ]);
            (gamma, n, radius_log2, p)
        }
        MapMetric::WeightedSup { s, .. } => {
            let gamma = r / 2.0;
            let q = (4.0 * t0).powf(1.0 / s);
            let alpha = eps.powf(1.0 / s) / (1.0 + 2.0 * t0 + q);
            (gamma, q / r, s * (alpha * r).log2(), params(&[("s", *s), ("alpha", alpha), ("r0", 1.0)]))
        }
        MapMetric::Pointwise { .. } => {
            return Err(invalid("modulus witnesses need the series or weighted metric"));
        }
    };
    let f_tilde = NonexpMap::contract_toward(f, theta, gamma)?;
    let e = enlarge_modulus(&f_tilde, theta, gamma, lam, t0, big_r)?;
    p.extend(params(&[
        ("gamma", gamma),
        ("eps", eps),
        ("lambda", lam),
        ("big_r", big_r),
        ("s_reach", e.s),
        ("delta", e.delta),
        ("t0", t0),
        ("mu", mu),
        ("r", r),
    ]));
    Ok(PorosityWitness {
        base_f: f.clone(),
        r,
        center_g: e.map,
        radius: radius_log2.exp2(),
        radius_log2,
        predicate: Predicate::ModulusExceeds { t0, mu, x0: e.x0, y0: e.y0 },
        metric: metric.clone(),
        theta: theta.clone(),
        params: p,
    })
}

/// Strict contraction `g = (1-γ)f ⊕ γ f(θ)` near `f` in the pointwise
/// metric, `r_pair = (1-L)ρ(x,y)/10` with `L = Lip g`, and radius
/// `δ = min_i 2^{-m_i} r_pair/(1+r_pair)` where `z_{m_1}`, `z_{m_2}` are the
/// first dense points within `r_pair` of `x` and `y`. Then `d_z(g,h) < δ`
/// forces `ρ(h(z_{m_i}),g(z_{m_i})) < r_pair`.
pub fn shrink_witness(
    f: &NonexpMap,
    x: &Point,
    y: &Point,
    theta: &Point,
    gamma: f64,
    r: f64,
    metric: &MapMetric,
) -> Result<PorosityWitness> {
    check_model(f, metric, theta)?;
    let MapMetric::Pointwise { sequence, .. } = metric else {
        return Err(invalid("shrink witnesses need the pointwise metric"));
    };
    let m = f.model();
    let dxy = m.dist(x, y)?;
    if dxy == 0.0 {
        return Err(invalid("shrink witness needs x != y"));
    }
    if !(r > 0.0) {
        return Err(invalid(format!("r = {r} must be positive")));
    }
    let center = NonexpMap::contract_toward(f, theta, gamma)?;
    let lip = center.claimed_lip();
    let r_pair = (1.0 - lip) * dxy / 10.0;
    let (m1, z1) = sequence.first_within(x, r_pair, 1 << 22)?;
    let (m2, z2) = sequence.first_within(y, r_pair, 1 << 22)?;
    let base = (r_pair / (1.0 + r_pair)).log2();
    let radius_log2 = base - (m1.max(m2) as f64);
    let mut p = params(&[
        ("gamma", gamma),
        ("lip", lip),
        ("r_pair", r_pair),
        ("m1", m1 as f64),
        ("m2", m2 as f64),
        ("dist_x_z_m1", m.d(&x.coords, &z1.coords)),
        ("dist_y_z_m2", m.d(&y.coords, &z2.coords)),
        ("r", r),
    ]);
    p.insert("delta".into(), radius_log2.exp2());
    Ok(PorosityWitness {
        base_f: f.clone(),
        r,
        center_g: center,
        radius: radius_log2.exp2(),
        radius_log2,
        predicate: Predicate::ShrinkPair { x: x.clone(), y: y.clone(), r_pair },
        metric: metric.clone(),
        theta: theta.clone(),
        params: p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberKind {
    Center,
    ContractToward,
    FarCollapse,
    BlendConstant,
}

/// Bound on `ρ(h(x), g(x))` as a function of `x`.
#[derive(Debug, Clone)]
enum Profile {
    Zero,
    /// `≤ a ρ(x,θ) + b`.
    Linear { a: f64, b: f64 },
    /// `≤ height` on `B(c, reach)`, zero elsewhere.
    Supported { c: Vec<f64>, reach: f64, height: f64 },
}

/// `sup_{t≥0} t/(1+t^s)`.
fn weighted_kappa(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else {
        let t = (s - 1.0).powf(-1.0 / s);
        t * (s - 1.0) / s
    }
}

/// Constants of a witness metric needed for member bounds.
struct BoundCtx<'a> {
    metric: &'a MapMetric,
    model: &'a SpaceModel,
    theta: &'a [f64],
    /// Distances `ρ(z_n,θ)` for the pointwise metric.
    dense: Vec<Vec<f64>>,
}

impl<'a> BoundCtx<'a> {
    fn new(w: &'a PorosityWitness) -> Self {
        let dense = match &w.metric {
            MapMetric::Pointwise { sequence, truncation } => {
                sequence.take(*truncation).into_iter().map(|p| p.coords).collect()
            }
            _ => vec![],
        };
        BoundCtx { metric: &w.metric, model: w.center_g.model(), theta: &w.theta.coords, dense }
    }

    /// Coefficients `(k_a, k_b, fixed)` with `d(g,h) ≤ a k_a + b k_b + fixed`
    /// for a linear profile.
    fn linear_coeffs(&self) -> Result<(f64, f64, f64)> {
        Ok(match self.metric {
            MapMetric::Series { gauge, .. } => (gauge.c_phi, gauge.log2_sum_from(1)?.exp2(), 0.0),
            MapMetric::WeightedSup { s, .. } => (weighted_kappa(*s), 1.0, 0.0),
            MapMetric::Pointwise { .. } => {
                let n = self.dense.len();
                let ka = self
                    .dense
                    .iter()
                    .enumerate()
                    .map(|(i, z)| (-((i + 1) as f64)).exp2() * self.model.d(z, self.theta))
                    .sum();
                let tail = (-(n as f64)).exp2();
                (ka, 1.0 - tail, tail)
            }
        })
    }

    /// Certified `log2` bound on `d(g,h)` for a displacement profile.
    fn log2_bound(&self, p: &Profile) -> Result<f64> {
        let frac = |h: f64| h / (1.0 + h);
        Ok(match (p, self.metric) {
            (Profile::Zero, _) => f64::NEG_INFINITY,
            (Profile::Linear { a, b }, MapMetric::Series { gauge, .. }) => {
                let s1 = gauge.log2_sum_from(1)?;
                let lin = log2_add(log2_of(*a) + gauge.c_phi.log2(), log2_of(*b) + s1);
                lin.min(s1)
            }
            (Profile::Supported { c, reach, height }, MapMetric::Series { gauge, .. }) => {
                // d_n vanishes while B̄(θ,n) misses the support.
                let gap = self.model.d(c, self.theta) - reach;
                let k = if gap > 0.0 { (gap.ceil() as usize).saturating_sub(1) } else { 0 };
                log2_of(frac(*height)) + gauge.log2_sum_from(k + 1)?
            }
            (Profile::Linear { a, b }, MapMetric::WeightedSup { s, .. }) => log2_of(a * weighted_kappa(*s) + b),
            (Profile::Supported { c, reach, height }, MapMetric::WeightedSup { s, .. }) => {
                let gap = (self.model.d(c, self.theta) - reach).max(0.0);
                log2_of(height / (1.0 + gap.powf(*s)))
            }
            (_, MapMetric::Pointwise { .. }) => {
                let n = self.dense.len();
                let mut acc = (-(n as f64)).exp2();
                for (i, z) in self.dense.iter().enumerate() {
                    let d = match p {
                        Profile::Linear { a, b } => a * self.model.d(z, self.theta) + b,
                        Profile::Supported { c, reach, height } => {
                            if self.model.d(z, c) < *reach {
                                *height
                            } else {
                                0.0
                            }
                        }
                        Profile::Zero => 0.0,
                    };
                    acc += (-((i + 1) as f64)).exp2() * frac(d);
                }
                acc.log2()
            }
        })
    }

    /// Smallest distance from `θ` at which a support of the given reach and
    /// height keeps the bound below `2^log2_target`.
    fn far_distance(&self, reach: f64, height: f64, log2_target: f64) -> Result<Option<f64>> {
        let frac = height / (1.0 + height);
        Ok(match self.metric {
            MapMetric::Series { gauge, .. } => {
                let need = log2_target - frac.log2();
                let ok = |k: usize| gauge.log2_sum_from(k + 1).map(|v| v <= need);
                if ok(0)? {
                    Some(reach + 1.0)
                } else {
                    let (mut lo, mut hi) = (0usize, 1usize);
                    while !ok(hi)? {
                        lo = hi;
                        hi *= 2;
                        if hi > 1 << 24 {
                            return Ok(None);
                        }
                    }
                    while hi - lo > 1 {
                        let mid = (lo + hi) / 2;
                        if ok(mid)? {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    Some(hi as f64 + reach + 1.0)
                }
            }
            MapMetric::WeightedSup { s, .. } => {
                let q = height / log2_target.exp2() - 1.0;
                let k = if q > 0.0 { q.powf(1.0 / s) } else { 0.0 };
                if !k.is_finite() {
                    None
                } else {
                    Some(k + reach + 1.0)
                }
            }
            MapMetric::Pointwise { .. } => {
                let n = self.dense.len() as f64;
                if -n > log2_target {
                    return Ok(None);
                }
                let far = self.dense.iter().map(|z| self.model.d(z, self.theta)).fold(0.0, f64::max);
                Some(far + reach + 1.0)
            }
        })
    }
}

struct Member {
    kind: MemberKind,
    param: f64,
    map: NonexpMap,
    profile: Profile,
}

fn center_member(w: &PorosityWitness) -> Member {
    Member { kind: MemberKind::Center, param: 0.0, map: w.center_g.clone(), profile: Profile::Zero }
}

fn log2_target(w: &PorosityWitness, u: f64) -> f64 {
    w.radius_log2 - SUP_SAFETY_FACTOR.log2() + u.log2()
}

/// `2^x` if representable as a normal positive parameter below `cap`.
fn param_from_log2(x: f64, cap: f64) -> Option<f64> {
    if !x.is_finite() || x < MIN_LOG2_PARAM {
        None
    } else {
        Some(x.exp2().min(cap))
    }
}

/// `log2` of the part of the target left after the fixed tail, if any.
fn room_log2(w: &PorosityWitness, u: f64, fixed: f64) -> Option<f64> {
    let t = log2_target(w, u);
    if fixed == 0.0 {
        return Some(t);
    }
    let room = t.exp2() - fixed;
    (room > 0.0).then(|| room.log2())
}

fn contract_member(w: &PorosityWitness, ctx: &BoundCtx, u: f64) -> Result<Option<Member>> {
    let g = &w.center_g;
    let lip = g.claimed_lip();
    let (ka, _, fixed) = ctx.linear_coeffs()?;
    let Some(t) = room_log2(w, u, fixed) else { return Ok(None) };
    let gamma = if lip * ka == 0.0 { Some(0.5 * u) } else { param_from_log2(t - (lip * ka).log2(), 0.5) };
    let Some(gamma) = gamma else { return Ok(None) };
    Ok(Some(Member {
        kind: MemberKind::ContractToward,
        param: gamma,
        map: NonexpMap::contract_toward(g, &w.theta, gamma)?,
        profile: Profile::Linear { a: gamma * lip, b: 0.0 },
    }))
}

fn blend_member(w: &PorosityWitness, ctx: &BoundCtx, u: f64, uv: &mut Uniforms) -> Result<Option<Member>> {
    let g = &w.center_g;
    let m = g.model();
    let lip = g.claimed_lip();
    let (ka, kb, fixed) = ctx.linear_coeffs()?;
    let anchor = g.apply(&w.theta.coords);
    let c = 0.5 + 0.5 * uv.uniform();
    let dir = m.random_direction(&anchor, uv);
    let (p, _) = m.shoot(&anchor, &dir, c);
    let c = m.d(&anchor, &p);
    let Some(t) = room_log2(w, u, fixed) else { return Ok(None) };
    let Some(weight) = param_from_log2(t - (lip * ka + c * kb).log2(), 0.5) else { return Ok(None) };
    Ok(Some(Member {
        kind: MemberKind::BlendConstant,
        param: weight,
        map: NonexpMap::blend_constant(g, &Point::new(p), weight)?,
        profile: Profile::Linear { a: weight * lip, b: weight * c },
    }))
}

/// `g ∘ π_{c,R_c,ε_c}` for a point `c` so far from `θ` that the metric
/// barely sees the change. The composite is nonexpansive because `g` is
/// `1/(1+ε_c)`-Lipschitz on the support of the collapse.
fn far_collapse_member(w: &PorosityWitness, ctx: &BoundCtx, u: f64, uv: &mut Uniforms) -> Result<Option<Member>> {
    let g = &w.center_g;
    let m = g.model();
    let lip = g.claimed_lip();
    let r_c = 0.25 + 0.75 * u;
    let height = lip * r_c;
    for eps in [0.5, 0.1, 0.02, 0.004] {
        let reach = r_c * (1.0 + 1.0 / eps);
        let Some(dist) = ctx.far_distance(reach, height, log2_target(w, u))? else { return Ok(None) };
        if dist + reach > m.max_radius() {
            return Ok(None);
        }
        let dir = m.random_direction(ctx.theta, uv);
        let (c, fallback) = m.shoot(ctx.theta, &dir, dist);
        if fallback {
            return Ok(None);
        }
        let local = g.local_lip_bound(&c, reach);
        if local * (1.0 + eps) > 1.0 {
            continue;
        }
        let pi = radial_collapse(m, &Point::new(c.clone()), r_c, eps)?;
        let map = NonexpMap::compose(g, &pi)?.with_proven_lip(lip.max(local * (1.0 + eps)));
        return Ok(Some(Member {
            kind: MemberKind::FarCollapse,
            param: eps,
            map,
            profile: Profile::Supported { c, reach, height },
        }));
    }
    Ok(None)
}

/// Member `index` of the witness ball: index 0 is the center, the others
/// cycle through contraction, far collapse and blending, falling back to
/// the next kind (and finally the center) when one is not representable.
fn make_member(w: &PorosityWitness, ctx: &BoundCtx, index: usize, seed: u64) -> Result<Member> {
    if index == 0 {
        return Ok(center_member(w));
    }
    let mut uv = Uniforms::new(SampleMode::Random, mix(seed, 0x3e3b), index as u64);
    let u = 0.5 + 0.5 * uv.uniform();
    for k in 0..3 {
        let found = match (index + k) % 3 {
            1 => contract_member(w, ctx, u)?,
            2 => far_collapse_member(w, ctx, u, &mut uv)?,
            _ => blend_member(w, ctx, u, &mut uv)?,
        };
        if let Some(mem) = found {
            return Ok(mem);
        }
    }
    Ok(center_member(w))
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberRow {
    pub index: usize,
    pub kind: MemberKind,
    pub param: f64,
    /// `log2` of the certified distance bound to the center.
    pub log2_distance_bound: f64,
    pub within_radius: bool,
    /// Sampled distance to the center, for the first few members.
    pub sampled_distance: Option<f64>,
    pub sampled_consistent: bool,
    pub predicate_value: f64,
    pub margin: f64,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessVerification {
    pub predicate: String,
    pub metric: String,
    pub r: f64,
    pub radius_log2: f64,
    pub center_distance_value: f64,
    pub center_distance_tail: f64,
    /// `1.1·estimate + tail` (or `estimate + tail` when exact).
    pub center_distance_certified: f64,
    pub center_ok: bool,
    pub members: Vec<MemberRow>,
    pub passed: usize,
    pub failed: usize,
    pub worst_margin: f64,
    pub all_pass: bool,
}

/// Returns `(value, margin, pass)` for the predicate on `h`.
fn evaluate_predicate(w: &PorosityWitness, h: &NonexpMap, budget: usize, seed: u64) -> Result<(f64, f64, bool)> {
    let m = h.model();
    Ok(match &w.predicate {
        Predicate::BallInvariance { m_f } => {
            let c = ball_invariance_check(h, &w.theta, *m_f, budget, seed)?;
            (c.worst_margin + m_f, -c.worst_margin, c.passed)
        }
        Predicate::RakotchGaugeBelowOne { n, bound } => {
            let g = rakotch_gauges(h, &w.theta, *n, budget, seed)?;
            let v = g.raw[n - 1];
            (v, bound + LIP_SLACK - v, v <= bound + LIP_SLACK && v < 1.0 - STRICT_SLACK)
        }
        Predicate::ModulusExceeds { t0, mu, x0, y0 } => {
            let v = m.d(&h.apply(&x0.coords), &h.apply(&y0.coords));
            let margin = v - mu * t0;
            (v, margin, margin > STRICT_SLACK)
        }
        Predicate::ShrinkPair { x, y, r_pair } => {
            let mut u = Uniforms::new(SampleMode::Random, seed, 0x5a1f);
            let mut worst = f64::NEG_INFINITY;
            for i in 0..budget.max(1) {
                let (xi, eta) = if i == 0 {
                    (x.coords.clone(), y.coords.clone())
                } else {
                    (m.sample_shell(&x.coords, 0.0, r_pair * 0.999_999, &mut u), m.sample_shell(&y.coords, 0.0, r_pair * 0.999_999, &mut u))
                };
                let q = m.d(&h.apply(&xi), &h.apply(&eta)) - m.d(&xi, &eta);
                worst = worst.max(q);
            }
            (worst, -worst, -worst > STRICT_SLACK)
        }
    })
}

fn verify_member(w: &PorosityWitness, ctx: &BoundCtx, index: usize, budget: usize, seed: u64) -> MemberRow {
    let mut row = MemberRow {
        index,
        kind: MemberKind::Center,
        param: 0.0,
        log2_distance_bound: f64::NEG_INFINITY,
        within_radius: false,
        sampled_distance: None,
        sampled_consistent: true,
        predicate_value: f64::NAN,
        margin: f64::NEG_INFINITY,
        pass: false,
        error: None,
    };
    let mseed = mix(seed, index as u64);
    let result = (|| -> Result<()> {
        let mem = make_member(w, ctx, index, mseed)?;
        row.kind = mem.kind;
        row.param = mem.param;
        mem.map.ensure_exportable()?;
        let b = ctx.log2_bound(&mem.profile)?;
        row.log2_distance_bound = b;
        row.within_radius = b + SUP_SAFETY_FACTOR.log2() < w.radius_log2;
        let cheap = match &w.metric {
            MapMetric::Series { truncation, .. } | MapMetric::Pointwise { truncation, .. } => {
                *truncation <= CROSS_CHECK_MAX_TERMS
            }
            MapMetric::WeightedSup { .. } => true,
        };
        if cheap && index >= 1 && index <= CROSS_CHECK_MEMBERS && mem.kind != MemberKind::Center {
            let v = w.metric.distance(&w.center_g, &mem.map, mseed)?.value;
            row.sampled_distance = Some(v);
            row.sampled_consistent = v <= b.exp2() * (1.0 + 1e-9) + mem.map.model().tolerance();
        }
        let (v, margin, pass) = evaluate_predicate(w, &mem.map, budget, mseed)?;
        row.predicate_value = v;
        row.margin = margin;
        row.pass = pass && row.within_radius && row.sampled_consistent;
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
        row.pass = false;
    }
    row
}

/// Generates `member_count` maps (possibly none) certified to lie in the witness ball
/// (member 0 is the center) and evaluates the predicate on each. Also
/// certifies that the center lies within `r` of the base map.
pub fn verify_witness(w: &PorosityWitness, member_count: usize, budget: usize, seed: u64) -> Result<WitnessVerification> {
    if budget == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    let ctx = BoundCtx::new(w);
    let cd = w.metric.distance(&w.base_f, &w.center_g, mix(seed, 0xce17e5))?;
    let certified = cd.certified();
    let members: Vec<MemberRow> =
        (0..member_count).into_par_iter().map(|i| verify_member(w, &ctx, i, budget, seed)).collect();
    let passed = members.iter().filter(|r| r.pass).count();
    let worst = members.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let worst = if worst.is_finite() { worst } else { 0.0 };
    let center_ok = certified < w.r;
    Ok(WitnessVerification {
        predicate: w.predicate.name().into(),
        metric: w.metric.name(),
        r: w.r,
        radius_log2: w.radius_log2,
        center_distance_value: cd.value,
        center_distance_tail: cd.tail_bound,
        center_distance_certified: certified,
        center_ok,
        failed: members.len() - passed,
        all_pass: passed == members.len() && center_ok,
        passed,
        worst_margin: worst,
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> SpaceModel {
        SpaceModel::euclidean(1).unwrap()
    }

    fn o() -> Point {
        Point::scalar(0.0)
    }

    fn series(m: &SpaceModel) -> MapMetric {
        MapMetric::series(m, &o(), &Gauge::log(), None, 400).unwrap()
    }

    #[test]
    fn ball_invariance_constants() {
        let m = line();
        let f = NonexpMap::affine_1d(&m, 1.0, 1.0).unwrap();
        let w = ball_invariance_witness(&f, 0.5, &o(), &series(&m)).unwrap();
        assert!((w.param("gamma").unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!((w.param("m_f").unwrap() - 24.0).abs() < 1e-12);
        assert!((w.param("alpha_tilde").unwrap() - 1.0 / 73.0).abs() < 1e-15);
        assert_eq!(w.param("r0_relaxed"), Some(1.0));
        assert!((w.radius_log2 + 146.0).abs() < 1e-9);
        let fixed = NonexpMap::affine_1d(&m, 0.5, 0.0).unwrap();
        let w = ball_invariance_witness(&fixed, 0.5, &o(), &series(&m)).unwrap();
        assert!((w.param("m_f").unwrap() - 1.0 / w.param("gamma").unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rakotch_constants() {
        let m = line();
        let id = NonexpMap::identity(&m);
        let w = rakotch_witness(&id, 0.5, 2, &o(), &series(&m)).unwrap();
        assert!((w.param("alpha").unwrap() - 1.0 / 128.0).abs() < 1e-15);
        assert!((w.param("gamma").unwrap() - 0.1875).abs() < 1e-15);
        let wm = MapMetric::weighted(&m, &o(), 2.0, 200).unwrap();
        let w = rakotch_witness(&id, 0.5, 2, &o(), &wm).unwrap();
        assert!((w.param("alpha").unwrap() - 1.0 / 40.0).abs() < 1e-15);
    }

    #[test]
    fn modcont_constants() {
        let m = line();
        let f = NonexpMap::affine_1d(&m, 0.5, 0.0).unwrap();
        let w = modcont_witness(&f, 0.5, 1.0, 0.5, &o(), &series(&m)).unwrap();
        assert!((w.param("eps").unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert!((w.param("alpha").unwrap() - 1.0 / 576.0).abs() < 1e-15);
        assert_eq!(w.param("n_big"), Some(16.0));
        let w = modcont_witness(&f, 0.5, 8.0, 0.9, &o(), &series(&m)).unwrap();
        assert!((w.param("eps").unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn shrink_constants() {
        let m = line();
        let id = NonexpMap::identity(&m);
        let pm = MapMetric::pointwise(&m, None).unwrap();
        let w = shrink_witness(&id, &o(), &Point::scalar(10.0), &o(), 0.1, 0.5, &pm).unwrap();
        assert!((w.param("r_pair").unwrap() - 0.1).abs() < 1e-12);
        assert!(shrink_witness(&id, &o(), &o(), &o(), 0.1, 0.5, &pm).is_err());
    }

    #[test]
    fn kappa_is_the_sup() {
        for s in [1.5, 2.0, 3.0] {
            let k = weighted_kappa(s);
            let sampled = (1..20000).map(|i| i as f64 * 1e-3).map(|t| t / (1.0 + t.powf(s))).fold(0.0, f64::max);
            assert!(k >= sampled - 1e-12 && k - sampled < 1e-6);
        }
    }

    #[test]
    fn single_member_is_the_center() {
        let m = line();
        let f = NonexpMap::affine_1d(&m, 1.0, 1.0).unwrap();
        let w = ball_invariance_witness(&f, 0.5, &o(), &series(&m)).unwrap();
        let v = verify_witness(&w, 1, 500, 3).unwrap();
        assert!(v.all_pass, "{v:?}");
        assert_eq!(v.members[0].kind, MemberKind::Center);
    }

    #[test]
    fn weighted_members_are_certified_and_sampled_below_bound() {
        let m = line();
        let f = NonexpMap::affine_1d(&m, 0.5, 0.0).unwrap();
        let wm = MapMetric::weighted(&m, &o(), 2.0, 300).unwrap();
        let w = modcont_witness(&f, 0.5, 1.0, 0.5, &o(), &wm).unwrap();
        let v = verify_witness(&w, 12, 300, 5).unwrap();
        assert!(v.all_pass, "{v:#?}");
        assert!(v.members.iter().any(|r| r.sampled_distance.is_some()));
        assert!(v.members.iter().any(|r| r.kind == MemberKind::FarCollapse));
    }
}
