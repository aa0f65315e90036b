//! Sampled lower bounds for Lipschitz-type suprema.
//!
//! Every estimator draws pairs in parallel batches seeded by `(seed, batch)`,
//! adds deterministic pairs (axis extremes of the region and pairs around the
//! map's hotspots), then refines the best pair with five rounds of shrinking
//! Gaussian proposals. The maximum is reduced in batch order.

use rayon::prelude::*;
use serde::Serialize;

use super::NonexpMap;
use crate::error::{invalid, Result};
use crate::geodesic::{extreme_points, Point, SpaceModel};
use crate::sampling::{mix, par_argmax, SampleMode, Uniforms, BATCH};

/// Finest dyadic scale used when sampling near pairs.
const FINEST_SCALE: i32 = 20;
const REFINE_ROUNDS: usize = 5;
const REFINE_PROPOSALS: usize = 32;
const HOTSPOT_CAP: usize = 32;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LipEstimate {
    pub value: f64,
    pub pairs_tested: usize,
    pub region: String,
    pub seed: u64,
    /// Pair attaining `value`, when one was found.
    #[serde(skip)]
    pub argmax: Option<(Point, Point)>,
}

type Pair = (Vec<f64>, Vec<f64>);

pub(crate) struct Found {
    pub value: f64,
    pub pair: Option<Pair>,
    pub tested: usize,
}

/// Maximize `objective` over generated, extra and refined pairs.
/// `objective` returns `None` for pairs violating the constraints.
/// `spread` gives the refinement step for a pair.
pub(crate) fn pair_search<G, O, S>(
    model: &SpaceModel,
    budget: usize,
    seed: u64,
    generate: G,
    extras: &[Pair],
    objective: O,
    spread: S,
) -> Found
where
    G: Fn(&mut Uniforms, usize) -> Pair + Sync + Send,
    O: Fn(&[f64], &[f64]) -> Option<f64> + Sync + Send,
    S: Fn(&[f64], &[f64]) -> f64,
{
    let random = par_argmax(budget, |b, len| {
        let mut u = Uniforms::new(SampleMode::Random, seed, b as u64);
        let mut best: Option<(f64, Pair)> = None;
        for i in 0..len {
            let (x, y) = generate(&mut u, b * BATCH + i);
            if let Some(q) = objective(&x, &y) {
                if best.as_ref().is_none_or(|(v, _)| q > *v) {
                    best = Some((q, (x, y)));
                }
            }
        }
        best
    });
    let extra_vals: Vec<Option<f64>> = extras.par_iter().map(|(x, y)| objective(x, y)).collect();
    let mut best = random;
    for (q, pair) in extra_vals.into_iter().zip(extras) {
        if let Some(q) = q {
            if best.as_ref().is_none_or(|(v, _)| q > *v) {
                best = Some((q, pair.clone()));
            }
        }
    }
    let mut tested = budget + extras.len();
    if let Some((ref mut v, ref mut pair)) = best {
        let mut u = Uniforms::new(SampleMode::Random, mix(seed, 0x5ef1_4e), u64::MAX);
        let mut sigma = spread(&pair.0, &pair.1);
        for _ in 0..REFINE_ROUNDS {
            for _ in 0..REFINE_PROPOSALS {
                let dx = sigma * u.normal().abs();
                let dy = sigma * u.normal().abs();
                let x = model.perturb(&pair.0, dx, &mut u);
                let y = model.perturb(&pair.1, dy, &mut u);
                tested += 1;
                if let Some(q) = objective(&x, &y) {
                    if q > *v {
                        *v = q;
                        *pair = (x, y);
                    }
                }
            }
            sigma /= 4.0;
        }
    }
    match best {
        Some((value, pair)) => Found { value, pair: Some(pair), tested },
        None => Found { value: 0.0, pair: None, tested },
    }
}

/// Smallest pair distance trusted for quotients near `at`: below it the
/// rounding error of coordinates dominates the quotient.
fn min_separation(at: &[f64], radius: f64) -> f64 {
    let scale = at.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    1e-7 * (1.0 + scale + radius)
}

fn within(model: &SpaceModel, center: &[f64], radius: f64, p: &[f64]) -> bool {
    model.d(center, p) <= radius * (1.0 + 1e-12) + 1e-12
}

fn relevant_hotspots(f: &NonexpMap, center: &[f64], reach: f64) -> Vec<Vec<f64>> {
    let mut hs: Vec<Vec<f64>> = Vec::new();
    for h in f.hotspots() {
        if f.model.d(center, &h) <= reach && !hs.contains(&h) {
            hs.push(h);
        }
        if hs.len() == HOTSPOT_CAP {
            break;
        }
    }
    hs
}

fn scale_at(base: f64, k: i32) -> f64 {
    base * (-(k as f64)).exp2()
}

fn axis_pairs(model: &SpaceModel, at: &[f64], d: f64, out: &mut Vec<Pair>) {
    for e in model.tangent_basis(at) {
        let neg: Vec<f64> = e.iter().map(|a| -a).collect();
        let (p, _) = model.shoot(at, &e, d);
        let (q, _) = model.shoot(at, &neg, d);
        out.push((at.to_vec(), p.clone()));
        out.push((at.to_vec(), q.clone()));
        let (ph, _) = model.shoot(at, &e, d / 2.0);
        let (qh, _) = model.shoot(at, &neg, d / 2.0);
        out.push((qh, ph));
    }
}

fn to_points(pair: Option<Pair>) -> Option<(Point, Point)> {
    pair.map(|(x, y)| (Point::new(x), Point::new(y)))
}

fn check_budget(budget: usize) -> Result<()> {
    if budget == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    Ok(())
}

/// Largest quotient `ρ(f(x),f(y))/ρ(x,y)` over sampled pairs in `B̄(center, radius)`.
pub fn empirical_lipschitz(f: &NonexpMap, center: &Point, radius: f64, budget: usize, seed: u64) -> Result<LipEstimate> {
    let m = &f.model;
    m.validate(center)?;
    check_budget(budget)?;
    if !(radius > 0.0) || radius > m.max_radius() {
        return Err(invalid(format!("region radius {radius} must lie in (0, {}]", m.max_radius())));
    }
    let c = &center.coords;
    let sep = min_separation(c, radius);
    let hs = relevant_hotspots(f, c, radius);
    let generate = |u: &mut Uniforms, idx: usize| -> Pair {
        let kind = idx % 4;
        if kind >= 2 && !hs.is_empty() {
            let h = &hs[(idx / 4) % hs.len()];
            let k = (u.uniform() * (FINEST_SCALE + 1) as f64) as i32;
            let s = scale_at(radius, k).max(sep);
            let x = m.sample_shell(h, 0.0, s, u);
            let y = if kind == 2 { m.sample_shell(h, 0.0, s, u) } else { m.perturb(&x, s * u.uniform(), u) };
            return (x, y);
        }
        let x = m.sample_shell(c, 0.0, radius, u);
        let y = if kind % 2 == 0 {
            m.sample_shell(c, 0.0, radius, u)
        } else {
            let k = (u.uniform() * 13.0) as i32;
            m.perturb(&x, scale_at(radius, k) * u.uniform(), u)
        };
        (x, y)
    };
    let mut extras = Vec::new();
    let ex = extreme_points(m, center, radius);
    for (i, a) in ex.iter().enumerate() {
        for b in &ex[i + 1..] {
            extras.push((a.coords.clone(), b.coords.clone()));
        }
    }
    for h in &hs {
        for k in 0..=FINEST_SCALE {
            axis_pairs(m, h, scale_at(radius, k).max(sep), &mut extras);
        }
    }
    let objective = |x: &[f64], y: &[f64]| {
        if !within(m, c, radius, x) || !within(m, c, radius, y) {
            return None;
        }
        let d = m.d(x, y);
        (d >= sep).then(|| m.d(&f.apply(x), &f.apply(y)) / d)
    };
    let found = pair_search(m, budget, seed, generate, &extras, objective, |x, y| 0.25 * m.d(x, y));
    Ok(LipEstimate {
        value: found.value,
        pairs_tested: found.tested,
        region: format!("closed ball of radius {radius} around {center}"),
        seed,
        argmax: to_points(found.pair),
    })
}

/// Largest `ρ(f(x),f(y))` over sampled pairs with `ρ(x,y) ≤ t0` and `x`
/// drawn from `B̄(center, region_radius)`.
pub fn modulus_of_continuity(
    f: &NonexpMap,
    center: &Point,
    t0: f64,
    region_radius: f64,
    budget: usize,
    seed: u64,
) -> Result<LipEstimate> {
    let m = &f.model;
    m.validate(center)?;
    check_budget(budget)?;
    if !(t0 > 0.0) || !t0.is_finite() {
        return Err(invalid(format!("t0 {t0} must be positive")));
    }
    if !(region_radius >= 0.0) || region_radius > m.max_radius() {
        return Err(invalid(format!("region radius {region_radius} must lie in [0, {}]", m.max_radius())));
    }
    let c = &center.coords;
    let hs = relevant_hotspots(f, c, region_radius + t0);
    let generate = |u: &mut Uniforms, idx: usize| -> Pair {
        let x = if idx % 4 == 2 && !hs.is_empty() {
            let h = &hs[(idx / 4) % hs.len()];
            m.sample_shell(h, 0.0, t0, u)
        } else {
            m.sample_shell(c, 0.0, region_radius, u)
        };
        let d = if idx % 2 == 0 { t0 } else { t0 * u.uniform() };
        let y = m.perturb(&x, d, u);
        (x, y)
    };
    let mut extras = Vec::new();
    for e in extreme_points(m, center, region_radius) {
        axis_pairs(m, &e.coords, t0, &mut extras);
        if let Some(dir) = m.direction_toward(&e.coords, c) {
            let (p, _) = m.shoot(&e.coords, &dir, t0);
            extras.push((e.coords.clone(), p));
        }
    }
    for h in &hs {
        axis_pairs(m, h, t0, &mut extras);
    }
    let objective = |x: &[f64], y: &[f64]| {
        (m.d(x, y) <= t0 * (1.0 + 1e-12)).then(|| m.d(&f.apply(x), &f.apply(y)))
    };
    let found = pair_search(m, budget, seed, generate, &extras, objective, |_, _| 0.25 * t0);
    Ok(LipEstimate {
        value: found.value,
        pairs_tested: found.tested,
        region: format!("pairs at distance <= {t0} starting in the ball of radius {region_radius} around {center}"),
        seed,
        argmax: to_points(found.pair),
    })
}

/// Lower bound of `Lip(f,x,r)`: quotients at `x` against points at
/// distances between `r·2^-20` and `r`, ignoring distances below
/// `min(1e-8·(1+|x|_∞), r/4)`.
pub fn local_lipschitz(f: &NonexpMap, x: &Point, r: f64, budget: usize, seed: u64) -> Result<LipEstimate> {
    let m = &f.model;
    m.validate(x)?;
    check_budget(budget)?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("radius {r} must be positive")));
    }
    let c = &x.coords;
    let fx = f.apply(c);
    let generate = |u: &mut Uniforms, idx: usize| -> Pair {
        let k = (idx % (FINEST_SCALE as usize + 1)) as i32;
        let d = scale_at(r, k) * (0.5 + 0.5 * u.uniform()) * (1.0 - 1e-9);
        (c.clone(), m.perturb(c, d, u))
    };
    let mut extras = Vec::new();
    for k in 0..=FINEST_SCALE {
        let d = scale_at(r, k) * (1.0 - 1e-9);
        for e in m.tangent_basis(c) {
            let neg: Vec<f64> = e.iter().map(|a| -a).collect();
            extras.push((c.clone(), m.shoot(c, &e, d).0));
            extras.push((c.clone(), m.shoot(c, &neg, d).0));
        }
    }
    // Quotients at distances near the coordinate rounding level are noise.
    let floor = (1e-8 * (1.0 + c.iter().fold(0.0f64, |a, v| a.max(v.abs())))).min(r / 4.0);
    let objective = |_: &[f64], y: &[f64]| {
        let d = m.d(c, y);
        (d >= floor && d < r).then(|| m.d(&fx, &f.apply(y)) / d)
    };
    // The first component is ignored: every quotient is anchored at `x`.
    let found = pair_search(m, budget, seed, generate, &extras, objective, |_, y| 0.25 * m.d(c, y));
    let found = Found { pair: found.pair.map(|(_, y)| (c.clone(), y)), ..found };
    Ok(LipEstimate {
        value: found.value,
        pairs_tested: found.tested,
        region: format!("punctured ball of radius {r} around {x}"),
        seed,
        argmax: to_points(found.pair),
    })
}

/// Sampled gauges `c_{f,n}`, `n = 1..=n_max`, and the step function built
/// from them.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RakotchGauge {
    pub n_max: usize,
    /// Running maxima of the sampled quotients.
    pub gauges: Vec<f64>,
    /// Sampled quotients before the running maximum.
    pub raw: Vec<f64>,
    pub theta: Point,
    pub map_fingerprint: String,
    pub pairs_tested: usize,
    pub seed: u64,
}

impl RakotchGauge {
    /// Gauge `c_{f,n}` for `1 ≤ n ≤ n_max`.
    pub fn gauge(&self, n: usize) -> f64 {
        self.gauges[n - 1]
    }

    /// `φ_{f,M}(t)` with `M = n_max`: `c_M` for `t ≥ 1/M`. Below `1/M`
    /// no gauge was sampled and the value is the trivial bound 1.
    pub fn step(&self, t: f64) -> f64 {
        let m = self.n_max as f64;
        if t * m >= 1.0 {
            self.gauges[self.n_max - 1]
        } else {
            1.0
        }
    }

    pub fn max_gauge(&self) -> f64 {
        self.gauges.last().copied().unwrap_or(0.0)
    }
}

/// Sampled `c_{f,n} = sup ρ(f(x),f(y))/ρ(x,y)` over `x,y ∈ B̄(θ,n)` with
/// `ρ(x,y) ≥ 1/n`, using `budget` random pairs for every `n`.
pub fn rakotch_gauges(f: &NonexpMap, theta: &Point, n_max: usize, budget: usize, seed: u64) -> Result<RakotchGauge> {
    let m = &f.model;
    m.validate(theta)?;
    check_budget(budget)?;
    if n_max == 0 {
        return Err(invalid("n_max must be at least 1"));
    }
    if n_max as f64 > m.max_radius() {
        return Err(invalid(format!("n_max {n_max} exceeds the usable radius {} of {}", m.max_radius(), m.name())));
    }
    let c = &theta.coords;
    let all_hs = relevant_hotspots(f, c, n_max as f64);
    let mut raw = Vec::with_capacity(n_max);
    let mut tested = 0;
    for n in 1..=n_max {
        let radius = n as f64;
        let min_d = 1.0 / radius;
        let hs: Vec<&Vec<f64>> = all_hs.iter().filter(|h| m.d(c, h) <= radius).collect();
        let generate = |u: &mut Uniforms, idx: usize| -> Pair {
            let x = match idx % 3 {
                2 if !hs.is_empty() => m.sample_shell(hs[(idx / 3) % hs.len()], 0.0, min_d, u),
                _ => m.sample_shell(c, 0.0, radius, u),
            };
            let y = if idx % 3 == 0 {
                m.sample_shell(c, 0.0, radius, u)
            } else {
                m.perturb(&x, min_d * (1.0 + 3.0 * u.uniform()), u)
            };
            (x, y)
        };
        let mut extras = Vec::new();
        for e in m.tangent_basis(c) {
            let neg: Vec<f64> = e.iter().map(|a| -a).collect();
            let far_p = m.shoot(c, &e, radius).0;
            let far_n = m.shoot(c, &neg, radius).0;
            extras.push((far_n.clone(), far_p.clone()));
            extras.push((c.clone(), far_p));
            extras.push((m.shoot(c, &neg, min_d / 2.0).0, m.shoot(c, &e, min_d / 2.0).0));
        }
        let objective = |x: &[f64], y: &[f64]| {
            if !within(m, c, radius, x) || !within(m, c, radius, y) {
                return None;
            }
            let d = m.d(x, y);
            (d >= min_d * (1.0 - 1e-12) && d > 0.0).then(|| m.d(&f.apply(x), &f.apply(y)) / d)
        };
        let found = pair_search(m, budget, mix(seed, n as u64), generate, &extras, objective, |x, y| {
            0.25 * m.d(x, y)
        });
        tested += found.tested;
        raw.push(found.value);
    }
    let mut gauges = raw.clone();
    for i in 1..gauges.len() {
        gauges[i] = gauges[i].max(gauges[i - 1]);
    }
    Ok(RakotchGauge {
        n_max,
        gauges,
        raw,
        theta: theta.clone(),
        map_fingerprint: f.describe(),
        pairs_tested: tested,
        seed,
    })
}

/// Per-piece and whole-region Lipschitz quotients of a piecewise map.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PiecewiseAudit {
    /// `(piece index, largest quotient over pairs inside that piece)`.
    pub per_piece: Vec<(u32, f64)>,
    pub whole: f64,
    pub pairs_tested: usize,
}

impl PiecewiseAudit {
    pub fn max_piece(&self) -> f64 {
        self.per_piece.iter().map(|p| p.1).fold(0.0, f64::max)
    }
}

/// Samples pairs in `B̄(center, radius)` (half of them close together) and
/// records quotients separately for pairs within one piece.
pub fn piecewise_audit(f: &NonexpMap, center: &Point, radius: f64, budget: usize, seed: u64) -> Result<PiecewiseAudit> {
    let m = &f.model;
    m.validate(center)?;
    check_budget(budget)?;
    let c = &center.coords;
    let sep = min_separation(c, radius);
    let hs = relevant_hotspots(f, c, radius);
    let batches: Vec<(Vec<(u32, f64)>, f64)> = (0..budget.div_ceil(BATCH))
        .into_par_iter()
        .map(|b| {
            let mut u = Uniforms::new(SampleMode::Random, seed, b as u64);
            let mut pieces: Vec<(u32, f64)> = Vec::new();
            let mut whole = 0.0f64;
            for i in 0..(budget - b * BATCH).min(BATCH) {
                let x = if i % 2 == 1 && !hs.is_empty() {
                    let h = &hs[(i / 2) % hs.len()];
                    let k = (u.uniform() * 8.0) as i32;
                    m.sample_shell(h, 0.0, scale_at(radius, k), &mut u)
                } else {
                    m.sample_shell(c, 0.0, radius, &mut u)
                };
                let y = if i % 3 == 0 {
                    m.sample_shell(c, 0.0, radius, &mut u)
                } else {
                    let k = (u.uniform() * 12.0) as i32;
                    m.perturb(&x, scale_at(radius, k) * u.uniform(), &mut u)
                };
                if !within(m, c, radius, &x) || !within(m, c, radius, &y) {
                    continue;
                }
                let d = m.d(&x, &y);
                if d < sep {
                    continue;
                }
                let q = m.d(&f.apply(&x), &f.apply(&y)) / d;
                whole = whole.max(q);
                let (px, py) = (f.piece_of(&x), f.piece_of(&y));
                if px == py {
                    match pieces.iter_mut().find(|p| p.0 == px) {
                        Some(p) => p.1 = p.1.max(q),
                        None => pieces.push((px, q)),
                    }
                }
            }
            (pieces, whole)
        })
        .collect();
    let mut per_piece: Vec<(u32, f64)> = Vec::new();
    let mut whole = 0.0f64;
    for (pieces, w) in batches {
        whole = whole.max(w);
        for (k, q) in pieces {
            match per_piece.iter_mut().find(|p| p.0 == k) {
                Some(p) => p.1 = p.1.max(q),
                None => per_piece.push((k, q)),
            }
        }
    }
    per_piece.sort_by_key(|p| p.0);
    Ok(PiecewiseAudit { per_piece, whole, pairs_tested: budget })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> SpaceModel {
        SpaceModel::euclidean(1).unwrap()
    }

    #[test]
    fn lipschitz_of_simple_maps() {
        let m = line();
        let o = Point::scalar(0.0);
        let id = NonexpMap::identity(&m);
        let e = empirical_lipschitz(&id, &o, 10.0, 2000, 1).unwrap();
        assert!((e.value - 1.0).abs() < 1e-9, "{e:?}");
        let f = NonexpMap::contract_toward(&id, &o, 0.25).unwrap();
        let e = empirical_lipschitz(&f, &o, 10.0, 2000, 1).unwrap();
        assert!((e.value - 0.75).abs() < 1e-9);
        let c = NonexpMap::constant(&m, &Point::scalar(3.0)).unwrap();
        assert_eq!(empirical_lipschitz(&c, &o, 10.0, 500, 1).unwrap().value, 0.0);
    }

    #[test]
    fn modulus_examples() {
        let m = line();
        let o = Point::scalar(0.0);
        let id = NonexpMap::identity(&m);
        let w = modulus_of_continuity(&id, &o, 1.5, 10.0, 1000, 2).unwrap();
        assert!((w.value - 1.5).abs() < 1e-12);
        let half = NonexpMap::affine_1d(&m, 0.5, 0.0).unwrap();
        let w = modulus_of_continuity(&half, &o, 1.5, 10.0, 1000, 2).unwrap();
        assert!((w.value - 0.75).abs() < 1e-12);
        let c = NonexpMap::constant(&m, &o).unwrap();
        assert_eq!(modulus_of_continuity(&c, &o, 1.0, 10.0, 100, 2).unwrap().value, 0.0);
    }

    #[test]
    fn local_lipschitz_examples() {
        let m = line();
        let half = NonexpMap::affine_1d(&m, 0.5, 0.0).unwrap();
        let l = local_lipschitz(&half, &Point::scalar(3.0), 0.1, 500, 3).unwrap();
        assert!((l.value - 0.5).abs() < 1e-9);
        let id = NonexpMap::identity(&m);
        assert!((local_lipschitz(&id, &Point::scalar(3.0), 0.1, 500, 3).unwrap().value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gauges_of_affine_contraction() {
        let m = line();
        let f = NonexpMap::affine_1d(&m, 0.5, 1.0).unwrap();
        let g = rakotch_gauges(&f, &Point::scalar(0.0), 6, 500, 4).unwrap();
        for v in &g.gauges {
            assert!((v - 0.5).abs() < 1e-9);
        }
        assert!((g.step(1.0) - 0.5).abs() < 1e-9);
        assert_eq!(g.step(0.01), 1.0);
        let id = NonexpMap::identity(&m);
        let g = rakotch_gauges(&id, &Point::scalar(0.0), 3, 200, 4).unwrap();
        assert!(g.gauges.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn estimates_do_not_depend_on_thread_count() {
        let m = SpaceModel::euclidean(2).unwrap();
        let f = NonexpMap::contract_toward(&NonexpMap::identity(&m), &m.origin(), 0.3).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| empirical_lipschitz(&f, &m.origin(), 5.0, 5000, 9).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
