//! Map surgeries used to move a nonexpansive map a controlled distance:
//! bump functions, radial collapses, spikes, modulus enlargement and local
//! isometry patches. Porosity witnesses built from them live in [`witness`].

pub mod witness;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geodesic::{Point, SpaceModel};
use crate::mapping::{bump_value, collapse_apply, Node, NonexpMap, PatchData};

pub use witness::{
    ball_invariance_witness, modcont_witness, rakotch_witness, shrink_witness, verify_witness, MemberRow,
    PorosityWitness, Predicate, WitnessVerification,
};

/// `λ_{z,R,ε}`: one on `B̄(z,R)`, then decreasing with slope `ε` to zero at
/// distance `R + 1/ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpField {
    pub model: SpaceModel,
    pub z: Point,
    pub r: f64,
    pub eps: f64,
}

impl BumpField {
    pub fn value(&self, x: &Point) -> Result<f64> {
        Ok(bump_value(self.model.dist(x, &self.z)?, self.r, self.eps))
    }

    /// Radius beyond which the field vanishes.
    pub fn support_radius(&self) -> f64 {
        self.r + 1.0 / self.eps
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} must be positive and finite")))
    }
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} must lie in (0,1)")))
    }
}

pub fn bump_lambda(model: &SpaceModel, z: &Point, r: f64, eps: f64) -> Result<BumpField> {
    model.validate(z)?;
    positive("R", r)?;
    positive("eps", eps)?;
    Ok(BumpField { model: model.clone(), z: z.clone(), r, eps })
}

/// `π_{z,R,ε}`: collapses `B(z,R)` onto `z`, moves no point by more than
/// `R` and is the identity outside `B(z, R(1+1/ε))`. Lipschitz with `1+ε`,
/// so the result is flagged as an intermediate when `ε > 0`.
pub fn radial_collapse(model: &SpaceModel, z: &Point, r: f64, eps: f64) -> Result<NonexpMap> {
    model.validate(z)?;
    positive("R", r)?;
    positive("eps", eps)?;
    Ok(NonexpMap::from_node(model, Node::RadialCollapse { z: z.coords.clone(), r, eps }, 1.0 + eps))
}

#[derive(Debug, Clone)]
pub struct SpikeMap {
    pub map: NonexpMap,
    /// Image of `x0`.
    pub u: Point,
    /// Excess `ρ(u,v) - λt₀`.
    pub eps: f64,
}

/// Nonexpansive `τ` with `τ = v` off `B(x0,t0)`, `ρ(τ(x),v) ≤ t0` and
/// `ρ(τ(x0),τ(y0)) = λt0 + ε > λt0` where `ε = (1-λ)t0/2`.
pub fn spike_map(model: &SpaceModel, x0: &Point, y0: &Point, v: &Point, t0: f64, lam: f64) -> Result<SpikeMap> {
    model.validate(v)?;
    positive("t0", t0)?;
    open_unit("lambda", lam)?;
    let d = model.dist(x0, y0)?;
    if (d - t0).abs() > model.tolerance() * t0.max(1.0) {
        return Err(invalid(format!("rho(x0,y0) = {d} differs from t0 = {t0}")));
    }
    let eps = (1.0 - lam) * t0 / 2.0;
    let u = model.point_at_distance_away(v, lam * t0 + eps, x0)?.point;
    let node = Node::Spike { x0: x0.coords.clone(), v: v.coords.clone(), u: u.coords.clone(), t0 };
    Ok(SpikeMap { map: NonexpMap::from_node(model, node, 1.0), u, eps })
}

#[derive(Debug, Clone)]
pub struct EnlargedModulus {
    pub map: NonexpMap,
    pub x0: Point,
    pub y0: Point,
    /// `S = t0/γ`, radius of the region around `x0` where `g` differs from `f`.
    pub s: f64,
    pub delta: f64,
}

/// Nonexpansive `g` equal to `f` on `B(z,R)`, within `2t0` of `f`
/// everywhere and with `ρ(g(x0),g(y0)) > λt0` for the returned pair at
/// distance `t0`. Needs `Lip f ≤ 1-γ`.
pub fn enlarge_modulus(f: &NonexpMap, z: &Point, gamma: f64, lam: f64, t0: f64, r: f64) -> Result<EnlargedModulus> {
    let model = f.model();
    model.validate(z)?;
    open_unit("gamma", gamma)?;
    open_unit("lambda", lam)?;
    positive("t0", t0)?;
    positive("R", r)?;
    if f.claimed_lip() > 1.0 - gamma + 1e-12 {
        return Err(invalid(format!(
            "enlarge_modulus needs Lip f <= 1 - gamma = {}, got {}",
            1.0 - gamma,
            f.claimed_lip()
        )));
    }
    let delta = gamma / (1.0 - gamma);
    let s = t0 / gamma;
    let reach = r + s;
    if reach + t0 > model.max_radius() {
        return Err(invalid(format!(
            "x0 would lie at distance {reach} from z, beyond the usable radius {} of {}",
            model.max_radius(),
            model.name()
        )));
    }
    let x0 = model.point_at_distance(z, reach, None)?.point;
    let y0 = model.combine(z, &x0, (reach - t0) / reach)?;
    let pi = radial_collapse(model, &x0, t0, delta)?;
    let v = f.eval(&x0)?;
    let tau = spike_map(model, &x0, &y0, &v, t0, lam)?.map;
    let node = Node::EnlargeModulus {
        inner: f.clone(),
        tau,
        pi,
        x0: x0.coords.clone(),
        y0: y0.coords.clone(),
        t0,
        s,
    };
    Ok(EnlargedModulus { map: NonexpMap::from_node(model, node, 1.0), x0, y0, s, delta })
}

/// An `a`-separated point set chosen greedily from a sampled cloud.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatedNet {
    pub points: Vec<Point>,
    pub a: f64,
    /// Number of cloud points the net is maximal within.
    pub cloud_size: usize,
}

impl SeparatedNet {
    /// Wraps given points after checking separation.
    pub fn from_points(model: &SpaceModel, points: Vec<Point>, a: f64) -> Result<Self> {
        positive("a", a)?;
        for p in &points {
            model.validate(p)?;
        }
        for i in 0..points.len() {
            for j in 0..i {
                let d = model.d(&points[i].coords, &points[j].coords);
                if d < a - model.tolerance() {
                    return Err(invalid(format!("net points {j} and {i} are {d} apart, less than a = {a}")));
                }
            }
        }
        let cloud_size = points.len();
        Ok(SeparatedNet { points, a, cloud_size })
    }
}

/// Greedy pass in input order: a point is kept iff it is at least `a` from
/// every point kept so far.
pub fn greedy_separated_net(model: &SpaceModel, cloud: &[Point], a: f64) -> Result<SeparatedNet> {
    positive("a", a)?;
    if cloud.is_empty() {
        return Err(invalid("cannot build a net over an empty cloud"));
    }
    let mut kept: Vec<Point> = Vec::new();
    for p in cloud {
        model.validate(p)?;
        if kept.iter().all(|q| model.d(&p.coords, &q.coords) >= a) {
            kept.push(p.clone());
        }
    }
    Ok(SeparatedNet { points: kept, a, cloud_size: cloud.len() })
}

/// Nonexpansive `g` with `ρ(f(x),g(x)) < (3ε/4) max{1, ρ(x,θ)}` that is an
/// isometry from each net point `z` on `B̄(z, εa/32)`.
///
/// Three stages: `g₀ = f∘π_z` near every net point (`r = εa/16`, `R = a/4`,
/// `δ = ε/(4-ε)`), `g₁ = (1-ε/4) g₀ ⊕ (ε/4) g₀(θ)`, then a radial spike from
/// `g₁(z)` toward a point `p_z` at distance `a/3` on `B(z,r)`.
pub fn isometry_patch(f: &NonexpMap, net: &SeparatedNet, a: f64, eps: f64, theta: &Point) -> Result<NonexpMap> {
    let model = f.model();
    model.validate(theta)?;
    open_unit("a", a)?;
    open_unit("eps", eps)?;
    if net.points.len() < 2 {
        return Err(invalid("isometry_patch needs a net with at least two points"));
    }
    SeparatedNet::from_points(model, net.points.clone(), a)?;
    let r = eps * a / 16.0;
    let big_r = a / 4.0;
    let delta = eps / (4.0 - eps);
    let net_c: Vec<Vec<f64>> = net.points.iter().map(|p| p.coords.clone()).collect();
    let g0 = |x: &[f64]| -> Vec<f64> {
        match net_c.iter().find(|z| model.d(x, z) < big_r) {
            Some(z) => f.apply(&collapse_apply(model, z, r, delta, x)),
            None => f.apply(x),
        }
    };
    let g0_theta = g0(&theta.coords);
    let mut g1_at = Vec::with_capacity(net_c.len());
    let mut p_at = Vec::with_capacity(net_c.len());
    for z in &net_c {
        let g1 = model.comb(&f.apply(z), &g0_theta, eps / 4.0);
        let p = model.point_at_distance(&Point::new(g1.clone()), a / 3.0, None)?.point;
        g1_at.push(g1);
        p_at.push(p.coords);
    }
    let data = PatchData {
        f: f.clone(),
        net: net_c,
        a,
        eps,
        theta: theta.coords.clone(),
        r,
        big_r,
        delta,
        g0_theta,
        g1_at,
        p_at,
    };
    Ok(NonexpMap::from_node(model, Node::IsometryPatch(Box::new(data)), 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{empirical_lipschitz, local_lipschitz};

    fn line() -> SpaceModel {
        SpaceModel::euclidean(1).unwrap()
    }

    fn p(x: f64) -> Point {
        Point::scalar(x)
    }

    #[test]
    fn bump_values() {
        let b = bump_lambda(&line(), &p(0.0), 1.0, 1.0).unwrap();
        assert_eq!(b.value(&p(0.5)).unwrap(), 1.0);
        assert_eq!(b.value(&p(1.5)).unwrap(), 0.5);
        assert_eq!(b.value(&p(2.5)).unwrap(), 0.0);
        assert!(bump_lambda(&line(), &p(0.0), 0.0, 1.0).is_err());
    }

    #[test]
    fn collapse_values() {
        let m = line();
        let c = radial_collapse(&m, &p(0.0), 1.0, 1.0).unwrap();
        assert_eq!(c.eval(&p(0.5)).unwrap(), p(0.0));
        assert_eq!(c.eval(&p(3.0)).unwrap(), p(3.0));
        assert!((c.eval(&p(1.5)).unwrap().coords[0] - 1.0).abs() < 1e-15);
        assert!(c.is_intermediate());
        let l = empirical_lipschitz(&c, &p(0.0), 4.0, 2000, 1).unwrap();
        assert!(l.value <= 2.0 + 1e-7);
    }

    #[test]
    fn spike_values() {
        let m = line();
        let s = spike_map(&m, &p(0.0), &p(1.0), &p(5.0), 1.0, 0.5).unwrap();
        assert!((s.u.coords[0] - 5.75).abs() < 1e-15);
        assert_eq!(s.map.eval(&p(0.0)).unwrap(), s.u);
        assert_eq!(s.map.eval(&p(1.0)).unwrap(), p(5.0));
        assert_eq!(s.map.eval(&p(-3.0)).unwrap(), p(5.0));
        assert!(spike_map(&m, &p(0.0), &p(2.0), &p(5.0), 1.0, 0.5).is_err());
    }

    #[test]
    fn enlarge_modulus_example() {
        let m = line();
        let f = NonexpMap::affine_1d(&m, 0.5, 0.0).unwrap();
        let e = enlarge_modulus(&f, &p(0.0), 0.5, 0.75, 1.0, 2.0).unwrap();
        assert_eq!(e.s, 2.0);
        assert!((e.x0.coords[0].abs() - 4.0).abs() < 1e-12);
        assert!((e.y0.coords[0].abs() - 3.0).abs() < 1e-12);
        let gap = m.dist(&e.map.eval(&e.x0).unwrap(), &e.map.eval(&e.y0).unwrap()).unwrap();
        assert!(gap > 0.75);
        for x in [-1.9, 0.0, 1.3] {
            assert_eq!(e.map.eval(&p(x)).unwrap(), f.eval(&p(x)).unwrap());
        }
        let id = NonexpMap::identity(&m);
        assert!(enlarge_modulus(&id, &p(0.0), 0.5, 0.75, 1.0, 2.0).is_err());
    }

    #[test]
    fn greedy_net_examples() {
        let m = line();
        let cloud: Vec<Point> = [0.0, 0.3, 0.9, 2.0].iter().map(|&x| p(x)).collect();
        let n = greedy_separated_net(&m, &cloud, 1.0).unwrap();
        assert_eq!(n.points, vec![p(0.0), p(2.0)]);
        assert_eq!(greedy_separated_net(&m, &cloud, 10.0).unwrap().points, vec![p(0.0)]);
        assert_eq!(greedy_separated_net(&m, &cloud, 0.1).unwrap().points, cloud);
        assert!(greedy_separated_net(&m, &[], 1.0).is_err());
    }

    #[test]
    fn isometry_patch_example() {
        let m = line();
        let id = NonexpMap::identity(&m);
        let net = SeparatedNet::from_points(&m, vec![p(0.0), p(10.0)], 0.5).unwrap();
        let g = isometry_patch(&id, &net, 0.5, 0.5, &p(0.0)).unwrap();
        let y = 1.0 / 128.0;
        let d = m.dist(&g.eval(&p(y)).unwrap(), &g.eval(&p(0.0)).unwrap()).unwrap();
        assert!((d - y).abs() < 1e-9);
        let l = local_lipschitz(&g, &p(10.0), y, 500, 2).unwrap();
        assert!(l.value >= 1.0 - 1e-6);
        let bad = SeparatedNet { points: vec![p(0.0), p(0.1)], a: 0.5, cloud_size: 2 };
        assert!(isometry_patch(&id, &bad, 0.5, 0.5, &p(0.0)).is_err());
        let single = SeparatedNet { points: vec![p(0.0)], a: 0.5, cloud_size: 1 };
        assert!(isometry_patch(&id, &single, 0.5, 0.5, &p(0.0)).is_err());
    }
}
