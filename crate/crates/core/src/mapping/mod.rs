//! Self-mappings as immutable constructor trees.
//!
//! A [`NonexpMap`] is a shared node tree plus the model it acts on and a
//! claimed Lipschitz bound. Perturbation intermediates (for example the
//! `(1+ε)`-Lipschitz radial collapse) are flagged so that they never leave
//! the library as if they were nonexpansive.

pub mod estimate;

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{invalid, LabError, Result};
use crate::geodesic::{Point, SpaceModel};
use crate::geodesic::ModelKind;

pub use estimate::{
    empirical_lipschitz, local_lipschitz, modulus_of_continuity, piecewise_audit, rakotch_gauges, LipEstimate,
    PiecewiseAudit, RakotchGauge,
};

/// Slack on claimed bounds accepted when combining maps.
const LIP_EPS: f64 = 1e-12;

#[derive(Debug)]
pub(crate) struct PatchData {
    pub f: NonexpMap,
    pub net: Vec<Vec<f64>>,
    pub a: f64,
    pub eps: f64,
    pub theta: Vec<f64>,
    pub r: f64,
    pub big_r: f64,
    pub delta: f64,
    pub g0_theta: Vec<f64>,
    pub g1_at: Vec<Vec<f64>>,
    pub p_at: Vec<Vec<f64>>,
}

#[derive(Debug)]
pub(crate) enum Node {
    Identity,
    Constant(Vec<f64>),
    /// `x ↦ A x + b`, matrix row-major.
    Affine { matrix: Vec<f64>, offset: Vec<f64> },
    /// `x ↦ (1-γ) f(x) ⊕ γ f(θ)`.
    ContractToward { inner: NonexpMap, theta: Vec<f64>, anchor: Vec<f64>, gamma: f64 },
    /// `x ↦ (1-w) f(x) ⊕ w p`.
    BlendConstant { inner: NonexpMap, target: Vec<f64>, weight: f64 },
    /// Collapses `B(z,R)` to `z`, identity outside `B(z, R(1+1/ε))`.
    RadialCollapse { z: Vec<f64>, r: f64, eps: f64 },
    /// `x ↦ (1-γ(x)) v ⊕ γ(x) u` with `γ(x) = max((t0-ρ(x,x0))/t0, 0)`.
    Spike { x0: Vec<f64>, v: Vec<f64>, u: Vec<f64>, t0: f64 },
    /// Spike on `B̄(x0,t0)`, `f∘π` elsewhere.
    EnlargeModulus { inner: NonexpMap, tau: NonexpMap, pi: NonexpMap, x0: Vec<f64>, y0: Vec<f64>, t0: f64, s: f64 },
    IsometryPatch(Box<PatchData>),
    /// `outer ∘ inner`.
    Compose { outer: NonexpMap, inner: NonexpMap },
    /// `x ↦ (1-λ_n(x)) θ ⊕ λ_n(x) x_n`, `λ_n(x) = ½ max(1 - ρ(x,x_n)/n, 0)`.
    DivergenceBump { theta: Vec<f64>, xn: Vec<f64>, n: f64 },
}

#[derive(Debug, Clone)]
pub struct NonexpMap {
    pub(crate) model: SpaceModel,
    pub(crate) node: Arc<Node>,
    claimed_lip: f64,
    intermediate: bool,
}

fn fmt_coords(c: &[f64]) -> String {
    let mut s = String::from("(");
    for (i, v) in c.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{v}");
    }
    s.push(')');
    s
}

/// Value of the bump `λ_{z,R,ε}` at distance `rho` from `z`.
pub fn bump_value(rho: f64, r: f64, eps: f64) -> f64 {
    if rho <= r {
        1.0
    } else {
        (1.0 - eps * (rho - r)).max(0.0)
    }
}

pub(crate) fn collapse_apply(model: &SpaceModel, z: &[f64], r: f64, eps: f64, x: &[f64]) -> Vec<f64> {
    let rho = model.d(x, z);
    if rho < r {
        return z.to_vec();
    }
    let lam = bump_value(rho, r, eps / r);
    if lam == 0.0 {
        return x.to_vec();
    }
    model.comb(x, z, (r * lam / rho).min(1.0))
}

impl NonexpMap {
    fn build(model: &SpaceModel, node: Node, claimed_lip: f64, intermediate: bool) -> Self {
        NonexpMap { model: model.clone(), node: Arc::new(node), claimed_lip, intermediate }
    }

    pub(crate) fn from_node(model: &SpaceModel, node: Node, claimed_lip: f64) -> Self {
        let intermediate = claimed_lip > 1.0 + LIP_EPS;
        Self::build(model, node, claimed_lip, intermediate)
    }

    pub fn identity(model: &SpaceModel) -> Self {
        Self::build(model, Node::Identity, 1.0, false)
    }

    pub fn constant(model: &SpaceModel, p: &Point) -> Result<Self> {
        model.validate(p)?;
        Ok(Self::build(model, Node::Constant(p.coords.clone()), 0.0, false))
    }

    /// `x ↦ A x + b` on a Euclidean or l1 model. The claimed bound is the
    /// operator norm induced by the model's norm (spectral norm, or maximum
    /// absolute column sum for l1) and must not exceed one.
    pub fn affine(model: &SpaceModel, matrix: &[Vec<f64>], offset: &[f64]) -> Result<Self> {
        let n = model.dim;
        if !matches!(model.kind, ModelKind::Euclidean | ModelKind::L1) {
            return Err(invalid(format!("affine maps are only supported on Euclidean and l1 models, not {model}")));
        }
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return Err(LabError::DimensionMismatch { expected: n, got: matrix.len() });
        }
        if offset.len() != n {
            return Err(LabError::DimensionMismatch { expected: n, got: offset.len() });
        }
        let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
        if flat.iter().chain(offset).any(|v| !v.is_finite()) {
            return Err(invalid("affine coefficients must be finite"));
        }
        let lip = match model.kind {
            ModelKind::L1 => (0..n).map(|j| (0..n).map(|i| flat[i * n + j].abs()).sum::<f64>()).fold(0.0, f64::max),
            _ => {
                let m = DMatrix::from_row_slice(n, n, &flat);
                m.singular_values().iter().cloned().fold(0.0, f64::max)
            }
        };
        if lip > 1.0 + LIP_EPS {
            return Err(invalid(format!("affine map has operator norm {lip} > 1 and is not nonexpansive")));
        }
        Ok(Self::build(model, Node::Affine { matrix: flat, offset: offset.to_vec() }, lip.min(1.0), false))
    }

    /// `x ↦ a x + b` on a one-dimensional model.
    pub fn affine_1d(model: &SpaceModel, a: f64, b: f64) -> Result<Self> {
        Self::affine(model, &[vec![a]], &[b])
    }

    /// `f_γ(x) = (1-γ) f(x) ⊕ γ f(θ)`, Lipschitz with `(1-γ) Lip f`.
    pub fn contract_toward(f: &NonexpMap, theta: &Point, gamma: f64) -> Result<Self> {
        f.model.validate(theta)?;
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid(format!("gamma {gamma} must lie in (0,1)")));
        }
        let anchor = f.apply(&theta.coords);
        Ok(Self::build(
            &f.model,
            Node::ContractToward { inner: f.clone(), theta: theta.coords.clone(), anchor, gamma },
            (1.0 - gamma) * f.claimed_lip,
            f.intermediate,
        ))
    }

    /// `x ↦ (1-w) f(x) ⊕ w p`, Lipschitz with `(1-w) Lip f`.
    pub fn blend_constant(f: &NonexpMap, p: &Point, w: f64) -> Result<Self> {
        f.model.validate(p)?;
        if !(0.0..1.0).contains(&w) {
            return Err(invalid(format!("blend weight {w} must lie in [0,1)")));
        }
        Ok(Self::build(
            &f.model,
            Node::BlendConstant { inner: f.clone(), target: p.coords.clone(), weight: w },
            (1.0 - w) * f.claimed_lip,
            f.intermediate,
        ))
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: &NonexpMap, inner: &NonexpMap) -> Result<Self> {
        if outer.model != inner.model {
            return Err(LabError::ModelMismatch { map_model: outer.model.name(), other: inner.model.name() });
        }
        let lip = outer.claimed_lip * inner.claimed_lip;
        Ok(Self::build(
            &outer.model,
            Node::Compose { outer: outer.clone(), inner: inner.clone() },
            lip,
            outer.intermediate || inner.intermediate || lip > 1.0 + LIP_EPS,
        ))
    }

    /// Replace the claimed bound by one proven through a local argument.
    /// Used when a composite is nonexpansive although the product of its
    /// factors' global bounds exceeds one.
    pub(crate) fn with_proven_lip(mut self, lip: f64) -> Self {
        self.claimed_lip = lip;
        self.intermediate = lip > 1.0 + LIP_EPS;
        self
    }

    pub fn model(&self) -> &SpaceModel {
        &self.model
    }

    pub fn claimed_lip(&self) -> f64 {
        self.claimed_lip
    }

    /// True for perturbation intermediates whose bound may exceed one.
    pub fn is_intermediate(&self) -> bool {
        self.intermediate
    }

    /// Errors unless the map is a nonexpansive final product.
    pub fn ensure_exportable(&self) -> Result<()> {
        if self.intermediate || self.claimed_lip > 1.0 + LIP_EPS {
            return Err(invalid(format!(
                "map {} has claimed Lipschitz bound {} and is only an intermediate",
                self.describe(),
                self.claimed_lip
            )));
        }
        Ok(())
    }

    /// Evaluate with validation of the argument.
    pub fn eval(&self, x: &Point) -> Result<Point> {
        self.model.validate(x).map_err(|e| match e {
            LabError::DimensionMismatch { .. } => LabError::ModelMismatch {
                map_model: self.model.name(),
                other: format!("point with {} coordinates", x.len()),
            },
            other => other,
        })?;
        Ok(Point::new(self.apply(&x.coords)))
    }

    /// Evaluate on raw coordinates (caller guarantees validity).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = &self.model;
        match self.node.as_ref() {
            Node::Identity => x.to_vec(),
            Node::Constant(p) => p.clone(),
            Node::Affine { matrix, offset } => {
                let n = offset.len();
                (0..n).map(|i| offset[i] + (0..n).map(|j| matrix[i * n + j] * x[j]).sum::<f64>()).collect()
            }
            Node::ContractToward { inner, anchor, gamma, .. } => m.comb(&inner.apply(x), anchor, *gamma),
            Node::BlendConstant { inner, target, weight } => m.comb(&inner.apply(x), target, *weight),
            Node::RadialCollapse { z, r, eps } => collapse_apply(m, z, *r, *eps, x),
            Node::Spike { x0, v, u, t0 } => {
                let g = ((t0 - m.d(x, x0)) / t0).max(0.0);
                m.comb(v, u, g)
            }
            Node::EnlargeModulus { inner, tau, pi, x0, t0, .. } => {
                if m.d(x, x0) <= *t0 {
                    tau.apply(x)
                } else {
                    inner.apply(&pi.apply(x))
                }
            }
            Node::IsometryPatch(p) => patch_apply(m, p, x),
            Node::Compose { outer, inner } => outer.apply(&inner.apply(x)),
            Node::DivergenceBump { theta, xn, n } => {
                let lam = 0.5 * (1.0 - m.d(x, xn) / n).max(0.0);
                m.comb(theta, xn, lam)
            }
        }
    }

    /// Constructor tree as a compact string; doubles as a fingerprint.
    pub fn describe(&self) -> String {
        match self.node.as_ref() {
            Node::Identity => "identity".into(),
            Node::Constant(p) => format!("constant{}", fmt_coords(p)),
            Node::Affine { matrix, offset } => format!("affine(A={}, b={})", fmt_coords(matrix), fmt_coords(offset)),
            Node::ContractToward { inner, theta, gamma, .. } => {
                format!("contract_toward({}, theta={}, gamma={gamma})", inner.describe(), fmt_coords(theta))
            }
            Node::BlendConstant { inner, target, weight } => {
                format!("blend_constant({}, p={}, w={weight})", inner.describe(), fmt_coords(target))
            }
            Node::RadialCollapse { z, r, eps } => format!("radial_collapse(z={}, R={r}, eps={eps})", fmt_coords(z)),
            Node::Spike { x0, v, u, t0 } => {
                format!("spike(x0={}, v={}, u={}, t0={t0})", fmt_coords(x0), fmt_coords(v), fmt_coords(u))
            }
            Node::EnlargeModulus { inner, x0, y0, t0, s, .. } => format!(
                "enlarge_modulus({}, x0={}, y0={}, t0={t0}, S={s})",
                inner.describe(),
                fmt_coords(x0),
                fmt_coords(y0)
            ),
            Node::IsometryPatch(p) => format!(
                "isometry_patch({}, net={}, a={}, eps={}, theta={})",
                p.f.describe(),
                p.net.iter().map(|z| fmt_coords(z)).collect::<Vec<_>>().join(" "),
                p.a,
                p.eps,
                fmt_coords(&p.theta)
            ),
            Node::Compose { outer, inner } => format!("compose({}, {})", outer.describe(), inner.describe()),
            Node::DivergenceBump { theta, xn, n } => {
                format!("divergence_bump(theta={}, x_n={}, n={n})", fmt_coords(theta), fmt_coords(xn))
            }
        }
    }

    /// Points where the map changes behaviour; estimators sample around them.
    pub fn hotspots(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        self.collect_hotspots(&mut out);
        out
    }

    fn collect_hotspots(&self, out: &mut Vec<Vec<f64>>) {
        match self.node.as_ref() {
            Node::Identity | Node::Constant(_) | Node::Affine { .. } => {}
            Node::ContractToward { inner, theta, .. } => {
                out.push(theta.clone());
                inner.collect_hotspots(out);
            }
            Node::BlendConstant { inner, .. } => inner.collect_hotspots(out),
            Node::RadialCollapse { z, .. } => out.push(z.clone()),
            Node::Spike { x0, .. } => out.push(x0.clone()),
            Node::EnlargeModulus { inner, x0, y0, .. } => {
                out.push(x0.clone());
                out.push(y0.clone());
                inner.collect_hotspots(out);
            }
            Node::IsometryPatch(p) => {
                out.extend(p.net.iter().cloned());
                p.f.collect_hotspots(out);
            }
            Node::Compose { outer, inner } => {
                inner.collect_hotspots(out);
                outer.collect_hotspots(out);
            }
            Node::DivergenceBump { theta, xn, .. } => {
                out.push(xn.clone());
                out.push(theta.clone());
            }
        }
    }

    /// Index of the top-level piece of a piecewise definition containing `x`.
    pub fn piece_of(&self, x: &[f64]) -> u32 {
        let m = &self.model;
        match self.node.as_ref() {
            Node::RadialCollapse { z, r, eps } => {
                let rho = m.d(x, z);
                if rho < *r {
                    0
                } else if rho < r * (1.0 + 1.0 / eps) {
                    1
                } else {
                    2
                }
            }
            Node::Spike { x0, t0, .. } => u32::from(m.d(x, x0) >= *t0),
            Node::EnlargeModulus { x0, t0, .. } => u32::from(m.d(x, x0) > *t0),
            Node::DivergenceBump { xn, n, .. } => u32::from(m.d(x, xn) >= *n),
            Node::IsometryPatch(p) => {
                for (i, z) in p.net.iter().enumerate() {
                    let rho = m.d(x, z);
                    if rho < p.big_r {
                        let base = 1 + 3 * i as u32;
                        return if rho < p.r / 2.0 {
                            base
                        } else if rho < p.r {
                            base + 1
                        } else {
                            base + 2
                        };
                    }
                }
                0
            }
            _ => 0,
        }
    }

    /// Upper bound for the Lipschitz constant of the restriction to
    /// `B(center, radius)`, derived from the constructor tree.
    pub fn local_lip_bound(&self, center: &[f64], radius: f64) -> f64 {
        let m = &self.model;
        let away = |p: &[f64], reach: f64| m.d(center, p) >= radius + reach;
        let b = match self.node.as_ref() {
            Node::Identity => 1.0,
            Node::Constant(_) => 0.0,
            Node::Affine { .. } => self.claimed_lip,
            Node::ContractToward { inner, gamma, .. } => (1.0 - gamma) * inner.local_lip_bound(center, radius),
            Node::BlendConstant { inner, weight, .. } => (1.0 - weight) * inner.local_lip_bound(center, radius),
            Node::RadialCollapse { z, r, eps } => {
                if away(z, r * (1.0 + 1.0 / eps)) {
                    1.0
                } else {
                    1.0 + eps
                }
            }
            Node::Spike { x0, t0, .. } => {
                if away(x0, *t0) {
                    0.0
                } else {
                    1.0
                }
            }
            Node::EnlargeModulus { inner, x0, s, .. } => {
                if away(x0, *s) {
                    inner.local_lip_bound(center, radius)
                } else {
                    self.claimed_lip
                }
            }
            Node::IsometryPatch(p) => {
                if p.net.iter().all(|z| away(z, p.big_r)) {
                    (1.0 - p.eps / 4.0) * p.f.local_lip_bound(center, radius)
                } else {
                    self.claimed_lip
                }
            }
            Node::Compose { outer, inner } => {
                let li = inner.local_lip_bound(center, radius);
                let c = inner.apply(center);
                li * outer.local_lip_bound(&c, li * radius)
            }
            Node::DivergenceBump { xn, n, .. } => {
                if away(xn, *n) {
                    0.0
                } else {
                    1.0
                }
            }
        };
        b.min(self.claimed_lip)
    }

    /// Children of the constructor tree (for audits).
    pub fn children(&self) -> Vec<NonexpMap> {
        match self.node.as_ref() {
            Node::ContractToward { inner, .. } | Node::BlendConstant { inner, .. } => vec![inner.clone()],
            Node::EnlargeModulus { inner, tau, pi, .. } => vec![inner.clone(), tau.clone(), pi.clone()],
            Node::IsometryPatch(p) => vec![p.f.clone()],
            Node::Compose { outer, inner } => vec![outer.clone(), inner.clone()],
            _ => vec![],
        }
    }
}

fn patch_apply(m: &SpaceModel, p: &PatchData, x: &[f64]) -> Vec<f64> {
    for (i, z) in p.net.iter().enumerate() {
        let rho = m.d(x, z);
        if rho < p.r {
            let w = if rho < p.r / 2.0 { 3.0 * rho / p.a } else { 3.0 * (p.r - rho) / p.a };
            return m.comb(&p.g1_at[i], &p.p_at[i], w);
        }
        if rho < p.big_r {
            let g0 = p.f.apply(&collapse_apply(m, z, p.r, p.delta, x));
            return m.comb(&g0, &p.g0_theta, p.eps / 4.0);
        }
    }
    m.comb(&p.f.apply(x), &p.g0_theta, p.eps / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> SpaceModel {
        SpaceModel::euclidean(1).unwrap()
    }

    #[test]
    fn identity_constant_affine() {
        let m = line();
        let x = Point::scalar(4.0);
        assert_eq!(NonexpMap::identity(&m).eval(&x).unwrap(), x);
        let c = NonexpMap::constant(&m, &Point::scalar(2.5)).unwrap();
        assert_eq!(c.eval(&x).unwrap(), Point::scalar(2.5));
        let f = NonexpMap::affine_1d(&m, 1.0, 1.0).unwrap();
        assert_eq!(f.eval(&x).unwrap(), Point::scalar(5.0));
    }

    #[test]
    fn eval_rejects_foreign_points() {
        let f = NonexpMap::identity(&line());
        assert!(matches!(f.eval(&Point::new(vec![0.0, 1.0])), Err(LabError::ModelMismatch { .. })));
    }

    #[test]
    fn expanding_affine_is_refused() {
        assert!(NonexpMap::affine_1d(&line(), 1.5, 0.0).is_err());
        let m = SpaceModel::euclidean(2).unwrap();
        assert!(NonexpMap::affine(&m, &[vec![0.8, 0.6], vec![0.6, 0.8]], &[0.0, 0.0]).is_err());
        let rot = NonexpMap::affine(&m, &[vec![0.0, -1.0], vec![1.0, 0.0]], &[0.0, 0.0]).unwrap();
        assert!((rot.claimed_lip() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l1_affine_uses_column_sums() {
        let m = SpaceModel::l1(2).unwrap();
        let f = NonexpMap::affine(&m, &[vec![0.5, 0.25], vec![0.25, 0.25]], &[0.0, 0.0]).unwrap();
        assert!((f.claimed_lip() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn contract_toward_examples() {
        let m = line();
        let id = NonexpMap::identity(&m);
        let f = NonexpMap::contract_toward(&id, &Point::scalar(0.0), 0.25).unwrap();
        assert_eq!(f.eval(&Point::scalar(8.0)).unwrap(), Point::scalar(6.0));
        assert_eq!(f.claimed_lip(), 0.75);

        let g = NonexpMap::affine_1d(&m, 1.0, 1.0).unwrap();
        let g = NonexpMap::contract_toward(&g, &Point::scalar(0.0), 1.0 / 12.0).unwrap();
        let v = g.eval(&Point::scalar(24.0)).unwrap().coords[0];
        assert!((v - 23.0).abs() < 1e-12);
        assert_eq!(g.eval(&Point::scalar(0.0)).unwrap(), Point::scalar(1.0));
        assert!(NonexpMap::contract_toward(&g, &Point::scalar(0.0), 1.0).is_err());
    }

    #[test]
    fn compose_multiplies_bounds_and_flags_intermediates() {
        let m = line();
        let half = NonexpMap::affine_1d(&m, 0.5, 0.0).unwrap();
        let c = NonexpMap::from_node(&m, Node::RadialCollapse { z: vec![0.0], r: 1.0, eps: 1.0 }, 2.0);
        assert!(c.is_intermediate());
        let h = NonexpMap::compose(&half, &c).unwrap();
        assert_eq!(h.claimed_lip(), 1.0);
        assert!(h.is_intermediate());
        assert!(h.ensure_exportable().is_err());
        assert!(half.ensure_exportable().is_ok());
    }

    #[test]
    fn local_bound_sees_support() {
        let m = line();
        let c = NonexpMap::from_node(&m, Node::RadialCollapse { z: vec![0.0], r: 1.0, eps: 1.0 }, 2.0);
        assert_eq!(c.local_lip_bound(&[10.0], 1.0), 1.0);
        assert_eq!(c.local_lip_bound(&[2.0], 1.0), 2.0);
    }

    #[test]
    fn describe_is_stable() {
        let m = line();
        let f = NonexpMap::contract_toward(&NonexpMap::identity(&m), &Point::scalar(0.0), 0.5).unwrap();
        assert_eq!(f.describe(), "contract_toward(identity, theta=(0), gamma=0.5)");
    }
}
