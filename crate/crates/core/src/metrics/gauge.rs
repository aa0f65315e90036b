//! Admissible gauges `φ` with explicit inverses and the conditions (C1)–(C5).
//!
//! Inverses are also available as `log2 φ⁻¹`, since `φ⁻¹(1/n)` underflows
//! quickly for the logarithmic gauge.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::sampling::{log2_add, Uniforms, SampleMode};
use crate::tolerances::{GAUGE_EQUALITY_TOL, GAUGE_ROUNDTRIP_TOL};

/// Terms summed exactly before a certified tail bound takes over.
const PARTIAL_TERMS_LOG: usize = 200;
const PARTIAL_TERMS_POWER: usize = 10_000;

/// Tail majorant `φ⁻¹(1/n) ≤ c·n^-p` for every `n ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailMajorant {
    pub c: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaugeKind {
    /// `φ(t) = -1/log2 t` on `(0,1)`.
    Log,
    /// `φ(t) = t^(1/4)` on `(0,1]`.
    Power,
    /// `ψ_s(t) = t^(1/s)` on `(0,1]`.
    PorosityPower { s: f64 },
    /// Knots `(t, φ(t))`, interpolated linearly in log-log coordinates and
    /// continued below the first knot by the first segment's power law.
    Custom {
        knots: Vec<(f64, f64)>,
        #[serde(default)]
        majorant: Option<TailMajorant>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionFlags {
    pub c1: bool,
    pub c2: bool,
    pub c3: bool,
    pub c4: bool,
    pub c5: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gauge {
    pub kind: GaugeKind,
    pub eta: f64,
    /// `max(1, Σ n φ⁻¹(1/n))`, infinite when (C4) fails.
    pub c_phi: f64,
    pub flags: ConditionFlags,
    /// Log-log slopes of a custom table; the first one drives the tail.
    #[serde(skip)]
    slopes: Vec<f64>,
}

impl Gauge {
    pub fn log() -> Self {
        let mut g = Gauge {
            kind: GaugeKind::Log,
            eta: (-2.0f64).exp(),
            c_phi: 0.0,
            flags: ConditionFlags { c1: true, c2: true, c3: true, c4: true, c5: true },
            slopes: vec![],
        };
        let (partial, tail) = g.weighted_sum(PARTIAL_TERMS_LOG);
        g.c_phi = (partial + tail).max(1.0);
        g
    }

    pub fn power() -> Self {
        let mut g = Gauge {
            kind: GaugeKind::Power,
            eta: 1.0,
            c_phi: 0.0,
            flags: ConditionFlags { c1: true, c2: true, c3: true, c4: true, c5: false },
            slopes: vec![],
        };
        let (partial, tail) = g.weighted_sum(PARTIAL_TERMS_POWER);
        g.c_phi = (partial + tail).max(1.0);
        g.flags.c5 = g.check_c5(200, 0).passed;
        g
    }

    /// `ψ_s(t) = t^(1/s)`; (C4) holds for `s > 2`.
    pub fn porosity_power(s: f64) -> Result<Self> {
        if !(s >= 1.0) || !s.is_finite() {
            return Err(invalid(format!("exponent s = {s} must be at least 1")));
        }
        let mut g = Gauge {
            kind: GaugeKind::PorosityPower { s },
            eta: 1.0,
            c_phi: f64::INFINITY,
            flags: ConditionFlags { c1: true, c2: true, c3: true, c4: s > 2.0, c5: false },
            slopes: vec![],
        };
        if g.flags.c4 {
            let (partial, tail) = g.weighted_sum(PARTIAL_TERMS_POWER);
            g.c_phi = (partial + tail).max(1.0);
        }
        g.flags.c5 = g.check_c5(200, 0).passed;
        Ok(g)
    }

    pub fn custom(knots: Vec<(f64, f64)>, majorant: Option<TailMajorant>) -> Result<Self> {
        if knots.is_empty() {
            return Err(invalid("a custom gauge needs at least one knot"));
        }
        for (i, &(t, v)) in knots.iter().enumerate() {
            if !(t > 0.0 && v > 0.0 && t.is_finite() && v.is_finite()) {
                return Err(invalid(format!("knot ({t}, {v}) must have positive finite coordinates")));
            }
            if i > 0 && !(t > knots[i - 1].0 && v > knots[i - 1].1) {
                return Err(invalid("custom gauge knots must be strictly increasing in both coordinates"));
            }
        }
        if knots.last().unwrap().0 > 1.0 {
            return Err(invalid("custom gauge knots must lie in (0,1]"));
        }
        if let Some(m) = majorant {
            if !(m.c > 0.0 && m.p > 0.0 && m.c.is_finite() && m.p.is_finite()) {
                return Err(invalid("tail majorant needs positive finite c and p"));
            }
        }
        let mut slopes: Vec<f64> = knots
            .windows(2)
            .map(|w| (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln())
            .collect();
        if slopes.is_empty() {
            slopes.push(1.0);
        }
        let mut g = Gauge {
            kind: GaugeKind::Custom { knots: knots.clone(), majorant },
            eta: knots[0].0,
            c_phi: f64::INFINITY,
            flags: ConditionFlags { c1: false, c2: false, c3: true, c4: false, c5: false },
            slopes,
        };
        // The interpolant is concave when the log-log slopes are at most one
        // and nonincreasing; η is then the largest knot with φ(η) ≥ η.
        let eta = knots.iter().rev().find(|k| k.1 >= k.0).map(|k| k.0);
        g.flags.c1 = eta.is_some() && g.slopes_nonincreasing();
        g.eta = eta.unwrap_or(knots[0].0);
        g.flags.c2 = knots.iter().any(|k| (k.1 - 1.0).abs() <= 1e-12) || knots.last().unwrap().1 >= 1.0;
        let c4 = g.check_c4();
        g.flags.c4 = c4.passed;
        if c4.passed {
            g.c_phi = c4.value.max(1.0);
        }
        g.flags.c5 = g.check_c5(200, 0).passed;
        Ok(g)
    }

    fn slopes_nonincreasing(&self) -> bool {
        self.slopes.iter().all(|a| *a <= 1.0) && self.slopes.windows(2).all(|w| w[1] <= w[0] + 1e-15)
    }

    pub fn name(&self) -> String {
        match &self.kind {
            GaugeKind::Log => "log".into(),
            GaugeKind::Power => "power(1/4)".into(),
            GaugeKind::PorosityPower { s } => format!("psi_s(s={s})"),
            GaugeKind::Custom { knots, .. } => format!("custom({} knots)", knots.len()),
        }
    }

    /// Supremum of the domain of `φ` (`1` is excluded for the log gauge).
    pub fn domain_end(&self) -> f64 {
        match &self.kind {
            GaugeKind::Custom { knots, .. } => knots.last().unwrap().0,
            _ => 1.0,
        }
    }

    pub fn domain_closed(&self) -> bool {
        !matches!(self.kind, GaugeKind::Log)
    }

    fn in_domain(&self, t: f64) -> bool {
        t > 0.0 && (t < self.domain_end() || (self.domain_closed() && t == self.domain_end()))
    }

    /// `φ(t)`; `NaN` outside the domain.
    pub fn phi(&self, t: f64) -> f64 {
        if !self.in_domain(t) {
            return f64::NAN;
        }
        match &self.kind {
            GaugeKind::Log => -1.0 / t.log2(),
            GaugeKind::Power => t.powf(0.25),
            GaugeKind::PorosityPower { s } => t.powf(1.0 / s),
            GaugeKind::Custom { knots, .. } => {
                let i = knots.iter().rposition(|k| k.0 <= t).unwrap_or(0);
                let a = if t < knots[0].0 { self.slopes[0] } else { self.slopes[i.min(self.slopes.len() - 1)] };
                let (ti, vi) = knots[i];
                vi * (t / ti).powf(a)
            }
        }
    }

    /// Supremum of the range of `φ` (domain of `φ⁻¹`).
    pub fn range_end(&self) -> f64 {
        match &self.kind {
            GaugeKind::Log => f64::INFINITY,
            GaugeKind::Custom { knots, .. } => knots.last().unwrap().1,
            _ => 1.0,
        }
    }

    /// `log2 φ⁻¹(u)`; `NaN` outside the range of `φ`.
    pub fn log2_phi_inv(&self, u: f64) -> f64 {
        if !(u > 0.0) || u > self.range_end() {
            return f64::NAN;
        }
        match &self.kind {
            GaugeKind::Log => -1.0 / u,
            GaugeKind::Power => 4.0 * u.log2(),
            GaugeKind::PorosityPower { s } => s * u.log2(),
            GaugeKind::Custom { knots, .. } => {
                let i = knots.iter().rposition(|k| k.1 <= u).unwrap_or(0);
                let a = if u < knots[0].1 { self.slopes[0] } else { self.slopes[i.min(self.slopes.len() - 1)] };
                let (ti, vi) = knots[i];
                ti.log2() + (u / vi).log2() / a
            }
        }
    }

    /// `φ⁻¹(u)`.
    pub fn phi_inv(&self, u: f64) -> f64 {
        match &self.kind {
            GaugeKind::Power => u.powi(4),
            GaugeKind::PorosityPower { s } if u > 0.0 && u <= 1.0 => u.powf(*s),
            _ => self.log2_phi_inv(u).exp2(),
        }
    }

    /// `C_k` with `φ⁻¹(1/m) ≤ C_k φ⁻¹(1/(k+m))` for all `m`.
    pub fn c_k(&self, k: u32) -> f64 {
        let kf = k as f64;
        match &self.kind {
            GaugeKind::Log => kf.exp2(),
            GaugeKind::Power => (1.0 + kf).powi(4),
            GaugeKind::PorosityPower { s } => (1.0 + kf).powf(*s),
            GaugeKind::Custom { knots, .. } => {
                // Power-law tail below the first knot gives (1+k)^(1/a0);
                // the tabulated part is scanned directly.
                let q = 1.0 / self.slopes[0];
                let mut best = (1.0 + kf).powf(q).log2();
                let m_end = ((1.0 / knots[0].1).ceil() as usize + 1).clamp(1000, 1_000_000);
                for m in 1..=m_end {
                    let a = self.log2_phi_inv(1.0 / m as f64);
                    let b = self.log2_phi_inv(1.0 / (m as f64 + kf));
                    if a.is_finite() && b.is_finite() {
                        best = best.max(a - b);
                    }
                }
                best.exp2()
            }
        }
    }

    /// `(Σ_{n≤N} n φ⁻¹(1/n), bound on Σ_{n>N} n φ⁻¹(1/n))`.
    fn weighted_sum(&self, n_terms: usize) -> (f64, f64) {
        let partial: f64 = (1..=n_terms).map(|n| n as f64 * self.phi_inv(1.0 / n as f64)).sum();
        let nf = n_terms as f64;
        let tail = match &self.kind {
            // Σ_{n>N} n 2^-n = (N+2) 2^-N.
            GaugeKind::Log => (nf + 2.0) * (-nf).exp2(),
            // Σ_{n>N} n^-3 ≤ ∫_N^∞ t^-3 dt.
            GaugeKind::Power => 1.0 / (2.0 * nf * nf),
            GaugeKind::PorosityPower { s } => nf.powf(2.0 - s) / (s - 2.0),
            GaugeKind::Custom { majorant, .. } => match majorant {
                Some(m) if m.p > 2.0 => m.c * nf.powf(2.0 - m.p) / (m.p - 2.0),
                _ => f64::INFINITY,
            },
        };
        (partial, tail)
    }

    /// Certified bound on `Σ_{n>N} φ⁻¹(1/n)`.
    pub fn tail(&self, n: usize) -> Result<f64> {
        Ok(self.log2_tail(n)?.exp2())
    }

    /// `log2` of [`Gauge::tail`].
    pub fn log2_tail(&self, n: usize) -> Result<f64> {
        self.require_summable()?;
        let nf = n.max(1) as f64;
        Ok(match &self.kind {
            GaugeKind::Log => -nf,
            // Σ_{n>N} n^-4 ≤ ∫_N^∞ t^-4 dt = 1/(3N³).
            GaugeKind::Power => -(3.0 * nf * nf * nf).log2(),
            GaugeKind::PorosityPower { s } => (1.0 - s) * nf.log2() - (s - 1.0).log2(),
            GaugeKind::Custom { majorant, .. } => {
                let m = majorant.expect("summable custom gauges carry a majorant");
                m.c.log2() + (1.0 - m.p) * nf.log2() - (m.p - 1.0).log2()
            }
        })
    }

    /// `log2 Σ_{n≥start} φ⁻¹(1/n)`, exact up to `start + 10⁴` plus the tail.
    pub fn log2_sum_from(&self, start: usize) -> Result<f64> {
        self.require_summable()?;
        let start = start.max(1);
        let end = start + 10_000;
        let mut acc = f64::NEG_INFINITY;
        for n in start..=end {
            acc = log2_add(acc, self.log2_phi_inv(1.0 / n as f64));
        }
        Ok(log2_add(acc, self.log2_tail(end)?))
    }

    /// Errors unless (C4) holds, i.e. the series metric is defined.
    pub fn require_summable(&self) -> Result<()> {
        if self.flags.c4 {
            Ok(())
        } else {
            Err(LabError::Refused(format!(
                "gauge {} fails summability of n φ⁻¹(1/n); no certified tail bound exists",
                self.name()
            )))
        }
    }

    fn check_c4(&self) -> ConditionCheck {
        let n0 = PARTIAL_TERMS_POWER;
        let partial: f64 = (1..=n0).map(|n| n as f64 * self.phi_inv(1.0 / n as f64)).sum();
        let last = n0 as f64 * self.phi_inv(1.0 / n0 as f64);
        let fail = |detail: String| ConditionCheck {
            name: "C4",
            passed: false,
            residual: last,
            value: f64::INFINITY,
            detail,
            witness: vec![n0 as f64, partial, last],
        };
        match &self.kind {
            GaugeKind::Custom { majorant: Some(m), knots } => {
                if m.p <= 2.0 {
                    return fail(format!("majorant exponent {} does not exceed 2; partial sum {partial}", m.p));
                }
                // Majorant must dominate on the scanned range, and the power-law
                // tail must decay at least as fast.
                for n in 1..=n0 {
                    let lhs = self.log2_phi_inv(1.0 / n as f64);
                    let rhs = m.c.log2() - m.p * (n as f64).log2();
                    if lhs > rhs + 1e-12 {
                        return fail(format!("majorant violated at n = {n}"));
                    }
                }
                let q = 1.0 / self.slopes[0];
                if (n0 as f64) < 1.0 / knots[0].1 || q < m.p {
                    return fail(format!("tail exponent {q} decays slower than the majorant exponent {}", m.p));
                }
                let (partial, tail) = self.weighted_sum(n0);
                ConditionCheck {
                    name: "C4",
                    passed: true,
                    residual: 0.0,
                    value: partial + tail,
                    detail: format!("partial sum {partial} plus majorant tail {tail}"),
                    witness: vec![],
                }
            }
            GaugeKind::Custom { majorant: None, .. } => {
                fail(format!("no summable tail majorant supplied; partial sum to {n0} is {partial}, last term {last}"))
            }
            GaugeKind::PorosityPower { s } if *s <= 2.0 => {
                fail(format!("Σ n·n^-s diverges for s = {s}; partial sum to {n0} is {partial}"))
            }
            _ => {
                let (partial, tail) = self.weighted_sum(if self.kind == GaugeKind::Log { PARTIAL_TERMS_LOG } else { n0 });
                ConditionCheck {
                    name: "C4",
                    passed: true,
                    residual: 0.0,
                    value: partial + tail,
                    detail: format!("partial sum {partial} plus certified tail {tail}"),
                    witness: vec![],
                }
            }
        }
    }

    /// (C5) `φ⁻¹(t/(a+b)) ≤ φ⁻¹(t/a) φ⁻¹(t/b)` on sampled `a,b ≥ 1`, `t ∈ (0,1)`.
    fn check_c5(&self, grid: usize, seed: u64) -> ConditionCheck {
        let mut u = Uniforms::new(SampleMode::Random, seed, 5);
        let mut worst = f64::NEG_INFINITY;
        let mut witness = vec![];
        let mut max_abs = 0.0f64;
        for i in 0..grid.max(10) * 10 {
            let (a, b, t) = if i == 0 {
                (1.0, 1.0, 0.25)
            } else {
                (10f64.powf(2.0 * u.uniform()), 10f64.powf(2.0 * u.uniform()), u.uniform().max(1e-3))
            };
            let lhs = self.phi_inv(t / (a + b));
            let rhs = self.phi_inv(t / a) * self.phi_inv(t / b);
            if !(lhs.is_finite() && rhs.is_finite()) {
                continue;
            }
            let r = lhs - rhs;
            max_abs = max_abs.max(r.abs());
            if r > worst {
                worst = r;
                witness = vec![t, a, b];
            }
        }
        ConditionCheck {
            name: "C5",
            passed: worst <= GAUGE_EQUALITY_TOL,
            residual: worst,
            value: max_abs,
            detail: format!("largest excess {worst}, largest |lhs - rhs| {max_abs}"),
            witness: if worst > GAUGE_EQUALITY_TOL { witness } else { vec![] },
        }
    }
}

/// Outcome of one condition; failures carry a witness argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Worst excess over the allowed side (≤ 0 or tiny when passing).
    pub residual: f64,
    /// Condition-specific value (`C_φ` for C4, largest absolute residual for C5).
    pub value: f64,
    pub detail: String,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub gauge: String,
    pub checks: Vec<ConditionCheck>,
    pub roundtrip_error: f64,
    pub strictly_increasing: bool,
    pub c_phi: f64,
    /// `C_k` for `k = 1..=16`.
    pub c_k: Vec<f64>,
}

impl ConditionReport {
    pub fn check(&self, name: &str) -> &ConditionCheck {
        self.checks.iter().find(|c| c.name == name).expect("known condition name")
    }

    pub fn all_pass(&self, names: &[&str]) -> bool {
        names.iter().all(|n| self.check(n).passed)
    }
}

/// Checks the gauge conditions on sampled arguments.
pub fn check_gauge_conditions(g: &Gauge, grid: usize) -> Result<ConditionReport> {
    if grid < 10 {
        return Err(invalid("gauge condition grid must have at least 10 points"));
    }
    let end = g.domain_end();
    let ts: Vec<f64> = (1..=grid)
        .map(|i| {
            let x = i as f64 / (grid + 1) as f64;
            // Geometric spacing covers several decades below the domain end.
            end * (-(40.0 * (1.0 - x))).exp2()
        })
        .collect();

    let mut roundtrip = 0.0f64;
    let mut increasing = true;
    let mut prev = f64::NEG_INFINITY;
    for &t in &ts {
        let v = g.phi(t);
        let back = g.phi_inv(v);
        roundtrip = roundtrip.max((g.phi(back) - v).abs());
        if !(v > prev) {
            increasing = false;
        }
        prev = v;
    }
    // φ(φ⁻¹(u)) = u on a grid of the range.
    for i in 1..=grid {
        let u = (i as f64 / grid as f64) * g.range_end().min(1.0);
        let back = g.phi_inv(u);
        if g.in_domain(back) {
            roundtrip = roundtrip.max((g.phi(back) - u).abs());
        }
    }

    let mut checks = Vec::new();

    // (C1): concavity on (0, η) by second differences, and φ(η) ≥ η.
    let mut worst = f64::NEG_INFINITY;
    let mut wit = vec![];
    for i in 1..=grid {
        let t = g.eta * (-(30.0 * (1.0 - i as f64 / (grid + 1) as f64))).exp2();
        let h = 0.25 * t;
        if t + h >= g.eta {
            continue;
        }
        let (a, b, c) = (g.phi(t - h), g.phi(t), g.phi(t + h));
        let second = a + c - 2.0 * b;
        let scale = 1e-12 * (a.abs() + b.abs() + c.abs());
        if second - scale > worst {
            worst = second - scale;
            wit = vec![t, h];
        }
    }
    let eta_ok = g.phi(g.eta) >= g.eta;
    let c1 = worst <= 0.0 && eta_ok && g.flags.c1;
    checks.push(ConditionCheck {
        name: "C1",
        passed: c1,
        residual: worst,
        value: g.eta,
        detail: format!("eta = {}, phi(eta) = {}, largest second difference excess {worst}", g.eta, g.phi(g.eta)),
        witness: if c1 { vec![] } else { wit },
    });

    // (C2): φ → 0 at 0 and φ(t) = 1 for some t.
    let tiny = g.phi(f64::MIN_POSITIVE);
    let t1 = g.phi_inv(1.0);
    let hits_one = g.in_domain(t1) && (g.phi(t1) - 1.0).abs() <= GAUGE_ROUNDTRIP_TOL;
    let decays = ts.windows(2).all(|w| g.phi(w[0]) < g.phi(w[1])) && tiny < 1e-2;
    checks.push(ConditionCheck {
        name: "C2",
        passed: hits_one && decays,
        residual: tiny,
        value: t1,
        detail: format!("phi(min positive) = {tiny}, phi^-1(1) = {t1}"),
        witness: if hits_one { vec![] } else { vec![t1] },
    });

    // (C3): φ⁻¹(1/m) ≤ C_k φ⁻¹(1/(k+m)) for k ≤ 16, m ≤ 1000, in log2 form.
    let c_k: Vec<f64> = (1..=16).map(|k| g.c_k(k)).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut wit = vec![];
    for k in 1..=16u32 {
        let lck = c_k[k as usize - 1].log2();
        for m in 1..=1000u32 {
            let lhs = g.log2_phi_inv(1.0 / m as f64);
            let rhs = lck + g.log2_phi_inv(1.0 / (k + m) as f64);
            if !(lhs.is_finite() && rhs.is_finite()) {
                continue;
            }
            let r = lhs - rhs;
            if r > worst {
                worst = r;
                wit = vec![k as f64, m as f64];
            }
        }
    }
    let c3 = worst <= 1e-12 * (1.0 + worst.abs());
    checks.push(ConditionCheck {
        name: "C3",
        passed: c3,
        residual: worst,
        value: c_k[0],
        detail: format!("largest log2 excess {worst} over k <= 16, m <= 1000"),
        witness: if c3 { vec![] } else { wit },
    });

    checks.push(g.check_c4());
    checks.push(g.check_c5(grid, 0));

    Ok(ConditionReport {
        gauge: g.name(),
        checks,
        roundtrip_error: roundtrip,
        strictly_increasing: increasing,
        c_phi: g.c_phi,
        c_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_gauge_values() {
        let g = Gauge::log();
        assert_eq!(g.phi(0.5), 1.0);
        assert_eq!(g.phi_inv(1.0 / 3.0), 0.125);
        assert!((g.c_phi - 2.0).abs() <= 1e-12);
        assert_eq!(g.c_k(3), 8.0);
        assert!((g.phi(g.eta) - std::f64::consts::LN_2 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn log_gauge_passes_everything() {
        let r = check_gauge_conditions(&Gauge::log(), 100).unwrap();
        assert!(r.all_pass(&["C1", "C2", "C3", "C4", "C5"]), "{r:#?}");
        assert!(r.check("C5").value <= 1e-12);
        assert!(r.roundtrip_error <= 1e-10);
        assert!(r.strictly_increasing);
    }

    #[test]
    fn power_gauge() {
        let g = Gauge::power();
        assert_eq!(g.phi(1.0), 1.0);
        assert_eq!(g.phi_inv(0.5), 1.0 / 16.0);
        let r = check_gauge_conditions(&g, 100).unwrap();
        assert!(r.all_pass(&["C1", "C2", "C3", "C4"]), "{r:#?}");
        assert!(!r.check("C5").passed);
        assert!(!r.check("C5").witness.is_empty());
    }

    #[test]
    fn identity_custom_gauge_is_not_summable() {
        let g = Gauge::custom(vec![(1.0, 1.0)], None).unwrap();
        assert!((g.phi(0.3) - 0.3).abs() < 1e-15);
        let r = check_gauge_conditions(&g, 20).unwrap();
        let c4 = r.check("C4");
        assert!(!c4.passed);
        assert_eq!(c4.witness.len(), 3);
        assert!(g.tail(10).is_err());
    }

    #[test]
    fn custom_power_law_with_majorant() {
        // φ(t) = t^(1/4) sampled at two knots, with an honest majorant.
        let g = Gauge::custom(vec![(1.0 / 16.0, 0.5), (1.0, 1.0)], Some(TailMajorant { c: 1.0, p: 4.0 })).unwrap();
        assert!((g.phi_inv(0.25) - 0.25f64.powi(4)).abs() < 1e-15);
        assert!(g.flags.c4);
        assert!((g.c_phi - Gauge::power().c_phi).abs() < 1e-6);
        let bad = Gauge::custom(vec![(1.0 / 16.0, 0.5), (1.0, 1.0)], Some(TailMajorant { c: 1.0, p: 5.0 })).unwrap();
        assert!(!bad.flags.c4);
    }

    #[test]
    fn psi_s_gauges() {
        let g = Gauge::porosity_power(2.0).unwrap();
        assert!(!g.flags.c4);
        let g = Gauge::porosity_power(3.0).unwrap();
        assert!(g.flags.c4);
        assert!((g.tail(10).unwrap() - 10f64.powi(-2) / 2.0).abs() < 1e-15);
        assert!(Gauge::porosity_power(0.5).is_err());
    }

    #[test]
    fn log_domain_sums() {
        let g = Gauge::log();
        let l = g.log2_sum_from(1100).unwrap();
        assert!((l - (-1099.0)).abs() < 1e-9);
    }
}
