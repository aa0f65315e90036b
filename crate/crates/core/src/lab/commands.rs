//! The five batch commands. Each returns a [`Report`]; any `Err` is a
//! configuration problem (exit code 2), failing rows mean exit code 1.

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, MetricSpec, ModelSpec, WitnessKind, WitnessSection};
use super::report::{Report, Row};
use crate::error::{LabError, Result};
use crate::fixpoint::{ball_invariance_check, iterate, max_orbit_distance, rakotch_convergence_audit};
use crate::geodesic::axioms::{default_scale, verify_hyperbolicity_with};
use crate::geodesic::ball::ball_sampler;
use crate::geodesic::{ModelKind, Point};
use crate::mapping::{local_lipschitz, rakotch_gauges, NonexpMap};
use crate::metrics::lemmas::d_theta1_divergence_demo;
use crate::perturbation::{
    ball_invariance_witness, greedy_separated_net, isometry_patch, modcont_witness, rakotch_witness, shrink_witness,
    verify_witness, PorosityWitness, Predicate,
};
use crate::sampling::mix;
use crate::tolerances::{LIP_SLACK, STRICT_SLACK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyAxioms,
    Metric,
    Witness,
    Fixpoint,
    LipschitzProfile,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyAxioms => "verify-axioms",
            Command::Metric => "metric",
            Command::Witness => "witness",
            Command::Fixpoint => "fixpoint",
            Command::LipschitzProfile => "lipschitz-profile",
        }
    }
}

/// Library failures inside a command come from the configured parameters.
fn as_config(e: LabError) -> LabError {
    match e {
        LabError::Config(_) => e,
        other => LabError::Config(other.to_string()),
    }
}

pub fn run_command(cmd: Command, cfg: &ExperimentConfig) -> Result<Report> {
    let rows = match cmd {
        Command::VerifyAxioms => cmd_verify_axioms(cfg),
        Command::Metric => cmd_metric(cfg),
        Command::Witness => cmd_witness(cfg),
        Command::Fixpoint => cmd_fixpoint(cfg),
        Command::LipschitzProfile => cmd_lipschitz_profile(cfg),
    }
    .map_err(as_config)?;
    Ok(Report::new(cmd.name(), cfg.seed, echo(cfg), rows))
}

/// Config echo without the fields that must not affect the report body.
fn echo(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.out = None;
    c.threads = None;
    c.format = Default::default();
    c.echo()
}

fn coords(p: &Point) -> String {
    let parts: Vec<String> = p.coords.iter().map(|c| super::report::num(*c)).collect();
    format!("({})", parts.join(" "))
}

fn default_axiom_models() -> Vec<ModelSpec> {
    vec![
        ModelSpec { kind: ModelKind::Euclidean, dim: 2 },
        ModelSpec { kind: ModelKind::HalfSpace, dim: 2 },
        ModelSpec { kind: ModelKind::L1, dim: 2 },
        ModelSpec { kind: ModelKind::Hyperboloid2, dim: 2 },
    ]
}

pub fn cmd_verify_axioms(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let section = cfg.axioms.clone();
    let samples = section.as_ref().map_or(10_000, |a| a.samples);
    let tol_override = section.as_ref().and_then(|a| a.tolerance);
    let models = match section.and_then(|a| a.models) {
        Some(m) => m,
        None => match &cfg.model {
            Some(m) => vec![m.clone()],
            None => default_axiom_models(),
        },
    };
    let mut rows = Vec::new();
    for (i, spec) in models.iter().enumerate() {
        let model = spec.build()?;
        let tol = tol_override.unwrap_or_else(|| model.tolerance());
        let rep = verify_hyperbolicity_with(&model, samples, mix(cfg.seed, i as u64), tol, default_scale(&model))?;
        let worst: Vec<String> = rep.properties.iter().map(|p| format!("{}={:.3e}", p.name, p.max_violation)).collect();
        let mut row = Row::at_most(
            format!("axioms.{}", model.name()),
            "verify_hyperbolicity",
            "convex combinations are geodesic and d((1-l)x+ly,(1-l)x+lz) <= l d(y,z)",
            rep.max_violation,
            tol,
            0.0,
        )
        .with_detail(format!("samples={} {}", rep.samples, worst.join(" ")));
        row.pass = rep.passed;
        rows.push(row);
    }
    Ok(rows)
}

pub fn cmd_metric(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let model = cfg.space()?;
    let theta = cfg.basepoint(&model)?;
    let mut rows = Vec::new();
    if cfg.pair.is_none() && cfg.divergence.is_none() {
        return Err(LabError::Config("metric needs a [pair] or a [divergence] section".into()));
    }
    if let Some(pair) = &cfg.pair {
        let metric = cfg.build_metric(&model, &theta)?;
        let f = pair.f.build(&model, &theta)?;
        let g = pair.g.build(&model, &theta)?;
        let v = metric.distance(&f, &g, mix(cfg.seed, 1))?;
        let op = match cfg.metric {
            Some(MetricSpec::Series { .. }) => "series_metric",
            Some(MetricSpec::Weighted { .. }) => "weighted_sup_metric",
            _ => "pointwise_metric",
        };
        let name = metric.name();
        rows.push(Row::info(format!("metric.{name}.value"), op, "truncated or sampled distance", v.value));
        rows.push(Row::info(format!("metric.{name}.tail"), op, "certified bound on the omitted part", v.tail_bound));
        rows.push(
            Row::at_least(
                format!("metric.{name}.certified"),
                op,
                "distance <= safety factor x estimate + tail",
                v.certified(),
                v.value,
                0.0,
            )
            .with_detail(format!("sampled={} budget_used={}", v.sampled, v.budget_used)),
        );
        if let Some(expected) = pair.expected {
            rows.push(Row::at_most(
                format!("metric.{name}.expected"),
                op,
                "distance matches the configured reference value",
                (v.value - expected).abs(),
                pair.tolerance,
                0.0,
            ));
        }
    }
    if let Some(div) = &cfg.divergence {
        let rep = d_theta1_divergence_demo(&model, &theta, div.n_max, cfg.budget, mix(cfg.seed, 2))?;
        for r in rep.rows {
            let anchor = "f_n = theta on B(theta,n) and d_theta1(f_n, theta) >= n/(1+2n) >= 1/3";
            rows.push(
                Row::at_least(format!("divergence.n{}.distance", r.n), "d_theta1_divergence_demo", anchor, r.measured, r.expected, STRICT_SLACK)
                    .with_detail(format!("lip={}", super::report::num(r.lip))),
            );
            rows.push(Row::at_most(
                format!("divergence.n{}.bounded_sup", r.n),
                "d_theta1_divergence_demo",
                "f_n agrees with the constant on B(theta,n)",
                r.bounded_sup,
                0.0,
                0.0,
            ));
        }
    }
    Ok(rows)
}

fn witness_section(cfg: &ExperimentConfig) -> Result<&WitnessSection> {
    cfg.witness.as_ref().ok_or_else(|| LabError::Config("missing [witness] section".into()))
}

/// Builds the witness described by `[model]`, `[map]`, `[metric]` and `[witness]`.
pub fn build_witness(cfg: &ExperimentConfig) -> Result<PorosityWitness> {
    let model = cfg.space()?;
    let theta = cfg.basepoint(&model)?;
    let f = cfg.build_map(&model, &theta)?;
    let metric = cfg.build_metric(&model, &theta)?;
    let w = witness_section(cfg)?;
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| LabError::Config(format!("{name} is required for this witness")));
    let point = |v: &Option<Vec<f64>>, name: &str| -> Result<Point> {
        let c = v.clone().ok_or_else(|| LabError::Config(format!("{name} is required for this witness")))?;
        let p = Point::new(c);
        model.validate(&p)?;
        Ok(p)
    };
    match w.kind {
        WitnessKind::BallInvariance => ball_invariance_witness(&f, w.r, &theta, &metric),
        WitnessKind::Rakotch => {
            let n = w.n.ok_or_else(|| LabError::Config("n is required for this witness".into()))?;
            rakotch_witness(&f, w.r, n, &theta, &metric)
        }
        WitnessKind::Modcont => modcont_witness(&f, w.r, need(w.t0, "t0")?, need(w.mu, "mu")?, &theta, &metric),
        WitnessKind::Shrink => {
            let x = point(&w.x, "x")?;
            let y = point(&w.y, "y")?;
            shrink_witness(&f, &x, &y, &theta, need(w.gamma, "gamma")?, w.r, &metric)
        }
    }
    .map_err(as_config)
}

fn predicate_anchor(p: &Predicate) -> (&'static str, &'static str) {
    match p {
        Predicate::BallInvariance { .. } => ("ball_invariance_check", "h maps the closed ball B(theta,M_f) into itself"),
        Predicate::RakotchGaugeBelowOne { .. } => ("rakotch_gauges", "gauge c_{h,n} stays below a bound < 1"),
        Predicate::ModulusExceeds { .. } => ("modulus_of_continuity", "d(h(x0),h(y0)) > mu t0"),
        Predicate::ShrinkPair { .. } => ("shrink_witness", "d(h(a),h(b)) < d(a,b) near the pair (x,y)"),
    }
}

pub fn cmd_witness(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let w = build_witness(cfg)?;
    let v = verify_witness(&w, cfg.members, cfg.budget, mix(cfg.seed, 3))?;
    let mut rows = Vec::new();
    for (k, val) in &w.params {
        rows.push(Row::info(format!("witness.param.{k}"), "witness construction", "construction constant", *val));
    }
    rows.push(Row::info("witness.radius_log2", "witness construction", "log2 of the witness radius", w.radius_log2));
    rows.push(
        Row::below(
            "witness.center_distance",
            "verify_witness",
            "certified distance from f to the center is below r",
            v.center_distance_certified,
            w.r,
            0.0,
        )
        .with_detail(format!(
            "value={} tail={}",
            super::report::num(v.center_distance_value),
            super::report::num(v.center_distance_tail)
        )),
    );
    let (op, anchor) = predicate_anchor(&w.predicate);
    let relation = match w.predicate {
        Predicate::ModulusExceeds { .. } => super::report::Relation::Above,
        Predicate::ShrinkPair { .. } => super::report::Relation::Below,
        _ => super::report::Relation::AtMost,
    };
    for m in &v.members {
        let claimed = match relation {
            super::report::Relation::Above => m.predicate_value - m.margin,
            _ => m.predicate_value + m.margin,
        };
        let mut detail = format!(
            "kind={:?} param={} log2_bound={} within_radius={}",
            m.kind,
            super::report::num(m.param),
            super::report::num(m.log2_distance_bound),
            m.within_radius
        );
        if let Some(d) = m.sampled_distance {
            detail.push_str(&format!(" sampled_distance={} consistent={}", super::report::num(d), m.sampled_consistent));
        }
        if let Some(e) = &m.error {
            detail.push_str(&format!(" error={e}"));
        }
        rows.push(Row {
            name: format!("witness.member{}", m.index),
            operation: op.into(),
            anchor: anchor.into(),
            relation,
            claimed,
            measured: m.predicate_value,
            margin: m.margin,
            pass: m.pass,
            detail,
        });
    }
    Ok(rows)
}

pub fn cmd_fixpoint(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let model = cfg.space()?;
    let theta = cfg.basepoint(&model)?;
    let fp = cfg.fixpoint.clone().ok_or_else(|| LabError::Config("missing [fixpoint] section".into()))?;
    let witness = if fp.from_witness { Some(build_witness(cfg)?) } else { None };
    let f: NonexpMap = match &witness {
        Some(w) => w.center_g.clone(),
        None => cfg.build_map(&model, &theta)?,
    };
    let x0 = match &fp.x0 {
        Some(c) => {
            let p = Point::new(c.clone());
            model.validate(&p)?;
            p
        }
        None => theta.clone(),
    };
    let rep = iterate(&f, &x0, fp.tol, fp.max_iter)?;
    let mut rows = vec![
        Row::holds("fixpoint.converged", "iterate", "Picard iterates reach d(x,f(x)) <= tol", rep.converged)
            .with_detail(format!("final={} residual={}", coords(&rep.final_point), super::report::num(rep.residual))),
        Row::info("fixpoint.iterations", "iterate", "number of applications of f", rep.iterations as f64),
    ];
    if let Some(b) = rep.error_bound {
        rows.push(Row::info("fixpoint.error_bound", "iterate", "distance to the fixed point <= residual/(1-L)", b));
    }
    if let Some(expected) = &fp.expected {
        let e = Point::new(expected.clone());
        model.validate(&e)?;
        rows.push(Row::at_most(
            "fixpoint.expected",
            "iterate",
            "limit matches the configured fixed point",
            model.d(&rep.final_point.coords, &e.coords),
            fp.expected_tol,
            0.0,
        ));
    }
    let traj = &rep.trajectory;
    let stride = match fp.trajectory_rows {
        Some(n) if n > 0 => traj.len().div_ceil(n).max(1),
        Some(_) => usize::MAX,
        None => 1,
    };
    for (i, (k, r)) in traj.iter().enumerate() {
        if stride != usize::MAX && (i % stride == 0 || i + 1 == traj.len()) {
            rows.push(Row::info(format!("trajectory.{k}"), "iterate", "residual d(x_k,f(x_k))", *r));
        }
    }
    if let Some(w) = &witness {
        if let Predicate::BallInvariance { m_f } = w.predicate {
            let c = ball_invariance_check(&f, &theta, m_f, cfg.budget, mix(cfg.seed, 4))?;
            rows.push(Row::at_most(
                "fixpoint.center_ball_invariance",
                "ball_invariance_check",
                "the center maps B(theta,M_f) into itself",
                c.worst_margin + m_f,
                m_f,
                model.tolerance(),
            ));
            let (d, _) = max_orbit_distance(&f, &x0, &theta, fp.tol, fp.max_iter)?;
            rows.push(Row::at_most(
                "fixpoint.orbit_in_ball",
                "max_orbit_distance",
                "every recorded iterate stays in B(theta,M_f)",
                d,
                m_f,
                model.tolerance(),
            ));
        }
    }
    if let Some(a) = &fp.audit {
        let g = rakotch_gauges(&f, &theta, a.n_max, cfg.budget, mix(cfg.seed, 5))?;
        for (i, c) in g.gauges.iter().enumerate() {
            rows.push(Row::at_most(
                format!("rakotch.gauge{}", i + 1),
                "rakotch_gauges",
                "sampled gauge c_{f,n} <= 1",
                *c,
                1.0,
                LIP_SLACK,
            ));
        }
        let second = match &a.second_start {
            Some(c) => {
                let p = Point::new(c.clone());
                model.validate(&p)?;
                Some(p)
            }
            None => None,
        };
        let au = rakotch_convergence_audit(&f, &theta, &x0, &g, fp.tol, second.as_ref())?;
        rows.push(
            Row::at_most(
                "rakotch.step_violations",
                "rakotch_convergence_audit",
                "d(x_{k+1},x_{k+2}) <= phi(d(x_k,x_{k+1})) d(x_k,x_{k+1})",
                au.step_violations as f64,
                0.0,
                0.0,
            )
            .with_detail(format!("checks={} worst_excess={}", au.step_checks, super::report::num(au.worst_step_excess))),
        );
        let detail = format!("second_start={} gap={}", coords(&au.second_start), super::report::num(au.limit_gap));
        if au.uniqueness_expected {
            rows.push(
                Row::holds("rakotch.unique_limit", "rakotch_convergence_audit", "both orbits converge to one fixed point", au.unique)
                    .with_detail(detail),
            );
        } else {
            rows.push(
                Row::info("rakotch.limit_gap", "rakotch_convergence_audit", "gap between the two limits", au.limit_gap)
                    .with_detail(detail),
            );
        }
    }
    Ok(rows)
}

pub fn cmd_lipschitz_profile(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let model = cfg.space()?;
    let theta = cfg.basepoint(&model)?;
    let f = cfg.build_map(&model, &theta)?;
    let p = cfg.profile.clone().ok_or_else(|| LabError::Config("missing [profile] section".into()))?;
    let cloud: Vec<Point> = match (&p.cloud.points, p.cloud.count) {
        (Some(pts), _) => pts
            .iter()
            .map(|c| {
                let q = Point::new(c.clone());
                model.validate(&q).map(|_| q)
            })
            .collect::<Result<_>>()?,
        (None, Some(n)) => ball_sampler(&model, &theta, p.cloud.radius.unwrap_or(10.0), n, mix(cfg.seed, 6))?,
        (None, None) => Vec::new(),
    };
    if cloud.is_empty() {
        return Err(LabError::Config("the profile cloud is empty".into()));
    }
    if p.j_min == 0 || p.j_min > p.j_max {
        return Err(LabError::Config("need 1 <= j_min <= j_max".into()));
    }
    let lip_f = f.claimed_lip();
    let mut rows = Vec::new();
    for j in p.j_min..=p.j_max {
        let a = (-(j as f64)).exp2();
        let net = greedy_separated_net(&model, &cloud, a)?;
        rows.push(Row::info(format!("profile.j{j}.net_size"), "greedy_separated_net", "maximal a_j-separated subset", net.points.len() as f64));
        if net.points.len() < 2 {
            continue;
        }
        let g = isometry_patch(&f, &net, a, p.eps, &theta)?;
        for (i, z) in net.points.iter().enumerate() {
            for k in 0..p.k_levels {
                let r = p.eps * a * (-(k as f64)).exp2() / 32.0;
                let s = mix(cfg.seed, ((j * 1_000_003 + i) * 64 + k) as u64);
                let lip = local_lipschitz(&g, z, r, cfg.budget, s)?.value;
                rows.push(
                    Row::at_least(
                        format!("profile.j{j}.z{i}.k{k}.patched"),
                        "local_lipschitz",
                        "Lip(g,z,r) = 1 on the patched micro-balls",
                        lip,
                        1.0,
                        1e-6,
                    )
                    .with_detail(format!("z={} r={}", coords(z), super::report::num(r))),
                );
                if p.compare_unpatched {
                    let lf = local_lipschitz(&f, z, r, cfg.budget, s)?.value;
                    rows.push(Row::at_most(
                        format!("profile.j{j}.z{i}.k{k}.unpatched"),
                        "local_lipschitz",
                        "Lip(f,z,r) <= L for the unpatched map",
                        lf,
                        lip_f,
                        1e-6,
                    ));
                }
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(text).unwrap()
    }

    #[test]
    fn axioms_default_and_empty() {
        let c = cfg("schema = 1\n[axioms]\nsamples = 500");
        let r = run_command(Command::VerifyAxioms, &c).unwrap();
        assert_eq!(r.summary.checks, 4);
        assert!(r.all_pass());
        let c = cfg("schema = 1\n[axioms]\nmodels = []");
        let r = run_command(Command::VerifyAxioms, &c).unwrap();
        assert!(r.rows.is_empty() && r.all_pass());
    }

    #[test]
    fn zero_tolerance_fails_on_hyperboloid() {
        let c = cfg("schema = 1\n[axioms]\nsamples = 500\ntolerance = 0.0\nmodels = [{ kind = \"hyperboloid2\", dim = 2 }]");
        let r = run_command(Command::VerifyAxioms, &c).unwrap();
        assert!(!r.all_pass());
        assert!(r.rows[0].measured > 0.0);
    }

    #[test]
    fn metric_constant_pair() {
        let c = cfg(r#"
schema = 1
[model]
kind = "euclidean"
[metric]
kind = "series"
[pair]
f = { kind = "constant", point = [0.0] }
g = { kind = "constant", point = [1.0] }
expected = 0.5
tolerance = 1e-12
"#);
        let r = run_command(Command::Metric, &c).unwrap();
        assert!(r.all_pass(), "{}", r.to_csv());
    }

    #[test]
    fn custom_gauge_without_tail_is_config_error() {
        let c = cfg(r#"
schema = 1
[model]
kind = "euclidean"
[gauge]
kind = "custom"
knots = [[0.001, 0.5], [0.5, 0.9]]
[metric]
kind = "series"
[pair]
f = { kind = "identity" }
g = { kind = "identity" }
"#);
        assert!(matches!(run_command(Command::Metric, &c), Err(LabError::Config(_))));
    }

    const BALL_WITNESS: &str = r#"
schema = 1
members = 0
[model]
kind = "euclidean"
[metric]
kind = "series"
[map]
kind = "affine1d"
a = 1.0
b = 1.0
[witness]
kind = "ball_invariance"
r = 0.5
"#;

    #[test]
    fn witness_zero_members_has_center_row() {
        let c = cfg(BALL_WITNESS);
        let r = run_command(Command::Witness, &c).unwrap();
        assert!(r.rows.iter().any(|x| x.name == "witness.center_distance" && x.pass));
        assert!(!r.rows.iter().any(|x| x.name.starts_with("witness.member")));
        let bad = cfg(&BALL_WITNESS.replace("r = 0.5", "r = 1.5"));
        assert!(matches!(run_command(Command::Witness, &bad), Err(LabError::Config(_))));
    }

    #[test]
    fn fixpoint_rows() {
        let base = r#"
schema = 1
[model]
kind = "euclidean"
[map]
kind = "affine1d"
a = 0.5
b = 1.0
[fixpoint]
tol = 1e-10
expected = [2.0]
trajectory_rows = 5
"#;
        let r = run_command(Command::Fixpoint, &cfg(base)).unwrap();
        assert!(r.all_pass(), "{}", r.to_csv());
        let t = cfg(&base.replace("a = 0.5", "a = 1.0").replace("expected = [2.0]\n", "max_iter = 100\n"));
        let r = run_command(Command::Fixpoint, &t).unwrap();
        assert!(r.rows.iter().any(|x| x.name == "fixpoint.converged" && !x.pass));
    }

    #[test]
    fn profile_empty_cloud_is_config_error() {
        let c = cfg("schema = 1\n[model]\nkind = \"euclidean\"\n[map]\nkind = \"identity\"\n[profile]\ncloud = { points = [] }");
        assert!(matches!(run_command(Command::LipschitzProfile, &c), Err(LabError::Config(_))));
    }
}
