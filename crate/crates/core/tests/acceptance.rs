//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs as a plain binary (`harness = false`).

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use nexlab::fixpoint::{ball_invariance_check, iterate, max_orbit_distance};
use nexlab::geodesic::verify_hyperbolicity;
use nexlab::mapping::{local_lipschitz, rakotch_gauges};
use nexlab::metrics::gauge::check_gauge_conditions;
use nexlab::metrics::lemmas::{d_theta1_divergence_demo, local_from_global, LocalBound};
use nexlab::perturbation::{
    ball_invariance_witness, bump_lambda, enlarge_modulus, isometry_patch, modcont_witness, radial_collapse,
    rakotch_witness, shrink_witness, spike_map, verify_witness, PorosityWitness, SeparatedNet,
};
use nexlab::{Gauge, MapMetric, NonexpMap, Point, SpaceModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Outcome {
    if ok {
        Ok(msg.into())
    } else {
        Err(msg.into())
    }
}

/// Independent Euclidean distance.
fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_point(r: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| r.random_range(-scale..scale)).collect()
}

/// Random affine map on R^2 with operator norm at most `norm`.
fn random_affine(r: &mut ChaCha8Rng, m: &SpaceModel, norm: f64) -> NonexpMap {
    let a: f64 = r.random_range(0.0..std::f64::consts::TAU);
    let k = r.random_range(0.0..norm);
    let flip = if r.random_bool(0.5) { -1.0 } else { 1.0 };
    let matrix = vec![vec![k * a.cos(), -k * a.sin() * flip], vec![k * a.sin(), k * a.cos() * flip]];
    let offset = random_point(r, 2, 3.0);
    NonexpMap::affine(m, &matrix, &offset).unwrap()
}

fn criterion1() -> Outcome {
    let start = Instant::now();
    let models = [
        SpaceModel::euclidean(3).unwrap(),
        SpaceModel::l1(3).unwrap(),
        SpaceModel::half_space(3).unwrap(),
        SpaceModel::hyperboloid2(),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, m) in models.iter().enumerate() {
        let r = verify_hyperbolicity(m, 10_000, 100 + i as u64).map_err(|e| e.to_string())?;
        let tol = if m.name().contains("Hyperboloid") { 1e-6 } else { 1e-9 };
        ok &= r.passed && r.max_violation <= tol && r.samples == 10_000;
        parts.push(format!("{} max_violation={:.2e}", r.model, r.max_violation));
    }
    let t = start.elapsed();
    ok &= t < Duration::from_secs(10);
    check(ok, format!("{}; {:.2}s", parts.join(", "), t.as_secs_f64()))
}

fn criterion2() -> Outcome {
    let log = Gauge::log();
    let rl = check_gauge_conditions(&log, 200).map_err(|e| e.to_string())?;
    // Σ n 2^-n = 2.
    let oracle_log: f64 = (1..=200).map(|n| n as f64 * (-(n as f64)).exp2()).sum();
    let log_ok = rl.all_pass(&["C1", "C2", "C3", "C4", "C5"])
        && (log.c_phi - 2.0).abs() <= 1e-12
        && (oracle_log - 2.0).abs() <= 1e-12;
    let pow = Gauge::power();
    let rp = check_gauge_conditions(&pow, 200).map_err(|e| e.to_string())?;
    // Σ n·n^-4 = Σ n^-3, partial sum plus the integral tail 1/(2N^2).
    let n_max = 1_000_000usize;
    let partial: f64 = (1..=n_max).rev().map(|n| (n as f64).powi(-3)).sum();
    let oracle_pow = partial + 1.0 / (2.0 * (n_max as f64).powi(2));
    let pow_ok = rp.all_pass(&["C1", "C2", "C3", "C4"]) && (pow.c_phi - oracle_pow).abs() <= 1e-6;
    let mut grid_ok = log.phi(0.5) == 1.0;
    for i in 1..=20 {
        let t = i as f64 / 21.0;
        grid_ok &= log.phi_inv(t) == (-1.0 / t).exp2();
    }
    check(
        log_ok && pow_ok && grid_ok,
        format!("log C_phi={} power C_phi={:.9} oracle={:.9} grid_exact={grid_ok}", log.c_phi, pow.c_phi, oracle_pow),
    )
}

fn criterion3() -> Outcome {
    let m = SpaceModel::euclidean(2).unwrap();
    let theta = Point::new(vec![0.0, 0.0]);
    let log = Gauge::log();
    let series = MapMetric::series(&m, &theta, &log, None, 400).unwrap();
    let weighted = MapMetric::weighted(&m, &theta, 2.0, 400).unwrap();
    let mut r = rng(3);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..50 {
        let f = random_affine(&mut r, &m, 1.0);
        let gamma = r.random_range(0.001..0.5);
        let fg = NonexpMap::contract_toward(&f, &theta, gamma).unwrap();
        let ds = series.distance(&f, &fg, i).unwrap();
        let dw = weighted.distance(&f, &fg, i).unwrap();
        let es = ds.value + ds.tail_bound - log.c_phi * gamma;
        let ew = dw.value + dw.tail_bound - gamma;
        worst = worst.max(es).max(ew);
        if es > 1e-12 || ew > 1e-12 {
            violations += 1;
        }
    }
    // Local bound from a global distance.
    let mut local_viol = 0;
    let mut tested = 0;
    for i in 0..100u64 {
        let f = random_affine(&mut r, &m, 1.0);
        let mm = r.random_range(1..=8usize);
        let g = if i % 2 == 0 {
            let shift = random_point(&mut r, 2, 1.0);
            let len = euclid(&shift, &[0.0, 0.0]).max(1e-12);
            let target = r.random_range(0.05..0.4) * (-(mm as f64)).exp2();
            let delta: Vec<f64> = shift.iter().map(|c| c * target / len).collect();
            NonexpMap::compose(&NonexpMap::affine(&m, &[vec![1.0, 0.0], vec![0.0, 1.0]], &delta).unwrap(), &f).unwrap()
        } else {
            let gamma = r.random_range(0.01..0.4) * (-(mm as f64)).exp2() / (mm as f64 * 4.0);
            NonexpMap::contract_toward(&f, &theta, gamma).unwrap()
        };
        let d = series.distance(&f, &g, 1000 + i).unwrap();
        let bound = match local_from_global(d.value + d.tail_bound, mm, &log).unwrap() {
            LocalBound::Bound(b) => b,
            LocalBound::NoBound => continue,
        };
        tested += 1;
        let mut pr = rng(5000 + i);
        for _ in 0..1000 {
            let z = loop {
                let z = random_point(&mut pr, 2, mm as f64);
                if euclid(&z, &[0.0, 0.0]) <= mm as f64 {
                    break z;
                }
            };
            if euclid(&f.apply(&z), &g.apply(&z)) > bound + 1e-12 {
                local_viol += 1;
            }
        }
    }
    check(
        violations == 0 && local_viol == 0 && tested == 100,
        format!("density: {violations} violations (worst excess {worst:.2e}); local bound: {tested} cases, {local_viol} violations"),
    )
}

fn criterion4() -> Outcome {
    let m = SpaceModel::euclidean(1).unwrap();
    let theta = Point::scalar(0.0);
    let rep = d_theta1_divergence_demo(&m, &theta, 20, 2000, 4).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut ok = rep.all_hold && rep.rows.len() == 18;
    for row in &rep.rows {
        let n = row.n as f64;
        let oracle = n / (1.0 + 2.0 * n);
        worst = worst.max((row.measured - oracle).abs());
        ok &= row.bounded_sup == 0.0 && oracle >= 1.0 / 3.0 && (row.measured - oracle).abs() <= 1e-9;
    }
    check(ok, format!("n=3..20, worst |measured - n/(1+2n)| = {worst:.2e}"))
}

fn criterion5() -> Outcome {
    const PAIRS: usize = 10_000;
    let m = SpaceModel::euclidean(2).unwrap();
    let o = [0.0, 0.0];
    let mut r = rng(5);
    let mut fails: Vec<String> = Vec::new();
    // Bump field.
    let eps = 0.25;
    let bump = bump_lambda(&m, &Point::new(o.to_vec()), 2.0, eps).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..PAIRS {
        let x = random_point(&mut r, 2, 8.0);
        let y = random_point(&mut r, 2, 8.0);
        let q = (bump.value(&Point::new(x.clone())).unwrap() - bump.value(&Point::new(y.clone())).unwrap()).abs() / euclid(&x, &y);
        worst = worst.max(q);
    }
    if worst > eps + 1e-12 {
        fails.push(format!("bump Lip {worst}"));
    }
    // Radial collapse.
    let (rr, ce) = (1.5, 0.5);
    let pi = radial_collapse(&m, &Point::new(vec![1.0, -1.0]), rr, ce).unwrap();
    let (mut lip, mut disp, mut moved_outside) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..PAIRS {
        let x = random_point(&mut r, 2, 8.0);
        let y = random_point(&mut r, 2, 8.0);
        let (px, py) = (pi.apply(&x), pi.apply(&y));
        lip = lip.max(euclid(&px, &py) / euclid(&x, &y));
        disp = disp.max(euclid(&px, &x));
        if euclid(&x, &[1.0, -1.0]) >= rr * (1.0 + 1.0 / ce) && euclid(&px, &x) > 1e-12 {
            moved_outside += 1;
        }
    }
    if lip > 1.0 + ce + 1e-9 || disp > rr + 1e-12 || moved_outside > 0 {
        fails.push(format!("collapse lip={lip} disp={disp} moved_outside={moved_outside}"));
    }
    // Spike.
    let line = SpaceModel::euclidean(1).unwrap();
    let (t0, lam) = (1.0, 0.5);
    let sp = spike_map(&line, &Point::scalar(0.0), &Point::scalar(1.0), &Point::scalar(5.0), t0, lam).unwrap();
    let gap = (sp.map.apply(&[0.0])[0] - sp.map.apply(&[1.0])[0]).abs();
    let mut spike_lip = 0.0f64;
    for _ in 0..PAIRS {
        let x = r.random_range(-3.0..3.0);
        let y = r.random_range(-3.0..3.0);
        spike_lip = spike_lip.max((sp.map.apply(&[x])[0] - sp.map.apply(&[y])[0]).abs() / (x - y).abs());
    }
    if gap - lam * t0 < (1.0 - lam) * t0 / 2.0 - 1e-9 || spike_lip > 1.0 + 1e-9 {
        fails.push(format!("spike gap={gap} lip={spike_lip}"));
    }
    // Modulus enlargement of a strict contraction.
    let f = NonexpMap::affine(&m, &[vec![0.5, 0.0], vec![0.0, 0.5]], &[1.0, 0.0]).unwrap();
    let (gamma, lam, t0, big_r) = (0.5, 0.75, 1.0, 2.0);
    let en = enlarge_modulus(&f, &Point::new(o.to_vec()), gamma, lam, t0, big_r).unwrap();
    let g = &en.map;
    let egap = euclid(&g.apply(&en.x0.coords), &g.apply(&en.y0.coords));
    let (mut inside_diff, mut dev, mut elip) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..PAIRS {
        let x = random_point(&mut r, 2, 8.0);
        let y = random_point(&mut r, 2, 8.0);
        if euclid(&x, &o) < big_r {
            inside_diff = inside_diff.max(euclid(&g.apply(&x), &f.apply(&x)));
        }
        dev = dev.max(euclid(&g.apply(&x), &f.apply(&x)));
        elip = elip.max(euclid(&g.apply(&x), &g.apply(&y)) / euclid(&x, &y));
    }
    if inside_diff > 0.0 || dev > 2.0 * t0 + 1e-9 || egap <= lam * t0 || elip > 1.0 + 1e-9 {
        fails.push(format!("enlarge inside={inside_diff} dev={dev} gap={egap} lip={elip}"));
    }
    // Isometry patch.
    let (a, eps) = (0.5, 0.5);
    let net = SeparatedNet::from_points(&m, vec![Point::new(vec![0.0, 0.0]), Point::new(vec![6.0, 2.0])], a).unwrap();
    let base = NonexpMap::contract_toward(&NonexpMap::identity(&m), &Point::new(o.to_vec()), 0.25).unwrap();
    let patched = isometry_patch(&base, &net, a, eps, &Point::new(o.to_vec())).unwrap();
    let (mut dev_excess, mut iso_err) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..PAIRS {
        let x = random_point(&mut r, 2, 10.0);
        let d = euclid(&base.apply(&x), &patched.apply(&x));
        dev_excess = dev_excess.max(d - 0.75 * eps * euclid(&x, &o).max(1.0));
    }
    // Distances to the net point are preserved on the closed micro-ball.
    let micro = eps * a / 32.0;
    for z in &net.points {
        let gz = patched.apply(&z.coords);
        for i in 0..PAIRS / 2 {
            let v = random_point(&mut r, 2, 1.0);
            let len = euclid(&v, &[0.0, 0.0]).max(1e-12);
            // Every tenth sample sits on the boundary sphere.
            let t = if i % 10 == 0 { micro } else { micro * r.random_range(0.0..1.0f64) };
            let y = [z.coords[0] + v[0] * t / len, z.coords[1] + v[1] * t / len];
            iso_err = iso_err.max((euclid(&patched.apply(&y), &gz) - euclid(&y, &z.coords)).abs());
        }
    }
    if dev_excess >= 0.0 || iso_err > 1e-9 {
        fails.push(format!("patch deviation excess={dev_excess} isometry error={iso_err}"));
    }
    check(
        fails.is_empty(),
        if fails.is_empty() {
            format!("5 constructors x {PAIRS} pairs, zero violations")
        } else {
            fails.join("; ")
        },
    )
}

fn witness_run(name: &str, w: PorosityWitness) -> (bool, String) {
    let start = Instant::now();
    let v = verify_witness(&w, 100, 2000, 6).unwrap();
    let t = start.elapsed();
    let ok = v.all_pass && v.passed == 100 && v.center_ok && t < Duration::from_secs(60);
    (ok, format!("{name} {}/100 center={:.3e}<{} {:.1}s", v.passed, v.center_distance_certified, w.r, t.as_secs_f64()))
}

fn criterion6() -> Outcome {
    let line = SpaceModel::euclidean(1).unwrap();
    let o = Point::scalar(0.0);
    let log = Gauge::log();
    let series = MapMetric::series(&line, &o, &log, None, 400).unwrap();
    let shift = NonexpMap::affine_1d(&line, 1.0, 1.0).unwrap();
    let id = NonexpMap::identity(&line);
    let mut parts = Vec::new();
    let mut ok = true;

    let w = ball_invariance_witness(&shift, 0.5, &o, &series).unwrap();
    ok &= (w.param("gamma").unwrap() - 1.0 / 12.0).abs() < 1e-15 && (w.param("m_f").unwrap() - 24.0).abs() < 1e-12;
    let (p, s) = witness_run("ball_invariance", w);
    ok &= p;
    parts.push(s);

    let w = rakotch_witness(&id, 0.5, 2, &o, &series).unwrap();
    ok &= (w.param("alpha").unwrap() - 1.0 / 128.0).abs() < 1e-15;
    let (p, s) = witness_run("rakotch", w);
    ok &= p;
    parts.push(s);

    let w = modcont_witness(&shift, 0.5, 1.0, 0.5, &o, &series).unwrap();
    ok &= (w.param("eps").unwrap() - 1.0 / 16.0).abs() < 1e-15 && (w.param("alpha").unwrap() - 1.0 / 576.0).abs() < 1e-15;
    let (p, s) = witness_run("modcont", w);
    ok &= p;
    parts.push(s);

    let pw = MapMetric::pointwise(&line, None).unwrap();
    let w = shrink_witness(&id, &o, &Point::scalar(10.0), &o, 0.1, 0.5, &pw).unwrap();
    let (p, s) = witness_run("shrink", w);
    ok &= p;
    parts.push(s);
    check(ok, parts.join(", "))
}

fn criterion7() -> Outcome {
    let line = SpaceModel::euclidean(1).unwrap();
    let o = Point::scalar(0.0);
    let mut notes = Vec::new();
    let mut ok = true;
    let half = NonexpMap::affine_1d(&line, 0.5, 1.0).unwrap();
    for x0 in [0.0, 100.0] {
        let r = iterate(&half, &Point::scalar(x0), 1e-10, 1000).unwrap();
        let err = (r.final_point.coords[0] - 2.0).abs();
        ok &= r.converged && err <= 1e-8 && r.iterations <= 60;
        notes.push(format!("x0={x0}: {} iterations, error {err:.1e}", r.iterations));
    }
    let series = MapMetric::series(&line, &o, &Gauge::log(), None, 400).unwrap();
    let shift = NonexpMap::affine_1d(&line, 1.0, 1.0).unwrap();
    let w = ball_invariance_witness(&shift, 0.5, &o, &series).unwrap();
    let m_f = w.param("m_f").unwrap();
    let p1 = ball_invariance_check(&w.center_g, &o, m_f, 4000, 7).unwrap();
    let mut orbit_ok = true;
    for x0 in [0.0, m_f, -m_f, 0.5 * m_f] {
        let (d, _) = max_orbit_distance(&w.center_g, &Point::scalar(x0), &o, 1e-10, 100_000).unwrap();
        orbit_ok &= d <= m_f + 1e-9;
    }
    ok &= p1.passed && orbit_ok;
    notes.push(format!("center P1={} orbits in ball={orbit_ok}", p1.passed));
    let plane = SpaceModel::euclidean(2).unwrap();
    let oo = Point::new(vec![0.0, 0.0]);
    let mut worst: f64 = 0.0;
    for l in [0.25, 0.5, 0.9] {
        let (c, s) = (l * 0.6, l * 0.8);
        let f = NonexpMap::affine(&plane, &[vec![c, -s], vec![s, c]], &[1.0, 2.0]).unwrap();
        let g = rakotch_gauges(&f, &oo, 6, 2000, 8).unwrap();
        for v in &g.gauges {
            worst = worst.max((v - l).abs());
        }
    }
    ok &= worst <= 1e-6;
    notes.push(format!("gauge error {worst:.1e}"));
    let r = iterate(&shift, &o, 1e-10, 500).unwrap();
    ok &= !r.converged;
    notes.push(format!("translation converged={}", r.converged));
    check(ok, notes.join(", "))
}

fn criterion8() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let (a, eps) = (0.5, 0.5);
    for dim in [1usize, 2] {
        let m = SpaceModel::euclidean(dim).unwrap();
        let o = m.origin();
        let mut far = vec![0.0; dim];
        far[0] = 10.0;
        let net = SeparatedNet::from_points(&m, vec![o.clone(), Point::new(far)], a).unwrap();
        let f = NonexpMap::contract_toward(&NonexpMap::identity(&m), &o, 0.25).unwrap();
        let g = isometry_patch(&f, &net, a, eps, &o).unwrap();
        let radius = eps * a / 32.0;
        for (i, z) in net.points.iter().enumerate() {
            let lg = local_lipschitz(&g, z, radius, 2000, 9 + i as u64).unwrap().value;
            let lf = local_lipschitz(&f, z, radius, 2000, 9 + i as u64).unwrap().value;
            ok &= lg >= 1.0 - 1e-6 && lf <= 0.75 + 1e-6;
            notes.push(format!("dim {dim} z{i}: patched {lg:.9} unpatched {lf:.9}"));
        }
    }
    check(ok, notes.join(", "))
}

fn criterion9() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_nexlab");
    let configs = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let runs = [
        ("verify-axioms", "axioms.toml"),
        ("metric", "divergence.toml"),
        ("witness", "witness_modcont.toml"),
        ("fixpoint", "fixpoint.toml"),
        ("lipschitz-profile", "profile.toml"),
    ];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    let mut ok = true;
    for (cmd, cfg) in runs {
        let mut bodies = Vec::new();
        for threads in [1, 4, 8] {
            let out = dir.path().join(format!("{cmd}-{threads}.csv"));
            let status = Command::new(bin)
                .args([cmd, "--config"])
                .arg(configs.join(cfg))
                .args(["--seed", "11", "--budget", "500", "--out"])
                .arg(&out)
                .env("NEXLAB_THREADS", threads.to_string())
                .stderr(std::process::Stdio::null())
                .status()
                .map_err(|e| e.to_string())?;
            ok &= status.code() == Some(0);
            bodies.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        let same = bodies.windows(2).all(|w| w[0] == w[1]);
        ok &= same;
        notes.push(format!("{cmd} identical={same}"));
    }
    check(ok, notes.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("space axioms", criterion1),
        ("gauge suite", criterion2),
        ("metric lemmas", criterion3),
        ("s=1 divergence", criterion4),
        ("perturbation constructors", criterion5),
        ("witness verification", criterion6),
        ("fixed points", criterion7),
        ("local Lipschitz profile", criterion8),
        ("determinism", criterion9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(msg) => println!("PASS criterion {} ({name}): {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
