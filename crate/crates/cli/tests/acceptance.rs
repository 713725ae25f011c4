//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines are never captured; exits non-zero if any fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use delayhopf::exprlang::parse;
use delayhopf::operators::{adjoint_defect, assemble, Coefficient, CoefficientFields};
use delayhopf::spectral::transversality;
use delayhopf::steady::{newton_steady, NewtonOptions};
use delayhopf::{
    bifurcation_scalars, build_interval_grid, build_masked_grid_2d, find_hopf_crossing, normal_form,
    principal_eigenpair, simulate, steady_point, threshold_scan, CrossingOptions, Direction, EigenPair, Grid,
    GrowthModel, HopfCrossing, Linearization, Observation, OrbitStability, SimConfig, Verdict,
};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn coef(src: &str) -> Coefficient<f64> {
    Arc::new(parse(src).expect("valid expression"))
}

fn interval(n: usize, b: f64) -> (Grid, delayhopf::DiscreteOperator) {
    let g = build_interval_grid(0.0, PI, n).unwrap();
    let op = assemble(&g, &CoefficientFields::constant(1.0, &[b], 1.0)).unwrap();
    (g, op)
}

fn disk(n: usize, model: &GrowthModel<f64>) -> (Grid, delayhopf::DiscreteOperator) {
    let g = build_masked_grid_2d([0.0, 2.0 * PI, 0.0, 2.0 * PI], n, n, |x, y| {
        (x - PI).powi(2) + (y - PI).powi(2) < PI * PI
    })
    .unwrap();
    let fields = CoefficientFields::new(
        coef("1 + 0.1*x + 0.1*y"),
        vec![coef("cos(x)/(sin(x)+2)"), coef("cos(y)/(sin(y)+2)")],
        model.zero_density_rate(),
    );
    let op = assemble(&g, &fields).unwrap();
    (g, op)
}

/// Steady state, linearization and first crossing at `λ` on the interval.
struct Hopf {
    g: Grid,
    ep: EigenPair,
    lin: Linearization<f64>,
    c: HopfCrossing,
    dl: f64,
    beta_star: f64,
}

fn hopf_1d(model: GrowthModel<f64>, lambda: f64) -> Result<Hopf, String> {
    let (g, op) = interval(199, 0.0);
    let ep = principal_eigenpair(&op).map_err(|e| e.to_string())?;
    let s = bifurcation_scalars(&g, &op, &ep, &model).map_err(|e| e.to_string())?;
    let p = steady_point(&g, &op, &model, &s, &ep, lambda).map_err(|e| e.to_string())?;
    let lin = Linearization::new(&g, &op, &model, lambda, &p.u).map_err(|e| e.to_string())?;
    let dl = lambda - s.lambda_star;
    let theta = if dl > 0.0 { PI / 2.0 } else { 1.5 * PI };
    let c = find_hopf_crossing(&lin, &ep.phi, &ep.phi_star, &CrossingOptions::new(dl.abs() * s.h_star, theta))
        .map_err(|e| e.to_string())?;
    Ok(Hopf { g, ep, lin, c, dl, beta_star: s.beta_star.unwrap_or(f64::NAN) })
}

fn c1_eigenvalue_accuracy() -> Outcome {
    let errs: Vec<f64> = [99, 199, 399]
        .iter()
        .map(|&n| (principal_eigenpair(&interval(n, 0.0).1).unwrap().lambda_star - 1.0).abs())
        .collect();
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    check(
        errs[2] < 1e-4 && ratios.iter().all(|&r| r >= 3.5),
        format!("error at n=399 {:.2e}, halving ratios {:.3} {:.3}", errs[2], ratios[0], ratios[1]),
    )
}

fn c2_advection_shift() -> Outcome {
    let l = principal_eigenpair(&interval(399, 0.5).1).unwrap().lambda_star;
    check((l - 1.0625).abs() < 1e-3, format!("lambda* = {l:.6}, target 1.0625"))
}

fn c3_adjoint_identity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let fig = CoefficientFields::new(
        coef("1 + 0.1*x + 0.1*y"),
        vec![coef("cos(x)/(sin(x)+2)"), coef("cos(y)/(sin(y)+2)")],
        coef("1"),
    );
    let configs: Vec<(&str, Grid, CoefficientFields<f64>)> = vec![
        (
            "interval",
            build_interval_grid(0.0, PI, 399).unwrap(),
            CoefficientFields::new(coef("1 + 0.3*sin(x)"), vec![coef("0.5 + cos(x)")], coef("1")),
        ),
        ("rect", build_masked_grid_2d([0.0, 2.0 * PI, 0.0, PI], 48, 24, |_, _| true).unwrap(), fig.clone()),
        ("disk", disk(64, &GrowthModel::Hutchinson).0, fig.clone()),
        (
            "implicit",
            build_masked_grid_2d([0.0, 2.0 * PI, 0.0, 2.0 * PI], 40, 40, |x, y| {
                ((x - PI) / 3.0).powi(2) + ((y - PI) / 2.0).powi(2) < 1.0
            })
            .unwrap(),
            fig,
        ),
    ];
    let mut worst = 0.0f64;
    for (_, g, fields) in &configs {
        let op = assemble(g, fields).unwrap();
        for _ in 0..100 {
            let u: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            worst = worst.max(adjoint_defect(&op, &u, &v).unwrap());
        }
    }
    let names: Vec<&str> = configs.iter().map(|c| c.0).collect();
    check(worst < 1e-12, format!("max relative defect {worst:.2e} over 100 pairs on {}", names.join(", ")))
}

fn c4_branch_asymptotics() -> Outcome {
    let (g, op) = interval(199, 0.0);
    let model = GrowthModel::Hutchinson;
    let ep = principal_eigenpair(&op).unwrap();
    let s = bifurcation_scalars(&g, &op, &ep, &model).unwrap();
    let phi_max = ep.phi.iter().copied().fold(f64::MIN, f64::max);
    let mut parts = Vec::new();
    let mut ok = true;
    for (lambda, tol) in [(1.1, 0.15), (1.02, 0.06)] {
        let p = steady_point(&g, &op, &model, &s, &ep, lambda).map_err(|e| e.to_string())?;
        let max_u = p.u.iter().copied().fold(f64::MIN, f64::max);
        let rel = (max_u / (p.t_pred * phi_max) - 1.0).abs();
        ok &= rel < tol && p.newton_residual <= 1e-10;
        parts.push(format!("lambda {lambda}: rel diff {rel:.4} (tol {tol}), residual {:.1e}", p.newton_residual));
    }
    check(ok, parts.join("; "))
}

fn c5_hopf_asymptotics() -> Outcome {
    let h = hopf_1d(GrowthModel::Hutchinson, 1.1)?;
    let (theta, nu, tau0) = (h.c.theta, h.c.nu, h.c.tau(0));
    let w = hopf_1d(GrowthModel::WeakAllee, 0.95)?;
    let ok = (theta - PI / 2.0).abs() < 0.15
        && (nu / h.dl - 1.0).abs() < 0.1
        && (tau0 / 15.708 - 1.0).abs() < 0.1
        && (w.c.theta - 1.5 * PI).abs() < 0.2;
    check(
        ok,
        format!(
            "Hutchinson 1.1: theta {theta:.4}, nu {nu:.5}, tau0 {tau0:.3}; weak Allee 0.95: theta {:.4}",
            w.c.theta
        ),
    )
}

fn c6_transversality() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, model, lambda) in [
        ("Hutchinson", GrowthModel::Hutchinson, 1.1),
        ("food-limited", GrowthModel::FoodLimited { c: 0.5 }, 1.1),
        ("weak Allee", GrowthModel::WeakAllee, 0.95),
    ] {
        let h = hopf_1d(model, lambda)?;
        // Errors when the finite-difference oracle disagrees in sign.
        let t = transversality(&h.lin, &h.c, 0).map_err(|e| format!("{name}: {e}"))?;
        ok &= t.closed_form.re > 0.0 && t.finite_difference > 0.0;
        parts.push(format!("{name} closed {:.4e} fd {:.4e}", t.closed_form.re, t.finite_difference));
    }
    check(ok, parts.join("; "))
}

fn c7_normal_form_limits() -> Outcome {
    let i = Complex64::i();
    let mut errs = Vec::new();
    let mut last = None;
    for lambda in [1.1, 1.05, 1.02] {
        let h = hopf_1d(GrowthModel::Hutchinson, lambda)?;
        let nf = normal_form(&h.lin, &h.c, 0).map_err(|e| e.to_string())?;
        let limit = 2.0 * i * PI / (h.beta_star * (2.0 + i * PI));
        errs.push((nf.g20 * h.dl - limit).norm() / limit.norm());
        let g11 = (nf.g11 * h.dl).norm();
        let sum = ((nf.g20 + nf.g02) * h.dl).norm();
        last = Some((h, nf.s_n, g11, sum));
    }
    let (h, s0, g11, sum) = last.unwrap();
    let pp = h.g.inner_product(&h.ep.phi, &h.ep.phi_star).unwrap();
    let s_limit = Complex64::new(1.0, PI / 2.0) * pp;
    let s_err = (s0 - s_limit).norm() / s_limit.norm();
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    check(
        monotone && g11 < 0.05 && sum < 0.05 && s_err < 0.05,
        format!(
            "g20 rel errors {:.4} {:.4} {:.4}; at 1.02 |dl g11| {g11:.2e}, |dl(g20+g02)| {sum:.2e}, S0 rel err {s_err:.4}",
            errs[0], errs[1], errs[2]
        ),
    )
}

fn c8_sign_predictions() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, model) in
        [("Hutchinson", GrowthModel::Hutchinson), ("food-limited", GrowthModel::FoodLimited { c: 0.5 })]
    {
        let h = hopf_1d(model, 1.05)?;
        let nf = normal_form(&h.lin, &h.c, 0).map_err(|e| e.to_string())?;
        ok &= nf.c1.re < 0.0 && nf.mu2 > 0.0 && nf.beta2 < 0.0 && nf.orbit_stability == OrbitStability::Stable;
        parts.push(format!("{name} Re C1 {:.3}, mu2 {:.3e}, beta2 {:.3}", nf.c1.re, nf.mu2, nf.beta2));
    }
    let w = hopf_1d(GrowthModel::WeakAllee, 0.95)?;
    let nf = normal_form(&w.lin, &w.c, 0).map_err(|e| e.to_string())?;
    ok &= nf.direction == Direction::Forward && nf.orbit_stability == OrbitStability::Unstable;
    parts.push(format!("weak Allee {:?}/{:?}", nf.direction, nf.orbit_stability));

    let h = hopf_1d(GrowthModel::Hutchinson, 1.05)?;
    let base = normal_form(&h.lin, &h.c, 0).map_err(|e| e.to_string())?.c1;
    let mut worst = 0.0f64;
    for (alpha, beta) in [(0.7, 0.0), (0.0, -1.3), (2.1, 0.4)] {
        let mut c = h.c.clone();
        c.psi.iter_mut().for_each(|z| *z *= Complex64::from_polar(1.0, alpha));
        c.psi_tilde.iter_mut().for_each(|z| *z *= Complex64::from_polar(1.0, beta));
        let c1 = normal_form(&h.lin, &c, 0).map_err(|e| e.to_string())?.c1;
        worst = worst.max((c1 - base).norm() / base.norm());
    }
    ok &= worst < 1e-8;
    parts.push(format!("gauge drift {worst:.1e}"));
    check(ok, parts.join("; "))
}

fn c9_simulation_consistency() -> Outcome {
    let h = hopf_1d(GrowthModel::Hutchinson, 1.1)?;
    let tau0 = h.c.tau(0);
    let probe = [PI / 2.0, 0.0];
    let node = h.g.nearest_interior(probe).unwrap();
    let (g, op) = interval(199, 0.0);
    let history: Vec<f64> = h.lin.u.iter().zip(g.nodes()).map(|(u, x)| u + 0.01 * x[0].sin()).collect();
    let base = SimConfig::new(1.1, tau0, 0.05, 3000.0, vec![probe]);
    let taus: Vec<f64> = [0.8, 0.9, 1.1, 1.2].iter().map(|s| s * tau0).collect();
    let obs = Observation { probe: 0, reference: h.lin.u[node], transient_fraction: 0.5 };
    let rep = threshold_scan(&g, &op, &GrowthModel::Hutchinson, &base, &history, &taus, &|_| 0.05, obs)
        .map_err(|e| e.to_string())?;
    let first = rep.rows[0].verdict;
    let last = rep.rows[3].verdict;
    let contains = rep.flip.is_some_and(|(a, b)| a < tau0 && tau0 < b);
    let verdicts: Vec<&str> = rep.rows.iter().map(|r| r.verdict.as_str()).collect();
    check(
        first == Verdict::Decayed && last == Verdict::Periodic && contains,
        format!("tau0 {tau0:.3}; verdicts at 0.8/0.9/1.1/1.2 tau0: {}; flip {:?}", verdicts.join(" "), rep.flip),
    )
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cli(args: &[&str], config: &Path) -> Result<Value, String> {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_delayhopf"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr).trim()));
    }
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

fn c10_disk_food_limited() -> Outcome {
    let r = cli(&["simulate"], &configs_dir().join("disk_food_limited.json"))?;
    let runs = r["runs"].as_array().ok_or("no runs")?;
    let at = |tau: f64| runs.iter().find(|x| x["tau"].as_f64() == Some(tau)).map(|x| &x["verdicts"][0]);
    let (v8, v12, v20) =
        (at(8.0).ok_or("tau 8 missing")?, at(12.0).ok_or("tau 12 missing")?, at(20.0).ok_or("tau 20 missing")?);
    let num = |v: &Value, k: &str| v[k].as_f64().unwrap_or(f64::NAN);
    let ok = v8["verdict"] == "steady_nonzero"
        && v12["verdict"] == "periodic"
        && v20["verdict"] == "periodic"
        && num(v20, "amplitude") > num(v12, "amplitude")
        && num(v20, "period") > num(v12, "period");
    let line: Vec<String> = runs
        .iter()
        .map(|x| {
            let v = &x["verdicts"][0];
            format!(
                "tau {} {} (amp {:.4}, period {:.1})",
                x["tau"],
                v["verdict"].as_str().unwrap_or("?"),
                num(v, "amplitude"),
                num(v, "period")
            )
        })
        .collect();
    check(ok, line.join("; "))
}

/// Hopf point of the large steady state the weak-Allee disk runs settle on, for
/// the diagnosis printed when the scan misses the expected bracket.
fn upper_branch_tau0(n: usize) -> Result<f64, String> {
    let model = GrowthModel::WeakAllee;
    let (g, op) = disk(n, &model);
    let cfg = SimConfig::new(0.8, 1.5, 0.05, 300.0, vec![[PI, PI]]);
    let sim = simulate(&g, &op, &model, &cfg, &vec![0.4; g.len()]).map_err(|e| e.to_string())?;
    let sol = newton_steady(&g, &op, &model, 0.8, &sim.final_state, 1e-3, &NewtonOptions::default())
        .map_err(|e| e.to_string())?;
    let lin = Linearization::new(&g, &op, &model, 0.8, &sol.u).map_err(|e| e.to_string())?;
    let c = find_hopf_crossing(&lin, &sol.u, &sol.u, &CrossingOptions::new(0.17, 0.0)).map_err(|e| e.to_string())?;
    Ok(c.tau(0))
}

fn c11_disk_weak_allee() -> Outcome {
    let r = cli(&["scan"], &configs_dir().join("disk_weak_allee.json"))?;
    let rows = r["rows"].as_array().ok_or("no rows")?;
    let verdicts: Vec<String> =
        rows.iter().map(|x| format!("{} {}", x["tau"], x["verdict"].as_str().unwrap_or("?"))).collect();
    let flip = r["flip"].as_array().map(|f| (f[0].as_f64().unwrap_or(f64::NAN), f[1].as_f64().unwrap_or(f64::NAN)));
    let ok = flip == Some((5.5, 9.5));
    let mut detail = format!("verdicts {}; flip {:?}", verdicts.join(", "), flip);
    if !ok {
        match upper_branch_tau0(64) {
            Ok(t) => {
                detail.push_str(&format!("; Hopf delay of the attracting steady state on this 64x64 grid is {t:.2}"))
            }
            Err(e) => detail.push_str(&format!("; upper-branch Hopf delay unavailable: {e}")),
        }
    }
    check(ok, detail)
}

fn c12_dense_oracle() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let disk_cfg = dir.path().join("disk.json");
    let mut cfg: Value =
        serde_json::from_str(&std::fs::read_to_string(configs_dir().join("disk_food_limited.json")).unwrap()).unwrap();
    cfg["grid"] = serde_json::json!({ "n": 40 });
    std::fs::write(&disk_cfg, cfg.to_string()).unwrap();
    let interval_cfg = configs_dir().join("hutchinson_1d.json");
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut take = |v: &Value| {
        if let Some(d) = v["abs_diff"].as_f64() {
            worst = worst.max(d);
            count += 1;
        }
    };
    for (cmd, path) in [
        ("eig", &interval_cfg),
        ("steady", &interval_cfg),
        ("hopf", &interval_cfg),
        ("eig", &disk_cfg),
        ("hopf", &disk_cfg),
    ] {
        let r = cli(&[cmd, "--dense-oracle"], path).map_err(|e| format!("{cmd} {}: {e}", path.display()))?;
        take(&r["dense_oracle"]);
        for e in r["results"].as_array().into_iter().flatten() {
            e["dense_oracle"].as_array().into_iter().flatten().for_each(&mut take);
        }
    }
    check(count >= 10 && worst < 1e-8, format!("{count} eigenvalues checked, max |sparse - dense| {worst:.2e}"))
}

fn main() {
    type Criterion = (u32, &'static str, fn() -> Outcome, Duration);
    let secs = Duration::from_secs;
    let criteria: [Criterion; 12] = [
        (1, "eigenvalue accuracy", c1_eigenvalue_accuracy, secs(1)),
        (2, "advection shift", c2_advection_shift, secs(1)),
        (3, "adjoint identity", c3_adjoint_identity, secs(1)),
        (4, "branch asymptotics", c4_branch_asymptotics, secs(5)),
        (5, "Hopf asymptotics", c5_hopf_asymptotics, secs(30)),
        (6, "transversality", c6_transversality, secs(30)),
        (7, "normal-form limits", c7_normal_form_limits, secs(60)),
        (8, "sign predictions", c8_sign_predictions, secs(60)),
        (9, "simulation-theory consistency", c9_simulation_consistency, secs(120)),
        (10, "disk food-limited thresholds", c10_disk_food_limited, secs(600)),
        (11, "disk weak-Allee threshold", c11_disk_weak_allee, secs(600)),
        (12, "dense-oracle equivalence", c12_dense_oracle, secs(120)),
    ];
    let mut failed = Vec::new();
    for (id, name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if took <= limit => (true, d),
            Ok(d) => (false, format!("{d}; took {:.1}s, limit {}s", took.as_secs_f64(), limit.as_secs())),
            Err(d) => (false, d),
        };
        println!(
            "criterion {id:>2} {} {name} [{:.1}s] {detail}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
        if !pass {
            failed.push(id);
        }
    }
    println!("acceptance: {}/12 criteria pass", 12 - failed.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
