//! The five subcommands. Each writes its files under the output directory and
//! returns the JSON summary that is also printed on stdout.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use delayhopf::dde::default_dt;
use delayhopf::dense::{nearest_eigenvalue, DENSE_LIMIT};
use delayhopf::normalform::NormalFormReport;
use delayhopf::scalar::{cis, im};
use delayhopf::spectral::{
    dense_principal_eigenvalue, h_ratio, nearest_eigenpair, to_c64, transversality, CrossingReport,
};
use delayhopf::steady::write_branch_csv;
use delayhopf::{
    bifurcation_scalars, diagnose_oscillation, find_hopf_crossing, normal_form, principal_eigenpair, simulate,
    steady_point, threshold_scan, BifurcationScalars, CrossingOptions, EigenPair, Linearization, Observation, Regime,
    SimConfig, SteadyBranchPoint,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{expression, Baseline, Problem, RunConfig, SimulationConfig};
use crate::error::CliError;

/// Agreement required between the sparse solvers and the dense oracle.
pub const DENSE_TOL: f64 = 1e-8;

pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub dense_oracle: bool,
}

impl Context {
    fn prefix(&self) -> &str {
        &self.config.output.prefix
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.out_dir.join(format!("{}_{suffix}", self.prefix()))
    }

    fn write_with(
        &self,
        suffix: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<PathBuf, CliError> {
        let path = self.path(suffix);
        let io = |source| CliError::Io { path: path.clone(), source };
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        f(&mut w).and_then(|_| w.flush()).map_err(io)?;
        Ok(path)
    }

    fn write_json(&self, suffix: &str, v: &Value) -> Result<PathBuf, CliError> {
        self.write_with(suffix, |w| {
            serde_json::to_writer_pretty(&mut *w, v).map_err(std::io::Error::from)?;
            writeln!(w)
        })
    }
}

fn prepare(ctx: &Context) -> Result<Problem, CliError> {
    std::fs::create_dir_all(&ctx.out_dir).map_err(|source| CliError::Io { path: ctx.out_dir.clone(), source })?;
    let p = Problem::build(&ctx.config)?;
    if ctx.dense_oracle && p.grid.len() > DENSE_LIMIT {
        return Err(CliError::Config(format!(
            "--dense-oracle needs at most {DENSE_LIMIT} unknowns; this grid has {}",
            p.grid.len()
        )));
    }
    Ok(p)
}

fn dense_lambda_star(ctx: &Context, p: &Problem, ep: &EigenPair) -> Result<Option<Value>, CliError> {
    if !ctx.dense_oracle {
        return Ok(None);
    }
    let dense = dense_principal_eigenvalue(&p.op, ep.lambda_star)?;
    Ok(Some(check_dense("lambda_star", ep.lambda_star.into(), dense.into())?))
}

fn check_dense(what: &str, sparse: Complex64, dense: Complex64) -> Result<Value, CliError> {
    let diff = (sparse - dense).norm();
    if !(diff <= DENSE_TOL) {
        return Err(delayhopf::Error::Inconsistency(format!(
            "{what}: sparse {sparse} and dense {dense} differ by {diff:.3e}"
        ))
        .into());
    }
    Ok(json!({ "quantity": what, "sparse": [sparse.re, sparse.im], "dense": [dense.re, dense.im], "abs_diff": diff }))
}

fn eigen(p: &Problem) -> Result<(EigenPair, f64), CliError> {
    let ep = principal_eigenpair(&p.op)?;
    let h = h_ratio(&p.grid, &ep, &p.m)?;
    Ok((ep, h))
}

pub fn eig(ctx: &Context) -> Result<Value, CliError> {
    let p = prepare(ctx)?;
    let (ep, h_star) = eigen(&p)?;
    let dense = dense_lambda_star(ctx, &p, &ep)?;
    let phi = ctx.write_with("phi.csv", |w| p.grid.write_snapshot_csv(w, &ep.phi))?;
    let phi_star = ctx.write_with("phi_star.csv", |w| p.grid.write_snapshot_csv(w, &ep.phi_star))?;
    let report = json!({
        "command": "eig",
        "unknowns": p.grid.len(),
        "lambda_star": ep.lambda_star,
        "h_star": h_star,
        "residual": ep.residual,
        "adjoint_residual": ep.adjoint_residual,
        "lambda_forward": ep.lambda_forward,
        "lambda_adjoint": ep.lambda_adjoint,
        "dense_oracle": dense,
        "files": [phi, phi_star],
    });
    ctx.write_json("eig.json", &report)?;
    Ok(report)
}

fn scalars(p: &Problem, ep: &EigenPair) -> Result<BifurcationScalars, CliError> {
    Ok(bifurcation_scalars(&p.grid, &p.op, ep, &p.model)?)
}

fn max_of(u: &[f64]) -> f64 {
    u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn at_lambda(lambda: f64, e: delayhopf::Error) -> delayhopf::Error {
    match e {
        e @ delayhopf::Error::AtLambda { .. } => e,
        e => delayhopf::Error::AtLambda { lambda, source: Box::new(e) },
    }
}

/// Points are solved independently so one failure does not hide the
/// others; any failure still makes the command fail after the report is
/// written.
pub fn steady(ctx: &Context) -> Result<Value, CliError> {
    let p = prepare(ctx)?;
    let (ep, h_star) = eigen(&p)?;
    let dense = dense_lambda_star(ctx, &p, &ep)?;
    let s = scalars(&p, &ep)?;
    let mut lambdas = ctx.config.analysis.lambdas()?;
    lambdas.sort_by(|a, b| (a - s.lambda_star).abs().total_cmp(&(b - s.lambda_star).abs()));
    let results: Vec<Result<SteadyBranchPoint, delayhopf::Error>> = lambdas
        .par_iter()
        .map(|&l| steady_point(&p.grid, &p.op, &p.model, &s, &ep, l).map_err(|e| at_lambda(l, e)))
        .collect();
    let phi_max = max_of(&ep.phi);
    let mut points = Vec::new();
    let mut rows = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(pt) => {
                let predicted = pt.t_pred * phi_max;
                rows.push(json!({
                    "lambda": pt.lambda,
                    "t_pred": pt.t_pred,
                    "max_u": max_of(&pt.u),
                    "predicted_max_u": predicted,
                    "relative_difference": (max_of(&pt.u) - predicted).abs() / predicted.abs(),
                    "newton_iters": pt.newton_iters,
                    "residual": pt.newton_residual,
                }));
                points.push(pt);
            }
            Err(e) => {
                let lambda = match &e {
                    delayhopf::Error::AtLambda { lambda, .. } => *lambda,
                    _ => f64::NAN,
                };
                rows.push(json!({ "lambda": lambda, "error": e.to_string() }));
                first_err.get_or_insert(e);
            }
        }
    }
    let csv = ctx.write_with("branch.csv", |w| write_branch_csv(&p.grid, w, &points))?;
    let report = json!({
        "command": "steady",
        "lambda_star": s.lambda_star,
        "h_star": h_star,
        "a": s.a,
        "b": s.b_scalar,
        "beta_star": s.beta_star,
        "regime": s.regime,
        "lambda_second": s.lambda_second,
        "points": rows,
        "dense_oracle": dense,
        "files": [csv],
    });
    ctx.write_json("steady.json", &report)?;
    match first_err {
        Some(e) => Err(e.into()),
        None => Ok(report),
    }
}

#[derive(Serialize)]
struct HopfEntry {
    lambda: f64,
    crossing: CrossingReport,
    simplicity_ratio: Option<f64>,
    transversality: Value,
    normal_forms: Vec<NormalFormReport>,
    dense_oracle: Option<Value>,
}

fn hopf_at(
    ctx: &Context,
    p: &Problem,
    ep: &EigenPair,
    s: &BifurcationScalars,
    lambda: f64,
) -> Result<HopfEntry, delayhopf::Error> {
    let n_max = ctx.config.analysis.n_max;
    let pt = steady_point(&p.grid, &p.op, &p.model, s, ep, lambda)?;
    let lin = Linearization::new(&p.grid, &p.op, &p.model, lambda, &pt.u)?;
    let dl = lambda - s.lambda_star;
    // Near λ* the crossing frequency is |λ − λ*| h* and the phase sits at
    // π/2 on the Λ2 side, 3π/2 on the Λ1 side.
    let forward = match s.regime {
        Regime::Lambda2 => true,
        Regime::Lambda1 => false,
        Regime::Degenerate => dl > 0.0,
    };
    let theta = if forward { 0.5 } else { 1.5 } * std::f64::consts::PI;
    let mut opts = CrossingOptions::new(dl.abs() * s.h_star, theta);
    opts.n_max = n_max;
    let c = find_hopf_crossing(&lin, &ep.phi, &ep.phi_star, &opts)?;
    let tr = transversality(&lin, &c, 0)?;
    let normal_forms = (0..=n_max)
        .map(|n| normal_form(&lin, &c, n).map(|nf| NormalFormReport::from(&nf)))
        .collect::<Result<Vec<_>, _>>()?;
    let dense_oracle = if ctx.dense_oracle {
        let m = lin.pencil(cis(-c.theta), Complex64::new(0.0, 0.0));
        let target = im::<f64>() * c.nu;
        let (mu, _) = nearest_eigenpair(&m, target, Some(&c.psi))?;
        let dense = nearest_eigenvalue(&to_c64(&m), target)?;
        Some(json!([
            check_dense("crossing_eigenvalue", mu, dense).map_err(unwrap_numerical)?,
            check_dense("i_nu", target, dense).map_err(unwrap_numerical)?,
        ]))
    } else {
        None
    };
    let simplicity_ratio =
        if p.grid.len() <= DENSE_LIMIT { delayhopf::spectral::simplicity_ratio(&lin, &c).ok() } else { None };
    Ok(HopfEntry {
        lambda,
        crossing: (&c).into(),
        simplicity_ratio,
        transversality: json!({
            "closed_form": [tr.closed_form.re, tr.closed_form.im],
            "finite_difference": tr.finite_difference,
        }),
        normal_forms,
        dense_oracle,
    })
}

fn unwrap_numerical(e: CliError) -> delayhopf::Error {
    match e {
        CliError::Numerical(e) => e,
        other => delayhopf::Error::Inconsistency(other.to_string()),
    }
}

pub fn hopf(ctx: &Context) -> Result<Value, CliError> {
    let p = prepare(ctx)?;
    let (ep, h_star) = eigen(&p)?;
    let dense = dense_lambda_star(ctx, &p, &ep)?;
    let s = scalars(&p, &ep)?;
    let lambdas = ctx.config.analysis.lambdas()?;
    let entries = lambdas
        .par_iter()
        .map(|&l| hopf_at(ctx, &p, &ep, &s, l).map_err(|e| at_lambda(l, e)))
        .collect::<Result<Vec<_>, _>>()?;
    let report = json!({
        "command": "hopf",
        "lambda_star": s.lambda_star,
        "h_star": h_star,
        "regime": s.regime,
        "beta_star": s.beta_star,
        "results": entries,
        "dense_oracle": dense,
    });
    ctx.write_json("hopf.json", &report)?;
    Ok(report)
}

/// Steady state on the branch, needed when the history or the observed
/// reference is `u_λ`.
fn steady_state(p: &Problem, lambda: f64) -> Result<Vec<f64>, CliError> {
    let (ep, _) = eigen(p)?;
    let s = scalars(p, &ep)?;
    Ok(steady_point(&p.grid, &p.op, &p.model, &s, &ep, lambda).map_err(|e| at_lambda(lambda, e))?.u)
}

struct SimSetup {
    lambda: f64,
    history: Vec<f64>,
    probes: Vec<[f64; 2]>,
    /// Reference value at each probe.
    reference: Vec<f64>,
}

fn sim_setup(ctx: &Context, p: &Problem) -> Result<SimSetup, CliError> {
    let sim = &ctx.config.simulation;
    let lambda = sim
        .lambda
        .or(ctx.config.analysis.lambda)
        .ok_or_else(|| CliError::Config("simulation: give `lambda` here or in `analysis`".into()))?;
    if !(0.0..1.0).contains(&sim.transient_fraction) {
        return Err(CliError::Config(format!(
            "simulation.transient_fraction = {} must lie in [0, 1)",
            sim.transient_fraction
        )));
    }
    let probes = p.probes(sim)?;
    if sim.observe >= probes.len() {
        return Err(CliError::Config(format!(
            "simulation.observe = {} but there are {} probes",
            sim.observe,
            probes.len()
        )));
    }
    let needs_steady = sim.history_base == Baseline::Steady || sim.reference == Baseline::Steady;
    let u_lambda = if needs_steady { Some(steady_state(p, lambda)?) } else { None };
    let eta = p.grid.sample(&expression("simulation.eta", &sim.eta)?);
    let history = match (sim.history_base, &u_lambda) {
        (Baseline::Steady, Some(u)) => u.iter().zip(&eta).map(|(a, b)| a + b).collect(),
        _ => eta,
    };
    let reference = probes
        .iter()
        .enumerate()
        .map(|(i, &pt)| {
            let k = p.grid.nearest_interior(pt).ok_or(delayhopf::Error::ProbeOutside { index: i, point: pt })?;
            Ok(match (sim.reference, &u_lambda) {
                (Baseline::Steady, Some(u)) => u[k],
                _ => 0.0,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(SimSetup { lambda, history, probes, reference })
}

fn base_config(sim: &SimulationConfig, setup: &SimSetup, tau: f64) -> SimConfig<f64> {
    let mut cfg =
        SimConfig::new(setup.lambda, tau, sim.dt.unwrap_or_else(|| default_dt(tau)), sim.t_end, setup.probes.clone());
    cfg.scheme = sim.scheme;
    cfg.snapshot_times = sim.snapshot_times.clone();
    cfg.sample_stride = sim.sample_stride;
    cfg
}

fn taus(sim: &SimulationConfig) -> Result<Vec<f64>, CliError> {
    let list = match (&sim.tau_list, sim.tau) {
        (Some(l), _) if !l.is_empty() => l.clone(),
        (_, Some(t)) => vec![t],
        _ => return Err(CliError::Config("simulation: give `tau` or a non-empty `tau_list`".into())),
    };
    if list.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(CliError::Config("simulation: delays must be finite and non-negative".into()));
    }
    Ok(list)
}

fn tau_tag(tau: f64) -> String {
    format!("tau{tau}")
}

fn simulation_entry(
    ctx: &Context,
    p: &Problem,
    setup: &SimSetup,
    tau: f64,
    run: &delayhopf::Simulation,
) -> Result<Value, CliError> {
    let sim = &ctx.config.simulation;
    let tag = tau_tag(tau);
    let series = ctx.write_with(&format!("{tag}_series.csv"), |w| run.series.write_csv(w))?;
    let mut files = vec![series];
    for snap in &run.snapshots {
        files.push(
            ctx.write_with(&format!("{tag}_snapshot_t{}.csv", snap.t), |w| p.grid.write_snapshot_csv(w, &snap.u))?,
        );
    }
    let verdicts: Vec<Value> = (0..setup.probes.len())
        .map(|k| {
            let y = run.series.deviation(k, setup.reference[k]);
            let v = diagnose_oscillation(&run.series.t, &y, sim.transient_fraction);
            json!({
                "probe": setup.probes[k],
                "reference": setup.reference[k],
                "verdict": v.verdict,
                "amplitude": v.amplitude,
                "period": v.period,
                "transient_used": v.transient_used,
            })
        })
        .collect();
    Ok(json!({
        "tau": tau,
        "dt": run.dt,
        "dt_requested": run.dt_requested,
        "steps": run.steps,
        "final_sup": run.final_state.iter().fold(0.0f64, |a, b| a.max(b.abs())),
        "verdicts": verdicts,
        "files": files,
    }))
}

pub fn simulate_cmd(ctx: &Context) -> Result<Value, CliError> {
    let p = prepare(ctx)?;
    let setup = sim_setup(ctx, &p)?;
    let sim = &ctx.config.simulation;
    let list = taus(sim)?;
    let runs = list
        .par_iter()
        .map(|&tau| simulate(&p.grid, &p.op, &p.model, &base_config(sim, &setup, tau), &setup.history))
        .collect::<Result<Vec<_>, _>>()?;
    let entries = list
        .iter()
        .zip(&runs)
        .map(|(&tau, run)| simulation_entry(ctx, &p, &setup, tau, run))
        .collect::<Result<Vec<_>, _>>()?;
    let report = json!({
        "command": "simulate",
        "lambda": setup.lambda,
        "scheme": sim.scheme,
        "runs": entries,
    });
    ctx.write_json("simulate.json", &report)?;
    Ok(report)
}

pub fn scan(ctx: &Context) -> Result<Value, CliError> {
    let p = prepare(ctx)?;
    let setup = sim_setup(ctx, &p)?;
    let sim = &ctx.config.simulation;
    let list = taus(sim)?;
    let base = base_config(sim, &setup, list[0]);
    let fixed = sim.dt;
    let dt_for = move |tau: f64| fixed.unwrap_or_else(|| default_dt(tau));
    let obs = Observation {
        probe: sim.observe,
        reference: setup.reference[sim.observe],
        transient_fraction: sim.transient_fraction,
    };
    let rep = threshold_scan(&p.grid, &p.op, &p.model, &base, &setup.history, &list, &dt_for, obs)?;
    let csv = ctx.write_with("scan.csv", |w| rep.write_csv(w))?;
    let report = json!({
        "command": "scan",
        "lambda": setup.lambda,
        "probe": setup.probes[sim.observe],
        "reference": setup.reference[sim.observe],
        "rows": rep.rows,
        "flip": rep.flip,
        "files": [csv],
    });
    ctx.write_json("scan.json", &report)?;
    Ok(report)
}

pub fn output_dir(cli: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| cfg.output.directory.clone())
        .or_else(|| std::env::var_os(crate::OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("delayhopf_out"))
}
