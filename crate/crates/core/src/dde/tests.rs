use super::*;
use crate::grid::build_interval_grid;
use crate::operators::{assemble, CoefficientFields};
use crate::spectral::{find_hopf_crossing, principal_eigenpair, CrossingOptions, Linearization};
use crate::steady::{bifurcation_scalars, steady_point};
use std::f64::consts::PI;

fn interval(n: usize) -> (Grid<f64>, DiscreteOperator<f64>) {
    let g = build_interval_grid(0.0, PI, n).unwrap();
    let op = assemble(&g, &CoefficientFields::constant(1.0, &[0.0], 1.0)).unwrap();
    (g, op)
}

/// Hutchinson on (0, π) at λ = 1.1: the steady state and the first Hopf delay.
fn hutchinson(n: usize) -> (Grid<f64>, DiscreteOperator<f64>, Vec<f64>, f64) {
    let (g, op) = interval(n);
    let model = GrowthModel::Hutchinson;
    let ep = principal_eigenpair(&op).unwrap();
    let s = bifurcation_scalars(&g, &op, &ep, &model).unwrap();
    let p = steady_point(&g, &op, &model, &s, &ep, 1.1).unwrap();
    let lin = Linearization::new(&g, &op, &model, 1.1, &p.u).unwrap();
    let c = find_hopf_crossing(&lin, &ep.phi, &ep.phi_star, &CrossingOptions::new(0.1, PI / 2.0)).unwrap();
    (g, op, p.u, c.tau(0))
}

#[test]
fn snapped_step_divides_the_delay() {
    assert_eq!(snap_dt(10.0, 0.05).unwrap(), (0.05, 200));
    let (dt, k) = snap_dt(1.0f64, 0.3).unwrap();
    assert_eq!(k, 4);
    assert!((dt - 0.25).abs() < 1e-15);
    assert_eq!(snap_dt(0.0, 0.1).unwrap(), (0.1, 0));
    let (dt, k) = snap_dt(15.7175, 0.05).unwrap();
    assert!(dt <= 0.05 && (dt * k as f64 - 15.7175).abs() < 1e-12);
    assert!(snap_dt(1.0, 0.0).is_err());
    assert!(snap_dt(-1.0, 0.1).is_err());
    assert_eq!(default_dt(20.0), 0.1);
}

#[test]
fn heat_equation_decays_like_the_first_mode() {
    // λ = 0 leaves u_t = u_xx; sin x decays as e^{−t}.
    let (g, op) = interval(199);
    let history: Vec<f64> = g.points().map(|p| p[0].sin()).collect();
    for scheme in [TimeScheme::ImexEuler, TimeScheme::ImexBdf2] {
        let mut cfg = SimConfig::new(0.0, 0.5, 0.01, 2.0, vec![[PI / 2.0, 0.0]]);
        cfg.scheme = scheme;
        let sim = simulate(&g, &op, &GrowthModel::Hutchinson, &cfg, &history).unwrap();
        let end = *sim.series.values[0].last().unwrap();
        let ratio = end / history[sim.series.nodes[0]];
        assert!((ratio / (-2.0f64).exp() - 1.0).abs() < 0.02, "{scheme:?}: {ratio}");
    }
}

#[test]
fn steady_history_stays_put_below_threshold() {
    let (g, op, u, tau0) = hutchinson(99);
    let cfg = SimConfig::new(1.1, 0.5 * tau0, 0.05, 50.0, vec![[PI / 2.0, 0.0]]);
    let sim = simulate(&g, &op, &GrowthModel::Hutchinson, &cfg, &u).unwrap();
    let drift = sim.final_state.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(drift < 1e-6, "{drift}");
}

#[test]
fn halving_the_step_keeps_the_limit_cycle() {
    let (g, op, u, _) = hutchinson(99);
    let node = g.nearest_interior([PI / 2.0, 0.0]).unwrap();
    let amp = |dt: f64| {
        let cfg = SimConfig::new(1.1, 20.0, dt, 1500.0, vec![[PI / 2.0, 0.0]]);
        let history: Vec<f64> = u.iter().map(|v| v + 0.01).collect();
        let sim = simulate(&g, &op, &GrowthModel::Hutchinson, &cfg, &history).unwrap();
        let v = diagnose_oscillation(&sim.series.t, &sim.series.deviation(0, u[node]), 0.5);
        assert_eq!(v.verdict, Verdict::Periodic);
        v.amplitude
    };
    let (coarse, fine) = (amp(0.1), amp(0.05));
    assert!(((coarse - fine) / fine).abs() < 0.05, "{coarse} vs {fine}");
}

#[test]
fn probes_and_horizons_are_validated() {
    let (g, op) = interval(49);
    let h = vec![0.1; g.len()];
    let outside = SimConfig::new(1.0, 1.0, 0.1, 5.0, vec![[4.0, 0.0]]);
    assert!(matches!(
        simulate(&g, &op, &GrowthModel::Hutchinson, &outside, &h),
        Err(Error::ProbeOutside { index: 0, .. })
    ));
    let short = SimConfig::new(1.0, 5.0, 0.1, 5.0, vec![]);
    assert!(matches!(simulate(&g, &op, &GrowthModel::Hutchinson, &short, &h), Err(Error::InvalidStep(_))));
    assert!(simulate(&g, &op, &GrowthModel::Hutchinson, &short, &h[1..]).is_err());
}

#[test]
fn superlinear_growth_is_reported_as_divergence() {
    let (g, op) = interval(49);
    let model = GrowthModel::CustomPolynomial { coeffs: vec![1.0, 1.0] };
    let cfg = SimConfig::new(5.0, 0.5, 0.01, 20.0, vec![]);
    let err = simulate(&g, &op, &model, &cfg, &vec![1.0; g.len()]).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. }), "{err}");
}

#[test]
fn samples_and_snapshots_follow_the_request() {
    let (g, op) = interval(49);
    let mut cfg = SimConfig::new(1.1, 1.0, 0.1, 10.0, vec![[1.0, 0.0], [2.0, 0.0]]);
    cfg.sample_stride = 5;
    cfg.snapshot_times = vec![5.0, 0.0, 100.0];
    let sim = simulate(&g, &op, &GrowthModel::Hutchinson, &cfg, &vec![0.1; g.len()]).unwrap();
    assert_eq!(sim.steps, 100);
    assert_eq!(sim.series.t.len(), 21);
    assert!((sim.series.t[20] - 10.0).abs() < 1e-12);
    let times: Vec<f64> = sim.snapshots.iter().map(|s| s.t).collect();
    assert_eq!(times, vec![0.0, 5.0, 100.0]);
    assert_eq!(sim.snapshots[2].u, sim.final_state);
    let mut csv = Vec::new();
    sim.series.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t,probe_1,probe_2\n0,"));
    assert_eq!(text.lines().count(), 22);
}

fn series(f: impl Fn(f64) -> f64, t_end: f64, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let t: Vec<f64> = (0..=(t_end / dt) as usize).map(|i| i as f64 * dt).collect();
    let y = t.iter().map(|&s| f(s)).collect();
    (t, y)
}

#[test]
fn sine_is_periodic_with_its_period_and_amplitude() {
    let (t, y) = series(|s| 0.3 * (2.0 * PI * s / 12.0).sin() + 0.5, 600.0, 0.05);
    let v = diagnose_oscillation(&t, &y, 0.5);
    assert_eq!(v.verdict, Verdict::Periodic);
    assert!((v.amplitude / 0.3 - 1.0).abs() < 0.01);
    assert!((v.period / 12.0 - 1.0).abs() < 0.02);
    assert_eq!(v.transient_used, 300.0);
}

#[test]
fn monotone_and_flat_signals_settle() {
    let (t, y) = series(|s| 0.5 * (-s).exp(), 50.0, 0.01);
    assert_eq!(diagnose_oscillation(&t, &y, 0.5).verdict, Verdict::Decayed);
    let (t, y) = series(|_| 0.4, 50.0, 0.01);
    assert_eq!(diagnose_oscillation(&t, &y, 0.5).verdict, Verdict::SteadyNonzero);
    // Slow approach to a nonzero level.
    let (t, y) = series(|s| 0.4 + 0.2 * (-s / 20.0).exp(), 400.0, 0.05);
    assert_eq!(diagnose_oscillation(&t, &y, 0.5).verdict, Verdict::SteadyNonzero);
}

#[test]
fn damped_oscillation_is_not_periodic() {
    // Decays 27% per cycle, as the upper branch of the weak Allee model does
    // just below its threshold.
    let (t, y) = series(|s| 0.4 + 0.01 * (-s / 60.0).exp() * (2.0 * PI * s / 19.0).sin(), 1500.0, 0.05);
    assert_eq!(diagnose_oscillation(&t, &y, 0.5).verdict, Verdict::SteadyNonzero);
    let (t, y) = series(|s| 1e-3 * (-s / 60.0).exp() * (2.0 * PI * s / 19.0).sin(), 1500.0, 0.05);
    assert_eq!(diagnose_oscillation(&t, &y, 0.5).verdict, Verdict::Decayed);
}

#[test]
fn relaxation_cycle_is_periodic() {
    // Long flat troughs near zero with short spikes.
    let (t, y) = series(|s| 0.7 * (((2.0 * PI * s / 107.0).sin() + 1.0) / 2.0).powi(8), 1000.0, 0.05);
    let v = diagnose_oscillation(&t, &y, 0.5);
    assert_eq!(v.verdict, Verdict::Periodic);
    assert!((v.period / 107.0 - 1.0).abs() < 0.02);
}

#[test]
fn short_windows_stay_undetermined() {
    let (t, y) = series(|s| 0.3 * (2.0 * PI * s / 100.0).sin(), 300.0, 0.05);
    assert_eq!(diagnose_oscillation(&t, &y, 0.5).verdict, Verdict::Undetermined);
    assert_eq!(diagnose_oscillation(&[0.0], &[1.0], 0.5).verdict, Verdict::Undetermined);
    assert_eq!(diagnose_oscillation(&[0.0, 1.0], &[1.0], 0.5).verdict, Verdict::Undetermined);
}

#[test]
fn scan_brackets_the_predicted_threshold() {
    let (g, op, u, tau0) = hutchinson(99);
    let node = g.nearest_interior([PI / 2.0, 0.0]).unwrap();
    let history: Vec<f64> = u.iter().map(|v| v + 0.01).collect();
    let base = SimConfig::new(1.1, 1.0, 0.05, 3000.0, vec![[PI / 2.0, 0.0]]);
    let taus: Vec<f64> = [1.3, 0.7, 0.9, 1.1].iter().map(|f| f * tau0).collect();
    let obs = Observation { probe: 0, reference: u[node], transient_fraction: 0.5 };
    let report = threshold_scan(&g, &op, &GrowthModel::Hutchinson, &base, &history, &taus, &|_| 0.05, obs).unwrap();
    let sorted: Vec<f64> = report.rows.iter().map(|r| r.tau).collect();
    assert!(sorted.windows(2).all(|w| w[0] < w[1]));
    let (lo, hi) = report.flip.expect("threshold");
    assert!(lo < tau0 && tau0 < hi, "{lo} {hi} {tau0}");
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("tau,verdict,amplitude,period\n"));
}

#[test]
fn scan_without_periodic_rows_has_no_threshold() {
    let (g, op, u, tau0) = hutchinson(49);
    let base = SimConfig::new(1.1, 1.0, 0.05, 400.0, vec![[PI / 2.0, 0.0]]);
    let taus = [0.2 * tau0, 0.4 * tau0];
    let report =
        threshold_scan(&g, &op, &GrowthModel::Hutchinson, &base, &u, &taus, &|_| 0.05, Observation::default()).unwrap();
    assert!(report.rows.iter().all(|r| r.verdict.is_settled()));
    assert_eq!(report.flip, None);
    assert!(threshold_scan(
        &g,
        &op,
        &GrowthModel::Hutchinson,
        &base,
        &u,
        &taus[..1],
        &|_| 0.05,
        Observation::default()
    )
    .is_err());
}
