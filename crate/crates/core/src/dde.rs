//! Method-of-lines integration of the delayed equation and diagnosis of the
//! long-time behaviour.
//!
//! The default step is IMEX BDF2: implicit in the transport part, with the
//! delayed reaction extrapolated,
//! `(3/2 I − Δt A) u^{k+1} = 2u^k − ½u^{k−1} + Δt (2N^k − N^{k−1})`,
//! `N^k = λ u^k ∘ f(x, u^{k−K})`, and `K Δt = τ` exactly so the delayed state
//! is read from a ring buffer without interpolation. The first-order variant
//! `(I − Δt A) u^{k+1} = u^k + Δt N^k` damps the Hopf mode by `O(Δt)`, which
//! at practical steps is comparable to the growth rate just past threshold.

use std::collections::VecDeque;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{BandLu, CsrMatrix};
use crate::models::GrowthModel;
use crate::operators::DiscreteOperator;
use crate::scalar::Real;

/// Sup norm beyond which a run is declared divergent.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Minimum prominence of an oscillation.
pub const AMP_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    /// First order: implicit Euler transport, explicit reaction.
    ImexEuler,
    /// Second order: BDF2 transport, extrapolated reaction.
    #[default]
    ImexBdf2,
}

#[derive(Debug, Clone)]
pub struct SimConfig<T> {
    pub scheme: TimeScheme,
    pub lambda: T,
    pub tau: T,
    /// Requested step; snapped down so that `τ/Δt` is an integer.
    pub dt: T,
    pub t_end: T,
    pub probes: Vec<[T; 2]>,
    pub snapshot_times: Vec<T>,
    /// Record probes every this many steps.
    pub sample_stride: usize,
}

impl<T: Real> SimConfig<T> {
    pub fn new(lambda: T, tau: T, dt: T, t_end: T, probes: Vec<[T; 2]>) -> Self {
        SimConfig {
            scheme: TimeScheme::default(),
            lambda,
            tau,
            dt,
            t_end,
            probes,
            snapshot_times: Vec::new(),
            sample_stride: 1,
        }
    }
}

/// `τ/200`, or a tenth of a time unit when there is no delay.
pub fn default_dt<T: Real>(tau: T) -> T {
    if tau > T::zero() {
        tau / T::lit(200.0)
    } else {
        T::lit(0.1)
    }
}

/// Largest step `≤ dt` that divides `τ`, with the number of steps per delay.
pub fn snap_dt<T: Real>(tau: T, dt: T) -> Result<(T, usize)> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::InvalidStep(format!("dt = {dt} must be positive")));
    }
    if !(tau >= T::zero()) || !tau.is_finite() {
        return Err(Error::InvalidStep(format!("tau = {tau} must be non-negative")));
    }
    if tau == T::zero() {
        return Ok((dt, 0));
    }
    // Rounding guard so that an exact divisor is not pushed to the next K.
    let k = (tau / dt * (T::one() - T::lit(8.0) * T::epsilon())).ceil().max(T::one());
    let k_usize = k.to_usize().ok_or_else(|| Error::InvalidStep(format!("tau/dt = {k} too large")))?;
    Ok((tau / k, k_usize))
}

/// Probe samples on a uniform time grid.
#[derive(Debug, Clone)]
pub struct TimeSeries<T> {
    pub probes: Vec<[T; 2]>,
    /// Interior node sampled for each probe.
    pub nodes: Vec<usize>,
    pub t: Vec<T>,
    /// `values[p][i]` is probe `p` at `t[i]`.
    pub values: Vec<Vec<T>>,
}

impl<T: Real> TimeSeries<T> {
    /// Header `t,probe_1,...,probe_k`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "t")?;
        for p in 1..=self.values.len() {
            write!(out, ",probe_{p}")?;
        }
        writeln!(out)?;
        for (i, t) in self.t.iter().enumerate() {
            write!(out, "{t}")?;
            for v in &self.values {
                write!(out, ",{}", v[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Probe `p` minus a reference value, e.g. a steady state at that node.
    pub fn deviation(&self, p: usize, reference: T) -> Vec<T> {
        self.values[p].iter().map(|&v| v - reference).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot<T> {
    pub t: T,
    pub u: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct Simulation<T> {
    pub series: TimeSeries<T>,
    pub snapshots: Vec<Snapshot<T>>,
    pub final_state: Vec<T>,
    pub dt: T,
    pub dt_requested: T,
    pub steps: usize,
}

fn locate_probes<T: Real>(g: &Grid<T>, probes: &[[T; 2]]) -> Result<Vec<usize>> {
    probes
        .iter()
        .enumerate()
        .map(|(index, &p)| {
            g.nearest_interior(p)
                .ok_or(Error::ProbeOutside { index, point: [p[0].to_f64_lossy(), p[1].to_f64_lossy()] })
        })
        .collect()
}

/// Integrates from the constant-in-time history `history` on `[−τ, 0]`.
pub fn simulate<T: Real>(
    g: &Grid<T>,
    op: &DiscreteOperator<T>,
    model: &GrowthModel<T>,
    cfg: &SimConfig<T>,
    history: &[T],
) -> Result<Simulation<T>> {
    g.check(history.len())?;
    if !(cfg.t_end > T::zero()) || !cfg.t_end.is_finite() {
        return Err(Error::InvalidStep(format!("t_end = {} must be positive", cfg.t_end)));
    }
    if cfg.tau > T::zero() && !(cfg.t_end > cfg.tau) {
        return Err(Error::InvalidStep(format!("t_end = {} must exceed tau = {}", cfg.t_end, cfg.tau)));
    }
    let (dt, k) = snap_dt(cfg.tau, cfg.dt)?;
    let nodes = locate_probes(g, &cfg.probes)?;
    let steps = (cfg.t_end / dt).round().to_usize().unwrap_or(0).max(1);
    let stride = cfg.sample_stride.max(1);

    let n = g.len();
    let bdf2 = cfg.scheme == TimeScheme::ImexBdf2;
    let lead = if bdf2 { T::lit(1.5) } else { T::one() };
    let implicit: CsrMatrix<T> = op.a.scaled(-dt).add_diagonal(&vec![lead; n]);
    let lu = BandLu::factor(&implicit);
    if lu.has_zero_pivot() {
        return Err(Error::NearSingular { cond: f64::INFINITY });
    }
    let points: Vec<[T; 2]> = g.points().collect();

    let mut snap_steps: Vec<(usize, T)> =
        cfg.snapshot_times.iter().map(|&t| ((t / dt).round().to_usize().unwrap_or(0).min(steps), t)).collect();
    snap_steps.sort_by_key(|s| s.0);
    let mut snap_iter = snap_steps.into_iter().peekable();
    let mut snapshots = Vec::new();

    // Holds u^{k−K−1} ..= u^k; the constant history makes u^{−1} exact.
    let len = k + 2;
    let mut ring: VecDeque<Vec<T>> = (0..len).map(|_| history.to_vec()).collect();
    let mut series = TimeSeries {
        probes: cfg.probes.clone(),
        nodes: nodes.clone(),
        t: Vec::with_capacity(steps / stride + 1),
        values: vec![Vec::with_capacity(steps / stride + 1); nodes.len()],
    };
    let record = |series: &mut TimeSeries<T>, t: T, u: &[T]| {
        series.t.push(t);
        for (p, &node) in nodes.iter().enumerate() {
            series.values[p].push(u[node]);
        }
    };
    record(&mut series, T::zero(), history);
    let bound = T::lit(DIVERGENCE_BOUND);
    let (two, half) = (T::lit(2.0), T::lit(0.5));
    let reaction = |u: T, lagged: T, p: [T; 2]| -> Result<T> { Ok(cfg.lambda * u * model.eval(p, lagged)?.f) };
    let mut next = vec![T::zero(); n];
    // N^{k−1}, only used by the second-order scheme.
    let mut n_prev = vec![T::zero(); n];
    if bdf2 {
        for i in 0..n {
            n_prev[i] = reaction(history[i], history[i], points[i])?;
        }
    }
    for step in 0..steps {
        while let Some(&(s, t)) = snap_iter.peek() {
            if s != step {
                break;
            }
            snapshots.push(Snapshot { t, u: ring[len - 1].clone() });
            snap_iter.next();
        }
        let (cur, delayed) = (&ring[len - 1], &ring[len - 1 - k]);
        if bdf2 {
            let prev = &ring[len - 2];
            for i in 0..n {
                let nk = reaction(cur[i], delayed[i], points[i])?;
                next[i] = two * cur[i] - half * prev[i] + dt * (two * nk - n_prev[i]);
                n_prev[i] = nk;
            }
        } else {
            for i in 0..n {
                next[i] = cur[i] + dt * reaction(cur[i], delayed[i], points[i])?;
            }
        }
        lu.solve_in_place(&mut next);
        let sup = next.iter().fold(T::zero(), |a, &b| if b.abs() > a || !b.is_finite() { b.abs() } else { a });
        let t = dt * T::from_usize(step + 1).unwrap();
        if !(sup <= bound) {
            return Err(Error::Divergence { t: t.to_f64_lossy(), sup: sup.to_f64_lossy() });
        }
        let mut slot = ring.pop_front().expect("ring is never empty");
        std::mem::swap(&mut slot, &mut next);
        ring.push_back(slot);
        if (step + 1) % stride == 0 {
            record(&mut series, t, &ring[len - 1]);
        }
    }
    let final_state = ring.back().expect("ring is never empty").clone();
    for (_, t) in snap_iter {
        snapshots.push(Snapshot { t, u: final_state.clone() });
    }
    Ok(Simulation { series, snapshots, final_state, dt, dt_requested: cfg.dt, steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Decayed,
    SteadyNonzero,
    Periodic,
    Undetermined,
}

impl Verdict {
    /// Converges to a steady state (zero or not).
    pub fn is_settled(self) -> bool {
        matches!(self, Verdict::Decayed | Verdict::SteadyNonzero)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Decayed => "decayed",
            Verdict::SteadyNonzero => "steady_nonzero",
            Verdict::Periodic => "periodic",
            Verdict::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillationVerdict {
    pub verdict: Verdict,
    /// `(max − min)/2` over the tail.
    pub amplitude: f64,
    /// Mean peak spacing; NaN unless periodic.
    pub period: f64,
    /// Start time of the analysed tail.
    pub transient_used: f64,
}

/// Peak times of the cycles between successive upward passages through
/// `mean + hyst`, each after a downward passage through `mean − hyst`.
fn cycle_peaks(t: &[f64], y: &[f64], mean: f64, hyst: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut armed = false;
    let mut start: Option<usize> = None;
    for i in 0..y.len() {
        if y[i] < mean - hyst {
            armed = true;
        } else if armed && y[i] > mean + hyst {
            armed = false;
            if let Some(s) = start {
                let hi = (s..i).fold(s, |h, j| if y[j] > y[h] { j } else { h });
                out.push(refine_peak(t, y, hi));
            }
            start = Some(i);
        }
    }
    out
}

/// Parabolic refinement of a sampled maximum.
fn refine_peak(t: &[f64], y: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= y.len() {
        return t[i];
    }
    let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        return t[i];
    }
    let off = 0.5 * (a - c) / den;
    t[i] + off.clamp(-1.0, 1.0) * 0.5 * (t[i + 1] - t[i - 1])
}

/// Classifies the tail of one scalar series.
pub fn diagnose_oscillation<T: Real>(t: &[T], y: &[T], transient_fraction: T) -> OscillationVerdict {
    let t: Vec<f64> = t.iter().map(|v| v.to_f64_lossy()).collect();
    let y: Vec<f64> = y.iter().map(|v| v.to_f64_lossy()).collect();
    let frac = transient_fraction.to_f64_lossy().clamp(0.0, 1.0);
    let undetermined = |t0: f64| OscillationVerdict {
        verdict: Verdict::Undetermined,
        amplitude: f64::NAN,
        period: f64::NAN,
        transient_used: t0,
    };
    if t.len() != y.len() || t.len() < 2 {
        return undetermined(f64::NAN);
    }
    let t0 = t[0] + frac * (t[t.len() - 1] - t[0]);
    let first = t.partition_point(|&s| s < t0);
    let (tt, yt) = (&t[first..], &y[first..]);
    if yt.len() < 2 {
        return undetermined(t0);
    }
    let max = yt.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = yt.iter().copied().fold(f64::INFINITY, f64::min);
    let amplitude = 0.5 * (max - min);
    let settled = |level: f64| if level.abs() > 10.0 * AMP_TOL { Verdict::SteadyNonzero } else { Verdict::Decayed };
    let end = yt[yt.len() - 1];
    let mk = |verdict, period| OscillationVerdict { verdict, amplitude, period, transient_used: t0 };
    if !amplitude.is_finite() {
        return undetermined(t0);
    }
    if amplitude < AMP_TOL {
        let mean = yt.iter().sum::<f64>() / yt.len() as f64;
        return mk(settled(mean), f64::NAN);
    }
    let mean = yt.iter().sum::<f64>() / yt.len() as f64;
    let cyc = cycle_peaks(tt, yt, mean, (0.5 * AMP_TOL).max(0.05 * amplitude));
    if cyc.len() == 2 {
        return mk(Verdict::Undetermined, f64::NAN);
    }
    if cyc.len() < 2 {
        // Not oscillating: a monotone approach to a level. The second half
        // of the tail must shrink (decayed) or stay flat (steady).
        let mid = tt.partition_point(|&s| s < 0.5 * (tt[0] + tt[tt.len() - 1]));
        let (first_half, second) = (&yt[..mid.max(1)], &yt[mid.min(yt.len() - 1)..]);
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let smax = second.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let smin = second.iter().copied().fold(f64::INFINITY, f64::min);
        let (s1, s2) = (sup(first_half), sup(second));
        if s2 <= 10.0 * AMP_TOL || (s2 < 0.5 * s1 && end.abs() < 0.5 * s2.max(AMP_TOL) + AMP_TOL) {
            return mk(Verdict::Decayed, f64::NAN);
        }
        if smax - smin < 2.0 * AMP_TOL.max(0.05 * amplitude) {
            return mk(Verdict::SteadyNonzero, f64::NAN);
        }
        return mk(Verdict::Undetermined, f64::NAN);
    }
    let intervals: Vec<f64> = cyc.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_iv = intervals.iter().sum::<f64>() / intervals.len() as f64;
    let spread = (intervals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - intervals.iter().copied().fold(f64::INFINITY, f64::min))
        / mean_iv;
    // Cycles fade below the hysteresis while a damped tail keeps going, so
    // decay is judged on the whole tail: range of the last third against
    // the first. With at least three cycles each third spans about a period.
    let third = yt.len() / 3;
    let range = |v: &[f64]| {
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let decay = range(&yt[yt.len() - third..]) / range(&yt[..third]);
    if decay < 0.5 {
        // Damped oscillation: report the level it settles on.
        let last = &yt[yt.len() - (yt.len() / 10).max(1)..];
        let level = last.iter().sum::<f64>() / last.len() as f64;
        return mk(settled(level), f64::NAN);
    }
    if spread < 0.1 {
        return mk(Verdict::Periodic, mean_iv);
    }
    mk(Verdict::Undetermined, f64::NAN)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanRow {
    pub tau: f64,
    pub verdict: Verdict,
    pub amplitude: f64,
    pub period: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// First consecutive pair `(τ_a, τ_b)` with a settled verdict at `τ_a`
    /// and a periodic one at `τ_b`; `None` when there is no threshold.
    pub flip: Option<(f64, f64)>,
}

impl ScanReport {
    /// Header `tau,verdict,amplitude,period`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "tau,verdict,amplitude,period")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.tau, r.verdict.as_str(), r.amplitude, r.period)?;
        }
        Ok(())
    }
}

/// What is observed in a scan: probe index and the reference subtracted
/// from it (the steady state at that node, or zero).
#[derive(Debug, Clone, Copy)]
pub struct Observation<T> {
    pub probe: usize,
    pub reference: T,
    pub transient_fraction: T,
}

impl<T: Real> Default for Observation<T> {
    fn default() -> Self {
        Observation { probe: 0, reference: T::zero(), transient_fraction: T::lit(0.5) }
    }
}

/// Simulates and diagnoses each `τ` concurrently. `dt_for` gives the
/// requested step for a delay.
#[allow(clippy::too_many_arguments)]
pub fn threshold_scan<T: Real>(
    g: &Grid<T>,
    op: &DiscreteOperator<T>,
    model: &GrowthModel<T>,
    base: &SimConfig<T>,
    history: &[T],
    taus: &[T],
    dt_for: &(dyn Fn(T) -> T + Sync),
    obs: Observation<T>,
) -> Result<ScanReport> {
    if taus.len() < 2 {
        return Err(Error::InvalidStep("a scan needs at least two delays".into()));
    }
    let mut sorted = taus.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let rows: Vec<ScanRow> = sorted
        .par_iter()
        .map(|&tau| {
            let cfg = SimConfig { tau, dt: dt_for(tau), snapshot_times: Vec::new(), ..base.clone() };
            let sim = simulate(g, op, model, &cfg, history)?;
            let y = sim.series.deviation(obs.probe, obs.reference);
            let v = diagnose_oscillation(&sim.series.t, &y, obs.transient_fraction);
            Ok(ScanRow { tau: tau.to_f64_lossy(), verdict: v.verdict, amplitude: v.amplitude, period: v.period })
        })
        .collect::<Result<_>>()?;
    let flip = rows
        .windows(2)
        .find(|w| w[0].verdict.is_settled() && w[1].verdict == Verdict::Periodic)
        .map(|w| (w[0].tau, w[1].tau));
    Ok(ScanReport { rows, flip })
}

#[cfg(test)]
mod tests;
