//! The small-amplitude steady-state branch bifurcating from `u = 0` at
//! `λ = λ*`: bifurcation scalars, predictor, Newton corrector and natural
//! parameter continuation.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{solve_refined, BandLu};
use crate::models::GrowthModel;
use crate::operators::{solve_bordered, DiscreteOperator};
use crate::scalar::Real;
use crate::spectral::{h_ratio, EigenPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `b < 0`: the positive branch lives on `λ > λ*`.
    Lambda2,
    /// `b > 0`: the positive branch lives on `λ < λ*`.
    Lambda1,
    /// `b = 0`: the branch is a pitchfork governed by `λ″(0)`.
    Degenerate,
}

/// Which operator ordering to use for `h″[φ]²`.
///
/// `Printed` is `−2λ* f_u(x,0) L⁻¹Q[φ²]`; `Derived` is `−2λ* L⁻¹Q[f_u(x,0) φ²]`,
/// the expression that follows from `L h″ + Q F″[φ]² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum HOrdering {
    Printed,
    #[default]
    Derived,
}

/// `λ″(0)` under both readings of the `h″` identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaSecond<T> {
    pub printed: T,
    pub derived: T,
}

impl<T: Copy> LambdaSecond<T> {
    pub fn get(&self, ordering: HOrdering) -> T {
        match ordering {
            HOrdering::Printed => self.printed,
            HOrdering::Derived => self.derived,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifurcationScalars<T> {
    pub lambda_star: T,
    /// `∫ m φ φ*`, positive.
    pub a: T,
    /// `λ* ∫ f_u(x,0) φ² φ*`.
    pub b_scalar: T,
    /// `a / (−b)`; absent in the degenerate regime.
    pub beta_star: Option<T>,
    pub h_star: T,
    pub regime: Regime,
    /// Filled in the degenerate regime.
    pub lambda_second: Option<LambdaSecond<T>>,
}

fn quad<T: Real>(g: &Grid<T>, f: impl Fn(usize) -> T) -> T {
    g.weights().iter().enumerate().map(|(k, &w)| w * f(k)).sum()
}

pub fn bifurcation_scalars<T: Real>(
    g: &Grid<T>,
    op: &DiscreteOperator<T>,
    ep: &EigenPair<T>,
    model: &GrowthModel<T>,
) -> Result<BifurcationScalars<T>> {
    g.check(ep.phi.len())?;
    let zero = model.sample(g, &vec![T::zero(); g.len()])?;
    let (phi, phs) = (&ep.phi, &ep.phi_star);
    let m: Vec<T> = zero.iter().map(|e| e.f).collect();
    let a = quad(g, |k| m[k] * phi[k] * phs[k]);
    if !(a > T::zero()) {
        return Err(Error::PositivityViolated(format!("a = {a} is not positive")));
    }
    let b_scalar = ep.lambda_star * quad(g, |k| zero[k].fu * phi[k] * phi[k] * phs[k]);
    let h_star = h_ratio(g, ep, &m)?;
    let tol = T::lit(1e-8) * a.abs();
    let regime = if b_scalar.abs() <= tol {
        Regime::Degenerate
    } else if b_scalar < T::zero() {
        Regime::Lambda2
    } else {
        Regime::Lambda1
    };
    let mut s = BifurcationScalars {
        lambda_star: ep.lambda_star,
        a,
        b_scalar,
        beta_star: (regime != Regime::Degenerate).then(|| a / -b_scalar),
        h_star,
        regime,
        lambda_second: None,
    };
    if regime == Regime::Degenerate {
        s.lambda_second = Some(lambda_second_derivative(g, op, ep, &s, model)?);
    }
    Ok(s)
}

/// `λ″(0) = −(1/3a)(3λ* ∫ f_uu(x,0) φ³φ* + 6λ* ∫ f_u(x,0) φ h″ φ*)`,
/// with `h″` from a bordered solve against `L = A + λ* m`.
pub fn lambda_second_derivative<T: Real>(
    g: &Grid<T>,
    op: &DiscreteOperator<T>,
    ep: &EigenPair<T>,
    s: &BifurcationScalars<T>,
    model: &GrowthModel<T>,
) -> Result<LambdaSecond<T>> {
    if s.regime != Regime::Degenerate {
        return Err(Error::WrongRegime { expected: "degenerate" });
    }
    let ls = ep.lambda_star;
    let zero = model.sample(g, &vec![T::zero(); g.len()])?;
    let fu: Vec<T> = zero.iter().map(|e| e.fu).collect();
    let m: Vec<T> = zero.iter().map(|e| e.f).collect();
    let (phi, phs) = (&ep.phi, &ep.phi_star);
    let l = op.a.add_diagonal(&m.iter().map(|&v| ls * v).collect::<Vec<_>>());
    let w = g.weights();
    let two = T::lit(2.0);

    let phi2: Vec<T> = phi.iter().map(|&p| p * p).collect();
    let inv_phi2 = solve_bordered(&l, phi, phs, w, &phi2)?;
    let h_printed: Vec<T> = inv_phi2.iter().zip(&fu).map(|(&v, &f)| -two * ls * f * v).collect();
    let fphi2: Vec<T> = phi2.iter().zip(&fu).map(|(&p, &f)| f * p).collect();
    let h_derived: Vec<T> = solve_bordered(&l, phi, phs, w, &fphi2)?.into_iter().map(|v| -two * ls * v).collect();

    let cubic = T::lit(3.0) * ls * quad(g, |k| zero[k].fuu * phi[k].powi(3) * phs[k]);
    let value = |h: &[T]| {
        let mixed = T::lit(6.0) * ls * quad(g, |k| fu[k] * phi[k] * h[k] * phs[k]);
        -(cubic + mixed) / (T::lit(3.0) * s.a)
    };
    Ok(LambdaSecond { printed: value(&h_printed), derived: value(&h_derived) })
}

/// Leading-order amplitude `t_λ` of the branch, positive branch for a
/// pitchfork.
pub fn predicted_amplitude<T: Real>(lambda: T, s: &BifurcationScalars<T>, ordering: HOrdering) -> Result<T> {
    let dl = lambda - s.lambda_star;
    match (s.beta_star, s.lambda_second) {
        (Some(beta), _) => Ok(dl * beta),
        (None, Some(l2)) => {
            let l2 = l2.get(ordering);
            let r = T::lit(2.0) * dl / l2;
            if dl == T::zero() {
                Ok(T::zero())
            } else if !(r >= T::zero()) || !r.is_finite() {
                Err(Error::NoRealBranch(format!("2(λ − λ*)/λ″(0) = {r} at λ = {lambda}")))
            } else {
                Ok(r.sqrt())
            }
        }
        (None, None) => Err(Error::BranchUndefined("degenerate regime without λ″(0)".into())),
    }
}

/// `t_λ φ`.
pub fn predict_steady<T: Real>(lambda: T, s: &BifurcationScalars<T>, ep: &EigenPair<T>) -> Result<Vec<T>> {
    let t = predicted_amplitude(lambda, s, HOrdering::default())?;
    Ok(ep.phi.iter().map(|&p| t * p).collect())
}

#[derive(Debug, Clone)]
pub struct SteadyBranchPoint<T> {
    pub lambda: T,
    pub u: Vec<T>,
    pub t_pred: T,
    /// `‖A u + λ u f(x,u)‖_h`.
    pub newton_residual: T,
    pub newton_iters: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions<T> {
    pub max_iterations: usize,
    pub tol: T,
    pub max_halvings: usize,
}

impl<T: Real> Default for NewtonOptions<T> {
    fn default() -> Self {
        NewtonOptions { max_iterations: 25, tol: T::lit(1e-10), max_halvings: 8 }
    }
}

/// Converged Newton iterate.
#[derive(Debug, Clone)]
pub struct NewtonSolution<T> {
    pub u: Vec<T>,
    pub residual: T,
    pub iterations: usize,
}

fn steady_residual<T: Real>(
    g: &Grid<T>,
    op: &DiscreteOperator<T>,
    model: &GrowthModel<T>,
    lambda: T,
    u: &[T],
) -> Result<Vec<T>> {
    let ev = model.sample(g, u)?;
    Ok(op.a.matvec(u).iter().zip(ev.iter().zip(u)).map(|(&au, (e, &ui))| au + lambda * ui * e.f).collect())
}

/// Damped Newton on `F(u) = A u + λ u f(x,u)`.
///
/// Rejects a root with `‖u‖_h ≤ min_norm`; pass a positive `min_norm` when a
/// nontrivial solution is wanted.
pub fn newton_steady<T: Real>(
    g: &Grid<T>,
    op: &DiscreteOperator<T>,
    model: &GrowthModel<T>,
    lambda: T,
    u0: &[T],
    min_norm: T,
    opts: &NewtonOptions<T>,
) -> Result<NewtonSolution<T>> {
    g.check(u0.len())?;
    let mut u = u0.to_vec();
    let mut f = steady_residual(g, op, model, lambda, &u)?;
    let mut r = g.norm(&f);
    // Rounding floor of the residual evaluation.
    let floor = |u: &[T]| T::lit(8.0) * T::epsilon() * op.a.norm1() * g.norm(u);
    let mut iters = 0;
    while !(r <= opts.tol.max(floor(&u))) {
        if iters == opts.max_iterations || !r.is_finite() {
            return Err(Error::NoConvergence { what: "steady-state Newton", iterations: iters });
        }
        iters += 1;
        let ev = model.sample(g, &u)?;
        let diag: Vec<T> = ev.iter().zip(&u).map(|(e, &ui)| lambda * (e.f + ui * e.fu)).collect();
        let j = op.a.add_diagonal(&diag);
        let lu = BandLu::factor(&j);
        if lu.has_zero_pivot() {
            return Err(Error::NearSingular { cond: f64::INFINITY });
        }
        let neg_f: Vec<T> = f.iter().map(|&v| -v).collect();
        let du = solve_refined(&j, &lu, &neg_f);
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<T> = u.iter().zip(&du).map(|(&a, &d)| a + step * d).collect();
            if let Ok(ft) = steady_residual(g, op, model, lambda, &trial) {
                let rt = g.norm(&ft);
                if rt < r {
                    accepted = Some((trial, ft, rt));
                    break;
                }
            }
            step *= T::lit(0.5);
        }
        match accepted {
            Some((nu, nf, nr)) => {
                u = nu;
                f = nf;
                r = nr;
            }
            // No decrease at all: a full step is still the best local model
            // once the residual sits at the rounding floor.
            None if r <= T::lit(1e3) * opts.tol.max(floor(&u)) => break,
            None => return Err(Error::NoConvergence { what: "steady-state Newton", iterations: iters }),
        }
    }
    if !(g.norm(&u) > min_norm) {
        return Err(Error::TrivialSolution);
    }
    Ok(NewtonSolution { u, residual: r, iterations: iters })
}

/// Newton at one `λ` from `u0`, rejecting collapse to `u = 0`.
fn branch_newton<T: Real>(
    g: &Grid<T>,
    op: &DiscreteOperator<T>,
    model: &GrowthModel<T>,
    ep: &EigenPair<T>,
    lambda: T,
    t: T,
    u0: &[T],
) -> Result<SteadyBranchPoint<T>> {
    let floor = T::lit(0.1) * t.abs() * g.norm(&ep.phi);
    let sol = newton_steady(g, op, model, lambda, u0, floor, &NewtonOptions::default())?;
    Ok(SteadyBranchPoint { lambda, u: sol.u, t_pred: t, newton_residual: sol.residual, newton_iters: sol.iterations })
}

fn predictor_amplitude<T: Real>(lambda: T, s: &BifurcationScalars<T>) -> Result<T> {
    let t = predicted_amplitude(lambda, s, HOrdering::default())?;
    if t == T::zero() {
        return Err(Error::BranchUndefined(format!("λ = {lambda} is the bifurcation point")));
    }
    Ok(t)
}

/// Predictor then Newton at one `λ`, rejecting collapse to `u = 0`.
pub fn steady_point<T: Real>(
    g: &Grid<T>,
    op: &DiscreteOperator<T>,
    model: &GrowthModel<T>,
    s: &BifurcationScalars<T>,
    ep: &EigenPair<T>,
    lambda: T,
) -> Result<SteadyBranchPoint<T>> {
    let t = predictor_amplitude(lambda, s)?;
    let u0: Vec<T> = ep.phi.iter().map(|&p| t * p).collect();
    branch_newton(g, op, model, ep, lambda, t, &u0)
}

/// Natural-parameter continuation: the predictor seeds the first point,
/// each later point starts from its predecessor rescaled by the ratio of
/// predicted amplitudes. Unscaled, the predecessor can sit closer to the
/// trivial root than to the branch.
pub fn continue_branch<T: Real>(
    g: &Grid<T>,
    op: &DiscreteOperator<T>,
    model: &GrowthModel<T>,
    s: &BifurcationScalars<T>,
    ep: &EigenPair<T>,
    lambdas: &[T],
) -> Result<Vec<SteadyBranchPoint<T>>> {
    let mut out: Vec<SteadyBranchPoint<T>> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let point = predictor_amplitude(lambda, s).and_then(|t| match out.last() {
            None => steady_point(g, op, model, s, ep, lambda),
            Some(prev) => {
                let scale = t / prev.t_pred;
                let u0: Vec<T> = prev.u.iter().map(|&v| scale * v).collect();
                branch_newton(g, op, model, ep, lambda, t, &u0)
            }
        });
        out.push(point.map_err(|e| Error::AtLambda { lambda: lambda.to_f64_lossy(), source: Box::new(e) })?);
    }
    Ok(out)
}

/// Branch report with header `lambda,t_pred,max_u,l2_u,newton_iters,residual`.
pub fn write_branch_csv<T: Real, W: Write>(g: &Grid<T>, mut out: W, points: &[SteadyBranchPoint<T>]) -> io::Result<()> {
    writeln!(out, "lambda,t_pred,max_u,l2_u,newton_iters,residual")?;
    for p in points {
        let max_u = p.u.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        writeln!(
            out,
            "{},{},{},{},{},{:e}",
            p.lambda,
            p.t_pred,
            max_u,
            g.norm(&p.u),
            p.newton_iters,
            p.newton_residual
        )?;
    }
    Ok(())
}
