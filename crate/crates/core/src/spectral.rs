//! Principal eigenpairs, Hopf crossings of the delayed linearization, and
//! the transversality derivative.

use num_complex::{Complex, Complex64};
use num_traits::{One, Zero};
use serde::Serialize;

use crate::dense;
use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::linalg::{BandLu, CsrMatrix};
use crate::models::{GrowthEval, GrowthModel};
use crate::normalform;
use crate::operators::{pencil, DiscreteOperator};
use crate::scalar::{cis, cx, im, Real, Scalar};

const MAX_POWER_ITERATIONS: usize = 10_000;

/// Principal eigenvalue of `−Aφ = λ m φ` with both eigenfunctions.
#[derive(Debug, Clone)]
pub struct EigenPair<T> {
    pub lambda_star: T,
    /// Positive, `∫φ = 1`.
    pub phi: Vec<T>,
    /// Positive, `∫φ* = 1`.
    pub phi_star: Vec<T>,
    /// `‖Aφ + λ* m φ‖_h / ‖φ‖_h`.
    pub residual: T,
    /// Same for `φ*` and `A_adj`.
    pub adjoint_residual: T,
    /// Eigenvalue estimates from the two one-sided iterations.
    pub lambda_forward: T,
    pub lambda_adjoint: T,
}

fn wdot<T: Real>(w: &[T], a: &[T], b: &[T]) -> T {
    w.iter().zip(a.iter().zip(b)).map(|(&w, (&p, &q))| w * p * q).sum()
}

fn wnorm<T: Real, S: Scalar<Real = T>>(w: &[T], a: &[S]) -> T {
    w.iter()
        .zip(a)
        .map(|(&w, v)| {
            let m = v.modulus();
            w * m * m
        })
        .sum::<T>()
        .sqrt()
}

fn eig_target<T: Real>(scale: T) -> T {
    T::lit(64.0) * T::epsilon() * scale
}

fn eig_accept<T: Real>(scale: T) -> T {
    T::lit(4096.0) * T::epsilon() * scale
}

/// Inverse iteration on `(−A − σM)⁻¹ M` from the all-ones vector, followed by
/// shift-invert refinement at the current estimate.
fn principal_vector<T: Real>(a: &CsrMatrix<T>, m: &[T], w: &[T]) -> Result<(T, Vec<T>, T)> {
    let n = a.n_rows();
    let neg_a = a.scaled(-T::one());
    let scale = a.norm1() + m.iter().fold(T::zero(), |p, q| p.max(q.abs()));
    let apply_m = |x: &[T]| -> Vec<T> { x.iter().zip(m).map(|(&p, &q)| p * q).collect() };
    let rayleigh = |x: &[T]| -> T { wdot(w, x, &neg_a.matvec(x)) / wdot(w, x, &apply_m(x)) };
    let residual = |x: &[T], lam: T| -> T {
        let r: Vec<T> = a.matvec(x).iter().zip(m.iter().zip(x)).map(|(&ax, (&mi, &xi))| ax + lam * mi * xi).collect();
        wnorm::<T, T>(w, &r) / wnorm::<T, T>(w, x)
    };
    let normalize = |y: &mut Vec<T>| {
        let s: T = y.iter().copied().sum();
        let big = y.iter().fold(T::zero(), |p, q| p.max(q.abs()));
        let f = if s < T::zero() { -big } else { big };
        for v in y.iter_mut() {
            *v /= f;
        }
    };

    let lu = BandLu::factor(&neg_a);
    if lu.has_zero_pivot() {
        return Err(Error::NearSingular { cond: f64::INFINITY });
    }
    // Power iteration on K + sI, K = (−A)⁻¹M. K has real spectrum and its
    // largest positive eigenvalue is 1/λ*; with an indefinite m the dominant
    // one may be negative, and the shift s = |σ_dominant| fixes that.
    let power = |shift: T| -> (T, Vec<T>, usize) {
        let mut x = vec![T::one(); n];
        let mut lam_old = T::infinity();
        let mut lam = T::zero();
        let mut iters = 0;
        for it in 0..MAX_POWER_ITERATIONS {
            iters = it + 1;
            let mut y = lu.solve(&apply_m(&x));
            for (yi, &xi) in y.iter_mut().zip(&x) {
                *yi += shift * xi;
            }
            normalize(&mut y);
            x = y;
            lam = rayleigh(&x);
            if it >= 3 && (lam - lam_old).abs() <= T::lit(1e-6) * lam.abs() {
                break;
            }
            lam_old = lam;
        }
        (lam, x, iters)
    };
    let (mut lam, mut x, mut iters) = power(T::zero());
    if lam < T::zero() {
        (lam, x, iters) = power(T::one() / lam.abs());
    }
    if !lam.is_finite() {
        return Err(Error::NoConvergence { what: "principal eigenvalue", iterations: iters });
    }

    let mut res = residual(&x, lam);
    let mut best = (res, lam, x.clone());
    'outer: for _ in 0..8 {
        let sigma = lam;
        let shifted = neg_a.add_diagonal(&m.iter().map(|&mi| -sigma * mi).collect::<Vec<_>>());
        let lu = BandLu::factor(&shifted);
        if lu.has_zero_pivot() {
            break;
        }
        for _ in 0..6 {
            let mut y = lu.solve(&apply_m(&x));
            normalize(&mut y);
            if y.iter().any(|v| !v.is_finite()) {
                break 'outer;
            }
            x = y;
            lam = rayleigh(&x);
            res = residual(&x, lam);
            if res < best.0 {
                best = (res, lam, x.clone());
            }
            if res <= eig_target(scale) {
                break 'outer;
            }
        }
    }
    let (res, lam, x) = best;
    if !(res <= eig_accept(scale)) {
        return Err(Error::NoConvergence { what: "principal eigenvector", iterations: iters });
    }
    Ok((lam, x, res))
}

pub fn principal_eigenpair<T: Real>(op: &DiscreteOperator<T>) -> Result<EigenPair<T>> {
    let n = op.a.n_rows();
    check_len(n, op.m.len())?;
    if !op.m.iter().any(|&v| v > T::zero()) {
        return Err(Error::InvalidCoefficient("max m must be positive".into()));
    }
    let w = &op.weights;
    let (lf, mut phi, _) = principal_vector(&op.a, &op.m, w)?;
    let (la, mut phi_star, _) = principal_vector(&op.a_adj, &op.m, w)?;
    for (v, name) in [(&mut phi, "phi"), (&mut phi_star, "phi_star")] {
        if let Some(bad) = v.iter().position(|&x| !(x > T::zero())) {
            return Err(Error::NotPrincipal(format!("{name} has a non-positive entry at node {bad}")));
        }
        let s: T = w.iter().zip(v.iter()).map(|(&a, &b)| a * b).sum();
        for x in v.iter_mut() {
            *x /= s;
        }
    }
    if !(lf > T::zero()) {
        return Err(Error::NotPrincipal(format!("eigenvalue {lf} is not positive")));
    }
    let mphi: Vec<T> = phi.iter().zip(&op.m).map(|(&p, &q)| p * q).collect();
    let lambda_star = -wdot(w, &phi_star, &op.a.matvec(&phi)) / wdot(w, &phi_star, &mphi);
    let agree = T::lit(1e-8).max(T::lit(1e4) * T::epsilon());
    if (lf - la).abs() > agree * lf.abs() {
        return Err(Error::Inconsistency(format!("forward eigenvalue {lf} differs from adjoint {la}")));
    }
    let res = |a: &CsrMatrix<T>, v: &[T]| {
        let r: Vec<T> =
            a.matvec(v).iter().zip(op.m.iter().zip(v)).map(|(&x, (&mi, &vi))| x + lambda_star * mi * vi).collect();
        wnorm::<T, T>(w, &r) / wnorm::<T, T>(w, v)
    };
    Ok(EigenPair {
        lambda_star,
        residual: res(&op.a, &phi),
        adjoint_residual: res(&op.a_adj, &phi_star),
        phi,
        phi_star,
        lambda_forward: lf,
        lambda_adjoint: la,
    })
}

/// `∫ m φ φ* / ∫ φ φ*`, positive for a valid eigenpair.
pub fn h_ratio<T: Real>(g: &Grid<T>, ep: &EigenPair<T>, m: &[T]) -> Result<T> {
    g.check(m.len())?;
    let num = wdot(g.weights(), &ep.phi_star, &ep.phi.iter().zip(m).map(|(&p, &q)| p * q).collect::<Vec<_>>());
    let den = wdot(g.weights(), &ep.phi_star, &ep.phi);
    let h = num / den;
    if !(h > T::zero()) {
        return Err(Error::PositivityViolated(format!("h ratio {h} is not positive")));
    }
    Ok(h)
}

/// Eigenvalue of `m` nearest `seed` with a unit eigenvector.
pub fn rightmost_eigenvalue<T: Real>(
    m: &CsrMatrix<Complex<T>>,
    seed: Complex<T>,
) -> Result<(Complex<T>, Vec<Complex<T>>)> {
    nearest_eigenpair(m, seed, None)
}

/// Shift-invert iteration at `seed`, then Rayleigh-quotient shifts.
/// `start` warm-starts the iteration, e.g. along a continuation path.
pub fn nearest_eigenpair<T: Real>(
    m: &CsrMatrix<Complex<T>>,
    seed: Complex<T>,
    start: Option<&[Complex<T>]>,
) -> Result<(Complex<T>, Vec<Complex<T>>)> {
    let n = m.n_rows();
    let scale = m.norm1().max(T::one());
    let mut x: Vec<Complex<T>> = match start {
        Some(s) => {
            check_len(n, s.len())?;
            s.to_vec()
        }
        None => (0..n)
            .map(|i| {
                let t = T::from_usize(i).unwrap();
                Complex::new(T::one() + T::lit(0.1) * (T::lit(0.7) * t).sin(), T::lit(0.05) * (T::lit(1.3) * t).cos())
            })
            .collect(),
    };
    let unit = |v: &mut Vec<Complex<T>>| {
        let nr = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        for z in v.iter_mut() {
            *z /= nr;
        }
    };
    unit(&mut x);
    let rq = |x: &[Complex<T>]| -> Complex<T> { x.iter().zip(m.matvec(x)).map(|(a, b)| a.conj() * b).sum() };
    let resid = |x: &[Complex<T>], mu: Complex<T>| -> T {
        m.matvec(x).iter().zip(x).map(|(a, b)| (*a - *b * mu).norm_sqr()).sum::<T>().sqrt()
    };
    let factor_at = |sigma: Complex<T>| -> BandLu<Complex<T>> {
        let lu = BandLu::factor(&m.add_diagonal(&vec![-sigma; n]));
        if lu.has_zero_pivot() {
            let bump = Complex::new(T::lit(1e-10) * (T::one() + sigma.norm()), T::zero());
            BandLu::factor(&m.add_diagonal(&vec![-(sigma + bump); n]))
        } else {
            lu
        }
    };
    let mut sigma = seed;
    let mut lu = factor_at(sigma);
    let mut best: Option<(T, Complex<T>, Vec<Complex<T>>)> = None;
    let mut refactors = 0;
    for it in 0..300 {
        let mut y = lu.solve(&x);
        if y.iter().any(|z| !z.finite()) {
            break;
        }
        unit(&mut y);
        x = y;
        let mu = rq(&x);
        let r = resid(&x, mu);
        if best.as_ref().is_none_or(|b| r < b.0) {
            best = Some((r, mu, x.clone()));
        }
        if r <= eig_target(scale) {
            break;
        }
        // Move the shift once the iterate has locked onto the eigenvalue
        // nearest the seed.
        if it >= 2 && refactors < 12 && r <= T::lit(1e-3) * scale && (mu - sigma).norm() > T::epsilon() * scale {
            sigma = mu;
            lu = factor_at(sigma);
            refactors += 1;
        }
    }
    match best {
        Some((r, mu, v)) if r <= eig_accept(scale) => Ok((mu, v)),
        _ => Err(Error::NoConvergence { what: "shift-invert eigenvalue", iterations: 300 }),
    }
}

/// Linearization of the delayed equation at a steady state `u`:
/// `J0 = A + λ diag f(u)`, `J1 = λ diag(u f_u(u))`.
#[derive(Debug, Clone)]
pub struct Linearization<T: Real> {
    pub lambda: T,
    pub u: Vec<T>,
    pub j0: CsrMatrix<T>,
    pub j0_adj: CsrMatrix<T>,
    pub j1: Vec<T>,
    pub growth: Vec<GrowthEval<T>>,
    pub weights: Vec<T>,
}

impl<T: Real> Linearization<T> {
    pub fn new(g: &Grid<T>, op: &DiscreteOperator<T>, model: &GrowthModel<T>, lambda: T, u: &[T]) -> Result<Self> {
        let growth = model.sample(g, u)?;
        let lf: Vec<T> = growth.iter().map(|e| lambda * e.f).collect();
        let j1 = growth.iter().zip(u).map(|(e, &ui)| lambda * ui * e.fu).collect();
        Ok(Linearization {
            lambda,
            u: u.to_vec(),
            j0: op.a.add_diagonal(&lf),
            j0_adj: op.a_adj.add_diagonal(&lf),
            j1,
            growth,
            weights: g.weights().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// `J0 + c J1 − z I`.
    pub fn pencil(&self, c: Complex<T>, z: Complex<T>) -> CsrMatrix<Complex<T>> {
        pencil(&self.j0, &vec![T::zero(); self.len()], c, &self.j1, z)
    }

    /// Adjoint pencil `J0_adj + c J1 − z I`.
    pub fn adjoint_pencil(&self, c: Complex<T>, z: Complex<T>) -> CsrMatrix<Complex<T>> {
        pencil(&self.j0_adj, &vec![T::zero(); self.len()], c, &self.j1, z)
    }

    pub(crate) fn inner(&self, a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
        self.weights.iter().zip(a.iter().zip(b)).map(|(&w, (p, q))| p.conj() * q * w).sum()
    }

    pub(crate) fn norm(&self, a: &[Complex<T>]) -> T {
        wnorm::<T, Complex<T>>(&self.weights, a)
    }
}

/// A purely imaginary eigenvalue `iν` of `J0 + e^{−iθ}J1`.
#[derive(Debug, Clone)]
pub struct HopfCrossing<T> {
    pub lambda: T,
    pub nu: T,
    /// In `[0, 2π)`.
    pub theta: T,
    pub psi: Vec<Complex<T>>,
    pub psi_tilde: Vec<Complex<T>>,
    /// `‖(J0 + e^{−iθ}J1 − iν)ψ‖_h`.
    pub residual: T,
    /// `‖(J0_adj + e^{iθ}J1 + iν)ψ̃‖_h`.
    pub adjoint_residual: T,
    /// `τ_n = (θ + 2nπ)/ν`, `n = 0..=n_max`.
    pub tau_ladder: Vec<T>,
}

impl<T: Real> HopfCrossing<T> {
    pub fn tau(&self, n: usize) -> T {
        (self.theta + T::lit(2.0) * T::PI() * T::from_usize(n).unwrap()) / self.nu
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingReport {
    pub lambda: f64,
    pub nu: f64,
    pub theta: f64,
    pub tau: Vec<f64>,
    pub residual: f64,
}

impl<T: Real> From<&HopfCrossing<T>> for CrossingReport {
    fn from(c: &HopfCrossing<T>) -> Self {
        CrossingReport {
            lambda: c.lambda.to_f64_lossy(),
            nu: c.nu.to_f64_lossy(),
            theta: c.theta.to_f64_lossy(),
            tau: c.tau_ladder.iter().map(|t| t.to_f64_lossy()).collect(),
            residual: c.residual.to_f64_lossy(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CrossingOptions<T> {
    pub nu_seed: T,
    pub theta_seed: T,
    pub n_max: usize,
    pub sweep_points: usize,
    /// Bisection stops once `|Re μ|` falls below this.
    pub tol: T,
}

impl<T: Real> CrossingOptions<T> {
    pub fn new(nu_seed: T, theta_seed: T) -> Self {
        CrossingOptions { nu_seed, theta_seed, n_max: 3, sweep_points: 64, tol: T::lit(1e-10) }
    }
}

struct Branch<T> {
    theta: T,
    mu: Complex<T>,
    v: Vec<Complex<T>>,
}

fn mu_at<T: Real>(
    lin: &Linearization<T>,
    theta: T,
    seed: Complex<T>,
    start: Option<&[Complex<T>]>,
) -> Result<Branch<T>> {
    let m = lin.pencil(cis(-theta), Complex::zero());
    let (mu, v) = nearest_eigenpair(&m, seed, start)?;
    Ok(Branch { theta, mu, v })
}

/// Sweeps `θ` over one period from the seed phase, continuing the eigenvalue
/// that starts near `iν_seed`, and bisects each sign change of `Re μ`.
pub fn find_hopf_crossing<T: Real>(
    lin: &Linearization<T>,
    phi: &[T],
    phi_star: &[T],
    opts: &CrossingOptions<T>,
) -> Result<HopfCrossing<T>> {
    check_len(lin.len(), phi.len())?;
    check_len(lin.len(), phi_star.len())?;
    let two_pi = T::lit(2.0) * T::PI();
    let k = opts.sweep_points.max(4);
    let step = two_pi / T::from_usize(k).unwrap();
    let mut sweep: Vec<Branch<T>> = Vec::with_capacity(k + 1);
    let mut seed = im::<T>() * opts.nu_seed;
    for i in 0..=k {
        let theta = opts.theta_seed + step * T::from_usize(i).unwrap();
        let prev = sweep.last().map(|b| b.v.as_slice());
        let b = mu_at(lin, theta, seed, prev)?;
        seed = b.mu;
        sweep.push(b);
    }
    let re: Vec<T> = sweep.iter().map(|b| b.mu.re).collect();
    let spread = re.iter().fold(T::zero(), |a, &b| a.max(b)) - re.iter().fold(T::zero(), |a, &b| a.min(b));
    let mag = sweep.iter().fold(T::one(), |a, b| a.max(b.mu.norm()));
    if !(spread > T::lit(1e3) * T::epsilon() * mag * lin.j0.norm1().max(T::one())) {
        return Err(Error::NoCrossing);
    }
    let mut wrong_nu = None;
    for i in 0..k {
        let (a, b) = (&sweep[i], &sweep[i + 1]);
        if (a.mu.re > T::zero()) == (b.mu.re > T::zero()) {
            continue;
        }
        let root = bisect(lin, a, b, opts.tol)?;
        if root.mu.im > T::zero() {
            return finish_crossing(lin, root, phi, phi_star, opts.n_max);
        }
        wrong_nu = Some(root.mu.im);
    }
    match wrong_nu {
        Some(nu) => Err(Error::WrongBranch { nu: nu.to_f64_lossy() }),
        None => Err(Error::NoCrossing),
    }
}

fn bisect<T: Real>(lin: &Linearization<T>, a: &Branch<T>, b: &Branch<T>, tol: T) -> Result<Branch<T>> {
    let mut lo = Branch { theta: a.theta, mu: a.mu, v: a.v.clone() };
    let mut hi = Branch { theta: b.theta, mu: b.mu, v: b.v.clone() };
    let lo_positive = lo.mu.re > T::zero();
    for _ in 0..200 {
        let mid_theta = (lo.theta + hi.theta) * T::lit(0.5);
        let mid = mu_at(lin, mid_theta, (lo.mu + hi.mu) * T::lit(0.5), Some(&lo.v))?;
        if mid.mu.re.abs() <= tol
            || (hi.theta - lo.theta).abs() <= T::lit(4.0) * T::epsilon() * (T::one() + mid_theta.abs())
        {
            return Ok(mid);
        }
        if (mid.mu.re > T::zero()) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence { what: "crossing bisection", iterations: 200 })
}

/// Rotates `v` so that `⟨r, v⟩` is real and non-negative, then scales it to
/// `‖v‖_h = ‖r‖_h`.
fn normalize_against<T: Real>(lin: &Linearization<T>, v: &mut [Complex<T>], r: &[T]) {
    let rc: Vec<Complex<T>> = r.iter().map(|&x| cx(x)).collect();
    let c = lin.inner(&rc, v);
    let phase = if c.norm() > T::zero() { c.conj() / c.norm() } else { Complex::one() };
    let s = lin.norm(&rc) / lin.norm(v);
    for z in v.iter_mut() {
        *z = *z * phase * s;
    }
}

fn finish_crossing<T: Real>(
    lin: &Linearization<T>,
    root: Branch<T>,
    phi: &[T],
    phi_star: &[T],
    n_max: usize,
) -> Result<HopfCrossing<T>> {
    let two_pi = T::lit(2.0) * T::PI();
    let theta = root.theta - two_pi * (root.theta / two_pi).floor();
    let nu = root.mu.im;
    let mut psi = root.v;
    normalize_against(lin, &mut psi, phi);
    let inu = im::<T>() * nu;
    let adj = lin.adjoint_pencil(cis(theta), Complex::zero());
    let start: Vec<Complex<T>> = psi.iter().map(|z| z.conj()).collect();
    let (_, mut psi_tilde) = nearest_eigenpair(&adj, -inu, Some(&start))?;
    normalize_against(lin, &mut psi_tilde, phi_star);
    let r = lin.pencil(cis(-theta), inu).matvec(&psi);
    let ra = lin.adjoint_pencil(cis(theta), -inu).matvec(&psi_tilde);
    let tau_ladder = (0..=n_max).map(|n| (theta + two_pi * T::from_usize(n).unwrap()) / nu).collect();
    Ok(HopfCrossing {
        lambda: lin.lambda,
        nu,
        theta,
        residual: lin.norm(&r),
        adjoint_residual: lin.norm(&ra),
        psi,
        psi_tilde,
        tau_ladder,
    })
}

/// `dμ/dτ` at `τ_n` in closed form, with a root-tracking cross-check.
#[derive(Debug, Clone, Copy)]
pub struct Transversality<T> {
    pub closed_form: Complex<T>,
    /// Centered difference of `Re μ(τ)` over `τ_n(1 ± 10⁻³)`.
    pub finite_difference: T,
}

/// Closed form `−iν e^{−iθ}⟨ψ̃, J1ψ⟩ / S_n`.
pub fn transversality_closed_form<T: Real>(
    lin: &Linearization<T>,
    c: &HopfCrossing<T>,
    n: usize,
) -> Result<Complex<T>> {
    let s = normalform::s_n(lin, c, n)?;
    let j1psi: Vec<Complex<T>> = c.psi.iter().zip(&lin.j1).map(|(z, &j)| *z * j).collect();
    let x = lin.inner(&c.psi_tilde, &j1psi);
    Ok(-im::<T>() * c.nu * cis(-c.theta) * x / s)
}

/// Root of `μ ∈ σ(J0 + e^{−μτ}J1)` near `guess`, by complex secant iteration.
pub fn characteristic_root<T: Real>(lin: &Linearization<T>, tau: T, guess: Complex<T>) -> Result<Complex<T>> {
    let mut start: Option<Vec<Complex<T>>> = None;
    let mut g = |mu: Complex<T>| -> Result<Complex<T>> {
        let m = lin.pencil((-mu * tau).exp(), Complex::zero());
        let (ev, v) = nearest_eigenpair(&m, mu, start.as_deref())?;
        start = Some(v);
        Ok(mu - ev)
    };
    let mut x0 = guess;
    let mut g0 = g(x0)?;
    let mut x1 = guess + Complex::new(T::lit(1e-4) * (T::one() + guess.norm()), T::zero());
    let mut g1 = g(x1)?;
    for _ in 0..60 {
        let scale = T::one() + x1.norm();
        if g1.norm() <= T::lit(1e3) * T::epsilon() * scale {
            return Ok(x1);
        }
        let d = g1 - g0;
        if d.norm() == T::zero() {
            break;
        }
        let x2 = x1 - g1 * (x1 - x0) / d;
        x0 = x1;
        g0 = g1;
        x1 = x2;
        g1 = g(x1)?;
    }
    if g1.norm() <= T::lit(1e-9) * (T::one() + x1.norm()) {
        return Ok(x1);
    }
    Err(Error::NoConvergence { what: "characteristic root", iterations: 60 })
}

/// Evaluates the closed form and the finite-difference oracle; their real
/// parts must agree in sign.
pub fn transversality<T: Real>(lin: &Linearization<T>, c: &HopfCrossing<T>, n: usize) -> Result<Transversality<T>> {
    let closed_form = transversality_closed_form(lin, c, n)?;
    let tau = c.tau(n);
    let dt = T::lit(1e-3) * tau;
    let inu = im::<T>() * c.nu;
    let plus = characteristic_root(lin, tau + dt, inu + closed_form * dt)?;
    let minus = characteristic_root(lin, tau - dt, inu - closed_form * dt)?;
    let fd = (plus.re - minus.re) / (dt + dt);
    if (fd > T::zero()) != (closed_form.re > T::zero()) {
        return Err(Error::Inconsistency(format!(
            "closed-form dRe mu/dtau = {} but finite difference gives {fd}",
            closed_form.re
        )));
    }
    Ok(Transversality { closed_form, finite_difference: fd })
}

/// Does `J0 + J1` (the linearization with `τ = 0`) have an eigenvalue with
/// positive real part near the origin?
pub fn zero_delay_unstable<T: Real>(lin: &Linearization<T>) -> Result<bool> {
    let m = lin.pencil(Complex::one(), Complex::zero());
    let (mu, _) = nearest_eigenpair(&m, Complex::zero(), None)?;
    Ok(mu.re > T::lit(1e3) * T::epsilon() * lin.j0.norm1())
}

/// Ratio of the two smallest singular values of `J0 + e^{−iθ}J1 − iν`.
/// Large values certify that `iν` is a simple eigenvalue.
pub fn simplicity_ratio<T: Real>(lin: &Linearization<T>, c: &HopfCrossing<T>) -> Result<f64> {
    let m = to_c64(&lin.pencil(cis(-c.theta), im::<T>() * c.nu));
    let s = dense::singular_values(&m)?;
    if s.len() < 2 {
        return Err(Error::OracleUnavailable("need at least two singular values".into()));
    }
    Ok(s[1] / s[0].max(f64::MIN_POSITIVE))
}

pub fn to_c64<T: Real>(m: &CsrMatrix<Complex<T>>) -> CsrMatrix<Complex64> {
    m.map(|z| Complex64::new(z.re.to_f64_lossy(), z.im.to_f64_lossy()))
}

/// Dense check of the principal eigenvalue: the eigenvalue of `(−A)⁻¹M`
/// nearest `1/λ*`, inverted.
pub fn dense_principal_eigenvalue<T: Real>(op: &DiscreteOperator<T>, lambda_star: T) -> Result<f64> {
    let n = op.a.n_rows();
    if n > dense::DENSE_LIMIT {
        return Err(Error::OracleUnavailable(format!("dimension {n} exceeds {}", dense::DENSE_LIMIT)));
    }
    // Real arithmetic throughout: a real Schur form costs a fraction of the
    // complex one at the same size.
    let mut neg_a = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (i, j, v) in op.a.triplets() {
        neg_a[(i, j)] = -v.to_f64_lossy();
    }
    let mm = nalgebra::DMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        op.m.iter().map(|v| v.to_f64_lossy()),
    ));
    let k = neg_a.lu().solve(&mm).ok_or_else(|| Error::OracleUnavailable("operator is singular".into()))?;
    let ev = k.complex_eigenvalues();
    let target = 1.0 / lambda_star.to_f64_lossy();
    let rho = ev
        .iter()
        .min_by(|p, q| (*p - target).norm().total_cmp(&(*q - target).norm()))
        .copied()
        .ok_or_else(|| Error::OracleUnavailable("empty spectrum".into()))?;
    Ok(1.0 / rho.re)
}

#[cfg(test)]
mod tests;
