//! Center-manifold reduction at a Hopf crossing: the duality scalar `S_n`,
//! the resolvent fields `E` and `F`, the coefficients `g20, g11, g02, g21`
//! and the derived direction and stability quantities.
//!
//! Time is rescaled by `τ_n`, so every coefficient carries a factor `λτ_n`
//! and the history segment is `[−1, 0]`. The duality pairing is never formed;
//! each quantity is reduced to spatial integrals divided by `S_n`.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{relative_residual, solve_refined, BandLu};
use crate::operators::singular_threshold;
use crate::scalar::{cis, im, Real};
use crate::spectral::{transversality, zero_delay_unstable, HopfCrossing, Linearization};

/// Condition estimates beyond this mark a resonant resolvent.
pub const RESONANCE_CONDITION: f64 = 1e12;

type Field<T> = Vec<Complex<T>>;

/// `S_n = ⟨ψ̃, ψ⟩ + τ_n e^{−iθ} ⟨ψ̃, J1 ψ⟩`.
///
/// `J1 = λ u f_u(u)`, so the second term is `λτ_n e^{−iθ}∫ u f_u ψ ψ̃̄`.
pub fn s_n<T: Real>(lin: &Linearization<T>, c: &HopfCrossing<T>, n: usize) -> Result<Complex<T>> {
    let j1psi: Field<T> = c.psi.iter().zip(&lin.j1).map(|(z, &j)| *z * j).collect();
    let s = lin.inner(&c.psi_tilde, &c.psi) + cis(-c.theta) * c.tau(n) * lin.inner(&c.psi_tilde, &j1psi);
    if !(s.norm() >= T::lit(1e-10)) {
        return Err(Error::DegenerateDuality { modulus: s.norm().to_f64_lossy() });
    }
    Ok(s)
}

/// A resolvent field with the condition estimate of its matrix.
#[derive(Debug, Clone)]
pub struct Resolvent<T> {
    pub field: Vec<Complex<T>>,
    pub condition: T,
}

fn resonance_limit<T: Real>() -> T {
    T::lit(RESONANCE_CONDITION).min(singular_threshold())
}

fn resolve<T: Real>(lin: &Linearization<T>, c: Complex<T>, z: Complex<T>, rhs: &[Complex<T>]) -> Result<Resolvent<T>> {
    let m = lin.pencil(c, z);
    let lu = BandLu::factor(&m);
    let condition = lu.condition_estimate();
    if !(condition <= resonance_limit()) {
        return Err(Error::Resonance { cond: condition.to_f64_lossy() });
    }
    let field = solve_refined(&m, &lu, rhs);
    let res = relative_residual(&m, &field, rhs);
    if !(res <= T::lit(1e-8).max(T::lit(1e4) * T::epsilon())) {
        return Err(Error::Resonance { cond: condition.to_f64_lossy() });
    }
    Ok(Resolvent { field, condition })
}

/// `(J0 + e^{−2iθ}J1 − 2iν) E = −2λ (f_u ψ² e^{−iθ} + ½ u f_uu ψ² e^{−2iθ})`.
pub fn resolvent_e<T: Real>(lin: &Linearization<T>, c: &HopfCrossing<T>) -> Result<Resolvent<T>> {
    let half = T::lit(0.5);
    let (e1, e2) = (cis(-c.theta), cis(-(c.theta + c.theta)));
    let rhs: Field<T> = c
        .psi
        .iter()
        .zip(lin.growth.iter().zip(&lin.u))
        .map(|(p, (g, &u))| {
            let p2 = *p * *p;
            (p2 * e1 * g.fu + p2 * e2 * (half * u * g.fuu)) * (-(lin.lambda + lin.lambda))
        })
        .collect();
    resolve(lin, e2, im::<T>() * (c.nu + c.nu), &rhs)
}

/// `(J0 + J1) F = −λ (f_u (e^{iθ} + e^{−iθ}) |ψ|² + u f_uu |ψ|²)`.
pub fn resolvent_f<T: Real>(lin: &Linearization<T>, c: &HopfCrossing<T>) -> Result<Resolvent<T>> {
    let two_cos = T::lit(2.0) * c.theta.cos();
    let rhs: Field<T> = c
        .psi
        .iter()
        .zip(lin.growth.iter().zip(&lin.u))
        .map(|(p, (g, &u))| Complex::from(-lin.lambda * p.norm_sqr() * (g.fu * two_cos + u * g.fuu)))
        .collect();
    resolve(lin, Complex::from(T::one()), Complex::from(T::zero()), &rhs)
}

/// Quadratic and cubic center-manifold coefficients, with the second-order
/// center-manifold fields at the ends of the history segment.
#[derive(Debug, Clone)]
pub struct GCoefficients<T> {
    pub s_n: Complex<T>,
    pub g20: Complex<T>,
    pub g11: Complex<T>,
    pub g02: Complex<T>,
    pub g21: Complex<T>,
    /// `w20(0)`, `w20(−1)`.
    pub w20: [Vec<Complex<T>>; 2],
    /// `w11(0)`, `w11(−1)`.
    pub w11: [Vec<Complex<T>>; 2],
}

pub fn g_coefficients<T: Real>(
    lin: &Linearization<T>,
    c: &HopfCrossing<T>,
    e: &[Complex<T>],
    f: &[Complex<T>],
    n: usize,
) -> Result<GCoefficients<T>> {
    let len = lin.len();
    crate::error::check_len(len, e.len())?;
    crate::error::check_len(len, f.len())?;
    let s = s_n(lin, c, n)?;
    let tau = c.tau(n);
    let nt = c.nu * tau;
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let i = im::<T>();
    let (em, ep) = (cis(-c.theta), cis(c.theta));
    let (em2, ep2) = (em * em, ep * ep);
    let lt = lin.lambda * tau;

    // ∫ ψ̃̄ q(x) over the grid.
    let against = |q: &dyn Fn(usize) -> Complex<T>| -> Complex<T> {
        (0..len).map(|k| c.psi_tilde[k].conj() * q(k) * lin.weights[k]).sum()
    };
    let psi = &c.psi;
    let gr = &lin.growth;
    let u = &lin.u;

    let g20 = against(&|k| {
        let p2 = psi[k] * psi[k];
        p2 * em * gr[k].fu + p2 * em2 * (half * u[k] * gr[k].fuu)
    }) * (two * lt)
        / s;
    let g11 = against(&|k| {
        let a = psi[k].norm_sqr();
        (em + ep) * (gr[k].fu * a) + Complex::from(u[k] * gr[k].fuu * a)
    }) * lt
        / s;
    let g02 = against(&|k| {
        let p2 = psi[k].conj() * psi[k].conj();
        p2 * ep * gr[k].fu + p2 * ep2 * (half * u[k] * gr[k].fuu)
    }) * (two * lt)
        / s;

    // w(θ) at θ = 0 and θ = −1, where p(−1) = ψ e^{−iθ_λ}.
    let a20 = i * g20 / nt;
    let b20 = i * g02.conj() / (T::lit(3.0) * nt);
    let a11 = -i * g11 / nt;
    let b11 = i * g11.conj() / nt;
    let w20_0: Field<T> = (0..len).map(|k| a20 * psi[k] + b20 * psi[k].conj() + e[k]).collect();
    let w20_m: Field<T> = (0..len).map(|k| a20 * psi[k] * em + b20 * psi[k].conj() * ep + e[k] * em2).collect();
    let w11_0: Field<T> = (0..len).map(|k| a11 * psi[k] + b11 * psi[k].conj() + f[k]).collect();
    let w11_m: Field<T> = (0..len).map(|k| a11 * psi[k] * em + b11 * psi[k].conj() * ep + f[k]).collect();

    let g21 = against(&|k| {
        let (p, pb) = (psi[k], psi[k].conj());
        let pd = p * em;
        let (fu, fuu, fuuu) = (gr[k].fu, gr[k].fuu, gr[k].fuuu);
        let uk = u[k];
        w20_m[k] * pb * ep * (half * uk * fuu)
            + p * em * w11_m[k] * (uk * fuu)
            + (p * w11_m[k] + w11_0[k] * p * em + w20_0[k] * pb * ep * half + pb * w20_m[k] * half) * fu
            + (p * p * pb * two + pb * pd * pd) * (half * fuu)
            + pd * pd * pb * ep * (half * uk * fuuu)
    }) * (two * lt)
        / s;

    Ok(GCoefficients { s_n: s, g20, g11, g02, g21, w20: [w20_0, w20_m], w11: [w11_0, w11_m] })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Periodic orbits exist for `τ > τ_n`.
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitStability {
    Stable,
    Unstable,
}

/// First Lyapunov quantity and its interpretation at `(λ, τ_n)`.
#[derive(Debug, Clone)]
pub struct NormalForm<T> {
    pub lambda: T,
    pub n: usize,
    pub tau_n: T,
    pub nu: T,
    pub theta: T,
    pub s_n: Complex<T>,
    pub e: Vec<Complex<T>>,
    pub f: Vec<Complex<T>>,
    pub e_condition: T,
    pub f_condition: T,
    pub w20: [Vec<Complex<T>>; 2],
    pub w11: [Vec<Complex<T>>; 2],
    pub g20: Complex<T>,
    pub g11: Complex<T>,
    pub g02: Complex<T>,
    pub g21: Complex<T>,
    pub c1: Complex<T>,
    pub mu2: T,
    pub beta2: T,
    pub t2: T,
    pub dmu_dtau: Complex<T>,
    /// Eigenvalues other than the crossing pair lie in the right half-plane.
    pub extra_unstable: bool,
    pub direction: Direction,
    /// Stable only when `β2 < 0` and the center manifold is attracting.
    pub orbit_stability: OrbitStability,
}

/// `C1 = i/(2ντ_n)(g11 g20 − 2|g11|² − |g02|²/3) + g21/2`, then
/// `μ2 = −Re C1 / Re μ'`, `β2 = 2 Re C1`, `T2 = −(Im C1 + μ2 Im μ')/τ_n`.
pub fn hopf_quantities<T: Real>(
    g: GCoefficients<T>,
    c: &HopfCrossing<T>,
    dmu_dtau: Complex<T>,
    n: usize,
    extra_unstable: bool,
) -> Result<NormalForm<T>> {
    if !(dmu_dtau.re.abs() > T::zero()) {
        return Err(Error::DegenerateTransversality);
    }
    let tau = c.tau(n);
    let two = T::lit(2.0);
    let c1 = im::<T>() / (two * c.nu * tau)
        * (g.g11 * g.g20 - Complex::from(two * g.g11.norm_sqr() + g.g02.norm_sqr() / T::lit(3.0)))
        + g.g21 / two;
    let mu2 = -c1.re / dmu_dtau.re;
    let beta2 = two * c1.re;
    let t2 = -(c1.im + mu2 * dmu_dtau.im) / tau;
    let direction = if mu2 > T::zero() { Direction::Forward } else { Direction::Backward };
    let orbit_stability =
        if beta2 < T::zero() && !extra_unstable { OrbitStability::Stable } else { OrbitStability::Unstable };
    Ok(NormalForm {
        lambda: c.lambda,
        n,
        tau_n: tau,
        nu: c.nu,
        theta: c.theta,
        s_n: g.s_n,
        e: Vec::new(),
        f: Vec::new(),
        e_condition: T::nan(),
        f_condition: T::nan(),
        w20: g.w20,
        w11: g.w11,
        g20: g.g20,
        g11: g.g11,
        g02: g.g02,
        g21: g.g21,
        c1,
        mu2,
        beta2,
        t2,
        dmu_dtau,
        extra_unstable,
        direction,
        orbit_stability,
    })
}

/// Full reduction at crossing index `n`: resolvents, coefficients,
/// transversality (with its finite-difference cross-check) and the count of
/// unstable eigenvalues besides the crossing pair.
///
/// For `n ≥ 1` the pairs crossed at `τ_0, …, τ_{n−1}` are already unstable.
pub fn normal_form<T: Real>(lin: &Linearization<T>, c: &HopfCrossing<T>, n: usize) -> Result<NormalForm<T>> {
    let e = resolvent_e(lin, c)?;
    let f = resolvent_f(lin, c)?;
    let g = g_coefficients(lin, c, &e.field, &f.field, n)?;
    let dmu = transversality(lin, c, n)?;
    let extra = n >= 1 || zero_delay_unstable(lin)?;
    let mut nf = hopf_quantities(g, c, dmu.closed_form, n, extra)?;
    nf.e = e.field;
    nf.f = f.field;
    nf.e_condition = e.condition;
    nf.f_condition = f.condition;
    Ok(nf)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl<T: Real> From<Complex<T>> for ComplexValue {
    fn from(z: Complex<T>) -> Self {
        ComplexValue { re: z.re.to_f64_lossy(), im: z.im.to_f64_lossy() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalFormReport {
    pub lambda: f64,
    pub n: usize,
    pub tau_n: f64,
    pub nu: f64,
    pub theta: f64,
    #[serde(rename = "S_n")]
    pub s_n: ComplexValue,
    pub g20: ComplexValue,
    pub g11: ComplexValue,
    pub g02: ComplexValue,
    pub g21: ComplexValue,
    #[serde(rename = "C1")]
    pub c1: ComplexValue,
    pub mu2: f64,
    pub beta2: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    pub dmu_dtau: ComplexValue,
    pub direction: Direction,
    pub orbit_stability: OrbitStability,
}

impl<T: Real> From<&NormalForm<T>> for NormalFormReport {
    fn from(nf: &NormalForm<T>) -> Self {
        NormalFormReport {
            lambda: nf.lambda.to_f64_lossy(),
            n: nf.n,
            tau_n: nf.tau_n.to_f64_lossy(),
            nu: nf.nu.to_f64_lossy(),
            theta: nf.theta.to_f64_lossy(),
            s_n: nf.s_n.into(),
            g20: nf.g20.into(),
            g11: nf.g11.into(),
            g02: nf.g02.into(),
            g21: nf.g21.into(),
            c1: nf.c1.into(),
            mu2: nf.mu2.to_f64_lossy(),
            beta2: nf.beta2.to_f64_lossy(),
            t2: nf.t2.to_f64_lossy(),
            dmu_dtau: nf.dmu_dtau.into(),
            direction: nf.direction,
            orbit_stability: nf.orbit_stability,
        }
    }
}
