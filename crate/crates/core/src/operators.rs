//! Flux-form finite differences for `∇·[d∇u − b u]` and its quadrature
//! adjoint, plus the shifted and bordered solves built on them.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{check_len, Error, Result};
use crate::grid::{Const, Grid, SpatialFn};
use crate::linalg::{relative_residual, solve_refined, BandLu, CsrMatrix};
use crate::scalar::{Real, Scalar};

pub type Coefficient<T> = Arc<dyn SpatialFn<T>>;

/// Diffusivity `d`, advection components `b` (one per dimension, missing
/// components are zero) and the zero-density growth rate `m`.
#[derive(Clone)]
pub struct CoefficientFields<T> {
    pub d: Coefficient<T>,
    pub b: Vec<Coefficient<T>>,
    pub m: Coefficient<T>,
}

impl<T: Real> CoefficientFields<T> {
    pub fn new(d: Coefficient<T>, b: Vec<Coefficient<T>>, m: Coefficient<T>) -> Self {
        CoefficientFields { d, b, m }
    }

    pub fn constant(d: T, b: &[T], m: T) -> Self {
        CoefficientFields {
            d: Arc::new(Const(d)),
            b: b.iter().map(|&v| Arc::new(Const(v)) as Coefficient<T>).collect(),
            m: Arc::new(Const(m)),
        }
    }
}

impl<T> std::fmt::Debug for CoefficientFields<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientFields").field("b_components", &self.b.len()).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Advection {
    #[default]
    Central,
    Upwind,
}

/// `a` discretizes `∇·[d∇u − b u]`; `a_adj` is its adjoint in the weighted
/// inner product, `W⁻¹AᵀW`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator<T: Real> {
    pub a: CsrMatrix<T>,
    pub a_adj: CsrMatrix<T>,
    /// `m` sampled at interior nodes.
    pub m: Vec<T>,
    pub weights: Vec<T>,
}

pub fn assemble<T: Real>(g: &Grid<T>, c: &CoefficientFields<T>) -> Result<DiscreteOperator<T>> {
    assemble_with(g, c, Advection::Central)
}

pub fn assemble_with<T: Real>(g: &Grid<T>, c: &CoefficientFields<T>, scheme: Advection) -> Result<DiscreteOperator<T>> {
    let a = assemble_matrix(g, c, scheme)?;
    let m = g.sample(c.m.as_ref());
    if let Some(v) = m.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidCoefficient(format!("m is not finite ({v})")));
    }
    if !m.iter().any(|&v| v > T::zero()) {
        return Err(Error::InvalidCoefficient("max m must be positive".into()));
    }
    let a_adj = weighted_adjoint(&a, g.weights());
    Ok(DiscreteOperator { a, a_adj, m, weights: g.weights().to_vec() })
}

/// The weighted transpose of [`assemble`]'s matrix.
pub fn adjoint_assemble<T: Real>(g: &Grid<T>, c: &CoefficientFields<T>) -> Result<CsrMatrix<T>> {
    Ok(weighted_adjoint(&assemble_matrix(g, c, Advection::Central)?, g.weights()))
}

/// `W⁻¹ Aᵀ W` for diagonal weights `W`.
pub fn weighted_adjoint<T: Real>(a: &CsrMatrix<T>, w: &[T]) -> CsrMatrix<T> {
    CsrMatrix::from_triplets(a.n_cols(), a.n_rows(), a.triplets().map(|(i, j, v)| (j, i, v * w[i] / w[j])))
}

fn assemble_matrix<T: Real>(g: &Grid<T>, c: &CoefficientFields<T>, scheme: Advection) -> Result<CsrMatrix<T>> {
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let mut trip = Vec::with_capacity(g.len() * (1 + 2 * g.dim()));
    for k in 0..g.len() {
        let p = g.point(k);
        let nb = g.neighbours(k);
        let mut diag = T::zero();
        for ax in 0..g.dim() {
            let h = g.spacing()[ax];
            for (side, sign) in [(0usize, -T::one()), (1, T::one())] {
                let mut q = p;
                q[ax] += sign * half * h;
                let d = c.d.at(q);
                if !(d > T::zero()) || !d.is_finite() {
                    return Err(Error::InvalidCoefficient(format!("d = {d} at face ({}, {})", q[0], q[1])));
                }
                let b = c.b.get(ax).map_or(T::zero(), |f| f.at(q));
                if !b.is_finite() {
                    return Err(Error::InvalidCoefficient(format!("b = {b} at face ({}, {})", q[0], q[1])));
                }
                let diff = d / (h * h);
                // Outward flux through this face is sign·(d ∂u − b u).
                let (self_adv, other_adv) = match scheme {
                    Advection::Central => (-sign * b / (two * h), -sign * b / (two * h)),
                    Advection::Upwind => {
                        let downstream = (b > T::zero()) == (sign > T::zero());
                        if downstream {
                            (-sign * b / h, T::zero())
                        } else {
                            (T::zero(), -sign * b / h)
                        }
                    }
                };
                diag += -diff + self_adv;
                if let Some(o) = nb[2 * ax + side] {
                    trip.push((k, o, diff + other_adv));
                }
            }
        }
        trip.push((k, k, diag));
    }
    Ok(CsrMatrix::from_triplets(g.len(), g.len(), trip))
}

/// Solution of a shifted system with its diagnostics.
#[derive(Debug, Clone)]
pub struct ShiftedSolve<T: Real> {
    pub x: Vec<Complex<T>>,
    pub condition: T,
    pub relative_residual: T,
}

/// Condition estimates beyond this are treated as singular.
pub fn singular_threshold<T: Real>() -> T {
    T::lit(0.1) / T::epsilon()
}

fn residual_target<T: Real>() -> T {
    T::lit(1e-10).max(T::lit(1e3) * T::epsilon())
}

/// Solves `(A + diag(shift) − zI) x = rhs`.
pub fn solve_shifted<T: Real>(
    a: &CsrMatrix<T>,
    shift_diag: &[T],
    z: Complex<T>,
    rhs: &[Complex<T>],
) -> Result<ShiftedSolve<T>> {
    check_len(a.n_rows(), shift_diag.len())?;
    check_len(a.n_rows(), rhs.len())?;
    let d: Vec<Complex<T>> = shift_diag.iter().map(|&s| Complex::new(s, T::zero()) - z).collect();
    let m = a.to_complex().add_diagonal(&d);
    solve_checked(&m, rhs)
}

/// Factor, estimate the condition number, solve with refinement.
pub fn solve_checked<S: Scalar>(m: &CsrMatrix<S>, rhs: &[S]) -> Result<ShiftedSolve<S::Real>>
where
    S::Real: Real,
{
    let lu = BandLu::factor(m);
    let cond = lu.condition_estimate();
    if !(cond <= singular_threshold()) {
        return Err(Error::NearSingular { cond: cond.to_f64_lossy() });
    }
    let x = solve_refined(m, &lu, rhs);
    let res = relative_residual(m, &x, rhs);
    if !(res <= residual_target()) {
        return Err(Error::NearSingular { cond: cond.to_f64_lossy() });
    }
    Ok(ShiftedSolve { x: x.into_iter().map(|v| v.to_complex()).collect(), condition: cond, relative_residual: res })
}

/// Solves `L x = Q rhs` with `⟨ker, x⟩ = 0`, where `L` is singular with
/// simple kernel `ker`, cokernel `coker`, and `Q` removes the `coker`
/// component of the right-hand side.
///
/// `L + α e_k e_kᵀ` with `k = argmax |ker|` is nonsingular exactly when the
/// kernel is simple, keeps the band structure, and its solution of a
/// compatible right-hand side already satisfies `L y = rhs`.
pub fn solve_bordered<T: Real>(l: &CsrMatrix<T>, ker: &[T], coker: &[T], weights: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = l.n_rows();
    for len in [ker.len(), coker.len(), weights.len(), rhs.len()] {
        check_len(n, len)?;
    }
    let dot = |a: &[T], b: &[T]| -> T { weights.iter().zip(a.iter().zip(b)).map(|(&w, (&p, &q))| w * p * q).sum() };
    let cc = dot(coker, coker);
    let kk = dot(ker, ker);
    if !(cc > T::zero()) || !(kk > T::zero()) {
        return Err(Error::DegenerateKernel);
    }
    let proj = dot(coker, rhs) / cc;
    let rhs_p: Vec<T> = rhs.iter().zip(coker).map(|(&r, &c)| r - proj * c).collect();
    let (k, _) = ker
        .iter()
        .enumerate()
        .fold((0, T::zero()), |(bi, bv), (i, &v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
    let alpha = (0..n).map(|i| l.get(i, i).abs()).fold(T::zero(), T::max).max(T::one());
    let mut e = vec![T::zero(); n];
    e[k] = alpha;
    let b = l.add_diagonal(&e);
    let lu = BandLu::factor(&b);
    let cond = lu.condition_estimate();
    if !(cond <= singular_threshold()) {
        return Err(Error::DegenerateKernel);
    }
    let y = solve_refined(&b, &lu, &rhs_p);
    let c = dot(ker, &y) / kk;
    Ok(y.iter().zip(ker).map(|(&v, &p)| v - c * p).collect())
}

/// `|⟨v, A u⟩_h − ⟨A_adj v, u⟩_h| / (‖u‖_h ‖v‖_h)`.
///
/// Both bilinear forms are accumulated in double-word arithmetic, so the
/// result measures the matrices rather than cancellation in the check.
pub fn adjoint_defect<T: Real>(op: &DiscreteOperator<T>, u: &[T], v: &[T]) -> Result<T> {
    let n = op.a.n_rows();
    check_len(n, u.len())?;
    check_len(n, v.len())?;
    let w = &op.weights;
    let form = |a: &CsrMatrix<T>, left: &[T], right: &[T]| {
        let mut acc = Dw::zero();
        for (i, j, aij) in a.triplets() {
            acc = acc.add(Dw::prod(w[i], left[i]).mul(aij).mul(right[j]));
        }
        acc
    };
    let lhs = form(&op.a, v, u);
    let rhs = form(&op.a_adj, u, v);
    let diff = lhs.add(rhs.neg());
    let nu: T = w.iter().zip(u).map(|(&w, &x)| w * x * x).sum::<T>().sqrt();
    let nv: T = w.iter().zip(v).map(|(&w, &x)| w * x * x).sum::<T>().sqrt();
    Ok((diff.hi + diff.lo).abs() / (nu * nv))
}

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Clone, Copy)]
struct Dw<T> {
    hi: T,
    lo: T,
}

impl<T: Real> Dw<T> {
    fn zero() -> Self {
        Dw { hi: T::zero(), lo: T::zero() }
    }

    fn two_sum(a: T, b: T) -> Self {
        let s = a + b;
        let bb = s - a;
        Dw { hi: s, lo: (a - (s - bb)) + (b - bb) }
    }

    fn prod(a: T, b: T) -> Self {
        let p = a * b;
        Dw { hi: p, lo: a.mul_add(b, -p) }
    }

    fn mul(self, b: T) -> Self {
        let p = Self::prod(self.hi, b);
        Self::two_sum(p.hi, p.lo + self.lo * b)
    }

    fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        Self::two_sum(s.hi, s.lo + self.lo + o.lo)
    }

    fn neg(self) -> Self {
        Dw { hi: -self.hi, lo: -self.lo }
    }
}

/// Complex combination `A + diag(d0) + c·diag(d1) − zI`.
pub fn pencil<T: Real>(a: &CsrMatrix<T>, d0: &[T], c: Complex<T>, d1: &[T], z: Complex<T>) -> CsrMatrix<Complex<T>> {
    let diag: Vec<Complex<T>> = d0.iter().zip(d1).map(|(&p, &q)| Complex::new(p, T::zero()) + c * q - z).collect();
    a.to_complex().add_diagonal(&diag)
}
