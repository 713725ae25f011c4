//! Per-capita growth laws `f(x, u)` with analytic `u`-derivatives up to
//! third order.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Const, Grid};
use crate::operators::Coefficient;
use crate::scalar::Real;

#[derive(Clone)]
pub enum GrowthModel<T> {
    /// `f = 1 − u`.
    Hutchinson,
    /// `f = m(x) − a(x) u`.
    LogisticHeterogeneous { m: Coefficient<T>, a: Coefficient<T> },
    /// `f = (1 − u) / (1 + c u)`.
    FoodLimited { c: T },
    /// `f = 2 (1 − u)(u + ½) = 1 + u − 2u²`.
    WeakAllee,
    /// `f = Σ c_k u^k` with `x`-independent coefficients.
    CustomPolynomial { coeffs: Vec<T> },
}

impl<T> fmt::Debug for GrowthModel<T>
where
    T: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrowthModel::Hutchinson => f.write_str("Hutchinson"),
            GrowthModel::LogisticHeterogeneous { .. } => f.write_str("LogisticHeterogeneous"),
            GrowthModel::FoodLimited { c } => write!(f, "FoodLimited {{ c: {c:?} }}"),
            GrowthModel::WeakAllee => f.write_str("WeakAllee"),
            GrowthModel::CustomPolynomial { coeffs } => write!(f, "CustomPolynomial {coeffs:?}"),
        }
    }
}

/// `f` and its first three `u`-derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GrowthEval<T> {
    pub f: T,
    pub fu: T,
    pub fuu: T,
    pub fuuu: T,
}

impl<T: Real> GrowthModel<T> {
    pub fn name(&self) -> &'static str {
        match self {
            GrowthModel::Hutchinson => "hutchinson",
            GrowthModel::LogisticHeterogeneous { .. } => "logistic_heterogeneous",
            GrowthModel::FoodLimited { .. } => "food_limited",
            GrowthModel::WeakAllee => "weak_allee",
            GrowthModel::CustomPolynomial { .. } => "custom_polynomial",
        }
    }

    pub fn eval(&self, x: [T; 2], u: T) -> Result<GrowthEval<T>> {
        let one = T::one();
        let two = T::lit(2.0);
        let out = match self {
            GrowthModel::Hutchinson => GrowthEval { f: one - u, fu: -one, fuu: T::zero(), fuuu: T::zero() },
            GrowthModel::LogisticHeterogeneous { m, a } => {
                let a = a.at(x);
                GrowthEval { f: m.at(x) - a * u, fu: -a, fuu: T::zero(), fuuu: T::zero() }
            }
            GrowthModel::FoodLimited { c } => {
                let c = *c;
                let q = one + c * u;
                if q.abs() <= T::epsilon() {
                    return Err(Error::Domain(format!("food-limited pole at u = {u} (1 + c u = 0)")));
                }
                let k = one + c;
                GrowthEval {
                    f: (one - u) / q,
                    fu: -k / (q * q),
                    fuu: two * c * k / (q * q * q),
                    fuuu: -T::lit(6.0) * c * c * k / (q * q * q * q),
                }
            }
            GrowthModel::WeakAllee => {
                GrowthEval { f: one + u - two * u * u, fu: one - T::lit(4.0) * u, fuu: -T::lit(4.0), fuuu: T::zero() }
            }
            GrowthModel::CustomPolynomial { coeffs } => polynomial(coeffs, u),
        };
        if !(out.f.is_finite() && out.fu.is_finite() && out.fuu.is_finite() && out.fuuu.is_finite()) {
            return Err(Error::Domain(format!("non-finite growth law value at u = {u}")));
        }
        Ok(out)
    }

    /// `m(x) = f(x, 0)`.
    pub fn zero_density_rate(&self) -> Coefficient<T> {
        match self {
            GrowthModel::LogisticHeterogeneous { m, .. } => m.clone(),
            GrowthModel::CustomPolynomial { coeffs } => Arc::new(Const(coeffs.first().copied().unwrap_or(T::zero()))),
            _ => Arc::new(Const(T::one())),
        }
    }

    /// Evaluates at every interior node for the field `u`.
    pub fn sample(&self, g: &Grid<T>, u: &[T]) -> Result<Vec<GrowthEval<T>>> {
        g.check(u.len())?;
        g.points().zip(u).map(|(p, &v)| self.eval(p, v)).collect()
    }
}

fn polynomial<T: Real>(c: &[T], u: T) -> GrowthEval<T> {
    let pow = |p: i32| if p < 0 { T::zero() } else { u.powi(p) };
    let mut d = [T::zero(); 4];
    for (k, &ck) in c.iter().enumerate() {
        let k = k as i32;
        let kf = T::from_i32(k).unwrap();
        d[0] += ck * pow(k);
        d[1] += ck * kf * pow(k - 1);
        d[2] += ck * kf * (kf - T::one()) * pow(k - 2);
        d[3] += ck * kf * (kf - T::one()) * (kf - T::lit(2.0)) * pow(k - 3);
    }
    GrowthEval { f: d[0], fu: d[1], fuu: d[2], fuuu: d[3] }
}

pub fn eval_growth<T: Real>(model: &GrowthModel<T>, x: [T; 2], u: T) -> Result<GrowthEval<T>> {
    model.eval(x, u)
}

/// Worst relative discrepancy between the analytic derivatives and centered
/// differences with step `h`. Order `k` is differenced from the analytic
/// order `k − 1`, so truncation and rounding stay at `O(h²)` and `O(ε/h)`.
///
/// Relative errors are taken against `max(|analytic|, 1)`.
pub fn finite_difference_check<T: Real>(model: &GrowthModel<T>, x: [T; 2], u: T, h: T) -> Result<T> {
    let e = model.eval(x, u)?;
    let ep = model.eval(x, u + h)?;
    let em = model.eval(x, u - h)?;
    let two_h = h + h;
    let pairs = [(e.fu, (ep.f - em.f) / two_h), (e.fuu, (ep.fu - em.fu) / two_h), (e.fuuu, (ep.fuu - em.fuu) / two_h)];
    Ok(pairs.iter().map(|&(an, fd)| (an - fd).abs() / an.abs().max(T::one())).fold(T::zero(), T::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const X: [f64; 2] = [0.3, 0.7];

    #[test]
    fn food_limited_at_zero() {
        let e = GrowthModel::FoodLimited { c: 0.5 }.eval(X, 0.0).unwrap();
        assert_eq!(e, GrowthEval { f: 1.0, fu: -1.5, fuu: 1.5, fuuu: -2.25 });
        assert!(matches!(GrowthModel::FoodLimited { c: 0.5 }.eval(X, -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn weak_allee_and_hutchinson() {
        let e = GrowthModel::WeakAllee.eval(X, 0.0).unwrap();
        assert_eq!(e, GrowthEval { f: 1.0, fu: 1.0, fuu: -4.0, fuuu: 0.0 });
        let u = 0.37;
        let w = GrowthModel::WeakAllee.eval(X, u).unwrap();
        assert!((w.f - 2.0 * (1.0 - u) * (u + 0.5)).abs() < 1e-15);
        let e = GrowthModel::Hutchinson.eval(X, u).unwrap();
        assert_eq!(e, GrowthEval { f: 1.0 - u, fu: -1.0, fuu: 0.0, fuuu: 0.0 });
    }

    #[test]
    fn polynomial_derivatives() {
        let p = GrowthModel::CustomPolynomial { coeffs: vec![1.0, 0.0, -1.0] };
        let e = p.eval(X, 0.5).unwrap();
        assert_eq!(e, GrowthEval { f: 0.75, fu: -1.0, fuu: -2.0, fuuu: 0.0 });
        let q = GrowthModel::CustomPolynomial { coeffs: vec![0.5, 1.0, 2.0, 3.0, 4.0] };
        let e = q.eval(X, 2.0).unwrap();
        assert_eq!(e.f, 0.5 + 2.0 + 8.0 + 24.0 + 64.0);
        assert_eq!(e.fu, 1.0 + 8.0 + 36.0 + 128.0);
        assert_eq!(e.fuu, 4.0 + 36.0 + 192.0);
        assert_eq!(e.fuuu, 18.0 + 192.0);
    }

    #[test]
    fn logistic_uses_spatial_coefficients() {
        let m: Coefficient<f64> = Arc::new(|p: [f64; 2]| 1.0 + p[0]);
        let a: Coefficient<f64> = Arc::new(|p: [f64; 2]| p[1].cos());
        let model = GrowthModel::LogisticHeterogeneous { m, a };
        let e = model.eval(X, 0.2).unwrap();
        assert!((e.f - (1.3 - 0.7f64.cos() * 0.2)).abs() < 1e-15);
        assert_eq!(model.zero_density_rate().at(X), 1.3);
    }

    #[test]
    fn finite_difference_examples() {
        let fl = GrowthModel::FoodLimited { c: 0.5 };
        assert!(finite_difference_check(&fl, X, 0.3, 1e-5).unwrap() < 1e-6);
        assert!(finite_difference_check(&GrowthModel::WeakAllee, X, 0.7, 1e-5).unwrap() < 1e-8);
        assert!(finite_difference_check(&GrowthModel::Hutchinson, X, 0.41, 1e-5).unwrap() < 1e-10);
    }

    #[test]
    fn regime_signs() {
        assert!(GrowthModel::FoodLimited { c: 0.5 }.eval(X, 0.0).unwrap().fu < 0.0);
        assert!(GrowthModel::WeakAllee.eval(X, 0.0).unwrap().fu > 0.0);
    }

    proptest! {
        #[test]
        fn all_models_pass_fd_check(x in 0.0f64..3.0, y in 0.0f64..3.0, u in -0.4f64..1.5, c in 0.0f64..2.0) {
            let m: Coefficient<f64> = Arc::new(|p: [f64; 2]| 1.0 + 0.5 * p[0].sin());
            let a: Coefficient<f64> = Arc::new(|p: [f64; 2]| 1.0 + p[1]);
            let models = [
                GrowthModel::Hutchinson,
                GrowthModel::LogisticHeterogeneous { m, a },
                GrowthModel::FoodLimited { c },
                GrowthModel::WeakAllee,
                GrowthModel::CustomPolynomial { coeffs: vec![1.0, -0.5, 0.25, -2.0, 0.3] },
            ];
            for model in &models {
                let err = finite_difference_check(model, [x, y], u, 1e-5).unwrap();
                prop_assert!(err < 1e-5, "{} {err}", model.name());
            }
        }
    }
}
