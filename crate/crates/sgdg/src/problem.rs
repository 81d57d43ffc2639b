//! Coefficient, source, and exact-solution fields on `[0,1]^d`, plus the
//! built-in manufactured problems used by the study harness.

use crate::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// A 1D factor of a separable term.
pub type Factor1D = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A general (non-separable) field closure.
pub type FieldFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One separable term `coeff · Π_m factors[m](x_m)`.
#[derive(Clone)]
pub struct SeparableTerm {
    pub coeff: f64,
    pub factors: Vec<Factor1D>,
}

/// A scalar field on `[0,1]^d`.
///
/// Fields that are sums of per-axis products keep that structure explicit:
/// assembly and load integration then reduce to 1D quadrature, which is what
/// makes the `d >= 4` studies affordable. Arbitrary fields fall back to full
/// tensor quadrature.
#[derive(Clone)]
pub enum ScalarField {
    SeparableSum(Vec<SeparableTerm>),
    General(FieldFn),
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::SeparableSum(terms) => {
                write!(f, "ScalarField::SeparableSum({} terms)", terms.len())
            }
            ScalarField::General(_) => write!(f, "ScalarField::General"),
        }
    }
}

impl ScalarField {
    /// Constant field `v` in dimension `d`.
    pub fn constant(d: usize, v: f64) -> Self {
        ScalarField::SeparableSum(vec![SeparableTerm {
            coeff: v,
            factors: (0..d).map(|_| Arc::new(|_x: f64| 1.0) as Factor1D).collect(),
        }])
    }

    /// Product field `Π_m f(x_m)` with the same factor in every axis.
    pub fn isotropic_product(d: usize, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let f: Factor1D = Arc::new(f);
        ScalarField::SeparableSum(vec![SeparableTerm {
            coeff: 1.0,
            factors: (0..d).map(|_| f.clone()).collect(),
        }])
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::SeparableSum(terms) => terms
                .iter()
                .map(|t| {
                    t.coeff
                        * t.factors
                            .iter()
                            .zip(x)
                            .map(|(f, &xi)| f(xi))
                            .product::<f64>()
                })
                .sum(),
            ScalarField::General(f) => f(x),
        }
    }

    pub fn separable_terms(&self) -> Option<&[SeparableTerm]> {
        match self {
            ScalarField::SeparableSum(t) => Some(t),
            ScalarField::General(_) => None,
        }
    }
}

/// The Helmholtz problem data: `-Δu + c·u = f` on `[0,1]^d` with homogeneous
/// Dirichlet data. The coefficient must be nonnegative (checked at quadrature
/// nodes during assembly). Exact solution and gradient are optional and only
/// needed for error measurement.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub dimension: usize,
    pub coefficient: ScalarField,
    pub source: ScalarField,
    pub exact_solution: Option<ScalarField>,
    pub exact_gradient: Option<Vec<ScalarField>>,
}

impl ProblemSpec {
    pub fn require_exact(&self) -> Result<&ScalarField> {
        self.exact_solution.as_ref().ok_or_else(|| {
            Error::Capability("problem does not carry an exact solution".into())
        })
    }
}

/// `u(x) = Π_m sin(π x_m)` and its gradient, shared by the built-in problems.
fn product_sine(d: usize) -> (ScalarField, Vec<ScalarField>) {
    let u = ScalarField::isotropic_product(d, |x| (std::f64::consts::PI * x).sin());
    let grad = (0..d)
        .map(|axis| {
            let factors: Vec<Factor1D> = (0..d)
                .map(|m| {
                    if m == axis {
                        Arc::new(|x: f64| {
                            std::f64::consts::PI * (std::f64::consts::PI * x).cos()
                        }) as Factor1D
                    } else {
                        Arc::new(|x: f64| (std::f64::consts::PI * x).sin()) as Factor1D
                    }
                })
                .collect();
            ScalarField::SeparableSum(vec![SeparableTerm {
                coeff: 1.0,
                factors,
            }])
        })
        .collect();
    (u, grad)
}

/// Smooth variable-coefficient benchmark: `c(x) = Π_m (1 - x_m^2)` with the
/// source manufactured so that `u(x) = Π_m sin(π x_m)`.
pub fn example1(d: usize) -> Result<ProblemSpec> {
    if d < 2 {
        return Err(Error::InvalidParameter(
            "dimension must be at least 2".into(),
        ));
    }
    let c = ScalarField::isotropic_product(d, |x| 1.0 - x * x);
    let (u, grad) = product_sine(d);
    // f = -Δu + c·u = d·π²·Πsin(πx_m) + Π(1-x_m²)·Πsin(πx_m)
    let sin_factors: Vec<Factor1D> = (0..d)
        .map(|_| Arc::new(|x: f64| (std::f64::consts::PI * x).sin()) as Factor1D)
        .collect();
    let csin_factors: Vec<Factor1D> = (0..d)
        .map(|_| {
            Arc::new(|x: f64| (1.0 - x * x) * (std::f64::consts::PI * x).sin()) as Factor1D
        })
        .collect();
    let f = ScalarField::SeparableSum(vec![
        SeparableTerm {
            coeff: d as f64 * std::f64::consts::PI * std::f64::consts::PI,
            factors: sin_factors,
        },
        SeparableTerm {
            coeff: 1.0,
            factors: csin_factors,
        },
    ]);
    Ok(ProblemSpec {
        dimension: d,
        coefficient: c,
        source: f,
        exact_solution: Some(u),
        exact_gradient: Some(grad),
    })
}

/// Constant-coefficient variant: `c ≡ 1`, same manufactured solution.
pub fn constant_c(d: usize) -> Result<ProblemSpec> {
    if d < 2 {
        return Err(Error::InvalidParameter(
            "dimension must be at least 2".into(),
        ));
    }
    let (u, grad) = product_sine(d);
    let f = ScalarField::SeparableSum(vec![SeparableTerm {
        coeff: d as f64 * std::f64::consts::PI * std::f64::consts::PI + 1.0,
        factors: (0..d)
            .map(|_| Arc::new(|x: f64| (std::f64::consts::PI * x).sin()) as Factor1D)
            .collect(),
    }]);
    Ok(ProblemSpec {
        dimension: d,
        coefficient: ScalarField::constant(d, 1.0),
        source: f,
        exact_solution: Some(u),
        exact_gradient: Some(grad),
    })
}

/// Look up a built-in problem by identifier.
pub fn builtin_problem(id: &str, d: usize) -> Result<ProblemSpec> {
    match id {
        "example1" => example1(d),
        "constant_c" => constant_c(d),
        other => Err(Error::Config(format!("unknown problem id '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn example1_center_values() {
        let p = example1(2).unwrap();
        let x = [0.5, 0.5];
        assert_abs_diff_eq!(p.coefficient.eval(&x), 0.5625, epsilon = 1e-15);
        assert_abs_diff_eq!(p.exact_solution.as_ref().unwrap().eval(&x), 1.0);
        let pi = std::f64::consts::PI;
        assert_abs_diff_eq!(p.source.eval(&x), 2.0 * pi * pi + 0.5625, epsilon = 1e-12);
    }

    #[test]
    fn example1_vanishes_on_boundary() {
        for d in 2..=4 {
            let p = example1(d).unwrap();
            let u = p.exact_solution.as_ref().unwrap();
            let mut x = vec![0.37; d];
            x[d - 1] = 0.0;
            assert_abs_diff_eq!(u.eval(&x), 0.0, epsilon = 1e-15);
            x[d - 1] = 1.0;
            assert_abs_diff_eq!(u.eval(&x), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_c_center_source() {
        let p = constant_c(3).unwrap();
        let pi = std::f64::consts::PI;
        assert_abs_diff_eq!(
            p.source.eval(&[0.5, 0.5, 0.5]),
            3.0 * pi * pi + 1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = example1(3).unwrap();
        let u = p.exact_solution.as_ref().unwrap();
        let grad = p.exact_gradient.as_ref().unwrap();
        let x = [0.21, 0.62, 0.48];
        let eps = 1e-6;
        for axis in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[axis] += eps;
            xm[axis] -= eps;
            let fd = (u.eval(&xp) - u.eval(&xm)) / (2.0 * eps);
            assert_abs_diff_eq!(grad[axis].eval(&x), fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn unknown_problem_id() {
        assert!(builtin_problem("nope", 2).is_err());
    }
}
