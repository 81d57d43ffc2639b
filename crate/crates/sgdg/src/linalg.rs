//! SPD solvers (dense Cholesky, conjugate gradients) and condition number
//! estimation for the assembled stiffness matrices.

use crate::sparse::SparseMatrix;
use crate::{Error, Result};
use nalgebra::DMatrix;

/// Dense Cholesky is refused above this dimension.
pub const DENSE_SOLVE_LIMIT: usize = 20_000;
/// Dense symmetric eigendecomposition is used up to this dimension.
pub const DENSE_EIGEN_LIMIT: usize = 6_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    DenseCholesky,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    None,
    Diagonal,
}

/// Solver parameters. `max_iter` defaults to `20·n` when unset.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub method: SolveMethod,
    pub rel_tol: f64,
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolveMethod::ConjugateGradient,
            rel_tol: 1e-11,
            max_iter: None,
            preconditioner: Preconditioner::None,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidParameter(
                "solver rel_tol must lie in (0, 1)".into(),
            ));
        }
        if self.max_iter == Some(0) {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Solve `A x = rhs` for symmetric positive definite `A`.
pub fn solve(a: &SparseMatrix, rhs: &[f64], cfg: &SolverConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if a.dim() != rhs.len() {
        return Err(Error::InvalidParameter(
            "matrix and right-hand side dimensions differ".into(),
        ));
    }
    match cfg.method {
        SolveMethod::DenseCholesky => solve_dense(a, rhs),
        SolveMethod::ConjugateGradient => solve_cg(a, rhs, cfg),
    }
}

fn to_dense(a: &SparseMatrix) -> DMatrix<f64> {
    let n = a.dim();
    let mut m = DMatrix::zeros(n, n);
    for r in 0..n {
        let (cols, vals) = a.row(r);
        for (c, v) in cols.iter().zip(vals) {
            m[(r, *c as usize)] = *v;
        }
    }
    m
}

fn solve_dense(a: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    if n > DENSE_SOLVE_LIMIT {
        return Err(Error::ResourceGuard(format!(
            "dense Cholesky limited to n <= {DENSE_SOLVE_LIMIT}, got {n}"
        )));
    }
    let dense = to_dense(a);
    let chol = dense.cholesky().ok_or_else(|| {
        Error::NotPositiveDefinite(
            "Cholesky breakdown; penalty may be too small for this level".into(),
        )
    })?;
    let x = chol.solve(&nalgebra::DVector::from_column_slice(rhs));
    Ok(x.data.into())
}

/// Conjugate gradients from the zero vector; deterministic for a fixed
/// configuration.
fn solve_cg(a: &SparseMatrix, rhs: &[f64], cfg: &SolverConfig) -> Result<Vec<f64>> {
    let n = a.dim();
    let max_iter = cfg.max_iter.unwrap_or(20 * n.max(1));
    let inv_diag: Option<Vec<f64>> = match cfg.preconditioner {
        Preconditioner::None => None,
        Preconditioner::Diagonal => Some(
            a.diagonal()
                .iter()
                .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        ),
    };
    let norm_b = dot(rhs, rhs).sqrt();
    if norm_b == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z = apply_prec(&inv_diag, &r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "conjugate gradients met nonpositive curvature {pap:.3e}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = dot(&r, &r).sqrt();
        if res <= cfg.rel_tol * norm_b {
            return Ok(x);
        }
        z = apply_prec(&inv_diag, &r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = dot(&r, &r).sqrt() / norm_b;
    Err(Error::SolverFailure {
        message: format!("conjugate gradients did not converge in {max_iter} iterations"),
        residual: res,
    })
}

fn apply_prec(inv_diag: &Option<Vec<f64>>, r: &[f64]) -> Vec<f64> {
    match inv_diag {
        Some(d) => r.iter().zip(d).map(|(ri, di)| ri * di).collect(),
        None => r.to_vec(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Spectral condition number `λ_max / λ_min` of a symmetric positive definite
/// matrix, to relative accuracy `tol`.
///
/// Uses a dense symmetric eigendecomposition up to [`DENSE_EIGEN_LIMIT`];
/// beyond that, power iteration for `λ_max` and inverse iteration (with inner
/// CG at `tol/10`) for `λ_min`.
pub fn condition_number(a: &SparseMatrix, tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter("tolerance must lie in (0,1)".into()));
    }
    let n = a.dim();
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    if n <= DENSE_EIGEN_LIMIT {
        let eig = to_dense(a).symmetric_eigen();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in eig.eigenvalues.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "smallest eigenvalue {lo:.3e} is not positive"
            )));
        }
        Ok(hi / lo)
    } else {
        let lmax = extreme_eigenvalue(a, tol, None)?;
        let lmin = extreme_eigenvalue(a, tol, Some(tol / 10.0))?;
        if lmin <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "smallest eigenvalue estimate {lmin:.3e} is not positive"
            )));
        }
        Ok(lmax / lmin)
    }
}

/// Largest eigenvalue by power iteration, or smallest via inverse iteration
/// when `inner_tol` is given.
pub fn extreme_eigenvalue(a: &SparseMatrix, tol: f64, inner_tol: Option<f64>) -> Result<f64> {
    let n = a.dim();
    // fixed deterministic start vector
    let mut x: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).sin() + 0.5).collect();
    normalize(&mut x);
    let mut lambda = 0.0f64;
    let mut ax = vec![0.0; n];
    let cg_cfg = SolverConfig {
        method: SolveMethod::ConjugateGradient,
        rel_tol: inner_tol.unwrap_or(1e-10),
        max_iter: None,
        preconditioner: Preconditioner::None,
    };
    for it in 0..5000 {
        let next = match inner_tol {
            None => {
                a.matvec(&x, &mut ax);
                ax.clone()
            }
            Some(_) => solve(a, &x, &cg_cfg)?,
        };
        let mut y = next;
        normalize(&mut y);
        a.matvec(&y, &mut ax);
        let rayleigh = dot(&y, &ax);
        let change = (rayleigh - lambda).abs() / rayleigh.abs().max(f64::MIN_POSITIVE);
        lambda = rayleigh;
        x = y;
        if it > 2 && change < tol / 4.0 {
            return Ok(lambda);
        }
    }
    Err(Error::SolverFailure {
        message: "eigenvalue iteration did not converge".into(),
        residual: f64::NAN,
    })
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag_matrix(values: &[f64]) -> SparseMatrix {
        let entries = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as u32, i as u32, v))
            .collect();
        SparseMatrix::from_coo(values.len(), entries, true).unwrap()
    }

    #[test]
    fn identity_solve() {
        let a = diag_matrix(&[1.0, 1.0, 1.0]);
        let rhs = vec![1.0, 0.0, 0.0];
        for method in [SolveMethod::DenseCholesky, SolveMethod::ConjugateGradient] {
            let cfg = SolverConfig {
                method,
                ..Default::default()
            };
            let x = solve(&a, &rhs, &cfg).unwrap();
            assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn small_diagonal_system() {
        let a = diag_matrix(&[2.0, 4.0]);
        let x = solve(&a, &[2.0, 4.0], &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cg_reports_nonconvergence() {
        let a = diag_matrix(&[1.0, 1e8]);
        let cfg = SolverConfig {
            rel_tol: 1e-14,
            max_iter: Some(1),
            ..Default::default()
        };
        match solve(&a, &[1.0, 1.0], &cfg) {
            Err(Error::SolverFailure { residual, .. }) => assert!(residual.is_finite()),
            other => panic!("expected solver failure, got {other:?}"),
        }
    }

    #[test]
    fn indefinite_matrix_detected() {
        let a = diag_matrix(&[1.0, -1.0]);
        let cfg = SolverConfig {
            method: SolveMethod::DenseCholesky,
            ..Default::default()
        };
        assert!(matches!(
            solve(&a, &[1.0, 1.0], &cfg),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(matches!(
            condition_number(&a, 1e-6),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn condition_number_examples() {
        assert_abs_diff_eq!(
            condition_number(&diag_matrix(&[1.0, 1.0, 1.0]), 1e-8).unwrap(),
            1.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            condition_number(&diag_matrix(&[1.0, 10.0]), 1e-8).unwrap(),
            10.0,
            epsilon = 1e-8
        );
    }

    #[test]
    fn deterministic_cg() {
        let a = diag_matrix(&[3.0, 5.0, 7.0, 11.0]);
        let rhs = vec![1.0, 2.0, 3.0, 4.0];
        let cfg = SolverConfig::default();
        let x1 = solve(&a, &rhs, &cfg).unwrap();
        let x2 = solve(&a, &rhs, &cfg).unwrap();
        assert_eq!(x1, x2);
    }
}
