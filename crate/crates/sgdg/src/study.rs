//! Convergence/sparsity study driver: runs a level sweep for one problem and
//! emits CSV rows, optional Matrix Market dumps, and sparsity-pattern files.

use crate::assembly::{
    assemble_load, default_sigma, structural_nnz, Assembler, AssemblyConfig, Method,
};
use crate::linalg::{condition_number, solve, SolveMethod, SolverConfig};
use crate::metrics::{error_norms, observed_order, QMC_POINTS_DEFAULT};
use crate::problem::builtin_problem;
use crate::space::DofMap;
use crate::sparse::SparseMatrix;
use crate::wavelet::Hierarchy1D;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Refuse studies whose structural nonzero count exceeds this.
pub const MAX_PROJECTED_NNZ: usize = 2_000_000_000;

/// Condition number reporting mode. `Auto` computes it up to 20000 DOF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kappa2Mode {
    On,
    Off,
    Auto,
}

pub const KAPPA2_AUTO_DOF_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub dimension: usize,
    pub degree: usize,
    /// Ascending list of levels to run.
    pub levels: Vec<usize>,
    pub methods: Vec<Method>,
    pub problem: String,
    pub sigma: Option<f64>,
    pub quad_points: Option<usize>,
    pub solver: SolveMethod,
    pub rel_tol: f64,
    pub droptol_factor: f64,
    pub kappa2: Kappa2Mode,
    pub qmc_points: usize,
    pub csv_path: Option<PathBuf>,
    pub matrix_path: Option<PathBuf>,
    pub pattern_path: Option<PathBuf>,
}

impl StudyConfig {
    pub fn new(dimension: usize, degree: usize, levels: Vec<usize>) -> Self {
        Self {
            dimension,
            degree,
            levels,
            methods: vec![Method::Modified, Method::Original],
            problem: "example1".into(),
            sigma: None,
            quad_points: None,
            solver: SolveMethod::ConjugateGradient,
            rel_tol: 1e-11,
            droptol_factor: 1e-12,
            kappa2: Kappa2Mode::Auto,
            qmc_points: QMC_POINTS_DEFAULT,
            csv_path: None,
            matrix_path: None,
            pattern_path: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("levels must be nonempty ascending".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method required".into()));
        }
        Ok(())
    }
}

/// One row of a study table.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub method: Method,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub dof: usize,
    pub l2_error: f64,
    pub l2_order: Option<f64>,
    pub h1_error: f64,
    pub h1_order: Option<f64>,
    /// Stored nonzeros at the drop tolerance.
    pub nnz: usize,
    /// Support-overlap pair count (the structural upper bound on `nnz`).
    pub nnz_structural: usize,
    /// `log(nnz) / log(dof)`.
    pub o_s: f64,
    pub kappa2: Option<f64>,
    pub t_assemble: f64,
    pub t_solve: f64,
    pub failure: Option<String>,
}

pub const CSV_HEADER: &str =
    "method,d,k,N,dof,l2_error,l2_order,h1_error,h1_order,nnz,o_s,kappa2,t_assemble,t_solve";

impl StudyRow {
    pub fn to_csv_line(&self) -> String {
        let opt =
            |v: &Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
        let kappa = self
            .kappa2
            .map(|x| format!("{x:.6e}"))
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{:.6e},{},{:.6e},{},{},{:.6},{},{:.3},{:.3}",
            self.method,
            self.d,
            self.k,
            self.n,
            self.dof,
            self.l2_error,
            opt(&self.l2_order),
            self.h1_error,
            opt(&self.h1_order),
            self.nnz,
            self.o_s,
            kappa,
            self.t_assemble,
            self.t_solve
        )
    }
}

fn suffixed_path(base: &Path, method: Method, n: usize, ext: &str) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "matrix".into());
    let mut out = base.to_path_buf();
    out.set_file_name(format!("{stem}_{method}_N{n}.{ext}"));
    out
}

/// Run the study; returns the rows in execution order. Rows that fail keep
/// their failure message and the study continues.
pub fn run_study(config: &StudyConfig) -> Result<Vec<StudyRow>> {
    config.validate()?;
    let problem = builtin_problem(&config.problem, config.dimension)?;
    let sigma = config
        .sigma
        .unwrap_or_else(|| default_sigma(config.degree, config.dimension));
    let quad_points = config.quad_points.unwrap_or(config.degree + 3);
    let mut rows = Vec::new();
    for &method in &config.methods {
        let mut prev: Option<(f64, f64)> = None;
        for &n in &config.levels {
            let row = run_row(config, &problem, method, n, sigma, quad_points, prev);
            prev = match (&row.failure, row.l2_error, row.h1_error) {
                (None, l2, h1) if l2 > 0.0 && h1 > 0.0 => Some((l2, h1)),
                _ => None,
            };
            rows.push(row);
        }
    }
    if let Some(csv) = &config.csv_path {
        write_csv(csv, &rows)?;
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn run_row(
    config: &StudyConfig,
    problem: &crate::problem::ProblemSpec,
    method: Method,
    n: usize,
    sigma: f64,
    quad_points: usize,
    prev: Option<(f64, f64)>,
) -> StudyRow {
    let mut row = StudyRow {
        method,
        d: config.dimension,
        k: config.degree,
        n,
        dof: 0,
        l2_error: f64::NAN,
        l2_order: None,
        h1_error: f64::NAN,
        h1_order: None,
        nnz: 0,
        nnz_structural: 0,
        o_s: f64::NAN,
        kappa2: None,
        t_assemble: f64::NAN,
        t_solve: f64::NAN,
        failure: None,
    };
    match compute_row(config, problem, method, n, sigma, quad_points, prev, &mut row) {
        Ok(()) => {}
        Err(e) => row.failure = Some(e.to_string()),
    }
    row
}

#[allow(clippy::too_many_arguments)]
fn compute_row(
    config: &StudyConfig,
    problem: &crate::problem::ProblemSpec,
    method: Method,
    n: usize,
    sigma: f64,
    quad_points: usize,
    prev: Option<(f64, f64)>,
    row: &mut StudyRow,
) -> Result<()> {
    let hierarchy = Hierarchy1D::build(config.degree, n)?;
    let dofmap = DofMap::build(config.dimension, config.degree, n)?;
    row.dof = dofmap.len();
    row.nnz_structural = structural_nnz(&dofmap, method);
    if row.nnz_structural > MAX_PROJECTED_NNZ {
        return Err(Error::ResourceGuard(format!(
            "projected nonzero count {} exceeds the {MAX_PROJECTED_NNZ} cap",
            row.nnz_structural
        )));
    }
    let asm_cfg = AssemblyConfig {
        method,
        sigma,
        quad_points,
        droptol_factor: config.droptol_factor,
    };
    let t0 = Instant::now();
    let assembler = Assembler::new(&hierarchy, &dofmap, problem, asm_cfg)?;
    let matrix = assembler.matrix()?;
    let load = assemble_load(&hierarchy, &dofmap, problem, quad_points)?;
    row.t_assemble = t0.elapsed().as_secs_f64();
    row.nnz = matrix.nnz();
    row.o_s = (row.nnz as f64).ln() / (row.dof as f64).ln();

    if let Some(path) = &config.matrix_path {
        matrix.write_matrix_market(&suffixed_path(path, method, n, "mtx"), true)?;
    }
    if let Some(path) = &config.pattern_path {
        matrix.write_pattern(&suffixed_path(path, method, n, "pat"))?;
    }

    let solver_cfg = SolverConfig {
        method: config.solver,
        rel_tol: config.rel_tol,
        ..Default::default()
    };
    let t1 = Instant::now();
    let solution = solve(&matrix, &load, &solver_cfg)?;
    row.t_solve = t1.elapsed().as_secs_f64();

    if problem.exact_solution.is_some() {
        let report = error_norms(
            &hierarchy,
            &dofmap,
            &solution,
            problem,
            quad_points,
            config.qmc_points,
        )?;
        row.l2_error = report.l2_error;
        row.h1_error = report.h1_error;
        if let Some((pl2, ph1)) = prev {
            row.l2_order = observed_order(pl2, report.l2_error).ok();
            row.h1_order = observed_order(ph1, report.h1_error).ok();
        }
    }

    let want_kappa = match config.kappa2 {
        Kappa2Mode::On => true,
        Kappa2Mode::Off => false,
        Kappa2Mode::Auto => row.dof <= KAPPA2_AUTO_DOF_LIMIT,
    };
    if want_kappa {
        row.kappa2 = Some(condition_number(&matrix, 1e-6)?);
    }
    Ok(())
}

fn write_csv(path: &Path, rows: &[StudyRow]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(file, "{}", row.to_csv_line())?;
    }
    Ok(())
}

/// Human-readable study table for stdout, including the structural count.
pub fn format_table(rows: &[StudyRow]) -> String {
    let mut out = String::new();
    out.push_str(
        "method    d k N  DOF      L2-error     order  H1-error     order  NNZ          NNZ-struct   O_s     kappa2\n",
    );
    for r in rows {
        if let Some(f) = &r.failure {
            out.push_str(&format!(
                "{:<9} {} {} {}  FAILED: {f}\n",
                r.method.to_string(),
                r.d,
                r.k,
                r.n
            ));
            continue;
        }
        let fmtopt = |v: Option<f64>| v.map(|x| format!("{x:5.2}")).unwrap_or("  -  ".into());
        let kappa = r
            .kappa2
            .map(|x| format!("{x:.3e}"))
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<9} {} {} {}  {:<8} {:<12.4e} {}  {:<12.4e} {}  {:<12} {:<12} {:.4}  {}\n",
            r.method.to_string(),
            r.d,
            r.k,
            r.n,
            r.dof,
            r.l2_error,
            fmtopt(r.l2_order),
            r.h1_error,
            fmtopt(r.h1_order),
            r.nnz,
            r.nnz_structural,
            r.o_s,
            kappa
        ));
    }
    out
}

/// Re-export for the pattern-emission interface.
pub fn emit_sparsity_pattern(matrix: &SparseMatrix, path: &Path) -> Result<()> {
    matrix.write_pattern(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_admissible_study() {
        // single-row study at N=0: DOF 4, must complete without error
        let mut cfg = StudyConfig::new(2, 1, vec![0]);
        cfg.methods = vec![Method::Modified];
        let rows = run_study(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].failure.is_none(), "{:?}", rows[0].failure);
        assert_eq!(rows[0].dof, 4);
        assert!(rows[0].l2_error.is_finite());
        assert!(rows[0].l2_order.is_none());
    }

    #[test]
    fn csv_is_reproducible_apart_from_timings() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = StudyConfig::new(2, 1, vec![1, 2]);
        cfg.methods = vec![Method::Modified];
        cfg.csv_path = Some(dir.path().join("a.csv"));
        run_study(&cfg).unwrap();
        let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
        cfg.csv_path = Some(dir.path().join("b.csv"));
        run_study(&cfg).unwrap();
        let b = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
        let strip = |s: &str| -> Vec<String> {
            s.lines()
                .map(|l| {
                    l.split(',')
                        .take(12) // drop the two timing columns
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
        assert!(a.starts_with(CSV_HEADER));
    }

    #[test]
    fn emits_matrix_and_pattern_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = StudyConfig::new(2, 1, vec![2]);
        cfg.methods = vec![Method::Modified];
        cfg.matrix_path = Some(dir.path().join("mat.mtx"));
        cfg.pattern_path = Some(dir.path().join("pat.txt"));
        let rows = run_study(&cfg).unwrap();
        assert!(rows[0].failure.is_none());
        let mtx = dir.path().join("mat_modified_N2.mtx");
        let pat = dir.path().join("pat_modified_N2.pat");
        let matrix = SparseMatrix::read_matrix_market(&mtx).unwrap();
        assert_eq!(matrix.dim(), rows[0].dof);
        assert_eq!(matrix.nnz(), rows[0].nnz);
        let lines = std::fs::read_to_string(&pat).unwrap().lines().count();
        assert_eq!(lines, rows[0].nnz);
    }

    #[test]
    fn invalid_levels_rejected() {
        let cfg = StudyConfig::new(2, 1, vec![3, 2]);
        assert!(run_study(&cfg).is_err());
        let cfg = StudyConfig::new(2, 1, vec![]);
        assert!(run_study(&cfg).is_err());
    }

    #[test]
    fn unknown_problem_fails_fast() {
        let mut cfg = StudyConfig::new(2, 1, vec![1]);
        cfg.problem = "mystery".into();
        assert!(run_study(&cfg).is_err());
    }
}
