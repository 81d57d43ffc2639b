//! `sgdg` — run sparse grid IPDG convergence and sparsity studies.

use clap::Parser;
use sgdg::assembly::Method;
use sgdg::linalg::SolveMethod;
use sgdg::study::{format_table, run_study, Kappa2Mode, StudyConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "sgdg",
    about = "Sparse grid IPDG studies for the variable-coefficient Helmholtz equation",
    long_about = None
)]
struct Cli {
    /// Spatial dimension d >= 2
    #[arg(long)]
    dim: Option<usize>,

    /// Polynomial degree k >= 1
    #[arg(long)]
    degree: Option<usize>,

    /// Level range "A..B" (inclusive) or a single level "N"
    #[arg(long)]
    levels: Option<String>,

    /// Bilinear form: original, modified, or both
    #[arg(long)]
    method: Option<String>,

    /// Built-in problem id (example1, constant_c)
    #[arg(long)]
    problem: Option<String>,

    /// Penalty parameter (default 5*k*d)
    #[arg(long)]
    sigma: Option<f64>,

    /// Gauss points per axis per segment (default k+3)
    #[arg(long)]
    quad_points: Option<usize>,

    /// Linear solver: dense or cg
    #[arg(long)]
    solver: Option<String>,

    /// Relative solver tolerance
    #[arg(long)]
    rel_tol: Option<f64>,

    /// Drop tolerance factor relative to the largest entry
    #[arg(long)]
    droptol: Option<f64>,

    /// Condition number reporting: on, off, auto
    #[arg(long)]
    kappa2: Option<String>,

    /// Quasi-Monte Carlo sample count for d >= 4 error estimation
    #[arg(long)]
    qmc_points: Option<usize>,

    /// CSV output path
    #[arg(long)]
    out: Option<PathBuf>,

    /// Emit Matrix Market files next to this path (suffixed per method/level)
    #[arg(long)]
    emit_matrix: Option<PathBuf>,

    /// Emit sparsity-pattern coordinate files next to this path
    #[arg(long)]
    emit_pattern: Option<PathBuf>,

    /// JSON config file; explicit flags win over file values
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_levels(text: &str) -> Result<Vec<usize>, String> {
    if let Some((a, b)) = text.split_once("..") {
        let a: usize = a.trim().parse().map_err(|e| format!("bad level: {e}"))?;
        let b: usize = b.trim().parse().map_err(|e| format!("bad level: {e}"))?;
        if b < a {
            return Err("level range must ascend".into());
        }
        Ok((a..=b).collect())
    } else {
        let n: usize = text.trim().parse().map_err(|e| format!("bad level: {e}"))?;
        Ok(vec![n])
    }
}

fn parse_methods(text: &str) -> Result<Vec<Method>, String> {
    match text {
        "original" => Ok(vec![Method::Original]),
        "modified" => Ok(vec![Method::Modified]),
        "both" => Ok(vec![Method::Modified, Method::Original]),
        other => Err(format!("unknown method '{other}' (original|modified|both)")),
    }
}

fn build_config(cli: &Cli) -> Result<StudyConfig, String> {
    let mut file_cfg: Option<StudyConfig> = None;
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| format!("config: {e}"))?;
        file_cfg =
            Some(serde_json::from_str(&text).map_err(|e| format!("config parse: {e}"))?);
    }
    let dim = cli
        .dim
        .or(file_cfg.as_ref().map(|c| c.dimension))
        .ok_or("missing --dim")?;
    let degree = cli
        .degree
        .or(file_cfg.as_ref().map(|c| c.degree))
        .ok_or("missing --degree")?;
    let levels = match &cli.levels {
        Some(text) => parse_levels(text)?,
        None => file_cfg
            .as_ref()
            .map(|c| c.levels.clone())
            .ok_or("missing --levels")?,
    };
    let mut cfg = StudyConfig::new(dim, degree, levels);
    if let Some(f) = file_cfg {
        cfg.methods = f.methods;
        cfg.problem = f.problem;
        cfg.sigma = f.sigma;
        cfg.quad_points = f.quad_points;
        cfg.solver = f.solver;
        cfg.rel_tol = f.rel_tol;
        cfg.droptol_factor = f.droptol_factor;
        cfg.kappa2 = f.kappa2;
        cfg.qmc_points = f.qmc_points;
        cfg.csv_path = f.csv_path;
        cfg.matrix_path = f.matrix_path;
        cfg.pattern_path = f.pattern_path;
    }
    if let Some(m) = &cli.method {
        cfg.methods = parse_methods(m)?;
    }
    if let Some(p) = &cli.problem {
        cfg.problem = p.clone();
    }
    if cli.sigma.is_some() {
        cfg.sigma = cli.sigma;
    }
    if cli.quad_points.is_some() {
        cfg.quad_points = cli.quad_points;
    }
    if let Some(s) = &cli.solver {
        cfg.solver = match s.as_str() {
            "dense" => SolveMethod::DenseCholesky,
            "cg" => SolveMethod::ConjugateGradient,
            other => return Err(format!("unknown solver '{other}' (dense|cg)")),
        };
    }
    if let Some(t) = cli.rel_tol {
        cfg.rel_tol = t;
    }
    if let Some(t) = cli.droptol {
        cfg.droptol_factor = t;
    }
    if let Some(k) = &cli.kappa2 {
        cfg.kappa2 = match k.as_str() {
            "on" => Kappa2Mode::On,
            "off" => Kappa2Mode::Off,
            "auto" => Kappa2Mode::Auto,
            other => return Err(format!("unknown kappa2 mode '{other}' (on|off|auto)")),
        };
    }
    if let Some(q) = cli.qmc_points {
        cfg.qmc_points = q;
    }
    if cli.out.is_some() {
        cfg.csv_path = cli.out.clone();
    }
    if cli.emit_matrix.is_some() {
        cfg.matrix_path = cli.emit_matrix.clone();
    }
    if cli.emit_pattern.is_some() {
        cfg.pattern_path = cli.emit_pattern.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_study(&cfg) {
        Ok(rows) => {
            print!("{}", format_table(&rows));
            if let Some(csv) = &cfg.csv_path {
                eprintln!("wrote {}", csv.display());
            }
            if rows.iter().any(|r| r.failure.is_some()) {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
