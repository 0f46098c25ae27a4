//! Command-line front end: runs experiments, writes their tables and
//! manifests, re-runs finished experiments from their manifests, and
//! summarizes output directories.
//!
//! Every `run` subcommand writes tab-separated tables plus a `manifest.txt`
//! into the output directory (flag `--out`, else `$QPOT_OUT_DIR`, else
//! `./qpot-out`). `rerun <manifest>` repeats a run from its manifest and
//! reproduces the tables byte for byte. `report <dir>...` reads what a run
//! wrote and prints pass counts, worst margins, and plot-ready columns.
//!
//! Exit codes: 0 when everything ran and passed, 1 when a check failed or
//! a computation broke down, 2 for usage, configuration, and output
//! problems.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_traits::Zero;

use qpot::calc::{Defect, OperatorTable};
use qpot::config::ExperimentConfig;
use qpot::grid::{Box4, GridFunction};
use qpot::poly::RealPolynomial;
use qpot::potential::{
    capacity, extremal_function, fit_power_law, outer_capacity, sublevel_capacity_decay, Ball,
    CompactSpec,
};
use qpot::report::CheckReport;
use qpot::table::{cell, Manifest, Table};
use qpot::verify::{
    check_identities, check_identities_injected, run_battery, BatteryConfig,
};
use qpot::{QpotError, Result};

#[derive(Parser)]
#[command(
    name = "qpot",
    version,
    about = "Quaternionic pluripotential experiments: exact operator checks, \
             Monge-Ampère densities, extremal functions, capacities",
    after_help = "Output directory resolution: --out flag, then $QPOT_OUT_DIR, \
                  then ./qpot-out."
)]
struct Cli {
    #[command(subcommand)]
    command: TopCommand,
}

#[derive(Subcommand)]
enum TopCommand {
    /// Run one experiment and write its tables and manifest.
    Run {
        #[command(subcommand)]
        which: RunCommand,
    },
    /// Repeat a run from the manifest an earlier run wrote. The tables it
    /// writes are byte-identical to the original run's.
    Rerun {
        /// Path to a manifest.txt written by `qpot run`.
        manifest: PathBuf,
        /// Write outputs here instead of the directory named in the
        /// manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize one or more output directories: pass counts, worst
    /// margins, fitted exponents, plot-ready columns.
    Report {
        /// Output directories written by `qpot run`.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct OutOpt {
    /// Output directory for tables and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl OutOpt {
    fn resolve(&self) -> PathBuf {
        if let Some(dir) = &self.out {
            return dir.clone();
        }
        if let Some(dir) = std::env::var_os("QPOT_OUT_DIR") {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        PathBuf::from("qpot-out")
    }
}

#[derive(Subcommand)]
enum RunCommand {
    /// Exact differential identities on random polynomials and forms.
    Identities {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Random instances per dimension.
        #[arg(long, default_value_t = 40)]
        count: usize,
        /// Largest quaternionic dimension exercised; the suite runs every
        /// dimension from 1 up to this.
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Run against a deliberately broken operator table. The suite
        /// must then fail, demonstrating the checks have teeth.
        #[arg(long, value_name = "DEFECT")]
        inject: Option<Defect>,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Monge-Ampère density of a named test function, computed exactly
    /// and printed.
    MaDensity {
        /// One of: normsq, coord0-square, zero.
        #[arg(long, default_value = "normsq")]
        function: String,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Solve the obstacle problem for a compact set and store the radial
    /// profile and a lattice snapshot.
    Extremal {
        /// Compact set spec, repeatable for unions: ball:R,
        /// ball:R@c0,c1,c2,c3, point:c0,c1,c2,c3, empty.
        #[arg(long = "K", default_value = "ball:0.5")]
        sets: Vec<String>,
        /// Radius of the domain ball.
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        /// Lattice cells per axis (odd).
        #[arg(long, default_value_t = 21)]
        res: usize,
        /// Solver tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Capacity of a compact set relative to the domain ball, with
    /// residual diagnostics.
    Capacity {
        /// Compact set spec, repeatable for unions.
        #[arg(long = "K", default_value = "ball:0.5")]
        sets: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, default_value_t = 21)]
        res: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Capacity decay studies: shrinking neighborhoods of a set (fitted
    /// power law) and sublevel sets of a model pole (threshold products).
    Decay {
        /// Target set for the shrinking study; its dilations by the radii
        /// schedule are the neighborhoods.
        #[arg(long = "K", default_value = "point:0,0,0,0")]
        sets: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, default_value_t = 21)]
        res: usize,
        /// Shrinking neighborhood schedule, strictly decreasing.
        #[arg(long, value_delimiter = ',', default_values_t = [0.4, 0.2, 0.1, 0.05])]
        radii: Vec<f64>,
        /// Sublevel thresholds, strictly increasing.
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 4.0])]
        thresholds: Vec<f64>,
        /// Depth c of the model pole -c/|q|^2 for the sublevel study.
        #[arg(long, default_value_t = 0.04)]
        pole_depth: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        out: OutOpt,
    },
    /// The full verification battery: identities, pinned operator values,
    /// Moore proportionality, comparison and smoothing checks, convergence
    /// of capacities, capacity axioms, the mass bound, fault injection.
    VerifyAll {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Random instances per symbolic check.
        #[arg(long, default_value_t = 40)]
        count: usize,
        /// Randomized pairs per grid check.
        #[arg(long, default_value_t = 20)]
        pairs: usize,
        /// Lattice for the comparison, smoothing, and mass-bound checks.
        #[arg(long, default_value_t = 21)]
        res: usize,
        /// Lattice for the capacity axiom families (dyadic spacings such
        /// as 9, 17, 33 keep ball membership exact).
        #[arg(long, default_value_t = 17)]
        axiom_res: usize,
        /// Lattice for the convergence checks.
        #[arg(long, default_value_t = 41)]
        conv_res: usize,
        #[command(flatten)]
        out: OutOpt,
    },
}

impl RunCommand {
    /// Fold the flags into a validated config.
    fn into_config(self) -> Result<ExperimentConfig> {
        let cfg = match self {
            RunCommand::Identities {
                seed,
                count,
                n,
                inject,
                out,
            } => {
                let mut c = ExperimentConfig::new("identities");
                c.seed = seed;
                c.count = count;
                c.n = n;
                c.inject = inject.map_or_else(|| "none".to_string(), |d| d.id().to_string());
                c.output_dir = out.resolve();
                c
            }
            RunCommand::MaDensity { function, n, out } => {
                let mut c = ExperimentConfig::new("ma-density");
                c.function = function;
                c.n = n;
                c.output_dir = out.resolve();
                c
            }
            RunCommand::Extremal {
                sets,
                omega,
                res,
                tol,
                out,
            } => {
                let mut c = ExperimentConfig::new("extremal");
                c.sets = sets;
                c.domain_radius = omega;
                c.resolution = res;
                c.tolerance = tol;
                c.output_dir = out.resolve();
                c
            }
            RunCommand::Capacity {
                sets,
                omega,
                res,
                tol,
                out,
            } => {
                let mut c = ExperimentConfig::new("capacity");
                c.sets = sets;
                c.domain_radius = omega;
                c.resolution = res;
                c.tolerance = tol;
                c.output_dir = out.resolve();
                c
            }
            RunCommand::Decay {
                sets,
                omega,
                res,
                radii,
                thresholds,
                pole_depth,
                tol,
                out,
            } => {
                let mut c = ExperimentConfig::new("decay");
                c.sets = sets;
                c.domain_radius = omega;
                c.resolution = res;
                c.radii = radii;
                c.thresholds = thresholds;
                c.pole_depth = pole_depth;
                c.tolerance = tol;
                c.output_dir = out.resolve();
                c
            }
            RunCommand::VerifyAll {
                seed,
                count,
                pairs,
                res,
                axiom_res,
                conv_res,
                out,
            } => {
                let mut c = ExperimentConfig::new("verify-all");
                c.seed = seed;
                c.count = count;
                c.pairs = pairs;
                c.resolution = res;
                c.axiom_resolution = axiom_res;
                c.convergence_resolution = conv_res;
                c.output_dir = out.resolve();
                c
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        TopCommand::Run { which } => which.into_config().and_then(|cfg| execute(&cfg)),
        TopCommand::Rerun { manifest, out } => rerun(&manifest, out),
        TopCommand::Report { dirs } => report(&dirs),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let (code, prefix) = classify(&e);
            eprintln!("{prefix}: {e}");
            ExitCode::from(code)
        }
    }
}

/// Map an error to its exit code and diagnostic class. Configuration and
/// input problems are usage errors (2); output-directory problems get the
/// same code but their own prefix; everything else is a failed run (1).
fn classify(e: &QpotError) -> (u8, &'static str) {
    match e {
        QpotError::Config(_) => (2, "configuration error"),
        QpotError::Parse(_) => (2, "input error"),
        QpotError::Io(_) => (2, "output error"),
        _ => (1, "run failed"),
    }
}

fn rerun(manifest_path: &Path, out: Option<PathBuf>) -> Result<bool> {
    let manifest = Manifest::read(manifest_path)?;
    let mut cfg = ExperimentConfig::from_manifest(&manifest)?;
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    cfg.validate()?;
    execute(&cfg)
}

/// Run the command a validated config names. Returns whether every check
/// in the run passed (commands without checks always pass when they
/// complete).
fn execute(cfg: &ExperimentConfig) -> Result<bool> {
    match cfg.command.as_str() {
        "identities" => run_identities(cfg),
        "ma-density" => run_ma_density(cfg),
        "extremal" => run_extremal(cfg),
        "capacity" => run_capacity(cfg),
        "decay" => run_decay(cfg),
        "verify-all" => run_verify_all(cfg),
        other => Err(QpotError::Config(vec![format!(
            "command: unknown id {other:?}"
        )])),
    }
}

// ---------------------------------------------------------------------------
// Run subcommands
// ---------------------------------------------------------------------------

fn run_identities(cfg: &ExperimentConfig) -> Result<bool> {
    let started = Instant::now();
    let dims: Vec<usize> = (1..=cfg.n).collect();
    let report = match cfg.injected_defect()? {
        None => check_identities(cfg.seed, cfg.count, &dims)?,
        Some(d) => check_identities_injected(cfg.seed, cfg.count, &dims, d)?,
    };
    let reports = vec![report];
    let tables = check_tables(&reports)?;
    write_run_output(cfg, &tables, result_section(&reports), started)?;
    print_check_summary(&reports);
    Ok(reports.iter().all(|r| r.passed))
}

fn run_verify_all(cfg: &ExperimentConfig) -> Result<bool> {
    let started = Instant::now();
    let battery = BatteryConfig {
        seed: cfg.seed,
        identity_count: cfg.count,
        quadratic_count: cfg.count,
        pair_count: cfg.pairs,
        grid_resolution: cfg.resolution,
        axiom_resolution: cfg.axiom_resolution,
        convergence_resolution: cfg.convergence_resolution,
    };
    let reports = run_battery(&battery)?;
    let tables = check_tables(&reports)?;
    write_run_output(cfg, &tables, result_section(&reports), started)?;
    print_check_summary(&reports);
    Ok(reports.iter().all(|r| r.passed))
}

fn run_ma_density(cfg: &ExperimentConfig) -> Result<bool> {
    let started = Instant::now();
    let n = cfg.n;
    let u = named_function(&cfg.function, n)?;
    let table_ops = OperatorTable::new(n);
    let density = table_ops.ma_density(&vec![u; n])?;
    let text = polynomial_text(&density);
    let mut t = Table::new("density", &["function", "n", "density"])?;
    t.push_row(vec![cfg.function.clone(), n.to_string(), text.clone()])?;
    write_run_output(
        cfg,
        &[t],
        vec![("density".to_string(), text.clone())],
        started,
    )?;
    println!("{text}");
    Ok(true)
}

fn run_extremal(cfg: &ExperimentConfig) -> Result<bool> {
    let started = Instant::now();
    let k = cfg.compact()?;
    let geom = Box4::new([0.0; 4], cfg.domain_radius, cfg.resolution)?;
    let sol = extremal_function(&k, cfg.domain_radius, geom, cfg.tolerance)?;
    let reference = radial_reference(&k, cfg.domain_radius);
    let mut columns = vec!["rho", "value", "obstacle"];
    if reference.is_some() {
        columns.push("reference");
    }
    let mut t = Table::new("profile", &columns)?;
    let m = geom.resolution();
    let c = m / 2;
    for i in 0..=(m - 1 - c) {
        let idx = [c + i, c, c, c];
        let flat = geom.flat(idx);
        let rho = geom.point(idx)[0];
        let mut row = vec![
            cell(rho),
            cell(sol.u.value(flat)),
            cell(sol.obstacle.value(flat)),
        ];
        if let Some(f) = &reference {
            row.push(cell(f(rho)));
        }
        t.push_row(row)?;
    }
    let snapshot_path = cfg.output_dir.join("extremal.grid");
    ensure_output_dir(&cfg.output_dir)?;
    let mut file = create_output_file(&snapshot_path)?;
    sol.u.export(&mut file)?;
    let result = vec![
        ("iterations".to_string(), sol.iterations.to_string()),
        ("residual".to_string(), cell(sol.residual)),
        ("resolution".to_string(), cfg.resolution.to_string()),
    ];
    write_run_output(cfg, &[t], result, started)?;
    eprintln!("wrote {}", snapshot_path.display());
    println!(
        "extremal solve: {} sweeps, final residual {}",
        sol.iterations,
        cell(sol.residual)
    );
    Ok(true)
}

fn run_capacity(cfg: &ExperimentConfig) -> Result<bool> {
    let started = Instant::now();
    let k = cfg.compact()?;
    let geom = Box4::new([0.0; 4], cfg.domain_radius, cfg.resolution)?;
    let cv = capacity(&k, cfg.domain_radius, geom, cfg.tolerance)?;
    let mut t = Table::new(
        "capacity",
        &[
            "sets",
            "omega",
            "resolution",
            "capacity",
            "iterations",
            "residual",
            "near_boundary_fraction",
        ],
    )?;
    t.push_row(vec![
        cfg.sets.join(" "),
        cell(cfg.domain_radius),
        cfg.resolution.to_string(),
        cell(cv.value),
        cv.iterations.to_string(),
        cell(cv.residual),
        cell(cv.near_boundary_fraction),
    ])?;
    let result = vec![
        ("capacity".to_string(), cell(cv.value)),
        ("iterations".to_string(), cv.iterations.to_string()),
        ("residual".to_string(), cell(cv.residual)),
        (
            "near_boundary_fraction".to_string(),
            cell(cv.near_boundary_fraction),
        ),
    ];
    write_run_output(cfg, &[t], result, started)?;
    println!("capacity {}", cell(cv.value));
    println!(
        "diagnostics: {} sweeps, final residual {}, fraction of mass near the \
         set boundary {}",
        cv.iterations,
        cell(cv.residual),
        cell(cv.near_boundary_fraction)
    );
    Ok(true)
}

fn run_decay(cfg: &ExperimentConfig) -> Result<bool> {
    let started = Instant::now();
    let k = cfg.compact()?;
    let geom = Box4::new([0.0; 4], cfg.domain_radius, cfg.resolution)?;

    let study = outer_capacity(&k, cfg.domain_radius, geom, &cfg.radii, cfg.tolerance)?;
    let mut shrinking = Table::new(
        "shrinking",
        &["radius", "capacity", "iterations", "residual"],
    )?;
    for (delta, cv) in &study.table {
        shrinking.push_row(vec![
            cell(*delta),
            cell(cv.value),
            cv.iterations.to_string(),
            cell(cv.residual),
        ])?;
    }
    let points: Vec<(f64, f64)> = study.table.iter().map(|(d, cv)| (*d, cv.value)).collect();
    let fit = fit_power_law(&points);

    let c = cfg.pole_depth;
    let v = GridFunction::sample_excluding(
        geom,
        cfg.domain_radius,
        |p| {
            let d2: f64 = p.iter().map(|x| x * x).sum();
            -c / d2
        },
        |p| p.iter().all(|&x| x == 0.0),
    )?;
    let within = Ball::new([0.0; 4], cfg.domain_radius / 2.0)?;
    let rows = sublevel_capacity_decay(&v, within, &cfg.thresholds, cfg.tolerance)?;
    let mut sublevel = Table::new("sublevel", &["threshold", "capacity", "product"])?;
    let mut max_product = 0.0f64;
    for (m, cv) in &rows {
        let product = m * cv.value;
        max_product = max_product.max(product);
        sublevel.push_row(vec![cell(*m), cell(cv.value), cell(product)])?;
    }

    let mut result = Vec::new();
    match fit {
        Some((p, a)) => {
            result.push(("fit_exponent".to_string(), cell(p)));
            result.push(("fit_scale".to_string(), cell(a)));
        }
        None => result.push(("fit_exponent".to_string(), "undefined".to_string())),
    }
    result.push(("max_threshold_product".to_string(), cell(max_product)));
    write_run_output(cfg, &[shrinking, sublevel], result, started)?;

    match fit {
        Some((p, a)) => println!(
            "shrinking neighborhoods: capacity ~ {} * radius^{}",
            cell(a),
            cell(p)
        ),
        None => println!("shrinking neighborhoods: no usable fit"),
    }
    println!(
        "sublevel thresholds: largest threshold * capacity product {}",
        cell(max_product)
    );
    Ok(true)
}

// ---------------------------------------------------------------------------
// Shared run helpers
// ---------------------------------------------------------------------------

/// The two tables every check-based run writes: one summary row per check,
/// one row per instance.
fn check_tables(reports: &[CheckReport]) -> Result<Vec<Table>> {
    let mut checks = Table::new(
        "checks",
        &["check", "instances", "worst_margin", "tolerance", "verdict"],
    )?;
    let mut instances = Table::new("instances", &["check", "label", "margin", "note"])?;
    for r in reports {
        checks.push_row(vec![
            r.check_id.clone(),
            r.instances.to_string(),
            cell(r.worst_margin),
            cell(r.tolerance),
            verdict(r.passed).to_string(),
        ])?;
        for rec in &r.details {
            instances.push_row(vec![
                r.check_id.clone(),
                rec.label.clone(),
                cell(rec.margin),
                rec.note.clone(),
            ])?;
        }
    }
    Ok(vec![checks, instances])
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "pass"
    } else {
        "FAIL"
    }
}

fn result_section(reports: &[CheckReport]) -> Vec<(String, String)> {
    let total = reports.len();
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.check_id.as_str())
        .collect();
    let worst = reports
        .iter()
        .map(|r| r.worst_margin)
        .fold(f64::INFINITY, f64::min);
    let mut out = vec![
        ("checks".to_string(), total.to_string()),
        ("failures".to_string(), failed.len().to_string()),
        ("worst_margin".to_string(), cell(worst)),
    ];
    if !failed.is_empty() {
        out.push(("failed_checks".to_string(), failed.join(" ")));
    }
    out
}

fn print_check_summary(reports: &[CheckReport]) {
    for r in reports {
        println!("{r}");
    }
    let total = reports.len();
    let failed = reports.iter().filter(|r| !r.passed).count();
    let worst = reports
        .iter()
        .map(|r| r.worst_margin)
        .fold(f64::INFINITY, f64::min);
    let residual = (-worst).max(0.0);
    if failed == 0 {
        println!("PASS {total}/{total} checks, worst residual {}", cell(residual));
    } else {
        let names: Vec<&str> = reports
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.check_id.as_str())
            .collect();
        println!(
            "FAIL {failed}/{total} checks ({}), worst residual {}",
            names.join(", "),
            cell(residual)
        );
    }
}

fn ensure_output_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        QpotError::Io(std::io::Error::new(
            e.kind(),
            format!("cannot create output directory {}: {e}", dir.display()),
        ))
    })
}

fn create_output_file(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| {
        QpotError::Io(std::io::Error::new(
            e.kind(),
            format!("cannot write {}: {e}", path.display()),
        ))
    })
}

/// Write every table plus the manifest (config echo, versions, result,
/// timing) into the configured output directory.
fn write_run_output(
    cfg: &ExperimentConfig,
    tables: &[Table],
    result_entries: Vec<(String, String)>,
    started: Instant,
) -> Result<()> {
    let dir = &cfg.output_dir;
    ensure_output_dir(dir)?;
    for t in tables {
        let path = dir.join(format!("{}.tsv", t.name()));
        std::fs::write(&path, t.to_tsv()).map_err(|e| {
            QpotError::Io(std::io::Error::new(
                e.kind(),
                format!("cannot write {}: {e}", path.display()),
            ))
        })?;
        eprintln!("wrote {}", path.display());
    }
    let mut manifest = cfg.to_manifest();
    manifest.push_section(
        "versions",
        vec![
            ("package".to_string(), env!("CARGO_PKG_NAME").to_string()),
            ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("table_format".to_string(), "1".to_string()),
        ],
    )?;
    if !result_entries.is_empty() {
        manifest.push_section("result", result_entries)?;
    }
    manifest.push_section(
        "timing",
        vec![(
            "wall_seconds".to_string(),
            format!("{:.3}", started.elapsed().as_secs_f64()),
        )],
    )?;
    let path = dir.join("manifest.txt");
    std::fs::write(&path, manifest.to_text()).map_err(|e| {
        QpotError::Io(std::io::Error::new(
            e.kind(),
            format!("cannot write {}: {e}", path.display()),
        ))
    })?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// The named test functions of the density command.
fn named_function(name: &str, n: usize) -> Result<RealPolynomial> {
    match name {
        "normsq" => {
            let mut u = RealPolynomial::zero(n);
            for m in 0..4 * n {
                let x = RealPolynomial::coord(n, m);
                u = u.add(&x.mul(&x));
            }
            Ok(u)
        }
        "coord0-square" => {
            let x = RealPolynomial::coord(n, 0);
            Ok(x.mul(&x))
        }
        "zero" => Ok(RealPolynomial::zero(n)),
        other => Err(QpotError::Config(vec![format!(
            "function: unknown name {other:?}"
        )])),
    }
}

/// Plain text for an exact polynomial: the bare constant when it is one,
/// otherwise a sum of monomials.
fn polynomial_text(p: &RealPolynomial) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut parts: Vec<String> = Vec::new();
    let mut terms: Vec<_> = p.terms().collect();
    terms.sort_by(|a, b| a.0.cmp(b.0));
    for (exps, coef) in terms {
        let mut piece = if coef.im.is_zero() {
            format!("{}", coef.re)
        } else {
            format!("({} + {}im)", coef.re, coef.im)
        };
        for (m, e) in exps.iter().enumerate() {
            match e {
                0 => {}
                1 => piece.push_str(&format!(" x{m}")),
                _ => piece.push_str(&format!(" x{m}^{e}")),
            }
        }
        parts.push(piece);
    }
    parts.join(" + ")
}

/// Closed-form radial profile of the extremal function when the compact is
/// a single origin-centered ball strictly between radius 0 and the domain
/// radius: harmonic in |q|^-2 on the annulus, clamped to [-1, 0].
fn radial_reference(k: &CompactSpec, omega_radius: f64) -> Option<Box<dyn Fn(f64) -> f64>> {
    let CompactSpec::Balls(balls) = k else {
        return None;
    };
    if balls.len() != 1 {
        return None;
    }
    let b = &balls[0];
    if b.center != [0.0; 4] || b.radius <= 0.0 || b.radius >= omega_radius {
        return None;
    }
    let r = b.radius;
    let cap_r = omega_radius;
    Some(Box::new(move |rho: f64| {
        if rho <= r {
            return -1.0;
        }
        if rho >= cap_r {
            return 0.0;
        }
        let num = rho.powi(-2) - cap_r.powi(-2);
        let den = r.powi(-2) - cap_r.powi(-2);
        (-num / den).clamp(-1.0, 0.0)
    }))
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// Summarize output directories. Returns whether every checked run passed.
fn report(dirs: &[PathBuf]) -> Result<bool> {
    let mut all_passed = true;
    for dir in dirs {
        let manifest = Manifest::read(&dir.join("manifest.txt"))?;
        let command = manifest
            .get("config", "command")
            .ok_or_else(|| {
                QpotError::Parse(format!(
                    "{}: manifest has no command entry",
                    dir.display()
                ))
            })?
            .to_string();
        println!("{}: {command}", dir.display());
        let passed = match command.as_str() {
            "identities" | "verify-all" => report_checks(dir)?,
            "ma-density" => report_density(dir)?,
            "extremal" => report_extremal(dir, &manifest)?,
            "capacity" => report_capacity(dir)?,
            "decay" => report_decay(dir)?,
            other => {
                return Err(QpotError::Parse(format!(
                    "{}: manifest names unknown command {other:?}",
                    dir.display()
                )))
            }
        };
        all_passed &= passed;
    }
    Ok(all_passed)
}

fn report_checks(dir: &Path) -> Result<bool> {
    let t = Table::read(&dir.join("checks.tsv"))?;
    let check = t.column_index("check")?;
    let worst = t.column_index("worst_margin")?;
    let tol = t.column_index("tolerance")?;
    let verdict_col = t.column_index("verdict")?;
    let mut failed: Vec<String> = Vec::new();
    for row in t.rows() {
        println!(
            "  {}: worst margin {} (tolerance {}) {}",
            row[check], row[worst], row[tol], row[verdict_col]
        );
        if row[verdict_col] != "pass" {
            failed.push(row[check].clone());
        }
    }
    let total = t.rows().len();
    if failed.is_empty() {
        println!("  PASS {total}/{total}");
        Ok(true)
    } else {
        println!("  FAIL {}/{total}: {}", failed.len(), failed.join(", "));
        Ok(false)
    }
}

fn report_density(dir: &Path) -> Result<bool> {
    let t = Table::read(&dir.join("density.tsv"))?;
    let f = t.column_index("function")?;
    let n = t.column_index("n")?;
    let d = t.column_index("density")?;
    for row in t.rows() {
        println!("  density of {} at n={}: {}", row[f], row[n], row[d]);
    }
    Ok(true)
}

fn report_extremal(dir: &Path, manifest: &Manifest) -> Result<bool> {
    let t = Table::read(&dir.join("profile.tsv"))?;
    let rho = t.column_index("rho")?;
    let value = t.column_index("value")?;
    println!("  radial profile, {} samples (rho, value):", t.rows().len());
    for row in t.rows() {
        println!("    {}\t{}", row[rho], row[value]);
    }
    if let Ok(reference) = t.column_index("reference") {
        let mut sup = 0.0f64;
        for row in t.rows() {
            let v: f64 = parse_cell(&row[value])?;
            let f: f64 = parse_cell(&row[reference])?;
            sup = sup.max((v - f).abs());
        }
        println!("  largest deviation from the radial closed form: {}", cell(sup));
    }
    if let Some(res) = manifest.get("result", "residual") {
        println!("  final residual {res}");
    }
    Ok(true)
}

fn report_capacity(dir: &Path) -> Result<bool> {
    let t = Table::read(&dir.join("capacity.tsv"))?;
    let sets = t.column_index("sets")?;
    let value = t.column_index("capacity")?;
    let res = t.column_index("resolution")?;
    let residual = t.column_index("residual")?;
    for row in t.rows() {
        println!(
            "  capacity of {} at resolution {}: {} (residual {})",
            row[sets], row[res], row[value], row[residual]
        );
    }
    Ok(true)
}

fn report_decay(dir: &Path) -> Result<bool> {
    let shrinking = Table::read(&dir.join("shrinking.tsv"))?;
    let radius = shrinking.column_index("radius")?;
    let capacity_col = shrinking.column_index("capacity")?;
    println!("  shrinking neighborhoods (radius, capacity):");
    let mut points = Vec::new();
    for row in shrinking.rows() {
        println!("    {}\t{}", row[radius], row[capacity_col]);
        points.push((parse_cell(&row[radius])?, parse_cell(&row[capacity_col])?));
    }
    match fit_power_law(&points) {
        Some((p, a)) => println!("  fitted power law: capacity ~ {} * radius^{}", cell(a), cell(p)),
        None => println!("  fitted power law: not defined for these points"),
    }

    let sublevel = Table::read(&dir.join("sublevel.tsv"))?;
    let threshold = sublevel.column_index("threshold")?;
    let cap = sublevel.column_index("capacity")?;
    let product = sublevel.column_index("product")?;
    println!("  sublevel thresholds (threshold, capacity):");
    let mut max_product = 0.0f64;
    for row in sublevel.rows() {
        println!("    {}\t{}", row[threshold], row[cap]);
        max_product = max_product.max(parse_cell(&row[product])?);
    }
    println!("  largest threshold * capacity product: {}", cell(max_product));
    Ok(true)
}

fn parse_cell(text: &str) -> Result<f64> {
    text.parse()
        .map_err(|_| QpotError::Parse(format!("expected a number in a table cell, got {text:?}")))
}
