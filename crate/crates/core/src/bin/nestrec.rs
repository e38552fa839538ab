use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use nestrec::cpr::{cpr_two_stage, default_compressed_dim, generate_cpr, lifted_error, CprConfig};
use nestrec::harness::{emit_csv, run_grid, ExperimentConfig};
use nestrec::minimax::{
    build_sign_packing, build_support_packing, log_binomial, minimax_report, SIGN_MIN_FRACTION, SIGN_TARGET_RATE,
};
use nestrec::model::{ProblemDims, StructuredTarget};
use nestrec::operators::{estimate_rip, gamma_product, load_operator, NestedOperator, Structure};
use nestrec::{matrix_io, recover, RecoveryConfig, StageMethod};

#[derive(Parser)]
#[command(
    name = "nestrec",
    version,
    about = "Recovery of low-rank, row-sparse matrices from nested measurements"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Recover one matrix from a saved operator and measurement vector
    Recover(RecoverArgs),
    /// Run a seeded (k, r) grid and write per-trial CSV
    Experiment(ExperimentArgs),
    /// Probe restricted isometry of Gaussian Ψ and W
    Rip(RipArgs),
    /// Minimax lower-bound table
    Minimax(MinimaxArgs),
    /// Build and certify a support or sign packing
    Packing(PackingArgs),
    /// Compressive phase retrieval on a generated instance
    Cpr(CprArgs),
}

#[derive(Args)]
struct RecoverArgs {
    /// Directory written by `save_operator`
    #[arg(long)]
    operator: PathBuf,
    /// Measurements, an n×1 matrix file
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Where to write the estimate
    #[arg(long)]
    out: Option<PathBuf>,
    /// True matrix, for error reporting
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long, default_value = "admm")]
    stage1: StageMethod,
    #[arg(long, default_value = "admm")]
    stage2: StageMethod,
    #[arg(long)]
    postprocess: bool,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `master_seed`
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SizeArgs {
    #[arg(long, default_value_t = 1000)]
    p1: usize,
    #[arg(long, default_value_t = 30)]
    p2: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    r: usize,
    /// Defaults to ⌈5k ln(p1/k)⌉
    #[arg(long)]
    m: Option<usize>,
    /// Defaults to 4r·max(m, p2)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SizeArgs {
    fn dims(&self) -> nestrec::Result<ProblemDims> {
        let base = ProblemDims::with_default_rules(self.p1, self.p2, self.k, self.r)?;
        let m = self.m.unwrap_or(base.m);
        let n = self.n.unwrap_or(nestrec::model::measurement_count(self.r, m, self.p2));
        ProblemDims::new(self.p1, self.p2, m, n, self.k, self.r)
    }
}

#[derive(Args)]
struct RipArgs {
    #[command(flatten)]
    size: SizeArgs,
    #[arg(long, default_value_t = 500)]
    trials: usize,
}

#[derive(Args)]
struct MinimaxArgs {
    #[command(flatten)]
    size: SizeArgs,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    /// Hypotheses sampled from each class
    #[arg(long, default_value_t = 100)]
    samples: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum PackingKind {
    Support,
    Sign,
}

#[derive(Args)]
struct PackingArgs {
    #[arg(long, value_enum, default_value = "support")]
    kind: PackingKind,
    /// Universe size (support packing)
    #[arg(long, default_value_t = 100)]
    p1: usize,
    /// Support size (support packing)
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Sign matrix rows (sign packing)
    #[arg(long, default_value_t = 2)]
    rows: usize,
    /// Sign matrix columns (sign packing)
    #[arg(long, default_value_t = 10)]
    cols: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CprArgs {
    #[arg(long, default_value_t = 64)]
    p: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Defaults to ⌈2k(1 + ln(p/k))⌉
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Wirtinger-flow iterations
    #[arg(long, default_value_t = 500)]
    iters: usize,
}

/// `Ok(true)` means the command ran but some solve failed.
fn run(cmd: Cmd) -> nestrec::Result<bool> {
    match cmd {
        Cmd::Recover(a) => cmd_recover(a),
        Cmd::Experiment(a) => cmd_experiment(a),
        Cmd::Rip(a) => cmd_rip(a),
        Cmd::Minimax(a) => cmd_minimax(a),
        Cmd::Packing(a) => cmd_packing(a),
        Cmd::Cpr(a) => cmd_cpr(a),
    }
}

fn cmd_recover(a: RecoverArgs) -> nestrec::Result<bool> {
    let (op, manifest) = load_operator(&a.operator)?;
    let y = matrix_io::load(&a.y)?;
    if y.ncols() != 1 {
        return Err(nestrec::Error::Dimension(format!(
            "measurements must be n×1, got {:?}",
            y.shape()
        )));
    }
    let y = DVector::from_column_slice(y.as_slice());
    let dims = ProblemDims::new(manifest.p1, manifest.p2, manifest.m, manifest.n, a.k, a.r)?;
    let mut cfg = if a.sigma > 0.0 {
        RecoveryConfig::noisy()
    } else {
        RecoveryConfig::default()
    };
    cfg.c1 = a.c1.unwrap_or(cfg.c1);
    cfg.c2 = a.c2.unwrap_or(cfg.c2);
    cfg.stage1 = a.stage1;
    cfg.stage2 = a.stage2;
    cfg.postprocess = a.postprocess;
    cfg.solver.max_iters = a.max_iters.unwrap_or(cfg.solver.max_iters);
    cfg.solver.tol = a.tol.unwrap_or(cfg.solver.tol);
    let truth = match &a.truth {
        Some(p) => Some(truth_from(matrix_io::load(p)?)?),
        None => None,
    };
    let start = Instant::now();
    let res = recover(&y, &op, &dims, a.sigma, &cfg, truth.as_ref())?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    for (name, rep) in [("stage1", &res.stage1_report), ("stage2", &res.stage2_report)] {
        println!(
            "{name}: iters={} converged={} primal={:.3e} dual={:.3e} objective={:.6e}",
            rep.iters_used, rep.converged, rep.primal_residual, rep.dual_residual, rep.objective
        );
    }
    if let Some(err) = res.frobenius_error {
        println!("frobenius_error={err:.6e}");
    }
    if let Some(err) = res.normalized_sq_error {
        println!("normalized_sq_error={err:.6e}");
    }
    println!("wall_ms={ms:.1}");
    if let Some(out) = &a.out {
        matrix_io::save(out, &res.estimate)?;
    }
    Ok(!res.converged())
}

fn truth_from(x: nalgebra::DMatrix<f64>) -> nestrec::Result<StructuredTarget> {
    // factor as X = X · I so that error reporting needs only the matrix
    let eye = nalgebra::DMatrix::identity(x.ncols(), x.ncols());
    StructuredTarget::from_factors(x, eye)
}

fn cmd_experiment(a: ExperimentArgs) -> nestrec::Result<bool> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads.unwrap_or(0))
        .build()
        .map_err(|e| nestrec::Error::Config(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let table = pool.install(|| run_grid(&cfg))?;
    emit_csv(&table, &a.out)?;
    println!("{:>4} {:>3} {:>14}", "k", "r", "median_err");
    for ((k, r), m) in &table.medians {
        println!("{k:>4} {r:>3} {m:>14.6e}");
    }
    if table.unit_sigma {
        println!("sigma2 = 0: errors are raw squared Frobenius errors");
    }
    println!(
        "{} rows, {} failed, {:.1} s -> {}",
        table.rows.len(),
        table.failed_count(),
        start.elapsed().as_secs_f64(),
        a.out.display()
    );
    Ok(table.failed_count() > 0)
}

fn cmd_rip(a: RipArgs) -> nestrec::Result<bool> {
    let dims = a.size.dims()?;
    let op = NestedOperator::gaussian(&dims, a.size.seed)?;
    let psi = estimate_rip(
        &op.psi,
        (dims.p1, dims.p2),
        Structure::RowSparse(dims.k),
        a.trials,
        a.size.seed,
    )?;
    let w = estimate_rip(
        &op.w,
        (dims.m, dims.p2),
        Structure::LowRank(dims.r),
        a.trials,
        a.size.seed,
    )?;
    println!(
        "dims p1={} p2={} m={} n={} k={} r={}",
        dims.p1, dims.p2, dims.m, dims.n, dims.k, dims.r
    );
    println!(
        "{:<10} {:>8} {:>12} {:>10} {:>10}",
        "operator", "probes", "delta_lower", "min_ratio", "max_ratio"
    );
    for (name, e) in [("psi", &psi), ("w", &w)] {
        println!(
            "{name:<10} {:>8} {:>12.4} {:>10.4} {:>10.4}",
            e.trials, e.delta_lower_bound, e.min_ratio, e.max_ratio
        );
    }
    println!("gamma (1+delta_w)(1+delta_psi) = {:.4}", gamma_product(&psi, &w));
    Ok(false)
}

fn cmd_minimax(a: MinimaxArgs) -> nestrec::Result<bool> {
    let dims = a.size.dims()?;
    let op = NestedOperator::gaussian(&dims, a.size.seed)?;
    let rep = minimax_report(&dims, a.sigma, &op, a.samples, a.size.seed)?;
    let fano = rep.fano.map_or("n/a".to_string(), |f| format!("{f:.6}"));
    println!(
        "{:<34} {:>11} {:>10} {:>10} {:>11} {:>9} {:>11}",
        "dims", "epsilon", "log|row|", "log|col|", "kl_mean", "fano", "lower_rate"
    );
    println!(
        "{:<34} {:>11.4e} {:>10.4} {:>10.4} {:>11.4e} {:>9} {:>11.4e}",
        format!(
            "p1={} p2={} m={} n={} k={} r={}",
            dims.p1, dims.p2, dims.m, dims.n, dims.k, dims.r
        ),
        rep.epsilon,
        rep.log_row_class,
        rep.log_col_class,
        rep.kl_mean,
        fano,
        rep.lower_rate
    );
    println!("gamma={:.4} alpha={:.4e} samples={}", rep.gamma, rep.alpha, rep.samples);
    Ok(false)
}

fn cmd_packing(a: PackingArgs) -> nestrec::Result<bool> {
    let (set, floor) = match a.kind {
        PackingKind::Support => {
            let set = build_support_packing(a.p1, a.k, a.seed)?;
            let floor = 4.0 / 25.0 * a.k as f64 * (a.p1 as f64 / a.k as f64).ln();
            println!(
                "support packing: p1={} k={} (log C(p1,k)={:.4})",
                a.p1,
                a.k,
                log_binomial(a.p1, a.k)
            );
            (set, floor)
        }
        PackingKind::Sign => {
            let set = build_sign_packing(a.rows, a.cols, SIGN_MIN_FRACTION, SIGN_TARGET_RATE, a.seed)?;
            println!("sign packing: {}x{}", a.rows, a.cols);
            (set, SIGN_TARGET_RATE * (a.rows * a.cols) as f64)
        }
    };
    set.verify()?;
    println!(
        "members={} log_count={:.4} floor={:.4} min_distance={} certified={}",
        set.len(),
        set.log_count(),
        floor,
        set.min_distance,
        set.certified
    );
    Ok(false)
}

fn cmd_cpr(a: CprArgs) -> nestrec::Result<bool> {
    let m = a.m.unwrap_or_else(|| default_compressed_dim(a.p, a.k.max(1)));
    let inst = generate_cpr(a.p, a.k, m, a.n, a.sigma, a.seed)?;
    let cfg = CprConfig {
        wf_iters: a.iters,
        ..Default::default()
    };
    let start = Instant::now();
    let out = cpr_two_stage(&inst, a.k, &cfg)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let truth = inst.x_true.as_ref().expect("generated instances carry the signal");
    println!(
        "p={} k={} m={} n={} sigma={} epsilon={:.4e}",
        a.p, a.k, m, a.n, a.sigma, inst.epsilon
    );
    println!(
        "lifted_relative_error={:.6e} stage2_iters={} residual={:.3e} wall_ms={ms:.1}",
        lifted_error(&out.estimate, truth),
        out.stage2_iters,
        out.residual
    );
    Ok(false)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.cmd) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
