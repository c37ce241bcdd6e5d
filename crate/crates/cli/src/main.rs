use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use minmax_mom::bounds::{self, BoundsInput};
use minmax_mom::dataset::{self, Provenance, RNG_NAME};
use minmax_mom::ensemble::run_ensemble;
use minmax_mom::experiment::{run_sweep, ExperimentConfig, AGGREGATE_FILE, RECORDS_FILE};
use minmax_mom::partition::check::verify_partition_lemmas;
use minmax_mom::textfmt::g17;

mod config;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "minmax-mom",
    version,
    about = "Robust estimator selection by minmax median-of-means"
)]
struct Cli {
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a synthetic dataset and write it as CSV.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Run the ensemble on a CSV dataset and report the selected candidate.
    Select {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV (header y,x1..xd[,provenance]).
        data: PathBuf,
        /// Where to write the selected coefficients.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Also write the full comparator matrix here.
        #[arg(long, value_name = "PATH")]
        comparator: Option<PathBuf>,
    },
    /// Run the outlier sweep and write records.csv and aggregate.csv.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Evaluate the excess-risk bound constants.
    Bounds(BoundsArgs),
    /// Verify the dyadic partition properties exhaustively.
    Check {
        /// Smallest dataset size.
        #[arg(long, default_value_t = 8)]
        n_min: usize,
        /// Largest dataset size.
        #[arg(long, default_value_t = 64)]
        n_max: usize,
        /// Print every check, not only the summary line per N.
        #[arg(long)]
        verbose: bool,
    },
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long)]
    chi: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    epsilon: f64,
    /// Number of comparison blocks V.
    #[arg(long = "v")]
    v_count: usize,
    /// Dataset size N.
    #[arg(long = "n")]
    n: usize,
    /// Number of candidates |M|.
    #[arg(long = "m")]
    grid_size: usize,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    zeta_norm: f64,
    #[arg(long)]
    sparsity: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Training-block size for the rates; defaults to the effective size.
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long, default_value_t = 3)]
    k_min: u32,
    #[arg(long)]
    chi_lambda: Option<f64>,
    #[arg(long)]
    sigma_lambda: Option<f64>,
    #[arg(long)]
    d_lambda: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    loss_star: f64,
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    Ok(RunConfig::parse(&text, &path.display().to_string())?)
}

fn run_seed(cli: Option<u64>, cfg: &RunConfig) -> Result<u64> {
    cli.or(cfg.seed)
        .ok_or_else(|| anyhow!("no seed: pass --seed or set `seed` in {}", cfg.source))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p).with_context(|| format!("cannot create {}", p.display()))?;
    }
    Ok(())
}

fn cmd_generate(common: &Common, out: &Path) -> Result<()> {
    let cfg = load_config(&common.config)?;
    let mut spec = cfg
        .synthetic
        .clone()
        .ok_or_else(|| anyhow!("{}: a [synthetic] section is required", cfg.source))?;
    spec.seed = run_seed(common.seed, &cfg)?;
    let (data, _) = dataset::generate_synthetic(&spec)?;
    create_parent(out)?;
    dataset::save_csv(&data, out).with_context(|| format!("cannot write {}", out.display()))?;
    let prov = data.provenance().unwrap_or(&[]);
    let count = |p: Provenance| prov.iter().filter(|&&q| q == p).count();
    println!(
        "wrote {} ({} rows, {} features)",
        out.display(),
        data.len(),
        data.dim()
    );
    println!(
        "informative {}, hard outliers {}, heavy-tail outliers {}",
        count(Provenance::Informative),
        count(Provenance::Hard),
        count(Provenance::HeavyTail)
    );
    println!("seed {} ({RNG_NAME})", spec.seed);
    Ok(())
}

fn cmd_select(
    common: &Common,
    data_path: &Path,
    out: Option<&Path>,
    comparator: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(&common.config)?;
    let mut ensemble = cfg
        .ensemble
        .clone()
        .ok_or_else(|| anyhow!("{}: an [ensemble] section is required", cfg.source))?;
    let data = dataset::load_csv(data_path)
        .with_context(|| format!("cannot load {}", data_path.display()))?;
    cfg.check_ensemble_fits(data.len(), data.dim(), &data_path.display().to_string())?;
    if comparator.is_some() {
        ensemble.keep_comparator = true;
    }

    let start = Instant::now();
    let outcome = run_ensemble(&data, &ensemble)?;
    let elapsed = start.elapsed();
    let sel = &outcome.selection;
    let id = sel.chosen_id;
    let learner = &ensemble.learners[id.learner_index];
    let block_size = id.block.size(data.len())?;

    println!("candidates: {}", outcome.candidates.len());
    if !outcome.excluded.is_empty() {
        println!("excluded: {}", outcome.excluded.len());
    }
    println!(
        "selected: learner {} {learner}, block {} (level {}, index {})",
        id.learner_index, id.block, id.block.level, id.block.index
    );
    println!("minmax value: {}", g17(sel.minmax_value));
    println!("training block size: {block_size}");
    println!("risk evaluations: {}", outcome.risk_evaluations);
    println!("wall time: {:.3}s", elapsed.as_secs_f64());

    let out = match out {
        Some(p) => p.to_path_buf(),
        None => cfg
            .output_dir
            .clone()
            .unwrap_or_default()
            .join("selected_beta.csv"),
    };
    create_parent(&out)?;
    let mut w = BufWriter::new(
        File::create(&out).with_context(|| format!("cannot write {}", out.display()))?,
    );
    writeln!(w, "feature,beta")?;
    for (j, b) in outcome.selected_estimator().beta().iter().enumerate() {
        writeln!(w, "x{},{}", j + 1, g17(*b))?;
    }
    w.flush()?;
    println!("coefficients: {}", out.display());

    if let Some(path) = comparator {
        let matrix = sel
            .comparator
            .as_ref()
            .ok_or_else(|| anyhow!("comparator matrix was not kept"))?;
        create_parent(path)?;
        let mut w = BufWriter::new(
            File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
        );
        matrix.write_csv(&mut w)?;
        w.flush()?;
        println!("comparator: {}", path.display());
    }
    Ok(())
}

fn cmd_experiment(common: &Common, out: Option<&Path>) -> Result<()> {
    let cfg = load_config(&common.config)?;
    let need = |what: &str| anyhow!("{}: a [{what}] section is required", cfg.source);
    let synthetic = cfg.synthetic.clone().ok_or_else(|| need("synthetic"))?;
    let ensemble = cfg.ensemble.clone().ok_or_else(|| need("ensemble"))?;
    let exp = cfg.experiment.clone().ok_or_else(|| need("experiment"))?;
    let output_dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| {
            anyhow!(
                "no output directory: pass --out or set `output_dir` in {}",
                cfg.source
            )
        })?;
    let config = ExperimentConfig {
        synthetic,
        ensemble,
        outlier_grid: exp.outlier_grid,
        repetitions: exp.repetitions,
        seed: run_seed(common.seed, &cfg)?,
        output_dir: output_dir.clone(),
    };
    let start = Instant::now();
    let summary = run_sweep(&config)?;
    println!(
        "records: {} ({} reused) in {:.1}s",
        summary.records.len(),
        summary.resumed,
        start.elapsed().as_secs_f64()
    );
    println!("{}", output_dir.join(RECORDS_FILE).display());
    println!("{}", output_dir.join(AGGREGATE_FILE).display());
    Ok(())
}

fn cmd_bounds(a: &BoundsArgs) -> Result<()> {
    let input = BoundsInput {
        chi: a.chi,
        sigma: a.sigma,
        epsilon: a.epsilon,
        v_count: a.v_count,
        n: a.n,
        grid_size: a.grid_size,
        c1: a.c1,
        zeta_norm: a.zeta_norm,
        sparsity: a.sparsity,
        dim: a.dim,
        chi_lambda: a.chi_lambda,
        sigma_lambda: a.sigma_lambda,
        d_lambda: a.d_lambda,
        loss_star: a.loss_star,
        ..Default::default()
    };
    let c = bounds::theorem1_constants(&input)?;
    if a.k_min > 63 {
        bail!("--k-min {} is too large", a.k_min);
    }
    let eff = bounds::effective_block_size(a.n, a.v_count, a.k_min);
    println!("a\t{}", g17(c.a));
    println!("b\t{}", g17(c.b));
    println!("prob\t{}", g17(c.prob));
    println!("vacuous\t{}", if c.vacuous { "yes (a >= 1)" } else { "no" });
    println!("effective_block_size\t{eff}");
    let block = a.block_size.unwrap_or(eff);
    let mut warnings = Vec::new();
    if a.sparsity.is_some() || a.dim.is_some() {
        if block == 0 {
            bail!("block size is zero");
        }
        let r = bounds::lasso_rate(&input, block)?;
        println!("lasso_rate\t{}", g17(r.value));
        let rhs = bounds::corollary2_rhs(&input, a.k_min, 1, |_, m| {
            bounds::lasso_rate(&input, m)
                .map(|r| r.value)
                .unwrap_or(f64::INFINITY)
        })?;
        println!("lasso_ensemble_bound\t{}", g17(rhs));
        warnings.extend(r.warnings);
    }
    if a.chi_lambda.is_some() || a.sigma_lambda.is_some() || a.d_lambda.is_some() {
        if block == 0 {
            bail!("block size is zero");
        }
        let r = bounds::erm_rate(&input, block)?;
        println!("erm_rate\t{}", g17(r.value));
        warnings.extend(r.warnings);
    }
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn cmd_check(n_min: usize, n_max: usize, verbose: bool) -> Result<()> {
    if n_min < 8 || n_min > n_max {
        bail!("need 8 <= --n-min <= --n-max, got {n_min} and {n_max}");
    }
    let mut failed = Vec::new();
    for n in n_min..=n_max {
        let report = verify_partition_lemmas(n);
        let status = if report.passed() { "PASS" } else { "FAIL" };
        println!("{status} N={n}");
        if verbose || !report.passed() {
            print!("{report}");
        }
        if !report.passed() {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        bail!("partition checks failed for N in {failed:?}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(k) = cli.threads {
        if k == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("cannot configure the thread pool")?;
        info!("using {k} worker threads");
    }
    match &cli.command {
        Command::Generate { common, out } => cmd_generate(common, out),
        Command::Select {
            common,
            data,
            out,
            comparator,
        } => cmd_select(common, data, out.as_deref(), comparator.as_deref()),
        Command::Experiment { common, out } => cmd_experiment(common, out.as_deref()),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Check {
            n_min,
            n_max,
            verbose,
        } => cmd_check(*n_min, *n_max, *verbose),
    }
}

/// Joins an error chain into one line.
fn one_line(e: &anyhow::Error) -> String {
    let parts: Vec<String> = e.chain().map(|c| c.to_string()).collect();
    let mut out: Vec<String> = Vec::new();
    for p in parts {
        // Skip causes already quoted by their parent.
        if !out.iter().any(|o| o.contains(&p)) {
            out.push(p);
        }
    }
    out.join(": ").replace('\n', " ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = e.print();
                return ExitCode::from(2);
            }
            let text = e.to_string();
            let first: Vec<&str> = text
                .lines()
                .take_while(|l| !l.trim().is_empty())
                .map(str::trim)
                .collect();
            let first = first.join(" ");
            let first = first.strip_prefix("error: ").unwrap_or(&first);
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}
