use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pvclust::commands::{self, DataArgs, Fault, GenDataArgs, SelfCheckReport};
use pvclust::nn::Activation;
use pvclust::trainer::{Ablation, GraphMode, SummaryRow, TrainConfig, Variant};
use pvclust::{Error, Result};

#[derive(Parser)]
#[command(name = "pvclust", version, about = "Clustering of partially view-aligned multi-view data")]
struct Cli {
    /// TOML file with TrainConfig keys; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-view dataset.
    GenData(GenDataCli),
    /// Train a model, evaluate it and write all run artifacts.
    Train {
        #[command(flatten)]
        data: DataCli,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Re-evaluate a saved checkpoint.
    Evaluate {
        #[command(flatten)]
        data: DataCli,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train loss variants over several seeds.
    Ablate {
        #[command(flatten)]
        data: DataCli,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long, value_delimiter = ',', default_value = "full,rec_only,rec+vda,rec+smc,no_guidance")]
        variants: Vec<String>,
        #[command(flatten)]
        seeds: SeedsCli,
    },
    /// Train at several alignment rates over several seeds.
    SweepAlignment {
        #[command(flatten)]
        data: DataCli,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long, value_delimiter = ',', default_value = "0.3,0.5,0.7,1.0")]
        etas: Vec<f64>,
        #[command(flatten)]
        seeds: SeedsCli,
    },
    /// Compare graph-matched fusion with nearest-neighbor re-pairing.
    CompareMatching {
        #[command(flatten)]
        data: DataCli,
        #[command(flatten)]
        train: TrainFlags,
        /// Evaluate this checkpoint instead of training per seed.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        seeds: SeedsCli,
    },
    /// Run gradient, covariance and metric self-tests.
    Selfcheck {
        #[arg(long, hide = true, value_enum, default_value = "none")]
        inject_fault: FaultArg,
    },
}

#[derive(Args)]
struct GenDataCli {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    views: usize,
    #[arg(long, value_delimiter = ',', default_value = "20,15")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 4.0)]
    sep: f64,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write views as little-endian binary matrices instead of CSV.
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct DataCli {
    /// Directory with view_<v>.csv|bin files and labels.txt.
    #[arg(long)]
    data: PathBuf,
    /// Fraction of samples kept aligned.
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Seed of the alignment shuffle; defaults to the training seed.
    #[arg(long)]
    alignment_seed: Option<u64>,
    #[arg(long)]
    no_zscore: bool,
}

impl DataCli {
    fn resolve(&self) -> DataArgs {
        DataArgs {
            alignment_seed: self.alignment_seed,
            zscore: !self.no_zscore,
            ..DataArgs::new(&self.data, self.eta)
        }
    }
}

#[derive(Args)]
struct SeedsCli {
    /// Explicit seed list; otherwise `--runs` seeds starting at `--seed`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, default_value_t = 5)]
    runs: u64,
}

impl SeedsCli {
    fn resolve(&self, base: u64) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| (base..base + self.runs).collect())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Full-size defaults.
    Default,
    /// Small hidden layers.
    Desk,
    /// Desk scale tuned for small synthetic sets.
    SmallSynthetic,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivationArg {
    Relu,
    Tanh,
    Identity,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphModeArg {
    BatchLocal,
    Global,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    None,
    GradientScale,
}

#[derive(Args)]
struct TrainFlags {
    /// Base settings, applied before `--config` and the flags below.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    activation: Option<ActivationArg>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Ablations to enable, e.g. `no_guidance,no_cma`.
    #[arg(long, value_delimiter = ',')]
    ablate: Vec<String>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    no_rec_batch_scaling: bool,
    #[arg(long, value_enum)]
    graph_mode: Option<GraphModeArg>,
    #[arg(long)]
    kmeans_restarts: Option<usize>,
}

impl TrainFlags {
    fn resolve(&self, config: Option<&Path>, seed: Option<u64>) -> Result<TrainConfig> {
        let mut cfg = match self.preset {
            Some(Preset::Desk) => TrainConfig::desk_scale(),
            Some(Preset::SmallSynthetic) => TrainConfig::small_synthetic(),
            Some(Preset::Default) | None => TrainConfig::default(),
        };
        if let Some(path) = config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let mut table: toml::Table = toml::from_str(&cfg.to_toml_string()).expect("config serializes");
            let file: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            table.extend(file);
            cfg = TrainConfig::from_toml_str(&toml::to_string(&table).expect("table serializes"))
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        }
        macro_rules! set {
            ($($field:ident <- $flag:ident),*) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$field = v; })*
            };
        }
        set!(d <- d, hidden_dims <- hidden, epochs <- epochs, batch_size <- batch_size, lr <- lr,
             lambda1 <- lambda1, lambda2 <- lambda2, tau <- tau, eval_every <- eval_every,
             kmeans_restarts <- kmeans_restarts);
        if let Some(a) = self.activation {
            cfg.hidden_activation = match a {
                ActivationArg::Relu => Activation::Relu,
                ActivationArg::Tanh => Activation::Tanh,
                ActivationArg::Identity => Activation::Identity,
            };
        }
        if let Some(m) = self.graph_mode {
            cfg.graph_mode = match m {
                GraphModeArg::BatchLocal => GraphMode::BatchLocal,
                GraphModeArg::Global => GraphMode::Global,
            };
        }
        if self.no_rec_batch_scaling {
            cfg.rec_batch_scaling = false;
        }
        for name in &self.ablate {
            cfg.ablation.insert(Ablation::parse(name.trim())?);
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_table(rows: &[SummaryRow]) {
    println!("{}", SummaryRow::CSV_HEADER);
    for r in rows {
        println!("{}", r.csv_line());
    }
}

fn print_selfcheck(report: &SelfCheckReport) {
    for c in &report.checks {
        let verdict = if c.pass { "ok" } else { "FAIL" };
        println!("{verdict:>4}  {:<28} max error {:.3e}  tol {:.0e}", c.name, c.max_error, c.tol);
    }
    println!("selfcheck {}", if report.pass { "passed" } else { "failed" });
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let config = cli.config.as_deref();
    match &cli.command {
        Command::GenData(g) => {
            let args = GenDataArgs {
                n: g.n,
                k: g.k,
                views: g.views,
                dims: g.dims.clone(),
                sep: g.sep,
                noise: g.noise,
                seed: cli.seed.unwrap_or(0),
                binary: g.binary,
            };
            let dir = g.out_dir.clone().unwrap_or(out);
            let manifest = commands::gen_data(&args, &dir)?;
            println!("wrote {} files to {}", manifest.artifacts.len(), dir.display());
        }
        Command::Train { data, train } => {
            let cfg = train.resolve(config, cli.seed)?;
            let m = commands::train_cmd(&data.resolve(), &cfg, &out)?;
            println!("acc {:.4} nmi {:.4} ari {:.4} -> {}", m.acc, m.nmi, m.ari, out.display());
        }
        Command::Evaluate { data, checkpoint } => {
            let m = commands::evaluate_cmd(&data.resolve(), checkpoint, cli.seed, &out)?;
            println!("acc {:.4} nmi {:.4} ari {:.4} -> {}", m.acc, m.nmi, m.ari, out.display());
        }
        Command::Ablate { data, train, variants, seeds } => {
            let cfg = train.resolve(config, cli.seed)?;
            let variants = variants.iter().map(|v| Variant::parse(v)).collect::<Result<Vec<_>>>()?;
            print_table(&commands::ablate_cmd(&data.resolve(), &cfg, &variants, &seeds.resolve(cfg.seed), &out)?);
        }
        Command::SweepAlignment { data, train, etas, seeds } => {
            let cfg = train.resolve(config, cli.seed)?;
            print_table(&commands::sweep_alignment_cmd(&data.resolve(), &cfg, etas, &seeds.resolve(cfg.seed), &out)?);
        }
        Command::CompareMatching { data, train, checkpoint, seeds } => {
            let cfg = train.resolve(config, cli.seed)?;
            let rows = commands::compare_matching_cmd(&data.resolve(), &cfg, &seeds.resolve(cfg.seed), checkpoint.as_deref(), &out)?;
            print_table(&rows);
        }
        Command::Selfcheck { inject_fault } => {
            let fault = match inject_fault {
                FaultArg::None => Fault::None,
                FaultArg::GradientScale => Fault::GradientScale,
            };
            let report = commands::selfcheck_cmd(fault, cli.seed.unwrap_or(0), cli.out.as_deref())?;
            print_selfcheck(&report);
            if !report.pass {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}
