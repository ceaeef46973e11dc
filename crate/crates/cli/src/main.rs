use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cifeq_cli::dataset::{read_dataset, ColumnMapping, Filter};
use cifeq_cli::report::{emit_plot_data, run_test, RunConfig};
use cifeq_cli::scenario::{run_simulation, write_rejection_csv};
use cifeq_core::covariance::Weight;
use cifeq_core::resampling::{BootstrapConfig, MultiplierLaw};
use cifeq_core::survival::TiePolicy;
use cifeq_core::Method;

#[derive(Parser)]
#[command(name = "cifeq", version, about = "Two-sample tests for cumulative incidence functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test equality of the cause-1 CIFs of two groups in a CSV file.
    Test(TestArgs),
    /// Run Monte Carlo scenario files and write rejection rates as CSV.
    Simulate(SimulateArgs),
    /// Write the cause-1 CIF step curves of both groups as CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV file.
    data: PathBuf,
    #[arg(long, default_value = "entry")]
    entry_col: String,
    #[arg(long, default_value = "time")]
    time_col: String,
    #[arg(long, default_value = "status")]
    status_col: String,
    #[arg(long, default_value = "group")]
    group_col: String,
    /// Keep only rows with COLUMN=VALUE.
    #[arg(long)]
    filter: Option<Filter>,
    /// Comparison order of the two group labels.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    groups: Option<Vec<String>>,
    #[arg(long, num_args = 2, value_names = ["T1", "T2"])]
    interval: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = TieArg::Jitter)]
    tie_policy: TieArg,
    /// Seed for the bootstrap and for tie jittering.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "ks,cvm,box,pearson,pepe")]
    methods: Vec<Method>,
    /// Bootstrap replicates.
    #[arg(long = "B", default_value_t = 999)]
    replicates: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = MultiplierArg::Normal)]
    multiplier: MultiplierArg,
    /// Weight of the integral statistics.
    #[arg(long, value_enum, default_value_t = WeightArg::Const)]
    weight: WeightArg,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
    /// Also write results.csv, curves.csv and report.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario files (TOML).
    #[arg(required = true)]
    scenarios: Vec<PathBuf>,
    /// Directory for rejection_rates.csv; standard output otherwise.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Print rejection tables as JSON (without timings).
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    Jitter,
    Reject,
}

#[derive(Clone, Copy, ValueEnum)]
enum MultiplierArg {
    Normal,
    Rademacher,
    Poisson,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Const,
    Ad,
}

impl DataArgs {
    fn load(&self) -> cifeq_cli::Result<cifeq_cli::dataset::Dataset> {
        let mapping = ColumnMapping {
            entry: self.entry_col.clone(),
            require_entry: self.entry_col != "entry",
            time: self.time_col.clone(),
            status: self.status_col.clone(),
            group: self.group_col.clone(),
        };
        let order = self.groups.as_ref().map(|g| [g[0].clone(), g[1].clone()]);
        read_dataset(&self.data, &mapping, self.filter.as_ref(), order)
    }

    fn interval(&self) -> Option<[f64; 2]> {
        self.interval.as_ref().map(|v| [v[0], v[1]])
    }

    fn tie_policy(&self) -> TiePolicy {
        match self.tie_policy {
            TieArg::Jitter => TiePolicy::Jitter { seed: self.seed },
            TieArg::Reject => TiePolicy::Reject,
        }
    }
}

fn test(args: &TestArgs) -> cifeq_cli::Result<()> {
    let dataset = args.data.load()?;
    let config = RunConfig {
        interval: args.data.interval(),
        methods: args.methods.clone(),
        bootstrap: BootstrapConfig {
            replicates: args.replicates,
            law: match args.multiplier {
                MultiplierArg::Normal => MultiplierLaw::StandardNormal,
                MultiplierArg::Rademacher => MultiplierLaw::Rademacher,
                MultiplierArg::Poisson => MultiplierLaw::CenteredPoisson,
            },
            alpha: args.alpha,
            seed: args.data.seed,
        },
        rho2: match args.weight {
            WeightArg::Const => Weight::Constant(1.0),
            WeightArg::Ad => Weight::AndersonDarling,
        },
        tie_policy: args.data.tie_policy(),
    };
    let report = run_test(&dataset, args.data.filter.as_ref(), &config)?;
    let mut out = std::io::stdout().lock();
    if args.json {
        out.write_all(report.to_json()?.as_bytes())?;
    } else {
        out.write_all(report.render_table().as_bytes())?;
    }
    if let Some(dir) = &args.out_dir {
        report.write_files(dir)?;
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct JsonRow<'a> {
    scenario_id: &'a str,
    test: Method,
    rejections: usize,
    n_sim: usize,
    proportion: f64,
    se: f64,
}

fn simulate(args: &SimulateArgs) -> cifeq_cli::Result<()> {
    let mut tables = Vec::new();
    for path in &args.scenarios {
        let (sc, table) = run_simulation(path)?;
        eprintln!(
            "{}: model {:?}, sizes {:?}, n_sim {}, B {}, alpha {}, seed {}, redraw factor {:.4}, runs without cause-1 events {}",
            sc.id,
            sc.model,
            sc.sizes,
            sc.n_sim,
            sc.bootstrap.replicates,
            sc.bootstrap.alpha,
            sc.bootstrap.seed,
            table.redraw_factor,
            table.empty_runs
        );
        tables.push(table);
    }
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
        let file = std::fs::File::create(dir.join("rejection_rates.csv"))?;
        write_rejection_csv(&tables, file)?;
    }
    let mut out = std::io::stdout().lock();
    if args.json {
        let rows: Vec<JsonRow> = tables
            .iter()
            .flat_map(|t| &t.rows)
            .map(|r| JsonRow {
                scenario_id: &r.scenario_id,
                test: r.test,
                rejections: r.rejections,
                n_sim: r.n_sim,
                proportion: r.proportion,
                se: r.se,
            })
            .collect();
        writeln!(out, "{}", serde_json::to_string_pretty(&rows)?)?;
    } else if args.out_dir.is_none() {
        write_rejection_csv(&tables, out)?;
    }
    Ok(())
}

fn plot(args: &PlotArgs) -> cifeq_cli::Result<()> {
    let dataset = args.data.load()?;
    let paths = emit_plot_data(&dataset, args.data.interval(), args.data.tie_policy(), &args.out_dir)?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Test(a) => test(a),
        Command::Simulate(a) => simulate(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
