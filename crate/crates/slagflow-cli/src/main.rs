use clap::{Args, Parser, Subcommand};
use slagflow::fibration::{
    classify_fiber, configuration_check, euler_from_incidence, model_fibration, monodromy, KodairaGraph, KodairaType,
    ModelFibrationOptions, TorusFamily,
};
use slagflow::harness::persist::{read_json, write_json};
use slagflow::harness::{acceptance, DtDoc, ExperimentConfig, RunRecord, Selection};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "slagflow", version, about = "Special Lagrangian experiments in Calabi model geometries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure the model special Lagrangian against its closed forms.
    ModelReport(Common),
    /// Carry a Lagrangian from the model form to the synthetic form.
    Transport(Common),
    /// Run Lagrangian mean curvature flow.
    Flow(FlowArgs),
    /// Transport, then flow in the target geometry.
    TyPipeline(FlowArgs),
    #[command(subcommand)]
    Fibration(FibrationCmd),
    /// Run acceptance criteria: `all` or a list such as `A1,A9`.
    Acceptance {
        #[arg(default_value = "all")]
        criteria: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    common: Common,
    /// Fixed time step; conflicts with --cfl.
    #[arg(long, conflicts_with = "cfl")]
    dt: Option<f64>,
    /// CFL-controlled step with this constant.
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    stop_h2: Option<f64>,
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long)]
    monitor_stride: Option<usize>,
    /// Redistribution interval in steps, 0 for none.
    #[arg(long)]
    redistribute: Option<usize>,
}

#[derive(Subcommand)]
enum FibrationCmd {
    /// Run a fibration scenario config.
    Run(Common),
    /// Classify a fiber from an incidence file.
    Classify { file: PathBuf },
    /// Monodromy of the family stored in `<dir>/family.json`.
    Monodromy { dir: PathBuf },
    /// Write the model family of degree d to `<dir>/family.json`.
    Model {
        #[arg(long)]
        d: i64,
        dir: PathBuf,
    },
    /// Decide whether fibers of the given types can compose to T^{-d}.
    Sl2z {
        #[arg(long)]
        d: i64,
        /// Comma-separated Kodaira types, e.g. I1,I1,I1.
        #[arg(long, value_delimiter = ',')]
        types: Vec<KodairaType>,
        #[arg(long, default_value_t = 20)]
        bound: i64,
    },
}

/// A failure with its source chain flattened into one message.
#[derive(Debug)]
struct CliError(String);

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        let mut msg = e.to_string();
        let mut src = e.source();
        while let Some(s) = src {
            msg += &format!(": {s}");
            src = s.source();
        }
        CliError(msg)
    }
}

fn load(c: &Common, scenario: &str) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if cfg.scenario != scenario {
        return Err(CliError(format!(
            "{} configures scenario {:?}, not {scenario:?}",
            c.config.display(),
            cfg.scenario
        )));
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_flow(a: &FlowArgs, scenario: &str) -> Result<ExperimentConfig, CliError> {
    let mut cfg = load(&a.common, scenario)?;
    if let Some(l) = cfg.lmcf.as_mut() {
        if let Some(dt) = a.dt {
            l.dt = DtDoc::Fixed(dt);
        }
        if let Some(c) = a.cfl {
            l.dt = DtDoc::Word("cfl".into());
            l.c_cfl = c;
        }
        l.stop_h2 = a.stop_h2.unwrap_or(l.stop_h2);
        l.max_time = a.max_time.unwrap_or(l.max_time);
        l.monitor_stride = a.monitor_stride.unwrap_or(l.monitor_stride);
        l.redistribute = a.redistribute.unwrap_or(l.redistribute);
    }
    Ok(cfg)
}

fn report(record: &RunRecord) -> bool {
    for (id, e) in &record.ledger {
        let verdict = if e.pass { "PASS" } else { "FAIL" };
        println!("{id:<4} {verdict}");
        for c in &e.checks {
            println!("     {} {} = {}", if c.pass { " " } else { "!" }, c.name, short(c.value));
        }
    }
    println!("outputs in {}", record.output_dir.display());
    record.pass()
}

fn short(v: f64) -> String {
    if v == 0.0 || (1e-3..1e5).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:.6e}")
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(v).map_err(|e| CliError(e.to_string()))?);
    Ok(())
}

fn scenario(cfg: ExperimentConfig) -> Result<bool, CliError> {
    Ok(report(&slagflow::harness::run_scenario(&cfg)?))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::ModelReport(c) => scenario(load(&c, "model-report")?),
        Command::Transport(c) => scenario(load(&c, "transport")?),
        Command::Flow(a) => scenario(load_flow(&a, "flow")?),
        Command::TyPipeline(a) => scenario(load_flow(&a, "ty-pipeline")?),
        Command::Fibration(f) => fibration(f),
        Command::Acceptance { criteria, out, seed } => {
            let sel: Selection = criteria.parse()?;
            let s = acceptance(&sel, seed, out.as_deref())?;
            for l in s.lines() {
                println!("{l}");
            }
            Ok(s.pass)
        }
    }
}

fn fibration(cmd: FibrationCmd) -> Result<bool, CliError> {
    match cmd {
        FibrationCmd::Run(c) => scenario(load(&c, "fibration")?),
        FibrationCmd::Classify { file } => {
            let text = std::fs::read_to_string(&file).map_err(|e| CliError(format!("{}: {e}", file.display())))?;
            let g = KodairaGraph::parse(&text)?;
            let t = classify_fiber(&g)?;
            println!("{t} (euler {})", euler_from_incidence(&g));
            Ok(true)
        }
        FibrationCmd::Monodromy { dir } => {
            let fam: TorusFamily = read_json(&dir.join("family.json"))?;
            print_json(&monodromy(&fam)?)?;
            Ok(true)
        }
        FibrationCmd::Model { d, dir } => {
            let fam = model_fibration(d, &ModelFibrationOptions::default())?;
            let p = write_json(Path::new(&dir), "family.json", &fam)?;
            println!("wrote {}", p.display());
            Ok(true)
        }
        FibrationCmd::Sl2z { d, types, bound } => {
            let r = configuration_check(&types, d, None, bound)?;
            print_json(&r)?;
            Ok(r.pass())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.0);
            ExitCode::from(2)
        }
    }
}
