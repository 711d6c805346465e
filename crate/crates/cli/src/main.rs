use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use log::info;
use pyroseason::synth::SynthConfig;
use pyroseason_cli::export;
use pyroseason_cli::output::Written;
use pyroseason_cli::run;
use pyroseason_cli::stages::seasons::read_profiles;
use pyroseason_cli::{CliError, PipelineConfig};

/// Fire-season delineation and season-wise burned-area forecasting on a
/// global hexagonal grid.
#[derive(Debug, Parser)]
#[command(name = "pyroseason", version)]
struct Cli {
    /// `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (capped by PYROSEASON_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write every cell of a grid resolution as GeoJSON.
    Grid {
        #[arg(long)]
        resolution: Option<u8>,
        #[arg(long, default_value = "grid.geojson")]
        geojson: PathBuf,
    },
    /// Filter and bin detection CSVs into daily per-cell counts.
    Ingest {
        #[arg(long = "input", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long, default_value = "cells.bin")]
        out: PathBuf,
    },
    /// Delineate fire seasons and write per-cell profiles.
    Seasons {
        #[arg(long, default_value = "cells.bin")]
        cells: PathBuf,
        #[arg(long)]
        percentile: Option<f64>,
        #[arg(long, default_value = "profiles.csv")]
        out: PathBuf,
    },
    /// Fit every method on the training seasons and forecast the rest.
    Forecast {
        #[arg(long, default_value = "cells.bin")]
        cells: PathBuf,
        #[arg(long, default_value = "profiles.csv")]
        profiles: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "forecasts.csv")]
        out: PathBuf,
        /// Defaults to `models.csv` next to `--out`.
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Score forecasts, select a method per cell and compare methods.
    Evaluate {
        #[arg(long, default_value = "forecasts.csv")]
        forecasts: PathBuf,
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
        /// Grid resolution the forecasts were made on.
        #[arg(long)]
        resolution: Option<u8>,
    },
    /// Map layers and histograms, or the MA-FC table.
    Export(ExportArgs),
    /// Generate a synthetic detection archive with planted seasons.
    Synth {
        #[arg(long, default_value = "detections.csv")]
        out: PathBuf,
        #[arg(long, default_value = "truth.csv")]
        truth: PathBuf,
        #[arg(long)]
        cells: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        resolution: Option<u8>,
        #[arg(long)]
        first_year: Option<i32>,
        #[arg(long)]
        years: Option<u32>,
    },
    /// The whole pipeline into one output directory.
    Run {
        #[arg(long = "input", num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        percentile: Option<f64>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        eval: EvalArgs,
        /// Profile fields to map, comma-separated.
        #[arg(long)]
        export_fields: Option<String>,
    },
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long)]
    resolution: Option<u8>,
    /// Keep detections with confidence strictly above this.
    #[arg(long)]
    min_confidence: Option<u8>,
    #[arg(long)]
    from: Option<String>,
    #[arg(long)]
    to: Option<String>,
    /// Abort on the first malformed row.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Comma-separated method ids.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    train_seasons: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// CSV with `cell_id,continent`.
    #[arg(long)]
    continents: Option<PathBuf>,
    /// `mae` or `mase`.
    #[arg(long)]
    selection: Option<String>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").args(["profiles", "report", "mafc"]).required(true)))]
struct ExportArgs {
    #[arg(long)]
    profiles: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the MA-FC table here; needs `--cells` and `--mafc-profiles`.
    #[arg(long)]
    mafc: Option<PathBuf>,
    #[arg(long, requires = "mafc", default_value = "cells.bin")]
    cells: PathBuf,
    #[arg(long, requires = "mafc", default_value = "profiles.csv")]
    mafc_profiles: PathBuf,
    #[arg(long, required_unless_present = "mafc")]
    field: Option<String>,
    /// Report rows of this method instead of the selected one.
    #[arg(long, requires = "report")]
    method: Option<String>,
    #[arg(long, default_value = "layer.geojson")]
    geojson: PathBuf,
    #[arg(long)]
    resolution: Option<u8>,
}

struct Overrides<'a>(&'a mut PipelineConfig);

impl Overrides<'_> {
    fn set<T: ToString>(&mut self, key: &str, value: Option<T>) -> Result<(), CliError> {
        match value {
            Some(v) => self.0.set(key, &v.to_string()),
            None => Ok(()),
        }
    }

    fn filter(&mut self, f: &FilterArgs) -> Result<(), CliError> {
        self.set("resolution", f.resolution)?;
        self.set("min_confidence", f.min_confidence)?;
        self.set("from", f.from.as_deref())?;
        self.set("to", f.to.as_deref())?;
        if f.strict {
            self.0.strict = true;
        }
        Ok(())
    }

    fn model(&mut self, m: &ModelArgs) -> Result<(), CliError> {
        self.set("methods", m.methods.as_deref())?;
        self.set("train_seasons", m.train_seasons)?;
        self.set("seed", m.seed)
    }

    fn eval(&mut self, e: &EvalArgs) -> Result<(), CliError> {
        self.set("continents", e.continents.as_ref().map(|p| p.display()))?;
        self.set("selection", e.selection.as_deref())
    }
}

fn report(written: &[Written]) {
    for w in written {
        info!("wrote {} ({})", w.path.display(), &w.sha256[..12]);
    }
}

fn export_cmd(config: &PipelineConfig, a: &ExportArgs) -> Result<Vec<Written>, CliError> {
    let g = run::grid(config.resolution)?;
    if let Some(out) = &a.mafc {
        let store = run::load_store("export", &a.cells)?;
        let listed = read_profiles(&a.mafc_profiles)?;
        let pairs = pyroseason_cli::stages::seasons::rebuild_profiles(&store, &listed)?;
        let t = export::mafc_table(&pairs)?;
        return Ok(vec![pyroseason_cli::output::write_file("export", out, &t.into_bytes())?]);
    }
    let field = a.field.as_deref().expect("clap requires --field");
    let layer = if let Some(p) = &a.profiles {
        export::profile_layer(&read_profiles(p)?, field)?
    } else {
        let method = a
            .method
            .as_deref()
            .map(|m| m.parse().map_err(|e| CliError::usage(format!("{e}"))))
            .transpose()?;
        export::report_layer(a.report.as_deref().expect("clap requires a source"), field, method)?
    };
    run::write_layer(&g, &layer, field, &a.geojson)
}

fn execute(cli: &Cli, mut config: PipelineConfig) -> Result<Vec<Written>, CliError> {
    let mut o = Overrides(&mut config);
    match &cli.command {
        Command::Grid { resolution, geojson } => {
            o.set("resolution", *resolution)?;
            config.validate()?;
            Ok(vec![run::cmd_grid(config.resolution, geojson)?])
        }
        Command::Ingest { inputs, filter, out } => {
            o.filter(filter)?;
            config.inputs = inputs.clone();
            config.validate()?;
            Ok(vec![run::cmd_ingest(&config, out)?.0])
        }
        Command::Seasons { cells, percentile, out } => {
            o.set("length_percentile", *percentile)?;
            config.validate()?;
            Ok(vec![run::cmd_seasons(cells, config.length_percentile, out)?])
        }
        Command::Forecast { cells, profiles, model, out, models } => {
            o.model(model)?;
            config.validate()?;
            let models = models.clone().unwrap_or_else(|| out.with_file_name("models.csv"));
            run::cmd_forecast(&config, cells, profiles, out, &models)
        }
        Command::Evaluate { forecasts, out, eval, resolution } => {
            o.eval(eval)?;
            o.set("resolution", *resolution)?;
            config.validate()?;
            run::cmd_evaluate(&config, forecasts, out)
        }
        Command::Export(a) => {
            o.set("resolution", a.resolution)?;
            config.validate()?;
            export_cmd(&config, a)
        }
        Command::Synth { out, truth, cells, seed, resolution, first_year, years } => {
            let d = SynthConfig::default();
            let s = SynthConfig {
                seed: seed.unwrap_or(d.seed),
                cells: cells.unwrap_or(d.cells),
                resolution: resolution.unwrap_or(d.resolution),
                first_year: first_year.unwrap_or(d.first_year),
                years: years.unwrap_or(d.years),
                ..d
            };
            run::cmd_synth(&s, out, truth)
        }
        Command::Run { inputs, out_dir, filter, percentile, model, eval, export_fields } => {
            o.filter(filter)?;
            o.set("length_percentile", *percentile)?;
            o.model(model)?;
            o.eval(eval)?;
            o.set("export_fields", export_fields.as_deref())?;
            if !inputs.is_empty() {
                config.inputs = inputs.clone();
            }
            if let Some(d) = out_dir {
                config.out_dir = d.clone();
            }
            if config.inputs.is_empty() {
                return Err(CliError::input("ingest", "no input files given"));
            }
            let summary = run::run_pipeline(&config)?;
            info!("run: {} cells profiled", summary.cells_retained);
            Ok(summary.outputs)
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = match std::env::var("PYROSEASON_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::usage(format!("PYROSEASON_THREADS must be a positive integer, got {v:?}"))
        })?),
        Err(_) => None,
    };
    let n = flag.unwrap_or(available);
    Ok(cap.map_or(n, |c| n.min(c)).max(1))
}

fn main_inner(cli: &Cli) -> Result<Vec<Written>, CliError> {
    let mut config = PipelineConfig::default();
    if let Some(p) = &cli.config {
        config.apply_file(Path::new(p))?;
    }
    if let Some(t) = cli.threads {
        config.set("threads", &t.to_string())?;
    }
    config.validate()?;
    let threads = thread_count(config.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::internal("config", e.to_string()))?;
    pool.install(|| execute(cli, config))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(written) => {
            report(&written);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
