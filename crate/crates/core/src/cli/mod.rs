//! Command-line front end: configuration, orchestration and output files.

mod config;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use tempfile::NamedTempFile;

pub use config::{parse_config, Config, InitKind, ObservableKind, KNOWN_KEYS};
pub use output::{
    format_real, parse_samples_csv, parse_summary_csv, read_samples_csv, read_summary_csv,
    report_text, samples_csv, strictly_decreasing, summary_csv, ReportInputs, SAMPLES_HEADER,
    SUMMARY_HEADER,
};

use crate::ensemble::{estimate, tail_diagnostic, Ensemble, SampleResult, SummaryRow, TailDiagnostic};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "meanfield", about = "Compare N-boson dynamics with the Hartree flow over random interactions")]
pub struct Args {
    /// Experiment configuration (TOML key = value pairs).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory [default: ./out, or output_dir from the config].
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Override the number of samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads [default: available cores].
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Args {
    /// Load the config and apply command-line overrides.
    pub fn resolve(&self) -> Result<(Config, PathBuf)> {
        let mut config = Config::load(&self.config)?;
        if let Some(s) = self.samples {
            config.samples = s;
        }
        if let Some(seed) = self.seed {
            config.base_seed = seed;
        }
        if let Some(t) = self.threads {
            config.threads = t;
        }
        if let Some(dir) = &self.out_dir {
            config.output_dir = dir.clone();
        }
        let out_dir = config.output_dir.clone();
        Ok((config, out_dir))
    }
}

/// Everything produced by one run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub results: Vec<SampleResult>,
    pub rows: Vec<SummaryRow>,
    pub tail: TailDiagnostic,
    /// Tail at `β = 1.1 ‖a‖`, zero whenever the pathwise bound holds.
    pub bound_tail: TailDiagnostic,
    pub observable_norm: f64,
    pub report: String,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn describe(config: &Config, steps: usize) -> String {
    format!(
        "grid: d = {}, M = {}, L = {:?}, h = {:?}\n\
         time: t_final = {:?}, dt = {:?}, steps = {steps}\n\
         field: base = {}, gaussian_mean = {:?}, sigmas = {:?}, enforce_even = {}\n\
         observable: {} (p = {})\n\
         initial state: {}\n\
         samples = {}, base_seed = {}, particle_counts = {:?}",
        config.dimension,
        config.sites,
        config.box_length,
        config.box_length / config.sites as f64,
        config.t_final,
        config.dt,
        config.field_base,
        config.field_gaussian_mean,
        config.field_sigmas,
        config.field_enforce_even,
        config.observable_kind,
        config.observable_p,
        config.init_kind,
        config.samples,
        config.base_seed,
        config.particle_counts,
    )
}

/// Run the ensemble and write `samples.csv`, `summary.csv`,
/// `config.resolved` and `report.txt` into `out_dir`. Files are staged as
/// temporaries and only renamed into place once all of them are written.
pub fn run_experiment(config: &Config, out_dir: &Path) -> Result<RunOutcome> {
    let plan = config.to_plan()?;
    let steps = plan.hartree_params()?.steps();
    let ensemble = Ensemble::new(plan)?;
    let norm = ensemble.observable_norm();
    let beta = config.beta.unwrap_or(0.5 * norm);

    std::fs::create_dir_all(out_dir).map_err(io_error(out_dir))?;
    let probe = NamedTempFile::new_in(out_dir).map_err(io_error(out_dir))?;
    drop(probe);

    let results = ensemble.run(config.threads)?;
    let rows = estimate(&results)?;
    let tail = tail_diagnostic(&results, if beta > 0.0 { beta } else { f64::MIN_POSITIVE })?;
    let bound_beta = if norm > 0.0 { 1.1 * norm } else { f64::MIN_POSITIVE };
    let bound_tail = tail_diagnostic(&results, bound_beta)?;
    if bound_tail.hartree != 0.0 || bound_tail.manybody.values().any(|v| *v != 0.0) {
        return Err(Error::Consistency(format!(
            "tail above 1.1‖a‖ is nonzero: {bound_tail:?}"
        )));
    }
    let max_abs_manybody = results
        .iter()
        .flat_map(|r| r.x_manybody.values())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let max_abs_hartree = results.iter().fold(0.0f64, |m, r| m.max(r.x_hartree.abs()));

    let report = report_text(&ReportInputs {
        header: &describe(config, steps),
        observable_norm: norm,
        rows: &rows,
        tail: &tail,
        bound_tail: &bound_tail,
        max_abs_manybody,
        max_abs_hartree,
    });

    let files: [(&str, Vec<u8>); 4] = [
        ("samples.csv", samples_csv(&results)?),
        ("summary.csv", summary_csv(&rows)?),
        ("config.resolved", config.resolved_text(beta).into_bytes()),
        ("report.txt", report.clone().into_bytes()),
    ];
    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        let mut tmp = NamedTempFile::new_in(out_dir).map_err(io_error(out_dir))?;
        tmp.write_all(bytes).map_err(io_error(tmp.path()))?;
        tmp.as_file().sync_all().map_err(io_error(tmp.path()))?;
        staged.push((tmp, out_dir.join(name)));
    }
    for (tmp, target) in staged {
        tmp.persist(&target).map_err(|e| Error::Io {
            path: target.display().to_string(),
            source: e.error,
        })?;
    }

    Ok(RunOutcome {
        results,
        rows,
        tail,
        bound_tail,
        observable_norm: norm,
        report,
    })
}

/// Binary entry point; returns the process exit code.
pub fn main_with(args: &Args) -> i32 {
    let run = || -> Result<RunOutcome> {
        let (config, out_dir) = args.resolve()?;
        run_experiment(&config, &out_dir)
    };
    match run() {
        Ok(outcome) => {
            print!("{}", outcome.report);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
