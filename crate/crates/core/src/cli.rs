//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    broadened_spectrum, classify_states, coefficient_scan, dipole_table, model_dipoles, oscillator_strengths,
    EnergyGrid, SpectrumData,
};
use crate::config::{parse_config, DisorderConfig, RunConfig, SpectrumConfig};
use crate::disorder::{disordered_scan, ensemble_polariton_stats};
use crate::eig::{diagonalize, DEFAULT_TOL};
use crate::geometry::chain_geometry;
use crate::model::{build_kasha_exciton, CouplingMode, ModelMatrix};
use crate::output::{
    broadened_csv, disorder_aggregate_csv, disorder_samples_csv, eigenvalues_csv, histograms_csv, report_csv,
    scan_csv, sticks_csv, Csv,
};
use crate::units::ev_to_hartree;
use crate::{Error, Result};

/// Worker thread cap for scans and ensembles.
pub const THREADS_ENV: &str = "POLCHAIN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "polchain", version, about = "Cavity-QED polariton models of molecular chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues and classified states of the configured model.
    Diagonalize(CommonArgs),
    /// Stick and broadened absorption spectrum of the configured model.
    Spectrum(CommonArgs),
    /// LP coefficients over the configured (N, d) grid.
    Scan(CommonArgs),
    /// Disorder ensemble, plus a per-seed disordered scan when [scan] is set.
    Disorder(CommonArgs),
    /// Cavity-free exciton spectrum.
    Kasha {
        #[command(flatten)]
        common: CommonArgs,
        /// Couple every pair of emitters instead of nearest neighbors.
        #[arg(long)]
        all_pairs: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory, overriding [output] directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "K")]
    pub samples: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

fn load(args: &CommonArgs) -> Result<(RunConfig, PathBuf)> {
    let text = std::fs::read_to_string(&args.config).map_err(Error::file(&args.config))?;
    let mut config = parse_config(&text)?;
    if args.seed.is_some() || args.samples.is_some() {
        let d = config.disorder.get_or_insert_with(default_disorder);
        if let Some(seed) = args.seed {
            d.seed = seed;
        }
        if let Some(samples) = args.samples {
            if samples == 0 {
                return Err(Error::invalid("--samples must be >= 1"));
            }
            d.samples = samples;
        }
    }
    let out = args.out.clone().unwrap_or_else(|| config.output.directory.clone());
    std::fs::create_dir_all(&out).map_err(Error::file(&out))?;
    Ok((config, out))
}

fn default_disorder() -> DisorderConfig {
    let d = crate::disorder::DisorderSpec::new(0);
    DisorderConfig {
        sigma_ev: crate::disorder::DEFAULT_SIGMA_EV,
        angle_max: d.angle_max,
        seed: d.seed,
        samples: d.n_samples,
        protected: None,
    }
}

fn write(out: &Path, name: &str, csv: &Csv, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join(name);
    csv.write(&path)?;
    written.push(path);
    Ok(())
}

fn build(config: &RunConfig) -> Result<ModelMatrix> {
    let aggregate = config.aggregate();
    config.system.model.build(&aggregate, &config.cavity_spec()?, config.system.n_rep)
}

fn broaden(sticks: &SpectrumData, spectrum: &SpectrumConfig) -> Result<SpectrumData> {
    let grid = EnergyGrid::around(
        &sticks.stick_energies,
        ev_to_hartree(spectrum.margin_ev),
        ev_to_hartree(spectrum.step_ev),
    );
    broadened_spectrum(sticks, ev_to_hartree(spectrum.width_ev), grid)
}

/// Applies [`THREADS_ENV`] to the global worker pool. Only the first call
/// has an effect.
pub fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::invalid(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
        // a pool that is already running keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Runs one subcommand and returns the files written.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    configure_threads()?;
    let mut written = Vec::new();
    match cli.command {
        Command::Diagonalize(args) => {
            let (config, out) = load(&args)?;
            let model = build(&config)?;
            let eig = diagonalize(&model, DEFAULT_TOL)?;
            let dipoles = model_dipoles(config.system.model, &config.aggregate(), &model)?;
            let report = classify_states(&eig, model.labels(), &dipoles)?;
            write(&out, "eigenvalues.csv", &eigenvalues_csv(&report), &mut written)?;
            write(&out, "report.csv", &report_csv(&report), &mut written)?;
        }
        Command::Spectrum(args) => {
            let (config, out) = load(&args)?;
            let model = build(&config)?;
            let eig = diagonalize(&model, DEFAULT_TOL)?;
            let dipoles = model_dipoles(config.system.model, &config.aggregate(), &model)?;
            let sticks = oscillator_strengths(&eig, &dipoles)?;
            let broadened = broaden(&sticks, &config.spectrum.clone().unwrap_or_default())?;
            write(&out, "sticks.csv", &sticks_csv(&sticks), &mut written)?;
            write(&out, "broadened.csv", &broadened_csv(&broadened), &mut written)?;
        }
        Command::Scan(args) => {
            let (config, out) = load(&args)?;
            let rows = coefficient_scan(&config.scan_spec())?;
            write(&out, "scan.csv", &scan_csv(&rows), &mut written)?;
        }
        Command::Disorder(args) => {
            let (mut config, out) = load(&args)?;
            config.disorder.get_or_insert_with(default_disorder);
            let d = config.disorder_spec().expect("disorder section present");
            let aggregate = config.aggregate();
            let stats = ensemble_polariton_stats(&aggregate, &config.cavity_spec()?, &d)?;
            write(&out, "disorder_samples.csv", &disorder_samples_csv(&stats), &mut written)?;
            write(&out, "disorder_aggregate.csv", &disorder_aggregate_csv(&stats), &mut written)?;
            write(&out, "disorder_histograms.csv", &histograms_csv(&stats), &mut written)?;
            if config.scan.is_some() {
                let rows = disordered_scan(&config.scan_spec(), &d, 0, false)?;
                write(&out, "disorder_scan.csv", &scan_csv(&rows), &mut written)?;
            }
        }
        Command::Kasha { common, all_pairs } => {
            let (config, out) = load(&common)?;
            let aggregate = config.aggregate();
            let mode = if all_pairs { CouplingMode::AllPairs } else { CouplingMode::NearestNeighbor };
            let model = build_kasha_exciton(&aggregate, mode)?;
            let eig = diagonalize(&model, DEFAULT_TOL)?;
            let sticks = oscillator_strengths(&eig, &dipole_table(model.labels(), &chain_geometry(&aggregate))?)?;
            let broadened = broaden(&sticks, &config.spectrum.clone().unwrap_or_default())?;
            write(&out, "exciton_sticks.csv", &sticks_csv(&sticks), &mut written)?;
            write(&out, "exciton_broadened.csv", &broadened_csv(&broadened), &mut written)?;
        }
    }
    Ok(written)
}
