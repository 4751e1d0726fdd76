use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use entlink_core::analysis::{
    angle_grid, budget_table, detuning_grid, scan_wavelength_channels, visibility_sweep,
    write_curves_csv, ChannelScanRow, ScanModel,
};
use entlink_core::physics::{Basis, CoincidenceResult};
use entlink_core::sim::{expected_rates, simulate};
use entlink_core::tagproc::{
    count_coincidences_with, cross_correlate, default_accidental_offset, find_delay_with,
    CoincidenceOptions, DelaySearchSpec,
};
use entlink_core::{qtag, Error, Execution, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "entlink",
    version,
    about = "Entanglement-distribution link simulator and time-tag analyzer"
)]
struct Cli {
    /// Worker threads for the data-parallel paths (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate both arms and write QTAG files plus a provenance record.
    Simulate(SimulateArgs),
    /// Count coincidences between two QTAG files.
    Analyze(AnalyzeArgs),
    /// Simulate and fit two-photon interference curves.
    Visibility(VisibilityArgs),
    /// Print the loss and rate budget of a configuration.
    Budget(ConfigArgs),
    /// Sweep the signal/idler channel detuning from the pump.
    ScanWavelength(ScanArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled preset (ideal, local-8k, local-460k, 93km, 93km-eff49, 155km).
    #[arg(long)]
    preset: Option<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.config, &self.preset) {
            (Some(p), _) => Ok(ExperimentConfig::load(p)?),
            (None, Some(name)) => Ok(ExperimentConfig::preset(name)?),
            (None, None) => bail!(Error::Config(
                "one of --config or --preset is required".into()
            )),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured duration, s.
    #[arg(long)]
    duration: Option<f64>,
    /// Directory receiving signal.qtag, idler.qtag and provenance.toml.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    a: PathBuf,
    b: PathBuf,
    /// Delay of b relative to a in ps, or "auto" to search for it.
    #[arg(long, default_value = "auto")]
    delay: String,
    #[arg(long, default_value_t = 60)]
    window: u64,
    /// Accidental-window offset, ps (default max(100 x window, 10 ns)).
    #[arg(long, allow_hyphen_values = true)]
    offset: Option<i64>,
    #[arg(long, default_value_t = -1_000_000_000, allow_hyphen_values = true)]
    min_delay: i64,
    #[arg(long, default_value_t = 1_000_000_000, allow_hyphen_values = true)]
    max_delay: i64,
    /// First-level bin of the delay search, ps. Narrower bins need less data
    /// to find a weak peak.
    #[arg(long, default_value_t = 1_000_000)]
    coarse_bin: u64,
    #[arg(long, default_value_t = 16)]
    refine_factor: u32,
    /// Also write the cross-correlation around the delay as CSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    histogram_bin: u64,
    #[arg(long, default_value_t = 5000)]
    histogram_half_range: u64,
    /// Also write the result record to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VisibilityArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Signal bases to sweep, e.g. HVDA.
    #[arg(long, default_value = "HVDA")]
    bases: String,
    #[arg(long, default_value_t = 22.5)]
    step: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Integration time per angle, s.
    #[arg(long)]
    duration: Option<f64>,
    /// CSV of coincidences per angle and basis.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    /// Channel model (TOML); defaults are used for absent fields.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    start: f64,
    #[arg(long, default_value_t = 30.0)]
    stop: f64,
    #[arg(long, default_value_t = 0.5)]
    step: f64,
    /// CSV destination; printed to stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct Provenance {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl Provenance {
    fn new(command: &'static str, config_hash: String, seed: Option<u64>) -> Self {
        Self {
            tool: "entlink",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_hash,
            seed,
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn emit<T: Serialize>(record: &T, also: Option<&Path>) -> Result<()> {
    let text = toml::to_string(record)?;
    if let Some(p) = also {
        fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
    }
    io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn create(path: &Path) -> Result<io::BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(io::BufWriter::new(f))
}

fn cmd_simulate(args: SimulateArgs, exec: Execution) -> Result<()> {
    let mut cfg = args.cfg.load()?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(d) = args.duration {
        cfg.duration_s = d;
    }
    cfg.validate()?;
    let out = simulate(&cfg, exec)?;
    fs::create_dir_all(&args.output)
        .with_context(|| format!("creating {}", args.output.display()))?;
    qtag::write_file(&args.output.join("signal.qtag"), &out.signal)?;
    qtag::write_file(&args.output.join("idler.qtag"), &out.idler)?;

    #[derive(Serialize)]
    struct Streams {
        signal_tags: usize,
        idler_tags: usize,
        expected_delay_ps: i64,
        expected_coincidence_cps: f64,
        expected_signal_singles_cps: f64,
        expected_idler_singles_cps: f64,
    }
    #[derive(Serialize)]
    struct Record {
        provenance: Provenance,
        streams: Streams,
        config: ExperimentConfig,
    }
    let rates = expected_rates(&cfg)?;
    let record = Record {
        provenance: Provenance::new("simulate", cfg.hash(), Some(cfg.seed)),
        streams: Streams {
            signal_tags: out.signal.len(),
            idler_tags: out.idler.len(),
            expected_delay_ps: cfg.expected_delay_ps(),
            expected_coincidence_cps: rates.coincidence_cps,
            expected_signal_singles_cps: rates.signal.singles_cps(),
            expected_idler_singles_cps: rates.idler.singles_cps(),
        },
        config: cfg,
    };
    emit(&record, Some(&args.output.join("provenance.toml")))
}

fn cmd_analyze(args: AnalyzeArgs, exec: Execution) -> Result<()> {
    let a = qtag::read_file(&args.a)?;
    let b = qtag::read_file(&args.b)?;
    let delay = if args.delay == "auto" {
        let spec = DelaySearchSpec {
            coarse_bin_ps: args.coarse_bin,
            refine_factor: args.refine_factor,
            ..DelaySearchSpec::over(args.min_delay, args.max_delay)
        };
        find_delay_with(&a, &b, &spec, exec)?
    } else {
        args.delay.parse::<i64>().map_err(|_| {
            Error::Config(format!(
                "--delay must be an integer or \"auto\", got {:?}",
                args.delay
            ))
        })?
    };
    let offset = args
        .offset
        .unwrap_or_else(|| default_accidental_offset(args.window));
    let opts = CoincidenceOptions {
        accidental_offsets: vec![offset],
        integration_s: None,
        exec,
    };
    let result = count_coincidences_with(&a, &b, delay, args.window, &opts)?;
    if let Some(p) = &args.histogram {
        let h = cross_correlate(&a, &b, delay, args.histogram_half_range, args.histogram_bin)?;
        h.write_csv(create(p)?)?;
    }

    #[derive(Serialize)]
    struct Settings<'a> {
        a_sha256: String,
        b_sha256: String,
        delay: &'a str,
        window_ps: u64,
        accidental_offset_ps: i64,
        min_delay_ps: i64,
        max_delay_ps: i64,
        coarse_bin_ps: u64,
        refine_factor: u32,
    }
    let settings = Settings {
        a_sha256: sha256_hex(&fs::read(&args.a)?),
        b_sha256: sha256_hex(&fs::read(&args.b)?),
        delay: &args.delay,
        window_ps: args.window,
        accidental_offset_ps: offset,
        min_delay_ps: args.min_delay,
        max_delay_ps: args.max_delay,
        coarse_bin_ps: args.coarse_bin,
        refine_factor: args.refine_factor,
    };
    #[derive(Serialize)]
    struct Record {
        provenance: Provenance,
        result: CoincidenceResult,
    }
    let record = Record {
        provenance: Provenance::new(
            "analyze",
            sha256_hex(toml::to_string(&settings)?.as_bytes()),
            None,
        ),
        result,
    };
    emit(&record, args.output.as_deref())
}

fn cmd_visibility(args: VisibilityArgs, exec: Execution) -> Result<()> {
    let mut cfg = args.cfg.load()?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(d) = args.duration {
        cfg.duration_s = d;
    }
    cfg.validate()?;
    let bases = args
        .bases
        .chars()
        .map(|c| {
            Basis::parse(&c.to_string())
                .filter(|b| *b != Basis::Free)
                .ok_or_else(|| anyhow!(Error::Config(format!("unknown basis {c:?} in --bases"))))
        })
        .collect::<Result<Vec<_>>>()?;
    let angles = angle_grid(args.step)?;
    let sweep = visibility_sweep(&cfg, &bases, &angles, exec)?;
    if let Some(p) = &args.output {
        write_curves_csv(create(p)?, &sweep.curves)?;
    }

    #[derive(Serialize)]
    struct Fit {
        basis: String,
        amplitude: f64,
        visibility: f64,
        raw_visibility: f64,
        nonphysical: bool,
        phase_deg: f64,
        offset_floor: f64,
        residual_rms: f64,
        visibility_se: f64,
    }
    #[derive(Serialize)]
    struct Record {
        provenance: Provenance,
        fits: Vec<Fit>,
        #[serde(skip_serializing_if = "Option::is_none")]
        report: Option<entlink_core::analysis::ExperimentReport>,
    }
    let fits = sweep
        .fits
        .iter()
        .map(|c| Fit {
            basis: c.basis.to_string(),
            amplitude: c.fit.amplitude,
            visibility: c.fit.visibility,
            raw_visibility: c.fit.raw_visibility,
            nonphysical: c.fit.nonphysical,
            phase_deg: c.fit.phase_deg,
            offset_floor: c.fit.offset_floor,
            residual_rms: c.fit.residual_rms,
            visibility_se: c.fit.visibility_se,
        })
        .collect();
    emit(
        &Record {
            provenance: Provenance::new("visibility", cfg.hash(), Some(cfg.seed)),
            fits,
            report: sweep.report,
        },
        None,
    )
}

fn cmd_budget(args: ConfigArgs) -> Result<()> {
    let cfg = args.load()?;
    #[derive(Serialize)]
    struct Record {
        provenance: Provenance,
        budget: entlink_core::analysis::BudgetTable,
    }
    let mut budget = budget_table(&cfg)?;
    if budget.car.is_infinite() {
        // TOML has no representation for a lossless, noiseless CAR.
        budget.car = f64::MAX;
    }
    emit(
        &Record {
            provenance: Provenance::new("budget", cfg.hash(), Some(cfg.seed)),
            budget,
        },
        None,
    )
}

fn write_scan_csv<W: Write>(mut out: W, rows: &[ChannelScanRow]) -> io::Result<()> {
    writeln!(out, "detuning_nm,rate,noise_singles,singles,car")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.detuning_nm, r.pair_rate, r.noise_singles, r.singles, r.car
        )?;
    }
    out.flush()
}

fn cmd_scan(args: ScanArgs) -> Result<()> {
    let model: ScanModel = match &args.model {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => ScanModel::default(),
    };
    let grid = detuning_grid(args.start, args.stop, args.step)?;
    let rows = scan_wavelength_channels(&model, &grid)?;
    let best = rows
        .iter()
        .max_by(|a, b| a.car.total_cmp(&b.car))
        .map(|r| r.detuning_nm)
        .unwrap_or(f64::NAN);
    match &args.output {
        None => write_scan_csv(io::stdout().lock(), &rows)?,
        Some(p) => {
            write_scan_csv(create(p)?, &rows)?;
            #[derive(Serialize)]
            struct Summary {
                rows: usize,
                car_argmax_detuning_nm: f64,
            }
            #[derive(Serialize)]
            struct Record {
                provenance: Provenance,
                scan: Summary,
            }
            let hash = sha256_hex(toml::to_string(&model)?.as_bytes());
            emit(
                &Record {
                    provenance: Provenance::new("scan-wavelength", hash, None),
                    scan: Summary {
                        rows: rows.len(),
                        car_argmax_detuning_nm: best,
                    },
                },
                None,
            )?;
        }
    }
    eprintln!("CAR peaks at {best} nm detuning");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let exec = Execution::Parallel;
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a, exec),
        Command::Analyze(a) => cmd_analyze(a, exec),
        Command::Visibility(a) => cmd_visibility(a, exec),
        Command::Budget(a) => cmd_budget(a),
        Command::ScanWavelength(a) => cmd_scan(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let no_peak = matches!(
                e.downcast_ref::<Error>(),
                Some(Error::NoSignificantPeak { .. })
            );
            ExitCode::from(if no_peak { 1 } else { 2 })
        }
    }
}
