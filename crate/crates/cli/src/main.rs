//! `dosewise`: command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input (including missing files), 3 a
//! valid input that failed at run time (e.g. a position outside the field).
//! Errors are written to stderr as `{"error": {"kind", "message"}}`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{NaiveDate, NaiveDateTime};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use dosewise_core::dose::{seeded_rmr_residual, DoseModelParams, EeSource};
use dosewise_core::field::{synthesize, GridAxes, SyntheticFieldSpec};
use dosewise_core::report::{
    profile_json, routes_csv, run_optimization, series_csv, shares_csv, summary_csv, sweep_csv, table_csv,
    ProfileDocument, SweepRow,
};
use dosewise_core::routing::{CatalogProvider, GraphProvider, RoadGraph, RouteCatalog, RouteProvider};
use dosewise_core::scenario::{load_field_path, load_scenario_file, SearchMode};
use dosewise_core::trace::{dose_series_with_residuals, exposure_profile, parse_records, ParseOptions, ProfileOptions, Subject, Trace};
use dosewise_core::{CommuteMode, Error as CoreError, ErrorKind, LatLon};
use dosewise_service::{Config, Store};

#[derive(Parser)]
#[command(name = "dosewise", version, about = "Inhaled air-pollution dose estimation and commute dose minimization")]
struct Cli {
    /// Service/storage config file (TOML). DOSEWISE_DATA_DIR and
    /// DOSEWISE_PORT override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a trace CSV and store it in the data directory.
    Ingest {
        #[arg(long)]
        trace: PathBuf,
        /// Date for HH:MM[:SS] time columns.
        #[arg(long)]
        date: Option<NaiveDate>,
        #[arg(long, default_value = "anonymous")]
        owner: String,
    },
    /// Per-minute dose series as CSV.
    Dose {
        #[command(flatten)]
        input: TraceInput,
        /// Draw one RMR residual from this seed instead of using e = 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exposure profile (time and dose shares by place) as JSON.
    Profile {
        #[command(flatten)]
        input: TraceInput,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Profile document, series CSV and share table written to a directory.
    Report {
        #[command(flatten)]
        input: TraceInput,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimize commute dose over departure, stay and routes.
    Optimize {
        #[arg(long)]
        scenario: PathBuf,
        /// Grid step in minutes; the scenario's value otherwise.
        #[arg(long)]
        granularity: Option<u32>,
        #[arg(long)]
        mode: Option<SearchMode>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize at several granularities and tabulate dose against cost.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,15")]
        granularities: Vec<u32>,
        #[arg(long)]
        mode: Option<SearchMode>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a synthetic field spec onto a grid file.
    GenField {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_parser = parse_latlon, allow_hyphen_values = true)]
        south_west: LatLon,
        #[arg(long, value_parser = parse_latlon, allow_hyphen_values = true)]
        north_east: LatLon,
        #[arg(long)]
        dlat: f64,
        #[arg(long)]
        dlon: f64,
        #[arg(long)]
        start: NaiveDateTime,
        #[arg(long)]
        end: NaiveDateTime,
        #[arg(long, default_value_t = 60.0)]
        dt_minutes: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Alternative routes expanded per minute, as CSV.
    Routes {
        #[arg(long, conflicts_with = "graph", required_unless_present = "graph")]
        catalog: Option<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        mode: CommuteMode,
        #[arg(long)]
        departure: NaiveDateTime,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Args)]
struct TraceInput {
    /// Trace CSV; or use --trace-id for a stored trace.
    #[arg(long, required_unless_present = "trace_id", conflicts_with = "trace_id")]
    trace: Option<PathBuf>,
    #[arg(long)]
    trace_id: Option<String>,
    #[arg(long)]
    date: Option<NaiveDate>,
    /// Subject JSON: person profile and home/work positions.
    #[arg(long)]
    subject: PathBuf,
    /// Grid or synthetic field JSON.
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value = "auto")]
    source: String,
    #[arg(long)]
    radius_m: Option<f64>,
}

#[derive(Debug)]
struct CliError {
    code: u8,
    kind: &'static str,
    message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        Self { code: 2, kind: "validation", message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: 3, kind: "io", message: format!("{}: {e}", path.display()) }
    }
}

impl<E: Into<CoreError>> From<E> for CliError {
    fn from(e: E) -> Self {
        let e = e.into();
        let (code, kind) = match e.kind() {
            ErrorKind::Validation => (2, "validation"),
            ErrorKind::MissingAsset => (2, "missing_asset"),
            ErrorKind::Runtime => (3, "runtime"),
        };
        Self { code, kind, message: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn parse_latlon(s: &str) -> Result<LatLon, String> {
    let (lat, lon) = s.split_once(',').ok_or("expected LAT,LON")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok(LatLon::new(p(lat)?, p(lon)?))
}

fn existing(path: &Path) -> CliResult<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError { code: 2, kind: "missing_asset", message: format!("{}: no such file", path.display()) })
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(existing(path)?).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn emit(out: Option<&Path>, contents: &str) -> CliResult {
    match out {
        Some(p) => write(p, contents),
        None => {
            stdout(contents);
            if !contents.ends_with('\n') {
                stdout("\n");
            }
            Ok(())
        }
    }
}

/// A closed pipe (`dosewise routes ... | head`) is not an error.
fn stdout(s: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(s.as_bytes()).and_then(|()| out.flush());
}

fn out_dir(dir: &Path) -> CliResult<&Path> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir)
}

fn config(path: Option<&Path>) -> CliResult<Config> {
    Config::load(path).map_err(|e| CliError::validation(e.to_string()))
}

fn open_store(cfg: &Config) -> CliResult<Store> {
    Store::open(&cfg.data_dir).map_err(|e| CliError::io(&cfg.data_dir, e))
}

struct LoadedTrace {
    trace: Trace<f64>,
    params: DoseModelParams<f64>,
    field: std::sync::Arc<dyn dosewise_core::field::ConcentrationField<f64>>,
    source: EeSource,
    opts: ProfileOptions,
}

fn load_trace(input: &TraceInput, cfg: Option<&Path>) -> CliResult<LoadedTrace> {
    let subject = Subject::<f64>::load(existing(&input.subject)?)?;
    let records = match (&input.trace, &input.trace_id) {
        (Some(path), _) => parse_records::<f64>(&read(path)?, &ParseOptions { date: input.date })?,
        (None, Some(id)) => {
            let store = open_store(&config(cfg)?)?;
            let stored = store.get_trace(id).map_err(|e| CliError { code: 3, kind: "io", message: e.to_string() })?;
            stored.ok_or_else(|| CliError { code: 2, kind: "not_found", message: format!("trace {id} is not stored") })?.records
        }
        (None, None) => unreachable!("clap requires one of --trace/--trace-id"),
    };
    let trace = Trace::new(subject, records)?;
    let params = match &input.params {
        Some(p) => DoseModelParams::load(existing(p)?)?,
        None => DoseModelParams::fixture(),
    };
    let field = load_field_path::<f64>(existing(&input.field)?)?;
    let source: EeSource = serde_json::from_value(json!(input.source))
        .map_err(|_| CliError::validation(format!("--source must be auto, sensor or met, got {:?}", input.source)))?;
    let mut opts = ProfileOptions::default();
    if let Some(r) = input.radius_m {
        if !(r.is_finite() && r > 0.0) {
            return Err(CliError::validation("--radius-m must be > 0"));
        }
        opts.radius_m = r;
    }
    Ok(LoadedTrace { trace, params, field, source, opts })
}

fn run(cli: Cli) -> CliResult {
    let cfg_path = cli.config.as_deref();
    match cli.command {
        Command::Ingest { trace, date, owner } => {
            let records = parse_records::<f64>(&read(&trace)?, &ParseOptions { date })?;
            let store = open_store(&config(cfg_path)?)?;
            let stored = store.put_trace(&owner, records).map_err(|e| CliError::io(&trace, e))?;
            stdout(&format!("{}\n", json!({ "trace_id": stored.trace_id })));
        }
        Command::Dose { input, seed, out } => {
            let t = load_trace(&input, cfg_path)?;
            let e = match seed {
                Some(s) => seeded_rmr_residual(&t.trace.person, &t.params, s)?,
                None => 0.0,
            };
            let series = dose_series_with_residuals(&t.trace, t.field.as_ref(), &t.params, t.source, |_| e)?;
            emit(out.as_deref(), &series_csv(&t.trace, &series, &t.opts))?;
        }
        Command::Profile { input, out } => {
            let t = load_trace(&input, cfg_path)?;
            emit(out.as_deref(), &profile_json(&t.trace, t.field.as_ref(), &t.params, t.source, &t.opts)?)?;
        }
        Command::Report { input, out } => {
            let t = load_trace(&input, cfg_path)?;
            let series = dosewise_core::trace::dose_series(&t.trace, t.field.as_ref(), &t.params, t.source)?;
            let profile = exposure_profile(&t.trace, &series, &t.opts)?;
            let dir = out_dir(&out)?;
            write(&dir.join("series.csv"), &series_csv(&t.trace, &series, &t.opts))?;
            write(&dir.join("shares.csv"), &shares_csv(&profile))?;
            write(&dir.join("profile.json"), &ProfileDocument { profile, series }.to_json())?;
        }
        Command::Optimize { scenario, granularity, mode, out } => {
            let loaded = load_scenario_file::<f64>(existing(&scenario)?)?;
            let search = mode.unwrap_or(loaded.search);
            let t = granularity.unwrap_or(loaded.scenario.granularity);
            let report = run_optimization(&loaded, search, t, None)?;
            let dir = out_dir(&out)?;
            write(&dir.join("report.json"), &report.to_json())?;
            write(&dir.join("table_t.csv"), &table_csv(&report.result.table_t))?;
            write(&dir.join("summary.csv"), &summary_csv(std::slice::from_ref(&report.summary)))?;
            stdout(&format!("{}\n", serde_json::to_string(&report.summary).expect("summary serializes")));
        }
        Command::Sweep { scenario, granularities, mode, out } => {
            if granularities.is_empty() {
                return Err(CliError::validation("--granularities is empty"));
            }
            let loaded = load_scenario_file::<f64>(existing(&scenario)?)?;
            let search = mode.unwrap_or(loaded.search);
            let mut rows = Vec::with_capacity(granularities.len());
            for &t in &granularities {
                let report = run_optimization(&loaded, search, t, None)?;
                rows.push(SweepRow::from(&report));
            }
            let dir = out_dir(&out)?;
            write(&dir.join("sweep.csv"), &sweep_csv(&rows))?;
            stdout(&sweep_csv(&rows));
        }
        Command::GenField { spec, south_west, north_east, dlat, dlon, start, end, dt_minutes, out } => {
            let spec = SyntheticFieldSpec::<f64>::load(existing(&spec)?)?;
            let axes = GridAxes::covering(south_west, north_east, dlat, dlon, start, end, dt_minutes)?;
            write(&out, &synthesize(&spec, axes)?.to_json())?;
        }
        Command::Routes { catalog, graph, from, to, mode, departure } => {
            let provider: Box<dyn RouteProvider> = match (catalog, graph) {
                (Some(c), _) => Box::new(CatalogProvider::new(RouteCatalog::load(existing(&c)?)?)?),
                (None, Some(g)) => Box::new(GraphProvider::new(RoadGraph::load(existing(&g)?)?)?),
                (None, None) => unreachable!("clap requires --catalog or --graph"),
            };
            let routes = provider.get_routes(&from, &to, mode, departure)?;
            stdout(&routes_csv(&routes));
        }
        Command::Serve { port } => {
            let mut cfg = config(cfg_path)?;
            if let Some(p) = port {
                cfg.port = p;
            }
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError { code: 3, kind: "io", message: e.to_string() })?;
            rt.block_on(dosewise_service::serve(cfg, |addr| stdout(&format!("listening on http://{addr}\n"))))
            .map_err(|e| CliError { code: 3, kind: "io", message: e.to_string() })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind, "message": e.message } }));
            ExitCode::from(e.code)
        }
    }
}
