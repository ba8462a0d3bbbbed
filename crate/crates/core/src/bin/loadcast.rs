//! Command-line front end. Every pipeline stage can be run on its own.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use loadcast::gateway::{self, GatewayClient, Store};
use loadcast::lstm::TrainConfig;
use loadcast::ops::{self, Clock, LoadcastConfig, PointBinding, RunLog, Runtime, SimClock, SystemClock};
use loadcast::pipeline::{self, FeatureMode, HORIZON};
use loadcast::quality::sigma_filter;
use loadcast::registry::Registry;
use loadcast::synthetic::{generate_synthetic_campus, Dataset};
use loadcast::time::{floor_hour, format_ts, parse_ts, HOUR};
use loadcast::timeseries::{AlignedTable, PointId};
use loadcast::{Error, Result};

/// `println!` that exits quietly when stdout is a closed pipe.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        if let Err(e) = writeln!(std::io::stdout().lock(), $($t)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
        }
    }};
}

macro_rules! out_raw {
    ($($t:tt)*) => {{
        use std::io::Write;
        if let Err(e) = write!(std::io::stdout().lock(), $($t)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
        }
    }};
}

#[derive(Parser)]
#[command(name = "loadcast", version, about = "Hourly building-load forecasting")]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Load point to operate on (defaults to the dataset's load point).
    #[arg(long, global = true)]
    point: Option<PointId>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic campus dataset.
    Simulate {
        #[arg(long)]
        days: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also import the series into a gateway data directory.
        #[arg(long)]
        gateway_dir: Option<PathBuf>,
    },
    /// Screen every series of a dataset and report removals.
    Qc {
        #[command(flatten)]
        data: DataArgs,
        /// Write per-series JSON reports here.
        #[arg(long)]
        report_dir: Option<PathBuf>,
    },
    /// Train a model and store it as the next registry version.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Write the loss curve CSV here.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Evaluate a stored model on the test split.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        version: Option<u64>,
        /// Write per-step MSE CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Issue one 18-hour forecast.
    Forecast {
        #[command(flatten)]
        data: DataArgs,
        /// Issuance hour (default: last hour in the data).
        #[arg(long)]
        at: Option<String>,
        /// Also write it to this gateway.
        #[arg(long)]
        gateway: Option<String>,
    },
    /// Run the HTTP gateway.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Import a dataset directory before serving.
        #[arg(long)]
        import: Option<PathBuf>,
    },
    /// Run the scheduler against a gateway.
    Run {
        /// Simulate this many hours from --start instead of following the wall clock.
        #[arg(long)]
        hours: Option<u32>,
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        gateway: Option<String>,
    },
    /// Train a grid of learning rates and hidden sizes and rank them.
    GridSearch {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.001")]
        lr: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "16")]
        hidden: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect and maintain the model registry.
    Registry {
        #[arg(long)]
        registry: Option<PathBuf>,
        #[command(subcommand)]
        cmd: RegistryCmd,
    },
}

#[derive(Subcommand)]
enum RegistryCmd {
    List,
    /// Delete all but the newest N versions.
    Prune {
        #[arg(long, default_value_t = 3)]
        keep: usize,
    },
    /// Re-store an older version as the new latest.
    Promote {
        #[arg(long)]
        version: u64,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Dataset directory written by `simulate`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    registry: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Weather,
    WeatherLoad,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    feature_mode: Option<Mode>,
}

struct Ctx {
    cfg: LoadcastConfig,
    point: Option<PointId>,
}

impl Ctx {
    fn dataset(&self, d: &DataArgs) -> Result<Dataset> {
        Dataset::load(d.data.as_deref().unwrap_or(&self.cfg.data_dir))
    }

    fn registry(&self, dir: Option<&Path>) -> Result<Registry> {
        Registry::open(dir.unwrap_or(&self.cfg.registry_dir))
    }

    fn table(&self, ds: &Dataset) -> Result<AlignedTable> {
        if let Some(p) = &self.point {
            if p != ds.load.point() {
                return Err(Error::not_found(format!("dataset has no load point `{p}`")));
            }
        }
        let rt = &self.cfg.runtime;
        let (table, reports) =
            ops::clean_and_align(&ds.load, &ds.weather, &rt.schedule.qc_policy, rt.impute_max_gap_hours)?;
        let removed: usize = reports.iter().map(|r| r.removed).sum();
        log::info!("qc removed {removed} samples; {} aligned hours", table.len());
        Ok(table)
    }

    fn train_config(&self, a: &TrainArgs) -> (TrainConfig, pipeline::PipelineConfig) {
        let mut t = self.cfg.runtime.train.clone();
        let mut p = self.cfg.runtime.pipeline;
        if let Some(e) = a.epochs {
            t.epochs = e;
        }
        match a.feature_mode {
            Some(Mode::Weather) => p.feature_mode = FeatureMode::WeatherOnly,
            Some(Mode::WeatherLoad) => p.feature_mode = FeatureMode::WeatherAndLoad,
            None => {}
        }
        (t, p)
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn now() -> i64 {
    chrono::Utc::now().timestamp()
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => LoadcastConfig::load(p)?,
        None => LoadcastConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.runtime.train.seed = s;
    }
    let ctx = Ctx { cfg, point: cli.point };

    match cli.cmd {
        Cmd::Simulate { days, out, gateway_dir } => {
            let days = days.unwrap_or(ctx.cfg.days);
            let out = out.unwrap_or_else(|| ctx.cfg.data_dir.clone());
            let ds: Dataset = generate_synthetic_campus(ctx.cfg.seed, days, &ctx.cfg.synthetic)?.into();
            ds.write(&out, Some(ctx.cfg.seed), Some(days))?;
            out!("wrote {} hours for {} to {}", ds.load.len(), ds.load.point(), out.display());
            if let Some(dir) = gateway_dir {
                let fid = Store::open(&dir)?.import_dataset(&ds)?;
                out!("imported into {} (forecast point {fid})", dir.display());
            }
        }
        Cmd::Qc { data, report_dir } => {
            let ds = ctx.dataset(&data)?;
            for s in ds.all_series() {
                let (_, report) = sigma_filter(s, &ctx.cfg.runtime.schedule.qc_policy)?;
                out!("{}", report.summary_line());
                if let Some(dir) = &report_dir {
                    write_file(&dir.join(format!("{}.qc.json", s.point().sanitized())), &report.to_json()?)?;
                }
            }
        }
        Cmd::Train { data, train, curve } => {
            let ds = ctx.dataset(&data)?;
            let table = ctx.table(&ds)?;
            let (tcfg, pcfg) = ctx.train_config(&train);
            let reg = ctx.registry(data.registry.as_deref())?;
            let (record, losses) = pipeline::train_point_model(&table.point, &table, &tcfg, &pcfg, now(), None)?;
            let v = reg.put(&record)?;
            let (first, last) = (losses.first().unwrap(), losses.last().unwrap());
            out!(
                "{} v{v}: train mse {:.4} -> {:.4}, test mse {:.4} -> {:.4} (scaled); test mse {:.2} kW²",
                table.point, first.train_mse, last.train_mse, first.test_mse, last.test_mse, record.metrics.overall_mse
            );
            if let Some(path) = curve {
                write_file(&path, &losses.to_csv_string())?;
            }
        }
        Cmd::Evaluate { data, version, csv } => {
            let ds = ctx.dataset(&data)?;
            let table = ctx.table(&ds)?;
            let reg = ctx.registry(data.registry.as_deref())?;
            let record = match version {
                Some(v) => reg.get_version(&table.point, v)?,
                None => reg.get_latest(&table.point)?,
            };
            let windows = pipeline::build_windows(&table, record.train_config.lookback, HORIZON)?;
            let split = pipeline::chronological_split(&table, &windows, &record.split)?;
            let metrics = pipeline::evaluate(&record, &table, &split.test)?;
            out!("{}", serde_json::to_string_pretty(&metrics)?);
            if let Some(path) = csv {
                write_file(&path, &metrics.per_step_csv())?;
            }
        }
        Cmd::Forecast { data, at, gateway } => {
            let ds = ctx.dataset(&data)?;
            let table = ctx.table(&ds)?;
            let record = ctx.registry(data.registry.as_deref())?.get_latest(&table.point)?;
            let issued_at = match at {
                Some(s) => parse_ts(&s)?,
                None => table.rows.last().map(|r| r.ts).ok_or_else(|| Error::invalid("empty dataset"))?,
            };
            let rows = pipeline::latest_rows(&table, issued_at, record.train_config.lookback)?;
            let grid = pipeline::issue_forecast(&record, rows, issued_at)?;
            out!("{}", grid.to_json()?);
            if let Some(url) = gateway {
                let out = GatewayClient::new(url).his_write(&gateway::forecast_point_id(&table.point), &grid)?;
                eprintln!("gateway accepted {} ({} stale)", out.accepted, out.stale);
            }
        }
        Cmd::Serve { bind, data_dir, import } => {
            let bind = bind.unwrap_or_else(|| ctx.cfg.gateway.bind.clone());
            let store = Arc::new(Store::open(data_dir.unwrap_or_else(|| ctx.cfg.gateway.data_dir.clone()))?);
            if let Some(dir) = import {
                store.import_dataset(&Dataset::load(&dir)?)?;
            }
            let registry = Registry::open(&ctx.cfg.registry_dir).ok();
            let handle = gateway::serve(&bind, store, registry)?;
            out!("serving on {}", handle.base_url());
            handle.join();
        }
        Cmd::Run { hours, start, gateway } => {
            let mut rc = ctx.cfg.runtime.clone();
            if rc.schedule.points.is_empty() {
                let load = match ctx.point.clone() {
                    Some(p) => p,
                    None => ctx.cfg.synthetic.load_point_id()?,
                };
                rc.schedule.points.push(PointBinding::synthetic(load));
            }
            let url = gateway.unwrap_or_else(|| ctx.cfg.gateway.url.clone());
            let client = GatewayClient::new(url).with_retry(ctx.cfg.gateway.retry);
            let registry = Registry::open(&ctx.cfg.registry_dir)?;
            let log = RunLog::open(&ctx.cfg.run_log)?;
            match hours {
                Some(h) => {
                    let t0 = floor_hour(start.as_deref().map(parse_ts).transpose()?.unwrap_or_else(now));
                    let clock = Arc::new(SimClock::new(t0));
                    let mut rt = Runtime::new(rc, clock, client, registry, log)?;
                    rt.run_until(t0 + h as i64 * HOUR, Duration::from_secs(HOUR as u64))?;
                    let l = rt.log();
                    out!(
                        "simulated {h} h from {}: {} forecasts, {} retrains, {} failures",
                        format_ts(t0),
                        l.count(ops::RecordKind::Forecast, ops::Outcome::Ok),
                        l.count(ops::RecordKind::Retrain, ops::Outcome::Ok),
                        l.records().iter().filter(|r| r.outcome == ops::Outcome::Failed).count()
                    );
                }
                None => {
                    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
                    let mut rt = Runtime::new(rc, clock, client, registry, log)?;
                    rt.run_loop(&AtomicBool::new(false), Duration::from_secs(60))?;
                }
            }
        }
        Cmd::GridSearch { data, train, lr, hidden, out } => {
            let ds = ctx.dataset(&data)?;
            let table = ctx.table(&ds)?;
            let (base, pcfg) = ctx.train_config(&train);
            let report = ops::grid_search(&table, &pcfg, &ops::expand_grid(&base, &lr, &hidden))?;
            let csv = report.to_csv()?;
            out_raw!("{csv}");
            if let Some(path) = out {
                write_file(&path, &csv)?;
            }
            if report.all_failed() {
                return Err(Error::Divergence { epoch: 0, detail: "every grid variant failed".into() });
            }
        }
        Cmd::Registry { registry, cmd } => {
            let reg = ctx.registry(registry.as_deref())?;
            let points = match &ctx.point {
                Some(p) => vec![p.clone()],
                None => reg.points()?,
            };
            for p in points {
                match &cmd {
                    RegistryCmd::List => {
                        for v in reg.list(&p)? {
                            out!("{p}\tv{}\t{}\ttest_mse={:.3}", v.version, format_ts(v.created_at), v.test_mse);
                        }
                    }
                    RegistryCmd::Prune { keep } => {
                        let removed = reg.prune(&p, *keep)?;
                        out!("{p}: removed {} version(s) {removed:?}", removed.len());
                    }
                    RegistryCmd::Promote { version } => {
                        let nv = reg.promote(&p, *version, now())?;
                        out!("{p}: v{version} promoted as v{nv}");
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
