//! The `copsym` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bootstrap::{run_test, run_test_empirical, PValueRule, TestOptions, TestResult};
use crate::error::{Error, Result};
use crate::ndbc::{self, TimeWindow, Variable};
use crate::simulation::{order_scan, run_study, write_report, Checkpoint, StudyConfig};
use crate::stats::GridSpec;
use crate::{BernsteinOrder, Sample};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NETWORK: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "copsym", version, about = "Exchange-symmetry tests for bivariate copulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test H0: C(u,v) = C(v,u) on a two-column CSV.
    Test(TestArgs),
    /// Run a Monte Carlo level or power study.
    Simulate(SimulateArgs),
    /// Power against the Bernstein order for one copula and sample size.
    OrderScan(OrderScanArgs),
    /// Download (or copy) an NDBC stdmet archive with a checksum.
    FetchNdbc(FetchArgs),
    /// Turn stdmet archives into a two-column CSV sample.
    Extract(ExtractArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
struct TestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Bernstein order; defaults to ceil(sqrt(n)).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 20)]
    grid: usize,
    #[arg(long = "H", default_value_t = 200)]
    h: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the empirical copula instead of the Bernstein estimator.
    #[arg(long)]
    empirical: bool,
    /// Comma-separated subset of r,s,t.
    #[arg(long, default_value = "r,s,t")]
    stats: String,
    /// Use (k + 1) / (H + 1) instead of k / H.
    #[arg(long)]
    plus_one: bool,
    /// JSON report path.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
struct OrderScanArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    m_min: usize,
    #[arg(long)]
    m_max: usize,
    /// Output directory.
    #[arg(long, default_value = "order-scan")]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
struct FetchArgs {
    #[arg(long)]
    station: String,
    #[arg(long)]
    year: i32,
    #[arg(long)]
    out: PathBuf,
    /// Read the archive from this local file instead of the network.
    #[arg(long, conflicts_with = "url")]
    offline: Option<PathBuf>,
    /// Download from this URL instead of the NDBC historical archive.
    #[arg(long)]
    url: Option<String>,
}

#[derive(Debug, Clone, Args)]
struct ExtractArgs {
    /// One or more stdmet archives (plain or gzip).
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, default_value = "wvht")]
    x: String,
    #[arg(long, default_value = "wspd")]
    y: String,
    /// First day of the window (inclusive).
    #[arg(long, default_value = "2014-11-01")]
    start: String,
    /// Day after the window (exclusive).
    #[arg(long, default_value = "2015-03-01")]
    end: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument list with every default made explicit.
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_seconds: f64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    fn write(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self).expect("serializable") + "\n";
        write_file(path, body.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(format!("manifest {}: {e}", path.display())))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Network(_) => EXIT_NETWORK,
        _ => EXIT_DATA,
    }
}

/// Runs `f` on a pool of `workers` threads (all cores when `None`).
fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::Config(vec!["--workers must be at least 1".into()]));
        }
        b = b.num_threads(w);
    }
    let pool = b.build().map_err(|e| Error::Config(vec![format!("thread pool: {e}")]))?;
    Ok(pool.install(f))
}

fn arg_list(head: &[&str], pairs: &[(&str, String)], flags: &[(&str, bool)]) -> Vec<String> {
    let mut v: Vec<String> = head.iter().map(|s| s.to_string()).collect();
    for (k, val) in pairs {
        v.push(format!("--{k}"));
        v.push(val.clone());
    }
    for (k, on) in flags {
        if *on {
            v.push(format!("--{k}"));
        }
    }
    v
}

#[derive(Serialize)]
struct StatJson {
    value: f64,
    scaled: f64,
    p: f64,
}

#[derive(Serialize)]
struct ReportJson {
    n: usize,
    m: Option<usize>,
    grid: usize,
    #[serde(rename = "H")]
    h: usize,
    seed: u64,
    stats: serde_json::Map<String, serde_json::Value>,
    warnings: Vec<String>,
}

fn parse_stat_list(s: &str) -> Result<Vec<char>> {
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let c = match tok.to_ascii_lowercase().as_str() {
            "r" => 'r',
            "s" => 's',
            "t" => 't',
            other => return Err(Error::Config(vec![format!("unknown statistic '{other}' in --stats (r, s, t)")])),
        };
        if !out.contains(&c) {
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(Error::Config(vec!["--stats selects no statistic".into()]));
    }
    Ok(out)
}

fn report_json(res: &TestResult, stats: &[char]) -> String {
    let st = &res.statistics;
    let mut map = serde_json::Map::new();
    for &c in stats {
        let (value, scaled, p) = match c {
            'r' => (st.r, st.scaled_r, res.p_values.r),
            's' => (st.s, st.scaled_s, res.p_values.s),
            _ => (st.t, st.scaled_t, res.p_values.t),
        };
        map.insert(c.to_string(), serde_json::to_value(StatJson { value, scaled, p }).expect("finite"));
    }
    let r = ReportJson {
        n: res.n,
        m: res.m,
        grid: res.grid,
        h: res.h,
        seed: res.seed,
        stats: map,
        warnings: res.warnings.clone(),
    };
    serde_json::to_string_pretty(&r).expect("serializable") + "\n"
}

fn cmd_test(a: &TestArgs, out: &mut String) -> Result<()> {
    let stats = parse_stat_list(&a.stats)?;
    let mut usage = Vec::new();
    if a.grid < 2 {
        usage.push(format!("--grid must be at least 2, got {}", a.grid));
    }
    if a.h < 1 {
        usage.push("--H must be at least 1".to_string());
    }
    if a.m == Some(0) {
        usage.push("--m must be at least 1".to_string());
    }
    if a.empirical && a.m.is_some() {
        usage.push("--m has no meaning with --empirical".to_string());
    }
    if !usage.is_empty() {
        return Err(Error::Config(usage));
    }
    let start = Instant::now();
    let sample = Sample::read_csv_path(&a.input)?;
    let opts = TestOptions {
        grid: GridSpec::new(a.grid)?,
        replicates: a.h,
        seed: a.seed,
        rule: if a.plus_one { PValueRule::PlusOne } else { PValueRule::Plain },
    };
    let order = a.m.map(BernsteinOrder::new).transpose()?;
    let res = with_workers(a.workers, || {
        if a.empirical {
            run_test_empirical(&sample, &opts)
        } else {
            run_test(&sample, order, &opts)
        }
    })??;

    let json = report_json(&res, &stats);
    write_file(&a.out, json.as_bytes())?;

    let method = if a.empirical { "empirical copula" } else { "empirical Bernstein copula" };
    writeln!(out, "symmetry test ({method})").unwrap();
    match res.m {
        Some(m) => writeln!(out, "n = {}, m = {m}, grid = {}, H = {}, seed = {}", res.n, res.grid, res.h, res.seed),
        None => writeln!(out, "n = {}, grid = {}, H = {}, seed = {}", res.n, res.grid, res.h, res.seed),
    }
    .unwrap();
    writeln!(out, "{:<4} {:>14} {:>14} {:>8}", "stat", "value", "scaled", "p").unwrap();
    let st = &res.statistics;
    for &c in &stats {
        let (name, v, sc, p) = match c {
            'r' => ("R", st.r, st.scaled_r, res.p_values.r),
            's' => ("S", st.s, st.scaled_s, res.p_values.s),
            _ => ("T", st.t, st.scaled_t, res.p_values.t),
        };
        writeln!(out, "{name:<4} {v:>14.6e} {sc:>14.6} {p:>8.3}").unwrap();
    }
    for w in &res.warnings {
        writeln!(out, "warning: {w}").unwrap();
    }
    writeln!(out, "report written to {}", a.out.display()).unwrap();

    let mut pairs = vec![
        ("input", a.input.display().to_string()),
        ("grid", a.grid.to_string()),
        ("H", a.h.to_string()),
        ("seed", a.seed.to_string()),
        ("stats", stats.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")),
        ("out", a.out.display().to_string()),
    ];
    if let Some(m) = res.m {
        pairs.insert(1, ("m", m.to_string()));
    }
    let manifest = RunManifest {
        command: "test".into(),
        args: arg_list(&["test"], &pairs, &[("empirical", a.empirical), ("plus-one", a.plus_one)]),
        config: serde_json::json!({
            "input": a.input, "m": res.m, "grid": a.grid, "H": a.h, "seed": a.seed,
            "empirical": a.empirical, "stats": a.stats, "plus_one": a.plus_one,
        }),
        seed: Some(a.seed),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_seconds: start.elapsed().as_secs_f64(),
        outputs: vec![a.out.clone()],
    };
    manifest.write(&manifest_path(&a.out))
}

fn read_config(path: &Path) -> Result<StudyConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    StudyConfig::parse(&text)
}

fn cmd_simulate(a: &SimulateArgs, out: &mut String) -> Result<()> {
    let cfg = read_config(&a.config)?;
    let start = Instant::now();
    let report = with_workers(a.workers, || run_study(&cfg, &Checkpoint::in_dir(a.out.join("cells"))))??;
    let (csv, txt) = write_report(&report, &a.out)?;
    out.push_str(&report.to_table());
    writeln!(out, "wrote {} and {}", csv.display(), txt.display()).unwrap();
    let manifest = RunManifest {
        command: "simulate".into(),
        args: arg_list(
            &["simulate"],
            &[("config", a.config.display().to_string()), ("out", a.out.display().to_string())],
            &[],
        ),
        config: serde_json::to_value(&cfg).expect("serializable"),
        seed: Some(cfg.seed),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_seconds: start.elapsed().as_secs_f64(),
        outputs: vec![csv, txt],
    };
    manifest.write(&a.out.join("manifest.json"))
}

fn cmd_order_scan(a: &OrderScanArgs, out: &mut String) -> Result<()> {
    let cfg = read_config(&a.config)?;
    let start = Instant::now();
    let scan = with_workers(a.workers, || order_scan(&cfg, a.m_min..=a.m_max))??;
    let path = a.out.join("order_scan.csv");
    write_file(&path, scan.to_csv().as_bytes())?;
    out.push_str(&scan.to_csv());
    writeln!(out, "wrote {}", path.display()).unwrap();
    let manifest = RunManifest {
        command: "order-scan".into(),
        args: arg_list(
            &["order-scan"],
            &[
                ("config", a.config.display().to_string()),
                ("m-min", a.m_min.to_string()),
                ("m-max", a.m_max.to_string()),
                ("out", a.out.display().to_string()),
            ],
            &[],
        ),
        config: serde_json::to_value(&cfg).expect("serializable"),
        seed: Some(cfg.seed),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_seconds: start.elapsed().as_secs_f64(),
        outputs: vec![path],
    };
    manifest.write(&a.out.join("manifest.json"))
}

fn cmd_fetch(a: &FetchArgs, out: &mut String) -> Result<()> {
    let name = ndbc::archive_name(&a.station, a.year);
    let bytes = match &a.offline {
        Some(p) => std::fs::read(p).map_err(|e| Error::io(p, e))?,
        None => {
            let url = a.url.clone().unwrap_or_else(|| ndbc::archive_url(&a.station, a.year));
            ndbc::download_archive(&url)?
        }
    };
    let stored = ndbc::store_archive(&bytes, &a.out, &name)?;
    writeln!(
        out,
        "stored {} ({} bytes, sha256 {})",
        stored.path.display(),
        stored.bytes,
        stored.sha256
    )
    .unwrap();
    Ok(())
}

fn cmd_extract(a: &ExtractArgs, out: &mut String) -> Result<()> {
    let x: Variable = a.x.parse()?;
    let y: Variable = a.y.parse()?;
    let window = TimeWindow::from_dates(&a.start, &a.end)?;
    let mut parts = Vec::new();
    for p in &a.input {
        let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
        let parsed = ndbc::parse_ndbc_stdmet(&bytes)?;
        writeln!(
            out,
            "{}: {} records, {} malformed lines, {} duplicate timestamps",
            p.display(),
            parsed.records.len(),
            parsed.malformed,
            parsed.duplicates
        )
        .unwrap();
        parts.push(parsed.records);
    }
    let records = ndbc::merge_records(parts);
    let sample = ndbc::extract_pairs(&records, x, y, window)?;
    let mut buf = Vec::new();
    sample.write_csv(&mut buf, (x.name(), y.name()))?;
    write_file(&a.out, &buf)?;
    let rho = ndbc::spearman_rho(&sample).map_or_else(|e| e.to_string(), |r| format!("{r:.4}"));
    writeln!(
        out,
        "{} pairs ({}, {}) from {} to {}; spearman rho = {rho}; wrote {}",
        sample.len(),
        x.name(),
        y.name(),
        window.start,
        window.end,
        a.out.display()
    )
    .unwrap();
    Ok(())
}

fn dispatch(cmd: &Command, out: &mut String) -> Result<()> {
    match cmd {
        Command::Test(a) => cmd_test(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::OrderScan(a) => cmd_order_scan(a, out),
        Command::FetchNdbc(a) => cmd_fetch(a, out),
        Command::Extract(a) => cmd_extract(a, out),
        Command::Replay(a) => {
            let m = RunManifest::read(&a.manifest)?;
            let mut argv = vec!["copsym".to_string()];
            argv.extend(m.args.iter().cloned());
            let cli = Cli::try_parse_from(&argv)
                .map_err(|e| Error::Config(vec![format!("manifest arguments: {e}")]))?;
            if matches!(cli.command, Command::Replay(_)) {
                return Err(Error::Config(vec!["a manifest cannot replay another replay".into()]));
            }
            dispatch(&cli.command, out)
        }
    }
}

/// Runs the command line and returns `(exit code, stdout text, stderr text)`.
pub fn run_captured<I, T>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                (code, text, String::new())
            } else {
                (code, String::new(), text)
            };
        }
    };
    let mut out = String::new();
    match dispatch(&cli.command, &mut out) {
        Ok(()) => (EXIT_OK, out, String::new()),
        Err(e) => {
            let mut err = format!("error: {e}\n");
            if let Error::Config(v) = &e {
                err = String::from("error: invalid configuration\n");
                for x in v {
                    writeln!(err, "  - {x}").unwrap();
                }
            }
            (exit_code(&e), out, err)
        }
    }
}

/// Entry point used by the binary.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let (code, out, err) = run_captured(args);
    print!("{out}");
    eprint!("{err}");
    code
}
