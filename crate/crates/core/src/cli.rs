//! Command-line front end: `trace`, `compare`, `sweep`, `qd-stats`, `preset`.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::link::{evaluate_links, read_link_csv, write_link_csv, LinkSample};
use crate::metrics::{self, nrmse, speedup, TimeSeries, DEFAULT_NS_RUNS, NRMSE_ACCEPTABLE, OUTAGE_FLOOR_DB};
use crate::qd::{qd_stats, MaterialTable, MpcKind, QdMaterialParams};
use crate::raytracer::OpCounter;
use crate::rng::StreamKey;
use crate::presets;
use crate::scenario::{self, with_jobs, ChannelInstance, Scenario, ScenarioConfig};
use crate::trace::write_trace;

#[derive(Parser, Debug)]
#[command(name = "qdtrace", version, about = "mmWave ray tracer with quasi-deterministic diffuse components")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Trace a scenario and write trace.txt, sinr.csv and manifest.json.
    Trace(TraceArgs),
    /// Compare a simplified run against a baseline run.
    Compare(CompareArgs),
    /// Sweep (R, gamma_th) and emit one (speedup, NRMSE) row per cell.
    Sweep(SweepArgs),
    /// Check diffuse-component statistics against their analytic values.
    QdStats(QdStatsArgs),
    /// Write a built-in scenario (indoor1, l_room, courtyard) to a directory.
    Preset(PresetArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args, Debug, Clone)]
struct Overrides {
    /// Maximum reflection order R.
    #[arg(long)]
    max_reflections: Option<usize>,
    /// Relative threshold gamma_th in dB, or -inf.
    #[arg(long, allow_hyphen_values = true)]
    rel_threshold_db: Option<f64>,
    /// Absolute threshold Gamma_th in dB.
    #[arg(long, allow_hyphen_values = true)]
    abs_threshold_db: Option<f64>,
    /// Diffuse components.
    #[arg(long)]
    qd: Option<OnOff>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of timesteps.
    #[arg(long)]
    steps: Option<usize>,
    /// Apply the thresholds after the obstruction phase instead of before.
    #[arg(long)]
    threshold_after_obstruction: bool,
    /// Keep diffuse components below the thresholds.
    #[arg(long)]
    no_post_qd_filter: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(r) = self.max_reflections {
            cfg.max_reflections = r;
        }
        if let Some(g) = self.rel_threshold_db {
            cfg.rel_threshold_db = g;
        }
        if let Some(g) = self.abs_threshold_db {
            cfg.abs_threshold_db = g;
        }
        if let Some(q) = self.qd {
            cfg.qd = q == OnOff::On;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.steps {
            cfg.steps = t;
        }
        cfg.threshold_after_obstruction |= self.threshold_after_obstruction;
        if self.no_post_qd_filter {
            cfg.post_qd_filter = false;
        }
    }
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also write per-instance operation counters to counters.csv.
    #[arg(long)]
    emit_counters: bool,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    Sinr,
    Snr,
}

impl Metric {
    fn pick(self, s: &LinkSample) -> f64 {
        match self {
            Metric::Sinr => s.sinr_db,
            Metric::Snr => s.snr_db,
        }
    }
}

/// Columns of report.csv: rx_id, nrmse, speedup, rays_baseline,
/// rays_simplified, checks_saved, outage_floor_db, acceptable
/// (nrmse <= 0.05). Outage samples are set to the floor before comparing;
/// standard deviations are population deviations.
#[derive(Args, Debug)]
struct CompareArgs {
    /// Output directory of the baseline `trace` run.
    #[arg(long)]
    baseline: PathBuf,
    /// Output directory of the simplified `trace` run.
    #[arg(long)]
    simplified: PathBuf,
    #[arg(long, value_enum, default_value = "sinr")]
    metric: Metric,
    #[arg(long)]
    out: PathBuf,
}

/// Columns of the sweep CSV: max_reflections, rel_threshold_db, speedup,
/// nrmse, rays, rays_baseline, checks_saved, t_rt_s, t_ns_s, baseline.
#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Grid such as "R=1..4,gamma=-inf,-40,-25,-15".
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    /// Absolute threshold shared by every cell and the baseline [dB].
    #[arg(long, allow_hyphen_values = true, default_value_t = -1000.0)]
    abs_threshold_db: f64,
    #[arg(long)]
    qd: Option<OnOff>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Timing repeats per cell; the fastest is kept.
    #[arg(long, default_value_t = 3)]
    repeat: usize,
    #[arg(long, value_enum, default_value = "sinr")]
    metric: Metric,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct QdStatsArgs {
    /// Number of single-bounce clusters to draw (>= 1000).
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Material file; the placeholder parameters are used without it.
    #[arg(long)]
    materials: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    material: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct PresetArgs {
    name: String,
    #[arg(long)]
    out: PathBuf,
}

/// Summary written next to every trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    pub config_digest: String,
    pub seed: u64,
    pub max_reflections: usize,
    /// Text form so that `-inf` survives JSON.
    pub rel_threshold_db: String,
    pub abs_threshold_db: f64,
    pub qd: bool,
    pub steps: usize,
    pub instances: usize,
    pub totals: Totals,
    /// Ray-tracing wall time [s].
    pub t_rt_s: f64,
    /// Channel assembly and SINR evaluation wall time [s].
    pub t_ns_s: f64,
    pub host: Host,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub rays: u64,
    pub mpcs: u64,
    pub outage_samples: u64,
    pub tuples_visited: u64,
    pub geometric_ops: u64,
    pub obstruction_checks: u64,
    pub check_budget: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Host {
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

impl Host {
    fn current() -> Self {
        Host {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

/// Instances and link samples of one run, with the two wall-time phases.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub instances: Vec<ChannelInstance>,
    pub samples: Vec<LinkSample>,
    pub t_rt_s: f64,
    pub t_ns_s: f64,
}

impl RunOutput {
    pub fn totals(&self) -> Totals {
        let mut c = OpCounter::default();
        let mut t = Totals::default();
        for i in &self.instances {
            c.merge(&i.counters);
            t.mpcs += i.mpcs.len() as u64;
            t.rays += i.mpcs.iter().filter(|m| m.kind == MpcKind::MainCursor).count() as u64;
        }
        t.outage_samples = self.samples.iter().filter(|s| s.is_outage()).count() as u64;
        t.tuples_visited = c.tuples_visited;
        t.geometric_ops = c.geometric_ops;
        t.obstruction_checks = c.obstruction_checks;
        t.check_budget = c.check_budget;
        t
    }
}

/// Traces the scenario and evaluates every link, timing both phases.
pub fn execute(scn: &Scenario, jobs: usize) -> crate::Result<RunOutput> {
    let start = Instant::now();
    let instances = scenario::run(scn, jobs)?;
    let t_rt_s = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let samples = with_jobs(jobs, || evaluate_links(&scn.config, &instances))??;
    let t_ns_s = start.elapsed().as_secs_f64();
    Ok(RunOutput { instances, samples, t_rt_s, t_ns_s })
}

fn manifest(scn: &Scenario, out: &RunOutput) -> RunManifest {
    let c = &scn.config;
    RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: c.name.clone(),
        config_digest: scn.digest(),
        seed: c.seed,
        max_reflections: c.max_reflections,
        rel_threshold_db: c.rel_threshold_db.to_string(),
        abs_threshold_db: c.abs_threshold_db,
        qd: c.qd,
        steps: c.steps,
        instances: out.instances.len(),
        totals: out.totals(),
        t_rt_s: out.t_rt_s,
        t_ns_s: out.t_ns_s,
        host: Host::current(),
    }
}

/// Writes every file to a temporary name first and renames them only once
/// all of them are complete.
struct StagedFiles {
    dir: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
}

impl StagedFiles {
    fn new(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(StagedFiles { dir: dir.to_path_buf(), staged: Vec::new() })
    }

    fn write(&mut self, name: &str, fill: impl FnOnce(&mut dyn Write) -> crate::Result<()>) -> anyhow::Result<()> {
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let file = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        let mut w = std::io::BufWriter::new(file);
        self.staged.push((tmp.clone(), self.dir.join(name)));
        fill(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn commit(mut self) -> anyhow::Result<()> {
        for (tmp, dst) in std::mem::take(&mut self.staged) {
            fs::rename(&tmp, &dst).with_context(|| format!("renaming to {}", dst.display()))?;
        }
        Ok(())
    }
}

impl Drop for StagedFiles {
    fn drop(&mut self) {
        for (tmp, _) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
    }
}

fn load_scenario(path: &Path, overrides: &Overrides) -> anyhow::Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = ScenarioConfig::from_toml(&text)?;
    overrides.apply(&mut cfg);
    Ok(Scenario::load_with(path, cfg)?)
}

pub const COUNTERS_CSV_HEADER: &str =
    "timestep,tx_id,rx_id,n_mpcs,tuples_visited,geometric_ops,obstruction_checks,paths_checked,check_budget,wall_time_ns";

fn write_counters(w: &mut dyn Write, instances: &[ChannelInstance]) -> crate::Result<()> {
    writeln!(w, "{COUNTERS_CSV_HEADER}")?;
    for i in instances {
        let c = &i.counters;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            i.timestep,
            i.tx_id,
            i.rx_id,
            i.mpcs.len(),
            c.tuples_visited,
            c.geometric_ops,
            c.obstruction_checks,
            c.paths_checked,
            c.check_budget,
            i.wall_time_ns
        )?;
    }
    Ok(())
}

fn cmd_trace(a: &TraceArgs) -> anyhow::Result<()> {
    let scn = load_scenario(&a.scenario, &a.overrides)?;
    let out = execute(&scn, a.jobs)?;
    let m = manifest(&scn, &out);
    let mut files = StagedFiles::new(&a.out)?;
    files.write("trace.txt", |w| write_trace(w, &m.config_digest, &out.instances))?;
    files.write("sinr.csv", |w| write_link_csv(w, &out.samples))?;
    if a.emit_counters {
        files.write("counters.csv", |w| write_counters(w, &out.instances))?;
    }
    files.write("manifest.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &m).map_err(std::io::Error::from)?;
        writeln!(w)?;
        Ok(())
    })?;
    files.commit()?;
    println!(
        "{} instances, {} rays, {} MPCs, T_RT {:.3} s, T_ns {:.3} s -> {}",
        m.instances,
        m.totals.rays,
        m.totals.mpcs,
        m.t_rt_s,
        m.t_ns_s,
        a.out.display()
    );
    Ok(())
}

fn read_run(dir: &Path) -> anyhow::Result<(RunManifest, Vec<LinkSample>)> {
    let mpath = dir.join("manifest.json");
    let m: RunManifest = serde_json::from_reader(BufReader::new(
        fs::File::open(&mpath).with_context(|| format!("opening {}", mpath.display()))?,
    ))
    .with_context(|| format!("parsing {}", mpath.display()))?;
    let spath = dir.join("sinr.csv");
    let samples = read_link_csv(BufReader::new(
        fs::File::open(&spath).with_context(|| format!("opening {}", spath.display()))?,
    ))
    .with_context(|| format!("parsing {}", spath.display()))?;
    Ok((m, samples))
}

fn receivers(samples: &[LinkSample]) -> Vec<String> {
    let mut ids: Vec<String> = Vec::new();
    for s in samples {
        if !ids.contains(&s.rx_id) {
            ids.push(s.rx_id.clone());
        }
    }
    ids
}

/// Time series of `metric` for one receiver with outages at the floor.
pub(crate) fn series_for(samples: &[LinkSample], rx: &str, metric: impl Fn(&LinkSample) -> f64) -> crate::Result<TimeSeries> {
    let (t, v) = samples
        .iter()
        .filter(|s| s.rx_id == rx)
        .map(|s| (s.time_s, metric(s)))
        .unzip();
    Ok(TimeSeries::new(t, v)?.with_outage_floor(OUTAGE_FLOOR_DB))
}

fn compare_series(base: &[LinkSample], simp: &[LinkSample], rx: &str, metric: Metric) -> anyhow::Result<f64> {
    let b = series_for(base, rx, |s| metric.pick(s))?;
    let s = series_for(simp, rx, |s| metric.pick(s))?;
    if b.t() != s.t() {
        bail!("time grid mismatch for {rx}: {} baseline vs {} simplified samples", b.len(), s.len());
    }
    Ok(nrmse(&s, &b)?)
}

fn cmd_compare(a: &CompareArgs) -> anyhow::Result<()> {
    let (mb, sb) = read_run(&a.baseline)?;
    let (ms, ss) = read_run(&a.simplified)?;
    let rxs = receivers(&sb);
    if rxs != receivers(&ss) {
        bail!("receiver sets differ between runs");
    }
    let sp = speedup(mb.t_rt_s, mb.t_ns_s, ms.t_rt_s, ms.t_ns_s, DEFAULT_NS_RUNS);
    let mut rows = Vec::new();
    for rx in &rxs {
        let e = compare_series(&sb, &ss, rx, a.metric)?;
        rows.push(metrics::ComparisonReport {
            nrmse: e,
            speedup: sp,
            rays_baseline: mb.totals.rays,
            rays_simplified: ms.totals.rays,
            checks_saved: mb.totals.obstruction_checks as i64 - ms.totals.obstruction_checks as i64,
            outage_floor_db: OUTAGE_FLOOR_DB,
        });
    }
    let mut files = StagedFiles::new(a.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")))?;
    let name = a.out.file_name().ok_or_else(|| anyhow!("--out needs a file name"))?.to_string_lossy().into_owned();
    files.write(&name, |w| {
        writeln!(w, "rx_id,nrmse,speedup,rays_baseline,rays_simplified,checks_saved,outage_floor_db,acceptable")?;
        for (rx, r) in rxs.iter().zip(&rows) {
            writeln!(
                w,
                "{rx},{:?},{:?},{},{},{},{:?},{}",
                r.nrmse,
                r.speedup,
                r.rays_baseline,
                r.rays_simplified,
                r.checks_saved,
                r.outage_floor_db,
                r.nrmse <= NRMSE_ACCEPTABLE
            )?;
        }
        Ok(())
    })?;
    files.commit()?;
    for (rx, r) in rxs.iter().zip(&rows) {
        println!("{rx}: NRMSE {:.4}, speedup {:.3}", r.nrmse, r.speedup);
    }
    Ok(())
}

/// Parsed `--grid` value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub max_reflections: Vec<usize>,
    pub rel_thresholds_db: Vec<f64>,
}

/// Parses `R=1..4,gamma=-inf,-40` style grids. `R` takes an inclusive
/// range or a list; `gamma` a list of dB values.
pub fn parse_grid(grid: &str) -> crate::Result<SweepGrid> {
    let bad = |m: String| crate::Error::Config(format!("grid: {m}"));
    let mut r = Vec::new();
    let mut g = Vec::new();
    let mut key: Option<String> = None;
    for tok in grid.split(',').map(str::trim) {
        let value = match tok.split_once('=') {
            Some((k, v)) => {
                key = Some(k.trim().to_string());
                v.trim()
            }
            None => tok,
        };
        match key.as_deref() {
            Some("R") => {
                if let Some((lo, hi)) = value.split_once("..") {
                    let lo: usize = lo.parse().map_err(|_| bad(format!("bad R range {value}")))?;
                    let hi: usize = hi.parse().map_err(|_| bad(format!("bad R range {value}")))?;
                    if lo > hi {
                        return Err(bad(format!("empty R range {value}")));
                    }
                    r.extend(lo..=hi);
                } else {
                    r.push(value.parse().map_err(|_| bad(format!("bad R {value}")))?);
                }
            }
            Some("gamma") => {
                let v: f64 = value.parse().map_err(|_| bad(format!("bad gamma {value}")))?;
                if v.is_nan() || v == f64::INFINITY {
                    return Err(bad(format!("bad gamma {value}")));
                }
                g.push(v);
            }
            Some(k) => return Err(bad(format!("unknown key {k}"))),
            None => return Err(bad(format!("value {value} before any key"))),
        }
    }
    if r.is_empty() || g.is_empty() {
        return Err(bad("needs both R and gamma values".into()));
    }
    Ok(SweepGrid { max_reflections: r, rel_thresholds_db: g })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub max_reflections: usize,
    pub rel_threshold_db: f64,
    pub speedup: f64,
    pub nrmse: f64,
    pub rays: u64,
    pub rays_baseline: u64,
    pub checks_saved: i64,
    pub t_rt_s: f64,
    pub t_ns_s: f64,
    pub baseline: bool,
}

fn timed_runs(scn: &Scenario, repeat: usize, jobs: usize) -> crate::Result<RunOutput> {
    let mut best = execute(scn, jobs)?;
    for _ in 1..repeat {
        let o = execute(scn, jobs)?;
        best.t_rt_s = best.t_rt_s.min(o.t_rt_s);
        best.t_ns_s = best.t_ns_s.min(o.t_ns_s);
    }
    Ok(best)
}

/// Runs the baseline (largest R, gamma_th = -inf) and every grid cell on
/// the reference receiver's series.
pub fn sweep(scn: &Scenario, grid: &SweepGrid, repeat: usize, jobs: usize, use_snr: bool) -> crate::Result<Vec<SweepRow>> {
    let base_cfg = &scn.config;
    let pick = |s: &LinkSample| if use_snr { s.snr_db } else { s.sinr_db };
    let with = |r: usize, g: f64| -> crate::Result<Scenario> {
        let mut c = base_cfg.clone();
        c.max_reflections = r;
        c.rel_threshold_db = g;
        Scenario::new(c, scn.mesh.clone(), scn.materials.clone())
    };
    let r_max = *grid.max_reflections.iter().max().expect("non-empty grid");
    let base = timed_runs(&with(r_max, f64::NEG_INFINITY)?, repeat.max(1), jobs)?;
    let base_totals = base.totals();
    let reference = base_cfg
        .nodes
        .iter()
        .find(|n| !n.kind.is_tx())
        .map(|n| n.id.clone())
        .expect("validated scenario has a receiver");
    let base_series = series_for(&base.samples, &reference, pick)?;
    let mut rows = Vec::new();
    for &r in &grid.max_reflections {
        for &g in &grid.rel_thresholds_db {
            let is_base = r == r_max && g == f64::NEG_INFINITY;
            let out = if is_base { base.clone() } else { timed_runs(&with(r, g)?, repeat.max(1), jobs)? };
            let totals = out.totals();
            let s = series_for(&out.samples, &reference, pick)?;
            rows.push(SweepRow {
                max_reflections: r,
                rel_threshold_db: g,
                speedup: speedup(base.t_rt_s, base.t_ns_s, out.t_rt_s, out.t_ns_s, DEFAULT_NS_RUNS),
                nrmse: nrmse(&s, &base_series)?,
                rays: totals.rays,
                rays_baseline: base_totals.rays,
                checks_saved: base_totals.obstruction_checks as i64 - totals.obstruction_checks as i64,
                t_rt_s: out.t_rt_s,
                t_ns_s: out.t_ns_s,
                baseline: is_base,
            });
        }
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str =
    "max_reflections,rel_threshold_db,speedup,nrmse,rays,rays_baseline,checks_saved,t_rt_s,t_ns_s,baseline";

pub fn write_sweep_csv(w: &mut dyn Write, rows: &[SweepRow]) -> crate::Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:?},{:?},{},{},{},{:?},{:?},{}",
            r.max_reflections,
            r.rel_threshold_db,
            r.speedup,
            r.nrmse,
            r.rays,
            r.rays_baseline,
            r.checks_saved,
            r.t_rt_s,
            r.t_ns_s,
            r.baseline
        )?;
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> anyhow::Result<()> {
    let grid = parse_grid(&a.grid)?;
    let overrides = Overrides {
        max_reflections: None,
        rel_threshold_db: None,
        abs_threshold_db: Some(a.abs_threshold_db),
        qd: a.qd,
        seed: a.seed,
        steps: a.steps,
        threshold_after_obstruction: false,
        no_post_qd_filter: false,
    };
    let scn = load_scenario(&a.scenario, &overrides)?;
    let rows = sweep(&scn, &grid, a.repeat, a.jobs, a.metric == Metric::Snr)?;
    let dir = a.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = a.out.file_name().ok_or_else(|| anyhow!("--out needs a file name"))?.to_string_lossy().into_owned();
    let mut files = StagedFiles::new(dir)?;
    files.write(&name, |w| write_sweep_csv(w, &rows))?;
    files.commit()?;
    for r in &rows {
        println!(
            "R={} gamma={}: speedup {:.3}, NRMSE {:.4}",
            r.max_reflections, r.rel_threshold_db, r.speedup, r.nrmse
        );
    }
    Ok(())
}

fn cmd_qd_stats(a: &QdStatsArgs) -> anyhow::Result<()> {
    let params: QdMaterialParams = match &a.materials {
        Some(p) => MaterialTable::load(p)?
            .get(a.material)
            .cloned()
            .ok_or_else(|| anyhow!("material {} not in {}", a.material, p.display()))?,
        None => QdMaterialParams::placeholder(),
    };
    let mut rng = StreamKey::new(a.seed).with("qd-stats").stream();
    let report = qd_stats(a.samples, &params, &mut rng)?;
    println!("check,empirical,analytic,tolerance,pass");
    for c in &report.checks {
        println!("{},{:e},{:e},{:e},{}", c.name, c.empirical, c.analytic, c.tolerance, c.pass);
    }
    Ok(())
}

fn cmd_preset(a: &PresetArgs) -> anyhow::Result<()> {
    let p = presets::by_name(&a.name)?;
    let path = p.write_to(&a.out)?;
    println!("{}", path.display());
    Ok(())
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code: 0 on success, 2 on usage errors, 1 otherwise.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Trace(a) => cmd_trace(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::QdStats(a) => cmd_qd_stats(a),
        Command::Preset(a) => cmd_preset(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("R=1..4,gamma=-inf,-40,-25,-15").unwrap();
        assert_eq!(g.max_reflections, vec![1, 2, 3, 4]);
        assert_eq!(g.rel_thresholds_db, vec![f64::NEG_INFINITY, -40.0, -25.0, -15.0]);
        assert_eq!(parse_grid("R=2,3,gamma=-10").unwrap().max_reflections, vec![2, 3]);
        assert!(parse_grid("R=1..4").is_err());
        assert!(parse_grid("R=4..1,gamma=-3").is_err());
        assert!(parse_grid("Q=1,gamma=-3").is_err());
        assert!(parse_grid("gamma=nan,R=1").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["qdtrace", "trace", "--bogus"]), 2);
        assert_eq!(run(["qdtrace"]), 2);
        assert_eq!(run(["qdtrace", "--help"]), 0);
    }
}
