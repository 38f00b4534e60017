//! Monte Carlo level and power studies.
//!
//! Repetitions run in parallel on the ambient rayon pool. Each repetition
//! seeds itself from `(master seed, cell key, repetition index)`, and results
//! are reduced in index order, so reports are byte-identical for any number
//! of workers.

mod config;
mod report;

use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{StatisticSet, StudyConfig, StudyKind};
pub use report::{OrderScan, ReportRow, ScanRow, StudyReport};

use crate::bernstein::BernsteinOrder;
use crate::bootstrap::{run_test, run_test_empirical, TestOptions};
use crate::copula::CopulaSpec;
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::stats::GridSpec;

/// Statistic labels in report order.
pub const STAT_NAMES: [&str; 6] = ["R_n", "R_nm", "S_n", "S_nm", "T_n", "T_nm"];

/// One `(copula, n, m)` cell of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub spec: CopulaSpec,
    pub n: usize,
    pub m: usize,
}

impl Cell {
    /// Seed key of the cell. It does not involve `m`, so every order
    /// applied to the same `(copula, n)` sees the same samples.
    pub fn seed_key(&self) -> u64 {
        let digest = Sha256::digest(format!("{}|n={}", self.spec, self.n).as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}

impl StudyConfig {
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for spec in &self.copulas {
            for (&n, &m) in self.n.iter().zip(&self.m) {
                out.push(Cell { spec: *spec, n, m });
            }
        }
        out
    }

    /// Hex SHA-256 of the canonical configuration text.
    pub fn fingerprint(&self) -> String {
        let d = Sha256::digest(self.to_text().as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn test_options(&self, seed: u64) -> Result<TestOptions> {
        Ok(TestOptions {
            grid: GridSpec::new(self.grid)?,
            replicates: self.h,
            seed,
            rule: self.p_rule,
        })
    }
}

/// Sample and multiplier seeds of one repetition.
fn repetition_streams(master: u64, cell: &Cell, rep: usize) -> (Stream, u64) {
    let s = Stream::new(master).path(&[cell.seed_key(), rep as u64]);
    (s.substream(0), s.substream(1).key())
}

/// Rejection flags in [`STAT_NAMES`] order for one repetition.
fn one_repetition(cfg: &StudyConfig, cell: &Cell, rep: usize, orders: &[usize]) -> Result<(Vec<[bool; 3]>, [bool; 3])> {
    let (sample_stream, boot_seed) = repetition_streams(cfg.seed, cell, rep);
    let sample = cell.spec.sample(cell.n, sample_stream)?;
    let opts = cfg.test_options(boot_seed)?;
    let reject = |p: [f64; 3]| p.map(|x| x <= cfg.alpha);
    let mut bern = Vec::with_capacity(orders.len());
    if cfg.statistics.bernstein() {
        for &m in orders {
            let res = run_test(&sample, Some(BernsteinOrder::new(m)?), &opts)?;
            bern.push(reject(res.p_values.as_array()));
        }
    }
    let emp = if cfg.statistics.empirical() {
        reject(run_test_empirical(&sample, &opts)?.p_values.as_array())
    } else {
        [false; 3]
    };
    Ok((bern, emp))
}

/// Rejection counts of one cell, `None` where a suite was not run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCounts {
    pub reps: usize,
    pub counts: [Option<usize>; 6],
}

fn run_cell(cfg: &StudyConfig, cell: &Cell) -> Result<CellCounts> {
    let outcomes: Vec<_> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| one_repetition(cfg, cell, rep, &[cell.m]))
        .collect::<Result<_>>()?;
    let mut counts = [None; 6];
    for (k, slot) in counts.iter_mut().enumerate() {
        let bern = k % 2 == 1;
        if (bern && cfg.statistics.bernstein()) || (!bern && cfg.statistics.empirical()) {
            let stat = k / 2;
            *slot = Some(
                outcomes
                    .iter()
                    .filter(|(b, e)| if bern { b[0][stat] } else { e[stat] })
                    .count(),
            );
        }
    }
    Ok(CellCounts {
        reps: cfg.repetitions,
        counts,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct PartialCell {
    fingerprint: String,
    cell: Cell,
    result: CellCounts,
}

/// Where finished cells are checkpointed so that an interrupted study resumes.
#[derive(Debug, Clone, Default)]
pub struct Checkpoint {
    pub dir: Option<PathBuf>,
}

impl Checkpoint {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()) }
    }

    fn path(&self, index: usize) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("cell-{index:04}.json")))
    }

    fn load(&self, index: usize, fingerprint: &str, cell: &Cell) -> Option<CellCounts> {
        let path = self.path(index)?;
        let text = std::fs::read_to_string(path).ok()?;
        let p: PartialCell = serde_json::from_str(&text).ok()?;
        (p.fingerprint == fingerprint && &p.cell == cell).then_some(p.result)
    }

    fn store(&self, index: usize, fingerprint: &str, cell: &Cell, result: &CellCounts) -> Result<()> {
        let Some(path) = self.path(index) else { return Ok(()) };
        let dir = path.parent().expect("checkpoint file has a parent");
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let body = serde_json::to_string(&PartialCell {
            fingerprint: fingerprint.to_string(),
            cell: cell.clone(),
            result: result.clone(),
        })
        .expect("serializable");
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, body).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}

/// Runs every cell of `cfg`, reusing checkpointed cells with a matching
/// configuration fingerprint.
pub fn run_study(cfg: &StudyConfig, checkpoint: &Checkpoint) -> Result<StudyReport> {
    cfg.validate()?;
    let start = Instant::now();
    let fp = cfg.fingerprint();
    let mut rows = Vec::new();
    for (index, cell) in cfg.cells().iter().enumerate() {
        let counts = match checkpoint.load(index, &fp, cell) {
            Some(c) => {
                log::info!("cell {index} ({} n={}) restored from checkpoint", cell.spec, cell.n);
                c
            }
            None => {
                let t = Instant::now();
                let c = run_cell(cfg, cell)?;
                checkpoint.store(index, &fp, cell, &c)?;
                log::info!("cell {index} ({} n={}) done in {:.1?}", cell.spec, cell.n, t.elapsed());
                c
            }
        };
        for (k, name) in STAT_NAMES.iter().enumerate() {
            if let Some(x) = counts.counts[k] {
                rows.push(ReportRow::new(cell, name, x, counts.reps, cfg));
            }
        }
    }
    Ok(StudyReport {
        rows,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Level study: every copula must be symmetric.
pub fn run_level_study(cfg: &StudyConfig) -> Result<StudyReport> {
    let asym: Vec<String> = cfg
        .copulas
        .iter()
        .filter(|c| c.khoudraji_delta.is_some())
        .map(|c| format!("level study requires symmetric copulas, got {c}"))
        .collect();
    if !asym.is_empty() {
        return Err(Error::Config(asym));
    }
    run_study(&StudyConfig { kind: StudyKind::Level, ..cfg.clone() }, &Checkpoint::default())
}

pub fn run_power_study(cfg: &StudyConfig) -> Result<StudyReport> {
    run_study(&StudyConfig { kind: StudyKind::Power, ..cfg.clone() }, &Checkpoint::default())
}

/// Power as a function of the Bernstein order for one copula and one `n`,
/// with the empirical-copula tests as `m`-free baselines.
pub fn order_scan(cfg: &StudyConfig, m_range: RangeInclusive<usize>) -> Result<OrderScan> {
    let mut errs = Vec::new();
    if m_range.is_empty() {
        errs.push(format!("empty m range {}..={}", m_range.start(), m_range.end()));
    }
    if *m_range.start() == 0 {
        errs.push("m range must start at 1 or above".to_string());
    }
    if cfg.copulas.len() != 1 {
        errs.push(format!("order scan needs exactly one copula, got {}", cfg.copulas.len()));
    }
    if cfg.n.len() != 1 {
        errs.push(format!("order scan needs exactly one n, got {}", cfg.n.len()));
    }
    let probe = StudyConfig {
        m: cfg.n.iter().map(|_| 1).collect(),
        kind: StudyKind::Power,
        ..cfg.clone()
    };
    errs.extend(probe.violations());
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let orders: Vec<usize> = m_range.collect();
    let cell = Cell {
        spec: cfg.copulas[0],
        n: cfg.n[0],
        m: orders[0],
    };
    let start = Instant::now();
    let outcomes: Vec<_> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| one_repetition(cfg, &cell, rep, &orders))
        .collect::<Result<_>>()?;
    let reps = cfg.repetitions;
    let mut rows = Vec::new();
    if cfg.statistics.bernstein() {
        for (j, &m) in orders.iter().enumerate() {
            for (stat, name) in ["R_nm", "S_nm", "T_nm"].iter().enumerate() {
                let k = outcomes.iter().filter(|(b, _)| b[j][stat]).count();
                rows.push(ScanRow::new(Some(m), name, k, reps));
            }
        }
    }
    if cfg.statistics.empirical() {
        for (stat, name) in ["R_n", "S_n", "T_n"].iter().enumerate() {
            let k = outcomes.iter().filter(|(_, e)| e[stat]).count();
            rows.push(ScanRow::new(None, name, k, reps));
        }
    }
    Ok(OrderScan {
        rows,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Writes the CSV and aligned-text forms of a report into `dir`.
pub fn write_report(report: &StudyReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("report.csv");
    let txt = dir.join("report.txt");
    std::fs::write(&csv, report.to_csv()).map_err(|e| Error::io(&csv, e))?;
    std::fs::write(&txt, report.to_table()).map_err(|e| Error::io(&txt, e))?;
    Ok((csv, txt))
}
