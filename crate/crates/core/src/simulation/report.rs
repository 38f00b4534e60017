use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{Cell, StudyConfig, STAT_NAMES};

/// Monte Carlo standard error of a rejection percentage.
pub fn se_pct(k: usize, reps: usize) -> f64 {
    let p = k as f64 / reps as f64;
    100.0 * (p * (1.0 - p) / reps as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub family: String,
    pub delta: Option<f64>,
    pub tau: Option<f64>,
    pub n: usize,
    pub m: usize,
    pub stat: String,
    pub rejections: usize,
    pub estimate_pct: f64,
    pub se_pct: f64,
    pub reps: usize,
    pub h: usize,
    pub seed: u64,
}

impl ReportRow {
    pub(super) fn new(cell: &Cell, stat: &str, k: usize, reps: usize, cfg: &StudyConfig) -> Self {
        let family = match cell.spec.family {
            crate::CopulaFamily::Student { nu } => format!("student(nu={nu})"),
            f => f.name().to_string(),
        };
        Self {
            family,
            delta: cell.spec.khoudraji_delta,
            tau: cell.spec.tau,
            n: cell.n,
            m: cell.m,
            stat: stat.to_string(),
            rejections: k,
            estimate_pct: 100.0 * k as f64 / reps as f64,
            se_pct: se_pct(k, reps),
            reps,
            h: cfg.h,
            seed: cfg.seed,
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{v}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub rows: Vec<ReportRow>,
    pub wall_seconds: f64,
}

impl StudyReport {
    pub fn row(&self, stat: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.stat == stat)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("family,delta,tau,n,m,stat,estimate_pct,se_pct,reps,H,seed\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{},{:.2},{:.2},{},{},{}",
                r.family,
                opt(r.delta),
                opt(r.tau),
                r.n,
                r.m,
                r.stat,
                r.estimate_pct,
                r.se_pct,
                r.reps,
                r.h,
                r.seed
            )
            .unwrap();
        }
        s
    }

    /// One line per cell with the six statistics as columns, percentages
    /// with the standard error in parentheses.
    pub fn to_table(&self) -> String {
        let mut keys: Vec<(String, String, String, usize, usize)> = Vec::new();
        for r in &self.rows {
            let k = (r.family.clone(), opt(r.delta), opt(r.tau), r.n, r.m);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let stats: Vec<&str> = STAT_NAMES
            .iter()
            .copied()
            .filter(|s| self.rows.iter().any(|r| r.stat == *s))
            .collect();
        let mut s = format!("{:<18} {:>6} {:>6} {:>5} {:>4}", "copula", "delta", "tau", "n", "m");
        for st in &stats {
            write!(s, " {st:>13}").unwrap();
        }
        s.push('\n');
        for k in keys {
            write!(s, "{:<18} {:>6} {:>6} {:>5} {:>4}", k.0, k.1, k.2, k.3, k.4).unwrap();
            for st in &stats {
                let cell = self.rows.iter().find(|r| {
                    r.stat == *st && r.family == k.0 && opt(r.delta) == k.1 && opt(r.tau) == k.2 && r.n == k.3 && r.m == k.4
                });
                match cell {
                    Some(r) => write!(s, " {:>13}", format!("{:.1} ({:.1})", r.estimate_pct, r.se_pct)).unwrap(),
                    None => write!(s, " {:>13}", "-").unwrap(),
                }
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    /// `None` for the empirical-copula baselines.
    pub m: Option<usize>,
    pub stat: String,
    pub rejections: usize,
    pub power_pct: f64,
    pub se_pct: f64,
}

impl ScanRow {
    pub(super) fn new(m: Option<usize>, stat: &str, k: usize, reps: usize) -> Self {
        Self {
            m,
            stat: stat.to_string(),
            rejections: k,
            power_pct: 100.0 * k as f64 / reps as f64,
            se_pct: se_pct(k, reps),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderScan {
    pub rows: Vec<ScanRow>,
    pub wall_seconds: f64,
}

impl OrderScan {
    pub fn curve(&self, stat: &str) -> Vec<(usize, f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.stat == stat)
            .filter_map(|r| r.m.map(|m| (m, r.power_pct, r.se_pct)))
            .collect()
    }

    pub fn baseline(&self, stat: &str) -> Option<&ScanRow> {
        self.rows.iter().find(|r| r.stat == stat && r.m.is_none())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,stat,power_pct,se_pct\n");
        for r in &self.rows {
            let m = r.m.map_or_else(|| "NA".to_string(), |m| m.to_string());
            writeln!(s, "{m},{},{:.2},{:.2}", r.stat, r.power_pct, r.se_pct).unwrap();
        }
        s
    }
}
