use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bootstrap::PValueRule;
use crate::copula::{parse_family, CopulaFamily, CopulaSpec, DEFAULT_STUDENT_NU};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Level,
    Power,
}

/// Which test suites a study runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatisticSet {
    Bernstein,
    Empirical,
    Both,
}

impl StatisticSet {
    pub fn bernstein(self) -> bool {
        self != StatisticSet::Empirical
    }

    pub fn empirical(self) -> bool {
        self != StatisticSet::Bernstein
    }
}

impl FromStr for StatisticSet {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "bernstein" => Ok(StatisticSet::Bernstein),
            "empirical" => Ok(StatisticSet::Empirical),
            "both" => Ok(StatisticSet::Both),
            other => Err(format!("unknown statistic set '{other}' (bernstein, empirical, both)")),
        }
    }
}

impl fmt::Display for StatisticSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StatisticSet::Bernstein => "bernstein",
            StatisticSet::Empirical => "empirical",
            StatisticSet::Both => "both",
        })
    }
}

/// A declarative Monte Carlo experiment.
///
/// The copulas are either listed explicitly (`copulas`) or formed as the
/// product `families x tau x delta`. Every copula is crossed with every
/// `(n, m)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub copulas: Vec<CopulaSpec>,
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub repetitions: usize,
    #[serde(rename = "H")]
    pub h: usize,
    pub grid: usize,
    pub alpha: f64,
    pub seed: u64,
    pub statistics: StatisticSet,
    pub p_rule: PValueRule,
}

impl StudyConfig {
    pub fn new(kind: StudyKind, copulas: Vec<CopulaSpec>, n: Vec<usize>, m: Vec<usize>) -> Self {
        Self {
            kind,
            copulas,
            n,
            m,
            repetitions: 500,
            h: 200,
            grid: 20,
            alpha: 0.05,
            seed: 1,
            statistics: StatisticSet::Both,
            p_rule: PValueRule::Plain,
        }
    }

    /// Every rule the configuration breaks.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.copulas.is_empty() {
            v.push("no copulas specified".to_string());
        }
        if self.n.is_empty() {
            v.push("n list is empty".to_string());
        }
        if self.n.len() != self.m.len() {
            v.push(format!(
                "n and m lists must have equal length ({} vs {})",
                self.n.len(),
                self.m.len()
            ));
        }
        if let Some(n) = self.n.iter().find(|&&n| n < crate::bootstrap::MIN_SAMPLE_SIZE) {
            v.push(format!("n = {n} is below the minimum of {}", crate::bootstrap::MIN_SAMPLE_SIZE));
        }
        if self.m.contains(&0) {
            v.push("m must be at least 1".to_string());
        }
        if self.repetitions < 1 {
            v.push("repetitions must be at least 1".to_string());
        }
        if self.h < 1 {
            v.push("H must be at least 1".to_string());
        }
        if self.grid < 2 {
            v.push("grid must be at least 2".to_string());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            v.push(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.kind == StudyKind::Level {
            for c in self.copulas.iter().filter(|c| c.khoudraji_delta.is_some()) {
                v.push(format!("level study requires symmetric copulas, got {c}"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Parses the `key = value` format; `#` starts a comment. Every problem
    /// in the file is reported at once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut errs = Vec::new();
        let mut map: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some((k, val)) => {
                    let key = k.trim().to_ascii_lowercase().replace('-', "_");
                    if map.insert(key.clone(), (no + 1, val.trim().to_string())).is_some() {
                        errs.push(format!("line {}: duplicate key '{key}'", no + 1));
                    }
                }
                None => errs.push(format!("line {}: expected 'key = value', got '{line}'", no + 1)),
            }
        }

        let mut take = |key: &str| map.remove(key);
        let list = |s: &str| -> Vec<String> {
            s.split([',', ';'])
                .map(|x| x.trim().to_string())
                .filter(|x| !x.is_empty())
                .collect()
        };
        fn num<T: FromStr>(errs: &mut Vec<String>, key: &str, line: usize, s: &str) -> Option<T> {
            match s.trim().parse::<T>() {
                Ok(x) => Some(x),
                Err(_) => {
                    errs.push(format!("line {line}: cannot parse {key} value '{s}'"));
                    None
                }
            }
        }

        let kind = match take("kind").or_else(|| take("study")) {
            None => StudyKind::Power,
            Some((line, s)) => match s.to_ascii_lowercase().as_str() {
                "level" => StudyKind::Level,
                "power" => StudyKind::Power,
                _ => {
                    errs.push(format!("line {line}: kind must be 'level' or 'power', got '{s}'"));
                    StudyKind::Power
                }
            },
        };

        let nu = match take("nu") {
            Some((line, s)) => num::<f64>(&mut errs, "nu", line, &s).unwrap_or(DEFAULT_STUDENT_NU),
            None => DEFAULT_STUDENT_NU,
        };

        let mut copulas = Vec::new();
        let explicit = take("copulas");
        let families = take("families").or_else(|| take("family"));
        let taus = take("tau");
        let deltas = take("delta");
        if let Some((line, s)) = explicit {
            if families.is_some() || taus.is_some() || deltas.is_some() {
                errs.push(format!("line {line}: 'copulas' cannot be combined with families/tau/delta"));
            }
            for tok in list(&s) {
                match tok.parse::<CopulaSpec>() {
                    Ok(c) => copulas.push(c),
                    Err(e) => errs.push(format!("line {line}: copula '{tok}': {e}")),
                }
            }
        } else {
            let fams: Vec<CopulaFamily> = match &families {
                Some((line, s)) => list(s)
                    .iter()
                    .filter_map(|f| match parse_family(f, None) {
                        Ok(CopulaFamily::Student { .. }) => Some(CopulaFamily::Student { nu }),
                        Ok(f) => Some(f),
                        Err(e) => {
                            errs.push(format!("line {line}: {e}"));
                            None
                        }
                    })
                    .collect(),
                None => {
                    errs.push("missing 'families' (or 'copulas')".to_string());
                    Vec::new()
                }
            };
            let tau_list: Vec<f64> = match &taus {
                Some((line, s)) => list(s).iter().filter_map(|t| num(&mut errs, "tau", *line, t)).collect(),
                None => {
                    errs.push("missing 'tau'".to_string());
                    Vec::new()
                }
            };
            let delta_list: Vec<Option<f64>> = match &deltas {
                Some((line, s)) => list(s)
                    .iter()
                    .filter_map(|d| {
                        if d.eq_ignore_ascii_case("none") || d.eq_ignore_ascii_case("na") {
                            Some(None)
                        } else {
                            num(&mut errs, "delta", *line, d).map(Some)
                        }
                    })
                    .collect(),
                None => vec![None],
            };
            for &f in &fams {
                for &d in &delta_list {
                    for &t in &tau_list {
                        match CopulaSpec::from_tau(f, t, d) {
                            Ok(c) => copulas.push(c),
                            Err(e) => errs.push(format!("{} tau={t}: {e}", f.name())),
                        }
                    }
                }
            }
        }

        let usize_list = |errs: &mut Vec<String>, key: &str, v: Option<(usize, String)>| -> Vec<usize> {
            match v {
                Some((line, s)) => list(&s).iter().filter_map(|x| num(errs, key, line, x)).collect(),
                None => {
                    errs.push(format!("missing '{key}'"));
                    Vec::new()
                }
            }
        };
        let n = usize_list(&mut errs, "n", take("n"));
        let m = usize_list(&mut errs, "m", take("m"));

        let mut cfg = StudyConfig::new(kind, copulas, n, m);
        if let Some((line, s)) = take("repetitions").or_else(|| take("reps")) {
            cfg.repetitions = num(&mut errs, "repetitions", line, &s).unwrap_or(cfg.repetitions);
        }
        if let Some((line, s)) = take("h") {
            cfg.h = num(&mut errs, "H", line, &s).unwrap_or(cfg.h);
        }
        if let Some((line, s)) = take("grid") {
            cfg.grid = num(&mut errs, "grid", line, &s).unwrap_or(cfg.grid);
        }
        if let Some((line, s)) = take("alpha") {
            cfg.alpha = num(&mut errs, "alpha", line, &s).unwrap_or(cfg.alpha);
        }
        if let Some((line, s)) = take("seed") {
            cfg.seed = num(&mut errs, "seed", line, &s).unwrap_or(cfg.seed);
        }
        if let Some((line, s)) = take("statistics") {
            match s.parse() {
                Ok(x) => cfg.statistics = x,
                Err(e) => errs.push(format!("line {line}: {e}")),
            }
        }
        if let Some((line, s)) = take("p_rule") {
            cfg.p_rule = match s.to_ascii_lowercase().as_str() {
                "plain" => PValueRule::Plain,
                "plus-one" | "plus_one" => PValueRule::PlusOne,
                _ => {
                    errs.push(format!("line {line}: p_rule must be 'plain' or 'plus-one'"));
                    cfg.p_rule
                }
            };
        }
        for (key, (line, _)) in map {
            errs.push(format!("line {line}: unknown key '{key}'"));
        }
        errs.extend(cfg.violations());
        if errs.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Canonical text form; parsing it yields an equal configuration.
    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let copulas: Vec<String> = self.copulas.iter().map(|c| c.to_string()).collect();
        format!(
            "kind = {}\ncopulas = {}\nn = {}\nm = {}\nrepetitions = {}\nH = {}\ngrid = {}\nalpha = {}\nseed = {}\nstatistics = {}\np_rule = {}\n",
            match self.kind {
                StudyKind::Level => "level",
                StudyKind::Power => "power",
            },
            copulas.join(", "),
            join(&self.n),
            join(&self.m),
            self.repetitions,
            self.h,
            self.grid,
            self.alpha,
            self.seed,
            self.statistics,
            match self.p_rule {
                PValueRule::Plain => "plain",
                PValueRule::PlusOne => "plus-one",
            }
        )
    }
}
