//! NDBC standard meteorological ("stdmet") archives.
//!
//! Columns are located by header name, so both the current layout
//! (`#YY MM DD hh mm WDIR WSPD GST WVHT DPD APD ...`) and older ones without
//! a minute column or with a two-digit year are accepted.

use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuoyRecord {
    /// UTC, minute resolution.
    pub timestamp: NaiveDateTime,
    /// Significant wave height, m.
    pub wvht: Option<f64>,
    /// Average wave period, s.
    pub apd: Option<f64>,
    /// Wind speed, m/s.
    pub wspd: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    Wvht,
    Apd,
    Wspd,
}

impl Variable {
    pub fn name(self) -> &'static str {
        match self {
            Variable::Wvht => "wvht",
            Variable::Apd => "apd",
            Variable::Wspd => "wspd",
        }
    }

    /// Missing-value code: `99.00` for WVHT and APD, `99.0` for WSPD.
    fn sentinel(self) -> f64 {
        99.0
    }

    pub fn of(self, r: &BuoyRecord) -> Option<f64> {
        match self {
            Variable::Wvht => r.wvht,
            Variable::Apd => r.apd,
            Variable::Wspd => r.wspd,
        }
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wvht" => Ok(Variable::Wvht),
            "apd" => Ok(Variable::Apd),
            "wspd" | "spd" => Ok(Variable::Wspd),
            other => Err(Error::input(format!("unknown variable '{other}' (wvht, apd, wspd)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedStdmet {
    /// Sorted by timestamp; repeated timestamps keep their first record.
    pub records: Vec<BuoyRecord>,
    pub malformed: usize,
    pub duplicates: usize,
}

struct Columns {
    year: usize,
    month: usize,
    day: usize,
    hour: usize,
    minute: Option<usize>,
    wspd: Option<usize>,
    wvht: Option<usize>,
    apd: Option<usize>,
    width: usize,
}

impl Columns {
    fn from_header(line: &str) -> Option<Self> {
        let names: Vec<&str> = line.trim_start_matches('#').split_whitespace().collect();
        let find = |cands: &[&str]| names.iter().position(|n| cands.contains(n));
        Some(Self {
            year: find(&["YY", "YYYY"])?,
            month: find(&["MM"])?,
            day: find(&["DD"])?,
            hour: find(&["hh"])?,
            minute: find(&["mm"]),
            wspd: find(&["WSPD", "SPD"]),
            wvht: find(&["WVHT"]),
            apd: find(&["APD"]),
            width: names.len(),
        })
    }

    /// Layout of files that carry no header at all.
    fn modern() -> Self {
        Self {
            year: 0,
            month: 1,
            day: 2,
            hour: 3,
            minute: Some(4),
            wspd: Some(6),
            wvht: Some(8),
            apd: Some(10),
            width: 18,
        }
    }

    fn parse(&self, line: &str) -> Option<BuoyRecord> {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != self.width {
            return None;
        }
        let int = |i: usize| f[i].parse::<u32>().ok();
        let mut year = int(self.year)? as i32;
        if f[self.year].len() <= 2 {
            year += if year < 50 { 2000 } else { 1900 };
        }
        let minute = match self.minute {
            Some(i) => int(i)?,
            None => 0,
        };
        let timestamp = NaiveDate::from_ymd_opt(year, int(self.month)?, int(self.day)?)?.and_hms_opt(int(self.hour)?, minute, 0)?;
        let value = |col: Option<usize>, var: Variable| -> Option<Option<f64>> {
            let Some(i) = col else { return Some(None) };
            if f[i] == "MM" {
                return Some(None);
            }
            let x: f64 = f[i].parse().ok()?;
            if !x.is_finite() {
                return None;
            }
            Some((x >= 0.0 && x != var.sentinel()).then_some(x))
        };
        Some(BuoyRecord {
            timestamp,
            wvht: value(self.wvht, Variable::Wvht)?,
            apd: value(self.apd, Variable::Apd)?,
            wspd: value(self.wspd, Variable::Wspd)?,
        })
    }
}

/// Decompresses gzip input transparently.
fn decode(bytes: &[u8]) -> Result<String> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut s = String::new();
        flate2::read::MultiGzDecoder::new(bytes)
            .read_to_string(&mut s)
            .map_err(|e| Error::format(format!("gzip stream: {e}")))?;
        Ok(s)
    } else {
        String::from_utf8(bytes.to_vec()).map_err(|e| Error::format(format!("input is not utf-8 text: {e}")))
    }
}

/// Parses a stdmet archive. Sentinels (`99.00` for WVHT and APD, `99.0` for
/// WSPD) and `MM` become missing values; unparsable lines are counted and
/// skipped.
pub fn parse_ndbc_stdmet(bytes: &[u8]) -> Result<ParsedStdmet> {
    let text = decode(bytes)?;
    let mut cols: Option<Columns> = None;
    let mut records = Vec::new();
    let mut malformed = 0;
    let mut first_bad: Option<(usize, String)> = None;
    for (no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let is_header = trimmed.starts_with('#') || trimmed.starts_with("YY");
        if is_header {
            if cols.is_none() {
                cols = Columns::from_header(trimmed);
            }
            continue;
        }
        let layout = cols.get_or_insert_with(Columns::modern);
        match layout.parse(trimmed) {
            Some(r) => records.push(r),
            None => {
                malformed += 1;
                first_bad.get_or_insert((no + 1, trimmed.to_string()));
            }
        }
    }
    if records.is_empty() {
        return Err(Error::format(match first_bad {
            Some((no, l)) => format!("no parsable stdmet data lines; first offending line {no}: '{l}'"),
            None => "no stdmet data lines in input".to_string(),
        }));
    }
    if malformed > 0 {
        log::warn!("skipped {malformed} malformed stdmet lines");
    }
    records.sort_by_key(|r| r.timestamp);
    let before = records.len();
    records.dedup_by_key(|r| r.timestamp);
    Ok(ParsedStdmet {
        duplicates: before - records.len(),
        records,
        malformed,
    })
}

/// Sorts records from several files into one strictly increasing series.
pub fn merge_records(parts: Vec<Vec<BuoyRecord>>) -> Vec<BuoyRecord> {
    let mut all: Vec<BuoyRecord> = parts.into_iter().flatten().collect();
    all.sort_by_key(|r| r.timestamp);
    all.dedup_by_key(|r| r.timestamp);
    all
}

/// Stdmet-style text holding the parsed fields; missing values are written
/// as their sentinels.
pub fn serialize_records(records: &[BuoyRecord]) -> String {
    let mut s = String::from("#YY  MM DD hh mm WSPD WVHT APD\n#yr  mo dy hr mn m/s m sec\n");
    let val = |x: Option<f64>, var: Variable| match x {
        Some(v) => format!("{v}"),
        None => format!("{:.2}", var.sentinel()),
    };
    for r in records {
        writeln!(
            s,
            "{} {} {} {}",
            r.timestamp.format("%Y %m %d %H %M"),
            val(r.wspd, Variable::Wspd),
            val(r.wvht, Variable::Wvht),
            val(r.apd, Variable::Apd)
        )
        .unwrap();
    }
    s
}

/// Half-open UTC interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeWindow {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl TimeWindow {
    pub fn new(start: NaiveDateTime, end: NaiveDateTime) -> Self {
        Self { start, end }
    }

    /// Whole days from `start` to the day before `end`, e.g. `2014-11-01`
    /// and `2015-03-01`.
    pub fn from_dates(start: &str, end: &str) -> Result<Self> {
        let d = |s: &str| {
            NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
                .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight"))
                .map_err(|e| Error::input(format!("date '{s}': {e}")))
        };
        Ok(Self::new(d(start)?, d(end)?))
    }

    /// November 2014 through February 2015.
    pub fn winter_2015() -> Self {
        Self::from_dates("2014-11-01", "2015-03-01").expect("valid dates")
    }

    pub fn contains(&self, t: NaiveDateTime) -> bool {
        t >= self.start && t < self.end
    }
}

/// Rows inside `window` where both variables are present, in time order.
pub fn extract_pairs(records: &[BuoyRecord], x: Variable, y: Variable, window: TimeWindow) -> Result<Sample> {
    if x == y {
        return Err(Error::input(format!("variables must differ, got {} twice", x.name())));
    }
    let pairs: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| window.contains(r.timestamp))
        .filter_map(|r| Some((x.of(r)?, y.of(r)?)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptySample(format!(
            "no records with both {} and {} between {} and {}",
            x.name(),
            y.name(),
            window.start,
            window.end
        )));
    }
    Sample::new(pairs)
}

fn midranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            r[k] = avg;
        }
        i = j;
    }
    r
}

/// Spearman's rho: Pearson correlation of the mid-rank vectors.
pub fn spearman_rho(sample: &Sample) -> Result<f64> {
    let n = sample.len();
    if n < 3 {
        return Err(Error::input(format!("spearman's rho needs n >= 3, got {n}")));
    }
    let rx = midranks(&sample.xs().collect::<Vec<_>>());
    let ry = midranks(&sample.ys().collect::<Vec<_>>());
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean) * (a - mean);
        syy += (b - mean) * (b - mean);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::input("spearman's rho is undefined for a constant column"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Archive name of a station-year, e.g. `46066h2014.txt.gz`.
pub fn archive_name(station: &str, year: i32) -> String {
    format!("{}h{year}.txt.gz", station.to_ascii_lowercase())
}

pub fn archive_url(station: &str, year: i32) -> String {
    format!(
        "https://www.ndbc.noaa.gov/data/historical/stdmet/{}",
        archive_name(station, year)
    )
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Stored archive and its checksum file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredArchive {
    pub path: PathBuf,
    pub checksum_path: PathBuf,
    pub sha256: String,
    pub bytes: usize,
}

/// Writes `bytes` verbatim as `dir/name` plus `dir/name.sha256`. Files are
/// written under temporary names and renamed, so no partial file remains.
pub fn store_archive(bytes: &[u8], dir: &Path, name: &str) -> Result<StoredArchive> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    let checksum_path = dir.join(format!("{name}.sha256"));
    let sha = sha256_hex(bytes);
    let write = |target: &Path, data: &[u8]| -> Result<()> {
        let tmp = target.with_extension("part");
        std::fs::write(&tmp, data).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, target).map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            Error::io(target, e)
        })
    };
    write(&path, bytes)?;
    write(&checksum_path, format!("{sha}  {name}\n").as_bytes())?;
    Ok(StoredArchive {
        path,
        checksum_path,
        sha256: sha,
        bytes: bytes.len(),
    })
}

/// Downloads a station-year archive over HTTPS.
#[cfg(feature = "fetch")]
pub fn download_archive(url: &str) -> Result<Vec<u8>> {
    let resp = ureq::get(url)
        .timeout(std::time::Duration::from_secs(60))
        .call()
        .map_err(|e| Error::Network(e.to_string()))?;
    let mut body = Vec::new();
    resp.into_reader()
        .read_to_end(&mut body)
        .map_err(|e| Error::Network(format!("reading {url}: {e}")))?;
    Ok(body)
}

#[cfg(not(feature = "fetch"))]
pub fn download_archive(url: &str) -> Result<Vec<u8>> {
    Err(Error::Network(format!("built without network support, cannot fetch {url}")))
}
