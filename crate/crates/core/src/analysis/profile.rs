use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime, Timelike};

use super::AnalysisError;
use crate::numfmt::fmt_sig;

pub const DAY_SECONDS: u32 = 86_400;

/// Running count, mean and sum of squared deviations (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BinStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl BinStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combines two partial aggregates (Chan et al. pairwise update).
    pub fn merge(&mut self, other: &BinStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64) / n as f64;
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    /// Population standard deviation.
    pub fn std(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.m2 / self.count as f64).max(0.0).sqrt())
    }
}

/// Per-bin statistics of a signal over the seconds of the day.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeOfDayProfile {
    bin_width: u32,
    bins: Vec<BinStats>,
}

impl TimeOfDayProfile {
    pub fn new(bin_width: u32) -> Result<Self, AnalysisError> {
        if bin_width == 0 || !DAY_SECONDS.is_multiple_of(bin_width) {
            return Err(AnalysisError::BinWidth(bin_width));
        }
        Ok(Self {
            bin_width,
            bins: vec![BinStats::default(); (DAY_SECONDS / bin_width) as usize],
        })
    }

    pub fn bin_width(&self) -> u32 {
        self.bin_width
    }

    pub fn bins(&self) -> &[BinStats] {
        &self.bins
    }

    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn bin_start(&self, bin: usize) -> u32 {
        bin as u32 * self.bin_width
    }

    pub fn bin_of(&self, seconds_of_day: f64) -> usize {
        let s = seconds_of_day.rem_euclid(DAY_SECONDS as f64);
        ((s / self.bin_width as f64) as usize).min(self.bins.len() - 1)
    }

    pub fn add(&mut self, seconds_of_day: f64, value: f64) {
        let bin = self.bin_of(seconds_of_day);
        self.bins[bin].push(value);
    }

    /// Folds another profile with the same bin width into this one.
    pub fn merge(&mut self, other: &TimeOfDayProfile) -> Result<(), AnalysisError> {
        if other.bin_width != self.bin_width {
            return Err(AnalysisError::BinWidth(other.bin_width));
        }
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            a.merge(b);
        }
        Ok(())
    }

    pub fn is_all_missing(&self) -> bool {
        self.bins.iter().all(|b| b.count == 0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_start_seconds", "mean", "std", "count"])?;
        for (i, b) in self.bins.iter().enumerate() {
            w.write_record([
                self.bin_start(i).to_string(),
                b.mean().map(fmt_sig).unwrap_or_default(),
                b.std().map(fmt_sig).unwrap_or_default(),
                b.count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a profile written by [`TimeOfDayProfile::write_csv`]. Bin
    /// statistics are rebuilt from the rounded mean and std.
    pub fn read_csv<R: Read>(source: R) -> Result<Self, AnalysisError> {
        let mut reader = csv::ReaderBuilder::new().from_reader(source);
        let header = reader.headers()?.clone();
        if header.iter().ne(["bin_start_seconds", "mean", "std", "count"]) {
            return Err(AnalysisError::Format {
                line: 1,
                message: "expected header bin_start_seconds,mean,std,count".into(),
            });
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let fail = |message: String| AnalysisError::Format { line, message };
            let start: u32 = record[0]
                .parse()
                .map_err(|_| fail(format!("bad bin start {:?}", &record[0])))?;
            let count: u64 = record[3]
                .parse()
                .map_err(|_| fail(format!("bad count {:?}", &record[3])))?;
            let stats = if count == 0 {
                BinStats::default()
            } else {
                let mean: f64 = record[1]
                    .parse()
                    .map_err(|_| fail(format!("bad mean {:?}", &record[1])))?;
                let std: f64 = record[2]
                    .parse()
                    .map_err(|_| fail(format!("bad std {:?}", &record[2])))?;
                BinStats {
                    count,
                    mean,
                    m2: std * std * count as f64,
                }
            };
            rows.push((start, stats));
        }
        let n = rows.len() as u32;
        if n == 0 || !DAY_SECONDS.is_multiple_of(n) {
            return Err(AnalysisError::Format {
                line: 1,
                message: format!("{n} bins do not tile a day"),
            });
        }
        let mut profile = Self::new(DAY_SECONDS / n)?;
        for (i, (start, stats)) in rows.into_iter().enumerate() {
            if start != profile.bin_start(i) {
                return Err(AnalysisError::Format {
                    line: i as u64 + 2,
                    message: format!("expected bin start {}, found {start}", profile.bin_start(i)),
                });
            }
            profile.bins[i] = stats;
        }
        Ok(profile)
    }
}

/// Bins `(seconds_of_day, value)` samples.
pub fn time_of_day_profile<I>(samples: I, bin_width: u32) -> Result<TimeOfDayProfile, AnalysisError>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let mut profile = TimeOfDayProfile::new(bin_width)?;
    for (s, v) in samples {
        profile.add(s, v);
    }
    Ok(profile)
}

/// Seconds since midnight of a timestamp: epoch seconds (UTC) or ISO-8601,
/// in which case the wall-clock time as written is used, offset or not.
pub fn parse_seconds_of_day(text: &str) -> Option<f64> {
    let text = text.trim();
    if let Ok(epoch) = text.parse::<f64>() {
        return epoch.is_finite().then(|| epoch.rem_euclid(DAY_SECONDS as f64));
    }
    let time = if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        dt.naive_local().time()
    } else {
        ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
            .iter()
            .find_map(|fmt| NaiveDateTime::parse_from_str(text, fmt).ok())?
            .time()
    };
    Some(time.num_seconds_from_midnight() as f64 + time.nanosecond().min(999_999_999) as f64 * 1e-9)
}

/// Streams a `timestamp,value` CSV (header optional) into a profile.
pub fn read_frequency_csv<R: Read>(source: R, bin_width: u32) -> Result<TimeOfDayProfile, AnalysisError> {
    let mut profile = TimeOfDayProfile::new(bin_width)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let mut columns = (0usize, 1usize);
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if idx == 0 {
            let ts = record.iter().position(|f| f.eq_ignore_ascii_case("timestamp"));
            let val = record.iter().position(|f| f.eq_ignore_ascii_case("value"));
            if let (Some(ts), Some(val)) = (ts, val) {
                columns = (ts, val);
                continue;
            }
        }
        let field = |i: usize| {
            record.get(i).ok_or_else(|| AnalysisError::Format {
                line,
                message: format!("expected at least {} columns, found {}", i + 1, record.len()),
            })
        };
        let ts = field(columns.0)?;
        let value = field(columns.1)?;
        let seconds = parse_seconds_of_day(ts).ok_or_else(|| AnalysisError::Timestamp {
            line,
            text: ts.to_string(),
        })?;
        let value: f64 = value
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| AnalysisError::Value {
                line,
                text: value.to_string(),
            })?;
        profile.add(seconds, value);
    }
    Ok(profile)
}

/// Mean absolute deviation (from the profile mean) of the bins starting on
/// a multiple of `period`, minus that of all other bins. Positive scores
/// mean deviations line up with period boundaries.
pub fn detect_periodic_deviation(profile: &TimeOfDayProfile, period: u32) -> Result<f64, AnalysisError> {
    let width = profile.bin_width();
    if period == 0 || !period.is_multiple_of(width) {
        return Err(AnalysisError::Period {
            period,
            bin_width: width,
        });
    }
    let present: Vec<(usize, f64)> = profile
        .bins()
        .iter()
        .enumerate()
        .filter_map(|(i, b)| b.mean().map(|m| (i, m)))
        .collect();
    if present.is_empty() {
        return Err(AnalysisError::AllBinsMissing);
    }
    let overall = present.iter().map(|&(_, m)| m).sum::<f64>() / present.len() as f64;
    let (mut on_sum, mut on_n, mut off_sum, mut off_n) = (0.0, 0usize, 0.0, 0usize);
    for &(i, m) in &present {
        let dev = (m - overall).abs();
        if profile.bin_start(i).is_multiple_of(period) {
            on_sum += dev;
            on_n += 1;
        } else {
            off_sum += dev;
            off_n += 1;
        }
    }
    if on_n == 0 || off_n == 0 {
        return Err(AnalysisError::DegeneratePeriod(period));
    }
    Ok(on_sum / on_n as f64 - off_sum / off_n as f64)
}
