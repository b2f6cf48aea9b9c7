//! Signal panel ingestion and one-sided normalization.
//!
//! A panel is a date-indexed set of signal columns plus one target return
//! column. Values are stored column-major so that windows over a single
//! signal are contiguous slices.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{norm, Scalar};

const DEGENERATE_NORM: f64 = 1e-12;

/// Which side of the mean a one-sided co-moment looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    Upper,
    Lower,
}

impl Side {
    /// Keeps a demeaned value if it lies on this side, otherwise zero.
    pub fn keep<T: Scalar>(self, deviation: T) -> T {
        match self {
            Side::Upper if deviation > T::zero() => deviation,
            Side::Lower if deviation < T::zero() => deviation,
            _ => T::zero(),
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Upper => Side::Lower,
            Side::Lower => Side::Upper,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Upper => "upper",
            Side::Lower => "lower",
        })
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "upper" | "up" | "upside" => Ok(Side::Upper),
            "lower" | "down" | "downside" => Ok(Side::Lower),
            other => Err(Error::config("side", format!("expected upper|lower, got {other:?}"))),
        }
    }
}

/// Half-open range of panel rows `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowWindow {
    pub start: usize,
    pub end: usize,
}

impl RowWindow {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// How missing cells are treated at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillPolicy {
    Strict,
    /// Carry the last observed value forward over at most `max_gap`
    /// consecutive missing rows.
    ForwardFill { max_gap: usize },
}

impl Default for FillPolicy {
    fn default() -> Self {
        FillPolicy::ForwardFill { max_gap: 5 }
    }
}

impl fmt::Display for FillPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FillPolicy::Strict => f.write_str("strict"),
            FillPolicy::ForwardFill { max_gap } => write!(f, "forward_fill:{max_gap}"),
        }
    }
}

impl FromStr for FillPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("strict") {
            return Ok(FillPolicy::Strict);
        }
        let rest = s
            .strip_prefix("forward_fill")
            .ok_or_else(|| Error::config("fill_policy", "expected strict|forward_fill:N"))?;
        let max_gap = match rest.strip_prefix(':') {
            Some(n) => n
                .parse()
                .map_err(|_| Error::config("fill_policy", format!("bad max gap {n:?}")))?,
            None if rest.is_empty() => 5,
            None => return Err(Error::config("fill_policy", "expected strict|forward_fill:N")),
        };
        Ok(FillPolicy::ForwardFill { max_gap })
    }
}

/// Validated panel of `n` signal series and one target series on a common
/// strictly increasing date index.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPanel<T> {
    dates: Vec<NaiveDate>,
    names: Vec<String>,
    signals: Vec<Vec<T>>,
    target_name: String,
    target: Vec<T>,
}

impl<T: Scalar> SignalPanel<T> {
    /// Builds a panel from column-major data, checking every invariant.
    pub fn new(
        dates: Vec<NaiveDate>,
        names: Vec<String>,
        signals: Vec<Vec<T>>,
        target_name: impl Into<String>,
        target: Vec<T>,
    ) -> Result<Self> {
        let target_name = target_name.into();
        if names.is_empty() {
            return Err(Error::NoSignals);
        }
        if dates.is_empty() {
            return Err(Error::NoRows);
        }
        if names.len() != signals.len() {
            return Err(Error::Shape(format!(
                "{} names for {} signal columns",
                names.len(),
                signals.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in names.iter().chain(std::iter::once(&target_name)) {
            if name.trim().is_empty() || name == "date" || !seen.insert(name.as_str()) {
                return Err(Error::BadColumnName(name.clone()));
            }
        }
        let rows = dates.len();
        if target.len() != rows || signals.iter().any(|c| c.len() != rows) {
            return Err(Error::Shape("signal and target row counts differ".into()));
        }
        for (i, pair) in dates.windows(2).enumerate() {
            if pair[1] == pair[0] {
                return Err(Error::DuplicateDate {
                    line: i + 3,
                    date: pair[1],
                });
            }
            if pair[1] < pair[0] {
                return Err(Error::UnorderedDate {
                    line: i + 3,
                    date: pair[1],
                });
            }
        }
        let finite = |c: &Vec<T>| c.iter().all(|v| v.is_finite());
        if !finite(&target) || !signals.iter().all(finite) {
            return Err(Error::Shape("panel contains non-finite values".into()));
        }
        Ok(Self {
            dates,
            names,
            signals,
            target_name,
            target,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_signals(&self) -> usize {
        self.names.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, signal: usize) -> &str {
        &self.names[signal]
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn signal(&self, index: usize) -> &[T] {
        &self.signals[index]
    }

    pub fn target(&self) -> &[T] {
        &self.target
    }

    pub fn signal_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Row holding `date`, if present.
    pub fn row_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// First row dated on or after `date`.
    pub fn first_row_on_or_after(&self, date: NaiveDate) -> usize {
        self.dates.partition_point(|d| *d < date)
    }

    /// One-sided normalized slice of signal `index` over `window`, demeaned
    /// by the window-local mean.
    pub fn normalized_signal(
        &self,
        index: usize,
        side: Side,
        window: RowWindow,
    ) -> Result<NormalizedSlice<T>> {
        let values = &self.signals[index][window.start..window.end];
        one_sided_normalize(values, side, window)
    }
}

/// Parses a panel from the CSV format: header `date,<col>,...`, ISO dates,
/// numeric cells. Empty cells and `NA`/`NaN` are treated as missing.
pub fn load_panel<T: Scalar, R: Read>(
    source: R,
    target_column: &str,
    fill: FillPolicy,
) -> Result<SignalPanel<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    match header.first() {
        Some(first) if first.eq_ignore_ascii_case("date") => {}
        other => return Err(Error::MissingDateColumn(other.cloned().unwrap_or_default())),
    }
    let columns = &header[1..];
    let target_pos = columns
        .iter()
        .position(|c| c == target_column)
        .ok_or_else(|| Error::MissingTargetColumn(target_column.to_string()))?;

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut cells: Vec<Vec<Option<T>>> = vec![Vec::new(); columns.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        let raw_date = &record[0];
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| {
            Error::MalformedDate {
                line,
                value: raw_date.to_string(),
            }
        })?;
        if let Some(&prev) = dates.last() {
            if date == prev {
                return Err(Error::DuplicateDate { line, date });
            }
            if date < prev {
                return Err(Error::UnorderedDate { line, date });
            }
        }
        dates.push(date);
        for (col, raw) in record.iter().skip(1).enumerate() {
            cells[col].push(parse_cell(raw).map_err(|_| Error::NonNumeric {
                line,
                column: columns[col].clone(),
                value: raw.to_string(),
            })?);
        }
    }
    if dates.is_empty() {
        return Err(Error::NoRows);
    }

    let mut filled = Vec::with_capacity(columns.len());
    for (col, values) in cells.into_iter().enumerate() {
        filled.push(fill_column(values, &columns[col], fill)?);
    }
    let target = filled.remove(target_pos);
    let mut names = columns.to_vec();
    let target_name = names.remove(target_pos);
    SignalPanel::new(dates, names, filled, target_name, target)
}

fn parse_cell<T: Scalar>(raw: &str) -> std::result::Result<Option<T>, ()> {
    if raw.is_empty() || ["na", "nan", "null"].contains(&raw.to_ascii_lowercase().as_str()) {
        return Ok(None);
    }
    let value: f64 = raw.parse().map_err(|_| ())?;
    if !value.is_finite() {
        return Err(());
    }
    T::from_f64(value).map(Some).ok_or(())
}

fn fill_column<T: Scalar>(values: Vec<Option<T>>, column: &str, fill: FillPolicy) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(values.len());
    let mut last: Option<T> = None;
    let mut gap = 0usize;
    for (row, value) in values.into_iter().enumerate() {
        let line = row + 2;
        match value {
            Some(v) => {
                gap = 0;
                last = Some(v);
                out.push(v);
            }
            None => {
                let max_gap = match fill {
                    FillPolicy::Strict => {
                        return Err(Error::MissingValue {
                            line,
                            column: column.to_string(),
                        })
                    }
                    FillPolicy::ForwardFill { max_gap } => max_gap,
                };
                let prev = last.ok_or_else(|| Error::MissingValue {
                    line,
                    column: column.to_string(),
                })?;
                gap += 1;
                if gap > max_gap {
                    return Err(Error::GapTooLong {
                        line,
                        column: column.to_string(),
                        gap,
                        max_gap,
                    });
                }
                out.push(prev);
            }
        }
    }
    Ok(out)
}

/// Writes a panel in the same CSV format `load_panel` reads; the target is
/// emitted as the last column.
pub fn write_panel<T: Scalar, W: Write>(panel: &SignalPanel<T>, sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    let mut header = vec!["date".to_string()];
    header.extend(panel.names.iter().cloned());
    header.push(panel.target_name.clone());
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for row in 0..panel.len() {
        record.clear();
        record.push(panel.dates[row].format("%Y-%m-%d").to_string());
        for column in &panel.signals {
            record.push(column[row].to_string());
        }
        record.push(panel.target[row].to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// A demeaned, side-separated, unit-norm series over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSlice<T> {
    pub values: Vec<T>,
    pub side: Side,
    pub window: RowWindow,
    /// Mean subtracted before side separation.
    pub mean: T,
    /// Euclidean norm of the side-separated vector before scaling.
    pub norm: T,
    /// Set when the side-separated vector has (numerically) zero norm; the
    /// values are then all zero.
    pub degenerate: bool,
}

impl<T: Scalar> NormalizedSlice<T> {
    /// Undoes the unit scaling: the side-separated deviations from the mean.
    pub fn deviations(&self) -> Vec<T> {
        self.values.iter().map(|&v| v * self.norm).collect()
    }
}

/// Subtracts the window mean, zeroes the opposite side and scales the result
/// to unit Euclidean norm.
pub fn one_sided_normalize<T: Scalar>(
    series: &[T],
    side: Side,
    window: RowWindow,
) -> Result<NormalizedSlice<T>> {
    if series.len() < 2 {
        return Err(Error::WindowTooShort {
            len: series.len(),
            min: 2,
        });
    }
    let mean = series.iter().copied().sum::<T>() / T::from_usize(series.len()).unwrap();
    one_sided_normalize_about(series, side, window, mean)
}

/// Like [`one_sided_normalize`] but with an externally supplied mean.
pub fn one_sided_normalize_about<T: Scalar>(
    series: &[T],
    side: Side,
    window: RowWindow,
    mean: T,
) -> Result<NormalizedSlice<T>> {
    if series.len() < 2 {
        return Err(Error::WindowTooShort {
            len: series.len(),
            min: 2,
        });
    }
    let mut values: Vec<T> = series.iter().map(|&v| side.keep(v - mean)).collect();
    let length = norm(&values);
    let degenerate = !(length >= T::lit(DEGENERATE_NORM));
    if degenerate {
        values.iter_mut().for_each(|v| *v = T::zero());
    } else {
        values.iter_mut().for_each(|v| *v = *v / length);
    }
    Ok(NormalizedSlice {
        values,
        side,
        window,
        mean,
        norm: if degenerate { T::zero() } else { length },
        degenerate,
    })
}
