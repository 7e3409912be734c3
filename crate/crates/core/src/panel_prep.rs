//! Preparation of longitudinal panel files: merging monthly background
//! waves, dropping background-only respondents, and estimating month of
//! birth from the month in which the recorded age changes.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dataset::{
    load_csv, Dataset, DatasetBuilder, Datum, Schema, Value, VariableKind, VariableRole,
};
use crate::error::{Error, Result};

/// A calendar month of a specific year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct YearMonth {
    year: i32,
    month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidYearMonth(format!("{year}-{month}")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u8 {
        self.month
    }

    /// Months elapsed since year 0.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        YearMonth {
            year: ordinal.div_euclid(12) as i32,
            month: (ordinal.rem_euclid(12) + 1) as u8,
        }
    }

    pub fn succ(self) -> Self {
        Self::from_ordinal(self.ordinal() + 1)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidYearMonth(s.to_owned());
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        YearMonth::new(year, month).map_err(|_| bad())
    }
}

fn prev_month(m: u8) -> u8 {
    if m == 1 {
        12
    } else {
        m - 1
    }
}

fn next_month(m: u8) -> u8 {
    if m == 12 {
        1
    } else {
        m + 1
    }
}

/// Zero, one or two candidate birth months (1–12), earlier candidate first.
/// Two candidates are always cyclically adjacent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BirthMonthEstimate {
    len: u8,
    months: [u8; 2],
}

impl BirthMonthEstimate {
    pub const EMPTY: BirthMonthEstimate = BirthMonthEstimate {
        len: 0,
        months: [0; 2],
    };

    pub fn single(month: u8) -> Result<Self> {
        check_month(month)?;
        Ok(BirthMonthEstimate {
            len: 1,
            months: [month, 0],
        })
    }

    /// The month before `month`, then `month`.
    pub fn ending_at(month: u8) -> Result<Self> {
        check_month(month)?;
        Ok(BirthMonthEstimate {
            len: 2,
            months: [prev_month(month), month],
        })
    }

    pub fn candidates(&self) -> &[u8] {
        &self.months[..self.len as usize]
    }

    pub fn first(&self) -> Option<u8> {
        self.candidates().first().copied()
    }

    pub fn contains(&self, month: u8) -> bool {
        self.candidates().contains(&month)
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub(crate) fn into_value(self) -> Value {
        if self.is_empty() {
            Value::Missing
        } else {
            Value::Months(self)
        }
    }
}

fn check_month(month: u8) -> Result<()> {
    if (1..=12).contains(&month) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "month {month} is outside 1..=12"
        )))
    }
}

impl fmt::Display for BirthMonthEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.candidates() {
            [] => Ok(()),
            [m] => write!(f, "{m}"),
            [a, b] => write!(f, "{a}/{b}"),
            _ => unreachable!(),
        }
    }
}

impl FromStr for BirthMonthEstimate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("`{s}` is not a month-of-birth estimate"));
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::EMPTY);
        }
        let parse = |p: &str| p.trim().parse::<u8>().map_err(|_| bad());
        match s.split_once('/') {
            None => Self::single(parse(s)?).map_err(|_| bad()),
            Some((a, b)) => {
                let (a, b) = (parse(a)?, parse(b)?);
                check_month(b).map_err(|_| bad())?;
                if prev_month(b) != a {
                    return Err(bad());
                }
                Self::ending_at(b)
            }
        }
    }
}

/// Monthly waves of the background questionnaire, oldest first.
#[derive(Debug, Clone)]
pub struct WaveSeries {
    waves: Vec<(YearMonth, Dataset)>,
}

impl WaveSeries {
    pub fn new(waves: Vec<(YearMonth, Dataset)>) -> Result<Self> {
        let first = waves.first().ok_or(Error::NoWaves)?;
        let schema = first.1.schema();
        for pair in waves.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::WavesOutOfOrder(pair[1].0.to_string()));
            }
        }
        for (month, data) in &waves[1..] {
            if data.schema() != schema {
                return Err(Error::SchemaMismatch(month.to_string()));
            }
        }
        Ok(WaveSeries { waves })
    }

    pub fn waves(&self) -> &[(YearMonth, Dataset)] {
        &self.waves
    }

    pub fn schema(&self) -> &Schema {
        self.waves[0].1.schema()
    }

    /// Respondent ids in order of first appearance across waves.
    pub fn respondent_ids(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        let mut ids = Vec::new();
        for (_, data) in &self.waves {
            for id in data.respondent_ids() {
                if seen.insert(id.as_str()) {
                    ids.push(id.clone());
                }
            }
        }
        ids
    }

    /// The series of (wave, value) observations of one integer variable for
    /// one respondent; waves where the respondent is absent are skipped.
    pub fn integer_history(
        &self,
        id: &str,
        variable: &str,
    ) -> Result<Vec<(YearMonth, Option<i64>)>> {
        let col = self.waves[0].1.column_index(variable)?;
        if self.schema().variables[col].kind != VariableKind::Integer {
            return Err(Error::KindMismatch {
                variable: variable.to_owned(),
                kind: "categorical",
            });
        }
        Ok(self
            .waves
            .iter()
            .filter_map(|(month, data)| {
                let row = data.row_of(id)?;
                let age = match data.value(row, col) {
                    Value::Int(v) => Some(v),
                    _ => None,
                };
                Some((*month, age))
            })
            .collect())
    }
}

/// Read every `<YYYY-MM>.csv` file in `dir` as one wave.
pub fn load_wave_dir(dir: impl AsRef<Path>, schema: &Schema) -> Result<WaveSeries> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut waves = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let month: YearMonth = stem.parse()?;
        waves.push((month, load_csv(&path, schema)?));
    }
    waves.sort_by_key(|(m, _)| *m);
    WaveSeries::new(waves)
}

/// Read a `respondent,study` CSV (header row required) into a participation map.
pub fn load_participation(path: impl AsRef<Path>) -> Result<HashMap<String, BTreeSet<String>>> {
    let path = path.as_ref();
    let ctx = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(&ctx, e))?;
    let mut map: HashMap<String, BTreeSet<String>> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::csv(&ctx, e))?;
        let (Some(id), Some(study)) = (record.get(0), record.get(1)) else {
            return Err(Error::Config(format!(
                "{ctx}: participation rows need two columns (respondent, study)"
            )));
        };
        map.entry(id.to_owned())
            .or_default()
            .insert(study.to_owned());
    }
    Ok(map)
}

/// One row per respondent seen in any wave, each cell holding the value
/// from the latest wave in which it was observed.
pub fn merge_waves(series: &WaveSeries) -> Dataset {
    let schema = series.schema().clone();
    let n_vars = schema.variables.len();
    let mut builder = DatasetBuilder::new(schema);
    for id in series.respondent_ids() {
        let rows: Vec<Option<usize>> = series.waves.iter().map(|(_, d)| d.row_of(&id)).collect();
        let cells: Vec<Datum<'_>> = (0..n_vars)
            .map(|col| {
                series
                    .waves
                    .iter()
                    .zip(&rows)
                    .rev()
                    .filter_map(|((_, data), row)| row.map(|r| data.datum(r, col)))
                    .find(|d| !d.is_missing())
                    .unwrap_or(Datum::Missing)
            })
            .collect();
        builder
            .push_row(id, cells)
            .expect("cells share the series schema");
    }
    builder.finish()
}

/// Keep respondents with at least one observed background variable who also
/// took part in at least one other study. Returns the filtered data and the
/// number of removed respondents.
pub fn filter_background_only(
    merged: &Dataset,
    participation: &HashMap<String, BTreeSet<String>>,
) -> (Dataset, usize) {
    let background: Vec<usize> = merged
        .schema()
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.role == VariableRole::Background)
        .map(|(i, _)| i)
        .collect();
    let keep: Vec<usize> = (0..merged.n_rows())
        .filter(|&r| {
            let has_background = background.iter().any(|&c| !merged.value(r, c).is_missing());
            let in_study = participation
                .get(&merged.respondent_ids()[r])
                .is_some_and(|s| !s.is_empty());
            has_background && in_study
        })
        .collect();
    let removed = merged.n_rows() - keep.len();
    (merged.select_rows(&keep), removed)
}

/// Estimate the month of birth from a chronologically ordered age history.
///
/// A month enters the change set when an observed age is exactly one more
/// than the observation in the immediately preceding calendar month. One
/// distinct change month `M` yields `(M-1, M)`; two cyclically adjacent
/// change months yield the earlier one; no change yields an empty estimate.
pub fn estimate_birth_month(
    age_by_wave: &[(YearMonth, Option<i64>)],
) -> Result<BirthMonthEstimate> {
    let mut changes: BTreeSet<u8> = BTreeSet::new();
    let mut last: Option<(YearMonth, i64)> = None;
    for pair in age_by_wave.windows(2) {
        if pair[1].0 <= pair[0].0 {
            return Err(Error::WavesOutOfOrder(pair[1].0.to_string()));
        }
    }
    for &(month, age) in age_by_wave {
        let Some(age) = age else { continue };
        if let Some((prev_month, prev_age)) = last {
            if age < prev_age {
                return Err(Error::InconsistentAges(format!(
                    "age drops from {prev_age} in {prev_month} to {age} in {month}"
                )));
            }
            // A change across a gap does not identify its month.
            if age == prev_age + 1 && month.ordinal() - prev_month.ordinal() == 1 {
                changes.insert(month.month());
            }
        }
        last = Some((month, age));
    }
    let months: Vec<u8> = changes.into_iter().collect();
    match months.as_slice() {
        [] => Ok(BirthMonthEstimate::EMPTY),
        [m] => BirthMonthEstimate::ending_at(*m),
        [a, b] if next_month(*a) == *b => BirthMonthEstimate::single(*a),
        // {1, 12}: December precedes January.
        [a, b] if next_month(*b) == *a => BirthMonthEstimate::single(*b),
        _ => Err(Error::InconsistentAges(format!(
            "age changed in months {months:?}, which do not bracket one birthday"
        ))),
    }
}

/// Birth-month estimates for every respondent of `ids`, computed from the
/// `age_variable` histories in `series`. Per-respondent failures are kept
/// as errors so callers can decide how to treat noisy histories.
pub fn estimate_birth_months(
    series: &WaveSeries,
    ids: &[String],
    age_variable: &str,
) -> Result<Vec<Result<BirthMonthEstimate>>> {
    series.waves[0].1.column_index(age_variable)?;
    ids.par_iter()
        .map(|id| {
            let history = series.integer_history(id, age_variable)?;
            Ok(estimate_birth_month(&history))
        })
        .collect()
}
