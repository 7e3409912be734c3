//! Missing-tolerant match counts (n_match).
//!
//! For a probe row, a candidate row survives a quasi-identifier variable
//! when the probe is missing there, or the candidate's cell equals the
//! probe value, or the candidate's cell is missing. The number of survivors
//! (always including the probe itself) is the row's n_match.
//!
//! Estimated month-of-birth cells take part as follows: the probe uses its
//! first candidate month; a candidate cell matches when its candidate list
//! contains that month.
//!
//! Two paths compute the same counts: [`n_match_row`] and
//! [`n_match_all_reference`] scan every row, while [`n_match_all`] intersects
//! the per-value row-sets of a [`MatchIndex`].

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::anonymity::QuasiIdentifier;
use crate::dataset::{Dataset, Datum, Value};
use crate::error::{Error, Result};
use crate::rowset::{ones, popcount, words_for, RowSet};

/// Thresholds reported as "n_match ≤ t" columns.
pub const MATCH_THRESHOLDS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MatchOptions {
    /// Exclude candidates that share no commonly observed variable with the
    /// probe (the probe itself always counts).
    pub require_observed_overlap: bool,
}

impl MatchOptions {
    pub fn strict() -> Self {
        MatchOptions {
            require_observed_overlap: true,
        }
    }
}

/// The value a probe row looks up on one variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Key {
    Code(u32),
    Int(i64),
    Month(u8),
    /// A value that occurs in no row of the indexed dataset.
    Absent,
}

/// The probe key of a stored cell; `None` when the cell is missing.
pub fn probe_key(value: Value) -> Option<Key> {
    match value {
        Value::Code(c) => Some(Key::Code(c)),
        Value::Int(v) => Some(Key::Int(v)),
        Value::Months(m) => m.first().map(Key::Month),
        Value::Missing => None,
    }
}

/// Whether a candidate cell survives a probe key.
pub fn accepts(cell: Value, key: Key) -> bool {
    match (cell, key) {
        (Value::Missing, _) => true,
        (Value::Code(c), Key::Code(k)) => c == k,
        (Value::Int(v), Key::Int(k)) => v == k,
        (Value::Months(m), Key::Month(k)) => m.contains(k),
        _ => false,
    }
}

fn row_probe(dataset: &Dataset, cols: &[usize], row: usize) -> Vec<Option<Key>> {
    cols.iter()
        .map(|&c| probe_key(dataset.value(row, c)))
        .collect()
}

/// Reference count for one probe pattern by scanning every row of `dataset`.
/// `probe_row` is the row the pattern came from, if any; it always counts.
fn scan_count(
    dataset: &Dataset,
    cols: &[usize],
    probe: &[Option<Key>],
    probe_row: Option<usize>,
    options: MatchOptions,
) -> usize {
    (0..dataset.n_rows())
        .filter(|&s| {
            if Some(s) == probe_row {
                return true;
            }
            let mut shared = false;
            for (&c, key) in cols.iter().zip(probe) {
                if let Some(key) = key {
                    let cell = dataset.value(s, c);
                    if !accepts(cell, *key) {
                        return false;
                    }
                    shared |= !cell.is_missing();
                }
            }
            shared || !options.require_observed_overlap
        })
        .count()
}

/// n_match for the respondent `id` by a full scan.
pub fn n_match_row(
    dataset: &Dataset,
    qi: &QuasiIdentifier,
    id: &str,
    options: MatchOptions,
) -> Result<usize> {
    let cols = qi.resolve(dataset)?;
    let row = dataset
        .row_of(id)
        .ok_or_else(|| Error::UnknownRespondent(id.to_owned()))?;
    Ok(scan_count(
        dataset,
        &cols,
        &row_probe(dataset, &cols, row),
        Some(row),
        options,
    ))
}

/// n_match for every row by pairwise scanning; O(n²). Used as the oracle
/// for [`n_match_all`].
pub fn n_match_all_reference(
    dataset: &Dataset,
    qi: &QuasiIdentifier,
    options: MatchOptions,
) -> Result<MatchProfile> {
    let cols = qi.resolve(dataset)?;
    let counts = (0..dataset.n_rows())
        .into_par_iter()
        .map(|r| {
            scan_count(
                dataset,
                &cols,
                &row_probe(dataset, &cols, r),
                Some(r),
                options,
            )
        })
        .collect();
    Ok(MatchProfile::from_counts(qi.clone(), counts))
}

/// n_match for every row through a [`MatchIndex`].
pub fn n_match_all(
    dataset: &Dataset,
    qi: &QuasiIdentifier,
    options: MatchOptions,
) -> Result<MatchProfile> {
    let index = build_match_index(dataset, qi)?;
    let cols = qi.resolve(dataset)?;

    // Rows with identical probe patterns share a count.
    let mut patterns: Vec<Vec<Option<Key>>> = Vec::new();
    let mut pattern_of = Vec::with_capacity(dataset.n_rows());
    let mut seen: HashMap<Vec<Option<Key>>, usize> = HashMap::new();
    for r in 0..dataset.n_rows() {
        let probe = row_probe(dataset, &cols, r);
        let next = patterns.len();
        let p = *seen.entry(probe.clone()).or_insert(next);
        if p == next {
            patterns.push(probe);
        }
        pattern_of.push(p);
    }

    let per_pattern: Vec<usize> = patterns
        .par_iter()
        .map_init(
            || Scratch::new(index.n_rows),
            |scratch, probe| index.count_with(probe, options, scratch),
        )
        .collect();
    let counts = pattern_of.into_iter().map(|p| per_pattern[p]).collect();
    Ok(MatchProfile::from_counts(qi.clone(), counts))
}

/// Per-respondent n_match counts and their summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchProfile {
    pub qi: QuasiIdentifier,
    pub counts: Vec<usize>,
    pub n_rows: usize,
    /// Rows with n_match = 1.
    pub n_unique: usize,
    /// Rows with n_match = 2.
    pub rows_at_2: usize,
    /// `rows_at_2 / 2`, the pair count used in place of n₂.
    pub n2_equivalent: f64,
    /// Threshold t → rows with n_match ≤ t.
    pub respondents_le: BTreeMap<usize, usize>,
    pub pr_su: f64,
}

impl MatchProfile {
    pub fn from_counts(qi: QuasiIdentifier, counts: Vec<usize>) -> Self {
        let n_rows = counts.len();
        let n_unique = counts.iter().filter(|&&c| c == 1).count();
        let rows_at_2 = counts.iter().filter(|&&c| c == 2).count();
        let respondents_le = MATCH_THRESHOLDS
            .iter()
            .map(|&t| (t, counts.iter().filter(|&&c| c <= t).count()))
            .collect();
        MatchProfile {
            qi,
            counts,
            n_rows,
            n_unique,
            rows_at_2,
            n2_equivalent: rows_at_2 as f64 / 2.0,
            respondents_le,
            pr_su: if n_rows == 0 {
                0.0
            } else {
                n_unique as f64 / n_rows as f64
            },
        }
    }
}

#[derive(Debug, Clone)]
enum Posting {
    Dense(RowSet),
    /// Ascending row numbers.
    Sparse(Vec<u32>),
}

#[derive(Debug, Clone)]
struct VariableIndex {
    missing: RowSet,
    values: HashMap<Key, Posting>,
}

/// Inverted index from (variable, value) to the rows that accept that value:
/// rows holding it plus rows missing on the variable.
#[derive(Debug, Clone)]
pub struct MatchIndex {
    n_rows: usize,
    names: Vec<String>,
    vars: Vec<VariableIndex>,
}

/// Per-worker buffers for intersection.
pub struct Scratch {
    acc: Vec<u64>,
    acc_missing: Vec<u64>,
    expand: Vec<u64>,
}

impl Scratch {
    pub fn new(n_rows: usize) -> Self {
        let n = words_for(n_rows);
        Scratch {
            acc: vec![0; n],
            acc_missing: vec![0; n],
            expand: vec![0; n],
        }
    }
}

pub fn build_match_index(dataset: &Dataset, qi: &QuasiIdentifier) -> Result<MatchIndex> {
    let cols = qi.resolve(dataset)?;
    let n = dataset.n_rows();
    // Values at least this frequent get a dense bitset.
    let dense_from = (n / 64).max(1);
    let vars = cols
        .iter()
        .map(|&c| {
            let mut missing = RowSet::empty(n);
            let mut rows_of: HashMap<Key, Vec<u32>> = HashMap::new();
            for (r, &cell) in dataset.column(c).cells().iter().enumerate() {
                match cell {
                    Value::Missing => missing.insert(r),
                    Value::Months(m) => {
                        for &month in m.candidates() {
                            rows_of.entry(Key::Month(month)).or_default().push(r as u32);
                        }
                    }
                    other => {
                        let key = probe_key(other).expect("observed cell");
                        rows_of.entry(key).or_default().push(r as u32);
                    }
                }
            }
            let values = rows_of
                .into_iter()
                .map(|(key, rows)| {
                    let posting = if rows.len() >= dense_from {
                        Posting::Dense(RowSet::from_rows(n, rows.iter().map(|&r| r as usize)))
                    } else {
                        Posting::Sparse(rows)
                    };
                    (key, posting)
                })
                .collect();
            VariableIndex { missing, values }
        })
        .collect();
    Ok(MatchIndex {
        n_rows: n,
        names: qi.variables().to_vec(),
        vars,
    })
}

impl MatchIndex {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn variables(&self) -> &[String] {
        &self.names
    }

    /// Rows accepting `key` on the variable at position `var` of the
    /// quasi-identifier.
    pub fn row_set(&self, var: usize, key: Key) -> RowSet {
        let vi = &self.vars[var];
        let mut set = vi.missing.clone();
        match vi.values.get(&key) {
            Some(Posting::Dense(d)) => set.union_with(d),
            Some(Posting::Sparse(rows)) => {
                for &r in rows {
                    set.insert(r as usize);
                }
            }
            None => {}
        }
        set
    }

    /// Build a probe for this index from decoded values, one per variable,
    /// translating labels through `dataset`'s dictionaries. `dataset` must
    /// be the indexed dataset (or share its column layout for the
    /// quasi-identifier).
    pub fn probe_from_data(
        &self,
        dataset: &Dataset,
        data: &[Datum<'_>],
    ) -> Result<Vec<Option<Key>>> {
        self.names
            .iter()
            .zip(data)
            .map(|(name, d)| {
                let column = dataset.column(dataset.column_index(name)?);
                Ok(match column.encode(*d) {
                    Some(v) => probe_key(v),
                    None => Some(Key::Absent),
                })
            })
            .collect()
    }

    /// Fill `scratch.acc` with the rows accepting every observed probe key
    /// (and `scratch.acc_missing` with rows missing on all of them when
    /// `with_missing`). Returns false when the probe has no observed key.
    fn intersect(&self, probe: &[Option<Key>], with_missing: bool, scratch: &mut Scratch) -> bool {
        let Scratch {
            acc,
            acc_missing,
            expand,
        } = scratch;
        let mut first = true;
        for (vi, key) in self.vars.iter().zip(probe) {
            let Some(key) = key else { continue };
            let missing = vi.missing.words();
            let posting = vi.values.get(key);
            let exact: &[u64] = match posting {
                Some(Posting::Dense(d)) => d.words(),
                Some(Posting::Sparse(rows)) => {
                    for &r in rows {
                        expand[r as usize / 64] |= 1 << (r % 64);
                    }
                    expand
                }
                None => expand,
            };
            if first {
                for ((a, e), m) in acc.iter_mut().zip(exact).zip(missing) {
                    *a = e | m;
                }
            } else {
                for ((a, e), m) in acc.iter_mut().zip(exact).zip(missing) {
                    *a &= e | m;
                }
            }
            if with_missing {
                if first {
                    acc_missing.copy_from_slice(missing);
                } else {
                    for (a, m) in acc_missing.iter_mut().zip(missing) {
                        *a &= m;
                    }
                }
            }
            if let Some(Posting::Sparse(rows)) = posting {
                for &r in rows {
                    expand[r as usize / 64] = 0;
                }
            }
            first = false;
        }
        !first
    }

    /// Number of indexed rows matching `probe`, where the probe comes from a
    /// row of the indexed dataset (so it matches itself).
    pub fn count_with(
        &self,
        probe: &[Option<Key>],
        options: MatchOptions,
        scratch: &mut Scratch,
    ) -> usize {
        let strict = options.require_observed_overlap;
        if !self.intersect(probe, strict, scratch) {
            // No observed value: everything matches, or only itself.
            return if strict { 1 } else { self.n_rows };
        }
        let all = popcount(&scratch.acc);
        if strict {
            all - popcount(&scratch.acc_missing)
        } else {
            all
        }
    }

    /// Rows matching an external probe (one not drawn from the indexed data).
    pub fn matching_rows(&self, probe: &[Option<Key>], scratch: &mut Scratch) -> RowSet {
        if !self.intersect(probe, false, scratch) {
            return RowSet::full(self.n_rows);
        }
        RowSet::from_rows(self.n_rows, ones(&scratch.acc))
    }

    /// The only matching row for an external probe, if exactly one matches.
    pub fn unique_match(&self, probe: &[Option<Key>], scratch: &mut Scratch) -> Option<usize> {
        if !self.intersect(probe, false, scratch) {
            return (self.n_rows == 1).then_some(0);
        }
        let mut it = ones(&scratch.acc);
        match (it.next(), it.next()) {
            (Some(r), None) => Some(r),
            _ => None,
        }
    }
}
