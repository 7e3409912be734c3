//! Typed in-memory respondent × variable tables with first-class missing
//! values, plus CSV ingestion and serialization.
//!
//! Cells are stored column-major. Categorical cells hold a code into a
//! per-column label dictionary built in first-appearance order, so codes are
//! only meaningful inside one [`Dataset`]. Anything that compares rows across
//! datasets goes through [`Datum`], the decoded (label-level) view.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel_prep::BirthMonthEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    Categorical,
    Integer,
    /// Estimated month of birth, encoded as `""`, `"6"` or `"5/6"`.
    BirthMonth,
}

impl VariableKind {
    fn name(self) -> &'static str {
        match self {
            VariableKind::Categorical => "categorical",
            VariableKind::Integer => "integer",
            VariableKind::BirthMonth => "birth_month",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableRole {
    #[default]
    Background,
    Study,
    Derived,
}

fn default_missing_tokens() -> Vec<String> {
    vec![String::new()]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    #[serde(default)]
    pub role: VariableRole,
    /// Raw strings decoded as missing.
    #[serde(default = "default_missing_tokens")]
    pub missing_tokens: Vec<String>,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, kind: VariableKind) -> Self {
        VariableSpec {
            name: name.into(),
            kind,
            role: VariableRole::Background,
            missing_tokens: default_missing_tokens(),
        }
    }

    pub fn with_role(mut self, role: VariableRole) -> Self {
        self.role = role;
        self
    }

    pub fn with_missing_tokens<I, S>(mut self, tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.missing_tokens = tokens.into_iter().map(Into::into).collect();
        self
    }

    fn is_missing_token(&self, raw: &str) -> bool {
        self.missing_tokens.iter().any(|t| t == raw)
    }

    fn missing_repr(&self) -> &str {
        self.missing_tokens
            .first()
            .map(String::as_str)
            .unwrap_or("")
    }
}

fn default_id_column() -> String {
    "id".to_owned()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default = "default_id_column")]
    pub id_column: String,
    pub variables: Vec<VariableSpec>,
}

impl Schema {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        let schema = Schema {
            id_column: default_id_column(),
            variables,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn with_id_column(mut self, id_column: impl Into<String>) -> Self {
        self.id_column = id_column.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for var in &self.variables {
            if !seen.insert(var.name.as_str()) || var.name == self.id_column {
                return Err(Error::DuplicateVariable(var.name.clone()));
            }
        }
        Ok(())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }
}

/// A stored cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    /// Index into the column's label dictionary.
    Code(u32),
    Int(i64),
    /// Never empty; an empty estimate is stored as `Missing`.
    Months(BirthMonthEstimate),
    Missing,
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }
}

/// A decoded cell, comparable across datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Datum<'a> {
    Missing,
    Int(i64),
    Label(&'a str),
    Months(BirthMonthEstimate),
}

impl Datum<'_> {
    pub fn is_missing(&self) -> bool {
        matches!(self, Datum::Missing)
    }
}

impl fmt::Display for Datum<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Datum::Missing => f.write_str("."),
            Datum::Int(v) => write!(f, "{v}"),
            Datum::Label(s) => f.write_str(s),
            Datum::Months(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    spec: VariableSpec,
    labels: Vec<String>,
    lookup: HashMap<String, u32>,
    cells: Vec<Value>,
}

impl Column {
    fn new(spec: VariableSpec) -> Self {
        Column {
            spec,
            labels: Vec::new(),
            lookup: HashMap::new(),
            cells: Vec::new(),
        }
    }

    pub fn spec(&self) -> &VariableSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn kind(&self) -> VariableKind {
        self.spec.kind
    }

    pub fn cells(&self) -> &[Value] {
        &self.cells
    }

    /// Category labels in first-appearance order; `labels()[code]`.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn code_of(&self, label: &str) -> Option<u32> {
        self.lookup.get(label).copied()
    }

    pub fn decode(&self, value: Value) -> Datum<'_> {
        match value {
            Value::Code(c) => Datum::Label(&self.labels[c as usize]),
            Value::Int(v) => Datum::Int(v),
            Value::Months(m) => Datum::Months(m),
            Value::Missing => Datum::Missing,
        }
    }

    /// Translate a decoded datum into this column's stored representation.
    /// Labels unknown to this column yield `None`.
    pub fn encode(&self, datum: Datum<'_>) -> Option<Value> {
        match (self.spec.kind, datum) {
            (_, Datum::Missing) => Some(Value::Missing),
            (VariableKind::Categorical, Datum::Label(l)) => self.code_of(l).map(Value::Code),
            (VariableKind::Integer, Datum::Int(v)) => Some(Value::Int(v)),
            (VariableKind::BirthMonth, Datum::Months(m)) => Some(m.into_value()),
            _ => None,
        }
    }

    fn intern(&mut self, label: &str) -> u32 {
        if let Some(&code) = self.lookup.get(label) {
            return code;
        }
        let code = self.labels.len() as u32;
        self.labels.push(label.to_owned());
        self.lookup.insert(label.to_owned(), code);
        code
    }

    fn push(&mut self, datum: Datum<'_>) -> Result<()> {
        let value = match (self.spec.kind, datum) {
            (_, Datum::Missing) => Value::Missing,
            (VariableKind::Categorical, Datum::Label(l)) => Value::Code(self.intern(l)),
            (VariableKind::Integer, Datum::Int(v)) => Value::Int(v),
            (VariableKind::BirthMonth, Datum::Months(m)) => m.into_value(),
            (kind, _) => {
                return Err(Error::KindMismatch {
                    variable: self.spec.name.clone(),
                    kind: kind.name(),
                })
            }
        };
        self.cells.push(value);
        Ok(())
    }

    fn encode_raw(&self, value: Value) -> String {
        match value {
            Value::Missing => self.spec.missing_repr().to_owned(),
            other => self.decode(other).to_string(),
        }
    }
}

/// Respondents × variables. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    schema: Schema,
    ids: Vec<String>,
    row_of: HashMap<String, usize>,
    columns: Vec<Column>,
}

impl Dataset {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn n_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn respondent_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.row_of.get(id).copied()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &Column {
        &self.columns[index]
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.schema
            .index_of(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_owned()))
    }

    pub fn value(&self, row: usize, col: usize) -> Value {
        self.columns[col].cells[row]
    }

    pub fn datum(&self, row: usize, col: usize) -> Datum<'_> {
        let column = &self.columns[col];
        column.decode(column.cells[row])
    }

    pub fn row(&self, row: usize) -> Vec<Datum<'_>> {
        (0..self.n_vars()).map(|c| self.datum(row, c)).collect()
    }

    /// Restrict to the named variables, in the given order.
    pub fn project<S: AsRef<str>>(&self, variables: &[S]) -> Result<Dataset> {
        let indices = variables
            .iter()
            .map(|v| self.column_index(v.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let schema = Schema {
            id_column: self.schema.id_column.clone(),
            variables: indices
                .iter()
                .map(|&i| self.schema.variables[i].clone())
                .collect(),
        };
        schema.validate()?;
        Ok(Dataset {
            schema,
            ids: self.ids.clone(),
            row_of: self.row_of.clone(),
            columns: indices.iter().map(|&i| self.columns[i].clone()).collect(),
        })
    }

    /// Keep the rows at `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let mut builder = DatasetBuilder::new(self.schema.clone());
        for &r in rows {
            builder
                .push_row(self.ids[r].clone(), self.row(r))
                .expect("rows of a valid dataset are valid");
        }
        builder.finish()
    }

    /// Append a column; `cells` must have one entry per row.
    pub fn with_column(&self, spec: VariableSpec, cells: Vec<Datum<'_>>) -> Result<Dataset> {
        if cells.len() != self.n_rows() {
            return Err(Error::InvalidArgument(format!(
                "column `{}` has {} cells for {} rows",
                spec.name,
                cells.len(),
                self.n_rows()
            )));
        }
        let mut schema = self.schema.clone();
        schema.variables.push(spec.clone());
        schema.validate()?;
        let mut column = Column::new(spec);
        for d in cells {
            column.push(d)?;
        }
        let mut columns = self.columns.clone();
        columns.push(column);
        Ok(Dataset {
            schema,
            ids: self.ids.clone(),
            row_of: self.row_of.clone(),
            columns,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let header = std::iter::once(self.schema.id_column.as_str())
            .chain(self.columns.iter().map(Column::name));
        out.write_record(header)
            .map_err(|e| Error::csv("writing header", e))?;
        for r in 0..self.n_rows() {
            let mut record = Vec::with_capacity(self.n_vars() + 1);
            record.push(self.ids[r].clone());
            record.extend(self.columns.iter().map(|c| c.encode_raw(c.cells[r])));
            out.write_record(&record)
                .map_err(|e| Error::csv("writing row", e))?;
        }
        out.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Row-by-row construction with label interning.
#[derive(Debug)]
pub struct DatasetBuilder {
    schema: Schema,
    ids: Vec<String>,
    row_of: HashMap<String, usize>,
    columns: Vec<Column>,
}

impl DatasetBuilder {
    pub fn new(schema: Schema) -> Self {
        let columns = schema.variables.iter().cloned().map(Column::new).collect();
        DatasetBuilder {
            schema,
            ids: Vec::new(),
            row_of: HashMap::new(),
            columns,
        }
    }

    pub fn push_row(&mut self, id: String, cells: Vec<Datum<'_>>) -> Result<()> {
        if cells.len() != self.columns.len() {
            return Err(Error::InvalidArgument(format!(
                "row `{id}` has {} cells, schema has {} variables",
                cells.len(),
                self.columns.len()
            )));
        }
        if self.row_of.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        // Validate every cell before mutating any column.
        for (column, d) in self.columns.iter().zip(&cells) {
            let ok = matches!(
                (column.kind(), d),
                (_, Datum::Missing)
                    | (VariableKind::Categorical, Datum::Label(_))
                    | (VariableKind::Integer, Datum::Int(_))
                    | (VariableKind::BirthMonth, Datum::Months(_))
            );
            if !ok {
                return Err(Error::KindMismatch {
                    variable: column.name().to_owned(),
                    kind: column.kind().name(),
                });
            }
        }
        for (column, d) in self.columns.iter_mut().zip(cells) {
            column.push(d)?;
        }
        self.row_of.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        Ok(())
    }

    pub fn finish(self) -> Dataset {
        Dataset {
            schema: self.schema,
            ids: self.ids,
            row_of: self.row_of,
            columns: self.columns,
        }
    }
}

/// Read a header-first CSV file, decoding the columns named in `schema`.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, &path.display().to_string())
}

/// As [`load_csv`], from any reader. `source` names the input in errors.
pub fn read_csv<R: Read>(reader: R, schema: &Schema, source: &str) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::csv(source, e))?.clone();
    let position = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn {
                file: source.to_owned(),
                column: name.to_owned(),
            })
    };
    let id_pos = position(&schema.id_column)?;
    let var_pos = schema
        .variables
        .iter()
        .map(|v| position(&v.name))
        .collect::<Result<Vec<_>>>()?;

    let mut builder = DatasetBuilder::new(schema.clone());
    for record in rdr.records() {
        let record = record.map_err(|e| Error::csv(source, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut cells = Vec::with_capacity(var_pos.len());
        for (spec, &pos) in schema.variables.iter().zip(&var_pos) {
            let raw = record.get(pos).unwrap_or("");
            cells.push(parse_cell(spec, raw).ok_or_else(|| {
                let (column, value) = (spec.name.clone(), raw.to_owned());
                let file = source.to_owned();
                match spec.kind {
                    VariableKind::BirthMonth => Error::InvalidBirthMonth {
                        file,
                        line,
                        column,
                        value,
                    },
                    _ => Error::InvalidInteger {
                        file,
                        line,
                        column,
                        value,
                    },
                }
            })?);
        }
        let id = record.get(id_pos).unwrap_or("").to_owned();
        builder.push_row(id, cells)?;
    }
    Ok(builder.finish())
}

fn parse_cell<'a>(spec: &VariableSpec, raw: &'a str) -> Option<Datum<'a>> {
    if spec.is_missing_token(raw) {
        return Some(Datum::Missing);
    }
    match spec.kind {
        VariableKind::Categorical => Some(Datum::Label(raw)),
        VariableKind::Integer => raw.trim().parse().ok().map(Datum::Int),
        VariableKind::BirthMonth => {
            let est: BirthMonthEstimate = raw.parse().ok()?;
            Some(if est.is_empty() {
                Datum::Missing
            } else {
                Datum::Months(est)
            })
        }
    }
}
