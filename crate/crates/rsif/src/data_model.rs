//! Typed in-memory representation of heterogeneous datasets and their
//! on-disk manifest format.
//!
//! A dataset on disk is a directory with a `manifest.json` describing the
//! feature columns, one UTF-8 column file per feature (line `i` holds the
//! value of example `i`), and an optional labels file with one `0`/`1` per
//! line. Loaded datasets are immutable and safe to share across threads.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mass sums may drift from 1.0 by accumulated rounding; anything beyond
/// this is treated as a real violation.
pub const HISTOGRAM_MASS_TOLERANCE: f64 = 1e-9;

/// The closed set of feature kinds a column can declare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// Single real value per example (stored as a vector of dimension 1).
    Numeric,
    /// Fixed-dimension real vector per example.
    Vector,
    /// Arbitrary token per example.
    Categorical,
    /// Weighted point histogram per example.
    Histogram,
    /// Variable-length real sequence per example.
    Timeseries,
    /// Simple undirected graph per example.
    Graph,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeatureKind::Numeric => "numeric",
            FeatureKind::Vector => "vector",
            FeatureKind::Categorical => "categorical",
            FeatureKind::Histogram => "histogram",
            FeatureKind::Timeseries => "timeseries",
            FeatureKind::Graph => "graph",
        };
        f.write_str(s)
    }
}

/// A distribution over real positions: strictly increasing `positions` with
/// nonnegative `masses` summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramValue {
    pub positions: Vec<f64>,
    pub masses: Vec<f64>,
}

impl HistogramValue {
    pub fn new(positions: Vec<f64>, masses: Vec<f64>) -> Result<Self, String> {
        let value = Self { positions, masses };
        match value.check() {
            Some(msg) => Err(msg),
            None => Ok(value),
        }
    }

    /// Returns a description of the first violated invariant, if any.
    pub fn check(&self) -> Option<String> {
        if self.positions.is_empty() {
            return Some("histogram must have at least one bin".into());
        }
        if self.positions.len() != self.masses.len() {
            return Some(format!(
                "histogram has {} positions but {} masses",
                self.positions.len(),
                self.masses.len()
            ));
        }
        if self.positions.iter().any(|p| !p.is_finite()) {
            return Some("histogram positions must be finite".into());
        }
        if self.positions.windows(2).any(|w| w[0] >= w[1]) {
            return Some("histogram positions must be strictly increasing".into());
        }
        if self.masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Some("histogram masses must be finite and nonnegative".into());
        }
        let total: f64 = self.masses.iter().sum();
        if (total - 1.0).abs() > HISTOGRAM_MASS_TOLERANCE {
            return Some(format!("histogram masses sum to {total}, expected 1"));
        }
        None
    }
}

/// A simple undirected graph: edges are stored normalized as `(a, b)` with
/// `a < b`, sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphValue {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

impl GraphValue {
    /// Builds a graph, normalizing edge orientation and dropping duplicate
    /// edges. Self-loops and out-of-range endpoints are rejected.
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, String> {
        if num_nodes == 0 {
            return Err("graph must have at least one node".into());
        }
        let mut normalized = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(format!("self-loop on node {a}"));
            }
            if a >= num_nodes || b >= num_nodes {
                return Err(format!(
                    "edge endpoint out of range: ({a}, {b}) with {num_nodes} nodes"
                ));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        normalized.dedup();
        Ok(Self {
            num_nodes,
            edges: normalized,
        })
    }

    /// Returns a description of the first violated invariant, if any.
    pub fn check(&self) -> Option<String> {
        if self.num_nodes == 0 {
            return Some("graph must have at least one node".into());
        }
        for &(a, b) in &self.edges {
            if a == b {
                return Some(format!("self-loop on node {a}"));
            }
            if a >= self.num_nodes || b >= self.num_nodes {
                return Some(format!(
                    "edge endpoint out of range: ({a}, {b}) with {} nodes",
                    self.num_nodes
                ));
            }
        }
        let unique: BTreeSet<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        if unique.len() != self.edges.len() {
            return Some("duplicate edges".into());
        }
        None
    }

    /// Degree of every node, including isolated ones.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.num_nodes];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }
}

/// An owned feature payload. Numeric values are vectors of dimension 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Vector(Vec<f64>),
    Categorical(String),
    Histogram(HistogramValue),
    TimeSeries(Vec<f64>),
    Graph(GraphValue),
}

impl Value {
    pub fn as_ref(&self) -> ValueRef<'_> {
        match self {
            Value::Vector(v) => ValueRef::Vector(v),
            Value::Categorical(s) => ValueRef::Categorical(s),
            Value::Histogram(h) => ValueRef::Histogram(h),
            Value::TimeSeries(t) => ValueRef::TimeSeries(t),
            Value::Graph(g) => ValueRef::Graph(g),
        }
    }
}

/// A borrowed feature payload.
#[derive(Debug, Clone, Copy)]
pub enum ValueRef<'a> {
    Vector(&'a [f64]),
    Categorical(&'a str),
    Histogram(&'a HistogramValue),
    TimeSeries(&'a [f64]),
    Graph(&'a GraphValue),
}

impl ValueRef<'_> {
    pub fn to_owned_value(&self) -> Value {
        match self {
            ValueRef::Vector(v) => Value::Vector(v.to_vec()),
            ValueRef::Categorical(s) => Value::Categorical((*s).to_string()),
            ValueRef::Histogram(h) => Value::Histogram((*h).clone()),
            ValueRef::TimeSeries(t) => Value::TimeSeries(t.to_vec()),
            ValueRef::Graph(g) => Value::Graph((*g).clone()),
        }
    }
}

/// Kind-homogeneous storage for one column's payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnValues {
    /// Used for both `numeric` (dim 1) and `vector` columns.
    Vector {
        dim: usize,
        rows: Vec<Vec<f64>>,
    },
    Categorical(Vec<String>),
    Histogram(Vec<HistogramValue>),
    TimeSeries(Vec<Vec<f64>>),
    Graph(Vec<GraphValue>),
}

impl ColumnValues {
    pub fn len(&self) -> usize {
        match self {
            ColumnValues::Vector { rows, .. } => rows.len(),
            ColumnValues::Categorical(v) => v.len(),
            ColumnValues::Histogram(v) => v.len(),
            ColumnValues::TimeSeries(v) => v.len(),
            ColumnValues::Graph(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One typed feature column of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub id: String,
    pub name: String,
    pub kind: FeatureKind,
    pub values: ColumnValues,
}

impl FeatureColumn {
    pub fn new(id: impl Into<String>, kind: FeatureKind, values: ColumnValues) -> Self {
        let id = id.into();
        Self {
            name: id.clone(),
            id,
            kind,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Borrow the payload of example `i`.
    ///
    /// Panics if `i` is out of range.
    pub fn value(&self, i: usize) -> ValueRef<'_> {
        match &self.values {
            ColumnValues::Vector { rows, .. } => ValueRef::Vector(&rows[i]),
            ColumnValues::Categorical(v) => ValueRef::Categorical(&v[i]),
            ColumnValues::Histogram(v) => ValueRef::Histogram(&v[i]),
            ColumnValues::TimeSeries(v) => ValueRef::TimeSeries(&v[i]),
            ColumnValues::Graph(v) => ValueRef::Graph(&v[i]),
        }
    }

    /// Vector dimensionality for numeric/vector columns, `None` otherwise.
    pub fn dim(&self) -> Option<usize> {
        match &self.values {
            ColumnValues::Vector { dim, .. } => Some(*dim),
            _ => None,
        }
    }

    /// Copy the rows at `indices` into a new column.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureColumn {
        let values = match &self.values {
            ColumnValues::Vector { dim, rows } => ColumnValues::Vector {
                dim: *dim,
                rows: indices.iter().map(|&i| rows[i].clone()).collect(),
            },
            ColumnValues::Categorical(v) => {
                ColumnValues::Categorical(indices.iter().map(|&i| v[i].clone()).collect())
            }
            ColumnValues::Histogram(v) => {
                ColumnValues::Histogram(indices.iter().map(|&i| v[i].clone()).collect())
            }
            ColumnValues::TimeSeries(v) => {
                ColumnValues::TimeSeries(indices.iter().map(|&i| v[i].clone()).collect())
            }
            ColumnValues::Graph(v) => {
                ColumnValues::Graph(indices.iter().map(|&i| v[i].clone()).collect())
            }
        };
        FeatureColumn {
            id: self.id.clone(),
            name: self.name.clone(),
            kind: self.kind,
            values,
        }
    }
}

/// An immutable collection of typed feature columns plus optional binary
/// outlier labels (`true` = outlier). Labels are only consumed by the
/// evaluation tooling, never by model fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    n: usize,
    columns: Vec<FeatureColumn>,
    labels: Option<Vec<bool>>,
}

impl Dataset {
    /// Builds a dataset, enforcing the structural invariants (equal column
    /// lengths, unique column ids, matching label length). Per-payload
    /// invariants are checked separately by [`validate`].
    pub fn new(
        name: impl Into<String>,
        columns: Vec<FeatureColumn>,
        labels: Option<Vec<bool>>,
    ) -> Result<Self, DataError> {
        if columns.is_empty() {
            return Err(DataError::Shape(
                "dataset must have at least one column".into(),
            ));
        }
        let n = columns[0].len();
        for col in &columns {
            if col.len() != n {
                return Err(DataError::Ragged {
                    column: col.id.clone(),
                    got: col.len(),
                    expected: n,
                });
            }
        }
        let mut seen = BTreeSet::new();
        for col in &columns {
            if !seen.insert(col.id.clone()) {
                return Err(DataError::DuplicateColumn(col.id.clone()));
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(DataError::Shape(format!(
                    "label length mismatch: {} labels for {} examples",
                    labels.len(),
                    n
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            n,
            columns,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn columns(&self) -> &[FeatureColumn] {
        &self.columns
    }

    pub fn column(&self, id: &str) -> Option<&FeatureColumn> {
        self.columns.iter().find(|c| c.id == id)
    }

    pub fn column_index(&self, id: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.id == id)
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    /// Copy the rows at `indices` (labels included) into a new dataset.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            n: indices.len(),
            columns: self
                .columns
                .iter()
                .map(|c| c.select_rows(indices))
                .collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }
}

/// A single invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub column: Option<String>,
    pub row: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.column, self.row) {
            (Some(c), Some(r)) => write!(f, "column {c}, example {r}: {}", self.message),
            (Some(c), None) => write!(f, "column {c}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

fn violation(column: Option<&str>, row: Option<usize>, message: impl Into<String>) -> Violation {
    Violation {
        column: column.map(str::to_string),
        row,
        message: message.into(),
    }
}

/// Checks every type invariant of `dataset` and returns all violations
/// found. An empty result means the dataset is fully valid.
pub fn validate(dataset: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = dataset.n();
    let mut seen = BTreeSet::new();
    for col in dataset.columns() {
        if !seen.insert(col.id.as_str()) {
            out.push(violation(Some(&col.id), None, "duplicate column id"));
        }
        if col.len() != n {
            out.push(violation(
                Some(&col.id),
                None,
                format!("ragged column lengths: {} rows, expected {n}", col.len()),
            ));
        }
        match (&col.kind, &col.values) {
            (FeatureKind::Numeric, ColumnValues::Vector { dim, rows }) => {
                if *dim != 1 {
                    out.push(violation(
                        Some(&col.id),
                        None,
                        "numeric column must have dimension 1",
                    ));
                }
                check_vector_rows(&mut out, col, rows, *dim);
            }
            (FeatureKind::Vector, ColumnValues::Vector { dim, rows }) => {
                check_vector_rows(&mut out, col, rows, *dim);
            }
            (FeatureKind::Categorical, ColumnValues::Categorical(rows)) => {
                for (i, tok) in rows.iter().enumerate() {
                    if tok.is_empty() {
                        out.push(violation(Some(&col.id), Some(i), "empty categorical token"));
                    }
                }
            }
            (FeatureKind::Histogram, ColumnValues::Histogram(rows)) => {
                for (i, h) in rows.iter().enumerate() {
                    if let Some(msg) = h.check() {
                        out.push(violation(Some(&col.id), Some(i), msg));
                    }
                }
            }
            (FeatureKind::Timeseries, ColumnValues::TimeSeries(rows)) => {
                for (i, t) in rows.iter().enumerate() {
                    if t.is_empty() {
                        out.push(violation(
                            Some(&col.id),
                            Some(i),
                            "time series must have at least one sample",
                        ));
                    } else if t.iter().any(|x| !x.is_finite()) {
                        out.push(violation(
                            Some(&col.id),
                            Some(i),
                            "time series samples must be finite",
                        ));
                    }
                }
            }
            (FeatureKind::Graph, ColumnValues::Graph(rows)) => {
                for (i, g) in rows.iter().enumerate() {
                    if let Some(msg) = g.check() {
                        out.push(violation(Some(&col.id), Some(i), msg));
                    }
                }
            }
            (kind, _) => {
                out.push(violation(
                    Some(&col.id),
                    None,
                    format!("payload storage does not match declared kind {kind}"),
                ));
            }
        }
    }
    if let Some(labels) = dataset.labels() {
        if labels.len() != n {
            out.push(violation(
                None,
                None,
                format!(
                    "label length mismatch: {} labels for {n} examples",
                    labels.len()
                ),
            ));
        }
    }
    out
}

fn check_vector_rows(out: &mut Vec<Violation>, col: &FeatureColumn, rows: &[Vec<f64>], dim: usize) {
    if dim == 0 {
        out.push(violation(
            Some(&col.id),
            None,
            "vector dimension must be at least 1",
        ));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            out.push(violation(
                Some(&col.id),
                Some(i),
                format!(
                    "vector of dimension {} in a column of dimension {dim}",
                    row.len()
                ),
            ));
        }
        if row.iter().any(|x| !x.is_finite()) {
            out.push(violation(
                Some(&col.id),
                Some(i),
                "vector entries must be finite",
            ));
        }
    }
}

/// Errors raised while loading or writing a dataset directory.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("column {column}, line {line}: {message}")]
    Parse {
        column: String,
        line: usize,
        message: String,
    },
    #[error("labels file, line {line}: {message}")]
    Labels { line: usize, message: String },
    #[error("ragged column lengths: column {column} has {got} rows, expected {expected}")]
    Ragged {
        column: String,
        got: usize,
        expected: usize,
    },
    #[error("duplicate column id {0}")]
    DuplicateColumn(String),
    #[error("{0}")]
    Shape(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    name: String,
    n: usize,
    columns: Vec<ManifestColumn>,
    labels: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestColumn {
    id: String,
    kind: FeatureKind,
    file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

fn read_to_string(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a dataset directory. `path` may point at the directory itself or
/// directly at its `manifest.json`.
pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    let manifest_path = if path.is_dir() {
        path.join("manifest.json")
    } else {
        path.to_path_buf()
    };
    let base = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let text = read_to_string(&manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| DataError::Manifest {
        path: manifest_path.clone(),
        message: e.to_string(),
    })?;

    let mut columns = Vec::with_capacity(manifest.columns.len());
    for spec in &manifest.columns {
        let file = base.join(&spec.file);
        let text = read_to_string(&file)?;
        let values = parse_column(&spec.id, spec.kind, &text)?;
        if values.len() != manifest.n {
            return Err(DataError::Ragged {
                column: spec.id.clone(),
                got: values.len(),
                expected: manifest.n,
            });
        }
        let mut col = FeatureColumn::new(spec.id.clone(), spec.kind, values);
        if let Some(name) = &spec.name {
            col.name = name.clone();
        }
        columns.push(col);
    }

    let labels = match &manifest.labels {
        Some(file) => {
            let text = read_to_string(&base.join(file))?;
            let labels = parse_labels(&text)?;
            if labels.len() != manifest.n {
                return Err(DataError::Shape(format!(
                    "label length mismatch: {} labels for {} examples",
                    labels.len(),
                    manifest.n
                )));
            }
            Some(labels)
        }
        None => None,
    };

    Dataset::new(manifest.name, columns, labels)
}

fn parse_err(column: &str, line: usize, message: impl Into<String>) -> DataError {
    DataError::Parse {
        column: column.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_finite(column: &str, line: usize, token: &str) -> Result<f64, DataError> {
    let v: f64 = token
        .trim()
        .parse()
        .map_err(|_| parse_err(column, line, format!("cannot parse {token:?} as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(
            column,
            line,
            format!("non-finite value {token:?}"),
        ));
    }
    Ok(v)
}

fn parse_column(id: &str, kind: FeatureKind, text: &str) -> Result<ColumnValues, DataError> {
    let lines: Vec<&str> = text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();
    match kind {
        FeatureKind::Numeric | FeatureKind::Vector => {
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(lines.len());
            let mut dim = 0usize;
            for (i, line) in lines.iter().enumerate() {
                let no = i + 1;
                if line.trim().is_empty() {
                    return Err(parse_err(id, no, "missing value"));
                }
                let row: Vec<f64> = line
                    .split(',')
                    .map(|tok| parse_finite(id, no, tok))
                    .collect::<Result<_, _>>()?;
                if kind == FeatureKind::Numeric && row.len() != 1 {
                    return Err(parse_err(
                        id,
                        no,
                        "numeric column expects exactly one value per line",
                    ));
                }
                if i == 0 {
                    dim = row.len();
                } else if row.len() != dim {
                    return Err(parse_err(
                        id,
                        no,
                        format!(
                            "vector of dimension {} in a column of dimension {dim}",
                            row.len()
                        ),
                    ));
                }
                rows.push(row);
            }
            Ok(ColumnValues::Vector { dim, rows })
        }
        FeatureKind::Categorical => {
            let mut rows = Vec::with_capacity(lines.len());
            for (i, line) in lines.iter().enumerate() {
                if line.is_empty() {
                    return Err(parse_err(id, i + 1, "missing value"));
                }
                rows.push((*line).to_string());
            }
            Ok(ColumnValues::Categorical(rows))
        }
        FeatureKind::Histogram => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Line {
                positions: Vec<f64>,
                masses: Vec<f64>,
            }
            let mut rows = Vec::with_capacity(lines.len());
            for (i, line) in lines.iter().enumerate() {
                let no = i + 1;
                let parsed: Line =
                    serde_json::from_str(line).map_err(|e| parse_err(id, no, e.to_string()))?;
                let h = HistogramValue::new(parsed.positions, parsed.masses)
                    .map_err(|msg| parse_err(id, no, msg))?;
                rows.push(h);
            }
            Ok(ColumnValues::Histogram(rows))
        }
        FeatureKind::Timeseries => {
            let mut rows = Vec::with_capacity(lines.len());
            for (i, line) in lines.iter().enumerate() {
                let no = i + 1;
                if line.trim().is_empty() {
                    return Err(parse_err(id, no, "missing value"));
                }
                let samples: Vec<f64> = line
                    .split(',')
                    .map(|tok| parse_finite(id, no, tok))
                    .collect::<Result<_, _>>()?;
                rows.push(samples);
            }
            Ok(ColumnValues::TimeSeries(rows))
        }
        FeatureKind::Graph => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Line {
                num_nodes: usize,
                edges: Vec<(usize, usize)>,
            }
            let mut rows = Vec::with_capacity(lines.len());
            for (i, line) in lines.iter().enumerate() {
                let no = i + 1;
                let parsed: Line =
                    serde_json::from_str(line).map_err(|e| parse_err(id, no, e.to_string()))?;
                let g = GraphValue::new(parsed.num_nodes, parsed.edges)
                    .map_err(|msg| parse_err(id, no, msg))?;
                rows.push(g);
            }
            Ok(ColumnValues::Graph(rows))
        }
    }
}

fn parse_labels(text: &str) -> Result<Vec<bool>, DataError> {
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        match line.trim() {
            "0" => labels.push(false),
            "1" => labels.push(true),
            other => {
                return Err(DataError::Labels {
                    line: i + 1,
                    message: format!("expected 0 or 1, found {other:?}"),
                })
            }
        }
    }
    Ok(labels)
}

fn checked_file_name(id: &str) -> Result<String, DataError> {
    if id.is_empty()
        || !id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
    {
        return Err(DataError::Shape(format!(
            "column id {id:?} cannot be used as a file name (allowed: ascii alphanumerics, '_', '-', '.')"
        )));
    }
    Ok(format!("{id}.txt"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), DataError> {
    fs::write(path, contents).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `dataset` into `dir` in the manifest format. The output is
/// deterministic, so identical datasets produce byte-identical files.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;

    let mut manifest_columns = Vec::with_capacity(dataset.columns().len());
    for col in dataset.columns() {
        let file = checked_file_name(&col.id)?;
        write_file(&dir.join(&file), &render_column(col)?)?;
        manifest_columns.push(ManifestColumn {
            id: col.id.clone(),
            kind: col.kind,
            file,
            name: (col.name != col.id).then(|| col.name.clone()),
        });
    }

    let labels_file = match dataset.labels() {
        Some(labels) => {
            let mut text = String::with_capacity(labels.len() * 2);
            for &l in labels {
                text.push(if l { '1' } else { '0' });
                text.push('\n');
            }
            write_file(&dir.join("labels.txt"), &text)?;
            Some("labels.txt".to_string())
        }
        None => None,
    };

    let manifest = Manifest {
        name: dataset.name().to_string(),
        n: dataset.n(),
        columns: manifest_columns,
        labels: labels_file,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    write_file(&dir.join("manifest.json"), &format!("{text}\n"))
}

fn join_floats(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&v.to_string());
    }
    s
}

fn render_column(col: &FeatureColumn) -> Result<String, DataError> {
    let mut text = String::new();
    match &col.values {
        ColumnValues::Vector { rows, .. } => {
            for row in rows {
                text.push_str(&join_floats(row));
                text.push('\n');
            }
        }
        ColumnValues::Categorical(rows) => {
            for tok in rows {
                if tok.contains('\n') || tok.contains('\r') {
                    return Err(DataError::Shape(format!(
                        "categorical token in column {} contains a line break",
                        col.id
                    )));
                }
                text.push_str(tok);
                text.push('\n');
            }
        }
        ColumnValues::Histogram(rows) => {
            for h in rows {
                text.push_str(&serde_json::to_string(h).expect("histogram serialization"));
                text.push('\n');
            }
        }
        ColumnValues::TimeSeries(rows) => {
            for t in rows {
                text.push_str(&join_floats(t));
                text.push('\n');
            }
        }
        ColumnValues::Graph(rows) => {
            for g in rows {
                text.push_str(&serde_json::to_string(g).expect("graph serialization"));
                text.push('\n');
            }
        }
    }
    Ok(text)
}
