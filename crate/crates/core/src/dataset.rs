//! Immutable tabular data model: schema inference, CSV ingestion,
//! validation and group indexing.
//!
//! A [`Dataset`] is a rectangular grid of mixed numeric/categorical
//! [`Value`]s described by a [`Schema`]. Datasets are immutable after
//! construction; every transform returns a new value, which makes all
//! types here safe to share across concurrent readers.
//!
//! CSV ingestion follows RFC 4180 conventions: comma delimiter, mandatory
//! header row, double-quote quoting with doubled quotes for escapes, LF or
//! CRLF line endings, optional trailing newline. Missing (empty) cells are
//! rejected rather than imputed. Numeric parsing accepts integer and
//! decimal literals with optional sign and exponent; anything else makes a
//! cell (and with schema inference, its column) categorical. Category
//! tokens compare byte-wise.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate feature name `{0}`")]
    DuplicateName(String),
    #[error("invalid feature name {0:?}")]
    InvalidName(String),
    #[error("schema must contain at least one feature")]
    EmptySchema,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("cannot group by non-categorical feature `{0}`")]
    NonCategoricalGrouping(String),
    #[error("feature `{feature}` row {row}: {cell:?} is not a finite number")]
    TypeMismatch {
        feature: String,
        row: usize,
        cell: String,
    },
    #[error("feature `{feature}` row {row}: missing value")]
    MissingValue { feature: String, row: usize },
    #[error("row index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("feature `{feature}` row {row}: cell kind does not match schema")]
    KindMismatch { feature: String, row: usize },
    #[error("header [{found}] does not match schema [{expected}]")]
    HeaderMismatch { expected: String, found: String },
    #[error("label vector has {found} entries, dataset has {expected} rows")]
    LabelLength { expected: usize, found: usize },
    #[error("empty label token at row {0}")]
    EmptyLabel(usize),
    #[error("schema sidecar: {0}")]
    Sidecar(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// Kind of a feature column. Fixed once a dataset is constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Numeric => "numeric",
            FeatureKind::Categorical => "categorical",
        }
    }

    pub fn parse(s: &str) -> Result<Self, DatasetError> {
        match s {
            "numeric" => Ok(FeatureKind::Numeric),
            "categorical" => Ok(FeatureKind::Categorical),
            other => Err(DatasetError::Sidecar(format!(
                "unknown feature kind {other:?} (expected \"numeric\" or \"categorical\")"
            ))),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named, typed column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

impl Feature {
    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Self {
        Feature {
            name: name.into(),
            kind,
        }
    }
}

/// Ordered list of features. Order is significant and preserved across
/// serialization; names are unique, non-empty and carry no surrounding
/// whitespace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    features: Vec<Feature>,
}

impl Schema {
    pub fn new(features: Vec<Feature>) -> Result<Self, DatasetError> {
        if features.is_empty() {
            return Err(DatasetError::EmptySchema);
        }
        let mut seen = BTreeSet::new();
        for f in &features {
            if f.name.is_empty() || f.name.trim() != f.name {
                return Err(DatasetError::InvalidName(f.name.clone()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(DatasetError::DuplicateName(f.name.clone()));
            }
        }
        Ok(Schema { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &Feature {
        &self.features[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn kind_of(&self, name: &str) -> Option<FeatureKind> {
        self.index_of(name).map(|i| self.features[i].kind)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }
}

/// A single cell: a finite number or a non-empty UTF-8 token.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Category(String),
}

// Numbers are finite by construction (NaN never enters a dataset), so
// equality is total.
impl Eq for Value {}

impl Value {
    pub fn kind(&self) -> FeatureKind {
        match self {
            Value::Number(_) => FeatureKind::Numeric,
            Value::Category(_) => FeatureKind::Categorical,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            Value::Category(_) => None,
        }
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            Value::Number(_) => None,
            Value::Category(s) => Some(s),
        }
    }

    /// Cell text as written to CSV. Numbers use the shortest decimal
    /// representation that round-trips.
    pub fn render(&self) -> String {
        match self {
            Value::Number(x) => format!("{x}"),
            Value::Category(s) => s.clone(),
        }
    }
}

/// Parses a cell as a finite number; `None` means the token is
/// categorical. Rejects `inf`/`NaN` spellings and surrounding whitespace.
pub fn parse_numeric(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn cell_to_value(
    cell: &str,
    kind: FeatureKind,
    feature: &str,
    row: usize,
) -> Result<Value, DatasetError> {
    if cell.is_empty() {
        return Err(DatasetError::MissingValue {
            feature: feature.to_string(),
            row,
        });
    }
    match kind {
        FeatureKind::Numeric => match parse_numeric(cell) {
            Some(x) => Ok(Value::Number(x)),
            None => Err(DatasetError::TypeMismatch {
                feature: feature.to_string(),
                row,
                cell: cell.to_string(),
            }),
        },
        FeatureKind::Categorical => Ok(Value::Category(cell.to_string())),
    }
}

/// Immutable rectangular table of mixed numeric/categorical values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Vec<Value>>,
}

impl Dataset {
    /// Validates rectangularity, kind agreement with the schema,
    /// finiteness of numbers and non-emptiness of tokens. Datasets must
    /// have at least one row.
    pub fn new(schema: Schema, rows: Vec<Vec<Value>>) -> Result<Self, DatasetError> {
        if rows.is_empty() {
            return Err(DatasetError::EmptyInput("dataset has no rows".to_string()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(DatasetError::RaggedRows {
                    row: i,
                    expected: schema.len(),
                    found: row.len(),
                });
            }
            for (j, cell) in row.iter().enumerate() {
                let feature = schema.feature(j);
                if cell.kind() != feature.kind {
                    return Err(DatasetError::KindMismatch {
                        feature: feature.name.clone(),
                        row: i,
                    });
                }
                match cell {
                    Value::Number(x) if !x.is_finite() => {
                        return Err(DatasetError::TypeMismatch {
                            feature: feature.name.clone(),
                            row: i,
                            cell: format!("{x}"),
                        });
                    }
                    Value::Category(s) if s.is_empty() => {
                        return Err(DatasetError::MissingValue {
                            feature: feature.name.clone(),
                            row: i,
                        });
                    }
                    _ => {}
                }
            }
        }
        Ok(Dataset { schema, rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn row(&self, i: usize) -> &[Value] {
        &self.rows[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Value]> {
        self.rows.iter().map(|r| r.as_slice())
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = &Value> {
        self.rows.iter().map(move |r| &r[j])
    }

    /// Numeric column values, or `None` if the column is categorical.
    pub fn numeric_column(&self, j: usize) -> Option<Vec<f64>> {
        if self.schema.feature(j).kind != FeatureKind::Numeric {
            return None;
        }
        Some(
            self.rows
                .iter()
                .map(|r| r[j].as_number().expect("kind checked at construction"))
                .collect(),
        )
    }

    /// New dataset with the rows at `indices`, in the given order.
    /// Duplicate indices are allowed.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Dataset, DatasetError> {
        if indices.is_empty() {
            return Err(DatasetError::EmptyInput(
                "row selection is empty".to_string(),
            ));
        }
        let mut rows = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_rows() {
                return Err(DatasetError::IndexOutOfRange(i));
            }
            rows.push(self.rows[i].clone());
        }
        Ok(Dataset {
            schema: self.schema.clone(),
            rows,
        })
    }

    /// New dataset without the named feature. The schema must stay
    /// non-empty.
    pub fn drop_feature(&self, name: &str) -> Result<Dataset, DatasetError> {
        let j = self
            .schema
            .index_of(name)
            .ok_or_else(|| DatasetError::UnknownFeature(name.to_string()))?;
        if self.n_features() == 1 {
            return Err(DatasetError::EmptySchema);
        }
        let mut features = self.schema.features.clone();
        features.remove(j);
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.remove(j);
                r
            })
            .collect();
        Ok(Dataset {
            schema: Schema { features },
            rows,
        })
    }

    /// New dataset with column `j` overwritten by `value` in every row.
    /// The value kind must match the column kind.
    pub fn with_column_constant(&self, j: usize, value: &Value) -> Result<Dataset, DatasetError> {
        if j >= self.n_features() {
            return Err(DatasetError::IndexOutOfRange(j));
        }
        if value.kind() != self.schema.feature(j).kind {
            return Err(DatasetError::KindMismatch {
                feature: self.schema.feature(j).name.clone(),
                row: 0,
            });
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r[j] = value.clone();
                r
            })
            .collect();
        Ok(Dataset {
            schema: self.schema.clone(),
            rows,
        })
    }

    /// Serializes to CSV (header plus one record per row, LF-terminated,
    /// quoting only where required).
    pub fn to_csv(&self) -> String {
        let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
        wtr.write_record(self.schema.names())
            .expect("writing to Vec cannot fail");
        for row in &self.rows {
            wtr.write_record(row.iter().map(|v| v.render()))
                .expect("writing to Vec cannot fail");
        }
        String::from_utf8(wtr.into_inner().expect("no partial flush")).expect("valid utf-8")
    }

    /// SHA-256 over a canonical byte encoding of the schema and cells.
    /// Identifies the exact table contents; used to pin precomputed
    /// predictions to the dataset they were produced for.
    pub fn content_digest(&self) -> String {
        let mut hasher = Sha256::new();
        for f in &self.schema.features {
            hasher.update(f.name.as_bytes());
            hasher.update([0xFF, f.kind as u8]);
        }
        for row in &self.rows {
            for cell in row {
                match cell {
                    Value::Number(x) => {
                        // Normalize -0.0 so numerically equal tables hash
                        // identically.
                        let x = if *x == 0.0 { 0.0 } else { *x };
                        hasher.update(*b"N");
                        hasher.update(x.to_bits().to_le_bytes());
                    }
                    Value::Category(s) => {
                        hasher.update(*b"C");
                        hasher.update(s.as_bytes());
                        hasher.update([0xFF]);
                    }
                }
            }
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

/// Label column: one non-empty token per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<String>,
}

impl LabelVector {
    pub fn new(labels: Vec<String>) -> Result<Self, DatasetError> {
        if labels.is_empty() {
            return Err(DatasetError::EmptyInput(
                "label vector is empty".to_string(),
            ));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(DatasetError::EmptyLabel(i));
            }
        }
        Ok(LabelVector { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn as_slice(&self) -> &[String] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|s| s.as_str())
    }

    pub fn distinct_sorted(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.labels.iter().map(|s| s.as_str()).collect();
        set.into_iter().map(|s| s.to_string()).collect()
    }

    /// Labels at `indices`, in order.
    pub fn select(&self, indices: &[usize]) -> Result<LabelVector, DatasetError> {
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(DatasetError::IndexOutOfRange(i));
            }
            labels.push(self.labels[i].clone());
        }
        LabelVector::new(labels)
    }
}

/// Partition of row indices by the tokens of one categorical feature.
/// Groups are disjoint, cover every row, and each index list is strictly
/// increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupIndex {
    feature: String,
    groups: BTreeMap<String, Vec<usize>>,
}

impl GroupIndex {
    pub fn feature(&self) -> &str {
        &self.feature
    }

    pub fn groups(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.groups
    }

    pub fn group_names(&self) -> Vec<&str> {
        self.groups.keys().map(|s| s.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Partitions row indices by the tokens of a categorical feature.
pub fn group_by_feature(d: &Dataset, feature: &str) -> Result<GroupIndex, DatasetError> {
    let j = d
        .schema()
        .index_of(feature)
        .ok_or_else(|| DatasetError::UnknownFeature(feature.to_string()))?;
    if d.schema().feature(j).kind != FeatureKind::Categorical {
        return Err(DatasetError::NonCategoricalGrouping(feature.to_string()));
    }
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, row) in d.rows().enumerate() {
        let token = row[j].as_category().expect("kind checked above");
        groups.entry(token.to_string()).or_default().push(i);
    }
    Ok(GroupIndex {
        feature: feature.to_string(),
        groups,
    })
}

/// Infers a schema from raw string cells: a column is numeric iff every
/// non-empty cell parses as a finite decimal number, otherwise it is
/// categorical. Deterministic and insensitive to row order.
pub fn infer_schema(
    header: &[String],
    sample_rows: &[Vec<String>],
) -> Result<Schema, DatasetError> {
    if header.is_empty() {
        return Err(DatasetError::EmptyInput("header is empty".to_string()));
    }
    if sample_rows.is_empty() {
        return Err(DatasetError::EmptyInput("no sample rows".to_string()));
    }
    for (i, row) in sample_rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(DatasetError::RaggedRows {
                row: i,
                expected: header.len(),
                found: row.len(),
            });
        }
    }
    let features = header
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let numeric = sample_rows
                .iter()
                .map(|r| r[j].as_str())
                .filter(|c| !c.is_empty())
                .all(|c| parse_numeric(c).is_some());
            let kind = if numeric {
                FeatureKind::Numeric
            } else {
                FeatureKind::Categorical
            };
            Feature::new(name.clone(), kind)
        })
        .collect();
    Schema::new(features)
}

/// Header and raw string records of a CSV document, before typing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Raw string values of one column.
    pub fn column(&self, index: usize) -> Vec<String> {
        self.records.iter().map(|r| r[index].clone()).collect()
    }

    /// New table keeping only the named columns, in the given order.
    pub fn project(&self, keep: &[usize]) -> RawTable {
        RawTable {
            header: keep.iter().map(|&j| self.header[j].clone()).collect(),
            records: self
                .records
                .iter()
                .map(|r| keep.iter().map(|&j| r[j].clone()).collect())
                .collect(),
        }
    }
}

/// Reads a CSV document into raw string records, enforcing a header row
/// and rectangularity.
pub fn parse_csv_raw(text: &str) -> Result<RawTable, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(&e))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(DatasetError::EmptyInput("csv has no header".to_string()));
    }
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(&e))?;
        records.push(rec.iter().map(|s| s.to_string()).collect::<Vec<String>>());
    }
    if records.is_empty() {
        return Err(DatasetError::EmptyInput("csv has no data rows".to_string()));
    }
    Ok(RawTable { header, records })
}

fn csv_error(e: &csv::Error) -> DatasetError {
    match e.kind() {
        csv::ErrorKind::UnequalLengths {
            pos,
            expected_len,
            len,
        } => DatasetError::RaggedRows {
            // The reader counts the header as record 0.
            row: pos
                .as_ref()
                .map(|p| p.record() as usize)
                .unwrap_or(1)
                .saturating_sub(1),
            expected: *expected_len as usize,
            found: *len as usize,
        },
        _ => DatasetError::Csv(e.to_string()),
    }
}

/// Types a raw table against `schema`, or against the inferred schema
/// when none is given. With an explicit schema, the header must match the
/// schema names in order.
pub fn dataset_from_raw(raw: &RawTable, schema: Option<&Schema>) -> Result<Dataset, DatasetError> {
    let schema = match schema {
        Some(s) => {
            let expected: Vec<&str> = s.names().collect();
            let found: Vec<&str> = raw.header.iter().map(|h| h.as_str()).collect();
            if expected != found {
                return Err(DatasetError::HeaderMismatch {
                    expected: expected.join(","),
                    found: found.join(","),
                });
            }
            s.clone()
        }
        None => infer_schema(&raw.header, &raw.records)?,
    };
    let mut rows = Vec::with_capacity(raw.records.len());
    for (i, rec) in raw.records.iter().enumerate() {
        if rec.len() != schema.len() {
            return Err(DatasetError::RaggedRows {
                row: i,
                expected: schema.len(),
                found: rec.len(),
            });
        }
        let mut row = Vec::with_capacity(schema.len());
        for (j, cell) in rec.iter().enumerate() {
            let f = schema.feature(j);
            row.push(cell_to_value(cell, f.kind, &f.name, i)?);
        }
        rows.push(row);
    }
    Dataset::new(schema, rows)
}

/// Parses a CSV document into a typed dataset. When `schema` is `None`
/// the column kinds are inferred from the cells.
pub fn parse_csv(text: &str, schema: Option<&Schema>) -> Result<Dataset, DatasetError> {
    let raw = parse_csv_raw(text)?;
    dataset_from_raw(&raw, schema)
}

/// Parses a schema sidecar (a flat TOML table mapping feature name to
/// `"numeric"` or `"categorical"`) against a CSV header. Every header
/// column must have an entry; entries for columns absent from the header
/// are rejected. Feature order comes from the header.
pub fn parse_schema_sidecar(text: &str, header: &[String]) -> Result<Schema, DatasetError> {
    let table: BTreeMap<String, String> =
        toml::from_str(text).map_err(|e| DatasetError::Sidecar(e.to_string()))?;
    for key in table.keys() {
        if !header.iter().any(|h| h == key) {
            return Err(DatasetError::Sidecar(format!(
                "entry `{key}` does not match any csv column"
            )));
        }
    }
    let features = header
        .iter()
        .map(|name| {
            let kind = table
                .get(name)
                .ok_or_else(|| DatasetError::Sidecar(format!("no entry for column `{name}`")))
                .and_then(|s| FeatureKind::parse(s))?;
            Ok(Feature::new(name.clone(), kind))
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    Schema::new(features)
}

/// Renders a schema as sidecar text (one `name = "kind"` line per
/// feature, in schema order).
pub fn schema_sidecar(schema: &Schema) -> String {
    let mut out = String::new();
    for f in schema.features() {
        out.push_str(&format!("{} = \"{}\"\n", toml_key(&f.name), f.kind));
    }
    out
}

fn toml_key(name: &str) -> String {
    let bare = name
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if bare && !name.is_empty() {
        name.to_string()
    } else {
        format!("{name:?}")
    }
}
