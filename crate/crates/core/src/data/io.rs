//! Data set CSV files, model files and relevance-mask files.
//!
//! Model file (text, one record per line):
//!
//! ```text
//! p J
//! w_11 ... w_1J        (p lines, the rows of W)
//! ...
//! b_1 ... b_J
//! ```
//!
//! Values are written with the shortest representation that round-trips, so
//! save followed by load reproduces the matrices bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::model::{Classifier, Dataset};

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    /// A header column named `label` if there is one, else the last column.
    #[default]
    Auto,
    /// 1-based column index.
    Index(usize),
    /// Header name.
    Name(String),
    /// No label column; every column is a feature.
    None,
}

impl std::str::FromStr for LabelColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "auto" => LabelColumn::Auto,
            "none" => LabelColumn::None,
            _ => match s.parse::<usize>() {
                Ok(0) => return Err(Error::InvalidParameter("label column index is 1-based".into())),
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(s.to_string()),
            },
        })
    }
}

/// Parsed CSV contents: features `p x n` and, when present, labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub features: Array2<f64>,
    pub labels: Option<Vec<usize>>,
    pub header: Option<Vec<String>>,
}

impl CsvTable {
    /// Labeled data set; `num_classes` defaults to the largest label.
    pub fn into_dataset(self, num_classes: Option<usize>) -> Result<Dataset> {
        let labels = self
            .labels
            .ok_or_else(|| Error::InvalidData("data has no label column".into()))?;
        match num_classes {
            Some(j) => Dataset::new(self.features, labels, j),
            None => Dataset::with_inferred_classes(self.features, labels),
        }
    }
}

/// Parses comma-separated samples, one per row. The first row is a header
/// when any of its cells is not a number.
pub fn parse_csv<R: Read>(reader: R, label: &LabelColumn) -> Result<CsvTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut header: Option<Vec<String>> = None;
    let mut label_idx: Option<usize> = None;
    let mut width = 0usize;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();

    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(k + 1, |p| p.line() as usize);
            Error::parse(row, 0, e.to_string())
        })?;
        let row = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if width == 0 {
            width = record.len();
            let is_header = record.iter().any(|f| f.parse::<f64>().is_err());
            if is_header {
                header = Some(record.iter().map(str::to_string).collect());
            }
            label_idx = resolve_label(label, header.as_deref(), width)?;
            if is_header {
                continue;
            }
        }
        if record.len() != width {
            return Err(Error::parse(
                row,
                record.len().min(width) + 1,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let mut values = Vec::with_capacity(width);
        for (col, field) in record.iter().enumerate() {
            if Some(col) == label_idx {
                labels.push(parse_label(field, row, col + 1)?);
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(row, col + 1, format!("'{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(Error::parse(row, col + 1, format!("'{field}' is not finite")));
            }
            values.push(v);
        }
        rows.push(values);
    }

    let n = rows.len();
    if n == 0 {
        return Err(Error::InvalidData("no data rows".into()));
    }
    let p = width - usize::from(label_idx.is_some());
    if p == 0 {
        return Err(Error::InvalidData("no feature columns".into()));
    }
    let mut features = Array2::zeros((p, n));
    for (i, r) in rows.iter().enumerate() {
        for (g, &v) in r.iter().enumerate() {
            features[[g, i]] = v;
        }
    }
    Ok(CsvTable {
        features,
        labels: label_idx.map(|_| labels),
        header,
    })
}

fn resolve_label(label: &LabelColumn, header: Option<&[String]>, width: usize) -> Result<Option<usize>> {
    match label {
        LabelColumn::None => Ok(None),
        LabelColumn::Auto => Ok(Some(
            header
                .and_then(|h| h.iter().position(|c| c.eq_ignore_ascii_case("label")))
                .unwrap_or(width - 1),
        )),
        LabelColumn::Index(i) if (1..=width).contains(i) => Ok(Some(i - 1)),
        LabelColumn::Index(i) => Err(Error::InvalidParameter(format!(
            "label column {i} out of range for {width} columns"
        ))),
        LabelColumn::Name(name) => header
            .and_then(|h| h.iter().position(|c| c == name))
            .map(Some)
            .ok_or_else(|| Error::InvalidParameter(format!("no column named '{name}'"))),
    }
}

fn parse_label(field: &str, row: usize, column: usize) -> Result<usize> {
    let label = field
        .parse::<usize>()
        .ok()
        .or_else(|| {
            // integral floats such as "3.0"
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && *v >= 0.0 && *v < 1e9)
                .map(|v| v as usize)
        })
        .ok_or_else(|| Error::parse(row, column, format!("label '{field}' is not an integer")))?;
    if label == 0 {
        return Err(Error::parse(row, column, "labels start at 1"));
    }
    Ok(label)
}

/// Reads a labeled data set from a CSV file.
pub fn load_csv(path: &Path, label: &LabelColumn, num_classes: Option<usize>) -> Result<Dataset> {
    read_csv_table(path, label)?.into_dataset(num_classes)
}

pub fn read_csv_table(path: &Path, label: &LabelColumn) -> Result<CsvTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, label)
}

/// CSV text with header `x1,...,xp,label`.
pub fn format_csv(data: &Dataset) -> String {
    let p = data.num_features();
    let mut out = String::new();
    let names: Vec<String> = (1..=p).map(|g| format!("x{g}")).collect();
    out.push_str(&names.join(","));
    out.push_str(",label\n");
    let x = data.features();
    for (i, &y) in data.labels().iter().enumerate() {
        for g in 0..p {
            let _ = write!(out, "{},", x[[g, i]]);
        }
        let _ = writeln!(out, "{y}");
    }
    out
}

pub fn save_csv(path: &Path, data: &Dataset) -> Result<()> {
    fs::write(path, format_csv(data)).map_err(|e| Error::io(path, e))
}

pub fn format_model(clf: &Classifier) -> String {
    let mut out = format!("{} {}\n", clf.num_features(), clf.num_classes());
    for row in clf.weights.rows() {
        out.push_str(&join_values(row.iter()));
        out.push('\n');
    }
    out.push_str(&join_values(clf.intercept.iter()));
    out.push('\n');
    out
}

fn join_values<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values.map(f64::to_string).collect::<Vec<_>>().join(" ")
}

/// Parses the model file format. Rows and columns in errors are 1-based.
pub fn parse_model(text: &str) -> Result<Classifier> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let (first_row, first) = *lines.first().ok_or_else(|| Error::parse(1, 1, "empty model file"))?;
    let dims: Vec<&str> = first.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(Error::parse(first_row, 1, "expected header 'p J'"));
    }
    let parse_dim = |s: &str, col: usize| {
        s.parse::<usize>()
            .map_err(|_| Error::parse(first_row, col, format!("'{s}' is not a dimension")))
    };
    let p = parse_dim(dims[0], 1)?;
    let j = parse_dim(dims[1], 2)?;
    if p == 0 || j < 2 {
        return Err(Error::parse(
            first_row,
            1,
            format!("invalid dimensions p = {p}, J = {j}"),
        ));
    }
    if lines.len() != p + 2 {
        return Err(Error::parse(
            lines.last().map_or(first_row, |l| l.0),
            1,
            format!("expected {} value lines, found {}", p + 1, lines.len() - 1),
        ));
    }
    let mut weights = Array2::zeros((p, j));
    let mut intercept = Array1::zeros(j);
    for (k, &(row, line)) in lines[1..].iter().enumerate() {
        let values = parse_value_line(line, row, j)?;
        if k < p {
            weights.row_mut(k).assign(&Array1::from(values));
        } else {
            intercept.assign(&Array1::from(values));
        }
    }
    Classifier::new(weights, intercept)
}

fn parse_value_line(line: &str, row: usize, expected: usize) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(expected);
    for (c, tok) in line.split_whitespace().enumerate() {
        if c >= expected {
            return Err(Error::parse(row, c + 1, format!("expected {expected} values")));
        }
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::parse(row, c + 1, format!("'{tok}' is not a number")))?;
        if !v.is_finite() {
            return Err(Error::parse(row, c + 1, format!("'{tok}' is not finite")));
        }
        values.push(v);
    }
    if values.len() != expected {
        return Err(Error::parse(
            row,
            values.len() + 1,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

pub fn save_model(path: &Path, clf: &Classifier) -> Result<()> {
    fs::write(path, format_model(clf)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Classifier> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}

/// Relevance mask as `p` lines of `J` space-separated `0`/`1` flags.
pub fn format_mask(mask: &Array2<bool>) -> String {
    let mut out = String::new();
    for row in mask.rows() {
        let flags: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        out.push_str(&flags.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_mask(text: &str) -> Result<Array2<bool>> {
    let mut rows: Vec<Vec<bool>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut flags = Vec::new();
        for (c, tok) in line.split_whitespace().enumerate() {
            flags.push(match tok {
                "0" => false,
                "1" => true,
                _ => return Err(Error::parse(i + 1, c + 1, format!("'{tok}' is not 0 or 1"))),
            });
        }
        if let Some(first) = rows.first() {
            if first.len() != flags.len() {
                return Err(Error::parse(
                    i + 1,
                    flags.len().min(first.len()) + 1,
                    format!("expected {} flags, found {}", first.len(), flags.len()),
                ));
            }
        }
        rows.push(flags);
    }
    let p = rows.len();
    if p == 0 {
        return Err(Error::parse(1, 1, "empty mask"));
    }
    let j = rows[0].len();
    Ok(Array2::from_shape_fn((p, j), |(g, c)| rows[g][c]))
}

pub fn save_mask(path: &Path, mask: &Array2<bool>) -> Result<()> {
    fs::write(path, format_mask(mask)).map_err(|e| Error::io(path, e))
}

pub fn load_mask(path: &Path) -> Result<Array2<bool>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mask(&text)
}
