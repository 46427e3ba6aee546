//! Tabular data: CSV feature loading, random role assignment for real data,
//! and the harness dataset file format.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datagen::{corrupt, standard_normals, train_size, Dataset, Role, Split, SplitSpec};
use crate::error::{Error, Result};
use crate::regression::{Prediction, WeakLabel};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Header names, or zero-based column indices written as text when the
    /// file has no header.
    pub feature_columns: Vec<String>,
    pub target_column: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_true")]
    pub has_header: bool,
    /// Z-score each feature column.
    #[serde(default = "default_true")]
    pub standardize: bool,
}

fn default_delimiter() -> char {
    ','
}

fn default_true() -> bool {
    true
}

impl CsvSchema {
    pub fn new<S: Into<String>>(features: impl IntoIterator<Item = S>, target: impl Into<String>) -> Self {
        Self {
            feature_columns: features.into_iter().map(Into::into).collect(),
            target_column: target.into(),
            delimiter: ',',
            has_header: true,
            standardize: true,
        }
    }

    /// Gas-turbine emission records: the nine process variables as features and
    /// CO as target.
    pub fn gas_turbine() -> Self {
        Self::new(["AT", "AP", "AH", "AFDP", "GTEP", "TIT", "TAT", "TEY", "CDP"], "CO")
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_columns.is_empty() {
            return Err(Error::SchemaMismatch("no feature columns given".into()));
        }
        if self.feature_columns.contains(&self.target_column) {
            return Err(Error::SchemaMismatch(format!(
                "target column {} is also listed as a feature",
                self.target_column
            )));
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::SchemaMismatch(format!("delimiter {:?} is not ASCII", self.delimiter)));
        }
        Ok(())
    }
}

fn resolve_column(name: &str, header: Option<&csv::StringRecord>) -> Result<usize> {
    match header {
        Some(h) => h
            .iter()
            .position(|c| c.trim() == name)
            .ok_or_else(|| Error::SchemaMismatch(format!("column {name} not found"))),
        None => name
            .parse()
            .map_err(|_| Error::SchemaMismatch(format!("column {name} is not an index and the file has no header"))),
    }
}

/// Reads features and target. Rows with a missing or non-numeric field are
/// rejected with their 1-based line number.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<(Array2<f64>, Array1<f64>)> {
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    read_csv(File::open(path)?, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<(Array2<f64>, Array1<f64>)> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(schema.has_header)
        .flexible(true)
        .from_reader(reader);
    let header = if schema.has_header {
        Some(rdr.headers()?.clone())
    } else {
        None
    };
    let feature_idx = schema
        .feature_columns
        .iter()
        .map(|c| resolve_column(c, header.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let target_idx = resolve_column(&schema.target_column, header.as_ref())?;

    let d = feature_idx.len();
    let mut flat = Vec::new();
    let mut y = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).ok_or_else(|| Error::ParseError {
                row: line,
                column: name.to_string(),
                message: "missing field".into(),
            })?;
            let v: f64 = raw.trim().parse().map_err(|_| Error::ParseError {
                row: line,
                column: name.to_string(),
                message: format!("{raw:?} is not a number"),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::ParseError {
                    row: line,
                    column: name.to_string(),
                    message: format!("{raw:?} is not finite"),
                })
            }
        };
        for (&idx, name) in feature_idx.iter().zip(&schema.feature_columns) {
            flat.push(field(idx, name)?);
        }
        y.push(field(target_idx, &schema.target_column)?);
    }
    let n = y.len();
    let mut x = Array2::from_shape_vec((n, d), flat).expect("row-major fill");
    if schema.standardize {
        standardize(&mut x);
    }
    Ok((x, Array1::from(y)))
}

/// Shifts each column to mean 0 and scales it to unit population standard
/// deviation. Constant columns are only centered.
pub fn standardize(x: &mut Array2<f64>) {
    let n = x.nrows();
    if n == 0 {
        return;
    }
    for (k, mut col) in x.columns_mut().into_iter().enumerate() {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        if sd > 0.0 {
            col.mapv_inplace(|v| (v - mean) / sd);
        } else {
            log::warn!("feature column {k} is constant; centering only");
            col.mapv_inplace(|v| v - mean);
        }
    }
}

/// Random (unstratified) roles for real data. `train_fraction` of the points
/// form the training part; labeled and weak counts are
/// `round(fraction · n)` of the whole dataset, drawn from the training part
/// and capped at its size.
pub fn assign_roles(y_true: &[f64], split: &SplitSpec, seed: u64) -> Result<Split> {
    split.validate()?;
    let n = y_true.len();
    if n < 2 {
        return Err(Error::TooFewPoints(format!("role assignment needs n >= 2, got {n}")));
    }
    let n_train = train_size(split.train_fraction, n);
    let n_labeled = ((split.labeled_fraction * n as f64).round() as usize).min(n_train);
    let n_weak = ((split.weak_fraction * n as f64).round() as usize).min(n_train - n_labeled);
    if split.labeled_fraction > 0.0 && n_labeled == 0 {
        return Err(Error::TooFewPoints(format!(
            "labeled fraction {} of {n} points rounds to zero",
            split.labeled_fraction
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(derive_seed(seed, 0)));
    let mut roles = vec![Role::Test; n];
    for (pos, &i) in perm[..n_train].iter().enumerate() {
        roles[i] = if pos < n_labeled {
            Role::Labeled
        } else if pos < n_labeled + n_weak {
            Role::Weak
        } else {
            Role::Unlabeled
        };
    }
    let noise = standard_normals(n, derive_seed(seed, 2));
    Ok(corrupt(y_true, roles, split.delta, split.weak_mean, &noise))
}

/// Writes a dataset with columns `f0..f{d-1}, y_true, a, s, role`. Floats use
/// the shortest representation that reads back to the same value.
pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = data.x.ncols();
    let mut header: Vec<String> = (0..d).map(|k| format!("f{k}")).collect();
    header.extend(["y_true", "a", "s", "role"].map(String::from));
    w.write_record(&header)?;
    for i in 0..data.n() {
        let label = &data.split.labels[i];
        let mut row: Vec<String> = data.x.row(i).iter().map(|v| v.to_string()).collect();
        row.push(data.y_true[i].to_string());
        row.push(label.mean.to_string());
        row.push(label.std.to_string());
        row.push(data.split.roles[i].as_str().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    write_dataset(File::create(path)?, data)
}

/// Reads a file written by [`write_dataset`].
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let d = cols.len().checked_sub(4).ok_or_else(|| {
        Error::SchemaMismatch(format!("dataset needs at least 4 columns, found {}", cols.len()))
    })?;
    for (k, c) in cols[..d].iter().enumerate() {
        if *c != format!("f{k}") {
            return Err(Error::SchemaMismatch(format!("expected column f{k}, found {c}")));
        }
    }
    if cols[d..] != ["y_true", "a", "s", "role"] {
        return Err(Error::SchemaMismatch(format!(
            "expected trailing columns y_true,a,s,role, found {}",
            cols[d..].join(",")
        )));
    }

    let mut flat = Vec::new();
    let mut y = Vec::new();
    let mut labels = Vec::new();
    let mut roles = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let num = |k: usize| -> Result<f64> {
            let raw = &record[k];
            raw.trim().parse().map_err(|_| Error::ParseError {
                row: line,
                column: cols[k].to_string(),
                message: format!("{raw:?} is not a number"),
            })
        };
        for k in 0..d {
            flat.push(num(k)?);
        }
        y.push(num(d)?);
        let (a, s) = (num(d + 1)?, num(d + 2)?);
        let role = Role::parse(record[d + 3].trim()).ok_or_else(|| Error::ParseError {
            row: line,
            column: "role".into(),
            message: format!("unknown role {:?}", &record[d + 3]),
        })?;
        labels.push(match role {
            Role::Labeled => WeakLabel::labeled(a),
            Role::Weak => WeakLabel::weak(a, s),
            Role::Unlabeled | Role::Test => WeakLabel::unlabeled(),
        });
        roles.push(role);
    }
    let n = y.len();
    let observed = y.iter().zip(&roles).filter(|(_, r)| matches!(r, Role::Labeled | Role::Weak));
    let count = observed.clone().count();
    let sigma_y = if count < 2 {
        0.0
    } else {
        let mean = observed.clone().map(|(v, _)| v).sum::<f64>() / count as f64;
        (observed.map(|(v, _)| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
    };
    Ok(Dataset {
        x: Array2::from_shape_vec((n, d), flat).expect("row-major fill"),
        y_true: Array1::from(y),
        split: Split {
            labels,
            roles,
            sigma_y,
        },
    })
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    read_dataset(File::open(path)?)
}

/// Writes `index,a_star,sigma_star` rows for every point.
pub fn write_predictions<W: Write>(writer: W, prediction: &Prediction) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "a_star", "sigma_star"])?;
    for i in 0..prediction.len() {
        w.write_record([
            i.to_string(),
            prediction.a_star[i].to_string(),
            prediction.sigma_star[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_predictions`]. Rows must list indices
/// `0..n` in order.
pub fn read_predictions<R: Read>(reader: R) -> Result<Prediction> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["index", "a_star", "sigma_star"] {
        return Err(Error::SchemaMismatch(format!(
            "expected columns index,a_star,sigma_star, found {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut a = Vec::new();
    let mut sigma = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let num = |k: usize| -> Result<f64> {
            let raw = record.get(k).map(str::trim).unwrap_or("");
            raw.parse().map_err(|_| Error::ParseError {
                row: line,
                column: header[k].to_string(),
                message: format!("{raw:?} is not a number"),
            })
        };
        let index = num(0)?;
        if index != a.len() as f64 {
            return Err(Error::ParseError {
                row: line,
                column: "index".into(),
                message: format!("expected index {}, found {index}", a.len()),
            });
        }
        a.push(num(1)?);
        sigma.push(num(2)?);
    }
    Ok(Prediction {
        a_star: Array1::from(a),
        sigma_star: Array1::from(sigma),
    })
}

pub fn save_predictions(path: &Path, prediction: &Prediction) -> Result<()> {
    write_predictions(File::create(path)?, prediction)
}

pub fn load_predictions(path: &Path) -> Result<Prediction> {
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    read_predictions(File::open(path)?)
}
