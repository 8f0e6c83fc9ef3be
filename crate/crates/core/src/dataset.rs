//! Tabular datasets: CSV loading and saving, row/column selection, and the
//! train-statistics standardization used by the harness.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n×p` inputs, an `n`-vector of targets, and names for both.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub column_names: Vec<String>,
    pub target_name: String,
}

impl Dataset {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        column_names: Vec<String>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if column_names.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                got: column_names.len(),
            });
        }
        Ok(Self {
            x,
            y,
            column_names,
            target_name: target_name.into(),
        })
    }

    /// Columns named `x1..xp` and target `y`.
    pub fn with_default_names(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(x, y, names, "y")
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(rows),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i])),
            column_names: self.column_names.clone(),
            target_name: self.target_name.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            x: self.x.select_columns(cols),
            y: self.y.clone(),
            column_names: cols.iter().map(|&j| self.column_names[j].clone()).collect(),
            target_name: self.target_name.clone(),
        }
    }

    /// Reads a headered CSV; every column except `target` becomes an input.
    pub fn read_csv<R: Read>(reader: R, target: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Data(e.to_string()))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let target_idx = headers
            .iter()
            .position(|h| h == target)
            .ok_or_else(|| Error::Data(format!("target column '{target}' not found")))?;
        let column_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target_idx)
            .map(|(_, h)| h.clone())
            .collect();

        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
            if rec.len() != headers.len() {
                return Err(Error::Data(format!(
                    "row {}: expected {} fields, found {}",
                    row + 1,
                    headers.len(),
                    rec.len()
                )));
            }
            for (col, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Data(format!(
                        "row {}, column '{}': non-numeric value '{}'",
                        row + 1,
                        headers[col],
                        field
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "row {}, column '{}': non-finite value",
                        row + 1,
                        headers[col]
                    )));
                }
                if col == target_idx {
                    ys.push(v);
                } else {
                    xs.push(v);
                }
            }
        }
        let n = ys.len();
        if n == 0 {
            return Err(Error::Data("no data rows".into()));
        }
        let p = column_names.len();
        let x = DMatrix::from_row_slice(n, p, &xs);
        Self::new(x, DVector::from_vec(ys), column_names, target)
    }

    pub fn read_csv_path(path: &Path, target: &str) -> Result<Self> {
        let f =
            std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::read_csv(std::io::BufReader::new(f), target)
    }

    /// Writes inputs followed by the target column. Floats use Rust's
    /// shortest round-trip representation.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header = self.column_names.clone();
        header.push(self.target_name.clone());
        w.write_record(&header)
            .map_err(|e| Error::Io(e.to_string()))?;
        let mut rec = Vec::with_capacity(header.len());
        for i in 0..self.n() {
            rec.clear();
            rec.extend(self.x.row(i).iter().map(|v| v.to_string()));
            rec.push(self.y[i].to_string());
            w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Input standardization and target centering fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x_mean: Vec<f64>,
    pub x_sd: Vec<f64>,
    pub y_mean: f64,
}

impl Standardization {
    /// Column means and (n−1) standard deviations; zero-variance columns keep sd 1.
    pub fn fit(data: &Dataset) -> Self {
        let n = data.n() as f64;
        let mut x_mean = Vec::with_capacity(data.p());
        let mut x_sd = Vec::with_capacity(data.p());
        for col in data.x.column_iter() {
            let m = col.sum() / n;
            let var = if data.n() > 1 {
                col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            x_mean.push(m);
            x_sd.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Self {
            x_mean,
            x_sd,
            y_mean: data.y.sum() / n,
        }
    }

    pub fn transform_x(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.x_mean[j]) / self.x_sd[j]
        })
    }

    pub fn transform(&self, data: &Dataset) -> Dataset {
        Dataset {
            x: self.transform_x(&data.x),
            y: data.y.add_scalar(-self.y_mean),
            column_names: data.column_names.clone(),
            target_name: data.target_name.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            x_mean: cols.iter().map(|&j| self.x_mean[j]).collect(),
            x_sd: cols.iter().map(|&j| self.x_sd[j]).collect(),
            y_mean: self.y_mean,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.5, -3.0, 0.125]);
        let d = Dataset::with_default_names(x, DVector::from_vec(vec![0.1, 0.2])).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "x1,x2,y\n1,2.5,0.1\n-3,0.125,0.2\n"
        );
        let back = Dataset::read_csv(buf.as_slice(), "y").unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn target_may_be_any_column() {
        let csv = "a,target,b\n1,2,3\n4,5,6\n";
        let d = Dataset::read_csv(csv.as_bytes(), "target").unwrap();
        assert_eq!(d.column_names, vec!["a", "b"]);
        assert_eq!(d.y.as_slice(), &[2.0, 5.0]);
        assert_eq!(d.x[(1, 1)], 6.0);
    }

    #[test]
    fn non_numeric_cell_names_location() {
        let csv = "a,y\n1,2\nfoo,3\n";
        let err = Dataset::read_csv(csv.as_bytes(), "y").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("'a'"), "{msg}");
    }

    #[test]
    fn missing_target() {
        assert!(Dataset::read_csv("a,b\n1,2\n".as_bytes(), "y").is_err());
    }

    #[test]
    fn standardization_uses_given_statistics() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let d = Dataset::with_default_names(x, DVector::from_vec(vec![1.0, 2.0, 6.0])).unwrap();
        let s = Standardization::fit(&d);
        assert_eq!(s.x_mean, vec![2.0, 5.0]);
        assert_eq!(s.x_sd, vec![1.0, 1.0]);
        assert_eq!(s.y_mean, 3.0);
        let t = s.transform(&d);
        assert_eq!(t.x.column(0).as_slice(), &[-1.0, 0.0, 1.0]);
        assert_eq!(t.y.as_slice(), &[-2.0, -1.0, 3.0]);
    }
}
