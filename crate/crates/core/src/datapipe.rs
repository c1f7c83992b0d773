//! Dataset ingestion, standardization and seeded splitting.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::tensor_nn::Matrix;

/// Feature matrix plus responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub responses: Vec<f64>,
    pub column_names: Option<Vec<String>>,
    pub source: String,
    /// Rows dropped during ingestion.
    pub rejected_rows: usize,
}

impl Dataset {
    pub fn new(features: Matrix, responses: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if features.rows() != responses.len() {
            return Err(Error::DimensionMismatch {
                context: "Dataset responses",
                expected: features.rows(),
                actual: responses.len(),
            });
        }
        if features.rows() == 0 {
            return Err(Error::EmptyData("dataset has no rows"));
        }
        if features.cols() == 0 {
            return Err(Error::EmptyData("dataset has no feature columns"));
        }
        if !features.is_finite() || responses.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("dataset contains non-finite values".into()));
        }
        Ok(Self {
            features,
            responses,
            column_names: None,
            source: source.into(),
            rejected_rows: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn subset(&self, idx: &[usize], tag: &str) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            responses: idx.iter().map(|&i| self.responses[i]).collect(),
            column_names: self.column_names.clone(),
            source: format!("{}[{tag}]", self.source),
            rejected_rows: 0,
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.trim().to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "null" | "?"
    )
}

/// Reads a comma-separated file with a header line.
///
/// Rows with missing cells (empty, `NA`, `NaN`, `null`, `?`) or the wrong
/// number of fields are dropped and counted. Any other cell that does not
/// parse as a number is an error carrying its location.
pub fn load_csv(path: impl AsRef<Path>, response_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let response_idx = headers
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            line: 1,
            column: response_column.to_owned(),
            reason: "response column not found in header".into(),
        })?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != response_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(Error::EmptyData("no feature columns besides the response"));
    }

    let mut features = Vec::new();
    let mut responses = Vec::new();
    let mut rejected = 0;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() || record.iter().any(is_missing) {
            rejected += 1;
            continue;
        }
        let mut row = Vec::with_capacity(feature_names.len());
        let mut y = f64::NAN;
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_owned(),
                line,
                column: headers[j].clone(),
                reason: format!("non-numeric value {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line,
                    column: headers[j].clone(),
                    reason: format!("non-finite value {cell:?}"),
                });
            }
            if j == response_idx {
                y = v;
            } else {
                row.push(v);
            }
        }
        features.extend(row);
        responses.push(y);
    }
    if responses.is_empty() {
        return Err(Error::EmptyData("no data rows"));
    }
    let n = responses.len();
    let mut ds = Dataset::new(
        Matrix::from_vec(n, feature_names.len(), features)?,
        responses,
        path.display().to_string(),
    )?;
    ds.column_names = Some(feature_names);
    ds.rejected_rows = rejected;
    Ok(ds)
}

/// Writes features followed by the response column.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>, response_column: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let names: Vec<String> = match &data.column_names {
        Some(n) => n.clone(),
        None => (1..=data.dim()).map(|j| format!("x{j}")).collect(),
    };
    let mut header = names;
    header.push(response_column.to_owned());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.x(i).iter().map(|v| format!("{v:?}")).collect();
        rec.push(format!("{:?}", data.responses[i]));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub cal: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// 45 / 35 / 20.
    pub fn standard(seed: u64) -> Self {
        Self {
            train: 0.45,
            cal: 0.35,
            test: 0.20,
            seed,
        }
    }

    /// Split sizes by largest remainder; ties favour train, then cal.
    pub fn sizes(&self, n: usize) -> Result<[usize; 3]> {
        let f = [self.train, self.cal, self.test];
        if f.iter().any(|v| !(*v > 0.0)) || ((f.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::config("split.fractions", "must be positive and sum to 1"));
        }
        let raw: Vec<f64> = f.iter().map(|v| v * n as f64).collect();
        let mut sizes = [0usize; 3];
        for (s, r) in sizes.iter_mut().zip(&raw) {
            // snap values within rounding noise of an integer
            let snapped = if (r - r.round()).abs() < 1e-9 { r.round() } else { r.floor() };
            *s = snapped as usize;
        }
        let mut left = n - sizes.iter().sum::<usize>();
        let mut order = [0usize, 1, 2];
        // stable sort keeps train > cal > test priority on equal remainders
        order.sort_by(|&a, &b| {
            let ra = raw[a] - sizes[a] as f64;
            let rb = raw[b] - sizes[b] as f64;
            rb.partial_cmp(&ra).unwrap()
        });
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            sizes[i] += 1;
            left -= 1;
        }
        if sizes.contains(&0) {
            return Err(Error::config(
                "split.fractions",
                format!("n = {n} leaves an empty split {sizes:?}"),
            ));
        }
        Ok(sizes)
    }
}

/// Index sets of a three-way split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub cal: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    let [a, b, _] = spec.sizes(n)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from_seed(spec.seed));
    Ok(SplitIndices {
        train: idx[..a].to_vec(),
        cal: idx[a..a + b].to_vec(),
        test: idx[a + b..].to_vec(),
    })
}

/// Seeded shuffle followed by contiguous slicing into train / cal / test.
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let s = split_indices(data.len(), spec)?;
    Ok((
        data.subset(&s.train, "train"),
        data.subset(&s.cal, "cal"),
        data.subset(&s.test, "test"),
    ))
}

/// Per-feature affine standardization fitted on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Columns whose standard deviation fell below the floor.
    pub constant: Vec<bool>,
}

const SD_FLOOR: f64 = 1e-12;

impl Standardizer {
    pub fn fit(x: &Matrix) -> Result<Self> {
        let n = x.rows();
        if n == 0 {
            return Err(Error::EmptyData("standardizer fit set"));
        }
        let d = x.cols();
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for i in 0..n {
            for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut constant = vec![false; d];
        let sd = var
            .iter()
            .zip(constant.iter_mut())
            .map(|(v, c)| {
                let sd = (v / n as f64).sqrt();
                if sd < SD_FLOOR * (1.0 + sd) || !sd.is_finite() {
                    *c = true;
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, sd, constant })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "Standardizer::apply",
                expected: self.dim(),
                actual: x.cols(),
            });
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            self.apply_row_in_place(out.row_mut(i));
        }
        Ok(out)
    }

    pub fn apply_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "Standardizer::apply_row",
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let mut v = x.to_vec();
        self.apply_row_in_place(&mut v);
        Ok(v)
    }

    fn apply_row_in_place(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.sd) {
            *v = (*v - m) / s;
        }
    }
}

/// Fits a standardizer on `fit_on`'s features.
pub fn standardize(fit_on: &Dataset) -> Result<Standardizer> {
    Standardizer::fit(&fit_on.features)
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_a_small_fixture_exactly() {
        let f = write("a,y,b\n1.5,10,2\n-3e-2,11,4.25\n7,12.5,-1\n");
        let ds = load_csv(f.path(), "y").unwrap();
        assert_eq!(ds.features.data(), &[1.5, 2.0, -0.03, 4.25, 7.0, -1.0]);
        assert_eq!(ds.responses, vec![10.0, 11.0, 12.5]);
        assert_eq!(ds.column_names.as_deref(), Some(&["a".to_owned(), "b".to_owned()][..]));
        assert_eq!(ds.rejected_rows, 0);
    }

    #[test]
    fn malformed_rows_are_rejected_and_counted() {
        let mut s = String::from("x1,x2,y\n");
        for i in 0..10 {
            if i == 4 {
                s.push_str("1.0,,3.0\n");
            } else {
                s.push_str(&format!("{i},{},{}\n", i * 2, i * 3));
            }
        }
        let ds = load_csv(write(&s).path(), "y").unwrap();
        assert_eq!(ds.len(), 9);
        assert_eq!(ds.rejected_rows, 1);
    }

    #[test]
    fn short_rows_are_rejected() {
        let ds = load_csv(write("x,y\n1,2\n3\n4,5\n").path(), "y").unwrap();
        assert_eq!((ds.len(), ds.rejected_rows), (2, 1));
    }

    #[test]
    fn header_only_file_is_an_error() {
        let err = load_csv(write("x,y\n").path(), "y").unwrap_err();
        assert!(err.to_string().contains("no data rows"));
    }

    #[test]
    fn non_numeric_cell_reports_location() {
        let err = load_csv(write("x,y\n1,2\n3,abc\n").path(), "y").unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_response_column() {
        assert!(matches!(
            load_csv(write("x,y\n1,2\n").path(), "target"),
            Err(Error::Parse { .. })
        ));
        assert!(load_csv("/nonexistent/file.csv", "y").is_err());
    }

    #[test]
    fn largest_remainder_sizes() {
        assert_eq!(SplitSpec::standard(0).sizes(20).unwrap(), [9, 7, 4]);
        let third = SplitSpec {
            train: 1.0 / 3.0,
            cal: 1.0 / 3.0,
            test: 1.0 / 3.0,
            seed: 0,
        };
        assert_eq!(third.sizes(3).unwrap(), [1, 1, 1]);
        assert_eq!(third.sizes(4).unwrap(), [2, 1, 1]);
        assert_eq!(SplitSpec::standard(0).sizes(21).unwrap().iter().sum::<usize>(), 21);
        assert!(SplitSpec::standard(0).sizes(2).is_err());
    }

    #[test]
    fn split_is_seeded() {
        let a = split_indices(50, &SplitSpec::standard(4)).unwrap();
        let b = split_indices(50, &SplitSpec::standard(4)).unwrap();
        let c = split_indices(50, &SplitSpec::standard(5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn standardizer_centers_fit_set() {
        let x = Matrix::from_rows(&[[1.0, 5.0, 2.0], [2.0, 7.0, 2.0], [6.0, -1.0, 2.0]]).unwrap();
        let s = Standardizer::fit(&x).unwrap();
        let z = s.apply(&x).unwrap();
        for j in 0..2 {
            let col = z.column(j);
            let m = col.iter().sum::<f64>() / 3.0;
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 3.0).sqrt();
            assert!(m.abs() < 1e-12);
            assert!((sd - 1.0).abs() < 1e-12);
        }
        assert_eq!(s.constant, vec![false, false, true]);
        assert!(z.column(2).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn standardizer_does_not_leak_test_statistics() {
        let train = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let test = Matrix::from_rows(&[[10.0], [11.0]]).unwrap();
        let s = Standardizer::fit(&train).unwrap();
        let z = s.apply(&test).unwrap();
        let sd = (1.25f64).sqrt();
        assert!((z.get(0, 0) - (10.0 - 1.5) / sd).abs() < 1e-12);
        assert!(z.column(0).iter().sum::<f64>() / 2.0 > 5.0);
    }
}
