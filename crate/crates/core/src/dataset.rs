//! Datasets, CSV storage and the corrupted synthetic regression generator.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::textfmt::g17;

/// Minimum number of rows a dataset must hold.
pub const MIN_ROWS: usize = 8;

/// Response given to hard outliers.
pub const HARD_OUTLIER_RESPONSE: f64 = 10000.0;

/// Name of the generator behind [`generate_synthetic`].
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), seeded with seed_from_u64";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset has {0} rows, at least 8 are required")]
    TooFewRows(usize),
    #[error("row count mismatch: x has {x_rows} rows, y has {y_len}, provenance has {prov_len:?}")]
    Shape {
        x_rows: usize,
        y_len: usize,
        prov_len: Option<usize>,
    },
    #[error("invalid synthetic spec: {field}: {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Ground-truth origin of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Informative,
    Hard,
    HeavyTail,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Informative => "inf",
            Provenance::Hard => "hard",
            Provenance::HeavyTail => "heavy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "inf" => Some(Provenance::Informative),
            "hard" => Some(Provenance::Hard),
            "heavy" => Some(Provenance::HeavyTail),
            _ => None,
        }
    }

    pub fn is_outlier(self) -> bool {
        self != Provenance::Informative
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `N` rows of features and responses, with optional per-row provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    provenance: Option<Vec<Provenance>>,
}

impl Dataset {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        provenance: Option<Vec<Provenance>>,
    ) -> Result<Self, DatasetError> {
        let prov_len = provenance.as_ref().map(Vec::len);
        if x.nrows() != y.len() || prov_len.is_some_and(|p| p != y.len()) {
            return Err(DatasetError::Shape {
                x_rows: x.nrows(),
                y_len: y.len(),
                prov_len,
            });
        }
        if y.len() < MIN_ROWS {
            return Err(DatasetError::TooFewRows(y.len()));
        }
        Ok(Self { x, y, provenance })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn provenance(&self) -> Option<&[Provenance]> {
        self.provenance.as_deref()
    }

    /// Features and responses of rows `range` (0-based).
    pub fn rows(&self, range: Range<usize>) -> (DMatrixView<'_, f64>, DVectorView<'_, f64>) {
        let len = range.len();
        (self.x.rows(range.start, len), self.y.rows(range.start, len))
    }

    /// Counts of (hard, heavy-tail) outliers in `range`; `None` without provenance.
    pub fn outlier_counts(&self, range: Range<usize>) -> Option<(usize, usize)> {
        let prov = self.provenance.as_ref()?;
        Some(prov[range].iter().fold((0, 0), |(h, t), p| match p {
            Provenance::Hard => (h + 1, t),
            Provenance::HeavyTail => (h, t + 1),
            Provenance::Informative => (h, t),
        }))
    }
}

/// Values of the nonzero ground-truth coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaValues {
    /// The first `sparsity` coordinates equal 1.
    #[default]
    Ones,
    /// The first `sparsity` coordinates are seeded standard Gaussian draws.
    Gaussian,
}

/// Parameters of the corrupted linear-regression generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub sparsity: usize,
    /// Total outliers, split evenly between hard and heavy-tail rows.
    pub n_outliers: usize,
    pub noise_sd: f64,
    pub seed: u64,
    pub beta: BetaValues,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |field, reason: String| Err(DatasetError::InvalidSpec { field, reason });
        if self.n < MIN_ROWS {
            return bad("n", format!("{} < 8", self.n));
        }
        if self.d == 0 {
            return bad("d", "must be positive".into());
        }
        if self.sparsity > self.d {
            return bad(
                "sparsity",
                format!("{} exceeds d = {}", self.sparsity, self.d),
            );
        }
        if !self.n_outliers.is_multiple_of(2) {
            return bad("n_outliers", format!("{} is odd", self.n_outliers));
        }
        if self.n_outliers >= self.n {
            return bad(
                "n_outliers",
                format!("{} is not below n = {}", self.n_outliers, self.n),
            );
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return bad(
                "noise_sd",
                format!("{} is not a finite nonnegative value", self.noise_sd),
            );
        }
        Ok(())
    }
}

/// Student t with 2 degrees of freedom: `Z / sqrt(chi2_2 / 2)`.
fn student_t2<R: Rng>(rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    z / ((a * a + b * b) / 2.0).sqrt()
}

/// Draws a dataset from [`SyntheticSpec`] and returns it with `beta0`.
///
/// Informative rows: `X ~ N(0, I_d)`, `Y = <X, beta0> + noise_sd * N(0, 1)`.
/// Hard outliers: `X = (1, ..., 1)`, `Y = 10000`. Heavy-tail outliers:
/// `X ~ N(0, I_d)`, `Y = <X, beta0> + t(2)`. Outlier positions are a seeded
/// uniform shuffle. Draw order: beta0 (Gaussian values only), the row-label
/// shuffle, then rows in index order.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Vec<f64>), DatasetError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut beta0 = vec![0.0; spec.d];
    for b in beta0.iter_mut().take(spec.sparsity) {
        *b = match spec.beta {
            BetaValues::Ones => 1.0,
            BetaValues::Gaussian => rng.sample(StandardNormal),
        };
    }

    let half = spec.n_outliers / 2;
    let mut labels = Vec::with_capacity(spec.n);
    labels.extend(std::iter::repeat_n(Provenance::Hard, half));
    labels.extend(std::iter::repeat_n(Provenance::HeavyTail, half));
    labels.extend(std::iter::repeat_n(
        Provenance::Informative,
        spec.n - 2 * half,
    ));
    labels.shuffle(&mut rng);

    let mut x = DMatrix::<f64>::zeros(spec.n, spec.d);
    let mut y = DVector::<f64>::zeros(spec.n);
    for (i, label) in labels.iter().enumerate() {
        if *label == Provenance::Hard {
            x.row_mut(i).fill(1.0);
            y[i] = HARD_OUTLIER_RESPONSE;
            continue;
        }
        let mut signal = 0.0;
        for (j, b) in beta0.iter().enumerate() {
            let v: f64 = rng.sample(StandardNormal);
            x[(i, j)] = v;
            signal += b * v;
        }
        let noise = match label {
            Provenance::Informative => spec.noise_sd * rng.sample::<f64, _>(StandardNormal),
            _ => student_t2(&mut rng),
        };
        y[i] = signal + noise;
    }
    Ok((Dataset::new(x, y, Some(labels))?, beta0))
}

/// Writes `y,x1,...,xd[,provenance]` with 17 significant digits.
pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_csv(data, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_csv<W: Write>(data: &Dataset, out: &mut W) -> Result<(), DatasetError> {
    let mut header = String::from("y");
    for j in 1..=data.dim() {
        header.push_str(&format!(",x{j}"));
    }
    if data.provenance.is_some() {
        header.push_str(",provenance");
    }
    writeln!(out, "{header}")?;
    let mut line = String::new();
    for i in 0..data.len() {
        line.clear();
        line.push_str(&g17(data.y[i]));
        for j in 0..data.dim() {
            line.push(',');
            line.push_str(&g17(data.x[(i, j)]));
        }
        if let Some(p) = &data.provenance {
            line.push(',');
            line.push_str(p[i].as_str());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    read_csv(File::open(path)?)
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Dataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    let parse_err = |line: u64, column: usize, message: String| DatasetError::Parse {
        line,
        column,
        message,
    };

    let mut names: Vec<&str> = header.iter().collect();
    let has_prov = names.last() == Some(&"provenance");
    if has_prov {
        names.pop();
    }
    if names.first() != Some(&"y") {
        return Err(parse_err(1, 1, "header must start with `y`".into()));
    }
    let d = names.len() - 1;
    if d == 0 {
        return Err(parse_err(1, 2, "header has no feature columns".into()));
    }
    for (j, name) in names.iter().enumerate().skip(1) {
        if *name != format!("x{j}") {
            return Err(parse_err(
                1,
                j + 1,
                format!("expected `x{j}`, found `{name}`"),
            ));
        }
    }
    let width = d + 1 + usize::from(has_prov);

    let mut ys = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    let mut prov = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(parse_err(
                line,
                record.len().min(width) + 1,
                format!("row has {} fields, expected {width}", record.len()),
            ));
        }
        for (c, field) in record.iter().take(d + 1).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(line, c + 1, format!("`{field}` is not a number")))?;
            if c == 0 {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
        if has_prov {
            let field = &record[d + 1];
            let p = Provenance::parse(field.trim()).ok_or_else(|| {
                parse_err(
                    line,
                    d + 2,
                    format!("`{field}` is not one of inf|hard|heavy"),
                )
            })?;
            prov.push(p);
        }
    }
    if ys.len() < MIN_ROWS {
        return Err(DatasetError::TooFewRows(ys.len()));
    }
    let x = DMatrix::from_row_slice(ys.len(), d, &xs);
    Dataset::new(x, DVector::from_vec(ys), has_prov.then_some(prov))
}
