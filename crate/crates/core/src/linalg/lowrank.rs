use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::par;

/// Density below which a factor is kept in compressed-row form.
pub const SPARSE_DENSITY_THRESHOLD: f64 = 0.10;

/// A diagonal matrix stored as its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMatrix {
    values: Array1<f64>,
}

impl DiagonalMatrix {
    pub fn new(values: Array1<f64>) -> Self {
        Self { values }
    }

    pub fn from_elem(n: usize, v: f64) -> Self {
        Self {
            values: Array1::from_elem(n, v),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array1<f64> {
        self.values
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0 && v.is_finite())
    }

    /// `self + scale * other`, entrywise.
    pub fn add_scaled(&self, scale: f64, other: &DiagonalMatrix) -> Result<DiagonalMatrix> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch(format!(
                "diagonals of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(Self::new(&self.values + &(scale * &other.values)))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct CsrRows {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrRows {
    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Array2<f64>),
    Sparse(CsrRows),
}

/// An n×m factor `A` standing for the similarity `A Aᵀ`, which is never formed.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    n: usize,
    m: usize,
    storage: Storage,
}

impl LowRankFactor {
    /// Wraps a dense n×m matrix as given (no density heuristic).
    pub fn from_dense(a: Array2<f64>) -> Result<Self> {
        let (n, m) = a.dim();
        if m == 0 {
            return Err(Error::InvalidParameter("low-rank factor needs m >= 1 columns".into()));
        }
        if let Some(((row, col), _)) = a.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite factor entry at ({row}, {col})"
            )));
        }
        Ok(Self {
            n,
            m,
            storage: Storage::Dense(a.as_standard_layout().into_owned()),
        })
    }

    /// Builds a factor from per-row `(column, value)` lists and stores it
    /// sparse when its density is under [`SPARSE_DENSITY_THRESHOLD`], dense
    /// otherwise.
    pub fn from_rows(m: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("low-rank factor needs m >= 1 columns".into()));
        }
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for (i, row) in rows.into_iter().enumerate() {
            for (c, v) in row {
                if c >= m {
                    return Err(Error::DimensionMismatch(format!(
                        "row {i} has column {c} >= m = {m}"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "non-finite factor entry at ({i}, {c})"
                    )));
                }
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        let sparse = Self {
            n,
            m,
            storage: Storage::Sparse(CsrRows { row_ptr, cols, vals }),
        };
        if sparse.density() < SPARSE_DENSITY_THRESHOLD {
            Ok(sparse)
        } else {
            Ok(sparse.into_dense_storage())
        }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.m
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    /// Stored nonzeros (every entry for dense storage).
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(a) => a.len(),
            Storage::Sparse(csr) => csr.vals.len(),
        }
    }

    fn density(&self) -> f64 {
        let total = (self.n * self.m) as f64;
        if total == 0.0 {
            return 0.0;
        }
        match &self.storage {
            Storage::Dense(a) => a.iter().filter(|v| **v != 0.0).count() as f64 / total,
            Storage::Sparse(csr) => csr.vals.iter().filter(|v| **v != 0.0).count() as f64 / total,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match &self.storage {
            Storage::Dense(a) => a.clone(),
            Storage::Sparse(csr) => {
                let mut out = Array2::zeros((self.n, self.m));
                for i in 0..self.n {
                    for (c, v) in csr.row(i) {
                        out[[i, c]] += v;
                    }
                }
                out
            }
        }
    }

    pub fn into_dense_storage(self) -> Self {
        match self.storage {
            Storage::Dense(_) => self,
            Storage::Sparse(_) => Self {
                n: self.n,
                m: self.m,
                storage: Storage::Dense(self.to_dense()),
            },
        }
    }

    pub fn into_sparse_storage(self) -> Self {
        match &self.storage {
            Storage::Sparse(_) => self,
            Storage::Dense(a) => {
                let rows = a
                    .rows()
                    .into_iter()
                    .map(|r| {
                        r.iter()
                            .enumerate()
                            .filter(|(_, v)| **v != 0.0)
                            .map(|(c, v)| (c, *v))
                            .collect::<Vec<_>>()
                    })
                    .collect::<Vec<_>>();
                let mut row_ptr = vec![0];
                let mut cols = Vec::new();
                let mut vals = Vec::new();
                for row in rows {
                    for (c, v) in row {
                        cols.push(c);
                        vals.push(v);
                    }
                    row_ptr.push(cols.len());
                }
                Self {
                    n: self.n,
                    m: self.m,
                    storage: Storage::Sparse(CsrRows { row_ptr, cols, vals }),
                }
            }
        }
    }

    /// Calls `f(column, value)` for the stored entries of row `i`.
    fn for_row<F: FnMut(usize, f64)>(&self, i: usize, mut f: F) {
        match &self.storage {
            Storage::Dense(a) => {
                for (c, &v) in a.row(i).iter().enumerate() {
                    f(c, v);
                }
            }
            Storage::Sparse(csr) => {
                for (c, v) in csr.row(i) {
                    f(c, v);
                }
            }
        }
    }

    fn check_len(&self, what: &str, got: usize, want: usize) -> Result<()> {
        if got != want {
            return Err(Error::DimensionMismatch(format!(
                "{what} has length {got}, expected {want} for a {}x{} factor",
                self.n, self.m
            )));
        }
        Ok(())
    }

    /// `A u` for a length-m vector `u`.
    pub fn matvec(&self, u: &[f64]) -> Result<Array1<f64>> {
        self.check_len("vector", u.len(), self.m)?;
        Ok(Array1::from(par::map_range(self.n, |i| {
            let mut acc = 0.0;
            self.for_row(i, |c, v| acc += v * u[c]);
            acc
        })))
    }

    /// `Aᵀ v` for a length-n vector `v`.
    pub fn t_matvec(&self, v: &[f64]) -> Result<Array1<f64>> {
        self.check_len("vector", v.len(), self.n)?;
        let m = self.m;
        let acc = par::fold_range(
            self.n,
            || vec![0.0; m],
            |mut acc, i| {
                let vi = v[i];
                if vi != 0.0 {
                    self.for_row(i, |c, a| acc[c] += a * vi);
                }
                acc
            },
            |mut x, y| {
                x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
                x
            },
        );
        Ok(Array1::from(acc))
    }

    /// `Aᵀ diag(w) A`, an m×m symmetric matrix.
    pub fn weighted_gram(&self, w: &[f64]) -> Result<Array2<f64>> {
        self.check_len("weights", w.len(), self.n)?;
        let m = self.m;
        let upper = par::fold_range(
            self.n,
            || vec![0.0; m * m],
            |mut acc, i| {
                let wi = w[i];
                if wi == 0.0 {
                    return acc;
                }
                match &self.storage {
                    Storage::Dense(a) => {
                        let row = a.row(i);
                        let row = row.as_slice().expect("standard layout");
                        for (p, &ap) in row.iter().enumerate() {
                            if ap == 0.0 {
                                continue;
                            }
                            let s = wi * ap;
                            let out = &mut acc[p * m + p..(p + 1) * m];
                            for (o, &aq) in out.iter_mut().zip(&row[p..]) {
                                *o += s * aq;
                            }
                        }
                    }
                    Storage::Sparse(csr) => {
                        for (p, ap) in csr.row(i) {
                            let s = wi * ap;
                            for (q, aq) in csr.row(i) {
                                if q >= p {
                                    acc[p * m + q] += s * aq;
                                }
                            }
                        }
                    }
                }
                acc
            },
            |mut x, y| {
                x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
                x
            },
        );
        Ok(Array2::from_shape_fn((m, m), |(p, q)| {
            if p <= q {
                upper[p * m + q]
            } else {
                upper[q * m + p]
            }
        }))
    }
}

/// Degree diagonal of the implicit similarity `A Aᵀ`: `D_ii = (A (Aᵀ 1))_i`,
/// computed in O(nm) without forming the n×n product.
pub fn degree_diagonal(a: &LowRankFactor) -> DiagonalMatrix {
    let ones = vec![1.0; a.nrows()];
    let col_sums = a.t_matvec(&ones).expect("length n by construction");
    let d = a
        .matvec(col_sums.as_slice().expect("contiguous"))
        .expect("length m by construction");
    DiagonalMatrix::new(d)
}
