//! Truncated bosonic Fock spaces and the operator algebra built on them.
//!
//! A [`SpaceLayout`] fixes the per-mode truncation dimensions and the mode
//! order of a tensor-product space. Mode 0 is the most significant factor,
//! so a basis index is `sum_i n_i * stride_i` with `stride_{last} = 1`.
//! Operators carry the layout they were built against and refuse to mix with
//! operators from a different layout.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Above this total dimension `StorageKind::Auto` picks sparse storage.
pub const SPARSE_THRESHOLD: usize = 1024;

/// Largest imaginary part tolerated (and discarded) in an expectation value.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpaceLayout {
    dims: Vec<usize>,
    strides: Vec<usize>,
    total_dim: usize,
}

impl SpaceLayout {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::InvalidArgument("layout needs at least one mode".into()));
        }
        if let Some(&dim) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidDimension { dim });
        }
        let mut strides = vec![1; dims.len()];
        for i in (0..dims.len() - 1).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let total_dim = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidArgument("total dimension overflows usize".into()))?;
        Ok(Self {
            dims,
            strides,
            total_dim,
        })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn stride(&self, mode: usize) -> usize {
        self.strides[mode]
    }

    /// Flat basis index of the product Fock state `|n_0, n_1, ...>`.
    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.dims.len() {
            return Err(Error::LayoutMismatch(format!(
                "occupation tuple has {} entries, layout has {} modes",
                occupations.len(),
                self.dims.len()
            )));
        }
        let mut index = 0;
        for (i, (&n, &d)) in occupations.iter().zip(&self.dims).enumerate() {
            if n >= d {
                return Err(Error::InvalidArgument(format!(
                    "occupation {n} of mode {i} exceeds truncation {d}"
                )));
            }
            index += n * self.strides[i];
        }
        Ok(index)
    }

    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|&s| {
                let n = index / s;
                index %= s;
                n
            })
            .collect()
    }

    /// Occupation of a single mode in basis state `index`.
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.strides[mode]) % self.dims[mode]
    }

    fn ensure_same(&self, other: &SpaceLayout, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::LayoutMismatch(format!(
                "{what}: {:?} vs {:?}",
                self.dims, other.dims
            )))
        }
    }
}

impl fmt::Display for SpaceLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", dims.join("x"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StorageKind {
    #[default]
    Auto,
    Dense,
    Sparse,
}

impl StorageKind {
    fn sparse_for(self, dim: usize) -> bool {
        match self {
            StorageKind::Auto => dim > SPARSE_THRESHOLD,
            StorageKind::Dense => false,
            StorageKind::Sparse => true,
        }
    }
}

#[derive(Debug, Clone)]
enum Storage {
    Dense(DMatrix<C64>),
    Sparse(CsrMatrix<C64>),
}

/// A complex square matrix on a [`SpaceLayout`], stored dense or sparse.
#[derive(Debug, Clone)]
pub struct QOperator {
    layout: SpaceLayout,
    storage: Storage,
}

impl QOperator {
    /// Builds an operator from `(row, col, value)` entries; duplicates are summed.
    pub fn from_triplets(
        layout: SpaceLayout,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
        kind: StorageKind,
    ) -> Result<Self> {
        let dim = layout.total_dim();
        let storage = if kind.sparse_for(dim) {
            let mut coo = CooMatrix::new(dim, dim);
            for (r, c, v) in triplets {
                check_entry(r, c, dim)?;
                coo.push(r, c, v);
            }
            Storage::Sparse(CsrMatrix::from(&coo))
        } else {
            let mut m = DMatrix::zeros(dim, dim);
            for (r, c, v) in triplets {
                check_entry(r, c, dim)?;
                m[(r, c)] += v;
            }
            Storage::Dense(m)
        };
        Ok(Self { layout, storage })
    }

    pub fn from_dense(layout: SpaceLayout, matrix: DMatrix<C64>) -> Result<Self> {
        let dim = layout.total_dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::LayoutMismatch(format!(
                "matrix is {}x{}, layout {layout} needs {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            layout,
            storage: Storage::Dense(matrix),
        })
    }

    pub fn zeros(layout: SpaceLayout, kind: StorageKind) -> Self {
        Self::from_triplets(layout, std::iter::empty(), kind).expect("empty triplets are valid")
    }

    pub fn identity(layout: SpaceLayout, kind: StorageKind) -> Self {
        let dim = layout.total_dim();
        Self::from_triplets(layout, (0..dim).map(|i| (i, i, C64::new(1.0, 0.0))), kind)
            .expect("diagonal entries are in range")
    }

    /// Diagonal operator with real entries.
    pub fn diagonal(layout: SpaceLayout, diag: &[f64], kind: StorageKind) -> Result<Self> {
        if diag.len() != layout.total_dim() {
            return Err(Error::LayoutMismatch(format!(
                "diagonal has {} entries, layout {layout} has dimension {}",
                diag.len(),
                layout.total_dim()
            )));
        }
        Self::from_triplets(
            layout,
            diag.iter()
                .enumerate()
                .filter(|(_, &d)| d != 0.0)
                .map(|(i, &d)| (i, i, C64::new(d, 0.0))),
            kind,
        )
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn with_storage(self, kind: StorageKind) -> Self {
        let want_sparse = kind.sparse_for(self.dim());
        match (self.storage, want_sparse) {
            (Storage::Dense(m), true) => Self {
                layout: self.layout,
                storage: Storage::Sparse(CsrMatrix::from(&m)),
            },
            (Storage::Sparse(s), false) => Self {
                layout: self.layout,
                storage: Storage::Dense(DMatrix::from(&s)),
            },
            (storage, _) => Self {
                layout: self.layout,
                storage,
            },
        }
    }

    /// Explicitly stored entries (zero values of a dense matrix are skipped).
    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        match &self.storage {
            Storage::Dense(m) => {
                let mut out = Vec::new();
                for c in 0..m.ncols() {
                    for r in 0..m.nrows() {
                        let v = m[(r, c)];
                        if v != C64::new(0.0, 0.0) {
                            out.push((r, c, v));
                        }
                    }
                }
                out
            }
            Storage::Sparse(s) => s.triplet_iter().map(|(r, c, &v)| (r, c, v)).collect(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        match &self.storage {
            Storage::Dense(m) => m[(row, col)],
            Storage::Sparse(s) => s
                .get_entry(row, col)
                .map(|e| e.into_value())
                .unwrap_or_default(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(s) => DMatrix::from(s),
        }
    }

    pub fn to_csr(&self) -> CsrMatrix<C64> {
        match &self.storage {
            Storage::Dense(m) => CsrMatrix::from(m),
            Storage::Sparse(s) => s.clone(),
        }
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(m) => m.iter().filter(|v| **v != C64::new(0.0, 0.0)).count(),
            Storage::Sparse(s) => s.nnz(),
        }
    }

    pub fn storage_kind(&self) -> StorageKind {
        if self.is_sparse() {
            StorageKind::Sparse
        } else {
            StorageKind::Dense
        }
    }

    pub fn adjoint(&self) -> Self {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m.adjoint()),
            Storage::Sparse(s) => {
                let t = s.transpose();
                Storage::Sparse(map_csr_values(t, |v| v.conj()))
            }
        };
        Self {
            layout: self.layout.clone(),
            storage,
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m * factor),
            Storage::Sparse(s) => Storage::Sparse(map_csr_values(s.clone(), |v| v * factor)),
        };
        Self {
            layout: self.layout.clone(),
            storage,
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.layout.ensure_same(&other.layout, "operator sum")?;
        let storage = match (&self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a + b),
            _ => Storage::Sparse(&self.to_csr() + &other.to_csr()),
        };
        Ok(Self {
            layout: self.layout.clone(),
            storage,
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.checked_add(&other.scale_real(-1.0))
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.layout.ensure_same(&other.layout, "operator product")?;
        let storage = match (&self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a * b),
            _ => Storage::Sparse(&self.to_csr() * &other.to_csr()),
        };
        Ok(Self {
            layout: self.layout.clone(),
            storage,
        })
    }

    /// `[self, other] = self * other - other * self`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.checked_mul(other)?
            .checked_sub(&other.checked_mul(self)?)
    }

    pub fn max_abs(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m.iter().fold(0.0, |acc, v| acc.max(v.norm())),
            Storage::Sparse(s) => s.values().iter().fold(0.0, |acc, v| acc.max(v.norm())),
        }
    }

    /// Largest elementwise `|self_ij - other_ij|`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.checked_sub(other)?.max_abs())
    }

    /// Largest elementwise `|O_ij - conj(O_ji)|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => {
                let n = m.nrows();
                let mut worst: f64 = 0.0;
                for i in 0..n {
                    for j in i..n {
                        worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
                    }
                }
                worst
            }
            Storage::Sparse(_) => self
                .max_abs_diff(&self.adjoint())
                .expect("adjoint shares the layout"),
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets()
            .iter()
            .all(|&(r, c, v)| r == c || v == C64::new(0.0, 0.0))
    }

    /// Real parts of the diagonal.
    pub fn real_diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re).collect()
    }

    /// `y = O x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim(), "vector length must match the layout");
        match &self.storage {
            Storage::Dense(m) => {
                for (r, out) in y.iter_mut().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for (c, xc) in x.iter().enumerate() {
                        acc += m[(r, c)] * xc;
                    }
                    *out = acc;
                }
            }
            Storage::Sparse(s) => csr_apply(s, x, y),
        }
    }

    /// Dense restriction `O[rows, cols]` to the given basis indices.
    pub fn submatrix(&self, indices: &[usize]) -> DMatrix<C64> {
        let n = indices.len();
        let mut out = DMatrix::zeros(n, n);
        match &self.storage {
            Storage::Dense(m) => {
                for (a, &i) in indices.iter().enumerate() {
                    for (b, &j) in indices.iter().enumerate() {
                        out[(a, b)] = m[(i, j)];
                    }
                }
            }
            Storage::Sparse(s) => {
                let mut local = std::collections::HashMap::with_capacity(n);
                for (a, &i) in indices.iter().enumerate() {
                    local.insert(i, a);
                }
                for (a, &i) in indices.iter().enumerate() {
                    let row = s.row(i);
                    for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                        if let Some(&b) = local.get(&j) {
                            out[(a, b)] += v;
                        }
                    }
                }
            }
        }
        out
    }
}

fn check_entry(r: usize, c: usize, dim: usize) -> Result<()> {
    if r >= dim || c >= dim {
        Err(Error::InvalidArgument(format!(
            "entry ({r}, {c}) outside a {dim}x{dim} operator"
        )))
    } else {
        Ok(())
    }
}

fn map_csr_values(m: CsrMatrix<C64>, f: impl Fn(C64) -> C64) -> CsrMatrix<C64> {
    let (offsets, cols, mut values) = m.disassemble();
    values.iter_mut().for_each(|v| *v = f(*v));
    CsrMatrix::try_from_csr_data(offsets.len() - 1, offsets.len() - 1, offsets, cols, values)
        .expect("pattern is unchanged")
}

pub(crate) fn csr_apply(s: &CsrMatrix<C64>, x: &[C64], y: &mut [C64]) {
    let offsets = s.row_offsets();
    let cols = s.col_indices();
    let vals = s.values();
    for (r, out) in y.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for k in offsets[r]..offsets[r + 1] {
            acc += vals[k] * x[cols[k]];
        }
        *out = acc;
    }
}

impl Add for &QOperator {
    type Output = QOperator;
    /// Panics on layout mismatch; see [`QOperator::checked_add`].
    fn add(self, rhs: &QOperator) -> QOperator {
        self.checked_add(rhs).expect("operator layouts must match")
    }
}

impl Sub for &QOperator {
    type Output = QOperator;
    fn sub(self, rhs: &QOperator) -> QOperator {
        self.checked_sub(rhs).expect("operator layouts must match")
    }
}

impl Mul for &QOperator {
    type Output = QOperator;
    fn mul(self, rhs: &QOperator) -> QOperator {
        self.checked_mul(rhs).expect("operator layouts must match")
    }
}

impl Neg for &QOperator {
    type Output = QOperator;
    fn neg(self) -> QOperator {
        self.scale_real(-1.0)
    }
}

/// Truncated annihilation operator: `<n-1| a |n> = sqrt(n)`.
pub fn annihilation(dim: usize) -> Result<QOperator> {
    annihilation_with(dim, StorageKind::Auto)
}

pub fn annihilation_with(dim: usize, kind: StorageKind) -> Result<QOperator> {
    let layout = SpaceLayout::single(dim)?;
    QOperator::from_triplets(
        layout,
        (1..dim).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))),
        kind,
    )
}

pub fn creation(dim: usize) -> Result<QOperator> {
    Ok(annihilation(dim)?.adjoint())
}

pub fn creation_with(dim: usize, kind: StorageKind) -> Result<QOperator> {
    Ok(annihilation_with(dim, kind)?.adjoint())
}

/// `diag(0, 1, ..., dim - 1)`.
pub fn number(dim: usize) -> Result<QOperator> {
    number_with(dim, StorageKind::Auto)
}

pub fn number_with(dim: usize, kind: StorageKind) -> Result<QOperator> {
    let layout = SpaceLayout::single(dim)?;
    let diag: Vec<f64> = (0..dim).map(|n| n as f64).collect();
    QOperator::diagonal(layout, &diag, kind)
}

/// Lifts a single-mode operator to `I x ... x op x ... x I` on `layout`.
pub fn embed(op: &QOperator, mode_index: usize, layout: &SpaceLayout) -> Result<QOperator> {
    embed_with(op, mode_index, layout, StorageKind::Auto)
}

pub fn embed_with(
    op: &QOperator,
    mode_index: usize,
    layout: &SpaceLayout,
    kind: StorageKind,
) -> Result<QOperator> {
    if op.layout().n_modes() != 1 {
        return Err(Error::LayoutMismatch(format!(
            "embed expects a single-mode operator, got layout {}",
            op.layout()
        )));
    }
    if mode_index >= layout.n_modes() {
        return Err(Error::LayoutMismatch(format!(
            "mode index {mode_index} out of range for layout {layout}"
        )));
    }
    let d = layout.dims()[mode_index];
    if op.dim() != d {
        return Err(Error::LayoutMismatch(format!(
            "operator dimension {} does not match mode {mode_index} of {layout} (dim {d})",
            op.dim()
        )));
    }
    let inner = layout.stride(mode_index);
    let outer = layout.total_dim() / (d * inner);
    let local = op.triplets();
    let mut triplets = Vec::with_capacity(local.len() * inner * outer);
    for o in 0..outer {
        let base = o * d * inner;
        for &(r, c, v) in &local {
            for i in 0..inner {
                triplets.push((base + r * inner + i, base + c * inner + i, v));
            }
        }
    }
    QOperator::from_triplets(layout.clone(), triplets, kind)
}

/// Number operator of `mode` on the full layout (diagonal).
pub fn mode_number(layout: &SpaceLayout, mode: usize, kind: StorageKind) -> Result<QOperator> {
    if mode >= layout.n_modes() {
        return Err(Error::LayoutMismatch(format!(
            "mode index {mode} out of range for layout {layout}"
        )));
    }
    let diag: Vec<f64> = (0..layout.total_dim())
        .map(|i| layout.occupation(i, mode) as f64)
        .collect();
    QOperator::diagonal(layout.clone(), &diag, kind)
}

/// Normalized pure state.
#[derive(Debug, Clone)]
pub struct StateVector {
    layout: SpaceLayout,
    amplitudes: DVector<C64>,
}

pub const NORM_TOLERANCE: f64 = 1e-9;

impl StateVector {
    pub fn new(layout: SpaceLayout, amplitudes: impl Into<Vec<C64>>) -> Result<Self> {
        let amplitudes = DVector::from_vec(amplitudes.into());
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::LayoutMismatch(format!(
                "state has {} amplitudes, layout {layout} has dimension {}",
                amplitudes.len(),
                layout.total_dim()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "state norm {norm} deviates from 1"
            )));
        }
        Ok(Self { layout, amplitudes })
    }

    /// Normalizes `amplitudes` before construction.
    pub fn normalized(layout: SpaceLayout, amplitudes: impl Into<Vec<C64>>) -> Result<Self> {
        let mut v = DVector::from_vec(amplitudes.into());
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("cannot normalize the zero vector".into()));
        }
        v /= C64::new(norm, 0.0);
        Self::new(layout, v.as_slice().to_vec())
    }

    pub fn basis(layout: SpaceLayout, occupations: &[usize]) -> Result<Self> {
        let index = layout.index_of(occupations)?;
        let mut amps = vec![C64::new(0.0, 0.0); layout.total_dim()];
        amps[index] = C64::new(1.0, 0.0);
        Self::new(layout, amps)
    }

    pub(crate) fn from_raw(layout: SpaceLayout, amplitudes: Vec<C64>) -> Self {
        Self {
            layout,
            amplitudes: DVector::from_vec(amplitudes),
        }
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amplitudes.as_slice()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        self.layout.ensure_same(&other.layout, "fidelity")?;
        Ok(self.amplitudes.dotc(&other.amplitudes).norm_sqr())
    }

    pub fn probability(&self, occupations: &[usize]) -> Result<f64> {
        Ok(self.amplitudes[self.layout.index_of(occupations)?].norm_sqr())
    }
}

#[derive(Debug, Clone)]
pub struct DensityMatrix {
    layout: SpaceLayout,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace (1e-9) and positivity (eigenvalues >= -1e-10).
    pub fn new(layout: SpaceLayout, matrix: DMatrix<C64>) -> Result<Self> {
        let dim = layout.total_dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::LayoutMismatch(format!(
                "density matrix is {}x{}, layout {layout} needs {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let rho = Self { layout, matrix };
        let herm = (&rho.matrix - rho.matrix.adjoint()).camax();
        if herm > 1e-12 {
            return Err(Error::NotHermitian { deviation: herm });
        }
        let trace = rho.trace();
        if (trace - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "density matrix trace {trace} deviates from 1"
            )));
        }
        let min_eig = rho
            .matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        if min_eig < -1e-10 {
            return Err(Error::InvalidArgument(format!(
                "density matrix has negative eigenvalue {min_eig}"
            )));
        }
        Ok(rho)
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let v = &state.amplitudes;
        Self {
            layout: state.layout.clone(),
            matrix: v * v.adjoint(),
        }
    }

    /// Diagonal state with the given basis probabilities.
    pub fn from_diagonal(layout: SpaceLayout, probabilities: &[f64]) -> Result<Self> {
        if probabilities.len() != layout.total_dim() {
            return Err(Error::LayoutMismatch(format!(
                "{} probabilities for layout {layout}",
                probabilities.len()
            )));
        }
        let diag = DVector::from_iterator(
            probabilities.len(),
            probabilities.iter().map(|&p| C64::new(p, 0.0)),
        );
        Self::new(layout, DMatrix::from_diagonal(&diag))
    }

    pub fn maximally_mixed(layout: SpaceLayout) -> Self {
        let dim = layout.total_dim();
        Self {
            layout,
            matrix: DMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0),
        }
    }

    /// Tensor product of single-mode states in mode order.
    pub fn product(factors: &[DensityMatrix]) -> Result<Self> {
        let mut dims = Vec::with_capacity(factors.len());
        let mut matrix = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for f in factors {
            dims.extend_from_slice(f.layout.dims());
            matrix = matrix.kronecker(&f.matrix);
        }
        Self::new(SpaceLayout::new(dims)?, matrix)
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }
}

/// Anything an observable can be averaged over.
pub trait ExpectationTarget {
    fn layout(&self) -> &SpaceLayout;
    /// Unchecked `<O>` including any imaginary residue.
    fn raw_expectation(&self, obs: &QOperator) -> C64;
}

impl ExpectationTarget for StateVector {
    fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    fn raw_expectation(&self, obs: &QOperator) -> C64 {
        let psi = self.amplitudes.as_slice();
        let o_psi = obs.apply(psi);
        psi.iter().zip(&o_psi).map(|(a, b)| a.conj() * b).sum()
    }
}

impl ExpectationTarget for DensityMatrix {
    fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    fn raw_expectation(&self, obs: &QOperator) -> C64 {
        obs.triplets()
            .into_iter()
            .map(|(i, j, v)| v * self.matrix[(j, i)])
            .sum()
    }
}

/// `<psi|O|psi>` or `Tr[O rho]` for a Hermitian observable.
pub fn expectation<S: ExpectationTarget + ?Sized>(obs: &QOperator, state: &S) -> Result<f64> {
    obs.layout().ensure_same(state.layout(), "expectation")?;
    let deviation = obs.hermiticity_deviation();
    if deviation > 1e-12 * obs.max_abs().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let value = state.raw_expectation(obs);
    if value.im.abs() > IMAGINARY_TOLERANCE {
        return Err(Error::ImaginaryResidue {
            residue: value.im.abs(),
        });
    }
    Ok(value.re)
}
