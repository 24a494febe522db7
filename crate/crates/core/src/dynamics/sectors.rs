//! Invariant subspaces of a Hamiltonian: the connected components of its
//! sparsity graph in the Fock basis.

use nalgebra::{DMatrix, SymmetricEigen};
use nalgebra_sparse::CsrMatrix;

use crate::fock::{QOperator, C64};

#[derive(Debug, Clone)]
pub struct Sectors {
    sector_of: Vec<u32>,
    position: Vec<u32>,
    indices: Vec<Vec<usize>>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl Sectors {
    /// Components of the graph with an edge wherever `h[i, j] != 0`, ordered
    /// by their smallest basis index.
    pub fn from_operator(h: &QOperator) -> Self {
        let dim = h.dim();
        let mut parent: Vec<usize> = (0..dim).collect();
        for (r, c, _) in h.triplets() {
            if r == c {
                continue;
            }
            let (a, b) = (find(&mut parent, r), find(&mut parent, c));
            if a != b {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                parent[hi] = lo;
            }
        }
        let mut sector_of = vec![u32::MAX; dim];
        let mut position = vec![0u32; dim];
        let mut indices: Vec<Vec<usize>> = Vec::new();
        let mut root_sector = vec![u32::MAX; dim];
        for i in 0..dim {
            let root = find(&mut parent, i);
            if root_sector[root] == u32::MAX {
                root_sector[root] = indices.len() as u32;
                indices.push(Vec::new());
            }
            let s = root_sector[root];
            sector_of[i] = s;
            position[i] = indices[s as usize].len() as u32;
            indices[s as usize].push(i);
        }
        Self {
            sector_of,
            position,
            indices,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn sector_of(&self, basis_index: usize) -> usize {
        self.sector_of[basis_index] as usize
    }

    /// Position of `basis_index` inside its sector.
    pub fn position(&self, basis_index: usize) -> usize {
        self.position[basis_index] as usize
    }

    pub fn indices(&self, sector: usize) -> &[usize] {
        &self.indices[sector]
    }

    pub fn largest(&self) -> usize {
        self.indices.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Restriction of `op` to `sector` in CSR form; entries leaving the sector are dropped.
    pub fn local_csr(&self, op: &CsrMatrix<C64>, sector: usize) -> CsrMatrix<C64> {
        let idx = &self.indices[sector];
        let mut offsets = Vec::with_capacity(idx.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for &i in idx {
            let row = op.row(i);
            let mut entries: Vec<(usize, C64)> = row
                .col_indices()
                .iter()
                .zip(row.values())
                .filter(|(&j, _)| self.sector_of[j] as usize == sector)
                .map(|(&j, &v)| (self.position[j] as usize, v))
                .collect();
            entries.sort_unstable_by_key(|e| e.0);
            for (j, v) in entries {
                cols.push(j);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        CsrMatrix::try_from_csr_data(idx.len(), idx.len(), offsets, cols, vals)
            .expect("sorted in-range columns form a valid CSR pattern")
    }
}

/// Eigendecomposition of a sector block: `H_S = V diag(E) V^dag`.
#[derive(Debug, Clone)]
pub struct SectorEigen {
    pub energies: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl SectorEigen {
    pub fn new(block: DMatrix<C64>) -> Self {
        let n = block.nrows();
        if n == 1 {
            return Self {
                energies: vec![block[(0, 0)].re],
                vectors: DMatrix::from_element(1, 1, C64::new(1.0, 0.0)),
            };
        }
        if block.iter().all(|v| v.im == 0.0) {
            let real = block.map(|v| v.re);
            let eig = SymmetricEigen::new(real);
            Self {
                energies: eig.eigenvalues.iter().copied().collect(),
                vectors: eig.eigenvectors.map(|v| C64::new(v, 0.0)),
            }
        } else {
            let eig = SymmetricEigen::new(block);
            Self {
                energies: eig.eigenvalues.iter().copied().collect(),
                vectors: eig.eigenvectors,
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `V^dag x`.
    pub fn to_eigenbasis(&self, x: &[C64]) -> Vec<C64> {
        let v = &self.vectors;
        (0..self.dim())
            .map(|a| {
                let col = v.column(a);
                col.iter().zip(x).map(|(va, xi)| va.conj() * xi).sum()
            })
            .collect()
    }

    /// `V diag(exp(-i E t)) c`.
    pub fn evolve(&self, coefficients: &[C64], t: f64, out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        for (a, (&e, &c)) in self.energies.iter().zip(coefficients).enumerate() {
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let phase = C64::from_polar(1.0, -e * t) * c;
            for (o, v) in out.iter_mut().zip(self.vectors.column(a).iter()) {
                *o += v * phase;
            }
        }
    }
}
