//! Block systems and their direct solution.

use crate::error::{Error, Result};
use crate::sparse::{norm, CsrMatrix, DofGroups, SparseLu};

/// Relative residual every saddle solve must reach.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Collects sparse blocks of a square block matrix and merges them row by row.
pub struct BlockBuilder {
    pub sizes: Vec<usize>,
    offsets: Vec<usize>,
    blocks: Vec<(usize, usize, CsrMatrix, f64)>,
}

impl BlockBuilder {
    pub fn new(sizes: &[usize]) -> Self {
        let mut offsets = vec![0];
        for s in sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Self { sizes: sizes.to_vec(), offsets, blocks: Vec::new() }
    }

    pub fn offset(&self, b: usize) -> usize {
        self.offsets[b]
    }

    pub fn n(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Adds `s * m` at block `(bi, bj)`.
    pub fn add(&mut self, bi: usize, bj: usize, m: &CsrMatrix, s: f64) {
        assert_eq!((m.nrows, m.ncols), (self.sizes[bi], self.sizes[bj]), "block ({bi},{bj})");
        self.blocks.push((bi, bj, m.clone(), s));
    }

    /// Adds `s * mᵀ` at block `(bi, bj)`.
    pub fn add_transposed(&mut self, bi: usize, bj: usize, m: &CsrMatrix, s: f64) {
        let t = m.transpose();
        self.add(bi, bj, &t, s);
    }

    /// Dense row `r` at block `(bi, bj)` (block `bi` has one row) and its transpose at `(bj, bi)`.
    pub fn add_row_pair(&mut self, bi: usize, bj: usize, r: &[f64]) {
        let row = CsrMatrix {
            nrows: 1,
            ncols: r.len(),
            indptr: vec![0, r.len()],
            indices: (0..r.len()).collect(),
            values: r.to_vec(),
        };
        self.add(bi, bj, &row, 1.0);
        self.add_transposed(bj, bi, &row, 1.0);
    }

    pub fn build(&self) -> CsrMatrix {
        let n = self.n();
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut row: Vec<(usize, f64)> = Vec::new();
        for (bi, &sz) in self.sizes.iter().enumerate() {
            let mine: Vec<_> = self.blocks.iter().filter(|b| b.0 == bi).collect();
            for r in 0..sz {
                row.clear();
                for (_, bj, m, s) in &mine {
                    let c0 = self.offsets[*bj];
                    let (ci, cv) = m.row(r);
                    row.extend(ci.iter().zip(cv).map(|(&c, &v)| (c0 + c, s * v)));
                }
                row.sort_by_key(|e| e.0);
                let g = self.offsets[bi] + r;
                let mut last = usize::MAX;
                for &(c, v) in &row {
                    if c == last {
                        *values.last_mut().unwrap() += v;
                    } else {
                        indices.push(c);
                        values.push(v);
                        last = c;
                    }
                }
                indptr[g + 1] = indices.len();
            }
        }
        CsrMatrix { nrows: n, ncols: n, indptr, indices, values }
    }
}

/// An assembled block saddle-point system `K x = b`.
pub struct SaddleSystem {
    pub matrix: CsrMatrix,
    pub sizes: Vec<usize>,
    pub groups: DofGroups,
    pub rhs: Vec<f64>,
}

pub struct SaddleFactor {
    pub lu: SparseLu,
    pub sizes: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SaddleSolution {
    pub blocks: Vec<Vec<f64>>,
    pub residual: f64,
}

impl SaddleSystem {
    pub fn factor(&self) -> Result<SaddleFactor> {
        let lu = SparseLu::factorize(&self.matrix, Some(&self.groups))?;
        Ok(SaddleFactor { lu, sizes: self.sizes.clone() })
    }
}

impl SaddleFactor {
    pub fn solve(&self, b: &[f64]) -> Result<SaddleSolution> {
        let x = self.lu.solve(b);
        let residual = if norm(b) == 0.0 { norm(&self.lu.matrix().matvec(&x)) } else { self.lu.residual(&x, b) };
        if !residual.is_finite() || residual > RESIDUAL_TOL {
            return Err(Error::SolverBreakdown(residual));
        }
        Ok(SaddleSolution { blocks: split(&x, &self.sizes), residual })
    }
}

pub fn split(x: &[f64], sizes: &[usize]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut o = 0;
    for &s in sizes {
        out.push(x[o..o + s].to_vec());
        o += s;
    }
    out
}

/// Factorizes and solves once; unknowns come back split by block.
pub fn solve_saddle(sys: &SaddleSystem) -> Result<SaddleSolution> {
    sys.factor()?.solve(&sys.rhs)
}
