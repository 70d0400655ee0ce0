use std::fmt::Write as _;

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

/// Coordinate-format accumulator. Duplicates are summed on conversion.
#[derive(Clone, Debug, Default)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, ..Default::default() }
    }

    #[inline]
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.nrows && c < self.ncols);
        self.rows.push(r);
        self.cols.push(c);
        self.vals.push(v);
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Appends `scale * m` with its block shifted by `(r0, c0)`.
    pub fn add_block(&mut self, m: &CsrMatrix, r0: usize, c0: usize, scale: f64) {
        for i in 0..m.nrows {
            for k in m.indptr[i]..m.indptr[i + 1] {
                self.push(r0 + i, c0 + m.indices[k], scale * m.values[k]);
            }
        }
    }

    /// Appends the transpose of `scale * m` at `(r0, c0)`.
    pub fn add_block_transposed(&mut self, m: &CsrMatrix, r0: usize, c0: usize, scale: f64) {
        for i in 0..m.nrows {
            for k in m.indptr[i]..m.indptr[i + 1] {
                self.push(r0 + m.indices[k], c0 + i, scale * m.values[k]);
            }
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let n = self.nrows;
        let mut count = vec![0usize; n + 1];
        for &r in &self.rows {
            count[r + 1] += 1;
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut cols = vec![0usize; self.len()];
        let mut vals = vec![0.0; self.len()];
        for k in 0..self.len() {
            let r = self.rows[k];
            cols[next[r]] = self.cols[k];
            vals[next[r]] = self.vals[k];
            next[r] += 1;
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(self.len());
        let mut values = Vec::with_capacity(self.len());
        indptr.push(0);
        let mut perm: Vec<usize> = Vec::new();
        for i in 0..n {
            let (a, b) = (count[i], count[i + 1]);
            perm.clear();
            perm.extend(a..b);
            // stable sort keeps the summation order deterministic
            perm.sort_by_key(|&k| cols[k]);
            let mut last = usize::MAX;
            for &k in &perm {
                if cols[k] == last {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    indices.push(cols[k]);
                    values.push(vals[k]);
                    last = cols[k];
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { nrows: n, ncols: self.ncols, indptr, indices, values }
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: vec![], values: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *yi = s;
        }
    }

    /// `y = A^T x`
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for k in self.indptr[i]..self.indptr[i + 1] {
                y[self.indices[k]] += self.values[k] * xi;
            }
        }
        y
    }

    /// Bilinear pairing `test^T A trial`.
    pub fn pair(&self, test: &[f64], trial: &[f64]) -> f64 {
        dot(test, &self.matvec(trial))
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Triplets::new(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                t.push(self.indices[k], i, self.values[k]);
            }
        }
        t.to_csr()
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `a*self + b*other`, same shape.
    pub fn lincomb(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = Triplets::new(self.nrows, self.ncols);
        t.add_block(self, 0, 0, a);
        t.add_block(other, 0, 0, b);
        t.to_csr()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest entry of `|self - self^T|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let d = self.lincomb(1.0, &t, -1.0);
        d.max_abs()
    }

    /// Extracts rows `rows` and columns `cols` (given as index lists).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut cmap = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            cmap[c] = k;
        }
        let mut t = Triplets::new(rows.len(), cols.len());
        for (ri, &r) in rows.iter().enumerate() {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = cmap[self.indices[k]];
                if c != usize::MAX {
                    t.push(ri, c, self.values[k]);
                }
            }
        }
        t.to_csr()
    }

    /// Coordinate text export: header line then `row col value` with 17 significant digits.
    pub fn to_coo_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let _ = writeln!(s, "{} {} {:.16e}", i, self.indices[k], self.values[k]);
            }
        }
        s
    }

    pub fn from_coo_text(text: &str) -> Option<CsrMatrix> {
        let mut lines = text.lines();
        let head: Vec<usize> =
            lines.next()?.split_whitespace().map(|t| t.parse().ok()).collect::<Option<_>>()?;
        if head.len() != 3 {
            return None;
        }
        let mut t = Triplets::new(head[0], head[1]);
        for l in lines {
            let mut it = l.split_whitespace();
            let r: usize = it.next()?.parse().ok()?;
            let c: usize = it.next()?.parse().ok()?;
            let v: f64 = it.next()?.parse().ok()?;
            t.push(r, c, v);
        }
        Some(t.to_csr())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
