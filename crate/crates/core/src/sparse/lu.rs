//! Multifrontal sparse LU with nested-dissection ordering.
//!
//! Fronts are dense column-major blocks. Pivoting is threshold partial pivoting
//! restricted to fully summed rows; columns that fail the threshold are delayed
//! to the parent front. This keeps saddle-point systems with zero pressure
//! blocks factorizable without any symmetric ordering assumption.

use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::solve_unit_lower_triangular_in_place;
use faer::{Accum, MatMut, MatRef, Par};

use super::csr::{norm, CsrMatrix};
use crate::error::SolverError;

/// Groups of unknowns that share a location (e.g. all components at one mesh node).
/// Groups listed in `root` are eliminated last (e.g. a dense multiplier row).
#[derive(Clone, Debug)]
pub struct DofGroups {
    pub group_of: Vec<usize>,
    pub coords: Vec<[f64; 3]>,
    pub root: Vec<usize>,
}

impl DofGroups {
    /// One group per unknown, no geometry: the ordering falls back to graph bisection.
    pub fn trivial(n: usize) -> Self {
        Self { group_of: (0..n).collect(), coords: vec![], root: vec![] }
    }

    pub fn n_groups(&self) -> usize {
        self.group_of.iter().map(|&g| g + 1).max().unwrap_or(0).max(self.coords.len())
    }
}

const LEAF_DOFS: usize = 160;
const PIVOT_THRESHOLD: f64 = 0.01;
const BLOCK: usize = 48;

struct Node {
    vars: Vec<usize>,
    children: Vec<usize>,
}

struct FrontFactor {
    rows: Vec<usize>,
    cols: Vec<usize>,
    k: usize,
    /// m x k: unit-lower L11 (strict lower part), U11 upper part, L21 below
    lpanel: Vec<f64>,
    /// k x (m - k), column-major
    u12: Vec<f64>,
}

struct Cb {
    rows: Vec<usize>,
    cols: Vec<usize>,
    mat: Vec<f64>,
}

pub struct SparseLu {
    n: usize,
    fronts: Vec<FrontFactor>,
    matrix: CsrMatrix,
    pub stats: LuStats,
}

#[derive(Clone, Debug, Default)]
pub struct LuStats {
    pub n: usize,
    pub factor_entries: usize,
    pub max_front: usize,
    pub delayed: usize,
    pub flops: f64,
}

impl SparseLu {
    pub fn factorize(a: &CsrMatrix, groups: Option<&DofGroups>) -> Result<Self, SolverError> {
        if a.nrows != a.ncols {
            return Err(SolverError::Shape(format!("{}x{} is not square", a.nrows, a.ncols)));
        }
        let n = a.nrows;
        let adj = symmetric_pattern(a);
        let tree = match groups {
            Some(g) if !g.coords.is_empty() => dissect_geometric(&adj, g),
            Some(g) => dissect_graph(&adj, g),
            None => dissect_graph(&adj, &DofGroups::trivial(n)),
        };
        factor_numeric(a, &adj, tree)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` with two rounds of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.solve_raw(b);
        let bn = norm(b).max(f64::MIN_POSITIVE);
        for _ in 0..2 {
            let ax = self.matrix.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            if norm(&r) <= 1e-15 * bn {
                break;
            }
            let d = self.solve_raw(&r);
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += di;
            }
        }
        x
    }

    /// Relative residual `|b - A x| / |b|`.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.matrix.matvec(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        norm(&r) / norm(b).max(f64::MIN_POSITIVE)
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// One forward/backward substitution, no refinement.
    pub fn solve_raw(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut w = b.to_vec();
        let mut tmp = Vec::new();
        for f in &self.fronts {
            let m = f.rows.len();
            let k = f.k;
            tmp.clear();
            tmp.extend(f.rows[..k].iter().map(|&r| w[r]));
            for j in 0..k {
                let yj = tmp[j];
                if yj == 0.0 {
                    continue;
                }
                let col = &f.lpanel[j * m..(j + 1) * m];
                for i in j + 1..k {
                    tmp[i] -= col[i] * yj;
                }
                for i in k..m {
                    w[f.rows[i]] -= col[i] * yj;
                }
            }
            for (i, &r) in f.rows[..k].iter().enumerate() {
                w[r] = tmp[i];
            }
        }
        let mut x = vec![0.0; self.n];
        for f in self.fronts.iter().rev() {
            let m = f.rows.len();
            let k = f.k;
            tmp.clear();
            tmp.extend(f.rows[..k].iter().map(|&r| w[r]));
            for j in 0..m - k {
                let xj = x[f.cols[k + j]];
                if xj == 0.0 {
                    continue;
                }
                let col = &f.u12[j * k..(j + 1) * k];
                for i in 0..k {
                    tmp[i] -= col[i] * xj;
                }
            }
            for j in (0..k).rev() {
                let col = &f.lpanel[j * m..(j + 1) * m];
                let xj = tmp[j] / col[j];
                tmp[j] = xj;
                for i in 0..j {
                    tmp[i] -= col[i] * xj;
                }
            }
            for (i, &c) in f.cols[..k].iter().enumerate() {
                x[c] = tmp[i];
            }
        }
        x
    }
}

/// Symmetrized sparsity pattern without the diagonal.
fn symmetric_pattern(a: &CsrMatrix) -> CsrMatrix {
    let n = a.nrows;
    let mut deg = vec![0usize; n + 1];
    for i in 0..n {
        for &j in &a.indices[a.indptr[i]..a.indptr[i + 1]] {
            if i != j {
                deg[i + 1] += 1;
                deg[j + 1] += 1;
            }
        }
    }
    for i in 0..n {
        deg[i + 1] += deg[i];
    }
    let mut next = deg.clone();
    let mut idx = vec![0usize; deg[n]];
    for i in 0..n {
        for &j in &a.indices[a.indptr[i]..a.indptr[i + 1]] {
            if i != j {
                idx[next[i]] = j;
                next[i] += 1;
                idx[next[j]] = i;
                next[j] += 1;
            }
        }
    }
    let mut indptr = vec![0usize];
    let mut indices = Vec::with_capacity(idx.len());
    for i in 0..n {
        let s = &mut idx[deg[i]..deg[i + 1]];
        s.sort_unstable();
        let mut last = usize::MAX;
        for &j in s.iter() {
            if j != last {
                indices.push(j);
                last = j;
            }
        }
        indptr.push(indices.len());
    }
    let values = vec![1.0; indices.len()];
    CsrMatrix { nrows: n, ncols: n, indptr, indices, values }
}

/// Group-level adjacency derived from the dof pattern.
fn group_graph(adj: &CsrMatrix, g: &DofGroups, is_root: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let ng = g.n_groups();
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); ng];
    for i in 0..adj.nrows {
        let gi = g.group_of[i];
        if is_root[gi] {
            continue;
        }
        for &j in &adj.indices[adj.indptr[i]..adj.indptr[i + 1]] {
            let gj = g.group_of[j];
            if gj != gi && !is_root[gj] {
                lists[gi].push(gj);
            }
        }
    }
    let mut ptr = vec![0usize];
    let mut idx = Vec::new();
    for l in lists.iter_mut() {
        l.sort_unstable();
        l.dedup();
        idx.extend_from_slice(l);
        ptr.push(idx.len());
    }
    (ptr, idx)
}

struct Dissector<'a> {
    gptr: Vec<usize>,
    gidx: Vec<usize>,
    dofs_of: Vec<Vec<usize>>,
    coords: &'a [[f64; 3]],
    mark: Vec<u32>,
    stamp: u32,
    nodes: Vec<Node>,
}

impl<'a> Dissector<'a> {
    fn ndofs(&self, set: &[usize]) -> usize {
        set.iter().map(|&g| self.dofs_of[g].len()).sum()
    }

    fn node_from(&mut self, set: &[usize], children: Vec<usize>) -> usize {
        let mut vars = Vec::with_capacity(self.ndofs(set));
        for &g in set {
            vars.extend_from_slice(&self.dofs_of[g]);
        }
        self.nodes.push(Node { vars, children });
        self.nodes.len() - 1
    }

    fn next_stamp(&mut self) -> u32 {
        self.stamp += 3;
        self.stamp
    }

    /// Splits `set` into (left, right) halves, either by coordinates or BFS levels.
    fn split(&mut self, set: &[usize]) -> (Vec<usize>, Vec<usize>) {
        if !self.coords.is_empty() {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for &g in set {
                for d in 0..3 {
                    lo[d] = lo[d].min(self.coords[g][d]);
                    hi[d] = hi[d].max(self.coords[g][d]);
                }
            }
            let mut ax = 0;
            for d in 1..3 {
                if hi[d] - lo[d] > hi[ax] - lo[ax] {
                    ax = d;
                }
            }
            let mut s = set.to_vec();
            let c = self.coords;
            s.sort_by(|&a, &b| c[a][ax].total_cmp(&c[b][ax]).then(a.cmp(&b)));
            let half = s.len() / 2;
            // keep groups with equal coordinate on the same side
            let mut cut = half;
            while cut < s.len() && cut > 0 && c[s[cut]][ax] == c[s[cut - 1]][ax] {
                cut += 1;
            }
            if cut == s.len() {
                cut = half;
            }
            let r = s.split_off(cut);
            (s, r)
        } else {
            self.bfs_split(set)
        }
    }

    fn bfs_levels(&mut self, set: &[usize], start: usize, inset: u32) -> Vec<Vec<usize>> {
        let seen = self.next_stamp();
        let mut levels = vec![vec![start]];
        self.mark[start] = seen;
        loop {
            let mut next = Vec::new();
            for &g in levels.last().unwrap() {
                for &h in &self.gidx[self.gptr[g]..self.gptr[g + 1]] {
                    if self.mark[h] == inset {
                        self.mark[h] = seen;
                        next.push(h);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            next.sort_unstable();
            levels.push(next);
        }
        // restore membership marks
        for l in &levels {
            for &g in l {
                self.mark[g] = inset;
            }
        }
        let _ = set;
        levels
    }

    fn bfs_split(&mut self, set: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let inset = self.next_stamp();
        for &g in set {
            self.mark[g] = inset;
        }
        let mut start = *set.iter().min().unwrap();
        let mut levels = self.bfs_levels(set, start, inset);
        for _ in 0..2 {
            let far = *levels.last().unwrap().iter().min().unwrap();
            let l2 = self.bfs_levels(set, far, inset);
            if l2.len() <= levels.len() {
                break;
            }
            start = far;
            levels = l2;
        }
        let _ = start;
        let reached: usize = levels.iter().map(|l| l.len()).sum();
        let mut left = Vec::new();
        if reached < set.len() / 2 || levels.len() < 2 {
            // disconnected: component vs the rest
            for l in &levels {
                left.extend_from_slice(l);
            }
        } else {
            for l in &levels {
                if left.len() + l.len() > set.len() / 2 && !left.is_empty() {
                    break;
                }
                left.extend_from_slice(l);
            }
        }
        let lmark = self.next_stamp();
        for &g in &left {
            self.mark[g] = lmark;
        }
        let right: Vec<usize> = set.iter().copied().filter(|&g| self.mark[g] != lmark).collect();
        left.sort_unstable();
        (left, right)
    }

    fn dissect(&mut self, set: Vec<usize>) -> Option<usize> {
        if set.is_empty() {
            return None;
        }
        if self.ndofs(&set) <= LEAF_DOFS || set.len() < 4 {
            return Some(self.node_from(&set, vec![]));
        }
        let (left, right) = self.split(&set);
        if left.is_empty() || right.is_empty() {
            return Some(self.node_from(&set, vec![]));
        }
        let ls = self.next_stamp();
        let rs = ls + 1;
        for &g in &left {
            self.mark[g] = ls;
        }
        for &g in &right {
            self.mark[g] = rs;
        }
        let boundary = |side: &[usize], other: u32, d: &Self| -> Vec<usize> {
            side.iter()
                .copied()
                .filter(|&g| d.gidx[d.gptr[g]..d.gptr[g + 1]].iter().any(|&h| d.mark[h] == other))
                .collect()
        };
        let sl = boundary(&left, rs, self);
        let sr = boundary(&right, ls, self);
        let (sep, sep_from_left) = if self.ndofs(&sl) <= self.ndofs(&sr) { (sl, true) } else { (sr, false) };
        let sm = self.next_stamp();
        for &g in &sep {
            self.mark[g] = sm;
        }
        let left: Vec<usize> = left.into_iter().filter(|&g| self.mark[g] != sm).collect();
        let right: Vec<usize> = right.into_iter().filter(|&g| self.mark[g] != sm).collect();
        let _ = sep_from_left;
        let mut children = Vec::new();
        if let Some(c) = self.dissect(left) {
            children.push(c);
        }
        if let Some(c) = self.dissect(right) {
            children.push(c);
        }
        Some(self.node_from(&sep, children))
    }
}

fn build_tree(adj: &CsrMatrix, g: &DofGroups, coords: &[[f64; 3]]) -> Vec<Node> {
    let ng = g.n_groups();
    let mut is_root = vec![false; ng];
    for &r in &g.root {
        is_root[r] = true;
    }
    let (gptr, gidx) = group_graph(adj, g, &is_root);
    let mut dofs_of = vec![Vec::new(); ng];
    for (i, &gi) in g.group_of.iter().enumerate() {
        dofs_of[gi].push(i);
    }
    let mut d = Dissector {
        gptr,
        gidx,
        dofs_of,
        coords,
        mark: vec![0; ng],
        stamp: 1,
        nodes: Vec::new(),
    };
    let set: Vec<usize> = (0..ng).filter(|&x| !is_root[x] && !d.dofs_of[x].is_empty()).collect();
    let top = d.dissect(set);
    let mut root_vars = Vec::new();
    for &r in &g.root {
        root_vars.extend_from_slice(&d.dofs_of[r]);
    }
    if !root_vars.is_empty() || top.is_none() {
        let children = top.into_iter().collect();
        d.nodes.push(Node { vars: root_vars, children });
    }
    d.nodes
}

fn dissect_geometric(adj: &CsrMatrix, g: &DofGroups) -> Vec<Node> {
    build_tree(adj, g, &g.coords)
}

fn dissect_graph(adj: &CsrMatrix, g: &DofGroups) -> Vec<Node> {
    build_tree(adj, g, &[])
}

fn factor_numeric(a: &CsrMatrix, adj: &CsrMatrix, nodes: Vec<Node>) -> Result<SparseLu, SolverError> {
    let n = a.nrows;
    let nn = nodes.len();
    let mut owner = vec![usize::MAX; n];
    for (x, nd) in nodes.iter().enumerate() {
        for &v in &nd.vars {
            owner[v] = x;
        }
    }
    if owner.iter().any(|&o| o == usize::MAX) {
        return Err(SolverError::Shape("ordering does not cover every unknown".into()));
    }
    // boundary (ancestor) sets, bottom-up
    let mut stamp = vec![usize::MAX; n];
    let mut bnd: Vec<Vec<usize>> = Vec::with_capacity(nn);
    for (x, nd) in nodes.iter().enumerate() {
        let mut b = Vec::new();
        for &v in &nd.vars {
            for &c in &adj.indices[adj.indptr[v]..adj.indptr[v + 1]] {
                if owner[c] > x && stamp[c] != x {
                    stamp[c] = x;
                    b.push(c);
                }
            }
        }
        for &ch in &nd.children {
            for &c in &bnd[ch] {
                if owner[c] > x && stamp[c] != x {
                    stamp[c] = x;
                    b.push(c);
                }
            }
        }
        b.sort_unstable_by_key(|&c| (owner[c], c));
        bnd.push(b);
    }
    // bucket original entries by the lower of the two owners
    let mut cnt = vec![0usize; nn + 1];
    for i in 0..n {
        for &j in &a.indices[a.indptr[i]..a.indptr[i + 1]] {
            cnt[owner[i].min(owner[j]) + 1] += 1;
        }
    }
    for x in 0..nn {
        cnt[x + 1] += cnt[x];
    }
    let mut fill = cnt.clone();
    let mut ent = vec![(0usize, 0usize); a.nnz()];
    for i in 0..n {
        for k in a.indptr[i]..a.indptr[i + 1] {
            let x = owner[i].min(owner[a.indices[k]]);
            ent[fill[x]] = (i, k);
            fill[x] += 1;
        }
    }
    let anorm = a.max_abs().max(f64::MIN_POSITIVE);
    let mut rpos = vec![usize::MAX; n];
    let mut cpos = vec![usize::MAX; n];
    let mut cbs: Vec<Option<Cb>> = (0..nn).map(|_| None).collect();
    let mut fronts = Vec::with_capacity(nn);
    let mut stats = LuStats { n, ..Default::default() };
    for x in 0..nn {
        let nd = &nodes[x];
        let mut rows: Vec<usize> = nd.vars.clone();
        let mut cols: Vec<usize> = nd.vars.clone();
        let kids: Vec<Cb> = nd.children.iter().filter_map(|&c| cbs[c].take()).collect();
        for cb in &kids {
            rows.extend(cb.rows.iter().copied().filter(|&r| owner[r] < x));
            cols.extend(cb.cols.iter().copied().filter(|&c| owner[c] < x));
        }
        let nfs = rows.len();
        if cols.len() != nfs {
            return Err(SolverError::Internal("unbalanced delayed pivots".into()));
        }
        stats.delayed += nfs - nd.vars.len();
        rows.extend_from_slice(&bnd[x]);
        cols.extend_from_slice(&bnd[x]);
        let m = rows.len();
        stats.max_front = stats.max_front.max(m);
        for (p, &r) in rows.iter().enumerate() {
            rpos[r] = p;
        }
        for (p, &c) in cols.iter().enumerate() {
            cpos[c] = p;
        }
        let mut f = vec![0.0; m * m];
        for &(i, k) in &ent[cnt[x]..cnt[x + 1]] {
            let j = a.indices[k];
            f[cpos[j] * m + rpos[i]] += a.values[k];
        }
        for cb in &kids {
            let mc = cb.rows.len();
            let rp: Vec<usize> = cb.rows.iter().map(|&r| rpos[r]).collect();
            for (jj, &c) in cb.cols.iter().enumerate() {
                let dst = &mut f[cpos[c] * m..(cpos[c] + 1) * m];
                let src = &cb.mat[jj * mc..(jj + 1) * mc];
                for (ii, &p) in rp.iter().enumerate() {
                    dst[p] += src[ii];
                }
            }
        }
        drop(kids);
        let is_root = x + 1 == nn;
        let k = factor_front(&mut f, m, nfs, &mut rows, &mut cols, is_root, anorm);
        if is_root && k < nfs {
            return Err(SolverError::Singular { rank_deficit: nfs - k });
        }
        stats.flops += 2.0 * (k as f64) * (m as f64) * (m as f64);
        let mut lpanel = f[..m * k].to_vec();
        lpanel.shrink_to_fit();
        let mut u12 = Vec::with_capacity(k * (m - k));
        for j in k..m {
            u12.extend_from_slice(&f[j * m..j * m + k]);
        }
        if m > k {
            let mc = m - k;
            let mut mat = Vec::with_capacity(mc * mc);
            for j in k..m {
                mat.extend_from_slice(&f[j * m + k..(j + 1) * m]);
            }
            cbs[x] = Some(Cb { rows: rows[k..].to_vec(), cols: cols[k..].to_vec(), mat });
        }
        stats.factor_entries += lpanel.len() + u12.len();
        for &r in &rows {
            rpos[r] = usize::MAX;
        }
        for &c in &cols {
            cpos[c] = usize::MAX;
        }
        fronts.push(FrontFactor { rows, cols, k, lpanel, u12 });
    }
    if let Some(cb) = cbs.iter().flatten().next() {
        return Err(SolverError::Singular { rank_deficit: cb.rows.len() });
    }
    Ok(SparseLu { n, fronts, matrix: a.clone(), stats })
}

fn swap_rows(f: &mut [f64], m: usize, a: usize, b: usize) {
    if a == b {
        return;
    }
    for j in 0..m {
        f.swap(j * m + a, j * m + b);
    }
}

fn swap_cols(f: &mut [f64], m: usize, a: usize, b: usize) {
    if a == b {
        return;
    }
    let (lo, hi) = (a.min(b), a.max(b));
    let (x, y) = f.split_at_mut(hi * m);
    x[lo * m..(lo + 1) * m].swap_with_slice(&mut y[..m]);
}

/// Partial LU of the leading `nfs` columns of an `m x m` front.
/// Returns the number of pivots eliminated.
fn factor_front(
    f: &mut [f64],
    m: usize,
    nfs: usize,
    rows: &mut [usize],
    cols: &mut [usize],
    is_root: bool,
    anorm: f64,
) -> usize {
    let tiny = 1e-14 * anorm;
    let mut k = 0;
    let mut stalls = 0usize;
    while k < nfs {
        let bend = (k + BLOCK).min(nfs);
        // unblocked factorization of columns k..bend
        let mut kk = k;
        let mut end = bend;
        while kk < end {
            let c = kk;
            let col = &f[c * m..(c + 1) * m];
            let mut best = 0.0f64;
            let mut br = kk;
            for (r, v) in col.iter().enumerate().take(nfs).skip(kk) {
                if v.abs() > best {
                    best = v.abs();
                    br = r;
                }
            }
            let mut cmax = best;
            for v in &col[nfs..m] {
                cmax = cmax.max(v.abs());
            }
            let ok = best > tiny && (is_root || best >= PIVOT_THRESHOLD * cmax);
            if !ok {
                end -= 1;
                swap_cols(f, m, c, end);
                cols.swap(c, end);
                continue;
            }
            swap_rows(f, m, kk, br);
            rows.swap(kk, br);
            let (head, tail) = f.split_at_mut((kk + 1) * m);
            let pcol = &mut head[kk * m..];
            let p = pcol[kk];
            for v in &mut pcol[kk + 1..m] {
                *v /= p;
            }
            let pcol = &head[kk * m..];
            // failed columns parked in end..bend still need this update
            for j in kk + 1..bend {
                let cj = &mut tail[(j - kk - 1) * m..(j - kk) * m];
                let u = cj[kk];
                if u != 0.0 {
                    for i in kk + 1..m {
                        cj[i] -= pcol[i] * u;
                    }
                }
            }
            kk += 1;
        }
        let kb = kk - k;
        // bring remaining fully summed columns up to date with this block
        if kb > 0 && bend < nfs {
            let ncj = nfs - bend;
            let (left, right) = f.split_at_mut(bend * m);
            let lblk = MatRef::from_column_major_slice_with_stride(&left[k * m + k..], m - k, kb, m);
            let rview = MatMut::from_column_major_slice_with_stride_mut(&mut right[k..], m - k, ncj, m);
            let (mut top, mut bottom) = rview.split_at_row_mut(kb);
            let (l11, l21) = lblk.split_at_row(kb);
            solve_unit_lower_triangular_in_place(l11, top.as_mut(), Par::Seq);
            matmul(bottom.as_mut(), Accum::Add, l21, top.as_ref(), -1.0, Par::Seq);
        }
        // move failed columns of this block to the end of the pending range
        let failed = bend - kk;
        if failed > 0 {
            let mut tailpos = nfs;
            for c in (kk..bend).rev() {
                tailpos -= 1;
                if tailpos != c {
                    swap_cols(f, m, c, tailpos);
                    cols.swap(c, tailpos);
                }
            }
        }
        if kb == 0 {
            stalls += bend - k;
            if stalls >= nfs - k {
                break;
            }
        } else {
            stalls = 0;
        }
        k = kk;
    }
    // contribution block update
    if k > 0 && nfs < m {
        let nc = m - nfs;
        let (left, right) = f.split_at_mut(nfs * m);
        let lblk = MatRef::from_column_major_slice_with_stride(left, m, k, m);
        let rview = MatMut::from_column_major_slice_with_stride_mut(right, m, nc, m);
        let (mut top, mut bottom) = rview.split_at_row_mut(k);
        let (l11, l21) = lblk.split_at_row(k);
        solve_unit_lower_triangular_in_place(l11, top.as_mut(), Par::Seq);
        matmul(bottom.as_mut(), Accum::Add, l21, top.as_ref(), -1.0, Par::Seq);
    }
    k
}
