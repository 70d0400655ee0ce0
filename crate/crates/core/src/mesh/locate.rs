//! Point location in a tet mesh through a uniform bucket grid.

use super::TetMesh;
use crate::geom::V3;

pub struct PointLocator {
    lo: V3,
    h: V3,
    n: usize,
    buckets: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &TetMesh) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &mesh.vertices {
            for d in 0..3 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let n = ((mesh.n_tets() as f64 / 6.0).cbrt().ceil() as usize).max(1);
        let h = [0, 1, 2].map(|d| ((hi[d] - lo[d]) / n as f64).max(f64::MIN_POSITIVE));
        let mut buckets = vec![Vec::new(); n * n * n];
        let clampi = |x: f64, d: usize| (((x - lo[d]) / h[d]).floor().max(0.0) as usize).min(n - 1);
        for t in 0..mesh.n_tets() {
            let x = mesh.tet_coords(t);
            let mut a = [usize::MAX; 3];
            let mut b = [0; 3];
            for p in &x {
                for d in 0..3 {
                    a[d] = a[d].min(clampi(p[d] - 1e-12, d));
                    b[d] = b[d].max(clampi(p[d] + 1e-12, d));
                }
            }
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    for k in a[2]..=b[2] {
                        buckets[(i * n + j) * n + k].push(t);
                    }
                }
            }
        }
        Self { lo, h, n, buckets }
    }

    /// Tet containing `x` and its barycentric coordinates; the tet with the least
    /// negative coordinate when `x` is within round-off of several or of none.
    pub fn locate(&self, mesh: &TetMesh, x: V3) -> Option<(usize, [f64; 4])> {
        let n = self.n;
        let idx = [0, 1, 2].map(|d| ((x[d] - self.lo[d]) / self.h[d]).floor());
        if idx.iter().any(|&i| i < -1.0 || i > n as f64) {
            return None;
        }
        let idx = idx.map(|i| (i.max(0.0) as usize).min(n - 1));
        let mut best: Option<(usize, [f64; 4], f64)> = None;
        for &t in &self.buckets[(idx[0] * n + idx[1]) * n + idx[2]] {
            let l = barycentric(mesh.tet_coords(t), x);
            let m = l.iter().cloned().fold(f64::INFINITY, f64::min);
            if best.map_or(true, |b| m > b.2) {
                best = Some((t, l, m));
            }
        }
        best.filter(|b| b.2 >= -1e-9).map(|b| (b.0, b.1))
    }
}

pub fn barycentric(x: [V3; 4], p: V3) -> [f64; 4] {
    let m = [0, 1, 2].map(|r| [0, 1, 2].map(|c| x[c + 1][r] - x[0][r]));
    let rhs = [0, 1, 2].map(|r| p[r] - x[0][r]);
    let (inv, _) = crate::geom::inv3(m);
    let l: [f64; 3] = [0, 1, 2].map(|r| inv[r][0] * rhs[0] + inv[r][1] * rhs[1] + inv[r][2] * rhs[2]);
    [1.0 - l[0] - l[1] - l[2], l[0], l[1], l[2]]
}
