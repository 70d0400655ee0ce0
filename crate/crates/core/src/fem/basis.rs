//! Reference shape functions in barycentric form.

use crate::geom::{inv3, scale, sub, V3};
use crate::mesh::LOCAL_EDGES;

/// Affine map data of one tetrahedron.
#[derive(Clone, Copy, Debug)]
pub struct TetGeom {
    pub x: [V3; 4],
    /// gradients of the barycentric coordinates
    pub grad_l: [V3; 4],
    pub volume: f64,
}

impl TetGeom {
    pub fn new(x: [V3; 4]) -> Self {
        let m = [sub(x[1], x[0]), sub(x[2], x[0]), sub(x[3], x[0])];
        let (inv, det) = inv3(m);
        let mut g = [[0.0; 3]; 4];
        for i in 0..3 {
            g[i + 1] = [inv[0][i], inv[1][i], inv[2][i]];
        }
        for d in 0..3 {
            g[0][d] = -(g[1][d] + g[2][d] + g[3][d]);
        }
        Self { x, grad_l: g, volume: det / 6.0 }
    }

    pub fn point(&self, l: [f64; 4]) -> V3 {
        let mut p = [0.0; 3];
        for i in 0..4 {
            for d in 0..3 {
                p[d] += l[i] * self.x[i][d];
            }
        }
        p
    }

    pub fn barycentric(&self, p: V3) -> [f64; 4] {
        let r = sub(p, self.x[0]);
        let mut l = [0.0; 4];
        for i in 1..4 {
            l[i] = self.grad_l[i][0] * r[0] + self.grad_l[i][1] * r[1] + self.grad_l[i][2] * r[2];
        }
        l[0] = 1.0 - l[1] - l[2] - l[3];
        l
    }
}

/// Scalar shape-function sets used by the spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    P1,
    P2,
    /// P1 plus the interior quartic bubble
    P1Bubble,
}

impl Shape {
    pub fn n_local(self) -> usize {
        match self {
            Shape::P1 => 4,
            Shape::P2 => 10,
            Shape::P1Bubble => 5,
        }
    }

    /// Polynomial degree of the shape functions.
    pub fn degree(self) -> usize {
        match self {
            Shape::P1 => 1,
            Shape::P2 => 2,
            Shape::P1Bubble => 4,
        }
    }

    pub fn values(self, l: [f64; 4], out: &mut [f64]) {
        match self {
            Shape::P1 => out[..4].copy_from_slice(&l),
            Shape::P2 => {
                for i in 0..4 {
                    out[i] = l[i] * (2.0 * l[i] - 1.0);
                }
                for (e, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
                    out[4 + e] = 4.0 * l[a] * l[b];
                }
            }
            Shape::P1Bubble => {
                out[..4].copy_from_slice(&l);
                out[4] = 256.0 * l[0] * l[1] * l[2] * l[3];
            }
        }
    }

    pub fn grads(self, l: [f64; 4], g: &[V3; 4], out: &mut [V3]) {
        match self {
            Shape::P1 => out[..4].copy_from_slice(g),
            Shape::P2 => {
                for i in 0..4 {
                    out[i] = scale(4.0 * l[i] - 1.0, g[i]);
                }
                for (e, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
                    let mut v = [0.0; 3];
                    for d in 0..3 {
                        v[d] = 4.0 * (l[a] * g[b][d] + l[b] * g[a][d]);
                    }
                    out[4 + e] = v;
                }
            }
            Shape::P1Bubble => {
                out[..4].copy_from_slice(g);
                let mut v = [0.0; 3];
                for i in 0..4 {
                    let mut p = 256.0;
                    for j in 0..4 {
                        if j != i {
                            p *= l[j];
                        }
                    }
                    for d in 0..3 {
                        v[d] += p * g[i][d];
                    }
                }
                out[4] = v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_gradient_sum() {
        let geo = TetGeom::new([[0.1, 0.0, 0.0], [1.0, 0.2, 0.0], [0.0, 1.0, 0.3], [0.2, 0.1, 0.9]]);
        let l = [0.1, 0.2, 0.3, 0.4];
        for s in [Shape::P1, Shape::P2] {
            let n = s.n_local();
            let mut v = vec![0.0; n];
            let mut g = vec![[0.0; 3]; n];
            s.values(l, &mut v);
            s.grads(l, &geo.grad_l, &mut g);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for d in 0..3 {
                assert!(g.iter().map(|x| x[d]).sum::<f64>().abs() < 1e-12);
            }
        }
        let p = geo.point(l);
        let back = geo.barycentric(p);
        for i in 0..4 {
            assert!((back[i] - l[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let geo = TetGeom::new([[0.0, 0.0, 0.0], [1.0, 0.1, 0.0], [0.2, 1.0, 0.1], [0.1, 0.3, 0.8]]);
        let l = [0.15, 0.25, 0.35, 0.25];
        let x = geo.point(l);
        let h = 1e-6;
        for s in [Shape::P2, Shape::P1Bubble] {
            let n = s.n_local();
            let mut g = vec![[0.0; 3]; n];
            s.grads(l, &geo.grad_l, &mut g);
            for d in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[d] += h;
                xm[d] -= h;
                let mut vp = vec![0.0; n];
                let mut vm = vec![0.0; n];
                s.values(geo.barycentric(xp), &mut vp);
                s.values(geo.barycentric(xm), &mut vm);
                for k in 0..n {
                    let fd = (vp[k] - vm[k]) / (2.0 * h);
                    assert!((fd - g[k][d]).abs() < 1e-6, "{s:?} {k} {d}");
                }
            }
        }
    }
}
