//! Independent reference solvers shared by the integration tests.
//!
//! Nothing here goes through the crate's spaces, assembly or LU: nodes are
//! identified by coordinates mod 1, the P2 basis is written out by hand, the
//! slip condition is a Lagrange multiplier per obstacle node and the linear
//! algebra is faer's sparse LU.

#![allow(dead_code)]

use std::collections::HashMap;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use microdarcy::mesh::CellMesh;

type V3 = [f64; 3];

const EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Four-point rule, exact for quadratics.
fn rule() -> Vec<([f64; 4], f64)> {
    let (a, b) = (0.585_410_196_624_968_5, 0.138_196_601_125_010_5);
    (0..4)
        .map(|k| {
            let mut l = [b; 4];
            l[k] = a;
            (l, 0.25)
        })
        .collect()
}

fn key(x: V3) -> [i64; 3] {
    x.map(|c| {
        let m = (c * 1e8).round() as i64;
        m.rem_euclid(100_000_000)
    })
}

fn inv_grads(x: [V3; 4]) -> ([V3; 4], f64) {
    let j = [0, 1, 2].map(|r| [0, 1, 2].map(|c| x[c + 1][r] - x[0][r]));
    let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
    // rows of J⁻¹ are the gradients of λ1..λ3
    let cof = |r: usize, c: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (c1, c2) = ((c + 1) % 3, (c + 2) % 3);
        j[r1][c1] * j[r2][c2] - j[r1][c2] * j[r2][c1]
    };
    let mut g = [[0.0; 3]; 4];
    for a in 0..3 {
        for d in 0..3 {
            g[a + 1][d] = cof(d, a) / det;
        }
    }
    for d in 0..3 {
        g[0][d] = -(g[1][d] + g[2][d] + g[3][d]);
    }
    (g, det.abs() / 6.0)
}

/// P2 values and gradients at barycentric point `l`.
fn p2(l: [f64; 4], gl: &[V3; 4]) -> ([f64; 10], [V3; 10]) {
    let mut v = [0.0; 10];
    let mut g = [[0.0; 3]; 10];
    for a in 0..4 {
        v[a] = l[a] * (2.0 * l[a] - 1.0);
        g[a] = gl[a].map(|x| (4.0 * l[a] - 1.0) * x);
    }
    for (e, &(a, b)) in EDGES.iter().enumerate() {
        v[4 + e] = 4.0 * l[a] * l[b];
        g[4 + e] = [0, 1, 2].map(|d| 4.0 * (l[a] * gl[b][d] + l[b] * gl[a][d]));
    }
    (v, g)
}

fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// `∫ u^j_i` for the periodic rot-rot Stokes problem with `u·n = 0` on the obstacle,
/// forced by `e_j`; P2 velocity, P1 pressure, zero-mean pressure by multiplier.
pub fn slip_stokes_permeability(cell: &CellMesh) -> [[f64; 3]; 3] {
    let m = &cell.mesh;
    // nodes: (tet, local) -> global id, by coordinate mod 1
    let mut vid: HashMap<[i64; 3], usize> = HashMap::new();
    let mut pid: HashMap<[i64; 3], usize> = HashMap::new();
    let mut tet_nodes = Vec::with_capacity(m.tets.len());
    let mut tet_p = Vec::with_capacity(m.tets.len());
    for t in &m.tets {
        let x = t.map(|v| m.vertices[v]);
        let mut pts: Vec<V3> = x.to_vec();
        for &(a, b) in &EDGES {
            pts.push([0, 1, 2].map(|d| 0.5 * (x[a][d] + x[b][d])));
        }
        let n = pts.iter().map(|&p| {
            let l = vid.len();
            *vid.entry(key(p)).or_insert(l)
        });
        tet_nodes.push(n.collect::<Vec<_>>());
        tet_p.push(x.map(|p| {
            let l = pid.len();
            *pid.entry(key(p)).or_insert(l)
        }));
    }
    let nn = vid.len();
    let np = pid.len();

    // slip normals: sphere normal at vertices, facet average at edge midpoints
    let mut normals: HashMap<usize, V3> = HashMap::new();
    let mut edge_acc: HashMap<usize, V3> = HashMap::new();
    for f in m.obstacle_faces() {
        let x = f.verts.map(|v| m.vertices[v]);
        for (a, &v) in f.verts.iter().enumerate() {
            let c = cell.obstacle.center;
            let d = [0, 1, 2].map(|k| c[k] - x[a][k]);
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            normals.insert(vid[&key(m.vertices[v])], d.map(|z| z / r));
        }
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let mid = [0, 1, 2].map(|d| 0.5 * (x[a][d] + x[b][d]));
            let e = edge_acc.entry(vid[&key(mid)]).or_insert([0.0; 3]);
            for d in 0..3 {
                e[d] += f.area * f.normal[d];
            }
        }
    }
    for (k, a) in edge_acc {
        let r = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        normals.insert(k, a.map(|z| z / r));
    }
    let mut slip: Vec<(usize, V3)> = normals.into_iter().collect();
    slip.sort_by_key(|s| s.0);

    let nu = 3 * nn;
    let (op, ol, om) = (nu, nu + np, nu + np + 1);
    let n = om + slip.len();
    let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::new();
    let mut load = vec![0.0; nn];
    let mut pint = vec![0.0; np];
    let q = rule();
    for (t, tv) in m.tets.iter().enumerate() {
        let (gl, vol) = inv_grads(tv.map(|v| m.vertices[v]));
        let nodes = &tet_nodes[t];
        let pn = &tet_p[t];
        for &(l, w) in &q {
            let (phi, g) = p2(l, &gl);
            let wq = w * vol;
            for a in 0..10 {
                load[nodes[a]] += wq * phi[a];
                for b in 0..10 {
                    for ca in 0..3 {
                        let mut ea = [0.0; 3];
                        ea[ca] = 1.0;
                        let ra = cross(g[a], ea);
                        for cb in 0..3 {
                            let mut eb = [0.0; 3];
                            eb[cb] = 1.0;
                            let rb = cross(g[b], eb);
                            let v = wq * (ra[0] * rb[0] + ra[1] * rb[1] + ra[2] * rb[2]);
                            if v != 0.0 {
                                trips.push(Triplet::new(3 * nodes[a] + ca, 3 * nodes[b] + cb, v));
                            }
                        }
                    }
                }
                for (k, &pk) in pn.iter().enumerate() {
                    for c in 0..3 {
                        // −∫ p div φ and its transpose
                        let v = -wq * l[k] * g[a][c];
                        trips.push(Triplet::new(3 * nodes[a] + c, op + pk, v));
                        trips.push(Triplet::new(op + pk, 3 * nodes[a] + c, v));
                    }
                }
            }
            for (k, &pk) in pn.iter().enumerate() {
                pint[pk] += wq * l[k];
            }
        }
    }
    for (k, &w) in pint.iter().enumerate() {
        trips.push(Triplet::new(ol, op + k, w));
        trips.push(Triplet::new(op + k, ol, w));
    }
    for (s, &(node, nrm)) in slip.iter().enumerate() {
        for c in 0..3 {
            trips.push(Triplet::new(om + s, 3 * node + c, nrm[c]));
            trips.push(Triplet::new(3 * node + c, om + s, nrm[c]));
        }
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips).expect("oracle matrix");
    let lu = a.sp_lu().expect("oracle factorization");
    let mut rhs = Mat::<f64>::zeros(n, 3);
    for j in 0..3 {
        for k in 0..nn {
            rhs[(3 * k + j, j)] = load[k];
        }
    }
    let x = lu.solve(&rhs);
    let mut kk = [[0.0; 3]; 3];
    for j in 0..3 {
        for i in 0..3 {
            kk[i][j] = (0..nn).map(|k| load[k] * x[(3 * k + i, j)]).sum();
        }
    }
    kk
}
