//! Boundary-fitted tetrahedral meshes of the perforated cell and of the
//! perforated macro domain.
//!
//! Both are cut from a structured grid of cubes, six tets per cube. The cube
//! split is mirrored across the mid-planes so that a centered obstacle sees a
//! mesh with the full symmetry group of the cube.

mod build;
pub mod locate;
pub mod vtk;

use crate::geom::{cross, det6, dot3, norm3, scale, sub, V3};
use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::Arc;

pub use build::{build_macro_mesh, build_unit_cell_mesh, unit_cube_mesh};
pub use locate::PointLocator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ObstacleSpec {
    pub shape: Shape,
    pub center: V3,
    pub radius: f64,
}

impl ObstacleSpec {
    pub fn sphere(center: V3, radius: f64) -> Self {
        ObstacleSpec { shape: Shape::Sphere, center, radius }
    }

    /// Checks that the closed obstacle lies strictly inside the unit cell.
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidObstacle(format!("radius {} must be positive", self.radius)));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidObstacle("center must be finite".into()));
        }
        for d in 0..3 {
            if self.center[d] - self.radius <= 0.0 || self.center[d] + self.radius >= 1.0 {
                return Err(Error::ObstacleTouchesBoundary);
            }
        }
        Ok(())
    }

    /// Signed distance, negative inside the obstacle.
    pub fn level(&self, x: V3) -> f64 {
        norm3(sub(x, self.center)) - self.radius
    }

    /// Radial projection onto the obstacle surface.
    pub fn project(&self, x: V3) -> V3 {
        let d = sub(x, self.center);
        let r = norm3(d);
        let s = self.radius / r;
        [self.center[0] + s * d[0], self.center[1] + s * d[1], self.center[2] + s * d[2]]
    }

    /// Unit normal at a surface point, pointing out of the fluid (toward the center).
    pub fn normal_at(&self, x: V3) -> V3 {
        let d = sub(self.center, x);
        scale(1.0 / norm3(d), d)
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceTag {
    /// Face on the cell boundary plane `x_axis = 0` (`plus == false`) or `x_axis = 1`.
    Periodic { axis: usize, plus: bool },
    Obstacle,
    Exterior,
}

impl FaceTag {
    pub fn name(&self) -> String {
        match self {
            FaceTag::Periodic { axis, plus } => {
                format!("periodic_{}{}", ["x", "y", "z"][*axis], if *plus { "+" } else { "-" })
            }
            FaceTag::Obstacle => "obstacle".into(),
            FaceTag::Exterior => "exterior".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryFace {
    /// Vertices, ordered so that (v1 - v0) x (v2 - v0) points along `normal`.
    pub verts: [usize; 3],
    pub tet: usize,
    /// Local index (0..4) of the tet vertex opposite this face.
    pub opposite: usize,
    pub tag: FaceTag,
    /// Unit facet normal pointing out of the fluid region.
    pub normal: V3,
    pub area: f64,
}

/// Tetrahedral mesh with classified boundary faces.
#[derive(Debug, Clone)]
pub struct TetMesh {
    pub vertices: Vec<V3>,
    /// Positively oriented tets.
    pub tets: Vec<[usize; 4]>,
    pub faces: Vec<BoundaryFace>,
    /// Exact surface normal (out of the fluid) at vertices lying on an obstacle face.
    pub obstacle_normal: Vec<Option<V3>>,
    /// Longest edge.
    pub h_max: f64,
}

impl TetMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_coords(&self, t: usize) -> [V3; 4] {
        let v = self.tets[t];
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]], self.vertices[v[3]]]
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        let x = self.tet_coords(t);
        det6(x[0], x[1], x[2], x[3]) / 6.0
    }

    pub fn fluid_volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_volume(t)).sum()
    }

    pub fn faces_with(&self, tag: FaceTag) -> impl Iterator<Item = &BoundaryFace> {
        self.faces.iter().filter(move |f| f.tag == tag)
    }

    pub fn obstacle_faces(&self) -> impl Iterator<Item = &BoundaryFace> {
        self.faces_with(FaceTag::Obstacle)
    }

    /// Sum of area-weighted normals over all boundary faces.
    pub fn normal_closure(&self) -> V3 {
        let mut s = [0.0; 3];
        for f in &self.faces {
            for d in 0..3 {
                s[d] += f.area * f.normal[d];
            }
        }
        s
    }

    pub fn face_centroid(&self, f: &BoundaryFace) -> V3 {
        let mut c = [0.0; 3];
        for &v in &f.verts {
            for d in 0..3 {
                c[d] += self.vertices[v][d] / 3.0;
            }
        }
        c
    }

    /// Sorted unique edges.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut e: Vec<[usize; 2]> = Vec::with_capacity(self.tets.len() * 6);
        for t in &self.tets {
            for (a, b) in LOCAL_EDGES {
                let (x, y) = (t[a], t[b]);
                e.push(if x < y { [x, y] } else { [y, x] });
            }
        }
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Builds the boundary faces of a tet set: faces used by exactly one tet,
    /// classified by `classify(vertex ids)`.
    pub(crate) fn collect_boundary<F>(&mut self, mut classify: F) -> Result<()>
    where
        F: FnMut(&[usize; 3]) -> Option<FaceTag>,
    {
        let mut count: HashMap<[usize; 3], (usize, usize, usize)> = HashMap::new();
        for (t, tv) in self.tets.iter().enumerate() {
            for opp in 0..4 {
                let mut key = [0usize; 3];
                let mut j = 0;
                for (l, &v) in tv.iter().enumerate() {
                    if l != opp {
                        key[j] = v;
                        j += 1;
                    }
                }
                key.sort_unstable();
                let e = count.entry(key).or_insert((0, t, opp));
                e.0 += 1;
            }
        }
        let mut faces = Vec::new();
        let mut keys: Vec<_> = count.into_iter().filter(|(_, c)| c.0 == 1).collect();
        keys.sort_unstable_by_key(|(k, _)| *k);
        for (key, (_, t, opp)) in keys {
            let tag = classify(&key).ok_or_else(|| {
                Error::InvalidObstacle(format!("unclassifiable boundary face {key:?}"))
            })?;
            let x = self.tet_coords(t);
            let tv = self.tets[t];
            let mut verts = key;
            let (a, b, c) = (self.vertices[verts[0]], self.vertices[verts[1]], self.vertices[verts[2]]);
            let mut n = cross(sub(b, a), sub(c, a));
            // orient away from the opposite vertex
            if dot3(n, sub(x[opp], a)) > 0.0 {
                verts.swap(1, 2);
                n = scale(-1.0, n);
            }
            let nn = norm3(n);
            debug_assert!(tv[opp] != verts[0]);
            faces.push(BoundaryFace {
                verts,
                tet: t,
                opposite: opp,
                tag,
                normal: scale(1.0 / nn, n),
                area: 0.5 * nn,
            });
        }
        self.faces = faces;
        Ok(())
    }

    pub(crate) fn compute_h(&mut self) {
        let mut h: f64 = 0.0;
        for t in &self.tets {
            for (a, b) in LOCAL_EDGES {
                h = h.max(norm3(sub(self.vertices[t[a]], self.vertices[t[b]])));
            }
        }
        self.h_max = h;
    }
}

pub const LOCAL_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Mesh of the perforated unit cell.
#[derive(Debug, Clone)]
pub struct CellMesh {
    pub mesh: Arc<TetMesh>,
    pub resolution: usize,
    pub obstacle: ObstacleSpec,
    /// Structured grid index of every vertex (snapped vertices keep theirs).
    pub grid: Vec<[usize; 3]>,
    /// For each periodic face, the index of its translated partner.
    pub partner: Vec<Option<usize>>,
    lookup: HashMap<[usize; 3], usize>,
}

impl CellMesh {
    pub fn fluid_volume(&self) -> f64 {
        self.mesh.fluid_volume()
    }

    pub fn vertex_at(&self, g: [usize; 3]) -> Option<usize> {
        self.lookup.get(&g).copied()
    }

    /// Periodic image on the `0` side of a vertex, with the shift that was removed.
    pub fn periodic_image(&self, v: usize) -> (usize, [usize; 3]) {
        let n = self.resolution;
        let g = self.grid[v];
        let s = [(g[0] == n) as usize, (g[1] == n) as usize, (g[2] == n) as usize];
        if s == [0, 0, 0] {
            return (v, s);
        }
        let gi = [g[0] - s[0] * n, g[1] - s[1] * n, g[2] - s[2] * n];
        (self.lookup[&gi], s)
    }

    /// The same mesh with vertex `v` renamed `perm[v]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<CellMesh> {
        let nv = self.mesh.n_vertices();
        let mut seen = vec![false; nv];
        if perm.len() != nv || perm.iter().any(|&p| p >= nv || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidParameter("not a vertex permutation".into()));
        }
        let m = &self.mesh;
        let mut vertices = vec![[0.0; 3]; nv];
        let mut obstacle_normal = vec![None; nv];
        let mut grid = vec![[0; 3]; nv];
        for v in 0..nv {
            vertices[perm[v]] = m.vertices[v];
            obstacle_normal[perm[v]] = m.obstacle_normal[v];
            grid[perm[v]] = self.grid[v];
        }
        let tets = m.tets.iter().map(|t| t.map(|v| perm[v])).collect();
        let faces = m
            .faces
            .iter()
            .map(|f| BoundaryFace { verts: f.verts.map(|v| perm[v]), ..f.clone() })
            .collect();
        let lookup = self.lookup.iter().map(|(g, &v)| (*g, perm[v])).collect();
        Ok(CellMesh {
            mesh: Arc::new(TetMesh { vertices, tets, faces, obstacle_normal, h_max: m.h_max }),
            resolution: self.resolution,
            obstacle: self.obstacle,
            grid,
            partner: self.partner.clone(),
            lookup,
        })
    }

    /// Vertex translated by `-shift` cells (only defined for boundary vertices).
    pub fn shifted(&self, v: usize, shift: [usize; 3]) -> usize {
        let n = self.resolution;
        let g = self.grid[v];
        let gi = [g[0] - shift[0] * n, g[1] - shift[1] * n, g[2] - shift[2] * n];
        self.lookup[&gi]
    }
}

/// Mesh of the perforated cube (0,1)^3 tiled by `m^3` scaled cell copies.
#[derive(Debug, Clone)]
pub struct MacroMesh {
    pub mesh: Arc<TetMesh>,
    pub epsilon: f64,
    /// Cells per axis, `1 / epsilon`.
    pub m: usize,
    pub cell: CellMesh,
    /// `vertex_map[c * nv_cell + v]` is the macro vertex of cell-local vertex `v` in cell `c`.
    pub vertex_map: Vec<usize>,
}

impl MacroMesh {
    pub fn n_cells(&self) -> usize {
        self.m * self.m * self.m
    }

    /// Lattice index of cell `c` (x fastest is not used; z fastest).
    pub fn cell_index(&self, c: usize) -> [usize; 3] {
        let m = self.m;
        [c / (m * m), (c / m) % m, c % m]
    }

    pub fn cell_origin(&self, c: usize) -> V3 {
        let k = self.cell_index(c);
        [k[0] as f64 * self.epsilon, k[1] as f64 * self.epsilon, k[2] as f64 * self.epsilon]
    }

    /// Cell containing macro tet `t`; tets are stored cell by cell.
    pub fn cell_of_tet(&self, t: usize) -> usize {
        t / self.cell.mesh.n_tets()
    }

    pub fn cell_vertices(&self, c: usize) -> &[usize] {
        let nv = self.cell.mesh.n_vertices();
        &self.vertex_map[c * nv..(c + 1) * nv]
    }

    pub fn fluid_volume(&self) -> f64 {
        self.mesh.fluid_volume()
    }

    pub fn obstacle_centers(&self) -> Vec<V3> {
        (0..self.n_cells())
            .map(|c| {
                let o = self.cell_origin(c);
                [
                    o[0] + self.epsilon * self.cell.obstacle.center[0],
                    o[1] + self.epsilon * self.cell.obstacle.center[1],
                    o[2] + self.epsilon * self.cell.obstacle.center[2],
                ]
            })
            .collect()
    }
}
