//! Constrained nodal finite-element spaces.
//!
//! Nodes are numbered vertices first, then P2 edge midpoints (in sorted edge
//! order) or one bubble per tet. Periodic images share the dofs of their
//! canonical node; obstacle nodes carry two tangential dofs in a local frame.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::basis::{Shape, TetGeom};
use super::quadrature::tet_rule_for_degree;
use crate::error::{Error, Result};
use crate::geom::{add, dot3, norm3, scale, tangent_frame, unit, V3};
use crate::mesh::{CellMesh, FaceTag, MacroMesh, TetMesh, LOCAL_EDGES};
use crate::sparse::DofGroups;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    VectorP2,
    VectorP1,
    /// vector P1 enriched by the cubic-times-λ bubble (MINI velocity)
    VectorP1Bubble,
    ScalarP1,
    ScalarP2,
}

impl Family {
    pub fn shape(self) -> Shape {
        match self {
            Family::VectorP2 | Family::ScalarP2 => Shape::P2,
            Family::VectorP1 | Family::ScalarP1 => Shape::P1,
            Family::VectorP1Bubble => Shape::P1Bubble,
        }
    }

    pub fn n_comp(self) -> usize {
        match self {
            Family::ScalarP1 | Family::ScalarP2 => 1,
            _ => 3,
        }
    }

    pub fn is_vector(self) -> bool {
        self.n_comp() == 3
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Periodic,
    ZeroExteriorTrace,
    ZeroNormalOnObstacle,
    ZeroMean,
}

/// The mesh a space is built on; the variant decides which constraints make sense.
#[derive(Clone, Copy)]
pub enum MeshRef<'a> {
    Cell(&'a CellMesh),
    Macro(&'a MacroMesh),
    Plain(&'a Arc<TetMesh>),
}

impl<'a> MeshRef<'a> {
    pub fn tet_mesh(&self) -> &'a Arc<TetMesh> {
        match *self {
            MeshRef::Cell(c) => &c.mesh,
            MeshRef::Macro(m) => &m.mesh,
            MeshRef::Plain(m) => m,
        }
    }
}

impl<'a> From<&'a CellMesh> for MeshRef<'a> {
    fn from(c: &'a CellMesh) -> Self {
        MeshRef::Cell(c)
    }
}

impl<'a> From<&'a MacroMesh> for MeshRef<'a> {
    fn from(m: &'a MacroMesh) -> Self {
        MeshRef::Macro(m)
    }
}

impl<'a> From<&'a Arc<TetMesh>> for MeshRef<'a> {
    fn from(m: &'a Arc<TetMesh>) -> Self {
        MeshRef::Plain(m)
    }
}

/// Where the unknowns of one node live.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeDofs {
    /// `n_comp` consecutive dofs, Cartesian components
    Free(usize),
    /// two consecutive dofs, coefficients of the tangent pair (t1, t2)
    Tangent(usize),
    /// eliminated (homogeneous Dirichlet)
    Fixed,
}

#[derive(Clone, Debug)]
pub struct Space {
    pub mesh: Arc<TetMesh>,
    pub family: Family,
    pub constraints: Vec<Constraint>,
    /// `tet_nodes[t * n_local + a]`
    pub tet_nodes: Vec<usize>,
    pub node_coords: Vec<V3>,
    /// periodic representative of each node (itself if not periodic)
    pub canonical: Vec<usize>,
    pub node_dofs: Vec<NodeDofs>,
    /// constraint normal of obstacle nodes
    pub normals: Vec<Option<V3>>,
    frames: Vec<Option<[V3; 2]>>,
    /// sorted unique edges (P2 only)
    pub edges: Vec<[usize; 2]>,
    pub n_dofs: usize,
    /// a zero-mean space is paired with one multiplier in the saddle system
    pub zero_mean: bool,
}

/// One local unknown: global dof and the vector (or scalar weight in slot 0) it multiplies.
#[derive(Clone, Copy, Debug)]
pub struct LocalDof {
    pub dof: usize,
    pub local_node: usize,
    pub dir: V3,
}

pub fn build_space<'a>(mesh: impl Into<MeshRef<'a>>, family: Family, constraints: &[Constraint]) -> Result<Space> {
    Space::new(mesh.into(), family, constraints)
}

impl Space {
    pub fn new(mref: MeshRef, family: Family, constraints: &[Constraint]) -> Result<Self> {
        let mut cons = constraints.to_vec();
        cons.sort();
        cons.dedup();
        let has = |c| cons.contains(&c);
        if has(Constraint::Periodic) && !matches!(mref, MeshRef::Cell(_)) {
            return Err(Error::IncompatibleConstraints("periodic requires a cell mesh".into()));
        }
        if has(Constraint::ZeroExteriorTrace) && matches!(mref, MeshRef::Cell(_)) {
            return Err(Error::IncompatibleConstraints("zero exterior trace requires a macro mesh".into()));
        }
        if has(Constraint::ZeroMean) && family.is_vector() {
            return Err(Error::IncompatibleConstraints("zero mean applies to scalar spaces".into()));
        }
        if has(Constraint::ZeroNormalOnObstacle) && !family.is_vector() {
            return Err(Error::IncompatibleConstraints("normal constraint needs a vector space".into()));
        }
        let mesh = mref.tet_mesh().clone();
        let nv = mesh.n_vertices();
        let shape = family.shape();
        let nl = shape.n_local();

        let edges = if shape == Shape::P2 { mesh.edges() } else { Vec::new() };
        let edge_id = |a: usize, b: usize| -> usize {
            let k = if a < b { [a, b] } else { [b, a] };
            edges.binary_search(&k).expect("edge of the mesh")
        };

        let mut node_coords = mesh.vertices.clone();
        match shape {
            Shape::P2 => {
                for e in &edges {
                    node_coords.push(scale(0.5, add(mesh.vertices[e[0]], mesh.vertices[e[1]])));
                }
            }
            Shape::P1Bubble => {
                for t in &mesh.tets {
                    let mut c = [0.0; 3];
                    for &v in t {
                        c = add(c, scale(0.25, mesh.vertices[v]));
                    }
                    node_coords.push(c);
                }
            }
            Shape::P1 => {}
        }
        let n_nodes = node_coords.len();

        let mut tet_nodes = Vec::with_capacity(mesh.n_tets() * nl);
        for (ti, t) in mesh.tets.iter().enumerate() {
            tet_nodes.extend_from_slice(t);
            match shape {
                Shape::P2 => {
                    for (a, b) in LOCAL_EDGES {
                        tet_nodes.push(nv + edge_id(t[a], t[b]));
                    }
                }
                Shape::P1Bubble => tet_nodes.push(nv + ti),
                Shape::P1 => {}
            }
        }

        let mut canonical: Vec<usize> = (0..n_nodes).collect();
        if let (true, MeshRef::Cell(cell)) = (has(Constraint::Periodic), mref) {
            for v in 0..nv {
                canonical[v] = cell.periodic_image(v).0;
            }
            for (k, e) in edges.iter().enumerate() {
                let sa = cell.periodic_image(e[0]).1;
                let sb = cell.periodic_image(e[1]).1;
                let s = [sa[0].min(sb[0]), sa[1].min(sb[1]), sa[2].min(sb[2])];
                if s != [0, 0, 0] {
                    canonical[nv + k] = nv + edge_id(cell.shifted(e[0], s), cell.shifted(e[1], s));
                }
            }
        }

        // exterior nodes
        let mut fixed = vec![false; n_nodes];
        if has(Constraint::ZeroExteriorTrace) {
            for f in mesh.faces_with(FaceTag::Exterior) {
                for &v in &f.verts {
                    fixed[v] = true;
                }
                if shape == Shape::P2 {
                    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                        fixed[nv + edge_id(f.verts[a], f.verts[b])] = true;
                    }
                }
            }
        }

        // obstacle normals: exact sphere normal at P2 vertices; elsewhere the
        // area-weighted facet average, which makes the discrete flux vanish
        let mut normals: Vec<Option<V3>> = vec![None; n_nodes];
        if has(Constraint::ZeroNormalOnObstacle) {
            let mut acc = vec![[0.0; 3]; n_nodes];
            let mut touched = vec![false; n_nodes];
            for f in mesh.obstacle_faces() {
                let an = scale(f.area, f.normal);
                match shape {
                    Shape::P2 => {
                        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                            let k = nv + edge_id(f.verts[a], f.verts[b]);
                            acc[k] = add(acc[k], an);
                            touched[k] = true;
                        }
                    }
                    _ => {
                        for &v in &f.verts {
                            acc[v] = add(acc[v], an);
                            touched[v] = true;
                        }
                    }
                }
            }
            for k in 0..n_nodes {
                if touched[k] {
                    normals[k] = Some(unit(acc[k]));
                }
            }
            if shape == Shape::P2 {
                for v in 0..nv {
                    normals[v] = mesh.obstacle_normal[v];
                }
            }
        }

        let nc = family.n_comp();
        let mut node_dofs = vec![NodeDofs::Fixed; n_nodes];
        let mut frames = vec![None; n_nodes];
        let mut n = 0;
        for k in 0..n_nodes {
            if canonical[k] != k {
                continue;
            }
            node_dofs[k] = if fixed[k] {
                NodeDofs::Fixed
            } else if let Some(nrm) = normals[k] {
                let (t1, t2) = tangent_frame(nrm);
                frames[k] = Some([t1, t2]);
                n += 2;
                NodeDofs::Tangent(n - 2)
            } else {
                n += nc;
                NodeDofs::Free(n - nc)
            };
        }
        for k in 0..n_nodes {
            let c = canonical[k];
            if c != k {
                node_dofs[k] = node_dofs[c];
                frames[k] = frames[c];
                normals[k] = normals[c];
            }
        }
        Ok(Space {
            mesh,
            family,
            zero_mean: has(Constraint::ZeroMean),
            constraints: cons,
            tet_nodes,
            node_coords,
            canonical,
            node_dofs,
            normals,
            frames,
            edges,
            n_dofs: n,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn n_local(&self) -> usize {
        self.family.shape().n_local()
    }

    pub fn n_comp(&self) -> usize {
        self.family.n_comp()
    }

    pub fn nodes_of(&self, t: usize) -> &[usize] {
        let nl = self.n_local();
        &self.tet_nodes[t * nl..(t + 1) * nl]
    }

    pub fn frame(&self, node: usize) -> Option<[V3; 2]> {
        self.frames[node]
    }

    /// Dofs of one node with the direction each one multiplies.
    pub fn node_unknowns(&self, node: usize, out: &mut Vec<(usize, V3)>) {
        match self.node_dofs[node] {
            NodeDofs::Fixed => {}
            NodeDofs::Free(f) => {
                if self.n_comp() == 1 {
                    out.push((f, [1.0, 0.0, 0.0]));
                } else {
                    out.push((f, [1.0, 0.0, 0.0]));
                    out.push((f + 1, [0.0, 1.0, 0.0]));
                    out.push((f + 2, [0.0, 0.0, 1.0]));
                }
            }
            NodeDofs::Tangent(f) => {
                let [t1, t2] = self.frames[node].expect("frame");
                out.push((f, t1));
                out.push((f + 1, t2));
            }
        }
    }

    /// Local unknowns of tet `t`, in local node order.
    pub fn local_dofs(&self, t: usize, out: &mut Vec<LocalDof>) {
        out.clear();
        let mut buf = Vec::with_capacity(3);
        for (a, &node) in self.nodes_of(t).iter().enumerate() {
            buf.clear();
            self.node_unknowns(node, &mut buf);
            for &(dof, dir) in &buf {
                out.push(LocalDof { dof, local_node: a, dir });
            }
        }
    }

    /// Nodal values (`n_nodes * n_comp`, node-major) of a coefficient vector.
    pub fn expand(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.n_dofs);
        let nc = self.n_comp();
        let mut out = vec![0.0; self.n_nodes() * nc];
        let mut buf = Vec::with_capacity(3);
        for k in 0..self.n_nodes() {
            buf.clear();
            self.node_unknowns(k, &mut buf);
            for &(dof, dir) in &buf {
                for c in 0..nc {
                    out[k * nc + c] += coeffs[dof] * dir[c];
                }
            }
        }
        out
    }

    /// Coefficients from nodal values at canonical nodes; tangent nodes keep the tangential part.
    pub fn restrict(&self, nodal: &[f64]) -> Vec<f64> {
        let nc = self.n_comp();
        let mut out = vec![0.0; self.n_dofs];
        let mut buf = Vec::with_capacity(3);
        for k in 0..self.n_nodes() {
            if self.canonical[k] != k {
                continue;
            }
            buf.clear();
            self.node_unknowns(k, &mut buf);
            for &(dof, dir) in &buf {
                out[dof] = (0..nc).map(|c| nodal[k * nc + c] * dir[c]).sum();
            }
        }
        out
    }

    pub fn interpolate(&self, f: impl Fn(V3) -> V3) -> Vec<f64> {
        let nc = self.n_comp();
        let mut nodal = vec![0.0; self.n_nodes() * nc];
        for (k, &x) in self.node_coords.iter().enumerate() {
            let v = f(x);
            nodal[k * nc..(k + 1) * nc].copy_from_slice(&v[..nc]);
        }
        self.restrict(&nodal)
    }

    pub fn interpolate_scalar(&self, f: impl Fn(V3) -> f64) -> Vec<f64> {
        self.interpolate(|x| [f(x), 0.0, 0.0])
    }

    /// Value of a nodal field (see `expand`) at barycentric point `l` of tet `t`.
    pub fn eval(&self, nodal: &[f64], t: usize, l: [f64; 4]) -> V3 {
        let shape = self.family.shape();
        let nc = self.n_comp();
        let mut phi = [0.0; 10];
        shape.values(l, &mut phi);
        let mut v = [0.0; 3];
        for (a, &node) in self.nodes_of(t).iter().enumerate() {
            for c in 0..nc {
                v[c] += phi[a] * nodal[node * nc + c];
            }
        }
        v
    }

    /// Gradient `g[c][d] = ∂_d v_c` of a nodal field at a point of tet `t`.
    pub fn eval_grad(&self, nodal: &[f64], t: usize, l: [f64; 4]) -> [V3; 3] {
        let shape = self.family.shape();
        let nc = self.n_comp();
        let geo = TetGeom::new(self.mesh.tet_coords(t));
        let mut g = [[0.0; 3]; 10];
        shape.grads(l, &geo.grad_l, &mut g);
        let mut out = [[0.0; 3]; 3];
        for (a, &node) in self.nodes_of(t).iter().enumerate() {
            for c in 0..nc {
                for d in 0..3 {
                    out[c][d] += g[a][d] * nodal[node * nc + c];
                }
            }
        }
        out
    }

    /// `∫ φ_k` for every node's scalar shape function.
    pub fn node_integrals(&self) -> Vec<f64> {
        let shape = self.family.shape();
        let rule = tet_rule_for_degree(shape.degree());
        let mut out = vec![0.0; self.n_nodes()];
        let mut phi = [0.0; 10];
        for t in 0..self.mesh.n_tets() {
            let vol = self.mesh.tet_volume(t);
            for &(l, w) in &rule {
                shape.values(l, &mut phi);
                for (a, &node) in self.nodes_of(t).iter().enumerate() {
                    out[node] += w * vol * phi[a];
                }
            }
        }
        out
    }

    /// Row `r` with `r · coeffs = ∫ field` (scalar spaces), used for the zero-mean multiplier.
    pub fn integral_row(&self) -> Vec<f64> {
        assert_eq!(self.n_comp(), 1);
        let w = self.node_integrals();
        let mut r = vec![0.0; self.n_dofs];
        for (k, &wk) in w.iter().enumerate() {
            if let NodeDofs::Free(d) = self.node_dofs[k] {
                r[d] += wk;
            }
        }
        r
    }

    /// Load vector `∫ c·φ` for a constant `c` (exact).
    pub fn load_constant(&self, c: V3) -> Vec<f64> {
        let w = self.node_integrals();
        let mut out = vec![0.0; self.n_dofs];
        let mut buf = Vec::with_capacity(3);
        for (k, &wk) in w.iter().enumerate() {
            buf.clear();
            self.node_unknowns(k, &mut buf);
            for &(dof, dir) in &buf {
                out[dof] += wk * if self.n_comp() == 1 { c[0] } else { dot3(dir, c) };
            }
        }
        out
    }

    /// Load vector `∫ f·φ` by quadrature exact to degree `degree + 4`.
    pub fn load(&self, f: impl Fn(V3) -> V3) -> Vec<f64> {
        let shape = self.family.shape();
        let rule = tet_rule_for_degree(shape.degree() + 4);
        let mut out = vec![0.0; self.n_dofs];
        let mut phi = [0.0; 10];
        let mut dofs = Vec::new();
        for t in 0..self.mesh.n_tets() {
            let geo = TetGeom::new(self.mesh.tet_coords(t));
            self.local_dofs(t, &mut dofs);
            for &(l, w) in &rule {
                shape.values(l, &mut phi);
                let fx = f(geo.point(l));
                let wq = w * geo.volume;
                for d in &dofs {
                    let v = if self.n_comp() == 1 { fx[0] } else { dot3(d.dir, fx) };
                    out[d.dof] += wq * phi[d.local_node] * v;
                }
            }
        }
        out
    }

    /// Componentwise integral of a field over the mesh.
    pub fn integrate(&self, coeffs: &[f64]) -> V3 {
        let nodal = self.expand(coeffs);
        let nc = self.n_comp();
        let w = self.node_integrals();
        let mut s = [0.0; 3];
        for (k, &wk) in w.iter().enumerate() {
            for c in 0..nc {
                s[c] += wk * nodal[k * nc + c];
            }
        }
        s
    }

    /// Largest `|φ·n|` over constrained obstacle nodes.
    pub fn max_normal_component(&self, coeffs: &[f64]) -> f64 {
        let nodal = self.expand(coeffs);
        let mut m: f64 = 0.0;
        for (k, n) in self.normals.iter().enumerate() {
            if let Some(n) = n {
                let v = [nodal[3 * k], nodal[3 * k + 1], nodal[3 * k + 2]];
                m = m.max(dot3(v, *n).abs());
            }
        }
        m
    }

    /// Group id (canonical node) and location of every dof, for the fill-reducing ordering.
    pub fn dof_groups(&self) -> (Vec<usize>, Vec<V3>) {
        let mut group = vec![0; self.n_dofs];
        let mut buf = Vec::with_capacity(3);
        for k in 0..self.n_nodes() {
            if self.canonical[k] != k {
                continue;
            }
            buf.clear();
            self.node_unknowns(k, &mut buf);
            for &(dof, _) in &buf {
                group[dof] = k;
            }
        }
        (group, self.node_coords.clone())
    }

    pub fn same_mesh(&self, other: &Space) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }
}

/// Ordering groups for a block system built from `spaces` followed by `n_root` dense unknowns.
/// Spaces on one mesh share node ids, so co-located unknowns land in one group.
pub fn block_groups(spaces: &[&Space], n_root: usize) -> DofGroups {
    let n_node_groups = spaces.iter().map(|s| s.n_nodes()).max().unwrap_or(0);
    let mut coords = vec![[0.0; 3]; n_node_groups];
    let mut group_of = Vec::new();
    for s in spaces {
        let (g, c) = s.dof_groups();
        for (k, x) in c.iter().enumerate() {
            coords[k] = *x;
        }
        group_of.extend(g);
    }
    let mut root = Vec::new();
    for r in 0..n_root {
        group_of.push(n_node_groups + r);
        coords.push([0.5; 3]);
        root.push(n_node_groups + r);
    }
    DofGroups { group_of, coords, root }
}

/// Euclidean size of the tangential frame defect at a node; used by tests.
pub fn frame_defect(n: V3, f: [V3; 2]) -> f64 {
    let [t1, t2] = f;
    [dot3(n, t1), dot3(n, t2), dot3(t1, t2), norm3(t1) - 1.0, norm3(t2) - 1.0, norm3(n) - 1.0]
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
}
