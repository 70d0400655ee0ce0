//! The homogenized Darcy problem on the unit cube and the limit velocity and
//! microrotation.
//!
//! Weak form, P1 pressure with zero mean:
//! `∫ K⁽¹⁾∇p·∇q = ∫ (K⁽¹⁾f + K⁽²⁾g)·∇q` for all q.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cell::{mat_vec, sym_min_eigenvalue, EffectiveTensors, Mat3};
use crate::error::{Error, Result};
use crate::fem::basis::TetGeom;
use crate::fem::quadrature::tet_rule_for_degree;
use crate::geom::V3;
use crate::mesh::{unit_cube_mesh, vtk, PointLocator, TetMesh};
use crate::sparse::{CsrMatrix, DofGroups, SparseLu, Triplets};

pub type Field<'a> = &'a (dyn Fn(V3) -> V3 + Sync);

/// Quadrature degree for the load and the norms.
const LOAD_DEGREE: usize = 4;

pub fn zero_field(_: V3) -> V3 {
    [0.0; 3]
}

/// Constant tensors used by the macro problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarcyTensors {
    pub k1: Mat3,
    pub k2: Mat3,
    pub l1: Mat3,
    pub l2: Mat3,
}

impl From<&EffectiveTensors> for DarcyTensors {
    fn from(t: &EffectiveTensors) -> Self {
        Self { k1: t.k1, k2: t.k2, l1: t.l1, l2: t.l2 }
    }
}

impl DarcyTensors {
    /// `K⁽¹⁾ = I`, everything else zero.
    pub fn identity() -> Self {
        let mut k1 = [[0.0; 3]; 3];
        for (i, r) in k1.iter_mut().enumerate() {
            r[i] = 1.0;
        }
        Self { k1, k2: [[0.0; 3]; 3], l1: [[0.0; 3]; 3], l2: [[0.0; 3]; 3] }
    }

    /// `(K⁽¹⁾(f − ∇p) + K⁽²⁾g, L⁽¹⁾(f − ∇p) + L⁽²⁾g)`
    pub fn velocity(&self, f: V3, g: V3, grad_p: V3) -> (V3, V3) {
        let c = [0, 1, 2].map(|i| f[i] - grad_p[i]);
        let (a, b) = (mat_vec(&self.k1, c), mat_vec(&self.k2, g));
        let (x, y) = (mat_vec(&self.l1, c), mat_vec(&self.l2, g));
        ([0, 1, 2].map(|i| a[i] + b[i]), [0, 1, 2].map(|i| x[i] + y[i]))
    }
}

pub struct DarcySolution {
    pub mesh: Arc<TetMesh>,
    pub tensors: DarcyTensors,
    /// vertex values, zero mean
    pub p: Vec<f64>,
    /// elementwise gradient of `p`
    pub grad_p: Vec<V3>,
    /// velocity and microrotation at element centroids
    pub u: Vec<V3>,
    pub w: Vec<V3>,
    /// `max_q |∫K⁽¹⁾∇p·∇q − ∫(K⁽¹⁾f + K⁽²⁾g)·∇q|` over all P1 test functions
    pub flux_residual: f64,
    /// sum of the residual vector, zero up to round-off for the Neumann problem
    pub residual_sum: f64,
    /// cubes per side when solved on the structured unit cube
    pub resolution: Option<usize>,
    locator: PointLocator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarcySummary {
    pub resolution: Option<usize>,
    pub p_min: f64,
    pub p_max: f64,
    pub p_mean: f64,
    pub flux_residual: f64,
    pub residual_sum: f64,
    pub u_l2: f64,
    pub w_l2: f64,
}

fn grad_p_of(mesh: &TetMesh, p: &[f64], t: usize) -> V3 {
    let geo = TetGeom::new(mesh.tet_coords(t));
    let tv = mesh.tets[t];
    let mut g = [0.0; 3];
    for a in 0..4 {
        for d in 0..3 {
            g[d] += p[tv[a]] * geo.grad_l[a][d];
        }
    }
    g
}

fn vertex_groups(mesh: &TetMesh) -> DofGroups {
    let n = mesh.n_vertices();
    DofGroups { group_of: (0..n).chain([n]).collect(), coords: mesh.vertices.iter().copied().chain([[0.5; 3]]).collect(), root: vec![n] }
}

/// Solves on a structured unit-cube mesh with `n` cubes per side.
pub fn solve_darcy_on_cube(tensors: DarcyTensors, f: Field, g: Field, n: usize) -> Result<DarcySolution> {
    let mut s = solve_darcy(tensors, f, g, Arc::new(unit_cube_mesh(n)?))?;
    s.resolution = Some(n);
    Ok(s)
}

pub fn solve_darcy(tensors: DarcyTensors, f: Field, g: Field, mesh: Arc<TetMesh>) -> Result<DarcySolution> {
    let lmin = sym_min_eigenvalue(&tensors.k1);
    if !(lmin > 0.0) {
        return Err(Error::IndefiniteTensor(lmin));
    }
    let nv = mesh.n_vertices();
    let rule = tet_rule_for_degree(LOAD_DEGREE);
    let mut a = Triplets::new(nv + 1, nv + 1);
    let mut b = vec![0.0; nv + 1];
    let k = &tensors.k1;
    for t in 0..mesh.n_tets() {
        let geo = TetGeom::new(mesh.tet_coords(t));
        let tv = mesh.tets[t];
        let gl = geo.grad_l;
        for i in 0..4 {
            let kg = [0, 1, 2].map(|r| k[r][0] * gl[i][0] + k[r][1] * gl[i][1] + k[r][2] * gl[i][2]);
            for j in 0..4 {
                // row j (test), column i (trial): ∫ K∇φ_i · ∇φ_j
                let v = geo.volume * (kg[0] * gl[j][0] + kg[1] * gl[j][1] + kg[2] * gl[j][2]);
                a.push(tv[j], tv[i], v);
            }
            a.push(nv, tv[i], geo.volume / 4.0);
            a.push(tv[i], nv, geo.volume / 4.0);
        }
        for &(l, w) in &rule {
            let x = geo.point(l);
            let (s, _) = tensors.velocity(f(x), g(x), [0.0; 3]);
            for j in 0..4 {
                b[tv[j]] += w * geo.volume * (s[0] * gl[j][0] + s[1] * gl[j][1] + s[2] * gl[j][2]);
            }
        }
    }
    let mat: CsrMatrix = a.to_csr();
    let lu = SparseLu::factorize(&mat, Some(&vertex_groups(&mesh)))?;
    let x = lu.solve(&b);
    let rel = lu.residual(&x, &b);
    if !rel.is_finite() || rel > 1e-9 {
        return Err(Error::SolverBreakdown(rel));
    }
    let p = x[..nv].to_vec();
    // residual of the Neumann problem without the multiplier
    let mut r = mat.matvec(&[p.clone(), vec![0.0]].concat());
    r.truncate(nv);
    for (ri, bi) in r.iter_mut().zip(&b) {
        *ri -= bi;
    }
    let flux_residual = r.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let residual_sum = r.iter().sum();
    let (grad_p, u, w) = element_fields(&mesh, &tensors, &p, f, g);
    let locator = PointLocator::new(&mesh);
    Ok(DarcySolution { mesh, tensors, p, grad_p, u, w, flux_residual, residual_sum, resolution: None, locator })
}

fn element_fields(mesh: &TetMesh, t: &DarcyTensors, p: &[f64], f: Field, g: Field) -> (Vec<V3>, Vec<V3>, Vec<V3>) {
    let nt = mesh.n_tets();
    let (mut gp, mut u, mut w) = (Vec::with_capacity(nt), Vec::with_capacity(nt), Vec::with_capacity(nt));
    for e in 0..nt {
        let grad = grad_p_of(mesh, p, e);
        let c = TetGeom::new(mesh.tet_coords(e)).point([0.25; 4]);
        let (a, b) = t.velocity(f(c), g(c), grad);
        gp.push(grad);
        u.push(a);
        w.push(b);
    }
    (gp, u, w)
}

/// `(u, w)` at element centroids for a given P1 pressure.
pub fn reconstruct_uw(tensors: &DarcyTensors, mesh: &TetMesh, p: &[f64], f: Field, g: Field) -> (Vec<V3>, Vec<V3>) {
    let (_, u, w) = element_fields(mesh, tensors, p, f, g);
    (u, w)
}

impl DarcySolution {
    pub fn mean_p(&self) -> f64 {
        let mut s = 0.0;
        let mut vol = 0.0;
        for t in 0..self.mesh.n_tets() {
            let v = self.mesh.tet_volume(t);
            s += v * self.mesh.tets[t].iter().map(|&i| self.p[i]).sum::<f64>() / 4.0;
            vol += v;
        }
        s / vol
    }

    /// Pressure at a point of the cube.
    pub fn p_at(&self, x: V3) -> Option<f64> {
        let (t, l) = self.locator.locate(&self.mesh, x)?;
        Some((0..4).map(|a| l[a] * self.p[self.mesh.tets[t][a]]).sum())
    }

    /// `(u, w)` at a point, with the pressure gradient of the containing element.
    pub fn uw_at(&self, x: V3, f: Field, g: Field) -> Option<(V3, V3)> {
        let (t, _) = self.locator.locate(&self.mesh, x)?;
        Some(self.tensors.velocity(f(x), g(x), self.grad_p[t]))
    }

    /// `‖u‖` and `‖w‖` over the cube, with f and g sampled at quadrature points.
    pub fn l2_norms(&self, f: Field, g: Field) -> (f64, f64) {
        let rule = tet_rule_for_degree(LOAD_DEGREE);
        let (mut su, mut sw) = (0.0, 0.0);
        for t in 0..self.mesh.n_tets() {
            let geo = TetGeom::new(self.mesh.tet_coords(t));
            for &(l, wq) in &rule {
                let x = geo.point(l);
                let (a, b) = self.tensors.velocity(f(x), g(x), self.grad_p[t]);
                su += wq * geo.volume * (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
                sw += wq * geo.volume * (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
            }
        }
        (su.sqrt(), sw.sqrt())
    }

    /// `‖p − p*‖` after removing both means.
    pub fn l2_error(&self, exact: impl Fn(V3) -> f64) -> f64 {
        let rule = tet_rule_for_degree(LOAD_DEGREE);
        let (mut me, mut vol) = (0.0, 0.0);
        for t in 0..self.mesh.n_tets() {
            let geo = TetGeom::new(self.mesh.tet_coords(t));
            for &(l, wq) in &rule {
                me += wq * geo.volume * exact(geo.point(l));
            }
            vol += geo.volume;
        }
        me /= vol;
        let mp = self.mean_p();
        let mut s = 0.0;
        for t in 0..self.mesh.n_tets() {
            let geo = TetGeom::new(self.mesh.tet_coords(t));
            let tv = self.mesh.tets[t];
            for &(l, wq) in &rule {
                let ph: f64 = (0..4).map(|a| l[a] * self.p[tv[a]]).sum::<f64>() - mp;
                let d = ph - (exact(geo.point(l)) - me);
                s += wq * geo.volume * d * d;
            }
        }
        s.sqrt()
    }

    pub fn summary(&self, f: Field, g: Field) -> DarcySummary {
        let (u_l2, w_l2) = self.l2_norms(f, g);
        DarcySummary {
            resolution: self.resolution,
            p_min: self.p.iter().cloned().fold(f64::INFINITY, f64::min),
            p_max: self.p.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            p_mean: self.mean_p(),
            flux_residual: self.flux_residual,
            residual_sum: self.residual_sum,
            u_l2,
            w_l2,
        }
    }

    pub fn write_vtk(&self, path: &Path) -> std::io::Result<()> {
        vtk::write(
            path,
            &self.mesh,
            "darcy",
            &[vtk::Data::PointScalar("p", &self.p), vtk::Data::CellVector("u", &self.u), vtk::Data::CellVector("w", &self.w)],
        )
    }
}

#[cfg(test)]
mod tests;
