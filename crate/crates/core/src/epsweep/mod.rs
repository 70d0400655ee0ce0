//! The ε-resolved micropolar problem on the perforated cube and its comparison
//! with the homogenized limit.
//!
//! Velocity, microrotation and pressure use the MINI triple (P1+bubble, P1, P1),
//! the same element as the reference cell problems, so that unfolded fields and
//! cell solutions live in identical spaces. Obstacles are zero-extended: cell
//! averages are fluid integrals divided by the full cell volume `ε³`.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{estimate_constants, ConstantsReport, WellPosednessVerdict, DEFAULT_SAFETY_FACTOR};
use crate::cell::{
    assemble_micropolar, compute_effective_tensors, existence_gate, two_scale_reconstruct, CellElement, CellProblem,
    CellSolution, DimensionlessParams, EffectiveTensors, TwoScaleSample,
};
use crate::darcy::{solve_darcy_on_cube, DarcySolution, DarcyTensors, Field};
use crate::error::{Error, Result};
use crate::fem::quadrature::{tet_rule_for_degree, tri_rule};
use crate::fem::{build_space, worker_count, Constraint, Family, Space};
use crate::forcing::Forcing;
use crate::geom::{add, dot3, norm3, scale, sub, V3};
use crate::mesh::{build_macro_mesh, build_unit_cell_mesh, vtk, FaceTag, MacroMesh, ObstacleSpec};

/// Exterior-trace and obstacle normal tolerance.
pub const TRACE_TOL: f64 = 1e-12;
/// A scaled norm is uniformly bounded when its max over ε is at most this times its min.
pub const APRIORI_FACTOR: f64 = 3.0;
/// Allowed growth of an error from one ε to the next smaller one.
pub const MONOTONE_TOL: f64 = 1.05;

pub const CSV_HEADER: &str = "epsilon,u_scaled_norm,Du_norm,w_norm,Dw_scaled_norm,p_scaled_norm,\
cell_avg_err_u,cell_avg_err_w,unfold_err_u,unfold_err_w";

/// Unscaled fluid-domain norms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpsNorms {
    pub u: f64,
    pub du: f64,
    pub w: f64,
    pub dw: f64,
    pub p: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsInvariants {
    pub exterior_u: f64,
    pub exterior_w: f64,
    pub normal_u: f64,
    pub normal_w: f64,
}

pub struct EpsSolution {
    pub epsilon: f64,
    pub params: DimensionlessParams,
    pub mesh: Arc<MacroMesh>,
    pub vel: Space,
    pub rot: Space,
    pub pres: Space,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub p: Vec<f64>,
    pub residual: f64,
    pub norms: EpsNorms,
    pub verdict: Option<WellPosednessVerdict>,
}

impl std::fmt::Debug for EpsSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EpsSolution")
            .field("epsilon", &self.epsilon)
            .field("n_dofs", &(self.u.len() + self.w.len() + self.p.len()))
            .field("residual", &self.residual)
            .field("norms", &self.norms)
            .finish()
    }
}

pub fn solve_eps_problem(mesh: Arc<MacroMesh>, params: DimensionlessParams, f: Field, g: Field) -> Result<EpsSolution> {
    solve_eps_problem_with(mesh, params, f, g, None, DEFAULT_SAFETY_FACTOR)
}

/// Solves with the existence condition checked against `constants` (estimated
/// on the cell mesh when absent and `γ ≠ 0`).
pub fn solve_eps_problem_with(
    mesh: Arc<MacroMesh>,
    params: DimensionlessParams,
    f: Field,
    g: Field,
    constants: Option<&ConstantsReport>,
    safety: f64,
) -> Result<EpsSolution> {
    let verdict = existence_gate(&mesh.cell, &params, constants, safety)?;
    let eps = mesh.epsilon;
    let params = params.with_epsilon(eps)?;
    let cons = [Constraint::ZeroExteriorTrace, Constraint::ZeroNormalOnObstacle];
    let vel = build_space(&*mesh, Family::VectorP1Bubble, &cons)?;
    let rot = build_space(&*mesh, Family::VectorP1, &cons)?;
    let pres = build_space(&*mesh, Family::ScalarP1, &[Constraint::ZeroMean])?;
    let op = assemble_micropolar(&vel, &rot, &pres, params.coefficients(eps * eps * params.rc))?;
    let fu: Vec<f64> = vel.load(f).into_iter().map(|x| x / eps).collect();
    let b = op.rhs(&fu, &rot.load(g));
    let s = op.system.factor()?.solve(&b)?;
    let mut blocks = s.blocks.into_iter();
    let (u, w, p) = (blocks.next().unwrap(), blocks.next().unwrap(), blocks.next().unwrap());
    let (nu, ndu) = l2_h1(&vel, &u);
    let (nw, ndw) = l2_h1(&rot, &w);
    let (np, _) = l2_h1(&pres, &p);
    let sol = EpsSolution {
        epsilon: eps,
        params,
        mesh,
        vel,
        rot,
        pres,
        u,
        w,
        p,
        residual: s.residual,
        norms: EpsNorms { u: nu, du: ndu, w: nw, dw: ndw, p: np },
        verdict,
    };
    sol.check_invariants()?;
    Ok(sol)
}

/// `(‖v‖, ‖∇v‖)` by quadrature exact for the squared fields.
fn l2_h1(space: &Space, coeffs: &[f64]) -> (f64, f64) {
    let nodal = space.expand(coeffs);
    let rule = tet_rule_for_degree(2 * space.family.shape().degree());
    let (mut a, mut b) = (0.0, 0.0);
    for t in 0..space.mesh.n_tets() {
        let vol = space.mesh.tet_volume(t);
        for &(l, w) in &rule {
            let v = space.eval(&nodal, t, l);
            let g = space.eval_grad(&nodal, t, l);
            a += w * vol * dot3(v, v);
            b += w * vol * (dot3(g[0], g[0]) + dot3(g[1], g[1]) + dot3(g[2], g[2]));
        }
    }
    (a.sqrt(), b.sqrt())
}

impl EpsSolution {
    pub fn invariants(&self) -> EpsInvariants {
        let ext = |s: &Space, c: &[f64]| {
            let nodal = s.expand(c);
            let mut m: f64 = 0.0;
            for f in self.mesh.mesh.faces_with(FaceTag::Exterior) {
                for &v in &f.verts {
                    m = m.max(norm3([nodal[3 * v], nodal[3 * v + 1], nodal[3 * v + 2]]));
                }
            }
            m
        };
        EpsInvariants {
            exterior_u: ext(&self.vel, &self.u),
            exterior_w: ext(&self.rot, &self.w),
            normal_u: self.vel.max_normal_component(&self.u),
            normal_w: self.rot.max_normal_component(&self.w),
        }
    }

    pub fn check_invariants(&self) -> Result<()> {
        let i = self.invariants();
        let worst = i.exterior_u.max(i.exterior_w).max(i.normal_u).max(i.normal_w);
        if worst > TRACE_TOL {
            return Err(Error::InconsistentSolutions(format!("boundary trace {worst:e} above {TRACE_TOL:e}")));
        }
        Ok(())
    }

    /// `ε⁻¹‖u‖, ‖Du‖, ‖w‖, ε‖Dw‖, ε‖p‖`.
    pub fn scaled_norms(&self) -> [f64; 5] {
        let (e, n) = (self.epsilon, self.norms);
        [n.u / e, n.du, n.w, e * n.dw, e * n.p]
    }

    /// Fluid integrals of `u` and `w` over each cell, in cell order.
    pub fn cell_integrals(&self) -> Vec<(V3, V3)> {
        let mm = &self.mesh;
        let nt = mm.cell.mesh.n_tets();
        let (nu, nw) = (self.vel.expand(&self.u), self.rot.expand(&self.w));
        let rule = tet_rule_for_degree(self.vel.family.shape().degree());
        let mut out = vec![([0.0; 3], [0.0; 3]); mm.n_cells()];
        for t in 0..mm.mesh.n_tets() {
            let vol = mm.mesh.tet_volume(t);
            let acc = &mut out[t / nt];
            for &(l, wq) in &rule {
                acc.0 = add(acc.0, scale(wq * vol, self.vel.eval(&nu, t, l)));
                acc.1 = add(acc.1, scale(wq * vol, self.rot.eval(&nw, t, l)));
            }
        }
        out
    }

    /// Vertex values of `u`, `w`, `p` (the velocity bubble is dropped).
    pub fn write_vtk(&self, path: &Path) -> std::io::Result<()> {
        let nv = self.mesh.mesh.n_vertices();
        let vecs = |s: &Space, c: &[f64]| -> Vec<V3> {
            let n = s.expand(c);
            (0..nv).map(|v| [n[3 * v], n[3 * v + 1], n[3 * v + 2]]).collect()
        };
        let (u, w) = (vecs(&self.vel, &self.u), vecs(&self.rot, &self.w));
        let p = self.pres.expand(&self.p);
        vtk::write(
            path,
            &self.mesh.mesh,
            &format!("micropolar eps={}", self.epsilon),
            &[vtk::Data::PointVector("u", &u), vtk::Data::PointVector("w", &w), vtk::Data::PointScalar("p", &p[..nv])],
        )
    }
}

/// Volume-weighted means of the Darcy fields and forcing over each macro cell.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CellMeans {
    pub u: V3,
    pub w: V3,
    pub grad_p: V3,
    pub f: V3,
    pub g: V3,
}

/// Darcy elements are binned by centroid; exact when the Darcy grid refines the cell lattice.
pub fn darcy_cell_means(mesh: &MacroMesh, darcy: &DarcySolution, f: Field, g: Field) -> Vec<CellMeans> {
    let m = mesh.m;
    let mut acc = vec![(CellMeans::default(), 0.0); mesh.n_cells()];
    for t in 0..darcy.mesh.n_tets() {
        let x = darcy.mesh.tet_coords(t);
        let c = scale(0.25, add(add(x[0], x[1]), add(x[2], x[3])));
        let k = c.map(|ci| ((ci / mesh.epsilon).floor().max(0.0) as usize).min(m - 1));
        let (a, v) = &mut acc[k[0] * m * m + k[1] * m + k[2]];
        let vol = darcy.mesh.tet_volume(t);
        a.u = add(a.u, scale(vol, darcy.u[t]));
        a.w = add(a.w, scale(vol, darcy.w[t]));
        a.grad_p = add(a.grad_p, scale(vol, darcy.grad_p[t]));
        a.f = add(a.f, scale(vol, f(c)));
        a.g = add(a.g, scale(vol, g(c)));
        *v += vol;
    }
    acc.into_iter()
        .map(|(a, v)| {
            let s = if v > 0.0 { 1.0 / v } else { 0.0 };
            CellMeans { u: scale(s, a.u), w: scale(s, a.w), grad_p: scale(s, a.grad_p), f: scale(s, a.f), g: scale(s, a.g) }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellAverageRow {
    pub cell: usize,
    pub center: V3,
    /// `ε⁻¹` times the cell average of zero-extended `u_ε`
    pub u_eps: V3,
    /// cell average of zero-extended `w_ε`
    pub w_eps: V3,
    pub u_darcy: V3,
    pub w_darcy: V3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellAverageTable {
    pub rows: Vec<CellAverageRow>,
    /// `(Σ_k ε³ |err_k|²)^{1/2}`
    pub err_u: f64,
    pub err_w: f64,
}

/// Compares the scaled cell averages of the ε-solution with the cell means of the Darcy fields.
pub fn cell_average_compare(eps: &EpsSolution, darcy: &DarcySolution) -> CellAverageTable {
    let mm = &eps.mesh;
    let e = eps.epsilon;
    let vol = e * e * e;
    let means = darcy_cell_means(mm, darcy, &crate::darcy::zero_field, &crate::darcy::zero_field);
    let (mut su, mut sw) = (0.0, 0.0);
    let rows: Vec<CellAverageRow> = eps
        .cell_integrals()
        .into_iter()
        .zip(&means)
        .enumerate()
        .map(|(c, ((iu, iw), d))| {
            let r = CellAverageRow {
                cell: c,
                center: add(mm.cell_origin(c), [0.5 * e; 3]),
                u_eps: scale(1.0 / (e * vol), iu),
                w_eps: scale(1.0 / vol, iw),
                u_darcy: d.u,
                w_darcy: d.w,
            };
            su += vol * norm3(sub(r.u_eps, r.u_darcy)).powi(2);
            sw += vol * norm3(sub(r.w_eps, r.w_darcy)).powi(2);
            r
        })
        .collect();
    CellAverageTable { rows, err_u: su.sqrt(), err_w: sw.sqrt() }
}

/// Per-cell two-scale reference `(û, ŵ)(x_k, ·)` from cell-averaged Darcy data.
pub fn two_scale_reference(
    mesh: &MacroMesh,
    darcy: &DarcySolution,
    cell_solutions: &[CellSolution],
    f: Field,
    g: Field,
) -> Result<Vec<TwoScaleSample>> {
    let means = darcy_cell_means(mesh, darcy, f, g);
    let fs: Vec<V3> = means.iter().map(|m| m.f).collect();
    let gs: Vec<V3> = means.iter().map(|m| m.g).collect();
    let ps: Vec<V3> = means.iter().map(|m| m.grad_p).collect();
    two_scale_reconstruct(cell_solutions, &fs, &gs, &ps)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnfoldError {
    /// `‖ε⁻¹T_ε(u_ε) − û‖_{L²(Ω×Y*)}`
    pub u: f64,
    /// `‖T_ε(w_ε) − ŵ‖_{L²(Ω×Y*)}`
    pub w: f64,
}

/// Unfolds `u_ε`, `w_ε` cell by cell and measures the distance to the reference,
/// one sample per cell (constant in x within a cell).
///
/// Macro tet `c·n_t + t` is the image of cell tet `t` under `y ↦ ε(k_c + y)`, with the
/// same vertex order, so both fields are evaluated at identical barycentric points.
pub fn unfold_field(eps: &EpsSolution, cell: &CellProblem, reference: &[TwoScaleSample]) -> Result<UnfoldError> {
    let mm = &eps.mesh;
    let nt = mm.cell.mesh.n_tets();
    if cell.vel.mesh.n_tets() != nt
        || cell.vel.family != eps.vel.family
        || cell.rot.family != eps.rot.family
        || reference.len() != mm.n_cells()
    {
        return Err(Error::MeshMismatch);
    }
    let e = eps.epsilon;
    let (nu, nw) = (eps.vel.expand(&eps.u), eps.rot.expand(&eps.w));
    let rule = tet_rule_for_degree(2 * eps.vel.family.shape().degree());
    let (mut su, mut sw) = (0.0, 0.0);
    for (c, r) in reference.iter().enumerate() {
        let (ru, rw) = (cell.vel.expand(&r.u), cell.rot.expand(&r.w));
        for t in 0..nt {
            let dx = e * e * e * cell.vel.mesh.tet_volume(t);
            let tm = c * nt + t;
            for &(l, wq) in &rule {
                let du = sub(scale(1.0 / e, eps.vel.eval(&nu, tm, l)), cell.vel.eval(&ru, t, l));
                let dw = sub(eps.rot.eval(&nw, tm, l), cell.rot.eval(&rw, t, l));
                su += wq * dx * dot3(du, du);
                sw += wq * dx * dot3(dw, dw);
            }
        }
    }
    Ok(UnfoldError { u: su.sqrt(), w: sw.sqrt() })
}

/// Largest gap between the boundary unfolding (trace from the three face
/// vertices) and the volume unfolding at obstacle-surface quadrature points.
pub fn boundary_unfolding_defect(eps: &EpsSolution) -> f64 {
    let mm = &eps.mesh;
    let nt = mm.cell.mesh.n_tets();
    let mut worst: f64 = 0.0;
    for (space, coeffs) in [(&eps.vel, &eps.u), (&eps.rot, &eps.w)] {
        let nodal = space.expand(coeffs);
        let at = |v: usize| [nodal[3 * v], nodal[3 * v + 1], nodal[3 * v + 2]];
        for f in mm.mesh.obstacle_faces() {
            let tv = mm.mesh.tets[f.tet];
            let c = f.tet / nt;
            let ct = mm.cell.mesh.tets[f.tet % nt];
            let origin = mm.cell_origin(c);
            for &(lam, _) in &tri_rule() {
                let mut l = [0.0; 4];
                let mut trace = [0.0; 3];
                for a in 0..3 {
                    let k = tv.iter().position(|&v| v == f.verts[a]).expect("face of its tet");
                    l[k] = lam[a];
                    trace = add(trace, scale(lam[a], at(f.verts[a])));
                }
                // the sample point seen from the cell: x = ε(k + y)
                let y = (0..4).fold([0.0; 3], |s, a| add(s, scale(l[a], mm.cell.mesh.vertices[ct[a]])));
                let x = (0..4).fold([0.0; 3], |s, a| add(s, scale(l[a], mm.mesh.vertices[tv[a]])));
                let gap = norm3(sub(x, add(origin, scale(eps.epsilon, y))));
                worst = worst.max(norm3(sub(trace, space.eval(&nodal, f.tet, l)))).max(gap);
            }
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub u_scaled_norm: f64,
    #[serde(rename = "Du_norm")]
    pub du_norm: f64,
    pub w_norm: f64,
    #[serde(rename = "Dw_scaled_norm")]
    pub dw_scaled_norm: f64,
    pub p_scaled_norm: f64,
    pub cell_avg_err_u: Option<f64>,
    pub cell_avg_err_w: Option<f64>,
    pub unfold_err_u: Option<f64>,
    pub unfold_err_w: Option<f64>,
}

impl ConvergenceRow {
    fn norms(&self) -> [f64; 5] {
        [self.u_scaled_norm, self.du_norm, self.w_norm, self.dw_scaled_norm, self.p_scaled_norm]
    }

    fn errors(&self) -> Option<[f64; 4]> {
        Some([self.cell_avg_err_u?, self.cell_avg_err_w?, self.unfold_err_u?, self.unfold_err_w?])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormFlags {
    pub u: bool,
    pub du: bool,
    pub w: bool,
    pub dw: bool,
    pub p: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorFlags {
    pub cell_avg_u: bool,
    pub cell_avg_w: bool,
    pub unfold_u: bool,
    pub unfold_w: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// decreasing ε
    pub rows: Vec<ConvergenceRow>,
    /// max over ε ≤ `APRIORI_FACTOR` × min over ε, per scaled norm
    pub bounded: NormFlags,
    /// each error at most `MONOTONE_TOL` times its value at the previous ε; set once errors are attached
    pub monotone: Option<ErrorFlags>,
}

pub fn apriori_check(solutions: &[&EpsSolution]) -> Result<ConvergenceReport> {
    let rows = solutions
        .iter()
        .map(|s| {
            let n = s.scaled_norms();
            ConvergenceRow {
                epsilon: s.epsilon,
                u_scaled_norm: n[0],
                du_norm: n[1],
                w_norm: n[2],
                dw_scaled_norm: n[3],
                p_scaled_norm: n[4],
                cell_avg_err_u: None,
                cell_avg_err_w: None,
                unfold_err_u: None,
                unfold_err_w: None,
            }
        })
        .collect();
    ConvergenceReport::from_rows(rows)
}

impl ConvergenceReport {
    pub fn from_rows(mut rows: Vec<ConvergenceRow>) -> Result<Self> {
        rows.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        rows.dedup_by(|a, b| a.epsilon == b.epsilon);
        if rows.len() < 2 {
            return Err(Error::TooFewSamples);
        }
        let flag = |i: usize| {
            let v = rows.iter().map(|r| r.norms()[i]);
            let (lo, hi) = v.fold((f64::INFINITY, 0.0_f64), |(lo, hi), x| (lo.min(x), hi.max(x)));
            hi <= APRIORI_FACTOR * lo
        };
        let bounded = NormFlags { u: flag(0), du: flag(1), w: flag(2), dw: flag(3), p: flag(4) };
        let mut r = ConvergenceReport { rows, bounded, monotone: None };
        r.update_monotone();
        Ok(r)
    }

    /// Records the comparison errors for the row with this ε.
    pub fn attach_errors(&mut self, epsilon: f64, avg: &CellAverageTable, unfold: &UnfoldError) {
        if let Some(r) = self.rows.iter_mut().find(|r| r.epsilon == epsilon) {
            r.cell_avg_err_u = Some(avg.err_u);
            r.cell_avg_err_w = Some(avg.err_w);
            r.unfold_err_u = Some(unfold.u);
            r.unfold_err_w = Some(unfold.w);
        }
        self.update_monotone();
    }

    fn update_monotone(&mut self) {
        let errs: Option<Vec<[f64; 4]>> = self.rows.iter().map(|r| r.errors()).collect();
        self.monotone = errs.map(|e| {
            let ok = |i: usize| e.windows(2).all(|w| w[1][i] <= MONOTONE_TOL * w[0][i]);
            ErrorFlags { cell_avg_u: ok(0), cell_avg_w: ok(1), unfold_u: ok(2), unfold_w: ok(3) }
        });
    }

    pub fn all_bounded(&self) -> bool {
        let b = self.bounded;
        b.u && b.du && b.w && b.dw && b.p
    }

    pub fn all_monotone(&self) -> bool {
        self.monotone.is_some_and(|m| m.cell_avg_u && m.cell_avg_w && m.unfold_u && m.unfold_w)
    }

    /// Shortest round-trip decimal for every value; missing errors are empty cells.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            let n = r.norms();
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.epsilon,
                n[0],
                n[1],
                n[2],
                n[3],
                n[4],
                opt(r.cell_avg_err_u),
                opt(r.cell_avg_err_w),
                opt(r.unfold_err_u),
                opt(r.unfold_err_w)
            ));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    pub per_cell_resolution: usize,
    pub obstacle: ObstacleSpec,
    pub params: DimensionlessParams,
    pub f: Forcing,
    pub g: Forcing,
    /// cubes per side of the Darcy mesh; a multiple of every `1/ε`
    pub darcy_resolution: usize,
    pub safety_factor: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            epsilons: vec![1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0],
            per_cell_resolution: 6,
            obstacle: ObstacleSpec::sphere([0.5; 3], 0.25),
            params: DimensionlessParams::gamma_zero(0.5, 1.0, 1.0).expect("valid defaults"),
            f: Forcing::Constant([1.0, 0.0, 0.0]),
            g: Forcing::Constant([0.0; 3]),
            darcy_resolution: 12,
            safety_factor: DEFAULT_SAFETY_FACTOR,
        }
    }
}

/// `1/ε` when it is an integer at least 2.
pub fn cells_per_axis(epsilon: f64) -> Result<usize> {
    let mf = 1.0 / epsilon;
    let m = mf.round();
    if !(epsilon > 0.0) || m < 2.0 || (mf - m).abs() > 1e-9 * mf {
        return Err(Error::NonIntegerTiling(epsilon));
    }
    Ok(m as usize)
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.obstacle.validate()?;
        self.f.validate()?;
        self.g.validate()?;
        if self.epsilons.len() < 2 {
            return Err(Error::TooFewSamples);
        }
        for &e in &self.epsilons {
            let m = cells_per_axis(e)?;
            if self.darcy_resolution == 0 || self.darcy_resolution % m != 0 {
                return Err(Error::InvalidParameter(format!(
                    "darcy resolution {} is not a multiple of 1/epsilon = {m}",
                    self.darcy_resolution
                )));
            }
        }
        if !(self.safety_factor >= 1.0) {
            return Err(Error::InvalidParameter(format!("safety factor {} below 1", self.safety_factor)));
        }
        Ok(())
    }
}

pub struct SweepOutput {
    pub report: ConvergenceReport,
    /// MINI cell tensors driving the Darcy reference
    pub tensors: EffectiveTensors,
    pub darcy: DarcySolution,
    pub tables: Vec<CellAverageTable>,
    pub unfold: Vec<UnfoldError>,
    /// `boundary_unfolding_defect` per ε
    pub boundary_defects: Vec<f64>,
    /// kept only when requested, decreasing ε
    pub solutions: Vec<EpsSolution>,
}

/// Cell problems, Darcy reference, then one ε-resolved solve per ε (concurrent up
/// to `worker_count()`); the report is assembled in a fixed order.
pub fn run_sweep(cfg: &SweepConfig, keep_solutions: bool) -> Result<SweepOutput> {
    cfg.validate()?;
    let cell_mesh = build_unit_cell_mesh(cfg.per_cell_resolution, cfg.obstacle)?;
    let constants = if cfg.params.gamma() == 0.0 { None } else { Some(estimate_constants(&cell_mesh)?) };
    let cell = CellProblem::with_element(&cell_mesh, cfg.params, constants.as_ref(), cfg.safety_factor, CellElement::Mini)?;
    let cell_solutions = cell.solve_all()?;
    let tensors = compute_effective_tensors(&cell_solutions)?;
    let (f, g) = (cfg.f.field(), cfg.g.field());
    let darcy = solve_darcy_on_cube(DarcyTensors::from(&tensors), &f, &g, cfg.darcy_resolution)?;

    let mut eps = cfg.epsilons.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    type Solved = (EpsSolution, CellAverageTable, UnfoldError, f64);
    let one = |e: f64| -> Result<Solved> {
        let mm = Arc::new(build_macro_mesh(e, cfg.per_cell_resolution, cfg.obstacle)?);
        let s = solve_eps_problem_with(mm, cfg.params, &f, &g, constants.as_ref(), cfg.safety_factor)?;
        let table = cell_average_compare(&s, &darcy);
        let reference = two_scale_reference(&s.mesh, &darcy, &cell_solutions, &f, &g)?;
        let unfold = unfold_field(&s, &cell, &reference)?;
        let defect = boundary_unfolding_defect(&s);
        Ok((s, table, unfold, defect))
    };
    let workers = worker_count().clamp(1, eps.len());
    let mut results: Vec<Option<Result<Solved>>> = (0..eps.len()).map(|_| None).collect();
    std::thread::scope(|sc| {
        for (w, chunk) in results.chunks_mut(eps.len().div_ceil(workers)).enumerate() {
            let (one, eps) = (&one, &eps);
            let start = w * eps.len().div_ceil(workers);
            sc.spawn(move || {
                for (j, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(one(eps[start + j]));
                }
            });
        }
    });
    let mut solved = Vec::with_capacity(eps.len());
    for r in results {
        solved.push(r.expect("every job ran")?);
    }
    let mut report = apriori_check(&solved.iter().map(|s| &s.0).collect::<Vec<_>>())?;
    let (mut tables, mut unfolds, mut defects) = (Vec::new(), Vec::new(), Vec::new());
    let mut solutions = Vec::new();
    for (s, table, unfold, defect) in solved {
        report.attach_errors(s.epsilon, &table, &unfold);
        tables.push(table);
        unfolds.push(unfold);
        defects.push(defect);
        if keep_solutions {
            solutions.push(s);
        }
    }
    Ok(SweepOutput { report, tensors, darcy, tables, unfold: unfolds, boundary_defects: defects, solutions })
}
