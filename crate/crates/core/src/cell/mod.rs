//! The six local micropolar problems on the perforated cell and the
//! effective tensors they define.

pub mod operator;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{check_wellposedness, estimate_constants, ConstantsReport, WellPosednessVerdict, DEFAULT_SAFETY_FACTOR};
use crate::error::{Error, Result};
use crate::fem::{build_space, worker_count, Constraint, Family, SaddleFactor, Space};
use crate::geom::V3;
use crate::mesh::CellMesh;
use crate::sparse::{dot, norm};

pub use operator::{assemble_micropolar, MicropolarCoefficients, MicropolarOperator};

/// Divergence, normal-trace and mean tolerances a cell solution must meet.
pub const DIV_TOL: f64 = 1e-8;
pub const NORMAL_TOL: f64 = 1e-12;
pub const MEAN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessParams {
    #[serde(rename = "N2")]
    pub n2: f64,
    #[serde(rename = "Rc")]
    pub rc: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl DimensionlessParams {
    pub fn new(n2: f64, rc: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { n2, rc, alpha, beta, epsilon: None };
        p.validate()?;
        Ok(p)
    }

    /// The `γ = 0` choice `1/α = N²(1 + β)`.
    pub fn gamma_zero(n2: f64, rc: f64, beta: f64) -> Result<Self> {
        Self::new(n2, rc, 1.0 / (n2 * (1.0 + beta)), beta)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = Some(epsilon);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidParameter(s));
        if !(self.n2 > 0.0 && self.n2 < 1.0) {
            return bad(format!("N2 = {} not in (0, 1)", self.n2));
        }
        if !(self.rc > 0.0 && self.rc.is_finite()) {
            return bad(format!("Rc = {} not positive", self.rc));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha = {} not positive", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta = {} not positive", self.beta));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e <= 1.0) {
                return bad(format!("epsilon = {e} not in (0, 1]"));
            }
        }
        Ok(())
    }

    pub fn inv_alpha(&self) -> f64 {
        1.0 / self.alpha
    }

    pub fn gamma(&self) -> f64 {
        1.0 / self.alpha - self.n2 - self.n2 * self.beta
    }

    pub fn coefficients(&self, r: f64) -> MicropolarCoefficients {
        MicropolarCoefficients { n2: self.n2, inv_alpha: self.inv_alpha(), beta: self.beta, r }
    }
}

/// Velocity / microrotation / pressure elements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellElement {
    /// P2 / P2 / P1
    #[default]
    TaylorHood,
    /// P1+bubble / P1 / P1
    Mini,
}

impl CellElement {
    pub fn families(self) -> (Family, Family) {
        match self {
            CellElement::TaylorHood => (Family::VectorP2, Family::VectorP2),
            CellElement::Mini => (Family::VectorP1Bubble, Family::VectorP1),
        }
    }
}

/// Validates `params` and checks the existence condition.
///
/// `None` when `γ = 0` and no constants were supplied: the condition then holds
/// for any constants, so none are estimated.
pub fn existence_gate(
    mesh: &CellMesh,
    params: &DimensionlessParams,
    constants: Option<&ConstantsReport>,
    safety: f64,
) -> Result<Option<WellPosednessVerdict>> {
    params.validate()?;
    if params.gamma() == 0.0 && constants.is_none() {
        return Ok(None);
    }
    let owned;
    let c = match constants {
        Some(c) => c,
        None => {
            owned = estimate_constants(mesh)?;
            &owned
        }
    };
    let v = check_wellposedness(params, c, safety);
    if !v.satisfied {
        return Err(Error::WellPosednessViolated { gamma_sq: v.gamma * v.gamma, bound: v.bound });
    }
    Ok(Some(v))
}

/// Everything the six problems share: spaces, operator and its factorization.
pub struct CellProblem {
    pub params: DimensionlessParams,
    pub resolution: usize,
    pub radius: f64,
    pub porosity: f64,
    pub element: CellElement,
    /// velocity space
    pub vel: Space,
    /// microrotation space
    pub rot: Space,
    pub pres: Space,
    pub op: MicropolarOperator,
    pub factor: SaddleFactor,
    pub verdict: Option<WellPosednessVerdict>,
}

impl CellProblem {
    /// Checks the existence condition, assembles and factorizes.
    ///
    /// With `γ = 0` the condition holds for any constants and none are computed;
    /// otherwise `constants` is used, or estimated on this mesh when absent.
    pub fn new(mesh: &CellMesh, params: DimensionlessParams, constants: Option<&ConstantsReport>) -> Result<Arc<Self>> {
        Self::with_safety(mesh, params, constants, DEFAULT_SAFETY_FACTOR)
    }

    pub fn with_safety(
        mesh: &CellMesh,
        params: DimensionlessParams,
        constants: Option<&ConstantsReport>,
        safety: f64,
    ) -> Result<Arc<Self>> {
        Self::with_element(mesh, params, constants, safety, CellElement::TaylorHood)
    }

    pub fn with_element(
        mesh: &CellMesh,
        params: DimensionlessParams,
        constants: Option<&ConstantsReport>,
        safety: f64,
        element: CellElement,
    ) -> Result<Arc<Self>> {
        let verdict = existence_gate(mesh, &params, constants, safety)?;
        Self::assemble_unchecked(mesh, params, verdict, element)
    }

    /// Assembles without the existence check.
    pub fn assemble_unchecked(
        mesh: &CellMesh,
        params: DimensionlessParams,
        verdict: Option<WellPosednessVerdict>,
        element: CellElement,
    ) -> Result<Arc<Self>> {
        let cons = [Constraint::Periodic, Constraint::ZeroNormalOnObstacle];
        let (fu, fw) = element.families();
        let vel = build_space(mesh, fu, &cons)?;
        let rot = if fw == fu { vel.clone() } else { build_space(mesh, fw, &cons)? };
        let pres = build_space(mesh, Family::ScalarP1, &[Constraint::Periodic, Constraint::ZeroMean])?;
        let op = assemble_micropolar(&vel, &rot, &pres, params.coefficients(params.rc))?;
        let factor = op.system.factor()?;
        Ok(Arc::new(Self {
            params,
            resolution: mesh.resolution,
            radius: mesh.obstacle.radius,
            porosity: mesh.fluid_volume(),
            element,
            vel,
            rot,
            pres,
            op,
            factor,
            verdict,
        }))
    }

    /// Right-hand side `e_i` in the velocity rows (k = 1) or the microrotation rows (k = 2).
    pub fn rhs(&self, i: usize, k: usize) -> Result<Vec<f64>> {
        check_ik(i, k)?;
        let mut e = [0.0; 3];
        e[i - 1] = 1.0;
        Ok(if k == 1 {
            self.op.rhs(&self.vel.load_constant(e), &vec![0.0; self.rot.n_dofs])
        } else {
            self.op.rhs(&vec![0.0; self.vel.n_dofs], &self.rot.load_constant(e))
        })
    }

    pub fn solve(self: &Arc<Self>, i: usize, k: usize) -> Result<CellSolution> {
        let b = self.rhs(i, k)?;
        let s = self.factor.solve(&b)?;
        let mut blocks = s.blocks.into_iter();
        let sol = CellSolution {
            i,
            k,
            u: blocks.next().unwrap(),
            w: blocks.next().unwrap(),
            pi: blocks.next().unwrap(),
            multiplier: blocks.next().unwrap()[0],
            residual: s.residual,
            problem: Arc::clone(self),
        };
        sol.check_invariants()?;
        Ok(sol)
    }

    /// All six problems, ordered (1,1), (2,1), (3,1), (1,2), (2,2), (3,2).
    pub fn solve_all(self: &Arc<Self>) -> Result<Vec<CellSolution>> {
        let jobs: Vec<(usize, usize)> = (1..=2).flat_map(|k| (1..=3).map(move |i| (i, k))).collect();
        let workers = worker_count().clamp(1, jobs.len());
        let mut out: Vec<Option<Result<CellSolution>>> = (0..jobs.len()).map(|_| None).collect();
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|t| {
                    let jobs = &jobs;
                    s.spawn(move || {
                        (t..jobs.len()).step_by(workers).map(|j| (j, self.solve(jobs[j].0, jobs[j].1))).collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (j, r) in h.join().expect("cell solve worker") {
                    out[j] = Some(r);
                }
            }
        });
        out.into_iter().map(|r| r.unwrap()).collect()
    }
}

fn check_ik(i: usize, k: usize) -> Result<()> {
    if !(1..=3).contains(&i) || !(1..=2).contains(&k) {
        return Err(Error::InvalidParameter(format!("cell problem (i, k) = ({i}, {k})")));
    }
    Ok(())
}

/// Solves one cell problem, building the problem first.
pub fn solve_cell_problem(mesh: &CellMesh, params: DimensionlessParams, i: usize, k: usize) -> Result<CellSolution> {
    check_ik(i, k)?;
    CellProblem::new(mesh, params, None)?.solve(i, k)
}

#[derive(Clone)]
pub struct CellSolution {
    pub i: usize,
    pub k: usize,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub pi: Vec<f64>,
    pub multiplier: f64,
    pub residual: f64,
    pub problem: Arc<CellProblem>,
}

impl std::fmt::Debug for CellSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CellSolution").field("i", &self.i).field("k", &self.k).field("residual", &self.residual).finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub divergence: f64,
    pub normal_u: f64,
    pub normal_w: f64,
    pub mean_pi: f64,
}

impl CellSolution {
    pub fn invariants(&self) -> InvariantReport {
        let p = &self.problem;
        InvariantReport {
            divergence: norm(&p.op.b.matvec_t(&self.u)),
            normal_u: p.vel.max_normal_component(&self.u),
            normal_w: p.rot.max_normal_component(&self.w),
            mean_pi: (dot(&p.op.integral_row, &self.pi) / p.porosity).abs(),
        }
    }

    pub fn check_invariants(&self) -> Result<InvariantReport> {
        let r = self.invariants();
        if r.divergence > DIV_TOL || r.normal_u > NORMAL_TOL || r.normal_w > NORMAL_TOL || r.mean_pi > MEAN_TOL {
            return Err(Error::SolverBreakdown(r.divergence.max(r.mean_pi)));
        }
        Ok(r)
    }

    pub fn integral_u(&self) -> V3 {
        self.problem.vel.integrate(&self.u)
    }

    pub fn integral_w(&self) -> V3 {
        self.problem.rot.integrate(&self.w)
    }
}

pub type Mat3 = [[f64; 3]; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorMesh {
    pub resolution: usize,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTensors {
    #[serde(rename = "K1")]
    pub k1: Mat3,
    #[serde(rename = "K2")]
    pub k2: Mat3,
    #[serde(rename = "L1")]
    pub l1: Mat3,
    #[serde(rename = "L2")]
    pub l2: Mat3,
    pub porosity: f64,
    pub params: DimensionlessParams,
    pub mesh: TensorMesh,
    /// saddle residuals in solve order
    pub residual_report: Vec<f64>,
}

impl EffectiveTensors {
    /// `max |K1 − K1ᵀ| / max |K1|`
    pub fn k1_asymmetry(&self) -> f64 {
        let mut a: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                a = a.max((self.k1[i][j] - self.k1[j][i]).abs());
            }
        }
        a / mat_max_abs(&self.k1)
    }

    pub fn k1_sym_min_eigenvalue(&self) -> f64 {
        sym_min_eigenvalue(&self.k1)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tensors serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }
}

pub fn mat_max_abs(m: &Mat3) -> f64 {
    m.iter().flatten().fold(0.0_f64, |a, x| a.max(x.abs()))
}

pub fn mat_vec(m: &Mat3, v: V3) -> V3 {
    [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

/// Smallest eigenvalue of the symmetric part.
pub fn sym_min_eigenvalue(m: &Mat3) -> f64 {
    let s = faer::Mat::<f64>::from_fn(3, 3, |i, j| 0.5 * (m[i][j] + m[j][i]));
    let e = s.self_adjoint_eigen(faer::Side::Lower).expect("3x3 eigen");
    e.S().column_vector()[0]
}

fn ordered<'a>(solutions: &'a [CellSolution]) -> Result<[[&'a CellSolution; 3]; 2]> {
    if solutions.len() != 6 {
        return Err(Error::InconsistentSolutions(format!("expected 6 solutions, got {}", solutions.len())));
    }
    let first = &solutions[0].problem;
    let mut slot: [[Option<&CellSolution>; 3]; 2] = [[None; 3]; 2];
    for s in solutions {
        if !Arc::ptr_eq(&s.problem, first) {
            return Err(Error::InconsistentSolutions("solutions from different problems".into()));
        }
        check_ik(s.i, s.k).map_err(|e| Error::InconsistentSolutions(e.to_string()))?;
        let e = &mut slot[s.k - 1][s.i - 1];
        if e.is_some() {
            return Err(Error::InconsistentSolutions(format!("duplicate ({}, {})", s.i, s.k)));
        }
        *e = Some(s);
    }
    Ok(slot.map(|r| r.map(|s| s.unwrap())))
}

/// `K⁽ᵏ⁾_{ij} = ∫ u^{j,k}_i` and `L⁽ᵏ⁾_{ij} = ∫ w^{j,k}_i`, so that `∫û = K⁽¹⁾(f − ∇p) + K⁽²⁾g`.
pub fn compute_effective_tensors(solutions: &[CellSolution]) -> Result<EffectiveTensors> {
    let s = ordered(solutions)?;
    let mut t = [[[0.0; 3]; 3]; 4];
    for k in 0..2 {
        for j in 0..3 {
            let iu = s[k][j].integral_u();
            let iw = s[k][j].integral_w();
            for i in 0..3 {
                t[k][i][j] = iu[i];
                t[2 + k][i][j] = iw[i];
            }
        }
    }
    if t.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InconsistentSolutions("non-finite tensor entry".into()));
    }
    let p = &solutions[0].problem;
    Ok(EffectiveTensors {
        k1: t[0],
        k2: t[1],
        l1: t[2],
        l2: t[3],
        porosity: p.porosity,
        params: p.params,
        mesh: TensorMesh { resolution: p.resolution, radius: p.radius },
        residual_report: solutions.iter().map(|s| s.residual).collect(),
    })
}

/// `|K⁽¹⁾_{ij} − 𝒜(u^{i,1}, w^{i,1}; u^{j,1}, w^{j,1})|`, trial first.
pub fn bilinear_identity_residual(solutions: &[CellSolution]) -> Result<Mat3> {
    let t = compute_effective_tensors(solutions)?;
    let s = ordered(solutions)?;
    let op = &solutions[0].problem.op;
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let a = op.form(&s[0][i].u, &s[0][i].w, &s[0][j].u, &s[0][j].w);
            r[i][j] = (t.k1[i][j] - a).abs();
        }
    }
    Ok(r)
}

/// `𝒜(sol_i; sol_j)` for the k = 1 problems.
pub fn bilinear_matrix(solutions: &[CellSolution]) -> Result<Mat3> {
    let s = ordered(solutions)?;
    let op = &solutions[0].problem.op;
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = op.form(&s[0][i].u, &s[0][i].w, &s[0][j].u, &s[0][j].w);
        }
    }
    Ok(r)
}

/// Two-scale fields at one macro point, as coefficient vectors on the cell spaces.
#[derive(Clone, Debug)]
pub struct TwoScaleSample {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub q: Vec<f64>,
}

/// `û = Σ_i [(f_i − ∂_i p) u^{i,1} + g_i u^{i,2}]`, likewise `ŵ` and `q̂`, at each macro sample.
pub fn two_scale_reconstruct(solutions: &[CellSolution], f: &[V3], g: &[V3], grad_p: &[V3]) -> Result<Vec<TwoScaleSample>> {
    let s = ordered(solutions)?;
    if f.len() != g.len() || f.len() != grad_p.len() {
        return Err(Error::InvalidParameter("macro samples of unequal length".into()));
    }
    let (nu, nw, np) = (s[0][0].u.len(), s[0][0].w.len(), s[0][0].pi.len());
    Ok((0..f.len())
        .map(|m| {
            let mut out = TwoScaleSample { u: vec![0.0; nu], w: vec![0.0; nw], q: vec![0.0; np] };
            for i in 0..3 {
                for (k, c) in [(0, f[m][i] - grad_p[m][i]), (1, g[m][i])] {
                    if c == 0.0 {
                        continue;
                    }
                    let sol = s[k][i];
                    out.u.iter_mut().zip(&sol.u).for_each(|(a, b)| *a += c * b);
                    out.w.iter_mut().zip(&sol.w).for_each(|(a, b)| *a += c * b);
                    out.q.iter_mut().zip(&sol.pi).for_each(|(a, b)| *a += c * b);
                }
            }
            out
        })
        .collect())
}
