//! Functional constants of the perforated cell and the existence condition.
//!
//! Constants are Rayleigh-quotient maxima over the discrete cell space
//! (periodic, zero normal trace on the obstacle):
//!
//! | constant | quotient |
//! |---|---|
//! | `Cp`  | `sqrt(max ‖v‖² / ‖Dv‖²)` |
//! | `Ct`  | `max ‖v‖²_∂F / (‖v‖² + ‖Dv‖²)` |
//! | `Cpt` | `max ‖v‖²_∂F / ‖Dv‖²` |
//! | `Cg`  | `max ‖Dv‖² / (‖rot v‖² + ‖div v‖²)` |

use serde::{Deserialize, Serialize};

use crate::cell::{DimensionlessParams, MicropolarOperator};
use crate::error::{Error, Result, SolverError};
use crate::fem::{assemble_form, block_groups, build_space, BlockBuilder, Constraint, Family, FormKind, Space};
use crate::mesh::CellMesh;
use crate::sparse::{lanczos, norm, CsrMatrix, LanczosOptions, SparseLu, Which};

pub const DEFAULT_SAFETY_FACTOR: f64 = 1.25;
const EIG_TOL: f64 = 1e-8;
const INFSUP_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nondimensional {
    #[serde(rename = "N2")]
    pub n2: f64,
    #[serde(rename = "R_M")]
    pub r_m: f64,
    #[serde(rename = "Rc")]
    pub rc: f64,
}

/// `N² = ν_r/(ν+ν_r)`, `R_M = (c_a+c_d)/(ν+ν_r)`, `R_c = R_M/ε²`.
pub fn nondimensionalize(nu: f64, nu_r: f64, ca: f64, cd: f64, epsilon: f64) -> Result<Nondimensional> {
    if !(nu > 0.0 && nu_r > 0.0 && ca > 0.0 && cd > 0.0) {
        return Err(Error::NonPositiveViscosity);
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} not in (0, 1]")));
    }
    let n2 = nu_r / (nu + nu_r);
    let r_m = (ca + cd) / (nu + nu_r);
    Ok(Nondimensional { n2, r_m, rc: r_m / (epsilon * epsilon) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshFingerprint {
    pub resolution: usize,
    pub radius: f64,
    pub center: [f64; 3],
    pub n_vertices: usize,
    pub n_tets: usize,
    pub fluid_volume: f64,
}

impl MeshFingerprint {
    pub fn of(mesh: &CellMesh) -> Self {
        Self {
            resolution: mesh.resolution,
            radius: mesh.obstacle.radius,
            center: mesh.obstacle.center,
            n_vertices: mesh.mesh.n_vertices(),
            n_tets: mesh.mesh.n_tets(),
            fluid_volume: mesh.fluid_volume(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    #[serde(rename = "Cp")]
    pub cp: f64,
    #[serde(rename = "Ct")]
    pub ct: f64,
    #[serde(rename = "Cpt")]
    pub cpt: f64,
    #[serde(rename = "Cg")]
    pub cg: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub delta_infsup: f64,
    /// `Ct²(Cp²+1)²`, the composition as printed in the source
    pub cpt_composed: f64,
    /// `Ct(Cp²+1)`, the chain `‖v‖²_∂F ≤ Ct(‖v‖² + ‖Dv‖²) ≤ Ct(Cp²+1)‖Dv‖²`
    pub cpt_chain: f64,
    /// Lanczos residuals (Cp, Ct, Cpt, Cg, inf-sup)
    pub residuals: [f64; 5],
    pub mesh: Option<MeshFingerprint>,
}

/// The V_Y space and the zero-mean periodic P1 pressure space of a cell mesh.
pub fn cell_spaces(mesh: &CellMesh) -> Result<(Space, Space)> {
    let v = build_space(mesh, Family::VectorP2, &[Constraint::Periodic, Constraint::ZeroNormalOnObstacle])?;
    let p = build_space(mesh, Family::ScalarP1, &[Constraint::Periodic, Constraint::ZeroMean])?;
    Ok((v, p))
}

/// Matrices of the quotients over one space.
pub struct NormMatrices {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    pub boundary_mass: CsrMatrix,
    pub rot_div: CsrMatrix,
}

impl NormMatrices {
    pub fn new(v: &Space) -> Result<Self> {
        let rr = assemble_form(FormKind::RotRot, v, v, 1.0)?;
        let dd = assemble_form(FormKind::DivDiv, v, v, 1.0)?;
        Ok(Self {
            mass: assemble_form(FormKind::Mass, v, v, 1.0)?,
            stiffness: assemble_form(FormKind::Stiffness, v, v, 1.0)?,
            boundary_mass: assemble_form(FormKind::BoundaryMass, v, v, 1.0)?,
            rot_div: rr.lincomb(1.0, &dd, 1.0),
        })
    }
}

fn eig_failure(what: &str) -> impl Fn(SolverError) -> Error + '_ {
    move |e| Error::EigSolverFailure(format!("{what}: {e}"))
}

/// `max xᵀAx / xᵀBx` with `B` positive definite.
fn pencil_max(a: &CsrMatrix, b: &CsrMatrix, what: &str) -> Result<(f64, f64)> {
    let lu = SparseLu::factorize(b, None).map_err(eig_failure(what))?;
    let opts = LanczosOptions { which: Which::Largest, tol: EIG_TOL, max_iter: 400, seed: 17 };
    let r = lanczos(a.nrows, |x| lu.solve(&a.matvec(x)), b, &[], &opts).map_err(eig_failure(what))?;
    if !(r.value.is_finite() && r.value > 0.0) {
        return Err(Error::EigSolverFailure(format!("{what}: eigenvalue {}", r.value)));
    }
    Ok((r.value, r.residual))
}

/// Cp, Ct, Cpt and Cg of a constrained vector space; the inf-sup slot is left at zero.
pub fn estimate_space_constants(v: &Space) -> Result<ConstantsReport> {
    let m = NormMatrices::new(v)?;
    let (cp2, r0) = pencil_max(&m.mass, &m.stiffness, "Poincaré")?;
    let (ct, r1) = pencil_max(&m.boundary_mass, &m.mass.lincomb(1.0, &m.stiffness, 1.0), "trace")?;
    let (cpt, r2) = pencil_max(&m.boundary_mass, &m.stiffness, "Poincaré-trace")?;
    let (cg, r3) = pencil_max(&m.stiffness, &m.rot_div, "Gaffney")?;
    let cp = cp2.sqrt();
    Ok(ConstantsReport {
        cp,
        ct,
        cpt,
        cg,
        k: cpt * cg,
        delta_infsup: 0.0,
        cpt_composed: ct * ct * (cp * cp + 1.0).powi(2),
        cpt_chain: ct * (cp * cp + 1.0),
        residuals: [r0, r1, r2, r3, 0.0],
        mesh: None,
    })
}

/// All constants of the cell, including the Taylor-Hood inf-sup constant.
pub fn estimate_constants(mesh: &CellMesh) -> Result<ConstantsReport> {
    let (v, p) = cell_spaces(mesh)?;
    let mut r = estimate_space_constants(&v)?;
    let inf = discrete_infsup_report(&v, &p)?;
    r.delta_infsup = inf.delta;
    r.residuals[4] = inf.residual;
    r.mesh = Some(MeshFingerprint::of(mesh));
    Ok(r)
}

/// Stokes-type saddle `[K −B 0; −Bᵀ 0 m; 0 mᵀ 0]` on (V, P) with `K` the gradient stiffness.
pub struct StokesProjector {
    pub stiffness: CsrMatrix,
    pub b: CsrMatrix,
    pub pressure_mass: CsrMatrix,
    lu: SparseLu,
    nu: usize,
    np: usize,
}

impl StokesProjector {
    pub fn new(v: &Space, p: &Space) -> Result<Self> {
        let k = assemble_form(FormKind::Stiffness, v, v, 1.0)?;
        let b = assemble_form(FormKind::PressureDiv, p, v, 1.0)?;
        let mp = assemble_form(FormKind::Mass, p, p, 1.0)?;
        let mut bb = BlockBuilder::new(&[v.n_dofs, p.n_dofs, 1]);
        bb.add(0, 0, &k, 1.0);
        bb.add(0, 1, &b, -1.0);
        bb.add_transposed(1, 0, &b, -1.0);
        bb.add_row_pair(2, 1, &p.integral_row());
        let lu = SparseLu::factorize(&bb.build(), Some(&block_groups(&[v, p], 1)))?;
        Ok(Self { stiffness: k, b, pressure_mass: mp, lu, nu: v.n_dofs, np: p.n_dofs })
    }

    /// `S⁻¹ r` for the pressure Schur complement `S = BᵀK⁻¹B`, `r` orthogonal to constants.
    pub fn schur_solve(&self, r: &[f64]) -> Vec<f64> {
        let mut rhs = vec![0.0; self.nu + self.np + 1];
        for (i, x) in r.iter().enumerate() {
            rhs[self.nu + i] = -x;
        }
        let x = self.lu.solve(&rhs);
        x[self.nu..self.nu + self.np].to_vec()
    }

    /// K-orthogonal projection onto discretely divergence-free fields.
    pub fn project(&self, r: &[f64]) -> Vec<f64> {
        let mut rhs = self.stiffness.matvec(r);
        rhs.resize(self.nu + self.np + 1, 0.0);
        let x = self.lu.solve(&rhs);
        x[..self.nu].to_vec()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfSup {
    pub delta: f64,
    pub residual: f64,
}

/// `δ = min_q max_v ∫q div v / (‖q‖ ‖Dv‖)` over zero-mean pressures.
pub fn discrete_infsup_report(v: &Space, p: &Space) -> Result<InfSup> {
    let sp = match StokesProjector::new(v, p) {
        Ok(s) => s,
        Err(Error::SingularSystem(_)) => return Err(Error::DegenerateMesh(0.0)),
        Err(e) => return Err(e),
    };
    let ones = vec![1.0; p.n_dofs];
    let mp = &sp.pressure_mass;
    let opts = LanczosOptions { which: Which::Largest, tol: INFSUP_TOL, max_iter: 600, seed: 23 };
    let r = lanczos(p.n_dofs, |x| sp.schur_solve(&mp.matvec(x)), mp, &[ones], &opts).map_err(eig_failure("inf-sup"))?;
    let delta = if r.value > 0.0 { 1.0 / r.value.sqrt() } else { 0.0 };
    if !(delta >= 1e-10) {
        return Err(Error::DegenerateMesh(delta));
    }
    // explicit residual of the eigenpair, relative in the M_p norm
    let y = sp.schur_solve(&mp.matvec(&r.vector));
    let d: Vec<f64> = y.iter().zip(&r.vector).map(|(a, b)| a - r.value * b).collect();
    let residual = mp.pair(&d, &d).sqrt() / (r.value * mp.pair(&r.vector, &r.vector).sqrt());
    Ok(InfSup { delta, residual })
}

pub fn discrete_infsup(v: &Space, p: &Space) -> Result<f64> {
    discrete_infsup_report(v, p).map(|r| r.delta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WellPosednessVerdict {
    pub gamma: f64,
    /// `R_c(1−N²)/(s·K)²` with `s` the safety factor
    pub bound: f64,
    pub satisfied: bool,
    pub margin: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    pub safety_factor: f64,
    /// both coercivity constants positive; the condition alone does not guarantee it
    pub coercivity_certified: bool,
}

pub fn check_wellposedness(params: &DimensionlessParams, c: &ConstantsReport, safety_factor: f64) -> WellPosednessVerdict {
    let (n2, rc) = (params.n2, params.rc);
    let gamma = params.gamma();
    let g = gamma.abs();
    let k = safety_factor * c.cpt * c.cg;
    let bound = rc * (1.0 - n2) / (k * k);
    let satisfied = gamma * gamma < bound;
    let c1 = if g == 0.0 {
        1.0
    } else {
        let lo = g * c.cpt * c.cg * c.cg / rc;
        let hi = (1.0 - n2) / (g * c.cpt);
        (lo * hi).sqrt()
    };
    let c2 = 0.5 * f64::min(1.0, 1.0 / (3.0 * c.cg));
    let a = (1.0 - n2 / c2 - g * c.cpt * c1) / c.cg;
    let b = (rc - g * c.cpt * c.cg * c.cg / c1) / c.cg;
    WellPosednessVerdict {
        gamma,
        bound,
        satisfied,
        margin: bound - gamma * gamma,
        a,
        b,
        c1,
        c2,
        safety_factor,
        coercivity_certified: a > 0.0 && b > 0.0,
    }
}

/// Minimum over random admissible pairs of `𝒜(φ,ψ;φ,ψ) − A‖Dφ‖² − B‖Dψ‖²`,
/// with φ discretely divergence-free and ψ free in the constrained space.
pub fn coercivity_defect(
    op: &MicropolarOperator,
    v: &Space,
    projector: &StokesProjector,
    verdict: &WellPosednessVerdict,
    samples: usize,
    seed: u64,
) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let k = &projector.stiffness;
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let r: Vec<f64> = (0..v.n_dofs).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut phi = projector.project(&r);
        let s = norm(&phi).max(f64::MIN_POSITIVE);
        phi.iter_mut().for_each(|x| *x /= s);
        let psi: Vec<f64> = (0..v.n_dofs).map(|_| rng.random_range(-1.0..1.0) / (v.n_dofs as f64).sqrt()).collect();
        let q = op.form(&phi, &psi, &phi, &psi);
        let d = q - verdict.a * k.pair(&phi, &phi) - verdict.b * k.pair(&psi, &psi);
        worst = worst.min(d);
    }
    worst
}
