//! The micropolar saddle operator shared by the cell and ε-resolved problems.
//!
//! Unknown order: `[u, w, p, λ]` with λ the zero-mean multiplier of `p`.
//! Rows, for test functions (φ, ψ, q, μ):
//!
//! ```text
//! φ: rot_rot(u,φ) − 2N²∫rot φ·w − 2(1/α − N²)∮(w×n)·φ − ∫p div φ
//! ψ: r(rot_rot + div_div)(w,ψ) + 4N²∫w·ψ − 2N²∫rot ψ·u − 2N²(β − 1)∮(u×n)·ψ
//! q: −∫q div u + λ∫q
//! μ: μ∫p
//! ```
//!
//! with `n` out of the fluid and `r` the microrotation viscosity (R_c or ε²R_c).

use crate::error::Result;
use crate::fem::{assemble_form, block_groups, BlockBuilder, FormKind, SaddleSystem, Space};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MicropolarCoefficients {
    pub n2: f64,
    pub inv_alpha: f64,
    pub beta: f64,
    /// coefficient of the rot-rot and div-div microrotation terms
    pub r: f64,
}

pub struct MicropolarOperator {
    /// the (u, w) block of the form, rows = tests, cols = trials
    pub a: CsrMatrix,
    /// `∫ p div φ`, rows = velocity tests
    pub b: CsrMatrix,
    pub integral_row: Vec<f64>,
    pub nu: usize,
    pub nw: usize,
    pub np: usize,
    pub system: SaddleSystem,
}

impl MicropolarOperator {
    pub fn sizes(&self) -> [usize; 4] {
        [self.nu, self.nw, self.np, 1]
    }

    /// Evaluates the form with trial (u, w) and test (φ, ψ).
    pub fn form(&self, u: &[f64], w: &[f64], phi: &[f64], psi: &[f64]) -> f64 {
        let trial = [u, w].concat();
        let test = [phi, psi].concat();
        self.a.pair(&test, &trial)
    }

    /// Full right-hand side from velocity and microrotation loads.
    pub fn rhs(&self, fu: &[f64], fw: &[f64]) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.nu + self.nw + self.np + 1);
        r.extend_from_slice(fu);
        r.extend_from_slice(fw);
        r.resize(self.nu + self.nw + self.np + 1, 0.0);
        r
    }
}

pub fn assemble_micropolar(u: &Space, w: &Space, p: &Space, c: MicropolarCoefficients) -> Result<MicropolarOperator> {
    let (nu, nw, np) = (u.n_dofs, w.n_dofs, p.n_dofs);
    let n2 = c.n2;

    let uu = assemble_form(FormKind::RotRot, u, u, 1.0)?;
    let uw_vol = assemble_form(FormKind::RotCoupling, w, u, -2.0 * n2)?;
    let uw_surf = assemble_form(FormKind::SurfaceCross, w, u, -2.0 * (c.inv_alpha - n2))?;
    let ww_rot = assemble_form(FormKind::RotRot, w, w, c.r)?;
    let ww_div = assemble_form(FormKind::DivDiv, w, w, c.r)?;
    let ww_mass = assemble_form(FormKind::Mass, w, w, 4.0 * n2)?;
    let wu_vol = assemble_form(FormKind::RotCoupling, u, w, -2.0 * n2)?;
    let wu_surf = assemble_form(FormKind::SurfaceCross, u, w, -2.0 * n2 * (c.beta - 1.0))?;
    let b = assemble_form(FormKind::PressureDiv, p, u, 1.0)?;

    let mut ab = BlockBuilder::new(&[nu, nw]);
    ab.add(0, 0, &uu, 1.0);
    ab.add(0, 1, &uw_vol, 1.0);
    ab.add(0, 1, &uw_surf, 1.0);
    ab.add(1, 1, &ww_rot, 1.0);
    ab.add(1, 1, &ww_div, 1.0);
    ab.add(1, 1, &ww_mass, 1.0);
    ab.add(1, 0, &wu_vol, 1.0);
    ab.add(1, 0, &wu_surf, 1.0);
    let a = ab.build();

    let integral_row = p.integral_row();
    let mut sb = BlockBuilder::new(&[nu + nw, np, 1]);
    sb.add(0, 0, &a, 1.0);
    let b_pad = pad_rows(&b, nu + nw);
    sb.add(0, 1, &b_pad, -1.0);
    sb.add_transposed(1, 0, &b_pad, -1.0);
    sb.add_row_pair(2, 1, &integral_row);
    let matrix = sb.build();
    let groups = block_groups(&[u, w, p], 1);
    let system = SaddleSystem { matrix, sizes: vec![nu, nw, np, 1], groups, rhs: vec![0.0; nu + nw + np + 1] };
    Ok(MicropolarOperator { a, b, integral_row, nu, nw, np, system })
}

/// `m` with empty rows appended up to `nrows`.
pub(crate) fn pad_rows(m: &CsrMatrix, nrows: usize) -> CsrMatrix {
    let mut indptr = m.indptr.clone();
    let last = *indptr.last().unwrap();
    indptr.resize(nrows + 1, last);
    CsrMatrix { nrows, ncols: m.ncols, indptr, indices: m.indices.clone(), values: m.values.clone() }
}
