//! Discrete vector-calculus identities used as correctness oracles.

use super::assemble::{assemble_form, assemble_on, FaceSet, FormKind};
use super::space::Space;
use crate::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Defect of `∫ rot φ·ψ − ∫ rot ψ·φ + ∮ (φ×n)·ψ = 0` over the whole boundary.
/// With `n` pointing out of the fluid this is the divergence theorem for `φ×ψ`.
pub fn ibp_residual(space: &Space, phi: &[f64], psi: &[f64]) -> Result<f64> {
    Ok(IbpOracle::new(space)?.residual(phi, psi))
}

/// The two operators of `ibp_residual`, assembled once for many field pairs.
pub struct IbpOracle {
    rot: CsrMatrix,
    surface: CsrMatrix,
}

impl IbpOracle {
    pub fn new(space: &Space) -> Result<Self> {
        Ok(Self {
            rot: assemble_form(FormKind::RotCoupling, space, space, 1.0)?,
            surface: assemble_on(FormKind::SurfaceCross, space, space, 1.0, FaceSet::All)?,
        })
    }

    pub fn residual(&self, phi: &[f64], psi: &[f64]) -> f64 {
        (self.rot.pair(phi, psi) - self.rot.pair(psi, phi) + self.surface.pair(psi, phi)).abs()
    }
}

/// `‖∇v‖² / (‖div v‖² + ‖rot v‖²)`.
pub fn gaffney_ratio(space: &Space, v: &[f64]) -> Result<f64> {
    let k = assemble_form(FormKind::Stiffness, space, space, 1.0)?;
    let rr = assemble_form(FormKind::RotRot, space, space, 1.0)?;
    let dd = assemble_form(FormKind::DivDiv, space, space, 1.0)?;
    let num = k.pair(v, v);
    let den = rr.pair(v, v) + dd.pair(v, v);
    if !(den > f64::EPSILON * num.abs()) || den <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}
