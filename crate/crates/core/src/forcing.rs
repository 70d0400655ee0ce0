//! Body forces given in configuration: a constant vector or a named expression.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::V3;

pub const NAMED: [&str; 3] = ["zero", "shear", "swirl"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Forcing {
    Constant(V3),
    Named(String),
}

impl Default for Forcing {
    fn default() -> Self {
        Forcing::Constant([0.0; 3])
    }
}

impl Forcing {
    pub fn validate(&self) -> Result<()> {
        match self {
            Forcing::Constant(c) if c.iter().all(|x| x.is_finite()) => Ok(()),
            Forcing::Constant(_) => Err(Error::ConfigInvalid("forcing components must be finite".into())),
            Forcing::Named(n) if NAMED.contains(&n.as_str()) => Ok(()),
            Forcing::Named(n) => Err(Error::ConfigInvalid(format!("unknown forcing '{n}', expected one of {NAMED:?}"))),
        }
    }

    /// `shear` = (sin πx₂, 0, 0); `swirl` = (sin πx₂, sin πx₃, sin πx₁).
    pub fn eval(&self, x: V3) -> V3 {
        match self {
            Forcing::Constant(c) => *c,
            Forcing::Named(n) => match n.as_str() {
                "shear" => [(PI * x[1]).sin(), 0.0, 0.0],
                "swirl" => [(PI * x[1]).sin(), (PI * x[2]).sin(), (PI * x[0]).sin()],
                _ => [0.0; 3],
            },
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Forcing::Constant(c) => c.iter().all(|&x| x == 0.0),
            Forcing::Named(n) => n == "zero",
        }
    }

    pub fn field(&self) -> impl Fn(V3) -> V3 + Sync + '_ {
        move |x| self.eval(x)
    }
}
