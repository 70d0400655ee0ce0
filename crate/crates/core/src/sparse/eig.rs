//! Lanczos iteration for extreme eigenpairs of operators self-adjoint in a
//! weighted inner product `<x, y>_W = xᵀ W y` (W symmetric positive definite).
//!
//! The generalized problem `A x = λ B x` is handled with `op = B⁻¹A`, `W = B`.

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::csr::{dot, CsrMatrix};
use crate::error::SolverError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Largest,
    Smallest,
}

#[derive(Clone, Debug)]
pub struct EigPair {
    pub value: f64,
    /// W-normalized eigenvector
    pub vector: Vec<f64>,
    /// `|op x − λ x|_W / |λ|` estimate from the Lanczos recurrence
    pub residual: f64,
    pub iterations: usize,
}

pub struct LanczosOptions {
    pub which: Which,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { which: Which::Largest, tol: 1e-10, max_iter: 300, seed: 0x5eed }
    }
}

/// Extreme eigenpair of `op` restricted to the W-orthogonal complement of `deflate`.
pub fn lanczos(
    n: usize,
    mut op: impl FnMut(&[f64]) -> Vec<f64>,
    w: &CsrMatrix,
    deflate: &[Vec<f64>],
    opts: &LanczosOptions,
) -> Result<EigPair, SolverError> {
    if n == 0 {
        return Err(SolverError::Shape("empty operator".into()));
    }
    let wdefl: Vec<Vec<f64>> = deflate.iter().map(|d| w.matvec(d)).collect();
    let project = |x: &mut Vec<f64>| {
        for (d, wd) in deflate.iter().zip(&wdefl) {
            let c = dot(x, wd) / dot(d, wd);
            for (xi, di) in x.iter_mut().zip(d) {
                *xi -= c * di;
            }
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    project(&mut q);
    let nq = dot(&q, &w.matvec(&q)).sqrt();
    if !(nq > 0.0) {
        return Err(SolverError::Breakdown { residual: f64::NAN });
    }
    q.iter_mut().for_each(|x| *x /= nq);

    let mut qs: Vec<Vec<f64>> = Vec::new();
    let mut wqs: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    let max_iter = opts.max_iter.min(n);
    for j in 0..max_iter {
        let wq = w.matvec(&q);
        let mut z = op(&q);
        let a = dot(&z, &wq);
        qs.push(q.clone());
        wqs.push(wq);
        alpha.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for (qk, wqk) in qs.iter().zip(&wqs) {
                let c = dot(&z, wqk);
                for (zi, qi) in z.iter_mut().zip(qk) {
                    *zi -= c * qi;
                }
            }
            project(&mut z);
        }
        let b = dot(&z, &w.matvec(&z)).max(0.0).sqrt();
        let (theta, s) = ritz(&alpha, &beta, opts.which);
        let m = alpha.len();
        let res = (b * s[m - 1]).abs() / theta.abs().max(f64::MIN_POSITIVE);
        let done = res <= opts.tol
            || (j > 3 && (theta - last).abs() <= 1e-3 * opts.tol * theta.abs() && res <= 1e3 * opts.tol)
            || b <= 1e-14 * theta.abs()
            || j + 1 == max_iter;
        if done {
            let mut v = vec![0.0; n];
            for (k, qk) in qs.iter().enumerate() {
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi += s[k] * qi;
                }
            }
            if j + 1 == max_iter && res > opts.tol.sqrt() {
                return Err(SolverError::Breakdown { residual: res });
            }
            return Ok(EigPair { value: theta, vector: v, residual: res, iterations: j + 1 });
        }
        last = theta;
        beta.push(b);
        q = z.iter().map(|x| x / b).collect();
    }
    unreachable!()
}

fn ritz(alpha: &[f64], beta: &[f64], which: Which) -> (f64, Vec<f64>) {
    let m = alpha.len();
    let t = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let e = t.self_adjoint_eigen(Side::Lower).expect("tridiagonal eigen");
    let k = match which {
        Which::Largest => m - 1,
        Which::Smallest => 0,
    };
    let theta = e.S().column_vector()[k];
    let s = (0..m).map(|i| e.U()[(i, k)]).collect();
    (theta, s)
}
