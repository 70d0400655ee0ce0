//! Element assembly of the bilinear forms.
//!
//! Every form is written as `a(trial, test)`; the returned matrix has one row per
//! test dof and one column per trial dof, so `M.pair(test, trial)` evaluates it.
//! Surface forms run over obstacle faces, where `n` points out of the fluid.

use serde::{Deserialize, Serialize};

use super::basis::{Shape, TetGeom};
use super::quadrature::{tet_rule_for_degree, tri_rule};
use super::space::{LocalDof, Space};
use crate::error::{Error, Result};
use crate::geom::{cross, dot3, V3};
use crate::mesh::{BoundaryFace, FaceTag};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    /// ∫ rot u · rot φ
    RotRot,
    /// ∫ div u div φ
    DivDiv,
    /// ∫ u · φ
    Mass,
    /// ∫ rot φ · w   (trial w, test φ)
    RotCoupling,
    /// ∮ (w × n) · φ over the obstacle surface
    SurfaceCross,
    /// ∫ p div φ   (scalar trial p, vector test φ)
    PressureDiv,
    /// ∫ ∇u : ∇φ
    Stiffness,
    /// ∮ u · φ over the obstacle surface
    BoundaryMass,
}

impl FormKind {
    pub fn is_surface(self) -> bool {
        matches!(self, FormKind::SurfaceCross | FormKind::BoundaryMass)
    }
}

/// Worker count for element loops: `MICRODARCY_THREADS` if set, else the machine's parallelism.
pub fn worker_count() -> usize {
    if let Some(n) = std::env::var("MICRODARCY_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        return n.max(1);
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Which boundary faces a surface form integrates over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceSet {
    Obstacle,
    All,
}

pub fn assemble_form(kind: FormKind, trial: &Space, test: &Space, coef: f64) -> Result<CsrMatrix> {
    assemble_on(kind, trial, test, coef, FaceSet::Obstacle)
}

pub fn assemble_on(kind: FormKind, trial: &Space, test: &Space, coef: f64, faces: FaceSet) -> Result<CsrMatrix> {
    assemble_with_workers(kind, trial, test, coef, faces, worker_count())
}

pub(crate) fn assemble_with_workers(
    kind: FormKind,
    trial: &Space,
    test: &Space,
    coef: f64,
    faces: FaceSet,
    workers: usize,
) -> Result<CsrMatrix> {
    if !trial.same_mesh(test) {
        return Err(Error::MeshMismatch);
    }
    check_families(kind, trial, test)?;
    let pattern = Pattern::build(trial, test);
    let mut values = vec![0.0; pattern.indices.len()];
    let elems: Vec<Elem> = if kind.is_surface() {
        trial
            .mesh
            .faces
            .iter()
            .filter(|f| faces == FaceSet::All || f.tag == FaceTag::Obstacle)
            .map(Elem::Face)
            .collect()
    } else {
        (0..trial.mesh.n_tets()).map(Elem::Tet).collect()
    };
    let kernel = Kernel::new(kind, trial, test);
    let workers = workers.clamp(1, elems.len().max(1));
    const BATCH: usize = 4096;
    for batch in elems.chunks(BATCH) {
        let results: Vec<Vec<LocalMatrix>> = if workers <= 1 {
            vec![batch.iter().map(|e| kernel.element(e)).collect()]
        } else {
            let per = batch.len().div_ceil(workers);
            std::thread::scope(|s| {
                let handles: Vec<_> = batch
                    .chunks(per)
                    .map(|part| {
                        let k = &kernel;
                        s.spawn(move || part.iter().map(|e| k.element(e)).collect::<Vec<_>>())
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("assembly worker")).collect()
            })
        };
        // fixed merge order: element order within the batch
        for lm in results.iter().flatten() {
            pattern.scatter(lm, &mut values);
        }
    }
    // scaling once keeps the result linear in the coefficient up to a single rounding
    if coef != 1.0 {
        for v in &mut values {
            *v *= coef;
        }
    }
    Ok(CsrMatrix {
        nrows: test.n_dofs,
        ncols: trial.n_dofs,
        indptr: pattern.indptr,
        indices: pattern.indices,
        values,
    })
}

fn check_families(kind: FormKind, trial: &Space, test: &Space) -> Result<()> {
    let (tv, sv) = (trial.family.is_vector(), test.family.is_vector());
    let ok = match kind {
        FormKind::Mass | FormKind::Stiffness | FormKind::BoundaryMass => tv == sv,
        FormKind::PressureDiv => !tv && sv,
        _ => tv && sv,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("form {kind:?} does not accept these space families")))
    }
}

enum Elem<'a> {
    Tet(usize),
    Face(&'a BoundaryFace),
}

struct LocalMatrix {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

struct Pattern {
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl Pattern {
    /// Sparsity from node adjacency through shared tets (periodic images merged).
    /// Dofs are numbered in canonical-node order, so rows come out in order.
    fn build(trial: &Space, test: &Space) -> Pattern {
        let nn = test.n_nodes();
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); nn];
        for t in 0..test.mesh.n_tets() {
            for &a in test.nodes_of(t) {
                let ca = test.canonical[a];
                let l = &mut adj[ca];
                l.extend(trial.nodes_of(t).iter().map(|&b| trial.canonical[b] as u32));
                if l.len() > 512 {
                    l.sort_unstable();
                    l.dedup();
                }
            }
        }
        let mut indptr = vec![0usize];
        let mut indices = Vec::new();
        let mut ubuf = Vec::with_capacity(3);
        let mut tb = Vec::with_capacity(3);
        let mut cols = Vec::new();
        for a in 0..nn {
            if test.canonical[a] != a {
                continue;
            }
            ubuf.clear();
            test.node_unknowns(a, &mut ubuf);
            let mut l = std::mem::take(&mut adj[a]);
            if ubuf.is_empty() {
                continue;
            }
            l.sort_unstable();
            l.dedup();
            cols.clear();
            for &b in &l {
                tb.clear();
                trial.node_unknowns(b as usize, &mut tb);
                cols.extend(tb.iter().map(|x| x.0));
            }
            cols.sort_unstable();
            for &(d, _) in &ubuf {
                debug_assert_eq!(d, indptr.len() - 1);
                indices.extend_from_slice(&cols);
                indptr.push(indices.len());
            }
        }
        assert_eq!(indptr.len(), test.n_dofs + 1);
        Pattern { indptr, indices }
    }

    fn scatter(&self, lm: &LocalMatrix, values: &mut [f64]) {
        let nc = lm.cols.len();
        for (i, &r) in lm.rows.iter().enumerate() {
            let cols = &self.indices[self.indptr[r]..self.indptr[r + 1]];
            for (j, &c) in lm.cols.iter().enumerate() {
                let v = lm.vals[i * nc + j];
                if v != 0.0 {
                    let k = cols.binary_search(&c).expect("entry in pattern");
                    values[self.indptr[r] + k] += v;
                }
            }
        }
    }
}

struct Kernel<'a> {
    kind: FormKind,
    trial: &'a Space,
    test: &'a Space,
    vol_rule: Vec<([f64; 4], f64)>,
}

impl<'a> Kernel<'a> {
    fn new(kind: FormKind, trial: &'a Space, test: &'a Space) -> Self {
        let deg = trial.family.shape().degree() + test.family.shape().degree();
        Self { kind, trial, test, vol_rule: tet_rule_for_degree(deg) }
    }

    fn element(&self, e: &Elem) -> LocalMatrix {
        let (t, pts, measure, normal): (usize, Vec<([f64; 4], f64)>, f64, V3) = match *e {
            Elem::Tet(t) => (t, self.vol_rule.clone(), self.trial.mesh.tet_volume(t), [0.0; 3]),
            Elem::Face(f) => {
                let tv = self.trial.mesh.tets[f.tet];
                let pos: Vec<usize> = f.verts.iter().map(|v| tv.iter().position(|x| x == v).unwrap()).collect();
                let pts = tri_rule()
                    .into_iter()
                    .map(|(b, w)| {
                        let mut l = [0.0; 4];
                        for k in 0..3 {
                            l[pos[k]] = b[k];
                        }
                        (l, w)
                    })
                    .collect();
                (f.tet, pts, f.area, f.normal)
            }
        };
        let geo = TetGeom::new(self.trial.mesh.tet_coords(t));
        let mut rdofs = Vec::new();
        let mut cdofs = Vec::new();
        self.test.local_dofs(t, &mut rdofs);
        self.trial.local_dofs(t, &mut cdofs);
        let (nr, nc) = (rdofs.len(), cdofs.len());
        let mut vals = vec![0.0; nr * nc];
        let ts: Shape = self.test.family.shape();
        let rs: Shape = self.trial.family.shape();
        let mut tv = [0.0; 10];
        let mut tg = [[0.0; 3]; 10];
        let mut rv = [0.0; 10];
        let mut rg = [[0.0; 3]; 10];
        for (l, w) in pts {
            ts.values(l, &mut tv);
            ts.grads(l, &geo.grad_l, &mut tg);
            rs.values(l, &mut rv);
            rs.grads(l, &geo.grad_l, &mut rg);
            let wq = w * measure;
            for (i, ri) in rdofs.iter().enumerate() {
                let (pv, pg) = (tv[ri.local_node], tg[ri.local_node]);
                for (j, cj) in cdofs.iter().enumerate() {
                    let (qv, qg) = (rv[cj.local_node], rg[cj.local_node]);
                    vals[i * nc + j] += wq * self.point_value(ri, pv, pg, cj, qv, qg, normal);
                }
            }
        }
        LocalMatrix { rows: rdofs.iter().map(|d| d.dof).collect(), cols: cdofs.iter().map(|d| d.dof).collect(), vals }
    }

    /// Integrand for test unknown `φ = pv·a` and trial unknown `u = qv·b`, with `a`, `b`
    /// the unknowns' directions (scalar spaces use the first entry).
    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn point_value(&self, ri: &LocalDof, pv: f64, pg: V3, cj: &LocalDof, qv: f64, qg: V3, n: V3) -> f64 {
        let a = ri.dir;
        let b = cj.dir;
        match self.kind {
            FormKind::RotRot => {
                // rot(φ a) = ∇φ × a
                dot3(cross(pg, a), cross(qg, b))
            }
            FormKind::DivDiv => dot3(pg, a) * dot3(qg, b),
            FormKind::Mass | FormKind::BoundaryMass => {
                if self.test.family.is_vector() {
                    pv * qv * dot3(a, b)
                } else {
                    pv * qv
                }
            }
            FormKind::Stiffness => {
                if self.test.family.is_vector() {
                    dot3(pg, qg) * dot3(a, b)
                } else {
                    dot3(pg, qg)
                }
            }
            FormKind::RotCoupling => dot3(cross(pg, a), b) * qv,
            FormKind::SurfaceCross => dot3(cross(b, n), a) * qv * pv,
            FormKind::PressureDiv => qv * dot3(pg, a),
        }
    }
}
