use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::assemble::assemble_with_workers;
use super::space::frame_defect;
use super::*;
use crate::error::Error;
use crate::geom::{dot3, norm3, sub};
use crate::mesh::{build_macro_mesh, build_unit_cell_mesh, unit_cube_mesh, CellMesh, ObstacleSpec};
use crate::sparse::{norm, CsrMatrix};

fn cell(n: usize) -> CellMesh {
    build_unit_cell_mesh(n, ObstacleSpec::sphere([0.5, 0.5, 0.5], 0.25)).unwrap()
}

fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn velocity(c: &CellMesh) -> Space {
    build_space(c, Family::VectorP2, &[Constraint::Periodic, Constraint::ZeroNormalOnObstacle]).unwrap()
}

#[test]
fn constraints_remove_dofs() {
    let c = cell(6);
    let v = velocity(&c);
    assert!(v.n_dofs < 3 * v.n_nodes());
    let p = build_space(&c, Family::ScalarP1, &[Constraint::ZeroMean]).unwrap();
    assert_eq!(p.n_dofs, c.mesh.n_vertices());
    assert!(p.zero_mean);
    let pp = build_space(&c, Family::ScalarP1, &[Constraint::Periodic]).unwrap();
    assert_eq!(pp.n_dofs, c.mesh.n_vertices() - (3 * 36 + 3 * 6 + 1));
}

#[test]
fn incompatible_constraints_are_rejected() {
    let c = cell(5);
    let mm = build_macro_mesh(0.5, 5, ObstacleSpec::sphere([0.5; 3], 0.25)).unwrap();
    let cube = Arc::new(unit_cube_mesh(3).unwrap());
    let bad = [
        build_space(&mm, Family::VectorP2, &[Constraint::Periodic]),
        build_space(&cube, Family::ScalarP1, &[Constraint::Periodic]),
        build_space(&c, Family::VectorP2, &[Constraint::ZeroExteriorTrace]),
        build_space(&c, Family::VectorP2, &[Constraint::ZeroMean]),
        build_space(&c, Family::ScalarP1, &[Constraint::ZeroNormalOnObstacle]),
    ];
    for r in bad {
        assert!(matches!(r, Err(Error::IncompatibleConstraints(_))));
    }
    assert!(build_space(&mm, Family::VectorP2, &[Constraint::ZeroExteriorTrace]).is_ok());
}

#[test]
fn obstacle_nodes_have_orthonormal_frames_and_no_normal_component() {
    let c = cell(6);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for fam in [Family::VectorP2, Family::VectorP1, Family::VectorP1Bubble] {
        let v = build_space(&c, fam, &[Constraint::Periodic, Constraint::ZeroNormalOnObstacle]).unwrap();
        let mut count = 0;
        for k in 0..v.n_nodes() {
            if let Some(n) = v.normals[k] {
                assert!(frame_defect(n, v.frame(k).unwrap()) <= 1e-12);
                assert!(matches!(v.node_dofs[k], NodeDofs::Tangent(_)));
                count += 1;
            }
        }
        assert!(count > 0);
        let x = random(v.n_dofs, &mut rng);
        assert!(v.max_normal_component(&x) <= 1e-12);
    }
    // vertex nodes of the P2 space carry the exact sphere normal
    let v = velocity(&c);
    for k in 0..c.mesh.n_vertices() {
        if let Some(n) = v.normals[k] {
            let exact = c.obstacle.normal_at(c.mesh.vertices[k]);
            assert!(norm3(sub(n, exact)) < 1e-12);
        }
    }
}

#[test]
fn periodic_images_share_dofs_and_are_translates() {
    let c = cell(5);
    let v = velocity(&c);
    let mut images = 0;
    for k in 0..v.n_nodes() {
        let ck = v.canonical[k];
        if ck != k {
            images += 1;
            assert_eq!(v.node_dofs[k], v.node_dofs[ck]);
            let d = sub(v.node_coords[k], v.node_coords[ck]);
            for x in d {
                assert!((x - x.round()).abs() < 1e-14 && x.round() >= 0.0);
            }
            assert!(norm3(d) > 0.5);
        }
    }
    assert!(images > 0);
}

#[test]
fn rot_rot_and_div_div_annihilate_constants() {
    let c = cell(5);
    let v = build_space(&c, Family::VectorP2, &[Constraint::Periodic]).unwrap();
    let k = v.interpolate(|_| [0.3, -1.2, 0.7]);
    for kind in [FormKind::RotRot, FormKind::DivDiv, FormKind::Stiffness] {
        let m = assemble_form(kind, &v, &v, 1.0).unwrap();
        assert!(norm(&m.matvec(&k)) <= 1e-12 * m.max_abs(), "{kind:?}");
    }
}

#[test]
fn p1_mass_row_sums_are_lumped_volumes() {
    let c = cell(6);
    let p = build_space(&c, Family::ScalarP1, &[]).unwrap();
    let m = assemble_form(FormKind::Mass, &p, &p, 1.0).unwrap();
    let mut lumped = vec![0.0; c.mesh.n_vertices()];
    for (t, tet) in c.mesh.tets.iter().enumerate() {
        for &v in tet {
            lumped[v] += c.mesh.tet_volume(t) / 4.0;
        }
    }
    let ones = vec![1.0; p.n_dofs];
    let rs = m.matvec(&ones);
    for (a, b) in rs.iter().zip(&lumped) {
        assert!((a - b).abs() <= 1e-12 * b.max(1e-3));
    }
    assert!(m.asymmetry() <= 1e-14 * m.max_abs());
}

#[test]
fn forms_integrate_polynomials_exactly() {
    let cube = Arc::new(unit_cube_mesh(3).unwrap());
    let s = build_space(&cube, Family::ScalarP2, &[]).unwrap();
    let f = s.interpolate_scalar(|x| x[0] * x[0]);
    let g = s.interpolate_scalar(|x| x[1] * x[2]);
    let m = assemble_form(FormKind::Mass, &s, &s, 1.0).unwrap();
    assert!((m.pair(&f, &g) - 1.0 / 12.0).abs() < 1e-13);
    let k = assemble_form(FormKind::Stiffness, &s, &s, 1.0).unwrap();
    // ∇(x²)·∇(yz) = 0, |∇(yz)|² = y² + z²
    assert!(k.pair(&f, &g).abs() < 1e-13);
    assert!((k.pair(&g, &g) - 2.0 / 3.0).abs() < 1e-13);

    let v = build_space(&cube, Family::VectorP2, &[]).unwrap();
    // u = (0, 0, x y): rot u = (x, -y, 0), div u = 0
    let u = v.interpolate(|x| [0.0, 0.0, x[0] * x[1]]);
    // w = (y², x z, 0): rot w = (-x, 0, z - 2y), div w = 0
    let w = v.interpolate(|x| [x[1] * x[1], x[0] * x[2], 0.0]);
    let rr = assemble_form(FormKind::RotRot, &v, &v, 1.0).unwrap();
    assert!((rr.pair(&u, &u) - 2.0 / 3.0).abs() < 1e-13);
    assert!((rr.pair(&w, &u) + 1.0 / 3.0).abs() < 1e-13);
    let dd = assemble_form(FormKind::DivDiv, &v, &v, 1.0).unwrap();
    assert!(dd.pair(&u, &w).abs() < 1e-13);
    // ∫ rot(u)·w = ∫ x y² − y x z = 1/6 − 1/8
    let rc = assemble_form(FormKind::RotCoupling, &v, &v, 1.0).unwrap();
    assert!((rc.pair(&u, &w) - (1.0 / 6.0 - 1.0 / 8.0)).abs() < 1e-13);
    // ∫ p div φ with p = x, φ = (x², 0, 0): ∫ 2x² = 2/3
    let p1 = build_space(&cube, Family::ScalarP1, &[]).unwrap();
    let p = p1.interpolate_scalar(|x| x[0]);
    let phi = v.interpolate(|x| [x[0] * x[0], 0.0, 0.0]);
    let b = assemble_form(FormKind::PressureDiv, &p1, &v, 1.0).unwrap();
    assert!((b.pair(&phi, &p) - 2.0 / 3.0).abs() < 1e-13);
}

#[test]
fn bubble_space_uses_exact_quadrature() {
    let cube = Arc::new(unit_cube_mesh(2).unwrap());
    let v = build_space(&cube, Family::VectorP1Bubble, &[]).unwrap();
    let nt = cube.n_tets();
    let nv = cube.n_vertices();
    let mut x = vec![0.0; v.n_dofs];
    let NodeDofs::Free(d) = v.node_dofs[nv] else { panic!() };
    x[d] = 1.0;
    let m = assemble_form(FormKind::Mass, &v, &v, 1.0).unwrap();
    // mean of (λ0λ1λ2λ3)² over a tet = 3!·(2!)^4/11!
    let mean = 6.0 * 16.0 / 39_916_800.0;
    let exact = 256.0 * 256.0 * mean * cube.tet_volume(0);
    assert!((m.pair(&x, &x) - exact).abs() < 1e-13 * exact);
    assert_eq!(v.n_nodes(), nv + nt);
}

#[test]
fn surface_cross_is_alternating() {
    let c = cell(6);
    let v = velocity(&c);
    let s = assemble_form(FormKind::SurfaceCross, &v, &v, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let x = random(v.n_dofs, &mut rng);
        let y = random(v.n_dofs, &mut rng);
        assert!(s.pair(&x, &x).abs() <= 1e-13);
        assert!((s.pair(&x, &y) + s.pair(&y, &x)).abs() <= 1e-12);
    }
}

#[test]
fn discrete_flux_through_obstacle_vanishes() {
    // ∫ div φ = ∮ φ·n, periodic faces cancel
    let c = cell(6);
    for fam in [Family::VectorP2, Family::VectorP1, Family::VectorP1Bubble] {
        let v = build_space(&c, fam, &[Constraint::Periodic, Constraint::ZeroNormalOnObstacle]).unwrap();
        let p = build_space(&c, Family::ScalarP1, &[Constraint::Periodic]).unwrap();
        let b = assemble_form(FormKind::PressureDiv, &p, &v, 1.0).unwrap();
        let ones = vec![1.0; p.n_dofs];
        assert!(norm(&b.matvec(&ones)) <= 1e-13, "{fam:?}");
    }
}

#[test]
fn ibp_identity_holds_for_random_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cube = Arc::new(unit_cube_mesh(3).unwrap());
    let c = cell(5);
    let spaces = [
        build_space(&cube, Family::VectorP1, &[]).unwrap(),
        build_space(&cube, Family::VectorP2, &[]).unwrap(),
        build_space(&c, Family::VectorP2, &[]).unwrap(),
        build_space(&c, Family::VectorP2, &[Constraint::Periodic]).unwrap(),
    ];
    for s in &spaces {
        let rc = assemble_form(FormKind::RotCoupling, s, s, 1.0).unwrap();
        let sc = assemble_on(FormKind::SurfaceCross, s, s, 1.0, FaceSet::All).unwrap();
        for _ in 0..25 {
            let x = random(s.n_dofs, &mut rng);
            let y = random(s.n_dofs, &mut rng);
            let d = (rc.pair(&x, &y) - rc.pair(&y, &x) + sc.pair(&y, &x)).abs();
            assert!(d <= 1e-10, "{d}");
        }
    }
    let s = &spaces[0];
    let k = s.interpolate(|_| [1.0, 2.0, -0.5]);
    let l = s.interpolate(|_| [0.2, 0.0, 3.0]);
    assert!(ibp_residual(s, &k, &l).unwrap() <= 1e-10);
}

#[test]
fn periodic_space_needs_only_obstacle_surface_term() {
    let c = cell(6);
    let v = velocity(&c);
    let rc = assemble_form(FormKind::RotCoupling, &v, &v, 1.0).unwrap();
    let sc = assemble_form(FormKind::SurfaceCross, &v, &v, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let x = random(v.n_dofs, &mut rng);
        let y = random(v.n_dofs, &mut rng);
        let d = rc.pair(&x, &y) - rc.pair(&y, &x) + sc.pair(&y, &x);
        assert!(d.abs() <= 1e-10, "{d}");
    }
}

#[test]
fn assembly_is_linear_in_the_coefficient() {
    let c = cell(5);
    let v = velocity(&c);
    for kind in [FormKind::RotRot, FormKind::SurfaceCross, FormKind::Mass] {
        let a = assemble_form(kind, &v, &v, 1.5).unwrap();
        let b = assemble_form(kind, &v, &v, -0.25).unwrap();
        let ab = assemble_form(kind, &v, &v, 1.25).unwrap();
        let diff = ab.lincomb(1.0, &a.lincomb(1.0, &b, 1.0), -1.0);
        assert!(diff.max_abs() <= 4.0 * f64::EPSILON * ab.max_abs());
        // dyadic coefficients: both sides round the same exact value
        let one = assemble_form(kind, &v, &v, 1.0).unwrap();
        let half = assemble_form(kind, &v, &v, 0.5).unwrap();
        let both = assemble_form(kind, &v, &v, 1.5).unwrap();
        assert_eq!(one.lincomb(1.0, &half, 1.0).values, both.values);
    }
}

#[test]
fn assembly_is_independent_of_worker_count() {
    let c = cell(6);
    let v = velocity(&c);
    let a = assemble_with_workers(FormKind::RotRot, &v, &v, 1.0, FaceSet::Obstacle, 1).unwrap();
    let b = assemble_with_workers(FormKind::RotRot, &v, &v, 1.0, FaceSet::Obstacle, 3).unwrap();
    assert_eq!(a.values, b.values);
    assert_eq!(a.indices, b.indices);
}

#[test]
fn mismatched_meshes_are_rejected() {
    let a = velocity(&cell(5));
    let b = velocity(&cell(5));
    assert!(matches!(assemble_form(FormKind::Mass, &a, &b, 1.0), Err(Error::MeshMismatch)));
}

#[test]
fn coordinate_export_round_trips() {
    let c = cell(4);
    let p = build_space(&c, Family::ScalarP1, &[]).unwrap();
    let m = assemble_form(FormKind::Stiffness, &p, &p, 1.0).unwrap();
    let back = CsrMatrix::from_coo_text(&m.to_coo_text()).unwrap();
    assert_eq!(back.values, m.values);
}

#[test]
fn gaffney_ratio_is_scale_invariant_and_rejects_constants() {
    let c = cell(5);
    let v = velocity(&c);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random(v.n_dofs, &mut rng);
    let r1 = gaffney_ratio(&v, &x).unwrap();
    let x5: Vec<f64> = x.iter().map(|a| 5.0 * a).collect();
    let r5 = gaffney_ratio(&v, &x5).unwrap();
    assert!(r1 > 0.0 && ((r1 - r5) / r1).abs() <= 1e-12);
    let free = build_space(&c, Family::VectorP2, &[Constraint::Periodic]).unwrap();
    let k = free.interpolate(|_| [1.0, 0.0, 0.0]);
    assert!(matches!(gaffney_ratio(&free, &k), Err(Error::ZeroDenominator)));
}

/// Periodic slip Stokes with a gradient penalty: u-block stiffness, P1 pressure, one multiplier.
fn stokes(c: &CellMesh) -> (Space, Space, SaddleSystem) {
    let v = velocity(c);
    let p = build_space(c, Family::ScalarP1, &[Constraint::Periodic, Constraint::ZeroMean]).unwrap();
    let a = assemble_form(FormKind::Stiffness, &v, &v, 1.0).unwrap();
    let m = assemble_form(FormKind::Mass, &v, &v, 1.0).unwrap();
    let b = assemble_form(FormKind::PressureDiv, &p, &v, 1.0).unwrap();
    let mut bb = BlockBuilder::new(&[v.n_dofs, p.n_dofs, 1]);
    bb.add(0, 0, &a, 1.0);
    bb.add(0, 0, &m, 1.0);
    bb.add(0, 1, &b, -1.0);
    bb.add_transposed(1, 0, &b, -1.0);
    bb.add_row_pair(2, 1, &p.integral_row());
    let load = v.interpolate(|x| [1.0 + x[1], 0.0, 0.5]);
    let mut rhs = m.matvec(&load);
    rhs.resize(bb.n(), 0.0);
    let groups = block_groups(&[&v, &p], 1);
    let sys = SaddleSystem { matrix: bb.build(), sizes: bb.sizes.clone(), groups, rhs };
    (v, p, sys)
}

#[test]
fn saddle_solve_is_divergence_free_linear_and_deterministic() {
    let c = cell(6);
    let (v, p, sys) = stokes(&c);
    let f = sys.factor().unwrap();
    let s1 = f.solve(&sys.rhs).unwrap();
    assert!(s1.residual <= 1e-9);
    let u = &s1.blocks[0];
    assert!(norm(u) > 0.0);
    let b = assemble_form(FormKind::PressureDiv, &p, &v, 1.0).unwrap();
    let div = b.matvec_t(u);
    assert!(norm(&div) <= 1e-9);
    let mean: f64 = p.integral_row().iter().zip(&s1.blocks[1]).map(|(a, b)| a * b).sum();
    assert!(mean.abs() <= 1e-10);
    // multiplier vanishes because constants are compatible with the flux constraint
    assert!(s1.blocks[2][0].abs() <= 1e-10);

    let rhs2: Vec<f64> = sys.rhs.iter().map(|x| 2.0 * x).collect();
    let s2 = f.solve(&rhs2).unwrap();
    for (a, b) in s1.blocks.concat().iter().zip(s2.blocks.concat()) {
        assert!((2.0 * a - b).abs() <= 1e-9 * norm(&s1.blocks[0]).max(1.0));
    }
    let zero = f.solve(&vec![0.0; sys.rhs.len()]).unwrap();
    assert!(zero.blocks.concat().iter().all(|x| x.abs() <= 1e-12));
    let again = solve_saddle(&sys).unwrap();
    assert_eq!(again.blocks, s1.blocks);
    assert!(v.max_normal_component(u) <= 1e-12);
    let _ = dot3;
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn ibp_defect_small_for_random_pairs(seed in any::<u64>()) {
            thread_local! {
                static SETUP: (Space, CsrMatrix, CsrMatrix) = {
                    let cube = Arc::new(unit_cube_mesh(2).unwrap());
                    let s = build_space(&cube, Family::VectorP2, &[]).unwrap();
                    let rc = assemble_form(FormKind::RotCoupling, &s, &s, 1.0).unwrap();
                    let sc = assemble_on(FormKind::SurfaceCross, &s, &s, 1.0, FaceSet::All).unwrap();
                    (s, rc, sc)
                };
            }
            SETUP.with(|(s, rc, sc)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x = random(s.n_dofs, &mut rng);
                let y = random(s.n_dofs, &mut rng);
                let d = (rc.pair(&x, &y) - rc.pair(&y, &x) + sc.pair(&y, &x)).abs();
                prop_assert!(d <= 1e-10);
                Ok(())
            })?;
        }

        #[test]
        fn interpolated_fields_stay_tangent(a in -2.0f64..2.0, b in -2.0f64..2.0, c3 in -2.0f64..2.0) {
            thread_local! {
                static V: Space = velocity(&cell(5));
            }
            V.with(|v| {
                let x = v.interpolate(|p| [a + p[1], b * p[0], c3]);
                prop_assert!(v.max_normal_component(&x) <= 1e-12);
                Ok(())
            })?;
        }
    }
}
