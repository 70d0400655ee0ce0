use super::*;
use std::f64::consts::PI;

fn anisotropic() -> DarcyTensors {
    DarcyTensors {
        k1: [[2.0, 0.3, 0.0], [0.1, 1.5, 0.2], [0.0, -0.1, 1.0]],
        k2: [[0.2, 0.0, 0.1], [0.0, 0.3, 0.0], [0.0, 0.0, 0.1]],
        l1: [[0.0, 0.1, 0.0], [0.2, 0.0, 0.0], [0.0, 0.0, 0.05]],
        l2: [[0.5, 0.0, 0.0], [0.0, 0.4, 0.0], [0.1, 0.0, 0.3]],
    }
}

#[test]
fn constant_force_gives_affine_pressure_and_no_flow() {
    let c = [0.7, -1.2, 0.4];
    let f = move |_: V3| c;
    let s = solve_darcy_on_cube(DarcyTensors::identity(), &f, &zero_field, 4).unwrap();
    assert!(s.mean_p().abs() <= 1e-10);
    for (x, p) in s.mesh.vertices.iter().zip(&s.p) {
        let exact = c[0] * (x[0] - 0.5) + c[1] * (x[1] - 0.5) + c[2] * (x[2] - 0.5);
        assert!((p - exact).abs() <= 1e-9);
    }
    assert!(s.l2_norms(&f, &zero_field).0 <= 1e-9);
}

#[test]
fn zero_data_gives_zero_solution() {
    let s = solve_darcy_on_cube(anisotropic(), &zero_field, &zero_field, 3).unwrap();
    assert!(s.p.iter().all(|&x| x == 0.0));
    assert!(s.u.iter().chain(&s.w).flatten().all(|&x| x == 0.0));
}

#[test]
fn indefinite_tensor_rejected() {
    let mut t = DarcyTensors::identity();
    t.k1[2][2] = -1.0;
    assert!(matches!(solve_darcy_on_cube(t, &zero_field, &zero_field, 2), Err(Error::IndefiniteTensor(_))));
}

fn manufactured(n: usize, t: DarcyTensors) -> f64 {
    // v = (∂₂ψ, −∂₁ψ, 0), ψ = sin²(πx)sin²(πy): divergence free, v·n = 0 on the cube
    let k = t.k1;
    let kinv = {
        let (inv, _) = crate::geom::inv3(k);
        inv
    };
    let f = move |x: V3| {
        let (sx, cx, sy, cy) = ((PI * x[0]).sin(), (PI * x[0]).cos(), (PI * x[1]).sin(), (PI * x[1]).cos());
        let v = [2.0 * PI * sx * sx * sy * cy, -2.0 * PI * sx * cx * sy * sy, 0.0];
        let kv = mat_vec(&kinv, v);
        [-PI * (PI * x[0]).sin() + kv[0], kv[1], kv[2]]
    };
    let s = solve_darcy_on_cube(t, &f, &zero_field, n).unwrap();
    s.l2_error(|x| (PI * x[0]).cos())
}

#[test]
fn manufactured_pressure_converges_second_order() {
    let t = DarcyTensors { k2: [[0.0; 3]; 3], ..anisotropic() };
    let e: Vec<f64> = [4, 8, 16].iter().map(|&n| manufactured(n, t)).collect();
    for w in e.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "{e:?}");
    }
}

#[test]
fn weak_form_residual_and_balance() {
    let t = anisotropic();
    let f = |x: V3| [x[1].sin(), x[0] * x[2], 1.0 + x[0]];
    let g = |x: V3| [x[2], -x[0], x[1] * x[1]];
    let s = solve_darcy_on_cube(t, &f, &g, 5).unwrap();
    assert!(s.flux_residual <= 1e-8);
    assert!(s.residual_sum.abs() <= 1e-12);
    assert!(s.mean_p().abs() <= 1e-10);
}

#[test]
fn linear_in_the_force() {
    let t = anisotropic();
    let f1 = |x: V3| [x[1].sin(), x[0] * x[2], 1.0];
    let f2 = |x: V3| [x[2] * x[2], 0.5, -x[1]];
    let f12 = |x: V3| {
        let (a, b) = (f1(x), f2(x));
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    };
    let s1 = solve_darcy_on_cube(t, &f1, &zero_field, 4).unwrap();
    let s2 = solve_darcy_on_cube(t, &f2, &zero_field, 4).unwrap();
    let s12 = solve_darcy_on_cube(t, &f12, &zero_field, 4).unwrap();
    for i in 0..s1.p.len() {
        assert!((s12.p[i] - s1.p[i] - s2.p[i]).abs() <= 1e-10);
    }
}

#[test]
fn repeated_solves_identical() {
    let f = |x: V3| [x[1].cos(), x[0], 0.3];
    let a = solve_darcy_on_cube(anisotropic(), &f, &zero_field, 4).unwrap();
    let b = solve_darcy_on_cube(anisotropic(), &f, &zero_field, 4).unwrap();
    assert_eq!(a.p, b.p);
}

#[test]
fn reconstruction_examples() {
    let t = anisotropic();
    let mesh = unit_cube_mesh(3).unwrap();
    // p = x₁ + 2x₂, f = ∇p
    let p: Vec<f64> = mesh.vertices.iter().map(|x| x[0] + 2.0 * x[1]).collect();
    let f = |_: V3| [1.0, 2.0, 0.0];
    let (u, w) = reconstruct_uw(&t, &mesh, &p, &f, &zero_field);
    assert!(u.iter().chain(&w).flatten().all(|x| x.abs() <= 1e-12));
    let g = |_: V3| [1.0, 0.0, 0.0];
    let (u, w) = reconstruct_uw(&t, &mesh, &p, &f, &g);
    for (a, b) in u.iter().zip(&w) {
        for i in 0..3 {
            assert!((a[i] - t.k2[i][0]).abs() <= 1e-12);
            assert!((b[i] - t.l2[i][0]).abs() <= 1e-12);
        }
    }
}

#[test]
fn point_queries_match_element_data() {
    let f = |x: V3| [x[1], 1.0, 0.0];
    let s = solve_darcy_on_cube(anisotropic(), &f, &zero_field, 4).unwrap();
    for (i, v) in s.mesh.vertices.iter().enumerate().step_by(7) {
        assert!((s.p_at(*v).unwrap() - s.p[i]).abs() <= 1e-12);
    }
    assert!(s.p_at([1.5, 0.5, 0.5]).is_none());
    let c = TetGeom::new(s.mesh.tet_coords(10)).point([0.25; 4]);
    let (u, _) = s.uw_at(c, &f, &zero_field).unwrap();
    assert_eq!(u, s.u[10]);
}

#[test]
fn vtk_export_lists_fields() {
    let s = solve_darcy_on_cube(DarcyTensors::identity(), &|_| [1.0, 0.0, 0.0], &zero_field, 2).unwrap();
    let dir = std::env::temp_dir().join(format!("darcy_vtk_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("d.vtk");
    s.write_vtk(&p).unwrap();
    let txt = std::fs::read_to_string(&p).unwrap();
    for k in ["SCALARS p", "VECTORS u", "VECTORS w"] {
        assert!(txt.contains(k), "{k}");
    }
    std::fs::remove_dir_all(&dir).unwrap();
}
