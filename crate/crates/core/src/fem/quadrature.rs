//! Quadrature on the reference tetrahedron and triangle, in barycentric form.
//! Weights sum to one; multiply by the element measure.

/// (barycentric coordinates, weight)
pub type TetPoint = ([f64; 4], f64);
pub type TriPoint = ([f64; 3], f64);

fn perms_aabb(a: f64, b: f64) -> Vec<[f64; 4]> {
    vec![
        [a, a, b, b],
        [a, b, a, b],
        [a, b, b, a],
        [b, a, a, b],
        [b, a, b, a],
        [b, b, a, a],
    ]
}

fn perms_aaab(a: f64, b: f64) -> Vec<[f64; 4]> {
    vec![[b, a, a, a], [a, b, a, a], [a, a, b, a], [a, a, a, b]]
}

/// 14-point rule, exact for polynomials of degree 5 (all weights positive).
pub fn tet_rule() -> Vec<TetPoint> {
    let mut pts = Vec::with_capacity(14);
    let a = 0.045_503_704_125_649_35;
    let w6 = 0.042_546_020_777_081_264;
    for p in perms_aabb(a, 0.5 - a) {
        pts.push((p, w6));
    }
    let c = 0.092_735_250_310_891_54;
    let wc = 0.073_493_043_116_362_36;
    for p in perms_aaab(c, 1.0 - 3.0 * c) {
        pts.push((p, wc));
    }
    let d = 0.310_885_919_263_300_6;
    let wd = 0.112_687_925_718_015_72;
    for p in perms_aaab(d, 1.0 - 3.0 * d) {
        pts.push((p, wd));
    }
    pts
}

/// Grundmann-Möller rule on the tetrahedron, exact to degree `2s+1`.
/// Some weights are negative; they still sum to one.
pub fn grundmann_moller(s: usize) -> Vec<TetPoint> {
    let n = 3i32;
    let d = 2 * s as i32 + 1;
    let fact = |k: i32| (1..=k).map(|j| j as f64).product::<f64>();
    let mut pts = Vec::new();
    for i in 0..=s as i32 {
        let den = (d + n - 2 * i) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        // scaled by 3! so the weights sum to one
        let w = 6.0 * sign * 2f64.powi(-2 * s as i32) * den.powi(d) / (fact(i) * fact(d + n - i));
        let m = s as i32 - i;
        for b0 in 0..=m {
            for b1 in 0..=m - b0 {
                for b2 in 0..=m - b0 - b1 {
                    let b3 = m - b0 - b1 - b2;
                    let l = [b0, b1, b2, b3].map(|b| (2 * b + 1) as f64 / den);
                    pts.push((l, w));
                }
            }
        }
    }
    pts
}

/// Cheapest available rule exact for polynomials of total degree `deg`.
pub fn tet_rule_for_degree(deg: usize) -> Vec<TetPoint> {
    if deg <= 5 {
        tet_rule()
    } else {
        grundmann_moller(deg / 2)
    }
}

/// 6-point rule, exact for polynomials of degree 4.
pub fn tri_rule() -> Vec<TriPoint> {
    let a = 0.445_948_490_915_965;
    let wa = 0.223_381_589_678_011;
    let b = 0.091_576_213_509_771;
    let wb = 0.109_951_743_655_322;
    vec![
        ([a, a, 1.0 - 2.0 * a], wa),
        ([a, 1.0 - 2.0 * a, a], wa),
        ([1.0 - 2.0 * a, a, a], wa),
        ([b, b, 1.0 - 2.0 * b], wb),
        ([b, 1.0 - 2.0 * b, b], wb),
        ([1.0 - 2.0 * b, b, b], wb),
    ]
}
