use super::{CellMesh, FaceTag, MacroMesh, ObstacleSpec, TetMesh};
use crate::geom::{det6, V3};
use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::Arc;

/// Smallest tet volume kept after snapping, relative to h^3 (a Kuhn tet has 1/6).
const MIN_QUALITY: f64 = 1e-3;

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

#[inline]
fn gid(g: [usize; 3], n: usize) -> usize {
    (g[0] * (n + 1) + g[1]) * (n + 1) + g[2]
}

/// Six Kuhn tets per cube of an `n^3` grid, as grid-index quadruples.
/// The split of cube `c` is reflected along axis `d` when `2 c_d >= n`.
fn kuhn_grid(n: usize) -> Vec<[[usize; 3]; 4]> {
    let mut out = Vec::with_capacity(6 * n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let c = [i, j, k];
                let flip = [2 * i >= n, 2 * j >= n, 2 * k >= n];
                for p in PERMS {
                    let mut t = [0usize; 3];
                    let mut tet = [[0usize; 3]; 4];
                    for s in 0..4 {
                        if s > 0 {
                            t[p[s - 1]] = 1;
                        }
                        for d in 0..3 {
                            let l = if flip[d] { 1 - t[d] } else { t[d] };
                            tet[s][d] = c[d] + l;
                        }
                    }
                    out.push(tet);
                }
            }
        }
    }
    out
}

fn grid_point(g: [usize; 3], n: usize) -> V3 {
    [g[0] as f64 / n as f64, g[1] as f64 / n as f64, g[2] as f64 / n as f64]
}

fn orient(tet: &mut [usize; 4], x: &[V3]) {
    if det6(x[tet[0]], x[tet[1]], x[tet[2]], x[tet[3]]) < 0.0 {
        tet.swap(2, 3);
    }
}

fn on_cell_boundary(g: [usize; 3], n: usize) -> bool {
    g.iter().any(|&c| c == 0 || c == n)
}

/// Structured mesh of the unit cube without obstacle; all boundary faces are
/// tagged exterior.
pub fn unit_cube_mesh(n: usize) -> Result<TetMesh> {
    if n == 0 {
        return Err(Error::ResolutionTooCoarse(n));
    }
    let np = (n + 1).pow(3);
    let mut vertices = vec![[0.0; 3]; np];
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                vertices[gid([i, j, k], n)] = grid_point([i, j, k], n);
            }
        }
    }
    let mut tets: Vec<[usize; 4]> = kuhn_grid(n)
        .into_iter()
        .map(|t| [gid(t[0], n), gid(t[1], n), gid(t[2], n), gid(t[3], n)])
        .collect();
    for t in tets.iter_mut() {
        orient(t, &vertices);
    }
    let mut mesh = TetMesh { vertices, tets, faces: Vec::new(), obstacle_normal: vec![None; np], h_max: 0.0 };
    mesh.collect_boundary(|_| Some(FaceTag::Exterior))?;
    mesh.compute_h();
    Ok(mesh)
}

/// Mesh of the perforated cell `Y \ F`.
///
/// Grid vertices close to the sphere are projected radially onto it: for every
/// grid edge crossing the surface the endpoint with the smaller level value
/// moves. After that no edge crosses, and each tet lies entirely on one side.
pub fn build_unit_cell_mesh(resolution: usize, obstacle: ObstacleSpec) -> Result<CellMesh> {
    obstacle.validate()?;
    let n = resolution;
    if n < 4 {
        return Err(Error::ResolutionTooCoarse(n));
    }
    let np = (n + 1).pow(3);
    let mut grid = vec![[0usize; 3]; np];
    let mut x = vec![[0.0; 3]; np];
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                let id = gid([i, j, k], n);
                grid[id] = [i, j, k];
                x[id] = grid_point([i, j, k], n);
            }
        }
    }
    let phi: Vec<f64> = x.iter().map(|&p| obstacle.level(p)).collect();
    let gtets = kuhn_grid(n);
    let mut tets: Vec<[usize; 4]> =
        gtets.iter().map(|t| [gid(t[0], n), gid(t[1], n), gid(t[2], n), gid(t[3], n)]).collect();

    let mut snap = vec![false; np];
    for t in &tets {
        for (a, b) in super::LOCAL_EDGES {
            let (va, vb) = (t[a], t[b]);
            if phi[va] * phi[vb] < 0.0 {
                let (pa, pb) = (phi[va].abs(), phi[vb].abs());
                // ties go to the inside vertex
                let v = if pa < pb || (pa == pb && phi[va] < 0.0) { va } else { vb };
                snap[v] = true;
            }
        }
    }
    for t in tets.iter_mut() {
        orient(t, &x);
    }
    let grid_x = x.clone();
    let h3 = (1.0 / n as f64).powi(3);
    // side: +1 fluid, 0 on the surface, -1 inside
    let mut side = vec![0i8; np];
    let mut kept: Vec<[usize; 4]>;
    loop {
        for v in 0..np {
            if snap[v] {
                x[v] = obstacle.project(grid_x[v]);
                side[v] = 0;
            } else {
                side[v] = if phi[v] > 0.0 {
                    1
                } else if phi[v] < 0.0 {
                    -1
                } else {
                    0
                };
            }
        }
        kept = tets
            .iter()
            .copied()
            .filter(|t| t.iter().all(|&v| side[v] >= 0) && t.iter().any(|&v| side[v] > 0))
            .collect();
        // A kept tet flattened or inverted by the projection has its outer vertex
        // inside the spherical cap over its surface face; snap that vertex too.
        let mut changed = false;
        for t in &kept {
            if det6(x[t[0]], x[t[1]], x[t[2]], x[t[3]]) / 6.0 <= MIN_QUALITY * h3 {
                let v = t
                    .iter()
                    .copied()
                    .filter(|&v| side[v] > 0)
                    .min_by(|&a, &b| phi[a].total_cmp(&phi[b]))
                    .unwrap();
                snap[v] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for v in 0..np {
        if side[v] <= 0 && on_cell_boundary(grid[v], n) {
            return Err(Error::ResolutionTooCoarse(n));
        }
    }
    let mut tets = kept;

    // compact in grid order
    let mut used = vec![false; np];
    for t in &tets {
        for &v in t {
            used[v] = true;
        }
    }
    let mut newid = vec![usize::MAX; np];
    let mut vertices = Vec::new();
    let mut vgrid = Vec::new();
    let mut vside = Vec::new();
    for v in 0..np {
        if used[v] {
            newid[v] = vertices.len();
            vertices.push(x[v]);
            vgrid.push(grid[v]);
            vside.push(side[v]);
        }
    }
    for t in tets.iter_mut() {
        for v in t.iter_mut() {
            *v = newid[*v];
        }
    }
    let nv = vertices.len();
    let mut mesh = TetMesh { vertices, tets, faces: Vec::new(), obstacle_normal: vec![None; nv], h_max: 0.0 };
    mesh.collect_boundary(|key| {
        let g = [vgrid[key[0]], vgrid[key[1]], vgrid[key[2]]];
        for d in 0..3 {
            if g.iter().all(|p| p[d] == 0) {
                return Some(FaceTag::Periodic { axis: d, plus: false });
            }
            if g.iter().all(|p| p[d] == n) {
                return Some(FaceTag::Periodic { axis: d, plus: true });
            }
        }
        if key.iter().all(|&v| vside[v] == 0) {
            return Some(FaceTag::Obstacle);
        }
        None
    })?;
    for f in &mesh.faces {
        if f.tag == FaceTag::Obstacle {
            for &v in &f.verts {
                mesh.obstacle_normal[v] = Some(obstacle.normal_at(mesh.vertices[v]));
            }
        }
    }
    mesh.compute_h();

    // periodic partners: key on the two in-plane grid coordinates
    let mut plane: HashMap<(usize, bool, [[usize; 2]; 3]), usize> = HashMap::new();
    let pkey = |f: &super::BoundaryFace, axis: usize| {
        let mut k: [[usize; 2]; 3] = [[0; 2]; 3];
        for (s, &v) in f.verts.iter().enumerate() {
            let g = vgrid[v];
            k[s] = match axis {
                0 => [g[1], g[2]],
                1 => [g[0], g[2]],
                _ => [g[0], g[1]],
            };
        }
        k.sort_unstable();
        k
    };
    for (i, f) in mesh.faces.iter().enumerate() {
        if let FaceTag::Periodic { axis, plus } = f.tag {
            plane.insert((axis, plus, pkey(f, axis)), i);
        }
    }
    let mut partner = vec![None; mesh.faces.len()];
    for (i, f) in mesh.faces.iter().enumerate() {
        if let FaceTag::Periodic { axis, plus } = f.tag {
            partner[i] = plane.get(&(axis, !plus, pkey(f, axis))).copied();
        }
    }
    let lookup = vgrid.iter().enumerate().map(|(v, &g)| (g, v)).collect();
    Ok(CellMesh { mesh: Arc::new(mesh), resolution: n, obstacle, grid: vgrid, partner, lookup })
}

/// Tiles the unit cube with `(1/epsilon)^3` copies of the cell mesh scaled by epsilon.
pub fn build_macro_mesh(epsilon: f64, per_cell_resolution: usize, obstacle: ObstacleSpec) -> Result<MacroMesh> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::NonIntegerTiling(epsilon));
    }
    let mf = 1.0 / epsilon;
    let m = mf.round() as usize;
    if (mf - m as f64).abs() > 1e-9 * mf {
        return Err(Error::NonIntegerTiling(epsilon));
    }
    let cell = build_unit_cell_mesh(per_cell_resolution, obstacle)?;
    let n = per_cell_resolution;
    let big = m * n;
    let cm = &cell.mesh;
    let nvc = cm.n_vertices();
    let ncells = m * m * m;
    let mut slot = vec![usize::MAX; (big + 1).pow(3)];
    let mut vertices = Vec::new();
    let mut gkeys: Vec<[usize; 3]> = Vec::new();
    let mut obstacle_normal = Vec::new();
    let mut vertex_map = Vec::with_capacity(ncells * nvc);
    let mut tets = Vec::with_capacity(ncells * cm.n_tets());
    for c in 0..ncells {
        let k = [c / (m * m), (c / m) % m, c % m];
        let base = vertex_map.len();
        for v in 0..nvc {
            let g = cell.grid[v];
            let gk = [k[0] * n + g[0], k[1] * n + g[1], k[2] * n + g[2]];
            let s = gid(gk, big);
            if slot[s] == usize::MAX {
                slot[s] = vertices.len();
                let y = cm.vertices[v];
                vertices.push([
                    (k[0] as f64 + y[0]) / m as f64,
                    (k[1] as f64 + y[1]) / m as f64,
                    (k[2] as f64 + y[2]) / m as f64,
                ]);
                gkeys.push(gk);
                obstacle_normal.push(cm.obstacle_normal[v]);
            }
            vertex_map.push(slot[s]);
        }
        for t in &cm.tets {
            tets.push([
                vertex_map[base + t[0]],
                vertex_map[base + t[1]],
                vertex_map[base + t[2]],
                vertex_map[base + t[3]],
            ]);
        }
    }
    let mut mesh = TetMesh { vertices, tets, faces: Vec::new(), obstacle_normal, h_max: 0.0 };
    let on_obs: Vec<bool> = mesh.obstacle_normal.iter().map(|o| o.is_some()).collect();
    mesh.collect_boundary(|key| {
        for d in 0..3 {
            if key.iter().all(|&v| gkeys[v][d] == 0) || key.iter().all(|&v| gkeys[v][d] == big) {
                return Some(FaceTag::Exterior);
            }
        }
        if key.iter().all(|&v| on_obs[v]) {
            return Some(FaceTag::Obstacle);
        }
        None
    })?;
    mesh.compute_h();
    Ok(MacroMesh { mesh: Arc::new(mesh), epsilon: 1.0 / m as f64, m, cell, vertex_map })
}
