//! Mesh generators: cubic grids, seeded node perturbation, the spherical
//! octant shell, and the square torus with a radial cut.

use super::{BoundaryTag, Cell, CurvedGrid, Edge, Face, GridError};
use nalgebra::Point3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Lattice description of a structured hexahedral block: `dims` cells per
/// axis, node positions given on the (dims+1) lattice, and an optional
/// curved sampler producing the polyline between two lattice-adjacent
/// nodes.
struct HexLattice<'a> {
    dims: [usize; 3],
    position: &'a dyn Fn([usize; 3]) -> Point3<f64>,
    edge_samples: Option<&'a dyn Fn([usize; 3], [usize; 3]) -> Vec<Point3<f64>>>,
    /// Boundary tag for a face on the boundary: (axis, station, cross indices).
    tag: &'a dyn Fn(usize, usize, [usize; 2]) -> BoundaryTag,
}

/// Node/edge/face index helpers for the structured block. Faces are
/// oriented along the positive axis directions; a cell's incidence sign is
/// +1 on its max side and -1 on its min side, so face normals agree with
/// the outward direction on max sides.
struct HexIndex {
    dims: [usize; 3],
}

impl HexIndex {
    fn node(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.dims;
        i + (nx + 1) * (j + (ny + 1) * k)
    }

    fn num_nodes(&self) -> usize {
        let [nx, ny, nz] = self.dims;
        (nx + 1) * (ny + 1) * (nz + 1)
    }

    /// Edge along `axis` starting at lattice point (i, j, k).
    fn edge(&self, axis: usize, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, nz] = self.dims;
        let x_count = nx * (ny + 1) * (nz + 1);
        let y_count = (nx + 1) * ny * (nz + 1);
        match axis {
            0 => i + nx * (j + (ny + 1) * k),
            1 => x_count + j + ny * (i + (nx + 1) * k),
            2 => x_count + y_count + k + nz * (i + (nx + 1) * j),
            _ => unreachable!(),
        }
    }

    fn num_edges(&self) -> usize {
        let [nx, ny, nz] = self.dims;
        nx * (ny + 1) * (nz + 1) + (nx + 1) * ny * (nz + 1) + (nx + 1) * (ny + 1) * nz
    }

    /// Face normal to `axis` at station `s` along that axis, covering cell
    /// (a, b) in the two cross axes (cyclic order).
    fn face(&self, axis: usize, s: usize, a: usize, b: usize) -> usize {
        let [nx, ny, nz] = self.dims;
        let x_count = (nx + 1) * ny * nz;
        let y_count = (ny + 1) * nz * nx;
        match axis {
            0 => s + (nx + 1) * (a + ny * b),
            1 => x_count + s + (ny + 1) * (a + nz * b),
            2 => x_count + y_count + s + (nz + 1) * (a + nx * b),
            _ => unreachable!(),
        }
    }

    fn num_faces(&self) -> usize {
        let [nx, ny, nz] = self.dims;
        (nx + 1) * ny * nz + (ny + 1) * nz * nx + (nz + 1) * nx * ny
    }

    fn cell(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.dims;
        i + nx * (j + ny * k)
    }

    fn num_cells(&self) -> usize {
        let [nx, ny, nz] = self.dims;
        nx * ny * nz
    }
}

fn build_hex_block(lattice: &HexLattice<'_>) -> Result<CurvedGrid, GridError> {
    let [nx, ny, nz] = lattice.dims;
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(GridError::InvalidParameter(
            "structured block needs at least one cell per axis".into(),
        ));
    }
    let idx = HexIndex { dims: lattice.dims };

    let mut nodes = vec![Point3::origin(); idx.num_nodes()];
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes[idx.node(i, j, k)] = (lattice.position)([i, j, k]);
            }
        }
    }

    let straight = |a: [usize; 3], b: [usize; 3]| -> Vec<Point3<f64>> {
        vec![(lattice.position)(a), (lattice.position)(b)]
    };
    let sample = |a: [usize; 3], b: [usize; 3]| -> Vec<Point3<f64>> {
        match lattice.edge_samples {
            Some(f) => f(a, b),
            None => straight(a, b),
        }
    };

    let mut edges = vec![
        Edge {
            tail: 0,
            head: 0,
            samples: Vec::new()
        };
        idx.num_edges()
    ];
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..nx {
                edges[idx.edge(0, i, j, k)] = Edge {
                    tail: idx.node(i, j, k),
                    head: idx.node(i + 1, j, k),
                    samples: sample([i, j, k], [i + 1, j, k]),
                };
            }
        }
    }
    for k in 0..=nz {
        for j in 0..ny {
            for i in 0..=nx {
                edges[idx.edge(1, i, j, k)] = Edge {
                    tail: idx.node(i, j, k),
                    head: idx.node(i, j + 1, k),
                    samples: sample([i, j, k], [i, j + 1, k]),
                };
            }
        }
    }
    for k in 0..nz {
        for j in 0..=ny {
            for i in 0..=nx {
                edges[idx.edge(2, i, j, k)] = Edge {
                    tail: idx.node(i, j, k),
                    head: idx.node(i, j, k + 1),
                    samples: sample([i, j, k], [i, j, k + 1]),
                };
            }
        }
    }

    // Face loops traverse the two cross axes in cyclic order so the inner
    // orientation (right-hand rule) points along the positive face axis.
    let mut faces = vec![Face { boundary: Vec::new() }; idx.num_faces()];
    for i in 0..=nx {
        for k in 0..nz {
            for j in 0..ny {
                faces[idx.face(0, i, j, k)] = Face {
                    boundary: vec![
                        (idx.edge(1, i, j, k), 1),
                        (idx.edge(2, i, j + 1, k), 1),
                        (idx.edge(1, i, j, k + 1), -1),
                        (idx.edge(2, i, j, k), -1),
                    ],
                };
            }
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            for k in 0..nz {
                faces[idx.face(1, j, k, i)] = Face {
                    boundary: vec![
                        (idx.edge(2, i, j, k), 1),
                        (idx.edge(0, i, j, k + 1), 1),
                        (idx.edge(2, i + 1, j, k), -1),
                        (idx.edge(0, i, j, k), -1),
                    ],
                };
            }
        }
    }
    for k in 0..=nz {
        for j in 0..ny {
            for i in 0..nx {
                faces[idx.face(2, k, i, j)] = Face {
                    boundary: vec![
                        (idx.edge(0, i, j, k), 1),
                        (idx.edge(1, i + 1, j, k), 1),
                        (idx.edge(0, i, j + 1, k), -1),
                        (idx.edge(1, i, j, k), -1),
                    ],
                };
            }
        }
    }

    let mut cells = vec![Cell { faces: Vec::new() }; idx.num_cells()];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                cells[idx.cell(i, j, k)] = Cell {
                    faces: vec![
                        (idx.face(0, i, j, k), -1),
                        (idx.face(0, i + 1, j, k), 1),
                        (idx.face(1, j, k, i), -1),
                        (idx.face(1, j + 1, k, i), 1),
                        (idx.face(2, k, i, j), -1),
                        (idx.face(2, k + 1, i, j), 1),
                    ],
                };
            }
        }
    }

    let mut tags = vec![BoundaryTag::Interior; idx.num_faces()];
    for j in 0..ny {
        for k in 0..nz {
            tags[idx.face(0, 0, j, k)] = (lattice.tag)(0, 0, [j, k]);
            tags[idx.face(0, nx, j, k)] = (lattice.tag)(0, nx, [j, k]);
        }
    }
    for k in 0..nz {
        for i in 0..nx {
            tags[idx.face(1, 0, k, i)] = (lattice.tag)(1, 0, [k, i]);
            tags[idx.face(1, ny, k, i)] = (lattice.tag)(1, ny, [k, i]);
        }
    }
    for i in 0..nx {
        for j in 0..ny {
            tags[idx.face(2, 0, i, j)] = (lattice.tag)(2, 0, [i, j]);
            tags[idx.face(2, nz, i, j)] = (lattice.tag)(2, nz, [i, j]);
        }
    }

    CurvedGrid::new(nodes, edges, faces, cells, tags)
}

/// Axis-aligned n x n x n hexahedral grid on [0, n*h]^3 with planar faces
/// and straight edges. All boundary faces are tagged `Electrode(0)`.
pub fn build_cubic_grid(n: usize, h: f64) -> Result<CurvedGrid, GridError> {
    build_cubic_grid_tagged(n, h, &|_, _, _| BoundaryTag::Electrode(0))
}

/// Cubic grid with a caller-supplied boundary tagger. The tagger receives
/// the face axis, its station along that axis (0 or n), and the cross-axis
/// cell indices.
pub fn build_cubic_grid_tagged(
    n: usize,
    h: f64,
    tag: &dyn Fn(usize, usize, [usize; 2]) -> BoundaryTag,
) -> Result<CurvedGrid, GridError> {
    if n < 1 {
        return Err(GridError::InvalidParameter("need n >= 1".into()));
    }
    if !(h > 0.0) {
        return Err(GridError::InvalidParameter("need h > 0".into()));
    }
    let position = move |ijk: [usize; 3]| {
        Point3::new(ijk[0] as f64 * h, ijk[1] as f64 * h, ijk[2] as f64 * h)
    };
    build_hex_block(&HexLattice {
        dims: [n, n, n],
        position: &position,
        edge_samples: None,
        tag,
    })
}

/// Uniform sample in [-half, half] drawn from a per-node counter-based
/// stream: the node index selects the ChaCha stream, so displacements do
/// not depend on traversal order.
fn node_displacement(seed: u64, node: usize, half: f64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node as u64);
    let mut out = [0.0; 3];
    for v in &mut out {
        *v = (2.0 * rng.random::<f64>() - 1.0) * half;
    }
    out
}

/// Displace every internal node by an i.i.d. uniform sample in the cube
/// [-amplitude*h, amplitude*h]^3, where h is the shortest edge length.
/// Boundary nodes stay put; every edge becomes the straight segment
/// between its (possibly moved) endpoints; topology and tags are kept.
pub fn perturb_grid(grid: &CurvedGrid, amplitude: f64, seed: u64) -> Result<CurvedGrid, GridError> {
    if !(0.0..0.5).contains(&amplitude) {
        return Err(GridError::InvalidAmplitude(amplitude));
    }
    let h = grid
        .edges()
        .iter()
        .map(|e| (grid.nodes()[e.head] - grid.nodes()[e.tail]).norm())
        .fold(f64::INFINITY, f64::min);
    if !h.is_finite() || h <= 0.0 {
        return Err(GridError::InvalidParameter(
            "grid has no usable edge length".into(),
        ));
    }
    let half = amplitude * h;

    let mut nodes = grid.nodes().to_vec();
    for (i, p) in nodes.iter_mut().enumerate() {
        if grid.is_boundary_node(i) {
            continue;
        }
        let d = node_displacement(seed, i, half);
        *p = Point3::new(p.x + d[0], p.y + d[1], p.z + d[2]);
    }

    let edges = grid
        .edges()
        .iter()
        .map(|e| Edge {
            tail: e.tail,
            head: e.head,
            samples: vec![nodes[e.tail], nodes[e.head]],
        })
        .collect();

    CurvedGrid::new(
        nodes,
        edges,
        grid.faces().to_vec(),
        grid.cells().to_vec(),
        grid.boundary_tags().to_vec(),
    )
}

/// One eighth of a spherical shell, meshed as a structured hex block in
/// spherical coordinates (r, theta, phi) on [r_in, r_out] x [0, pi/2]^2.
/// Nodes sit on exact spherical positions and edge polylines sample the
/// coordinate line between endpoints. Lattice nodes along the polar axis
/// coincide geometrically; the faces they span are degenerate (zero area)
/// and are tagged Neumann together with the symmetry planes.
///
/// Tags: inner sphere Electrode(0), outer sphere Electrode(1), everything
/// else Neumann.
pub fn build_spherical_octant_grid(
    n_r: usize,
    n_theta: usize,
    n_phi: usize,
    r_in: f64,
    r_out: f64,
    samples_per_edge: usize,
) -> Result<CurvedGrid, GridError> {
    if !(0.0 < r_in && r_in < r_out) {
        return Err(GridError::InvalidParameter(
            "need 0 < r_in < r_out".into(),
        ));
    }
    if n_r < 1 || n_theta < 1 || n_phi < 1 {
        return Err(GridError::InvalidParameter(
            "need at least one cell per axis".into(),
        ));
    }
    if samples_per_edge < 2 {
        return Err(GridError::InvalidParameter(
            "need samples_per_edge >= 2".into(),
        ));
    }

    let half_pi = std::f64::consts::FRAC_PI_2;
    let spherical = move |ijk: [usize; 3]| -> [f64; 3] {
        let r = r_in + (r_out - r_in) * ijk[0] as f64 / n_r as f64;
        let theta = half_pi * ijk[1] as f64 / n_theta as f64;
        let phi = half_pi * ijk[2] as f64 / n_phi as f64;
        [r, theta, phi]
    };
    let to_cartesian = |s: [f64; 3]| -> Point3<f64> {
        let (r, theta, phi) = (s[0], s[1], s[2]);
        Point3::new(
            r * theta.sin() * phi.cos(),
            r * theta.sin() * phi.sin(),
            r * theta.cos(),
        )
    };
    let position = move |ijk: [usize; 3]| to_cartesian(spherical(ijk));
    let edge_samples = move |a: [usize; 3], b: [usize; 3]| -> Vec<Point3<f64>> {
        let sa = spherical(a);
        let sb = spherical(b);
        (0..samples_per_edge)
            .map(|k| {
                // Endpoints must reproduce the node coordinates bit-exactly.
                if k == 0 {
                    return to_cartesian(sa);
                }
                if k == samples_per_edge - 1 {
                    return to_cartesian(sb);
                }
                let t = k as f64 / (samples_per_edge - 1) as f64;
                to_cartesian([
                    sa[0] + t * (sb[0] - sa[0]),
                    sa[1] + t * (sb[1] - sa[1]),
                    sa[2] + t * (sb[2] - sa[2]),
                ])
            })
            .collect()
    };
    let tag = move |axis: usize, station: usize, _cross: [usize; 2]| -> BoundaryTag {
        if axis == 0 {
            if station == 0 {
                BoundaryTag::Electrode(0)
            } else {
                BoundaryTag::Electrode(1)
            }
        } else {
            BoundaryTag::Neumann
        }
    };
    build_hex_block(&HexLattice {
        dims: [n_r, n_theta, n_phi],
        position: &position,
        edge_samples: Some(&edge_samples),
        tag: &tag,
    })
}

/// Axis-aligned box extents.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn volume(&self) -> f64 {
        (0..3).map(|a| self.max[a] - self.min[a]).product()
    }
}

/// Parameters for the square torus resistor: a box with a rectangular
/// hole through it, cut open once so the two cut surfaces can act as the
/// electrode pair.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TorusSpec {
    pub outer: Aabb,
    pub hole: Aabb,
    pub cells_per_arm: usize,
    pub cells_radial: usize,
    pub cells_z: usize,
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for TorusSpec {
    fn default() -> Self {
        TorusSpec {
            outer: Aabb {
                min: [0.0, 0.0, 0.0],
                max: [3.0, 3.0, 1.0],
            },
            hole: Aabb {
                min: [1.0, 1.0, 0.0],
                max: [2.0, 2.0, 1.0],
            },
            cells_per_arm: 12,
            cells_radial: 4,
            cells_z: 4,
            amplitude: 0.3,
            seed: 7,
        }
    }
}

/// Point on the perimeter of the rectangle [min, max] at normalized
/// parameter t in [0, 1), with corners at t = 0, 1/4, 1/2, 3/4 and t = 0
/// at the (max_x, min_y) corner, walking counterclockwise.
fn rect_perimeter(min: [f64; 2], max: [f64; 2], t: f64) -> [f64; 2] {
    let t = t.rem_euclid(1.0);
    let side = (t * 4.0).floor() as usize % 4;
    let s = t * 4.0 - side as f64;
    match side {
        0 => [max[0], min[1] + s * (max[1] - min[1])],
        1 => [max[0] - s * (max[0] - min[0]), max[1]],
        2 => [min[0], max[1] - s * (max[1] - min[1])],
        _ => [min[0] + s * (max[0] - min[0]), min[1]],
    }
}

/// Hexahedral mesh of the square annulus prism (outer box minus hole)
/// with one radial cut in the middle of the first arm. The two cut
/// cross-sections coincide geometrically but are distinct face sets,
/// tagged Electrode(0) and Electrode(1); every other boundary face is
/// Neumann. Interior nodes are perturbed as in [`perturb_grid`].
pub fn build_square_torus_grid(spec: &TorusSpec) -> Result<CurvedGrid, GridError> {
    for a in 0..3 {
        if !(spec.outer.max[a] > spec.outer.min[a]) || !(spec.hole.max[a] > spec.hole.min[a]) {
            return Err(GridError::InvalidParameter(
                "degenerate box extents".into(),
            ));
        }
    }
    for a in 0..2 {
        if !(spec.hole.min[a] > spec.outer.min[a] && spec.hole.max[a] < spec.outer.max[a]) {
            return Err(GridError::InvalidParameter(
                "hole footprint must lie strictly inside the outer footprint".into(),
            ));
        }
    }
    if spec.hole.min[2] != spec.outer.min[2] || spec.hole.max[2] != spec.outer.max[2] {
        return Err(GridError::InvalidParameter(
            "hole and outer box must share the z extent".into(),
        ));
    }
    if spec.cells_per_arm < 2 || spec.cells_per_arm % 2 != 0 {
        // Corners must land exactly on lattice stations so the mesh tiles
        // the annulus; with the half-arm cut offset that needs an even count.
        return Err(GridError::InvalidParameter(
            "cells_per_arm must be even and >= 2".into(),
        ));
    }
    if spec.cells_radial < 1 || spec.cells_z < 1 {
        return Err(GridError::InvalidParameter(
            "need at least one cell radially and in z".into(),
        ));
    }

    let n_u = 4 * spec.cells_per_arm;
    let n_v = spec.cells_radial;
    let n_w = spec.cells_z;
    let hole_xy = ([spec.hole.min[0], spec.hole.min[1]], [spec.hole.max[0], spec.hole.max[1]]);
    let outer_xy = (
        [spec.outer.min[0], spec.outer.min[1]],
        [spec.outer.max[0], spec.outer.max[1]],
    );
    let z0 = spec.outer.min[2];
    let z1 = spec.outer.max[2];
    // Shift the parametrization by half an arm so the cut lands in the
    // middle of an arm, not on a corner diagonal.
    let t_offset = 0.5 / 4.0;

    let position = move |ijk: [usize; 3]| -> Point3<f64> {
        let t = ijk[0] as f64 / n_u as f64 + t_offset;
        let inner = rect_perimeter(hole_xy.0, hole_xy.1, t);
        let outer = rect_perimeter(outer_xy.0, outer_xy.1, t);
        let v = ijk[1] as f64 / n_v as f64;
        let w = ijk[2] as f64 / n_w as f64;
        Point3::new(
            inner[0] + v * (outer[0] - inner[0]),
            inner[1] + v * (outer[1] - inner[1]),
            z0 + w * (z1 - z0),
        )
    };
    let tag = move |axis: usize, station: usize, _cross: [usize; 2]| -> BoundaryTag {
        if axis == 0 {
            if station == 0 {
                BoundaryTag::Electrode(0)
            } else {
                BoundaryTag::Electrode(1)
            }
        } else {
            BoundaryTag::Neumann
        }
    };
    let grid = build_hex_block(&HexLattice {
        dims: [n_u, n_v, n_w],
        position: &position,
        edge_samples: None,
        tag: &tag,
    })?;

    if spec.amplitude == 0.0 {
        Ok(grid)
    } else {
        perturb_grid(&grid, spec.amplitude, spec.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_counts() {
        let g = build_cubic_grid(1, 1.0).unwrap();
        assert_eq!(g.num_nodes(), 8);
        assert_eq!(g.num_edges(), 12);
        assert_eq!(g.num_faces(), 6);
        assert_eq!(g.num_cells(), 1);
    }

    #[test]
    fn structured_counts_n2() {
        let g = build_cubic_grid(2, 0.5).unwrap();
        assert_eq!(g.num_cells(), 8);
        assert_eq!(g.num_faces(), 36);
        assert!(g.num_faces() >= 3 * g.num_cells());
    }

    #[test]
    fn perturbation_is_deterministic() {
        let base = build_cubic_grid(3, 0.25).unwrap();
        let a = perturb_grid(&base, 0.3, 42).unwrap();
        let b = perturb_grid(&base, 0.3, 42).unwrap();
        for (p, q) in a.nodes().iter().zip(b.nodes()) {
            assert_eq!(p, q);
        }
        let c = perturb_grid(&base, 0.3, 43).unwrap();
        assert!(a.nodes().iter().zip(c.nodes()).any(|(p, q)| p != q));
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let base = build_cubic_grid(2, 1.0).unwrap();
        let p = perturb_grid(&base, 0.0, 5).unwrap();
        for (a, b) in base.nodes().iter().zip(p.nodes()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn boundary_nodes_stay_fixed() {
        let base = build_cubic_grid(3, 1.0).unwrap();
        let p = perturb_grid(&base, 0.4, 11).unwrap();
        let mut moved = 0;
        for i in 0..base.num_nodes() {
            if base.is_boundary_node(i) {
                assert_eq!(base.nodes()[i], p.nodes()[i]);
            } else if base.nodes()[i] != p.nodes()[i] {
                moved += 1;
            }
        }
        // 3^3 lattice has (3-1)^3 internal nodes.
        assert_eq!(moved, 8);
    }

    #[test]
    fn amplitude_out_of_range_rejected() {
        let base = build_cubic_grid(2, 1.0).unwrap();
        assert!(matches!(
            perturb_grid(&base, 0.5, 1),
            Err(GridError::InvalidAmplitude(_))
        ));
        assert!(perturb_grid(&base, 0.499, 1).is_ok());
    }

    #[test]
    fn sphere_single_cell_counts() {
        let g = build_spherical_octant_grid(1, 1, 1, 1.0, 2.0, 5).unwrap();
        assert_eq!(g.num_cells(), 1);
        assert_eq!(g.num_faces(), 6);
    }

    #[test]
    fn torus_cut_face_count() {
        let spec = TorusSpec {
            amplitude: 0.0,
            ..TorusSpec::default()
        };
        let g = build_square_torus_grid(&spec).unwrap();
        let cut0 = g
            .boundary_tags()
            .iter()
            .filter(|t| **t == BoundaryTag::Electrode(0))
            .count();
        let cut1 = g
            .boundary_tags()
            .iter()
            .filter(|t| **t == BoundaryTag::Electrode(1))
            .count();
        assert_eq!(cut0, spec.cells_radial * spec.cells_z);
        assert_eq!(cut1, spec.cells_radial * spec.cells_z);
    }

    #[test]
    fn torus_rejects_bad_extents() {
        let mut spec = TorusSpec::default();
        spec.hole.max = [4.0, 2.0, 1.0];
        assert!(build_square_torus_grid(&spec).is_err());
    }
}
