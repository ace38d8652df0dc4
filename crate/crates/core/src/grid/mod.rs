//! Cell-complex data model for 3D grids whose faces (and edges) may be
//! curved. Curved geometry is carried as sampled polylines on edges; faces
//! and cells are purely combinatorial on top of that.

mod generators;
mod json;
mod validate;

pub use generators::{
    build_cubic_grid, build_cubic_grid_tagged, build_spherical_octant_grid,
    build_square_torus_grid, perturb_grid, Aabb, TorusSpec,
};
pub use json::{read_mesh_json, write_mesh_json, MESH_FORMAT_VERSION};
pub use validate::{validate_complex, ValidationCheck, ValidationReport};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("node id {0} out of bounds")]
    NodeOutOfBounds(usize),
    #[error("edge id {0} out of bounds")]
    EdgeOutOfBounds(usize),
    #[error("face id {0} out of bounds")]
    FaceOutOfBounds(usize),
    #[error("edge {0} has fewer than 2 polyline samples")]
    TooFewSamples(usize),
    #[error("face {face} boundary loop is not closed at edge {edge}")]
    OpenFaceLoop { face: usize, edge: usize },
    #[error("perturbation amplitude {0} must lie in [0, 0.5)")]
    InvalidAmplitude(f64),
    #[error("invalid grid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported mesh format version {0}")]
    UnsupportedFormatVersion(u32),
    #[error("mesh i/o failed for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("mesh parse failed for {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Edge between two nodes, carrying the sampled polyline from tail to head.
/// A straight edge has exactly the two endpoint samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub samples: Vec<Point3<f64>>,
}

/// Face as an ordered boundary loop of signed edges. Sign +1 means the
/// edge is traversed tail-to-head; the loop order fixes the face's inner
/// orientation by the right-hand rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Face {
    pub boundary: Vec<(usize, i8)>,
}

/// Cell as a set of signed faces; sign +1 means the face's inner
/// orientation points out of the cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub faces: Vec<(usize, i8)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    Interior,
    Neumann,
    Electrode(u32),
}

/// Sparse integer incidence matrix, stored by rows in exact arithmetic.
#[derive(Debug, Clone)]
pub struct IncidenceMatrix {
    nrows: usize,
    ncols: usize,
    rows: Vec<Vec<(usize, i32)>>,
}

impl IncidenceMatrix {
    fn new(nrows: usize, ncols: usize) -> Self {
        IncidenceMatrix {
            nrows,
            ncols,
            rows: vec![Vec::new(); nrows],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[(usize, i32)] {
        &self.rows[i]
    }

    pub fn entry(&self, i: usize, j: usize) -> i32 {
        self.rows[i]
            .iter()
            .find(|&&(c, _)| c == j)
            .map(|&(_, v)| v)
            .unwrap_or(0)
    }

    /// First nonzero entry of `self * other`, if any, as (row, col, value).
    /// Exact integer arithmetic.
    pub fn first_nonzero_product(&self, other: &IncidenceMatrix) -> Option<(usize, usize, i64)> {
        assert_eq!(self.ncols, other.nrows);
        let mut acc: std::collections::BTreeMap<usize, i64> = std::collections::BTreeMap::new();
        for i in 0..self.nrows {
            acc.clear();
            for &(k, a) in &self.rows[i] {
                for &(j, b) in &other.rows[k] {
                    *acc.entry(j).or_insert(0) += a as i64 * b as i64;
                }
            }
            for (&j, &v) in acc.iter() {
                if v != 0 {
                    return Some((i, j, v));
                }
            }
        }
        None
    }
}

/// Immutable curved grid: nodes, sampled edges, faces, cells, boundary
/// tags, and the derived incidence operators.
#[derive(Debug, Clone)]
pub struct CurvedGrid {
    nodes: Vec<Point3<f64>>,
    edges: Vec<Edge>,
    faces: Vec<Face>,
    cells: Vec<Cell>,
    boundary_tags: Vec<BoundaryTag>,
    node_edge: IncidenceMatrix,
    edge_face: IncidenceMatrix,
    face_cell: IncidenceMatrix,
    face_cells: Vec<Vec<(usize, i8)>>,
    edge_faces: Vec<Vec<(usize, i8)>>,
    boundary_node: Vec<bool>,
}

impl CurvedGrid {
    pub fn new(
        nodes: Vec<Point3<f64>>,
        edges: Vec<Edge>,
        faces: Vec<Face>,
        cells: Vec<Cell>,
        boundary_tags: Vec<BoundaryTag>,
    ) -> Result<Self, GridError> {
        let nn = nodes.len();
        let ne = edges.len();
        let nf = faces.len();
        let nc = cells.len();
        if boundary_tags.len() != nf {
            return Err(GridError::InvalidParameter(format!(
                "boundary tag count {} does not match face count {}",
                boundary_tags.len(),
                nf
            )));
        }

        let mut node_edge = IncidenceMatrix::new(ne, nn);
        for (e, edge) in edges.iter().enumerate() {
            if edge.tail >= nn {
                return Err(GridError::NodeOutOfBounds(edge.tail));
            }
            if edge.head >= nn {
                return Err(GridError::NodeOutOfBounds(edge.head));
            }
            if edge.samples.len() < 2 {
                return Err(GridError::TooFewSamples(e));
            }
            node_edge.rows[e].push((edge.tail, -1));
            node_edge.rows[e].push((edge.head, 1));
        }

        let mut edge_face = IncidenceMatrix::new(nf, ne);
        let mut edge_faces = vec![Vec::new(); ne];
        for (f, face) in faces.iter().enumerate() {
            for &(e, s) in &face.boundary {
                if e >= ne {
                    return Err(GridError::EdgeOutOfBounds(e));
                }
                edge_face.rows[f].push((e, s as i32));
                edge_faces[e].push((f, s));
            }
        }

        let mut face_cell = IncidenceMatrix::new(nc, nf);
        let mut face_cells = vec![Vec::new(); nf];
        for (c, cell) in cells.iter().enumerate() {
            for &(f, s) in &cell.faces {
                if f >= nf {
                    return Err(GridError::FaceOutOfBounds(f));
                }
                face_cell.rows[c].push((f, s as i32));
                face_cells[f].push((c, s));
            }
        }

        // Boundary nodes: endpoints of any edge of a face with a single
        // incident cell.
        let mut boundary_node = vec![false; nn];
        for (f, face) in faces.iter().enumerate() {
            if face_cells[f].len() == 1 {
                for &(e, _) in &face.boundary {
                    boundary_node[edges[e].tail] = true;
                    boundary_node[edges[e].head] = true;
                }
            }
        }

        Ok(CurvedGrid {
            nodes,
            edges,
            faces,
            cells,
            boundary_tags,
            node_edge,
            edge_face,
            face_cell,
            face_cells,
            edge_faces,
            boundary_node,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn nodes(&self) -> &[Point3<f64>] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn boundary_tags(&self) -> &[BoundaryTag] {
        &self.boundary_tags
    }

    pub fn tag(&self, face: usize) -> BoundaryTag {
        self.boundary_tags[face]
    }

    /// Node-edge incidence, |E| x |N|.
    pub fn node_edge_incidence(&self) -> &IncidenceMatrix {
        &self.node_edge
    }

    /// Edge-face incidence, |F| x |E|.
    pub fn edge_face_incidence(&self) -> &IncidenceMatrix {
        &self.edge_face
    }

    /// Face-cell incidence, |C| x |F|.
    pub fn face_cell_incidence(&self) -> &IncidenceMatrix {
        &self.face_cell
    }

    /// Cells incident to a face, with their incidence signs.
    pub fn cells_of_face(&self, face: usize) -> &[(usize, i8)] {
        &self.face_cells[face]
    }

    /// Faces incident to an edge, with the edge's sign in each face loop.
    pub fn faces_of_edge(&self, edge: usize) -> &[(usize, i8)] {
        &self.edge_faces[edge]
    }

    pub fn is_boundary_face(&self, face: usize) -> bool {
        self.face_cells[face].len() == 1
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        self.boundary_node[node]
    }

    /// An edge lies on the domain boundary iff it belongs to some boundary
    /// face.
    pub fn is_internal_edge(&self, edge: usize) -> bool {
        self.edge_faces[edge]
            .iter()
            .all(|&(f, _)| !self.is_boundary_face(f))
    }

    /// Boundary polyline of a face: all edge samples concatenated in loop
    /// order. The polyline is closed implicitly (first point is not
    /// repeated at the end).
    pub fn face_boundary_polyline(&self, face: usize) -> Result<Vec<Point3<f64>>, GridError> {
        let mut points = Vec::new();
        let mut expected: Option<usize> = None;
        let loop_edges = &self.faces[face].boundary;
        for &(e, s) in loop_edges {
            let edge = &self.edges[e];
            let (start, end) = if s >= 0 {
                (edge.tail, edge.head)
            } else {
                (edge.head, edge.tail)
            };
            if let Some(prev_end) = expected {
                if prev_end != start {
                    return Err(GridError::OpenFaceLoop { face, edge: e });
                }
            }
            expected = Some(end);
            if s >= 0 {
                points.extend(edge.samples[..edge.samples.len() - 1].iter().copied());
            } else {
                points.extend(edge.samples[1..].iter().rev().copied());
            }
        }
        // The loop must chain back to its starting node.
        if let (Some(&(e0, s0)), Some(end)) = (loop_edges.first(), expected) {
            let first = if s0 >= 0 {
                self.edges[e0].tail
            } else {
                self.edges[e0].head
            };
            if first != end {
                return Err(GridError::OpenFaceLoop { face, edge: e0 });
            }
        }
        Ok(points)
    }

    /// Corner nodes of a face in loop order.
    pub fn face_corner_nodes(&self, face: usize) -> Result<Vec<usize>, GridError> {
        let mut corners = Vec::new();
        let mut expected: Option<usize> = None;
        for &(e, s) in &self.faces[face].boundary {
            let edge = &self.edges[e];
            let (start, end) = if s >= 0 {
                (edge.tail, edge.head)
            } else {
                (edge.head, edge.tail)
            };
            if let Some(prev_end) = expected {
                if prev_end != start {
                    return Err(GridError::OpenFaceLoop { face, edge: e });
                }
            }
            corners.push(start);
            expected = Some(end);
        }
        Ok(corners)
    }

    /// New grid with every point (nodes and edge samples) mapped through
    /// `f`. Topology, orientations and tags are preserved.
    pub fn map_points<F>(&self, f: F) -> CurvedGrid
    where
        F: Fn(&Point3<f64>) -> Point3<f64>,
    {
        let mut out = self.clone();
        for p in &mut out.nodes {
            *p = f(p);
        }
        for e in &mut out.edges {
            for p in &mut e.samples {
                *p = f(p);
            }
        }
        out
    }

    /// Replace the boundary tags wholesale (e.g. to retag electrodes).
    pub fn with_boundary_tags(mut self, tags: Vec<BoundaryTag>) -> Result<Self, GridError> {
        if tags.len() != self.faces.len() {
            return Err(GridError::InvalidParameter(format!(
                "boundary tag count {} does not match face count {}",
                tags.len(),
                self.faces.len()
            )));
        }
        self.boundary_tags = tags;
        Ok(self)
    }
}
