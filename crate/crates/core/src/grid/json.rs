//! Mesh interchange format: a single versioned JSON document mirroring the
//! grid's combinatorial fields, with coordinates as decimal doubles. The
//! incidence operators are fully determined by the stored loops and face
//! sets and are rebuilt on read. Schema notes live in docs/mesh-format.md.

use super::{BoundaryTag, Cell, CurvedGrid, Edge, Face, GridError};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MESH_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    tail: usize,
    head: usize,
    samples: Vec<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
struct FaceRecord {
    boundary: Vec<(usize, i8)>,
}

#[derive(Serialize, Deserialize)]
struct CellRecord {
    faces: Vec<(usize, i8)>,
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    format_version: u32,
    nodes: Vec<[f64; 3]>,
    edges: Vec<EdgeRecord>,
    faces: Vec<FaceRecord>,
    cells: Vec<CellRecord>,
    boundary_tags: Vec<BoundaryTag>,
}

fn to_array(p: &Point3<f64>) -> [f64; 3] {
    [p.x, p.y, p.z]
}

pub fn write_mesh_json(grid: &CurvedGrid, path: &Path) -> Result<(), GridError> {
    let file = MeshFile {
        format_version: MESH_FORMAT_VERSION,
        nodes: grid.nodes().iter().map(to_array).collect(),
        edges: grid
            .edges()
            .iter()
            .map(|e| EdgeRecord {
                tail: e.tail,
                head: e.head,
                samples: e.samples.iter().map(to_array).collect(),
            })
            .collect(),
        faces: grid
            .faces()
            .iter()
            .map(|f| FaceRecord {
                boundary: f.boundary.clone(),
            })
            .collect(),
        cells: grid
            .cells()
            .iter()
            .map(|c| CellRecord {
                faces: c.faces.clone(),
            })
            .collect(),
        boundary_tags: grid.boundary_tags().to_vec(),
    };
    let text = serde_json::to_string(&file).expect("mesh serialization cannot fail");
    std::fs::write(path, text).map_err(|source| GridError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_mesh_json(path: &Path) -> Result<CurvedGrid, GridError> {
    let text = std::fs::read_to_string(path).map_err(|source| GridError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: MeshFile = serde_json::from_str(&text).map_err(|source| GridError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    if file.format_version != MESH_FORMAT_VERSION {
        return Err(GridError::UnsupportedFormatVersion(file.format_version));
    }
    CurvedGrid::new(
        file.nodes
            .iter()
            .map(|a| Point3::new(a[0], a[1], a[2]))
            .collect(),
        file.edges
            .into_iter()
            .map(|e| Edge {
                tail: e.tail,
                head: e.head,
                samples: e
                    .samples
                    .iter()
                    .map(|a| Point3::new(a[0], a[1], a[2]))
                    .collect(),
            })
            .collect(),
        file.faces
            .into_iter()
            .map(|f| Face { boundary: f.boundary })
            .collect(),
        file.cells
            .into_iter()
            .map(|c| Cell { faces: c.faces })
            .collect(),
        file.boundary_tags,
    )
}

#[cfg(test)]
mod tests {
    use super::super::{build_cubic_grid, build_spherical_octant_grid, perturb_grid};
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join(format!("curved-mfd-json-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mesh.json");

        let base = build_cubic_grid(3, 0.25).unwrap();
        let grid = perturb_grid(&base, 0.3, 42).unwrap();
        write_mesh_json(&grid, &path).unwrap();
        let back = read_mesh_json(&path).unwrap();

        assert_eq!(grid.nodes(), back.nodes());
        assert_eq!(grid.edges(), back.edges());
        assert_eq!(grid.faces(), back.faces());
        assert_eq!(grid.cells(), back.cells());
        assert_eq!(grid.boundary_tags(), back.boundary_tags());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn curved_mesh_round_trip_keeps_samples() {
        let dir = std::env::temp_dir().join(format!("curved-mfd-json2-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sphere.json");

        let grid = build_spherical_octant_grid(2, 2, 2, 1.0, 2.0, 6).unwrap();
        write_mesh_json(&grid, &path).unwrap();
        let back = read_mesh_json(&path).unwrap();
        assert_eq!(grid.edges(), back.edges());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn rejects_unknown_version() {
        let dir = std::env::temp_dir().join(format!("curved-mfd-json3-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.json");
        std::fs::write(
            &path,
            r#"{"format_version":99,"nodes":[],"edges":[],"faces":[],"cells":[],"boundary_tags":[]}"#,
        )
        .unwrap();
        assert!(matches!(
            read_mesh_json(&path),
            Err(GridError::UnsupportedFormatVersion(99))
        ));
        std::fs::remove_dir_all(&dir).ok();
    }
}
