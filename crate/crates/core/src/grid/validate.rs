//! Cell-complex diagnostics: exact incidence identities, loop closure,
//! boundary multiplicities, and tag coverage.

use super::{BoundaryTag, CurvedGrid};

#[derive(Debug, Clone)]
pub struct ValidationCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValidationCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub fn validate_complex(grid: &CurvedGrid) -> ValidationReport {
    let mut checks = Vec::new();

    // Interior faces belong to exactly two cells with opposite signs,
    // boundary faces to exactly one.
    let mut multiplicity_fail = None;
    for f in 0..grid.num_faces() {
        let incident = grid.cells_of_face(f);
        match incident.len() {
            1 => {}
            2 => {
                if incident[0].1 + incident[1].1 != 0 {
                    multiplicity_fail = Some(format!(
                        "face {f} is shared by cells {} and {} with non-opposite signs",
                        incident[0].0, incident[1].0
                    ));
                    break;
                }
            }
            n => {
                multiplicity_fail = Some(format!("face {f} is incident to {n} cells"));
                break;
            }
        }
    }
    checks.push(ValidationCheck {
        name: "face-cell multiplicity",
        passed: multiplicity_fail.is_none(),
        detail: multiplicity_fail,
    });

    let dc = grid
        .face_cell_incidence()
        .first_nonzero_product(grid.edge_face_incidence());
    checks.push(ValidationCheck {
        name: "D*C = 0",
        passed: dc.is_none(),
        detail: dc.map(|(c, e, v)| format!("D*C != 0 at (cell {c}, edge {e}): {v}")),
    });

    let cg = grid
        .edge_face_incidence()
        .first_nonzero_product(grid.node_edge_incidence());
    checks.push(ValidationCheck {
        name: "C*G = 0",
        passed: cg.is_none(),
        detail: cg.map(|(f, n, v)| format!("C*G != 0 at (face {f}, node {n}): {v}")),
    });

    let mut loop_fail = None;
    for f in 0..grid.num_faces() {
        if let Err(e) = grid.face_boundary_polyline(f) {
            loop_fail = Some(e.to_string());
            break;
        }
    }
    checks.push(ValidationCheck {
        name: "face loop closure",
        passed: loop_fail.is_none(),
        detail: loop_fail,
    });

    let mut endpoint_fail = None;
    for (e, edge) in grid.edges().iter().enumerate() {
        let first = edge.samples.first().unwrap();
        let last = edge.samples.last().unwrap();
        if *first != grid.nodes()[edge.tail] || *last != grid.nodes()[edge.head] {
            endpoint_fail = Some(format!(
                "edge {e} polyline endpoints do not match its tail/head node coordinates"
            ));
            break;
        }
    }
    checks.push(ValidationCheck {
        name: "edge polyline endpoints",
        passed: endpoint_fail.is_none(),
        detail: endpoint_fail,
    });

    let mut tag_fail = None;
    for f in 0..grid.num_faces() {
        let boundary = grid.is_boundary_face(f);
        match (boundary, grid.tag(f)) {
            (true, BoundaryTag::Interior) => {
                tag_fail = Some(format!("boundary face {f} is tagged interior"));
                break;
            }
            (false, BoundaryTag::Neumann) | (false, BoundaryTag::Electrode(_)) => {
                tag_fail = Some(format!("interior face {f} carries a boundary tag"));
                break;
            }
            _ => {}
        }
    }
    checks.push(ValidationCheck {
        name: "boundary tag coverage",
        passed: tag_fail.is_none(),
        detail: tag_fail,
    });

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::super::{build_cubic_grid, Cell, CurvedGrid};
    use super::*;

    #[test]
    fn generator_output_is_valid() {
        let g = build_cubic_grid(2, 1.0).unwrap();
        let report = validate_complex(&g);
        assert!(report.passed(), "{:?}", report.failures().collect::<Vec<_>>());
    }

    #[test]
    fn flipped_cell_sign_fails_dc() {
        let g = build_cubic_grid(2, 1.0).unwrap();
        let mut cells: Vec<Cell> = g.cells().to_vec();
        cells[0].faces[0].1 *= -1;
        let bad = CurvedGrid::new(
            g.nodes().to_vec(),
            g.edges().to_vec(),
            g.faces().to_vec(),
            cells,
            g.boundary_tags().to_vec(),
        )
        .unwrap();
        let report = validate_complex(&bad);
        assert!(!report.passed());
        let dc = report.checks.iter().find(|c| c.name == "D*C = 0").unwrap();
        assert!(!dc.passed);
        assert!(dc.detail.as_ref().unwrap().contains("cell"));
    }

    #[test]
    fn open_loop_fails_closure() {
        let g = build_cubic_grid(1, 1.0).unwrap();
        let mut faces = g.faces().to_vec();
        faces[0].boundary.swap(1, 2);
        let bad = CurvedGrid::new(
            g.nodes().to_vec(),
            g.edges().to_vec(),
            faces,
            g.cells().to_vec(),
            g.boundary_tags().to_vec(),
        )
        .unwrap();
        let report = validate_complex(&bad);
        let closure = report
            .checks
            .iter()
            .find(|c| c.name == "face loop closure")
            .unwrap();
        assert!(!closure.passed);
    }
}
