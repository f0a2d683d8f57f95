//! Legacy ASCII VTK export (UNSTRUCTURED_GRID of triangles).
//!
//! Everything the pipeline produces can be dumped for ParaView: the bare
//! meshes with region tags, converged states (nodal potential plus the
//! element flux density), design snapshots, and gradient fields for
//! debugging descent directions.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::fem::{DensityField, Machine, PhysicalDesign, StateSolution};
use crate::geometry::{Mesh, RegionTag};
use crate::optimizer::DesignGradient;

/// In-memory VTK dataset. Build one from a mesh, attach fields, write.
#[derive(Debug, Clone)]
pub struct VtkGrid {
    title: String,
    points: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    point_fields: Vec<(String, Vec<f64>)>,
    cell_fields: Vec<(String, Vec<f64>)>,
    cell_int_fields: Vec<(String, Vec<i64>)>,
}

impl VtkGrid {
    pub fn from_mesh(title: &str, mesh: &Mesh) -> Self {
        VtkGrid {
            title: title.to_string(),
            points: mesh.nodes.clone(),
            cells: mesh.tris.clone(),
            point_fields: Vec::new(),
            cell_fields: Vec::new(),
            cell_int_fields: Vec::new(),
        }
    }

    /// Only the design triangles of a mesh, in design-index order, so
    /// per-design-element vectors attach directly.
    pub fn from_design_cells(title: &str, mesh: &Mesh) -> Self {
        VtkGrid {
            title: title.to_string(),
            points: mesh.nodes.clone(),
            cells: mesh
                .design_elements
                .iter()
                .map(|&e| mesh.tris[e])
                .collect(),
            point_fields: Vec::new(),
            cell_fields: Vec::new(),
            cell_int_fields: Vec::new(),
        }
    }

    /// Two meshes side by side (rotor and stator); cell and point data
    /// must then cover both, rotor first.
    pub fn from_mesh_pair(title: &str, first: &Mesh, second: &Mesh) -> Self {
        let offset = first.nodes.len();
        let mut points = first.nodes.clone();
        points.extend_from_slice(&second.nodes);
        let mut cells = first.tris.clone();
        cells.extend(
            second
                .tris
                .iter()
                .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]),
        );
        VtkGrid {
            title: title.to_string(),
            points,
            cells,
            point_fields: Vec::new(),
            cell_fields: Vec::new(),
            cell_int_fields: Vec::new(),
        }
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn point_scalars(&mut self, name: &str, values: Vec<f64>) -> &mut Self {
        assert_eq!(values.len(), self.points.len(), "point field {name}");
        self.point_fields.push((name.to_string(), values));
        self
    }

    pub fn cell_scalars(&mut self, name: &str, values: Vec<f64>) -> &mut Self {
        assert_eq!(values.len(), self.cells.len(), "cell field {name}");
        self.cell_fields.push((name.to_string(), values));
        self
    }

    pub fn cell_ints(&mut self, name: &str, values: Vec<i64>) -> &mut Self {
        assert_eq!(values.len(), self.cells.len(), "cell field {name}");
        self.cell_int_fields.push((name.to_string(), values));
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("# vtk DataFile Version 3.0\n");
        out.push_str(&self.title);
        out.push_str("\nASCII\nDATASET UNSTRUCTURED_GRID\n");

        let _ = writeln!(out, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(out, "{} {} 0", p[0], p[1]);
        }
        let _ = writeln!(out, "CELLS {} {}", self.cells.len(), 4 * self.cells.len());
        for c in &self.cells {
            let _ = writeln!(out, "3 {} {} {}", c[0], c[1], c[2]);
        }
        let _ = writeln!(out, "CELL_TYPES {}", self.cells.len());
        for _ in &self.cells {
            out.push_str("5\n");
        }

        if !self.point_fields.is_empty() {
            let _ = writeln!(out, "POINT_DATA {}", self.points.len());
            for (name, values) in &self.point_fields {
                let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for v in values {
                    let _ = writeln!(out, "{v}");
                }
            }
        }
        if !self.cell_fields.is_empty() || !self.cell_int_fields.is_empty() {
            let _ = writeln!(out, "CELL_DATA {}", self.cells.len());
            for (name, values) in &self.cell_int_fields {
                let _ = writeln!(out, "SCALARS {name} int 1\nLOOKUP_TABLE default");
                for v in values {
                    let _ = writeln!(out, "{v}");
                }
            }
            for (name, values) in &self.cell_fields {
                let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for v in values {
                    let _ = writeln!(out, "{v}");
                }
            }
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

fn tag_code(tag: RegionTag) -> i64 {
    match tag {
        RegionTag::FerroStator => 1,
        RegionTag::AirStator => 2,
        RegionTag::RotorDesign => 3,
        RegionTag::ArkkioAnnulus => 4,
        RegionTag::Coil { slot } => 10 + slot as i64,
    }
}

/// A mesh with its region tags as an integer cell field.
pub fn write_mesh(path: impl AsRef<Path>, mesh: &Mesh, title: &str) -> Result<()> {
    let mut grid = VtkGrid::from_mesh(title, mesh);
    grid.cell_ints("region_tag", mesh.tags.iter().map(|&t| tag_code(t)).collect());
    grid.write(path)
}

fn element_flux_norm(mesh: &Mesh, u: &[f64]) -> Vec<f64> {
    (0..mesh.n_elements())
        .map(|e| {
            let g = mesh.basis_gradients(e);
            let t = mesh.tris[e];
            let mut gx = 0.0;
            let mut gy = 0.0;
            for k in 0..3 {
                gx += u[t[k]] * g[k][0];
                gy += u[t[k]] * g[k][1];
            }
            // B = curl(u e_z) has the same norm as grad u
            (gx * gx + gy * gy).sqrt()
        })
        .collect()
}

/// A converged state on the full machine at its rotor angle: nodal
/// potential and per-element |B|. Interface trace dofs carry no geometry
/// and are not exported.
pub fn write_state(path: impl AsRef<Path>, machine: &Machine, sol: &StateSolution) -> Result<()> {
    let stator = machine.stator_mesh();
    let (grid, b_mag, u_nodes) = match machine.rotor_at(sol.theta) {
        Some(rotor) => {
            let grid = VtkGrid::from_mesh_pair("machine state", &rotor, stator);
            let u_r = machine.u_rotor(sol);
            let u_s = machine.u_stator(sol);
            let mut b = element_flux_norm(&rotor, u_r);
            b.extend(element_flux_norm(stator, u_s));
            let mut u = u_r.to_vec();
            u.extend_from_slice(u_s);
            (grid, b, u)
        }
        None => {
            let grid = VtkGrid::from_mesh("machine state", stator);
            let u_s = machine.u_stator(sol);
            (grid, element_flux_norm(stator, u_s), u_s.to_vec())
        }
    };
    let mut grid = grid;
    grid.point_scalars("u", u_nodes);
    grid.cell_scalars("b_mag", b_mag);
    grid.write(path)
}

/// Snapshot of a design: raw densities alongside the physical (filtered,
/// projected) iron density, magnet strength and magnet angle.
pub fn write_design_snapshot(
    path: impl AsRef<Path>,
    machine: &Machine,
    raw: &DensityField,
    physical: &PhysicalDesign,
) -> Result<()> {
    let mut grid = VtkGrid::from_design_cells("design snapshot", machine.design_mesh());
    let norm: Vec<f64> = physical
        .mag
        .iter()
        .map(|m| (m[0] * m[0] + m[1] * m[1]).sqrt())
        .collect();
    let angle: Vec<f64> = physical.mag.iter().map(|m| m[1].atan2(m[0])).collect();
    grid.cell_scalars("rho_nu", raw.rho_nu.clone())
        .cell_scalars("rho_mx", raw.rho_mx.clone())
        .cell_scalars("rho_my", raw.rho_my.clone())
        .cell_scalars("iron_density", physical.rho_nu.clone())
        .cell_scalars("mag_norm", norm)
        .cell_scalars("mag_angle", angle);
    grid.write(path)
}

/// The three gradient channels on the design cells.
pub fn write_gradient(
    path: impl AsRef<Path>,
    machine: &Machine,
    grad: &DesignGradient,
) -> Result<()> {
    let mut grid = VtkGrid::from_design_cells("design gradient", machine.design_mesh());
    grid.cell_scalars("g_rho_nu", grad.g_rho_nu.clone())
        .cell_scalars("g_mx", grad.g_mx.clone())
        .cell_scalars("g_my", grad.g_my.clone());
    grid.write(path)
}
