//! Quadrature bookkeeping for the sliding-circle coupling.
//!
//! Both meshes carry a closed polygon of boundary edges on the mortar
//! circle. The trace space is continuous piecewise linear in angle on the
//! stator-side grid; every integral over a rotor edge is split at the
//! angular breakpoints of the stator edges so each sub-segment sees exactly
//! one pair of trace hat functions. Three-point Gauss along each
//! sub-segment integrates the near-quadratic products of P1 traces to
//! within quadrature accuracy.

use crate::error::{Error, Result};
use crate::geometry::Mesh;

/// One quadrature segment of the interface: a stretch of a boundary edge
/// of one mesh lying under a single stator-side trace edge.
#[derive(Debug, Clone)]
pub struct IfaceSeg {
    /// true if the edge belongs to the rotor mesh.
    pub on_rotor: bool,
    /// Adjacent triangle (index into its mesh).
    pub tri: usize,
    /// Local indices (0..3) within the triangle of the edge endpoints.
    pub edge_local: [usize; 2],
    /// Chord parameter range of this segment within the full edge.
    pub t0: f64,
    pub t1: f64,
    /// Endpoints of the full edge chord.
    pub p0: [f64; 2],
    pub p1: [f64; 2],
    /// Length of the full edge chord.
    pub edge_len: f64,
    /// Outward unit normal of the mesh's domain along this edge.
    pub normal: [f64; 2],
    /// Index of the owning stator-side trace edge.
    pub trace: usize,
}

impl IfaceSeg {
    pub fn len(&self) -> f64 {
        self.edge_len * (self.t1 - self.t0)
    }
}

/// Prepared interface quadrature for one rotor position.
#[derive(Debug, Clone)]
pub struct InterfaceQuad {
    pub segs: Vec<IfaceSeg>,
    pub n_trace: usize,
}

/// Gauss-Legendre points/weights on [0,1], degree-5 exact.
pub const GAUSS3: [(f64, f64); 3] = [
    (0.11270166537925831, 5.0 / 18.0),
    (0.5, 4.0 / 9.0),
    (0.8872983346207417, 5.0 / 18.0),
];

fn wrap(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = a % two_pi;
    if a < 0.0 {
        a += two_pi;
    }
    a
}

/// For each interface edge, find the adjacent triangle, the local indices
/// of the edge endpoints in that triangle, and the outward normal.
fn edge_adjacency(mesh: &Mesh) -> Result<Vec<(usize, [usize; 2], [f64; 2])>> {
    let mut out = Vec::with_capacity(mesh.interface_edges.len());
    // Incidence of interface nodes only, to keep the scan cheap.
    let mut on_iface = vec![false; mesh.n_nodes()];
    for e in &mesh.interface_edges {
        on_iface[e[0]] = true;
        on_iface[e[1]] = true;
    }
    let mut node_tris: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_nodes()];
    for (t, tri) in mesh.tris.iter().enumerate() {
        for &v in tri {
            if on_iface[v] {
                node_tris[v].push(t);
            }
        }
    }
    for &[v0, v1] in &mesh.interface_edges {
        let mut found = None;
        for &t in &node_tris[v0] {
            let tri = mesh.tris[t];
            if tri.contains(&v1) {
                if found.is_some() {
                    return Err(Error::Geometry(
                        "interface edge shared by two triangles".into(),
                    ));
                }
                let l0 = tri.iter().position(|&v| v == v0).unwrap();
                let l1 = tri.iter().position(|&v| v == v1).unwrap();
                found = Some((t, [l0, l1]));
            }
        }
        let (t, locals) = found
            .ok_or_else(|| Error::Geometry("interface edge without adjacent triangle".into()))?;
        let p0 = mesh.nodes[v0];
        let p1 = mesh.nodes[v1];
        let third = mesh.tris[t][3 - locals[0] - locals[1]];
        let q = mesh.nodes[third];
        let e = [p1[0] - p0[0], p1[1] - p0[1]];
        let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
        let mut n = [e[1] / len, -e[0] / len];
        if n[0] * (q[0] - p0[0]) + n[1] * (q[1] - p0[1]) > 0.0 {
            n = [-n[0], -n[1]];
        }
        out.push((t, locals, n));
    }
    Ok(out)
}

/// Point on the chord p0 + t (p1 - p0) lying on the ray at angle `phi`.
fn chord_param_at_angle(p0: [f64; 2], p1: [f64; 2], phi: f64) -> f64 {
    let d = [phi.cos(), phi.sin()];
    let e = [p1[0] - p0[0], p1[1] - p0[1]];
    // p0 + t e = s d  =>  cross(p0, d) + t cross(e, d) = 0
    let den = e[0] * d[1] - e[1] * d[0];
    if den.abs() < 1e-300 {
        return 0.5;
    }
    (-(p0[0] * d[1] - p0[1] * d[0]) / den).clamp(0.0, 1.0)
}

/// Build the interface quadrature for a (possibly rotated) rotor mesh and
/// the fixed stator mesh. The stator-side trace grid must be angularly
/// uniform (true for the generated meshes).
pub fn build_interface(rotor: &Mesh, stator: &Mesh) -> Result<InterfaceQuad> {
    let n_trace = stator.interface_edges.len();
    if n_trace == 0 || rotor.interface_edges.is_empty() {
        return Err(Error::Geometry("both meshes need interface edges".into()));
    }
    let step = 2.0 * std::f64::consts::PI / n_trace as f64;
    for (k, &[v0, _]) in stator.interface_edges.iter().enumerate() {
        let p = stator.nodes[v0];
        let a = wrap(p[1].atan2(p[0]));
        let expect = k as f64 * step;
        let diff = wrap(a - expect + std::f64::consts::PI) - std::f64::consts::PI;
        if diff.abs() > 1e-9 {
            return Err(Error::Geometry(
                "stator interface grid is not angularly uniform".into(),
            ));
        }
    }

    let mut segs = Vec::new();

    // Stator side: one segment per edge, trace = the edge itself.
    for (k, (t, locals, normal)) in edge_adjacency(stator)?.into_iter().enumerate() {
        let [v0, v1] = stator.interface_edges[k];
        let (p0, p1) = (stator.nodes[v0], stator.nodes[v1]);
        let edge_len = ((p1[0] - p0[0]).powi(2) + (p1[1] - p0[1]).powi(2)).sqrt();
        segs.push(IfaceSeg {
            on_rotor: false,
            tri: t,
            edge_local: locals,
            t0: 0.0,
            t1: 1.0,
            p0,
            p1,
            edge_len,
            normal,
            trace: k,
        });
    }

    // Rotor side: split each edge at the trace-grid angles it crosses.
    for (k, (t, locals, normal)) in edge_adjacency(rotor)?.into_iter().enumerate() {
        let [v0, v1] = rotor.interface_edges[k];
        let (p0, p1) = (rotor.nodes[v0], rotor.nodes[v1]);
        let edge_len = ((p1[0] - p0[0]).powi(2) + (p1[1] - p0[1]).powi(2)).sqrt();
        // Angular span of the edge, measured CCW from the start node.
        let a_start = wrap(p0[1].atan2(p0[0]));
        let a_end = wrap(p1[1].atan2(p1[0]));
        let span = wrap(a_end - a_start);
        if span <= 0.0 || span >= std::f64::consts::PI {
            return Err(Error::Geometry(
                "interface edge spans a degenerate or reflex angle".into(),
            ));
        }
        // Breakpoints j*step inside (a_start, a_start + span).
        let j_first = (a_start / step).floor() as i64 + 1;
        let j_last = ((a_start + span) / step).ceil() as i64 - 1;
        let mut cuts = vec![(a_start, 0.0)];
        for j in j_first..=j_last {
            let phi = j as f64 * step;
            if phi - a_start <= 1e-13 || (a_start + span) - phi <= 1e-13 {
                continue;
            }
            cuts.push((phi, chord_param_at_angle(p0, p1, phi)));
        }
        cuts.push((a_start + span, 1.0));
        for w in cuts.windows(2) {
            let ((phi_a, ta), (phi_b, tb)) = (w[0], w[1]);
            if tb - ta < 1e-13 {
                continue;
            }
            let mid = wrap(0.5 * (phi_a + phi_b));
            let trace = ((mid / step).floor() as usize).min(n_trace - 1);
            segs.push(IfaceSeg {
                on_rotor: true,
                tri: t,
                edge_local: locals,
                t0: ta,
                t1: tb,
                p0,
                p1,
                edge_len,
                normal,
                trace,
            });
        }
    }

    Ok(InterfaceQuad { segs, n_trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_meshes, MachineGeometry, MeshParams};

    fn quad_for(theta: f64, n_rot: usize, n_stat: usize) -> (InterfaceQuad, f64) {
        let g = MachineGeometry::standard();
        let p = MeshParams {
            target_h: 3e-3,
            n_phi_rotor: Some(n_rot),
            n_phi_stator: Some(n_stat),
            radial_scale: 1.0,
        };
        let (rot, stat) = generate_meshes(&g, &p).unwrap();
        let rot = rot.rotated(theta);
        (build_interface(&rot, &stat).unwrap(), g.mortar_radius)
    }

    #[test]
    fn each_side_tiles_the_full_circle() {
        for theta in [0.0, 0.13, std::f64::consts::PI / 12.0, 5.1] {
            let (q, r_m) = quad_for(theta, 40, 48);
            let chord = |n: usize| 2.0 * r_m * (std::f64::consts::PI / n as f64).sin();
            let rotor_len: f64 = q.segs.iter().filter(|s| s.on_rotor).map(|s| s.len()).sum();
            let stator_len: f64 = q.segs.iter().filter(|s| !s.on_rotor).map(|s| s.len()).sum();
            assert!((rotor_len - 40.0 * chord(40)).abs() < 1e-10);
            assert!((stator_len - 48.0 * chord(48)).abs() < 1e-10);
        }
    }

    #[test]
    fn rotor_segments_reference_valid_traces() {
        let (q, _) = quad_for(0.2345, 40, 48);
        for s in &q.segs {
            assert!(s.trace < q.n_trace);
            assert!(s.t0 < s.t1);
            assert!(s.len() > 0.0);
        }
    }

    #[test]
    fn aligned_grids_produce_whole_edge_segments() {
        // Same angular count and zero rotation: rotor edges should not split.
        let (q, _) = quad_for(0.0, 48, 48);
        let rotor_segs: Vec<_> = q.segs.iter().filter(|s| s.on_rotor).collect();
        assert_eq!(rotor_segs.len(), 48);
        for s in rotor_segs {
            assert!((s.t1 - s.t0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normals_point_out_of_each_domain() {
        let (q, _) = quad_for(0.7, 40, 48);
        for s in &q.segs {
            let unit = s.normal[0] * s.normal[0] + s.normal[1] * s.normal[1];
            assert!((unit - 1.0).abs() < 1e-12);
            // Outward for the rotor (its interface is the outer boundary),
            // inward for the stator (its interface is the inner boundary).
            let tm = 0.5 * (s.t0 + s.t1);
            let mid = [
                s.p0[0] + tm * (s.p1[0] - s.p0[0]),
                s.p0[1] + tm * (s.p1[1] - s.p0[1]),
            ];
            let radial = s.normal[0] * mid[0] + s.normal[1] * mid[1];
            if s.on_rotor {
                assert!(radial > 0.0);
            } else {
                assert!(radial < 0.0);
            }
        }
    }

    #[test]
    fn rotation_by_half_step_splits_every_rotor_edge() {
        let step = 2.0 * std::f64::consts::PI / 48.0;
        let (q, _) = quad_for(0.5 * step, 48, 48);
        let rotor_segs = q.segs.iter().filter(|s| s.on_rotor).count();
        assert_eq!(rotor_segs, 96);
    }
}
