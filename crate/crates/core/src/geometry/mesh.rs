//! Structured polar triangulations of the machine cross-section.
//!
//! Nodes sit on concentric rings sharing one angular grid per mesh; every
//! region boundary (rotor surface, torque ring, bore, slot top, outer
//! boundary) is a ring, so region tagging is exact. Quads between rings are
//! split into two CCW triangles; the rotor disk center is a triangle fan.
//!
//! The rotor and stator are meshed separately and meet at the sliding
//! circle; their angular grids are independent. A conforming variant meshes
//! the whole section in one piece for verification runs.

use super::machine::MachineGeometry;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionTag {
    FerroStator,
    AirStator,
    Coil { slot: u32 },
    RotorDesign,
    ArkkioAnnulus,
}

/// Triangle mesh with region tags and the boundary data the solver needs.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    /// CCW-oriented triangles.
    pub tris: Vec<[usize; 3]>,
    pub tags: Vec<RegionTag>,
    /// Edges on the sliding circle, ordered CCW. For a rotor mesh this is
    /// its outer boundary; for a stator mesh its inner boundary. Empty on a
    /// conforming mesh.
    pub interface_edges: Vec<[usize; 2]>,
    /// Nodes on the outer stator boundary where u = 0 is imposed.
    pub dirichlet_nodes: Vec<usize>,
    /// Indices of the design (rotor disk) triangles, ascending.
    pub design_elements: Vec<usize>,
    areas: Vec<f64>,
}

/// Mesh resolution knobs. `target_h` drives both ring spacing and the
/// angular division; the overrides exist for tests that need a specific
/// element budget on one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshParams {
    pub target_h: f64,
    pub n_phi_rotor: Option<usize>,
    pub n_phi_stator: Option<usize>,
    /// Stretch factor applied to the radial spacing only.
    pub radial_scale: f64,
}

impl Default for MeshParams {
    fn default() -> Self {
        MeshParams {
            target_h: 1.6e-3,
            n_phi_rotor: None,
            n_phi_stator: None,
            radial_scale: 1.0,
        }
    }
}

impl MeshParams {
    pub fn with_target_h(target_h: f64) -> Self {
        MeshParams {
            target_h,
            ..MeshParams::default()
        }
    }

    fn validate(&self, geom: &MachineGeometry) -> Result<()> {
        if !(self.target_h > 0.0) {
            return Err(Error::MeshParams(format!(
                "target_h must be positive, got {}",
                self.target_h
            )));
        }
        if self.target_h >= geom.gap() / 2.0 {
            return Err(Error::MeshParams(format!(
                "target_h {} must be below half the air gap {}",
                self.target_h,
                geom.gap()
            )));
        }
        if !(self.radial_scale > 0.0) {
            return Err(Error::MeshParams("radial_scale must be positive".into()));
        }
        Ok(())
    }

    fn n_phi_rotor(&self, geom: &MachineGeometry) -> usize {
        self.n_phi_rotor.unwrap_or_else(|| {
            let n = (2.0 * std::f64::consts::PI * geom.mortar_radius / self.target_h).ceil() as usize;
            n.next_multiple_of(4).max(12)
        })
    }

    fn n_phi_stator(&self, geom: &MachineGeometry) -> usize {
        self.n_phi_stator.unwrap_or_else(|| {
            let n = (2.0 * std::f64::consts::PI * geom.stator_inner / self.target_h).ceil() as usize;
            n.next_multiple_of(2 * geom.slot_count).max(2 * geom.slot_count)
        })
    }
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.tris.len()
    }

    #[inline]
    pub fn area(&self, e: usize) -> f64 {
        self.areas[e]
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let [a, b, c] = self.tris[e];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [
            (pa[0] + pb[0] + pc[0]) / 3.0,
            (pa[1] + pb[1] + pc[1]) / 3.0,
        ]
    }

    /// Gradients of the three P1 basis functions on element `e`.
    #[inline]
    pub fn basis_gradients(&self, e: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.tris[e];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let inv2a = 0.5 / self.areas[e];
        [
            [(pb[1] - pc[1]) * inv2a, (pc[0] - pb[0]) * inv2a],
            [(pc[1] - pa[1]) * inv2a, (pa[0] - pc[0]) * inv2a],
            [(pa[1] - pb[1]) * inv2a, (pb[0] - pa[0]) * inv2a],
        ]
    }

    /// Longest edge over all triangles; the Nitsche penalty scales with it.
    pub fn max_edge_len(&self) -> f64 {
        let mut h = 0.0f64;
        for t in &self.tris {
            for k in 0..3 {
                let p = self.nodes[t[k]];
                let q = self.nodes[t[(k + 1) % 3]];
                h = h.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
            }
        }
        h
    }

    /// Rigid rotation of the whole mesh by `theta` about the origin.
    /// Connectivity, tags, and element order are untouched.
    pub fn rotated(&self, theta: f64) -> Mesh {
        let (s, c) = theta.sin_cos();
        let mut out = self.clone();
        for p in &mut out.nodes {
            let [x, y] = *p;
            *p = [c * x - s * y, s * x + c * y];
        }
        out
    }

    /// Total area covered by elements with a given predicate on tags.
    pub fn area_where(&self, pred: impl Fn(RegionTag) -> bool) -> f64 {
        self.tris
            .iter()
            .enumerate()
            .filter(|(e, _)| pred(self.tags[*e]))
            .map(|(e, _)| self.areas[e])
            .sum()
    }

    /// Locate the element containing point `p` and its barycentric
    /// coordinates. Linear scan; used by verification code, not solves.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let tol = -1e-9;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for (e, t) in self.tris.iter().enumerate() {
            let (pa, pb, pc) = (self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]);
            let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
            if det.abs() < 1e-30 {
                continue;
            }
            let l1 = ((pb[0] - p[0]) * (pc[1] - p[1]) - (pc[0] - p[0]) * (pb[1] - p[1])) / det;
            let l2 = ((pc[0] - p[0]) * (pa[1] - p[1]) - (pa[0] - p[0]) * (pc[1] - p[1])) / det;
            let l3 = 1.0 - l1 - l2;
            let worst = l1.min(l2).min(l3);
            if worst >= tol {
                return Some((e, [l1, l2, l3]));
            }
            match best {
                Some((_, _, w)) if w >= worst => {}
                _ => best = Some((e, [l1, l2, l3], worst)),
            }
        }
        // Accept near-misses from roundoff at region boundaries.
        best.filter(|(_, _, w)| *w > -1e-6).map(|(e, l, _)| (e, l))
    }

    /// Evaluate a nodal field at a point, if the point is inside the mesh.
    pub fn eval_nodal(&self, u: &[f64], p: [f64; 2]) -> Option<f64> {
        let (e, l) = self.locate(p)?;
        let [a, b, c] = self.tris[e];
        Some(l[0] * u[a] + l[1] * u[b] + l[2] * u[c])
    }

    fn finish(mut self) -> Self {
        self.areas = self
            .tris
            .iter()
            .map(|t| {
                let (pa, pb, pc) = (self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]);
                0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
            })
            .collect();
        self.design_elements = self
            .tags
            .iter()
            .enumerate()
            .filter(|(_, t)| matches!(t, RegionTag::RotorDesign))
            .map(|(e, _)| e)
            .collect();
        self
    }
}

/// Ring ladder: radii (ascending) plus which radii start a new region.
fn subdivide(control: &[f64], spacing: f64) -> Vec<f64> {
    let mut radii = vec![control[0]];
    for w in control.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = (((b - a) / spacing).ceil() as usize).max(1);
        for k in 1..=n {
            radii.push(a + (b - a) * k as f64 / n as f64);
        }
    }
    radii
}

struct RingBuilder {
    nodes: Vec<[f64; 2]>,
    tris: Vec<[usize; 3]>,
    n_phi: usize,
    /// Node index of the first node of each ring (most recent last).
    ring_starts: Vec<usize>,
    ring_radii: Vec<f64>,
}

impl RingBuilder {
    fn new(n_phi: usize) -> Self {
        RingBuilder {
            nodes: Vec::new(),
            tris: Vec::new(),
            n_phi,
            ring_starts: Vec::new(),
            ring_radii: Vec::new(),
        }
    }

    fn push_ring(&mut self, r: f64) {
        let start = self.nodes.len();
        let step = 2.0 * std::f64::consts::PI / self.n_phi as f64;
        for k in 0..self.n_phi {
            let (s, c) = (k as f64 * step).sin_cos();
            self.nodes.push([r * c, r * s]);
        }
        if let (Some(&prev_start), Some(&prev_r)) = (self.ring_starts.last(), self.ring_radii.last())
        {
            if prev_r == 0.0 {
                // Fan from the center node.
                for k in 0..self.n_phi {
                    let k1 = (k + 1) % self.n_phi;
                    self.tris.push([prev_start, start + k, start + k1]);
                }
            } else {
                for k in 0..self.n_phi {
                    let k1 = (k + 1) % self.n_phi;
                    self.tris.push([prev_start + k, start + k, start + k1]);
                    self.tris.push([prev_start + k, start + k1, prev_start + k1]);
                }
            }
        }
        self.ring_starts.push(start);
        self.ring_radii.push(r);
    }

    fn push_center(&mut self) {
        debug_assert!(self.nodes.is_empty());
        self.nodes.push([0.0, 0.0]);
        self.ring_starts.push(0);
        self.ring_radii.push(0.0);
    }

    fn ring_edges(&self, ring: usize) -> Vec<[usize; 2]> {
        let start = self.ring_starts[ring];
        (0..self.n_phi)
            .map(|k| [start + k, start + (k + 1) % self.n_phi])
            .collect()
    }
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = a % two_pi;
    if a < 0.0 {
        a += two_pi;
    }
    a
}

/// Which slot, if any, covers the angle `phi` at the given fill fraction.
fn slot_at(geom: &MachineGeometry, phi: f64) -> Option<u32> {
    let pitch = 2.0 * std::f64::consts::PI / geom.slot_count as f64;
    let phi = wrap_angle(phi);
    let k = (phi / pitch).floor();
    let local = phi - k * pitch;
    let lo = pitch * (1.0 - geom.slot_fill) / 2.0;
    let hi = pitch * (1.0 + geom.slot_fill) / 2.0;
    if local >= lo && local < hi {
        Some(k as u32 % geom.slot_count as u32)
    } else {
        None
    }
}

fn stator_tag(geom: &MachineGeometry, centroid: [f64; 2]) -> RegionTag {
    let r = (centroid[0] * centroid[0] + centroid[1] * centroid[1]).sqrt();
    if r < geom.arkkio_inner {
        RegionTag::AirStator
    } else if r < geom.arkkio_outer {
        RegionTag::ArkkioAnnulus
    } else if r < geom.stator_inner {
        RegionTag::AirStator
    } else if r < geom.slot_top() {
        match slot_at(geom, centroid[1].atan2(centroid[0])) {
            Some(slot) => RegionTag::Coil { slot },
            None => RegionTag::FerroStator,
        }
    } else {
        RegionTag::FerroStator
    }
}

/// Rotor mesh: design disk plus its share of the air gap, up to the
/// sliding circle. The interface edges are its outer boundary.
pub fn generate_rotor_mesh(geom: &MachineGeometry, params: &MeshParams) -> Result<Mesh> {
    params.validate(geom)?;
    let spacing = params.target_h * params.radial_scale;
    let n_phi = params.n_phi_rotor(geom);
    let mut b = RingBuilder::new(n_phi);
    b.push_center();
    for &r in subdivide(&[0.0, geom.rotor_outer, geom.mortar_radius], spacing)
        .iter()
        .skip(1)
    {
        b.push_ring(r);
    }
    let interface_edges = b.ring_edges(b.ring_starts.len() - 1);
    let tags = b
        .tris
        .iter()
        .map(|t| {
            let c = tri_centroid(&b.nodes, t);
            let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
            if r < geom.rotor_outer {
                RegionTag::RotorDesign
            } else {
                RegionTag::AirStator
            }
        })
        .collect();
    Ok(Mesh {
        nodes: b.nodes,
        tris: b.tris,
        tags,
        interface_edges,
        dirichlet_nodes: Vec::new(),
        design_elements: Vec::new(),
        areas: Vec::new(),
    }
    .finish())
}

/// Stator mesh from the sliding circle out to the stator boundary,
/// containing the torque ring, the bore air, the slots, and the core.
pub fn generate_stator_mesh(geom: &MachineGeometry, params: &MeshParams) -> Result<Mesh> {
    params.validate(geom)?;
    let spacing = params.target_h * params.radial_scale;
    let n_phi = params.n_phi_stator(geom);
    let control = [
        geom.mortar_radius,
        geom.arkkio_inner,
        geom.arkkio_outer,
        geom.stator_inner,
        geom.slot_top(),
        geom.stator_outer,
    ];
    let mut b = RingBuilder::new(n_phi);
    for &r in &subdivide(&control, spacing) {
        b.push_ring(r);
    }
    let interface_edges = b.ring_edges(0);
    let outer_start = *b.ring_starts.last().unwrap();
    let dirichlet_nodes = (outer_start..outer_start + n_phi).collect();
    let tags = b
        .tris
        .iter()
        .map(|t| stator_tag(geom, tri_centroid(&b.nodes, t)))
        .collect();
    Ok(Mesh {
        nodes: b.nodes,
        tris: b.tris,
        tags,
        interface_edges,
        dirichlet_nodes,
        design_elements: Vec::new(),
        areas: Vec::new(),
    }
    .finish())
}

/// Both halves of the sliding-interface pair.
pub fn generate_meshes(geom: &MachineGeometry, params: &MeshParams) -> Result<(Mesh, Mesh)> {
    Ok((
        generate_rotor_mesh(geom, params)?,
        generate_stator_mesh(geom, params)?,
    ))
}

/// One conforming mesh of the whole cross-section (no sliding circle).
/// Uses the stator angular grid everywhere; with matching `n_phi`
/// overrides, its rotor-disk elements coincide one-to-one (same order, same
/// coordinates) with those of [`generate_rotor_mesh`].
pub fn generate_conforming_mesh(geom: &MachineGeometry, params: &MeshParams) -> Result<Mesh> {
    params.validate(geom)?;
    let spacing = params.target_h * params.radial_scale;
    let n_phi = params.n_phi_stator(geom);
    let control = [
        0.0,
        geom.rotor_outer,
        geom.mortar_radius,
        geom.arkkio_inner,
        geom.arkkio_outer,
        geom.stator_inner,
        geom.slot_top(),
        geom.stator_outer,
    ];
    let mut b = RingBuilder::new(n_phi);
    b.push_center();
    for &r in subdivide(&control, spacing).iter().skip(1) {
        b.push_ring(r);
    }
    let outer_start = *b.ring_starts.last().unwrap();
    let dirichlet_nodes = (outer_start..outer_start + n_phi).collect();
    let tags = b
        .tris
        .iter()
        .map(|t| {
            let c = tri_centroid(&b.nodes, t);
            let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
            if r < geom.rotor_outer {
                RegionTag::RotorDesign
            } else if r < geom.mortar_radius {
                RegionTag::AirStator
            } else {
                stator_tag(geom, c)
            }
        })
        .collect();
    Ok(Mesh {
        nodes: b.nodes,
        tris: b.tris,
        tags,
        interface_edges: Vec::new(),
        dirichlet_nodes,
        design_elements: Vec::new(),
        areas: Vec::new(),
    }
    .finish())
}

fn tri_centroid(nodes: &[[f64; 2]], t: &[usize; 3]) -> [f64; 2] {
    let (pa, pb, pc) = (nodes[t[0]], nodes[t[1]], nodes[t[2]]);
    [
        (pa[0] + pb[0] + pc[0]) / 3.0,
        (pa[1] + pb[1] + pc[1]) / 3.0,
    ]
}

/// Simple disk mesh with Dirichlet boundary, for manufactured-solution
/// tests. All elements are tagged `RotorDesign`.
pub fn generate_disk_mesh(radius: f64, n_phi: usize, n_rings: usize) -> Mesh {
    let mut b = RingBuilder::new(n_phi);
    b.push_center();
    for k in 1..=n_rings {
        b.push_ring(radius * k as f64 / n_rings as f64);
    }
    let outer_start = *b.ring_starts.last().unwrap();
    let dirichlet_nodes = (outer_start..outer_start + n_phi).collect();
    let n_tris = b.tris.len();
    Mesh {
        nodes: b.nodes,
        tris: b.tris,
        tags: vec![RegionTag::RotorDesign; n_tris],
        interface_edges: Vec::new(),
        dirichlet_nodes,
        design_elements: Vec::new(),
        areas: Vec::new(),
    }
    .finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polygon_band_area(n: usize, r_in: f64, r_out: f64) -> f64 {
        // Exact area of the meshed band: inscribed n-gon annulus.
        let d = 2.0 * std::f64::consts::PI / n as f64;
        0.5 * n as f64 * d.sin() * (r_out * r_out - r_in * r_in)
    }

    fn standard() -> (MachineGeometry, MeshParams) {
        (MachineGeometry::standard(), MeshParams::default())
    }

    #[test]
    fn rotor_mesh_area_is_exactly_the_inscribed_polygon() {
        let (g, p) = standard();
        let m = generate_rotor_mesh(&g, &p).unwrap();
        let n = p.n_phi_rotor(&g);
        let total: f64 = (0..m.n_elements()).map(|e| m.area(e)).sum();
        let expect = polygon_band_area(n, 0.0, g.mortar_radius);
        assert!((total - expect).abs() < 1e-12 * expect.max(1e-6));
        let design = m.area_where(|t| t == RegionTag::RotorDesign);
        let expect = polygon_band_area(n, 0.0, g.rotor_outer);
        assert!((design - expect).abs() < 1e-12 * expect.max(1e-6));
    }

    #[test]
    fn stator_mesh_covers_its_annulus_with_positive_elements() {
        let (g, p) = standard();
        let m = generate_stator_mesh(&g, &p).unwrap();
        let n = p.n_phi_stator(&g);
        for e in 0..m.n_elements() {
            assert!(m.area(e) > 0.0, "element {e} not CCW");
        }
        let total: f64 = (0..m.n_elements()).map(|e| m.area(e)).sum();
        let expect = polygon_band_area(n, g.mortar_radius, g.stator_outer);
        assert!((total - expect).abs() < 1e-11 * expect);
    }

    #[test]
    fn torque_ring_sits_on_stator_mesh_only() {
        let (g, p) = standard();
        let (rot, stat) = generate_meshes(&g, &p).unwrap();
        assert_eq!(rot.area_where(|t| t == RegionTag::ArkkioAnnulus), 0.0);
        let ring = stat.area_where(|t| t == RegionTag::ArkkioAnnulus);
        let n = p.n_phi_stator(&g);
        let expect = polygon_band_area(n, g.arkkio_inner, g.arkkio_outer);
        assert!((ring - expect).abs() < 1e-11 * expect);
        for (e, &tag) in stat.tags.iter().enumerate() {
            if tag == RegionTag::ArkkioAnnulus {
                let c = stat.centroid(e);
                let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
                assert!(r > g.arkkio_inner && r < g.arkkio_outer);
            }
        }
    }

    #[test]
    fn every_slot_present_with_equal_area() {
        let (g, p) = standard();
        let m = generate_stator_mesh(&g, &p).unwrap();
        let mut areas = vec![0.0f64; g.slot_count];
        for (e, &tag) in m.tags.iter().enumerate() {
            if let RegionTag::Coil { slot } = tag {
                areas[slot as usize] += m.area(e);
            }
        }
        let a0 = areas[0];
        assert!(a0 > 0.0);
        for (s, a) in areas.iter().enumerate() {
            assert!((a - a0).abs() < 1e-10 * a0, "slot {s} area {a} vs {a0}");
        }
        // Roughly half of the slot band is copper.
        let band = polygon_band_area(p.n_phi_stator(&g), g.stator_inner, g.slot_top());
        let copper: f64 = areas.iter().sum();
        assert!((copper / band - g.slot_fill).abs() < 0.1);
    }

    #[test]
    fn interface_edges_form_a_closed_ccw_chain_on_the_circle() {
        let (g, p) = standard();
        let (rot, stat) = generate_meshes(&g, &p).unwrap();
        for (mesh, n) in [(&rot, p.n_phi_rotor(&g)), (&stat, p.n_phi_stator(&g))] {
            assert_eq!(mesh.interface_edges.len(), n);
            for w in mesh.interface_edges.windows(2) {
                assert_eq!(w[0][1], w[1][0], "edges not chained");
            }
            assert_eq!(
                mesh.interface_edges.last().unwrap()[1],
                mesh.interface_edges[0][0],
                "chain not closed"
            );
            for e in &mesh.interface_edges {
                for &v in e {
                    let [x, y] = mesh.nodes[v];
                    let r = (x * x + y * y).sqrt();
                    assert!((r - g.mortar_radius).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rotation_preserves_areas_tags_and_radii() {
        let (g, p) = standard();
        let m = generate_rotor_mesh(&g, &p).unwrap();
        let r = m.rotated(0.731);
        assert_eq!(m.tags, r.tags);
        assert_eq!(m.tris, r.tris);
        for e in 0..m.n_elements() {
            assert!((m.area(e) - r.area(e)).abs() < 1e-15 * m.area(e).abs().max(1e-12));
        }
        for (a, b) in m.nodes.iter().zip(&r.nodes) {
            let ra = (a[0] * a[0] + a[1] * a[1]).sqrt();
            let rb = (b[0] * b[0] + b[1] * b[1]).sqrt();
            assert!((ra - rb).abs() < 1e-14);
        }
    }

    #[test]
    fn dirichlet_nodes_lie_on_the_outer_boundary() {
        let (g, p) = standard();
        let m = generate_stator_mesh(&g, &p).unwrap();
        assert_eq!(m.dirichlet_nodes.len(), p.n_phi_stator(&g));
        for &v in &m.dirichlet_nodes {
            let [x, y] = m.nodes[v];
            assert!(((x * x + y * y).sqrt() - g.stator_outer).abs() < 1e-12);
        }
    }

    #[test]
    fn conforming_mesh_matches_pair_rotor_elements_when_grids_agree() {
        let (g, _) = standard();
        let p = MeshParams {
            target_h: 3e-3,
            n_phi_rotor: Some(48),
            n_phi_stator: Some(48),
            radial_scale: 1.0,
        };
        let rot = generate_rotor_mesh(&g, &p).unwrap();
        let conf = generate_conforming_mesh(&g, &p).unwrap();
        assert_eq!(rot.design_elements.len(), conf.design_elements.len());
        for (a, b) in rot.design_elements.iter().zip(&conf.design_elements) {
            let ca = rot.centroid(*a);
            let cb = conf.centroid(*b);
            assert!((ca[0] - cb[0]).abs() < 1e-14 && (ca[1] - cb[1]).abs() < 1e-14);
        }
        assert!(conf.interface_edges.is_empty());
    }

    #[test]
    fn coarse_mesh_fits_small_design_budget() {
        let (g, _) = standard();
        let p = MeshParams {
            target_h: 3.9e-3,
            n_phi_rotor: Some(32),
            n_phi_stator: Some(48),
            radial_scale: 1.6,
        };
        let rot = generate_rotor_mesh(&g, &p).unwrap();
        assert!(
            rot.design_elements.len() <= 300,
            "got {}",
            rot.design_elements.len()
        );
    }

    #[test]
    fn too_coarse_target_h_is_rejected() {
        let (g, _) = standard();
        let p = MeshParams::with_target_h(4.1e-3);
        assert!(generate_rotor_mesh(&g, &p).is_err());
    }

    #[test]
    fn point_location_finds_known_elements() {
        let (g, p) = standard();
        let m = generate_stator_mesh(&g, &p).unwrap();
        for e in [0, m.n_elements() / 2, m.n_elements() - 1] {
            let c = m.centroid(e);
            let (found, l) = m.locate(c).unwrap();
            assert_eq!(found, e);
            assert!((l[0] + l[1] + l[2] - 1.0).abs() < 1e-12);
        }
        assert!(m.locate([0.0, 0.0]).is_none()); // hole inside stator mesh
    }

    #[test]
    fn nodal_field_evaluation_is_linear_exact() {
        let m = generate_disk_mesh(1.0, 16, 4);
        let u: Vec<f64> = m.nodes.iter().map(|p| 2.0 * p[0] - 0.5 * p[1] + 1.0).collect();
        for p in [[0.3, 0.2], [-0.5, 0.1], [0.0, 0.0], [0.2, -0.6]] {
            let v = m.eval_nodal(&u, p).unwrap();
            assert!((v - (2.0 * p[0] - 0.5 * p[1] + 1.0)).abs() < 1e-12);
        }
    }
}
