//! Machine cross-section parameters and their validation.

use crate::error::{Error, Result};

/// Raw geometry inputs. Radii in meters. The torque-ring and sliding-circle
/// radii are optional; [`build_machine`] fills in the defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryParams {
    pub pole_pairs: u32,
    pub slot_count: usize,
    /// Active axial length of the stack.
    pub stack_length: f64,
    pub rotor_outer: f64,
    pub stator_inner: f64,
    pub stator_outer: f64,
    /// Radial depth of the coil slots, measured from the stator bore.
    pub slot_depth: f64,
    /// Fraction of the slot pitch occupied by copper (rest is tooth).
    pub slot_fill: f64,
    /// Radius of the sliding circle where the rotor and stator meshes meet.
    pub mortar_radius: Option<f64>,
    /// Inner/outer radius of the torque integration ring.
    pub arkkio_inner: Option<f64>,
    pub arkkio_outer: Option<f64>,
}

impl Default for GeometryParams {
    /// The benchmark machine: 24 slots, one pole pair, 50 mm stack,
    /// 18.5 mm rotor, 26.5/47.5 mm stator bore/outer, 8 mm air gap.
    fn default() -> Self {
        GeometryParams {
            pole_pairs: 1,
            slot_count: 24,
            stack_length: 50e-3,
            rotor_outer: 18.5e-3,
            stator_inner: 26.5e-3,
            stator_outer: 47.5e-3,
            slot_depth: 10e-3,
            slot_fill: 0.5,
            mortar_radius: None,
            arkkio_inner: None,
            arkkio_outer: None,
        }
    }
}

/// Validated machine geometry with all derived radii resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineGeometry {
    pub pole_pairs: u32,
    pub slot_count: usize,
    pub stack_length: f64,
    pub rotor_outer: f64,
    pub stator_inner: f64,
    pub stator_outer: f64,
    pub slot_depth: f64,
    pub slot_fill: f64,
    pub mortar_radius: f64,
    pub arkkio_inner: f64,
    pub arkkio_outer: f64,
}

impl MachineGeometry {
    /// Radial width of the air gap.
    pub fn gap(&self) -> f64 {
        self.stator_inner - self.rotor_outer
    }

    /// Outer radius of the slot band.
    pub fn slot_top(&self) -> f64 {
        self.stator_inner + self.slot_depth
    }

    /// The benchmark machine with default ring placement.
    pub fn standard() -> Self {
        build_machine(&GeometryParams::default()).expect("default geometry is valid")
    }
}

/// Validate raw parameters and fill in derived radii.
///
/// The torque ring defaults to the middle third of the air gap. The sliding
/// circle defaults to the midpoint between the rotor surface and the ring's
/// inner radius so that the whole ring lives on the stator mesh, which is
/// where the torque integral is evaluated.
pub fn build_machine(p: &GeometryParams) -> Result<MachineGeometry> {
    let fail = |msg: String| Err(Error::Geometry(msg));
    if !(p.rotor_outer > 0.0) {
        return fail(format!("rotor_outer must be positive, got {}", p.rotor_outer));
    }
    if !(p.rotor_outer < p.stator_inner && p.stator_inner < p.stator_outer) {
        return fail(format!(
            "radii must satisfy rotor_outer < stator_inner < stator_outer, got {} / {} / {}",
            p.rotor_outer, p.stator_inner, p.stator_outer
        ));
    }
    let gap = p.stator_inner - p.rotor_outer;
    let arkkio_inner = p.arkkio_inner.unwrap_or(p.rotor_outer + gap / 3.0);
    let arkkio_outer = p.arkkio_outer.unwrap_or(p.rotor_outer + 2.0 * gap / 3.0);
    let mortar_radius = p
        .mortar_radius
        .unwrap_or(0.5 * (p.rotor_outer + arkkio_inner));
    if !(p.rotor_outer < arkkio_inner && arkkio_inner < arkkio_outer && arkkio_outer < p.stator_inner)
    {
        return fail(format!(
            "torque ring [{arkkio_inner}, {arkkio_outer}] must lie strictly inside the air gap"
        ));
    }
    if !(p.rotor_outer < mortar_radius && mortar_radius <= arkkio_inner) {
        return fail(format!(
            "sliding circle at {mortar_radius} must lie between the rotor surface and the torque ring"
        ));
    }
    if !(p.stack_length > 0.0) {
        return fail(format!("stack_length must be positive, got {}", p.stack_length));
    }
    if p.slot_count == 0 || p.slot_count % 6 != 0 {
        return fail(format!(
            "slot_count must be a positive multiple of 6 for a three-phase winding, got {}",
            p.slot_count
        ));
    }
    if !(p.slot_depth > 0.0 && p.stator_inner + p.slot_depth < p.stator_outer) {
        return fail(format!(
            "slot band [{}, {}] must fit inside the stator",
            p.stator_inner,
            p.stator_inner + p.slot_depth
        ));
    }
    if !(p.slot_fill > 0.0 && p.slot_fill < 1.0) {
        return fail(format!("slot_fill must be in (0,1), got {}", p.slot_fill));
    }
    if p.pole_pairs == 0 {
        return fail("pole_pairs must be at least 1".into());
    }
    Ok(MachineGeometry {
        pole_pairs: p.pole_pairs,
        slot_count: p.slot_count,
        stack_length: p.stack_length,
        rotor_outer: p.rotor_outer,
        stator_inner: p.stator_inner,
        stator_outer: p.stator_outer,
        slot_depth: p.slot_depth,
        slot_fill: p.slot_fill,
        mortar_radius,
        arkkio_inner,
        arkkio_outer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_machine_has_8mm_gap_and_third_ring() {
        let g = MachineGeometry::standard();
        assert!((g.gap() - 8e-3).abs() < 1e-15);
        assert!((g.arkkio_inner - (18.5e-3 + 8e-3 / 3.0)).abs() < 1e-15);
        assert!((g.arkkio_outer - (18.5e-3 + 16e-3 / 3.0)).abs() < 1e-15);
        assert!(g.rotor_outer < g.mortar_radius && g.mortar_radius <= g.arkkio_inner);
    }

    #[test]
    fn rejects_inverted_radii() {
        let p = GeometryParams {
            stator_inner: 10e-3,
            ..GeometryParams::default()
        };
        assert!(build_machine(&p).is_err());
    }

    #[test]
    fn rejects_mortar_inside_torque_ring() {
        let p = GeometryParams {
            mortar_radius: Some(22.5e-3),
            ..GeometryParams::default()
        };
        assert!(build_machine(&p).is_err());
    }

    #[test]
    fn rejects_slot_band_reaching_outer_boundary() {
        let p = GeometryParams {
            slot_depth: 25e-3,
            ..GeometryParams::default()
        };
        assert!(build_machine(&p).is_err());
    }

    #[test]
    fn rejects_odd_slot_counts() {
        let p = GeometryParams {
            slot_count: 20,
            ..GeometryParams::default()
        };
        assert!(build_machine(&p).is_err());
    }

    #[test]
    fn explicit_ring_radii_are_kept() {
        let p = GeometryParams {
            arkkio_inner: Some(22.0e-3),
            arkkio_outer: Some(24.0e-3),
            mortar_radius: Some(20.0e-3),
            ..GeometryParams::default()
        };
        let g = build_machine(&p).unwrap();
        assert_eq!(g.arkkio_inner, 22.0e-3);
        assert_eq!(g.mortar_radius, 20.0e-3);
    }
}
