//! Residual and Jacobian assembly for one rotor position.
//!
//! All geometric and material data that does not depend on the potential is
//! prepared once per (angle, design) pair; Newton then re-evaluates only the
//! field-dependent reluctivities. The coupling terms on the sliding circle
//! are linear in the unknowns, so their Jacobian entries double as residual
//! accumulators.

use super::interface::{build_interface, GAUSS3};
use super::{Machine, PhysicalDesign};
use crate::error::Result;
use crate::geometry::{Mesh, RegionTag};
use crate::linalg::{norm2, TripletSystem};
use crate::materials::{MAG_EPS, NU0};

/// Constitutive behavior of one prepared element.
enum ElemMat {
    /// Fixed reluctivity: air, slots, the torque annulus.
    Const(f64),
    /// Stator core iron.
    Iron,
    /// Design material, reluctivity nu0 + f * (nu_iron(B) - nu0).
    Blend { f: f64 },
}

struct PrepElem {
    dofs: [usize; 3],
    grads: [[f64; 2]; 3],
    area: f64,
    mat: ElemMat,
}

/// One interface subsegment with moments integrated and dofs resolved.
/// `flux[c]` is nu0 * (n . grad phi_c) for the element's three basis
/// functions, n the outward normal of the segment's own subdomain. The
/// trace field is continuous piecewise linear in the interface angle on
/// the stator-side grid; `trace_dofs` are the two hat functions covering
/// this subsegment.
struct PrepSeg {
    elem_dofs: [usize; 3],
    edge_dofs: [usize; 2],
    trace_dofs: [usize; 2],
    flux: [f64; 3],
    /// Edge basis first moments: integral of phi_a ds.
    wa: [f64; 2],
    /// Edge basis second moments: integral of phi_a phi_b ds.
    wab: [[f64; 2]; 2],
    /// Trace hat first moments: integral of hat_m ds.
    wh: [f64; 2],
    /// Trace hat second moments: integral of hat_m hat_n ds.
    whh: [[f64; 2]; 2],
    /// Mixed moments: integral of phi_a hat_m ds.
    wph: [[f64; 2]; 2],
}

pub(crate) struct Assembly<'m> {
    machine: &'m Machine,
    pub theta: f64,
    /// Rotor mesh rotated to `theta`; None in conforming mode.
    rotor_rot: Option<Mesh>,
    elems: Vec<PrepElem>,
    segs: Vec<PrepSeg>,
    penalty: f64,
    /// Fixed sources (currents, magnets), reduced indexing.
    rhs: Vec<f64>,
    rhs_norm: f64,
    /// design index -> slot in `elems`.
    design_slots: Vec<usize>,
}

impl<'m> Assembly<'m> {
    pub fn new(machine: &'m Machine, theta: f64, design: &PhysicalDesign) -> Result<Self> {
        let dofs = machine.dof_map();
        let mut rhs = vec![0.0; dofs.n_eq()];
        let mut elems = Vec::new();
        let mut design_slots = vec![usize::MAX; design.len()];

        let rotor_rot = machine.rotor_at(theta);
        let n_rotor = rotor_rot.as_ref().map(|r| r.n_nodes()).unwrap_or(0);
        let (sin_t, cos_t) = theta.sin_cos();

        let mut prep = |mesh: &Mesh, offset: usize| {
            for e in 0..mesh.n_elements() {
                let tri = mesh.tris[e];
                let dofs3 = [tri[0] + offset, tri[1] + offset, tri[2] + offset];
                let grads = mesh.basis_gradients(e);
                let area = mesh.area(e);
                let mat = match mesh.tags[e] {
                    RegionTag::FerroStator => ElemMat::Iron,
                    RegionTag::AirStator | RegionTag::ArkkioAnnulus => ElemMat::Const(NU0),
                    RegionTag::Coil { slot } => {
                        let j = machine.slot_current_density(slot as usize, theta);
                        for &d in dofs3.iter() {
                            if let Some(eq) = dofs.eq[d] {
                                rhs[eq] += j * area / 3.0;
                            }
                        }
                        ElemMat::Const(NU0)
                    }
                    RegionTag::RotorDesign => {
                        let di = machine.design_index()[e]
                            .expect("design element missing from index");
                        design_slots[di] = elems.len();
                        let m = design.mag[di];
                        let r = (m[0] * m[0] + m[1] * m[1]).sqrt();
                        if r >= MAG_EPS {
                            let coef = machine.f_nu.value(1.0 - design.rho_nu[di])
                                * machine.magnet.m_max
                                * machine.f_mag.value(r)
                                / r;
                            // perp(m) rotated into the stator frame.
                            let px = -m[1];
                            let py = m[0];
                            let s = [
                                coef * (cos_t * px - sin_t * py),
                                coef * (sin_t * px + cos_t * py),
                            ];
                            for (a, &d) in dofs3.iter().enumerate() {
                                if let Some(eq) = dofs.eq[d] {
                                    rhs[eq] += area * (s[0] * grads[a][0] + s[1] * grads[a][1]);
                                }
                            }
                        }
                        ElemMat::Blend {
                            f: machine.f_nu.value(design.rho_nu[di]),
                        }
                    }
                };
                elems.push(PrepElem {
                    dofs: dofs3,
                    grads,
                    area,
                    mat,
                });
            }
        };

        if let Some(rot) = rotor_rot.as_ref() {
            prep(rot, 0);
        }
        prep(&machine.stator, n_rotor);

        let mut segs = Vec::new();
        if let Some(rot) = rotor_rot.as_ref() {
            let iq = build_interface(rot, &machine.stator)?;
            let n_stator = machine.stator.n_nodes();
            let step = 2.0 * std::f64::consts::PI / iq.n_trace as f64;
            segs.reserve(iq.segs.len());
            for s in &iq.segs {
                let (mesh, offset) = if s.on_rotor {
                    (rot, 0)
                } else {
                    (&machine.stator, n_rotor)
                };
                let tri = mesh.tris[s.tri];
                let grads = mesh.basis_gradients(s.tri);
                let mut flux = [0.0; 3];
                for c in 0..3 {
                    flux[c] = NU0 * (s.normal[0] * grads[c][0] + s.normal[1] * grads[c][1]);
                }
                let len = s.len();
                let mut wa = [0.0; 2];
                let mut wab = [[0.0; 2]; 2];
                let mut wh = [0.0; 2];
                let mut whh = [[0.0; 2]; 2];
                let mut wph = [[0.0; 2]; 2];
                for &(xi, w) in GAUSS3.iter() {
                    let t = s.t0 + (s.t1 - s.t0) * xi;
                    let ds = w * len;
                    let phi = [1.0 - t, t];
                    // Trace hats, parameterized by angle on the stator grid.
                    let x = [
                        s.p0[0] + t * (s.p1[0] - s.p0[0]),
                        s.p0[1] + t * (s.p1[1] - s.p0[1]),
                    ];
                    let ang = x[1].atan2(x[0]);
                    let pi = std::f64::consts::PI;
                    // Centered wrap so roundoff at either cut clamps cleanly.
                    let local = (((ang - s.trace as f64 * step + pi).rem_euclid(2.0 * pi) - pi)
                        / step)
                        .clamp(0.0, 1.0);
                    let hat = [1.0 - local, local];
                    for a in 0..2 {
                        wa[a] += phi[a] * ds;
                        wh[a] += hat[a] * ds;
                        for b in 0..2 {
                            wab[a][b] += phi[a] * phi[b] * ds;
                            whh[a][b] += hat[a] * hat[b] * ds;
                            wph[a][b] += phi[a] * hat[b] * ds;
                        }
                    }
                }
                let base = n_rotor + n_stator;
                segs.push(PrepSeg {
                    elem_dofs: [tri[0] + offset, tri[1] + offset, tri[2] + offset],
                    edge_dofs: [
                        tri[s.edge_local[0]] + offset,
                        tri[s.edge_local[1]] + offset,
                    ],
                    trace_dofs: [base + s.trace, base + (s.trace + 1) % iq.n_trace],
                    flux,
                    wa,
                    wab,
                    wh,
                    whh,
                    wph,
                });
            }
        }

        let rhs_norm = norm2(&rhs);
        Ok(Assembly {
            machine,
            theta,
            rotor_rot,
            elems,
            segs,
            penalty: machine.nitsche.penalty(machine.h_max()),
            rhs,
            rhs_norm,
            design_slots,
        })
    }

    /// Norm of the fixed source vector; Newton's relative tolerance is
    /// measured against it.
    pub fn source_norm(&self) -> f64 {
        self.rhs_norm
    }

    pub fn rotor_mesh_at_theta(&self) -> Option<&Mesh> {
        self.rotor_rot.as_ref()
    }

    /// Residual K(u) - b in reduced indexing, `u` over all dofs.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        self.accumulate(u, None)
    }

    /// Residual together with the Newton Jacobian.
    pub fn residual_and_jacobian(&self, u: &[f64]) -> (Vec<f64>, TripletSystem) {
        let mut jac = TripletSystem::with_capacity(
            self.machine.dof_map().n_eq(),
            9 * self.elems.len() + 40 * self.segs.len(),
        );
        let r = self.accumulate(u, Some(&mut jac));
        (r, jac)
    }

    fn accumulate(&self, u: &[f64], mut jac: Option<&mut TripletSystem>) -> Vec<f64> {
        let dofs = self.machine.dof_map();
        let mut r = vec![0.0; dofs.n_eq()];

        for el in &self.elems {
            let gu = [
                el.grads[0][0] * u[el.dofs[0]]
                    + el.grads[1][0] * u[el.dofs[1]]
                    + el.grads[2][0] * u[el.dofs[2]],
                el.grads[0][1] * u[el.dofs[0]]
                    + el.grads[1][1] * u[el.dofs[1]]
                    + el.grads[2][1] * u[el.dofs[2]],
            ];
            let b = (gu[0] * gu[0] + gu[1] * gu[1]).sqrt();
            let (nu, dnu) = match el.mat {
                ElemMat::Const(nu) => (nu, 0.0),
                ElemMat::Iron => (
                    self.machine.iron.reluctivity(b),
                    self.machine.iron.derivative(b),
                ),
                ElemMat::Blend { f } => (
                    NU0 + f * (self.machine.iron.reluctivity(b) - NU0),
                    f * self.machine.iron.derivative(b),
                ),
            };
            let mut dot = [0.0; 3];
            for a in 0..3 {
                dot[a] = gu[0] * el.grads[a][0] + gu[1] * el.grads[a][1];
                if let Some(eq) = dofs.eq[el.dofs[a]] {
                    r[eq] += el.area * nu * dot[a];
                }
            }
            if let Some(jac) = jac.as_deref_mut() {
                // Rank-one correction from the field dependence of nu;
                // vanishes where the field does.
                let rank = if b > 1e-12 { dnu / b } else { 0.0 };
                for a in 0..3 {
                    let Some(ra) = dofs.eq[el.dofs[a]] else {
                        continue;
                    };
                    for c in 0..3 {
                        let Some(cc) = dofs.eq[el.dofs[c]] else {
                            continue;
                        };
                        let gg = el.grads[a][0] * el.grads[c][0]
                            + el.grads[a][1] * el.grads[c][1];
                        jac.push(ra, cc, el.area * (nu * gg + rank * dot[a] * dot[c]));
                    }
                }
            }
        }

        // Coupling terms are linear: each matrix entry v at (row, col) adds
        // v * u[col] to the residual and v itself to the Jacobian.
        let mut add = |row: usize, col: usize, v: f64, r: &mut [f64]| {
            if let Some(ri) = dofs.eq[row] {
                r[ri] += v * u[col];
                if let Some(jac) = jac.as_deref_mut() {
                    if let Some(ci) = dofs.eq[col] {
                        jac.push(ri, ci, v);
                    }
                }
            }
        };
        for s in &self.segs {
            for a in 0..2 {
                let ea = s.edge_dofs[a];
                for (c, &dc) in s.elem_dofs.iter().enumerate() {
                    // Consistency term and its transpose.
                    add(ea, dc, -s.flux[c] * s.wa[a], &mut r);
                    add(dc, ea, -s.flux[c] * s.wa[a], &mut r);
                }
                for b in 0..2 {
                    add(ea, s.edge_dofs[b], self.penalty * s.wab[a][b], &mut r);
                }
            }
            for m in 0..2 {
                let tm = s.trace_dofs[m];
                for (c, &dc) in s.elem_dofs.iter().enumerate() {
                    add(tm, dc, s.flux[c] * s.wh[m], &mut r);
                    add(dc, tm, s.flux[c] * s.wh[m], &mut r);
                }
                for a in 0..2 {
                    let ea = s.edge_dofs[a];
                    add(ea, tm, -self.penalty * s.wph[a][m], &mut r);
                    add(tm, ea, -self.penalty * s.wph[a][m], &mut r);
                }
                for n in 0..2 {
                    add(tm, s.trace_dofs[n], self.penalty * s.whh[m][n], &mut r);
                }
            }
        }

        for (ri, v) in r.iter_mut().enumerate() {
            *v -= self.rhs[ri];
        }
        r
    }

    /// For each design element: its dof triple, basis gradients and area.
    /// Indexed by design element, for sensitivity accumulation.
    pub fn design_element(&self, di: usize) -> (&[usize; 3], &[[f64; 2]; 3], f64) {
        let el = &self.elems[self.design_slots[di]];
        (&el.dofs, &el.grads, el.area)
    }

    /// L2 norms over both sides of the sliding circle of (a) the mismatch
    /// u - eta the penalty controls and (b) the potential itself, as a
    /// scale. Diagnostic for coupling quality.
    pub fn interface_jump(&self, u: &[f64]) -> (f64, f64) {
        let mut jump2 = 0.0;
        let mut scale2 = 0.0;
        for s in &self.segs {
            let ue = [u[s.edge_dofs[0]], u[s.edge_dofs[1]]];
            let et = [u[s.trace_dofs[0]], u[s.trace_dofs[1]]];
            let mut quad = 0.0;
            let mut cross = 0.0;
            let mut tq = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    quad += s.wab[a][b] * ue[a] * ue[b];
                    cross += s.wph[a][b] * ue[a] * et[b];
                    tq += s.whh[a][b] * et[a] * et[b];
                }
            }
            jump2 += quad - 2.0 * cross + tq;
            scale2 += quad;
        }
        (jump2.max(0.0).sqrt(), scale2.sqrt())
    }
}
