//! Torque evaluation over the air-gap annulus.
//!
//! The torque is a volume integral over a ring of air elements between the
//! sliding circle and the stator bore, quadratic in the potential gradient:
//! T = c * integral of (grad u)^T Q(x) (grad u), with c = L_z nu0 / (r_o -
//! r_i). The position-dependent matrix Q is symmetric and traceless with
//! eigenvalues +-r/2, so the integrand picks out exactly the shear part of
//! the magnetic stress.

use crate::error::Result;
use crate::fem::{Machine, PhysicalDesign, StateSolution};
use crate::geometry::RegionTag;
use crate::materials::NU0;
use std::f64::consts::PI;

/// Rotor positions of the averaging rule. A quarter of the slot-harmonic
/// period apart, so the 6th, 12th and 18th electrical harmonics of the
/// single-position torque cancel in the mean.
pub const FOUR_POINT_ANGLES: [f64; 4] = [0.0, PI / 12.0, PI / 6.0, PI / 4.0];

/// Pointwise weight matrix of the torque integrand.
pub fn q_matrix(p: [f64; 2]) -> [[f64; 2]; 2] {
    let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
    if r == 0.0 {
        return [[0.0; 2]; 2];
    }
    let diag = p[0] * p[1] / r;
    let off = (p[1] * p[1] - p[0] * p[0]) / (2.0 * r);
    [[diag, off], [off, -diag]]
}

struct AnnulusElem {
    nodes: [usize; 3],
    grads: [[f64; 2]; 3],
    /// Integral of Q over the element (edge-midpoint rule).
    qbar: [[f64; 2]; 2],
}

/// Precomputed torque integrator for one machine; the annulus lives on the
/// stator mesh, so it is valid at every rotor angle.
pub struct ArkkioEvaluator {
    elems: Vec<AnnulusElem>,
    coef: f64,
}

impl ArkkioEvaluator {
    pub fn new(machine: &Machine) -> Self {
        let mesh = machine.stator_mesh();
        let mut elems = Vec::new();
        for e in 0..mesh.n_elements() {
            if mesh.tags[e] != RegionTag::ArkkioAnnulus {
                continue;
            }
            let tri = mesh.tris[e];
            let area = mesh.area(e);
            let pts = [mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]];
            let mut qbar = [[0.0; 2]; 2];
            for k in 0..3 {
                let a = pts[k];
                let b = pts[(k + 1) % 3];
                let q = q_matrix([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                for i in 0..2 {
                    for j in 0..2 {
                        qbar[i][j] += area / 3.0 * q[i][j];
                    }
                }
            }
            elems.push(AnnulusElem {
                nodes: tri,
                grads: mesh.basis_gradients(e),
                qbar,
            });
        }
        let g = &machine.geom;
        ArkkioEvaluator {
            elems,
            coef: g.stack_length * NU0 / (g.arkkio_outer - g.arkkio_inner),
        }
    }

    /// Torque in N*m from the stator-mesh nodal potential.
    pub fn torque(&self, u_stator: &[f64]) -> f64 {
        let mut t = 0.0;
        for el in &self.elems {
            let gu = grad(el, u_stator);
            let w = [
                el.qbar[0][0] * gu[0] + el.qbar[0][1] * gu[1],
                el.qbar[1][0] * gu[0] + el.qbar[1][1] * gu[1],
            ];
            t += gu[0] * w[0] + gu[1] * w[1];
        }
        self.coef * t
    }

    /// Convenience: torque of a solved state.
    pub fn torque_of(&self, machine: &Machine, sol: &StateSolution) -> f64 {
        self.torque(machine.u_stator(sol))
    }

    /// Adds the derivative of the torque with respect to the stator nodal
    /// values into `out` (same indexing as `u_stator`). The integrand is
    /// quadratic, so dT/du (v) = 2c * integral of Q grad u . grad v.
    pub fn accumulate_dtorque_du(&self, u_stator: &[f64], scale: f64, out: &mut [f64]) {
        for el in &self.elems {
            let gu = grad(el, u_stator);
            let w = [
                el.qbar[0][0] * gu[0] + el.qbar[0][1] * gu[1],
                el.qbar[1][0] * gu[0] + el.qbar[1][1] * gu[1],
            ];
            for a in 0..3 {
                out[el.nodes[a]] +=
                    scale * 2.0 * self.coef * (w[0] * el.grads[a][0] + w[1] * el.grads[a][1]);
            }
        }
    }

    pub fn n_annulus_elements(&self) -> usize {
        self.elems.len()
    }

    #[cfg(test)]
    fn qbar_sum(&self) -> [[f64; 2]; 2] {
        let mut s = [[0.0; 2]; 2];
        for el in &self.elems {
            for i in 0..2 {
                for j in 0..2 {
                    s[i][j] += el.qbar[i][j];
                }
            }
        }
        s
    }
}

fn grad(el: &AnnulusElem, u: &[f64]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for a in 0..3 {
        g[0] += el.grads[a][0] * u[el.nodes[a]];
        g[1] += el.grads[a][1] * u[el.nodes[a]];
    }
    g
}

/// Result of the four-position torque average.
#[derive(Debug, Clone)]
pub struct FourPointTorque {
    pub average: f64,
    pub per_angle: [f64; 4],
    pub states: Vec<StateSolution>,
}

/// Solve at the four averaging angles and average the torque.
pub fn four_point_torque(
    machine: &Machine,
    arkkio: &ArkkioEvaluator,
    design: &PhysicalDesign,
    warm: Option<&[StateSolution]>,
) -> Result<FourPointTorque> {
    let states = machine.solve_four_positions(design, warm)?;
    let mut per_angle = [0.0; 4];
    for (k, sol) in states.iter().enumerate() {
        per_angle[k] = arkkio.torque_of(machine, sol);
    }
    Ok(FourPointTorque {
        average: per_angle.iter().sum::<f64>() / 4.0,
        per_angle,
        states,
    })
}

/// One point of a rotor-angle sweep.
#[derive(Debug, Clone, Copy)]
pub struct TorqueSample {
    pub theta: f64,
    pub torque: f64,
    pub newton_iters: usize,
}

/// Torque at each given rotor angle; the solves run in parallel.
pub fn torque_sweep(
    machine: &Machine,
    arkkio: &ArkkioEvaluator,
    design: &PhysicalDesign,
    thetas: &[f64],
) -> Result<Vec<TorqueSample>> {
    use rayon::prelude::*;
    thetas
        .par_iter()
        .map(|&theta| {
            let sol = machine.solve_state(design, theta, None)?;
            Ok(TorqueSample {
                theta,
                torque: arkkio.torque_of(machine, &sol),
                newton_iters: sol.newton_iters,
            })
        })
        .collect()
}
