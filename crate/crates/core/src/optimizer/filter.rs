//! Regularization of element densities: Helmholtz smoothing, threshold
//! projection, and the intermediate-material penalty.
//!
//! The filter solves -r^2 lap(rho_f) + rho_f = rho on the design patch with
//! natural boundary conditions. Element densities enter as a piecewise
//! constant load, the PDE is solved on P1 nodes, and the nodal solution is
//! averaged back per element. A lumped mass matrix keeps the operator an
//! M-matrix on well-shaped triangles, so filtered densities stay inside
//! [0,1] instead of overshooting near jumps the way the consistent-mass
//! variant does.

use crate::error::Result;
use crate::geometry::Mesh;
use crate::linalg::{Factorized, TripletSystem};

struct FilterElem {
    nodes: [usize; 3],
    area: f64,
}

/// Helmholtz filter over the design elements of a mesh, with the system
/// matrix factorized once per radius.
pub struct HelmholtzFilter {
    radius: f64,
    elems: Vec<FilterElem>,
    n_nodes: usize,
    /// None when the radius is zero and the filter is the identity.
    fact: Option<Factorized>,
}

impl HelmholtzFilter {
    pub fn new(mesh: &Mesh, radius: f64) -> Result<Self> {
        let mut compact = vec![usize::MAX; mesh.n_nodes()];
        let mut n_nodes = 0usize;
        let mut elems = Vec::with_capacity(mesh.design_elements.len());
        for &e in &mesh.design_elements {
            let mut nodes = [0usize; 3];
            for (k, &v) in mesh.tris[e].iter().enumerate() {
                if compact[v] == usize::MAX {
                    compact[v] = n_nodes;
                    n_nodes += 1;
                }
                nodes[k] = compact[v];
            }
            elems.push(FilterElem {
                nodes,
                area: mesh.area(e),
            });
        }
        let fact = if radius == 0.0 {
            None
        } else {
            let mut sys = TripletSystem::with_capacity(n_nodes, 12 * elems.len());
            let r2 = radius * radius;
            for (fe, &e) in elems.iter().zip(&mesh.design_elements) {
                let g = mesh.basis_gradients(e);
                for a in 0..3 {
                    // lumped mass: a third of the element area per corner
                    sys.push(fe.nodes[a], fe.nodes[a], fe.area / 3.0);
                    for b in 0..3 {
                        let k = fe.area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                        sys.push(fe.nodes[a], fe.nodes[b], r2 * k);
                    }
                }
            }
            Some(sys.factorize()?)
        };
        Ok(HelmholtzFilter {
            radius,
            elems,
            n_nodes,
            fact,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn n_elements(&self) -> usize {
        self.elems.len()
    }

    /// Smooth an element-constant density field.
    pub fn apply(&self, rho: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(rho.len(), self.elems.len());
        let Some(fact) = &self.fact else {
            return Ok(rho.to_vec());
        };
        let mut rhs = vec![0.0; self.n_nodes];
        for (fe, &v) in self.elems.iter().zip(rho) {
            for &a in &fe.nodes {
                rhs[a] += v * fe.area / 3.0;
            }
        }
        let w = fact.solve(&rhs)?;
        Ok(self
            .elems
            .iter()
            .map(|fe| (w[fe.nodes[0]] + w[fe.nodes[1]] + w[fe.nodes[2]]) / 3.0)
            .collect())
    }

    /// Transpose of [`apply`](Self::apply), used to pull element gradients
    /// back through the filter. With F = E S^-1 P (load, solve, re-average)
    /// and S symmetric, F^T = P^T S^-1 E^T.
    pub fn apply_transpose(&self, g: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(g.len(), self.elems.len());
        let Some(fact) = &self.fact else {
            return Ok(g.to_vec());
        };
        let mut rhs = vec![0.0; self.n_nodes];
        for (fe, &v) in self.elems.iter().zip(g) {
            for &a in &fe.nodes {
                rhs[a] += v / 3.0;
            }
        }
        let w = fact.solve(&rhs)?;
        Ok(self
            .elems
            .iter()
            .map(|fe| {
                (w[fe.nodes[0]] + w[fe.nodes[1]] + w[fe.nodes[2]]) * fe.area / 3.0
            })
            .collect())
    }
}

/// Smoothed threshold towards 0/1 around `rho_cut`, exact at both
/// endpoints for every sharpness `beta`.
pub fn tanh_projection(rho: f64, beta: f64, rho_cut: f64) -> f64 {
    let shift = (beta * rho_cut).tanh();
    ((beta * (rho - rho_cut)).tanh() + shift) / ((beta * (1.0 - rho_cut)).tanh() + shift)
}

pub fn tanh_projection_derivative(rho: f64, beta: f64, rho_cut: f64) -> f64 {
    let shift = (beta * rho_cut).tanh();
    let t = (beta * (rho - rho_cut)).tanh();
    beta * (1.0 - t * t) / ((beta * (1.0 - rho_cut)).tanh() + shift)
}

/// Area-weighted mean of an element field, i.e. the volume fraction it
/// occupies when the field is a density.
pub fn volume_fraction(rho: &[f64], areas: &[f64]) -> f64 {
    let total: f64 = areas.iter().sum();
    let weighted: f64 = rho.iter().zip(areas).map(|(r, a)| r * a).sum();
    weighted / total
}

/// Gray-material penalty (4 gamma / V) sum A_i rho_i (1 - rho_i): zero on
/// binary fields, exactly `gamma_pen` on a uniform 0.5 field.
pub fn intermediate_penalty(rho: &[f64], areas: &[f64], v_rot: f64, gamma_pen: f64) -> f64 {
    let c = 4.0 * gamma_pen / v_rot;
    rho.iter()
        .zip(areas)
        .map(|(r, a)| c * a * r * (1.0 - r))
        .sum()
}

/// Per-element derivative of [`intermediate_penalty`].
pub fn intermediate_penalty_gradient(rho: f64, area: f64, v_rot: f64, gamma_pen: f64) -> f64 {
    4.0 * gamma_pen / v_rot * area * (1.0 - 2.0 * rho)
}
