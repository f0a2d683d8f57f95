//! Nonlinear magnetostatic state problem on the two-mesh machine model.
//!
//! The scalar potential u lives on the rotor and stator meshes; a continuous
//! piecewise linear trace field on the stator side of the sliding circle
//! glues them together through a symmetric Nitsche coupling. The outer stator boundary
//! carries u = 0 by degree-of-freedom elimination. Newton's method with
//! residual backtracking handles the saturation nonlinearity.

mod assembly;
mod interface;

pub(crate) use assembly::Assembly;
pub use interface::{build_interface, IfaceSeg, InterfaceQuad, GAUSS3};

use crate::error::{Error, Result};
use crate::geometry::{
    build_machine, generate_conforming_mesh, generate_meshes, GeometryParams, MachineGeometry,
    Mesh, MeshParams, RegionTag, WindingLayout,
};
use crate::linalg::norm2;
use crate::materials::{
    densities_to_magnetization, InterpScheme, IronModel, MagnetSpec, MAG_EPS,
};

/// Penalty parameters of the sliding-circle coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NitscheParams {
    /// Dimensionless stabilization factor.
    pub alpha: f64,
    /// Polynomial degree of the volume space (P1 here).
    pub degree: u32,
}

impl Default for NitscheParams {
    fn default() -> Self {
        NitscheParams {
            alpha: 160.0,
            degree: 1,
        }
    }
}

impl NitscheParams {
    /// Penalty coefficient alpha * nu0 * p^2 / h for a given mesh size.
    /// The air reluctivity factor puts the stabilization on the same scale
    /// as the nu0 * du/dn consistency terms; without it a dimensionless
    /// alpha of 160 could not control fluxes of magnitude ~1e6.
    pub fn penalty(&self, h: f64) -> f64 {
        self.alpha * crate::materials::NU0 * (self.degree * self.degree) as f64 / h
    }
}

/// Newton iteration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Residual tolerance relative to the fixed source vector norm.
    pub tol_rel: f64,
    /// Absolute residual floor.
    pub tol_abs: f64,
    pub max_newton: usize,
    /// Backtracking halvings per step before giving up.
    pub max_halvings: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_rel: 1e-8,
            tol_abs: 1e-12,
            max_newton: 50,
            max_halvings: 20,
        }
    }
}

/// Raw design variables: three densities in [0,1] per design element.
/// `rho_nu` blends air towards iron; the magnet pair encodes a point of the
/// unit disk through the square-to-disk map.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub rho_nu: Vec<f64>,
    pub rho_mx: Vec<f64>,
    pub rho_my: Vec<f64>,
}

impl DensityField {
    pub fn constant(n: usize, rho_nu: f64, rho_mx: f64, rho_my: f64) -> Self {
        DensityField {
            rho_nu: vec![rho_nu; n],
            rho_mx: vec![rho_mx; n],
            rho_my: vec![rho_my; n],
        }
    }

    /// Neutral gray start: 0.5 everywhere.
    pub fn gray(n: usize) -> Self {
        Self::constant(n, 0.5, 0.5, 0.5)
    }

    pub fn len(&self) -> usize {
        self.rho_nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_nu.is_empty()
    }

    pub fn validate(&self, expected: usize) -> Result<()> {
        if self.rho_nu.len() != expected
            || self.rho_mx.len() != expected
            || self.rho_my.len() != expected
        {
            return Err(Error::DesignSize {
                got: self.rho_nu.len(),
                expected,
            });
        }
        for (e, ch) in [&self.rho_nu, &self.rho_mx, &self.rho_my]
            .iter()
            .flat_map(|ch| ch.iter().enumerate())
        {
            if !(0.0..=1.0).contains(ch) || !ch.is_finite() {
                return Err(Error::DensityRange {
                    element: e,
                    value: *ch,
                });
            }
        }
        Ok(())
    }

    pub fn clamp_into_bounds(&mut self) {
        for ch in [&mut self.rho_nu, &mut self.rho_mx, &mut self.rho_my] {
            for v in ch.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
        }
    }
}

/// The fields the assembler actually consumes: an iron density and a
/// magnetization vector in the unit disk per design element. Produced
/// either directly from a [`DensityField`] or by the optimizer's
/// filter/projection chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalDesign {
    pub rho_nu: Vec<f64>,
    pub mag: Vec<[f64; 2]>,
    hash: u64,
}

impl PhysicalDesign {
    pub fn new(rho_nu: Vec<f64>, mag: Vec<[f64; 2]>) -> Self {
        let hash = fnv_hash(&rho_nu, &mag);
        PhysicalDesign { rho_nu, mag, hash }
    }

    /// Direct interpretation of raw densities (no filtering, no projection).
    pub fn from_field(field: &DensityField) -> Self {
        let mag = field
            .rho_mx
            .iter()
            .zip(&field.rho_my)
            .map(|(&mx, &my)| densities_to_magnetization(mx, my))
            .collect();
        Self::new(field.rho_nu.clone(), mag)
    }

    /// Express the physical fields back as densities via the inverse disk
    /// map, so a stored design re-evaluates to the same physics.
    pub fn to_field(&self) -> DensityField {
        let mut f = DensityField::constant(self.rho_nu.len(), 0.0, 0.5, 0.5);
        f.rho_nu.copy_from_slice(&self.rho_nu);
        for (e, m) in self.mag.iter().enumerate() {
            let s = crate::materials::disk_to_square(*m);
            f.rho_mx[e] = (0.5 * (s[0] + 1.0)).clamp(0.0, 1.0);
            f.rho_my[e] = (0.5 * (s[1] + 1.0)).clamp(0.0, 1.0);
        }
        f
    }

    pub fn len(&self) -> usize {
        self.rho_nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_nu.is_empty()
    }

    pub fn hash(&self) -> u64 {
        self.hash
    }
}

fn fnv_hash(rho: &[f64], mag: &[[f64; 2]]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |x: f64| {
        for b in x.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for &v in rho {
        eat(v);
    }
    for m in mag {
        eat(m[0]);
        eat(m[1]);
    }
    h
}

/// Converged state at one rotor position.
#[derive(Debug, Clone)]
pub struct StateSolution {
    pub theta: f64,
    /// Potential over all degrees of freedom: rotor nodes, stator nodes,
    /// then interface traces. Dirichlet nodes hold zero.
    pub u: Vec<f64>,
    pub newton_iters: usize,
    pub residual: f64,
    pub design_hash: u64,
}

#[derive(Debug)]
pub(crate) struct DofMap {
    /// dof -> equation index (None for eliminated Dirichlet dofs).
    pub eq: Vec<Option<usize>>,
    /// equation index -> dof.
    pub dof: Vec<usize>,
}

impl DofMap {
    fn new(n_dofs: usize, fixed: impl Iterator<Item = usize>) -> Self {
        let mut is_fixed = vec![false; n_dofs];
        for d in fixed {
            is_fixed[d] = true;
        }
        let mut eq = vec![None; n_dofs];
        let mut dof = Vec::with_capacity(n_dofs);
        for d in 0..n_dofs {
            if !is_fixed[d] {
                eq[d] = Some(dof.len());
                dof.push(d);
            }
        }
        DofMap { eq, dof }
    }

    pub fn n_eq(&self) -> usize {
        self.dof.len()
    }
}

/// Everything fixed across an optimization run: geometry, winding, meshes,
/// material models, coupling and solver parameters, and the load angle.
#[derive(Debug, Clone)]
pub struct MachineConfig {
    pub geometry: GeometryParams,
    pub mesh: MeshParams,
    pub iron: IronModel,
    pub f_nu: InterpScheme,
    pub f_mag: InterpScheme,
    pub magnet: MagnetSpec,
    pub nitsche: NitscheParams,
    pub solve: SolveOptions,
    /// Load angle of the synchronous currents, radians electrical.
    pub phase_angle: f64,
    /// Mesh the whole section conformingly instead of using the sliding
    /// circle; only theta = 0 is solvable then.
    pub conforming: bool,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            geometry: GeometryParams::default(),
            mesh: MeshParams::default(),
            iron: IronModel::default(),
            f_nu: InterpScheme::td_hermite_default(),
            f_mag: InterpScheme::lukas_default(),
            magnet: MagnetSpec::default(),
            nitsche: NitscheParams::default(),
            solve: SolveOptions::default(),
            phase_angle: 5.0 * std::f64::consts::PI / 6.0,
            conforming: false,
        }
    }
}

/// Assembled machine model ready to solve.
#[derive(Debug)]
pub struct Machine {
    pub geom: MachineGeometry,
    pub winding: WindingLayout,
    pub iron: IronModel,
    pub f_nu: InterpScheme,
    pub f_mag: InterpScheme,
    pub magnet: MagnetSpec,
    pub nitsche: NitscheParams,
    pub opts: SolveOptions,
    pub phase_angle: f64,
    mesh_params: MeshParams,
    rotor: Option<Mesh>,
    stator: Mesh,
    /// Copper area of each slot, from the mesh.
    slot_areas: Vec<f64>,
    /// Largest element edge across both meshes; sets the Nitsche penalty.
    h_max: f64,
    dofs: DofMap,
    n_rotor: usize,
    n_stator: usize,
    n_trace: usize,
    /// element id -> design index within the design mesh.
    design_index: Vec<Option<usize>>,
}

impl Machine {
    pub fn build(cfg: &MachineConfig) -> Result<Machine> {
        let geom = build_machine(&cfg.geometry)?;
        let winding = WindingLayout::standard(geom.slot_count)?;
        Self::build_wound(cfg, geom, winding)
    }

    /// [`build`] with the coil drive overridden: same distributed slot
    /// pattern, custom turns count and peak phase current.
    pub fn build_driven(cfg: &MachineConfig, turns_per_slot: u32, i_max: f64) -> Result<Machine> {
        let geom = build_machine(&cfg.geometry)?;
        let mut winding = WindingLayout::standard(geom.slot_count)?;
        winding.turns_per_slot = turns_per_slot;
        winding.i_max = i_max;
        Self::build_wound(cfg, geom, winding)
    }

    fn build_wound(
        cfg: &MachineConfig,
        geom: MachineGeometry,
        winding: WindingLayout,
    ) -> Result<Machine> {
        let (rotor, stator) = if cfg.conforming {
            (None, generate_conforming_mesh(&geom, &cfg.mesh)?)
        } else {
            let (r, s) = generate_meshes(&geom, &cfg.mesh)?;
            (Some(r), s)
        };
        Self::from_meshes(cfg, geom, winding, rotor, stator)
    }

    fn from_meshes(
        cfg: &MachineConfig,
        geom: MachineGeometry,
        winding: WindingLayout,
        rotor: Option<Mesh>,
        stator: Mesh,
    ) -> Result<Machine> {
        let mut slot_areas = vec![0.0f64; geom.slot_count];
        for (e, &tag) in stator.tags.iter().enumerate() {
            if let RegionTag::Coil { slot } = tag {
                slot_areas[slot as usize] += stator.area(e);
            }
        }
        if slot_areas.iter().any(|&a| a <= 0.0) {
            return Err(Error::Geometry("a slot has no coil elements".into()));
        }
        let h_max = rotor
            .as_ref()
            .map(|r| r.max_edge_len())
            .unwrap_or(0.0)
            .max(stator.max_edge_len());
        let n_rotor = rotor.as_ref().map(|r| r.n_nodes()).unwrap_or(0);
        let n_stator = stator.n_nodes();
        let n_trace = if rotor.is_some() {
            stator.interface_edges.len()
        } else {
            0
        };
        let n_dofs = n_rotor + n_stator + n_trace;
        let dofs = DofMap::new(n_dofs, stator.dirichlet_nodes.iter().map(|&v| n_rotor + v));
        let design_mesh = rotor.as_ref().unwrap_or(&stator);
        let mut design_index = vec![None; design_mesh.n_elements()];
        for (i, &e) in design_mesh.design_elements.iter().enumerate() {
            design_index[e] = Some(i);
        }
        Ok(Machine {
            geom,
            winding,
            iron: cfg.iron,
            f_nu: cfg.f_nu,
            f_mag: cfg.f_mag,
            magnet: cfg.magnet,
            nitsche: cfg.nitsche,
            opts: cfg.solve,
            phase_angle: cfg.phase_angle,
            mesh_params: cfg.mesh,
            rotor,
            stator,
            slot_areas,
            h_max,
            dofs,
            n_rotor,
            n_stator,
            n_trace,
            design_index,
        })
    }

    pub fn is_conforming(&self) -> bool {
        self.rotor.is_none()
    }

    /// Mesh holding the design elements (rotor mesh, or the single
    /// conforming mesh).
    pub fn design_mesh(&self) -> &Mesh {
        self.rotor.as_ref().unwrap_or(&self.stator)
    }

    pub fn rotor_mesh(&self) -> Option<&Mesh> {
        self.rotor.as_ref()
    }

    pub fn stator_mesh(&self) -> &Mesh {
        &self.stator
    }

    pub fn n_design(&self) -> usize {
        self.design_mesh().design_elements.len()
    }

    /// Areas of the design elements, in design-index order.
    pub fn design_areas(&self) -> Vec<f64> {
        let m = self.design_mesh();
        m.design_elements.iter().map(|&e| m.area(e)).collect()
    }

    /// Centroids of the design elements at theta = 0.
    pub fn design_centroids(&self) -> Vec<[f64; 2]> {
        let m = self.design_mesh();
        m.design_elements.iter().map(|&e| m.centroid(e)).collect()
    }

    pub(crate) fn design_index(&self) -> &[Option<usize>] {
        &self.design_index
    }

    pub fn n_dofs(&self) -> usize {
        self.n_rotor + self.n_stator + self.n_trace
    }

    pub(crate) fn dof_map(&self) -> &DofMap {
        &self.dofs
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Mesh resolution the machine was built with. The design filter
    /// radius is tied to `target_h`, so it travels with the machine.
    pub fn mesh_params(&self) -> &MeshParams {
        &self.mesh_params
    }

    pub fn slot_areas(&self) -> &[f64] {
        &self.slot_areas
    }

    /// Current density in a slot at rotor angle theta, in A/m^2.
    pub fn slot_current_density(&self, slot: usize, theta: f64) -> f64 {
        self.winding
            .slot_ampere_turns(slot, theta, self.geom.pole_pairs, self.phase_angle)
            / self.slot_areas[slot]
    }

    /// Dof range occupied by the stator mesh nodes.
    pub fn stator_node_range(&self) -> std::ops::Range<usize> {
        self.n_rotor..self.n_rotor + self.n_stator
    }

    /// Slices of a dof vector: (rotor nodes, stator nodes, traces).
    pub fn split_dofs<'a>(&self, u: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let (r, rest) = u.split_at(self.n_rotor);
        let (s, t) = rest.split_at(self.n_stator);
        (r, s, t)
    }

    /// Potential on the stator mesh nodes.
    pub fn u_stator<'a>(&self, sol: &'a StateSolution) -> &'a [f64] {
        &sol.u[self.n_rotor..self.n_rotor + self.n_stator]
    }

    /// Potential on the rotor mesh nodes (empty for conforming machines).
    pub fn u_rotor<'a>(&self, sol: &'a StateSolution) -> &'a [f64] {
        &sol.u[..self.n_rotor]
    }

    /// Solve the state problem at one rotor angle.
    pub fn solve_state(
        &self,
        design: &PhysicalDesign,
        theta: f64,
        warm: Option<&StateSolution>,
    ) -> Result<StateSolution> {
        if design.len() != self.n_design() {
            return Err(Error::DesignSize {
                got: design.len(),
                expected: self.n_design(),
            });
        }
        if self.is_conforming() && theta != 0.0 {
            return Err(Error::Geometry(
                "conforming machine can only be solved at theta = 0".into(),
            ));
        }
        let asm = Assembly::new(self, theta, design)?;
        let tol = (self.opts.tol_rel * asm.source_norm()).max(self.opts.tol_abs);

        let mut u = match warm {
            Some(w) if w.u.len() == self.n_dofs() => w.u.clone(),
            _ => vec![0.0; self.n_dofs()],
        };
        // Dirichlet entries of a warm start may carry stale values.
        for &d in self.stator.dirichlet_nodes.iter() {
            u[self.n_rotor + d] = 0.0;
        }

        let mut iters = 0;
        loop {
            let (r, jac) = asm.residual_and_jacobian(&u);
            let rn = norm2(&r);
            if rn <= tol {
                return Ok(StateSolution {
                    theta,
                    u,
                    newton_iters: iters,
                    residual: rn,
                    design_hash: design.hash(),
                });
            }
            if iters >= self.opts.max_newton {
                return Err(Error::NonConvergence {
                    iters,
                    residual: rn,
                });
            }
            let fact = jac.factorize()?;
            let neg_r: Vec<f64> = r.iter().map(|x| -x).collect();
            let delta = fact.solve(&neg_r)?;

            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=self.opts.max_halvings {
                let mut u_try = u.clone();
                for (eq, &d) in self.dofs.dof.iter().enumerate() {
                    u_try[d] += lambda * delta[eq];
                }
                let rn_try = norm2(&asm.residual(&u_try));
                if rn_try < rn || rn_try <= tol {
                    u = u_try;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(Error::NonConvergence {
                    iters,
                    residual: rn,
                });
            }
            iters += 1;
        }
    }

    /// Solve at the four averaging positions, in parallel.
    pub fn solve_four_positions(
        &self,
        design: &PhysicalDesign,
        warm: Option<&[StateSolution]>,
    ) -> Result<Vec<StateSolution>> {
        use rayon::prelude::*;
        crate::torque::FOUR_POINT_ANGLES
            .par_iter()
            .enumerate()
            .map(|(k, &theta)| {
                let w = warm.and_then(|ws| ws.get(k));
                self.solve_state(design, theta, w)
            })
            .collect()
    }

    /// Rotated rotor mesh for a given angle (None for conforming machines).
    pub fn rotor_at(&self, theta: f64) -> Option<Mesh> {
        self.rotor.as_ref().map(|r| {
            if theta == 0.0 {
                r.clone()
            } else {
                r.rotated(theta)
            }
        })
    }
}

/// Magnetization magnitude below which an element is treated as unmagnetized.
pub fn effective_magnitude(m: [f64; 2]) -> f64 {
    let n = (m[0] * m[0] + m[1] * m[1]).sqrt();
    if n < MAG_EPS {
        0.0
    } else {
        n
    }
}
