//! TOML run configuration.
//!
//! Every section and every key is optional; omitted values fall back to
//! the benchmark machine and the default solver/optimizer settings, so an
//! empty file is a valid configuration. Unknown keys are rejected to
//! catch typos. See `config.example.toml` at the repository root for the
//! annotated reference.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use synrm_core::fem::{Machine, MachineConfig, NitscheParams, SolveOptions};
use synrm_core::geometry::{GeometryParams, MeshParams};
use synrm_core::materials::{InterpScheme, IronModel, MagnetSpec, MarroccoCurve};
use synrm_core::optimizer::{FilterParams, OptimizeConfig};
use synrm_core::postprocess::ClusterConfig;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    pub winding: WindingSection,
    pub material: MaterialSection,
    pub solver: SolverSection,
    pub optimizer: OptimizerSection,
    pub postprocess: PostprocessSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub pole_pairs: u32,
    pub slot_count: usize,
    pub stack_length: f64,
    pub rotor_outer: f64,
    pub stator_inner: f64,
    pub stator_outer: f64,
    pub slot_depth: f64,
    pub slot_fill: f64,
    pub mortar_radius: Option<f64>,
    pub arkkio_inner: Option<f64>,
    pub arkkio_outer: Option<f64>,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let g = GeometryParams::default();
        GeometrySection {
            pole_pairs: g.pole_pairs,
            slot_count: g.slot_count,
            stack_length: g.stack_length,
            rotor_outer: g.rotor_outer,
            stator_inner: g.stator_inner,
            stator_outer: g.stator_outer,
            slot_depth: g.slot_depth,
            slot_fill: g.slot_fill,
            mortar_radius: g.mortar_radius,
            arkkio_inner: g.arkkio_inner,
            arkkio_outer: g.arkkio_outer,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindingSection {
    pub turns_per_slot: u32,
    pub i_max: f64,
    /// Load angle of the synchronous currents, radians.
    pub phase_angle: f64,
}

impl Default for WindingSection {
    fn default() -> Self {
        WindingSection {
            turns_per_slot: 64,
            i_max: 12.0,
            phase_angle: MachineConfig::default().phase_angle,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialSection {
    /// "marrocco" or "linear".
    pub model: String,
    /// Constant reluctivity for the linear model, A/(T*m) scale.
    pub linear_nu: f64,
    /// Maximum magnetization in A/m.
    pub m_max: f64,
    /// Iron interpolation: "simp", "lukas" or "td-hermite".
    pub f_nu: String,
    /// Magnet interpolation, same choices.
    pub f_mag: String,
    pub simp_exponent: f64,
    pub lukas_lambda: f64,
    pub marrocco: MarroccoSection,
}

impl Default for MaterialSection {
    fn default() -> Self {
        let curve = MarroccoCurve::default();
        MaterialSection {
            model: "marrocco".into(),
            linear_nu: synrm_core::materials::NU0 * curve.eps,
            m_max: MagnetSpec::default().m_max,
            f_nu: "td-hermite".into(),
            f_mag: "lukas".into(),
            simp_exponent: 3.0,
            lukas_lambda: 5.0,
            marrocco: MarroccoSection::default(),
        }
    }
}

/// Overrides for the fitted iron curve; unset fields keep the defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarroccoSection {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub eps: Option<f64>,
    pub tau: Option<f64>,
    pub c: Option<f64>,
    pub b_max: Option<f64>,
}

impl MarroccoSection {
    pub fn curve(&self) -> MarroccoCurve {
        let mut m = MarroccoCurve::default();
        if let Some(v) = self.alpha {
            m.alpha = v;
        }
        if let Some(v) = self.beta {
            m.beta = v;
        }
        if let Some(v) = self.gamma {
            m.gamma = v;
        }
        if let Some(v) = self.eps {
            m.eps = v;
        }
        if let Some(v) = self.tau {
            m.tau = v;
        }
        if let Some(v) = self.c {
            m.c = v;
        }
        if let Some(v) = self.b_max {
            m.b_max = v;
        }
        m
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Target mesh edge length in meters.
    pub target_h: f64,
    pub n_phi_rotor: Option<usize>,
    pub n_phi_stator: Option<usize>,
    pub radial_scale: f64,
    pub newton_tol_rel: f64,
    pub newton_tol_abs: f64,
    pub newton_max_iters: usize,
    pub newton_max_halvings: usize,
    pub nitsche_alpha: f64,
    /// Mesh the section conformingly (single mesh, only theta = 0).
    pub conforming: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let mesh = MeshParams::default();
        let solve = SolveOptions::default();
        SolverSection {
            target_h: mesh.target_h,
            n_phi_rotor: mesh.n_phi_rotor,
            n_phi_stator: mesh.n_phi_stator,
            radial_scale: mesh.radial_scale,
            newton_tol_rel: solve.tol_rel,
            newton_tol_abs: solve.tol_abs,
            newton_max_iters: solve.max_newton,
            newton_max_halvings: solve.max_halvings,
            nitsche_alpha: NitscheParams::default().alpha,
            conforming: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub f_vf: f64,
    pub f_vmag: f64,
    pub magnets: bool,
    pub delta: f64,
    pub beta0: f64,
    pub beta_max: f64,
    pub beta_double_every: usize,
    pub projection: bool,
    pub rho_cut: f64,
    pub gamma_pen: f64,
    pub step0: f64,
    pub step_grow: f64,
    pub max_halvings: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub k_outer: usize,
    pub mu0: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let o = OptimizeConfig::default();
        let f = o.filter;
        OptimizerSection {
            f_vf: o.f_vf,
            f_vmag: o.f_vmag,
            magnets: o.magnets,
            delta: f.delta,
            beta0: f.beta0,
            beta_max: f.beta_max,
            beta_double_every: f.beta_double_every,
            projection: f.projection,
            rho_cut: f.rho_cut,
            gamma_pen: f.gamma_pen,
            step0: f.step0,
            step_grow: f.step_grow,
            max_halvings: f.max_halvings,
            max_iters: f.max_iters,
            grad_tol: f.grad_tol,
            k_outer: f.k_outer,
            mu0: f.mu0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessSection {
    pub k: usize,
    pub alpha_w: f64,
    pub seed: u64,
    pub wrap_angles: bool,
    pub mag_threshold: f64,
    pub iron_threshold: f64,
    pub max_iters: usize,
    /// Coordinate normalizers; default is the rotor diameter.
    pub n_x: Option<f64>,
    pub n_y: Option<f64>,
}

impl Default for PostprocessSection {
    fn default() -> Self {
        let c = ClusterConfig::default();
        PostprocessSection {
            k: c.k,
            alpha_w: c.alpha_w,
            seed: c.seed,
            wrap_angles: c.wrap_angles,
            mag_threshold: c.mag_threshold,
            iron_threshold: c.iron_threshold,
            max_iters: c.max_iters,
            n_x: None,
            n_y: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// Write a design VTK snapshot every N optimizer iterations (0 = off).
    pub snapshot_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            snapshot_every: 0,
        }
    }
}

impl RunConfig {
    /// Parse a TOML file. Errors point at the offending line.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    fn scheme(&self, name: &str) -> Result<InterpScheme> {
        Ok(match name {
            "simp" => InterpScheme::Simp {
                exponent: self.material.simp_exponent,
            },
            "lukas" => InterpScheme::Lukas {
                lambda: self.material.lukas_lambda,
            },
            "td-hermite" => InterpScheme::TdHermite {
                nu1_over_nu0: self.material.marrocco.curve().eps,
            },
            other => bail!("unknown interpolation scheme '{other}' (simp, lukas, td-hermite)"),
        })
    }

    pub fn machine_config(&self) -> Result<MachineConfig> {
        let g = &self.geometry;
        let s = &self.solver;
        let iron = match self.material.model.as_str() {
            "marrocco" => IronModel::Marrocco(self.material.marrocco.curve()),
            "linear" => IronModel::Linear {
                nu: self.material.linear_nu,
            },
            other => bail!("unknown iron model '{other}' (marrocco, linear)"),
        };
        Ok(MachineConfig {
            geometry: GeometryParams {
                pole_pairs: g.pole_pairs,
                slot_count: g.slot_count,
                stack_length: g.stack_length,
                rotor_outer: g.rotor_outer,
                stator_inner: g.stator_inner,
                stator_outer: g.stator_outer,
                slot_depth: g.slot_depth,
                slot_fill: g.slot_fill,
                mortar_radius: g.mortar_radius,
                arkkio_inner: g.arkkio_inner,
                arkkio_outer: g.arkkio_outer,
            },
            mesh: MeshParams {
                target_h: s.target_h,
                n_phi_rotor: s.n_phi_rotor,
                n_phi_stator: s.n_phi_stator,
                radial_scale: s.radial_scale,
            },
            iron,
            f_nu: self.scheme(&self.material.f_nu)?,
            f_mag: self.scheme(&self.material.f_mag)?,
            magnet: MagnetSpec {
                m_max: self.material.m_max,
            },
            nitsche: NitscheParams {
                alpha: s.nitsche_alpha,
                degree: 1,
            },
            solve: SolveOptions {
                tol_rel: s.newton_tol_rel,
                tol_abs: s.newton_tol_abs,
                max_newton: s.newton_max_iters,
                max_halvings: s.newton_max_halvings,
            },
            phase_angle: self.winding.phase_angle,
            conforming: s.conforming,
        })
    }

    pub fn build_machine(&self) -> Result<Machine> {
        let cfg = self.machine_config()?;
        Ok(Machine::build_driven(
            &cfg,
            self.winding.turns_per_slot,
            self.winding.i_max,
        )?)
    }

    /// The machine for a preset study: the preset fixes physics-level
    /// choices (phase angle), this config still controls mesh and solver
    /// settings.
    pub fn build_preset_machine(&self, mut preset_cfg: MachineConfig) -> Result<Machine> {
        let own = self.machine_config()?;
        preset_cfg.mesh = own.mesh;
        preset_cfg.solve = own.solve;
        preset_cfg.nitsche = own.nitsche;
        Ok(Machine::build_driven(
            &preset_cfg,
            self.winding.turns_per_slot,
            self.winding.i_max,
        )?)
    }

    pub fn optimize_config(&self) -> OptimizeConfig {
        let o = &self.optimizer;
        OptimizeConfig {
            f_vf: o.f_vf,
            f_vmag: o.f_vmag,
            magnets: o.magnets,
            filter: FilterParams {
                delta: o.delta,
                beta0: o.beta0,
                beta_max: o.beta_max,
                beta_double_every: o.beta_double_every,
                projection: o.projection,
                rho_cut: o.rho_cut,
                gamma_pen: o.gamma_pen,
                step0: o.step0,
                step_grow: o.step_grow,
                max_halvings: o.max_halvings,
                max_iters: o.max_iters,
                grad_tol: o.grad_tol,
                k_outer: o.k_outer,
                mu0: o.mu0,
            },
        }
    }

    pub fn cluster_config(&self, machine: &Machine) -> ClusterConfig {
        let p = &self.postprocess;
        let base = ClusterConfig::for_machine(machine);
        ClusterConfig {
            k: p.k,
            n_x: p.n_x.unwrap_or(base.n_x),
            n_y: p.n_y.unwrap_or(base.n_y),
            alpha_w: p.alpha_w,
            max_iters: p.max_iters,
            seed: p.seed,
            wrap_angles: p.wrap_angles,
            mag_threshold: p.mag_threshold,
            iron_threshold: p.iron_threshold,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_benchmark_machine() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        let mc = cfg.machine_config().unwrap();
        assert_eq!(mc.geometry.slot_count, 24);
        assert_eq!(mc.geometry.rotor_outer, 18.5e-3);
        assert!(matches!(mc.iron, IronModel::Marrocco(_)));
        assert_eq!(cfg.winding.turns_per_slot, 64);
        assert_eq!(cfg.optimizer.max_iters, FilterParams::default().max_iters);
    }

    #[test]
    fn sections_override_selected_keys() {
        let cfg: RunConfig = toml::from_str(
            r#"
            [winding]
            phase_angle = 0.3
            [material]
            model = "linear"
            f_nu = "simp"
            simp_exponent = 2.0
            [optimizer]
            f_vf = 0.2
            magnets = false
            [output]
            dir = "results"
            "#,
        )
        .unwrap();
        let mc = cfg.machine_config().unwrap();
        assert_eq!(mc.phase_angle, 0.3);
        assert!(matches!(mc.iron, IronModel::Linear { .. }));
        assert!(matches!(
            mc.f_nu,
            InterpScheme::Simp { exponent } if exponent == 2.0
        ));
        let oc = cfg.optimize_config();
        assert_eq!(oc.f_vf, 0.2);
        assert!(!oc.magnets);
        assert_eq!(cfg.output.dir, "results");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<RunConfig>("[solver]\nnewton_toll = 1e-9\n").unwrap_err();
        assert!(err.to_string().contains("newton_toll"), "{err}");
    }

    #[test]
    fn bad_scheme_name_is_reported() {
        let cfg: RunConfig = toml::from_str("[material]\nf_nu = \"ramp\"\n").unwrap();
        let err = cfg.machine_config().unwrap_err();
        assert!(err.to_string().contains("ramp"));
    }
}
