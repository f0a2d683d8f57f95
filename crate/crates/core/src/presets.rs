//! Ready-made study setups.
//!
//! Three families, each a full optimization configuration plus an initial
//! design recipe:
//!
//! * `iron-air-{10,20,40}`: reluctance-only designs (magnets disabled) at
//!   increasing iron volume budgets, started from a horizontally layered
//!   rotor.
//! * `magnet-{7.5,15,30}`: magnet placement at increasing magnet volume
//!   budgets, continued from the iron-air-40 result.
//! * `gray-start`: magnets unbounded, load angle 3pi/32, started from a
//!   featureless 0.5 design with the intermediate-material penalty on.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fem::{DensityField, Machine, MachineConfig};
use crate::optimizer::OptimizeConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    IronAir10,
    IronAir20,
    IronAir40,
    Magnet7p5,
    Magnet15,
    Magnet30,
    GrayStart,
}

/// How a study builds its initial density field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartDesign {
    /// Alternating full-iron / air stripes, normal to y, counted across
    /// the rotor diameter.
    Layered { n_layers: usize },
    /// 0.5 everywhere on all three channels.
    Gray,
    /// The final design of an earlier iron-air-40 run, supplied by the
    /// caller.
    IronAirResult,
}

/// A preset expanded into everything a run needs.
#[derive(Debug, Clone)]
pub struct Study {
    pub name: &'static str,
    pub machine: MachineConfig,
    pub optimize: OptimizeConfig,
    pub start: StartDesign,
}

impl Preset {
    pub fn all() -> [Preset; 7] {
        [
            Preset::IronAir10,
            Preset::IronAir20,
            Preset::IronAir40,
            Preset::Magnet7p5,
            Preset::Magnet15,
            Preset::Magnet30,
            Preset::GrayStart,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::IronAir10 => "iron-air-10",
            Preset::IronAir20 => "iron-air-20",
            Preset::IronAir40 => "iron-air-40",
            Preset::Magnet7p5 => "magnet-7.5",
            Preset::Magnet15 => "magnet-15",
            Preset::Magnet30 => "magnet-30",
            Preset::GrayStart => "gray-start",
        }
    }

    pub fn from_name(name: &str) -> Result<Preset> {
        Preset::all()
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| {
                let known: Vec<&str> = Preset::all().iter().map(|p| p.name()).collect();
                Error::Config(format!(
                    "unknown preset '{name}'; available: {}",
                    known.join(", ")
                ))
            })
    }

    pub fn study(&self) -> Study {
        let mut machine = MachineConfig::default();
        let mut optimize = OptimizeConfig::default();
        let start;
        match self {
            Preset::IronAir10 | Preset::IronAir20 | Preset::IronAir40 => {
                optimize.magnets = false;
                optimize.f_vf = match self {
                    Preset::IronAir10 => 0.10,
                    Preset::IronAir20 => 0.20,
                    _ => 0.40,
                };
                // never binding without magnets
                optimize.f_vmag = 1.0;
                start = StartDesign::Layered { n_layers: 8 };
            }
            Preset::Magnet7p5 | Preset::Magnet15 | Preset::Magnet30 => {
                optimize.magnets = true;
                optimize.f_vf = 0.40;
                optimize.f_vmag = match self {
                    Preset::Magnet7p5 => 0.075,
                    Preset::Magnet15 => 0.15,
                    _ => 0.30,
                };
                start = StartDesign::IronAirResult;
            }
            Preset::GrayStart => {
                machine.phase_angle = 3.0 * PI / 32.0;
                optimize.magnets = true;
                optimize.f_vf = 0.40;
                optimize.f_vmag = 1.0;
                optimize.filter.gamma_pen = 0.01;
                start = StartDesign::Gray;
            }
        }
        Study {
            name: self.name(),
            machine,
            optimize,
            start,
        }
    }
}

/// Alternating iron/air stripes over the rotor disk. Equal-width bands in
/// y, the bottom band solid iron; magnetization channels neutral.
pub fn layered_field(machine: &Machine, n_layers: usize) -> DensityField {
    let r = machine.geom.rotor_outer;
    let width = 2.0 * r / n_layers.max(1) as f64;
    let mut field = DensityField::constant(machine.n_design(), 0.0, 0.5, 0.5);
    for (e, c) in machine.design_centroids().iter().enumerate() {
        let band = (((c[1] + r) / width).floor() as isize).clamp(0, n_layers as isize - 1);
        if band % 2 == 0 {
            field.rho_nu[e] = 1.0;
        }
    }
    field
}

/// The study's initial field. Magnet presets continue from an earlier
/// run, so they need `upstream`; the others ignore it.
pub fn initial_field(
    study: &Study,
    machine: &Machine,
    upstream: Option<&DensityField>,
) -> Result<DensityField> {
    match study.start {
        StartDesign::Layered { n_layers } => Ok(layered_field(machine, n_layers)),
        StartDesign::Gray => Ok(DensityField::constant(machine.n_design(), 0.5, 0.5, 0.5)),
        StartDesign::IronAirResult => {
            let field = upstream.ok_or_else(|| {
                Error::Config(format!(
                    "preset '{}' continues from an iron-air-40 design; run that study \
                     first and pass its final field",
                    study.name
                ))
            })?;
            field.validate(machine.n_design())?;
            Ok(field.clone())
        }
    }
}
