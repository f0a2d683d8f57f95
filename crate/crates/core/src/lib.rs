//! Nonlinear 2D magnetostatic FEM and multi-material topology optimization
//! for a permanent-magnet-assisted synchronous reluctance machine.
//!
//! The crate covers the full pipeline:
//!
//! * [`geometry`] — machine cross-section, winding, structured polar meshes
//!   with a sliding (non-conforming) circle in the air gap;
//! * [`materials`] — Marrocco iron curve, density interpolation schemes,
//!   and the square-to-disk magnetization map;
//! * [`fem`] — Newton solves of the magnetostatic state equation with
//!   Nitsche-type mortaring across the sliding circle;
//! * [`torque`] — Arkkio's eggshell torque on a dedicated ring of elements
//!   in the gap, plus rotation sweeps and the four-position average;
//! * [`sensitivity`] — adjoint solves and the design gradient of the
//!   augmented Lagrangian;
//! * [`optimizer`] — density filtering, projection, and the projected
//!   gradient flow with augmented Lagrangian volume constraints;
//! * [`postprocess`] — extraction of magnet cells and k-means clustering of
//!   magnetization directions into manufacturable blocks;
//! * [`presets`] — ready-made study configurations;
//! * [`vtk`] / [`csvout`] — legacy VTK and CSV writers for all artifacts.

pub mod csvout;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod linalg;
pub mod materials;
pub mod optimizer;
pub mod postprocess;
pub mod presets;
pub mod sensitivity;
pub mod torque;
pub mod vtk;

pub use error::{Error, Result};
pub use fem::{
    DensityField, Machine, MachineConfig, NitscheParams, PhysicalDesign, SolveOptions,
    StateSolution,
};
pub use geometry::{GeometryParams, MachineGeometry, Mesh, MeshParams, RegionTag, WindingLayout};
pub use materials::{InterpScheme, IronModel, MagnetSpec, MarroccoCurve, NU0};
pub use optimizer::{
    optimize, AugLagState, DesignChain, DesignGradient, FilterParams, OptimizeConfig,
    OptimizeResult, Termination,
};
pub use postprocess::{
    apply_clustering, extract_magnet_cells, kmeans_cluster, ClusterConfig, Clustering, MagnetCell,
};
pub use presets::{initial_field, layered_field, Preset, StartDesign, Study};
pub use torque::{ArkkioEvaluator, FourPointTorque, TorqueSample, FOUR_POINT_ANGLES};
