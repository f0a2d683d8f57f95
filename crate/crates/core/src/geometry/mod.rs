//! Machine geometry, winding layout, and mesh generation.

mod machine;
mod mesh;
mod winding;

pub use machine::{build_machine, GeometryParams, MachineGeometry};
pub use mesh::{
    generate_conforming_mesh, generate_disk_mesh, generate_meshes, generate_rotor_mesh,
    generate_stator_mesh, Mesh, MeshParams, RegionTag,
};
pub use winding::{Phase, SlotAssignment, WindingLayout};
