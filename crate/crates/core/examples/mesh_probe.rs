//! Alpha sweep: does the gap field recover as the interface penalty drops?

use std::f64::consts::PI;
use synrm_core::fem::{DensityField, Machine, MachineConfig, NitscheParams, PhysicalDesign};
use synrm_core::geometry::MeshParams;

fn main() {
    for alpha in [160.0, 40.0, 10.0, 2.5, 0.6] {
        let cfg = MachineConfig {
            mesh: MeshParams::with_target_h(2.0e-3),
            nitsche: NitscheParams { alpha, degree: 1 },
            ..MachineConfig::default()
        };
        let m = Machine::build(&cfg).unwrap();
        let design =
            PhysicalDesign::from_field(&DensityField::constant(m.n_design(), 1.0, 0.5, 0.5));
        let sol = m.solve_state(&design, 0.0, None).unwrap();
        let us = m.u_stator(&sol);
        let mesh = m.stator_mesh();
        let r_mid = 0.5 * (m.geom.arkkio_inner + m.geom.arkkio_outer);
        let n = 720;
        let (mut ac, mut as_) = (0.0, 0.0);
        for k in 0..n {
            let phi = 2.0 * PI * k as f64 / n as f64;
            let x = [r_mid * phi.cos(), r_mid * phi.sin()];
            let (e, _) = mesh.locate(x).unwrap();
            let g = mesh.basis_gradients(e);
            let t = mesh.tris[e];
            let (mut bx, mut by) = (0.0, 0.0);
            for i in 0..3 {
                bx += g[i][0] * us[t[i]];
                by += g[i][1] * us[t[i]];
            }
            let br = by * phi.cos() - bx * phi.sin();
            ac += br * phi.cos();
            as_ += br * phi.sin();
        }
        let amp = 2.0 * (ac * ac + as_ * as_).sqrt() / n as f64;
        println!("alpha = {:>6.1}: B_r fundamental = {:.4} T", alpha, amp);
    }
}
