//! Hot-path benchmarks: one nonlinear solve, the four-position torque
//! average, the design filter, and magnet clustering.
//!
//! The machine fixture is deliberately coarse so a full run stays under a
//! minute; relative movement between commits is what matters here.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use synrm_core::fem::{DensityField, Machine, MachineConfig, PhysicalDesign};
use synrm_core::geometry::MeshParams;
use synrm_core::optimizer::HelmholtzFilter;
use synrm_core::postprocess::{kmeans_cluster, ClusterConfig, MagnetCell};
use synrm_core::torque::{four_point_torque, ArkkioEvaluator};

fn coarse_machine() -> Machine {
    let cfg = MachineConfig {
        mesh: MeshParams {
            target_h: 2.6e-3,
            n_phi_rotor: Some(48),
            n_phi_stator: Some(72),
            radial_scale: 1.3,
        },
        ..MachineConfig::default()
    };
    Machine::build(&cfg).expect("benchmark machine")
}

fn striped_design(machine: &Machine) -> PhysicalDesign {
    let mut field = DensityField::constant(machine.n_design(), 0.0, 0.5, 0.5);
    let r = 0.0185;
    for (e, c) in machine.design_centroids().iter().enumerate() {
        if ((c[1] + r) / (r / 2.0)).floor() as i64 % 2 == 0 {
            field.rho_nu[e] = 1.0;
        }
    }
    PhysicalDesign::from_field(&field)
}

fn bench_solve(c: &mut Criterion) {
    let machine = coarse_machine();
    let design = striped_design(&machine);
    c.bench_function("newton_solve_theta03", |b| {
        b.iter(|| {
            let sol = machine
                .solve_state(black_box(&design), 0.3, None)
                .expect("solve");
            black_box(sol.u[0])
        })
    });
}

fn bench_torque(c: &mut Criterion) {
    let machine = coarse_machine();
    let design = striped_design(&machine);
    let arkkio = ArkkioEvaluator::new(&machine);
    let warm = four_point_torque(&machine, &arkkio, &design, None)
        .expect("warm states")
        .states;
    c.bench_function("four_point_torque_warm", |b| {
        b.iter(|| {
            let t = four_point_torque(&machine, &arkkio, black_box(&design), Some(&warm))
                .expect("torque");
            black_box(t.average)
        })
    });
}

fn bench_filter(c: &mut Criterion) {
    let machine = coarse_machine();
    let radius = 1.5 * machine.mesh_params().target_h;
    let filter = HelmholtzFilter::new(machine.design_mesh(), radius).expect("filter");
    let rho: Vec<f64> = (0..machine.n_design())
        .map(|e| if e % 3 == 0 { 1.0 } else { 0.2 })
        .collect();
    c.bench_function("helmholtz_filter_apply", |b| {
        b.iter(|| black_box(filter.apply(black_box(&rho)).expect("apply")))
    });
}

fn bench_kmeans(c: &mut Criterion) {
    // synthetic cloud shaped like scattered magnet cells
    let cells: Vec<MagnetCell> = (0..600)
        .map(|i| {
            let t = i as f64;
            MagnetCell {
                element: i,
                x: 0.017 * (t * 0.71).sin(),
                y: 0.017 * (t * 0.37).cos(),
                angle: (t * 0.13) % (2.0 * std::f64::consts::PI),
                area: 1e-6,
            }
        })
        .collect();
    let cfg = ClusterConfig {
        k: 5,
        seed: 42,
        ..ClusterConfig::default()
    };
    c.bench_function("kmeans_600_cells_k5", |b| {
        b.iter(|| black_box(kmeans_cluster(black_box(&cells), &cfg).expect("cluster")))
    });
}

criterion_group!(benches, bench_solve, bench_torque, bench_filter, bench_kmeans);
criterion_main!(benches);
