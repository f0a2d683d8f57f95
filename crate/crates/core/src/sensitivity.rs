//! Adjoint solves and the torque gradient with respect to the physical
//! design fields.
//!
//! The averaged torque depends on the design both explicitly (through the
//! reluctivity interpolation and the magnet source) and implicitly through
//! the state at each rotor position. One adjoint solve per position removes
//! the implicit part: with R_theta(X, u) = 0 the state residual and
//! T_bar the mean of the per-position torques,
//!
//!   dT_bar/dX = -sum_theta lambda_theta^T dR_theta/dX,
//!   J_theta lambda_theta = w dT/du at the converged state,
//!
//! where J_theta is the (symmetric) Newton Jacobian, reused as the adjoint
//! operator, and w the averaging weight. The gradient lives on the physical
//! per-element fields: the iron density rho_nu and the two components of
//! the magnetization vector in the unit disk. Chaining through filtering,
//! projection and the square-to-disk map is the optimizer's concern.

use crate::error::{Error, Result};
use crate::fem::{Assembly, Machine, PhysicalDesign, StateSolution};
use crate::materials::{MAG_EPS, NU0};
use crate::torque::ArkkioEvaluator;

/// Gradient with respect to the physical fields, one entry per design
/// element.
#[derive(Debug, Clone)]
pub struct PhysicalGradient {
    pub d_rho_nu: Vec<f64>,
    pub d_mag: Vec<[f64; 2]>,
}

impl PhysicalGradient {
    pub fn zeros(n: usize) -> Self {
        PhysicalGradient {
            d_rho_nu: vec![0.0; n],
            d_mag: vec![[0.0; 2]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.d_rho_nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_rho_nu.is_empty()
    }
}

/// Gradient of the mean torque over `states` with respect to the physical
/// design fields. The states must be converged solutions for exactly this
/// design; anything else is a logic error upstream and is rejected.
pub fn torque_gradient(
    machine: &Machine,
    arkkio: &ArkkioEvaluator,
    design: &PhysicalDesign,
    states: &[StateSolution],
) -> Result<PhysicalGradient> {
    let weight = 1.0 / states.len() as f64;
    let mut grad = PhysicalGradient::zeros(design.len());
    for sol in states {
        accumulate_angle(machine, arkkio, design, sol, weight, &mut grad)?;
    }
    Ok(grad)
}

/// Gradient of the torque at a single rotor position; used by the
/// finite-difference verification tests.
pub fn single_angle_torque_gradient(
    machine: &Machine,
    arkkio: &ArkkioEvaluator,
    design: &PhysicalDesign,
    sol: &StateSolution,
) -> Result<PhysicalGradient> {
    let mut grad = PhysicalGradient::zeros(design.len());
    accumulate_angle(machine, arkkio, design, sol, 1.0, &mut grad)?;
    Ok(grad)
}

fn accumulate_angle(
    machine: &Machine,
    arkkio: &ArkkioEvaluator,
    design: &PhysicalDesign,
    sol: &StateSolution,
    weight: f64,
    grad: &mut PhysicalGradient,
) -> Result<()> {
    if sol.design_hash != design.hash() || sol.u.len() != machine.n_dofs() {
        return Err(Error::StaleState);
    }
    let asm = Assembly::new(machine, sol.theta, design)?;
    let lambda = solve_adjoint(machine, arkkio, &asm, sol, weight)?;
    accumulate_partials(machine, &asm, design, sol, &lambda, grad);
    Ok(())
}

/// Solve J lambda = weight * dT/du at the converged state; lambda comes
/// back in the full dof layout with zeros at Dirichlet nodes.
fn solve_adjoint(
    machine: &Machine,
    arkkio: &ArkkioEvaluator,
    asm: &Assembly,
    sol: &StateSolution,
    weight: f64,
) -> Result<Vec<f64>> {
    let mut load_full = vec![0.0; machine.n_dofs()];
    arkkio.accumulate_dtorque_du(
        machine.u_stator(sol),
        weight,
        &mut load_full[machine.stator_node_range()],
    );
    let dofs = machine.dof_map();
    let load: Vec<f64> = dofs.dof.iter().map(|&d| load_full[d]).collect();

    let (_, jac) = asm.residual_and_jacobian(&sol.u);
    let x = jac.factorize()?.solve(&load)?;

    let mut lambda = vec![0.0; machine.n_dofs()];
    for (eq, &d) in dofs.dof.iter().enumerate() {
        lambda[d] = x[eq];
    }
    Ok(lambda)
}

/// Adds -lambda^T dR/dX elementwise. R(X, u) = K(X, u) - b(X): the
/// stiffness depends on rho_nu through the interpolated reluctivity, the
/// magnet source on rho_nu (its amplitude rides on f_nu(1 - rho_nu)) and
/// on the magnetization vector.
fn accumulate_partials(
    machine: &Machine,
    asm: &Assembly,
    design: &PhysicalDesign,
    sol: &StateSolution,
    lambda: &[f64],
    grad: &mut PhysicalGradient,
) {
    let (sin_t, cos_t) = sol.theta.sin_cos();
    let m_max = machine.magnet.m_max;
    for di in 0..design.len() {
        let (dofs, grads, area) = asm.design_element(di);
        let mut gu = [0.0; 2];
        let mut gl = [0.0; 2];
        for a in 0..3 {
            gu[0] += grads[a][0] * sol.u[dofs[a]];
            gu[1] += grads[a][1] * sol.u[dofs[a]];
            gl[0] += grads[a][0] * lambda[dofs[a]];
            gl[1] += grads[a][1] * lambda[dofs[a]];
        }
        let b = (gu[0] * gu[0] + gu[1] * gu[1]).sqrt();
        let rho = design.rho_nu[di];
        let m = design.mag[di];
        let r = (m[0] * m[0] + m[1] * m[1]).sqrt();

        // f_M(r)/r and its radial derivative, with the r -> 0 limits
        // f_M(r)/r -> f_M'(0) and (f_M(r)/r)' -> 0.
        let (c, c_prime) = if r < MAG_EPS {
            (machine.f_mag.derivative(0.0), 0.0)
        } else {
            let v = machine.f_mag.value(r);
            let d = machine.f_mag.derivative(r);
            (v / r, (d * r - v) / (r * r))
        };

        // Stiffness: d nu / d rho_nu = f_nu'(rho) (nu_iron(B) - nu0).
        let dk = area
            * machine.f_nu.derivative(rho)
            * (machine.iron.reluctivity(b) - NU0)
            * (gu[0] * gl[0] + gu[1] * gl[1]);

        // Magnet amplitude: source scale f_nu(1 - rho) M_max f_M(r)/r.
        // q is grad lambda rotated back into the rotor frame, so that
        // (R_theta perp(m)) . grad lambda = perp(m) . q.
        let q = [
            cos_t * gl[0] + sin_t * gl[1],
            -sin_t * gl[0] + cos_t * gl[1],
        ];
        let perp_dot_q = -m[1] * q[0] + m[0] * q[1];
        let db_drho = -area * machine.f_nu.derivative(1.0 - rho) * m_max * c * perp_dot_q;
        grad.d_rho_nu[di] -= dk - db_drho;

        // Magnet direction/amplitude through the vector itself.
        let coef = area * machine.f_nu.value(1.0 - rho) * m_max;
        let mut db_dm = [coef * c * q[1], -coef * c * q[0]];
        if r >= MAG_EPS {
            let radial = coef * c_prime * perp_dot_q / r;
            db_dm[0] += radial * m[0];
            db_dm[1] += radial * m[1];
        }
        grad.d_mag[di][0] += db_dm[0];
        grad.d_mag[di][1] += db_dm[1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{DensityField, MachineConfig};
    use crate::geometry::MeshParams;
    use crate::materials::IronModel;

    fn test_machine(linear: bool) -> Machine {
        let mut cfg = MachineConfig::default();
        cfg.mesh = MeshParams {
            target_h: 3.9e-3,
            n_phi_rotor: Some(32),
            n_phi_stator: Some(48),
            radial_scale: 1.6,
        };
        if linear {
            cfg.iron = IronModel::Linear { nu: NU0 / 1000.0 };
        }
        // Tight Newton tolerance so central differences of the torque are
        // not polluted by solver error.
        cfg.solve.tol_rel = 1e-12;
        cfg
            .solve
            .tol_abs = 1e-14;
        Machine::build(&cfg).unwrap()
    }

    fn test_design(n: usize) -> PhysicalDesign {
        let mut f = DensityField::gray(n);
        for e in 0..n {
            f.rho_nu[e] = 0.25 + 0.5 * ((e % 11) as f64 / 10.0);
            f.rho_mx[e] = 0.3 + 0.4 * ((e % 7) as f64 / 6.0);
            f.rho_my[e] = 0.3 + 0.4 * ((e % 5) as f64 / 4.0);
        }
        PhysicalDesign::from_field(&f)
    }

    /// Central-difference check of the single-position torque gradient on a
    /// spread of elements and all three channels.
    fn check_fd(linear: bool, theta: f64, tol: f64) {
        let machine = test_machine(linear);
        let arkkio = ArkkioEvaluator::new(&machine);
        let n = machine.n_design();
        let design = test_design(n);
        let base = machine.solve_state(&design, theta, None).unwrap();
        let grad = single_angle_torque_gradient(&machine, &arkkio, &design, &base).unwrap();

        let torque_of = |d: &PhysicalDesign| -> f64 {
            let sol = machine.solve_state(d, theta, Some(&base)).unwrap();
            arkkio.torque_of(&machine, &sol)
        };

        let eps = 1e-6;
        let picks: Vec<usize> = (0..6).map(|k| k * (n - 1) / 5).collect();
        let mut worst: f64 = 0.0;
        for &e in &picks {
            for ch in 0..3 {
                let (dp, dm, analytic) = if ch == 0 {
                    let mut rp = design.rho_nu.clone();
                    let mut rm = design.rho_nu.clone();
                    rp[e] += eps;
                    rm[e] -= eps;
                    (
                        PhysicalDesign::new(rp, design.mag.clone()),
                        PhysicalDesign::new(rm, design.mag.clone()),
                        grad.d_rho_nu[e],
                    )
                } else {
                    let mut mp = design.mag.clone();
                    let mut mm = design.mag.clone();
                    mp[e][ch - 1] += eps;
                    mm[e][ch - 1] -= eps;
                    (
                        PhysicalDesign::new(design.rho_nu.clone(), mp),
                        PhysicalDesign::new(design.rho_nu.clone(), mm),
                        grad.d_mag[e][ch - 1],
                    )
                };
                let fd = (torque_of(&dp) - torque_of(&dm)) / (2.0 * eps);
                let denom = fd.abs().max(analytic.abs()).max(1e-8);
                let rel = (fd - analytic).abs() / denom;
                worst = worst.max(rel);
                assert!(
                    rel < tol,
                    "element {e} channel {ch}: analytic {analytic:.6e}, fd {fd:.6e}, rel {rel:.2e}"
                );
            }
        }
        println!("worst relative deviation: {worst:.2e}");
    }

    #[test]
    fn gradient_matches_fd_linear_iron() {
        check_fd(true, 0.0, 1e-5);
    }

    #[test]
    fn gradient_matches_fd_nonlinear_iron() {
        check_fd(false, std::f64::consts::PI / 12.0, 1e-3);
    }

    #[test]
    fn stale_states_are_rejected() {
        let machine = test_machine(true);
        let arkkio = ArkkioEvaluator::new(&machine);
        let n = machine.n_design();
        let design = test_design(n);
        let sols = machine.solve_four_positions(&design, None).unwrap();
        let other = PhysicalDesign::from_field(&DensityField::gray(n));
        let err = torque_gradient(&machine, &arkkio, &other, &sols).unwrap_err();
        assert!(matches!(err, Error::StaleState));
    }

    #[test]
    fn four_position_gradient_is_the_weighted_mean() {
        let machine = test_machine(true);
        let arkkio = ArkkioEvaluator::new(&machine);
        let design = test_design(machine.n_design());
        let sols = machine.solve_four_positions(&design, None).unwrap();
        let total = torque_gradient(&machine, &arkkio, &design, &sols).unwrap();
        let mut manual = PhysicalGradient::zeros(design.len());
        for sol in &sols {
            let g = single_angle_torque_gradient(&machine, &arkkio, &design, sol).unwrap();
            for e in 0..design.len() {
                manual.d_rho_nu[e] += 0.25 * g.d_rho_nu[e];
                manual.d_mag[e][0] += 0.25 * g.d_mag[e][0];
                manual.d_mag[e][1] += 0.25 * g.d_mag[e][1];
            }
        }
        for e in 0..design.len() {
            assert!((total.d_rho_nu[e] - manual.d_rho_nu[e]).abs() < 1e-12);
            assert!((total.d_mag[e][0] - manual.d_mag[e][0]).abs() < 1e-12);
            assert!((total.d_mag[e][1] - manual.d_mag[e][1]).abs() < 1e-12);
        }
    }
}
