//! Projected-gradient design optimization of the averaged torque under
//! iron and magnet volume constraints.
//!
//! The objective is the augmented Lagrangian
//!
//! ```text
//! L = -T_bar + psi(h_vf) + psi(h_vmag) + I_gamma
//! ```
//!
//! where `h_vf = f_vf - I_vol(rho_nu)` and
//! `h_vmag = f_vmag - I_vol((1 - rho_nu)|M|)` are the constraint slacks on
//! the filtered-projected fields (the same fields the state solver sees),
//! and `I_gamma` optionally penalizes intermediate material. Each iteration
//! solves the four rotor positions, forms the adjoint torque gradient,
//! pulls it back through the design chain, and walks along the normalized
//! projected gradient with a backtracking line search that insists on a
//! strict descent of `L`. Multipliers update on the LANCELOT schedule every
//! `k_outer` iterations, and the projection sharpness follows a doubling
//! continuation so early iterations stay smooth.

mod auglag;
mod chain;
mod filter;

pub use auglag::{psi, psi_prime, AugLagState};
pub use chain::{ChainEval, DesignChain, DesignGradient};
pub use filter::{
    intermediate_penalty, intermediate_penalty_gradient, tanh_projection,
    tanh_projection_derivative, volume_fraction, HelmholtzFilter,
};

use crate::error::{Error, Result};
use crate::fem::{DensityField, Machine, StateSolution};
use crate::sensitivity::torque_gradient;
use crate::torque::{four_point_torque, ArkkioEvaluator};

/// Regularization and descent-loop parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    /// Filter radius as a multiple of the mesh target edge length;
    /// zero disables filtering.
    pub delta: f64,
    /// Initial projection sharpness.
    pub beta0: f64,
    /// Continuation cap on the sharpness.
    pub beta_max: f64,
    /// Double beta every this many iterations (0 keeps it fixed).
    pub beta_double_every: usize,
    /// Disable to make the chain smooth for derivative checks.
    pub projection: bool,
    /// Projection threshold.
    pub rho_cut: f64,
    /// Intermediate-material penalty weight; zero disables the term.
    pub gamma_pen: f64,
    /// Initial step length in density units.
    pub step0: f64,
    /// Step growth after an immediately accepted trial.
    pub step_grow: f64,
    /// Line-search halvings before an iteration counts as stalled.
    pub max_halvings: usize,
    pub max_iters: usize,
    /// Stop when the projected gradient drops below this in sup norm.
    pub grad_tol: f64,
    /// Multiplier update period.
    pub k_outer: usize,
    /// Initial penalty parameter of the augmented Lagrangian.
    pub mu0: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            delta: 1.5,
            beta0: 4.0,
            beta_max: 16.0,
            beta_double_every: 50,
            projection: true,
            rho_cut: 0.5,
            gamma_pen: 0.0,
            step0: 0.05,
            step_grow: 1.2,
            max_halvings: 10,
            max_iters: 300,
            grad_tol: 1e-4,
            k_outer: 10,
            mu0: 1.0,
        }
    }
}

/// One optimization study: volume bounds, whether the magnet channels are
/// free, and the loop parameters.
#[derive(Debug, Clone)]
pub struct OptimizeConfig {
    /// Iron volume fraction bound.
    pub f_vf: f64,
    /// Magnet volume fraction bound.
    pub f_vmag: f64,
    /// Freeze the magnet channels for iron-only studies.
    pub magnets: bool,
    pub filter: FilterParams,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            f_vf: 0.4,
            f_vmag: 0.15,
            magnets: true,
            filter: FilterParams::default(),
        }
    }
}

/// Projection sharpness at a given iteration under the doubling schedule.
pub fn beta_at(p: &FilterParams, iter: usize) -> f64 {
    let doublings = if p.beta_double_every == 0 {
        0
    } else {
        (iter / p.beta_double_every) as i32
    };
    (p.beta0 * 2f64.powi(doublings)).min(p.beta_max)
}

/// Everything one evaluation of the augmented Lagrangian produces. The
/// multiplier-dependent value itself is assembled on demand by
/// [`lagrangian`](Self::lagrangian) so multiplier updates don't force a
/// re-solve.
#[derive(Debug, Clone)]
pub struct LagrangianEval {
    pub eval: ChainEval,
    pub states: Vec<StateSolution>,
    /// Four-position average torque.
    pub t_bar: f64,
    pub vol_iron: f64,
    pub vol_mag: f64,
    pub h_vf: f64,
    pub h_vmag: f64,
    pub i_gamma: f64,
}

impl LagrangianEval {
    pub fn lagrangian(&self, st: &AugLagState) -> f64 {
        -self.t_bar + st.penalty_terms(self.h_vf, self.h_vmag) + self.i_gamma
    }
}

/// A machine plus the fixed pieces of the optimization: torque evaluator,
/// design chain, element areas.
pub struct OptimizeProblem<'a> {
    machine: &'a Machine,
    arkkio: ArkkioEvaluator,
    chain: DesignChain,
    gamma_pen: f64,
    areas: Vec<f64>,
    v_rot: f64,
}

impl<'a> OptimizeProblem<'a> {
    pub fn new(machine: &'a Machine, cfg: &OptimizeConfig) -> Result<Self> {
        let arkkio = ArkkioEvaluator::new(machine);
        let chain = DesignChain::new(machine, &cfg.filter, cfg.magnets)?;
        let areas = machine.design_areas();
        let v_rot = areas.iter().sum();
        Ok(OptimizeProblem {
            machine,
            arkkio,
            chain,
            gamma_pen: cfg.filter.gamma_pen,
            areas,
            v_rot,
        })
    }

    pub fn chain(&self) -> &DesignChain {
        &self.chain
    }

    pub fn set_beta(&mut self, beta: Option<f64>) {
        self.chain.set_beta(beta);
    }

    /// Run the chain, solve the four rotor positions, and gather all the
    /// Lagrangian ingredients.
    pub fn evaluate(
        &self,
        st: &AugLagState,
        x: &DensityField,
        warm: Option<&[StateSolution]>,
    ) -> Result<LagrangianEval> {
        let eval = self.chain.evaluate(x)?;
        let four = four_point_torque(self.machine, &self.arkkio, &eval.physical, warm)?;
        let vol_iron = volume_fraction(&eval.physical.rho_nu, &self.areas);
        let mag_density: Vec<f64> = eval
            .physical
            .rho_nu
            .iter()
            .zip(&eval.mag_norm)
            .map(|(&rho, &m)| (1.0 - rho) * m)
            .collect();
        let vol_mag = volume_fraction(&mag_density, &self.areas);
        let i_gamma = intermediate_penalty(&eval.physical.rho_nu, &self.areas, self.v_rot, self.gamma_pen)
            + intermediate_penalty(&eval.mag_norm, &self.areas, self.v_rot, self.gamma_pen);
        Ok(LagrangianEval {
            t_bar: four.average,
            states: four.states,
            eval,
            vol_iron,
            vol_mag,
            h_vf: st.f_vf - vol_iron,
            h_vmag: st.f_vmag - vol_mag,
            i_gamma,
        })
    }

    /// Full gradient of the augmented Lagrangian with respect to the raw
    /// densities: adjoint torque gradient plus the analytic constraint and
    /// penalty partials, pulled back through projection, disk map, and
    /// filter.
    pub fn lagrangian_gradient(
        &self,
        st: &AugLagState,
        ev: &LagrangianEval,
    ) -> Result<DesignGradient> {
        let gt = torque_gradient(self.machine, &self.arkkio, &ev.eval.physical, &ev.states)?;
        let n = self.areas.len();
        let ppf = psi_prime(ev.h_vf, st.gamma_f, st.mu_pen);
        let ppm = psi_prime(ev.h_vmag, st.gamma_mag, st.mu_pen);
        let mut d_rho_hat = vec![0.0f64; n];
        let mut d_mag_hat = vec![[0.0f64; 2]; n];
        let mut d_mag_norm = vec![0.0f64; n];
        for i in 0..n {
            let a = self.areas[i];
            let rho = ev.eval.physical.rho_nu[i];
            let m = ev.eval.mag_norm[i];
            // h_vf = f_vf - sum a rho / V, h_vmag = f_vmag - sum a (1-rho) m / V
            d_rho_hat[i] = -gt.d_rho_nu[i] - ppf * a / self.v_rot + ppm * a * m / self.v_rot
                + intermediate_penalty_gradient(rho, a, self.v_rot, self.gamma_pen);
            d_mag_hat[i] = [-gt.d_mag[i][0], -gt.d_mag[i][1]];
            d_mag_norm[i] = -ppm * a * (1.0 - rho) / self.v_rot
                + intermediate_penalty_gradient(m, a, self.v_rot, self.gamma_pen);
        }
        self.chain.pull_back(&ev.eval, &d_rho_hat, &d_mag_hat, &d_mag_norm)
    }
}

/// Clip the gradient against the box [0,1]: components pointing out of the
/// feasible set at an active bound are zeroed so the step and the
/// stationarity test only see realizable descent directions.
pub fn projected_gradient(x: &DensityField, g: &DesignGradient) -> DesignGradient {
    let clip = |x: f64, g: f64| {
        if x <= 0.0 {
            g.min(0.0)
        } else if x >= 1.0 {
            g.max(0.0)
        } else {
            g
        }
    };
    let n = x.len();
    let mut out = DesignGradient::zeros(n);
    for i in 0..n {
        out.g_rho_nu[i] = clip(x.rho_nu[i], g.g_rho_nu[i]);
        out.g_mx[i] = clip(x.rho_mx[i], g.g_mx[i]);
        out.g_my[i] = clip(x.rho_my[i], g.g_my[i]);
    }
    out
}

/// Move every element by `s` along its normalized gradient 3-vector and
/// clamp back into the box. Elements with a negligible gradient stay put.
pub fn take_step(x: &DensityField, g: &DesignGradient, s: f64) -> DensityField {
    let mut out = x.clone();
    for i in 0..x.len() {
        let v = [g.g_rho_nu[i], g.g_mx[i], g.g_my[i]];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm < 1e-14 {
            continue;
        }
        out.rho_nu[i] = (x.rho_nu[i] - s * v[0] / norm).clamp(0.0, 1.0);
        out.rho_mx[i] = (x.rho_mx[i] - s * v[1] / norm).clamp(0.0, 1.0);
        out.rho_my[i] = (x.rho_my[i] - s * v[2] / norm).clamp(0.0, 1.0);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// Projected gradient below tolerance.
    GradientTolerance,
    MaxIterations,
    /// Two consecutive line searches found no descent.
    LineSearchStalled,
    /// A state or adjoint solve failed mid-run; the result carries the
    /// last accepted iterate and the history up to the failure.
    SolverFailure(String),
}

/// One line of the convergence history.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    pub lagrangian: f64,
    pub t_bar: f64,
    pub vol_iron: f64,
    pub vol_mag: f64,
    /// Step length used (last attempted when the search stalled, zero on
    /// the final stationary row).
    pub step: f64,
    pub grad_inf: f64,
}

#[derive(Debug)]
pub struct OptimizeResult {
    /// Raw densities of the last accepted iterate.
    pub design: DensityField,
    /// The matching filtered-projected fields.
    pub physical: crate::fem::PhysicalDesign,
    /// Converged states at the four rotor positions of `physical`.
    pub states: Vec<StateSolution>,
    pub history: Vec<HistoryRow>,
    pub termination: Termination,
    pub t_bar: f64,
    pub vol_iron: f64,
    pub vol_mag: f64,
    pub auglag: AugLagState,
}

pub fn optimize(
    machine: &Machine,
    start: &DensityField,
    cfg: &OptimizeConfig,
) -> Result<OptimizeResult> {
    optimize_with(machine, start, cfg, |_, _| {})
}

/// [`optimize`] with a per-iteration callback (history row plus the full
/// evaluation) for logging and snapshot export.
pub fn optimize_with(
    machine: &Machine,
    start: &DensityField,
    cfg: &OptimizeConfig,
    mut on_iter: impl FnMut(&HistoryRow, &LagrangianEval),
) -> Result<OptimizeResult> {
    let p = cfg.filter;
    let mut problem = OptimizeProblem::new(machine, cfg)?;
    let mut st = AugLagState::new(cfg.f_vf, cfg.f_vmag, p.mu0)?;
    let mut x = start.clone();
    let mut s = p.step0;
    let mut beta_now = problem.chain.beta();
    let mut cur = problem.evaluate(&st, &x, None)?;
    let mut history: Vec<HistoryRow> = Vec::new();
    let mut stalls = 0usize;
    let mut termination = Termination::MaxIterations;

    for iter in 0..p.max_iters {
        if p.projection {
            let b = Some(beta_at(&p, iter));
            if b != beta_now {
                beta_now = b;
                problem.set_beta(b);
                // sharper projection changes the physical fields, so the
                // reference value must be re-solved before comparing
                match problem.evaluate(&st, &x, Some(&cur.states)) {
                    Ok(ev) => cur = ev,
                    Err(e) => {
                        termination = Termination::SolverFailure(e.to_string());
                        break;
                    }
                }
            }
        }

        let g = match problem.lagrangian_gradient(&st, &cur) {
            Ok(g) => g,
            Err(e) => {
                termination = Termination::SolverFailure(e.to_string());
                break;
            }
        };
        let pg = projected_gradient(&x, &g);
        let ginf = pg.norm_inf();
        if ginf < p.grad_tol {
            let row = HistoryRow {
                iter,
                lagrangian: cur.lagrangian(&st),
                t_bar: cur.t_bar,
                vol_iron: cur.vol_iron,
                vol_mag: cur.vol_mag,
                step: 0.0,
                grad_inf: ginf,
            };
            on_iter(&row, &cur);
            history.push(row);
            termination = Termination::GradientTolerance;
            break;
        }

        let l_cur = cur.lagrangian(&st);
        let mut s_try = s;
        let mut s_used = s;
        let mut accepted = false;
        for k in 0..=p.max_halvings {
            let x_try = take_step(&x, &pg, s_try);
            s_used = s_try;
            match problem.evaluate(&st, &x_try, Some(&cur.states)) {
                Ok(ev) => {
                    if ev.lagrangian(&st) < l_cur {
                        x = x_try;
                        cur = ev;
                        accepted = true;
                        s = if k == 0 { s_try * p.step_grow } else { s_try };
                        break;
                    }
                }
                // a trial design the solver cannot handle is just a
                // rejected trial; the half-length retry stays near the
                // last good iterate
                Err(Error::NonConvergence { .. }) | Err(Error::SingularSystem) => {}
                Err(e) => return Err(e),
            }
            s_try *= 0.5;
        }
        if accepted {
            stalls = 0;
        } else {
            stalls += 1;
        }

        let row = HistoryRow {
            iter,
            lagrangian: cur.lagrangian(&st),
            t_bar: cur.t_bar,
            vol_iron: cur.vol_iron,
            vol_mag: cur.vol_mag,
            step: s_used,
            grad_inf: ginf,
        };
        on_iter(&row, &cur);
        history.push(row);

        if !accepted && stalls >= 2 {
            termination = Termination::LineSearchStalled;
            break;
        }
        if (iter + 1) % p.k_outer == 0 {
            st.update(cur.h_vf, cur.h_vmag);
        }
    }

    Ok(OptimizeResult {
        design: x,
        physical: cur.eval.physical.clone(),
        states: cur.states,
        history,
        termination,
        t_bar: cur.t_bar,
        vol_iron: cur.vol_iron,
        vol_mag: cur.vol_mag,
        auglag: st,
    })
}
