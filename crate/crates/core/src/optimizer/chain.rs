//! The raw-to-physical design chain.
//!
//! Raw densities pass through three stages before the solver sees them:
//! Helmholtz filtering on all three channels, the square-to-disk map from
//! the magnet density pair to a magnetization vector, and the tanh
//! projection. Projection acts on the iron density and on the
//! magnetization *magnitude* only; projecting the magnet pair per channel
//! would bend the direction, which is exactly what the magnitude/direction
//! split avoids.
//!
//! [`DesignChain::evaluate`] keeps every intermediate field so that
//! [`DesignChain::pull_back`] can push gradients through the same chain:
//! analytic projection derivatives, the per-element 2x2 Jacobian of the
//! disk map, and the transposed filter solve.

use crate::error::{Error, Result};
use crate::fem::{DensityField, Machine, PhysicalDesign};
use crate::materials::{square_to_disk, square_to_disk_jacobian, MAG_EPS};

use super::filter::{tanh_projection, tanh_projection_derivative, HelmholtzFilter};
use super::FilterParams;

/// Gradient of a scalar objective with respect to the raw design
/// densities, one entry per channel per design element.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignGradient {
    pub g_rho_nu: Vec<f64>,
    pub g_mx: Vec<f64>,
    pub g_my: Vec<f64>,
}

impl DesignGradient {
    pub fn zeros(n: usize) -> Self {
        DesignGradient {
            g_rho_nu: vec![0.0; n],
            g_mx: vec![0.0; n],
            g_my: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.g_rho_nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g_rho_nu.is_empty()
    }

    pub fn norm_inf(&self) -> f64 {
        [&self.g_rho_nu, &self.g_mx, &self.g_my]
            .iter()
            .flat_map(|ch| ch.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Every intermediate of one chain evaluation, ending in the fields the
/// state solver consumes.
#[derive(Debug, Clone)]
pub struct ChainEval {
    /// Filtered iron density, before projection.
    pub rho_nu_tilde: Vec<f64>,
    /// Filtered magnet densities, still in square coordinates.
    pub rho_mx_tilde: Vec<f64>,
    pub rho_my_tilde: Vec<f64>,
    /// Disk-mapped magnetization before the magnitude projection.
    pub m_tilde: Vec<[f64; 2]>,
    pub r_tilde: Vec<f64>,
    /// Projected magnetization magnitude |M|; equals `r_tilde` when the
    /// projection is disabled.
    pub mag_norm: Vec<f64>,
    pub physical: PhysicalDesign,
}

/// Filter + map + projection pipeline with the smoothing operator
/// factorized once.
pub struct DesignChain {
    filter: Option<HelmholtzFilter>,
    beta: Option<f64>,
    rho_cut: f64,
    magnets: bool,
    n: usize,
}

impl DesignChain {
    /// Chain for a machine: filter radius `delta * target_h`, projection
    /// at the configured initial sharpness (or off entirely).
    pub fn new(machine: &Machine, params: &FilterParams, magnets: bool) -> Result<Self> {
        let radius = params.delta * machine.mesh_params().target_h;
        if params.delta < 0.0 {
            return Err(Error::Config(format!(
                "filter radius multiplier must be >= 0, got {}",
                params.delta
            )));
        }
        let filter = if radius > 0.0 {
            Some(HelmholtzFilter::new(machine.design_mesh(), radius)?)
        } else {
            None
        };
        Ok(DesignChain {
            filter,
            beta: params.projection.then_some(params.beta0),
            rho_cut: params.rho_cut,
            magnets,
            n: machine.n_design(),
        })
    }

    /// No filtering, no projection: raw densities map straight to physical
    /// fields. The baseline for finite-difference checks.
    pub fn identity(n: usize, magnets: bool) -> Self {
        DesignChain {
            filter: None,
            beta: None,
            rho_cut: 0.5,
            magnets,
            n,
        }
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    /// Swap the projection sharpness (continuation) or disable projection.
    pub fn set_beta(&mut self, beta: Option<f64>) {
        self.beta = beta;
    }

    pub fn magnets_enabled(&self) -> bool {
        self.magnets
    }

    fn project(&self, v: f64) -> f64 {
        match self.beta {
            Some(b) => tanh_projection(v, b, self.rho_cut),
            None => v,
        }
    }

    fn project_derivative(&self, v: f64) -> f64 {
        match self.beta {
            Some(b) => tanh_projection_derivative(v, b, self.rho_cut),
            None => 1.0,
        }
    }

    pub fn evaluate(&self, x: &DensityField) -> Result<ChainEval> {
        x.validate(self.n)?;
        let smooth = |raw: &[f64]| -> Result<Vec<f64>> {
            match &self.filter {
                Some(f) => {
                    let mut v = f.apply(raw)?;
                    // hairline overshoot from obtuse triangles gets snapped
                    for w in v.iter_mut() {
                        *w = w.clamp(0.0, 1.0);
                    }
                    Ok(v)
                }
                None => Ok(raw.to_vec()),
            }
        };
        let rho_nu_tilde = smooth(&x.rho_nu)?;
        let (rho_mx_tilde, rho_my_tilde) = if self.magnets {
            (smooth(&x.rho_mx)?, smooth(&x.rho_my)?)
        } else {
            (vec![0.5; self.n], vec![0.5; self.n])
        };

        let mut m_tilde = vec![[0.0f64; 2]; self.n];
        let mut r_tilde = vec![0.0f64; self.n];
        let mut mag_norm = vec![0.0f64; self.n];
        let mut mag = vec![[0.0f64; 2]; self.n];
        if self.magnets {
            for i in 0..self.n {
                let q = [
                    2.0 * (rho_mx_tilde[i] - 0.5),
                    2.0 * (rho_my_tilde[i] - 0.5),
                ];
                let mt = square_to_disk(q);
                let r = (mt[0] * mt[0] + mt[1] * mt[1]).sqrt();
                m_tilde[i] = mt;
                r_tilde[i] = r;
                if r < MAG_EPS {
                    continue; // keeps |M| = 0 and M = 0
                }
                let r_hat = self.project(r);
                mag_norm[i] = r_hat;
                mag[i] = if self.beta.is_some() {
                    [mt[0] * r_hat / r, mt[1] * r_hat / r]
                } else {
                    mt
                };
            }
        }
        let rho_nu_hat: Vec<f64> = rho_nu_tilde.iter().map(|&v| self.project(v)).collect();
        Ok(ChainEval {
            rho_nu_tilde,
            rho_mx_tilde,
            rho_my_tilde,
            m_tilde,
            r_tilde,
            mag_norm,
            physical: PhysicalDesign::new(rho_nu_hat, mag),
        })
    }

    /// Pull a physical-space gradient back to the raw densities.
    ///
    /// Inputs are the partials with respect to the projected iron density,
    /// the magnetization vector, and the projected magnitude |M| (the
    /// volume and penalty terms act on the magnitude directly; the torque
    /// acts on the vector).
    pub fn pull_back(
        &self,
        eval: &ChainEval,
        d_rho_hat: &[f64],
        d_mag_hat: &[[f64; 2]],
        d_mag_norm: &[f64],
    ) -> Result<DesignGradient> {
        assert_eq!(d_rho_hat.len(), self.n);
        assert_eq!(d_mag_hat.len(), self.n);
        assert_eq!(d_mag_norm.len(), self.n);

        let mut g_nu = vec![0.0f64; self.n];
        let mut g_mx = vec![0.0f64; self.n];
        let mut g_my = vec![0.0f64; self.n];
        for i in 0..self.n {
            g_nu[i] = self.project_derivative(eval.rho_nu_tilde[i]) * d_rho_hat[i];
            if !self.magnets {
                continue;
            }
            let mt = eval.m_tilde[i];
            let r = eval.r_tilde[i];
            let gm = d_mag_hat[i];
            // M = (P(r)/r) m_tilde: product rule splits into the isotropic
            // part s*g and the radial part, plus the direct |M| channel.
            let (gx, gy) = if r < MAG_EPS {
                // s(r) -> P'(0) as r -> 0; the magnitude channel is a cone
                // tip here, so its subgradient contribution is dropped.
                let s = self.project_derivative(0.0);
                (s * gm[0], s * gm[1])
            } else {
                let p = self.project(r);
                let pp = self.project_derivative(r);
                let s = p / r;
                let sp = (pp * r - p) / (r * r);
                let mdot = mt[0] * gm[0] + mt[1] * gm[1];
                let radial = sp * mdot / r + d_mag_norm[i] * pp / r;
                (s * gm[0] + radial * mt[0], s * gm[1] + radial * mt[1])
            };
            let q = [
                2.0 * (eval.rho_mx_tilde[i] - 0.5),
                2.0 * (eval.rho_my_tilde[i] - 0.5),
            ];
            let j = square_to_disk_jacobian(q);
            g_mx[i] = 2.0 * (j[0][0] * gx + j[1][0] * gy);
            g_my[i] = 2.0 * (j[0][1] * gx + j[1][1] * gy);
        }

        match &self.filter {
            Some(f) => Ok(DesignGradient {
                g_rho_nu: f.apply_transpose(&g_nu)?,
                g_mx: if self.magnets {
                    f.apply_transpose(&g_mx)?
                } else {
                    g_mx
                },
                g_my: if self.magnets {
                    f.apply_transpose(&g_my)?
                } else {
                    g_my
                },
            }),
            None => Ok(DesignGradient {
                g_rho_nu: g_nu,
                g_mx,
                g_my,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{Machine, MachineConfig};
    use crate::geometry::MeshParams;

    fn coarse_machine() -> Machine {
        let cfg = MachineConfig {
            mesh: MeshParams {
                target_h: 3.9e-3,
                n_phi_rotor: Some(32),
                n_phi_stator: Some(48),
                radial_scale: 1.6,
            },
            ..MachineConfig::default()
        };
        Machine::build(&cfg).unwrap()
    }

    fn full_params() -> FilterParams {
        FilterParams {
            beta0: 8.0,
            ..FilterParams::default()
        }
    }

    fn varied_field(n: usize) -> DensityField {
        let mut x = DensityField::gray(n);
        for e in 0..n {
            x.rho_nu[e] = 0.2 + 0.6 * ((e % 9) as f64 / 8.0);
            x.rho_mx[e] = 0.25 + 0.5 * ((e % 7) as f64 / 6.0);
            x.rho_my[e] = 0.3 + 0.4 * ((e % 5) as f64 / 4.0);
        }
        x
    }

    #[test]
    fn identity_chain_reproduces_the_raw_design() {
        let n = 12;
        let x = varied_field(n);
        let chain = DesignChain::identity(n, true);
        let ev = chain.evaluate(&x).unwrap();
        let direct = PhysicalDesign::from_field(&x);
        assert_eq!(ev.physical.rho_nu, direct.rho_nu);
        for (a, b) in ev.physical.mag.iter().zip(&direct.mag) {
            assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn constants_survive_the_full_chain() {
        let m = coarse_machine();
        let chain = DesignChain::new(&m, &full_params(), true).unwrap();
        // 0.5 is the fixed point of the projection and of the filter
        let ev = chain.evaluate(&DensityField::gray(m.n_design())).unwrap();
        for i in 0..m.n_design() {
            assert!((ev.physical.rho_nu[i] - 0.5).abs() < 1e-10);
            assert!(ev.mag_norm[i].abs() < 1e-10);
        }
    }

    #[test]
    fn axis_aligned_magnet_keeps_its_direction() {
        let n = 6;
        let chain = DesignChain::identity(n, true);
        let mut x = DensityField::gray(n);
        x.rho_mx[2] = 1.0; // square coordinate (1, 0) -> disk point (1, 0)
        let ev = chain.evaluate(&x).unwrap();
        assert!((ev.physical.mag[2][0] - 1.0).abs() < 1e-15);
        assert_eq!(ev.physical.mag[2][1], 0.0);
        assert!((ev.mag_norm[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn disabled_magnets_produce_no_magnetization() {
        let n = 8;
        let chain = DesignChain::identity(n, false);
        let mut x = varied_field(n);
        x.rho_mx[3] = 1.0;
        let ev = chain.evaluate(&x).unwrap();
        for i in 0..n {
            assert_eq!(ev.physical.mag[i], [0.0, 0.0]);
            assert_eq!(ev.mag_norm[i], 0.0);
        }
        let g = chain
            .pull_back(&ev, &vec![1.0; n], &vec![[1.0, 1.0]; n], &vec![1.0; n])
            .unwrap();
        assert!(g.g_mx.iter().chain(&g.g_my).all(|&v| v == 0.0));
    }

    /// Finite-difference check of the whole pull-back against a synthetic
    /// functional J = sum(w rho_hat + v . M + z |M|), with filtering and a
    /// sharp projection both enabled.
    #[test]
    fn pull_back_matches_finite_differences() {
        let m = coarse_machine();
        let n = m.n_design();
        let chain = DesignChain::new(&m, &full_params(), true).unwrap();
        let x = varied_field(n);

        let w: Vec<f64> = (0..n).map(|e| ((e * 31 % 13) as f64 / 12.0) - 0.4).collect();
        let v: Vec<[f64; 2]> = (0..n)
            .map(|e| {
                [
                    ((e * 17 % 11) as f64 / 10.0) - 0.6,
                    ((e * 23 % 7) as f64 / 6.0) - 0.3,
                ]
            })
            .collect();
        let z: Vec<f64> = (0..n).map(|e| ((e * 41 % 9) as f64 / 8.0) - 0.5).collect();
        let j_of = |ev: &ChainEval| -> f64 {
            (0..n)
                .map(|i| {
                    w[i] * ev.physical.rho_nu[i]
                        + v[i][0] * ev.physical.mag[i][0]
                        + v[i][1] * ev.physical.mag[i][1]
                        + z[i] * ev.mag_norm[i]
                })
                .sum()
        };

        let ev = chain.evaluate(&x).unwrap();
        let mut d_mag = vec![[0.0; 2]; n];
        for i in 0..n {
            d_mag[i] = v[i];
        }
        let g = chain.pull_back(&ev, &w, &d_mag, &z).unwrap();

        let h = 1e-6;
        let probe = [0usize, n / 5, n / 3, n / 2, 2 * n / 3, n - 1];
        for &i in &probe {
            for ch in 0..3 {
                let mut up = x.clone();
                let mut dn = x.clone();
                let (raw_up, raw_dn, an) = match ch {
                    0 => (&mut up.rho_nu, &mut dn.rho_nu, g.g_rho_nu[i]),
                    1 => (&mut up.rho_mx, &mut dn.rho_mx, g.g_mx[i]),
                    _ => (&mut up.rho_my, &mut dn.rho_my, g.g_my[i]),
                };
                raw_up[i] += h;
                raw_dn[i] -= h;
                let fd = (j_of(&chain.evaluate(&up).unwrap())
                    - j_of(&chain.evaluate(&dn).unwrap()))
                    / (2.0 * h);
                let scale = fd.abs().max(an.abs()).max(1e-10);
                assert!(
                    (fd - an).abs() / scale < 1e-5,
                    "element {i} channel {ch}: fd {fd} vs analytic {an}"
                );
            }
        }
    }

    /// Perturbing the magnet pair tangentially to a disk radius leaves |M|
    /// unchanged to first order, so the magnitude-driven part of the
    /// gradient must be orthogonal to that tangent.
    #[test]
    fn magnitude_gradient_is_radial() {
        let n = 4;
        let chain = DesignChain::identity(n, true);
        let mut x = DensityField::gray(n);
        x.rho_mx[1] = 0.7;
        x.rho_my[1] = 0.55;
        let ev = chain.evaluate(&x).unwrap();

        // gradient fed only through the |M| channel
        let g = chain
            .pull_back(&ev, &vec![0.0; n], &vec![[0.0, 0.0]; n], &vec![1.0; n])
            .unwrap();
        let gv = [g.g_mx[1], g.g_my[1]];

        // independent radial direction: grad |m| = 2 J^T m/r
        let q = [2.0 * (0.7 - 0.5), 2.0 * (0.55 - 0.5)];
        let j = square_to_disk_jacobian(q);
        let mt = square_to_disk(q);
        let r = (mt[0] * mt[0] + mt[1] * mt[1]).sqrt();
        let rad = [
            2.0 * (j[0][0] * mt[0] + j[1][0] * mt[1]) / r,
            2.0 * (j[0][1] * mt[0] + j[1][1] * mt[1]) / r,
        ];
        let tangent = [-rad[1], rad[0]];

        let norm = (gv[0] * gv[0] + gv[1] * gv[1]).sqrt();
        let along = (gv[0] * tangent[0] + gv[1] * tangent[1]).abs()
            / (tangent[0] * tangent[0] + tangent[1] * tangent[1]).sqrt();
        assert!(norm > 0.0);
        assert!(along / norm < 1e-6, "tangential leak {}", along / norm);
    }

    #[test]
    fn beta_swap_changes_only_the_projection() {
        let m = coarse_machine();
        let n = m.n_design();
        let mut chain = DesignChain::new(&m, &full_params(), true).unwrap();
        let x = varied_field(n);
        let soft = chain.evaluate(&x).unwrap();
        chain.set_beta(Some(16.0));
        let hard = chain.evaluate(&x).unwrap();
        // filtered intermediates identical, projected outputs differ
        assert_eq!(soft.rho_nu_tilde, hard.rho_nu_tilde);
        assert_eq!(soft.r_tilde, hard.r_tilde);
        let moved = (0..n).any(|i| {
            (soft.physical.rho_nu[i] - hard.physical.rho_nu[i]).abs() > 1e-6
        });
        assert!(moved);
    }
}
