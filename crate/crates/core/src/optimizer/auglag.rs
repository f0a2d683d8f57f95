//! Volume constraints via an augmented Lagrangian.
//!
//! Each inequality constraint h >= 0 enters the objective through the
//! scalar function `psi(h, sigma, mu)`: a shifted quadratic penalty while
//! the constraint is active (h <= mu*sigma), constant once there is enough
//! slack so that satisfied constraints stop pulling on the design.
//! Multiplier and penalty updates follow the LANCELOT method-of-multipliers
//! schedule.

use crate::error::{Error, Result};

/// Penalty term for one inequality constraint h >= 0 with multiplier
/// estimate `sigma` and penalty parameter `mu_pen`.
pub fn psi(t: f64, sigma: f64, mu_pen: f64) -> f64 {
    if t - mu_pen * sigma <= 0.0 {
        -sigma * t + t * t / (2.0 * mu_pen)
    } else {
        -mu_pen * sigma * sigma / 2.0
    }
}

/// d psi / dt. Zero on the slack branch, so inactive constraints apply no
/// pull on the gradient.
pub fn psi_prime(t: f64, sigma: f64, mu_pen: f64) -> f64 {
    if t - mu_pen * sigma <= 0.0 {
        -sigma + t / mu_pen
    } else {
        0.0
    }
}

/// Multiplier estimates and penalty parameter for the two volume
/// constraints, together with the volume bounds they enforce:
///
/// * iron:   I_vol(rho_nu) <= f_vf
/// * magnet: I_vol((1 - rho_nu)|M|) <= f_vmag
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugLagState {
    /// Multiplier estimate on the iron volume constraint.
    pub gamma_f: f64,
    /// Multiplier estimate on the magnet volume constraint.
    pub gamma_mag: f64,
    /// Quadratic penalty parameter shared by both constraints.
    pub mu_pen: f64,
    /// Iron volume fraction bound.
    pub f_vf: f64,
    /// Magnet volume fraction bound.
    pub f_vmag: f64,
    /// Worst constraint violation seen at the previous multiplier update,
    /// used to decide whether the penalty parameter must tighten.
    last_violation: Option<f64>,
}

impl AugLagState {
    /// Fresh state with zero multipliers and unit penalty.
    pub fn new(f_vf: f64, f_vmag: f64, mu_pen: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&f_vf) || !(0.0..=1.0).contains(&f_vmag) {
            return Err(Error::Config(format!(
                "volume bounds must lie in [0,1], got f_vf={f_vf}, f_vmag={f_vmag}"
            )));
        }
        if !(mu_pen > 0.0) {
            return Err(Error::Config(format!(
                "penalty parameter must be positive, got {mu_pen}"
            )));
        }
        Ok(AugLagState {
            gamma_f: 0.0,
            gamma_mag: 0.0,
            mu_pen,
            f_vf,
            f_vmag,
            last_violation: None,
        })
    }

    /// Sum of both constraint terms for slacks h_vf, h_vmag.
    pub fn penalty_terms(&self, h_vf: f64, h_vmag: f64) -> f64 {
        psi(h_vf, self.gamma_f, self.mu_pen) + psi(h_vmag, self.gamma_mag, self.mu_pen)
    }

    /// First-order multiplier update, plus the penalty tightening rule:
    /// halve mu when the violation failed to shrink by a factor 0.9 since
    /// the previous update.
    pub fn update(&mut self, h_vf: f64, h_vmag: f64) {
        self.gamma_f = (self.gamma_f - h_vf / self.mu_pen).max(0.0);
        self.gamma_mag = (self.gamma_mag - h_vmag / self.mu_pen).max(0.0);
        let violation = (-h_vf).max(0.0).max((-h_vmag).max(0.0));
        if let Some(prev) = self.last_violation {
            if prev > 0.0 && violation > 0.9 * prev {
                self.mu_pen *= 0.5;
            }
        }
        self.last_violation = Some(violation);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn psi_reference_values() {
        // active branch: -sigma*t + t^2/2mu
        assert!((psi(-1.0, 1.0, 1.0) - 1.5).abs() < 1e-15);
        // t = 0 sits on the active branch and both terms vanish
        for &(sigma, mu) in &[(0.0, 1.0), (2.0, 0.5), (0.3, 3.0)] {
            assert_eq!(psi(0.0, sigma, mu), 0.0);
        }
    }

    #[test]
    fn psi_branches_agree_at_the_switch() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let sigma: f64 = rng.random_range(0.0..5.0);
            let mu: f64 = rng.random_range(0.01..2.0);
            let t = mu * sigma;
            let active = -sigma * t + t * t / (2.0 * mu);
            let slack = -mu * sigma * sigma / 2.0;
            assert!(
                (active - slack).abs() <= 1e-12 * (1.0 + slack.abs()),
                "branch mismatch at sigma={sigma}, mu={mu}: {active} vs {slack}"
            );
        }
    }

    #[test]
    fn psi_prime_matches_finite_differences() {
        let h = 1e-6;
        for &(t, sigma, mu) in &[(-0.4, 1.2, 0.7), (0.1, 0.8, 1.5), (3.0, 0.5, 1.0)] {
            // keep the stencil away from the branch switch
            let fd = (psi(t + h, sigma, mu) - psi(t - h, sigma, mu)) / (2.0 * h);
            let an = psi_prime(t, sigma, mu);
            assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "t={t}: {fd} vs {an}");
        }
    }

    #[test]
    fn psi_prime_is_zero_on_the_slack_branch() {
        assert_eq!(psi_prime(2.0, 1.0, 1.0), 0.0);
        // sigma = 0: any positive slack is inactive, violation is active
        assert_eq!(psi_prime(0.1, 0.0, 1.0), 0.0);
        assert_eq!(psi_prime(-0.2, 0.0, 1.0), -0.2);
    }

    #[test]
    fn violated_constraint_raises_the_multiplier() {
        let mut st = AugLagState::new(0.4, 0.15, 1.0).unwrap();
        st.update(-0.1, 0.2);
        assert!((st.gamma_f - 0.1).abs() < 1e-15);
        // satisfied magnet constraint with slack: max(0 - 0.2, 0) = 0
        assert_eq!(st.gamma_mag, 0.0);
    }

    #[test]
    fn stale_violation_halves_the_penalty() {
        let mut st = AugLagState::new(0.4, 0.15, 1.0).unwrap();
        st.update(-0.1, 0.0);
        assert_eq!(st.mu_pen, 1.0); // first update has no history
        st.update(-0.1, 0.0);
        assert_eq!(st.mu_pen, 0.5);
        st.update(-0.1, 0.0);
        assert_eq!(st.mu_pen, 0.25);
        // a clear improvement keeps the penalty where it is
        st.update(-0.01, 0.0);
        assert_eq!(st.mu_pen, 0.25);
    }

    #[test]
    fn invalid_bounds_are_rejected() {
        assert!(AugLagState::new(1.2, 0.1, 1.0).is_err());
        assert!(AugLagState::new(0.4, -0.1, 1.0).is_err());
        assert!(AugLagState::new(0.4, 0.1, 0.0).is_err());
    }
}
