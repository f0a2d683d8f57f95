//! Material laws: the Marrocco reluctivity curve for laminated iron, the
//! density interpolation schemes used by the topology optimizer, and the
//! square-to-disk map that turns a pair of box-constrained densities into a
//! magnetization vector in the unit disk.
//!
//! Everything here is pointwise and allocation-free; the FEM assembly calls
//! these functions once per element per Newton iteration.

/// Vacuum reluctivity 1/mu0 in A/(V*s) ~ 7.9577e5.
pub const NU0: f64 = 1e7 / (4.0 * std::f64::consts::PI);

/// Magnitudes below this are treated as "no magnetization" to avoid
/// dividing by |M| when normalizing the direction.
pub const MAG_EPS: f64 = 1e-12;

/// Piecewise analytic reluctivity of laminated iron as a function of the
/// flux density magnitude B = |grad u|.
///
/// Three branches: a rational Marrocco fit up to `b_max`, the exponential
/// bridge `exp(gamma (B - beta)) / B` up to the saturation point `b_sat`,
/// and the asymptotic `nu0 * (1 - m_sat / B)` beyond. With
/// `m_sat = b_sat - 1/gamma` the bridge and the asymptote meet with equal
/// value and slope at `b_sat`; the junction at `b_max` is continuous to
/// the accuracy of the underlying fit (~1%). Values are clamped into
/// `[nu0 * eps, nu0)` so downstream code always sees a positive
/// reluctivity strictly below vacuum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarroccoCurve {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eps: f64,
    pub tau: f64,
    pub c: f64,
    /// Upper end of the rational branch, in tesla.
    pub b_max: f64,
}

impl Default for MarroccoCurve {
    /// Fitted coefficients for the laminated iron used throughout.
    fn default() -> Self {
        MarroccoCurve {
            alpha: 6.84,
            beta: -1.30e-1,
            gamma: 4.86,
            eps: 1.57e-4,
            tau: 4.14e3,
            c: 1.90e-2,
            b_max: 1.80,
        }
    }
}

impl MarroccoCurve {
    /// Lower clamp value, also the zero-field reluctivity `nu0 * eps`.
    pub fn nu_min(&self) -> f64 {
        NU0 * self.eps
    }

    /// Flux density where the exponential bridge hands over to the
    /// saturation branch: `beta + ln(nu0/gamma)/gamma`.
    pub fn b_sat(&self) -> f64 {
        self.beta + (NU0 / self.gamma).ln() / self.gamma
    }

    /// Saturation magnetization `b_sat - 1/gamma` of the asymptotic branch,
    /// the unique choice that joins it to the exponential bridge with
    /// matching value and slope.
    pub fn m_sat(&self) -> f64 {
        self.b_sat() - 1.0 / self.gamma
    }

    fn clamp(&self, raw: f64) -> f64 {
        raw.max(self.nu_min()).min(NU0 * (1.0 - 1e-12))
    }

    /// Reluctivity at flux density `b >= 0`.
    pub fn reluctivity(&self, b: f64) -> f64 {
        let raw = if b <= self.b_max {
            let p = b.powf(2.0 * self.alpha);
            NU0 * (self.eps + (self.c - self.eps) * p / (self.tau + p))
        } else if b <= self.b_sat() {
            (self.gamma * (b - self.beta)).exp() / b
        } else {
            NU0 * (1.0 - self.m_sat() / b)
        };
        self.clamp(raw)
    }

    /// Derivative d(nu)/dB. Uses the left branch at the junction points and
    /// returns 0 at B = 0 and wherever the value sits on a clamp.
    pub fn derivative(&self, b: f64) -> f64 {
        if b <= 0.0 {
            return 0.0;
        }
        if b <= self.b_max {
            let p = b.powf(2.0 * self.alpha);
            let q = self.tau + p;
            // d/dB [p/q] = tau * p' / q^2 with p' = 2 alpha p / B.
            NU0 * (self.c - self.eps) * self.tau * 2.0 * self.alpha * p / (b * q * q)
        } else if b <= self.b_sat() {
            let v = (self.gamma * (b - self.beta)).exp() / b;
            if self.clamp(v) != v {
                return 0.0;
            }
            v * (self.gamma - 1.0 / b)
        } else {
            let v = NU0 * (1.0 - self.m_sat() / b);
            if self.clamp(v) != v {
                return 0.0;
            }
            NU0 * self.m_sat() / (b * b)
        }
    }
}

/// Iron constitutive law used for the stator core and (scaled by the
/// interpolation) the rotor design material. The linear variant exists for
/// verification runs where a constant reluctivity makes the whole state
/// problem linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IronModel {
    Marrocco(MarroccoCurve),
    Linear { nu: f64 },
}

impl Default for IronModel {
    fn default() -> Self {
        IronModel::Marrocco(MarroccoCurve::default())
    }
}

impl IronModel {
    pub fn reluctivity(&self, b: f64) -> f64 {
        match self {
            IronModel::Marrocco(c) => c.reluctivity(b),
            IronModel::Linear { nu } => *nu,
        }
    }

    pub fn derivative(&self, b: f64) -> f64 {
        match self {
            IronModel::Marrocco(c) => c.derivative(b),
            IronModel::Linear { .. } => 0.0,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, IronModel::Linear { .. })
    }
}

/// Density interpolation f: [0,1] -> [0,1] with f(0) = 0 and f(1) = 1.
///
/// `Simp` is the classic power law, `Lukas` the arctan-based smoothed step,
/// and `TdHermite` the quadratic whose end slopes 2*nu0/(nu0+nu1) and
/// 2*nu1/(nu0+nu1) mirror the ratio of the two materials being blended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterpScheme {
    Simp { exponent: f64 },
    Lukas { lambda: f64 },
    TdHermite { nu1_over_nu0: f64 },
}

impl InterpScheme {
    /// Hermite-type interpolation between vacuum and the zero-field iron
    /// reluctivity `nu1 = nu0 * eps` of the default Marrocco curve.
    pub fn td_hermite_default() -> Self {
        InterpScheme::TdHermite {
            nu1_over_nu0: MarroccoCurve::default().eps,
        }
    }

    /// Smoothed step with the default steepness used for the magnetization
    /// magnitude.
    pub fn lukas_default() -> Self {
        InterpScheme::Lukas { lambda: 5.0 }
    }

    pub fn value(&self, rho: f64) -> f64 {
        match *self {
            InterpScheme::Simp { exponent } => rho.powf(exponent),
            InterpScheme::Lukas { lambda } => {
                0.5 * (1.0 + (lambda * (2.0 * rho - 1.0)).atan() / lambda.atan())
            }
            InterpScheme::TdHermite { nu1_over_nu0: k } => {
                (2.0 * rho - (1.0 - k) * rho * rho) / (1.0 + k)
            }
        }
    }

    pub fn derivative(&self, rho: f64) -> f64 {
        match *self {
            InterpScheme::Simp { exponent } => {
                if rho == 0.0 && exponent < 1.0 {
                    0.0
                } else {
                    exponent * rho.powf(exponent - 1.0)
                }
            }
            InterpScheme::Lukas { lambda } => {
                let t = lambda * (2.0 * rho - 1.0);
                lambda / ((1.0 + t * t) * lambda.atan())
            }
            InterpScheme::TdHermite { nu1_over_nu0: k } => {
                (2.0 - 2.0 * (1.0 - k) * rho) / (1.0 + k)
            }
        }
    }
}

/// Effective reluctivity of a rotor design element:
/// `nu0 + f(rho) * (nu_hat(B) - nu0)`.
pub fn interpolated_reluctivity(f_nu: &InterpScheme, iron: &IronModel, rho: f64, b: f64) -> f64 {
    NU0 + f_nu.value(rho) * (iron.reluctivity(b) - NU0)
}

/// Permanent magnet remanence scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetSpec {
    /// Maximum magnetization magnitude in A/m.
    pub m_max: f64,
}

impl Default for MagnetSpec {
    fn default() -> Self {
        MagnetSpec { m_max: 2.33e5 }
    }
}

/// Elliptic map from the square [-1,1]^2 onto the closed unit disk.
///
/// Coordinate axes are preserved, corners land on the circle at
/// (+-1/sqrt(2), +-1/sqrt(2)), and the square's boundary maps exactly onto
/// the unit circle.
pub fn square_to_disk(p: [f64; 2]) -> [f64; 2] {
    let [x, y] = p;
    [
        x * (1.0 - 0.5 * y * y).sqrt(),
        y * (1.0 - 0.5 * x * x).sqrt(),
    ]
}

/// Jacobian of [`square_to_disk`] as rows d(u,v)/d(x,y).
pub fn square_to_disk_jacobian(p: [f64; 2]) -> [[f64; 2]; 2] {
    let [x, y] = p;
    let sx = (1.0 - 0.5 * x * x).sqrt();
    let sy = (1.0 - 0.5 * y * y).sqrt();
    [[sy, -0.5 * x * y / sy], [-0.5 * x * y / sx, sx]]
}

/// Inverse of [`square_to_disk`]; maps the closed unit disk back onto the
/// square. Radicands are clipped at zero to absorb roundoff for points on
/// the circle.
pub fn disk_to_square(p: [f64; 2]) -> [f64; 2] {
    let [u, v] = p;
    let r2 = std::f64::consts::SQRT_2;
    let t = u * u - v * v;
    let comp = |a: f64, b: f64| 0.5 * (a.max(0.0).sqrt() - b.max(0.0).sqrt());
    [
        comp(2.0 + t + 2.0 * r2 * u, 2.0 + t - 2.0 * r2 * u),
        comp(2.0 - t + 2.0 * r2 * v, 2.0 - t - 2.0 * r2 * v),
    ]
}

/// Magnetization direction vector for the magnet density pair of one
/// element: rescale the densities from [0,1] to [-1,1] and push them through
/// the square-to-disk map. Magnitudes below [`MAG_EPS`] collapse to zero.
pub fn densities_to_magnetization(rho_mx: f64, rho_my: f64) -> [f64; 2] {
    let m = square_to_disk([2.0 * (rho_mx - 0.5), 2.0 * (rho_my - 0.5)]);
    if (m[0] * m[0] + m[1] * m[1]).sqrt() < MAG_EPS {
        [0.0, 0.0]
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn zero_field_reluctivity_matches_nu0_eps() {
        let c = MarroccoCurve::default();
        assert!((c.reluctivity(0.0) - 124.93663032713783).abs() < 1e-9);
        assert!((c.reluctivity(0.0) - 124.94).abs() < 0.01);
    }

    #[test]
    fn saturation_constants_frozen() {
        let c = MarroccoCurve::default();
        assert!((c.b_sat() - 2.340377153513709).abs() < 1e-12);
        assert!((c.m_sat() - 2.546138470386137).abs() < 1e-12);
    }

    #[test]
    fn branch_values_frozen() {
        let c = MarroccoCurve::default();
        assert!((c.reluctivity(1.0) - 128.55768392853918).abs() < 1e-8);
        assert!((c.reluctivity(1.8) - 6551.832500677558).abs() < 1e-6);
        // Just past b_max the exponential bridge takes over far below the
        // rational branch; the curve is deliberately left discontinuous.
        assert!((c.reluctivity(1.8 + 1e-9) - 183.27724382946434).abs() < 1e-4);
        // Past b_sat the asymptotic branch starts negative and is clamped.
        assert_eq!(c.reluctivity(2.35), c.nu_min());
        assert!((c.reluctivity(10.0) - 593159.4537802811).abs() < 1e-6);
    }

    #[test]
    fn reluctivity_clamped_into_physical_range() {
        let c = MarroccoCurve::default();
        for i in 0..=10_000 {
            let b = 10.0 * i as f64 / 10_000.0;
            let v = c.reluctivity(b);
            assert!(v >= c.nu_min() && v < NU0, "nu({b}) = {v} out of range");
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let c = MarroccoCurve::default();
        // Sample away from the branch junctions and the clamp boundary.
        let junctions = [c.b_max, c.b_sat(), c.m_sat() / (1.0 - c.eps)];
        let mut checked = 0;
        for i in 1..=400 {
            let b = 4.0 * i as f64 / 400.0;
            if junctions.iter().any(|j| (b - j).abs() < 2e-2) {
                continue;
            }
            let h = 1e-7;
            let fd = central_diff(|x| c.reluctivity(x), b, h);
            let an = c.derivative(b);
            // Below the cancellation noise of the central difference the
            // comparison is meaningless (the curve is extremely flat for
            // small B), so allow that as an absolute floor.
            let noise = 8.0 * f64::EPSILON * c.reluctivity(b) / (2.0 * h);
            let tol = 1e-6 * an.abs().max(fd.abs()) + noise;
            assert!(
                (an - fd).abs() < tol,
                "dnu mismatch at B={b}: analytic {an}, fd {fd}"
            );
            checked += 1;
        }
        assert!(checked > 300);
    }

    #[test]
    fn derivative_zero_at_origin_and_in_clamp_zone() {
        let c = MarroccoCurve::default();
        assert_eq!(c.derivative(0.0), 0.0);
        assert_eq!(c.derivative(2.4), 0.0); // clamped stretch of the last branch
    }

    #[test]
    fn rational_branch_monotone() {
        let c = MarroccoCurve::default();
        let mut prev = c.reluctivity(0.0);
        for i in 1..=180 {
            let v = c.reluctivity(1.8 * i as f64 / 180.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn junction_gaps_reported_not_asserted() {
        // The fitted coefficients leave visible jumps at both junctions;
        // record their size so a future refit can be compared against it.
        let c = MarroccoCurve::default();
        let left = c.reluctivity(c.b_max);
        let right = c.reluctivity(c.b_max + 1e-9);
        println!("junction at b_max: {left} -> {right}");
        let left = c.reluctivity(c.b_sat());
        let right = c.reluctivity(c.b_sat() + 1e-9);
        println!("junction at b_sat: {left} -> {right}");
    }

    #[test]
    fn interpolation_endpoint_conditions() {
        let schemes = [
            InterpScheme::Simp { exponent: 3.0 },
            InterpScheme::lukas_default(),
            InterpScheme::td_hermite_default(),
        ];
        for s in schemes {
            assert!(s.value(0.0).abs() < 1e-12, "{s:?} f(0)");
            assert!((s.value(1.0) - 1.0).abs() < 1e-12, "{s:?} f(1)");
        }
    }

    #[test]
    fn td_hermite_end_slopes() {
        let k = MarroccoCurve::default().eps;
        let s = InterpScheme::td_hermite_default();
        assert!((s.derivative(0.0) - 2.0 / (1.0 + k)).abs() < 1e-12);
        assert!((s.derivative(1.0) - 2.0 * k / (1.0 + k)).abs() < 1e-12);
        assert!((s.value(0.5) - 0.7499215123225653).abs() < 1e-12);
    }

    #[test]
    fn interpolation_derivatives_match_finite_differences() {
        let schemes = [
            InterpScheme::Simp { exponent: 3.0 },
            InterpScheme::Lukas { lambda: 5.0 },
            InterpScheme::Lukas { lambda: 25.0 },
            InterpScheme::td_hermite_default(),
        ];
        for s in schemes {
            for i in 1..100 {
                let rho = i as f64 / 100.0;
                let fd = central_diff(|x| s.value(x), rho, 1e-6);
                let an = s.derivative(rho);
                assert!(
                    (an - fd).abs() / an.abs().max(1.0) < 1e-6,
                    "{s:?} at rho={rho}: {an} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn lukas_frozen_values() {
        let s = InterpScheme::lukas_default();
        assert!(s.value(0.0).abs() < 1e-15);
        assert!((s.derivative(0.0) - 0.14002299761012973).abs() < 1e-12);
        assert!((s.derivative(0.5) - 3.6405979378633733).abs() < 1e-12);
    }

    #[test]
    fn corners_map_to_circle_diagonal() {
        let inv_sqrt2 = 0.7071067811865475;
        for (sx, sy) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let [u, v] = square_to_disk([sx, sy]);
            assert!((u - sx * inv_sqrt2).abs() < 1e-12);
            assert!((v - sy * inv_sqrt2).abs() < 1e-12);
        }
    }

    #[test]
    fn axes_pass_through_unchanged() {
        for i in 0..=20 {
            let x = -1.0 + i as f64 / 10.0;
            let [u, v] = square_to_disk([x, 0.0]);
            assert!((u - x).abs() < 1e-15 && v == 0.0);
        }
    }

    #[test]
    fn square_boundary_maps_onto_unit_circle() {
        for i in 0..=50 {
            let y = -1.0 + i as f64 / 25.0;
            let [u, v] = square_to_disk([1.0, y]);
            assert!(((u * u + v * v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn roundtrip_grid_within_1e10() {
        let mut worst = 0.0f64;
        for i in 0..=100 {
            for j in 0..=100 {
                let p = [-1.0 + i as f64 / 50.0, -1.0 + j as f64 / 50.0];
                let q = disk_to_square(square_to_disk(p));
                worst = worst.max((q[0] - p[0]).abs()).max((q[1] - p[1]).abs());
            }
        }
        assert!(worst < 1e-10, "worst roundtrip error {worst}");
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let pts = [[0.3, -0.7], [0.0, 0.0], [0.9, 0.9], [-0.5, 0.2]];
        for p in pts {
            let j = square_to_disk_jacobian(p);
            for col in 0..2 {
                let mut dp = p;
                dp[col] += 1e-6;
                let mut dm = p;
                dm[col] -= 1e-6;
                let fp = square_to_disk(dp);
                let fm = square_to_disk(dm);
                for row in 0..2 {
                    let fd = (fp[row] - fm[row]) / 2e-6;
                    assert!((j[row][col] - fd).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn neutral_densities_give_zero_magnetization() {
        assert_eq!(densities_to_magnetization(0.5, 0.5), [0.0, 0.0]);
        let m = densities_to_magnetization(1.0, 0.5);
        assert!((m[0] - 1.0).abs() < 1e-15 && m[1] == 0.0);
    }

    proptest! {
        #[test]
        fn prop_roundtrip(x in -1.0f64..=1.0, y in -1.0f64..=1.0) {
            let q = disk_to_square(square_to_disk([x, y]));
            prop_assert!((q[0] - x).abs() < 1e-9);
            prop_assert!((q[1] - y).abs() < 1e-9);
        }

        #[test]
        fn prop_disk_image_inside_unit_disk(x in -1.0f64..=1.0, y in -1.0f64..=1.0) {
            let [u, v] = square_to_disk([x, y]);
            prop_assert!(u * u + v * v <= 1.0 + 1e-12);
        }

        #[test]
        fn prop_interp_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for s in [
                InterpScheme::Simp { exponent: 3.0 },
                InterpScheme::lukas_default(),
                InterpScheme::td_hermite_default(),
            ] {
                prop_assert!(s.value(lo) <= s.value(hi) + 1e-12);
            }
        }

        #[test]
        fn prop_marrocco_in_range(b in 0.0f64..10.0) {
            let c = MarroccoCurve::default();
            let v = c.reluctivity(b);
            prop_assert!(v >= c.nu_min() && v < NU0);
        }
    }
}
