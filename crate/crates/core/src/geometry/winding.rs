//! Three-phase distributed winding: slot-to-phase assignment and the
//! synchronous phase currents.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    U,
    V,
    W,
}

impl Phase {
    /// Electrical offset of the phase in radians.
    pub fn offset(self) -> f64 {
        use std::f64::consts::PI;
        match self {
            Phase::U => 0.0,
            Phase::V => 2.0 * PI / 3.0,
            Phase::W => 4.0 * PI / 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotAssignment {
    pub phase: Phase,
    pub positive: bool,
}

/// Slot-to-circuit table plus the drive amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct WindingLayout {
    /// Conductor turns bundled in each slot.
    pub turns_per_slot: u32,
    /// Peak phase current in amperes.
    pub i_max: f64,
    pub slots: Vec<SlotAssignment>,
}

impl WindingLayout {
    /// Distributed single-pole-pair pattern: six consecutive bands of
    /// `slot_count / 6` slots in the order U+, W-, V+, U-, W+, V-.
    pub fn standard(slot_count: usize) -> Result<Self> {
        if slot_count == 0 || slot_count % 6 != 0 {
            return Err(Error::Geometry(format!(
                "winding needs a multiple of 6 slots, got {slot_count}"
            )));
        }
        let band = slot_count / 6;
        let pattern = [
            (Phase::U, true),
            (Phase::W, false),
            (Phase::V, true),
            (Phase::U, false),
            (Phase::W, true),
            (Phase::V, false),
        ];
        let slots = (0..slot_count)
            .map(|s| {
                let (phase, positive) = pattern[s / band];
                SlotAssignment { phase, positive }
            })
            .collect();
        Ok(WindingLayout {
            turns_per_slot: 64,
            i_max: 12.0,
            slots,
        })
    }

    /// Instantaneous phase current at rotor angle `theta`:
    /// `i_max * cos(pole_pairs * theta + phase_angle - offset)`.
    /// The currents rotate synchronously with the rotor, so `phase_angle`
    /// is the load angle seen from the rotor frame.
    pub fn phase_current(&self, phase: Phase, theta: f64, pole_pairs: u32, phase_angle: f64) -> f64 {
        self.i_max * (pole_pairs as f64 * theta + phase_angle - phase.offset()).cos()
    }

    /// Signed ampere-turns N * I carried by one slot.
    pub fn slot_ampere_turns(
        &self,
        slot: usize,
        theta: f64,
        pole_pairs: u32,
        phase_angle: f64,
    ) -> f64 {
        let a = self.slots[slot];
        let sign = if a.positive { 1.0 } else { -1.0 };
        sign * self.turns_per_slot as f64 * self.phase_current(a.phase, theta, pole_pairs, phase_angle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn standard_layout_has_four_slot_bands() {
        let w = WindingLayout::standard(24).unwrap();
        assert_eq!(w.slots.len(), 24);
        for s in 0..4 {
            assert_eq!(w.slots[s], SlotAssignment { phase: Phase::U, positive: true });
        }
        for s in 4..8 {
            assert_eq!(w.slots[s], SlotAssignment { phase: Phase::W, positive: false });
        }
        for s in 8..12 {
            assert_eq!(w.slots[s], SlotAssignment { phase: Phase::V, positive: true });
        }
        for s in 12..16 {
            assert_eq!(w.slots[s], SlotAssignment { phase: Phase::U, positive: false });
        }
    }

    #[test]
    fn phase_currents_sum_to_zero() {
        let w = WindingLayout::standard(24).unwrap();
        for k in 0..40 {
            let theta = k as f64 * 0.37;
            let phi = k as f64 * 0.11;
            let sum: f64 = [Phase::U, Phase::V, Phase::W]
                .iter()
                .map(|&p| w.phase_current(p, theta, 1, phi))
                .sum();
            assert!(sum.abs() < 1e-12 * w.i_max);
        }
    }

    #[test]
    fn peak_current_at_aligned_angle() {
        let w = WindingLayout::standard(24).unwrap();
        assert!((w.phase_current(Phase::U, 0.0, 1, 0.0) - 12.0).abs() < 1e-12);
        assert!((w.phase_current(Phase::V, 0.0, 1, 2.0 * PI / 3.0) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn opposite_bands_carry_opposite_current() {
        let w = WindingLayout::standard(24).unwrap();
        let at = |s| w.slot_ampere_turns(s, 0.3, 1, 0.7);
        assert!((at(0) + at(12)).abs() < 1e-9); // U+ vs U-
        assert!((at(8) + at(20)).abs() < 1e-9); // V+ vs V-
    }

    #[test]
    fn currents_rotate_with_the_rotor() {
        // Advancing theta by 2*pi/pole_pairs returns the same currents.
        let w = WindingLayout::standard(24).unwrap();
        let a = w.phase_current(Phase::W, 0.4, 1, 0.2);
        let b = w.phase_current(Phase::W, 0.4 + 2.0 * PI, 1, 0.2);
        assert!((a - b).abs() < 1e-9);
    }
}
