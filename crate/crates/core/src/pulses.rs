//! Coupling schedules: Gaussian pulses, the mixing angle of the mechanical
//! dark mode, the counterdiabatic cavity-cavity coupling, and its Gaussian
//! replacement realized through a far-detuned mechanical mode.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Center shared by both adiabatic pulses before the interval offset.
pub const PULSE_CENTER: f64 = 2.4;
/// Peak magnitude of the adiabatic pulses.
pub const PULSE_AMPLITUDE: f64 = 3.0;

/// `A * exp(-w (t - t_c)^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPulse {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl GaussianPulse {
    pub fn new(amplitude: f64, center: f64, width: f64) -> Self {
        Self { amplitude, center, width }
    }

    pub fn value(&self, t: f64) -> f64 {
        let x = t - self.center;
        self.amplitude * (-self.width * x * x).exp()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        -2.0 * self.width * (t - self.center) * self.value(t)
    }

    /// Same pulse with its center moved by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        Self { center: self.center + dt, ..*self }
    }
}

/// Pair of coupling pulses `(g1, g2)` for cavity 1 and cavity 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSchedule {
    pub first: GaussianPulse,
    pub second: GaussianPulse,
}

impl CouplingSchedule {
    pub fn new(first: GaussianPulse, second: GaussianPulse) -> Self {
        Self { first, second }
    }

    /// Checks that `g0(t) > 0` on `[start, end]`, sampled on `samples` points.
    pub fn checked_on(self, start: f64, end: f64, samples: usize) -> Result<Self> {
        let n = samples.max(2);
        for k in 0..n {
            let t = start + (end - start) * k as f64 / (n - 1) as f64;
            self.scale(t)?;
        }
        Ok(self)
    }

    pub fn g1(&self, t: f64) -> f64 {
        self.first.value(t)
    }

    pub fn g2(&self, t: f64) -> f64 {
        self.second.value(t)
    }

    /// `sqrt(g1^2 + g2^2)`, the normalization of the dark and bright modes.
    pub fn g0(&self, t: f64) -> f64 {
        self.g1(t).hypot(self.g2(t))
    }

    // Largest coupling magnitude, used to evaluate ratios without underflow
    // far out in the pulse tails.
    fn scale(&self, t: f64) -> Result<f64> {
        let s = self.g1(t).abs().max(self.g2(t).abs());
        if s.is_finite() && s >= f64::MIN_POSITIVE {
            Ok(s)
        } else {
            Err(Error::DegenerateSchedule { t, g0: self.g0(t) })
        }
    }
}

/// The Gaussian pulse pair of the adiabatic protocol:
/// `g1 = 3 exp[-(t - 2.4 + tau)^2]`, `g2 = -3 exp[-(t - 2.4)^2]`.
pub fn adiabatic_pulses(tau: f64) -> CouplingSchedule {
    CouplingSchedule::new(
        GaussianPulse::new(PULSE_AMPLITUDE, PULSE_CENTER - tau, 1.0),
        GaussianPulse::new(-PULSE_AMPLITUDE, PULSE_CENTER, 1.0),
    )
}

/// Dark-mode mixing angle `theta = atan2(g1, -g2)`, so that the dark mode is
/// `[cos theta, 0, sin theta]`.
pub fn mixing_angle(s: &CouplingSchedule, t: f64) -> Result<f64> {
    let k = s.scale(t)?;
    Ok((s.g1(t) / k).atan2(-s.g2(t) / k))
}

/// Counterdiabatic coupling `G = (g1 g2' - g1' g2) / g0^2`, which equals the
/// rate of change of the mixing angle.
pub fn counterdiabatic_coupling(s: &CouplingSchedule, t: f64) -> Result<f64> {
    let k = s.scale(t)?;
    let (g1, g2) = (s.g1(t) / k, s.g2(t) / k);
    let (d1, d2) = (s.first.derivative(t) / k, s.second.derivative(t) / k);
    Ok((g1 * d2 - d1 * g2) / (g1 * g1 + g2 * g2))
}

/// Gaussian stand-in for the counterdiabatic coupling:
/// `G' = -tau exp[-alpha (t - 2.4 + tau/2)^2]`.
pub fn fitted_coupling(tau: f64, alpha: f64) -> Result<GaussianPulse> {
    if !(tau < 0.0) {
        return Err(Error::InvalidParameter(format!("fitted coupling needs tau < 0, got {tau}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("fitted coupling needs alpha > 0, got {alpha}")));
    }
    Ok(GaussianPulse::new(-tau, PULSE_CENTER - tau / 2.0, alpha))
}

/// Equal optomechanical couplings `G1 = G2 = sqrt(delta' G')` whose
/// adiabatically eliminated cavity-cavity coupling `G1 G2 / delta'` is `G'`.
pub fn physical_couplings(delta_prime: f64, gp: &GaussianPulse) -> Result<CouplingSchedule> {
    if !(delta_prime > 0.0) {
        return Err(Error::InvalidParameter(format!("detuning must be positive, got {delta_prime}")));
    }
    if !(gp.amplitude > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "effective coupling amplitude must be positive, got {}",
            gp.amplitude
        )));
    }
    let pulse = GaussianPulse::new((delta_prime * gp.amplitude).sqrt(), gp.center, gp.width / 2.0);
    Ok(CouplingSchedule::new(pulse, pulse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn adiabatic_peaks() {
        let s = adiabatic_pulses(-0.95);
        assert_relative_eq!(s.first.center, 3.35, epsilon = 1e-15);
        assert_eq!(s.g1(3.35), 3.0);
        assert_eq!(s.g2(2.4), -3.0);
        assert_relative_eq!(s.g2(-2.0), -3.0 * (-19.36f64).exp(), max_relative = 1e-12);
        assert!((s.g2(-2.0) + 1.2e-8).abs() < 1e-9);
    }

    #[test]
    fn zero_offset_is_antisymmetric() {
        let s = adiabatic_pulses(0.0);
        for k in 0..100 {
            let t = -2.0 + 0.1 * k as f64;
            assert_eq!(s.g1(t), -s.g2(t));
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = GaussianPulse::new(7.55, 2.875, 0.55);
        let h = 1e-5;
        for k in 0..1000 {
            let t = -2.0 + 10.0 * k as f64 / 999.0;
            let fd = (p.value(t + h) - p.value(t - h)) / (2.0 * h);
            let d = p.derivative(t);
            assert!((fd - d).abs() <= 1e-6 * d.abs().max(1e-3), "t={t}: {fd} vs {d}");
        }
    }

    #[test]
    fn mixing_angle_limits() {
        let s = adiabatic_pulses(-0.95);
        assert!(mixing_angle(&s, -10.0).unwrap() < 1e-9);
        assert!((mixing_angle(&s, 15.0).unwrap() - FRAC_PI_2).abs() < 1e-9);
        // g1 = -g2 where (t - 3.35)^2 = (t - 2.4)^2
        let crossing = (3.35 + 2.4) / 2.0;
        assert_relative_eq!(mixing_angle(&s, crossing).unwrap(), FRAC_PI_4, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_schedule_rejected() {
        let zero = GaussianPulse::new(0.0, 0.0, 1.0);
        let s = CouplingSchedule::new(zero, zero);
        assert!(matches!(mixing_angle(&s, 1.0), Err(Error::DegenerateSchedule { .. })));
        assert!(matches!(counterdiabatic_coupling(&s, 1.0), Err(Error::DegenerateSchedule { .. })));
        // pulses underflow to exactly zero far enough out
        let a = adiabatic_pulses(-0.95);
        assert!(counterdiabatic_coupling(&a, -40.0).is_err());
        assert!(a.checked_on(-2.0, 8.0, 1000).is_ok());
        assert!(a.checked_on(-40.0, 8.0, 10).is_err());
    }

    #[test]
    fn counterdiabatic_is_angle_rate() {
        let s = adiabatic_pulses(-0.95);
        let h = 1e-4;
        for k in 0..1000 {
            let t = -2.0 + 10.0 * k as f64 / 999.0;
            let fd = (mixing_angle(&s, t + h).unwrap() - mixing_angle(&s, t - h).unwrap()) / (2.0 * h);
            let g = counterdiabatic_coupling(&s, t).unwrap();
            assert!((fd - g).abs() <= 1e-6 * g.abs().max(1e-6), "t={t}: {fd} vs {g}");
        }
    }

    #[test]
    fn counterdiabatic_vanishes_at_edges() {
        let s = adiabatic_pulses(-0.95);
        assert!(counterdiabatic_coupling(&s, -2.0).unwrap().abs() < 1e-3);
        assert!(counterdiabatic_coupling(&s, 8.0).unwrap().abs() < 1e-3);
        assert!(counterdiabatic_coupling(&s, -6.0).unwrap().abs() < 1e-7);
    }

    #[test]
    fn fitted_and_physical() {
        let gp = fitted_coupling(-0.95, 1.1).unwrap();
        assert_eq!(gp.amplitude, 0.95);
        assert_relative_eq!(gp.center, 2.875, epsilon = 1e-15);
        assert_eq!(gp.width, 1.1);
        assert!(fitted_coupling(0.0, 1.1).is_err());
        assert!(fitted_coupling(0.3, 1.1).is_err());

        let s = physical_couplings(60.0, &gp).unwrap();
        assert_relative_eq!(s.first.amplitude, 57f64.sqrt(), epsilon = 1e-14);
        assert!((s.first.amplitude - 7.55).abs() < 5e-3);
        assert_relative_eq!(s.first.width, 0.55, epsilon = 1e-15);
        assert_eq!(s.first, s.second);
        assert!((60.0 / s.first.amplitude - 8.0).abs() < 0.1);
        for k in 0..200 {
            let t = -2.0 + 0.05 * k as f64;
            assert_relative_eq!(s.g1(t) * s.g2(t) / 60.0, gp.value(t), max_relative = 1e-13);
        }
        assert!(physical_couplings(0.0, &gp).is_err());
        assert!(physical_couplings(60.0, &GaussianPulse::new(-1.0, 0.0, 1.0)).is_err());
    }
}
