use super::{measure, prepare, Basis, Polarization, QkdError};
use crate::sim::RandomStream;

/// Eve measures in a random basis and re-sends what she saw in that basis.
#[inline]
pub fn intercept_resend(pol: Polarization, rng: &mut RandomStream) -> Polarization {
    let basis = Basis::random(rng);
    let bit = measure(pol, basis, rng);
    prepare(bit, basis)
}

/// Relative-intensity window check of the client-side monitor detector.
pub fn trojan_monitor(
    measured_intensity: f64,
    expected_intensity: f64,
    tolerance_fraction: f64,
) -> Result<bool, QkdError> {
    if !(expected_intensity > 0.0) {
        return Err(QkdError::NonPositiveIntensity(expected_intensity));
    }
    Ok((measured_intensity - expected_intensity).abs() / expected_intensity > tolerance_fraction)
}
