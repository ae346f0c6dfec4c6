//! Polarization QKD over an acquired free-space link.
//!
//! Two session drivers share one post-processing pipeline:
//!
//! * [`run_bb84_session`]: one-way BB84 between peers.
//! * [`run_plugplay_session`]: two-way polarization plug-&-play between a
//!   server (measuring party) and a client (encoder). The server's strong
//!   pulse crosses the link classically; only the attenuated return pulse
//!   sees single-photon channel statistics.
//!
//! Post-processing is sift, QBER estimation on a disclosed sample,
//! modeled reconciliation and Toeplitz privacy amplification.

mod attack;
mod postprocess;
mod session;

use std::fmt;

use thiserror::Error;

use crate::bits::BitString;
use crate::channel::ChannelError;
use crate::sim::RandomStream;

pub use attack::{intercept_resend, trojan_monitor};
pub use postprocess::{
    binary_entropy, distill, estimate_qber, final_key_length, privacy_amplify, reconcile, sift,
    toeplitz_hash, Distilled,
};
pub use session::{run_bb84_session, run_plugplay_session};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QkdError {
    #[error("input lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("input too short for QBER estimation ({0} bits)")]
    EmptyInput(usize),
    #[error("qber {0} outside [0, 0.5)")]
    InvalidQber(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("expected intensity must be positive, got {0}")]
    NonPositiveIntensity(f64),
    #[error("link is not active")]
    LinkNotActive,
    #[error("session needs at least one pulse")]
    NoPulses,
    #[error("reconciled keys disagree after privacy amplification")]
    KeyMismatch,
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    Rectilinear,
    Diagonal,
}

impl Basis {
    #[inline]
    pub fn random(rng: &mut RandomStream) -> Basis {
        if rng.bit() {
            Basis::Diagonal
        } else {
            Basis::Rectilinear
        }
    }
}

/// The four BB84 polarization states. Bit encoding: H=0, V=1, +45°=0, -45°=1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarization {
    H,
    V,
    /// +45°
    P,
    /// -45°
    M,
}

impl Polarization {
    pub const ALL: [Polarization; 4] = [Polarization::H, Polarization::V, Polarization::P, Polarization::M];

    pub fn basis(self) -> Basis {
        match self {
            Polarization::H | Polarization::V => Basis::Rectilinear,
            Polarization::P | Polarization::M => Basis::Diagonal,
        }
    }

    pub fn bit(self) -> bool {
        matches!(self, Polarization::V | Polarization::M)
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::H => "H",
            Polarization::V => "V",
            Polarization::P => "+",
            Polarization::M => "-",
        })
    }
}

#[inline]
pub fn prepare(bit: bool, basis: Basis) -> Polarization {
    match (basis, bit) {
        (Basis::Rectilinear, false) => Polarization::H,
        (Basis::Rectilinear, true) => Polarization::V,
        (Basis::Diagonal, false) => Polarization::P,
        (Basis::Diagonal, true) => Polarization::M,
    }
}

/// Projective measurement: deterministic in the matching basis, a fair coin
/// otherwise.
#[inline]
pub fn measure(pol: Polarization, basis: Basis, rng: &mut RandomStream) -> bool {
    if pol.basis() == basis {
        pol.bit()
    } else {
        rng.bit()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseKind {
    Strong,
    SinglePhoton,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub kind: PulseKind,
    pub polarization: Option<Polarization>,
    /// Mean photon number.
    pub intensity: f64,
}

impl Pulse {
    pub fn strong(intensity: f64) -> Self {
        Self {
            kind: PulseKind::Strong,
            polarization: None,
            intensity,
        }
    }

    /// Single-photon-level pulse; at most one photon, present with
    /// probability `intensity`.
    pub fn single_photon(polarization: Polarization, intensity: f64) -> Self {
        Self {
            kind: PulseKind::SinglePhoton,
            polarization: Some(polarization),
            intensity: intensity.clamp(0.0, 1.0),
        }
    }

    pub fn photon_present(&self, rng: &mut RandomStream) -> bool {
        match self.kind {
            PulseKind::Strong => true,
            PulseKind::SinglePhoton => rng.chance(self.intensity),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EveConfig {
    None,
    InterceptResend,
    /// Injects extra light into a two-way terminal. One-way BB84 sessions
    /// have no returning light and are unaffected.
    TrojanProbe { probe_intensity: f64 },
}

impl EveConfig {
    pub fn trojan(probe_intensity: f64) -> Result<Self, QkdError> {
        if probe_intensity > 0.0 && probe_intensity.is_finite() {
            Ok(EveConfig::TrojanProbe { probe_intensity })
        } else {
            Err(QkdError::InvalidConfig(format!(
                "probe_intensity must be positive, got {probe_intensity}"
            )))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EveConfig::None => "none",
            EveConfig::InterceptResend => "intercept_resend",
            EveConfig::TrojanProbe { .. } => "trojan_probe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Bb84,
    PlugAndPlay,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Bb84 => "bb84",
            Protocol::PlugAndPlay => "plugplay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbortReason {
    None,
    QberExceedsThreshold,
    InsufficientDetections,
    TrojanAlarm,
    /// QBER passed the threshold check but leakage and margin leave no bits.
    NoExtractableKey,
}

impl AbortReason {
    pub fn name(self) -> &'static str {
        match self {
            AbortReason::None => "none",
            AbortReason::QberExceedsThreshold => "qber_exceeds_threshold",
            AbortReason::InsufficientDetections => "insufficient_detections",
            AbortReason::TrojanAlarm => "trojan_alarm",
            AbortReason::NoExtractableKey => "no_extractable_key",
        }
    }
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Post-processing knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QkdConfig {
    pub qber_abort: f64,
    pub sample_fraction: f64,
    /// Reconciliation efficiency.
    pub f_ec: f64,
    pub safety_margin_bits: u64,
    pub min_sift_len: u64,
    /// Target mean photon number of the attenuated plug-&-play return pulse.
    pub mean_photon_number: f64,
    /// Server pulse intensity (mean photon number) arriving at the client.
    pub strong_pulse_intensity: f64,
    /// Relative window of the client intensity monitor.
    pub trojan_tolerance: f64,
}

impl Default for QkdConfig {
    fn default() -> Self {
        Self {
            qber_abort: 0.11,
            sample_fraction: 0.5,
            f_ec: 1.16,
            safety_margin_bits: 100,
            min_sift_len: 1000,
            mean_photon_number: 0.5,
            strong_pulse_intensity: 1e6,
            trojan_tolerance: 0.25,
        }
    }
}

impl QkdConfig {
    pub fn validate(&self) -> Result<(), QkdError> {
        let bad = |what: &str| Err(QkdError::InvalidConfig(what.to_string()));
        if !(0.0..0.5).contains(&self.qber_abort) {
            return bad("qber_abort must lie in [0, 0.5)");
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction < 1.0) {
            return bad("sample_fraction must lie in (0, 1)");
        }
        if !(self.f_ec >= 1.0 && self.f_ec.is_finite()) {
            return bad("f_ec must be >= 1");
        }
        if !(self.mean_photon_number > 0.0 && self.mean_photon_number <= 1.0) {
            return bad("mean_photon_number must lie in (0, 1]");
        }
        if !(self.strong_pulse_intensity > 1.0 && self.strong_pulse_intensity.is_finite()) {
            return bad("strong_pulse_intensity must exceed 1");
        }
        if !(self.trojan_tolerance > 0.0 && self.trojan_tolerance < 1.0) {
            return bad("trojan_tolerance must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Immutable result of one key-generation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub protocol: Protocol,
    pub n_pulses: u64,
    pub detections: u64,
    pub sifted_len: u64,
    /// Disclosed sample size the QBER was estimated on.
    pub qber_sample_len: u64,
    /// Estimated QBER, clamped to `[0, 0.5]` for reporting.
    pub qber: f64,
    pub reconciliation_leak_bits: u64,
    pub final_key: BitString,
    pub aborted: bool,
    pub abort_reason: AbortReason,
    /// SHA-256 over the per-pulse transcript (bits, bases, detections).
    pub transcript_digest: String,
}

impl SessionRecord {
    pub fn succeeded(&self) -> bool {
        !self.aborted
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prepare_table() {
        assert_eq!(prepare(false, Basis::Rectilinear), Polarization::H);
        assert_eq!(prepare(true, Basis::Rectilinear), Polarization::V);
        assert_eq!(prepare(false, Basis::Diagonal), Polarization::P);
        assert_eq!(prepare(true, Basis::Diagonal), Polarization::M);
    }

    #[test]
    fn matched_basis_round_trip_is_exact() {
        let mut rng = RandomStream::new(0, "rt");
        for basis in [Basis::Rectilinear, Basis::Diagonal] {
            for bit in [false, true] {
                for _ in 0..50 {
                    assert_eq!(measure(prepare(bit, basis), basis, &mut rng), bit);
                }
            }
        }
    }

    #[test]
    fn mismatched_basis_is_a_fair_coin() {
        let mut rng = RandomStream::new(1, "coin");
        let n = 10_000;
        let ones = (0..n)
            .filter(|_| measure(Polarization::H, Basis::Diagonal, &mut rng))
            .count();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((ones as f64 / n as f64 - 0.5).abs() <= 3.0 * sigma);
    }

    #[test]
    fn minus_in_diagonal_is_one() {
        let mut rng = RandomStream::new(2, "m");
        assert!((0..100).all(|_| measure(Polarization::M, Basis::Diagonal, &mut rng)));
    }

    #[test]
    fn trojan_needs_positive_probe() {
        assert!(EveConfig::trojan(0.0).is_err());
        assert!(EveConfig::trojan(3.0).is_ok());
    }

    #[test]
    fn default_config_is_valid() {
        QkdConfig::default().validate().unwrap();
        let bad = QkdConfig { sample_fraction: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
