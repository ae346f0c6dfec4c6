use std::fmt;

use thiserror::Error;

use crate::channel::ChannelParams;
use crate::geo::LinkFeasibilityParams;
use crate::numfmt::sig6;
use crate::qkd::QkdConfig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("unknown parameter {0:?}")]
    Unknown(String),
    #[error("parameter {name} expects {expected}, got {value:?}")]
    BadValue {
        name: String,
        expected: &'static str,
        value: String,
    },
    #[error("parameter {name}: {reason}")]
    OutOfRange { name: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    Number(f64),
    Bool(bool),
}

impl ParamValue {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "true" | "on" => Some(ParamValue::Bool(true)),
            "false" | "off" => Some(ParamValue::Bool(false)),
            _ => text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(ParamValue::Number),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(v) => write!(f, "{v}"),
            ParamValue::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Everything a network run is parameterized by.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub feasibility: LinkFeasibilityParams,
    pub channel: ChannelParams,
    pub qkd: QkdConfig,
    /// Pulses per on-demand QKD session.
    pub session_pulses: u64,
    /// Sessions a send may trigger per hop before reporting starvation.
    pub max_session_attempts: u32,
    /// Key bits generated on every link right after acquisition.
    pub precharge_bits: u64,
    pub acquisition_coarse_s: f64,
    pub acquisition_fine_s: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            feasibility: LinkFeasibilityParams::default(),
            channel: ChannelParams::default(),
            qkd: QkdConfig::default(),
            session_pulses: 1_000_000,
            max_session_attempts: 4,
            precharge_bits: 0,
            acquisition_coarse_s: 0.0,
            acquisition_fine_s: 0.0,
        }
    }
}

/// Names accepted by [`NetworkConfig::set`].
pub const PARAM_NAMES: &[&str] = &[
    "max_range_km",
    "earth_radius_km",
    "require_los",
    "atm_loss_db_per_km",
    "fixed_system_loss_db",
    "dark_count_prob",
    "background_prob",
    "detector_efficiency",
    "intrinsic_error_prob",
    "qber_abort",
    "sample_fraction",
    "f_ec",
    "safety_margin_bits",
    "min_sift_len",
    "mean_photon_number",
    "strong_pulse_intensity",
    "trojan_tolerance",
    "session_pulses",
    "max_session_attempts",
    "precharge_bits",
    "acquisition_coarse_s",
    "acquisition_fine_s",
];

impl NetworkConfig {
    pub fn set(&mut self, name: &str, value: ParamValue) -> Result<(), ParamError> {
        let bad = |expected| ParamError::BadValue {
            name: name.to_string(),
            expected,
            value: value.to_string(),
        };
        let num = || match value {
            ParamValue::Number(v) => Ok(v),
            ParamValue::Bool(_) => Err(bad("a number")),
        };
        let count = || match value {
            ParamValue::Number(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 * 4096.0 => {
                Ok(v as u64)
            }
            _ => Err(bad("a non-negative integer")),
        };
        let mut next = self.clone();
        match name {
            "max_range_km" => next.feasibility.max_range_km = num()?,
            "earth_radius_km" => next.feasibility.earth_radius_km = num()?,
            "require_los" => match value {
                ParamValue::Bool(b) => next.feasibility.require_los = b,
                ParamValue::Number(_) => return Err(bad("true or false")),
            },
            "atm_loss_db_per_km" => next.channel.atm_loss_db_per_km = num()?,
            "fixed_system_loss_db" => next.channel.fixed_system_loss_db = num()?,
            "dark_count_prob" => next.channel.dark_count_prob = num()?,
            "background_prob" => next.channel.background_prob = num()?,
            "detector_efficiency" => next.channel.detector_efficiency = num()?,
            "intrinsic_error_prob" => next.channel.intrinsic_error_prob = num()?,
            "qber_abort" => next.qkd.qber_abort = num()?,
            "sample_fraction" => next.qkd.sample_fraction = num()?,
            "f_ec" => next.qkd.f_ec = num()?,
            "safety_margin_bits" => next.qkd.safety_margin_bits = count()?,
            "min_sift_len" => next.qkd.min_sift_len = count()?,
            "mean_photon_number" => next.qkd.mean_photon_number = num()?,
            "strong_pulse_intensity" => next.qkd.strong_pulse_intensity = num()?,
            "trojan_tolerance" => next.qkd.trojan_tolerance = num()?,
            "session_pulses" => next.session_pulses = count()?.max(1),
            "max_session_attempts" => next.max_session_attempts = count()?.min(u32::MAX as u64) as u32,
            "precharge_bits" => next.precharge_bits = count()?,
            "acquisition_coarse_s" => next.acquisition_coarse_s = num()?.max(0.0),
            "acquisition_fine_s" => next.acquisition_fine_s = num()?.max(0.0),
            other => return Err(ParamError::Unknown(other.to_string())),
        }
        next.validate().map_err(|reason| ParamError::OutOfRange {
            name: name.to_string(),
            reason,
        })?;
        *self = next;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        self.feasibility.validate().map_err(|e| e.to_string())?;
        if !(self.feasibility.earth_radius_km > 0.0) {
            return Err("earth_radius_km must be positive".into());
        }
        self.channel.validate().map_err(|e| e.to_string())?;
        self.qkd.validate().map_err(|e| e.to_string())?;
        Ok(())
    }

    /// Key parameters in a stable textual form, for report headers.
    pub fn summary(&self) -> String {
        format!(
            "max_range_km={} require_los={} atm_loss_db_per_km={} fixed_system_loss_db={} \
             detector_efficiency={} dark_count_prob={} background_prob={} intrinsic_error_prob={} \
             qber_abort={} session_pulses={}",
            sig6(self.feasibility.max_range_km),
            self.feasibility.require_los,
            sig6(self.channel.atm_loss_db_per_km),
            sig6(self.channel.fixed_system_loss_db),
            sig6(self.channel.detector_efficiency),
            sig6(self.channel.dark_count_prob),
            sig6(self.channel.background_prob),
            sig6(self.channel.intrinsic_error_prob),
            sig6(self.qkd.qber_abort),
            self.session_pulses,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_name_is_settable() {
        for name in PARAM_NAMES {
            let mut cfg = NetworkConfig::default();
            let value = match *name {
                "require_los" => ParamValue::Bool(false),
                "sample_fraction" | "mean_photon_number" | "trojan_tolerance" => ParamValue::Number(0.4),
                "qber_abort" | "intrinsic_error_prob" | "dark_count_prob" | "background_prob" => {
                    ParamValue::Number(0.01)
                }
                "detector_efficiency" => ParamValue::Number(0.9),
                "f_ec" => ParamValue::Number(1.2),
                _ => ParamValue::Number(2000.0),
            };
            cfg.set(name, value).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn rejects_unknown_and_bad_values() {
        let mut cfg = NetworkConfig::default();
        assert!(matches!(cfg.set("warp", ParamValue::Number(1.0)), Err(ParamError::Unknown(_))));
        assert!(matches!(cfg.set("require_los", ParamValue::Number(1.0)), Err(ParamError::BadValue { .. })));
        assert!(matches!(cfg.set("min_sift_len", ParamValue::Number(1.5)), Err(ParamError::BadValue { .. })));
        assert!(matches!(
            cfg.set("detector_efficiency", ParamValue::Number(0.0)),
            Err(ParamError::OutOfRange { .. })
        ));
        assert_eq!(cfg, NetworkConfig::default());
    }

    #[test]
    fn value_parsing() {
        assert_eq!(ParamValue::parse("true"), Some(ParamValue::Bool(true)));
        assert_eq!(ParamValue::parse("1e-4"), Some(ParamValue::Number(1e-4)));
        assert_eq!(ParamValue::parse("inf"), None);
        assert_eq!(ParamValue::parse("x"), None);
    }
}
