//! Free-space channel: loss budget and gated single-photon detection.

use rand::RngCore;
use thiserror::Error;

use crate::sim::RandomStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("eta_total must lie in (0, 1], got {0}")]
    Efficiency(f64),
    #[error("channel parameter {name} = {value} out of range")]
    Param { name: &'static str, value: f64 },
}

/// Background click probability per gate in daylight.
pub const DAYLIGHT_BACKGROUND_PROB: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub atm_loss_db_per_km: f64,
    /// Pointing residual and optics inefficiency.
    pub fixed_system_loss_db: f64,
    pub dark_count_prob: f64,
    pub background_prob: f64,
    pub detector_efficiency: f64,
    pub intrinsic_error_prob: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            atm_loss_db_per_km: 0.2,
            fixed_system_loss_db: 5.0,
            dark_count_prob: 1e-6,
            background_prob: 0.0,
            detector_efficiency: 0.5,
            intrinsic_error_prob: 0.01,
        }
    }
}

impl ChannelParams {
    /// Lossless, noiseless, error-free channel with a perfect detector.
    pub fn ideal() -> Self {
        Self {
            atm_loss_db_per_km: 0.0,
            fixed_system_loss_db: 0.0,
            dark_count_prob: 0.0,
            background_prob: 0.0,
            detector_efficiency: 1.0,
            intrinsic_error_prob: 0.0,
        }
    }

    pub fn daylight(self) -> Self {
        Self {
            background_prob: DAYLIGHT_BACKGROUND_PROB,
            ..self
        }
    }

    pub fn noise_prob(&self) -> f64 {
        self.dark_count_prob + self.background_prob
    }

    /// Signal click probability for a link with the given loss.
    pub fn eta_total(&self, loss_db: f64) -> f64 {
        transmittance(loss_db) * self.detector_efficiency
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let check = |name, value: f64, ok: bool| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(ChannelError::Param { name, value })
            }
        };
        check("atm_loss_db_per_km", self.atm_loss_db_per_km, self.atm_loss_db_per_km >= 0.0)?;
        check("fixed_system_loss_db", self.fixed_system_loss_db, self.fixed_system_loss_db >= 0.0)?;
        check("dark_count_prob", self.dark_count_prob, (0.0..1.0).contains(&self.dark_count_prob))?;
        check("background_prob", self.background_prob, (0.0..1.0).contains(&self.background_prob))?;
        check(
            "detector_efficiency",
            self.detector_efficiency,
            self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0,
        )?;
        check(
            "intrinsic_error_prob",
            self.intrinsic_error_prob,
            (0.0..0.5).contains(&self.intrinsic_error_prob),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionOutcome {
    pub clicked: bool,
    /// Only meaningful when `clicked`.
    pub bit: bool,
    /// Click came from dark counts or background light, not the signal.
    pub noise_click: bool,
}

impl DetectionOutcome {
    pub const NONE: DetectionOutcome = DetectionOutcome {
        clicked: false,
        bit: false,
        noise_click: false,
    };
}

pub fn path_loss_db(distance_km: f64, params: &ChannelParams) -> f64 {
    params.fixed_system_loss_db + params.atm_loss_db_per_km * distance_km.max(0.0)
}

pub fn transmittance(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// One gated detection.
///
/// Draw order per call is fixed (signal, noise, then the bit), so a stream
/// replays to the same outcomes.
pub fn detect(
    signal_present: bool,
    signal_bit: bool,
    eta_total: f64,
    params: &ChannelParams,
    rng: &mut RandomStream,
) -> Result<DetectionOutcome, ChannelError> {
    if !(eta_total > 0.0 && eta_total <= 1.0) {
        return Err(ChannelError::Efficiency(eta_total));
    }
    let signal_click = signal_present && rng.chance(eta_total);
    let noise = rng.chance(params.noise_prob());
    let outcome = if signal_click {
        // Double clicks resolve to the signal bit.
        DetectionOutcome {
            clicked: true,
            bit: signal_bit ^ rng.chance(params.intrinsic_error_prob),
            noise_click: false,
        }
    } else if noise {
        DetectionOutcome {
            clicked: true,
            bit: rng.bit(),
            noise_click: true,
        }
    } else {
        DetectionOutcome::NONE
    };
    Ok(outcome)
}

/// Independent Bernoulli(p) trials with a fixed `p`, realized by drawing
/// the geometric gap to the next success. Costs one draw per success rather
/// than one per trial, with the same joint distribution.
#[derive(Debug, Clone)]
pub struct BernoulliTrials {
    p: f64,
    ln_q: f64,
    /// Failures left before the next success.
    gap: u64,
}

impl BernoulliTrials {
    /// `p` outside `[0, 1]` is clamped.
    pub fn new(p: f64, rng: &mut RandomStream) -> Self {
        let p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
        let mut t = Self {
            p,
            ln_q: (-p).ln_1p(),
            gap: 0,
        };
        t.gap = t.draw_gap(rng);
        t
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn draw_gap(&self, rng: &mut RandomStream) -> u64 {
        if self.p <= 0.0 || self.p >= 1.0 {
            return 0;
        }
        // u in (0, 1]; P(gap = k) = q^k p.
        let u = 1.0 - (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (u.ln() / self.ln_q).floor() as u64
    }

    #[inline]
    pub fn next(&mut self, rng: &mut RandomStream) -> bool {
        if self.p <= 0.0 {
            return false;
        }
        if self.gap > 0 {
            self.gap -= 1;
            return false;
        }
        self.gap = self.draw_gap(rng);
        true
    }
}

/// Gated detector for a whole session at a fixed `eta_total`. Same outcome
/// rules as [`detect`], with signal and noise clicks drawn as
/// [`BernoulliTrials`]. Signal trials only advance on pulses that carry a
/// photon.
#[derive(Debug, Clone)]
pub struct Detector {
    signal: BernoulliTrials,
    noise: BernoulliTrials,
    intrinsic_error_prob: f64,
}

impl Detector {
    pub fn new(eta_total: f64, params: &ChannelParams, rng: &mut RandomStream) -> Result<Self, ChannelError> {
        if !(eta_total > 0.0 && eta_total <= 1.0) {
            return Err(ChannelError::Efficiency(eta_total));
        }
        Ok(Self {
            signal: BernoulliTrials::new(eta_total, rng),
            noise: BernoulliTrials::new(params.noise_prob(), rng),
            intrinsic_error_prob: params.intrinsic_error_prob,
        })
    }

    #[inline]
    pub fn detect(&mut self, signal_present: bool, signal_bit: bool, rng: &mut RandomStream) -> DetectionOutcome {
        let signal_click = signal_present && self.signal.next(rng);
        let noise = self.noise.next(rng);
        if signal_click {
            DetectionOutcome {
                clicked: true,
                bit: signal_bit ^ rng.chance(self.intrinsic_error_prob),
                noise_click: false,
            }
        } else if noise {
            DetectionOutcome {
                clicked: true,
                bit: rng.bit(),
                noise_click: true,
            }
        } else {
            DetectionOutcome::NONE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_budget_examples() {
        let p = ChannelParams::default();
        assert_eq!(path_loss_db(0.0, &p), 5.0);
        assert!((path_loss_db(50.0, &p) - 15.0).abs() < 1e-12);
        assert!((path_loss_db(144.0, &p) - 33.8).abs() < 1e-12);
    }

    #[test]
    fn transmittance_examples() {
        assert_eq!(transmittance(0.0), 1.0);
        assert!((transmittance(10.0) - 0.1).abs() < 1e-15);
        assert!((transmittance(33.8) - 4.168_693_834_703_355e-4).abs() < 1e-12);
    }

    #[test]
    fn no_sources_no_clicks() {
        let p = ChannelParams { dark_count_prob: 0.0, background_prob: 0.0, ..Default::default() };
        let mut rng = RandomStream::new(1, "t");
        for _ in 0..1000 {
            assert!(!detect(false, true, 0.5, &p, &mut rng).unwrap().clicked);
        }
    }

    #[test]
    fn ideal_channel_reproduces_bit() {
        let p = ChannelParams::ideal();
        let mut rng = RandomStream::new(2, "t");
        for i in 0..1000 {
            let bit = i % 3 == 0;
            let o = detect(true, bit, 1.0, &p, &mut rng).unwrap();
            assert!(o.clicked && !o.noise_click);
            assert_eq!(o.bit, bit);
        }
    }

    #[test]
    fn rejects_bad_eta() {
        let p = ChannelParams::default();
        let mut rng = RandomStream::new(3, "t");
        for eta in [0.0, -0.1, 1.01, f64::NAN] {
            assert!(detect(true, false, eta, &p, &mut rng).is_err());
        }
    }

    #[test]
    fn click_rate_binomial() {
        let p = ChannelParams { dark_count_prob: 0.0, ..ChannelParams::ideal() };
        let mut rng = RandomStream::new(4, "binomial");
        let n = 100_000;
        let clicks = (0..n)
            .filter(|_| detect(true, false, 0.5, &p, &mut rng).unwrap().clicked)
            .count();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((clicks as f64 / n as f64 - 0.5).abs() <= 3.0 * sigma);
    }

    #[test]
    fn click_rate_with_noise() {
        // 1 - (1 - eta)(1 - p_noise)
        let p = ChannelParams { dark_count_prob: 0.05, background_prob: 0.05, ..ChannelParams::ideal() };
        let mut rng = RandomStream::new(5, "noise");
        let n = 100_000;
        let eta = 0.2;
        let expected = 1.0 - (1.0 - eta) * (1.0 - 0.1);
        let clicks = (0..n)
            .filter(|_| detect(true, true, eta, &p, &mut rng).unwrap().clicked)
            .count();
        let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((clicks as f64 / n as f64 - expected).abs() <= 3.0 * sigma);
    }

    #[test]
    fn replay_is_deterministic() {
        let p = ChannelParams::default().daylight();
        let run = || {
            let mut rng = RandomStream::new(9, "replay");
            (0..500).map(|i| detect(i % 2 == 0, true, 0.3, &p, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    fn within_3_sigma(hits: usize, n: usize, p: f64) -> bool {
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        (hits as f64 / n as f64 - p).abs() <= 3.0 * sigma
    }

    #[test]
    fn bernoulli_trials_rate() {
        for (i, p) in [0.5, 0.3, 0.02, 1e-3].into_iter().enumerate() {
            let mut rng = RandomStream::new(6, format!("trials/{i}"));
            let mut t = BernoulliTrials::new(p, &mut rng);
            let n = 1_000_000;
            let hits = (0..n).filter(|_| t.next(&mut rng)).count();
            assert!(within_3_sigma(hits, n, p), "p={p}: {hits}/{n}");
        }
    }

    #[test]
    fn bernoulli_trials_gaps_are_geometric() {
        // P(gap >= k) = (1 - p)^k
        let p = 0.2;
        let mut rng = RandomStream::new(7, "gaps");
        let mut t = BernoulliTrials::new(p, &mut rng);
        let mut gaps = Vec::new();
        let mut run = 0;
        while gaps.len() < 50_000 {
            if t.next(&mut rng) {
                gaps.push(run);
                run = 0;
            } else {
                run += 1;
            }
        }
        for k in [1usize, 3, 8] {
            let tail = gaps.iter().filter(|&&g| g >= k).count();
            assert!(within_3_sigma(tail, gaps.len(), (1.0 - p).powi(k as i32)), "k={k}");
        }
    }

    #[test]
    fn bernoulli_trials_edges() {
        let mut rng = RandomStream::new(8, "edges");
        let mut never = BernoulliTrials::new(0.0, &mut rng);
        let mut always = BernoulliTrials::new(1.0, &mut rng);
        assert!((0..1000).all(|_| !never.next(&mut rng) && always.next(&mut rng)));
        assert_eq!(BernoulliTrials::new(f64::NAN, &mut rng).p(), 0.0);
    }

    #[test]
    fn detector_matches_single_gate_statistics() {
        let p = ChannelParams { dark_count_prob: 0.05, background_prob: 0.05, intrinsic_error_prob: 0.1, ..ChannelParams::ideal() };
        let mut rng = RandomStream::new(5, "detector");
        let eta = 0.2;
        let mut d = Detector::new(eta, &p, &mut rng).unwrap();
        let n = 200_000;
        let outs: Vec<DetectionOutcome> = (0..n).map(|_| d.detect(true, true, &mut rng)).collect();
        let clicks = outs.iter().filter(|o| o.clicked).count();
        assert!(within_3_sigma(clicks, n, 1.0 - (1.0 - eta) * (1.0 - 0.1)));
        let signal: Vec<_> = outs.iter().filter(|o| o.clicked && !o.noise_click).collect();
        assert!(within_3_sigma(signal.len(), n, eta));
        let flipped = signal.iter().filter(|o| !o.bit).count();
        assert!(within_3_sigma(flipped, signal.len(), 0.1));
        // No photon: only noise clicks.
        assert!((0..1000).map(|_| d.detect(false, true, &mut rng)).all(|o| !o.clicked || o.noise_click));
        assert!(Detector::new(0.0, &p, &mut rng).is_err());
    }

    #[test]
    fn defaults_validate() {
        assert!(ChannelParams::default().validate().is_ok());
        assert!(ChannelParams::ideal().validate().is_ok());
        let bad = ChannelParams { intrinsic_error_prob: 0.5, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
