use sha2::{Digest, Sha256};

use super::{
    distill, estimate_qber, intercept_resend, measure, prepare,
    trojan_monitor, AbortReason, Basis, EveConfig, Protocol, Pulse, QkdConfig, QkdError,
    SessionRecord,
};
use crate::bits::BitString;
use crate::channel::{ChannelParams, Detector};
use crate::network::{LinkState, OpticalLink};
use crate::sim::RandomStream;

const SENDER_DIAGONAL: u8 = 1;
const RECEIVER_DIAGONAL: u8 = 2;
const SENDER_BIT: u8 = 4;
const RECEIVER_BIT: u8 = 8;
const DETECTED: u8 = 16;

/// Per-pulse raw data of one session, one flag byte per pulse.
struct RawRounds {
    flags: Vec<u8>,
}

impl RawRounds {
    fn with_capacity(n: usize) -> Self {
        Self { flags: Vec::with_capacity(n) }
    }

    #[inline]
    fn push(&mut self, sb: Basis, rb: Basis, sbit: bool, rbit: bool, det: bool) {
        let f = (sb == Basis::Diagonal) as u8 * SENDER_DIAGONAL
            | (rb == Basis::Diagonal) as u8 * RECEIVER_DIAGONAL
            | sbit as u8 * SENDER_BIT
            | rbit as u8 * RECEIVER_BIT
            | det as u8 * DETECTED;
        self.flags.push(f);
    }

    fn lane(&self, mask: u8) -> impl Iterator<Item = bool> + '_ {
        self.flags.iter().map(move |f| f & mask != 0)
    }

    fn detections(&self) -> u64 {
        self.lane(DETECTED).filter(|&d| d).count() as u64
    }

    /// Same result as [`super::sift`] on the unpacked lanes.
    fn sift(&self) -> (Vec<bool>, Vec<bool>) {
        self.flags
            .iter()
            .filter(|&&f| f & DETECTED != 0 && ((f & SENDER_DIAGONAL != 0) == (f & RECEIVER_DIAGONAL != 0)))
            .map(|&f| (f & SENDER_BIT != 0, f & RECEIVER_BIT != 0))
            .unzip()
    }

    /// SHA-256 over the five lanes (sender bases, receiver bases, sender
    /// bits, receiver bits, detections), each as a length then LSB-first bytes.
    fn digest(&self) -> String {
        let mut h = Sha256::new();
        let n = self.flags.len();
        for mask in [SENDER_DIAGONAL, RECEIVER_DIAGONAL, SENDER_BIT, RECEIVER_BIT, DETECTED] {
            h.update((n as u64).to_le_bytes());
            let bytes: Vec<u8> = self
                .flags
                .chunks(8)
                .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, f)| acc | (((f & mask != 0) as u8) << i)))
                .collect();
            h.update(&bytes);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn check_link(link: &OpticalLink, n_pulses: u64) -> Result<(), QkdError> {
    if link.state != LinkState::Active {
        return Err(QkdError::LinkNotActive);
    }
    if n_pulses == 0 {
        return Err(QkdError::NoPulses);
    }
    Ok(())
}

/// One-way BB84: the sender prepares, the channel (with Eve interposed when
/// configured) carries single photons, the receiver measures.
pub fn run_bb84_session(
    link: &OpticalLink,
    n_pulses: u64,
    eve: &EveConfig,
    channel: &ChannelParams,
    cfg: &QkdConfig,
    rng: &mut RandomStream,
) -> Result<SessionRecord, QkdError> {
    check_link(link, n_pulses)?;
    cfg.validate()?;
    let eta = channel.eta_total(link.loss_db);
    let mut detector = Detector::new(eta, channel, rng)?;
    let mut raw = RawRounds::with_capacity(n_pulses as usize);
    for _ in 0..n_pulses {
        let bit = rng.bit();
        let basis = Basis::random(rng);
        let mut pol = prepare(bit, basis);
        if *eve == EveConfig::InterceptResend {
            pol = intercept_resend(pol, rng);
        }
        let rbasis = Basis::random(rng);
        let ideal = measure(pol, rbasis, rng);
        let out = detector.detect(true, ideal, rng);
        raw.push(basis, rbasis, bit, out.bit, out.clicked);
    }
    post_process(Protocol::Bb84, n_pulses, raw, None, cfg, rng)
}

/// Polarization plug-&-play. The server is the measuring party; the client
/// encodes and attenuates the returned half of each server pulse.
///
/// `server_link` must be the server-client link; the forward strong pulse is
/// lossless and only the return leg uses channel statistics.
pub fn run_plugplay_session(
    server_link: &OpticalLink,
    n_pulses: u64,
    eve: &EveConfig,
    channel: &ChannelParams,
    cfg: &QkdConfig,
    rng: &mut RandomStream,
) -> Result<SessionRecord, QkdError> {
    check_link(server_link, n_pulses)?;
    cfg.validate()?;
    let eta = channel.eta_total(server_link.loss_db);
    let expected_monitor = cfg.strong_pulse_intensity / 2.0;
    let mut detector = Detector::new(eta, channel, rng)?;
    let mut raw = RawRounds::with_capacity(n_pulses as usize);
    let mut alarm = false;

    for _ in 0..n_pulses {
        let strong = Pulse::strong(cfg.strong_pulse_intensity);
        let mut arriving = strong.intensity;
        if let EveConfig::TrojanProbe { probe_intensity } = eve {
            arriving += probe_intensity;
        }
        // 50/50 split: P1 to the monitor, P2 to the encoder.
        let p1 = arriving / 2.0;
        let p2 = arriving / 2.0;
        if trojan_monitor(p1, expected_monitor, cfg.trojan_tolerance)? {
            alarm = true;
            break;
        }
        let bit = rng.bit();
        let basis = Basis::random(rng);
        let attenuation = cfg.mean_photon_number / p1;
        let mut ret = Pulse::single_photon(prepare(bit, basis), p2 * attenuation);
        let present = ret.photon_present(rng);
        if present && *eve == EveConfig::InterceptResend {
            ret.polarization = ret.polarization.map(|p| intercept_resend(p, rng));
        }
        let sbasis = Basis::random(rng);
        let ideal = match ret.polarization {
            Some(p) if present => measure(p, sbasis, rng),
            _ => false,
        };
        let out = detector.detect(present, ideal, rng);
        raw.push(basis, sbasis, bit, out.bit, out.clicked);
    }

    let abort = alarm.then_some(AbortReason::TrojanAlarm);
    post_process(Protocol::PlugAndPlay, n_pulses, raw, abort, cfg, rng)
}

fn aborted(
    protocol: Protocol,
    n_pulses: u64,
    raw: &RawRounds,
    reason: AbortReason,
) -> SessionRecord {
    SessionRecord {
        protocol,
        n_pulses,
        detections: raw.detections(),
        sifted_len: 0,
        qber_sample_len: 0,
        qber: 0.0,
        reconciliation_leak_bits: 0,
        final_key: BitString::new(),
        aborted: true,
        abort_reason: reason,
        transcript_digest: raw.digest(),
    }
}

fn post_process(
    protocol: Protocol,
    n_pulses: u64,
    raw: RawRounds,
    early_abort: Option<AbortReason>,
    cfg: &QkdConfig,
    rng: &mut RandomStream,
) -> Result<SessionRecord, QkdError> {
    if let Some(reason) = early_abort {
        return Ok(aborted(protocol, n_pulses, &raw, reason));
    }
    let (sifted_s, sifted_r) = raw.sift();
    let sifted_len = sifted_s.len() as u64;
    let mut rec = aborted(protocol, n_pulses, &raw, AbortReason::InsufficientDetections);
    rec.sifted_len = sifted_len;
    if sifted_len < cfg.min_sift_len.max(2) {
        return Ok(rec);
    }

    let (qber, rest_s, rest_r) = estimate_qber(&sifted_s, &sifted_r, cfg.sample_fraction, rng)?;
    rec.qber_sample_len = sifted_len - rest_s.len() as u64;
    rec.qber = qber.min(0.5);
    let out = distill(&rest_s, &rest_r, qber, cfg, rng)?;
    rec.reconciliation_leak_bits = out.leak_bits;
    rec.abort_reason = out.abort;
    rec.aborted = out.abort != AbortReason::None;
    rec.final_key = BitString::from(out.key);
    Ok(rec)
}
