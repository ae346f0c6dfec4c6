use rand::seq::index;

use super::{AbortReason, Basis, QkdConfig, QkdError};
use crate::sim::RandomStream;

/// Binary entropy in bits; `h2(0) = h2(1) = 0`.
pub fn binary_entropy(q: f64) -> f64 {
    if q <= 0.0 || q >= 1.0 {
        return 0.0;
    }
    -q * q.log2() - (1.0 - q) * (1.0 - q).log2()
}

/// Keep rounds that were detected and measured in the preparation basis.
pub fn sift(
    sender_bases: &[Basis],
    receiver_bases: &[Basis],
    sender_bits: &[bool],
    receiver_bits: &[bool],
    detected: &[bool],
) -> Result<(Vec<bool>, Vec<bool>), QkdError> {
    let n = sender_bases.len();
    for len in [receiver_bases.len(), sender_bits.len(), receiver_bits.len(), detected.len()] {
        if len != n {
            return Err(QkdError::LengthMismatch(n, len));
        }
    }
    let keep = (0..n).filter(|&i| detected[i] && sender_bases[i] == receiver_bases[i]);
    let (s, r) = keep.map(|i| (sender_bits[i], receiver_bits[i])).unzip();
    Ok((s, r))
}

/// Disclose a uniformly chosen sample of `ceil(fraction * len)` positions,
/// return the observed error rate and the undisclosed remainder of both keys.
pub fn estimate_qber(
    sender: &[bool],
    receiver: &[bool],
    sample_fraction: f64,
    rng: &mut RandomStream,
) -> Result<(f64, Vec<bool>, Vec<bool>), QkdError> {
    if sender.len() != receiver.len() {
        return Err(QkdError::LengthMismatch(sender.len(), receiver.len()));
    }
    let len = sender.len();
    if len < 2 {
        return Err(QkdError::EmptyInput(len));
    }
    if !(sample_fraction > 0.0 && sample_fraction < 1.0) {
        return Err(QkdError::InvalidConfig("sample_fraction must lie in (0, 1)".into()));
    }
    let k = ((sample_fraction * len as f64).ceil() as usize).clamp(1, len);
    let mut disclosed = vec![false; len];
    for i in index::sample(rng, len, k) {
        disclosed[i] = true;
    }
    let mut errors = 0usize;
    let mut rest_s = Vec::with_capacity(len - k);
    let mut rest_r = Vec::with_capacity(len - k);
    for i in 0..len {
        if disclosed[i] {
            errors += (sender[i] != receiver[i]) as usize;
        } else {
            rest_s.push(sender[i]);
            rest_r.push(receiver[i]);
        }
    }
    Ok((errors as f64 / k as f64, rest_s, rest_r))
}

/// Modeled error correction: the receiver ends with the sender's key and the
/// exchange is charged `ceil(f_ec * h2(qber) * len)` leaked bits.
pub fn reconcile(
    sender: &[bool],
    receiver: &[bool],
    qber: f64,
    f_ec: f64,
) -> Result<(Vec<bool>, u64), QkdError> {
    if sender.len() != receiver.len() {
        return Err(QkdError::LengthMismatch(sender.len(), receiver.len()));
    }
    if !(0.0..0.5).contains(&qber) {
        return Err(QkdError::InvalidQber(qber));
    }
    let leak = (f_ec * binary_entropy(qber) * sender.len() as f64).ceil() as u64;
    Ok((sender.to_vec(), leak))
}

/// `floor(len * (1 - h2(q)) - leak - margin)`, or 0 when that is not positive
/// or `q` exceeds the abort threshold.
pub fn final_key_length(len: usize, qber: f64, leak_bits: u64, cfg: &QkdConfig) -> usize {
    if qber > cfg.qber_abort || len == 0 {
        return 0;
    }
    let m = (len as f64 * (1.0 - binary_entropy(qber)) - leak_bits as f64
        - cfg.safety_margin_bits as f64)
        .floor();
    if m > 0.0 {
        m as usize
    } else {
        0
    }
}

/// Compress `key` to [`final_key_length`] bits with a random Toeplitz matrix
/// drawn from `rng`. Returns an empty key when nothing can be extracted.
pub fn privacy_amplify(
    key: &[bool],
    qber: f64,
    leak_bits: u64,
    cfg: &QkdConfig,
    rng: &mut RandomStream,
) -> Vec<bool> {
    let m = final_key_length(key.len(), qber, leak_bits, cfg);
    if m == 0 {
        return Vec::new();
    }
    let diag: Vec<bool> = (0..key.len() + m - 1).map(|_| rng.bit()).collect();
    toeplitz_hash(key, &diag, m)
}

/// Result of [`distill`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distilled {
    /// Empty unless `abort` is `None`.
    pub key: Vec<bool>,
    pub leak_bits: u64,
    pub abort: AbortReason,
}

/// Threshold check, reconciliation and privacy amplification of key
/// strings whose QBER sample was already removed.
///
/// Both parties hash with the same publicly announced seed; diverging
/// outputs are reported as [`QkdError::KeyMismatch`].
pub fn distill(
    sender: &[bool],
    receiver: &[bool],
    qber: f64,
    cfg: &QkdConfig,
    rng: &mut RandomStream,
) -> Result<Distilled, QkdError> {
    if qber > cfg.qber_abort {
        return Ok(Distilled {
            key: Vec::new(),
            leak_bits: 0,
            abort: AbortReason::QberExceedsThreshold,
        });
    }
    let (corrected, leak_bits) = reconcile(sender, receiver, qber, cfg.f_ec)?;
    let mut receiver_rng = rng.clone();
    let sender_key = privacy_amplify(sender, qber, leak_bits, cfg, rng);
    let receiver_key = privacy_amplify(&corrected, qber, leak_bits, cfg, &mut receiver_rng);
    if sender_key != receiver_key {
        return Err(QkdError::KeyMismatch);
    }
    let abort = if sender_key.is_empty() {
        AbortReason::NoExtractableKey
    } else {
        AbortReason::None
    };
    Ok(Distilled {
        key: sender_key,
        leak_bits,
        abort,
    })
}

/// `out[i] = XOR_j T[i][j] & key[j]` with `T[i][j] = diag[i - j + n - 1]`.
///
/// `diag` must hold `n + m - 1` bits.
pub fn toeplitz_hash(key: &[bool], diag: &[bool], m: usize) -> Vec<bool> {
    let n = key.len();
    assert_eq!(diag.len(), n + m - 1, "toeplitz diagonal length");
    // Row i reads diag backwards; reversing it makes every row a contiguous
    // window starting at m - 1 - i.
    let rev: Vec<bool> = diag.iter().rev().copied().collect();
    let key_words = pack(key);
    let mut rev_words = pack(&rev);
    rev_words.push(0);
    let tail_mask = if n % 64 == 0 { u64::MAX } else { (1u64 << (n % 64)) - 1 };

    (0..m)
        .map(|i| {
            let start = m - 1 - i;
            let mut parity = 0u32;
            for (w, &kw) in key_words.iter().enumerate() {
                let mut win = window(&rev_words, start + 64 * w);
                if w + 1 == key_words.len() {
                    win &= tail_mask;
                }
                parity ^= (kw & win).count_ones();
            }
            parity & 1 == 1
        })
        .collect()
}

fn pack(bits: &[bool]) -> Vec<u64> {
    bits.chunks(64)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
        })
        .collect()
}

fn window(words: &[u64], bit: usize) -> u64 {
    let (idx, shift) = (bit / 64, bit % 64);
    let lo = words.get(idx).copied().unwrap_or(0);
    if shift == 0 {
        lo
    } else {
        let hi = words.get(idx + 1).copied().unwrap_or(0);
        (lo >> shift) | (hi << (64 - shift))
    }
}
