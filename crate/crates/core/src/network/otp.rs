//! One-time-pad encryption and trusted-relay XOR chains.
//!
//! Direct transfer: `C = M ^ K`, `M = C ^ K`.
//!
//! Relayed transfer over `src, r1, ..., rk, dst` with hop keys `K1..K(k+1)`:
//! each relay `rj` publishes `Kj ^ K(j+1)`. The sender encrypts with `K1`;
//! the receiver XORs the ciphertext with its hop key and every published
//! block. The chain telescopes to `K1`, so with one relay this is
//! `M = C ^ K2 ^ (K1 ^ K2)`.

use thiserror::Error;

use super::{KeyBlock, KeyError, NodeId, PadLedger};
use crate::bits::BitString;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OtpError {
    #[error("length mismatch: {0} vs {1} bits")]
    LengthMismatch(usize, usize),
    #[error("relay ticket has {got} broadcasts, path needs {expected}")]
    MissingBroadcast { expected: usize, got: usize },
    #[error(transparent)]
    Reuse(#[from] KeyError),
}

/// Public record of one relayed key setup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayTicket {
    pub path: Vec<NodeId>,
    /// `(relay, K_in ^ K_out)` per interior node, in path order.
    pub broadcasts: Vec<(NodeId, BitString)>,
    pub block_len: usize,
}

pub fn xor_bits(a: &BitString, b: &BitString) -> Result<BitString, OtpError> {
    if a.len() != b.len() {
        return Err(OtpError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.xor(b))
}

/// Encrypt with a key block, marking it used. A second use fails.
pub fn encrypt(
    message: &BitString,
    key: &KeyBlock,
    ledger: &mut PadLedger,
) -> Result<BitString, OtpError> {
    let c = xor_bits(message, &key.bits)?;
    ledger.mark_used(key)?;
    Ok(c)
}

pub fn decrypt(
    ciphertext: &BitString,
    key: &KeyBlock,
    ledger: &mut PadLedger,
) -> Result<BitString, OtpError> {
    encrypt(ciphertext, key, ledger)
}

/// Blocks each interior node publishes, given the hop keys in path order.
pub fn relay_xor_blocks(hop_keys: &[BitString]) -> Result<Vec<BitString>, OtpError> {
    hop_keys
        .windows(2)
        .map(|w| xor_bits(&w[0], &w[1]))
        .collect()
}

pub fn decrypt_relay(
    ciphertext: &BitString,
    receiver_key: &BitString,
    ticket: &RelayTicket,
) -> Result<BitString, OtpError> {
    let expected = ticket.path.len().saturating_sub(2);
    if ticket.broadcasts.len() != expected {
        return Err(OtpError::MissingBroadcast {
            expected,
            got: ticket.broadcasts.len(),
        });
    }
    let mut m = xor_bits(ciphertext, receiver_key)?;
    for (_, block) in &ticket.broadcasts {
        m = xor_bits(&m, block)?;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{KeyBuffer, LinkKey};
    use crate::sim::RandomStream;
    use proptest::prelude::*;

    fn block(bits: &str) -> KeyBlock {
        let pair = LinkKey::new("a".into(), "b".into()).unwrap();
        let mut buf = KeyBuffer::new("a".into(), pair);
        let b = BitString::from_binary(bits);
        buf.append(&b);
        buf.consume(b.len() as u64).unwrap()
    }

    fn ticket(path: &[&str], blocks: Vec<BitString>) -> RelayTicket {
        let path: Vec<NodeId> = path.iter().map(|&p| p.into()).collect();
        let len = blocks.first().map(|b| b.len()).unwrap_or(0);
        RelayTicket {
            broadcasts: path[1..path.len() - 1].iter().cloned().zip(blocks).collect(),
            path,
            block_len: len,
        }
    }

    #[test]
    fn encrypt_example() {
        let mut ledger = PadLedger::new();
        let c = encrypt(&BitString::from_binary("0000"), &block("1010"), &mut ledger).unwrap();
        assert_eq!(c.to_binary(), "1010");
    }

    #[test]
    fn key_reuse_is_refused() {
        let mut ledger = PadLedger::new();
        let k = block("1010");
        let m = BitString::from_binary("0110");
        encrypt(&m, &k, &mut ledger).unwrap();
        assert!(matches!(encrypt(&m, &k, &mut ledger), Err(OtpError::Reuse(_))));
    }

    #[test]
    fn encrypt_length_mismatch() {
        let mut ledger = PadLedger::new();
        let err = encrypt(&BitString::from_binary("000"), &block("1010"), &mut ledger).unwrap_err();
        assert_eq!(err, OtpError::LengthMismatch(3, 4));
    }

    #[test]
    fn single_relay_identity() {
        let k1 = BitString::from_binary("1010");
        let k2 = BitString::from_binary("0110");
        let k3 = relay_xor_blocks(&[k1.clone(), k2.clone()]).unwrap();
        assert_eq!(k3.len(), 1);
        assert_eq!(k3[0].to_binary(), "1100");
        let m = BitString::from_binary("1001");
        let c = xor_bits(&m, &k1).unwrap();
        let t = ticket(&["s", "r", "d"], k3);
        assert_eq!(decrypt_relay(&c, &k2, &t).unwrap(), m);
    }

    #[test]
    fn two_relays_telescope() {
        let k: Vec<BitString> = ["1100", "1010", "0111"].iter().map(|s| BitString::from_binary(s)).collect();
        let b = relay_xor_blocks(&k).unwrap();
        assert_eq!(b[0], k[0].xor(&k[1]));
        assert_eq!(b[1], k[1].xor(&k[2]));
        assert_eq!(k[2].xor(&b[0]).xor(&b[1]), k[0]);
    }

    #[test]
    fn zero_length_message() {
        let t = ticket(&["s", "r", "d"], vec![BitString::new()]);
        assert!(decrypt_relay(&BitString::new(), &BitString::new(), &t).unwrap().is_empty());
    }

    #[test]
    fn missing_broadcast_rejected() {
        let mut t = ticket(&["s", "r1", "r2", "d"], vec![BitString::zeros(4), BitString::zeros(4)]);
        t.broadcasts.pop();
        let err = decrypt_relay(&BitString::zeros(4), &BitString::zeros(4), &t).unwrap_err();
        assert_eq!(err, OtpError::MissingBroadcast { expected: 2, got: 1 });
    }

    proptest! {
        #[test]
        fn decrypt_inverts_encrypt(m in proptest::collection::vec(any::<bool>(), 0..128), seed in any::<u64>()) {
            let mut rng = RandomStream::new(seed, "k");
            let key: String = m.iter().map(|_| if rng.bit() { '1' } else { '0' }).collect();
            let m = BitString::from(m);
            let mut ledger = PadLedger::new();
            let c = encrypt(&m, &block(&key), &mut ledger).unwrap();
            let mut other = PadLedger::new();
            prop_assert_eq!(decrypt(&c, &block(&key), &mut other).unwrap(), m);
        }
    }
}
