//! Pairwise one-time-pad key pools.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{LinkKey, NodeId};
use crate::bits::BitString;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("{holder} holds {available} unconsumed bits for {pair}, {needed} requested")]
    Insufficient {
        holder: NodeId,
        pair: LinkKey,
        available: u64,
        needed: u64,
    },
    #[error("key block {holder}/{pair}@{offset}+{len} was already used")]
    Reuse {
        holder: NodeId,
        pair: LinkKey,
        offset: u64,
        len: u64,
    },
}

/// One node's pool of key bits shared with one peer.
///
/// Bits are append-only. Everything before `consumed_offset` has been handed
/// out exactly once and is never returned again.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyBuffer {
    holder: NodeId,
    pair: LinkKey,
    bits: Vec<bool>,
    consumed_offset: u64,
}

impl KeyBuffer {
    pub fn new(holder: NodeId, pair: LinkKey) -> Self {
        Self {
            holder,
            pair,
            bits: Vec::new(),
            consumed_offset: 0,
        }
    }

    pub fn holder(&self) -> &NodeId {
        &self.holder
    }

    pub fn pair(&self) -> &LinkKey {
        &self.pair
    }

    pub fn total_bits(&self) -> u64 {
        self.bits.len() as u64
    }

    pub fn consumed_offset(&self) -> u64 {
        self.consumed_offset
    }

    pub fn available(&self) -> u64 {
        self.total_bits() - self.consumed_offset
    }

    /// Appends fresh key material and returns the offset it starts at.
    pub fn append(&mut self, bits: &[bool]) -> u64 {
        let offset = self.total_bits();
        self.bits.extend_from_slice(bits);
        offset
    }

    /// Hands out the next `n` unconsumed bits.
    pub fn consume(&mut self, n: u64) -> Result<KeyBlock, KeyError> {
        if n > self.available() {
            return Err(KeyError::Insufficient {
                holder: self.holder.clone(),
                pair: self.pair.clone(),
                available: self.available(),
                needed: n,
            });
        }
        let start = self.consumed_offset as usize;
        let block = KeyBlock {
            holder: self.holder.clone(),
            pair: self.pair.clone(),
            offset: self.consumed_offset,
            bits: BitString::from(&self.bits[start..start + n as usize]),
        };
        self.consumed_offset += n;
        Ok(block)
    }
}

/// Key bits taken out of a [`KeyBuffer`], tagged with where they came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyBlock {
    pub holder: NodeId,
    pub pair: LinkKey,
    pub offset: u64,
    pub bits: BitString,
}

impl KeyBlock {
    pub fn len(&self) -> u64 {
        self.bits.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Records which key ranges have been used for encryption, decryption or
/// relay XOR, and refuses any second use of a range.
#[derive(Debug, Clone, Default)]
pub struct PadLedger {
    used: BTreeMap<(NodeId, LinkKey), Vec<(u64, u64)>>,
}

impl PadLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mark_used(&mut self, block: &KeyBlock) -> Result<(), KeyError> {
        if block.is_empty() {
            return Ok(());
        }
        let (start, end) = (block.offset, block.offset + block.len());
        let ranges = self
            .used
            .entry((block.holder.clone(), block.pair.clone()))
            .or_default();
        if ranges.iter().any(|&(s, e)| start < e && s < end) {
            return Err(KeyError::Reuse {
                holder: block.holder.clone(),
                pair: block.pair.clone(),
                offset: block.offset,
                len: block.len(),
            });
        }
        ranges.push((start, end));
        Ok(())
    }

    pub fn used_bits(&self, holder: &NodeId, pair: &LinkKey) -> u64 {
        self.used
            .get(&(holder.clone(), pair.clone()))
            .map(|r| r.iter().map(|(s, e)| e - s).sum())
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn buf() -> KeyBuffer {
        KeyBuffer::new("a".into(), LinkKey::new("a".into(), "b".into()).unwrap())
    }

    #[test]
    fn consume_advances_and_never_repeats() {
        let mut b = buf();
        b.append(&[true, false, true, true]);
        let first = b.consume(2).unwrap();
        let second = b.consume(2).unwrap();
        assert_eq!(first.offset, 0);
        assert_eq!(second.offset, 2);
        assert_eq!(first.bits.to_binary(), "10");
        assert_eq!(second.bits.to_binary(), "11");
        assert!(matches!(b.consume(1), Err(KeyError::Insufficient { available: 0, .. })));
        assert_eq!(b.consumed_offset(), 4);
    }

    #[test]
    fn failed_consume_leaves_buffer_untouched() {
        let mut b = buf();
        b.append(&[true; 3]);
        assert!(b.consume(4).is_err());
        assert_eq!(b.available(), 3);
    }

    #[test]
    fn ledger_rejects_reuse() {
        let mut b = buf();
        b.append(&[false; 8]);
        let block = b.consume(4).unwrap();
        let mut ledger = PadLedger::new();
        ledger.mark_used(&block).unwrap();
        assert!(matches!(ledger.mark_used(&block), Err(KeyError::Reuse { .. })));
        let next = b.consume(4).unwrap();
        ledger.mark_used(&next).unwrap();
        assert_eq!(ledger.used_bits(&"a".into(), &block.pair), 8);
    }
}
