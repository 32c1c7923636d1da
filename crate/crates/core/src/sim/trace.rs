use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::arch::FsmState;
use crate::bits::BitVector;

/// One line of the JSON-lines trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub cycle: u64,
    pub state: FsmState,
    /// Index of the packet accepted this cycle.
    pub packet: Option<usize>,
    /// FNV-1a over every clause register bank, as 16 hex digits.
    pub checksum: String,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn clause_checksum(banks: &[BitVector]) -> u64 {
    let mut h = FNV_OFFSET;
    for bank in banks {
        for w in bank.words() {
            for b in w.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(FNV_PRIME);
            }
        }
    }
    h
}

pub fn write_trace(mut w: impl Write, records: &[TraceRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_of_nothing_is_offset() {
        assert_eq!(clause_checksum(&[]), FNV_OFFSET);
        // FNV-1a("a") = af63dc4c8601ec8c
        let mut h = FNV_OFFSET;
        h ^= u64::from(b'a');
        h = h.wrapping_mul(FNV_PRIME);
        assert_eq!(h, 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn checksum_sees_single_bit() {
        let a = vec![BitVector::ones(70)];
        let mut b = a.clone();
        b[0].set(69, false);
        assert_ne!(clause_checksum(&a), clause_checksum(&b));
    }

    #[test]
    fn jsonl_shape() {
        let r = TraceRecord {
            cycle: 3,
            state: FsmState::Compute,
            packet: Some(2),
            checksum: "00000000000000ff".into(),
        };
        let mut out = Vec::new();
        write_trace(&mut out, &[r.clone(), r]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(
            r#"{"cycle":3,"state":"COMPUTE","packet":2,"checksum":"00000000000000ff"}"#
        ));
    }
}
