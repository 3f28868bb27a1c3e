//! Extremum encoder: the message is the index of the largest-magnitude sample
//! in the encoder window, written as `k` bits MSB-first.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::samples::Samples;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    k: u32,
    index: u64,
}

impl Message {
    pub fn new(index: u64, k: u32) -> Result<Self> {
        if k > 63 {
            return invalid(format!("message size {k} exceeds 63 bits"));
        }
        if index >> k != 0 {
            return invalid(format!("index {index} does not fit in {k} bits"));
        }
        Ok(Self { k, index })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Decoded index `J`.
    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn bits(&self) -> Vec<u8> {
        pack(self.index, self.k).expect("validated at construction")
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        Self::new(unpack(bits)?, bits.len() as u32)
    }

    /// Byte layout: bits MSB-first, zero-padded on the right.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; (self.k as usize).div_ceil(8)];
        for (i, b) in self.bits().into_iter().enumerate() {
            out[i / 8] |= b << (7 - i % 8);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], k: u32) -> Result<Self> {
        let need = (k as usize).div_ceil(8);
        if bytes.len() != need {
            return invalid(format!("{k} bits need {need} bytes, got {}", bytes.len()));
        }
        let bits: Vec<u8> = (0..k as usize)
            .map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1)
            .collect();
        let pad_bits = need * 8 - k as usize;
        if pad_bits > 0 && bytes[need - 1] & ((1u8 << pad_bits) - 1) != 0 {
            return invalid("nonzero padding bits");
        }
        Self::from_bits(&bits)
    }
}

/// Big-endian `k`-bit representation of `j`.
pub fn pack(j: u64, k: u32) -> Result<Vec<u8>> {
    if k > 63 || j >> k != 0 {
        return invalid(format!("index {j} does not fit in {k} bits"));
    }
    Ok((0..k).rev().map(|b| ((j >> b) & 1) as u8).collect())
}

pub fn unpack(bits: &[u8]) -> Result<u64> {
    if bits.len() > 63 {
        return invalid("more than 63 bits");
    }
    bits.iter().try_fold(0u64, |acc, &b| match b {
        0 | 1 => Ok(acc << 1 | b as u64),
        _ => invalid(format!("bit value {b}")),
    })
}

/// Position (relative to the window start) and value of the largest `|x|^2`.
/// Ties go to the smallest index.
pub fn max_magnitude<S: Samples + ?Sized>(x: &S) -> Option<(usize, f64)> {
    let start = x.first_index();
    let mut best: Option<(usize, f64)> = None;
    for i in 0..x.len() {
        let m = x.sample(start + i as i64).norm_sqr();
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((i, m));
        }
    }
    best
}

/// Encodes the maximum-magnitude index of an `N = 2^k` sample window.
pub fn encode_max_index<S: Samples + ?Sized>(x: &S) -> Result<Message> {
    let n = x.len();
    if n == 0 {
        return invalid("empty encoder window");
    }
    if !n.is_power_of_two() {
        return invalid(format!("encoder window length {n} is not a power of two"));
    }
    let (j, _) = max_magnitude(x).expect("nonempty");
    Message::new(j as u64, n.trailing_zeros())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::Counted;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn from_mags(m: &[f64]) -> Vec<Complex64> {
        m.iter().map(|&v| Complex64::new(0.0, v.sqrt())).collect()
    }

    #[test]
    fn argmax_example() {
        let x = from_mags(&[0.5, 2.0, 1.0, 0.3]);
        let msg = encode_max_index(&x[..]).unwrap();
        assert_eq!(msg.index(), 1);
        assert_eq!(msg.k(), 2);
        assert_eq!(msg.bits(), vec![0, 1]);
    }

    #[test]
    fn ties_go_to_smallest_index() {
        let x = [Complex64::new(1.0, 0.0); 8];
        assert_eq!(encode_max_index(&x[..]).unwrap().index(), 0);
        let x = from_mags(&[0.1, 3.0, 0.2, 3.0]);
        assert_eq!(encode_max_index(&x[..]).unwrap().index(), 1);
    }

    #[test]
    fn invalid_windows() {
        let empty: Vec<Complex64> = vec![];
        assert!(encode_max_index(&empty[..]).is_err());
        assert!(encode_max_index(&from_mags(&[1.0, 2.0, 3.0])[..]).is_err());
        let single = from_mags(&[4.0]);
        let m = encode_max_index(&single[..]).unwrap();
        assert_eq!((m.index(), m.k()), (0, 0));
    }

    #[test]
    fn encoder_reads_each_sample_once() {
        let x = from_mags(&(0..256).map(|i| (i * 37 % 101) as f64).collect::<Vec<_>>());
        let counted = Counted::new(&x[..]);
        encode_max_index(&counted).unwrap();
        assert_eq!(counted.reads(), 256);
    }

    #[test]
    fn pack_examples() {
        assert_eq!(pack(0, 3).unwrap(), vec![0, 0, 0]);
        assert_eq!(pack(5, 3).unwrap(), vec![1, 0, 1]);
        assert!(pack(8, 3).is_err());
        assert!(unpack(&[1, 2]).is_err());
        assert_eq!(unpack(&[]).unwrap(), 0);
    }

    #[test]
    fn pack_roundtrip_exhaustive_small_k() {
        for k in 0..=12u32 {
            for j in 0..(1u64 << k) {
                assert_eq!(unpack(&pack(j, k).unwrap()).unwrap(), j);
            }
        }
    }

    #[test]
    fn byte_layout() {
        let m = Message::new(0b101, 3).unwrap();
        assert_eq!(m.to_bytes(), vec![0b1010_0000]);
        let m = Message::new(0b1_0000_0001, 9).unwrap();
        assert_eq!(m.to_bytes(), vec![0b1000_0000, 0b1000_0000]);
        assert!(Message::from_bytes(&[0b1010_0001], 3).is_err());
        assert!(Message::from_bytes(&[0, 0], 3).is_err());
    }

    proptest! {
        #[test]
        fn message_roundtrips(k in 0u32..=20, raw in any::<u64>()) {
            let j = if k == 0 { 0 } else { raw % (1u64 << k) };
            let m = Message::new(j, k).unwrap();
            prop_assert_eq!(Message::from_bits(&m.bits()).unwrap(), m);
            prop_assert_eq!(Message::from_bytes(&m.to_bytes(), k).unwrap(), m);
        }

        #[test]
        fn encoder_is_scale_and_phase_invariant(
            mags in proptest::collection::vec(0.0f64..10.0, 16),
            phases in proptest::collection::vec(0.0f64..TAU, 16),
            scale in 0.01f64..100.0,
            rot in 0.0f64..TAU,
        ) {
            let x: Vec<Complex64> = mags.iter().zip(&phases)
                .map(|(&m, &p)| Complex64::from_polar(m, p)).collect();
            let c = Complex64::from_polar(scale, rot);
            let y: Vec<Complex64> = x.iter().map(|v| v * c).collect();
            let a = encode_max_index(&x[..]).unwrap();
            let b = encode_max_index(&y[..]).unwrap();
            // scaling can merge near-ties under rounding; compare magnitudes instead
            let ma = x[a.index() as usize].norm_sqr();
            let mb = x[b.index() as usize].norm_sqr();
            prop_assert!((ma - mb).abs() <= 1e-12 * ma.max(1.0));
        }
    }
}
