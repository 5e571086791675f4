//! Small shared helpers: deterministic PRNG, rational parsing, hashing.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// SplitMix64. Deterministic across platforms and releases, which keeps
/// seeded runs byte-reproducible without pulling in a rand dependency.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [-1, 1).
    pub fn next_signed(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }
}

/// Build a rational from small integers.
pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parse an exact rational from "p/q", a decimal string ("1.3"), or an
/// integer string. Decimals parse exactly: "1.3" becomes 13/10.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Config("empty rational literal".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad rational numerator in {s:?}")))?;
        let den: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad rational denominator in {s:?}")))?;
        if den.is_zero() {
            return Err(Error::Config(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(num, den));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let negative = int_part.trim_start().starts_with('-');
        let int_part = if int_part.is_empty() || int_part == "-" {
            BigInt::zero()
        } else {
            int_part
                .parse()
                .map_err(|_| Error::Config(format!("bad decimal in {s:?}")))?
        };
        if frac_part.is_empty() {
            return Ok(BigRational::from_integer(int_part));
        }
        if !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Config(format!("bad decimal in {s:?}")));
        }
        let digits: BigInt = frac_part
            .parse()
            .map_err(|_| Error::Config(format!("bad decimal in {s:?}")))?;
        let scale = BigInt::from(10).pow(frac_part.len() as u32);
        let frac = BigRational::new(digits, scale);
        let int = BigRational::from_integer(int_part);
        return Ok(if negative { int - frac } else { int + frac });
    }
    let int: BigInt = s
        .parse()
        .map_err(|_| Error::Config(format!("bad rational literal {s:?}")))?;
    Ok(BigRational::from_integer(int))
}

/// Render a rational as "num/den" (or "num" when integral).
pub fn rational_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Nearest-f64 value of a rational.
pub fn rational_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// FNV-1a 64-bit content hash, rendered as 16 hex digits. Used to tie
/// output files to the exact configuration that produced them.
pub fn fnv1a64_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Float formatting shared by every CSV writer: 17 significant digits,
/// enough to round-trip any f64 bit pattern.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
