//! The single source of randomness: a stream of uniform bytes.
//!
//! Everything else (uniform integers, Bernoulli trials, Laplace and Gaussian
//! noise) is built from [`EntropySource::next_byte`] using exact integer
//! arithmetic.

use ibig::UBig;
use rand_chacha::ChaCha20Rng;
use rand_core::{OsRng, RngCore, SeedableRng};

use crate::error::{Error, Result};

const BUF_LEN: usize = 512;

enum Kind {
    Os,
    Seeded(Box<ChaCha20Rng>),
    Replay { script: Vec<u8>, pos: usize },
}

/// Uniform byte stream backed by the OS CSPRNG, a seeded ChaCha20 stream, or
/// a fixed replay script.
///
/// A source is single-owner and mutable; concurrent work should give each
/// task its own source.
pub struct EntropySource {
    kind: Kind,
    buf: [u8; BUF_LEN],
    buf_pos: usize,
    consumed: u64,
    loop_cap: Option<u64>,
}

impl std::fmt::Debug for EntropySource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.kind {
            Kind::Os => "os",
            Kind::Seeded(_) => "seeded",
            Kind::Replay { .. } => "replay",
        };
        f.debug_struct("EntropySource")
            .field("kind", &kind)
            .field("consumed", &self.consumed)
            .finish()
    }
}

impl EntropySource {
    fn with_kind(kind: Kind) -> Self {
        EntropySource {
            kind,
            buf: [0; BUF_LEN],
            buf_pos: BUF_LEN,
            consumed: 0,
            loop_cap: None,
        }
    }

    pub fn os() -> Self {
        Self::with_kind(Kind::Os)
    }

    /// Deterministic stream keyed by `seed`.
    pub fn seeded(seed: u64) -> Self {
        Self::with_kind(Kind::Seeded(Box::new(ChaCha20Rng::seed_from_u64(seed))))
    }

    /// Replays `script` byte for byte and fails once it runs out.
    pub fn replay(script: impl Into<Vec<u8>>) -> Self {
        Self::with_kind(Kind::Replay {
            script: script.into(),
            pos: 0,
        })
    }

    /// `Some(seed)` gives a seeded source, `None` the OS source.
    pub fn from_seed(seed: Option<u64>) -> Self {
        match seed {
            Some(s) => Self::seeded(s),
            None => Self::os(),
        }
    }

    /// Diagnostic cap on rejection-loop iterations. Off by default; only meant
    /// for fuzzing with replay scripts, since any cap biases the output.
    pub fn with_loop_cap(mut self, cap: u64) -> Self {
        self.loop_cap = Some(cap);
        self
    }

    pub fn loop_cap(&self) -> Option<u64> {
        self.loop_cap
    }

    /// Number of bytes consumed so far.
    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn next_byte(&mut self) -> Result<u8> {
        let b = match &mut self.kind {
            Kind::Replay { script, pos } => {
                let b = *script.get(*pos).ok_or(Error::EntropyExhausted {
                    consumed: self.consumed,
                })?;
                *pos += 1;
                b
            }
            Kind::Os | Kind::Seeded(_) => {
                if self.buf_pos == BUF_LEN {
                    self.refill()?;
                }
                let b = self.buf[self.buf_pos];
                self.buf_pos += 1;
                b
            }
        };
        self.consumed += 1;
        Ok(b)
    }

    fn refill(&mut self) -> Result<()> {
        match &mut self.kind {
            Kind::Os => OsRng
                .try_fill_bytes(&mut self.buf)
                .map_err(|e| Error::Io(format!("OS entropy unavailable: {e}")))?,
            Kind::Seeded(rng) => rng.fill_bytes(&mut self.buf),
            Kind::Replay { .. } => unreachable!("replay sources are unbuffered"),
        }
        self.buf_pos = 0;
        Ok(())
    }

    /// Uniform integer in `[0, n)`.
    ///
    /// Reads `ceil(log2 n)` bits as whole big-endian bytes, masks the leading
    /// byte down to that bit width and rejects candidates `>= n`. `n = 1`
    /// consumes nothing.
    pub fn uniform(&mut self, n: &UBig) -> Result<UBig> {
        if *n == UBig::from(0u8) {
            return Err(Error::invalid("uniform range must be at least 1"));
        }
        if let Ok(small) = u64::try_from(n) {
            return self.uniform_u64(small).map(UBig::from);
        }
        let bits = (n - UBig::from(1u8)).bit_len();
        let nbytes = bits.div_ceil(8);
        let mask = top_byte_mask(bits);
        let mut bytes = vec![0u8; nbytes];
        let mut rounds = 0u64;
        loop {
            self.check_cap(&mut rounds)?;
            for b in bytes.iter_mut() {
                *b = self.next_byte()?;
            }
            bytes[0] &= mask;
            let cand = UBig::from_be_bytes(&bytes);
            if cand < *n {
                return Ok(cand);
            }
        }
    }

    /// Same protocol as [`uniform`](Self::uniform) for ranges that fit in a
    /// machine word.
    pub fn uniform_u64(&mut self, n: u64) -> Result<u64> {
        if n == 0 {
            return Err(Error::invalid("uniform range must be at least 1"));
        }
        if n == 1 {
            return Ok(0);
        }
        let bits = (64 - (n - 1).leading_zeros()) as usize;
        let nbytes = bits.div_ceil(8);
        let mask = top_byte_mask(bits);
        let mut rounds = 0u64;
        loop {
            self.check_cap(&mut rounds)?;
            let mut cand = u64::from(self.next_byte()? & mask);
            for _ in 1..nbytes {
                cand = (cand << 8) | u64::from(self.next_byte()?);
            }
            if cand < n {
                return Ok(cand);
            }
        }
    }

    pub(crate) fn check_cap(&self, iterations: &mut u64) -> Result<()> {
        *iterations += 1;
        match self.loop_cap {
            Some(cap) if *iterations > cap => Err(Error::LoopCapExceeded(cap)),
            _ => Ok(()),
        }
    }
}

/// Mask for the leading byte of a `bits`-bit big-endian candidate.
fn top_byte_mask(bits: usize) -> u8 {
    match bits % 8 {
        0 => 0xFF,
        r => (1u16 << r).wrapping_sub(1) as u8,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_is_identity_on_script() {
        let mut src = EntropySource::replay([0x00, 0xFF]);
        assert_eq!(src.next_byte().unwrap(), 0);
        assert_eq!(src.next_byte().unwrap(), 255);
        assert_eq!(src.consumed(), 2);
        assert_eq!(
            src.next_byte(),
            Err(Error::EntropyExhausted { consumed: 2 })
        );
    }

    #[test]
    fn seeded_sources_repeat() {
        let mut a = EntropySource::seeded(42);
        let mut b = EntropySource::seeded(42);
        let mut c = EntropySource::seeded(43);
        let xa: Vec<u8> = (0..2000).map(|_| a.next_byte().unwrap()).collect();
        let xb: Vec<u8> = (0..2000).map(|_| b.next_byte().unwrap()).collect();
        let xc: Vec<u8> = (0..2000).map(|_| c.next_byte().unwrap()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn uniform_one_consumes_nothing() {
        let mut src = EntropySource::replay([]);
        assert_eq!(src.uniform(&UBig::from(1u8)).unwrap(), UBig::from(0u8));
        assert_eq!(src.consumed(), 0);
    }

    #[test]
    fn uniform_zero_is_rejected() {
        let mut src = EntropySource::seeded(1);
        assert!(matches!(
            src.uniform(&UBig::from(0u8)),
            Err(Error::InvalidParam(_))
        ));
    }

    #[test]
    fn uniform_256_is_a_byte() {
        let mut src = EntropySource::replay([7, 200]);
        assert_eq!(src.uniform_u64(256).unwrap(), 7);
        assert_eq!(src.uniform_u64(256).unwrap(), 200);
    }

    #[test]
    fn uniform_masks_and_rejects() {
        // n = 3 uses a 2-bit window: 0xFF -> 3 (rejected), 0x06 -> 2.
        let mut src = EntropySource::replay([0xFF, 0x06]);
        assert_eq!(src.uniform_u64(3).unwrap(), 2);
        assert_eq!(src.consumed(), 2);
        // n = 300 uses 9 bits over two bytes: 0x01,0x2C = 300 (rejected), 0x00,0x05.
        let mut src = EntropySource::replay([0x01, 0x2C, 0xFE, 0x05]);
        assert_eq!(src.uniform_u64(300).unwrap(), 5);
    }

    #[test]
    fn word_path_matches_byte_protocol() {
        let script: Vec<u8> = (0..64u32).map(|i| (i * 37 % 251) as u8).collect();
        for n in [2u64, 3, 255, 256, 257, 1000, 65535, 1 << 40] {
            let mut a = EntropySource::replay(script.clone());
            let mut b = EntropySource::replay(script.clone());
            let x = a.uniform_u64(n).unwrap();
            let bits = (UBig::from(n) - UBig::from(1u8)).bit_len();
            let nbytes = bits.div_ceil(8);
            let mut y;
            loop {
                let mut bytes: Vec<u8> = (0..nbytes).map(|_| b.next_byte().unwrap()).collect();
                bytes[0] &= top_byte_mask(bits);
                y = UBig::from_be_bytes(&bytes);
                if y < UBig::from(n) {
                    break;
                }
            }
            assert_eq!(UBig::from(x), y, "n = {n}");
        }
    }

    #[test]
    fn uniform_above_word_size() {
        let n = UBig::from(1u8) << 70;
        let mut src = EntropySource::seeded(9);
        for _ in 0..100 {
            assert!(src.uniform(&n).unwrap() < n);
        }
        // 70 bits -> 9 bytes per attempt, power-of-two range never rejects.
        assert_eq!(src.consumed(), 900);
    }

    #[test]
    fn loop_cap_trips() {
        let mut src = EntropySource::replay(vec![0xFF; 16]).with_loop_cap(3);
        assert_eq!(src.uniform_u64(3), Err(Error::LoopCapExceeded(3)));
    }
}
