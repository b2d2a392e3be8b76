//! Process-wide numeric settings.
//!
//! The working precision of [`BigReal`](crate::exactdist::BigReal) defaults to
//! 192 bits and can be overridden with `DISCRETE_DP_PRECISION_BITS`. Code that
//! needs to retry a comparison at higher precision uses [`with_precision`],
//! which scopes an override to the current thread.

use std::cell::Cell;
use std::sync::OnceLock;

pub const PRECISION_ENV: &str = "DISCRETE_DP_PRECISION_BITS";
pub const MIX_ENV: &str = "DISCRETE_DP_LAPLACE_MIX";

pub const DEFAULT_PRECISION_BITS: u32 = 192;
const MIN_PRECISION_BITS: u32 = 64;
/// Upper limit for doubling-and-retry.
pub const MAX_PRECISION_BITS: u32 = 4096;

/// Laplace scale at which the automatic switch moves from the geometric loop
/// to the split integer/fraction loop. Measured with `discrete-dp bench
/// --calibrate` on the reference build machine.
pub const DEFAULT_LAPLACE_MIX: u64 = 7;

static ENV_PRECISION: OnceLock<u32> = OnceLock::new();
static ENV_MIX: OnceLock<u64> = OnceLock::new();

thread_local! {
    static PRECISION_OVERRIDE: Cell<Option<u32>> = const { Cell::new(None) };
}

/// Reads (once) the precision environment variable. Front ends call this at
/// startup to pin the value.
pub fn env_precision_bits() -> u32 {
    *ENV_PRECISION.get_or_init(|| {
        std::env::var(PRECISION_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u32>().ok())
            .map(|b| b.clamp(MIN_PRECISION_BITS, MAX_PRECISION_BITS))
            .unwrap_or(DEFAULT_PRECISION_BITS)
    })
}

/// Current working precision in bits.
pub fn precision_bits() -> u32 {
    PRECISION_OVERRIDE
        .with(|p| p.get())
        .unwrap_or_else(env_precision_bits)
}

/// Runs `f` with the working precision set to `bits` on this thread.
pub fn with_precision<R>(bits: u32, f: impl FnOnce() -> R) -> R {
    struct Restore(Option<u32>);
    impl Drop for Restore {
        fn drop(&mut self) {
            PRECISION_OVERRIDE.with(|p| p.set(self.0));
        }
    }
    let prev = PRECISION_OVERRIDE.with(|p| p.replace(Some(bits)));
    let _restore = Restore(prev);
    f()
}

/// Evaluates `decide` at the current precision and keeps doubling it while the
/// answer is undetermined (`None`). Gives up at [`MAX_PRECISION_BITS`].
pub fn decide_with_retry<T>(mut decide: impl FnMut() -> Option<T>) -> Option<T> {
    let mut bits = precision_bits();
    loop {
        if let Some(v) = with_precision(bits, &mut decide) {
            return Some(v);
        }
        if bits >= MAX_PRECISION_BITS {
            return None;
        }
        bits = (bits * 2).min(MAX_PRECISION_BITS);
    }
}

/// Default Laplace switch threshold, overridable with `DISCRETE_DP_LAPLACE_MIX`.
pub fn default_laplace_mix() -> u64 {
    *ENV_MIX.get_or_init(|| {
        std::env::var(MIX_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u64>().ok())
            .unwrap_or(DEFAULT_LAPLACE_MIX)
    })
}
