//! Sampler timing: nanoseconds per sample as the scale grows, per Laplace
//! loop choice.

use std::fmt;
use std::hint::black_box;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::entropy::EntropySource;
use crate::error::{Error, Result};
use crate::samplers::{self, LaplaceAlgo, RationalParam};

pub const MIN_DRAWS: u64 = 10_000;
pub const MIN_REPS: u32 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchDist {
    Laplace,
    Gaussian,
}

impl FromStr for BenchDist {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laplace" => Ok(BenchDist::Laplace),
            "gaussian" => Ok(BenchDist::Gaussian),
            _ => Err(Error::Parse(format!("bench supports laplace or gaussian, not {s:?}"))),
        }
    }
}

impl fmt::Display for BenchDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchDist::Laplace => "laplace",
            BenchDist::Gaussian => "gaussian",
        })
    }
}

/// One timed configuration; `ns_per_sample` is the median over `reps`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchRecord {
    pub distribution: BenchDist,
    pub algo: String,
    pub sigma: String,
    pub ns_per_sample: f64,
    pub draws: u64,
    pub reps: u32,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Median nanoseconds per sample over `reps` timed runs of `draws` samples.
pub fn time_sampler(
    dist: BenchDist,
    scale: &RationalParam,
    algo: LaplaceAlgo,
    draws: u64,
    reps: u32,
    seed: u64,
) -> Result<f64> {
    let mut src = EntropySource::seeded(seed);
    let mut runs = Vec::with_capacity(reps as usize);
    for _ in 0..reps {
        let start = Instant::now();
        for _ in 0..draws {
            let z = match dist {
                BenchDist::Laplace => samplers::laplace(&mut src, scale, algo)?,
                BenchDist::Gaussian => samplers::gaussian(&mut src, scale, algo)?,
            };
            black_box(z);
        }
        runs.push(start.elapsed().as_nanos() as f64 / draws as f64);
    }
    Ok(median(runs))
}

/// One record per `(sigma, algo)` pair, sigma-major.
pub fn run_bench(
    dist: BenchDist,
    sigmas: &[RationalParam],
    algos: &[LaplaceAlgo],
    draws: u64,
    reps: u32,
    seed: u64,
) -> Result<Vec<BenchRecord>> {
    if sigmas.is_empty() || algos.is_empty() {
        return Err(Error::invalid("bench needs at least one sigma and one algorithm"));
    }
    if draws < MIN_DRAWS || reps < MIN_REPS {
        return Err(Error::invalid(format!(
            "bench needs at least {MIN_DRAWS} draws and {MIN_REPS} repetitions"
        )));
    }
    let mut out = Vec::new();
    for s in sigmas {
        for a in algos {
            let ns = time_sampler(dist, s, *a, draws, reps, seed)?;
            out.push(BenchRecord {
                distribution: dist,
                algo: a.tag().to_string(),
                sigma: s.to_decimal_string(),
                ns_per_sample: ns,
                draws,
                reps,
            });
        }
    }
    Ok(out)
}

/// Smallest integer scale in `lo..=hi` at which the split loop is at least
/// as fast as the geometric one, found by bisection on timed runs.
pub fn calibrate_mix(dist: BenchDist, lo: u64, hi: u64, draws: u64, reps: u32, seed: u64) -> Result<u64> {
    let faster2 = |t: u64| -> Result<bool> {
        let p = RationalParam::integer(t);
        let a1 = time_sampler(dist, &p, LaplaceAlgo::Algo1, draws, reps, seed)?;
        let a2 = time_sampler(dist, &p, LaplaceAlgo::Algo2, draws, reps, seed)?;
        Ok(a2 <= a1)
    };
    let (mut lo, mut hi) = (lo.max(1), hi.max(lo.max(1)));
    if faster2(lo)? {
        return Ok(lo);
    }
    if !faster2(hi)? {
        return Ok(hi);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if faster2(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
