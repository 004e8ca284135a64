//! Monte-Carlo laboratory for the block measure m_k.
//!
//! A sample plants an occurrence of I_k and draws fair bits until the next
//! one. The block runs from the planted end (a -1) up to, not including, the
//! end of the next occurrence, so |B| equals the number of bits drawn.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::blockscan::{scan_opening, BlockKind, BlockDecomposition};
use crate::error::{Error, Result};
use crate::params::ScaleTable;
use crate::window::{Spin, YRow};

pub const RUNAWAY_LIMIT: u64 = 1_000_000_000;

/// Fair bits drawn 64 at a time.
pub struct Bits<'a, R: RngCore> {
    rng: &'a mut R,
    word: u64,
    left: u32,
}

impl<'a, R: RngCore> Bits<'a, R> {
    pub fn new(rng: &'a mut R) -> Self {
        Bits { rng, word: 0, left: 0 }
    }

    #[inline]
    pub fn next(&mut self) -> Spin {
        if self.left == 0 {
            self.word = self.rng.next_u64();
            self.left = 64;
        }
        let b = (self.word & 1) as Spin;
        self.word >>= 1;
        self.left -= 1;
        2 * b - 1
    }
}

/// Draws one block length for a pattern of length `ell`. When `keep` is
/// given the segment (planted -1 first) is written into it. Also returns
/// the full +1 run that precedes the terminating -1.
pub fn draw_block<R: RngCore>(
    ell: u64,
    bits: &mut Bits<'_, R>,
    mut keep: Option<&mut Vec<Spin>>,
) -> Result<(u64, u64)> {
    if let Some(seg) = keep.as_deref_mut() {
        seg.clear();
        seg.push(-1);
    }
    let need = ell - 1;
    let mut run = 0u64;
    let mut n = 0u64;
    loop {
        let b = bits.next();
        n += 1;
        if b == -1 && run >= need {
            return Ok((n, run));
        }
        if n >= RUNAWAY_LIMIT {
            return Err(Error::RunawayLength { limit: RUNAWAY_LIMIT });
        }
        run = if b == 1 { run + 1 } else { 0 };
        if let Some(seg) = keep.as_deref_mut() {
            seg.push(b);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockSample {
    pub k: usize,
    /// y over the block, starting with the planted -1.
    pub segment: Vec<Spin>,
    pub len: u64,
    pub opening_size: u64,
    pub good: bool,
}

/// Size of C(B) for a block whose y-values are `segment`. Position 0 is an
/// end of every scale up to k.
pub fn opening_size(segment: &[Spin], scales: &ScaleTable, k: usize) -> u64 {
    let mut n = 0u64;
    scan_opening(segment, scales, k, 0, segment.len(), |_| n += 1);
    n
}

pub fn is_good(scales: &ScaleTable, k: usize, len: u64, opening: u64) -> bool {
    scales.short_enough(k, len) && scales.open_enough(k, opening)
}

/// An exact draw from m_k together with its opening and good flag.
pub fn sample_mk_block<R: RngCore>(scales: &ScaleTable, k: usize, rng: &mut R) -> Result<BlockSample> {
    let ell = scales.row(k)?.ell;
    let mut bits = Bits::new(rng);
    let mut segment = Vec::new();
    let (len, _) = draw_block(ell, &mut bits, Some(&mut segment))?;
    debug_assert_eq!(segment.len() as u64, len);
    let opening = opening_size(&segment, scales, k);
    Ok(BlockSample { k, good: is_good(scales, k, len, opening), segment, len, opening_size: opening })
}

/// P(|B| = n) for n in 0..=n_max, by a run-length transfer matrix.
pub fn waiting_pmf(ell: u64, n_max: usize) -> Vec<f64> {
    let need = (ell - 1) as usize;
    let mut state = vec![0.0f64; need + 1];
    state[0] = 1.0;
    let mut pmf = vec![0.0; n_max + 1];
    for slot in pmf.iter_mut().skip(1) {
        let mut next = vec![0.0f64; need + 1];
        for (r, &p) in state.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            // +1
            next[(r + 1).min(need)] += 0.5 * p;
            // -1
            if r >= need {
                *slot += 0.5 * p;
            } else {
                next[0] += 0.5 * p;
            }
        }
        state = next;
    }
    pmf
}

/// Exact m_k mass of {j beta < |B| <= (j+1) beta} for j in 0..=j_max.
pub fn exact_bucket_masses(ell: u64, j_max: usize) -> Vec<f64> {
    let beta = 1usize << ell;
    let pmf = waiting_pmf(ell, beta * (j_max + 1));
    (0..=j_max).map(|j| pmf[j * beta + 1..=(j + 1) * beta].iter().sum()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailBucket {
    pub j: usize,
    pub mass: f64,
    pub stderr: f64,
    pub exact: f64,
    pub bound_lo: f64,
    pub bound_hi: f64,
    /// Outside the open envelope by more than three standard errors.
    pub flag: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailHistogram {
    pub k: usize,
    pub beta: u64,
    pub samples: u64,
    pub buckets: Vec<TailBucket>,
    pub mean_len: f64,
    pub mean_len_stderr: f64,
    /// Fraction of blocks with |B| <= beta: the chance that I_k shows up
    /// within beta steps.
    pub y_tilde: f64,
    pub y_tilde_ref: f64,
}

const SHARD: u64 = 1 << 14;

fn shard_ranges(n: u64) -> Vec<(u64, u64)> {
    (0..n.div_ceil(SHARD)).map(|i| (i, SHARD.min(n - i * SHARD))).collect()
}

fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

/// Block lengths from `n` independent samples. Shards use separate streams
/// so the result does not depend on the thread count.
pub fn sample_lengths(ell: u64, n: u64, seed: u64) -> Result<Vec<u64>> {
    let parts: Result<Vec<Vec<u64>>> = shard_ranges(n)
        .into_par_iter()
        .map(|(i, m)| {
            let mut rng = shard_rng(seed, i);
            let mut bits = Bits::new(&mut rng);
            (0..m).map(|_| draw_block(ell, &mut bits, None).map(|(len, _)| len)).collect()
        })
        .collect();
    Ok(parts?.concat())
}

pub fn tail_histogram(scales: &ScaleTable, k: usize, n: u64, j_max: usize, seed: u64) -> Result<TailHistogram> {
    let row = scales.row(k)?;
    let beta = row.beta;
    let lengths = sample_lengths(row.ell, n, seed)?;
    let mut counts = vec![0u64; j_max + 1];
    let mut sum = 0.0f64;
    let mut sum2 = 0.0f64;
    for &len in &lengths {
        let j = ((len - 1) / beta) as usize;
        if j <= j_max {
            counts[j] += 1;
        }
        sum += len as f64;
        sum2 += (len as f64).powi(2);
    }
    let nf = n.max(1) as f64;
    let exact = if beta <= 1 << 16 { exact_bucket_masses(row.ell, j_max) } else { vec![f64::NAN; j_max + 1] };
    let buckets = if n == 0 {
        Vec::new()
    } else {
        counts
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let mass = c as f64 / nf;
                let stderr = (mass * (1.0 - mass) / nf).sqrt();
                let bound_lo = 2f64.powi(-2 * j as i32 - 2);
                let bound_hi = if j == 0 { 1.0 } else { 2.5f64.powi(-(j as i32)) };
                let flag = mass + 3.0 * stderr <= bound_lo || mass - 3.0 * stderr >= bound_hi;
                TailBucket { j, mass, stderr, exact: exact[j], bound_lo, bound_hi, flag }
            })
            .collect()
    };
    let mean = sum / nf;
    let var = (sum2 / nf - mean * mean).max(0.0);
    let b = beta as f64;
    Ok(TailHistogram {
        k,
        beta,
        samples: n,
        buckets,
        mean_len: mean,
        mean_len_stderr: (var / nf).sqrt(),
        y_tilde: if n == 0 { 0.0 } else { counts[0] as f64 / nf },
        y_tilde_ref: 1.0 - (1.0 - 1.0 / b).powf(b),
    })
}

/// A ratio estimate with standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
}

impl Estimate {
    pub fn proportion(hits: u64, n: u64) -> Self {
        let p = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        Estimate { value: p, stderr: (p * (1.0 - p) / n.max(1) as f64).sqrt(), n }
    }

    /// sum(w_i z_i) / sum(w_i) with a delta-method error.
    pub fn ratio(pairs: &[(f64, f64)]) -> Self {
        let n = pairs.len();
        if n == 0 {
            return Estimate { value: 0.0, stderr: 0.0, n: 0 };
        }
        let sw: f64 = pairs.iter().map(|p| p.0).sum();
        let swz: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
        let r = swz / sw;
        let wbar = sw / n as f64;
        let s2: f64 = pairs.iter().map(|&(w, z)| (w * (z - r)).powi(2)).sum::<f64>() / n as f64;
        Estimate { value: r, stderr: (s2 / n as f64).sqrt() / wbar, n: n as u64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoodReport {
    pub k: usize,
    /// m_k(B good).
    pub plain: Estimate,
    /// P(B_k(0) good) = sum |B| m_k(B good) / beta_k.
    pub size_biased: Estimate,
    /// mean |B| / beta_k; should be 1.
    pub mean_len_ratio: Estimate,
    pub mean_opening: f64,
}

pub fn good_prob_estimate(scales: &ScaleTable, k: usize, n: u64, seed: u64) -> Result<GoodReport> {
    let beta = scales.row(k)?.beta as f64;
    let parts: Result<Vec<Vec<(u64, u64, bool)>>> = shard_ranges(n)
        .into_par_iter()
        .map(|(i, m)| {
            let mut rng = shard_rng(seed, i);
            (0..m)
                .map(|_| sample_mk_block(scales, k, &mut rng).map(|s| (s.len, s.opening_size, s.good)))
                .collect()
        })
        .collect();
    let samples = parts?.concat();
    let hits = samples.iter().filter(|s| s.2).count() as u64;
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.0 as f64, s.2 as u8 as f64)).collect();
    let ratios: Vec<f64> = samples.iter().map(|s| s.0 as f64 / beta).collect();
    let nf = samples.len().max(1) as f64;
    let mean_r = ratios.iter().sum::<f64>() / nf;
    let var_r = ratios.iter().map(|r| (r - mean_r).powi(2)).sum::<f64>() / nf;
    Ok(GoodReport {
        k,
        plain: Estimate::proportion(hits, n),
        size_biased: Estimate::ratio(&pairs),
        mean_len_ratio: Estimate { value: mean_r, stderr: (var_r / nf).sqrt(), n },
        mean_opening: samples.iter().map(|s| s.1 as f64).sum::<f64>() / nf,
    })
}

/// Fraction of sites t whose complete k-block is good, along a y-row.
pub fn trajectory_good_fraction<Y: YRow + ?Sized>(y: &Y, scales: &ScaleTable, k: usize) -> Result<Estimate> {
    let d = BlockDecomposition::with_range(y, scales, k, k);
    let mut pairs = Vec::new();
    for b in d.blocks(k)? {
        if b.kind != BlockKind::Complete {
            continue;
        }
        let mut size = 0u64;
        scan_opening(y, scales, k, b.a, b.b, |_| size += 1);
        let good = is_good(scales, k, b.len() as u64, size);
        pairs.push((b.len() as f64, good as u8 as f64));
    }
    Ok(Estimate::ratio(&pairs))
}

/// Chance that a (k-1)-block is also a k-block: the run ending an
/// I_{k-1} occurrence is long enough for I_k.
pub fn promotion_probability(scales: &ScaleTable, k: usize, n: u64, seed: u64) -> Result<Estimate> {
    let lo = scales.row(k - 1)?.ell;
    let hi = scales.row(k)?.ell;
    let parts: Result<Vec<u64>> = shard_ranges(n)
        .into_par_iter()
        .map(|(i, m)| {
            let mut rng = shard_rng(seed, i);
            let mut bits = Bits::new(&mut rng);
            let mut hits = 0u64;
            for _ in 0..m {
                let (_, run) = draw_block(lo, &mut bits, None)?;
                hits += (run + 1 >= hi) as u64;
            }
            Ok(hits)
        })
        .collect();
    Ok(Estimate::proportion(parts?.iter().sum(), n))
}

/// Blocks drawn one by one, for callers that need the segments.
pub fn sample_many(scales: &ScaleTable, k: usize, n: u64, seed: u64) -> Result<Vec<BlockSample>> {
    let mut rng = shard_rng(seed, 0);
    (0..n).map(|_| sample_mk_block(scales, k, &mut rng)).collect()
}
