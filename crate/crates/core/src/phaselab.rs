//! Block signatures and the two-boundary experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::blockscan::{beginning, scan_opening, Block, BlockDecomposition, BlockKind};
use crate::blockstats::{is_good, Estimate};
use crate::chain::{run, CapRule, RunOptions, Trajectory};
use crate::error::{Error, Result};
use crate::gfun::odd_part;
use crate::params::{ScaleTable, SpecConfig};
use crate::window::{Boundary, History, Spin, YRow};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Signature {
    pub block: Block,
    /// |C'(B)|, always odd.
    pub size: usize,
    pub value: Spin,
}

/// X(B) from the opening positions of `block`.
pub fn signature<H: History + ?Sized>(block: &Block, opening: Vec<usize>, x: &H) -> Result<Signature> {
    if opening.is_empty() {
        return Err(Error::EmptyOpening { a: block.a, b: block.b });
    }
    let (odd, _) = odd_part(opening);
    let sum: i64 = odd.iter().map(|&t| x.x(t) as i64).sum();
    assert!(sum != 0, "odd-size sums of +-1 are never zero");
    Ok(Signature { block: *block, size: odd.len(), value: sum.signum() as Spin })
}

/// Signature of a block of the row, computing its opening.
pub fn block_signature<H: History + ?Sized>(h: &H, scales: &ScaleTable, block: &Block) -> Result<Signature> {
    let mut opening = Vec::new();
    scan_opening(h, scales, block.k, block.a, block.b, |t| opening.push(t));
    signature(block, opening, h)
}

/// Per-block facts needed for the beautiful-point test at one scale.
#[derive(Clone, Debug)]
pub struct ScaleFacts {
    pub k: usize,
    /// Oldest first.
    pub blocks: Vec<Block>,
    pub good: Vec<bool>,
    /// End of the beginning of each block (start is the block start).
    pub begin_end: Vec<usize>,
    pub signature: Vec<Option<Spin>>,
}

impl ScaleFacts {
    fn index_of(&self, t: usize) -> Option<usize> {
        let i = self.blocks.partition_point(|b| b.b <= t);
        (i < self.blocks.len() && self.blocks[i].contains(t)).then_some(i)
    }
}

/// Facts for scales [K, k_top] of a history.
pub fn scale_facts<H: History + Sync + ?Sized>(h: &H, scales: &ScaleTable, k_top: usize) -> Result<Vec<ScaleFacts>> {
    let lo = scales.base_scale;
    let decomp = BlockDecomposition::with_range(h, scales, lo - 1, k_top);
    (lo..=k_top)
        .into_par_iter()
        .map(|k| {
            let mut blocks = decomp.blocks(k)?.to_vec();
            blocks.reverse();
            let mut good = Vec::with_capacity(blocks.len());
            let mut begin_end = Vec::with_capacity(blocks.len());
            let mut signature = Vec::with_capacity(blocks.len());
            for b in &blocks {
                let mut opening = Vec::new();
                scan_opening(h, scales, k, b.a, b.b, |t| opening.push(t));
                let complete = b.kind == BlockKind::Complete;
                good.push(complete && is_good(scales, k, b.len() as u64, opening.len() as u64));
                begin_end.push(if k == lo {
                    (b.a as u64 + scales.begin_len_base).min(b.b as u64) as usize
                } else {
                    beginning(b, &decomp, scales)?.end
                });
                signature.push(if complete { Some(signature_of(opening, h)) } else { None });
            }
            Ok(ScaleFacts { k, blocks, good, begin_end, signature })
        })
        .collect()
}

fn signature_of<H: History + ?Sized>(opening: Vec<usize>, h: &H) -> Spin {
    let (odd, _) = odd_part(opening);
    let sum: i64 = odd.iter().map(|&t| h.x(t) as i64).sum();
    sum.signum() as Spin
}

/// Whether t is k-beautiful with scales truncated at k_top, and the least
/// such k (k hat).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Beauty {
    pub beautiful: bool,
    pub k_hat: Option<usize>,
}

pub fn is_beautiful(t: usize, k: usize, facts: &[ScaleFacts]) -> Beauty {
    // ok[i]: B_j(t) good and t outside its beginning, j = facts[i].k.
    let ok: Vec<bool> = facts
        .iter()
        .map(|f| match f.index_of(t) {
            Some(i) => f.good[i] && t >= f.begin_end[i],
            None => false,
        })
        .collect();
    let mut k_hat = None;
    for i in (0..ok.len()).rev() {
        if !ok[i] {
            break;
        }
        k_hat = Some(facts[i].k);
    }
    Beauty { beautiful: k_hat.is_some_and(|h| h <= k), k_hat }
}

/// Percentile bootstrap for the mean.
pub fn bootstrap_mean_ci(values: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let lo = means[((alpha * resamples as f64).floor() as usize).min(resamples - 1)];
    let hi = means[(((1.0 - alpha) * resamples as f64).ceil() as usize).min(resamples) - 1];
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Agreement {
    pub agree: u64,
    pub total: u64,
    pub rate: f64,
    pub stderr: f64,
    pub spacing: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleReport {
    pub k: usize,
    pub complete_blocks: u64,
    /// Partial and wall-truncated blocks, left out of signature statistics.
    pub excluded_blocks: u64,
    pub mean_signature: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// X(B_k) = X(B_{k+1}); absent at the top scale.
    pub agreement: Option<Agreement>,
    /// Fraction of sites whose k-block is good.
    pub good_fraction: Estimate,
    pub beautiful_frequency: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PersistenceReport {
    pub boundary: Boundary,
    pub seed: u64,
    pub steps: u64,
    pub cap_rule: CapRule,
    pub k_top: usize,
    pub beauty_spacing: u64,
    pub scales: Vec<ScaleReport>,
    /// Top-scale signatures of complete blocks, oldest first.
    #[serde(skip)]
    pub top_signatures: Vec<Spin>,
}

impl PersistenceReport {
    pub fn top(&self) -> &ScaleReport {
        self.scales.last().expect("at least one scale")
    }
}

pub const BEAUTY_SPACING: u64 = 61;

/// Signature, agreement and beauty statistics of one trajectory.
pub fn analyze(traj: &Trajectory, scales: &ScaleTable, cap_rule: CapRule) -> Result<PersistenceReport> {
    let k_top = scales.k_max;
    let facts = scale_facts(traj, scales, k_top)?;
    let mut reports = Vec::new();

    // Beauty is sampled on sites covered by complete top-scale blocks.
    let top = facts.last().expect("scales");
    let covered: Vec<(usize, usize)> =
        top.blocks.iter().filter(|b| b.kind == BlockKind::Complete).map(|b| (b.a, b.b)).collect();
    let mut sample_sites = Vec::new();
    for (a, b) in covered {
        let mut t = a;
        while t < b {
            sample_sites.push(t);
            t += BEAUTY_SPACING as usize;
        }
    }
    let k_hats: Vec<Option<usize>> =
        sample_sites.par_iter().map(|&t| is_beautiful(t, k_top, &facts).k_hat).collect();

    for (i, f) in facts.iter().enumerate() {
        let k = f.k;
        let sigs: Vec<f64> = f.signature.iter().flatten().map(|&s| s as f64).collect();
        let complete = sigs.len() as u64;
        let mean = if sigs.is_empty() { f64::NAN } else { sigs.iter().sum::<f64>() / sigs.len() as f64 };
        let (ci_lo, ci_hi) =
            bootstrap_mean_ci(&sigs, BOOTSTRAP_RESAMPLES, 0.95, traj.seed ^ (k as u64).wrapping_mul(0x9e37));

        let agreement = facts.get(i + 1).map(|parent| {
            let spacing = scales.beta(k + 1);
            let mut agree = 0u64;
            let mut total = 0u64;
            let mut next_ok = 0usize;
            for (bi, b) in f.blocks.iter().enumerate() {
                if b.a < next_ok {
                    continue;
                }
                let (Some(s), Some(pi)) = (f.signature[bi], parent.index_of(b.a)) else { continue };
                let Some(ps) = parent.signature[pi] else { continue };
                total += 1;
                agree += (s == ps) as u64;
                next_ok = b.a + spacing as usize;
            }
            let e = Estimate::proportion(agree, total);
            Agreement { agree, total, rate: e.value, stderr: e.stderr, spacing }
        });

        let pairs: Vec<(f64, f64)> = f
            .blocks
            .iter()
            .zip(&f.good)
            .filter(|(b, _)| b.kind == BlockKind::Complete)
            .map(|(b, &g)| (b.len() as f64, g as u8 as f64))
            .collect();
        let beautiful = k_hats.iter().filter(|h| h.is_some_and(|h| h <= k)).count() as u64;

        reports.push(ScaleReport {
            k,
            complete_blocks: complete,
            excluded_blocks: f.blocks.len() as u64 - complete,
            mean_signature: mean,
            ci_lo,
            ci_hi,
            agreement,
            good_fraction: Estimate::ratio(&pairs),
            beautiful_frequency: Estimate::proportion(beautiful, k_hats.len() as u64),
        });
    }
    let top_signatures = facts.last().expect("scales").signature.iter().flatten().copied().collect();
    Ok(PersistenceReport {
        boundary: traj.boundary,
        seed: traj.seed,
        steps: traj.len() as u64,
        cap_rule,
        k_top,
        beauty_spacing: BEAUTY_SPACING,
        scales: reports,
        top_signatures,
    })
}

pub fn persistence_experiment(
    config: &SpecConfig,
    scales: &ScaleTable,
    boundary: Boundary,
    seed: u64,
    steps: u64,
    cap_rule: CapRule,
) -> Result<PersistenceReport> {
    if steps < scales.beta(scales.k_max + 1) {
        return Err(Error::InvalidConfig(format!(
            "persistence needs at least beta_{} = {} steps",
            scales.k_max + 1,
            scales.beta(scales.k_max + 1)
        )));
    }
    let (traj, _) = run(config, scales, boundary, seed, steps, RunOptions { replicate: 0, cap_rule }, None)?;
    analyze(&traj, scales, cap_rule)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundarySummary {
    pub boundary: Boundary,
    pub seeds: Vec<u64>,
    /// Top-scale mean signature per seed.
    pub per_seed: Vec<f64>,
    pub blocks: u64,
    /// Pooled mean over top-scale blocks.
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContrastReport {
    pub steps: u64,
    pub cap_rule: CapRule,
    pub k_top: usize,
    pub plus: BoundarySummary,
    pub minus: BoundarySummary,
    pub difference: f64,
    pub difference_ci: (f64, f64),
    pub disjoint: bool,
    pub separated: bool,
    #[serde(skip)]
    pub reports: Vec<PersistenceReport>,
}

fn summarize(boundary: Boundary, seeds: &[u64], reports: &[PersistenceReport]) -> BoundarySummary {
    let pooled: Vec<f64> = reports.iter().flat_map(|r| r.top_signatures.iter().map(|&s| s as f64)).collect();
    let mean = if pooled.is_empty() { f64::NAN } else { pooled.iter().sum::<f64>() / pooled.len() as f64 };
    let salt = match boundary {
        Boundary::Plus => 0x5eed_0001,
        Boundary::Minus => 0x5eed_0002,
    };
    let (ci_lo, ci_hi) = bootstrap_mean_ci(&pooled, BOOTSTRAP_RESAMPLES, 0.95, salt);
    BoundarySummary {
        boundary,
        seeds: seeds.to_vec(),
        per_seed: reports.iter().map(|r| r.top().mean_signature).collect(),
        blocks: pooled.len() as u64,
        mean,
        ci_lo,
        ci_hi,
    }
}

/// Runs every (boundary, seed) pair and contrasts top-scale signatures.
pub fn boundary_contrast(
    config: &SpecConfig,
    scales: &ScaleTable,
    plus_seeds: &[u64],
    minus_seeds: &[u64],
    steps: u64,
    cap_rule: CapRule,
) -> Result<ContrastReport> {
    let jobs: Vec<(Boundary, u64)> = plus_seeds
        .iter()
        .map(|&s| (Boundary::Plus, s))
        .chain(minus_seeds.iter().map(|&s| (Boundary::Minus, s)))
        .collect();
    let reports: Result<Vec<PersistenceReport>> = jobs
        .par_iter()
        .map(|&(b, s)| persistence_experiment(config, scales, b, s, steps, cap_rule))
        .collect();
    let reports = reports?;
    let (p, m) = reports.split_at(plus_seeds.len());
    let plus = summarize(Boundary::Plus, plus_seeds, p);
    let minus = summarize(Boundary::Minus, minus_seeds, m);
    let difference = plus.mean - minus.mean;
    // Independent bootstraps of the two pooled means.
    let pp: Vec<f64> = p.iter().flat_map(|r| r.top_signatures.iter().map(|&s| s as f64)).collect();
    let mm: Vec<f64> = m.iter().flat_map(|r| r.top_signatures.iter().map(|&s| s as f64)).collect();
    let difference_ci = bootstrap_difference_ci(&pp, &mm, BOOTSTRAP_RESAMPLES, 0.95, 0x5eed_0003);
    let disjoint = plus.ci_lo > minus.ci_hi || minus.ci_lo > plus.ci_hi;
    let separated = plus.mean > 0.0 && minus.mean < 0.0 && disjoint;
    Ok(ContrastReport {
        steps,
        cap_rule,
        k_top: scales.k_max,
        plus,
        minus,
        difference,
        difference_ci,
        disjoint,
        separated,
        reports,
    })
}

pub fn bootstrap_difference_ci(a: &[f64], b: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    if a.is_empty() || b.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean_of = |v: &[f64], rng: &mut ChaCha8Rng| {
        (0..v.len()).map(|_| v[rng.gen_range(0..v.len())]).sum::<f64>() / v.len() as f64
    };
    let mut d: Vec<f64> = (0..resamples).map(|_| mean_of(a, &mut rng) - mean_of(b, &mut rng)).collect();
    d.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let lo = d[((alpha * resamples as f64).floor() as usize).min(resamples - 1)];
    let hi = d[(((1.0 - alpha) * resamples as f64).ceil() as usize).min(resamples) - 1];
    (lo, hi)
}

/// Top-scale signature of the block containing t, if complete.
pub fn top_signature_at<H: History + ?Sized>(h: &H, scales: &ScaleTable, t: usize) -> Option<Spin> {
    let d = BlockDecomposition::with_range(h, scales, scales.k_max, scales.k_max);
    let b = d.containing(scales.k_max, t)?;
    (b.kind == BlockKind::Complete).then(|| block_signature(h, scales, &b).ok().map(|s| s.value)).flatten()
}

/// Whether a y-row holds at least one complete block at scale k.
pub fn has_complete<Y: YRow + ?Sized>(y: &Y, scales: &ScaleTable, k: usize) -> bool {
    let d = BlockDecomposition::with_range(y, scales, k, k);
    d.blocks(k).map(|b| b.iter().any(|b| b.kind == BlockKind::Complete)).unwrap_or(false)
}
