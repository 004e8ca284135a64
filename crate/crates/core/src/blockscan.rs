//! Hierarchical k-block structure of a y-row.
//!
//! Conventions: positions are absolute window indices, the newest site is
//! `len - 1`, and the window's first site acts as an occurrence end of every
//! I_k (the wall). A block `[a, b)` starts at the occurrence end `a`.
//!
//! Membership of a site t in the opening C_k depends only on y at positions
//! `<= t`: t must sit, for every scale j in [K, k], in the beginning of its
//! j-block and within beta_{j+1} of that block's start. [`ScaleCursor`]
//! tracks exactly the per-scale state needed to decide this, and every
//! opening computation in the crate goes through it.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ScaleTable;
use crate::window::YRow;

/// Occurrence-end level of each site: the largest scale j in [K, hi] such
/// that I_j ends there, or K - 1 for none.
#[derive(Clone, Debug)]
pub struct Levels {
    base: usize,
    hi: usize,
    /// need[j - K] = ell_j - 1, the run of +1 an end of I_j requires.
    need: Vec<u64>,
}

impl Levels {
    pub fn new(scales: &ScaleTable, hi: usize) -> Self {
        let base = scales.base_scale;
        let need = (base..=hi).map(|j| scales.ell(j) - 1).collect();
        Levels { base, hi, need }
    }

    pub fn none(&self) -> usize {
        self.base - 1
    }

    pub fn hi(&self) -> usize {
        self.hi
    }

    /// Level of an end preceded by `run` plus signs.
    #[inline]
    pub fn of_run(&self, run: u64) -> usize {
        // need is strictly increasing; count the satisfied prefix.
        let n = self.need.iter().take_while(|&&r| r <= run).count();
        self.base - 1 + n
    }

    /// Longest run worth counting.
    #[inline]
    pub fn max_run(&self) -> u64 {
        *self.need.last().expect("at least one scale")
    }

    /// Level at site t; the wall site 0 is an end of every scale.
    #[inline]
    pub fn at<Y: YRow + ?Sized>(&self, y: &Y, t: usize) -> usize {
        if t == 0 {
            return self.hi;
        }
        if y.y(t) != -1 {
            return self.none();
        }
        let cap = self.max_run();
        let mut run = 0u64;
        let mut c = t;
        while run < cap && c > 0 {
            c -= 1;
            if y.y(c) != 1 {
                break;
            }
            run += 1;
        }
        self.of_run(run)
    }
}

/// Per-scale state of the blocks containing the current site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaleCursor {
    base: usize,
    hi: usize,
    /// start[j - K] = a_j(t).
    start: Vec<usize>,
    /// sub[j - K] = index of t's (j-1)-block inside its j-block, counted
    /// from the oldest (1-based). Unused at j = K.
    sub: Vec<u64>,
}

impl ScaleCursor {
    /// Cursor sitting on `at`, an occurrence end of every scale in [K, hi].
    pub fn anchored(scales: &ScaleTable, hi: usize, at: usize) -> Self {
        let base = scales.base_scale;
        let n = hi + 1 - base;
        ScaleCursor { base, hi, start: vec![at; n], sub: vec![1; n] }
    }

    /// Move to site t, an end of level `level` (K - 1 for none).
    #[inline]
    pub fn advance(&mut self, t: usize, level: usize) {
        let level = level.min(self.hi);
        if level >= self.base {
            for i in 0..=(level - self.base) {
                self.start[i] = t;
                self.sub[i] = 1;
            }
        }
        let next = level + 1;
        if next > self.base && next <= self.hi {
            self.sub[next - self.base] += 1;
        }
    }

    pub fn start(&self, j: usize) -> usize {
        self.start[j - self.base]
    }

    pub fn sub_index(&self, j: usize) -> u64 {
        self.sub[j - self.base]
    }

    /// Whether the opening conditions hold for t at scale j.
    #[inline]
    pub fn holds(&self, scales: &ScaleTable, t: usize, j: usize) -> bool {
        let i = j - self.base;
        let dist = (t - self.start[i]) as u64;
        if dist >= scales.beta(j + 1) {
            return false;
        }
        if i == 0 {
            dist < scales.begin_len_base
        } else {
            self.sub[i] <= scales.begin_count(j)
        }
    }

    /// Largest k <= hi with t in C_k, or K - 1.
    #[inline]
    pub fn depth(&self, scales: &ScaleTable, t: usize) -> usize {
        for j in self.base..=self.hi {
            if !self.holds(scales, t, j) {
                return j - 1;
            }
        }
        self.hi
    }
}

/// Ends of I_k in the row, oldest first. The wall is not listed.
pub fn find_pattern_ends<Y: YRow + ?Sized>(y: &Y, scales: &ScaleTable, k: usize) -> Result<Vec<usize>> {
    let need = scales.row(k)?.ell - 1;
    let mut ends = Vec::new();
    let mut run = 0u64;
    for t in 0..y.len() {
        if y.y(t) == 1 {
            run += 1;
        } else {
            if run >= need && t as u64 >= need {
                ends.push(t);
            }
            run = 0;
        }
    }
    Ok(ends)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BlockKind {
    Complete,
    Partial,
    WallTruncated,
}

impl BlockKind {
    pub fn tag(self) -> &'static str {
        match self {
            BlockKind::Complete => "complete",
            BlockKind::Partial => "partial",
            BlockKind::WallTruncated => "wall",
        }
    }
}

/// Half-open block `[a, b)` at scale k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Block {
    pub k: usize,
    pub a: usize,
    pub b: usize,
    pub kind: BlockKind,
}

impl Block {
    pub fn len(&self) -> usize {
        self.b - self.a
    }

    pub fn is_empty(&self) -> bool {
        self.b == self.a
    }

    pub fn contains(&self, t: usize) -> bool {
        self.a <= t && t < self.b
    }
}

/// k blocks of the row, newest first (`B_{k,1}` is element 0).
pub fn decompose<Y: YRow + ?Sized>(y: &Y, scales: &ScaleTable, k: usize) -> Result<Vec<Block>> {
    let ends = find_pattern_ends(y, scales, k)?;
    Ok(blocks_from_ends(&ends, y.len(), k))
}

fn blocks_from_ends(ends: &[usize], n: usize, k: usize) -> Vec<Block> {
    let mut blocks = Vec::with_capacity(ends.len() + 1);
    if n == 0 {
        return blocks;
    }
    match ends.first() {
        None => blocks.push(Block { k, a: 0, b: n, kind: BlockKind::WallTruncated }),
        Some(&first) => {
            if first > 0 {
                blocks.push(Block { k, a: 0, b: first, kind: BlockKind::WallTruncated });
            }
            for w in ends.windows(2) {
                blocks.push(Block { k, a: w[0], b: w[1], kind: BlockKind::Complete });
            }
            let last = *ends.last().expect("non-empty");
            blocks.push(Block { k, a: last, b: n, kind: BlockKind::Partial });
        }
    }
    blocks.reverse();
    blocks
}

/// Block lists for every active scale.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockDecomposition {
    len: usize,
    base: usize,
    /// per_scale[k - K], newest first.
    per_scale: Vec<Vec<Block>>,
}

impl BlockDecomposition {
    pub fn new<Y: YRow + ?Sized>(y: &Y, scales: &ScaleTable) -> Self {
        Self::with_range(y, scales, scales.base_scale, scales.k_max)
    }

    /// Decomposition at scales [K, hi]; hi may reach the table top.
    pub fn with_range<Y: YRow + ?Sized>(y: &Y, scales: &ScaleTable, lo: usize, hi: usize) -> Self {
        // One pass collects ends for every scale at once.
        let need: Vec<u64> = (lo..=hi).map(|k| scales.ell(k) - 1).collect();
        let mut ends: Vec<Vec<usize>> = vec![Vec::new(); need.len()];
        let mut run = 0u64;
        for t in 0..y.len() {
            if y.y(t) == 1 {
                run += 1;
            } else {
                for (i, &r) in need.iter().enumerate() {
                    if run >= r && t as u64 >= r {
                        ends[i].push(t);
                    } else {
                        break;
                    }
                }
                run = 0;
            }
        }
        let per_scale =
            ends.iter().zip(lo..=hi).map(|(e, k)| blocks_from_ends(e, y.len(), k)).collect();
        BlockDecomposition { len: y.len(), base: lo, per_scale }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Newest site (t_now).
    pub fn t_now(&self) -> usize {
        self.len.saturating_sub(1)
    }

    pub fn scales(&self) -> Range<usize> {
        self.base..self.base + self.per_scale.len()
    }

    pub fn blocks(&self, k: usize) -> Result<&[Block]> {
        let r = self.scales();
        if !r.contains(&k) {
            return Err(Error::ScaleOutOfRange { k, lo: r.start, hi: r.end - 1 });
        }
        Ok(&self.per_scale[k - self.base])
    }

    /// B_{k,i}, 1-based from the newest.
    pub fn block(&self, k: usize, i: usize) -> Option<Block> {
        self.blocks(k).ok()?.get(i.checked_sub(1)?).copied()
    }

    /// a_{k,i}.
    pub fn a(&self, k: usize, i: usize) -> Option<usize> {
        self.block(k, i).map(|b| b.a)
    }

    /// b_{k,i}.
    pub fn b(&self, k: usize, i: usize) -> Option<usize> {
        self.block(k, i).map(|b| b.b)
    }

    /// The k block containing t.
    pub fn containing(&self, k: usize, t: usize) -> Option<Block> {
        let blocks = self.blocks(k).ok()?;
        // Newest first, so starts are decreasing.
        let i = blocks.partition_point(|b| b.a > t);
        blocks.get(i).copied().filter(|b| b.contains(t))
    }

    /// (k-1) blocks tiling `block`, oldest first.
    pub fn sub_blocks(&self, block: &Block) -> Result<Vec<Block>> {
        let subs = self.blocks(block.k - 1)?;
        let mut inside: Vec<Block> =
            subs.iter().filter(|s| s.a >= block.a && s.b <= block.b).copied().collect();
        inside.reverse();
        Ok(inside)
    }
}

/// N_k: the number of (k-1) blocks in the k block containing t_now.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SubCount {
    Finite(u64),
    /// The block reaches the wall, so its true start is not in the window.
    Unbounded,
}

pub fn count_subblocks(decomp: &BlockDecomposition, scales: &ScaleTable, k: usize) -> Result<SubCount> {
    let current = decomp
        .block(k, 1)
        .ok_or(Error::ScaleOutOfRange { k, lo: scales.base_scale, hi: scales.k_max })?;
    if current.kind == BlockKind::WallTruncated {
        return Ok(SubCount::Unbounded);
    }
    if k == scales.base_scale {
        return Ok(SubCount::Finite((decomp.t_now() - current.a) as u64));
    }
    Ok(SubCount::Finite(decomp.sub_blocks(&current)?.len() as u64))
}

/// O(B) as a half-open interval.
pub fn beginning(block: &Block, decomp: &BlockDecomposition, scales: &ScaleTable) -> Result<Range<usize>> {
    if block.k < scales.base_scale || block.k > scales.top() {
        return Err(Error::ScaleOutOfRange { k: block.k, lo: scales.base_scale, hi: scales.top() });
    }
    if block.k == scales.base_scale {
        let end = (block.a as u64 + scales.begin_len_base).min(block.b as u64) as usize;
        return Ok(block.a..end);
    }
    let subs = decomp.sub_blocks(block)?;
    let count = scales.begin_count(block.k) as usize;
    if subs.len() <= count {
        Ok(block.a..block.b)
    } else {
        Ok(block.a..subs[count - 1].b)
    }
}

/// Visits every site of C(B) for the k block `[a, b)`; `a` must be an
/// occurrence end of every scale up to k (or the wall). Sites are visited in
/// increasing order.
pub fn scan_opening<Y, F>(y: &Y, scales: &ScaleTable, k: usize, a: usize, b: usize, mut visit: F)
where
    Y: YRow + ?Sized,
    F: FnMut(usize),
{
    let levels = Levels::new(scales, k);
    let mut cursor = ScaleCursor::anchored(scales, k, a);
    // Members satisfy t - a < beta_{k+1} because a_k(t) = a on the block.
    let end = (a as u64).saturating_add(scales.beta(k + 1)).min(b as u64) as usize;
    let pad = y.plus_prefix();
    let base_len = scales.begin_len_base;
    let mut t = a;
    while t < end {
        let level = if t == a { k } else { levels.at(y, t) };
        cursor.advance(t, level);
        if cursor.depth(scales, t) >= k {
            visit(t);
        }
        // Inside a known all-plus stretch nothing changes until it ends.
        if t + 1 < pad && (t + 1 - cursor.start(scales.base_scale)) as u64 >= base_len {
            t = pad;
            continue;
        }
        t += 1;
    }
}

/// C(B) as a sorted position list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OpeningSet {
    pub block: Block,
    pub positions: Vec<usize>,
}

impl OpeningSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

pub fn opening<Y: YRow + ?Sized>(y: &Y, scales: &ScaleTable, block: &Block) -> Result<OpeningSet> {
    if block.k < scales.base_scale || block.k >= scales.top() {
        return Err(Error::ScaleOutOfRange { k: block.k, lo: scales.base_scale, hi: scales.top() - 1 });
    }
    let mut positions = Vec::new();
    scan_opening(y, scales, block.k, block.a, block.b, |t| positions.push(t));
    Ok(OpeningSet { block: *block, positions })
}

/// Opening-depth of every site: the largest k in [K, k_max] with t in C_k,
/// or K - 1.
pub fn depth_profile<Y: YRow + ?Sized>(y: &Y, scales: &ScaleTable) -> Vec<usize> {
    let levels = Levels::new(scales, scales.k_max);
    let mut cursor = ScaleCursor::anchored(scales, scales.k_max, 0);
    let mut out = Vec::with_capacity(y.len());
    let mut run = 0u64;
    for t in 0..y.len() {
        let level = if t == 0 {
            scales.k_max
        } else if y.y(t) == -1 {
            levels.of_run(run)
        } else {
            levels.none()
        };
        if t > 0 {
            cursor.advance(t, level);
        }
        out.push(cursor.depth(scales, t));
        run = if y.y(t) == 1 { (run + 1).min(levels.max_run()) } else { 0 };
    }
    out
}

/// k0 of the newest site, capped at k_max.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct K0 {
    pub value: usize,
    /// t_now lies in C_{k_max}: stands in for k0 = infinity.
    pub capped: bool,
}

/// Depth of the newest site and, when not capped, the start of its
/// (depth+1)-block.
pub(crate) fn locate_newest<Y: YRow + ?Sized>(y: &Y, scales: &ScaleTable) -> (usize, Option<usize>) {
    let base = scales.base_scale;
    let hi = scales.k_max;
    let n = hi + 1 - base;
    let t = y.len() - 1;
    let levels = Levels::new(scales, hi);
    let pad = y.plus_prefix();

    let mut start: Vec<Option<usize>> = vec![None; n];
    let mut sub = vec![0u64; n];
    // First scale whose conditions are not yet checked.
    let mut next_check = base;
    let mut depth: Option<usize> = None;
    let mut resolved = 0usize;

    let mut c = t;
    loop {
        let level = levels.at(y, c);
        for i in resolved..n {
            let j = base + i;
            if i > 0 && level + 1 >= j {
                sub[i] += 1;
            }
            if level >= j {
                start[i] = Some(c);
            }
        }
        while resolved < n && start[resolved].is_some() {
            resolved += 1;
        }

        if depth.is_none() {
            while next_check < base + resolved {
                let i = next_check - base;
                let a = start[i].expect("resolved");
                let dist = (t - a) as u64;
                let ok = dist < scales.beta(next_check + 1)
                    && if i == 0 { dist < scales.begin_len_base } else { sub[i] <= scales.begin_count(next_check) };
                if !ok {
                    depth = Some(next_check - 1);
                    break;
                }
                next_check += 1;
            }
            if depth.is_none() && next_check > hi {
                return (hi, None);
            }
            // Unresolved scale already too far back.
            if depth.is_none() && c > 0 && (t - c + 1) as u64 >= scales.beta(next_check + 1) {
                depth = Some(next_check - 1);
            }
        }
        if let Some(d) = depth {
            let i = d + 1 - base;
            if let Some(a) = start[i] {
                return (d, Some(a));
            }
        }
        if c == 0 {
            unreachable!("the wall resolves every scale");
        }
        // Sites [1, pad) are all +1: no ends there.
        c = if c - 1 < pad { 0 } else { c - 1 };
    }
}

/// k0 for the row ybar whose newest site is t_now.
pub fn k0_of<Y: YRow + ?Sized>(ybar: &Y, scales: &ScaleTable) -> Result<K0> {
    let need = scales.required_depth();
    if (ybar.len() as u64) < need {
        return Err(Error::WindowTooShort { need, have: ybar.len() as u64 });
    }
    let (d, _) = locate_newest(ybar, scales);
    Ok(K0 { value: d, capped: d == scales.k_max })
}
