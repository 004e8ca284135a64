//! Brute-force reference implementations, written from the definitions
//! without any incremental state.
#![allow(dead_code)]

use gchain::blockscan::{self as bs, Block, BlockKind};
use gchain::params::{build_scales, ScaleTable, SpecConfig};
use gchain::window::Spin;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn preset_a() -> ScaleTable {
    build_scales(&SpecConfig::preset_a()).unwrap()
}

/// eps = 0.3, K = 4, k_max = 6, clamped; look-back 512.
pub fn small() -> ScaleTable {
    build_scales(&SpecConfig { clamp: true, ..SpecConfig::new(0.3, 4, 6, 4096) }).unwrap()
}

/// I_k ends at t: y[t] = -1 after ell - 1 plus signs, all inside the row.
/// Site 0 is the wall and counts at every scale.
pub fn is_end(y: &[Spin], t: usize, ell: u64) -> bool {
    if t == 0 {
        return true;
    }
    let ell = ell as usize;
    y[t] == -1 && t + 1 >= ell && y[t + 1 - ell..t].iter().all(|&s| s == 1)
}

pub fn ends(y: &[Spin], ell: u64) -> Vec<usize> {
    (0..y.len()).filter(|&t| is_end(y, t, ell)).collect()
}

/// Blocks oldest first.
pub fn blocks(y: &[Spin], s: &ScaleTable, k: usize) -> Vec<Block> {
    let e = ends(y, s.ell(k));
    let n = y.len();
    let mut out = Vec::new();
    for (i, &a) in e.iter().enumerate() {
        let b = e.get(i + 1).copied().unwrap_or(n);
        let kind = if a == 0 {
            BlockKind::WallTruncated
        } else if i + 1 == e.len() {
            BlockKind::Partial
        } else {
            BlockKind::Complete
        };
        out.push(Block { k, a, b, kind });
    }
    out
}

pub fn beginning(y: &[Spin], s: &ScaleTable, b: &Block) -> (usize, usize) {
    if b.k == s.base_scale {
        return (b.a, (b.a + s.begin_len_base as usize).min(b.b));
    }
    let ell = s.ell(b.k - 1);
    let inner: Vec<usize> = ((b.a + 1)..b.b).filter(|&t| is_end(y, t, ell)).collect();
    let c = s.begin_count(b.k) as usize;
    // Sub-block i (1-based) ends at inner[i - 1], or at b for the last one.
    if inner.len() < c {
        (b.a, b.b)
    } else {
        (b.a, inner[c - 1])
    }
}

/// cond[j - K][t]: t lies in the beginning of its j-block and within
/// beta_{j+1} of its start.
pub fn conditions(y: &[Spin], s: &ScaleTable, hi: usize) -> Vec<Vec<bool>> {
    (s.base_scale..=hi)
        .map(|j| {
            let mut row = vec![false; y.len()];
            for b in blocks(y, s, j) {
                let (lo, end) = beginning(y, s, &b);
                for (t, slot) in row.iter_mut().enumerate().take(end).skip(lo) {
                    *slot = ((t - b.a) as u64) < s.beta(j + 1);
                }
            }
            row
        })
        .collect()
}

pub fn opening(cond: &[Vec<bool>], s: &ScaleTable, b: &Block) -> Vec<usize> {
    let depth = b.k - s.base_scale;
    (b.a..b.b).filter(|&t| (0..=depth).all(|i| cond[i][t])).collect()
}

pub fn depths(cond: &[Vec<bool>], s: &ScaleTable, n: usize) -> Vec<usize> {
    (0..n)
        .map(|t| {
            let ok = cond.iter().take_while(|row| row[t]).count();
            s.base_scale - 1 + ok
        })
        .collect()
}

/// Reference g on a past (x, y) with the wall at site 0. Returns
/// (p11, pm11, p1m1, pm1m1) and the y0 = +1 (k0, |S|, upsilon).
pub fn g(x: &[Spin], y: &[Spin], s: &ScaleTable) -> ([f64; 4], (usize, usize, f64)) {
    let mut out = [0.0; 4];
    let mut info = (0, 0, 0.0);
    for (bi, y0) in [1, -1].into_iter().enumerate() {
        let mut ybar = y.to_vec();
        ybar.push(y0);
        let t_now = ybar.len() - 1;
        let cond = conditions(&ybar, s, s.k_max);
        let k0 = depths(&cond, s, ybar.len())[t_now];
        let (q, size, ups) = if k0 == s.k_max {
            (0.0, 0, s.upsilon(s.k_max))
        } else {
            let cond = conditions(&ybar, s, k0 + 1);
            let newest = *blocks(&ybar, s, k0 + 1).last().unwrap();
            let mut set = opening(&cond, s, &newest);
            if set.len().is_multiple_of(2) {
                set.pop();
            }
            let ups = if !set.is_empty() && set[0] + (s.beta(k0 + 2) as usize) < t_now {
                0.0
            } else if k0 == s.base_scale - 1 {
                s.upsilon_clamp
            } else {
                s.upsilon(k0)
            };
            let sum: i64 = set.iter().map(|&t| x[t] as i64).sum();
            (ups * sum.signum() as f64, set.len(), ups)
        };
        out[2 * bi] = 0.5 * (0.5 + q);
        out[2 * bi + 1] = 0.5 * (0.5 - q);
        if y0 == 1 {
            info = (k0, size, ups);
        }
    }
    ([out[0], out[1], out[2], out[3]], info)
}

/// A y-row with enough long +1 runs to populate high scales.
pub fn random_y(rng: &mut ChaCha8Rng, n: usize) -> Vec<Spin> {
    let p: f64 = [0.5, 0.7, 0.85, 0.92, 0.96][rng.gen_range(0..5)];
    let mut y: Vec<Spin> = (0..n).map(|_| if rng.gen_bool(p) { 1 } else { -1 }).collect();
    // Plant a few long runs ending in -1.
    for _ in 0..rng.gen_range(0..6) {
        let run = rng.gen_range(4..24).min(n - 1);
        let end = rng.gen_range(run..n);
        for v in &mut y[end - run..end] {
            *v = 1;
        }
        y[end] = -1;
    }
    y
}

pub fn random_x(rng: &mut ChaCha8Rng, n: usize) -> Vec<Spin> {
    (0..n).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every disagreement with the library parser, described.
pub fn parser_mismatches(y: &[Spin], s: &ScaleTable) -> Vec<String> {
    let row = y.to_vec();
    let d = bs::BlockDecomposition::new(&row, s);
    let cond = conditions(y, s, s.k_max);
    let mut bad = Vec::new();
    for k in s.active() {
        let want = blocks(y, s, k);
        let mut got = bs::decompose(&row, s, k).unwrap();
        got.reverse();
        if got != want {
            bad.push(format!("decompose k={k}"));
            continue;
        }
        let mut from_all = d.blocks(k).unwrap().to_vec();
        from_all.reverse();
        if from_all != want {
            bad.push(format!("decomposition k={k}"));
        }
        for b in &want {
            let (lo, hi) = beginning(y, s, b);
            if bs::beginning(b, &d, s).unwrap() != (lo..hi) {
                bad.push(format!("beginning {b:?}"));
            }
            if bs::opening(&row, s, b).unwrap().positions != opening(&cond, s, b) {
                bad.push(format!("opening {b:?}"));
            }
        }
    }
    if bs::depth_profile(&row, s) != depths(&cond, s, y.len()) {
        bad.push("depth profile".into());
    }
    bad
}

pub fn check_parser(y: &[Spin], s: &ScaleTable) {
    let bad = parser_mismatches(y, s);
    assert!(bad.is_empty(), "{} mismatches, first: {}", bad.len(), bad[0]);
}
