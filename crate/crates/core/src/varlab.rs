//! Variation of g: exhaustive and randomized lower bounds, analytic caps,
//! and l^p partial sums.
//!
//! var_j is the sup of ||g(b) - g(b')||_1 over pasts agreeing on their
//! newest j sites, with the L1 norm taken over the four symbols. With
//! q = g_1 - 1/2 per branch that norm is |dq(+1)| + |dq(-1)|, at most 1.6.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gfun::{evaluate, GOutput};
use crate::params::{real_pow, ScaleTable};
use crate::window::{Boundary, PastWindow, Spin, WallPadded};

pub const L1_CAP: f64 = 1.6;
pub const EXACT_CALL_LIMIT: u128 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    Exhaustive,
    RandomSearch,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub a: PastWindow,
    pub b: PastWindow,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarEstimate {
    pub j: usize,
    /// Sites enumerated or searched; older sites come from the wall.
    pub depth: usize,
    /// Best four-symbol L1 distance found.
    pub lower_bound: f64,
    /// Best single-branch |g_1(b) - g_1(b')| found.
    pub per_branch: f64,
    pub method: Method,
    pub analytic_cap: f64,
    pub sharper_cap: Option<f64>,
    pub calls: u64,
    pub witness: Option<Witness>,
}

pub fn l1(a: &GOutput, b: &GOutput) -> f64 {
    a.coords().iter().zip(b.coords()).map(|(p, q)| (p - q).abs()).sum()
}

fn branch_gap(a: &GOutput, b: &GOutput) -> f64 {
    (a.plus.g1 - b.plus.g1).abs().max((a.minus.g1 - b.minus.g1).abs())
}

/// Site i (0 = newest) of enumeration index `code` holds digit
/// (code >> 2i) & 3: bit 0 is x, bit 1 is y, set = +1.
fn decode(code: u64, depth: usize, boundary: Boundary) -> PastWindow {
    let mut x = vec![0 as Spin; depth];
    let mut y = vec![0 as Spin; depth];
    for i in 0..depth {
        let d = (code >> (2 * i)) & 3;
        let at = depth - 1 - i;
        x[at] = if d & 1 == 1 { 1 } else { -1 };
        y[at] = if d & 2 == 2 { 1 } else { -1 };
    }
    PastWindow::new(x, y, boundary).expect("equal rows")
}

fn eval_past(scales: &ScaleTable, w: &PastWindow) -> Result<GOutput> {
    let padded = WallPadded::to_length(w, scales.window_depth as usize, w.boundary());
    evaluate(&padded, scales)
}

#[derive(Clone, Copy, Debug)]
struct Best {
    l1: f64,
    branch: f64,
    /// (prefix, tail_a, tail_b), for the witness and tie-breaks.
    key: (u64, u64, u64),
}

fn better(a: Best, b: Best) -> Best {
    match a.l1.partial_cmp(&b.l1) {
        Some(std::cmp::Ordering::Greater) => a,
        Some(std::cmp::Ordering::Less) => b,
        _ if a.key <= b.key => Best { branch: a.branch.max(b.branch), ..a },
        _ => Best { branch: a.branch.max(b.branch), ..b },
    }
}

/// Engine calls exact_var makes: one per past.
pub fn exact_calls(depth: usize) -> u128 {
    1u128 << (2 * depth)
}

/// Sup over all pasts of `depth` sites (wall beyond) that share their
/// newest j sites.
pub fn exact_var(scales: &ScaleTable, j: usize, depth: usize, boundary: Boundary) -> Result<VarEstimate> {
    exact_var_with(scales, j, depth, &PastWindow::wall(0, boundary), false)
}

/// The same sup, enumerating tails in reverse and comparing every pair
/// directly. Used as an order-independence check.
pub fn exact_var_permuted(scales: &ScaleTable, j: usize, depth: usize, boundary: Boundary) -> Result<VarEstimate> {
    exact_var_with(scales, j, depth, &PastWindow::wall(0, boundary), true)
}

/// As [`exact_var`], with the fixed past `background` between the
/// enumerated sites and the wall.
pub fn exact_var_over(
    scales: &ScaleTable,
    j: usize,
    depth: usize,
    background: &PastWindow,
    permuted: bool,
) -> Result<VarEstimate> {
    exact_var_with(scales, j, depth, background, permuted)
}

fn exact_var_with(
    scales: &ScaleTable,
    j: usize,
    depth: usize,
    background: &PastWindow,
    permuted: bool,
) -> Result<VarEstimate> {
    let boundary = background.boundary();
    let decode = |code: u64, depth: usize, boundary: Boundary| -> PastWindow {
        let w = decode(code, depth, boundary);
        if background.x_row().is_empty() {
            return w;
        }
        let x = [background.x_row(), w.x_row()].concat();
        let y = [background.y_row(), w.y_row()].concat();
        PastWindow::new(x, y, boundary).expect("equal rows")
    };
    let calls = exact_calls(depth);
    if calls > EXACT_CALL_LIMIT || depth > 31 {
        return Err(Error::BudgetExceeded { calls, limit: EXACT_CALL_LIMIT });
    }
    let j = j.min(depth);
    let prefixes = 1u64 << (2 * j);
    let tails = 1u64 << (2 * (depth - j));
    let per_prefix = |p: u64| -> Result<Best> {
        let mut outs: Vec<(u64, GOutput)> = Vec::with_capacity(tails as usize);
        let order: Box<dyn Iterator<Item = u64>> =
            if permuted { Box::new((0..tails).rev()) } else { Box::new(0..tails) };
        for t in order {
            let code = p | (t << (2 * j));
            outs.push((t, eval_past(scales, &decode(code, depth, boundary))?));
        }
        let mut best = Best { l1: 0.0, branch: 0.0, key: (p, 0, 0) };
        if permuted {
            for (i, (ta, a)) in outs.iter().enumerate() {
                for (tb, b) in &outs[i + 1..] {
                    let (lo, hi) = if ta < tb { (*ta, *tb) } else { (*tb, *ta) };
                    let cand = Best { l1: l1(a, b), branch: branch_gap(a, b), key: (p, lo, hi) };
                    best = better(best, cand);
                }
            }
        } else {
            // Distinct outputs are few; keep the first tail producing each.
            outs.sort_by_key(|(t, _)| *t);
            let mut distinct: Vec<(u64, GOutput)> = Vec::new();
            for (t, o) in outs {
                if !distinct.iter().any(|(_, d)| d.bits() == o.bits()) {
                    distinct.push((t, o));
                }
            }
            for (i, (ta, a)) in distinct.iter().enumerate() {
                for (tb, b) in &distinct[i + 1..] {
                    let cand = Best { l1: l1(a, b), branch: branch_gap(a, b), key: (p, *ta, *tb) };
                    best = better(best, cand);
                }
            }
        }
        Ok(best)
    };
    let results: Result<Vec<Best>> = (0..prefixes).into_par_iter().map(per_prefix).collect();
    let best = results?.into_iter().reduce(better).expect("at least one prefix");
    let witness = (best.l1 > 0.0).then(|| Witness {
        a: decode(best.key.0 | (best.key.1 << (2 * j)), depth, boundary),
        b: decode(best.key.0 | (best.key.2 << (2 * j)), depth, boundary),
    });
    let cap = analytic_bound(scales, j.max(1));
    Ok(VarEstimate {
        j,
        depth,
        lower_bound: best.l1,
        per_branch: best.branch,
        method: Method::Exhaustive,
        analytic_cap: cap.trivial,
        sharper_cap: cap.sharper,
        calls: calls as u64,
        witness,
    })
}

/// A pair of pasts sharing their newest `j` sites. Rows are oldest first.
#[derive(Clone, Debug)]
struct Pair {
    a: PastWindow,
    b: PastWindow,
}

fn random_y<R: Rng>(scales: &ScaleTable, len: usize, rng: &mut R) -> Vec<Spin> {
    match rng.gen_range(0..3) {
        0 => (0..len).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect(),
        1 => {
            let p = rng.gen_range(0.6..0.97);
            (0..len).map(|_| if rng.gen::<f64>() < p { 1 } else { -1 }).collect()
        }
        _ => {
            // Words: a short fair gap, then an occurrence of a random scale.
            let mut y = Vec::with_capacity(len + 64);
            let gap_max = 1usize << scales.ell(scales.base_scale);
            while y.len() < len {
                let gap = rng.gen_range(0..gap_max);
                for _ in 0..gap {
                    y.push(if rng.gen::<bool>() { 1 } else { -1 });
                }
                let s = rng.gen_range(scales.base_scale..=scales.k_max + 1);
                y.push(-1);
                y.extend(std::iter::repeat_n(1, scales.ell(s) as usize - 1));
                y.push(-1);
            }
            y.truncate(len);
            y
        }
    }
}

fn random_pair<R: Rng>(scales: &ScaleTable, j: usize, tail: usize, boundary: Boundary, rng: &mut R) -> Pair {
    let n = j + tail;
    let y = random_y(scales, n, rng);
    let x: Vec<Spin> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
    let mut xb = x.clone();
    let mut yb = y.clone();
    match rng.gen_range(0..4) {
        // Opposite unanimous tails.
        0 => {
            let mut xa = x.clone();
            xa[..tail].fill(1);
            xb[..tail].fill(-1);
            let a = PastWindow::new(xa, y.clone(), boundary).expect("rows");
            let b = PastWindow::new(xb, yb, boundary).expect("rows");
            return Pair { a, b };
        }
        // Mirrored tail.
        1 => xb[..tail].iter_mut().for_each(|v| *v = -*v),
        // Independent tail.
        2 => {
            let other = random_y(scales, tail, rng);
            yb[..tail].copy_from_slice(&other);
            xb[..tail].iter_mut().for_each(|v| *v = if rng.gen::<bool>() { 1 } else { -1 });
        }
        _ => xb[..tail].iter_mut().for_each(|v| *v = if rng.gen::<bool>() { 1 } else { -1 }),
    }
    let a = PastWindow::new(x, y, boundary).expect("rows");
    let b = PastWindow::new(xb, yb, boundary).expect("rows");
    Pair { a, b }
}

fn flip(w: &PastWindow, site: usize, y_row: bool) -> PastWindow {
    let mut x = w.x_row().to_vec();
    let mut y = w.y_row().to_vec();
    if y_row {
        y[site] = -y[site];
    } else {
        x[site] = -x[site];
    }
    PastWindow::new(x, y, w.boundary()).expect("rows")
}

/// Randomized lower bound for var_j: restarts from structured random pairs,
/// then greedy single-site flips. `budget` counts engine calls.
pub fn search_var(
    scales: &ScaleTable,
    j: usize,
    budget: u64,
    seed: u64,
    tail: Option<usize>,
    boundary: Boundary,
) -> Result<VarEstimate> {
    let budget = budget.max(1);
    let cap_len = scales.window_depth as usize;
    let tail = tail.unwrap_or(j.max(64)).min(cap_len.saturating_sub(j)).max(1);
    const CHUNKS: u64 = 64;
    let chunks = CHUNKS.min(budget.div_ceil(2)).max(1);
    let per_chunk = |c: u64| -> Result<(f64, f64, Option<Pair>, u64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c);
        let quota = budget / chunks + u64::from(c < budget % chunks);
        let mut calls = 0u64;
        let mut best = (0.0f64, 0.0f64, None::<Pair>);
        while calls < quota {
            let mut pair = random_pair(scales, j, tail, boundary, &mut rng);
            let mut ga = eval_past(scales, &pair.a)?;
            calls += 1;
            if calls >= quota {
                break;
            }
            let mut gb = eval_past(scales, &pair.b)?;
            calls += 1;
            let mut d = l1(&ga, &gb);
            best.1 = best.1.max(branch_gap(&ga, &gb));
            if d > best.0 {
                best = (d, best.1, Some(pair.clone()));
            }
            for _ in 0..24 {
                if calls >= quota {
                    break;
                }
                let touch_a = rng.gen::<bool>();
                let in_tail = rng.gen::<f64>() < 0.8;
                let site = if in_tail { rng.gen_range(0..tail) } else { tail + rng.gen_range(0..j.max(1)) };
                let site = site.min(tail + j - 1);
                let y_row = rng.gen::<f64>() < 0.3;
                if !in_tail && calls + 2 > quota {
                    break;
                }
                // Shared sites change in both pasts.
                let (na, nb) = if in_tail {
                    if touch_a {
                        (Some(flip(&pair.a, site, y_row)), None)
                    } else {
                        (None, Some(flip(&pair.b, site, y_row)))
                    }
                } else {
                    (Some(flip(&pair.a, site, y_row)), Some(flip(&pair.b, site, y_row)))
                };
                let ha = match &na {
                    Some(w) => {
                        calls += 1;
                        eval_past(scales, w)?
                    }
                    None => ga.clone(),
                };
                let hb = match &nb {
                    Some(w) => {
                        calls += 1;
                        eval_past(scales, w)?
                    }
                    None => gb.clone(),
                };
                let nd = l1(&ha, &hb);
                best.1 = best.1.max(branch_gap(&ha, &hb));
                if nd >= d {
                    if let Some(w) = na {
                        pair.a = w;
                    }
                    if let Some(w) = nb {
                        pair.b = w;
                    }
                    ga = ha;
                    gb = hb;
                    d = nd;
                    if d > best.0 {
                        best = (d, best.1, Some(pair.clone()));
                    }
                }
            }
        }
        Ok((best.0, best.1, best.2, calls))
    };
    let parts: Result<Vec<_>> = (0..chunks).into_par_iter().map(per_chunk).collect();
    let parts = parts?;
    let calls = parts.iter().map(|p| p.3).sum();
    let branch = parts.iter().map(|p| p.1).fold(0.0, f64::max);
    // First chunk wins ties.
    let mut top: Option<(f64, Option<Pair>)> = None;
    for (d, _, pair, _) in parts {
        if top.as_ref().is_none_or(|(b, _)| d > *b) {
            top = Some((d, pair));
        }
    }
    let (lower, pair) = top.expect("at least one chunk");
    let cap = analytic_bound(scales, j.max(1));
    Ok(VarEstimate {
        j,
        depth: j + tail,
        lower_bound: lower,
        per_branch: branch,
        method: Method::RandomSearch,
        analytic_cap: cap.trivial,
        sharper_cap: cap.sharper,
        calls,
        witness: pair.filter(|_| lower > 0.0).map(|p| Witness { a: p.a, b: p.b }),
    })
}

pub fn bound_exponent(epsilon: f64) -> f64 {
    (1.0 - 2.0 * epsilon) / (2.0 * (1.0 + epsilon).powi(2))
}

pub fn p_star(epsilon: f64) -> f64 {
    2.0 * (1.0 + epsilon).powi(2) / (1.0 - 2.0 * epsilon)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bound {
    pub j: usize,
    /// min(1.6, 8 j^-e).
    pub trivial: f64,
    /// 2 beta_{k-1}^(-1/2+eps) when beta_k < j <= beta_{k+1}, k >= K + 1.
    pub sharper: Option<f64>,
    pub k: Option<usize>,
    pub value: f64,
}

/// The scale k with beta_k < j <= beta_{k+1}, if k >= K + 1 and the table
/// reaches beta_{k+1}.
pub fn sharper_scale(scales: &ScaleTable, j: usize) -> Option<usize> {
    let j = j as u64;
    ((scales.base_scale + 1)..scales.top()).find(|&k| scales.beta(k) < j && j <= scales.beta(k + 1))
}

pub fn analytic_bound(scales: &ScaleTable, j: usize) -> Bound {
    let e = bound_exponent(scales.epsilon);
    let trivial = (8.0 * real_pow(j.max(1) as u64, -e)).min(L1_CAP);
    let k = sharper_scale(scales, j);
    let sharper = k.map(|k| 2.0 * real_pow(scales.beta(k - 1), scales.epsilon - 0.5));
    let value = sharper.map_or(trivial, |s| s.min(trivial));
    Bound { j, trivial, sharper, k, value }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Curve {
    pub name: String,
    pub partial_sum: f64,
    /// Sum of var^p over [2^m, 2^(m+1)) for m = 0, 1, ...
    pub dyadic: Vec<f64>,
    pub ratios: Vec<f64>,
    pub tail_ratio: f64,
    pub convergent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpReport {
    pub p: f64,
    pub epsilon: f64,
    pub p_star: f64,
    /// p* tends to 2 as eps tends to 0.
    pub p_star_eps_to_0: f64,
    pub j_max: usize,
    pub curves: Vec<Curve>,
    /// Sum of measured lower bounds^p over the supplied points.
    pub measured_partial_sum: f64,
    pub measured_points: usize,
}

fn curve(name: &str, p: f64, j_max: usize, f: impl Fn(usize) -> f64) -> Curve {
    // Full blocks [2^m, 2^(m+1)) inside [1, j_max].
    let mut dyadic = Vec::new();
    let mut lo = 1usize;
    while 2 * lo - 1 <= j_max {
        dyadic.push((lo..2 * lo).map(|j| f(j).powf(p)).sum::<f64>());
        lo *= 2;
    }
    let ratios: Vec<f64> = dyadic.windows(2).map(|w| w[1] / w[0]).collect();
    let tail_ratio = ratios.last().copied().unwrap_or(f64::NAN);
    Curve {
        name: name.into(),
        partial_sum: dyadic.iter().sum(),
        convergent: tail_ratio < 1.0,
        dyadic,
        ratios,
        tail_ratio,
    }
}

pub fn lp_report(scales: &ScaleTable, p: f64, j_max: usize, estimates: &[VarEstimate]) -> LpReport {
    let eps = scales.epsilon;
    let e = bound_exponent(eps);
    let trivial = |j: usize| (8.0 * (j as f64).powf(-e)).min(L1_CAP);
    // Sharper caps are constant on (beta_k, beta_{k+1}].
    let steps: Vec<(u64, u64, f64)> = ((scales.base_scale + 1)..scales.top())
        .map(|k| (scales.beta(k), scales.beta(k + 1), 2.0 * real_pow(scales.beta(k - 1), eps - 0.5)))
        .collect();
    let combined = |j: usize| {
        let t = trivial(j);
        let j = j as u64;
        steps.iter().find(|s| s.0 < j && j <= s.1).map_or(t, |s| s.2.min(t))
    };
    LpReport {
        p,
        epsilon: eps,
        p_star: p_star(eps),
        p_star_eps_to_0: 2.0,
        j_max,
        curves: vec![curve("power", p, j_max, trivial), curve("combined", p, j_max, combined)],
        measured_partial_sum: estimates.iter().map(|v| v.lower_bound.powf(p)).sum(),
        measured_points: estimates.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{build_scales, SpecConfig};

    fn preset() -> ScaleTable {
        build_scales(&SpecConfig::preset_a()).unwrap()
    }

    #[test]
    fn bound_examples() {
        let t = preset();
        assert!((bound_exponent(0.3) - 0.118_343_195_266_272_2).abs() < 1e-12);
        assert!((p_star(0.3) - 8.45).abs() < 1e-12);
        assert_eq!(analytic_bound(&t, 100).trivial, 1.6);
        assert_eq!(analytic_bound(&t, 1).value, 1.6);
        let b = analytic_bound(&t, 3000);
        assert_eq!(b.k, Some(9));
        assert!((b.sharper.unwrap() - 2.0 * 512f64.powf(-0.2)).abs() < 1e-12);
        assert!((b.sharper.unwrap() - 0.5744).abs() < 1e-4);
        let mut last = f64::INFINITY;
        for j in (1..300_000).step_by(97) {
            let v = analytic_bound(&t, j).value;
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn exact_var_basics() {
        let t = preset();
        let full = exact_var(&t, 4, 4, Boundary::Plus).unwrap();
        assert_eq!(full.lower_bound, 0.0);
        for j in 0..4 {
            let v = exact_var(&t, j, 4, Boundary::Plus).unwrap();
            assert!(v.lower_bound <= L1_CAP);
        }
        assert!(matches!(exact_var(&t, 1, 14, Boundary::Plus), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn lp_threshold_convergence() {
        let t = preset();
        let r = lp_report(&t, p_star(0.3) + 1.0, 1 << 22, &[]);
        let power = &r.curves[0];
        assert_eq!(power.name, "power");
        assert!(power.convergent, "{:?}", power.ratios);
        assert!(power.tail_ratio < 0.95);
    }
}
