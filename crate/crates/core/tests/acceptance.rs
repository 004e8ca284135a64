//! Acceptance suite. One status line per criterion; the process fails when
//! an enforced criterion fails. Reported criteria print FAIL without
//! failing the run.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::{parser_mismatches, preset_a, random_y, rng};
use gchain::blockscan::k0_of;
use gchain::blockstats::{tail_histogram, waiting_pmf};
use gchain::chain::{run, CapRule, RunOptions, Trajectory};
use gchain::gfun::evaluate;
use gchain::params::{ScaleTable, SpecConfig};
use gchain::phaselab::{boundary_contrast, ContrastReport, PersistenceReport};
use gchain::varlab::{analytic_bound, exact_var_over, search_var};
use gchain::window::{Boundary, History, Negated, PastWindow, Patched, Spin, SyntheticWindow, WallPadded, WithY0, YRow};
use rand::Rng;
use rayon::prelude::*;

const STEPS: u64 = 1 << 22;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Policy {
    /// A failure fails the run.
    Enforced,
    /// Printed and recorded only.
    Reported,
}

struct Board {
    lines: Vec<(String, bool, Policy)>,
}

impl Board {
    fn record(&mut self, id: &str, pass: bool, policy: Policy, detail: String, started: Instant) {
        let tag = if pass { "PASS" } else { "FAIL" };
        let kind = match policy {
            Policy::Enforced => "",
            Policy::Reported => " (reported)",
        };
        println!("criterion {id}: {tag}{kind} [{:.1}s] {detail}", started.elapsed().as_secs_f64());
        self.lines.push((id.to_string(), pass, policy));
    }
}

/// Sites [0, n) of a trajectory.
struct Prefix<'a> {
    t: &'a Trajectory,
    n: usize,
}

impl YRow for Prefix<'_> {
    fn len(&self) -> usize {
        self.n
    }
    fn y(&self, t: usize) -> Spin {
        self.t.y[t]
    }
}

impl History for Prefix<'_> {
    fn x(&self, t: usize) -> Spin {
        self.t.x[t]
    }
}

/// The chain's view of its past just before generating site n.
fn chain_window<'a>(t: &'a Trajectory, n: usize, s: &ScaleTable) -> WallPadded<Prefix<'a>> {
    WallPadded::new(Prefix { t, n }, s.window_depth as usize, t.boundary)
}

struct Fixture {
    config: SpecConfig,
    scales: ScaleTable,
    plus: Trajectory,
    minus: Trajectory,
}

impl Fixture {
    fn new() -> Self {
        let config = SpecConfig::preset_a();
        let scales = preset_a();
        let go = |b, seed| run(&config, &scales, b, seed, STEPS, RunOptions::default(), None).unwrap().0;
        let plus = go(Boundary::Plus, 7001);
        let minus = go(Boundary::Minus, 7002);
        Fixture { config, scales, plus, minus }
    }

    fn traj(&self, i: u64) -> &Trajectory {
        if i.is_multiple_of(2) {
            &self.plus
        } else {
            &self.minus
        }
    }
}

/// Window number i: odd-even mix of fair hashed pasts and chain pasts.
fn visit_window<R>(f: &Fixture, i: u64, visit: impl FnOnce(&dyn HistoryDyn) -> R) -> R {
    let s = &f.scales;
    if i.is_multiple_of(2) {
        visit(&SyntheticWindow::new(i, s.window_depth as usize))
    } else {
        let mut r = rng(i);
        let t = f.traj(i / 2);
        let n = r.gen_range(1..=t.len());
        visit(&chain_window(t, n, s))
    }
}

/// Object-safe alias so both window kinds go through one code path.
trait HistoryDyn: History + Sync {}
impl<T: History + Sync> HistoryDyn for T {}

fn c1_symmetry(f: &Fixture, board: &mut Board) {
    let start = Instant::now();
    let n = 100_000u64;
    let s = &f.scales;
    let results: Vec<(bool, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            visit_window(f, i, |w| {
                let g = evaluate(&w, s).unwrap();
                let h = evaluate(&Negated(&w), s).unwrap();
                let ok = g.p11.to_bits() == h.pm11.to_bits()
                    && g.pm11.to_bits() == h.p11.to_bits()
                    && g.p1m1.to_bits() == h.pm1m1.to_bits()
                    && g.pm1m1.to_bits() == h.p1m1.to_bits();
                (ok, g.k0_used)
            })
        })
        .collect();
    let bad = results.iter().filter(|r| !r.0).count();
    let mut k0s: BTreeMap<usize, u64> = BTreeMap::new();
    for r in &results {
        *k0s.entry(r.1).or_default() += 1;
    }
    board.record(
        "1",
        bad == 0,
        Policy::Enforced,
        format!("x-negation symmetry on {n} windows: {bad} bit mismatches; k0 coverage {k0s:?}"),
        start,
    );
}

fn c2_normalization(f: &Fixture, board: &mut Board) {
    let start = Instant::now();
    let n = 1_000_000u64;
    let s = &f.scales;
    let (sum_err, marg_err, lo, hi) = (0..n)
        .into_par_iter()
        .map(|i| {
            visit_window(f, i, |w| {
                let c = evaluate(&w, s).unwrap().coords();
                let sum = (c.iter().sum::<f64>() - 1.0).abs();
                let marg = (c[0] + c[1] - 0.5).abs().max((c[2] + c[3] - 0.5).abs());
                let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (sum, marg, lo, hi)
            })
        })
        .reduce(
            || (0.0, 0.0, f64::INFINITY, f64::NEG_INFINITY),
            |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.min(b.2), a.3.max(b.3)),
        );
    let tol = 1e-12;
    let pass = sum_err <= tol && marg_err <= tol && lo >= 0.05 - tol && hi <= 0.45 + tol;
    board.record(
        "2",
        pass,
        Policy::Enforced,
        format!(
            "{n} windows: max |sum-1| = {sum_err:.1e}, max |y-marginal - 1/2| = {marg_err:.1e}, coordinates in [{lo:.17}, {hi:.17}] (target [0.05, 0.45], tol 1e-12)"
        ),
        start,
    );
}

fn c3_parser(board: &mut Board) {
    let start = Instant::now();
    let s = preset_a();
    let n = 1000u64;
    let bad: Vec<String> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut r = rng(30_000 + i);
            parser_mismatches(&random_y(&mut r, 4096), &s)
        })
        .collect();
    board.record(
        "3",
        bad.is_empty(),
        Policy::Enforced,
        format!(
            "{n} y-windows of length 4096, scales {:?}: {} mismatches against the brute-force oracle{}",
            s.active(),
            bad.len(),
            bad.first().map(|b| format!(" (first: {b})")).unwrap_or_default()
        ),
        start,
    );
}

fn c4_locality(f: &Fixture, board: &mut Board) {
    let start = Instant::now();
    let s = &f.scales;
    let trials = 10_000u64;
    // (checked evaluations, violations, violations at the bare radius, checked memberships, membership violations)
    let tally = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(40_000 + i);
            let t = f.traj(i);
            let n = r.gen_range(1..=t.len());
            let w = chain_window(t, n, s);
            let len = YRow::len(&w);
            let t_now = len;
            let g = evaluate(&w, s).unwrap();
            let mut out = [0u64; 5];
            let flips = r.gen_range(1..=8);
            let perturb = |min_dist: usize, r: &mut rand_chacha::ChaCha8Rng| -> Option<Patched<&WallPadded<Prefix>>> {
                if min_dist > t_now {
                    return None;
                }
                let mut p = Patched::new(&w);
                for _ in 0..flips {
                    let d = r.gen_range(min_dist..=t_now);
                    let site = t_now - d;
                    if r.gen_bool(0.5) {
                        p.flip_y(site);
                    }
                    p.flip_x(site);
                }
                Some(p)
            };
            let k0 = g.plus.k0.max(g.minus.k0);
            if !g.plus.capped && !g.minus.capped {
                let beta = s.beta(k0 + 2) as usize;
                let ell = s.ell(k0 + 1) as usize;
                if let Some(p) = perturb(beta + ell, &mut r) {
                    out[0] += 1;
                    out[1] += (evaluate(&p, s).unwrap().bits() != g.bits()) as u64;
                }
                if let Some(p) = perturb(beta + 1, &mut r) {
                    out[2] += (evaluate(&p, s).unwrap().bits() != g.bits()) as u64;
                }
            }
            let depth = k0_of(&WithY0::new(&w, 1), s).unwrap().value;
            let k = r.gen_range(s.base_scale..=s.k_max);
            let radius = (s.beta(k + 1) + s.ell(k) - 1) as usize;
            if let Some(p) = perturb(radius, &mut r) {
                let d2 = k0_of(&WithY0::new(&p, 1), s).unwrap().value;
                out[3] += 1;
                out[4] += ((d2 >= k) != (depth >= k)) as u64;
            }
            out
        })
        .reduce(|| [0; 5], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3], a[4] + b[4]]);
    let pass = tally[1] == 0 && tally[4] == 0 && tally[0] >= trials / 2;
    board.record(
        "4",
        pass,
        Policy::Enforced,
        format!(
            "deep-past perturbations: evaluate() changed in {}/{} (radius beta_{{k0+2}} + ell_{{k0+1}}; {} changes at bare radius beta_{{k0+2}}+1); 0 in C_k changed in {}/{} (radius beta_{{k+1}} + ell_k - 1)",
            tally[1], tally[0], tally[2], tally[4], tally[3]
        ),
        start,
    );
}

/// Expected waiting time of a binary word from its autocorrelation:
/// the sum of 2^k over every k where the length-k prefix equals the suffix.
fn conway_mean(word: &[Spin]) -> f64 {
    let n = word.len();
    (1..=n).filter(|&k| word[..k] == word[n - k..]).map(|k| 2f64.powi(k as i32)).sum()
}

fn pattern(ell: u64) -> Vec<Spin> {
    let mut w = vec![1; ell as usize - 1];
    w.push(-1);
    w
}

fn c5_renewal(f: &Fixture, board: &mut Board) {
    let start = Instant::now();
    let s = &f.scales;
    let mut parts = Vec::new();
    let mut pass = true;
    for k in [7usize, 8] {
        let h = tail_histogram(s, k, 1_000_000, 0, 500 + k as u64).unwrap();
        let oracle = conway_mean(&pattern(s.ell(k)));
        let rel = (h.mean_len - oracle).abs() / oracle;
        pass &= rel < 0.02 && oracle == s.beta(k) as f64;
        parts.push(format!(
            "beta={} mean={:.2}±{:.2} (oracle {oracle}, rel err {:.4})",
            s.beta(k),
            h.mean_len,
            h.mean_len_stderr,
            rel
        ));
    }
    let pmf = waiting_pmf(3, 8 * 400);
    let exact: f64 = pmf.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    let tail: f64 = 1.0 - pmf.iter().sum::<f64>();
    pass &= (exact - 8.0).abs() < 1e-9 && conway_mean(&pattern(3)) == 8.0;
    parts.push(format!("beta=8 transfer-matrix mean {exact:.12} (unresolved mass {tail:.1e})"));
    board.record("5", pass, Policy::Enforced, parts.join("; "), start);
}

fn c6_tail(f: &Fixture, board: &mut Board) {
    let start = Instant::now();
    let h = tail_histogram(&f.scales, 7, 1_000_000, 5, 600).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for b in &h.buckets {
        let inside = b.mass + 3.0 * b.stderr > b.bound_lo && b.mass - 3.0 * b.stderr < b.bound_hi;
        pass &= inside && !b.flag;
        parts.push(format!(
            "j={}: {:.5}±{:.5} in ({:.5}, {:.5}) exact {:.5}",
            b.j, b.mass, b.stderr, b.bound_lo, b.bound_hi, b.exact
        ));
    }
    board.record("6", pass, Policy::Enforced, format!("beta=128, 1e6 samples: {}", parts.join("; ")), start);
}

fn c7_variation(f: &Fixture, board: &mut Board) {
    let start = Instant::now();
    let s = &f.scales;
    let points = [(8usize, 513usize), (8, 1024), (8, 2048), (9, 2049), (9, 8192), (9, 16384)];
    let mut l1_ok = true;
    let mut branch_ok = true;
    let mut parts = Vec::new();
    for &(k, j) in &points {
        let e = search_var(s, j, 100_000, 70 + j as u64, None, Boundary::Plus).unwrap();
        let cap = 2.0 * gchain::params::real_pow(s.beta(k - 1), s.epsilon - 0.5);
        let b = analytic_bound(s, j);
        assert_eq!(b.k, Some(k));
        l1_ok &= e.lower_bound <= cap + 1e-12;
        branch_ok &= e.per_branch <= cap + 1e-12;
        parts.push(format!("k={k} j={j}: L1 {:.4} per-branch {:.4} cap {:.4}", e.lower_bound, e.per_branch, cap));
    }
    board.record(
        "7a",
        l1_ok,
        Policy::Reported,
        format!("search lower bounds (budget 1e5, four-coordinate L1) vs 2 beta_{{k-1}}^(-1/2+eps): {}", parts.join("; ")),
        start,
    );
    board.record(
        "7a'",
        branch_ok,
        Policy::Reported,
        "same search, single y_0 branch |g_1(a) - g_1(b)| against the same cap".into(),
        start,
    );

    let start = Instant::now();
    let mut exact_ok = true;
    let mut parts = Vec::new();
    for (i, cut) in [131usize, 700, 5000].into_iter().enumerate() {
        let t = if i % 2 == 0 { &f.plus } else { &f.minus };
        let bg = PastWindow::new(t.x[..cut].to_vec(), t.y[..cut].to_vec(), t.boundary).unwrap();
        let mut row = Vec::new();
        let mut prev = f64::INFINITY;
        for j in 0..=8 {
            let a = exact_var_over(s, j, 8, &bg, false).unwrap();
            let b = exact_var_over(s, j, 8, &bg, true).unwrap();
            exact_ok &= a.lower_bound.to_bits() == b.lower_bound.to_bits()
                && a.per_branch.to_bits() == b.per_branch.to_bits()
                && a.lower_bound <= prev;
            prev = a.lower_bound;
            row.push(format!("{:.4}", a.lower_bound));
        }
        parts.push(format!("background {cut} sites: [{}]", row.join(", ")));
    }
    board.record(
        "7b",
        exact_ok,
        Policy::Enforced,
        format!("exact var_j, j = 0..8, depth 8: permuted recomputation identical and nonincreasing; {}", parts.join("; ")),
        start,
    );
}

fn contrast(f: &Fixture, rule: CapRule) -> ContrastReport {
    let plus: Vec<u64> = (1..=10).collect();
    let minus: Vec<u64> = (101..=110).collect();
    boundary_contrast(&f.config, &f.scales, &plus, &minus, STEPS, rule).unwrap()
}

fn contrast_line(r: &ContrastReport) -> String {
    format!(
        "plus mean {:+.4} CI [{:+.4}, {:+.4}] ({} blocks), minus mean {:+.4} CI [{:+.4}, {:+.4}] ({} blocks), difference {:+.4} CI [{:+.4}, {:+.4}], CIs disjoint: {}",
        r.plus.mean,
        r.plus.ci_lo,
        r.plus.ci_hi,
        r.plus.blocks,
        r.minus.mean,
        r.minus.ci_lo,
        r.minus.ci_hi,
        r.minus.blocks,
        r.difference,
        r.difference_ci.0,
        r.difference_ci.1,
        r.disjoint
    )
}

fn c8_phase(f: &Fixture, board: &mut Board) -> (ContrastReport, ContrastReport) {
    let start = Instant::now();
    let literal = contrast(f, CapRule::Empty);
    board.record(
        "8",
        literal.separated,
        Policy::Reported,
        format!("k_top = {}, 10 seeds per wall, 2^22 steps: {}", literal.k_top, contrast_line(&literal)),
        start,
    );

    let start = Instant::now();
    let variant = contrast(f, CapRule::Boundary);
    board.record(
        "8'",
        variant.separated,
        Policy::Reported,
        format!("variant with the wall spin voting at the cap: {}", contrast_line(&variant)),
        start,
    );

    let start = Instant::now();
    let null = contrast(f, CapRule::Shuffled);
    board.record(
        "8-null",
        !null.separated,
        Policy::Reported,
        format!("shuffled cap spin (should not separate): {}", contrast_line(&null)),
        start,
    );

    let start = Instant::now();
    let mut mirror_ok = true;
    for rule in [CapRule::Empty, CapRule::Boundary] {
        for seed in [1u64, 2] {
            let opts = RunOptions { replicate: 0, cap_rule: rule };
            let p = run(&f.config, &f.scales, Boundary::Plus, seed, STEPS, opts, None).unwrap().0;
            let m = run(&f.config, &f.scales, Boundary::Minus, seed, STEPS, opts, None).unwrap().0;
            mirror_ok &= p.y == m.y && p.x.iter().zip(&m.x).all(|(a, b)| *a == -*b);
        }
    }
    board.record(
        "8-mirror",
        mirror_ok,
        Policy::Enforced,
        "coupled plus/minus runs with one seed: y identical and x exactly negated (2 seeds, 2 cap rules, 2^22 steps)".into(),
        start,
    );
    (literal, variant)
}

/// Mean and standard error across runs.
fn across(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

fn trend(name: &str, rows: &[(usize, f64, f64)]) -> (bool, String) {
    let ok = rows.windows(2).all(|w| w[1].1 >= w[0].1 - 3.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    let body: Vec<String> = rows.iter().map(|(k, m, se)| format!("k={k} {m:.4}±{se:.4}")).collect();
    (ok, format!("{name} [{}]", body.join(", ")))
}

fn trends(reports: &[PersistenceReport]) -> (bool, String) {
    let scales = reports[0].scales.len();
    let per = |f: &dyn Fn(&gchain::phaselab::ScaleReport) -> Option<f64>| -> Vec<(usize, f64, f64)> {
        (0..scales)
            .filter_map(|i| {
                let vals: Vec<f64> = reports.iter().filter_map(|r| f(&r.scales[i])).collect();
                (!vals.is_empty()).then(|| {
                    let (m, se) = across(vals.into_iter());
                    (reports[0].scales[i].k, m, se)
                })
            })
            .collect()
    };
    let (a, sa) = trend("good fraction", &per(&|s| Some(s.good_fraction.value)));
    let (b, sb) = trend("k-beautiful frequency", &per(&|s| Some(s.beautiful_frequency.value)));
    let (c, sc) = trend("signature agreement", &per(&|s| s.agreement.as_ref().map(|a| a.rate)));
    (a && b && c, format!("{sa}: {}; {sb}: {}; {sc}: {}", ok(a), ok(b), ok(c)))
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "violated"
    }
}

fn c9_trends(literal: &ContrastReport, variant: &ContrastReport, board: &mut Board) {
    let start = Instant::now();
    let (pass, detail) = trends(&literal.reports);
    board.record("9", pass, Policy::Reported, format!("20 runs, 3-SE slack: {detail}"), start);
    let (pass, detail) = trends(&variant.reports);
    board.record("9'", pass, Policy::Reported, format!("variant rule: {detail}"), start);
}

fn cli(dir: &Path, threads: &str, args: &[&str]) -> (i32, Vec<u8>) {
    let o = Command::new(env!("CARGO_BIN_EXE_gchain"))
        .args(args)
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env("GCHAIN_THREADS", threads)
        .output()
        .expect("binary runs");
    (o.status.code().unwrap_or(-1), o.stdout)
}

fn c10_determinism(board: &mut Board) {
    let start = Instant::now();
    let runs: Vec<Vec<&str>> = vec![
        vec!["--manifest", "m_scales.json", "scales", "--eps", "0.3", "--K", "7", "--kmax", "10", "--out", "scales.csv"],
        vec!["--manifest", "m_sim.json", "simulate", "--steps", "300000", "--seed", "5", "--out", "t.bin", "--records", "r.csv"],
        vec!["--manifest", "m_blocks.json", "blocks", "t.bin", "--format", "traj", "--out", "blocks.csv"],
        vec!["--manifest", "m_eval.json", "eval", "--window", "w.txt", "--out", "eval.json"],
        vec!["--manifest", "m_bs.json", "blockstats", "--k", "7", "--samples", "200000", "--seed", "3", "--out", "bs.csv"],
        vec!["--manifest", "m_var.json", "var", "--mode", "search", "--j", "600,3000", "--budget", "4000", "--seed", "4", "--out", "var.csv"],
        vec!["--manifest", "m_rep.json", "var", "--mode", "report", "--j", "600", "--budget", "2000", "--out", "rep.csv", "--json", "rep.json"],
        vec!["--manifest", "m_phase.json", "phase", "--steps", "262144", "--seeds", "1-2", "--out", "phase.json", "--csv", "phase.csv"],
    ];
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let threads = ["4", "4", "1"];
    let mut stdout: Vec<Vec<Vec<u8>>> = vec![Vec::new(); 3];
    let mut codes_ok = true;
    for d in &dirs {
        std::fs::write(d.path().join("w.txt"), "+-++-+--+\n++-+++-++\n").unwrap();
    }
    for (i, (d, th)) in dirs.iter().zip(threads).enumerate() {
        for args in &runs {
            let (code, out) = cli(d.path(), th, args);
            codes_ok &= code == 0;
            stdout[i].push(out);
        }
    }
    let listing = |d: &Path| -> BTreeMap<String, Vec<u8>> {
        std::fs::read_dir(d)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect()
    };
    let a = listing(dirs[0].path());
    let b = listing(dirs[1].path());
    let c = listing(dirs[2].path());
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k) || a.get(*k) != c.get(*k)).collect();
    let pass = codes_ok && differing.is_empty() && a.len() == b.len() && a.len() == c.len() && stdout[0] == stdout[1] && stdout[0] == stdout[2];
    board.record(
        "10",
        pass,
        Policy::Enforced,
        format!(
            "{} CLI runs repeated twice with 4 threads and once with 1: {} artifacts compared, differing: {:?}, all exit 0: {codes_ok}",
            runs.len(),
            a.len(),
            differing
        ),
        start,
    );
}

fn main() {
    let only: Option<Vec<String>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').map(|s| s.trim().to_string()).collect());
    let want = |id: &str| only.as_ref().is_none_or(|o| o.iter().any(|x| x == id));
    // libtest flags such as --list must not start a long run.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let total = Instant::now();
    let mut board = Board { lines: Vec::new() };
    let start = Instant::now();
    let f = Fixture::new();
    println!("fixture: two preset-A chains of 2^22 steps in {:.1}s", start.elapsed().as_secs_f64());
    if want("1") {
        c1_symmetry(&f, &mut board);
    }
    if want("2") {
        c2_normalization(&f, &mut board);
    }
    if want("3") {
        c3_parser(&mut board);
    }
    if want("4") {
        c4_locality(&f, &mut board);
    }
    if want("5") {
        c5_renewal(&f, &mut board);
    }
    if want("6") {
        c6_tail(&f, &mut board);
    }
    if want("7") {
        c7_variation(&f, &mut board);
    }
    if want("8") || want("9") {
        let (literal, variant) = c8_phase(&f, &mut board);
        c9_trends(&literal, &variant, &mut board);
    }
    if want("10") {
        c10_determinism(&mut board);
    }
    let failed_enforced: Vec<&String> =
        board.lines.iter().filter(|(_, p, pol)| !p && *pol == Policy::Enforced).map(|(id, _, _)| id).collect();
    let failed_reported: Vec<&String> =
        board.lines.iter().filter(|(_, p, pol)| !p && *pol == Policy::Reported).map(|(id, _, _)| id).collect();
    println!(
        "acceptance: {} lines, enforced failures {:?}, reported failures {:?}, {:.1}s",
        board.lines.len(),
        failed_enforced,
        failed_reported,
        total.elapsed().as_secs_f64()
    );
    if !failed_enforced.is_empty() {
        std::process::exit(1);
    }
}
