//! Forward simulation of the chain from a wall boundary.
//!
//! The sampler never stores the window. At site t it keeps, for every scale
//! j in [K, k_max], the start of the current j-block, the index of the
//! current (j-1)-block inside it, and sufficient statistics of the opening
//! of the current j-block. This is exactly what the g-function reads, and
//! `tests::matches_whole_window_evaluation` checks the equivalence step by
//! step against [`crate::gfun::evaluate`] on the materialized window.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blockscan::{Levels, ScaleCursor};
use crate::error::{Error, Result};
use crate::gfun::sign;
use crate::params::{ScaleTable, SpecConfig};
use crate::report::config_hash;
use crate::window::{pack_bits, splitmix64, unpack_bits, Boundary, Spin, YRow};

/// What a site of maximal depth uses as its majority.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapRule {
    /// S is empty: x_0 is a fair coin.
    #[default]
    Empty,
    /// The boundary spin stands in for the majority of the unseen higher
    /// scale, with bias upsilon_{k_max}.
    Boundary,
    /// As `Boundary`, but the spin is a fresh hash-derived coin at every
    /// capped site and in the wall openings. A null control.
    Shuffled,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct OpenStats {
    count: u64,
    sum: i64,
    last_x: Spin,
}

impl OpenStats {
    fn push(&mut self, x: Spin) {
        self.count += 1;
        self.sum += x as i64;
        self.last_x = x;
    }

    /// (|S|, sum over S) after dropping the max of an even set.
    fn odd(&self) -> (u64, i64) {
        if self.count > 0 && self.count.is_multiple_of(2) {
            (self.count - 1, self.sum - self.last_x as i64)
        } else {
            (self.count, self.sum)
        }
    }
}

fn hash_spin(seed: u64, replicate: u64, at: u64) -> Spin {
    let h = splitmix64(splitmix64(seed ^ replicate.rotate_left(32)) ^ at);
    if h & 1 == 1 {
        1
    } else {
        -1
    }
}

/// Per-step diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    /// Steps since start (0-based).
    pub t: u64,
    pub x: Spin,
    pub y: Spin,
    pub k0: usize,
    pub capped: bool,
    pub upsilon: f64,
    pub s_size: u64,
    /// sign of the x-sum over S.
    pub majority: Spin,
}

#[derive(Clone, Debug)]
pub struct ChainState {
    scales: ScaleTable,
    boundary: Boundary,
    cap_rule: CapRule,
    seed: u64,
    replicate: u64,
    rng: ChaCha8Rng,
    levels: Levels,
    cursor: ScaleCursor,
    stats: Vec<OpenStats>,
    run: u64,
    /// Absolute index of the next site; the wall sits at 0.
    site: u64,
    steps: u64,
}

impl ChainState {
    /// State after a wall prefill of `window_depth` sites: x = boundary,
    /// y = +1, with the oldest site acting as an end of every pattern.
    pub fn init(scales: &ScaleTable, boundary: Boundary, seed: u64) -> Self {
        Self::with_options(scales, boundary, seed, 0, CapRule::Empty)
    }

    pub fn with_options(
        scales: &ScaleTable,
        boundary: Boundary,
        seed: u64,
        replicate: u64,
        cap_rule: CapRule,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replicate);
        let levels = Levels::new(scales, scales.k_max);
        let cursor = ScaleCursor::anchored(scales, scales.k_max, 0);
        let n = scales.k_max + 1 - scales.base_scale;
        let depth = scales.window_depth;
        // Wall-block openings: the first begin_len sites after the wall.
        let members = scales.begin_len_base.min(depth);
        let b = boundary.sign();
        let wall = if cap_rule == CapRule::Shuffled {
            let spins: Vec<Spin> = (0..members).map(|i| hash_spin(seed, replicate, u64::MAX - i)).collect();
            OpenStats {
                count: members,
                sum: spins.iter().map(|&v| v as i64).sum(),
                last_x: spins.last().copied().unwrap_or(b),
            }
        } else {
            OpenStats { count: members, sum: members as i64 * b as i64, last_x: b }
        };
        ChainState {
            scales: scales.clone(),
            boundary,
            cap_rule,
            seed,
            replicate,
            rng,
            run: depth.min(levels.max_run()),
            levels,
            cursor,
            stats: vec![wall; n],
            site: depth,
            steps: 0,
        }
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    pub fn scales(&self) -> &ScaleTable {
        &self.scales
    }

    /// Majority and bias for the newest site given y_0; advances the
    /// block state. Returns (k0, capped, |S|, majority, upsilon).
    fn prepare(&mut self, y0: Spin) -> (usize, bool, u64, Spin, f64) {
        let sc = &self.scales;
        let t = self.site as usize;
        let level = if y0 == -1 { self.levels.of_run(self.run) } else { self.levels.none() };
        self.cursor.advance(t, level);
        let depth = self.cursor.depth(sc, t);
        for j in sc.base_scale..=level.min(sc.k_max) {
            self.stats[j - sc.base_scale] = OpenStats::default();
        }
        if depth == sc.k_max {
            let ups = sc.upsilon(sc.k_max);
            return match self.cap_rule {
                CapRule::Empty => (depth, true, 0, 0, ups),
                CapRule::Boundary => (depth, true, 0, self.boundary.sign(), ups),
                CapRule::Shuffled => (depth, true, 0, hash_spin(self.seed, self.replicate, self.steps), ups),
            };
        }
        let (size, sum) = self.stats[depth + 1 - sc.base_scale].odd();
        let majority = sign(sum);
        let a = self.cursor.start(depth + 1) as u64;
        let upsilon = if size > 0 && a + sc.beta(depth + 2) < self.site {
            0.0
        } else if depth + 1 == sc.base_scale {
            sc.upsilon_clamp
        } else {
            sc.upsilon(depth)
        };
        (depth, false, size, majority, upsilon)
    }

    fn commit(&mut self, depth: usize, x0: Spin, y0: Spin) {
        let base = self.scales.base_scale;
        for j in base..=depth {
            self.stats[j - base].push(x0);
        }
        self.run = if y0 == 1 { (self.run + 1).min(self.levels.max_run()) } else { 0 };
        self.site += 1;
        self.steps += 1;
    }

    /// One site: y_0 from the first uniform, x_0 from the second.
    pub fn step(&mut self) -> StepRecord {
        let u1: f64 = self.rng.gen();
        let u2: f64 = self.rng.gen();
        let y0: Spin = if u1 < 0.5 { 1 } else { -1 };
        let (k0, capped, s_size, majority, upsilon) = self.prepare(y0);
        // Orienting the draw on the boundary makes opposite-boundary runs
        // with shared uniforms exact mirror images.
        let o = self.boundary.sign();
        let p_o = 0.5 + upsilon * (majority * o) as f64;
        let x0 = if u2 < p_o { o } else { -o };
        let rec = StepRecord { t: self.steps, x: x0, y: y0, k0, capped, upsilon, s_size, majority };
        self.commit(k0, x0, y0);
        rec
    }

    /// Step with a prescribed outcome; used to replay trajectories.
    pub fn step_forced(&mut self, x0: Spin, y0: Spin) -> StepRecord {
        let (k0, capped, s_size, majority, upsilon) = self.prepare(y0);
        let rec = StepRecord { t: self.steps, x: x0, y: y0, k0, capped, upsilon, s_size, majority };
        self.commit(k0, x0, y0);
        rec
    }
}

/// Running summaries of a simulation.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StreamStats {
    pub steps: u64,
    pub y_plus: u64,
    pub x_plus: u64,
    /// k0_hist[i] counts k0 = K - 1 + i; the last entry is the cap.
    pub k0_hist: Vec<u64>,
    pub capped: u64,
    pub biased_steps: u64,
    pub mean_upsilon: f64,
}

impl StreamStats {
    fn new(scales: &ScaleTable) -> Self {
        StreamStats { k0_hist: vec![0; scales.k_max + 2 - scales.base_scale], ..Default::default() }
    }

    fn add(&mut self, scales: &ScaleTable, r: &StepRecord) {
        self.steps += 1;
        self.y_plus += (r.y == 1) as u64;
        self.x_plus += (r.x == 1) as u64;
        self.k0_hist[r.k0 + 1 - scales.base_scale] += 1;
        self.capped += r.capped as u64;
        if r.upsilon > 0.0 && r.majority != 0 {
            self.biased_steps += 1;
        }
        self.mean_upsilon += (r.upsilon - self.mean_upsilon) / self.steps as f64;
    }

    /// P(k0 >= k) for every k in [K - 1, k_max].
    pub fn k0_tail(&self) -> Vec<f64> {
        let total = self.steps.max(1) as f64;
        let mut acc = 0u64;
        let mut out: Vec<f64> = self
            .k0_hist
            .iter()
            .rev()
            .map(|&c| {
                acc += c;
                acc as f64 / total
            })
            .collect();
        out.reverse();
        out
    }
}

pub trait StepSink {
    fn record(&mut self, r: &StepRecord) -> Result<()>;
}

/// CSV rows `t,x,y,k0,upsilon,s_size`.
pub struct CsvSink<W: Write> {
    out: W,
    header: bool,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W) -> Self {
        CsvSink { out, header: false }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> StepSink for CsvSink<W> {
    fn record(&mut self, r: &StepRecord) -> Result<()> {
        if !self.header {
            writeln!(self.out, "t,x,y,k0,upsilon,s_size")?;
            self.header = true;
        }
        writeln!(self.out, "{},{},{},{},{:.17e},{}", r.t, r.x, r.y, r.k0, r.upsilon, r.s_size)?;
        Ok(())
    }
}

impl<F: FnMut(&StepRecord)> StepSink for F {
    fn record(&mut self, r: &StepRecord) -> Result<()> {
        self(r);
        Ok(())
    }
}

/// A simulated path; site i is the i-th generated symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub x: Vec<Spin>,
    pub y: Vec<Spin>,
    pub config_hash: [u8; 32],
    pub seed: u64,
    pub replicate: u64,
    pub boundary: Boundary,
}

const MAGIC: &[u8; 4] = b"GCTR";
const VERSION: u16 = 1;

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Header, then (x byte, y byte) pairs covering eight sites each.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.len() / 4 + 2);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.config_hash);
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.replicate.to_le_bytes());
        out.push(match self.boundary {
            Boundary::Plus => 0,
            Boundary::Minus => 1,
        });
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        let xb = pack_bits(&self.x);
        let yb = pack_bits(&self.y);
        for (a, b) in xb.iter().zip(&yb) {
            out.push(*a);
            out.push(*b);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("trajectory: {m}"));
        let head = 4 + 2 + 32 + 8 + 8 + 1 + 8;
        if bytes.len() < head || &bytes[..4] != MAGIC {
            return Err(bad("missing header"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let mut config_hash = [0u8; 32];
        config_hash.copy_from_slice(&bytes[6..38]);
        let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        let seed = word(38);
        let replicate = word(46);
        let boundary = match bytes[54] {
            0 => Boundary::Plus,
            1 => Boundary::Minus,
            b => return Err(bad(&format!("boundary byte {b}"))),
        };
        let steps = word(55) as usize;
        let body = &bytes[head..];
        if body.len() != 2 * steps.div_ceil(8) {
            return Err(bad("body length does not match step count"));
        }
        let xb: Vec<u8> = body.iter().step_by(2).copied().collect();
        let yb: Vec<u8> = body.iter().skip(1).step_by(2).copied().collect();
        let mut x = unpack_bits(&xb);
        let mut y = unpack_bits(&yb);
        x.truncate(steps);
        y.truncate(steps);
        Ok(Trajectory { x, y, config_hash, seed, replicate, boundary })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// The y-row as a [`YRow`] whose site 0 is the first generated symbol.
    pub fn y_row(&self) -> &[Spin] {
        &self.y
    }
}

impl YRow for Trajectory {
    fn len(&self) -> usize {
        self.y.len()
    }
    fn y(&self, t: usize) -> Spin {
        self.y[t]
    }
}

impl crate::window::History for Trajectory {
    fn x(&self, t: usize) -> Spin {
        self.x[t]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub replicate: u64,
    pub cap_rule: CapRule,
}

/// Runs `steps` sites, feeding every record to `sink`.
pub fn run(
    config: &SpecConfig,
    scales: &ScaleTable,
    boundary: Boundary,
    seed: u64,
    steps: u64,
    opts: RunOptions,
    mut sink: Option<&mut dyn StepSink>,
) -> Result<(Trajectory, StreamStats)> {
    if steps == 0 {
        return Err(Error::InvalidConfig("steps must be at least 1".into()));
    }
    let mut state = ChainState::with_options(scales, boundary, seed, opts.replicate, opts.cap_rule);
    let mut stats = StreamStats::new(scales);
    let mut x = Vec::with_capacity(steps as usize);
    let mut y = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        let r = state.step();
        stats.add(scales, &r);
        if let Some(s) = sink.as_deref_mut() {
            s.record(&r)?;
        }
        x.push(r.x);
        y.push(r.y);
    }
    let traj =
        Trajectory { x, y, config_hash: config_hash(config), seed, replicate: opts.replicate, boundary };
    Ok((traj, stats))
}
