//! Finite two-row histories and cheap views over them.
//!
//! Positions are absolute indices: 0 is the oldest site of a window and
//! `len() - 1` the newest. The boundary descriptor says what lies before
//! index 0.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spin-valued site, always +1 or -1.
pub type Spin = i8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Plus,
    Minus,
}

impl Boundary {
    pub fn sign(self) -> Spin {
        match self {
            Boundary::Plus => 1,
            Boundary::Minus => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Boundary::Plus => Boundary::Minus,
            Boundary::Minus => Boundary::Plus,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Boundary::Plus => "plus",
            Boundary::Minus => "minus",
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" => Ok(Boundary::Plus),
            "minus" | "-" => Ok(Boundary::Minus),
            other => Err(Error::Parse(format!("unknown boundary {other:?}"))),
        }
    }
}

/// Random access to a y-row.
pub trait YRow {
    fn len(&self) -> usize;
    fn y(&self, t: usize) -> Spin;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Length p of a leading stretch [0, p) known to be all +1. Scanners use
    /// it to jump over wall padding; 0 means nothing is known.
    fn plus_prefix(&self) -> usize {
        0
    }
}

/// Random access to both rows.
pub trait History: YRow {
    fn x(&self, t: usize) -> Spin;
}

impl YRow for [Spin] {
    fn len(&self) -> usize {
        <[Spin]>::len(self)
    }
    fn y(&self, t: usize) -> Spin {
        self[t]
    }
}

impl YRow for Vec<Spin> {
    fn len(&self) -> usize {
        Vec::len(self)
    }
    fn y(&self, t: usize) -> Spin {
        self[t]
    }
}

impl<T: YRow + ?Sized> YRow for &T {
    fn len(&self) -> usize {
        (**self).len()
    }
    fn y(&self, t: usize) -> Spin {
        (**self).y(t)
    }
    fn plus_prefix(&self) -> usize {
        (**self).plus_prefix()
    }
}

impl<T: History + ?Sized> History for &T {
    fn x(&self, t: usize) -> Spin {
        (**self).x(t)
    }
}

fn check_spins(row: &[Spin], name: &str) -> Result<()> {
    match row.iter().position(|&s| s != 1 && s != -1) {
        Some(i) => Err(Error::Parse(format!("{name}[{i}] = {} is not +1/-1", row[i]))),
        None => Ok(()),
    }
}

/// Materialized history with its boundary condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PastWindow {
    x: Vec<Spin>,
    y: Vec<Spin>,
    boundary: Boundary,
}

impl PastWindow {
    pub fn new(x: Vec<Spin>, y: Vec<Spin>, boundary: Boundary) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Parse(format!(
                "x-row has {} sites, y-row has {}",
                x.len(),
                y.len()
            )));
        }
        check_spins(&x, "x")?;
        check_spins(&y, "y")?;
        Ok(PastWindow { x, y, boundary })
    }

    /// Wall fill: x equal to the boundary spin, y all +1.
    pub fn wall(len: usize, boundary: Boundary) -> Self {
        PastWindow { x: vec![boundary.sign(); len], y: vec![1; len], boundary }
    }

    pub fn x_row(&self) -> &[Spin] {
        &self.x
    }

    pub fn y_row(&self) -> &[Spin] {
        &self.y
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// The same window with x negated and the boundary flipped.
    pub fn negated(&self) -> Self {
        PastWindow {
            x: self.x.iter().map(|&s| -s).collect(),
            y: self.y.clone(),
            boundary: self.boundary.flip(),
        }
    }

    pub fn push(&mut self, x: Spin, y: Spin) {
        self.x.push(x);
        self.y.push(y);
    }
}

impl YRow for PastWindow {
    fn len(&self) -> usize {
        self.y.len()
    }
    fn y(&self, t: usize) -> Spin {
        self.y[t]
    }
}

impl History for PastWindow {
    fn x(&self, t: usize) -> Spin {
        self.x[t]
    }
}

/// `inner` preceded by `pad` wall sites (x = boundary spin, y = +1).
#[derive(Clone, Debug)]
pub struct WallPadded<H> {
    inner: H,
    pad: usize,
    boundary: Boundary,
}

impl<H: History> WallPadded<H> {
    pub fn new(inner: H, pad: usize, boundary: Boundary) -> Self {
        WallPadded { inner, pad, boundary }
    }

    /// Pads `inner` up to `len` sites total (no padding if already longer).
    pub fn to_length(inner: H, len: usize, boundary: Boundary) -> Self {
        let pad = len.saturating_sub(inner.len());
        WallPadded { inner, pad, boundary }
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    pub fn inner(&self) -> &H {
        &self.inner
    }
}

impl<H: History> YRow for WallPadded<H> {
    fn len(&self) -> usize {
        self.pad + self.inner.len()
    }
    fn y(&self, t: usize) -> Spin {
        if t < self.pad {
            1
        } else {
            self.inner.y(t - self.pad)
        }
    }
    fn plus_prefix(&self) -> usize {
        if self.inner.plus_prefix() > 0 {
            self.pad + self.inner.plus_prefix()
        } else {
            self.pad
        }
    }
}

impl<H: History> History for WallPadded<H> {
    fn x(&self, t: usize) -> Spin {
        if t < self.pad {
            self.boundary.sign()
        } else {
            self.inner.x(t - self.pad)
        }
    }
}

#[inline]
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A fair random history defined by hashing (seed, position); nothing is
/// materialized, so windows of 2^24 sites cost nothing to create.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticWindow {
    seed: u64,
    len: usize,
}

impl SyntheticWindow {
    pub fn new(seed: u64, len: usize) -> Self {
        SyntheticWindow { seed: splitmix64(seed ^ 0x5eed_0f_5eed), len }
    }

    #[inline]
    fn word(&self, t: usize) -> u64 {
        splitmix64(self.seed ^ ((t as u64 >> 5).wrapping_mul(0xd1b5_4a32_d192_ed03)))
    }
}

impl YRow for SyntheticWindow {
    fn len(&self) -> usize {
        self.len
    }
    #[inline]
    fn y(&self, t: usize) -> Spin {
        if (self.word(t) >> (32 + (t & 31))) & 1 == 1 {
            1
        } else {
            -1
        }
    }
}

impl History for SyntheticWindow {
    #[inline]
    fn x(&self, t: usize) -> Spin {
        if (self.word(t) >> (t & 31)) & 1 == 1 {
            1
        } else {
            -1
        }
    }
}

/// x-negated view.
#[derive(Clone, Copy, Debug)]
pub struct Negated<H>(pub H);

impl<H: History> YRow for Negated<H> {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn y(&self, t: usize) -> Spin {
        self.0.y(t)
    }
    fn plus_prefix(&self) -> usize {
        self.0.plus_prefix()
    }
}

impl<H: History> History for Negated<H> {
    fn x(&self, t: usize) -> Spin {
        -self.0.x(t)
    }
}

/// Sites older than `cutoff` come from `deep`, the rest from `recent`.
/// Both sources must have the same length.
#[derive(Clone, Copy, Debug)]
pub struct Spliced<A, B> {
    recent: A,
    deep: B,
    cutoff: usize,
}

impl<A: History, B: History> Spliced<A, B> {
    pub fn new(recent: A, deep: B, cutoff: usize) -> Self {
        debug_assert_eq!(recent.len(), deep.len());
        Spliced { recent, deep, cutoff }
    }
}

impl<A: History, B: History> YRow for Spliced<A, B> {
    fn len(&self) -> usize {
        self.recent.len()
    }
    fn y(&self, t: usize) -> Spin {
        if t < self.cutoff {
            self.deep.y(t)
        } else {
            self.recent.y(t)
        }
    }
}

impl<A: History, B: History> History for Spliced<A, B> {
    fn x(&self, t: usize) -> Spin {
        if t < self.cutoff {
            self.deep.x(t)
        } else {
            self.recent.x(t)
        }
    }
}

/// Sparse site overrides on top of a base history.
#[derive(Clone, Debug)]
pub struct Patched<H> {
    base: H,
    x: HashMap<usize, Spin>,
    y: HashMap<usize, Spin>,
}

impl<H: History> Patched<H> {
    pub fn new(base: H) -> Self {
        Patched { base, x: HashMap::new(), y: HashMap::new() }
    }

    pub fn flip_x(&mut self, t: usize) {
        let v = -self.x(t);
        self.x.insert(t, v);
    }

    pub fn flip_y(&mut self, t: usize) {
        let v = -self.y(t);
        self.y.insert(t, v);
    }
}

impl<H: History> YRow for Patched<H> {
    fn len(&self) -> usize {
        self.base.len()
    }
    fn y(&self, t: usize) -> Spin {
        self.y.get(&t).copied().unwrap_or_else(|| self.base.y(t))
    }
    fn plus_prefix(&self) -> usize {
        let p = self.base.plus_prefix();
        self.y.keys().fold(p, |p, &t| if t < p { t } else { p })
    }
}

impl<H: History> History for Patched<H> {
    fn x(&self, t: usize) -> Spin {
        self.x.get(&t).copied().unwrap_or_else(|| self.base.x(t))
    }
}

/// The sites of `inner` from `start` on, re-indexed from 0.
#[derive(Clone, Copy, Debug)]
pub struct Tail<H> {
    inner: H,
    start: usize,
}

impl<H: History> Tail<H> {
    pub fn new(inner: H, start: usize) -> Self {
        let start = start.min(inner.len());
        Tail { inner, start }
    }

    /// The newest `len` sites.
    pub fn last(inner: H, len: usize) -> Self {
        let start = inner.len().saturating_sub(len);
        Tail { inner, start }
    }
}

impl<H: History> YRow for Tail<H> {
    fn len(&self) -> usize {
        self.inner.len() - self.start
    }
    fn y(&self, t: usize) -> Spin {
        self.inner.y(self.start + t)
    }
    fn plus_prefix(&self) -> usize {
        self.inner.plus_prefix().saturating_sub(self.start)
    }
}

impl<H: History> History for Tail<H> {
    fn x(&self, t: usize) -> Spin {
        self.inner.x(self.start + t)
    }
}

/// ybar: the history with a candidate y0 appended at index `len()`.
/// The x-row is not extended; reading x at the new site yields 0.
#[derive(Clone, Copy, Debug)]
pub struct WithY0<H> {
    inner: H,
    y0: Spin,
}

impl<H: History> WithY0<H> {
    pub fn new(inner: H, y0: Spin) -> Self {
        WithY0 { inner, y0 }
    }

    pub fn t_now(&self) -> usize {
        self.inner.len()
    }
}

impl<H: History> YRow for WithY0<H> {
    fn len(&self) -> usize {
        self.inner.len() + 1
    }
    fn y(&self, t: usize) -> Spin {
        if t == self.inner.len() {
            self.y0
        } else {
            self.inner.y(t)
        }
    }
    fn plus_prefix(&self) -> usize {
        self.inner.plus_prefix()
    }
}

impl<H: History> History for WithY0<H> {
    fn x(&self, t: usize) -> Spin {
        if t == self.inner.len() {
            0
        } else {
            self.inner.x(t)
        }
    }
}

/// x-row and y-row as +/- text lines; the first line is x, the second y.
pub fn parse_two_row_text(text: &str, boundary: Boundary) -> Result<PastWindow> {
    let mut rows = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let x = parse_pm_text(rows.next().ok_or_else(|| Error::Parse("missing x-row".into()))?)?;
    let y = parse_pm_text(rows.next().ok_or_else(|| Error::Parse("missing y-row".into()))?)?;
    PastWindow::new(x, y, boundary)
}

/// '+' and '-' characters, whitespace ignored.
pub fn parse_pm_text(text: &str) -> Result<Vec<Spin>> {
    text.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '+' => Ok(1),
            '-' => Ok(-1),
            other => Err(Error::Parse(format!("unexpected character {other:?} in +/- sequence"))),
        })
        .collect()
}

/// Packed bits, least significant bit first; a set bit is +1.
pub fn unpack_bits(bytes: &[u8]) -> Vec<Spin> {
    bytes
        .iter()
        .flat_map(|b| (0..8).map(move |i| if (b >> i) & 1 == 1 { 1 } else { -1 }))
        .collect()
}

pub fn pack_bits(spins: &[Spin]) -> Vec<u8> {
    spins
        .chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &s)| acc | (((s > 0) as u8) << i)))
        .collect()
}
