//! The g-function: conditional law of (x_0, y_0) given the past.

use serde::Serialize;

use crate::blockscan::{locate_newest, scan_opening, K0};
use crate::error::{Error, Result};
use crate::params::ScaleTable;
use crate::window::{History, Spin, WithY0, YRow};

/// The majority set S for one appended y_0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SSelection {
    pub positions: Vec<usize>,
    pub k0: K0,
    pub dropped_max: bool,
    /// Start of B_{k0+1,1}; absent when capped.
    pub anchor: Option<usize>,
    pub t_now: usize,
}

impl SSelection {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Drops the largest element of an even-sized sorted set.
pub fn odd_part(mut positions: Vec<usize>) -> (Vec<usize>, bool) {
    if !positions.is_empty() && positions.len().is_multiple_of(2) {
        positions.pop();
        (positions, true)
    } else {
        (positions, false)
    }
}

/// S from ybar, whose newest site is t_now.
#[allow(non_snake_case)]
pub fn select_S<Y: YRow + ?Sized>(ybar: &Y, scales: &ScaleTable) -> Result<SSelection> {
    let need = scales.required_depth();
    if (ybar.len() as u64) <= need {
        return Err(Error::WindowTooShort { need: need + 1, have: ybar.len() as u64 });
    }
    let t_now = ybar.len() - 1;
    let (depth, anchor) = locate_newest(ybar, scales);
    let k0 = K0 { value: depth, capped: depth == scales.k_max };
    let Some(a) = anchor else {
        return Ok(SSelection { positions: Vec::new(), k0, dropped_max: false, anchor: None, t_now });
    };
    let mut opening = Vec::new();
    scan_opening(ybar, scales, depth + 1, a, t_now + 1, |t| opening.push(t));
    debug_assert!(opening.last().is_none_or(|&m| m < t_now));
    let (positions, dropped_max) = odd_part(opening);
    Ok(SSelection { positions, k0, dropped_max, anchor: Some(a), t_now })
}

/// Bias attached to S.
pub fn select_upsilon(sel: &SSelection, scales: &ScaleTable) -> f64 {
    if sel.k0.capped {
        return scales.upsilon(scales.k_max);
    }
    let k0 = sel.k0.value;
    if let Some(&min) = sel.positions.first() {
        let reach = scales.beta(k0 + 2);
        if (min as u64) + reach < sel.t_now as u64 {
            return 0.0;
        }
    }
    if k0 + 1 == scales.base_scale {
        scales.upsilon_clamp
    } else {
        scales.upsilon(k0)
    }
}

pub fn sign(v: i64) -> Spin {
    v.signum() as Spin
}

/// Signed bias q = upsilon * sign(sum of x over S); g_1 = 1/2 + q.
pub fn bias<H: History + ?Sized>(x: &H, positions: &[usize], upsilon: f64) -> Result<f64> {
    let mut sum = 0i64;
    for &t in positions {
        if t >= x.len() {
            return Err(Error::PositionOutOfWindow { t, len: x.len() });
        }
        sum += x.x(t) as i64;
    }
    Ok(upsilon * sign(sum) as f64)
}

pub fn g1<H: History + ?Sized>(x: &H, positions: &[usize], upsilon: f64) -> Result<f64> {
    Ok(0.5 + bias(x, positions, upsilon)?)
}

/// One y_0 branch of an evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Branch {
    pub y0: Spin,
    pub k0: usize,
    pub capped: bool,
    pub s_size: usize,
    pub dropped_max: bool,
    pub upsilon: f64,
    /// sign of the x-sum over S.
    pub majority: Spin,
    /// P(x_0 = +1 | y_0).
    pub g1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GOutput {
    pub p11: f64,
    pub pm11: f64,
    pub p1m1: f64,
    pub pm1m1: f64,
    /// Reported from the y_0 = +1 branch.
    pub k0_used: usize,
    pub s_size: usize,
    pub upsilon_used: f64,
    pub plus: Branch,
    pub minus: Branch,
}

impl GOutput {
    pub fn coords(&self) -> [f64; 4] {
        [self.p11, self.pm11, self.p1m1, self.pm1m1]
    }

    pub fn branch(&self, y0: Spin) -> &Branch {
        if y0 == 1 {
            &self.plus
        } else {
            &self.minus
        }
    }

    /// The four coordinates as a bit pattern, for exact comparisons.
    pub fn bits(&self) -> [u64; 4] {
        self.coords().map(f64::to_bits)
    }
}

fn branch<H: History + ?Sized>(window: &H, scales: &ScaleTable, y0: Spin) -> Result<(Branch, f64)> {
    let ybar = WithY0::new(window, y0);
    let sel = select_S(&ybar, scales)?;
    let upsilon = select_upsilon(&sel, scales);
    let mut sum = 0i64;
    for &t in &sel.positions {
        sum += window.x(t) as i64;
    }
    let majority = sign(sum);
    let q = upsilon * majority as f64;
    let b = Branch {
        y0,
        k0: sel.k0.value,
        capped: sel.k0.capped,
        s_size: sel.len(),
        dropped_max: sel.dropped_max,
        upsilon,
        majority,
        g1: 0.5 + q,
    };
    Ok((b, q))
}

/// g(x, y) over the four symbols. Both y_0 branches are parsed separately.
pub fn evaluate<H: History + ?Sized>(window: &H, scales: &ScaleTable) -> Result<GOutput> {
    let (plus, qp) = branch(window, scales, 1)?;
    let (minus, qm) = branch(window, scales, -1)?;
    // 1 - g_1 is written as 0.5 - q so that x -> -x swaps coordinates exactly.
    Ok(GOutput {
        p11: 0.5 * (0.5 + qp),
        pm11: 0.5 * (0.5 - qp),
        p1m1: 0.5 * (0.5 + qm),
        pm1m1: 0.5 * (0.5 - qm),
        k0_used: plus.k0,
        s_size: plus.s_size,
        upsilon_used: plus.upsilon,
        plus,
        minus,
    })
}
