//! Scale constants of the construction.
//!
//! Everything downstream reads from an immutable [`ScaleTable`]: pattern
//! lengths `ell_k = ceil((1+eps)^k)`, block scales `beta_k = 2^ell_k`,
//! branching ratios `nu_k = beta_k / beta_{k-1}`, and the floored real-power
//! thresholds used by the beginning, opening and good-block rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bias clamp; keeps every coordinate of g at least 0.05.
pub const DEFAULT_CLAMP: f64 = 0.4;

fn default_clamp() -> f64 {
    DEFAULT_CLAMP
}

/// User-facing configuration. Field names are the JSON schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub epsilon: f64,
    /// Base scale K.
    #[serde(rename = "K")]
    pub base_scale: usize,
    /// Largest active scale.
    pub k_max: usize,
    /// History length, in steps, the engine is allowed to look back.
    pub window_depth: u64,
    #[serde(default = "default_clamp")]
    pub upsilon_clamp: f64,
    /// When false the base-scale bias must already sit below the clamp.
    #[serde(default)]
    pub clamp: bool,
}

impl SpecConfig {
    pub fn new(epsilon: f64, base_scale: usize, k_max: usize, window_depth: u64) -> Self {
        SpecConfig {
            epsilon,
            base_scale,
            k_max,
            window_depth,
            upsilon_clamp: DEFAULT_CLAMP,
            clamp: false,
        }
    }

    /// eps = 0.3, K = 7, k_max = 10, window 2^24.
    pub fn preset_a() -> Self {
        SpecConfig::new(0.3, 7, 10, 1 << 24)
    }

    /// eps = 0.25, K = 8, k_max = 12, window 2^23.
    pub fn preset_b() -> Self {
        SpecConfig::new(0.25, 8, 12, 1 << 23)
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "A" | "a" | "preset-A" | "preset-a" => Some(Self::preset_a()),
            "B" | "b" | "preset-B" | "preset-b" => Some(Self::preset_b()),
            _ => None,
        }
    }
}

/// Per-scale constants.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleRow {
    pub k: usize,
    pub ell: u64,
    pub beta: u64,
    pub nu: u64,
    /// floor(nu_k^(1-eps)).
    pub begin_count: u64,
    /// floor(beta_k^(1+eps)).
    pub good_len_bound: u64,
    /// beta_k^(1+eps) is an integer, so the strict length test excludes it.
    pub good_len_exact: bool,
    /// floor(beta_k^(1-eps) 2^-k).
    pub good_open_bound: u64,
    /// beta_k^(-1/2+eps), clamped when clamping is enabled.
    pub upsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleTable {
    pub epsilon: f64,
    pub base_scale: usize,
    pub k_max: usize,
    pub window_depth: u64,
    pub upsilon_clamp: f64,
    /// floor(beta_K^(1-eps)): site count of a base-scale beginning.
    pub begin_len_base: u64,
    rows: Vec<ScaleRow>,
}

impl ScaleTable {
    /// |B| < beta_k^(1+eps).
    pub fn short_enough(&self, k: usize, len: u64) -> bool {
        let r = &self.rows[k - 1];
        if r.good_len_exact {
            len < r.good_len_bound
        } else {
            len <= r.good_len_bound
        }
    }

    /// |C(B)| > beta_k^(1-eps) 2^-k.
    pub fn open_enough(&self, k: usize, size: u64) -> bool {
        size > self.rows[k - 1].good_open_bound
    }

    /// Largest scale held by the table (k_max + 2).
    pub fn top(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, k: usize) -> Result<&ScaleRow> {
        if k == 0 || k > self.rows.len() {
            return Err(Error::ScaleOutOfRange { k, lo: 1, hi: self.rows.len() });
        }
        Ok(&self.rows[k - 1])
    }

    pub fn rows(&self) -> &[ScaleRow] {
        &self.rows
    }

    // Unchecked accessors for the hot paths; callers stay inside [1, top].
    #[inline]
    pub fn ell(&self, k: usize) -> u64 {
        self.rows[k - 1].ell
    }

    #[inline]
    pub fn beta(&self, k: usize) -> u64 {
        self.rows[k - 1].beta
    }

    #[inline]
    pub fn begin_count(&self, k: usize) -> u64 {
        self.rows[k - 1].begin_count
    }

    #[inline]
    pub fn upsilon(&self, k: usize) -> f64 {
        self.rows[k - 1].upsilon
    }

    /// Minimal history length for g-evaluation, beta_{k_max+2}.
    pub fn required_depth(&self) -> u64 {
        self.beta(self.k_max + 2)
    }

    /// Active scales [K, k_max].
    pub fn active(&self) -> std::ops::RangeInclusive<usize> {
        self.base_scale..=self.k_max
    }

    /// The marker word I_k.
    pub fn pattern(&self, k: usize) -> Result<PatternIk> {
        let ell = self.row(k)?.ell as usize;
        let mut bits = vec![1i8; ell];
        bits[ell - 1] = -1;
        Ok(PatternIk { k, bits })
    }

    /// Rows as CSV: k, ell, beta, nu, begin_count, good_len_bound,
    /// good_open_bound, upsilon. `begin_count` is the base-scale site count
    /// at k = K and empty below K.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("k,ell,beta,nu,begin_count,good_len_bound,good_open_bound,upsilon\n");
        for r in &self.rows {
            let begin = if r.k < self.base_scale {
                String::new()
            } else if r.k == self.base_scale {
                self.begin_len_base.to_string()
            } else {
                r.begin_count.to_string()
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.17e}\n",
                r.k, r.ell, r.beta, r.nu, begin, r.good_len_bound, r.good_open_bound, r.upsilon
            ));
        }
        out
    }
}

/// I_k: ell_k - 1 plus signs followed by one minus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternIk {
    pub k: usize,
    pub bits: Vec<i8>,
}

impl PatternIk {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// No proper prefix equals the suffix of the same length.
    pub fn is_non_overlapping(&self) -> bool {
        let n = self.bits.len();
        (1..n).all(|m| self.bits[..m] != self.bits[n - m..])
    }
}

/// floor(base^exponent) evaluated in 256-bit binary floating point.
///
/// Values within 2^-40 of an integer are not nudged: the high-precision value
/// is floored as is, so a result just below an integer rounds down.
pub fn threshold_pow(base: u64, exponent: f64) -> Result<u64> {
    if base == 0 {
        return Err(Error::InvalidConfig("threshold_pow needs base >= 1".into()));
    }
    hp::floor_pow(base, exponent, 0).ok_or(Error::Overflow { k: 0, what: "threshold_pow" })
}

/// base^exponent in 256-bit precision, rounded to binary64.
pub fn real_pow(base: u64, exponent: f64) -> f64 {
    hp::pow_f64(base, exponent)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub rule: &'static str,
    pub scale: Option<usize>,
    pub message: String,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Every violated rule, with the offending scale where there is one.
pub fn validate(config: &SpecConfig) -> ValidationReport {
    let (_, errors) = build_inner(config);
    let violations = errors
        .into_iter()
        .map(|e| {
            let (rule, scale) = match &e {
                Error::DegenerateScales { k, .. } => ("ell-strictly-increasing", Some(*k)),
                Error::Overflow { k, .. } => ("beta-fits-u64", Some(*k)),
                Error::BiasOverflow { k, .. } => ("bias-below-clamp", Some(*k)),
                Error::ScaleOutOfRange { k, .. } => ("scale-range", Some(*k)),
                Error::WindowTooShort { .. } => ("window-depth", None),
                _ => ("config", None),
            };
            Violation { rule, scale, message: e.to_string() }
        })
        .collect();
    ValidationReport { violations }
}

pub fn build_scales(config: &SpecConfig) -> Result<ScaleTable> {
    let (table, mut errors) = build_inner(config);
    if errors.is_empty() {
        Ok(table.expect("table exists when no rule failed"))
    } else {
        Err(errors.swap_remove(0))
    }
}

fn build_inner(c: &SpecConfig) -> (Option<ScaleTable>, Vec<Error>) {
    let mut errors = Vec::new();
    if !(c.epsilon > 0.0 && c.epsilon < 0.5) {
        errors.push(Error::InvalidConfig(format!(
            "epsilon = {} must lie in the open interval (0, 0.5)",
            c.epsilon
        )));
        return (None, errors);
    }
    if c.base_scale < 1 {
        errors.push(Error::InvalidConfig("K must be at least 1".into()));
        return (None, errors);
    }
    if c.k_max < c.base_scale {
        errors.push(Error::InvalidConfig(format!(
            "k_max = {} must be at least K = {}",
            c.k_max, c.base_scale
        )));
        return (None, errors);
    }
    if !(c.upsilon_clamp > 0.0 && c.upsilon_clamp <= DEFAULT_CLAMP) {
        errors.push(Error::InvalidConfig(format!(
            "upsilon_clamp = {} must lie in (0, 0.4]",
            c.upsilon_clamp
        )));
        return (None, errors);
    }

    let top = c.k_max + 2;
    let eps = c.epsilon;
    // ell_0 = 1, so beta_0 = 2.
    let mut ells = vec![1u64];
    for k in 1..=top {
        match hp::ceil_pow(1.0 + eps, k) {
            Some(v) => ells.push(v),
            None => {
                errors.push(Error::Overflow { k, what: "ell" });
                return (None, errors);
            }
        }
    }
    for k in (c.base_scale + 1)..=top {
        if ells[k] <= ells[k - 1] {
            errors.push(Error::DegenerateScales { k, ell: ells[k] });
        }
    }
    if ells[top] > 63 {
        let k = (1..=top).find(|&k| ells[k] > 63).unwrap_or(top);
        errors.push(Error::Overflow { k, what: "beta = 2^ell" });
        return (None, errors);
    }

    let mut rows = Vec::with_capacity(top);
    for k in 1..=top {
        let ell = ells[k];
        let beta = 1u64 << ell;
        let nu = beta >> ells[k - 1].min(ell);
        let begin_count = hp::floor_pow(nu, 1.0 - eps, 0).unwrap_or(u64::MAX);
        let good_len_bound = match hp::floor_pow(beta, 1.0 + eps, 0) {
            Some(v) => v,
            None => {
                if k <= c.k_max {
                    errors.push(Error::Overflow { k, what: "beta^(1+eps)" });
                }
                u64::MAX
            }
        };
        let good_len_exact = hp::is_integral_pow(beta, 1.0 + eps);
        let good_open_bound = hp::floor_pow(beta, 1.0 - eps, k as u32).unwrap_or(u64::MAX);
        let raw = hp::pow_f64(beta, eps - 0.5);
        let upsilon = if c.clamp { raw.min(c.upsilon_clamp) } else { raw };
        rows.push(ScaleRow {
            k,
            ell,
            beta,
            nu,
            begin_count,
            good_len_bound,
            good_len_exact,
            good_open_bound,
            upsilon,
        });
    }

    let base = &rows[c.base_scale - 1];
    let base_bias = hp::pow_f64(base.beta, eps - 0.5);
    if !c.clamp && base_bias > c.upsilon_clamp {
        errors.push(Error::BiasOverflow { k: c.base_scale, bias: base_bias, clamp: c.upsilon_clamp });
    }
    let begin_len_base = hp::floor_pow(base.beta, 1.0 - eps, 0).unwrap_or(u64::MAX);

    let need = rows[top - 1].beta;
    if c.window_depth < need {
        errors.push(Error::WindowTooShort { need, have: c.window_depth });
    }

    let table = ScaleTable {
        epsilon: eps,
        base_scale: c.base_scale,
        k_max: c.k_max,
        window_depth: c.window_depth,
        upsilon_clamp: c.upsilon_clamp,
        begin_len_base,
        rows,
    };
    (Some(table), errors)
}

mod hp {
    //! 256-bit evaluation of the real powers behind every threshold.

    use astro_float::{BigFloat, Consts, Radix, RoundingMode};

    const PREC: usize = 256;
    const RM: RoundingMode = RoundingMode::ToEven;

    fn consts() -> Consts {
        Consts::new().expect("astro-float constant cache")
    }

    /// Decimal scientific string of a non-negative integral value to u64.
    fn integral_to_u64(v: &BigFloat, cc: &mut Consts) -> Option<u64> {
        if v.is_zero() {
            return Some(0);
        }
        let s = v.format(Radix::Dec, RM, cc).ok()?;
        let (mant, exp) = s.split_once('e')?;
        let exp: i64 = exp.parse().ok()?;
        let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
        let digits: String = int_part.chars().chain(frac_part.chars()).collect();
        let digits = digits.trim_start_matches('-');
        // value = digits * 10^(exp - (len(int_part) - 1) - len(frac_part))
        let shift = exp - (int_part.len() as i64 - 1) - frac_part.len() as i64;
        let mut value: u128 = digits.parse().ok()?;
        if shift >= 0 {
            for _ in 0..shift {
                value = value.checked_mul(10)?;
            }
        } else {
            for _ in 0..(-shift) {
                if !value.is_multiple_of(10) {
                    return None;
                }
                value /= 10;
            }
        }
        u64::try_from(value).ok()
    }

    fn power(base: u64, exponent: f64, cc: &mut Consts) -> BigFloat {
        if base == 1 {
            return BigFloat::from_u64(1, PREC);
        }
        let b = BigFloat::from_u64(base, PREC);
        let e = BigFloat::from_f64(exponent, PREC);
        b.pow(&e, PREC, RM, cc)
    }

    /// floor(base^exponent / 2^shift).
    pub fn floor_pow(base: u64, exponent: f64, shift: u32) -> Option<u64> {
        let mut cc = consts();
        let mut v = power(base, exponent, &mut cc);
        if shift > 0 {
            let d = BigFloat::from_u64(1u64 << shift.min(63), PREC);
            v = v.div(&d, PREC, RM);
        }
        integral_to_u64(&v.floor(), &mut cc)
    }

    pub fn is_integral_pow(base: u64, exponent: f64) -> bool {
        let mut cc = consts();
        let v = power(base, exponent, &mut cc);
        v.floor() == v
    }

    /// ceil(x^k) for a real x and integer k.
    pub fn ceil_pow(x: f64, k: usize) -> Option<u64> {
        let mut cc = consts();
        let v = BigFloat::from_f64(x, PREC).powi(k, PREC, RM);
        integral_to_u64(&v.ceil(), &mut cc)
    }

    /// base^exponent correctly rounded to binary64 via its decimal expansion.
    pub fn pow_f64(base: u64, exponent: f64) -> f64 {
        let mut cc = consts();
        let v = power(base, exponent, &mut cc);
        let s = v.format(Radix::Dec, RM, &mut cc).expect("format");
        s.parse().expect("decimal float")
    }

}
