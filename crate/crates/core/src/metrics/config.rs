//! Compression configurations and their textual forms.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::Rational;

/// Baseline precision every compression rate is measured against.
pub const BASELINE_BITS: i64 = 16;

/// Decimal sparsities within this many percentage points of a small-denominator
/// fraction snap onto it (`33.333%` becomes exactly one third).
pub const SNAP_TOLERANCE_PCT: f64 = 5e-4;
const SNAP_MAX_DENOMINATOR: i64 = 12;

/// N:M semi-structured pattern: `n_pruned` weights removed out of every `m_group`
/// consecutive weights (so 2:8 is 25% sparsity).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NMPattern {
    pub n_pruned: usize,
    pub m_group: usize,
}

impl NMPattern {
    pub fn new(n_pruned: usize, m_group: usize) -> Result<Self, MetricsError> {
        if m_group == 0 || n_pruned > m_group {
            return Err(MetricsError::InvalidPattern(format!(
                "{n_pruned}:{m_group}"
            )));
        }
        Ok(Self { n_pruned, m_group })
    }

    pub fn sparsity(&self) -> Rational {
        Rational::new(self.n_pruned as i64, self.m_group as i64)
    }
}

impl fmt::Display for NMPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.n_pruned, self.m_group)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SparsityPattern {
    None,
    Unstructured,
    Nm(NMPattern),
}

impl fmt::Display for SparsityPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SparsityPattern::None => f.write_str("none"),
            SparsityPattern::Unstructured => f.write_str("unstructured"),
            SparsityPattern::Nm(p) => p.fmt(f),
        }
    }
}

impl FromStr for SparsityPattern {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "" => Ok(SparsityPattern::None),
            "unstructured" => Ok(SparsityPattern::Unstructured),
            other => {
                let (n, m) = other
                    .split_once(':')
                    .ok_or_else(|| MetricsError::InvalidPattern(s.to_string()))?;
                let parse = |v: &str| {
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| MetricsError::InvalidPattern(s.to_string()))
                };
                Ok(SparsityPattern::Nm(NMPattern::new(parse(n)?, parse(m)?)?))
            }
        }
    }
}

impl TryFrom<String> for SparsityPattern {
    type Error = MetricsError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SparsityPattern> for String {
    fn from(p: SparsityPattern) -> Self {
        p.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigKind {
    Baseline,
    PruningOnly,
    QuantizationOnly,
    Joint,
}

/// A `(sparsity, bits, pattern)` triple. Sparsity and bits are exact rationals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompressionConfig {
    sparsity: Rational,
    bits: Rational,
    pattern: SparsityPattern,
}

impl CompressionConfig {
    pub fn new(
        sparsity: Rational,
        bits: Rational,
        pattern: SparsityPattern,
    ) -> Result<Self, MetricsError> {
        if sparsity.is_negative() || sparsity > Rational::one() {
            return Err(MetricsError::SparsityOutOfRange(sparsity.to_string()));
        }
        if !bits.is_positive() || bits > Rational::from_integer(BASELINE_BITS) {
            return Err(MetricsError::BitsOutOfRange(bits.to_string()));
        }
        match pattern {
            SparsityPattern::None if !sparsity.is_zero() => {
                return Err(MetricsError::PatternMismatch(
                    "non-zero sparsity needs a pattern".into(),
                ))
            }
            SparsityPattern::Unstructured | SparsityPattern::Nm(_) if sparsity.is_zero() => {
                return Err(MetricsError::PatternMismatch(
                    "zero sparsity must use pattern none".into(),
                ))
            }
            SparsityPattern::Nm(p) if p.sparsity() != sparsity => {
                return Err(MetricsError::PatternMismatch(format!(
                    "pattern {p} implies sparsity {}, got {sparsity}",
                    p.sparsity()
                )))
            }
            _ => {}
        }
        Ok(Self {
            sparsity,
            bits,
            pattern,
        })
    }

    pub fn baseline() -> Self {
        Self {
            sparsity: Rational::zero(),
            bits: Rational::from_integer(BASELINE_BITS),
            pattern: SparsityPattern::None,
        }
    }

    pub fn pruning(sparsity: Rational) -> Result<Self, MetricsError> {
        Self::with_sparsity(sparsity, Rational::from_integer(BASELINE_BITS))
    }

    pub fn quantization(bits: Rational) -> Result<Self, MetricsError> {
        Self::new(Rational::zero(), bits, SparsityPattern::None)
    }

    pub fn joint(sparsity: Rational, bits: Rational) -> Result<Self, MetricsError> {
        Self::with_sparsity(sparsity, bits)
    }

    pub fn nm(n_pruned: usize, m_group: usize, bits: Rational) -> Result<Self, MetricsError> {
        let p = NMPattern::new(n_pruned, m_group)?;
        Self::new(p.sparsity(), bits, SparsityPattern::Nm(p))
    }

    /// Unstructured when sparsity is non-zero, `none` otherwise.
    pub fn with_sparsity(sparsity: Rational, bits: Rational) -> Result<Self, MetricsError> {
        let pattern = if sparsity.is_zero() {
            SparsityPattern::None
        } else {
            SparsityPattern::Unstructured
        };
        Self::new(sparsity, bits, pattern)
    }

    pub fn sparsity(&self) -> Rational {
        self.sparsity
    }

    pub fn bits(&self) -> Rational {
        self.bits
    }

    pub fn pattern(&self) -> SparsityPattern {
        self.pattern
    }

    pub fn is_quantized(&self) -> bool {
        self.bits < Rational::from_integer(BASELINE_BITS)
    }

    pub fn is_pruned(&self) -> bool {
        !self.sparsity.is_zero()
    }

    pub fn kind(&self) -> ConfigKind {
        match (self.is_pruned(), self.is_quantized()) {
            (false, false) => ConfigKind::Baseline,
            (true, false) => ConfigKind::PruningOnly,
            (false, true) => ConfigKind::QuantizationOnly,
            (true, true) => ConfigKind::Joint,
        }
    }

    pub fn sparsity_f64(&self) -> f64 {
        self.sparsity.to_f64().unwrap_or(f64::NAN)
    }

    pub fn bits_f64(&self) -> f64 {
        self.bits.to_f64().unwrap_or(f64::NAN)
    }

    /// Integer bit-width, when the configured width is whole.
    pub fn integer_bits(&self) -> Option<u32> {
        self.bits
            .is_integer()
            .then(|| self.bits.to_integer())
            .and_then(|b| u32::try_from(b).ok())
    }

    /// Short human label: `baseline`, `25%`, `2:8`, `3bit`, `25%+4bit`, `2:8+4bit`.
    pub fn label(&self) -> String {
        let prune = match self.pattern {
            SparsityPattern::None => None,
            SparsityPattern::Unstructured => Some(format!("{}%", format_percent(self.sparsity, 3))),
            SparsityPattern::Nm(p) => Some(p.to_string()),
        };
        let quant = self
            .is_quantized()
            .then(|| format!("{}bit", format_rational_decimal(self.bits)));
        match (prune, quant) {
            (None, None) => "baseline".into(),
            (Some(p), None) => p,
            (None, Some(q)) => q,
            (Some(p), Some(q)) => format!("{p}+{q}"),
        }
    }
}

impl fmt::Display for CompressionConfig {
    /// Canonical file grammar: `s=<rational>%;q=<bits>b;pat=<pattern>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "s={}%;q={}b;pat={}",
            self.sparsity, self.bits, self.pattern
        )
    }
}

impl FromStr for CompressionConfig {
    type Err = MetricsError;

    /// Accepts the canonical grammar. `pat` may be omitted (inferred from `s`),
    /// and so may `s` or `q` (defaulting to 0 and 16).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut sparsity = Rational::zero();
        let mut bits = Rational::from_integer(BASELINE_BITS);
        let mut pattern = None;
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| MetricsError::Parse(format!("config segment {part:?}")))?;
            match key.trim() {
                "s" => sparsity = parse_config_sparsity(value)?,
                "q" => bits = parse_bits(value.trim().trim_end_matches('b'))?,
                "pat" => pattern = Some(value.parse::<SparsityPattern>()?),
                other => return Err(MetricsError::Parse(format!("unknown config key {other:?}"))),
            }
        }
        match pattern {
            Some(p) => Self::new(sparsity, bits, p),
            None => Self::with_sparsity(sparsity, bits),
        }
    }
}

impl Serialize for CompressionConfig {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("CompressionConfig", 3)?;
        st.serialize_field("sparsity", &self.sparsity.to_string())?;
        st.serialize_field("bits", &self.bits_f64())?;
        st.serialize_field("pattern", &self.pattern.to_string())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for CompressionConfig {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Num {
            Int(i64),
            Float(f64),
            Text(String),
        }
        #[derive(Deserialize)]
        struct Raw {
            sparsity: Num,
            bits: Num,
            pattern: Option<String>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let to_text = |n: Num| match n {
            Num::Int(i) => i.to_string(),
            Num::Float(f) => f.to_string(),
            Num::Text(t) => t,
        };
        let sparsity = parse_sparsity(&to_text(raw.sparsity)).map_err(serde::de::Error::custom)?;
        let bits = parse_bits(&to_text(raw.bits)).map_err(serde::de::Error::custom)?;
        let result = match raw.pattern {
            Some(p) => {
                let p = p.parse().map_err(serde::de::Error::custom)?;
                Self::new(sparsity, bits, p)
            }
            None => Self::with_sparsity(sparsity, bits),
        };
        result.map_err(serde::de::Error::custom)
    }
}

/// Parse an exact decimal like `33.333` or `-0.25` into a rational.
pub fn parse_decimal(text: &str) -> Result<Rational, MetricsError> {
    let t = text.trim();
    let err = || MetricsError::Parse(format!("not a number: {text:?}"));
    let (neg, digits) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty()
        || !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
        || int_part.len() + frac_part.len() > 17
    {
        return Err(err());
    }
    let numer: i64 = format!("{int_part}{frac_part}")
        .parse()
        .map_err(|_| err())?;
    let denom = 10i64.checked_pow(frac_part.len() as u32).ok_or_else(err)?;
    let r = Rational::new(numer, denom);
    Ok(if neg { -r } else { r })
}

/// Parse `a/b` or a decimal.
pub fn parse_rational(text: &str) -> Result<Rational, MetricsError> {
    let t = text.trim();
    match t.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n
                .trim()
                .parse()
                .map_err(|_| MetricsError::Parse(format!("bad numerator in {text:?}")))?;
            let d: i64 = d
                .trim()
                .parse()
                .map_err(|_| MetricsError::Parse(format!("bad denominator in {text:?}")))?;
            if d == 0 {
                return Err(MetricsError::Parse(format!("zero denominator in {text:?}")));
            }
            Ok(Rational::new(n, d))
        }
        None => parse_decimal(t),
    }
}

/// Snap a fraction onto the nearest `k/d` (`d <= 12`) when it lies within
/// [`SNAP_TOLERANCE_PCT`] percentage points but is not already equal to it.
pub fn snap_fraction(value: Rational) -> Rational {
    let tol = SNAP_TOLERANCE_PCT / 100.0;
    for d in 1..=SNAP_MAX_DENOMINATOR {
        let k = (value * Rational::from_integer(d)).round();
        let candidate = k / Rational::from_integer(d);
        let diff = (value - candidate).abs().to_f64().unwrap_or(f64::INFINITY);
        if diff < tol {
            return candidate;
        }
    }
    value
}

/// Sparsity in any of the accepted forms: `1/3`, `0.25`, `33.333%`.
/// Decimals are snapped with [`snap_fraction`].
pub fn parse_sparsity(text: &str) -> Result<Rational, MetricsError> {
    let t = text.trim();
    let value = if let Some(pct) = t.strip_suffix('%') {
        parse_rational(pct)? / Rational::from_integer(100)
    } else {
        parse_rational(t)?
    };
    let value = if t.contains('/') {
        value
    } else {
        snap_fraction(value)
    };
    if value.is_negative() || value > Rational::one() {
        return Err(MetricsError::SparsityOutOfRange(text.to_string()));
    }
    Ok(value)
}

/// Sparsity inside a config string: `a/b` is a fraction even with a trailing `%`
/// (the grammar's decoration), decimals follow [`parse_sparsity`].
fn parse_config_sparsity(text: &str) -> Result<Rational, MetricsError> {
    let t = text.trim();
    if t.contains('/') {
        parse_sparsity(t.trim_end_matches('%'))
    } else {
        parse_sparsity(t)
    }
}

pub fn parse_bits(text: &str) -> Result<Rational, MetricsError> {
    let bits = parse_rational(text.trim())?;
    if !bits.is_positive() || bits > Rational::from_integer(BASELINE_BITS) {
        return Err(MetricsError::BitsOutOfRange(text.to_string()));
    }
    Ok(bits)
}

/// `value * 100` rounded half-away-from-zero to `decimals` places, trailing zeros trimmed.
pub fn format_percent(value: Rational, decimals: u32) -> String {
    format_rational_fixed(value * Rational::from_integer(100), decimals, true)
}

fn format_rational_decimal(value: Rational) -> String {
    format_rational_fixed(value, 4, true)
}

/// Fixed-point rendering of a rational, rounded half away from zero.
pub fn format_rational_fixed(value: Rational, decimals: u32, trim: bool) -> String {
    let scale = 10i64.pow(decimals);
    let scaled = (value * Rational::from_integer(scale)).round().to_integer();
    let neg = scaled < 0;
    let (whole, frac) = scaled.abs().div_rem(&scale);
    let mut out = whole.to_string();
    if decimals > 0 {
        let mut f = format!("{frac:0width$}", width = decimals as usize);
        if trim {
            while f.ends_with('0') {
                f.pop();
            }
        }
        if !f.is_empty() {
            out.push('.');
            out.push_str(&f);
        }
    }
    if neg && scaled != 0 {
        out.insert(0, '-');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn sparsity_forms() {
        assert_eq!(parse_sparsity("1/3").unwrap(), r(1, 3));
        assert_eq!(parse_sparsity("0.25").unwrap(), r(1, 4));
        assert_eq!(parse_sparsity("33.333%").unwrap(), r(1, 3));
        assert_eq!(parse_sparsity("25%").unwrap(), r(1, 4));
        assert_eq!(parse_sparsity("0.33333").unwrap(), r(1, 3));
        // outside the snap window: kept as given
        assert_eq!(parse_sparsity("0.333").unwrap(), r(333, 1000));
        assert_eq!(parse_sparsity("33.3%").unwrap(), r(333, 1000));
        assert!(parse_sparsity("1.5").is_err());
        assert!(parse_sparsity("-0.1").is_err());
        assert!(parse_sparsity("abc").is_err());
    }

    #[test]
    fn config_grammar_round_trips() {
        let c: CompressionConfig = "s=1/3%;q=3b;pat=unstructured".parse().unwrap();
        assert_eq!(c.sparsity(), r(1, 3));
        assert_eq!(c.bits(), r(3, 1));
        assert_eq!(c.to_string(), "s=1/3%;q=3b;pat=unstructured");
        assert_eq!(c.to_string().parse::<CompressionConfig>().unwrap(), c);

        let nm: CompressionConfig = "s=1/4%;q=4b;pat=2:8".parse().unwrap();
        assert_eq!(
            nm.pattern(),
            SparsityPattern::Nm(NMPattern {
                n_pruned: 2,
                m_group: 8
            })
        );
        assert_eq!(nm.label(), "2:8+4bit");

        let short: CompressionConfig = "s=1/4;q=4b".parse().unwrap();
        assert_eq!(short.pattern(), SparsityPattern::Unstructured);
        assert_eq!(short.label(), "25%+4bit");

        let pct: CompressionConfig = "s=33.333%;q=16b".parse().unwrap();
        assert_eq!(pct.sparsity(), r(1, 3));
        assert_eq!(pct.label(), "33.333%");
        assert_eq!(CompressionConfig::baseline().label(), "baseline");
    }

    #[test]
    fn invariants_enforced() {
        assert!(CompressionConfig::new(r(1, 4), r(4, 1), SparsityPattern::None).is_err());
        assert!(CompressionConfig::new(r(0, 1), r(4, 1), SparsityPattern::Unstructured).is_err());
        let p = SparsityPattern::Nm(NMPattern::new(2, 8).unwrap());
        assert!(CompressionConfig::new(r(1, 2), r(4, 1), p).is_err());
        assert!(CompressionConfig::new(r(1, 4), r(4, 1), p).is_ok());
        assert!(CompressionConfig::quantization(r(17, 1)).is_err());
        assert!(CompressionConfig::quantization(r(0, 1)).is_err());
        assert!(NMPattern::new(5, 4).is_err());
    }

    #[test]
    fn serde_uses_rational_strings() {
        let c = CompressionConfig::nm(1, 3, r(3, 1)).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, r#"{"sparsity":"1/3","bits":3.0,"pattern":"1:3"}"#);
        let back: CompressionConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        let loose: CompressionConfig =
            serde_json::from_str(r#"{"sparsity":"0.25","bits":4,"pattern":"unstructured"}"#)
                .unwrap();
        assert_eq!(loose.sparsity(), r(1, 4));
    }

    #[test]
    fn percent_formatting() {
        assert_eq!(format_percent(r(13, 16), 4), "81.25");
        assert_eq!(format_percent(r(1, 3), 4), "33.3333");
        assert_eq!(format_percent(r(0, 1), 4), "0");
        assert_eq!(format_rational_fixed(r(1, 3), 4, false), "0.3333");
        assert_eq!(format_rational_fixed(r(-1, 8), 4, false), "-0.1250");
    }
}
