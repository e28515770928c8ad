//! Unit types: a log10-scaled SI dimension vector paired with a frame of
//! reference, plus the subtype relation and the arithmetic operators.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::OnceLock;

use num_rational::Ratio;
use num_traits::{One, Zero};
use thiserror::Error;

/// Exact rational used for log10 scale factors.
pub type Scalar = Ratio<i128>;

/// Number of SI base axes tracked by a [`UnitType`].
pub const BASE_COUNT: usize = 7;

/// Symbols of the base axes, in exponent-vector order.
pub const BASE_SYMBOLS: [&str; BASE_COUNT] = ["m", "s", "mol", "A", "K", "cd", "g"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: UnitType, right: UnitType },
    #[error("frame mismatch: {left} vs {right}")]
    FrameMismatch { left: UnitType, right: UnitType },
    #[error("frame complement is empty")]
    EmptyComplement,
    #[error("empty frame set")]
    EmptyFrameSet,
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
}

/// Frame of reference attached to a measurement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameSpec {
    Any,
    Concrete(String),
    OneOf(BTreeSet<String>),
}

impl FrameSpec {
    pub fn concrete(name: impl Into<String>) -> Self {
        FrameSpec::Concrete(name.into())
    }

    /// Builds a frame from a set of identifiers, collapsing singletons to
    /// `Concrete`.
    pub fn from_set<I, S>(ids: I) -> Result<Self, UnitError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = ids.into_iter().map(Into::into).collect();
        match set.len() {
            0 => Err(UnitError::EmptyFrameSet),
            1 => Ok(FrameSpec::Concrete(set.into_iter().next().unwrap())),
            _ => Ok(FrameSpec::OneOf(set)),
        }
    }

    /// Identifier set, or `None` for `Any`.
    pub fn ids(&self) -> Option<BTreeSet<String>> {
        match self {
            FrameSpec::Any => None,
            FrameSpec::Concrete(c) => Some(std::iter::once(c.clone()).collect()),
            FrameSpec::OneOf(s) => Some(s.clone()),
        }
    }

    pub fn is_any(&self) -> bool {
        matches!(self, FrameSpec::Any)
    }

    /// Lattice order: `self ⊑ other`.
    pub fn is_sub_of(&self, other: &FrameSpec) -> bool {
        match (self.ids(), other.ids()) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => a.is_subset(&b),
        }
    }

    fn normalized(self) -> Self {
        match self {
            FrameSpec::OneOf(s) if s.len() == 1 => {
                FrameSpec::Concrete(s.into_iter().next().unwrap())
            }
            other => other,
        }
    }
}

impl fmt::Display for FrameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameSpec::Any => f.write_str("Any"),
            FrameSpec::Concrete(c) => f.write_str(c),
            FrameSpec::OneOf(s) => {
                f.write_str("{")?;
                for (i, id) in s.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(id)?;
                }
                f.write_str("}")
            }
        }
    }
}

/// Parses the textual frame form produced by `Display`.
pub fn parse_frame(text: &str) -> Result<FrameSpec, UnitError> {
    let t = text.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("any") {
        return Ok(FrameSpec::Any);
    }
    if let Some(inner) = t.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
        return FrameSpec::from_set(
            inner
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from),
        );
    }
    Ok(FrameSpec::Concrete(t.to_string()))
}

/// Meet in the frame lattice (`Any` is top).
pub fn frame_meet(f1: &FrameSpec, f2: &FrameSpec) -> Result<FrameSpec, UnitError> {
    match (f1.ids(), f2.ids()) {
        (None, _) => Ok(f2.clone()),
        (_, None) => Ok(f1.clone()),
        (Some(a), Some(b)) => {
            let inter: BTreeSet<String> = a.intersection(&b).cloned().collect();
            FrameSpec::from_set(inter).map_err(|_| UnitError::FrameMismatch {
                left: UnitType::dimensionless().with_frame(f1.clone()),
                right: UnitType::dimensionless().with_frame(f2.clone()),
            })
        }
    }
}

/// Join in the frame lattice.
pub fn frame_join(f1: &FrameSpec, f2: &FrameSpec) -> FrameSpec {
    match (f1.ids(), f2.ids()) {
        (Some(a), Some(b)) => FrameSpec::OneOf(a.union(&b).cloned().collect()).normalized(),
        _ => FrameSpec::Any,
    }
}

/// `universe \ f`.
pub fn frame_complement(
    f: &FrameSpec,
    universe: &BTreeSet<String>,
) -> Result<FrameSpec, UnitError> {
    let ids = f.ids().ok_or(UnitError::EmptyComplement)?;
    let rest: Vec<String> = universe.difference(&ids).cloned().collect();
    FrameSpec::from_set(rest).map_err(|_| UnitError::EmptyComplement)
}

/// Scale and exponent part of a unit type, without the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dimension {
    pub scalar_log10: Scalar,
    pub exponents: [i32; BASE_COUNT],
}

impl Dimension {
    pub fn identity() -> Self {
        Dimension {
            scalar_log10: Scalar::zero(),
            exponents: [0; BASE_COUNT],
        }
    }

    pub fn mul(&self, other: &Dimension) -> Dimension {
        let mut exponents = self.exponents;
        for (e, o) in exponents.iter_mut().zip(other.exponents) {
            *e += o;
        }
        Dimension {
            scalar_log10: self.scalar_log10 + other.scalar_log10,
            exponents,
        }
    }

    pub fn div(&self, other: &Dimension) -> Dimension {
        let mut exponents = self.exponents;
        for (e, o) in exponents.iter_mut().zip(other.exponents) {
            *e -= o;
        }
        Dimension {
            scalar_log10: self.scalar_log10 - other.scalar_log10,
            exponents,
        }
    }

    pub fn with_frame(self, frame: FrameSpec) -> UnitType {
        UnitType {
            scalar_log10: self.scalar_log10,
            exponents: self.exponents,
            frame: frame.normalized(),
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_unit(&self.with_frame(FrameSpec::Any)))
    }
}

/// A unit type `(s * Π b_i^j, frame)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct UnitType {
    pub scalar_log10: Scalar,
    pub exponents: [i32; BASE_COUNT],
    pub frame: FrameSpec,
}

impl Hash for UnitType {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.scalar_log10.hash(state);
        self.exponents.hash(state);
        self.frame.hash(state);
    }
}

impl UnitType {
    pub fn new(scalar_log10: Scalar, exponents: [i32; BASE_COUNT], frame: FrameSpec) -> Self {
        UnitType {
            scalar_log10,
            exponents,
            frame: frame.normalized(),
        }
    }

    /// The dimensionless identity `(0, ∅, Any)`.
    pub fn dimensionless() -> Self {
        Dimension::identity().with_frame(FrameSpec::Any)
    }

    /// Pure power-of-ten scale `(k, ∅, Any)`.
    pub fn scale(k: i64) -> Self {
        UnitType::new(
            Scalar::from_integer(k as i128),
            [0; BASE_COUNT],
            FrameSpec::Any,
        )
    }

    pub fn dimension(&self) -> Dimension {
        Dimension {
            scalar_log10: self.scalar_log10,
            exponents: self.exponents,
        }
    }

    pub fn with_frame(&self, frame: FrameSpec) -> UnitType {
        UnitType {
            frame: frame.normalized(),
            ..self.clone()
        }
    }

    pub fn with_scalar(&self, scalar_log10: Scalar) -> UnitType {
        UnitType {
            scalar_log10,
            ..self.clone()
        }
    }

    pub fn same_dimension(&self, other: &UnitType) -> bool {
        self.scalar_log10 == other.scalar_log10 && self.exponents == other.exponents
    }

    /// Canonical unit string (frame omitted).
    pub fn unit_string(&self) -> String {
        format_unit(self)
    }
}

impl fmt::Display for UnitType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", format_unit(self), self.frame)
    }
}

/// `u1 ⊑ u2`.
pub fn subtype(u1: &UnitType, u2: &UnitType) -> bool {
    u1.same_dimension(u2) && u1.frame.is_sub_of(&u2.frame)
}

fn frame_error(u1: &UnitType, u2: &UnitType) -> UnitError {
    UnitError::FrameMismatch {
        left: u1.clone(),
        right: u2.clone(),
    }
}

pub fn mul(u1: &UnitType, u2: &UnitType) -> Result<UnitType, UnitError> {
    let frame = frame_meet(&u1.frame, &u2.frame).map_err(|_| frame_error(u1, u2))?;
    Ok(u1.dimension().mul(&u2.dimension()).with_frame(frame))
}

pub fn div(u1: &UnitType, u2: &UnitType) -> Result<UnitType, UnitError> {
    let frame = frame_meet(&u1.frame, &u2.frame).map_err(|_| frame_error(u1, u2))?;
    Ok(u1.dimension().div(&u2.dimension()).with_frame(frame))
}

pub fn add(u1: &UnitType, u2: &UnitType) -> Result<UnitType, UnitError> {
    if subtype(u1, u2) {
        Ok(u2.clone())
    } else if subtype(u2, u1) {
        Ok(u1.clone())
    } else if !u1.same_dimension(u2) {
        Err(UnitError::DimensionMismatch {
            left: u1.clone(),
            right: u2.clone(),
        })
    } else {
        Err(frame_error(u1, u2))
    }
}

pub fn sub(u1: &UnitType, u2: &UnitType) -> Result<UnitType, UnitError> {
    add(u1, u2)
}

/// Parses a decimal literal such as `-1.25` into an exact rational.
pub fn decimal(text: &str) -> Option<Scalar> {
    let t = text.trim();
    let (neg, digits) = match t.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let mut num: i128 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        num = num.checked_mul(10)?.checked_add(c.to_digit(10)? as i128)?;
    }
    let den = 10i128.checked_pow(frac_part.len() as u32)?;
    let r = Scalar::new(num, den);
    Some(if neg { -r } else { r })
}

fn pinned(text: &str) -> Scalar {
    decimal(text).expect("vocabulary constant")
}

/// log10 constants for non-decimal atoms, 20 significant digits.
pub const LOG10_3600: &str = "3.5563025007672872650";
pub const LOG10_60: &str = "1.7781512503836436325";
pub const LOG10_DEG: &str = "-1.7581226324091722155";
pub const LOG10_YARD: &str = "-0.038863782612774675522";
pub const LOG10_FOOT: &str = "-0.51598503733243711282";
pub const LOG10_INCH: &str = "-1.5951662833800619405";
pub const LOG10_MILE: &str = "3.2066488852013751461";

const LEN: [i32; BASE_COUNT] = [1, 0, 0, 0, 0, 0, 0];
const TIME: [i32; BASE_COUNT] = [0, 1, 0, 0, 0, 0, 0];
const MASS: [i32; BASE_COUNT] = [0, 0, 0, 0, 0, 0, 1];
const NONE: [i32; BASE_COUNT] = [0; BASE_COUNT];

/// One vocabulary atom.
#[derive(Debug, Clone)]
pub struct Atom {
    pub symbol: &'static str,
    pub dimension: Dimension,
}

/// The built-in unit vocabulary, in formatting-preference order.
pub fn vocabulary() -> &'static [Atom] {
    static VOCAB: OnceLock<Vec<Atom>> = OnceLock::new();
    VOCAB.get_or_init(|| {
        let int = |k: i128| Scalar::from_integer(k);
        let entries: Vec<(&'static str, Scalar, [i32; BASE_COUNT])> = vec![
            ("1", int(0), NONE),
            ("m", int(0), LEN),
            ("cm", int(-2), LEN),
            ("mm", int(-3), LEN),
            ("km", int(3), LEN),
            ("s", int(0), TIME),
            ("ms", int(-3), TIME),
            ("us", int(-6), TIME),
            ("min", pinned(LOG10_60), TIME),
            ("h", pinned(LOG10_3600), TIME),
            ("g", int(0), MASS),
            ("kg", int(3), MASS),
            ("deg", pinned(LOG10_DEG), NONE),
            ("yd", pinned(LOG10_YARD), LEN),
            ("ft", pinned(LOG10_FOOT), LEN),
            ("in", pinned(LOG10_INCH), LEN),
            ("mi", pinned(LOG10_MILE), LEN),
            ("rad", int(0), NONE),
            ("mol", int(0), [0, 0, 1, 0, 0, 0, 0]),
            ("A", int(0), [0, 0, 0, 1, 0, 0, 0]),
            ("K", int(0), [0, 0, 0, 0, 1, 0, 0]),
            ("cd", int(0), [0, 0, 0, 0, 0, 1, 0]),
        ];
        entries
            .into_iter()
            .map(|(symbol, scalar_log10, exponents)| Atom {
                symbol,
                dimension: Dimension {
                    scalar_log10,
                    exponents,
                },
            })
            .collect()
    })
}

fn atom(symbol: &str) -> Option<Dimension> {
    vocabulary()
        .iter()
        .find(|a| a.symbol == symbol)
        .map(|a| a.dimension)
}

fn parse_rational(text: &str) -> Option<Scalar> {
    let t = text.trim();
    let t = t
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .unwrap_or(t);
    match t.split_once('/') {
        Some((p, q)) => {
            let p: i128 = p.trim().parse().ok()?;
            let q: i128 = q.trim().parse().ok()?;
            if q == 0 {
                return None;
            }
            Some(Scalar::new(p, q))
        }
        None => t
            .parse::<i128>()
            .ok()
            .map(Scalar::from_integer)
            .or_else(|| decimal(t)),
    }
}

fn parse_factor(text: &str) -> Result<Dimension, UnitError> {
    let unknown = || UnitError::UnknownUnit(text.to_string());
    if let Some(exp) = text.strip_prefix("10^") {
        let s = parse_rational(exp).ok_or_else(unknown)?;
        return Ok(Dimension {
            scalar_log10: s,
            exponents: NONE,
        });
    }
    let (base, power) = match text.split_once('^') {
        Some((b, p)) => (b, p.trim().parse::<i32>().map_err(|_| unknown())?),
        None => (text, 1),
    };
    let d = atom(base.trim()).ok_or_else(unknown)?;
    let mut out = Dimension::identity();
    for _ in 0..power.unsigned_abs() {
        out = if power >= 0 { out.mul(&d) } else { out.div(&d) };
    }
    Ok(out)
}

/// Parses a unit string such as `m/s`, `cm`, `kg*m/s/s` or the generic form
/// emitted by [`format_unit`]. The result has frame `Any`.
pub fn parse_unit_string(text: &str) -> Result<UnitType, UnitError> {
    let t = text.trim();
    if t.is_empty() {
        return Err(UnitError::UnknownUnit(String::new()));
    }
    let mut acc = Dimension::identity();
    let mut pending_div = false;
    let mut token = String::new();
    let mut depth = 0;
    let flush = |tok: &mut String, div: &mut bool, acc: &mut Dimension| -> Result<(), UnitError> {
        if tok.trim().is_empty() {
            return Ok(());
        }
        let d = parse_factor(tok.trim())?;
        *acc = if *div { acc.div(&d) } else { acc.mul(&d) };
        *div = false;
        tok.clear();
        Ok(())
    };
    for c in t.chars() {
        match c {
            '(' => {
                depth += 1;
                token.push(c);
            }
            ')' => {
                depth -= 1;
                token.push(c);
            }
            _ if depth > 0 => token.push(c),
            '*' => flush(&mut token, &mut pending_div, &mut acc)?,
            '/' => {
                flush(&mut token, &mut pending_div, &mut acc)?;
                pending_div = true;
            }
            c if c.is_whitespace() => flush(&mut token, &mut pending_div, &mut acc)?,
            _ => token.push(c),
        }
    }
    if pending_div && token.trim().is_empty() {
        return Err(UnitError::UnknownUnit(t.to_string()));
    }
    flush(&mut token, &mut pending_div, &mut acc)?;
    Ok(acc.with_frame(FrameSpec::Any))
}

fn format_scalar(s: &Scalar) -> String {
    if s.is_integer() {
        s.to_integer().to_string()
    } else {
        format!("({}/{})", s.numer(), s.denom())
    }
}

/// Formats a rational as `p/q` (always with a denominator).
pub fn ratio_string(s: &Scalar) -> String {
    format!("{}/{}", s.numer(), s.denom())
}

/// Parses `p/q` or an integer.
pub fn parse_ratio(text: &str) -> Option<Scalar> {
    parse_rational(text)
}

/// Named forms in preference order: atoms, then two-atom quotients, then
/// two-atom products. The first form found for a dimension wins.
fn named_forms() -> &'static HashMap<Dimension, String> {
    static FORMS: OnceLock<HashMap<Dimension, String>> = OnceLock::new();
    FORMS.get_or_init(|| {
        let vocab = vocabulary();
        let mut forms = HashMap::new();
        for a in vocab {
            forms
                .entry(a.dimension)
                .or_insert_with(|| a.symbol.to_string());
        }
        let named = || {
            vocab
                .iter()
                .filter(|a| a.symbol != "1" && a.symbol != "rad")
        };
        for a in vocab.iter().filter(|a| a.symbol != "1") {
            for b in named() {
                forms
                    .entry(a.dimension.div(&b.dimension))
                    .or_insert_with(|| format!("{}/{}", a.symbol, b.symbol));
            }
        }
        for a in named() {
            for b in named() {
                forms
                    .entry(a.dimension.mul(&b.dimension))
                    .or_insert_with(|| format!("{}*{}", a.symbol, b.symbol));
            }
        }
        forms
    })
}

/// Canonical unit string: a vocabulary atom when one matches exactly, then a
/// two-atom quotient or product, else the generic `10^s * m^a s^b` form.
pub fn format_unit(u: &UnitType) -> String {
    let d = u.dimension();
    if let Some(name) = named_forms().get(&d) {
        return name.clone();
    }
    let mut parts = Vec::new();
    if !d.scalar_log10.is_zero() {
        parts.push(format!("10^{}", format_scalar(&d.scalar_log10)));
    }
    let axes: Vec<String> = d
        .exponents
        .iter()
        .zip(BASE_SYMBOLS)
        .filter(|(e, _)| **e != 0)
        .map(|(e, b)| format!("{b}^{e}"))
        .collect();
    if !axes.is_empty() {
        parts.push(axes.join(" "));
    }
    parts.join(" * ")
}

/// True when `s` is an integer.
pub fn is_integral(s: &Scalar) -> bool {
    s.is_integer()
}

/// `|s|` as f64, for reporting only.
pub fn scalar_to_f64(s: &Scalar) -> f64 {
    (*s.numer() as f64) / (*s.denom() as f64)
}

/// Exact `10^k` test on a decimal literal; returns `k`.
pub fn power_of_ten(text: &str) -> Option<i64> {
    let t = text.trim().trim_end_matches(['f', 'F']);
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i64>().ok()?),
        None => (t, 0),
    };
    let v = decimal(mantissa)?;
    if v <= Scalar::zero() {
        return None;
    }
    let mut k = exp;
    let mut r = v;
    let ten = Scalar::from_integer(10);
    while r >= ten {
        r /= ten;
        k += 1;
    }
    while r < Scalar::one() {
        r *= ten;
        k -= 1;
    }
    (r == Scalar::one()).then_some(k)
}
