//! Pulse sequences: notation, order classification, exhaustive search and
//! the BB1 composite-pulse experiment.
//!
//! Notation: whitespace-separated intervals, each `I` (idle) or one or more
//! tokens joined by `+`. A token is `[~]AxisDigit` with axis `X`/`Y`, digit
//! `1` (odd sites) or `2` (even sites), and `~` for a negative pulse. A
//! sublattice without a token idles during that interval.

mod bb1;
mod order;
mod scaling;
mod search;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{PulseError, Result};
use crate::pulseshape::PulseShape;
use crate::spinmodel::{AxisPulse, Parity, SublatticePulses};

pub use bb1::{bb1_error, bb1_phase, BB1_PHASE_COS, bb1_schedule, bb1_sweep, Bb1Point, Bb1Pulses};
pub use order::{classify_order, classify_schedule, ClassifyOptions, IntervalCache, OrderReport, MAX_K};
pub use scaling::{geomspace, loglog_slope, scaling_sweep, ScalingPoint};
pub use search::{canonical, search_sequences, token_alphabet, SearchHit, SearchOptions, SearchResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// One π pulse on one sublattice. Ordering (positive before negative, odd
/// before even, X before Y) defines canonical sequence representatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Token {
    pub negative: bool,
    pub parity: Parity,
    pub axis: Axis,
}

impl Token {
    pub fn new(axis: Axis, parity: Parity, negative: bool) -> Self {
        Token { negative, parity, axis }
    }

    pub fn negated(self) -> Token {
        Token { negative: !self.negative, ..self }
    }

    pub fn relabeled(self) -> Token {
        Token { parity: self.parity.flip(), ..self }
    }

    pub fn phase(self) -> f64 {
        match self.axis {
            Axis::X => 0.0,
            Axis::Y => PI / 2.0,
        }
    }

    /// All eight signed single-sublattice tokens.
    pub fn all() -> Vec<Token> {
        let mut v = Vec::new();
        for negative in [false, true] {
            for parity in [Parity::Odd, Parity::Even] {
                for axis in [Axis::X, Axis::Y] {
                    v.push(Token { negative, parity, axis });
                }
            }
        }
        v
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negative {
            f.write_str("~")?;
        }
        let axis = match self.axis {
            Axis::X => 'X',
            Axis::Y => 'Y',
        };
        write!(f, "{}{}", axis, self.parity.digit())
    }
}

/// Tokens applied simultaneously during one interval; empty means idle.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntervalSpec {
    pub tokens: Vec<Token>,
}

impl IntervalSpec {
    pub fn idle() -> Self {
        IntervalSpec { tokens: Vec::new() }
    }

    pub fn single(token: Token) -> Self {
        IntervalSpec { tokens: vec![token] }
    }

    pub fn map(&self, f: impl Fn(Token) -> Token) -> IntervalSpec {
        let mut tokens: Vec<Token> = self.tokens.iter().map(|t| f(*t)).collect();
        tokens.sort_by_key(|t| t.parity);
        IntervalSpec { tokens }
    }
}

impl fmt::Display for IntervalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.tokens.is_empty() {
            return f.write_str("I");
        }
        let parts: Vec<String> = self.tokens.iter().map(|t| t.to_string()).collect();
        f.write_str(&parts.join("+"))
    }
}

/// A shape-free pulse sequence in token notation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sequence {
    pub intervals: Vec<IntervalSpec>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn map(&self, f: impl Fn(Token) -> Token + Copy) -> Sequence {
        Sequence { intervals: self.intervals.iter().map(|i| i.map(f)).collect() }
    }

    /// Parities that receive at least one pulse.
    pub fn pulsed(&self, parity: Parity) -> bool {
        self.intervals.iter().any(|i| i.tokens.iter().any(|t| t.parity == parity))
    }

    /// Binds π tokens to `shape`.
    pub fn bind(&self, shape: &PulseShape) -> PulseSchedule {
        let shape = Arc::new(shape.clone());
        let intervals = self
            .intervals
            .iter()
            .map(|spec| {
                let mut p = SublatticePulses::idle();
                for t in &spec.tokens {
                    let pulse = AxisPulse::new(shape.clone(), t.phase(), if t.negative { -1.0 } else { 1.0 });
                    match t.parity {
                        Parity::Odd => p.odd = Some(pulse),
                        Parity::Even => p.even = Some(pulse),
                    }
                }
                p
            })
            .collect();
        PulseSchedule { intervals }
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.intervals.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

impl std::str::FromStr for Sequence {
    type Err = PulseError;
    fn from_str(s: &str) -> Result<Self> {
        parse_sequence(s)
    }
}

fn parse_token(text: &str, position: usize) -> Result<Token> {
    let err = |message: String| PulseError::Parse { position, message };
    let (negative, body) = match text.strip_prefix('~') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let mut chars = body.chars();
    let axis = match chars.next() {
        Some('X') => Axis::X,
        Some('Y') => Axis::Y,
        _ => return Err(err(format!("unknown token `{text}`"))),
    };
    let parity = match (chars.next(), chars.next()) {
        (Some('1'), None) => Parity::Odd,
        (Some('2'), None) => Parity::Even,
        _ => return Err(err(format!("unknown token `{text}`"))),
    };
    Ok(Token { negative, parity, axis })
}

/// Parses sequence notation, e.g. `"X1 Y2 ~X1 ~Y2"`.
pub fn parse_sequence(text: &str) -> Result<Sequence> {
    let mut intervals = Vec::new();
    let mut offset = 0;
    for group in text.split_whitespace() {
        let start = offset + text[offset..].find(group).expect("group comes from text");
        offset = start + group.len();
        if group == "I" {
            intervals.push(IntervalSpec::idle());
            continue;
        }
        let mut tokens: Vec<Token> = Vec::new();
        let mut pos = start;
        for part in group.split('+') {
            if part.is_empty() {
                return Err(PulseError::Parse { position: pos, message: "empty token".into() });
            }
            let tok = parse_token(part, pos)?;
            if tokens.iter().any(|t| t.parity == tok.parity) {
                return Err(PulseError::Parse {
                    position: pos,
                    message: format!("two pulses on sublattice {} in one interval", tok.parity.digit()),
                });
            }
            tokens.push(tok);
            pos += part.len() + 1;
        }
        tokens.sort_by_key(|t| t.parity);
        intervals.push(IntervalSpec { tokens });
    }
    if intervals.is_empty() {
        return Err(PulseError::Parse { position: 0, message: "empty sequence".into() });
    }
    Ok(Sequence { intervals })
}

/// Back-to-back intervals of duration τ with per-sublattice controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub intervals: Vec<SublatticePulses>,
}

impl PulseSchedule {
    pub fn new(intervals: Vec<SublatticePulses>) -> Self {
        PulseSchedule { intervals }
    }

    /// One interval with `pulse` on odd sites, even sites idle.
    pub fn single_odd(pulse: AxisPulse) -> Self {
        PulseSchedule { intervals: vec![SublatticePulses { odd: Some(pulse), even: None }] }
    }

    pub fn idle(n: usize) -> Self {
        PulseSchedule { intervals: vec![SublatticePulses::idle(); n] }
    }

    /// Total duration in units of τ.
    pub fn duration(&self) -> f64 {
        self.intervals.len() as f64
    }

    pub fn pulsed(&self, parity: Parity) -> bool {
        self.intervals.iter().any(|i| i.get(parity).is_some())
    }

    /// All control amplitudes multiplied by `factor`.
    pub fn with_amplitude(&self, factor: f64) -> PulseSchedule {
        let mut out = self.clone();
        for iv in &mut out.intervals {
            for p in [iv.odd.as_mut(), iv.even.as_mut()].into_iter().flatten() {
                p.amplitude *= factor;
            }
        }
        out
    }
}

/// Sequences of the published order table, by id.
pub const TABLE_SEQUENCES: [(&str, &str); 4] = [
    ("1", "X1"),
    ("2", "X1 X1"),
    ("4", "X1 Y2 ~X1 ~Y2"),
    ("8", "X1 Y2 ~X1 ~Y2 ~Y2 ~X1 Y2 X1"),
];
