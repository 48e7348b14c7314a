//! Locale-free number formatting for reports: 12 significant digits.

use serde::Serializer;

pub const SIG_DIGITS: usize = 12;

/// `x` rounded to 12 significant digits (non-finite values pass through).
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().expect("formatted float parses")
}

/// Shortest decimal text of `round_sig(x)`, `.` as decimal separator.
pub fn fmt_sig(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        return "0".into();
    }
    let text = format!("{r}");
    // plain notation stays readable down to 1e-4 and up to 1e15
    if (1e-4..1e15).contains(&r.abs()) {
        text
    } else {
        format!("{r:e}")
    }
}

pub fn serialize_sig<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig(*x))
}

pub fn serialize_sig_vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| round_sig(*x)))
}

pub fn serialize_sig_table<S: Serializer>(v: &[Vec<Option<f64>>], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|row| row.iter().map(|x| x.map(round_sig)).collect::<Vec<_>>()))
}
