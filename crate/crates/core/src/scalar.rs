use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type used for prices and quantities: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Display
    + LowerExp
    + Debug
    + Sum
    + Default
    + Send
    + Sync
    + 'static
{
    /// Relative tolerance used by equality and invariant checks.
    fn rel_tolerance() -> Self;

    /// Lossless-enough conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }
}

impl Scalar for f64 {
    fn rel_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn rel_tolerance() -> Self {
        1e-5
    }
}

/// `a ≈ b` within the scalar's relative tolerance (absolute near zero).
pub fn approx_eq<S: Scalar>(a: S, b: S) -> bool {
    let scale = a.abs().max(b.abs()).max(S::one());
    (a - b).abs() <= S::rel_tolerance() * scale
}

/// Rounds to 12 significant digits, the precision of the CSV formats.
pub fn round_sig12<S: Scalar>(x: S) -> S {
    if x.is_zero() || !x.is_finite() {
        return x;
    }
    format!("{:.11e}", x).parse().unwrap_or(x)
}

/// Decimal literal with at most 12 significant digits, no exponent.
pub fn format_sig12<S: Scalar>(x: S) -> String {
    let s = x.to_string();
    if significant_digits(&s) <= 12 {
        s
    } else {
        round_sig12(x).to_string()
    }
}

fn significant_digits(s: &str) -> usize {
    let digits: String = s.chars().filter(char::is_ascii_digit).collect();
    let digits = digits.trim_start_matches('0');
    if s.contains('.') {
        digits.len()
    } else {
        digits.trim_end_matches('0').len()
    }
}
