//! Exact scalar arithmetic: arbitrary-precision rationals and complex
//! rationals, used by every symbolic module.

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational number.
pub type Rat = BigRational;

/// Complex number with exact rational real and imaginary parts.
pub type CQ = Complex<Rat>;

pub fn rat_int(k: i64) -> Rat {
    Rat::from_integer(BigInt::from(k))
}

/// `p/q` as an exact rational. Panics if `q == 0`.
pub fn rat(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

pub fn cq_int(k: i64) -> CQ {
    CQ::new(rat_int(k), Rat::zero())
}

pub fn cq(re: Rat, im: Rat) -> CQ {
    CQ::new(re, im)
}

/// The imaginary unit.
pub fn cq_i() -> CQ {
    CQ::new(Rat::zero(), Rat::one())
}

pub fn cq_zero() -> CQ {
    CQ::new(Rat::zero(), Rat::zero())
}

pub fn cq_one() -> CQ {
    CQ::new(Rat::one(), Rat::zero())
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().expect("rational magnitude representable as f64")
}

pub fn cq_to_f64(c: &CQ) -> Complex<f64> {
    Complex::new(rat_to_f64(&c.re), rat_to_f64(&c.im))
}

/// Relative gap `|a − b| / max(|a|, |b|, 1)` as f64, for reporting exact
/// quantities through floating-point check margins.
pub fn rel_gap(a: &Rat, b: &Rat) -> f64 {
    let diff = (a - b).abs();
    let scale = a.abs().max(b.abs()).max(Rat::one());
    rat_to_f64(&(diff / scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_rational_field_ops() {
        let a = cq(rat(1, 2), rat(-3, 4));
        let b = cq(rat(2, 3), rat(5, 6));
        let prod = a.clone() * b.clone();
        // (1/2 − 3i/4)(2/3 + 5i/6) = (1/3 + 5/8) + i(5/12 − 1/2)
        assert_eq!(prod.re, rat(1, 3) + rat(5, 8));
        assert_eq!(prod.im, rat(5, 12) - rat(1, 2));
        assert_eq!(a.clone() - a.clone(), cq_zero());
        assert_eq!(cq_i() * cq_i(), cq_int(-1));
        let quot = prod / b;
        assert_eq!(quot, a);
    }

    #[test]
    fn rel_gap_reports_exact_zero_for_equal_values() {
        assert_eq!(rel_gap(&rat(7, 3), &rat(7, 3)), 0.0);
        assert!(rel_gap(&rat(1, 1), &rat(101, 100)) > 0.0);
    }
}
