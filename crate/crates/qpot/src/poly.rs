//! Multivariate polynomials in the real coordinates `x₀ … x_{4n−1}` with
//! exact complex-rational coefficients.
//!
//! Coordinates are grouped in blocks of four: the quaternion variable `q_l`
//! occupies `x_{4l} … x_{4l+3}`. All arithmetic is exact; equality is
//! coefficient-wise equality of the canonical (zero-pruned) form.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex;
use num_traits::Zero;

use crate::exterior::Coeff;
use crate::scalar::{cq_int, cq_to_f64, rat_int, Rat, CQ};
use crate::{QpotError, Result};

/// Polynomial over `x₀ … x_{4n−1}`; `n` is the quaternionic dimension.
#[derive(Clone, PartialEq, Eq)]
pub struct RealPolynomial {
    n: usize,
    /// exponent vector (length `4n`) → nonzero coefficient
    terms: BTreeMap<Vec<u32>, CQ>,
}

impl RealPolynomial {
    pub fn zero(n: usize) -> Self {
        RealPolynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: CQ) -> Self {
        let mut p = Self::zero(n);
        if !num_traits::Zero::is_zero(&c) {
            p.terms.insert(vec![0; 4 * n], c);
        }
        p
    }

    /// The coordinate monomial `x_m`.
    pub fn coord(n: usize, m: usize) -> Self {
        assert!(m < 4 * n, "coordinate index out of range");
        let mut exp = vec![0u32; 4 * n];
        exp[m] = 1;
        let mut p = Self::zero(n);
        p.terms.insert(exp, cq_int(1));
        p
    }

    /// `|q|² = Σ_m x_m²`, the squared Euclidean norm of `ℍⁿ ≅ ℝ^{4n}`.
    pub fn norm_sq(n: usize) -> Self {
        let mut p = Self::zero(n);
        for m in 0..4 * n {
            let mut exp = vec![0u32; 4 * n];
            exp[m] = 2;
            p.terms.insert(exp, cq_int(1));
        }
        p
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn vars(&self) -> usize {
        4 * self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when every coefficient has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.terms.values().all(|c| c.im.is_zero())
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &CQ)> {
        self.terms.iter()
    }

    /// Add `c · x^exp` into the polynomial, keeping canonical form.
    pub fn add_term(&mut self, exp: Vec<u32>, c: CQ) {
        assert_eq!(exp.len(), 4 * self.n, "exponent arity mismatch");
        if num_traits::Zero::is_zero(&c) {
            return;
        }
        match self.terms.entry(exp) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().clone() + c;
                if num_traits::Zero::is_zero(&sum) {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = -c.clone();
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn scale(&self, c: &CQ) -> Self {
        if num_traits::Zero::is_zero(c) {
            return Self::zero(self.n);
        }
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = v.clone() * c.clone();
        }
        out
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let mut out = Self::zero(self.n);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let exp: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(exp, ca.clone() * cb.clone());
            }
        }
        out
    }

    /// Exact partial derivative `∂/∂x_m`.
    pub fn diff(&self, m: usize) -> Result<Self> {
        if m >= 4 * self.n {
            return Err(QpotError::Dimension(format!(
                "coordinate {m} out of range for {} variables",
                4 * self.n
            )));
        }
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            if e[m] == 0 {
                continue;
            }
            let mut exp = e.clone();
            exp[m] -= 1;
            out.add_term(exp, c.clone() * cq_int(e[m] as i64));
        }
        Ok(out)
    }

    pub fn eval_rat(&self, x: &[Rat]) -> CQ {
        assert_eq!(x.len(), 4 * self.n, "evaluation point arity mismatch");
        let mut acc = CQ::new(rat_int(0), rat_int(0));
        for (e, c) in &self.terms {
            let mut mono = rat_int(1);
            for (xi, &ei) in x.iter().zip(e.iter()) {
                for _ in 0..ei {
                    mono *= xi.clone();
                }
            }
            acc += c.clone() * CQ::new(mono, rat_int(0));
        }
        acc
    }

    pub fn eval_f64(&self, x: &[f64]) -> Complex<f64> {
        assert_eq!(x.len(), 4 * self.n, "evaluation point arity mismatch");
        let mut acc = Complex::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let mut mono = 1.0;
            for (xi, &ei) in x.iter().zip(e.iter()) {
                mono *= xi.powi(ei as i32);
            }
            acc += cq_to_f64(c) * mono;
        }
        acc
    }
}

impl Coeff for RealPolynomial {
    fn add_ref(&self, rhs: &Self) -> Self {
        self.add(rhs)
    }
    fn mul_ref(&self, rhs: &Self) -> Self {
        self.mul(rhs)
    }
    fn neg_ref(&self) -> Self {
        self.neg()
    }
    fn is_zero(&self) -> bool {
        RealPolynomial::is_zero(self)
    }
}

impl fmt::Debug for RealPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({}+{}i)", c.re, c.im)?;
            for (m, &em) in e.iter().enumerate() {
                if em == 1 {
                    write!(f, "·x{m}")?;
                } else if em > 1 {
                    write!(f, "·x{m}^{em}")?;
                }
            }
        }
        Ok(())
    }
}
