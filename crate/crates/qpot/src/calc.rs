//! The first-order operator pairs `∇_{jα}`, the differentials `d₀`, `d₁`,
//! the Baston operator `Δ = d₀d₁`, the pairwise operators `Δ_{ij}`, the
//! Monge-Ampère density, and the quaternionic Hessian.
//!
//! For block `l` (quaternion variable `q_l`, coordinates `x_{4l}…x_{4l+3}`)
//! the operator table reads
//!
//! ```text
//!   ∇_{(2l)0}   =  ∂_{4l}   + i ∂_{4l+1}      ∇_{(2l)1}   = −∂_{4l+2} − i ∂_{4l+3}
//!   ∇_{(2l+1)0} =  ∂_{4l+2} − i ∂_{4l+3}      ∇_{(2l+1)1} =  ∂_{4l}   − i ∂_{4l+1}
//! ```
//!
//! All arithmetic is exact; identities hold with zero residual or not at all.

use crate::exterior::{perm_sign, BasisIndex, Multivector};
use crate::poly::RealPolynomial;
use crate::quat::{HyperhermitianMatrix, Quaternion};
use crate::scalar::{cq_i, cq_int, cq_one, rat, Rat, CQ};
use crate::{QpotError, Result};

/// Deliberate defects for mutation testing. Each must be caught by the
/// identity and value checks; a suite that still passes under one of these
/// is vacuous.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Defect {
    /// Flip the sign of the `∂_{x_0}` term inside `∇₀₀`.
    SignFlipNabla00,
    /// Drop the ½ factor in `Δ_{ij}`.
    DropHalfInDeltaIj,
    /// Replace the permutation sign in the density expansion by +1.
    WrongPermSign,
}

impl Defect {
    pub const ALL: [Defect; 3] = [
        Defect::SignFlipNabla00,
        Defect::DropHalfInDeltaIj,
        Defect::WrongPermSign,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Defect::SignFlipNabla00 => "sign-flip-nabla00",
            Defect::DropHalfInDeltaIj => "drop-half-delta-ij",
            Defect::WrongPermSign => "wrong-perm-sign",
        }
    }
}

impl std::str::FromStr for Defect {
    type Err = QpotError;
    fn from_str(s: &str) -> Result<Self> {
        Defect::ALL
            .iter()
            .copied()
            .find(|d| d.id() == s)
            .ok_or_else(|| {
                QpotError::Parse(format!(
                    "unknown defect '{s}' (expected one of: {})",
                    Defect::ALL.map(|d| d.id()).join(", ")
                ))
            })
    }
}

/// The table of first-order operators for one dimension `n`, with optional
/// injected defect.
#[derive(Clone, Debug)]
pub struct OperatorTable {
    n: usize,
    /// `entries[k][α]` = the two signed terms (coordinate, coefficient).
    entries: Vec<[Vec<(usize, CQ)>; 2]>,
    defect: Option<Defect>,
}

impl OperatorTable {
    pub fn new(n: usize) -> Self {
        Self::build(n, None)
    }

    pub fn with_defect(n: usize, defect: Defect) -> Self {
        Self::build(n, Some(defect))
    }

    fn build(n: usize, defect: Option<Defect>) -> Self {
        assert!(n >= 1, "dimension must be positive");
        let i = cq_i();
        let one = cq_one();
        let mut entries = Vec::with_capacity(2 * n);
        for l in 0..n {
            let b = 4 * l;
            entries.push([
                vec![(b, one.clone()), (b + 1, i.clone())],
                vec![(b + 2, -one.clone()), (b + 3, -i.clone())],
            ]);
            entries.push([
                vec![(b + 2, one.clone()), (b + 3, -i.clone())],
                vec![(b, one.clone()), (b + 1, -i.clone())],
            ]);
        }
        if defect == Some(Defect::SignFlipNabla00) {
            entries[0][0][0].1 = -entries[0][0][0].1.clone();
        }
        OperatorTable { n, entries, defect }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn defect(&self) -> Option<Defect> {
        self.defect
    }

    /// The two signed terms of `∇_{kα}`.
    pub fn entry(&self, k: usize, alpha: usize) -> &[(usize, CQ)] {
        &self.entries[k][alpha]
    }

    fn check_indices(&self, k: usize, alpha: usize) -> Result<()> {
        if k >= 2 * self.n || alpha >= 2 {
            return Err(QpotError::Domain(format!(
                "operator index ({k},{alpha}) out of range for 2n = {}",
                2 * self.n
            )));
        }
        Ok(())
    }

    /// Apply `∇_{kα}` to a polynomial.
    pub fn nabla(&self, k: usize, alpha: usize, p: &RealPolynomial) -> Result<RealPolynomial> {
        self.check_indices(k, alpha)?;
        if p.dimension() != self.n {
            return Err(QpotError::Dimension(format!(
                "polynomial over n = {} applied to table with n = {}",
                p.dimension(),
                self.n
            )));
        }
        let mut out = RealPolynomial::zero(self.n);
        for (m, c) in &self.entries[k][alpha] {
            out = out.add(&p.diff(*m)?.scale(c));
        }
        Ok(out)
    }

    /// `d_α F = Σ_{k,I} ∇_{kα} f_I · ω^k ∧ ω^I`.
    pub fn d_alpha(
        &self,
        alpha: usize,
        f: &Multivector<RealPolynomial>,
    ) -> Result<Multivector<RealPolynomial>> {
        self.check_indices(0, alpha)?;
        if f.dimension() != self.n {
            return Err(QpotError::Dimension(format!(
                "form over n = {} applied to table with n = {}",
                f.dimension(),
                self.n
            )));
        }
        if f.degree() >= 2 * self.n {
            return Err(QpotError::Domain(format!(
                "cannot raise degree {} beyond the top degree {}",
                f.degree(),
                2 * self.n
            )));
        }
        let mut parts: Vec<(BasisIndex, RealPolynomial)> = Vec::new();
        for (idx, coeff) in f.components() {
            for k in 0..2 * self.n {
                let kb = k as u8;
                if idx.as_slice().contains(&kb) {
                    continue;
                }
                let g = self.nabla(k, alpha, coeff)?;
                if g.is_zero() {
                    continue;
                }
                // ω^k ∧ ω^I: k jumps over the smaller indices of I
                let smaller = idx.as_slice().iter().filter(|&&m| m < kb).count();
                let mut merged: Vec<u8> = idx.as_slice().to_vec();
                merged.insert(smaller, kb);
                let signed = if smaller % 2 == 0 { g } else { g.neg() };
                parts.push((BasisIndex::new(merged)?, signed));
            }
        }
        Multivector::from_components(self.n, f.degree() + 1, parts)
    }

    pub fn d0(&self, f: &Multivector<RealPolynomial>) -> Result<Multivector<RealPolynomial>> {
        self.d_alpha(0, f)
    }

    pub fn d1(&self, f: &Multivector<RealPolynomial>) -> Result<Multivector<RealPolynomial>> {
        self.d_alpha(1, f)
    }

    /// The Baston operator `Δu = d₀d₁u` of a scalar.
    pub fn baston(&self, u: &RealPolynomial) -> Result<Multivector<RealPolynomial>> {
        let lifted = Multivector::scalar(self.n, u.clone());
        self.d0(&self.d1(&lifted)?)
    }

    /// `Δ_{ij}u = ½(∇_{i0}∇_{j1}u − ∇_{i1}∇_{j0}u)`.
    pub fn delta_ij(&self, u: &RealPolynomial, i: usize, j: usize) -> Result<RealPolynomial> {
        self.check_indices(i, 0)?;
        self.check_indices(j, 0)?;
        let a = self.nabla(i, 0, &self.nabla(j, 1, u)?)?;
        let b = self.nabla(i, 1, &self.nabla(j, 0, u)?)?;
        let diff = a.sub(&b);
        if self.defect == Some(Defect::DropHalfInDeltaIj) {
            return Ok(diff);
        }
        Ok(diff.scale(&CQ::new(rat(1, 2), Rat::zero())))
    }

    /// Monge-Ampère density: the `Ω_{2n}`-coefficient of `Δu₁∧…∧Δuₙ`,
    /// computed through the permutation expansion
    /// `Σ δ^{i₁j₁…iₙjₙ}_{01…(2n−1)} Δ_{i₁j₁}u₁ … Δ_{iₙjₙ}uₙ`.
    pub fn ma_density(&self, us: &[RealPolynomial]) -> Result<RealPolynomial> {
        let n = self.n;
        if us.len() != n {
            return Err(QpotError::Dimension(format!(
                "density needs exactly {n} polynomials, got {}",
                us.len()
            )));
        }
        for u in us {
            if u.dimension() != n {
                return Err(QpotError::Dimension(
                    "density argument over the wrong dimension".into(),
                ));
            }
        }
        // Precompute Δ_{ij} u_l for all pairs.
        let w = 2 * n;
        let mut deltas: Vec<Vec<Vec<RealPolynomial>>> = Vec::with_capacity(n);
        for u in us {
            let mut per_i = Vec::with_capacity(w);
            for i in 0..w {
                let mut per_j = Vec::with_capacity(w);
                for j in 0..w {
                    per_j.push(if i == j {
                        RealPolynomial::zero(n)
                    } else {
                        self.delta_ij(u, i, j)?
                    });
                }
                per_i.push(per_j);
            }
            deltas.push(per_i);
        }
        let mut acc = RealPolynomial::zero(n);
        for perm in permutations(w) {
            let seq: Vec<u8> = perm.iter().map(|&x| x as u8).collect();
            let mut sign = perm_sign(&seq);
            if self.defect == Some(Defect::WrongPermSign) {
                sign = sign.abs();
            }
            if sign == 0 {
                continue;
            }
            let mut term = RealPolynomial::constant(n, cq_int(sign as i64));
            for (l, pair) in perm.chunks(2).enumerate() {
                term = term.mul(&deltas[l][pair[0]][pair[1]]);
                if term.is_zero() {
                    break;
                }
            }
            acc = acc.add(&term);
        }
        Ok(acc)
    }

    /// Same density through the other route: wedge the Baston forms and read
    /// the top coefficient. Kept separate from [`Self::ma_density`] so the
    /// two can cross-check each other.
    pub fn ma_density_via_wedge(&self, us: &[RealPolynomial]) -> Result<RealPolynomial> {
        let n = self.n;
        if us.len() != n {
            return Err(QpotError::Dimension(format!(
                "density needs exactly {n} polynomials, got {}",
                us.len()
            )));
        }
        let mut acc: Option<Multivector<RealPolynomial>> = None;
        for u in us {
            let b = self.baston(u)?;
            acc = Some(match acc {
                None => b,
                Some(f) => f.wedge(&b)?,
            });
        }
        let product = acc.expect("n ≥ 1");
        Ok(product
            .top_coefficient()?
            .cloned()
            .unwrap_or_else(|| RealPolynomial::zero(n)))
    }

    /// Quaternionic Hessian evaluated at a rational point.
    ///
    /// Convention: `∂/∂q̄_l = ¼(∂_{4l} + i∂_{4l+1} + j∂_{4l+2} + k∂_{4l+3})`
    /// and `∂/∂q_l` its conjugate, quaternion units multiplying from the
    /// right, applied in the order `∂/∂q_j (∂/∂q̄_k u)`. The right action is
    /// forced, not a taste choice: see the comment inside. The resulting
    /// Hessian has Moore determinant proportional to the Monge-Ampère
    /// density on quadratic forms; the constant is calibrated once on
    /// `|q|²`.
    pub fn hessian(&self, u: &RealPolynomial, at: &[Rat]) -> Result<HyperhermitianMatrix> {
        let n = self.n;
        if u.dimension() != n {
            return Err(QpotError::Dimension(
                "hessian argument over the wrong dimension".into(),
            ));
        }
        if at.len() != 4 * n {
            return Err(QpotError::Dimension(format!(
                "evaluation point needs {} coordinates, got {}",
                4 * n,
                at.len()
            )));
        }
        if !u.is_real() {
            return Err(QpotError::Domain(
                "hessian is defined for real-coefficient polynomials".into(),
            ));
        }
        let quarter = rat(1, 4);
        let mut entries = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                // w = ∂/∂q̄_k u, componentwise ¼ ∂_{4k+a} u
                let mut w = [
                    u.diff(4 * k)?,
                    u.diff(4 * k + 1)?,
                    u.diff(4 * k + 2)?,
                    u.diff(4 * k + 3)?,
                ];
                // a = ∂/∂q_j w = ¼(∂_{4j}w − (∂_{4j+1}w)i − (∂_{4j+2}w)j − (∂_{4j+3}w)k).
                // The units multiply from the right: quaternionic function
                // spaces are right modules, and only the right action keeps
                // this matrix hyperhermitian in the pairing used by the
                // first-order operator table (left action flips the sign of
                // the cross components and breaks the determinant identity).
                let d = |w: &[RealPolynomial; 4], m: usize| -> Result<[RealPolynomial; 4]> {
                    Ok([w[0].diff(m)?, w[1].diff(m)?, w[2].diff(m)?, w[3].diff(m)?])
                };
                let d0 = d(&w, 4 * j)?;
                let d1 = d(&w, 4 * j + 1)?;
                let d2 = d(&w, 4 * j + 2)?;
                let d3 = d(&w, 4 * j + 3)?;
                // right multiplication: v·i = (−v₁, v₀, v₃, −v₂),
                // v·j = (−v₂, −v₃, v₀, v₁), v·k = (−v₃, v₂, −v₁, v₀)
                let iv = [d1[1].neg(), d1[0].clone(), d1[3].clone(), d1[2].neg()];
                let jv = [d2[2].neg(), d2[3].neg(), d2[0].clone(), d2[1].clone()];
                let kv = [d3[3].neg(), d3[2].clone(), d3[1].neg(), d3[0].clone()];
                for a in 0..4 {
                    w[a] = d0[a].sub(&iv[a]).sub(&jv[a]).sub(&kv[a]);
                }
                // evaluate, including both ¼ factors
                let scale = &quarter * &quarter;
                let mut comps = [Rat::zero(), Rat::zero(), Rat::zero(), Rat::zero()];
                for (a, comp) in comps.iter_mut().enumerate() {
                    let v = w[a].eval_rat(at);
                    debug_assert!(num_traits::Zero::is_zero(&v.im));
                    *comp = v.re * &scale;
                }
                entries.push(Quaternion::new(
                    comps[0].clone(),
                    comps[1].clone(),
                    comps[2].clone(),
                    comps[3].clone(),
                ));
            }
        }
        HyperhermitianMatrix::new(n, entries)
    }
}

/// All permutations of `0..k` (k! of them), in a deterministic order.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(k - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out
}

use num_traits::Zero;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cq;

    fn x(n: usize, m: usize) -> RealPolynomial {
        RealPolynomial::coord(n, m)
    }

    #[test]
    fn nabla_table_examples() {
        let t = OperatorTable::new(1);
        assert_eq!(
            t.nabla(0, 0, &x(1, 1)).unwrap(),
            RealPolynomial::constant(1, cq_i())
        );
        assert_eq!(
            t.nabla(0, 1, &x(1, 2)).unwrap(),
            RealPolynomial::constant(1, cq_int(-1))
        );
        assert_eq!(
            t.nabla(1, 0, &x(1, 3)).unwrap(),
            RealPolynomial::constant(1, -cq_i())
        );
        assert!(t.nabla(2, 0, &x(1, 0)).is_err());
    }

    #[test]
    fn differential_of_coordinates() {
        let t = OperatorTable::new(1);
        let f = Multivector::scalar(1, x(1, 0));
        let d0f = t.d0(&f).unwrap();
        assert_eq!(
            *d0f.component(&BasisIndex::single(0)).unwrap(),
            RealPolynomial::constant(1, cq_one())
        );
        assert!(d0f.component(&BasisIndex::single(1)).is_none());
        let d1f = t.d1(&f).unwrap();
        assert_eq!(
            *d1f.component(&BasisIndex::single(1)).unwrap(),
            RealPolynomial::constant(1, cq_one())
        );
    }

    #[test]
    fn squared_differentials_vanish() {
        let t = OperatorTable::new(1);
        let u = x(1, 0).mul(&x(1, 0)).mul(&x(1, 1));
        let f = Multivector::scalar(1, u);
        assert!(t.d0(&t.d0(&f).unwrap()).unwrap().is_zero());
        assert!(t.d1(&t.d1(&f).unwrap()).unwrap().is_zero());
        let top = t.baston(&RealPolynomial::norm_sq(1)).unwrap();
        assert!(t.d0(&top).is_err(), "degree already at top");
    }

    #[test]
    fn baston_values() {
        let t = OperatorTable::new(1);
        let b = t.baston(&RealPolynomial::norm_sq(1)).unwrap();
        let idx = BasisIndex::new(vec![0, 1]).unwrap();
        assert_eq!(*b.component(&idx).unwrap(), RealPolynomial::constant(1, cq_int(8)));
        assert_eq!(b.components().count(), 1);

        let two_coords = x(1, 0).mul(&x(1, 0)).add(&x(1, 1).mul(&x(1, 1)));
        let b2 = t.baston(&two_coords).unwrap();
        assert_eq!(*b2.component(&idx).unwrap(), RealPolynomial::constant(1, cq_int(4)));

        assert!(t
            .baston(&RealPolynomial::constant(1, cq_int(7)))
            .unwrap()
            .is_zero());
    }

    #[test]
    fn delta_ij_values_and_antisymmetry() {
        let t = OperatorTable::new(1);
        let q = RealPolynomial::norm_sq(1);
        assert_eq!(
            t.delta_ij(&q, 0, 1).unwrap(),
            RealPolynomial::constant(1, cq_int(4))
        );
        assert_eq!(t.delta_ij(&q, 1, 0).unwrap(), t.delta_ij(&q, 0, 1).unwrap().neg());
        assert!(t.delta_ij(&q, 0, 0).unwrap().is_zero());

        let t2 = OperatorTable::new(2);
        let q2 = RealPolynomial::norm_sq(2);
        assert!(t2.delta_ij(&q2, 0, 2).unwrap().is_zero());
    }

    #[test]
    fn density_values() {
        let t1 = OperatorTable::new(1);
        let q1 = RealPolynomial::norm_sq(1);
        assert_eq!(
            t1.ma_density(std::slice::from_ref(&q1)).unwrap(),
            RealPolynomial::constant(1, cq_int(8))
        );
        assert!(t1.ma_density(&[x(1, 0)]).unwrap().is_zero());
        assert!(t1.ma_density(&[]).is_err());

        let t2 = OperatorTable::new(2);
        let q2 = RealPolynomial::norm_sq(2);
        assert_eq!(
            t2.ma_density(&[q2.clone(), q2.clone()]).unwrap(),
            RealPolynomial::constant(2, cq_int(128))
        );

        // symmetry in the arguments
        let a = q2.clone();
        let b = x(2, 0).mul(&x(2, 4)).add(&q2);
        let ab = t2.ma_density(&[a.clone(), b.clone()]).unwrap();
        let ba = t2.ma_density(&[b, a]).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn density_routes_agree() {
        let t1 = OperatorTable::new(1);
        let u = RealPolynomial::norm_sq(1)
            .mul(&x(1, 0))
            .add(&x(1, 2).mul(&x(1, 3)));
        assert_eq!(
            t1.ma_density(std::slice::from_ref(&u)).unwrap(),
            t1.ma_density_via_wedge(&[u]).unwrap()
        );

        let t2 = OperatorTable::new(2);
        let u1 = RealPolynomial::norm_sq(2);
        let u2 = x(2, 0).mul(&x(2, 1)).add(&x(2, 4).mul(&x(2, 4)));
        assert_eq!(
            t2.ma_density(&[u1.clone(), u2.clone()]).unwrap(),
            t2.ma_density_via_wedge(&[u1, u2]).unwrap()
        );
    }

    #[test]
    fn hessian_calibration() {
        for n in 1..=2usize {
            let t = OperatorTable::new(n);
            let origin = vec![Rat::zero(); 4 * n];
            let h = t.hessian(&RealPolynomial::norm_sq(n), &origin).unwrap();
            for j in 0..n {
                for k in 0..n {
                    let expect = if j == k {
                        Quaternion::from_real(rat(1, 2))
                    } else {
                        Quaternion::zero()
                    };
                    assert_eq!(*h.get(j, k), expect);
                }
            }
        }
        // linear → zero matrix
        let t = OperatorTable::new(1);
        let h = t.hessian(&x(1, 2), &vec![Rat::zero(); 4]).unwrap();
        assert!(h.get(0, 0).is_zero());
        // x0² → entry (0,0) = 1/8 > 0
        let h = t
            .hessian(&x(1, 0).mul(&x(1, 0)), &vec![Rat::zero(); 4])
            .unwrap();
        assert_eq!(*h.get(0, 0), Quaternion::from_real(rat(1, 8)));
    }

    #[test]
    fn hessian_proportionality_spot_check() {
        // density / moore_det(hessian) on |q|²: 8/(1/2) = 16 at n=1,
        // 128/(1/4) = 512 at n=2.
        let t1 = OperatorTable::new(1);
        let q1 = RealPolynomial::norm_sq(1);
        let h1 = t1.hessian(&q1, &vec![Rat::zero(); 4]).unwrap();
        assert_eq!(h1.moore_det(), rat(1, 2));
        let t2 = OperatorTable::new(2);
        let q2 = RealPolynomial::norm_sq(2);
        let h2 = t2.hessian(&q2, &vec![Rat::zero(); 8]).unwrap();
        assert_eq!(h2.moore_det(), rat(1, 4));
    }

    #[test]
    fn defects_change_the_values() {
        let q1 = RealPolynomial::norm_sq(1);
        let flip = OperatorTable::with_defect(1, Defect::SignFlipNabla00);
        assert_eq!(
            flip.ma_density(std::slice::from_ref(&q1)).unwrap(),
            RealPolynomial::constant(1, cq_int(4))
        );
        let half = OperatorTable::with_defect(1, Defect::DropHalfInDeltaIj);
        assert_eq!(
            half.ma_density(std::slice::from_ref(&q1)).unwrap(),
            RealPolynomial::constant(1, cq_int(16))
        );
        let q2 = RealPolynomial::norm_sq(2);
        let sign = OperatorTable::with_defect(2, Defect::WrongPermSign);
        assert!(sign.ma_density(&[q2.clone(), q2.clone()]).unwrap().is_zero());
    }

    #[test]
    fn complex_polynomial_rejected_by_hessian() {
        let t = OperatorTable::new(1);
        let p = RealPolynomial::constant(1, cq(rat(0, 1), rat(1, 1)));
        assert!(t.hessian(&p, &vec![Rat::zero(); 4]).is_err());
    }
}
