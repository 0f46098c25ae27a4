//! Rational quaternion arithmetic, hyperhermitian matrices, and the Moore
//! determinant.
//!
//! The Moore determinant is computed by the cycle expansion: each
//! permutation contributes the ordered product of its cycles, every cycle
//! written starting from its largest element, cycles ordered by decreasing
//! leader. That ordering makes the value real on hyperhermitian input. As an
//! independent route, the determinant of the 2n×2n complex adjoint matrix
//! equals the square of the Moore determinant; both are computed exactly.

use num_traits::{One, Zero};

use crate::scalar::{Rat, CQ};
use crate::{QpotError, Result};

/// Quaternion with exact rational components `(1, i, j, k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Quaternion {
    pub c: [Rat; 4],
}

impl Quaternion {
    pub fn new(w: Rat, x: Rat, y: Rat, z: Rat) -> Self {
        Quaternion { c: [w, x, y, z] }
    }

    pub fn zero() -> Self {
        Quaternion {
            c: [Rat::zero(), Rat::zero(), Rat::zero(), Rat::zero()],
        }
    }

    pub fn one() -> Self {
        Quaternion {
            c: [Rat::one(), Rat::zero(), Rat::zero(), Rat::zero()],
        }
    }

    pub fn from_real(r: Rat) -> Self {
        Quaternion {
            c: [r, Rat::zero(), Rat::zero(), Rat::zero()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|x| x.is_zero())
    }

    pub fn is_real(&self) -> bool {
        self.c[1].is_zero() && self.c[2].is_zero() && self.c[3].is_zero()
    }

    pub fn conj(&self) -> Self {
        Quaternion {
            c: [
                self.c[0].clone(),
                -self.c[1].clone(),
                -self.c[2].clone(),
                -self.c[3].clone(),
            ],
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Quaternion {
            c: [
                &self.c[0] + &rhs.c[0],
                &self.c[1] + &rhs.c[1],
                &self.c[2] + &rhs.c[2],
                &self.c[3] + &rhs.c[3],
            ],
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Quaternion {
            c: [
                &self.c[0] - &rhs.c[0],
                &self.c[1] - &rhs.c[1],
                &self.c[2] - &rhs.c[2],
                &self.c[3] - &rhs.c[3],
            ],
        }
    }

    pub fn neg(&self) -> Self {
        Quaternion {
            c: [
                -self.c[0].clone(),
                -self.c[1].clone(),
                -self.c[2].clone(),
                -self.c[3].clone(),
            ],
        }
    }

    /// Hamilton product (i·j = k).
    pub fn mul(&self, rhs: &Self) -> Self {
        let (a, b) = (&self.c, &rhs.c);
        Quaternion {
            c: [
                &a[0] * &b[0] - &a[1] * &b[1] - &a[2] * &b[2] - &a[3] * &b[3],
                &a[0] * &b[1] + &a[1] * &b[0] + &a[2] * &b[3] - &a[3] * &b[2],
                &a[0] * &b[2] - &a[1] * &b[3] + &a[2] * &b[0] + &a[3] * &b[1],
                &a[0] * &b[3] + &a[1] * &b[2] - &a[2] * &b[1] + &a[3] * &b[0],
            ],
        }
    }

    pub fn scale(&self, r: &Rat) -> Self {
        Quaternion {
            c: [
                &self.c[0] * r,
                &self.c[1] * r,
                &self.c[2] * r,
                &self.c[3] * r,
            ],
        }
    }

    pub fn norm_sq(&self) -> Rat {
        self.c.iter().map(|x| x * x).fold(Rat::zero(), |a, b| a + b)
    }

    /// Split q = (a + bi) + (c + di)·j into its complex pair.
    pub fn complex_pair(&self) -> (CQ, CQ) {
        (
            CQ::new(self.c[0].clone(), self.c[1].clone()),
            CQ::new(self.c[2].clone(), self.c[3].clone()),
        )
    }
}

/// Square quaternion matrix with `A_{kj} = conj(A_{jk})` and real diagonal,
/// validated at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperhermitianMatrix {
    dim: usize,
    entries: Vec<Quaternion>, // row-major
}

impl HyperhermitianMatrix {
    pub fn new(dim: usize, entries: Vec<Quaternion>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(QpotError::Dimension(format!(
                "expected {} entries for a {dim}×{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        for j in 0..dim {
            for k in j..dim {
                let a = &entries[j * dim + k];
                let b = &entries[k * dim + j];
                if *b != a.conj() {
                    return Err(QpotError::NotHyperhermitian(format!(
                        "entry ({k},{j}) is not the conjugate of entry ({j},{k})"
                    )));
                }
            }
        }
        Ok(HyperhermitianMatrix { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, Rat::one())
    }

    pub fn scaled_identity(dim: usize, r: Rat) -> Self {
        let mut entries = vec![Quaternion::zero(); dim * dim];
        for j in 0..dim {
            entries[j * dim + j] = Quaternion::from_real(r.clone());
        }
        HyperhermitianMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, j: usize, k: usize) -> &Quaternion {
        &self.entries[j * self.dim + k]
    }

    /// Moore determinant; real-valued by hyperhermitian symmetry.
    pub fn moore_det(&self) -> Rat {
        let live: u32 = if self.dim == 0 {
            0
        } else {
            (1u32 << self.dim) - 1
        };
        let q = self.mdet(live);
        assert!(
            q.is_real(),
            "Moore cycle expansion produced a non-real value on hyperhermitian input"
        );
        q.c[0].clone()
    }

    fn mdet(&self, live: u32) -> Quaternion {
        if live == 0 {
            return Quaternion::one();
        }
        let t = (31 - live.leading_zeros()) as usize;
        let rest = live & !(1 << t);
        let mut acc = Quaternion::zero();
        // Peel the cycle through t: paths t → m₁ → … → m_k close back at t
        // with sign (−1)^k; remaining indices recurse.
        self.cycle_walk(t, t, &Quaternion::one(), 0, rest, false, &mut acc);
        acc
    }

    #[allow(clippy::too_many_arguments)]
    fn cycle_walk(
        &self,
        t: usize,
        cur: usize,
        prod: &Quaternion,
        visited: u32,
        rest: u32,
        odd: bool,
        acc: &mut Quaternion,
    ) {
        let closed = prod.mul(self.get(cur, t));
        if !closed.is_zero() {
            let tail = self.mdet(rest & !visited);
            let term = closed.mul(&tail);
            *acc = if odd { acc.sub(&term) } else { acc.add(&term) };
        }
        let mut free = rest & !visited;
        while free != 0 {
            let next = free.trailing_zeros() as usize;
            free &= free - 1;
            let step = prod.mul(self.get(cur, next));
            if !step.is_zero() {
                self.cycle_walk(t, next, &step, visited | (1 << next), rest, !odd, acc);
            }
        }
    }

    /// The 2n×2n complex matrix [[B, C], [−C̄, B̄]] for A = B + C·j.
    pub fn complex_adjoint(&self) -> Vec<CQ> {
        let n = self.dim;
        let m = 2 * n;
        let mut out = vec![CQ::new(Rat::zero(), Rat::zero()); m * m];
        for j in 0..n {
            for k in 0..n {
                let (b, c) = self.get(j, k).complex_pair();
                out[j * m + k] = b.clone();
                out[j * m + (k + n)] = c.clone();
                out[(j + n) * m + k] = -c.conj();
                out[(j + n) * m + (k + n)] = b.conj();
            }
        }
        out
    }
}

/// Exact determinant of a square complex-rational matrix by Gaussian
/// elimination with nonzero pivoting.
pub fn det_complex(mat: &[CQ], size: usize) -> CQ {
    assert_eq!(mat.len(), size * size);
    let mut a = mat.to_vec();
    let mut det = CQ::new(Rat::one(), Rat::zero());
    for col in 0..size {
        let pivot_row = (col..size).find(|&r| !a[r * size + col].is_zero());
        let Some(p) = pivot_row else {
            return CQ::new(Rat::zero(), Rat::zero());
        };
        if p != col {
            for c in 0..size {
                a.swap(col * size + c, p * size + c);
            }
            det = -det;
        }
        let pivot = a[col * size + col].clone();
        det *= pivot.clone();
        for r in col + 1..size {
            let factor = a[r * size + col].clone() / pivot.clone();
            if factor.is_zero() {
                continue;
            }
            for c in col..size {
                let sub = factor.clone() * a[col * size + c].clone();
                a[r * size + c] = a[r * size + c].clone() - sub;
            }
        }
    }
    det
}
