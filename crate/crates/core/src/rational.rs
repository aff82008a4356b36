//! Exact arithmetic over ℚ and ℤ^m: the numeric substrate for every other
//! module.
//!
//! All integers are arbitrary precision. Rationals are [`num_rational::BigRational`],
//! which keeps numerator and denominator coprime with the denominator
//! positive, exactly the canonical form we need. No floating point appears
//! anywhere: balancing and rank decisions are discrete and must not depend
//! on a tolerance.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Exact rational number, always reduced, denominator ≥ 1.
pub type Rat = BigRational;

/// Convenience constructor for small rationals. Panics if `den == 0`.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Shorthand for an integral rational.
pub fn rati(num: i64) -> Rat {
    Rat::from_integer(BigInt::from(num))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KernelError {
    /// The zero vector has no primitive direction; upstream this signals a
    /// contracted edge.
    #[error("zero vector has no primitive direction")]
    ZeroVector,
    /// The linear system has no solution.
    #[error("linear system is infeasible")]
    Infeasible,
}

/// An integer vector in ℤ^m.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IntVec(Vec<BigInt>);

// JSON form: an array of integers, falling back to decimal strings for
// entries outside the i64 range.
impl Serialize for IntVec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
        for x in &self.0 {
            match x.to_i64() {
                Some(v) => seq.serialize_element(&v)?,
                None => seq.serialize_element(&x.to_string())?,
            }
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for IntVec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct IntVecVisitor;
        impl<'de> Visitor<'de> for IntVecVisitor {
            type Value = IntVec;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an array of integers (or decimal strings)")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<IntVec, A::Error> {
                #[derive(Deserialize)]
                #[serde(untagged)]
                enum Entry {
                    Num(i64),
                    Text(String),
                }
                let mut out = Vec::new();
                while let Some(e) = seq.next_element::<Entry>()? {
                    match e {
                        Entry::Num(v) => out.push(BigInt::from(v)),
                        Entry::Text(s) => out.push(
                            s.parse::<BigInt>()
                                .map_err(|_| serde::de::Error::custom("bad integer string"))?,
                        ),
                    }
                }
                Ok(IntVec(out))
            }
        }
        deserializer.deserialize_seq(IntVecVisitor)
    }
}

impl IntVec {
    pub fn new(entries: Vec<BigInt>) -> Self {
        IntVec(entries)
    }

    pub fn from_i64s(entries: &[i64]) -> Self {
        IntVec(entries.iter().map(|&x| BigInt::from(x)).collect())
    }

    /// The zero vector of the given dimension.
    pub fn zeros(dim: usize) -> Self {
        IntVec(vec![BigInt::zero(); dim])
    }

    /// −e_i in ℤ^dim.
    pub fn neg_unit(dim: usize, i: usize) -> Self {
        let mut v = vec![BigInt::zero(); dim];
        v[i] = -BigInt::one();
        IntVec(v)
    }

    /// (1, 1, …, 1) in ℤ^dim.
    pub fn ones(dim: usize) -> Self {
        IntVec(vec![BigInt::one(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[BigInt] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| x.is_zero())
    }

    pub fn scaled(&self, k: &BigInt) -> IntVec {
        IntVec(self.0.iter().map(|x| x * k).collect())
    }

    pub fn scaled_u64(&self, k: u64) -> IntVec {
        self.scaled(&BigInt::from(k))
    }

    pub fn to_rat_vec(&self) -> Vec<Rat> {
        self.0.iter().map(|x| Rat::from_integer(x.clone())).collect()
    }
}

impl fmt::Debug for IntVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for IntVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", x)?;
        }
        write!(f, ")")
    }
}

impl Add for &IntVec {
    type Output = IntVec;
    fn add(self, rhs: &IntVec) -> IntVec {
        debug_assert_eq!(self.dim(), rhs.dim());
        IntVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &IntVec {
    type Output = IntVec;
    fn sub(self, rhs: &IntVec) -> IntVec {
        debug_assert_eq!(self.dim(), rhs.dim());
        IntVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &IntVec {
    type Output = IntVec;
    fn neg(self) -> IntVec {
        IntVec(self.0.iter().map(|a| -a).collect())
    }
}

/// Splits a nonzero integer vector as `v = g·u` with `u` primitive
/// (entry gcd 1, sign of the direction preserved) and `g ≥ 1` the gcd of the
/// absolute entries.
pub fn primitive(v: &IntVec) -> Result<(IntVec, BigInt), KernelError> {
    if v.is_zero() {
        return Err(KernelError::ZeroVector);
    }
    let mut g = BigInt::zero();
    for x in v.entries() {
        g = g.gcd(x);
    }
    let u = IntVec(v.entries().iter().map(|x| x / &g).collect());
    Ok((u, g))
}

/// A linear system `A·x = b` over ℚ. All rows must have the same length.
#[derive(Clone, Debug)]
pub struct LinSys {
    rows: Vec<Vec<Rat>>,
    rhs: Vec<Rat>,
    unknowns: usize,
}

impl LinSys {
    /// Panics if the rows are ragged or `rhs` has the wrong length; these are
    /// construction bugs, not data errors.
    pub fn new(rows: Vec<Vec<Rat>>, rhs: Vec<Rat>, unknowns: usize) -> Self {
        assert_eq!(rows.len(), rhs.len(), "row/rhs count mismatch");
        for r in &rows {
            assert_eq!(r.len(), unknowns, "ragged row in linear system");
        }
        LinSys { rows, rhs, unknowns }
    }

    pub fn unknowns(&self) -> usize {
        self.unknowns
    }
}

/// An affine solution space `{ basepoint + Σ tᵢ·basisᵢ }` over ℚ.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSolution {
    pub basepoint: Vec<Rat>,
    pub basis: Vec<Vec<Rat>>,
}

impl AffineSolution {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// Evaluates `basepoint + Σ paramsᵢ·basisᵢ`.
    pub fn point(&self, params: &[Rat]) -> Vec<Rat> {
        assert_eq!(params.len(), self.basis.len());
        let mut p = self.basepoint.clone();
        for (t, b) in params.iter().zip(&self.basis) {
            for (pi, bi) in p.iter_mut().zip(b) {
                *pi += t * bi;
            }
        }
        p
    }

}

/// Reduced row echelon form in place. Returns the pivot columns.
///
/// Pivot selection is the first row with a nonzero entry, scanning columns
/// left to right: fully deterministic, no magnitude heuristics.
fn rref(rows: &mut [Vec<Rat>]) -> Vec<usize> {
    let nrows = rows.len();
    if nrows == 0 {
        return Vec::new();
    }
    let ncols = rows[0].len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == nrows {
            break;
        }
        let Some(p) = (r..nrows).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].recip();
        for j in c..ncols {
            let v = &rows[r][j] * &inv;
            rows[r][j] = v;
        }
        for i in 0..nrows {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for j in c..ncols {
                    let v = &rows[i][j] - &(&rows[r][j] * &f);
                    rows[i][j] = v;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Exact rank of a rational matrix.
pub fn rank(rows: &[Vec<Rat>]) -> usize {
    let mut m: Vec<Vec<Rat>> = rows.to_vec();
    rref(&mut m).len()
}

/// Solves `A·x = b` exactly, returning a basepoint plus a basis of the
/// homogeneous solutions. The dimension is `#unknowns − rank(A)`.
pub fn solve_affine(sys: &LinSys) -> Result<AffineSolution, KernelError> {
    let n = sys.unknowns;
    let mut aug: Vec<Vec<Rat>> = sys
        .rows
        .iter()
        .zip(&sys.rhs)
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(b.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.contains(&n) {
        return Err(KernelError::Infeasible);
    }
    let is_pivot: Vec<bool> = {
        let mut v = vec![false; n];
        for &c in &pivots {
            v[c] = true;
        }
        v
    };
    let mut basepoint = vec![Rat::zero(); n];
    for (i, &c) in pivots.iter().enumerate() {
        basepoint[c] = aug[i][n].clone();
    }
    let mut basis = Vec::new();
    for f in 0..n {
        if is_pivot[f] {
            continue;
        }
        let mut v = vec![Rat::zero(); n];
        v[f] = Rat::one();
        for (i, &c) in pivots.iter().enumerate() {
            v[c] = -aug[i][f].clone();
        }
        basis.push(v);
    }
    Ok(AffineSolution { basepoint, basis })
}

/// Substitutes `x` into the system and returns the residual vector `A·x − b`.
pub fn residual(sys: &LinSys, x: &[Rat]) -> Vec<Rat> {
    sys.rows
        .iter()
        .zip(&sys.rhs)
        .map(|(row, b)| {
            let mut acc = -b.clone();
            for (a, xi) in row.iter().zip(x) {
                acc += a * xi;
            }
            acc
        })
        .collect()
}

/// A strict inequality `Σ coeffs·t > bound` in the parameters of an affine
/// space.
#[derive(Clone, Debug)]
struct StrictIneq {
    coeffs: Vec<Rat>,
    bound: Rat,
}

/// Finds a point of the affine space whose designated coordinates are all
/// strictly positive, or `None` if no such point exists.
///
/// Deterministic Fourier–Motzkin elimination over the space parameters; the
/// chosen point takes the midpoint of each two-sided parameter interval,
/// `lo + 1` / `hi − 1` for one-sided intervals, and 0 for free parameters.
pub fn strictly_positive_point(space: &AffineSolution, coords: &[usize]) -> Option<Vec<Rat>> {
    let k = space.basis.len();
    let mut ineqs = Vec::new();
    for &j in coords {
        let coeffs: Vec<Rat> = space.basis.iter().map(|b| b[j].clone()).collect();
        let bound = -space.basepoint[j].clone();
        ineqs.push(StrictIneq { coeffs, bound });
    }
    let params = fm_solve(ineqs, k)?;
    let p = space.point(&params);
    debug_assert!(coords.iter().all(|&j| p[j].is_positive()));
    Some(p)
}

fn fm_solve(ineqs: Vec<StrictIneq>, nvars: usize) -> Option<Vec<Rat>> {
    if nvars == 0 {
        return if ineqs.iter().all(|q| q.bound.is_negative()) {
            Some(Vec::new())
        } else {
            None
        };
    }
    let v = nvars - 1;
    // An affine expression const + Σ coeffs·t over the earlier variables.
    let mut lowers: Vec<(Vec<Rat>, Rat)> = Vec::new();
    let mut uppers: Vec<(Vec<Rat>, Rat)> = Vec::new();
    let mut rest: Vec<StrictIneq> = Vec::new();
    for q in &ineqs {
        let c = &q.coeffs[v];
        if c.is_zero() {
            rest.push(StrictIneq {
                coeffs: q.coeffs[..v].to_vec(),
                bound: q.bound.clone(),
            });
        } else {
            let inv = c.recip();
            let expr: Vec<Rat> = q.coeffs[..v].iter().map(|a| -(a * &inv)).collect();
            let konst = &q.bound * &inv;
            if c.is_positive() {
                lowers.push((expr, konst));
            } else {
                uppers.push((expr, konst));
            }
        }
    }
    // Each (lower, upper) pair yields `L < U` on the remaining variables.
    let mut reduced = rest;
    for (le, lc) in &lowers {
        for (ue, uc) in &uppers {
            let coeffs: Vec<Rat> = ue.iter().zip(le).map(|(u, l)| u - l).collect();
            let bound = lc - uc;
            reduced.push(StrictIneq { coeffs, bound });
        }
    }
    let sub = fm_solve(reduced, v)?;
    let eval = |(expr, konst): &(Vec<Rat>, Rat)| -> Rat {
        let mut acc = konst.clone();
        for (a, t) in expr.iter().zip(&sub) {
            acc += a * t;
        }
        acc
    };
    let lo = lowers.iter().map(eval).max();
    let hi = uppers.iter().map(eval).min();
    let choice = match (lo, hi) {
        (Some(lo), Some(hi)) => (&lo + &hi) / rati(2),
        (Some(lo), None) => lo + Rat::one(),
        (None, Some(hi)) => hi - Rat::one(),
        (None, None) => Rat::zero(),
    };
    let mut out = sub;
    out.push(choice);
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(v: &[i64]) -> IntVec {
        IntVec::from_i64s(v)
    }

    #[test]
    fn primitive_factors_out_gcd() {
        let (u, g) = primitive(&iv(&[2, 4, 6])).unwrap();
        assert_eq!(u, iv(&[1, 2, 3]));
        assert_eq!(g, BigInt::from(2));
    }

    #[test]
    fn primitive_preserves_sign() {
        let (u, g) = primitive(&iv(&[0, -3])).unwrap();
        assert_eq!(u, iv(&[0, -1]));
        assert_eq!(g, BigInt::from(3));
    }

    #[test]
    fn primitive_axis_vector() {
        let (u, g) = primitive(&iv(&[5, 0, 0])).unwrap();
        assert_eq!(u, iv(&[1, 0, 0]));
        assert_eq!(g, BigInt::from(5));
    }

    #[test]
    fn primitive_rejects_zero() {
        assert_eq!(primitive(&iv(&[0, 0])), Err(KernelError::ZeroVector));
    }

    #[test]
    fn solve_affine_underdetermined() {
        // x + y = 1 over 2 unknowns.
        let sys = LinSys::new(vec![vec![rati(1), rati(1)]], vec![rati(1)], 2);
        let sol = solve_affine(&sys).unwrap();
        assert_eq!(sol.basepoint, vec![rati(1), rati(0)]);
        assert_eq!(sol.dimension(), 1);
        assert_eq!(sol.basis, vec![vec![rati(-1), rati(1)]]);
        // Every point of the space satisfies the equation exactly.
        let p = sol.point(&[rat(7, 3)]);
        assert_eq!(&p[0] + &p[1], rati(1));
    }

    #[test]
    fn solve_affine_unique() {
        let sys = LinSys::new(
            vec![vec![rati(1), rati(0)], vec![rati(0), rati(1)]],
            vec![rati(4), rati(-5)],
            2,
        );
        let sol = solve_affine(&sys).unwrap();
        assert_eq!(sol.basepoint, vec![rati(4), rati(-5)]);
        assert_eq!(sol.dimension(), 0);
    }

    #[test]
    fn solve_affine_infeasible() {
        let sys = LinSys::new(vec![vec![rati(0)]], vec![rati(1)], 1);
        assert_eq!(solve_affine(&sys), Err(KernelError::Infeasible));
    }

    #[test]
    fn rank_identity_and_dependent_rows() {
        let id3: Vec<Vec<Rat>> = (0..3)
            .map(|i| (0..3).map(|j| if i == j { rati(1) } else { rati(0) }).collect())
            .collect();
        assert_eq!(rank(&id3), 3);
        assert_eq!(rank(&[vec![rati(1), rati(1), rati(1)]]), 1);
        assert_eq!(
            rank(&[vec![rati(1), rati(2)], vec![rati(2), rati(4)]]),
            1
        );
    }

    #[test]
    fn positive_point_on_open_segment() {
        // Space {(t, 1−t)}: both coordinates strictly positive forces
        // t ∈ (0, 1); the midpoint rule gives (1/2, 1/2).
        let space = AffineSolution {
            basepoint: vec![rati(0), rati(1)],
            basis: vec![vec![rati(1), rati(-1)]],
        };
        let p = strictly_positive_point(&space, &[0, 1]).unwrap();
        assert_eq!(p, vec![rat(1, 2), rat(1, 2)]);
    }

    #[test]
    fn positive_point_frozen_negative_coordinate() {
        let space = AffineSolution {
            basepoint: vec![rati(0), rati(-1)],
            basis: vec![vec![rati(1), rati(0)]],
        };
        assert_eq!(strictly_positive_point(&space, &[1]), None);
    }

    #[test]
    fn positive_point_full_plane() {
        let space = AffineSolution {
            basepoint: vec![rati(0), rati(0)],
            basis: vec![vec![rati(1), rati(0)], vec![rati(0), rati(1)]],
        };
        let p = strictly_positive_point(&space, &[0, 1]).unwrap();
        assert_eq!(p, vec![rati(1), rati(1)]);
    }
}
