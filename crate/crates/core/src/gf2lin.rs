//! Linear algebra over F_2 on elements of F_{2^a} viewed as `a`-bit vectors.
//!
//! Only the additive group is used: addition is XOR and every element is its
//! own negative. The width `a` is carried by the caller, never by the value.

use serde::{Deserialize, Serialize};

/// An element of F_{2^a} as a bit vector. Width is ambient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldElem(pub u32);

impl FieldElem {
    pub const ZERO: FieldElem = FieldElem(0);

    #[inline]
    pub fn bits(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// True iff the element fits in width `a`.
    #[inline]
    pub fn fits(self, a: u32) -> bool {
        a >= 32 || self.0 >> a == 0
    }
}

impl std::ops::BitXor for FieldElem {
    type Output = FieldElem;
    #[inline]
    fn bitxor(self, rhs: FieldElem) -> FieldElem {
        FieldElem(self.0 ^ rhs.0)
    }
}

impl std::ops::BitXorAssign for FieldElem {
    #[inline]
    fn bitxor_assign(&mut self, rhs: FieldElem) {
        self.0 ^= rhs.0;
    }
}

impl std::fmt::Display for FieldElem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#b}", self.0)
    }
}

#[inline]
pub fn xor_add(u: FieldElem, v: FieldElem) -> FieldElem {
    u ^ v
}

/// Reduces `elems` to an echelon basis keyed by leading bit.
fn echelon(elems: &[FieldElem]) -> Vec<u32> {
    let mut basis: Vec<u32> = Vec::new();
    for e in elems {
        let mut v = e.0;
        for &b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis.push(v);
            basis.sort_unstable_by(|x, y| y.cmp(x));
        }
    }
    basis
}

/// Dimension of the F_2-span.
pub fn rank(elems: &[FieldElem]) -> usize {
    echelon(elems).len()
}

pub fn is_independent(elems: &[FieldElem]) -> bool {
    rank(elems) == elems.len()
}

/// All `2^rank` elements of the F_2-span, ascending.
pub fn span(elems: &[FieldElem]) -> Vec<FieldElem> {
    let basis = echelon(elems);
    let mut out = Vec::with_capacity(1usize << basis.len());
    for mask in 0u64..(1u64 << basis.len()) {
        let mut v = 0u32;
        for (i, b) in basis.iter().enumerate() {
            if mask >> i & 1 == 1 {
                v ^= b;
            }
        }
        out.push(FieldElem(v));
    }
    out.sort_unstable();
    out
}

/// Combination `b · x = Σ_{i: b_i = 1} x_i` for a coefficient mask `b`.
#[inline]
pub fn combine(mask: u32, xs: &[FieldElem]) -> FieldElem {
    let mut v = FieldElem::ZERO;
    for (i, x) in xs.iter().enumerate() {
        if mask >> i & 1 == 1 {
            v ^= *x;
        }
    }
    v
}

/// One equation `c + Σ_{i ∈ S} y_i = v`, stored as `Σ_{i ∈ S} y_i = c + v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineRow {
    /// Bit `i` set iff unknown `y_i` appears.
    pub coeffs: u64,
    pub rhs: FieldElem,
}

impl AffineRow {
    pub fn new(coeffs: u64, constant: FieldElem, value: FieldElem) -> Self {
        AffineRow {
            coeffs,
            rhs: constant ^ value,
        }
    }
}

/// Affine system over F_2 coefficients with unknowns in F_{2^a}.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineSystem {
    pub num_unknowns: usize,
    pub rows: Vec<AffineRow>,
}

impl AffineSystem {
    pub fn new(num_unknowns: usize) -> Self {
        assert!(num_unknowns <= 64, "at most 64 unknowns are supported");
        AffineSystem {
            num_unknowns,
            rows: Vec::new(),
        }
    }

    /// Adds `Σ_{i ∈ unknowns} y_i = value`.
    pub fn push(&mut self, unknowns: &[usize], value: FieldElem) -> &mut Self {
        let mut coeffs = 0u64;
        for &i in unknowns {
            assert!(i < self.num_unknowns, "unknown index out of range");
            coeffs ^= 1 << i;
        }
        self.rows.push(AffineRow { coeffs, rhs: value });
        self
    }

    pub fn push_row(&mut self, row: AffineRow) -> &mut Self {
        self.rows.push(row);
        self
    }

    /// True iff `y` satisfies every row.
    pub fn satisfied_by(&self, y: &[FieldElem]) -> bool {
        self.rows.iter().all(|r| {
            let mut acc = FieldElem::ZERO;
            for (i, yi) in y.iter().enumerate() {
                if r.coeffs >> i & 1 == 1 {
                    acc ^= *yi;
                }
            }
            acc == r.rhs
        })
    }
}

/// Solution set of an [`AffineSystem`]: empty, or `particular + span` where
/// each homogeneous basis vector is scaled by an arbitrary field element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionSet {
    pub width: u32,
    pub num_unknowns: usize,
    pub consistent: bool,
    pub rank: usize,
    pub particular: Vec<FieldElem>,
    /// F_2 coefficient masks over the unknowns, one per free variable.
    pub homogeneous_basis: Vec<u64>,
}

impl SolutionSet {
    /// `log2` of the solution count, or `None` when there are no solutions.
    pub fn count_log2(&self) -> Option<u64> {
        self.consistent
            .then(|| self.width as u64 * self.homogeneous_basis.len() as u64)
    }

    /// Exact count when it fits in a `u128`.
    pub fn count(&self) -> Option<u128> {
        match self.count_log2() {
            None => Some(0),
            Some(k) if k < 128 => Some(1u128 << k),
            Some(_) => None,
        }
    }

    /// Enumerates every solution in Gray-code order over the free coefficients.
    pub fn iter(&self) -> SolutionIter<'_> {
        SolutionIter {
            set: self,
            current: self.particular.clone(),
            index: 0,
            total_bits: self.width as usize * self.homogeneous_basis.len(),
            done: !self.consistent,
        }
    }
}

pub struct SolutionIter<'a> {
    set: &'a SolutionSet,
    current: Vec<FieldElem>,
    index: u128,
    total_bits: usize,
    done: bool,
}

impl Iterator for SolutionIter<'_> {
    type Item = Vec<FieldElem>;

    fn next(&mut self) -> Option<Vec<FieldElem>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        self.index += 1;
        if self.total_bits >= 128 || self.index >= 1u128 << self.total_bits {
            self.done = true;
        } else {
            let flip = self.index.trailing_zeros() as usize;
            let width = self.set.width as usize;
            let basis = self.set.homogeneous_basis[flip / width];
            let bit = 1u32 << (flip % width);
            for (i, y) in self.current.iter_mut().enumerate() {
                if basis >> i & 1 == 1 {
                    y.0 ^= bit;
                }
            }
        }
        Some(out)
    }
}

/// Gaussian elimination over F_2 applied coordinatewise to the right-hand sides.
pub fn solve_affine_system(sys: &AffineSystem, width: u32) -> SolutionSet {
    let g = sys.num_unknowns;
    let mut rows: Vec<AffineRow> = sys.rows.clone();
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (column, row)
    let mut r = 0;
    for col in 0..g {
        let Some(p) = (r..rows.len()).find(|&i| rows[i].coeffs >> col & 1 == 1) else {
            continue;
        };
        rows.swap(r, p);
        let pivot = rows[r];
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row.coeffs >> col & 1 == 1 {
                row.coeffs ^= pivot.coeffs;
                row.rhs ^= pivot.rhs;
            }
        }
        pivots.push((col, r));
        r += 1;
    }
    let consistent = rows[r..].iter().all(|row| row.rhs.is_zero());

    let mut particular = vec![FieldElem::ZERO; g];
    for &(col, row) in &pivots {
        particular[col] = rows[row].rhs;
    }
    let pivot_cols: u64 = pivots.iter().fold(0, |m, &(c, _)| m | 1 << c);
    let mut homogeneous_basis = Vec::new();
    for free in (0..g).filter(|c| pivot_cols >> c & 1 == 0) {
        let mut v = 1u64 << free;
        for &(col, row) in &pivots {
            if rows[row].coeffs >> free & 1 == 1 {
                v |= 1 << col;
            }
        }
        homogeneous_basis.push(v);
    }

    SolutionSet {
        width,
        num_unknowns: g,
        consistent,
        rank: pivots.len(),
        particular,
        homogeneous_basis,
    }
}
