//! The exterior algebra `E = ΛV` and its scalar extension `E_R`.
//!
//! Basis elements `v_I` are bitmasks: bit `i-1` is set when `v_i` is a
//! factor. Subsets are stored as increasing index lists, so
//! `v_I = v_{i_1} ∧ ... ∧ v_{i_r}` with `i_1 < ... < i_r`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::scalar::{Ring, Scalar};
use crate::series::{Mono, Series};

/// A basis subset as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct Blade(pub u32);

impl Blade {
    pub const EMPTY: Blade = Blade(0);

    /// `v_i`, one-based.
    pub fn single(i: usize) -> Blade {
        Blade(1 << (i - 1))
    }

    pub fn from_indices(idx: &[usize]) -> Option<Blade> {
        let mut b = 0u32;
        for &i in idx {
            if i == 0 || i > 32 || b & (1 << (i - 1)) != 0 {
                return None;
            }
            b |= 1 << (i - 1);
        }
        Some(Blade(b))
    }

    /// One-based increasing indices.
    pub fn indices(&self) -> Vec<usize> {
        (0..32).filter(|k| self.0 & (1 << k) != 0).map(|k| k + 1).collect()
    }

    pub fn grade(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn parity(&self) -> usize {
        self.grade() % 2
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0 & (1 << (i - 1)) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn render(&self) -> String {
        if self.0 == 0 {
            return "1".into();
        }
        let s: Vec<String> = self.indices().iter().map(|i| i.to_string()).collect();
        format!("v{}", s.join(""))
    }
}

impl Ord for Blade {
    fn cmp(&self, o: &Blade) -> Ordering {
        self.grade().cmp(&o.grade()).then_with(|| self.indices().cmp(&o.indices()))
    }
}

impl PartialOrd for Blade {
    fn partial_cmp(&self, o: &Blade) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// All `2^n` blades in graded-lex order.
pub fn all_blades(n: usize) -> Vec<Blade> {
    let mut v: Vec<Blade> = (0..(1u32 << n)).map(Blade).collect();
    v.sort();
    v
}

/// Position of each bitmask in [`all_blades`].
pub fn blade_positions(n: usize) -> Vec<usize> {
    let mut pos = vec![0; 1 << n];
    for (k, b) in all_blades(n).iter().enumerate() {
        pos[b.0 as usize] = k;
    }
    pos
}

/// Sign of `v_I ∧ v_J = ± v_{I∪J}`, or `None` when `I ∩ J ≠ ∅`.
pub fn wedge_sign(i: Blade, j: Blade) -> Option<bool> {
    if i.0 & j.0 != 0 {
        return None;
    }
    // Count pairs (a in I, b in J) with a > b.
    let mut inv = 0u32;
    let mut jb = j.0;
    while jb != 0 {
        let b = jb.trailing_zeros();
        inv += (i.0 >> (b + 1)).count_ones();
        jb &= jb - 1;
    }
    Some(inv % 2 == 1)
}

/// Sign of `v_i^∨ ⌟ v_I = ± v_{I∖i}`, or `None` when `i ∉ I`.
pub fn contract_sign(i: usize, b: Blade) -> Option<bool> {
    if !b.contains(i) {
        return None;
    }
    let below = b.0 & ((1u32 << (i - 1)) - 1);
    Some(below.count_ones() % 2 == 1)
}

/// Coefficient types: ground scalars for `E`, series for `E_R`.
pub trait Coeff: Clone + fmt::Debug + fmt::Display {
    fn is_zero(&self) -> bool;
    fn plus(&self, o: &Self) -> Self;
    fn negate(&self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn times_scalar(&self, c: &Scalar) -> Self;
    fn same(&self, o: &Self) -> bool;
}

impl Coeff for Scalar {
    fn is_zero(&self) -> bool {
        Scalar::is_zero(self)
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn negate(&self) -> Self {
        -self
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn times_scalar(&self, c: &Scalar) -> Self {
        self * c
    }
    fn same(&self, o: &Self) -> bool {
        self == o
    }
}

impl Coeff for Series {
    fn is_zero(&self) -> bool {
        Series::is_zero(self)
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn negate(&self) -> Self {
        -self
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn times_scalar(&self, c: &Scalar) -> Self {
        self.scale(c)
    }
    fn same(&self, o: &Self) -> bool {
        self.agrees_with(o)
    }
}

/// Sparse element of `E` (with `C = Scalar`) or `E_R` (with `C = Series`).
#[derive(Clone, Debug)]
pub struct Multivector<C: Coeff> {
    nvars: usize,
    terms: BTreeMap<Blade, C>,
}

pub type Ext = Multivector<Scalar>;
pub type ExtR = Multivector<Series>;

impl<C: Coeff> Multivector<C> {
    pub fn zero(nvars: usize) -> Self {
        Multivector { nvars, terms: BTreeMap::new() }
    }

    pub fn basis(nvars: usize, b: Blade, c: C) -> Self {
        let mut m = Self::zero(nvars);
        m.add_term(b, c);
        m
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Blade, &C)> {
        self.terms.iter()
    }

    pub fn get(&self, b: &Blade) -> Option<&C> {
        self.terms.get(b)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, b: Blade, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&b) {
            Some(v) => {
                let s = v.plus(&c);
                if s.is_zero() {
                    self.terms.remove(&b);
                } else {
                    *v = s;
                }
            }
            None => {
                self.terms.insert(b, c);
            }
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (b, c) in &o.terms {
            r.add_term(*b, c.clone());
        }
        r
    }

    pub fn neg(&self) -> Self {
        Multivector { nvars: self.nvars, terms: self.terms.iter().map(|(b, c)| (*b, c.negate())).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut r = Self::zero(self.nvars);
        for (b, v) in &self.terms {
            r.add_term(*b, v.times(c));
        }
        r
    }

    pub fn scale_scalar(&self, c: &Scalar) -> Self {
        let mut r = Self::zero(self.nvars);
        for (b, v) in &self.terms {
            r.add_term(*b, v.times_scalar(c));
        }
        r
    }

    /// Bilinear wedge product.
    pub fn wedge(&self, o: &Self) -> Self {
        let mut r = Self::zero(self.nvars);
        for (i, a) in &self.terms {
            for (j, b) in &o.terms {
                if let Some(neg) = wedge_sign(*i, *j) {
                    let p = a.times(b);
                    r.add_term(Blade(i.0 | j.0), if neg { p.negate() } else { p });
                }
            }
        }
        r
    }

    /// `v_i^∨ ⌟ self`, one-based.
    pub fn contract_basis(&self, i: usize) -> Self {
        let mut r = Self::zero(self.nvars);
        for (b, c) in &self.terms {
            if let Some(neg) = contract_sign(i, *b) {
                r.add_term(Blade(b.0 & !(1 << (i - 1))), if neg { c.negate() } else { c.clone() });
            }
        }
        r
    }

    /// `c ⌟ self` for a covector `c = Σ c_i v_i^∨`.
    pub fn contract(&self, c: &[C]) -> Self {
        let mut r = Self::zero(self.nvars);
        for (k, ck) in c.iter().enumerate() {
            if !ck.is_zero() {
                r = r.add(&self.contract_basis(k + 1).scale(ck));
            }
        }
        r
    }

    /// Component of ℤ-grade `d`.
    pub fn grade_part(&self, d: usize) -> Self {
        Multivector { nvars: self.nvars, terms: self.terms.iter().filter(|(b, _)| b.grade() == d).map(|(b, c)| (*b, c.clone())).collect() }
    }

    /// Largest grade present, or `None` for zero.
    pub fn filtration_level(&self) -> Option<usize> {
        self.terms.keys().map(|b| b.grade()).max()
    }

    /// Common parity of all terms, if homogeneous.
    pub fn parity(&self) -> Option<usize> {
        let mut it = self.terms.keys().map(|b| b.parity());
        let p = it.next()?;
        it.all(|q| q == p).then_some(p)
    }

    pub fn same(&self, o: &Self) -> bool {
        let keys: std::collections::BTreeSet<&Blade> = self.terms.keys().chain(o.terms.keys()).collect();
        keys.into_iter().all(|b| match (self.terms.get(b), o.terms.get(b)) {
            (Some(x), Some(y)) => x.same(y),
            (Some(x), None) | (None, Some(x)) => x.is_zero(),
            (None, None) => true,
        })
    }
}

impl<C: Coeff> PartialEq for Multivector<C> {
    fn eq(&self, o: &Self) -> bool {
        self.nvars == o.nvars && self.same(o)
    }
}

impl<C: Coeff> fmt::Display for Multivector<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(b, c)| format!("({c})*{}", b.render())).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Ext {
    /// `v_I` with coefficient one.
    pub fn blade(ring: Ring, nvars: usize, b: Blade) -> Ext {
        Ext::basis(nvars, b, ring.one())
    }

    /// Extends scalars to series of the given order.
    pub fn to_series(&self, order: usize) -> ExtR {
        let mut r = ExtR::zero(self.nvars);
        for (b, c) in &self.terms {
            r.add_term(*b, Series::constant(c.clone(), self.nvars, order));
        }
        r
    }
}

impl ExtR {
    /// Keeps only constant terms.
    pub fn reduce_mod_m(&self) -> Ext {
        let mut r = Ext::zero(self.nvars);
        for (b, c) in &self.terms {
            r.add_term(*b, c.constant_term());
        }
        r
    }

    /// Truncates every coefficient to order `m`.
    pub fn truncate(&self, m: usize) -> ExtR {
        let mut r = ExtR::zero(self.nvars);
        for (b, c) in &self.terms {
            r.add_term(*b, c.truncate(m));
        }
        r
    }

    /// Coefficient of `x^α v_I`.
    pub fn coeff(&self, b: &Blade, m: &Mono) -> Option<Scalar> {
        self.terms.get(b).map(|s| s.coeff(m))
    }
}

/// The canonical element `𝐯 = Σ x_i v_i ∈ m ⊗ V`.
pub fn canonical_v(ring: Ring, n: usize, order: usize) -> ExtR {
    let mut r = ExtR::zero(n);
    for i in 0..n {
        r.add_term(Blade::single(i + 1), Series::var(ring, n, i, order));
    }
    r
}

/// Binomial coefficient, used for ranks of `Λ^d V`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(idx: &[usize]) -> Ext {
        Ext::blade(Ring::Q, 4, Blade::from_indices(idx).unwrap())
    }

    #[test]
    fn wedge_examples() {
        assert_eq!(v(&[1]).wedge(&v(&[2])), v(&[1, 2]));
        assert_eq!(v(&[2]).wedge(&v(&[1])), v(&[1, 2]).neg());
        assert!(v(&[1]).wedge(&v(&[1])).is_zero());
        assert_eq!(v(&[3]).wedge(&v(&[1, 2])), v(&[1, 2, 3]));
        assert_eq!(v(&[2]).wedge(&v(&[1, 3])), v(&[1, 2, 3]).neg());
    }

    #[test]
    fn contraction_examples() {
        assert_eq!(v(&[1, 2]).contract_basis(1), v(&[2]));
        assert_eq!(v(&[1, 2]).contract_basis(2), v(&[1]).neg());
        assert!(v(&[]).contract_basis(1).is_zero());
    }

    #[test]
    fn canonical_and_reduction() {
        let c = canonical_v(Ring::Q, 2, 3);
        assert_eq!(c.to_string(), "(x1 + O(4))*v1 + (x2 + O(4))*v2");
        let mut a = ExtR::zero(2);
        let one_plus_x = &Series::one(Ring::Q, 2, 3) + &Series::var(Ring::Q, 2, 0, 3);
        a.add_term(Blade::single(1), one_plus_x);
        assert_eq!(a.reduce_mod_m(), Ext::blade(Ring::Q, 2, Blade::single(1)));
        assert!(canonical_v(Ring::Q, 2, 3).reduce_mod_m().is_zero());
    }

    #[test]
    fn graded_lex_blades() {
        let r: Vec<String> = all_blades(3).iter().map(|b| b.render()).collect();
        assert_eq!(r, ["1", "v1", "v2", "v3", "v12", "v13", "v23", "v123"]);
        for d in 0..=4 {
            assert_eq!(all_blades(4).iter().filter(|b| b.grade() == d).count(), binomial(4, d));
        }
    }

    /// Oracle for the wedge sign: sort the concatenated index list by
    /// adjacent swaps and count them.
    fn bubble_sign(i: &[usize], j: &[usize]) -> Option<bool> {
        let mut l: Vec<usize> = i.iter().chain(j).copied().collect();
        let mut swaps = 0;
        for a in 0..l.len() {
            for b in 0..l.len() - 1 - a {
                if l[b] == l[b + 1] {
                    return None;
                }
                if l[b] > l[b + 1] {
                    l.swap(b, b + 1);
                    swaps += 1;
                }
            }
        }
        if l.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
        Some(swaps % 2 == 1)
    }

    fn arb_ext(n: usize) -> impl Strategy<Value = Ext> {
        prop::collection::vec(-2i64..=2, 1 << n).prop_map(move |cs| {
            let mut m = Ext::zero(n);
            for (k, c) in cs.into_iter().enumerate() {
                m.add_term(Blade(k as u32), Scalar::from_i64(Ring::Q, c));
            }
            m
        })
    }

    proptest! {
        #[test]
        fn wedge_sign_matches_sorting(a in 0u32..16, b in 0u32..16) {
            let (ia, ib) = (Blade(a).indices(), Blade(b).indices());
            prop_assert_eq!(wedge_sign(Blade(a), Blade(b)), bubble_sign(&ia, &ib));
        }

        #[test]
        fn graded_commutativity(a in 0u32..16, b in 0u32..16) {
            let (x, y) = (Ext::blade(Ring::Q, 4, Blade(a)), Ext::blade(Ring::Q, 4, Blade(b)));
            let s = Blade(a).grade() * Blade(b).grade();
            let rhs = y.wedge(&x);
            prop_assert_eq!(x.wedge(&y), if s.is_multiple_of(2) { rhs } else { rhs.neg() });
        }

        #[test]
        fn contraction_squares_to_zero(a in arb_ext(4), c in prop::collection::vec(-2i64..=2, 4)) {
            let cv: Vec<Scalar> = c.iter().map(|&x| Scalar::from_i64(Ring::Q, x)).collect();
            prop_assert!(a.contract(&cv).contract(&cv).is_zero());
        }

        #[test]
        fn contraction_is_odd_derivation(a in 0u32..16, b in 0u32..16, i in 1usize..=4) {
            let (x, y) = (Ext::blade(Ring::Q, 4, Blade(a)), Ext::blade(Ring::Q, 4, Blade(b)));
            let lhs = x.wedge(&y).contract_basis(i);
            let t2 = x.wedge(&y.contract_basis(i));
            let rhs = x.contract_basis(i).wedge(&y).add(&if Blade(a).grade().is_multiple_of(2) { t2 } else { t2.neg() });
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn cartan_identity(a in arb_ext(3), l in 1usize..=3, m in 1usize..=3) {
            // [v_l ∧ •, v_m^∨ ⌟ •] = δ_lm id as a graded commutator of odd operators.
            let vl = Ext::blade(Ring::Q, 3, Blade::single(l));
            let lhs = vl.wedge(&a.contract_basis(m)).add(&vl.wedge(&a).contract_basis(m));
            prop_assert_eq!(lhs, if l == m { a.clone() } else { Ext::zero(3) });
        }
    }
}
