//! Exact ground-ring arithmetic.
//!
//! Two ground fields are supported: the rationals and prime fields `F_p`.
//! Rationals use a machine-word fast path and promote to arbitrary
//! precision on overflow, so values are always exact and always reduced.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// The ground ring `R0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ring {
    Q,
    Fp(u64),
}

impl Ring {
    /// Builds `F_p`, rejecting non-primes and moduli too large for the
    /// word-sized multiplication used internally.
    pub fn fp(p: u64) -> Result<Ring> {
        if !(2..(1 << 31)).contains(&p) || !is_prime(p) {
            return Err(Error::Invalid(format!("{p} is not a supported prime")));
        }
        Ok(Ring::Fp(p))
    }

    /// Parses `Q` or `Fp:<p>`.
    pub fn parse(s: &str) -> Result<Ring> {
        let t = s.trim();
        if t == "Q" {
            return Ok(Ring::Q);
        }
        if let Some(rest) = t.strip_prefix("Fp:") {
            let p: u64 = rest.parse().map_err(|_| Error::Parse(format!("bad prime in ring spec {s:?}")))?;
            return Ring::fp(p);
        }
        Err(Error::Parse(format!("unknown ring {s:?}; expected Q or Fp:<p>")))
    }

    pub fn characteristic(&self) -> u64 {
        match self {
            Ring::Q => 0,
            Ring::Fp(p) => *p,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Ring::Fp(_))
    }

    pub fn zero(&self) -> Scalar {
        Scalar::from_i64(*self, 0)
    }

    pub fn one(&self) -> Scalar {
        Scalar::from_i64(*self, 1)
    }

    /// All elements of a finite ring in increasing residue order.
    pub fn elements(&self) -> Option<Vec<Scalar>> {
        match self {
            Ring::Q => None,
            Ring::Fp(p) => Some((0..*p).map(|v| Scalar::Fp { v, p: *p }).collect()),
        }
    }
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ring::Q => write!(f, "Q"),
            Ring::Fp(p) => write!(f, "Fp:{p}"),
        }
    }
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Exact rational in lowest terms with positive denominator.
#[derive(Clone, Debug)]
pub enum Rat {
    Small(i64, i64),
    Big(BigRational),
}

impl Rat {
    fn from_i128(n: i128, d: i128) -> Rat {
        debug_assert!(d != 0);
        let g = n.gcd(&d);
        let (mut n, mut d) = if g > 1 { (n / g, d / g) } else { (n, d) };
        if d < 0 {
            n = -n;
            d = -d;
        }
        match (i64::try_from(n), i64::try_from(d)) {
            (Ok(a), Ok(b)) if a != i64::MIN => Rat::Small(a, b),
            _ => Rat::Big(BigRational::new(BigInt::from(n), BigInt::from(d))),
        }
    }

    fn from_big(r: BigRational) -> Rat {
        match (r.numer().to_i64(), r.denom().to_i64()) {
            (Some(a), Some(b)) if a != i64::MIN => Rat::Small(a, b),
            _ => Rat::Big(r),
        }
    }

    fn to_big(&self) -> BigRational {
        match self {
            Rat::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Rat::Big(r) => r.clone(),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Rat::Small(0, _))
    }

    fn add(&self, o: &Rat) -> Rat {
        match (self, o) {
            (Rat::Small(a, b), Rat::Small(c, d)) => {
                if b == d {
                    Rat::from_i128(*a as i128 + *c as i128, *b as i128)
                } else {
                    let n = (*a as i128) * (*d as i128) + (*c as i128) * (*b as i128);
                    Rat::from_i128(n, (*b as i128) * (*d as i128))
                }
            }
            _ => Rat::from_big(self.to_big() + o.to_big()),
        }
    }

    fn mul(&self, o: &Rat) -> Rat {
        match (self, o) {
            (Rat::Small(a, b), Rat::Small(c, d)) => Rat::from_i128((*a as i128) * (*c as i128), (*b as i128) * (*d as i128)),
            _ => Rat::from_big(self.to_big() * o.to_big()),
        }
    }

    fn neg(&self) -> Rat {
        match self {
            Rat::Small(a, b) => Rat::Small(-a, *b),
            Rat::Big(r) => Rat::from_big(-r.clone()),
        }
    }

    fn inv(&self) -> Option<Rat> {
        match self {
            Rat::Small(0, _) => None,
            Rat::Small(a, b) => Some(Rat::from_i128(*b as i128, *a as i128)),
            Rat::Big(r) => Some(Rat::from_big(r.recip())),
        }
    }

    fn eq(&self, o: &Rat) -> bool {
        match (self, o) {
            (Rat::Small(a, b), Rat::Small(c, d)) => a == c && b == d,
            (Rat::Big(x), Rat::Big(y)) => x == y,
            _ => false,
        }
    }

    fn numer_denom(&self) -> (BigInt, BigInt) {
        let r = self.to_big();
        (r.numer().clone(), r.denom().clone())
    }
}

/// An element of the ground ring. Residues are kept in `[0, p)`.
#[derive(Clone, Debug)]
pub enum Scalar {
    Q(Rat),
    Fp { v: u64, p: u64 },
}

impl Scalar {
    pub fn from_i64(ring: Ring, n: i64) -> Scalar {
        match ring {
            Ring::Q => Scalar::Q(Rat::from_i128(n as i128, 1)),
            Ring::Fp(p) => Scalar::Fp { v: (n as i128).rem_euclid(p as i128) as u64, p },
        }
    }

    /// `num/den` in the given ring; fails when `den` is not invertible.
    pub fn from_frac(ring: Ring, num: i64, den: i64) -> Result<Scalar> {
        let d = Scalar::from_i64(ring, den).inv().ok_or_else(|| Error::NotInvertible(format!("{den} in {ring}")))?;
        Ok(Scalar::from_i64(ring, num) * d)
    }

    pub fn from_bigint(ring: Ring, n: &BigInt) -> Scalar {
        match ring {
            Ring::Q => Scalar::Q(Rat::from_big(BigRational::from_integer(n.clone()))),
            Ring::Fp(p) => {
                let r = n.mod_floor(&BigInt::from(p));
                Scalar::Fp { v: r.to_u64().unwrap_or(0), p }
            }
        }
    }

    pub fn ring(&self) -> Ring {
        match self {
            Scalar::Q(_) => Ring::Q,
            Scalar::Fp { p, .. } => Ring::Fp(*p),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Q(r) => r.is_zero(),
            Scalar::Fp { v, .. } => *v == 0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Scalar::Q(Rat::Small(1, 1)) => true,
            Scalar::Q(_) => false,
            Scalar::Fp { v, .. } => *v == 1,
        }
    }

    pub fn inv(&self) -> Option<Scalar> {
        match self {
            Scalar::Q(r) => r.inv().map(Scalar::Q),
            Scalar::Fp { v, p } => {
                if *v == 0 {
                    None
                } else {
                    Some(Scalar::Fp { v: pow_mod(*v, p - 2, *p), p: *p })
                }
            }
        }
    }

    pub fn pow(&self, e: u32) -> Scalar {
        let mut acc = self.ring().one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Integer multiple `k * self`.
    pub fn times(&self, k: i64) -> Scalar {
        self * &Scalar::from_i64(self.ring(), k)
    }

    /// Parses `"<num>/<den>"`, `"<int>"` (rationals) or a residue string.
    pub fn parse(ring: Ring, s: &str) -> Result<Scalar> {
        let t = s.trim();
        let bad = || Error::Parse(format!("bad coefficient {s:?}"));
        let (n, d) = match t.split_once('/') {
            Some((a, b)) => (a.trim().parse::<BigInt>().map_err(|_| bad())?, b.trim().parse::<BigInt>().map_err(|_| bad())?),
            None => (t.parse::<BigInt>().map_err(|_| bad())?, BigInt::one()),
        };
        if d.is_zero() {
            return Err(bad());
        }
        let num = Scalar::from_bigint(ring, &n);
        let den = Scalar::from_bigint(ring, &d).inv().ok_or_else(|| Error::NotInvertible(format!("denominator in {s:?}")))?;
        Ok(num * den)
    }

    /// Residue value for finite fields.
    pub fn residue(&self) -> Option<u64> {
        match self {
            Scalar::Fp { v, .. } => Some(*v),
            Scalar::Q(_) => None,
        }
    }

    /// Numerator and denominator for rationals.
    pub fn as_fraction(&self) -> Option<(BigInt, BigInt)> {
        match self {
            Scalar::Q(r) => Some(r.numer_denom()),
            Scalar::Fp { .. } => None,
        }
    }

    fn check(&self, o: &Scalar) {
        debug_assert_eq!(self.ring(), o.ring(), "scalar ring mismatch");
    }
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    acc
}

impl PartialEq for Scalar {
    fn eq(&self, o: &Scalar) -> bool {
        match (self, o) {
            (Scalar::Q(a), Scalar::Q(b)) => a.eq(b),
            (Scalar::Fp { v: a, p: p1 }, Scalar::Fp { v: b, p: p2 }) => a == b && p1 == p2,
            _ => false,
        }
    }
}

impl Eq for Scalar {}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Q(Rat::Small(n, 1)) => write!(f, "{n}"),
            Scalar::Q(Rat::Small(n, d)) => write!(f, "{n}/{d}"),
            Scalar::Q(Rat::Big(r)) => {
                if r.denom().is_one() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Scalar::Fp { v, .. } => write!(f, "{v}"),
        }
    }
}

impl<'a> Add<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn add(self, o: &Scalar) -> Scalar {
        self.check(o);
        match (self, o) {
            (Scalar::Q(a), Scalar::Q(b)) => Scalar::Q(a.add(b)),
            (Scalar::Fp { v: a, p }, Scalar::Fp { v: b, .. }) => {
                let s = a + b;
                Scalar::Fp { v: if s >= *p { s - p } else { s }, p: *p }
            }
            _ => panic!("scalar ring mismatch"),
        }
    }
}

impl<'a> Mul<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn mul(self, o: &Scalar) -> Scalar {
        self.check(o);
        match (self, o) {
            (Scalar::Q(a), Scalar::Q(b)) => Scalar::Q(a.mul(b)),
            (Scalar::Fp { v: a, p }, Scalar::Fp { v: b, .. }) => Scalar::Fp { v: a * b % p, p: *p },
            _ => panic!("scalar ring mismatch"),
        }
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Q(a) => Scalar::Q(a.neg()),
            Scalar::Fp { v, p } => Scalar::Fp { v: if *v == 0 { 0 } else { p - v }, p: *p },
        }
    }
}

impl<'a> Sub<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn sub(self, o: &Scalar) -> Scalar {
        self + &(-o)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, o: Scalar) -> Scalar {
                (&self).$m(&o)
            }
        }
        impl<'a> $tr<&'a Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, o: &Scalar) -> Scalar {
                (&self).$m(o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, o: &Scalar) {
        *self = &*self + o;
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, o: &Scalar) {
        *self = &*self - o;
    }
}

impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, o: &Scalar) {
        *self = &*self * o;
    }
}

/// `(-1)^e` in the given ring.
pub fn sign(ring: Ring, e: usize) -> Scalar {
    Scalar::from_i64(ring, if e.is_multiple_of(2) { 1 } else { -1 })
}

/// `true` when `x` has absolute value below 2^62, used by tests to keep
/// random data inside the fast path.
pub fn is_small(x: &Scalar) -> bool {
    match x {
        Scalar::Q(Rat::Small(n, d)) => n.abs() < (1 << 62) && *d < (1 << 62),
        Scalar::Q(Rat::Big(r)) => r.numer().abs() < BigInt::from(1i64 << 62),
        Scalar::Fp { .. } => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fp_residues_are_normalised() {
        let r = Ring::fp(3).unwrap();
        assert_eq!(Scalar::from_i64(r, -1).residue(), Some(2));
        assert_eq!(Scalar::from_i64(r, 7).residue(), Some(1));
        assert!((Scalar::from_i64(r, 2) + Scalar::from_i64(r, 1)).is_zero());
    }

    #[test]
    fn rationals_reduce_and_promote() {
        let q = Ring::Q;
        let a = Scalar::from_frac(q, 6, -4).unwrap();
        assert_eq!(a.to_string(), "-3/2");
        let big = Scalar::from_i64(q, i64::MAX);
        let sq = &big * &big;
        assert_eq!(sq.to_string(), "85070591730234615847396907784232501249");
        let back = &sq * &big.inv().unwrap();
        assert_eq!(back, big);
    }

    #[test]
    fn inverse_in_fp() {
        let r = Ring::fp(7).unwrap();
        for v in 1..7 {
            let x = Scalar::from_i64(r, v);
            assert!((&x * &x.inv().unwrap()).is_one());
        }
        assert!(Scalar::from_i64(r, 0).inv().is_none());
    }

    #[test]
    fn parse_round_trip() {
        let x = Scalar::parse(Ring::Q, "-22/8").unwrap();
        assert_eq!(x.to_string(), "-11/4");
        let y = Scalar::parse(Ring::fp(5).unwrap(), "1/2").unwrap();
        assert_eq!(y.residue(), Some(3));
        assert!(Scalar::parse(Ring::fp(2).unwrap(), "1/2").is_err());
        assert!(Ring::parse("Fp:4").is_err());
        assert_eq!(Ring::parse("Fp:3").unwrap(), Ring::Fp(3));
    }
}
