//! Truncated multivariate power series over the ground ring.
//!
//! A [`Series`] is exact modulo `m^(order+1)`, where `m = (x_1, ..., x_n)`.
//! The trust order is carried explicitly: binary operations take the
//! minimum, differentiation lowers it by one, and no coefficient beyond
//! it is ever stored.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{Ring, Scalar};

/// Largest supported number of variables.
pub const MAX_VARS: usize = 8;

/// Exponent vector. Ordered graded-lexicographically with
/// `x_1 > x_2 > ... > x_n`: lower total degree first, and inside one degree
/// the lexicographically larger exponent vector first.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct Mono(pub [u8; MAX_VARS]);

impl Mono {
    pub fn one() -> Mono {
        Mono([0; MAX_VARS])
    }

    /// The variable `x_i`, zero-based.
    pub fn var(i: usize) -> Mono {
        let mut e = [0; MAX_VARS];
        e[i] = 1;
        Mono(e)
    }

    pub fn from_exps(exps: &[u32]) -> Result<Mono> {
        if exps.len() > MAX_VARS {
            return Err(Error::Invalid(format!("at most {MAX_VARS} variables supported")));
        }
        let mut e = [0; MAX_VARS];
        for (k, &x) in exps.iter().enumerate() {
            e[k] = u8::try_from(x).map_err(|_| Error::Invalid(format!("exponent {x} too large")))?;
        }
        Ok(Mono(e))
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn exp(&self, i: usize) -> u32 {
        self.0[i] as u32
    }

    pub fn exps(&self, n: usize) -> Vec<u32> {
        self.0[..n].iter().map(|&e| e as u32).collect()
    }

    pub fn mul(&self, o: &Mono) -> Mono {
        let mut e = self.0;
        for (a, b) in e.iter_mut().zip(o.0.iter()) {
            *a += *b;
        }
        Mono(e)
    }

    /// `self / x_i`, if divisible.
    pub fn div_var(&self, i: usize) -> Option<Mono> {
        if self.0[i] == 0 {
            return None;
        }
        let mut e = self.0;
        e[i] -= 1;
        Some(Mono(e))
    }

    pub fn divides(&self, o: &Mono) -> bool {
        self.0.iter().zip(o.0.iter()).all(|(a, b)| a <= b)
    }

    /// `o / self`, if divisible.
    pub fn quotient(&self, o: &Mono) -> Option<Mono> {
        if !self.divides(o) {
            return None;
        }
        let mut e = o.0;
        for (a, b) in e.iter_mut().zip(self.0.iter()) {
            *a -= *b;
        }
        Some(Mono(e))
    }

    /// Smallest index with a positive exponent.
    pub fn first_var(&self) -> Option<usize> {
        self.0.iter().position(|&e| e > 0)
    }

    /// Renders as `x1^2*x3`, or `1`.
    pub fn render(&self) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| if e == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, e) })
            .collect();
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join("*")
        }
    }
}

impl Ord for Mono {
    fn cmp(&self, o: &Mono) -> std::cmp::Ordering {
        self.degree().cmp(&o.degree()).then_with(|| o.0.cmp(&self.0))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, o: &Mono) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

/// Monomials of total degree `d` in `n` variables, in graded-lex order.
pub fn monomials_of_degree(n: usize, d: usize) -> Vec<Mono> {
    fn rec(n: usize, i: usize, left: usize, cur: &mut [u8; MAX_VARS], out: &mut Vec<Mono>) {
        if i + 1 == n {
            cur[i] = left as u8;
            out.push(Mono(*cur));
            cur[i] = 0;
            return;
        }
        for e in (0..=left).rev() {
            cur[i] = e as u8;
            rec(n, i + 1, left - e, cur, out);
        }
        cur[i] = 0;
    }
    let mut out = Vec::new();
    if n == 0 {
        if d == 0 {
            out.push(Mono::one());
        }
        return out;
    }
    rec(n, 0, d, &mut [0; MAX_VARS], &mut out);
    out
}

/// Monomials of degree at most `d`, in graded-lex order.
pub fn monomials_up_to(n: usize, d: usize) -> Vec<Mono> {
    (0..=d).flat_map(|k| monomials_of_degree(n, k)).collect()
}

/// Element of `R0[[x_1..x_n]]` known modulo `m^(order+1)`.
#[derive(Clone, Debug)]
pub struct Series {
    ring: Ring,
    nvars: usize,
    order: usize,
    terms: BTreeMap<Mono, Scalar>,
}

impl Series {
    pub fn zero(ring: Ring, nvars: usize, order: usize) -> Series {
        assert!(nvars <= MAX_VARS, "too many variables");
        Series { ring, nvars, order, terms: BTreeMap::new() }
    }

    pub fn constant(c: Scalar, nvars: usize, order: usize) -> Series {
        Series::monomial(nvars, Mono::one(), c, order)
    }

    pub fn one(ring: Ring, nvars: usize, order: usize) -> Series {
        Series::constant(ring.one(), nvars, order)
    }

    /// The coordinate `x_i`, zero-based.
    pub fn var(ring: Ring, nvars: usize, i: usize, order: usize) -> Series {
        Series::monomial(nvars, Mono::var(i), ring.one(), order)
    }

    pub fn monomial(nvars: usize, m: Mono, c: Scalar, order: usize) -> Series {
        let mut s = Series::zero(c.ring(), nvars, order);
        s.add_term(m, c);
        s
    }

    /// Builds from terms, summing duplicates and dropping anything above
    /// the order.
    pub fn from_terms<I: IntoIterator<Item = (Mono, Scalar)>>(ring: Ring, nvars: usize, order: usize, terms: I) -> Series {
        let mut s = Series::zero(ring, nvars, order);
        for (m, c) in terms {
            s.add_term(m, c);
        }
        s
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Scalar)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Mono) -> Scalar {
        self.terms.get(m).cloned().unwrap_or_else(|| self.ring.zero())
    }

    pub fn constant_term(&self) -> Scalar {
        self.coeff(&Mono::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Lowest degree carrying a nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.terms.keys().next().map(|m| m.degree())
    }

    /// Adds `c * m` in place; ignored above the order.
    pub fn add_term(&mut self, m: Mono, c: Scalar) {
        debug_assert_eq!(c.ring(), self.ring);
        if m.degree() > self.order || c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                *v += &c;
                if v.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    /// Lowers the trust order to `min(order, m)`.
    pub fn truncate(&self, m: usize) -> Series {
        let order = self.order.min(m);
        let terms = self.terms.iter().filter(|(k, _)| k.degree() <= order).map(|(k, v)| (*k, v.clone())).collect();
        Series { ring: self.ring, nvars: self.nvars, order, terms }
    }

    /// Overrides the trust order. Raising it asserts that the stored terms
    /// are the exact value (e.g. for polynomial inputs).
    pub fn with_order(&self, m: usize) -> Series {
        if m <= self.order {
            return self.truncate(m);
        }
        let mut s = self.clone();
        s.order = m;
        s
    }

    /// Homogeneous component of degree `d`.
    pub fn homogeneous(&self, d: usize) -> Series {
        let terms = self.terms.iter().filter(|(k, _)| k.degree() == d).map(|(k, v)| (*k, v.clone())).collect();
        Series { ring: self.ring, nvars: self.nvars, order: self.order, terms }
    }

    fn compatible(&self, o: &Series) -> Result<()> {
        if self.ring != o.ring {
            return Err(Error::RingMismatch(self.ring.to_string(), o.ring.to_string()));
        }
        if self.nvars != o.nvars {
            return Err(Error::NvarsMismatch(self.nvars, o.nvars));
        }
        Ok(())
    }

    pub fn checked_add(&self, o: &Series) -> Result<Series> {
        self.compatible(o)?;
        Ok(self.add_unchecked(o))
    }

    pub fn checked_mul(&self, o: &Series) -> Result<Series> {
        self.compatible(o)?;
        Ok(self.mul_unchecked(o))
    }

    fn add_unchecked(&self, o: &Series) -> Series {
        let mut s = self.truncate(o.order);
        for (m, c) in &o.terms {
            s.add_term(*m, c.clone());
        }
        s
    }

    fn mul_unchecked(&self, o: &Series) -> Series {
        let order = self.order.min(o.order);
        let mut acc: BTreeMap<Mono, Scalar> = BTreeMap::new();
        for (m1, c1) in &self.terms {
            let d1 = m1.degree();
            if d1 > order {
                break;
            }
            for (m2, c2) in &o.terms {
                if d1 + m2.degree() > order {
                    break;
                }
                let p = c1 * c2;
                let m = m1.mul(m2);
                match acc.get_mut(&m) {
                    Some(v) => *v += &p,
                    None => {
                        acc.insert(m, p);
                    }
                }
            }
        }
        acc.retain(|_, v| !v.is_zero());
        Series { ring: self.ring, nvars: self.nvars, order, terms: acc }
    }

    pub fn scale(&self, c: &Scalar) -> Series {
        if c.is_zero() {
            return Series::zero(self.ring, self.nvars, self.order);
        }
        let terms = self.terms.iter().map(|(m, v)| (*m, v * c)).collect();
        Series { ring: self.ring, nvars: self.nvars, order: self.order, terms }
    }

    /// Multiplies by a monomial, dropping what falls beyond the order.
    pub fn shift(&self, m: &Mono, c: &Scalar) -> Series {
        let mut s = Series::zero(self.ring, self.nvars, self.order);
        for (k, v) in &self.terms {
            s.add_term(k.mul(m), v * c);
        }
        s
    }

    pub fn pow(&self, e: u32) -> Series {
        let mut acc = Series::one(self.ring, self.nvars, self.order);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Substitutes `x_i := f_i`. Every `f_i` must have zero constant term.
    /// The result is exact modulo `m^(min order + 1)`.
    pub fn compose(&self, f: &[Series]) -> Result<Series> {
        if f.len() != self.nvars {
            return Err(Error::NvarsMismatch(self.nvars, f.len()));
        }
        let Some(g0) = f.first() else {
            return Ok(self.clone());
        };
        let (ring, m) = (g0.ring, g0.nvars);
        let mut order = self.order;
        for g in f {
            if g.ring != self.ring {
                return Err(Error::RingMismatch(self.ring.to_string(), g.ring.to_string()));
            }
            if g.nvars != m {
                return Err(Error::NvarsMismatch(m, g.nvars));
            }
            if !g.constant_term().is_zero() {
                return Err(Error::Precondition("substituted series must lie in m".into()));
            }
            order = order.min(g.order);
        }
        let f: Vec<Series> = f.iter().map(|g| g.truncate(order)).collect();
        let mut powers: Vec<Vec<Series>> = f.iter().map(|g| vec![Series::one(ring, m, order), g.clone()]).collect();
        let mut out = Series::zero(ring, m, order);
        for (mono, c) in &self.terms {
            if mono.degree() > order {
                break;
            }
            let mut t = Series::constant(c.clone(), m, order);
            for i in 0..self.nvars {
                let e = mono.exp(i) as usize;
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e {
                    let next = &powers[i][powers[i].len() - 1] * &f[i];
                    powers[i].push(next);
                }
                t = &t * &powers[i][e];
            }
            out = &out + &t;
        }
        Ok(out)
    }

    /// `d/dx_i`, zero-based; the trust order drops by one.
    pub fn partial(&self, i: usize) -> Result<Series> {
        if i >= self.nvars {
            return Err(Error::Invalid(format!("variable index {} out of range", i + 1)));
        }
        if self.order == 0 {
            return Err(Error::Precondition("cannot differentiate an order-0 series".into()));
        }
        let mut s = Series::zero(self.ring, self.nvars, self.order - 1);
        for (m, c) in &self.terms {
            if let Some(q) = m.div_var(i) {
                s.add_term(q, c.times(m.exp(i) as i64));
            }
        }
        Ok(s)
    }

    /// `(1/2) d^2/dx_i^2` via the integer rule `x^m -> C(m,2) x^(m-2)`,
    /// valid in every characteristic.
    pub fn half_second_partial(&self, i: usize) -> Result<Series> {
        if i >= self.nvars {
            return Err(Error::Invalid(format!("variable index {} out of range", i + 1)));
        }
        if self.order < 2 {
            return Err(Error::Precondition("need order at least 2".into()));
        }
        let mut s = Series::zero(self.ring, self.nvars, self.order - 2);
        for (m, c) in &self.terms {
            let e = m.exp(i) as i64;
            if e >= 2 {
                let q = m.div_var(i).and_then(|q| q.div_var(i)).expect("exponent at least 2");
                s.add_term(q, c.times(e * (e - 1) / 2));
            }
        }
        Ok(s)
    }

    /// The half Hessian: diagonal `(1/2) d_i^2 P`, off-diagonal `d_i d_j P`.
    pub fn half_hessian(&self) -> Result<Vec<Vec<Series>>> {
        let n = self.nvars;
        let mut h = vec![vec![Series::zero(self.ring, n, self.order.saturating_sub(2)); n]; n];
        for i in 0..n {
            for j in 0..n {
                h[i][j] = if i == j { self.half_second_partial(i)? } else { self.partial(i)?.partial(j)? };
            }
        }
        Ok(h)
    }

    /// Evaluates at the origin modulo nothing: the constant term.
    pub fn reduce_mod_m(&self) -> Scalar {
        self.constant_term()
    }

    /// Equality up to the shared trust order.
    pub fn agrees_with(&self, o: &Series) -> bool {
        if self.ring != o.ring || self.nvars != o.nvars {
            return false;
        }
        let m = self.order.min(o.order);
        let a = self.truncate(m);
        let b = o.truncate(m);
        a.terms == b.terms
    }

    /// Human readable form, highest terms last.
    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return format!("0 + O({})", self.order + 1);
        }
        let mut out = String::new();
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let text = c.to_string();
            let (neg, mag) = match text.strip_prefix('-') {
                Some(rest) => (true, rest.to_string()),
                None => (false, text),
            };
            let body = if m.degree() == 0 {
                mag
            } else if mag == "1" {
                m.render()
            } else {
                format!("{mag}*{}", m.render())
            };
            match (k, neg) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            out.push_str(&body);
        }
        format!("{out} + O({})", self.order + 1)
    }
}

impl PartialEq for Series {
    fn eq(&self, o: &Series) -> bool {
        self.agrees_with(o)
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

impl std::ops::Add for &Series {
    type Output = Series;
    fn add(self, o: &Series) -> Series {
        self.checked_add(o).expect("series mismatch")
    }
}

impl std::ops::Sub for &Series {
    type Output = Series;
    fn sub(self, o: &Series) -> Series {
        self.checked_add(&-o).expect("series mismatch")
    }
}

impl std::ops::Mul for &Series {
    type Output = Series;
    fn mul(self, o: &Series) -> Series {
        self.checked_mul(o).expect("series mismatch")
    }
}

impl std::ops::Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        let terms = self.terms.iter().map(|(m, v)| (*m, -v)).collect();
        Series { ring: self.ring, nvars: self.nvars, order: self.order, terms }
    }
}

/// Checks `P` lies in `m^2`: no constant or linear terms.
/// Parses a polynomial such as `"x1^2 - 3/2*x1*x2 + x2^3"`; terms above
/// `order` are dropped.
pub fn parse_polynomial(ring: Ring, n: usize, order: usize, text: &str) -> Result<Series> {
    let bad = |m: &str| Error::Parse(format!("{m} in {text:?}"));
    let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut out = Series::zero(ring, n, order);
    if cleaned.is_empty() || cleaned == "0" {
        return Ok(out);
    }
    let mut terms: Vec<(bool, String)> = Vec::new();
    let mut cur = String::new();
    let mut neg = false;
    for (i, ch) in cleaned.chars().enumerate() {
        if (ch == '+' || ch == '-') && i > 0 && !cur.ends_with('^') {
            terms.push((neg, std::mem::take(&mut cur)));
            neg = ch == '-';
        } else if (ch == '+' || ch == '-') && i == 0 {
            neg = ch == '-';
        } else {
            cur.push(ch);
        }
    }
    terms.push((neg, cur));
    for (neg, t) in terms {
        if t.is_empty() {
            return Err(bad("empty term"));
        }
        let mut coeff = ring.one();
        let mut exps = vec![0u32; n];
        for factor in t.split('*') {
            if let Some(rest) = factor.strip_prefix('x') {
                let (idx, e) = match rest.split_once('^') {
                    Some((i, e)) => (i, e.parse::<u32>().map_err(|_| bad("bad exponent"))?),
                    None => (rest, 1),
                };
                let i: usize = idx.parse().map_err(|_| bad("bad variable index"))?;
                if i == 0 || i > n {
                    return Err(bad("variable index out of range"));
                }
                exps[i - 1] += e;
            } else {
                coeff = &coeff * &Scalar::parse(ring, factor)?;
            }
        }
        if neg {
            coeff = -coeff;
        }
        let m = Mono::from_exps(&exps)?;
        if m.degree() <= order {
            out.add_term(m, coeff);
        }
    }
    Ok(out)
}

pub fn check_in_m2(p: &Series) -> Result<()> {
    if p.terms().any(|(m, _)| m.degree() < 2) {
        return Err(Error::Precondition("potential not in m^2".into()));
    }
    Ok(())
}

/// Multipliers solving `sum c_i g_i = target` in one homogeneous degree.
#[derive(Clone, Debug)]
pub struct IdealSolution {
    /// One particular solution (free parameters set to zero).
    pub coeffs: Vec<Series>,
    /// Basis of the homogeneous solutions.
    pub kernel: Vec<Vec<Series>>,
}

/// Solves for homogeneous `c_i` of degree `m - v_i`, where `v_i` is the
/// valuation of `g_i`, such that the degree-`m` part of `sum c_i g_i`
/// equals the degree-`m` part of `target`. Returns `None` if inconsistent.
pub fn ideal_solve(target: &Series, gens: &[Series], m: usize) -> Result<Option<IdealSolution>> {
    let ring = target.ring();
    let n = target.nvars();
    for g in gens {
        target.compatible(g)?;
    }
    let rows = monomials_of_degree(n, m);
    let row_idx: BTreeMap<Mono, usize> = rows.iter().enumerate().map(|(k, r)| (*r, k)).collect();
    // Unknown columns: (generator, monomial of the multiplier).
    let mut cols: Vec<(usize, Mono)> = Vec::new();
    for (gi, g) in gens.iter().enumerate() {
        if let Some(v) = g.valuation() {
            if v <= m {
                for mono in monomials_of_degree(n, m - v) {
                    cols.push((gi, mono));
                }
            }
        }
    }
    let mut a = Matrix::zeros(ring, rows.len(), cols.len());
    for (c, (gi, mono)) in cols.iter().enumerate() {
        let g = &gens[*gi];
        let v = g.valuation().unwrap_or(0);
        for (gm, gc) in g.terms() {
            if gm.degree() != v {
                continue;
            }
            let r = row_idx[&gm.mul(mono)];
            a.add_to(r, c, gc);
        }
    }
    let b: Vec<Scalar> = rows.iter().map(|r| target.coeff(r)).collect();
    let Some(x) = a.solve(&b) else {
        return Ok(None);
    };
    let build = |vec: &[Scalar]| -> Vec<Series> {
        let mut out: Vec<Series> = gens.iter().map(|_| Series::zero(ring, n, m)).collect();
        for (c, (gi, mono)) in cols.iter().enumerate() {
            out[*gi].add_term(*mono, vec[c].clone());
        }
        out
    };
    let kernel = a.kernel().iter().map(|k| build(k)).collect();
    Ok(Some(IdealSolution { coeffs: build(&x), kernel }))
}

/// Finite Laurent polynomial in `z_1..z_n`.
#[derive(Clone, Debug)]
pub struct Laurent {
    pub nvars: usize,
    pub terms: Vec<(Vec<i32>, Scalar)>,
}

/// Substitutes `z_i = rho_i (1 + x_i)` and expands to order `order`.
pub fn laurent_expand(l: &Laurent, rho: &[Scalar], order: usize) -> Result<Series> {
    let n = l.nvars;
    if rho.len() != n {
        return Err(Error::NvarsMismatch(n, rho.len()));
    }
    let ring = rho.first().map(|r| r.ring()).ok_or_else(|| Error::Invalid("no variables".into()))?;
    let mut rho_inv = Vec::with_capacity(n);
    for r in rho {
        rho_inv.push(r.inv().ok_or_else(|| Error::NotInvertible(format!("rho = {r}")))?);
    }
    let mut out = Series::zero(ring, n, order);
    for (exps, c) in &l.terms {
        if exps.len() != n {
            return Err(Error::NvarsMismatch(n, exps.len()));
        }
        let mut t = Series::constant(c.clone(), n, order);
        for (i, &e) in exps.iter().enumerate() {
            let base_scalar = if e >= 0 { &rho[i] } else { &rho_inv[i] };
            let x = Series::var(ring, n, i, order);
            let one = Series::one(ring, n, order);
            let lin = &one + &x;
            let base = if e >= 0 {
                lin
            } else {
                // (1 + x)^(-1) = sum (-x)^k
                let mut g = Series::zero(ring, n, order);
                let neg_x = -&x;
                let mut p = one.clone();
                for _ in 0..=order {
                    g = &g + &p;
                    p = &p * &neg_x;
                }
                g
            };
            t = t.scale(&base_scalar.pow(e.unsigned_abs()));
            t = &t * &base.pow(e.unsigned_abs());
        }
        out = &out + &t;
    }
    Ok(out)
}

/// Formal change of variables `f: V -> V`, components with zero constant
/// term.
#[derive(Clone, Debug, PartialEq)]
pub struct FormalDiffeo {
    comps: Vec<Series>,
}

impl FormalDiffeo {
    pub fn new(comps: Vec<Series>) -> Result<FormalDiffeo> {
        let n = comps.len();
        for c in &comps {
            if c.nvars() != n {
                return Err(Error::NvarsMismatch(n, c.nvars()));
            }
            if !c.constant_term().is_zero() {
                return Err(Error::Precondition("diffeomorphism components must lie in m".into()));
            }
        }
        if let Some(c0) = comps.first() {
            if comps.iter().any(|c| c.ring() != c0.ring()) {
                return Err(Error::RingMismatch(c0.ring().to_string(), "mixed".into()));
            }
        }
        Ok(FormalDiffeo { comps })
    }

    pub fn identity(ring: Ring, n: usize, order: usize) -> FormalDiffeo {
        FormalDiffeo { comps: (0..n).map(|i| Series::var(ring, n, i, order)).collect() }
    }

    pub fn components(&self) -> &[Series] {
        &self.comps
    }

    pub fn nvars(&self) -> usize {
        self.comps.len()
    }

    pub fn ring(&self) -> Ring {
        self.comps[0].ring()
    }

    pub fn order(&self) -> usize {
        self.comps.iter().map(|c| c.order()).min().unwrap_or(0)
    }

    /// `L[j][i]` is the coefficient of `x_i` in `f_j`.
    pub fn linear_part(&self) -> Matrix {
        let n = self.nvars();
        let mut l = Matrix::zeros(self.ring(), n, n);
        for (j, f) in self.comps.iter().enumerate() {
            for i in 0..n {
                l.set(j, i, f.coeff(&Mono::var(i)));
            }
        }
        l
    }

    /// `self ∘ g`, i.e. `x ↦ f(g(x))`.
    pub fn compose(&self, g: &FormalDiffeo) -> Result<FormalDiffeo> {
        let comps = self.comps.iter().map(|f| f.compose(&g.comps)).collect::<Result<Vec<_>>>()?;
        FormalDiffeo::new(comps)
    }

    /// Applies to a series: `P ∘ f`.
    pub fn pull_back(&self, p: &Series) -> Result<Series> {
        p.compose(&self.comps)
    }

    /// Two-sided inverse modulo `m^(order+1)`, built order by order.
    pub fn invert(&self) -> Result<FormalDiffeo> {
        let n = self.nvars();
        let ring = self.ring();
        let order = self.order();
        let linv = self.linear_part().inverse().ok_or_else(|| Error::NotInvertible("singular linear part".into()))?;
        let apply_linv = |v: &[Series]| -> Vec<Series> {
            (0..n)
                .map(|j| {
                    let mut s = Series::zero(ring, n, order);
                    for (i, vi) in v.iter().enumerate() {
                        s = &s + &vi.scale(&linv.get(j, i));
                    }
                    s
                })
                .collect()
        };
        let x: Vec<Series> = (0..n).map(|i| Series::var(ring, n, i, order)).collect();
        let mut g = apply_linv(&x);
        // Each step fixes one more degree.
        for _ in 1..order {
            let fg: Vec<Series> = self.comps.iter().map(|f| f.compose(&g)).collect::<Result<_>>()?;
            let err: Vec<Series> = fg.iter().zip(&x).map(|(a, b)| a - b).collect();
            if err.iter().all(|e| e.is_zero()) {
                break;
            }
            let corr = apply_linv(&err);
            g = g.iter().zip(&corr).map(|(a, c)| a - c).collect();
        }
        let inv = FormalDiffeo::new(g)?;
        let id = FormalDiffeo::identity(ring, n, order);
        if self.compose(&inv)? != id {
            return Err(Error::Internal("diffeomorphism inverse did not converge".into()));
        }
        Ok(inv)
    }

    /// Whether `f ≡ id` modulo `m^(d+1)`.
    pub fn is_identity_mod(&self, d: usize) -> bool {
        self.comps.iter().enumerate().all(|(j, f)| {
            let low_ok = f.terms().filter(|(m, _)| m.degree() <= d).all(|(m, c)| *m == Mono::var(j) && c.is_one());
            low_ok && (d == 0 || f.coeff(&Mono::var(j)).is_one())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64) -> Scalar {
        Scalar::from_i64(Ring::Q, n)
    }

    fn poly(ring: Ring, n: usize, order: usize, terms: &[(&[u32], i64)]) -> Series {
        Series::from_terms(ring, n, order, terms.iter().map(|(e, c)| (Mono::from_exps(e).unwrap(), Scalar::from_i64(ring, *c))))
    }

    /// Independent oracle: dense univariate polynomial arithmetic.
    fn uni_mul(a: &[i64], b: &[i64], order: usize) -> Vec<i64> {
        let mut out = vec![0; order + 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                if i + j <= order {
                    out[i + j] += x * y;
                }
            }
        }
        out
    }

    fn uni(ring: Ring, c: &[i64], order: usize) -> Series {
        Series::from_terms(
            ring,
            1,
            order,
            c.iter().enumerate().map(|(i, v)| (Mono::from_exps(&[i as u32]).unwrap(), Scalar::from_i64(ring, *v))),
        )
    }

    #[test]
    fn graded_lex_order() {
        let ms = monomials_up_to(2, 2);
        let r: Vec<String> = ms.iter().map(|m| m.render()).collect();
        assert_eq!(r, ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2"]);
    }

    #[test]
    fn mul_examples() {
        let a = poly(Ring::Q, 1, 3, &[(&[0], 1), (&[1], 1)]);
        let b = poly(Ring::Q, 1, 3, &[(&[0], 1), (&[1], -1)]);
        assert_eq!((&a * &b).render(), "1 - x1^2 + O(4)");
        let x = poly(Ring::Q, 1, 1, &[(&[1], 1)]);
        let xx = &x * &x;
        assert!(xx.is_zero());
        assert_eq!(xx.order(), 1);
        let f2 = Ring::fp(2).unwrap();
        let s = poly(f2, 2, 2, &[(&[1, 0], 1), (&[0, 1], 1)]);
        assert_eq!((&s * &s).render(), "x1^2 + x2^2 + O(3)");
    }

    #[test]
    fn compose_against_oracle() {
        // x^2 ∘ (x + x^2): oracle (x + x^2)^2 computed densely.
        let expected = uni_mul(&[0, 1, 1], &[0, 1, 1], 4);
        assert_eq!(expected, vec![0, 0, 1, 2, 1]);
        for ring in [Ring::Q, Ring::fp(2).unwrap()] {
            let p = uni(ring, &[0, 0, 1], 4);
            let f = FormalDiffeo::new(vec![uni(ring, &[0, 1, 1], 4)]).unwrap();
            let got = f.pull_back(&p).unwrap();
            assert_eq!(got, uni(ring, &expected, 4));
        }
        let f2 = Ring::fp(2).unwrap();
        let f = FormalDiffeo::new(vec![uni(f2, &[0, 1, 1], 4)]).unwrap();
        assert_eq!(f.pull_back(&uni(f2, &[0, 0, 1], 4)).unwrap().render(), "x1^2 + x1^4 + O(5)");
    }

    #[test]
    fn invert_against_oracle() {
        // Oracle: solve g = x - g^2 by fixed-point iteration on integer
        // coefficient vectors.
        let mut g = vec![0i64, 1, 0, 0, 0];
        for _ in 0..5 {
            let sq = uni_mul(&g, &g, 4);
            g = (0..5).map(|k| if k == 1 { 1 } else { 0 } - sq[k]).collect();
        }
        assert_eq!(g, vec![0, 1, -1, 2, -5]);
        let f = FormalDiffeo::new(vec![uni(Ring::Q, &[0, 1, 1], 4)]).unwrap();
        let inv = f.invert().unwrap();
        assert_eq!(inv.components()[0], uni(Ring::Q, &g, 4));
        let two = FormalDiffeo::new(vec![uni(Ring::Q, &[0, 2], 3)]).unwrap();
        let half = two.invert().unwrap();
        assert_eq!(half.components()[0].coeff(&Mono::var(0)), Scalar::from_frac(Ring::Q, 1, 2).unwrap());
        let sing = FormalDiffeo::new(vec![uni(Ring::Q, &[0, 0, 1], 3)]).unwrap();
        assert!(sing.invert().is_err());
    }

    #[test]
    fn derivatives() {
        let p = poly(Ring::Q, 2, 3, &[(&[1, 1], 1)]);
        assert_eq!(p.partial(0).unwrap(), poly(Ring::Q, 2, 2, &[(&[0, 1], 1)]));
        let f2 = Ring::fp(2).unwrap();
        assert!(uni(f2, &[0, 0, 1], 3).partial(0).unwrap().is_zero());
        let f3 = Ring::fp(3).unwrap();
        assert!(uni(f3, &[0, 0, 0, 1], 4).partial(0).unwrap().is_zero());
    }

    #[test]
    fn half_hessian_examples() {
        let p = poly(Ring::Q, 2, 3, &[(&[1, 1], 1)]);
        let h = p.half_hessian().unwrap();
        assert!(h[0][0].is_zero() && h[1][1].is_zero());
        assert_eq!(h[0][1].constant_term(), q(1));
        let f2 = Ring::fp(2).unwrap();
        let h2 = uni(f2, &[0, 0, 1], 3).half_hessian().unwrap();
        assert!(h2[0][0].constant_term().is_one());
        // binomial oracle: C(4,2) = 6
        let h4 = uni(Ring::Q, &[0, 0, 0, 0, 1], 5).half_hessian().unwrap();
        assert_eq!(h4[0][0], uni(Ring::Q, &[0, 0, 6], 3));
    }

    #[test]
    fn ideal_solve_examples() {
        let x = uni(Ring::Q, &[0, 1], 3);
        let t = uni(Ring::Q, &[0, 0, 1], 3);
        let s = ideal_solve(&t, std::slice::from_ref(&x), 2).unwrap().unwrap();
        assert_eq!(s.coeffs[0], uni(Ring::Q, &[0, 1], 2));
        assert!(s.kernel.is_empty());
        let x2 = uni(Ring::Q, &[0, 0, 1], 3);
        assert!(ideal_solve(&x, &[x2], 1).unwrap().is_none());
        let x1x2 = poly(Ring::Q, 2, 3, &[(&[1, 1], 1)]);
        let g1 = poly(Ring::Q, 2, 3, &[(&[1, 0], 1)]);
        let g2 = poly(Ring::Q, 2, 3, &[(&[0, 1], 1)]);
        let s = ideal_solve(&x1x2, &[g1, g2], 2).unwrap().unwrap();
        assert_eq!(s.coeffs[0], poly(Ring::Q, 2, 2, &[(&[0, 1], 1)]));
        assert!(s.coeffs[1].is_zero());
        assert_eq!(s.kernel.len(), 1);
        let k = &s.kernel[0];
        // proportional to (x2, -x1)
        let a = k[0].coeff(&Mono::from_exps(&[0, 1]).unwrap());
        let b = k[1].coeff(&Mono::from_exps(&[1, 0]).unwrap());
        assert!(!a.is_zero());
        assert_eq!(b, -a.clone());
        assert_eq!(k[0].num_terms() + k[1].num_terms(), 2);
    }

    #[test]
    fn laurent_examples() {
        let l = Laurent { nvars: 1, terms: vec![(vec![1], q(1)), (vec![-1], q(1)), (vec![0], q(-2))] };
        let s = laurent_expand(&l, &[q(1)], 4).unwrap();
        assert_eq!(s, uni(Ring::Q, &[0, 0, 1, -1, 1], 4));
        let z = Laurent { nvars: 1, terms: vec![(vec![1], q(1))] };
        assert_eq!(laurent_expand(&z, &[q(1)], 3).unwrap(), uni(Ring::Q, &[1, 1], 3));
        let zz = Laurent { nvars: 2, terms: vec![(vec![1, 1], q(1))] };
        let s = laurent_expand(&zz, &[q(1), q(1)], 2).unwrap();
        assert_eq!(s, poly(Ring::Q, 2, 2, &[(&[0, 0], 1), (&[1, 0], 1), (&[0, 1], 1), (&[1, 1], 1)]));
        let f2 = Ring::fp(2).unwrap();
        assert!(laurent_expand(&z, &[Scalar::from_i64(f2, 0)], 2).is_err());
    }

    fn arb_series(ring: Ring, n: usize, order: usize) -> impl Strategy<Value = Series> {
        let ms = monomials_up_to(n, order);
        prop::collection::vec(-3i64..=3, ms.len())
            .prop_map(move |cs| Series::from_terms(ring, n, order, ms.iter().zip(cs).map(|(m, c)| (*m, Scalar::from_i64(ring, c)))))
    }

    fn arb_diffeo(ring: Ring, n: usize, order: usize) -> impl Strategy<Value = FormalDiffeo> {
        prop::collection::vec(arb_series(ring, n, order), n).prop_map(move |cs| {
            let comps = cs
                .into_iter()
                .enumerate()
                .map(|(j, c)| {
                    let mut t =
                        Series::from_terms(ring, n, order, c.terms().filter(|(m, _)| m.degree() >= 2).map(|(m, v)| (*m, v.clone())));
                    t.add_term(Mono::var(j), ring.one());
                    t
                })
                .collect();
            FormalDiffeo::new(comps).unwrap()
        })
    }

    proptest! {
        #[test]
        fn ring_axioms(a in arb_series(Ring::Q, 2, 4), b in arb_series(Ring::Q, 2, 4), c in arb_series(Ring::Q, 2, 4)) {
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        }

        #[test]
        fn leibniz(a in arb_series(Ring::fp(3).unwrap(), 2, 4), b in arb_series(Ring::fp(3).unwrap(), 2, 4)) {
            let lhs = (&a * &b).partial(0).unwrap();
            let rhs = &(&a.partial(0).unwrap() * &b) + &(&a * &b.partial(0).unwrap());
            prop_assert_eq!(lhs.order(), 3);
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn composition_associative(p in arb_series(Ring::Q, 2, 4), f in arb_diffeo(Ring::Q, 2, 4), g in arb_diffeo(Ring::Q, 2, 4)) {
            let fg = f.compose(&g).unwrap();
            let lhs = fg.pull_back(&p).unwrap();
            let rhs = g.pull_back(&f.pull_back(&p).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn invert_round_trip(f in arb_diffeo(Ring::fp(5).unwrap(), 2, 4)) {
            let inv = f.invert().unwrap();
            let id = FormalDiffeo::identity(f.ring(), 2, 4);
            prop_assert_eq!(f.compose(&inv).unwrap(), id.clone());
            prop_assert_eq!(inv.compose(&f).unwrap(), id);
        }

        #[test]
        fn half_hessian_doubles(p in arb_series(Ring::Q, 2, 5)) {
            let h = p.half_hessian().unwrap();
            for i in 0..2 {
                let d2 = p.partial(i).unwrap().partial(i).unwrap();
                prop_assert_eq!(h[i][i].scale(&q(2)), d2);
            }
        }

        #[test]
        fn trust_order_formula(a in arb_series(Ring::Q, 2, 3), b in arb_series(Ring::Q, 2, 5)) {
            let m = &a * &b;
            prop_assert_eq!(m.order(), 3);
            prop_assert!(m.terms().all(|(k, _)| k.degree() <= 3));
            prop_assert_eq!((&a + &b).order(), 3);
            prop_assert_eq!(b.partial(1).unwrap().order(), 4);
        }
    }
}
