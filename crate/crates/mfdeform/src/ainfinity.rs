//! Superfiltered A∞-deformations of `E` as finite operation tables.
//!
//! Inputs are written right to left as `(a_k, ..., a_1)` and stored in that
//! order, index 0 being `a_k`. Signs follow the reduced-degree convention:
//! `||a|| = |a| - 1`, and a map of odd degree passing elements picks up
//! `(-1)^{Σ ||a_j||}` over the elements to its right. The relations read
//! `Σ (-1)^{✠_i} μ(a_d, ..., μ(a_{i+m}, ..., a_{i+1}), a_i, ..., a_1) = 0`
//! with `✠_i = Σ_{j ≤ i} ||a_j||`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::exterior::{all_blades, canonical_v, Blade, Ext, ExtR};
use crate::linalg::Matrix;
use crate::scalar::{sign, Ring, Scalar};
use crate::series::{FormalDiffeo, Mono, Series};

/// Longest supported input tuple.
pub const MAX_ARITY: usize = 15;

/// Packs a tuple of blades (each below 256) into a hash key.
pub fn tuple_key(t: &[Blade]) -> u128 {
    debug_assert!(t.len() <= MAX_ARITY);
    let mut k: u128 = t.len() as u128;
    for (i, b) in t.iter().enumerate() {
        k |= (b.0 as u128) << (8 * (i + 1));
    }
    k
}

pub fn key_tuple(k: u128) -> Vec<Blade> {
    let len = (k & 0xff) as usize;
    (0..len).map(|i| Blade(((k >> (8 * (i + 1))) & 0xff) as u32)).collect()
}

/// Reduced degree parity `||a|| mod 2` of a basis element.
pub fn shifted(b: Blade) -> usize {
    (b.grade() + 1) % 2
}

/// Calls `f` on every tuple of `k` blades drawn from `basis`.
pub fn for_each_tuple<F: FnMut(&[Blade])>(basis: &[Blade], k: usize, mut f: F) {
    if k == 0 {
        f(&[]);
        return;
    }
    let mut idx = vec![0usize; k];
    let mut t: Vec<Blade> = vec![basis[0]; k];
    loop {
        f(&t);
        let mut p = k;
        loop {
            if p == 0 {
                return;
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < basis.len() {
                t[p] = basis[idx[p]];
                break;
            }
            idx[p] = 0;
            t[p] = basis[0];
        }
    }
}

/// Outcome of a verification pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// The range the check covers, e.g. "arity <= 5".
    pub certified: String,
    pub failures: Vec<String>,
    pub checked: usize,
}

const MAX_LISTED: usize = 10;

impl CheckReport {
    pub fn new(name: &str, certified: String) -> CheckReport {
        CheckReport { name: name.into(), passed: true, certified, failures: Vec::new(), checked: 0 }
    }

    pub fn fail(&mut self, msg: String) {
        self.passed = false;
        if self.failures.len() < MAX_LISTED {
            self.failures.push(msg);
        }
    }

    pub fn tick(&mut self) {
        self.checked += 1;
    }

    pub fn merge(&mut self, o: CheckReport) {
        self.checked += o.checked;
        if !o.passed {
            self.passed = false;
            for f in o.failures {
                if self.failures.len() < MAX_LISTED {
                    self.failures.push(format!("{}: {f}", o.name));
                }
            }
        }
    }

    pub fn first_failure(&self) -> Option<&str> {
        self.failures.first().map(|s| s.as_str())
    }
}

pub fn render_tuple(t: &[Blade]) -> String {
    let s: Vec<String> = t.iter().map(|b| b.render()).collect();
    format!("({})", s.join(", "))
}

/// Superfiltered A∞-deformation of `E`, tabulated on basis tuples.
#[derive(Clone, Debug)]
pub struct AInfinity {
    ring: Ring,
    nvars: usize,
    order: usize,
    arity_cap: usize,
    ops: HashMap<u128, Ext>,
}

impl AInfinity {
    pub fn empty(ring: Ring, nvars: usize, order: usize, arity_cap: usize) -> AInfinity {
        AInfinity { ring, nvars, order, arity_cap, ops: HashMap::new() }
    }

    /// The exterior algebra: `μ²(a_2, a_1) = (-1)^{|a_1|} a_2 ∧ a_1`.
    pub fn formal(ring: Ring, nvars: usize, order: usize, arity_cap: usize) -> AInfinity {
        let mut a = AInfinity::empty(ring, nvars, order, arity_cap);
        let basis = all_blades(nvars);
        for &x in &basis {
            for &y in &basis {
                a.set(&[x, y], formal_mu2(ring, nvars, x, y));
            }
        }
        a
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

    pub fn arity_cap(&self) -> usize {
        self.arity_cap
    }

    pub fn set_order(&mut self, order: usize) {
        self.order = order;
    }

    pub fn set(&mut self, inputs: &[Blade], out: Ext) {
        let key = tuple_key(inputs);
        if out.is_zero() {
            self.ops.remove(&key);
        } else {
            self.ops.insert(key, out);
        }
    }

    /// `μ^k` on a basis tuple; zero for `k < 2`, beyond the cap, or when
    /// not tabulated.
    pub fn mu(&self, inputs: &[Blade]) -> Option<&Ext> {
        if inputs.len() < 2 || inputs.len() > self.arity_cap {
            return None;
        }
        self.ops.get(&tuple_key(inputs))
    }

    pub fn mu_or_zero(&self, inputs: &[Blade]) -> Ext {
        self.mu(inputs).cloned().unwrap_or_else(|| Ext::zero(self.nvars))
    }

    /// Tabulated entries sorted by arity, then by tuple.
    pub fn entries(&self) -> Vec<(Vec<Blade>, &Ext)> {
        let mut v: Vec<(Vec<Blade>, &Ext)> = self.ops.iter().map(|(k, e)| (key_tuple(*k), e)).collect();
        v.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        v
    }

    /// Multilinear extension to arbitrary elements of `E`.
    pub fn mu_ext(&self, inputs: &[&Ext]) -> Ext {
        let mut out = Ext::zero(self.nvars);
        let k = inputs.len();
        if k < 2 || k > self.arity_cap || inputs.iter().any(|x| x.is_zero()) {
            return out;
        }
        let terms: Vec<Vec<(Blade, Scalar)>> = inputs.iter().map(|x| x.terms().map(|(b, c)| (*b, c.clone())).collect()).collect();
        let mut idx = vec![0usize; k];
        let mut t = vec![Blade::EMPTY; k];
        loop {
            let mut c = self.ring.one();
            for p in 0..k {
                t[p] = terms[p][idx[p]].0;
                c = &c * &terms[p][idx[p]].1;
            }
            if let Some(v) = self.mu(&t) {
                out = out.add(&v.scale_scalar(&c));
            }
            let mut p = k;
            loop {
                if p == 0 {
                    return out;
                }
                p -= 1;
                idx[p] += 1;
                if idx[p] < terms[p].len() {
                    break;
                }
                idx[p] = 0;
            }
        }
    }

    /// `R`-multilinear extension to elements of `E_R`, exact to `order`.
    pub fn mu_r(&self, inputs: &[&ExtR], order: usize) -> ExtR {
        let n = self.nvars;
        let mut out = ExtR::zero(n);
        let k = inputs.len();
        if k < 2 || k > self.arity_cap || inputs.iter().any(|x| x.is_zero()) {
            return out;
        }
        let terms: Vec<Vec<(Blade, Series)>> = inputs.iter().map(|x| x.terms().map(|(b, c)| (*b, c.truncate(order))).collect()).collect();
        let mut idx = vec![0usize; k];
        let mut t = vec![Blade::EMPTY; k];
        loop {
            for p in 0..k {
                t[p] = terms[p][idx[p]].0;
            }
            if let Some(v) = self.mu(&t) {
                let mut c = Series::one(self.ring, n, order);
                for p in 0..k {
                    c = &c * &terms[p][idx[p]].1;
                    if c.is_zero() {
                        break;
                    }
                }
                if !c.is_zero() {
                    for (b, s) in v.terms() {
                        out.add_term(*b, c.scale(s));
                    }
                }
            }
            let mut p = k;
            loop {
                if p == 0 {
                    return out;
                }
                p -= 1;
                idx[p] += 1;
                if idx[p] < terms[p].len() {
                    break;
                }
                idx[p] = 0;
            }
        }
    }

    /// Sum of `μ^{k+l}` with `l` copies of `𝐯` inserted according to
    /// `slots`: `slots[j]` copies sit to the right of input `j` counted from
    /// the right end (slot 0 is right of `a_1`, slot `k` left of `a_k`).
    fn mu_with_insertions(&self, inputs: &[&ExtR], slots: &[usize], order: usize) -> ExtR {
        let n = self.nvars;
        let k = inputs.len();
        let total: usize = slots.iter().sum();
        let arity = k + total;
        let mut out = ExtR::zero(n);
        if arity < 2 || arity > self.arity_cap {
            return out;
        }
        // Expand each v insertion over its n basis terms; the monomial
        // coefficient is accumulated separately from the input series.
        let mut v_idx = vec![0usize; total];
        loop {
            let mut tuple: Vec<Blade> = Vec::with_capacity(arity);
            let mut mono = Mono::one();
            let mut vi = 0;
            // Build left to right: slot k, a_k, slot k-1, ..., a_1, slot 0.
            for s in (0..=k).rev() {
                for _ in 0..slots[s] {
                    tuple.push(Blade::single(v_idx[vi] + 1));
                    mono = mono.mul(&Mono::var(v_idx[vi]));
                    vi += 1;
                }
                if s > 0 {
                    tuple.push(Blade::EMPTY);
                }
            }
            if mono.degree() <= order {
                // Expand the genuine inputs.
                let positions: Vec<usize> = {
                    let mut pos = Vec::with_capacity(k);
                    let mut p = 0;
                    for s in (0..=k).rev() {
                        p += slots[s];
                        if s > 0 {
                            pos.push(p);
                            p += 1;
                        }
                    }
                    pos
                };
                let terms: Vec<Vec<(Blade, &Series)>> = inputs.iter().map(|x| x.terms().map(|(b, c)| (*b, c)).collect()).collect();
                if terms.iter().all(|t| !t.is_empty()) {
                    let mut idx = vec![0usize; k];
                    'outer: loop {
                        for p in 0..k {
                            tuple[positions[p]] = terms[p][idx[p]].0;
                        }
                        if let Some(v) = self.mu(&tuple) {
                            let mut c = Series::monomial(n, mono, self.ring.one(), order);
                            for p in 0..k {
                                c = &c * terms[p][idx[p]].1;
                            }
                            if !c.is_zero() {
                                for (b, s) in v.terms() {
                                    out.add_term(*b, c.scale(s));
                                }
                            }
                        }
                        let mut p = k;
                        loop {
                            if p == 0 {
                                break 'outer;
                            }
                            p -= 1;
                            idx[p] += 1;
                            if idx[p] < terms[p].len() {
                                break;
                            }
                            idx[p] = 0;
                        }
                    }
                }
            }
            let mut p = total;
            loop {
                if p == 0 {
                    return out;
                }
                p -= 1;
                v_idx[p] += 1;
                if v_idx[p] < n {
                    break;
                }
                v_idx[p] = 0;
            }
        }
    }

    /// `μ_{0,𝐯}^k(a_k, ..., a_1) = Σ_l μ^{k+l}(a_k, ..., a_1, 𝐯, ..., 𝐯)`,
    /// exact modulo `m^(order+1)`.
    pub fn mu_0v(&self, inputs: &[&ExtR], order: usize) -> Result<ExtR> {
        let k = inputs.len();
        if k + order > self.arity_cap {
            return Err(Error::ArityCap { needed: k + order, cap: self.arity_cap });
        }
        let mut out = ExtR::zero(self.nvars);
        for l in 0..=order {
            let mut slots = vec![0; k + 1];
            slots[0] = l;
            out = out.add(&self.mu_with_insertions(inputs, &slots, order));
        }
        Ok(out.truncate(order))
    }

    /// `μ_𝐯^k`: `𝐯` inserted in all gaps, exact modulo `m^(order+1)`.
    pub fn mu_v(&self, inputs: &[&ExtR], order: usize) -> Result<ExtR> {
        let k = inputs.len();
        if k + order > self.arity_cap {
            return Err(Error::ArityCap { needed: k + order, cap: self.arity_cap });
        }
        let mut out = ExtR::zero(self.nvars);
        for l in 0..=order {
            for slots in compositions(l, k + 1) {
                out = out.add(&self.mu_with_insertions(inputs, &slots, order));
            }
        }
        Ok(out.truncate(order))
    }

    /// `𝔓 = Σ_{k=2}^{N} μ^k(𝐯, ..., 𝐯)` with trust order `N`.
    pub fn disc_potential(&self) -> Result<Series> {
        let n = self.nvars;
        let order = self.order;
        if self.arity_cap < order {
            return Err(Error::Precondition(format!("arity cap {} below series order {order}", self.arity_cap)));
        }
        let mut acc = ExtR::zero(n);
        let basis: Vec<Blade> = (1..=n).map(Blade::single).collect();
        for k in 2..=order {
            for_each_tuple(&basis, k, |t| {
                let Some(v) = self.mu(t) else { return };
                let mut mono = Mono::one();
                for b in t {
                    mono = mono.mul(&Mono::var(b.indices()[0] - 1));
                }
                for (b, c) in v.terms() {
                    acc.add_term(*b, Series::monomial(n, mono, c.clone(), order));
                }
            });
        }
        if let Some((b, _)) = acc.terms().find(|(b, _)| !b.is_empty()) {
            return Err(Error::Invalid(format!("disc potential has a non-scalar component along {}", b.render())));
        }
        let p = acc.get(&Blade::EMPTY).cloned().unwrap_or_else(|| Series::zero(self.ring, n, order));
        Ok(p)
    }

    /// Verifies the A∞-relations on every basis tuple of arity `<= max_arity`.
    pub fn check_ainfinity(&self, max_arity: usize) -> CheckReport {
        let mut rep = CheckReport::new("ainfinity", format!("arity <= {max_arity}"));
        if max_arity > self.arity_cap + 1 {
            rep.fail(format!("requested arity {max_arity} exceeds cap {} + 1", self.arity_cap));
            return rep;
        }
        let basis = all_blades(self.nvars);
        for d in 3..=max_arity {
            for_each_tuple(&basis, d, |t| {
                rep.tick();
                let v = self.relation_value(t);
                if !v.is_zero() {
                    rep.fail(format!("relation at {} = {v}", render_tuple(t)));
                }
            });
        }
        rep
    }

    /// Left-hand side of the A∞-relation at a basis tuple `(a_d, ..., a_1)`.
    pub fn relation_value(&self, t: &[Blade]) -> Ext {
        let d = t.len();
        let mut total = Ext::zero(self.nvars);
        // a_j sits at position d - j.
        for m in 2..d {
            let mut star = 0usize;
            for i in 0..=(d - m) {
                if i > 0 {
                    star += shifted(t[d - i]);
                }
                // inner inputs a_{i+m}..a_{i+1} occupy positions d-i-m .. d-i-1
                let lo = d - i - m;
                let Some(inner) = self.mu(&t[lo..lo + m]) else { continue };
                let mut outer: Vec<Blade> = Vec::with_capacity(d - m + 1);
                outer.extend_from_slice(&t[..lo]);
                outer.push(Blade::EMPTY);
                outer.extend_from_slice(&t[lo + m..]);
                for (b, c) in inner.terms() {
                    outer[lo] = *b;
                    if let Some(o) = self.mu(&outer) {
                        let s = c * &sign(self.ring, star);
                        total = total.add(&o.scale_scalar(&s));
                    }
                }
            }
        }
        total
    }

    /// Checks degree, filtration, associated-graded and unitality
    /// conditions on the whole table.
    pub fn check_superfiltered_unital(&self) -> CheckReport {
        let mut rep = CheckReport::new("superfiltered-unital", format!("arity <= {}", self.arity_cap));
        let n = self.nvars;
        for (t, v) in self.entries() {
            rep.tick();
            let k = t.len();
            if k < 2 || k > self.arity_cap {
                rep.fail(format!("entry of arity {k} outside 2..={}", self.arity_cap));
                continue;
            }
            let sum: usize = t.iter().map(|b| b.grade()).sum();
            let want_parity = (sum + k) % 2;
            if v.parity() != Some(want_parity) {
                rep.fail(format!("parity violated at {}", render_tuple(&t)));
            }
            let top = (sum + 2) as i64 - k as i64;
            if let Some(l) = v.filtration_level() {
                if l as i64 > top {
                    rep.fail(format!("filtration violated at {}: level {l} > {top}", render_tuple(&t)));
                }
            }
            if k >= 3 && top >= 0 && !v.grade_part(top as usize).is_zero() {
                rep.fail(format!("associated graded of mu^{k} nonzero at {}", render_tuple(&t)));
            }
            if k >= 3 && t.iter().any(|b| b.is_empty()) {
                rep.fail(format!("strict unitality: mu^{k} nonzero on unit at {}", render_tuple(&t)));
            }
        }
        let basis = all_blades(n);
        for &x in &basis {
            for &y in &basis {
                rep.tick();
                let v = self.mu_or_zero(&[x, y]);
                let top = x.grade() + y.grade();
                let want = formal_mu2(self.ring, n, x, y);
                if v.grade_part(top) != want {
                    rep.fail(format!("associated graded of mu^2 differs from signed wedge at {}", render_tuple(&[x, y])));
                }
                if y.is_empty() && v != Ext::blade(self.ring, n, x) {
                    rep.fail(format!("strict unitality: mu^2({}, 1) != {}", x.render(), x.render()));
                }
                if x.is_empty() && v != Ext::blade(self.ring, n, y).scale_scalar(&sign(self.ring, y.grade())) {
                    rep.fail(format!("strict unitality: mu^2(1, {}) wrong sign", y.render()));
                }
            }
        }
        rep
    }
}

/// `(-1)^{|y|} x ∧ y` on basis elements.
pub fn formal_mu2(ring: Ring, n: usize, x: Blade, y: Blade) -> Ext {
    Ext::blade(ring, n, x).wedge(&Ext::blade(ring, n, y)).scale_scalar(&sign(ring, y.grade()))
}

/// All ways to write `total` as an ordered sum of `parts` nonnegative parts.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            let mut v = vec![first];
            v.append(&mut rest);
            out.push(v);
        }
    }
    out
}

/// Ordered sums `s_r + ... + s_1 = k` with positive parts, listed as
/// `[s_r, ..., s_1]`.
pub fn positive_compositions(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 1..=k {
        for mut rest in positive_compositions(k - first) {
            let mut v = vec![first];
            v.append(&mut rest);
            out.push(v);
        }
    }
    out
}

/// A∞-morphism between deformations of `E`, components `Φ^k` for
/// `1 <= k <= arity_cap` on basis tuples.
#[derive(Clone, Debug)]
pub struct AInfMorphism {
    ring: Ring,
    nvars: usize,
    order: usize,
    arity_cap: usize,
    comps: HashMap<u128, Ext>,
}

impl AInfMorphism {
    pub fn empty(ring: Ring, nvars: usize, order: usize, arity_cap: usize) -> AInfMorphism {
        AInfMorphism { ring, nvars, order, arity_cap, comps: HashMap::new() }
    }

    pub fn identity(ring: Ring, nvars: usize, order: usize, arity_cap: usize) -> AInfMorphism {
        let mut f = AInfMorphism::empty(ring, nvars, order, arity_cap);
        for b in all_blades(nvars) {
            f.set(&[b], Ext::blade(ring, nvars, b));
        }
        f
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

    pub fn arity_cap(&self) -> usize {
        self.arity_cap
    }

    pub fn set(&mut self, inputs: &[Blade], out: Ext) {
        let key = tuple_key(inputs);
        if out.is_zero() {
            self.comps.remove(&key);
        } else {
            self.comps.insert(key, out);
        }
    }

    pub fn get(&self, inputs: &[Blade]) -> Option<&Ext> {
        if inputs.is_empty() || inputs.len() > self.arity_cap {
            return None;
        }
        self.comps.get(&tuple_key(inputs))
    }

    pub fn entries(&self) -> Vec<(Vec<Blade>, &Ext)> {
        let mut v: Vec<(Vec<Blade>, &Ext)> = self.comps.iter().map(|(k, e)| (key_tuple(*k), e)).collect();
        v.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        v
    }

    /// Multilinear extension of `Φ^k`.
    pub fn apply_ext(&self, inputs: &[&Ext]) -> Ext {
        let mut out = Ext::zero(self.nvars);
        let k = inputs.len();
        if k == 0 || k > self.arity_cap || inputs.iter().any(|x| x.is_zero()) {
            return out;
        }
        let terms: Vec<Vec<(Blade, Scalar)>> = inputs.iter().map(|x| x.terms().map(|(b, c)| (*b, c.clone())).collect()).collect();
        let mut idx = vec![0usize; k];
        let mut t = vec![Blade::EMPTY; k];
        loop {
            let mut c = self.ring.one();
            for p in 0..k {
                t[p] = terms[p][idx[p]].0;
                c = &c * &terms[p][idx[p]].1;
            }
            if let Some(v) = self.get(&t) {
                out = out.add(&v.scale_scalar(&c));
            }
            let mut p = k;
            loop {
                if p == 0 {
                    return out;
                }
                p -= 1;
                idx[p] += 1;
                if idx[p] < terms[p].len() {
                    break;
                }
                idx[p] = 0;
            }
        }
    }

    /// `(self ∘ phi)^k = Σ self^r(phi^{s_r}(...), ..., phi^{s_1}(...))`.
    pub fn compose(&self, phi: &AInfMorphism) -> Result<AInfMorphism> {
        if self.nvars != phi.nvars || self.ring != phi.ring {
            return Err(Error::Invalid("morphisms act on different algebras".into()));
        }
        let cap = self.arity_cap.min(phi.arity_cap);
        let mut out = AInfMorphism::empty(self.ring, self.nvars, self.order.min(phi.order), cap);
        let basis = all_blades(self.nvars);
        for k in 1..=cap {
            let comps = positive_compositions(k);
            for_each_tuple(&basis, k, |t| {
                let mut acc = Ext::zero(self.nvars);
                for s in &comps {
                    let mut pieces = Vec::with_capacity(s.len());
                    let mut pos = 0;
                    for &len in s {
                        pieces.push(phi.get(&t[pos..pos + len]).cloned().unwrap_or_else(|| Ext::zero(self.nvars)));
                        pos += len;
                    }
                    let refs: Vec<&Ext> = pieces.iter().collect();
                    acc = acc.add(&self.apply_ext(&refs));
                }
                out.set(t, acc);
            });
        }
        Ok(out)
    }

    /// `f_Φ = Σ_k Φ^k(𝐯, ..., 𝐯)`, read off from the grade-1 part.
    pub fn change_of_vars(&self) -> Result<FormalDiffeo> {
        let n = self.nvars;
        let order = self.order;
        let mut comps: Vec<Series> = (0..n).map(|_| Series::zero(self.ring, n, order)).collect();
        let basis: Vec<Blade> = (1..=n).map(Blade::single).collect();
        let mut bad = None;
        for k in 1..=order.min(self.arity_cap) {
            for_each_tuple(&basis, k, |t| {
                let Some(v) = self.get(t) else { return };
                let mut mono = Mono::one();
                for b in t {
                    mono = mono.mul(&Mono::var(b.indices()[0] - 1));
                }
                for (b, c) in v.terms() {
                    if b.grade() == 1 {
                        comps[b.indices()[0] - 1].add_term(mono, c.clone());
                    } else if bad.is_none() {
                        bad = Some(render_tuple(t));
                    }
                }
            });
        }
        if let Some(t) = bad {
            return Err(Error::Invalid(format!("morphism output outside grade 1 at {t}")));
        }
        FormalDiffeo::new(comps)
    }

    /// Checks the morphism equations from `src` to `tgt` on all basis
    /// tuples of arity `<= max_arity`.
    pub fn check_morphism(&self, src: &AInfinity, tgt: &AInfinity, max_arity: usize) -> CheckReport {
        let mut rep = CheckReport::new("morphism", format!("arity <= {max_arity}"));
        let basis = all_blades(self.nvars);
        for d in 1..=max_arity {
            let comps = positive_compositions(d);
            for_each_tuple(&basis, d, |t| {
                rep.tick();
                let v = self.morphism_defect(src, tgt, t, &comps);
                if !v.is_zero() {
                    rep.fail(format!("morphism equation at {} off by {v}", render_tuple(t)));
                }
            });
        }
        rep
    }

    fn morphism_defect(&self, src: &AInfinity, tgt: &AInfinity, t: &[Blade], comps: &[Vec<usize>]) -> Ext {
        let n = self.nvars;
        let d = t.len();
        let mut lhs = Ext::zero(n);
        for s in comps {
            if s.len() < 2 {
                continue;
            }
            let mut pieces = Vec::with_capacity(s.len());
            let mut pos = 0;
            for &len in s {
                pieces.push(self.get(&t[pos..pos + len]).cloned().unwrap_or_else(|| Ext::zero(n)));
                pos += len;
            }
            let refs: Vec<&Ext> = pieces.iter().collect();
            lhs = lhs.add(&tgt.mu_ext(&refs));
        }
        let mut rhs = Ext::zero(n);
        for m in 2..=d {
            let mut star = 0usize;
            for i in 0..=(d - m) {
                if i > 0 {
                    star += shifted(t[d - i]);
                }
                let lo = d - i - m;
                let Some(inner) = src.mu(&t[lo..lo + m]) else { continue };
                let mut outer: Vec<Blade> = Vec::with_capacity(d - m + 1);
                outer.extend_from_slice(&t[..lo]);
                outer.push(Blade::EMPTY);
                outer.extend_from_slice(&t[lo + m..]);
                for (b, c) in inner.terms() {
                    outer[lo] = *b;
                    if let Some(o) = self.get(&outer) {
                        rhs = rhs.add(&o.scale_scalar(&(c * &sign(self.ring, star))));
                    }
                }
            }
        }
        lhs.sub(&rhs)
    }

    /// Degree, filtration and strict unitality of the components.
    pub fn check_shape(&self) -> CheckReport {
        let mut rep = CheckReport::new("morphism-shape", format!("arity <= {}", self.arity_cap));
        for (t, v) in self.entries() {
            rep.tick();
            let k = t.len();
            let sum: usize = t.iter().map(|b| b.grade()).sum();
            let want_parity = (sum + 1 + k) % 2;
            if v.parity() != Some(want_parity) {
                rep.fail(format!("parity violated at {}", render_tuple(&t)));
            }
            let top = sum as i64 - (k as i64 - 1);
            if v.filtration_level().is_some_and(|l| l as i64 > top) {
                rep.fail(format!("filtration violated at {}", render_tuple(&t)));
            }
            if k >= 2 && t.iter().any(|b| b.is_empty()) {
                rep.fail(format!("strict unitality violated at {}", render_tuple(&t)));
            }
        }
        let one = Ext::blade(self.ring, self.nvars, Blade::EMPTY);
        if self.get(&[Blade::EMPTY]) != Some(&one) {
            rep.fail("Phi^1(1) != 1".into());
        }
        rep
    }

    /// Matrix of `Φ^1` on the blade basis (columns are inputs).
    pub fn linear_matrix(&self) -> Matrix {
        let basis = all_blades(self.nvars);
        let mut m = Matrix::zeros(self.ring, basis.len(), basis.len());
        let pos = crate::exterior::blade_positions(self.nvars);
        for (c, b) in basis.iter().enumerate() {
            if let Some(v) = self.get(&[*b]) {
                for (o, s) in v.terms() {
                    m.set(pos[o.0 as usize], c, s.clone());
                }
            }
        }
        m
    }

    /// Full d-equivalence check: morphism equations up to `max_arity`,
    /// shape, invertible `Φ^1`, and `gr Φ^k = Id^k` for `k <= d`.
    pub fn check_d_equivalence(&self, src: &AInfinity, tgt: &AInfinity, d: usize, max_arity: usize) -> CheckReport {
        let mut rep = CheckReport::new("d-equivalence", format!("d = {d}, arity <= {max_arity}"));
        rep.merge(self.check_morphism(src, tgt, max_arity));
        rep.merge(self.check_shape());
        if self.linear_matrix().inverse().is_none() {
            rep.fail("Phi^1 not invertible".into());
        }
        let basis = all_blades(self.nvars);
        for k in 1..=d.min(self.arity_cap) {
            for_each_tuple(&basis, k, |t| {
                rep.tick();
                let sum: usize = t.iter().map(|b| b.grade()).sum();
                let top = sum as i64 - (k as i64 - 1);
                let v = self.get(t).cloned().unwrap_or_else(|| Ext::zero(self.nvars));
                let gr = if top >= 0 { v.grade_part(top as usize) } else { Ext::zero(self.nvars) };
                let want = if k == 1 { Ext::blade(self.ring, self.nvars, t[0]) } else { Ext::zero(self.nvars) };
                if gr != want {
                    rep.fail(format!("gr Phi^{k} != Id^{k} at {}", render_tuple(t)));
                }
            });
        }
        rep
    }
}

/// The formal diffeomorphism `Δ` of `E` induced by a change of variables:
/// `Δ^1 = Λ(linear part)`, and `Δ^k` places each degree-`k` coefficient
/// on the nondecreasing index tuple.
pub fn diffeo_morphism(f: &FormalDiffeo, arity_cap: usize) -> Result<AInfMorphism> {
    let n = f.nvars();
    let ring = f.ring();
    let mut d = AInfMorphism::empty(ring, n, f.order(), arity_cap);
    let l = f.linear_part();
    if l.inverse().is_none() {
        return Err(Error::NotInvertible("linear part of the change of variables".into()));
    }
    let images: Vec<Ext> = (0..n)
        .map(|i| {
            let mut e = Ext::zero(n);
            for j in 0..n {
                e.add_term(Blade::single(j + 1), l.get(j, i));
            }
            e
        })
        .collect();
    for b in all_blades(n) {
        let mut img = Ext::blade(ring, n, Blade::EMPTY);
        for i in b.indices() {
            img = img.wedge(&images[i - 1]);
        }
        d.set(&[b], img);
    }
    for (j, fj) in f.components().iter().enumerate() {
        for (m, c) in fj.terms() {
            let k = m.degree();
            if k < 2 || k > arity_cap {
                continue;
            }
            let mut t = Vec::with_capacity(k);
            for i in 0..n {
                for _ in 0..m.exp(i) {
                    t.push(Blade::single(i + 1));
                }
            }
            let mut cur = d.get(&t).cloned().unwrap_or_else(|| Ext::zero(n));
            cur.add_term(Blade::single(j + 1), c.clone());
            d.set(&t, cur);
        }
    }
    Ok(d)
}

/// `Δ_*𝒜`: the unique structure making `Δ` an A∞-isomorphism, solved
/// arity by arity.
pub fn pushforward(a: &AInfinity, f: &FormalDiffeo) -> Result<(AInfinity, AInfMorphism)> {
    if f.nvars() != a.nvars() || f.ring() != a.ring() {
        return Err(Error::Invalid("change of variables does not match the algebra".into()));
    }
    let delta = diffeo_morphism(f, a.arity_cap())?;
    let out = pushforward_by(a, &delta)?;
    Ok((out, delta))
}

/// `Δ_*𝒜` for an arbitrary morphism `Δ` with invertible `Δ^1`.
pub fn pushforward_by(a: &AInfinity, delta: &AInfMorphism) -> Result<AInfinity> {
    let n = a.nvars();
    let ring = a.ring();
    if delta.nvars() != n || delta.ring() != ring {
        return Err(Error::Invalid("morphism does not match the algebra".into()));
    }
    let cap = a.arity_cap().min(delta.arity_cap());
    let basis = all_blades(n);
    let lin = delta.linear_matrix();
    let inv = lin.inverse().ok_or_else(|| Error::NotInvertible("Delta^1".into()))?;
    let pos = crate::exterior::blade_positions(n);
    // (Δ^1)^{-1} v_b as an element of E.
    let preimage: Vec<Ext> = basis
        .iter()
        .map(|b| {
            let mut e = Ext::zero(n);
            for (r, rb) in basis.iter().enumerate() {
                e.add_term(*rb, inv.get(r, pos[b.0 as usize]));
            }
            e
        })
        .collect();
    let mut out = AInfinity::empty(ring, n, a.order(), cap);
    for k in 2..=cap {
        let comps = positive_compositions(k);
        // G(a_k..a_1) = Σ ±Δ(.., μ(..), ..) − Σ_{2<=r<k} μ'^r(Δ..)
        let mut g: HashMap<u128, Ext> = HashMap::new();
        for_each_tuple(&basis, k, |t| {
            let mut lhs_lower = Ext::zero(n);
            for s in &comps {
                if s.len() < 2 || s.len() >= k {
                    continue;
                }
                let mut pieces = Vec::with_capacity(s.len());
                let mut p = 0;
                for &len in s {
                    pieces.push(delta.get(&t[p..p + len]).cloned().unwrap_or_else(|| Ext::zero(n)));
                    p += len;
                }
                let refs: Vec<&Ext> = pieces.iter().collect();
                lhs_lower = lhs_lower.add(&out.mu_ext(&refs));
            }
            let mut rhs = Ext::zero(n);
            for m in 2..=k {
                let mut star = 0usize;
                for i in 0..=(k - m) {
                    if i > 0 {
                        star += shifted(t[k - i]);
                    }
                    let lo = k - i - m;
                    let Some(inner) = a.mu(&t[lo..lo + m]) else { continue };
                    let mut outer: Vec<Blade> = Vec::with_capacity(k - m + 1);
                    outer.extend_from_slice(&t[..lo]);
                    outer.push(Blade::EMPTY);
                    outer.extend_from_slice(&t[lo + m..]);
                    for (b, c) in inner.terms() {
                        outer[lo] = *b;
                        if let Some(o) = delta.get(&outer) {
                            rhs = rhs.add(&o.scale_scalar(&(c * &sign(ring, star))));
                        }
                    }
                }
            }
            let v = rhs.sub(&lhs_lower);
            if !v.is_zero() {
                g.insert(tuple_key(t), v);
            }
        });
        // μ'^k(b_k..b_1) = G((Δ^1)^{-1} b_k, ..., (Δ^1)^{-1} b_1)
        for_each_tuple(&basis, k, |t| {
            let ins: Vec<&Ext> = t.iter().map(|b| &preimage[pos[b.0 as usize]]).collect();
            let v = multilinear_from_table(&g, &ins, n, ring);
            out.set(t, v);
        });
    }
    Ok(out)
}

fn multilinear_from_table(table: &HashMap<u128, Ext>, inputs: &[&Ext], n: usize, ring: Ring) -> Ext {
    let k = inputs.len();
    let mut out = Ext::zero(n);
    if inputs.iter().any(|x| x.is_zero()) {
        return out;
    }
    let terms: Vec<Vec<(Blade, Scalar)>> = inputs.iter().map(|x| x.terms().map(|(b, c)| (*b, c.clone())).collect()).collect();
    let mut idx = vec![0usize; k];
    let mut t = vec![Blade::EMPTY; k];
    loop {
        let mut c = ring.one();
        for p in 0..k {
            t[p] = terms[p][idx[p]].0;
            c = &c * &terms[p][idx[p]].1;
        }
        if let Some(v) = table.get(&tuple_key(&t)) {
            out = out.add(&v.scale_scalar(&c));
        }
        let mut p = k;
        loop {
            if p == 0 {
                return out;
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < terms[p].len() {
                break;
            }
            idx[p] = 0;
        }
    }
}

/// `𝐯` as an element of `E_R`, re-exported for convenience.
pub fn v_element(ring: Ring, n: usize, order: usize) -> ExtR {
    canonical_v(ring, n, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> Ring {
        Ring::Q
    }

    fn v1() -> Blade {
        Blade::single(1)
    }

    /// Clifford algebra on one generator with `v·v = 1`: μ²(v, v) = -1
    /// because the product is `(-1)^{|a_1|} μ²`.
    fn clifford_one() -> AInfinity {
        let mut a = AInfinity::formal(q(), 1, 2, 2);
        a.set(&[v1(), v1()], Ext::blade(q(), 1, Blade::EMPTY).scale_scalar(&Scalar::from_i64(q(), -1)));
        a
    }

    #[test]
    fn formal_structure_passes() {
        for n in 1..=3 {
            let a = AInfinity::formal(q(), n, 4, 4);
            assert!(a.check_ainfinity(4).passed);
            assert!(a.check_superfiltered_unital().passed);
            assert!(a.disc_potential().unwrap().is_zero());
        }
    }

    #[test]
    fn clifford_passes() {
        let mut a = AInfinity::formal(q(), 1, 2, 3);
        a.set(&[v1(), v1()], Ext::blade(q(), 1, Blade::EMPTY));
        assert!(a.check_ainfinity(4).passed);
        assert!(a.check_superfiltered_unital().passed);
        assert!(clifford_one().check_ainfinity(3).passed);
    }

    /// With μ² formal the arity-4 relation for μ³ is a cocycle condition.
    /// On `(v, v, v, v)` it reads `μ²(v, μ³(v,v,v)) + μ²(μ³(v,v,v), v)`
    /// with signs `(-1)^{✠_0} = (-1)^{✠_1} = 1`, i.e. `v - v = 0`, so the
    /// one-variable table with `μ³(v, v, v) = 1` is a genuine structure.
    #[test]
    fn cubic_table_is_ainfinity() {
        let mut a = AInfinity::formal(q(), 1, 3, 4);
        a.set(&[v1(), v1(), v1()], Ext::blade(q(), 1, Blade::EMPTY));
        assert!(a.relation_value(&[v1(); 4]).is_zero());
        assert!(a.check_ainfinity(5).passed);
        assert_eq!(a.disc_potential().unwrap().render(), "x1^3 + O(4)");
    }

    /// `μ³(v1, v1, v2) = 1` alone: on `(v1, v1, v1, v2)` the only surviving
    /// term is `μ²(v1, μ³(v1, v1, v2)) = μ²(v1, 1) = v1` with sign `+1`.
    #[test]
    fn asymmetric_table_fails_at_arity_four() {
        let mut a = AInfinity::formal(q(), 2, 3, 4);
        let (b1, b2) = (Blade::single(1), Blade::single(2));
        a.set(&[b1, b1, b2], Ext::blade(q(), 2, Blade::EMPTY));
        assert!(a.check_ainfinity(3).passed);
        assert!(!a.check_ainfinity(4).passed);
        assert_eq!(a.relation_value(&[b1, b1, b1, b2]), Ext::blade(q(), 2, b1));
    }

    #[test]
    fn superfiltered_negative_controls() {
        let mut a = AInfinity::formal(q(), 2, 3, 3);
        let b1 = Blade::single(1);
        let b2 = Blade::single(2);
        a.set(&[b1, b2], Ext::blade(q(), 2, Blade(3)));
        assert!(!a.check_superfiltered_unital().passed);
        let mut c = AInfinity::formal(q(), 3, 3, 3);
        c.set(&[Blade::single(1), Blade::single(2), Blade::single(3)], Ext::blade(q(), 3, Blade(7)));
        assert!(!c.check_superfiltered_unital().passed);
    }

    #[test]
    fn char2_potential_example() {
        // μ²(v,v) = 1 and μ^{2j}(v,...,v) = c_{2j}
        let f2 = Ring::fp(2).unwrap();
        let mut a = AInfinity::formal(f2, 1, 6, 6);
        a.set(&[v1(), v1()], Ext::blade(f2, 1, Blade::EMPTY));
        a.set(&[v1(); 4], Ext::blade(f2, 1, Blade::EMPTY));
        let p = a.disc_potential().unwrap();
        assert_eq!(p.render(), "x1^2 + x1^4 + O(7)");
    }

    #[test]
    fn insertion_examples() {
        let a = AInfinity::formal(q(), 2, 3, 4);
        let x = Ext::blade(q(), 2, v1()).to_series(3);
        let r = a.mu_0v(&[&x], 3).unwrap();
        // μ²(v1, 𝐯) = (-1)^{|𝐯|} v1 ∧ 𝐯 = 𝐯 ∧ v1, so the differential
        // (-1)^{|v1|} μ_{0,𝐯}^1(v1) has leading term -𝐯 ∧ v1.
        let v = canonical_v(q(), 2, 3);
        assert_eq!(r, v.wedge(&x));
        let y = Ext::blade(q(), 2, Blade::single(2)).to_series(3);
        let r2 = a.mu_0v(&[&x, &y], 2).unwrap();
        assert_eq!(r2, x.wedge(&y).neg());
        let rv = a.mu_v(&[&x], 3).unwrap();
        assert!(rv.grade_part(2).is_zero());
    }

    #[test]
    fn morphism_examples() {
        let a = AInfinity::formal(q(), 1, 3, 3);
        let id = AInfMorphism::identity(q(), 1, 3, 3);
        assert!(id.check_d_equivalence(&a, &a, 3, 3).passed);
        assert!(id.change_of_vars().unwrap().is_identity_mod(3));
        let mut phi = AInfMorphism::identity(q(), 1, 3, 3);
        phi.set(&[v1(), v1()], Ext::blade(q(), 1, v1()));
        let f = phi.change_of_vars().unwrap();
        assert_eq!(f.components()[0].render(), "x1 + x1^2 + O(4)");
        assert_eq!(id.compose(&phi).unwrap().entries().len(), phi.entries().len());
    }

    #[test]
    fn pushforward_identity_and_scaling() {
        let a = clifford_one();
        let id = FormalDiffeo::identity(q(), 1, 2);
        let (b, _) = pushforward(&a, &id).unwrap();
        assert_eq!(b.entries().len(), a.entries().len());
        let f = AInfinity::formal(q(), 1, 3, 3);
        let two = FormalDiffeo::new(vec![Series::var(q(), 1, 0, 3).scale(&Scalar::from_i64(q(), 2))]).unwrap();
        let (g, delta) = pushforward(&f, &two).unwrap();
        assert!(g.check_ainfinity(3).passed);
        assert!(g.disc_potential().unwrap().is_zero());
        assert!(delta.check_morphism(&f, &g, 3).passed);
    }
}
