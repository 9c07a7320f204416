//! The localised mirror pipeline.
//!
//! `Φ: 𝒜 → end(𝓔)` sends `a` to `a_0 ↦ (-1)^{|a_0|} μ_{0,𝐯}(a, a_0)`; the
//! comparison cocycle `i: 𝓔 → 𝓔_0(𝔓)` conjugates into `end(𝓔_0)`, and the
//! projection `Π` of the homotopy transfer lands in `𝓑_0^min(𝔓)`. The
//! composite `Π ∘ Ψ ∘ Φ` is certified up to arity `min(K - 1, N)`: `Φ^k`
//! needs `k + 1` slots of the cap for its insertions, and `i` is exact only
//! to order `N - 1`.

use std::collections::HashMap;

use num_traits::{Signed, Zero};

use crate::ainfinity::{
    for_each_tuple, positive_compositions, pushforward, render_tuple, shifted, tuple_key, AInfMorphism, AInfinity, CheckReport,
};
use crate::error::{Error, Result};
use crate::exterior::{all_blades, Blade, Ext, ExtR};
use crate::linalg::Matrix;
use crate::mf::{hom_differential, leading_term, mirror_object, mu2_mixed, stabilize_skyscraper, EndR, MatrixFactorization};
use crate::scalar::{sign, Ring, Scalar};
use crate::series::{monomials_of_degree, FormalDiffeo, Mono, Series};
use crate::transfer::{minimal_model, El, TransferData};

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage(name.into(), Box::new(e)))
}

/// Components `Φ^k(a_k, ..., a_1) ∈ end(𝓔)` on basis tuples.
#[derive(Clone, Debug)]
pub struct YonedaMorphism {
    ring: Ring,
    nvars: usize,
    order: usize,
    cap: usize,
    comps: HashMap<u128, EndR>,
}

impl YonedaMorphism {
    pub fn max_arity(&self) -> usize {
        self.cap - 1
    }

    /// Trust order of `Φ^k`: the insertions use up `k + 1` slots of the cap.
    pub fn component_order(&self, k: usize) -> usize {
        self.order.min(self.cap - k - 1)
    }

    pub fn get(&self, t: &[Blade]) -> Option<&EndR> {
        self.comps.get(&tuple_key(t))
    }

    fn get_or_zero(&self, t: &[Blade]) -> EndR {
        self.get(t).cloned().unwrap_or_else(|| EndR::zero(self.ring, self.nvars, self.component_order(t.len())))
    }

    /// `Φ` on a tuple whose slot `pos` holds a general element of `E`.
    fn apply_slot(&self, t: &mut [Blade], pos: usize, x: &Ext) -> EndR {
        let k = t.len();
        let mut out = EndR::zero(self.ring, self.nvars, self.component_order(k));
        for (b, c) in x.terms() {
            t[pos] = *b;
            if let Some(v) = self.get(t) {
                out = out.add(&v.scale(c));
            }
        }
        out
    }
}

/// `Φ^k(a_k, ..., a_1)(a_0) = (-1)^{|a_0|} μ_{0,𝐯}^{k+1}(a_k, ..., a_1, a_0)`
/// for `1 <= k <= K - 1`.
pub fn yoneda_morphism(a: &AInfinity) -> Result<YonedaMorphism> {
    let (ring, n, order, cap) = (a.ring(), a.nvars(), a.order(), a.arity_cap());
    if cap < order + 1 || cap < 2 {
        return Err(Error::Precondition(format!("arity cap {cap} leaves no headroom over order {order}")));
    }
    let mut phi = YonedaMorphism { ring, nvars: n, order, cap, comps: HashMap::new() };
    let basis = all_blades(n);
    for k in 1..cap {
        let o = phi.component_order(k);
        let mut fresh = Vec::new();
        let mut err = None;
        for_each_tuple(&basis, k, |t| {
            if err.is_some() {
                return;
            }
            let ins: Vec<ExtR> = t.iter().map(|b| ExtR::basis(n, *b, Series::one(ring, n, o))).collect();
            let mut m = EndR::zero(ring, n, o);
            for b0 in &basis {
                let x0 = ExtR::basis(n, *b0, Series::one(ring, n, o));
                let mut refs: Vec<&ExtR> = ins.iter().collect();
                refs.push(&x0);
                match a.mu_0v(&refs, o) {
                    Ok(v) => {
                        let s = sign(ring, b0.grade());
                        for (r, c) in v.terms() {
                            m.set(r.0 as usize, b0.0 as usize, c.scale(&s).with_order(o));
                        }
                    }
                    Err(e) => err = Some(e),
                }
            }
            if !m.is_zero() {
                fresh.push((tuple_key(t), m));
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        phi.comps.extend(fresh);
    }
    Ok(phi)
}

/// Morphism equations of `Φ` into `end(𝓔)`, strict unitality, parity,
/// filtration and the leading term `gr Φ^1(a) = a ∧ •`.
pub fn check_yoneda(a: &AInfinity, e: &MatrixFactorization, phi: &YonedaMorphism, max_arity: usize) -> CheckReport {
    let max_arity = max_arity.min(phi.max_arity());
    let mut rep = CheckReport::new("yoneda", format!("arity <= {max_arity}, order min(N, K - k - 1)"));
    let (ring, n) = (phi.ring, phi.nvars);
    let basis = all_blades(n);
    for d in 1..=max_arity {
        let o = phi.component_order(d);
        for_each_tuple(&basis, d, |t| {
            rep.tick();
            let mut lhs = e.mu1_mixed(&phi.get_or_zero(t));
            for s1 in 1..d {
                let l = phi.get_or_zero(&t[..d - s1]);
                let r = phi.get_or_zero(&t[d - s1..]);
                lhs = lhs.add(&mu2_mixed(&l, &r));
            }
            let mut rhs = EndR::zero(ring, n, o);
            for m in 2..=d {
                let mut star = 0usize;
                for i in 0..=(d - m) {
                    if i > 0 {
                        star += shifted(t[d - i]);
                    }
                    let lo = d - i - m;
                    let Some(inner) = a.mu(&t[lo..lo + m]) else { continue };
                    let mut outer: Vec<Blade> = Vec::with_capacity(d - m + 1);
                    outer.extend_from_slice(&t[..lo]);
                    outer.push(Blade::EMPTY);
                    outer.extend_from_slice(&t[lo + m..]);
                    let v = phi.apply_slot(&mut outer, lo, inner);
                    rhs = rhs.add(&v.scale(&sign(ring, star)));
                }
            }
            if !lhs.truncate(o).sub(&rhs.truncate(o)).is_zero() {
                rep.fail(format!("morphism equation fails at {}", render_tuple(t)));
            }
            let sum: usize = t.iter().map(|b| b.grade()).sum();
            if let Some(v) = phi.get(t) {
                if v.parity().is_none_or(|p| p != (sum + d + 1) % 2) {
                    rep.fail(format!("parity violated at {}", render_tuple(t)));
                }
                if v.filtration_degree().is_some_and(|f| f > sum as i64 - (d as i64 - 1)) {
                    rep.fail(format!("filtration violated at {}", render_tuple(t)));
                }
                if d >= 2 && t.iter().any(|b| b.is_empty()) {
                    rep.fail(format!("strict unitality violated at {}", render_tuple(t)));
                }
            }
        });
    }
    let o1 = phi.component_order(1);
    for &b in &basis {
        rep.tick();
        let wedge = EndR::from_fn(ring, n, o1, |c| {
            let x = ExtR::basis(n, b, Series::one(ring, n, o1));
            x.wedge(&ExtR::basis(n, c, Series::one(ring, n, o1)))
        });
        let top = phi.get_or_zero(&[b]).degree_part(b.grade() as i64);
        if !top.agrees_with(&wedge) {
            rep.fail(format!("leading term of Phi^1({}) is not the wedge", b.render()));
        }
    }
    if !phi.get_or_zero(&[Blade::EMPTY]).agrees_with(&EndR::identity(ring, n, o1)) {
        rep.fail("Phi^1(1) != id".into());
    }
    rep
}

/// A degree-0 cocycle `i: 𝓔 → 𝓔_0` with its inverse; `Ψ(a) = i a i^{-1}`.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub i: EndR,
    pub inverse: EndR,
}

impl Comparison {
    /// The conjugation `Ψ^1`; `Ψ^{>=2} = 0`.
    pub fn psi(&self, a: &EndR) -> EndR {
        self.i.mul(a).mul(&self.inverse)
    }
}

/// `ω = |α| - (|L| - |M|)` of the entry `x^α E_{L,M}`. The leading part
/// `-𝐯 ∧ •` of both squifferentials has weight 0 and the rest weight `>= 2`.
fn weight(m: &Mono, row: usize, col: usize) -> i64 {
    m.degree() as i64 - (Blade(row as u32).grade() as i64 - Blade(col as u32).grade() as i64)
}

/// Potentials agreeing modulo `m^{N+1}` give squifferentials that agree only
/// modulo `m^N` (the potential is divided by one variable), so the cocycle
/// equation is certified at order `N - 1`.
pub fn comparison_order(e: &MatrixFactorization, e0: &MatrixFactorization) -> usize {
    e.order().min(e0.order()).saturating_sub(1)
}

/// Corrects `id` to a cocycle `i = id + Σ_{ω >= 1} i_ω` in `hom(𝓔, 𝓔_0)`.
/// `d i = D_0 i - i D` is linear in `i`, so all corrections are found by one
/// exact solve. The per-weight blocks are not enough on their own: at the
/// truncation edge a block leaves free directions that a later weight needs
/// to have chosen correctly.
pub fn comparison_cocycle(e: &MatrixFactorization, e0: &MatrixFactorization) -> Result<Comparison> {
    let (ring, n) = (e.ring(), e.nvars());
    if e0.ring() != ring || e0.nvars() != n {
        return Err(Error::Invalid("factorisations over different rings".into()));
    }
    let t = comparison_order(e, e0);
    if t == 0 {
        return Err(Error::Precondition("factorisations must be known to order at least 1".into()));
    }
    if !e.w.agrees_with(&e0.w) {
        return Err(Error::Precondition("the factorisations have different potentials".into()));
    }
    let lead = leading_term(ring, n, t);
    for (name, x) in [("source", e), ("target", e0)] {
        if !x.d.truncate(t).degree_part(1).agrees_with(&lead) {
            return Err(Error::Precondition(format!("{name} squifferential does not have leading term -v wedge")));
        }
    }
    let d_src = e.d.truncate(t);
    let d_tgt = e0.d.truncate(t);
    let dim = 1usize << n;
    let blades = all_blades(n);
    let mut rows: HashMap<(usize, usize, Mono), usize> = HashMap::new();
    let coords = |f: &EndR, rows: &mut HashMap<(usize, usize, Mono), usize>| -> Vec<(usize, Scalar)> {
        let mut out = Vec::new();
        for r in 0..dim {
            for c in 0..dim {
                for (m, v) in f.get(r, c).terms() {
                    let next = rows.len();
                    out.push((*rows.entry((r, c, *m)).or_insert(next), v.clone()));
                }
            }
        }
        out
    };
    let mut i = EndR::identity(ring, n, t);
    let rhs_coords = coords(&hom_differential(&d_tgt, &d_src, &i, 0).truncate(t), &mut rows);
    let mut unknowns = Vec::new();
    let mut images = Vec::new();
    for &lb in &blades {
        for &mb in &blades {
            let z = lb.grade() as i64 - mb.grade() as i64;
            if z % 2 != 0 {
                continue;
            }
            for deg in 0..=t {
                if (deg as i64) - z < 1 {
                    continue;
                }
                for m in monomials_of_degree(n, deg) {
                    let mut unit = EndR::zero(ring, n, t);
                    unit.set(lb.0 as usize, mb.0 as usize, Series::monomial(n, m, ring.one(), t));
                    images.push(coords(&hom_differential(&d_tgt, &d_src, &unit, 0).truncate(t), &mut rows));
                    unknowns.push((lb, mb, m));
                }
            }
        }
    }
    let mut rhs = vec![ring.zero(); rows.len()];
    for (k, v) in rhs_coords {
        rhs[k] = -&v;
    }
    let mut mat = Matrix::zeros(ring, rows.len(), unknowns.len());
    for (j, col) in images.iter().enumerate() {
        for (k, v) in col {
            mat.add_to(*k, j, v);
        }
    }
    let sol =
        mat.solve(&rhs).ok_or_else(|| Error::Invalid(format!("no cocycle with leading term id: objects not isomorphic at order {t}")))?;
    for ((lb, mb, m), x) in unknowns.iter().zip(&sol) {
        if !x.is_zero() {
            let (r, c) = (lb.0 as usize, mb.0 as usize);
            let mut s = i.get(r, c).clone();
            s.add_term(*m, x.clone());
            i.set(r, c, s);
        }
    }
    if !hom_differential(&d_tgt, &d_src, &i, 0).truncate(t).is_zero() {
        return Err(Error::Internal("comparison map is not a cocycle after correction".into()));
    }
    let id = EndR::identity(ring, n, t);
    let nil = id.sub(&i);
    let mut inverse = id.clone();
    let mut term = id.clone();
    for _ in 0..=(t + n) {
        term = term.mul(&nil);
        if term.is_zero() {
            break;
        }
        inverse = inverse.add(&term);
    }
    if !i.mul(&inverse).agrees_with(&id) || !inverse.mul(&i).agrees_with(&id) {
        return Err(Error::NotInvertible("comparison cocycle".into()));
    }
    Ok(Comparison { i, inverse })
}

/// Cocycle, inverse and leading-term conditions on `i`.
pub fn check_comparison(e: &MatrixFactorization, e0: &MatrixFactorization, c: &Comparison) -> CheckReport {
    let t = comparison_order(e, e0);
    let mut rep = CheckReport::new("comparison", format!("order {t}"));
    let (ring, n) = (e.ring(), e.nvars());
    let id = EndR::identity(ring, n, t);
    rep.tick();
    if !hom_differential(&e0.d.truncate(t), &e.d.truncate(t), &c.i, 0).truncate(t).is_zero() {
        rep.fail("i is not a cocycle".into());
    }
    rep.tick();
    if c.i.parity() != Some(0) {
        rep.fail("i is not even".into());
    }
    rep.tick();
    if !c.i.mul(&c.inverse).agrees_with(&id) || !c.inverse.mul(&c.i).agrees_with(&id) {
        rep.fail("i^-1 is not a two-sided inverse".into());
    }
    rep.tick();
    let dim = 1usize << n;
    let mut lead_ok = c.i.filtration_degree().is_some_and(|f| f <= 0);
    for r in 0..dim {
        for col in 0..dim {
            for (m, _) in c.i.get(r, col).terms() {
                if weight(m, r, col) == 0 && !(r == col && m.degree() == 0) {
                    lead_ok = false;
                }
            }
            if r == col && !c.i.get(r, col).constant_term().is_one() {
                lead_ok = false;
            }
        }
    }
    if !lead_ok {
        rep.fail("leading term of i is not the identity".into());
    }
    rep
}

/// `Ψ` is a unital dg-map: `Ψ(μ¹_𝓔 f) = μ¹_{𝓔_0} Ψ(f)` and
/// `Ψ(μ²(f, g)) = μ²(Ψ f, Ψ g)` on the given samples.
pub fn check_conjugation(e: &MatrixFactorization, e0: &MatrixFactorization, c: &Comparison, samples: &[EndR]) -> CheckReport {
    let t = comparison_order(e, e0);
    let mut rep = CheckReport::new("conjugation", format!("order {t}, {} samples", samples.len()));
    let id = EndR::identity(e.ring(), e.nvars(), t);
    rep.tick();
    if !c.psi(&id).agrees_with(&id) {
        rep.fail("Psi(id) != id".into());
    }
    for (k, f) in samples.iter().enumerate() {
        rep.tick();
        let f = f.truncate(t);
        let lhs = c.psi(&e.mu1_mixed(&f)).truncate(t);
        let rhs = e0.mu1_mixed(&c.psi(&f)).truncate(t);
        if !lhs.agrees_with(&rhs) {
            rep.fail(format!("Psi does not intertwine mu^1 on sample {k}"));
        }
        let g = &samples[(k + 1) % samples.len()].truncate(t);
        if !c.psi(&mu2_mixed(&f, g)).agrees_with(&mu2_mixed(&c.psi(&f), &c.psi(g))) {
            rep.fail(format!("Psi does not preserve mu^2 on sample {k}"));
        }
    }
    rep
}

/// Everything produced by [`composite_equivalence`].
#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub potential: Series,
    pub mirror: MatrixFactorization,
    pub skyscraper: MatrixFactorization,
    pub comparison: Comparison,
    pub phi: YonedaMorphism,
    pub composite: AInfMorphism,
    pub target: AInfinity,
    pub certified_order: usize,
    pub certified_arity: usize,
    pub stages: Vec<CheckReport>,
}

impl PipelineResult {
    pub fn passed(&self) -> bool {
        self.stages.iter().all(|s| s.passed)
    }

    pub fn stage(&self, name: &str) -> Option<&CheckReport> {
        self.stages.iter().find(|s| s.name == name)
    }
}

/// `(Π ∘ Ψ ∘ Φ)^k = Σ Π^r(ΨΦ^{s_r}, ..., ΨΦ^{s_1})` for `k <= kmax`. `Π^r`
/// reads its inputs to x-degree `r - 1`.
fn composite_morphism(phi: &YonedaMorphism, c: &Comparison, td: &TransferData, order: usize, kmax: usize) -> AInfMorphism {
    let sp = td.space();
    let (ring, n) = (phi.ring, phi.nvars);
    let basis = all_blades(n);
    let mut conj: HashMap<u128, El> = HashMap::new();
    for k in 1..=kmax {
        let o = phi.component_order(k).min(c.i.order());
        for_each_tuple(&basis, k, |t| {
            if let Some(f) = phi.get(t) {
                let g = c.psi(&f.truncate(o));
                if !g.is_zero() {
                    conj.insert(tuple_key(t), sp.from_endr(&g, o.min(sp.tmax())));
                }
            }
        });
    }
    let mut out = AInfMorphism::empty(ring, n, order, kmax);
    for k in 1..=kmax {
        let comps = positive_compositions(k);
        for_each_tuple(&basis, k, |t| {
            let mut acc = Ext::zero(n);
            'comp: for s in &comps {
                let r = s.len();
                let mut pieces: Vec<El> = Vec::with_capacity(r);
                let mut pos = 0;
                for &len in s {
                    let Some(x) = conj.get(&tuple_key(&t[pos..pos + len])) else { continue 'comp };
                    debug_assert!(x.deg() + 1 >= r, "insufficient x-degree for Pi^{r}");
                    pieces.push(x.truncate(sp, r - 1));
                    pos += len;
                }
                let refs: Vec<&El> = pieces.iter().collect();
                acc = acc.add(&td.projection(&refs));
            }
            out.set(t, acc);
        });
    }
    out
}

/// Runs the whole pipeline on `𝒜` and verifies every stage.
pub fn composite_equivalence(a: &AInfinity) -> Result<PipelineResult> {
    let (n, cap) = (a.nvars(), a.arity_cap());
    let mirror = stage("mirror", mirror_object(a))?;
    let potential = mirror.w.clone();
    let order = mirror.order();
    let mut stages = Vec::new();

    let mut rep = CheckReport::new("mirror", format!("order {order}"));
    rep.tick();
    if !mirror.check_squifferential() {
        rep.fail("D^2 != P id".into());
    }
    rep.tick();
    if !mirror.check_filtered() {
        rep.fail("D is not odd of filtration degree <= 1".into());
    }
    rep.tick();
    if !crate::mf::check_leading_term(&mirror) {
        rep.fail("leading term is not -v wedge".into());
    }
    stages.push(rep);

    let phi = stage("yoneda", yoneda_morphism(a))?;
    stages.push(check_yoneda(a, &mirror, &phi, phi.max_arity()));

    let skyscraper = stage("skyscraper", stabilize_skyscraper(&potential.truncate(order)))?;
    let comparison = stage("comparison", comparison_cocycle(&mirror, &skyscraper))?;
    stages.push(check_comparison(&mirror, &skyscraper, &comparison));

    let samples: Vec<EndR> = all_blades(n).into_iter().filter_map(|b| phi.get(&[b]).cloned()).collect();
    stages.push(check_conjugation(&mirror, &skyscraper, &comparison, &samples));

    let (target, td) = stage("transfer", minimal_model(&potential.truncate(order), cap))?;
    let kmax = phi.max_arity().min(comparison.i.order() + 1);
    let composite = composite_morphism(&phi, &comparison, &td, order, kmax);
    let mut rep = composite.check_d_equivalence(a, &target, kmax, kmax);
    rep.name = "composite".into();
    stages.push(rep);

    let mut rep = CheckReport::new("potential", format!("order {order}"));
    rep.tick();
    match target.disc_potential() {
        Ok(p) if p.agrees_with(&potential) => {}
        Ok(p) => rep.fail(format!("target potential {p} differs from {potential}")),
        Err(e) => rep.fail(format!("target potential unavailable: {e}")),
    }
    rep.tick();
    match composite.change_of_vars().and_then(|f| f.pull_back(&potential)) {
        Ok(q) if q.agrees_with(&potential) => {}
        Ok(q) => rep.fail(format!("P o f = {q} differs from P")),
        Err(e) => rep.fail(format!("change of variables unavailable: {e}")),
    }
    stages.push(rep);

    Ok(PipelineResult {
        potential,
        mirror,
        skyscraper,
        comparison,
        phi,
        composite,
        target,
        certified_order: order,
        certified_arity: kmax,
        stages,
    })
}

/// Given `P_1 = P_2 ∘ f`, builds a morphism `𝒜_1 → 𝓑_0^min(P_2)` by chaining
/// the pipeline of `𝒜_1`, the pushforward along `f`, and the pipeline of the
/// pushed algebra.
pub fn realise_equivalence(a1: &AInfinity, f: &FormalDiffeo) -> Result<(AInfMorphism, AInfinity)> {
    let first = composite_equivalence(a1)?;
    let (pushed, delta) = stage("pushforward", pushforward(&first.target, f))?;
    let second = composite_equivalence(&pushed)?;
    let m = delta.compose(&first.composite)?;
    let m = second.composite.compose(&m)?;
    Ok((m, second.target))
}

/// Verdict of [`potential_equivalence_search`].
#[derive(Clone, Debug, PartialEq)]
pub enum SearchOutcome {
    Found(FormalDiffeo),
    /// Every candidate was ruled out.
    NotEquivalent,
    /// The search gave up without exhausting the candidates.
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub outcome: SearchOutcome,
    pub d: usize,
    pub order: usize,
    /// Lowest degree at which some branch failed.
    pub failed_at: Option<usize>,
    pub nodes: usize,
}

impl SearchResult {
    pub fn verdict(&self) -> &'static str {
        match self.outcome {
            SearchOutcome::Found(_) => "FOUND",
            SearchOutcome::NotEquivalent => "NOT-EQUIVALENT",
            SearchOutcome::Indeterminate => "INDETERMINATE",
        }
    }
}

const NODE_BUDGET: usize = 200_000;
const MATRIX_ENUM_LIMIT: u64 = 4096;

struct Search {
    p1: Series,
    p2: Series,
    grads: Vec<Series>,
    n: usize,
    ring: Ring,
    order: usize,
    d: usize,
    v: usize,
    nodes: usize,
    exhaustive: bool,
    failed_at: Option<usize>,
}

impl Search {
    fn fail_at(&mut self, m: usize) {
        self.failed_at = Some(self.failed_at.map_or(m, |f| f.min(m)));
    }

    fn residual(&self, f: &[Series]) -> Result<Series> {
        Ok(&self.p1 - &self.p2.compose(f)?)
    }

    /// Fixes the degree-`j` block of `f`, which first appears in degree
    /// `j + v - 1` through `Σ_i ∂_i P_2 · g_i`.
    fn dfs(&mut self, f: Vec<Series>, j: usize) -> Result<Option<Vec<Series>>> {
        self.nodes += 1;
        if self.nodes > NODE_BUDGET {
            self.exhaustive = false;
            return Ok(None);
        }
        let m = j + self.v - 1;
        let r = self.residual(&f)?;
        if let Some(low) = r.valuation() {
            if low < m.min(self.order + 1) {
                self.fail_at(low);
                return Ok(None);
            }
        }
        if m > self.order {
            return Ok(Some(f));
        }
        let target = r.homogeneous(m);
        if j <= self.d {
            if !target.is_zero() {
                self.fail_at(m);
                return Ok(None);
            }
            return self.dfs(f, j + 1);
        }
        let (n, ring) = (self.n, self.ring);
        let h: Vec<Series> = self.grads.iter().map(|g| g.compose(&f).map(|s| s.homogeneous(self.v - 1))).collect::<Result<_>>()?;
        let cols = monomials_of_degree(n, j);
        let rows = monomials_of_degree(n, m);
        let row_idx: HashMap<Mono, usize> = rows.iter().enumerate().map(|(k, mo)| (*mo, k)).collect();
        let mut mat = Matrix::zeros(ring, rows.len(), n * cols.len());
        for (i, hi) in h.iter().enumerate() {
            for (k, mu) in cols.iter().enumerate() {
                for (mo, c) in hi.terms() {
                    mat.add_to(row_idx[&mo.mul(mu)], i * cols.len() + k, c);
                }
            }
        }
        let rhs: Vec<Scalar> = rows.iter().map(|mo| target.coeff(mo)).collect();
        let Some(part) = mat.solve(&rhs) else {
            self.fail_at(m);
            return Ok(None);
        };
        let kernel = mat.kernel();
        let apply = |x: &[Scalar]| -> Vec<Series> {
            let mut g = f.clone();
            for (i, gi) in g.iter_mut().enumerate() {
                for (k, mu) in cols.iter().enumerate() {
                    gi.add_term(*mu, x[i * cols.len() + k].clone());
                }
            }
            g
        };
        let elems = ring.elements();
        let enumerable = elems.as_ref().is_some_and(|e| (e.len() as f64).powi(kernel.len() as i32) <= NODE_BUDGET as f64);
        if kernel.is_empty() || !enumerable {
            if !kernel.is_empty() {
                self.exhaustive = false;
            }
            return self.dfs(apply(&part), j + 1);
        }
        let elems = elems.expect("finite ring");
        let mut coef = vec![0usize; kernel.len()];
        loop {
            let mut x = part.clone();
            for (t, kv) in coef.iter().zip(&kernel) {
                for (xi, ki) in x.iter_mut().zip(kv) {
                    *xi = &*xi + &(&elems[*t] * ki);
                }
            }
            if let Some(found) = self.dfs(apply(&x), j + 1)? {
                return Ok(Some(found));
            }
            let mut p = 0;
            loop {
                if p == coef.len() {
                    return Ok(None);
                }
                coef[p] += 1;
                if coef[p] < elems.len() {
                    break;
                }
                coef[p] = 0;
                p += 1;
            }
        }
    }
}

/// Rational `v`-th roots of a nonzero rational.
fn rational_roots(x: &Scalar, v: usize) -> Vec<Scalar> {
    let Some((num, den)) = x.as_fraction() else { return Vec::new() };
    if num.is_zero() || (num.is_negative() && v.is_multiple_of(2)) {
        return Vec::new();
    }
    let (p, q) = (num.abs().nth_root(v as u32), den.nth_root(v as u32));
    if num_traits::pow(p.clone(), v) != num.abs() || num_traits::pow(q.clone(), v) != den {
        return Vec::new();
    }
    let p = if num.is_negative() { -p } else { p };
    let a = &Scalar::from_bigint(Ring::Q, &p) * &Scalar::from_bigint(Ring::Q, &q).inv().expect("nonzero");
    if v.is_multiple_of(2) {
        vec![a.clone(), -&a]
    } else {
        vec![a]
    }
}

/// Candidate linear parts for `d = 0`, and whether the list is complete.
fn linear_candidates(p1: &Series, p2: &Series, v: usize) -> (Vec<Matrix>, bool) {
    let (n, ring) = (p2.nvars(), p2.ring());
    let id = Matrix::identity(ring, n);
    if n == 1 {
        let c1 = p1.coeff(&Mono::from_exps(&[v as u32]).expect("small exponent"));
        let c2 = p2.coeff(&Mono::from_exps(&[v as u32]).expect("small exponent"));
        let r = &c1 * &c2.inv().expect("lowest coefficient is nonzero");
        let scalars: Vec<Scalar> = match ring.elements() {
            Some(all) => all.into_iter().filter(|a| !a.is_zero() && a.pow(v as u32) == r).collect(),
            None => rational_roots(&r, v),
        };
        let mats = scalars.into_iter().map(|a| Matrix::from_rows(ring, vec![vec![a]])).collect();
        return (mats, true);
    }
    let Some(elems) = ring.elements() else { return (vec![id], false) };
    let count = (elems.len() as u64).checked_pow((n * n) as u32);
    if count.is_none_or(|c| c > MATRIX_ENUM_LIMIT) {
        return (vec![id], false);
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; n * n];
    loop {
        let rows: Vec<Vec<Scalar>> = (0..n).map(|r| (0..n).map(|c| elems[idx[r * n + c]].clone()).collect()).collect();
        let m = Matrix::from_rows(ring, rows);
        if m.inverse().is_some() {
            out.push(m);
        }
        let mut p = 0;
        loop {
            if p == idx.len() {
                return (out, true);
            }
            idx[p] += 1;
            if idx[p] < elems.len() {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
}

/// Searches for `f ≡ id mod m^{d+1}` (free invertible linear part when
/// `d = 0`) with `P_1 ≡ P_2 ∘ f mod m^{N+1}`. Degree blocks are solved in
/// turn; kernels are enumerated over finite rings and otherwise fixed to
/// the particular solution, which makes a failure inconclusive.
pub fn potential_equivalence_search(p1: &Series, p2: &Series, d: usize, order: usize) -> Result<SearchResult> {
    let (n, ring) = (p2.nvars(), p2.ring());
    if p1.nvars() != n || p1.ring() != ring {
        return Err(Error::Invalid("potentials over different rings".into()));
    }
    crate::series::check_in_m2(p1)?;
    crate::series::check_in_m2(p2)?;
    if p1.order() < order || p2.order() < order {
        return Err(Error::Precondition(format!("potentials are not known to order {order}")));
    }
    let p1 = p1.truncate(order);
    let p2 = p2.truncate(order);
    let id = FormalDiffeo::identity(ring, n, order);
    let mut res = SearchResult { outcome: SearchOutcome::Indeterminate, d, order, failed_at: None, nodes: 0 };
    let Some(v) = p2.valuation() else {
        res.outcome = if p1.is_zero() { SearchOutcome::Found(id) } else { SearchOutcome::NotEquivalent };
        res.failed_at = p1.valuation();
        return Ok(res);
    };
    let grads: Vec<Series> = (0..n).map(|i| p2.partial(i)).collect::<Result<_>>()?;
    let mut s = Search { p1: p1.clone(), p2: p2.clone(), grads, n, ring, order, d, v, nodes: 0, exhaustive: true, failed_at: None };
    let (linears, complete) = if d == 0 { linear_candidates(&p1, &p2, v) } else { (vec![Matrix::identity(ring, n)], true) };
    s.exhaustive = complete;
    let mut found = None;
    for l in &linears {
        let f: Vec<Series> = (0..n)
            .map(|j| {
                let mut c = Series::zero(ring, n, order);
                for i in 0..n {
                    c.add_term(Mono::var(i), l.get(j, i));
                }
                c
            })
            .collect();
        if let Some(g) = s.dfs(f, 2)? {
            found = Some(g);
            break;
        }
    }
    res.nodes = s.nodes;
    res.failed_at = s.failed_at;
    res.outcome = match found {
        Some(g) => {
            let f = FormalDiffeo::new(g)?;
            if !f.pull_back(&p2)?.agrees_with(&p1) || (d > 0 && !f.is_identity_mod(d)) {
                return Err(Error::Internal("search produced a change of variables that does not verify".into()));
            }
            SearchOutcome::Found(f)
        }
        None if s.exhaustive => SearchOutcome::NotEquivalent,
        None => SearchOutcome::Indeterminate,
    };
    Ok(res)
}
