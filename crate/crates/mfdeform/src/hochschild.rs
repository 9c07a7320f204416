//! Hochschild cohomology in a finite window.
//!
//! Three complexes are compared: the reduced bar complex of `A` truncated
//! at length `L`, the curved algebra `A_𝐯` on `E_R`, and the Clifford
//! complex `𝒞 = (Cl(-½ Hess 𝔓), -d𝔓 ⌟ •)`. Each is cut down to a finite
//! complex over the ground field and its cohomology is read off grade by
//! grade (length for bar cochains, x-degree otherwise).
//!
//! Cochains of parity `t` are maps `A[1]^{⊗r} → A` of degree `t`. Koszul
//! signs use their reduced degree `t - 1`: a cochain passing inputs picks up
//! `(-1)^{(t-1) ✠}`. With this reading the unit cochain is a cocycle and
//! `d² = 0`.

use std::collections::HashMap;

use crate::ainfinity::{for_each_tuple, render_tuple, shifted, tuple_key, AInfinity, CheckReport};
use crate::error::{Error, Result};
use crate::exterior::{all_blades, Blade, Ext, ExtR};
use crate::linalg::Matrix;
use crate::scalar::{sign, Ring, Scalar};
use crate::series::{check_in_m2, monomials_up_to, Mono, Series};

// ---------------------------------------------------------------------------
// Finite graded complexes

/// Finite ℤ/2-graded complex whose coordinates carry a grade. Coordinates of
/// each parity are listed in ascending grade and `d[p]` (columns indexed by
/// parity-`p` coordinates) maps parity `p` to parity `1 - p` without
/// lowering the grade.
#[derive(Clone, Debug)]
pub struct GradedComplex {
    pub ring: Ring,
    pub grades: [Vec<usize>; 2],
    pub d: [Matrix; 2],
}

/// A cohomology class: its leading grade, the representative cut to the
/// window, and a cocycle of the full finite complex projecting onto it.
#[derive(Clone, Debug, PartialEq)]
pub struct Representative {
    pub grade: usize,
    pub parity: usize,
    pub coords: Vec<Scalar>,
    pub lift: Vec<Scalar>,
}

#[derive(Clone, Debug)]
pub struct Cohomology {
    /// Highest certified grade.
    pub window: usize,
    /// `ranks[p][g]` for `g <= window`.
    pub ranks: [Vec<usize>; 2],
    pub reps: Vec<Representative>,
}

impl Cohomology {
    pub fn rank(&self, grade: usize, parity: usize) -> usize {
        self.ranks[parity].get(grade).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.ranks.iter().flatten().sum()
    }

    /// Ranks restricted to grades `<= w`.
    pub fn ranks_upto(&self, w: usize) -> [Vec<usize>; 2] {
        let cut = |v: &Vec<usize>| v.iter().take(w + 1).copied().collect();
        [cut(&self.ranks[0]), cut(&self.ranks[1])]
    }
}

/// Incremental reduced row echelon form; each row keeps a full-length lift.
struct Echelon {
    rows: Vec<(usize, Vec<Scalar>, Vec<Scalar>, bool)>,
}

impl Echelon {
    fn insert(&mut self, mut v: Vec<Scalar>, mut lift: Vec<Scalar>, tagged: bool) {
        for (c, row, rl, _) in &self.rows {
            let f = v[*c].clone();
            if f.is_zero() {
                continue;
            }
            axpy(&mut v, &f, row);
            axpy(&mut lift, &f, rl);
        }
        let Some(p) = v.iter().position(|x| !x.is_zero()) else { return };
        let inv = v[p].inv().expect("nonzero pivot");
        for x in v.iter_mut().chain(lift.iter_mut()) {
            *x *= &inv;
        }
        for (_, row, rl, _) in self.rows.iter_mut() {
            let f = row[p].clone();
            if !f.is_zero() {
                axpy(row, &f, &v);
                axpy(rl, &f, &lift);
            }
        }
        self.rows.push((p, v, lift, tagged));
    }
}

/// `v -= f * w`.
fn axpy(v: &mut [Scalar], f: &Scalar, w: &[Scalar]) {
    for (a, b) in v.iter_mut().zip(w) {
        if !b.is_zero() {
            *a -= &(f * b);
        }
    }
}

/// Cohomology of a finite graded complex, certified for grades `<= window`.
///
/// The rank at grade `g` counts classes whose representative has lowest
/// grade `g`: it is `dim π_g(Z) - dim π_g(B)` minus the same at `g - 1`,
/// where `π_g` forgets coordinates above `g`. Pivots are taken on the
/// lowest-grade coordinate, so the output depends only on coordinate order.
pub fn complex_cohomology(c: &GradedComplex, window: usize) -> Result<Cohomology> {
    for p in 0..2 {
        if c.d[p].cols() != c.grades[p].len() || c.d[p].rows() != c.grades[1 - p].len() {
            return Err(Error::Invalid("differential shape does not match the coordinates".into()));
        }
        if c.grades[p].windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Invalid("coordinates must be sorted by grade".into()));
        }
        if !c.d[1 - p].mul(&c.d[p]).is_zero() {
            return Err(Error::Invalid(format!("d^2 != 0 on parity {p}")));
        }
        for col in 0..c.d[p].cols() {
            for row in 0..c.d[p].rows() {
                if !c.d[p].at(row, col).is_zero() && c.grades[1 - p][row] < c.grades[p][col] {
                    return Err(Error::Invalid("differential lowers the grade".into()));
                }
            }
        }
    }
    let mut ranks = [vec![0; window + 1], vec![0; window + 1]];
    let mut reps = Vec::new();
    for p in 0..2 {
        let cut = c.grades[p].iter().take_while(|&&g| g <= window).count();
        let mut ech = Echelon { rows: Vec::new() };
        let b = &c.d[1 - p];
        for col in 0..b.cols() {
            let v = b.column(col);
            ech.insert(v[..cut].to_vec(), v, false);
        }
        for z in c.d[p].kernel() {
            ech.insert(z[..cut].to_vec(), z, true);
        }
        let mut mine: Vec<Representative> = ech
            .rows
            .into_iter()
            .filter(|r| r.3)
            .map(|(piv, coords, lift, _)| Representative { grade: c.grades[p][piv], parity: p, coords, lift })
            .collect();
        mine.sort_by_key(|r| r.coords.iter().position(|x| !x.is_zero()));
        for r in &mine {
            ranks[p][r.grade] += 1;
        }
        reps.extend(mine);
    }
    Ok(Cohomology { window, ranks, reps })
}

/// Coordinates `x^m v_I` of `E_R` modulo `m^(order+1)`, one list per parity,
/// sorted by x-degree.
#[derive(Clone, Debug)]
pub struct ExtCoords {
    pub nvars: usize,
    pub order: usize,
    pub items: [Vec<(Mono, Blade)>; 2],
    index: [HashMap<(Mono, Blade), usize>; 2],
}

impl ExtCoords {
    pub fn new(n: usize, order: usize) -> ExtCoords {
        let mut items: [Vec<(Mono, Blade)>; 2] = [Vec::new(), Vec::new()];
        for m in monomials_up_to(n, order) {
            for b in all_blades(n) {
                items[b.parity()].push((m, b));
            }
        }
        let index = [0, 1].map(|p: usize| items[p].iter().enumerate().map(|(i, k)| (*k, i)).collect());
        ExtCoords { nvars: n, order, items, index }
    }

    pub fn grades(&self) -> [Vec<usize>; 2] {
        [0, 1].map(|p: usize| self.items[p].iter().map(|(m, _)| m.degree()).collect())
    }

    /// Coordinates of the parity-`p` part of `a`.
    pub fn vector(&self, ring: Ring, a: &ExtR, p: usize) -> Vec<Scalar> {
        let mut v = ring_vec(ring, self.items[p].len());
        for (b, s) in a.terms() {
            if b.parity() != p {
                continue;
            }
            for (m, c) in s.terms() {
                if m.degree() <= self.order {
                    v[self.index[p][&(*m, *b)]] = c.clone();
                }
            }
        }
        v
    }

    pub fn element(&self, p: usize, v: &[Scalar]) -> ExtR {
        let mut out = ExtR::zero(self.nvars);
        for (k, c) in v.iter().enumerate() {
            if !c.is_zero() {
                let (m, b) = self.items[p][k];
                out.add_term(b, Series::monomial(self.nvars, m, c.clone(), self.order));
            }
        }
        out
    }
}

fn ring_vec(ring: Ring, len: usize) -> Vec<Scalar> {
    vec![ring.zero(); len]
}

/// Matrix of an `R`-linear odd map on `E_R / m^(order+1)` given its values
/// on the blades.
fn odd_map_matrix(ring: Ring, coords: &ExtCoords, on_blade: &HashMap<Blade, ExtR>) -> [Matrix; 2] {
    [0, 1].map(|p: usize| {
        let mut m = Matrix::zeros(ring, coords.items[1 - p].len(), coords.items[p].len());
        for (col, (mono, b)) in coords.items[p].iter().enumerate() {
            let img = &on_blade[b];
            for (ob, s) in img.terms() {
                let shifted_s = s.shift(mono, &ring.one()).truncate(coords.order);
                for (om, c) in shifted_s.terms() {
                    if let Some(&row) = coords.index[1 - p].get(&(*om, *ob)) {
                        m.add_to(row, col, c);
                    }
                }
            }
        }
        m
    })
}

// ---------------------------------------------------------------------------
// The Clifford complex

/// `𝒞 = Cl(-½ Hess 𝔓)` on the ordered-product basis `v̄_I` with differential
/// `-d𝔓 ⌟ •`. The differential is trusted to order `N - 1` and products to
/// order `N - 2`, where `N` is the order of `𝔓`.
#[derive(Clone, Debug)]
pub struct CliffordComplex {
    ring: Ring,
    nvars: usize,
    potential: Series,
    grad: Vec<Series>,
    /// `quad[i][i] = -½ ∂_i² 𝔓`, `quad[i][j] = -∂_i ∂_j 𝔓`.
    quad: Vec<Vec<Series>>,
}

pub fn clifford_complex(p: &Series) -> Result<CliffordComplex> {
    check_in_m2(p)?;
    if p.order() < 2 {
        return Err(Error::Precondition("the potential needs order at least 2".into()));
    }
    let n = p.nvars();
    let grad = (0..n).map(|i| p.partial(i)).collect::<Result<Vec<_>>>()?;
    let quad = p.half_hessian()?.iter().map(|row| row.iter().map(|s| -s).collect()).collect();
    Ok(CliffordComplex { ring: p.ring(), nvars: n, potential: p.clone(), grad, quad })
}

impl CliffordComplex {
    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn potential(&self) -> &Series {
        &self.potential
    }

    /// Trust order `M = N - 1` of the differential.
    pub fn order(&self) -> usize {
        self.potential.order() - 1
    }

    /// Trust order `N - 2` of products.
    pub fn product_order(&self) -> usize {
        self.potential.order() - 2
    }

    /// Least x-degree raised by the differential; zero when it vanishes.
    pub fn shift(&self) -> usize {
        self.grad.iter().filter_map(|g| g.valuation()).min().unwrap_or(0)
    }

    /// Highest grade at which truncation cannot create spurious classes.
    pub fn window(&self) -> usize {
        self.order().saturating_sub(self.shift())
    }

    /// `-d𝔓 ⌟ a = Σ_j (-1)^j ∂_{i_j}𝔓 v̄_{I∖i_j}`.
    pub fn differential(&self, a: &ExtR) -> ExtR {
        let neg: Vec<Series> = self.grad.iter().map(|g| -g).collect();
        a.contract(&neg).truncate(self.order())
    }

    /// Right multiplication of a basis monomial by a generator, both
    /// one-based: `v̄_I v_l`.
    fn blade_times_gen(&self, i: Blade, l: usize) -> Vec<(Blade, Series)> {
        let o = self.product_order();
        let one = Series::one(self.ring, self.nvars, o);
        let Some(&r) = i.indices().last() else {
            return vec![(Blade::single(l), one)];
        };
        let rest = Blade(i.0 & !(1 << (r - 1)));
        if l > r {
            return vec![(Blade(i.0 | (1 << (l - 1))), one)];
        }
        if l == r {
            return vec![(rest, self.quad[l - 1][l - 1].truncate(o))];
        }
        // v̄_{I'} v_r v_l = -(v̄_{I'} v_l) v_r - ∂_r ∂_l 𝔓 v̄_{I'}; every index
        // left of v_r is smaller than r.
        let mut out: Vec<(Blade, Series)> =
            self.blade_times_gen(rest, l).into_iter().map(|(k, c)| (Blade(k.0 | (1 << (r - 1))), -&c)).collect();
        out.push((rest, self.quad[r - 1][l - 1].truncate(o)));
        out
    }

    fn times_gen(&self, a: &ExtR, l: usize) -> ExtR {
        let mut out = ExtR::zero(self.nvars);
        for (b, c) in a.terms() {
            for (k, s) in self.blade_times_gen(*b, l) {
                out.add_term(k, c * &s);
            }
        }
        out
    }

    /// Clifford product, exact to `N - 2`.
    pub fn mul(&self, a: &ExtR, b: &ExtR) -> ExtR {
        let mut out = ExtR::zero(self.nvars);
        for (j, c) in b.terms() {
            let mut t = a.truncate(self.product_order());
            for l in j.indices() {
                t = self.times_gen(&t, l);
            }
            out = out.add(&t.scale(c));
        }
        out.truncate(self.product_order())
    }

    /// `v_l`, one-based.
    pub fn generator(&self, l: usize) -> ExtR {
        ExtR::basis(self.nvars, Blade::single(l), Series::one(self.ring, self.nvars, self.product_order()))
    }

    pub fn coords(&self) -> ExtCoords {
        ExtCoords::new(self.nvars, self.order())
    }

    /// The finite complex over `R / m^N`.
    pub fn graded(&self) -> GradedComplex {
        let coords = self.coords();
        let on_blade: HashMap<Blade, ExtR> = all_blades(self.nvars)
            .into_iter()
            .map(|b| (b, self.differential(&ExtR::basis(self.nvars, b, Series::one(self.ring, self.nvars, self.order())))))
            .collect();
        GradedComplex { ring: self.ring, grades: coords.grades(), d: odd_map_matrix(self.ring, &coords, &on_blade) }
    }

    pub fn cohomology(&self) -> Result<Cohomology> {
        complex_cohomology(&self.graded(), self.window())
    }

    pub fn representative(&self, r: &Representative) -> ExtR {
        self.coords().element(r.parity, &r.coords)
    }

    /// `(-d𝔓 ⌟)² = 0` on every basis element.
    pub fn check_d_squared(&self) -> bool {
        all_blades(self.nvars).into_iter().all(|b| {
            let e = ExtR::basis(self.nvars, b, Series::one(self.ring, self.nvars, self.order()));
            self.differential(&self.differential(&e)).is_zero()
        })
    }
}

// ---------------------------------------------------------------------------
// The Jacobian algebra

/// `R / (∂_1 𝔓, ..., ∂_n 𝔓)` modulo `m^(order+1)`, with normal forms spanned
/// by the monomials that are not leading (lowest-degree) terms of the ideal.
#[derive(Clone, Debug)]
pub struct JacobianAlgebra {
    ring: Ring,
    nvars: usize,
    order: usize,
    monos: Vec<Mono>,
    rows: Vec<(usize, Vec<Scalar>)>,
    basis: Vec<Mono>,
}

/// The Jacobian algebra at the trust order `N - 1` of the derivatives.
pub fn jacobian_algebra(p: &Series) -> Result<JacobianAlgebra> {
    if p.order() == 0 {
        return Err(Error::Precondition("the potential needs positive order".into()));
    }
    JacobianAlgebra::with_order(p, p.order() - 1)
}

impl JacobianAlgebra {
    pub fn with_order(p: &Series, order: usize) -> Result<JacobianAlgebra> {
        check_in_m2(p)?;
        if order + 1 > p.order() {
            return Err(Error::Precondition(format!("order {order} exceeds the derivative trust order {}", p.order().saturating_sub(1))));
        }
        let n = p.nvars();
        let ring = p.ring();
        let monos = monomials_up_to(n, order);
        let index: HashMap<Mono, usize> = monos.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        let mut gens = Vec::new();
        for i in 0..n {
            let g = p.partial(i)?.truncate(order);
            for m in &monos {
                let s = g.shift(m, &ring.one()).truncate(order);
                if !s.is_zero() {
                    let mut v = ring_vec(ring, monos.len());
                    for (mm, c) in s.terms() {
                        v[index[mm]] = c.clone();
                    }
                    gens.push(v);
                }
            }
        }
        let rows = if gens.is_empty() {
            Vec::new()
        } else {
            let rr = Matrix::from_rows(ring, gens).rref();
            rr.pivots.iter().enumerate().map(|(r, &c)| (c, rr.matrix.row(r).to_vec())).collect()
        };
        let pivots: Vec<usize> = rows.iter().map(|r| r.0).collect();
        let basis = monos.iter().enumerate().filter(|(i, _)| !pivots.contains(i)).map(|(_, m)| *m).collect();
        Ok(JacobianAlgebra { ring, nvars: n, order, monos, rows, basis })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Normal-form monomials.
    pub fn basis(&self) -> &[Mono] {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Normal-form count per x-degree.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.order + 1];
        for m in &self.basis {
            r[m.degree()] += 1;
        }
        r
    }

    /// Linear projection onto the normal-form span.
    pub fn reduce(&self, s: &Series) -> Series {
        let mut v: Vec<Scalar> = self.monos.iter().map(|m| s.coeff(m)).collect();
        for (c, row) in &self.rows {
            let f = v[*c].clone();
            if !f.is_zero() {
                axpy(&mut v, &f, row);
            }
        }
        let mut out = Series::zero(self.ring, self.nvars, self.order);
        for (m, c) in self.monos.iter().zip(v) {
            out.add_term(*m, c);
        }
        out
    }

    pub fn contains(&self, s: &Series) -> bool {
        self.reduce(s).is_zero()
    }
}

// ---------------------------------------------------------------------------
// Centrality in Cl ⊗ Jac

#[derive(Clone, Debug)]
pub struct CentreReport {
    pub cohomology: Cohomology,
    /// Images of the representatives in `Cl ⊗ Jac`.
    pub images: Vec<ExtR>,
    pub check: CheckReport,
}

impl CentreReport {
    pub fn passed(&self) -> bool {
        self.check.passed
    }
}

/// Computes `H*(𝒞)`, maps each representative into `Cl ⊗ Jac` and checks
/// `v_l a = (-1)^r a v_l` modulo the Jacobian ideal for each homogeneous
/// component `a` of length `r`, at the product trust order `N - 2`.
pub fn embed_and_centre_check(p: &Series) -> Result<CentreReport> {
    let c = clifford_complex(p)?;
    let coh = c.cohomology()?;
    let o = c.product_order();
    let jac = JacobianAlgebra::with_order(p, o)?;
    let reduce = |a: &ExtR| -> ExtR {
        let mut out = ExtR::zero(c.nvars);
        for (b, s) in a.terms() {
            out.add_term(*b, jac.reduce(&s.truncate(o)));
        }
        out
    };
    let mut rep = CheckReport::new("centre", format!("grades <= {}, products mod m^{}", coh.window, o + 1));
    let mut images = Vec::new();
    for r in &coh.reps {
        let a = c.representative(r).truncate(o);
        images.push(reduce(&a));
        for grade in 0..=c.nvars {
            let ar = a.grade_part(grade);
            if ar.is_zero() {
                continue;
            }
            for l in 1..=c.nvars {
                rep.tick();
                let v = c.generator(l);
                let lhs = c.mul(&v, &ar);
                let rhs = c.mul(&ar, &v).scale_scalar(&sign(c.ring, grade));
                let diff = reduce(&lhs.sub(&rhs));
                if !diff.is_zero() {
                    rep.fail(format!("class at grade {} (length {grade}) fails to commute with v{l}: {diff}", r.grade));
                }
            }
        }
    }
    Ok(CentreReport { cohomology: coh, images, check: rep })
}

// ---------------------------------------------------------------------------
// Reduced Hochschild cochains

/// Reduced cochain `φ = (φ^r)_{r <= len}` of parity `t`: values on tuples
/// of non-unit basis blades, with `|φ^r(a)| ≡ t + Σ ||a_i||`.
#[derive(Clone, Debug)]
pub struct HochschildCochain {
    ring: Ring,
    nvars: usize,
    parity: usize,
    len: usize,
    comps: HashMap<u128, Ext>,
}

impl HochschildCochain {
    pub fn zero(ring: Ring, nvars: usize, parity: usize, len: usize) -> HochschildCochain {
        HochschildCochain { ring, nvars, parity: parity % 2, len, comps: HashMap::new() }
    }

    /// `φ^0 = 1`.
    pub fn unit(ring: Ring, nvars: usize, len: usize) -> HochschildCochain {
        let mut c = HochschildCochain::zero(ring, nvars, 0, len);
        c.comps.insert(tuple_key(&[]), Ext::blade(ring, nvars, Blade::EMPTY));
        c
    }

    /// `φ^0 = v_I`.
    pub fn constant(ring: Ring, nvars: usize, b: Blade, len: usize) -> HochschildCochain {
        let mut c = HochschildCochain::zero(ring, nvars, b.parity(), len);
        c.comps.insert(tuple_key(&[]), Ext::blade(ring, nvars, b));
        c
    }

    /// `φ^1 = id` on non-unit inputs (odd).
    pub fn identity(ring: Ring, nvars: usize, len: usize) -> HochschildCochain {
        let mut c = HochschildCochain::zero(ring, nvars, 1, len);
        for b in all_blades(nvars).into_iter().filter(|b| !b.is_empty()) {
            c.comps.insert(tuple_key(&[b]), Ext::blade(ring, nvars, b));
        }
        c
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn parity(&self) -> usize {
        self.parity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn set(&mut self, t: &[Blade], value: Ext) -> Result<()> {
        if t.len() > self.len {
            return Err(Error::ArityCap { needed: t.len(), cap: self.len });
        }
        if t.iter().any(|b| b.is_empty()) {
            return Err(Error::Invalid(format!("reduced cochain evaluated on the unit at {}", render_tuple(t))));
        }
        let want = (self.parity + t.iter().map(|b| shifted(*b)).sum::<usize>()) % 2;
        if value.parity().is_some_and(|p| p != want) || (value.parity().is_none() && !value.is_zero()) {
            return Err(Error::Invalid(format!("value at {} has the wrong parity", render_tuple(t))));
        }
        if value.is_zero() {
            self.comps.remove(&tuple_key(t));
        } else {
            self.comps.insert(tuple_key(t), value);
        }
        Ok(())
    }

    /// `φ^r(t)`; zero on tuples through the unit or beyond the length cap.
    pub fn get(&self, t: &[Blade]) -> Option<&Ext> {
        if t.len() > self.len {
            return None;
        }
        self.comps.get(&tuple_key(t))
    }

    pub fn entries(&self) -> Vec<(Vec<Blade>, &Ext)> {
        let mut v: Vec<(Vec<Blade>, &Ext)> = self.comps.iter().map(|(k, e)| (crate::ainfinity::key_tuple(*k), e)).collect();
        v.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        v
    }

    pub fn add(&self, o: &HochschildCochain) -> HochschildCochain {
        let mut out = self.clone();
        out.len = self.len.min(o.len);
        for (k, e) in &o.comps {
            let v = out.comps.get(k).map(|x| x.add(e)).unwrap_or_else(|| e.clone());
            if v.is_zero() {
                out.comps.remove(k);
            } else {
                out.comps.insert(*k, v);
            }
        }
        out.comps.retain(|k, _| (k & 0xff) as usize <= out.len);
        out
    }

    pub fn scale(&self, c: &Scalar) -> HochschildCochain {
        let mut out = self.clone();
        out.comps = self.comps.iter().map(|(k, e)| (*k, e.scale_scalar(c))).filter(|(_, e)| !e.is_zero()).collect();
        out
    }

    /// Sign exponent for Koszul signs: the reduced degree `t - 1`.
    fn koszul(&self) -> usize {
        (self.parity + 1) % 2
    }
}

fn unit_free(n: usize) -> Vec<Blade> {
    all_blades(n).into_iter().filter(|b| !b.is_empty()).collect()
}

/// `✠_i = Σ_{j<=i} ||a_j||` for a tuple stored as `(a_k, ..., a_1)`.
fn star(t: &[Blade], i: usize) -> usize {
    let k = t.len();
    (1..=i).map(|j| shifted(t[k - j])).sum::<usize>() % 2
}

fn same_algebra(phi: &HochschildCochain, a: &AInfinity) -> Result<()> {
    if phi.ring != a.ring() {
        return Err(Error::RingMismatch(phi.ring.to_string(), a.ring().to_string()));
    }
    if phi.nvars != a.nvars() {
        return Err(Error::NvarsMismatch(phi.nvars, a.nvars()));
    }
    Ok(())
}

/// Replaces `t[lo..hi]` by the single blade `b`.
fn splice(t: &[Blade], lo: usize, hi: usize, b: Blade) -> Vec<Blade> {
    let mut out = Vec::with_capacity(t.len() + 1 + lo - hi);
    out.extend_from_slice(&t[..lo]);
    out.push(b);
    out.extend_from_slice(&t[hi..]);
    out
}

/// The Hochschild differential on the length-`L` truncation:
/// `(dφ)(a) = Σ (-1)^{||φ|| ✠_i} μ(.., φ(..), a_i, .., a_1)
///          + (-1)^{||φ||+1} Σ (-1)^{✠_i} φ(.., μ(..), a_i, .., a_1)`.
pub fn hochschild_differential(phi: &HochschildCochain, a: &AInfinity) -> Result<HochschildCochain> {
    same_algebra(phi, a)?;
    let l = phi.len;
    if a.arity_cap() < l + 1 {
        return Err(Error::ArityCap { needed: l + 1, cap: a.arity_cap() });
    }
    let ring = phi.ring;
    let n = phi.nvars;
    let s = phi.koszul();
    let mut out = HochschildCochain::zero(ring, n, phi.parity + 1, l);
    let basis = unit_free(n);
    for k in 0..=l {
        for_each_tuple(&basis, k, |t| {
            let mut acc = Ext::zero(n);
            for j in 0..k {
                for i in 0..=(k - j) {
                    let (lo, hi) = (k - i - j, k - i);
                    let Some(inner) = phi.get(&t[lo..hi]) else { continue };
                    let sg = sign(ring, s * star(t, i));
                    for (b, c) in inner.terms() {
                        if let Some(v) = a.mu(&splice(t, lo, hi, *b)) {
                            acc = acc.add(&v.scale_scalar(&(c * &sg)));
                        }
                    }
                }
            }
            for j in 2..=k {
                for i in 0..=(k - j) {
                    let (lo, hi) = (k - i - j, k - i);
                    let Some(inner) = a.mu(&t[lo..hi]) else { continue };
                    let sg = sign(ring, s + 1 + star(t, i));
                    for (b, c) in inner.terms() {
                        if b.is_empty() {
                            continue;
                        }
                        if let Some(v) = phi.get(&splice(t, lo, hi, *b)) {
                            acc = acc.add(&v.scale_scalar(&(c * &sg)));
                        }
                    }
                }
            }
            if !acc.is_zero() {
                out.comps.insert(tuple_key(t), acc);
            }
        });
    }
    Ok(out)
}

/// The A∞ product on cochains: `μ(.., φ(..), .., ψ(..), ..)` with Koszul
/// signs `(-1)^{||φ|| ✠_l + ||ψ|| ✠_i}`, `φ` reading `a_{l+m}..a_{l+1}` and
/// `ψ` reading `a_{i+j}..a_{i+1}`. Inserting `𝐯` turns it into `μ_𝐯²`.
pub fn mu2_cochain(phi: &HochschildCochain, psi: &HochschildCochain, a: &AInfinity) -> Result<HochschildCochain> {
    same_algebra(phi, a)?;
    same_algebra(psi, a)?;
    let l = phi.len.min(psi.len);
    if a.arity_cap() < l + 2 {
        return Err(Error::ArityCap { needed: l + 2, cap: a.arity_cap() });
    }
    let ring = phi.ring;
    let n = phi.nvars;
    let mut out = HochschildCochain::zero(ring, n, phi.parity + psi.parity, l);
    let basis = unit_free(n);
    for k in 0..=l {
        for_each_tuple(&basis, k, |t| {
            let mut acc = Ext::zero(n);
            for i in 0..=k {
                for j in 0..=(k - i) {
                    let (plo, phi_hi) = (k - i - j, k - i);
                    let Some(pv) = psi.get(&t[plo..phi_hi]) else { continue };
                    for ll in (i + j)..=k {
                        for m in 0..=(k - ll) {
                            let (flo, fhi) = (k - ll - m, k - ll);
                            let Some(fv) = phi.get(&t[flo..fhi]) else { continue };
                            let sg = sign(ring, phi.koszul() * star(t, ll) + psi.koszul() * star(t, i));
                            for (fb, fc) in fv.terms() {
                                for (pb, pc) in pv.terms() {
                                    let mut tup = Vec::with_capacity(k - m - j + 2);
                                    tup.extend_from_slice(&t[..flo]);
                                    tup.push(*fb);
                                    tup.extend_from_slice(&t[fhi..plo]);
                                    tup.push(*pb);
                                    tup.extend_from_slice(&t[phi_hi..]);
                                    if let Some(v) = a.mu(&tup) {
                                        acc = acc.add(&v.scale_scalar(&(&(fc * pc) * &sg)));
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if !acc.is_zero() {
                out.comps.insert(tuple_key(t), acc);
            }
        });
    }
    Ok(out)
}

/// Cup product `φ ⌣ ψ = (-1)^{|ψ|} μ²_CC(φ, ψ)`, the dg sign rule, so the
/// unit cochain is a two-sided identity and insertion sends it to the
/// product of `A_𝐯`.
pub fn cup_product(phi: &HochschildCochain, psi: &HochschildCochain, a: &AInfinity) -> Result<HochschildCochain> {
    Ok(mu2_cochain(phi, psi, a)?.scale(&sign(phi.ring, psi.parity)))
}

/// `P_𝐯(φ) = Σ_k φ^k(𝐯, ..., 𝐯)`, exact modulo `m^(L+1)`.
pub fn insertion_map(phi: &HochschildCochain) -> ExtR {
    let n = phi.nvars;
    let l = phi.len;
    let mut out = ExtR::zero(n);
    for (t, v) in phi.entries() {
        if t.iter().any(|b| b.grade() != 1) {
            continue;
        }
        let mut mono = Mono::one();
        for b in &t {
            mono = mono.mul(&Mono::var(b.indices()[0] - 1));
        }
        for (b, c) in v.terms() {
            out.add_term(*b, Series::monomial(n, mono, c.clone(), l));
        }
    }
    if out.is_zero() {
        return out;
    }
    out.truncate(l)
}

// ---------------------------------------------------------------------------
// Finite complexes for the bar side and for A_𝐯

/// Coordinates `(a_k..a_1) ↦ v_b` of the truncated reduced bar complex, one
/// list per parity, sorted by length.
#[derive(Clone, Debug)]
pub struct BarCoords {
    pub nvars: usize,
    pub len: usize,
    pub items: [Vec<(Vec<Blade>, Blade)>; 2],
    index: [HashMap<(u128, Blade), usize>; 2],
}

impl BarCoords {
    pub fn new(n: usize, len: usize) -> BarCoords {
        let mut items: [Vec<(Vec<Blade>, Blade)>; 2] = [Vec::new(), Vec::new()];
        let basis = unit_free(n);
        for r in 0..=len {
            for_each_tuple(&basis, r, |t| {
                let s: usize = t.iter().map(|b| shifted(*b)).sum();
                for b in all_blades(n) {
                    items[(b.parity() + s) % 2].push((t.to_vec(), b));
                }
            });
        }
        let index = [0, 1].map(|p: usize| items[p].iter().enumerate().map(|(i, (t, b))| ((tuple_key(t), *b), i)).collect());
        BarCoords { nvars: n, len, items, index }
    }

    pub fn grades(&self) -> [Vec<usize>; 2] {
        [0, 1].map(|p: usize| self.items[p].iter().map(|(t, _)| t.len()).collect())
    }

    pub fn vector(&self, phi: &HochschildCochain) -> Vec<Scalar> {
        let p = phi.parity;
        let mut v = ring_vec(phi.ring, self.items[p].len());
        for (k, e) in &phi.comps {
            for (b, c) in e.terms() {
                if let Some(&i) = self.index[p].get(&(*k, *b)) {
                    v[i] = c.clone();
                }
            }
        }
        v
    }

    pub fn cochain(&self, ring: Ring, p: usize, v: &[Scalar]) -> HochschildCochain {
        let mut out = HochschildCochain::zero(ring, self.nvars, p, self.len);
        for (i, c) in v.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let (t, b) = &self.items[p][i];
            let add = Ext::basis(self.nvars, *b, c.clone());
            let key = tuple_key(t);
            let cur = out.comps.get(&key).map(|x| x.add(&add)).unwrap_or(add);
            out.comps.insert(key, cur);
        }
        out.comps.retain(|_, e| !e.is_zero());
        out
    }
}

/// The truncated reduced bar complex of `a` as a finite graded complex.
pub fn bar_complex(a: &AInfinity, len: usize) -> Result<(GradedComplex, BarCoords)> {
    let ring = a.ring();
    let coords = BarCoords::new(a.nvars(), len);
    let mut d: Vec<Matrix> = Vec::new();
    for p in 0..2 {
        let mut m = Matrix::zeros(ring, coords.items[1 - p].len(), coords.items[p].len());
        for col in 0..coords.items[p].len() {
            let mut e = ring_vec(ring, coords.items[p].len());
            e[col] = ring.one();
            let dphi = hochschild_differential(&coords.cochain(ring, p, &e), a)?;
            for (row, c) in coords.vector(&dphi).into_iter().enumerate() {
                if !c.is_zero() {
                    m.set(row, col, c);
                }
            }
        }
        d.push(m);
    }
    let d1 = d.pop().expect("two parities");
    let d0 = d.pop().expect("two parities");
    Ok((GradedComplex { ring, grades: coords.grades(), d: [d0, d1] }, coords))
}

/// `d_𝐯 a = (-1)^{|a|} μ_𝐯¹(a)` on `E_R / m^(order+1)`.
pub fn av_differential(a: &AInfinity, x: &ExtR, order: usize) -> Result<ExtR> {
    let mut out = ExtR::zero(a.nvars());
    for p in 0..2 {
        let part = parity_part(x, p);
        if !part.is_zero() {
            out = out.add(&a.mu_v(&[&part], order)?.scale_scalar(&sign(a.ring(), p)));
        }
    }
    Ok(out.truncate(order))
}

/// `x · y = (-1)^{|y|} μ_𝐯²(x, y)` on `E_R / m^(order+1)`.
pub fn av_product(a: &AInfinity, x: &ExtR, y: &ExtR, order: usize) -> Result<ExtR> {
    let mut out = ExtR::zero(a.nvars());
    for p in 0..2 {
        let part = parity_part(y, p);
        if !part.is_zero() && !x.is_zero() {
            out = out.add(&a.mu_v(&[x, &part], order)?.scale_scalar(&sign(a.ring(), p)));
        }
    }
    Ok(out.truncate(order))
}

fn parity_part(x: &ExtR, p: usize) -> ExtR {
    let mut out = ExtR::zero(x.nvars());
    for (b, c) in x.terms() {
        if b.parity() == p {
            out.add_term(*b, c.clone());
        }
    }
    out
}

/// `(E_R / m^(order+1), d_𝐯)` as a finite graded complex.
pub fn av_complex(a: &AInfinity, order: usize) -> Result<(GradedComplex, ExtCoords)> {
    let n = a.nvars();
    let coords = ExtCoords::new(n, order);
    let mut on_blade = HashMap::new();
    for b in all_blades(n) {
        let e = ExtR::basis(n, b, Series::one(a.ring(), n, order));
        on_blade.insert(b, av_differential(a, &e, order)?);
    }
    Ok((GradedComplex { ring: a.ring(), grades: coords.grades(), d: odd_map_matrix(a.ring(), &coords, &on_blade) }, coords))
}

// ---------------------------------------------------------------------------
// Comparison through the insertion map

#[derive(Clone, Debug)]
pub struct InsertionReport {
    pub length: usize,
    /// Common certified grade window.
    pub window: usize,
    pub bar: Cohomology,
    pub av: Cohomology,
    pub clifford: Cohomology,
    pub checks: Vec<CheckReport>,
}

impl InsertionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// `θ`: the ordered products `v_I = ((v_{i_1} · v_{i_2}) ...) · v_{i_r}` in
/// `A_𝐯` satisfy `d_𝐯 v_I = Σ_j (-1)^j ∂_{i_j}𝔓 v_{I∖i_j}`, the differential
/// of `𝒞` on `v̄_I`.
pub fn theta_check(a: &AInfinity, order: usize) -> Result<CheckReport> {
    let n = a.nvars();
    let ring = a.ring();
    let p = a.disc_potential()?;
    let o = order.min(p.order().saturating_sub(1)).min(a.arity_cap().saturating_sub(2));
    let mut rep = CheckReport::new("theta", format!("mod m^{}", o + 1));
    let one = Series::one(ring, n, o);
    let mut v: HashMap<Blade, ExtR> = HashMap::new();
    for b in all_blades(n) {
        let prod = match b.indices().last() {
            None => ExtR::basis(n, Blade::EMPTY, one.clone()),
            Some(&r) => {
                let left = &v[&Blade(b.0 & !(1 << (r - 1)))];
                av_product(a, left, &ExtR::basis(n, Blade::single(r), one.clone()), o)?
            }
        };
        v.insert(b, prod);
    }
    for b in all_blades(n) {
        rep.tick();
        let lhs = av_differential(a, &v[&b], o)?;
        let mut rhs = ExtR::zero(n);
        for (j, i) in b.indices().into_iter().enumerate() {
            let rest = Blade(b.0 & !(1 << (i - 1)));
            let coeff = p.partial(i - 1)?.truncate(o).scale(&sign(ring, j + 1));
            rhs = rhs.add(&v[&rest].scale(&coeff));
        }
        let diff = lhs.sub(&rhs).truncate(o);
        if !diff.is_zero() {
            rep.fail(format!("d_v v_{} differs from the Clifford differential by {diff}", b.render()));
        }
    }
    Ok(rep)
}

/// Compares the truncated bar complex with `A_𝐯` and `𝒞` through `P_𝐯`.
/// Small instances only: `n <= 2`, `L <= 4`, arity cap at least `L + 2`.
pub fn hh_via_insertion(a: &AInfinity, len: usize) -> Result<InsertionReport> {
    let n = a.nvars();
    let ring = a.ring();
    if n > 2 || len > 4 || len == 0 {
        return Err(Error::Precondition(format!("hh_via_insertion needs n <= 2 and 1 <= L <= 4 (got n = {n}, L = {len})")));
    }
    if a.arity_cap() < len + 2 {
        return Err(Error::ArityCap { needed: len + 2, cap: a.arity_cap() });
    }
    let (barc, bcoords) = bar_complex(a, len)?;
    let (avc, acoords) = av_complex(a, len)?;
    let potential = a.disc_potential()?;
    let cl = clifford_complex(&potential)?;
    let window = (len - 1).min(cl.window());
    let bar = complex_cohomology(&barc, window)?;
    let av = complex_cohomology(&avc, window)?;
    let clifford = complex_cohomology(&cl.graded(), window)?;
    let mut checks = Vec::new();

    let mut unit = CheckReport::new("unit", format!("length <= {len}"));
    let one = HochschildCochain::unit(ring, n, len);
    unit.tick();
    if !hochschild_differential(&one, a)?.is_zero() {
        unit.fail("the unit cochain is not a cocycle".into());
    }
    unit.tick();
    let img = insertion_map(&one);
    let expect = ExtR::basis(n, Blade::EMPTY, Series::one(ring, n, len));
    if !img.sub(&expect).is_zero() {
        unit.fail(format!("P_v(1) = {img}"));
    }
    checks.push(unit);

    let mut cocycles = CheckReport::new("cocycle", format!("mod m^{}", len + 1));
    for p in 0..2 {
        for z in barc.d[p].kernel() {
            cocycles.tick();
            let phi = bcoords.cochain(ring, p, &z);
            let img = insertion_map(&phi);
            let dimg = av_differential(a, &img, len)?;
            if !dimg.is_zero() {
                cocycles.fail(format!("image of a parity-{p} cocycle has d_v = {dimg}"));
            }
        }
    }
    checks.push(cocycles);

    let mut coboundaries = CheckReport::new("coboundary", format!("mod m^{}", len + 1));
    for p in 0..2 {
        for col in 0..barc.d[p].cols() {
            coboundaries.tick();
            let b = barc.d[p].column(col);
            let img = insertion_map(&bcoords.cochain(ring, 1 - p, &b));
            let target = acoords.vector(ring, &img, 1 - p);
            if avc.d[p].solve(&target).is_none() {
                coboundaries.fail(format!("image of d({}) is not a d_v-coboundary", render_tuple(&bcoords.items[p][col].0)));
            }
        }
    }
    checks.push(coboundaries);

    let mut cup = CheckReport::new("cup", format!("mod m^{}", len + 1));
    for r1 in &bar.reps {
        for r2 in &bar.reps {
            cup.tick();
            let phi = bcoords.cochain(ring, r1.parity, &r1.lift);
            let psi = bcoords.cochain(ring, r2.parity, &r2.lift);
            let lhs = insertion_map(&cup_product(&phi, &psi, a)?);
            let rhs = av_product(a, &insertion_map(&phi), &insertion_map(&psi), len)?;
            if !lhs.sub(&rhs).truncate(len).is_zero() {
                cup.fail(format!("P_v(φ ⌣ ψ) != P_v φ · P_v ψ for classes at grades {} and {}", r1.grade, r2.grade));
            }
        }
    }
    checks.push(cup);

    checks.push(theta_check(a, len)?);

    let mut ranks = CheckReport::new("ranks", format!("grades <= {window}"));
    for p in 0..2 {
        for g in 0..=window {
            ranks.tick();
            let (b, v, c) = (bar.rank(g, p), av.rank(g, p), clifford.rank(g, p));
            if b != v || v != c {
                ranks.fail(format!("grade {g}, parity {p}: bar {b}, A_v {v}, Clifford {c}"));
            }
        }
    }
    checks.push(ranks);

    Ok(InsertionReport { length: len, window, bar, av, clifford, checks })
}

/// HKR rank of `R_g ⊗ Λ^{≡p} V`: `C(n+g-1, g) · Σ_{t ≡ p} C(n, t)`.
pub fn hkr_rank(n: usize, grade: usize, parity: usize) -> usize {
    use crate::exterior::binomial;
    let poly = if n == 0 { usize::from(grade == 0) } else { binomial(n + grade - 1, grade) };
    poly * (0..=n).filter(|t| t % 2 == parity).map(|t| binomial(n, t)).sum::<usize>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::minimal_model;

    fn q(p: &str, n: usize, order: usize) -> Series {
        crate::series::parse_polynomial(Ring::Q, n, order, p).unwrap()
    }

    #[test]
    fn zero_potential_gives_hkr_ranks() {
        for n in 1..=3 {
            let c = clifford_complex(&Series::zero(Ring::Q, n, 4)).unwrap();
            let h = c.cohomology().unwrap();
            assert_eq!(h.window, 3);
            for g in 0..=3 {
                for p in 0..2 {
                    assert_eq!(h.rank(g, p), hkr_rank(n, g, p), "n={n} g={g} p={p}");
                }
            }
        }
    }

    /// Independent oracle for homogeneous `P` of degree `v`: the complex
    /// splits by weight `g + (v-1) r`; ranks come from block matrices.
    fn weight_oracle(p: &Series, v: usize, maxw: usize) -> usize {
        let n = p.nvars();
        let ring = p.ring();
        let grads: Vec<Series> = (0..n).map(|i| p.partial(i).unwrap()).collect();
        let mut total = 0;
        for w in 0..=maxw {
            let cell = |r: usize| -> Vec<(Mono, Blade)> {
                let mut out = Vec::new();
                if w < (v - 1) * r {
                    return out;
                }
                let g = w - (v - 1) * r;
                for m in crate::series::monomials_of_degree(n, g) {
                    for b in all_blades(n).into_iter().filter(|b| b.grade() == r) {
                        out.push((m, b));
                    }
                }
                out
            };
            let dmat = |r: usize| -> Matrix {
                let src = cell(r);
                let tgt = if r == 0 { Vec::new() } else { cell(r - 1) };
                let mut m = Matrix::zeros(ring, tgt.len(), src.len());
                for (c, (mono, b)) in src.iter().enumerate() {
                    for (j, i) in b.indices().into_iter().enumerate() {
                        let rest = Blade(b.0 & !(1 << (i - 1)));
                        for (gm, gc) in grads[i - 1].terms() {
                            let mm = gm.mul(mono);
                            if let Some(row) = tgt.iter().position(|x| *x == (mm, rest)) {
                                let s = if (j + 1) % 2 == 0 { gc.clone() } else { -gc };
                                m.add_to(row, c, &s);
                            }
                        }
                    }
                }
                m
            };
            for r in 0..=n {
                let dim = cell(r).len();
                let ker = dim - if r == 0 { 0 } else { dmat(r).rank() };
                let im = if r < n { dmat(r + 1).rank() } else { 0 };
                total += ker - im;
            }
        }
        total
    }

    #[test]
    fn morse_and_cubic_match_the_weight_oracle_and_jacobian() {
        for n in 1..=3 {
            let terms: Vec<String> = (1..=n).map(|i| format!("x{i}^2")).collect();
            let p = q(&terms.join("+"), n, 4);
            let c = clifford_complex(&p).unwrap();
            let h = c.cohomology().unwrap();
            assert_eq!(h.total(), 1);
            assert_eq!(h.total(), weight_oracle(&p, 2, h.window));
            assert_eq!(jacobian_algebra(&p).unwrap().rank(), 1);
        }
        let p = q("x1^3", 1, 5);
        let h = clifford_complex(&p).unwrap().cohomology().unwrap();
        assert_eq!(h.total(), 2);
        assert_eq!(jacobian_algebra(&p).unwrap().rank(), 2);
        assert_eq!(weight_oracle(&p, 3, 2 * h.window), 2);
    }

    #[test]
    fn jacobian_examples() {
        assert_eq!(jacobian_algebra(&Series::zero(Ring::Q, 1, 4)).unwrap().rank(), 4);
        assert_eq!(jacobian_algebra(&q("x1^2", 1, 4)).unwrap().rank(), 1);
        let j = JacobianAlgebra::with_order(&q("x1^3", 1, 5), 4).unwrap();
        assert_eq!(j.ranks(), vec![1, 1, 0, 0, 0]);
        let s = q("1+x1+x1^2+x1^4", 1, 4);
        assert_eq!(j.reduce(&j.reduce(&s)), j.reduce(&s));
        assert!(j.contains(&q("5*x1^3", 1, 4)));
    }

    #[test]
    fn clifford_relations_and_differential() {
        let p = q("x1^2+x1*x2+x2^3", 2, 4);
        let c = clifford_complex(&p).unwrap();
        assert!(c.check_d_squared());
        let (v1, v2) = (c.generator(1), c.generator(2));
        // v1 v1 = -1, v1 v2 + v2 v1 = -1
        assert_eq!(c.mul(&v1, &v1), ExtR::basis(2, Blade::EMPTY, q("-1", 2, 2)));
        let anti = c.mul(&v1, &v2).add(&c.mul(&v2, &v1));
        assert_eq!(anti, ExtR::basis(2, Blade::EMPTY, q("-1", 2, 2)));
        // associativity on generators
        let lhs = c.mul(&c.mul(&v2, &v1), &v2);
        let rhs = c.mul(&v2, &c.mul(&v1, &v2));
        assert_eq!(lhs, rhs);
        // -dP ⌟ v12 = -∂1P v2 + ∂2P v1
        let v12 = ExtR::basis(2, Blade(3), Series::one(Ring::Q, 2, 3));
        let expect = ExtR::basis(2, Blade(2), q("-2*x1-x2", 2, 3)).add(&ExtR::basis(2, Blade(1), q("x1+3*x2^2", 2, 3)));
        assert_eq!(c.differential(&v12), expect);
    }

    #[test]
    fn char_two_example_has_zero_differential() {
        let ring = Ring::Fp(2);
        let p = crate::series::parse_polynomial(ring, 1, 7, "x1^2+x1^6").unwrap();
        let c = clifford_complex(&p).unwrap();
        assert!(c.graded().d.iter().all(|m| m.is_zero()));
        let v = c.generator(1);
        let sq = c.mul(&v, &v);
        assert_eq!(sq, ExtR::basis(1, Blade::EMPTY, crate::series::parse_polynomial(ring, 1, 5, "1+x1^4").unwrap()));
        let h = c.cohomology().unwrap();
        assert_eq!(h.window, 6);
        assert!((0..=6).all(|g| h.rank(g, 0) == 1 && h.rank(g, 1) == 1));
    }

    #[test]
    fn centre_examples() {
        assert!(embed_and_centre_check(&Series::zero(Ring::Q, 2, 4)).unwrap().passed());
        let r = embed_and_centre_check(&q("x1*x2", 2, 4)).unwrap();
        assert!(r.passed(), "{:?}", r.check.failures);
        assert!(r.check.checked > 0);
        let r = embed_and_centre_check(&crate::series::parse_polynomial(Ring::Fp(2), 1, 7, "x1^2+x1^6").unwrap()).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn reversed_variables_give_equal_ranks() {
        let p = q("x1^2*x2+x2^3+x1^3", 2, 5);
        let rev = q("x2^2*x1+x1^3+x2^3", 2, 5);
        let a = clifford_complex(&p).unwrap().cohomology().unwrap();
        let b = clifford_complex(&rev).unwrap().cohomology().unwrap();
        assert_eq!(a.ranks, b.ranks);
    }

    fn mult(ring: Ring, dim: usize, by: usize) -> Matrix {
        let mut d = Matrix::zeros(ring, dim, dim);
        for i in 0..dim.saturating_sub(by) {
            d.set(i + by, i, ring.one());
        }
        d
    }

    #[test]
    fn two_periodic_complexes() {
        let ring = Ring::Q;
        // x: R/x^2 ⇄ R/x^2 :x has kernel and image of rank 1 at each step.
        let d = mult(ring, 2, 1);
        assert_eq!(d.rank(), 1);
        assert_eq!(d.kernel().len(), 1);
        let c = GradedComplex { ring, grades: [vec![0, 1], vec![0, 1]], d: [d.clone(), d] };
        assert_eq!(complex_cohomology(&c, 1).unwrap().total(), 0);
        // x: R/x^4 → R/x^4, x^3 back: exact as well.
        let c = GradedComplex { ring, grades: [vec![0, 1, 2, 3], vec![0, 1, 2, 3]], d: [mult(ring, 4, 1), mult(ring, 4, 3)] };
        assert_eq!(complex_cohomology(&c, 3).unwrap().total(), 0);
        // x on both sides over R/x^4 is not a complex.
        let bad = GradedComplex { ring, grades: [vec![0, 1, 2, 3], vec![0, 1, 2, 3]], d: [mult(ring, 4, 1), mult(ring, 4, 1)] };
        assert!(complex_cohomology(&bad, 3).is_err());
        // zero differential: ranks are the module ranks.
        let z = GradedComplex { ring, grades: [vec![0, 1], vec![0]], d: [Matrix::zeros(ring, 1, 2), Matrix::zeros(ring, 2, 1)] };
        assert_eq!(complex_cohomology(&z, 1).unwrap().ranks, [vec![1, 1], vec![1, 0]]);
    }

    fn formal(n: usize, len: usize) -> AInfinity {
        AInfinity::formal(Ring::Q, n, len + 1, len + 2)
    }

    #[test]
    fn differential_squares_to_zero_and_unit_is_cocycle() {
        let a = formal(2, 3);
        let one = HochschildCochain::unit(Ring::Q, 2, 3);
        assert!(hochschild_differential(&one, &a).unwrap().is_zero());
        let v1 = HochschildCochain::constant(Ring::Q, 2, Blade::single(1), 3);
        assert!(hochschild_differential(&v1, &a).unwrap().is_zero());
        for (a, n) in [
            (formal(2, 3), 2),
            (minimal_model(&q("x1^2", 1, 4), 5).unwrap().0, 1),
            (minimal_model(&q("x1^2+x1*x2^2", 2, 4), 5).unwrap().0, 2),
        ] {
            let (c, _) = bar_complex(&a, 3).unwrap();
            assert!(c.d[1].mul(&c.d[0]).is_zero(), "n = {n}");
            assert!(c.d[0].mul(&c.d[1]).is_zero(), "n = {n}");
        }
    }

    #[test]
    fn insertion_examples() {
        let ring = Ring::Q;
        assert_eq!(insertion_map(&HochschildCochain::unit(ring, 2, 3)), ExtR::basis(2, Blade::EMPTY, Series::one(ring, 2, 3)));
        let id = insertion_map(&HochschildCochain::identity(ring, 2, 3));
        assert_eq!(id, crate::exterior::canonical_v(ring, 2, 3));
        let c = insertion_map(&HochschildCochain::constant(ring, 2, Blade(3), 3));
        assert_eq!(c, ExtR::basis(2, Blade(3), Series::one(ring, 2, 3)));
    }

    #[test]
    fn cup_unit_leibniz_and_formal_product() {
        let a = minimal_model(&q("x1^2+x1^3", 1, 4), 5).unwrap().0;
        let ring = Ring::Q;
        let coords = BarCoords::new(1, 3);
        let one = HochschildCochain::unit(ring, 1, 3);
        let mut rng = crate::gen::rng(11);
        use rand::Rng;
        let mut random = |p: usize| {
            let v: Vec<Scalar> = (0..coords.items[p].len()).map(|_| Scalar::from_i64(ring, rng.gen_range(-2..=2))).collect();
            coords.cochain(ring, p, &v)
        };
        for (p1, p2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let phi = random(p1);
            let psi = random(p2);
            assert_eq!(coords.vector(&cup_product(&one, &phi, &a).unwrap()), coords.vector(&phi));
            assert_eq!(coords.vector(&cup_product(&phi, &one, &a).unwrap()), coords.vector(&phi));
            // d(φ ⌣ ψ) = dφ ⌣ ψ + (-1)^{|φ|} φ ⌣ dψ
            let lhs = hochschild_differential(&cup_product(&phi, &psi, &a).unwrap(), &a).unwrap();
            let r1 = cup_product(&hochschild_differential(&phi, &a).unwrap(), &psi, &a).unwrap();
            let r2 = cup_product(&phi, &hochschild_differential(&psi, &a).unwrap(), &a).unwrap().scale(&sign(ring, p1));
            assert_eq!(coords.vector(&lhs), coords.vector(&r1.add(&r2)), "parities {p1} {p2}");
        }
        // formal E: v1-cochain ⌣ v2-cochain = ±(v1 ∧ v2)-cochain at length 0
        let e = formal(2, 2);
        let c1 = HochschildCochain::constant(ring, 2, Blade::single(1), 2);
        let c2 = HochschildCochain::constant(ring, 2, Blade::single(2), 2);
        let prod = cup_product(&c1, &c2, &e).unwrap();
        assert_eq!(prod.get(&[]).unwrap(), &Ext::blade(ring, 2, Blade(3)));
    }

    #[test]
    fn cocycle_cup_coboundary_is_coboundary() {
        let a = minimal_model(&q("x1^2", 1, 4), 5).unwrap().0;
        let (c, coords) = bar_complex(&a, 3).unwrap();
        let ring = Ring::Q;
        let one = HochschildCochain::unit(ring, 1, 3);
        for col in 0..c.d[1].cols() {
            let b = coords.cochain(ring, 0, &c.d[1].column(col));
            let prod = cup_product(&one, &b, &a).unwrap();
            assert!(c.d[1].solve(&coords.vector(&prod)).is_some());
        }
    }

    #[test]
    fn insertion_on_formal_exterior_algebra() {
        let a = formal(1, 3);
        let r = hh_via_insertion(&a, 3).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert_eq!(r.window, 2);
        for g in 0..=2 {
            for p in 0..2 {
                assert_eq!(r.bar.rank(g, p), 1);
                assert_eq!(r.bar.rank(g, p), hkr_rank(1, g, p));
            }
        }
    }

    #[test]
    fn insertion_on_quadratic_minimal_model() {
        let a = minimal_model(&q("x1^2", 1, 4), 5).unwrap().0;
        let r = hh_via_insertion(&a, 3).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert_eq!(r.bar.total(), 1);
        assert_eq!(r.bar.rank(0, 0), 1);
    }

    #[test]
    fn theta_on_two_variable_model() {
        let a = minimal_model(&q("x1^2+x1*x2^2+x2^4", 2, 4), 6).unwrap().0;
        let rep = theta_check(&a, 3).unwrap();
        assert!(rep.passed, "{:?}", rep.failures);
    }
}
