//! JSON formats for series, multivectors, A∞-structures, factorisations
//! and the verification reports built from them.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ainfinity::{AInfMorphism, AInfinity, CheckReport};
use crate::error::{Error, Result};
use crate::exterior::{all_blades, Blade, Ext, ExtR, Multivector};
use crate::hochschild::{CentreReport, Cohomology, InsertionReport};
use crate::lmf::{PipelineResult, SearchOutcome, SearchResult};
use crate::mf::{EndR, MatrixFactorization};
use crate::scalar::{Ring, Scalar};
use crate::series::{FormalDiffeo, Mono, Series};

pub const MAX_JSON_VARS: usize = 8;

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(tag = "kind")]
pub enum RingJson {
    Q,
    Fp { p: u64 },
}

impl RingJson {
    pub fn from_ring(r: Ring) -> RingJson {
        match r {
            Ring::Q => RingJson::Q,
            Ring::Fp(p) => RingJson::Fp { p },
        }
    }

    pub fn to_ring(self) -> Result<Ring> {
        match self {
            RingJson::Q => Ok(Ring::Q),
            RingJson::Fp { p } => Ring::fp(p),
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct TermJson {
    pub exp: Vec<u32>,
    pub coeff: String,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct SeriesJson {
    pub ring: RingJson,
    pub vars: usize,
    pub order: usize,
    pub terms: Vec<TermJson>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(untagged)]
pub enum CoeffJson {
    Scalar(String),
    Series(Vec<TermJson>),
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct BladeTermJson {
    pub indices: Vec<usize>,
    pub coeff: CoeffJson,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Default)]
pub struct MultivectorJson {
    pub terms: Vec<BladeTermJson>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct OpJson {
    pub k: usize,
    pub inputs: Vec<Vec<usize>>,
    pub output: MultivectorJson,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct AlgebraJson {
    pub ring: RingJson,
    pub vars: usize,
    pub order: usize,
    pub arity_cap: usize,
    pub ops: Vec<OpJson>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct MorphismJson {
    pub ring: RingJson,
    pub vars: usize,
    pub order: usize,
    pub arity_cap: usize,
    pub components: Vec<OpJson>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct FactorisationHeader {
    pub ring: RingJson,
    pub vars: usize,
    pub order: usize,
    pub potential: SeriesJson,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct FactorisationJson {
    pub header: FactorisationHeader,
    pub basis: Vec<Vec<usize>>,
    pub matrix: Vec<Vec<SeriesJson>>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct DiffeoJson {
    pub ring: RingJson,
    pub vars: usize,
    pub order: usize,
    pub components: Vec<SeriesJson>,
}

fn check_vars(n: usize) -> Result<()> {
    if n == 0 || n > MAX_JSON_VARS {
        return Err(Error::Invalid(format!("vars must lie in 1..={MAX_JSON_VARS}, got {n}")));
    }
    Ok(())
}

// Series

fn terms_json(s: &Series) -> Vec<TermJson> {
    let n = s.nvars();
    let mut t: Vec<(&Mono, &Scalar)> = s.terms().collect();
    t.sort_by(|a, b| a.0.cmp(b.0));
    t.into_iter().map(|(m, c)| TermJson { exp: (0..n).map(|i| m.exp(i)).collect(), coeff: c.to_string() }).collect()
}

fn series_from_terms(ring: Ring, n: usize, order: usize, terms: &[TermJson]) -> Result<Series> {
    let mut s = Series::zero(ring, n, order);
    for t in terms {
        if t.exp.len() != n {
            return Err(Error::Invalid(format!("exponent vector {:?} has length {}, expected {n}", t.exp, t.exp.len())));
        }
        s.add_term(Mono::from_exps(&t.exp)?, Scalar::parse(ring, &t.coeff)?);
    }
    Ok(s)
}

pub fn series_json(s: &Series) -> SeriesJson {
    SeriesJson { ring: RingJson::from_ring(s.ring()), vars: s.nvars(), order: s.order(), terms: terms_json(s) }
}

/// Reads a series; `ring` overrides the ring in the file, reinterpreting
/// every coefficient string there.
pub fn series_from_json(j: &SeriesJson, ring: Option<Ring>) -> Result<Series> {
    check_vars(j.vars)?;
    let r = match ring {
        Some(r) => r,
        None => j.ring.to_ring()?,
    };
    series_from_terms(r, j.vars, j.order, &j.terms)
}

// Multivectors

fn sorted_terms<C: crate::exterior::Coeff>(x: &Multivector<C>) -> Vec<(Blade, &C)> {
    let mut t: Vec<(Blade, &C)> = x.terms().map(|(b, c)| (*b, c)).collect();
    t.sort_by_key(|a| a.0);
    t
}

pub fn ext_json(x: &Ext) -> MultivectorJson {
    let terms =
        sorted_terms(x).into_iter().map(|(b, c)| BladeTermJson { indices: b.indices(), coeff: CoeffJson::Scalar(c.to_string()) }).collect();
    MultivectorJson { terms }
}

pub fn extr_json(x: &ExtR) -> MultivectorJson {
    let terms =
        sorted_terms(x).into_iter().map(|(b, c)| BladeTermJson { indices: b.indices(), coeff: CoeffJson::Series(terms_json(c)) }).collect();
    MultivectorJson { terms }
}

fn blade_from(idx: &[usize], n: usize) -> Result<Blade> {
    let sorted = idx.windows(2).all(|w| w[0] < w[1]);
    match Blade::from_indices(idx) {
        Some(b) if sorted && idx.iter().all(|&i| i <= n) => Ok(b),
        _ => Err(Error::Invalid(format!("bad index set {idx:?} for {n} variables"))),
    }
}

pub fn ext_from_json(ring: Ring, n: usize, j: &MultivectorJson) -> Result<Ext> {
    let mut x = Ext::zero(n);
    for t in &j.terms {
        let b = blade_from(&t.indices, n)?;
        let CoeffJson::Scalar(c) = &t.coeff else {
            return Err(Error::Invalid("expected a scalar coefficient".into()));
        };
        x.add_term(b, Scalar::parse(ring, c)?);
    }
    Ok(x)
}

pub fn extr_from_json(ring: Ring, n: usize, order: usize, j: &MultivectorJson) -> Result<ExtR> {
    let mut x = ExtR::zero(n);
    for t in &j.terms {
        let b = blade_from(&t.indices, n)?;
        let c = match &t.coeff {
            CoeffJson::Series(terms) => series_from_terms(ring, n, order, terms)?,
            CoeffJson::Scalar(c) => Series::one(ring, n, order).scale(&Scalar::parse(ring, c)?),
        };
        x.add_term(b, c);
    }
    Ok(x)
}

// A∞-structures and morphisms

fn ops_json(entries: Vec<(Vec<Blade>, &Ext)>) -> Vec<OpJson> {
    entries
        .into_iter()
        .filter(|(_, e)| !e.is_zero())
        .map(|(t, e)| OpJson { k: t.len(), inputs: t.iter().map(|b| b.indices()).collect(), output: ext_json(e) })
        .collect()
}

fn ops_from(ring: Ring, n: usize, cap: usize, ops: &[OpJson], mut set: impl FnMut(&[Blade], Ext)) -> Result<()> {
    for op in ops {
        if op.k != op.inputs.len() || op.k == 0 || op.k > cap {
            return Err(Error::Invalid(format!("operation with k = {} and {} inputs (cap {cap})", op.k, op.inputs.len())));
        }
        let t = op.inputs.iter().map(|i| blade_from(i, n)).collect::<Result<Vec<_>>>()?;
        set(&t, ext_from_json(ring, n, &op.output)?);
    }
    Ok(())
}

pub fn algebra_json(a: &AInfinity) -> AlgebraJson {
    AlgebraJson {
        ring: RingJson::from_ring(a.ring()),
        vars: a.nvars(),
        order: a.order(),
        arity_cap: a.arity_cap(),
        ops: ops_json(a.entries()),
    }
}

/// Reads an algebra without running any check.
pub fn algebra_from_json_unchecked(j: &AlgebraJson, ring: Option<Ring>) -> Result<AInfinity> {
    check_vars(j.vars)?;
    let r = match ring {
        Some(r) => r,
        None => j.ring.to_ring()?,
    };
    let mut a = AInfinity::empty(r, j.vars, j.order, j.arity_cap);
    ops_from(r, j.vars, j.arity_cap, &j.ops, |t, e| a.set(t, e))?;
    Ok(a)
}

/// Reads an algebra and rejects it unless it is superfiltered and strictly
/// unital.
pub fn algebra_from_json(j: &AlgebraJson, ring: Option<Ring>) -> Result<AInfinity> {
    let a = algebra_from_json_unchecked(j, ring)?;
    let rep = a.check_superfiltered_unital();
    if !rep.passed {
        return Err(Error::Invalid(format!("algebra is not superfiltered and strictly unital: {}", rep.first_failure().unwrap_or("?"))));
    }
    Ok(a)
}

pub fn morphism_json(m: &AInfMorphism) -> MorphismJson {
    MorphismJson {
        ring: RingJson::from_ring(m.ring()),
        vars: m.nvars(),
        order: m.order(),
        arity_cap: m.arity_cap(),
        components: ops_json(m.entries()),
    }
}

pub fn morphism_from_json(j: &MorphismJson) -> Result<AInfMorphism> {
    check_vars(j.vars)?;
    let r = j.ring.to_ring()?;
    let mut m = AInfMorphism::empty(r, j.vars, j.order, j.arity_cap);
    ops_from(r, j.vars, j.arity_cap, &j.components, |t, e| m.set(t, e))?;
    Ok(m)
}

pub fn diffeo_json(f: &FormalDiffeo) -> DiffeoJson {
    DiffeoJson {
        ring: RingJson::from_ring(f.ring()),
        vars: f.nvars(),
        order: f.order(),
        components: f.components().iter().map(series_json).collect(),
    }
}

pub fn diffeo_from_json(j: &DiffeoJson) -> Result<FormalDiffeo> {
    check_vars(j.vars)?;
    let r = j.ring.to_ring()?;
    let comps = j.components.iter().map(|c| series_from_json(c, Some(r))).collect::<Result<Vec<_>>>()?;
    FormalDiffeo::new(comps)
}

// Factorisations

pub fn factorisation_json(e: &MatrixFactorization) -> FactorisationJson {
    let n = e.nvars();
    let basis = all_blades(n);
    let matrix = basis.iter().map(|r| basis.iter().map(|c| series_json(e.d.get(r.0 as usize, c.0 as usize))).collect()).collect();
    FactorisationJson {
        header: FactorisationHeader { ring: RingJson::from_ring(e.ring()), vars: n, order: e.order(), potential: series_json(&e.w) },
        basis: basis.iter().map(|b| b.indices()).collect(),
        matrix,
    }
}

pub fn factorisation_from_json(j: &FactorisationJson) -> Result<MatrixFactorization> {
    let h = &j.header;
    check_vars(h.vars)?;
    let r = h.ring.to_ring()?;
    let n = h.vars;
    let basis = j.basis.iter().map(|b| blade_from(b, n)).collect::<Result<Vec<_>>>()?;
    if basis != all_blades(n) {
        return Err(Error::Invalid("basis must list all subsets in graded-lex order".into()));
    }
    if j.matrix.len() != basis.len() || j.matrix.iter().any(|row| row.len() != basis.len()) {
        return Err(Error::Invalid(format!("matrix must be {0} x {0}", basis.len())));
    }
    let mut d = EndR::zero(r, n, h.order);
    for (row, rb) in j.matrix.iter().zip(&basis) {
        for (entry, cb) in row.iter().zip(&basis) {
            if entry.vars != n {
                return Err(Error::NvarsMismatch(n, entry.vars));
            }
            let s = series_from_json(entry, Some(r))?;
            d.set(rb.0 as usize, cb.0 as usize, s.truncate(h.order).with_order(h.order));
        }
    }
    let w = series_from_json(&h.potential, Some(r))?;
    Ok(MatrixFactorization { w, d })
}

// Reports

pub fn check_json(c: &CheckReport) -> Value {
    json!({
        "name": c.name,
        "passed": c.passed,
        "certified": c.certified,
        "checked": c.checked,
        "failures": c.failures,
    })
}

pub fn pipeline_json(p: &PipelineResult) -> Value {
    json!({
        "certified": {"order": p.certified_order, "arity": p.certified_arity},
        "verdict": if p.passed() { "pass" } else { "fail" },
        "stages": p.stages.iter().map(check_json).collect::<Vec<_>>(),
        "potential": series_json(&p.potential),
        "witness": morphism_json(&p.composite),
    })
}

pub fn search_json(s: &SearchResult) -> Value {
    let witness = match &s.outcome {
        SearchOutcome::Found(f) => serde_json::to_value(diffeo_json(f)).expect("serialisable"),
        _ => Value::Null,
    };
    json!({
        "certified": {"order": s.order, "d": s.d},
        "verdict": s.verdict(),
        "failed_at": s.failed_at,
        "nodes": s.nodes,
        "witness": witness,
    })
}

fn ranks_json(c: &Cohomology, window: usize) -> Vec<Value> {
    let mut out = Vec::new();
    for g in 0..=window {
        for p in 0..2 {
            out.push(json!({"grade": g, "parity": p, "rank": c.rank(g, p)}));
        }
    }
    out
}

/// HH report for the Clifford model of `𝔓`. `order` is the trust order `M`.
pub fn hh_json(order: usize, length: Option<usize>, report: &CentreReport) -> Value {
    let c = &report.cohomology;
    let reps: Vec<Value> =
        c.reps.iter().zip(&report.images).map(|(r, x)| json!({"grade": r.grade, "parity": r.parity, "element": extr_json(x)})).collect();
    json!({
        "certified": {"order": order, "length": length, "window": c.window},
        "ranks": ranks_json(c, c.window),
        "total": c.total(),
        "representatives": reps,
        "centre_check": if report.passed() { "pass" } else { "fail" },
        "checks": [check_json(&report.check)],
    })
}

pub fn insertion_json(order: usize, r: &InsertionReport) -> Value {
    json!({
        "certified": {"order": order, "length": r.length, "window": r.window},
        "ranks": {
            "bar": ranks_json(&r.bar, r.window),
            "av": ranks_json(&r.av, r.window),
            "clifford": ranks_json(&r.clifford, r.window),
        },
        "verdict": if r.passed() { "pass" } else { "fail" },
        "checks": r.checks.iter().map(check_json).collect::<Vec<_>>(),
    })
}

pub fn to_pretty<T: Serialize>(x: &T) -> String {
    serde_json::to_string_pretty(x).expect("serialisable")
}

pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hochschild::embed_and_centre_check;
    use crate::lmf::potential_equivalence_search;
    use crate::mf::stabilize_skyscraper;
    use crate::series::parse_polynomial;
    use crate::transfer::minimal_model;

    #[test]
    fn series_round_trip_and_ordering() {
        let s = parse_polynomial(Ring::Q, 2, 4, "x2^2 - 3/2*x1*x2 + x1^3 + 5*x1^2").unwrap();
        let j = series_json(&s);
        let exps: Vec<Vec<u32>> = j.terms.iter().map(|t| t.exp.clone()).collect();
        assert_eq!(exps, vec![vec![2, 0], vec![1, 1], vec![0, 2], vec![3, 0]]);
        assert_eq!(j.terms[1].coeff, "-3/2");
        let text = to_pretty(&j);
        let back = series_from_json(&parse(&text).unwrap(), None).unwrap();
        assert_eq!(back, s);
        let f2 = series_from_json(&j, Some(Ring::Fp(3))).unwrap();
        assert_eq!(series_json(&f2).terms.len(), 3);
    }

    #[test]
    fn ring_tags() {
        let t = serde_json::to_string(&RingJson::Fp { p: 5 }).unwrap();
        assert_eq!(t, r#"{"kind":"Fp","p":5}"#);
        assert_eq!(serde_json::to_string(&RingJson::Q).unwrap(), r#"{"kind":"Q"}"#);
        assert!(parse::<RingJson>(r#"{"kind":"Fp","p":4}"#).unwrap().to_ring().is_err());
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let bad_len = r#"{"ring":{"kind":"Q"},"vars":2,"order":3,"terms":[{"exp":[1],"coeff":"1"}]}"#;
        assert!(series_from_json(&parse(bad_len).unwrap(), None).is_err());
        let bad_coeff = r#"{"ring":{"kind":"Q"},"vars":1,"order":3,"terms":[{"exp":[2],"coeff":"x"}]}"#;
        assert!(series_from_json(&parse(bad_coeff).unwrap(), None).is_err());
        assert!(parse::<SeriesJson>("{").is_err());
        let j = MultivectorJson { terms: vec![BladeTermJson { indices: vec![2, 1], coeff: CoeffJson::Scalar("1".into()) }] };
        assert!(ext_from_json(Ring::Q, 2, &j).is_err());
    }

    #[test]
    fn algebra_round_trip_and_validation() {
        let w = parse_polynomial(Ring::Q, 1, 4, "x1^2 + x1^3").unwrap();
        let (a, _) = minimal_model(&w, 4).unwrap();
        let j = algebra_json(&a);
        assert!(j.ops.iter().all(|o| o.k == o.inputs.len()));
        let b = algebra_from_json(&parse(&to_pretty(&j)).unwrap(), None).unwrap();
        assert_eq!(algebra_json(&b), j);
        assert_eq!(b.disc_potential().unwrap(), a.disc_potential().unwrap());

        let mut broken = j.clone();
        broken.ops.push(OpJson {
            k: 2,
            inputs: vec![vec![], vec![1]],
            output: MultivectorJson { terms: vec![BladeTermJson { indices: vec![1], coeff: CoeffJson::Scalar("2".into()) }] },
        });
        assert!(algebra_from_json(&broken, None).is_err());
        assert!(algebra_from_json_unchecked(&broken, None).is_ok());
    }

    #[test]
    fn factorisation_round_trip() {
        let w = parse_polynomial(Ring::Q, 2, 3, "x1^2 + x1*x2^2").unwrap();
        let e = stabilize_skyscraper(&w).unwrap();
        let j = factorisation_json(&e);
        assert_eq!(j.basis, vec![vec![], vec![1], vec![2], vec![1, 2]]);
        let back = factorisation_from_json(&parse(&to_pretty(&j)).unwrap()).unwrap();
        assert!(back.d.agrees_with(&e.d));
        assert!(back.check_squifferential());
    }

    #[test]
    fn multivector_with_series_coefficients() {
        let x = crate::exterior::canonical_v(Ring::Fp(5), 2, 3);
        let j = extr_json(&x);
        let back = extr_from_json(Ring::Fp(5), 2, 3, &parse(&to_pretty(&j)).unwrap()).unwrap();
        assert!(back.same(&x));
    }

    #[test]
    fn reports_are_deterministic() {
        let p1 = parse_polynomial(Ring::Q, 1, 5, "x1^2 - x1^3").unwrap();
        let p2 = parse_polynomial(Ring::Q, 1, 5, "x1^2").unwrap();
        let s = potential_equivalence_search(&p1, &p2, 1, 5).unwrap();
        let a = to_pretty(&search_json(&s));
        let b = to_pretty(&search_json(&potential_equivalence_search(&p1, &p2, 1, 5).unwrap()));
        assert_eq!(a, b);
        assert!(a.contains("FOUND"));
        let witness = diffeo_from_json(&serde_json::from_value(search_json(&s)["witness"].clone()).unwrap()).unwrap();
        assert_eq!(witness.nvars(), 1);

        let p = parse_polynomial(Ring::Q, 1, 5, "x1^3").unwrap();
        let r = embed_and_centre_check(&p).unwrap();
        let h = hh_json(4, None, &r);
        assert_eq!(h["centre_check"], "pass");
        assert_eq!(h["total"], 2);
    }
}
