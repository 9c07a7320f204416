//! The acceptance suite: twelve exact checks over seeded random inputs and
//! fixed examples. Shared by the integration tests and `selftest`.

use std::time::Instant;

use crate::ainfinity::{pushforward_by, AInfinity};
use crate::exterior::{Blade, ExtR};
use crate::gen::{random_gr_identity, random_potential, rng};
use crate::hochschild::{clifford_complex, embed_and_centre_check, hh_via_insertion, hkr_rank, jacobian_algebra};
use crate::lmf::{composite_equivalence, potential_equivalence_search, PipelineResult};
use crate::scalar::{Ring, Scalar};
use crate::series::{laurent_expand, parse_polynomial, Laurent, Series};
use crate::transfer::{check_homotopy, clifford_check, minimal_model, TransferData};
use crate::Result;

pub const DEFAULT_SEED: u64 = 2024;

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        let v = if self.passed { "PASS" } else { "FAIL" };
        format!("[{v}] criterion {:>2}: {} ({}; {:.1}s)", self.id, self.title, self.detail, self.seconds)
    }
}

pub const TITLES: [&str; 12] = [
    "transfer soundness",
    "disc potential recovers w",
    "Clifford quadratic part",
    "pipeline is an infinity-equivalence",
    "squifferential identities",
    "homotopy data",
    "characteristic-2 formality obstruction",
    "HKR baseline",
    "Morse and Jacobian ranks",
    "centrality",
    "characteristic-2 HH example",
    "insertion-map consistency",
];

/// Tallies failures for one criterion.
struct Tally {
    cases: usize,
    failures: Vec<String>,
}

impl Tally {
    fn new() -> Tally {
        Tally { cases: 0, failures: Vec::new() }
    }

    fn case(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn result<T>(&mut self, r: Result<T>, what: impl FnOnce() -> String) -> Option<T> {
        match r {
            Ok(x) => Some(x),
            Err(e) => {
                self.cases += 1;
                self.failures.push(format!("{}: {e}", what()));
                None
            }
        }
    }

    fn finish(self, id: usize, start: Instant) -> Outcome {
        let detail = match self.failures.first() {
            None => format!("{} cases", self.cases),
            Some(f) => format!("{} of {} cases failed; first: {f}", self.failures.len(), self.cases),
        };
        Outcome {
            id,
            title: TITLES[id - 1],
            passed: self.failures.is_empty() && self.cases > 0,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

/// The twenty potentials shared by criteria 1, 2, 3 and 6, with their
/// minimal models at `N = K = 5`.
pub struct TransferBatch {
    pub cases: Vec<(Series, Result<AInfinity>)>,
    pub seconds: f64,
}

pub const BATCH_RINGS: [Ring; 3] = [Ring::Q, Ring::Fp(2), Ring::Fp(3)];

/// Twenty seeded potentials in `m^2` to order 5, cycling through
/// `n = 1, 2, 3` and through `rings`.
pub fn batch_potentials(seed: u64, rings: &[Ring]) -> Vec<Series> {
    let mut g = rng(seed);
    (0..20)
        .map(|i| {
            let n = 1 + i % 3;
            let ring = rings[(i / 3) % rings.len()];
            let density = [0.5, 0.3, 0.15][n - 1];
            random_potential(&mut g, ring, n, 5, density)
        })
        .collect()
}

impl TransferBatch {
    pub fn generate(seed: u64, rings: &[Ring]) -> TransferBatch {
        let start = Instant::now();
        let cases = batch_potentials(seed, rings)
            .into_iter()
            .map(|w| {
                let a = minimal_model(&w, 5).map(|(a, _)| a);
                (w, a)
            })
            .collect();
        TransferBatch { cases, seconds: start.elapsed().as_secs_f64() }
    }
}

fn label(w: &Series) -> String {
    format!("{} over {} (n = {})", w, w.ring(), w.nvars())
}

pub fn criterion_1(batch: &TransferBatch) -> Outcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for (w, a) in &batch.cases {
        let Some(a) = t.result(a.as_ref().map_err(|e| e.clone()), || label(w)) else { continue };
        let rep = a.check_ainfinity(5);
        t.case(rep.passed, || format!("{}: {}", label(w), rep.first_failure().unwrap_or("")));
        let rep = a.check_superfiltered_unital();
        t.case(rep.passed, || format!("{}: {}", label(w), rep.first_failure().unwrap_or("")));
    }
    let mut o = t.finish(1, start);
    o.seconds += batch.seconds;
    o
}

pub fn criterion_2(batch: &TransferBatch) -> Outcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for (w, a) in &batch.cases {
        let Some(a) = t.result(a.as_ref().map_err(|e| e.clone()), || label(w)) else { continue };
        let Some(p) = t.result(a.disc_potential(), || label(w)) else { continue };
        t.case(p.truncate(5) == w.truncate(5), || format!("{}: disc potential {p}", label(w)));
    }
    t.finish(2, start)
}

pub fn criterion_3(batch: &TransferBatch) -> Outcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for (w, a) in &batch.cases {
        let Some(a) = t.result(a.as_ref().map_err(|e| e.clone()), || label(w)) else { continue };
        let rep = clifford_check(a);
        t.case(rep.passed, || format!("{}: {}", label(w), rep.first_failure().unwrap_or("")));
    }
    t.finish(3, start)
}

/// Runs every pipeline of criterion 4 once; criterion 5 reads the same runs.
pub struct PipelineBatch {
    pub runs: Vec<(String, Series, Result<PipelineResult>)>,
    pub seconds: f64,
}

pub const PIPELINE_DELTAS: usize = 5;

pub fn pipeline_potentials(seed: u64) -> Vec<Series> {
    let mut g = rng(seed ^ 0x5eed_0004);
    let mut out = vec![
        parse_polynomial(Ring::Q, 1, 4, "x1^2 + 2*x1^3").expect("valid"),
        parse_polynomial(Ring::Fp(3), 2, 4, "x1*x2 + x1^3").expect("valid"),
    ];
    out.push(random_potential(&mut g, Ring::Q, 2, 4, 0.4));
    out.push(random_potential(&mut g, Ring::Fp(2), 2, 4, 0.4));
    out
}

impl PipelineBatch {
    pub fn generate(seed: u64) -> PipelineBatch {
        let start = Instant::now();
        let mut g = rng(seed ^ 0xde17a);
        let mut runs = Vec::new();
        for w in pipeline_potentials(seed) {
            let a = match minimal_model(&w, 5) {
                Ok((a, _)) => a,
                Err(e) => {
                    runs.push((label(&w), w.clone(), Err(e)));
                    continue;
                }
            };
            runs.push((format!("B0min({})", label(&w)), w.clone(), composite_equivalence(&a)));
            for j in 0..PIPELINE_DELTAS {
                let delta = random_gr_identity(&mut g, w.ring(), w.nvars(), 4, 5, 0.5);
                let name = format!("Delta_{j} pushforward of B0min({})", label(&w));
                runs.push((name, w.clone(), pushforward_by(&a, &delta).and_then(|b| composite_equivalence(&b))));
            }
        }
        PipelineBatch { runs, seconds: start.elapsed().as_secs_f64() }
    }
}

pub fn criterion_4(batch: &PipelineBatch) -> Outcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for (name, w, r) in &batch.runs {
        let Some(r) = t.result(r.as_ref().map_err(|e| e.clone()), || name.clone()) else { continue };
        for s in &r.stages {
            t.case(s.passed, || format!("{name}: stage {} failed: {}", s.name, s.first_failure().unwrap_or("")));
        }
        t.case(r.potential.agrees_with(w), || format!("{name}: potential {} differs from w", r.potential));
        t.case(r.certified_arity >= 4, || format!("{name}: certified arity {}", r.certified_arity));
    }
    let mut o = t.finish(4, start);
    o.seconds += batch.seconds;
    o
}

pub fn criterion_5(batch: &PipelineBatch) -> Outcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for (name, _, r) in &batch.runs {
        let Some(r) = t.result(r.as_ref().map_err(|e| e.clone()), || name.clone()) else { continue };
        t.case(r.mirror.check_squifferential(), || format!("{name}: D^2 != P id"));
        let inv = r.comparison.i.mul(&r.comparison.inverse);
        let id = crate::mf::EndR::identity(r.comparison.i.ring(), r.comparison.i.nvars(), inv.order());
        t.case(inv.agrees_with(&id), || format!("{name}: correction not invertible"));
        match r.stage("comparison") {
            Some(s) => t.case(s.passed, || format!("{name}: {}", s.first_failure().unwrap_or(""))),
            None => t.case(false, || format!("{name}: no comparison stage")),
        }
    }
    t.finish(5, start)
}

pub fn criterion_6(seed: u64, rings: &[Ring]) -> Outcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for w in batch_potentials(seed, rings) {
        let Some(td) = t.result(TransferData::new(&w, 6), || label(&w)) else { continue };
        let rep = check_homotopy(&td, 4);
        t.case(rep.passed, || format!("{}: {}", label(&w), rep.first_failure().unwrap_or("")));
    }
    t.finish(6, start)
}

/// `z + 1/z - 2` at `ρ = 1` to order 5.
pub fn char_two_potentials(ring: Ring) -> Result<(Series, Series)> {
    let one = Scalar::from_i64(ring, 1);
    let l = Laurent { nvars: 1, terms: vec![(vec![1], one.clone()), (vec![-1], one), (vec![0], Scalar::from_i64(ring, -2))] };
    let p1 = laurent_expand(&l, &[ring.one()], 5)?;
    let p2 = parse_polynomial(ring, 1, 5, "x1^2")?;
    Ok((p1, p2))
}

pub fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for (ring, want) in [(Ring::Q, "FOUND"), (Ring::Fp(3), "FOUND"), (Ring::Fp(2), "NOT-EQUIVALENT")] {
        let Some((p1, p2)) = t.result(char_two_potentials(ring), || format!("{ring}")) else { continue };
        let expect = parse_polynomial(ring, 1, 5, "x1^2 - x1^3 + x1^4 - x1^5").expect("valid");
        t.case(p1 == expect, || format!("{ring}: expansion {p1}"));
        let Some(r) = t.result(potential_equivalence_search(&p1, &p2, 1, 5), || format!("{ring}")) else { continue };
        t.case(r.verdict() == want, || format!("{ring}: verdict {} instead of {want}", r.verdict()));
    }
    t.finish(7, start)
}

pub fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for n in 1..=3 {
        let p = Series::zero(Ring::Q, n, 4);
        let Some(c) = t.result(clifford_complex(&p), || format!("n = {n}")) else { continue };
        let Some(h) = t.result(c.cohomology(), || format!("n = {n}")) else { continue };
        t.case(h.window == 3, || format!("n = {n}: window {}", h.window));
        for g in 0..=h.window {
            for par in 0..2 {
                let (got, want) = (h.rank(g, par), hkr_rank(n, g, par));
                t.case(got == want, || format!("n = {n}, grade {g}, parity {par}: rank {got}, HKR {want}"));
            }
        }
    }
    t.finish(8, start)
}

pub fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for n in 1..=3 {
        let text: Vec<String> = (1..=n).map(|i| format!("x{i}^2")).collect();
        let p = parse_polynomial(Ring::Q, n, 4, &text.join("+")).expect("valid");
        let Some(h) = t.result(clifford_complex(&p).and_then(|c| c.cohomology()), || format!("Morse n = {n}")) else { continue };
        t.case(h.total() == 1, || format!("Morse n = {n}: total rank {}", h.total()));
    }
    let p = parse_polynomial(Ring::Q, 1, 5, "x1^3").expect("valid");
    if let Some(h) = t.result(clifford_complex(&p).and_then(|c| c.cohomology()), || "x^3".into()) {
        t.case(h.total() == 2, || format!("x^3: total rank {}", h.total()));
        if let Some(j) = t.result(jacobian_algebra(&p), || "x^3 Jacobian".into()) {
            t.case(j.rank() == 2 && j.rank() == h.total(), || format!("x^3: Jacobian rank {}", j.rank()));
        }
    }
    t.finish(9, start)
}

pub fn centre_potentials(seed: u64) -> Vec<Series> {
    let mut g = rng(seed ^ 0xc3);
    (0..10)
        .map(|i| {
            let ring = [Ring::Q, Ring::Fp(2), Ring::Fp(3), Ring::Fp(5)][i % 4];
            random_potential(&mut g, ring, 2, 4, 0.4)
        })
        .collect()
}

pub fn criterion_10(seed: u64) -> Outcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for p in centre_potentials(seed) {
        let Some(r) = t.result(embed_and_centre_check(&p), || label(&p)) else { continue };
        t.case(r.passed() && r.check.checked > 0, || format!("{}: {}", label(&p), r.check.first_failure().unwrap_or("nothing checked")));
    }
    t.finish(10, start)
}

pub fn criterion_11() -> Outcome {
    let start = Instant::now();
    let mut t = Tally::new();
    let ring = Ring::Fp(2);
    let p = parse_polynomial(ring, 1, 7, "x1^2 + x1^6").expect("valid");
    if let Some(c) = t.result(clifford_complex(&p), || "x^2 + x^6".into()) {
        t.case(c.graded().d.iter().all(|m| m.is_zero()), || "differential is nonzero".into());
        let v = c.generator(1);
        let sq = c.mul(&v, &v);
        let want = ExtR::basis(1, Blade::EMPTY, parse_polynomial(ring, 1, c.product_order(), "1 + x1^4").expect("valid"));
        t.case(sq == want, || format!("v^2 = {sq}"));
        if let Some(h) = t.result(c.cohomology(), || "cohomology".into()) {
            for g in 0..=h.window {
                for par in 0..2 {
                    t.case(h.rank(g, par) == 1, || format!("grade {g}, parity {par}: rank {}", h.rank(g, par)));
                }
            }
        }
    }
    t.finish(11, start)
}

pub fn criterion_12() -> Outcome {
    let start = Instant::now();
    let mut t = Tally::new();
    let formal = AInfinity::formal(Ring::Q, 1, 4, 5);
    let w = parse_polynomial(Ring::Q, 1, 4, "x1^2").expect("valid");
    let cases = [("formal E", Ok(formal)), ("B0min(x^2)", minimal_model(&w, 5).map(|(a, _)| a))];
    for (name, a) in cases {
        let Some(a) = t.result(a, || name.into()) else { continue };
        let Some(r) = t.result(hh_via_insertion(&a, 3), || name.into()) else { continue };
        for want in ["unit", "cocycle", "coboundary", "cup", "theta", "ranks"] {
            match r.check(want) {
                Some(c) => {
                    t.case(c.passed && c.checked > 0, || format!("{name}: {want}: {}", c.first_failure().unwrap_or("nothing checked")))
                }
                None => t.case(false, || format!("{name}: no {want} check")),
            }
        }
    }
    t.finish(12, start)
}

/// Runs all twelve criteria; `rings` feeds the random batch of criteria 1,
/// 2, 3 and 6.
pub fn run_all(seed: u64, rings: &[Ring]) -> Vec<Outcome> {
    let batch = TransferBatch::generate(seed, rings);
    let mut out = vec![criterion_1(&batch), criterion_2(&batch), criterion_3(&batch)];
    let pipes = PipelineBatch::generate(seed);
    out.push(criterion_4(&pipes));
    out.push(criterion_5(&pipes));
    out.push(criterion_6(seed, rings));
    out.push(criterion_7());
    out.push(criterion_8());
    out.push(criterion_9());
    out.push(criterion_10(seed));
    out.push(criterion_11());
    out.push(criterion_12());
    out
}
