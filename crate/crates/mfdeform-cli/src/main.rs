//! `mfdeform`: batch front end for the mfdeform library.
//!
//! Exit codes: 0 success or passing verdict, 1 failing verdict, 2 input
//! error, 3 indeterminate.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use mfdeform::ainfinity::AInfinity;
use mfdeform::hochschild::{embed_and_centre_check, hh_via_insertion};
use mfdeform::json::{self as mj, AlgebraJson, FactorisationJson, SeriesJson};
use mfdeform::lmf::{composite_equivalence, potential_equivalence_search};
use mfdeform::mf::{mirror_object, stabilize_skyscraper};
use mfdeform::series::{check_in_m2, parse_polynomial};
use mfdeform::suite::{self, BATCH_RINGS, DEFAULT_SEED};
use mfdeform::transfer::minimal_model;
use mfdeform::{Ring, Series};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const MAX_VARS: usize = 6;
const MAX_ORDER: usize = 12;

#[derive(Parser, Debug)]
#[command(name = "mfdeform", version, about = "Exact A-infinity, matrix factorisation and Hochschild computations")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct Opts {
    /// Ground ring: Q or Fp:<p>. Overrides the ring stored in input files.
    #[arg(long, global = true)]
    ring: Option<String>,
    /// Number of variables; must match the inputs when given.
    #[arg(long, global = true)]
    vars: Option<usize>,
    /// Truncation order N.
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Arity cap K.
    #[arg(long, global = true)]
    arity: Option<usize>,
    /// Length cap L for Hochschild cochains.
    #[arg(long, global = true)]
    length: Option<usize>,
    /// Search depth d for `equivalent`.
    #[arg(long, global = true)]
    d: Option<usize>,
    /// Seed for randomised suites.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Where to write the JSON report.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Lift the guard rails n <= 6, N <= 12 and K >= N.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Args, Debug, Clone)]
struct PotentialInput {
    /// Potential in Series JSON.
    #[arg(long, conflicts_with = "poly")]
    potential: Option<PathBuf>,
    /// Potential as a polynomial such as "x1^2 - 3/2*x1*x2"; needs --vars and --order.
    #[arg(long)]
    poly: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Stabilised skyscraper factorisation of a potential.
    Stabilize(PotentialInput),
    /// Minimal model of End(stabilised skyscraper), in Algebra JSON.
    MinimalModel(PotentialInput),
    /// Disc potential of an algebra.
    DiscPotential {
        #[arg(long)]
        algebra: PathBuf,
    },
    /// Mirror factorisation of an algebra and the verified comparison pipeline.
    Mirror {
        #[arg(long)]
        algebra: PathBuf,
    },
    /// Searches for a change of variables with P1 = P2 o f.
    Equivalent {
        #[arg(long)]
        p1: PathBuf,
        #[arg(long)]
        p2: PathBuf,
    },
    /// Hochschild cohomology through the Clifford model, or through the
    /// insertion map when an algebra is given.
    Hochschild {
        #[command(flatten)]
        input: PotentialInput,
        #[arg(long, conflicts_with_all = ["potential", "poly"])]
        algebra: Option<PathBuf>,
    },
    /// Checks an algebra or a factorisation file.
    Verify {
        #[arg(long, required_unless_present = "factorisation")]
        algebra: Option<PathBuf>,
        #[arg(long, conflicts_with = "algebra")]
        factorisation: Option<PathBuf>,
    },
    /// Runs the acceptance suite.
    Selftest,
}

/// An input problem; reported with exit code 2.
#[derive(Debug)]
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> InputError {
        InputError(e.to_string())
    }
}

type Run = Result<u8, InputError>;

fn fail<T>(msg: impl Into<String>) -> Result<T, InputError> {
    Err(InputError(msg.into()))
}

struct Ctx {
    opts: Opts,
    ring: Option<Ring>,
}

impl Ctx {
    fn new(opts: Opts) -> Result<Ctx, InputError> {
        let ring = opts.ring.as_deref().map(Ring::parse).transpose()?;
        Ok(Ctx { opts, ring })
    }

    fn read(&self, path: &Path) -> Result<String, InputError> {
        fs::read_to_string(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))
    }

    fn guard(&self, n: usize, order: usize, arity: Option<usize>) -> Result<(), InputError> {
        if let Some(v) = self.opts.vars {
            if v != n {
                return fail(format!("--vars {v} does not match the input ({n} variables)"));
            }
        }
        if self.opts.force {
            return Ok(());
        }
        if n > MAX_VARS {
            return fail(format!("{n} variables exceeds the guard rail n <= {MAX_VARS}; use --force"));
        }
        if order > MAX_ORDER {
            return fail(format!("order {order} exceeds the guard rail N <= {MAX_ORDER}; use --force"));
        }
        if let Some(k) = arity {
            if k < order {
                return fail(format!("arity cap {k} is below the order {order}; need K >= N or --force"));
            }
        }
        Ok(())
    }

    fn potential(&self, input: &PotentialInput) -> Result<Series, InputError> {
        let s = match (&input.potential, &input.poly) {
            (Some(path), _) => mj::series_from_json(&mj::parse::<SeriesJson>(&self.read(path)?)?, self.ring)?,
            (None, Some(text)) => {
                let (Some(n), Some(order)) = (self.opts.vars, self.opts.order) else {
                    return fail("--poly needs --vars and --order");
                };
                parse_polynomial(self.ring.unwrap_or(Ring::Q), n, order, text)?
            }
            (None, None) => return fail("give --potential <file> or --poly <polynomial>"),
        };
        let s = match self.opts.order {
            Some(n) => s.with_order(n),
            None => s,
        };
        check_in_m2(&s)?;
        Ok(s)
    }

    fn algebra(&self, path: &Path, validate: bool) -> Result<AInfinity, InputError> {
        let j: AlgebraJson = mj::parse(&self.read(path)?)?;
        let a = if validate { mj::algebra_from_json(&j, self.ring)? } else { mj::algebra_from_json_unchecked(&j, self.ring)? };
        self.guard(a.nvars(), a.order(), None)?;
        Ok(a)
    }

    /// Writes `body` with the tool version and the certified window.
    fn write(&self, body: impl Serialize, window: Value) -> Result<(), InputError> {
        let Some(path) = &self.opts.out else { return Ok(()) };
        let mut v = serde_json::to_value(body)?;
        if let Value::Object(m) = &mut v {
            m.insert("tool".into(), json!({"name": "mfdeform", "version": VERSION}));
            m.insert("window".into(), window);
        }
        let text = serde_json::to_string_pretty(&v)? + "\n";
        fs::write(path, text).map_err(|e| InputError(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

fn window(order: usize, arity: Option<usize>, length: Option<usize>) -> Value {
    json!({"order": order, "arity": arity, "length": length})
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn code(ok: bool) -> u8 {
    if ok {
        0
    } else {
        1
    }
}

fn stabilize(ctx: &Ctx, input: &PotentialInput) -> Run {
    let w = ctx.potential(input)?;
    ctx.guard(w.nvars(), w.order(), None)?;
    let e = stabilize_skyscraper(&w)?;
    let ok = e.check_squifferential();
    println!("stabilised skyscraper: {0} x {0} matrix over {1}, order {2}", 1 << w.nvars(), w.ring(), w.order());
    println!("D^2 = w id: {}", pass(ok));
    let mut v = serde_json::to_value(mj::factorisation_json(&e))?;
    v["verification"] = json!({"squifferential": pass(ok)});
    ctx.write(v, window(w.order(), None, None))?;
    Ok(code(ok))
}

fn minimal(ctx: &Ctx, input: &PotentialInput) -> Run {
    let w = ctx.potential(input)?;
    let k = ctx.opts.arity.unwrap_or(w.order().max(2));
    ctx.guard(w.nvars(), w.order(), Some(k))?;
    let (a, _) = minimal_model(&w, k)?;
    let rep = a.check_superfiltered_unital();
    println!("minimal model of {w}: {} nonzero operations, arity cap {k}", a.entries().iter().filter(|(_, e)| !e.is_zero()).count());
    println!("superfiltered and strictly unital: {}", pass(rep.passed));
    ctx.write(mj::algebra_json(&a), window(w.order(), Some(k), None))?;
    Ok(code(rep.passed))
}

fn disc_potential(ctx: &Ctx, path: &Path) -> Run {
    let a = ctx.algebra(path, true)?;
    ctx.guard(a.nvars(), a.order(), Some(a.arity_cap()))?;
    let p = a.disc_potential()?;
    println!("{p}");
    ctx.write(mj::series_json(&p), window(a.order(), Some(a.arity_cap()), None))?;
    Ok(0)
}

fn mirror(ctx: &Ctx, path: &Path) -> Run {
    let a = ctx.algebra(path, true)?;
    ctx.guard(a.nvars(), a.order(), Some(a.arity_cap()))?;
    let e = mirror_object(&a)?;
    let r = composite_equivalence(&a)?;
    println!("mirror factorisation of potential {}", e.w);
    for s in &r.stages {
        println!("  {:<12} {} ({})", s.name, pass(s.passed), s.certified);
    }
    let mut v = serde_json::to_value(mj::factorisation_json(&e))?;
    v["pipeline"] = mj::pipeline_json(&r);
    ctx.write(v, window(a.order(), Some(a.arity_cap()), None))?;
    Ok(code(r.passed()))
}

fn equivalent(ctx: &Ctx, p1: &Path, p2: &Path) -> Run {
    let load = |p: &Path| ctx.potential(&PotentialInput { potential: Some(p.to_path_buf()), poly: None });
    let (a, b) = (load(p1)?, load(p2)?);
    if a.nvars() != b.nvars() || a.ring() != b.ring() {
        return fail("P1 and P2 must share ring and variables");
    }
    let order = ctx.opts.order.unwrap_or(a.order().min(b.order()));
    ctx.guard(a.nvars(), order, None)?;
    let d = ctx.opts.d.unwrap_or(1);
    let r = potential_equivalence_search(&a, &b, d, order)?;
    println!("verdict: {}", r.verdict());
    if let Some(g) = r.failed_at {
        println!("obstruction first met at degree {g}");
    }
    ctx.write(mj::search_json(&r), window(order, None, None))?;
    Ok(match r.verdict() {
        "FOUND" => 0,
        "NOT-EQUIVALENT" => 1,
        _ => 3,
    })
}

fn hochschild(ctx: &Ctx, input: &PotentialInput, algebra: Option<&Path>) -> Run {
    if let Some(path) = algebra {
        let a = ctx.algebra(path, true)?;
        let len = ctx.opts.length.unwrap_or(3);
        let p = a.disc_potential()?;
        let centre = embed_and_centre_check(&p)?;
        let ins = hh_via_insertion(&a, len)?;
        println!("insertion map at length {len}, certified grades <= {}", ins.window);
        for c in &ins.checks {
            println!("  {:<12} {}", c.name, pass(c.passed));
        }
        println!("centre check: {}", pass(centre.passed()));
        let mut v = mj::hh_json(p.order().saturating_sub(1), Some(len), &centre);
        v["insertion"] = mj::insertion_json(a.order(), &ins);
        ctx.write(v, window(a.order(), Some(a.arity_cap()), Some(len)))?;
        return Ok(code(ins.passed() && centre.passed()));
    }
    let p = ctx.potential(input)?;
    ctx.guard(p.nvars(), p.order(), None)?;
    let r = embed_and_centre_check(&p)?;
    let c = &r.cohomology;
    println!("H*(C) for P = {p}: certified grades <= {}, total rank {}", c.window, c.total());
    for g in 0..=c.window {
        println!("  grade {g}: even {}, odd {}", c.rank(g, 0), c.rank(g, 1));
    }
    println!("centre check: {}", pass(r.passed()));
    ctx.write(mj::hh_json(p.order().saturating_sub(1), ctx.opts.length, &r), window(p.order(), None, ctx.opts.length))?;
    Ok(code(r.passed()))
}

fn verify(ctx: &Ctx, algebra: Option<&Path>, factorisation: Option<&Path>) -> Run {
    if let Some(path) = factorisation {
        let j: FactorisationJson = mj::parse(&ctx.read(path)?)?;
        let e = mj::factorisation_from_json(&j)?;
        ctx.guard(e.nvars(), e.order(), None)?;
        let (sq, filt) = (e.check_squifferential(), e.check_filtered());
        println!("D^2 = w id: {}", pass(sq));
        println!("D odd of filtration degree <= 1: {}", pass(filt));
        ctx.write(json!({"squifferential": pass(sq), "filtered": pass(filt)}), window(e.order(), None, None))?;
        return Ok(code(sq && filt));
    }
    let Some(path) = algebra else { return fail("give --algebra or --factorisation") };
    let a = ctx.algebra(path, false)?;
    let k = ctx.opts.arity.unwrap_or(a.arity_cap());
    let reports = [a.check_superfiltered_unital(), a.check_ainfinity(k)];
    let mut ok = true;
    for r in &reports {
        println!("{:<28} {} ({}, {} checked)", r.name, pass(r.passed), r.certified, r.checked);
        if let Some(f) = r.first_failure() {
            println!("  first failure: {f}");
        }
        ok &= r.passed;
    }
    let body: Vec<Value> = reports.iter().map(mj::check_json).collect();
    ctx.write(json!({"checks": body, "verdict": pass(ok)}), window(a.order(), Some(k), None))?;
    Ok(code(ok))
}

fn selftest(ctx: &Ctx) -> Run {
    let seed = ctx.opts.seed.unwrap_or(DEFAULT_SEED);
    let rings: Vec<Ring> = match ctx.ring {
        Some(r) => vec![r],
        None => BATCH_RINGS.to_vec(),
    };
    let outcomes = suite::run_all(seed, &rings);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let ok = outcomes.iter().all(|o| o.passed);
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed} of {} criteria pass", outcomes.len());
    let body: Vec<Value> = outcomes.iter().map(|o| json!({"criterion": o.id, "title": o.title, "verdict": pass(o.passed)})).collect();
    let names: Vec<String> = rings.iter().map(|r| r.to_string()).collect();
    ctx.write(json!({"seed": seed, "rings": names, "criteria": body}), window(5, Some(5), Some(3)))?;
    Ok(code(ok))
}

fn run(cli: Cli) -> Run {
    let ctx = Ctx::new(cli.opts)?;
    match &cli.cmd {
        Cmd::Stabilize(input) => stabilize(&ctx, input),
        Cmd::MinimalModel(input) => minimal(&ctx, input),
        Cmd::DiscPotential { algebra } => disc_potential(&ctx, algebra),
        Cmd::Mirror { algebra } => mirror(&ctx, algebra),
        Cmd::Equivalent { p1, p2 } => equivalent(&ctx, p1, p2),
        Cmd::Hochschild { input, algebra } => hochschild(&ctx, input, algebra.as_deref()),
        Cmd::Verify { algebra, factorisation } => verify(&ctx, algebra.as_deref(), factorisation.as_deref()),
        Cmd::Selftest => selftest(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(c) => ExitCode::from(c),
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
