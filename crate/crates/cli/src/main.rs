use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use oscillo::acceptance::run_all;
use oscillo::affine::{
    ab_alphabet, product_set_member, semigroup_member, sinvs_witness, ssinv_witness, word_to_map, AffBackend, AffBase,
    AffMap, ProductSide,
};
use oscillo::dehn::OneRelator;
use oscillo::directsum::{torsion_witness, Ex0Backend};
use oscillo::freegroup::{Alphabet, Sign, Word};
use oscillo::oscillator::{
    enumerate_oscillator, member_oscillator, refute_inclusion, Budget, Factorization, FreeBackend, FreeBase,
    GroupBackend, Membership, OscillatorExpr,
};
use oscillo::verify::scenario::ex0_estimates;
use oscillo::verify::{
    estimate_osc, run_scenario, BackendTag, BaseRef, Certificate, RecordCtx, ScenarioParams, Verdict,
};

mod base;

use base::{parse_aff_base, parse_free_base};

#[derive(Parser, Debug)]
#[command(
    name = "oscillo",
    version,
    about = "Oscillator sets, word problems and verification certificates"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Output format; text on stdout and json with --out unless given.
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Cap on worker threads.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
    /// Leave wall-clock timings out of the output.
    #[arg(long, global = true)]
    no_timings: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Text,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Backend {
    Free,
    Aff,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SetName {
    S,
    #[value(name = "SSinv")]
    SSinv,
    #[value(name = "SinvS")]
    SinvS,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Check {
    T1,
    T2,
    Torsion,
    All,
}

/// Base set and oscillator shape shared by the enumeration commands.
#[derive(Args, Debug, Clone)]
struct OscArgs {
    #[arg(long, value_enum, default_value_t = Backend::Free)]
    backend: Backend,
    /// Free: `x,y` (positive monoid), `whole`, `<w>`, `{w1, w2}`. Aff: `S` or `{a=1,t=0; a=0,t=1}`.
    #[arg(long, default_value = "S")]
    base: String,
    /// Generator names for the free backend.
    #[arg(long, default_value = "x y")]
    gens: String,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Use `(∓U)ⁿ` instead of `(±U)ⁿ`.
    #[arg(long)]
    mirror: bool,
    /// Per-factor word length.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    budget: u64,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Freely reduce a word.
    Reduce {
        word_pos: Option<String>,
        #[arg(long)]
        word: Option<String>,
    },
    /// Dehn reduction in a one-relator group.
    Dehn {
        #[arg(long)]
        pres: PathBuf,
        #[arg(long)]
        word: String,
    },
    /// Enumerate an oscillator set within the budget.
    OscEnum(OscArgs),
    /// Decide membership in an oscillator set.
    OscMember {
        #[command(flatten)]
        osc: OscArgs,
        /// A word over the generators (free) or over `a, b` (aff).
        #[arg(long)]
        word: Option<String>,
        /// An affine map literal `a=K,t=SHIFT`.
        #[arg(long)]
        map: Option<String>,
    },
    /// Look for an element of `(∓U)ⁿ` outside `(±U)ⁿ`, or the reverse with `--mirror`.
    RefuteInclusion(OscArgs),
    /// Affine maps over `a: x ↦ 2x`, `b: x ↦ x + 1`.
    Aff {
        #[command(subcommand)]
        cmd: AffCmd,
    },
    /// Separation estimates for the direct-sum quotient.
    Ex0 {
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(2..))]
        p: u32,
        #[arg(long, value_enum, default_value_t = Check::All)]
        check: Check,
        /// Test-set word length.
        #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
        budget: u64,
    },
    /// Run a named scenario and emit its certificate.
    Scenario {
        id: String,
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
        p: Option<u32>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        budget: Option<u64>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        max_n: Option<u64>,
    },
    /// Bounds on the oscillation number of one base set.
    Estimate {
        #[command(flatten)]
        osc: OscArgs,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
        max_n: u64,
    },
    /// Re-verify every witness in a certificate file.
    Replay {
        #[arg(long)]
        cert: PathBuf,
    },
    /// Run the acceptance suite.
    Selftest,
}

#[derive(Subcommand, Debug)]
enum AffCmd {
    /// The map of a word over `a, b`.
    Eval {
        #[arg(long)]
        word: String,
    },
    /// Exact membership of a map in `S`, `SS⁻¹` or `S⁻¹S`.
    Member {
        #[arg(long, value_enum)]
        set: SetName,
        #[arg(long)]
        map: String,
    },
}

/// What a command hands back: the JSON contract, a text rendering, an exit code.
struct Report {
    json: Value,
    text: String,
    code: u8,
}

impl Report {
    fn ok(json: Value, text: String) -> Report {
        Report { json, text, code: 0 }
    }
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::InconclusiveAtBound => 2,
        _ => 0,
    }
}

fn osc_expr(a: &OscArgs) -> Result<OscillatorExpr> {
    OscillatorExpr::new(a.n as usize, a.mirror).map_err(|e| anyhow!(e.to_string()))
}

fn free_alphabet(a: &OscArgs) -> Result<Alphabet> {
    let names: Vec<&str> = a.gens.split_whitespace().collect();
    Alphabet::new(&names).map_err(|e| anyhow!(e.to_string()))
}

fn free_base_ref(b: &FreeBackend, spec: &FreeBase) -> Result<BaseRef> {
    let words = |ws: &[Word]| ws.iter().map(|w| b.format(w)).collect();
    Ok(match spec {
        FreeBase::PositiveMonoid(gens) => BaseRef::PositiveMonoid {
            gens: gens.iter().map(|g| b.alphabet.name(*g).to_string()).collect(),
        },
        FreeBase::CyclicSubgroup(w) => BaseRef::CyclicSubgroup { word: b.format(w) },
        FreeBase::Whole => BaseRef::Whole,
        FreeBase::Finite(ws) => BaseRef::Finite { words: words(ws) },
        FreeBase::Monoid(_) => {
            bail!("monoids on arbitrary words have no certificate reference; use positive generators")
        }
    })
}

fn factorization_json<B: GroupBackend>(b: &B, f: &Factorization<B::Elem>) -> Value {
    json!({
        "factors": f.factors.iter().map(|x| b.factor_label(x)).collect::<Vec<_>>(),
        "signs": f.signs,
    })
}

fn factorization_text<B: GroupBackend>(b: &B, f: &Factorization<B::Elem>) -> String {
    f.factors
        .iter()
        .zip(&f.signs)
        .map(|(x, s)| match s {
            Sign::Plus => format!("({})", b.factor_label(x)),
            Sign::Minus => format!("({})^-1", b.factor_label(x)),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_reduce(word: &str) -> Result<Report> {
    let alphabet = Alphabet::infer(word).map_err(|e| anyhow!(e.to_string()))?;
    let w = alphabet.parse_word(word).map_err(|e| anyhow!(e.to_string()))?;
    let reduced = alphabet.format(&w);
    Ok(Report::ok(
        json!({"input": word, "reduced": reduced, "length": w.len()}),
        reduced,
    ))
}

fn cmd_dehn(pres: &PathBuf, word: &str) -> Result<Report> {
    let text = fs::read_to_string(pres).with_context(|| format!("reading {}", pres.display()))?;
    let rel = OneRelator::parse(&text).map_err(|e| anyhow!(e.to_string()))?;
    let raw = rel.alphabet().parse_raw(word).map_err(|e| anyhow!(e.to_string()))?;
    let (out, trace) = rel.dehn_reduce_raw(&raw).map_err(|e| anyhow!(e.to_string()))?;
    let reduced = rel.alphabet().format(&out);
    let trivial = out.is_identity();
    let steps: Vec<Value> = trace
        .steps
        .iter()
        .map(|s| {
            json!({
                "position": s.position,
                "side": s.side,
                "matched": rel.alphabet().format(&s.matched),
                "replacement": rel.alphabet().format(&s.replacement),
                "length_after": s.length_after,
            })
        })
        .collect();
    let mut text = format!("{reduced}\ntrivial: {trivial}\nsteps: {}", steps.len());
    for s in &trace.steps {
        text.push_str(&format!(
            "\n  at {:>3}: {} -> {}  (length {})",
            s.position,
            rel.alphabet().format(&s.matched),
            rel.alphabet().format(&s.replacement),
            s.length_after
        ));
    }
    Ok(Report::ok(
        json!({
            "relator": rel.alphabet().format(rel.root()),
            "power": rel.power(),
            "input": word,
            "reduced": reduced,
            "trivial": trivial,
            "steps": steps,
        }),
        text,
    ))
}

fn enum_report<B: GroupBackend>(b: &B, spec: &B::BaseSpec, expr: OscillatorExpr, budget: Budget) -> Result<Report> {
    let set = enumerate_oscillator(b, spec, expr, budget).map_err(|e| anyhow!(e.to_string()))?;
    let elements: Vec<String> = set.elements().map(|a| b.format(a)).collect();
    let semantics = set.semantics();
    let text = format!(
        "{} over {}: {} elements at factor length {} ({:?})\n{}",
        expr.notation(),
        b.describe_base(spec),
        elements.len(),
        budget.factor_len,
        semantics,
        elements.join("\n")
    );
    Ok(Report::ok(
        json!({
            "set": expr.notation(),
            "base": b.describe_base(spec),
            "elements": elements,
            "count": set.len(),
            "budget": budget,
            "semantics": semantics,
        }),
        text,
    ))
}

fn cmd_osc_enum(a: &OscArgs) -> Result<Report> {
    let expr = osc_expr(a)?;
    let budget = Budget::new(a.budget as usize);
    match a.backend {
        Backend::Free => {
            let b = FreeBackend::new(free_alphabet(a)?);
            let spec = parse_free_base(&b.alphabet, &a.base)?;
            enum_report(&b, &spec, expr, budget)
        }
        Backend::Aff => enum_report(&AffBackend::new(), &parse_aff_base(&a.base)?, expr, budget),
    }
}

fn member_report<B: GroupBackend>(
    b: &B,
    spec: &B::BaseSpec,
    expr: OscillatorExpr,
    budget: Budget,
    g: &B::Elem,
) -> Result<Report> {
    let m = member_oscillator(b, spec, expr, g, budget).map_err(|e| anyhow!(e.to_string()))?;
    let head = format!("{} in {} over {}", b.format(g), expr.notation(), b.describe_base(spec));
    let (answer, fact, text, code) = match &m {
        Membership::Yes(f) => (
            "member",
            factorization_json(b, f),
            format!("{head}: yes\n  = {}", factorization_text(b, f)),
            0,
        ),
        Membership::No => ("non_member", Value::Null, format!("{head}: no (exact)"), 0),
        Membership::NoWithinBound => (
            "not_found_within_bound",
            Value::Null,
            format!("{head}: not found at factor length {}", budget.factor_len),
            2,
        ),
    };
    Ok(Report {
        json: json!({
            "element": b.format(g),
            "set": expr.notation(),
            "base": b.describe_base(spec),
            "budget": budget,
            "answer": answer,
            "factorization": fact,
        }),
        text,
        code,
    })
}

fn parse_aff_element(word: Option<&str>, map: Option<&str>) -> Result<AffMap> {
    match (word, map) {
        (Some(w), None) => {
            let w = ab_alphabet().parse_word(w).map_err(|e| anyhow!(e.to_string()))?;
            word_to_map(&w).map_err(|e| anyhow!(e.to_string()))
        }
        (None, Some(m)) => m
            .parse()
            .map_err(|e: oscillo::affine::AffineError| anyhow!(e.to_string())),
        _ => bail!("give exactly one of --word or --map"),
    }
}

fn cmd_osc_member(a: &OscArgs, word: Option<&str>, map: Option<&str>) -> Result<Report> {
    let expr = osc_expr(a)?;
    let budget = Budget::new(a.budget as usize);
    match a.backend {
        Backend::Free => {
            let b = FreeBackend::new(free_alphabet(a)?);
            let spec = parse_free_base(&b.alphabet, &a.base)?;
            if map.is_some() {
                bail!("--map only applies to the aff backend");
            }
            let w = word.ok_or_else(|| anyhow!("--word is required"))?;
            let g = b.alphabet.parse_word(w).map_err(|e| anyhow!(e.to_string()))?;
            member_report(&b, &spec, expr, budget, &g)
        }
        Backend::Aff => {
            let g = parse_aff_element(word, map)?;
            member_report(&AffBackend::new(), &parse_aff_base(&a.base)?, expr, budget, &g)
        }
    }
}

fn inclusion_report<B: GroupBackend>(
    b: &B,
    spec: &B::BaseSpec,
    expr: OscillatorExpr,
    budget: Budget,
) -> Result<Report> {
    let left = expr.flipped();
    let r = refute_inclusion(b, (spec, left), (spec, expr), budget, 1).map_err(|e| anyhow!(e.to_string()))?;
    // the left side is only ever enumerated, so a clean run stays inconclusive
    let verdict = if r.refuted_exactly() {
        Verdict::RefutedWithWitness
    } else {
        Verdict::InconclusiveAtBound
    };
    let claim = format!("{} inside {}", left.notation(), expr.notation());
    let witness = r.witness.as_ref().map(|w| {
        json!({
            "element": b.format(&w.element),
            "factorization": factorization_json(b, &w.factorization),
            "weight": w.weight,
            "exact": w.exact,
        })
    });
    let mut text = format!(
        "{claim} over {}: {:?}\n  left elements {}, exact counterexamples {}, bounded {}, right side exact: {}",
        b.describe_base(spec),
        verdict,
        r.left_size,
        r.exact_counterexamples,
        r.bounded_counterexamples,
        r.right_exact
    );
    if let Some(w) = &r.witness {
        text.push_str(&format!(
            "\n  witness {} = {}",
            b.format(&w.element),
            factorization_text(b, &w.factorization)
        ));
    }
    Ok(Report {
        json: json!({
            "claim": claim,
            "base": b.describe_base(spec),
            "budget": budget,
            "verdict": verdict,
            "left_size": r.left_size,
            "exact_counterexamples": r.exact_counterexamples,
            "bounded_counterexamples": r.bounded_counterexamples,
            "right_exact": r.right_exact,
            "witness": witness,
        }),
        text,
        code: verdict_code(verdict),
    })
}

fn cmd_refute(a: &OscArgs) -> Result<Report> {
    let expr = osc_expr(a)?;
    let budget = Budget::new(a.budget as usize);
    match a.backend {
        Backend::Free => {
            let b = FreeBackend::new(free_alphabet(a)?);
            let spec = parse_free_base(&b.alphabet, &a.base)?;
            inclusion_report(&b, &spec, expr, budget)
        }
        Backend::Aff => inclusion_report(&AffBackend::new(), &parse_aff_base(&a.base)?, expr, budget),
    }
}

fn cmd_aff(cmd: &AffCmd) -> Result<Report> {
    match cmd {
        AffCmd::Eval { word } => {
            let f = parse_aff_element(Some(word), None)?;
            Ok(Report::ok(
                json!({"word": word, "map": f.to_string(), "log_scale": f.log_scale, "shift": f.shift}),
                format!("{f}  (x -> 2^{} x + {})", f.log_scale, f.shift),
            ))
        }
        AffCmd::Member { set, map } => {
            let f = parse_aff_element(None, Some(map))?;
            let (name, member, witness) = match set {
                SetName::S => ("S", semigroup_member(&f), None),
                SetName::SSinv => (
                    "SS^-1",
                    product_set_member(&f, ProductSide::SSinv),
                    ssinv_witness(&f)
                        .map(|(s, t)| json!({"s1": s.to_string(), "s2": t.to_string(), "form": "s1 s2^-1"})),
                ),
                SetName::SinvS => (
                    "S^-1S",
                    product_set_member(&f, ProductSide::SinvS),
                    sinvs_witness(&f)
                        .map(|(s, t)| json!({"s1": s.to_string(), "s2": t.to_string(), "form": "s1^-1 s2"})),
                ),
            };
            let mut text = format!("{f} in {name}: {}", if member { "yes" } else { "no" });
            if let Some(w) = &witness {
                text.push_str(&format!("\n  s1 = {}, s2 = {}, {}", w["s1"], w["s2"], w["form"]));
            }
            Ok(Report::ok(
                json!({"map": f.to_string(), "set": name, "member": member, "witness": witness}),
                text,
            ))
        }
    }
}

fn cmd_ex0(p: u32, check: Check, test_len: usize) -> Result<Report> {
    let mut out = serde_json::Map::new();
    let mut lines = Vec::new();
    let mut code = 0u8;
    let mut grade = |est: &oscillo::verify::Estimate, target: u32, name: &str, lines: &mut Vec<String>| {
        let c = match (est.is_exact(), est.lower) {
            (true, l) if l == target => 0,
            (true, _) => 1,
            (false, _) => 2,
        };
        code = code.max(c);
        let upper = est.upper.map_or("unbounded at budget".to_string(), |u| u.to_string());
        lines.push(format!("{name}: [{}, {upper}]  target {target}", est.lower));
        lines.push(format!("  lower: {}", est.lower_basis));
        lines.push(format!("  upper: {}", est.upper_basis));
    };
    if matches!(check, Check::T1 | Check::T2 | Check::All) {
        let run = ex0_estimates(p, test_len).map_err(|e| anyhow!(e))?;
        if matches!(check, Check::T1 | Check::All) {
            grade(&run.t1, 2 * p - 1, "T1", &mut lines);
            out.insert("t1".into(), serde_json::to_value(&run.t1)?);
        }
        if matches!(check, Check::T2 | Check::All) {
            grade(&run.t2, p - 1, "T2", &mut lines);
            out.insert("t2".into(), serde_json::to_value(&run.t2)?);
        }
    }
    if matches!(check, Check::Torsion | Check::All) {
        let b = Ex0Backend::new(p).map_err(|e| anyhow!(e.to_string()))?;
        let expr = OscillatorExpr::plus(2 * p as usize);
        let target = b.pure(p as i64);
        let mut rows = Vec::new();
        for n in 1..=5u32 {
            let f = Factorization {
                factors: torsion_witness(&b, n),
                signs: expr.sign_pattern(),
            };
            let ok = f.verifies(&b, &target);
            if !ok {
                code = 1;
            }
            lines.push(format!(
                "(p, e) = {} over psi(U_{n}): {}",
                factorization_text(&b, &f),
                if ok { "verified" } else { "FAILED" }
            ));
            rows.push(json!({"n": n, "factorization": factorization_json(&b, &f), "verifies": ok}));
        }
        out.insert("torsion".into(), Value::Array(rows));
    }
    out.insert("p".into(), json!(p));
    out.insert("test_len".into(), json!(test_len));
    Ok(Report {
        json: Value::Object(out),
        text: lines.join("\n"),
        code,
    })
}

fn certificate_text(c: &Certificate) -> String {
    let mut s = format!(
        "scenario {}: {:?} (expected {:?})\nparams {}\nbudgets {}\nwitnesses: {}",
        c.scenario,
        c.verdict,
        c.expected,
        c.params,
        c.budgets,
        c.witnesses.len()
    );
    for w in &c.witnesses {
        let parts: Vec<String> = w
            .factorization
            .iter()
            .zip(&w.signs)
            .map(|(f, s)| match s {
                Sign::Plus => format!("({f})"),
                Sign::Minus => format!("({f})^-1"),
            })
            .collect();
        s.push_str(&format!("\n  {:<50} {}  = {}", w.claim, w.element, parts.join(" ")));
    }
    s
}

fn cmd_scenario(g: &Global, id: &str, p: Option<u32>, budget: Option<u64>, max_n: Option<u64>) -> Result<Report> {
    let params = ScenarioParams {
        p,
        budget: budget.map(|b| b as usize),
        max_n: max_n.map(|n| n as usize),
        seed: g.seed,
        timings: !g.no_timings,
    };
    let c = run_scenario(id, &params).map_err(|e| anyhow!(e))?;
    Ok(Report {
        json: serde_json::to_value(&c)?,
        text: certificate_text(&c),
        code: c.exit_code() as u8,
    })
}

fn estimate_report<B: GroupBackend>(
    b: &B,
    spec: &B::BaseSpec,
    ctx: &RecordCtx<'_, B::BaseSpec>,
    max_n: usize,
    budget: Budget,
) -> Result<Report> {
    let run = estimate_osc(b, spec, ctx, max_n, budget).map_err(|e| anyhow!(e.to_string()))?;
    let e = &run.estimate;
    let upper = e.upper.map_or("unbounded at budget".to_string(), |u| u.to_string());
    let mut text = format!(
        "osc over {}: [{}, {upper}]\n  lower: {}\n  upper: {}\n   n  left  exact  bounded  outcome",
        b.describe_base(spec),
        e.lower,
        e.lower_basis,
        e.upper_basis
    );
    for l in &run.levels {
        text.push_str(&format!(
            "\n  {:>2}  {:>4}  {:>5}  {:>7}  {}",
            l.n, l.left_size, l.exact_counterexamples, l.bounded_counterexamples, l.outcome
        ));
    }
    Ok(Report {
        json: json!({"base": b.describe_base(spec), "estimate": e, "levels": run.levels, "witnesses": run.witnesses}),
        text,
        code: if e.is_exact() { 0 } else { 2 },
    })
}

fn cmd_estimate(a: &OscArgs, max_n: usize) -> Result<Report> {
    let budget = Budget::new(a.budget as usize);
    match a.backend {
        Backend::Free => {
            let b = FreeBackend::new(free_alphabet(a)?);
            let spec = parse_free_base(&b.alphabet, &a.base)?;
            let r = free_base_ref(&b, &spec)?;
            let base_ref = move |_: &FreeBase| r.clone();
            let ctx = RecordCtx {
                tag: BackendTag::Free {
                    gens: b.alphabet.names().to_vec(),
                },
                base_ref: &base_ref,
            };
            estimate_report(&b, &spec, &ctx, max_n, budget)
        }
        Backend::Aff => {
            let spec = parse_aff_base(&a.base)?;
            if !matches!(spec, AffBase::Semigroup) {
                bail!("estimate supports only the base S on the aff backend");
            }
            let base_ref = |_: &AffBase| BaseRef::Semigroup;
            let ctx = RecordCtx {
                tag: BackendTag::Aff,
                base_ref: &base_ref,
            };
            estimate_report(&AffBackend::new(), &spec, &ctx, max_n, budget)
        }
    }
}

fn cmd_replay(path: &PathBuf) -> Result<Report> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let c = Certificate::from_json(&text).map_err(|e| anyhow!(e))?;
    let failures = c.replay();
    let mut out = format!(
        "{}: {} witnesses, {} failed",
        c.scenario,
        c.witnesses.len(),
        failures.len()
    );
    for (i, why) in &failures {
        out.push_str(&format!("\n  witness {i}: {why}"));
    }
    Ok(Report {
        json: json!({
            "scenario": c.scenario,
            "witnesses": c.witnesses.len(),
            "failures": failures.iter().map(|(i, why)| json!({"index": i, "reason": why})).collect::<Vec<_>>(),
        }),
        text: out,
        code: if failures.is_empty() { 0 } else { 1 },
    })
}

fn cmd_selftest(g: &Global) -> Result<Report> {
    let mut r = run_all(g.seed);
    if g.no_timings {
        r.strip_timings();
    }
    let text = r
        .criteria
        .iter()
        .map(|c| match c.elapsed_ms {
            Some(ms) => format!("{}  ({ms} ms)", c.line()),
            None => c.line(),
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Report {
        json: serde_json::to_value(&r)?,
        text,
        code: if r.passed { 0 } else { 1 },
    })
}

fn dispatch(cli: &Cli) -> Result<Report> {
    let g = &cli.global;
    match &cli.cmd {
        Cmd::Reduce { word_pos, word } => match (word_pos, word) {
            (Some(w), None) | (None, Some(w)) => cmd_reduce(w),
            _ => bail!("give the word either positionally or with --word"),
        },
        Cmd::Dehn { pres, word } => cmd_dehn(pres, word),
        Cmd::OscEnum(a) => cmd_osc_enum(a),
        Cmd::OscMember { osc, word, map } => cmd_osc_member(osc, word.as_deref(), map.as_deref()),
        Cmd::RefuteInclusion(a) => cmd_refute(a),
        Cmd::Aff { cmd } => cmd_aff(cmd),
        Cmd::Ex0 { p, check, budget } => cmd_ex0(*p, *check, *budget as usize),
        Cmd::Scenario { id, p, budget, max_n } => cmd_scenario(g, id, *p, *budget, *max_n),
        Cmd::Estimate { osc, max_n } => cmd_estimate(osc, *max_n as usize),
        Cmd::Replay { cert } => cmd_replay(cert),
        Cmd::Selftest => cmd_selftest(g),
    }
}

fn emit(g: &Global, r: &Report) -> Result<()> {
    let format = g
        .format
        .unwrap_or(if g.out.is_some() { Format::Json } else { Format::Text });
    let body = match format {
        Format::Json => serde_json::to_string_pretty(&r.json)?,
        Format::Text => r.text.clone(),
    };
    match &g.out {
        Some(path) => fs::write(path, body + "\n").with_context(|| format!("writing {}", path.display())),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{body}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => r.map_err(Into::into),
            }
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(t) = cli.global.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t as usize).build_global()?;
    }
    let r = dispatch(&cli)?;
    emit(&cli.global, &r)?;
    Ok(r.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
