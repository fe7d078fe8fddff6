//! The acceptance suite: nine criteria, each with pinned tolerances.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::affine::{
    compose, invert_map, product_set_member, semigroup_member, sinvs_witness, ssinv_witness, word_to_map, AffMap,
    ProductSide,
};
use crate::dehn::OneRelator;
use crate::directsum::kernel_bound_certificate;
use crate::freegroup::{positive_ball, reduce, reduced_ball, Gen, Letter, Sign, Word};
use crate::oscillator::{
    base_with_identity, enumerate_oscillator, left_multiply_base, parity_check, Budget, FreeBackend, FreeBase,
    GroupBackend, OscillatorExpr,
};
use crate::verify::scenario::{ex0_pontriagin, free_semigroup_pontriagin};
use crate::verify::{replay_witness, run_scenario, Certificate, ScenarioParams, Verdict};

pub const DEHN_MAX_LEN: usize = 8;
pub const DEHN_ORACLE_CAP: usize = 2_000_000;
pub const DEHN_TIME_LIMIT: Duration = Duration::from_secs(180);
pub const KERNEL_MAX_LEN: usize = 12;
pub const KERNEL_TIME_LIMIT: Duration = Duration::from_secs(300);
pub const EX0_TEST_LEN: usize = 6;
pub const EX11_BUDGET: usize = 10;
pub const EX11_WITNESS_MAX_LEN: usize = 4;
pub const EX11_TIME_LIMIT: Duration = Duration::from_secs(120);
pub const AFF_MAX_LEN: usize = 10;
pub const EX2_MAX_N: usize = 8;
pub const EX2_CROSS_MAX_N: usize = 4;
pub const FUZZ_INSTANCES: usize = 1000;
pub const FUZZ_MAX_N: usize = 5;
pub const FUZZ_MAX_BUDGET: usize = 4;
/// Largest `|base|^(n+1)` a fuzz instance may enumerate.
pub const FUZZ_PRODUCT_CAP: usize = 60_000;
pub const PONTRIAGIN_BUDGET: usize = 6;
pub const DETERMINISM_THREADS: [usize; 2] = [1, 8];

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    pub detail: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "criterion {}: {} - {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
}

impl SuiteReport {
    pub fn strip_timings(&mut self) {
        for c in &mut self.criteria {
            c.elapsed_ms = None;
        }
    }
}

fn timed(
    id: u32,
    title: &str,
    limit: Option<Duration>,
    f: impl FnOnce() -> Result<(bool, Value), String>,
) -> CriterionReport {
    let t = Instant::now();
    let r = f();
    let elapsed = t.elapsed();
    let (mut passed, mut detail) = match r {
        Ok(x) => x,
        Err(e) => (false, json!({ "error": e })),
    };
    if let Some(limit) = limit {
        let within = elapsed <= limit;
        passed &= within;
        if let Value::Object(m) = &mut detail {
            m.insert("time_limit_s".into(), json!(limit.as_secs()));
            m.insert("within_time_limit".into(), json!(within));
        }
    }
    CriterionReport {
        id,
        title: title.into(),
        passed,
        detail,
        elapsed_ms: Some(elapsed.as_millis() as u64),
    }
}

/// Dehn reduction against the normal-closure ball, every reduced word `≤ 8`.
pub fn criterion1() -> CriterionReport {
    timed(
        1,
        "word problem agrees with the normal-closure oracle",
        Some(DEHN_TIME_LIMIT),
        || {
            let words = reduced_ball(2, DEHN_MAX_LEN);
            let mut per_p = Vec::new();
            let mut ok = true;
            for p in [2, 3] {
                let rel = OneRelator::xy_torsion(p).map_err(|e| e.to_string())?;
                let ball = rel
                    .normal_closure_oracle(DEHN_MAX_LEN, DEHN_ORACLE_CAP)
                    .map_err(|e| e.to_string())?;
                let disagreements = words
                    .par_iter()
                    .filter(|w| rel.is_trivial(w) != ball.contains(w))
                    .count();
                ok &= disagreements == 0;
                per_p.push(
                    json!({"p": p, "words": words.len(), "oracle_members": ball.len(), "disagreements": disagreements}),
                );
            }
            Ok((ok, json!({ "runs": per_p })))
        },
    )
}

/// `(±S)^{2p−2} ∩ N = {e}` on words of length `≤ 12`.
pub fn criterion2() -> CriterionReport {
    timed(
        2,
        "semigroup oscillator meets the relator kernel trivially",
        Some(KERNEL_TIME_LIMIT),
        || {
            let mut runs = Vec::new();
            let mut ok = true;
            for p in [2, 3] {
                let r = kernel_bound_certificate(p, KERNEL_MAX_LEN).map_err(|e| e.to_string())?;
                ok &= r.counterexamples.is_empty() && r.oracle_disagreements == 0;
                runs.push(serde_json::to_value(&r).expect("report serializes"));
            }
            Ok((ok, json!({ "runs": runs })))
        },
    )
}

fn scenario(
    id: &str,
    p: Option<u32>,
    budget: Option<usize>,
    max_n: Option<usize>,
    seed: u64,
) -> Result<Certificate, String> {
    run_scenario(
        id,
        &ScenarioParams {
            p,
            budget,
            max_n,
            seed,
            timings: false,
        },
    )
}

fn replays(c: &Certificate) -> bool {
    c.replay().is_empty()
}

/// Torsion witnesses and separation stages for the direct-sum quotient at `p = 2`.
pub fn criterion3(seed: u64) -> CriterionReport {
    timed(3, "p = 2 direct-sum quotient has T1 = 3 and T2 = 1", None, || {
        let c = scenario("ex0", Some(2), Some(EX0_TEST_LEN), None, seed)?;
        let d = &c.details;
        let torsion = c.witnesses.iter().filter(|w| w.claim.starts_with("(p, e)")).count();
        let stage3 = &d["runs"]["t1_stages"][2];
        let est = |k: &str| (d[k]["lower"].as_u64(), d[k]["upper"].as_u64());
        let a = torsion == 5;
        let b = stage3["survivors"] == 0;
        let t = est("t1") == (Some(3), Some(3)) && est("t2") == (Some(1), Some(1)) && d["consistent"] == true;
        Ok((
            a && b && t && replays(&c) && c.verdict == Verdict::Verified,
            json!({
                "torsion_witnesses": torsion,
                "stage3_survivors": stage3["survivors"],
                "stage3_tested": stage3["tested"],
                "t1": [d["t1"]["lower"], d["t1"]["upper"]],
                "t2": [d["t2"]["lower"], d["t2"]["upper"]],
                "consistent": d["consistent"],
                "proof_line_discrepancy": d["targets"]["proof_line_discrepancy"],
                "verdict": c.verdict,
            }),
        ))
    })
}

/// Which product-set inclusion holds for the dyadic affine semigroup, at budget 10.
pub fn criterion4(seed: u64) -> CriterionReport {
    timed(
        4,
        "affine product sets: one inclusion refuted, the other clean",
        Some(EX11_TIME_LIMIT),
        || {
            let c = scenario("ex11", None, Some(EX11_BUDGET), None, seed)?;
            let d = &c.details;
            let inc = d["inclusions"].as_array().cloned().unwrap_or_default();
            let refuted = inc
                .iter()
                .filter(|r| r["exact_counterexamples"].as_u64() > Some(0))
                .count();
            let clean = inc
                .iter()
                .filter(|r| {
                    r["exact_counterexamples"] == 0 && r["bounded_counterexamples"] == 0 && r["right_exact"] == true
                })
                .count();
            let wlen = d["witness"]["word_length"].as_u64().unwrap_or(u64::MAX);
            let inclusion_witness_ok = c
                .witnesses
                .iter()
                .any(|w| w.factor_words.is_some() && replay_witness(w).is_ok());
            let pair = |k: &str| {
                (
                    d["orientation"][k]["lower"].as_u64(),
                    d["orientation"][k]["upper"].as_u64(),
                )
            };
            let mut osc = [pair("osc_base_s"), pair("osc_base_s_inverse")];
            osc.sort();
            let osc_ok = osc == [(Some(2), Some(2)), (Some(3), Some(3))];
            Ok((
                refuted == 1 && clean == 1 && wlen <= EX11_WITNESS_MAX_LEN as u64 && inclusion_witness_ok && osc_ok,
                json!({
                    "refuted": refuted,
                    "clean": clean,
                    "witness": d["witness"],
                    "smaller_product_set": d["orientation"]["smaller_product_set"],
                    "osc_base_s": pair("osc_base_s"),
                    "osc_base_s_inverse": pair("osc_base_s_inverse"),
                }),
            ))
        },
    )
}

// f ∈ S iff f = e or a⁻¹f ∈ S or b⁻¹f ∈ S; members have nonnegative scale and shift
fn peel(f: &AffMap, memo: &mut std::collections::HashMap<AffMap, bool>) -> bool {
    if f.is_identity() {
        return true;
    }
    if f.log_scale < 0 || f.shift.is_negative() {
        return false;
    }
    if let Some(&r) = memo.get(f) {
        return r;
    }
    let r = peel(&compose(&invert_map(&AffMap::a()), f), memo) || peel(&compose(&invert_map(&AffMap::b()), f), memo);
    memo.insert(f.clone(), r);
    r
}

/// Affine closed forms against enumeration on words of length `≤ 10`.
pub fn criterion5() -> CriterionReport {
    timed(5, "affine closed forms match enumeration", None, || {
        let pos = positive_ball(&[Gen(0), Gen(1)], AFF_MAX_LEN);
        let map = |w: &Word| word_to_map(w).map_err(|e| e.to_string());
        let mut d_s = 0usize;
        let mut d_ss = 0usize;
        let mut d_sinvs = 0usize;
        let mut shaped = [0usize; 3];
        // shaped words are members by construction
        for u in &pos {
            let f = map(u)?;
            shaped[0] += 1;
            d_s += !semigroup_member(&f) as usize;
        }
        for u in &pos {
            for v in &pos {
                if u.len() + v.len() > AFF_MAX_LEN {
                    continue;
                }
                let f = map(&u.multiply(&v.invert()))?;
                let g = map(&u.invert().multiply(v))?;
                shaped[1] += 1;
                shaped[2] += 1;
                d_ss += !product_set_member(&f, ProductSide::SSinv) as usize;
                d_sinvs += !product_set_member(&g, ProductSide::SinvS) as usize;
            }
        }
        // every reduced word: peeling for S, constructive witnesses for the product sets
        let mut memo = std::collections::HashMap::new();
        let all = reduced_ball(2, AFF_MAX_LEN);
        for w in &all {
            let f = map(w)?;
            let s = semigroup_member(&f);
            d_s += (s != peel(&f, &mut memo)) as usize;
            let ss = product_set_member(&f, ProductSide::SSinv);
            let wit = ssinv_witness(&f).is_some_and(|(a, b)| {
                semigroup_member(&a) && semigroup_member(&b) && compose(&a, &invert_map(&b)) == f
            });
            d_ss += (ss != wit) as usize;
            let sv = product_set_member(&f, ProductSide::SinvS);
            let wit = sinvs_witness(&f).is_some_and(|(a, b)| {
                semigroup_member(&a) && semigroup_member(&b) && compose(&invert_map(&a), &b) == f
            });
            d_sinvs += (sv != wit) as usize;
        }
        Ok((
            d_s + d_ss + d_sinvs == 0,
            json!({
                "max_len": AFF_MAX_LEN,
                "reduced_words": all.len(),
                "shaped_words": {"S": shaped[0], "SS^-1": shaped[1], "S^-1S": shaped[2]},
                "disagreements": {"S": d_s, "SS^-1": d_ss, "S^-1S": d_sinvs},
            }),
        ))
    })
}

/// Free semigroup: `(∓S)ⁿ ⊄ (±S)ⁿ` for every `n ≤ 8`.
pub fn criterion6(seed: u64) -> CriterionReport {
    timed(6, "free semigroup has unbounded oscillation", None, || {
        let c = scenario("ex2", None, Some(1), Some(EX2_MAX_N), seed)?;
        let d = &c.details;
        let ns: Vec<usize> = c
            .witnesses
            .iter()
            .filter_map(|w| w.member_of.as_ref().map(|m| m.n))
            .collect();
        let all_n = ns == (1..=EX2_MAX_N).collect::<Vec<_>>();
        let exact = c.witnesses.iter().all(|w| w.exact && w.excluded_from.is_some());
        let cross: Vec<Value> = d["cross_check"].as_array().cloned().unwrap_or_default();
        let cross_ok = cross.len() == EX2_CROSS_MAX_N && cross.iter().all(|x| x["disagreements"] == 0);
        let lower = d["osc"]["lower"].as_u64().unwrap_or(0);
        Ok((
            all_n && exact && cross_ok && lower > EX2_MAX_N as u64 && replays(&c),
            json!({
                "witness_levels": ns,
                "cross_checked_up_to": cross.len(),
                "osc_lower": lower,
                "witnesses": c.witnesses.iter().map(|w| w.element.clone()).collect::<Vec<_>>(),
            }),
        ))
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FuzzInstance {
    pub base: String,
    pub n: usize,
    pub mirror: bool,
    pub budget: usize,
}

fn random_word(rng: &mut ChaCha8Rng, max_len: usize) -> Word {
    let len = rng.gen_range(1..=max_len);
    let raw: Vec<Letter> = (0..len)
        .map(|_| {
            let g = Gen(rng.gen_range(0..2));
            let s = if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus };
            Letter::new(g, s)
        })
        .collect();
    reduce(&raw)
}

fn random_base(rng: &mut ChaCha8Rng) -> FreeBase {
    match rng.gen_range(0..5) {
        0 => FreeBase::PositiveMonoid(if rng.gen_bool(0.5) {
            vec![Gen(0), Gen(1)]
        } else {
            vec![Gen(rng.gen_range(0..2))]
        }),
        1 => FreeBase::Monoid((0..rng.gen_range(1..=2)).map(|_| random_word(rng, 2)).collect()),
        2 => FreeBase::Finite((0..rng.gen_range(1..=3)).map(|_| random_word(rng, 3)).collect()),
        3 => FreeBase::CyclicSubgroup(random_word(rng, 2)),
        _ => FreeBase::Whole,
    }
}

/// Recursion, monotonicity and parity on one fuzzed instance; returns the
/// names of the failed checks.
pub fn fuzz_check(
    b: &FreeBackend,
    base: &FreeBase,
    expr: OscillatorExpr,
    budget: Budget,
) -> Result<Vec<&'static str>, String> {
    let err = |e: crate::oscillator::OscillatorError| e.to_string();
    let mut failed = Vec::new();
    let set = enumerate_oscillator(b, base, expr, budget).map_err(err)?;
    let flipped = enumerate_oscillator(b, base, expr.flipped(), budget).map_err(err)?;
    let up = OscillatorExpr::new(expr.n() + 1, expr.mirror()).map_err(err)?;
    let next = enumerate_oscillator(b, base, up, budget).map_err(err)?;
    // (±U)ⁿ⁺¹ = U (∓U)ⁿ and (∓U)ⁿ⁺¹ = U⁻¹ (±U)ⁿ
    let rec = left_multiply_base(b, base, up.sign_pattern()[0], &flipped).map_err(err)?;
    if rec.len() != next.len() || !rec.iter().all(|k| next.contains_key(k)) {
        failed.push("recursion");
    }
    // e ∈ U pads either end
    if !set.elements().chain(flipped.elements()).all(|a| next.contains(b, a)) {
        failed.push("monotone_n");
    }
    if budget.factor_len > 1 {
        let smaller = enumerate_oscillator(b, base, expr, Budget::new(budget.factor_len - 1)).map_err(err)?;
        if !smaller.elements().all(|a| set.contains(b, a)) {
            failed.push("monotone_budget");
        }
    }
    let counterpart = if expr.inverse() == expr { &set } else { &flipped };
    if !parity_check(b, &set, counterpart) {
        failed.push("parity");
    }
    Ok(failed)
}

/// Budget lowered until `|base|^(n+1)` fits the product cap.
fn fitted_budget(b: &FreeBackend, base: &FreeBase, n: usize, mut budget: usize) -> Result<usize, String> {
    loop {
        let size = base_with_identity(b, base, budget)
            .map_err(|e| e.to_string())?
            .elements
            .len();
        if (size as f64).powi(n as i32 + 1) <= FUZZ_PRODUCT_CAP as f64 || budget == 1 {
            return Ok(budget);
        }
        budget -= 1;
    }
}

pub fn fuzz_instances(
    seed: u64,
    count: usize,
) -> Result<Vec<(FuzzInstance, FreeBase, OscillatorExpr, Budget)>, String> {
    let b = FreeBackend::xy();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let base = random_base(&mut rng);
        let n = rng.gen_range(1..=FUZZ_MAX_N);
        let mirror = rng.gen_bool(0.5);
        let want = rng.gen_range(1..=FUZZ_MAX_BUDGET);
        let budget = fitted_budget(&b, &base, n, want)?;
        let expr = OscillatorExpr::new(n, mirror).map_err(|e| e.to_string())?;
        out.push((
            FuzzInstance {
                base: b.describe_base(&base),
                n,
                mirror,
                budget,
            },
            base,
            expr,
            Budget::new(budget),
        ));
    }
    Ok(out)
}

pub fn criterion7(seed: u64) -> CriterionReport {
    timed(
        7,
        "oscillator recursion, monotonicity and parity on fuzzed instances",
        None,
        || {
            let b = FreeBackend::xy();
            let inst = fuzz_instances(seed, FUZZ_INSTANCES)?;
            let results: Vec<Result<Vec<&'static str>, String>> = inst
                .par_iter()
                .map(|(_, base, expr, budget)| fuzz_check(&b, base, *expr, *budget))
                .collect();
            let mut failures = Vec::new();
            for ((i, _, _, _), r) in inst.iter().zip(results) {
                let r = r?;
                if !r.is_empty() {
                    failures.push(json!({"instance": i, "failed": r}));
                }
            }
            let by_n: Vec<usize> = (1..=FUZZ_MAX_N)
                .map(|n| inst.iter().filter(|x| x.0.n == n).count())
                .collect();
            Ok((
                failures.is_empty() && inst.len() == FUZZ_INSTANCES,
                json!({
                    "seed": seed,
                    "instances": inst.len(),
                    "instances_by_n": by_n,
                    "failures": failures.len(),
                    "first_failures": failures.into_iter().take(5).collect::<Vec<_>>(),
                }),
            ))
        },
    )
}

pub fn criterion8() -> CriterionReport {
    timed(8, "Pontriagin conditions on the two reference bases", None, || {
        let ex0 = ex0_pontriagin(PONTRIAGIN_BUDGET)?;
        let free = free_semigroup_pontriagin(PONTRIAGIN_BUDGET)?;
        let first_four = ["P1", "P2", "P3", "P4"]
            .iter()
            .all(|c| ex0.verdict(c) == Some(Verdict::Verified));
        let p5 = free.verdict("P5") == Some(Verdict::RefutedWithWitness)
            && !free.witnesses.is_empty()
            && free.witnesses.iter().all(|w| replay_witness(w).is_ok());
        Ok((
            first_four && p5,
            json!({
                "direct_sum_basis": ex0.conditions.iter().map(|c| json!({"condition": c.condition, "verdict": c.verdict, "checked": c.checked})).collect::<Vec<_>>(),
                "free_semigroup_p5": free.conditions.iter().find(|c| c.condition == "P5"),
                "p5_witnesses": free.witnesses.iter().map(|w| w.element.clone()).collect::<Vec<_>>(),
            }),
        ))
    })
}

fn first_eight(seed: u64) -> Vec<CriterionReport> {
    vec![
        criterion1(),
        criterion2(),
        criterion3(seed),
        criterion4(seed),
        criterion5(),
        criterion6(seed),
        criterion7(seed),
        criterion8(),
    ]
}

/// Criteria 1 to 8 give the same report, timings stripped, under 1 and 8 threads.
pub fn criterion9(seed: u64) -> CriterionReport {
    timed(9, "output is independent of the thread count", None, || {
        let mut outs = Vec::new();
        for t in DETERMINISM_THREADS {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| e.to_string())?;
            let mut r = pool.install(|| first_eight(seed));
            for c in &mut r {
                c.elapsed_ms = None;
            }
            outs.push(serde_json::to_string(&r).expect("reports serialize"));
        }
        let same = outs.windows(2).all(|w| w[0] == w[1]);
        Ok((
            same,
            json!({"threads": DETERMINISM_THREADS, "bytes": outs[0].len(), "identical": same}),
        ))
    })
}

pub fn run_all(seed: u64) -> SuiteReport {
    let mut criteria = first_eight(seed);
    criteria.push(criterion9(seed));
    SuiteReport {
        seed,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    }
}
