//! `T₁`, `T₂` and `osc` estimators over a finite list of basic sets.
//!
//! A stage `k` is `T₁` when `⋂ (±U)^k = {e}` over the basis. Stage `s` is
//! Hausdorff exactly when stage `2s` is `T₁`, and a `T₁` stage `2m` lifts to
//! `2m + 1`; both facts hold in every paratopological group.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use super::certificate::{BackendTag, BaseRef, SetRef, WitnessRecord};
use crate::oscillator::{
    enumerate_oscillator, refute_inclusion, BoundedSet, Budget, Decision, Factorization, GroupBackend, OscillatorError,
    OscillatorExpr,
};

/// How witnesses from a backend are written down.
pub struct RecordCtx<'a, S> {
    pub tag: BackendTag,
    pub base_ref: &'a (dyn Fn(&S) -> BaseRef + Sync),
}

impl<S> RecordCtx<'_, S> {
    pub fn membership<B: GroupBackend<BaseSpec = S>>(
        &self,
        backend: &B,
        spec: &S,
        expr: OscillatorExpr,
        element: &B::Elem,
        f: &Factorization<B::Elem>,
        claim: String,
    ) -> WitnessRecord {
        let base = (self.base_ref)(spec);
        WitnessRecord {
            claim,
            backend: self.tag.clone(),
            element: backend.format(element),
            factorization: f.factors.iter().map(|u| backend.factor_label(u)).collect(),
            signs: f.signs.clone(),
            factor_base: base.clone(),
            member_of: (f.signs == expr.sign_pattern()).then(|| SetRef::new(base, expr)),
            excluded_from: None,
            exact: true,
            factor_words: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub lower: u32,
    /// `None` when no upper bound was found within the budget.
    #[serde(with = "upper_bound")]
    pub upper: Option<u32>,
    pub lower_basis: String,
    pub upper_basis: String,
    pub max_stage: u32,
    pub budget: Value,
}

impl Estimate {
    pub fn is_exact(&self) -> bool {
        self.upper == Some(self.lower)
    }
}

mod upper_bound {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<u32>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(n) => s.serialize_u32(*n),
            None => s.serialize_str("unbounded_at_budget"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u32>, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) if s == "unbounded_at_budget" => Ok(None),
            Value::Number(n) => n
                .as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .map(Some)
                .ok_or_else(|| serde::de::Error::custom("bad upper bound")),
            other => Err(serde::de::Error::custom(format!("bad upper bound {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    /// Every tested element is excluded by an exact predicate.
    Exact,
    /// No survivor within the bound, and the stage below is exact.
    Lifted,
    /// No survivor within the bound.
    NoSurvivorAtBound,
    /// A nonidentity element lies in every tested basic set.
    Killed,
}

impl StageStatus {
    fn proven(self) -> bool {
        matches!(self, StageStatus::Exact | StageStatus::Lifted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: u32,
    pub status: StageStatus,
    pub tested: usize,
    pub exact_exclusions: usize,
    pub bounded_exclusions: usize,
    pub survivors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survivor: Option<String>,
}

/// Backend, basis and test elements shared by the `T₁`/`T₂` estimators.
pub struct SeparationInput<'a, B: GroupBackend> {
    pub backend: &'a B,
    pub basis: &'a [B::BaseSpec],
    pub tests: &'a [B::Elem],
    /// Per-factor budget for enumerations where no exact predicate exists.
    pub budget: Budget,
}

/// Outcome of one stage over all test elements.
pub struct StageSurvey<E> {
    pub expr: OscillatorExpr,
    pub tested: usize,
    pub exact_exclusions: usize,
    pub bounded_exclusions: usize,
    /// Test indices of survivors, in order.
    pub survivors: Vec<usize>,
    /// For the first survivor, one factorization per basic set.
    pub first_survivor: Option<(usize, Vec<Factorization<E>>)>,
}

enum Verdict1<E> {
    Member(Factorization<E>),
    Excluded { exact: bool },
}

enum Slot<E> {
    Done(Verdict1<E>),
    /// Needs the enumeration.
    Pending,
    /// Not needed once an exact exclusion is known.
    Skipped,
}

/// Decide every test element against every basic set at `expr`.
///
/// Exact decisions run in parallel; basic sets needing enumeration are then
/// enumerated once each and looked up.
pub fn stage_survey<B: GroupBackend>(
    inp: &SeparationInput<'_, B>,
    expr: OscillatorExpr,
) -> Result<StageSurvey<B::Elem>, OscillatorError> {
    let b = inp.backend;
    let targets: Vec<usize> = (0..inp.tests.len())
        .filter(|i| !b.is_identity(&inp.tests[*i]))
        .collect();
    let signs = expr.sign_pattern();
    let decided: Vec<Vec<Slot<B::Elem>>> = targets
        .par_iter()
        .map(|&i| {
            let g = &inp.tests[i];
            let mut row: Vec<Slot<B::Elem>> = (0..inp.basis.len()).map(|_| Slot::Skipped).collect();
            // later basic sets tend to be smaller, so exclusions show up sooner
            for (j, spec) in inp.basis.iter().enumerate().rev() {
                row[j] = match b.decide(spec, expr, g) {
                    Decision::NonMember => {
                        row = (0..inp.basis.len()).map(|_| Slot::Skipped).collect();
                        row[j] = Slot::Done(Verdict1::Excluded { exact: true });
                        return row;
                    }
                    Decision::NotFound => Slot::Done(Verdict1::Excluded { exact: false }),
                    Decision::Member(Some(factors)) => {
                        let f = Factorization {
                            factors,
                            signs: signs.clone(),
                        };
                        if f.verifies(b, g) {
                            Slot::Done(Verdict1::Member(f))
                        } else {
                            Slot::Pending
                        }
                    }
                    _ => Slot::Pending,
                };
            }
            row
        })
        .collect();
    let mut sets: Vec<Option<BoundedSet<B>>> = (0..inp.basis.len()).map(|_| None).collect();
    for (j, spec) in inp.basis.iter().enumerate() {
        if decided.iter().any(|row| matches!(row[j], Slot::Pending)) {
            sets[j] = Some(enumerate_oscillator(b, spec, expr, inp.budget)?);
        }
    }
    let mut survey = StageSurvey {
        expr,
        tested: targets.len(),
        exact_exclusions: 0,
        bounded_exclusions: 0,
        survivors: Vec::new(),
        first_survivor: None,
    };
    for (row, &i) in decided.into_iter().zip(&targets) {
        let g = &inp.tests[i];
        let mut factors = Vec::new();
        let mut exact_out = false;
        let mut bounded_out = false;
        for (j, slot) in row.into_iter().enumerate() {
            let v = match slot {
                Slot::Done(v) => v,
                Slot::Skipped => continue,
                Slot::Pending => {
                    let set = sets[j].as_ref().expect("enumerated above");
                    match set.witness(b, g) {
                        Some(f) => Verdict1::Member(f),
                        None => Verdict1::Excluded {
                            exact: set.base_complete,
                        },
                    }
                }
            };
            match v {
                Verdict1::Member(f) => factors.push(f),
                Verdict1::Excluded { exact: true } => exact_out = true,
                Verdict1::Excluded { exact: false } => bounded_out = true,
            }
        }
        if exact_out {
            survey.exact_exclusions += 1;
        } else if bounded_out {
            survey.bounded_exclusions += 1;
        } else {
            survey.survivors.push(i);
            if survey.first_survivor.is_none() {
                survey.first_survivor = Some((i, factors));
            }
        }
    }
    Ok(survey)
}

fn classify<E>(s: &StageSurvey<E>, below_exact: bool, stage: u32) -> StageStatus {
    if !s.survivors.is_empty() {
        StageStatus::Killed
    } else if s.bounded_exclusions == 0 {
        StageStatus::Exact
    } else if below_exact && stage % 2 == 1 && stage > 1 {
        StageStatus::Lifted
    } else {
        StageStatus::NoSurvivorAtBound
    }
}

fn report<B: GroupBackend>(
    inp: &SeparationInput<'_, B>,
    s: &StageSurvey<B::Elem>,
    stage: u32,
    status: StageStatus,
) -> StageReport {
    StageReport {
        stage,
        status,
        tested: s.tested,
        exact_exclusions: s.exact_exclusions,
        bounded_exclusions: s.bounded_exclusions,
        survivors: s.survivors.len(),
        survivor: s
            .first_survivor
            .as_ref()
            .map(|(i, _)| inp.backend.format(&inp.tests[*i])),
    }
}

pub struct SeparationRun {
    pub estimate: Estimate,
    pub stages: Vec<StageReport>,
    pub witnesses: Vec<WitnessRecord>,
    pub details: Value,
}

/// `T₁` estimate over stages `1..=max_stage`.
pub fn estimate_t1<B: GroupBackend>(
    inp: &SeparationInput<'_, B>,
    ctx: &RecordCtx<'_, B::BaseSpec>,
    max_stage: u32,
    budget: Value,
) -> Result<SeparationRun, OscillatorError> {
    let mut stages = Vec::new();
    let mut witnesses = Vec::new();
    let mut lower = 0;
    let mut upper = None;
    let mut lower_basis = "no exact stage".to_string();
    let mut upper_basis = format!("no survivor through stage {max_stage}");
    let mut contiguous = true;
    let mut prev_exact = false;
    for k in 1..=max_stage {
        let expr = OscillatorExpr::plus(k as usize);
        let s = stage_survey(inp, expr)?;
        let status = classify(&s, prev_exact, k);
        stages.push(report(inp, &s, k, status));
        prev_exact = status == StageStatus::Exact;
        if status == StageStatus::Killed {
            let (i, fs) = s.first_survivor.as_ref().expect("killed stage has a survivor");
            let g = &inp.tests[*i];
            for (spec, f) in inp.basis.iter().zip(fs) {
                witnesses.push(ctx.membership(
                    inp.backend,
                    spec,
                    expr,
                    g,
                    f,
                    format!("survivor at stage {k} in {}", inp.backend.describe_base(spec)),
                ));
            }
            upper = Some(k - 1);
            upper_basis = format!("{} lies in every tested {}", inp.backend.format(g), expr.notation());
            break;
        }
        if contiguous && status.proven() {
            lower = k;
            lower_basis = match status {
                StageStatus::Lifted => format!("stage {} exact, lifted to {k}", k - 1),
                _ => format!("stage {k} excluded exactly"),
            };
        } else {
            contiguous = false;
        }
    }
    if upper.is_none() && lower == max_stage {
        lower_basis = format!("all stages through {max_stage} exact or lifted");
    }
    Ok(SeparationRun {
        estimate: Estimate {
            lower,
            upper,
            lower_basis,
            upper_basis,
            max_stage,
            budget,
        },
        stages,
        witnesses,
        details: Value::Null,
    })
}

/// Split `g = b·c` from a stage-`2s` factorization into `a = c⁻¹` and `b`,
/// both in `(±U)^s`, with `g·a = b`.
pub fn translated_pair<E: Clone>(f: &Factorization<E>, s: usize) -> (Factorization<E>, Factorization<E>) {
    let b = Factorization {
        factors: f.factors[..s].to_vec(),
        signs: f.signs[..s].to_vec(),
    };
    let a = Factorization {
        factors: f.factors[s..].iter().rev().cloned().collect(),
        signs: f.signs[s..].iter().rev().map(|x| x.flip()).collect(),
    };
    (a, b)
}

/// `T₂` estimate over stages `1..=max_stage`; stage `s` is tested through
/// the disjointness of `g(±U)^s` and `(±U)^s`, i.e. stage `2s` of `T₁`.
pub fn estimate_t2<B: GroupBackend>(
    inp: &SeparationInput<'_, B>,
    ctx: &RecordCtx<'_, B::BaseSpec>,
    max_stage: u32,
    budget: Value,
) -> Result<SeparationRun, OscillatorError> {
    let mut stages = Vec::new();
    let mut witnesses = Vec::new();
    let mut pairs = Vec::new();
    let mut lower = 0;
    let mut upper = None;
    let mut lower_basis = "no exact stage".to_string();
    let mut upper_basis = format!("no overlapping translate through stage {max_stage}");
    let mut contiguous = true;
    for s in 1..=max_stage {
        let expr = OscillatorExpr::plus(2 * s as usize);
        let sv = stage_survey(inp, expr)?;
        let mut status = classify(&sv, false, 2 * s);
        if status == StageStatus::NoSurvivorAtBound {
            // the odd stage above is equivalent; accept it if exact there
            let odd = stage_survey(inp, OscillatorExpr::plus(2 * s as usize + 1))?;
            if odd.survivors.is_empty() && odd.bounded_exclusions == 0 {
                status = StageStatus::Exact;
            }
        }
        stages.push(report(inp, &sv, s, status));
        if status == StageStatus::Killed {
            let (i, fs) = sv.first_survivor.as_ref().expect("killed stage has a survivor");
            let g = &inp.tests[*i];
            let half = OscillatorExpr::plus(s as usize);
            for (spec, f) in inp.basis.iter().zip(fs) {
                let (a, b) = translated_pair(f, s as usize);
                let ea = a.evaluate(inp.backend);
                let eb = b.evaluate(inp.backend);
                let overlap = inp.backend.equal(&inp.backend.product(g, &ea), &eb);
                pairs.push(serde_json::json!({
                    "basic_set": inp.backend.describe_base(spec),
                    "a": inp.backend.format(&ea),
                    "b": inp.backend.format(&eb),
                    "g_times_a_equals_b": overlap,
                }));
                let desc = inp.backend.describe_base(spec);
                witnesses.push(ctx.membership(
                    inp.backend,
                    spec,
                    half,
                    &ea,
                    &a,
                    format!("a in {} over {desc}", half.notation()),
                ));
                witnesses.push(ctx.membership(
                    inp.backend,
                    spec,
                    half,
                    &eb,
                    &b,
                    format!("b = g a in {} over {desc}", half.notation()),
                ));
            }
            upper = Some(s - 1);
            upper_basis = format!(
                "g = {} gives g{} meeting {} in every tested basic set",
                inp.backend.format(g),
                half.notation(),
                half.notation()
            );
            break;
        }
        if contiguous && status.proven() {
            lower = s;
            lower_basis = format!("stage {} of T1 excluded exactly", 2 * s);
        } else {
            contiguous = false;
        }
    }
    Ok(SeparationRun {
        estimate: Estimate {
            lower,
            upper,
            lower_basis,
            upper_basis,
            max_stage,
            budget,
        },
        stages,
        witnesses,
        details: Value::Array(pairs),
    })
}

/// Whether `T₁ = 2T₂ + 1` is still possible; an error names the conflict.
pub fn consistency_check(t1: &Estimate, t2: &Estimate) -> Result<(), String> {
    let (l1, u1) = (t1.lower, t1.upper);
    let (l2, u2) = (t2.lower, t2.upper);
    let feasible = match (u1, u2) {
        (Some(u1), Some(u2)) => (l2..=u2).any(|t| (l1..=u1).contains(&(2 * t + 1))),
        (Some(u1), None) => 2 * l2 < u1,
        (None, Some(u2)) => 2 * u2 + 1 >= l1,
        (None, None) => true,
    };
    if feasible {
        Ok(())
    } else {
        Err(format!(
            "T1 in [{l1}, {}] and T2 in [{l2}, {}] violate T1 = 2 T2 + 1",
            u1.map_or("inf".into(), |u| u.to_string()),
            u2.map_or("inf".into(), |u| u.to_string()),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscLevel {
    pub n: usize,
    pub left_size: usize,
    pub exact_counterexamples: usize,
    pub bounded_counterexamples: usize,
    pub right_exact: bool,
    pub outcome: String,
}

pub struct OscRun {
    pub estimate: Estimate,
    pub levels: Vec<OscLevel>,
    pub witnesses: Vec<WitnessRecord>,
}

/// Smallest `n` with `(∓U)ⁿ ⊆ (±U)ⁿ`, for one base set.
pub fn estimate_osc<B: GroupBackend>(
    backend: &B,
    spec: &B::BaseSpec,
    ctx: &RecordCtx<'_, B::BaseSpec>,
    max_n: usize,
    budget: Budget,
) -> Result<OscRun, OscillatorError> {
    let mut lower = 1u32;
    let mut upper = None;
    let mut lower_basis = "osc is positive".to_string();
    let mut upper_basis = format!("no containment through n = {max_n}");
    let mut levels = Vec::new();
    let mut witnesses = Vec::new();
    let base = (ctx.base_ref)(spec);
    for n in 1..=max_n {
        let left = OscillatorExpr::minus(n);
        let right = OscillatorExpr::plus(n);
        let r = refute_inclusion(backend, (spec, left), (spec, right), budget, 1)?;
        let outcome;
        if let Some(w) = r.witness.as_ref().filter(|w| w.exact) {
            outcome = "refuted";
            lower = n as u32 + 1;
            lower_basis = format!(
                "{} lies in {} but not {}",
                backend.format(&w.element),
                left.notation(),
                right.notation()
            );
            let mut rec = ctx.membership(
                backend,
                spec,
                left,
                &w.element,
                &w.factorization,
                format!("{} not inside {}", left.notation(), right.notation()),
            );
            rec.excluded_from = Some(SetRef::new(base.clone(), right));
            witnesses.push(rec);
        } else if r.right_exact && r.exact_counterexamples == 0 && r.bounded_counterexamples == 0 {
            outcome = "contained";
            upper = Some(n as u32);
            upper_basis = format!(
                "all {} enumerated elements of {} pass the exact test for {}",
                r.left_size,
                left.notation(),
                right.notation()
            );
        } else {
            outcome = "inconclusive";
        }
        levels.push(OscLevel {
            n,
            left_size: r.left_size,
            exact_counterexamples: r.exact_counterexamples,
            bounded_counterexamples: r.bounded_counterexamples,
            right_exact: r.right_exact,
            outcome: outcome.into(),
        });
        if outcome != "refuted" {
            break;
        }
    }
    if upper.is_none() && lower as usize > max_n {
        lower_basis = format!("refuted at every n <= {max_n}");
    }
    Ok(OscRun {
        estimate: Estimate {
            lower,
            upper,
            lower_basis,
            upper_basis,
            max_stage: max_n as u32,
            budget: serde_json::json!({ "factor_len": budget.factor_len }),
        },
        levels,
        witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directsum::{CoordSet, NbhdConvention, TupleBackend, TupleElement};
    use crate::freegroup::{Alphabet, Sign};
    use crate::oscillator::{FreeBackend, FreeBase};
    use crate::verify::certificate::replay_witness;

    fn w(s: &str) -> crate::freegroup::Word {
        Alphabet::xy().parse_word(s).unwrap()
    }

    fn free_ctx(base: BaseRef) -> impl Fn(&FreeBase) -> BaseRef + Sync {
        move |_| base.clone()
    }

    #[test]
    fn upper_bound_serialization() {
        let e = Estimate {
            lower: 2,
            upper: None,
            lower_basis: "x".into(),
            upper_basis: "y".into(),
            max_stage: 4,
            budget: Value::Null,
        };
        let j = serde_json::to_value(&e).unwrap();
        assert_eq!(j["upper"], "unbounded_at_budget");
        assert_eq!(serde_json::from_value::<Estimate>(j).unwrap(), e);
        let e2 = Estimate { upper: Some(3), ..e };
        let j = serde_json::to_value(&e2).unwrap();
        assert_eq!(j["upper"], 3);
        assert_eq!(serde_json::from_value::<Estimate>(j).unwrap(), e2);
    }

    #[test]
    fn consistency_rule() {
        let est = |l, u| Estimate {
            lower: l,
            upper: u,
            lower_basis: String::new(),
            upper_basis: String::new(),
            max_stage: 6,
            budget: Value::Null,
        };
        assert!(consistency_check(&est(3, Some(3)), &est(1, Some(1))).is_ok());
        assert!(consistency_check(&est(5, Some(5)), &est(2, Some(2))).is_ok());
        assert!(consistency_check(&est(3, Some(3)), &est(2, Some(2))).is_err());
        assert!(consistency_check(&est(6, None), &est(3, None)).is_ok());
        assert!(consistency_check(&est(8, None), &est(2, Some(2))).is_err());
        assert!(consistency_check(&est(1, Some(2)), &est(0, Some(1))).is_ok());
    }

    #[test]
    fn subgroup_chain_is_t1_at_every_stage() {
        let b = TupleBackend::new(NbhdConvention::FromIndex, CoordSet::Group);
        let basis: Vec<u32> = (1..=4).collect();
        let tests: Vec<TupleElement> = vec![
            TupleElement::single(1, w("x")),
            TupleElement::single(2, w("x y'")),
            TupleElement::from_coords([(1, w("y")), (3, w("x'"))]),
        ];
        let inp = SeparationInput {
            backend: &b,
            basis: &basis,
            tests: &tests,
            budget: Budget::new(2),
        };
        let base_ref = |n: &u32| BaseRef::Nbhd { index: *n };
        let ctx = RecordCtx {
            tag: BackendTag::Tuple {
                convention: NbhdConvention::FromIndex,
                coord_set: CoordSet::Group,
            },
            base_ref: &base_ref,
        };
        let t1 = estimate_t1(&inp, &ctx, 5, Value::Null).unwrap();
        assert_eq!((t1.estimate.lower, t1.estimate.upper), (5, None));
        assert!(t1.stages.iter().all(|s| s.status == StageStatus::Exact));
        let t2 = estimate_t2(&inp, &ctx, 2, Value::Null).unwrap();
        assert_eq!((t2.estimate.lower, t2.estimate.upper), (2, None));
        assert!(consistency_check(&t1.estimate, &t2.estimate).is_ok());
    }

    #[test]
    fn single_subgroup_basis_is_killed_at_stage_one() {
        // Basis {<x>}: x itself survives every stage.
        let b = FreeBackend::xy();
        let basis = vec![FreeBase::CyclicSubgroup(w("x"))];
        let tests = vec![w("x x"), w("y")];
        let inp = SeparationInput {
            backend: &b,
            basis: &basis,
            tests: &tests,
            budget: Budget::new(2),
        };
        let base_ref = free_ctx(BaseRef::CyclicSubgroup { word: "x".into() });
        let ctx = RecordCtx {
            tag: BackendTag::Free {
                gens: vec!["x".into(), "y".into()],
            },
            base_ref: &base_ref,
        };
        let t1 = estimate_t1(&inp, &ctx, 3, Value::Null).unwrap();
        assert_eq!((t1.estimate.lower, t1.estimate.upper), (0, Some(0)));
        assert_eq!(t1.stages[0].survivor.as_deref(), Some("x x"));
        for rec in &t1.witnesses {
            assert_eq!(replay_witness(rec), Ok(()));
        }
    }

    #[test]
    fn enumeration_fallback_for_unknown_predicates() {
        // A finite base has no exact predicate; its enumeration is complete.
        let b = FreeBackend::xy();
        let basis = vec![FreeBase::Finite(vec![w("x")])];
        let tests = vec![w("x x'"), w("x"), w("y"), w("x x")];
        let inp = SeparationInput {
            backend: &b,
            basis: &basis,
            tests: &tests,
            budget: Budget::new(1),
        };
        let s = stage_survey(&inp, OscillatorExpr::plus(1)).unwrap();
        assert_eq!(s.tested, 3);
        assert_eq!(s.survivors, vec![1]);
        assert_eq!(s.exact_exclusions, 2);
        let s = stage_survey(&inp, OscillatorExpr::plus(2)).unwrap();
        assert_eq!(s.survivors, vec![1]);
    }

    #[test]
    fn translated_pair_overlaps() {
        let b = FreeBackend::xy();
        let f = Factorization {
            factors: vec![w("x"), w("y"), w("x"), w("x y")],
            signs: OscillatorExpr::plus(4).sign_pattern(),
        };
        let g = f.evaluate(&b);
        let (a, bb) = translated_pair(&f, 2);
        assert_eq!(a.signs, vec![Sign::Plus, Sign::Minus]);
        assert_eq!(b.product(&g, &a.evaluate(&b)), bb.evaluate(&b));
    }

    #[test]
    fn osc_of_subgroup_is_one_and_free_semigroup_is_unbounded() {
        let b = FreeBackend::xy();
        let sub = FreeBase::CyclicSubgroup(w("x y"));
        let base_ref = free_ctx(BaseRef::CyclicSubgroup { word: "x y".into() });
        let tag = BackendTag::Free {
            gens: vec!["x".into(), "y".into()],
        };
        let ctx = RecordCtx {
            tag: tag.clone(),
            base_ref: &base_ref,
        };
        let r = estimate_osc(&b, &sub, &ctx, 4, Budget::new(2)).unwrap();
        assert_eq!((r.estimate.lower, r.estimate.upper), (1, Some(1)));

        let s = b.free_semigroup();
        let base_ref = free_ctx(BaseRef::PositiveMonoid {
            gens: vec!["x".into(), "y".into()],
        });
        let ctx = RecordCtx {
            tag,
            base_ref: &base_ref,
        };
        let r = estimate_osc(&b, &s, &ctx, 5, Budget::new(1)).unwrap();
        assert_eq!((r.estimate.lower, r.estimate.upper), (6, None));
        assert_eq!(r.witnesses.len(), 5);
        for rec in &r.witnesses {
            assert_eq!(replay_witness(rec), Ok(()));
        }
    }
}
