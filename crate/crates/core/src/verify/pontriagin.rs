//! Bounded check of the five Pontriagin conditions for a finite basis.
//!
//! Universal quantifiers range over enumerated base sets and a test ball;
//! existential ones over the basis itself.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::certificate::{SetRef, Verdict, WitnessRecord};
use super::estimate::RecordCtx;
use crate::freegroup::Sign;
use crate::oscillator::{base_with_identity, Budget, GroupBackend, OscillatorError, OscillatorExpr};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub verdict: Verdict,
    /// Membership tests performed.
    pub checked: usize,
    pub detail: String,
    /// Counterexamples for the failing instance, one per candidate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub counterexamples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PontriaginReport {
    pub basis: Vec<String>,
    pub budget: usize,
    pub test_ball: usize,
    pub conditions: Vec<ConditionReport>,
    #[serde(skip)]
    pub witnesses: Vec<WitnessRecord>,
}

impl PontriaginReport {
    pub fn verdict(&self, cond: &str) -> Option<Verdict> {
        self.conditions.iter().find(|c| c.condition == cond).map(|c| c.verdict)
    }
}

/// Result of testing one candidate `V`: `Ok(checks)` when every tested
/// element lands in `U`, `Err((checks, bad, exact))` on the first miss.
type Trial<E> = Result<usize, (usize, Vec<E>, bool)>;

/// Each case is an image together with a thunk for its factors, which are
/// only materialized on a miss.
fn trial<B: GroupBackend, F: FnOnce() -> Vec<B::Elem>>(
    b: &B,
    u: &B::BaseSpec,
    cases: impl Iterator<Item = (B::Elem, F)>,
) -> Trial<B::Elem> {
    let mut n = 0;
    let mut unknown = false;
    for (img, parts) in cases {
        n += 1;
        match b.base_member(u, &img) {
            Some(true) => {}
            Some(false) => return Err((n, parts(), true)),
            None => unknown = true,
        }
    }
    if unknown {
        Err((n, Vec::new(), false))
    } else {
        Ok(n)
    }
}

enum Found<E> {
    Passed,
    Failed { per_candidate: Vec<Vec<E>>, exact: bool },
}

/// One instance of an `∃V` condition: the first passing candidate wins.
fn search<B: GroupBackend>(
    basis: &[B::BaseSpec],
    mut run: impl FnMut(&B::BaseSpec) -> Trial<B::Elem>,
    checked: &mut usize,
) -> Found<B::Elem> {
    let mut per = Vec::new();
    let mut exact = true;
    for v in basis {
        match run(v) {
            Ok(n) => {
                *checked += n;
                return Found::Passed;
            }
            Err((n, bad, ex)) => {
                *checked += n;
                exact &= ex;
                per.push(bad);
            }
        }
    }
    Found::Failed {
        per_candidate: per,
        exact,
    }
}

struct Outcome<E> {
    checked: usize,
    instances: usize,
    failure: Option<(String, Vec<Vec<E>>, bool)>,
    unknown: bool,
}

fn conclude<B: GroupBackend>(b: &B, name: &str, what: &str, o: Outcome<B::Elem>) -> ConditionReport {
    let (verdict, detail, counterexamples) = match o.failure {
        Some((inst, per, true)) => (
            Verdict::RefutedWithWitness,
            format!("no basic set works for {inst}"),
            per.iter()
                .map(|parts| parts.iter().map(|p| b.format(p)).collect::<Vec<_>>().join(" | "))
                .collect(),
        ),
        Some((inst, _, false)) => (
            Verdict::InconclusiveAtBound,
            format!("undecided for {inst}"),
            Vec::new(),
        ),
        None if o.unknown => (
            Verdict::InconclusiveAtBound,
            "membership not decidable".into(),
            Vec::new(),
        ),
        None => (
            Verdict::Verified,
            format!("{what} holds in all {} instances", o.instances),
            Vec::new(),
        ),
    };
    ConditionReport {
        condition: name.into(),
        verdict,
        checked: o.checked,
        detail,
        counterexamples,
    }
}

/// Check (P1)–(P5) for `basis`. Base sets are enumerated at `budget`;
/// (P4) conjugates by every element of `test_ball`.
pub fn pontriagin_check<B: GroupBackend>(
    b: &B,
    basis: &[B::BaseSpec],
    budget: Budget,
    test_ball: &[B::Elem],
    ctx: &RecordCtx<'_, B::BaseSpec>,
) -> Result<PontriaginReport, OscillatorError> {
    let sets: Vec<Vec<B::Elem>> = basis
        .iter()
        .map(|s| base_with_identity(b, s, budget.factor_len).map(|e| e.elements.into_iter().map(|x| x.elem).collect()))
        .collect::<Result<_, _>>()?;
    let idx = |v: &B::BaseSpec| {
        basis
            .iter()
            .position(|s| std::ptr::eq(s, v))
            .expect("candidate from basis")
    };
    let desc = |s: &B::BaseSpec| b.describe_base(s);
    let mut witnesses = Vec::new();
    let mut conditions = Vec::new();

    // (P1) W ⊂ U ∩ V
    let mut o = Outcome {
        checked: 0,
        instances: 0,
        failure: None,
        unknown: false,
    };
    'p1: for (i, u) in basis.iter().enumerate() {
        for v in &basis[i..] {
            o.instances += 1;
            let r = search::<B>(
                basis,
                |w| {
                    let t1 = trial(b, u, sets[idx(w)].iter().map(|x| (x.clone(), || vec![x.clone()])));
                    let t2 = trial(b, v, sets[idx(w)].iter().map(|x| (x.clone(), || vec![x.clone()])));
                    match (t1, t2) {
                        (Ok(a), Ok(c)) => Ok(a + c),
                        (Err(e), _) | (_, Err(e)) => Err(e),
                    }
                },
                &mut o.checked,
            );
            if let Found::Failed { per_candidate, exact } = r {
                o.failure = Some((format!("{} and {}", desc(u), desc(v)), per_candidate, exact));
                break 'p1;
            }
        }
    }
    conditions.push(conclude(b, "P1", "W inside U and V", o));

    // (P2) V·V ⊂ U
    let mut o = Outcome {
        checked: 0,
        instances: 0,
        failure: None,
        unknown: false,
    };
    for u in basis {
        o.instances += 1;
        let r = search::<B>(
            basis,
            |v| {
                let s = &sets[idx(v)];
                trial(
                    b,
                    u,
                    s.iter().flat_map(|p| {
                        s.iter()
                            .map(move |q| (b.product(p, q), move || vec![p.clone(), q.clone()]))
                    }),
                )
            },
            &mut o.checked,
        );
        if let Found::Failed { per_candidate, exact } = r {
            if exact {
                for (v, parts) in basis.iter().zip(&per_candidate) {
                    let base = (ctx.base_ref)(v);
                    let prod = b.product(&parts[0], &parts[1]);
                    witnesses.push(WitnessRecord {
                        claim: format!("V V not inside {} for V = {}", desc(u), desc(v)),
                        backend: ctx.tag.clone(),
                        element: b.format(&prod),
                        factorization: parts.iter().map(|p| b.factor_label(p)).collect(),
                        signs: vec![Sign::Plus, Sign::Plus],
                        factor_base: base,
                        member_of: None,
                        excluded_from: Some(SetRef::new((ctx.base_ref)(u), OscillatorExpr::plus(1))),
                        exact: true,
                        factor_words: None,
                    });
                }
            }
            o.failure = Some((desc(u), per_candidate, exact));
            break;
        }
    }
    conditions.push(conclude(b, "P2", "V V inside U", o));

    // (P3) x ∈ U ⇒ xV ⊂ U
    let mut o = Outcome {
        checked: 0,
        instances: 0,
        failure: None,
        unknown: false,
    };
    'p3: for (i, u) in basis.iter().enumerate() {
        let results: Vec<(usize, Found<B::Elem>)> = sets[i]
            .par_iter()
            .map(|x| {
                let mut n = 0;
                let r = search::<B>(
                    basis,
                    |v| {
                        trial(
                            b,
                            u,
                            sets[idx(v)]
                                .iter()
                                .map(|y| (b.product(x, y), || vec![x.clone(), y.clone()])),
                        )
                    },
                    &mut n,
                );
                (n, r)
            })
            .collect();
        for (x, (n, r)) in sets[i].iter().zip(results) {
            o.instances += 1;
            o.checked += n;
            if let Found::Failed { per_candidate, exact } = r {
                o.failure = Some((format!("{} and x = {}", desc(u), b.format(x)), per_candidate, exact));
                break 'p3;
            }
        }
    }
    conditions.push(conclude(b, "P3", "x V inside U", o));

    // (P4) x⁻¹Vx ⊂ U for every x in the test ball
    let mut o = Outcome {
        checked: 0,
        instances: 0,
        failure: None,
        unknown: false,
    };
    'p4: for u in basis {
        let results: Vec<(usize, Found<B::Elem>)> = test_ball
            .par_iter()
            .map(|x| {
                let xi = b.inverse(x);
                let mut n = 0;
                let r = search::<B>(
                    basis,
                    |v| {
                        trial(
                            b,
                            u,
                            sets[idx(v)]
                                .iter()
                                .map(|y| (b.product(&b.product(&xi, y), x), || vec![x.clone(), y.clone()])),
                        )
                    },
                    &mut n,
                );
                (n, r)
            })
            .collect();
        for (x, (n, r)) in test_ball.iter().zip(results) {
            o.instances += 1;
            o.checked += n;
            if let Found::Failed { per_candidate, exact } = r {
                o.failure = Some((format!("{} and x = {}", desc(u), b.format(x)), per_candidate, exact));
                break 'p4;
            }
        }
    }
    conditions.push(conclude(b, "P4", "x^-1 V x inside U", o));

    // (P5) V⁻¹ ⊂ U
    let mut o = Outcome {
        checked: 0,
        instances: 0,
        failure: None,
        unknown: false,
    };
    for u in basis {
        o.instances += 1;
        let r = search::<B>(
            basis,
            |v| trial(b, u, sets[idx(v)].iter().map(|y| (b.inverse(y), || vec![y.clone()]))),
            &mut o.checked,
        );
        if let Found::Failed { per_candidate, exact } = r {
            if exact {
                for (v, parts) in basis.iter().zip(&per_candidate) {
                    let base = (ctx.base_ref)(v);
                    witnesses.push(WitnessRecord {
                        claim: format!("V^-1 not inside {} for V = {}", desc(u), desc(v)),
                        backend: ctx.tag.clone(),
                        element: b.format(&b.inverse(&parts[0])),
                        factorization: vec![b.factor_label(&parts[0])],
                        signs: vec![Sign::Minus],
                        factor_base: base.clone(),
                        member_of: Some(SetRef::new(base, OscillatorExpr::minus(1))),
                        excluded_from: Some(SetRef::new((ctx.base_ref)(u), OscillatorExpr::plus(1))),
                        exact: true,
                        factor_words: None,
                    });
                }
            }
            // (P5) counterexamples are inverses
            let per_candidate = per_candidate
                .into_iter()
                .map(|parts| parts.iter().map(|p| b.inverse(p)).collect())
                .collect();
            o.failure = Some((desc(u), per_candidate, exact));
            break;
        }
    }
    conditions.push(conclude(b, "P5", "V^-1 inside U", o));

    Ok(PontriaginReport {
        basis: basis.iter().map(desc).collect(),
        budget: budget.factor_len,
        test_ball: test_ball.len(),
        conditions,
        witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directsum::{CoordSet, NbhdConvention, TupleBackend, TupleElement};
    use crate::freegroup::{reduced_ball, Alphabet};
    use crate::oscillator::{FreeBackend, FreeBase};
    use crate::verify::certificate::{replay_witness, BackendTag, BaseRef};

    fn tuple_ball(coords: u32, len: usize) -> Vec<TupleElement> {
        let words = reduced_ball(2, len);
        let mut out = vec![TupleElement::identity()];
        for c in 1..=coords {
            let mut next = Vec::new();
            for t in &out {
                for w in &words {
                    let used: usize = t.coords().values().map(|x| x.len()).sum();
                    if used + w.len() <= len {
                        next.push(t.product(&TupleElement::single(c, w.clone())));
                    }
                }
            }
            out = next;
        }
        out.sort();
        out.dedup();
        out
    }

    fn tuple_ctx(base_ref: &(dyn Fn(&u32) -> BaseRef + Sync), c: CoordSet) -> RecordCtx<'_, u32> {
        RecordCtx {
            tag: BackendTag::Tuple {
                convention: NbhdConvention::FromIndex,
                coord_set: c,
            },
            base_ref,
        }
    }

    #[test]
    fn subgroup_chain_passes_all_five() {
        let b = TupleBackend::new(NbhdConvention::FromIndex, CoordSet::Group);
        let basis: Vec<u32> = (1..=4).collect();
        let base_ref = |n: &u32| BaseRef::Nbhd { index: *n };
        let r = pontriagin_check(
            &b,
            &basis,
            Budget::new(2),
            &tuple_ball(3, 2),
            &tuple_ctx(&base_ref, CoordSet::Group),
        )
        .unwrap();
        for c in &r.conditions {
            assert_eq!(c.verdict, Verdict::Verified, "{c:?}");
        }
    }

    #[test]
    fn semigroup_sum_basis_passes_first_four() {
        let b = TupleBackend::new(NbhdConvention::FromIndex, CoordSet::Semigroup);
        let basis: Vec<u32> = (1..=4).collect();
        let base_ref = |n: &u32| BaseRef::Nbhd { index: *n };
        let r = pontriagin_check(
            &b,
            &basis,
            Budget::new(3),
            &tuple_ball(3, 2),
            &tuple_ctx(&base_ref, CoordSet::Semigroup),
        )
        .unwrap();
        for p in ["P1", "P2", "P3", "P4"] {
            assert_eq!(r.verdict(p), Some(Verdict::Verified), "{p}");
        }
        assert_eq!(r.verdict("P5"), Some(Verdict::RefutedWithWitness));
        assert_eq!(r.witnesses.len(), 4);
        for w in &r.witnesses {
            assert_eq!(replay_witness(w), Ok(()));
        }
    }

    #[test]
    fn free_semigroup_fails_p5_with_inverse_generator() {
        let b = FreeBackend::xy();
        let basis = vec![b.free_semigroup()];
        let gens = vec!["x".to_string(), "y".to_string()];
        let base_ref = move |_: &FreeBase| BaseRef::PositiveMonoid { gens: gens.clone() };
        let ctx = RecordCtx {
            tag: BackendTag::Free {
                gens: vec!["x".into(), "y".into()],
            },
            base_ref: &base_ref,
        };
        let r = pontriagin_check(&b, &basis, Budget::new(3), &reduced_ball(2, 1), &ctx).unwrap();
        assert_eq!(r.verdict("P5"), Some(Verdict::RefutedWithWitness));
        assert_eq!(r.verdict("P2"), Some(Verdict::Verified));
        assert_eq!(r.verdict("P4"), Some(Verdict::RefutedWithWitness));
        let p5 = r.conditions.iter().find(|c| c.condition == "P5").unwrap();
        assert_eq!(p5.counterexamples, vec!["x'".to_string()]);
        assert_eq!(r.witnesses.len(), 1);
        assert_eq!(r.witnesses[0].element, "x'");
        assert_eq!(replay_witness(&r.witnesses[0]), Ok(()));
    }

    #[test]
    fn finite_bases_are_inconclusive() {
        let b = FreeBackend::xy();
        let basis = vec![FreeBase::Finite(vec![Alphabet::xy().parse_word("x").unwrap()])];
        let base_ref = |_: &FreeBase| BaseRef::Whole;
        let ctx = RecordCtx {
            tag: BackendTag::Free {
                gens: vec!["x".into(), "y".into()],
            },
            base_ref: &base_ref,
        };
        let r = pontriagin_check(&b, &basis, Budget::new(1), &[], &ctx).unwrap();
        assert_eq!(r.verdict("P5"), Some(Verdict::InconclusiveAtBound));
    }
}
