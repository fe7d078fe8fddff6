//! Certificates and replayable witness records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::affine::{AffBackend, AffBase, AffMap};
use crate::directsum::{
    basic_nbhd_member, BasicNbhd, CoordSet, Ex0Backend, NbhdConvention, PsiImage, TupleBackend, TupleElement,
};
use crate::freegroup::{Alphabet, Sign};
use crate::oscillator::{Decision, FreeBackend, FreeBase, GroupBackend, OscillatorExpr};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Verified,
    RefutedWithWitness,
    InconclusiveAtBound,
}

/// Group a witness lives in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendTag {
    Free {
        gens: Vec<String>,
    },
    Aff,
    Tuple {
        convention: NbhdConvention,
        coord_set: CoordSet,
    },
    /// Factors are written as positive preimage tuples.
    Psi {
        p: u32,
    },
}

/// Base set a witness refers to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseRef {
    PositiveMonoid { gens: Vec<String> },
    CyclicSubgroup { word: String },
    Whole,
    Finite { words: Vec<String> },
    Semigroup,
    Nbhd { index: u32 },
    Inverse { of: Box<BaseRef> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetRef {
    pub base: BaseRef,
    pub n: usize,
    pub mirror: bool,
}

impl SetRef {
    pub fn new(base: BaseRef, expr: OscillatorExpr) -> SetRef {
        SetRef {
            base,
            n: expr.n(),
            mirror: expr.mirror(),
        }
    }

    pub fn expr(&self) -> Result<OscillatorExpr, String> {
        OscillatorExpr::new(self.n, self.mirror).map_err(|e| e.to_string())
    }
}

/// `element = f₁^{ε₁} ⋯ f_k^{ε_k}` with every `fᵢ` in `factor_base`;
/// optionally `element ∈ member_of` by sign pattern and `element ∉ excluded_from`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub claim: String,
    pub backend: BackendTag,
    pub element: String,
    pub factorization: Vec<String>,
    pub signs: Vec<Sign>,
    pub factor_base: BaseRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub member_of: Option<SetRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded_from: Option<SetRef>,
    /// Whether exclusion is decided exactly; bounded exclusions are not re-checked.
    pub exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_words: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub schema_version: u32,
    pub scenario: String,
    pub params: Value,
    pub budgets: Value,
    pub seed: u64,
    pub verdict: Verdict,
    pub expected: Verdict,
    pub witnesses: Vec<WitnessRecord>,
    pub details: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, u64>>,
    pub tool_version: String,
}

impl Certificate {
    /// 0 when the verdict matches the expectation, 2 when inconclusive, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.verdict == self.expected {
            0
        } else if self.verdict == Verdict::InconclusiveAtBound {
            2
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Certificate, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Re-verify every witness; returns the failures.
    pub fn replay(&self) -> Vec<(usize, String)> {
        self.witnesses
            .iter()
            .enumerate()
            .filter_map(|(i, w)| replay_witness(w).err().map(|e| (i, e)))
            .collect()
    }
}

/// Shared replay logic: product, factor membership, pattern, exclusion.
fn check<B: GroupBackend>(
    backend: &B,
    rec: &WitnessRecord,
    parse_elem: impl Fn(&str) -> Result<B::Elem, String>,
    parse_factor: impl Fn(&str) -> Result<B::Elem, String>,
    factor_in_base: impl Fn(&str, &BaseRef) -> Result<bool, String>,
    spec_of: impl Fn(&BaseRef) -> Result<B::BaseSpec, String>,
) -> Result<(), String> {
    if rec.factorization.len() != rec.signs.len() {
        return Err("factor and sign counts differ".into());
    }
    let element = parse_elem(&rec.element)?;
    let mut acc = backend.identity();
    for (f, s) in rec.factorization.iter().zip(&rec.signs) {
        if !factor_in_base(f, &rec.factor_base)? {
            return Err(format!("factor {f} is not in the base set"));
        }
        acc = backend.product(&acc, &backend.signed(&parse_factor(f)?, *s));
    }
    if !backend.equal(&acc, &element) {
        return Err(format!("product {} differs from {}", backend.format(&acc), rec.element));
    }
    if let Some(m) = &rec.member_of {
        if m.base != rec.factor_base {
            return Err("member_of base differs from factor base".into());
        }
        if m.expr()?.sign_pattern() != rec.signs {
            return Err("signs do not follow the oscillator pattern".into());
        }
    }
    if let (Some(x), true) = (&rec.excluded_from, rec.exact) {
        let (base, expr) = match &x.base {
            BaseRef::Inverse { of } => ((**of).clone(), x.expr()?.flipped()),
            b => (b.clone(), x.expr()?),
        };
        match backend.decide(&spec_of(&base)?, expr, &element) {
            Decision::NonMember => {}
            other => return Err(format!("exclusion does not hold exactly: {other:?}")),
        }
    }
    Ok(())
}

fn invert_ref<E>(
    f: &str,
    base: &BaseRef,
    direct: impl Fn(&str, &BaseRef) -> Result<bool, String>,
    inverse: impl Fn(&str) -> Result<E, String>,
    fmt: impl Fn(&E) -> String,
) -> Result<bool, String> {
    match base {
        BaseRef::Inverse { of } => direct(&fmt(&inverse(f)?), of),
        b => direct(f, b),
    }
}

fn free_spec(alphabet: &Alphabet, base: &BaseRef) -> Result<FreeBase, String> {
    let word = |s: &str| alphabet.parse_word(s).map_err(|e| e.to_string());
    Ok(match base {
        BaseRef::PositiveMonoid { gens } => FreeBase::PositiveMonoid(
            gens.iter()
                .map(|g| alphabet.gen(g).ok_or_else(|| format!("unknown generator {g}")))
                .collect::<Result<_, _>>()?,
        ),
        BaseRef::CyclicSubgroup { word: w } => FreeBase::CyclicSubgroup(word(w)?),
        BaseRef::Whole => FreeBase::Whole,
        BaseRef::Finite { words } => FreeBase::Finite(words.iter().map(|w| word(w)).collect::<Result<_, _>>()?),
        other => return Err(format!("base {other:?} is not a free-group base")),
    })
}

pub fn replay_witness(rec: &WitnessRecord) -> Result<(), String> {
    match &rec.backend {
        BackendTag::Free { gens } => {
            let alphabet = Alphabet::new(gens).map_err(|e| e.to_string())?;
            let b = FreeBackend::new(alphabet.clone());
            let parse = |s: &str| alphabet.parse_word(s).map_err(|e| e.to_string());
            let direct = |f: &str, base: &BaseRef| -> Result<bool, String> {
                let w = parse(f)?;
                let spec = free_spec(&alphabet, base)?;
                Ok(match &spec {
                    FreeBase::Finite(ws) => w.is_identity() || ws.contains(&w),
                    _ => matches!(b.decide(&spec, OscillatorExpr::plus(1), &w), Decision::Member(_)),
                })
            };
            check(
                &b,
                rec,
                parse,
                parse,
                |f, base| {
                    invert_ref(
                        f,
                        base,
                        direct,
                        |s| parse(s).map(|w| w.invert()),
                        |w| alphabet.format(w),
                    )
                },
                |base| free_spec(&alphabet, base),
            )
        }
        BackendTag::Aff => {
            let parse = |s: &str| s.parse::<AffMap>().map_err(|e| e.to_string());
            let direct = |f: &str, base: &BaseRef| -> Result<bool, String> {
                match base {
                    BaseRef::Semigroup => Ok(crate::affine::semigroup_member(&parse(f)?)),
                    other => Err(format!("base {other:?} is not an affine base")),
                }
            };
            check(
                &AffBackend,
                rec,
                parse,
                parse,
                |f, base| {
                    invert_ref(
                        f,
                        base,
                        direct,
                        |s| parse(s).map(|m| crate::affine::invert_map(&m)),
                        |m| m.to_string(),
                    )
                },
                |base| match base {
                    BaseRef::Semigroup => Ok(AffBase::Semigroup),
                    other => Err(format!("base {other:?} is not an affine base")),
                },
            )
        }
        BackendTag::Tuple { convention, coord_set } => {
            let b = TupleBackend::new(*convention, *coord_set);
            let parse = |s: &str| TupleElement::parse(s).map_err(|e| e.to_string());
            let direct = |f: &str, base: &BaseRef| -> Result<bool, String> {
                match base {
                    BaseRef::Nbhd { index } => Ok(basic_nbhd_member(
                        &BasicNbhd::new(*index, *convention, *coord_set),
                        &parse(f)?,
                    )),
                    other => Err(format!("base {other:?} is not a neighborhood")),
                }
            };
            check(
                &b,
                rec,
                parse,
                parse,
                |f, base| invert_ref(f, base, direct, |s| parse(s).map(|t| t.inverse()), |t| t.literal()),
                |base| match base {
                    BaseRef::Nbhd { index } => Ok(*index),
                    other => Err(format!("base {other:?} is not a neighborhood")),
                },
            )
        }
        BackendTag::Psi { p } => {
            let b = Ex0Backend::new(*p).map_err(|e| e.to_string())?;
            let parse_tuple = |s: &str| TupleElement::parse(s).map_err(|e| e.to_string());
            let direct = |f: &str, base: &BaseRef| -> Result<bool, String> {
                match base {
                    BaseRef::Nbhd { index } => Ok(basic_nbhd_member(
                        &BasicNbhd::new(*index, NbhdConvention::FromIndex, CoordSet::Semigroup),
                        &parse_tuple(f)?,
                    )),
                    other => Err(format!("base {other:?} is not a neighborhood")),
                }
            };
            check(
                &b,
                rec,
                |s| PsiImage::parse(s).map_err(|e| e.to_string()),
                |s| parse_tuple(s).map(|t| b.psi(&t)),
                |f, base| {
                    invert_ref(
                        f,
                        base,
                        direct,
                        |s| parse_tuple(s).map(|t| t.inverse()),
                        |t| t.literal(),
                    )
                },
                |base| match base {
                    BaseRef::Nbhd { index } => Ok(*index),
                    other => Err(format!("base {other:?} is not a neighborhood")),
                },
            )
        }
    }
}
