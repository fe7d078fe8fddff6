//! Oscillator sets `(±U)ⁿ = U U⁻¹ U ⋯` and their mirrors `(∓U)ⁿ = U⁻¹ U ⋯`
//! over pluggable group backends.
//!
//! Infinite base sets are enumerated within a per-factor budget, so every
//! [`BoundedSet`] is an under-approximation unless the base enumeration was
//! complete. Exact answers come only from a backend's [`GroupBackend::decide`].

use std::fmt::Debug;
use std::hash::Hash;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::freegroup::{positive_ball, reduced_ball, Alphabet, Gen, Sign, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OscillatorError {
    #[error("oscillator length must be at least 1")]
    ZeroLength,
    #[error("enumeration exceeded the cap of {cap} elements")]
    SizeCap { cap: usize },
    #[error("invalid base set: {0}")]
    BadBase(String),
}

/// Selects `(±·)ⁿ` (`mirror = false`) or `(∓·)ⁿ` (`mirror = true`).
///
/// `n = 0` is not representable; both zero-length products are `{e}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct OscillatorExpr {
    n: usize,
    mirror: bool,
}

impl OscillatorExpr {
    pub fn new(n: usize, mirror: bool) -> Result<OscillatorExpr, OscillatorError> {
        if n == 0 {
            return Err(OscillatorError::ZeroLength);
        }
        Ok(OscillatorExpr { n, mirror })
    }

    pub fn plus(n: usize) -> OscillatorExpr {
        OscillatorExpr::new(n, false).expect("n >= 1")
    }

    pub fn minus(n: usize) -> OscillatorExpr {
        OscillatorExpr::new(n, true).expect("n >= 1")
    }

    pub fn n(self) -> usize {
        self.n
    }

    pub fn mirror(self) -> bool {
        self.mirror
    }

    pub fn flipped(self) -> OscillatorExpr {
        OscillatorExpr {
            n: self.n,
            mirror: !self.mirror,
        }
    }

    /// The expression whose set is the elementwise inverse of this one.
    pub fn inverse(self) -> OscillatorExpr {
        if self.n.is_multiple_of(2) {
            self
        } else {
            self.flipped()
        }
    }

    pub fn sign_pattern(self) -> Vec<Sign> {
        sign_pattern(self)
    }

    pub fn notation(self) -> String {
        format!("({}U)^{}", if self.mirror { "∓" } else { "±" }, self.n)
    }
}

pub fn sign_pattern(expr: OscillatorExpr) -> Vec<Sign> {
    let first = if expr.mirror { Sign::Minus } else { Sign::Plus };
    (0..expr.n)
        .map(|i| if i % 2 == 0 { first } else { first.flip() })
        .collect()
}

/// Per-factor enumeration budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Budget {
    pub factor_len: usize,
    pub max_elements: usize,
}

impl Budget {
    pub const DEFAULT_CAP: usize = 4_000_000;

    pub fn new(factor_len: usize) -> Budget {
        Budget {
            factor_len,
            max_elements: Budget::DEFAULT_CAP,
        }
    }

    pub fn with_cap(self, max_elements: usize) -> Budget {
        Budget { max_elements, ..self }
    }

    pub fn grow(self, by: usize) -> Budget {
        Budget {
            factor_len: self.factor_len + by,
            ..self
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaseElement<E> {
    pub elem: E,
    pub label: String,
    /// Word length of `label` (or whatever size the backend budgets on).
    pub weight: usize,
}

#[derive(Debug, Clone)]
pub struct BaseEnumeration<E> {
    pub elements: Vec<BaseElement<E>>,
    /// True when the base set is finite and fully listed.
    pub complete: bool,
}

/// Exact answer from a backend, with a factorization when one is at hand.
#[derive(Debug, Clone, PartialEq)]
pub enum Decision<E> {
    Member(Option<Vec<E>>),
    NonMember,
    /// The backend searched within its own bounds and found nothing.
    NotFound,
    Unknown,
}

pub trait GroupBackend: Sync {
    type Elem: Clone + Eq + Hash + Debug + Send + Sync;
    type Key: Clone + Eq + Hash + Debug + Send + Sync;
    type BaseSpec: Clone + Debug + Send + Sync;

    fn name(&self) -> String;
    fn identity(&self) -> Self::Elem;
    fn product(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn inverse(&self, a: &Self::Elem) -> Self::Elem;
    fn canonical_key(&self, a: &Self::Elem) -> Self::Key;
    fn format(&self, a: &Self::Elem) -> String;
    fn describe_base(&self, spec: &Self::BaseSpec) -> String;

    /// Base-set elements within the per-factor budget, identity first.
    fn enumerate_base(
        &self,
        spec: &Self::BaseSpec,
        factor_len: usize,
    ) -> Result<BaseEnumeration<Self::Elem>, OscillatorError>;

    /// Exact membership of `a` in the oscillator `expr` over `spec`, where known.
    fn decide(&self, _spec: &Self::BaseSpec, _expr: OscillatorExpr, _a: &Self::Elem) -> Decision<Self::Elem> {
        Decision::Unknown
    }

    /// Exact membership in the base set itself, `None` when unknown.
    fn base_member(&self, spec: &Self::BaseSpec, a: &Self::Elem) -> Option<bool> {
        match self.decide(spec, OscillatorExpr::plus(1), a) {
            Decision::Member(_) => Some(true),
            Decision::NonMember => Some(false),
            _ => None,
        }
    }

    fn equal(&self, a: &Self::Elem, b: &Self::Elem) -> bool {
        self.canonical_key(a) == self.canonical_key(b)
    }

    /// How a base-set factor is written in certificates.
    fn factor_label(&self, a: &Self::Elem) -> String {
        self.format(a)
    }

    fn is_identity(&self, a: &Self::Elem) -> bool {
        self.equal(a, &self.identity())
    }

    fn signed(&self, a: &Self::Elem, s: Sign) -> Self::Elem {
        match s {
            Sign::Plus => a.clone(),
            Sign::Minus => self.inverse(a),
        }
    }
}

/// `u₁^{ε₁} ⋯ uₙ^{εₙ}` with the `uᵢ` drawn from a base set.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization<E> {
    pub factors: Vec<E>,
    pub signs: Vec<Sign>,
}

impl<E: Clone> Factorization<E> {
    pub fn evaluate<B: GroupBackend<Elem = E>>(&self, backend: &B) -> E {
        self.factors
            .iter()
            .zip(&self.signs)
            .fold(backend.identity(), |acc, (f, s)| {
                backend.product(&acc, &backend.signed(f, *s))
            })
    }

    pub fn verifies<B: GroupBackend<Elem = E>>(&self, backend: &B, target: &E) -> bool {
        backend.equal(&self.evaluate(backend), target)
    }
}

#[derive(Debug, Clone)]
pub struct Entry<E> {
    pub elem: E,
    /// Indices into the base enumeration.
    pub factors: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Semantics {
    UnderApproximation,
    Exact,
}

/// Enumerated oscillator set with a witness factorization per element.
#[derive(Debug, Clone)]
pub struct BoundedSet<B: GroupBackend> {
    pub expr: OscillatorExpr,
    pub budget: Budget,
    pub base: Vec<BaseElement<B::Elem>>,
    pub base_complete: bool,
    pub entries: IndexMap<B::Key, Entry<B::Elem>>,
}

impl<B: GroupBackend> BoundedSet<B> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn semantics(&self) -> Semantics {
        if self.base_complete {
            Semantics::Exact
        } else {
            Semantics::UnderApproximation
        }
    }

    pub fn contains_key(&self, key: &B::Key) -> bool {
        self.entries.contains_key(key)
    }

    pub fn contains(&self, backend: &B, a: &B::Elem) -> bool {
        self.entries.contains_key(&backend.canonical_key(a))
    }

    pub fn elements(&self) -> impl Iterator<Item = &B::Elem> {
        self.entries.values().map(|e| &e.elem)
    }

    pub fn factorization_of(&self, entry: &Entry<B::Elem>) -> Factorization<B::Elem> {
        Factorization {
            factors: entry
                .factors
                .iter()
                .map(|&i| self.base[i as usize].elem.clone())
                .collect(),
            signs: self.expr.sign_pattern(),
        }
    }

    pub fn witness(&self, backend: &B, a: &B::Elem) -> Option<Factorization<B::Elem>> {
        self.entries
            .get(&backend.canonical_key(a))
            .map(|e| self.factorization_of(e))
    }

    /// Total base weight of an element's factors.
    pub fn weight(&self, entry: &Entry<B::Elem>) -> usize {
        entry.factors.iter().map(|&i| self.base[i as usize].weight).sum()
    }

    pub fn factor_labels(&self, entry: &Entry<B::Elem>) -> Vec<String> {
        entry
            .factors
            .iter()
            .map(|&i| self.base[i as usize].label.clone())
            .collect()
    }
}

const CHUNK: usize = 512;

/// Right-multiply every element of `prev` by every `u^{sign}`, deduplicating
/// in a schedule-independent order.
fn extend_level<B: GroupBackend>(
    backend: &B,
    prev: &IndexMap<B::Key, Entry<B::Elem>>,
    base: &[BaseElement<B::Elem>],
    sign: Sign,
    cap: usize,
) -> Result<IndexMap<B::Key, Entry<B::Elem>>, OscillatorError> {
    let signed: Vec<B::Elem> = base.iter().map(|b| backend.signed(&b.elem, sign)).collect();
    let prev_entries: Vec<&Entry<B::Elem>> = prev.values().collect();
    let chunks: Vec<IndexMap<B::Key, Entry<B::Elem>>> = prev_entries
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut local: IndexMap<B::Key, Entry<B::Elem>> = IndexMap::new();
            for e in chunk {
                for (i, u) in signed.iter().enumerate() {
                    let p = backend.product(&e.elem, u);
                    let k = backend.canonical_key(&p);
                    local.entry(k).or_insert_with(|| {
                        let mut f = e.factors.clone();
                        f.push(i as u32);
                        Entry { elem: p, factors: f }
                    });
                }
            }
            local
        })
        .collect();
    let mut out: IndexMap<B::Key, Entry<B::Elem>> = IndexMap::new();
    for chunk in chunks {
        for (k, v) in chunk {
            out.entry(k).or_insert(v);
            if out.len() > cap {
                return Err(OscillatorError::SizeCap { cap });
            }
        }
    }
    Ok(out)
}

fn identity_level<B: GroupBackend>(backend: &B) -> IndexMap<B::Key, Entry<B::Elem>> {
    let e = backend.identity();
    let mut m = IndexMap::new();
    m.insert(
        backend.canonical_key(&e),
        Entry {
            elem: e,
            factors: Vec::new(),
        },
    );
    m
}

/// Base enumeration with the identity adjoined in front.
pub fn base_with_identity<B: GroupBackend>(
    backend: &B,
    spec: &B::BaseSpec,
    factor_len: usize,
) -> Result<BaseEnumeration<B::Elem>, OscillatorError> {
    let mut base = backend.enumerate_base(spec, factor_len)?;
    let ide = backend.identity();
    let has_identity = base.elements.first().is_some_and(|b| backend.equal(&b.elem, &ide));
    if !has_identity {
        base.elements.retain(|b| !backend.equal(&b.elem, &ide));
        base.elements.insert(
            0,
            BaseElement {
                elem: ide,
                label: "e".into(),
                weight: 0,
            },
        );
    }
    Ok(base)
}

/// All products `u₁^{ε₁}⋯uₙ^{εₙ}` with each `uᵢ` in the base enumeration.
pub fn enumerate_oscillator<B: GroupBackend>(
    backend: &B,
    spec: &B::BaseSpec,
    expr: OscillatorExpr,
    budget: Budget,
) -> Result<BoundedSet<B>, OscillatorError> {
    let base = base_with_identity(backend, spec, budget.factor_len)?;
    let mut level = identity_level(backend);
    for sign in expr.sign_pattern() {
        level = extend_level(backend, &level, &base.elements, sign, budget.max_elements)?;
    }
    Ok(BoundedSet {
        expr,
        budget,
        base: base.elements,
        base_complete: base.complete,
        entries: level,
    })
}

/// `U^{ε} · S` for an already enumerated `S`, the other side of the
/// recursion `(±U)ⁿ⁺¹ = U(∓U)ⁿ`.
pub fn left_multiply_base<B: GroupBackend>(
    backend: &B,
    spec: &B::BaseSpec,
    sign: Sign,
    set: &BoundedSet<B>,
) -> Result<Vec<B::Key>, OscillatorError> {
    let base = base_with_identity(backend, spec, set.budget.factor_len)?;
    let mut out: IndexMap<B::Key, ()> = IndexMap::new();
    for u in &base.elements {
        let us = backend.signed(&u.elem, sign);
        for t in set.elements() {
            out.insert(backend.canonical_key(&backend.product(&us, t)), ());
        }
    }
    Ok(out.into_keys().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Membership<E> {
    Yes(Factorization<E>),
    /// Exact non-membership.
    No,
    /// Not found in the enumeration; evidence only.
    NoWithinBound,
}

impl<E> Membership<E> {
    pub fn is_yes(&self) -> bool {
        matches!(self, Membership::Yes(_))
    }
}

/// Exact decision first, then a search of the enumeration.
pub fn member_oscillator<B: GroupBackend>(
    backend: &B,
    spec: &B::BaseSpec,
    expr: OscillatorExpr,
    g: &B::Elem,
    budget: Budget,
) -> Result<Membership<B::Elem>, OscillatorError> {
    let signs = expr.sign_pattern();
    if backend.is_identity(g) {
        return Ok(Membership::Yes(Factorization {
            factors: vec![backend.identity(); expr.n()],
            signs,
        }));
    }
    let exact = backend.decide(spec, expr, g);
    match &exact {
        Decision::NonMember => return Ok(Membership::No),
        Decision::NotFound => return Ok(Membership::NoWithinBound),
        Decision::Member(Some(factors)) => {
            let f = Factorization {
                factors: factors.clone(),
                signs,
            };
            if f.verifies(backend, g) {
                return Ok(Membership::Yes(f));
            }
        }
        _ => {}
    }
    let set = enumerate_oscillator(backend, spec, expr, budget)?;
    if let Some(f) = set.witness(backend, g) {
        return Ok(Membership::Yes(f));
    }
    Ok(if set.base_complete {
        Membership::No
    } else {
        Membership::NoWithinBound
    })
}

/// A verified element of the left set that is missing from the right set.
#[derive(Debug, Clone)]
pub struct InclusionWitness<E> {
    pub element: E,
    pub factorization: Factorization<E>,
    pub factor_labels: Vec<String>,
    pub weight: usize,
    /// True when non-membership on the right is exact.
    pub exact: bool,
}

#[derive(Debug, Clone)]
pub struct InclusionReport<E> {
    pub left: OscillatorExpr,
    pub right: OscillatorExpr,
    pub budget: Budget,
    /// Budget used when the right side had to be searched.
    pub right_budget: Option<Budget>,
    pub left_size: usize,
    pub exact_counterexamples: usize,
    pub bounded_counterexamples: usize,
    /// True when every left element was checked by an exact right predicate.
    pub right_exact: bool,
    pub witness: Option<InclusionWitness<E>>,
}

impl<E> InclusionReport<E> {
    pub fn refuted_exactly(&self) -> bool {
        self.witness.as_ref().is_some_and(|w| w.exact)
    }
}

/// Look for `w ∈ left \ right`.
///
/// Right-side membership goes through [`GroupBackend::decide`]; where that is
/// unknown the right set is searched at `budget.grow(extra)`, `extra >= 1`.
pub fn refute_inclusion<B: GroupBackend>(
    backend: &B,
    left: (&B::BaseSpec, OscillatorExpr),
    right: (&B::BaseSpec, OscillatorExpr),
    budget: Budget,
    extra: usize,
) -> Result<InclusionReport<B::Elem>, OscillatorError> {
    let extra = extra.max(1);
    let left_set = enumerate_oscillator(backend, left.0, left.1, budget)?;
    let decisions: Vec<Decision<B::Elem>> = left_set
        .entries
        .values()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|e| backend.decide(right.0, right.1, &e.elem))
        .collect();
    let mut right_set: Option<BoundedSet<B>> = None;
    let mut exact_count = 0;
    let mut bounded_count = 0;
    let mut right_exact = true;
    let mut best: Option<(bool, usize, usize)> = None; // (exact, weight, index)
    for (idx, (entry, d)) in left_set.entries.values().zip(&decisions).enumerate() {
        let exact_miss = match d {
            Decision::Member(_) => continue,
            Decision::NonMember => true,
            Decision::NotFound => {
                right_exact = false;
                false
            }
            Decision::Unknown => {
                right_exact = false;
                if right_set.is_none() {
                    right_set = Some(enumerate_oscillator(backend, right.0, right.1, budget.grow(extra))?);
                }
                let rs = right_set.as_ref().expect("just built");
                if rs.contains(backend, &entry.elem) {
                    continue;
                }
                rs.base_complete
            }
        };
        if exact_miss {
            exact_count += 1;
        } else {
            bounded_count += 1;
        }
        let w = left_set.weight(entry);
        let better = match best {
            None => true,
            Some((be, bw, _)) => (exact_miss && !be) || (exact_miss == be && w < bw),
        };
        if better {
            best = Some((exact_miss, w, idx));
        }
    }
    let witness = best.map(|(exact, weight, idx)| {
        let entry = &left_set.entries[idx];
        InclusionWitness {
            element: entry.elem.clone(),
            factorization: left_set.factorization_of(entry),
            factor_labels: left_set.factor_labels(entry),
            weight,
            exact,
        }
    });
    Ok(InclusionReport {
        left: left.1,
        right: right.1,
        budget,
        right_budget: right_set.as_ref().map(|s| s.budget),
        left_size: left_set.len(),
        exact_counterexamples: exact_count,
        bounded_counterexamples: bounded_count,
        right_exact,
        witness,
    })
}

/// Whether elementwise inversion maps `set` exactly onto `counterpart`, the
/// enumeration of `set.expr.inverse()` at the same budget.
pub fn parity_check<B: GroupBackend>(backend: &B, set: &BoundedSet<B>, counterpart: &BoundedSet<B>) -> bool {
    if set.expr.inverse() != counterpart.expr || set.budget != counterpart.budget {
        return false;
    }
    set.len() == counterpart.len()
        && set
            .elements()
            .all(|a| counterpart.contains(backend, &backend.inverse(a)))
}

/// Enumerate the counterpart and run [`parity_check`].
pub fn parity_holds<B: GroupBackend>(
    backend: &B,
    spec: &B::BaseSpec,
    expr: OscillatorExpr,
    budget: Budget,
) -> Result<bool, OscillatorError> {
    let set = enumerate_oscillator(backend, spec, expr, budget)?;
    let other = enumerate_oscillator(backend, spec, expr.inverse(), budget)?;
    Ok(parity_check(backend, &set, &other))
}

/// Same group, base sets inverted: `(±U⁻¹)ⁿ = (∓U)ⁿ`.
#[derive(Debug, Clone)]
pub struct Mirror<B>(pub B);

impl<B: GroupBackend> GroupBackend for Mirror<B> {
    type Elem = B::Elem;
    type Key = B::Key;
    type BaseSpec = B::BaseSpec;

    fn name(&self) -> String {
        format!("mirror({})", self.0.name())
    }
    fn identity(&self) -> B::Elem {
        self.0.identity()
    }
    fn product(&self, a: &B::Elem, b: &B::Elem) -> B::Elem {
        self.0.product(a, b)
    }
    fn inverse(&self, a: &B::Elem) -> B::Elem {
        self.0.inverse(a)
    }
    fn canonical_key(&self, a: &B::Elem) -> B::Key {
        self.0.canonical_key(a)
    }
    fn format(&self, a: &B::Elem) -> String {
        self.0.format(a)
    }
    fn factor_label(&self, a: &B::Elem) -> String {
        self.0.factor_label(a)
    }
    fn describe_base(&self, spec: &B::BaseSpec) -> String {
        format!("({})^-1", self.0.describe_base(spec))
    }
    fn enumerate_base(
        &self,
        spec: &B::BaseSpec,
        factor_len: usize,
    ) -> Result<BaseEnumeration<B::Elem>, OscillatorError> {
        let mut base = self.0.enumerate_base(spec, factor_len)?;
        for b in &mut base.elements {
            b.elem = self.0.inverse(&b.elem);
            if b.label != "e" {
                b.label = format!("({})'", b.label);
            }
        }
        Ok(base)
    }
    fn decide(&self, spec: &B::BaseSpec, expr: OscillatorExpr, a: &B::Elem) -> Decision<B::Elem> {
        match self.0.decide(spec, expr.flipped(), a) {
            Decision::Member(f) => Decision::Member(f.map(|fs| fs.iter().map(|u| self.0.inverse(u)).collect())),
            other => other,
        }
    }
}

/// Base sets in a free group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FreeBase {
    /// Positive words over the listed generators (a free monoid).
    PositiveMonoid(Vec<Gen>),
    /// Monoid generated by arbitrary words; budget counts generator factors.
    Monoid(Vec<Word>),
    /// A finite set; fully enumerated regardless of budget.
    Finite(Vec<Word>),
    CyclicSubgroup(Word),
    Whole,
}

/// The free group on an alphabet.
#[derive(Debug, Clone)]
pub struct FreeBackend {
    pub alphabet: Alphabet,
}

impl FreeBackend {
    pub fn new(alphabet: Alphabet) -> FreeBackend {
        FreeBackend { alphabet }
    }

    pub fn xy() -> FreeBackend {
        FreeBackend::new(Alphabet::xy())
    }

    /// The free monoid on the whole alphabet.
    pub fn free_semigroup(&self) -> FreeBase {
        FreeBase::PositiveMonoid(self.alphabet.gens())
    }
}

/// Exact membership of a reduced word in `(±S)ⁿ` / `(∓S)ⁿ` for `S` the free
/// monoid on the full alphabet.
pub fn free_semigroup_osc_member(w: &Word, expr: OscillatorExpr) -> bool {
    embed_blocks(w, expr).is_some()
}

/// Greedy embedding of the block-sign sequence of `w` into the sign pattern.
/// Returns, per pattern position, the positive factor assigned to it.
pub fn embed_blocks(w: &Word, expr: OscillatorExpr) -> Option<Vec<Word>> {
    let pattern = expr.sign_pattern();
    let mut factors = vec![Word::identity(); pattern.len()];
    let mut j = 0;
    for b in &w.blocks().blocks {
        while j < pattern.len() && pattern[j] != b.sign {
            j += 1;
        }
        if j == pattern.len() {
            return None;
        }
        let part = w.subword(b.start, b.len);
        factors[j] = match b.sign {
            Sign::Plus => part,
            Sign::Minus => part.invert(),
        };
        j += 1;
    }
    Some(factors)
}

fn cyclic_power(w: &Word, g: &Word) -> Option<i64> {
    if g.is_identity() {
        return w.is_identity().then_some(0);
    }
    let (core, conj) = g.cyclic_reduce();
    let inner = conj.invert().multiply(w).multiply(&conj);
    if inner.len() % core.len() != 0 {
        return None;
    }
    let k = (inner.len() / core.len()) as i64;
    [k, -k].into_iter().find(|&k| core.pow(k) == inner)
}

impl GroupBackend for FreeBackend {
    type Elem = Word;
    type Key = Word;
    type BaseSpec = FreeBase;

    fn name(&self) -> String {
        format!("free({})", self.alphabet.names().join(","))
    }
    fn identity(&self) -> Word {
        Word::identity()
    }
    fn product(&self, a: &Word, b: &Word) -> Word {
        a.multiply(b)
    }
    fn inverse(&self, a: &Word) -> Word {
        a.invert()
    }
    fn canonical_key(&self, a: &Word) -> Word {
        a.clone()
    }
    fn format(&self, a: &Word) -> String {
        self.alphabet.format(a)
    }
    fn equal(&self, a: &Word, b: &Word) -> bool {
        a == b
    }

    fn describe_base(&self, spec: &FreeBase) -> String {
        let list = |ws: &[Word]| ws.iter().map(|w| self.format(w)).collect::<Vec<_>>().join(", ");
        match spec {
            FreeBase::PositiveMonoid(gens) => format!(
                "free monoid on {{{}}}",
                gens.iter()
                    .map(|g| self.alphabet.name(*g))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            FreeBase::Monoid(ws) => format!("monoid generated by {{{}}}", list(ws)),
            FreeBase::Finite(ws) => format!("{{e, {}}}", list(ws)),
            FreeBase::CyclicSubgroup(g) => format!("<{}>", self.format(g)),
            FreeBase::Whole => "whole group".into(),
        }
    }

    fn enumerate_base(&self, spec: &FreeBase, factor_len: usize) -> Result<BaseEnumeration<Word>, OscillatorError> {
        let label = |w: &Word| self.format(w);
        let from_words = |ws: Vec<Word>, complete: bool| BaseEnumeration {
            elements: ws
                .into_iter()
                .map(|w| BaseElement {
                    label: label(&w),
                    weight: w.len(),
                    elem: w,
                })
                .collect(),
            complete,
        };
        Ok(match spec {
            FreeBase::PositiveMonoid(gens) => {
                if gens.iter().any(|g| g.0 as usize >= self.alphabet.len()) {
                    return Err(OscillatorError::BadBase("generator outside alphabet".into()));
                }
                from_words(positive_ball(gens, factor_len), false)
            }
            FreeBase::Monoid(gens) => {
                let mut seen: IndexMap<Word, ()> = IndexMap::new();
                seen.insert(Word::identity(), ());
                let mut layer = vec![Word::identity()];
                for _ in 0..factor_len {
                    let mut next = Vec::new();
                    for w in &layer {
                        for g in gens {
                            let p = w.multiply(g);
                            if seen.insert(p.clone(), ()).is_none() {
                                next.push(p);
                            }
                        }
                    }
                    layer = next;
                }
                from_words(seen.into_keys().collect(), gens.is_empty())
            }
            FreeBase::Finite(ws) => {
                let mut seen: IndexMap<Word, ()> = IndexMap::new();
                seen.insert(Word::identity(), ());
                for w in ws {
                    seen.insert(w.clone(), ());
                }
                from_words(seen.into_keys().collect(), true)
            }
            FreeBase::CyclicSubgroup(g) => {
                let mut ws = vec![Word::identity()];
                for k in 1..=factor_len as i64 {
                    ws.push(g.pow(k));
                    ws.push(g.pow(-k));
                }
                from_words(ws, g.is_identity())
            }
            FreeBase::Whole => from_words(reduced_ball(self.alphabet.len() as u16, factor_len), false),
        })
    }

    fn decide(&self, spec: &FreeBase, expr: OscillatorExpr, a: &Word) -> Decision<Word> {
        let lead = |w: Word| {
            // put everything in the first factor
            let mut f = vec![Word::identity(); expr.n()];
            f[0] = if expr.mirror() { w.invert() } else { w };
            f
        };
        match spec {
            FreeBase::PositiveMonoid(gens) => {
                if a.letters().iter().any(|l| !gens.contains(&l.gen())) {
                    return Decision::NonMember;
                }
                match embed_blocks(a, expr) {
                    Some(f) => Decision::Member(Some(f)),
                    None => Decision::NonMember,
                }
            }
            FreeBase::CyclicSubgroup(g) => match cyclic_power(a, g) {
                Some(k) => Decision::Member(Some(lead(g.pow(k)))),
                None => Decision::NonMember,
            },
            FreeBase::Whole => Decision::Member(Some(lead(a.clone()))),
            FreeBase::Monoid(_) | FreeBase::Finite(_) => Decision::Unknown,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fb() -> FreeBackend {
        FreeBackend::xy()
    }

    fn word(s: &str) -> Word {
        Alphabet::xy().parse_word(s).unwrap()
    }

    fn keys(set: &BoundedSet<FreeBackend>) -> std::collections::BTreeSet<Word> {
        set.entries.keys().cloned().collect()
    }

    #[test]
    fn sign_patterns() {
        use Sign::*;
        assert_eq!(OscillatorExpr::plus(3).sign_pattern(), vec![Plus, Minus, Plus]);
        assert_eq!(OscillatorExpr::minus(1).sign_pattern(), vec![Minus]);
        assert_eq!(OscillatorExpr::minus(4).sign_pattern(), vec![Minus, Plus, Minus, Plus]);
        assert_eq!(OscillatorExpr::new(0, false), Err(OscillatorError::ZeroLength));
    }

    #[test]
    fn small_enumerations() {
        let b = fb();
        let ex = FreeBase::Finite(vec![word("x")]);
        let s1 = enumerate_oscillator(&b, &ex, OscillatorExpr::plus(1), Budget::new(4)).unwrap();
        assert_eq!(keys(&s1), [word("e"), word("x")].into_iter().collect());
        let s2 = enumerate_oscillator(&b, &ex, OscillatorExpr::plus(2), Budget::new(4)).unwrap();
        assert_eq!(keys(&s2), [word("e"), word("x"), word("x'")].into_iter().collect());
        assert_eq!(s2.semantics(), Semantics::Exact);
    }

    #[test]
    fn two_factor_semigroup_matches_direct_product_set() {
        let b = fb();
        let s = b.free_semigroup();
        let set = enumerate_oscillator(&b, &s, OscillatorExpr::plus(2), Budget::new(3)).unwrap();
        let pos = positive_ball(&Alphabet::xy().gens(), 3);
        let mut direct = std::collections::BTreeSet::new();
        for u in &pos {
            for v in &pos {
                direct.insert(u.multiply(&v.invert()));
            }
        }
        assert_eq!(keys(&set), direct);
        for e in set.entries.values() {
            assert!(set.factorization_of(e).verifies(&b, &e.elem));
        }
    }

    #[test]
    fn membership_examples() {
        let b = fb();
        let s = b.free_semigroup();
        let e2 = OscillatorExpr::plus(2);
        assert!(member_oscillator(&b, &s, e2, &Word::identity(), Budget::new(2))
            .unwrap()
            .is_yes());
        match member_oscillator(&b, &s, e2, &word("x y'"), Budget::new(2)).unwrap() {
            Membership::Yes(f) => {
                assert_eq!(f.factors, vec![word("x"), word("y")]);
                assert!(f.verifies(&b, &word("x y'")));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            member_oscillator(&b, &s, e2, &word("x' y"), Budget::new(3)).unwrap(),
            Membership::No
        );
        // the enumeration alone never finds it either
        for budget in 1..=4 {
            let set = enumerate_oscillator(&fb(), &monoid_xy(), e2, Budget::new(budget)).unwrap();
            assert!(!set.contains(&b, &word("x' y")));
        }
    }

    // the positive monoid given by generator words, which has no exact predicate
    fn monoid_xy() -> FreeBase {
        FreeBase::Monoid(vec![word("x"), word("y")])
    }

    #[test]
    fn block_membership_examples() {
        assert!(free_semigroup_osc_member(&word("x y'"), OscillatorExpr::plus(2)));
        assert!(!free_semigroup_osc_member(&word("x' y"), OscillatorExpr::plus(2)));
        for k in 1..=4usize {
            let w = (0..k).fold(Word::identity(), |acc, i| {
                acc.multiply(&if i % 2 == 0 { word("x'") } else { word("y") })
            });
            assert!(!free_semigroup_osc_member(&w, OscillatorExpr::plus(k)));
            assert!(free_semigroup_osc_member(&w, OscillatorExpr::plus(k + 1)));
            assert!(free_semigroup_osc_member(&w, OscillatorExpr::minus(k)));
        }
    }

    #[test]
    fn block_membership_agrees_with_enumeration_exhaustively() {
        // a member of length <= 4 never needs a factor longer than 4
        let b = fb();
        let m = monoid_xy();
        let words = reduced_ball(2, 4);
        for n in 1..=4 {
            for mirror in [false, true] {
                let expr = OscillatorExpr::new(n, mirror).unwrap();
                let set = enumerate_oscillator(&b, &m, expr, Budget::new(4)).unwrap();
                for w in &words {
                    assert_eq!(
                        free_semigroup_osc_member(w, expr),
                        set.contains(&b, w),
                        "n={n} mirror={mirror} w={w:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn block_membership_agrees_on_length_six_up_to_n5() {
        // (±S)ⁿ = (±S)ʲ·(σS)ⁿ⁻ʲ, split so no enumeration has more than three
        // factors; budget 6 suffices since block factors are no longer than w
        let b = fb();
        let m = monoid_xy();
        let budget = Budget::new(6);
        let words = reduced_ball(2, 6);
        let mut sets = std::collections::HashMap::new();
        for k in 1..=3 {
            for mirror in [false, true] {
                let e = OscillatorExpr::new(k, mirror).unwrap();
                sets.insert(e, enumerate_oscillator(&b, &m, e, budget).unwrap());
            }
        }
        for n in 1..=5usize {
            for mirror in [false, true] {
                let expr = OscillatorExpr::new(n, mirror).unwrap();
                let j = n / 2;
                let contains = |w: &Word| -> bool {
                    if j == 0 {
                        return sets[&expr].contains(&b, w);
                    }
                    let head = &sets[&OscillatorExpr::new(j, mirror).unwrap()];
                    let tail_mirror = if j % 2 == 0 { mirror } else { !mirror };
                    let tail = &sets[&OscillatorExpr::new(n - j, tail_mirror).unwrap()];
                    head.elements().any(|a| tail.contains(&b, &a.invert().multiply(w)))
                };
                for w in &words {
                    assert_eq!(
                        free_semigroup_osc_member(w, expr),
                        contains(w),
                        "n={n} mirror={mirror} w={w:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn block_membership_agrees_at_n5_on_short_words() {
        // members whose block factorization fits the budget must be found
        let b = fb();
        let m = monoid_xy();
        for mirror in [false, true] {
            let expr = OscillatorExpr::new(5, mirror).unwrap();
            let set = enumerate_oscillator(&b, &m, expr, Budget::new(3)).unwrap();
            for w in reduced_ball(2, 6) {
                if free_semigroup_osc_member(&w, expr) {
                    let f = embed_blocks(&w, expr).unwrap();
                    if f.iter().all(|u| u.len() <= 3) {
                        assert!(set.contains(&b, &w));
                    }
                } else {
                    assert!(!set.contains(&b, &w));
                }
            }
        }
    }

    #[test]
    fn refutation_examples() {
        let b = fb();
        let s = b.free_semigroup();
        let r = refute_inclusion(
            &b,
            (&s, OscillatorExpr::minus(2)),
            (&s, OscillatorExpr::plus(2)),
            Budget::new(2),
            1,
        )
        .unwrap();
        let w = r.witness.unwrap();
        assert!(w.exact);
        assert_eq!(w.weight, 2);
        assert_eq!(w.element.len(), 2);
        assert!(w.factorization.verifies(&b, &w.element));
        assert!(!free_semigroup_osc_member(&w.element, OscillatorExpr::plus(2)));

        let sub = FreeBase::CyclicSubgroup(word("x"));
        for budget in 1..=5 {
            for n in 1..=4 {
                let r = refute_inclusion(
                    &b,
                    (&sub, OscillatorExpr::minus(n)),
                    (&sub, OscillatorExpr::plus(n)),
                    Budget::new(budget),
                    1,
                )
                .unwrap();
                assert!(r.witness.is_none());
                assert!(r.right_exact);
            }
        }
    }

    #[test]
    fn subgroup_oscillators_coincide() {
        let b = fb();
        let sub = FreeBase::CyclicSubgroup(word("x y"));
        let p = enumerate_oscillator(&b, &sub, OscillatorExpr::plus(2), Budget::new(3)).unwrap();
        let m = enumerate_oscillator(&b, &sub, OscillatorExpr::minus(2), Budget::new(3)).unwrap();
        assert_eq!(keys(&p), keys(&m));
        for w in p.elements() {
            assert!(matches!(
                b.decide(&sub, OscillatorExpr::plus(1), w),
                Decision::Member(_)
            ));
        }
    }

    #[test]
    fn parity_examples() {
        let b = fb();
        let ex = FreeBase::Finite(vec![word("x")]);
        assert!(parity_holds(&b, &ex, OscillatorExpr::plus(2), Budget::new(1)).unwrap());
        let one = enumerate_oscillator(&b, &ex, OscillatorExpr::plus(1), Budget::new(1)).unwrap();
        let inv: std::collections::BTreeSet<Word> = one.elements().map(|w| w.invert()).collect();
        let mirror = enumerate_oscillator(&b, &ex, OscillatorExpr::minus(1), Budget::new(1)).unwrap();
        assert_eq!(inv, keys(&mirror));
        assert!(parity_holds(&b, &b.free_semigroup(), OscillatorExpr::plus(4), Budget::new(2)).unwrap());
    }

    #[test]
    fn recursion_and_monotonicity_on_semigroup() {
        let b = fb();
        let s = b.free_semigroup();
        for n in 1..=3 {
            for mirror in [false, true] {
                let expr = OscillatorExpr::new(n, mirror).unwrap();
                let budget = Budget::new(2);
                let next = enumerate_oscillator(&b, &s, OscillatorExpr::new(n + 1, mirror).unwrap(), budget).unwrap();
                let inner = enumerate_oscillator(&b, &s, expr.flipped(), budget).unwrap();
                let lead = if mirror { Sign::Minus } else { Sign::Plus };
                let via: std::collections::BTreeSet<Word> =
                    left_multiply_base(&b, &s, lead, &inner).unwrap().into_iter().collect();
                assert_eq!(keys(&next), via);
                let cur = enumerate_oscillator(&b, &s, expr, budget).unwrap();
                assert!(keys(&cur).is_subset(&keys(&next)));
                assert!(keys(&inner).is_subset(&keys(&next)));
            }
        }
    }

    #[test]
    fn mirror_swaps_roles() {
        let b = fb();
        let mb = Mirror(fb());
        let s = b.free_semigroup();
        for n in 1..=4 {
            let e = OscillatorExpr::plus(n);
            let a = enumerate_oscillator(&mb, &s, e, Budget::new(2)).unwrap();
            let c = enumerate_oscillator(&b, &s, e.flipped(), Budget::new(2)).unwrap();
            let ka: std::collections::BTreeSet<Word> = a.entries.keys().cloned().collect();
            assert_eq!(ka, keys(&c));
            for w in a.elements() {
                match mb.decide(&s, e, w) {
                    Decision::Member(Some(f)) => {
                        let fz = Factorization {
                            factors: f,
                            signs: e.sign_pattern(),
                        };
                        assert!(fz.verifies(&mb, w));
                    }
                    other => panic!("{other:?}"),
                }
            }
        }
    }

    #[test]
    fn size_cap_is_reported() {
        let b = fb();
        let s = b.free_semigroup();
        let err = enumerate_oscillator(&b, &s, OscillatorExpr::plus(3), Budget::new(3).with_cap(100)).unwrap_err();
        assert_eq!(err, OscillatorError::SizeCap { cap: 100 });
    }

    #[test]
    fn monotone_in_budget() {
        let b = fb();
        let s = b.free_semigroup();
        let small = enumerate_oscillator(&b, &s, OscillatorExpr::minus(3), Budget::new(1)).unwrap();
        let big = enumerate_oscillator(&b, &s, OscillatorExpr::minus(3), Budget::new(2)).unwrap();
        assert!(keys(&small).is_subset(&keys(&big)));
    }

    #[test]
    fn cyclic_power_detection() {
        let g = word("x y");
        assert_eq!(cyclic_power(&g.pow(3), &g), Some(3));
        assert_eq!(cyclic_power(&g.pow(-2), &g), Some(-2));
        assert_eq!(cyclic_power(&word("x"), &g), None);
        let c = word("x y x'");
        assert_eq!(cyclic_power(&c.pow(4), &c), Some(4));
        assert_eq!(cyclic_power(&word("y y y"), &c), None);
    }

    mod props {
        use super::*;
        use crate::freegroup::Letter;
        use proptest::prelude::*;

        fn finite_base() -> impl Strategy<Value = FreeBase> {
            let letter =
                (0u16..2, any::<bool>()).prop_map(|(g, neg)| if neg { Letter::neg(g) } else { Letter::pos(g) });
            prop::collection::vec(
                prop::collection::vec(letter, 1..4).prop_map(|l: Vec<Letter>| crate::freegroup::reduce(&l)),
                1..4,
            )
            .prop_map(FreeBase::Finite)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn recursion_holds(base in finite_base(), n in 1usize..4, mirror in any::<bool>()) {
                let b = fb();
                let budget = Budget::new(1);
                let expr = OscillatorExpr::new(n, mirror).unwrap();
                let next = enumerate_oscillator(&b, &base, OscillatorExpr::new(n + 1, mirror).unwrap(), budget).unwrap();
                let inner = enumerate_oscillator(&b, &base, expr.flipped(), budget).unwrap();
                let lead = if mirror { Sign::Minus } else { Sign::Plus };
                let via: std::collections::BTreeSet<Word> = left_multiply_base(&b, &base, lead, &inner).unwrap().into_iter().collect();
                prop_assert_eq!(keys(&next), via);
                let cur = enumerate_oscillator(&b, &base, expr, budget).unwrap();
                prop_assert!(keys(&cur).is_subset(&keys(&next)));
                prop_assert!(keys(&inner).is_subset(&keys(&next)));
            }

            #[test]
            fn inversion_parity(base in finite_base(), n in 1usize..5, mirror in any::<bool>()) {
                let expr = OscillatorExpr::new(n, mirror).unwrap();
                prop_assert!(parity_holds(&fb(), &base, expr, Budget::new(1)).unwrap());
            }

            #[test]
            fn mirror_is_flipped(base in finite_base(), n in 1usize..4, mirror in any::<bool>()) {
                let expr = OscillatorExpr::new(n, mirror).unwrap();
                let m = enumerate_oscillator(&Mirror(fb()), &base, expr, Budget::new(1)).unwrap();
                let f = enumerate_oscillator(&fb(), &base, expr.flipped(), Budget::new(1)).unwrap();
                let mk: std::collections::BTreeSet<Word> = m.entries.keys().cloned().collect();
                prop_assert_eq!(mk, keys(&f));
            }
        }
    }
}
