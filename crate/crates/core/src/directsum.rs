//! Finitely supported tuples in `⊕ₙ F²ₙ`, the basic neighborhoods built from
//! the free semigroup in each coordinate, and the map `ψ` onto
//! `ℤ × ∏ ⟨xₙ, yₙ | (xₙyₙ⁻¹)ᵖ⟩`.
//!
//! Every coordinate group is the free group on `x, y`; coordinate `n` carries
//! its own copy of the alphabet. Coordinates are materialized only when some
//! element touches them.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::{Arc, Mutex};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dehn::OneRelator;
use crate::freegroup::{positive_ball, reduced_ball, Alphabet, FreeGroupError, Gen, Sign, Word};
use crate::oscillator::{
    embed_blocks, free_semigroup_osc_member, BaseElement, BaseEnumeration, Decision, GroupBackend, OscillatorError,
    OscillatorExpr,
};

pub type Coord = u32;

const X: Gen = Gen(0);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DirectSumError {
    #[error("cannot parse tuple literal: {0}")]
    Literal(String),
    #[error(transparent)]
    Word(#[from] FreeGroupError),
    #[error("torsion exponent must be at least 2, got {0}")]
    BadPower(u32),
}

/// A finitely supported tuple; identity coordinates are never stored.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TupleElement(BTreeMap<Coord, Word>);

impl TupleElement {
    pub fn identity() -> TupleElement {
        TupleElement::default()
    }

    pub fn single(coord: Coord, w: Word) -> TupleElement {
        TupleElement::from_coords([(coord, w)])
    }

    pub fn from_coords(coords: impl IntoIterator<Item = (Coord, Word)>) -> TupleElement {
        let mut m = BTreeMap::new();
        for (c, w) in coords {
            let prod = m.get(&c).map_or(w.clone(), |prev: &Word| prev.multiply(&w));
            if prod.is_identity() {
                m.remove(&c);
            } else {
                m.insert(c, prod);
            }
        }
        TupleElement(m)
    }

    pub fn get(&self, c: Coord) -> Option<&Word> {
        self.0.get(&c)
    }

    pub fn coords(&self) -> &BTreeMap<Coord, Word> {
        &self.0
    }

    pub fn support(&self) -> Vec<Coord> {
        self.0.keys().copied().collect()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn product(&self, other: &TupleElement) -> TupleElement {
        let mut m = self.0.clone();
        for (c, w) in &other.0 {
            let prod = m.get(c).map_or(w.clone(), |prev| prev.multiply(w));
            if prod.is_identity() {
                m.remove(c);
            } else {
                m.insert(*c, prod);
            }
        }
        TupleElement(m)
    }

    pub fn inverse(&self) -> TupleElement {
        TupleElement(self.0.iter().map(|(c, w)| (*c, w.invert())).collect())
    }

    /// `{1: "x y'", 3: "x x"}`.
    pub fn literal(&self) -> String {
        format_coords(self.0.iter().map(|(c, w)| (*c, w)))
    }

    pub fn parse(text: &str) -> Result<TupleElement, DirectSumError> {
        Ok(TupleElement::from_coords(parse_coords(text)?))
    }
}

impl fmt::Debug for TupleElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.literal())
    }
}

impl Serialize for TupleElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.literal())
    }
}

fn format_coords<'a>(coords: impl Iterator<Item = (Coord, &'a Word)>) -> String {
    let xy = Alphabet::xy();
    let parts: Vec<String> = coords.map(|(c, w)| format!("{c}: \"{}\"", xy.format(w))).collect();
    format!("{{{}}}", parts.join(", "))
}

fn parse_coords(text: &str) -> Result<Vec<(Coord, Word)>, DirectSumError> {
    let err = |m: &str| DirectSumError::Literal(format!("{m} in {text:?}"));
    let body = text
        .trim()
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| err("missing braces"))?;
    let xy = Alphabet::xy();
    let mut out = Vec::new();
    let mut rest = body.trim();
    while !rest.is_empty() {
        let (key, after) = rest.split_once(':').ok_or_else(|| err("missing ':'"))?;
        let coord: Coord = key.trim().parse().map_err(|_| err("bad coordinate"))?;
        let after = after
            .trim_start()
            .strip_prefix('"')
            .ok_or_else(|| err("missing quote"))?;
        let (word, tail) = after.split_once('"').ok_or_else(|| err("unterminated quote"))?;
        out.push((coord, xy.parse_word(word)?));
        rest = tail.trim_start();
        if let Some(t) = rest.strip_prefix(',') {
            rest = t.trim_start();
        } else if !rest.is_empty() {
            return Err(err("expected ','"));
        }
    }
    Ok(out)
}

/// Which coordinates of `Uₙ` are free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NbhdConvention {
    /// Coordinates `≥ n` range over the coordinate set (the `⊕_{m≥n} S_m` family).
    FromIndex,
    /// Coordinates `> n` range over the coordinate set, the rest are `e`.
    AfterIndex,
}

/// What a free coordinate may hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordSet {
    /// Positive words: the free semigroup with identity.
    Semigroup,
    /// Anything: gives a chain of normal subgroups.
    Group,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BasicNbhd {
    pub index: Coord,
    pub convention: NbhdConvention,
    pub coord_set: CoordSet,
}

impl BasicNbhd {
    pub fn new(index: Coord, convention: NbhdConvention, coord_set: CoordSet) -> BasicNbhd {
        assert!(index >= 1, "neighborhood index starts at 1");
        BasicNbhd {
            index,
            convention,
            coord_set,
        }
    }

    /// The first coordinate allowed to be nontrivial.
    pub fn first_free(&self) -> Coord {
        match self.convention {
            NbhdConvention::FromIndex => self.index,
            NbhdConvention::AfterIndex => self.index + 1,
        }
    }

    fn coord_ok(&self, w: &Word) -> bool {
        match self.coord_set {
            CoordSet::Semigroup => w.is_positive(),
            CoordSet::Group => true,
        }
    }
}

pub fn basic_nbhd_member(u: &BasicNbhd, t: &TupleElement) -> bool {
    t.coords().iter().all(|(c, w)| *c >= u.first_free() && u.coord_ok(w))
}

/// Positive words distributed over `window` coordinates starting at `first`,
/// total length `≤ budget`.
fn window_tuples(first: Coord, window: u32, budget: usize, words: impl Fn(usize) -> Vec<Word>) -> Vec<TupleElement> {
    let pool = words(budget);
    let mut out = vec![(TupleElement::identity(), 0usize)];
    for c in first..first + window {
        let mut next = Vec::new();
        for (t, used) in &out {
            for w in &pool {
                if used + w.len() <= budget {
                    let mut m = t.coords().clone();
                    if !w.is_identity() {
                        m.insert(c, w.clone());
                    }
                    next.push((TupleElement(m), used + w.len()));
                }
            }
        }
        out = next;
    }
    let mut ts: Vec<(TupleElement, usize)> = out;
    ts.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    ts.dedup_by(|a, b| a.0 == b.0);
    ts.into_iter().map(|(t, _)| t).collect()
}

fn tuple_weight(t: &TupleElement) -> usize {
    t.coords().values().map(Word::len).sum()
}

/// Sum of per-coordinate factorizations into tuple factors.
fn assemble_factors(n: usize, per_coord: &[(Coord, Vec<Word>)]) -> Vec<TupleElement> {
    (0..n)
        .map(|j| TupleElement::from_coords(per_coord.iter().map(|(c, f)| (*c, f[j].clone()))))
        .collect()
}

/// `⊕ F²` with the basis `{Uₙ}`; base specs are neighborhood indices.
#[derive(Debug, Clone)]
pub struct TupleBackend {
    pub convention: NbhdConvention,
    pub coord_set: CoordSet,
    /// Number of coordinates enumerated per basic set.
    pub window: u32,
}

impl TupleBackend {
    pub fn new(convention: NbhdConvention, coord_set: CoordSet) -> TupleBackend {
        TupleBackend {
            convention,
            coord_set,
            window: 2,
        }
    }

    pub fn nbhd(&self, n: Coord) -> BasicNbhd {
        BasicNbhd::new(n, self.convention, self.coord_set)
    }
}

impl GroupBackend for TupleBackend {
    type Elem = TupleElement;
    type Key = TupleElement;
    type BaseSpec = Coord;

    fn name(&self) -> String {
        format!("tuple({:?},{:?})", self.convention, self.coord_set)
    }
    fn identity(&self) -> TupleElement {
        TupleElement::identity()
    }
    fn product(&self, a: &TupleElement, b: &TupleElement) -> TupleElement {
        a.product(b)
    }
    fn inverse(&self, a: &TupleElement) -> TupleElement {
        a.inverse()
    }
    fn canonical_key(&self, a: &TupleElement) -> TupleElement {
        a.clone()
    }
    fn format(&self, a: &TupleElement) -> String {
        a.literal()
    }
    fn equal(&self, a: &TupleElement, b: &TupleElement) -> bool {
        a == b
    }
    fn describe_base(&self, n: &Coord) -> String {
        let u = self.nbhd(*n);
        let set = match self.coord_set {
            CoordSet::Semigroup => "S",
            CoordSet::Group => "F2",
        };
        format!("U_{n}: coordinates >= {} in {set}", u.first_free())
    }

    fn enumerate_base(&self, n: &Coord, factor_len: usize) -> Result<BaseEnumeration<TupleElement>, OscillatorError> {
        let first = self.nbhd(*n).first_free();
        let tuples = match self.coord_set {
            CoordSet::Semigroup => {
                window_tuples(first, self.window, factor_len, |l| positive_ball(&[Gen(0), Gen(1)], l))
            }
            CoordSet::Group => window_tuples(first, self.window, factor_len, |l| reduced_ball(2, l)),
        };
        Ok(BaseEnumeration {
            elements: tuples
                .into_iter()
                .map(|t| BaseElement {
                    label: t.literal(),
                    weight: tuple_weight(&t),
                    elem: t,
                })
                .collect(),
            complete: false,
        })
    }

    /// Oscillators of a direct sum of monoids are taken coordinatewise.
    fn base_member(&self, n: &Coord, t: &TupleElement) -> Option<bool> {
        Some(basic_nbhd_member(&self.nbhd(*n), t))
    }

    fn decide(&self, n: &Coord, expr: OscillatorExpr, t: &TupleElement) -> Decision<TupleElement> {
        let u = self.nbhd(*n);
        let mut per_coord = Vec::new();
        for (c, w) in t.coords() {
            if *c < u.first_free() {
                return Decision::NonMember;
            }
            let factors = match self.coord_set {
                CoordSet::Semigroup => match embed_blocks(w, expr) {
                    Some(f) => f,
                    None => return Decision::NonMember,
                },
                CoordSet::Group => {
                    let mut f = vec![Word::identity(); expr.n()];
                    f[0] = if expr.mirror() { w.invert() } else { w.clone() };
                    f
                }
            };
            per_coord.push((*c, factors));
        }
        Decision::Member(Some(assemble_factors(expr.n(), &per_coord)))
    }
}

/// Syllable of the free product `⟨x⟩ * ⟨z | zᵖ⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Syllable {
    X(i64),
    /// Exponent in `1..p`.
    Z(i64),
}

/// Normal form of `w` in `⟨x, y | (xy⁻¹)ᵖ⟩ ≅ ℤ * ℤ_p` via `z = xy⁻¹`, `y = z⁻¹x`.
pub fn free_product_normal_form(w: &Word, p: u32) -> Vec<Syllable> {
    let p = p as i64;
    let mut stack: Vec<Syllable> = Vec::with_capacity(w.len() * 2);
    let mut push = |s: Syllable| match (stack.last_mut(), s) {
        (Some(Syllable::X(a)), Syllable::X(b)) => {
            *a += b;
            if *a == 0 {
                stack.pop();
            }
        }
        (Some(Syllable::Z(a)), Syllable::Z(b)) => {
            *a = (*a + b).rem_euclid(p);
            if *a == 0 {
                stack.pop();
            }
        }
        (_, Syllable::Z(b)) => {
            let b = b.rem_euclid(p);
            if b != 0 {
                stack.push(Syllable::Z(b));
            }
        }
        (_, s) => stack.push(s),
    };
    for l in w.letters() {
        match (l.gen() == X, l.sign()) {
            (true, Sign::Plus) => push(Syllable::X(1)),
            (true, Sign::Minus) => push(Syllable::X(-1)),
            (false, Sign::Plus) => {
                push(Syllable::Z(-1));
                push(Syllable::X(1));
            }
            (false, Sign::Minus) => {
                push(Syllable::X(-1));
                push(Syllable::Z(1));
            }
        }
    }
    stack
}

/// `(Σψᵢ(wᵢ), (φᵢ(wᵢ)))` with coset representatives Dehn-reduced and
/// trivial cosets dropped.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PsiImage {
    pub int_part: i64,
    pub coset: BTreeMap<Coord, Word>,
}

impl PsiImage {
    pub fn identity() -> PsiImage {
        PsiImage {
            int_part: 0,
            coset: BTreeMap::new(),
        }
    }

    pub fn is_trivial_coset(&self) -> bool {
        self.coset.is_empty()
    }

    pub fn literal(&self) -> String {
        format!(
            "({}, {})",
            self.int_part,
            format_coords(self.coset.iter().map(|(c, w)| (*c, w)))
        )
    }

    /// Inverse of [`PsiImage::literal`]; representatives are taken as given.
    pub fn parse(text: &str) -> Result<PsiImage, DirectSumError> {
        let err = || DirectSumError::Literal(text.to_string());
        let body = text
            .trim()
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(err)?;
        let (m, rest) = body.split_once(',').ok_or_else(err)?;
        let int_part = m.trim().parse().map_err(|_| err())?;
        let coset = parse_coords(rest.trim())?
            .into_iter()
            .filter(|(_, w)| !w.is_identity())
            .collect();
        Ok(PsiImage { int_part, coset })
    }
}

impl fmt::Debug for PsiImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.literal())
    }
}

#[cfg(test)]
impl PsiImage {
    fn with_int_part(mut self, m: i64) -> PsiImage {
        self.int_part = m;
        self
    }
}

impl Serialize for PsiImage {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.literal())
    }
}

/// Canonical key of a [`PsiImage`]: the free-product normal form per coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PsiKey {
    pub int_part: i64,
    pub coset: Vec<(Coord, Vec<Syllable>)>,
}

/// The quotient `⟨x, y | (xy⁻¹)ᵖ⟩` shared by every coordinate.
#[derive(Debug, Clone)]
pub struct Quotient {
    pub rel: OneRelator,
}

impl Quotient {
    pub fn new(p: u32) -> Result<Quotient, DirectSumError> {
        if p < 2 {
            return Err(DirectSumError::BadPower(p));
        }
        Ok(Quotient {
            rel: OneRelator::xy_torsion(p).map_err(|_| DirectSumError::BadPower(p))?,
        })
    }

    pub fn p(&self) -> u32 {
        self.rel.power()
    }

    fn coset_rep(&self, w: &Word) -> Option<Word> {
        let (r, _) = self.rel.dehn_reduce(w);
        (!r.is_identity()).then_some(r)
    }

    pub fn psi(&self, t: &TupleElement) -> PsiImage {
        let mut img = PsiImage::identity();
        for (c, w) in t.coords() {
            img.int_part += w.exponent_sum(X);
            if let Some(r) = self.coset_rep(w) {
                img.coset.insert(*c, r);
            }
        }
        img
    }

    /// Equality through the word problem in each coordinate.
    pub fn psi_equal(&self, a: &PsiImage, b: &PsiImage) -> bool {
        if a.int_part != b.int_part {
            return false;
        }
        let coords: BTreeSet<Coord> = a.coset.keys().chain(b.coset.keys()).copied().collect();
        let e = Word::identity();
        coords.into_iter().all(|c| {
            self.rel
                .equal(a.coset.get(&c).unwrap_or(&e), b.coset.get(&c).unwrap_or(&e))
        })
    }

    pub fn product(&self, a: &PsiImage, b: &PsiImage) -> PsiImage {
        let mut coset = a.coset.clone();
        for (c, w) in &b.coset {
            let prod = coset.get(c).map_or(w.clone(), |prev| prev.multiply(w));
            match self.coset_rep(&prod) {
                Some(r) => {
                    coset.insert(*c, r);
                }
                None => {
                    coset.remove(c);
                }
            }
        }
        PsiImage {
            int_part: a.int_part + b.int_part,
            coset,
        }
    }

    pub fn inverse(&self, a: &PsiImage) -> PsiImage {
        PsiImage {
            int_part: -a.int_part,
            coset: a.coset.iter().map(|(c, w)| (*c, w.invert())).collect(),
        }
    }

    pub fn key(&self, a: &PsiImage) -> PsiKey {
        PsiKey {
            int_part: a.int_part,
            coset: a
                .coset
                .iter()
                .map(|(c, w)| (*c, free_product_normal_form(w, self.p())))
                .filter(|(_, nf)| !nf.is_empty())
                .collect(),
        }
    }
}

/// Per-coordinate search table for one oscillator expression: reduced words
/// of length `≤ coord_len` in `(±S)ᵏ`, grouped by coset, with their `x`-sums.
#[derive(Debug)]
struct StageTable {
    by_coset: HashMap<Vec<Syllable>, BTreeMap<i64, Word>>,
}

impl StageTable {
    fn kernel_sums(&self) -> Option<&BTreeMap<i64, Word>> {
        self.by_coset.get(&Vec::new())
    }
}

/// How a membership answer was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ex0Route {
    /// A nontrivial coset below the first free coordinate.
    CosetBelowIndex,
    /// Trivial coset, nonzero integer part, at most `2p − 2` factors.
    SemigroupKernelBound,
    /// Coordinatewise search within the word-length bound.
    BoundedSearch,
    Identity,
}

/// `G = ψ(H)` with base sets `ψ(Uₙ)`, `Uₙ = ⊕_{m≥n} S_m`.
#[derive(Debug)]
pub struct Ex0Backend {
    pub quotient: Quotient,
    /// Coordinates enumerated per base set.
    pub window: u32,
    /// Word-length bound of the per-coordinate search.
    pub coord_len: usize,
    tables: Mutex<HashMap<OscillatorExpr, Arc<StageTable>>>,
}

impl Clone for Ex0Backend {
    fn clone(&self) -> Ex0Backend {
        Ex0Backend::with_bounds(self.quotient.clone(), self.window, self.coord_len)
    }
}

impl Ex0Backend {
    pub fn new(p: u32) -> Result<Ex0Backend, DirectSumError> {
        Ok(Ex0Backend::with_bounds(Quotient::new(p)?, 2, 8))
    }

    pub fn with_bounds(quotient: Quotient, window: u32, coord_len: usize) -> Ex0Backend {
        Ex0Backend {
            quotient,
            window,
            coord_len,
            tables: Mutex::new(HashMap::new()),
        }
    }

    pub fn p(&self) -> u32 {
        self.quotient.p()
    }

    pub fn psi(&self, t: &TupleElement) -> PsiImage {
        self.quotient.psi(t)
    }

    /// A positive tuple mapping to `a`, when the coset representatives of `a`
    /// are positive words carrying its integer part.
    pub fn preimage(&self, a: &PsiImage) -> Option<TupleElement> {
        let t = TupleElement::from_coords(a.coset.iter().map(|(c, w)| (*c, w.clone())));
        (t.coords().values().all(Word::is_positive) && self.quotient.key(&self.psi(&t)) == self.quotient.key(a))
            .then_some(t)
    }

    /// `(m, e)`.
    pub fn pure(&self, m: i64) -> PsiImage {
        PsiImage {
            int_part: m,
            coset: BTreeMap::new(),
        }
    }

    fn table(&self, expr: OscillatorExpr) -> Arc<StageTable> {
        if let Some(t) = self.tables.lock().expect("table lock").get(&expr) {
            return t.clone();
        }
        let p = self.p();
        let mut by_coset: HashMap<Vec<Syllable>, BTreeMap<i64, Word>> = HashMap::new();
        for w in reduced_ball(2, self.coord_len) {
            if free_semigroup_osc_member(&w, expr) {
                by_coset
                    .entry(free_product_normal_form(&w, p))
                    .or_default()
                    .entry(w.exponent_sum(X))
                    .or_insert(w);
            }
        }
        let t = Arc::new(StageTable { by_coset });
        self.tables.lock().expect("table lock").insert(expr, t.clone());
        t
    }

    /// The route this backend takes for `g`, together with its answer.
    pub fn decide_with_route(&self, n: Coord, expr: OscillatorExpr, g: &PsiImage) -> (Ex0Route, Decision<PsiImage>) {
        let k = expr.n();
        if g.coset.keys().any(|c| *c < n) {
            return (Ex0Route::CosetBelowIndex, Decision::NonMember);
        }
        if g.int_part == 0 && g.coset.is_empty() {
            return (
                Ex0Route::Identity,
                Decision::Member(Some(vec![PsiImage::identity(); k])),
            );
        }
        if g.coset.is_empty() && k <= 2 * self.p() as usize - 2 {
            return (Ex0Route::SemigroupKernelBound, Decision::NonMember);
        }
        (Ex0Route::BoundedSearch, self.bounded_search(n, expr, g))
    }

    fn bounded_search(&self, n: Coord, expr: OscillatorExpr, g: &PsiImage) -> Decision<PsiImage> {
        let table = self.table(expr);
        let p = self.p();
        // integer sums reachable from the prescribed cosets
        let mut sums: BTreeMap<i64, Vec<(Coord, Word)>> = BTreeMap::new();
        sums.insert(0, Vec::new());
        for (c, rep) in &g.coset {
            let Some(options) = table.by_coset.get(&free_product_normal_form(rep, p)) else {
                return Decision::NotFound;
            };
            let mut next: BTreeMap<i64, Vec<(Coord, Word)>> = BTreeMap::new();
            for (s, chosen) in &sums {
                for (x, w) in options {
                    next.entry(s + x).or_insert_with(|| {
                        let mut ch = chosen.clone();
                        ch.push((*c, w.clone()));
                        ch
                    });
                }
            }
            sums = next;
        }
        // remaining integer part from kernel words on fresh coordinates
        let kernel: Vec<(i64, Word)> = table
            .kernel_sums()
            .map(|m| {
                m.iter()
                    .filter(|(x, _)| **x != 0)
                    .map(|(x, w)| (*x, w.clone()))
                    .collect()
            })
            .unwrap_or_default();
        for (s, chosen) in &sums {
            let Some(parts) = kernel_decomposition(g.int_part - s, &kernel) else {
                continue;
            };
            let mut fresh = g.coset.keys().max().map_or(n, |m| (m + 1).max(n));
            let mut per_coord: Vec<(Coord, Vec<Word>)> = Vec::new();
            for (c, w) in chosen {
                per_coord.push((*c, embed_blocks(w, expr).expect("table words are members")));
            }
            for w in parts {
                per_coord.push((fresh, embed_blocks(&w, expr).expect("table words are members")));
                fresh += 1;
            }
            let factors = assemble_factors(expr.n(), &per_coord)
                .iter()
                .map(|t| self.psi(t))
                .collect();
            return Decision::Member(Some(factors));
        }
        Decision::NotFound
    }
}

/// Shortest sequence of kernel words whose `x`-sums add up to `target`.
fn kernel_decomposition(target: i64, kernel: &[(i64, Word)]) -> Option<Vec<Word>> {
    if target == 0 {
        return Some(Vec::new());
    }
    if kernel.is_empty() {
        return None;
    }
    let reach = kernel.iter().map(|(x, _)| x.abs()).max().unwrap_or(0) + target.abs();
    let mut prev: HashMap<i64, (i64, usize)> = HashMap::new();
    let mut queue = VecDeque::from([0i64]);
    prev.insert(0, (0, usize::MAX));
    while let Some(s) = queue.pop_front() {
        for (i, (x, _)) in kernel.iter().enumerate() {
            let t = s + x;
            if t.abs() > reach || prev.contains_key(&t) {
                continue;
            }
            prev.insert(t, (s, i));
            if t == target {
                let mut out = Vec::new();
                let mut cur = t;
                while cur != 0 {
                    let (from, idx) = prev[&cur];
                    out.push(kernel[idx].1.clone());
                    cur = from;
                }
                out.reverse();
                return Some(out);
            }
            queue.push_back(t);
        }
    }
    None
}

impl GroupBackend for Ex0Backend {
    type Elem = PsiImage;
    type Key = PsiKey;
    type BaseSpec = Coord;

    fn name(&self) -> String {
        format!("psi(p={})", self.p())
    }
    fn identity(&self) -> PsiImage {
        PsiImage::identity()
    }
    fn product(&self, a: &PsiImage, b: &PsiImage) -> PsiImage {
        self.quotient.product(a, b)
    }
    fn inverse(&self, a: &PsiImage) -> PsiImage {
        self.quotient.inverse(a)
    }
    fn canonical_key(&self, a: &PsiImage) -> PsiKey {
        self.quotient.key(a)
    }
    fn format(&self, a: &PsiImage) -> String {
        a.literal()
    }
    fn equal(&self, a: &PsiImage, b: &PsiImage) -> bool {
        self.quotient.psi_equal(a, b)
    }
    fn factor_label(&self, a: &PsiImage) -> String {
        self.preimage(a).map_or_else(|| a.literal(), |t| t.literal())
    }
    fn describe_base(&self, n: &Coord) -> String {
        format!("psi(U_{n}), U_{n} = sum of S_m over m >= {n}")
    }

    fn enumerate_base(&self, n: &Coord, factor_len: usize) -> Result<BaseEnumeration<PsiImage>, OscillatorError> {
        let mut seen: IndexMap<PsiKey, BaseElement<PsiImage>> = IndexMap::new();
        for t in window_tuples(*n, self.window, factor_len, |l| positive_ball(&[Gen(0), Gen(1)], l)) {
            let img = self.psi(&t);
            seen.entry(self.canonical_key(&img)).or_insert_with(|| BaseElement {
                label: t.literal(),
                weight: tuple_weight(&t),
                elem: img,
            });
        }
        Ok(BaseEnumeration {
            elements: seen.into_values().collect(),
            complete: false,
        })
    }

    fn decide(&self, n: &Coord, expr: OscillatorExpr, g: &PsiImage) -> Decision<PsiImage> {
        self.decide_with_route(*n, expr, g).1
    }
}

/// Result of the bounded check that `(±S)^{2p−2} ∩ N = {e}`.
#[derive(Debug, Clone, Serialize)]
pub struct KernelBoundReport {
    pub p: u32,
    pub max_len: usize,
    pub words_checked: usize,
    pub oscillator_members: usize,
    /// Nonempty members that are trivial in the quotient.
    pub counterexamples: Vec<String>,
    /// Words on which the word-problem solver and the normal form disagree.
    pub oracle_disagreements: usize,
}

/// Every reduced word of length `≤ max_len` in `(±S)^{2p−2}` that is trivial
/// in `⟨x, y | (xy⁻¹)ᵖ⟩` must be empty. Triviality is decided twice, by Dehn
/// reduction and by the free-product normal form.
pub fn kernel_bound_certificate(p: u32, max_len: usize) -> Result<KernelBoundReport, DirectSumError> {
    use rayon::prelude::*;
    let q = Quotient::new(p)?;
    let expr = OscillatorExpr::plus(2 * p as usize - 2);
    let words = reduced_ball(2, max_len);
    let results: Vec<(bool, bool, bool)> = words
        .par_iter()
        .map(|w| {
            if !free_semigroup_osc_member(w, expr) {
                return (false, false, false);
            }
            let dehn = q.rel.is_trivial(w);
            let nf = free_product_normal_form(w, p).is_empty();
            (true, dehn || nf, dehn != nf)
        })
        .collect();
    let mut report = KernelBoundReport {
        p,
        max_len,
        words_checked: words.len(),
        oscillator_members: 0,
        counterexamples: Vec::new(),
        oracle_disagreements: 0,
    };
    let xy = Alphabet::xy();
    for (w, (member, trivial, disagree)) in words.iter().zip(results) {
        report.oscillator_members += member as usize;
        report.oracle_disagreements += disagree as usize;
        if trivial && !w.is_identity() {
            report.counterexamples.push(xy.format(w));
        }
    }
    Ok(report)
}

/// The factorization `ψ(xₙ)ψ(yₙ)⁻¹⋯ψ(xₙ)ψ(yₙ)⁻¹` of `(p, e)` in `(±ψ(Uₙ))^{2p}`.
pub fn torsion_witness(backend: &Ex0Backend, n: Coord) -> Vec<PsiImage> {
    let xy = Alphabet::xy();
    let x = backend.psi(&TupleElement::single(n, xy.parse_word("x").expect("x")));
    let y = backend.psi(&TupleElement::single(n, xy.parse_word("y").expect("y")));
    (0..2 * backend.p())
        .map(|i| if i % 2 == 0 { x.clone() } else { y.clone() })
        .collect()
}
