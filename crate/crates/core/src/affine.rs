//! The dyadic affine group `x ↦ 2ᵃx + t` and the semigroup `S` generated by
//! `a: x ↦ 2x` and `b: x ↦ x + 1`.
//!
//! Composition is function composition: `compose(f, g)` applies `g` first.
//! With this convention `ab = b²a` holds literally.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::freegroup::{Alphabet, Gen, Sign, Word};
use crate::oscillator::{BaseElement, BaseEnumeration, Decision, GroupBackend, OscillatorError, OscillatorExpr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AffineError {
    #[error("cannot parse dyadic rational {0:?}")]
    Dyadic(String),
    #[error("cannot parse affine map {0:?}; expected `a=K,t=N/2^k` or `K,N/2^k`")]
    Map(String),
    #[error("word uses a generator other than a, b")]
    Generator,
}

/// `numerator / 2^exponent`, normalized (odd numerator, or zero with exponent 0).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicRational {
    numerator: BigInt,
    exponent: u64,
}

impl DyadicRational {
    pub fn new(numerator: BigInt, exponent: u64) -> DyadicRational {
        let mut d = DyadicRational { numerator, exponent };
        d.normalize();
        d
    }

    pub fn zero() -> DyadicRational {
        DyadicRational::from_int(0)
    }

    pub fn from_int(n: i64) -> DyadicRational {
        DyadicRational {
            numerator: BigInt::from(n),
            exponent: 0,
        }
    }

    pub fn from_bigint(n: BigInt) -> DyadicRational {
        DyadicRational {
            numerator: n,
            exponent: 0,
        }
    }

    fn normalize(&mut self) {
        if self.numerator.is_zero() {
            self.exponent = 0;
            return;
        }
        let tz = self.numerator.trailing_zeros().unwrap_or(0).min(self.exponent);
        self.numerator >>= tz;
        self.exponent -= tz;
    }

    pub fn numerator(&self) -> &BigInt {
        &self.numerator
    }

    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.exponent == 0
    }

    pub fn is_negative(&self) -> bool {
        self.numerator.is_negative()
    }

    pub fn to_integer(&self) -> Option<&BigInt> {
        self.is_integer().then_some(&self.numerator)
    }

    /// `self · 2^k`.
    pub fn mul_pow2(&self, k: i64) -> DyadicRational {
        if k >= 0 {
            let k = k as u64;
            if k <= self.exponent {
                DyadicRational::new(self.numerator.clone(), self.exponent - k)
            } else {
                DyadicRational::new(&self.numerator << (k - self.exponent), 0)
            }
        } else {
            DyadicRational::new(self.numerator.clone(), self.exponent + k.unsigned_abs())
        }
    }

    pub fn add(&self, other: &DyadicRational) -> DyadicRational {
        let e = self.exponent.max(other.exponent);
        let x = &self.numerator << (e - self.exponent);
        let y = &other.numerator << (e - other.exponent);
        DyadicRational::new(x + y, e)
    }

    pub fn neg(&self) -> DyadicRational {
        DyadicRational {
            numerator: -&self.numerator,
            exponent: self.exponent,
        }
    }

    pub fn sub(&self, other: &DyadicRational) -> DyadicRational {
        self.add(&other.neg())
    }

    /// Smallest integer `≥ self`.
    pub fn ceil(&self) -> BigInt {
        let den = BigInt::one() << self.exponent;
        Integer::div_ceil(&self.numerator, &den)
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent == 0 {
            write!(f, "{}", self.numerator)
        } else if self.exponent < 64 {
            write!(f, "{}/{}", self.numerator, 1u128 << self.exponent)
        } else {
            write!(f, "{}/2^{}", self.numerator, self.exponent)
        }
    }
}

impl fmt::Debug for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for DyadicRational {
    type Err = AffineError;

    /// Accepts `N`, `N/D` with `D` a power of two, or `N/2^k`.
    fn from_str(s: &str) -> Result<DyadicRational, AffineError> {
        let err = || AffineError::Dyadic(s.to_string());
        let s = s.trim();
        let (num, den) = match s.split_once('/') {
            None => (s, None),
            Some((n, d)) => (n.trim(), Some(d.trim())),
        };
        let numerator: BigInt = num.parse().map_err(|_| err())?;
        let exponent = match den {
            None => 0,
            Some(d) => {
                if let Some(k) = d.strip_prefix("2^") {
                    k.parse::<u64>().map_err(|_| err())?
                } else {
                    let d: BigInt = d.parse().map_err(|_| err())?;
                    if !d.is_positive() || !(&d & (&d - BigInt::one())).is_zero() {
                        return Err(err());
                    }
                    d.trailing_zeros().unwrap_or(0)
                }
            }
        };
        Ok(DyadicRational::new(numerator, exponent))
    }
}

impl Serialize for DyadicRational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `x ↦ 2^log_scale · x + shift`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct AffMap {
    pub log_scale: i64,
    pub shift: DyadicRational,
}

impl AffMap {
    pub fn new(log_scale: i64, shift: DyadicRational) -> AffMap {
        AffMap { log_scale, shift }
    }

    pub fn identity() -> AffMap {
        AffMap::new(0, DyadicRational::zero())
    }

    /// `a: x ↦ 2x`.
    pub fn a() -> AffMap {
        AffMap::new(1, DyadicRational::zero())
    }

    /// `b: x ↦ x + 1`.
    pub fn b() -> AffMap {
        AffMap::new(0, DyadicRational::from_int(1))
    }

    pub fn is_identity(&self) -> bool {
        self.log_scale == 0 && self.shift.is_zero()
    }

    pub fn apply(&self, x: &DyadicRational) -> DyadicRational {
        x.mul_pow2(self.log_scale).add(&self.shift)
    }
}

impl fmt::Display for AffMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a={},t={}", self.log_scale, self.shift)
    }
}

impl fmt::Debug for AffMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.log_scale, self.shift)
    }
}

impl FromStr for AffMap {
    type Err = AffineError;

    /// `a=K,t=SHIFT` or `K,SHIFT`.
    fn from_str(s: &str) -> Result<AffMap, AffineError> {
        let err = || AffineError::Map(s.to_string());
        let (left, right) = s.split_once(',').ok_or_else(err)?;
        let strip = |part: &str, key: &str| -> String {
            let part = part.trim();
            match part.split_once('=') {
                Some((k, v)) if k.trim() == key => v.trim().to_string(),
                _ => part.to_string(),
            }
        };
        let log_scale: i64 = strip(left, "a").parse().map_err(|_| err())?;
        let shift: DyadicRational = strip(right, "t").parse().map_err(|_| err())?;
        Ok(AffMap::new(log_scale, shift))
    }
}

/// `h = f ∘ g`, i.e. `h(x) = f(g(x))`.
pub fn compose(f: &AffMap, g: &AffMap) -> AffMap {
    AffMap::new(f.log_scale + g.log_scale, g.shift.mul_pow2(f.log_scale).add(&f.shift))
}

pub fn invert_map(f: &AffMap) -> AffMap {
    AffMap::new(-f.log_scale, f.shift.neg().mul_pow2(-f.log_scale))
}

/// The alphabet `{a, b}` used for affine words.
pub fn ab_alphabet() -> Alphabet {
    Alphabet::new(&["a", "b"]).expect("distinct names")
}

pub const GEN_A: Gen = Gen(0);
pub const GEN_B: Gen = Gen(1);

/// Left-to-right composition of the letters of `w` over `{a, b}`.
pub fn word_to_map(w: &Word) -> Result<AffMap, AffineError> {
    let mut acc = AffMap::identity();
    for l in w.letters() {
        let g = match l.gen() {
            GEN_A => AffMap::a(),
            GEN_B => AffMap::b(),
            _ => return Err(AffineError::Generator),
        };
        let g = match l.sign() {
            Sign::Plus => g,
            Sign::Minus => invert_map(&g),
        };
        acc = compose(&acc, &g);
    }
    Ok(acc)
}

/// Exact membership in `S`: nonnegative scale and nonnegative integer shift.
pub fn semigroup_member(f: &AffMap) -> bool {
    f.log_scale >= 0 && f.shift.is_integer() && !f.shift.is_negative()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ProductSide {
    /// `SS⁻¹ = {s₁ ∘ s₂⁻¹}`.
    SSinv,
    /// `S⁻¹S = {s₁⁻¹ ∘ s₂}`.
    SinvS,
}

impl ProductSide {
    pub fn notation(self) -> &'static str {
        match self {
            ProductSide::SSinv => "SS^-1",
            ProductSide::SinvS => "S^-1S",
        }
    }

    pub fn other(self) -> ProductSide {
        match self {
            ProductSide::SSinv => ProductSide::SinvS,
            ProductSide::SinvS => ProductSide::SSinv,
        }
    }
}

/// Exact membership in a two-factor product set.
///
/// `s₁s₂⁻¹ = (k₁ − k₂, t₁ − t₂·2^{k₁−k₂})`, so `SS⁻¹` is the set of maps whose
/// shift is an integer multiple of `2^{min(a, 0)}`. `s₁⁻¹s₂ = (k₂ − k₁, (t₂ − t₁)/2^{k₁})`
/// with `k₁` free, so `S⁻¹S` is every dyadic affine map.
pub fn product_set_member(f: &AffMap, side: ProductSide) -> bool {
    match side {
        ProductSide::SSinv => f.shift.exponent() <= (-f.log_scale).max(0) as u64,
        ProductSide::SinvS => true,
    }
}

/// The product set that is strictly contained in the other one.
///
/// Fixed by the closed forms above and re-derived by the oracles in tests:
/// `SS⁻¹ ⊊ S⁻¹S`, witnessed by `a⁻¹ b a = (0, 1/2)`.
pub const SMALLER_PRODUCT_SET: ProductSide = ProductSide::SSinv;

/// `bᵐaⁿ` representation `(m, n)` of a member of `S`.
pub fn semigroup_normal_form(f: &AffMap) -> Option<(BigInt, u64)> {
    semigroup_member(f).then(|| (f.shift.numerator().clone(), f.log_scale as u64))
}

/// The word `bᵐaⁿ`; only sensible for moderate `m`.
pub fn normal_form_word(f: &AffMap) -> Option<Word> {
    let (m, n) = semigroup_normal_form(f)?;
    let m = m.to_i64()?;
    let b = Word::letter(crate::freegroup::Letter::new(GEN_B, Sign::Plus));
    let a = Word::letter(crate::freegroup::Letter::new(GEN_A, Sign::Plus));
    Some(b.pow(m).multiply(&a.pow(n as i64)))
}

fn semigroup_map(k: u64, t: BigInt) -> AffMap {
    AffMap::new(k as i64, DyadicRational::from_bigint(t))
}

/// `(s₁, s₂) ∈ S²` with `f = s₁ ∘ s₂⁻¹`, when `f ∈ SS⁻¹`.
pub fn ssinv_witness(f: &AffMap) -> Option<(AffMap, AffMap)> {
    if !product_set_member(f, ProductSide::SSinv) {
        return None;
    }
    let a = f.log_scale;
    let (k1, k2) = if a >= 0 { (a as u64, 0) } else { (0, a.unsigned_abs()) };
    // t = t₁ − t₂·2^a; with m = t·2^{k2} an integer: m = t₁·2^{k2} − t₂·2^{k1}
    let m = f.shift.mul_pow2(k2 as i64);
    let m = m.to_integer().expect("member").clone();
    let (t1, t2) = if k2 == 0 {
        let scale = BigInt::one() << k1;
        if !m.is_negative() {
            (m, BigInt::zero())
        } else {
            let t2 = Integer::div_ceil(&-&m, &scale);
            (&m + &t2 * &scale, t2)
        }
    } else {
        let scale = BigInt::one() << k2;
        if !m.is_negative() {
            let t1 = Integer::div_ceil(&m, &scale);
            let t2 = &t1 * &scale - &m;
            (t1, t2)
        } else {
            (BigInt::zero(), -m)
        }
    };
    Some((semigroup_map(k1, t1), semigroup_map(k2, t2)))
}

/// `(s₁, s₂) ∈ S²` with `f = s₁⁻¹ ∘ s₂`.
pub fn sinvs_witness(f: &AffMap) -> Option<(AffMap, AffMap)> {
    let a = f.log_scale;
    let k1 = f.shift.exponent().max(if a < 0 { a.unsigned_abs() } else { 0 });
    let k2 = (k1 as i64 + a) as u64;
    let d = f
        .shift
        .mul_pow2(k1 as i64)
        .to_integer()
        .expect("k1 clears the denominator")
        .clone();
    let (t1, t2) = if d.is_negative() {
        (-d, BigInt::zero())
    } else {
        (BigInt::zero(), d)
    };
    Some((semigroup_map(k1, t1), semigroup_map(k2, t2)))
}

/// Base sets for the affine backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AffBase {
    /// The semigroup `S = ⟨a, b⟩`; budget is word length over `{a, b}`.
    Semigroup,
    /// Finite set of maps; fully enumerated.
    Finite(Vec<AffMap>),
}

/// The dyadic affine group with exact predicates for oscillators over `S`.
#[derive(Debug, Clone, Default)]
pub struct AffBackend;

impl AffBackend {
    pub fn new() -> AffBackend {
        AffBackend
    }
}

/// Distinct maps of positive words of length ≤ `radius`, shortest first,
/// each with its first (shortlex) word.
pub fn semigroup_ball(radius: usize) -> IndexMap<AffMap, Word> {
    let mut seen: IndexMap<AffMap, Word> = IndexMap::new();
    seen.insert(AffMap::identity(), Word::identity());
    let gens = [
        (
            Word::letter(crate::freegroup::Letter::new(GEN_A, Sign::Plus)),
            AffMap::a(),
        ),
        (
            Word::letter(crate::freegroup::Letter::new(GEN_B, Sign::Plus)),
            AffMap::b(),
        ),
    ];
    let mut layer = vec![(AffMap::identity(), Word::identity())];
    for _ in 0..radius {
        let mut next = Vec::new();
        for (f, w) in &layer {
            for (gw, g) in &gens {
                let h = compose(f, g);
                if !seen.contains_key(&h) {
                    let hw = w.multiply(gw);
                    seen.insert(h.clone(), hw.clone());
                    next.push((h, hw));
                }
            }
        }
        layer = next;
    }
    seen
}

impl GroupBackend for AffBackend {
    type Elem = AffMap;
    type Key = AffMap;
    type BaseSpec = AffBase;

    fn name(&self) -> String {
        "aff".into()
    }
    fn identity(&self) -> AffMap {
        AffMap::identity()
    }
    fn product(&self, f: &AffMap, g: &AffMap) -> AffMap {
        compose(f, g)
    }
    fn inverse(&self, f: &AffMap) -> AffMap {
        invert_map(f)
    }
    fn canonical_key(&self, f: &AffMap) -> AffMap {
        f.clone()
    }
    fn format(&self, f: &AffMap) -> String {
        f.to_string()
    }
    fn equal(&self, f: &AffMap, g: &AffMap) -> bool {
        f == g
    }
    fn describe_base(&self, spec: &AffBase) -> String {
        match spec {
            AffBase::Semigroup => "semigroup <a,b>".into(),
            AffBase::Finite(fs) => format!(
                "{{{}}}",
                fs.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; ")
            ),
        }
    }

    fn enumerate_base(&self, spec: &AffBase, factor_len: usize) -> Result<BaseEnumeration<AffMap>, OscillatorError> {
        Ok(match spec {
            AffBase::Semigroup => {
                let alphabet = ab_alphabet();
                BaseEnumeration {
                    elements: semigroup_ball(factor_len)
                        .into_iter()
                        .map(|(f, w)| BaseElement {
                            label: alphabet.format(&w),
                            weight: w.len(),
                            elem: f,
                        })
                        .collect(),
                    complete: false,
                }
            }
            AffBase::Finite(fs) => {
                let mut seen: IndexMap<AffMap, ()> = IndexMap::new();
                seen.insert(AffMap::identity(), ());
                for f in fs {
                    seen.insert(f.clone(), ());
                }
                BaseEnumeration {
                    elements: seen
                        .into_keys()
                        .map(|f| BaseElement {
                            label: f.to_string(),
                            weight: 1,
                            elem: f,
                        })
                        .collect(),
                    complete: true,
                }
            }
        })
    }

    /// `(±S)¹ = S`, `(±S)² = SS⁻¹` and `(±S)ⁿ` is everything for `n ≥ 3`
    /// since it contains `S⁻¹S`; `(∓S)¹ = S⁻¹` and `(∓S)ⁿ` is everything for `n ≥ 2`.
    fn decide(&self, spec: &AffBase, expr: OscillatorExpr, f: &AffMap) -> Decision<AffMap> {
        if *spec != AffBase::Semigroup {
            return Decision::Unknown;
        }
        let e = AffMap::identity;
        let n = expr.n();
        let pad = |mut v: Vec<AffMap>| {
            v.resize(n, e());
            v
        };
        match (expr.mirror(), n) {
            (false, 1) => {
                if semigroup_member(f) {
                    Decision::Member(Some(vec![f.clone()]))
                } else {
                    Decision::NonMember
                }
            }
            (false, 2) => match ssinv_witness(f) {
                Some((s1, s2)) => Decision::Member(Some(vec![s1, s2])),
                None => Decision::NonMember,
            },
            (false, _) => {
                let (s1, s2) = sinvs_witness(f).expect("total");
                Decision::Member(Some(pad(vec![e(), s1, s2])))
            }
            (true, 1) => {
                let g = invert_map(f);
                if semigroup_member(&g) {
                    Decision::Member(Some(vec![g]))
                } else {
                    Decision::NonMember
                }
            }
            (true, _) => {
                let (s1, s2) = sinvs_witness(f).expect("total");
                Decision::Member(Some(pad(vec![s1, s2])))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freegroup::reduced_ball;
    use crate::oscillator::{enumerate_oscillator, Budget, Factorization};
    use proptest::prelude::*;

    fn d(s: &str) -> DyadicRational {
        s.parse().unwrap()
    }

    fn m(k: i64, t: &str) -> AffMap {
        AffMap::new(k, d(t))
    }

    fn w(s: &str) -> Word {
        ab_alphabet().parse_word(s).unwrap()
    }

    #[test]
    fn dyadic_normalization_and_parsing() {
        assert_eq!(d("4/8"), d("1/2"));
        assert_eq!(d("6/2^2"), d("3/2"));
        assert_eq!(d("0/2^5").exponent(), 0);
        assert_eq!(d("-3/16").to_string(), "-3/16");
        assert!("1/3".parse::<DyadicRational>().is_err());
        assert!("x".parse::<DyadicRational>().is_err());
        assert_eq!(d("3/2").mul_pow2(1), d("3"));
        assert_eq!(d("3").mul_pow2(-2), d("3/4"));
        assert_eq!(d("1/2").add(&d("1/2")), d("1"));
        assert_eq!(d("-3/2").ceil(), BigInt::from(-1));
        assert_eq!(d("3/2").ceil(), BigInt::from(2));
    }

    #[test]
    fn map_literals() {
        assert_eq!("a=1,t=1/2".parse::<AffMap>().unwrap(), m(1, "1/2"));
        assert_eq!("1,1/2^1".parse::<AffMap>().unwrap(), m(1, "1/2"));
        assert_eq!("-2, 3".parse::<AffMap>().unwrap(), m(-2, "3"));
        assert!("1".parse::<AffMap>().is_err());
        let f = m(-3, "5/8");
        assert_eq!(f.to_string().parse::<AffMap>().unwrap(), f);
    }

    #[test]
    fn composition_examples() {
        let (a, b) = (AffMap::a(), AffMap::b());
        assert_eq!(compose(&a, &b), m(1, "2"));
        assert_eq!(compose(&b, &compose(&b, &a)), m(1, "2"));
        let f = m(3, "5/4");
        assert_eq!(compose(&f, &AffMap::identity()), f);
        assert_eq!(compose(&AffMap::identity(), &f), f);
        let x = d("7/2");
        assert_eq!(compose(&a, &b).apply(&x), a.apply(&b.apply(&x)));
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(invert_map(&AffMap::a()), m(-1, "0"));
        assert_eq!(invert_map(&AffMap::b()), m(0, "-1"));
    }

    #[test]
    fn word_evaluation() {
        assert_eq!(word_to_map(&w("a b")).unwrap(), m(1, "2"));
        assert_eq!(word_to_map(&w("b b a")).unwrap(), m(1, "2"));
        assert_eq!(word_to_map(&Word::identity()).unwrap(), AffMap::identity());
        assert_eq!(word_to_map(&w("a' b a")).unwrap(), m(0, "1/2"));
        let three = Alphabet::new(&["a", "b", "c"]).unwrap().parse_word("c").unwrap();
        assert_eq!(word_to_map(&three), Err(AffineError::Generator));
    }

    #[test]
    fn semigroup_examples() {
        assert!(semigroup_member(&m(1, "2")));
        assert!(!semigroup_member(&m(0, "1/2")));
        assert!(!semigroup_member(&m(-1, "0")));
        assert!(!semigroup_member(&m(0, "-1")));
    }

    #[test]
    fn base_of_budget_three_has_fourteen_maps() {
        let base = AffBackend.enumerate_base(&AffBase::Semigroup, 3).unwrap();
        assert_eq!(base.elements.len(), 14);
        // 15 words; the single collapse is ab = bba
        assert_eq!(crate::freegroup::positive_ball(&[GEN_A, GEN_B], 3).len(), 15);
    }

    // f ∈ S iff f = e or f = a∘g or f = b∘g with g ∈ S; shifts and scales
    // of members are nonnegative, which bounds the recursion
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
        let r =
            peel(&compose(&invert_map(&AffMap::a()), f), memo) || peel(&compose(&invert_map(&AffMap::b()), f), memo);
        memo.insert(f.clone(), r);
        r
    }

    #[test]
    fn semigroup_predicate_matches_enumeration_and_peeling() {
        let ball = semigroup_ball(12);
        for f in ball.keys() {
            assert!(semigroup_member(f), "{f:?}");
        }
        let mut memo = std::collections::HashMap::new();
        for word in reduced_ball(2, 8) {
            let f = word_to_map(&word).unwrap();
            assert_eq!(semigroup_member(&f), peel(&f, &mut memo), "{word:?}");
        }
    }

    #[test]
    fn normal_form_on_budget_ten() {
        for (f, _) in semigroup_ball(10) {
            let nf = normal_form_word(&f).unwrap();
            assert_eq!(word_to_map(&nf).unwrap(), f);
        }
    }

    #[test]
    fn product_set_witnesses() {
        for word in reduced_ball(2, 7) {
            let f = word_to_map(&word).unwrap();
            if let Some((s1, s2)) = ssinv_witness(&f) {
                assert!(semigroup_member(&s1) && semigroup_member(&s2));
                assert_eq!(compose(&s1, &invert_map(&s2)), f);
            } else {
                assert!(!product_set_member(&f, ProductSide::SSinv));
            }
            let (s1, s2) = sinvs_witness(&f).unwrap();
            assert!(semigroup_member(&s1) && semigroup_member(&s2));
            assert_eq!(compose(&invert_map(&s1), &s2), f);
        }
    }

    #[test]
    fn orientation_witness() {
        let half = m(0, "1/2");
        assert!(product_set_member(&half, ProductSide::SinvS));
        assert!(!product_set_member(&half, ProductSide::SSinv));
        assert!(product_set_member(&AffMap::identity(), ProductSide::SSinv));
        assert!(product_set_member(&half, SMALLER_PRODUCT_SET.other()));
        assert!(!product_set_member(&half, SMALLER_PRODUCT_SET));
    }

    #[test]
    fn smaller_side_at_budget_eight_is_inside_larger() {
        let b = AffBackend;
        let set = enumerate_oscillator(&b, &AffBase::Semigroup, OscillatorExpr::plus(2), Budget::new(8)).unwrap();
        for f in set.elements() {
            assert!(product_set_member(f, ProductSide::SSinv));
            assert!(product_set_member(f, ProductSide::SinvS));
        }
    }

    #[test]
    fn backend_decisions_verify() {
        let b = AffBackend;
        for n in 1..=4 {
            for mirror in [false, true] {
                let expr = OscillatorExpr::new(n, mirror).unwrap();
                let set = enumerate_oscillator(&b, &AffBase::Semigroup, expr, Budget::new(2)).unwrap();
                for word in reduced_ball(2, 4) {
                    let f = word_to_map(&word).unwrap();
                    match b.decide(&AffBase::Semigroup, expr, &f) {
                        Decision::Member(Some(fs)) => {
                            let fz = Factorization {
                                factors: fs,
                                signs: expr.sign_pattern(),
                            };
                            assert!(fz.verifies(&b, &f));
                            assert!(fz.factors.iter().all(semigroup_member));
                        }
                        Decision::NonMember => assert!(!set.contains(&b, &f)),
                        other => panic!("{other:?}"),
                    }
                }
            }
        }
    }

    #[test]
    fn keys_are_injective_on_budget_six_ball() {
        // the values at 0 and 1 determine an affine map
        let mut by_key = std::collections::HashMap::new();
        let mut by_action = std::collections::HashMap::new();
        let one = DyadicRational::from_int(1);
        for word in reduced_ball(2, 6) {
            let f = word_to_map(&word).unwrap();
            let action = (f.apply(&DyadicRational::zero()), f.apply(&one));
            let key = AffBackend.canonical_key(&f);
            assert_eq!(by_key.entry(key.clone()).or_insert_with(|| action.clone()), &action);
            assert_eq!(by_action.entry(action).or_insert(key.clone()), &key);
        }
    }

    fn arb_map() -> impl Strategy<Value = AffMap> {
        (-6i64..=6, -200i64..=200, 0u64..=6)
            .prop_map(|(k, n, e)| AffMap::new(k, DyadicRational::new(BigInt::from(n), e)))
    }

    fn arb_member() -> impl Strategy<Value = AffMap> {
        (0i64..=6, 0i64..=200).prop_map(|(k, t)| AffMap::new(k, DyadicRational::from_int(t)))
    }

    proptest! {
        #[test]
        fn group_axioms(f in arb_map(), g in arb_map(), h in arb_map()) {
            prop_assert_eq!(compose(&compose(&f, &g), &h), compose(&f, &compose(&g, &h)));
            prop_assert_eq!(compose(&f, &invert_map(&f)), AffMap::identity());
            prop_assert_eq!(compose(&invert_map(&f), &f), AffMap::identity());
            prop_assert_eq!(invert_map(&invert_map(&f)), f);
        }

        #[test]
        fn word_map_is_homomorphism(u in proptest::collection::vec((0u16..2, any::<bool>()), 0..12),
                                    v in proptest::collection::vec((0u16..2, any::<bool>()), 0..12)) {
            let mk = |xs: &[(u16, bool)]| crate::freegroup::reduce(&xs.iter().map(|&(g, p)| {
                if p { crate::freegroup::Letter::pos(g) } else { crate::freegroup::Letter::neg(g) }
            }).collect::<Vec<_>>());
            let (u, v) = (mk(&u), mk(&v));
            prop_assert_eq!(word_to_map(&u.multiply(&v)).unwrap(),
                            compose(&word_to_map(&u).unwrap(), &word_to_map(&v).unwrap()));
        }

        #[test]
        fn semigroup_closed(f in arb_member(), g in arb_member()) {
            prop_assert!(semigroup_member(&compose(&f, &g)));
        }

        #[test]
        fn membership_is_exact_on_random_maps(f in arb_map()) {
            let (s1, s2) = sinvs_witness(&f).unwrap();
            prop_assert_eq!(compose(&invert_map(&s1), &s2), f.clone());
            if let Some((s1, s2)) = ssinv_witness(&f) {
                prop_assert!(semigroup_member(&s1) && semigroup_member(&s2));
                prop_assert_eq!(compose(&s1, &invert_map(&s2)), f);
            }
        }
    }
}
