//! Word problem in one-relator groups `⟨A | rᵖ⟩`, `p ≥ 2`.
//!
//! A nontrivial reduced word of the normal closure of `rᵖ` always contains a
//! subword of `rᵖ` or `r⁻ᵖ` longer than `(p-1)|r|`. Replacing such a subword by
//! the shorter remainder of the relator strictly shortens the word, so
//! repeating the step decides membership.

use indexmap::IndexSet;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::freegroup::{reduce, Alphabet, FreeGroupError, Letter, Word};

#[derive(Debug, Error)]
pub enum DehnError {
    #[error("relator root must be nonempty and cyclically reduced")]
    BadRelator,
    #[error("relator power must be at least 2, got {0}")]
    BadPower(u32),
    #[error("input word is not freely reduced at position {0}")]
    NotReduced(usize),
    #[error("length bound {bound} is shorter than the relator power ({relator_len})")]
    BoundTooSmall { bound: usize, relator_len: usize },
    #[error("closure exceeded the cap of {0} elements")]
    BudgetExceeded(usize),
    #[error("presentation file: {0}")]
    Format(String),
    #[error(transparent)]
    Word(#[from] FreeGroupError),
}

#[derive(Debug, Clone)]
pub struct OneRelator {
    alphabet: Alphabet,
    root: Word,
    power: u32,
    relator: Word,
    relator_inv: Word,
}

/// Which of `rᵖ`, `r⁻ᵖ` a subword was matched in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelatorSide {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LongSubword {
    pub position: usize,
    pub side: RelatorSide,
    /// Offset of the match inside the relator word.
    pub offset: usize,
    pub subword: Word,
    /// `c` with `s·c = e` in the quotient; `|c| < |s|`.
    pub complement: Word,
}

impl LongSubword {
    /// What `s` is rewritten to: the inverse of the complement.
    pub fn replacement(&self) -> Word {
        self.complement.invert()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DehnStep {
    pub position: usize,
    pub side: RelatorSide,
    pub offset: usize,
    #[serde(skip)]
    pub matched: Word,
    #[serde(skip)]
    pub replacement: Word,
    pub length_after: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DehnTrace {
    pub steps: Vec<DehnStep>,
}

impl OneRelator {
    pub fn new(alphabet: Alphabet, root: Word, power: u32) -> Result<OneRelator, DehnError> {
        if root.is_identity() || !root.is_cyclically_reduced() {
            return Err(DehnError::BadRelator);
        }
        if power < 2 {
            return Err(DehnError::BadPower(power));
        }
        let relator = root.pow(power as i64);
        let relator_inv = relator.invert();
        Ok(OneRelator {
            alphabet,
            root,
            power,
            relator,
            relator_inv,
        })
    }

    /// `⟨x, y | (x y⁻¹)ᵖ⟩`
    pub fn xy_torsion(power: u32) -> Result<OneRelator, DehnError> {
        let a = Alphabet::xy();
        let r = a.parse_word("x y'")?;
        OneRelator::new(a, r, power)
    }

    /// Three-line text format: `gens: x y`, `relator: x y'`, `power: 2`.
    pub fn parse(text: &str) -> Result<OneRelator, DehnError> {
        let mut gens = None;
        let mut relator = None;
        let mut power = None;
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| DehnError::Format(format!("expected `key: value`, got `{line}`")))?;
            match key.trim() {
                "gens" => gens = Some(value.split_whitespace().map(str::to_string).collect::<Vec<_>>()),
                "relator" => relator = Some(value.trim().to_string()),
                "power" => {
                    power = Some(
                        value
                            .trim()
                            .parse::<u32>()
                            .map_err(|e| DehnError::Format(format!("power: {e}")))?,
                    )
                }
                other => return Err(DehnError::Format(format!("unknown key `{other}`"))),
            }
        }
        let gens = gens.ok_or_else(|| DehnError::Format("missing `gens`".into()))?;
        let alphabet = Alphabet::new(&gens)?;
        let root = alphabet.parse_word(&relator.ok_or_else(|| DehnError::Format("missing `relator`".into()))?)?;
        let power = power.ok_or_else(|| DehnError::Format("missing `power`".into()))?;
        OneRelator::new(alphabet, root, power)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn root(&self) -> &Word {
        &self.root
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    /// `rᵖ`
    pub fn relator(&self) -> &Word {
        &self.relator
    }

    fn side_word(&self, side: RelatorSide) -> &Word {
        match side {
            RelatorSide::Positive => &self.relator,
            RelatorSide::Negative => &self.relator_inv,
        }
    }

    fn is_long(&self, len: usize) -> bool {
        len * self.power as usize > (self.power as usize - 1) * self.relator.len()
    }

    /// Longest qualifying subword, leftmost on ties; `rᵖ` is preferred over
    /// `r⁻ᵖ`, then the smallest offset.
    pub fn long_subword_search(&self, w: &Word) -> Option<LongSubword> {
        let letters = w.letters();
        let mut best: Option<(usize, usize, RelatorSide, usize)> = None; // (len, pos, side, offset)
        for pos in 0..letters.len() {
            for side in [RelatorSide::Positive, RelatorSide::Negative] {
                let rel = self.side_word(side).letters();
                for offset in 0..rel.len() {
                    let len = common_prefix(&letters[pos..], &rel[offset..]);
                    if self.is_long(len) && best.is_none_or(|b| len > b.0) {
                        best = Some((len, pos, side, offset));
                    }
                }
            }
        }
        best.map(|(len, position, side, offset)| {
            let rel = self.side_word(side).letters();
            let alpha = &rel[..offset];
            let beta = &rel[offset + len..];
            let mut c = beta.to_vec();
            c.extend_from_slice(alpha);
            LongSubword {
                position,
                side,
                offset,
                subword: w.subword(position, len),
                complement: reduce(&c),
            }
        })
    }

    /// Same as [`long_subword_search`](Self::long_subword_search) for raw input,
    /// rejecting sequences that are not freely reduced.
    pub fn long_subword_search_raw(&self, raw: &[Letter]) -> Result<Option<LongSubword>, DehnError> {
        let w = checked(raw)?;
        Ok(self.long_subword_search(&w))
    }

    pub fn dehn_reduce(&self, w: &Word) -> (Word, DehnTrace) {
        let mut cur = w.clone();
        let mut trace = DehnTrace::default();
        while let Some(hit) = self.long_subword_search(&cur) {
            let replacement = hit.replacement();
            let next = splice(&cur, hit.position, hit.subword.len(), &replacement);
            debug_assert!(next.len() < cur.len());
            trace.steps.push(DehnStep {
                position: hit.position,
                side: hit.side,
                offset: hit.offset,
                matched: hit.subword,
                replacement,
                length_after: next.len(),
            });
            cur = next;
        }
        (cur, trace)
    }

    pub fn dehn_reduce_raw(&self, raw: &[Letter]) -> Result<(Word, DehnTrace), DehnError> {
        Ok(self.dehn_reduce(&checked(raw)?))
    }

    pub fn is_trivial(&self, w: &Word) -> bool {
        let mut cur = w.clone();
        while let Some(hit) = self.long_subword_search(&cur) {
            cur = splice(&cur, hit.position, hit.subword.len(), &hit.replacement());
        }
        cur.is_identity()
    }

    /// Equality in the quotient.
    pub fn equal(&self, u: &Word, v: &Word) -> bool {
        self.is_trivial(&u.multiply(&v.invert()))
    }

    /// Replay a trace from `input`; returns the final word on success.
    pub fn replay(&self, input: &Word, trace: &DehnTrace) -> Option<Word> {
        let mut cur = input.clone();
        let mut last_len = cur.len();
        for step in &trace.steps {
            let end = step.position + step.matched.len();
            if end > cur.len() || &cur.letters()[step.position..end] != step.matched.letters() {
                return None;
            }
            let rel = self.side_word(step.side).letters();
            if step.offset + step.matched.len() > rel.len()
                || &rel[step.offset..step.offset + step.matched.len()] != step.matched.letters()
            {
                return None;
            }
            cur = splice(&cur, step.position, step.matched.len(), &step.replacement);
            if cur.len() != step.length_after || cur.len() >= last_len {
                return None;
            }
            last_len = cur.len();
        }
        Some(cur)
    }

    /// Express `input · final⁻¹` as a product of conjugates `g·r^{±p}·g⁻¹`.
    pub fn conjugate_decomposition(&self, input: &Word, trace: &DehnTrace) -> Vec<(Word, RelatorSide)> {
        let mut cur = input.clone();
        let mut out = Vec::with_capacity(trace.steps.len());
        for step in &trace.steps {
            let rel = self.side_word(step.side).letters();
            let alpha = reduce(&rel[..step.offset]);
            let prefix = reduce(&cur.letters()[..step.position]);
            out.push((prefix.multiply(&alpha.invert()), step.side));
            cur = splice(&cur, step.position, step.matched.len(), &step.replacement);
        }
        out
    }

    /// Multiply out a conjugate decomposition.
    pub fn expand(&self, parts: &[(Word, RelatorSide)]) -> Word {
        parts.iter().fold(Word::identity(), |acc, (g, side)| {
            acc.multiply(&self.side_word(*side).conjugate_by(g))
        })
    }

    /// Reduced words of length `<= bound` reachable as products of conjugates
    /// `g·r^{±p}·g⁻¹` (`|g| <= bound - |rᵖ|`) without leaving the ball.
    pub fn normal_closure_oracle(&self, bound: usize, cap: usize) -> Result<NormalClosureBall, DehnError> {
        let rlen = self.relator.len();
        if bound < rlen {
            return Err(DehnError::BoundTooSmall {
                bound,
                relator_len: rlen,
            });
        }
        let conjugator_budget = bound - rlen;
        let rank = self.alphabet.len() as u16;
        let mut members: IndexSet<Word> = IndexSet::new();
        members.insert(Word::identity());
        let mut frontier = Vec::new();
        // iterative deepening over conjugator length
        for radius in 0..=conjugator_budget {
            for g in crate::freegroup::reduced_words_of_length(rank, radius) {
                for rel in [&self.relator, &self.relator_inv] {
                    let c = rel.conjugate_by(&g);
                    if c.len() <= bound && members.insert(c.clone()) {
                        frontier.push(c);
                    }
                }
            }
        }
        if members.len() > cap {
            return Err(DehnError::BudgetExceeded(cap));
        }
        while !frontier.is_empty() {
            let snapshot: Vec<Word> = members.iter().cloned().collect();
            let found: Vec<Word> = frontier
                .par_iter()
                .flat_map_iter(|a| {
                    snapshot
                        .iter()
                        .flat_map(move |b| [a.multiply(b), b.multiply(a)])
                        .filter(|w| w.len() <= bound)
                })
                .collect();
            let mut next = Vec::new();
            for w in found {
                if members.insert(w.clone()) {
                    next.push(w);
                    if members.len() > cap {
                        return Err(DehnError::BudgetExceeded(cap));
                    }
                }
            }
            frontier = next;
        }
        Ok(NormalClosureBall {
            length_bound: bound,
            conjugator_budget,
            members,
        })
    }
}

/// Under-approximation of `N ∩ ball(length_bound)`.
#[derive(Debug, Clone)]
pub struct NormalClosureBall {
    pub length_bound: usize,
    pub conjugator_budget: usize,
    pub members: IndexSet<Word>,
}

impl NormalClosureBall {
    pub fn contains(&self, w: &Word) -> bool {
        self.members.contains(w)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn checked(raw: &[Letter]) -> Result<Word, DehnError> {
    Word::try_from_reduced(raw.to_vec()).map_err(|e| match e {
        FreeGroupError::NotReduced { position } => DehnError::NotReduced(position),
        other => DehnError::Word(other),
    })
}

fn common_prefix(a: &[Letter], b: &[Letter]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

fn splice(w: &Word, pos: usize, len: usize, replacement: &Word) -> Word {
    let l = w.letters();
    let mut raw = Vec::with_capacity(l.len() - len + replacement.len());
    raw.extend_from_slice(&l[..pos]);
    raw.extend_from_slice(replacement.letters());
    raw.extend_from_slice(&l[pos + len..]);
    reduce(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freegroup::reduced_ball;
    use proptest::prelude::*;

    fn pres(p: u32) -> OneRelator {
        OneRelator::xy_torsion(p).unwrap()
    }

    fn word(s: &str) -> Word {
        Alphabet::xy().parse_word(s).unwrap()
    }

    #[test]
    fn search_examples() {
        let g = pres(2);
        let hit = g.long_subword_search(&word("x y' x y'")).unwrap();
        assert_eq!(hit.subword, word("x y' x y'"));
        assert_eq!(hit.complement, Word::identity());
        assert_eq!(hit.position, 0);
        assert!(g.long_subword_search(&word("x")).is_none());
        let raw = Alphabet::xy().parse_raw("x y' x y' y").unwrap();
        assert!(matches!(g.long_subword_search_raw(&raw), Err(DehnError::NotReduced(3))));
        assert!(matches!(g.dehn_reduce_raw(&raw), Err(DehnError::NotReduced(_))));
    }

    #[test]
    fn complement_is_shorter_and_inverse_in_quotient() {
        for p in [2, 3] {
            let g = pres(p);
            for w in reduced_ball(2, 7) {
                if let Some(hit) = g.long_subword_search(&w) {
                    assert!(hit.complement.len() < hit.subword.len());
                    // s·c is a cyclic rotation of a relator, hence a conjugate of it
                    let sc = hit.subword.multiply(&hit.complement);
                    let (core, _) = sc.cyclic_reduce();
                    assert_eq!(core.len(), g.relator().len());
                }
            }
        }
    }

    #[test]
    fn reduce_examples() {
        let g = pres(2);
        let (out, trace) = g.dehn_reduce(&word("x y' x y'"));
        assert!(out.is_identity());
        assert_eq!(trace.steps.len(), 1);
        let conj = word("y x");
        let w = word("x y' x y'").conjugate_by(&conj);
        assert!(g.is_trivial(&w));
        let (out, trace) = g.dehn_reduce(&word("x"));
        assert_eq!(out, word("x"));
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn oracle_examples() {
        let g = pres(2);
        let ball = g.normal_closure_oracle(8, 1 << 20).unwrap();
        assert!(ball.contains(&word("x y' x y'")));
        assert!(ball.contains(&Word::identity()));
        for w in &ball.members {
            assert!(g.is_trivial(w), "{w:?}");
        }
        assert!(matches!(
            g.normal_closure_oracle(3, 100),
            Err(DehnError::BoundTooSmall { .. })
        ));
        assert!(matches!(
            g.normal_closure_oracle(8, 5),
            Err(DehnError::BudgetExceeded(5))
        ));
    }

    #[test]
    fn traces_replay_and_decompose() {
        for p in [2, 3] {
            let g = pres(p);
            for w in reduced_ball(2, 7) {
                let (out, trace) = g.dehn_reduce(&w);
                assert!(trace.steps.len() <= w.len());
                assert_eq!(g.replay(&w, &trace), Some(out.clone()));
                let parts = g.conjugate_decomposition(&w, &trace);
                assert_eq!(g.expand(&parts).multiply(&out), w);
                // no long subword survives
                assert!(g.long_subword_search(&out).is_none());
            }
        }
    }

    #[test]
    fn agrees_with_oracle_through_length_seven() {
        for p in [2, 3] {
            let g = pres(p);
            let ball = g.normal_closure_oracle(7.max(g.relator().len()), 1 << 20).unwrap();
            for w in reduced_ball(2, 7) {
                assert_eq!(g.is_trivial(&w), ball.contains(&w), "p={p} w={w:?}");
            }
        }
    }

    #[test]
    fn bad_presentations() {
        let a = Alphabet::xy();
        assert!(matches!(
            OneRelator::new(a.clone(), a.parse_word("x y x'").unwrap(), 2),
            Err(DehnError::BadRelator)
        ));
        assert!(matches!(
            OneRelator::new(a.clone(), Word::identity(), 2),
            Err(DehnError::BadRelator)
        ));
        assert!(matches!(
            OneRelator::new(a.clone(), a.parse_word("x").unwrap(), 1),
            Err(DehnError::BadPower(1))
        ));
    }

    #[test]
    fn parse_presentation_file() {
        let g = OneRelator::parse("gens: x y\nrelator: x y'\npower: 3\n").unwrap();
        assert_eq!(g.power(), 3);
        assert_eq!(g.relator().len(), 6);
        assert!(OneRelator::parse("gens: x y\npower: 3").is_err());
    }

    fn word_strategy(max: usize) -> impl Strategy<Value = Word> {
        prop::collection::vec(0..4i32, 0..max).prop_map(|v| {
            let ls: Vec<Letter> = v
                .into_iter()
                .map(|c| match c {
                    0 => Letter::pos(0),
                    1 => Letter::neg(0),
                    2 => Letter::pos(1),
                    _ => Letter::neg(1),
                })
                .collect();
            reduce(&ls)
        })
    }

    proptest! {
        #[test]
        fn conjugation_invariance(w in word_strategy(10), g in word_strategy(4), p in 2u32..4) {
            let pr = pres(p);
            prop_assert_eq!(pr.is_trivial(&w), pr.is_trivial(&w.conjugate_by(&g)));
        }

        #[test]
        fn products_of_relator_conjugates_are_trivial(
            gs in prop::collection::vec((word_strategy(5), any::<bool>()), 1..4),
            p in 2u32..4,
        ) {
            let pr = pres(p);
            let mut acc = Word::identity();
            for (g, inv) in &gs {
                let r = if *inv { pr.relator().invert() } else { pr.relator().clone() };
                acc = acc.multiply(&r.conjugate_by(g));
            }
            let (out, trace) = pr.dehn_reduce(&acc);
            prop_assert!(out.is_identity());
            let lens: Vec<usize> = std::iter::once(acc.len()).chain(trace.steps.iter().map(|s| s.length_after)).collect();
            prop_assert!(lens.windows(2).all(|w| w[1] < w[0]));
        }

        #[test]
        fn selection_rule_does_not_change_the_verdict(w in word_strategy(12), p in 2u32..4) {
            // rewrite at the rightmost qualifying position instead, compare verdicts
            let pr = pres(p);
            let mut cur = w.clone();
            loop {
                let letters = cur.letters().to_vec();
                let mut pick = None;
                for pos in (0..letters.len()).rev() {
                    for side in [RelatorSide::Negative, RelatorSide::Positive] {
                        let rel = pr.side_word(side).letters().to_vec();
                        for off in (0..rel.len()).rev() {
                            let len = common_prefix(&letters[pos..], &rel[off..]);
                            if pr.is_long(len) && pick.is_none() {
                                pick = Some((pos, len, side, off));
                            }
                        }
                    }
                }
                let Some((pos, len, side, off)) = pick else { break };
                let rel = pr.side_word(side).letters();
                let mut c = rel[..off].to_vec().iter().rev().map(|l| l.inverse()).collect::<Vec<_>>();
                c.extend(rel[off + len..].iter().rev().map(|l| l.inverse()));
                cur = splice(&cur, pos, len, &reduce(&c));
            }
            prop_assert_eq!(cur.is_identity(), pr.is_trivial(&w));
        }
    }
}
