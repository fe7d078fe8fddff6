//! Words in free groups.
//!
//! A [`Word`] is always freely reduced; the reduced letter sequence is the
//! canonical form, so derived `Eq`/`Hash` decide equality in the free group.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FreeGroupError {
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("letter sequence is not freely reduced at position {position}")]
    NotReduced { position: usize },
    #[error("duplicate generator name `{0}`")]
    DuplicateGenerator(String),
    #[error("alphabet capacity exceeded")]
    AlphabetFull,
}

/// Index of a generator in an [`Alphabet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Gen(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

impl Serialize for Sign {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

impl<'de> Deserialize<'de> for Sign {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "+" => Ok(Sign::Plus),
            "-" => Ok(Sign::Minus),
            other => Err(serde::de::Error::custom(format!("bad sign `{other}`"))),
        }
    }
}

/// A generator or its inverse, packed as `±(gen + 1)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(i32);

impl Letter {
    pub fn new(gen: Gen, sign: Sign) -> Letter {
        let v = gen.0 as i32 + 1;
        match sign {
            Sign::Plus => Letter(v),
            Sign::Minus => Letter(-v),
        }
    }

    pub fn pos(gen: u16) -> Letter {
        Letter::new(Gen(gen), Sign::Plus)
    }

    pub fn neg(gen: u16) -> Letter {
        Letter::new(Gen(gen), Sign::Minus)
    }

    pub fn gen(self) -> Gen {
        Gen((self.0.unsigned_abs() - 1) as u16)
    }

    pub fn sign(self) -> Sign {
        if self.0 > 0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn inverse(self) -> Letter {
        Letter(-self.0)
    }

    fn cancels(self, other: Letter) -> bool {
        self.0 == -other.0
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}{}", self.gen().0, if self.is_positive() { "" } else { "'" })
    }
}

/// A freely reduced word. The empty word is the identity.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(Vec<Letter>);

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self.0.iter().map(|l| format!("{l:?}")).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Freely reduce an arbitrary letter sequence.
pub fn reduce(raw: &[Letter]) -> Word {
    let mut out: Vec<Letter> = Vec::with_capacity(raw.len());
    for &l in raw {
        match out.last() {
            Some(&top) if top.cancels(l) => {
                out.pop();
            }
            _ => out.push(l),
        }
    }
    Word(out)
}

/// Alternating sign blocks of a reduced word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub sign: Sign,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockDecomposition {
    pub blocks: Vec<Block>,
}

impl BlockDecomposition {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn signs(&self) -> Vec<Sign> {
        self.blocks.iter().map(|b| b.sign).collect()
    }
}

impl Word {
    pub fn identity() -> Word {
        Word(Vec::new())
    }

    pub fn letter(l: Letter) -> Word {
        Word(vec![l])
    }

    /// Accepts only sequences that are already freely reduced.
    pub fn try_from_reduced(letters: Vec<Letter>) -> Result<Word, FreeGroupError> {
        if let Some(position) = first_cancellation(&letters) {
            return Err(FreeGroupError::NotReduced { position });
        }
        Ok(Word(letters))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn multiply(&self, other: &Word) -> Word {
        let mut k = 0;
        let (a, b) = (&self.0, &other.0);
        while k < a.len() && k < b.len() && a[a.len() - 1 - k].cancels(b[k]) {
            k += 1;
        }
        let mut out = Vec::with_capacity(a.len() + b.len() - 2 * k);
        out.extend_from_slice(&a[..a.len() - k]);
        out.extend_from_slice(&b[k..]);
        Word(out)
    }

    pub fn invert(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn pow(&self, n: i64) -> Word {
        let base = if n < 0 { self.invert() } else { self.clone() };
        let mut acc = Word::identity();
        for _ in 0..n.unsigned_abs() {
            acc = acc.multiply(&base);
        }
        acc
    }

    /// `g · self · g⁻¹`
    pub fn conjugate_by(&self, g: &Word) -> Word {
        g.multiply(self).multiply(&g.invert())
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        match (self.0.first(), self.0.last()) {
            (Some(&f), Some(&l)) => self.0.len() == 1 || !f.cancels(l),
            _ => true,
        }
    }

    /// Returns `(core, conjugator)` with `self = conjugator · core · conjugator⁻¹`.
    pub fn cyclic_reduce(&self) -> (Word, Word) {
        let n = self.0.len();
        let mut k = 0;
        while 2 * k + 1 < n && self.0[k].cancels(self.0[n - 1 - k]) {
            k += 1;
        }
        (Word(self.0[k..n - k].to_vec()), Word(self.0[..k].to_vec()))
    }

    pub fn blocks(&self) -> BlockDecomposition {
        let mut blocks: Vec<Block> = Vec::new();
        for (i, l) in self.0.iter().enumerate() {
            match blocks.last_mut() {
                Some(b) if b.sign == l.sign() => b.len += 1,
                _ => blocks.push(Block {
                    sign: l.sign(),
                    start: i,
                    len: 1,
                }),
            }
        }
        BlockDecomposition { blocks }
    }

    pub fn block_count(&self) -> usize {
        if self.0.is_empty() {
            return 0;
        }
        1 + self
            .0
            .windows(2)
            .filter(|w| w[0].is_positive() != w[1].is_positive())
            .count()
    }

    pub fn exponent_sum(&self, g: Gen) -> i64 {
        self.0.iter().filter(|l| l.gen() == g).map(|l| l.sign().as_i64()).sum()
    }

    pub fn is_positive(&self) -> bool {
        self.0.iter().all(|l| l.is_positive())
    }

    pub fn subword(&self, start: usize, len: usize) -> Word {
        Word(self.0[start..start + len].to_vec())
    }

    pub fn max_gen(&self) -> Option<Gen> {
        self.0.iter().map(|l| l.gen()).max()
    }

    pub fn map_gens(&self, f: impl Fn(Gen) -> Gen) -> Word {
        reduce(
            &self
                .0
                .iter()
                .map(|l| Letter::new(f(l.gen()), l.sign()))
                .collect::<Vec<_>>(),
        )
    }
}

fn first_cancellation(letters: &[Letter]) -> Option<usize> {
    letters.windows(2).position(|w| w[0].cancels(w[1]))
}

/// All reduced words of length exactly `len` over `rank` generators, in
/// lexicographic order of the packed letters.
pub fn reduced_words_of_length(rank: u16, len: usize) -> Vec<Word> {
    let letters: Vec<Letter> = (0..rank).flat_map(|g| [Letter::pos(g), Letter::neg(g)]).collect();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(len);
    fn go(letters: &[Letter], len: usize, cur: &mut Vec<Letter>, out: &mut Vec<Word>) {
        if cur.len() == len {
            out.push(Word(cur.clone()));
            return;
        }
        for &l in letters {
            if let Some(&last) = cur.last() {
                if last.cancels(l) {
                    continue;
                }
            }
            cur.push(l);
            go(letters, len, cur, out);
            cur.pop();
        }
    }
    go(&letters, len, &mut cur, &mut out);
    out
}

/// The ball of reduced words of length `<= radius`, shortest first.
pub fn reduced_ball(rank: u16, radius: usize) -> Vec<Word> {
    (0..=radius).flat_map(|l| reduced_words_of_length(rank, l)).collect()
}

/// Positive words of length `<= radius` over the listed generators, shortest first.
pub fn positive_ball(gens: &[Gen], radius: usize) -> Vec<Word> {
    let mut out = vec![Word::identity()];
    let mut layer = vec![Word::identity()];
    for _ in 0..radius {
        let mut next = Vec::with_capacity(layer.len() * gens.len());
        for w in &layer {
            for &g in gens {
                let mut v = w.0.clone();
                v.push(Letter::new(g, Sign::Plus));
                next.push(Word(v));
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Generator names. Ids are dense `0..len`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u16>,
}

impl Alphabet {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Alphabet, FreeGroupError> {
        let mut a = Alphabet {
            names: Vec::new(),
            index: HashMap::new(),
        };
        for n in names {
            a.push(n.as_ref())?;
        }
        Ok(a)
    }

    pub fn xy() -> Alphabet {
        Alphabet::new(&["x", "y"]).expect("static alphabet")
    }

    pub fn push(&mut self, name: &str) -> Result<Gen, FreeGroupError> {
        if !is_identifier(name) {
            return Err(FreeGroupError::Syntax {
                pos: 0,
                msg: format!("`{name}` is not an identifier"),
            });
        }
        if self.index.contains_key(name) {
            return Err(FreeGroupError::DuplicateGenerator(name.to_string()));
        }
        let id = u16::try_from(self.names.len()).map_err(|_| FreeGroupError::AlphabetFull)?;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        Ok(Gen(id))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn gen(&self, name: &str) -> Option<Gen> {
        self.index_lookup(name).map(Gen)
    }

    pub fn name(&self, g: Gen) -> &str {
        &self.names[g.0 as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn gens(&self) -> Vec<Gen> {
        (0..self.names.len() as u16).map(Gen).collect()
    }

    fn index_lookup(&self, name: &str) -> Option<u16> {
        if self.index.len() == self.names.len() {
            self.index.get(name).copied()
        } else {
            // deserialized without the index
            self.names.iter().position(|n| n == name).map(|i| i as u16)
        }
    }

    /// Build an alphabet from the identifiers of `text`, in order of first appearance.
    pub fn infer(text: &str) -> Result<Alphabet, FreeGroupError> {
        let mut a = Alphabet {
            names: Vec::new(),
            index: HashMap::new(),
        };
        for tok in tokenize(text)? {
            if tok.name != "e" && a.gen(&tok.name).is_none() {
                a.push(&tok.name)?;
            }
        }
        Ok(a)
    }

    /// Parse letters without reducing.
    pub fn parse_raw(&self, text: &str) -> Result<Vec<Letter>, FreeGroupError> {
        let single_char = self.names.iter().all(|n| n.chars().count() == 1);
        let mut out = Vec::new();
        for tok in tokenize(text)? {
            let sign = if tok.inverted { Sign::Minus } else { Sign::Plus };
            if let Some(g) = self.gen(&tok.name) {
                out.push(Letter::new(g, sign));
            } else if tok.name == "e" {
                if tok.inverted {
                    // e' = e
                }
            } else if single_char && tok.name.chars().all(|c| self.gen(&c.to_string()).is_some()) {
                let chars: Vec<char> = tok.name.chars().collect();
                for (i, c) in chars.iter().enumerate() {
                    let g = self.gen(&c.to_string()).expect("checked");
                    let s = if i + 1 == chars.len() { sign } else { Sign::Plus };
                    out.push(Letter::new(g, s));
                }
            } else {
                return Err(FreeGroupError::UnknownGenerator(tok.name));
            }
        }
        Ok(out)
    }

    /// Parse and freely reduce.
    pub fn parse_word(&self, text: &str) -> Result<Word, FreeGroupError> {
        Ok(reduce(&self.parse_raw(text)?))
    }

    /// Parse, rejecting input that is not already reduced.
    pub fn parse_reduced(&self, text: &str) -> Result<Word, FreeGroupError> {
        Word::try_from_reduced(self.parse_raw(text)?)
    }

    pub fn format(&self, w: &Word) -> String {
        format_letters(w.letters(), |g| self.name(g).to_string())
    }
}

/// Space-separated letters with `'` marking inverses; `e` for the empty word.
pub fn format_letters(letters: &[Letter], name: impl Fn(Gen) -> String) -> String {
    if letters.is_empty() {
        return "e".to_string();
    }
    let mut s = String::new();
    for (i, l) in letters.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&name(l.gen()));
        if !l.is_positive() {
            s.push('\'');
        }
    }
    s
}

fn is_identifier(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct Token {
    name: String,
    inverted: bool,
}

fn tokenize(text: &str) -> Result<Vec<Token>, FreeGroupError> {
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() || c == b'*' || c == b'.' {
            i += 1;
            continue;
        }
        if !(c.is_ascii_alphabetic() || c == b'_') {
            return Err(FreeGroupError::Syntax {
                pos: i,
                msg: format!("unexpected character `{}`", c as char),
            });
        }
        let start = i;
        while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
            i += 1;
        }
        let name = text[start..i].to_string();
        let mut inverted = false;
        loop {
            if i < bytes.len() && bytes[i] == b'\'' {
                inverted = !inverted;
                i += 1;
            } else if text[i..].starts_with("^-1") {
                inverted = !inverted;
                i += 3;
            } else if i < bytes.len() && bytes[i] == b'^' {
                return Err(FreeGroupError::Syntax {
                    pos: i,
                    msg: "only `^-1` exponents are supported".into(),
                });
            } else {
                break;
            }
        }
        out.push(Token { name, inverted });
    }
    Ok(out)
}
