//! Base-set literals on the command line.

use anyhow::{anyhow, bail, Result};

use oscillo::affine::{AffBase, AffMap};
use oscillo::freegroup::{Alphabet, Word};
use oscillo::oscillator::FreeBase;

fn word(a: &Alphabet, s: &str) -> Result<Word> {
    a.parse_word(s.trim()).map_err(|e| anyhow!("{s:?}: {e}"))
}

fn braced(s: &str) -> Option<&str> {
    s.strip_prefix('{')?.strip_suffix('}')
}

/// `whole`, `<w>`, `{w1, w2}`, or `x,y` for the positive monoid on those
/// generators. `S` is the positive monoid on the whole alphabet.
pub fn parse_free_base(a: &Alphabet, text: &str) -> Result<FreeBase> {
    let t = text.trim();
    if t == "S" && a.gen("S").is_none() {
        return Ok(FreeBase::PositiveMonoid(a.gens()));
    }
    if t == "whole" {
        return Ok(FreeBase::Whole);
    }
    if let Some(inner) = t.strip_prefix('<').and_then(|r| r.strip_suffix('>')) {
        return Ok(FreeBase::CyclicSubgroup(word(a, inner)?));
    }
    if let Some(inner) = braced(t) {
        let ws = inner
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| word(a, s))
            .collect::<Result<_>>()?;
        return Ok(FreeBase::Finite(ws));
    }
    let mut gens = Vec::new();
    for name in t.split(',') {
        let name = name.trim();
        match a.gen(name) {
            Some(g) => gens.push(g),
            None => bail!("{name:?} is not a generator of {:?}", a.names()),
        }
    }
    Ok(FreeBase::PositiveMonoid(gens))
}

/// `S`, or `{a=1,t=0; a=0,t=1}` for a finite set of maps.
pub fn parse_aff_base(text: &str) -> Result<AffBase> {
    let t = text.trim();
    if t == "S" {
        return Ok(AffBase::Semigroup);
    }
    let inner = braced(t).ok_or_else(|| anyhow!("aff base must be S or {{map; map}}, got {t:?}"))?;
    let maps = inner
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<AffMap>().map_err(|e| anyhow!(e.to_string())))
        .collect::<Result<_>>()?;
    Ok(AffBase::Finite(maps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_literals() {
        let a = Alphabet::xy();
        assert_eq!(parse_free_base(&a, "x,y").unwrap(), FreeBase::PositiveMonoid(a.gens()));
        assert_eq!(parse_free_base(&a, "S").unwrap(), FreeBase::PositiveMonoid(a.gens()));
        assert_eq!(parse_free_base(&a, "whole").unwrap(), FreeBase::Whole);
        assert_eq!(
            parse_free_base(&a, "<x y'>").unwrap(),
            FreeBase::CyclicSubgroup(a.parse_word("x y'").unwrap())
        );
        assert_eq!(
            parse_free_base(&a, "{x, y x}").unwrap(),
            FreeBase::Finite(vec![a.parse_word("x").unwrap(), a.parse_word("y x").unwrap()])
        );
        assert!(parse_free_base(&a, "x,z").is_err());
    }

    #[test]
    fn aff_literals() {
        assert!(matches!(parse_aff_base("S").unwrap(), AffBase::Semigroup));
        match parse_aff_base("{a=1,t=0; 0,1/2}").unwrap() {
            AffBase::Finite(ms) => assert_eq!(ms.len(), 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_aff_base("T").is_err());
    }
}
