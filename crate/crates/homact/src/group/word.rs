//! Raw words: the text grammar and the programmatic letter form.
//!
//! Text grammar, tokens joined by `.`, each optionally raised to `^k`:
//! `1` identity; `e<i>` finite table index; `<k>` integer (cyclic);
//! `a<j>` free generator; `<side>:(<word>)` amalgam factor syllable;
//! `s:(<word>)` element of Σ given by its table index word; `h:(<word>)`
//! HNN base element; `t` stable letter; `(<word>)` grouping.

use std::fmt;

use super::{Elem, Group, GroupKind};
use crate::error::{Error, Result};

/// One letter of a raw word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Letter {
    /// Finite table index.
    Index(u32),
    /// Integer of a cyclic group.
    Int(i64),
    /// Free generator a_j raised to a power.
    Gen(u32, i64),
    /// Word in factor 1 or 2 of an amalgam.
    Side(u8, Vec<Letter>),
    /// Element of the amalgamated subgroup Σ.
    Sigma(u32),
    /// Word in the base group of an HNN extension.
    Base(Vec<Letter>),
    /// Power of the stable letter.
    Stable(i64),
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidLetter(msg.into())
}

pub(super) fn from_letters(g: &Group, letters: &[Letter]) -> Result<Elem> {
    let mut out = g.identity();
    for l in letters {
        let e = letter(g, l)?;
        out = g.mul(&out, &e);
    }
    Ok(out)
}

fn letter(g: &Group, l: &Letter) -> Result<Elem> {
    match (g.kind(), l) {
        (GroupKind::Finite(t), Letter::Index(i)) if *i < t.order() => Ok(Elem::Fin(*i)),
        (GroupKind::Cyclic(n), Letter::Int(k)) => Ok(Elem::Int(match n {
            Some(n) => k.rem_euclid(*n as i64),
            None => *k,
        })),
        (GroupKind::Free(r), Letter::Gen(j, p)) if *j >= 1 && *j <= *r => {
            Ok(g.pow(&Elem::Word(vec![*j as i32]), *p))
        }
        (GroupKind::Amalgam(am), Letter::Side(j, w)) if *j == 1 || *j == 2 => {
            Ok(am.lift(*j, &from_letters(am.factor(*j), w)?))
        }
        (GroupKind::Amalgam(am), Letter::Sigma(s)) if *s < am.sigma().order() => Ok(am.lift_sigma(*s)),
        (GroupKind::Hnn(h), Letter::Base(w)) => Ok(h.lift(&from_letters(h.base(), w)?)),
        (GroupKind::Hnn(h), Letter::Stable(k)) => Ok(h.stable(*k)),
        _ => Err(bad(format!("{l:?} is not a letter of {}", g.name()))),
    }
}

/// Splits on `sep` outside parentheses.
fn split_depth(s: &str, sep: char) -> Result<Vec<&str>> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            return Err(bad(format!("unbalanced parentheses in {s:?}")));
        }
        if c == sep && depth == 0 {
            out.push(&s[start..i]);
            start = i + c.len_utf8();
        }
    }
    if depth != 0 {
        return Err(bad(format!("unbalanced parentheses in {s:?}")));
    }
    out.push(&s[start..]);
    Ok(out)
}

pub(super) fn parse(g: &Group, s: &str) -> Result<Elem> {
    let s = s.trim();
    if s.is_empty() {
        return Err(bad("empty word"));
    }
    let mut out = g.identity();
    for tok in split_depth(s, '.')? {
        let e = token(g, tok.trim())?;
        out = g.mul(&out, &e);
    }
    Ok(out)
}

fn token(g: &Group, tok: &str) -> Result<Elem> {
    // a trailing ^k outside parentheses is a power
    let parts = split_depth(tok, '^')?;
    if parts.len() == 2 {
        let k: i64 = parts[1].trim().parse().map_err(|_| bad(format!("bad exponent in {tok:?}")))?;
        return Ok(g.pow(&atom(g, parts[0].trim())?, k));
    }
    if parts.len() > 2 {
        return Err(bad(format!("too many exponents in {tok:?}")));
    }
    atom(g, tok)
}

fn inner(s: &str) -> &str {
    s.strip_prefix('(').and_then(|r| r.strip_suffix(')')).unwrap_or(s)
}

fn atom(g: &Group, a: &str) -> Result<Elem> {
    if a == "1" && !matches!(g.kind(), GroupKind::Cyclic(_)) {
        return Ok(g.identity());
    }
    if a.starts_with('(') && a.ends_with(')') {
        return parse(g, &a[1..a.len() - 1]);
    }
    match g.kind() {
        GroupKind::Finite(t) => {
            let i: u32 = a
                .strip_prefix('e')
                .and_then(|r| r.parse().ok())
                .ok_or_else(|| bad(format!("expected e<i>, got {a:?}")))?;
            if i >= t.order() {
                return Err(bad(format!("{a} out of range")));
            }
            Ok(Elem::Fin(i))
        }
        GroupKind::Cyclic(_) => {
            if a == "a" {
                return letter(g, &Letter::Int(1));
            }
            let k: i64 = a.parse().map_err(|_| bad(format!("expected integer, got {a:?}")))?;
            letter(g, &Letter::Int(k))
        }
        GroupKind::Free(_) => {
            let j: u32 = a
                .strip_prefix('a')
                .and_then(|r| r.parse().ok())
                .ok_or_else(|| bad(format!("expected a<j>, got {a:?}")))?;
            letter(g, &Letter::Gen(j, 1))
        }
        GroupKind::Amalgam(am) => {
            if let Some(r) = a.strip_prefix("s:") {
                let Elem::Fin(s) = parse(&sigma_group(am.sigma()), inner(r))? else { unreachable!() };
                return Ok(am.lift_sigma(s));
            }
            for j in 1..=2u8 {
                if let Some(r) = a.strip_prefix(&format!("{j}:")) {
                    return Ok(am.lift(j, &parse(am.factor(j), inner(r))?));
                }
            }
            Err(bad(format!("expected 1:(..), 2:(..) or s:(..), got {a:?}")))
        }
        GroupKind::Hnn(h) => {
            if a == "t" {
                return Ok(h.stable(1));
            }
            if let Some(r) = a.strip_prefix("h:") {
                return Ok(h.lift(&parse(h.base(), inner(r))?));
            }
            Err(bad(format!("expected t or h:(..), got {a:?}")))
        }
    }
}

fn sigma_group(t: &super::FiniteTable) -> Group {
    Group::finite("sigma", t.clone())
}

fn wrap(e: &Elem) -> String {
    let s = e.to_string();
    if s.contains('.') || s.contains(':') || s.contains('^') {
        format!("({s})")
    } else {
        s
    }
}

pub(super) fn display(e: &Elem, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if e.is_identity() && !matches!(e, Elem::Int(_) | Elem::Fin(_)) {
        return write!(f, "1");
    }
    match e {
        Elem::Fin(i) => write!(f, "e{i}"),
        Elem::Int(k) => write!(f, "{k}"),
        Elem::Word(w) => {
            let mut parts = Vec::new();
            let mut i = 0;
            while i < w.len() {
                let mut j = i;
                while j < w.len() && w[j] == w[i] {
                    j += 1;
                }
                let run = (j - i) as i64 * w[i].signum() as i64;
                let g = w[i].unsigned_abs();
                parts.push(if run == 1 { format!("a{g}") } else { format!("a{g}^{run}") });
                i = j;
            }
            write!(f, "{}", parts.join("."))
        }
        Elem::Amal(syl, s) => {
            let mut parts: Vec<String> = syl.iter().map(|(j, t)| format!("{j}:{}", wrap(t))).collect();
            if *s != 0 {
                parts.push(format!("s:e{s}"));
            }
            write!(f, "{}", parts.join("."))
        }
        Elem::Hnn(h, tail) => {
            let mut parts = Vec::new();
            if !h.is_identity() {
                parts.push(format!("h:{}", wrap(h)));
            }
            for (eps, r) in tail {
                parts.push(if *eps > 0 { "t".to_string() } else { "t^-1".to_string() });
                if !r.is_identity() {
                    parts.push(format!("h:{}", wrap(r)));
                }
            }
            write!(f, "{}", parts.join("."))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Amalgam, FiniteTable, Hnn};
    use super::*;

    fn z2_star_z3() -> Group {
        let am = Amalgam::free_product(Group::cyclic(2), Group::cyclic(3));
        Group::new("Z2*Z3", GroupKind::Amalgam(am))
    }

    #[test]
    fn free_product_syllable_reduction() {
        let zz = Group::new("Z*Z", GroupKind::Amalgam(Amalgam::free_product(Group::integers(), Group::integers())));
        let w = zz.word(&[Letter::Side(1, vec![Letter::Int(1)]), Letter::Side(2, vec![Letter::Int(0)]), Letter::Side(1, vec![Letter::Int(2)])]).unwrap();
        assert_eq!(w, Elem::Amal(vec![(1, Elem::Int(3))], 0));
        assert_eq!(zz.parse("1:1.2:0.1:2").unwrap(), w);
        assert_eq!(w.to_string(), "1:3");
    }

    #[test]
    fn hnn_britton_pinch() {
        // H = Z/2 = <σ>, Σ = H, θ = id: t σ t⁻¹ = σ
        let h = Group::cyclic(2);
        let hnn = Hnn::new(h, FiniteTable::cyclic(2), vec![Elem::Int(0), Elem::Int(1)], vec![Elem::Int(0), Elem::Int(1)]).unwrap();
        let g = Group::new("hnn", GroupKind::Hnn(hnn));
        let w = g.word(&[Letter::Stable(1), Letter::Base(vec![Letter::Int(1)]), Letter::Stable(-1)]).unwrap();
        assert_eq!(w, g.parse("h:1").unwrap());
        assert_eq!(g.parse("t.h:1.t^-1").unwrap(), w);
    }

    #[test]
    fn display_round_trips() {
        let g = z2_star_z3();
        for e in g.elements(60) {
            assert_eq!(g.parse(&e.to_string()).unwrap(), e, "{e}");
        }
    }
}
