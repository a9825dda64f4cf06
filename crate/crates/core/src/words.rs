//! Words in the generators and their cyclic canonical forms.
//!
//! Letters are small integers: generator `k` is `2k`, its inverse `2k + 1`,
//! printed as lowercase and uppercase (`a = 0`, `A = 1`, `b = 2`, `B = 3`, ...).
//! The integer order therefore is the alphabet order `a < A < b < B < ...`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Letter = u8;

pub const MAX_GENERATORS: u8 = 13;

#[inline]
pub fn inverse_letter(x: Letter) -> Letter {
    x ^ 1
}

pub fn letter_char(x: Letter) -> char {
    let base = (b'a' + (x >> 1)) as char;
    if x & 1 == 1 {
        base.to_ascii_uppercase()
    } else {
        base
    }
}

pub fn parse_letter(c: char) -> Option<Letter> {
    if !c.is_ascii_alphabetic() {
        return None;
    }
    let gen = c.to_ascii_lowercase() as u8 - b'a';
    (gen < MAX_GENERATORS).then_some(2 * gen + u8::from(c.is_ascii_uppercase()))
}

/// A finite word in the generators and their inverses.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn from_letters(letters: Vec<Letter>) -> Self {
        Word(letters)
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

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|w| w[1] != inverse_letter(w[0]))
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.is_reduced()
            && match (self.0.first(), self.0.last()) {
                (Some(&f), Some(&l)) => self.0.len() == 1 || f != inverse_letter(l),
                _ => true,
            }
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|&x| inverse_letter(x)).collect())
    }

    /// Free reduction.
    pub fn reduce(&self) -> Word {
        let mut out: Vec<Letter> = Vec::with_capacity(self.0.len());
        for &x in &self.0 {
            if out.last() == Some(&inverse_letter(x)) {
                out.pop();
            } else {
                out.push(x);
            }
        }
        Word(out)
    }

    /// Strips matching inverse letters from both ends of a reduced word.
    pub fn cyclic_core(&self) -> Word {
        let w = self.reduce().0;
        let (mut i, mut j) = (0, w.len());
        while j - i >= 2 && w[i] == inverse_letter(w[j - 1]) {
            i += 1;
            j -= 1;
        }
        Word(w[i..j].to_vec())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn repeat(&self, n: usize) -> Word {
        Word(self.0.repeat(n))
    }

    pub fn max_generator(&self) -> Option<u8> {
        self.0.iter().map(|x| x >> 1).max()
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| parse_letter(c).ok_or_else(|| Error::domain(format!("unknown letter {c:?} in word {s:?}"))))
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

impl TryFrom<String> for Word {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.to_string()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &x in &self.0 {
            write!(f, "{}", letter_char(x))?;
        }
        Ok(())
    }
}

/// Index of the lexicographically least rotation (Booth's algorithm).
pub fn least_rotation(s: &[Letter]) -> usize {
    let n = s.len();
    if n == 0 {
        return 0;
    }
    let at = |i: isize| s[i as usize % n];
    let mut fail = vec![-1isize; 2 * n];
    let mut k: isize = 0;
    for j in 1..2 * n as isize {
        let sj = at(j);
        let mut i = fail[(j - k - 1) as usize];
        while i != -1 && sj != at(k + i + 1) {
            if sj < at(k + i + 1) {
                k = j - i - 1;
            }
            i = fail[i as usize];
        }
        if sj != at(k + i + 1) {
            // here i == -1
            if sj < at(k) {
                k = j;
            }
            fail[(j - k) as usize] = -1;
        } else {
            fail[(j - k) as usize] = i + 1;
        }
    }
    k as usize % n
}

fn rotated(s: &[Letter], k: usize) -> Vec<Letter> {
    s[k..].iter().chain(&s[..k]).copied().collect()
}

/// Least rotation over the word and its formal inverse.
pub fn canonical_letters(s: &[Letter]) -> Vec<Letter> {
    let fwd = rotated(s, least_rotation(s));
    let inv: Vec<Letter> = s.iter().rev().map(|&x| inverse_letter(x)).collect();
    let bwd = rotated(&inv, least_rotation(&inv));
    fwd.min(bwd)
}

/// Smallest period `p` dividing `len` such that the word is a power of its
/// first `p` letters.
pub fn primitive_period(s: &[Letter]) -> usize {
    let n = s.len();
    if n == 0 {
        return 0;
    }
    // prefix function
    let mut pi = vec![0usize; n];
    for i in 1..n {
        let mut k = pi[i - 1];
        while k > 0 && s[i] != s[k] {
            k = pi[k - 1];
        }
        if s[i] == s[k] {
            k += 1;
        }
        pi[i] = k;
    }
    let p = n - pi[n - 1];
    if n.is_multiple_of(p) {
        p
    } else {
        n
    }
}

/// Unoriented free homotopy class of a cyclically reduced word, stored in
/// canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Word", into = "Word")]
pub struct CyclicWord(Word);

impl CyclicWord {
    pub fn new(word: &Word) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::domain("empty word has no closed geodesic"));
        }
        if !word.is_cyclically_reduced() {
            return Err(Error::domain(format!("{word} is not cyclically reduced")));
        }
        Ok(CyclicWord(Word(canonical_letters(word.letters()))))
    }

    /// Canonical class of the cyclic core of an arbitrary word.
    pub fn from_any(word: &Word) -> Result<Self> {
        Self::new(&word.cyclic_core())
    }

    pub fn word(&self) -> &Word {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_primitive(&self) -> bool {
        primitive_period(self.0.letters()) == self.0.len()
    }

    /// Primitive root and exponent.
    pub fn root(&self) -> (CyclicWord, usize) {
        let p = primitive_period(self.0.letters());
        let root = CyclicWord(Word(canonical_letters(&self.0.letters()[..p])));
        (root, self.0.len() / p)
    }
}

impl TryFrom<Word> for CyclicWord {
    type Error = Error;

    fn try_from(w: Word) -> Result<Self> {
        let c = CyclicWord::new(&w)?;
        if c.0 != w {
            return Err(Error::domain(format!("{w} is not in canonical form")));
        }
        Ok(c)
    }
}

impl From<CyclicWord> for Word {
    fn from(c: CyclicWord) -> Word {
        c.0
    }
}

impl FromStr for CyclicWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CyclicWord::new(&s.parse()?)
    }
}

impl fmt::Display for CyclicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}
