//! The built-in function library. Every loop bound depends only on public
//! lengths and no branch looks at a ciphertext.

use crate::crypto::{Backend, CryptoError, Operand};

/// Case conversion of one encrypted string.
///
/// For each character `c`, `cond = c > lo_exclusive && c < hi_exclusive`
/// selects between `c + delta` and `c`.
fn convert_case<B: Backend>(
    backend: &mut B,
    s: &[B::Cipher],
    lo_exclusive: u8,
    hi_exclusive: u8,
    shift: impl Fn(&mut B, &B::Cipher) -> Result<B::Cipher, CryptoError>,
) -> Result<Vec<B::Cipher>, CryptoError> {
    let mut out = Vec::with_capacity(s.len());
    for c in s {
        let above = backend.gt(c, Operand::Plain(lo_exclusive))?;
        let below = backend.lt(c, Operand::Plain(hi_exclusive))?;
        let cond = backend.and(&above, &below)?;
        let shifted = shift(backend, c)?;
        out.push(backend.choose(&cond, &shifted, c)?);
    }
    Ok(out)
}

/// Maps `A..=Z` to `a..=z`.
pub fn lower<B: Backend>(backend: &mut B, s: &[B::Cipher]) -> Result<Vec<B::Cipher>, CryptoError> {
    convert_case(backend, s, 0x40, 0x5b, |b, c| b.add(c, Operand::Plain(0x20)))
}

/// Maps `a..=z` to `A..=Z`.
pub fn upper<B: Backend>(backend: &mut B, s: &[B::Cipher]) -> Result<Vec<B::Cipher>, CryptoError> {
    convert_case(backend, s, 0x60, 0x7b, |b, c| b.sub(c, Operand::Plain(0x20)))
}

/// A pattern for [`is_in`]: the annotator's own plaintext or a ciphertext.
pub enum Pattern<'a, B: Backend> {
    Plain(&'a [u8]),
    Cipher(&'a [B::Cipher]),
}

impl<B: Backend> Pattern<'_, B> {
    fn len(&self) -> usize {
        match self {
            Pattern::Plain(p) => p.len(),
            Pattern::Cipher(p) => p.len(),
        }
    }

    fn at(&self, i: usize) -> Operand<'_, B::Cipher> {
        match self {
            Pattern::Plain(p) => Operand::Plain(p[i]),
            Pattern::Cipher(p) => Operand::Cipher(&p[i]),
        }
    }
}

/// Substring test by exhaustive sliding window.
///
/// Every window `j in 0..=len(text) - len(pattern)` is fully compared and
/// OR-ed into an accumulator that starts false, so exactly
/// `(len(text) - len(pattern) + 1) * len(pattern)` equality tests run when the
/// pattern fits, and none otherwise. The empty pattern matches.
pub fn is_in<B: Backend>(backend: &mut B, pattern: Pattern<'_, B>, text: &[B::Cipher]) -> Result<B::Bool, CryptoError> {
    let la = pattern.len();
    let lb = text.len();
    let mut res = backend.encrypt_bool(false);
    if la > lb {
        return Ok(res);
    }
    for j in 0..=(lb - la) {
        let mut window = backend.encrypt_bool(true);
        for i in 0..la {
            let hit = backend.eq(&text[j + i], pattern.at(i))?;
            window = backend.and(&window, &hit)?;
        }
        res = backend.or(&res, &window)?;
    }
    Ok(res)
}
