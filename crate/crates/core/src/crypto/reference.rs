use super::backend::{Backend, Operand};
use super::trace::{OpKind, OperandKind, OperationTrace, TraceLevel};
use super::{dec, dec_bool, CipherBool, Ciphertext, CryptoError, Envelope, PublicKey, SecretKey};
use crate::party::Party;

/// Reference-backend evaluation context held by one party.
///
/// Output ciphertexts get nonces from a per-evaluator counter under a random
/// base, so evaluation needs no locking and is reproducible from a seed.
pub struct Evaluator {
    pk: PublicKey,
    party: Party,
    nonce_base: u64,
    counter: u64,
    trace: OperationTrace,
}

impl Evaluator {
    pub fn new(pk: &PublicKey, party: Party) -> Self {
        let base = (pk.fresh_nonce() >> 64) as u64;
        Self::with_nonce_seed(pk, party, base)
    }

    pub fn with_nonce_seed(pk: &PublicKey, party: Party, nonce_seed: u64) -> Self {
        Evaluator {
            pk: pk.clone(),
            party,
            nonce_base: nonce_seed,
            counter: 0,
            trace: OperationTrace::new(TraceLevel::Off),
        }
    }

    pub fn with_trace(mut self, level: TraceLevel) -> Self {
        self.trace = OperationTrace::new(level);
        self
    }

    pub fn party(&self) -> Party {
        self.party
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.pk
    }

    pub fn trace(&self) -> &OperationTrace {
        &self.trace
    }

    pub fn take_trace(&mut self) -> OperationTrace {
        let level = self.trace.level;
        std::mem::replace(&mut self.trace, OperationTrace::new(level))
    }

    #[inline]
    fn next_nonce(&mut self) -> u128 {
        self.counter += 1;
        ((self.nonce_base as u128) << 64) | self.counter as u128
    }

    #[inline]
    fn seal(&mut self, value: u64) -> Envelope {
        let nonce = self.next_nonce();
        self.pk.seal(value, nonce)
    }

    #[inline]
    fn operand(&self, b: Operand<'_, Ciphertext>) -> Result<(u8, OperandKind), CryptoError> {
        match b {
            Operand::Cipher(c) => Ok((self.pk.open(&c.0)? as u8, OperandKind::Cipher)),
            Operand::Plain(v) => Ok((v, OperandKind::Plain)),
        }
    }

    #[inline]
    fn binary<T>(
        &mut self,
        op: OpKind,
        a: &Ciphertext,
        b: Operand<'_, Ciphertext>,
        f: impl FnOnce(u8, u8) -> u64,
        wrap: impl FnOnce(Envelope) -> T,
    ) -> Result<T, CryptoError> {
        let x = self.pk.open(&a.0)? as u8;
        let (y, kind) = self.operand(b)?;
        self.trace.record(self.party, op, &[OperandKind::Cipher, kind]);
        Ok(wrap(self.seal(f(x, y))))
    }

    #[inline]
    fn logic(&mut self, op: OpKind, a: &CipherBool, b: &CipherBool, f: impl FnOnce(u64, u64) -> u64) -> Result<CipherBool, CryptoError> {
        let x = self.pk.open(&a.0)? & 1;
        let y = self.pk.open(&b.0)? & 1;
        self.trace.record(self.party, op, &[OperandKind::Cipher, OperandKind::Cipher]);
        Ok(CipherBool(self.seal(f(x, y))))
    }
}

impl Backend for Evaluator {
    type Cipher = Ciphertext;
    type Bool = CipherBool;

    fn encrypt_byte(&mut self, value: u8) -> Ciphertext {
        self.trace.record(self.party, OpKind::Enc, &[OperandKind::Plain]);
        Ciphertext(self.seal(value as u64))
    }

    fn encrypt_bool(&mut self, value: bool) -> CipherBool {
        self.trace.record(self.party, OpKind::Enc, &[OperandKind::Plain]);
        CipherBool(self.seal(value as u64))
    }

    fn add(&mut self, a: &Ciphertext, b: Operand<'_, Ciphertext>) -> Result<Ciphertext, CryptoError> {
        self.binary(OpKind::Add, a, b, |x, y| x.wrapping_add(y) as u64, Ciphertext)
    }

    fn sub(&mut self, a: &Ciphertext, b: Operand<'_, Ciphertext>) -> Result<Ciphertext, CryptoError> {
        self.binary(OpKind::Sub, a, b, |x, y| x.wrapping_sub(y) as u64, Ciphertext)
    }

    fn mul(&mut self, a: &Ciphertext, b: Operand<'_, Ciphertext>) -> Result<Ciphertext, CryptoError> {
        self.binary(OpKind::Mul, a, b, |x, y| x.wrapping_mul(y) as u64, Ciphertext)
    }

    fn eq(&mut self, a: &Ciphertext, b: Operand<'_, Ciphertext>) -> Result<CipherBool, CryptoError> {
        self.binary(OpKind::Eq, a, b, |x, y| (x == y) as u64, CipherBool)
    }

    fn gt(&mut self, a: &Ciphertext, b: Operand<'_, Ciphertext>) -> Result<CipherBool, CryptoError> {
        self.binary(OpKind::Gt, a, b, |x, y| (x > y) as u64, CipherBool)
    }

    fn lt(&mut self, a: &Ciphertext, b: Operand<'_, Ciphertext>) -> Result<CipherBool, CryptoError> {
        self.binary(OpKind::Lt, a, b, |x, y| (x < y) as u64, CipherBool)
    }

    fn and(&mut self, a: &CipherBool, b: &CipherBool) -> Result<CipherBool, CryptoError> {
        self.logic(OpKind::And, a, b, |x, y| x & y)
    }

    fn or(&mut self, a: &CipherBool, b: &CipherBool) -> Result<CipherBool, CryptoError> {
        self.logic(OpKind::Or, a, b, |x, y| x | y)
    }

    fn xnor(&mut self, a: &CipherBool, b: &CipherBool) -> Result<CipherBool, CryptoError> {
        self.logic(OpKind::Xnor, a, b, |x, y| (x == y) as u64)
    }

    fn not(&mut self, a: &CipherBool) -> Result<CipherBool, CryptoError> {
        let x = self.pk.open(&a.0)? & 1;
        self.trace.record(self.party, OpKind::Not, &[OperandKind::Cipher]);
        Ok(CipherBool(self.seal(x ^ 1)))
    }

    fn bool_as_byte(&self, b: &CipherBool) -> Ciphertext {
        Ciphertext(b.0)
    }
}

/// Decryption context. Only a holder of the secret key can build one, and
/// every decryption is attributed to the holder's party in the trace.
pub struct Decryptor<'a> {
    sk: &'a SecretKey,
    party: Party,
    trace: OperationTrace,
}

impl<'a> Decryptor<'a> {
    pub fn new(sk: &'a SecretKey, party: Party, level: TraceLevel) -> Self {
        Decryptor {
            sk,
            party,
            trace: OperationTrace::new(level),
        }
    }

    pub fn dec(&mut self, c: &Ciphertext) -> Result<u8, CryptoError> {
        self.trace.record(self.party, OpKind::Dec, &[OperandKind::Cipher]);
        dec(c, self.sk)
    }

    pub fn dec_bool(&mut self, c: &CipherBool) -> Result<bool, CryptoError> {
        self.trace.record(self.party, OpKind::Dec, &[OperandKind::Cipher]);
        dec_bool(c, self.sk)
    }

    pub fn take_trace(&mut self) -> OperationTrace {
        let level = self.trace.level;
        std::mem::replace(&mut self.trace, OperationTrace::new(level))
    }
}

#[cfg(test)]
mod tests {
    use super::super::{dec, dec_bool, enc, enc_bool, keygen_seeded, KeyPair};
    use super::*;

    fn setup() -> (KeyPair, Evaluator) {
        let kp = keygen_seeded(128, 11).unwrap();
        let ev = Evaluator::with_nonce_seed(&kp.pk, Party::A, 5).with_trace(TraceLevel::Full);
        (kp, ev)
    }

    #[test]
    fn arithmetic_with_plain_operands() {
        let (kp, mut ev) = setup();
        let a = enc(0x41, &kp.pk);
        assert_eq!(dec(&ev.add(&a, Operand::Plain(0x20)).unwrap(), &kp.sk).unwrap(), 0x61);
        let b = enc(0x61, &kp.pk);
        assert_eq!(dec(&ev.sub(&b, Operand::Plain(0x20)).unwrap(), &kp.sk).unwrap(), 0x41);
        let d = ev.sub(&enc(5, &kp.pk), Operand::Cipher(&enc(3, &kp.pk))).unwrap();
        let p = ev.mul(&enc(1, &kp.pk), Operand::Cipher(&d)).unwrap();
        assert_eq!(dec(&p, &kp.sk).unwrap(), 2);
    }

    #[test]
    fn wraps_modulo_256() {
        let (kp, mut ev) = setup();
        let c = ev.add(&enc(0xff, &kp.pk), Operand::Plain(2)).unwrap();
        assert_eq!(dec(&c, &kp.sk).unwrap(), 1);
        let c = ev.sub(&enc(0, &kp.pk), Operand::Plain(1)).unwrap();
        assert_eq!(dec(&c, &kp.sk).unwrap(), 0xff);
    }

    #[test]
    fn comparisons_and_logic() {
        let (kp, mut ev) = setup();
        let t = ev.gt(&enc(0x41, &kp.pk), Operand::Plain(0x40)).unwrap();
        assert!(dec_bool(&t, &kp.sk).unwrap());
        let x = enc(0x61, &kp.pk);
        let y = enc(0x61, &kp.pk);
        assert_ne!(x.payload(), y.payload());
        assert!(dec_bool(&ev.eq(&x, Operand::Cipher(&y)).unwrap(), &kp.sk).unwrap());
        let f = enc_bool(false, &kp.pk);
        let nor = ev.or(&f, &f).unwrap();
        assert!(dec_bool(&ev.not(&nor).unwrap(), &kp.sk).unwrap());
        let and = ev.and(&enc_bool(true, &kp.pk), &f).unwrap();
        assert!(!dec_bool(&and, &kp.sk).unwrap());
    }

    #[test]
    fn choose_selects_without_branching() {
        let (kp, mut ev) = setup();
        let a = enc(7, &kp.pk);
        let b = enc(9, &kp.pk);
        let t = enc_bool(true, &kp.pk);
        let f = enc_bool(false, &kp.pk);
        assert_eq!(dec(&ev.choose(&t, &a, &b).unwrap(), &kp.sk).unwrap(), 7);
        ev.take_trace();
        assert_eq!(dec(&ev.choose(&f, &a, &b).unwrap(), &kp.sk).unwrap(), 9);
        let ops: Vec<_> = ev.trace().events.iter().map(|e| e.op).collect();
        assert_eq!(ops, vec![OpKind::Sub, OpKind::Mul, OpKind::Add]);
    }

    #[test]
    fn cross_key_operands_rejected() {
        let (kp, mut ev) = setup();
        let other = keygen_seeded(128, 12).unwrap();
        let foreign = enc(1, &other.pk);
        assert_eq!(ev.add(&foreign, Operand::Plain(1)), Err(CryptoError::KeyMismatch));
        assert_eq!(
            ev.eq(&enc(1, &kp.pk), Operand::Cipher(&foreign)),
            Err(CryptoError::KeyMismatch)
        );
        let fb = enc_bool(true, &other.pk);
        assert!(ev.and(&enc_bool(true, &kp.pk), &fb).is_err());
        assert!(ev.choose(&fb, &enc(1, &kp.pk), &enc(2, &kp.pk)).is_err());
    }

    #[test]
    fn decryptor_traces_its_party() {
        let (kp, mut ev) = setup();
        let mut d = Decryptor::new(&kp.sk, Party::C, TraceLevel::Counts);
        let b = ev.encrypt_bool(true);
        assert!(d.dec_bool(&b).unwrap());
        let t = d.take_trace();
        assert_eq!(t.count(Party::C, OpKind::Dec), 1);
        assert_eq!(ev.trace().count(Party::A, OpKind::Dec), 0);
    }
}
