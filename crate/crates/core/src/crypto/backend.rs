use super::CryptoError;

/// Right-hand operand of a mixed plaintext/ciphertext operation.
#[derive(Debug)]
pub enum Operand<'a, C> {
    Cipher(&'a C),
    Plain(u8),
}

impl<C> Clone for Operand<'_, C> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<C> Copy for Operand<'_, C> {}

impl<'a, C> From<&'a C> for Operand<'a, C> {
    fn from(c: &'a C) -> Self {
        Operand::Cipher(c)
    }
}

/// What an encryption scheme must provide to evaluate annotation programs.
///
/// Integer ciphertexts hold one byte; arithmetic wraps modulo 256. Boolean
/// ciphertexts hold 0 or 1 and share the integer encoding, so
/// [`Backend::bool_as_byte`] is a re-labelling rather than a computation. Every
/// operation runs without knowledge of the plaintexts, so no implementation
/// may branch on them.
///
/// [`crate::crypto::Evaluator`] is the reference implementation. A lattice
/// scheme (BGV/BFV over a plaintext modulus of 256, or a bitwise TFHE
/// encoding) plugs in here; SIMD batching would vectorise the per-character
/// loops in `interp::builtins` and is not modelled.
pub trait Backend {
    type Cipher: Clone;
    type Bool: Clone;

    fn encrypt_byte(&mut self, value: u8) -> Self::Cipher;
    fn encrypt_bool(&mut self, value: bool) -> Self::Bool;

    fn add(&mut self, a: &Self::Cipher, b: Operand<'_, Self::Cipher>) -> Result<Self::Cipher, CryptoError>;
    fn sub(&mut self, a: &Self::Cipher, b: Operand<'_, Self::Cipher>) -> Result<Self::Cipher, CryptoError>;
    fn mul(&mut self, a: &Self::Cipher, b: Operand<'_, Self::Cipher>) -> Result<Self::Cipher, CryptoError>;

    fn eq(&mut self, a: &Self::Cipher, b: Operand<'_, Self::Cipher>) -> Result<Self::Bool, CryptoError>;
    fn gt(&mut self, a: &Self::Cipher, b: Operand<'_, Self::Cipher>) -> Result<Self::Bool, CryptoError>;
    fn lt(&mut self, a: &Self::Cipher, b: Operand<'_, Self::Cipher>) -> Result<Self::Bool, CryptoError>;

    fn and(&mut self, a: &Self::Bool, b: &Self::Bool) -> Result<Self::Bool, CryptoError>;
    fn or(&mut self, a: &Self::Bool, b: &Self::Bool) -> Result<Self::Bool, CryptoError>;
    fn not(&mut self, a: &Self::Bool) -> Result<Self::Bool, CryptoError>;
    /// Boolean equality, used by a coordinator comparing answers under encryption.
    fn xnor(&mut self, a: &Self::Bool, b: &Self::Bool) -> Result<Self::Bool, CryptoError>;

    fn bool_as_byte(&self, b: &Self::Bool) -> Self::Cipher;

    /// Oblivious select: `cond * (a - b) + b`.
    fn choose(&mut self, cond: &Self::Bool, a: &Self::Cipher, b: &Self::Cipher) -> Result<Self::Cipher, CryptoError> {
        let diff = self.sub(a, Operand::Cipher(b))?;
        let scaled = self.mul(&self.bool_as_byte(cond), Operand::Cipher(&diff))?;
        self.add(&scaled, Operand::Cipher(b))
    }
}
