//! Process-wide randomness source. Honors `BLINDANNO_SEED` so that a run can be
//! replayed bit for bit.

use std::sync::{Mutex, OnceLock};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const SEED_ENV: &str = "BLINDANNO_SEED";

static GLOBAL: OnceLock<Mutex<ChaCha20Rng>> = OnceLock::new();

/// The seed from `BLINDANNO_SEED`, if set and parseable.
pub fn env_seed() -> Option<u64> {
    std::env::var(SEED_ENV).ok()?.trim().parse().ok()
}

fn global() -> &'static Mutex<ChaCha20Rng> {
    GLOBAL.get_or_init(|| {
        let rng = match env_seed() {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed),
            None => ChaCha20Rng::from_os_rng(),
        };
        Mutex::new(rng)
    })
}

/// Draws 64 bits from the process-wide source.
pub fn next_u64() -> u64 {
    global().lock().expect("rng poisoned").random()
}

/// A fresh generator, seeded from `seed` if given, otherwise from the process-wide source.
pub fn rng_from(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => {
            let mut bytes = [0u8; 32];
            global().lock().expect("rng poisoned").fill_bytes(&mut bytes);
            ChaCha20Rng::from_seed(bytes)
        }
    }
}

/// Derives an independent sub-seed from a parent seed and a label.
pub fn derive(seed: u64, label: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest is 32 bytes"))
}
