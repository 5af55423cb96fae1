use axum::http::HeaderMap;
use blindanno::Party;
use serde::{Deserialize, Serialize};

/// One bearer token per role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokens {
    pub a: String,
    pub b: String,
    pub c: String,
}

impl Tokens {
    /// Fresh tokens from the process-wide randomness source, which is seeded
    /// by `BLINDANNO_SEED` when set.
    pub fn generate() -> Self {
        let token = || format!("{:016x}{:016x}", blindanno::seed::next_u64(), blindanno::seed::next_u64());
        Tokens {
            a: token(),
            b: token(),
            c: token(),
        }
    }

    pub fn for_party(&self, party: Party) -> &str {
        match party {
            Party::A => &self.a,
            Party::B => &self.b,
            Party::C => &self.c,
        }
    }

    /// The role holding the bearer token in `headers`.
    pub fn role(&self, headers: &HeaderMap) -> Option<Party> {
        let value = headers.get(axum::http::header::AUTHORIZATION)?.to_str().ok()?;
        let token = value.strip_prefix("Bearer ")?.trim();
        [Party::A, Party::B, Party::C]
            .into_iter()
            .find(|p| constant_time_eq(self.for_party(*p).as_bytes(), token.as_bytes()))
    }
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}
