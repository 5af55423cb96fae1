//! Test oracles: a plaintext interpreter for the annotation language and a
//! random program generator that emits source text from the grammar.

#![allow(dead_code)]

use std::collections::HashMap;

use blindanno::dsl::{Expr, Program, Statement};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum PVal {
    /// Bytes plus whether the evaluator would hold them encrypted.
    Str(Vec<u8>, bool),
    Bool(bool),
    Num(u64),
}

/// Error line of a plaintext run; mirrors where the encrypted run fails.
#[derive(Debug, Clone, PartialEq)]
pub struct PErr {
    pub line: usize,
}

fn eval(e: &Expr, env: &HashMap<String, PVal>) -> Result<PVal, ()> {
    Ok(match e {
        Expr::StringLit(s) => PVal::Str(s.as_bytes().to_vec(), false),
        Expr::NumberLit(n) => PVal::Num(*n),
        Expr::VarRef(v) => env.get(v).cloned().ok_or(())?,
        Expr::Paren(x) => eval(x, env)?,
        Expr::Not(x) => match eval(x, env)? {
            PVal::Bool(b) => PVal::Bool(!b),
            _ => return Err(()),
        },
        Expr::And(l, r) | Expr::Or(l, r) => {
            let (a, b) = (eval(l, env)?, eval(r, env)?);
            match (a, b) {
                (PVal::Bool(a), PVal::Bool(b)) => PVal::Bool(if matches!(e, Expr::And(..)) { a && b } else { a || b }),
                _ => return Err(()),
            }
        }
        Expr::Call(name, args) => {
            let vals = args.iter().map(|a| eval(a, env)).collect::<Result<Vec<_>, _>>()?;
            match (name.as_str(), vals.as_slice()) {
                ("lower", [PVal::Str(s, c)]) => PVal::Str(s.to_ascii_lowercase(), *c),
                ("upper", [PVal::Str(s, c)]) => PVal::Str(s.to_ascii_uppercase(), *c),
                ("is_in", [PVal::Str(p, _), PVal::Str(t, true)]) => {
                    PVal::Bool(p.is_empty() || t.windows(p.len()).any(|w| w == p.as_slice()))
                }
                _ => return Err(()),
            }
        }
    })
}

/// Runs `program` over plaintext `record`.
pub fn interpret(program: &Program, record: &[u8]) -> Result<bool, PErr> {
    let mut env = HashMap::new();
    env.insert("r".to_string(), PVal::Str(record.to_vec(), true));
    for (i, s) in program.statements.iter().enumerate() {
        let line = program.line_of(i);
        match s {
            Statement::Assign(v, e) => {
                let val = eval(e, &env).map_err(|_| PErr { line })?;
                env.insert(v.clone(), val);
            }
            Statement::Ret(e) => {
                return match eval(e, &env) {
                    Ok(PVal::Bool(b)) => Ok(b),
                    _ => Err(PErr { line }),
                }
            }
        }
    }
    Err(PErr {
        line: program.line_of(program.statements.len().saturating_sub(1)),
    })
}

/// Characters favoured in literals and records so that substring hits are common.
const HOT: &[u8] = b"aAbB-c \"\\";

pub fn random_ascii(rng: &mut impl Rng, len: usize, printable_only: bool) -> Vec<u8> {
    (0..len)
        .map(|_| {
            if rng.random_bool(0.7) {
                HOT[rng.random_range(0..HOT.len())]
            } else if printable_only {
                rng.random_range(0x20..0x7f)
            } else {
                rng.random_range(0..0x80)
            }
        })
        .collect()
}

fn literal(bytes: &[u8]) -> String {
    let mut s = String::from("\"");
    for &b in bytes {
        match b {
            b'"' => s.push_str("\\\""),
            b'\\' => s.push_str("\\\\"),
            _ => s.push(b as char),
        }
    }
    s.push('"');
    s
}

#[derive(Clone, Copy, PartialEq)]
enum Ty {
    Cipher,
    Plain,
    Bool,
}

/// Emits random program source as a token list; joining the tokens with any
/// whitespace yields a valid program.
pub struct Generator {
    rng: ChaCha8Rng,
    vars: Vec<(String, Ty)>,
    /// Probability of emitting an ill-typed expression somewhere.
    pub type_error_rate: f64,
}

impl Generator {
    pub fn new(seed: u64) -> Self {
        Generator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            vars: Vec::new(),
            type_error_rate: 0.0,
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn var_of(&mut self, ty: Ty) -> Option<String> {
        let names: Vec<_> = self.vars.iter().filter(|(_, t)| *t == ty).map(|(n, _)| n.clone()).collect();
        (!names.is_empty()).then(|| names[self.rng.random_range(0..names.len())].clone())
    }

    fn cipher(&mut self, depth: u32, out: &mut Vec<String>) {
        let pick = if depth == 0 { 0 } else { self.rng.random_range(0..4) };
        match pick {
            0 | 1 => {
                let v = if pick == 1 { self.var_of(Ty::Cipher) } else { None };
                out.push(format!("${}", v.unwrap_or_else(|| "r".into())));
            }
            _ => {
                out.push(if self.rng.random_bool(0.5) { "lower" } else { "upper" }.into());
                out.push("(".into());
                self.cipher(depth - 1, out);
                out.push(")".into());
            }
        }
    }

    fn plain(&mut self, out: &mut Vec<String>) {
        match self.rng.random_range(0..4) {
            0 => {
                if let Some(v) = self.var_of(Ty::Plain) {
                    out.push(format!("${v}"));
                    return;
                }
                self.plain(out)
            }
            1 => {
                out.push(if self.rng.random_bool(0.5) { "lower" } else { "upper" }.into());
                out.push("(".into());
                self.plain(out);
                out.push(")".into());
            }
            _ => {
                let n = self.rng.random_range(0..4);
                let bytes = random_ascii(&mut self.rng, n, true);
                out.push(literal(&bytes));
            }
        }
    }

    fn boolean(&mut self, depth: u32, out: &mut Vec<String>) {
        if self.type_error_rate > 0.0 && self.rng.random_bool(self.type_error_rate) {
            // a string where a Boolean belongs, or a plain search target
            if self.rng.random_bool(0.5) {
                self.cipher(1, out);
            } else {
                out.extend(["is_in".into(), "(".into()]);
                self.plain(out);
                out.push(",".into());
                self.plain(out);
                out.push(")".into());
            }
            return;
        }
        let pick = if depth == 0 { self.rng.random_range(0..2) } else { self.rng.random_range(0..6) };
        match pick {
            0 => {
                out.extend(["is_in".into(), "(".into()]);
                if self.rng.random_bool(0.8) {
                    self.plain(out);
                } else {
                    self.cipher(1, out);
                }
                out.push(",".into());
                self.cipher(2, out);
                out.push(")".into());
            }
            1 => match self.var_of(Ty::Bool) {
                Some(v) => out.push(format!("${v}")),
                None => self.boolean(0, out),
            },
            2 => {
                out.push("!".into());
                self.boolean(depth - 1, out);
            }
            3 | 4 => {
                self.boolean(depth - 1, out);
                out.push(if pick == 3 { "&" } else { "|" }.into());
                self.boolean(depth - 1, out);
            }
            _ => {
                out.push("(".into());
                self.boolean(depth - 1, out);
                out.push(")".into());
            }
        }
    }

    /// Statements as token lists.
    pub fn program_tokens(&mut self) -> Vec<Vec<String>> {
        self.vars.clear();
        let mut stmts = Vec::new();
        for _ in 0..self.rng.random_range(0..5) {
            let ty = match self.rng.random_range(0..4) {
                0 => Ty::Cipher,
                1 => Ty::Plain,
                _ => Ty::Bool,
            };
            let name = if ty == Ty::Cipher && self.rng.random_bool(0.3) {
                "r".to_string()
            } else {
                format!("v{}", self.rng.random_range(0..4))
            };
            let mut toks = vec![format!("${name}"), "=".into()];
            match ty {
                Ty::Cipher => self.cipher(2, &mut toks),
                Ty::Plain => self.plain(&mut toks),
                Ty::Bool => self.boolean(3, &mut toks),
            }
            self.vars.retain(|(n, _)| *n != name);
            self.vars.push((name, ty));
            stmts.push(toks);
        }
        let mut ret = vec!["ret".to_string()];
        self.boolean(4, &mut ret);
        stmts.push(ret);
        if self.rng.random_bool(0.1) {
            let mut dead = vec!["ret".to_string()];
            self.boolean(1, &mut dead);
            stmts.push(dead);
        }
        stmts
    }

    /// Source with one statement per line.
    pub fn program_source(&mut self) -> String {
        self.program_tokens()
            .into_iter()
            .map(|s| s.join(" "))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Joins statement tokens with randomly chosen blank lines and comments.
pub fn noisy_source(stmts: &[Vec<String>], rng: &mut impl Rng) -> String {
    let mut out = String::new();
    for s in stmts {
        for t in s {
            out.push_str(t);
            out.push_str(match rng.random_range(0..6) {
                0 => " # noise $x = \"\n",
                1 => "\n\n",
                2 => "\t",
                _ => " ",
            });
        }
        out.push_str(if rng.random_bool(0.5) { "\n" } else { "  # end\n" });
    }
    out
}

/// Encrypts `record`, evaluates `program` on it with the reference backend and
/// decrypts the answer. Also returns the evaluator's full operation trace.
pub fn run_encrypted(
    program: &Program,
    record: &[u8],
    keys: &blindanno::crypto::KeyPair,
    options: blindanno::interp::EvalOptions,
) -> (Result<bool, blindanno::interp::EvalError>, blindanno::crypto::OperationTrace) {
    use blindanno::crypto::{dec_bool, Backend, Evaluator, TraceLevel};
    use blindanno::interp::{evaluate_with, FunctionRegistry};
    use blindanno::Party;

    let mut enc = Evaluator::new(&keys.pk, Party::B);
    let chars: Vec<_> = record.iter().map(|&b| enc.encrypt_byte(b)).collect();
    let mut ev = Evaluator::new(&keys.pk, Party::A).with_trace(TraceLevel::Full);
    let out = evaluate_with(program, chars, &mut ev, &FunctionRegistry::builtins(), options);
    let out = out.map(|b| dec_bool(&b, &keys.sk).unwrap());
    (out, ev.take_trace())
}

/// A randomly generated session driven to its end.
pub struct Fuzzed {
    pub session: blindanno::protocol::Session,
    /// Distinctive substrings of every record and every program literal.
    pub sentinels: Vec<String>,
    /// Programs per party slot, round, record id.
    pub programs: [Vec<std::collections::BTreeMap<String, Program>>; 2],
    /// Snapshot of the agreed pairs after each round.
    pub agreed_after: Vec<std::collections::BTreeMap<(String, String), blindanno::protocol::Label>>,
}

pub struct FuzzPlan {
    pub seed: u64,
    pub sizes: [usize; 2],
    pub samples: [usize; 2],
    pub max_rounds: u32,
    pub records: [Vec<(String, String)>; 2],
    /// Programs per slot, per round, per record id; generated lazily when absent.
    pub scripts: [Vec<std::collections::BTreeMap<String, String>>; 2],
}

impl FuzzPlan {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = [rng.random_range(1..5), rng.random_range(1..5)];
        let samples = [rng.random_range(1..=sizes[0]), rng.random_range(1..=sizes[1])];
        let max_rounds = rng.random_range(1..4);
        let records = [0, 1].map(|slot| {
            (0..sizes[slot])
                .map(|i| {
                    let id = format!("{}{}", ["a", "b"][slot], i);
                    let n = rng.random_range(0..10);
                    let noise = random_ascii(&mut rng, n, true);
                    let content = format!("QX{seed:x}{id}Z {}", String::from_utf8(noise).unwrap());
                    (id, content)
                })
                .collect::<Vec<_>>()
        });
        let mut gen = Generator::new(seed ^ 0x5eed);
        let scripts = [0, 1].map(|slot| {
            (0..max_rounds)
                .map(|round| {
                    records[slot]
                        .iter()
                        .map(|(id, _)| {
                            let src = if gen.rng().random_bool(0.5) {
                                gen.program_source()
                            } else {
                                let needle = if gen.rng().random_bool(0.5) { "a" } else { "b" };
                                format!("ret is_in(\"{needle}\", lower($r)) | is_in(\"QL{seed:x}{slot}{round}\", $r)")
                            };
                            (id.clone(), src)
                        })
                        .collect()
                })
                .collect()
        });
        FuzzPlan {
            seed,
            sizes,
            samples,
            max_rounds,
            records,
            scripts,
        }
    }

    /// The same session seen with the two owners' roles exchanged.
    pub fn swapped(&self) -> Self {
        let [ra, rb] = self.records.clone();
        let [sa, sb] = self.scripts.clone();
        FuzzPlan {
            seed: self.seed,
            sizes: [self.sizes[1], self.sizes[0]],
            samples: [self.samples[1], self.samples[0]],
            max_rounds: self.max_rounds,
            records: [rb, ra],
            scripts: [sb, sa],
        }
    }

    pub fn run(&self, configure: impl FnOnce(&mut blindanno::protocol::SessionConfig)) -> Fuzzed {
        use blindanno::protocol::{Dataset, Record, Session, SessionConfig};
        use blindanno::Party;

        let mut config = SessionConfig::new(self.max_rounds, self.samples[0], self.samples[1]).with_seed(self.seed);
        config.capture_bodies = true;
        configure(&mut config);
        let ds = |slot: usize| -> Dataset { self.records[slot].iter().map(|(i, c)| Record::new(i.clone(), c.clone())).collect() };
        let mut session = Session::new(config, ds(0), ds(1)).unwrap();
        let mut sentinels: Vec<String> = self.records.iter().flatten().map(|(id, _)| format!("QX{:x}{id}Z", self.seed)).collect();
        sentinels.extend((0..2).flat_map(|s| (0..self.max_rounds).map(move |r| (s, r))).map(|(s, r)| format!("QL{:x}{s}{r}", self.seed)));
        let mut programs: [Vec<_>; 2] = [Vec::new(), Vec::new()];
        let mut agreed_after = Vec::new();
        while !session.phase().is_terminal() {
            let round = session.round();
            for (slot, party) in [(0, Party::A), (1, Party::B)] {
                let pending: Vec<String> = session.pending_records(party).unwrap().iter().cloned().collect();
                let script = &self.scripts[slot][(round - 1) as usize];
                let chosen: std::collections::BTreeMap<String, Program> = pending
                    .iter()
                    .map(|id| (id.clone(), session.compile(&script[id]).unwrap()))
                    .collect();
                programs[slot].push(chosen.clone());
                session.submit_annotations(party, round, chosen).unwrap();
            }
            session.run_round().unwrap();
            agreed_after.push(session.agreed_pairs().clone());
        }
        Fuzzed {
            session,
            sentinels,
            programs,
            agreed_after,
        }
    }

    pub fn content(&self, slot: usize, id: &str) -> &str {
        &self.records[slot].iter().find(|(i, _)| i == id).unwrap().1
    }
}
