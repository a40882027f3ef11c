//! Shift-register keystreams.
//!
//! A bank of `L` registers (`L-1` linear, one nonlinear) is clocked in
//! lockstep. Each cycle the `L` output bits are mapped `0 -> -1`, `1 -> +1`
//! and summed into a Binomial-distributed symbol. Symbols of magnitude `L`
//! mean every register agreed on that cycle and would expose raw register
//! bits, so the limiter drops them; the clock still advances.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seedmix::splitmix64;

/// Largest supported register degree (state is held in a `u64`).
pub const MAX_DEGREE: usize = 64;

/// Consecutive limited cycles tolerated before the stream is declared
/// degenerate (e.g. all registers cloned from one seed).
const MAX_LIMITED_RUN: u64 = 1 << 20;

/// Feedback style of a shift register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegisterKind {
    Linear,
    Nonlinear,
}

/// Structure of one register: stage count, feedback tap positions, and (for
/// the nonlinear kind) pairwise AND terms folded into the feedback.
///
/// The register is a Fibonacci-configuration shift register over stages
/// `0..degree`. Stage 0 is emitted each step; the feedback bit, XOR of the
/// tapped stages plus the AND terms, enters at stage `degree - 1`. Tap index
/// `t` contributes `s[n + t]` to the recurrence for `s[n + degree]`, so the
/// characteristic polynomial is `x^degree + sum over taps of x^t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterSpec {
    degree: usize,
    taps: Vec<usize>,
    kind: RegisterKind,
    nonlinear_terms: Vec<(usize, usize)>,
}

impl RegisterSpec {
    /// A linear register with the given feedback taps.
    pub fn linear(degree: usize, taps: &[usize]) -> Result<Self> {
        Self::build(degree, taps, RegisterKind::Linear, &[])
    }

    /// A nonlinear register: linear taps XORed with pairwise AND terms.
    pub fn nonlinear(degree: usize, taps: &[usize], terms: &[(usize, usize)]) -> Result<Self> {
        Self::build(degree, taps, RegisterKind::Nonlinear, terms)
    }

    fn build(
        degree: usize,
        taps: &[usize],
        kind: RegisterKind,
        terms: &[(usize, usize)],
    ) -> Result<Self> {
        if degree < 2 || degree > MAX_DEGREE {
            return Err(Error::InvalidRegister(format!(
                "degree {degree} outside supported range 2..={MAX_DEGREE}"
            )));
        }
        let mut taps: Vec<usize> = taps.to_vec();
        taps.sort_unstable();
        taps.dedup();
        if taps.is_empty() && terms.is_empty() {
            return Err(Error::InvalidRegister("register has no feedback".into()));
        }
        if taps.iter().any(|&t| t >= degree) {
            return Err(Error::InvalidRegister(format!(
                "tap index out of range for degree {degree}"
            )));
        }
        let mut nonlinear_terms: Vec<(usize, usize)> = terms
            .iter()
            .map(|&(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        nonlinear_terms.sort_unstable();
        nonlinear_terms.dedup();
        for &(a, b) in &nonlinear_terms {
            if a == b {
                return Err(Error::InvalidRegister(
                    "nonlinear term must pair two distinct stages".into(),
                ));
            }
            if b >= degree {
                return Err(Error::InvalidRegister(format!(
                    "nonlinear term index out of range for degree {degree}"
                )));
            }
        }
        if kind == RegisterKind::Linear && !nonlinear_terms.is_empty() {
            return Err(Error::InvalidRegister(
                "linear register cannot carry nonlinear terms".into(),
            ));
        }
        Ok(RegisterSpec {
            degree,
            taps,
            kind,
            nonlinear_terms,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn taps(&self) -> &[usize] {
        &self.taps
    }

    pub fn kind(&self) -> RegisterKind {
        self.kind
    }

    pub fn nonlinear_terms(&self) -> &[(usize, usize)] {
        &self.nonlinear_terms
    }

    /// Mask covering the `degree` state bits.
    pub fn state_mask(&self) -> u64 {
        if self.degree == 64 {
            u64::MAX
        } else {
            (1u64 << self.degree) - 1
        }
    }

    /// Advance one step: emit stage 0, shift, insert the feedback bit at the
    /// top stage. A linear register in the all-zero state is stuck there and
    /// is rejected.
    pub fn step(&self, state: u64) -> Result<(u8, u64)> {
        if state & !self.state_mask() != 0 {
            return Err(Error::InvalidRegister(format!(
                "state wider than degree {}",
                self.degree
            )));
        }
        if self.kind == RegisterKind::Linear && state == 0 {
            return Err(Error::DegenerateState);
        }
        let mut fb = 0u64;
        for &t in &self.taps {
            fb ^= state >> t;
        }
        for &(a, b) in &self.nonlinear_terms {
            fb ^= (state >> a) & (state >> b);
        }
        fb &= 1;
        let out = (state & 1) as u8;
        let next = (state >> 1) | (fb << (self.degree - 1));
        Ok((out, next))
    }
}

/// Built-in primitive feedback taps (constant-term form) for degrees 3..=24.
/// Each entry is verified primitive by the order check in `is_primitive`.
const PRIMITIVE_TAPS: &[(usize, &[usize])] = &[
    (3, &[0, 1]),
    (4, &[0, 1]),
    (5, &[0, 2]),
    (6, &[0, 1]),
    (7, &[0, 1]),
    (8, &[0, 2, 3, 4]),
    (9, &[0, 4]),
    (10, &[0, 3]),
    (11, &[0, 2]),
    (12, &[0, 1, 2, 8]),
    (13, &[0, 1, 2, 5]),
    (14, &[0, 1, 2, 12]),
    (15, &[0, 1]),
    (16, &[0, 1, 3, 12]),
    (17, &[0, 3]),
    (18, &[0, 7]),
    (19, &[0, 1, 2, 5]),
    (20, &[0, 3]),
    (21, &[0, 2]),
    (22, &[0, 1]),
    (23, &[0, 5]),
    (24, &[0, 1, 2, 7]),
];

/// Taps of a known primitive polynomial for the given degree, if tabled.
pub fn primitive_taps(degree: usize) -> Option<&'static [usize]> {
    PRIMITIVE_TAPS
        .iter()
        .find(|(d, _)| *d == degree)
        .map(|(_, t)| *t)
}

/// Whether `x^degree + sum x^t` is primitive over GF(2). Implemented as an
/// order check (the order of `x` modulo the polynomial must be `2^degree-1`),
/// supported for degrees up to 32.
pub fn is_primitive(degree: usize, taps: &[usize]) -> bool {
    if degree < 2 || degree > 32 || !taps.contains(&0) {
        return false;
    }
    let mut poly = 1u64 << degree;
    for &t in taps {
        if t >= degree {
            return false;
        }
        poly |= 1u64 << t;
    }
    let n = (1u64 << degree) - 1;
    if gf2_pow_x(n, poly, degree) != 1 {
        return false;
    }
    prime_factors(n)
        .into_iter()
        .all(|q| gf2_pow_x(n / q, poly, degree) != 1)
}

fn gf2_mulmod(a: u64, b: u64, poly: u64, degree: usize) -> u64 {
    let mut acc: u128 = 0;
    let a = a as u128;
    for i in 0..=degree {
        if (b >> i) & 1 == 1 {
            acc ^= a << i;
        }
    }
    let poly = poly as u128;
    for i in (degree..=2 * degree).rev() {
        if (acc >> i) & 1 == 1 {
            acc ^= poly << (i - degree);
        }
    }
    acc as u64
}

fn gf2_pow_x(mut exp: u64, poly: u64, degree: usize) -> u64 {
    let mut result = 1u64;
    let mut base = 2u64; // the polynomial x
    while exp > 0 {
        if exp & 1 == 1 {
            result = gf2_mulmod(result, base, poly, degree);
        }
        base = gf2_mulmod(base, base, poly, degree);
        exp >>= 1;
    }
    result
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// The default nonlinear register: minimal nonlinearity with empirically
/// balanced output.
pub fn default_nfsr() -> RegisterSpec {
    RegisterSpec::nonlinear(7, &[0, 1], &[(2, 4), (3, 5)]).expect("default nfsr is valid")
}

/// Default LFSR degree ladder for `level - 1` linear registers.
pub fn default_lfsr_degrees(level: usize) -> Vec<usize> {
    const LADDER: [usize; 22] = [
        15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 14, 13, 12, 11, 10, 9, 8, 7, 6, 5, 4, 3,
    ];
    (0..level.saturating_sub(1))
        .map(|i| LADDER[i % LADDER.len()])
        .collect()
}

/// Key material: the register bank structure plus one seed per register.
#[derive(Debug, Clone, PartialEq)]
pub struct Key {
    registers: Vec<RegisterSpec>,
    seeds: Vec<u64>,
}

impl Key {
    pub fn new(registers: Vec<RegisterSpec>, seeds: Vec<u64>) -> Result<Self> {
        let level = registers.len();
        if level < 3 {
            return Err(Error::InvalidKey(format!("level {level} below minimum 3")));
        }
        if level % 2 == 0 {
            return Err(Error::InvalidKey(format!(
                "level {level} must be odd so no symbol sums to zero"
            )));
        }
        let nonlinear = registers
            .iter()
            .filter(|r| r.kind() == RegisterKind::Nonlinear)
            .count();
        if nonlinear != 1 {
            return Err(Error::InvalidKey(format!(
                "expected exactly one nonlinear register, found {nonlinear}"
            )));
        }
        if seeds.len() != level {
            return Err(Error::InvalidKey(format!(
                "{} seeds for {level} registers",
                seeds.len()
            )));
        }
        for (i, (spec, &seed)) in registers.iter().zip(&seeds).enumerate() {
            if seed & !spec.state_mask() != 0 {
                return Err(Error::InvalidKey(format!(
                    "seed {i} wider than register degree {}",
                    spec.degree()
                )));
            }
            if spec.kind() == RegisterKind::Linear && seed == 0 {
                return Err(Error::InvalidKey(format!("linear seed {i} is all-zero")));
            }
        }
        Ok(Key { registers, seeds })
    }

    /// Generate a key from table polynomials: `level - 1` LFSRs with the given
    /// degrees plus the default NFSR, seeded deterministically from `entropy`.
    pub fn generate(level: usize, lfsr_degrees: &[usize], entropy: u64) -> Result<Self> {
        if lfsr_degrees.len() != level.saturating_sub(1) {
            return Err(Error::InvalidKey(format!(
                "{} LFSR degrees for level {level} (need {})",
                lfsr_degrees.len(),
                level.saturating_sub(1)
            )));
        }
        let mut registers = Vec::with_capacity(level);
        for &d in lfsr_degrees {
            let taps = primitive_taps(d).ok_or_else(|| {
                Error::InvalidKey(format!("no primitive polynomial tabled for degree {d}"))
            })?;
            registers.push(RegisterSpec::linear(d, taps)?);
        }
        registers.push(default_nfsr());

        let mut seeds = Vec::with_capacity(level);
        for (i, spec) in registers.iter().enumerate() {
            let mut s = splitmix64(entropy ^ splitmix64(i as u64 + 1)) & spec.state_mask();
            while s == 0 {
                s = splitmix64(s ^ splitmix64(i as u64 + 0x5eed)) & spec.state_mask();
            }
            seeds.push(s);
        }
        Key::new(registers, seeds)
    }

    pub fn level(&self) -> usize {
        self.registers.len()
    }

    pub fn registers(&self) -> &[RegisterSpec] {
        &self.registers
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn lfsr_degrees(&self) -> Vec<usize> {
        self.registers
            .iter()
            .filter(|r| r.kind() == RegisterKind::Linear)
            .map(|r| r.degree())
            .collect()
    }

    /// Deterministic per-block key: same register structure, seeds remixed
    /// with the block index. Lets blocks be processed in parallel without
    /// replaying one shared stream.
    pub fn derive_block_key(&self, block_index: u64) -> Key {
        let mut seeds = Vec::with_capacity(self.seeds.len());
        for (i, (&seed, spec)) in self.seeds.iter().zip(&self.registers).enumerate() {
            let mut s =
                splitmix64(seed ^ splitmix64(block_index ^ (i as u64) << 32)) & spec.state_mask();
            while s == 0 && spec.kind() == RegisterKind::Linear {
                s = splitmix64(s ^ splitmix64(i as u64 + 0x5eed)) & spec.state_mask();
            }
            seeds.push(s);
        }
        Key {
            registers: self.registers.clone(),
            seeds,
        }
    }

    /// Short identifier derived from the canonical key encoding (FNV-1a).
    pub fn fingerprint(&self) -> u64 {
        let json = self.to_json_compact();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    fn to_file(&self) -> KeyFile {
        KeyFile {
            version: KEY_FILE_VERSION,
            l: self.level(),
            registers: self
                .registers
                .iter()
                .zip(&self.seeds)
                .map(|(spec, &seed)| RegisterEntry {
                    degree: spec.degree(),
                    taps: spec.taps().to_vec(),
                    kind: spec.kind(),
                    nonlinear_terms: spec.nonlinear_terms().to_vec(),
                    seed_hex: seed_to_hex(seed, spec.degree()),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("key serializes")
    }

    fn to_json_compact(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("key serializes")
    }

    pub fn from_json(s: &str) -> Result<Key> {
        let file: KeyFile =
            serde_json::from_str(s).map_err(|e| Error::Parse(format!("key file: {e}")))?;
        if file.version != KEY_FILE_VERSION {
            return Err(Error::Parse(format!(
                "unsupported key file version {}",
                file.version
            )));
        }
        let mut registers = Vec::with_capacity(file.registers.len());
        let mut seeds = Vec::with_capacity(file.registers.len());
        for entry in &file.registers {
            let spec = match entry.kind {
                RegisterKind::Linear => RegisterSpec::linear(entry.degree, &entry.taps)?,
                RegisterKind::Nonlinear => {
                    RegisterSpec::nonlinear(entry.degree, &entry.taps, &entry.nonlinear_terms)?
                }
            };
            seeds.push(seed_from_hex(&entry.seed_hex, entry.degree)?);
            registers.push(spec);
        }
        if file.l != registers.len() {
            return Err(Error::Parse(format!(
                "key file says l={} but lists {} registers",
                file.l,
                registers.len()
            )));
        }
        Key::new(registers, seeds)
    }

    pub fn write_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read_file<P: AsRef<Path>>(path: P) -> Result<Key> {
        let text = fs::read_to_string(path)?;
        Key::from_json(&text)
    }
}

const KEY_FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct KeyFile {
    version: u32,
    l: usize,
    registers: Vec<RegisterEntry>,
}

#[derive(Serialize, Deserialize)]
struct RegisterEntry {
    degree: usize,
    taps: Vec<usize>,
    kind: RegisterKind,
    nonlinear_terms: Vec<(usize, usize)>,
    seed_hex: String,
}

/// Seed bits as hex: little-endian bytes, bit `i` of the state stored at
/// bit `i % 8` of byte `i / 8`, exactly `ceil(degree / 8)` bytes.
fn seed_to_hex(seed: u64, degree: usize) -> String {
    let nbytes = degree.div_ceil(8);
    hex::encode(&seed.to_le_bytes()[..nbytes])
}

fn seed_from_hex(s: &str, degree: usize) -> Result<u64> {
    let bytes = hex::decode(s).map_err(|e| Error::Parse(format!("seed hex: {e}")))?;
    if bytes.len() != degree.div_ceil(8) {
        return Err(Error::Parse(format!(
            "seed hex length {} does not match degree {degree}",
            bytes.len()
        )));
    }
    let mut buf = [0u8; 8];
    buf[..bytes.len()].copy_from_slice(&bytes);
    let seed = u64::from_le_bytes(buf);
    let mask = if degree == 64 {
        u64::MAX
    } else {
        (1u64 << degree) - 1
    };
    if seed & !mask != 0 {
        return Err(Error::Parse(format!(
            "seed hex carries bits beyond degree {degree}"
        )));
    }
    Ok(seed)
}

/// A run of symbols from one stream, with the level they were drawn at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence {
    pub symbols: Vec<i32>,
    pub level: usize,
}

/// Map register output bits to +/-1 and sum them into one raw symbol.
pub fn raw_symbol(bits: &[u8]) -> i32 {
    bits.iter().map(|&b| if b == 1 { 1 } else { -1 }).sum()
}

/// Drop symbols of magnitude `level`; everything else passes unchanged.
pub fn limiter(f: i32, level: usize) -> Option<i32> {
    if f.unsigned_abs() as usize == level {
        None
    } else {
        Some(f)
    }
}

/// Stateful symbol generator. Strictly sequential; clone it (or derive
/// per-block keys) for parallel use.
#[derive(Debug, Clone)]
pub struct SymbolGenerator {
    regs: Vec<(RegisterSpec, u64)>,
}

impl SymbolGenerator {
    pub fn new(key: &Key) -> Self {
        SymbolGenerator {
            regs: key
                .registers
                .iter()
                .cloned()
                .zip(key.seeds.iter().copied())
                .collect(),
        }
    }

    pub fn level(&self) -> usize {
        self.regs.len()
    }

    /// Current state of every register, in key order.
    pub fn states(&self) -> Vec<u64> {
        self.regs.iter().map(|(_, s)| *s).collect()
    }

    /// Clock every register once and sum the +/-1 mapped outputs.
    pub fn next_raw(&mut self) -> Result<i32> {
        let mut sum = 0i32;
        for (spec, state) in &mut self.regs {
            let (bit, next) = spec.step(*state)?;
            *state = next;
            sum += if bit == 1 { 1 } else { -1 };
        }
        Ok(sum)
    }

    /// Next post-limiter symbol. Limited cycles advance the clock but emit
    /// nothing.
    pub fn next_symbol(&mut self) -> Result<i32> {
        let level = self.level();
        for _ in 0..MAX_LIMITED_RUN {
            let f = self.next_raw()?;
            if let Some(s) = limiter(f, level) {
                return Ok(s);
            }
        }
        Err(Error::DegenerateStream(MAX_LIMITED_RUN))
    }

    pub fn take(&mut self, n: usize) -> Result<SymbolSequence> {
        if n == 0 {
            return Err(Error::EmptyRequest);
        }
        let mut symbols = Vec::with_capacity(n);
        for _ in 0..n {
            symbols.push(self.next_symbol()?);
        }
        Ok(SymbolSequence {
            symbols,
            level: self.level(),
        })
    }
}

/// First `n` post-limiter symbols for a key. Deterministic: a fixed key
/// always yields the same sequence.
pub fn take_symbols(key: &Key, n: usize) -> Result<SymbolSequence> {
    SymbolGenerator::new(key).take(n)
}
