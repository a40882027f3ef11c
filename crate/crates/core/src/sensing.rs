//! Sensing matrices from symbol streams, plus periodicity estimates.
//!
//! Matrices fill row-major from consecutive post-limiter symbols, normalized
//! by `sqrt(L)` so entries have roughly unit variance. A stream is consumed
//! strictly forward: successive matrices never share symbol positions, which
//! is what makes the sensing one-time.

use ndarray::{Array1, Array2};
use num_bigint::BigUint;
use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::keystream::{Key, RegisterKind, SymbolGenerator};
use crate::seedmix::splitmix64;

/// Where a matrix's entries came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Post-limiter symbols divided by `sqrt(L)`; approximately Gaussian.
    LfsrGaussian,
    /// Raw +/-1 entries; requires a level-3 key.
    Binomial,
    /// Seeded standard normals via the polar method. Comparison baseline
    /// only, never used for encryption.
    ReferenceGaussian,
}

impl MatrixKind {
    pub fn name(&self) -> &'static str {
        match self {
            MatrixKind::LfsrGaussian => "lfsr-gaussian",
            MatrixKind::Binomial => "binomial",
            MatrixKind::ReferenceGaussian => "reference-gaussian",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lfsr-gaussian" => Ok(MatrixKind::LfsrGaussian),
            "binomial" => Ok(MatrixKind::Binomial),
            "reference-gaussian" => Ok(MatrixKind::ReferenceGaussian),
            other => Err(Error::Config(format!("unknown matrix kind '{other}'"))),
        }
    }
}

/// An `M x N` measurement matrix. `scale` is the divisor that was applied to
/// each entry, so `entries * scale` recovers the integer symbols exactly for
/// the shift-register kinds.
#[derive(Debug, Clone)]
pub struct SensingMatrix {
    entries: Array2<f64>,
    kind: MatrixKind,
    scale: f64,
}

impl SensingMatrix {
    pub fn from_entries(entries: Array2<f64>, kind: MatrixKind, scale: f64) -> Result<Self> {
        let (m, n) = entries.dim();
        if m == 0 || n == 0 || m >= n {
            return Err(Error::Shape(format!(
                "sensing matrix must have 0 < M < N, got {m}x{n}"
            )));
        }
        Ok(SensingMatrix {
            entries,
            kind,
            scale,
        })
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n(&self) -> usize {
        self.entries.ncols()
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// `phi * x`.
    pub fn apply(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but vector has length {}",
                self.m(),
                self.n(),
                x.len()
            )));
        }
        Ok(self.entries.dot(x))
    }

    /// Debug dump: row-major CSV with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.entries.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// A forward-only source of sensing matrices.
#[derive(Debug, Clone)]
pub struct MatrixStream {
    kind: MatrixKind,
    level: usize,
    inner: StreamImpl,
}

#[derive(Debug, Clone)]
enum StreamImpl {
    Symbols(SymbolGenerator),
    Reference { rng: ChaCha8Rng, spare: Option<f64> },
}

impl MatrixStream {
    pub fn new(key: &Key, kind: MatrixKind) -> Result<Self> {
        if kind == MatrixKind::Binomial && key.level() != 3 {
            return Err(Error::Config(format!(
                "binomial matrices need a level-3 key, got level {}",
                key.level()
            )));
        }
        let inner = match kind {
            MatrixKind::LfsrGaussian | MatrixKind::Binomial => {
                StreamImpl::Symbols(SymbolGenerator::new(key))
            }
            MatrixKind::ReferenceGaussian => StreamImpl::Reference {
                rng: ChaCha8Rng::seed_from_u64(reference_seed(key)),
                spare: None,
            },
        };
        Ok(MatrixStream {
            kind,
            level: key.level(),
            inner,
        })
    }

    /// Reference-gaussian stream straight from a seed, for experiments that
    /// have no key at all.
    pub fn reference_from_seed(seed: u64) -> Self {
        MatrixStream {
            kind: MatrixKind::ReferenceGaussian,
            level: 0,
            inner: StreamImpl::Reference {
                rng: ChaCha8Rng::seed_from_u64(seed),
                spare: None,
            },
        }
    }

    /// Materialize the next `m x n` matrix, consuming `m * n` stream values.
    pub fn next_matrix(&mut self, m: usize, n: usize) -> Result<SensingMatrix> {
        if m == 0 || n == 0 || m >= n {
            return Err(Error::Shape(format!(
                "sensing matrix must have 0 < M < N, got {m}x{n}"
            )));
        }
        let count = m * n;
        let (values, scale) = match (&mut self.inner, self.kind) {
            (StreamImpl::Symbols(generator), MatrixKind::LfsrGaussian) => {
                let scale = (self.level as f64).sqrt();
                let mut v = Vec::with_capacity(count);
                for _ in 0..count {
                    v.push(generator.next_symbol()? as f64 / scale);
                }
                (v, scale)
            }
            (StreamImpl::Symbols(generator), MatrixKind::Binomial) => {
                let mut v = Vec::with_capacity(count);
                for _ in 0..count {
                    v.push(generator.next_symbol()? as f64);
                }
                (v, 1.0)
            }
            (StreamImpl::Reference { rng, spare }, _) => {
                let mut v = Vec::with_capacity(count);
                for _ in 0..count {
                    v.push(next_standard_normal(rng, spare));
                }
                (v, 1.0)
            }
            _ => unreachable!("stream kind and backing store always agree"),
        };
        let entries = Array2::from_shape_vec((m, n), values).expect("shape matches fill");
        SensingMatrix::from_entries(entries, self.kind, scale)
    }
}

/// First matrix of a fresh stream for this key. Equivalent to reshaping
/// `take_symbols(key, m * n)` row-major (for the shift-register kinds).
pub fn build_matrix(key: &Key, m: usize, n: usize, kind: MatrixKind) -> Result<SensingMatrix> {
    MatrixStream::new(key, kind)?.next_matrix(m, n)
}

fn reference_seed(key: &Key) -> u64 {
    let mut acc = 0x9E37_79B9_7F4A_7C15u64;
    for &s in key.seeds() {
        acc = splitmix64(acc ^ s);
    }
    acc
}

/// Marsaglia polar method over a seeded uniform generator.
fn next_standard_normal(rng: &mut ChaCha8Rng, spare: &mut Option<f64>) -> f64 {
    if let Some(v) = spare.take() {
        return v;
    }
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            let k = (-2.0 * s.ln() / s).sqrt();
            *spare = Some(v * k);
            return u * k;
        }
    }
}

/// Analytic periodicity summary for a key.
#[derive(Debug, Clone)]
pub struct PeriodReport {
    /// Period `2^d - 1` of each linear register, in key order.
    pub lfsr_periods: Vec<u64>,
    /// `lcm` of the LFSR periods: lower bound on the raw-stream period.
    pub lower_bound_p: BigUint,
    /// Post-limiter length estimate `P * (1 - 1/2^(L-1))`, integer-truncated.
    pub f_prime_period_estimate: BigUint,
    /// Matrices available before stream reuse, as a reduced fraction
    /// `f_prime_period_estimate / (m * n)`.
    pub repeatability: (BigUint, BigUint),
}

impl PeriodReport {
    pub fn repeatability_log2(&self) -> f64 {
        let (num, den) = &self.repeatability;
        biguint_log2(num) - biguint_log2(den)
    }
}

fn biguint_log2(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    // Take the top 53 bits for the mantissa.
    let shift = bits.saturating_sub(53);
    let top: BigUint = x >> shift;
    let top_f64 = top.to_u64_digits().first().copied().unwrap_or(0) as f64;
    top_f64.log2() + shift as f64
}

/// Analytic period report. Assumes every linear register uses a primitive
/// polynomial (period `2^d - 1`), which `Key::generate` guarantees.
pub fn period_report(key: &Key, m: usize, n: usize) -> PeriodReport {
    let lfsr_periods: Vec<u64> = key
        .registers()
        .iter()
        .filter(|r| r.kind() == RegisterKind::Linear)
        .map(|r| {
            if r.degree() == 64 {
                u64::MAX
            } else {
                (1u64 << r.degree()) - 1
            }
        })
        .collect();
    let mut lower_bound_p = BigUint::from(1u32);
    for &p in &lfsr_periods {
        lower_bound_p = lower_bound_p.lcm(&BigUint::from(p));
    }
    let level = key.level();
    let extremes = &lower_bound_p >> (level - 1);
    let f_prime = &lower_bound_p - extremes;
    let mn = BigUint::from((m * n) as u64);
    let g = f_prime.gcd(&mn);
    let repeatability = (&f_prime / &g, mn / &g);
    PeriodReport {
        lfsr_periods,
        lower_bound_p,
        f_prime_period_estimate: f_prime,
        repeatability,
    }
}

/// Measured periodicity of the raw symbol stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasuredPeriod {
    /// Cycle length of the joint register state.
    pub state_period: u64,
    /// Steps before the joint state enters its cycle (nonzero only when the
    /// nonlinear register has a transient).
    pub tail: u64,
    /// Minimal period of the raw symbol stream on the cycle.
    pub symbol_period: u64,
    /// Extreme symbols (limiter Null events) in one state cycle.
    pub extreme_count: u64,
}

impl MeasuredPeriod {
    /// Fraction of cycles the limiter discards.
    pub fn null_fraction(&self) -> f64 {
        self.extreme_count as f64 / self.state_period as f64
    }
}

/// Walk the stream and measure its true period with Brent's cycle-finding
/// algorithm. Returns `None` when the cycle is not found within `cap` steps;
/// callers then fall back on the analytic `period_report`.
pub fn measure_period(key: &Key, cap: u64) -> Result<Option<MeasuredPeriod>> {
    // Cycle length lambda.
    let mut tortoise = SymbolGenerator::new(key);
    let mut hare = tortoise.clone();
    hare.next_raw()?;
    let mut power: u64 = 1;
    let mut lambda: u64 = 1;
    let mut steps: u64 = 0;
    while tortoise.states() != hare.states() {
        if power == lambda {
            tortoise = hare.clone();
            power *= 2;
            lambda = 0;
        }
        hare.next_raw()?;
        lambda += 1;
        steps += 1;
        if steps > cap {
            return Ok(None);
        }
    }

    // Tail length mu.
    let mut front = SymbolGenerator::new(key);
    for _ in 0..lambda {
        front.next_raw()?;
    }
    let mut back = SymbolGenerator::new(key);
    let mut tail: u64 = 0;
    while front.states() != back.states() {
        front.next_raw()?;
        back.next_raw()?;
        tail += 1;
        if tail > cap {
            return Ok(None);
        }
    }

    // One full cycle: count extremes and, if the cycle is small enough to
    // hold in memory, reduce to the minimal symbol period.
    let level = key.level() as i32;
    let keep_symbols = lambda <= (1 << 22);
    let mut symbols = Vec::with_capacity(if keep_symbols { lambda as usize } else { 0 });
    let mut extreme_count: u64 = 0;
    let mut walker = back;
    for _ in 0..lambda {
        let f = walker.next_raw()?;
        if f.abs() == level {
            extreme_count += 1;
        }
        if keep_symbols {
            symbols.push(f);
        }
    }
    let symbol_period = if keep_symbols {
        minimal_period(&symbols)
    } else {
        lambda
    };

    Ok(Some(MeasuredPeriod {
        state_period: lambda,
        tail,
        symbol_period,
        extreme_count,
    }))
}

/// Smallest divisor `d` of `len` such that the sequence is invariant under a
/// cyclic shift by `d`.
fn minimal_period(symbols: &[i32]) -> u64 {
    let len = symbols.len() as u64;
    let mut divisors: Vec<u64> = (1..=len).filter(|d| len % d == 0).collect();
    divisors.sort_unstable();
    'outer: for d in divisors {
        for i in 0..symbols.len() {
            if symbols[i] != symbols[(i + d as usize) % symbols.len()] {
                continue 'outer;
            }
        }
        return d;
    }
    len
}
