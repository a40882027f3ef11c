//! Energy-concealment encryption and the baseline schemes.
//!
//! `conceal` prepends the energy-concealing entry `c = sqrt(E_max - |x|^2)`
//! so every concealed block has the same public energy `E_max`; the
//! measurements then carry no per-block energy information. `encrypt` takes
//! its sensing matrix by value: a matrix handle can never serve two blocks,
//! which is the one-time policy. `encrypt_reusing` is the explicit opt-out
//! for experiments that need matrix reuse (e.g. linearity checks); reuse
//! forfeits chosen-plaintext resistance.
//!
//! Baselines kept for comparison experiments: plain one-time sensing
//! (`ots_encrypt`), norm normalization (`normalize_scheme`, whose norm would
//! travel over a separate secure channel), and the energy obfuscation scheme
//! (`eos_encrypt`, lognormal scalar multiplier).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array1;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::sensing::SensingMatrix;

/// Relative tolerance on the constant-energy invariant.
pub const ENERGY_TOLERANCE: f64 = 1e-9;

/// A plaintext block together with its concealed form.
#[derive(Debug, Clone)]
pub struct Block {
    x: Array1<f64>,
    x_prime: Array1<f64>,
    c: f64,
    e_max: f64,
}

impl Block {
    /// Plaintext, length `N - 1`.
    pub fn x(&self) -> &Array1<f64> {
        &self.x
    }

    /// Concealed vector `[c, x_1, ..., x_{N-1}]`, length `N`.
    pub fn x_prime(&self) -> &Array1<f64> {
        &self.x_prime
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }
}

/// Which scheme produced a ciphertext.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Concealed,
    Ots,
    Normalized,
    Eos,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Concealed => "concealed",
            SchemeKind::Ots => "ots",
            SchemeKind::Normalized => "normalized",
            SchemeKind::Eos => "eos",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "concealed" => Ok(SchemeKind::Concealed),
            "ots" => Ok(SchemeKind::Ots),
            "normalized" => Ok(SchemeKind::Normalized),
            "eos" => Ok(SchemeKind::Eos),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }

    fn tag(&self) -> u8 {
        match self {
            SchemeKind::Concealed => 0,
            SchemeKind::Ots => 1,
            SchemeKind::Normalized => 2,
            SchemeKind::Eos => 3,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(SchemeKind::Concealed),
            1 => Ok(SchemeKind::Ots),
            2 => Ok(SchemeKind::Normalized),
            3 => Ok(SchemeKind::Eos),
            other => Err(Error::Parse(format!("unknown scheme tag {other}"))),
        }
    }
}

/// One encrypted block. `aux` holds local-only side data (the norm for the
/// normalized scheme, the multiplier for EOS); it never goes on the wire.
#[derive(Debug, Clone)]
pub struct Ciphertext {
    pub y: Array1<f64>,
    pub scheme: SchemeKind,
    pub aux: Option<f64>,
}

/// Embed `x` into a constant-energy block: `c = sqrt(E_max - |x|^2)`.
pub fn conceal(x: &Array1<f64>, e_max: f64) -> Result<Block> {
    if !(e_max > 0.0) {
        return Err(Error::Config(format!("E_max must be positive, got {e_max}")));
    }
    let energy = x.dot(x);
    if energy > e_max {
        return Err(Error::EnergyOverflow { energy, e_max });
    }
    let c = (e_max - energy).max(0.0).sqrt();
    let mut x_prime = Array1::zeros(x.len() + 1);
    x_prime[0] = c;
    x_prime.slice_mut(ndarray::s![1..]).assign(x);
    Ok(Block {
        x: x.clone(),
        x_prime,
        c,
        e_max,
    })
}

/// Inverse of the concealment concatenation: drop the recovered `c` entry.
pub fn strip_conceal(x_prime_hat: &Array1<f64>) -> Array1<f64> {
    x_prime_hat.slice(ndarray::s![1..]).to_owned()
}

/// One-time encryption of a concealed block: `y = phi * x'`. Consumes the
/// matrix so it cannot be used for a second block.
pub fn encrypt(block: &Block, phi: SensingMatrix) -> Result<Ciphertext> {
    encrypt_reusing(block, &phi)
}

/// Matrix-reuse variant; see the module notes on the one-time policy.
pub fn encrypt_reusing(block: &Block, phi: &SensingMatrix) -> Result<Ciphertext> {
    let y = phi.apply(block.x_prime())?;
    Ok(Ciphertext {
        y,
        scheme: SchemeKind::Concealed,
        aux: None,
    })
}

/// Plain one-time sensing of an unconcealed block: `y = phi * x`.
pub fn ots_encrypt(x: &Array1<f64>, phi: SensingMatrix) -> Result<Ciphertext> {
    let y = phi.apply(x)?;
    Ok(Ciphertext {
        y,
        scheme: SchemeKind::Ots,
        aux: None,
    })
}

/// Norm-normalization baseline: transmit `y / |y|`, keep the norm as aux.
/// A zero measurement maps to a uniform random unit vector so a zero signal
/// is not detectable.
pub fn normalize_scheme<R: Rng>(y: &Array1<f64>, rng: &mut R) -> Ciphertext {
    let norm = y.dot(y).sqrt();
    if norm > 0.0 {
        Ciphertext {
            y: y / norm,
            scheme: SchemeKind::Normalized,
            aux: Some(norm),
        }
    } else {
        let mut u = Array1::zeros(y.len());
        loop {
            for v in u.iter_mut() {
                *v = standard_normal(rng);
            }
            let n = u.dot(&u).sqrt();
            if n > 0.0 {
                u /= n;
                break;
            }
        }
        Ciphertext {
            y: u,
            scheme: SchemeKind::Normalized,
            aux: Some(0.0),
        }
    }
}

/// Energy obfuscation baseline: `z = a * phi * x` with `a = exp(g)`,
/// `g ~ N(0, sigma_a^2)` drawn from the seed.
pub fn eos_encrypt(
    x: &Array1<f64>,
    phi: SensingMatrix,
    sigma_a: f64,
    seed: u64,
) -> Result<Ciphertext> {
    if !(sigma_a > 0.0) {
        return Err(Error::Config(format!(
            "sigma_a must be positive, got {sigma_a}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = (sigma_a * standard_normal(&mut rng)).exp();
    let y = phi.apply(x)? * a;
    Ok(Ciphertext {
        y,
        scheme: SchemeKind::Eos,
        aux: Some(a),
    })
}

/// Polar-method standard normal over any uniform source.
pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

const CIPHERTEXT_MAGIC: &[u8; 8] = b"CONCEAL1";

/// Wire header of a ciphertext file.
#[derive(Debug, Clone, PartialEq)]
pub struct CiphertextHeader {
    pub scheme: SchemeKind,
    pub n: u32,
    pub m: u32,
    pub l: u32,
    pub e_max: f64,
    pub block_count: u64,
    pub key_id: u64,
}

/// A ciphertext file: header plus `block_count` blocks of `m` values each.
#[derive(Debug, Clone)]
pub struct CiphertextFile {
    pub header: CiphertextHeader,
    pub blocks: Vec<Array1<f64>>,
}

impl CiphertextFile {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.blocks.len() as u64 != self.header.block_count {
            return Err(Error::DimensionMismatch(format!(
                "header says {} blocks, found {}",
                self.header.block_count,
                self.blocks.len()
            )));
        }
        let mut out = Vec::new();
        out.extend_from_slice(CIPHERTEXT_MAGIC);
        out.push(self.header.scheme.tag());
        out.extend_from_slice(&self.header.n.to_le_bytes());
        out.extend_from_slice(&self.header.m.to_le_bytes());
        out.extend_from_slice(&self.header.l.to_le_bytes());
        out.extend_from_slice(&self.header.e_max.to_le_bytes());
        out.extend_from_slice(&self.header.block_count.to_le_bytes());
        out.extend_from_slice(&self.header.key_id.to_le_bytes());
        for block in &self.blocks {
            if block.len() != self.header.m as usize {
                return Err(Error::DimensionMismatch(format!(
                    "block of length {} in a file with m={}",
                    block.len(),
                    self.header.m
                )));
            }
            for &v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let mut magic = [0u8; 8];
        read_exact(&mut cursor, &mut magic, "magic")?;
        if &magic != CIPHERTEXT_MAGIC {
            return Err(Error::Parse("not a ciphertext file (bad magic)".into()));
        }
        let mut tag = [0u8; 1];
        read_exact(&mut cursor, &mut tag, "scheme")?;
        let scheme = SchemeKind::from_tag(tag[0])?;
        let n = read_u32(&mut cursor, "n")?;
        let m = read_u32(&mut cursor, "m")?;
        let l = read_u32(&mut cursor, "l")?;
        let e_max = read_f64(&mut cursor, "e_max")?;
        let block_count = read_u64(&mut cursor, "block_count")?;
        let key_id = read_u64(&mut cursor, "key_id")?;
        if m == 0 || n == 0 || m >= n {
            return Err(Error::Parse(format!("header has invalid shape {m}x{n}")));
        }
        let mut blocks = Vec::with_capacity(block_count as usize);
        for b in 0..block_count {
            let mut block = Vec::with_capacity(m as usize);
            for i in 0..m {
                block.push(read_f64(
                    &mut cursor,
                    &format!("block {b} element {i}"),
                )?);
            }
            blocks.push(Array1::from_vec(block));
        }
        if !cursor.is_empty() {
            return Err(Error::Parse(format!(
                "{} trailing bytes after the last block",
                cursor.len()
            )));
        }
        Ok(CiphertextFile {
            header: CiphertextHeader {
                scheme,
                n,
                m,
                l,
                e_max,
                block_count,
                key_id,
            },
            blocks,
        })
    }

    pub fn write_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Debug CSV form: one block per row.
    pub fn to_csv(&self) -> String {
        let mut out = format!("block_len,{}\n", self.header.m);
        for block in &self.blocks {
            let cells: Vec<String> = block.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn read_exact(cursor: &mut &[u8], buf: &mut [u8], what: &str) -> Result<()> {
    if cursor.len() < buf.len() {
        return Err(Error::Parse(format!("ciphertext file truncated at {what}")));
    }
    buf.copy_from_slice(&cursor[..buf.len()]);
    *cursor = &cursor[buf.len()..];
    Ok(())
}

fn read_u32(cursor: &mut &[u8], what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(cursor, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(cursor: &mut &[u8], what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(cursor, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(cursor: &mut &[u8], what: &str) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(cursor, &mut b, what)?;
    Ok(f64::from_le_bytes(b))
}
