//! Sparse decoding over the combined DCT + identity dictionary.
//!
//! A concealed block is sparse in neither basis alone: the signal part lives
//! in the DCT half, the energy-concealing spike in the identity half, so
//! decoding works over `[DCT | I]` without extra measurements. The solver is
//! greedy orthogonal matching pursuit standing in for the l1 program:
//! deterministic, dependency-free, adequate at this scale. Columns are
//! normalized only inside the correlation step; returned coefficients stay in
//! the original column scaling.
//!
//! The `[DCT | I]` halves overlap (coherence of order `1/sqrt(N)`), which the
//! greedy solver tolerates because the energy atom is typically the largest
//! coefficient and gets picked first.

use ndarray::{Array1, Array2};

use crate::codec::Ciphertext;
use crate::error::{Error, Result};
use crate::sensing::SensingMatrix;

/// Which half of the dictionary an atom belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// B1: orthonormal DCT-II synthesis atoms.
    Dct,
    /// B2: identity (canonical) atoms.
    Identity,
}

/// Orthonormal DCT-II synthesis matrix: column `k` holds the `k`-th cosine
/// atom, first atom scaled by `1/sqrt(N)`, the rest by `sqrt(2/N)`.
pub fn dct_matrix(n: usize) -> Array2<f64> {
    let mut psi = Array2::zeros((n, n));
    let nf = n as f64;
    for k in 0..n {
        let w = if k == 0 {
            (1.0 / nf).sqrt()
        } else {
            (2.0 / nf).sqrt()
        };
        for t in 0..n {
            psi[[t, k]] =
                w * (std::f64::consts::PI * (2.0 * t as f64 + 1.0) * k as f64 / (2.0 * nf)).cos();
        }
    }
    psi
}

/// The `N x 2N` concatenated dictionary `[DCT | I]`.
#[derive(Debug, Clone)]
pub struct Dictionary {
    n: usize,
    atoms: Array2<f64>,
}

impl Dictionary {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!(
                "dictionary needs N >= 2, got {n}"
            )));
        }
        let psi = dct_matrix(n);
        // Orthonormality check on the DCT half.
        let gram = psi.t().dot(&psi);
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (gram[[i, j]] - expect).abs() > 1e-10 {
                    return Err(Error::SingularSystem);
                }
            }
        }
        let mut atoms = Array2::zeros((n, 2 * n));
        atoms.slice_mut(ndarray::s![.., ..n]).assign(&psi);
        for i in 0..n {
            atoms[[i, n + i]] = 1.0;
        }
        Ok(Dictionary { n, atoms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn atom_count(&self) -> usize {
        2 * self.n
    }

    pub fn atoms(&self) -> &Array2<f64> {
        &self.atoms
    }

    pub fn basis_of(&self, atom: usize) -> Basis {
        if atom < self.n {
            Basis::Dct
        } else {
            Basis::Identity
        }
    }

    /// `atoms * coefficients`.
    pub fn synthesize(&self, coefficients: &Array1<f64>) -> Result<Array1<f64>> {
        if coefficients.len() != self.atom_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} atoms",
                coefficients.len(),
                self.atom_count()
            )));
        }
        Ok(self.atoms.dot(coefficients))
    }
}

/// Solver stopping rule.
#[derive(Debug, Clone, Copy)]
pub struct StopRule {
    /// Hard cap on selected atoms; must not exceed the measurement count.
    pub max_atoms: usize,
    /// Stop once the residual norm falls below this.
    pub residual_tol: f64,
}

impl StopRule {
    /// Defaults: `K = M/2`, `tol = 1e-7 * |y|`.
    pub fn defaults(m: usize, y_norm: f64) -> Self {
        StopRule {
            max_atoms: (m / 2).max(1),
            residual_tol: 1e-7 * y_norm,
        }
    }
}

/// Output of the greedy solver.
#[derive(Debug, Clone)]
pub struct SparseSolution {
    /// Dense coefficient vector over all columns (sparse in content).
    pub coefficients: Array1<f64>,
    /// Selected column indices, in selection order.
    pub support: Vec<usize>,
    /// Residual norms after each iteration.
    pub residual_trace: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// False when the solver stopped on the atom budget (or a dead residual)
    /// with the tolerance unmet; the best-so-far solution is still returned.
    pub converged: bool,
}

/// Greedy orthogonal matching pursuit. Each round selects the column most
/// correlated with the residual (after column normalization; ties go to the
/// lowest index) and re-solves least squares on the grown support.
pub fn greedy_sparse_solve(
    a: &Array2<f64>,
    y: &Array1<f64>,
    stop: &StopRule,
) -> Result<SparseSolution> {
    let (m, cols) = a.dim();
    if y.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {m}x{cols} but y has length {}",
            y.len()
        )));
    }
    if stop.max_atoms > m {
        return Err(Error::OverdeterminedSupport {
            k: stop.max_atoms,
            m,
        });
    }

    let col_norms: Vec<f64> = (0..cols).map(|j| a.column(j).dot(&a.column(j)).sqrt()).collect();

    let mut residual = y.clone();
    let mut support: Vec<usize> = Vec::new();
    let mut coefficients = Array1::zeros(cols);
    let mut residual_trace = Vec::new();
    let mut residual_norm = residual.dot(&residual).sqrt();

    while support.len() < stop.max_atoms && residual_norm > stop.residual_tol {
        let mut best = usize::MAX;
        let mut best_corr = 0.0f64;
        for j in 0..cols {
            if col_norms[j] <= 1e-300 || support.contains(&j) {
                continue;
            }
            let corr = (a.column(j).dot(&residual) / col_norms[j]).abs();
            if corr > best_corr {
                best_corr = corr;
                best = j;
            }
        }
        // Residual orthogonal to every remaining column: nothing to gain.
        if best == usize::MAX || best_corr <= 1e-13 * residual_norm.max(1e-300) {
            break;
        }
        support.push(best);

        let coeffs = least_squares_on(a, y, &support)?;
        residual = y.clone();
        for (idx, &j) in support.iter().enumerate() {
            residual = residual - coeffs[idx] * &a.column(j).to_owned();
        }
        residual_norm = residual.dot(&residual).sqrt();
        residual_trace.push(residual_norm);

        coefficients.fill(0.0);
        for (idx, &j) in support.iter().enumerate() {
            coefficients[j] = coeffs[idx];
        }
    }

    let converged = residual_norm <= stop.residual_tol;
    Ok(SparseSolution {
        iterations: support.len(),
        coefficients,
        support,
        residual_trace,
        residual_norm,
        converged,
    })
}

/// Least squares restricted to the selected columns, via normal equations
/// and Gaussian elimination with partial pivoting. Supports stay small (at
/// most M), so this is cheap and stable enough here.
fn least_squares_on(a: &Array2<f64>, y: &Array1<f64>, support: &[usize]) -> Result<Vec<f64>> {
    let k = support.len();
    let mut gram = vec![vec![0.0f64; k + 1]; k];
    for (r, &jr) in support.iter().enumerate() {
        for (c, &jc) in support.iter().enumerate() {
            gram[r][c] = a.column(jr).dot(&a.column(jc));
        }
        gram[r][k] = a.column(jr).dot(y);
    }
    // Forward elimination.
    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&r1, &r2| {
                gram[r1][col]
                    .abs()
                    .partial_cmp(&gram[r2][col].abs())
                    .unwrap()
            })
            .unwrap();
        gram.swap(col, pivot_row);
        let pivot = gram[col][col];
        if pivot.abs() < 1e-300 {
            return Err(Error::SingularSystem);
        }
        for row in (col + 1)..k {
            let f = gram[row][col] / pivot;
            for c in col..=k {
                gram[row][c] -= f * gram[col][c];
            }
        }
    }
    // Back substitution.
    let mut x = vec![0.0f64; k];
    for row in (0..k).rev() {
        let mut v = gram[row][k];
        for c in (row + 1)..k {
            v -= gram[row][c] * x[c];
        }
        x[row] = v / gram[row][row];
    }
    Ok(x)
}

/// Decoded block.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    /// Recovered concealed vector, `atoms * coefficients` exactly.
    pub x_prime_hat: Array1<f64>,
    /// Sparse coefficient vector over the `2N` atoms.
    pub coefficients: Array1<f64>,
    /// `|y - phi * x_prime_hat|`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Decode a ciphertext with its sensing matrix over the dictionary: solve
/// the sparse program on `phi * atoms`, then synthesize.
pub fn decode(
    y: &Ciphertext,
    phi: &SensingMatrix,
    dict: &Dictionary,
    stop: &StopRule,
) -> Result<RecoveryResult> {
    if phi.n() != dict.n() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has N={} but dictionary has N={}",
            phi.n(),
            dict.n()
        )));
    }
    if y.y.len() != phi.m() {
        return Err(Error::DimensionMismatch(format!(
            "ciphertext has length {} but matrix has M={}",
            y.y.len(),
            phi.m()
        )));
    }
    let a = phi.entries().dot(dict.atoms());
    let solution = greedy_sparse_solve(&a, &y.y, stop)?;
    let x_prime_hat = dict.synthesize(&solution.coefficients)?;
    let residual = &y.y - &phi.apply(&x_prime_hat)?;
    Ok(RecoveryResult {
        x_prime_hat,
        coefficients: solution.coefficients,
        residual_norm: residual.dot(&residual).sqrt(),
        iterations: solution.iterations,
        converged: solution.converged,
    })
}

/// Average mean square error over block pairs: mean of `|x - x_hat|^2 / len`.
pub fn amse(originals: &[Array1<f64>], recons: &[Array1<f64>]) -> Result<f64> {
    if originals.len() != recons.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} originals vs {} reconstructions",
            originals.len(),
            recons.len()
        )));
    }
    if originals.is_empty() {
        return Err(Error::EmptyRequest);
    }
    let mut total = 0.0;
    for (x, xh) in originals.iter().zip(recons) {
        if x.len() != xh.len() {
            return Err(Error::DimensionMismatch(format!(
                "block length {} vs {}",
                x.len(),
                xh.len()
            )));
        }
        let d = x - xh;
        total += d.dot(&d) / x.len() as f64;
    }
    Ok(total / originals.len() as f64)
}
