//! Spectral radius of a (sparse) square matrix.
//!
//! Plain power iteration stalls when the dominant eigenvalue is a complex
//! conjugate pair, which is the common case for random non-symmetric
//! reservoirs. Here the power iterate is advanced in blocks of `KRYLOV_DIM`
//! products; each block is an Arnoldi factorization whose small Hessenberg
//! matrix yields Ritz values for the dominant (possibly complex) pair. The
//! power direction `A^m x` is recovered from the factorization without extra
//! products, so the whole scheme is still power iteration in cost.

use nalgebra::DMatrix;

use super::sparse::MatVec;
use crate::error::{Error, Result};

pub const SPECTRAL_RTOL: f64 = 1e-8;
pub const SPECTRAL_MAX_PRODUCTS: usize = 10_000;
const KRYLOV_DIM: usize = 20;

/// `ρ(a) = max |eigenvalue|`, relative tolerance 1e-8, at most 1e4 products.
pub fn spectral_radius<M: MatVec + ?Sized>(a: &M) -> Result<f64> {
    spectral_radius_with(a, SPECTRAL_RTOL, SPECTRAL_MAX_PRODUCTS)
}

pub fn spectral_radius_with<M: MatVec + ?Sized>(
    a: &M,
    rtol: f64,
    max_products: usize,
) -> Result<f64> {
    let n = a.dim();
    if n == 0 {
        return Ok(0.0);
    }
    let m = KRYLOV_DIM.min(n);

    // Deterministic start with no special alignment to coordinate axes.
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).fract())
        .collect();
    normalize(&mut x);

    let mut products = 0;
    let mut previous: Option<f64> = None;
    let mut stable = 0;
    let mut estimate = f64::NAN;

    while products < max_products {
        let block = arnoldi(a, &x, m);
        products += block.steps;
        estimate = max_ritz_modulus(&block.h, block.steps);
        if block.breakdown {
            // Invariant subspace found: the Ritz values are eigenvalues.
            return Ok(estimate);
        }
        if let Some(p) = previous {
            if (estimate - p).abs() <= rtol * estimate.max(f64::MIN_POSITIVE) {
                stable += 1;
                if stable >= 2 {
                    return Ok(estimate);
                }
            } else {
                stable = 0;
            }
        }
        previous = Some(estimate);
        x = block.power_direction;
    }
    Err(Error::SpectralNoConvergence {
        iterations: products,
        estimate,
    })
}

struct ArnoldiBlock {
    h: DMatrix<f64>,
    steps: usize,
    breakdown: bool,
    power_direction: Vec<f64>,
}

fn arnoldi<M: MatVec + ?Sized>(a: &M, x: &[f64], m: usize) -> ArnoldiBlock {
    let n = x.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    basis.push(x.to_vec());
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    let mut w = vec![0.0; n];
    let mut steps = 0;
    let mut breakdown = false;

    for j in 0..m {
        a.mul_vec(&basis[j], &mut w);
        steps += 1;
        let w_norm0 = norm(&w);
        // Modified Gram-Schmidt with one reorthogonalization pass.
        for _ in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                h[(i, j)] += c;
                axpy(-c, v, &mut w);
            }
        }
        let beta = norm(&w);
        h[(j + 1, j)] = beta;
        if beta <= 1e-13 * w_norm0.max(f64::MIN_POSITIVE) || beta == 0.0 {
            breakdown = true;
            break;
        }
        basis.push(w.iter().map(|v| v / beta).collect());
    }

    // A^steps x expressed in the Arnoldi basis: p <- H_bar p, starting at e1.
    let mut p = vec![1.0];
    for j in 0..steps {
        let mut next = vec![0.0; j + 2];
        for (c, &pc) in p.iter().enumerate() {
            for (r, nr) in next.iter_mut().enumerate().take(c + 2) {
                *nr += h[(r, c)] * pc;
            }
        }
        p = next;
    }
    let mut power_direction = vec![0.0; n];
    for (v, &pc) in basis.iter().zip(p.iter()) {
        axpy(pc, v, &mut power_direction);
    }
    if normalize(&mut power_direction) == 0.0 {
        power_direction = x.to_vec();
    }

    ArnoldiBlock {
        h,
        steps,
        breakdown,
        power_direction,
    }
}

fn max_ritz_modulus(h: &DMatrix<f64>, k: usize) -> f64 {
    let square = h.view((0, 0), (k, k)).into_owned();
    square
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn normalize(x: &mut [f64]) -> f64 {
    let nrm = norm(x);
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    nrm
}
