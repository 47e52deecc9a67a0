//! Seeded sampling of Gaussian matrices, Haar unitaries/isometries, random
//! states and channels.

use crate::tensor::Cplx;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard complex Gaussian entries, `rows x cols`, row-major.
pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Cplx> {
    (0..rows * cols)
        .map(|_| Cplx::new(gaussian(rng), gaussian(rng)))
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Haar-random unitary of side `n` via QR of a complex Gaussian matrix with
/// the phase correction that makes the distribution exactly Haar.
pub fn haar_unitary(rng: &mut ChaCha8Rng, n: usize) -> Vec<Cplx> {
    haar_isometry(rng, n, n)
}

/// Haar-random isometry from `cols`-dim into `rows`-dim space (`rows >=
/// cols`), row-major `rows x cols`, satisfying `V^dag V = 1`.
pub fn haar_isometry(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Cplx> {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = gaussian_matrix(rng, rows, cols);
    let mut m = faer::Mat::<faer::complex_native::c64>::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let v = g[r * cols + c];
            m[(r, c)] = faer::complex_native::c64::new(v.re, v.im);
        }
    }
    let qr = m.qr();
    let q = qr.compute_thin_q();
    let rm = qr.compute_thin_r();
    // phase fix: multiply column j by conj(phase of R[j,j])
    let mut out = vec![Cplx::new(0.0, 0.0); rows * cols];
    for j in 0..cols {
        let d = Cplx::new(rm[(j, j)].re, rm[(j, j)].im);
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Cplx::new(1.0, 0.0) };
        for i in 0..rows {
            let q_ij = Cplx::new(q[(i, j)].re, q[(i, j)].im);
            out[i * cols + j] = q_ij * ph.conj();
        }
    }
    out
}

/// Random density matrix of side `n` (normalized Wishart).
pub fn random_density(rng: &mut ChaCha8Rng, n: usize) -> Vec<Cplx> {
    let g = gaussian_matrix(rng, n, n);
    let mut rho = vec![Cplx::new(0.0, 0.0); n * n];
    for r in 0..n {
        for c in 0..n {
            let mut s = Cplx::new(0.0, 0.0);
            for k in 0..n {
                s += g[r * n + k] * g[c * n + k].conj();
            }
            rho[r * n + c] = s;
        }
    }
    let tr: f64 = (0..n).map(|i| rho[i * n + i].re).sum();
    for e in rho.iter_mut() {
        *e /= tr;
    }
    rho
}

/// Kraus operators of a random CPTP map `d_in -> d_out` with environment
/// dimension `d_env`, obtained by slicing a Haar isometry.
pub fn random_cptp_kraus(
    rng: &mut ChaCha8Rng,
    d_in: usize,
    d_out: usize,
    d_env: usize,
) -> Vec<Vec<Cplx>> {
    let v = haar_isometry(rng, d_out * d_env, d_in);
    // rows indexed (out, env): entry v[(o*d_env+e)*d_in + i]
    (0..d_env)
        .map(|e| {
            let mut k = vec![Cplx::new(0.0, 0.0); d_out * d_in];
            for o in 0..d_out {
                for i in 0..d_in {
                    k[o * d_in + i] = v[(o * d_env + e) * d_in + i];
                }
            }
            k
        })
        .collect()
}

/// Random pure state amplitudes of dimension `n`, normalized.
pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Vec<Cplx> {
    let g = gaussian_matrix(rng, n, 1);
    let norm: f64 = g.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    g.into_iter().map(|a| a / norm).collect()
}
