//! Preconditioned Lanczos estimates of the extreme eigenvalues of `P A`, with
//! `A` Hermitian and `P` a fixed Hermitian positive definite map.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{dot, random_vector, C64};
use crate::error::{Error, Result};

const MAX_RESTARTS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct LanczosEstimate {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub iterations: usize,
    pub restarts: usize,
    /// False when the restart budget ran out before the stagnation test passed.
    pub converged: bool,
}

/// Extreme eigenvalues of `apply_minv ∘ apply_a` by Lanczos in the inner
/// product induced by the preconditioner, with full reorthogonalization.
///
/// Iteration stops once both extremes change by less than `tol` (relative)
/// over five consecutive steps, or after `k_max` steps. A breakdown restarts
/// from a fresh random vector orthogonal to the current basis; after three
/// restarts the partial estimate is returned with `converged = false`.
pub fn lanczos_extreme<FA, FP>(mut apply_a: FA, mut apply_minv: FP, n: usize, k_max: usize, tol: f64, seed: u64) -> Result<LanczosEstimate>
where
    FA: FnMut(&[C64]) -> Vec<C64>,
    FP: FnMut(&[C64]) -> Vec<C64>,
{
    if n == 0 {
        return Err(Error::Breakdown { restarts: 0 });
    }
    let k_max = k_max.min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // q_j span the Krylov space in the P^{-1} inner product; p_j = P^{-1} q_j
    let mut qs: Vec<Vec<C64>> = Vec::new();
    let mut ps: Vec<Vec<C64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut restarts = 0;
    let mut history: Vec<(f64, f64)> = Vec::new();

    let mut r = random_vector(n, &mut rng);
    let mut z = apply_minv(&r);
    let b0 = dot(&r, &z).re;
    if !(b0 > 0.0) {
        return Err(Error::NotHpd);
    }
    let mut b = b0.sqrt();
    let mut converged = false;
    loop {
        let q: Vec<C64> = z.iter().map(|v| v / b).collect();
        let p: Vec<C64> = r.iter().map(|v| v / b).collect();
        qs.push(q);
        ps.push(p);
        let j = qs.len() - 1;
        let mut w = apply_a(&qs[j]);
        let a = dot(&qs[j], &w).re;
        alpha.push(a);
        // full reorthogonalization (twice) against all previous directions
        for _ in 0..2 {
            for i in 0..=j {
                let c = dot(&qs[i], &w);
                for (wk, pk) in w.iter_mut().zip(&ps[i]) {
                    *wk -= c * pk;
                }
            }
        }
        z = apply_minv(&w);
        let bb = dot(&w, &z).re;
        let (lo, hi) = tridiag_extremes(&alpha, &beta);
        history.push((lo, hi));
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        if history.len() >= 6 {
            let (lo0, hi0) = history[history.len() - 6];
            if (lo - lo0).abs() <= tol * scale && (hi - hi0).abs() <= tol * scale {
                converged = true;
                break;
            }
        }
        if qs.len() >= k_max {
            converged = qs.len() >= n;
            break;
        }
        if bb <= (1e-13 * scale).powi(2) * dot(&qs[j], &ps[j]).re.max(1.0) {
            // invariant subspace: continue with a fresh orthogonal direction
            if restarts == MAX_RESTARTS {
                break;
            }
            restarts += 1;
            r = random_vector(n, &mut rng);
            for _ in 0..2 {
                for i in 0..qs.len() {
                    let c = dot(&qs[i], &r);
                    for (rk, pk) in r.iter_mut().zip(&ps[i]) {
                        *rk -= c * pk;
                    }
                }
            }
            z = apply_minv(&r);
            let nb = dot(&r, &z).re;
            if !(nb > 0.0) {
                break;
            }
            b = nb.sqrt();
            beta.push(0.0);
            continue;
        }
        b = bb.sqrt();
        beta.push(b);
        r = w;
    }
    let (lambda_min, lambda_max) = *history.last().expect("at least one step");
    Ok(LanczosEstimate { lambda_min, lambda_max, iterations: alpha.len(), restarts, converged })
}

fn tridiag_extremes(alpha: &[f64], beta: &[f64]) -> (f64, f64) {
    let k = alpha.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let ev = t.symmetric_eigenvalues();
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}
