//! Shared dense/iterative linear-algebra kernels: truncated SVD for bond
//! splitting, a restarted Lanczos ground-state solver, and an Arnoldi
//! eigenvalue estimator for transfer maps.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eig, Eigh, SVDInto, UPLO};
use num_complex::Complex64 as C64;

use crate::{Error, Result};

/// Result of an SVD truncated to bond dimension `dmax` / discarded weight
/// `tol`. Singular values are descending and keep their raw scale; the
/// discarded weight is relative to the total spectral weight.
pub struct TruncatedSvd {
    pub u: Array2<C64>,
    pub s: Array1<f64>,
    pub vt: Array2<C64>,
    pub discarded_weight: f64,
}

/// SVD `m` and keep the smallest rank that fits `dmax` with discarded
/// weight at or below `tol`. Exceeding `tol` because of the hard `dmax`
/// cap is not an error; the weight is reported for the caller to track.
pub fn truncated_svd(m: Array2<C64>, dmax: usize, tol: f64) -> Result<TruncatedSvd> {
    crate::init_blas();
    let (u, sv, vt) = m
        .svd_into(true, true)
        .map_err(|e| Error::NoConvergence(format!("SVD failed: {e}")))?;
    let u = u.expect("requested U");
    let vt = vt.expect("requested V^T");

    let total: f64 = sv.iter().map(|x| x * x).sum();
    if total <= 0.0 {
        return Err(Error::NoConvergence("SVD of a zero matrix".into()));
    }
    let floor = sv[0] * 1e-14;
    let mut keep = sv.len().min(dmax.max(1));
    while keep > 1 && sv[keep - 1] <= floor {
        keep -= 1;
    }
    // shrink further while the discarded weight stays within tol
    let mut discarded: f64 = sv.iter().skip(keep).map(|x| x * x).sum::<f64>() / total;
    while keep > 1 {
        let w = sv[keep - 1] * sv[keep - 1] / total;
        if discarded + w > tol {
            break;
        }
        discarded += w;
        keep -= 1;
    }

    Ok(TruncatedSvd {
        u: u.slice(s![.., ..keep]).to_owned(),
        s: sv.slice(s![..keep]).to_owned(),
        vt: vt.slice(s![..keep, ..]).to_owned(),
        discarded_weight: discarded,
    })
}

/// Lowest eigenpair from a restarted Lanczos iteration.
pub struct GroundPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub matvecs: usize,
}

/// Lanczos with full reorthogonalization inside each restart block.
///
/// `matvec` writes `H v` into its second argument. The matrix must be real
/// symmetric. Restarts continue from the best Ritz vector until the
/// relative residual drops below `tol`.
pub fn lanczos_ground<F>(mut matvec: F, dim: usize, tol: f64) -> Result<GroundPair>
where
    F: FnMut(&[f64], &mut [f64]),
{
    crate::init_blas();
    assert!(dim > 0);
    let block = dim.min(80);
    let max_restarts = 200;

    // deterministic start vector with no accidental symmetry
    let mut v0: Vec<f64> = (0..dim)
        .map(|i| {
            let x = (i as u64).wrapping_mul(0x9e3779b97f4a7c15).rotate_left(31);
            (x as f64) / (u64::MAX as f64) - 0.5 + 1e-3
        })
        .collect();
    normalize(&mut v0);

    let mut matvecs = 0;
    let mut last_residual = f64::INFINITY;
    for _ in 0..max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![v0.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut w = vec![0.0; dim];

        for j in 0..block {
            matvec(&basis[j], &mut w);
            matvecs += 1;
            let a = dot(&basis[j], &w);
            alphas.push(a);
            axpy(&mut w, -a, &basis[j]);
            if j > 0 {
                let b = betas[j - 1];
                axpy(&mut w, -b, &basis[j - 1]);
            }
            // full reorthogonalization, twice for safety
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    axpy(&mut w, -c, q);
                }
            }
            let b = norm(&w);
            if b < 1e-13 || j + 1 == block {
                break;
            }
            betas.push(b);
            let mut next = w.clone();
            scale(&mut next, 1.0 / b);
            basis.push(next);
        }

        let m = alphas.len();
        let mut t = Array2::<f64>::zeros((m, m));
        for i in 0..m {
            t[[i, i]] = alphas[i];
            if i + 1 < m {
                t[[i, i + 1]] = betas[i];
                t[[i + 1, i]] = betas[i];
            }
        }
        let (evals, evecs) = t
            .eigh(UPLO::Lower)
            .map_err(|e| Error::NoConvergence(format!("tridiagonal eigh failed: {e}")))?;
        // eigh returns ascending eigenvalues
        let theta = evals[0];
        let y = evecs.column(0);
        let mut ritz = vec![0.0; dim];
        for (j, q) in basis.iter().enumerate() {
            axpy(&mut ritz, y[j], q);
        }
        normalize(&mut ritz);

        matvec(&ritz, &mut w);
        matvecs += 1;
        axpy(&mut w, -theta, &ritz);
        let res = norm(&w) / theta.abs().max(1e-300);
        if res < tol {
            return Ok(GroundPair { value: theta, vector: ritz, residual: res, matvecs });
        }
        last_residual = res;
        v0 = ritz;
    }
    Err(Error::NoConvergence(format!(
        "Lanczos stalled at relative residual {last_residual:.3e}"
    )))
}

/// Leading eigenvalues (by modulus, descending) of a linear map on `C^dim`
/// estimated with a single Arnoldi factorization.
pub fn arnoldi_top_eigs<F>(mut map: F, dim: usize, want: usize) -> Result<Vec<C64>>
where
    F: FnMut(&[C64], &mut [C64]),
{
    crate::init_blas();
    assert!(dim > 0 && want > 0);
    let m = dim.min(60.max(2 * want));
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    let mut h = Array2::<C64>::zeros((m + 1, m));

    let mut v0: Vec<C64> = (0..dim)
        .map(|i| {
            let x = (i as u64).wrapping_mul(0xd1b54a32d192ed03).rotate_left(17);
            C64::new((x as f64) / (u64::MAX as f64) + 0.1, ((x >> 32) as f64) * 2e-10 - 0.2)
        })
        .collect();
    let n0 = cnorm(&v0);
    v0.iter_mut().for_each(|z| *z /= n0);
    basis.push(v0);

    let mut steps = 0;
    let mut w = vec![C64::new(0.0, 0.0); dim];
    for j in 0..m {
        map(&basis[j], &mut w);
        for (i, q) in basis.iter().enumerate() {
            let c = cdot(q, &w);
            h[[i, j]] = c;
            for (wk, qk) in w.iter_mut().zip(q) {
                *wk -= c * qk;
            }
        }
        // one re-orthogonalization pass
        for (i, q) in basis.iter().enumerate() {
            let c = cdot(q, &w);
            h[[i, j]] += c;
            for (wk, qk) in w.iter_mut().zip(q) {
                *wk -= c * qk;
            }
        }
        let b = cnorm(&w);
        steps = j + 1;
        if b < 1e-12 || j + 1 == m {
            break;
        }
        h[[j + 1, j]] = C64::new(b, 0.0);
        let mut next = w.clone();
        next.iter_mut().for_each(|z| *z /= b);
        basis.push(next);
    }

    let hm = h.slice(s![..steps, ..steps]).to_owned();
    let (evals, _) = hm
        .eig()
        .map_err(|e| Error::NoConvergence(format!("Hessenberg eig failed: {e}")))?;
    let mut out = evals.to_vec();
    out.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
    out.truncate(want);
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) {
    let n = norm(a);
    scale(a, 1.0 / n);
}

fn scale(a: &mut [f64], c: f64) {
    a.iter_mut().for_each(|x| *x *= c);
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cnorm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn truncated_svd_keeps_rank_and_reports_weight() {
        // rank-2 matrix with singular values 2 and 1
        let u = [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        let mut m = Array2::<C64>::zeros((3, 4));
        for i in 0..3 {
            m[[i, 0]] = C64::new(2.0 * u[i][0], 0.0);
            m[[i, 1]] = C64::new(1.0 * u[i][1], 0.0);
        }
        let r = truncated_svd(m.clone(), 8, 1e-12).unwrap();
        assert_eq!(r.s.len(), 2);
        assert_abs_diff_eq!(r.s[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.s[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.discarded_weight, 0.0, epsilon = 1e-14);

        let r = truncated_svd(m, 1, 1e-12).unwrap();
        assert_eq!(r.s.len(), 1);
        assert_abs_diff_eq!(r.discarded_weight, 1.0 / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn truncated_svd_reconstructs() {
        let m = Array2::<C64>::from_shape_fn((6, 5), |(i, j)| {
            C64::new((i as f64 - 2.0) * (j as f64 + 1.0), (i * j) as f64 * 0.1)
        });
        let r = truncated_svd(m.clone(), 10, 0.0).unwrap();
        let rec = r.u.dot(&Array2::from_diag(&r.s.mapv(|x| C64::new(x, 0.0)))).dot(&r.vt);
        let err = (&rec - &m).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-12, "reconstruction error {err}");
    }

    #[test]
    fn lanczos_finds_smallest_eigenvalue() {
        // diagonal + weak coupling; smallest eigenvalue known from dense eig
        let n = 40;
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            a[[i, i]] = (i as f64) - 7.3;
            if i + 1 < n {
                a[[i, i + 1]] = 0.5;
                a[[i + 1, i]] = 0.5;
            }
        }
        let (dense, _) = a.clone().eigh(UPLO::Lower).unwrap();
        let got = lanczos_ground(
            |v, out| {
                for i in 0..n {
                    let mut acc = a[[i, i]] * v[i];
                    if i > 0 {
                        acc += 0.5 * v[i - 1];
                    }
                    if i + 1 < n {
                        acc += 0.5 * v[i + 1];
                    }
                    out[i] = acc;
                }
            },
            n,
            1e-11,
        )
        .unwrap();
        assert_abs_diff_eq!(got.value, dense[0], epsilon = 1e-9);
        assert!(got.residual < 1e-11);
    }

    #[test]
    fn arnoldi_matches_dense_eigenvalues() {
        let n = 30;
        let a = Array2::<C64>::from_shape_fn((n, n), |(i, j)| {
            let x = ((i * 7 + j * 13) % 11) as f64 / 11.0 - 0.4;
            let y = ((i * 3 + j * 5) % 7) as f64 / 9.0 - 0.3;
            C64::new(x, y) / (1.0 + (i as f64 - j as f64).abs())
        });
        let dense = {
            let (ev, _) = a.clone().eig().unwrap();
            let mut v: Vec<C64> = ev.to_vec();
            v.sort_by(|p, q| q.norm().partial_cmp(&p.norm()).unwrap());
            v
        };
        let got = arnoldi_top_eigs(
            |v, out| {
                for i in 0..n {
                    out[i] = (0..n).map(|j| a[[i, j]] * v[j]).sum();
                }
            },
            n,
            2,
        )
        .unwrap();
        assert_abs_diff_eq!(got[0].norm(), dense[0].norm(), epsilon = 1e-8);
        assert_abs_diff_eq!(got[1].norm(), dense[1].norm(), epsilon = 1e-8);
    }
}
