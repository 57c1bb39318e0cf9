#![allow(dead_code)]

use advdesign::linalg::Matrix;
use advdesign::models::{Design, FisherModel};
use advdesign::rng::{uniform, Stream};

/// Central differences of `f` at `x` with per-coordinate step `h`.
pub fn central_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max_i |a_i - b_i| / max_i |b_i|`.
pub fn normwise_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    let n = m.rows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
        }
        if off <= 1e-30 * (1.0 + a.max_abs().powi(2)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)] == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    a.diag()
}

/// A design drawn uniformly over the model's region, stored in the model's
/// constraint coordinates.
pub fn random_design<M: FisherModel + ?Sized>(model: &M, rng: &mut Stream) -> Design {
    let spec = model.spec();
    let (lo, hi) = spec.region;
    let natural: Vec<f64> = (0..spec.design_length())
        .map(|_| {
            // stay clear of the logit endpoints
            let u = uniform(rng, 0.02, 0.98);
            lo + u * (hi - lo)
        })
        .collect();
    Design::from_natural(&natural, spec.constraint).unwrap()
}
