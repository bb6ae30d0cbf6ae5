//! Small dense linear-algebra helpers: a cyclic Jacobi eigensolver for
//! complex Hermitian matrices (local dimensions here are tiny, so an
//! iterative dense method beats pulling in a LAPACK backend) and phase
//! canonicalization for frame vectors.

use num_complex::Complex64;

/// Eigendecomposition of a Hermitian `d x d` row-major matrix.
/// Returns `(eigenvalues, eigenvectors)` sorted by descending eigenvalue;
/// `eigenvectors[i]` is the unit eigenvector for `eigenvalues[i]`.
pub fn hermitian_eigen(mat: &[Complex64], d: usize) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    assert_eq!(mat.len(), d * d, "matrix must be d x d");
    let mut a = mat.to_vec();
    // v accumulates the product of Jacobi rotations, columns = eigenvectors.
    let mut v = vec![Complex64::ZERO; d * d];
    for i in 0..d {
        v[i * d + i] = Complex64::ONE;
    }

    let scale: f64 = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt().max(1.0);
    let tol = 1e-15 * scale;
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a[p * d + q].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                let m = apq.norm();
                if m <= tol * 1e-2 {
                    continue;
                }
                // Absorb the off-diagonal phase so the 2x2 block is real
                // symmetric, then rotate it away.
                let u = apq / m;
                let app = a[p * d + p].re;
                let aqq = a[q * d + q].re;
                let theta = 0.5 * (2.0 * m).atan2(app - aqq);
                let (s, c) = theta.sin_cos();
                // J = diag(1, conj(u)) * R(theta): the phase factor makes the
                // pivot entry real, the real rotation then cancels it.
                let jpp = Complex64::new(c, 0.0);
                let jpq = Complex64::new(-s, 0.0);
                let jqp = u.conj() * s;
                let jqq = u.conj() * c;
                // Column update: A <- A * J, V <- V * J.
                for r in 0..d {
                    let arp = a[r * d + p];
                    let arq = a[r * d + q];
                    a[r * d + p] = arp * jpp + arq * jqp;
                    a[r * d + q] = arp * jpq + arq * jqq;
                    let vrp = v[r * d + p];
                    let vrq = v[r * d + q];
                    v[r * d + p] = vrp * jpp + vrq * jqp;
                    v[r * d + q] = vrp * jpq + vrq * jqq;
                }
                // Row update: A <- J^dagger * A.
                for col in 0..d {
                    let apc = a[p * d + col];
                    let aqc = a[q * d + col];
                    a[p * d + col] = jpp.conj() * apc + jqp.conj() * aqc;
                    a[q * d + col] = jpq.conj() * apc + jqq.conj() * aqc;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        a[j * d + j]
            .re
            .partial_cmp(&a[i * d + i].re)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * d + i].re).collect();
    let eigenvectors: Vec<Vec<Complex64>> = order
        .iter()
        .map(|&i| (0..d).map(|r| v[r * d + i]).collect())
        .collect();
    (eigenvalues, eigenvectors)
}

/// Dominant eigenpair of a Hermitian positive semidefinite matrix.
pub fn dominant_eigenpair(mat: &[Complex64], d: usize) -> (f64, Vec<Complex64>) {
    let (vals, vecs) = hermitian_eigen(mat, d);
    (vals[0], vecs.into_iter().next().unwrap())
}

/// Multiplies the vector by a unit phase so its largest-magnitude component
/// (lowest index on ties) becomes real positive. Leaves zero vectors alone.
pub fn canonical_phase(v: &mut [Complex64]) {
    let mut best = 0usize;
    let mut best_mag = 0.0f64;
    for (i, c) in v.iter().enumerate() {
        let m = c.norm();
        if m > best_mag + 1e-14 * best_mag.max(1.0) {
            best = i;
            best_mag = m;
        }
    }
    if best_mag == 0.0 {
        return;
    }
    let phase = v[best] / best_mag;
    let correction = phase.conj();
    for c in v.iter_mut() {
        *c *= correction;
    }
}

/// The unit vector orthogonal to a qubit-frame vector `(b0, b1)`, with the
/// phase convention `(-conj(b1), conj(b0))`.
pub fn qubit_orthogonal(b: [Complex64; 2]) -> [Complex64; 2] {
    let n = (b[0].norm_sqr() + b[1].norm_sqr()).sqrt();
    [-b[1].conj() / n, b[0].conj() / n]
}

/// `<a|b>` for short slices.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(v: &mut [Complex64]) {
    let n = norm(v);
    if n > 0.0 {
        for c in v.iter_mut() {
            *c /= n;
        }
    }
}
