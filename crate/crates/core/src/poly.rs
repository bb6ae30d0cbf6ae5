//! Polynomial root finding for the settings search: Aberth–Ehrlich
//! simultaneous iteration followed by per-root Newton polishing. Degrees here
//! are at most `n - 1` (a dozen at desk scale), where this method is robust
//! without an eigenvalue backend.

use num_complex::Complex64;

/// Evaluates `p(z)` for ascending coefficients.
pub fn eval(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// Evaluates `(p(z), p'(z))`.
pub fn eval_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::ZERO;
    let mut dp = Complex64::ZERO;
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Coefficient-wise sum.
pub fn add(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; a.len().max(b.len())];
    for (i, &c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, &c) in b.iter().enumerate() {
        out[i] += c;
    }
    out
}

/// Product of two coefficient vectors.
pub fn mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::ZERO; a.len() + b.len() - 1];
    for (i, &ca) in a.iter().enumerate() {
        if ca == Complex64::ZERO {
            continue;
        }
        for (j, &cb) in b.iter().enumerate() {
            out[i + j] += ca * cb;
        }
    }
    out
}

/// Drops numerically-zero leading (highest-degree) coefficients relative to
/// the largest coefficient magnitude. Returns an empty slice-equivalent for
/// the zero polynomial.
pub fn trim(coeffs: &[Complex64]) -> Vec<Complex64> {
    let maxc = coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    if maxc == 0.0 {
        return Vec::new();
    }
    let mut out: Vec<Complex64> = coeffs.to_vec();
    while let Some(last) = out.last() {
        if last.norm() <= 1e-13 * maxc && out.len() > 1 {
            out.pop();
        } else {
            break;
        }
    }
    out
}

/// True when every coefficient is numerically zero.
pub fn is_zero(coeffs: &[Complex64]) -> bool {
    let maxc = coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    maxc <= 1e-300
}

/// All complex roots of the polynomial (with multiplicity). The zero
/// polynomial and constants yield no roots.
pub fn roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let c = trim(coeffs);
    let d = c.len().saturating_sub(1);
    match d {
        0 => Vec::new(),
        1 => vec![-c[0] / c[1]],
        2 => quadratic(&c),
        _ => {
            let mut rs = aberth(&c);
            for r in rs.iter_mut() {
                *r = newton_polish(&c, *r);
            }
            rs
        }
    }
}

/// Numerically stable quadratic formula.
fn quadratic(c: &[Complex64]) -> Vec<Complex64> {
    let (a, b, c0) = (c[2], c[1], c[0]);
    let disc = (b * b - 4.0 * a * c0).sqrt();
    // Pick the sign that avoids cancellation in -b -/+ disc.
    let s = if (b.conj() * disc).re >= 0.0 { disc } else { -disc };
    let q = -0.5 * (b + s);
    if q.norm() == 0.0 {
        // b = 0 and c0 = 0: double root at origin; or symmetric pair.
        return vec![disc / (2.0 * a), -disc / (2.0 * a)];
    }
    vec![q / a, c0 / q]
}

fn aberth(c: &[Complex64]) -> Vec<Complex64> {
    let d = c.len() - 1;
    let lead = c[d];
    // Initial guesses on a circle sized by the root-magnitude bound,
    // centered at the mean of the roots.
    let center = -c[d - 1] / (lead * d as f64);
    let mut radius = 0.0f64;
    for (i, ci) in c.iter().enumerate().take(d) {
        let bound = (ci.norm() / lead.norm()).powf(1.0 / (d - i) as f64);
        radius = radius.max(bound);
    }
    radius = radius.max(1e-3) * 1.1;
    let mut zs: Vec<Complex64> = (0..d)
        .map(|j| {
            let angle = 2.0 * std::f64::consts::PI * j as f64 / d as f64 + 0.376;
            center + Complex64::from_polar(radius, angle)
        })
        .collect();

    for _iter in 0..300 {
        let mut max_step = 0.0f64;
        for j in 0..d {
            let (p, dp) = eval_with_derivative(c, zs[j]);
            if p.norm() == 0.0 {
                continue;
            }
            let w = if dp.norm() == 0.0 {
                // Stationary start; nudge off the critical point.
                Complex64::new(1e-8, 1e-8)
            } else {
                p / dp
            };
            let mut sum = Complex64::ZERO;
            for k in 0..d {
                if k != j {
                    let diff = zs[j] - zs[k];
                    if diff.norm() > 1e-300 {
                        sum += 1.0 / diff;
                    }
                }
            }
            let denom = Complex64::ONE - w * sum;
            let step = if denom.norm() < 1e-12 { w } else { w / denom };
            zs[j] -= step;
            max_step = max_step.max(step.norm() / (1.0 + zs[j].norm()));
        }
        if max_step < 1e-14 {
            break;
        }
    }
    zs
}

fn newton_polish(c: &[Complex64], mut z: Complex64) -> Complex64 {
    for _ in 0..40 {
        let (p, dp) = eval_with_derivative(c, z);
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        z -= step;
        if step.norm() <= 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }
    z
}
