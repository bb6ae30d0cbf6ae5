//! Aligned two-level frame extracted from a stationary product point.
//!
//! For each party the frame keeps the product factor `e0` and a second unit
//! vector `e1` orthogonal to it. The structure of the state relative to the
//! frame is summarized two independent ways:
//!
//! * `support`: norms of the residual tensors `G_mask`, obtained by
//!   projecting every party outside `mask` off its factor with
//!   `I - |e0><e0|` and contracting `<e0|` on the parties inside `mask`.
//!   This route never references `e1`.
//! * `h`: the table `h_mask = <state| (e0 on mask) (e1 elsewhere) >`,
//!   obtained by contracting the frame vectors directly.
//!
//! For all-qubit states the two routes must agree entry by entry, which
//! `validate` checks. The scan is restricted to subsets missing at least two
//! parties: subsets missing exactly one measure the stationarity residual of
//! the product point and vanish at true stationary points.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::optimizer::{self, OptimizerConfig};
use crate::state::{LocalVector, ProductVector, PureState, SubsetMask};

#[derive(Clone, Debug)]
pub struct FrameOptions {
    /// Threshold on residual-tensor norms for membership in the support.
    pub eps: f64,
    /// Allowed magnitude of the one-party-missing entries (stationarity).
    pub residual_check: f64,
    /// Seed for the rank-one fit used on parties with local dimension > 2.
    pub seed: u64,
    pub fit_restarts: usize,
}

impl Default for FrameOptions {
    fn default() -> Self {
        FrameOptions {
            eps: optimizer::SUPPORT_EPSILON,
            residual_check: 1e-8,
            seed: 0,
            fit_restarts: 8,
        }
    }
}

/// One party's frame vectors. `e0` is the product factor, `e1` a unit
/// vector orthogonal to it; both carry a canonical phase (largest component
/// real positive) so repeated runs produce identical frames.
#[derive(Clone, Debug, PartialEq)]
pub struct FramePair {
    pub e0: LocalVector,
    pub e1: LocalVector,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportEntry {
    pub mask: SubsetMask,
    pub norm: f64,
}

#[derive(Clone, Debug)]
pub struct AlignedFrame {
    dims: Vec<usize>,
    pairs: Vec<FramePair>,
    /// Entries with norm above `eps`, sorted by mask value.
    pub support: Vec<SupportEntry>,
    /// Largest subset size appearing in the support.
    pub degree: usize,
    /// Smallest mask among the support entries of maximal size.
    pub pivot: SubsetMask,
    /// Frame-overlap table indexed by mask value; bit `k-1` set means party
    /// `k` contributes `e0`, clear means `e1`.
    h: Vec<Complex64>,
    /// `|h|` at the full mask (the overlap with the product point).
    pub overlap: f64,
}

/// Amplitudes of `G_mask` over the parties outside `mask`, in ascending
/// party order.
pub fn residual_tensor(
    state: &PureState,
    pv: &ProductVector,
    mask: SubsetMask,
) -> Result<Vec<Complex64>> {
    let n = state.n_parties();
    if pv.n_parties() != n {
        return Err(Error::FactorCount {
            got: pv.n_parties(),
            expected: n,
        });
    }
    if !mask.is_proper_subset(n) {
        return Err(Error::NotProperSubset { mask: mask.0, n });
    }
    let pv = pv.normalized()?;
    // Contract the in-mask bras from the highest party down so earlier
    // 1-based indices stay valid.
    let mut cur = state.clone();
    for party in mask.members(n).into_iter().rev() {
        cur = cur.contract_bra(party, &pv.factor(party).components);
    }
    // Remaining parties are the complement in ascending order, renumbered
    // from 1. Project each off its factor.
    for (pos, party) in mask.complement(n).members(n).into_iter().enumerate() {
        let p = &pv.factor(party).components;
        let d = p.len();
        let mut proj = vec![Complex64::ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { Complex64::ONE } else { Complex64::ZERO };
                proj[i * d + j] = delta - p[i] * p[j].conj();
            }
        }
        cur = cur.apply_local(pos + 1, &proj);
    }
    Ok(cur.amps().to_vec())
}

pub fn residual_norm(state: &PureState, pv: &ProductVector, mask: SubsetMask) -> Result<f64> {
    let amps = residual_tensor(state, pv, mask)?;
    Ok(amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
}

fn scan_masks(n: usize) -> Vec<SubsetMask> {
    SubsetMask::proper_subsets(n)
        .filter(|m| m.size() + 2 <= n)
        .collect()
}

/// True when any scanned subset carries residual weight above `eps`.
/// Used as the second, frame-free entanglement detector.
pub fn support_nonempty(state: &PureState, pv: &ProductVector, eps: f64) -> Result<bool> {
    let masks = scan_masks(state.n_parties());
    let hits = masks
        .par_iter()
        .map(|&m| residual_norm(state, pv, m).map(|norm| norm > eps))
        .collect::<Result<Vec<bool>>>()?;
    Ok(hits.into_iter().any(|b| b))
}

/// The scan below skips one-party-missing patterns because a stationary
/// point carries no weight there; any weight found means the supplied
/// product point is not stationary and the frame would misreport support.
fn stationarity_gate(state: &PureState, pv: &ProductVector, opts: &FrameOptions) -> Result<()> {
    let n = state.n_parties();
    let full = SubsetMask::full(n);
    let worst = (1..=n)
        .map(|k| residual_norm(state, pv, full.without(k)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    if worst > opts.residual_check {
        return Err(Error::InvalidFrame(vec![format!(
            "product point is not stationary: one-party-missing residual {worst:.3e} exceeds {:.3e}",
            opts.residual_check
        )]));
    }
    Ok(())
}

fn canonicalized(v: &LocalVector) -> LocalVector {
    let mut comps = v.normalized().expect("unit factor").components;
    linalg::canonical_phase(&mut comps);
    LocalVector::new(v.party, comps)
}

/// Make `candidate` exactly orthogonal to `e0`, unit norm, canonical phase.
/// Falls back to projected basis vectors when the candidate is degenerate.
fn orthon_against(e0: &LocalVector, candidate: Vec<Complex64>, party: usize) -> LocalVector {
    let d = e0.components.len();
    let clean = |mut comps: Vec<Complex64>| -> Option<Vec<Complex64>> {
        let ip: Complex64 = e0
            .components
            .iter()
            .zip(&comps)
            .map(|(a, b)| a.conj() * b)
            .sum();
        for (c, p) in comps.iter_mut().zip(&e0.components) {
            *c -= ip * p;
        }
        let norm = comps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return None;
        }
        for c in comps.iter_mut() {
            *c /= norm;
        }
        linalg::canonical_phase(&mut comps);
        Some(comps)
    };
    if let Some(comps) = clean(candidate) {
        return LocalVector::new(party, comps);
    }
    for t in 0..d {
        let mut basis = vec![Complex64::ZERO; d];
        basis[t] = Complex64::ONE;
        if let Some(comps) = clean(basis) {
            return LocalVector::new(party, comps);
        }
    }
    unreachable!("a unit vector always has an orthogonal complement for d >= 2");
}

fn matmul(a: &[Complex64], b: &[Complex64], d: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == Complex64::ZERO {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

/// Second direction for an in-pivot party: dominant eigenvector of the
/// reduced density matrix compressed off the factor.
fn eigen_second_direction(state: &PureState, e0: &LocalVector) -> Vec<Complex64> {
    let party = e0.party;
    let d = e0.components.len();
    let rho = state.reduced_density(party);
    let mut q = vec![Complex64::ZERO; d * d];
    for i in 0..d {
        for j in 0..d {
            let delta = if i == j { Complex64::ONE } else { Complex64::ZERO };
            q[i * d + j] = delta - e0.components[i] * e0.components[j].conj();
        }
    }
    let m = matmul(&matmul(&q, &rho, d), &q, d);
    let (_, vecs) = linalg::hermitian_eigen(&m, d);
    vecs[0].clone()
}

fn frame_table(state: &PureState, pairs: &[FramePair]) -> Vec<Complex64> {
    let n = state.n_parties();
    let mut out = vec![Complex64::ZERO; 1usize << n];
    fn fill(
        amps: &[Complex64],
        dims: &[usize],
        pairs: &[FramePair],
        acc: u32,
        out: &mut Vec<Complex64>,
    ) {
        let j = dims.len();
        if j == 0 {
            out[acc as usize] = amps[0].conj();
            return;
        }
        let d = dims[j - 1];
        let lead = amps.len() / d;
        let mut contract = |f: &[Complex64], acc: u32| {
            let mut next = vec![Complex64::ZERO; lead];
            for (i, slot) in next.iter_mut().enumerate() {
                let mut s = Complex64::ZERO;
                for (t, ft) in f.iter().enumerate() {
                    s += ft.conj() * amps[i * d + t];
                }
                *slot = s;
            }
            fill(&next, &dims[..j - 1], pairs, acc, out);
        };
        let bit = 1u32 << (j - 1);
        contract(&pairs[j - 1].e0.components, acc | bit);
        contract(&pairs[j - 1].e1.components, acc);
    }
    fill(state.amps(), state.dims(), pairs, 0, &mut out);
    out
}

/// Builds the frame at a certified stationary product point; see
/// [`AlignedFrame::build`].
pub fn aligned_frame(
    state: &PureState,
    pv: &ProductVector,
    opts: &FrameOptions,
) -> Result<AlignedFrame> {
    AlignedFrame::build(state, pv, opts)
}

impl AlignedFrame {
    /// Build the frame at a certified stationary product point. `e1` for
    /// parties outside the pivot comes from a rank-one fit of the pivot
    /// residual tensor; for parties inside the pivot from the compressed
    /// reduced density matrix; qubit parties take the unique orthogonal
    /// direction directly.
    pub fn build(state: &PureState, pv: &ProductVector, opts: &FrameOptions) -> Result<Self> {
        let n = state.n_parties();
        let dims = state.dims().to_vec();
        let pv = pv.normalized()?;
        let e0s: Vec<LocalVector> = pv.factors().iter().map(canonicalized).collect();
        let canonical_pv = ProductVector::new(&dims, e0s.clone())?;
        stationarity_gate(state, &canonical_pv, opts)?;

        let masks = scan_masks(n);
        let norms = masks
            .par_iter()
            .map(|&m| residual_norm(state, &canonical_pv, m))
            .collect::<Result<Vec<f64>>>()?;
        let mut support: Vec<SupportEntry> = masks
            .iter()
            .zip(&norms)
            .filter(|(_, &norm)| norm > opts.eps)
            .map(|(&mask, &norm)| SupportEntry { mask, norm })
            .collect();
        support.sort_by_key(|e| e.mask.0);
        let overlap = state.inner_product(&canonical_pv)?.norm();
        if support.is_empty() {
            return Err(Error::NotEntangled { overlap });
        }
        let degree = support.iter().map(|e| e.mask.size()).max().unwrap();
        let pivot = support
            .iter()
            .filter(|e| e.mask.size() == degree)
            .map(|e| e.mask)
            .min_by_key(|m| m.0)
            .unwrap();

        // Rank-one fit of the pivot residual, needed only when some party
        // outside the pivot has local dimension > 2.
        let complement_parties = pivot.complement(n).members(n);
        let needs_fit = complement_parties.iter().any(|&k| dims[k - 1] > 2);
        let mut fitted: BTreeMap<usize, Vec<Complex64>> = BTreeMap::new();
        if needs_fit {
            let amps = residual_tensor(state, &canonical_pv, pivot)?;
            let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if norm <= opts.eps {
                return Err(Error::DegenerateRankOne(norm));
            }
            let comp_dims: Vec<usize> = complement_parties.iter().map(|&k| dims[k - 1]).collect();
            let scaled: Vec<Complex64> = amps.iter().map(|c| c / norm).collect();
            let tiny = PureState::new(comp_dims, scaled)?;
            let fit = optimizer::closest_product(
                &tiny,
                &OptimizerConfig {
                    restarts: Some(opts.fit_restarts),
                    seed: opts.seed ^ 0xA15,
                    ..OptimizerConfig::default()
                },
            )?;
            if fit.overlap <= opts.eps {
                return Err(Error::DegenerateRankOne(fit.overlap * norm));
            }
            for (pos, &party) in complement_parties.iter().enumerate() {
                fitted.insert(party, fit.pv.factors()[pos].components.clone());
            }
        }

        let pairs: Vec<FramePair> = e0s
            .iter()
            .map(|e0| {
                let k = e0.party;
                let d = dims[k - 1];
                let candidate = if d == 2 {
                    linalg::qubit_orthogonal([e0.components[0], e0.components[1]]).to_vec()
                } else if pivot.contains(k) {
                    eigen_second_direction(state, e0)
                } else {
                    // Every qudit complement party got a fitted direction
                    // above; the basis seed only feeds the orthogonalizer's
                    // fallback scan.
                    fitted.get(&k).cloned().unwrap_or_else(|| {
                        let mut v = vec![Complex64::ZERO; d];
                        v[1] = Complex64::ONE;
                        v
                    })
                };
                FramePair {
                    e0: e0.clone(),
                    e1: orthon_against(e0, candidate, k),
                }
            })
            .collect();

        let h = frame_table(state, &pairs);
        let frame = AlignedFrame {
            dims,
            pairs,
            support,
            degree,
            pivot,
            overlap,
            h,
        };
        frame.validate(state, opts)?;
        Ok(frame)
    }

    /// Build the frame from explicitly supplied `(e0, e1)` pairs. The `e0`
    /// product must be a stationary point of the overlap; this is checked
    /// through the one-party-missing table entries.
    pub fn from_pairs(
        state: &PureState,
        pairs: Vec<FramePair>,
        opts: &FrameOptions,
    ) -> Result<Self> {
        let n = state.n_parties();
        if pairs.len() != n {
            return Err(Error::FactorCount {
                got: pairs.len(),
                expected: n,
            });
        }
        let dims = state.dims().to_vec();
        let pairs: Vec<FramePair> = pairs
            .into_iter()
            .map(|p| {
                let e0 = canonicalized(&p.e0);
                let e1 = orthon_against(&e0, p.e1.normalized()?.components, p.e1.party);
                Ok(FramePair { e0, e1 })
            })
            .collect::<Result<_>>()?;
        for (i, p) in pairs.iter().enumerate() {
            if p.e0.party != i + 1 || p.e1.party != i + 1 {
                return Err(Error::InvalidFrame(vec![format!(
                    "pair {} carries party labels {}/{}",
                    i + 1,
                    p.e0.party,
                    p.e1.party
                )]));
            }
            if p.e0.components.len() != dims[i] {
                return Err(Error::LocalDimension {
                    party: i + 1,
                    got: p.e0.components.len(),
                    expected: dims[i],
                });
            }
        }
        let e0s: Vec<LocalVector> = pairs.iter().map(|p| p.e0.clone()).collect();
        let canonical_pv = ProductVector::new(&dims, e0s)?;
        stationarity_gate(state, &canonical_pv, opts)?;
        let masks = scan_masks(n);
        let norms = masks
            .par_iter()
            .map(|&m| residual_norm(state, &canonical_pv, m))
            .collect::<Result<Vec<f64>>>()?;
        let mut support: Vec<SupportEntry> = masks
            .iter()
            .zip(&norms)
            .filter(|(_, &norm)| norm > opts.eps)
            .map(|(&mask, &norm)| SupportEntry { mask, norm })
            .collect();
        support.sort_by_key(|e| e.mask.0);
        let overlap = state.inner_product(&canonical_pv)?.norm();
        if support.is_empty() {
            return Err(Error::NotEntangled { overlap });
        }
        let degree = support.iter().map(|e| e.mask.size()).max().unwrap();
        let pivot = support
            .iter()
            .filter(|e| e.mask.size() == degree)
            .map(|e| e.mask)
            .min_by_key(|m| m.0)
            .unwrap();
        let h = frame_table(state, &pairs);
        let frame = AlignedFrame {
            dims,
            pairs,
            support,
            degree,
            pivot,
            overlap,
            h,
        };
        frame.validate(state, opts)?;
        Ok(frame)
    }

    pub fn n_parties(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn pair(&self, party: usize) -> &FramePair {
        &self.pairs[party - 1]
    }

    pub fn pairs(&self) -> &[FramePair] {
        &self.pairs
    }

    pub fn h(&self, mask: SubsetMask) -> Complex64 {
        self.h[mask.0 as usize]
    }

    /// Table entry at the full mask (every party on `e0`).
    pub fn h_full(&self) -> Complex64 {
        self.h(SubsetMask::full(self.n_parties()))
    }

    /// Full table, indexed by mask value.
    pub fn h_table(&self) -> &[Complex64] {
        &self.h
    }

    /// `<state | (x) v_k>` for in-plane kets `v_k = c0 e0_k + c1 e1_k`,
    /// summed from the table (linear in every coefficient pair).
    pub fn amplitude(&self, coeffs: &[[Complex64; 2]]) -> Complex64 {
        let n = self.n_parties();
        assert_eq!(coeffs.len(), n, "one coefficient pair per party");
        let mut table = self.h.clone();
        for k in (1..=n).rev() {
            let bit = 1usize << (k - 1);
            for m in 0..bit {
                table[m] = table[m | bit] * coeffs[k - 1][0] + table[m] * coeffs[k - 1][1];
            }
            table.truncate(bit);
        }
        table[0]
    }

    pub fn is_all_qubit(&self) -> bool {
        self.dims.iter().all(|&d| d == 2)
    }

    /// Re-derive the invariants the construction relies on and report every
    /// violation. Cheap relative to the support scan.
    pub fn validate(&self, state: &PureState, opts: &FrameOptions) -> Result<()> {
        let n = self.n_parties();
        let mut issues = Vec::new();
        for p in &self.pairs {
            let n0 = (p.e0.norm() - 1.0).abs();
            let n1 = (p.e1.norm() - 1.0).abs();
            let ip = p.e0.dot(&p.e1).norm();
            if n0 > 1e-10 || n1 > 1e-10 || ip > 1e-10 {
                issues.push(format!(
                    "party {}: frame pair not orthonormal (norm errors {:.2e}/{:.2e}, overlap {:.2e})",
                    p.e0.party, n0, n1, ip
                ));
            }
        }
        let full = SubsetMask::full(n);
        if self.h(full).norm() <= opts.eps {
            issues.push(format!(
                "full-mask table entry is numerically zero ({:.2e})",
                self.h(full).norm()
            ));
        }
        for k in 1..=n {
            let one_off = self.h(full.without(k)).norm();
            if one_off > opts.residual_check {
                issues.push(format!(
                    "product point not stationary: one-off entry for party {} is {:.2e}",
                    k, one_off
                ));
            }
        }
        if self.degree + 2 > n {
            issues.push(format!(
                "support degree {} exceeds party count {} minus two",
                self.degree, n
            ));
        }
        // Completeness: residual weights plus the overlap square to one
        // (up to the one-off entries, which stationarity bounds).
        let sum: f64 = self.support.iter().map(|e| e.norm * e.norm).sum();
        let gap = (1.0 - self.overlap * self.overlap - sum).abs();
        // Below-eps scanned entries each contribute at most eps^2; allow for
        // all of them plus the stationarity allowance.
        let slack = 1e-7 + (1u64 << n) as f64 * opts.eps * opts.eps;
        if gap > slack {
            issues.push(format!(
                "residual weights and overlap do not account for the state (gap {:.2e})",
                gap
            ));
        }
        if self.is_all_qubit() {
            // Dual route: for qubits the residual norms must equal the
            // magnitudes of the corresponding table entries.
            for e in &self.support {
                let h = self.h(e.mask).norm();
                if (h - e.norm).abs() > 1e-8 {
                    issues.push(format!(
                        "mask {:#b}: projector route gives {:.12}, frame route {:.12}",
                        e.mask.0, e.norm, h
                    ));
                }
            }
        } else {
            for e in &self.support {
                let h = self.h(e.mask).norm();
                if h > e.norm + 1e-8 {
                    issues.push(format!(
                        "mask {:#b}: frame route {:.12} exceeds projector route {:.12}",
                        e.mask.0, h, e.norm
                    ));
                }
            }
        }
        let _ = state;
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidFrame(issues))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::closest_product;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn w3() -> PureState {
        let t = 1.0 / 3f64.sqrt();
        PureState::from_mask_terms(
            3,
            &[
                (SubsetMask(0b110), c(t, 0.0)),
                (SubsetMask(0b101), c(t, 0.0)),
                (SubsetMask(0b011), c(t, 0.0)),
            ],
        )
        .unwrap()
    }

    fn mixed5() -> PureState {
        let t = 1.0 / 3f64.sqrt();
        let terms = [
            (SubsetMask::full(5), c(t, 0.0)),
            (SubsetMask(0b00011), c(t, 0.0)),
            (SubsetMask(0b00000), c(t, 0.0)),
        ];
        PureState::from_mask_terms(5, &terms).unwrap()
    }

    fn basis_pairs(n: usize, flip: bool) -> Vec<FramePair> {
        (1..=n)
            .map(|k| {
                let zero = LocalVector::new(k, vec![Complex64::ONE, Complex64::ZERO]);
                let one = LocalVector::new(k, vec![Complex64::ZERO, Complex64::ONE]);
                if flip {
                    FramePair {
                        e0: one.clone(),
                        e1: zero,
                    }
                } else {
                    FramePair {
                        e0: zero,
                        e1: one,
                    }
                }
            })
            .collect()
    }

    fn build_from_optimizer(state: &PureState, seed: u64) -> AlignedFrame {
        let cp = closest_product(
            state,
            &OptimizerConfig {
                seed,
                ..OptimizerConfig::default()
            },
        )
        .unwrap();
        AlignedFrame::build(state, &cp.pv, &FrameOptions::default()).unwrap()
    }

    #[test]
    fn w_state_frame_matches_hand_values() {
        // Pin the product point explicitly: the maximizer is only unique up to
        // a shared relative phase, so hand values need a fixed representative.
        let s = w3();
        let r3 = 3f64.sqrt();
        let pairs: Vec<FramePair> = (1..=3)
            .map(|k| FramePair {
                e0: LocalVector::new(k, vec![c(2f64.sqrt() / r3, 0.0), c(1.0 / r3, 0.0)]),
                e1: LocalVector::new(k, vec![c(-1.0 / r3, 0.0), c(2f64.sqrt() / r3, 0.0)]),
            })
            .collect();
        let f = AlignedFrame::from_pairs(&s, pairs, &FrameOptions::default()).unwrap();
        assert_abs_diff_eq!(f.overlap, 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(f.degree, 1);
        assert_eq!(f.pivot, SubsetMask(0b001));
        let masks: Vec<u32> = f.support.iter().map(|e| e.mask.0).collect();
        assert_eq!(masks, vec![0b000, 0b001, 0b010, 0b100]);
        assert_abs_diff_eq!(f.support[0].norm, 2f64.sqrt() / 3.0, epsilon = 1e-12);
        for e in &f.support[1..] {
            assert_abs_diff_eq!(e.norm, 1.0 / 3.0, epsilon = 1e-12);
        }
        let h_i = f.h_full();
        let h_a = f.h(SubsetMask(0b001));
        assert_abs_diff_eq!(h_i.re, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h_i.im, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h_a.re, -1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h_a.im, 0.0, epsilon = 1e-12);
        let ratio = h_a / h_i;
        assert_abs_diff_eq!(ratio.arg().abs(), std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn w_state_frame_invariants_from_optimizer() {
        // Whatever representative the search lands on, the phase-free data
        // must come out the same.
        let s = w3();
        let f = build_from_optimizer(&s, 5);
        assert_abs_diff_eq!(f.overlap, 2.0 / 3.0, epsilon = 1e-9);
        assert_eq!(f.degree, 1);
        assert_eq!(f.pivot, SubsetMask(0b001));
        let masks: Vec<u32> = f.support.iter().map(|e| e.mask.0).collect();
        assert_eq!(masks, vec![0b000, 0b001, 0b010, 0b100]);
        assert_abs_diff_eq!(f.support[0].norm, 2f64.sqrt() / 3.0, epsilon = 1e-9);
        for e in &f.support[1..] {
            assert_abs_diff_eq!(e.norm, 1.0 / 3.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(f.h_full().norm(), 2.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.h(SubsetMask(0b001)).norm(), 1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn ghz_frame_has_empty_pivot() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = PureState::from_mask_terms(
            3,
            &[
                (SubsetMask::full(3), c(h, 0.0)),
                (SubsetMask(0), c(h, 0.0)),
            ],
        )
        .unwrap();
        let f = AlignedFrame::from_pairs(&s, basis_pairs(3, false), &FrameOptions::default())
            .unwrap();
        assert_eq!(f.degree, 0);
        assert_eq!(f.pivot, SubsetMask(0));
        assert_eq!(f.support.len(), 1);
        assert_abs_diff_eq!(f.support[0].norm, h, epsilon = 1e-12);
        assert_abs_diff_eq!(f.h(SubsetMask(0)).re, h, epsilon = 1e-12);
        assert_abs_diff_eq!(f.h_full().re, h, epsilon = 1e-12);
    }

    #[test]
    fn mixed_five_party_frames_select_opposite_scenarios() {
        let s = mixed5();
        let plain = AlignedFrame::from_pairs(&s, basis_pairs(5, false), &FrameOptions::default())
            .unwrap();
        assert_eq!(plain.degree, 2);
        assert_eq!(plain.pivot, SubsetMask(0b00011));
        let t = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(plain.overlap, t, epsilon = 1e-12);
        assert_abs_diff_eq!(plain.h(SubsetMask(0b00011)).norm(), t, epsilon = 1e-12);

        let flipped = AlignedFrame::from_pairs(&s, basis_pairs(5, true), &FrameOptions::default())
            .unwrap();
        assert_eq!(flipped.degree, 3);
        assert_eq!(flipped.pivot, SubsetMask(0b11100));
        assert_abs_diff_eq!(flipped.overlap, t, epsilon = 1e-12);
    }

    #[test]
    fn dual_routes_agree_on_random_qubit_states() {
        for seed in [2u64, 7, 12] {
            let s = PureState::haar_random(vec![2, 2, 2], seed).unwrap();
            let f = build_from_optimizer(&s, seed + 100);
            for e in &f.support {
                assert_abs_diff_eq!(f.h(e.mask).norm(), e.norm, epsilon = 1e-8);
            }
            let n = f.n_parties();
            let full = SubsetMask::full(n);
            for k in 1..=n {
                assert!(f.h(full.without(k)).norm() <= 1e-8);
            }
            let sum: f64 = f.support.iter().map(|e| e.norm * e.norm).sum();
            assert_abs_diff_eq!(sum + f.overlap * f.overlap, 1.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn qutrit_pair_second_direction_matches_schmidt_vector() {
        // Oracle: for a bipartite state the fitted second directions are the
        // second Schmidt pair, so the empty-mask entry equals the second
        // singular value of the amplitude matrix.
        let s = PureState::haar_random(vec![3, 3], 31).unwrap();
        let f = build_from_optimizer(&s, 77);
        let mut gram = vec![Complex64::ZERO; 9];
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = Complex64::ZERO;
                for i in 0..3 {
                    acc += s.amps()[i * 3 + a].conj() * s.amps()[i * 3 + b];
                }
                gram[a * 3 + b] = acc;
            }
        }
        let (vals, _) = linalg::hermitian_eigen(&gram, 3);
        let sigma2 = vals[1].max(0.0).sqrt();
        assert_abs_diff_eq!(f.h(SubsetMask(0)).norm(), sigma2, epsilon = 1e-7);
        for p in f.pairs() {
            assert!(p.e0.dot(&p.e1).norm() < 1e-10);
        }
    }

    #[test]
    fn non_stationary_product_point_is_rejected() {
        let s = w3();
        let err = AlignedFrame::from_pairs(&s, basis_pairs(3, false), &FrameOptions::default())
            .unwrap_err();
        match err {
            Error::InvalidFrame(issues) => {
                assert!(issues.iter().any(|m| m.contains("not stationary")));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn product_state_yields_not_entangled() {
        let mut amps = vec![Complex64::ZERO; 4];
        amps[0] = Complex64::ONE;
        let s = PureState::new(vec![2, 2], amps).unwrap();
        let err = AlignedFrame::from_pairs(&s, basis_pairs(2, false), &FrameOptions::default())
            .unwrap_err();
        match err {
            Error::NotEntangled { overlap } => assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-12),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn residual_tensor_rejects_full_mask() {
        let s = w3();
        let pv = ProductVector::new(
            &[2, 2, 2],
            (1..=3)
                .map(|k| LocalVector::new(k, vec![Complex64::ONE, Complex64::ZERO]))
                .collect(),
        )
        .unwrap();
        assert!(matches!(
            residual_tensor(&s, &pv, SubsetMask::full(3)),
            Err(Error::NotProperSubset { .. })
        ));
    }
}
