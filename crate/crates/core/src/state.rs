//! Dense pure states of `n >= 2` parties with arbitrary finite local
//! dimensions, product vectors over them, and the contraction primitives the
//! rest of the library is built on.
//!
//! Conventions, used everywhere downstream:
//! - parties are numbered `1..=n`;
//! - the flat amplitude index is row-major with party 1 most significant:
//!   `index = sum_k i_k * prod_{j>k} d_j`;
//! - a [`SubsetMask`] has bit `k-1` set exactly when party `k` belongs to the
//!   subset; complements are taken within the `n` low bits.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Subset of parties as a bitmask; bit `k-1` set means party `k` is in.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetMask(pub u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    pub fn full(n: usize) -> Self {
        SubsetMask(((1u64 << n) - 1) as u32)
    }

    pub fn singleton(party: usize) -> Self {
        SubsetMask(1 << (party - 1))
    }

    pub fn contains(self, party: usize) -> bool {
        self.0 >> (party - 1) & 1 == 1
    }

    pub fn with(self, party: usize) -> Self {
        SubsetMask(self.0 | 1 << (party - 1))
    }

    pub fn without(self, party: usize) -> Self {
        SubsetMask(self.0 & !(1 << (party - 1)))
    }

    pub fn complement(self, n: usize) -> Self {
        SubsetMask(!self.0 & Self::full(n).0)
    }

    pub fn size(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_proper_subset(self, n: usize) -> bool {
        self.0 < Self::full(n).0
    }

    /// Parties contained in the mask, ascending.
    pub fn members(self, n: usize) -> Vec<usize> {
        (1..=n).filter(|&k| self.contains(k)).collect()
    }

    /// All proper subsets of the full party set, ascending by mask value.
    pub fn proper_subsets(n: usize) -> impl Iterator<Item = SubsetMask> {
        (0..Self::full(n).0).map(SubsetMask)
    }

    /// Flat amplitude index of the basis state that puts every party in the
    /// mask at level 0 and every other party at level 1 (all-qubit tensors).
    pub fn flat_index(self, n: usize) -> usize {
        let mut index = 0usize;
        for k in 1..=n {
            index <<= 1;
            if !self.contains(k) {
                index |= 1;
            }
        }
        index
    }
}

/// Single-party vector; `party` is 1-based.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalVector {
    pub party: usize,
    pub components: Vec<Complex64>,
}

impl LocalVector {
    pub fn new(party: usize, components: Vec<Complex64>) -> Self {
        LocalVector { party, components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn dot(&self, other: &LocalVector) -> Complex64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn normalized(&self) -> Result<LocalVector> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroState);
        }
        Ok(LocalVector::new(
            self.party,
            self.components.iter().map(|c| c / n).collect(),
        ))
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.norm() <= tol
    }
}

/// One normalized (or normalizable) factor per party.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductVector {
    factors: Vec<LocalVector>,
}

impl ProductVector {
    /// Factors must be supplied for parties `1..=n` in order and sized to
    /// `dims`.
    pub fn new(dims: &[usize], factors: Vec<LocalVector>) -> Result<Self> {
        if factors.len() != dims.len() {
            return Err(Error::FactorCount {
                got: factors.len(),
                expected: dims.len(),
            });
        }
        for (i, f) in factors.iter().enumerate() {
            if f.party != i + 1 {
                return Err(Error::PartyOutOfRange {
                    party: f.party,
                    n: dims.len(),
                });
            }
            if f.dim() != dims[i] {
                return Err(Error::LocalDimension {
                    party: f.party,
                    got: f.dim(),
                    expected: dims[i],
                });
            }
        }
        Ok(ProductVector { factors })
    }

    pub fn factors(&self) -> &[LocalVector] {
        &self.factors
    }

    pub fn factor(&self, party: usize) -> &LocalVector {
        &self.factors[party - 1]
    }

    pub fn n_parties(&self) -> usize {
        self.factors.len()
    }

    /// Normalizes every factor.
    pub fn normalized(&self) -> Result<ProductVector> {
        let factors = self
            .factors
            .iter()
            .map(|f| f.normalized())
            .collect::<Result<Vec<_>>>()?;
        Ok(ProductVector { factors })
    }

}

/// Dense pure state over `n` parties.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    dims: Vec<usize>,
    amps: Vec<Complex64>,
}

impl PureState {
    pub fn new(dims: Vec<usize>, amps: Vec<Complex64>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::TooFewParties(dims.len()));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::BadDimension(dims));
        }
        let expected: usize = dims.iter().product();
        if amps.len() != expected {
            return Err(Error::AmplitudeLength {
                got: amps.len(),
                expected,
            });
        }
        Ok(PureState { dims, amps })
    }

    /// Basis product state `|levels[0], levels[1], ...>`.
    pub fn basis_state(dims: Vec<usize>, levels: &[usize]) -> Result<Self> {
        let expected: usize = dims.iter().product();
        let mut amps = vec![Complex64::ZERO; expected];
        let mut state = PureState::new(dims, amps.clone())?;
        let idx = state.index_of(levels)?;
        amps[idx] = Complex64::ONE;
        state.amps = amps;
        Ok(state)
    }

    /// All-qubit state assembled from basis terms keyed by the subset of
    /// parties sitting at level 0; `coeff(mask)` multiplies `|0_mask 1_rest>`.
    pub fn from_mask_terms(n: usize, terms: &[(SubsetMask, Complex64)]) -> Result<Self> {
        let mut amps = vec![Complex64::ZERO; 1 << n];
        for &(mask, c) in terms {
            amps[mask.flat_index(n)] += c;
        }
        PureState::new(vec![2; n], amps)
    }

    /// Haar-distributed random state: i.i.d. complex Gaussian amplitudes,
    /// normalized. Deterministic in `seed`.
    pub fn haar_random(dims: Vec<usize>, seed: u64) -> Result<Self> {
        let total: usize = dims.iter().product();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let normal = StandardNormal;
        let amps: Vec<Complex64> = (0..total)
            .map(|_| {
                let re: f64 = normal.sample(&mut rng);
                let im: f64 = normal.sample(&mut rng);
                Complex64::new(re, im)
            })
            .collect();
        let (state, _) = PureState::new(dims, amps)?.normalized()?;
        Ok(state)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_parties(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn is_all_qubit(&self) -> bool {
        self.dims.iter().all(|&d| d == 2)
    }

    /// Flat index of `|levels>`.
    pub fn index_of(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.dims.len() {
            return Err(Error::FactorCount {
                got: levels.len(),
                expected: self.dims.len(),
            });
        }
        let mut idx = 0usize;
        for (k, (&l, &d)) in levels.iter().zip(&self.dims).enumerate() {
            if l >= d {
                return Err(Error::LocalDimension {
                    party: k + 1,
                    got: l,
                    expected: d,
                });
            }
            idx = idx * d + l;
        }
        Ok(idx)
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Returns the unit-norm state and the scale that was divided out.
    pub fn normalized(&self) -> Result<(PureState, f64)> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroState);
        }
        let amps = self.amps.iter().map(|c| c / n).collect();
        Ok((
            PureState {
                dims: self.dims.clone(),
                amps,
            },
            n,
        ))
    }

    pub fn assert_normalized(&self, tol: f64) -> Result<()> {
        let dev = (self.norm() - 1.0).abs();
        if dev > tol {
            return Err(Error::NotNormalized(dev));
        }
        Ok(())
    }

    fn strides(&self, party0: usize) -> (usize, usize, usize) {
        let d = self.dims[party0];
        let inner: usize = self.dims[party0 + 1..].iter().product();
        let outer: usize = self.dims[..party0].iter().product();
        (outer, d, inner)
    }

    /// Applies the bra `<bra|` at 1-based `party`, removing that party.
    /// The result is the partial contraction `(<bra|_party ⊗ I) |self>`.
    pub(crate) fn contract_bra(&self, party: usize, bra: &[Complex64]) -> PureState {
        let p = party - 1;
        let (outer, d, inner) = self.strides(p);
        debug_assert_eq!(bra.len(), d);
        let mut amps = vec![Complex64::ZERO; outer * inner];
        for o in 0..outer {
            for l in 0..d {
                let w = bra[l].conj();
                if w == Complex64::ZERO {
                    continue;
                }
                let src = (o * d + l) * inner;
                let dst = o * inner;
                for i in 0..inner {
                    amps[dst + i] += w * self.amps[src + i];
                }
            }
        }
        let mut dims = self.dims.clone();
        dims.remove(p);
        PureState { dims, amps }
    }

    /// Applies a `d x d` row-major matrix at 1-based `party` (dims kept).
    pub fn apply_local(&self, party: usize, mat: &[Complex64]) -> PureState {
        let p = party - 1;
        let (outer, d, inner) = self.strides(p);
        debug_assert_eq!(mat.len(), d * d);
        let mut amps = vec![Complex64::ZERO; self.amps.len()];
        for o in 0..outer {
            for l in 0..d {
                for l2 in 0..d {
                    let w = mat[l * d + l2];
                    if w == Complex64::ZERO {
                        continue;
                    }
                    let src = (o * d + l2) * inner;
                    let dst = (o * d + l) * inner;
                    for i in 0..inner {
                        amps[dst + i] += w * self.amps[src + i];
                    }
                }
            }
        }
        PureState {
            dims: self.dims.clone(),
            amps,
        }
    }

    /// Reduced density matrix of 1-based `party`, row-major `d x d`.
    pub fn reduced_density(&self, party: usize) -> Vec<Complex64> {
        let p = party - 1;
        let (outer, d, inner) = self.strides(p);
        let mut rho = vec![Complex64::ZERO; d * d];
        for o in 0..outer {
            for l in 0..d {
                for l2 in 0..d {
                    let mut acc = Complex64::ZERO;
                    let base_l = (o * d + l) * inner;
                    let base_l2 = (o * d + l2) * inner;
                    for i in 0..inner {
                        acc += self.amps[base_l + i] * self.amps[base_l2 + i].conj();
                    }
                    rho[l * d + l2] += acc;
                }
            }
        }
        rho
    }

    /// `<self|pv>`: overlap with a product vector, conjugate-linear in `self`.
    pub fn inner_product(&self, pv: &ProductVector) -> Result<Complex64> {
        if pv.n_parties() != self.n_parties() {
            return Err(Error::FactorCount {
                got: pv.n_parties(),
                expected: self.n_parties(),
            });
        }
        for f in pv.factors() {
            if f.dim() != self.dims[f.party - 1] {
                return Err(Error::LocalDimension {
                    party: f.party,
                    got: f.dim(),
                    expected: self.dims[f.party - 1],
                });
            }
        }
        // <pv|self> by contracting every bra, highest party first so the
        // innermost stride stays 1, then conjugate.
        let mut cur = self.clone();
        for party in (2..=self.n_parties()).rev() {
            cur = cur.contract_bra(party, &pv.factor(party).components);
        }
        let last: Complex64 = cur
            .amps
            .iter()
            .zip(&pv.factor(1).components)
            .map(|(a, b)| b.conj() * a)
            .sum();
        Ok(last.conj())
    }

    /// Unnormalized vector left at `party` after applying `<fixed[j]|` for
    /// every other party `j`.
    pub fn conditional_vector(
        &self,
        fixed: &BTreeMap<usize, LocalVector>,
        party: usize,
    ) -> Result<LocalVector> {
        let n = self.n_parties();
        if party < 1 || party > n {
            return Err(Error::PartyOutOfRange { party, n });
        }
        for j in 1..=n {
            if j == party {
                continue;
            }
            let f = fixed
                .get(&j)
                .ok_or(Error::MissingFactor {
                    skip: party,
                    missing: j,
                })?;
            if f.dim() != self.dims[j - 1] {
                return Err(Error::LocalDimension {
                    party: j,
                    got: f.dim(),
                    expected: self.dims[j - 1],
                });
            }
        }
        let factors: Vec<Option<&[Complex64]>> = (1..=n)
            .map(|j| {
                if j == party {
                    None
                } else {
                    Some(fixed[&j].components.as_slice())
                }
            })
            .collect();
        Ok(LocalVector::new(
            party,
            self.contract_all_but(&factors, party),
        ))
    }

    /// Core contraction: applies `<factors[j]|` wherever `Some`, leaving the
    /// single party `keep` (1-based) as a ket. Used by the optimizer on every
    /// sweep, so it avoids intermediate allocations per party where it can.
    pub(crate) fn contract_all_but(
        &self,
        factors: &[Option<&[Complex64]>],
        keep: usize,
    ) -> Vec<Complex64> {
        let n = self.n_parties();
        debug_assert_eq!(factors.len(), n);
        let mut cur = self.clone();
        // Contract from the highest party down: every removal only shifts
        // indices of parties above it, and those are already gone, so each
        // original 1-based index is still valid when its turn comes.
        for party in (1..=n).rev() {
            if party == keep {
                continue;
            }
            let bra = factors[party - 1].expect("factor required for contraction");
            cur = cur.contract_bra(party, bra);
        }
        cur.amps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bell() -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PureState::new(
            vec![2, 2],
            vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)],
        )
        .unwrap()
    }

    fn ghz3() -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![Complex64::ZERO; 8];
        amps[0] = c(s, 0.0);
        amps[7] = c(s, 0.0);
        PureState::new(vec![2, 2, 2], amps).unwrap()
    }

    /// Single-excitation three-qubit W state.
    fn w3() -> PureState {
        let t = 1.0 / 3f64.sqrt();
        let mut amps = vec![Complex64::ZERO; 8];
        amps[0b100] = c(t, 0.0);
        amps[0b010] = c(t, 0.0);
        amps[0b001] = c(t, 0.0);
        PureState::new(vec![2, 2, 2], amps).unwrap()
    }

    fn local(party: usize, comps: &[f64]) -> LocalVector {
        LocalVector::new(party, comps.iter().map(|&x| c(x, 0.0)).collect())
    }

    fn product(dims: &[usize], factors: Vec<LocalVector>) -> ProductVector {
        ProductVector::new(dims, factors).unwrap()
    }

    #[test]
    fn bell_overlap_with_zero_zero() {
        let pv = product(&[2, 2], vec![local(1, &[1.0, 0.0]), local(2, &[1.0, 0.0])]);
        let ip = bell().inner_product(&pv).unwrap();
        assert_abs_diff_eq!(ip.re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(ip.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ghz_overlap_with_mismatched_product_vanishes() {
        let pv = product(
            &[2, 2, 2],
            vec![
                local(1, &[1.0, 0.0]),
                local(2, &[1.0, 0.0]),
                local(3, &[0.0, 1.0]),
            ],
        );
        let ip = ghz3().inner_product(&pv).unwrap();
        assert_abs_diff_eq!(ip.norm(), 0.0, epsilon = 1e-15);
    }

    // Oracle: sum the three contributing basis amplitudes by hand.
    // W3 components live at |100>, |010>, |001>; each picks one factor's
    // level-1 component and two level-0 components.
    #[test]
    fn w_overlap_against_hand_sums() {
        let t3 = 3f64.sqrt();
        // p = (|0> + sqrt2 |1>)/sqrt3: each term contributes
        // (1/sqrt3) * (sqrt2/sqrt3) * (1/sqrt3)^2 = sqrt2 / 9, total 3 terms
        // = sqrt2/3.
        let p = local(1, &[1.0 / t3, 2f64.sqrt() / t3]);
        let pv = product(
            &[2, 2, 2],
            vec![
                LocalVector::new(1, p.components.clone()),
                LocalVector::new(2, p.components.clone()),
                LocalVector::new(3, p.components.clone()),
            ],
        );
        let ip = w3().inner_product(&pv).unwrap();
        assert_abs_diff_eq!(ip.re, 2f64.sqrt() / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ip.im, 0.0, epsilon = 1e-15);

        // q = (sqrt2 |0> + |1>)/sqrt3: each term contributes
        // (1/sqrt3) * (1/sqrt3) * (sqrt2/sqrt3)^2 = 2/9 * (1/sqrt3) ... total
        // 3 * (1/sqrt3)(1/sqrt3)(2/3) = 2/3. This is the closest product
        // factor for this state.
        let q = local(1, &[2f64.sqrt() / t3, 1.0 / t3]);
        let qv = product(
            &[2, 2, 2],
            vec![
                LocalVector::new(1, q.components.clone()),
                LocalVector::new(2, q.components.clone()),
                LocalVector::new(3, q.components.clone()),
            ],
        );
        let ip = w3().inner_product(&qv).unwrap();
        assert_abs_diff_eq!(ip.re, 2.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn conditional_vector_ghz() {
        let mut fixed = BTreeMap::new();
        fixed.insert(1, local(1, &[1.0, 0.0]));
        fixed.insert(2, local(2, &[1.0, 0.0]));
        let v = ghz3().conditional_vector(&fixed, 3).unwrap();
        assert_abs_diff_eq!(v.components[0].re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(v.components[1].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn conditional_vector_w_vanishes_on_double_excitation() {
        // No basis term of W3 has parties 2 and 3 both at level 1.
        let mut fixed = BTreeMap::new();
        fixed.insert(2, local(2, &[0.0, 1.0]));
        fixed.insert(3, local(3, &[0.0, 1.0]));
        let v = w3().conditional_vector(&fixed, 1).unwrap();
        assert!(v.is_zero(1e-15));
    }

    #[test]
    fn conditional_vector_requires_all_other_parties() {
        let mut fixed = BTreeMap::new();
        fixed.insert(2, local(2, &[0.0, 1.0]));
        let err = w3().conditional_vector(&fixed, 1).unwrap_err();
        assert!(matches!(err, Error::MissingFactor { missing: 3, .. }));
    }

    #[test]
    fn haar_state_is_normalized() {
        let s = PureState::haar_random(vec![2, 2], 7).unwrap();
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-12);
    }

    // Oracle: Monte-Carlo moment. For Haar states of total dimension D the
    // mean of |amplitude|^2 at any fixed index is 1/D.
    #[test]
    fn haar_first_amplitude_moment() {
        let n_samples = 10_000usize;
        let mut vals = Vec::with_capacity(n_samples);
        for seed in 0..n_samples as u64 {
            let s = PureState::haar_random(vec![2, 2, 2], 1_000 + seed).unwrap();
            vals.push(s.amps()[0].norm_sqr());
        }
        let mean = vals.iter().sum::<f64>() / n_samples as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_samples - 1) as f64;
        let se = (var / n_samples as f64).sqrt();
        assert!(
            (mean - 0.125).abs() <= 3.0 * se,
            "mean {mean} off 1/8 by more than 3 standard errors ({se})"
        );
    }

    // Distribution is unitarily invariant: rotating party 1 by a fixed
    // unitary leaves the first-amplitude moment at 1/D.
    #[test]
    fn haar_moment_survives_local_rotation() {
        let th = 0.7f64;
        let u = [
            c(th.cos(), 0.0),
            c(th.sin(), 0.0),
            c(-th.sin(), 0.0),
            c(th.cos(), 0.0),
        ];
        let n_samples = 10_000usize;
        let mut vals = Vec::with_capacity(n_samples);
        for seed in 0..n_samples as u64 {
            let s = PureState::haar_random(vec![2, 2, 2], 50_000 + seed).unwrap();
            let r = s.apply_local(1, &u);
            vals.push(r.amps()[0].norm_sqr());
        }
        let mean = vals.iter().sum::<f64>() / n_samples as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_samples - 1) as f64;
        let se = (var / n_samples as f64).sqrt();
        assert!((mean - 0.125).abs() <= 3.0 * se);
    }

    #[test]
    fn haar_is_deterministic_in_seed() {
        let a = PureState::haar_random(vec![2, 3], 42).unwrap();
        let b = PureState::haar_random(vec![2, 3], 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mask_flat_index_convention() {
        let n = 3;
        assert_eq!(SubsetMask::full(n).flat_index(n), 0);
        assert_eq!(SubsetMask::EMPTY.flat_index(n), 0b111);
        // Party 1 at level 0, parties 2 and 3 at level 1 -> |011> = index 3.
        assert_eq!(SubsetMask::singleton(1).flat_index(n), 0b011);
        // Party 3 at level 0 -> |110> = index 6.
        assert_eq!(SubsetMask::singleton(3).flat_index(n), 0b110);
    }

    #[test]
    fn mask_complement_and_members() {
        let m = SubsetMask::singleton(1).with(3);
        assert_eq!(m.members(4), vec![1, 3]);
        assert_eq!(m.complement(4).members(4), vec![2, 4]);
        assert_eq!(m.size(), 2);
        assert!(m.is_proper_subset(4));
        assert!(!SubsetMask::full(4).is_proper_subset(4));
    }

    #[test]
    fn from_mask_terms_places_amplitudes() {
        let h = 1.0 / 3f64.sqrt();
        let s = PureState::from_mask_terms(
            5,
            &[
                (SubsetMask::full(5), c(h, 0.0)),
                (SubsetMask(0b00011), c(h, 0.0)),
                (SubsetMask::EMPTY, c(h, 0.0)),
            ],
        )
        .unwrap();
        // Parties 1,2 at level 0, parties 3..5 at level 1 -> |00111> = 7.
        assert_abs_diff_eq!(s.amps()[0].re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amps()[0b00111].re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amps()[0b11111].re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn reduced_density_of_bell_is_maximally_mixed() {
        let rho = bell().reduced_density(1);
        assert_abs_diff_eq!(rho[0].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho[3].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho[1].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn apply_local_matches_manual_rotation() {
        // Rotate party 2 of |00> by X: expect |01>.
        let s = PureState::basis_state(vec![2, 2], &[0, 0]).unwrap();
        let x = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
        let r = s.apply_local(2, &x);
        assert_abs_diff_eq!(r.amps()[1].re, 1.0, epsilon = 1e-15);
    }
}
