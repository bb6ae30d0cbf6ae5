//! Synthesis of the per-party two-setting measurements.
//!
//! Two constructions cover every entangled input, selected by the size of
//! the largest support pattern `m` relative to the party count `n`:
//!
//! * `m == n - 2` (`plan_bell`): every party measures in the plane spanned
//!   by its frame vectors with fixed rotation tables. A single angle for the
//!   in-pivot parties is chosen by halving until the certified combination
//!   keeps at least half of its limiting value.
//! * `m < n - 2` (`plan_hardy`): one party outside the pivot is singled
//!   out and the tables depend on a real parameter `y` and a complex root
//!   `z` of a polynomial assembled from the frame table. The root kills the
//!   all-second-setting amplitude exactly, which is what makes the final
//!   combination a bare (nonnegative minus zero) difference.
//!
//! Both constructions keep the unnormalized coefficient tables next to the
//! embedded unit vectors so that the degeneracy repair can nudge raw entries
//! and re-embed.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::evaluator::{self, LeakagePolicy};
use crate::frame::{AlignedFrame, FramePair};
use crate::poly;
use crate::state::{LocalVector, PureState, SubsetMask};

/// Deterministic sequence of `y` candidates tried before seeded sampling.
const Y_LADDER: [f64; 12] = [
    1.0,
    2.0,
    0.5,
    -1.0,
    1.5,
    2.0 / 3.0,
    3.0,
    1.0 / 3.0,
    -2.0,
    -0.5,
    1.25,
    0.8,
];

#[derive(Clone, Debug)]
pub struct SynthesisOptions {
    pub seed: u64,
    /// A party is degenerate when `min(|<a|b>|, |<a|bbar>|)` falls below this.
    pub degeneracy_threshold: f64,
    /// Roots closer to `1` than this are discarded (they zero the value).
    pub root_min_distance: f64,
    pub max_y_candidates: usize,
    /// Starting rotation angle for the in-pivot parties.
    pub gamma_init: f64,
    /// Budget for both the angle halving and the repair halving.
    pub max_halvings: usize,
    pub extra_party: ExtraPartyChoice,
    /// Run the degeneracy repair automatically inside [`synthesize`].
    pub repair: bool,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            seed: 0,
            degeneracy_threshold: 1e-6,
            root_min_distance: 1e-6,
            max_y_candidates: 64,
            gamma_init: std::f64::consts::PI / 16.0,
            max_halvings: 60,
            extra_party: ExtraPartyChoice::TryAll,
            repair: true,
        }
    }
}

/// How to pick the singled-out party for the parametric construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtraPartyChoice {
    /// Try every party outside the pivot, keep the best value.
    TryAll,
    /// Force a specific party (must lie outside the pivot).
    Fixed(usize),
}

#[derive(Clone, Debug)]
pub enum Scenario {
    /// Rotation tables; applies when the support degree is `n - 2`.
    Bell {
        gamma: f64,
        lambda: f64,
        theta: f64,
        q: f64,
        r: Complex64,
    },
    /// Parametric tables; applies when the support degree is below `n - 2`.
    Hardy {
        y: f64,
        z: Complex64,
        extra_party: usize,
        e: Complex64,
        f: Complex64,
        spectators: usize,
    },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Bell { .. } => "bell",
            Scenario::Hardy { .. } => "hardy",
        }
    }
}

/// One party's settings: the first measurement projects onto `a`, the
/// second onto `b` (with `bbar` the in-plane complement of `b`). The raw
/// tables express the vectors over the party's frame `(e0, e1)`.
#[derive(Clone, Debug)]
pub struct PartySettings {
    pub party: usize,
    pub a_table: [Complex64; 2],
    pub b_table: [Complex64; 2],
    pub bbar_table: [Complex64; 2],
    pub a: LocalVector,
    pub b: LocalVector,
    pub bbar: LocalVector,
}

#[derive(Clone, Debug, Default)]
pub struct SynthesisDiagnostics {
    pub y_tried: usize,
    pub roots_total: usize,
    pub admissible_roots: Vec<Complex64>,
    pub root_method: String,
    pub poly_degree: usize,
    pub gamma_halvings: usize,
    pub repair_x: Option<f64>,
    pub repair_halvings: usize,
    pub degeneracy: Vec<f64>,
    pub extra_candidates: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct MeasurementSettings {
    pub dims: Vec<usize>,
    pub pivot: SubsetMask,
    pub degree: usize,
    pub scenario: Scenario,
    pub parties: Vec<PartySettings>,
    /// Frame pairs the tables are embedded through (needed for repair).
    pub frames: Vec<FramePair>,
    /// Closed-form value of the combination; `None` once a repair has
    /// perturbed the tables away from the analytic point.
    pub predicted_value: Option<f64>,
    pub diagnostics: SynthesisDiagnostics,
}

fn orth_table(t: &[Complex64; 2]) -> [Complex64; 2] {
    [-t[1].conj(), t[0].conj()]
}

fn table_norm(t: &[Complex64; 2]) -> f64 {
    (t[0].norm_sqr() + t[1].norm_sqr()).sqrt()
}

/// Embed an in-plane coefficient table as a unit vector of the party's
/// full local space.
pub fn embed_table(pair: &FramePair, t: &[Complex64; 2]) -> LocalVector {
    let d = pair.e0.components.len();
    let mut comps = vec![Complex64::ZERO; d];
    for i in 0..d {
        comps[i] = t[0] * pair.e0.components[i] + t[1] * pair.e1.components[i];
    }
    LocalVector::new(pair.e0.party, comps)
        .normalized()
        .expect("nonzero table")
}

fn party_settings(pair: &FramePair, a: [Complex64; 2], b: [Complex64; 2]) -> PartySettings {
    let bbar = orth_table(&b);
    PartySettings {
        party: pair.e0.party,
        a_table: a,
        b_table: b,
        bbar_table: bbar,
        a: embed_table(pair, &a),
        b: embed_table(pair, &b),
        bbar: embed_table(pair, &bbar),
    }
}

impl PartySettings {
    /// `min(|<a|b>|, |<a|bbar>|)` over the normalized tables.
    pub fn degeneracy(&self) -> f64 {
        let na = table_norm(&self.a_table);
        let nb = table_norm(&self.b_table);
        let nbb = table_norm(&self.bbar_table);
        let ab = (self.a_table[0].conj() * self.b_table[0]
            + self.a_table[1].conj() * self.b_table[1])
            .norm()
            / (na * nb);
        let abb = (self.a_table[0].conj() * self.bbar_table[0]
            + self.a_table[1].conj() * self.bbar_table[1])
            .norm()
            / (na * nbb);
        ab.min(abb)
    }
}

impl MeasurementSettings {
    pub fn n_parties(&self) -> usize {
        self.dims.len()
    }

    pub fn degeneracy_metrics(&self) -> Vec<f64> {
        self.parties.iter().map(|p| p.degeneracy()).collect()
    }

    pub fn is_degenerate(&self, threshold: f64) -> bool {
        self.degeneracy_metrics().iter().any(|&d| d <= threshold)
    }

    /// Structural checks on the finished settings.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_parties();
        if self.parties.len() != n || self.frames.len() != n {
            return Err(Error::InvalidSettings(format!(
                "expected {} parties, found {} with {} frames",
                n,
                self.parties.len(),
                self.frames.len()
            )));
        }
        for (i, p) in self.parties.iter().enumerate() {
            if p.party != i + 1 {
                return Err(Error::InvalidSettings(format!(
                    "party slot {} labeled {}",
                    i + 1,
                    p.party
                )));
            }
            for (name, v) in [("a", &p.a), ("b", &p.b), ("bbar", &p.bbar)] {
                if v.components.len() != self.dims[i] {
                    return Err(Error::InvalidSettings(format!(
                        "party {} vector {} has dimension {}, expected {}",
                        p.party,
                        name,
                        v.components.len(),
                        self.dims[i]
                    )));
                }
                if (v.norm() - 1.0).abs() > 1e-10 {
                    return Err(Error::InvalidSettings(format!(
                        "party {} vector {} is not unit (norm {:.12})",
                        p.party,
                        name,
                        v.norm()
                    )));
                }
            }
            if p.b.dot(&p.bbar).norm() > 1e-10 {
                return Err(Error::InvalidSettings(format!(
                    "party {} second-setting pair is not orthogonal",
                    p.party
                )));
            }
        }
        Ok(())
    }
}

/// Exact value of the certified combination for rotation tables, summed
/// from the frame table (every table here is already unit norm).
pub fn bell_value(frame: &AlignedFrame, gamma: f64, q: f64, r: Complex64) -> f64 {
    let n = frame.n_parties();
    let tables = bell_tables(frame, gamma, q, r);
    let a: Vec<[Complex64; 2]> = tables.iter().map(|t| t.0).collect();
    let amp_a = frame.amplitude(&a).norm_sqr();
    let bbar: Vec<[Complex64; 2]> = tables.iter().map(|t| orth_table(&t.1)).collect();
    let amp_bbar = frame.amplitude(&bbar).norm_sqr();
    let mut cross = 0.0;
    for k in 1..=n {
        let mut coeffs = a.clone();
        coeffs[k - 1] = tables[k - 1].1;
        cross += frame.amplitude(&coeffs).norm_sqr();
    }
    amp_a - amp_bbar - cross
}

fn bell_tables(
    frame: &AlignedFrame,
    gamma: f64,
    q: f64,
    r: Complex64,
) -> Vec<([Complex64; 2], [Complex64; 2])> {
    let n = frame.n_parties();
    let one = Complex64::ONE;
    let zero = Complex64::ZERO;
    (1..=n)
        .map(|k| {
            let a = [one, zero];
            let b = if frame.pivot.contains(k) {
                [
                    Complex64::new(-gamma.sin(), 0.0),
                    Complex64::new(gamma.cos(), 0.0),
                ]
            } else {
                [Complex64::new(q, 0.0), r]
            };
            (a, b)
        })
        .collect()
}

/// Halve the rotation angle until the combination retains at least half of
/// its zero-angle limit while the in-pivot tables stay nondegenerate.
pub fn choose_gamma(
    frame: &AlignedFrame,
    q: f64,
    r: Complex64,
    opts: &SynthesisOptions,
) -> Result<(f64, usize)> {
    if frame.degree == 0 {
        return Ok((0.0, 0));
    }
    let limit = bell_value(frame, 0.0, q, r);
    let mut gamma = opts.gamma_init;
    for halvings in 0..opts.max_halvings {
        let value = bell_value(frame, gamma, q, r);
        if value >= 0.5 * limit && value > 0.0 && gamma.sin() > opts.degeneracy_threshold {
            return Ok((gamma, halvings));
        }
        gamma *= 0.5;
    }
    Err(Error::GammaSearchFailed(opts.max_halvings))
}

/// Rotation construction, applicable when the support degree is `n - 2`.
pub fn plan_bell(frame: &AlignedFrame, opts: &SynthesisOptions) -> Result<MeasurementSettings> {
    let n = frame.n_parties();
    if frame.degree + 2 != n {
        return Err(Error::ScenarioMismatch(format!(
            "support degree {} of {} parties requires the parametric tables",
            frame.degree, n
        )));
    }
    let h_i = frame.h_full();
    let h_a = frame.h(frame.pivot);
    let lambda = h_a.norm() / h_i.norm();
    let theta = (h_a / h_i).arg();
    let q = lambda.sqrt() / (1.0 + lambda);
    let r = Complex64::i() * Complex64::from_polar((1.0 - q * q).sqrt(), -theta / 2.0);
    let (gamma, gamma_halvings) = choose_gamma(frame, q, r, opts)?;
    let parties: Vec<PartySettings> = bell_tables(frame, gamma, q, r)
        .into_iter()
        .zip(frame.pairs())
        .map(|((a, b), pair)| party_settings(pair, a, b))
        .collect();
    let predicted = bell_value(frame, gamma, q, r);
    let mut settings = MeasurementSettings {
        dims: frame.dims().to_vec(),
        pivot: frame.pivot,
        degree: frame.degree,
        scenario: Scenario::Bell {
            gamma,
            lambda,
            theta,
            q,
            r,
        },
        parties,
        frames: frame.pairs().to_vec(),
        predicted_value: Some(predicted),
        diagnostics: SynthesisDiagnostics {
            gamma_halvings,
            ..SynthesisDiagnostics::default()
        },
    };
    settings.diagnostics.degeneracy = settings.degeneracy_metrics();
    Ok(settings)
}

/// Linear-in-`z` data for the parametric tables at a given `(v, y)`.
#[derive(Clone, Debug)]
pub struct HardyCoefficients {
    /// Constant part of the in-pivot first table entry, per party.
    pub u: BTreeMap<usize, Complex64>,
    /// `z` coefficient of the in-pivot first table entry, per party.
    pub w: BTreeMap<usize, Complex64>,
    /// First table entry of the singled-out party's second setting.
    pub f: Complex64,
    pub spectators: Vec<usize>,
}

pub fn hardy_coefficients(
    frame: &AlignedFrame,
    extra_party: usize,
    y: f64,
) -> Result<HardyCoefficients> {
    let n = frame.n_parties();
    let pivot = frame.pivot;
    if pivot.contains(extra_party) || extra_party < 1 || extra_party > n {
        return Err(Error::ScenarioMismatch(format!(
            "party {extra_party} cannot be singled out (inside the pivot or out of range)"
        )));
    }
    let spectators: Vec<usize> = pivot
        .complement(n)
        .members(n)
        .into_iter()
        .filter(|&k| k != extra_party)
        .collect();
    let s = spectators.len() as i32;
    let h_i = frame.h_full();
    let h_a = frame.h(pivot);
    let ys = y.powi(s);
    let mut u = BTreeMap::new();
    let mut w = BTreeMap::new();
    for k in pivot.members(n) {
        let base = pivot.without(k);
        let mut cross = Complex64::ZERO;
        for &kp in &spectators {
            cross += frame.h(base.with(kp));
        }
        u.insert(k, cross / (y * h_a) + frame.h(base) / h_a);
        w.insert(k, -ys * frame.h(base.with(extra_party)) / h_i);
    }
    let f = h_i / (ys * h_a);
    Ok(HardyCoefficients {
        u,
        w,
        f,
        spectators,
    })
}

/// Polynomial in `z` whose conjugate equals the all-`bbar` amplitude; its
/// roots are the admissible `z` choices. Built by contracting the conjugated
/// frame table with the per-party linear factors.
pub fn hardy_polynomial(
    frame: &AlignedFrame,
    extra_party: usize,
    y: f64,
) -> Result<Vec<Complex64>> {
    let coeffs = hardy_coefficients(frame, extra_party, y)?;
    Ok(hardy_polynomial_with(frame, extra_party, y, &coeffs))
}

fn hardy_polynomial_with(
    frame: &AlignedFrame,
    extra_party: usize,
    y: f64,
    coeffs: &HardyCoefficients,
) -> Vec<Complex64> {
    let n = frame.n_parties();
    let one = Complex64::ONE;
    let factors: Vec<[Vec<Complex64>; 2]> = (1..=n)
        .map(|k| {
            if frame.pivot.contains(k) {
                // e0 pattern (1 - z); e1 pattern u + w z.
                [vec![one, -one], vec![coeffs.u[&k], coeffs.w[&k]]]
            } else if k == extra_party {
                [vec![coeffs.f], vec![one]]
            } else {
                [vec![Complex64::ZERO, Complex64::new(-y, 0.0)], vec![one]]
            }
        })
        .collect();
    let mut table: Vec<Vec<Complex64>> = frame.h_table().iter().map(|h| vec![h.conj()]).collect();
    for k in (1..=n).rev() {
        let bit = 1usize << (k - 1);
        let mut next = Vec::with_capacity(bit);
        for m in 0..bit {
            let p0 = poly::mul(&table[m | bit], &factors[k - 1][0]);
            let p1 = poly::mul(&table[m], &factors[k - 1][1]);
            next.push(poly::add(&p0, &p1));
        }
        table = next;
    }
    poly::trim(&table.swap_remove(0))
}

/// Closed-form value of the parametric construction at `(y, z)`.
pub fn hardy_closed_form(frame: &AlignedFrame, y: f64, z: Complex64) -> f64 {
    let n = frame.n_parties();
    let s = (n - frame.degree - 1) as i32;
    let h_i = frame.h_full();
    let h_a = frame.h(frame.pivot);
    let ys = y.powi(s);
    let num = (ys * h_a * h_i * (Complex64::ONE - z)).norm_sqr();
    let den = (1.0 + y * y).powi(s) * (h_i.norm_sqr() + (ys * h_a * z).norm_sqr());
    num / den
}

/// Chosen parameters for one singled-out party.
#[derive(Clone, Debug)]
pub struct HardyPlan {
    pub extra_party: usize,
    pub y: f64,
    pub z: Complex64,
    pub value: f64,
    pub coefficients: HardyCoefficients,
    pub admissible_roots: Vec<Complex64>,
    pub y_tried: usize,
    pub roots_total: usize,
    pub root_method: String,
    pub poly_degree: usize,
}

/// Walk the `y` ladder (then seeded samples) and return the first `y`
/// admitting a positive-value root, with the best root at that `y`.
///
/// Root preference: largest closed-form value, then smallest principal
/// argument, then smallest modulus; ties at relative level `1e-12`.
pub fn find_parameters(
    frame: &AlignedFrame,
    extra_party: usize,
    opts: &SynthesisOptions,
) -> Result<HardyPlan> {
    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed ^ 0x9a7d_11e5);
    let mut tried = 0usize;
    let mut roots_total = 0usize;
    let mut last_note = String::from("no candidates tried");
    for idx in 0..opts.max_y_candidates {
        let y = if idx < Y_LADDER.len() {
            Y_LADDER[idx]
        } else {
            let mag = 0.1 + 2.9 * rng.random::<f64>();
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        };
        tried += 1;
        let coefficients = hardy_coefficients(frame, extra_party, y)?;
        let p = hardy_polynomial_with(frame, extra_party, y, &coefficients);
        if poly::is_zero(&p) || p.len() <= 1 {
            last_note = format!("y={y}: polynomial reduced to a constant");
            continue;
        }
        let degree = p.len() - 1;
        let method = match degree {
            1 => "linear",
            2 => "quadratic",
            _ => "aberth-ehrlich",
        };
        let all_roots = poly::roots(&p);
        roots_total += all_roots.len();
        let scale = p.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        let admissible: Vec<Complex64> = all_roots
            .into_iter()
            .filter(|&z| {
                let clean = (z - Complex64::ONE).norm() > opts.root_min_distance;
                let residual = poly::eval(&p, z).norm();
                clean && residual <= 1e-6 * scale * (1.0 + z.norm()).powi(degree as i32)
            })
            .collect();
        if admissible.is_empty() {
            last_note = format!("y={y}: no admissible root among degree {degree}");
            continue;
        }
        let mut best = admissible[0];
        let mut best_value = hardy_closed_form(frame, y, best);
        for &z in &admissible[1..] {
            let value = hardy_closed_form(frame, y, z);
            let tie = (value - best_value).abs() <= 1e-12 * best_value.max(value).max(1e-300);
            let better = if !tie {
                value > best_value
            } else if (z.arg() - best.arg()).abs() > 1e-12 {
                z.arg() < best.arg()
            } else {
                z.norm() < best.norm()
            };
            if better {
                best = z;
                best_value = value;
            }
        }
        if best_value > 1e-15 {
            return Ok(HardyPlan {
                extra_party,
                y,
                z: best,
                value: best_value,
                coefficients,
                admissible_roots: admissible,
                y_tried: tried,
                roots_total,
                root_method: method.to_string(),
                poly_degree: degree,
            });
        }
        last_note = format!("y={y}: admissible roots all give zero value");
    }
    Err(Error::SearchExhausted {
        tried,
        summary: last_note,
    })
}

/// Parametric construction, applicable when the support degree is below
/// `n - 2`.
pub fn plan_hardy(frame: &AlignedFrame, opts: &SynthesisOptions) -> Result<MeasurementSettings> {
    let n = frame.n_parties();
    if frame.degree + 2 >= n {
        return Err(Error::ScenarioMismatch(format!(
            "support degree {} of {} parties requires the rotation tables",
            frame.degree, n
        )));
    }
    let candidates: Vec<usize> = match opts.extra_party {
        ExtraPartyChoice::TryAll => frame.pivot.complement(n).members(n),
        ExtraPartyChoice::Fixed(p) => vec![p],
    };
    let mut plans = Vec::new();
    let mut failures = Vec::new();
    for &v in &candidates {
        match find_parameters(frame, v, opts) {
            Ok(plan) => plans.push(plan),
            Err(e) => failures.push(format!("party {v}: {e}")),
        }
    }
    let plan = plans
        .into_iter()
        .max_by(|a, b| {
            a.value
                .partial_cmp(&b.value)
                .unwrap()
                .then(b.extra_party.cmp(&a.extra_party))
        })
        .ok_or_else(|| Error::SearchExhausted {
            tried: candidates.len(),
            summary: failures.join("; "),
        })?;

    let h_i = frame.h_full();
    let h_a = frame.h(frame.pivot);
    let s = plan.coefficients.spectators.len() as i32;
    let ys = plan.y.powi(s);
    let e = -h_a * ys * plan.z / h_i;
    let f = plan.coefficients.f;
    let one = Complex64::ONE;
    let parties: Vec<PartySettings> = (1..=n)
        .map(|k| {
            let pair = frame.pair(k);
            if frame.pivot.contains(k) {
                let c = plan.coefficients.u[&k] + plan.coefficients.w[&k] * plan.z;
                party_settings(pair, [one, Complex64::ZERO], [c, plan.z - one])
            } else if k == plan.extra_party {
                party_settings(pair, [e, one], [-one, f])
            } else {
                party_settings(
                    pair,
                    [one, Complex64::new(plan.y, 0.0)],
                    [one, plan.y * plan.z],
                )
            }
        })
        .collect();
    let mut settings = MeasurementSettings {
        dims: frame.dims().to_vec(),
        pivot: frame.pivot,
        degree: frame.degree,
        scenario: Scenario::Hardy {
            y: plan.y,
            z: plan.z,
            extra_party: plan.extra_party,
            e,
            f,
            spectators: plan.coefficients.spectators.len(),
        },
        parties,
        frames: frame.pairs().to_vec(),
        predicted_value: Some(plan.value),
        diagnostics: SynthesisDiagnostics {
            y_tried: plan.y_tried,
            roots_total: plan.roots_total,
            admissible_roots: plan.admissible_roots,
            root_method: plan.root_method,
            poly_degree: plan.poly_degree,
            extra_candidates: candidates,
            ..SynthesisDiagnostics::default()
        },
    };
    settings.diagnostics.degeneracy = settings.degeneracy_metrics();
    Ok(settings)
}

/// Nudge the second-setting tables of degenerate parties by `x` (halved on
/// failure) until every party is nondegenerate and the evaluated value keeps
/// at least 90% of the pre-repair reference. Marks closed forms stale.
pub fn repair_degeneracy(
    settings: &mut MeasurementSettings,
    state: &PureState,
    opts: &SynthesisOptions,
) -> Result<Option<f64>> {
    let thr = opts.degeneracy_threshold;
    let metrics = settings.degeneracy_metrics();
    let degenerate: Vec<usize> = settings
        .parties
        .iter()
        .zip(&metrics)
        .filter(|(_, &d)| d <= thr)
        .map(|(p, _)| p.party)
        .collect();
    if degenerate.is_empty() {
        return Ok(None);
    }
    let reference = match settings.predicted_value {
        Some(v) => v,
        None => evaluator::quantum_value(state, settings, &LeakagePolicy::default())?.value,
    };
    let mut best = f64::NEG_INFINITY;
    let mut x = 0.1;
    for halvings in 0..opts.max_halvings {
        let mut cand = settings.clone();
        for &party in &degenerate {
            let slot = &mut cand.parties[party - 1];
            let na = table_norm(&slot.a_table);
            let a_hat = [slot.a_table[0] / na, slot.a_table[1] / na];
            let ab = (a_hat[0].conj() * slot.b_table[0] + a_hat[1].conj() * slot.b_table[1])
                .norm()
                / table_norm(&slot.b_table);
            // Push the second setting toward whichever overlap collapsed.
            let dir = if ab <= thr { a_hat } else { orth_table(&a_hat) };
            slot.b_table[0] += x * dir[0];
            slot.b_table[1] += x * dir[1];
            slot.bbar_table = orth_table(&slot.b_table);
            let pair = &cand.frames[party - 1];
            slot.b = embed_table(pair, &slot.b_table);
            slot.bbar = embed_table(pair, &slot.bbar_table);
        }
        let new_metrics = cand.degeneracy_metrics();
        let clean = new_metrics.iter().all(|&d| d > thr);
        let value = evaluator::quantum_value(state, &cand, &LeakagePolicy::default())?.value;
        best = best.max(value);
        if clean && value > 0.0 && value >= 0.9 * reference {
            cand.predicted_value = None;
            cand.diagnostics.repair_x = Some(x);
            cand.diagnostics.repair_halvings = halvings;
            cand.diagnostics.degeneracy = new_metrics;
            *settings = cand;
            return Ok(Some(x));
        }
        x *= 0.5;
    }
    Err(Error::DegeneracyUnrepaired {
        halvings: opts.max_halvings,
        best,
    })
}

/// Full synthesis: pick the construction from the support degree, then
/// repair degenerate tables if requested.
pub fn synthesize(
    state: &PureState,
    frame: &AlignedFrame,
    opts: &SynthesisOptions,
) -> Result<MeasurementSettings> {
    let mut settings = if frame.degree + 2 == frame.n_parties() {
        plan_bell(frame, opts)?
    } else {
        plan_hardy(frame, opts)?
    };
    if opts.repair {
        repair_degeneracy(&mut settings, state, opts)?;
    }
    settings.validate()?;
    Ok(settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FrameOptions;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn basis_pairs(n: usize, flip: bool) -> Vec<FramePair> {
        (1..=n)
            .map(|k| {
                let zero = LocalVector::new(k, vec![Complex64::ONE, Complex64::ZERO]);
                let one = LocalVector::new(k, vec![Complex64::ZERO, Complex64::ONE]);
                if flip {
                    FramePair { e0: one, e1: zero }
                } else {
                    FramePair { e0: zero, e1: one }
                }
            })
            .collect()
    }

    fn ghz(n: usize, w0: f64, w1: f64) -> PureState {
        PureState::from_mask_terms(
            n,
            &[
                (SubsetMask(0), c(w0.sqrt(), 0.0)),
                (SubsetMask::full(n), c(w1.sqrt(), 0.0)),
            ],
        )
        .unwrap()
    }

    fn w3_frame() -> AlignedFrame {
        let t = 1.0 / 3f64.sqrt();
        let s = PureState::from_mask_terms(
            3,
            &[
                (SubsetMask(0b110), c(t, 0.0)),
                (SubsetMask(0b101), c(t, 0.0)),
                (SubsetMask(0b011), c(t, 0.0)),
            ],
        )
        .unwrap();
        let r2 = 2f64.sqrt();
        let pairs: Vec<FramePair> = (1..=3)
            .map(|k| FramePair {
                e0: LocalVector::new(k, vec![c(r2 / 3f64.sqrt(), 0.0), c(1.0 / 3f64.sqrt(), 0.0)]),
                e1: LocalVector::new(
                    k,
                    vec![c(-1.0 / 3f64.sqrt(), 0.0), c(r2 / 3f64.sqrt(), 0.0)],
                ),
            })
            .collect();
        AlignedFrame::from_pairs(&s, pairs, &FrameOptions::default()).unwrap()
    }

    fn mixed5() -> PureState {
        let t = 1.0 / 3f64.sqrt();
        PureState::from_mask_terms(
            5,
            &[
                (SubsetMask::full(5), c(t, 0.0)),
                (SubsetMask(0b00011), c(t, 0.0)),
                (SubsetMask(0b00000), c(t, 0.0)),
            ],
        )
        .unwrap()
    }

    /// Independent route to the value: amplitudes straight off the frame
    /// table with explicit normalization, no closed forms.
    fn table_value(frame: &AlignedFrame, settings: &MeasurementSettings) -> (f64, f64) {
        let n = settings.n_parties();
        let a: Vec<[Complex64; 2]> = settings.parties.iter().map(|p| p.a_table).collect();
        let na: f64 = a.iter().map(table_norm).product();
        let a_term = (frame.amplitude(&a) / na).norm_sqr();
        let bbar: Vec<[Complex64; 2]> = settings.parties.iter().map(|p| p.bbar_table).collect();
        let nbb: f64 = bbar.iter().map(table_norm).product();
        let bbar_amp = (frame.amplitude(&bbar) / nbb).norm();
        let mut cross = 0.0;
        for k in 1..=n {
            let mut coeffs = a.clone();
            coeffs[k - 1] = settings.parties[k - 1].b_table;
            let norm = na / table_norm(&a[k - 1]) * table_norm(&coeffs[k - 1]);
            cross += (frame.amplitude(&coeffs) / norm).norm_sqr();
        }
        (a_term - bbar_amp * bbar_amp - cross, bbar_amp)
    }

    #[test]
    fn w_state_rotation_parameters() {
        let frame = w3_frame();
        let opts = SynthesisOptions::default();
        let settings = plan_bell(&frame, &opts).unwrap();
        let Scenario::Bell {
            gamma,
            lambda,
            theta,
            q,
            r,
        } = settings.scenario
        else {
            panic!("expected rotation tables");
        };
        assert_abs_diff_eq!(lambda, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(theta.abs(), std::f64::consts::PI, epsilon = 1e-9);
        assert_abs_diff_eq!(q, 2f64.sqrt() / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.norm(), 7f64.sqrt() / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(bell_value(&frame, 0.0, q, r), 4.0 / 81.0, epsilon = 1e-9);
        assert!(gamma > 0.0 && gamma <= std::f64::consts::PI / 16.0 + 1e-15);
        let predicted = settings.predicted_value.unwrap();
        assert!(predicted > 2.0 / 81.0);
        let (tv, _) = table_value(&frame, &settings);
        assert_abs_diff_eq!(tv, predicted, epsilon = 1e-12);
        assert!(!settings.is_degenerate(opts.degeneracy_threshold));
    }

    #[test]
    fn rotation_zero_angle_limit_identity() {
        let frame = w3_frame();
        let h_i = frame.h_full().norm();
        let h_a = frame.h(frame.pivot).norm();
        let lambda = h_a / h_i;
        let q = lambda.sqrt() / (1.0 + lambda);
        let theta = (frame.h(frame.pivot) / frame.h_full()).arg();
        let r = Complex64::i() * Complex64::from_polar((1.0 - q * q).sqrt(), -theta / 2.0);
        let expect = lambda * lambda * h_i * h_i / ((1.0 + lambda) * (1.0 + lambda));
        assert_abs_diff_eq!(bell_value(&frame, 0.0, q, r), expect, epsilon = 1e-12);
    }

    #[test]
    fn balanced_three_party_parametric_plan() {
        let s = ghz(3, 0.5, 0.5);
        let frame =
            AlignedFrame::from_pairs(&s, basis_pairs(3, false), &FrameOptions::default()).unwrap();
        let opts = SynthesisOptions::default();
        let settings = plan_hardy(&frame, &opts).unwrap();
        let Scenario::Hardy {
            y,
            z,
            extra_party,
            e,
            f,
            spectators,
        } = settings.scenario
        else {
            panic!("expected parametric tables");
        };
        assert_eq!(extra_party, 1);
        assert_eq!(spectators, 2);
        assert_abs_diff_eq!(y, 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(z.re, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(z.im, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.re, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e.im, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            settings.predicted_value.unwrap(),
            0.125,
            epsilon = 1e-12
        );
        assert_eq!(settings.diagnostics.root_method, "quadratic");
        // The root kills the all-bbar amplitude; the independent table route
        // must agree with the closed form.
        let (tv, bbar_amp) = table_value(&frame, &settings);
        assert!(bbar_amp < 1e-10);
        assert_abs_diff_eq!(tv, 0.125, epsilon = 1e-12);
    }

    #[test]
    fn unbalanced_three_party_root() {
        let s = ghz(3, 0.2, 0.8);
        let frame =
            AlignedFrame::from_pairs(&s, basis_pairs(3, false), &FrameOptions::default()).unwrap();
        let settings = plan_hardy(&frame, &SynthesisOptions::default()).unwrap();
        let Scenario::Hardy { y, z, .. } = settings.scenario else {
            panic!("expected parametric tables");
        };
        assert_abs_diff_eq!(y, 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(z.re, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(z.im, -0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(
            settings.predicted_value.unwrap(),
            1.0 / 17.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn four_party_cubic_root_tiebreak() {
        let s = ghz(4, 0.5, 0.5);
        let frame =
            AlignedFrame::from_pairs(&s, basis_pairs(4, false), &FrameOptions::default()).unwrap();
        let settings = plan_hardy(&frame, &SynthesisOptions::default()).unwrap();
        let Scenario::Hardy { z, .. } = settings.scenario else {
            panic!("expected parametric tables");
        };
        // Roots of unity excluding 1; the smallest principal argument wins.
        assert_abs_diff_eq!(z.re, -0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(z.im, -3f64.sqrt() / 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            settings.predicted_value.unwrap(),
            3.0 / 32.0,
            epsilon = 1e-12
        );
        assert_eq!(settings.diagnostics.root_method, "aberth-ehrlich");
        let (tv, bbar_amp) = table_value(&frame, &settings);
        assert!(bbar_amp < 1e-10);
        assert_abs_diff_eq!(tv, 3.0 / 32.0, epsilon = 1e-12);
    }

    #[test]
    fn mixed_five_party_parametric_is_degenerate_before_repair() {
        let s = mixed5();
        let frame =
            AlignedFrame::from_pairs(&s, basis_pairs(5, false), &FrameOptions::default()).unwrap();
        let opts = SynthesisOptions::default();
        let settings = plan_hardy(&frame, &opts).unwrap();
        let Scenario::Hardy {
            y, z, extra_party, ..
        } = settings.scenario
        else {
            panic!("expected parametric tables");
        };
        assert_eq!(extra_party, 3);
        assert_abs_diff_eq!(y, 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(z.re, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(z.im, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            settings.predicted_value.unwrap(),
            1.0 / 12.0,
            epsilon = 1e-12
        );
        // The in-pivot first entries collapse to zero here, so both pivot
        // parties are degenerate until repaired.
        for k in [1usize, 2] {
            assert!(settings.parties[k - 1].b_table[0].norm() < 1e-12);
            assert!(settings.diagnostics.degeneracy[k - 1] <= opts.degeneracy_threshold);
        }
        assert!(settings.is_degenerate(opts.degeneracy_threshold));
        let (tv, bbar_amp) = table_value(&frame, &settings);
        assert!(bbar_amp < 1e-10);
        assert_abs_diff_eq!(tv, 1.0 / 12.0, epsilon = 1e-12);
    }

    #[test]
    fn scenario_dispatch_rejects_mismatches() {
        let frame = w3_frame();
        assert!(matches!(
            plan_hardy(&frame, &SynthesisOptions::default()),
            Err(Error::ScenarioMismatch(_))
        ));
        let s = ghz(3, 0.5, 0.5);
        let gf =
            AlignedFrame::from_pairs(&s, basis_pairs(3, false), &FrameOptions::default()).unwrap();
        assert!(matches!(
            plan_bell(&gf, &SynthesisOptions::default()),
            Err(Error::ScenarioMismatch(_))
        ));
    }

    #[test]
    fn fixed_extra_party_is_validated_and_symmetric() {
        let s = ghz(3, 0.5, 0.5);
        let frame =
            AlignedFrame::from_pairs(&s, basis_pairs(3, false), &FrameOptions::default()).unwrap();
        let mut opts = SynthesisOptions {
            extra_party: ExtraPartyChoice::Fixed(2),
            ..SynthesisOptions::default()
        };
        let settings = plan_hardy(&frame, &opts).unwrap();
        let Scenario::Hardy { extra_party, .. } = settings.scenario else {
            panic!("expected parametric tables");
        };
        assert_eq!(extra_party, 2);
        assert_abs_diff_eq!(
            settings.predicted_value.unwrap(),
            0.125,
            epsilon = 1e-12
        );
        opts.extra_party = ExtraPartyChoice::Fixed(9);
        assert!(plan_hardy(&frame, &opts).is_err());
    }

    #[test]
    fn polynomial_degree_is_bounded_by_party_count_minus_one() {
        let s = mixed5();
        let frame =
            AlignedFrame::from_pairs(&s, basis_pairs(5, false), &FrameOptions::default()).unwrap();
        for v in [3usize, 4, 5] {
            let p = hardy_polynomial(&frame, v, 1.0).unwrap();
            assert!(p.len() <= 5, "degree {} too high", p.len() - 1);
        }
    }
}
