//! Exact evaluation of the certified combination
//! `P(all first) - P(all second complements) - sum_k P(second_k, first elsewhere)`
//! for a state and a finished set of measurements.
//!
//! Every party measures two dichotomic observables. Outcome one of the
//! first setting projects onto `a` and outcome one of the second onto `b`,
//! with `bbar` spanning the rest of the party's measurement plane. For
//! local dimensions above two the plane leaves a leaked subspace
//! `Q = I - |b><b| - |bbar><bbar|`; a [`LeakagePolicy`] assigns it to an
//! outcome of each setting and the report carries the exact decomposition
//! of the value into the in-plane part plus the policy gains.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::settings::{embed_table, MeasurementSettings};
use crate::state::{LocalVector, ProductVector, PureState};

pub use crate::settings::hardy_closed_form;

/// Outcome assignment for the leaked subspace of one party.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LeakAssignment {
    /// Leak counts as outcome one of the first setting.
    pub first_to_one: bool,
    /// Leak counts as outcome one of the second setting.
    pub second_to_one: bool,
}

impl Default for LeakAssignment {
    fn default() -> Self {
        // Leaked weight never helps the first-setting event but is absorbed
        // by the second setting, keeping its complement event in-plane.
        LeakAssignment {
            first_to_one: false,
            second_to_one: true,
        }
    }
}

/// Per-party leak assignments; parties absent from the map use the default.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LeakagePolicy {
    pub assignments: BTreeMap<usize, LeakAssignment>,
}

impl LeakagePolicy {
    pub fn assignment(&self, party: usize) -> LeakAssignment {
        self.assignments
            .get(&party)
            .copied()
            .unwrap_or_default()
    }
}

#[derive(Clone, Debug)]
pub struct LeakageReport {
    pub policy: LeakagePolicy,
    /// Weight reaching the leaked subspace of party `k` when every other
    /// party projects onto its first setting; zero for qubit parties.
    pub per_party: Vec<f64>,
    /// Value computed with bare in-plane projectors.
    pub subspace_value: f64,
    pub first_gain: f64,
    pub second_complement_gain: f64,
    pub cross_gain: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct HardyReport {
    /// The certified combination under the policy.
    pub value: f64,
    /// `P(outcome one on every first setting)`.
    pub first_all: f64,
    /// `P(outcome zero on every second setting)`.
    pub second_complement_all: f64,
    /// `P(outcome one on second setting of k, outcome one on first settings
    /// elsewhere)`, per party.
    pub crosses: Vec<f64>,
    pub leakage: LeakageReport,
    /// Largest value any deterministic local assignment reaches; the
    /// enumeration oracle confirms it (see the `lhv` module).
    pub classical_bound: f64,
    /// Closed-form prediction from the synthesis, when still fresh.
    pub predicted_value: Option<f64>,
    pub scenario: String,
}

/// Flags describing the zero-probability structure that makes the
/// violation a logical contradiction for deterministic local models.
#[derive(Clone, Copy, Debug)]
pub struct HardyFlags {
    pub first_positive: bool,
    pub crosses_vanish: bool,
    pub complement_vanishes: bool,
    /// All three at once.
    pub paradox: bool,
}

pub fn hardy_flags(report: &HardyReport, tol: f64) -> HardyFlags {
    let first_positive = report.first_all > tol;
    let crosses_vanish = report.crosses.iter().all(|&c| c <= tol);
    let complement_vanishes = report.second_complement_all <= tol;
    HardyFlags {
        first_positive,
        crosses_vanish,
        complement_vanishes,
        paradox: first_positive && crosses_vanish && complement_vanishes,
    }
}

fn outer(v: &LocalVector) -> Vec<Complex64> {
    let d = v.components.len();
    let mut m = vec![Complex64::ZERO; d * d];
    for i in 0..d {
        for j in 0..d {
            m[i * d + j] = v.components[i] * v.components[j].conj();
        }
    }
    m
}

fn plane_complement(b: &LocalVector, bbar: &LocalVector) -> Vec<Complex64> {
    let d = b.components.len();
    let mut m = vec![Complex64::ZERO; d * d];
    for i in 0..d {
        m[i * d + i] = Complex64::ONE;
    }
    for (x, (pb, pbb)) in m
        .iter_mut()
        .zip(outer(b).into_iter().zip(outer(bbar)))
    {
        *x -= pb + pbb;
    }
    m
}

fn mat_add(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn prob(state: &PureState, mats: &[&[Complex64]]) -> f64 {
    let mut cur = state.clone();
    for (k, m) in mats.iter().enumerate() {
        cur = cur.apply_local(k + 1, m);
    }
    let norm = cur.norm();
    norm * norm
}

pub(crate) struct PartyOps {
    pub(crate) first_one: Vec<Complex64>,
    pub(crate) second_one: Vec<Complex64>,
    pub(crate) second_zero: Vec<Complex64>,
    pub(crate) leak: Vec<Complex64>,
    pub(crate) rank_first: Vec<Complex64>,
}

pub(crate) fn build_ops(settings: &MeasurementSettings, policy: &LeakagePolicy) -> Vec<PartyOps> {
    settings
        .parties
        .iter()
        .map(|p| {
            let q = plane_complement(&p.b, &p.bbar);
            let asg = policy.assignment(p.party);
            let rank_first = outer(&p.a);
            let first_one = if asg.first_to_one {
                mat_add(&rank_first, &q)
            } else {
                rank_first.clone()
            };
            let second_one = if asg.second_to_one {
                mat_add(&outer(&p.b), &q)
            } else {
                outer(&p.b)
            };
            let second_zero = if asg.second_to_one {
                outer(&p.bbar)
            } else {
                mat_add(&outer(&p.bbar), &q)
            };
            PartyOps {
                first_one,
                second_one,
                second_zero,
                leak: q,
                rank_first,
            }
        })
        .collect()
}

/// Exact quantum probabilities of the three event families and the value of
/// the combination under `policy`, with the leakage decomposition.
pub fn quantum_value(
    state: &PureState,
    settings: &MeasurementSettings,
    policy: &LeakagePolicy,
) -> Result<HardyReport> {
    settings.validate()?;
    if settings.dims != state.dims() {
        return Err(Error::InvalidSettings(format!(
            "settings are for dimensions {:?}, state has {:?}",
            settings.dims,
            state.dims()
        )));
    }
    state.assert_normalized(1e-9)?;
    let n = settings.n_parties();
    for (&party, _) in &policy.assignments {
        if party < 1 || party > n {
            return Err(Error::PartyOutOfRange { party, n });
        }
    }
    let ops = build_ops(settings, policy);

    let firsts: Vec<&[Complex64]> = ops.iter().map(|o| o.first_one.as_slice()).collect();
    let first_all = prob(state, &firsts);
    let seconds_zero: Vec<&[Complex64]> = ops.iter().map(|o| o.second_zero.as_slice()).collect();
    let second_complement_all = prob(state, &seconds_zero);
    let mut crosses = Vec::with_capacity(n);
    for k in 1..=n {
        let mut mats = firsts.clone();
        mats[k - 1] = ops[k - 1].second_one.as_slice();
        crosses.push(prob(state, &mats));
    }
    let value = first_all - second_complement_all - crosses.iter().sum::<f64>();

    // In-plane (rank-one) route via amplitudes.
    let dims = state.dims();
    let a_factors: Vec<LocalVector> = settings.parties.iter().map(|p| p.a.clone()).collect();
    let pv_a = ProductVector::new(dims, a_factors.clone())?;
    let sub_first = state.inner_product(&pv_a)?.norm_sqr();
    let bbar_factors: Vec<LocalVector> = settings.parties.iter().map(|p| p.bbar.clone()).collect();
    let sub_second = state
        .inner_product(&ProductVector::new(dims, bbar_factors)?)?
        .norm_sqr();
    let mut sub_crosses = Vec::with_capacity(n);
    for k in 1..=n {
        let mut factors = a_factors.clone();
        factors[k - 1] = settings.parties[k - 1].b.clone();
        sub_crosses.push(
            state
                .inner_product(&ProductVector::new(dims, factors)?)?
                .norm_sqr(),
        );
    }
    let subspace_value =
        sub_first - sub_second - sub_crosses.iter().sum::<f64>();

    let any_leak = dims.iter().any(|&d| d > 2);
    let per_party: Vec<f64> = if any_leak {
        (1..=n)
            .map(|k| {
                let mut mats: Vec<&[Complex64]> =
                    ops.iter().map(|o| o.rank_first.as_slice()).collect();
                mats[k - 1] = ops[k - 1].leak.as_slice();
                prob(state, &mats)
            })
            .collect()
    } else {
        vec![0.0; n]
    };

    let leakage = LeakageReport {
        policy: policy.clone(),
        per_party,
        subspace_value,
        first_gain: first_all - sub_first,
        second_complement_gain: second_complement_all - sub_second,
        cross_gain: crosses
            .iter()
            .zip(&sub_crosses)
            .map(|(c, s)| c - s)
            .collect(),
    };
    Ok(HardyReport {
        value,
        first_all,
        second_complement_all,
        crosses,
        leakage,
        classical_bound: 0.0,
        predicted_value: settings.predicted_value,
        scenario: settings.scenario.name().to_string(),
    })
}

/// Enumerate all leak assignments over the parties with local dimension
/// above two and return the policy with the largest value (first maximum in
/// enumeration order, so the result is deterministic).
pub fn search_policies(
    state: &PureState,
    settings: &MeasurementSettings,
) -> Result<(LeakagePolicy, HardyReport)> {
    let qudit_parties: Vec<usize> = settings
        .dims
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 2)
        .map(|(i, _)| i + 1)
        .collect();
    if qudit_parties.len() > 8 {
        return Err(Error::InvalidSettings(format!(
            "policy search over {} parties with leak spaces is too large",
            qudit_parties.len()
        )));
    }
    let mut best: Option<(LeakagePolicy, HardyReport)> = None;
    let combos = 1usize << (2 * qudit_parties.len());
    for combo in 0..combos {
        let mut policy = LeakagePolicy::default();
        for (slot, &party) in qudit_parties.iter().enumerate() {
            let bits = (combo >> (2 * slot)) & 0b11;
            policy.assignments.insert(
                party,
                LeakAssignment {
                    first_to_one: bits & 1 != 0,
                    second_to_one: bits & 2 != 0,
                },
            );
        }
        let report = quantum_value(state, settings, &policy)?;
        let better = match &best {
            None => true,
            Some((_, b)) => report.value > b.value,
        };
        if better {
            best = Some((policy, report));
        }
    }
    Ok(best.expect("at least one policy"))
}

#[derive(Clone, Debug)]
pub struct MaximizeOptions {
    pub seed: u64,
    pub sweeps: usize,
    /// Simplex starts per party and sweep: the current point plus jittered
    /// copies.
    pub restarts: usize,
    pub tol: f64,
    pub simplex_iters: usize,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        MaximizeOptions {
            seed: 0,
            sweeps: 6,
            restarts: 3,
            tol: 1e-10,
            simplex_iters: 120,
        }
    }
}

fn angles_of(table: &[Complex64; 2]) -> [f64; 2] {
    let n0 = table[0].norm();
    let n1 = table[1].norm();
    let alpha = n1.atan2(n0);
    let phi = if n1 < 1e-14 {
        0.0
    } else if n0 < 1e-14 {
        table[1].arg()
    } else {
        table[1].arg() - table[0].arg()
    };
    [alpha, phi]
}

fn table_of(angles: &[f64; 2]) -> [Complex64; 2] {
    [
        Complex64::new(angles[0].cos(), 0.0),
        Complex64::from_polar(angles[0].sin(), angles[1]),
    ]
}

fn nelder_mead<F: FnMut(&[f64; 4]) -> f64>(
    mut f: F,
    start: [f64; 4],
    scale: f64,
    max_iter: usize,
) -> ([f64; 4], f64) {
    let mut pts: Vec<([f64; 4], f64)> = Vec::with_capacity(5);
    let v0 = f(&start);
    pts.push((start, v0));
    for i in 0..4 {
        let mut p = start;
        p[i] += scale;
        let v = f(&p);
        pts.push((p, v));
    }
    for _ in 0..max_iter {
        pts.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = pts[0].1;
        let worst = pts[4].1;
        if (worst - best).abs() < 1e-14 {
            break;
        }
        let mut centroid = [0.0f64; 4];
        for p in &pts[..4] {
            for i in 0..4 {
                centroid[i] += p.0[i] / 4.0;
            }
        }
        let dir = |t: f64| {
            let mut p = [0.0f64; 4];
            for i in 0..4 {
                p[i] = centroid[i] + t * (centroid[i] - pts[4].0[i]);
            }
            p
        };
        let refl = dir(1.0);
        let v_refl = f(&refl);
        if v_refl < pts[0].1 {
            let exp = dir(2.0);
            let v_exp = f(&exp);
            pts[4] = if v_exp < v_refl { (exp, v_exp) } else { (refl, v_refl) };
        } else if v_refl < pts[3].1 {
            pts[4] = (refl, v_refl);
        } else {
            let contr = dir(-0.5);
            let v_contr = f(&contr);
            if v_contr < pts[4].1 {
                pts[4] = (contr, v_contr);
            } else {
                let anchor = pts[0].0;
                for p in pts.iter_mut().skip(1) {
                    for i in 0..4 {
                        p.0[i] = anchor[i] + 0.5 * (p.0[i] - anchor[i]);
                    }
                    p.1 = f(&p.0);
                }
            }
        }
    }
    pts.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    pts[0]
}

/// Polish the in-plane tables party by party to enlarge the violation,
/// keeping the frame planes fixed. Returns the updated settings (closed
/// forms marked stale when anything moved) and the final report.
pub fn maximize_violation(
    state: &PureState,
    settings: &MeasurementSettings,
    policy: &LeakagePolicy,
    opts: &MaximizeOptions,
) -> Result<(MeasurementSettings, HardyReport)> {
    let mut current = settings.clone();
    let mut best_value = quantum_value(state, &current, policy)?.value;
    let start_value = best_value;
    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed ^ 0x3a11);
    let normal = StandardNormal;
    let n = current.n_parties();
    for _ in 0..opts.sweeps {
        let sweep_start = best_value;
        for party in 1..=n {
            let base = {
                let p = &current.parties[party - 1];
                let a = angles_of(&p.a_table);
                let b = angles_of(&p.b_table);
                [a[0], a[1], b[0], b[1]]
            };
            let mut trial = |angles: &[f64; 4]| -> f64 {
                let mut cand = current.clone();
                let pair = &cand.frames[party - 1];
                let slot_a = table_of(&[angles[0], angles[1]]);
                let slot_b = table_of(&[angles[2], angles[3]]);
                let bbar = [-slot_b[1].conj(), slot_b[0].conj()];
                let p = &mut cand.parties[party - 1];
                p.a_table = slot_a;
                p.b_table = slot_b;
                p.bbar_table = bbar;
                p.a = embed_table(pair, &slot_a);
                p.b = embed_table(pair, &slot_b);
                p.bbar = embed_table(pair, &bbar);
                match quantum_value(state, &cand, policy) {
                    Ok(r) => -r.value,
                    Err(_) => f64::INFINITY,
                }
            };
            let mut best_angles = base;
            let mut best_local = -best_value;
            for restart in 0..opts.restarts {
                let start = if restart == 0 {
                    base
                } else {
                    let mut p = base;
                    for x in p.iter_mut() {
                        let jitter: f64 = normal.sample(&mut rng);
                        *x += 0.3 * jitter;
                    }
                    p
                };
                let (angles, val) = nelder_mead(&mut trial, start, 0.15, opts.simplex_iters);
                if val < best_local {
                    best_local = val;
                    best_angles = angles;
                }
            }
            if -best_local > best_value + 1e-15 {
                let pair = &current.frames[party - 1];
                let slot_a = table_of(&[best_angles[0], best_angles[1]]);
                let slot_b = table_of(&[best_angles[2], best_angles[3]]);
                let bbar = [-slot_b[1].conj(), slot_b[0].conj()];
                let p = &mut current.parties[party - 1];
                p.a_table = slot_a;
                p.b_table = slot_b;
                p.bbar_table = bbar;
                p.a = embed_table(pair, &slot_a);
                p.b = embed_table(pair, &slot_b);
                p.bbar = embed_table(pair, &bbar);
                best_value = -best_local;
            }
        }
        if best_value - sweep_start < opts.tol {
            break;
        }
    }
    if best_value > start_value + 1e-15 {
        current.predicted_value = None;
    }
    let report = quantum_value(state, &current, policy)?;
    Ok((current, report))
}
