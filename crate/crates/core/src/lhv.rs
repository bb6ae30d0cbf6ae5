//! Classical side of the certificate: brute-force enumeration of
//! deterministic local assignments, an operator-expectation route to the
//! quantum value, and full joint distributions for small party counts.
//!
//! A deterministic local strategy fixes, for every party, one bit per
//! setting. The certified combination evaluates to an integer on such a
//! strategy, and enumeration over all `4^n` strategies shows its maximum
//! is zero; shared randomness cannot beat the best deterministic point.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluator::{self, LeakagePolicy};
use crate::settings::MeasurementSettings;
use crate::state::PureState;

/// Largest party count the exhaustive enumerations accept.
pub const MAX_ENUMERATION_PARTIES: usize = 13;
/// Largest party count [`joint_distribution`] accepts.
pub const MAX_JOINT_PARTIES: usize = 6;
/// Witness cap stored in [`ClassicalMax`].
pub const MAX_WITNESSES: usize = 64;

/// One deterministic local strategy; bit `k - 1` of each mask is the
/// outcome-one indicator of party `k` for that setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeterministicAssignment {
    pub first: u16,
    pub second: u16,
}

/// Value of the combination on one deterministic strategy.
pub fn assignment_value(n: usize, a: &DeterministicAssignment) -> i64 {
    let full: u16 = ((1u32 << n) - 1) as u16;
    let first = a.first & full;
    let second = a.second & full;
    let mut value: i64 = 0;
    if first == full {
        value += 1;
        value -= i64::from(second.count_ones());
    } else if first.count_ones() as usize == n - 1 {
        let missing = (!first & full).trailing_zeros();
        value -= i64::from((second >> missing) & 1);
    }
    if second == 0 {
        value -= 1;
    }
    value
}

#[derive(Clone, Debug)]
pub struct ClassicalMax {
    pub maximum: i64,
    /// Exact number of strategies attaining the maximum.
    pub witness_count: u64,
    /// The first attaining strategies in lexicographic `(first, second)`
    /// order, capped at [`MAX_WITNESSES`].
    pub witnesses: Vec<DeterministicAssignment>,
    /// Total strategies enumerated, always `4^n`.
    pub assignments_checked: u64,
}

fn check_enumeration_size(n: usize) -> Result<()> {
    if n < 2 || n > MAX_ENUMERATION_PARTIES {
        return Err(Error::PartyCountUnsupported {
            n,
            min: 2,
            max: MAX_ENUMERATION_PARTIES,
        });
    }
    Ok(())
}

/// Enumerate every deterministic strategy and report the exact maximum of
/// the combination together with attaining witnesses.
pub fn classical_max(n: usize) -> Result<ClassicalMax> {
    check_enumeration_size(n)?;
    let full: u32 = (1u32 << n) - 1;
    let per_first: Vec<(i64, u64)> = (0..=full)
        .into_par_iter()
        .map(|first| {
            let mut local_max = i64::MIN;
            let mut local_count = 0u64;
            for second in 0..=full {
                let v = assignment_value(
                    n,
                    &DeterministicAssignment {
                        first: first as u16,
                        second: second as u16,
                    },
                );
                if v > local_max {
                    local_max = v;
                    local_count = 1;
                } else if v == local_max {
                    local_count += 1;
                }
            }
            (local_max, local_count)
        })
        .collect();
    let maximum = per_first.iter().map(|&(m, _)| m).max().expect("nonempty");
    let witness_count: u64 = per_first
        .iter()
        .filter(|&&(m, _)| m == maximum)
        .map(|&(_, c)| c)
        .sum();
    let mut witnesses = Vec::new();
    'outer: for first in 0..=full {
        if per_first[first as usize].0 != maximum {
            continue;
        }
        for second in 0..=full {
            let a = DeterministicAssignment {
                first: first as u16,
                second: second as u16,
            };
            if assignment_value(n, &a) == maximum {
                witnesses.push(a);
                if witnesses.len() == MAX_WITNESSES {
                    break 'outer;
                }
            }
        }
    }
    Ok(ClassicalMax {
        maximum,
        witness_count,
        witnesses,
        assignments_checked: 1u64 << (2 * n),
    })
}

#[derive(Clone, Debug)]
pub struct ContextualReport {
    /// No deterministic strategy fires every first event, no cross event
    /// and kills the all-complements event at once.
    pub impossible: bool,
    pub assignments_checked: u64,
    pub counterexample: Option<DeterministicAssignment>,
}

/// Exhaustively confirm that the zero-probability pattern of the
/// construction admits no deterministic completion: outcome one on every
/// first setting, no second-vs-first cross event, and yet some second
/// setting giving outcome one.
pub fn contextual_impossibility(n: usize) -> Result<ContextualReport> {
    check_enumeration_size(n)?;
    let full: u32 = (1u32 << n) - 1;
    let counterexample = (0..=full)
        .into_par_iter()
        .filter_map(|first| {
            for second in 0..=full {
                let all_first = first == full;
                let mut crosses = 0u32;
                if first == full {
                    crosses = second.count_ones();
                } else if first.count_ones() as usize == n - 1 {
                    let missing = (!first & full).trailing_zeros();
                    crosses = (second >> missing) & 1;
                }
                let complement_dead = second != 0;
                if all_first && crosses == 0 && complement_dead {
                    return Some(DeterministicAssignment {
                        first: first as u16,
                        second: second as u16,
                    });
                }
            }
            None
        })
        .min_by_key(|a| (a.first, a.second));
    Ok(ContextualReport {
        impossible: counterexample.is_none(),
        assignments_checked: 1u64 << (2 * n),
        counterexample,
    })
}

fn apply_chain(state: &PureState, mats: &[&[Complex64]]) -> PureState {
    let mut cur = state.clone();
    for (k, m) in mats.iter().enumerate() {
        cur = cur.apply_local(k + 1, m);
    }
    cur
}

fn check_settings(state: &PureState, settings: &MeasurementSettings) -> Result<()> {
    settings.validate()?;
    if settings.dims != state.dims() {
        return Err(Error::InvalidSettings(format!(
            "settings are for dimensions {:?}, state has {:?}",
            settings.dims,
            state.dims()
        )));
    }
    state.assert_normalized(1e-9)
}

/// Expectation of the combination as one Hermitian operator,
/// `<psi| (A_1..A_n - Bbar_1..Bbar_n - sum_k B_k prod_{j!=k} A_j) |psi>`.
/// Independent route to the same number as the probability evaluation.
pub fn hardy_operator_value(
    state: &PureState,
    settings: &MeasurementSettings,
    policy: &LeakagePolicy,
) -> Result<f64> {
    check_settings(state, settings)?;
    let ops = evaluator::build_ops(settings, policy);
    let n = settings.n_parties();
    let firsts: Vec<&[Complex64]> = ops.iter().map(|o| o.first_one.as_slice()).collect();
    let mut acc: Vec<Complex64> = apply_chain(state, &firsts).amps().to_vec();
    let seconds: Vec<&[Complex64]> = ops.iter().map(|o| o.second_zero.as_slice()).collect();
    for (x, y) in acc.iter_mut().zip(apply_chain(state, &seconds).amps()) {
        *x -= y;
    }
    for k in 1..=n {
        let mut mats = firsts.clone();
        mats[k - 1] = ops[k - 1].second_one.as_slice();
        for (x, y) in acc.iter_mut().zip(apply_chain(state, &mats).amps()) {
            *x -= y;
        }
    }
    let expectation: Complex64 = state
        .amps()
        .iter()
        .zip(&acc)
        .map(|(a, h)| a.conj() * h)
        .sum();
    Ok(expectation.re)
}

/// Full conditional distribution over every setting choice and outcome
/// string, for small `n`. Row `s` has bit `k - 1` set when party `k` uses
/// its second setting; column `o` has it set when that party reports
/// outcome one.
#[derive(Clone, Debug)]
pub struct JointDistribution {
    pub n: usize,
    /// `table[s][o] = P(o | s)`.
    pub table: Vec<Vec<f64>>,
    /// Largest `|sum_o P(o|s) - 1|` over rows.
    pub normalization_residual: f64,
    /// Largest marginal mismatch when one party flips its setting.
    pub no_signaling_residual: f64,
}

impl JointDistribution {
    pub fn probability(&self, settings_mask: u32, outcome_mask: u32) -> f64 {
        self.table[settings_mask as usize][outcome_mask as usize]
    }

    /// Rebuild the certified combination from table entries alone.
    pub fn combination_value(&self) -> f64 {
        let full = (1u32 << self.n) - 1;
        let mut value = self.probability(0, full) - self.probability(full, 0);
        for k in 0..self.n {
            value -= self.probability(1 << k, full);
        }
        value
    }
}

pub fn joint_distribution(
    state: &PureState,
    settings: &MeasurementSettings,
    policy: &LeakagePolicy,
) -> Result<JointDistribution> {
    let n = settings.n_parties();
    if n > MAX_JOINT_PARTIES {
        return Err(Error::PartyCountUnsupported {
            n,
            min: 2,
            max: MAX_JOINT_PARTIES,
        });
    }
    check_settings(state, settings)?;
    let ops = evaluator::build_ops(settings, policy);
    // Outcome-zero effects as literal complements so each row sums to one.
    let complements: Vec<Vec<Complex64>> = ops
        .iter()
        .zip(settings.dims.iter())
        .map(|(o, &d)| {
            let mut m = o.first_one.clone();
            for x in m.iter_mut() {
                *x = -*x;
            }
            for i in 0..d {
                m[i * d + i] += Complex64::ONE;
            }
            m
        })
        .collect();
    let rows = 1u32 << n;
    let mut table = vec![vec![0.0f64; rows as usize]; rows as usize];
    for smask in 0..rows {
        for omask in 0..rows {
            let mats: Vec<&[Complex64]> = (0..n)
                .map(|i| {
                    let second = smask >> i & 1 == 1;
                    let one = omask >> i & 1 == 1;
                    match (second, one) {
                        (false, true) => ops[i].first_one.as_slice(),
                        (false, false) => complements[i].as_slice(),
                        (true, true) => ops[i].second_one.as_slice(),
                        (true, false) => ops[i].second_zero.as_slice(),
                    }
                })
                .collect();
            let out = apply_chain(state, &mats);
            let norm = out.norm();
            table[smask as usize][omask as usize] = norm * norm;
        }
    }
    let normalization_residual = table
        .iter()
        .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let mut no_signaling_residual = 0.0f64;
    for k in 0..n {
        let bit = 1u32 << k;
        for smask in 0..rows {
            if smask & bit != 0 {
                continue;
            }
            for orest in 0..rows {
                if orest & bit != 0 {
                    continue;
                }
                let m0 = table[smask as usize][orest as usize]
                    + table[smask as usize][(orest | bit) as usize];
                let m1 = table[(smask | bit) as usize][orest as usize]
                    + table[(smask | bit) as usize][(orest | bit) as usize];
                no_signaling_residual = no_signaling_residual.max((m0 - m1).abs());
            }
        }
    }
    Ok(JointDistribution {
        n,
        table,
        normalization_residual,
        no_signaling_residual,
    })
}
