//! JSON schemas for states, measurement settings, evaluation reports and
//! leak policies, plus canonical hashing and small file helpers.
//!
//! Complex numbers serialize as `{"re": x, "im": y}` objects. Canonical
//! form re-serializes through `serde_json::Value`, whose object maps keep
//! keys sorted, so byte-identical hashes do not depend on field order in
//! the input.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::evaluator::{hardy_flags, HardyReport, LeakAssignment, LeakagePolicy};
use crate::frame::FramePair;
use crate::settings::{
    MeasurementSettings, PartySettings, Scenario, SynthesisDiagnostics,
};
use crate::state::{LocalVector, PureState, SubsetMask};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateFile {
    pub dims: Vec<usize>,
    /// Flat amplitudes with party one outermost (most significant).
    pub amplitudes: Vec<Complex64>,
}

impl StateFile {
    pub fn from_state(state: &PureState) -> Self {
        StateFile {
            dims: state.dims().to_vec(),
            amplitudes: state.amps().to_vec(),
        }
    }

    pub fn to_state(&self) -> Result<PureState> {
        PureState::new(self.dims.clone(), self.amplitudes.clone())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalVectorFile {
    pub party: usize,
    pub components: Vec<Complex64>,
}

impl LocalVectorFile {
    fn from_vector(v: &LocalVector) -> Self {
        LocalVectorFile {
            party: v.party,
            components: v.components.clone(),
        }
    }

    fn to_vector(&self) -> LocalVector {
        LocalVector::new(self.party, self.components.clone())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FramePairFile {
    pub e0: LocalVectorFile,
    pub e1: LocalVectorFile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartySettingsFile {
    pub party: usize,
    pub a_table: [Complex64; 2],
    pub b_table: [Complex64; 2],
    pub bbar_table: [Complex64; 2],
    pub a: LocalVectorFile,
    pub b: LocalVectorFile,
    pub bbar: LocalVectorFile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioFile {
    Bell {
        gamma: f64,
        lambda: f64,
        theta: f64,
        q: f64,
        r: Complex64,
    },
    Hardy {
        y: f64,
        z: Complex64,
        extra_party: usize,
        e: Complex64,
        f: Complex64,
        spectators: usize,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagnosticsFile {
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

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SettingsFile {
    pub dims: Vec<usize>,
    pub pivot: u32,
    pub degree: usize,
    pub scenario: ScenarioFile,
    pub frames: Vec<FramePairFile>,
    pub parties: Vec<PartySettingsFile>,
    pub predicted_value: Option<f64>,
    pub diagnostics: DiagnosticsFile,
}

impl SettingsFile {
    pub fn from_settings(s: &MeasurementSettings) -> Self {
        let scenario = match &s.scenario {
            Scenario::Bell {
                gamma,
                lambda,
                theta,
                q,
                r,
            } => ScenarioFile::Bell {
                gamma: *gamma,
                lambda: *lambda,
                theta: *theta,
                q: *q,
                r: *r,
            },
            Scenario::Hardy {
                y,
                z,
                extra_party,
                e,
                f,
                spectators,
            } => ScenarioFile::Hardy {
                y: *y,
                z: *z,
                extra_party: *extra_party,
                e: *e,
                f: *f,
                spectators: *spectators,
            },
        };
        SettingsFile {
            dims: s.dims.clone(),
            pivot: s.pivot.0,
            degree: s.degree,
            scenario,
            frames: s
                .frames
                .iter()
                .map(|p| FramePairFile {
                    e0: LocalVectorFile::from_vector(&p.e0),
                    e1: LocalVectorFile::from_vector(&p.e1),
                })
                .collect(),
            parties: s
                .parties
                .iter()
                .map(|p| PartySettingsFile {
                    party: p.party,
                    a_table: p.a_table,
                    b_table: p.b_table,
                    bbar_table: p.bbar_table,
                    a: LocalVectorFile::from_vector(&p.a),
                    b: LocalVectorFile::from_vector(&p.b),
                    bbar: LocalVectorFile::from_vector(&p.bbar),
                })
                .collect(),
            predicted_value: s.predicted_value,
            diagnostics: DiagnosticsFile {
                y_tried: s.diagnostics.y_tried,
                roots_total: s.diagnostics.roots_total,
                admissible_roots: s.diagnostics.admissible_roots.clone(),
                root_method: s.diagnostics.root_method.clone(),
                poly_degree: s.diagnostics.poly_degree,
                gamma_halvings: s.diagnostics.gamma_halvings,
                repair_x: s.diagnostics.repair_x,
                repair_halvings: s.diagnostics.repair_halvings,
                degeneracy: s.diagnostics.degeneracy.clone(),
                extra_candidates: s.diagnostics.extra_candidates.clone(),
            },
        }
    }

    /// Rebuild and validate runnable settings.
    pub fn to_settings(&self) -> Result<MeasurementSettings> {
        let scenario = match &self.scenario {
            ScenarioFile::Bell {
                gamma,
                lambda,
                theta,
                q,
                r,
            } => Scenario::Bell {
                gamma: *gamma,
                lambda: *lambda,
                theta: *theta,
                q: *q,
                r: *r,
            },
            ScenarioFile::Hardy {
                y,
                z,
                extra_party,
                e,
                f,
                spectators,
            } => Scenario::Hardy {
                y: *y,
                z: *z,
                extra_party: *extra_party,
                e: *e,
                f: *f,
                spectators: *spectators,
            },
        };
        let settings = MeasurementSettings {
            dims: self.dims.clone(),
            pivot: SubsetMask(self.pivot),
            degree: self.degree,
            scenario,
            parties: self
                .parties
                .iter()
                .map(|p| PartySettings {
                    party: p.party,
                    a_table: p.a_table,
                    b_table: p.b_table,
                    bbar_table: p.bbar_table,
                    a: p.a.to_vector(),
                    b: p.b.to_vector(),
                    bbar: p.bbar.to_vector(),
                })
                .collect(),
            frames: self
                .frames
                .iter()
                .map(|p| FramePair {
                    e0: p.e0.to_vector(),
                    e1: p.e1.to_vector(),
                })
                .collect(),
            predicted_value: self.predicted_value,
            diagnostics: SynthesisDiagnostics {
                y_tried: self.diagnostics.y_tried,
                roots_total: self.diagnostics.roots_total,
                admissible_roots: self.diagnostics.admissible_roots.clone(),
                root_method: self.diagnostics.root_method.clone(),
                poly_degree: self.diagnostics.poly_degree,
                gamma_halvings: self.diagnostics.gamma_halvings,
                repair_x: self.diagnostics.repair_x,
                repair_halvings: self.diagnostics.repair_halvings,
                degeneracy: self.diagnostics.degeneracy.clone(),
                extra_candidates: self.diagnostics.extra_candidates.clone(),
            },
        };
        settings.validate()?;
        Ok(settings)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeakAssignmentFile {
    pub first_to_one: bool,
    pub second_to_one: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PolicyFile {
    /// Keys are decimal party numbers.
    pub assignments: BTreeMap<String, LeakAssignmentFile>,
}

impl PolicyFile {
    pub fn from_policy(p: &LeakagePolicy) -> Self {
        PolicyFile {
            assignments: p
                .assignments
                .iter()
                .map(|(k, a)| {
                    (
                        k.to_string(),
                        LeakAssignmentFile {
                            first_to_one: a.first_to_one,
                            second_to_one: a.second_to_one,
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn to_policy(&self) -> Result<LeakagePolicy> {
        let mut policy = LeakagePolicy::default();
        for (k, a) in &self.assignments {
            let party: usize = k.parse().map_err(|_| {
                crate::error::Error::InvalidSettings(format!(
                    "policy key {k:?} is not a party number"
                ))
            })?;
            policy.assignments.insert(
                party,
                LeakAssignment {
                    first_to_one: a.first_to_one,
                    second_to_one: a.second_to_one,
                },
            );
        }
        Ok(policy)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlagsFile {
    pub tolerance: f64,
    pub first_positive: bool,
    pub crosses_vanish: bool,
    pub complement_vanishes: bool,
    pub paradox: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeakageFile {
    pub policy: PolicyFile,
    pub per_party: Vec<f64>,
    pub subspace_value: f64,
    pub first_gain: f64,
    pub second_complement_gain: f64,
    pub cross_gain: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportFile {
    pub value: f64,
    pub first_all: f64,
    pub second_complement_all: f64,
    pub crosses: Vec<f64>,
    pub leakage: LeakageFile,
    pub classical_bound: f64,
    pub predicted_value: Option<f64>,
    pub scenario: String,
    pub flags: FlagsFile,
}

impl ReportFile {
    pub fn from_report(r: &HardyReport, flags_tolerance: f64) -> Self {
        let flags = hardy_flags(r, flags_tolerance);
        ReportFile {
            value: r.value,
            first_all: r.first_all,
            second_complement_all: r.second_complement_all,
            crosses: r.crosses.clone(),
            leakage: LeakageFile {
                policy: PolicyFile::from_policy(&r.leakage.policy),
                per_party: r.leakage.per_party.clone(),
                subspace_value: r.leakage.subspace_value,
                first_gain: r.leakage.first_gain,
                second_complement_gain: r.leakage.second_complement_gain,
                cross_gain: r.leakage.cross_gain.clone(),
            },
            classical_bound: r.classical_bound,
            predicted_value: r.predicted_value,
            scenario: r.scenario.clone(),
            flags: FlagsFile {
                tolerance: flags_tolerance,
                first_positive: flags.first_positive,
                crosses_vanish: flags.crosses_vanish,
                complement_vanishes: flags.complement_vanishes,
                paradox: flags.paradox,
            },
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

/// Serialize through `Value` so object keys come out sorted.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

/// Canonical digest with the named top-level fields removed first, so
/// volatile metadata does not perturb the hash.
pub fn digest_without<T: Serialize>(value: &T, strip: &[&str]) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    if let Some(obj) = v.as_object_mut() {
        for key in strip {
            obj.remove(*key);
        }
    }
    Ok(sha256_hex(serde_json::to_string(&v)?.as_bytes()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(fs::write(path, text)?)
}

pub fn load_state(path: &Path) -> Result<PureState> {
    read_json::<StateFile>(path)?.to_state()
}

pub fn save_state(path: &Path, state: &PureState) -> Result<()> {
    write_json(path, &StateFile::from_state(state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{AlignedFrame, FrameOptions};
    use crate::optimizer::{self, OptimizerConfig};
    use crate::settings::{synthesize, SynthesisOptions};
    use crate::state::SubsetMask;

    #[test]
    fn state_roundtrip_is_exact() {
        let state = PureState::haar_random(vec![2, 3], 11).unwrap();
        let text = serde_json::to_string(&StateFile::from_state(&state)).unwrap();
        let back: StateFile = serde_json::from_str(&text).unwrap();
        let rebuilt = back.to_state().unwrap();
        assert_eq!(rebuilt.dims(), state.dims());
        assert_eq!(rebuilt.amps(), state.amps());
    }

    #[test]
    fn settings_roundtrip_preserves_everything_relevant() {
        let t = 1.0 / 3f64.sqrt();
        let state = PureState::from_mask_terms(
            3,
            &[
                (SubsetMask(0b110), Complex64::new(t, 0.0)),
                (SubsetMask(0b101), Complex64::new(t, 0.0)),
                (SubsetMask(0b011), Complex64::new(t, 0.0)),
            ],
        )
        .unwrap();
        let cp = optimizer::closest_product(&state, &OptimizerConfig::default()).unwrap();
        let frame = AlignedFrame::build(&state, &cp.pv, &FrameOptions::default()).unwrap();
        let settings = synthesize(&state, &frame, &SynthesisOptions::default()).unwrap();
        let text = serde_json::to_string(&SettingsFile::from_settings(&settings)).unwrap();
        let back: SettingsFile = serde_json::from_str(&text).unwrap();
        let rebuilt = back.to_settings().unwrap();
        assert_eq!(rebuilt.dims, settings.dims);
        assert_eq!(rebuilt.pivot, settings.pivot);
        assert_eq!(rebuilt.predicted_value, settings.predicted_value);
        for (a, b) in rebuilt.parties.iter().zip(&settings.parties) {
            assert_eq!(a.a_table, b.a_table);
            assert_eq!(a.b_table, b.b_table);
            assert_eq!(a.bbar_table, b.bbar_table);
            assert_eq!(a.a.components, b.a.components);
        }
        let policy = LeakagePolicy::default();
        let before = crate::evaluator::quantum_value(&state, &settings, &policy)
            .unwrap()
            .value;
        let after = crate::evaluator::quantum_value(&state, &rebuilt, &policy)
            .unwrap()
            .value;
        assert_eq!(before, after);
    }

    #[test]
    fn canonical_json_sorts_keys() {
        let a: serde_json::Value = serde_json::from_str(r#"{"b": 1, "a": {"y": 2, "x": 3}}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"a": {"x": 3, "y": 2}, "b": 1}"#).unwrap();
        assert_eq!(canonical_json(&a).unwrap(), canonical_json(&b).unwrap());
    }

    #[test]
    fn digest_ignores_stripped_fields() {
        let a: serde_json::Value =
            serde_json::from_str(r#"{"payload": [1, 2], "timestamp": "now"}"#).unwrap();
        let b: serde_json::Value =
            serde_json::from_str(r#"{"payload": [1, 2], "timestamp": "later"}"#).unwrap();
        assert_eq!(
            digest_without(&a, &["timestamp"]).unwrap(),
            digest_without(&b, &["timestamp"]).unwrap()
        );
        assert_ne!(
            digest_without(&a, &[]).unwrap(),
            digest_without(&b, &[]).unwrap()
        );
    }

    #[test]
    fn policy_roundtrip() {
        let mut policy = LeakagePolicy::default();
        policy.assignments.insert(
            2,
            LeakAssignment {
                first_to_one: true,
                second_to_one: false,
            },
        );
        let file = PolicyFile::from_policy(&policy);
        let text = serde_json::to_string(&file).unwrap();
        let back: PolicyFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_policy().unwrap(), policy);
    }

    #[test]
    fn file_helpers_roundtrip_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        let state = PureState::haar_random(vec![2, 2, 2], 3).unwrap();
        save_state(&path, &state).unwrap();
        let back = load_state(&path).unwrap();
        assert_eq!(back.amps(), state.amps());
    }
}
