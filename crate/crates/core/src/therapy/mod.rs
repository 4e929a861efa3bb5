//! Rule-generated therapy dataset, one-vs-rest polynomial SVM recommender and
//! difficulty levels.

mod rules;
mod svm;

pub use rules::{generate_rule_dataset, RuleDataset, RuleDatasetRow};
pub use svm::{smo_train, BinarySvm, PolyKernel, SmoParams, SmoSolution};

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assessment::StutterProfile;

#[derive(Debug, Error)]
pub enum TherapyError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("SMO did not converge after {iterations} updates (KKT gap {gap:.3e})")]
    NoConvergence { iterations: usize, gap: f64 },
    #[error("recommender has no classifier for {0:?}")]
    NotTrained(String),
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("bad format: {0}")]
    Format(String),
    #[error("I/O failure: {0}")]
    Io(String),
}

/// Severity dimension that drives a therapy's rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Driver {
    Prolongation,
    Repetition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Therapy {
    pub name: String,
    pub driver: Driver,
    /// Suggested when `driver level − improvement level ≥ min_gap`.
    pub min_gap: i8,
}

impl Therapy {
    pub fn rule_label(&self, profile: &StutterProfile) -> bool {
        let driver = match self.driver {
            Driver::Prolongation => profile.prolongation,
            Driver::Repetition => profile.repetition,
        };
        driver.level() as i8 - profile.improvement.level() as i8 >= self.min_gap
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TherapyCatalog {
    pub therapies: Vec<Therapy>,
}

impl Default for TherapyCatalog {
    fn default() -> Self {
        Self {
            therapies: vec![
                Therapy {
                    name: "Therapy 1".into(),
                    driver: Driver::Prolongation,
                    min_gap: 2,
                },
                Therapy {
                    name: "Therapy 2".into(),
                    driver: Driver::Repetition,
                    min_gap: 2,
                },
            ],
        }
    }
}

impl TherapyCatalog {
    pub fn new(therapies: Vec<Therapy>) -> Result<Self, TherapyError> {
        let catalog = Self { therapies };
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn validate(&self) -> Result<(), TherapyError> {
        if self.therapies.is_empty() {
            return Err(TherapyError::InvalidCatalog(
                "catalog has no therapies".into(),
            ));
        }
        let mut seen = HashSet::new();
        for t in &self.therapies {
            if !seen.insert(t.name.as_str()) {
                return Err(TherapyError::InvalidCatalog(format!(
                    "duplicate therapy {:?}",
                    t.name
                )));
            }
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.therapies.iter().map(|t| t.name.clone()).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TherapyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| TherapyError::Io(format!("{}: {e}", path.display())))?;
        let catalog: Self =
            serde_json::from_str(&text).map_err(|e| TherapyError::Format(e.to_string()))?;
        catalog.validate()?;
        Ok(catalog)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Easy,
    Medium,
    Hard,
}

impl Level {
    /// Hard for low severity with strong improvement, easy for high severity
    /// with weak improvement, medium otherwise.
    pub fn for_profile(profile: &StutterProfile) -> Level {
        let severity = profile.prolongation.level().max(profile.repetition.level());
        let improvement = profile.improvement.level();
        if improvement >= 3 && severity <= 2 {
            Level::Hard
        } else if severity >= 3 && improvement <= 2 {
            Level::Easy
        } else {
            Level::Medium
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedTherapy {
    pub therapy: String,
    pub level: Level,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TherapyAssignment {
    pub profile: StutterProfile,
    pub items: Vec<AssignedTherapy>,
}

/// Classifier for one therapy column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TherapyClassifier {
    pub therapy: String,
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub labels: Vec<f64>,
    pub bias: f64,
    /// Set when the training column held one class; that class is always predicted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<bool>,
}

impl TherapyClassifier {
    fn predict(&self, kernel: &PolyKernel, x: &[f64]) -> bool {
        if let Some(c) = self.constant {
            return c;
        }
        let f: f64 = self
            .support_vectors
            .iter()
            .zip(self.alphas.iter().zip(&self.labels))
            .map(|(sv, (a, y))| a * y * kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias;
        f > 0.0
    }
}

/// One-vs-rest recommender: an independent binary SVM per therapy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: PolyKernel,
    #[serde(rename = "C")]
    pub c: f64,
    pub per_therapy: Vec<TherapyClassifier>,
}

impl SvmModel {
    pub fn classifier(&self, therapy: &str) -> Option<&TherapyClassifier> {
        self.per_therapy.iter().find(|c| c.therapy == therapy)
    }

    pub fn predict(&self, therapy: &str, features: &[f64]) -> Result<bool, TherapyError> {
        let clf = self
            .classifier(therapy)
            .ok_or_else(|| TherapyError::NotTrained(therapy.to_string()))?;
        Ok(clf.predict(&self.kernel, features))
    }

    /// Fraction of rows whose prediction matches the column `therapy` of `dataset`.
    pub fn accuracy(&self, dataset: &RuleDataset, therapy: usize) -> Result<f64, TherapyError> {
        let name = &dataset.therapies[therapy];
        let mut correct = 0;
        for row in &dataset.rows {
            if self.predict(name, &row.features())? == row.labels[therapy] {
                correct += 1;
            }
        }
        Ok(correct as f64 / dataset.rows.len().max(1) as f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model is serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, TherapyError> {
        serde_json::from_str(text).map_err(|e| TherapyError::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TherapyError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json())
            .map_err(|e| TherapyError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TherapyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| TherapyError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Trains one classifier per therapy column. A single-class column yields a
/// constant predictor and a warning.
pub fn train_recommender(
    dataset: &RuleDataset,
    kernel: PolyKernel,
    params: SmoParams,
) -> Result<SvmModel, TherapyError> {
    if dataset.rows.is_empty() {
        return Err(TherapyError::InvalidInput("empty dataset".into()));
    }
    let xs = dataset.features();
    let mut per_therapy = Vec::with_capacity(dataset.therapies.len());
    for (t, name) in dataset.therapies.iter().enumerate() {
        let labels = dataset.column(t);
        let clf = match smo_train(&xs, &labels, kernel, params) {
            Ok(sol) => TherapyClassifier {
                therapy: name.clone(),
                support_vectors: sol.svm.support_vectors,
                alphas: sol.svm.alphas,
                labels: sol.svm.labels,
                bias: sol.svm.bias,
                constant: None,
            },
            Err(TherapyError::SingleClass) => {
                log::warn!("therapy {name:?} has a single label; using a constant predictor");
                TherapyClassifier {
                    therapy: name.clone(),
                    support_vectors: Vec::new(),
                    alphas: Vec::new(),
                    labels: Vec::new(),
                    bias: 0.0,
                    constant: Some(labels[0]),
                }
            }
            Err(e) => return Err(e),
        };
        per_therapy.push(clf);
    }
    Ok(SvmModel {
        kernel,
        c: params.c,
        per_therapy,
    })
}

/// Therapies the model suggests for `profile`, each at the profile's level.
pub fn recommend(
    model: &SvmModel,
    profile: &StutterProfile,
    catalog: &TherapyCatalog,
) -> Result<TherapyAssignment, TherapyError> {
    let features = profile.features();
    let level = Level::for_profile(profile);
    let mut items = Vec::new();
    for therapy in &catalog.therapies {
        if model.predict(&therapy.name, &features)? {
            items.push(AssignedTherapy {
                therapy: therapy.name.clone(),
                level,
            });
        }
    }
    Ok(TherapyAssignment {
        profile: *profile,
        items,
    })
}
