//! Trained model files (`tng-model/1`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::DetectionController;
use crate::error::{Result, TngError};
use crate::imitation::RegressionController;
use crate::scalar::Scalar;
use crate::tng::{Controller, TrajectoryClassifier};

pub const MODEL_FORMAT: &str = "tng-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "kind", rename_all = "kebab-case")]
pub enum Model<T> {
    Regression(RegressionController<T>),
    Detection(DetectionController<T>),
    Classifier(TrajectoryClassifier<T>),
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ModelFile<T> {
    format: String,
    #[serde(flatten)]
    model: Model<T>,
}

impl<T: Scalar> Model<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Regression(_) => "regression",
            Model::Detection(_) => "detection",
            Model::Classifier(_) => "classifier",
        }
    }

    pub fn featurizer_hash(&self) -> &str {
        match self {
            Model::Regression(c) => &c.featurizer_hash,
            Model::Detection(c) => &c.detector.featurizer_hash,
            Model::Classifier(c) => &c.featurizer_hash,
        }
    }

    /// The model as a navigation controller; classifiers have none.
    pub fn controller(self) -> Option<Controller<T>> {
        match self {
            Model::Regression(c) => Some(Controller::Regression(c)),
            Model::Detection(c) => Some(Controller::Detection(c)),
            Model::Classifier(_) => None,
        }
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            model: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| TngError::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        match v.get("format").and_then(|f| f.as_str()) {
            Some(MODEL_FORMAT) => {}
            other => {
                return Err(TngError::Parse {
                    location: "field `format`".into(),
                    message: format!("expected \"{MODEL_FORMAT}\", found {other:?}"),
                })
            }
        }
        let file: ModelFile<T> = serde_json::from_value(v).map_err(|e| TngError::Parse {
            location: "model body".into(),
            message: e.to_string(),
        })?;
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()).map_err(|e| TngError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| TngError::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imitation::ridge::LinearParams;
    use crate::imitation::Head;
    use crate::linalg::Matrix;

    #[test]
    fn regression_round_trip() {
        let c = RegressionController {
            head: Head::Linear(LinearParams {
                weights: Matrix::from_rows(&[vec![0.5, -1.0], vec![0.25, 2.0]]).unwrap(),
                bias: vec![0.1, 0.0],
            }),
            ridge_lambda: 0.01,
            featurizer_hash: "abc".into(),
            loss_trace: Vec::new(),
        };
        let m = Model::Regression(c);
        let text = m.to_json();
        assert!(text.contains("\"format\": \"tng-model/1\""));
        assert!(text.contains("\"kind\": \"regression\""));
        assert_eq!(Model::<f64>::from_json(&text).unwrap(), m);
        assert_eq!(m.featurizer_hash(), "abc");
    }

    #[test]
    fn wrong_format_rejected() {
        assert!(
            Model::<f64>::from_json("{\"format\":\"tng-model/2\",\"kind\":\"regression\"}")
                .is_err()
        );
        assert!(Model::<f64>::from_json("not json").is_err());
    }
}
