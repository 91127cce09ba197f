//! One interface over the four classifier families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::{classify_hmm, train_hmm_classifier, BaumWelch, HmmClassifier};
use crate::nn::{train_labeled, LstmConfig, LstmModel, Network, TcnConfig, TcnModel, TrainConfig};
use crate::preprocess::FeatureMatrix;
use crate::svm::{flatten, predict_svm, train_svm, SvmModel, SvmParams};
use crate::trial::{item_class, item_index, ComplianceClass, FOOD_ITEMS, NUM_CLASSES};

/// What a classifier is asked to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// The four compliance classes.
    #[default]
    Class,
    /// The twelve food items.
    Item,
}

impl Target {
    pub fn num_labels(self) -> usize {
        match self {
            Target::Class => NUM_CLASSES,
            Target::Item => FOOD_ITEMS.len(),
        }
    }

    pub fn label_of(self, fm: &FeatureMatrix) -> Result<usize> {
        match self {
            Target::Class => fm
                .label
                .map(ComplianceClass::index)
                .ok_or_else(|| Error::InvalidParameter("feature matrix without class label".into())),
            Target::Item => item_index(
                fm.item
                    .as_deref()
                    .ok_or_else(|| Error::InvalidParameter("feature matrix without item label".into()))?,
            ),
        }
    }

    /// Compliance class of a label index.
    pub fn class_of(self, label: usize) -> ComplianceClass {
        match self {
            Target::Class => ComplianceClass::ALL[label],
            Target::Item => item_class(FOOD_ITEMS[label].0).expect("table item"),
        }
    }
}

/// Trains a predictor from normalized, labeled feature matrices.
pub trait Learner: Sync {
    fn id(&self) -> String;
    fn fit(&self, train: &[FeatureMatrix], target: Target) -> Result<Box<dyn Predictor>>;
}

pub trait Predictor: Send + Sync {
    /// Predicted label index under the target the predictor was fit with.
    fn predict(&self, fm: &FeatureMatrix) -> Result<usize>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcnSpec {
    pub widths: Vec<usize>,
    pub kernel: usize,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmSpec {
    pub hidden: usize,
    pub layers: usize,
    pub per_step_loss: bool,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Hmm(BaumWelch),
    Svm(SvmParams),
    Tcn(TcnSpec),
    Lstm(LstmSpec),
}

impl ClassifierSpec {
    /// Default hyperparameters for `hmm`, `svm`, `tcn` or `lstm`.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.trim().to_ascii_lowercase().as_str() {
            "hmm" => ClassifierSpec::Hmm(BaumWelch::default()),
            "svm" => ClassifierSpec::Svm(SvmParams::default()),
            "tcn" => ClassifierSpec::Tcn(TcnSpec {
                widths: vec![32; 4],
                kernel: 5,
                train: TrainConfig::default(),
            }),
            "lstm" => ClassifierSpec::Lstm(LstmSpec {
                hidden: 50,
                layers: 2,
                per_step_loss: false,
                train: TrainConfig::default(),
            }),
            other => return Err(Error::InvalidParameter(format!("unknown classifier '{other}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Hmm(_) => "hmm",
            ClassifierSpec::Svm(_) => "svm",
            ClassifierSpec::Tcn(_) => "tcn",
            ClassifierSpec::Lstm(_) => "lstm",
        }
    }

    /// Sets every random seed the classifier uses. The HMM is deterministic.
    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ClassifierSpec::Hmm(_) => {}
            ClassifierSpec::Svm(p) => p.seed = seed,
            ClassifierSpec::Tcn(s) => s.train.seed = seed,
            ClassifierSpec::Lstm(s) => s.train.seed = seed,
        }
    }

    pub fn train_config_mut(&mut self) -> Option<&mut TrainConfig> {
        match self {
            ClassifierSpec::Tcn(s) => Some(&mut s.train),
            ClassifierSpec::Lstm(s) => Some(&mut s.train),
            _ => None,
        }
    }

    pub fn train(&self, data: &[FeatureMatrix], target: Target) -> Result<TrainedClassifier> {
        Ok(self.train_logged(data, target)?.0)
    }

    /// [`train`](Self::train) that also returns the per-epoch mean training
    /// loss of the networks (empty for HMM and SVM).
    pub fn train_logged(&self, data: &[FeatureMatrix], target: Target) -> Result<(TrainedClassifier, Vec<f64>)> {
        let first = data.first().ok_or(Error::EmptyTrainingSet)?;
        let labels = data
            .iter()
            .map(|fm| target.label_of(fm))
            .collect::<Result<Vec<_>>>()?;
        let class_only = |name: &str| {
            Error::InvalidParameter(format!("{name} supports only the compliance-class target"))
        };
        let model = match self {
            ClassifierSpec::Hmm(bw) => {
                if target != Target::Class {
                    return Err(class_only("hmm"));
                }
                (TrainedClassifier::Hmm(train_hmm_classifier(data, bw)?), Vec::new())
            }
            ClassifierSpec::Svm(p) => {
                if target != Target::Class {
                    return Err(class_only("svm"));
                }
                let xs: Vec<Vec<f64>> = data.iter().map(flatten).collect();
                let ys: Vec<ComplianceClass> = labels.iter().map(|&l| ComplianceClass::ALL[l]).collect();
                let mut fit = train_svm(&xs, &ys, p)?.model;
                fit.channel_names = first.channel_names.clone();
                (TrainedClassifier::Svm(fit), Vec::new())
            }
            ClassifierSpec::Tcn(s) => {
                let cfg = TcnConfig {
                    input_channels: first.cols(),
                    seq_len: first.rows,
                    widths: s.widths.clone(),
                    kernel: s.kernel,
                    num_classes: target.num_labels(),
                };
                let model = TcnModel::new(cfg, s.train.seed)?;
                let out = train_labeled(model, data, &labels, &s.train)?;
                (TrainedClassifier::Tcn(out.model), out.loss_curve)
            }
            ClassifierSpec::Lstm(s) => {
                let cfg = LstmConfig {
                    input_channels: first.cols(),
                    hidden: s.hidden,
                    layers: s.layers,
                    num_classes: target.num_labels(),
                    per_step_loss: s.per_step_loss,
                };
                let model = LstmModel::new(cfg, s.train.seed)?;
                let out = train_labeled(model, data, &labels, &s.train)?;
                (TrainedClassifier::Lstm(out.model), out.loss_curve)
            }
        };
        Ok(model)
    }
}

impl Learner for ClassifierSpec {
    fn id(&self) -> String {
        self.name().to_string()
    }

    fn fit(&self, train: &[FeatureMatrix], target: Target) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(self.train(train, target)?))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum TrainedClassifier {
    Hmm(HmmClassifier),
    Svm(SvmModel),
    Tcn(TcnModel),
    Lstm(LstmModel),
}

impl Predictor for TrainedClassifier {
    fn predict(&self, fm: &FeatureMatrix) -> Result<usize> {
        match self {
            TrainedClassifier::Hmm(m) => Ok(classify_hmm(m, fm)?.0.index()),
            TrainedClassifier::Svm(m) => Ok(predict_svm(m, &flatten(fm))?.0.index()),
            TrainedClassifier::Tcn(m) => m.predict(fm),
            TrainedClassifier::Lstm(m) => m.predict(fm),
        }
    }
}
