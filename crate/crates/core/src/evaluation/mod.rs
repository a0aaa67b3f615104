//! Nearest-neighbor recall and softmax strip classification.

mod classifier;
mod report;
mod retrieval;

pub use classifier::{
    cross_entropy, cross_entropy_grad, per_category_accuracy, train_classifier, ClassifierConfig, SoftmaxClassifier,
};
pub use report::{write_accuracy_csv, write_recall_csv};
pub use retrieval::{nn_accuracy, nn_retrieve, recall_curve, LabeledVector, Metric, Neighbor, RecallCurve};
