//! Bag-of-words features, an in-house logistic regression, and the corpus
//! level classifier and forecaster built on them.

mod classifier;
mod forecaster;
mod linear;
mod persist;
mod vocab;

pub use classifier::{Classifier, PREDICTION_KEY, PREDICTION_SCORE_KEY};
pub use forecaster::{Forecaster, FORECAST_FINAL_KEY, FORECAST_KEY};
pub use linear::{loss_and_gradient, predict, train_classifier, LinearConfig, LinearModel};
pub use persist::{load_model, save_model, ModelFile, MODEL_FORMAT_VERSION};
pub use vocab::{
    documents, fit_vocabulary, vectorize, Document, Level, ObjectRef, SparseVector, VocabConfig,
    Vocabulary,
};
