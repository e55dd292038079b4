//! Joint training of the DNA generator and provenance classifier, and
//! provenance prediction at fragment and DNA-set level.

mod config;
mod eval;
mod losses;
mod model;
mod train;

pub use config::{validate_delta, GeneratorConfig, LossReduction, LossWeights, MgmpConfig, OutputKind};
pub use eval::{
    accuracy_from_counts, delta_sweep, evaluate, evaluate_scores, DeltaSweepRow, EvalReport, ModelEvaluation,
    ProvenanceVerdict, ScoredModel,
};
pub use losses::{
    l2_norm, loss_bce, loss_bce_grad, loss_intra, loss_intra_grad, loss_similarity, loss_similarity_grad, loss_total,
    FragmentLoss, BCE_EPS,
};
pub use model::{model_outputs, EpochLog, MgmpModel, FRAGMENT_THRESHOLD, MGMP_FORMAT_VERSION};
pub use train::{init_networks, mgmp_objective, train_mgmp, ObjectiveGrad, ObjectiveParts, TrainingBatch};
