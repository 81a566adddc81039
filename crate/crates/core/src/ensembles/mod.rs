//! Localised global models: clustered ensembles over a range of cluster
//! counts or seeds, one-clustering variants, the ensemble of specialists, seed
//! ensembles, and equal-weight combinations with local models.

mod clustered;
mod gfm;
mod matrix;
mod specialists;
mod variants;

pub use clustered::{
    elbow_k, feature_rows, model_seed, run_cluster_number, run_cluster_oc, run_cluster_seed,
    run_partitions, ClusterInputs, ClusteredRun,
};
pub use gfm::{GfmConfig, GfmContext, LearnerSpec, Panel};
pub use matrix::{combine_forecasts, ForecastMatrix, RowOrigin};
pub use specialists::{
    reassign_series, run_specialists, specialists_loop, FinalRound, GfmSpecialists,
    SpecialistBackend, SpecialistOutcome, SpecialistSettings, SpecialistState, SpecialistsRun,
};
pub use variants::{
    run_local, run_seed_ensemble, run_variant, EnsembleConfig, RunInfo, Variant, VariantRun,
};
