//! Blind one-bit compressed sensing with dictionary learning.
//!
//! Signals sparse in an unknown domain are observed only through the
//! signs of noisy linear measurements. The dictionary D = A*Phi is
//! learned by alternating BIHT sparse recovery with a sigmoid-smoothed
//! steepest-descent update of each dictionary row (DL-BIHT-L1 and
//! DL-BIHT-L2). The `harness` module reproduces the convergence and
//! NMSE experiments behind the library.

pub mod biht;
pub mod dictlearn;
pub mod error;
pub mod harness;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod rng;

pub use biht::{biht_recover, hard_threshold, BihtConfig, BihtResult};
pub use dictlearn::{
    cost_l1, cost_l2, dict_update, learn, recover_phi, reconstruct_signals, update_row,
    Dictionary, LearnConfig, LearnState,
};
pub use error::{Error, Result};
pub use harness::{
    run_convergence, run_sweep, run_trial, ExperimentConfig, SweepParameter, SweepSpec,
    VariantSelection,
};
pub use kernels::IndicatorVariant;
pub use metrics::{average_nmse, nmse, sign_consistency, TrialResult};
pub use model::{
    gen_gaussian_matrix, gen_sparse_codes, sign_scalar, synthesize, ModelInstance,
    SignMeasurements, SparseCodes,
};
pub use rng::RngStream;
