//! Bounds and approximations for the entropy and mutual information of
//! finite-alphabet Gaussian mixtures `z = H·d + n`, built on sphere-decoding
//! tree searches.
pub mod baselines;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod logspace;
pub mod model;
pub mod rng;
pub mod sdea;
pub mod search;

pub use error::{Error, Result};
pub use estimators::{
    gaussian_bound, mc_entropy, rho_c, seb, true_entropy_oracle, Approximation, EntropyEstimate, LogDensityTriple,
    MonteCarlo, SampleMean,
};
pub use model::{ChannelInstance, Constellation, ConstellationKind, InputVector, Ordering};
pub use search::{CandidateSet, DepthFirst, KBest, SearchMode, SearchSpec, TreeSearch};
