//! Multiplex network diffusion: multigraphs, multiplexity measures, correlated
//! transmission, threshold SIS contagion (simulated and mean-field), diffusion
//! centrality, layer statistics and penalized regression.

pub mod centrality;
pub mod config;
pub mod contagion;
pub mod error;
pub mod graph;
pub mod meanfield;
pub mod multiplexity;
pub mod regress;
pub mod stats;
pub mod transmission;
pub mod util;
pub mod villages;

pub use config::Config;
pub use contagion::{
    build_comparison_pair, run_grid, simulate, ComparisonPair, ContagionNetwork, GridOutcome,
    GridSpec, PairedRun, SimConfig, SimResult,
};
pub use error::{Error, Result};
pub use graph::{Aggregation, EdgeList, EdgeRecord, LayerGraph, LayerSet, MultiGraph, WeightedLayer};
pub use multiplexity::{
    multiplexing_score, profile, profile_distribution, total_multiplexity_index, DominanceMove,
    Profile, ProfileDistribution,
};
pub use transmission::{JointPair, TransmissionModel};
pub use util::{derive_seed, stream, SimRng};
pub use meanfield::{
    individual_infection_prob_exact, infection_prob_profile, solve_steady_state,
    steady_state_profile, verify_complex_individual, verify_simple_individual,
    verify_sis_ordering, ComplexBranch, PropositionReport, SteadyState,
};
pub use centrality::{diameter, diffusion_centrality, seed_set_dc, spectral_radius, CentralityVector};
pub use stats::{backbone, layer_correlation, layer_stats, pca_dyads, Backbone, DyadMatrix, LayerStats, PcaResult};
