//! Nested Markov models over acyclic directed mixed graphs.
//!
//! The pieces, bottom up:
//!
//! - [`graph`]: ADMG/CADMG values and the structural algorithms around
//!   them: districts, fixing, reachable and intrinsic sets, recursive
//!   heads/tails, m-separation, latent projection.
//! - [`params`]: the binary Moebius parameterization, mapping parameter
//!   tables to joint distributions and back through kernel fixing, plus
//!   numeric checks of the nested factorization.
//! - [`fit`]: maximum-likelihood fitting by blockwise coordinate ascent
//!   over the per-vertex affine restrictions of the parameterization.
//! - [`search`]: BIC-scored structure learning with tabu and plateau
//!   handling.
//! - [`sim`]: latent-DAG data generators and structure-recovery
//!   experiments.
//! - [`equiv`]: the exhaustive four-vertex census of parameter counts
//!   and conjectured equivalence classes.

pub mod equiv;
pub mod fit;
pub mod graph;
pub mod params;
pub mod search;
pub mod sim;
mod vset;

pub use equiv::{census, enumerate_admgs, ordinary_param_count, Census, CensusError};
pub use fit::{bic, empirical_loglik, loglik, q_fit, Dataset, FitConfig, FitError, FitResult};
pub use graph::{
    head_partition, intrinsic_catalog, latent_projection, m_separated, Admg, CatalogEntry,
    GraphError, IntrinsicCatalog, Reachable,
};
pub use search::{neighbors, score_graph, tabu_search, Move, SearchConfig, SearchReport};
pub use sim::{
    build_chain5, build_verma4, random_parameters, recovery_experiment, FaithfulnessConfig,
    LatentDagModel, SimError, SimModel,
};
pub use params::{
    verify_nested_factorization, verma_residual, FactorizationReport, KernelTable, MoebiusCache,
    ParamError, Parameterization, ThetaTable,
};
pub use vset::{VSet, Vertex, MAX_VERTICES};
