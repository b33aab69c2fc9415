//! Fixpoint iteration for (eventually) contractive maps on user-supplied
//! metric carriers, together with four application packages built on it:
//! coinductive streams, finite Markov-chain analysis, finite Markov decision
//! processes, and a computable dyadic pseudometric on finite non-well-founded
//! sets represented as accessible pointed graphs.

pub mod fixpoint;
pub mod linalg;
pub mod markov;
pub mod mdp;
pub mod nwf;
pub mod streams;

pub use fixpoint::{
    cauchy_bound, check_coinduction_step, contraction_diagnostic, iterate_to_fixpoint,
    ContractionDiagnostic, ContractiveSystem, FixpointError, FixpointResult, PreservationReport,
};
pub use markov::{
    first_return_probabilities, is_aperiodic, is_irreducible, recurrence_report,
    shifted_map_apply, spectral_gap_estimate, stationary_distribution, validate_chain, MarkovError,
    RecurrenceStats, StationaryResult, StochasticChain,
};
pub use mdp::{
    bellman_opt, bellman_policy, brute_force_optimal, derandomize, greedy_policy, h_eval,
    optimal_value, policy_value, prob_policy_apply, prob_policy_value, Mdp, MdpError, Policy,
    ProbPolicy, ValueFn,
};
pub use nwf::{
    approx_equiv, approximant, bisimilar, canonical_F, distance, empty, numeral, omega,
    pseudometric_axioms_report, quotient, s_level, tau_iterate, validate_apg, Apg, AxiomsReport,
    DyadicDistance, NwfError, RankedSet, TauTable,
};
pub use streams::{merge, split, stream_distance, Prefix, Stream, StreamDistance};
