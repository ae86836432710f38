//! Samplers for corridor-conditioned processes.

pub mod crossing;
pub mod ensemble;
pub mod levels;
pub mod limits;
pub mod rejection;
pub mod schedule;
pub mod smc;

pub use crossing::{log_nocross, log_path_survival, log_step_survival, nocross_prob_step, Side};
pub use ensemble::{Record, WeightedEnsemble};
pub use levels::{sample_boundary_case, sample_corridor_meander_bm, sample_housemoving_bm, LevelEnsemble, LevelSampler, RunSettings, ScheduleRun};
pub use limits::{map_draws, weighted_ensemble, Draw, HouseMovingSampler, InteriorSampler, MeanderSampler, PathSampler, UpperWallSampler, WallBridgeSampler, WallPiece};
pub use rejection::{rejection_corridor_sample, Proposal, RejectionSampler, RejectionStats};
pub use schedule::{Anchor, BoundaryCase, EndAnchor, EpsilonSchedule, MarginRule};
pub use smc::{smc_corridor_sample, SmcOutput};
