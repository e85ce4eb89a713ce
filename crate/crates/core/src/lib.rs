//! Age of information for status updates whose processing is split across a
//! master/worker computation unit with straggling workers.
//!
//! * [`stats`]: shifted exponentials and their order statistics
//! * [`schemes`]: uncoded, repetition, MDS and multi-message MDS service times
//! * [`levels`]: level split for multi-message MDS
//! * [`age`]: closed-form average age
//! * [`optimizer`]: age-optimal code parameters
//! * [`simulator`]: Monte Carlo validation
//! * [`sweep`]: parameter sweeps and CSV output

pub mod age;
pub mod error;
pub mod levels;
pub mod optimizer;
pub mod rng;
pub mod schemes;
pub mod simulator;
pub mod stats;
pub mod sweep;

pub use age::{age, age_from_moments, AgeResult};
pub use error::{Error, Result};
pub use levels::{level_counts, solve_levels, LevelSplit};
pub use optimizer::{lambert_w_m1, Family, OptResult};
pub use rng::RandomStream;
pub use schemes::{service_moments, Scheme, ServiceMoments, SystemParams};
pub use simulator::{Mode, Policy, SimConfig, SimReport};
pub use stats::{OrderIndex, ShiftedExp};
