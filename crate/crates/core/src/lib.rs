//! Joint transmit-beamformer and fluid-antenna-position optimization for an
//! integrated sensing and communication (ISAC) downlink.
//!
//! The sum rate of `K` single-antenna users is maximized over the beamformers
//! `w_k` and the positions `t` of `M` antennas on a segment `[0, D]`, subject
//! to a transmit power budget, a minimum probing power toward a sensing
//! target, and a minimum antenna spacing.
//!
//! The solver ([`solver::bsum_solve`]) alternates over a weighted-MMSE
//! reformulation:
//!
//! - [`wmmse`]: closed-form receiver and weight updates,
//! - [`pda`]: beamformers by a proximal distance algorithm with closed-form steps,
//! - [`epg`]: positions by extrapolated projected gradient,
//! - [`qcqp`]: the position projection, via a concave minorizer of the probing power.
//!
//! [`baselines`] holds the fixed-array and particle-swarm comparisons.
//!
//! ```
//! use fa_isac::{bsum_solve, presets, BsumOptions};
//!
//! let scenario = presets::two_user(4, 1.0, 1.0);
//! let opts = BsumOptions { max_outer: 5, ..Default::default() };
//! let sol = bsum_solve(&scenario, &opts).unwrap();
//! assert!(sol.feasible);
//! assert!(sol.probing >= 1.0 - 1e-6);
//! ```

pub mod baselines;
pub mod epg;
pub mod error;
pub mod model;
pub mod pda;
pub mod qcqp;
pub mod solver;
pub mod wmmse;

pub use baselines::{fpa_positions, fpa_solve, pso_solve, PsoOptions, PsoReport};
pub use epg::EpgOptions;
pub use error::{Error, Result};
pub use model::{
    beampattern, build_channels, presets, probing_power, sinr, steering_vector, sum_rate, Apv, Beamformers,
    ChannelSet, Scenario, C64,
};
pub use pda::PdaOptions;
pub use solver::{bsum_solve, bsum_solve_at, init_solution, BsumOptions, Solution, TraceEntry};
pub use wmmse::AuxState;
