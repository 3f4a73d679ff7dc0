//! Closed-form machinery: special functions, kernel powers and the
//! convergence-iteration estimators.

pub mod erf;
pub mod estimators;
pub mod kernel;

pub use erf::{erf, erf_inv, erf_inv_maclaurin, erfc};
pub use estimators::{
    desync_order_conjecture, desync_sigma_trajectory, estimate_desync_cycles, estimate_pco_cycles,
    expected_updates_per_cycle, first_cycle_updates, pco_lower_bound, pco_sigma_trajectory,
    sigma_desync, sigma_pco, target_sigma, EstimateResult, PcoBound, PcoIndexMode, SigmaTrajectory,
    INITIAL_SIGMA, SCAN_CAP,
};
pub use kernel::{circular_convolve, kernel_power_norms, CouplingKernel};

use crate::error::Result;
use crate::params::{Protocol, ProtocolParams};

/// Model estimate for either protocol.
pub fn estimate_cycles(
    protocol: Protocol,
    params: &ProtocolParams,
    mode: PcoIndexMode,
) -> Result<EstimateResult> {
    match protocol {
        Protocol::Desync => estimate_desync_cycles(params),
        Protocol::Pco => estimate_pco_cycles(params, mode),
    }
}
