//! Shared fixtures for unit tests.

use crate::device::DeviceParams;

/// The reference device used throughout the tests: Tables of device and
/// coupling parameters with the flux map calibrated on the first and last
/// operating points.
pub fn paper_device() -> DeviceParams {
    crate::config::reference_device()
}
