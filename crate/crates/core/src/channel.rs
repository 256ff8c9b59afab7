//! mmWave V2X channel: LOS path loss, vehicle blocking loss, shadow fading
//! and link-budget checks.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel model coefficients. Defaults are the urban V2X calibration at a
/// 60 GHz carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    /// Path loss constant (dB).
    pub alpha: f64,
    /// Frequency-dependent exponent.
    pub beta: f64,
    /// Distance-dependent exponent.
    pub gamma: f64,
    /// Shadow fading standard deviation (dB).
    pub sigma_sf: f64,
    /// Blocking loss mean offset (dB).
    pub mu_offset: f64,
    /// Blocking loss exponent.
    pub xi: f64,
    /// Blocking loss threshold (dB).
    pub bl_thresh: f64,
    /// Blocking loss standard deviation (dB).
    pub sigma_bl: f64,
    /// Carrier frequency in GHz.
    pub f_mmwave: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            alpha: 38.77,
            beta: 16.7,
            gamma: 18.2,
            sigma_sf: 3.0,
            mu_offset: 9.0,
            xi: 15.0,
            bl_thresh: 41.0,
            sigma_bl: 4.5,
            f_mmwave: 60.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &'static str, reason: &str| {
            Err(Error::InvalidConfig { field, reason: reason.to_string() })
        };
        if !(self.sigma_sf >= 0.0) {
            return fail("sigma_sf", "must be non-negative");
        }
        if !(self.sigma_bl >= 0.0) {
            return fail("sigma_bl", "must be non-negative");
        }
        if !(self.f_mmwave > 0.0) {
            return fail("f_mmwave", "must be positive");
        }
        Ok(())
    }

    /// Distance at which the mean LOS path loss reaches `max_loss`.
    pub fn max_range(&self, max_loss: f64) -> f64 {
        let fixed = self.alpha + self.beta * self.f_mmwave.log10();
        10f64.powf((max_loss - fixed) / self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudget {
    /// Largest total loss (dB) at which a hop still carries traffic.
    pub max_total_loss: f64,
    pub bandwidth: f64,
    /// Received SNR in dB is `reference_rx_power_offset - total_loss`.
    pub reference_rx_power_offset: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget {
            max_total_loss: 110.0,
            bandwidth: 2.16e9,
            reference_rx_power_offset: 110.0,
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_total_loss > 0.0) {
            return Err(Error::InvalidConfig {
                field: "max_total_loss",
                reason: "must be positive".into(),
            });
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::InvalidConfig { field: "bandwidth", reason: "must be positive".into() });
        }
        Ok(())
    }
}

fn check_distance(d: f64) -> Result<()> {
    if d >= 1.0 {
        Ok(())
    } else {
        Err(Error::DistanceOutOfDomain(d))
    }
}

/// LOS path loss in dB at distance `d` meters with a caller-supplied shadow
/// fading sample.
pub fn path_loss(d: f64, params: &ChannelParams, shadow: f64) -> Result<f64> {
    check_distance(d)?;
    Ok(params.alpha + params.beta * params.f_mmwave.log10() + params.gamma * d.log10() + shadow)
}

/// Mean of the vehicle blocking loss at distance `d`.
pub fn blocking_loss_mean(d: f64, params: &ChannelParams) -> Result<f64> {
    check_distance(d)?;
    Ok(params.mu_offset + (params.xi * d.log10() - params.bl_thresh).max(0.0))
}

pub fn sample_blocking_loss<R: Rng + ?Sized>(d: f64, params: &ChannelParams, rng: &mut R) -> Result<f64> {
    let mean = blocking_loss_mean(d, params)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(mean + params.sigma_bl * z)
}

pub fn sample_shadow_fading<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    params.sigma_sf * z
}

/// Boundary inclusive.
pub fn link_feasible(total_loss: f64, budget: &LinkBudget) -> bool {
    total_loss <= budget.max_total_loss
}

/// Shannon capacity of one hop in bits/s.
pub fn shannon_throughput(total_loss: f64, budget: &LinkBudget) -> f64 {
    let snr_db = budget.reference_rx_power_offset - total_loss;
    budget.bandwidth * (1.0 + 10f64.powf(snr_db / 10.0)).log2()
}

/// End-to-end throughput of a multi-hop route: its weakest hop.
pub fn route_throughput(hop_losses: impl IntoIterator<Item = f64>, budget: &LinkBudget) -> f64 {
    hop_losses
        .into_iter()
        .map(|l| shannon_throughput(l, budget))
        .fold(f64::INFINITY, f64::min)
}
