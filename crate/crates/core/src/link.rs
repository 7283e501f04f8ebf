//! Free-space link budget.

use std::f64::consts::PI;

use crate::error::LinkError;
use crate::units::{Frequency, PowerLevel, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_power: PowerLevel,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub frequency: Frequency,
    /// Metres.
    pub distance: f64,
}

impl LinkBudget {
    pub fn eirp_dbm(&self) -> f64 {
        self.tx_power.dbm() + self.tx_gain_dbi
    }

    /// Below two wavelengths the far-field formula is only indicative.
    pub fn is_far_field(&self) -> bool {
        self.distance >= 2.0 * self.frequency.wavelength()
    }

    fn total_gain_dbm(&self) -> f64 {
        self.tx_power.dbm() + self.tx_gain_dbi + self.rx_gain_dbi
    }
}

pub fn path_loss_db(distance: f64, frequency: Frequency) -> Result<f64, LinkError> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(LinkError::InvalidDistance(distance));
    }
    Ok(20.0 * (4.0 * PI * distance * frequency.hz() / SPEED_OF_LIGHT).log10())
}

pub fn received_power(lb: &LinkBudget) -> Result<PowerLevel, LinkError> {
    let pl = path_loss_db(lb.distance, lb.frequency)?;
    PowerLevel::from_dbm(lb.total_gain_dbm() - pl).map_err(|_| LinkError::InvalidDistance(lb.distance))
}

/// Distance at which the received power equals `target`. The budget's own
/// distance is ignored.
pub fn range_for_power(lb: &LinkBudget, target: PowerLevel) -> Result<f64, LinkError> {
    let eirp = lb.eirp_dbm();
    if target.dbm() >= eirp {
        return Err(LinkError::Unreachable { target_dbm: target.dbm(), eirp_dbm: eirp });
    }
    let pl = lb.total_gain_dbm() - target.dbm();
    Ok(10f64.powf(pl / 20.0) * SPEED_OF_LIGHT / (4.0 * PI * lb.frequency.hz()))
}
