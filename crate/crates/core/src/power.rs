//! EARTH load-dependent base-station power and total network power.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BsRole {
    HapsSmbs,
    Mbs,
    Sbs,
}

/// EARTH coefficients of one base station. Powers in watts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsPowerProfile {
    /// Operational circuit power `P_o`.
    pub p_operational: f64,
    /// Power-amplifier factor `η`.
    pub amp_efficiency: f64,
    /// Transmit power `P_t`.
    pub p_transmit: f64,
    /// Sleep-mode power `P_s`.
    pub p_sleep: f64,
    pub role: BsRole,
}

impl BsPowerProfile {
    pub fn new(p_operational: f64, amp_efficiency: f64, p_transmit: f64, p_sleep: f64, role: BsRole) -> Result<Self> {
        let p = Self {
            p_operational,
            amp_efficiency,
            p_transmit,
            p_sleep,
            role,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let powers = [self.p_operational, self.p_transmit, self.p_sleep];
        if powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid(format!("{:?} powers must be finite and non-negative", self.role)));
        }
        if !(self.amp_efficiency.is_finite() && self.amp_efficiency > 0.0) {
            return Err(invalid(format!("{:?} amplifier efficiency must be positive", self.role)));
        }
        if self.p_sleep > self.p_operational {
            return Err(invalid(format!("{:?} sleep power exceeds operational power", self.role)));
        }
        Ok(())
    }

    /// Small-cell defaults (artifact defaults, not measured values).
    pub fn default_sbs() -> Self {
        Self {
            p_operational: 56.0,
            amp_efficiency: 2.6,
            p_transmit: 6.3,
            p_sleep: 6.0,
            role: BsRole::Sbs,
        }
    }

    pub fn default_mbs() -> Self {
        Self {
            p_operational: 130.0,
            amp_efficiency: 4.7,
            p_transmit: 20.0,
            p_sleep: 75.0,
            role: BsRole::Mbs,
        }
    }

    /// No published HAPS coefficients exist; the macro cell's stand in.
    pub fn default_haps() -> Self {
        Self {
            role: BsRole::HapsSmbs,
            ..Self::default_mbs()
        }
    }
}

/// `P_s` when asleep (`λ = 0`), otherwise `P_o + η λ P_t`.
pub fn bs_power(profile: &BsPowerProfile, load: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&load) {
        return Err(invalid(format!("load factor must lie in [0, 1], got {load}")));
    }
    Ok(if load == 0.0 {
        profile.p_sleep
    } else {
        profile.p_operational + profile.amp_efficiency * load * profile.p_transmit
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkPower {
    pub haps: f64,
    pub mbs: f64,
    pub sbs: Vec<f64>,
    pub total: f64,
}

/// Total power of one HAPS, one macro cell and `sbs.len()` small cells.
/// The HAPS and the macro cell never sleep, so their loads must be positive.
pub fn network_power(
    haps: (&BsPowerProfile, f64),
    mbs: (&BsPowerProfile, f64),
    sbs: &[(BsPowerProfile, f64)],
) -> Result<NetworkPower> {
    for (name, load) in [("HAPS", haps.1), ("MBS", mbs.1)] {
        if !(load > 0.0 && load <= 1.0) {
            return Err(invalid(format!("{name} is always active; its load must lie in (0, 1], got {load}")));
        }
    }
    let p_haps = bs_power(haps.0, haps.1)?;
    let p_mbs = bs_power(mbs.0, mbs.1)?;
    let per_sbs = sbs
        .iter()
        .map(|(profile, load)| bs_power(profile, *load))
        .collect::<Result<Vec<_>>>()?;
    let total = p_haps + p_mbs + per_sbs.iter().sum::<f64>();
    Ok(NetworkPower {
        haps: p_haps,
        mbs: p_mbs,
        sbs: per_sbs,
        total,
    })
}
