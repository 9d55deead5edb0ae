use serde::{Deserialize, Serialize};

use super::network::Network;
use crate::error::{Error, Result};

/// Proportionality constants of the flow-cap and loss laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConstants {
    /// Loss-law constant in `alpha = c_alpha * l / D^5`.
    pub c_alpha: f64,
    /// Flow cap per unit cross-sectional area.
    pub c_q: f64,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        PhysicsConstants { c_alpha: 1.0, c_q: 1.0 }
    }
}

/// Formulation-level settings shared by the master, the validator and the
/// relaxation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulationConfig {
    /// Big-M in potential units; `None` means `10 * max pi_max`.
    pub big_m: Option<f64>,
    pub physics: PhysicsConstants,
    /// Feasibility tolerance on scaled constraints.
    pub eps_feas: f64,
    pub perspective: bool,
}

impl Default for FormulationConfig {
    fn default() -> Self {
        FormulationConfig { big_m: None, physics: PhysicsConstants::default(), eps_feas: 1e-6, perspective: false }
    }
}

impl FormulationConfig {
    pub fn with_perspective(mut self, on: bool) -> Self {
        self.perspective = on;
        self
    }

    pub fn big_m(&self, net: &Network) -> Result<f64> {
        let pmax = net.potential_scale();
        let m = self.big_m.unwrap_or(10.0 * pmax);
        if m < pmax {
            return Err(Error::invalid(format!("big_M {m} is below the largest potential bound {pmax}")));
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_feas > 0.0) {
            return Err(Error::invalid("eps_feas must be positive"));
        }
        if !(self.physics.c_alpha > 0.0) || !(self.physics.c_q > 0.0) {
            return Err(Error::invalid("physics constants must be positive"));
        }
        Ok(())
    }
}
