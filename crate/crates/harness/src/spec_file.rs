//! RCMDP spec files.
//!
//! ```toml
//! states = 2
//! actions = 2
//! gamma = 0.9
//! rho = [0.9, 0.1]
//! # one row per (s, a) in state-major order
//! kernel = [[0.4, 0.6], [0.95, 0.05], [0.3, 0.7], [0.8, 0.2]]
//! # S*A entries, or S*A*S for next-state dependent costs
//! cost0 = [-1.0, 0.0, -1.0, 0.0]
//! costs = [[-0.5, -0.5, 1.0, 1.0]]
//! ```
//!
//! Kernel rows off by at most `1e-6` are renormalised on load.

use std::fs;
use std::path::Path;

use rcmdp_core::{CostTable, RcmdpSpec, TransitionKernel};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub states: usize,
    pub actions: usize,
    pub gamma: f64,
    pub rho: Vec<f64>,
    pub kernel: Vec<Vec<f64>>,
    pub cost0: Vec<f64>,
    #[serde(default)]
    pub costs: Vec<Vec<f64>>,
}

fn cost_table(ns: usize, na: usize, data: Vec<f64>) -> rcmdp_core::Result<CostTable> {
    if data.len() == ns * na * ns && ns > 1 {
        CostTable::state_action_state(ns, na, data)
    } else {
        CostTable::state_action(ns, na, data)
    }
}

impl SpecFile {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn build(self) -> rcmdp_core::Result<(RcmdpSpec, TransitionKernel)> {
        let (ns, na) = (self.states, self.actions);
        let flat: Vec<f64> = self.kernel.into_iter().flatten().collect();
        let kernel = TransitionKernel::renormalized(ns, na, flat)?;
        let cost0 = cost_table(ns, na, self.cost0)?;
        let costs = self
            .costs
            .into_iter()
            .map(|c| cost_table(ns, na, c))
            .collect::<rcmdp_core::Result<Vec<_>>>()?;
        let spec = RcmdpSpec::new(ns, na, self.rho, cost0, costs, self.gamma)?;
        Ok((spec, kernel))
    }

    pub fn load(path: &Path) -> Result<(RcmdpSpec, TransitionKernel)> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file = Self::from_toml(&text).map_err(|e| HarnessError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        file.build().map_err(|e| HarnessError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}
