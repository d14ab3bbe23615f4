use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which S entries enter the residual, in the order `S11, S12, S21, S22`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ChannelMask(pub [bool; 4]);

impl ChannelMask {
    pub const ALL: ChannelMask = ChannelMask([true; 4]);
    const NAMES: [&'static str; 4] = ["S11", "S12", "S21", "S22"];

    /// Parses a comma list such as `S11` or `S11,S22`; `all` selects everything.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.eq_ignore_ascii_case("all") {
            return Ok(Self::ALL);
        }
        let mut m = [false; 4];
        for part in t.split(',') {
            let p = part.trim().to_ascii_uppercase();
            let k = Self::NAMES
                .iter()
                .position(|n| *n == p)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown S entry {part:?} in mask")))?;
            m[k] = true;
        }
        Ok(ChannelMask(m))
    }

    pub fn is_all(&self) -> bool {
        self.0 == [true; 4]
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn includes(&self, x: usize, y: usize) -> bool {
        self.0[2 * x + y]
    }
}

impl Default for ChannelMask {
    fn default() -> Self {
        Self::ALL
    }
}

impl TryFrom<String> for ChannelMask {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Self::parse(&s)
    }
}

impl From<ChannelMask> for String {
    fn from(m: ChannelMask) -> String {
        if m.is_all() {
            return "all".into();
        }
        ChannelMask::NAMES
            .iter()
            .zip(m.0)
            .filter(|(_, b)| *b)
            .map(|(n, _)| *n)
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    /// Resolvent derivative `dR = R dH R`.
    #[default]
    Analytic,
    /// Forward differences with relative step `fd_step`.
    ForwardDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Evaluation budget per start, in units of `(parameters + 1)` residual evaluations.
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Relative step and relative cost-reduction tolerance.
    pub step_tolerance: f64,
    /// Maximum number of starts; the loop stops early once a start reaches the noise floor.
    pub n_starts: usize,
    /// Initial trust-region bound factor.
    pub damping_init: f64,
    pub seed: u64,
    pub mask: ChannelMask,
    pub jacobian: JacobianMode,
    pub fd_step: f64,
    /// Disable to always run all `n_starts` starts.
    pub early_stop: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 100,
            gradient_tolerance: 1e-12,
            step_tolerance: 1e-12,
            n_starts: 8,
            damping_init: 100.0,
            seed: 0,
            mask: ChannelMask::ALL,
            jacobian: JacobianMode::Analytic,
            fd_step: 1e-7,
            early_stop: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if self.max_iterations == 0 || self.n_starts == 0 {
            return Err(Error::InvalidArgument("max_iterations and n_starts must be >= 1".into()));
        }
        if !(pos(self.gradient_tolerance) && pos(self.step_tolerance) && pos(self.damping_init) && pos(self.fd_step)) {
            return Err(Error::InvalidArgument("fit tolerances, damping_init and fd_step must be > 0".into()));
        }
        if self.mask.count() == 0 {
            return Err(Error::InvalidArgument("channel mask selects no S entry".into()));
        }
        Ok(())
    }
}
