//! Sign-gradient attacks: masked pixel-space attacks, the latent-space
//! attribute-guided attack, and their compositions.

mod dual;
mod latent;
mod pixel;
mod registry;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blur::BlurParams;
use crate::embedding::Objective;
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::masking::{BinaryMask, DEFAULT_GAMMA};

pub use dual::{age_ftm, StageMask};
pub use latent::age_attack;
pub use pixel::{masked_pgd, pixel_attack, sign, PixelOutcome};
pub use registry::{
    run_attack, AttackContext, AttackStrategy, DualStrategy, LatentStrategy, PixelStrategy,
    StrategyRegistry,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackMode {
    Pgd,
    Tma,
    Ftm,
    Age,
    AgeTma,
    AgeFtm,
}

impl AttackMode {
    pub const ALL: [AttackMode; 6] = [
        AttackMode::Pgd,
        AttackMode::Tma,
        AttackMode::Ftm,
        AttackMode::Age,
        AttackMode::AgeTma,
        AttackMode::AgeFtm,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AttackMode::Pgd => "pgd",
            AttackMode::Tma => "tma",
            AttackMode::Ftm => "ftm",
            AttackMode::Age => "age",
            AttackMode::AgeTma => "age-tma",
            AttackMode::AgeFtm => "age-ftm",
        }
    }

    pub fn uses_generator(&self) -> bool {
        matches!(self, AttackMode::Age | AttackMode::AgeTma | AttackMode::AgeFtm)
    }

    pub fn uses_parser(&self) -> bool {
        matches!(self, AttackMode::Ftm | AttackMode::AgeFtm)
    }
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "attack mode",
                name: s.to_string(),
                known: AttackMode::ALL.map(|m| m.as_str()).join(", "),
            })
    }
}

/// How the latent and pixel stages of the composed modes interact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Composition {
    /// Full latent attack, then the mask is extracted on its output and the
    /// pixel attack runs from there.
    #[default]
    Sequential,
    /// One latent step and one pixel step per round; the mask follows the
    /// current latent image.
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub mode: AttackMode,
    /// L-infinity pixel budget, in `[0, 1]` units.
    pub epsilon: f64,
    pub epsilon_iter: f64,
    pub off_steps: usize,
    /// L-infinity latent budget.
    pub eta: f64,
    pub eta_iter: f64,
    pub n_latent_steps: usize,
    pub gamma: f64,
    pub blur: BlurParams,
    pub composition: Composition,
    pub objective: Objective,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            mode: AttackMode::AgeFtm,
            epsilon: 16.0 / 255.0,
            epsilon_iter: 2.0 / 255.0,
            off_steps: 50,
            eta: 0.1,
            eta_iter: 0.02,
            n_latent_steps: 10,
            gamma: DEFAULT_GAMMA,
            blur: BlurParams::default(),
            composition: Composition::Sequential,
            objective: Objective::Impersonate,
        }
    }
}

impl AttackConfig {
    pub fn with_mode(mut self, mode: AttackMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.epsilon, self.epsilon_iter, self.eta, self.eta_iter, self.gamma];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("attack hyperparameters must be finite"));
        }
        if !(0.0 <= self.epsilon_iter && self.epsilon_iter <= self.epsilon && self.epsilon <= 1.0) {
            return Err(Error::param(format!(
                "need 0 <= epsilon_iter ({}) <= epsilon ({}) <= 1",
                self.epsilon_iter, self.epsilon
            )));
        }
        if !(0.0 <= self.eta_iter && self.eta_iter <= self.eta) {
            return Err(Error::param(format!(
                "need 0 <= eta_iter ({}) <= eta ({})",
                self.eta_iter, self.eta
            )));
        }
        if self.gamma < 0.0 {
            return Err(Error::param(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        self.blur.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackStatus {
    Ok,
    /// The pixel-stage mask was empty; that stage left its input unchanged.
    EmptyMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub protected_image: ImageTensor,
    /// Latent-stage output for the generator-based modes.
    pub intermediate_on_manifold: Option<ImageTensor>,
    pub mask_used: Option<BinaryMask>,
    /// Objective before the first step and after every step.
    pub loss_trace: Vec<f64>,
    pub mode: AttackMode,
    pub iterations: usize,
    /// Final latent perturbation (without the attribute offset).
    pub latent_offset: Option<Vec<f64>>,
    pub status: AttackStatus,
}

impl AttackResult {
    pub fn initial_loss(&self) -> f64 {
        self.loss_trace[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("trace is never empty")
    }

    /// Image the pixel stage started from.
    pub fn pixel_stage_input<'a>(&'a self, source: &'a ImageTensor) -> &'a ImageTensor {
        self.intermediate_on_manifold.as_ref().unwrap_or(source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_mode_names() {
        let cfg = AttackConfig::default();
        assert_eq!(cfg.epsilon, 16.0 / 255.0);
        assert_eq!(cfg.epsilon_iter, 2.0 / 255.0);
        assert_eq!(cfg.off_steps, 50);
        assert_eq!((cfg.eta, cfg.eta_iter, cfg.n_latent_steps), (0.1, 0.02, 10));
        assert_eq!(cfg.gamma, 0.003);
        cfg.validate().unwrap();
        let names: Vec<_> = AttackMode::ALL.iter().map(|m| m.as_str()).collect();
        assert_eq!(names, ["pgd", "tma", "ftm", "age", "age-tma", "age-ftm"]);
        for m in AttackMode::ALL {
            assert_eq!(m.as_str().parse::<AttackMode>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("fgsm".parse::<AttackMode>().is_err());
    }

    #[test]
    fn validation_rejects_inverted_budgets() {
        let mut cfg = AttackConfig::default();
        cfg.epsilon_iter = 0.5;
        assert!(cfg.validate().is_err());
        let mut cfg = AttackConfig::default();
        cfg.eta = 0.01;
        assert!(cfg.validate().is_err());
        let mut cfg = AttackConfig::default();
        cfg.epsilon = 1.5;
        cfg.epsilon_iter = 0.1;
        assert!(cfg.validate().is_err());
    }
}
