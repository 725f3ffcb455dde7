//! Flat experiment configuration with fail-fast validation.
//!
//! The config is one flat JSON object so that oracle scripts in any language
//! can read and write it without a schema library. Unused fields keep their
//! defaults; every experiment validates the subset it needs before any
//! compute starts.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    TubeDecay,
    GmcDecay,
    FreeEnergy,
    Thickness,
    OuCheck,
    Localize,
    She,
    Rate,
    Eigen,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::TubeDecay => "tube-decay",
            ExperimentKind::GmcDecay => "gmc-decay",
            ExperimentKind::FreeEnergy => "free-energy",
            ExperimentKind::Thickness => "thickness",
            ExperimentKind::OuCheck => "ou-check",
            ExperimentKind::Localize => "localize",
            ExperimentKind::She => "she",
            ExperimentKind::Rate => "rate",
            ExperimentKind::Eigen => "eigen",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "tube-decay" => Ok(ExperimentKind::TubeDecay),
            "gmc-decay" => Ok(ExperimentKind::GmcDecay),
            "free-energy" => Ok(ExperimentKind::FreeEnergy),
            "thickness" => Ok(ExperimentKind::Thickness),
            "ou-check" => Ok(ExperimentKind::OuCheck),
            "localize" => Ok(ExperimentKind::Localize),
            "she" => Ok(ExperimentKind::She),
            "rate" => Ok(ExperimentKind::Rate),
            "eigen" => Ok(ExperimentKind::Eigen),
            other => Err(Error::UnknownExperiment(other.into())),
        }
    }
}

fn default_kernel_h() -> f64 {
    1.0 / 64.0
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub d: usize,
    #[serde(default)]
    pub gamma: f64,
    /// sweep over couplings; empty means use `gamma`
    #[serde(default)]
    pub gamma_list: Vec<f64>,
    #[serde(default)]
    pub t: f64,
    /// sweep over horizons; empty means use `t`
    #[serde(default)]
    pub t_list: Vec<f64>,
    pub dt: f64,
    pub dx: f64,
    /// kernel table spacing
    #[serde(default = "default_kernel_h")]
    pub kernel_h: f64,
    /// tube radius
    #[serde(default)]
    pub r: f64,
    /// overlap threshold
    #[serde(default)]
    pub delta: f64,
    /// cover mass slack for localize
    #[serde(default)]
    pub eps: f64,
    /// mollification scales for she
    #[serde(default)]
    pub eps_list: Vec<f64>,
    /// flow horizon for ou-check
    #[serde(default)]
    pub t_flow: f64,
    /// flow integral steps for ou-check
    #[serde(default)]
    pub flow_steps: usize,
    /// Chebyshev epsilon for ou-check
    #[serde(default)]
    pub cheb_eps: f64,
    /// paths per ensemble / samples per estimate
    pub n: usize,
    /// noise realizations
    #[serde(default)]
    pub k: usize,
    /// pair-sampling budget for replica overlaps
    #[serde(default)]
    pub n_pairs: usize,
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
}

impl ExperimentConfig {
    /// Baseline config for an experiment; CLI flags override fields.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            experiment: kind,
            d: 1,
            gamma: 0.3,
            gamma_list: Vec::new(),
            t: 2.0,
            t_list: Vec::new(),
            dt: 0.05,
            dx: 1.0 / 8.0,
            kernel_h: default_kernel_h(),
            r: 1.0,
            delta: 0.1,
            eps: 0.1,
            eps_list: Vec::new(),
            t_flow: 2.0,
            flow_steps: 20,
            cheb_eps: 0.0,
            n: 2000,
            k: 1,
            n_pairs: 32_768,
            seed: 1,
            workers: 0,
        };
        match kind {
            ExperimentKind::TubeDecay => {
                c.t_list = vec![2.0, 4.0, 6.0, 8.0];
                c.dt = 0.005;
                c.n = 100_000;
            }
            ExperimentKind::GmcDecay => {
                c.t_list = vec![1.0, 2.0, 3.0, 4.0];
                c.gamma = 0.2;
                c.dt = 0.05;
                c.n = 10_000;
                c.k = 4;
            }
            ExperimentKind::FreeEnergy => {
                c.gamma_list = vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
                c.t = 4.0;
                c.n = 4000;
            }
            ExperimentKind::Thickness => {
                c.d = 3;
                c.gamma = 0.2;
                c.t_list = vec![2.0, 4.0, 8.0];
                c.dt = 0.1;
                c.n = 10_000;
                c.k = 3;
            }
            ExperimentKind::OuCheck => {
                c.gamma = 0.5;
                c.t = 4.0;
                c.t_flow = 2.0;
                c.flow_steps = 20;
                c.n = 500;
                c.k = 200;
            }
            ExperimentKind::Localize => {
                c.gamma = 2.0;
                c.t = 4.0;
                c.n = 500;
                c.k = 8;
                c.delta = 0.1;
                c.eps = 0.1;
            }
            ExperimentKind::She => {
                c.d = 3;
                c.gamma = 0.2;
                c.t = 0.5;
                c.dt = 0.1; // base step dtau
                c.eps_list = vec![1.0, 0.5];
                c.n = 500;
                c.k = 50;
            }
            ExperimentKind::Rate => {
                c.d = 3;
                c.gamma = 0.2;
            }
            ExperimentKind::Eigen => {
                c.d = 3;
                c.r = 1.0;
            }
        }
        c
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn horizons(&self) -> Vec<f64> {
        if self.t_list.is_empty() {
            vec![self.t]
        } else {
            self.t_list.clone()
        }
    }

    pub fn gammas(&self) -> Vec<f64> {
        if self.gamma_list.is_empty() {
            vec![self.gamma]
        } else {
            self.gamma_list.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > 4 {
            return Err(Error::invalid("dimension must be in 1..=4"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        if !(self.dx > 0.0) || self.dx > 0.125 + 1e-12 {
            return Err(Error::invalid("dx must lie in (0, 1/8]"));
        }
        if !(self.kernel_h > 0.0) || self.kernel_h > 1.0 / 16.0 {
            return Err(Error::invalid("kernel_h must lie in (0, 1/16]"));
        }
        if self.gamma < 0.0 || self.gamma_list.iter().any(|g| *g < 0.0) {
            return Err(Error::invalid("couplings must be nonnegative"));
        }
        match self.experiment {
            ExperimentKind::Eigen | ExperimentKind::Rate => {
                if !(self.r > 0.0) {
                    return Err(Error::invalid("radius must be positive"));
                }
                return Ok(());
            }
            _ => {}
        }
        // grid-dependent experiments: horizons must sit on the grid
        for t in self.horizons() {
            if !(t > 0.0) {
                return Err(Error::invalid("horizons must be positive"));
            }
            crate::paths::steps_for(t, self.dt)?;
        }
        if self.n == 0 {
            return Err(Error::invalid("sample count must be positive"));
        }
        match self.experiment {
            ExperimentKind::TubeDecay | ExperimentKind::GmcDecay => {
                if !(self.r > 0.0) {
                    return Err(Error::invalid("tube radius must be positive"));
                }
            }
            ExperimentKind::OuCheck => {
                if !(self.t_flow > 0.0) || self.flow_steps < 20 {
                    return Err(Error::invalid(
                        "ou-check needs t_flow > 0 and >= 20 flow steps",
                    ));
                }
                if self.k < 200 {
                    return Err(Error::invalid("ou-check needs >= 200 realizations"));
                }
            }
            ExperimentKind::Localize => {
                if !(self.delta > 0.0) || !(self.eps > 0.0 && self.eps < 1.0) {
                    return Err(Error::invalid(
                        "localize needs delta > 0 and eps in (0, 1)",
                    ));
                }
            }
            ExperimentKind::She => {
                if self.d < 3 {
                    return Err(Error::invalid(
                        "the she renormalization is specific to d >= 3",
                    ));
                }
                if self.eps_list.is_empty()
                    || self.eps_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0))
                {
                    return Err(Error::invalid("she needs eps values in (0, 1]"));
                }
                for &eps in &self.eps_list {
                    crate::paths::steps_for(self.t, eps * eps * self.dt)?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        for kind in [
            ExperimentKind::TubeDecay,
            ExperimentKind::GmcDecay,
            ExperimentKind::FreeEnergy,
            ExperimentKind::Thickness,
            ExperimentKind::OuCheck,
            ExperimentKind::Localize,
            ExperimentKind::She,
            ExperimentKind::Rate,
            ExperimentKind::Eigen,
        ] {
            let c = ExperimentConfig::default_for(kind);
            let text = c.to_json();
            let back = ExperimentConfig::from_json(&text).unwrap();
            assert_eq!(c, back);
        }
    }

    #[test]
    fn rejects_bad_parameters_before_compute() {
        let mut c = ExperimentConfig::default_for(ExperimentKind::TubeDecay);
        c.dx = 0.5;
        assert!(c.validate().is_err());

        let mut c = ExperimentConfig::default_for(ExperimentKind::TubeDecay);
        c.t_list = vec![1.05];
        c.dt = 0.1;
        assert!(c.validate().is_err());

        let mut c = ExperimentConfig::default_for(ExperimentKind::She);
        c.d = 1;
        assert!(c.validate().is_err());

        let mut c = ExperimentConfig::default_for(ExperimentKind::GmcDecay);
        c.gamma = -0.1;
        assert!(c.validate().is_err());

        assert!(ExperimentKind::parse("does-not-exist").is_err());
        assert!(ExperimentKind::parse("she").is_ok());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"experiment":"eigen","d":3,"dt":0.05,"dx":0.125,"n":100,"seed":1,"bogus":1}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }
}
