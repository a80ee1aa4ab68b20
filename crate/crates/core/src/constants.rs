//! Constant profiles for the general and degree-cut modes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAPER_ETA: f64 = 4.16e-19;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub name: String,
    pub eps_half: f64,
    pub eps_11: f64,
    pub p: f64,
    /// Carried for completeness; no formula reads it.
    pub eps_m: f64,
    pub tau: f64,
    pub eps_p: f64,
    pub alpha: f64,
    pub eps_b: f64,
    pub eps_f: f64,
    pub eps_eta: f64,
    pub eta: f64,
    pub beta: f64,
    pub gamma: f64,
    pub zeta: f64,
}

impl Constants {
    /// Derive every dependent constant from the free ones.
    pub fn derive(name: &str, eta: f64, eps_half: f64, zeta: f64) -> Constants {
        let beta = eta / (4.0 + 2.0 * eta);
        let eps_eta = 7.0 * eta;
        let eps_p = 750.0 * eta;
        Constants {
            name: name.to_string(),
            eps_half,
            eps_11: eps_half / 12.0,
            p: 0.005 * eps_half * eps_half,
            eps_m: 0.00025,
            tau: 0.571 * beta,
            eps_p,
            alpha: 2.0 * eps_eta,
            eps_b: 21.0 * eps_half,
            eps_f: 0.1,
            eps_eta,
            eta,
            beta,
            gamma: 15.0 / 32.0 * eps_p,
            zeta,
        }
    }

    pub fn paper() -> Constants {
        Constants::derive("paper", PAPER_ETA, 0.0002, 1.0 / 4000.0)
    }

    /// Inflated profile: `eta = 0.01`, `eps_half = 0.02`, `zeta = 0.1`.
    pub fn test() -> Constants {
        Constants::derive("test", 0.01, 0.02, 0.1)
    }

    /// `paper`, `test`, or `test:<eta>`.
    pub fn profile(name: &str) -> Result<Constants> {
        match name {
            "paper" => Ok(Constants::paper()),
            "test" => Ok(Constants::test()),
            other => {
                let Some(rest) = other.strip_prefix("test:") else {
                    return Err(Error::Parse(format!("unknown constants profile '{other}'")));
                };
                let eta: f64 = rest
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad eta in profile '{other}'")))?;
                let c = Constants::derive(other, eta, 0.02, 0.1);
                c.check()?;
                Ok(c)
            }
        }
    }

    /// Same profile with a different `eta` and everything downstream re-derived.
    pub fn with_eta(&self, eta: f64) -> Constants {
        Constants::derive(&self.name, eta, self.eps_half, self.zeta)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 0.4) {
            return Err(Error::EtaRange(self.eta));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::ConstantsViolated(format!("p = {} outside (0, 1)", self.p)));
        }
        Ok(())
    }

    /// `0.1 ζ² / 6²`, the flow scale of the near-cycle max flow.
    pub fn flow_scale(&self) -> f64 {
        0.1 * self.zeta * self.zeta / 36.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeConstants {
    pub p: f64,
    pub eta: f64,
}

impl DegreeConstants {
    pub fn paper() -> DegreeConstants {
        DegreeConstants { p: 2e-10, eta: PAPER_ETA }
    }

    pub fn alpha(&self) -> f64 {
        self.p / (2.0 + self.p)
    }

    /// The per-edge target `(1/2 - p·eta/9)`.
    pub fn edge_factor(&self) -> f64 {
        0.5 - self.p * self.eta / 9.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_values() {
        let c = Constants::paper();
        assert_eq!(c.eps_11, 0.0002 / 12.0);
        assert!((c.p - 2e-10).abs() < 1e-24);
        assert!((c.beta - PAPER_ETA / (4.0 + 2.0 * PAPER_ETA)).abs() < 1e-35);
        assert!((c.gamma - 15.0 / 32.0 * 750.0 * PAPER_ETA).abs() < 1e-30);
        assert!((c.eps_b - 0.0042).abs() < 1e-15);
        assert_eq!(c.alpha, 14.0 * PAPER_ETA);
        c.check().unwrap();
    }

    #[test]
    fn profiles() {
        assert_eq!(Constants::profile("test").unwrap().eta, 0.01);
        assert_eq!(Constants::profile("test:0.05").unwrap().eta, 0.05);
        assert!(Constants::profile("test:0.9").is_err());
        assert!(Constants::profile("nope").is_err());
        let d = DegreeConstants::paper();
        assert!((d.alpha() - 2e-10 / (2.0 + 2e-10)).abs() < 1e-24);
    }
}
