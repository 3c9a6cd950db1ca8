use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Step-size rule `t ↦ η_t`, indexed from `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant {
        eta: f64,
    },
    /// `η_t = c / (t + 1)`.
    Harmonic {
        c: f64,
    },
    /// `α_t = α_1 + (t−1)(α_T − α_1)/(T−1)`, `η_t = 1/α_t`. `steps` is `T`;
    /// when absent it is bound to the run length.
    LinearAlpha {
        alpha_1: f64,
        alpha_t: f64,
        steps: Option<usize>,
    },
    /// `η_t = c / t^p`.
    Power {
        c: f64,
        p: f64,
    },
}

impl StepSchedule {
    /// Linear-α schedule running from `η_1` to `η_T`.
    pub fn from_etas(eta_1: f64, eta_t: f64, steps: usize) -> Result<Self> {
        if !(eta_1 > 0.0 && eta_t > 0.0) {
            return Err(Error::ParseSchedule(format!(
                "step sizes must be positive, got ({eta_1}, {eta_t})"
            )));
        }
        let s = StepSchedule::LinearAlpha {
            alpha_1: 1.0 / eta_1,
            alpha_t: 1.0 / eta_t,
            steps: Some(steps),
        };
        s.validate()?;
        Ok(s)
    }

    /// Fills in `T` for a linear-α schedule that left it open.
    pub fn bind_horizon(self, total_steps: usize) -> Self {
        match self {
            StepSchedule::LinearAlpha {
                alpha_1,
                alpha_t,
                steps: None,
            } => StepSchedule::LinearAlpha {
                alpha_1,
                alpha_t,
                steps: Some(total_steps),
            },
            other => other,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ParseSchedule(m));
        match *self {
            StepSchedule::Constant { eta } if !(eta.is_finite() && eta > 0.0) => {
                bad(format!("constant eta must be positive, got {eta}"))
            }
            StepSchedule::Harmonic { c } if !(c.is_finite() && c > 0.0) => {
                bad(format!("harmonic c must be positive, got {c}"))
            }
            StepSchedule::LinearAlpha {
                alpha_1,
                alpha_t,
                steps,
            } => {
                if !(alpha_1.is_finite() && alpha_1 > 0.0 && alpha_t.is_finite() && alpha_t > 0.0) {
                    return bad(format!("alphas must be positive, got ({alpha_1}, {alpha_t})"));
                }
                if steps == Some(0) {
                    return bad("linear_alpha needs T >= 1".into());
                }
                Ok(())
            }
            StepSchedule::Power { c, p } if !(c.is_finite() && c > 0.0 && p.is_finite()) => {
                bad(format!("power schedule needs c > 0 and finite p, got ({c}, {p})"))
            }
            _ => Ok(()),
        }
    }

    /// `η_t` for `t ≥ 1`.
    pub fn eta(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Err(Error::StepOutOfRange {
                t,
                max: self.horizon().unwrap_or(usize::MAX),
            });
        }
        let tf = t as f64;
        match *self {
            StepSchedule::Constant { eta } => Ok(eta),
            StepSchedule::Harmonic { c } => Ok(c / (tf + 1.0)),
            StepSchedule::Power { c, p } => Ok(c / tf.powf(p)),
            StepSchedule::LinearAlpha {
                alpha_1,
                alpha_t,
                steps,
            } => {
                let big_t = steps.ok_or_else(|| Error::ParseSchedule("linear_alpha horizon T is unbound".into()))?;
                if t > big_t {
                    return Err(Error::StepOutOfRange { t, max: big_t });
                }
                let alpha = if big_t == 1 {
                    alpha_1
                } else {
                    alpha_1 + (tf - 1.0) * (alpha_t - alpha_1) / (big_t as f64 - 1.0)
                };
                Ok(1.0 / alpha)
            }
        }
    }

    fn horizon(&self) -> Option<usize> {
        match *self {
            StepSchedule::LinearAlpha { steps, .. } => steps,
            _ => None,
        }
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            StepSchedule::Constant { eta } => write!(f, "constant:{eta}"),
            StepSchedule::Harmonic { c } => write!(f, "harmonic:{c}"),
            StepSchedule::Power { c, p } => write!(f, "power:{c},{p}"),
            StepSchedule::LinearAlpha {
                alpha_1,
                alpha_t,
                steps: None,
            } => write!(f, "linear_alpha:{alpha_1},{alpha_t}"),
            StepSchedule::LinearAlpha {
                alpha_1,
                alpha_t,
                steps: Some(t),
            } => write!(f, "linear_alpha:{alpha_1},{alpha_t},{t}"),
        }
    }
}

impl FromStr for StepSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::ParseSchedule(s.to_string());
        let (kind, args) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let nums: Vec<&str> = args.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
        let num = |i: usize| -> Result<f64> { nums.get(i).ok_or_else(err)?.parse().map_err(|_| err()) };
        let schedule = match (kind.trim(), nums.len()) {
            ("constant", 1) => StepSchedule::Constant { eta: num(0)? },
            ("harmonic", 0) => StepSchedule::Harmonic { c: 4.0 },
            ("harmonic", 1) => StepSchedule::Harmonic { c: num(0)? },
            ("power", 2) => StepSchedule::Power { c: num(0)?, p: num(1)? },
            ("linear_alpha", 2 | 3) => StepSchedule::LinearAlpha {
                alpha_1: num(0)?,
                alpha_t: num(1)?,
                steps: match nums.get(2) {
                    Some(t) => Some(t.parse().map_err(|_| err())?),
                    None => None,
                },
            },
            _ => return Err(err()),
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

impl serde::Serialize for StepSchedule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for StepSchedule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(StepSchedule::Harmonic { c: 4.0 }.eta(1).unwrap(), 2.0);
        let la: StepSchedule = "linear_alpha:0.5,2,300".parse().unwrap();
        assert_eq!(la.eta(1).unwrap(), 2.0);
        assert_eq!(la.eta(300).unwrap(), 0.5);
        assert!(matches!(la.eta(301), Err(Error::StepOutOfRange { .. })));
        assert!(la.eta(0).is_err());
    }

    #[test]
    fn unbound_horizon() {
        let la: StepSchedule = "linear_alpha:0.5,2".parse().unwrap();
        assert!(la.eta(1).is_err());
        assert_eq!(la.bind_horizon(10).eta(10).unwrap(), 0.5);
    }

    #[test]
    fn parse_round_trip() {
        for s in [
            "constant:0.2",
            "harmonic:4",
            "power:1,2",
            "linear_alpha:0.5,2",
            "linear_alpha:1,10,100",
        ] {
            let p: StepSchedule = s.parse().unwrap();
            assert_eq!(p.to_string().parse::<StepSchedule>().unwrap(), p);
        }
        for s in ["constant", "constant:-1", "linear_alpha:1", "harmonic:0", "nope:1"] {
            assert!(s.parse::<StepSchedule>().is_err(), "{s}");
        }
    }

    #[test]
    fn from_etas_hits_endpoints() {
        let s = StepSchedule::from_etas(1.0, 0.1, 100).unwrap();
        assert!((s.eta(1).unwrap() - 1.0).abs() < 1e-15);
        assert!((s.eta(100).unwrap() - 0.1).abs() < 1e-12);
        let one = StepSchedule::from_etas(0.3, 0.7, 1).unwrap();
        assert!((one.eta(1).unwrap() - 0.3).abs() < 1e-15);
    }
}
