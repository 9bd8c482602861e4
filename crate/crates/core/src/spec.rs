//! Named return-estimator families and their compact string form.
//!
//! | string            | estimator                                   |
//! |-------------------|---------------------------------------------|
//! | `lambda:0.9`      | λ-return                                     |
//! | `nstep:5`         | n-step return                                |
//! | `sparse:0.75:3`   | sparse λ-return with period 3                |
//! | `trunc:0.93:20`   | λ-return truncated after 20 TD errors        |
//! | `trunc:0.9:inf`   | untruncated, same as `lambda:0.9`            |
//! | `pulse:1`         | single TD error delayed by 1 step            |
//! | `custom:@path`    | TD-error weights read from a file            |

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::weights::{pow, Tail, TdWeights, WeightSeq};

#[derive(Debug, Clone, PartialEq)]
pub enum ReturnSpec {
    Lambda(f64),
    NStep(usize),
    SparseLambda {
        lambda: f64,
        period: usize,
    },
    /// `None` means no truncation.
    TruncatedLambda {
        lambda: f64,
        len: Option<usize>,
    },
    DelayedPulse(usize),
    Custom {
        source: String,
        weights: TdWeights,
    },
}

impl ReturnSpec {
    /// Parses the compact form, reading `custom:@path` files from disk.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::Parse(format!("malformed return spec `{s}`"));
        let spec = match parts.as_slice() {
            ["lambda", l] => ReturnSpec::Lambda(num(l)?),
            ["nstep", n] => ReturnSpec::NStep(num(n)?),
            ["sparse", l, m] => ReturnSpec::SparseLambda {
                lambda: num(l)?,
                period: num(m)?,
            },
            ["trunc", l, n] => ReturnSpec::TruncatedLambda {
                lambda: num(l)?,
                len: match *n {
                    "inf" | "∞" => None,
                    n => Some(num(n)?),
                },
            },
            ["pulse", t] => ReturnSpec::DelayedPulse(num(t)?),
            ["custom", path] => {
                let path = path.strip_prefix('@').ok_or_else(bad)?;
                let text = std::fs::read_to_string(path)?;
                ReturnSpec::Custom {
                    source: s.trim().to_string(),
                    weights: parse_weights_text(&text)?,
                }
            }
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let lambda_ok = |l: f64| {
            if (0.0..=1.0).contains(&l) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("λ = {l} outside [0, 1]")))
            }
        };
        let positive = |what: &str, k: usize| {
            if k >= 1 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{what} must be at least 1")))
            }
        };
        match self {
            ReturnSpec::Lambda(l) => lambda_ok(*l),
            ReturnSpec::NStep(n) => positive("n", *n),
            ReturnSpec::SparseLambda { lambda, period } => {
                lambda_ok(*lambda)?;
                positive("m", *period)
            }
            ReturnSpec::TruncatedLambda { lambda, len } => {
                lambda_ok(*lambda)?;
                len.map_or(Ok(()), |n| positive("N", n))
            }
            ReturnSpec::DelayedPulse(_) | ReturnSpec::Custom { .. } => Ok(()),
        }
    }

    /// TD-error weights of the estimator.
    pub fn impulse(&self) -> TdWeights {
        let seq = match self {
            ReturnSpec::Lambda(l) => geometric_from_one(*l),
            ReturnSpec::NStep(n) => WeightSeq::finite(vec![1.0; *n]),
            // h_i = λ^⌊(i+m-1)/m⌋: a leading 1, then blocks of m equal entries.
            ReturnSpec::SparseLambda { lambda, period } => {
                WeightSeq::new(vec![1.0], Tail::periodic(*lambda, vec![*lambda; *period])).expect("λ validated")
            }
            ReturnSpec::TruncatedLambda { lambda, len: None } => geometric_from_one(*lambda),
            ReturnSpec::TruncatedLambda { lambda, len: Some(n) } => {
                WeightSeq::finite((0..*n).map(|i| pow(*lambda, i)).collect())
            }
            ReturnSpec::DelayedPulse(tau) => {
                let mut prefix = vec![0.0; *tau + 1];
                prefix[*tau] = 1.0;
                WeightSeq::finite(prefix)
            }
            ReturnSpec::Custom { weights, .. } => return weights.clone(),
        };
        TdWeights::new(seq)
    }

    /// Contraction modulus from the family's closed form.
    pub fn modulus_closed_form(&self, discount: f64) -> Result<f64> {
        let g = discount;
        Ok(match self {
            ReturnSpec::Lambda(l) | ReturnSpec::TruncatedLambda { lambda: l, len: None } => {
                g * (1.0 - l) / (1.0 - g * l)
            }
            ReturnSpec::NStep(n) => pow(g, *n),
            ReturnSpec::SparseLambda { lambda, period } => g * (1.0 - lambda) / (1.0 - pow(g, *period) * lambda),
            ReturnSpec::TruncatedLambda { lambda, len: Some(n) } => {
                ((1.0 - g) * pow(g * lambda, *n) + g * (1.0 - lambda)) / (1.0 - g * lambda)
            }
            other => return Err(Error::UnsupportedFamily(other.to_string())),
        })
    }
}

fn geometric_from_one(ratio: f64) -> WeightSeq {
    WeightSeq::new(vec![], Tail::geometric(ratio, 1.0)).expect("λ validated")
}

fn num<T: FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("`{s}` is not a valid number")))
}

impl FromStr for ReturnSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReturnSpec::parse(s)
    }
}

impl fmt::Display for ReturnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReturnSpec::Lambda(l) => write!(f, "lambda:{l}"),
            ReturnSpec::NStep(n) => write!(f, "nstep:{n}"),
            ReturnSpec::SparseLambda { lambda, period } => write!(f, "sparse:{lambda}:{period}"),
            ReturnSpec::TruncatedLambda { lambda, len: None } => write!(f, "trunc:{lambda}:inf"),
            ReturnSpec::TruncatedLambda { lambda, len: Some(n) } => write!(f, "trunc:{lambda}:{n}"),
            ReturnSpec::DelayedPulse(t) => write!(f, "pulse:{t}"),
            ReturnSpec::Custom { source, .. } => f.write_str(source),
        }
    }
}

/// Parses custom TD-error weights: whitespace-separated prefix values
/// followed by an optional tail clause, either `zero` or
/// `geom <ratio> <c0> [c1 ...]` (a periodic tail when several
/// coefficients are given).
pub fn parse_weights_text(text: &str) -> Result<TdWeights> {
    let tokens: Vec<&str> = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(str::split_whitespace)
        .collect();
    let split = tokens
        .iter()
        .position(|t| *t == "zero" || *t == "geom")
        .unwrap_or(tokens.len());
    let prefix = tokens[..split].iter().map(|t| num(t)).collect::<Result<Vec<f64>>>()?;
    let tail = match &tokens[split..] {
        [] | ["zero"] => Tail::Zero,
        ["geom", ratio, coeffs @ ..] if !coeffs.is_empty() => Tail::periodic(
            num(ratio)?,
            coeffs.iter().map(|t| num(t)).collect::<Result<Vec<f64>>>()?,
        ),
        _ => return Err(Error::Parse("tail must be `zero` or `geom <ratio> <coef>...`".into())),
    };
    Ok(TdWeights::new(WeightSeq::new(prefix, tail)?))
}
