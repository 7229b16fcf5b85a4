//! Rank paths, support ratios, and the bottleneck capacity bound.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::complex::CombinatorialComplex;
use crate::error::ComplexError;

/// Strictly increasing sequence of ranks `s_0 < s_1 < … < s_L`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct RankPath(Vec<usize>);

impl RankPath {
    pub fn new(ranks: Vec<usize>) -> Result<Self, ComplexError> {
        if ranks.is_empty() || ranks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ComplexError::InvalidPath(ranks));
        }
        Ok(Self(ranks))
    }

    /// Checks that every rank is active in `cc`.
    pub fn check(&self, cc: &CombinatorialComplex) -> Result<(), ComplexError> {
        self.0.iter().try_for_each(|&r| cc.require_active(r))
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    pub fn input_rank(&self) -> usize {
        self.0[0]
    }

    pub fn bottleneck_rank(&self) -> usize {
        *self.0.last().expect("nonempty")
    }

    /// `L`, the number of encoder steps.
    pub fn depth(&self) -> usize {
        self.0.len() - 1
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `s_0, …, s_L, …, s_0` joined with `-`.
    pub fn u_shape(&self) -> String {
        let down = self.0.iter().rev().skip(1);
        self.0
            .iter()
            .chain(down)
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("-")
    }
}

impl TryFrom<Vec<usize>> for RankPath {
    type Error = ComplexError;

    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<RankPath> for Vec<usize> {
    fn from(p: RankPath) -> Self {
        p.0
    }
}

impl fmt::Display for RankPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "{}", s.join("-"))
    }
}

/// Parses `0-1-2` (encoder form) or a full U-shaped path `0-1-2-1-0`.
impl FromStr for RankPath {
    type Err = ComplexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let ranks: Vec<usize> = s
            .split(['-', ',', '<'])
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| ComplexError::InvalidPath(Vec::new()))?;
        let peak = ranks
            .iter()
            .enumerate()
            .max_by_key(|(_, r)| **r)
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (up, down) = ranks.split_at(peak + 1);
        if !down.is_empty() {
            let expect: Vec<usize> = up.iter().rev().skip(1).copied().collect();
            if down != expect.as_slice() {
                return Err(ComplexError::InvalidPath(ranks));
            }
        }
        Self::new(up.to_vec())
    }
}

/// An exact ratio of two cell counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: usize,
    pub den: usize,
}

impl Ratio {
    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Cell counts along a rank path. Ratios are derived on demand.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportProfile {
    pub levels: Vec<(usize, usize)>,
}

impl SupportProfile {
    /// `ρ_i = n_{s_{i+1}} / n_{s_i}`.
    pub fn ratios(&self) -> Vec<Ratio> {
        self.levels
            .windows(2)
            .map(|w| Ratio {
                num: w[1].1,
                den: w[0].1,
            })
            .collect()
    }

    /// `ρ_bot = n_{s_L} / n_{s_0}`.
    pub fn bottleneck(&self) -> Ratio {
        Ratio {
            num: self.levels.last().expect("nonempty").1,
            den: self.levels[0].1,
        }
    }
}

pub fn support_profile(cc: &CombinatorialComplex, path: &RankPath) -> Result<SupportProfile, ComplexError> {
    path.check(cc)?;
    Ok(SupportProfile {
        levels: path.ranks().iter().map(|&r| (r, cc.num_cells(r))).collect(),
    })
}

/// Smallest bottleneck width satisfying `d_L ≥ d_0 / ρ_bot`, computed as
/// `⌈d_0 · n_{s_0} / n_{s_L}⌉` in integers. A non-compressing path
/// (`ρ_bot ≥ 1`) keeps `d_0`.
pub fn min_bottleneck_width(d0: usize, profile: &SupportProfile) -> usize {
    let Ratio { num, den } = profile.bottleneck();
    if num >= den {
        return d0;
    }
    (d0 * den).div_ceil(num)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(counts: &[usize]) -> SupportProfile {
        SupportProfile {
            levels: counts.iter().copied().enumerate().collect(),
        }
    }

    #[test]
    fn parse_encoder_and_u_shaped_forms() {
        assert_eq!("0-1-2".parse::<RankPath>().unwrap().ranks(), &[0, 1, 2]);
        assert_eq!("0-1-2-3-2-1-0".parse::<RankPath>().unwrap().ranks(), &[0, 1, 2, 3]);
        assert_eq!("0-2-0".parse::<RankPath>().unwrap().ranks(), &[0, 2]);
        assert!("0-1-2-0".parse::<RankPath>().is_err());
        assert!("1-0".parse::<RankPath>().is_err());
        assert_eq!("0-1-2".parse::<RankPath>().unwrap().u_shape(), "0-1-2-1-0");
    }

    #[test]
    fn texas_profile_values() {
        let p = profile(&[183, 325, 52, 1]);
        let r: Vec<f64> = p.ratios().iter().map(|r| r.value()).collect();
        assert!((r[0] - 1.78).abs() < 0.005);
        assert!((r[1] - 0.16).abs() < 0.005);
        assert_eq!(p.bottleneck(), Ratio { num: 1, den: 183 });
        assert!((p.bottleneck().value() - 0.0055).abs() < 1e-4);
        let short = profile(&[183, 325, 52]);
        assert!((short.bottleneck().value() - 0.284).abs() < 1e-3);
    }

    #[test]
    fn bottleneck_width_examples() {
        assert_eq!(min_bottleneck_width(2, &profile(&[4, 1])), 8);
        assert_eq!(min_bottleneck_width(16, &profile(&[784, 1512, 729])), 18);
        assert_eq!(min_bottleneck_width(16, &profile(&[100, 300])), 16);
        assert_eq!(min_bottleneck_width(5, &profile(&[7])), 5);
    }
}
