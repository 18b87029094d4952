//! Rank-based reward functions `R(u)`.
//!
//! The `j`-th of `n` agents to learn an item earns `R(j/n)`. Admissible
//! rewards are nonincreasing with `R(1) = 0` and `0 < R̄ = ∫₀¹ R < ∞`. Their
//! negative derivative `r = -R'` is represented as a measure: a density on
//! intervals plus point masses, so step rewards such as the threshold family
//! integrate exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RewardSpec {
    /// `R(u) = 2(1 - u)`.
    Linear,
    /// `R(u) = (1/u0) 1{u <= u0}`.
    Threshold { u0: f64 },
    /// `R ≡ 1` on `(0, 1]`. Rank-independent, so it violates the
    /// admissibility conditions; kept as a boundary case.
    Constant,
    /// Piecewise-linear interpolation of a nonincreasing table.
    Table(RewardTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    knots: Vec<f64>,
    values: Vec<f64>,
}

/// Only the first `k` of `n` recipients are paid, `n/k` each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteKReward {
    pub k: usize,
    pub per_winner: f64,
}

impl FiniteKReward {
    pub fn new(k: usize, agents: usize) -> Result<Self> {
        if k < 2 || k >= agents {
            return Err(Error::Reward(format!(
                "finite-k reward needs 2 <= k < n, got k = {k}, n = {agents}"
            )));
        }
        Ok(Self {
            k,
            per_winner: agents as f64 / k as f64,
        })
    }

    /// The same payout as a threshold reward at `u0 = k/n`.
    pub fn as_spec(&self, agents: usize) -> RewardSpec {
        RewardSpec::Threshold {
            u0: self.k as f64 / agents as f64,
        }
    }
}

/// A density piece `density` on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPiece {
    pub a: f64,
    pub b: f64,
    pub density: f64,
}

/// The measure `r(u) du` as constant-density pieces plus atoms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RMeasure {
    pub pieces: Vec<DensityPiece>,
    pub atoms: Vec<(f64, f64)>,
}

impl RMeasure {
    /// `∫ f(u, 1-u) r(du)`.
    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        let dens: f64 = self
            .pieces
            .iter()
            .map(|p| p.density * quad::integrate_unit(&f, p.a, p.b))
            .sum();
        let atoms: f64 = self.atoms.iter().map(|&(u, m)| m * f(u, 1.0 - u)).sum();
        dens + atoms
    }

    /// Mass of `r` on `(a, b]`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let dens: f64 = self
            .pieces
            .iter()
            .map(|p| p.density * (b.min(p.b) - a.max(p.a)).max(0.0))
            .sum();
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|&&(u, _)| u > a && u <= b)
            .map(|&(_, m)| m)
            .sum();
        dens + atoms
    }
}

impl RewardSpec {
    pub fn threshold(u0: f64) -> Result<Self> {
        if !(u0 > 0.0 && u0 <= 1.0) {
            return Err(Error::Domain {
                what: "threshold u0",
                value: u0,
                expected: "0 < u0 <= 1",
            });
        }
        Ok(Self::Threshold { u0 })
    }

    pub fn table(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        RewardTable::new(knots, values).map(Self::Table)
    }

    /// Parse a family tag with its parameter list, as used in config files.
    ///
    /// `linear`, `constant`, `threshold [u0]`, `top_k [k, n]`,
    /// `table [u_0, R_0, u_1, R_1, ...]`.
    pub fn from_tag(tag: &str, params: &[f64]) -> Result<Self> {
        let arity = |want: usize| {
            if params.len() == want {
                Ok(())
            } else {
                Err(Error::Reward(format!(
                    "family '{tag}' takes {want} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        match tag {
            "linear" => arity(0).map(|_| Self::Linear),
            "constant" => arity(0).map(|_| Self::Constant),
            "threshold" => {
                arity(1)?;
                Self::threshold(params[0])
            }
            "top_k" => {
                arity(2)?;
                let (k, n) = (params[0], params[1]);
                if k.fract() != 0.0 || n.fract() != 0.0 || k < 0.0 || n < 0.0 {
                    return Err(Error::Reward("top_k needs integer k and n".into()));
                }
                FiniteKReward::new(k as usize, n as usize).map(|f| f.as_spec(n as usize))
            }
            "table" => {
                if params.len() < 4 || params.len() % 2 != 0 {
                    return Err(Error::Reward(
                        "table takes pairs u_i, R_i (at least two knots)".into(),
                    ));
                }
                let knots = params.iter().step_by(2).copied().collect();
                let values = params.iter().skip(1).step_by(2).copied().collect();
                Self::table(knots, values)
            }
            other => Err(Error::Reward(format!("unknown reward family '{other}'"))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Threshold { .. } => "threshold",
            Self::Constant => "constant",
            Self::Table(_) => "table",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Self::Linear | Self::Constant => vec![],
            Self::Threshold { u0 } => vec![*u0],
            Self::Table(t) => t
                .knots
                .iter()
                .zip(&t.values)
                .flat_map(|(&u, &v)| [u, v])
                .collect(),
        }
    }

    /// `R(u)` for `u` in `(0, 1]`.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Domain {
                what: "u",
                value: u,
                expected: "0 < u <= 1",
            });
        }
        Ok(self.value(u))
    }

    /// `R(u)` without the domain check. Used on ranks `j/n`.
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Self::Linear => 2.0 * (1.0 - u),
            Self::Threshold { u0 } => {
                if u <= *u0 {
                    1.0 / u0
                } else {
                    0.0
                }
            }
            Self::Constant => 1.0,
            Self::Table(t) => t.value(u),
        }
    }

    /// Reward of the `rank`-th of `agents` recipients.
    #[inline]
    pub fn rank_value(&self, rank: usize, agents: usize) -> f64 {
        self.value(rank as f64 / agents as f64)
    }

    /// `R(1)`; zero for admissible families.
    pub fn terminal(&self) -> f64 {
        self.value(1.0)
    }

    /// `R̄ = ∫₀¹ R(u) du`, exact for every family.
    pub fn rbar(&self) -> Result<f64> {
        let v = match self {
            Self::Linear | Self::Threshold { .. } | Self::Constant => 1.0,
            Self::Table(t) => t.integral(),
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Reward(format!("R̄ = {v} is not in (0, ∞)")));
        }
        Ok(v)
    }

    /// True when `R` is nonincreasing, `R(1) = 0` and `R̄ > 0`.
    pub fn is_admissible(&self) -> bool {
        self.terminal() == 0.0 && self.rbar().is_ok()
    }

    /// The measure `r(u) du` with `r = -R'`.
    pub fn r_measure(&self) -> RMeasure {
        match self {
            Self::Linear => RMeasure {
                pieces: vec![DensityPiece {
                    a: 0.0,
                    b: 1.0,
                    density: 2.0,
                }],
                atoms: vec![],
            },
            Self::Threshold { u0 } => RMeasure {
                pieces: vec![],
                atoms: vec![(*u0, 1.0 / u0)],
            },
            Self::Constant => RMeasure::default(),
            Self::Table(t) => t.r_measure(),
        }
    }

    /// Points where `R` fails to be smooth, including 0 and 1.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Threshold { u0 } if *u0 < 1.0 => vec![0.0, *u0, 1.0],
            Self::Table(t) => t.knots.clone(),
            _ => vec![0.0, 1.0],
        }
    }

    /// `∫₀¹ f(u, 1-u) R(u) du`, split at the breakpoints of `R`.
    pub fn integrate_against_value<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        self.breakpoints()
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                match self {
                    // R is constant on each piece; evaluate at the midpoint
                    // so the jump at u0 is attributed correctly.
                    Self::Threshold { .. } => {
                        self.value(mid) * quad::integrate_unit(&f, w[0], w[1])
                    }
                    _ => quad::integrate_unit(|u, v| f(u, v) * self.value(u), w[0], w[1]),
                }
            })
            .sum()
    }
}

impl RewardTable {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(Error::Reward(
                "table needs at least two knots and one value per knot".into(),
            ));
        }
        if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
            return Err(Error::Reward(
                "table knots must start at 0 and end at 1".into(),
            ));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Reward(
                "table knots must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Reward(
                "table values must be finite and nonnegative".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Reward("table values must be nonincreasing".into()));
        }
        let t = Self { knots, values };
        if t.integral() <= 0.0 {
            return Err(Error::Reward("table has zero total reward".into()));
        }
        Ok(t)
    }

    fn value(&self, u: f64) -> f64 {
        let k = &self.knots;
        let i = k.partition_point(|&x| x <= u).clamp(1, k.len() - 1) - 1;
        let s = ((u - k[i]) / (k[i + 1] - k[i])).clamp(0.0, 1.0);
        self.values[i] + s * (self.values[i + 1] - self.values[i])
    }

    fn integral(&self) -> f64 {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(k, v)| 0.5 * (k[1] - k[0]) * (v[0] + v[1]))
            .sum()
    }

    fn r_measure(&self) -> RMeasure {
        let pieces = self
            .knots
            .windows(2)
            .zip(self.values.windows(2))
            .filter(|(_, v)| v[0] > v[1])
            .map(|(k, v)| DensityPiece {
                a: k[0],
                b: k[1],
                density: (v[0] - v[1]) / (k[1] - k[0]),
            })
            .collect();
        RMeasure {
            pieces,
            atoms: vec![],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn families() -> Vec<RewardSpec> {
        vec![
            RewardSpec::Linear,
            RewardSpec::threshold(0.2).unwrap(),
            RewardSpec::threshold(0.75).unwrap(),
            RewardSpec::table(vec![0.0, 0.3, 1.0], vec![3.0, 1.0, 0.0]).unwrap(),
        ]
    }

    #[test]
    fn eval_examples() {
        assert_eq!(RewardSpec::Linear.eval(0.5).unwrap(), 1.0);
        assert_eq!(RewardSpec::threshold(0.2).unwrap().eval(0.1).unwrap(), 5.0);
        for f in families() {
            assert_eq!(f.eval(1.0).unwrap(), 0.0, "{f:?}");
        }
        assert!(RewardSpec::Linear.eval(0.0).is_err());
        assert!(RewardSpec::Linear.eval(1.5).is_err());
        assert!(RewardSpec::Linear.eval(f64::NAN).is_err());
    }

    #[test]
    fn rbar_examples() {
        assert_eq!(RewardSpec::Linear.rbar().unwrap(), 1.0);
        for u0 in [0.01, 0.2, 0.5, 1.0] {
            assert_eq!(RewardSpec::threshold(u0).unwrap().rbar().unwrap(), 1.0);
        }
        assert_eq!(RewardSpec::Constant.rbar().unwrap(), 1.0);
        assert!(!RewardSpec::Constant.is_admissible());
        assert!(RewardSpec::Linear.is_admissible());
    }

    #[test]
    fn integration_by_parts_holds_for_every_family() {
        for f in families() {
            let via_r = f.r_measure().integrate(|u, _| u);
            let via_value = f.integrate_against_value(|_, _| 1.0);
            assert!(
                (via_r - via_value).abs() < 1e-8,
                "{f:?}: {via_r} vs {via_value}"
            );
            assert!((via_value - f.rbar().unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn table_validation() {
        assert!(RewardSpec::table(vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 0.0]).is_err());
        assert!(RewardSpec::table(vec![0.0, 0.5], vec![1.0, 0.0]).is_err());
        assert!(RewardSpec::table(vec![0.0, 0.5, 0.5, 1.0], vec![2.0, 1.0, 1.0, 0.0]).is_err());
        assert!(RewardSpec::table(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        let t = RewardSpec::table(vec![0.0, 1.0], vec![2.0, 0.0]).unwrap();
        for u in [0.1, 0.5, 0.9] {
            assert!((t.value(u) - RewardSpec::Linear.value(u)).abs() < 1e-15);
        }
    }

    #[test]
    fn tags_round_trip() {
        for f in families() {
            let back = RewardSpec::from_tag(f.tag(), &f.params()).unwrap();
            assert_eq!(back, f);
        }
        let top = RewardSpec::from_tag("top_k", &[2.0, 100.0]).unwrap();
        assert_eq!(top, RewardSpec::Threshold { u0: 0.02 });
        assert_eq!(top.rank_value(2, 100), 50.0);
        assert_eq!(top.rank_value(3, 100), 0.0);
        assert!(RewardSpec::from_tag("threshold", &[]).is_err());
        assert!(RewardSpec::from_tag("cubic", &[]).is_err());
        assert!(FiniteKReward::new(1, 10).is_err());
        assert!(FiniteKReward::new(10, 10).is_err());
    }

    proptest! {
        #[test]
        fn eval_is_nonincreasing(a in 1e-9f64..1.0, b in 1e-9f64..1.0, u0 in 0.01f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            for f in [RewardSpec::Linear, RewardSpec::Threshold { u0 },
                      RewardSpec::table(vec![0.0, 0.2, 0.7, 1.0], vec![4.0, 2.0, 0.5, 0.0]).unwrap()] {
                prop_assert!(f.eval(lo).unwrap() >= f.eval(hi).unwrap());
            }
        }
    }
}
