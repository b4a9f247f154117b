//! Joint wind / price / balancing scenarios on a symmetric tree.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VppError};

const PROB_TOL: f64 = 1e-9;

/// One branch of a marginal: an hourly series with its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSeries {
    pub probability: f64,
    pub values: Vec<f64>,
}

impl WeightedSeries {
    pub fn new(probability: f64, values: Vec<f64>) -> Self {
        WeightedSeries { probability, values }
    }
}

/// Imbalance price multipliers for one balancing branch, per hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancingBranch {
    pub probability: f64,
    /// η+ (surplus settled at η+·ρ^DA)
    pub up: Vec<f64>,
    /// η− (shortfall charged at η−·ρ^DA)
    pub down: Vec<f64>,
}

impl BalancingBranch {
    /// Same ratio pair for every hour.
    pub fn constant(probability: f64, (up, down): (f64, f64), horizon: usize) -> Self {
        BalancingBranch { probability, up: vec![up; horizon], down: vec![down; horizon] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalScenarios {
    pub wind: Vec<WeightedSeries>,
    pub da_price: Vec<WeightedSeries>,
    /// Intraday branches conditional on each day-ahead branch; every DA branch
    /// has the same number of them.
    pub id_price: Vec<Vec<WeightedSeries>>,
    pub balancing: Vec<BalancingBranch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// System long: surplus is bought back below the day-ahead price.
    Excess,
    /// System short: shortfall is charged above the day-ahead price.
    Deficit,
}

/// A system-state draw: regime plus the ratio `r ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancingDraw {
    pub regime: Regime,
    pub ratio: f64,
}

/// Maps draws to `(η+, η−)` under the dual-price rule.
pub fn expand_balancing_ratios(draws: &[BalancingDraw]) -> Result<Vec<(f64, f64)>> {
    draws
        .iter()
        .map(|d| {
            if !(d.ratio >= 1.0) || !d.ratio.is_finite() {
                return Err(VppError::InvalidRatio { ratio: d.ratio });
            }
            Ok(match d.regime {
                Regime::Excess => (1.0 / d.ratio, 1.0),
                Regime::Deficit => (1.0, d.ratio),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub index: usize,
    pub probability: f64,
    pub wind: Vec<f64>,
    pub da_price: Vec<f64>,
    pub id_price: Vec<f64>,
    pub eta_up: Vec<f64>,
    pub eta_down: Vec<f64>,
    pub wind_branch: usize,
    pub da_branch: usize,
    pub id_branch: usize,
    pub balancing_branch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTree {
    pub horizon: usize,
    pub scenarios: Vec<Scenario>,
    pub n_wind: usize,
    pub n_da: usize,
    pub n_id: usize,
    pub n_balancing: usize,
}

pub(crate) fn check_probabilities(what: &str, probs: impl Iterator<Item = f64>) -> Result<()> {
    let mut sum = 0.0;
    let mut count = 0;
    for p in probs {
        if !(p > 0.0) || !p.is_finite() {
            return Err(VppError::InvalidMarginals(format!("{what}: probability {p} must be positive")));
        }
        sum += p;
        count += 1;
    }
    if count == 0 {
        return Err(VppError::InvalidMarginals(format!("{what}: no branches")));
    }
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(VppError::InvalidMarginals(format!("{what}: probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

fn check_series(what: &str, horizon: usize, values: &[f64]) -> Result<()> {
    if values.len() != horizon {
        return Err(VppError::InvalidMarginals(format!("{what}: {} hours, expected {horizon}", values.len())));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(VppError::InvalidMarginals(format!("{what}: value {v} must be finite and >= 0")));
    }
    Ok(())
}

impl MarginalScenarios {
    pub fn horizon(&self) -> usize {
        self.wind.first().map_or(0, |w| w.values.len())
    }

    pub fn validate(&self) -> Result<()> {
        let horizon = self.horizon();
        if horizon == 0 {
            return Err(VppError::InvalidMarginals("empty horizon".into()));
        }
        check_probabilities("wind", self.wind.iter().map(|s| s.probability))?;
        check_probabilities("da_price", self.da_price.iter().map(|s| s.probability))?;
        check_probabilities("balancing", self.balancing.iter().map(|s| s.probability))?;
        for (k, s) in self.wind.iter().enumerate() {
            check_series(&format!("wind branch {}", k + 1), horizon, &s.values)?;
        }
        for (k, s) in self.da_price.iter().enumerate() {
            check_series(&format!("da_price branch {}", k + 1), horizon, &s.values)?;
        }
        if self.id_price.len() != self.da_price.len() {
            return Err(VppError::InvalidMarginals(format!(
                "id_price has {} day-ahead parents, expected {}",
                self.id_price.len(),
                self.da_price.len()
            )));
        }
        let n_id = self.id_price.first().map_or(0, Vec::len);
        for (d, group) in self.id_price.iter().enumerate() {
            if group.len() != n_id {
                return Err(VppError::InvalidMarginals(format!(
                    "id_price: day-ahead branch {} has {} children, expected {n_id}",
                    d + 1,
                    group.len()
                )));
            }
            check_probabilities(&format!("id_price under da branch {}", d + 1), group.iter().map(|s| s.probability))?;
            for (i, s) in group.iter().enumerate() {
                check_series(&format!("id_price branch {}/{}", d + 1, i + 1), horizon, &s.values)?;
            }
        }
        for (b, br) in self.balancing.iter().enumerate() {
            if br.up.len() != horizon || br.down.len() != horizon {
                return Err(VppError::InvalidMarginals(format!("balancing branch {}: wrong number of hours", b + 1)));
            }
            for h in 0..horizon {
                let (u, d) = (br.up[h], br.down[h]);
                if !(0.0..=1.0).contains(&u) || !(d >= 1.0) || !d.is_finite() {
                    return Err(VppError::InvalidMarginals(format!(
                        "balancing branch {} hour {}: need 0 <= eta_up <= 1 <= eta_down, got ({u}, {d})",
                        b + 1,
                        h + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Cartesian product of the marginals, wind outermost and balancing innermost.
pub fn build_symmetric_tree(m: &MarginalScenarios) -> Result<ScenarioTree> {
    m.validate()?;
    let (n1, n2, n3, n4) = (m.wind.len(), m.da_price.len(), m.id_price[0].len(), m.balancing.len());
    let mut scenarios = Vec::with_capacity(n1 * n2 * n3 * n4);
    for (w, wind) in m.wind.iter().enumerate() {
        for (d, da) in m.da_price.iter().enumerate() {
            for (i, id) in m.id_price[d].iter().enumerate() {
                for (b, bal) in m.balancing.iter().enumerate() {
                    scenarios.push(Scenario {
                        index: scenarios.len(),
                        probability: wind.probability * da.probability * id.probability * bal.probability,
                        wind: wind.values.clone(),
                        da_price: da.values.clone(),
                        id_price: id.values.clone(),
                        eta_up: bal.up.clone(),
                        eta_down: bal.down.clone(),
                        wind_branch: w,
                        da_branch: d,
                        id_branch: i,
                        balancing_branch: b,
                    });
                }
            }
        }
    }
    Ok(ScenarioTree { horizon: m.horizon(), scenarios, n_wind: n1, n_da: n2, n_id: n3, n_balancing: n4 })
}

impl ScenarioTree {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.probability).collect()
    }

    /// Index of the intraday decision branch `(d, i)` of a scenario.
    pub fn branch_of(&self, n: usize) -> usize {
        let s = &self.scenarios[n];
        s.da_branch * self.n_id + s.id_branch
    }

    pub fn num_branches(&self) -> usize {
        self.n_da * self.n_id
    }

    /// The tree reduced to scenario `f` with probability one.
    pub fn single(&self, f: usize) -> ScenarioTree {
        let s = Scenario {
            index: 0,
            probability: 1.0,
            wind_branch: 0,
            da_branch: 0,
            id_branch: 0,
            balancing_branch: 0,
            ..self.scenarios[f].clone()
        };
        ScenarioTree { horizon: self.horizon, scenarios: vec![s], n_wind: 1, n_da: 1, n_id: 1, n_balancing: 1 }
    }
}

/// Lists every broken tree invariant; empty when the tree is valid.
pub fn validate_tree(tree: &ScenarioTree) -> Vec<String> {
    let mut out = Vec::new();
    let sum: f64 = tree.scenarios.iter().map(|s| s.probability).sum();
    if (sum - 1.0).abs() > PROB_TOL {
        out.push(format!("probability sum {sum} != 1"));
    }
    let expected = tree.n_wind * tree.n_da * tree.n_id * tree.n_balancing;
    if tree.scenarios.len() != expected {
        out.push(format!("tree has {} scenarios, expected N1*N2*N3*N4 = {expected}", tree.scenarios.len()));
    }
    for (n, s) in tree.scenarios.iter().enumerate() {
        let tag = n + 1;
        if !(s.probability > 0.0) {
            out.push(format!("scenario {tag}: probability {} must be positive", s.probability));
        }
        for (name, series) in [
            ("wind", &s.wind),
            ("da_price", &s.da_price),
            ("id_price", &s.id_price),
            ("eta_up", &s.eta_up),
            ("eta_down", &s.eta_down),
        ] {
            if series.len() != tree.horizon {
                out.push(format!("scenario {tag}: {name} has {} hours, expected {}", series.len(), tree.horizon));
            }
        }
        for (name, series) in [("wind", &s.wind), ("da_price", &s.da_price), ("id_price", &s.id_price)] {
            if series.iter().any(|v| !(*v >= 0.0)) {
                out.push(format!("scenario {tag}: negative {name}"));
            }
        }
        for (h, (&u, &d)) in s.eta_up.iter().zip(&s.eta_down).enumerate() {
            if !(0.0..=1.0).contains(&u) || !(d >= 1.0) {
                out.push(format!("scenario {tag} hour {}: need eta_up <= 1 <= eta_down, got ({u}, {d})", h + 1));
            } else if u != 1.0 && d != 1.0 {
                out.push(format!("scenario {tag} hour {}: neither side settles at the day-ahead price ({u}, {d})", h + 1));
            }
        }
        if s.da_branch >= tree.n_da.max(1) || s.id_branch >= tree.n_id.max(1) {
            out.push(format!("scenario {tag}: branch index out of range"));
        }
    }
    for (a, sa) in tree.scenarios.iter().enumerate() {
        for sb in &tree.scenarios[a + 1..] {
            if sa.da_branch == sb.da_branch && sa.da_price != sb.da_price {
                out.push(format!(
                    "scenarios {} and {} share day-ahead branch {} but differ in da_price",
                    sa.index + 1,
                    sb.index + 1,
                    sa.da_branch + 1
                ));
            }
            if sa.da_branch == sb.da_branch && sa.id_branch == sb.id_branch && sa.id_price != sb.id_price {
                out.push(format!(
                    "scenarios {} and {} share intraday branch ({}, {}) but differ in id_price",
                    sa.index + 1,
                    sb.index + 1,
                    sa.da_branch + 1,
                    sa.id_branch + 1
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn marginals(wind: &[f64], da: &[f64]) -> MarginalScenarios {
        MarginalScenarios {
            wind: wind.iter().map(|&p| WeightedSeries::new(p, vec![5.0, 6.0])).collect(),
            da_price: da.iter().enumerate().map(|(k, &p)| WeightedSeries::new(p, vec![30.0 + k as f64, 40.0])).collect(),
            id_price: da.iter().map(|_| vec![WeightedSeries::new(1.0, vec![31.0, 41.0])]).collect(),
            balancing: vec![BalancingBranch::constant(1.0, (1.0, 1.0), 2)],
        }
    }

    #[test]
    fn degenerate_tree() {
        let t = build_symmetric_tree(&marginals(&[1.0], &[1.0])).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.scenarios[0].probability, 1.0);
    }

    #[test]
    fn product_rule() {
        let t = build_symmetric_tree(&marginals(&[0.5, 0.5], &[0.6, 0.4])).unwrap();
        let p: Vec<f64> = t.probabilities();
        assert_eq!(t.len(), 4);
        for (got, want) in p.iter().zip([0.3, 0.2, 0.3, 0.2]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(validate_tree(&t).is_empty());
    }

    #[test]
    fn rejects_unnormalized_marginals() {
        let err = build_symmetric_tree(&marginals(&[0.5, 0.4], &[1.0])).unwrap_err();
        assert!(matches!(err, VppError::InvalidMarginals(_)));
    }

    #[test]
    fn regime_ratios() {
        let draws = [
            BalancingDraw { regime: Regime::Deficit, ratio: 1.25 },
            BalancingDraw { regime: Regime::Excess, ratio: 1.25 },
            BalancingDraw { regime: Regime::Excess, ratio: 1.0 },
            BalancingDraw { regime: Regime::Deficit, ratio: 1.0 },
        ];
        assert_eq!(expand_balancing_ratios(&draws).unwrap(), vec![(1.0, 1.25), (0.8, 1.0), (1.0, 1.0), (1.0, 1.0)]);
        let bad = [BalancingDraw { regime: Regime::Deficit, ratio: 0.9 }];
        assert!(matches!(expand_balancing_ratios(&bad), Err(VppError::InvalidRatio { .. })));
    }

    #[test]
    fn validator_reports_violations() {
        let mut t = build_symmetric_tree(&marginals(&[0.5, 0.5], &[0.6, 0.4])).unwrap();
        for s in &mut t.scenarios {
            s.probability *= 0.5;
        }
        let v = validate_tree(&t);
        assert!(v.iter().any(|m| m.contains("probability sum 0.5")), "{v:?}");

        let mut t = build_symmetric_tree(&marginals(&[0.5, 0.5], &[0.6, 0.4])).unwrap();
        t.scenarios[2].da_price[0] += 1.0;
        assert!(validate_tree(&t).iter().any(|m| m.contains("differ in da_price")));
    }
}
