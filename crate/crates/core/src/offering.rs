//! Hourly day-ahead offering curves read off a solved decision.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, VppError};
use crate::scenario::ScenarioTree;
use crate::vpp::{prices_equal, VppDecision};

/// Offers at one price may differ by this much (MW) and still count as equal.
pub const QUANTITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OfferPoint {
    pub price: f64,
    pub quantity: f64,
}

/// Price–quantity steps for one hour (0-based), prices ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OfferingCurve {
    pub hour: usize,
    pub points: Vec<OfferPoint>,
}

impl OfferingCurve {
    /// Quantity offered at a price that appears on the curve.
    pub fn quantity_at(&self, price: f64) -> Option<f64> {
        self.points.iter().find(|p| prices_equal(p.price, price)).map(|p| p.quantity)
    }

    /// Quantity cleared at `price` when the curve is read as a step bid:
    /// the offer of the highest listed price not above `price`, zero below
    /// the first step.
    pub fn cleared_quantity(&self, price: f64) -> f64 {
        self.points
            .iter()
            .take_while(|p| p.price <= price || prices_equal(p.price, price))
            .last()
            .map_or(0.0, |p| p.quantity)
    }
}

/// Checks that prices strictly increase and quantities never fall.
pub fn validate_offering_curve(curve: &OfferingCurve) -> Result<()> {
    let corrupt = |reason: String| VppError::CorruptDecision { hour: curve.hour + 1, reason };
    if curve.points.is_empty() {
        return Err(corrupt("empty curve".into()));
    }
    for p in &curve.points {
        if !p.price.is_finite() || !p.quantity.is_finite() {
            return Err(corrupt(format!("non-finite point ({}, {})", p.price, p.quantity)));
        }
    }
    for w in curve.points.windows(2) {
        if !(w[1].price > w[0].price) || prices_equal(w[0].price, w[1].price) {
            return Err(corrupt(format!("prices not strictly increasing: {} then {}", w[0].price, w[1].price)));
        }
        if w[1].quantity < w[0].quantity - QUANTITY_TOL {
            return Err(corrupt(format!(
                "offer falls from {} MW at {} $/MWh to {} MW at {} $/MWh",
                w[0].quantity, w[0].price, w[1].quantity, w[1].price
            )));
        }
    }
    Ok(())
}

/// Builds the curve of `hour` from `(price, quantity)` pairs, one per scenario.
pub fn curve_from_offers(hour: usize, offers: &[(f64, f64)]) -> Result<OfferingCurve> {
    let mut sorted = offers.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut points: Vec<OfferPoint> = Vec::new();
    for (price, quantity) in sorted {
        match points.last() {
            Some(last) if prices_equal(last.price, price) => {
                if (last.quantity - quantity).abs() > QUANTITY_TOL {
                    return Err(VppError::CorruptDecision {
                        hour: hour + 1,
                        reason: format!("offers {} and {} MW at the same price {}", last.quantity, quantity, price),
                    });
                }
            }
            _ => points.push(OfferPoint { price, quantity }),
        }
    }
    let curve = OfferingCurve { hour, points };
    validate_offering_curve(&curve)?;
    Ok(curve)
}

pub fn extract_offering_curve(decision: &VppDecision, tree: &ScenarioTree, hour: usize) -> Result<OfferingCurve> {
    if decision.scenarios.len() != tree.len() {
        return Err(VppError::InvalidDecision(format!(
            "{} scenario decisions for {} scenarios",
            decision.scenarios.len(),
            tree.len()
        )));
    }
    if hour >= tree.horizon {
        return Err(VppError::InvalidDecision(format!("hour {} outside horizon {}", hour + 1, tree.horizon)));
    }
    let offers: Vec<(f64, f64)> = tree
        .scenarios
        .iter()
        .zip(&decision.scenarios)
        .map(|(s, d)| (s.da_price[hour], d.da[hour]))
        .collect();
    curve_from_offers(hour, &offers)
}

/// Curves for every hour of the horizon.
pub fn extract_offering_curves(decision: &VppDecision, tree: &ScenarioTree) -> Result<Vec<OfferingCurve>> {
    (0..tree.horizon).into_par_iter().map(|h| extract_offering_curve(decision, tree, h)).collect()
}

fn fixed6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

/// CSV with columns `hour,price,quantity`; hours are 1-based.
pub fn write_curves_csv<W: Write>(curves: &[OfferingCurve], out: W) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        hour: usize,
        price: String,
        quantity: String,
    }
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| VppError::InternalInconsistency(format!("curve csv: {e}"));
    for c in curves {
        for p in &c.points {
            w.serialize(Row { hour: c.hour + 1, price: fixed6(p.price), quantity: fixed6(p.quantity) })
                .map_err(io)?;
        }
    }
    w.flush().map_err(|e| VppError::InternalInconsistency(format!("curve csv: {e}")))?;
    Ok(())
}
