use proptest::prelude::*;
use vpp_core::offering::*;
use vpp_core::VppError;

/// Distinct ascending prices with nondecreasing quantities, plus offers that
/// hit every level at least once in shuffled order.
fn monotone_offers() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    (1usize..7)
        .prop_flat_map(|k| {
            (
                prop::collection::vec((0.5f64..20.0, 0.0f64..10.0), k),
                0.0f64..30.0,
                prop::collection::vec(0..k, 0..12),
            )
        })
        .prop_flat_map(|(steps, base, extra)| {
            let mut levels = Vec::new();
            let (mut price, mut q) = (5.0, base);
            for (dp, dq) in steps {
                price += dp;
                q += dq;
                levels.push((price, q));
            }
            let mut offers = levels.clone();
            offers.extend(extra.iter().map(|&i| levels[i]));
            (Just(levels), Just(offers).prop_shuffle())
        })
}

proptest! {
    #[test]
    fn curves_round_trip_their_offers((levels, offers) in monotone_offers(), hour in 0usize..24) {
        let c = curve_from_offers(hour, &offers).unwrap();
        prop_assert!(validate_offering_curve(&c).is_ok());
        let pts: Vec<(f64, f64)> = c.points.iter().map(|p| (p.price, p.quantity)).collect();
        prop_assert_eq!(pts, levels);
        for &(price, q) in &offers {
            prop_assert_eq!(c.quantity_at(price), Some(q));
            prop_assert_eq!(c.cleared_quantity(price), q);
        }
        for w in c.points.windows(2) {
            prop_assert!(w[1].quantity >= w[0].quantity);
        }
    }

    #[test]
    fn a_falling_step_is_detected((levels, mut offers) in monotone_offers(), pick in any::<prop::sample::Index>(), drop in 0.01f64..5.0) {
        prop_assume!(levels.len() >= 2);
        let j = 1 + pick.index(levels.len() - 1);
        let below = levels[j - 1].1 - drop;
        for o in offers.iter_mut().filter(|o| o.0 == levels[j].0) {
            o.1 = below;
        }
        let err = curve_from_offers(5, &offers).unwrap_err();
        prop_assert!(matches!(err, VppError::CorruptDecision { hour: 6, .. }), "{}", err);
    }

    #[test]
    fn split_offers_at_one_price_are_detected((levels, mut offers) in monotone_offers(), bump in 0.01f64..5.0) {
        let (p, q) = levels[0];
        offers.push((p, q + bump));
        prop_assert!(curve_from_offers(0, &offers).is_err());
    }
}

#[test]
fn cleared_quantity_reads_steps() {
    let c = curve_from_offers(1, &[(10.0, 21.0), (19.0, 22.0), (25.0, 24.0)]).unwrap();
    assert_eq!(c.cleared_quantity(9.99), 0.0);
    assert_eq!(c.cleared_quantity(10.0), 21.0);
    assert_eq!(c.cleared_quantity(18.0), 21.0);
    assert_eq!(c.cleared_quantity(100.0), 24.0);
    assert_eq!(c.quantity_at(18.0), None);
}

#[test]
fn csv_uses_six_decimals_and_one_based_hours() {
    let curves = vec![
        curve_from_offers(0, &[(10.0, -0.0), (12.5, 3.0)]).unwrap(),
        curve_from_offers(1, &[(7.25, 1.0 / 3.0)]).unwrap(),
    ];
    let mut out = Vec::new();
    write_curves_csv(&curves, &mut out).unwrap();
    assert_eq!(
        String::from_utf8(out).unwrap(),
        "hour,price,quantity\n1,10.000000,0.000000\n1,12.500000,3.000000\n2,7.250000,0.333333\n"
    );
}

#[test]
fn empty_and_non_finite_curves_fail_validation() {
    assert!(validate_offering_curve(&OfferingCurve { hour: 0, points: vec![] }).is_err());
    let nan = OfferingCurve { hour: 0, points: vec![OfferPoint { price: 10.0, quantity: f64::NAN }] };
    assert!(validate_offering_curve(&nan).is_err());
}
