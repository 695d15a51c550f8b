use asaw::greens::{asymptotic_ratio, convolution_decay_slope};
use asaw::lattice::Point;
use asaw::stepdist::{make_spread_out, Shape};

#[test]
fn spread_out_five_dimensional_ratios() {
    let d = make_spread_out(5, 3, Shape::Uniform).unwrap();
    let mut prev = f64::INFINITY;
    for r in [10, 15, 20] {
        let (ratio, est) = asymptotic_ratio(&d, &Point::new(&[r, 0, 0, 0, 0])).unwrap();
        assert!(est.value > 0.0);
        assert!((ratio - 1.0).abs() <= 0.2, "r={r} ratio={ratio}");
        assert!((ratio - 1.0).abs() < prev);
        prev = (ratio - 1.0).abs();
    }
}

#[test]
fn convolution_of_powers_decays_like_the_sum_rule() {
    let slope = convolution_decay_slope(5, 3.0, 12, &[2, 3, 4, 5, 6]);
    assert!((slope + 1.0).abs() <= 0.3, "slope {slope}");
}
