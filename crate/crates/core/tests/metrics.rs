use litho_smo::harness::suite_target;
use litho_smo::imaging::ResistImage;
use litho_smo::metrics::{
    binarize, epe_report, evaluate_print, metric_epe, metric_l2, metric_pvb, BinaryImage, EpeSpec,
};
use litho_smo::target::Orientation;
use litho_smo::{init_mask_params, init_source_params, OpticalConfig, SmoModel, SourceTemplate, TargetPattern};
use ndarray::Array2;
use proptest::prelude::*;

fn rect(n: usize, rows: (usize, usize), cols: (usize, usize)) -> Array2<u8> {
    Array2::from_shape_fn((n, n), |(i, j)| {
        u8::from((rows.0..rows.1).contains(&i) && (cols.0..cols.1).contains(&j))
    })
}

/// Points placed on an edge of `len_nm` at 40 nm spacing, centered, with
/// at least one point.
fn expected_points(len_nm: f64) -> usize {
    ((len_nm / 40.0).floor() as usize).max(1)
}

// 2 nm pixels; target 160 nm tall (80 px) and 120 nm wide (60 px).
const N: usize = 128;
const PIXEL: f64 = 2.0;

fn fixture_target() -> TargetPattern {
    TargetPattern::from_pixels(rect(N, (20, 100), (30, 90)), PIXEL).unwrap()
}

#[test]
fn one_edge_shifted_by_20nm_violates_at_every_point_on_it() {
    let target = fixture_target();
    let print = BinaryImage::new(rect(N, (20, 100), (30, 100))).unwrap();
    let report = epe_report(&print, &target, &EpeSpec::default()).unwrap();
    let right = target
        .edge_segments
        .iter()
        .position(|s| s.orientation == Orientation::Vertical && s.inside_before)
        .unwrap();
    let on_right: Vec<_> = report.samples.iter().filter(|s| s.segment == right).collect();
    assert_eq!(on_right.len(), expected_points(160.0));
    assert!(on_right.iter().all(|s| s.displacement_nm == 20.0));
    assert_eq!(report.violations, expected_points(160.0));
}

#[test]
fn dilation_by_20nm_violates_everywhere() {
    let target = fixture_target();
    let print = BinaryImage::new(rect(N, (10, 110), (20, 100))).unwrap();
    let expected = 2 * expected_points(160.0) + 2 * expected_points(120.0);
    assert_eq!(metric_epe(&print, &target, &EpeSpec::default()).unwrap(), expected);
}

#[test]
fn shift_of_10nm_stays_within_threshold() {
    let target = fixture_target();
    let print = BinaryImage::new(rect(N, (20, 100), (30, 95))).unwrap();
    let report = epe_report(&print, &target, &EpeSpec::default()).unwrap();
    assert_eq!(report.violations, 0);
    assert!(report.mean_abs_nm > 0.0);
}

#[test]
fn pulled_back_edge_counts_as_negative_displacement() {
    let target = fixture_target();
    let print = BinaryImage::new(rect(N, (20, 100), (40, 90))).unwrap();
    let report = epe_report(&print, &target, &EpeSpec::default()).unwrap();
    assert_eq!(report.violations, expected_points(160.0));
    assert!(report.samples.iter().any(|s| s.displacement_nm == -20.0));
}

#[test]
fn perfect_print_and_pvb_at_unit_dose_are_zero() {
    let cfg = OpticalConfig {
        dose_min: 1.0,
        dose_max: 1.0,
        ..OpticalConfig::desk()
    };
    let target = suite_target("t_junction", &cfg, 0).unwrap().unwrap();
    let model = SmoModel::new(&cfg, &target).unwrap();
    let tj = init_source_params(SourceTemplate::Annular, &cfg).unwrap();
    let tm = init_mask_params(&target, &cfg).unwrap();
    let eval = model.evaluate(&tj, &tm).unwrap();
    let w = &eval.window;
    let m = evaluate_print(&w.nominal, &w.min, &w.max, &target, &EpeSpec::default()).unwrap();
    assert_eq!(m.pvb_nm2, 0.0);
    assert_eq!(
        metric_epe(&BinaryImage::from(&target), &target, &EpeSpec::default()).unwrap(),
        0
    );
}

fn binary(n: usize) -> impl Strategy<Value = Array2<u8>> {
    proptest::collection::vec(0u8..=1, n * n).prop_map(move |v| Array2::from_shape_vec((n, n), v).unwrap())
}

proptest! {
    #[test]
    fn binarize_matches_a_loop(values in proptest::collection::vec(0.0f64..1.0, 64), cut in 0.05f64..0.95) {
        let z = ResistImage { values: Array2::from_shape_vec((8, 8), values.clone()).unwrap() };
        let b = binarize(&z, cut).unwrap();
        for (k, v) in values.iter().enumerate() {
            prop_assert_eq!(b.pixels[[k / 8, k % 8]], u8::from(*v >= cut));
        }
    }

    #[test]
    fn l2_is_a_metric(a in binary(10), b in binary(10), c in binary(10)) {
        let t = |p: &Array2<u8>| TargetPattern::from_pixels(p.clone(), 3.0).unwrap();
        let d = |x: &Array2<u8>, y: &Array2<u8>| metric_l2(&BinaryImage::new(x.clone()).unwrap(), &t(y)).unwrap();
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
    }

    #[test]
    fn pvb_is_symmetric(a in binary(10), b in binary(10)) {
        let (a, b) = (BinaryImage::new(a).unwrap(), BinaryImage::new(b).unwrap());
        prop_assert_eq!(metric_pvb(&a, &b, 2.0).unwrap(), metric_pvb(&b, &a, 2.0).unwrap());
        prop_assert_eq!(metric_pvb(&a, &a, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn epe_is_translation_invariant(
        r0 in 12usize..20, h in 6usize..20, c0 in 12usize..20, w in 6usize..20,
        grow in proptest::array::uniform4(-3i32..=3),
        dy in 0usize..8, dx in 0usize..8,
    ) {
        let n = 64;
        let t = rect(n, (r0, r0 + h), (c0, c0 + w));
        let edge = |base: usize, g: i32| (base as i32 + g) as usize;
        let p = rect(n, (edge(r0, -grow[0]), edge(r0 + h, grow[1])), (edge(c0, -grow[2]), edge(c0 + w, grow[3])));
        let shift = |a: &Array2<u8>| Array2::from_shape_fn((n, n), |(i, j)| {
            if i >= dy && j >= dx { a[[i - dy, j - dx]] } else { 0 }
        });
        let spec = EpeSpec { sample_step_nm: 12.0, threshold_nm: 7.0 };
        let base = epe_report(&BinaryImage::new(p.clone()).unwrap(), &TargetPattern::from_pixels(t.clone(), 2.0).unwrap(), &spec).unwrap();
        let moved = epe_report(&BinaryImage::new(shift(&p)).unwrap(), &TargetPattern::from_pixels(shift(&t), 2.0).unwrap(), &spec).unwrap();
        prop_assert_eq!(base.violations, moved.violations);
        prop_assert_eq!(base.mean_abs_nm, moved.mean_abs_nm);
    }
}
