use litho_smo::harness::synthetic_instance;
use litho_smo::imaging::{build_pupil, build_tcc, hopkins_aerial, socs_decompose, AbbeImager, HopkinsImager};
use litho_smo::params::{activate_mask, activate_source, MaskGrid, SourceGrid};
use litho_smo::{OpticalConfig, SmoError};
use ndarray::Array2;

mod common;
use common::{max_rel, six_fold_sum};

#[test]
fn abbe_matches_brute_force_imaging_integral() {
    let inst = synthetic_instance(16, 3, 5).unwrap();
    let cfg = &inst.cfg;
    let source = activate_source(&inst.theta_j, cfg).unwrap();
    let mask = activate_mask(&inst.theta_m, cfg).unwrap();
    let pupil = build_pupil(cfg);
    let fast = AbbeImager::new(cfg, &pupil).unwrap().aerial(&source, &mask).unwrap();
    let oracle = six_fold_sum(cfg, &source, &mask.transmission);
    let err = max_rel(&fast.intensity, &oracle);
    println!("abbe vs brute force: {err:.3e}");
    assert!(err < 1e-10, "{err:e}");
}

#[test]
fn full_rank_hopkins_equals_abbe() {
    let inst = synthetic_instance(64, 3, 2).unwrap();
    let cfg = &inst.cfg;
    let source = activate_source(&inst.theta_j, cfg).unwrap();
    let mask = activate_mask(&inst.theta_m, cfg).unwrap();
    let pupil = build_pupil(cfg);
    let abbe = AbbeImager::new(cfg, &pupil).unwrap().aerial(&source, &mask).unwrap();
    let tcc = build_tcc(&source, &pupil, cfg).unwrap();
    let full = socs_decompose(&tcc, tcc.dim());
    let hopkins = hopkins_aerial(&full, &mask).unwrap();
    let err = max_rel(&hopkins.intensity, &abbe.intensity);
    println!("hopkins(full) vs abbe: {err:.3e}");
    assert!(err < 1e-6, "{err:e}");
}

#[test]
fn truncation_error_is_non_increasing_in_q() {
    let inst = synthetic_instance(32, 3, 4).unwrap();
    let cfg = &inst.cfg;
    let source = activate_source(&inst.theta_j, cfg).unwrap();
    let mask = activate_mask(&inst.theta_m, cfg).unwrap();
    let tcc = build_tcc(&source, &build_pupil(cfg), cfg).unwrap();
    let full = hopkins_aerial(&socs_decompose(&tcc, tcc.dim()), &mask)
        .unwrap()
        .intensity;
    let mut prev = f64::INFINITY;
    for q in 0..=tcc.dim() {
        let img = hopkins_aerial(&socs_decompose(&tcc, q), &mask).unwrap().intensity;
        let dist = (&img - &full).mapv(|v| v * v).sum().sqrt();
        assert!(dist <= prev * (1.0 + 1e-9) + 1e-12, "q={q}: {dist} > {prev}");
        prev = dist;
    }
    assert!(prev < 1e-9);
}

#[test]
fn tcc_is_hermitian_psd_with_direct_trace() {
    let inst = synthetic_instance(32, 3, 6).unwrap();
    let cfg = &inst.cfg;
    let source = activate_source(&inst.theta_j, cfg).unwrap();
    let pupil = build_pupil(cfg);
    let tcc = build_tcc(&source, &pupil, cfg).unwrap();
    let scale = tcc.entries.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    assert!(tcc.hermitian_residual() < 1e-12 * scale);

    let socs = socs_decompose(&tcc, tcc.dim());
    let k1 = socs.eigenvalues[0];
    assert!(socs.eigenvalues.iter().all(|&e| e >= -1e-10 * k1));
    assert!(socs.eigenvalues.windows(2).all(|w| w[0] >= w[1]));

    // Σ_σ j_σ Σ_k |H(k + s_σ)|² / Σ_σ j_σ, summed point by point.
    let r = pupil.cutoff_bins().ceil() as i64;
    let passed = |sy: i64, sx: i64| {
        (-2 * r..=2 * r)
            .flat_map(|y| (-2 * r..=2 * r).map(move |x| (y, x)))
            .filter(|&(y, x)| pupil.at(y + sy, x + sx))
            .count() as f64
    };
    let (mut weighted, mut total) = (0.0, 0.0);
    for (idx, &j) in source.intensities.indexed_iter() {
        if j > cfg.source_threshold {
            let (sy, sx) =
                litho_smo::imaging::pupil::source_shift_bins(source.coords[idx].0, source.coords[idx].1, cfg);
            weighted += j * passed(sy, sx);
            total += j;
        }
    }
    let direct = weighted / total;
    assert!(
        (tcc.trace() - direct).abs() < 1e-9 * direct,
        "{} vs {direct}",
        tcc.trace()
    );
}

#[test]
fn single_point_tcc_has_rank_one() {
    let cfg = OpticalConfig {
        n_mask: 32,
        n_source: 3,
        pixel_nm: 16.0,
        ..OpticalConfig::desk()
    };
    let source = SourceGrid::on_axis(3).unwrap();
    let tcc = build_tcc(&source, &build_pupil(&cfg), &cfg).unwrap();
    let socs = socs_decompose(&tcc, 1);
    assert!((socs.eigenvalues[0] - tcc.trace()).abs() < 1e-10 * tcc.trace());
    assert!(socs.eigenvalues[1..].iter().all(|e| e.abs() < 1e-10 * tcc.trace()));
    assert_eq!(socs_decompose(&tcc, 0).q_used, 0);
}

#[test]
fn clear_field_images_to_one() {
    let cfg = OpticalConfig::desk();
    let pupil = build_pupil(&cfg);
    let mask = MaskGrid::new(Array2::ones((128, 128))).unwrap();
    let img = AbbeImager::new(&cfg, &pupil)
        .unwrap()
        .aerial(&SourceGrid::on_axis(cfg.n_source).unwrap(), &mask)
        .unwrap();
    assert!(img.intensity.iter().all(|&v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn dark_source_is_an_error() {
    let cfg = OpticalConfig::desk();
    let source = SourceGrid::new(Array2::zeros((cfg.n_source, cfg.n_source))).unwrap();
    let mask = MaskGrid::new(Array2::ones((128, 128))).unwrap();
    let err = AbbeImager::new(&cfg, &build_pupil(&cfg))
        .unwrap()
        .aerial(&source, &mask)
        .unwrap_err();
    assert!(matches!(err, SmoError::DarkSource { .. }));
}

#[test]
fn images_are_quadratic_in_the_mask() {
    let inst = synthetic_instance(32, 3, 8).unwrap();
    let cfg = &inst.cfg;
    let source = activate_source(&inst.theta_j, cfg).unwrap();
    let mask = activate_mask(&inst.theta_m, cfg).unwrap();
    let imager = AbbeImager::new(cfg, &build_pupil(cfg)).unwrap();
    let base = imager.aerial(&source, &mask).unwrap().intensity;
    let scaled = imager.aerial(&source, &mask.scaled(0.98)).unwrap().intensity;
    assert!(max_rel(&scaled, &(&base * (0.98 * 0.98))) < 1e-12);
}

#[test]
fn deterministic_reduction_is_width_independent() {
    let inst = synthetic_instance(64, 5, 3).unwrap();
    let cfg = &inst.cfg;
    let source = activate_source(&inst.theta_j, cfg).unwrap();
    let mask = activate_mask(&inst.theta_m, cfg).unwrap();
    let pupil = build_pupil(cfg);
    let base = AbbeImager::new(cfg, &pupil).unwrap().with_deterministic(true);
    let reference = base.clone().with_parallel_width(1).aerial(&source, &mask).unwrap();
    for width in [2, 3, 8, 64] {
        let img = base.clone().with_parallel_width(width).aerial(&source, &mask).unwrap();
        assert_eq!(img, reference, "width {width}");
        let loose = base
            .clone()
            .with_deterministic(false)
            .with_parallel_width(width)
            .aerial(&source, &mask)
            .unwrap();
        assert!(max_rel(&loose.intensity, &reference.intensity) < 1e-12);
    }
    let kernels = socs_decompose(&build_tcc(&source, &pupil, cfg).unwrap(), 12);
    let h1 = HopkinsImager::new(&kernels, 1, true).aerial(&mask).unwrap();
    let h4 = HopkinsImager::new(&kernels, 4, true).aerial(&mask).unwrap();
    assert_eq!(h1, h4);
}

#[test]
fn point_reflection_commutes_with_imaging() {
    // Reflecting the mask through the grid origin reflects the image when the
    // source is point symmetric.
    let cfg = OpticalConfig::desk();
    let n = cfg.n_mask;
    let inst = synthetic_instance(n, cfg.n_source, 9).unwrap();
    let theta_j = litho_smo::init_source_params(litho_smo::SourceTemplate::Annular, &inst.cfg).unwrap();
    let source = activate_source(&theta_j, &inst.cfg).unwrap();
    let mask = activate_mask(&inst.theta_m, &inst.cfg).unwrap();
    let reflect = |a: &Array2<f64>| Array2::from_shape_fn((n, n), |(i, j)| a[[(n - i) % n, (n - j) % n]]);
    let imager = AbbeImager::new(&inst.cfg, &build_pupil(&inst.cfg)).unwrap();
    let img = imager.aerial(&source, &mask).unwrap().intensity;
    let flipped = imager
        .aerial(&source, &MaskGrid::new(reflect(&mask.transmission)).unwrap())
        .unwrap()
        .intensity;
    assert!(max_rel(&flipped, &reflect(&img)) < 1e-10);
}
