use proptest::prelude::*;
use rockfrag::cwt::{transform, WaveletSpec};
use rockfrag::features::{
    beta_from, scale_response, zeta_from, EndReason, ExcavationWindow, FeatureKind, FeatureRecord, SignalSource,
};
use rockfrag::granulometry::{fit_rr, rr_cdf, rr_mean, FitConstraints, RosinRammlerModel, SieveTable};
use rockfrag::relative::{classify, relative_size, Confidence, ReferenceCalibration, SizeClass};
use rockfrag::stats::trapz_clipped;
use rockfrag::telemetry::{derivative, lift_force, Channel, CylinderGeometry};

fn channel(samples: Vec<f64>, rate: f64) -> Channel {
    Channel::new("x", rate, 0.0, samples).unwrap()
}

fn signal(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, len)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_of_constant_is_zero(c in -1e3f64..1e3, n in 3usize..200, rate in 1.0f64..2000.0) {
        let d = derivative(&channel(vec![c; n], rate)).unwrap();
        prop_assert!(d.samples.iter().all(|&v| v == 0.0));
        prop_assert_eq!(d.rate_hz, rate);
    }

    #[test]
    fn derivative_is_linear(x in signal(64), y in signal(64), a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let dx = derivative(&channel(x.clone(), 100.0)).unwrap();
        let dy = derivative(&channel(y.clone(), 100.0)).unwrap();
        let dc = derivative(&channel(combo, 100.0)).unwrap();
        // round-off bound: rate × input magnitude × coefficients
        let tol = 1e-12 * 100.0 * 100.0 * (a.abs() + b.abs() + 1.0);
        for k in 0..64 {
            prop_assert!((dc.samples[k] - (a * dx.samples[k] + b * dy.samples[k])).abs() <= tol);
        }
    }

    #[test]
    fn lift_force_is_linear_in_both_pressures(
        pb in signal(16), pr in signal(16), pb2 in signal(16), a in -5.0f64..5.0,
    ) {
        let g = CylinderGeometry::default();
        let f1 = lift_force(&channel(pb.clone(), 20.0), &channel(pr.clone(), 20.0), &g).unwrap();
        let f2 = lift_force(&channel(pb2.clone(), 20.0), &channel(vec![0.0; 16], 20.0), &g).unwrap();
        let sum: Vec<f64> = pb.iter().zip(&pb2).map(|(p, q)| a * p + q).collect();
        let scaled_rod: Vec<f64> = pr.iter().map(|p| a * p).collect();
        let f3 = lift_force(&channel(sum, 20.0), &channel(scaled_rod, 20.0), &g).unwrap();
        let tol = 1e-12 * 1e7 * (a.abs() + 1.0);
        for k in 0..16 {
            prop_assert!((f3.samples[k] - (a * f1.samples[k] + f2.samples[k])).abs() <= tol);
        }
        let zero = lift_force(&channel(vec![0.0; 16], 20.0), &channel(vec![0.0; 16], 20.0), &g).unwrap();
        prop_assert!(zero.samples.iter().all(|&v| v == 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cwt_magnitude_scales_with_abs_amplitude(x in signal(256), a in -20.0f64..20.0) {
        let spec = WaveletSpec::default();
        let ch = channel(x.clone(), 500.0);
        let scaled = channel(x.iter().map(|v| a * v).collect(), 500.0);
        let w = (0.0, ch.end_time());
        let s1 = transform(&ch, w, &spec).unwrap();
        let s2 = transform(&scaled, w, &spec).unwrap();
        let peak = s1.coeffs_mag.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
        for (r1, r2) in s1.coeffs_mag.iter().zip(&s2.coeffs_mag) {
            for (v1, v2) in r1.iter().zip(r2) {
                prop_assert!(v1.is_finite() && *v1 >= 0.0);
                prop_assert!((v2 - a.abs() * v1).abs() <= 1e-9 * (1.0 + a.abs()) * peak);
            }
        }
    }

    #[test]
    fn features_are_homogeneous_and_mass_normalized(x in signal(400), c in 0.1f64..50.0, m in 10.0f64..1e4) {
        let spec = WaveletSpec::default();
        let ch = channel(x.clone(), 200.0);
        let scaled = channel(x.iter().map(|v| c * v).collect(), 200.0);
        let w = (0.0, ch.end_time());
        let win = ExcavationWindow::new(0.2, 1.8, EndReason::TimeCap).unwrap();
        let s1 = transform(&ch, w, &spec).unwrap();
        let s2 = transform(&scaled, w, &spec).unwrap();
        let r1 = scale_response(&s1, &win, m).unwrap();
        let r2 = scale_response(&s2, &win, m).unwrap();
        let r_unit = scale_response(&s1, &win, 1.0).unwrap();
        let band = (r1.freqs_hz[0], r1.freqs_hz[r1.freqs_hz.len() - 1]);
        let z1 = zeta_from(&r1, &win, band, 0.0).unwrap().value;
        let z2 = zeta_from(&r2, &win, band, 0.0).unwrap().value;
        let z_unit = zeta_from(&r_unit, &win, band, 0.0).unwrap().value;
        prop_assert!(close(z2, c * z1, 1e-9));
        prop_assert!(close(beta_from(&r2, &win).value, c * beta_from(&r1, &win).value, 1e-9));
        prop_assert!(close(z1 * m, z_unit, 1e-12));

        // β and ζ come from the same per-scale values
        let max = r1.values.iter().copied().fold(0.0, f64::max);
        prop_assert_eq!(beta_from(&r1, &win).value, max);
        prop_assert_eq!(z1, trapz_clipped(&r1.freqs_hz, &r1.values, band.0, band.1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unnormalized_integral_grows_with_the_window(
        row in prop::collection::vec(0.0f64..10.0, 50),
        a1 in 0.0f64..0.2, a2 in 0.3f64..0.49, ext in 0.0f64..0.2,
    ) {
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.01).collect();
        let inner = trapz_clipped(&times, &row, a1, a2);
        let outer = trapz_clipped(&times, &row, (a1 - ext).max(0.0), a2 + ext);
        prop_assert!(outer >= inner - 1e-12);
    }

    #[test]
    fn rr_cdf_monotone_and_mean_grows_with_xc(n in 0.3f64..3.0, xc in 1.0f64..500.0, x in 0.01f64..1000.0, dx in 0.001f64..100.0, k in 1.001f64..5.0) {
        let m = RosinRammlerModel::new(n, xc).unwrap();
        prop_assert!(rr_cdf(&m, x + dx).unwrap() >= rr_cdf(&m, x).unwrap());
        let bigger = RosinRammlerModel::new(n, xc * k).unwrap();
        prop_assert!(rr_mean(&bigger) > rr_mean(&m));
    }

    #[test]
    fn fit_is_scale_equivariant_and_recovers_exact_data(n in 0.4f64..2.5, xc in 2.0f64..200.0, c in 0.1f64..10.0) {
        let model = RosinRammlerModel::new(n, xc).unwrap();
        // sizes placed at chosen cumulative fractions so the fit window is populated
        let ps = [0.05, 0.1, 0.2, 0.3, 0.45, 0.6, 0.75, 0.85, 0.93, 0.98, 0.995];
        let sizes: Vec<f64> = ps.iter().map(|&p| model.quantile(p).unwrap()).collect();
        let pct: Vec<f64> = sizes.iter().map(|&x| 100.0 * rr_cdf(&model, x).unwrap()).collect();
        let t1 = SieveTable::new("a", 1.0, sizes.clone(), pct.clone()).unwrap();
        let t2 = SieveTable::new("b", 1.0, sizes.iter().map(|x| c * x).collect(), pct).unwrap();
        let f1 = fit_rr(&t1, &FitConstraints::default()).unwrap();
        let f2 = fit_rr(&t2, &FitConstraints::default()).unwrap();
        prop_assert!(close(f1.model.n, n, 1e-6));
        prop_assert!(close(f1.model.x_c_mm, xc, 1e-6));
        prop_assert!(close(f2.model.n, f1.model.n, 1e-9));
        prop_assert!(close(f2.model.x_c_mm, c * f1.model.x_c_mm, 1e-9));
    }
}

fn zeta_row(value: f64, pile: &str) -> FeatureRecord {
    FeatureRecord {
        trial_id: format!("{pile}-{value}"),
        pile_label: pile.into(),
        operator: "A".into(),
        source: SignalSource::Bucket,
        epoch: 1,
        kind: FeatureKind::Zeta,
        value,
        alpha1_s: 0.0,
        alpha2_s: 1.0,
        end_reason: EndReason::TimeCap,
        f_min: 4.0,
        f_max: 500.0,
    }
}

fn confidence() -> impl Strategy<Value = Confidence> {
    prop::sample::select(Confidence::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn classes_survive_common_rescaling(mu in 0.01f64..10.0, sigma in 0.001f64..5.0, z in 0.0f64..20.0, c in 0.01f64..100.0, p in confidence()) {
        let cal = ReferenceCalibration::from_stats(SignalSource::Bucket, 1, "ref", mu, sigma, 10).unwrap();
        let scaled = ReferenceCalibration::from_stats(SignalSource::Bucket, 1, "ref", c * mu, c * sigma, 10).unwrap();
        let a = classify(z, &cal, p).unwrap();
        let b = classify(c * z, &scaled, p).unwrap();
        // skip values that rounding puts on the other side of a boundary
        let zs = cal.z_score(z).unwrap();
        prop_assume!((zs.abs() - p.z()).abs() > 1e-9);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn relative_size_is_antisymmetric(a in prop::collection::vec(0.01f64..10.0, 2..10), b in prop::collection::vec(0.01f64..10.0, 2..10)) {
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            ReferenceCalibration::from_stats(SignalSource::Bucket, 1, "x", m, 0.0, v.len()).unwrap()
        };
        let rows = |v: &[f64], pile: &str| v.iter().map(|&x| zeta_row(x, pile)).collect::<Vec<_>>();
        let ab = relative_size(&rows(&a, "A"), &stats(&b)).unwrap().ratio;
        let ba = relative_size(&rows(&b, "B"), &stats(&a)).unwrap().ratio;
        prop_assert!(close(ab * ba, 1.0, 1e-12));
    }

    #[test]
    fn boundary_points_are_indistinguishable(mu in 0.1f64..10.0, p in confidence()) {
        // sigma = 1 keeps the boundary exactly representable
        let cal = ReferenceCalibration::from_stats(SignalSource::Bucket, 1, "ref", mu, 1.0, 5).unwrap();
        let hi = mu + p.z();
        let lo = mu - p.z();
        prop_assume!(cal.z_score(hi).unwrap() == p.z() && cal.z_score(lo).unwrap() == -p.z());
        prop_assert_eq!(classify(hi, &cal, p).unwrap(), SizeClass::Indistinguishable);
        prop_assert_eq!(classify(lo, &cal, p).unwrap(), SizeClass::Indistinguishable);
    }

    #[test]
    fn larger_zeta_never_moves_toward_smaller(mu in 0.1f64..10.0, sigma in 0.01f64..5.0, z in 0.0f64..20.0, dz in 0.0f64..5.0, p in confidence()) {
        let cal = ReferenceCalibration::from_stats(SignalSource::Bucket, 1, "ref", mu, sigma, 5).unwrap();
        let rank = |c: SizeClass| match c {
            SizeClass::Smaller => 0,
            SizeClass::Indistinguishable => 1,
            SizeClass::Larger => 2,
        };
        prop_assert!(rank(classify(z + dz, &cal, p).unwrap()) >= rank(classify(z, &cal, p).unwrap()));
    }
}
