use covtest::cli::{ingest_reader, write_csv, Grouping};
use covtest::combined::{simulate_reference, BandCalibrator};
use covtest::engine::{mc_reference, Method};
use covtest::estimation::{group_corr_vector, group_fourth_moment_cov};
use covtest::hypothesis::{predefined_hypothesis, structure_hypothesis, Target};
use covtest::linalg::{
    psd_factor, sym_eigenvalues, unvech, vech, vech_index, vech_strict, vech_strict_index, HalfVecKind,
    SymMatrix,
};
use covtest::{ats, run_test, GroupedSample, MomentEstimates};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn sym_matrix(max_d: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_d).prop_flat_map(|d| {
        prop::collection::vec(-10.0f64..10.0, d * d).prop_map(move |v| {
            let m = DMatrix::from_vec(d, d, v);
            SymMatrix::symmetrize(&(&m + m.transpose())).unwrap()
        })
    })
}

fn data(d: usize, n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-5.0f64..5.0, d * n).prop_map(move |v| DMatrix::from_vec(d, n, v))
}

fn two_groups(d: usize) -> impl Strategy<Value = GroupedSample> {
    (8usize..20, 8usize..20)
        .prop_flat_map(move |(n1, n2)| (data(d, n1), data(d, n2)))
        .prop_map(|(a, b)| GroupedSample::new(vec![a, b]).unwrap())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vech_round_trip(s in sym_matrix(6)) {
        prop_assert_eq!(unvech(&vech(&s)), s.clone());
        let d = s.dim();
        if d >= 2 {
            let mut unit = s.as_matrix().clone();
            unit.fill_diagonal(1.0);
            let unit = SymMatrix::new(unit).unwrap();
            let h = vech_strict(&unit).unwrap();
            prop_assert_eq!(h.kind(), HalfVecKind::Strict);
            prop_assert_eq!(unvech(&h), unit);
        }
    }

    #[test]
    fn half_vec_indices_are_bijective(d in 1usize..12) {
        let mut seen = vec![false; d * (d + 1) / 2];
        let mut strict = vec![false; d * (d - 1) / 2];
        for j in 0..d {
            for k in j..d {
                let i = vech_index(d, j, k);
                prop_assert!(!seen[i]);
                seen[i] = true;
                if k > j {
                    let i = vech_strict_index(d, j, k);
                    prop_assert!(!strict[i]);
                    strict[i] = true;
                }
            }
        }
        prop_assert!(seen.iter().all(|&x| x) && strict.iter().all(|&x| x));
    }

    #[test]
    fn psd_factor_reconstructs_and_is_idempotent(a in data(4, 3)) {
        // rank ≤ 3 in dimension 4
        let s = SymMatrix::symmetrize(&(&a * a.transpose())).unwrap();
        let l = psd_factor(&s, 1e-10).unwrap();
        prop_assert!(l.ncols() <= 3);
        let back = &l * l.transpose();
        let scale = s.as_matrix().amax().max(1.0);
        prop_assert!((&back - s.as_matrix()).amax() <= 1e-10 * scale);
        let again = psd_factor(&SymMatrix::symmetrize(&back).unwrap(), 1e-10).unwrap();
        prop_assert_eq!(again.ncols(), l.ncols());
        prop_assert!((&again * again.transpose() - &back).amax() <= 1e-10 * scale);
    }

    #[test]
    fn fourth_moment_cov_is_near_psd(x in data(3, 12)) {
        let sigma = group_fourth_moment_cov(&x).unwrap();
        let ev = sym_eigenvalues(&sigma);
        prop_assert!(ev[ev.len() - 1] >= -1e-8 * ev[0].abs().max(1e-300));
    }

    #[test]
    fn correlations_lie_in_unit_interval(x in data(4, 6)) {
        let r = group_corr_vector(&x).unwrap();
        prop_assert!(r.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn ats_invariant_under_translation_scaling_and_permutation(
        s in two_groups(3),
        shift in prop::collection::vec(-100.0f64..100.0, 3),
        scale in 0.01f64..100.0,
        rot in 1usize..7,
    ) {
        for (target, name) in [(Target::Covariance, "equal"), (Target::Correlation, "equal-correlated")] {
            let spec = predefined_hypothesis(name, target, 2, 3, None).unwrap();
            let base = ats(&spec, &MomentEstimates::for_target(&s, target).unwrap()).unwrap();

            let moved: Vec<DMatrix<f64>> = s.groups().iter().map(|g| {
                let mut g = g.clone();
                for mut c in g.column_iter_mut() {
                    for (v, t) in c.iter_mut().zip(&shift) { *v += t; }
                }
                g
            }).collect();
            let shifted = GroupedSample::new(moved).unwrap();
            let t = ats(&spec, &MomentEstimates::for_target(&shifted, target).unwrap()).unwrap();
            prop_assert!(close(base, t, 1e-8), "translation {} vs {}", base, t);

            let scaled = GroupedSample::new(s.groups().iter().map(|g| g * scale).collect()).unwrap();
            let t = ats(&spec, &MomentEstimates::for_target(&scaled, target).unwrap()).unwrap();
            prop_assert!(close(base, t, 1e-10), "scale {} vs {}", base, t);

            let permuted = GroupedSample::new(s.groups().iter().map(|g| {
                let n = g.ncols();
                DMatrix::from_fn(3, n, |j, k| g[(j, (k + rot) % n)])
            }).collect()).unwrap();
            let t = ats(&spec, &MomentEstimates::for_target(&permuted, target).unwrap()).unwrap();
            prop_assert!(close(base, t, 1e-12), "permutation {} vs {}", base, t);
        }
    }

    #[test]
    fn ats_invariant_under_row_scaling(s in two_groups(3), c in 0.001f64..1000.0) {
        let spec = predefined_hypothesis("equal-diagonals", Target::Covariance, 2, 3, None).unwrap();
        let est = MomentEstimates::new(&s).unwrap();
        let a = ats(&spec, &est).unwrap();
        let b = ats(&spec.scaled(c).unwrap(), &est).unwrap();
        prop_assert!(close(a, b, 1e-12));
    }

    #[test]
    fn p_value_non_increasing_in_statistic(s in two_groups(3), t1 in 0.0f64..5.0, dt in 0.0f64..5.0) {
        let spec = predefined_hypothesis("equal", Target::Covariance, 2, 3, None).unwrap();
        let reference = mc_reference(&spec, &MomentEstimates::new(&s).unwrap(), 300, 4).unwrap();
        prop_assert!(reference.p_value(t1) >= reference.p_value(t1 + dt));
    }

    #[test]
    fn calibrated_beta_controls_simulated_fwer(s in two_groups(3), alpha in 0.01f64..0.3) {
        let est = MomentEstimates::new(&s).unwrap();
        let cal = BandCalibrator::new(simulate_reference(&est, 400, 8).unwrap()).unwrap();
        let k = cal.beta_index(alpha);
        prop_assert!(cal.family_wise_error(k) <= alpha);
        prop_assert!(k + 1 == 400 || cal.family_wise_error(k + 1) > alpha);
    }

    #[test]
    fn csv_round_trip_is_exact(
        g1 in data(2, 5),
        g2 in data(2, 4),
        tiny in -1e-300f64..1e-300,
        huge in 1e250f64..1e300,
    ) {
        let mut g1 = g1;
        g1[(0, 0)] = tiny;
        g1[(1, 3)] = huge;
        let s = GroupedSample::new(vec![g1, g2]).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &s, &["u".into(), "v".into()]).unwrap();
        let back = ingest_reader(buf.as_slice(), &Grouping::Column("group".into())).unwrap();
        prop_assert_eq!(back.sample, s);
    }
}

#[test]
fn conforming_structures_have_zero_residual() {
    // exact compound symmetry and AR(1) matrices, with the statistic's numerator only
    let cs = SymMatrix::from_row_slice(3, &[2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0]).unwrap();
    let spec = structure_hypothesis("cs", Target::Covariance, 3).unwrap();
    let lin = spec.linearize(vech(&cs).values()).unwrap();
    assert!(lin.residual.amax() == 0.0);

    let ar = SymMatrix::symmetrize(&DMatrix::from_fn(4, 4, |j, k| 2.0 * 0.5f64.powi(j.abs_diff(k) as i32))).unwrap();
    let spec = structure_hypothesis("fo-ar", Target::Covariance, 4).unwrap();
    let lin = spec.linearize(vech(&ar).values()).unwrap();
    assert!(lin.residual.amax() < 1e-15);
}

#[test]
fn taylor_rejects_covariance_targets() {
    let s = GroupedSample::new(vec![DMatrix::from_fn(2, 6, |j, k| ((j + 1) * k * k) as f64)]).unwrap();
    let spec = predefined_hypothesis("equal", Target::Covariance, 1, 2, None).unwrap();
    assert!(run_test(&s, &spec, Method::Taylor, 10, 1, 0.05).is_err());
}
