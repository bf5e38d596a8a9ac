use mbmimo_core::alloc::{inner_optimize, window_mask, BandSet, InnerConfig, PowerScheme, UserCapability};
use mbmimo_core::antenna::*;
use mbmimo_core::channel::*;
use mbmimo_core::numerics::CMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn linear(kind: ArrayKind, n: usize, delta: f64) -> ArrayGeometry {
    let p = ChuParams::default();
    ArrayGeometry::linear(kind, delta, delta * (n - 1) as f64, p.min_spacing()).unwrap()
}

fn kinds() -> impl Strategy<Value = ArrayKind> {
    prop::sample::select(vec![ArrayKind::Colinear, ArrayKind::Parallel])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn colored_and_whitened_forms_carry_the_same_information(
        k in 1usize..=4,
        n in 2usize..=8,
        kind in kinds(),
        delta in 0.005f64..0.05,
        f in 1e9f64..2e10,
        seed in any::<u64>(),
        load in 20.0f64..120.0,
        snr_db in -10.0f64..30.0,
    ) {
        let p = ChuParams::default();
        let zt = build_zt(f, &linear(kind, n, delta), &p, Coupling::Coupled).unwrap();
        let d: Vec<f64> = (0..k).map(|j| 50.0 + 20.0 * j as f64).collect();
        let z_rt = transimpedance(f, &fading_matrix(seed, 0, k, n), &zt, &d, 2.7, &p).unwrap();
        let loads = LoadModel::uniform(k, load, 50.0).unwrap();
        let eq = equivalent_channel(&z_rt, &zt, &build_zr(f, k, &p).unwrap(), &loads).unwrap();
        let w = fading_matrix(seed, 1, n, k);
        let noise = (&eq.h_tilde * &w).norm_squared() / k as f64 * 10f64.powf(-snr_db / 10.0);
        let a = CMatrix::from_diagonal(&eq.coloring);
        let colored = mutual_information(&eq.h_eq, &w, noise, Some(&a)).unwrap();
        let white = mutual_information(&eq.h_tilde, &w, noise, None).unwrap();
        prop_assert!((colored - white).abs() <= 1e-9 * white.abs());
    }

    #[test]
    fn farther_users_see_weaker_channels(
        n in 2usize..=8,
        seed in any::<u64>(),
        near in 10.0f64..100.0,
        extra in 1.0f64..100.0,
        gamma in 2.0f64..4.0,
    ) {
        let p = ChuParams::default();
        let zt = build_zt(3.5e9, &linear(ArrayKind::Colinear, n, 0.01), &p, Coupling::Coupled).unwrap();
        let fading = fading_matrix(seed, 0, 1, n);
        let a = transimpedance(3.5e9, &fading, &zt, &[near], gamma, &p).unwrap();
        let b = transimpedance(3.5e9, &fading, &zt, &[near + extra], gamma, &p).unwrap();
        prop_assert!(b.norm() < a.norm());
        let expect = ((near + extra) / near).powf(gamma / 2.0);
        prop_assert!((a.norm() / b.norm() - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn uncoupled_transimpedance_scales_with_upsilon_squared_over_f(
        n in 1usize..=6,
        seed in any::<u64>(),
        f1 in 1e9f64..2e10,
        f2 in 1e9f64..2e10,
    ) {
        let p = ChuParams::default();
        let g = if n == 1 { ArrayGeometry::single() } else { linear(ArrayKind::Colinear, n, 0.01) };
        let fading = fading_matrix(seed, 0, 2, n);
        let norm = |f: f64| {
            let zt = build_zt(f, &g, &p, Coupling::Uncoupled).unwrap();
            transimpedance(f, &fading, &zt, &[60.0, 90.0], 2.7, &p).unwrap().norm()
        };
        let law = |f: f64| receive_gain_factor(f, &p).unwrap().powi(2) / f;
        let (measured, expect) = (norm(f1) / norm(f2), law(f1) / law(f2));
        prop_assert!((measured - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn synthesis_is_deterministic(seed in any::<u64>(), n in 1usize..=6, k in 1usize..=4) {
        prop_assert_eq!(fading_matrix(seed, 3, k, n), fading_matrix(seed, 3, k, n));
        let grid = SubcarrierGrid::new(2, 2, 3.5e9, 17.5e9, 120e3, 480e3).unwrap();
        let a = draw_fading(seed, k, n, &grid).unwrap();
        let b = draw_fading(seed, k, n, &grid).unwrap();
        prop_assert_eq!(a, b);
    }
}

fn random_set(seed: u64, users: usize, antennas: usize, ml: usize, mh: usize) -> EquivalentChannelSet {
    let grid = SubcarrierGrid::new(ml, mh, 3.5e9, 17.5e9, 120e3, 480e3).unwrap();
    let channels = (0..grid.len()).map(|i| fading_matrix(seed, i, users, antennas)).collect();
    let noise = NoiseLevels { low: 0.3, high: 1.2 };
    EquivalentChannelSet::new(grid, channels, noise).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn inner_optimization_is_monotone_and_feasible(
        seed in any::<u64>(),
        users in 1usize..=4,
        antennas in 1usize..=6,
        ml in 1usize..=4,
        mh in 1usize..=4,
        scheme in prop::sample::select(vec![
            PowerScheme::Joint,
            PowerScheme::BandWise { beta: 0.5 },
            PowerScheme::CarrierWise,
        ]),
        n_window in 1usize..=4,
        eta in 1usize..=2,
    ) {
        let set = random_set(seed, users, antennas, ml, mh);
        let caps = vec![UserCapability::new(eta, n_window, BandSet::BOTH).unwrap(); users];
        let st = inner_optimize(&set, scheme, &caps, 2.0, &InnerConfig::default()).unwrap();
        for w in st.history.windows(2) {
            prop_assert!(w[1] >= w[0] * (1.0 - 1e-12));
        }
        prop_assert!(st.total_power() <= 2.0 * (1.0 + 1e-8));
        let mask = window_mask(&st.windows, ml + mh);
        for i in 0..ml + mh {
            for k in 0..users {
                prop_assert!(st.power[(i, k)] >= 0.0);
                if !mask[i][k] {
                    prop_assert_eq!(st.power[(i, k)], 0.0);
                }
            }
        }
        for (k, ws) in st.windows.iter().enumerate() {
            prop_assert!(ws.len() <= eta, "user {} has {} windows", k, ws.len());
            prop_assert!(ws.iter().all(|w| w.len <= n_window));
        }
        let w = st.precoders();
        let power: f64 = w.iter().map(|c: &Complex64| c.norm_sqr()).sum();
        prop_assert!((power - st.total_power()).abs() <= 1e-12 * st.total_power().max(1.0));
    }
}
