use std::f64::consts::PI;

use backreact_core::box3d::*;
use backreact_core::modes::evolve_bogoliubov;
use backreact_core::modes::BogoliubovPair;
use backreact_core::numkit::OdeOptions;
use backreact_core::ring1d::{ring_accel, RingParams};
use backreact_core::{HaltReason, MirrorState};
use proptest::prelude::*;

fn reference_run(v0: f64, model: &CreationEnergyModel) -> backreact_core::SimulationRecord {
    let p = BoxParams::default();
    simulate_box(&p, (p.l, v0), (p.t0, DEFAULT_T_END), model, &BoxRunOptions::default()).unwrap()
}

#[test]
fn null_point_for_both_evaluators() {
    let model = CreationEnergyModel::default();
    let kin = BoxKinematics::new(1.0, 0.0);
    for t in [1.0, 2.0, 5.0] {
        assert!(rho_creation_quadrature(&kin, t, &model).unwrap().abs() <= 1e-10);
        assert!(rho_creation_closed(&kin, t, &model).abs() <= 1e-10);
    }
}

#[test]
fn reconciled_closed_form_matches_quadrature() {
    let model = CreationEnergyModel::with_convention(ClosedFormConvention::Reconciled);
    for a in [0.6, 1.0, 1.7] {
        for a_dot in [0.0, 0.4, -1.1] {
            for t in [0.5, 2.0] {
                let kin = BoxKinematics::new(a, a_dot);
                let q = rho_creation_quadrature(&kin, t, &model).unwrap();
                let c = rho_creation_closed(&kin, t, &model);
                if a == 1.0 && a_dot == 0.0 {
                    continue;
                }
                assert!((q - c).abs() <= 1e-6 * c.abs(), "a={a} ȧ={a_dot} t={t}: {q} vs {c}");
            }
        }
    }
}

#[test]
fn published_closed_form_differs_by_the_factor_model() {
    let model = CreationEnergyModel::default();
    for (a, a_dot, t) in [(1.0, 0.8, 1.0), (1.0, 0.8, 3.0), (1.4, 0.3, 2.0), (0.7, -0.6, 0.5)] {
        let kin = BoxKinematics::new(a, a_dot);
        let q = rho_creation_quadrature_parts(&kin, t, &model, 0.0).unwrap();
        let c = rho_creation_closed_parts(&kin, t, &model);
        assert!(
            (c.isotropic - q.isotropic / 4.0).abs() <= 1e-6 * c.isotropic.abs() + 1e-14,
            "iso {} vs {}",
            c.isotropic,
            q.isotropic
        );
        assert!(
            (c.anisotropic - q.anisotropic * t / 4.0).abs() <= 1e-6 * c.anisotropic.abs(),
            "aniso {} vs {}",
            c.anisotropic,
            q.anisotropic
        );
    }
    // at a = 1: −a′²/(36π²t²) by quadrature against −a′²/(144π²t) in closed form
    let (a_prime, t) = (0.8, 3.0);
    let kin = BoxKinematics::new(1.0, a_prime);
    let q = rho_creation_quadrature(&kin, t, &model).unwrap();
    assert!((q + a_prime * a_prime / (36.0 * PI * PI * t * t)).abs() < 1e-9 * q.abs());
}

#[test]
fn lenz_law_for_both_directions() {
    let model = CreationEnergyModel::default();
    for v0 in [0.5, -0.5] {
        let rec = reference_run(v0, &model);
        assert_eq!(rec.halt, HaltReason::Completed);
        let inc = max_speed_increase(&rec);
        let last = rec.last().unwrap().state;
        println!("V0={v0}: max |V| increase {inc:e}, final V {} L {}", last.velocity, last.length);
        assert!(speed_non_increasing(&rec, 1e-9));
        assert!(last.velocity.abs() < 0.5);
    }
}

#[test]
fn matter_bound_ratio_is_reported() {
    let model = CreationEnergyModel::default();
    for v0 in [0.5, -0.5] {
        let rec = reference_run(v0, &model);
        let ratio = matter_bound_ratio(&rec).unwrap();
        println!(
            "V0={v0}: Edot_matter(t0) {:e}, bound {:e}, ratio {ratio:e}",
            initial_matter_rate(&rec).unwrap(),
            matter_energy_bound(&rec).unwrap()
        );
        assert!(ratio.is_finite());
    }
}

#[test]
fn initial_acceleration_at_rest_matches_analytic_partial() {
    let p = BoxParams::default();
    let model = CreationEnergyModel::default();
    let acc = box_accel(&MirrorState::new(1.0, p.l, 0.0), 1.0, &p, &model).unwrap();
    let an = creation_partials(p.l, 0.0, 1.0, &p, &model);
    assert!((acc - an.e_l / p.mirror_mass).abs() < 1e-9);
    // bracket minimum at a = 1: no force at the isotropic point
    assert!(acc.abs() < 1e-9, "{acc}");
}

#[test]
fn assembler_reproduces_ring_dynamics() {
    let ring = RingParams::default();
    let lagrangian_e = |l: f64, v: f64, _t: f64| -v * v / (24.0 * PI * l) + PI / (6.0 * l);
    for l in [0.1, 0.2, 0.5, 1.0, 3.0] {
        for v in [-2.0, -0.3, 0.4, 1.5] {
            let s = MirrorState::new(0.0, l, v);
            let expected = ring_accel(&s, &ring, true).unwrap();
            let got = el_accel(lagrangian_e, ring.mass, l, v, 1.0, 1.0).unwrap();
            assert!(((got - expected) / expected).abs() <= 1e-6, "L={l} V={v}: {got} vs {expected}");
        }
    }
}

#[test]
fn mode_bank_keeps_wronskian_along_trajectory() {
    let p = BoxParams::default();
    let rec = reference_run(0.5, &CreationEnergyModel::default());
    let mut worst: f64 = 0.0;
    for n in [[1, 0, 0], [0, 1, 0], [1, 1, 0], [2, 0, 1], [3, 2, 1]] {
        let bg = TrajectoryBackground::new(&rec, &p, KVector::from_indices(n, p.l)).unwrap();
        let tr = evolve_bogoliubov(&bg, BogoliubovPair::vacuum(), bg.span(), &OdeOptions::with_tol(1e-12).dense(0.5)).unwrap();
        worst = worst.max(tr.wronskian_drift());
    }
    println!("mode bank Wronskian drift {worst:e}");
    assert!(worst <= 1e-9);
}

#[test]
fn nonadiabatic_region_is_the_omega_t_condition() {
    for (kx, ky, kz, a, t) in [
        (0.3, 0.1, 0.2, 1.3, 2.0),
        (1.0, 0.0, 0.0, 2.0, 1.99),
        (0.0, 0.5, 0.5, 0.7, 1.5),
        (2.0, 0.0, 0.0, 2.0, 1.0),
    ] {
        let k = KVector::new(kx, ky, kz);
        let (omega, _) = omega_conformal(&k, a, 0.0).unwrap();
        let omega_cosmic = omega / a.cbrt();
        assert_eq!(omega_cosmic * t <= 1.0 + 1e-15, in_region(&k, a, t) || (omega_cosmic * t - 1.0).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn conformal_rate_is_enforced(a in 0.05f64..20.0, a_dot in -5.0f64..5.0) {
        let kin = BoxKinematics::new(a, a_dot);
        prop_assert!((kin.a_prime() - a.cbrt() * a_dot).abs() <= 1e-15 * (1.0 + kin.a_prime().abs()));
        prop_assert!(kin.q() >= 0.0);
        let via_length = BoxKinematics::from_length(a * 50.0, a_dot * 50.0, 50.0);
        prop_assert!((via_length.a_prime() - kin.a_prime()).abs() <= 1e-13 * (1.0 + kin.a_prime().abs()));
    }

    #[test]
    fn closed_form_sees_conformal_rate(a in 0.2f64..5.0, a_dot in -2.0f64..2.0, t in 0.3f64..10.0) {
        let model = CreationEnergyModel::default();
        let kin = BoxKinematics::new(a, a_dot);
        let parts = rho_creation_closed_parts(&kin, t, &model);
        let expected = -4.0 * a.powf(2.0 / 3.0) * a_dot * a_dot * pee(a) * t.powi(3) / (576.0 * PI * PI * a.powf(10.0 / 3.0) * t.powi(4));
        prop_assert!((parts.anisotropic - expected).abs() <= 1e-12 * expected.abs() + 1e-300);
    }

    #[test]
    fn conformal_time_is_increasing(t in 1.0f64..5.0, dt in 0.01f64..2.0, v in -0.1f64..0.5) {
        let a = move |s: f64| 1.0 + v * (s - 1.0) / 5.0;
        let e1 = conformal_time_map(a, 1.0, t).unwrap();
        let e2 = conformal_time_map(a, 1.0, t + dt).unwrap();
        prop_assert!(e2 > e1);
    }

    #[test]
    fn pee_is_smooth_across_the_patch(a in 0.9999f64..1.0001) {
        let h = 1e-6;
        let lo = pee(a - h);
        let hi = pee(a + h);
        prop_assert!((hi - lo - 2.0 * h * pee_derivative(a)).abs() <= 1e-12);
    }
}
