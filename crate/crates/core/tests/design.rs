use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use keyhole_core::evaluation::{
    best_effort_dof, design_links, dof_count, muxg_estimate, sum_rate, UserLink, SNR_HI, SNR_LO,
};
use keyhole_core::linalg::{c, max_abs, orthonormality_defect, principal_angles, CMatrix};
use keyhole_core::polarization::{single_antenna_channel, ChannelSet};
use keyhole_core::scenario_file::{emit, parse_scenario, ScenarioFile};
use keyhole_core::zfdesign::{
    assign_nulling, auto_assignment, closed_form_rx_single, closed_form_tx_dual,
    closed_form_tx_single, design_zf, dual_column_norm, nullspace_beamformer, BeamformerOrigin,
    ClosedFormKind, DesignWarning, NullingAssignment, NullingSide,
};
use keyhole_core::{
    random_generic_scenario, ComponentSet, DipoleConfig, Error, LinkGeometry, Scenario,
};
use proptest::prelude::*;

fn comps(t: &str) -> ComponentSet {
    ComponentSet::parse(t).unwrap()
}

fn channel(angle: f64, components: &str) -> CMatrix {
    let link = LinkGeometry {
        tx: 0,
        rx: 0,
        angle,
        distance: 1.0,
        attenuation: 1.0,
    };
    let cfg = DipoleConfig::fixed(comps(components));
    single_antenna_channel(&link, &cfg, &cfg, 1.0).matrix
}

fn generic(users: usize, antennas: usize, seed: u64, components: &str) -> Scenario {
    random_generic_scenario(users, antennas, seed, 0.05)
        .unwrap()
        .with_components(&comps(components))
}

fn isolated(lambdas: Vec<CMatrix>) -> Vec<UserLink> {
    lambdas
        .into_iter()
        .map(|lambda| UserLink {
            lambda,
            interference: vec![],
            direct_scale: 1.0,
        })
        .collect()
}

fn diag(a: f64, b: f64) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(a, 0.0), c(b, 0.0)]))
}

proptest! {
    #[test]
    fn single_null_closed_form_spans_null_space(phi in -PI..PI) {
        let h = channel(phi, "ex ey mx my");
        let closed = closed_form_tx_single(phi);
        let generic = nullspace_beamformer(&[&h], 4, 2).unwrap();
        prop_assert!(principal_angles(&generic, &closed).iter().all(|&a| a < 1e-9));
        prop_assert!(max_abs(&(&h * &closed)) < 1e-12);
        let u = closed_form_rx_single(phi);
        prop_assert!(max_abs(&(u.adjoint() * &h)) < 1e-12);
        prop_assert!(orthonormality_defect(&closed) < 1e-12);
    }

    #[test]
    fn dual_null_closed_form_spans_null_space(a in -PI..PI, gap in 0.05f64..(PI - 0.05)) {
        let b = a + gap;
        let (ha, hb) = (channel(a, "ex ey ez mx my mz"), channel(b, "ex ey ez mx my mz"));
        let closed = closed_form_tx_dual(a, b).unwrap();
        let generic = nullspace_beamformer(&[&ha, &hb], 6, 2).unwrap();
        prop_assert!(principal_angles(&generic, &closed).iter().all(|&x| x < 1e-9));
        prop_assert!(max_abs(&(&ha * &closed)).max(max_abs(&(&hb * &closed))) < 1e-12);
        prop_assert!(orthonormality_defect(&closed) < 1e-12);
        let expected = (2.0 - 2.0 * gap.cos() + gap.sin().powi(2)).sqrt();
        prop_assert!((dual_column_norm(a, b) - expected).abs() < 1e-12);
    }

    #[test]
    fn dof_invariant_under_scaling(seed in 0u64..40) {
        let s = generic(3, 1, seed, "ex ey mx my");
        let base = dof_count(&design_zf(&s, &auto_assignment(&s).unwrap()).unwrap(), &s).unwrap();
        let big = s.scaled(10.0);
        let scaled = dof_count(&design_zf(&big, &auto_assignment(&big).unwrap()).unwrap(), &big).unwrap();
        prop_assert_eq!(base, scaled);
    }
}

#[test]
fn coincident_directions_rejected() {
    assert!(matches!(
        closed_form_tx_dual(0.3, 0.3 + PI),
        Err(Error::DegenerateDirections { .. })
    ));
}

#[test]
fn counting_identity() {
    for k in 2..=30usize {
        let need = (k + 1).div_ceil(6);
        for m in 1..=need + 1 {
            let a = assign_nulling(k, m);
            assert!(a.respects_capacity(), "K={k} M={m}");
            assert_eq!(a.is_complete(), m >= need, "K={k} M={m}");
            assert_eq!(a.is_complete(), k - 1 <= 6 * m - 2, "K={k} M={m}");
        }
    }
}

#[test]
fn cyclic_assignment_examples() {
    let a = assign_nulling(3, 1);
    assert!(a.is_complete());
    for n in 0..3 {
        assert_eq!(a.tx_nulls(n), vec![(n + 1) % 3]);
        assert_eq!(a.rx_load(n), 1);
    }

    let a = assign_nulling(5, 1);
    assert!(a.is_complete());
    assert_eq!(a.tx_nulls(0), vec![1, 2]);
    assert_eq!(a.rx_nulls(0), vec![1, 2]);
    assert_eq!(a.side(3, 0), NullingSide::TxNulls);

    assert!(!assign_nulling(7, 1).is_complete());
    let a = assign_nulling(7, 2);
    assert!(a.is_complete());
    assert_eq!(a.capacity(), 5);
}

#[test]
fn four_component_closed_form_design() {
    let s = generic(3, 1, 4, "ex ey mx my");
    let d = design_zf(&s, &auto_assignment(&s).unwrap()).unwrap();
    assert!(d.is_certified(), "leakage {}", d.leakage_max);
    assert!(d.leakage_max < 1e-12);
    for (v, e) in d.precoders.iter().zip(&d.effective) {
        assert_eq!(v.origin, BeamformerOrigin::ClosedFormSingle);
        let cf = e.closed_form.unwrap();
        assert_eq!(cf.kind, ClosedFormKind::SingleNull);
        let scale = e.lambda.norm();
        assert!((e.lambda[(0, 0)] - cf.predicted).norm() < 1e-9 * scale);
        assert!((e.lambda[(1, 1)] - cf.predicted).norm() < 1e-9 * scale);
        assert!(e.lambda[(0, 1)].norm().max(e.lambda[(1, 0)].norm()) < 1e-9 * scale);
    }
    assert_eq!(dof_count(&d, &s).unwrap(), 6);
}

#[test]
fn six_component_closed_form_design() {
    let s = generic(5, 1, 2, "ex ey ez mx my mz");
    let d = design_zf(&s, &auto_assignment(&s).unwrap()).unwrap();
    assert!(d.is_certified(), "leakage {}", d.leakage_max);
    for e in &d.effective {
        let cf = e.closed_form.unwrap();
        assert_eq!(cf.kind, ClosedFormKind::DualNull);
        let scale = e.lambda.norm();
        assert!((e.lambda[(0, 0)] - cf.predicted).norm() < 1e-8 * scale);
        assert!((e.lambda[(1, 1)] - cf.predicted).norm() < 1e-8 * scale);
    }
    assert_eq!(dof_count(&d, &s).unwrap(), 10);
    let est = muxg_estimate(&design_links(&d, &s).unwrap(), SNR_LO, SNR_HI);
    assert!(!est.residual_interference);
    assert!(
        (est.gamma_hat - 10.0).abs() < 0.2,
        "gamma {}",
        est.gamma_hat
    );
}

#[test]
fn multi_antenna_design() {
    let s = generic(7, 2, 0, "ex ey ez mx my mz");
    let d = design_zf(&s, &auto_assignment(&s).unwrap()).unwrap();
    assert!(d.is_certified(), "leakage {}", d.leakage_max);
    assert!(d
        .precoders
        .iter()
        .all(|v| v.origin == BeamformerOrigin::NullSpace));
    assert!(d
        .precoders
        .iter()
        .all(|v| orthonormality_defect(&v.matrix) < 1e-10));
    assert_eq!(dof_count(&d, &s).unwrap(), 14);
}

#[test]
fn sum_rate_examples() {
    assert_eq!(sum_rate(&isolated(vec![CMatrix::zeros(2, 2)]), 1e3), 0.0);

    let s = 37.0;
    let r = sum_rate(&isolated(vec![CMatrix::identity(2, 2)]), s);
    assert_abs_diff_eq!(r, 2.0 * (1.0 + s / 2.0).log2(), epsilon = 1e-12);

    let gains = [(1.0, 0.5), (2.0, 0.1), (0.3, 0.3)];
    let links = isolated(gains.iter().map(|&(a, b)| diag(a, b)).collect());
    let p = s / 6.0;
    let oracle: f64 = gains
        .iter()
        .map(|&(a, b)| (1.0 + p * a * a).log2() + (1.0 + p * b * b).log2())
        .sum();
    assert_abs_diff_eq!(sum_rate(&links, s), oracle, epsilon = 1e-6);
}

#[test]
fn sum_rate_monotone_and_bounded_slope() {
    for seed in 0..5 {
        let s = generic(3, 1, seed, "ex ey mx my");
        let d = design_zf(&s, &auto_assignment(&s).unwrap()).unwrap();
        let links = design_links(&d, &s).unwrap();
        let rates: Vec<f64> = (0..=16).map(|e| sum_rate(&links, 10f64.powi(e))).collect();
        assert!(rates.windows(2).all(|w| w[1] >= w[0] - 1e-9), "seed {seed}");
        assert!(muxg_estimate(&links, SNR_LO, SNR_HI).gamma_hat <= 6.01);
    }
}

#[test]
fn dead_user_costs_two_streams() {
    let links = isolated(vec![
        CMatrix::identity(2, 2),
        CMatrix::zeros(2, 2),
        CMatrix::identity(2, 2),
    ]);
    let est = muxg_estimate(&links, SNR_LO, SNR_HI);
    assert_abs_diff_eq!(est.gamma_hat, 4.0, epsilon = 1e-3);
}

#[test]
fn uncancelled_interference_saturates() {
    // two in-plane dipoles leave nothing to null with, so beamformers are identities
    let s = generic(5, 1, 1, "ex mx");
    let channels = ChannelSet::build(&s).unwrap();
    let links: Vec<UserLink> = (0..5)
        .map(|i| UserLink {
            lambda: channels.get(i, i).matrix.clone(),
            interference: (0..5)
                .filter(|&t| t != i)
                .map(|t| channels.get(t, i).matrix.clone())
                .collect(),
            direct_scale: 1.0,
        })
        .collect();
    let est = muxg_estimate(&links, SNR_LO, SNR_HI);
    assert!(est.residual_interference);
    assert!(est.gamma_hat < 1.0, "gamma {}", est.gamma_hat);
}

#[test]
fn dof_count_examples() {
    let one = generic(3, 1, 0, "ex ey ez mx my mz").prefix(1);
    let d = design_zf(&one, &auto_assignment(&one).unwrap()).unwrap();
    assert_eq!(dof_count(&d, &one).unwrap(), 2);
    let two = generic(5, 1, 0, "ex ey");
    assert!(best_effort_dof(&two).unwrap() < 10);
}

#[test]
fn collinear_placement_flags_zero_gain() {
    let s = Scenario::new(
        vec![[0.0, 0.0], [3.0, 0.0]],
        vec![[1.0, 0.0], [2.0, 0.0]],
        vec![[0.0, 0.0]],
        1.0,
        comps("ex ey mx my"),
    )
    .unwrap();
    let d = design_zf(&s, &auto_assignment(&s).unwrap()).unwrap();
    assert!(!d.is_certified());
    assert!(d
        .warnings
        .contains(&DesignWarning::DegenerateGeometry { margin: 0.0 }));
    assert!(d
        .warnings
        .iter()
        .any(|w| matches!(w, DesignWarning::ZeroGain { .. })));
    assert!(d
        .effective
        .iter()
        .any(|e| e.stream_gains.iter().all(|&g| g < 1e-12)));
}

#[test]
fn electric_only_pair_cannot_null() {
    let s = generic(2, 1, 0, "ex ey ez");
    let sides = [NullingSide::TxNulls, NullingSide::RxNulls];
    for a in sides {
        for b in sides {
            let assignment = NullingAssignment::from_links(2, 1, [((0, 1), a), ((1, 0), b)]);
            assert!(
                matches!(
                    design_zf(&s, &assignment),
                    Err(Error::InfeasibleNulling {
                        available: 1,
                        wanted: 2,
                        ..
                    })
                ),
                "{a:?} {b:?}"
            );
        }
    }
}

#[test]
fn scenario_file_round_trip() {
    let s = generic(4, 2, 9, "ex ey ez mx my mz");
    let back = parse_scenario(&emit(&s)).unwrap();
    assert_eq!(back.tx_positions, s.tx_positions);
    assert_eq!(back.rx_positions, s.rx_positions);
    assert_eq!(back.antenna_offsets, s.antenna_offsets);
    assert_eq!(back.wavenumber, s.wavenumber);
    assert_eq!(back.tx_components, s.tx_components);
}

#[test]
fn seven_users_one_antenna_is_incomplete() {
    let s = ScenarioFile::parse("k = 7\n")
        .unwrap()
        .to_scenario()
        .unwrap();
    let assignment = auto_assignment(&s).unwrap();
    assert!(!assignment.is_complete());
    assert!(matches!(
        design_zf(&s, &assignment),
        Err(Error::IncompleteAssignment { .. })
    ));
}
