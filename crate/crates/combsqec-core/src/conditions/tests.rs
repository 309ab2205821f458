use super::*;
use crate::exec::Serial;
use crate::library::{self, pauli_on, pauli_string, NamedInstance};
use crate::model::{CheckInstrument, CodeSpace, ErrorRound, Interrogator, Round};
use crate::tensor::{eye, ONE, ZERO};
use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec;
use proptest::prelude::*;

fn lim() -> Limits {
    Limits::default()
}

fn both(inst: &NamedInstance) -> (ConditionReport, ConditionReport) {
    let a = check_algebraic(&inst.code, &inst.errors, ALGEBRAIC_TOL, &lim(), &Serial).unwrap();
    let i = check_info(&inst.code, &inst.errors, INFO_TOL, &lim(), &Serial).unwrap();
    (a, i)
}

fn recovery(inst: &NamedInstance, decoder: &Decoder) -> RecoveryReport {
    let states = random_codestates(&inst.code.codespace, 20, 7);
    verify_recovery(&inst.code, &inst.errors, decoder, &states, &lim(), &Serial).unwrap()
}

fn schmidt(inst: &NamedInstance) -> Decoder {
    let opts = SchmidtOptions { tol: INFO_TOL, best_effort: false };
    synth_decoder_schmidt(&inst.code, &inst.errors, opts, &lim(), &Serial).unwrap()
}

#[test]
fn library_verdicts_match_both_checkers() {
    for inst in library::library().unwrap() {
        let (a, i) = both(&inst);
        assert_eq!(Some(a.verdict), inst.expected, "{}", inst.name);
        assert_eq!(Some(i.verdict), inst.expected, "{}", inst.name);
    }
}

#[test]
fn bitflip_lambda_is_diagonal_with_uniform_weight() {
    let inst = library::bitflip_code().unwrap();
    let (a, _) = both(&inst);
    let (_, lam) = &a.lambda[0];
    let want = eye(4).map(|z| z * 0.25);
    assert!((lam - want).norm() < 1e-12);
}

#[test]
fn z_variant_witness_points_at_the_phase_flip() {
    let inst = library::bitflip_z_variant().unwrap();
    let (a, i) = both(&inst);
    let w = a.witness.unwrap();
    assert!(w.residual > 0.5);
    assert_ne!(w.e.sequence, w.e_prime.sequence);
    assert!((i.entropy[0].mutual_information - 1.0).abs() < 1e-9);
}

#[test]
fn static_kl_agrees_with_dynamical_checker_at_l0() {
    for inst in [library::bitflip_code().unwrap(), library::bitflip_z_variant().unwrap()] {
        let (a, _) = both(&inst);
        let s = check_static_kl(&inst.code.codespace, &inst.errors.rounds[0].kraus, ALGEBRAIC_TOL).unwrap();
        assert_eq!(a.verdict, s.verdict);
        assert!((&a.lambda[0].1 - &s.lambda[0].1).norm() < 1e-10);
    }
}

#[test]
fn static_kl_brute_force() {
    let cs = library::bitflip_code().unwrap().code.codespace;
    let p = cs.projector();
    let errs: Vec<CMat> = ["III", "XII", "IXI", "IIX"].iter().map(|s| pauli_string(s)).collect();
    for a in &errs {
        for b in &errs {
            let m = &p * a.adjoint() * b * &p;
            let lam = m.trace() / 2.0;
            assert!((m - &p * lam).norm() < 1e-12);
        }
    }
    let s = check_static_kl(&cs, &errs, ALGEBRAIC_TOL).unwrap();
    assert!(s.verdict.is_correctable());
    assert!((&s.lambda[0].1 - eye(4)).norm() < 1e-12);
}

#[test]
fn static_kl_rejects_bad_shapes() {
    let cs = library::bitflip_code().unwrap().code.codespace;
    assert!(check_static_kl(&cs, &[], 1e-8).is_err());
    assert!(check_static_kl(&cs, &[eye(4)], 1e-8).is_err());
}

#[test]
fn hexagon_outcome_support_matches_flip_pattern() {
    let inst = library::hexagon_honeycomb().unwrap();
    let composed = compose_all(&inst.code, &inst.errors, &lim(), &Serial).unwrap();
    assert_eq!(composed.trajectory_count, 64);
    let rows = library::hexagon_flip_table(&lim(), &Serial).unwrap();
    assert_eq!(rows[0].flip, Some(vec![vec![-1, 1, 1], vec![1, 1, -1]]));
    assert_eq!(rows[1].flip, Some(vec![vec![-1, 1, 1], vec![-1, 1, 1]]));
    for r in &rows {
        assert!(r.support.iter().all(|s| s[0] == "(-1,+1,+1)"));
        assert_eq!(r.support.len(), 4);
    }
}

#[test]
fn hexagon_cross_terms_vanish_between_orthogonal_codestates() {
    let inst = library::hexagon_honeycomb().unwrap();
    let composed = compose_all(&inst.code, &inst.errors, &lim(), &Serial).unwrap();
    for b in &composed.blocks {
        for br in &b.branches {
            let t = br.kraus[1].adjoint() * &br.kraus[0];
            assert!(t[(0, 1)].norm() < 1e-9 && t[(1, 0)].norm() < 1e-9);
            assert!((t[(0, 0)] - t[(1, 1)]).norm() < 1e-9);
        }
    }
}

#[test]
fn hexagon_codestates_give_all_plus_first_round() {
    let inst = library::hexagon_honeycomb().unwrap();
    let b = inst.code.codespace.basis();
    let inst1 = inst.code.interrogator.instrument(1, "").unwrap();
    for (idx, (label, k)) in inst1.outcomes.iter().enumerate() {
        let n = (k * b).norm();
        if idx == 0 {
            assert_eq!(label, "(+1,+1,+1)");
            assert!((n - 2f64.sqrt()).abs() < 1e-10);
        } else {
            assert!(n < 1e-10);
        }
    }
}

#[test]
fn corollary_matches_algebraic_on_storing_instances() {
    for inst in library::library().unwrap() {
        let (a, _) = both(&inst);
        let c = check_corollary_all_outcomes(&inst.code, &inst.errors, ALGEBRAIC_TOL, &lim(), &Serial).unwrap();
        assert_eq!(a.verdict, c.verdict, "{}", inst.name);
    }
}

fn merging_instance() -> NamedInstance {
    // Two outcomes of a Z measurement merged into one memory state.
    let p0 = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
    let p1 = CMat::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]);
    let inst = CheckInstrument::new(vec![("0".into(), p0), ("1".into(), p1)]).unwrap();
    let mut instruments = BTreeMap::new();
    instruments.insert(String::new(), inst);
    let mut update = BTreeMap::new();
    update.insert((String::new(), "0".into()), "m".to_string());
    update.insert((String::new(), "1".into()), "m".to_string());
    let code = StrategicCode::new(
        CodeSpace::new(eye(2)).unwrap(),
        Interrogator { initial_memory: String::new(), rounds: vec![Round { instruments, update }] },
    )
    .unwrap();
    let errors = ErrorModel::new(vec![ErrorRound::simple(vec![eye(2)]).unwrap(), ErrorRound::simple(vec![eye(2)]).unwrap()])
        .unwrap();
    NamedInstance { name: "merge".into(), code, errors, expected: None, provenance: String::new() }
}

#[test]
fn corollary_refuses_merging_memory() {
    let inst = merging_instance();
    assert!(check_corollary_all_outcomes(&inst.code, &inst.errors, ALGEBRAIC_TOL, &lim(), &Serial).is_err());
}

#[test]
fn forgotten_measurement_destroys_the_qubit() {
    let inst = merging_instance();
    let (a, i) = both(&inst);
    assert!(!a.verdict.is_correctable());
    assert!(!i.verdict.is_correctable());
}

#[test]
fn decoders_recover_library_instances() {
    for inst in library::library().unwrap() {
        if inst.expected != Some(Verdict::Correctable) {
            continue;
        }
        for dec in [synth_decoder_algebraic(&inst.code, &inst.errors, &lim(), &Serial).unwrap(), schmidt(&inst)] {
            assert!(dec.completeness_residual() < 1e-8, "{} {}", inst.name, dec.method);
            let rep = recovery(&inst, &dec);
            assert!(rep.worst_fidelity >= 1.0 - 1e-8, "{} {} {}", inst.name, dec.method, rep.worst_fidelity);
            for s in &rep.lambda_sums {
                assert!((s - 1.0).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn decoder_synthesis_refuses_uncorrectable() {
    let inst = library::bitflip_z_variant().unwrap();
    assert!(synth_decoder_algebraic(&inst.code, &inst.errors, &lim(), &Serial).is_err());
    let opts = SchmidtOptions { tol: INFO_TOL, best_effort: false };
    assert!(synth_decoder_schmidt(&inst.code, &inst.errors, opts, &lim(), &Serial).is_err());
    let opts = SchmidtOptions { tol: INFO_TOL, best_effort: true };
    let dec = synth_decoder_schmidt(&inst.code, &inst.errors, opts, &lim(), &Serial).unwrap();
    assert!(recovery(&inst, &dec).worst_fidelity < 1.0 - 1e-3);
}

#[test]
fn joint_state_is_normalized() {
    for inst in library::library().unwrap() {
        let js = joint_state(&inst.code, &inst.errors, &lim(), &Serial).unwrap();
        assert!((js.total_probability - 1.0).abs() < 1e-10, "{}", inst.name);
        for b in js.blocks.iter().filter_map(|b| b.rho.as_ref()) {
            assert!((b.trace().re - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn spacetime_x_flip_changes_measurement() {
    let inst = library::spacetime_toy_circuit().unwrap();
    let composed = compose_all(&inst.code, &inst.errors, &lim(), &Serial).unwrap();
    for b in &composed.blocks {
        for br in &b.branches {
            let last = br.trajectory.labels[1].as_str();
            let (ident, flip) = (br.kraus[0].norm() > 1e-9, br.kraus[1].norm() > 1e-9);
            assert_eq!((ident, flip), (last == "0", last == "1"));
        }
    }
}

#[test]
fn correlated_environment_leg_is_split() {
    // The flag stays in the inaccessible environment.
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let mut k0 = CMat::zeros(4, 2);
    let z = pauli_on(1, 'Z', &[1]);
    for q in 0..2 {
        for i in 0..2 {
            k0[(q * 2, i)] = eye(2)[(q, i)] * h;
            k0[(q * 2 + 1, i)] = z[(q, i)] * h;
        }
    }
    let errors = ErrorModel::new(vec![ErrorRound::new(1, 2, vec![k0]).unwrap()]).unwrap();
    let code = StrategicCode::new(CodeSpace::new(eye(2)).unwrap(), Interrogator::trivial()).unwrap();
    let inst = NamedInstance { name: "flag".into(), code, errors, expected: None, provenance: String::new() };
    let (a, i) = both(&inst);
    assert!(!a.verdict.is_correctable());
    assert!(!i.verdict.is_correctable());
    assert_eq!(a.errors.len(), 2);
}

#[test]
fn correlated_error_undone_by_next_round() {
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let z = pauli_on(1, 'Z', &[1]);
    let mut k0 = CMat::zeros(4, 2);
    let (mut a, mut b) = (CMat::zeros(2, 4), CMat::zeros(2, 4));
    for q in 0..2 {
        for i in 0..2 {
            k0[(q * 2, i)] = eye(2)[(q, i)] * h;
            k0[(q * 2 + 1, i)] = z[(q, i)] * h;
            a[(q, i * 2)] = eye(2)[(q, i)];
            b[(q, i * 2 + 1)] = z[(q, i)];
        }
    }
    let errors =
        ErrorModel::new(vec![ErrorRound::new(1, 2, vec![k0]).unwrap(), ErrorRound::new(2, 1, vec![a, b]).unwrap()]).unwrap();
    assert!(errors.is_tp());
    let inst1 = CheckInstrument::new(vec![("u".into(), eye(2))]).unwrap();
    let code =
        StrategicCode::new(CodeSpace::new(eye(2)).unwrap(), library::storing_interrogator(vec![inst1])).unwrap();
    let inst = NamedInstance { name: "undo".into(), code, errors, expected: None, provenance: String::new() };
    let (a, i) = both(&inst);
    assert!(a.verdict.is_correctable());
    assert!(i.verdict.is_correctable());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn checkers_agree_on_random_instances(seed in 0u64..10_000, rounds in 0usize..3, adaptive: bool) {
        let inst = library::random_instance(seed, 1, rounds, adaptive).unwrap();
        let (a, i) = both(&inst);
        prop_assert_eq!(a.verdict, i.verdict);
    }

    #[test]
    fn lambda_weights_sum_to_one_for_tp_models(seed in 0u64..10_000, rounds in 0usize..3) {
        let inst = library::random_instance(seed, 1, rounds, true).unwrap();
        prop_assume!(inst.errors.is_tp());
        let states = random_codestates(&inst.code.codespace, 3, seed);
        let dec = synth_decoder_schmidt(
            &inst.code, &inst.errors, SchmidtOptions { tol: INFO_TOL, best_effort: true }, &lim(), &Serial,
        ).unwrap();
        let rep = verify_recovery(&inst.code, &inst.errors, &dec, &states, &lim(), &Serial).unwrap();
        for s in rep.lambda_sums {
            prop_assert!((s - 1.0).abs() < 1e-8);
        }
    }
}
