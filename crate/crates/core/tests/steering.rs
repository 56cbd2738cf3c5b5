mod common;

use common::*;
use proptest::prelude::*;
use thermocert::families::{pauli_measurements, werner};
use thermocert::linalg::{kron, HermitianOperator};
use thermocert::steering::*;
use thermocert::thermo::{avg_deficit, avg_energy, deficit_offset};
use thermocert::{
    DensityMatrix, DeterministicStrategies, Error, HamiltonianAssemblage, MeasurementAssemblage, SolverSettings,
    StateAssemblage, ThermalContext, Verdict,
};

fn settings() -> SolverSettings {
    SolverSettings::default()
}

fn ctx() -> ThermalContext {
    ThermalContext::default()
}

fn werner_xz(p: f64) -> StateAssemblage {
    assemble(&werner(p).unwrap(), &pauli_measurements("XZ").unwrap()).unwrap()
}

/// Generalized robustness of Werner assemblages under X and Z, computed
/// independently with an external conic solver.
const SR_TABLE: [(f64, f64); 5] = [
    (1.0, 0.171572875),
    (0.9, 0.112994232),
    (0.75, 0.025126266),
    (0.72, 0.007552673),
    (0.6, 0.0),
];

/// `E(σ)` for the same family, same oracle.
const E_TABLE: [(f64, f64); 5] = [
    (1.0, 0.146446609),
    (0.9, 0.096446609),
    (0.75, 0.021446609),
    (0.72, 0.006446609),
    (0.6, 0.0),
];

#[test]
fn assemble_product_state() {
    let mut r = rng(10);
    let (ra, rb) = (random_state(&mut r, 2), random_state(&mut r, 3));
    let m = MeasurementAssemblage::new(2, 2, vec![random_basis(&mut r, 2), random_basis(&mut r, 2)]).unwrap();
    let sigma = assemble(&ra.kron(&rb), &m).unwrap();
    assert_eq!(sigma.dim(), 3);
    for x in 0..2 {
        for a in 0..2 {
            let expected = rb.op().scale(m.effect(a, x).inner(ra.op()));
            assert!(sigma.element(a, x).max_abs_diff(&expected) < 1e-12);
        }
    }
    assert_eq!(lhs_membership(&sigma, &settings()).unwrap().verdict(), Verdict::Free);
}

#[test]
fn assemble_max_entangled_gives_transposed_projectors() {
    let m = pauli_measurements("XYZ").unwrap();
    let sigma = assemble(&werner(1.0).unwrap(), &m).unwrap();
    for x in 0..3 {
        for a in 0..2 {
            // ⟨k|_A ⊗ I (Σ|ii⟩⟨jj|/2) |l⟩_A = |k⟩⟨l|/2, so η = Mᵀ
            let expected = m.effect(a, x).transpose().scale(0.5);
            assert!(sigma.element(a, x).max_abs_diff(&expected) < 1e-12);
            assert!((sigma.probability(a, x) - 0.5).abs() < 1e-12);
        }
    }
}

#[test]
fn assemble_white_noise_is_trivial() {
    let sigma = werner_xz(0.0);
    for e in sigma.elements() {
        assert!(e.max_abs_diff(&HermitianOperator::identity(2).scale(0.25)) < 1e-15);
    }
}

#[test]
fn assemble_rejects_bad_dims() {
    let rho = DensityMatrix::maximally_mixed(5);
    assert!(matches!(assemble(&rho, &pauli_measurements("XZ").unwrap()), Err(Error::Shape(_))));
}

#[test]
fn lhs_membership_examples() {
    let single = assemble(&werner(1.0).unwrap(), &pauli_measurements("X").unwrap()).unwrap();
    match lhs_membership(&single, &settings()).unwrap() {
        LhsMembership::Lhs { model } => {
            let strategies = DeterministicStrategies::new(1, 2).unwrap();
            let rebuilt = model.assemblage(&strategies);
            for (b, s) in rebuilt.iter().zip(single.elements()) {
                assert!(b.max_abs_diff(s) < 1e-7);
            }
        }
        other => panic!("single setting not LHS: {other:?}"),
    }
    assert_eq!(lhs_membership(&werner_xz(0.5), &settings()).unwrap().verdict(), Verdict::Free);
    match lhs_membership(&werner_xz(0.9), &settings()).unwrap() {
        LhsMembership::Steerable { witness, margin } => {
            assert!(margin > 0.0);
            let value: f64 = witness.iter().zip(werner_xz(0.9).elements()).map(|(w, s)| w.inner(s)).sum();
            assert!((value - 1.0).abs() < 1e-6);
        }
        other => panic!("Werner 0.9 not steerable: {other:?}"),
    }
}

#[test]
fn robustness_matches_oracle_table() {
    for (p, sr) in SR_TABLE {
        let r = steering_robustness(&werner_xz(p), &settings()).unwrap();
        assert!((r.sr - sr).abs() < 1e-6, "p={p}: {} vs {sr}", r.sr);
        assert!((r.sr - r.sr_dual).abs() < 1e-7, "p={p}: duality {} vs {}", r.sr, r.sr_dual);
        assert!(r.sr >= -1e-9);
        assert!(r.witness_excess < 1e-7);
        for f in &r.witness {
            assert!(f.min_eigenvalue().unwrap() >= -1e-12);
        }
    }
    assert!((SR_TABLE[0].1 - (3.0 - 2.0 * 2f64.sqrt())).abs() < 1e-9);
}

#[test]
fn robustness_is_monotone_in_visibility() {
    let mut last = -1.0;
    for k in 0..20 {
        let p = k as f64 / 19.0;
        let sr = steering_robustness(&werner_xz(p), &settings()).unwrap().sr;
        assert!(sr >= last - 1e-8, "p={p}: {sr} < {last}");
        last = sr;
    }
}

#[test]
fn witness_to_hamiltonians_examples() {
    let zero = vec![HermitianOperator::zeros(2); 4];
    let h = witness_to_hamiltonians(2, 2, &zero, &ctx()).unwrap();
    assert!(h.elements().iter().all(|e| e.max_abs() == 0.0));

    let f = steering_robustness(&werner_xz(1.0), &settings()).unwrap().witness;
    let h1 = witness_to_hamiltonians(2, 2, &f, &ctx()).unwrap();
    let h2 = witness_to_hamiltonians(2, 2, &f, &ThermalContext::new(2.0).unwrap()).unwrap();
    for ((a, b), w) in h1.elements().iter().zip(h2.elements()).zip(&f) {
        assert!(a.max_abs_diff(w) == 0.0);
        assert!(b.max_abs_diff(&w.scale(2.0)) < 1e-15);
    }

    let bad = vec![HermitianOperator::from_real_diagonal(&[1.0, -0.1]); 4];
    assert!(matches!(witness_to_hamiltonians(2, 2, &bad, &ctx()), Err(Error::Assemblage(_))));
}

#[test]
fn lhs_sigma_max_examples() {
    let mut r = rng(11);
    let random_hams = |r: &mut rand_chacha::ChaCha8Rng| {
        HamiltonianAssemblage::from_flat(2, 2, (0..4).map(|_| random_state(r, 2).into_op().scale(2.0)).collect())
            .unwrap()
    };

    let lhs = werner_xz(0.5);
    let hams = random_hams(&mut r);
    let max = lhs_sigma_max_deficit(&lhs, &hams, &ctx(), &settings()).unwrap();
    assert!(max.value >= avg_deficit(&lhs, &hams, &ctx()).unwrap() - 1e-9);

    let zero = HamiltonianAssemblage::zeros(2, 2, 2);
    let max = lhs_sigma_max_deficit(&werner_xz(0.9), &zero, &ctx(), &settings()).unwrap();
    assert!(max.energy.abs() < 1e-9);
    assert!((max.value - max.offset).abs() < 1e-9);
    assert!((max.offset - avg_deficit(&werner_xz(0.9), &zero, &ctx()).unwrap()).abs() < 1e-12);

    for _ in 0..5 {
        let sigma = random_qubit_assemblage(&mut r);
        let hams = random_hams(&mut r);
        let primal = lhs_sigma_max_deficit(&sigma, &hams, &ctx(), &settings()).unwrap();
        let dual = lhs_sigma_max_energy_dual(&sigma, &hams, &settings()).unwrap();
        assert!((primal.energy - dual).abs() < 1e-7, "{} vs {dual}", primal.energy);
    }
}

#[test]
fn lhs_sigma_max_model_is_in_lhs_sigma() {
    let sigma = werner_xz(0.9);
    let cert = certify_steering(&sigma, &ctx(), &settings()).unwrap();
    let max = lhs_sigma_max_deficit(&sigma, &cert.hamiltonians, &ctx(), &settings()).unwrap();
    let strategies = DeterministicStrategies::new(2, 2).unwrap();
    let b = max.model.assemblage(&strategies);
    for x in 0..2 {
        for a in 0..2 {
            assert!((b[x * 2 + a].trace() - sigma.probability(a, x)).abs() < 1e-7);
        }
    }
    for rho in &max.model.hidden_states {
        assert!(rho.min_eigenvalue().unwrap() > -1e-8);
    }
    // energy part evaluated on B* directly
    let direct: f64 = (0..4).map(|k| 0.5 * cert.hamiltonians.elements()[k].inner(&b[k])).sum();
    assert!((direct - max.energy).abs() < 1e-7);
}

#[test]
fn certification_examples() {
    let c = certify_steering(&werner_xz(0.9), &ctx(), &settings()).unwrap();
    assert!(c.gap > 1e-6);
    assert_eq!(c.verdict, Verdict::Resource);
    // H = F/(m P(x)) = F for m = 2, uniform P(x): gap = Σ P(x) tr(F(σ − B*)) ≥ sr/2
    assert!((c.gap - c.robustness.sr / 2.0).abs() < 1e-6, "{} vs {}", c.gap, c.robustness.sr);

    for p in [0.0, 0.3, 0.5, 0.65] {
        let c = certify_steering(&werner_xz(p), &ctx(), &settings()).unwrap();
        assert!(c.gap <= 1e-7, "p={p}: gap {}", c.gap);
        assert_eq!(c.verdict, Verdict::Free);
    }
}

#[test]
fn additive_constants_cancel() {
    let mut r = rng(12);
    for _ in 0..8 {
        let sigma = random_qubit_assemblage(&mut r);
        let c = certify_steering(&sigma, &ctx(), &settings()).unwrap();
        assert!((c.gap - c.energy_gap).abs() < 1e-8);
        let offset = deficit_offset(sigma.p_x(), |a, x| sigma.probability(a, x), &c.hamiltonians, &ctx()).unwrap();
        let from_energy = avg_energy(&sigma, &c.hamiltonians).unwrap() + offset;
        assert!((from_energy - c.deficit).abs() < 1e-9);
    }
}

#[test]
fn anomalous_energy_matches_oracle_table() {
    for (p, e) in E_TABLE {
        let got = anomalous_energy(&werner_xz(p), &ctx(), &settings()).unwrap();
        assert!((got.e - e).abs() < 1e-6, "p={p}: {} vs {e}", got.e);
        assert!(got.e >= -1e-9);
        for f in &got.witness {
            assert!(f.min_eigenvalue().unwrap() > -1e-7);
            assert!(f.max_eigenvalue().unwrap() < 1.0 + 1e-7);
        }
    }
    let lhs = assemble(&werner(1.0).unwrap(), &pauli_measurements("Z").unwrap()).unwrap();
    let e = anomalous_energy(&lhs, &ctx(), &settings()).unwrap();
    assert!(e.e.abs() <= 1e-7);
    assert_eq!(e.verdict, Verdict::Free);
}

/// `E(σ)` read back from its optimal witness: the deficit gap of `H = kT ln2 F`
/// against an independently solved `LHS(σ)` maximization.
#[test]
fn anomalous_energy_witness_attains_value() {
    let sigma = werner_xz(0.9);
    let e = anomalous_energy(&sigma, &ctx(), &settings()).unwrap();
    let f: Vec<HermitianOperator> = e.witness.iter().map(|w| w.psd_part().unwrap()).collect();
    let hams = witness_to_hamiltonians(2, 2, &f, &ctx()).unwrap();
    let gap = avg_deficit(&sigma, &hams, &ctx()).unwrap()
        - lhs_sigma_max_deficit(&sigma, &hams, &ctx(), &settings()).unwrap().value;
    assert!((gap - e.e).abs() < 1e-6, "{gap} vs {}", e.e);
}

#[test]
fn energy_and_robustness_agree_in_sign_on_werner_sweep() {
    for k in 0..20 {
        let p = k as f64 / 19.0;
        let sigma = werner_xz(p);
        let sr = steering_robustness(&sigma, &settings()).unwrap().sr;
        let e = anomalous_energy(&sigma, &ctx(), &settings()).unwrap().e;
        assert_eq!(Verdict::from_value(sr), Verdict::from_value(e), "p={p}: sr={sr} E={e}");
    }
}

#[test]
fn scale_covariance() {
    let sigma = werner_xz(0.8);
    let base_c = certify_steering(&sigma, &ctx(), &settings()).unwrap();
    let base_e = anomalous_energy(&sigma, &ctx(), &settings()).unwrap();
    for c in [0.01, 3.0, 1e3] {
        let scaled = ThermalContext::new(c).unwrap();
        let cert = certify_steering(&sigma, &scaled, &settings()).unwrap();
        let e = anomalous_energy(&sigma, &scaled, &settings()).unwrap();
        assert!((cert.gap - c * base_c.gap).abs() <= 1e-9 * c, "c={c}: {} vs {}", cert.gap, c * base_c.gap);
        assert!((e.e - c * base_e.e).abs() <= 1e-9 * c);
        assert_eq!(cert.verdict, base_c.verdict);
    }
}

#[test]
fn four_routes_agree_on_random_corpus() {
    let mut r = rng(13);
    let mut inconclusive = 0;
    let n = 40;
    for i in 0..n {
        let sigma = random_qubit_assemblage(&mut r);
        let lhs = lhs_membership(&sigma, &settings()).unwrap().verdict();
        let sr = Verdict::from_value(steering_robustness(&sigma, &settings()).unwrap().sr);
        let gap = certify_steering(&sigma, &ctx(), &settings()).unwrap().verdict;
        let e = anomalous_energy(&sigma, &ctx(), &settings()).unwrap().verdict;
        let all = [lhs, sr, gap, e];
        if all.contains(&Verdict::Inconclusive) {
            inconclusive += 1;
            continue;
        }
        assert!(all.iter().all(|v| *v == lhs), "instance {i}: {all:?}");
    }
    assert!(inconclusive * 20 < n, "{inconclusive} inconclusive of {n}");
}

#[test]
fn non_uniform_settings_distribution() {
    let sigma = werner_xz(0.9).with_p_x(vec![0.3, 0.7]).unwrap();
    let c = certify_steering(&sigma, &ctx(), &settings()).unwrap();
    assert!(c.gap >= c.robustness.sr / 2.0 - 1e-7);
    assert_eq!(c.verdict, Verdict::Resource);
}

#[test]
fn strategy_guard() {
    assert!(DeterministicStrategies::new(12, 2).is_ok());
    assert!(DeterministicStrategies::new(13, 2).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn assemblages_are_no_signalling(seed in any::<u64>(), n_settings in 1usize..4, n_outcomes in 2usize..4) {
        let mut r = rng(seed);
        let rho = random_state(&mut r, 6);
        let povms: Vec<Vec<HermitianOperator>> = (0..n_settings)
            .map(|_| {
                let basis = random_basis(&mut r, 3);
                if n_outcomes == 3 { basis } else { vec![&basis[0] + &basis[1], basis[2].clone()] }
            })
            .collect();
        let m = MeasurementAssemblage::new(n_settings, n_outcomes, povms).unwrap();
        let sigma = assemble(&rho, &m).unwrap();
        let reduced = thermocert::linalg::partial_trace(rho.op(), &[3, 2], &[1]).unwrap();
        for x in 0..n_settings {
            prop_assert!(sigma.marginal(x).max_abs_diff(&reduced) < 1e-9);
        }
        let total: f64 = (0..n_outcomes).map(|a| sigma.probability(a, 0)).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn product_measurements_keep_marginal(seed in any::<u64>()) {
        let mut r = rng(seed);
        let ra = random_state(&mut r, 2);
        let rb = random_state(&mut r, 2);
        let m = pauli_measurements("XZ").unwrap();
        let sigma = assemble(&DensityMatrix::new(kron(ra.op(), rb.op())).unwrap(), &m).unwrap();
        prop_assert!(sigma.reduced_state().max_abs_diff(rb.op()) < 1e-12);
    }
}
