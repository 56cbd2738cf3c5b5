use criterion::{black_box, criterion_group, criterion_main, Criterion};
use thermocert::families::{noisy_mubs, pauli_measurements, werner};
use thermocert::incompat::{certify_channel_ensemble, incompat_via_energy, ChannelEnsemble};
use thermocert::steering::{anomalous_energy, assemble, certify_steering, steering_robustness};
use thermocert::thermo::work_deficit;
use thermocert::{ChoiMatrix, DensityMatrix, HermitianOperator, SolverSettings, ThermalContext};

fn thermo(c: &mut Criterion) {
    let ctx = ThermalContext::default();
    for d in [2, 4, 8] {
        let h = HermitianOperator::from_real_diagonal(&(0..d).map(|k| k as f64 * 0.3).collect::<Vec<_>>());
        let rho = DensityMatrix::basis(d, 0);
        c.bench_function(&format!("work_deficit d={d}"), |b| {
            b.iter(|| work_deficit(black_box(&rho), black_box(&h), &ctx).unwrap())
        });
    }
}

fn steering(c: &mut Criterion) {
    let s = SolverSettings::default();
    let ctx = ThermalContext::default();
    let sigma = assemble(&werner(0.9).unwrap(), &pauli_measurements("XZ").unwrap()).unwrap();
    c.bench_function("steering_robustness werner XZ", |b| b.iter(|| steering_robustness(black_box(&sigma), &s).unwrap()));
    c.bench_function("certify_steering werner XZ", |b| b.iter(|| certify_steering(black_box(&sigma), &ctx, &s).unwrap()));
    c.bench_function("anomalous_energy werner XZ", |b| b.iter(|| anomalous_energy(black_box(&sigma), &ctx, &s).unwrap()));
    let xyz = assemble(&werner(0.9).unwrap(), &pauli_measurements("XYZ").unwrap()).unwrap();
    c.bench_function("steering_robustness werner XYZ", |b| b.iter(|| steering_robustness(black_box(&xyz), &s).unwrap()));
}

fn incompat(c: &mut Criterion) {
    let s = SolverSettings::default();
    let ctx = ThermalContext::default();
    let m = noisy_mubs(3, 2, 0.8).unwrap();
    c.bench_function("incompat_via_energy qutrit", |b| b.iter(|| incompat_via_energy(black_box(&m), &ctx, &s).unwrap()));
    let id = ChoiMatrix::identity(2);
    let ens = ChannelEnsemble::new(vec![id.clone(), id]).unwrap();
    c.bench_function("certify_channel_ensemble (id,id)", |b| {
        b.iter(|| certify_channel_ensemble(black_box(&ens), &ctx, &s).unwrap())
    });
}

criterion_group!(benches, thermo, steering, incompat);
criterion_main!(benches);
