use aqbench::analysis::hellinger_fidelity;
use aqbench::compiler::decompose_to_native;
use aqbench::drb::{bootstrap_rates, extract_rates, fit_dataset, run_drb, DrbDesign};
use aqbench::oracles::random_native_circuit;
use aqbench::rng::SeedStream;
use aqbench::simulator::{exact_channel, ideal_distribution, run_shots, MEDIAN_EPS_1Q};
use aqbench::{Circuit, Gate, NoiseModel};

#[test]
fn trajectories_converge_to_the_channel() {
    let root = SeedStream::new(21, "models-converge");
    let shots = 1_000_000u64;
    for width in 1..=4 {
        let mut rng = root.rng(width as u64);
        let c = Circuit::from_gates(width, random_native_circuit(&mut rng, width, 6 * width)).unwrap();
        let noise = NoiseModel::uniform(0.02, 0.08, 0.01);
        let exact = exact_channel(&c, &noise).unwrap();
        let hist = run_shots(&c, &noise, shots, width as u64).unwrap();
        let tv = exact.total_variation(&hist.to_distribution().unwrap());
        let k = (1u64 << width) as f64;
        assert!(tv <= 4.0 * (k / shots as f64).sqrt(), "width {width}: tv {tv}");
    }
}

#[test]
fn bell_fidelity_falls_with_entangler_error() {
    let mut bell = Circuit::new(2);
    bell.extend([Gate::h(0), Gate::cnot(0, 1)]).unwrap();
    let bell = decompose_to_native(&bell).unwrap();
    let ideal = ideal_distribution(&bell).unwrap();
    let shots = 100_000u64;
    let mut last = 1.0f64;
    for (i, eps) in [0.0, 0.01, 0.03, 0.1, 0.3].into_iter().enumerate() {
        let noise = NoiseModel::uniform(0.0, eps, 0.0);
        let h = run_shots(&bell, &noise, shots, i as u64).unwrap();
        let f = hellinger_fidelity(&ideal, &h.to_distribution().unwrap()).unwrap();
        // binomial spread of the off-support mass, doubled
        let slack = 2.0 * ((1.0 - f).max(1e-4) / shots as f64).sqrt();
        assert!(f <= last + slack, "eps {eps}: {f} after {last}");
        last = f;
    }
    assert!(last < 0.9);
}

#[test]
fn closed_loop_over_injected_rates() {
    for (k, eps) in [1e-3, 5e-3, 2e-2].into_iter().enumerate() {
        let noise = NoiseModel::uniform(MEDIAN_EPS_1Q, eps, 0.0);
        let s = 10 * k as u64;
        let low = run_drb(&DrbDesign::standard_2q(0.25), &noise, s).unwrap();
        let high = run_drb(&DrbDesign::standard_2q(0.75), &noise, s + 1).unwrap();
        let (fl, fh) = (fit_dataset(&low).unwrap(), fit_dataset(&high).unwrap());
        let r = extract_rates(fl.error_rate, fh.error_rate).r_2q;
        let (sd, _) = bootstrap_rates((&low, &fl), (&high, &fh), 200, s + 2).unwrap();
        assert!((r - eps).abs() <= 3.0 * sd, "eps {eps}: recovered {r} +- {sd}");
    }
}
