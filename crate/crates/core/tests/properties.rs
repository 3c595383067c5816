use std::collections::BTreeMap;
use std::f64::consts::PI;

use aqbench::analysis::{
    aq_score, estimate_execution, hellinger_fidelity, BenchmarkRecord, TimingTable, AQ_THRESHOLD,
};
use aqbench::appsuite::gen_qft;
use aqbench::circuit::{two_qubit_gate_count, unitary};
use aqbench::compiler::{decompose_to_native, generate_variants};
use aqbench::drb::extract_rates;
use aqbench::mitigation::{plurality_vote, poisson_binomial, simple_aggregate};
use aqbench::outcome::permute_index;
use aqbench::par::with_workers;
use aqbench::simulator::{run_shots, Simulator};
use aqbench::{Circuit, Distribution, Gate, Histogram, NoiseModel};
use proptest::prelude::*;

fn angle() -> impl Strategy<Value = f64> {
    -4.0 * PI..4.0 * PI
}

fn pair(n: usize) -> impl Strategy<Value = (usize, usize)> {
    (0..n, 1..n).prop_map(move |(a, d)| (a, (a + d) % n))
}

fn native_gate(n: usize) -> BoxedStrategy<Gate> {
    let one = prop_oneof![
        (0..n).prop_map(Gate::x90),
        (0..n).prop_map(Gate::y90),
        (0..n, angle()).prop_map(|(q, t)| Gate::rz(q, t)),
    ];
    if n < 2 {
        return one.boxed();
    }
    prop_oneof![
        3 => one,
        1 => (pair(n), angle()).prop_map(|((a, b), t)| Gate::zz(a, b, t)),
        1 => (pair(n), angle()).prop_map(|((a, b), t)| Gate::xx(a, b, t)),
    ]
    .boxed()
}

fn any_gate(n: usize) -> BoxedStrategy<Gate> {
    if n < 2 {
        return prop_oneof![3 => native_gate(n), 1 => (0..n).prop_map(Gate::h)].boxed();
    }
    prop_oneof![
        3 => native_gate(n),
        1 => (0..n).prop_map(Gate::h),
        1 => pair(n).prop_map(|(a, b)| Gate::cnot(a, b)),
        1 => pair(n).prop_map(|(a, b)| Gate::cz(a, b)),
        1 => (pair(n), angle()).prop_map(|((a, b), t)| Gate::cphase(a, b, t)),
    ]
    .boxed()
}

fn circuit(gate: fn(usize) -> BoxedStrategy<Gate>, widths: std::ops::RangeInclusive<usize>, len: usize) -> impl Strategy<Value = Circuit> {
    widths
        .prop_flat_map(move |n| (Just(n), prop::collection::vec(gate(n), 0..len)))
        .prop_map(|(n, gates)| Circuit::from_gates(n, gates).unwrap())
}

fn distribution(width: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(0.0..1.0f64, 1 << width).prop_map(move |w| {
        let map: BTreeMap<u64, f64> = w.iter().enumerate().map(|(i, &p)| (i as u64, p + 1e-3)).collect();
        Distribution::from_weights(width, map).unwrap()
    })
}

fn record() -> impl Strategy<Value = BenchmarkRecord> {
    (1..12usize, 0.0..1.0f64).prop_flat_map(|(w, f)| {
        (Just(w), 0..w * w + 8, Just(f)).prop_map(|(w, d, f)| BenchmarkRecord {
            family: "qft".into(),
            w_c: w,
            d_c: d,
            compiled_2q: d as f64,
            f_simple: f,
            f_voted: f,
            f_predicted: None,
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialization_round_trip_preserves_unitary(c in circuit(any_gate, 1..=3, 12)) {
        let back = Circuit::from_json_str(&c.to_canonical_string()).unwrap();
        prop_assert_eq!(back.to_canonical_string(), c.to_canonical_string());
        prop_assert_eq!(unitary(&back).unwrap().max_abs_diff(&unitary(&c).unwrap()), 0.0);
    }

    #[test]
    fn full_turns_do_not_change_gates(q in 0..3usize, t in angle(), k in -2i32..=2) {
        let shifted = t + 2.0 * PI * k as f64;
        for (a, b) in [
            (Gate::rz(q, t), Gate::rz(q, shifted)),
            (Gate::zz(q, 3, t), Gate::zz(q, 3, shifted)),
        ] {
            let (ca, cb) = (Circuit::from_gates(4, [a]).unwrap(), Circuit::from_gates(4, [b]).unwrap());
            // canonicalizing θ + 2πk rounds once, so allow a few ulps
            let (x, y) = (a.kind().angle().unwrap(), b.kind().angle().unwrap());
            prop_assert!((x - y).abs() <= 8.0 * f64::EPSILON * PI, "{x} vs {y}");
            prop_assert!(unitary(&ca).unwrap().max_abs_diff(&unitary(&cb).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn variants_are_equivalent_to_the_reference(
        c in circuit(any_gate, 1..=4, 10),
        extra in 0..3usize,
        seed in any::<u64>(),
    ) {
        let set = generate_variants(&c, 3, c.width() + extra, seed).unwrap();
        let reference = unitary(&c).unwrap();
        for v in &set.variants {
            let u = unitary(&v.logical_circuit()).unwrap();
            prop_assert!(u.phase_distance(&reference) < 1e-9, "distance {}", u.phase_distance(&reference));
        }
        let again = generate_variants(&c, 3, c.width() + extra, seed).unwrap();
        prop_assert_eq!(set.to_json(), again.to_json());
    }

    #[test]
    fn lowering_never_adds_entanglers(c in circuit(any_gate, 2..=5, 20), swaps in prop::collection::vec(pair(5), 0..3)) {
        let n = c.width();
        let swaps: Vec<_> = swaps.into_iter().filter(|&(a, b)| a < n && b < n).collect();
        let n_swaps = swaps.len();
        let mut c = c;
        for (a, b) in swaps {
            c.push(Gate::swap(a, b)).unwrap();
        }
        let native = decompose_to_native(&c).unwrap();
        prop_assert!(native.is_native());
        prop_assert!(two_qubit_gate_count(&native) <= two_qubit_gate_count(&c) + 2 * n_swaps);
    }

    #[test]
    fn state_norm_is_preserved(c in circuit(native_gate, 1..=5, 25)) {
        let sim = Simulator::default();
        let gates: Vec<Gate> = c.gates().copied().collect();
        for k in 0..=gates.len() {
            let prefix = Circuit::from_gates(c.width(), gates[..k].iter().copied()).unwrap();
            let norm = sim.final_state(&prefix).unwrap().norm_sqr();
            prop_assert!((norm - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn shots_depend_only_on_the_seed(c in circuit(native_gate, 1..=4, 15), seed in any::<u64>()) {
        let noise = NoiseModel::uniform(0.02, 0.1, 0.01);
        let a = with_workers(1, || run_shots(&c, &noise, 300, seed).unwrap());
        let b = with_workers(3, || run_shots(&c, &noise, 300, seed).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn rate_extraction_inverts_mixing(e_pair in 0.0..1.0f64, r in 0.0..1.0f64) {
        let e_low = 0.75 * e_pair + 0.25 * r;
        let e_high = 0.25 * e_pair + 0.75 * r;
        let x = extract_rates(e_low, e_high);
        prop_assert!((x.e_pair - e_pair).abs() < 1e-12);
        prop_assert!((x.r_2q - r).abs() < 1e-12);
    }

    #[test]
    fn poisson_binomial_sums_to_one(f in prop::collection::vec(0.0..=1.0f64, 0..30)) {
        let pmf = poisson_binomial(&f);
        prop_assert_eq!(pmf.len(), f.len() + 1);
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(pmf.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn vote_is_normalized_within_the_union_of_supports(
        counts in prop::collection::vec(prop::collection::vec(0..20u64, 8), 1..9),
        t in 2..9usize,
    ) {
        let hists: Vec<Histogram> = counts
            .iter()
            .map(|row| {
                let mut h = Histogram::new(3);
                for (b, &c) in row.iter().enumerate() {
                    h.add(b as u64, c);
                }
                h.add(0, 1);
                h
            })
            .collect();
        let d = plurality_vote(&hists, t).unwrap();
        prop_assert!((d.total() - 1.0).abs() < 1e-12);
        for &b in d.probs().keys() {
            prop_assert!(hists.iter().any(|h| h.count(b) > 0));
        }
    }

    #[test]
    fn hellinger_is_symmetric_and_label_free(
        p in distribution(3),
        q in distribution(3),
        perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
    ) {
        let f = hellinger_fidelity(&p, &q).unwrap();
        prop_assert!((f - hellinger_fidelity(&q, &p).unwrap()).abs() < 1e-12);
        prop_assert!((hellinger_fidelity(&p, &p).unwrap() - 1.0).abs() < 1e-9);
        let relabel = |d: &Distribution| {
            let m = d.probs().iter().map(|(&i, &v)| (permute_index(i, &perm), v)).collect();
            Distribution::new(3, m).unwrap()
        };
        prop_assert!((hellinger_fidelity(&relabel(&p), &relabel(&q)).unwrap() - f).abs() < 1e-12);
        if f > 1.0 - 1e-12 {
            prop_assert!(p.total_variation(&q) < 1e-5);
        }
    }

    #[test]
    fn aq_score_is_monotone(
        records in prop::collection::vec(record(), 1..25),
        raise in any::<prop::sample::Index>(),
        bump in 0.0..1.0f64,
        extra in record(),
    ) {
        let base = aq_score(&records, false, AQ_THRESHOLD);
        let mut raised = records.clone();
        let r = &mut raised[raise.index(records.len())];
        r.f_simple += (1.0 - r.f_simple) * bump;
        prop_assert!(aq_score(&raised, false, AQ_THRESHOLD) >= base);
        let mut added = records.clone();
        added.push(BenchmarkRecord { f_simple: extra.f_simple.max(0.5), ..extra });
        prop_assert!(aq_score(&added, false, AQ_THRESHOLD) >= base);
    }

    #[test]
    fn execution_time_adds_under_concatenation(
        a in circuit(native_gate, 3..=3, 20),
        b in circuit(native_gate, 3..=3, 20),
    ) {
        let timing = TimingTable::default();
        let joined = Circuit::from_gates(3, a.gates().chain(b.gates()).copied()).unwrap();
        let ta = estimate_execution(&a, &timing, 1).unwrap().total_us;
        let tb = estimate_execution(&b, &timing, 1).unwrap().total_us;
        let tj = estimate_execution(&joined, &timing, 1).unwrap().total_us;
        prop_assert!((tj - (ta + tb - timing.shot_overhead())).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn voting_sharpens_a_dominant_string(
        rows in prop::collection::vec((50..=100u64, prop::collection::vec(0..20u64, 7)), 25),
        target in 0..8u64,
    ) {
        let hists: Vec<Histogram> = rows
            .iter()
            .map(|(main, rest)| {
                let mut h = Histogram::new(3);
                h.add(target, *main);
                let mut left = 100 - main;
                for (k, &c) in (0..8u64).filter(|&b| b != target).zip(rest) {
                    let c = c.min(left);
                    h.add(k, c);
                    left -= c;
                }
                // remaining shots spread one per string until used up
                let mut k = 0;
                while left > 0 {
                    let b = (0..8u64).filter(|&b| b != target).nth(k % 7).unwrap();
                    if h.count(b) < 19 {
                        h.add(b, 1);
                        left -= 1;
                    }
                    k += 1;
                }
                h
            })
            .collect();
        prop_assume!(hists.iter().all(|h| (0..8u64).all(|b| b == target || h.count(b) < 20)));
        let voted = plurality_vote(&hists, 7).unwrap().prob(target);
        let simple = simple_aggregate(&hists).unwrap().prob(target);
        prop_assert!(voted > simple, "voted {voted} simple {simple}");
    }

    #[test]
    fn disjoint_supports_fall_back_to_simple(counts in prop::collection::vec(1..50u64, 2..8)) {
        let hists: Vec<Histogram> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let mut h = Histogram::new(3);
                h.add(i as u64, c);
                h
            })
            .collect();
        prop_assert_eq!(plurality_vote(&hists, 7).unwrap(), simple_aggregate(&hists).unwrap());
    }

    #[test]
    fn qft_reference_depth(w in 1..=12usize, input in any::<u64>()) {
        let inst = gen_qft(w, input % (1 << w), false).unwrap();
        prop_assert_eq!(inst.dims(), (w, w * (w - 1) / 2));
    }
}
