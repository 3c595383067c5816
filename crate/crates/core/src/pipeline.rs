//! One application instance end to end: variants, noisy shots, both
//! aggregation methods, and fidelities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{hellinger_fidelity, AnalysisError, BenchmarkRecord};
use crate::appsuite::ApplicationInstance;
use crate::circuit::two_qubit_gate_count;
use crate::compiler::{generate_variants, CompileError, DEFAULT_VARIANTS};
use crate::mitigation::{
    plurality_vote_detailed, simple_aggregate, MitigationError, DEFAULT_SHOTS_PER_VARIANT,
    DEFAULT_T_START,
};
use crate::outcome::{Distribution, Histogram};
use crate::par;
use crate::rng::SeedStream;
use crate::simulator::{NoiseModel, SimError, Simulator, EXACT_MAX_WIDTH};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Mitigation(#[from] MitigationError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub n_variants: usize,
    pub shots_per_variant: u64,
    pub t_start: usize,
    /// Device width for placements; `None` uses the instance width.
    pub physical_width: Option<usize>,
    /// Also compute the infinite-shot model fidelity (small widths only).
    pub predict: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_variants: DEFAULT_VARIANTS,
            shots_per_variant: DEFAULT_SHOTS_PER_VARIANT,
            t_start: DEFAULT_T_START,
            physical_width: None,
            predict: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct InstanceOutcome {
    pub record: BenchmarkRecord,
    /// Per-variant histograms on logical qubit labels.
    pub histograms: Vec<Histogram>,
    pub simple: Distribution,
    pub voted: Distribution,
    pub vote_threshold: Option<usize>,
}

/// `noise` is indexed by physical qubit. Deterministic in `seed`.
pub fn run_instance(
    inst: &ApplicationInstance,
    noise: &NoiseModel,
    cfg: &BenchConfig,
    seed: u64,
    sim: &Simulator,
) -> Result<InstanceOutcome, PipelineError> {
    let physical = cfg.physical_width.unwrap_or(inst.width).max(inst.width);
    let stream = SeedStream::new(seed, "bench");
    let set = generate_variants(&inst.reference, cfg.n_variants, physical, stream.seed(0))?;
    let shots = stream.child("shots", 0);
    let runs = par::try_map_range(set.variants.len(), |v| {
        let var = &set.variants[v];
        let local = noise.pulled_back(&var.map);
        let circuit = var.logical_circuit();
        let hist = sim.run_shots(&circuit, &local, cfg.shots_per_variant, shots.seed(v as u64))?;
        let exact = if cfg.predict && inst.width <= EXACT_MAX_WIDTH {
            Some(sim.exact_channel(&circuit, &local)?)
        } else {
            None
        };
        Ok::<_, SimError>((hist, exact, two_qubit_gate_count(&circuit)))
    })?;

    let compiled_2q =
        runs.iter().map(|r| r.2 as f64).sum::<f64>() / runs.len() as f64;
    let histograms: Vec<Histogram> = runs.iter().map(|r| r.0.clone()).collect();
    let simple = simple_aggregate(&histograms)?;
    let vote = plurality_vote_detailed(&histograms, cfg.t_start)?;
    let f_predicted = if runs.iter().all(|r| r.1.is_some()) && cfg.predict {
        let n = runs.len() as f64;
        let mut acc = std::collections::BTreeMap::new();
        for r in &runs {
            for (&i, &p) in r.1.as_ref().expect("checked").probs() {
                *acc.entry(i).or_insert(0.0) += p / n;
            }
        }
        let mixed = Distribution::from_weights(inst.width, acc).map_err(SimError::from)?;
        Some(hellinger_fidelity(&inst.ideal, &mixed)?)
    } else {
        None
    };
    let (w_c, d_c) = inst.dims();
    let record = BenchmarkRecord {
        family: inst.family.name().to_string(),
        w_c,
        d_c,
        compiled_2q,
        f_simple: hellinger_fidelity(&inst.ideal, &simple)?,
        f_voted: hellinger_fidelity(&inst.ideal, &vote.distribution)?,
        f_predicted,
    };
    Ok(InstanceOutcome {
        record,
        histograms,
        simple,
        voted: vote.distribution,
        vote_threshold: vote.threshold,
    })
}
