use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use aqbench::analysis::{
    aq_report, estimate_execution, linear_regression_with_ci, read_records, volumetric_table,
    write_records, Bins, BenchmarkRecord, FidelityKind, TimingTable, VolumetricTable,
};
use aqbench::appsuite::{desk_suite, ingest_instance, ApplicationInstance};
use aqbench::circuit::Circuit;
use aqbench::compiler::decompose_to_native;
use aqbench::drb::{bootstrap_rates, extract_rates, fit_dataset, run_drb, DrbDesign, FitResult, RateExtraction};
use aqbench::mitigation::{plurality_vote_detailed, simple_aggregate};
use aqbench::par;
use aqbench::pipeline::run_instance;
use aqbench::rng::SeedStream;
use aqbench::simulator::Simulator;
use aqbench::{Distribution, Histogram, NoiseModel};
use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{usage, BenchSection, DrbSection, Method, ScoreSection, TimingSection, VoteSection};

pub fn write(out: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = out.join(name);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn read_text(path: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {path}"))
}

#[derive(Serialize)]
struct PairResult {
    pair: (usize, usize),
    low: FitResult,
    high: FitResult,
    rates: RateExtraction,
    r_2q_std: f64,
    r_1q_std: f64,
}

pub fn drb(cfg: &DrbSection, noise: &NoiseModel, seed: u64, out: &Path) -> Result<()> {
    let pairs = cfg.pair_list()?;
    noise.validate()?;
    let design = |p| DrbDesign {
        circuits_per_depth: cfg.circuits_per_depth,
        shots_per_circuit: cfg.shots_per_circuit,
        ..DrbDesign::standard_2q(p)
    };
    let (low_design, high_design) = (design(0.25), design(0.75));
    low_design.validate().map_err(|e| crate::config::UsageError(format!("drb: {e}")))?;
    if cfg.bootstrap == 1 {
        return usage("drb.bootstrap: need 0 (off) or at least 2 resamples");
    }

    let stream = SeedStream::new(seed, "cli-drb");
    let results = par::try_map_range(pairs.len(), |k| -> Result<_> {
        let (i, j) = pairs[k];
        let local = noise.pulled_back(&[i, j]);
        let s = stream.child("pair", k as u64);
        let low = run_drb(&low_design, &local, s.seed(0))?;
        let high = run_drb(&high_design, &local, s.seed(1))?;
        let (fl, fh) = (fit_dataset(&low)?, fit_dataset(&high)?);
        let rates = extract_rates(fl.error_rate, fh.error_rate);
        if !rates.in_range {
            log::warn!("pair {i}-{j}: solved rates left [0, 1] (e_pair {:.2e}, r_2q {:.2e})", rates.e_pair, rates.r_2q);
        }
        let (r_2q_std, r_1q_std) = if cfg.bootstrap > 0 {
            bootstrap_rates((&low, &fl), (&high, &fh), cfg.bootstrap, s.seed(2))?
        } else {
            (f64::NAN, f64::NAN)
        };
        let result = PairResult {
            pair: (i, j),
            low: fl,
            high: fh,
            rates,
            r_2q_std,
            r_1q_std,
        };
        Ok((result, low, high))
    })?;

    let mut csv = String::from("pair_i,pair_j,r_2q,bootstrap_std,ion_distance\n");
    for (r, _, _) in &results {
        let (i, j) = r.pair;
        writeln!(csv, "{i},{j},{},{},{}", r.rates.r_2q, r.r_2q_std, j - i).unwrap();
    }
    write(out, "drb_rates.csv", &csv)?;
    let fits: Vec<&PairResult> = results.iter().map(|r| &r.0).collect();
    write(out, "drb_fits.json", pretty(&fits))?;
    if cfg.write_datasets {
        for (r, low, high) in &results {
            let (i, j) = r.pair;
            write(out, &format!("datasets/pair_{i}_{j}_p25.json"), low.to_json())?;
            write(out, &format!("datasets/pair_{i}_{j}_p75.json"), high.to_json())?;
        }
    }
    let distance: Vec<f64> = fits.iter().map(|r| (r.pair.1 - r.pair.0) as f64).collect();
    let rate: Vec<f64> = fits.iter().map(|r| r.rates.r_2q).collect();
    match linear_regression_with_ci(&distance, &rate) {
        Ok(reg) => write(out, "drb_regression.json", pretty(&reg))?,
        Err(e) => log::info!("no distance regression: {e}"),
    }
    print!("{csv}");
    Ok(())
}

fn histogram_value(h: &Histogram) -> Value {
    serde_json::from_str(&h.to_json()).expect("histogram json")
}

fn distribution_value(d: &Distribution) -> Value {
    serde_json::from_str(&d.to_json()).expect("distribution json")
}

pub fn bench(cfg: &BenchSection, noise: &NoiseModel, seed: u64, out: &Path) -> Result<()> {
    noise.validate()?;
    let stream = SeedStream::new(seed, "cli-bench");
    let mut instances: Vec<ApplicationInstance> = Vec::new();
    if cfg.use_suite {
        instances.extend(desk_suite(&cfg.suite, stream.child("suite", 0).seed(0))?);
    }
    for spec in &cfg.instances {
        instances.push(ingest_instance(Path::new(&spec.circuit), Path::new(&spec.ideal))?);
    }
    if instances.is_empty() {
        return usage("bench: no instances (suite disabled and none ingested)");
    }
    let sim = Simulator::new(cfg.sim_max_width);
    let mut records = Vec::new();
    let pad = instances.iter().map(|i| i.label().len()).max().unwrap_or(0);
    let mut summary = format!("{:<pad$}  w_c   d_c  compiled_2q  f_simple  f_voted\n", "instance");
    for (k, inst) in instances.iter().enumerate() {
        let label = inst.label();
        if inst.width > cfg.sim_max_width {
            log::warn!("skipping {label}: width {} exceeds simulator limit {}", inst.width, cfg.sim_max_width);
            continue;
        }
        let o = run_instance(inst, noise, &cfg.run, stream.seed(k as u64), &sim)
            .with_context(|| format!("instance {label}"))?;
        let r = &o.record;
        writeln!(
            summary,
            "{label:<pad$} {:>4} {:>5} {:>12.1} {:>9.4} {:>8.4}",
            r.w_c, r.d_c, r.compiled_2q, r.f_simple, r.f_voted
        )
        .unwrap();
        if cfg.write_histograms {
            let doc = json!({
                "label": label,
                "variants": o.histograms.iter().map(histogram_value).collect::<Vec<_>>(),
                "simple": distribution_value(&o.simple),
                "voted": distribution_value(&o.voted),
                "vote_threshold": o.vote_threshold,
            });
            write(out, &format!("histograms/{k:03}_{label}.json"), pretty(&doc))?;
        }
        records.push(o.record);
    }
    let mut csv = Vec::new();
    write_records(&records, &mut csv)?;
    write(out, "records.csv", csv)?;
    print!("{summary}");
    Ok(())
}

fn bins_for(max: usize, from_zero: bool) -> Bins {
    let mut k = 0;
    while (1u64 << k) <= max as u64 {
        k += 1;
    }
    if from_zero {
        Bins::powers_of_two_from_zero(k)
    } else {
        Bins::powers_of_two(k.max(1))
    }
}

fn table_csv(t: &VolumetricTable) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    t.write_csv(&mut buf)?;
    Ok(buf)
}

pub fn score(cfg: &ScoreSection, out: &Path) -> Result<String> {
    if cfg.records.is_empty() {
        return usage("score.records: no records file given");
    }
    let file = fs::File::open(&cfg.records).with_context(|| format!("reading {}", cfg.records))?;
    let records: Vec<BenchmarkRecord> =
        read_records(file).with_context(|| format!("parsing {}", cfg.records))?;
    if records.is_empty() {
        return usage(format!("score.records: {} has no records", cfg.records));
    }
    let simple = aq_report(&records, false, cfg.threshold);
    let voted = aq_report(&records, true, cfg.threshold);

    let wb = bins_for(records.iter().map(|r| r.w_c).max().unwrap_or(1), false);
    let db = bins_for(records.iter().map(|r| r.d_c).max().unwrap_or(1), true);
    let table = |kind| volumetric_table(&records, &wb, &db, cfg.aggregate, kind);
    let (ts, tv) = (table(FidelityKind::Simple)?, table(FidelityKind::Voted)?);
    write(out, "volumetric_simple.csv", table_csv(&ts)?)?;
    write(out, "volumetric_voted.csv", table_csv(&tv)?)?;
    write(out, "volumetric_gain.csv", table_csv(&tv.difference(&ts)?)?)?;
    if records.iter().all(|r| r.f_predicted.is_some()) {
        write(out, "volumetric_predicted.csv", table_csv(&table(FidelityKind::Predicted)?)?)?;
    }
    write(out, "score.json", pretty(&json!({ "simple": simple, "voted": voted })))?;
    Ok(format!("#AQ (simple): {}\n#AQ (voted): {}\n", simple.score, voted.score))
}

/// Histogram on logical labels: bit `q` of the result is bit `map[q]` of the input.
fn to_logical(h: &Histogram, map: &[usize]) -> Result<Histogram> {
    if let Some(&p) = map.iter().find(|&&p| p >= h.width()) {
        return usage(format!("vote.maps: physical qubit {p} outside width {}", h.width()));
    }
    let mut out = Histogram::new(map.len());
    for (&b, &c) in h.counts() {
        let l = map.iter().enumerate().fold(0u64, |acc, (q, &p)| acc | (b >> p & 1) << q);
        out.add(l, c);
    }
    Ok(out)
}

pub fn vote(cfg: &VoteSection, out: &Path) -> Result<String> {
    if cfg.histograms.is_empty() {
        return usage("vote.histograms: no histogram files given");
    }
    let mut hists = cfg
        .histograms
        .iter()
        .map(|p| Histogram::from_json(&read_text(p)?).with_context(|| format!("parsing {p}")))
        .collect::<Result<Vec<_>>>()?;
    if let Some(path) = &cfg.maps {
        let doc: BTreeMap<String, Vec<Vec<usize>>> = serde_json::from_str(&read_text(path)?)
            .with_context(|| format!("parsing {path}"))?;
        let Some(maps) = doc.get("variant_maps") else {
            return usage(format!("vote.maps: {path} has no variant_maps"));
        };
        if maps.len() != hists.len() {
            return usage(format!(
                "vote.maps: {} maps for {} histograms",
                maps.len(),
                hists.len()
            ));
        }
        hists = hists.iter().zip(maps).map(|(h, m)| to_logical(h, m)).collect::<Result<_>>()?;
    }
    let (dist, threshold) = match cfg.method {
        Method::Simple => (simple_aggregate(&hists)?, None),
        Method::Vote => {
            let r = plurality_vote_detailed(&hists, cfg.t_start)?;
            (r.distribution, r.threshold)
        }
    };
    match (cfg.method, threshold) {
        (Method::Vote, Some(t)) => log::info!("vote settled at threshold {t}"),
        (Method::Vote, None) => log::info!("no string in two variants; simple aggregate returned"),
        _ => {}
    }
    let text = dist.to_json();
    write(out, "distribution.json", &text)?;
    Ok(text)
}

pub fn timing(cfg: &TimingSection, table: &TimingTable, out: &Path) -> Result<String> {
    if cfg.circuit.is_empty() {
        return usage("timing.circuit: no circuit file given");
    }
    table.validate()?;
    let circuit = Circuit::from_json_str(&read_text(&cfg.circuit)?)
        .with_context(|| format!("parsing {}", cfg.circuit))?;
    let native = decompose_to_native(&circuit)?;
    let est = estimate_execution(&native, table, cfg.shots)?;
    let text = pretty(&est);
    write(out, "timing.json", &text)?;
    Ok(text)
}
