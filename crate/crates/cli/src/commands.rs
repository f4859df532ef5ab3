use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use l2e_core::analysis::{mono_features, ms_matrix};
use l2e_core::feature::{mean_diff_probe, partition_means, scale_ks_scan, ScaleScores};
use l2e_core::gen::GenDumpSpec;
use l2e_core::io::{config_hash, read_dump, CsvReport, LoadedDump, RunConfig};
use l2e_core::selector::{bench_selection, fkr_curve, BenchConfig};
use l2e_core::toynet::run_experiment;
use l2e_core::{Error, NeuronStatsBank, Result};
use serde_json::json;

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn report(out: Option<&Path>, header: &[&str], params: &serde_json::Value) -> Result<CsvReport<Box<dyn Write>>> {
    CsvReport::new(sink(out)?, header, config_hash(params))
}

fn finish(r: CsvReport<Box<dyn Write>>) -> Result<()> {
    r.finish()?.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn stats(dump: &Path, out: Option<&Path>) -> Result<()> {
    let mut reader = read_dump(dump)?;
    let mut bank = NeuronStatsBank::new(reader.header().n_neurons)?;
    let mut row = Vec::with_capacity(reader.header().n_neurons);
    while reader.next_into(&mut row)?.is_some() {
        bank.update(&row)?;
    }
    let mut r = report(
        out,
        &["neuron", "count", "mean", "variance"],
        &json!({"command": "stats", "dump": dump}),
    )?;
    let count = bank.count().to_string();
    for (j, mean) in bank.means().iter().enumerate() {
        r.row([j.to_string(), count.clone(), mean.to_string(), opt(bank.variance(j))])?;
    }
    finish(r)
}

fn feature_names(dump: &LoadedDump, labels: Option<&Path>) -> Result<Vec<String>> {
    let Some(path) = labels else {
        return Ok(dump.header.feature_names.clone());
    };
    let names: Vec<String> = fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if names.len() != dump.header.n_features() {
        return Err(Error::Validation(format!(
            "{} names in {} but the dump has {} features",
            names.len(),
            path.display(),
            dump.header.n_features()
        )));
    }
    Ok(names)
}

pub fn probe(dump_path: &Path, labels: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let dump = LoadedDump::load(dump_path)?;
    let names = feature_names(&dump, labels)?;
    let ms = ms_matrix(&dump.activations)?;
    let mono = mono_features(&ms, &dump.labels)?;
    let mut present = vec![false; names.len()];
    for &l in &dump.labels {
        present[l] = true;
    }
    let mut r = report(
        out,
        &[
            "neuron",
            "feature",
            "feature_name",
            "is_mono_feature",
            "phi_l",
            "phi_l_minus",
            "count_l",
            "count_l_minus",
            "probe_f1",
        ],
        &json!({"command": "probe", "dump": dump_path, "names": names}),
    )?;
    for (j, mono_f) in mono.iter().enumerate() {
        let values = dump.activations.column(j);
        for f in (0..names.len()).filter(|&f| present[f]) {
            let f1 = mean_diff_probe(values, &dump.labels, f)?;
            let (phi, phi_minus, n_in, n_out) = if ms.valid[j] {
                let p = partition_means(ms.column(j), &dump.labels, f)?;
                (
                    p.phi_l.to_string(),
                    p.phi_l_minus.to_string(),
                    p.count_l.to_string(),
                    p.count_l_minus.to_string(),
                )
            } else {
                Default::default()
            };
            r.row([
                j.to_string(),
                f.to_string(),
                names[f].clone(),
                (*mono_f == Some(f)).to_string(),
                phi,
                phi_minus,
                n_in,
                n_out,
                f1.to_string(),
            ])?;
        }
    }
    finish(r)
}

pub fn ks(dumps: &[PathBuf], per_neuron: bool, out: Option<&Path>) -> Result<()> {
    let mut scales = Vec::with_capacity(dumps.len());
    for path in dumps {
        let dump = LoadedDump::load(path)?;
        let ms = ms_matrix(&dump.activations)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        scales.push(ScaleScores {
            name,
            neurons: (0..ms.n_neurons())
                .filter(|&j| ms.valid[j])
                .map(|j| ms.column(j).to_vec())
                .collect(),
            labels: dump.labels,
        });
    }
    let results = scale_ks_scan(&scales)?;
    let params = json!({"command": "ks", "dumps": dumps, "per_neuron": per_neuron});
    let mut r = report(out, &["scale", "neuron", "mono_feature", "d"], &params)?;
    for s in &results {
        if per_neuron {
            for n in &s.neurons {
                r.row([s.name.clone(), n.neuron.to_string(), n.mono_feature.to_string(), n.d.to_string()])?;
            }
        }
        // scale summary: mean D over valid neurons
        r.row([s.name.clone(), "all".into(), String::new(), s.mean_d.to_string()])?;
    }
    finish(r)
}

pub fn fkr(dump_path: &Path, rates: &[f64], out: Option<&Path>) -> Result<()> {
    let dump = LoadedDump::load(dump_path)?;
    let ms = ms_matrix(&dump.activations)?;
    let mono = mono_features(&ms, &dump.labels)?;
    let curve = fkr_curve(&ms, &dump.labels, &mono, rates)?;
    let mut r = report(
        out,
        &["rate", "k", "tau_k", "inhibitions", "false_kills", "fkr"],
        &json!({"command": "fkr", "dump": dump_path, "rates": rates}),
    )?;
    for c in curve {
        r.row([
            c.rate.to_string(),
            c.k.to_string(),
            c.tau_k.to_string(),
            c.inhibitions.to_string(),
            c.false_kills.to_string(),
            c.fkr.to_string(),
        ])?;
    }
    finish(r)
}

pub fn bench_select(cfg: BenchConfig, out: Option<&Path>) -> Result<()> {
    let rows = bench_selection(&cfg)?;
    let mut r = report(
        out,
        &["strategy", "n_neurons", "rate", "batches", "mean_ms", "stddev_ms", "mean_k_star"],
        &json!({"command": "bench-select", "config": cfg}),
    )?;
    for t in rows {
        r.row([
            t.strategy,
            t.n_neurons.to_string(),
            t.rate.to_string(),
            t.batches.to_string(),
            format!("{:.4}", t.mean_ms),
            format!("{:.4}", t.stddev_ms),
            t.mean_k_star.to_string(),
        ])?;
    }
    finish(r)
}

pub fn train(config: Option<&Path>, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = out
        .or_else(|| cfg.output.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("l2e-train"));
    let report = run_experiment(&cfg)?;
    fs::create_dir_all(&dir)?;

    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;

    let file = BufWriter::new(File::create(dir.join("trajectory.csv"))?);
    let mut csv = CsvReport::new(
        file,
        &["arm", "step", "layer", "tau_star", "k_star", "task_loss", "ms_loss"],
        report.config_hash.clone(),
    )?;
    for arm in [&report.baseline, &report.l2e] {
        for s in &arm.steps {
            for l in &s.layers {
                csv.row([
                    arm.arm.clone(),
                    s.step.to_string(),
                    l.layer.to_string(),
                    l.tau_star.to_string(),
                    l.k_star.map(|k| k.to_string()).unwrap_or_default(),
                    s.task_loss.to_string(),
                    s.ms_loss.to_string(),
                ])?;
            }
        }
    }
    csv.finish()?.flush()?;

    let (b, l) = (&report.baseline, &report.l2e);
    println!(
        "config_hash={} seed={} baseline: tau={:.4} acc={:.4} l2e: tau={:.4} acc={:.4} reports={}",
        report.config_hash,
        b.seed,
        b.mean_final_tau(),
        b.final_eval_accuracy,
        l.mean_final_tau(),
        l.final_eval_accuracy,
        dir.display()
    );
    Ok(())
}

pub fn gen_dump(spec: GenDumpSpec, out: &Path, bindings: Option<&Path>) -> Result<()> {
    let file = BufWriter::new(File::create(out)?);
    let (w, table) = l2e_core::gen::gen_dump(&spec, file)?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))?.sync_all()?;
    if let Some(path) = bindings {
        let mut r = CsvReport::new(BufWriter::new(File::create(path)?), &["neuron", "feature"], config_hash(&spec))?;
        for (j, b) in table.iter().enumerate() {
            r.row([j.to_string(), b.map(|f| f.to_string()).unwrap_or_default()])?;
        }
        r.finish()?.flush()?;
    }
    Ok(())
}
