//! Command implementations and their configuration schemas.

use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use lggan::baselines::{
    ba_fit, ba_sample, er_fit, er_sample, mmsb_fit, mmsb_sample, BaselineError,
};
use lggan::checkpoint::{self, Checkpoint};
use lggan::graph::{extract_ego_network, write_atomic};
use lggan::kernels::{
    diversity as diversity_histograms, downstream_trials, median, DownstreamConfig, KernelKind,
};
use lggan::rng;
use lggan::stats::{self, Bandwidths, CLUSTERING_BINS, ESTIMATOR};
use lggan::training::{LossRecord, TrainConfig, TrainError, TrainState, Trainer};
use lggan::{GraphDataset, LabeledGraph};

use crate::config::{opt, req, Key, Resolved, UNSET};
use crate::CliError;

pub type Exec = fn(&Resolved, &mut dyn Write, &mut dyn Write) -> Result<(), CliError>;

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn usage_err(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn read_dataset(path: &Path) -> Result<GraphDataset, CliError> {
    let parsed = GraphDataset::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    parsed
        .validate()
        .map_err(|(i, e)| CliError::Data(format!("{}: graph {i}: {e}", path.display())))?;
    Ok(parsed)
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Checkpoint::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_dataset(data: &GraphDataset, path: &Path) -> Result<(), CliError> {
    data.write(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_checkpoint(ck: &Checkpoint, path: &Path) -> Result<(), CliError> {
    ck.write(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Writes `text` to the `output` path, or to stdout when it is unset.
fn emit(cfg: &Resolved, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match cfg.raw("output") {
        UNSET => out.write_all(text.as_bytes()).map_err(data_err),
        path => write_atomic(Path::new(path), text.as_bytes())
            .map_err(|e| CliError::Data(format!("cannot write {path}: {e}"))),
    }
}

pub const PREPARE: &[Key] = &[
    req("input"),
    req("output"),
    opt("hops", "2"),
    opt("min_n", "30"),
    opt("max_n", "50"),
    opt("count", "100"),
    opt("name", "ego"),
    opt("seed", "0"),
];

pub fn prepare(cfg: &Resolved, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let host_set = read_dataset(cfg.path("input"))?;
    let [host] = host_set.graphs.as_slice() else {
        return Err(CliError::Data(format!(
            "host file must contain exactly one graph, found {}",
            host_set.len()
        )));
    };
    let (hops, min_n, max_n, count) = (
        cfg.get::<usize>("hops")?,
        cfg.get::<usize>("min_n")?,
        cfg.get::<usize>("max_n")?,
        cfg.get::<usize>("count")?,
    );
    if min_n > max_n {
        return Err(CliError::Usage("min_n must not exceed max_n".into()));
    }
    let mut centers: Vec<usize> = (0..host.n()).collect();
    centers.shuffle(&mut rng::stream(cfg.get("seed")?, "prepare"));
    let labels = host_set.num_node_labels;
    let mut data = GraphDataset::new(cfg.raw("name"), labels, labels);
    for c in centers {
        if data.len() == count {
            break;
        }
        if let Some(ego) = extract_ego_network(host, c, hops, min_n, max_n).map_err(data_err)? {
            data.graphs.push(ego);
        }
    }
    if data.len() < count {
        let _ = writeln!(
            err,
            "warning: only {} of {count} ego networks satisfy the size bounds",
            data.len()
        );
    }
    write_dataset(&data, cfg.path("output"))?;
    out.write_all(summary(&data).as_bytes()).map_err(data_err)
}

/// Count, classes present, mean sizes and label count of a dataset.
pub fn summary(data: &GraphDataset) -> String {
    let n = data.len().max(1) as f64;
    let mut classes: Vec<usize> = data.graphs.iter().map(LabeledGraph::graph_class).collect();
    classes.sort_unstable();
    classes.dedup();
    format!(
        "graphs {}\nclasses {}\navg_nodes {}\navg_edges {}\nnode_labels {}\n",
        data.len(),
        classes.len(),
        data.graphs.iter().map(|g| g.n() as f64).sum::<f64>() / n,
        data.graphs
            .iter()
            .map(|g| g.num_edges() as f64)
            .sum::<f64>()
            / n,
        data.num_node_labels
    )
}

pub const TRAIN: &[Key] = &[
    req("data"),
    req("output"),
    opt("curve", UNSET),
    opt("checkpoint_every", "0"),
    opt("resume", UNSET),
    opt("variant", "acgan"),
    opt("objective", "wasserstein"),
    opt("batch_size", "16"),
    opt("d_steps", "5"),
    opt("lr_g", "0.0001"),
    opt("lr_d", "0.0001"),
    opt("beta1", "0.5"),
    opt("beta2", "0.9"),
    opt("lambda_gp", "10"),
    opt("lambda_ct", "2"),
    opt("ct_margin", "0.2"),
    opt("ct_noise", "0.05"),
    opt("lambda_fm", "1"),
    opt("steps", "1000"),
    opt("seed", "0"),
    opt("latent_dim", "16"),
    opt("n_max", "0"),
    opt("gen_hidden", "64,64"),
    opt("disc_layers", "3"),
    opt("disc_hidden", "32"),
    opt("aggregation", "maxpool"),
    opt("residual", "true"),
    opt("class_prior", "empirical"),
];

fn train_config(cfg: &Resolved, data: &GraphDataset) -> Result<TrainConfig, CliError> {
    let n_max = match cfg.get::<usize>("n_max")? {
        0 => data.max_nodes().max(2),
        n => n,
    };
    Ok(TrainConfig {
        variant: cfg.get("variant")?,
        objective: cfg.get("objective")?,
        batch_size: cfg.get("batch_size")?,
        d_steps: cfg.get("d_steps")?,
        lr_g: cfg.get("lr_g")?,
        lr_d: cfg.get("lr_d")?,
        beta1: cfg.get("beta1")?,
        beta2: cfg.get("beta2")?,
        lambda_gp: cfg.get("lambda_gp")?,
        lambda_ct: cfg.get("lambda_ct")?,
        ct_margin: cfg.get("ct_margin")?,
        ct_noise: cfg.get("ct_noise")?,
        lambda_fm: cfg.get("lambda_fm")?,
        steps: cfg.get("steps")?,
        seed: cfg.get("seed")?,
        latent_dim: cfg.get("latent_dim")?,
        n_max,
        gen_hidden: cfg.list("gen_hidden")?,
        disc_layers: cfg.get("disc_layers")?,
        disc_hidden: cfg.get("disc_hidden")?,
        aggregation: cfg.get("aggregation")?,
        residual: cfg.get("residual")?,
        class_prior: cfg.get("class_prior")?,
    })
}

fn train_err(e: TrainError) -> CliError {
    match e {
        TrainError::Config(_) => usage_err(e),
        other => data_err(other),
    }
}

pub fn train(cfg: &Resolved, _out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let data = read_dataset(cfg.path("data"))?;
    let output = cfg.path("output");
    let resume = cfg.optional::<String>("resume")?;
    let mut trainer = match &resume {
        Some(path) => {
            let ck = read_checkpoint(Path::new(path))?;
            let mut state = checkpoint::to_train_state(&ck).map_err(data_err)?;
            state.config.steps = cfg.get("steps")?;
            let _ = writeln!(
                err,
                "resuming from step {}; model and optimizer settings come from the checkpoint",
                state.step
            );
            Trainer::resume(state, &data).map_err(train_err)?
        }
        None => Trainer::new(train_config(cfg, &data)?, &data).map_err(train_err)?,
    };
    let mut curve = match cfg.optional::<String>("curve")? {
        Some(path) => {
            let file = if resume.is_some() {
                OpenOptions::new().create(true).append(true).open(&path)
            } else {
                File::create(&path)
            }
            .map_err(|e| CliError::Data(format!("cannot open {path}: {e}")))?;
            let mut w = BufWriter::new(file);
            if resume.is_none() {
                writeln!(w, "# {}", LossRecord::HEADER).map_err(data_err)?;
            }
            Some(w)
        }
        None => None,
    };
    let every: u64 = cfg.get("checkpoint_every")?;
    while trainer.state.step < trainer.state.config.steps {
        match trainer.step() {
            Ok(record) => {
                if let Some(w) = curve.as_mut() {
                    writeln!(w, "{record}").map_err(data_err)?;
                }
                if every > 0 && record.step % every == 0 {
                    write_checkpoint(&checkpoint::from_train_state(&trainer.state), output)?;
                }
            }
            Err(TrainError::Diverged { step, last_good }) => {
                if let Some(w) = curve.as_mut() {
                    w.flush().map_err(data_err)?;
                }
                write_checkpoint(&checkpoint::from_train_state(&last_good), output)?;
                return Err(CliError::Diverged(format!(
                    "training diverged at step {step}; last good state (step {}) saved to {}",
                    last_good.step,
                    output.display()
                )));
            }
            Err(e) => return Err(train_err(e)),
        }
    }
    if let Some(w) = curve.as_mut() {
        w.flush().map_err(data_err)?;
    }
    write_checkpoint(&checkpoint::from_train_state(&trainer.state), output)
}

pub const GENERATE: &[Key] = &[
    req("checkpoint"),
    req("output"),
    opt("count", "100"),
    opt("threshold", "0.5"),
    opt("class", UNSET),
    opt("name", "generated"),
    opt("seed", "0"),
];

pub fn generate(
    cfg: &Resolved,
    _out: &mut dyn Write,
    _err: &mut dyn Write,
) -> Result<(), CliError> {
    let ck = read_checkpoint(cfg.path("checkpoint"))?;
    let state: TrainState = checkpoint::to_train_state(&ck).map_err(data_err)?;
    let graphs = state
        .sample_graphs(
            cfg.get("count")?,
            cfg.get("seed")?,
            cfg.get("threshold")?,
            cfg.optional("class")?,
        )
        .map_err(|e| match e {
            TrainError::ClassOutOfRange { .. } => usage_err(e),
            other => data_err(other),
        })?;
    let mut data = GraphDataset::new(cfg.raw("name"), state.num_labels, state.num_classes);
    data.graphs = graphs;
    write_dataset(&data, cfg.path("output"))
}

pub const EVALUATE: &[Key] = &[
    req("generated"),
    req("reference"),
    opt("output", UNSET),
    opt("per_class", "false"),
    opt("sigma_degree", "1"),
    opt("sigma_clustering", "0.1"),
    opt("sigma_orbit", "1"),
    opt("sigma_label", "0.5"),
];

pub fn evaluate(cfg: &Resolved, out: &mut dyn Write, _err: &mut dyn Write) -> Result<(), CliError> {
    let generated = read_dataset(cfg.path("generated"))?;
    let reference = read_dataset(cfg.path("reference"))?;
    let sigma = Bandwidths {
        degree: cfg.get("sigma_degree")?,
        clustering: cfg.get("sigma_clustering")?,
        orbit: cfg.get("sigma_orbit")?,
        label: cfg.get("sigma_label")?,
    };
    let report = stats::evaluate(&generated, &reference, &sigma).map_err(data_err)?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "# MMD between {} generated and {} reference graphs; clustering uses {CLUSTERING_BINS} bins",
        generated.len(),
        reference.len()
    );
    let rows = [
        ("degree", report.degree, sigma.degree),
        ("clustering", report.clustering, sigma.clustering),
        ("orbit", report.orbit, sigma.orbit),
        ("label", report.label, sigma.label),
    ];
    let _ = writeln!(text, "metric value sigma estimator");
    for (name, value, s) in rows {
        let _ = writeln!(text, "{name} {value} {s} {ESTIMATOR}");
    }
    let mut kv: Vec<(String, f64)> = rows
        .iter()
        .map(|(n, v, _)| (format!("mmd.{n}"), *v))
        .collect();
    if cfg.get::<bool>("per_class")? {
        let pc = stats::per_class_stats(&generated, &reference, &sigma).map_err(data_err)?;
        let _ = writeln!(text);
        let _ = writeln!(
            text,
            "# per-label subgraphs: nodes of one label induced within each graph"
        );
        let _ = writeln!(text, "label degree clustering orbit");
        for (label, [d, c, o]) in &pc.per_label {
            let _ = writeln!(text, "{label} {d} {c} {o}");
            kv.push((format!("per_class.{label}.degree"), *d));
            kv.push((format!("per_class.{label}.clustering"), *c));
            kv.push((format!("per_class.{label}.orbit"), *o));
        }
        for label in &pc.skipped {
            let _ = writeln!(text, "# label {label} skipped: absent from one of the sets");
        }
        if let Some([d, c, o]) = pc.average {
            let _ = writeln!(text, "avg {d} {c} {o}");
            kv.push(("per_class.avg.degree".into(), d));
            kv.push(("per_class.avg.clustering".into(), c));
            kv.push(("per_class.avg.orbit".into(), o));
        }
    }
    let _ = writeln!(text);
    for (k, v) in kv {
        let _ = writeln!(text, "{k}={v}");
    }
    emit(cfg, &text, out)
}

pub const CLASSIFY: &[Key] = &[
    req("train"),
    req("test"),
    opt("kernel", "wl"),
    opt("wl_iterations", "3"),
    opt("graphlet_size", "3"),
    opt("c", "1"),
    opt("trials", "10"),
    opt("fraction", "0.9"),
    opt("train_source", "generated"),
    opt("output", UNSET),
    opt("seed", "0"),
];

fn kernel_choice(cfg: &Resolved) -> Result<KernelKind, CliError> {
    Ok(match cfg.get::<KernelKind>("kernel")? {
        KernelKind::Wl { .. } => KernelKind::Wl {
            h: cfg.get("wl_iterations")?,
        },
        KernelKind::Graphlet { .. } => KernelKind::Graphlet {
            k: cfg.get("graphlet_size")?,
        },
        other => other,
    })
}

pub fn classify(cfg: &Resolved, out: &mut dyn Write, _err: &mut dyn Write) -> Result<(), CliError> {
    let train = read_dataset(cfg.path("train"))?;
    let test = read_dataset(cfg.path("test"))?;
    let kernel = kernel_choice(cfg)?;
    let seed: u64 = cfg.get("seed")?;
    let dc = DownstreamConfig {
        kernel,
        c: cfg.get("c")?,
        trials: cfg.get("trials")?,
        fraction: cfg.get("fraction")?,
        seed,
    };
    let accs = downstream_trials(&train, &test, &dc).map_err(data_err)?;
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let mut text = String::new();
    let _ = writeln!(text, "# kernel train_source accuracy n_train n_test seed");
    let _ = writeln!(
        text,
        "{kernel} {} {mean} {} {} {seed}",
        cfg.raw("train_source"),
        train.len(),
        test.len()
    );
    for (i, a) in accs.iter().enumerate() {
        let _ = writeln!(text, "trial {i} {a}");
    }
    emit(cfg, &text, out)
}

pub const DIVERSITY: &[Key] = &[
    req("generated"),
    req("training"),
    opt("kernel", "wl"),
    opt("wl_iterations", "3"),
    opt("graphlet_size", "3"),
    opt("bins", "20"),
    opt("output", UNSET),
];

pub fn diversity(
    cfg: &Resolved,
    out: &mut dyn Write,
    _err: &mut dyn Write,
) -> Result<(), CliError> {
    let generated = read_dataset(cfg.path("generated"))?;
    let training = read_dataset(cfg.path("training"))?;
    let d = diversity_histograms(&generated, &training, kernel_choice(cfg)?, cfg.get("bins")?)
        .map_err(data_err)?;
    let fmt_median = |v: &[f64]| median(v).map_or_else(|| "nan".to_string(), |m| m.to_string());
    let mut text = String::new();
    let _ = writeln!(
        text,
        "# nearest-neighbor distances under the normalized kernel"
    );
    let _ = writeln!(text, "# training_median {}", fmt_median(&d.training_min));
    let _ = writeln!(text, "# generated_median {}", fmt_median(&d.generated_min));
    let _ = writeln!(text, "bin_lo bin_hi training generated");
    for b in 0..d.training_counts.len() {
        let _ = writeln!(
            text,
            "{} {} {} {}",
            d.edges[b],
            d.edges[b + 1],
            d.training_counts[b],
            d.generated_counts[b]
        );
    }
    emit(cfg, &text, out)
}

pub const BASELINE_FIT: &[Key] = &[
    req("model"),
    req("data"),
    req("output"),
    opt("k", "2"),
    opt("alpha", "0.1"),
    opt("iters", "500"),
    opt("seed", "0"),
];

fn baseline_err(e: BaselineError) -> CliError {
    match e {
        BaselineError::Invalid(_) => usage_err(e),
        other => data_err(other),
    }
}

pub fn baseline_fit(
    cfg: &Resolved,
    _out: &mut dyn Write,
    _err: &mut dyn Write,
) -> Result<(), CliError> {
    let data = read_dataset(cfg.path("data"))?;
    let ck = match cfg.raw("model") {
        "er" => checkpoint::from_er(&er_fit(&data).map_err(baseline_err)?),
        "ba" => checkpoint::from_ba(&ba_fit(&data).map_err(baseline_err)?),
        "mmsb" => {
            let mut r = rng::stream(cfg.get("seed")?, "mmsb-fit");
            let params = mmsb_fit(
                &data,
                cfg.get("k")?,
                cfg.get("alpha")?,
                cfg.get("iters")?,
                &mut r,
            )
            .map_err(baseline_err)?;
            checkpoint::from_mmsb(&params)
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown baseline model `{other}` (expected er, ba or mmsb)"
            )))
        }
    };
    write_checkpoint(&ck, cfg.path("output"))
}

pub const BASELINE_SAMPLE: &[Key] = &[
    req("params"),
    req("output"),
    opt("count", "100"),
    opt("name", "baseline"),
    opt("seed", "0"),
];

pub fn baseline_sample(
    cfg: &Resolved,
    _out: &mut dyn Write,
    _err: &mut dyn Write,
) -> Result<(), CliError> {
    let ck = read_checkpoint(cfg.path("params"))?;
    let count: usize = cfg.get("count")?;
    let mut r = rng::stream(cfg.get("seed")?, "baseline-sample");
    let kind = ck.kind().map_err(data_err)?.to_string();
    let (graphs, labels, classes) = match kind.as_str() {
        "er" => {
            let p = checkpoint::to_er(&ck).map_err(data_err)?;
            let g = (0..count)
                .map(|_| er_sample(&p, &mut r))
                .collect::<Result<Vec<_>, _>>();
            (g, p.num_labels, p.num_classes)
        }
        "ba" => {
            let p = checkpoint::to_ba(&ck).map_err(data_err)?;
            let g = (0..count)
                .map(|_| ba_sample(&p, &mut r))
                .collect::<Result<Vec<_>, _>>();
            (g, p.num_labels, p.num_classes)
        }
        "mmsb" => {
            let p = checkpoint::to_mmsb(&ck).map_err(data_err)?;
            let g = (0..count)
                .map(|_| mmsb_sample(&p, &mut r))
                .collect::<Result<Vec<_>, _>>();
            (g, p.num_labels, p.num_classes)
        }
        other => {
            return Err(CliError::Data(format!(
                "`{other}` is not a baseline parameter file"
            )))
        }
    };
    let mut data = GraphDataset::new(cfg.raw("name"), labels, classes);
    data.graphs = graphs.map_err(baseline_err)?;
    write_dataset(&data, cfg.path("output"))
}
