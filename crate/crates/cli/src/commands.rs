use std::path::{Path, PathBuf};

use lrg_core::experiment::{
    compare, random_scale_control, run_variant, stratified_split, write_comparisons_csv,
    ControlConfig, ExperimentConfig, ExperimentData, ModelSettings, ScaleRange, ScanSettings,
    ScoreTable, Variant,
};
use lrg_core::graph::{write_graph, write_masks, SplitTag};
use lrg_core::sbm::{generate_sbm, SbmConfig};
use lrg_core::spectral::SpectralError;
use lrg_core::{ExperimentError, RenormError};
use serde_json::json;

use crate::args::*;
use crate::error::CliError;
use crate::manifest::ManifestBuilder;

pub struct Context {
    pub argv: Vec<String>,
    pub seed: u64,
}

/// Resolves a dataset path, falling back to `$LRG_DATA_DIR/<path>` for
/// relative paths that do not exist as given.
pub fn resolve_dataset(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("LRG_DATA_DIR") {
        Some(root) => {
            let candidate = Path::new(&root).join(path);
            if candidate.exists() {
                candidate
            } else {
                path.to_path_buf()
            }
        }
        None => path.to_path_buf(),
    }
}

fn check_scan(s: &ScanArgs) -> Result<ScanSettings, CliError> {
    if !(s.tau_min > 0.0 && s.tau_max > s.tau_min && s.tau_max.is_finite()) {
        return Err(CliError::Usage(format!(
            "need 0 < --tau-min < --tau-max, got {} and {}",
            s.tau_min, s.tau_max
        )));
    }
    if s.points < 8 {
        return Err(CliError::Usage(format!("--points must be at least 8, got {}", s.points)));
    }
    Ok(ScanSettings {
        tau_min: s.tau_min,
        tau_max: s.tau_max,
        points: s.points,
    })
}

fn config_json<T: serde::Serialize>(args: &T, seed: u64) -> serde_json::Value {
    json!({ "seed": seed, "args": args })
}

pub fn generate_sbm_cmd(ctx: &Context, a: &GenerateSbmArgs) -> Result<(), CliError> {
    let cfg = SbmConfig {
        block_sizes: a.sizes.clone(),
        p_in: a.p_in,
        p_out: a.p_out,
        n_features: a.features,
    };
    if a.sizes.iter().sum::<usize>() == 0 {
        return Err(CliError::Usage("--sizes must contain a positive block".into()));
    }
    if !(0.0..=1.0).contains(&a.p_in) || !(0.0..=1.0).contains(&a.p_out) {
        return Err(CliError::Usage("--p-in and --p-out must lie in [0, 1]".into()));
    }
    let mut manifest = ManifestBuilder::new("generate-sbm", &ctx.argv, config_json(a, ctx.seed));
    let g = generate_sbm(&cfg, ctx.seed).map_err(ExperimentError::from)?;
    write_graph(&g, &a.out).map_err(ExperimentError::from)?;
    for f in ["edges.tsv", "features.csv", "labels.csv"] {
        manifest.output(a.out.join(f));
    }
    if a.masks {
        let split = stratified_split(g.labels(), ctx.seed);
        let mut tags = vec![SplitTag::Test; g.n_nodes()];
        for &i in &split.train {
            tags[i] = SplitTag::Train;
        }
        for &i in &split.val {
            tags[i] = SplitTag::Val;
        }
        write_masks(&tags, &a.out).map_err(ExperimentError::from)?;
        manifest.output(a.out.join("masks.csv"));
    }
    manifest.write(&a.out)?;
    println!(
        "wrote {} nodes, {} edges to {}",
        g.n_nodes(),
        g.n_edges(),
        a.out.display()
    );
    Ok(())
}

pub fn analyze_cmd(ctx: &Context, a: &AnalyzeArgs) -> Result<(), CliError> {
    let scan_cfg = check_scan(&a.scan)?;
    let dir = resolve_dataset(&a.graph);
    let mut manifest = ManifestBuilder::new("analyze", &ctx.argv, config_json(a, ctx.seed));
    let data = ExperimentData::load(&dir)?;
    manifest.input_dataset(&dir)?;
    let scan = data.scan(&scan_cfg)?;
    std::fs::create_dir_all(&a.out)?;
    let (scan_path, peaks_path) = (a.out.join("scan.csv"), a.out.join("peaks.csv"));
    scan.write_scan_csv(&scan_path).map_err(ExperimentError::from)?;
    scan.write_peaks_csv(&peaks_path).map_err(ExperimentError::from)?;
    manifest.output(&scan_path);
    manifest.output(&peaks_path);
    manifest.write(&a.out)?;
    let graph = &data.dataset.graph;
    println!(
        "{}: {} nodes, {} edges in the largest component",
        data.dataset.name,
        graph.n_nodes(),
        graph.n_edges()
    );
    println!("S(tau_min) = {:.6}", scan.entropy[0]);
    match scan.characteristic_scale() {
        Ok(peak) => {
            println!("tau* = {:.6} (C = {:.6})", peak.tau, peak.heat_capacity);
            for (rank, p) in scan.characteristic_scales.iter().enumerate().skip(1) {
                println!("peak {}: tau = {:.6} (C = {:.6})", rank + 1, p.tau, p.heat_capacity);
            }
            println!("wrote {} and {}", scan_path.display(), peaks_path.display());
            Ok(())
        }
        Err(_) => Err(CliError::Analysis(format!(
            "no heat-capacity peak in [{}, {}]; widen the scan with a larger --tau-max \
             (or a smaller --tau-min)",
            scan_cfg.tau_min, scan_cfg.tau_max
        ))),
    }
}

pub fn renormalize_cmd(ctx: &Context, a: &RenormalizeArgs) -> Result<(), CliError> {
    let scan_cfg = check_scan(&a.scan)?;
    if let Some(t) = a.tau {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Usage(format!("--tau must be positive and finite, got {t}")));
        }
    }
    let dir = resolve_dataset(&a.graph);
    let mut manifest = ManifestBuilder::new("renormalize", &ctx.argv, config_json(a, ctx.seed));
    let data = ExperimentData::load(&dir)?;
    manifest.input_dataset(&dir)?;
    let tau = match a.tau {
        Some(t) => t,
        None => data.characteristic_taus(&scan_cfg, 1)?[0],
    };
    let partition = data.partition(tau)?;
    let graph = &data.dataset.graph;
    let rewired = lrg_core::rewire(graph, &partition).map_err(ExperimentError::from)?;
    log::info!(
        "tau={tau}: {} macro-nodes from {} nodes",
        partition.n_macro(),
        partition.n_nodes()
    );

    let out_graph = a.out.join("graph");
    write_graph(rewired.graph(), &out_graph).map_err(ExperimentError::from)?;
    if let Some(tags) = &data.dataset.masks {
        write_masks(tags, &out_graph).map_err(ExperimentError::from)?;
    }
    let mut text = String::from("node,source_id,macro_node\n");
    for (u, (&id, &m)) in graph.node_ids().iter().zip(partition.assignment()).enumerate() {
        text.push_str(&format!("{u},{id},{m}\n"));
    }
    let partition_path = a.out.join("partition.csv");
    std::fs::write(&partition_path, text)?;
    let provenance = json!({
        "source": dir.display().to_string(),
        "tau": tau,
        "auto": a.tau.is_none(),
        "n_nodes": graph.n_nodes(),
        "n_macro_nodes": partition.n_macro(),
        "n_edges_before": graph.n_edges(),
        "n_edges_after": rewired.graph().n_edges(),
        "n_macro_edges": rewired.macro_edges().len(),
    });
    let provenance_path = a.out.join("provenance.json");
    std::fs::write(&provenance_path, serde_json::to_string_pretty(&provenance)? + "\n")?;
    for p in [&out_graph, &partition_path, &provenance_path] {
        manifest.output(p.clone());
    }
    manifest.write(&a.out)?;
    println!(
        "tau = {tau}: {} macro-nodes, {} -> {} edges; wrote {}",
        partition.n_macro(),
        graph.n_edges(),
        rewired.graph().n_edges(),
        a.out.display()
    );
    Ok(())
}

fn experiment_config(
    ctx: &Context,
    m: &ModelArgs,
    variant: Variant,
    n_encoders: Option<usize>,
    taus: Vec<f64>,
) -> Result<ExperimentConfig, CliError> {
    let scan = check_scan(&m.scan)?;
    if m.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let mut cfg = ExperimentConfig::new(m.encoder, variant);
    if let Some(n) = n_encoders {
        cfg.n_encoders = n;
    } else if variant == Variant::MR && !taus.is_empty() {
        cfg.n_encoders = 1 + taus.len();
    }
    cfg.taus = taus;
    cfg.seeds = (0..m.seeds as u64).map(|k| ctx.seed + k).collect();
    cfg.split = m.split;
    cfg.split_seed = ctx.seed;
    cfg.model = ModelSettings {
        hidden_dim: m.hidden,
        out_dim: m.out_dim,
        gat_heads: m.heads,
        epochs: m.epochs,
        lr: m.lr,
    };
    cfg.scan = scan;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

pub fn train_cmd(ctx: &Context, a: &TrainArgs) -> Result<(), CliError> {
    let cfg = experiment_config(ctx, &a.model, a.variant, a.n_encoders, a.taus.clone())?;
    let dir = resolve_dataset(&a.dataset);
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(cfg.label().to_ascii_lowercase()));
    let mut manifest = ManifestBuilder::new(
        "train",
        &ctx.argv,
        json!({ "seed": ctx.seed, "args": a, "experiment": &cfg }),
    );
    let data = ExperimentData::load(&dir)?;
    manifest.input_dataset(&dir)?;
    let run = run_variant(&data, &cfg)?;
    for p in run.write_dir(&out)? {
        manifest.output(p);
    }
    manifest.write(&out)?;
    println!(
        "{} on {}: test accuracy {:.2} ± {:.2} % over {} seeds{}",
        run.label,
        run.dataset,
        100.0 * run.mean_accuracy(),
        100.0 * run.std_accuracy(),
        run.runs.len(),
        if run.taus.is_empty() {
            String::new()
        } else {
            format!(" (tau = {:?})", run.taus)
        }
    );
    println!("wrote {}", out.join("results.csv").display());
    Ok(())
}

fn scores_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("scores.csv")
    } else {
        p.to_path_buf()
    }
}

pub fn compare_cmd(ctx: &Context, a: &CompareArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("compare", &ctx.argv, config_json(a, ctx.seed));
    let (pa, pb) = (scores_path(&a.a), scores_path(&a.b));
    let ta = ScoreTable::read_csv(&pa)?;
    let tb = ScoreTable::read_csv(&pb)?;
    manifest.input_file(&pa)?;
    manifest.input_file(&pb)?;
    let c = compare(&ta, &tb)?;
    std::fs::create_dir_all(&a.out)?;
    let path = a.out.join("comparisons.csv");
    write_comparisons_csv(&path, &[(&c, a.alt)])?;
    manifest.output(&path);
    manifest.write(&a.out)?;
    let r = c.result(a.alt);
    println!(
        "{} vs {} ({}): p = {:.6e}, n_effective = {}, verdict {}",
        c.variant_a,
        c.variant_b,
        a.alt.as_str(),
        r.p_value,
        r.n_effective,
        c.verdict
    );
    Ok(())
}

pub fn random_control_cmd(ctx: &Context, a: &RandomControlArgs) -> Result<(), CliError> {
    if a.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let taus = a.tau.map(|t| vec![t]).unwrap_or_default();
    let base = experiment_config(ctx, &a.model, Variant::MR, Some(2), taus)?;
    let dir = resolve_dataset(&a.dataset);
    let mut manifest = ManifestBuilder::new(
        "random-control",
        &ctx.argv,
        json!({ "seed": ctx.seed, "args": a, "experiment": &base }),
    );
    let data = ExperimentData::load(&dir)?;
    manifest.input_dataset(&dir)?;
    let mut cfg = ControlConfig::new(base);
    if !a.range.is_empty() {
        cfg.ranges = a.range.clone();
    } else {
        cfg.ranges = ScaleRange::STANDARD.to_vec();
    }
    cfg.n_samples = a.samples;
    cfg.sampler_seed = ctx.seed;
    let report = random_scale_control(&data, &cfg)?;
    std::fs::create_dir_all(&a.out)?;
    let path = a.out.join("control_report.json");
    report.write_json(&path)?;
    manifest.output(&path);
    manifest.write(&a.out)?;
    println!(
        "{} at tau* = {:.4}: accuracy {:.2} %; {} of {} random scales significantly better \
         (threshold {:.6})",
        report.model,
        report.characteristic_tau,
        100.0 * report.characteristic_accuracy,
        report.n_significant,
        report.samples.len(),
        report.bonferroni_threshold
    );
    if let (Some(b), Some(w)) = (&report.best, &report.worst) {
        println!(
            "best random tau = {:.4} ({:.2} %), worst random tau = {:.4} ({:.2} %)",
            b.tau,
            100.0 * b.mean_accuracy,
            w.tau,
            100.0 * w.mean_accuracy
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// Exit-code classification of library errors.
pub fn classify(e: ExperimentError) -> CliError {
    use lrg_core::GraphError;
    let msg = e.to_string();
    match e {
        ExperimentError::Graph(_) | ExperimentError::Io(_) | ExperimentError::Json(_) => {
            CliError::Io(msg)
        }
        ExperimentError::Parse(_) => CliError::Io(msg),
        ExperimentError::Renorm(RenormError::Graph(GraphError::Io(_)))
        | ExperimentError::Renorm(RenormError::Graph(GraphError::MissingFile(_))) => {
            CliError::Io(msg)
        }
        ExperimentError::Spectral(SpectralError::NegativeTau(_))
        | ExperimentError::Spectral(SpectralError::InvalidRange { .. })
        | ExperimentError::Renorm(RenormError::Spectral(SpectralError::NegativeTau(_)))
        | ExperimentError::InvalidConfig(_) => CliError::Usage(msg),
        ExperimentError::Spectral(SpectralError::NoPeak) => CliError::Analysis(format!(
            "{msg}; widen the scan with a larger --tau-max"
        )),
        _ => CliError::Analysis(msg),
    }
}
