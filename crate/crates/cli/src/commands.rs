use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;
use srcr_core::error_lab::{run_records, DeltaLevel, SyntheticLayerSpec, WeightDist};
use srcr_core::metrics::{
    optimal_config_search, parse_bits, parse_sparsity, render_tcr, srcr_for_config, tcr_table,
    theoretical_compression_rate, CompressionConfig, SparsityPattern, BASELINE_BITS, TABLE_BITS,
    TABLE_SPARSITIES,
};
use srcr_core::numerics::{read_matrix_csv, read_srcrmat, write_matrix_csv, write_srcrmat};
use srcr_core::pruning::{
    magnitude_mask, mask_overhead_bits, sparsegpt_prune, validate_mask, SparsityMask,
};
use srcr_core::quantization::{
    gptq_quantize, int8_absmax_quantize, layer_objective, nf4_quantize, rtn_quantize, GptqConfig,
    GridMode, MaskMode, QuantizedLayer,
};
use srcr_core::results::{
    bundled_fixtures, emit_plot_data, emit_table, fixture_dir_override, full_report, load_scores,
    retention_report, FigureKind, RetentionReport, ScoreDataset, ScoreFormat, SrKind, TableFormat,
    BUNDLED_TABLES,
};
use srcr_core::{DenseMatrix, Rational};

use crate::args::*;
use crate::output::{Rendered, RunRecorder};
use crate::UsageError;

pub fn run(command: &Command, rec: &mut RunRecorder) -> Result<Rendered> {
    match command {
        Command::Tcr(a) => tcr(a),
        Command::Prune(a) => prune(a, rec),
        Command::Quantize(a) => quantize(a, rec),
        Command::Joint(a) => joint(a, rec),
        Command::ValidateErrors(a) => validate_errors(a),
        Command::Retention(a) => retention(a, rec),
        Command::Srcr(a) => srcr(a, rec),
        Command::Search(a) => search(a, rec),
        Command::Report(a) => report(a, rec),
    }
}

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

/// `s=1/4;q=4b`, with `;pat=N:M` for structured patterns.
pub fn short_config(c: &CompressionConfig) -> String {
    let mut s = format!("s={};q={}b", c.sparsity(), c.bits());
    if let SparsityPattern::Nm(p) = c.pattern() {
        s.push_str(&format!(";pat={p}"));
    }
    s
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn load_matrix(rec: &mut RunRecorder, path: &Path) -> Result<DenseMatrix> {
    let bytes = rec.read_input(path)?;
    let m = if is_csv(path) {
        let text = std::str::from_utf8(&bytes)
            .with_context(|| format!("{} is not UTF-8", path.display()))?;
        read_matrix_csv(text)
    } else {
        read_srcrmat(&bytes[..])
    };
    m.with_context(|| format!("reading matrix {}", path.display()))
}

fn save_matrix(rec: &mut RunRecorder, path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut buf = Vec::new();
    if is_csv(path) {
        write_matrix_csv(m, &mut buf)?;
    } else {
        write_srcrmat(m, &mut buf)?;
    }
    rec.write_output(path, &buf)
}

/// Configuration from optional sparsity and pattern flags. An `N:M` pattern implies
/// its sparsity; otherwise sparsity is required when `need_sparsity` is set.
fn resolve_config(
    sparsity: Option<&str>,
    pattern: Option<&str>,
    bits: Rational,
    need_sparsity: bool,
) -> Result<CompressionConfig> {
    let pattern = pattern.map(str::parse::<SparsityPattern>).transpose()?;
    let sparsity = sparsity.map(parse_sparsity).transpose()?;
    let config = match (pattern, sparsity) {
        (Some(SparsityPattern::Nm(p)), s) => CompressionConfig::new(
            s.unwrap_or_else(|| p.sparsity()),
            bits,
            SparsityPattern::Nm(p),
        )?,
        (Some(p), Some(s)) => CompressionConfig::new(s, bits, p)?,
        (None, Some(s)) => CompressionConfig::with_sparsity(s, bits)?,
        (_, None) if need_sparsity => bail!(UsageError(
            "--sparsity is required unless --pattern is N:M".into()
        )),
        (_, None) => CompressionConfig::quantization(bits)?,
    };
    Ok(config)
}

fn kv_table(pairs: Vec<(&str, String)>, json: serde_json::Value) -> Rendered {
    let rows = pairs
        .into_iter()
        .map(|(k, v)| vec![k.to_string(), v])
        .collect();
    Rendered::table(&["metric", "value"], rows, json)
}

fn tcr(a: &TcrArgs) -> Result<Rendered> {
    if a.table {
        let sparsities: Vec<Rational> = TABLE_SPARSITIES
            .iter()
            .map(|&(n, d)| Rational::new(n, d))
            .collect();
        let bits: Vec<Rational> = TABLE_BITS
            .iter()
            .map(|&b| Rational::from_integer(b))
            .collect();
        let table = tcr_table(&sparsities, &bits)?;
        let mut header = vec!["bits".to_string()];
        header.extend(sparsities.iter().map(|s| format!("s={s}")));
        let mut rows = Vec::new();
        let mut cells = Vec::new();
        for (i, b) in table.bit_widths.iter().enumerate() {
            let mut row = vec![b.to_string()];
            for (j, s) in table.sparsities.iter().enumerate() {
                let rate = table.cells[i][j];
                row.push(render_tcr(rate));
                cells.push(json!({
                    "bits": b.to_string(),
                    "sparsity": s.to_string(),
                    "tcr": rate.to_string(),
                    "percent": render_tcr(rate),
                }));
            }
            rows.push(row);
        }
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        return Ok(Rendered::table(&header, rows, json!({ "cells": cells })));
    }
    let bits = a
        .bits
        .as_deref()
        .ok_or_else(|| UsageError("--bits is required (or use --table)".into()))?;
    let bits = parse_bits(bits)?;
    let config = resolve_config(a.sparsity.as_deref(), a.pattern.as_deref(), bits, false)?;
    let rate = theoretical_compression_rate(&config);
    Ok(Rendered::plain(
        render_tcr(rate),
        json!({
            "config": config,
            "label": config.label(),
            "tcr": rate.to_string(),
            "percent": render_tcr(rate),
        }),
    ))
}

fn prune(a: &PruneArgs, rec: &mut RunRecorder) -> Result<Rendered> {
    let config = resolve_config(
        a.sparsity.as_deref(),
        a.pattern.as_deref(),
        Rational::from_integer(BASELINE_BITS),
        true,
    )?;
    let w = load_matrix(rec, &a.weights)?;
    let x = a
        .calib
        .as_deref()
        .map(|p| load_matrix(rec, p))
        .transpose()?;
    let (mask, pruned, objective) = match a.method {
        PruneMethod::Sparsegpt => {
            let x = x
                .as_ref()
                .ok_or_else(|| UsageError("sparsegpt needs --calib".into()))?;
            let r = sparsegpt_prune(&w, x, &config, a.solver.block_size, a.solver.dampening)?;
            (r.mask, r.pruned_weights, Some(r.layer_objective_delta))
        }
        PruneMethod::Magnitude => {
            let mask = magnitude_mask(&w, &config)?;
            let pruned = mask.apply(&w);
            let objective = x
                .as_ref()
                .map(|x| layer_objective(&w, &pruned, x))
                .transpose()?;
            (mask, pruned, objective)
        }
    };
    let validation = validate_mask(&mask, &config.pattern(), config.sparsity());
    if let Some(p) = &a.out {
        save_matrix(rec, p, &pruned)?;
    }
    if let Some(p) = &a.mask_out {
        save_matrix(rec, p, &mask.to_matrix())?;
    }
    let overhead = mask_overhead_bits(&config.pattern());
    let json = json!({
        "config": config,
        "shape": [w.rows(), w.cols()],
        "achieved_sparsity": validation.achieved_sparsity,
        "layer_objective": objective,
        "mask_valid": validation.is_valid(),
        "violations": validation.violations,
        "mask_overhead_bits": overhead,
    });
    Ok(kv_table(
        vec![
            ("config", config.label()),
            ("shape", format!("{}x{}", w.rows(), w.cols())),
            ("achieved_sparsity", f4(validation.achieved_sparsity)),
            ("layer_objective", objective.map_or("n/a".into(), sci)),
            ("mask_valid", validation.is_valid().to_string()),
            ("violations", validation.violations.len().to_string()),
            ("mask_overhead_bits", f4(overhead)),
        ],
        json,
    ))
}

fn gptq_config(q: &QuantArgs, s: &SolverArgs) -> GptqConfig {
    GptqConfig {
        bits: q.bits,
        group_size: q.group_size,
        block_size: s.block_size,
        dampening: s.dampening,
        grid: GridMode::MinMax,
    }
}

fn write_quantized(rec: &mut RunRecorder, out: &Path, layer: &QuantizedLayer<f64>) -> Result<()> {
    save_matrix(rec, out, &layer.dequantized)?;
    let mut sidecar_path = out.as_os_str().to_owned();
    sidecar_path.push(".json");
    let mut text = serde_json::to_string_pretty(&layer.sidecar())?;
    text.push('\n');
    rec.write_output(Path::new(&sidecar_path), text.as_bytes())
}

fn quant_rows(layer: &QuantizedLayer<f64>, objective: Option<f64>) -> Vec<(&'static str, String)> {
    vec![
        ("scheme", layer.grid.scheme.name().to_string()),
        ("bits", layer.grid.scheme.bits().to_string()),
        (
            "group_size",
            layer
                .grid
                .scheme
                .group_size()
                .map_or("n/a".into(), |g| g.to_string()),
        ),
        ("total_error", sci(layer.total_error())),
        ("delta_sq_norm", sci(layer.total_delta_sq())),
        ("layer_objective", objective.map_or("n/a".into(), sci)),
    ]
}

fn quantize(a: &QuantizeArgs, rec: &mut RunRecorder) -> Result<Rendered> {
    let w = load_matrix(rec, &a.weights)?;
    let x = a
        .calib
        .as_deref()
        .map(|p| load_matrix(rec, p))
        .transpose()?;
    let layer = match a.scheme {
        Scheme::Rtn => rtn_quantize(&w, a.quant.bits, a.quant.group_size)?,
        Scheme::Nf4 => nf4_quantize(&w, a.nf4_block)?,
        Scheme::Int8 => int8_absmax_quantize(&w, Some(a.outlier_threshold))?,
        Scheme::Gptq => {
            let x = x
                .as_ref()
                .ok_or_else(|| UsageError("gptq needs --calib".into()))?;
            gptq_quantize(
                &w,
                x,
                &gptq_config(&a.quant, &a.solver),
                None,
                MaskMode::FullCaseA,
            )?
        }
    };
    let objective = x
        .as_ref()
        .map(|x| layer_objective(&w, &layer.dequantized, x))
        .transpose()?;
    if let Some(out) = &a.out {
        write_quantized(rec, out, &layer)?;
    }
    let json = json!({
        "quantization": layer.sidecar(),
        "total_error": layer.total_error(),
        "delta_sq_norm": layer.total_delta_sq(),
        "layer_objective": objective,
        "passthrough_columns": layer.grid.passthrough_columns,
    });
    Ok(kv_table(quant_rows(&layer, objective), json))
}

fn joint(a: &JointArgs, rec: &mut RunRecorder) -> Result<Rendered> {
    let bits = Rational::from_integer(i64::from(a.quant.bits));
    let config = resolve_config(a.sparsity.as_deref(), a.pattern.as_deref(), bits, true)?;
    let w = load_matrix(rec, &a.weights)?;
    let x = load_matrix(rec, &a.calib)?;
    let pruned = sparsegpt_prune(&w, &x, &config, a.solver.block_size, a.solver.dampening)?;
    let mode = match a.mode {
        CaseMode::A => MaskMode::FullCaseA,
        CaseMode::B => MaskMode::MaskedCaseB,
    };
    let layer = gptq_quantize(
        &pruned.pruned_weights,
        &x,
        &gptq_config(&a.quant, &a.solver),
        Some(&pruned.mask),
        mode,
    )?;
    let objective = layer_objective(&w, &layer.dequantized, &x)?;
    let final_mask = SparsityMask::from_nonzero(&layer.dequantized);
    let revived = (0..w.rows())
        .flat_map(|r| (0..w.cols()).map(move |c| (r, c)))
        .filter(|&(r, c)| !pruned.mask.is_kept(r, c) && final_mask.is_kept(r, c))
        .count();
    if let Some(out) = &a.out {
        write_quantized(rec, out, &layer)?;
    }
    let mut rows = vec![
        ("config", config.label()),
        ("mode", format!("{:?}", a.mode).to_lowercase()),
        ("tcr", render_tcr(theoretical_compression_rate(&config))),
        ("prune_sparsity", f4(pruned.achieved_sparsity)),
        ("final_sparsity", f4(final_mask.sparsity())),
        ("pruned_positions_nonzero", revived.to_string()),
        ("prune_objective", sci(pruned.layer_objective_delta)),
    ];
    rows.extend(quant_rows(&layer, Some(objective)));
    let json = json!({
        "config": config,
        "mode": a.mode,
        "tcr": theoretical_compression_rate(&config).to_string(),
        "prune_sparsity": pruned.achieved_sparsity,
        "final_sparsity": final_mask.sparsity(),
        "pruned_positions_nonzero": revived,
        "prune_objective": pruned.layer_objective_delta,
        "quantization": layer.sidecar(),
        "total_error": layer.total_error(),
        "delta_sq_norm": layer.total_delta_sq(),
        "layer_objective": objective,
    });
    Ok(kv_table(rows, json))
}

fn parse_levels(text: &str) -> Result<Vec<DeltaLevel>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (s, b) = t
                .split_once(':')
                .ok_or_else(|| UsageError(format!("level {t:?} is not sparsity:bits")))?;
            let bits: u32 = b
                .trim()
                .trim_end_matches('b')
                .parse()
                .map_err(|_| UsageError(format!("bad bit-width in level {t:?}")))?;
            Ok(DeltaLevel {
                sparsity: parse_sparsity(s)?,
                bits,
            })
        })
        .collect()
}

fn validate_errors(a: &ValidateArgs) -> Result<Rendered> {
    let levels = parse_levels(&a.levels)?;
    if levels.is_empty() {
        bail!(UsageError("--levels is empty".into()));
    }
    if a.seeds == 0 {
        bail!(UsageError("--seeds must be at least 1".into()));
    }
    let base = SyntheticLayerSpec {
        seed: a.seed,
        out_dim: a.out_dim,
        in_dim: a.in_dim,
        n_samples: a.samples,
        weight_dist: WeightDist::Gaussian { sigma: a.sigma },
        calib_correlation: a.rho,
    };
    let specs: Vec<_> = (0..a.seeds).map(|i| base.with_seed(a.seed + i)).collect();
    let records = run_records(&specs, &levels, a.jobs)?;
    let mut rows = Vec::with_capacity(records.len());
    for r in &records {
        log::info!(
            "seed {} {}: E_gptq {} E_simple {} delta {}",
            r.spec.seed,
            r.config.label(),
            sci(r.e_gptq_total),
            sci(r.e_simple_total),
            sci(r.delta_estimate)
        );
        rows.push(vec![
            r.spec.seed.to_string(),
            r.config.label(),
            sci(r.e_gptq_total),
            sci(r.e_simple_total),
            sci(r.delta_estimate),
            sci(r.delta_measured),
            f4(r.ratio_summary.min),
            f4(r.ratio_summary.median),
            f4(r.ratio_summary.max),
        ]);
    }
    Ok(Rendered::table(
        &[
            "seed",
            "config",
            "e_gptq",
            "e_simple",
            "delta_estimate",
            "delta_measured",
            "ratio_min",
            "ratio_median",
            "ratio_max",
        ],
        rows,
        serde_json::to_value(&records)?,
    ))
}

fn record_score_inputs(rec: &mut RunRecorder, path: &Path) -> Result<()> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .with_context(|| format!("listing {}", path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && ScoreFormat::from_path(p).is_some())
            .collect();
        files.sort();
        for f in files {
            rec.read_input(&f)?;
        }
    } else {
        rec.read_input(path)?;
    }
    Ok(())
}

fn load_dataset(a: &ScoresArgs, rec: &mut RunRecorder) -> Result<ScoreDataset> {
    match a.scores.clone().or_else(fixture_dir_override) {
        Some(path) => {
            record_score_inputs(rec, &path)?;
            Ok(load_scores(&path, None)?)
        }
        None => {
            for (name, text) in BUNDLED_TABLES {
                rec.input(format!("bundled:{name}"), text.as_bytes());
            }
            Ok(bundled_fixtures()?)
        }
    }
}

fn build_report(a: &ScoresArgs, rec: &mut RunRecorder) -> Result<RetentionReport> {
    let dataset = load_dataset(a, rec)?;
    let report = match &a.model {
        Some(m) => retention_report(&dataset, m)?,
        None => full_report(&dataset)?,
    };
    for r in &report.rows {
        if let Some(d) = r.mean_discrepancy {
            log::warn!(
                "{} {}: published mean differs from the task average by {d:+.3}",
                r.model,
                r.label
            );
        }
    }
    Ok(report)
}

fn retention(a: &ScoresArgs, rec: &mut RunRecorder) -> Result<Rendered> {
    let report = build_report(a, rec)?;
    let mut rows = Vec::new();
    for r in &report.rows {
        for t in &r.tasks {
            rows.push(vec![
                r.model.clone(),
                r.label.clone(),
                t.task.clone(),
                format!("{:.2}", t.original),
                format!("{:.2}", t.compressed),
                f4(t.retention),
                f4(t.stderr),
            ]);
        }
        rows.push(vec![
            r.model.clone(),
            r.label.clone(),
            "Sr".into(),
            String::new(),
            String::new(),
            f4(r.sr),
            f4(r.sr_stderr),
        ]);
    }
    Ok(Rendered::table(
        &[
            "model",
            "config",
            "task",
            "original",
            "compressed",
            "retention",
            "stderr",
        ],
        rows,
        serde_json::to_value(&report)?,
    ))
}

fn srcr(a: &SrcrArgs, rec: &mut RunRecorder) -> Result<Rendered> {
    let bits = a.bits.as_deref().map(parse_bits).transpose()?;
    let wants_config = bits.is_some() || a.sparsity.is_some() || a.pattern.is_some();
    let config = wants_config
        .then(|| {
            resolve_config(
                a.sparsity.as_deref(),
                a.pattern.as_deref(),
                bits.unwrap_or_else(|| Rational::from_integer(BASELINE_BITS)),
                false,
            )
        })
        .transpose()?;
    let header = ["model", "config", "tcr", "sr", "factor", "srcr", "estimate"];
    if let Some(sr) = a.sr {
        if a.scores.scores.is_some() || a.scores.model.is_some() {
            bail!(UsageError(
                "--sr cannot be combined with --scores or --model".into()
            ));
        }
        let config =
            config.ok_or_else(|| UsageError("--sr needs --sparsity and/or --bits".into()))?;
        let b = srcr_for_config(&config, sr)?;
        let row = vec![
            String::new(),
            config.label(),
            render_tcr(theoretical_compression_rate(&config)),
            f4(b.sr),
            f4(b.compression_factor),
            f4(b.srcr),
            String::new(),
        ];
        return Ok(Rendered::table(
            &header,
            vec![row],
            serde_json::to_value(&b)?,
        ));
    }
    let report = build_report(&a.scores, rec)?;
    let selected: Vec<_> = report
        .rows
        .iter()
        .filter(|r| config.is_none_or(|c| r.config == c))
        .collect();
    if selected.is_empty() {
        bail!(srcr_core::results::ResultsError::EmptyReport);
    }
    let rows = selected
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                r.label.clone(),
                render_tcr(r.tcr),
                f4(r.sr),
                f4(r.srcr.compression_factor),
                f4(r.srcr.srcr),
                r.srcr_estimate.map_or(String::new(), f4),
            ]
        })
        .collect();
    let json: Vec<_> = selected
        .iter()
        .map(|r| json!({ "model": r.model, "srcr": r.srcr, "estimate": r.srcr_estimate }))
        .collect();
    Ok(Rendered::table(&header, rows, json!(json)))
}

fn search(a: &SearchArgs, rec: &mut RunRecorder) -> Result<Rendered> {
    let kind = match a.sr_kind {
        SrKindArg::Sum => SrKind::TaskSum,
        SrKindArg::Mean => SrKind::MeanColumn,
        SrKindArg::Ratio => SrKind::TaskMean,
    };
    let report = build_report(&a.scores, rec)?;
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for model in report.models() {
        let mut records = Vec::new();
        for r in report.rows.iter().filter(|r| {
            r.model == model && r.config.kind() == srcr_core::metrics::ConfigKind::Joint
        }) {
            let sr = r.sr_of(kind).ok_or_else(|| {
                anyhow::anyhow!("{model} {}: no published mean score to rank by", r.label)
            })?;
            records.push((r.config, sr));
        }
        if records.is_empty() {
            log::warn!("{model}: no joint configurations to rank");
            continue;
        }
        for (rank, b) in optimal_config_search(&records)?.into_iter().enumerate() {
            let tcr = theoretical_compression_rate(&b.config);
            rows.push(vec![
                model.clone(),
                (rank + 1).to_string(),
                short_config(&b.config),
                b.config.label(),
                render_tcr(tcr),
                f4(b.sr),
                f4(b.srcr),
            ]);
            json_rows.push(json!({
                "model": model,
                "rank": rank + 1,
                "config": short_config(&b.config),
                "label": b.config.label(),
                "tcr": tcr.to_string(),
                "sr": b.sr,
                "srcr": b.srcr,
            }));
        }
    }
    if rows.is_empty() {
        bail!(srcr_core::metrics::MetricsError::EmptyRecords);
    }
    Ok(Rendered::table(
        &["model", "rank", "config", "label", "tcr", "sr", "srcr"],
        rows,
        json!(json_rows),
    ))
}

fn report(a: &ReportArgs, rec: &mut RunRecorder) -> Result<Rendered> {
    let report = build_report(&a.scores, rec)?;
    let Some(figure) = a.figure else {
        return Ok(Rendered::prebuilt(
            emit_table(&report, TableFormat::Markdown),
            emit_table(&report, TableFormat::Csv),
            serde_json::to_value(&report)?,
        ));
    };
    let (kind, name) = match figure {
        FigureArg::Retention => (FigureKind::RetentionBars, "retention"),
        FigureArg::Srcr => (FigureKind::SrcrBars, "srcr"),
        FigureArg::JointVsQuant => (FigureKind::JointVsQuant, "joint-vs-quant"),
    };
    let plot = emit_plot_data(&report, kind)?;
    if let Some(dir) = &a.plot_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        rec.write_output(&dir.join(format!("{name}.csv")), plot.csv.as_bytes())?;
        rec.write_output(&dir.join(format!("{name}.svg")), plot.svg.as_bytes())?;
    }
    let rows = plot
        .points
        .iter()
        .map(|p| vec![p.group.clone(), p.series.clone(), f4(p.value)])
        .collect();
    let mut rendered = Rendered::table(
        &["group", "series", "value"],
        rows,
        serde_json::to_value(&plot.points)?,
    );
    rendered.prebuilt = Some((rendered.render(crate::args::OutputFormat::Md), plot.csv));
    Ok(rendered)
}
