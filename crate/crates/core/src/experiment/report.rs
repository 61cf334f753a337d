use std::collections::BTreeMap;
use std::fmt::Write;

use super::record::ExperimentRecord;
use crate::error::{Error, Result};
use crate::metrics::MetricSummary;

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub csv: String,
    /// Non-fatal findings, e.g. records from several datasets.
    pub warnings: Vec<String>,
}

fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header) + "\n";
    out += &widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-");
    out.push('\n');
    for r in rows {
        out += &line(r);
        out.push('\n');
    }
    out
}

fn acc_cell(s: &Option<MetricSummary>) -> String {
    s.as_ref()
        .map_or("-".into(), |s| format!("{:.3} ± {:.3} (best {:.3})", s.mean, s.std, s.max()))
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

/// Per-dataset purity tables (algorithms × Z) plus a supervised accuracy
/// table, as text and CSV.
pub fn report(records: &[ExperimentRecord]) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::invalid("report needs at least one record"));
    }
    let mut warnings = Vec::new();
    let mut by_dataset: BTreeMap<&str, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        by_dataset.entry(&r.dataset_name).or_default().push(r);
    }
    if by_dataset.len() > 1 {
        warnings.push(format!(
            "records span several datasets: {}",
            by_dataset.keys().copied().collect::<Vec<_>>().join(", ")
        ));
    }

    let mut text = String::new();
    for (dataset, recs) in &by_dataset {
        let mut zs: Vec<usize> = recs.iter().map(|r| r.latent_dim).collect();
        zs.sort_unstable();
        zs.dedup();
        let mut algs: Vec<&str> = Vec::new();
        for r in recs {
            if !algs.contains(&r.algorithm.as_str()) {
                algs.push(&r.algorithm);
            }
        }
        let mut cells: BTreeMap<(&str, usize), String> = BTreeMap::new();
        for r in recs {
            if cells.insert((&r.algorithm, r.latent_dim), r.cell()).is_some() {
                warnings.push(format!(
                    "{dataset}: several records for {} Z={}; the last one is shown",
                    r.algorithm, r.latent_dim
                ));
            }
        }
        let mut header = vec!["Algorithm/Z".to_string()];
        header.extend(zs.iter().map(|z| z.to_string()));
        let rows: Vec<Vec<String>> = algs
            .iter()
            .map(|a| {
                let mut row = vec![a.to_string()];
                row.extend(zs.iter().map(|z| cells.get(&(*a, *z)).cloned().unwrap_or_else(|| "-".into())));
                row
            })
            .collect();
        let _ = writeln!(text, "Clustering purity on {dataset} (purity ± std (overlaps ± std))");
        text += &render_table(&header, &rows);
        text.push('\n');
    }

    let supervised: Vec<&ExperimentRecord> = records
        .iter()
        .filter(|r| r.ridge_accuracy.is_some() || r.fc_accuracy.is_some())
        .collect();
    if supervised.is_empty() {
        text += "Supervised accuracy table omitted: no record carries supervised metrics.\n";
    } else {
        let header: Vec<String> = ["Dataset", "Algorithm", "Z", "Kernel ridge", "FC"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows: Vec<Vec<String>> = supervised
            .iter()
            .map(|r| {
                vec![
                    r.dataset_name.clone(),
                    r.algorithm.clone(),
                    r.latent_dim.to_string(),
                    acc_cell(&r.ridge_accuracy),
                    acc_cell(&r.fc_accuracy),
                ]
            })
            .collect();
        text += "Test accuracy of supervised heads (mean ± std (best))\n";
        text += &render_table(&header, &rows);
    }
    for w in &warnings {
        let _ = writeln!(text, "warning: {w}");
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "dataset",
        "algorithm",
        "latent_dim",
        "purity_mean",
        "purity_std",
        "overlaps_mean",
        "overlaps_std",
        "ridge_mean",
        "ridge_std",
        "ridge_best",
        "fc_mean",
        "fc_std",
        "fc_best",
        "wall_clock_seconds",
        "pipeline_seconds",
        "config_hash",
    ])?;
    for r in records {
        let m = |s: &Option<MetricSummary>| {
            [
                opt(s.as_ref().map(|s| s.mean)),
                opt(s.as_ref().map(|s| s.std)),
            ]
        };
        let [pm, ps] = m(&r.purity);
        let [om, os] = m(&r.overlaps);
        let [rm, rs] = m(&r.ridge_accuracy);
        let [fm, fs] = m(&r.fc_accuracy);
        w.write_record([
            r.dataset_name.clone(),
            r.algorithm.clone(),
            r.latent_dim.to_string(),
            pm,
            ps,
            om,
            os,
            rm,
            rs,
            opt(r.ridge_accuracy.as_ref().map(|s| s.max())),
            fm,
            fs,
            opt(r.fc_accuracy.as_ref().map(|s| s.max())),
            r.wall_clock_seconds.to_string(),
            r.pipeline_seconds().to_string(),
            r.config_hash.clone(),
        ])?;
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| Error::invalid(e.to_string()))?)
        .map_err(|e| Error::invalid(e.to_string()))?;
    Ok(Report { text, csv, warnings })
}
