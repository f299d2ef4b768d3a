use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::record::{write_atomic, RunRecord};
use crate::CliError;

/// Aggregate of every record sharing a dataset and configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub pooling: String,
    /// `-` when the pooling kind has no such option.
    pub aggregator: String,
    pub aux_loss: String,
    /// Mean and population standard deviation of test accuracy over
    /// completed runs, as fractions.
    pub mean_acc: f64,
    pub std_acc: f64,
    /// Completed runs.
    pub n_runs: usize,
    pub n_failed: usize,
    pub selector: String,
    pub config_id: String,
}

impl SummaryRow {
    /// Column label used by the markdown table.
    pub fn label(&self) -> String {
        if self.pooling == "spapool" {
            format!(
                "spapool[{},{},{}]",
                self.selector, self.aggregator, self.aux_loss
            )
        } else {
            self.pooling.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

/// Reads every run record in `dir`. A missing directory or one without
/// records is [`CliError::NoData`].
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>, CliError> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(_) => {
            return Err(CliError::NoData(format!(
                "no run directory at {}",
                dir.display()
            )))
        }
    };
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(CliError::io(dir))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.ends_with(".json") && !name.starts_with('.') {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::NoData(format!(
            "no run records in {}",
            dir.display()
        )));
    }
    paths.iter().map(|p| RunRecord::read(p)).collect()
}

pub fn aggregate_records(records: &[RunRecord]) -> SummaryTable {
    let mut groups: BTreeMap<(String, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.dataset.clone(), r.config_id.clone()))
            .or_default()
            .push(r);
    }
    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((dataset, config_id), group)| {
            let accs: Vec<f64> = group.iter().filter_map(|r| r.test_accuracy()).collect();
            let (mean_acc, std_acc) = mean_std(&accs);
            let m = &group[0].model;
            SummaryRow {
                dataset,
                pooling: m.pooling.to_string(),
                aggregator: m
                    .effective_aggregator()
                    .map_or("-".into(), |a| a.to_string()),
                aux_loss: m.effective_aux_loss().to_string(),
                mean_acc,
                std_acc,
                n_runs: accs.len(),
                n_failed: group.len() - accs.len(),
                selector: m.effective_selector().map_or("-".into(), |s| s.to_string()),
                config_id,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        (&a.dataset, a.label(), &a.config_id).cmp(&(&b.dataset, b.label(), &b.config_id))
    });
    SummaryTable { rows }
}

/// Population mean and standard deviation; `NaN` for no values.
fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn write_csv(table: &SummaryTable, path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &table.rows {
        w.serialize(row)?;
    }
    if table.rows.is_empty() {
        w.write_record([
            "dataset",
            "pooling",
            "aggregator",
            "aux_loss",
            "mean_acc",
            "std_acc",
            "n_runs",
            "n_failed",
            "selector",
            "config_id",
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io(path)(e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn read_csv(path: &Path) -> Result<SummaryTable, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<SummaryRow>, _>>()?;
    Ok(SummaryTable { rows })
}

/// Datasets as rows, configurations as columns, cells `mean±std` in percent.
pub fn render_markdown(table: &SummaryTable) -> String {
    let mut columns: Vec<String> = table.rows.iter().map(SummaryRow::label).collect();
    columns.sort();
    columns.dedup();
    let mut datasets: Vec<&str> = table.rows.iter().map(|r| r.dataset.as_str()).collect();
    datasets.dedup();

    let mut out = format!("| dataset | {} |\n", columns.join(" | "));
    out.push_str(&format!("|---|{}\n", "---|".repeat(columns.len())));
    for ds in datasets {
        let cells: Vec<String> = columns
            .iter()
            .map(|c| {
                table
                    .rows
                    .iter()
                    .find(|r| r.dataset == ds && &r.label() == c)
                    .map_or(String::new(), |r| {
                        if r.n_runs == 0 {
                            "failed".into()
                        } else {
                            format!("{:.2}±{:.2}", r.mean_acc * 100.0, r.std_acc * 100.0)
                        }
                    })
            })
            .collect();
        out.push_str(&format!("| {ds} | {} |\n", cells.join(" | ")));
    }
    out
}

pub fn write_markdown(table: &SummaryTable, path: &Path) -> Result<(), CliError> {
    write_atomic(path, render_markdown(table).as_bytes())
}
