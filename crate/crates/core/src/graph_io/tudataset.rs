//! Reader and writer for the TUDataset flat-file format.
//!
//! A dataset `DS` is a directory of 1-indexed, comma-separated text files:
//! `DS_A.txt` (directed edge pairs), `DS_graph_indicator.txt` (graph id per
//! node), `DS_graph_labels.txt` (class per graph) and the optional
//! `DS_node_labels.txt` / `DS_node_attributes.txt`.
//!
//! Node features are the one-hot node label followed by the continuous
//! attributes, whichever of the two exist; with neither, every node gets the
//! constant feature 1.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::autodiff::Matrix;

use super::{impute_features, GraphDataset, GraphInstance, GraphIoError};

fn file_path(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

/// Finds the directory holding `name`'s files under `root`: `root/name`,
/// then `root/name/raw`, then `root` itself.
pub fn resolve_dataset_dir(root: &Path, name: &str) -> Option<PathBuf> {
    [
        root.join(name),
        root.join(name).join("raw"),
        root.to_path_buf(),
    ]
    .into_iter()
    .find(|dir| file_path(dir, name, "A").is_file())
}

/// Non-blank lines with their 1-based line numbers. Blank lines are only
/// accepted at the end of the file.
fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, GraphIoError> {
    let file = File::open(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            GraphIoError::MissingFile(path.to_path_buf())
        } else {
            GraphIoError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    let mut out = Vec::new();
    let mut blank_at = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| GraphIoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            blank_at.get_or_insert(i + 1);
            continue;
        }
        if let Some(b) = blank_at {
            return Err(format_error(path, b, "blank line inside file"));
        }
        out.push((i + 1, trimmed.to_string()));
    }
    Ok(out)
}

fn format_error(path: &Path, line: usize, msg: impl Into<String>) -> GraphIoError {
    GraphIoError::Format {
        file: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_int(path: &Path, line: usize, s: &str) -> Result<i64, GraphIoError> {
    let s = s.trim();
    s.parse::<i64>()
        .or_else(|_| {
            // Some files store integral labels as floats ("1.0").
            s.parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0)
                .map(|v| v as i64)
                .ok_or(())
        })
        .map_err(|_| format_error(path, line, format!("expected an integer, found {s:?}")))
}

/// Parses dataset `name` from `dir`.
pub fn parse_tudataset(dir: &Path, name: &str) -> Result<GraphDataset, GraphIoError> {
    let indicator_path = file_path(dir, name, "graph_indicator");
    let labels_path = file_path(dir, name, "graph_labels");
    let edges_path = file_path(dir, name, "A");
    for p in [&edges_path, &indicator_path, &labels_path] {
        if !p.is_file() {
            return Err(GraphIoError::MissingFile(p.clone()));
        }
    }

    let graph_labels: Vec<i64> = read_lines(&labels_path)?
        .iter()
        .map(|(ln, s)| parse_int(&labels_path, *ln, s))
        .collect::<Result<_, _>>()?;
    let graph_count = graph_labels.len();
    if graph_count == 0 {
        return Err(format_error(&labels_path, 1, "no graphs"));
    }

    // node -> (graph, local index)
    let mut node_graph = Vec::new();
    let mut node_local = Vec::new();
    let mut sizes = vec![0usize; graph_count];
    for (ln, s) in read_lines(&indicator_path)? {
        let g = parse_int(&indicator_path, ln, &s)?;
        if g < 1 || g as usize > graph_count {
            return Err(format_error(
                &indicator_path,
                ln,
                format!("graph id {g} outside 1..={graph_count}"),
            ));
        }
        let g = g as usize - 1;
        node_graph.push(g);
        node_local.push(sizes[g]);
        sizes[g] += 1;
    }
    let node_total = node_graph.len();
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(format_error(
            &indicator_path,
            0,
            format!("graph {} has no nodes", empty + 1),
        ));
    }

    let mut adjacency: Vec<Matrix> = sizes.iter().map(|&n| Matrix::zeros(n, n)).collect();
    for (ln, s) in read_lines(&edges_path)? {
        let mut parts = s.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format_error(&edges_path, ln, "expected \"i, j\""));
        };
        let (a, b) = (
            parse_int(&edges_path, ln, a)?,
            parse_int(&edges_path, ln, b)?,
        );
        for v in [a, b] {
            if v < 1 || v as usize > node_total {
                return Err(format_error(
                    &edges_path,
                    ln,
                    format!("node index {v} outside 1..={node_total}"),
                ));
            }
        }
        let (a, b) = (a as usize - 1, b as usize - 1);
        if node_graph[a] != node_graph[b] {
            return Err(format_error(
                &edges_path,
                ln,
                format!(
                    "edge joins graphs {} and {}",
                    node_graph[a] + 1,
                    node_graph[b] + 1
                ),
            ));
        }
        if a == b {
            continue;
        }
        let m = &mut adjacency[node_graph[a]];
        let (i, j) = (node_local[a], node_local[b]);
        m[(i, j)] = 1.0;
        m[(j, i)] = 1.0;
    }

    let node_labels = read_optional_ints(&file_path(dir, name, "node_labels"), node_total)?;
    let attributes = read_optional_floats(&file_path(dir, name, "node_attributes"), node_total)?;

    let label_values: Vec<i64> = node_labels
        .as_ref()
        .map(|l| {
            l.iter()
                .copied()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        })
        .unwrap_or_default();
    let attr_dim = attributes.as_ref().map_or(0, |a| a[0].len());
    let one_hot_dim = label_values.len();
    let feature_dim = if node_labels.is_none() && attributes.is_none() {
        1
    } else {
        one_hot_dim + attr_dim
    };

    let mut features: Vec<Matrix> = sizes
        .iter()
        .map(|&n| Matrix::zeros(n, feature_dim))
        .collect();
    if node_labels.is_none() && attributes.is_none() {
        features = sizes.iter().map(|&n| impute_features(n)).collect();
    } else {
        for node in 0..node_total {
            let row = features[node_graph[node]].row_mut(node_local[node]);
            if let Some(labels) = &node_labels {
                let k = label_values
                    .binary_search(&labels[node])
                    .expect("label collected");
                row[k] = 1.0;
            }
            if let Some(attrs) = &attributes {
                row[one_hot_dim..].copy_from_slice(&attrs[node]);
            }
        }
    }

    // Graph labels remapped to 0.. in sorted order, so {-1, 1} becomes {0, 1}.
    let classes: Vec<i64> = graph_labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut graphs = Vec::with_capacity(graph_count);
    for (g, (adj, feats)) in adjacency.into_iter().zip(features).enumerate() {
        let label = classes
            .binary_search(&graph_labels[g])
            .expect("class collected");
        graphs.push(GraphInstance::new(adj, feats, label)?);
    }
    GraphDataset::new(name, graphs, classes.len())
}

fn read_optional_ints(path: &Path, expected: usize) -> Result<Option<Vec<i64>>, GraphIoError> {
    if !path.is_file() {
        return Ok(None);
    }
    let lines = read_lines(path)?;
    check_count(path, lines.len(), expected)?;
    lines
        .iter()
        .map(|(ln, s)| {
            // Multi-column node labels: keep the first column.
            parse_int(path, *ln, s.split(',').next().unwrap_or(""))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

fn read_optional_floats(
    path: &Path,
    expected: usize,
) -> Result<Option<Vec<Vec<f64>>>, GraphIoError> {
    if !path.is_file() {
        return Ok(None);
    }
    let lines = read_lines(path)?;
    check_count(path, lines.len(), expected)?;
    let mut rows = Vec::with_capacity(lines.len());
    for (ln, s) in &lines {
        let row = s
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| {
                    format_error(path, *ln, format!("expected a float, found {:?}", v.trim()))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            let first: &Vec<f64> = first;
            if first.len() != row.len() {
                return Err(format_error(
                    path,
                    *ln,
                    format!(
                        "{} attributes, previous lines have {}",
                        row.len(),
                        first.len()
                    ),
                ));
            }
        }
        rows.push(row);
    }
    Ok(Some(rows))
}

fn check_count(path: &Path, found: usize, expected: usize) -> Result<(), GraphIoError> {
    if found != expected {
        return Err(format_error(
            path,
            found,
            format!("{found} lines for {expected} nodes"),
        ));
    }
    Ok(())
}

/// Writes `dataset` as TU files named after `dataset.name` into `dir`.
/// Features go to `DS_node_attributes.txt`; labels are written 1-based.
pub fn write_tudataset(dataset: &GraphDataset, dir: &Path) -> Result<(), GraphIoError> {
    fs::create_dir_all(dir).map_err(|source| GraphIoError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let name = &dataset.name;
    let open = |suffix: &str| -> Result<(PathBuf, BufWriter<File>), GraphIoError> {
        let p = file_path(dir, name, suffix);
        let f = File::create(&p).map_err(|source| GraphIoError::Io {
            path: p.clone(),
            source,
        })?;
        Ok((p, BufWriter::new(f)))
    };
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| GraphIoError::Io { path, source }
    };

    let (pa, mut a) = open("A")?;
    let (pi, mut ind) = open("graph_indicator")?;
    let (pl, mut lab) = open("graph_labels")?;
    let (pf, mut attr) = open("node_attributes")?;
    let mut offset = 0;
    for (g, graph) in dataset.graphs.iter().enumerate() {
        let n = graph.node_count();
        for (i, j) in graph.edges() {
            writeln!(a, "{}, {}", offset + i + 1, offset + j + 1).map_err(io(&pa))?;
            writeln!(a, "{}, {}", offset + j + 1, offset + i + 1).map_err(io(&pa))?;
        }
        for i in 0..n {
            writeln!(ind, "{}", g + 1).map_err(io(&pi))?;
            let row: Vec<String> = graph
                .features()
                .row(i)
                .iter()
                .map(|v| format!("{v:?}"))
                .collect();
            writeln!(attr, "{}", row.join(", ")).map_err(io(&pf))?;
        }
        writeln!(lab, "{}", graph.label() + 1).map_err(io(&pl))?;
        offset += n;
    }
    for (p, w) in [(pa, a), (pi, ind), (pl, lab), (pf, attr)] {
        w.into_inner()
            .map_err(|e| e.into_error())
            .and_then(|mut f| f.flush())
            .map_err(io(&p))?;
    }
    Ok(())
}
