//! Structured text exports: JSON-lines partitions, probability fields, and
//! tabular policies.
//!
//! Every file starts with a header record carrying the format version, then
//! one record per leaf (or grid node), then a trailing stats record where
//! applicable. Floats are written in shortest round-trip form, which
//! preserves the exact value.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaptive::VerifierStats;
use crate::baseline::{Grid, TabularPolicy};
use crate::checker::ProbField;
use crate::error::{Error, Result};
use crate::geom::Rect;
use crate::partition::PartitionTree;

/// Format tag written into every export.
pub const FORMAT_VERSION: &str = "cellcheck-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeaderRecord {
    pub format: String,
    pub kind: String,
    pub dim: usize,
    pub modes: usize,
    pub actions: Vec<String>,
    pub domain: Rect,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafRecord {
    pub id: u64,
    pub mode: usize,
    pub lows: Vec<f64>,
    pub highs: Vec<f64>,
    pub actions: Vec<String>,
    pub prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_action: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StatsRecord {
    pub kind: String,
    pub verifier_calls: usize,
    pub corner_eval_batches: usize,
    pub leaves_total: usize,
    pub leaves_singleton: usize,
    pub leaves_multi: usize,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition_splits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_splits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

fn leaf_records<'a>(
    trees: &'a [PartitionTree],
    labels: &'a [String],
    with_per_action: bool,
) -> impl Iterator<Item = LeafRecord> + 'a {
    trees.iter().enumerate().flat_map(move |(mode, tree)| {
        tree.leaves().map(move |cell| LeafRecord {
            id: cell.id,
            mode,
            lows: cell.rect.lows.clone(),
            highs: cell.rect.highs.clone(),
            actions: cell.action_set.iter().map(|a| labels[a].clone()).collect(),
            prob: cell.prob,
            per_action: if with_per_action {
                cell.per_action_prob.as_ref().map(|pa| {
                    pa.iter()
                        .map(|&(a, p)| (labels[a].clone(), p))
                        .collect::<BTreeMap<_, _>>()
                })
            } else {
                None
            },
        })
    })
}

fn write_jsonl<P: AsRef<Path>>(
    path: P,
    header: &HeaderRecord,
    leaves: impl Iterator<Item = LeafRecord>,
    stats: Option<&StatsRecord>,
) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for record in leaves {
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
    }
    if let Some(stats) = stats {
        serde_json::to_writer(&mut w, stats)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Write a verified partition: header, one record per leaf, stats summary.
pub fn export_partition<P: AsRef<Path>>(
    path: P,
    trees: &[PartitionTree],
    labels: &[String],
    stats: &VerifierStats,
) -> Result<()> {
    let header = HeaderRecord {
        format: FORMAT_VERSION.into(),
        kind: "partition".into(),
        dim: trees[0].dim(),
        modes: trees.len(),
        actions: labels.to_vec(),
        domain: trees[0].domain().clone(),
    };
    let stats = StatsRecord {
        kind: "stats".into(),
        verifier_calls: stats.verifier_calls,
        corner_eval_batches: stats.corner_eval_batches,
        leaves_total: stats.leaves_total,
        leaves_singleton: stats.leaves_singleton,
        leaves_multi: stats.leaves_multi,
        wall_time: stats.wall_time,
        ..StatsRecord::default()
    };
    write_jsonl(path, &header, leaf_records(trees, labels, false), Some(&stats))
}

/// Write a probability field: the partition export plus per-action
/// probabilities and solver statistics.
pub fn export_field<P: AsRef<Path>>(
    path: P,
    field: &ProbField,
    labels: &[String],
) -> Result<()> {
    let header = HeaderRecord {
        format: FORMAT_VERSION.into(),
        kind: "field".into(),
        dim: field.trees[0].dim(),
        modes: field.trees.len(),
        actions: labels.to_vec(),
        domain: field.trees[0].domain().clone(),
    };
    let mut leaves_singleton = 0;
    let mut leaves_multi = 0;
    for tree in &field.trees {
        for cell in tree.leaves() {
            if cell.action_set.len() == 1 {
                leaves_singleton += 1;
            } else {
                leaves_multi += 1;
            }
        }
    }
    let stats = StatsRecord {
        kind: "stats".into(),
        verifier_calls: field.stats.verify.verifier_calls,
        corner_eval_batches: field.stats.verify.corner_eval_batches,
        leaves_total: leaves_singleton + leaves_multi,
        leaves_singleton,
        leaves_multi,
        wall_time: field.stats.verify.wall_time,
        transition_splits: Some(field.stats.transition_splits),
        action_splits: Some(field.stats.action_splits),
        sweeps: Some(field.sweeps),
        max_delta: Some(field.max_delta),
        converged: Some(field.converged),
    };
    write_jsonl(path, &header, leaf_records(&field.trees, labels, true), Some(&stats))
}

/// A partition or field read back from disk. Leaves are stored flat; point
/// lookup scans linearly under the same half-open ownership convention as
/// the live tree.
#[derive(Debug, Clone)]
pub struct PartitionExport {
    pub header: HeaderRecord,
    pub leaves: Vec<LeafRecord>,
    pub stats: Option<StatsRecord>,
}

impl PartitionExport {
    pub fn leaves_for_mode(&self, mode: usize) -> impl Iterator<Item = &LeafRecord> {
        self.leaves.iter().filter(move |l| l.mode == mode)
    }

    /// The leaf owning `point` in `mode`, if any.
    pub fn locate(&self, mode: usize, point: &[f64]) -> Option<&LeafRecord> {
        let domain = &self.header.domain;
        self.leaves_for_mode(mode).find(|leaf| {
            (0..point.len()).all(|d| {
                let inside_low = point[d] >= leaf.lows[d];
                let inside_high = point[d] < leaf.highs[d]
                    || (leaf.highs[d] == domain.highs[d] && point[d] <= leaf.highs[d]);
                inside_low && inside_high
            })
        })
    }
}

pub fn import_partition<P: AsRef<Path>>(path: P) -> Result<PartitionExport> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::InvalidFile("empty partition file".into()))??;
    let header: HeaderRecord = serde_json::from_str(&header_line)?;
    if header.format != FORMAT_VERSION {
        return Err(Error::InvalidFile(format!(
            "unsupported format {:?}, expected {FORMAT_VERSION:?}",
            header.format
        )));
    }
    let mut leaves = Vec::new();
    let mut stats = None;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if line.contains("\"kind\":\"stats\"") || line.contains("\"kind\": \"stats\"") {
            stats = Some(serde_json::from_str(&line)?);
        } else {
            leaves.push(serde_json::from_str(&line)?);
        }
    }
    Ok(PartitionExport {
        header,
        leaves,
        stats,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableHeader {
    format: String,
    kind: String,
    dim: usize,
    actions: Vec<String>,
    grid: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableNode {
    idx: usize,
    action: String,
}

/// Write a tabular policy: header with the grid, then one record per node.
pub fn export_table<P: AsRef<Path>>(
    path: P,
    policy: &TabularPolicy,
    labels: &[String],
) -> Result<()> {
    let header = TableHeader {
        format: FORMAT_VERSION.into(),
        kind: "table".into(),
        dim: policy.grid.dim(),
        actions: labels.to_vec(),
        grid: policy.grid.cuts.clone(),
    };
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for (idx, &action) in policy.actions.iter().enumerate() {
        let node = TableNode {
            idx,
            action: labels
                .get(action)
                .ok_or_else(|| Error::InvalidConfig(format!("action index {action} unnamed")))?
                .clone(),
        };
        serde_json::to_writer(&mut w, &node)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a tabular policy; returns the policy and its action labels.
pub fn import_table<P: AsRef<Path>>(path: P) -> Result<(TabularPolicy, Vec<String>)> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::InvalidFile("empty table file".into()))??;
    let header: TableHeader = serde_json::from_str(&header_line)?;
    if header.format != FORMAT_VERSION || header.kind != "table" {
        return Err(Error::InvalidFile("not a cellcheck table file".into()));
    }
    let grid = Grid::new(header.grid)?;
    let mut actions = vec![usize::MAX; grid.num_nodes()];
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let node: TableNode = serde_json::from_str(&line)?;
        let action = header
            .actions
            .iter()
            .position(|l| *l == node.action)
            .ok_or_else(|| Error::InvalidFile(format!("unknown action {:?}", node.action)))?;
        if node.idx >= actions.len() {
            return Err(Error::InvalidFile(format!("node index {} out of range", node.idx)));
        }
        actions[node.idx] = action;
    }
    if actions.iter().any(|&a| a == usize::MAX) {
        return Err(Error::InvalidFile("table is missing node records".into()));
    }
    Ok((TabularPolicy::new(grid, actions)?, header.actions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::ActionSet;

    #[test]
    fn partition_round_trip_preserves_geometry_and_actions() {
        let mut tree = PartitionTree::new(Rect::new(vec![0.0, 0.0], vec![4.0, 4.0]));
        tree.split(0, &[0, 1]).unwrap();
        let ids = tree.leaf_ids();
        tree.split(ids[0], &[1]).unwrap();
        for (i, id) in tree.leaf_ids().into_iter().enumerate() {
            let c = tree.leaf_mut(id).unwrap();
            c.action_set = ActionSet::from_indices([i % 2, 1]);
            c.prob = i as f64 * 0.1;
        }
        let labels = vec!["a".to_string(), "b".to_string()];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let trees = vec![tree];
        export_partition(&path, &trees, &labels, &VerifierStats::default()).unwrap();
        let back = import_partition(&path).unwrap();
        assert_eq!(back.header.kind, "partition");
        assert_eq!(back.leaves.len(), trees[0].num_leaves());
        for (leaf, cell) in back.leaves.iter().zip(trees[0].leaves()) {
            assert_eq!(leaf.id, cell.id);
            assert_eq!(leaf.lows, cell.rect.lows);
            assert_eq!(leaf.highs, cell.rect.highs);
            let want: Vec<String> =
                cell.action_set.iter().map(|a| labels[a].clone()).collect();
            assert_eq!(leaf.actions, want);
            assert_eq!(leaf.prob, cell.prob);
        }
        assert!(back.stats.is_some());
    }

    #[test]
    fn export_locate_uses_half_open_cells() {
        let mut tree = PartitionTree::new(Rect::new(vec![0.0], vec![2.0]));
        tree.split(0, &[0]).unwrap();
        let labels = vec!["a".to_string(), "b".to_string()];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let trees = vec![tree];
        export_partition(&path, &trees, &labels, &VerifierStats::default()).unwrap();
        let back = import_partition(&path).unwrap();
        assert_eq!(back.locate(0, &[1.0]).unwrap().lows[0], 1.0);
        assert_eq!(back.locate(0, &[2.0]).unwrap().highs[0], 2.0);
        assert!(back.locate(0, &[2.5]).is_none());
    }

    #[test]
    fn table_round_trip() {
        let grid = Grid::new(vec![vec![0.0, 1.0], vec![0.0, 1.0, 2.0]]).unwrap();
        let policy = TabularPolicy::new(grid, vec![0, 1, 1, 0, 2, 2]).unwrap();
        let labels = vec!["x".to_string(), "y".to_string(), "z".to_string()];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        export_table(&path, &policy, &labels).unwrap();
        let (back, back_labels) = import_table(&path).unwrap();
        assert_eq!(back_labels, labels);
        assert_eq!(back.actions, policy.actions);
        assert_eq!(back.grid.cuts, policy.grid.cuts);
    }
}
