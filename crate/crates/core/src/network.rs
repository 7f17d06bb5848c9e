//! ReLU feed-forward policy networks: loading, validation, evaluation.
//!
//! The on-disk format is plain UTF-8 text (see `Network::from_file`), chosen
//! over serialized object formats so that files are portable across tools.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Rect;

/// Corner evaluation is capped at 2^16 corners; above this callers must fall
/// back to strategies that do not enumerate corners.
pub const MAX_CORNER_DIM: usize = 16;

/// How the acting agent selects among output scores.
///
/// Advisory networks may encode either values (take the max) or costs (take
/// the min), so the rule is part of the network file rather than hardcoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    Argmax,
    Argmin,
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionRule::Argmax => write!(f, "argmax"),
            SelectionRule::Argmin => write!(f, "argmin"),
        }
    }
}

/// A layered ReLU network mapping input vectors to per-action scores.
///
/// Hidden layers apply ReLU; the output layer is affine. Immutable after
/// construction, so evaluation is safe from any number of threads.
#[derive(Debug, Clone)]
pub struct Network {
    layer_sizes: Vec<usize>,
    /// Row-major weight matrix per layer: `weights[k]` has shape
    /// `layer_sizes[k+1] x layer_sizes[k]`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    action_labels: Vec<String>,
    selection_rule: SelectionRule,
}

impl Network {
    pub fn new(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        action_labels: Vec<String>,
        selection_rule: SelectionRule,
    ) -> Result<Self> {
        if layer_sizes.len() < 3 {
            return Err(Error::InvalidConfig(
                "network needs at least one hidden layer".into(),
            ));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig("layer sizes must be positive".into()));
        }
        let out = *layer_sizes.last().unwrap();
        if out < 2 {
            return Err(Error::InvalidConfig("output dimension must be >= 2".into()));
        }
        if action_labels.len() != out {
            return Err(Error::InvalidConfig(format!(
                "{} action labels for {} outputs",
                action_labels.len(),
                out
            )));
        }
        for (i, a) in action_labels.iter().enumerate() {
            if action_labels[..i].contains(a) {
                return Err(Error::InvalidConfig(format!("duplicate action label {a:?}")));
            }
        }
        let layers = layer_sizes.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::ShapeMismatch {
                layer: 0,
                detail: format!(
                    "expected {layers} weight/bias blocks, got {}/{}",
                    weights.len(),
                    biases.len()
                ),
            });
        }
        for k in 0..layers {
            let rows = layer_sizes[k + 1];
            let cols = layer_sizes[k];
            if weights[k].len() != rows * cols {
                return Err(Error::ShapeMismatch {
                    layer: k + 1,
                    detail: format!(
                        "weight matrix has {} entries, expected {rows}x{cols}",
                        weights[k].len()
                    ),
                });
            }
            if biases[k].len() != rows {
                return Err(Error::ShapeMismatch {
                    layer: k + 1,
                    detail: format!("bias vector has {} entries, expected {rows}", biases[k].len()),
                });
            }
            if weights[k].iter().chain(&biases[k]).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { line: 0 });
            }
        }
        Ok(Network {
            layer_sizes,
            weights,
            biases,
            action_labels,
            selection_rule,
        })
    }

    /// Load a network from the plain-text format:
    ///
    /// ```text
    /// # comment lines start with '#'
    /// L                      number of layers (output counted, input not)
    /// n0 n1 ... nL           layer sizes
    /// label0 label1 ...      action labels (count = nL)
    /// argmax|argmin          selection rule
    /// <layer 1 weights>      n1 lines of n0 entries each, then 1 bias line
    /// ...
    /// ```
    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    /// Parse the text format; line numbers in errors refer to the full text
    /// including comments.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines.next().ok_or_else(|| Error::Parse {
                line: text.lines().count() + 1,
                message: format!("unexpected end of file, expected {what}"),
            })
        };

        let (line, l) = next("layer count")?;
        let num_layers: usize = l.parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid layer count {l:?}"),
        })?;
        if num_layers < 2 {
            return Err(Error::Parse {
                line,
                message: "need at least one hidden layer".into(),
            });
        }

        let (line, l) = next("layer sizes")?;
        let layer_sizes: Vec<usize> = l
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>().map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid layer size {t:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if layer_sizes.len() != num_layers + 1 {
            return Err(Error::Parse {
                line,
                message: format!(
                    "expected {} layer sizes, got {}",
                    num_layers + 1,
                    layer_sizes.len()
                ),
            });
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Parse {
                line,
                message: "layer sizes must be positive".into(),
            });
        }

        let (line, l) = next("action labels")?;
        let action_labels: Vec<String> = l.split_whitespace().map(str::to_owned).collect();
        if action_labels.len() != *layer_sizes.last().unwrap() {
            return Err(Error::Parse {
                line,
                message: format!(
                    "expected {} action labels, got {}",
                    layer_sizes.last().unwrap(),
                    action_labels.len()
                ),
            });
        }

        let (line, l) = next("selection rule")?;
        let selection_rule = match l {
            "argmax" => SelectionRule::Argmax,
            "argmin" => SelectionRule::Argmin,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("selection rule must be argmax or argmin, got {other:?}"),
                })
            }
        };

        let parse_row = |line: usize, l: &str, expected: usize, layer: usize| -> Result<Vec<f64>> {
            let row: Vec<f64> = l
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        message: format!("invalid number {t:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            if row.len() != expected {
                return Err(Error::ShapeMismatch {
                    layer,
                    detail: format!("row at line {line} has {} entries, expected {expected}", row.len()),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { line });
            }
            Ok(row)
        };

        let mut weights = Vec::with_capacity(num_layers);
        let mut biases = Vec::with_capacity(num_layers);
        for k in 0..num_layers {
            let rows = layer_sizes[k + 1];
            let cols = layer_sizes[k];
            let mut w = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (line, l) = next("weight row")?;
                w.extend(parse_row(line, l, cols, k + 1)?);
            }
            let (line, l) = next("bias row")?;
            let b = parse_row(line, l, rows, k + 1)?;
            weights.push(w);
            biases.push(b);
        }
        if let Some((line, _)) = lines.next() {
            return Err(Error::Parse {
                line,
                message: "trailing content after final bias row".into(),
            });
        }

        Self::new(layer_sizes, weights, biases, action_labels, selection_rule)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn action_labels(&self) -> &[String] {
        &self.action_labels
    }

    pub fn selection_rule(&self) -> SelectionRule {
        self.selection_rule
    }

    pub(crate) fn layer_weights(&self, k: usize) -> &[f64] {
        &self.weights[k]
    }

    pub(crate) fn layer_biases(&self, k: usize) -> &[f64] {
        &self.biases[k]
    }

    /// Raw output scores before action selection. Deterministic: identical
    /// inputs produce bitwise-identical outputs.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut cur = x.to_vec();
        for k in 0..self.num_layers() {
            cur = self.affine(k, &cur);
            if k + 1 < self.num_layers() {
                for v in &mut cur {
                    *v = v.max(0.0);
                }
            }
        }
        Ok(cur)
    }

    fn affine(&self, k: usize, input: &[f64]) -> Vec<f64> {
        let rows = self.layer_sizes[k + 1];
        let cols = self.layer_sizes[k];
        let w = &self.weights[k];
        let b = &self.biases[k];
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let mut acc = b[r];
            let row = &w[r * cols..(r + 1) * cols];
            for (wi, xi) in row.iter().zip(input) {
                acc += wi * xi;
            }
            out.push(acc);
        }
        out
    }

    /// Index of the selected action under the network's selection rule.
    /// Exact ties go to the lowest action index.
    pub fn best_action(&self, x: &[f64]) -> Result<usize> {
        let scores = self.evaluate(x)?;
        Ok(self.select(&scores))
    }

    /// Selection applied to a precomputed score vector.
    pub fn select(&self, scores: &[f64]) -> usize {
        let mut best = 0;
        for i in 1..scores.len() {
            let better = match self.selection_rule {
                SelectionRule::Argmax => scores[i] > scores[best],
                SelectionRule::Argmin => scores[i] < scores[best],
            };
            if better {
                best = i;
            }
        }
        best
    }

    /// Selected action at every corner of `cell`, in lexicographic corner
    /// order (dimension 0 varies fastest, corner 0 is all low bounds).
    pub fn evaluate_corners(&self, cell: &Rect) -> Result<Vec<usize>> {
        if cell.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: cell.dim(),
            });
        }
        if cell.dim() > MAX_CORNER_DIM {
            return Err(Error::DimensionTooLarge {
                dim: cell.dim(),
                max: MAX_CORNER_DIM,
            });
        }
        (0..1usize << cell.dim())
            .map(|c| self.best_action(&cell.corner(c)))
            .collect()
    }

    /// Sign pattern of every hidden pre-activation at `x` (true = active).
    /// Two points with equal patterns lie in the same linear region.
    pub fn activation_pattern(&self, x: &[f64]) -> Result<Vec<bool>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut pattern = Vec::new();
        let mut cur = x.to_vec();
        for k in 0..self.num_layers() {
            cur = self.affine(k, &cur);
            if k + 1 < self.num_layers() {
                for v in &mut cur {
                    pattern.push(*v > 0.0);
                    *v = v.max(0.0);
                }
            }
        }
        Ok(pattern)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_text() -> String {
        // 2-4-4 network, all weights tiny.
        let mut s = String::from("# test network\n2\n2 4 4\na b c d\nargmax\n");
        for _ in 0..4 {
            s.push_str("0.1 -0.1\n");
        }
        s.push_str("0 0 0 0\n");
        for _ in 0..4 {
            s.push_str("0.5 0.5 0.5 0.5\n");
        }
        s.push_str("0.1 0.2 0.3 0.4\n");
        s
    }

    #[test]
    fn loads_header() {
        let net = Network::from_text(&simple_text()).unwrap();
        assert_eq!(net.layer_sizes(), &[2, 4, 4]);
        assert_eq!(net.action_labels().len(), 4);
        assert_eq!(net.selection_rule(), SelectionRule::Argmax);
    }

    #[test]
    fn wrong_row_length_is_shape_mismatch() {
        let text = simple_text().replace("0.1 -0.1", "0.1 -0.1 0.7");
        match Network::from_text(&text) {
            Err(Error::ShapeMismatch { layer: 1, .. }) => {}
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn nan_token_is_nonfinite() {
        let text = simple_text().replacen("0.5 0.5 0.5 0.5", "0.5 NaN 0.5 0.5", 1);
        match Network::from_text(&text) {
            Err(Error::NonFinite { line }) => assert!(line > 0),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    /// Identity-weight single-hidden-layer net: ReLU zeroes the negative channel.
    #[test]
    fn relu_gates_negative_channel() {
        let net = Network::new(
            vec![2, 2, 2],
            vec![vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0, 1.0]],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec!["a".into(), "b".into()],
            SelectionRule::Argmax,
        )
        .unwrap();
        assert_eq!(net.evaluate(&[1.0, -1.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn best_action_and_ties() {
        let net = Network::new(
            vec![1, 1, 3],
            vec![vec![0.0], vec![0.0, 0.0, 0.0]],
            vec![vec![0.0], vec![0.2, 0.9, 0.1]],
            vec!["a".into(), "b".into(), "c".into()],
            SelectionRule::Argmax,
        )
        .unwrap();
        assert_eq!(net.best_action(&[0.0]).unwrap(), 1);
        assert_eq!(net.select(&[0.5, 0.5]), 0);
        assert_eq!(net.select(&[0.2, 0.9, 0.1]), 1);
        let cost = Network::new(
            vec![1, 1, 2],
            vec![vec![0.0], vec![0.0, 0.0]],
            vec![vec![0.0], vec![0.3, 0.1]],
            vec!["a".into(), "b".into()],
            SelectionRule::Argmin,
        )
        .unwrap();
        assert_eq!(net.selection_rule(), SelectionRule::Argmax);
        assert_eq!(cost.best_action(&[0.0]).unwrap(), 1);
    }

    #[test]
    fn corners_constant_network() {
        let net = Network::new(
            vec![2, 1, 2],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![vec![0.0], vec![1.0, 0.0]],
            vec!["a".into(), "b".into()],
            SelectionRule::Argmax,
        )
        .unwrap();
        let cell = Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        assert_eq!(net.evaluate_corners(&cell).unwrap(), vec![0, 0, 0, 0]);
    }

    #[test]
    fn corners_one_dim_boundary() {
        // Output 0 ramps past the midpoint, output 1 is a small constant,
        // so the two corners of a cell straddling 0.5 disagree.
        let net = Network::new(
            vec![1, 1, 2],
            vec![vec![1.0], vec![1.0, 0.0]],
            vec![vec![-0.5], vec![0.0, 0.1]],
            vec!["lo".into(), "hi".into()],
            SelectionRule::Argmax,
        )
        .unwrap();
        let cell = Rect::new(vec![0.0], vec![1.0]);
        assert_eq!(net.evaluate_corners(&cell).unwrap(), vec![1, 0]);
    }

    #[test]
    fn corners_dimension_cap() {
        let d = 17;
        let mut w1 = vec![0.0; d];
        w1[0] = 1.0;
        let net = Network::new(
            vec![d, 1, 2],
            vec![w1, vec![0.0, 0.0]],
            vec![vec![0.0], vec![0.0, 0.0]],
            vec!["a".into(), "b".into()],
            SelectionRule::Argmax,
        )
        .unwrap();
        let cell = Rect::new(vec![0.0; d], vec![1.0; d]);
        match net.evaluate_corners(&cell) {
            Err(Error::DimensionTooLarge { dim: 17, max: 16 }) => {}
            other => panic!("expected dimension cap error, got {other:?}"),
        }
    }

    #[test]
    fn evaluate_is_deterministic() {
        let net = Network::from_text(&simple_text()).unwrap();
        let x = [0.37, -1.2];
        let a = net.evaluate(&x).unwrap();
        let b = net.evaluate(&x).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn dimension_mismatch() {
        let net = Network::from_text(&simple_text()).unwrap();
        assert!(matches!(
            net.evaluate(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }
}
