use std::path::Path;

use ndarray::Array2;

use super::ExperimentError;

/// Per-node binary test scores, one column per seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreTable {
    pub variant: String,
    /// External ids of the test nodes, row order.
    pub node_ids: Vec<usize>,
    pub seeds: Vec<u64>,
    /// `[n_test_nodes × n_seeds]`, entries 0 or 1.
    pub scores: Array2<u8>,
}

impl ScoreTable {
    pub fn new(
        variant: impl Into<String>,
        node_ids: Vec<usize>,
        seeds: Vec<u64>,
        columns: &[Vec<u8>],
    ) -> Result<Self, ExperimentError> {
        if columns.len() != seeds.len() {
            return Err(ExperimentError::MisalignedTables(format!(
                "{} score columns for {} seeds",
                columns.len(),
                seeds.len()
            )));
        }
        let n = node_ids.len();
        let mut scores = Array2::zeros((n, seeds.len()));
        for (s, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(ExperimentError::MisalignedTables(format!(
                    "seed column {s} has {} scores for {n} nodes",
                    col.len()
                )));
            }
            if let Some(bad) = col.iter().find(|&&v| v > 1) {
                return Err(ExperimentError::InvalidConfig(format!("non-binary score {bad}")));
            }
            scores.column_mut(s).assign(&ndarray::ArrayView1::from(col));
        }
        Ok(Self {
            variant: variant.into(),
            node_ids,
            seeds,
            scores,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    /// Scores paired by `(node, seed)`, node-major.
    pub fn flattened(&self) -> Vec<f64> {
        self.scores.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn seed_accuracies(&self) -> Vec<f64> {
        let n = self.n_nodes().max(1) as f64;
        self.scores
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|&v| f64::from(v)).sum::<f64>() / n)
            .collect()
    }

    pub fn mean_accuracy(&self) -> f64 {
        let acc = self.seed_accuracies();
        acc.iter().sum::<f64>() / acc.len().max(1) as f64
    }

    /// Fails unless both tables cover the same seeds and test nodes in the
    /// same order.
    pub fn check_aligned(&self, other: &ScoreTable) -> Result<(), ExperimentError> {
        if self.seeds != other.seeds {
            return Err(ExperimentError::MisalignedTables(format!(
                "seed lists differ: {:?} vs {:?}",
                self.seeds, other.seeds
            )));
        }
        if self.node_ids != other.node_ids {
            return Err(ExperimentError::MisalignedTables(format!(
                "test node orderings differ ({} vs {} nodes)",
                self.n_nodes(),
                other.n_nodes()
            )));
        }
        Ok(())
    }

    /// `node_id,seed_<s>,...`; the variant name goes in a leading comment.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), ExperimentError> {
        let mut out = String::new();
        out.push_str(&format!("# variant: {}\n", self.variant));
        out.push_str("node_id");
        for s in &self.seeds {
            out.push_str(&format!(",seed_{s}"));
        }
        out.push('\n');
        for (row, id) in self.scores.rows().into_iter().zip(&self.node_ids) {
            out.push_str(&id.to_string());
            for v in row {
                out.push(',');
                out.push(if *v == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let bad = |msg: String| ExperimentError::Parse(format!("{}: {msg}", path.display()));
        let mut variant = String::new();
        let mut lines = text.lines().filter(|l| {
            if let Some(v) = l.strip_prefix("# variant:") {
                variant = v.trim().to_owned();
            }
            !l.starts_with('#') && !l.trim().is_empty()
        });
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let seeds = header
            .split(',')
            .skip(1)
            .map(|h| {
                h.trim()
                    .strip_prefix("seed_")
                    .and_then(|s| s.parse::<u64>().ok())
                    .ok_or_else(|| bad(format!("bad column header '{h}'")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut node_ids = Vec::new();
        let mut columns = vec![Vec::new(); seeds.len()];
        for line in lines {
            let mut fields = line.split(',');
            let id = fields
                .next()
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| bad(format!("bad node id in '{line}'")))?;
            node_ids.push(id);
            let values: Vec<&str> = fields.collect();
            if values.len() != seeds.len() {
                return Err(bad(format!("expected {} scores in '{line}'", seeds.len())));
            }
            for (col, v) in columns.iter_mut().zip(values) {
                col.push(match v.trim() {
                    "0" => 0,
                    "1" => 1,
                    other => return Err(bad(format!("non-binary score '{other}'"))),
                });
            }
        }
        ScoreTable::new(variant, node_ids, seeds, &columns)
    }
}
