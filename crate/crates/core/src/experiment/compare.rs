use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scores::ScoreTable;
use super::wilcoxon::{wilcoxon_signed_rank, Alternative, WilcoxonResult};
use super::ExperimentError;

pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "+")]
    Better,
    #[serde(rename = "-")]
    Worse,
    #[serde(rename = "=")]
    Same,
}

impl Verdict {
    pub fn symbol(self) -> char {
        match self {
            Verdict::Better => '+',
            Verdict::Worse => '-',
            Verdict::Same => '=',
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub variant_a: String,
    pub variant_b: String,
    /// Test of `a > b`.
    pub greater: WilcoxonResult,
    /// Test of `a < b`.
    pub less: WilcoxonResult,
    pub verdict: Verdict,
}

impl Comparison {
    pub fn result(&self, alternative: Alternative) -> &WilcoxonResult {
        match alternative {
            Alternative::Greater => &self.greater,
            Alternative::Less => &self.less,
        }
    }
}

/// Paired comparison over flattened `(node, seed)` scores: `+` when `a`
/// scores significantly higher, `-` when significantly lower, `=` otherwise.
pub fn compare(a: &ScoreTable, b: &ScoreTable) -> Result<Comparison, ExperimentError> {
    a.check_aligned(b)?;
    let (fa, fb) = (a.flattened(), b.flattened());
    let greater = wilcoxon_signed_rank(&fa, &fb, Alternative::Greater)?;
    let less = wilcoxon_signed_rank(&fa, &fb, Alternative::Less)?;
    let verdict = if greater.p_value < SIGNIFICANCE {
        Verdict::Better
    } else if less.p_value < SIGNIFICANCE {
        Verdict::Worse
    } else {
        Verdict::Same
    };
    Ok(Comparison {
        variant_a: a.variant.clone(),
        variant_b: b.variant.clone(),
        greater,
        less,
        verdict,
    })
}

/// `variant_a,variant_b,alternative,p_value,verdict`.
pub fn write_comparisons_csv(
    path: impl AsRef<Path>,
    rows: &[(&Comparison, Alternative)],
) -> Result<(), ExperimentError> {
    let mut out = String::from("variant_a,variant_b,alternative,p_value,verdict\n");
    for (c, alt) in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.variant_a,
            c.variant_b,
            alt.as_str(),
            c.result(*alt).p_value,
            c.verdict
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}
