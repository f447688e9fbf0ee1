//! Per-level records of a peeling recursion.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    /// Dense: handed to the dense solver.
    A,
    /// Remainder negligible: arranged arbitrarily.
    B,
    /// Peel and recurse.
    C,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::A => "a",
            Case::B => "b",
            Case::C => "c",
        })
    }
}

/// One recursion level. Point ids are in the numbering of the top-level
/// metric. Peel fields are `None` on dense levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub n: usize,
    /// `None` when the level's density is dense by convention.
    pub density: Option<f64>,
    pub case: Case,
    pub a_size: usize,
    pub b_size: usize,
    pub c_size: usize,
    pub diameter: f64,
    pub weight: f64,
    /// Value of the level's own solution on its submetric.
    pub value: f64,
    pub core_diameter: Option<f64>,
    pub w_a: Option<f64>,
    pub w_ab: Option<f64>,
    pub w_ac: Option<f64>,
    /// Weight of what remains after peeling: `V∖A` for LA, `C` for HC.
    pub w_rest: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub peeled: Vec<usize>,
    pub core: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecursionTrace {
    pub levels: Vec<LevelRecord>,
}

impl RecursionTrace {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Case letters in level order, e.g. `"ccb"`.
    pub fn cases(&self) -> String {
        self.levels.iter().map(|l| l.case.to_string()).collect()
    }

    /// True when every level but the last is case (c) and the last is not.
    pub fn well_formed(&self) -> bool {
        match self.levels.split_last() {
            None => true,
            Some((last, rest)) => last.case != Case::C && rest.iter().all(|l| l.case == Case::C),
        }
    }

    /// Consecutive `(ρ_i, ρ_{i+1})` pairs where level `i` peeled and recursed.
    pub fn density_steps(&self) -> Vec<(f64, Option<f64>)> {
        self.levels
            .windows(2)
            .filter(|w| w[0].case == Case::C)
            .filter_map(|w| w[0].density.map(|d| (d, w[1].density)))
            .collect()
    }

    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for l in &self.levels {
            out.push_str(&serde_json::to_string(l).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_json_lines(text: &str) -> Result<Self, serde_json::Error> {
        let levels =
            text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect::<Result<_, _>>()?;
        Ok(RecursionTrace { levels })
    }
}
