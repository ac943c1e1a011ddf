//! Binary UE × segment association, optionally varying per slot.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EnvError;

/// Membership of UEs in semantic segments.
///
/// A static matrix has one block. A time-varying matrix holds one block per
/// slot of its period and slot `t` reads block `t % blocks`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct AssociationMatrix {
    ues: usize,
    segments: usize,
    // blocks[b][ue * segments + k]
    blocks: Vec<Vec<u8>>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixRepr {
    Static(Vec<Vec<u8>>),
    Varying(Vec<Vec<Vec<u8>>>),
}

impl TryFrom<MatrixRepr> for AssociationMatrix {
    type Error = EnvError;

    fn try_from(repr: MatrixRepr) -> Result<Self, Self::Error> {
        match repr {
            MatrixRepr::Static(rows) => AssociationMatrix::new(rows),
            MatrixRepr::Varying(blocks) => AssociationMatrix::time_varying(blocks),
        }
    }
}

impl From<AssociationMatrix> for MatrixRepr {
    fn from(m: AssociationMatrix) -> Self {
        let mut blocks = m.to_blocks();
        if blocks.len() == 1 {
            MatrixRepr::Static(blocks.pop().unwrap())
        } else {
            MatrixRepr::Varying(blocks)
        }
    }
}

impl AssociationMatrix {
    /// Static matrix from rows (one per UE) of 0/1 entries.
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self, EnvError> {
        Self::time_varying(vec![rows])
    }

    pub fn time_varying(blocks: Vec<Vec<Vec<u8>>>) -> Result<Self, EnvError> {
        let first = blocks
            .first()
            .ok_or_else(|| EnvError::Config("association matrix has no slot blocks".into()))?;
        let ues = first.len();
        if ues == 0 {
            return Err(EnvError::Config("association matrix has no UEs (N must be >= 1)".into()));
        }
        let segments = first[0].len();
        if segments == 0 {
            return Err(EnvError::Config(
                "association matrix has no segments (K must be >= 1)".into(),
            ));
        }
        let mut flat = Vec::with_capacity(blocks.len());
        for (slot, block) in blocks.iter().enumerate() {
            if block.len() != ues {
                return Err(EnvError::Config(format!(
                    "slot block {slot} has {} UE rows, expected {ues}",
                    block.len()
                )));
            }
            let mut data = Vec::with_capacity(ues * segments);
            for (ue, row) in block.iter().enumerate() {
                if row.len() != segments {
                    return Err(EnvError::Config(format!(
                        "UE {ue} row at slot {slot} has {} entries, expected {segments}",
                        row.len()
                    )));
                }
                for (k, &v) in row.iter().enumerate() {
                    if v > 1 {
                        return Err(EnvError::Config(format!(
                            "entry (UE {ue}, segment {k}, slot {slot}) is {v}, expected 0 or 1"
                        )));
                    }
                }
                if row.iter().all(|&v| v == 0) {
                    return Err(EnvError::Config(format!(
                        "UE {ue} has no associated segment at slot {slot}"
                    )));
                }
                data.extend_from_slice(row);
            }
            flat.push(data);
        }
        Ok(Self { ues, segments, blocks: flat })
    }

    /// One private segment per UE.
    pub fn identity(ues: usize) -> Self {
        let rows = (0..ues)
            .map(|i| (0..ues).map(|k| u8::from(i == k)).collect())
            .collect();
        Self::new(rows).expect("identity matrix is valid for ues >= 1")
    }

    pub fn ues(&self) -> usize {
        self.ues
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn is_static(&self) -> bool {
        self.blocks.len() == 1
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Row-major `ues × segments` entries in force at `slot`.
    pub fn slot(&self, slot: u64) -> &[u8] {
        &self.blocks[(slot % self.blocks.len() as u64) as usize]
    }

    pub fn get(&self, slot: u64, ue: usize, segment: usize) -> u8 {
        self.slot(slot)[ue * self.segments + segment]
    }

    /// Column `segment` at `slot`: the membership of every UE in it.
    pub fn column(&self, slot: u64, segment: usize) -> Vec<u8> {
        let block = self.slot(slot);
        (0..self.ues).map(|i| block[i * self.segments + segment]).collect()
    }

    /// Σ_k a_{i,k} at `slot`.
    pub fn segment_count(&self, slot: u64, ue: usize) -> usize {
        let block = self.slot(slot);
        block[ue * self.segments..(ue + 1) * self.segments]
            .iter()
            .map(|&v| v as usize)
            .sum()
    }

    /// Number of segments each pair of UEs has in common (static matrices).
    pub fn shared_counts(&self) -> Vec<Vec<usize>> {
        let block = self.slot(0);
        let k = self.segments;
        (0..self.ues)
            .map(|i| {
                (0..self.ues)
                    .map(|j| (0..k).filter(|&s| block[i * k + s] == 1 && block[j * k + s] == 1).count())
                    .collect()
            })
            .collect()
    }

    pub fn to_blocks(&self) -> Vec<Vec<Vec<u8>>> {
        self.blocks
            .iter()
            .map(|b| b.chunks(self.segments).map(|r| r.to_vec()).collect())
            .collect()
    }

    /// Parses the text format: whitespace- or comma-separated 0/1 rows, one
    /// row per UE, `#` comments, and `---` lines separating per-slot blocks.
    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let mut blocks = Vec::new();
        let mut current: Vec<Vec<u8>> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with("---") {
                if !current.is_empty() {
                    blocks.push(std::mem::take(&mut current));
                }
                continue;
            }
            let row = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|tok| !tok.is_empty())
                .map(|tok| {
                    tok.parse::<u8>().map_err(|_| {
                        EnvError::Config(format!("line {}: invalid entry {tok:?}", lineno + 1))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            current.push(row);
        }
        if !current.is_empty() {
            blocks.push(current);
        }
        Self::time_varying(blocks)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| EnvError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (b, block) in self.to_blocks().iter().enumerate() {
            if b > 0 {
                out.push_str("---\n");
            }
            for row in block {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{}", cells.join(" "));
            }
        }
        out
    }
}
