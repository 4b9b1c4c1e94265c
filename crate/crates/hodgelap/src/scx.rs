//! The ".scx" complex file format (JSON) and the chain file format.
//!
//! Complex file:
//! `{"vertices":[[id,x,y,z],...],
//!   "simplices":{"1":[[a,b],...],"2":[...],"3":[...]},
//!   "in_K":[[dim,index],...],
//!   "collapses":[[[dim,index],[dim,index]],...],
//!   "ambient_tets":[...]}`
//!
//! Chain file: `{"dim":d,"scope":"K","values":[...]}` aligned to the
//! dense index order of the complex file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::collapse::{validate, CollapsePair, CollapsingSequence, Validation};
use crate::complex::{Chain, EmbeddedComplex, RawComplex, Scope};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
pub struct ScxFile {
    pub vertices: Vec<(u32, f64, f64, f64)>,
    pub simplices: BTreeMap<String, Vec<Vec<u32>>>,
    #[serde(default, rename = "in_K")]
    pub in_k: Option<Vec<(usize, usize)>>,
    #[serde(default)]
    pub collapses: Vec<((usize, usize), (usize, usize))>,
    #[serde(default)]
    pub ambient_tets: Option<Vec<Vec<u32>>>,
}

/// A validated complex together with its collapsing sequence.
pub struct Instance {
    pub complex: EmbeddedComplex,
    pub sequence: CollapsingSequence,
}

pub fn to_scx(complex: &EmbeddedComplex, sequence: &CollapsingSequence) -> ScxFile {
    let vertices = complex
        .vertex_ids
        .iter()
        .zip(&complex.coords)
        .map(|(&id, c)| (id, c[0], c[1], c[2]))
        .collect();
    let mut simplices = BTreeMap::new();
    for d in 1..=3 {
        let list: Vec<Vec<u32>> = complex.simplices[d]
            .iter()
            .map(|s| s.iter().map(|&v| complex.vertex_ids[v as usize]).collect())
            .collect();
        simplices.insert(d.to_string(), list);
    }
    let mut in_k = Vec::new();
    for d in 0..=3 {
        for (i, &f) in complex.in_k[d].iter().enumerate() {
            if f {
                in_k.push((d, i));
            }
        }
    }
    let collapses = sequence.pairs.iter().map(|p| (p.sigma, p.tau)).collect();
    ScxFile {
        vertices,
        simplices,
        in_k: Some(in_k),
        collapses,
        ambient_tets: None,
    }
}

/// Parses and fully validates a complex description: face closure,
/// K-closure and the collapsing sequence (defense against hand-edited
/// files).
pub fn from_scx(file: &ScxFile) -> Result<Instance> {
    let raw = RawComplex {
        vertices: file
            .vertices
            .iter()
            .map(|&(id, x, y, z)| (id, [x, y, z]))
            .collect(),
        simplices: (1..=3)
            .map(|d| {
                file.simplices
                    .get(&d.to_string())
                    .cloned()
                    .unwrap_or_default()
            })
            .collect(),
        in_k: file.in_k.clone(),
    };
    let complex = EmbeddedComplex::build(&raw)?;
    let sequence = CollapsingSequence {
        pairs: file
            .collapses
            .iter()
            .map(|&(sigma, tau)| CollapsePair { sigma, tau })
            .collect(),
    };
    if !sequence.pairs.is_empty() || complex.total_simplices() <= 1 {
        match validate(&complex, &sequence) {
            Validation::Ok => {}
            Validation::Violation { index, reason } => {
                return Err(Error::Format(format!(
                    "collapsing sequence invalid at pair {}: {}",
                    index, reason
                )))
            }
        }
    }
    Ok(Instance { complex, sequence })
}

pub fn save_instance(path: &Path, complex: &EmbeddedComplex, seq: &CollapsingSequence) -> Result<()> {
    let file = to_scx(complex, seq);
    let text = serde_json::to_string(&file)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    let file: ScxFile = serde_json::from_str(&text)?;
    from_scx(&file)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChainFile {
    pub dim: usize,
    pub scope: String,
    pub values: Vec<f64>,
}

pub fn save_chain(path: &Path, chain: &Chain) -> Result<()> {
    let file = ChainFile {
        dim: chain.dim,
        scope: chain.scope.to_string(),
        values: chain.values.clone(),
    };
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_chain(path: &Path) -> Result<Chain> {
    let text = std::fs::read_to_string(path)?;
    let file: ChainFile = serde_json::from_str(&text)?;
    let scope = match file.scope.as_str() {
        "X" => Scope::X,
        "K" => Scope::K,
        "T" => Scope::T,
        other => return Err(Error::Format(format!("unknown scope {:?}", other))),
    };
    Ok(Chain::from_values(file.dim, scope, file.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;

    #[test]
    fn scx_round_trip_preserves_structure() {
        let inst = generate::ball(3, 7).unwrap();
        let file = to_scx(&inst.complex, &inst.sequence);
        let text = serde_json::to_string(&file).unwrap();
        let parsed: ScxFile = serde_json::from_str(&text).unwrap();
        let back = from_scx(&parsed).unwrap();
        assert_eq!(back.complex.count(0), inst.complex.count(0));
        assert_eq!(back.complex.count(3), inst.complex.count(3));
        assert_eq!(back.sequence.pairs.len(), inst.sequence.pairs.len());
    }

    #[test]
    fn tampered_sequence_rejected_on_load() {
        let inst = generate::ball(2, 1).unwrap();
        let mut file = to_scx(&inst.complex, &inst.sequence);
        let last = file.collapses.len() - 1;
        file.collapses.swap(0, last);
        assert!(from_scx(&file).is_err());
    }
}
