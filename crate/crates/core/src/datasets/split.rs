use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seeds;

/// Train / validation / test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fractions(pub f64, pub f64, pub f64);

impl Default for Fractions {
    fn default() -> Self {
        Fractions(0.4, 0.3, 0.3)
    }
}

impl Fractions {
    fn as_array(self) -> [f64; 3] {
        [self.0, self.1, self.2]
    }

    fn validate(self) -> Result<()> {
        let f = self.as_array();
        if f.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::Validation(format!(
                "split fractions must be positive, got {f:?}"
            )));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Index partition of a dataset. Each part holds sorted dataset indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub z1: Vec<usize>,
    pub z2: Vec<usize>,
    pub z3: Vec<usize>,
    pub seed: u64,
    pub repetition_index: usize,
}

impl Split {
    /// Stable fingerprint of the partition, used to check that sweeps share
    /// splits.
    pub fn fingerprint(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325_u64;
        for (tag, part) in [(1u64, &self.z1), (2, &self.z2), (3, &self.z3)] {
            for &i in std::iter::once(&(tag as usize)).chain(part.iter()) {
                for b in (i as u64).to_le_bytes() {
                    h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }

    /// Checks disjointness and index bounds.
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        let mut owner = vec![0u8; dataset.len()];
        for (tag, part) in [(1u8, &self.z1), (2, &self.z2), (3, &self.z3)] {
            for &i in part {
                if i >= dataset.len() {
                    return Err(Error::Validation(format!(
                        "split index {i} out of range for {} samples",
                        dataset.len()
                    )));
                }
                if owner[i] != 0 {
                    return Err(Error::Validation(format!(
                        "sample '{}' appears in Z{} and Z{tag}",
                        dataset.samples[i].id, owner[i]
                    )));
                }
                owner[i] = tag;
            }
        }
        Ok(())
    }

    pub fn to_document(&self, dataset: &Dataset, fractions: Fractions) -> SplitDocument {
        let ids = |part: &[usize]| part.iter().map(|&i| dataset.samples[i].id.clone()).collect();
        SplitDocument {
            seed: self.seed,
            repetition_index: self.repetition_index,
            fractions,
            z1: ids(&self.z1),
            z2: ids(&self.z2),
            z3: ids(&self.z3),
        }
    }
}

/// Persisted form of a split: ids per partition plus seed and fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDocument {
    pub seed: u64,
    pub repetition_index: usize,
    pub fractions: Fractions,
    pub z1: Vec<String>,
    pub z2: Vec<String>,
    pub z3: Vec<String>,
}

impl SplitDocument {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn resolve(&self, dataset: &Dataset) -> Result<Split> {
        let index: HashMap<&str, usize> = dataset
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.as_str(), i))
            .collect();
        let lookup = |ids: &[String]| -> Result<Vec<usize>> {
            let mut v = ids
                .iter()
                .map(|id| {
                    index.get(id.as_str()).copied().ok_or_else(|| {
                        Error::Validation(format!("split references unknown id '{id}'"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            v.sort_unstable();
            Ok(v)
        };
        let split = Split {
            z1: lookup(&self.z1)?,
            z2: lookup(&self.z2)?,
            z3: lookup(&self.z3)?,
            seed: self.seed,
            repetition_index: self.repetition_index,
        };
        split.validate(dataset)?;
        Ok(split)
    }
}

/// Largest-remainder allocation of `n` items over the fractions. Ties in the
/// remainder go to the later partition, so Z3 absorbs the final remainder.
fn allocate(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let quotas = fractions.map(|f| f * n as f64);
    let mut sizes = quotas.map(|q| (q + 1e-9).floor() as usize);
    let mut remaining = n - sizes.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    let frac = |k: usize| quotas[k] - sizes[k] as f64;
    order.sort_by(|&a, &b| {
        frac(b)
            .partial_cmp(&frac(a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.cmp(&a))
    });
    for &k in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        sizes[k] += 1;
        remaining -= 1;
    }
    sizes
}

/// Per-class stratified partition into Z1/Z2/Z3.
pub fn stratified_split(dataset: &Dataset, fractions: Fractions, seed: u64) -> Result<Split> {
    fractions.validate()?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.m];
    for (i, s) in dataset.samples.iter().enumerate() {
        by_class[s.label - 1].push(i);
    }
    for (k, members) in by_class.iter().enumerate() {
        // Absent classes are allowed (m is the largest label); tiny ones are not.
        if !members.is_empty() && members.len() < 3 {
            return Err(Error::Stratification {
                class: k + 1,
                count: members.len(),
            });
        }
    }
    let mut rng = seeds::rng(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for mut members in by_class {
        members.shuffle(&mut rng);
        let sizes = allocate(members.len(), fractions.as_array());
        let mut rest = members.as_slice();
        for (part, size) in parts.iter_mut().zip(sizes) {
            let (take, tail) = rest.split_at(size);
            part.extend_from_slice(take);
            rest = tail;
        }
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    let [z1, z2, z3] = parts;
    Ok(Split {
        z1,
        z2,
        z3,
        seed,
        repetition_index: 0,
    })
}

/// Downsample Z1 so every class present in it has the size of the smallest
/// one. Z2 and Z3 are untouched.
pub fn balance_training(split: &Split, dataset: &Dataset, seed: u64) -> Result<Split> {
    split.validate(dataset)?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.m];
    for &i in &split.z1 {
        by_class[dataset.samples[i].label - 1].push(i);
    }
    let Some(target) = by_class.iter().map(Vec::len).filter(|&c| c > 0).min() else {
        return Ok(split.clone());
    };
    let mut rng = seeds::rng(seed);
    let mut z1 = Vec::with_capacity(target * dataset.m);
    for mut members in by_class {
        if members.len() > target {
            members.shuffle(&mut rng);
            members.truncate(target);
        }
        z1.extend(members);
    }
    z1.sort_unstable();
    Ok(Split {
        z1,
        ..split.clone()
    })
}
