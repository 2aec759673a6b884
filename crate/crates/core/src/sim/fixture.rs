use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{Function, Module};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("invalid fixture JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Inputs for one warp run. `args` holds one row of parameter values per lane;
/// a single row is broadcast to every lane. Arrays missing from `global` and
/// `shared` start zeroed, and shorter initializers are zero-padded.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Fixture {
    pub args: Vec<Vec<i32>>,
    pub global: BTreeMap<String, Vec<i32>>,
    pub shared: BTreeMap<String, Vec<i32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warp_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Fixture {
    pub fn from_json(text: &str) -> Result<Fixture, FixtureError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Seeded random inputs: small non-negative arguments (kernels use them as
    /// offsets and trip counts) and arbitrary memory contents.
    pub fn random(m: &Module, f: &Function, warp_size: usize, seed: u64) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let args = (0..warp_size)
            .map(|_| f.params.iter().map(|_| rng.gen_range(0..16)).collect())
            .collect();
        let mut fill =
            |len: u32| -> Vec<i32> { (0..len).map(|_| rng.gen_range(-1000..1000)).collect() };
        let global = m
            .globals
            .iter()
            .map(|g| (g.name.clone(), fill(g.len)))
            .collect();
        let shared = f
            .shared
            .iter()
            .map(|s| (s.name.clone(), fill(s.len)))
            .collect();
        Fixture {
            args,
            global,
            shared,
            warp_size: Some(warp_size),
            seed: Some(seed),
        }
    }
}
