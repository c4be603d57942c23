//! JSON group definitions and the built-in groups.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::{CarnotGroup, CertifyOptions};
use crate::error::{usage, Result};

/// `{"k": 3, "c": 1.0}`: a component `c X_k` of a bracket (one-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub k: usize,
    pub c: f64,
}

/// `[X_i, X_j] = Σ c X_k` (one-based indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketSpec {
    pub i: usize,
    pub j: usize,
    pub out: Vec<OutputSpec>,
}

/// Serialized form of a group:
/// `{"layer_dims":[..], "brackets":[{"i":1,"j":2,"out":[{"k":3,"c":1.0}]}], "norm_weights":[..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDefinition {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub layer_dims: Vec<usize>,
    #[serde(default)]
    pub brackets: Vec<BracketSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_weights: Option<Vec<f64>>,
}

impl GroupDefinition {
    pub fn abelian(n: usize) -> Self {
        Self { name: Some(format!("abelian:{n}")), layer_dims: vec![n], brackets: vec![], norm_weights: None }
    }

    /// `H^n`: `[X_i, X_{n+i}] = X_{2n+1}`.
    pub fn heisenberg(n: usize) -> Self {
        let brackets = (1..=n)
            .map(|i| BracketSpec { i, j: n + i, out: vec![OutputSpec { k: 2 * n + 1, c: 1.0 }] })
            .collect();
        Self { name: Some(format!("heisenberg:{n}")), layer_dims: vec![2 * n, 1], brackets, norm_weights: None }
    }

    /// Step-3 Engel group: `[X_1, X_2] = X_3`, `[X_1, X_3] = X_4`.
    pub fn engel() -> Self {
        Self {
            name: Some("engel".into()),
            layer_dims: vec![2, 1, 1],
            brackets: vec![
                BracketSpec { i: 1, j: 2, out: vec![OutputSpec { k: 3, c: 1.0 }] },
                BracketSpec { i: 1, j: 3, out: vec![OutputSpec { k: 4, c: 1.0 }] },
            ],
            norm_weights: None,
        }
    }

    fn from_builtin_name(name: &str) -> Result<Self> {
        let (kind, arg) = match name.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (name, None),
        };
        let count = |arg: Option<&str>| -> Result<usize> {
            arg.and_then(|a| a.parse::<usize>().ok())
                .filter(|&n| n >= 1)
                .ok_or_else(|| usage(format!("group `{name}` needs a positive integer parameter")))
        };
        match kind {
            "abelian" => Ok(Self::abelian(count(arg)?)),
            "heisenberg" => Ok(Self::heisenberg(count(arg)?)),
            "engel" if arg.is_none() => Ok(Self::engel()),
            _ => Err(usage(format!("unknown built-in group `{name}`"))),
        }
    }
}

fn cache() -> &'static Mutex<HashMap<String, Arc<CarnotGroup>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<CarnotGroup>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Returns a built-in group (`abelian:<N>`, `heisenberg:<n>`, `engel`) with
/// certified norm weights. Results are cached per process.
pub fn builtin(name: &str) -> Result<Arc<CarnotGroup>> {
    if let Some(g) = cache().lock().expect("group cache poisoned").get(name) {
        return Ok(g.clone());
    }
    let def = GroupDefinition::from_builtin_name(name)?;
    let group = Arc::new(CarnotGroup::from_definition(&def, &CertifyOptions::default())?);
    cache().lock().expect("group cache poisoned").insert(name.to_string(), group.clone());
    Ok(group)
}

/// Resolves a group spec: a built-in name, a path to a JSON definition, or
/// an inline JSON document.
pub fn parse_group_spec(spec: &str) -> Result<Arc<CarnotGroup>> {
    let trimmed = spec.trim();
    if trimmed.starts_with('{') {
        let def: GroupDefinition = serde_json::from_str(trimmed)?;
        return Ok(Arc::new(CarnotGroup::from_definition(&def, &CertifyOptions::default())?));
    }
    match builtin(trimmed) {
        Ok(g) => Ok(g),
        Err(e) => {
            let path = std::path::Path::new(trimmed);
            if path.exists() {
                let def: GroupDefinition = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                Ok(Arc::new(CarnotGroup::from_definition(&def, &CertifyOptions::default())?))
            } else {
                Err(e)
            }
        }
    }
}
