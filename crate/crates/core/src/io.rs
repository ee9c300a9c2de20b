//! Model file format (JSON, UTF-8):
//!
//! ```json
//! {"n": 3, "edges": [[0, 1, 0.5], [1, 2, -0.25]], "fields": [0.0, 0.1, 0.0]}
//! ```
//!
//! `edges` lists 0-based pairs i < j with weights; `fields` is optional and
//! defaults to zero. The presence of a `terms` key makes the file an MRF:
//! `"terms": [[[0,1,2], 0.7], ...]`, with optional `"order"` (defaults to the
//! largest subset size). In the MRF case `edges` populate pairwise terms and
//! `fields` populate singleton terms.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IsingModel, Model, Mrf};

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    edges: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fields: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    terms: Option<Vec<(Vec<usize>, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<usize>,
}

pub fn model_from_json(text: &str) -> Result<Model> {
    let file: ModelFile = serde_json::from_str(text)?;
    let n = file.n;
    if n == 0 {
        return Err(Error::BadModelFile("n must be >= 1".into()));
    }
    for &(i, j, _) in &file.edges {
        if i >= j {
            return Err(Error::BadModelFile(format!(
                "edge ({i},{j}) must satisfy i < j"
            )));
        }
        if j >= n {
            return Err(Error::BadModelFile(format!(
                "edge ({i},{j}) disagrees with n={n}"
            )));
        }
    }
    if let Some(fields) = &file.fields {
        if fields.len() != n {
            return Err(Error::BadModelFile(format!(
                "fields length {} disagrees with n={n}",
                fields.len()
            )));
        }
    }

    match file.terms {
        None => {
            let model = IsingModel::from_edges(n, &file.edges, file.fields)?;
            Ok(Model::Ising(model))
        }
        Some(term_list) => {
            let mut terms: Vec<(Vec<usize>, f64)> = term_list;
            for &(i, j, w) in &file.edges {
                terms.push((vec![i, j], w));
            }
            if let Some(fields) = &file.fields {
                for (i, &h) in fields.iter().enumerate() {
                    if h != 0.0 {
                        terms.push((vec![i], h));
                    }
                }
            }
            let max_deg = terms.iter().map(|(k, _)| k.len()).max().unwrap_or(1);
            let order = file.order.unwrap_or(max_deg);
            if order < max_deg {
                return Err(Error::BadModelFile(format!(
                    "declared order {order} is below the largest term size {max_deg}"
                )));
            }
            for (key, _) in &terms {
                if key.last().is_some_and(|&v| v >= n) {
                    return Err(Error::BadModelFile(format!(
                        "term {key:?} disagrees with n={n}"
                    )));
                }
            }
            Ok(Model::Mrf(Mrf::new(n, order, terms)?))
        }
    }
}

pub fn model_to_json(model: &Model) -> String {
    let file = match model {
        Model::Ising(m) => {
            let n = m.n();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    let w = m.coupling(i, j);
                    if w != 0.0 {
                        edges.push((i, j, w));
                    }
                }
            }
            let fields = if m.fields().iter().any(|&h| h != 0.0) {
                Some(m.fields().to_vec())
            } else {
                None
            };
            ModelFile {
                n,
                edges,
                fields,
                terms: None,
                order: None,
            }
        }
        Model::Mrf(m) => ModelFile {
            n: m.n(),
            edges: Vec::new(),
            fields: None,
            terms: Some(m.terms().iter().map(|(k, &v)| (k.clone(), v)).collect()),
            order: Some(m.order()),
        },
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path)?;
    let model = model_from_json(&text)?;
    model.validate()?;
    Ok(model)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(model))?;
    Ok(())
}
