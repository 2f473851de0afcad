//! Graph JSON (de)serialization.
//!
//! Schema: `{"vertices":[..], "context":[..], "directed":[[tail,head],..],
//! "bidirected":[[a,b],..]}`. The order of `vertices` defines the index
//! order; `context` names a subset of them; edge arrays are written
//! sorted by index pairs.

use super::{Admg, GraphError};
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct GraphJson {
    pub vertices: Vec<String>,
    #[serde(default)]
    pub context: Vec<String>,
    #[serde(default)]
    pub directed: Vec<(String, String)>,
    #[serde(default)]
    pub bidirected: Vec<(String, String)>,
}

impl From<&Admg> for GraphJson {
    fn from(g: &Admg) -> GraphJson {
        GraphJson {
            vertices: g.names().to_vec(),
            context: g.context().iter().map(|v| g.name(v).to_string()).collect(),
            directed: g
                .directed_edges()
                .iter()
                .map(|&(a, b)| (g.name(a).to_string(), g.name(b).to_string()))
                .collect(),
            bidirected: g
                .bidirected_edges()
                .iter()
                .map(|&(a, b)| (g.name(a).to_string(), g.name(b).to_string()))
                .collect(),
        }
    }
}

impl TryFrom<&GraphJson> for Admg {
    type Error = GraphError;

    fn try_from(j: &GraphJson) -> Result<Admg, GraphError> {
        let mut g = Admg::new(j.vertices.iter().cloned())?;
        for (a, b) in &j.directed {
            let (a, b) = (g.vertex(a)?, g.vertex(b)?);
            g.add_directed(a, b)?;
        }
        for (a, b) in &j.bidirected {
            let (a, b) = (g.vertex(a)?, g.vertex(b)?);
            g.add_bidirected(a, b)?;
        }
        for name in &j.context {
            let w = g.vertex(name)?;
            g.context = g.context.insert(w);
            g.random = g.random.remove(w);
        }
        g.validate()?;
        Ok(g)
    }
}

impl Admg {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphJson::from(self)).expect("graph serialization")
    }

    pub fn from_json(text: &str) -> Result<Admg, String> {
        let j: GraphJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Admg::try_from(&j).map_err(|e| e.to_string())
    }
}
