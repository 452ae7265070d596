//! Versioned JSON document for trained networks.

use serde::{Deserialize, Serialize};

use super::{Layer, NarxNetwork, NarxTopology, NetworkSeeds, Normalization};
use crate::error::{Result, SimError};

pub const NETWORK_SCHEMA_VERSION: u32 = 1;
const FORMAT: &str = "rehab-ilc/narx-network";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyDocument {
    pub exogenous_delays: Vec<usize>,
    pub feedback_delays: Vec<usize>,
    pub hidden_layers: Vec<usize>,
    pub hidden_activation: String,
    pub output_activation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDocument {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major, one row per output node.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub schema_version: u32,
    pub format: String,
    pub topology: TopologyDocument,
    pub normalization: Option<Normalization>,
    pub layers: Vec<LayerDocument>,
    pub active_mask: Vec<Vec<bool>>,
    pub seeds: NetworkSeeds,
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidTopology(msg.into())
}

impl From<&NarxNetwork> for NetworkDocument {
    fn from(net: &NarxNetwork) -> Self {
        Self {
            schema_version: NETWORK_SCHEMA_VERSION,
            format: FORMAT.to_string(),
            topology: TopologyDocument {
                exogenous_delays: net.topology.exogenous_delays.clone(),
                feedback_delays: net.topology.feedback_delays.clone(),
                hidden_layers: net.topology.hidden_layers.clone(),
                hidden_activation: "logistic_sigmoid".into(),
                output_activation: "linear".into(),
            },
            normalization: net.normalization,
            layers: net
                .layers
                .iter()
                .map(|l| LayerDocument {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weights: l.weights.clone(),
                    biases: l.biases.clone(),
                })
                .collect(),
            active_mask: net.active.clone(),
            seeds: net.seeds,
        }
    }
}

impl TryFrom<NetworkDocument> for NarxNetwork {
    type Error = SimError;

    fn try_from(doc: NetworkDocument) -> Result<Self> {
        if doc.schema_version != NETWORK_SCHEMA_VERSION {
            return Err(invalid(format!(
                "unsupported network schema version {} (expected {NETWORK_SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        if doc.topology.hidden_activation != "logistic_sigmoid"
            || doc.topology.output_activation != "linear"
        {
            return Err(invalid(
                "only logistic_sigmoid hidden and linear output activations are supported",
            ));
        }
        let topology = NarxTopology::new(
            doc.topology.exogenous_delays,
            doc.topology.feedback_delays,
            doc.topology.hidden_layers,
        )?;
        let mut expected_in = topology.input_count();
        let widths: Vec<usize> = topology.hidden_layers.iter().copied().chain([1]).collect();
        if doc.layers.len() != widths.len() {
            return Err(invalid(format!(
                "{} layers, expected {}",
                doc.layers.len(),
                widths.len()
            )));
        }
        let mut layers = Vec::with_capacity(widths.len());
        for (i, (l, &w)) in doc.layers.into_iter().zip(&widths).enumerate() {
            if l.inputs != expected_in
                || l.outputs != w
                || l.weights.len() != w * expected_in
                || l.biases.len() != w
            {
                return Err(invalid(format!("layer {i} has inconsistent shape")));
            }
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(invalid(format!("layer {i} has non-finite parameters")));
            }
            layers.push(Layer {
                inputs: l.inputs,
                outputs: l.outputs,
                weights: l.weights,
                biases: l.biases,
            });
            expected_in = w;
        }
        let mask_ok = doc.active_mask.len() == topology.hidden_layers.len()
            && doc
                .active_mask
                .iter()
                .zip(&topology.hidden_layers)
                .all(|(m, &w)| m.len() == w);
        if !mask_ok {
            return Err(invalid("active_mask does not match hidden layer widths"));
        }
        Ok(NarxNetwork {
            topology,
            layers,
            normalization: doc.normalization,
            active: doc.active_mask,
            seeds: doc.seeds,
        })
    }
}

impl NarxNetwork {
    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument::from(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("network document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDocument =
            serde_json::from_str(text).map_err(|e| invalid(format!("network file: {e}")))?;
        doc.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narx::NetworkVariant;

    #[test]
    fn json_round_trip_is_exact() {
        let net = NarxNetwork::for_variant(NetworkVariant::Narx2, 17)
            .unwrap()
            .lesion(&[2, 1], 4)
            .unwrap();
        let text = net.to_json();
        let back = NarxNetwork::from_json(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_json(), text);
        assert!(text.contains("\"schema_version\": 1"));
    }

    #[test]
    fn rejects_wrong_version_and_shapes() {
        let net = NarxNetwork::for_variant(NetworkVariant::Narx1, 0).unwrap();
        let mut doc = net.to_document();
        doc.schema_version = 2;
        assert!(NarxNetwork::try_from(doc).is_err());

        let mut doc = net.to_document();
        doc.layers[0].weights.pop();
        assert!(NarxNetwork::try_from(doc).is_err());

        let mut doc = net.to_document();
        doc.active_mask[0].push(true);
        assert!(NarxNetwork::try_from(doc).is_err());

        assert!(NarxNetwork::from_json("{}").is_err());
    }
}
