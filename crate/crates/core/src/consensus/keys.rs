use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::NodeId;
use crate::crypto::{CryptoError, CurveParams, Point};
use crate::macau::decode_hex_strict;

/// Public keys of every node allowed to contribute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyDirectory {
    params: CurveParams,
    keys: BTreeMap<NodeId, Point>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyDirectoryFile {
    curve: String,
    /// node id -> hex point encoding
    keys: BTreeMap<u64, String>,
}

impl KeyDirectory {
    pub fn new(params: CurveParams) -> Self {
        KeyDirectory {
            params,
            keys: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, node: NodeId, public: Point) -> Result<(), CryptoError> {
        if public.is_infinity() || !self.params.contains(&public) {
            return Err(CryptoError::PointNotOnCurve);
        }
        self.keys.insert(node, public);
        Ok(())
    }

    pub fn get(&self, node: NodeId) -> Option<&Point> {
        self.keys.get(&node)
    }

    pub fn params(&self) -> &CurveParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Point)> {
        self.keys.iter().map(|(n, p)| (*n, p))
    }

    /// `{"curve": name, "keys": {"<id>": "<hex point>"}}`
    pub fn to_json(&self) -> String {
        let file = KeyDirectoryFile {
            curve: self.params.name.clone(),
            keys: self
                .keys
                .iter()
                .map(|(n, p)| (n.0, hex::encode(self.params.encode_point(p))))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, KeyDirectoryError> {
        let file: KeyDirectoryFile = serde_json::from_str(text)?;
        let mut dir = KeyDirectory::new(CurveParams::by_name(&file.curve)?);
        for (id, enc) in file.keys {
            let bytes = decode_hex_strict(&enc).map_err(CryptoError::from)?;
            let pt = dir.params.decode_point(&bytes)?;
            dir.insert(NodeId(id), pt)?;
        }
        Ok(dir)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum KeyDirectoryError {
    #[error("malformed key directory: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}
