//! Control messages (JSON text) and position frames (binary).

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use planehead_core::lm::Termination;
use planehead_core::stylize::EnergyTerms;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalParam {
    LambdaD,
    LambdaF,
    LambdaA,
    LambdaE,
    LambdaV,
    LambdaN,
    Mu,
    Smoothing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameHeader {
    pub revision: u64,
    pub vertex_count: u32,
    pub connectivity_hash: String,
    /// False while a budget-capped optimization is still being refined.
    pub converged: bool,
    /// Sent only with the first frame of a connection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triangles: Option<Vec<[u32; 3]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyReport {
    pub revision: u64,
    pub energy: f64,
    pub terms: EnergyTerms,
    pub iterations: usize,
    pub termination: Termination,
    pub degenerate_regions: Vec<u32>,
    pub clamped_scales: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolMessage {
    SetGlobal {
        param: GlobalParam,
        value: f64,
    },
    SetEdgeWeight {
        regions: [u32; 2],
        scale: f64,
    },
    SetEdgeSmoothing {
        regions: [u32; 2],
        smoothing: f64,
    },
    SetFacePlanarization {
        region: u32,
        mu: f64,
    },
    ToggleLanteri {
        enabled: bool,
    },
    /// Echoed back with the exported revision once the file is written.
    RequestExport {
        path: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        revision: Option<u64>,
    },
    MeshFrame(FrameHeader),
    EnergyReport(EnergyReport),
    Error {
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        revision: Option<u64>,
    },
}

impl ProtocolMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("protocol messages serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("bad message: {e}"))
    }

    pub fn is_edit(&self) -> bool {
        matches!(
            self,
            ProtocolMessage::SetGlobal { .. }
                | ProtocolMessage::SetEdgeWeight { .. }
                | ProtocolMessage::SetEdgeSmoothing { .. }
                | ProtocolMessage::SetFacePlanarization { .. }
                | ProtocolMessage::ToggleLanteri { .. }
        )
    }
}

/// `[revision: u64][count: u32][x y z: f32 × count]`, little-endian.
pub fn encode_frame(revision: u64, positions: &[f32]) -> Vec<u8> {
    debug_assert_eq!(positions.len() % 3, 0);
    let mut out = Vec::with_capacity(12 + 4 * positions.len());
    out.extend_from_slice(&revision.to_le_bytes());
    out.extend_from_slice(&((positions.len() / 3) as u32).to_le_bytes());
    for x in positions {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_frame(bytes: &[u8]) -> Result<(u64, Vec<f32>), String> {
    if bytes.len() < 12 {
        return Err(format!("frame of {} bytes is shorter than its header", bytes.len()));
    }
    let revision = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != 12 * count {
        return Err(format!("frame announces {count} vertices but carries {} bytes", body.len()));
    }
    let positions = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((revision, positions))
}

/// SHA-256 over the little-endian `u32` triangle indices.
pub fn connectivity_hash(triangles: &[[u32; 3]]) -> String {
    let mut h = Sha256::new();
    for t in triangles {
        for i in t {
            h.update(i.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edit_messages_round_trip() {
        let msgs = [
            ProtocolMessage::SetGlobal {
                param: GlobalParam::LambdaD,
                value: 1.6,
            },
            ProtocolMessage::SetEdgeWeight {
                regions: [3, 7],
                scale: 2.0,
            },
            ProtocolMessage::SetEdgeSmoothing {
                regions: [0, 2],
                smoothing: 1.5,
            },
            ProtocolMessage::SetFacePlanarization { region: 4, mu: 1.0 },
            ProtocolMessage::ToggleLanteri { enabled: false },
            ProtocolMessage::RequestExport {
                path: "out.obj".into(),
                revision: None,
            },
        ];
        for m in msgs {
            assert!(m.is_edit() || matches!(m, ProtocolMessage::RequestExport { .. }));
            assert_eq!(ProtocolMessage::from_json(&m.to_json()).unwrap(), m);
        }
    }

    #[test]
    fn wire_shape_is_flat_and_tagged() {
        let m = ProtocolMessage::SetGlobal {
            param: GlobalParam::LambdaD,
            value: 1.0,
        };
        assert_eq!(m.to_json(), r#"{"kind":"set_global","param":"lambda_d","value":1.0}"#);
        let f = ProtocolMessage::MeshFrame(FrameHeader {
            revision: 3,
            vertex_count: 10,
            connectivity_hash: "ab".into(),
            converged: true,
            triangles: None,
        });
        let v: serde_json::Value = serde_json::from_str(&f.to_json()).unwrap();
        assert_eq!(v["kind"], "mesh_frame");
        assert_eq!(v["revision"], 3);
        assert!(v.get("triangles").is_none());
    }

    #[test]
    fn unknown_kinds_and_fields_are_rejected() {
        assert!(ProtocolMessage::from_json(r#"{"kind":"explode"}"#).is_err());
        assert!(ProtocolMessage::from_json(r#"{"kind":"toggle_lanteri","enabled":true,"extra":1}"#).is_err());
        assert!(ProtocolMessage::from_json(r#"{"kind":"set_global","param":"lambda_q","value":1}"#).is_err());
        assert!(ProtocolMessage::from_json("not json").is_err());
    }

    #[test]
    fn frame_layout() {
        let bytes = encode_frame(7, &[1.0, 2.0, 3.0, -4.5, 0.0, 6.25]);
        assert_eq!(bytes.len(), 12 + 24);
        assert_eq!(&bytes[..8], &7u64.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1.0f32.to_le_bytes());
        assert_eq!(decode_frame(&bytes).unwrap(), (7, vec![1.0, 2.0, 3.0, -4.5, 0.0, 6.25]));
        assert!(decode_frame(&bytes[..20]).is_err());
        assert!(decode_frame(&bytes[..5]).is_err());
    }

    #[test]
    fn thirty_thousand_vertices_fit_in_about_360_kb() {
        let bytes = encode_frame(1, &vec![0.0; 3 * 30_000]);
        assert_eq!(bytes.len(), 360_000 + 12);
    }

    #[test]
    fn connectivity_hash_depends_on_order() {
        let a = connectivity_hash(&[[0, 1, 2], [2, 1, 3]]);
        assert_eq!(a.len(), 64);
        assert_eq!(a, connectivity_hash(&[[0, 1, 2], [2, 1, 3]]));
        assert_ne!(a, connectivity_hash(&[[2, 1, 3], [0, 1, 2]]));
    }

    proptest::proptest! {
        #[test]
        fn frames_round_trip(revision in proptest::prelude::any::<u64>(), xs in proptest::collection::vec(-1e6f32..1e6, 0..60)) {
            let n = xs.len() / 3 * 3;
            let bytes = encode_frame(revision, &xs[..n]);
            proptest::prop_assert_eq!(bytes.len(), 12 + 4 * n);
            proptest::prop_assert_eq!(decode_frame(&bytes).unwrap(), (revision, xs[..n].to_vec()));
        }
    }
}
