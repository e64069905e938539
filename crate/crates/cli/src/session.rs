//! Saved stylization sessions.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use planehead_core::abstraction::AbstractedMesh;
use planehead_core::engine::Engine;
use planehead_core::io::{load_mesh, read_json, write_json};
use planehead_core::mesh::{Mesh, RegionLabeling};
use planehead_core::metrics::{build_lanteri_constraints, LandmarkSet, LanteriConstraint};
use planehead_core::stylize::StyleParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionFile {
    pub mesh: PathBuf,
    pub mesh_sha256: String,
    pub labels: RegionLabeling,
    pub abstracted: AbstractedMesh,
    pub params: StyleParams,
    pub constraints: Vec<LanteriConstraint>,
    pub landmarks: LandmarkSet,
    pub pyramid_levels: usize,
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl SessionFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self).with_context(|| format!("cannot write session {}", path.display()))
    }

    /// Reads a session and the mesh it refers to. `mesh` replaces the stored
    /// path; either way the file must still hash to the stored digest.
    pub fn load(path: &Path, mesh: Option<&Path>) -> Result<(SessionFile, Mesh)> {
        let mut s: SessionFile = read_json(path).with_context(|| format!("cannot read session {}", path.display()))?;
        if let Some(m) = mesh {
            s.mesh = m.to_path_buf();
        } else if s.mesh.is_relative() {
            if let Some(dir) = path.parent() {
                let beside = dir.join(&s.mesh);
                if beside.exists() {
                    s.mesh = beside;
                }
            }
        }
        let digest = file_sha256(&s.mesh)?;
        if digest != s.mesh_sha256 {
            bail!(
                "{} has changed since the session was saved (sha256 {digest}, expected {})",
                s.mesh.display(),
                s.mesh_sha256
            );
        }
        if build_lanteri_constraints(&s.landmarks) != s.constraints {
            bail!("session constraints do not match its landmarks");
        }
        let m = load_mesh(&s.mesh)?;
        Ok((s, m))
    }

    pub fn engine(&self, mesh: Mesh) -> Result<Engine> {
        Ok(Engine::with_abstraction(
            mesh,
            self.labels.clone(),
            self.abstracted.clone(),
            self.landmarks.clone(),
            self.pyramid_levels,
        )?)
    }
}
