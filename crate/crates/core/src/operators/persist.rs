//! On-disk operator layout: a directory holding `manifest.json`, `psi.nrm`,
//! an optional `psi2.nrm`, and one `frame_NNNNN.nrm` per frame of `W`
//! (the `m × p2` matrix `W_i`, or the `m × 1` probe `w_i` for the rank-one
//! kind).

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{NestedOperator, RankOperator, RankOperatorKind, SensingMatrix};
use crate::error::{Error, Result};
use crate::matrix_io;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorManifest {
    pub kind: RankOperatorKind,
    pub p1: usize,
    pub p2: usize,
    pub m: usize,
    pub n: usize,
    pub seed: Option<u64>,
    pub psi_variance_scale: f64,
    pub psi2_variance_scale: Option<f64>,
    pub frames: Vec<String>,
}

fn frame_name(i: usize) -> String {
    format!("frame_{i:05}.nrm")
}

pub fn save_operator(dir: impl AsRef<Path>, op: &NestedOperator, seed: Option<u64>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let (p1, p2) = op.input_shape();
    matrix_io::save(dir.join("psi.nrm"), &op.psi.data)?;
    if let Some(p) = &op.psi2 {
        matrix_io::save(dir.join("psi2.nrm"), &p.data)?;
    }
    let mut frames = Vec::with_capacity(op.len());
    for i in 0..op.len() {
        let name = frame_name(i);
        let frame = match op.w.kind() {
            RankOperatorKind::GaussianDense => op.w.frame(i),
            RankOperatorKind::RankOneQuadratic => {
                let row = op.w.raw_frames().row(i);
                DMatrix::from_iterator(row.len(), 1, row.iter().copied())
            }
        };
        matrix_io::save(dir.join(&name), &frame)?;
        frames.push(name);
    }
    let manifest = OperatorManifest {
        kind: op.w.kind(),
        p1,
        p2,
        m: op.psi.rows(),
        n: op.len(),
        seed,
        psi_variance_scale: op.psi.variance_scale,
        psi2_variance_scale: op.psi2.as_ref().map(|p| p.variance_scale),
        frames,
    };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_operator(dir: impl AsRef<Path>) -> Result<(NestedOperator, OperatorManifest)> {
    let dir = dir.as_ref();
    let manifest: OperatorManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?;
    if manifest.frames.len() != manifest.n {
        return Err(Error::Config(format!(
            "manifest lists {} frames but n = {}",
            manifest.frames.len(),
            manifest.n
        )));
    }
    let psi = SensingMatrix::from_matrix(matrix_io::load(dir.join("psi.nrm"))?, manifest.psi_variance_scale)?;
    let frames: Vec<DMatrix<f64>> = manifest
        .frames
        .iter()
        .map(|f| matrix_io::load(dir.join(f)))
        .collect::<Result<_>>()?;
    let w = match manifest.kind {
        RankOperatorKind::GaussianDense => RankOperator::from_frames(&frames)?,
        RankOperatorKind::RankOneQuadratic => {
            let m = frames[0].nrows();
            let mut probes = DMatrix::zeros(frames.len(), m);
            for (i, f) in frames.iter().enumerate() {
                if f.shape() != (m, 1) {
                    return Err(Error::Config(format!("probe {i} is not an {m}x1 vector")));
                }
                probes.row_mut(i).copy_from(&f.column(0).transpose());
            }
            RankOperator::rank_one(probes)?
        }
    };
    let op = match manifest.psi2_variance_scale {
        Some(scale) => {
            let psi2 = SensingMatrix::from_matrix(matrix_io::load(dir.join("psi2.nrm"))?, scale)?;
            NestedOperator::doubly_sparse(psi, w, psi2)?
        }
        None => NestedOperator::new(psi, w)?,
    };
    if op.input_shape() != (manifest.p1, manifest.p2) || op.psi.rows() != manifest.m {
        return Err(Error::Config("manifest dims disagree with stored matrices".into()));
    }
    Ok((op, manifest))
}
