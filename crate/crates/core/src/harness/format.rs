//! `ITFC1` feature files.
//!
//! Layout: the 5 magic bytes `ITFC1`, four little-endian `u32` (version, N,
//! d, flags), then `N·d` little-endian `f64` row-major. Metadata lives in a
//! JSON sidecar at `<path>.json`.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coding::{GlobalFeature, LayoutSegment, Method};
use crate::error::{Error, Result};
use crate::group::{GroupName, GroupTable};
use crate::harness::synthetic::{template_representation, DescriptorTemplate};
use crate::modeling::{BasisState, LocalFeatureSet, ProjectionKind, ProjectionMap};
use crate::representation::{regular_representation, Representation};

pub const MAGIC: &[u8; 5] = b"ITFC1";
pub const VERSION: u32 = 1;
pub const FLAG_ADAPTED: u32 = 1;
pub const FLAG_GLOBAL: u32 = 1 << 1;
const HEADER_LEN: usize = 5 + 4 * 4;

/// Raw contents of a feature file.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub version: u32,
    pub rows: usize,
    pub dim: usize,
    pub flags: u32,
    pub data: Vec<f64>,
}

pub fn encode_matrix(m: &FeatureMatrix) -> Result<Vec<u8>> {
    if m.data.len() != m.rows * m.dim {
        return Err(Error::Format(format!(
            "{} values for {}×{}",
            m.data.len(),
            m.rows,
            m.dim
        )));
    }
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} exceeds u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.data.len());
    out.extend_from_slice(MAGIC);
    for v in [
        m.version,
        to_u32(m.rows, "N")?,
        to_u32(m.dim, "d")?,
        m.flags,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for x in &m.data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < HEADER_LEN || &bytes[..5] != MAGIC {
        return Err(Error::Format("missing ITFC1 header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[5 + 4 * i..9 + 4 * i].try_into().unwrap());
    let (version, rows, dim, flags) = (word(0), word(1) as usize, word(2) as usize, word(3));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format("header sizes overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(Error::Format(format!(
            "body has {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(FeatureMatrix {
        version,
        rows,
        dim,
        flags,
        data,
    })
}

pub fn write_matrix(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let bytes = encode_matrix(m)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

fn with_path(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    }
}

pub fn read_matrix(path: &Path) -> Result<FeatureMatrix> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(with_path(path))?;
    decode_matrix(&bytes)
}

/// How to rebuild the representation a file's rows live in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RepresentationSpec {
    Template {
        group: GroupName,
        template: DescriptorTemplate,
    },
    /// Block-diagonal sum of the named irreps, in order.
    Blocks {
        group: GroupName,
        irreps: Vec<String>,
    },
    /// Identity action of the trivial group.
    Identity {
        dim: usize,
    },
    Regular {
        group: GroupName,
    },
}

impl RepresentationSpec {
    pub fn build(&self) -> Result<Arc<Representation>> {
        let rep = match self {
            RepresentationSpec::Template { group, template } => {
                let (g, _) = group.build();
                template_representation(Arc::new(g), *group, template)?
            }
            RepresentationSpec::Blocks {
                group,
                irreps: labels,
            } => {
                let (g, irreps) = group.build();
                let parts = labels
                    .iter()
                    .map(|l| {
                        irreps
                            .iter()
                            .find(|i| &i.label == l)
                            .ok_or_else(|| Error::Format(format!("{group} has no irrep {l}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Representation::block_diagonal(Arc::new(g), &parts)?
            }
            RepresentationSpec::Identity { dim } => {
                Representation::identity(Arc::new(GroupTable::trivial()), *dim)
            }
            RepresentationSpec::Regular { group } => {
                regular_representation(Arc::new(group.build().0))
            }
        };
        Ok(Arc::new(rep))
    }

    /// The output representation of a fitted projection.
    pub fn of_projection(group: GroupName, map: &ProjectionMap) -> Self {
        match map.kind {
            ProjectionKind::Standard => RepresentationSpec::Identity { dim: map.d_out() },
            ProjectionKind::Invariant => RepresentationSpec::Blocks {
                group,
                irreps: map
                    .retained_blocks
                    .iter()
                    .map(|b| b.label.clone())
                    .collect(),
            },
        }
    }

    pub fn group(&self) -> GroupName {
        match self {
            RepresentationSpec::Template { group, .. }
            | RepresentationSpec::Blocks { group, .. }
            | RepresentationSpec::Regular { group } => *group,
            RepresentationSpec::Identity { .. } => GroupName::Trivial,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileKind {
    Local,
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub kind: FileKind,
    pub rep: RepresentationSpec,
    pub basis_state: BasisState,
    #[serde(default)]
    pub labels: Option<Vec<usize>>,
    /// Sample boundaries for local files.
    #[serde(default)]
    pub grouping: Option<Vec<usize>>,
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub layout: Option<Vec<LayoutSegment>>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_sidecar(path: &Path, sidecar: &Sidecar) -> Result<()> {
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(sidecar)?)?;
    Ok(())
}

fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let side = sidecar_path(path);
    let bytes = fs::read(&side).map_err(with_path(&side))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("sidecar: {e}")))
}

fn check_flags(flags: u32, sidecar: &Sidecar) -> Result<()> {
    let global = flags & FLAG_GLOBAL != 0;
    let adapted = flags & FLAG_ADAPTED != 0;
    if global != (sidecar.kind == FileKind::Global)
        || adapted != (sidecar.basis_state == BasisState::Adapted)
    {
        return Err(Error::Format(
            "header flags disagree with the sidecar".into(),
        ));
    }
    Ok(())
}

/// Local descriptors, read back with their representation and labels.
#[derive(Clone, Debug)]
pub struct LocalFile {
    pub features: LocalFeatureSet,
    pub spec: RepresentationSpec,
    pub labels: Option<Vec<usize>>,
}

pub fn write_local(
    path: &Path,
    features: &LocalFeatureSet,
    spec: &RepresentationSpec,
    labels: Option<&[usize]>,
) -> Result<()> {
    let flags = if features.state() == BasisState::Adapted {
        FLAG_ADAPTED
    } else {
        0
    };
    write_matrix(
        path,
        &FeatureMatrix {
            version: VERSION,
            rows: features.len(),
            dim: features.dim(),
            flags,
            data: features.data().to_vec(),
        },
    )?;
    write_sidecar(
        path,
        &Sidecar {
            kind: FileKind::Local,
            rep: spec.clone(),
            basis_state: features.state(),
            labels: labels.map(<[usize]>::to_vec),
            grouping: features.grouping().map(<[usize]>::to_vec),
            method: None,
            layout: None,
        },
    )
}

pub fn read_local(path: &Path) -> Result<LocalFile> {
    let m = read_matrix(path)?;
    let sidecar = read_sidecar(path)?;
    if sidecar.kind != FileKind::Local {
        return Err(Error::Format(format!(
            "{} holds global features",
            path.display()
        )));
    }
    check_flags(m.flags, &sidecar)?;
    let rep = sidecar.rep.build()?;
    if rep.dim() != m.dim {
        return Err(Error::Format(format!(
            "rows have dim {}, representation {}",
            m.dim,
            rep.dim()
        )));
    }
    let mut features = LocalFeatureSet::new(rep, m.data, sidecar.basis_state)?;
    if let Some(g) = sidecar.grouping {
        features = features.with_grouping(g)?;
    }
    Ok(LocalFile {
        features,
        spec: sidecar.rep,
        labels: sidecar.labels,
    })
}

/// One global feature per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalFile {
    pub features: Vec<GlobalFeature>,
    pub labels: Option<Vec<usize>>,
}

pub fn write_global(
    path: &Path,
    features: &[GlobalFeature],
    labels: Option<&[usize]>,
) -> Result<()> {
    let first = features
        .first()
        .ok_or_else(|| Error::Format("no global features to write".into()))?;
    if features
        .iter()
        .any(|f| f.method != first.method || f.layout != first.layout)
    {
        return Err(Error::Format(
            "global features differ in method or layout".into(),
        ));
    }
    let dim = first.dim;
    write_matrix(
        path,
        &FeatureMatrix {
            version: VERSION,
            rows: features.len(),
            dim,
            flags: FLAG_GLOBAL,
            data: features
                .iter()
                .flat_map(|f| f.vector.iter().copied())
                .collect(),
        },
    )?;
    write_sidecar(
        path,
        &Sidecar {
            kind: FileKind::Global,
            rep: RepresentationSpec::Identity { dim },
            basis_state: BasisState::Raw,
            labels: labels.map(<[usize]>::to_vec),
            grouping: None,
            method: Some(first.method),
            layout: Some(first.layout.clone()),
        },
    )
}

pub fn read_global(path: &Path) -> Result<GlobalFile> {
    let m = read_matrix(path)?;
    let sidecar = read_sidecar(path)?;
    if sidecar.kind != FileKind::Global {
        return Err(Error::Format(format!(
            "{} holds local features",
            path.display()
        )));
    }
    check_flags(m.flags, &sidecar)?;
    let method = sidecar
        .method
        .ok_or_else(|| Error::Format("global sidecar lacks its method".into()))?;
    let layout = sidecar.layout.unwrap_or_default();
    let features = if m.dim == 0 {
        vec![]
    } else {
        m.data
            .chunks_exact(m.dim)
            .map(|row| GlobalFeature {
                vector: row.to_vec(),
                method,
                dim: m.dim,
                layout: layout.clone(),
            })
            .collect()
    };
    Ok(GlobalFile {
        features,
        labels: sidecar.labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_little_endian() {
        let m = FeatureMatrix {
            version: VERSION,
            rows: 2,
            dim: 1,
            flags: FLAG_GLOBAL,
            data: vec![1.0, -0.0],
        };
        let b = encode_matrix(&m).unwrap();
        assert_eq!(&b[..5], b"ITFC1");
        assert_eq!(&b[5..9], &[1, 0, 0, 0]);
        assert_eq!(&b[9..13], &[2, 0, 0, 0]);
        assert_eq!(&b[17..21], &[2, 0, 0, 0]);
        assert_eq!(&b[21..29], &1.0f64.to_le_bytes());
        assert_eq!(decode_matrix(&b).unwrap(), m);
    }

    #[test]
    fn truncated_or_foreign_bytes_are_rejected() {
        let m = FeatureMatrix {
            version: VERSION,
            rows: 1,
            dim: 2,
            flags: 0,
            data: vec![1.0, 2.0],
        };
        let b = encode_matrix(&m).unwrap();
        assert!(decode_matrix(&b[..b.len() - 1]).is_err());
        assert!(decode_matrix(b"ITFC2").is_err());
        let mut wrong = b.clone();
        wrong[5] = 9;
        assert!(decode_matrix(&wrong).is_err());
    }

    #[test]
    fn specs_rebuild_their_representations() {
        let spec = RepresentationSpec::Blocks {
            group: GroupName::D4,
            irreps: vec!["tau_2".into(), "tau_{1,1}".into()],
        };
        let rep = spec.build().unwrap();
        assert_eq!(rep.dim(), 3);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            serde_json::from_str::<RepresentationSpec>(&json).unwrap(),
            spec
        );
        assert!(RepresentationSpec::Blocks {
            group: GroupName::D4,
            irreps: vec!["tau_9".into()]
        }
        .build()
        .is_err());
        assert_eq!(
            RepresentationSpec::Regular {
                group: GroupName::D6
            }
            .build()
            .unwrap()
            .dim(),
            12
        );
    }
}
