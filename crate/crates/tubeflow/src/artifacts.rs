//! Artifact files of a run and the manifest that lists them.
//!
//! CSV files are comma separated with a header row; numbers are written in
//! scientific notation with 17 significant digits so that a rerun of the same
//! configuration reproduces them byte for byte.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;
use sha2::{Digest, Sha256};
use tubeflow_core::femcore::{Family, Field, Mesh};
use tubeflow_core::tubegraph::{BoundaryTag, Owner};

use crate::error::{HarnessError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const MESH_FORMAT: &str = "tubeflow-mesh 1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ArtifactEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug)]
pub struct Artifacts {
    root: PathBuf,
    entries: Mutex<Vec<ArtifactEntry>>,
}

pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

impl Artifacts {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| HarnessError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), entries: Mutex::new(Vec::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn put(&self, name: &str, bytes: Vec<u8>) -> Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
        std::fs::write(&path, &bytes).map_err(|e| HarnessError::io(&path, e))?;
        let digest = Sha256::digest(&bytes);
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        let mut entries = self.entries.lock().expect("artifact list poisoned");
        entries.retain(|e| e.path != name);
        entries.push(ArtifactEntry { path: name.to_string(), sha256, bytes: bytes.len() });
        Ok(path)
    }

    pub fn csv<I>(&self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row.iter().map(|v| fmt_num(*v)))?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::io(&self.root, e.into_error()))?;
        self.put(name, bytes)
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| HarnessError::Json { path: name.into(), source })?;
        bytes.push(b'\n');
        self.put(name, bytes)
    }

    pub fn text(&self, name: &str, contents: String) -> Result<PathBuf> {
        self.put(name, contents.into_bytes())
    }

    /// Scalar field as `x,y,<column>` at its nodes (P1: vertices, P2: P2
    /// nodes); vector fields as `x,y,<column>x,<column>y`.
    pub fn field(&self, name: &str, field: &Field, column: &str) -> Result<PathBuf> {
        let m = &field.mesh;
        match field.family {
            Family::P1 => self.csv(name, &["x", "y", column], m.vertices.iter().zip(&field.values).map(|(p, v)| vec![p.x, p.y, *v])),
            Family::P2 => {
                self.csv(name, &["x", "y", column], (0..m.n_p2()).map(|i| vec![m.p2_node(i).x, m.p2_node(i).y, field.values[i]]))
            }
            Family::P2Vector => {
                let n = m.n_p2();
                let (cx, cy) = (format!("{column}x"), format!("{column}y"));
                let rows = (0..n).map(|i| vec![m.p2_node(i).x, m.p2_node(i).y, field.values[i], field.values[n + i]]);
                self.csv(name, &["x", "y", &cx, &cy], rows)
            }
        }
    }

    pub fn mesh(&self, name: &str, mesh: &Mesh) -> Result<PathBuf> {
        self.text(name, mesh_text(mesh))
    }

    pub fn entries(&self) -> Vec<ArtifactEntry> {
        let mut e = self.entries.lock().expect("artifact list poisoned").clone();
        e.sort_by(|a, b| a.path.cmp(&b.path));
        e
    }

    /// Writes `manifest.json` listing every artifact with its hash, plus the
    /// run summary.
    pub fn finish<T: Serialize>(&self, summary: &T) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Manifest<'a, T> {
            format: &'static str,
            artifacts: Vec<ArtifactEntry>,
            summary: &'a T,
        }
        let manifest = Manifest { format: "tubeflow-manifest 1", artifacts: self.entries(), summary };
        let bytes = serde_json::to_vec_pretty(&manifest).map_err(|source| HarnessError::Json { path: MANIFEST.into(), source })?;
        let path = self.root.join(MANIFEST);
        std::fs::write(&path, bytes).map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }
}

pub fn tag_label(tag: BoundaryTag) -> String {
    match tag {
        BoundaryTag::LateralWall => "wall".into(),
        BoundaryTag::Port(n) => format!("port:{n}"),
        BoundaryTag::CutLine(c) => format!("cut:{c}"),
    }
}

/// Plain-text mesh:
///
/// ```text
/// tubeflow-mesh 1
/// vertices <n>
/// <x> <y>                      (n lines)
/// triangles <m>
/// <a> <b> <c> <region>         (counterclockwise; region edge:<i> or node:<i>)
/// boundary <k>
/// <a> <b> <tag>                (domain on the left; tag wall, port:<node> or cut:<id>)
/// ```
///
/// Indices are zero based graph indices; coordinates use 17 significant digits.
pub fn mesh_text(mesh: &Mesh) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "{MESH_FORMAT}");
    let _ = writeln!(s, "vertices {}", mesh.vertices.len());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{} {}", fmt_num(p.x), fmt_num(p.y));
    }
    let _ = writeln!(s, "triangles {}", mesh.triangles.len());
    for (t, r) in mesh.triangles.iter().zip(&mesh.regions) {
        let region = match r {
            Owner::Edge(e) => format!("edge:{e}"),
            Owner::Node(n) => format!("node:{n}"),
        };
        let _ = writeln!(s, "{} {} {} {region}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "boundary {}", mesh.boundary.len());
    for b in &mesh.boundary {
        let _ = writeln!(s, "{} {} {}", b.v[0], b.v[1], tag_label(b.tag));
    }
    s
}
