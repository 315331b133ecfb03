//! Complex files (JSON) and CSV / OBJ exporters.
//!
//! Floats are written in the shortest decimal form that parses back to the
//! same bits, so a write/read cycle is lossless.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gluing::{Reparameterization, SmoothnessReport};
use crate::patch::{EdgeId, TensorPatch};
use crate::space::{GSmoothSpace, InteriorEdge, PatchComplex};

pub const FORMAT_TAG: &str = "gkiso-complex";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub patch_a: usize,
    pub edge_a: String,
    pub patch_b: usize,
    pub edge_b: String,
    pub shear_coeffs: Vec<f64>,
    pub normal_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceRecord {
    pub k: usize,
    /// One entry per basis vector, each of length `n·(p+1)(q+1)`.
    pub basis: Vec<Vec<f64>>,
    pub constraint_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldRecord {
    pub name: String,
    pub coeffs: Vec<f64>,
}

/// On-disk form of a patch complex with its space, geometry and fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexFile {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub bidegree: [usize; 2],
    /// Geometry control nets, row-major, one `[x, y]` per control point.
    pub patches: Vec<Vec<Vec<f64>>>,
    pub edges: Vec<EdgeRecord>,
    pub boundary_edges: Vec<(usize, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry_coeffs: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceRecord>,
    #[serde(default)]
    pub fields: Vec<FieldRecord>,
}

fn parse_edge(s: &str) -> Result<EdgeId> {
    EdgeId::parse(s).ok_or_else(|| Error::Format(format!("unknown edge name {s:?}")))
}

impl ComplexFile {
    pub fn from_space(space: &GSmoothSpace, fields: Vec<FieldRecord>) -> Self {
        let c = &space.complex;
        let patches = c
            .geometry
            .as_ref()
            .map(|g| {
                g.iter()
                    .map(|p| p.control().chunks(p.out_dim()).map(<[f64]>::to_vec).collect())
                    .collect()
            })
            .unwrap_or_default();
        ComplexFile {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            n: c.n,
            bidegree: [c.bidegree.0, c.bidegree.1],
            patches,
            edges: c
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    patch_a: e.patch_a,
                    edge_a: e.edge_a.name().into(),
                    patch_b: e.patch_b,
                    edge_b: e.edge_b.name().into(),
                    shear_coeffs: e.rho.shear_coeffs.clone(),
                    normal_scale: e.rho.normal_scale,
                })
                .collect(),
            boundary_edges: c.boundary_edges.iter().map(|(p, e)| (*p, e.name().to_string())).collect(),
            geometry_coeffs: c.geometry_coeffs.clone(),
            space: Some(SpaceRecord {
                k: space.k,
                basis: space.basis.column_iter().map(|col| col.iter().copied().collect()).collect(),
                constraint_residual: space.constraint_residual,
            }),
            fields,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let head: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        match head.get("format").and_then(|v| v.as_str()) {
            Some(FORMAT_TAG) => {}
            other => return Err(Error::Format(format!("not a complex file (format tag {other:?})"))),
        }
        match head.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            other => return Err(Error::Format(format!("unsupported version {other:?}"))),
        }
        serde_json::from_value(head).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn field(&self, name: &str) -> Option<&FieldRecord> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Rebuilds the complex. Geometry is taken from the stored control nets,
    /// not recomputed, so edits to the file are seen by checks.
    pub fn to_complex(&self) -> Result<PatchComplex> {
        let (p, q) = (self.bidegree[0], self.bidegree[1]);
        if self.n < 3 {
            return Err(Error::Format(format!("n = {} < 3", self.n)));
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for r in &self.edges {
            if r.patch_a >= self.n || r.patch_b >= self.n {
                return Err(Error::Format("edge refers to a missing patch".into()));
            }
            let (ea, eb) = (parse_edge(&r.edge_a)?, parse_edge(&r.edge_b)?);
            edges.push(InteriorEdge {
                patch_a: r.patch_a,
                edge_a: ea,
                patch_b: r.patch_b,
                edge_b: eb,
                rho: Reparameterization::new(ea, eb, r.shear_coeffs.clone(), r.normal_scale)?,
            });
        }
        let boundary_edges = self
            .boundary_edges
            .iter()
            .map(|(pi, e)| {
                if *pi >= self.n {
                    return Err(Error::Format("boundary edge refers to a missing patch".into()));
                }
                Ok((*pi, parse_edge(e)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let geometry = if self.patches.is_empty() {
            None
        } else {
            if self.patches.len() != self.n {
                return Err(Error::Format(format!("{} control nets for {} patches", self.patches.len(), self.n)));
            }
            let nets = self
                .patches
                .iter()
                .map(|net| {
                    if net.len() != (p + 1) * (q + 1) || net.iter().any(|pt| pt.len() != 2) {
                        return Err(Error::Format("control net has wrong shape".into()));
                    }
                    TensorPatch::new(p, q, 2, net.iter().flatten().copied().collect())
                })
                .collect::<Result<Vec<_>>>()?;
            Some(nets)
        };
        Ok(PatchComplex {
            n: self.n,
            bidegree: (p, q),
            edges,
            boundary_edges,
            geometry_coeffs: self.geometry_coeffs.clone(),
            geometry,
        })
    }

    pub fn to_space(&self) -> Result<GSmoothSpace> {
        let complex = self.to_complex()?;
        let rec = self.space.as_ref().ok_or_else(|| Error::Format("file has no space section".into()))?;
        let ndof = complex.dof_count();
        if rec.basis.is_empty() || rec.basis.iter().any(|b| b.len() != ndof) {
            return Err(Error::Format(format!("basis vectors must have length {ndof}")));
        }
        let basis = DMatrix::from_fn(ndof, rec.basis.len(), |r, c| rec.basis[c][r]);
        for f in &self.fields {
            if f.coeffs.len() != rec.basis.len() {
                return Err(Error::Format(format!("field {:?} has wrong coefficient count", f.name)));
            }
        }
        Ok(GSmoothSpace {
            complex,
            k: rec.k,
            basis,
            constraint_residual: rec.constraint_residual,
            singular_values: Vec::new(),
        })
    }
}

fn grid(resolution: usize) -> Result<Vec<f64>> {
    if resolution < 2 {
        return Err(Error::Contract("resolution must be at least 2".into()));
    }
    Ok((0..resolution).map(|i| i as f64 / (resolution - 1) as f64).collect())
}

/// `patch,u,v,x,y` rows on a `res × res` grid per patch.
pub fn surface_csv(geometry: &[TensorPatch], resolution: usize) -> Result<String> {
    let ts = grid(resolution)?;
    let mut out = String::from("patch,u,v,x,y\n");
    for (pi, g) in geometry.iter().enumerate() {
        for &u in &ts {
            for &v in &ts {
                let x = g.eval([u, v])?;
                writeln!(out, "{pi},{u},{v},{},{}", x[0], x[1]).expect("string write");
            }
        }
    }
    Ok(out)
}

/// `patch,x,y,value` rows on a `res × res` grid per patch.
pub fn field_csv(geometry: &[TensorPatch], field: &[TensorPatch], resolution: usize) -> Result<String> {
    let ts = grid(resolution)?;
    let mut out = String::from("patch,x,y,value\n");
    for (pi, (g, f)) in geometry.iter().zip(field).enumerate() {
        for &u in &ts {
            for &v in &ts {
                let x = g.eval([u, v])?;
                let val = f.eval([u, v])?[0];
                writeln!(out, "{pi},{},{},{val}", x[0], x[1]).expect("string write");
            }
        }
    }
    Ok(out)
}

/// Sampled patch images as an OBJ quad mesh. Planar geometry gets `z = 0`
/// unless `heights` supplies a scalar field. Faces follow increasing `u`
/// then `v`, which is counterclockwise for positively oriented patches.
pub fn surface_obj(geometry: &[TensorPatch], heights: Option<&[TensorPatch]>, resolution: usize) -> Result<String> {
    let ts = grid(resolution)?;
    let mut out = String::new();
    let mut base = 1;
    for (pi, g) in geometry.iter().enumerate() {
        writeln!(out, "o patch{pi}").expect("string write");
        for &u in &ts {
            for &v in &ts {
                let x = g.eval([u, v])?;
                let z = match heights {
                    Some(h) => h[pi].eval([u, v])?[0],
                    None => x.get(2).copied().unwrap_or(0.0),
                };
                writeln!(out, "v {} {} {z}", x[0], x[1]).expect("string write");
            }
        }
        let idx = |i: usize, j: usize| base + i * resolution + j;
        for i in 0..resolution - 1 {
            for j in 0..resolution - 1 {
                writeln!(out, "f {} {} {} {}", idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1))
                    .expect("string write");
            }
        }
        base += resolution * resolution;
    }
    Ok(out)
}

/// Concatenated per-edge reports: `check,edge,s,mismatch`.
pub fn reports_csv(reports: &[(String, usize, SmoothnessReport)]) -> String {
    let mut out = String::from("check,edge,s,mismatch\n");
    for (name, edge, rep) in reports {
        for (s, m) in rep.sample_params.iter().zip(&rep.per_sample_mismatch) {
            writeln!(out, "{name},{edge},{s},{m:e}").expect("string write");
        }
    }
    out
}
