//! JSON forms of meshes and vertex fields.

use super::build::radial_from_points;
use super::domain::{BoundaryCurvature, DiscreteDomain, VertexOrigin};
use super::{GeometryError, ScalarField, Space};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// On-disk mesh. Field order is part of the format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshFile {
    pub space: Space,
    pub n: usize,
    pub dimension: usize,
    pub vertices: Vec<Vec<f64>>,
    pub cells: Vec<Vec<usize>>,
    pub boundary: Vec<usize>,
    pub h: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScalarFieldFile {
    pub domain_hash: String,
    pub values: Vec<f64>,
}

impl MeshFile {
    pub fn from_domain(d: &DiscreteDomain) -> Self {
        MeshFile {
            space: d.space,
            n: d.n(),
            dimension: d.dimension,
            vertices: d.vertices.clone(),
            cells: d.cells.clone(),
            boundary: d.boundary.clone(),
            h: d.h,
        }
    }

    pub fn into_domain(self) -> Result<DiscreteDomain, GeometryError> {
        if self.n != self.space.dim() {
            return Err(GeometryError::MalformedMesh(format!(
                "n = {} but the space has dimension {}",
                self.n,
                self.space.dim()
            )));
        }
        let nv = self.vertices.len();
        let d = match self.dimension {
            1 => radial_from_points(self.space, self.vertices.iter().map(|v| v[0]).collect(), vec![])?,
            2 => DiscreteDomain::new(
                self.space,
                2,
                self.vertices,
                self.cells,
                BoundaryCurvature::Discrete,
                vec![VertexOrigin::New; nv],
            )?,
            k => return Err(GeometryError::MalformedMesh(format!("dimension {k}"))),
        };
        if d.boundary != self.boundary {
            return Err(GeometryError::MalformedMesh("boundary list does not match cells".into()));
        }
        Ok(d)
    }
}

impl DiscreteDomain {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&MeshFile::from_domain(self)).expect("mesh serializes")
    }

    /// SHA-256 of the canonical mesh JSON.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn from_json(s: &str) -> Result<Self, GeometryError> {
        let m: MeshFile =
            serde_json::from_str(s).map_err(|e| GeometryError::MalformedMesh(e.to_string()))?;
        m.into_domain()
    }
}

impl ScalarField {
    pub fn to_file(&self, domain: &DiscreteDomain) -> ScalarFieldFile {
        ScalarFieldFile { domain_hash: domain.hash(), values: self.values.clone() }
    }

    pub fn from_file(f: ScalarFieldFile, domain: &DiscreteDomain) -> Result<Self, GeometryError> {
        if f.domain_hash != domain.hash() {
            return Err(GeometryError::MalformedMesh("field belongs to a different mesh".into()));
        }
        let s = ScalarField::new(f.values);
        s.check(domain)?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, build_radial_domain, Region};

    #[test]
    fn field_order_is_fixed() {
        let d = build_radial_domain(Space::Euclidean { n: 3 }, 1.0, 16).unwrap();
        let s = d.to_json();
        let keys = ["\"space\"", "\"n\"", "\"dimension\"", "\"vertices\"", "\"cells\"", "\"boundary\"", "\"h\""];
        let pos: Vec<usize> = keys.iter().map(|k| s.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mesh_round_trip_preserves_hash() {
        let d = build_domain(Space::Hyperbolic { n: 2 }, &Region::ball(1.0), 0.2).unwrap();
        let e = DiscreteDomain::from_json(&d.to_json()).unwrap();
        assert_eq!(d.hash(), e.hash());
        assert_eq!(d.mass, e.mass);
    }

    #[test]
    fn field_hash_must_match() {
        let d = build_radial_domain(Space::Euclidean { n: 2 }, 1.0, 16).unwrap();
        let e = build_radial_domain(Space::Euclidean { n: 2 }, 1.0, 17).unwrap();
        let f = ScalarField::constant(16, 1.0).to_file(&d);
        assert!(ScalarField::from_file(f.clone(), &d).is_ok());
        assert!(ScalarField::from_file(f, &e).is_err());
    }
}
