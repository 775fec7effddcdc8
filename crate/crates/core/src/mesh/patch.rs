use super::{FacetKind, Mesh};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatchKind {
    Interior,
    DirichletDirichlet,
    NeumannNeumann,
    /// Exactly one terminal facet is Neumann; `neumann_first` says which.
    Mixed { neumann_first: bool },
}

/// Elements around a vertex in counter-clockwise order.
///
/// `facets[i]` and `facets[i + 1]` are the two edges of `elements[i]`
/// through the vertex. Interior patches list `T` facets and close
/// cyclically; boundary patches list `T + 1` facets whose first and last
/// entries lie on the boundary. Interior patches start at the lowest
/// element id, boundary patches at the element owning the first boundary
/// edge met in counter-clockwise order.
#[derive(Clone, Debug)]
pub struct StarPatch {
    pub vertex: usize,
    pub elements: Vec<usize>,
    pub facets: Vec<usize>,
    pub kind: PatchKind,
    /// `signs[i]` orients `facets[i]` so that `x_i - x_{i+1}` is the
    /// outflow through the two patch edges of `elements[i]`.
    pub signs: Vec<f64>,
}

impl StarPatch {
    pub fn is_interior(&self) -> bool {
        self.kind == PatchKind::Interior
    }

    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }
}

pub(super) fn build_patches(mesh: &Mesh) -> Result<Vec<StarPatch>> {
    let nv = mesh.n_vertices();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (k, t) in mesh.triangles.iter().enumerate() {
        for &z in t {
            incident[z].push(k);
        }
    }
    (0..nv).map(|z| build_patch(mesh, z, &incident[z])).collect()
}

fn local_index(mesh: &Mesh, k: usize, z: usize) -> usize {
    mesh.triangles[k].iter().position(|&v| v == z).unwrap()
}

// In element k with z at local i, the entry edge (z, v_{i+1}) is local
// facet i+2 and the exit edge (z, v_{i+2}) is local facet i+1.
fn entry(mesh: &Mesh, k: usize, z: usize) -> usize {
    mesh.element_facets[k][(local_index(mesh, k, z) + 2) % 3]
}

fn exit(mesh: &Mesh, k: usize, z: usize) -> usize {
    mesh.element_facets[k][(local_index(mesh, k, z) + 1) % 3]
}

fn build_patch(mesh: &Mesh, z: usize, incident: &[usize]) -> Result<StarPatch> {
    let starts: Vec<usize> = incident
        .iter()
        .copied()
        .filter(|&k| mesh.facets[entry(mesh, k, z)].is_boundary())
        .collect();
    let (first, boundary) = match starts.len() {
        0 => (*incident.iter().min().unwrap(), false),
        1 => (starts[0], true),
        _ => return Err(Error::InvalidMesh(format!("vertex {z} is not a manifold vertex"))),
    };
    let mut elements = vec![first];
    let mut facets = vec![entry(mesh, first, z)];
    let mut k = first;
    loop {
        let f = exit(mesh, k, z);
        let fr = &mesh.facets[f];
        let next = match fr.plus {
            None => {
                facets.push(f);
                break;
            }
            Some(p) => {
                if fr.minus == k {
                    p
                } else {
                    fr.minus
                }
            }
        };
        if next == first {
            break;
        }
        facets.push(f);
        elements.push(next);
        k = next;
        if elements.len() > incident.len() {
            break;
        }
    }
    if elements.len() != incident.len() {
        return Err(Error::InvalidMesh(format!("vertex {z} is not a manifold vertex")));
    }
    let kind = if !boundary {
        PatchKind::Interior
    } else {
        let a = mesh.facets[facets[0]].kind;
        let b = mesh.facets[*facets.last().unwrap()].kind;
        match (a == FacetKind::Neumann, b == FacetKind::Neumann) {
            (false, false) => PatchKind::DirichletDirichlet,
            (true, true) => PatchKind::NeumannNeumann,
            (n, _) => PatchKind::Mixed { neumann_first: n },
        }
    };
    let t = elements.len();
    let mut signs: Vec<f64> = (0..t)
        .map(|i| {
            let k = elements[i];
            mesh.sign(k, mesh.local_facet(k, facets[i]).unwrap())
        })
        .collect();
    if boundary {
        let k = elements[t - 1];
        signs.push(-mesh.sign(k, mesh.local_facet(k, facets[t]).unwrap()));
    }
    Ok(StarPatch {
        vertex: z,
        elements,
        facets,
        kind,
        signs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{structured_square, BoundaryTag, Diagonal};

    #[test]
    fn patches_are_ccw_and_consistent() {
        let m = structured_square(4, Diagonal::Right, |p| {
            if p.x < 1e-12 {
                BoundaryTag::Neumann
            } else {
                BoundaryTag::Dirichlet
            }
        })
        .unwrap();
        for p in m.patches() {
            let t = p.elements.len();
            let e = if p.is_interior() { t } else { t + 1 };
            assert_eq!(p.facets.len(), e);
            assert_eq!(p.signs.len(), e);
            for i in 0..t {
                let k = p.elements[i];
                let fs = m.element_facets(k);
                assert!(fs.contains(&p.facets[i]));
                assert!(fs.contains(&p.facets[(i + 1) % e]));
            }
            if p.is_interior() {
                assert_eq!(p.elements[0], *p.elements.iter().min().unwrap());
            }
        }
        let corner = m
            .patches()
            .iter()
            .find(|p| m.vertex(p.vertex).norm() < 1e-12)
            .unwrap();
        assert!(matches!(corner.kind, PatchKind::Mixed { .. }));
        let top_left = m
            .patches()
            .iter()
            .find(|p| (m.vertex(p.vertex).y - 0.5).abs() < 1e-12 && m.vertex(p.vertex).x < 1e-12)
            .unwrap();
        assert_eq!(top_left.kind, PatchKind::NeumannNeumann);
    }
}
