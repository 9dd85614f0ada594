//! Small meshes shared by unit tests.

use crate::assembly::InfluenceMatrices;
use crate::mesh::{build_mesh, pair_contacts, BoundaryMesh, EdgeSpec, ElementTag, Material, Side};

pub fn rect(side: Side, x: [f64; 2], y: [f64; 2], tags: [ElementTag; 4], div: [usize; 4]) -> BoundaryMesh {
    let p = [[x[0], y[0]], [x[1], y[0]], [x[1], y[1]], [x[0], y[1]]];
    let edges: Vec<EdgeSpec> = (0..4).map(|i| EdgeSpec::uniform(tags[i], div[i])).collect();
    build_mesh(side, &p, &edges).unwrap()
}

/// A on top of B, meeting along y = 0 over `n` contact elements; both are
/// clamped on the face opposite the contact.
pub fn clamped_blocks(n: usize) -> InfluenceMatrices {
    use ElementTag as T;
    let a = rect(Side::A, [0.0, 1.0], [0.0, 0.8], [T::C, T::N, T::D, T::N], [n, 2, 2, 2]);
    let b = rect(Side::B, [0.0, 1.0], [-1.0, 0.0], [T::D, T::N, T::C, T::N], [2, 2, n, 2]);
    let pair = pair_contacts(&a, &b).unwrap();
    let mats = vec![Material::new(100.0, 0.3, 0.0).unwrap(), Material::new(300.0, 0.25, 0.0).unwrap()];
    InfluenceMatrices::assemble(vec![a, b], mats, Some(pair)).unwrap()
}
