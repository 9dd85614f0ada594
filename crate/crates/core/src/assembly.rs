//! Assembly of the symmetric Galerkin system for one or two bodies.
//!
//! Each body contributes its four boundary operators on the full set of
//! traction (φ) and displacement (ψ) degrees of freedom. Unknowns are
//! ordered per body as `(p_D, v_N, p_C, v_C)`, test functions match the
//! unknowns one to one, and the contact pair is coupled through the
//! cross mass matrix between A's traction shapes and B's displacement shapes.

use crate::error::{Error, Result};
use crate::kernels::{pair_blocks, Shape};
use crate::linalg::{self, DenseLu};
use crate::mesh::{BoundaryMesh, ContactPair, Material, Part};
use crate::par;
use crate::quadrature::gauss_legendre;
use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DofClass {
    D,
    N,
    C,
}

impl From<Part> for DofClass {
    fn from(p: Part) -> Self {
        match p {
            Part::Dirichlet => DofClass::D,
            Part::Neumann => DofClass::N,
            Part::Contact => DofClass::C,
        }
    }
}

/// Degree-of-freedom bookkeeping of one body.
///
/// φ dof `2·i + k` is component `k` of traction node `i`; ψ dof `2·j + k`
/// is component `k` of mesh node `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDofs {
    pub traction_nodes: Vec<[usize; 2]>,
    pub num_phi_nodes: usize,
    pub phi_class: Vec<DofClass>,
    pub psi_class: Vec<DofClass>,
    /// Position of each traction node on the boundary.
    pub phi_node_pos: Vec<[f64; 2]>,
    pub p_d: Vec<usize>,
    pub v_n: Vec<usize>,
    pub p_c: Vec<usize>,
    pub v_c: Vec<usize>,
    /// Index of this body's first unknown in the global vector.
    pub offset: usize,
}

impl DomainDofs {
    fn new(mesh: &BoundaryMesh, contact_order: Option<&[usize]>, offset: usize) -> Self {
        let (traction_nodes, num_phi_nodes) = mesh.traction_nodes();
        let mut phi_class = vec![DofClass::N; 2 * num_phi_nodes];
        let mut phi_node_pos = vec![[0.0; 2]; num_phi_nodes];
        for (e, tn) in traction_nodes.iter().enumerate() {
            for a in 0..2 {
                phi_node_pos[tn[a]] = mesh.nodes[mesh.elements[e][a]];
                for k in 0..2 {
                    phi_class[2 * tn[a] + k] = mesh.tags[e].0[k].into();
                }
            }
        }
        let mut psi_class = vec![DofClass::N; 2 * mesh.num_nodes()];
        for (e, el) in mesh.elements.iter().enumerate() {
            for &node in el {
                for k in 0..2 {
                    let c = &mut psi_class[2 * node + k];
                    match mesh.tags[e].0[k] {
                        Part::Dirichlet => *c = DofClass::D,
                        Part::Contact if *c != DofClass::D => *c = DofClass::C,
                        _ => {}
                    }
                }
            }
        }
        let pick = |cls: &[DofClass], want| (0..cls.len()).filter(|&i| cls[i] == want).collect::<Vec<_>>();
        let p_d = pick(&phi_class, DofClass::D);
        let v_n = pick(&psi_class, DofClass::N);
        let p_c = pick(&phi_class, DofClass::C);
        let v_c = match contact_order {
            Some(nodes) => nodes.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect(),
            None => pick(&psi_class, DofClass::C),
        };
        DomainDofs { traction_nodes, num_phi_nodes, phi_class, psi_class, phi_node_pos, p_d, v_n, p_c, v_c, offset }
    }

    pub fn num_phi(&self) -> usize {
        2 * self.num_phi_nodes
    }

    pub fn num_psi(&self) -> usize {
        self.psi_class.len()
    }

    pub fn num_unknowns(&self) -> usize {
        self.p_d.len() + self.v_n.len() + self.p_c.len() + self.v_c.len()
    }

    /// Unknowns tied to φ dofs, in global order, with their dof index.
    fn phi_unknowns(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let o = self.offset;
        let n1 = self.p_d.len() + self.v_n.len();
        self.p_d
            .iter()
            .enumerate()
            .map(move |(i, &d)| (o + i, d))
            .chain(self.p_c.iter().enumerate().map(move |(i, &d)| (o + n1 + i, d)))
    }

    /// Unknowns tied to ψ dofs, in global order, with their dof index.
    fn psi_unknowns(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let o = self.offset + self.p_d.len();
        let o2 = self.offset + self.p_d.len() + self.v_n.len() + self.p_c.len();
        self.v_n
            .iter()
            .enumerate()
            .map(move |(i, &d)| (o + i, d))
            .chain(self.v_c.iter().enumerate().map(move |(i, &d)| (o2 + i, d)))
    }

    /// Global index of the first `p_C` unknown.
    pub fn p_c_offset(&self) -> usize {
        self.offset + self.p_d.len() + self.v_n.len()
    }

    pub fn v_c_offset(&self) -> usize {
        self.p_c_offset() + self.p_c.len()
    }
}

/// Unknown ordering of the whole system.
#[derive(Debug, Clone, PartialEq)]
pub struct DofLayout {
    pub domains: Vec<DomainDofs>,
    /// Master contact nodes; gap component `k` of contact node `c` is entry `2c + k`.
    pub contact_nodes: Vec<usize>,
    pub dim: usize,
}

impl DofLayout {
    pub fn num_gap(&self) -> usize {
        2 * self.contact_nodes.len()
    }
}

/// Boundary operators of one body on its full φ/ψ dof sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMatrices {
    /// Single layer, φ × φ.
    pub u: DMatrix<f64>,
    /// Double layer, φ × ψ.
    pub t: DMatrix<f64>,
    /// Hypersingular operator, ψ × ψ.
    pub s: DMatrix<f64>,
    /// Mass pairing ∫ φ ψ, φ × ψ.
    pub m: DMatrix<f64>,
    /// Relative asymmetry of `u` and `s` before symmetrization.
    pub raw_asymmetry: [f64; 2],
}

impl DomainMatrices {
    pub fn assemble(mesh: &BoundaryMesh, dofs: &DomainDofs, mat: &Material) -> Self {
        let ne = mesh.num_elements();
        let (nphi, npsi) = (dofs.num_phi(), dofs.num_psi());
        let rows = par::map_range(ne, |e| (0..ne).map(|f| pair_blocks(mesh, e, f, mat)).collect::<Vec<_>>());
        let mut u = DMatrix::zeros(nphi, nphi);
        let mut t = DMatrix::zeros(nphi, npsi);
        let mut s = DMatrix::zeros(npsi, npsi);
        for (e, row) in rows.iter().enumerate() {
            let (pe, qe) = (dofs.traction_nodes[e], mesh.elements[e]);
            for (f, pb) in row.iter().enumerate() {
                let (pf, qf) = (dofs.traction_nodes[f], mesh.elements[f]);
                for a in 0..2 {
                    for b in 0..2 {
                        for k in 0..2 {
                            for l in 0..2 {
                                u[(2 * pe[a] + k, 2 * pf[b] + l)] += pb.u[a][b][k][l];
                                t[(2 * pe[a] + k, 2 * qf[b] + l)] += pb.t[a][b][k][l];
                                s[(2 * qe[a] + k, 2 * qf[b] + l)] += pb.s[a][b][k][l];
                            }
                        }
                    }
                }
            }
        }
        let raw_asymmetry = [linalg::asymmetry(&u), linalg::asymmetry(&s)];
        let u = (&u + u.transpose()) * 0.5;
        let s = (&s + s.transpose()) * 0.5;
        let m = mass_pairing(mesh, dofs, None);
        DomainMatrices { u, t, s, m, raw_asymmetry }
    }
}

/// ∫ φ_i ψ_j over the elements whose component tag equals `part` (all if `None`).
fn mass_pairing(mesh: &BoundaryMesh, dofs: &DomainDofs, part: Option<Part>) -> DMatrix<f64> {
    part_mass(mesh, dofs, part, (Shape::Phi, Shape::Psi))
}

fn part_mass(mesh: &BoundaryMesh, dofs: &DomainDofs, part: Option<Part>, families: (Shape, Shape)) -> DMatrix<f64> {
    let size = |s: Shape| if s == Shape::Phi { dofs.num_phi() } else { dofs.num_psi() };
    let node = |s: Shape, e: usize, a: usize| if s == Shape::Phi { dofs.traction_nodes[e][a] } else { mesh.elements[e][a] };
    let mut m = DMatrix::zeros(size(families.0), size(families.1));
    for e in 0..mesh.num_elements() {
        let l = mesh.frame(e).length;
        let local = [[l / 3.0, l / 6.0], [l / 6.0, l / 3.0]];
        for k in 0..2 {
            if part.is_some_and(|p| mesh.tags[e].0[k] != p) {
                continue;
            }
            for a in 0..2 {
                for b in 0..2 {
                    m[(2 * node(families.0, e, a) + k, 2 * node(families.1, e, b) + k)] += local[a][b];
                }
            }
        }
    }
    m
}

/// Mass matrix ∫ N_i N_j of one boundary part between two shape families.
///
/// Rows and columns span the full dof set of each family, so dofs off the
/// part give zero rows and columns.
pub fn mass_matrix(mesh: &BoundaryMesh, part: Part, families: (Shape, Shape)) -> Result<DMatrix<f64>> {
    if !mesh.tags.iter().any(|t| t.0.contains(&part)) {
        return Err(Error::InvalidSpec(format!("mesh {} has no {part:?} element", mesh.label.letter())));
    }
    let dofs = DomainDofs::new(mesh, None, 0);
    Ok(part_mass(mesh, &dofs, Some(part), families))
}

/// ∫_{Γ_C} φ^A_i ψ^B_c, with rows over A's φ dofs and columns over the gap vector.
pub fn contact_coupling(dofs_a: &DomainDofs, pair: &ContactPair) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dofs_a.num_phi(), 2 * pair.nodes_b.len());
    let (xg, wg) = gauss_legendre(2);
    for o in &pair.overlaps {
        let kb = pair.elements_b.iter().position(|&e| e == o.elem_b).expect("overlap on master chain");
        let len = o.s1 - o.s0;
        let tn = dofs_a.traction_nodes[o.elem_a];
        for (&x, &w) in xg.iter().zip(&wg) {
            let s = x;
            let xa = o.xi_a[0] + s * (o.xi_a[1] - o.xi_a[0]);
            let xb = o.xi_b[0] + s * (o.xi_b[1] - o.xi_b[0]);
            let na = [1.0 - xa, xa];
            let nb = [1.0 - xb, xb];
            for a in 0..2 {
                for b in 0..2 {
                    let v = w * len * na[a] * nb[b];
                    for k in 0..2 {
                        m[(2 * tn[a] + k, 2 * (kb + b) + k)] += v;
                    }
                }
            }
        }
    }
    m
}

/// Prescribed boundary data for one solve.
///
/// `g[η]` holds displacements on ψ dofs (read on Dirichlet dofs only),
/// `f[η]` tractions on φ dofs (read on Neumann dofs only), `w` the gap on
/// the master contact nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadData {
    pub g: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
    pub w: Vec<f64>,
}

impl LoadData {
    pub fn zeros(layout: &DofLayout) -> Self {
        LoadData {
            g: layout.domains.iter().map(|d| vec![0.0; d.num_psi()]).collect(),
            f: layout.domains.iter().map(|d| vec![0.0; d.num_phi()]).collect(),
            w: vec![0.0; layout.num_gap()],
        }
    }
}

/// Full boundary traces of every body after a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySolution {
    /// Tractions on φ dofs, known values included.
    pub p: Vec<Vec<f64>>,
    /// Displacements on ψ dofs, known values included.
    pub v: Vec<Vec<f64>>,
    /// Raw unknown vector.
    pub x: Vec<f64>,
}

/// The assembled, factorized system of one scenario.
#[derive(Debug, Clone)]
pub struct InfluenceMatrices {
    pub meshes: Vec<BoundaryMesh>,
    pub materials: Vec<Material>,
    pub pair: Option<ContactPair>,
    pub layout: DofLayout,
    pub domains: Vec<DomainMatrices>,
    /// Cross mass matrix between A's tractions and the gap.
    pub coupling: Option<DMatrix<f64>>,
    pub system: DMatrix<f64>,
    pub lu: DenseLu,
    system_norm: f64,
}

/// Relative backward error accepted by [`InfluenceMatrices::solve`].
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

impl InfluenceMatrices {
    /// Assembles and factorizes the system of one body, or of two bodies
    /// joined along `pair` (A first, B second).
    pub fn assemble(meshes: Vec<BoundaryMesh>, materials: Vec<Material>, pair: Option<ContactPair>) -> Result<Self> {
        if meshes.is_empty() || meshes.len() > 2 || materials.len() != meshes.len() {
            return Err(Error::Dimension(format!("{} meshes with {} materials", meshes.len(), materials.len())));
        }
        for m in &meshes {
            m.validate()?;
        }
        for m in &materials {
            m.validate()?;
        }
        let has_contact = meshes.iter().any(|m| m.tags.iter().any(|t| t.is_contact()));
        match (&pair, meshes.len()) {
            (Some(_), 2) => {}
            (None, _) if !has_contact => {}
            _ => return Err(Error::ContactMismatch("contact elements require exactly two bodies and a pairing".into())),
        }
        let mut domains_dofs = Vec::new();
        let mut offset = 0;
        for (i, m) in meshes.iter().enumerate() {
            let order = if i == 1 { pair.as_ref().map(|p| p.nodes_b.as_slice()) } else { None };
            let d = DomainDofs::new(m, order, offset);
            offset += d.num_unknowns();
            domains_dofs.push(d);
        }
        if let Some(p) = &pair {
            let b = &domains_dofs[1];
            let n_c = b.psi_class.iter().filter(|c| **c == DofClass::C).count();
            if n_c != 2 * p.nodes_b.len() {
                return Err(Error::ContactMismatch("master contact nodes disagree with contact dofs".into()));
            }
        }
        let layout = DofLayout {
            contact_nodes: pair.as_ref().map(|p| p.nodes_b.clone()).unwrap_or_default(),
            domains: domains_dofs,
            dim: offset,
        };
        let domains: Vec<DomainMatrices> = meshes
            .iter()
            .zip(&layout.domains)
            .zip(&materials)
            .map(|((m, d), mat)| DomainMatrices::assemble(m, d, mat))
            .collect();
        let coupling = pair.as_ref().map(|p| contact_coupling(&layout.domains[0], p));
        let system = build_system(&layout, &domains, coupling.as_ref());
        let lu = DenseLu::factor(&system)?;
        let system_norm = system.norm();
        Ok(InfluenceMatrices { meshes, materials, pair, layout, domains, coupling, system, lu, system_norm })
    }

    /// Like [`assemble`](Self::assemble), reusing a factorization cached in `dir`.
    pub fn assemble_cached(
        meshes: Vec<BoundaryMesh>,
        materials: Vec<Material>,
        pair: Option<ContactPair>,
        dir: &Path,
    ) -> Result<Self> {
        let key = cache_key(&meshes, &materials);
        let path = dir.join(format!("sgbem-{key}.bin"));
        if let Ok(bytes) = std::fs::read(&path) {
            match Self::restore(meshes.clone(), materials.clone(), pair.clone(), &bytes) {
                Ok(im) => {
                    log::info!("reusing factorization {}", path.display());
                    return Ok(im);
                }
                Err(e) => log::warn!("ignoring unreadable cache {}: {e}", path.display()),
            }
        }
        let im = Self::assemble(meshes, materials, pair)?;
        std::fs::create_dir_all(dir)?;
        std::fs::write(&path, im.dump())?;
        Ok(im)
    }

    pub fn cache_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("sgbem-{}.bin", cache_key(&self.meshes, &self.materials)))
    }

    /// Serializes operators and factors.
    pub fn dump(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"KVSGBEM1");
        out.extend_from_slice(cache_key(&self.meshes, &self.materials).as_bytes());
        for d in &self.domains {
            for m in [&d.u, &d.t, &d.s, &d.m] {
                linalg::write_matrix(m, &mut out);
            }
            out.extend_from_slice(&d.raw_asymmetry[0].to_le_bytes());
            out.extend_from_slice(&d.raw_asymmetry[1].to_le_bytes());
        }
        self.lu.write_to(&mut out);
        out
    }

    /// Rebuilds from [`dump`](Self::dump) output produced for the same geometry.
    pub fn restore(meshes: Vec<BoundaryMesh>, materials: Vec<Material>, pair: Option<ContactPair>, bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string()));
        let key = cache_key(&meshes, &materials);
        let head = 8 + key.len();
        if bytes.len() < head || &bytes[..8] != b"KVSGBEM1" || &bytes[8..head] != key.as_bytes() {
            return Err(bad("cache key mismatch"));
        }
        let mut input = &bytes[head..];
        let mut layout_offset = 0;
        let mut dofs = Vec::new();
        for (i, m) in meshes.iter().enumerate() {
            let order = if i == 1 { pair.as_ref().map(|p| p.nodes_b.as_slice()) } else { None };
            let d = DomainDofs::new(m, order, layout_offset);
            layout_offset += d.num_unknowns();
            dofs.push(d);
        }
        let layout = DofLayout {
            contact_nodes: pair.as_ref().map(|p| p.nodes_b.clone()).unwrap_or_default(),
            domains: dofs,
            dim: layout_offset,
        };
        let mut domains = Vec::new();
        for _ in &meshes {
            let u = linalg::read_matrix(&mut input)?;
            let t = linalg::read_matrix(&mut input)?;
            let s = linalg::read_matrix(&mut input)?;
            let m = linalg::read_matrix(&mut input)?;
            let raw_asymmetry = [linalg::read_f64(&mut input)?, linalg::read_f64(&mut input)?];
            domains.push(DomainMatrices { u, t, s, m, raw_asymmetry });
        }
        let lu = DenseLu::read_from(&mut input)?;
        if lu.dim() != layout.dim {
            return Err(bad("cached factorization has the wrong size"));
        }
        let coupling = pair.as_ref().map(|p| contact_coupling(&layout.domains[0], p));
        let system = build_system(&layout, &domains, coupling.as_ref());
        let system_norm = system.norm();
        Ok(InfluenceMatrices { meshes, materials, pair, layout, domains, coupling, system, lu, system_norm })
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    /// Load vector of the system for the given data.
    pub fn rhs(&self, data: &LoadData) -> Result<Vec<f64>> {
        self.check_data(data)?;
        let mut r = vec![0.0; self.dim()];
        for (eta, (d, mats)) in self.layout.domains.iter().zip(&self.domains).enumerate() {
            let f = DVector::from_iterator(d.num_phi(), (0..d.num_phi()).map(|i| if d.phi_class[i] == DofClass::N { data.f[eta][i] } else { 0.0 }));
            let g = DVector::from_iterator(d.num_psi(), (0..d.num_psi()).map(|j| if d.psi_class[j] == DofClass::D { data.g[eta][j] } else { 0.0 }));
            let mg = &mats.m * &g;
            let mtf = mats.m.tr_mul(&f);
            let phi_rows = &mats.u * &f - (&mats.t * &g + mg * 0.5);
            let psi_rows = -(mats.t.tr_mul(&f) - mtf * 0.5) + &mats.s * &g;
            for (row, dof) in d.phi_unknowns() {
                r[row] = phi_rows[dof];
            }
            for (row, dof) in d.psi_unknowns() {
                r[row] = psi_rows[dof];
            }
        }
        self.add_gap_rhs(&data.w, &mut r);
        Ok(r)
    }

    fn add_gap_rhs(&self, w: &[f64], r: &mut [f64]) {
        if let Some(mab) = &self.coupling {
            let a = &self.layout.domains[0];
            let n1 = a.p_c_offset();
            for (i, &dof) in a.p_c.iter().enumerate() {
                let s: f64 = (0..w.len()).map(|c| mab[(dof, c)] * w[c]).sum();
                r[n1 + i] -= s;
            }
        }
    }

    fn check_data(&self, data: &LoadData) -> Result<()> {
        let ok = data.g.len() == self.layout.domains.len()
            && data.f.len() == self.layout.domains.len()
            && data.w.len() == self.layout.num_gap()
            && self.layout.domains.iter().enumerate().all(|(i, d)| data.g[i].len() == d.num_psi() && data.f[i].len() == d.num_phi());
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("load data does not conform to the dof layout".into()))
        }
    }

    /// Solves for the unknowns with a backward-error check.
    pub fn solve_rhs(&self, r: &[f64]) -> Result<Vec<f64>> {
        let x = self.lu.solve(r)?;
        let xv = DVector::from_column_slice(&x);
        let res = &self.system * &xv - DVector::from_column_slice(r);
        let denom = self.system_norm * xv.norm() + r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = if denom > 0.0 { res.norm() / denom } else { 0.0 };
        if rel > RESIDUAL_TOLERANCE {
            return Err(Error::Residual(rel));
        }
        Ok(x)
    }

    /// Unknowns for a pure gap load, without the residual check.
    pub fn solve_gap(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.layout.num_gap() {
            return Err(Error::Dimension(format!("gap of length {} for {} contact dofs", w.len(), self.layout.num_gap())));
        }
        let mut r = vec![0.0; self.dim()];
        self.add_gap_rhs(w, &mut r);
        self.lu.solve(&r)
    }

    /// Solves the transmission problem for the given data.
    pub fn solve_tbvp(&self, data: &LoadData) -> Result<BoundarySolution> {
        let r = self.rhs(data)?;
        let x = self.solve_rhs(&r)?;
        Ok(self.expand(data, x))
    }

    /// Merges unknowns with the prescribed data into full traces.
    pub fn expand(&self, data: &LoadData, x: Vec<f64>) -> BoundarySolution {
        let mut p = Vec::new();
        let mut v = Vec::new();
        for (eta, d) in self.layout.domains.iter().enumerate() {
            let mut pe: Vec<f64> = (0..d.num_phi()).map(|i| if d.phi_class[i] == DofClass::N { data.f[eta][i] } else { 0.0 }).collect();
            let mut ve: Vec<f64> = (0..d.num_psi()).map(|j| if d.psi_class[j] == DofClass::D { data.g[eta][j] } else { 0.0 }).collect();
            for (row, dof) in d.phi_unknowns() {
                pe[dof] = x[row];
            }
            for (row, dof) in d.psi_unknowns() {
                ve[dof] = x[row];
            }
            p.push(pe);
            v.push(ve);
        }
        BoundarySolution { p, v, x }
    }

    /// Boundary work ⟨p, v⟩ of one body, integrated with the mass pairing.
    pub fn pairing(&self, eta: usize, p: &[f64], v: &[f64]) -> f64 {
        let m = &self.domains[eta].m;
        let mut s = 0.0;
        for i in 0..m.nrows() {
            if p[i] == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for j in 0..m.ncols() {
                row += m[(i, j)] * v[j];
            }
            s += p[i] * row;
        }
        s
    }

    /// Largest relative asymmetry among the assembled system and the raw
    /// single-layer and hypersingular blocks.
    pub fn asymmetry(&self) -> f64 {
        self.domains
            .iter()
            .flat_map(|d| d.raw_asymmetry)
            .fold(linalg::asymmetry(&self.system), f64::max)
    }
}

/// Builds the symmetric system matrix.
fn build_system(layout: &DofLayout, domains: &[DomainMatrices], coupling: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let n = layout.dim;
    let mut k = DMatrix::zeros(n, n);
    for (eta, (d, mats)) in layout.domains.iter().zip(domains).enumerate() {
        // ω = −1 on A's contact block, +1 on B's
        let omega = if eta == 0 { -1.0 } else { 1.0 };
        let phi: Vec<(usize, usize)> = d.phi_unknowns().collect();
        let psi: Vec<(usize, usize)> = d.psi_unknowns().collect();
        for &(ri, i) in &phi {
            for &(cj, j) in &phi {
                k[(ri, cj)] = -mats.u[(i, j)];
            }
            for &(cj, j) in &psi {
                let both_c = d.phi_class[i] == DofClass::C && d.psi_class[j] == DofClass::C;
                let shift = if both_c { omega * 0.5 } else { 0.5 };
                let v = mats.t[(i, j)] + shift * mats.m[(i, j)];
                k[(ri, cj)] = v;
                k[(cj, ri)] = v;
            }
        }
        for &(ri, i) in &psi {
            for &(cj, j) in &psi {
                k[(ri, cj)] = -mats.s[(i, j)];
            }
        }
    }
    if let Some(mab) = coupling {
        let (a, b) = (&layout.domains[0], &layout.domains[1]);
        let (pa, vb) = (a.p_c_offset(), b.v_c_offset());
        for (i, &dof) in a.p_c.iter().enumerate() {
            for c in 0..mab.ncols() {
                k[(pa + i, vb + c)] = mab[(dof, c)];
                k[(vb + c, pa + i)] = mab[(dof, c)];
            }
        }
    }
    k
}

/// Hash of everything the assembled operators depend on.
pub fn cache_key(meshes: &[BoundaryMesh], materials: &[Material]) -> String {
    let mut h = Sha256::new();
    for (m, mat) in meshes.iter().zip(materials) {
        h.update(m.debug_dump().as_bytes());
        h.update(mat.young_modulus.to_le_bytes());
        h.update(mat.poisson_ratio.to_le_bytes());
    }
    h.finalize().iter().take(12).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, pair_contacts, EdgeSpec, ElementTag, Side};

    fn mat() -> Material {
        Material::new(200.0, 0.3, 0.0).unwrap()
    }

    fn rect(side: Side, x: [f64; 2], y: [f64; 2], tags: [ElementTag; 4], div: [usize; 4]) -> BoundaryMesh {
        let p = [[x[0], y[0]], [x[1], y[0]], [x[1], y[1]], [x[0], y[1]]];
        let edges: Vec<EdgeSpec> = (0..4).map(|i| EdgeSpec::uniform(tags[i], div[i])).collect();
        build_mesh(side, &p, &edges).unwrap()
    }

    fn stacked(div_a: usize, div_b: usize) -> InfluenceMatrices {
        use ElementTag as T;
        let a = rect(Side::A, [0.0, 1.0], [1.0, 1.6], [T::C, T::N, T::D, T::N], [div_a, 2, 3, 2]);
        let b = rect(Side::B, [0.0, 1.0], [0.0, 1.0], [T::D, T::N, T::C, T::N], [3, 3, div_b, 3]);
        let pair = pair_contacts(&a, &b).unwrap();
        InfluenceMatrices::assemble(vec![a, b], vec![mat(), Material::new(800.0, 0.25, 0.0).unwrap()], Some(pair)).unwrap()
    }

    #[test]
    fn all_dirichlet_square_reduces_to_negative_single_layer() {
        let mesh = rect(Side::A, [0.0, 1.0], [0.0, 1.0], [ElementTag::D; 4], [2; 4]);
        let im = InfluenceMatrices::assemble(vec![mesh], vec![mat()], None).unwrap();
        let d = &im.layout.domains[0];
        assert_eq!(d.p_d.len(), d.num_phi());
        assert_eq!(im.dim(), d.num_phi());
        for i in 0..im.dim() {
            for j in 0..im.dim() {
                assert_eq!(im.system[(i, j)], -im.domains[0].u[(d.p_d[i], d.p_d[j])]);
            }
        }
        let eig = im.system.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l < 0.0), "{:?}", eig.eigenvalues);
    }

    #[test]
    fn uniaxial_tension_patch_test() {
        use crate::mesh::Part::{Dirichlet as D, Neumann as N};
        let m = mat();
        let (side, f) = (2.0, 3.0);
        let tags = [ElementTag([N, D]), ElementTag::N, ElementTag::N, ElementTag([D, N])];
        let mesh = rect(Side::A, [0.0, side], [0.0, side], tags, [4; 4]);
        let im = InfluenceMatrices::assemble(vec![mesh.clone()], vec![m], None).unwrap();
        let d = &im.layout.domains[0];
        let mut data = LoadData::zeros(&im.layout);
        // top edge carries σ22 = f; traction nodes of the top edge have y = side
        for e in 0..mesh.num_elements() {
            if mesh.frame(e).normal[1] > 0.5 {
                for a in 0..2 {
                    data.f[0][2 * d.traction_nodes[e][a] + 1] = f;
                }
            }
        }
        let sol = im.solve_tbvp(&data).unwrap();
        let (e, nu) = (m.young_modulus, m.poisson_ratio);
        let exact = |x: [f64; 2]| [-nu * (1.0 + nu) * f * x[0] / e, (1.0 - nu * nu) * f * x[1] / e];
        let scale = (1.0 - nu * nu) * f * side / e;
        for (j, x) in mesh.nodes.iter().enumerate() {
            let u = exact(*x);
            for k in 0..2 {
                let err = (sol.v[0][2 * j + k] - u[k]).abs();
                assert!(err <= 1e-6 * scale, "node {j} comp {k}: {} vs {}", sol.v[0][2 * j + k], u[k]);
            }
        }
        // reactions on the rollers balance the applied load
        for (e, tn) in d.traction_nodes.iter().enumerate() {
            let n = mesh.frame(e).normal;
            for a in 0..2 {
                let expect = [0.0, f * n[1]];
                for k in 0..2 {
                    assert!((sol.p[0][2 * tn[a] + k] - expect[k]).abs() < 1e-6 * f);
                }
            }
        }
    }

    #[test]
    fn rigid_translation_produces_no_traction() {
        let m = mat();
        let mesh = rect(Side::A, [0.0, 1.0], [0.0, 2.0], [ElementTag::D; 4], [3; 4]);
        let im = InfluenceMatrices::assemble(vec![mesh.clone()], vec![m], None).unwrap();
        let mut data = LoadData::zeros(&im.layout);
        for j in 0..mesh.num_nodes() {
            data.g[0][2 * j] = 0.013;
            data.g[0][2 * j + 1] = -0.021;
        }
        let sol = im.solve_tbvp(&data).unwrap();
        let max = sol.p[0].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(max <= 1e-8 * m.young_modulus, "{max}");
    }

    #[test]
    fn homogeneous_data_gives_zero_solution() {
        let im = stacked(4, 4);
        let sol = im.solve_tbvp(&LoadData::zeros(&im.layout)).unwrap();
        assert!(sol.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_body_system_is_symmetric() {
        for (da, db) in [(4, 4), (3, 6)] {
            let im = stacked(da, db);
            assert!(im.asymmetry() <= 1e-10, "{}", im.asymmetry());
            assert_eq!(linalg::asymmetry(&im.system), 0.0);
        }
    }

    #[test]
    fn mass_matrix_examples() {
        let l = 0.8;
        let mesh = rect(Side::A, [0.0, l], [0.0, 1.0], [ElementTag::D, ElementTag::N, ElementTag::N, ElementTag::N], [1, 1, 1, 1]);
        let m = mass_matrix(&mesh, Part::Dirichlet, (Shape::Psi, Shape::Psi)).unwrap();
        let (n0, n1) = (mesh.elements[0][0], mesh.elements[0][1]);
        for k in 0..2 {
            assert!((m[(2 * n0 + k, 2 * n0 + k)] - l / 3.0).abs() < 1e-15);
            assert!((m[(2 * n0 + k, 2 * n1 + k)] - l / 6.0).abs() < 1e-15);
            assert!((m[(2 * n1 + k, 2 * n1 + k)] - l / 3.0).abs() < 1e-15);
        }
        assert!((m.sum() - 2.0 * l).abs() < 1e-14);

        let mesh = rect(Side::A, [0.0, 2.0 * l], [0.0, 1.0], [ElementTag::D, ElementTag::N, ElementTag::N, ElementTag::N], [2, 1, 1, 1]);
        let mid = mesh.elements[0][1];
        for fam in [Shape::Phi, Shape::Psi] {
            let m = mass_matrix(&mesh, Part::Dirichlet, (fam, fam)).unwrap();
            assert!((m.sum() - 4.0 * l).abs() < 1e-14);
            if fam == Shape::Psi {
                assert!((m[(2 * mid, 2 * mid)] - 2.0 * l / 3.0).abs() < 1e-15);
            }
        }
        assert!(mass_matrix(&mesh, Part::Contact, (Shape::Psi, Shape::Psi)).is_err());
    }

    #[test]
    fn matching_coupling_equals_contact_mass() {
        let im = stacked(4, 4);
        let mb = &im.meshes[1];
        let mab = im.coupling.as_ref().unwrap();
        let mass_b = mass_matrix(mb, Part::Contact, (Shape::Psi, Shape::Psi)).unwrap();
        let da = &im.layout.domains[0];
        let nodes_b = &im.pair.as_ref().unwrap().nodes_b;
        for &i in &da.p_c {
            let x = da.phi_node_pos[i / 2];
            let jb = (0..mb.num_nodes()).find(|&j| crate::mesh::norm(crate::mesh::sub(mb.nodes[j], x)) < 1e-12).unwrap();
            for (c, &nb) in nodes_b.iter().enumerate() {
                for l in 0..2 {
                    let expect = mass_b[(2 * jb + i % 2, 2 * nb + l)];
                    assert!((mab[(i, 2 * c + l)] - expect).abs() < 1e-15, "{i} {c} {l}: {} vs {expect};", mab[(i, 2 * c + l)]);
                }
            }
        }
    }

    fn random_data(im: &InfluenceMatrices, seed: u64) -> LoadData {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut d = LoadData::zeros(&im.layout);
        for v in d.g.iter_mut().chain(d.f.iter_mut()) {
            v.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        }
        d.w.iter_mut().for_each(|x| *x = rng.gen_range(-0.01..0.01));
        d
    }

    #[test]
    fn discrete_betti_reciprocity() {
        let im = stacked(3, 6);
        let (l1, l2) = (random_data(&im, 1), random_data(&im, 2));
        let (r1, r2) = (im.rhs(&l1).unwrap(), im.rhs(&l2).unwrap());
        let (x1, x2) = (im.solve_rhs(&r1).unwrap(), im.solve_rhs(&r2).unwrap());
        let w12: f64 = r2.iter().zip(&x1).map(|(a, b)| a * b).sum();
        let w21: f64 = r1.iter().zip(&x2).map(|(a, b)| a * b).sum();
        assert!((w12 - w21).abs() <= 1e-8 * w12.abs().max(w21.abs()), "{w12} {w21}");
    }

    /// Largest nodal misfit of the displacement jump and root-mean-square
    /// misfit of the traction balance for a smooth gap load on matching meshes of size `n`.
    fn transmission_misfit(n: usize) -> (f64, f64) {
        use ElementTag as T;
        let a = rect(Side::A, [0.0, 1.0], [1.0, 1.6], [T::C, T::N, T::D, T::N], [2 * n, n, 2 * n, n]);
        let b = rect(Side::B, [0.0, 1.0], [0.0, 1.0], [T::D, T::N, T::C, T::N], [2 * n; 4]);
        let pair = pair_contacts(&a, &b).unwrap();
        let im = InfluenceMatrices::assemble(vec![a, b], vec![mat(), mat()], Some(pair)).unwrap();
        let nodes_b = im.pair.as_ref().unwrap().nodes_b.clone();
        let (ma, mb) = (&im.meshes[0], &im.meshes[1]);
        let mut data = LoadData::zeros(&im.layout);
        for (c, w) in data.w.chunks_mut(2).enumerate() {
            let x = mb.nodes[nodes_b[c]][0];
            w[0] = 1e-3 * x * (1.0 - x);
            w[1] = -2e-3 * x * (1.0 - x);
        }
        let sol = im.solve_tbvp(&data).unwrap();
        let close = |p: [f64; 2], q: [f64; 2]| crate::mesh::norm(crate::mesh::sub(p, q)) < 1e-12;
        let wmax = data.w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut gap_err = 0.0f64;
        for (c, &nb) in nodes_b.iter().enumerate() {
            let ja = (0..ma.num_nodes()).find(|&j| close(ma.nodes[j], mb.nodes[nb])).unwrap();
            for k in 0..2 {
                let jump = sol.v[0][2 * ja + k] - sol.v[1][2 * nb + k];
                gap_err = gap_err.max((jump - data.w[2 * c + k]).abs() / wmax);
            }
        }
        let (da, db) = (&im.layout.domains[0], &im.layout.domains[1]);
        let pmax = sol.p[0].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut trac_err = 0.0;
        for &i in &da.p_c {
            let x = da.phi_node_pos[i / 2];
            let jb = (0..db.num_phi_nodes).find(|&j| db.phi_class[2 * j] == DofClass::C && close(db.phi_node_pos[j], x)).unwrap();
            trac_err += (sol.p[0][i] + sol.p[1][2 * jb + i % 2]).powi(2);
        }
        let trac_err = (trac_err / da.p_c.len() as f64).sqrt() / pmax;
        (gap_err, trac_err)
    }

    #[test]
    fn weak_transmission_converges_under_refinement() {
        let errs: Vec<(f64, f64)> = [2, 4, 8, 16].iter().map(|&n| transmission_misfit(n)).collect();
        for w in errs.windows(2) {
            assert!(w[1].0 < 0.6 * w[0].0 && w[1].1 < w[0].1, "{errs:?}");
        }
        assert!(errs[0].0 < 0.1 && errs[3].0 < 0.01, "{errs:?}");
    }

    #[test]
    fn factorization_survives_dump_and_restore() {
        let im = stacked(3, 3);
        let bytes = im.dump();
        let back = InfluenceMatrices::restore(im.meshes.clone(), im.materials.clone(), im.pair.clone(), &bytes).unwrap();
        assert_eq!(back.lu, im.lu);
        assert_eq!(back.system, im.system);
        let other = stacked(3, 4);
        assert!(InfluenceMatrices::restore(other.meshes.clone(), other.materials.clone(), other.pair.clone(), &bytes).is_err());
    }
}
