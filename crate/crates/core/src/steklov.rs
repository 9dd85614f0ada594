//! Generalized Poincaré–Steklov map of the coupled pair: prescribed
//! `(g_D, f_N, w)` to the responses `(p_D, v_N, p_C)`.
//!
//! Every application is one backsolve with the cached factorization. The
//! load-dependent part is computed once per load state and reused while only
//! the gap changes.

use crate::assembly::{DofClass, InfluenceMatrices, LoadData};
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Unknown blocks of each body, in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct SteklovResponse {
    pub p_d: Vec<Vec<f64>>,
    pub v_n: Vec<Vec<f64>>,
    pub p_c: Vec<Vec<f64>>,
    pub v_c: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct Offset {
    data: LoadData,
    x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SteklovOperator<'a> {
    im: &'a InfluenceMatrices,
    offset: Option<Offset>,
}

impl<'a> SteklovOperator<'a> {
    pub fn new(im: &'a InfluenceMatrices) -> Result<Self> {
        if im.coupling.is_none() {
            return Err(Error::ContactMismatch("the Steklov map needs two bodies in contact".into()));
        }
        Ok(SteklovOperator { im, offset: None })
    }

    pub fn influence(&self) -> &'a InfluenceMatrices {
        self.im
    }

    pub fn num_gap(&self) -> usize {
        self.im.layout.num_gap()
    }

    fn split(&self, x: &[f64]) -> SteklovResponse {
        let mut r = SteklovResponse { p_d: vec![], v_n: vec![], p_c: vec![], v_c: vec![] };
        for d in &self.im.layout.domains {
            let mut o = d.offset;
            let mut take = |n: usize| {
                let s = x[o..o + n].to_vec();
                o += n;
                s
            };
            r.p_d.push(take(d.p_d.len()));
            r.v_n.push(take(d.v_n.len()));
            r.p_c.push(take(d.p_c.len()));
            r.v_c.push(take(d.v_c.len()));
        }
        r
    }

    /// Full affine map for arbitrary data.
    pub fn apply(&self, data: &LoadData) -> Result<SteklovResponse> {
        let r = self.im.rhs(data)?;
        let x = self.im.solve_rhs(&r)?;
        Ok(self.split(&x))
    }

    /// Caches the response to `(g_D, f_N)` with zero gap.
    pub fn set_loads(&mut self, data: &LoadData) -> Result<()> {
        let mut data = data.clone();
        data.w.iter_mut().for_each(|v| *v = 0.0);
        let r = self.im.rhs(&data)?;
        let x = self.im.solve_rhs(&r)?;
        self.offset = Some(Offset { data, x });
        Ok(())
    }

    pub fn loads(&self) -> Option<&LoadData> {
        self.offset.as_ref().map(|o| &o.data)
    }

    /// Unknowns for the cached loads plus the gap `w`.
    pub fn solve_with_gap(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.im.solve_gap(w)?;
        if let Some(o) = &self.offset {
            x.iter_mut().zip(&o.x).for_each(|(a, b)| *a += b);
        }
        Ok(x)
    }

    /// Cached loads plus the gap `w`, split into blocks.
    pub fn apply_cached(&self, w: &[f64]) -> Result<SteklovResponse> {
        Ok(self.split(&self.solve_with_gap(w)?))
    }

    /// Contact traction of A as a load on the gap dofs: (M^AB)ᵀ p^A_C.
    fn gap_load(&self, x: &[f64]) -> Vec<f64> {
        let a = &self.im.layout.domains[0];
        let mab = self.im.coupling.as_ref().expect("checked in new");
        let o = a.p_c_offset();
        (0..mab.ncols())
            .map(|c| a.p_c.iter().enumerate().map(|(i, &dof)| mab[(dof, c)] * x[o + i]).sum())
            .collect()
    }

    /// Linear part restricted to the contact: the work-conjugate load of
    /// the contact traction generated by the gap `w` alone.
    pub fn contact_restriction(&self, w: &[f64]) -> Result<Vec<f64>> {
        let x = self.im.solve_gap(w)?;
        Ok(self.gap_load(&x))
    }

    /// Gap load of the cached loads with zero gap.
    pub fn load_offset(&self) -> Vec<f64> {
        match &self.offset {
            Some(o) => self.gap_load(&o.x),
            None => vec![0.0; self.num_gap()],
        }
    }

    /// Boundary work of the cached loads at zero gap,
    /// ½Σ⟨p_D, g_D⟩ − ½Σ⟨f_N, v_N⟩.
    pub fn load_work(&self) -> f64 {
        let Some(o) = &self.offset else { return 0.0 };
        let sol = self.im.expand(&o.data, o.x.clone());
        let mut work = 0.0;
        for (eta, d) in self.im.layout.domains.iter().enumerate() {
            let masked = |class: DofClass| -> Vec<f64> {
                sol.p[eta].iter().zip(&d.phi_class).map(|(&p, &c)| if c == class { p } else { 0.0 }).collect()
            };
            work += 0.5 * self.im.pairing(eta, &masked(DofClass::D), &sol.v[eta]);
            work -= 0.5 * self.im.pairing(eta, &masked(DofClass::N), &sol.v[eta]);
        }
        work
    }

    /// Reduced potential `½ wᵀA w + lᵀw + c₀` of the cached loads.
    pub fn potential(&self, w: &[f64]) -> Result<f64> {
        let aw = self.contact_restriction(w)?;
        let l = self.load_offset();
        let quad: f64 = w.iter().zip(&aw).map(|(a, b)| 0.5 * a * b).sum();
        let lin: f64 = w.iter().zip(&l).map(|(a, b)| a * b).sum();
        Ok(quad + lin + self.load_work())
    }

    /// Contact displacements of A and B for a pure gap load, on B's contact
    /// node ordering (A's nodes are matched by position when meshes agree).
    pub fn subdomain_traces(&self, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = self.im.solve_gap(w)?;
        let sol = self.im.expand(&LoadData::zeros(&self.im.layout), x);
        let pair = self.im.pair.as_ref().expect("checked in new");
        let (ma, mb) = (&self.im.meshes[0], &self.im.meshes[1]);
        let mut va = Vec::with_capacity(w.len());
        let mut vb = Vec::with_capacity(w.len());
        for &nb in &pair.nodes_b {
            let y = mb.nodes[nb];
            let ua = trace_at(ma, &pair.elements_a, &sol.v[0], y);
            va.extend_from_slice(&ua);
            vb.extend_from_slice(&[sol.v[1][2 * nb], sol.v[1][2 * nb + 1]]);
        }
        Ok((va, vb))
    }

    /// Dense matrix of [`contact_restriction`](Self::contact_restriction), for small meshes only.
    pub fn dense_contact_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.num_gap();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.contact_restriction(&e)?;
            for i in 0..n {
                m[(i, j)] = col[i];
            }
        }
        Ok(m)
    }
}

/// Linear interpolation of a displacement trace of `mesh` at point `y` on
/// one of the listed elements.
fn trace_at(mesh: &crate::mesh::BoundaryMesh, elements: &[usize], v: &[f64], y: [f64; 2]) -> [f64; 2] {
    use crate::mesh::{dot, norm, sub};
    let mut best = (f64::INFINITY, [0.0; 2]);
    for &e in elements {
        let [p, _] = mesh.endpoints(e);
        let f = mesh.frame(e);
        let t = (dot(sub(y, p), f.tangent) / f.length).clamp(0.0, 1.0);
        let q = [p[0] + t * f.length * f.tangent[0], p[1] + t * f.length * f.tangent[1]];
        let d = norm(sub(y, q));
        if d < best.0 {
            let [n0, n1] = mesh.elements[e];
            best = (d, [(1.0 - t) * v[2 * n0] + t * v[2 * n1], (1.0 - t) * v[2 * n0 + 1] + t * v[2 * n1 + 1]]);
        }
    }
    best.1
}
