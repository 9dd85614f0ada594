//! Normal compliance with Coulomb friction on the contact curve, the
//! incremental boundary functional of one time step and its Mosco form as a
//! bound-constrained QP.
//!
//! Gap vectors are Cartesian on the master contact nodes (index `2c + k`).
//! Normal and tangential parts use the master frame: `z_n = z · n^B`.
//! QP variables are stored blockwise, `y = (y₁, y₂, y₃, y₄)` with one entry
//! per master node in each block.

use crate::assembly::InfluenceMatrices;
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::qp::QpOperator;
use crate::steklov::SteklovOperator;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactLaw {
    /// Coefficient of friction.
    pub mu: f64,
    /// Normal stiffness in MPa/mm.
    pub k_g: f64,
}

impl ContactLaw {
    pub fn new(mu: f64, k_g: f64) -> Result<Self> {
        let law = ContactLaw { mu, k_g };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidSpec(format!("friction coefficient must be positive, got {}", self.mu)));
        }
        if !(self.k_g > 0.0 && self.k_g.is_finite()) {
            return Err(Error::InvalidSpec(format!("normal stiffness must be positive, got {}", self.k_g)));
        }
        Ok(())
    }
}

/// Compliance energy density `(k_g/2) min(0, g)²`.
pub fn gamma(g: f64, law: &ContactLaw) -> f64 {
    0.5 * law.k_g * g.min(0.0).powi(2)
}

/// Derivative `k_g min(0, g)`: the (non-positive) normal contact traction.
pub fn gamma_prime(g: f64, law: &ContactLaw) -> f64 {
    law.k_g * g.min(0.0)
}

/// Frames and scalar mass matrix of the master contact chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactGeometry {
    /// Unit tangent and outward normal of B at each master node.
    pub frames: Vec<(Point, Point)>,
    /// Consistent mass of the linear master shapes.
    pub mass: DMatrix<f64>,
    /// Row sums of `mass`.
    pub lumped: Vec<f64>,
    /// Node positions and arclengths along the chain.
    pub positions: Vec<Point>,
    pub arclength: Vec<f64>,
}

/// How the scalar mass of the contact chain enters the friction and
/// compliance terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactMass {
    Consistent,
    #[default]
    Lumped,
}

impl ContactGeometry {
    pub fn new(im: &InfluenceMatrices) -> Result<Self> {
        Self::with_mass(im, ContactMass::Consistent)
    }

    pub fn with_mass(im: &InfluenceMatrices, kind: ContactMass) -> Result<Self> {
        let pair = im.pair.as_ref().ok_or(Error::EmptyContact('B'))?;
        let mesh_b = &im.meshes[1];
        let nc = pair.nodes_b.len();
        let mut mass = DMatrix::zeros(nc, nc);
        for (k, &e) in pair.elements_b.iter().enumerate() {
            let l = mesh_b.frame(e).length;
            mass[(k, k)] += l / 3.0;
            mass[(k + 1, k + 1)] += l / 3.0;
            mass[(k, k + 1)] += l / 6.0;
            mass[(k + 1, k)] += l / 6.0;
        }
        let lumped: Vec<f64> = (0..nc).map(|i| mass.row(i).sum()).collect();
        if kind == ContactMass::Lumped {
            mass = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&lumped));
        }
        Ok(ContactGeometry {
            frames: pair.node_frames(mesh_b),
            mass,
            lumped,
            positions: pair.nodes_b.iter().map(|&n| mesh_b.nodes[n]).collect(),
            arclength: pair.node_s.clone(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.frames.len()
    }

    /// Tangential and normal components of a Cartesian nodal field.
    pub fn split(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.frames
            .iter()
            .enumerate()
            .map(|(c, (t, n))| {
                let x = [v[2 * c], v[2 * c + 1]];
                (x[0] * t[0] + x[1] * t[1], x[0] * n[0] + x[1] * n[1])
            })
            .unzip()
    }

    /// Cartesian field from tangential and normal components.
    pub fn join(&self, vt: &[f64], vn: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 2 * self.num_nodes()];
        for (c, (t, n)) in self.frames.iter().enumerate() {
            out[2 * c] = vt[c] * t[0] + vn[c] * n[0];
            out[2 * c + 1] = vt[c] * t[1] + vn[c] * n[1];
        }
        out
    }

    /// `M x` for a scalar nodal field.
    pub fn mass_apply(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len()).map(|i| (0..x.len()).map(|j| self.mass[(i, j)] * x[j]).sum()).collect()
    }

    /// `M⁻¹ d` for a scalar dual field.
    pub fn solve_mass(&self, d: &[f64]) -> Result<Vec<f64>> {
        let chol = self.mass.clone().cholesky().ok_or(Error::SingularSystem(0.0))?;
        Ok(chol.solve(&nalgebra::DVector::from_column_slice(d)).iter().copied().collect())
    }

    /// Nodal values of a dual (work-conjugate) scalar field, by lumping.
    pub fn nodal_from_dual(&self, dual: &[f64]) -> Vec<f64> {
        dual.iter().zip(&self.lumped).map(|(d, m)| d / m).collect()
    }
}

/// Gap quantities on the master contact nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GapState {
    /// Displacement gap `⟦u⟧`, Cartesian.
    pub z: Vec<f64>,
    /// Fictitious displacement gap `⟦v⟧`, Cartesian.
    pub w: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl GapState {
    pub fn zeros(num_nodes: usize) -> Self {
        GapState { z: vec![0.0; 2 * num_nodes], w: vec![0.0; 2 * num_nodes], alpha: vec![0.0; num_nodes], beta: vec![0.0; num_nodes] }
    }

    pub fn from_gap(z: Vec<f64>) -> Self {
        let nc = z.len() / 2;
        GapState { w: z.clone(), z, alpha: vec![0.0; nc], beta: vec![0.0; nc] }
    }
}

/// Auxiliary variables and gap in physical form.
#[derive(Debug, Clone, PartialEq)]
pub struct Awb {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Cartesian gap.
    pub w: Vec<f64>,
}

/// Per-node change of variables and lower bounds of the Mosco form.
#[derive(Debug, Clone, PartialEq)]
pub struct MoscoTransform {
    /// Lower bounds `ξ = (ξ₁, ξ₂, 0, ξ₄)`, blockwise.
    pub xi: Vec<f64>,
}

impl MoscoTransform {
    /// Block `(α, w_t) = ½[[1, 1], [1, −1]](y₁, y₂)`.
    pub const FRICTION_BLOCK: [[f64; 2]; 2] = [[0.5, 0.5], [0.5, -0.5]];
    /// Block `(β, w_n) = [[1, 0], [−1, 1]](y₃, y₄)`.
    pub const NORMAL_BLOCK: [[f64; 2]; 2] = [[1.0, 0.0], [-1.0, 1.0]];

    pub fn num_nodes(&self) -> usize {
        self.xi.len() / 4
    }
}

/// Lower bounds for the step from the previous gap `z_prev`:
/// `α + w_t ≥ z_t`, `α − w_t ≥ −z_t`, `β ≥ 0`, `β + w_n ≥ −(χ/τ) z_n`.
pub fn mosco_bounds(geom: &ContactGeometry, z_prev: &[f64], tau: f64, chi: f64) -> Result<MoscoTransform> {
    if !(tau > 0.0) {
        return Err(Error::InvalidTau(tau));
    }
    let nc = geom.num_nodes();
    let (zt, zn) = geom.split(z_prev);
    let mut xi = vec![0.0; 4 * nc];
    for c in 0..nc {
        xi[c] = zt[c];
        xi[nc + c] = -zt[c];
        xi[3 * nc + c] = -(chi / tau) * zn[c];
    }
    Ok(MoscoTransform { xi })
}

/// QP variables to `(α, β, w)`.
pub fn y_to_awb(y: &[f64], geom: &ContactGeometry) -> Awb {
    let nc = geom.num_nodes();
    let (y1, y2, y3, y4) = (&y[..nc], &y[nc..2 * nc], &y[2 * nc..3 * nc], &y[3 * nc..4 * nc]);
    let alpha = (0..nc).map(|c| 0.5 * (y1[c] + y2[c])).collect();
    let wt: Vec<f64> = (0..nc).map(|c| 0.5 * (y1[c] - y2[c])).collect();
    let beta = y3.to_vec();
    let wn: Vec<f64> = (0..nc).map(|c| y4[c] - y3[c]).collect();
    Awb { alpha, beta, w: geom.join(&wt, &wn) }
}

/// Inverse of [`y_to_awb`].
pub fn awb_to_y(v: &Awb, geom: &ContactGeometry) -> Vec<f64> {
    let nc = geom.num_nodes();
    let (wt, wn) = geom.split(&v.w);
    let mut y = vec![0.0; 4 * nc];
    for c in 0..nc {
        y[c] = v.alpha[c] + wt[c];
        y[nc + c] = v.alpha[c] - wt[c];
        y[2 * nc + c] = v.beta[c];
        y[3 * nc + c] = v.beta[c] + wn[c];
    }
    y
}

/// The incremental functional of one time step with its loads frozen.
///
/// Its value is
/// `½ κ βᵀMβ + μ k_g (Mβ^{k−1})ᵀα + ½ wᵀA_w w + lᵀw + c₀`
/// where `κ = τ k_g/(τ+χ)`, `A_w` is the contact restriction of the Steklov
/// map, `l` the gap load of the prescribed data and `c₀` their boundary work.
#[derive(Debug, Clone)]
pub struct IncrementalProblem<'s, 'a> {
    op: &'s SteklovOperator<'a>,
    geom: &'s ContactGeometry,
    kappa: f64,
    friction: Vec<f64>,
    load: Vec<f64>,
    constant: f64,
    z_t: Vec<f64>,
    z_n: Vec<f64>,
    ratio: f64,
    pub bounds: MoscoTransform,
}

impl<'s, 'a> IncrementalProblem<'s, 'a> {
    /// `op` must carry the loads of the new time level.
    pub fn new(
        op: &'s SteklovOperator<'a>,
        geom: &'s ContactGeometry,
        law: &ContactLaw,
        z_prev: &[f64],
        tau: f64,
        chi: f64,
    ) -> Result<Self> {
        law.validate()?;
        if z_prev.len() != 2 * geom.num_nodes() || op.num_gap() != z_prev.len() {
            return Err(Error::Dimension("previous gap does not match the contact nodes".into()));
        }
        if !(chi >= 0.0) {
            return Err(Error::InvalidSpec(format!("relaxation time must be non-negative, got {chi}")));
        }
        let bounds = mosco_bounds(geom, z_prev, tau, chi)?;
        let (z_t, z_n) = geom.split(z_prev);
        let beta_prev: Vec<f64> = z_n.iter().map(|&z| (-z).max(0.0)).collect();
        let friction = geom.mass_apply(&beta_prev).into_iter().map(|v| law.mu * law.k_g * v).collect();
        Ok(IncrementalProblem {
            op,
            geom,
            kappa: tau * law.k_g / (tau + chi),
            friction,
            load: op.load_offset(),
            constant: op.load_work(),
            z_t,
            z_n,
            ratio: chi / tau,
            bounds,
        })
    }

    pub fn geometry(&self) -> &ContactGeometry {
        self.geom
    }

    pub fn dim(&self) -> usize {
        4 * self.geom.num_nodes()
    }

    /// Value of the functional.
    pub fn energy(&self, v: &Awb) -> Result<f64> {
        let aw = self.op.contact_restriction(&v.w)?;
        let mb = self.geom.mass_apply(&v.beta);
        Ok(0.5 * self.kappa * dot(&v.beta, &mb)
            + dot(&self.friction, &v.alpha)
            + 0.5 * dot(&v.w, &aw)
            + dot(&self.load, &v.w)
            + self.constant)
    }

    /// Gradient with respect to `(α, β, w)`.
    pub fn gradient(&self, v: &Awb) -> Result<Awb> {
        let mut gw = self.op.contact_restriction(&v.w)?;
        gw.iter_mut().zip(&self.load).for_each(|(g, l)| *g += l);
        let gb = self.geom.mass_apply(&v.beta).into_iter().map(|x| self.kappa * x).collect();
        Ok(Awb { alpha: self.friction.clone(), beta: gb, w: gw })
    }

    /// Pull-back of a gradient in `(α, β, w)` to QP coordinates.
    fn pull_back(&self, g: &Awb) -> Vec<f64> {
        let nc = self.geom.num_nodes();
        let (gt, gn) = self.geom.split(&g.w);
        let mut out = vec![0.0; 4 * nc];
        for c in 0..nc {
            out[c] = 0.5 * (g.alpha[c] + gt[c]);
            out[nc + c] = 0.5 * (g.alpha[c] - gt[c]);
            out[2 * nc + c] = g.beta[c] - gn[c];
            out[3 * nc + c] = gn[c];
        }
        out
    }

    /// Linear term `b` of `½yᵀAy − bᵀy + c`.
    pub fn linear_term(&self) -> Vec<f64> {
        let nc = self.geom.num_nodes();
        let g0 = Awb { alpha: self.friction.clone(), beta: vec![0.0; nc], w: self.load.clone() };
        self.pull_back(&g0).into_iter().map(|v| -v).collect()
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Replaces the auxiliary variables of `y` by their smallest feasible
    /// values. The gap is unchanged and the functional does not increase.
    pub fn tighten(&self, y: &[f64]) -> Vec<f64> {
        let mut v = y_to_awb(y, self.geom);
        let (wt, wn) = self.geom.split(&v.w);
        for c in 0..self.geom.num_nodes() {
            v.alpha[c] = (wt[c] - self.z_t[c]).abs();
            v.beta[c] = (-(wn[c] + self.ratio * self.z_n[c])).max(0.0);
        }
        awb_to_y(&v, self.geom)
    }

    /// Largest deviation of `(α, β)` from their tight values.
    pub fn tightness_violation(&self, v: &Awb) -> f64 {
        let (wt, wn) = self.geom.split(&v.w);
        (0..self.geom.num_nodes())
            .map(|c| {
                let a = (v.alpha[c] - (wt[c] - self.z_t[c]).abs()).abs();
                let b = (v.beta[c] - (-(wn[c] + self.ratio * self.z_n[c])).max(0.0)).abs();
                a.max(b)
            })
            .fold(0.0, f64::max)
    }

    /// Explicit matrix of the QP operator, for small problems.
    pub fn dense_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.apply(&e)?;
            for i in 0..n {
                m[(i, j)] = col[i];
            }
        }
        Ok(m)
    }
}

impl QpOperator for IncrementalProblem<'_, '_> {
    fn dim(&self) -> usize {
        4 * self.geom.num_nodes()
    }

    fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(Error::Dimension(format!("QP vector of length {} for {} variables", y.len(), self.dim())));
        }
        let v = y_to_awb(y, self.geom);
        let aw = self.op.contact_restriction(&v.w)?;
        let mb = self.geom.mass_apply(&v.beta).into_iter().map(|x| self.kappa * x).collect();
        let nc = self.geom.num_nodes();
        Ok(self.pull_back(&Awb { alpha: vec![0.0; nc], beta: mb, w: aw }))
    }
}

/// Convenience form of [`IncrementalProblem::energy`].
#[allow(clippy::too_many_arguments)]
pub fn incremental_energy(
    v: &Awb,
    z_prev: &[f64],
    op: &SteklovOperator,
    geom: &ContactGeometry,
    law: &ContactLaw,
    tau: f64,
    chi: f64,
) -> Result<f64> {
    IncrementalProblem::new(op, geom, law, z_prev, tau, chi)?.energy(v)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{DofClass, LoadData};
    use crate::qp::{active_set_oracle, kkt_violation, mprgp_solve, MprgpOptions, QpProblem};
    use crate::testutil::clamped_blocks;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn law() -> ContactLaw {
        ContactLaw::new(0.3, 50.0).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-s..s)).collect()
    }

    fn random_awb(rng: &mut ChaCha8Rng, nc: usize) -> Awb {
        Awb { alpha: random(rng, nc, 1e-2), beta: random(rng, nc, 1e-2), w: random(rng, 2 * nc, 1e-2) }
    }

    /// Downward pressure on top of A.
    fn pressed(im: &InfluenceMatrices, q: f64) -> LoadData {
        let mut data = LoadData::zeros(&im.layout);
        let d = &im.layout.domains[0];
        for (i, p) in d.phi_node_pos.iter().enumerate() {
            if d.phi_class[2 * i + 1] == DofClass::N && p[1] > 0.79 {
                data.f[0][2 * i + 1] = -q;
            }
        }
        // shift the clamped top of A downward instead when no Neumann top exists
        for j in 0..d.num_psi() {
            if d.psi_class[j] == DofClass::D && j % 2 == 1 {
                data.g[0][j] = -q * 1e-3;
            }
        }
        data
    }

    #[test]
    fn compliance_law_examples() {
        let l = ContactLaw::new(0.2, 4e5).unwrap();
        assert_eq!(gamma(0.0, &l), 0.0);
        assert_eq!(gamma(0.5, &l), 0.0);
        assert!((gamma(-1e-3, &l) - 0.2).abs() < 1e-15);
        assert!((gamma_prime(-1e-3, &l) + 400.0).abs() < 1e-12);
        assert_eq!(gamma_prime(0.1, &l), 0.0);
        assert!(ContactLaw::new(0.0, 1.0).is_err());
        assert!(ContactLaw::new(0.1, -1.0).is_err());
    }

    #[test]
    fn bounds_follow_the_previous_gap() {
        let im = clamped_blocks(2);
        let geom = ContactGeometry::new(&im).unwrap();
        let nc = geom.num_nodes();
        let zero = mosco_bounds(&geom, &vec![0.0; 2 * nc], 0.3, 2.0).unwrap();
        assert!(zero.xi.iter().all(|&x| x == 0.0));
        assert!(matches!(mosco_bounds(&geom, &vec![0.0; 2 * nc], 0.0, 1.0), Err(Error::InvalidTau(_))));

        let mut zt = vec![0.1; nc];
        let mut zn = vec![-0.02; nc];
        let z = geom.join(&zt, &zn);
        let t = mosco_bounds(&geom, &z, 0.5, 0.5).unwrap();
        // y ≥ ξ ⇔ α−w_t ≥ −0.1, α+w_t ≥ 0.1, β ≥ 0, β+w_n ≥ 0.02
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let v = Awb { alpha: random(&mut rng, nc, 0.3), beta: random(&mut rng, nc, 0.05), w: random(&mut rng, 2 * nc, 0.3) };
            let y = awb_to_y(&v, &geom);
            let by_bounds = y.iter().zip(&t.xi).all(|(a, b)| a >= b);
            let (wt, wn) = geom.split(&v.w);
            let direct = (0..nc).all(|c| {
                v.alpha[c] - wt[c] >= -0.1 && v.alpha[c] + wt[c] >= 0.1 && v.beta[c] >= 0.0 && v.beta[c] + wn[c] >= 0.02
            });
            assert_eq!(by_bounds, direct);
        }
        // inviscid: β + w_n ≥ 0
        zt.iter_mut().for_each(|v| *v = 0.0);
        zn.iter_mut().for_each(|v| *v = -0.3);
        let inv = mosco_bounds(&geom, &geom.join(&zt, &zn), 1.0, 0.0).unwrap();
        assert!(inv.xi[3 * nc..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn variable_change_round_trips() {
        let im = clamped_blocks(3);
        let geom = ContactGeometry::new(&im).unwrap();
        let nc = geom.num_nodes();
        let v0 = y_to_awb(&vec![0.0; 4 * nc], &geom);
        assert!(v0.alpha.iter().chain(&v0.beta).chain(&v0.w).all(|&x| x == 0.0));
        let mut y = vec![0.0; 4 * nc];
        y[..2 * nc].iter_mut().for_each(|v| *v = 0.7);
        let v = y_to_awb(&y, &geom);
        assert!(v.alpha.iter().all(|&a| a == 0.7));
        assert!(geom.split(&v.w).0.iter().all(|&t| t == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let y = random(&mut rng, 4 * nc, 1.0);
            let back = awb_to_y(&y_to_awb(&y, &geom), &geom);
            let err = y.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-14, "round trip error {err}");
        }
        let det = |m: [[f64; 2]; 2]| m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert!(det(MoscoTransform::FRICTION_BLOCK) != 0.0 && det(MoscoTransform::NORMAL_BLOCK) != 0.0);
    }

    #[test]
    fn energy_of_zero_state_and_single_beta() {
        let im = clamped_blocks(3);
        let geom = ContactGeometry::new(&im).unwrap();
        let op = SteklovOperator::new(&im).unwrap();
        let nc = geom.num_nodes();
        let (tau, chi) = (0.2, 0.6);
        let p = IncrementalProblem::new(&op, &geom, &law(), &vec![0.0; 2 * nc], tau, chi).unwrap();
        let zero = Awb { alpha: vec![0.0; nc], beta: vec![0.0; nc], w: vec![0.0; 2 * nc] };
        assert_eq!(p.energy(&zero).unwrap(), 0.0);
        let mut v = zero.clone();
        v.beta[1] = 0.03;
        let expect = 0.5 * tau * law().k_g / (tau + chi) * geom.mass[(1, 1)] * 0.03 * 0.03;
        assert!((p.energy(&v).unwrap() - expect).abs() < 1e-15 * expect.max(1.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let im = clamped_blocks(3);
        let geom = ContactGeometry::new(&im).unwrap();
        let mut op = SteklovOperator::new(&im).unwrap();
        op.set_loads(&pressed(&im, 0.5)).unwrap();
        let nc = geom.num_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let z_prev = random(&mut rng, 2 * nc, 1e-2);
        let p = IncrementalProblem::new(&op, &geom, &law(), &z_prev, 0.1, 0.4).unwrap();
        let flat = |a: &Awb| -> Vec<f64> { a.alpha.iter().chain(&a.beta).chain(&a.w).copied().collect() };
        let unflat = |x: &[f64]| Awb { alpha: x[..nc].to_vec(), beta: x[nc..2 * nc].to_vec(), w: x[2 * nc..].to_vec() };
        for _ in 0..3 {
            let v = random_awb(&mut rng, nc);
            let gv = flat(&p.gradient(&v).unwrap());
            let x = flat(&v);
            let h = 1e-6;
            let fdv: Vec<f64> = (0..x.len())
                .map(|i| {
                    let (mut a, mut b) = (x.clone(), x.clone());
                    a[i] += h;
                    b[i] -= h;
                    (p.energy(&unflat(&a)).unwrap() - p.energy(&unflat(&b)).unwrap()) / (2.0 * h)
                })
                .collect();
            let scale = gv.iter().map(|x| x.abs()).fold(0.0, f64::max);
            let err = gv.iter().zip(&fdv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-6 * scale, "gradient mismatch {err} at scale {scale}");
        }
    }

    #[test]
    fn qp_operator_is_the_hessian_and_symmetric() {
        let im = clamped_blocks(3);
        let geom = ContactGeometry::new(&im).unwrap();
        let mut op = SteklovOperator::new(&im).unwrap();
        op.set_loads(&pressed(&im, 0.2)).unwrap();
        let nc = geom.num_nodes();
        assert_eq!(nc, 4);
        let p = IncrementalProblem::new(&op, &geom, &law(), &vec![0.0; 2 * nc], 0.1, 0.4).unwrap();
        let a = p.dense_matrix().unwrap();
        let n = p.dim();
        assert!(p.apply(&vec![0.0; n]).unwrap().iter().all(|&v| v == 0.0));
        let f = |y: &[f64]| p.energy(&y_to_awb(y, &geom)).unwrap();
        let y0 = vec![1e-3; n];
        let h = 1e-4;
        let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..n {
            for j in 0..n {
                let at = |si: f64, sj: f64| {
                    let mut y = y0.clone();
                    y[i] += si * h;
                    y[j] += sj * h;
                    f(&y)
                };
                let fd = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
                assert!((fd - a[(i, j)]).abs() <= 1e-6 * scale, "entry ({i},{j}): {fd} vs {}", a[(i, j)]);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let (y1, y2) = (random(&mut rng, n, 1.0), random(&mut rng, n, 1.0));
            let l = dot(&p.apply(&y1).unwrap(), &y2);
            let r = dot(&p.apply(&y2).unwrap(), &y1);
            assert!((l - r).abs() <= 1e-9 * l.abs().max(r.abs()));
            assert!(dot(&p.apply(&y1).unwrap(), &y1) > 0.0);
        }
        // value of the QP form equals the functional
        let b = p.linear_term();
        let y = random(&mut rng, n, 1e-2);
        let q = 0.5 * dot(&y, &p.apply(&y).unwrap()) - dot(&b, &y) + p.constant();
        assert!((q - f(&y)).abs() <= 1e-12 * q.abs().max(1e-12));
    }

    #[test]
    fn functional_is_convex_along_segments() {
        let im = clamped_blocks(2);
        let geom = ContactGeometry::new(&im).unwrap();
        let mut op = SteklovOperator::new(&im).unwrap();
        op.set_loads(&pressed(&im, 1.0)).unwrap();
        let nc = geom.num_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = IncrementalProblem::new(&op, &geom, &law(), &random(&mut rng, 2 * nc, 1e-2), 0.05, 0.1).unwrap();
        for _ in 0..50 {
            let (a, b) = (random(&mut rng, 4 * nc, 0.1), random(&mut rng, 4 * nc, 0.1));
            let lam: f64 = rng.gen_range(0.0..1.0);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lam * x + (1.0 - lam) * y).collect();
            let e = |y: &[f64]| p.energy(&y_to_awb(y, &geom)).unwrap();
            let (fa, fb, fm) = (e(&a), e(&b), e(&mid));
            let scale = fa.abs().max(fb.abs()).max(1.0);
            assert!(fm <= lam * fa + (1.0 - lam) * fb + 1e-12 * scale);
        }
    }

    #[test]
    fn qp_minimizer_is_tight_and_matches_enumeration() {
        let im = clamped_blocks(2);
        let geom = ContactGeometry::new(&im).unwrap();
        let mut op = SteklovOperator::new(&im).unwrap();
        op.set_loads(&pressed(&im, 3.0)).unwrap();
        let nc = geom.num_nodes();
        // previous step in contact everywhere so the friction weight is positive
        let z_prev = geom.join(&vec![1e-3; nc], &vec![-2e-3; nc]);
        let p = IncrementalProblem::new(&op, &geom, &law(), &z_prev, 0.1, 0.05).unwrap();
        let qp = QpProblem::new(&p, p.linear_term(), p.constant(), p.bounds.xi.clone()).unwrap();
        let s = mprgp_solve(&qp, &qp.project(&vec![0.0; p.dim()]), &MprgpOptions { rtol: 1e-12, ..Default::default() }).unwrap();
        assert!(kkt_violation(&s.y, &s.gradient, &qp.lower) <= 10.0 * s.tolerance);
        let y = p.tighten(&s.y);
        let v = y_to_awb(&y, &geom);
        let scale = v.w.iter().map(|x| x.abs()).fold(1e-12, f64::max);
        assert!(p.tightness_violation(&v) <= 1e-8 * scale);
        assert!(p.tightness_violation(&y_to_awb(&s.y, &geom)) <= 1e-6 * scale);
        let oracle = active_set_oracle(&p.dense_matrix().unwrap(), &qp.b, &qp.lower).unwrap();
        let err = y.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let size = oracle.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(err <= 1e-6 * size, "deviation {err} at size {size}");
    }
}
