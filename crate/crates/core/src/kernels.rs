//! Plane-strain Kelvin kernels and Galerkin double integrals over element pairs.
//!
//! Index convention: `T[k][l](x, y; n_y)` is the traction component `l` at `y`
//! caused by a unit point force in direction `k` at `x`, so that the
//! displacement identity reads `½ v_k(x) = ∫ U_kl p_l − ∫ T_kl v_l`.

use crate::error::{Error, Result};
use crate::mesh::{dot, norm, sub, BoundaryMesh, Frame, Material, Point};
use crate::quadrature::{gauss8, graded_rule};
use std::f64::consts::PI;

pub type Tensor2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Weakly singular displacement kernel.
    U,
    /// Strongly singular traction kernel, normal at the source point.
    T,
    /// Transposed traction kernel, normal at the collocation point.
    TStar,
    /// Hypersingular kernel, evaluated in regularized form.
    S,
}

/// Shape family: tractions use φ (jumps allowed at junctions), displacements ψ.
/// Both are linear on each element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Phi,
    Psi,
}

/// Double integrals of one element pair, indexed `[a][b][k][l]` with `a` the
/// test shape on the first element, `b` the trial shape on the second and
/// `k`, `l` the vector components.
pub type GalerkinBlock = [[Tensor2; 2]; 2];

fn zero_block() -> GalerkinBlock {
    [[[[0.0; 2]; 2]; 2]; 2]
}

fn u_constants(mat: &Material) -> (f64, f64) {
    let g = mat.shear_modulus();
    let nu = mat.poisson_ratio;
    let c = 1.0 / (8.0 * PI * g * (1.0 - nu));
    (c * mat.kolosov(), c)
}

/// Constant of the regularized hypersingular kernel `c (ln r δ − r,k r,l)`.
fn s_constant(mat: &Material) -> f64 {
    mat.shear_modulus() / (2.0 * PI * (1.0 - mat.poisson_ratio))
}

pub fn kelvin_u(x: Point, y: Point, mat: &Material) -> Result<Tensor2> {
    let r = sub(y, x);
    let rr = norm(r);
    if rr == 0.0 {
        return Err(Error::Unsupported("kelvin_u at coincident points".into()));
    }
    let (cl, cr) = u_constants(mat);
    let mut u = [[0.0; 2]; 2];
    for k in 0..2 {
        for l in 0..2 {
            u[k][l] = cr * r[k] * r[l] / (rr * rr);
        }
        u[k][k] -= cl * rr.ln();
    }
    Ok(u)
}

pub fn kelvin_t(x: Point, y: Point, n_y: Point, mat: &Material) -> Result<Tensor2> {
    let r = sub(y, x);
    let rr = norm(r);
    if rr == 0.0 {
        return Err(Error::Unsupported("kelvin_t at coincident points".into()));
    }
    let nu = mat.poisson_ratio;
    let d = [r[0] / rr, r[1] / rr];
    let drdn = dot(d, n_y);
    let c = -1.0 / (4.0 * PI * (1.0 - nu) * rr);
    let mut t = [[0.0; 2]; 2];
    for k in 0..2 {
        for l in 0..2 {
            let delta = if k == l { 1.0 } else { 0.0 };
            t[k][l] = c * (drdn * ((1.0 - 2.0 * nu) * delta + 2.0 * d[k] * d[l])
                - (1.0 - 2.0 * nu) * (d[k] * n_y[l] - d[l] * n_y[k]));
        }
    }
    Ok(t)
}

/// Local coordinates of a point relative to a straight segment.
struct SegmentView {
    /// Parameter range `u = s − a` over the segment.
    u1: f64,
    u2: f64,
    a: f64,
    h: f64,
    len: f64,
    t: Point,
    n: Point,
}

impl SegmentView {
    fn new(x: Point, y0: Point, f: &Frame, on_line: bool) -> Self {
        let d = sub(x, y0);
        let a = dot(d, f.tangent);
        let mut h = dot(d, f.normal);
        if on_line || h.abs() <= 1e-13 * f.length {
            h = 0.0;
        }
        SegmentView { u1: -a, u2: f.length - a, a, h, len: f.length, t: f.tangent, n: f.normal }
    }

    /// ∫ h/(u²+h²) du, the angle subtended by the segment (0 on its line).
    fn theta(&self) -> f64 {
        if self.h == 0.0 {
            0.0
        } else {
            (self.u2 / self.h).atan() - (self.u1 / self.h).atan()
        }
    }

    fn r2(&self, u: f64) -> f64 {
        u * u + self.h * self.h
    }

    fn ln_r(&self, u: f64) -> f64 {
        0.5 * self.r2(u).ln()
    }

    /// Moments [∫ f du, ∫ u f du] for the shape-weighted integrals, turned
    /// into [∫ N1 f ds, ∫ N2 f ds].
    fn shapes(&self, m0: f64, m1: f64) -> [f64; 2] {
        let n2 = (m1 + self.a * m0) / self.len;
        [m0 - n2, n2]
    }
}

fn xlogx_term(u: f64, lnr: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u * lnr
    }
}

fn r2logr(r2: f64) -> f64 {
    if r2 == 0.0 {
        0.0
    } else {
        0.25 * r2 * r2.ln()
    }
}

/// ∫ N_b(y) [−c_ln ln r δ + c_rr r,k r,l] dy over a segment, for b = 0, 1.
fn inner_log_rr(v: &SegmentView, c_ln: f64, c_rr: f64) -> [Tensor2; 2] {
    let (u1, u2, h) = (v.u1, v.u2, v.h);
    let th = v.theta();
    let (l1, l2) = (v.ln_r(u1), v.ln_r(u2));
    // ∫ ln r, ∫ u ln r
    let lg0 = (xlogx_term(u2, l2) - u2) - (xlogx_term(u1, l1) - u1) + h * th;
    let lg1 = (r2logr(v.r2(u2)) - u2 * u2 / 4.0) - (r2logr(v.r2(u1)) - u1 * u1 / 4.0);
    let q1 = if h == 0.0 { safe_log_diff(u1, u2) } else { l2 - l1 };
    let du = u2 - u1;
    let du2 = u2 * u2 - u1 * u1;
    // ∫ u²/r², ∫ h u/r², ∫ h²/r² and their u-weighted versions
    let uu0 = du - h * th;
    let hu0 = h * q1;
    let hh0 = h * th;
    let uu1 = 0.5 * du2 - h * h * q1;
    let hu1 = h * (du - h * th);
    let hh1 = h * h * q1;
    let lg = v.shapes(lg0, lg1);
    let uu = v.shapes(uu0, uu1);
    let hu = v.shapes(hu0, hu1);
    let hh = v.shapes(hh0, hh1);
    let (t, n) = (v.t, v.n);
    let mut out = [[[0.0; 2]; 2]; 2];
    for b in 0..2 {
        for k in 0..2 {
            for l in 0..2 {
                let rr = uu[b] * t[k] * t[l] - hu[b] * (t[k] * n[l] + n[k] * t[l]) + hh[b] * n[k] * n[l];
                out[b][k][l] = c_rr * rr;
            }
            out[b][k][k] -= c_ln * lg[b];
        }
    }
    out
}

/// ln|u2| − ln|u1| on the segment line, with the principal value when the
/// point lies inside the segment.
fn safe_log_diff(u1: f64, u2: f64) -> f64 {
    let a = if u2 == 0.0 { 0.0 } else { u2.abs().ln() };
    let b = if u1 == 0.0 { 0.0 } else { u1.abs().ln() };
    a - b
}

/// ∫ N_b(y) T_kl(x, y; n_y) dy over a segment, principal value on its line.
fn inner_t(v: &SegmentView, mat: &Material) -> [Tensor2; 2] {
    let nu = mat.poisson_ratio;
    let (u1, u2, h) = (v.u1, v.u2, v.h);
    let th = v.theta();
    let q1 = if h == 0.0 { safe_log_diff(u1, u2) } else { v.ln_r(u2) - v.ln_r(u1) };
    let br = |f: &dyn Fn(f64) -> f64| f(u2) - f(u1);
    let (g0, g1);
    let (a2_0, a1_0, a0_0, a2_1, a1_1, a0_1);
    if h == 0.0 {
        g0 = 0.0;
        g1 = 0.0;
        a2_0 = 0.0;
        a1_0 = 0.0;
        a0_0 = 0.0;
        a2_1 = 0.0;
        a1_1 = 0.0;
        a0_1 = 0.0;
    } else {
        let hu_r2 = br(&|u| h * u / v.r2(u));
        let inv_r2 = br(&|u| 1.0 / v.r2(u));
        // ∫ h/r², ∫ h u/r²
        g0 = th;
        g1 = h * q1;
        // ∫ h u²/r⁴, ∫ h² u/r⁴, ∫ h³/r⁴
        a2_0 = 0.5 * th - 0.5 * hu_r2;
        a1_0 = -0.5 * h * h * inv_r2;
        a0_0 = 0.5 * hu_r2 + 0.5 * th;
        // u-weighted: ∫ h u³/r⁴, ∫ h² u²/r⁴, ∫ h³ u/r⁴
        a2_1 = h * q1 + 0.5 * h * h * h * inv_r2;
        a1_1 = h * a2_0;
        a0_1 = -0.5 * h * h * h * inv_r2;
    }
    // ∫ u/r² and ∫ u²/r²
    let j0 = q1;
    let j1 = (u2 - u1) - h * th;
    let g = v.shapes(g0, g1);
    let a2 = v.shapes(a2_0, a2_1);
    let a1 = v.shapes(a1_0, a1_1);
    let a0 = v.shapes(a0_0, a0_1);
    let j = v.shapes(j0, j1);
    let (t, n) = (v.t, v.n);
    let c = -1.0 / (4.0 * PI * (1.0 - nu));
    let mut out = [[[0.0; 2]; 2]; 2];
    for b in 0..2 {
        for k in 0..2 {
            for l in 0..2 {
                let delta = if k == l { 1.0 } else { 0.0 };
                let rr = a2[b] * t[k] * t[l] - a1[b] * (t[k] * n[l] + n[k] * t[l]) + a0[b] * n[k] * n[l];
                out[b][k][l] = c
                    * (-(1.0 - 2.0 * nu) * delta * g[b] - 2.0 * rr
                        - (1.0 - 2.0 * nu) * (t[k] * n[l] - t[l] * n[k]) * j[b]);
            }
        }
    }
    out
}

/// Geometric relation between two elements of the same mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairRelation {
    Coincident,
    /// Elements share a node; local coordinates of the shared node on each.
    Adjacent { xi_e: f64, xi_f: f64 },
    /// Distinct elements; `gap` is the minimum distance between them.
    Separated { gap: f64 },
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> (f64, f64) {
    let d = sub(b, a);
    let l2 = dot(d, d);
    let t = (dot(sub(p, a), d) / l2).clamp(0.0, 1.0);
    let q = [a[0] + t * d[0], a[1] + t * d[1]];
    (norm(sub(p, q)), t)
}

pub fn pair_relation(mesh: &BoundaryMesh, e: usize, f: usize) -> PairRelation {
    if e == f {
        return PairRelation::Coincident;
    }
    let [ei, ej] = mesh.elements[e];
    let [fi, fj] = mesh.elements[f];
    let shared = |ne: usize| -> Option<f64> {
        if ne == fi {
            Some(0.0)
        } else if ne == fj {
            Some(1.0)
        } else {
            None
        }
    };
    if let Some(xf) = shared(ei) {
        return PairRelation::Adjacent { xi_e: 0.0, xi_f: xf };
    }
    if let Some(xf) = shared(ej) {
        return PairRelation::Adjacent { xi_e: 1.0, xi_f: xf };
    }
    let [a, b] = mesh.endpoints(e);
    let [c, d] = mesh.endpoints(f);
    let gap = point_segment_distance(a, c, d)
        .0
        .min(point_segment_distance(b, c, d).0)
        .min(point_segment_distance(c, a, b).0)
        .min(point_segment_distance(d, a, b).0);
    PairRelation::Separated { gap }
}

/// Number of dyadic subdivision levels for a separated pair.
fn subdivision_levels(gap: f64, lmax: f64) -> Option<u32> {
    if gap >= 2.0 * lmax {
        Some(0)
    } else if gap >= 0.5 * lmax {
        Some((2.0 * lmax / gap).log2().ceil() as u32)
    } else {
        None
    }
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Tensor Gauss 8×8 over sub-element pairs, for pairs away from each other.
fn regular_block<const K: usize, F>(
    pe: [Point; 2],
    pf: [Point; 2],
    le: f64,
    lf: f64,
    levels: u32,
    kernel: F,
) -> [GalerkinBlock; K]
where
    F: Fn(Point, Point) -> [Tensor2; K],
{
    let (gx, gw) = gauss8();
    let parts = 1usize << levels;
    let h = 1.0 / parts as f64;
    let mut out = [zero_block(); K];
    for pi in 0..parts {
        for pj in 0..parts {
            for (xi, wi) in gx.iter().zip(gw) {
                let se = (pi as f64 + xi) * h;
                let x = lerp(pe[0], pe[1], se);
                let na = [1.0 - se, se];
                for (xj, wj) in gx.iter().zip(gw) {
                    let sf = (pj as f64 + xj) * h;
                    let y = lerp(pf[0], pf[1], sf);
                    let nb = [1.0 - sf, sf];
                    let kv = kernel(x, y);
                    let w = wi * wj * h * h * le * lf;
                    for (o, kv) in out.iter_mut().zip(&kv) {
                        for a in 0..2 {
                            for b in 0..2 {
                                let s = w * na[a] * nb[b];
                                for k in 0..2 {
                                    for l in 0..2 {
                                        o[a][b][k][l] += s * kv[k][l];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Outer graded quadrature on the first element with analytic inner
/// integrals over the second.
fn semi_analytic_block<const K: usize, F>(pe: [Point; 2], le: f64, hot: &[f64], inner: F) -> [GalerkinBlock; K]
where
    F: Fn(Point) -> [[Tensor2; 2]; K],
{
    let mut out = [zero_block(); K];
    for (xi, w) in graded_rule(hot) {
        let x = lerp(pe[0], pe[1], xi);
        let na = [1.0 - xi, xi];
        let iv = inner(x);
        for (o, iv) in out.iter_mut().zip(&iv) {
            for a in 0..2 {
                for b in 0..2 {
                    let s = w * le * na[a];
                    for k in 0..2 {
                        for l in 0..2 {
                            o[a][b][k][l] += s * iv[b][k][l];
                        }
                    }
                }
            }
        }
    }
    out
}

fn closest_param(p: [Point; 2], q: [Point; 2]) -> f64 {
    // parameter on p closest to segment q, sampled finely then refined
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=64 {
        let t = i as f64 / 64.0;
        let (d, _) = point_segment_distance(lerp(p[0], p[1], t), q[0], q[1]);
        if d < best.0 {
            best = (d, t);
        }
    }
    let (mut lo, mut hi) = ((best.1 - 1.0 / 64.0).max(0.0), (best.1 + 1.0 / 64.0).min(1.0));
    for _ in 0..60 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let d1 = point_segment_distance(lerp(p[0], p[1], m1), q[0], q[1]).0;
        let d2 = point_segment_distance(lerp(p[0], p[1], m2), q[0], q[1]).0;
        if d1 < d2 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    0.5 * (lo + hi)
}

/// Galerkin integral of one kernel over an element pair of one mesh.
pub fn galerkin_integral(
    mesh: &BoundaryMesh,
    e: usize,
    f: usize,
    kind: KernelKind,
    shapes: (Shape, Shape),
    mat: &Material,
) -> Result<GalerkinBlock> {
    let expected = match kind {
        KernelKind::U => (Shape::Phi, Shape::Phi),
        KernelKind::T => (Shape::Phi, Shape::Psi),
        KernelKind::TStar => (Shape::Psi, Shape::Phi),
        KernelKind::S => (Shape::Psi, Shape::Psi),
    };
    if shapes != expected {
        return Err(Error::Unsupported(format!("{kind:?} with test/trial families {shapes:?}")));
    }
    let rel = pair_relation(mesh, e, f);
    if let PairRelation::Separated { gap } = rel {
        if gap <= 1e-12 * mesh.frame(e).length.max(mesh.frame(f).length) {
            return Err(Error::Unsupported(format!("elements {e} and {f} overlap without sharing a node")));
        }
    }
    Ok(match kind {
        KernelKind::U => pair_u(mesh, e, f, rel, mat),
        KernelKind::T => pair_t(mesh, e, f, rel, mat),
        KernelKind::TStar => {
            let t = pair_t(mesh, f, e, pair_relation(mesh, f, e), mat);
            transpose_pair(&t)
        }
        KernelKind::S => pair_s(mesh, e, f, rel, mat),
    })
}

/// Swaps the roles of the two elements and of the two components.
pub fn transpose_pair(b: &GalerkinBlock) -> GalerkinBlock {
    let mut out = zero_block();
    for a in 0..2 {
        for c in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[a][c][k][l] = b[c][a][l][k];
                }
            }
        }
    }
    out
}

fn hot_points(rel: PairRelation, mesh: &BoundaryMesh, e: usize, f: usize) -> Vec<f64> {
    match rel {
        PairRelation::Coincident => vec![0.0, 1.0],
        PairRelation::Adjacent { xi_e, .. } => vec![xi_e],
        PairRelation::Separated { .. } => {
            // the inner integral varies fastest where x passes the ends of f
            let (pe, pf) = (mesh.endpoints(e), mesh.endpoints(f));
            let d = sub(pe[1], pe[0]);
            let mut hot = vec![closest_param(pe, pf)];
            hot.extend(pf.iter().map(|q| dot(sub(*q, pe[0]), d) / dot(d, d)).filter(|t| *t > 1e-6 && *t < 1.0 - 1e-6));
            hot
        }
    }
}

fn near_levels(mesh: &BoundaryMesh, e: usize, f: usize, rel: PairRelation) -> Option<u32> {
    let lmax = mesh.frame(e).length.max(mesh.frame(f).length);
    match rel {
        PairRelation::Separated { gap } => subdivision_levels(gap, lmax),
        _ => None,
    }
}

/// The logarithmic part `−ln r δ` and the dyadic part `r,k r,l` of a pair,
/// from which both U and the regularized S are combined.
fn log_rr_parts(mesh: &BoundaryMesh, e: usize, f: usize, rel: PairRelation) -> [GalerkinBlock; 2] {
    let (fe, ff) = (mesh.frame(e), mesh.frame(f));
    let (pe, pf) = (mesh.endpoints(e), mesh.endpoints(f));
    match near_levels(mesh, e, f, rel) {
        Some(lv) => regular_block(pe, pf, fe.length, ff.length, lv, |x, y| {
            let r = sub(y, x);
            let r2 = dot(r, r);
            let lnr = 0.5 * r2.ln();
            let mut lg = [[0.0; 2]; 2];
            let mut rr = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    rr[i][j] = r[i] * r[j] / r2;
                }
                lg[i][i] = -lnr;
            }
            [lg, rr]
        }),
        None => {
            let on_line = rel == PairRelation::Coincident;
            semi_analytic_block(pe, fe.length, &hot_points(rel, mesh, e, f), |x| {
                let v = SegmentView::new(x, pf[0], &ff, on_line);
                [inner_log_rr(&v, 1.0, 0.0), inner_log_rr(&v, 0.0, 1.0)]
            })
        }
    }
}

fn combine(parts: &[GalerkinBlock; 2], c_ln: f64, c_rr: f64) -> GalerkinBlock {
    let mut out = zero_block();
    for a in 0..2 {
        for b in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[a][b][k][l] = c_ln * parts[0][a][b][k][l] + c_rr * parts[1][a][b][k][l];
                }
            }
        }
    }
    out
}

fn pair_u(mesh: &BoundaryMesh, e: usize, f: usize, rel: PairRelation, mat: &Material) -> GalerkinBlock {
    let (cl, cr) = u_constants(mat);
    combine(&log_rr_parts(mesh, e, f, rel), cl, cr)
}

fn pair_t(mesh: &BoundaryMesh, e: usize, f: usize, rel: PairRelation, mat: &Material) -> GalerkinBlock {
    let (fe, ff) = (mesh.frame(e), mesh.frame(f));
    let (pe, pf) = (mesh.endpoints(e), mesh.endpoints(f));
    let [t] = match near_levels(mesh, e, f, rel) {
        Some(lv) => regular_block(pe, pf, fe.length, ff.length, lv, |x, y| {
            [kelvin_t(x, y, ff.normal, mat).expect("separated elements")]
        }),
        None => {
            let on_line = rel == PairRelation::Coincident;
            semi_analytic_block(pe, fe.length, &hot_points(rel, mesh, e, f), |x| {
                [inner_t(&SegmentView::new(x, pf[0], &ff, on_line), mat)]
            })
        }
    };
    t
}

/// Regularized hypersingular block: tangential derivatives of the linear
/// shapes paired through a weakly singular kernel.
fn s_from_parts(mesh: &BoundaryMesh, e: usize, f: usize, parts: &[GalerkinBlock; 2], mat: &Material) -> GalerkinBlock {
    let c = s_constant(mat);
    let base = combine(parts, -c, -c);
    let (le, lf) = (mesh.frame(e).length, mesh.frame(f).length);
    // summing over both shapes recovers the constant-shape integral
    let mut k0 = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    k0[k][l] += base[a][b][k][l];
                }
            }
        }
    }
    let de = [-1.0 / le, 1.0 / le];
    let df = [-1.0 / lf, 1.0 / lf];
    let mut out = zero_block();
    for a in 0..2 {
        for b in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[a][b][k][l] = de[a] * df[b] * k0[k][l];
                }
            }
        }
    }
    out
}

fn pair_s(mesh: &BoundaryMesh, e: usize, f: usize, rel: PairRelation, mat: &Material) -> GalerkinBlock {
    s_from_parts(mesh, e, f, &log_rr_parts(mesh, e, f, rel), mat)
}

/// All kernel blocks of one element pair, computed together.
#[derive(Debug, Clone, Copy)]
pub struct PairBlocks {
    pub u: GalerkinBlock,
    pub t: GalerkinBlock,
    pub s: GalerkinBlock,
}

pub fn pair_blocks(mesh: &BoundaryMesh, e: usize, f: usize, mat: &Material) -> PairBlocks {
    let rel = pair_relation(mesh, e, f);
    let parts = log_rr_parts(mesh, e, f, rel);
    let (cl, cr) = u_constants(mat);
    PairBlocks {
        u: combine(&parts, cl, cr),
        t: pair_t(mesh, e, f, rel, mat),
        s: s_from_parts(mesh, e, f, &parts, mat),
    }
}
