//! Boundary meshes of linear elements, part tagging and contact pairing.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Isotropic plane-strain material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    /// Relaxation time of the Kelvin-Voigt damper, shared by both bodies.
    pub relaxation_time: f64,
}

impl Material {
    pub fn new(young_modulus: f64, poisson_ratio: f64, relaxation_time: f64) -> Result<Self> {
        let m = Material { young_modulus, poisson_ratio, relaxation_time };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.young_modulus > 0.0) {
            return Err(Error::InvalidSpec(format!("young_modulus must be > 0, got {}", self.young_modulus)));
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return Err(Error::InvalidSpec(format!("poisson_ratio must lie in [0, 0.5), got {}", self.poisson_ratio)));
        }
        if !(self.relaxation_time >= 0.0) {
            return Err(Error::InvalidSpec(format!("relaxation_time must be >= 0, got {}", self.relaxation_time)));
        }
        Ok(())
    }

    pub fn shear_modulus(&self) -> f64 {
        self.young_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }

    /// Kolosov constant for plane strain.
    pub fn kolosov(&self) -> f64 {
        3.0 - 4.0 * self.poisson_ratio
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn letter(self) -> char {
        match self {
            Side::A => 'A',
            Side::B => 'B',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Part {
    Dirichlet,
    Neumann,
    Contact,
}

/// Boundary condition type of an element, one entry per displacement component.
///
/// Mixed tags such as `[Dirichlet, Neumann]` model rollers. Contact elements
/// carry `Contact` in both components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementTag(pub [Part; 2]);

impl ElementTag {
    pub const D: ElementTag = ElementTag([Part::Dirichlet, Part::Dirichlet]);
    pub const N: ElementTag = ElementTag([Part::Neumann, Part::Neumann]);
    pub const C: ElementTag = ElementTag([Part::Contact, Part::Contact]);

    pub fn is_contact(&self) -> bool {
        self.0[0] == Part::Contact
    }

    pub fn has_dirichlet(&self) -> bool {
        self.0.contains(&Part::Dirichlet)
    }

    fn validate(&self) -> Result<()> {
        let c = self.0.iter().filter(|p| **p == Part::Contact).count();
        if c == 1 {
            return Err(Error::InvalidSpec("contact tag must apply to both components".into()));
        }
        Ok(())
    }
}

/// Closed anti-clockwise polyline of straight two-node elements.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMesh {
    pub label: Side,
    pub nodes: Vec<Point>,
    pub elements: Vec<[usize; 2]>,
    pub tags: Vec<ElementTag>,
}

/// Unit tangent, outward unit normal and length of one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub tangent: Point,
    pub normal: Point,
    pub length: f64,
}

/// Geometric refinement of a polyline edge.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grading {
    /// Length of the first element, next to the start vertex.
    #[serde(default)]
    pub start: Option<f64>,
    /// Length of the last element, next to the end vertex.
    #[serde(default)]
    pub end: Option<f64>,
}

/// Subdivision of one polyline edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSpec {
    pub tag: ElementTag,
    pub divisions: usize,
    pub grading: Grading,
}

impl EdgeSpec {
    pub fn uniform(tag: ElementTag, divisions: usize) -> Self {
        EdgeSpec { tag, divisions, grading: Grading::default() }
    }
}

/// Lengths of `n` elements in geometric progression summing to `total`,
/// starting from `h0`.
fn geometric_lengths(total: f64, n: usize, h0: f64) -> Result<Vec<f64>> {
    if n == 1 {
        return Ok(vec![total]);
    }
    if !(h0 > 0.0) || h0 * n as f64 > total * (1.0 + 1e-12) {
        return Err(Error::InvalidSpec(format!(
            "graded length {h0} incompatible with {n} divisions of an edge of length {total}"
        )));
    }
    let sum = |q: f64| -> f64 {
        if (q - 1.0).abs() < 1e-12 {
            h0 * n as f64
        } else {
            h0 * (q.powi(n as i32) - 1.0) / (q - 1.0)
        }
    };
    let (mut lo, mut hi) = (1.0, 2.0);
    while sum(hi) < total {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) < total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    let mut h: Vec<f64> = (0..n).map(|i| h0 * q.powi(i as i32)).collect();
    let s: f64 = h.iter().sum();
    h.iter_mut().for_each(|x| *x *= total / s);
    Ok(h)
}

fn edge_parameters(total: f64, spec: &EdgeSpec) -> Result<Vec<f64>> {
    let n = spec.divisions;
    let lengths = match (spec.grading.start, spec.grading.end) {
        (None, None) => vec![total / n as f64; n],
        (Some(h0), None) => geometric_lengths(total, n, h0)?,
        (None, Some(h1)) => {
            let mut h = geometric_lengths(total, n, h1)?;
            h.reverse();
            h
        }
        (Some(h0), Some(h1)) => {
            if n < 2 {
                return Err(Error::InvalidSpec("two-sided grading needs at least two divisions".into()));
            }
            let n0 = n / 2;
            let n1 = n - n0;
            // split the edge so both halves end with comparable element sizes
            let w0 = h0 * n0 as f64;
            let w1 = h1 * n1 as f64;
            let t0 = total * w0 / (w0 + w1);
            let mut a = geometric_lengths(t0, n0, h0)?;
            let mut b = geometric_lengths(total - t0, n1, h1)?;
            b.reverse();
            a.append(&mut b);
            a
        }
    };
    let mut t = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    t.push(0.0);
    for h in &lengths[..n - 1] {
        acc += h;
        t.push(acc / total);
    }
    t.push(1.0);
    Ok(t)
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(sub(p2, p1), sub(q1, p1));
    let d2 = cross(sub(p2, p1), sub(q2, p1));
    let d3 = cross(sub(q2, q1), sub(p1, q1));
    let d4 = cross(sub(q2, q1), sub(p2, q1));
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    0.5 * (0..n).map(|i| cross(poly[i], poly[(i + 1) % n])).sum::<f64>()
}

fn validate_polyline(poly: &[Point]) -> Result<()> {
    let n = poly.len();
    if n < 3 {
        return Err(Error::OpenPolyline);
    }
    for i in 0..n {
        if norm(sub(poly[(i + 1) % n], poly[i])) == 0.0 {
            return Err(Error::DegenerateElement(i));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return Err(Error::SelfIntersection(i, j));
            }
        }
    }
    let area = signed_area(poly);
    if area <= 0.0 {
        return Err(Error::Clockwise(area));
    }
    Ok(())
}

/// Builds a mesh from the vertices of a closed polyline (first vertex not
/// repeated) and one edge specification per polyline edge.
pub fn build_mesh(label: Side, polyline: &[Point], edges: &[EdgeSpec]) -> Result<BoundaryMesh> {
    let mut poly = polyline.to_vec();
    if poly.len() > 1 && poly.first() == poly.last() {
        poly.pop();
    }
    if edges.len() != poly.len() {
        return Err(Error::InvalidSpec(format!(
            "{} edge specs for {} polyline edges",
            edges.len(),
            poly.len()
        )));
    }
    validate_polyline(&poly)?;
    let n = poly.len();
    let mut nodes = Vec::new();
    let mut tags = Vec::new();
    for (i, spec) in edges.iter().enumerate() {
        if spec.divisions == 0 {
            return Err(Error::InvalidSpec(format!("edge {i} has zero divisions")));
        }
        spec.tag.validate()?;
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let total = norm(sub(b, a));
        let t = edge_parameters(total, spec)?;
        for &ti in &t[..t.len() - 1] {
            nodes.push([a[0] + ti * (b[0] - a[0]), a[1] + ti * (b[1] - a[1])]);
            tags.push(spec.tag);
        }
    }
    let m = nodes.len();
    let elements = (0..m).map(|i| [i, (i + 1) % m]).collect();
    let mesh = BoundaryMesh { label, nodes, elements, tags };
    mesh.validate()?;
    Ok(mesh)
}

impl BoundaryMesh {
    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_frame(&self, e: usize) -> Result<Frame> {
        let [i, j] = self.elements[e];
        let d = sub(self.nodes[j], self.nodes[i]);
        let length = norm(d);
        if !(length > 0.0) {
            return Err(Error::DegenerateElement(e));
        }
        let tangent = [d[0] / length, d[1] / length];
        Ok(Frame { tangent, normal: [tangent[1], -tangent[0]], length })
    }

    pub fn frame(&self, e: usize) -> Frame {
        self.element_frame(e).expect("validated mesh has no degenerate elements")
    }

    pub fn endpoints(&self, e: usize) -> [Point; 2] {
        let [i, j] = self.elements[e];
        [self.nodes[i], self.nodes[j]]
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.num_elements()).map(|e| self.frame(e).length).sum()
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.nodes)
    }

    /// Checks the invariants listed on the type.
    pub fn validate(&self) -> Result<()> {
        let m = self.elements.len();
        if m < 3 || self.tags.len() != m {
            return Err(Error::OpenPolyline);
        }
        for (e, el) in self.elements.iter().enumerate() {
            if el[0] != e || el[1] != (e + 1) % m {
                return Err(Error::InvalidSpec("elements must form one closed chain in node order".into()));
            }
            self.element_frame(e)?;
            self.tags[e].validate()?;
        }
        validate_polyline(&self.nodes)?;
        if !self.tags.iter().any(|t| t.has_dirichlet()) {
            return Err(Error::NoDirichlet);
        }
        let mut dir_node = vec![false; self.nodes.len()];
        for (e, t) in self.tags.iter().enumerate() {
            if t.has_dirichlet() {
                for &i in &self.elements[e] {
                    dir_node[i] = true;
                }
            }
        }
        for (e, t) in self.tags.iter().enumerate() {
            if t.is_contact() && self.elements[e].iter().any(|&i| dir_node[i]) {
                return Err(Error::InvalidSpec(format!(
                    "contact element {e} touches the Dirichlet part"
                )));
            }
        }
        Ok(())
    }

    /// Traction (discontinuous-at-junction) node of each element end.
    ///
    /// A new traction node starts wherever the tag changes or the boundary
    /// turns, so tractions may jump there. Displacement nodes are the mesh
    /// nodes themselves.
    pub fn traction_nodes(&self) -> (Vec<[usize; 2]>, usize) {
        let m = self.num_elements();
        let breaks: Vec<bool> = (0..m)
            .map(|e| {
                let p = (e + m - 1) % m;
                let (fp, fe) = (self.frame(p), self.frame(e));
                self.tags[p] != self.tags[e] || cross(fp.tangent, fe.tangent).abs() > 1e-10 || dot(fp.tangent, fe.tangent) < 0.0
            })
            .collect();
        let mut ids = vec![[0usize; 2]; m];
        // start at a break so every run of shared nodes is contiguous
        let start = breaks.iter().position(|&b| b).unwrap_or(0);
        let mut next = 0;
        for k in 0..m {
            let e = (start + k) % m;
            if breaks[e] || k == 0 {
                ids[e][0] = next;
                next += 1;
            } else {
                ids[e][0] = ids[(e + m - 1) % m][1];
            }
            ids[e][1] = next;
            next += 1;
        }
        if !breaks[start] {
            // smooth closed boundary with a single tag: close the loop
            let last = (start + m - 1) % m;
            ids[start][0] = ids[last][1];
            let mut map = std::collections::HashMap::new();
            for e in 0..m {
                for a in 0..2 {
                    let len = map.len();
                    ids[e][a] = *map.entry(ids[e][a]).or_insert(len);
                }
            }
            return (ids, map.len());
        }
        (ids, next)
    }

    /// Writes nodes, elements and tags as whitespace-separated rows.
    pub fn debug_dump(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# mesh {}\n# node x1 x2\n", self.label.letter()));
        for (i, p) in self.nodes.iter().enumerate() {
            s.push_str(&format!("{i} {:.17e} {:.17e}\n", p[0], p[1]));
        }
        s.push_str("# element n0 n1 tag1 tag2\n");
        let code = |p: Part| match p {
            Part::Dirichlet => 'D',
            Part::Neumann => 'N',
            Part::Contact => 'C',
        };
        for (e, el) in self.elements.iter().enumerate() {
            let t = self.tags[e].0;
            s.push_str(&format!("{e} {} {} {} {}\n", el[0], el[1], code(t[0]), code(t[1])));
        }
        s
    }

    pub fn contact_elements(&self) -> Vec<usize> {
        (0..self.num_elements()).filter(|&e| self.tags[e].is_contact()).collect()
    }
}

/// One piece of the common refinement of the two contact traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub elem_a: usize,
    pub elem_b: usize,
    /// Arclength interval along the master chain.
    pub s0: f64,
    pub s1: f64,
    /// Local element coordinates in [0, 1] at `s0` and `s1`.
    pub xi_a: [f64; 2],
    pub xi_b: [f64; 2],
}

/// Pairing of the contact traces of both bodies. Side B is the master.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPair {
    /// Contact elements of A ordered along the master chain.
    pub elements_a: Vec<usize>,
    /// Contact elements of B in chain order.
    pub elements_b: Vec<usize>,
    /// Master contact nodes in chain order.
    pub nodes_b: Vec<usize>,
    /// Arclength of each master contact node.
    pub node_s: Vec<f64>,
    pub overlaps: Vec<Overlap>,
    pub length: f64,
}

/// Contact elements in boundary order, requiring a single connected chain.
fn contact_chain(mesh: &BoundaryMesh) -> Result<Vec<usize>> {
    let m = mesh.num_elements();
    let ce = mesh.contact_elements();
    if ce.is_empty() {
        return Err(Error::EmptyContact(mesh.label.letter()));
    }
    let start = ce
        .iter()
        .copied()
        .find(|&e| !mesh.tags[(e + m - 1) % m].is_contact())
        .ok_or_else(|| Error::ContactMismatch("contact covers the whole boundary".into()))?;
    let mut chain = vec![start];
    let mut e = (start + 1) % m;
    while mesh.tags[e].is_contact() && e != start {
        chain.push(e);
        e = (e + 1) % m;
    }
    if chain.len() != ce.len() {
        return Err(Error::ContactMismatch(format!(
            "side {} has a disconnected contact part",
            mesh.label.letter()
        )));
    }
    Ok(chain)
}

/// Arclength position of `p` on a polyline chain, with its distance.
fn project_on_chain(mesh: &BoundaryMesh, chain: &[usize], cum: &[f64], p: Point) -> (f64, f64, usize, f64) {
    let mut best = (f64::INFINITY, 0.0, 0usize, 0.0);
    for (k, &e) in chain.iter().enumerate() {
        let [a, b] = mesh.endpoints(e);
        let f = mesh.frame(e);
        let t = (dot(sub(p, a), f.tangent) / f.length).clamp(0.0, 1.0);
        let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let d = norm(sub(p, q));
        if d < best.0 {
            best = (d, cum[k] + t * f.length, k, t);
        }
    }
    (best.1, best.0, best.2, best.3)
}

pub const PAIR_TOLERANCE: f64 = 1e-9;

/// Builds the common refinement of both contact traces.
pub fn pair_contacts(mesh_a: &BoundaryMesh, mesh_b: &BoundaryMesh) -> Result<ContactPair> {
    let chain_b = contact_chain(mesh_b)?;
    let chain_a_raw = contact_chain(mesh_a)?;
    let mut cum = vec![0.0];
    for &e in &chain_b {
        cum.push(cum.last().unwrap() + mesh_b.frame(e).length);
    }
    let length = *cum.last().unwrap();
    let tol = PAIR_TOLERANCE.max(1e-12 * length);

    // A traverses the common curve in the opposite direction; order it along B.
    let mut a_items: Vec<(usize, f64, f64)> = Vec::new();
    for &e in &chain_a_raw {
        let [p, q] = mesh_a.endpoints(e);
        let (sp, dp, _, _) = project_on_chain(mesh_b, &chain_b, &cum, p);
        let (sq, dq, _, _) = project_on_chain(mesh_b, &chain_b, &cum, q);
        if dp > tol || dq > tol {
            return Err(Error::ContactMismatch(format!(
                "element {e} of A is {:.3e} mm away from the master trace",
                dp.max(dq)
            )));
        }
        a_items.push((e, sp, sq));
    }
    a_items.sort_by(|x, y| x.1.min(x.2).partial_cmp(&y.1.min(y.2)).unwrap());
    let s_min = a_items.first().map(|x| x.1.min(x.2)).unwrap();
    let s_max = a_items.last().map(|x| x.1.max(x.2)).unwrap();
    if s_min.abs() > tol || (s_max - length).abs() > tol {
        return Err(Error::ContactMismatch(format!(
            "traces cover different extents: A spans [{s_min}, {s_max}], B spans [0, {length}]"
        )));
    }
    for w in a_items.windows(2) {
        if (w[0].1.max(w[0].2) - w[1].1.min(w[1].2)).abs() > tol {
            return Err(Error::ContactMismatch("A trace has a gap or overlap".into()));
        }
    }

    let mut breaks: Vec<f64> = cum.clone();
    for it in &a_items {
        breaks.push(it.1.min(it.2));
    }
    breaks.push(length);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut uniq: Vec<f64> = Vec::new();
    for s in breaks {
        let s = s.clamp(0.0, length);
        if uniq.last().is_none_or(|&l| s - l > tol) {
            uniq.push(s);
        } else if (s - length).abs() <= tol {
            *uniq.last_mut().unwrap() = length;
        }
    }
    if let Some(l) = uniq.last_mut() {
        *l = length;
    }

    let mut overlaps = Vec::new();
    for w in uniq.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        let mid = 0.5 * (s0 + s1);
        let kb = match cum.windows(2).position(|c| mid >= c[0] && mid <= c[1]) {
            Some(k) => k,
            None => return Err(Error::ContactMismatch("overlap outside master chain".into())),
        };
        let eb = chain_b[kb];
        let lb = cum[kb + 1] - cum[kb];
        let xi_b = [(s0 - cum[kb]) / lb, (s1 - cum[kb]) / lb];
        let ia = a_items
            .iter()
            .find(|it| mid >= it.1.min(it.2) && mid <= it.1.max(it.2))
            .ok_or_else(|| Error::ContactMismatch("no A element covers an overlap".into()))?;
        // local coordinate on A measured from its first node
        let xa = |s: f64| (s - ia.1) / (ia.2 - ia.1);
        overlaps.push(Overlap { elem_a: ia.0, elem_b: eb, s0, s1, xi_a: [xa(s0), xa(s1)], xi_b });
    }

    let mut nodes_b = vec![mesh_b.elements[chain_b[0]][0]];
    for &e in &chain_b {
        nodes_b.push(mesh_b.elements[e][1]);
    }
    Ok(ContactPair {
        elements_a: a_items.iter().map(|x| x.0).collect(),
        elements_b: chain_b,
        nodes_b,
        node_s: cum,
        overlaps,
        length,
    })
}

impl ContactPair {
    pub fn overlap_length(&self) -> f64 {
        self.overlaps.iter().map(|o| o.s1 - o.s0).sum()
    }

    /// Total contact length measured on side A's own elements.
    pub fn length_from_a(&self, mesh_a: &BoundaryMesh) -> f64 {
        self.elements_a.iter().map(|&e| mesh_a.frame(e).length).sum()
    }

    /// Unit tangent and normal of the master trace at each master contact node.
    /// At a kink the two adjacent element frames are averaged.
    pub fn node_frames(&self, mesh_b: &BoundaryMesh) -> Vec<(Point, Point)> {
        let n = self.nodes_b.len();
        (0..n)
            .map(|k| {
                let mut t = [0.0, 0.0];
                if k > 0 {
                    let f = mesh_b.frame(self.elements_b[k - 1]);
                    t = [t[0] + f.tangent[0], t[1] + f.tangent[1]];
                }
                if k < n - 1 {
                    let f = mesh_b.frame(self.elements_b[k]);
                    t = [t[0] + f.tangent[0], t[1] + f.tangent[1]];
                }
                let l = norm(t);
                let t = [t[0] / l, t[1] / l];
                (t, [t[1], -t[0]])
            })
            .collect()
    }
}
