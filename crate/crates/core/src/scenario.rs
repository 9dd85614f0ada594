//! Scenario documents: strict TOML schema, validation, model building and
//! the shipped presets.

use crate::assembly::{DofClass, InfluenceMatrices, LoadData};
use crate::contact::{ContactGeometry, ContactLaw, ContactMass};
use crate::error::{Error, Result};
use crate::evolve::{Evolution, LoadComponent, LoadProgram, Schedule, TimeControl};
use crate::mesh::{build_mesh, pair_contacts, BoundaryMesh, EdgeSpec, ElementTag, Grading, Material, Part, Side};
use crate::qp::MprgpOptions;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One microjoule in the model's energy unit, N·mm per mm of thickness.
pub const MICROJOULE: f64 = 1e-3;

/// QP iteration cap of the presets. The first steps start from a loose
/// body and need a few thousand MPRGP iterations.
pub const PRESET_QP_CAP: usize = 200_000;

/// Boundary condition of an edge, per displacement component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tag {
    D,
    N,
    C,
    /// Prescribed x-displacement, free y (roller on a vertical face).
    DN,
    /// Free x, prescribed y-displacement (roller on a horizontal face).
    ND,
}

impl Tag {
    pub fn element_tag(self) -> ElementTag {
        use Part::*;
        match self {
            Tag::D => ElementTag::D,
            Tag::N => ElementTag::N,
            Tag::C => ElementTag::C,
            Tag::DN => ElementTag([Dirichlet, Neumann]),
            Tag::ND => ElementTag([Neumann, Dirichlet]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub tag: Tag,
    pub divisions: usize,
    #[serde(default, skip_serializing_if = "is_uniform")]
    pub grading: Grading,
}

fn is_uniform(g: &Grading) -> bool {
    g.start.is_none() && g.end.is_none()
}

/// A body: anticlockwise polygon, one edge entry per side (vertex i to i+1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConfig {
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    pub vertices: Vec<[f64; 2]>,
    pub edges: Vec<EdgeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactConfig {
    pub mu: f64,
    pub k_g: f64,
    #[serde(default)]
    pub mass: ContactMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadKind {
    /// Surface traction in MPa on Neumann components.
    Traction,
    /// Displacement in mm on Dirichlet components.
    Displacement,
}

/// A uniform load on a set of edges of one body, scaled in time by a
/// piecewise-linear factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    pub body: Side,
    pub kind: LoadKind,
    pub edges: Vec<usize>,
    pub value: [f64; 2],
    pub times: Vec<f64>,
    pub factors: Vec<f64>,
}

fn default_grow() -> f64 {
    0.1
}

fn default_rtol() -> f64 {
    1e-8
}

fn default_max_forced() -> usize {
    20
}

fn default_negative_tolerance() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub t_end: f64,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
    /// Residuum tolerance in µJ; absent means fixed steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_uj: Option<f64>,
    #[serde(default = "default_grow")]
    pub grow: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_max_forced")]
    pub max_forced: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default = "default_negative_tolerance")]
    pub negative_tolerance: f64,
}

fn default_magnification() -> f64 {
    1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Snapshot cadence in accepted steps; 0 disables snapshots.
    #[serde(default)]
    pub plot_every: usize,
    #[serde(default = "default_magnification")]
    pub magnification: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { plot_every: 0, magnification: default_magnification() }
    }
}

/// A complete scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Relaxation time χ in s, shared by both bodies.
    pub chi: f64,
    pub contact: ContactConfig,
    /// Body A (upper, slave side) then body B (master side).
    pub body: Vec<BodyConfig>,
    #[serde(default)]
    pub load: Vec<LoadConfig>,
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::config("", e.to_string()))?;
    let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().message().to_string())
    })?;
    s.validate()?;
    Ok(s)
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive and finite, got {v}")))
    }
}

impl Scenario {
    pub fn load_file(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        parse_scenario(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Physical and structural checks with located messages.
    pub fn validate(&self) -> Result<()> {
        if !(self.chi >= 0.0 && self.chi.is_finite()) {
            return Err(Error::config("chi", format!("must be non-negative, got {}", self.chi)));
        }
        positive("contact.mu", self.contact.mu)?;
        positive("contact.k_g", self.contact.k_g)?;
        if self.body.len() != 2 {
            return Err(Error::config("body", format!("exactly two bodies required, got {}", self.body.len())));
        }
        for (i, b) in self.body.iter().enumerate() {
            let p = format!("body[{i}]");
            positive(&format!("{p}.young_modulus"), b.young_modulus)?;
            if !(0.0..0.5).contains(&b.poisson_ratio) {
                return Err(Error::config(
                    format!("{p}.poisson_ratio"),
                    format!("must lie in [0, 0.5), got {}", b.poisson_ratio),
                ));
            }
            if b.vertices.len() < 3 {
                return Err(Error::config(format!("{p}.vertices"), "at least three vertices required"));
            }
            if b.edges.len() != b.vertices.len() {
                return Err(Error::config(
                    format!("{p}.edges"),
                    format!("{} edges for {} vertices", b.edges.len(), b.vertices.len()),
                ));
            }
            for (j, e) in b.edges.iter().enumerate() {
                if e.divisions == 0 {
                    return Err(Error::config(format!("{p}.edges[{j}].divisions"), "must be at least 1"));
                }
                for (name, g) in [("start", e.grading.start), ("end", e.grading.end)] {
                    if let Some(h) = g {
                        positive(&format!("{p}.edges[{j}].grading.{name}"), h)?;
                    }
                }
            }
        }
        for (i, l) in self.load.iter().enumerate() {
            let p = format!("load[{i}]");
            let nb = self.body[body_index(l.body)].edges.len();
            if l.edges.is_empty() {
                return Err(Error::config(format!("{p}.edges"), "no edges selected"));
            }
            if let Some(&e) = l.edges.iter().find(|&&e| e >= nb) {
                return Err(Error::config(format!("{p}.edges"), format!("edge {e} does not exist")));
            }
            if l.value.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("{p}.value"), "non-finite value"));
            }
            Schedule::new(l.times.clone(), l.factors.clone()).map_err(|e| Error::config(format!("{p}.times"), e.to_string()))?;
            if l.times[0] < 0.0 || *l.times.last().unwrap() > self.solver.t_end {
                return Err(Error::config(format!("{p}.times"), "breakpoints must lie in [0, t_end]"));
            }
        }
        let s = &self.solver;
        positive("solver.t_end", s.t_end)?;
        positive("solver.tau", s.tau)?;
        if let Some(v) = s.tau_min {
            positive("solver.tau_min", v)?;
            if v > s.tau {
                return Err(Error::config("solver.tau_min", "exceeds solver.tau"));
            }
        }
        if let Some(v) = s.tau_max {
            positive("solver.tau_max", v)?;
            if v < s.tau {
                return Err(Error::config("solver.tau_max", "is below solver.tau"));
            }
        }
        if let Some(v) = s.eps_uj {
            positive("solver.eps_uj", v)?;
        }
        if !(s.grow > 0.0 && s.grow < 1.0) {
            return Err(Error::config("solver.grow", format!("must lie in (0, 1), got {}", s.grow)));
        }
        positive("solver.rtol", s.rtol)?;
        positive("solver.negative_tolerance", s.negative_tolerance)?;
        if s.max_iterations == Some(0) {
            return Err(Error::config("solver.max_iterations", "must be at least 1"));
        }
        if !(self.output.magnification >= 0.0 && self.output.magnification.is_finite()) {
            return Err(Error::config("output.magnification", "must be non-negative"));
        }
        Ok(())
    }

    pub fn materials(&self) -> Result<Vec<Material>> {
        self.body.iter().map(|b| Material::new(b.young_modulus, b.poisson_ratio, self.chi)).collect()
    }

    pub fn meshes(&self) -> Result<Vec<BoundaryMesh>> {
        self.body
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let edges: Vec<EdgeSpec> = b
                    .edges
                    .iter()
                    .map(|e| EdgeSpec { tag: e.tag.element_tag(), divisions: e.divisions, grading: e.grading })
                    .collect();
                let side = if i == 0 { Side::A } else { Side::B };
                build_mesh(side, &b.vertices, &edges).map_err(|e| Error::config(format!("body[{i}]"), e.to_string()))
            })
            .collect()
    }

    /// Assembles the influence matrices, through `cache` when given.
    pub fn influence(&self, cache: Option<&Path>) -> Result<InfluenceMatrices> {
        let meshes = self.meshes()?;
        let pair = pair_contacts(&meshes[0], &meshes[1]).map_err(|e| Error::config("body", e.to_string()))?;
        let mats = self.materials()?;
        match cache {
            Some(dir) => InfluenceMatrices::assemble_cached(meshes, mats, Some(pair), dir),
            None => InfluenceMatrices::assemble(meshes, mats, Some(pair)),
        }
    }

    pub fn law(&self) -> Result<ContactLaw> {
        ContactLaw::new(self.contact.mu, self.contact.k_g)
    }

    /// Nodal load program on the dof layout of `im`.
    pub fn load_program(&self, im: &InfluenceMatrices) -> Result<LoadProgram> {
        let zero = LoadData::zeros(&im.layout);
        let mut comps = Vec::new();
        for (i, l) in self.load.iter().enumerate() {
            let pattern = load_pattern(self, im, l).map_err(|e| match e {
                Error::Config { path, msg } => Error::config(format!("load[{i}]{path}"), msg),
                other => other,
            })?;
            comps.push(LoadComponent { pattern, schedule: Schedule::new(l.times.clone(), l.factors.clone())? });
        }
        LoadProgram::new(zero, comps)
    }

    pub fn time_control(&self) -> TimeControl {
        let s = &self.solver;
        let adaptive = s.eps_uj.is_some();
        TimeControl {
            t_end: s.t_end,
            tau: s.tau,
            tau_min: s.tau_min.filter(|_| adaptive).unwrap_or(s.tau),
            tau_max: s.tau_max.filter(|_| adaptive).unwrap_or(s.tau),
            eps: s.eps_uj.map(|e| e * MICROJOULE),
            grow: s.grow,
            max_forced: s.max_forced,
        }
    }

    pub fn evolution<'a>(&self, im: &'a InfluenceMatrices) -> Result<Evolution<'a>> {
        let geom = ContactGeometry::with_mass(im, self.contact.mass)?;
        let mut evo = Evolution::new(im, geom, self.law()?, self.chi, self.load_program(im)?)?;
        evo.qp = MprgpOptions { rtol: self.solver.rtol, max_iterations: self.solver.max_iterations, ..MprgpOptions::default() };
        evo.negative_tolerance = self.solver.negative_tolerance;
        Ok(evo)
    }
}

pub fn body_index(side: Side) -> usize {
    match side {
        Side::A => 0,
        Side::B => 1,
    }
}

/// First element of every polygon edge, plus the total count.
fn edge_offsets(body: &BodyConfig) -> Vec<usize> {
    let mut off = vec![0];
    for e in &body.edges {
        off.push(off.last().unwrap() + e.divisions);
    }
    off
}

fn load_pattern(sc: &Scenario, im: &InfluenceMatrices, l: &LoadConfig) -> Result<LoadData> {
    let eta = body_index(l.body);
    let body = &sc.body[eta];
    let mesh = &im.meshes[eta];
    let dofs = &im.layout.domains[eta];
    let off = edge_offsets(body);
    let mut d = LoadData::zeros(&im.layout);
    let loaded: Vec<usize> = l.edges.iter().flat_map(|&j| off[j]..off[j + 1]).collect();
    let mut on = vec![false; mesh.num_elements()];
    loaded.iter().for_each(|&e| on[e] = true);
    let want = match l.kind {
        LoadKind::Traction => Part::Neumann,
        LoadKind::Displacement => Part::Dirichlet,
    };
    for &e in &loaded {
        for k in 0..2 {
            if l.value[k] != 0.0 && mesh.tags[e].0[k] != want {
                return Err(Error::config(
                    ".value",
                    format!("component {k} is not {want:?} on element {e} of body {:?}", l.body),
                ));
            }
        }
    }
    match l.kind {
        LoadKind::Traction => {
            // a traction node shared with an unloaded element would leak the load
            for (e, tn) in dofs.traction_nodes.iter().enumerate() {
                if on[e] {
                    continue;
                }
                for &n in tn {
                    if loaded.iter().any(|&f| dofs.traction_nodes[f].contains(&n)) {
                        return Err(Error::config(
                            ".edges",
                            format!("loaded traction node {n} is shared with unloaded element {e}; split the edge by tag or corner"),
                        ));
                    }
                }
            }
            for &e in &loaded {
                for &n in &dofs.traction_nodes[e] {
                    for k in 0..2 {
                        if dofs.phi_class[2 * n + k] == DofClass::N {
                            d.f[eta][2 * n + k] = l.value[k];
                        }
                    }
                }
            }
        }
        LoadKind::Displacement => {
            for &e in &loaded {
                for &n in &mesh.elements[e] {
                    for k in 0..2 {
                        if mesh.tags[e].0[k] == Part::Dirichlet && dofs.psi_class[2 * n + k] == DofClass::D {
                            d.g[eta][2 * n + k] = l.value[k];
                        }
                    }
                }
            }
        }
    }
    Ok(d)
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 6] = ["receding", "receding-n20", "receding-n40", "conforming", "skewed", "skewed-mu1.1"];

/// A shipped scenario by name.
pub fn preset(name: &str) -> Option<Scenario> {
    match name {
        "receding" => Some(receding(1)),
        "receding-n20" => Some(receding(2)),
        "receding-n40" => Some(receding(4)),
        "conforming" => Some(conforming()),
        "skewed" => Some(skewed(0.2, 1e-3, Some(1.0))),
        "skewed-mu1.1" => Some(skewed(1.1, 1e-3, Some(1.0))),
        _ => None,
    }
}

fn edge(tag: Tag, divisions: usize) -> EdgeConfig {
    EdgeConfig { tag, divisions, grading: Grading::default() }
}

fn graded(tag: Tag, divisions: usize, start: Option<f64>, end: Option<f64>) -> EdgeConfig {
    EdgeConfig { tag, divisions, grading: Grading { start, end } }
}

fn ramp(t0: f64, t1: f64) -> (Vec<f64>, Vec<f64>) {
    if t0 > 0.0 {
        (vec![0.0, t0, t1], vec![0.0, 0.0, 1.0])
    } else {
        (vec![t0, t1], vec![0.0, 1.0])
    }
}

fn load(body: Side, kind: LoadKind, edges: Vec<usize>, value: [f64; 2], (times, factors): (Vec<f64>, Vec<f64>)) -> LoadConfig {
    LoadConfig { body, kind, edges, value, times, factors }
}

/// Layer pressed onto a block. `level` 1, 2, 4 gives N = 10, 20, 40: all
/// elements and the time step shrink by that factor.
///
/// The layer has no support of its own; a horizontal roller on the loaded
/// segment removes its rigid horizontal motion without breaking the symmetry.
pub fn receding(level: usize) -> Scenario {
    let s = level;
    let h = 4.0 / s as f64;
    let hl = 2.0 / s as f64;
    let layer = BodyConfig {
        young_modulus: 4e3,
        poisson_ratio: 0.35,
        vertices: vec![
            [20.0, 200.0],
            [80.0, 200.0],
            [120.0, 200.0],
            [180.0, 200.0],
            [180.0, 210.0],
            [105.0, 210.0],
            [95.0, 210.0],
            [20.0, 210.0],
        ],
        edges: vec![
            graded(Tag::C, 8 * s, None, Some(h)),
            edge(Tag::C, 10 * s),
            graded(Tag::C, 8 * s, Some(h), None),
            edge(Tag::N, 3 * s),
            graded(Tag::N, 8 * s, None, Some(hl)),
            edge(Tag::DN, 5 * s),
            graded(Tag::N, 8 * s, Some(hl), None),
            edge(Tag::N, 3 * s),
        ],
    };
    let block = BodyConfig {
        young_modulus: 4e3,
        poisson_ratio: 0.35,
        vertices: vec![
            [0.0, 0.0],
            [200.0, 0.0],
            [200.0, 200.0],
            [180.0, 200.0],
            [120.0, 200.0],
            [80.0, 200.0],
            [20.0, 200.0],
            [0.0, 200.0],
        ],
        edges: vec![
            edge(Tag::D, 10 * s),
            edge(Tag::N, 10 * s),
            edge(Tag::N, 2 * s),
            graded(Tag::C, 8 * s, None, Some(h)),
            edge(Tag::C, 10 * s),
            graded(Tag::C, 8 * s, Some(h), None),
            edge(Tag::N, 2 * s),
            edge(Tag::N, 10 * s),
        ],
    };
    let tau = 1e-3 / s as f64;
    Scenario {
        name: format!("receding-n{}", 10 * s),
        chi: 1e-3,
        contact: ContactConfig { mu: 0.8, k_g: 4e5, mass: ContactMass::Lumped },
        body: vec![layer, block],
        load: vec![load(Side::A, LoadKind::Traction, vec![5], [0.0, -0.5], ramp(0.0, 0.01))],
        solver: SolverConfig {
            t_end: 0.04,
            tau,
            tau_min: None,
            tau_max: None,
            eps_uj: None,
            grow: default_grow(),
            rtol: default_rtol(),
            max_forced: default_max_forced(),
            max_iterations: Some(PRESET_QP_CAP),
            negative_tolerance: default_negative_tolerance(),
        },
        output: OutputConfig { plot_every: 0, magnification: 5000.0 },
    }
}

/// Bottom block with rollers on its bottom and left faces, and a punch
/// whose top is held horizontally. Horizontal push `g1` on the left face.
fn block(young_modulus: f64, top: Vec<([f64; 2], EdgeConfig)>) -> BodyConfig {
    let mut vertices = vec![[0.0, 0.0], [200.0, 0.0]];
    let mut edges = vec![edge(Tag::ND, 10), edge(Tag::N, 10)];
    for (v, e) in top {
        vertices.push(v);
        edges.push(e);
    }
    vertices.push([0.0, 200.0]);
    edges.push(edge(Tag::DN, 10));
    BodyConfig { young_modulus, poisson_ratio: 0.35, vertices, edges }
}

fn solver(t_end: f64, tau: f64) -> SolverConfig {
    SolverConfig {
        t_end,
        tau,
        tau_min: None,
        tau_max: None,
        eps_uj: None,
        grow: default_grow(),
        rtol: default_rtol(),
        max_forced: default_max_forced(),
        max_iterations: Some(PRESET_QP_CAP),
        negative_tolerance: default_negative_tolerance(),
    }
}

/// Square punch on a stiffer block: vertical pressure, relaxation, then a
/// horizontal push of the block.
pub fn conforming() -> Scenario {
    let h = 0.11;
    let punch = BodyConfig {
        young_modulus: 4e3,
        poisson_ratio: 0.35,
        vertices: vec![[50.0, 200.0], [150.0, 200.0], [150.0, 300.0], [50.0, 300.0]],
        edges: vec![
            graded(Tag::C, 80, Some(h), Some(h)),
            graded(Tag::N, 20, Some(0.5), None),
            edge(Tag::DN, 20),
            graded(Tag::N, 20, None, Some(0.5)),
        ],
    };
    let mut bottom = block(
        1.6e4,
        vec![
            ([200.0, 200.0], graded(Tag::N, 10, None, Some(0.5))),
            ([150.0, 200.0], graded(Tag::C, 80, Some(h), Some(h))),
            ([50.0, 200.0], graded(Tag::N, 10, Some(0.5), None)),
        ],
    );
    bottom.edges[0].divisions = 40;
    bottom.edges[1].divisions = 40;
    bottom.edges[5].divisions = 40;
    Scenario {
        name: "conforming".into(),
        chi: 1e-3,
        contact: ContactConfig { mu: 0.2, k_g: 4e5, mass: ContactMass::Lumped },
        body: vec![punch, bottom],
        load: vec![
            load(Side::A, LoadKind::Traction, vec![2], [0.0, -1.0], ramp(0.0, 0.01)),
            load(Side::B, LoadKind::Displacement, vec![5], [0.1, 0.0], ramp(0.015, 0.04)),
        ],
        solver: solver(0.04, 2.5e-4),
        output: OutputConfig { plot_every: 0, magnification: 500.0 },
    }
}

/// Punch leaning by `arctan ½` on a 25 mm contact, with a 5 mm nose at 5°
/// ahead of the left contact end. Top of the punch pressed down by `g2`, block
/// pushed by `g1` until the bodies separate.
pub fn skewed(mu: f64, chi: f64, eps_uj: Option<f64>) -> Scenario {
    let nose_rise = 5.0 * 5f64.to_radians().tan();
    let nose = [75.0, 200.0 + nose_rise];
    let top_right = [105.0 - 0.5 * 100.0, 300.0];
    let top_left = [nose[0] - 0.5 * (300.0 - nose[1]), 300.0];
    let punch = BodyConfig {
        young_modulus: 4e3,
        poisson_ratio: 0.35,
        vertices: vec![[80.0, 200.0], [105.0, 200.0], top_right, top_left, nose],
        edges: vec![
            graded(Tag::C, 46, Some(0.25), Some(0.25)),
            graded(Tag::N, 10, Some(0.25), None),
            edge(Tag::D, 2),
            graded(Tag::N, 10, None, Some(1.0)),
            graded(Tag::N, 6, None, Some(0.25)),
        ],
    };
    let bottom = block(
        4e3,
        vec![
            ([200.0, 200.0], graded(Tag::N, 12, None, Some(0.25))),
            ([105.0, 200.0], graded(Tag::C, 46, Some(0.25), Some(0.25))),
            ([80.0, 200.0], graded(Tag::N, 10, Some(0.25), None)),
        ],
    );
    let mut s = solver(0.04, 1e-3);
    if eps_uj.is_some() {
        s.tau_min = Some(1e-6);
        s.tau_max = Some(2e-3);
        s.eps_uj = eps_uj;
    }
    Scenario {
        name: format!("skewed-mu{mu}"),
        chi,
        contact: ContactConfig { mu, k_g: 4e5, mass: ContactMass::Lumped },
        body: vec![punch, bottom],
        load: vec![
            load(Side::A, LoadKind::Displacement, vec![2], [0.0, -0.02], ramp(0.0, 0.01)),
            load(Side::B, LoadKind::Displacement, vec![5], [0.21, 0.0], ramp(0.015, 0.04)),
        ],
        solver: s,
        output: OutputConfig { plot_every: 0, magnification: 350.0 },
    }
}
