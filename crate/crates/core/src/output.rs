//! Run artifacts: contact series and energy log as CSV, QP telemetry,
//! SVG snapshots and the run manifest.

use crate::assembly::InfluenceMatrices;
use crate::contact::ContactGeometry;
use crate::error::{Error, Result};
use crate::evolve::StepOutcome;
use crate::mesh::Point;
use crate::scenario::Scenario;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const CONTACT_HEADER: &str = "step,t,s,x1,x2,p_n,p_t,z_n,z_t,slip";
pub const ENERGY_HEADER: &str = "step,t,tau,E,R1,2R2,work,dE,qp_iters";
pub const QP_HEADER: &str = "step,iteration,kind,objective,projected_gradient,active";

/// Shortest decimal text with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One contact node at one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactRow {
    pub step: usize,
    pub t: f64,
    pub s: f64,
    pub x1: f64,
    pub x2: f64,
    pub p_n: f64,
    pub p_t: f64,
    pub z_n: f64,
    pub z_t: f64,
    pub slip: bool,
}

impl ContactRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.step,
            num(self.t),
            num(self.s),
            num(self.x1),
            num(self.x2),
            num(self.p_n),
            num(self.p_t),
            num(self.z_n),
            num(self.z_t),
            u8::from(self.slip)
        )
    }
}

/// Rows of one accepted step.
pub fn contact_rows(out: &StepOutcome, geom: &ContactGeometry) -> Vec<ContactRow> {
    let (zt, zn) = geom.split(&out.state.gap.z);
    (0..geom.num_nodes())
        .map(|c| ContactRow {
            step: out.state.step,
            t: out.state.t,
            s: geom.arclength[c],
            x1: geom.positions[c][0],
            x2: geom.positions[c][1],
            p_n: out.tractions.normal[c],
            p_t: out.tractions.tangential[c],
            z_n: zn[c],
            z_t: zt[c],
            slip: out.slipping[c],
        })
        .collect()
}

fn field<T: std::str::FromStr>(line: usize, col: &str, v: Option<&str>) -> Result<T> {
    v.and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::config(format!("line {line}, column {col}"), "unreadable value"))
}

/// Reads back a contact series written by [`ContactRow::to_csv`].
pub fn parse_contact_csv(text: &str) -> Result<Vec<ContactRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CONTACT_HEADER) {
        return Err(Error::config("line 1", "unexpected contact header"));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let n = i + 2;
            let mut it = l.split(',');
            let row = ContactRow {
                step: field(n, "step", it.next())?,
                t: field(n, "t", it.next())?,
                s: field(n, "s", it.next())?,
                x1: field(n, "x1", it.next())?,
                x2: field(n, "x2", it.next())?,
                p_n: field(n, "p_n", it.next())?,
                p_t: field(n, "p_t", it.next())?,
                z_n: field(n, "z_n", it.next())?,
                z_t: field(n, "z_t", it.next())?,
                slip: field::<u8>(n, "slip", it.next())? == 1,
            };
            if it.next().is_some() {
                return Err(Error::config(format!("line {n}"), "too many columns"));
            }
            Ok(row)
        })
        .collect()
}

/// Energy log line of one accepted step.
pub fn energy_line(out: &StepOutcome) -> String {
    let r = &out.residuum;
    format!(
        "{},{},{},{},{},{},{},{},{}",
        out.state.step,
        num(out.state.t),
        num(out.state.tau),
        num(r.stored),
        num(r.friction),
        num(r.viscous),
        num(r.work()),
        num(r.delta),
        out.qp_iterations
    )
}

/// Nodes displaced by `m·v`, with `v` the nodal displacement vector.
pub fn deformed_outline(nodes: &[Point], v: &[f64], m: f64) -> Vec<Point> {
    nodes.iter().enumerate().map(|(i, p)| [p[0] + m * v[2 * i], p[1] + m * v[2 * i + 1]]).collect()
}

fn polygon(points: &[Point], flip: f64, style: &str) -> String {
    let mut d = String::new();
    for p in points {
        let _ = write!(d, "{:.6},{:.6} ", p[0], flip - p[1]);
    }
    format!("<polygon points=\"{}\" {style}/>\n", d.trim_end())
}

/// SVG of the undeformed and magnified deformed outlines of every body,
/// with the normal contact traction drawn as a profile along the contact.
///
/// `displacements` holds the nodal displacement vector of each body.
pub fn snapshot_svg(im: &InfluenceMatrices, displacements: &[Vec<f64>], magnification: f64, contact: Option<(&ContactGeometry, &[f64])>) -> String {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let outlines: Vec<(Vec<Point>, Vec<Point>)> = im
        .meshes
        .iter()
        .zip(displacements)
        .map(|(m, v)| (m.nodes.clone(), deformed_outline(&m.nodes, v, magnification)))
        .collect();
    for p in outlines.iter().flat_map(|(a, b)| a.iter().chain(b)) {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let size = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let pad = 0.05 * size;
    let flip = hi[1] + lo[1];
    let mut s = String::new();
    let _ = writeln!(s, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"{:.6} {:.6} {:.6} {:.6}\">",
        lo[0] - pad,
        lo[1] - pad,
        hi[0] - lo[0] + 2.0 * pad,
        hi[1] - lo[1] + 2.0 * pad
    );
    let stroke = 0.002 * size;
    for (undeformed, deformed) in &outlines {
        s += &polygon(undeformed, flip, &format!("fill=\"none\" stroke=\"#999\" stroke-dasharray=\"{0:.4},{0:.4}\" stroke-width=\"{0:.4}\"", stroke));
        s += &polygon(deformed, flip, &format!("fill=\"none\" stroke=\"#000\" stroke-width=\"{stroke:.4}\""));
    }
    if let Some((geom, p_n)) = contact {
        let peak = p_n.iter().fold(0.0f64, |a, p| a.max(p.abs()));
        if peak > 0.0 {
            let scale = 0.1 * size / peak;
            let mut d = String::new();
            for (c, (x, (_, n))) in geom.positions.iter().zip(&geom.frames).enumerate() {
                let y = [x[0] - scale * p_n[c] * n[0], x[1] - scale * p_n[c] * n[1]];
                let _ = write!(d, "{:.6},{:.6} ", y[0], flip - y[1]);
            }
            let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"#c00\" stroke-width=\"{stroke:.4}\"/>", d.trim_end());
        }
    }
    s += "</svg>\n";
    s
}

/// Digest of the sources this binary was built from.
pub fn code_hash() -> String {
    const SOURCES: [&str; 16] = [
        include_str!("assembly.rs"),
        include_str!("contact.rs"),
        include_str!("error.rs"),
        include_str!("evolve.rs"),
        include_str!("kernels.rs"),
        include_str!("lib.rs"),
        include_str!("linalg.rs"),
        include_str!("main.rs"),
        include_str!("mesh.rs"),
        include_str!("output.rs"),
        include_str!("par.rs"),
        include_str!("qp.rs"),
        include_str!("quadrature.rs"),
        include_str!("runner.rs"),
        include_str!("scenario.rs"),
        include_str!("steklov.rs"),
    ];
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION"));
    for s in SOURCES {
        h.update((s.len() as u64).to_le_bytes());
        h.update(s);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Manifest text: code hash, config hash and the resolved scenario.
pub fn manifest(scenario: &Scenario) -> String {
    let config = scenario.to_toml();
    let digest: String = Sha256::digest(config.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    format!(
        "# kvcontact {} run manifest\n# code {}\n# config {}\n{}",
        env!("CARGO_PKG_VERSION"),
        code_hash(),
        digest,
        config
    )
}

/// Streaming writer of a run directory, flushed after every accepted step.
pub struct RunWriter {
    dir: PathBuf,
    contact: BufWriter<File>,
    energy: BufWriter<File>,
    qp: BufWriter<File>,
    plot_every: usize,
    magnification: f64,
}

impl RunWriter {
    pub fn create(dir: &Path, scenario: &Scenario) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("run_manifest.toml"), manifest(scenario))?;
        let open = |name: &str, header: &str| -> Result<BufWriter<File>> {
            let mut w = BufWriter::new(File::create(dir.join(name))?);
            writeln!(w, "{header}")?;
            w.flush()?;
            Ok(w)
        };
        if scenario.output.plot_every > 0 {
            std::fs::create_dir_all(dir.join("snapshots"))?;
        }
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            contact: open("contact_series.csv", CONTACT_HEADER)?,
            energy: open("energy_log.csv", ENERGY_HEADER)?,
            qp: open("qp_log.csv", QP_HEADER)?,
            plot_every: scenario.output.plot_every,
            magnification: scenario.output.magnification,
        })
    }

    pub fn record(&mut self, out: &StepOutcome, im: &InfluenceMatrices, geom: &ContactGeometry) -> Result<()> {
        for row in contact_rows(out, geom) {
            writeln!(self.contact, "{}", row.to_csv())?;
        }
        writeln!(self.energy, "{}", energy_line(out))?;
        for r in &out.qp_history {
            writeln!(
                self.qp,
                "{},{},{},{},{},{}",
                out.state.step,
                r.iteration,
                r.kind.name(),
                num(r.objective),
                num(r.projected_gradient),
                r.active
            )?;
        }
        self.contact.flush()?;
        self.energy.flush()?;
        self.qp.flush()?;
        if self.plot_every > 0 && out.state.step.is_multiple_of(self.plot_every) {
            let svg = snapshot_svg(im, &out.state.u.v, self.magnification, Some((geom, &out.tractions.normal)));
            std::fs::write(self.dir.join("snapshots").join(format!("step{:06}.svg", out.state.step)), svg)?;
        }
        Ok(())
    }
}
