//! Network model: machine constants, coupling jacobian, observable maps.
//!
//! A case is a set of machines with inertia and damping, a symmetric
//! positive-semidefinite coupling jacobian, and optionally a bus angle
//! map, a line list, and per-machine distance coordinates. Cases are
//! stored in a sectioned plain-text format that round-trips exactly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Relative tolerance for the jacobian symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// A transmission line between two machines, with its susceptance.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: u32,
    pub to: u32,
    pub susceptance: f64,
}

impl Line {
    /// Canonical channel label, smaller id first: `"1-2"`.
    pub fn label(&self) -> String {
        let (a, b) = if self.from <= self.to {
            (self.from, self.to)
        } else {
            (self.to, self.from)
        };
        format!("{a}-{b}")
    }
}

/// Structural checks computed when a case is built.
#[derive(Debug, Clone, Copy)]
pub struct JacobianCheck {
    pub symmetric: bool,
    pub positive_semidefinite: bool,
    pub max_asymmetry: f64,
}

/// One study system: machines, couplings, and observables.
#[derive(Debug, Clone)]
pub struct GridCase {
    ids: Vec<u32>,
    inertia: DVector<f64>,
    damping: DVector<f64>,
    jacobian: DMatrix<f64>,
    bus_angle_map: DMatrix<f64>,
    lines: Vec<Line>,
    distances_mi: Option<Vec<f64>>,
    check: JacobianCheck,
}

impl GridCase {
    /// Builds a case and validates it. The bus angle map defaults to the
    /// identity (bus n observes rotor n); pass rows to model buses that
    /// mix several rotor angles.
    pub fn new(
        ids: Vec<u32>,
        inertia: Vec<f64>,
        damping: Vec<f64>,
        jacobian: DMatrix<f64>,
        bus_angle_map: Option<DMatrix<f64>>,
        lines: Vec<Line>,
        distances_mi: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::Dimension("case has no machines".into()));
        }
        if inertia.len() != n || damping.len() != n {
            return Err(Error::Dimension(format!(
                "{} machines but {} inertias, {} dampings",
                n,
                inertia.len(),
                damping.len()
            )));
        }
        for i in 0..n {
            if !(inertia[i] > 0.0) {
                return Err(Error::NonPositive {
                    id: ids[i],
                    what: "inertia".into(),
                    value: inertia[i],
                });
            }
            if !(damping[i] > 0.0) {
                return Err(Error::NonPositive {
                    id: ids[i],
                    what: "damping".into(),
                    value: damping[i],
                });
            }
        }
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != n {
            return Err(Error::Dimension("duplicate machine id".into()));
        }
        if jacobian.nrows() != n || jacobian.ncols() != n {
            return Err(Error::Dimension(format!(
                "jacobian is {}x{}, case has {} machines",
                jacobian.nrows(),
                jacobian.ncols(),
                n
            )));
        }
        let bus_angle_map = match bus_angle_map {
            Some(a) => {
                if a.ncols() != n {
                    return Err(Error::Dimension(format!(
                        "bus angle map has {} columns, case has {} machines",
                        a.ncols(),
                        n
                    )));
                }
                a
            }
            None => DMatrix::identity(n, n),
        };
        if let Some(d) = &distances_mi {
            if d.len() != n {
                return Err(Error::Dimension(format!(
                    "{} coords for {} machines",
                    d.len(),
                    n
                )));
            }
        }

        let scale = jacobian.amax().max(1.0);
        let max_asymmetry = (&jacobian - jacobian.transpose()).amax();
        let symmetric = max_asymmetry <= SYMMETRY_TOL * scale;
        let positive_semidefinite = symmetric && {
            let eig = jacobian.clone().symmetric_eigen();
            eig.eigenvalues.iter().all(|&l| l >= -SYMMETRY_TOL * scale)
        };
        let check = JacobianCheck {
            symmetric,
            positive_semidefinite,
            max_asymmetry,
        };

        let case = GridCase {
            ids,
            inertia: DVector::from_vec(inertia),
            damping: DVector::from_vec(damping),
            jacobian,
            bus_angle_map,
            lines,
            distances_mi,
            check,
        };
        for line in &case.lines {
            if line.from == line.to {
                return Err(Error::UnknownReference(format!(
                    "line {} connects a machine to itself",
                    line.label()
                )));
            }
            for end in [line.from, line.to] {
                if case.index_of(end).is_none() {
                    return Err(Error::UnknownReference(format!(
                        "line {} references machine {}",
                        line.label(),
                        end
                    )));
                }
            }
        }
        Ok(case)
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// Position of a machine id in matrix/state ordering.
    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    pub fn inertia(&self) -> &DVector<f64> {
        &self.inertia
    }

    pub fn damping(&self) -> &DVector<f64> {
        &self.damping
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    pub fn bus_angle_map(&self) -> &DMatrix<f64> {
        &self.bus_angle_map
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn distances_mi(&self) -> Option<&[f64]> {
        self.distances_mi.as_deref()
    }

    pub fn jacobian_check(&self) -> JacobianCheck {
        self.check
    }

    /// Damping-to-inertia ratio if it is the same for every machine
    /// (within 1e-9 relative), else `None`.
    pub fn uniform_damping_ratio(&self) -> Option<f64> {
        let g0 = self.damping[0] / self.inertia[0];
        for i in 1..self.n() {
            let gi = self.damping[i] / self.inertia[i];
            if (gi - g0).abs() > 1e-9 * g0.abs().max(1e-300) {
                return None;
            }
        }
        Some(g0)
    }

    /// Arithmetic mean of the per-machine damping ratios. Equals the
    /// uniform ratio when one exists; otherwise the stand-in used when
    /// a single ratio is needed for scaling.
    pub fn mean_damping_ratio(&self) -> f64 {
        (0..self.n())
            .map(|i| self.damping[i] / self.inertia[i])
            .sum::<f64>()
            / self.n() as f64
    }

    /// Row vector mapping rotor angles to one observable. Bus rows come
    /// from the bus angle map; a line row is susceptance * (e_from - e_to),
    /// so the observable is the linearized flow on that line.
    pub fn output_matrix(&self, outputs: &[OutputSpec]) -> Result<DMatrix<f64>> {
        let n = self.n();
        let mut rows = DMatrix::zeros(outputs.len(), n);
        for (r, spec) in outputs.iter().enumerate() {
            match *spec {
                OutputSpec::Bus(id) => {
                    let i = self
                        .index_of(id)
                        .ok_or_else(|| Error::UnknownReference(format!("bus {id}")))?;
                    rows.row_mut(r).copy_from(&self.bus_angle_map.row(i));
                }
                OutputSpec::Line(from, to) => {
                    let line = self
                        .lines
                        .iter()
                        .find(|l| {
                            (l.from == from && l.to == to) || (l.from == to && l.to == from)
                        })
                        .ok_or_else(|| Error::UnknownReference(format!("line {from}-{to}")))?;
                    let i = self.index_of(line.from).expect("validated at build");
                    let j = self.index_of(line.to).expect("validated at build");
                    let sign = if line.from == from { 1.0 } else { -1.0 };
                    rows[(r, i)] = sign * line.susceptance;
                    rows[(r, j)] = -sign * line.susceptance;
                }
            }
        }
        Ok(rows)
    }

    /// Serializes to the sectioned text format. Numbers use the shortest
    /// representation that parses back to the same value, so
    /// write -> parse -> write is a fixed point.
    pub fn to_case_string(&self) -> String {
        let n = self.n();
        let mut s = String::new();
        s.push_str("[machines]\n");
        s.push_str("# id inertia damping\n");
        for i in 0..n {
            writeln!(s, "{} {} {}", self.ids[i], self.inertia[i], self.damping[i]).unwrap();
        }
        s.push_str("\n[jacobian]\n");
        for r in 0..n {
            let row: Vec<String> = (0..n).map(|c| format!("{}", self.jacobian[(r, c)])).collect();
            writeln!(s, "{}", row.join(" ")).unwrap();
        }
        if self.bus_angle_map != DMatrix::identity(n, n) {
            s.push_str("\n[bus_angle_map]\n");
            for r in 0..n {
                let row: Vec<String> = (0..n)
                    .map(|c| format!("{}", self.bus_angle_map[(r, c)]))
                    .collect();
                writeln!(s, "{}", row.join(" ")).unwrap();
            }
        }
        if !self.lines.is_empty() {
            s.push_str("\n[lines]\n");
            s.push_str("# from to susceptance\n");
            for l in &self.lines {
                writeln!(s, "{} {} {}", l.from, l.to, l.susceptance).unwrap();
            }
        }
        if let Some(d) = &self.distances_mi {
            s.push_str("\n[coords]\n");
            s.push_str("# id distance_miles\n");
            for i in 0..n {
                writeln!(s, "{} {}", self.ids[i], d[i]).unwrap();
            }
        }
        s
    }

    pub fn write_case(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::atomic_write(path.as_ref(), self.to_case_string().as_bytes())
    }

    pub fn load_case(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_case_named(&text, &path.display().to_string())
    }
}

/// Pattern of couplings for synthetic cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Chain,
    Ring,
    Complete,
}

impl FromStr for Topology {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(Topology::Chain),
            "ring" => Ok(Topology::Ring),
            "complete" => Ok(Topology::Complete),
            other => Err(Error::Config(format!(
                "unknown topology {other:?}; expected chain, ring, or complete"
            ))),
        }
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Topology::Chain => "chain",
            Topology::Ring => "ring",
            Topology::Complete => "complete",
        })
    }
}

/// One observable to extract: a bus angle row or a line flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputSpec {
    Bus(u32),
    Line(u32, u32),
}

impl FromStr for OutputSpec {
    type Err = Error;

    /// Accepts `bus:3` and `line:1-2`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad output spec {s:?}; expected bus:N or line:N-M"));
        if let Some(id) = s.strip_prefix("bus:") {
            return id.parse().map(OutputSpec::Bus).map_err(|_| bad());
        }
        if let Some(pair) = s.strip_prefix("line:") {
            let (a, b) = pair.split_once('-').ok_or_else(bad)?;
            let from = a.parse().map_err(|_| bad())?;
            let to = b.parse().map_err(|_| bad())?;
            return Ok(OutputSpec::Line(from, to));
        }
        Err(bad())
    }
}

/// Generates a connected case with seeded random constants. Inertias
/// are drawn from [0.5, 2.0), dampings from [0.05, 0.6), couplings from
/// [0.5, 1.5). The jacobian is the weighted graph laplacian of the
/// chosen topology, so it is symmetric and positive semidefinite with
/// exactly one zero eigenvalue. Machine ids are 1..=n.
pub fn make_synthetic_case(n: usize, topology: Topology, seed: u64) -> Result<GridCase> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 machines, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inertia: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let damping: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.6)).collect();

    let mut edges: Vec<(usize, usize)> = Vec::new();
    match topology {
        Topology::Chain => {
            for i in 0..n - 1 {
                edges.push((i, i + 1));
            }
        }
        Topology::Ring => {
            for i in 0..n - 1 {
                edges.push((i, i + 1));
            }
            if n > 2 {
                edges.push((n - 1, 0));
            }
        }
        Topology::Complete => {
            for i in 0..n {
                for j in i + 1..n {
                    edges.push((i, j));
                }
            }
        }
    }

    let mut jac = DMatrix::zeros(n, n);
    let mut lines = Vec::with_capacity(edges.len());
    for &(i, j) in &edges {
        let w = rng.gen_range(0.5..1.5);
        jac[(i, j)] -= w;
        jac[(j, i)] -= w;
        jac[(i, i)] += w;
        jac[(j, j)] += w;
        lines.push(Line {
            from: (i + 1) as u32,
            to: (j + 1) as u32,
            susceptance: w,
        });
    }

    GridCase::new(
        (1..=n as u32).collect(),
        inertia,
        damping,
        jac,
        None,
        lines,
        None,
    )
}

/// Parses the sectioned case format. Unknown sections and malformed
/// rows are reported with their line number.
pub fn parse_case(text: &str) -> Result<GridCase> {
    parse_case_named(text, "<case>")
}

fn parse_case_named(text: &str, path: &str) -> Result<GridCase> {
    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        None,
        Machines,
        Jacobian,
        BusAngleMap,
        Lines,
        Coords,
    }

    let err = |line: usize, msg: String| Error::CaseFormat {
        path: path.to_string(),
        line,
        msg,
    };

    let mut section = Section::None;
    let mut ids: Vec<u32> = Vec::new();
    let mut inertia: Vec<f64> = Vec::new();
    let mut damping: Vec<f64> = Vec::new();
    let mut jac_rows: Vec<Vec<f64>> = Vec::new();
    let mut map_rows: Vec<Vec<f64>> = Vec::new();
    let mut lines: Vec<Line> = Vec::new();
    let mut coords: Vec<(u32, f64)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(lineno, format!("unterminated section header {line:?}")))?;
            section = match name {
                "machines" => Section::Machines,
                "jacobian" => Section::Jacobian,
                "bus_angle_map" => Section::BusAngleMap,
                "lines" => Section::Lines,
                "coords" => Section::Coords,
                other => return Err(err(lineno, format!("unknown section [{other}]"))),
            };
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse_f64 = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| err(lineno, format!("bad {what} {s:?}")))
        };
        let parse_u32 = |s: &str, what: &str| -> Result<u32> {
            s.parse()
                .map_err(|_| err(lineno, format!("bad {what} {s:?}")))
        };
        match section {
            Section::None => {
                return Err(err(lineno, "data before any section header".into()));
            }
            Section::Machines => {
                if fields.len() != 3 {
                    return Err(err(
                        lineno,
                        format!("expected `id inertia damping`, got {} fields", fields.len()),
                    ));
                }
                ids.push(parse_u32(fields[0], "machine id")?);
                inertia.push(parse_f64(fields[1], "inertia")?);
                damping.push(parse_f64(fields[2], "damping")?);
            }
            Section::Jacobian => {
                let row: Result<Vec<f64>> = fields
                    .iter()
                    .map(|f| parse_f64(f, "jacobian entry"))
                    .collect();
                jac_rows.push(row?);
            }
            Section::BusAngleMap => {
                let row: Result<Vec<f64>> =
                    fields.iter().map(|f| parse_f64(f, "map entry")).collect();
                map_rows.push(row?);
            }
            Section::Lines => {
                if fields.len() != 3 {
                    return Err(err(
                        lineno,
                        format!(
                            "expected `from to susceptance`, got {} fields",
                            fields.len()
                        ),
                    ));
                }
                lines.push(Line {
                    from: parse_u32(fields[0], "line endpoint")?,
                    to: parse_u32(fields[1], "line endpoint")?,
                    susceptance: parse_f64(fields[2], "susceptance")?,
                });
            }
            Section::Coords => {
                if fields.len() != 2 {
                    return Err(err(
                        lineno,
                        format!("expected `id distance_miles`, got {} fields", fields.len()),
                    ));
                }
                coords.push((
                    parse_u32(fields[0], "machine id")?,
                    parse_f64(fields[1], "distance")?,
                ));
            }
        }
    }

    let n = ids.len();
    if n == 0 {
        return Err(err(0, "no [machines] section".into()));
    }
    let to_matrix = |rows: Vec<Vec<f64>>, what: &str| -> Result<DMatrix<f64>> {
        let r = rows.len();
        if r == 0 {
            return Err(err(0, format!("empty [{what}] section")));
        }
        let c = rows[0].len();
        if rows.iter().any(|row| row.len() != c) {
            return Err(err(0, format!("[{what}] rows have unequal lengths")));
        }
        Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
    };
    let jacobian = to_matrix(jac_rows, "jacobian")?;
    let bus_angle_map = if map_rows.is_empty() {
        None
    } else {
        Some(to_matrix(map_rows, "bus_angle_map")?)
    };
    let distances = if coords.is_empty() {
        None
    } else {
        let mut d = vec![f64::NAN; n];
        for (id, dist) in coords {
            let i = ids
                .iter()
                .position(|&x| x == id)
                .ok_or_else(|| err(0, format!("[coords] references unknown machine {id}")))?;
            d[i] = dist;
        }
        if d.iter().any(|x| x.is_nan()) {
            return Err(err(0, "[coords] must cover every machine".into()));
        }
        Some(d)
    };

    GridCase::new(ids, inertia, damping, jacobian, bus_angle_map, lines, distances)
}

/// Two identical machines joined by one unit line. The modal structure
/// is a rigid drift plus a single 1/pi-frequency swing between them.
pub fn two_machine_case() -> GridCase {
    parse_case(include_str!("../cases/two_machine.case")).expect("bundled case is valid")
}

/// Three-machine reduced system with heterogeneous inertias and a
/// uniform damping ratio of 0.2. Swing modes sit near 0.64 and 0.80 Hz.
pub fn wscc9_reduced_case() -> GridCase {
    parse_case(include_str!("../cases/wscc9_reduced.case")).expect("bundled case is valid")
}

/// The three-machine system with damping ratios 0.1, 0.2, and 0.3
/// across the machines, breaking the uniform-ratio assumption.
pub fn wscc9_nonuniform_case() -> GridCase {
    parse_case(include_str!("../cases/wscc9_nonuniform.case")).expect("bundled case is valid")
}

/// Four identical machines in a chain with distance coordinates, for
/// disturbance-arrival studies along a corridor.
pub fn chain4_case() -> GridCase {
    parse_case(include_str!("../cases/chain4.case")).expect("bundled case is valid")
}

/// Resolves `builtin:<name>` to a bundled case, otherwise loads the
/// argument as a file path.
pub fn resolve_case(spec: &str) -> Result<GridCase> {
    match spec.strip_prefix("builtin:") {
        Some("two_machine") => Ok(two_machine_case()),
        Some("wscc9_reduced") => Ok(wscc9_reduced_case()),
        Some("wscc9_nonuniform") => Ok(wscc9_nonuniform_case()),
        Some("chain4") => Ok(chain4_case()),
        Some(other) => Err(Error::UnknownReference(format!(
            "builtin case {other:?} (have two_machine, wscc9_reduced, wscc9_nonuniform, chain4)"
        ))),
        None => GridCase::load_case(spec),
    }
}
