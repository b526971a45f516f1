//! Text format for quantum-gas-microscope images.
//!
//! ```text
//! #snapshot 0007 spacing_nm=266 tau_s=0.27 theta_deg=6
//! ..u.d
//! .ud..
//! ```
//!
//! One block per image, separated by a blank line. Row `y` of the lattice is
//! line `y` of the grid. Cells are `.` (empty), `1` (atom, spin not
//! resolved), `u` and `d`. Header tokens after `spacing_nm` are free
//! `key=value` pairs kept in order.

use std::fmt::Write as _;

use dipsq_core::lattice::{Cloud, CloudLabel, LatticeGeometry};
use dipsq_core::observables::{Reading, ShotMeta, ShotRecord, ShotSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Empty,
    Atom,
    Up,
    Down,
}

impl Cell {
    fn from_char(c: char) -> Option<Self> {
        Some(match c {
            '.' => Cell::Empty,
            '1' => Cell::Atom,
            'u' => Cell::Up,
            'd' => Cell::Down,
            _ => return None,
        })
    }

    fn as_char(self) -> char {
        match self {
            Cell::Empty => '.',
            Cell::Atom => '1',
            Cell::Up => 'u',
            Cell::Down => 'd',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub id: String,
    pub spacing_nm: f64,
    pub extras: Vec<(String, String)>,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `y * nx + x`.
    pub cells: Vec<Cell>,
}

impl Snapshot {
    pub fn geometry(&self) -> Result<LatticeGeometry, dipsq_core::Error> {
        LatticeGeometry::new(self.spacing_nm * 1e-9, self.nx, self.ny)
    }

    pub fn extra(&self, key: &str) -> Option<&str> {
        self.extras.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Occupation only; spin information is dropped.
    pub fn to_cloud(&self) -> Result<Cloud, dipsq_core::Error> {
        let geom = self.geometry()?;
        Cloud::from_occupation(&geom, self.cells.iter().map(|c| *c != Cell::Empty).collect())
    }

    /// Spin-resolved readings. `None` if any atom lacks a spin.
    pub fn to_shot(&self) -> Option<ShotRecord> {
        let readings = self
            .cells
            .iter()
            .map(|c| match c {
                Cell::Empty => Some(Reading::Empty),
                Cell::Up => Some(Reading::Up),
                Cell::Down => Some(Reading::Down),
                Cell::Atom => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(ShotRecord { readings })
    }

    /// Occupation image of a cloud, every atom written as `1`.
    pub fn from_cloud(id: impl Into<String>, geom: &LatticeGeometry, cloud: &Cloud) -> Self {
        Self {
            id: id.into(),
            spacing_nm: geom.spacing_m * 1e9,
            extras: Vec::new(),
            nx: geom.nx,
            ny: geom.ny,
            cells: cloud
                .occupation()
                .iter()
                .map(|&o| if o { Cell::Atom } else { Cell::Empty })
                .collect(),
        }
    }
}

/// Parses every block of `text`. Line and column numbers are 1-based.
pub fn parse(text: &str) -> Result<Vec<Snapshot>, ParseError> {
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    loop {
        while matches!(lines.peek(), Some((_, l)) if l.trim().is_empty()) {
            lines.next();
        }
        let Some((idx, header)) = lines.next() else { break };
        let line_no = idx + 1;
        let mut snap = parse_header(header, line_no)?;
        while let Some((idx, row)) = lines.next_if(|(_, l)| !l.trim().is_empty()) {
            let line_no = idx + 1;
            if row.starts_with('#') {
                return Err(err(line_no, 1, "header inside a grid; separate blocks with a blank line"));
            }
            let width = row.chars().count();
            if snap.ny == 0 {
                snap.nx = width;
            } else if width != snap.nx {
                return Err(err(line_no, width.min(snap.nx) + 1, format!("ragged row: {width} cells, expected {}", snap.nx)));
            }
            for (col, ch) in row.chars().enumerate() {
                let cell = Cell::from_char(ch).ok_or_else(|| err(line_no, col + 1, format!("unexpected character {ch:?}")))?;
                snap.cells.push(cell);
            }
            snap.ny += 1;
        }
        if snap.ny == 0 || snap.nx == 0 {
            return Err(err(line_no, 1, format!("snapshot {} has an empty grid", snap.id)));
        }
        out.push(snap);
    }
    Ok(out)
}

fn parse_header(line: &str, line_no: usize) -> Result<Snapshot, ParseError> {
    let mut tokens = line.split(' ');
    if tokens.next() != Some("#snapshot") {
        return Err(err(line_no, 1, "expected `#snapshot <id> spacing_nm=<a>`"));
    }
    let mut column = "#snapshot ".len() + 1;
    let id = match tokens.next() {
        Some(id) if !id.is_empty() && !id.contains('=') => id.to_string(),
        _ => return Err(err(line_no, column, "missing snapshot id")),
    };
    column += id.len() + 1;
    let spacing = tokens
        .next()
        .and_then(|t| t.strip_prefix("spacing_nm="))
        .ok_or_else(|| err(line_no, column, "missing spacing_nm=<a>"))?;
    let spacing_nm: f64 = spacing
        .parse()
        .ok()
        .filter(|v: &f64| *v > 0.0 && v.is_finite())
        .ok_or_else(|| err(line_no, column + "spacing_nm=".len(), format!("bad spacing {spacing:?}")))?;
    column += "spacing_nm=".len() + spacing.len() + 1;
    let mut extras = Vec::new();
    for t in tokens {
        match t.split_once('=') {
            Some((k, v)) if !k.is_empty() && !v.is_empty() => extras.push((k.to_string(), v.to_string())),
            _ => return Err(err(line_no, column, format!("expected key=value, got {t:?}"))),
        }
        column += t.len() + 1;
    }
    Ok(Snapshot {
        id,
        spacing_nm,
        extras,
        nx: 0,
        ny: 0,
        cells: Vec::new(),
    })
}

/// Canonical text: single spaces in headers, one blank line between blocks,
/// trailing newline.
pub fn emit(snapshots: &[Snapshot]) -> String {
    let mut s = String::new();
    for (k, snap) in snapshots.iter().enumerate() {
        if k > 0 {
            s.push('\n');
        }
        write!(s, "#snapshot {} spacing_nm={}", snap.id, snap.spacing_nm).unwrap();
        for (key, v) in &snap.extras {
            write!(s, " {key}={v}").unwrap();
        }
        s.push('\n');
        for row in snap.cells.chunks(snap.nx) {
            s.extend(row.iter().map(|c| c.as_char()));
            s.push('\n');
        }
    }
    s
}

#[derive(Debug, thiserror::Error)]
pub enum ShotError {
    #[error("snapshot {0} has atoms without resolved spin ('1'); analysis needs u/d")]
    Unresolved(String),
    #[error("snapshot {id} is {nx}x{ny} at {spacing} nm, expected {enx}x{eny} at {espacing} nm")]
    Geometry {
        id: String,
        nx: usize,
        ny: usize,
        spacing: f64,
        enx: usize,
        eny: usize,
        espacing: f64,
    },
    #[error("no snapshots")]
    Empty,
    #[error(transparent)]
    Core(#[from] dipsq_core::Error),
}

/// Builds one shot set from spin-resolved snapshots of a common geometry.
/// With `split_column`, sites left of the column are cloud A, the rest B.
pub fn shot_set(snapshots: &[&Snapshot], split_column: Option<usize>, meta: ShotMeta) -> Result<ShotSet, ShotError> {
    let first = snapshots.first().ok_or(ShotError::Empty)?;
    let geom = first.geometry()?;
    let mut shots = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        if (s.nx, s.ny, s.spacing_nm) != (first.nx, first.ny, first.spacing_nm) {
            return Err(ShotError::Geometry {
                id: s.id.clone(),
                nx: s.nx,
                ny: s.ny,
                spacing: s.spacing_nm,
                enx: first.nx,
                eny: first.ny,
                espacing: first.spacing_nm,
            });
        }
        shots.push(s.to_shot().ok_or_else(|| ShotError::Unresolved(s.id.clone()))?);
    }
    let labels = (0..geom.num_sites())
        .map(|site| {
            split_column.map(|c| {
                if geom.coords(site).0 < c {
                    CloudLabel::A
                } else {
                    CloudLabel::B
                }
            })
        })
        .collect();
    Ok(ShotSet::new(geom, labels, shots, meta)?)
}
