//! Atom lists from PQR, XYZR and PDB text.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom {
    pub center: [f64; 3],
    pub radius: f64,
    pub charge: Option<f64>,
    pub element: Option<String>,
    pub serial: Option<String>,
    pub name: Option<String>,
    pub residue: Option<String>,
}

impl Atom {
    pub fn new(center: [f64; 3], radius: f64) -> Self {
        Self {
            center,
            radius,
            charge: None,
            element: None,
            serial: None,
            name: None,
            residue: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Pqr,
    Pdb,
    Xyzr,
}

impl FileFormat {
    pub fn from_extension(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pqr" => Some(Self::Pqr),
            "pdb" | "ent" => Some(Self::Pdb),
            "xyzr" | "xyz" => Some(Self::Xyzr),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Source {
    pub path: Option<PathBuf>,
    pub format: FileFormat,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub source: Source,
}

impl Molecule {
    fn build(atoms: Vec<Atom>, format: FileFormat, warnings: Vec<String>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::NoAtoms);
        }
        Ok(Self {
            atoms,
            source: Source {
                path: None,
                format,
                warnings,
            },
        })
    }

    /// Molecule from bare spheres, mostly for tests and synthetic inputs.
    pub fn from_spheres(spheres: &[([f64; 3], f64)]) -> Result<Self> {
        let atoms = spheres.iter().map(|&(c, r)| Atom::new(c, r)).collect();
        Self::build(atoms, FileFormat::Xyzr, Vec::new())
    }

    /// Axis-aligned box containing every `center +- radius`.
    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for a in &self.atoms {
            for d in 0..3 {
                lo[d] = lo[d].min(a.center[d] - a.radius);
                hi[d] = hi[d].max(a.center[d] + a.radius);
            }
        }
        (lo, hi)
    }

    pub fn max_radius(&self) -> f64 {
        self.atoms.iter().map(|a| a.radius).fold(0.0, f64::max)
    }
}

fn parse_number(token: &str, line: usize, what: &str) -> Result<f64> {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("invalid {what} {token:?}"),
        }),
    }
}

fn check_radius(radius: f64, line: usize) -> Result<f64> {
    if radius > 0.0 {
        Ok(radius)
    } else {
        Err(Error::Parse {
            line,
            message: format!("radius {radius} must be positive"),
        })
    }
}

fn is_atom_record(record: &str) -> bool {
    record == "ATOM" || record == "HETATM"
}

/// Whitespace-tokenized PQR. The last five fields of each ATOM/HETATM record
/// are `x y z charge radius`; the fields between the record name and the
/// coordinates are serial, atom name, residue name and whatever chain /
/// residue-number columns the writer chose to emit.
pub fn parse_pqr(text: &str) -> Result<Molecule> {
    let mut atoms = Vec::new();
    let mut warnings = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        let Some(&record) = tokens.first() else {
            continue;
        };
        if !is_atom_record(record) {
            continue;
        }
        if tokens.len() < 9 {
            return Err(Error::Parse {
                line,
                message: format!("expected at least 9 fields, found {}", tokens.len()),
            });
        }
        let tail = &tokens[tokens.len() - 5..];
        let center = [
            parse_number(tail[0], line, "x coordinate")?,
            parse_number(tail[1], line, "y coordinate")?,
            parse_number(tail[2], line, "z coordinate")?,
        ];
        let charge = parse_number(tail[3], line, "charge")?;
        let radius = check_radius(parse_number(tail[4], line, "radius")?, line)?;
        let middle = &tokens[4..tokens.len() - 5];
        if middle.is_empty() {
            warnings.push(format!("line {line}: no residue number"));
        }
        atoms.push(Atom {
            center,
            radius,
            charge: Some(charge),
            element: None,
            serial: Some(tokens[1].to_string()),
            name: Some(tokens[2].to_string()),
            residue: Some(
                std::iter::once(tokens[3])
                    .chain(middle.iter().copied())
                    .collect::<Vec<_>>()
                    .join(" "),
            ),
        });
    }
    Molecule::build(atoms, FileFormat::Pqr, warnings)
}

/// PQR text in the column layout PDB2PQR writes.
pub fn write_pqr(mol: &Molecule) -> String {
    let mut out = String::new();
    for (i, a) in mol.atoms.iter().enumerate() {
        let serial = a.serial.clone().unwrap_or_else(|| (i + 1).to_string());
        let name = a.name.as_deref().unwrap_or("X");
        let residue = a.residue.as_deref().unwrap_or("UNK 1");
        let _ = writeln!(
            out,
            "ATOM  {serial:>5} {name:<4} {residue} {:8.3}{:8.3}{:8.3} {:7.4} {:6.4}",
            a.center[0],
            a.center[1],
            a.center[2],
            a.charge.unwrap_or(0.0),
            a.radius
        );
    }
    out.push_str("END\n");
    out
}

/// One `x y z r` quadruple per non-blank line; `#` starts a comment.
pub fn parse_xyzr(text: &str) -> Result<Molecule> {
    let mut atoms = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() < 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 numeric fields, found {}", tokens.len()),
            });
        }
        let v = [
            parse_number(tokens[0], line, "x coordinate")?,
            parse_number(tokens[1], line, "y coordinate")?,
            parse_number(tokens[2], line, "z coordinate")?,
            parse_number(tokens[3], line, "radius")?,
        ];
        atoms.push(Atom::new([v[0], v[1], v[2]], check_radius(v[3], line)?));
    }
    Molecule::build(atoms, FileFormat::Xyzr, Vec::new())
}

/// Per-element van der Waals radii used for bare PDB input.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiiTable {
    pub entries: Vec<(String, f64)>,
    pub default: f64,
}

impl RadiiTable {
    /// Bondi (1964) radii in Å.
    pub fn bondi() -> Self {
        let entries = [
            ("H", 1.20),
            ("C", 1.70),
            ("N", 1.55),
            ("O", 1.52),
            ("S", 1.80),
            ("P", 1.80),
        ];
        Self {
            entries: entries.iter().map(|&(e, r)| (e.to_string(), r)).collect(),
            default: 1.50,
        }
    }

    pub fn get(&self, element: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(e, _)| e.eq_ignore_ascii_case(element))
            .map(|&(_, r)| r)
    }
}

impl Default for RadiiTable {
    fn default() -> Self {
        Self::bondi()
    }
}

#[derive(Debug, Clone, Default)]
pub struct PdbOptions {
    pub radii: RadiiTable,
    pub strip_solvent: bool,
}

const SOLVENT_NAMES: [&str; 5] = ["HOH", "WAT", "H2O", "TIP3", "SOL"];

fn columns(line: &str, start: usize, end: usize) -> &str {
    // 1-based inclusive PDB column range, clipped to the line.
    let s = start - 1;
    if s >= line.len() {
        return "";
    }
    line.get(s..end.min(line.len())).unwrap_or("").trim()
}

fn element_from_name(name: &str) -> Option<String> {
    name.chars()
        .find(|c| c.is_ascii_alphabetic())
        .map(|c| c.to_ascii_uppercase().to_string())
}

pub fn parse_pdb(text: &str, options: &PdbOptions) -> Result<Molecule> {
    let mut atoms = Vec::new();
    let mut warnings = Vec::new();
    let mut seen_altloc = HashSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        if !raw.is_ascii() {
            return Err(Error::Parse {
                line,
                message: "non-ASCII characters in fixed-column record".into(),
            });
        }
        let record = columns(raw, 1, 6);
        if !is_atom_record(record) {
            continue;
        }
        if raw.len() < 54 {
            return Err(Error::Parse {
                line,
                message: format!("record has {} columns, coordinates need 54", raw.len()),
            });
        }
        let residue_name = columns(raw, 18, 20);
        if options.strip_solvent && SOLVENT_NAMES.contains(&residue_name) {
            continue;
        }
        let name = columns(raw, 13, 16);
        let chain = columns(raw, 22, 22);
        let res_seq = columns(raw, 23, 26);
        let altloc = columns(raw, 17, 17);
        if !altloc.is_empty() {
            let key = format!("{chain}:{res_seq}:{name}");
            if !seen_altloc.insert(key) {
                continue;
            }
        }
        let center = [
            parse_number(columns(raw, 31, 38), line, "x coordinate")?,
            parse_number(columns(raw, 39, 46), line, "y coordinate")?,
            parse_number(columns(raw, 47, 54), line, "z coordinate")?,
        ];
        let element = match columns(raw, 77, 78) {
            "" => element_from_name(name),
            e => Some(e.to_ascii_uppercase()),
        };
        let radius = match element.as_deref().and_then(|e| options.radii.get(e)) {
            Some(r) => r,
            None => {
                warnings.push(format!(
                    "line {line}: unknown element {:?}, using default radius {}",
                    element.as_deref().unwrap_or(""),
                    options.radii.default
                ));
                options.radii.default
            }
        };
        atoms.push(Atom {
            center,
            radius,
            charge: None,
            element,
            serial: Some(columns(raw, 7, 11).to_string()),
            name: Some(name.to_string()),
            residue: Some(format!("{residue_name} {chain} {res_seq}")),
        });
    }
    Molecule::build(atoms, FileFormat::Pdb, warnings)
}

pub fn parse(text: &str, format: FileFormat, pdb: &PdbOptions) -> Result<Molecule> {
    match format {
        FileFormat::Pqr => parse_pqr(text),
        FileFormat::Xyzr => parse_xyzr(text),
        FileFormat::Pdb => parse_pdb(text, pdb),
    }
}

/// Reads a structure file; `format = None` picks by extension.
pub fn read_molecule(path: &Path, format: Option<FileFormat>, pdb: &PdbOptions) -> Result<Molecule> {
    let format = match format.or_else(|| FileFormat::from_extension(path)) {
        Some(f) => f,
        None => {
            return Err(Error::Format(format!(
                "cannot infer structure format from {}",
                path.display()
            )))
        }
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut mol = parse(&text, format, pdb)?;
    mol.source.path = Some(path.to_path_buf());
    Ok(mol)
}
