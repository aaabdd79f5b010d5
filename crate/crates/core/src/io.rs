//! PDB backbone files, case manifests and per-residue embedding files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{AminoAcid, Chain, ComplexState, Frame, ResidueInfo, Vec3};

/// N, CA and C of one residue.
#[derive(Clone, Debug, PartialEq)]
pub struct BackboneRecord {
    pub chain: char,
    pub seq: i32,
    pub icode: char,
    pub name: String,
    pub n: Vec3,
    pub ca: Vec3,
    pub c: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdbBackbone {
    pub records: Vec<BackboneRecord>,
    /// Residues skipped because N, CA or C was missing.
    pub dropped: usize,
}

fn column<'a>(line: &'a str, range: std::ops::Range<usize>) -> &'a str {
    line.get(range.start.min(line.len())..range.end.min(line.len())).unwrap_or("")
}

#[derive(Default)]
struct Partial {
    name: String,
    n: Option<Vec3>,
    ca: Option<Vec3>,
    c: Option<Vec3>,
}

/// Parses N/CA/C `ATOM` records of the first model. Alternate locations
/// other than blank or `A` are ignored.
pub fn parse_pdb_str(text: &str, path: &str) -> Result<PdbBackbone> {
    let mut order: Vec<(char, i32, char)> = Vec::new();
    let mut residues: BTreeMap<(char, i32, char), Partial> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with("ENDMDL") {
            break;
        }
        if !line.starts_with("ATOM  ") {
            continue;
        }
        let err = |msg: String| Error::Parse { path: path.into(), line: i + 1, msg };
        let atom = column(line, 12..16).trim();
        if !matches!(atom, "N" | "CA" | "C") {
            continue;
        }
        let alt = column(line, 16..17);
        if !(alt.is_empty() || alt == " " || alt == "A") {
            continue;
        }
        let coord = |r: std::ops::Range<usize>, axis: &str| {
            column(line, r).trim().parse::<f64>().map_err(|_| err(format!("malformed {axis} coordinate")))
        };
        let x = Vec3::new(coord(30..38, "x")?, coord(38..46, "y")?, coord(46..54, "z")?);
        let seq = column(line, 22..26).trim().parse::<i32>().map_err(|_| err("malformed residue number".into()))?;
        let chain = column(line, 21..22).chars().next().unwrap_or(' ');
        let icode = column(line, 26..27).chars().next().unwrap_or(' ');
        let key = (chain, seq, icode);
        let entry = residues.entry(key).or_insert_with(|| {
            order.push(key);
            Partial { name: column(line, 17..20).trim().to_string(), ..Partial::default() }
        });
        let slot = match atom {
            "N" => &mut entry.n,
            "CA" => &mut entry.ca,
            _ => &mut entry.c,
        };
        slot.get_or_insert(x);
    }
    let mut dropped = 0;
    let records: Vec<BackboneRecord> = order
        .into_iter()
        .filter_map(|key| {
            let p = residues.remove(&key).expect("residue recorded");
            match (p.n, p.ca, p.c) {
                (Some(n), Some(ca), Some(c)) => {
                    Some(BackboneRecord { chain: key.0, seq: key.1, icode: key.2, name: p.name, n, ca, c })
                }
                _ => {
                    dropped += 1;
                    None
                }
            }
        })
        .collect();
    if dropped > 0 {
        log::warn!("{path}: dropped {dropped} residue(s) with incomplete backbone");
    }
    if records.is_empty() {
        return Err(Error::EmptyStructure(path.into()));
    }
    Ok(PdbBackbone { records, dropped })
}

pub fn parse_pdb_backbone(path: &Path) -> Result<PdbBackbone> {
    parse_pdb_str(&std::fs::read_to_string(path)?, &path.display().to_string())
}

/// All residues of the records as one chain, named after the first
/// record's chain id.
pub fn chain_from_records(records: &[BackboneRecord]) -> Result<Chain> {
    let first = records.first().ok_or_else(|| Error::EmptyStructure("no records".into()))?;
    let residues = records.iter().map(|r| ResidueInfo::new(r.seq, AminoAcid::from_three_letter(&r.name))).collect();
    let frames = records.iter().map(|r| Frame::from_backbone(&r.n, &r.ca, &r.c)).collect::<Result<Vec<_>>>()?;
    Chain::new(first.chain, residues, frames)
}

pub fn read_chain(path: &Path) -> Result<Chain> {
    chain_from_records(&parse_pdb_backbone(path)?.records)
}

fn atom_line(out: &mut String, serial: usize, atom: &str, res: &str, chain: char, seq: i32, icode: char, x: &Vec3) {
    let element = &atom[..1];
    let _ = writeln!(
        out,
        "ATOM  {:>5} {:<4}{}{:>3} {}{:>4}{}   {:>8.3}{:>8.3}{:>8.3}{:>6.2}{:>6.2}          {:>2}",
        serial % 100_000,
        format!(" {atom}"),
        ' ',
        res,
        chain,
        seq,
        icode,
        x.x,
        x.y,
        x.z,
        1.0,
        0.0,
        element
    );
}

/// Writes the records verbatim.
pub fn format_records(records: &[BackboneRecord]) -> String {
    let mut out = String::new();
    let mut serial = 1;
    for r in records {
        for (atom, x) in [("N", &r.n), ("CA", &r.ca), ("C", &r.c)] {
            atom_line(&mut out, serial, atom, &r.name, r.chain, r.seq, r.icode, x);
            serial += 1;
        }
    }
    out.push_str("END\n");
    out
}

fn chain_records(chain: &Chain) -> Vec<BackboneRecord> {
    chain
        .residues
        .iter()
        .zip(&chain.frames)
        .map(|(r, f)| {
            let [n, ca, c] = f.backbone_atoms();
            BackboneRecord { chain: chain.id, seq: r.seq, icode: ' ', name: r.aa.three_letter().into(), n, ca, c }
        })
        .collect()
}

/// Backbone records of both chains with N and C rebuilt from the frames.
pub fn state_records(state: &ComplexState) -> Vec<BackboneRecord> {
    let mut r = chain_records(&state.receptor);
    r.extend(chain_records(&state.ligand));
    r
}

fn format_model(out: &mut String, state: &ComplexState) {
    let mut serial = 1;
    for chain in [&state.receptor, &state.ligand] {
        for r in chain_records(chain) {
            for (atom, x) in [("N", &r.n), ("CA", &r.ca), ("C", &r.c)] {
                atom_line(out, serial, atom, &r.name, r.chain, r.seq, r.icode, x);
                serial += 1;
            }
        }
        let _ = writeln!(out, "TER");
    }
}

/// One chain as a standalone structure.
pub fn format_chain(chain: &Chain) -> String {
    format_records(&chain_records(chain))
}

pub fn write_chain(chain: &Chain, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, format_chain(chain))?)
}

pub fn format_state(state: &ComplexState) -> String {
    let mut out = String::new();
    format_model(&mut out, state);
    out.push_str("END\n");
    out
}

/// One `MODEL`/`ENDMDL` block per state.
pub fn format_models(states: &[ComplexState]) -> String {
    let mut out = String::new();
    for (k, s) in states.iter().enumerate() {
        let _ = writeln!(out, "MODEL     {:>4}", k + 1);
        format_model(&mut out, s);
        let _ = writeln!(out, "ENDMDL");
    }
    out.push_str("END\n");
    out
}

pub fn write_pdb(state: &ComplexState, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, format_state(state))?)
}

pub fn write_models(states: &[ComplexState], path: &Path) -> Result<()> {
    Ok(std::fs::write(path, format_models(states))?)
}

/// Splits a complex file into receptor and ligand by residue count.
pub fn read_complex(path: &Path, n_receptor: usize) -> Result<ComplexState> {
    let parsed = parse_pdb_backbone(path)?;
    if parsed.records.len() <= n_receptor {
        return Err(Error::Correspondence(format!(
            "{} has {} residues, expected more than the {n_receptor} receptor residues",
            path.display(),
            parsed.records.len()
        )));
    }
    let (r, l) = parsed.records.split_at(n_receptor);
    Ok(ComplexState::new(chain_from_records(r)?, chain_from_records(l)?))
}

/// Per-residue embedding vectors keyed by chain and residue number.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub width: usize,
    pub rows: BTreeMap<(char, i32), Vec<f64>>,
}

/// One line per residue: chain id, residue number, then `width` floats.
pub fn parse_embeddings(text: &str, path: &str) -> Result<Embeddings> {
    let mut width = None;
    let mut rows = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { path: path.into(), line: i + 1, msg };
        let mut it = line.split_whitespace();
        let chain = it.next().and_then(|c| (c.len() == 1).then(|| c.chars().next().unwrap()));
        let chain = chain.ok_or_else(|| err("expected a one-character chain id".into()))?;
        let seq = it.next().and_then(|s| s.parse::<i32>().ok()).ok_or_else(|| err("expected a residue number".into()))?;
        let v = it.map(|s| s.parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>();
        let v = v.map_err(|_| err("malformed embedding value".into()))?;
        match width {
            None => width = Some(v.len()),
            Some(w) if w != v.len() => return Err(err(format!("expected {w} values, got {}", v.len()))),
            _ => {}
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(err("non-finite embedding value".into()));
        }
        if rows.insert((chain, seq), v).is_some() {
            return Err(err(format!("duplicate residue {chain} {seq}")));
        }
    }
    Ok(Embeddings { width: width.unwrap_or(0), rows })
}

pub fn read_embeddings(path: &Path) -> Result<Embeddings> {
    parse_embeddings(&std::fs::read_to_string(path)?, &path.display().to_string())
}

pub fn format_embeddings(chain: &Chain, rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for (r, v) in chain.residues.iter().zip(rows) {
        let _ = write!(out, "{} {}", chain.id, r.seq);
        for x in v {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    out
}

impl Embeddings {
    /// Rows in the residue order of `chain`.
    pub fn for_chain(&self, chain: &Chain, path: &Path) -> Result<Vec<Vec<f64>>> {
        chain
            .residues
            .iter()
            .map(|r| {
                self.rows.get(&(chain.id, r.seq)).cloned().ok_or_else(|| Error::Format {
                    path: path.to_path_buf(),
                    msg: format!("no embedding for residue {} {}", chain.id, r.seq),
                })
            })
            .collect()
    }
}

/// One docking case.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseEntry {
    pub id: String,
    pub receptor: PathBuf,
    pub ligand: PathBuf,
    pub bound: Option<PathBuf>,
    pub receptor_embedding: Option<PathBuf>,
    pub ligand_embedding: Option<PathBuf>,
    pub irmsd: Option<f64>,
}

/// Tab-separated lines:
/// `id  receptor  ligand  [bound  [rec_emb  lig_emb  [irmsd]]]`; `-`
/// marks an absent optional field. Paths are relative to the manifest.
pub fn parse_manifest(text: &str, path: &Path) -> Result<Vec<CaseEntry>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let shown = path.display().to_string();
    let mut cases = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { path: shown.clone(), line: i + 1, msg };
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if !(3..=7).contains(&cols.len()) {
            return Err(err(format!("expected 3 to 7 tab-separated fields, got {}", cols.len())));
        }
        let opt = |k: usize| cols.get(k).copied().filter(|c| *c != "-" && !c.is_empty());
        let file = |s: &str| -> Result<PathBuf> {
            let p = base.join(s);
            if !p.is_file() {
                return Err(err(format!("missing file {}", p.display())));
            }
            Ok(p)
        };
        let irmsd = match opt(6) {
            Some(v) => Some(v.parse::<f64>().ok().filter(|x| *x > 0.0).ok_or_else(|| err(format!("bad iRMSD `{v}`")))?),
            None => None,
        };
        if opt(4).is_some() != opt(5).is_some() {
            return Err(err("embedding files must be given for both chains or neither".into()));
        }
        cases.push(CaseEntry {
            id: cols[0].to_string(),
            receptor: file(cols[1])?,
            ligand: file(cols[2])?,
            bound: opt(3).map(file).transpose()?,
            receptor_embedding: opt(4).map(file).transpose()?,
            ligand_embedding: opt(5).map(file).transpose()?,
            irmsd,
        });
    }
    Ok(cases)
}

pub fn read_manifest(path: &Path) -> Result<Vec<CaseEntry>> {
    parse_manifest(&std::fs::read_to_string(path)?, path)
}

/// Structures of one case.
#[derive(Clone, Debug)]
pub struct LoadedCase {
    pub entry: CaseEntry,
    pub unbound: ComplexState,
    pub bound: Option<ComplexState>,
    pub embeddings: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>,
}

impl LoadedCase {
    pub fn load(entry: &CaseEntry) -> Result<Self> {
        let unbound = ComplexState::new(read_chain(&entry.receptor)?, read_chain(&entry.ligand)?);
        let bound = match &entry.bound {
            Some(p) => {
                let b = read_complex(p, unbound.n_receptor())?;
                b.same_shape(&unbound)?;
                Some(b)
            }
            None => None,
        };
        let embeddings = match (&entry.receptor_embedding, &entry.ligand_embedding) {
            (Some(r), Some(l)) => {
                let (er, el) = (read_embeddings(r)?, read_embeddings(l)?);
                if er.width != el.width {
                    return Err(Error::Format { path: l.clone(), msg: "embedding widths differ between chains".into() });
                }
                Some((er.for_chain(&unbound.receptor, r)?, el.for_chain(&unbound.ligand, l)?))
            }
            _ => None,
        };
        Ok(Self { entry: entry.clone(), unbound, bound, embeddings })
    }

    pub fn embedding_width(&self) -> usize {
        self.embeddings.as_ref().and_then(|(r, _)| r.first()).map_or(0, Vec::len)
    }

    pub fn embedding_refs(&self) -> Option<(&[Vec<f64>], &[Vec<f64>])> {
        self.embeddings.as_ref().map(|(r, l)| (r.as_slice(), l.as_slice()))
    }
}
