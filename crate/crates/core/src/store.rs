//! On-disk formats. All binary files are little-endian with a four-byte magic.
//!
//! | file              | magic  | layout                                                        |
//! |-------------------|--------|---------------------------------------------------------------|
//! | `grid.bin`        | `CPG1` | nx, nr (u32); x, r, cell_area (f64); region label (u8/node)   |
//! | `var_<name>.bin`  | `CPS1` | T, nodes (u32); T×nodes f64, time-major                       |
//! | `basis_<var>.bin` | `CPB1` | K, nodes (u32); mean; K modes; K eigenvalues; quadrature; total energy (f64); centered (u8) |
//! | `coeffs_<var>.bin`| `CPC1` | K, n, T (u32); K×n×T f64                                      |
//! | `gp_<var>.bin`    | `CPK1` | records, p (u32); per record mu, sigma2, eta[p], nugget (f64) |

use std::fs;
use std::path::{Path, PathBuf};

use crate::design::{DesignPoint, DesignSpace};
use crate::error::{Error, Result};
use crate::field::{AxisymGrid, CaseGeometry, Region, SnapshotSeries, Variable};
use crate::kriging::GpParams;
use crate::oracle::{oracle_fields_for, SamplingSpec};
use crate::pod::CoeffTable;

const GRID_MAGIC: &[u8; 4] = b"CPG1";
const SERIES_MAGIC: &[u8; 4] = b"CPS1";
const BASIS_MAGIC: &[u8; 4] = b"CPB1";
const COEFF_MAGIC: &[u8; 4] = b"CPC1";
const GP_MAGIC: &[u8; 4] = b"CPK1";

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn magic(&mut self, m: &[u8; 4]) {
        self.0.extend_from_slice(m);
    }

    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("count {v} exceeds u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }

    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, v: &[f64]) {
        self.0.reserve(8 * v.len());
        v.iter().for_each(|x| self.f64(*x));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'a str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'a str, magic: &[u8; 4]) -> Result<Self> {
        if buf.len() < 4 || &buf[..4] != magic {
            return Err(Error::Format(format!("{what}: expected magic {}", String::from_utf8_lossy(magic))));
        }
        Ok(Self { buf, pos: 4, what })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format(format!("{}: truncated at byte {}", self.what, self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format(format!("{}: size overflow", self.what)))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("{}: {} trailing bytes", self.what, self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn encode_grid(grid: &AxisymGrid) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.magic(GRID_MAGIC);
    w.u32(grid.nx())?;
    w.u32(grid.nr())?;
    w.f64s(&grid.x);
    w.f64s(&grid.r);
    w.f64s(&grid.cell_area);
    grid.region.iter().for_each(|r| w.u8(r.index() as u8));
    Ok(w.0)
}

pub fn decode_grid(buf: &[u8]) -> Result<AxisymGrid> {
    let mut rd = Reader::new(buf, "grid", GRID_MAGIC)?;
    let (nx, nr) = (rd.u32()?, rd.u32()?);
    let x = rd.f64s(nx)?;
    let r = rd.f64s(nr)?;
    let cell_area = rd.f64s(nx * nr)?;
    let mut region = Vec::with_capacity(nx * nr);
    for _ in 0..nx * nr {
        let i = rd.u8()? as usize;
        region.push(Region::from_index(i).ok_or_else(|| Error::Format(format!("grid: bad region label {i}")))?);
    }
    rd.finish()?;
    let grid = AxisymGrid::new(x, r, |ix, jr| region[ix * nr + jr])?;
    // Stored weights win over recomputed ones.
    Ok(AxisymGrid { cell_area, ..grid })
}

pub fn encode_series_values(steps: usize, nodes: usize, values: &[f64]) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.magic(SERIES_MAGIC);
    w.u32(steps)?;
    w.u32(nodes)?;
    w.f64s(values);
    Ok(w.0)
}

pub fn decode_series_values(buf: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let mut rd = Reader::new(buf, "series", SERIES_MAGIC)?;
    let (steps, nodes) = (rd.u32()?, rd.u32()?);
    let values = rd.f64s(steps * nodes)?;
    rd.finish()?;
    Ok((steps, nodes, values))
}

/// Basis payload without its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisRecord {
    pub mean_field: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub quadrature: Vec<f64>,
    pub total_energy: f64,
    pub centered: bool,
}

pub fn encode_basis(b: &BasisRecord) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.magic(BASIS_MAGIC);
    w.u32(b.modes.len())?;
    w.u32(b.mean_field.len())?;
    w.f64s(&b.mean_field);
    b.modes.iter().for_each(|m| w.f64s(m));
    w.f64s(&b.eigenvalues);
    w.f64s(&b.quadrature);
    w.f64(b.total_energy);
    w.u8(u8::from(b.centered));
    Ok(w.0)
}

pub fn decode_basis(buf: &[u8]) -> Result<BasisRecord> {
    let mut rd = Reader::new(buf, "basis", BASIS_MAGIC)?;
    let (k, nodes) = (rd.u32()?, rd.u32()?);
    let mean_field = rd.f64s(nodes)?;
    let modes = (0..k).map(|_| rd.f64s(nodes)).collect::<Result<_>>()?;
    let eigenvalues = rd.f64s(k)?;
    let quadrature = rd.f64s(nodes)?;
    let total_energy = rd.f64()?;
    let centered = rd.u8()? != 0;
    rd.finish()?;
    Ok(BasisRecord { mean_field, modes, eigenvalues, quadrature, total_energy, centered })
}

pub fn encode_coeffs(c: &CoeffTable) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.magic(COEFF_MAGIC);
    w.u32(c.modes)?;
    w.u32(c.cases)?;
    w.u32(c.steps)?;
    w.f64s(&c.beta);
    Ok(w.0)
}

pub fn decode_coeffs(buf: &[u8]) -> Result<CoeffTable> {
    let mut rd = Reader::new(buf, "coefficients", COEFF_MAGIC)?;
    let (modes, cases, steps) = (rd.u32()?, rd.u32()?, rd.u32()?);
    let beta = rd.f64s(modes * cases * steps)?;
    rd.finish()?;
    Ok(CoeffTable { modes, cases, steps, beta })
}

pub fn encode_gp_params(records: &[GpParams], p: usize) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.magic(GP_MAGIC);
    w.u32(records.len())?;
    w.u32(p)?;
    for r in records {
        if r.eta.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: r.eta.len() });
        }
        w.f64(r.mu);
        w.f64(r.sigma2);
        w.f64s(&r.eta);
        w.f64(r.nugget);
    }
    Ok(w.0)
}

pub fn decode_gp_params(buf: &[u8]) -> Result<Vec<GpParams>> {
    let mut rd = Reader::new(buf, "gp", GP_MAGIC)?;
    let (n, p) = (rd.u32()?, rd.u32()?);
    let out = (0..n)
        .map(|_| Ok(GpParams { mu: rd.f64()?, sigma2: rd.f64()?, eta: rd.f64s(p)?, nugget: rd.f64()? }))
        .collect::<Result<Vec<_>>>()?;
    rd.finish()?;
    Ok(out)
}

/// One simulated case: design, sampling metadata and fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub design: DesignPoint,
    pub seed: u64,
    pub series: SnapshotSeries,
}

impl Case {
    pub fn geometry(&self) -> CaseGeometry {
        CaseGeometry::from_design(&self.design)
    }
}

fn series_file(var: Variable) -> String {
    format!("var_{}.bin", var.name())
}

/// Writes a case directory: `grid.bin`, one `var_<name>.bin` per variable, `case.meta`.
pub fn write_case(dir: &Path, case: &Case) -> Result<()> {
    fs::create_dir_all(dir)?;
    let s = &case.series;
    fs::write(dir.join("grid.bin"), encode_grid(&s.grid)?)?;
    for var in s.variables() {
        fs::write(dir.join(series_file(var)), encode_series_values(s.steps(), s.nodes(), s.values(var)?)?)?;
    }
    let meta = format!(
        "design = {}\ndt = {:e}\nt0 = {:e}\nseed = {}\n",
        case.design, s.dt, s.t0, case.seed
    );
    fs::write(dir.join("case.meta"), meta)?;
    Ok(())
}

fn parse_meta(text: &str) -> Result<(DesignPoint, f64, f64, u64)> {
    let mut design = None;
    let (mut dt, mut t0, mut seed) = (None, 0.0, 0);
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Format(format!("case.meta: `{line}`")))?;
        let v = v.trim();
        let bad = |_| Error::Format(format!("case.meta: bad value for `{}`", k.trim()));
        match k.trim() {
            "design" => design = Some(v.parse::<DesignPoint>()?),
            "dt" => dt = Some(v.parse::<f64>().map_err(bad)?),
            "t0" => t0 = v.parse::<f64>().map_err(bad)?,
            "seed" => seed = v.parse::<u64>().map_err(|_| Error::Format("case.meta: bad seed".into()))?,
            other => return Err(Error::Format(format!("case.meta: unknown key `{other}`"))),
        }
    }
    let design = design.ok_or_else(|| Error::Format("case.meta: missing design".into()))?;
    let dt = dt.ok_or_else(|| Error::Format("case.meta: missing dt".into()))?;
    Ok((design, dt, t0, seed))
}

/// Reads a case directory; every `var_<name>.bin` present is loaded.
pub fn read_case(dir: &Path) -> Result<Case> {
    let ctx = |e: std::io::Error| Error::Corpus(format!("{}: {e}", dir.display()));
    let grid = decode_grid(&fs::read(dir.join("grid.bin")).map_err(ctx)?)?;
    let (design, dt, t0, seed) = parse_meta(&fs::read_to_string(dir.join("case.meta")).map_err(ctx)?)?;
    let mut series: Option<SnapshotSeries> = None;
    for var in Variable::ALL {
        let path = dir.join(series_file(var));
        if !path.exists() {
            continue;
        }
        let (steps, nodes, values) = decode_series_values(&fs::read(&path)?)?;
        if nodes != grid.len() {
            return Err(Error::Corpus(format!("{}: {nodes} nodes, grid has {}", path.display(), grid.len())));
        }
        let s = match series.as_mut() {
            Some(s) => s,
            None => series.insert(SnapshotSeries::new(grid.clone(), steps, dt, t0)?),
        };
        if s.steps() != steps {
            return Err(Error::Corpus(format!("{}: {steps} steps, expected {}", path.display(), s.steps())));
        }
        s.insert(var, values)?;
    }
    let series = series.ok_or_else(|| Error::Corpus(format!("{}: no variable files", dir.display())))?;
    Ok(Case { design, seed, series })
}

/// Case directories under `root`, in name order.
pub fn case_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::Corpus(format!("{}: {e}", root.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("case.meta").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Corpus(format!("{}: no case directories", root.display())));
    }
    Ok(dirs)
}

pub fn read_corpus(root: &Path) -> Result<Vec<Case>> {
    case_dirs(root)?.iter().map(|d| read_case(d)).collect()
}

/// Checks every case design against the space.
pub fn validate_corpus(cases: &[Case], space: &DesignSpace) -> Result<()> {
    for c in cases {
        space.check(&c.design)?;
    }
    Ok(())
}

/// Oracle cases for a list of designs, all sharing one wave-phase seed.
pub fn simulate_corpus(
    designs: &[DesignPoint],
    space: &DesignSpace,
    sampling: &SamplingSpec,
    seed: u64,
    vars: &[Variable],
) -> Result<Vec<Case>> {
    use rayon::prelude::*;
    designs
        .par_iter()
        .map(|d| Ok(Case { design: d.clone(), seed, series: oracle_fields_for(d, space, sampling, seed, vars)? }))
        .collect()
}

/// Writes cases as `case_000`, `case_001`, ... under `root`.
pub fn write_corpus(root: &Path, cases: &[Case]) -> Result<()> {
    for (i, c) in cases.iter().enumerate() {
        write_case(&root.join(format!("case_{i:03}")), c)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::oracle::oracle_fields;

    #[test]
    fn case_round_trip() {
        let s = DesignSpace::injector();
        let d = DesignPoint::injector(41.9, 3.05, 65.5, 1.57, 1.0);
        let sampling = SamplingSpec { grid: GridSpec::new(12, 8), steps: 3, dt: 30e-6 };
        let case = Case { series: oracle_fields(&d, &s, &sampling, 4).unwrap(), design: d, seed: 4 };
        let dir = tempfile::tempdir().unwrap();
        write_case(dir.path(), &case).unwrap();
        let back = read_case(dir.path()).unwrap();
        assert_eq!(back, case);
        assert_eq!(&fs::read(dir.path().join("grid.bin")).unwrap()[..4], b"CPG1");
        assert_eq!(&fs::read(dir.path().join("var_temperature.bin")).unwrap()[..4], b"CPS1");
    }

    #[test]
    fn binary_records_round_trip() {
        let b = BasisRecord {
            mean_field: vec![1.0, 2.0, 3.0],
            modes: vec![vec![0.1, 0.2, 0.3], vec![-1.0, 0.0, 1.0]],
            eigenvalues: vec![4.0, 1.0],
            quadrature: vec![0.5, 0.5, 0.25],
            total_energy: 5.5,
            centered: true,
        };
        assert_eq!(decode_basis(&encode_basis(&b).unwrap()).unwrap(), b);
        let c = CoeffTable { modes: 2, cases: 1, steps: 2, beta: vec![1.0, 2.0, 3.0, 4.0] };
        assert_eq!(decode_coeffs(&encode_coeffs(&c).unwrap()).unwrap(), c);
        let g = vec![GpParams { mu: 1.0, sigma2: 2.0, eta: vec![3.0, 4.0], nugget: 1e-8 }];
        assert_eq!(decode_gp_params(&encode_gp_params(&g, 2).unwrap()).unwrap(), g);
    }

    #[test]
    fn corrupt_input_rejected() {
        assert!(matches!(decode_coeffs(b"XXXX"), Err(Error::Format(_))));
        let c = CoeffTable { modes: 1, cases: 1, steps: 2, beta: vec![1.0, 2.0] };
        let mut bytes = encode_coeffs(&c).unwrap();
        bytes.pop();
        assert!(matches!(decode_coeffs(&bytes), Err(Error::Format(_))));
        assert!(parse_meta("dt = 1e-5\n").is_err());
    }
}
