//! Binary field files, JSON sidecars, and CSV summaries.
//!
//! Field format: magic `DWSF`, version u32, nx u32, nz u32, Lx f64, Lz f64,
//! realness u8, then row-major (z-major) physical values as little-endian
//! f64 (real) or f64 pairs (complex). Half-space dumps extend the header
//! with ny u32 and the vertical nodes, then layers top-down in the same
//! payload encoding.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::dno::{HalfSpaceField, YGrid};
use crate::error::{DwsError, Result};
use crate::fft;
use crate::field::SpectralField;
use crate::grid::Grid2D;

const MAGIC: &[u8; 4] = b"DWSF";
const VERSION: u32 = 1;

struct Writer<W: std::io::Write>(W);

impl<W: std::io::Write> Writer<W> {
    fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.0.write_all(&[v])?)
    }
}

struct Reader<R: std::io::Read>(R);

impl<R: std::io::Read> Reader<R> {
    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.0.read_exact(&mut b).map_err(short_file)?;
        Ok(u32::from_le_bytes(b))
    }
    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b).map_err(short_file)?;
        Ok(f64::from_le_bytes(b))
    }
    fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.0.read_exact(&mut b).map_err(short_file)?;
        Ok(b[0])
    }
}

fn short_file(e: std::io::Error) -> DwsError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        DwsError::Format("file truncated".into())
    } else {
        DwsError::Io(e)
    }
}

fn write_header<W: std::io::Write>(w: &mut Writer<W>, grid: &Grid2D, real: bool) -> Result<()> {
    w.0.write_all(MAGIC)?;
    w.u32(VERSION)?;
    w.u32(grid.nx() as u32)?;
    w.u32(grid.nz() as u32)?;
    w.f64(grid.lx())?;
    w.f64(grid.lz())?;
    w.u8(real as u8)
}

fn read_header<R: std::io::Read>(r: &mut Reader<R>) -> Result<(Arc<Grid2D>, bool)> {
    let mut magic = [0u8; 4];
    r.0.read_exact(&mut magic).map_err(short_file)?;
    if &magic != MAGIC {
        return Err(DwsError::Format("bad magic (not a DWSF file)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(DwsError::Format(format!("unsupported version {version}")));
    }
    let nx = r.u32()? as usize;
    let nz = r.u32()? as usize;
    let lx = r.f64()?;
    let lz = r.f64()?;
    let real = match r.u8()? {
        0 => false,
        1 => true,
        v => return Err(DwsError::Format(format!("bad realness byte {v}"))),
    };
    let grid = Grid2D::new(nx, nz, lx, lz)
        .map_err(|e| DwsError::Format(format!("invalid grid in header: {e}")))?;
    Ok((grid, real))
}

fn write_payload<W: std::io::Write>(
    w: &mut Writer<W>,
    values: &[Complex64],
    real: bool,
) -> Result<()> {
    for v in values {
        w.f64(v.re)?;
        if !real {
            w.f64(v.im)?;
        }
    }
    Ok(())
}

fn read_payload<R: std::io::Read>(
    r: &mut Reader<R>,
    len: usize,
    real: bool,
) -> Result<Vec<Complex64>> {
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        let re = r.f64()?;
        let im = if real { 0.0 } else { r.f64()? };
        if !re.is_finite() || !im.is_finite() {
            return Err(DwsError::Format("non-finite value in payload".into()));
        }
        values.push(Complex64::new(re, im));
    }
    Ok(values)
}

pub fn write_field(path: &Path, field: &SpectralField) -> Result<()> {
    let mut w = Writer(BufWriter::new(File::create(path)?));
    write_header(&mut w, field.grid(), field.is_real())?;
    write_payload(&mut w, field.values(), field.is_real())?;
    w.0.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<SpectralField> {
    let mut r = Reader(BufReader::new(File::open(path)?));
    let (grid, real) = read_header(&mut r)?;
    let values = read_payload(&mut r, grid.len(), real)?;
    expect_eof(&mut r)?;
    Ok(SpectralField::from_values(&grid, values))
}

pub fn write_half_space(path: &Path, field: &HalfSpaceField) -> Result<()> {
    let mut w = Writer(BufWriter::new(File::create(path)?));
    let grid = field.grid();
    write_header(&mut w, grid, false)?;
    let yg = field.ygrid();
    w.u32(yg.ny() as u32)?;
    for &y in yg.nodes() {
        w.f64(y)?;
    }
    for i in (0..yg.ny()).rev() {
        let mut phys = field.layer(i).to_vec();
        fft::inverse(grid, &mut phys);
        write_payload(&mut w, &phys, false)?;
    }
    w.0.flush()?;
    Ok(())
}

pub fn read_half_space(path: &Path) -> Result<HalfSpaceField> {
    let mut r = Reader(BufReader::new(File::open(path)?));
    let (grid, _) = read_header(&mut r)?;
    let ny = r.u32()? as usize;
    let mut nodes = Vec::with_capacity(ny);
    for _ in 0..ny {
        nodes.push(r.f64()?);
    }
    let ygrid = YGrid::from_nodes(nodes)?;
    let mut layers = vec![Vec::new(); ny];
    for i in (0..ny).rev() {
        let mut spec = read_payload(&mut r, grid.len(), false)?;
        fft::forward(&grid, &mut spec);
        layers[i] = spec;
    }
    expect_eof(&mut r)?;
    HalfSpaceField::from_layers(&grid, &ygrid, layers)
}

fn expect_eof<R: std::io::Read>(r: &mut Reader<R>) -> Result<()> {
    let mut b = [0u8; 1];
    match r.0.read(&mut b)? {
        0 => Ok(()),
        _ => Err(DwsError::Format("trailing bytes after payload".into())),
    }
}

/// Write any serializable report as pretty JSON.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value)
        .map_err(|e| DwsError::Format(format!("serialize: {e}")))?;
    std::fs::write(path, s + "\n")?;
    Ok(())
}

/// RFC 4180 CSV: CRLF rows, fields quoted when they contain separators.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let quote = |s: &str| -> String {
        if s.contains([',', '"', '\n', '\r']) {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_string()
        }
    };
    let line = |fields: &[String]| -> String {
        fields.iter().map(|f| quote(f)).collect::<Vec<_>>().join(",")
    };
    let head: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write!(w, "{}\r\n", line(&head))?;
    for row in rows {
        write!(w, "{}\r\n", line(row))?;
    }
    w.flush()?;
    Ok(())
}
