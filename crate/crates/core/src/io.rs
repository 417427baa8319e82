//! File formats: flat little-endian binaries with an 8-byte magic and a
//! version word, CSV exports with a one-line `name [unit]` header, and the
//! run manifest.
//!
//! | file          | magic      | body after the header                          |
//! |---------------|------------|------------------------------------------------|
//! | dataset       | `HINVDSET` | coordinates, `f`/`g` series, projected vectors |
//! | Fourier field | `HINVFLD1` | `values[node * N + m]`                          |
//! | scalar grid   | `HINVGRID` | `values[iy * n + ix]`                           |

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::elliptic::FourierField;
use crate::error::{Error, Result};
use crate::forward::{BoundaryVectors, CauchyData, Potential};
use crate::grid::{boundary_entries, SpatialGrid};
use crate::time_basis::TimeGrid;

pub const FORMAT_VERSION: u32 = 1;
const DATASET_MAGIC: &[u8; 8] = b"HINVDSET";
const FIELD_MAGIC: &[u8; 8] = b"HINVFLD1";
const GRID_MAGIC: &[u8; 8] = b"HINVGRID";

fn malformed(what: &str, detail: impl Into<String>) -> Error {
    Error::Format {
        what: what.into(),
        detail: detail.into(),
    }
}

struct BinWriter<W: Write>(W);

impl<W: Write> BinWriter<W> {
    fn header(&mut self, magic: &[u8; 8]) -> Result<()> {
        self.0.write_all(magic)?;
        self.0.write_all(&FORMAT_VERSION.to_le_bytes())?;
        Ok(())
    }

    fn u64(&mut self, v: u64) -> Result<()> {
        self.0.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    fn f64(&mut self, v: f64) -> Result<()> {
        self.0.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) -> Result<()> {
        for &v in vs {
            self.f64(v)?;
        }
        Ok(())
    }
}

struct BinReader<R: Read> {
    inner: R,
    what: &'static str,
}

impl<R: Read> BinReader<R> {
    fn new(inner: R, magic: &[u8; 8], what: &'static str) -> Result<Self> {
        let mut r = Self { inner, what };
        let mut m = [0u8; 8];
        r.fill(&mut m)?;
        if &m != magic {
            return Err(malformed(what, format!("bad magic {:?}", String::from_utf8_lossy(&m))));
        }
        let mut v = [0u8; 4];
        r.fill(&mut v)?;
        let version = u32::from_le_bytes(v);
        if version != FORMAT_VERSION {
            return Err(malformed(what, format!("unsupported version {version}")));
        }
        Ok(r)
    }

    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => malformed(self.what, "truncated file"),
            _ => Error::Io(e),
        })
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn usize(&mut self, limit: u64) -> Result<usize> {
        let v = self.u64()?;
        if v > limit {
            return Err(malformed(self.what, format!("size field {v} exceeds {limit}")));
        }
        Ok(v as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        (0..count).map(|_| self.f64()).collect()
    }

    fn finish(mut self) -> Result<()> {
        let mut rest = [0u8; 1];
        match self.inner.read(&mut rest)? {
            0 => Ok(()),
            _ => Err(malformed(self.what, "trailing bytes")),
        }
    }
}

const MAX_NODES: u64 = 1 << 16;
const MAX_COUNT: u64 = 1 << 20;

/// Synthetic measurement: the (possibly noisy) traces and their projections.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub seed: u64,
    pub level: f64,
    pub series: CauchyData<f64>,
    pub vectors: BoundaryVectors<f64>,
}

impl Dataset {
    pub fn grid(&self) -> &SpatialGrid<f64> {
        &self.series.grid
    }

    pub fn time(&self) -> &TimeGrid<f64> {
        &self.series.time
    }

    pub fn modes(&self) -> usize {
        self.vectors.modes
    }

    /// `(x1, x2)` of each boundary entry.
    pub fn coordinates(&self) -> Vec<[f64; 2]> {
        let g = self.grid();
        let n = g.nodes();
        boundary_entries(n)
            .map(|(side, k)| {
                let (ix, iy) = side.node(n, k, 0);
                g.point(ix, iy)
            })
            .collect()
    }

    pub fn write_binary<W: Write>(&self, out: W) -> Result<()> {
        let mut w = BinWriter(out);
        w.header(DATASET_MAGIC)?;
        let g = self.grid();
        w.f64(self.time().final_time())?;
        w.u64(self.time().intervals() as u64)?;
        w.f64(g.half_width())?;
        w.u64(g.nodes() as u64)?;
        w.u64(self.modes() as u64)?;
        w.u64(self.seed)?;
        w.f64(self.level)?;
        for [x1, x2] in self.coordinates() {
            w.f64(x1)?;
            w.f64(x2)?;
        }
        w.f64s(self.series.dirichlet.iter().flatten())?;
        w.f64s(self.series.neumann.iter().flatten())?;
        w.f64s(&self.vectors.dirichlet)?;
        w.f64s(&self.vectors.neumann)?;
        w.0.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(input: R) -> Result<Self> {
        let mut r = BinReader::new(input, DATASET_MAGIC, "dataset")?;
        let time = TimeGrid::new(r.f64()?, r.usize(MAX_COUNT)?)?;
        let half_width = r.f64()?;
        let nodes = r.usize(MAX_NODES)?;
        let grid = SpatialGrid::new(half_width, nodes)?;
        let modes = r.usize(1024)?;
        let seed = r.u64()?;
        let level = r.f64()?;
        let entries = 4 * nodes;
        let coords = r.f64s(2 * entries)?;
        for ((side, k), xy) in boundary_entries(nodes).zip(coords.chunks(2)) {
            let (ix, iy) = side.node(nodes, k, 0);
            if grid.point(ix, iy) != [xy[0], xy[1]] {
                return Err(malformed("dataset", format!("coordinates of {} node {k} disagree with the grid", side.name())));
            }
        }
        let series = |r: &mut BinReader<R>| -> Result<Vec<Vec<f64>>> {
            (0..entries).map(|_| r.f64s(time.len())).collect()
        };
        let dirichlet = series(&mut r)?;
        let neumann = series(&mut r)?;
        let mut vectors = BoundaryVectors::zeros(nodes, modes);
        vectors.dirichlet = r.f64s(entries * modes)?;
        vectors.neumann = r.f64s(entries * modes)?;
        r.finish()?;
        Ok(Self {
            seed,
            level,
            series: CauchyData {
                grid,
                time,
                dirichlet,
                neumann,
            },
            vectors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_binary(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_binary(BufReader::new(File::open(path)?))
    }

    /// One row per boundary entry and time level.
    pub fn write_series_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["side [name]", "k [index]", "x1 [1]", "x2 [1]", "t [s]", "f [1]", "g [1]"])?;
        let times = self.time().nodes();
        let n = self.grid().nodes();
        for (e, ((side, k), [x1, x2])) in boundary_entries(n).zip(self.coordinates()).enumerate() {
            for (j, t) in times.iter().enumerate() {
                w.write_record([
                    side.name().to_string(),
                    k.to_string(),
                    x1.to_string(),
                    x2.to_string(),
                    t.to_string(),
                    format!("{:.17e}", self.series.dirichlet[e][j]),
                    format!("{:.17e}", self.series.neumann[e][j]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// One row per boundary entry and mode.
    pub fn write_projected_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["side [name]", "k [index]", "x1 [1]", "x2 [1]", "mode [index]", "f_coef [s^1/2]", "g_coef [s^1/2]"])?;
        let n = self.grid().nodes();
        let modes = self.modes();
        for (e, ((side, k), [x1, x2])) in boundary_entries(n).zip(self.coordinates()).enumerate() {
            for m in 0..modes {
                w.write_record([
                    side.name().to_string(),
                    k.to_string(),
                    x1.to_string(),
                    x2.to_string(),
                    (m + 1).to_string(),
                    format!("{:.17e}", self.vectors.dirichlet[e * modes + m]),
                    format!("{:.17e}", self.vectors.neumann[e * modes + m]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_field<W: Write>(field: &FourierField<f64>, out: W) -> Result<()> {
    let mut w = BinWriter(out);
    w.header(FIELD_MAGIC)?;
    w.f64(field.grid().half_width())?;
    w.u64(field.grid().nodes() as u64)?;
    w.u64(field.modes() as u64)?;
    w.f64s(field.values())?;
    w.0.flush()?;
    Ok(())
}

pub fn read_field<R: Read>(input: R) -> Result<FourierField<f64>> {
    let mut r = BinReader::new(input, FIELD_MAGIC, "Fourier field")?;
    let half_width = r.f64()?;
    let grid = SpatialGrid::new(half_width, r.usize(MAX_NODES)?)?;
    let modes = r.usize(1024)?;
    let values = r.f64s(grid.len() * modes)?;
    r.finish()?;
    FourierField::from_values(grid, modes, values)
}

pub fn save_field(field: &FourierField<f64>, path: &Path) -> Result<()> {
    write_field(field, BufWriter::new(File::create(path)?))
}

pub fn load_field(path: &Path) -> Result<FourierField<f64>> {
    read_field(BufReader::new(File::open(path)?))
}

pub fn write_grid<W: Write>(potential: &Potential<f64>, out: W) -> Result<()> {
    let mut w = BinWriter(out);
    w.header(GRID_MAGIC)?;
    w.f64(potential.grid.half_width())?;
    w.u64(potential.grid.nodes() as u64)?;
    w.f64s(&potential.values)?;
    w.0.flush()?;
    Ok(())
}

pub fn read_grid<R: Read>(input: R) -> Result<Potential<f64>> {
    let mut r = BinReader::new(input, GRID_MAGIC, "grid")?;
    let half_width = r.f64()?;
    let grid = SpatialGrid::new(half_width, r.usize(MAX_NODES)?)?;
    let values = r.f64s(grid.len())?;
    r.finish()?;
    Ok(Potential { grid, values })
}

pub fn save_grid(potential: &Potential<f64>, path: &Path) -> Result<()> {
    write_grid(potential, BufWriter::new(File::create(path)?))
}

pub fn load_grid(path: &Path) -> Result<Potential<f64>> {
    read_grid(BufReader::new(File::open(path)?))
}

/// Rows `x1, x2, value` with `x1` fastest.
pub fn write_grid_csv<W: Write>(potential: &Potential<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x1 [1]", "x2 [1]", "value [1]"])?;
    let g = &potential.grid;
    let n = g.nodes();
    for (k, v) in potential.values.iter().enumerate() {
        let [x1, x2] = g.point(k % n, k / n);
        w.write_record([x1.to_string(), x2.to_string(), format!("{v:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads [`write_grid_csv`] output back, checking the rows form a square
/// uniform grid in the same order.
pub fn read_grid_csv<R: Read>(input: R) -> Result<Potential<f64>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != ["x1 [1]", "x2 [1]", "value [1]"] {
        return Err(malformed("grid CSV", format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| malformed("grid CSV", format!("bad number in row {}", rows.len() + 2)))
        };
        rows.push([parse(0)?, parse(1)?, parse(2)?]);
    }
    let n = (rows.len() as f64).sqrt().round() as usize;
    if n * n != rows.len() || n < 2 {
        return Err(malformed("grid CSV", format!("{} rows do not form a square grid", rows.len())));
    }
    let half_width = -rows[0][0];
    let grid = SpatialGrid::new(half_width, n)?;
    for (k, row) in rows.iter().enumerate() {
        let [x1, x2] = grid.point(k % n, k / n);
        if (row[0] - x1).abs() > 1e-12 * half_width || (row[1] - x2).abs() > 1e-12 * half_width {
            return Err(malformed("grid CSV", format!("row {} is not at ({x1}, {x2})", k + 2)));
        }
    }
    Ok(Potential {
        grid,
        values: rows.into_iter().map(|r| r[2]).collect(),
    })
}

/// Lower-case hex SHA-256 of a file.
pub fn file_sha256(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut file = BufReader::new(File::open(path)?);
    std::io::copy(&mut file, &mut hasher)?;
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Record of one CLI stage: resolved parameters, hashed inputs and outputs,
/// and whether the stage finished.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
    /// File name → SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Path relative to the output directory → SHA-256.
    pub outputs: BTreeMap<String, String>,
    /// Free-form results (stop reason, scores).
    pub results: BTreeMap<String, String>,
}

pub const MANIFEST_NAME: &str = "manifest.toml";

impl Manifest {
    pub fn new(stage: &str, config: Option<RunConfig>) -> Self {
        Self {
            stage: stage.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            ..Self::default()
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let hash = file_sha256(path)?;
        self.inputs.insert(path.display().to_string(), hash);
        Ok(())
    }

    /// Hashes `dir/name` into the output list.
    pub fn add_output(&mut self, dir: &Path, name: &str) -> Result<()> {
        let hash = file_sha256(&dir.join(name))?;
        self.outputs.insert(name.to_string(), hash);
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| malformed("manifest", e.to_string()))?;
        std::fs::write(dir.join(MANIFEST_NAME), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_NAME))?;
        toml::from_str(&text).map_err(|e| malformed("manifest", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dataset() -> Dataset {
        let grid = SpatialGrid::new(1.0, 5).unwrap();
        let time = TimeGrid::new(2.0, 3).unwrap();
        let entries = 20;
        let series = |s: f64| (0..entries).map(|e| (0..4).map(|j| s * e as f64 + j as f64).collect()).collect();
        let mut vectors = BoundaryVectors::zeros(5, 2);
        vectors.dirichlet.iter_mut().enumerate().for_each(|(i, v)| *v = i as f64 * 0.5);
        vectors.neumann.iter_mut().enumerate().for_each(|(i, v)| *v = -(i as f64));
        Dataset {
            seed: 9,
            level: 0.05,
            series: CauchyData {
                grid,
                time,
                dirichlet: series(1.0),
                neumann: series(-0.25),
            },
            vectors,
        }
    }

    #[test]
    fn dataset_binary_roundtrip() {
        let d = dataset();
        let mut buf = Vec::new();
        d.write_binary(&mut buf).unwrap();
        // magic + version + 7 header words + 40 coordinates + 2·20·4 series + 2·20·2 vectors
        assert_eq!(buf.len(), 12 + 8 * (7 + 40 + 160 + 80));
        assert_eq!(Dataset::read_binary(&buf[..]).unwrap(), d);
    }

    #[test]
    fn corrupt_dataset_is_rejected() {
        let mut buf = Vec::new();
        dataset().write_binary(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(Dataset::read_binary(&bad[..]), Err(Error::Format { .. })));
        assert!(matches!(Dataset::read_binary(&buf[..buf.len() - 3]), Err(Error::Format { .. })));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(Dataset::read_binary(&long[..]), Err(Error::Format { .. })));
        let mut version = buf;
        version[8] = 2;
        assert!(matches!(Dataset::read_binary(&version[..]), Err(Error::Format { .. })));
    }

    #[test]
    fn dataset_csv_headers_and_rows() {
        let d = dataset();
        let mut out = Vec::new();
        d.write_series_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "side [name],k [index],x1 [1],x2 [1],t [s],f [1],g [1]");
        assert_eq!(lines.next().unwrap(), "south,0,-1,-1,0,0.00000000000000000e0,0.00000000000000000e0");
        assert_eq!(text.lines().count(), 1 + 20 * 4);
        let mut out = Vec::new();
        d.write_projected_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("side [name],k [index],x1 [1],x2 [1],mode [index],f_coef [s^1/2],g_coef [s^1/2]\n"));
        assert_eq!(text.lines().count(), 1 + 20 * 2);
    }

    #[test]
    fn field_roundtrip() {
        let grid = SpatialGrid::new(1.0, 4).unwrap();
        let f = FourierField::sample(grid, 3, |[x, y]| vec![x, y, x * y]);
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert_eq!(read_field(&buf[..]).unwrap(), f);
        assert!(read_grid(&buf[..]).is_err());
    }

    #[test]
    fn grid_csv_layout() {
        let grid = SpatialGrid::new(1.0, 3).unwrap();
        let p = Potential {
            values: (0..9).map(f64::from).collect(),
            grid,
        };
        let mut out = Vec::new();
        write_grid_csv(&p, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1 [1],x2 [1],value [1]");
        assert_eq!(lines[1], "-1,-1,0.00000000000000000e0");
        assert_eq!(lines[2], "0,-1,1.00000000000000000e0");
        assert_eq!(lines[9], "1,1,8.00000000000000000e0");
        assert_eq!(read_grid_csv(text.as_bytes()).unwrap(), p);
        assert!(read_grid_csv("x,y,v\n".as_bytes()).is_err());
        assert!(read_grid_csv("x1 [1],x2 [1],value [1]\n0,0,1\n1,0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn manifest_roundtrip_and_hashes() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), b"abc").unwrap();
        let mut m = Manifest::new("simulate", Some(RunConfig::default()));
        m.add_output(dir.path(), "a.txt").unwrap();
        assert_eq!(
            m.outputs["a.txt"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        m.results.insert("stop".into(), "max_iterations".into());
        m.save(dir.path()).unwrap();
        assert_eq!(Manifest::load(dir.path()).unwrap(), m);
    }

    proptest! {
        #[test]
        fn grid_binary_roundtrip(values in proptest::collection::vec(-1e6f64..1e6, 16)) {
            let p = Potential { grid: SpatialGrid::new(2.0, 4).unwrap(), values };
            let mut buf = Vec::new();
            write_grid(&p, &mut buf).unwrap();
            prop_assert_eq!(read_grid(&buf[..]).unwrap(), p);
        }
    }
}
