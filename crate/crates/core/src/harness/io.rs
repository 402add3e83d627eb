//! Binary matrix files and on-disk instances.
//!
//! A matrix file is a 20-byte header (`TRPM`, then rows and cols as
//! little-endian `u64`) followed by `rows * cols` little-endian `f64` values
//! in column-major order.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::synth::{InlierModel, InstanceParams, NoiseModel, ProblemInstance};

pub const MAGIC: &[u8; 4] = b"TRPM";
pub const HEADER_LEN: usize = 20;

pub const MANIFEST_FILE: &str = "manifest.txt";
const INSTANCE_FILES: [&str; 4] = ["m.mat", "l.mat", "c.mat", "n.mat"];

pub fn write_matrix<W: Write>(mut w: W, m: &DenseMatrix) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

/// Reads one matrix. Trailing bytes after the payload are an error.
pub fn read_matrix<R: Read>(mut r: R) -> Result<DenseMatrix> {
    let mut header = [0u8; HEADER_LEN];
    read_exact(&mut r, &mut header, "header")?;
    if &header[..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&header[..4]),
            std::str::from_utf8(MAGIC).unwrap()
        )));
    }
    let rows = u64::from_le_bytes(header[4..12].try_into().unwrap());
    let cols = u64::from_le_bytes(header[12..20].try_into().unwrap());
    let len = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|b| usize::try_from(b).ok())
        .ok_or_else(|| Error::Format(format!("dimensions {rows}x{cols} overflow")))?;

    let mut payload = Vec::new();
    r.take(len as u64 + 1)
        .read_to_end(&mut payload)
        .map_err(|e| Error::Format(format!("reading payload: {e}")))?;
    if payload.len() < len {
        return Err(Error::Format(format!(
            "truncated payload: {} of {len} bytes",
            payload.len()
        )));
    }
    if payload.len() > len {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseMatrix::from_column_slice(rows as usize, cols as usize, &data)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Format(format!("reading {what}: {e}")),
    })
}

pub fn save_matrix(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_matrix(BufWriter::new(file), m).map_err(|e| Error::io(path, e))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix(BufReader::new(file))
}

/// Writes `m.mat`, `l.mat`, `c.mat`, `n.mat` and a `key=value` manifest into
/// `dir`, creating it if needed.
pub fn save_instance(dir: impl AsRef<Path>, inst: &ProblemInstance) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let parts = [&inst.m_star, &inst.l_star, &inst.c_star, &inst.n_star];
    for (name, m) in INSTANCE_FILES.iter().zip(parts) {
        save_matrix(dir.join(name), m)?;
    }
    let p = &inst.params;
    let support: Vec<String> = inst.true_support.iter().map(|i| i.to_string()).collect();
    let manifest = format!(
        "d={}\nn={}\nr={}\nalpha={}\noutlier_scale={}\nnoise_sigma={}\nnoise_model={}\n\
         inlier_model={}\nseed={}\nmu={}\nsupport={}\n",
        p.d,
        p.n,
        p.r,
        p.alpha,
        p.outlier_scale,
        p.noise_sigma,
        p.noise_model.as_str(),
        p.inlier_model.as_str(),
        p.seed,
        inst.measured_mu,
        support.join(","),
    );
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

/// Reads an instance written by [`save_instance`]. `M*` is taken from
/// `m.mat` as stored; support and μ are recomputed from the parts.
pub fn load_instance(dir: impl AsRef<Path>) -> Result<ProblemInstance> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let kv = parse_key_values(&text)?;
    let get = |key: &str| {
        kv.get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("manifest is missing {key:?}")))
    };
    let params = InstanceParams {
        d: parse_value(get("d")?, "d")?,
        n: parse_value(get("n")?, "n")?,
        r: parse_value(get("r")?, "r")?,
        alpha: parse_value(get("alpha")?, "alpha")?,
        outlier_scale: parse_value(get("outlier_scale")?, "outlier_scale")?,
        noise_sigma: parse_value(get("noise_sigma")?, "noise_sigma")?,
        noise_model: NoiseModel::parse(get("noise_model")?)?,
        inlier_model: InlierModel::parse(get("inlier_model")?)?,
        seed: parse_value(get("seed")?, "seed")?,
    };

    let mut parts = Vec::with_capacity(4);
    for name in INSTANCE_FILES {
        parts.push(load_matrix(dir.join(name))?);
    }
    let n_star = parts.pop().unwrap();
    let c_star = parts.pop().unwrap();
    let l_star = parts.pop().unwrap();
    let m_star = parts.pop().unwrap();
    if m_star.shape() != (params.d, params.n) {
        return Err(Error::DimensionMismatch(format!(
            "m.mat is {}x{}, manifest says {}x{}",
            m_star.rows(),
            m_star.cols(),
            params.d,
            params.n
        )));
    }
    let mut inst = ProblemInstance::from_parts(l_star, c_star, n_star, params)?;
    inst.m_star = m_star;
    Ok(inst)
}

/// Parses `key=value` lines. Blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Format(format!(
                "line {}: expected key=value, got {line:?}",
                lineno + 1
            ))
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub(crate) fn parse_value<T: std::str::FromStr>(s: &str, key: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::InvalidParameter(format!("bad value {s:?} for {key}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_file_size() {
        let m = DenseMatrix::zeros(2, 2).unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 32);
        assert_eq!(&buf[..4], b"TRPM");
        assert_eq!(read_matrix(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn rejects_corrupt_files() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_matrix(bad.as_slice()), Err(Error::Format(_))));

        let short = &buf[..buf.len() - 3];
        assert!(matches!(read_matrix(short), Err(Error::Format(_))));

        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(
            read_matrix(long.as_slice()),
            Err(Error::Format(_))
        ));

        let mut huge = buf[..HEADER_LEN].to_vec();
        huge[4..12].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(
            read_matrix(huge.as_slice()),
            Err(Error::Format(_))
        ));

        assert!(matches!(read_matrix(&buf[..10]), Err(Error::Format(_))));
    }

    #[test]
    fn key_values() {
        let kv = parse_key_values("# comment\n a = 1 \n\nb=x # trailing\n").unwrap();
        assert_eq!(kv["a"], "1");
        assert_eq!(kv["b"], "x");
        assert!(parse_key_values("novalue\n").is_err());
    }
}
