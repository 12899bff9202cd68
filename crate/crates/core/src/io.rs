//! CSV and JSON formats, atomic file writes and the run manifest.
//!
//! Floats are written with `{:e}`, the shortest representation that parses
//! back to the same `f64`, so a write/read cycle is lossless.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::ImpedanceTrace;
use crate::error::{Error, Result};
use crate::inference::{ScanRow, SwitchMeasurement};
use crate::quantum::Lineshape;
use crate::spectra::{Spectrum, TransmissionTrace};

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

/// Header names, checked against `expected`; returns the column index of
/// each expected name plus the whole header for optional columns.
fn columns<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(Vec<usize>, csv::StringRecord)> {
    let header = rdr.headers()?.clone();
    let idx = expected
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::Config(format!("missing CSV column `{name}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((idx, header))
}

fn field(rec: &csv::StringRecord, i: usize, line: usize) -> Result<f64> {
    let s = rec.get(i).unwrap_or("");
    s.parse::<f64>()
        .map_err(|_| Error::Config(format!("row {line}: `{s}` is not a number")))
}

pub fn write_impedance_csv<W: Write>(w: W, trace: &ImpedanceTrace) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["freq_hz", "re_ohm", "im_ohm"])?;
    for (f, z) in trace.points() {
        out.write_record([num(*f), num(z.re), num(z.im)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_impedance_csv<R: Read>(r: R) -> Result<ImpedanceTrace> {
    let mut rdr = csv_reader(r);
    let (c, _) = columns(&mut rdr, &["freq_hz", "re_ohm", "im_ohm"])?;
    let mut points = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        points.push((field(&rec, c[0], line + 2)?, Complex64::new(field(&rec, c[1], line + 2)?, field(&rec, c[2], line + 2)?)));
    }
    ImpedanceTrace::new(points)
}

pub fn write_spectrum_csv<W: Write>(w: W, spec: &Spectrum) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["freq_hz", "psd"])?;
    for (f, v) in spec.freqs().iter().zip(spec.values()) {
        out.write_record([num(*f), num(*v)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_transmission_csv<W: Write>(w: W, trace: &TransmissionTrace) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["freq_hz", "s21_re", "s21_im"])?;
    for (f, s) in trace.points() {
        out.write_record([num(*f), num(s.re), num(s.im)])?;
    }
    out.flush()?;
    Ok(())
}

/// Read a transmission trace. If `cal_re,cal_im` columns are present the
/// calibration gain is divided out.
pub fn read_transmission_csv<R: Read>(r: R) -> Result<TransmissionTrace> {
    let mut rdr = csv_reader(r);
    let (c, header) = columns(&mut rdr, &["freq_hz", "s21_re", "s21_im"])?;
    let cal_re = header.iter().position(|h| h == "cal_re");
    let cal_im = header.iter().position(|h| h == "cal_im");
    let cal_cols = match (cal_re, cal_im) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => return Err(Error::Config("calibration needs both `cal_re` and `cal_im`".into())),
    };
    let mut points = Vec::new();
    let mut cal = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let l = line + 2;
        points.push((field(&rec, c[0], l)?, Complex64::new(field(&rec, c[1], l)?, field(&rec, c[2], l)?)));
        if let Some((a, b)) = cal_cols {
            cal.push(Complex64::new(field(&rec, a, l)?, field(&rec, b, l)?));
        }
    }
    let trace = TransmissionTrace::new(points)?;
    if cal_cols.is_some() {
        trace.deembed(&cal)
    } else {
        Ok(trace)
    }
}

pub fn write_lineshape_csv<W: Write>(w: W, shape: &Lineshape) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["offset_hz", "density_per_hz"])?;
    for (f, d) in shape.offsets().iter().zip(shape.density()) {
        out.write_record([num(*f), num(*d)])?;
    }
    out.flush()?;
    Ok(())
}

/// Switch measurements in lab units: pF, kΩ and the bare ratio.
pub fn read_switch_measurements<R: Read>(r: R) -> Result<Vec<SwitchMeasurement>> {
    let mut rdr = csv_reader(r);
    let (c, _) = columns(&mut rdr, &["c_tuning_pf", "r_kohm", "eta"])?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let l = line + 2;
        let m = SwitchMeasurement::new(field(&rec, c[0], l)? * 1e-12, field(&rec, c[1], l)? * 1e3, field(&rec, c[2], l)?)
            .map_err(|e| Error::Config(format!("row {l}: {e}")))?;
        out.push(m);
    }
    Ok(out)
}

pub fn write_switch_measurements<W: Write>(w: W, data: &[SwitchMeasurement]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["c_tuning_pf", "r_kohm", "eta"])?;
    for m in data {
        out.write_record([num(m.c_tuning * 1e12), num(m.r_off_state * 1e-3), num(m.eta)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_scan_csv<W: Write>(w: W, rows: &[ScanRow]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["c_tuning_pf", "r_kohm", "eta", "meets_constraints"])?;
    for r in rows {
        out.write_record([
            num(r.c_tuning * 1e12),
            num(r.r_off_state * 1e-3),
            num(r.eta),
            r.meets_constraints.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Write via a temporary file in the same directory and rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let mut tmp = PathBuf::from(dir);
    tmp.push(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Record of one CLI invocation: what ran, with which inputs, and a digest
/// of every file it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub inputs: serde_json::Value,
    pub outputs: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Collects outputs in memory, then writes them and the manifest into `dir`.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn new() -> Self {
        OutputSet::default()
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Add a CSV produced by one of the writers in this module.
    pub fn add_csv(&mut self, name: impl Into<String>, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    pub fn add_json<T: Serialize + ?Sized>(&mut self, name: impl Into<String>, value: &T) -> Result<()> {
        let bytes = to_json_bytes(value)?;
        self.add(name, bytes);
        Ok(())
    }

    pub fn files(&self) -> &[(String, Vec<u8>)] {
        &self.files
    }

    /// Write every file and `manifest.json`. Returns the manifest.
    pub fn commit(self, dir: &Path, command: &str, seed: u64, inputs: serde_json::Value) -> Result<RunManifest> {
        fs::create_dir_all(dir)?;
        let mut outputs = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            write_atomic(&dir.join(name), bytes)?;
            outputs.push(ManifestEntry { file: name.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        }
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            inputs,
            outputs,
        };
        write_atomic(&dir.join(MANIFEST_FILE), &to_json_bytes(&manifest)?)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{impedance_sweep, CircuitParams, SwitchState};
    use crate::spectra::SpectrumUnit;

    #[test]
    fn impedance_csv_is_lossless() {
        let tr = impedance_sweep(&CircuitParams::default(), SwitchState::Off, 200e6, 220e6, 101).unwrap();
        let mut buf = Vec::new();
        write_impedance_csv(&mut buf, &tr).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("freq_hz,re_ohm,im_ohm\n"));
        let back = read_impedance_csv(buf.as_slice()).unwrap();
        assert_eq!(back.points(), tr.points());
    }

    #[test]
    fn transmission_calibration_divided_on_load() {
        let text = "freq_hz,s21_re,s21_im,cal_re,cal_im\n1e8,0.2,0.0,0.5,0.0\n2e8,0.0,0.4,0.0,2.0\n";
        let t = read_transmission_csv(text.as_bytes()).unwrap();
        assert_eq!(t.points()[0].1, Complex64::new(0.4, 0.0));
        assert!((t.points()[1].1 - Complex64::new(0.2, 0.0)).norm() < 1e-15);
        let bad = "freq_hz,s21_re,s21_im,cal_re\n1e8,0.2,0.0,0.5\n";
        assert!(read_transmission_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn switch_measurements_in_lab_units() {
        let text = "c_tuning_pf,r_kohm,eta\n2.1,80,38\n180,65,330\n";
        let d = read_switch_measurements(text.as_bytes()).unwrap();
        assert_eq!(d.len(), 2);
        assert!((d[0].c_tuning - 2.1e-12).abs() < 1e-24);
        assert_eq!(d[1].r_off_state, 65e3);
        let mut buf = Vec::new();
        write_switch_measurements(&mut buf, &d).unwrap();
        assert_eq!(read_switch_measurements(buf.as_slice()).unwrap(), d);
        assert!(read_switch_measurements("c_tuning_pf,r_kohm\n1,2\n".as_bytes()).is_err());
        assert!(read_switch_measurements("c_tuning_pf,r_kohm,eta\n1,x,2\n".as_bytes()).is_err());
    }

    #[test]
    fn spectrum_and_scan_headers() {
        let s = Spectrum::new(vec![1.0, 2.0], vec![3.0, 4.0], SpectrumUnit::Normalized).unwrap();
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, &s).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "freq_hz,psd\n1e0,3e0\n2e0,4e0\n");
        let row = ScanRow { c_tuning: 22e-12, r_off_state: 80e3, eta: 300.0, meets_constraints: true };
        let mut buf = Vec::new();
        write_scan_csv(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("c_tuning_pf,r_kohm,eta,meets_constraints\n"));
        assert!(text.ends_with(",true\n"));
    }

    #[test]
    fn manifest_lists_every_output() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputSet::new();
        out.add("a.csv", b"x\n".to_vec());
        out.add_json("b.json", &serde_json::json!({"k": 1})).unwrap();
        let m = out.commit(dir.path(), "test", 7, serde_json::json!({})).unwrap();
        assert_eq!(m.outputs.len(), 2);
        for e in &m.outputs {
            let bytes = fs::read(dir.path().join(&e.file)).unwrap();
            assert_eq!(sha256_hex(&bytes), e.sha256);
        }
        let on_disk: RunManifest = serde_json::from_slice(&fs::read(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(on_disk, m);
        let leftovers = fs::read_dir(dir.path()).unwrap().filter(|e| {
            e.as_ref().unwrap().file_name().to_string_lossy().contains(".tmp")
        });
        assert_eq!(leftovers.count(), 0);
    }
}
