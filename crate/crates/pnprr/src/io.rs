//! File formats: the native field container, PGM/PPM image export, and the
//! results CSV.
//!
//! # Field files
//!
//! A field file is a five-line ASCII header followed by a raw little-endian
//! `f32` payload:
//!
//! ```text
//! PNPRR-FIELD 1
//! dims: <rank> <n1> <n2> [<n3>]
//! kind: scalar            (or: kind: vector <rank>)
//! dtype: f32le
//!                         (empty line)
//! <payload bytes>
//! ```
//!
//! The payload is row-major with the last axis fastest; a vector field
//! stores its components as consecutive full grids.  Values are stored in
//! `f32`, so loading quantises doubles to single precision; a load/save
//! cycle of an existing file is byte-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Dims, ScalarField, VectorField};
use crate::metrics::BinaryMask;

const MAGIC: &str = "PNPRR-FIELD 1";

/// A loaded field of either kind.
pub enum Field {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl Field {
    pub fn dims(&self) -> Dims {
        match self {
            Field::Scalar(f) => f.dims(),
            Field::Vector(f) => f.dims(),
        }
    }
}

fn write_header(w: &mut dyn Write, dims: Dims, kind: &str) -> Result<()> {
    write!(w, "{MAGIC}\ndims: {}", dims.rank())?;
    for a in 0..dims.rank() {
        write!(w, " {}", dims.size(a))?;
    }
    write!(w, "\nkind: {kind}\ndtype: f32le\n\n")?;
    Ok(())
}

fn write_payload(w: &mut dyn Write, data: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 4);
    for &v in data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_scalar_to(w: &mut dyn Write, field: &ScalarField) -> Result<()> {
    write_header(w, field.dims(), "scalar")?;
    write_payload(w, field.data())
}

pub fn write_vector_to(w: &mut dyn Write, field: &VectorField) -> Result<()> {
    write_header(w, field.dims(), &format!("vector {}", field.rank()))?;
    for a in 0..field.rank() {
        write_payload(w, field.comp(a))?;
    }
    Ok(())
}

pub fn write_field_to(w: &mut dyn Write, field: &Field) -> Result<()> {
    match field {
        Field::Scalar(f) => write_scalar_to(w, f),
        Field::Vector(f) => write_vector_to(w, f),
    }
}

fn parse_err(line: usize, detail: impl Into<String>) -> Error {
    Error::Parse {
        line,
        detail: detail.into(),
    }
}

/// Reads a field from a stream (consumes it fully).
pub fn read_field_from(r: &mut dyn Read) -> Result<Field> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    // Split off five header lines.
    let mut starts = Vec::with_capacity(5);
    let mut pos = 0usize;
    for lineno in 1..=5 {
        let rel = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| parse_err(lineno, "missing newline in header"))?;
        starts.push((pos, pos + rel));
        pos += rel + 1;
    }
    let line = |i: usize| -> Result<&str> {
        let (a, b) = starts[i];
        std::str::from_utf8(&bytes[a..b]).map_err(|_| parse_err(i + 1, "header is not UTF-8"))
    };
    if line(0)? != MAGIC {
        return Err(parse_err(1, format!("expected '{MAGIC}', got '{}'", line(0)?)));
    }
    let dims_line = line(1)?;
    let rest = dims_line
        .strip_prefix("dims: ")
        .ok_or_else(|| parse_err(2, format!("expected 'dims: ...', got '{dims_line}'")))?;
    let nums: Vec<usize> = rest
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| parse_err(2, format!("bad integer '{t}' in dims")))
        })
        .collect::<Result<_>>()?;
    if nums.len() < 2 {
        return Err(parse_err(2, "dims needs a rank and per-axis sizes"));
    }
    let rank = nums[0];
    if rank != 2 && rank != 3 {
        return Err(parse_err(2, format!("rank must be 2 or 3, got {rank}")));
    }
    if nums.len() != rank + 1 {
        return Err(parse_err(
            2,
            format!("rank {rank} needs {rank} sizes, got {}", nums.len() - 1),
        ));
    }
    let dims = Dims::from_sizes(&nums[1..])
        .map_err(|e| parse_err(2, format!("bad dims: {e}")))?;
    let kind_line = line(2)?;
    let comps = match kind_line {
        "kind: scalar" => 1usize,
        other => match other.strip_prefix("kind: vector ") {
            Some(d) => {
                let d: usize = d
                    .parse()
                    .map_err(|_| parse_err(3, format!("bad vector rank '{d}'")))?;
                if d != rank {
                    return Err(parse_err(
                        3,
                        format!("vector rank {d} does not match grid rank {rank}"),
                    ));
                }
                d
            }
            None => {
                return Err(parse_err(
                    3,
                    format!("expected 'kind: scalar' or 'kind: vector <d>', got '{other}'"),
                ))
            }
        },
    };
    if line(3)? != "dtype: f32le" {
        return Err(parse_err(4, format!("unsupported dtype line '{}'", line(3)?)));
    }
    if !line(4)?.is_empty() {
        return Err(parse_err(5, "expected an empty separator line"));
    }
    let payload = &bytes[pos..];
    let expected = comps * dims.len() * 4;
    if payload.len() != expected {
        return Err(parse_err(
            6,
            format!(
                "payload is {} bytes, expected {expected} ({} values of f32)",
                payload.len(),
                comps * dims.len()
            ),
        ));
    }
    let decode = |chunk: &[u8]| -> Vec<f64> {
        chunk
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect()
    };
    if comps == 1 {
        Ok(Field::Scalar(ScalarField::new(dims, decode(payload))?))
    } else {
        let per = dims.len() * 4;
        let comps_data: Vec<Vec<f64>> = (0..comps)
            .map(|a| decode(&payload[a * per..(a + 1) * per]))
            .collect();
        Ok(Field::Vector(VectorField::new(dims, comps_data)?))
    }
}

pub fn save_field(path: impl AsRef<Path>, field: &Field) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field_to(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: impl AsRef<Path>) -> Result<Field> {
    read_field_from(&mut BufReader::new(File::open(path)?))
}

pub fn save_scalar(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_scalar_to(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_scalar(path: impl AsRef<Path>) -> Result<ScalarField> {
    match load_field(path)? {
        Field::Scalar(f) => Ok(f),
        Field::Vector(_) => Err(Error::InvalidParameter(
            "expected a scalar field, found a vector field".into(),
        )),
    }
}

pub fn save_vector(path: impl AsRef<Path>, field: &VectorField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vector_to(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_vector(path: impl AsRef<Path>) -> Result<VectorField> {
    match load_field(path)? {
        Field::Vector(f) => Ok(f),
        Field::Scalar(_) => Err(Error::InvalidParameter(
            "expected a vector field, found a scalar field".into(),
        )),
    }
}

/// Volume formats from external tools are recognised but not decoded;
/// convert to the native field format first.
pub fn load_nifti(_path: impl AsRef<Path>) -> Result<Field> {
    Err(Error::Unsupported(
        "NIfTI input is not implemented; convert the volume to the native \
         field format and load that instead"
            .into(),
    ))
}

fn to_gray(field: &ScalarField) -> Vec<u8> {
    let (lo, hi) = field.min_max();
    let range = hi - lo;
    if range <= 0.0 {
        return vec![128u8; field.data().len()];
    }
    field
        .data()
        .iter()
        .map(|&v| ((v - lo) / range * 255.0).round() as u8)
        .collect()
}

/// Writes a 2-D field as an 8-bit PGM, linearly rescaled to full range.
/// Constant fields map to mid-gray.
pub fn export_pgm(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    let dims = field.dims();
    if dims.rank() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "PGM export needs a 2-D field, got {dims}; export a 2-D slice instead"
        )));
    }
    let gray = to_gray(field);
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", dims.size(1), dims.size(0))?;
    w.write_all(&gray)?;
    w.flush()?;
    Ok(())
}

/// Writes a 2-D field as a PPM with mask contours painted on top.
/// Each entry pairs a mask with an RGB colour.
pub fn render_overlay(
    path: impl AsRef<Path>,
    field: &ScalarField,
    contours: &[(&BinaryMask, [u8; 3])],
) -> Result<()> {
    let dims = field.dims();
    if dims.rank() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "overlay export needs a 2-D field, got {dims}"
        )));
    }
    for (m, _) in contours {
        if m.dims() != dims {
            return Err(Error::DimensionMismatch(format!(
                "overlay mask is {} but image is {dims}",
                m.dims()
            )));
        }
    }
    let gray = to_gray(field);
    let mut rgb: Vec<u8> = gray.iter().flat_map(|&g| [g, g, g]).collect();
    for (mask, colour) in contours {
        let edge = mask.boundary();
        for (i, &e) in edge.data().iter().enumerate() {
            if e == 1 {
                rgb[3 * i..3 * i + 3].copy_from_slice(colour);
            }
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P6\n{} {}\n255\n", dims.size(1), dims.size(0))?;
    w.write_all(&rgb)?;
    w.flush()?;
    Ok(())
}

/// Formats with 9 significant digits, trimming trailing zeros (`printf %g`
/// style, with Rust's exponent spelling).
pub fn fmt_g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Let the e-formatter establish the decimal exponent after rounding to
    // nine significant digits.
    let e = format!("{x:.8e}");
    let (mantissa, exp) = e.split_once('e').expect("e-format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= 9 {
        let mut m = mantissa.to_string();
        if m.contains('.') {
            while m.ends_with('0') {
                m.pop();
            }
            if m.ends_with('.') {
                m.pop();
            }
        }
        return format!("{m}e{exp}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// One experiment row.  Optional entries render as empty cells.
#[derive(Clone, Debug)]
pub struct ResultRecord {
    pub seed: u64,
    pub method: String,
    pub denoiser: String,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub dice: f64,
    pub ssd_final: f64,
    pub psnr_denoised: Option<f64>,
    pub min_jac_det: f64,
    pub outer_iters: usize,
    pub wall_seconds: f64,
}

pub const RESULTS_HEADER: &str =
    "seed,method,denoiser,lambda1,lambda2,dice,ssd_final,psnr_denoised,min_jac_det,outer_iters,wall_seconds";

/// Formats an optional value, rendering `None` as an empty cell.
pub fn opt_g9(v: Option<f64>) -> String {
    v.map(fmt_g9).unwrap_or_default()
}

/// Formats one record as a CSV row (no trailing newline), columns as in
/// [`RESULTS_HEADER`].
pub fn format_result_row(r: &ResultRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.seed,
        r.method,
        r.denoiser,
        opt_g9(r.lambda1),
        opt_g9(r.lambda2),
        fmt_g9(r.dice),
        fmt_g9(r.ssd_final),
        opt_g9(r.psnr_denoised),
        fmt_g9(r.min_jac_det),
        r.outer_iters,
        fmt_g9(r.wall_seconds),
    )
}

pub fn write_results_csv_to(w: &mut dyn Write, records: &[ResultRecord]) -> Result<()> {
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in records {
        writeln!(w, "{}", format_result_row(r))?;
    }
    Ok(())
}

pub fn write_results_csv(path: impl AsRef<Path>, records: &[ResultRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_results_csv_to(&mut w, records)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_scalar() -> ScalarField {
        // Values exactly representable in f32.
        let data = vec![0.5, -1.25, 3.0, 0.0, 2.75, -0.5];
        ScalarField::new(Dims::d2(2, 3), data).unwrap()
    }

    #[test]
    fn header_bytes_are_canonical() {
        let mut buf = Vec::new();
        write_scalar_to(&mut buf, &sample_scalar()).unwrap();
        let head = b"PNPRR-FIELD 1\ndims: 2 2 3\nkind: scalar\ndtype: f32le\n\n";
        assert_eq!(&buf[..head.len()], head);
        assert_eq!(buf.len(), head.len() + 6 * 4);
    }

    #[test]
    fn scalar_round_trip_is_bit_exact() {
        let f = sample_scalar();
        let mut buf = Vec::new();
        write_scalar_to(&mut buf, &f).unwrap();
        let back = read_field_from(&mut &buf[..]).unwrap();
        let Field::Scalar(g) = back else { panic!("kind") };
        assert_eq!(g.data(), f.data());
        let mut buf2 = Vec::new();
        write_scalar_to(&mut buf2, &g).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn vector_round_trip_and_component_order() {
        let dims = Dims::d2(2, 2);
        let mut v = VectorField::zeros(dims);
        v.comp_mut(0).copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        v.comp_mut(1).copy_from_slice(&[-1.0, -2.0, -3.0, -4.0]);
        let mut buf = Vec::new();
        write_vector_to(&mut buf, &v).unwrap();
        assert!(buf.starts_with(b"PNPRR-FIELD 1\ndims: 2 2 2\nkind: vector 2\ndtype: f32le\n\n"));
        let Field::Vector(w) = read_field_from(&mut &buf[..]).unwrap() else {
            panic!("kind")
        };
        assert_eq!(w.comp(0), v.comp(0));
        assert_eq!(w.comp(1), v.comp(1));
    }

    #[test]
    fn doubles_quantise_to_f32_on_save() {
        let f = ScalarField::new(Dims::d2(1, 2), vec![0.1, 1.0 / 3.0]).unwrap();
        let mut buf = Vec::new();
        write_scalar_to(&mut buf, &f).unwrap();
        let Field::Scalar(g) = read_field_from(&mut &buf[..]).unwrap() else {
            panic!("kind")
        };
        assert_eq!(g.data()[0], 0.1f32 as f64);
        assert_eq!(g.data()[1], (1.0f32 / 3.0) as f64);
    }

    #[test]
    fn malformed_headers_name_the_line() {
        let mut good = Vec::new();
        write_scalar_to(&mut good, &sample_scalar()).unwrap();

        let cases: Vec<(Vec<u8>, usize)> = vec![
            (b"NOPE 1\ndims: 2 2 3\nkind: scalar\ndtype: f32le\n\n".to_vec(), 1),
            (b"PNPRR-FIELD 1\ndims: 2 2\nkind: scalar\ndtype: f32le\n\n".to_vec(), 2),
            (b"PNPRR-FIELD 1\ndims: 4 1 1 1 1\nkind: scalar\ndtype: f32le\n\n".to_vec(), 2),
            (b"PNPRR-FIELD 1\ndims: 2 2 3\nkind: tensor\ndtype: f32le\n\n".to_vec(), 3),
            (b"PNPRR-FIELD 1\ndims: 2 2 3\nkind: vector 3\ndtype: f32le\n\n".to_vec(), 3),
            (b"PNPRR-FIELD 1\ndims: 2 2 3\nkind: scalar\ndtype: f64le\n\n".to_vec(), 4),
            (b"PNPRR-FIELD 1\ndims: 2 2 3\nkind: scalar\ndtype: f32le\nx\n".to_vec(), 5),
        ];
        for (bytes, line) in cases {
            match read_field_from(&mut &bytes[..]) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "for {bytes:?}"),
                other => panic!("expected parse error at line {line}, got {other:?}",
                    other = other.as_ref().map(|_| "ok")),
            }
        }
        // Truncated payload.
        let short = &good[..good.len() - 2];
        assert!(matches!(
            read_field_from(&mut &short[..]),
            Err(Error::Parse { line: 6, .. })
        ));
    }

    #[test]
    fn nifti_is_reported_unsupported() {
        match load_nifti("volume.nii") {
            Err(e @ Error::Unsupported(_)) => assert_eq!(e.exit_class(), 1),
            other => panic!("expected unsupported, got {:?}", other.map(|_| "ok")),
        }
    }

    #[test]
    fn fmt_g9_pinned_values() {
        assert_eq!(fmt_g9(0.5), "0.5");
        assert_eq!(fmt_g9(0.045), "0.045");
        assert_eq!(fmt_g9(0.3), "0.3");
        assert_eq!(fmt_g9(0.0), "0");
        assert_eq!(fmt_g9(-2.5), "-2.5");
        assert_eq!(fmt_g9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_g9(123456789.123), "123456789");
        assert_eq!(fmt_g9(1234567891.23), "1.23456789e9");
        assert_eq!(fmt_g9(5.0624236839629645e-6), "5.06242368e-6");
        assert_eq!(fmt_g9(1e-4), "0.0001");
        assert_eq!(fmt_g9(9.9999e-5), "9.9999e-5");
        assert_eq!(fmt_g9(1000.0), "1000");
        assert_eq!(fmt_g9(f64::INFINITY), "inf");
    }

    #[test]
    fn results_csv_golden() {
        let records = vec![
            ResultRecord {
                seed: 3,
                method: "pnp".into(),
                denoiser: "tv".into(),
                lambda1: Some(0.045),
                lambda2: Some(0.067),
                dice: 0.9125,
                ssd_final: 12.5,
                psnr_denoised: Some(24.25),
                min_jac_det: 0.125,
                outer_iters: 7,
                wall_seconds: 1.5,
            },
            ResultRecord {
                seed: 4,
                method: "register".into(),
                denoiser: String::new(),
                lambda1: None,
                lambda2: None,
                dice: 0.875,
                ssd_final: 30.0,
                psnr_denoised: None,
                min_jac_det: 0.5,
                outer_iters: 1,
                wall_seconds: 0.25,
            },
        ];
        let mut buf = Vec::new();
        write_results_csv_to(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let expect = "seed,method,denoiser,lambda1,lambda2,dice,ssd_final,psnr_denoised,min_jac_det,outer_iters,wall_seconds\n\
                      3,pnp,tv,0.045,0.067,0.9125,12.5,24.25,0.125,7,1.5\n\
                      4,register,,,,0.875,30,,0.5,1,0.25\n";
        assert_eq!(text, expect);
    }

    #[test]
    fn pgm_export_golden() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ramp.pgm");
        let f = ScalarField::new(Dims::d2(2, 2), vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        export_pgm(&path, &f).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes, b"P5\n2 2\n255\n\x00\x55\xaa\xff");

        let flat = ScalarField::constant(Dims::d2(1, 2), 4.0);
        let path2 = dir.path().join("flat.pgm");
        export_pgm(&path2, &flat).unwrap();
        let bytes = std::fs::read(&path2).unwrap();
        assert_eq!(&bytes[bytes.len() - 2..], &[128, 128]);
    }

    #[test]
    fn pgm_rejects_3d() {
        let f = ScalarField::zeros(Dims::d3(2, 2, 2));
        let dir = tempfile::tempdir().unwrap();
        assert!(export_pgm(dir.path().join("x.pgm"), &f).is_err());
    }

    #[test]
    fn overlay_paints_boundary_pixels() {
        let dims = Dims::d2(5, 5);
        let img = ScalarField::zeros(dims);
        let mut m = vec![0u8; 25];
        // 3x3 block in the middle; its boundary is the ring (all block cells
        // except the centre).
        for i in 1..4 {
            for j in 1..4 {
                m[i * 5 + j] = 1;
            }
        }
        let mask = BinaryMask::new(dims, m).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.ppm");
        render_overlay(&path, &img, &[(&mask, [255, 0, 0])]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let head = b"P6\n5 5\n255\n";
        assert_eq!(&bytes[..head.len()], head);
        let px = &bytes[head.len()..];
        let at = |i: usize, j: usize| &px[3 * (i * 5 + j)..3 * (i * 5 + j) + 3];
        assert_eq!(at(1, 1), &[255, 0, 0]);
        assert_eq!(at(2, 2), &[128, 128, 128]); // interior not painted
        assert_eq!(at(0, 0), &[128, 128, 128]); // outside untouched
    }
}
