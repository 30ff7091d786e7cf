//! On-disk formats: immersion containers (JSON and binary) and Laurent
//! coefficient lists.
//!
//! Binary container layout, all integers little endian:
//!
//! ```text
//! "TRGI"  u16 version  u8 dim  u32 sizes[dim]
//! u32 chart_len  chart descriptor as JSON (chart_len bytes)
//! u8 has_lift  [f64 lift, row-major 2n x dim]
//! f64 points[len * 2n], node-major
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ambient::{AmbientChart, ChartDescriptor};
use crate::curve_lab::FourierCurve;
use crate::error::{Error, Result};
use crate::immersion::{GridTorus, Immersion};

pub const FORMAT_VERSION: u16 = 1;
pub const MAGIC: &[u8; 4] = b"TRGI";
/// Largest node count a container may declare.
pub const MAX_NODES: usize = 1 << 20;
const MAX_CHART_BYTES: usize = 1 << 16;

/// JSON form of an immersion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmersionRecord {
    pub version: u16,
    pub sizes: Vec<usize>,
    pub chart: ChartDescriptor,
    /// Node-major chart coordinates.
    pub points: Vec<f64>,
    /// Rows are ambient coordinates, columns torus directions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lift: Option<Vec<Vec<f64>>>,
}

impl ImmersionRecord {
    pub fn from_immersion(im: &Immersion) -> Self {
        Self {
            version: FORMAT_VERSION,
            sizes: im.grid().sizes().to_vec(),
            chart: im.chart().descriptor().clone(),
            points: im.points().to_vec(),
            lift: im.lift().map(|w| {
                (0..w.nrows())
                    .map(|a| (0..w.ncols()).map(|k| w[(a, k)]).collect())
                    .collect()
            }),
        }
    }

    pub fn to_immersion(&self) -> Result<Immersion> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {}", self.version)));
        }
        let grid = GridTorus::new(&self.sizes)?;
        if grid.len() > MAX_NODES {
            return Err(Error::Format("grid too large".into()));
        }
        let chart = AmbientChart::from_descriptor(&self.chart)?;
        let lift = match &self.lift {
            None => None,
            Some(rows) => {
                let d = chart.real_dim();
                if rows.len() != d || rows.iter().any(|r| r.len() != grid.dim()) {
                    return Err(Error::Format("lift must be 2n x n".into()));
                }
                Some(DMatrix::from_fn(d, grid.dim(), |a, k| rows[a][k]))
            }
        };
        Immersion::new(grid, chart, self.points.clone(), lift)
    }
}

pub fn immersion_to_json(im: &Immersion) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ImmersionRecord::from_immersion(im))?)
}

pub fn immersion_from_json(text: &str) -> Result<Immersion> {
    let rec: ImmersionRecord = serde_json::from_str(text)?;
    rec.to_immersion()
}

pub fn encode_immersion(im: &Immersion) -> Result<Vec<u8>> {
    let sizes = im.grid().sizes();
    let chart = serde_json::to_vec(im.chart().descriptor())?;
    let mut out = Vec::with_capacity(32 + chart.len() + 8 * im.points().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(sizes.len() as u8);
    for &s in sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.extend_from_slice(&(chart.len() as u32).to_le_bytes());
    out.extend_from_slice(&chart);
    match im.lift() {
        None => out.push(0),
        Some(w) => {
            out.push(1);
            for a in 0..w.nrows() {
                for k in 0..w.ncols() {
                    out.extend_from_slice(&w[(a, k)].to_le_bytes());
                }
            }
        }
    }
    for p in im.points() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated container at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("length overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

/// Parses the binary container into its record without building the
/// immersion (no chart evaluation).
pub fn decode_record(bytes: &[u8]) -> Result<ImmersionRecord> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = r.u8()? as usize;
    if !(1..=2).contains(&dim) {
        return Err(Error::Format(format!("torus dimension {dim}")));
    }
    let sizes: Vec<usize> = (0..dim).map(|_| r.u32().map(|s| s as usize)).collect::<Result<_>>()?;
    let grid = GridTorus::new(&sizes)?;
    if grid.len() > MAX_NODES {
        return Err(Error::Format("grid too large".into()));
    }
    let clen = r.u32()? as usize;
    if clen > MAX_CHART_BYTES {
        return Err(Error::Format("chart descriptor too long".into()));
    }
    let chart: ChartDescriptor = serde_json::from_slice(r.take(clen)?)?;
    let d = 2 * dim;
    let lift = match r.u8()? {
        0 => None,
        1 => {
            let v = r.f64s(d * dim)?;
            Some(v.chunks(dim).map(|c| c.to_vec()).collect())
        }
        t => return Err(Error::Format(format!("bad lift flag {t}"))),
    };
    let points = r.f64s(grid.len() * d)?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(ImmersionRecord {
        version,
        sizes,
        chart,
        points,
        lift,
    })
}

pub fn decode_immersion(bytes: &[u8]) -> Result<Immersion> {
    decode_record(bytes)?.to_immersion()
}

/// Laurent coefficients as `[[n, re, im], ...]`.
pub fn parse_coefficients(text: &str) -> Result<Vec<(i64, Complex64)>> {
    let raw: Vec<(i64, f64, f64)> = serde_json::from_str(text)?;
    raw.into_iter()
        .map(|(n, re, im)| {
            if !(re.is_finite() && im.is_finite()) {
                return Err(Error::Format(format!("non-finite coefficient at n = {n}")));
            }
            if n.unsigned_abs() > 1 << 20 {
                return Err(Error::Format(format!("index {n} out of range")));
            }
            Ok((n, Complex64::new(re, im)))
        })
        .collect()
}

pub fn format_coefficients(curve: &FourierCurve) -> Result<String> {
    let v: Vec<(i64, f64, f64)> = curve
        .terms()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(n, c)| (n, c.re, c.im))
        .collect();
    Ok(serde_json::to_string(&v)?)
}

/// Curve from a coefficient list; the truncation defaults to the smallest
/// power of two covering the indices (at least 32).
pub fn curve_from_coefficients(text: &str, n_max: Option<usize>) -> Result<FourierCurve> {
    let terms = parse_coefficients(text)?;
    let top = terms.iter().map(|t| t.0.unsigned_abs() as usize).max().unwrap_or(0);
    let n = n_max.unwrap_or_else(|| top.max(32).next_power_of_two());
    FourierCurve::from_terms(n, &terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_containers_are_rejected() {
        assert!(decode_record(b"TRG").is_err());
        assert!(decode_record(b"XXXX\x01\x00\x01").is_err());
        let mut b = MAGIC.to_vec();
        b.extend_from_slice(&1u16.to_le_bytes());
        b.push(1);
        b.extend_from_slice(&16u32.to_le_bytes());
        b.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_record(&b).is_err());
    }

    #[test]
    fn coefficient_indices_are_bounded() {
        assert!(parse_coefficients("[[1, 1.0, 0.0]]").is_ok());
        assert!(parse_coefficients("[[99999999999, 1.0, 0.0]]").is_err());
        assert!(parse_coefficients("{}").is_err());
    }
}
