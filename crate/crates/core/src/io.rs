//! File formats: traces, ratio samples, statistics and plot-ready tables.
//!
//! CSV output is UTF-8, comma separated, with a header row and LF line
//! endings. Floats use the shortest representation that round-trips.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::analysis::{RatioSample, WavelengthStats};
use crate::brownian::{LaserSet, Segment, SegmentedAcquisition};
use crate::ensemble::McResult;
use crate::trap::{RatioCurve, StiffnessBreakdown};
use crate::units;
use crate::{Error, Result};

const TRACE_MAGIC: &[u8; 4] = b"NVTR";
const TRACE_VERSION: u32 = 1;

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

#[derive(Serialize, Deserialize)]
struct TraceRow {
    t_s: f64,
    x_m: f64,
    segment_label: String,
}

/// Writes one row per sample: `t_s,x_m,segment_label`.
pub fn write_trace_csv<W: Write>(acq: &SegmentedAcquisition, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    for seg in &acq.segments {
        let label = seg.lasers.label();
        for i in seg.start..seg.start + seg.len {
            out.serialize(TraceRow {
                t_s: i as f64 * acq.dt,
                x_m: acq.samples[i],
                segment_label: label.to_string(),
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a trace CSV. Consecutive rows with the same label form a segment;
/// the time step comes from the first two rows. Stiffness metadata is not
/// part of the CSV schema and reads back as NaN.
pub fn read_trace_csv<R: Read>(r: R) -> Result<SegmentedAcquisition> {
    let mut times = Vec::new();
    let mut samples = Vec::new();
    let mut segments: Vec<Segment> = Vec::new();
    for (row, rec) in csv::Reader::from_reader(r)
        .deserialize::<TraceRow>()
        .enumerate()
    {
        let rec = rec?;
        let lasers = LaserSet::from_label(&rec.segment_label).ok_or_else(|| {
            Error::Format(format!(
                "row {}: unknown segment label `{}`",
                row + 2,
                rec.segment_label
            ))
        })?;
        match segments.last_mut() {
            Some(s) if s.lasers == lasers => s.len += 1,
            _ => segments.push(Segment {
                lasers,
                start: samples.len(),
                len: 1,
                kappa: f64::NAN,
            }),
        }
        times.push(rec.t_s);
        samples.push(rec.x_m);
    }
    if times.len() < 2 {
        return Err(Error::Format("trace needs at least two samples".into()));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::Format("time column must increase".into()));
    }
    let uniform = times
        .iter()
        .enumerate()
        .all(|(i, t)| (t - times[0] - i as f64 * dt).abs() <= 1e-6 * dt.max(t.abs() * 1e-9));
    if !uniform {
        return Err(Error::Format(
            "time column must be uniformly sampled".into(),
        ));
    }
    Ok(SegmentedAcquisition {
        dt,
        segments,
        samples,
    })
}

/// Little-endian binary trace: magic `NVTR`, version u32, dt f64, segment
/// count u32, then per segment (label length u32, label bytes, start u64,
/// length u64, κ f64), then sample count u64 and the samples as f64.
pub fn write_trace_binary<W: Write>(acq: &SegmentedAcquisition, mut w: W) -> Result<()> {
    w.write_all(TRACE_MAGIC)?;
    w.write_all(&TRACE_VERSION.to_le_bytes())?;
    w.write_all(&acq.dt.to_le_bytes())?;
    w.write_all(&(acq.segments.len() as u32).to_le_bytes())?;
    for s in &acq.segments {
        let label = s.lasers.label().as_bytes();
        w.write_all(&(label.len() as u32).to_le_bytes())?;
        w.write_all(label)?;
        w.write_all(&(s.start as u64).to_le_bytes())?;
        w.write_all(&(s.len as u64).to_le_bytes())?;
        w.write_all(&s.kappa.to_le_bytes())?;
    }
    w.write_all(&(acq.samples.len() as u64).to_le_bytes())?;
    for x in &acq.samples {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated binary trace: {e}")))?;
    Ok(buf)
}

pub fn read_trace_binary<R: Read>(mut r: R) -> Result<SegmentedAcquisition> {
    if &take::<4, _>(&mut r)? != TRACE_MAGIC {
        return Err(Error::Format("not an NVTR trace".into()));
    }
    let version = u32::from_le_bytes(take(&mut r)?);
    if version != TRACE_VERSION {
        return Err(Error::Format(format!(
            "unsupported trace version {version}"
        )));
    }
    let dt = f64::from_le_bytes(take(&mut r)?);
    let count = u32::from_le_bytes(take(&mut r)?) as usize;
    let mut segments = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let len = u32::from_le_bytes(take(&mut r)?) as usize;
        if len > 64 {
            return Err(Error::Format("segment label too long".into()));
        }
        let mut label = vec![0u8; len];
        r.read_exact(&mut label)
            .map_err(|e| Error::Format(format!("truncated binary trace: {e}")))?;
        let label =
            String::from_utf8(label).map_err(|_| Error::Format("label is not UTF-8".into()))?;
        let lasers = LaserSet::from_label(&label)
            .ok_or_else(|| Error::Format(format!("unknown segment label `{label}`")))?;
        segments.push(Segment {
            lasers,
            start: u64::from_le_bytes(take(&mut r)?) as usize,
            len: u64::from_le_bytes(take(&mut r)?) as usize,
            kappa: f64::from_le_bytes(take(&mut r)?),
        });
    }
    let n = u64::from_le_bytes(take(&mut r)?) as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * 8 {
        return Err(Error::Format(format!(
            "expected {n} samples, found {} bytes",
            bytes.len()
        )));
    }
    let samples: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    if segments.iter().any(|s| s.start + s.len > samples.len()) {
        return Err(Error::Format("segment exceeds the sample range".into()));
    }
    Ok(SegmentedAcquisition {
        dt,
        segments,
        samples,
    })
}

#[derive(Serialize)]
struct RatioRow<'a> {
    sample: usize,
    lambda_blue_nm: Option<f64>,
    lambda_red_nm: Option<f64>,
    r_blue: f64,
    r_red: f64,
    f660_start: f64,
    f660_end: f64,
    f_blue: f64,
    f_ref: f64,
    f_red: f64,
    accepted: bool,
    rejection: &'a str,
}

/// One row per sample. `probes_nm` optionally gives the (blue, red) probe
/// wavelengths of each sample; the columns stay empty otherwise.
pub fn write_ratio_samples_csv<W: Write>(
    samples: &[RatioSample],
    probes_nm: Option<&[(f64, f64)]>,
    w: W,
) -> Result<()> {
    if probes_nm.is_some_and(|p| p.len() != samples.len()) {
        return Err(Error::GridMismatch(
            "one probe pair per ratio sample required".into(),
        ));
    }
    let mut out = csv_writer(w);
    for (i, s) in samples.iter().enumerate() {
        let probe = probes_nm.map(|p| p[i]);
        let reason = match &s.rejection {
            None => String::new(),
            Some(r) => serde_json::to_value(r)?
                .get("kind")
                .and_then(|k| k.as_str())
                .unwrap_or_default()
                .to_string(),
        };
        out.serialize(RatioRow {
            sample: i,
            lambda_blue_nm: probe.map(|p| p.0),
            lambda_red_nm: probe.map(|p| p.1),
            r_blue: s.r_blue,
            r_red: s.r_red,
            f660_start: s.f660_start,
            f660_end: s.f660_end,
            f_blue: s.f_blue,
            f_ref: s.f_ref,
            f_red: s.f_red,
            accepted: s.accepted(),
            rejection: &reason,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_stats_json<W: Write>(stats: &[WavelengthStats], w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, stats)?;
    Ok(())
}

pub fn write_mc_json<W: Write>(result: &McResult, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, result)?;
    Ok(())
}

#[derive(Serialize)]
struct McRow {
    lambda_nm: f64,
    xi_mean: f64,
    xi_lo90: f64,
    xi_hi90: f64,
    skewness: f64,
}

/// Plot-ready Ξ band: `lambda_nm,xi_mean,xi_lo90,xi_hi90,skewness`.
pub fn write_mc_csv<W: Write>(result: &McResult, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    for b in &result.bands {
        out.serialize(McRow {
            lambda_nm: b.lambda_nm,
            xi_mean: b.xi_mean,
            xi_lo90: b.xi_lo90,
            xi_hi90: b.xi_hi90,
            skewness: b.skewness,
        })?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct SweepRow {
    pub wavelength_nm: f64,
    pub kappa_cl: f64,
    pub kappa_q: f64,
    pub kappa_tot: f64,
    pub ratio: f64,
    pub xi: f64,
}

/// Stiffness sweep with the ratio of `curve` and its Ξ against `baseline`.
pub fn sweep_rows(
    curve: &[StiffnessBreakdown],
    ratio: &RatioCurve,
    baseline: &RatioCurve,
) -> Result<Vec<SweepRow>> {
    let xi = crate::trap::xi_curve(ratio, baseline)?;
    if curve.len() != xi.len() {
        return Err(Error::GridMismatch("sweep and ratio grids differ".into()));
    }
    Ok(curve
        .iter()
        .zip(ratio.ratios.iter().zip(&xi))
        .map(|(b, (r, x))| SweepRow {
            wavelength_nm: units::to_nm(b.wavelength),
            kappa_cl: b.kappa_cl,
            kappa_q: b.kappa_q,
            kappa_tot: b.kappa_tot,
            ratio: *r,
            xi: x.1,
        })
        .collect())
}

/// `wavelength_nm,kappa_cl,kappa_q,kappa_tot,ratio,xi`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(r: R) -> Result<Vec<SweepRow>> {
    Ok(csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<Vec<SweepRow>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acquisition() -> SegmentedAcquisition {
        let samples: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 1e-8).collect();
        SegmentedAcquisition::from_samples(1e-5, samples, [1e-6, 2e-6, 3e-6, 4e-6, 1e-6]).unwrap()
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let acq = acquisition();
        let mut buf = Vec::new();
        write_trace_binary(&acq, &mut buf).unwrap();
        assert_eq!(read_trace_binary(buf.as_slice()).unwrap(), acq);
        assert!(read_trace_binary(&buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn csv_round_trip_keeps_samples_and_layout() {
        let acq = acquisition();
        let mut buf = Vec::new();
        write_trace_csv(&acq, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t_s,x_m,segment_label\n"));
        assert!(!text.contains('\r'));
        let back = read_trace_csv(buf.as_slice()).unwrap();
        assert_eq!(back.samples, acq.samples);
        assert!((back.dt - acq.dt).abs() < 1e-18);
        let layout = |a: &SegmentedAcquisition| {
            a.segments
                .iter()
                .map(|s| (s.lasers, s.start, s.len))
                .collect::<Vec<_>>()
        };
        assert_eq!(layout(&back), layout(&acq));
    }

    #[test]
    fn unknown_label_is_reported() {
        let text = "t_s,x_m,segment_label\n0,0,660\n0.1,0,green\n";
        assert!(matches!(
            read_trace_csv(text.as_bytes()),
            Err(Error::Format(_))
        ));
    }
}
