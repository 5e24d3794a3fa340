use std::io::{self, Write};

use super::{Histogram, ScatterRow, ThresholdCurveRow, WerCurvePoint};
use crate::format::real;

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

pub fn write_histogram_csv(mut out: impl Write, hist: &Histogram) -> io::Result<()> {
    writeln!(out, "bin_center,train_count,id_count,od_count")?;
    for r in &hist.rows {
        writeln!(
            out,
            "{},{},{},{}",
            real(r.bin_center),
            r.train_count,
            r.id_count,
            r.od_count
        )?;
    }
    Ok(())
}

pub fn write_threshold_csv(mut out: impl Write, rows: &[ThresholdCurveRow]) -> io::Result<()> {
    writeln!(out, "T,map_at_t,mr_at_t,coverage")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            real(r.t),
            opt_real(r.map_at_t),
            real(r.mr_at_t),
            real(r.coverage)
        )?;
    }
    Ok(())
}

pub fn write_wer_csv(mut out: impl Write, points: &[WerCurvePoint]) -> io::Result<()> {
    writeln!(out, "portion,wer")?;
    for p in points {
        writeln!(out, "{},{}", p.portion, real(p.wer))?;
    }
    Ok(())
}

pub fn write_quality_scatter_csv(mut out: impl Write, rows: &[ScatterRow]) -> io::Result<()> {
    writeln!(out, "sample_id,split,confidence,neg_log_quality")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.sample_id,
            r.split.name(),
            real(r.confidence),
            real(r.neg_log_quality)
        )?;
    }
    Ok(())
}

/// One line of `summary.csv`; undefined statistics are left blank.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub measure: String,
    pub auroc: f64,
    pub map_id: f64,
    pub map_at_tq1: Option<f64>,
    pub coverage_at_tq1: f64,
    pub spearman_od: Option<f64>,
}

pub fn write_summary_csv(mut out: impl Write, rows: &[SummaryRow]) -> io::Result<()> {
    writeln!(out, "measure,auroc,map_id,map_at_tq1,coverage_at_tq1,spearman_od")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.measure,
            real(r.auroc),
            real(r.map_id),
            opt_real(r.map_at_tq1),
            real(r.coverage_at_tq1),
            opt_real(r.spearman_od)
        )?;
    }
    Ok(())
}
