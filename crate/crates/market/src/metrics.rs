//! Per-episode training metrics and their CSV serialization.
//!
//! Floats are written with `{}` (shortest round-trip form), so reading a file
//! back reproduces every value bit for bit. Columns are fixed; none can ever
//! contain a comma, which keeps the format trivially parseable.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str =
    "episode,reward_final,reward_total,ir_violations,ic_violations,vsp_revenue,util_designated,util_best_response,feasible,seconds";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    /// 1-based episode number.
    pub episode: u64,
    /// Mean per-agent reward at the final step of the episode.
    pub reward_final: f64,
    /// Sum of mean per-agent rewards over all steps of the episode.
    pub reward_total: f64,
    /// Participation violations in the end-of-episode menu.
    pub ir_violations: u64,
    /// Self-selection violations in the end-of-episode menu.
    pub ic_violations: u64,
    /// Realized platform objective of the end-of-episode menu.
    pub vsp_revenue: f64,
    /// Count-weighted mean participant utility at designated bundles.
    pub util_designated: f64,
    /// Count-weighted mean participant utility at best-response bundles.
    pub util_best_response: f64,
    /// Whether the end-of-episode menu satisfies every constraint.
    pub feasible: bool,
    /// Wall-clock episode duration. The only nondeterministic column.
    pub seconds: f64,
}

impl MetricsRow {
    fn write_line<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            self.episode,
            self.reward_final,
            self.reward_total,
            self.ir_violations,
            self.ic_violations,
            self.vsp_revenue,
            self.util_designated,
            self.util_best_response,
            self.feasible as u8,
            self.seconds,
        )?;
        Ok(())
    }

    fn parse_line(line: &str, lineno: usize) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::Domain(format!(
                "metrics line {lineno}: expected 10 fields, got {}",
                fields.len()
            )));
        }
        let int = |i: usize| -> Result<u64> {
            fields[i]
                .parse()
                .map_err(|e| Error::Domain(format!("metrics line {lineno} field {i}: {e}")))
        };
        let float = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|e| Error::Domain(format!("metrics line {lineno} field {i}: {e}")))
        };
        let feasible = match fields[8] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Domain(format!(
                    "metrics line {lineno}: feasible must be 0 or 1, got {other}"
                )))
            }
        };
        Ok(Self {
            episode: int(0)?,
            reward_final: float(1)?,
            reward_total: float(2)?,
            ir_violations: int(3)?,
            ic_violations: int(4)?,
            vsp_revenue: float(5)?,
            util_designated: float(6)?,
            util_best_response: float(7)?,
            feasible,
            seconds: float(9)?,
        })
    }
}

pub fn write_metrics<W: Write>(rows: &[MetricsRow], mut w: W) -> Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for row in rows {
        row.write_line(&mut w)?;
    }
    Ok(())
}

pub fn read_metrics<R: Read>(r: R) -> Result<Vec<MetricsRow>> {
    let mut lines = BufReader::new(r).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Domain("metrics file is empty".into()))??;
    if header != METRICS_HEADER {
        return Err(Error::Domain(format!("unexpected metrics header: {header}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        rows.push(MetricsRow::parse_line(&line, i + 2)?);
    }
    Ok(rows)
}

pub fn write_metrics_to_path<P: AsRef<Path>>(rows: &[MetricsRow], path: P) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_metrics(rows, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_metrics_from_path<P: AsRef<Path>>(path: P) -> Result<Vec<MetricsRow>> {
    read_metrics(File::open(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<MetricsRow> {
        vec![
            MetricsRow {
                episode: 1,
                reward_final: 0.1 + 0.2, // deliberately non-representable sum
                reward_total: -3.75e-9,
                ir_violations: 2,
                ic_violations: 0,
                vsp_revenue: 17.25,
                util_designated: 1.0 / 3.0,
                util_best_response: f64::MIN_POSITIVE,
                feasible: false,
                seconds: 0.0312,
            },
            MetricsRow {
                episode: 2,
                reward_final: 1e300,
                reward_total: 0.0,
                ir_violations: 0,
                ic_violations: 0,
                vsp_revenue: -0.0,
                util_designated: 2.5,
                util_best_response: 2.5,
                feasible: true,
                seconds: 12.0,
            },
        ]
    }

    #[test]
    fn header_is_exactly_the_published_schema() {
        let mut buf = Vec::new();
        write_metrics(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "episode,reward_final,reward_total,ir_violations,ic_violations,vsp_revenue,util_designated,util_best_response,feasible,seconds\n"
        );
    }

    #[test]
    fn round_trip_reproduces_every_bit() {
        let rows = sample_rows();
        let mut buf = Vec::new();
        write_metrics(&rows, &mut buf).unwrap();
        let back = read_metrics(buf.as_slice()).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.episode, b.episode);
            assert_eq!(a.reward_final.to_bits(), b.reward_final.to_bits());
            assert_eq!(a.reward_total.to_bits(), b.reward_total.to_bits());
            assert_eq!(a.vsp_revenue.to_bits(), b.vsp_revenue.to_bits());
            assert_eq!(a.util_designated.to_bits(), b.util_designated.to_bits());
            assert_eq!(a.util_best_response.to_bits(), b.util_best_response.to_bits());
            assert_eq!(a.seconds.to_bits(), b.seconds.to_bits());
            assert_eq!(a.feasible, b.feasible);
            assert_eq!(a.ir_violations, b.ir_violations);
            assert_eq!(a.ic_violations, b.ic_violations);
        }
    }

    #[test]
    fn file_round_trip_through_nested_directory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs").join("metrics_seed7.csv");
        let rows = sample_rows();
        write_metrics_to_path(&rows, &path).unwrap();
        assert_eq!(read_metrics_from_path(&path).unwrap(), rows);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_metrics(&b""[..]).is_err());
        assert!(read_metrics(&b"bad,header\n"[..]).is_err());
        let short = format!("{METRICS_HEADER}\n1,2,3\n");
        assert!(read_metrics(short.as_bytes()).is_err());
        let bad_feasible = format!("{METRICS_HEADER}\n1,0,0,0,0,0,0,0,yes,0\n");
        assert!(read_metrics(bad_feasible.as_bytes()).is_err());
        let bad_float = format!("{METRICS_HEADER}\n1,zap,0,0,0,0,0,0,1,0\n");
        assert!(read_metrics(bad_float.as_bytes()).is_err());
    }

    #[test]
    fn proptest_float_display_round_trips() {
        use proptest::prelude::*;
        proptest!(|(bits: u64)| {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let s = format!("{v}");
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(v.to_bits(), back.to_bits());
        });
    }
}
