//! Trace CSV: `k,phi_x,phi_y,d_norm,m_k,eta_k,residual,support_size`.
//!
//! Reals are written with 17 significant digits so a re-read trace matches
//! bit for bit. `m_k = -1` marks a failed search; plain runs leave `m_k` and
//! `eta_k` empty.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::line_search::{IterationRecord, SearchStep};

pub const TRACE_HEADER: [&str; 8] = [
    "k",
    "phi_x",
    "phi_y",
    "d_norm",
    "m_k",
    "eta_k",
    "residual",
    "support_size",
];

/// 17 significant digits in scientific notation.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace(records: &[IterationRecord], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(TRACE_HEADER)?;
    for r in records {
        let m_k = match r.m_k {
            Some(SearchStep::Accepted(m)) => m.to_string(),
            Some(SearchStep::Failed) => "-1".to_string(),
            None => String::new(),
        };
        let eta_k = r.eta_k.map(format_real).unwrap_or_default();
        wtr.write_record([
            r.k.to_string(),
            format_real(r.phi_x),
            format_real(r.phi_y),
            format_real(r.d_norm),
            m_k,
            eta_k,
            format_real(r.residual),
            r.support_size.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_trace(r: impl Read) -> Result<Vec<IterationRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", TRACE_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let bad = |name: &str, e: &dyn std::fmt::Display| Error::Parse {
            line,
            message: format!("{name}: {e}"),
        };
        let real = |j: usize| -> Result<f64> {
            field(j)
                .parse::<f64>()
                .map_err(|e| bad(TRACE_HEADER[j], &e))
        };
        let m_k = match field(4) {
            "" => None,
            s => match s.parse::<i64>().map_err(|e| bad("m_k", &e))? {
                -1 => Some(SearchStep::Failed),
                m if m >= 0 => Some(SearchStep::Accepted(
                    u32::try_from(m).map_err(|e| bad("m_k", &e))?,
                )),
                m => return Err(bad("m_k", &format!("invalid value {m}"))),
            },
        };
        let eta_k = match field(5) {
            "" => None,
            _ => Some(real(5)?),
        };
        if m_k.is_some() != eta_k.is_some() {
            return Err(bad("m_k/eta_k", &"must be both present or both empty"));
        }
        out.push(IterationRecord {
            k: field(0).parse().map_err(|e| bad("k", &e))?,
            phi_x: real(1)?,
            phi_y: real(2)?,
            d_norm: real(3)?,
            m_k,
            eta_k,
            residual: real(6)?,
            support_size: field(7).parse().map_err(|e| bad("support_size", &e))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(k: usize, m_k: Option<SearchStep>, eta_k: Option<f64>) -> IterationRecord {
        IterationRecord {
            k,
            phi_x: 4.625,
            phi_y: 2.25,
            d_norm: 1.5,
            m_k,
            eta_k,
            residual: 0.0,
            support_size: 1,
        }
    }

    #[test]
    fn writes_schema() {
        let recs = [
            record(0, Some(SearchStep::Accepted(0)), Some(1.0)),
            record(1, Some(SearchStep::Failed), Some(0.0)),
            record(2, None, None),
        ];
        let mut buf = Vec::new();
        write_trace(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "k,phi_x,phi_y,d_norm,m_k,eta_k,residual,support_size");
        assert_eq!(
            lines[1],
            "0,4.6250000000000000e0,2.2500000000000000e0,1.5000000000000000e0,0,1.0000000000000000e0,0.0000000000000000e0,1"
        );
        assert!(lines[2].contains(",-1,0.0000000000000000e0,"));
        assert!(lines[3].contains(",,,"));
        assert_eq!(read_trace(text.as_bytes()).unwrap(), recs);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_trace("a,b\n".as_bytes()).is_err());
        let hdr = TRACE_HEADER.join(",");
        assert!(read_trace(format!("{hdr}\n0,1,1,1,-2,0,0,0\n").as_bytes()).is_err());
        assert!(read_trace(format!("{hdr}\n0,1,1,1,3,,0,0\n").as_bytes()).is_err());
        assert!(read_trace(format!("{hdr}\n0,x,1,1,,,0,0\n").as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            phi_x in any::<f64>().prop_filter("finite", |v| v.is_finite()),
            phi_y in -1e300f64..1e300,
            d_norm in 0.0f64..1e10,
            m in proptest::option::of(-1i64..40),
            eta in 0.0f64..1.0,
            residual in 0.0f64..1e-3,
            support_size in 0usize..1000,
        ) {
            let m_k = m.map(|m| if m < 0 { SearchStep::Failed } else { SearchStep::Accepted(m as u32) });
            let rec = IterationRecord {
                k: 7, phi_x, phi_y, d_norm, m_k,
                eta_k: m.map(|_| eta),
                residual, support_size,
            };
            let mut buf = Vec::new();
            write_trace(std::slice::from_ref(&rec), &mut buf).unwrap();
            let back = read_trace(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), 1);
            prop_assert_eq!(back[0].phi_x.to_bits(), phi_x.to_bits());
            prop_assert_eq!(back[0].phi_y.to_bits(), phi_y.to_bits());
            prop_assert_eq!(back[0].d_norm.to_bits(), d_norm.to_bits());
            prop_assert_eq!(back[0].residual.to_bits(), residual.to_bits());
            prop_assert_eq!(&back[0], &rec);
        }
    }
}
