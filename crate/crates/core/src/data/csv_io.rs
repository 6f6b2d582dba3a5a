//! CSV interchange for trial data.
//!
//! One row per individual with a `cluster_id` column. Exact header:
//!
//! ```text
//! cluster_id,e1c,e2c,a,w1,w2,w3,delta,y1,y2[,l][,sim_y1star,sim_delta0,sim_delta1,sim_y20,sim_y21]
//! ```
//!
//! Floats are serialized with 17 significant digits so a write/load cycle is
//! lossless. Binary columns hold `0`/`1`. The `sim_` columns carry latent
//! counterfactuals and are only present for simulator output; estimators
//! never read them.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::{ClusterRecord, IndividualRecord, SimLatents, TrialData};
use crate::error::{Error, Result};

const BASE_COLS: [&str; 10] =
    ["cluster_id", "e1c", "e2c", "a", "w1", "w2", "w3", "delta", "y1", "y2"];
const SIM_COLS: [&str; 5] =
    ["sim_y1star", "sim_delta0", "sim_delta1", "sim_y20", "sim_y21"];

/// Format a float with 17 significant digits (lossless for f64).
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(field: &str, col: &str, row: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        row,
        message: format!("column '{col}': '{field}' is not a number"),
    })
}

fn parse_binary(field: &str, col: &str, row: usize) -> Result<u8> {
    let v = parse_f64(field, col, row)?;
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(Error::Parse {
            row,
            message: format!("column '{col}': '{field}' is not binary (expected 0 or 1)"),
        })
    }
}

/// Load trial data from a CSV file.
pub fn load_trial_csv(path: impl AsRef<Path>) -> Result<TrialData> {
    let file = File::open(path.as_ref())?;
    load_trial_reader(BufReader::new(file))
}

/// Load trial data from any reader.
pub fn load_trial_reader(reader: impl Read) -> Result<TrialData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> =
        rdr.headers().map_err(|e| Error::Schema(format!("cannot read header: {e}")))?
            .iter().map(|s| s.trim().to_string()).collect();

    for (i, want) in BASE_COLS.iter().enumerate() {
        match headers.get(i) {
            Some(got) if got == want => {}
            Some(got) => {
                return Err(Error::Schema(format!(
                    "expected column '{want}' at position {i}, found '{got}'"
                )))
            }
            None => return Err(Error::Schema(format!("missing column '{want}'"))),
        }
    }
    let mut pos = BASE_COLS.len();
    let has_l = headers.get(pos).is_some_and(|h| h == "l");
    if has_l {
        pos += 1;
    }
    let has_sim = headers.get(pos).is_some_and(|h| h == SIM_COLS[0]);
    if has_sim {
        for want in &SIM_COLS {
            match headers.get(pos) {
                Some(got) if got == want => pos += 1,
                Some(got) => {
                    return Err(Error::Schema(format!(
                        "expected column '{want}' at position {pos}, found '{got}'"
                    )))
                }
                None => return Err(Error::Schema(format!("missing column '{want}'"))),
            }
        }
    }
    if let Some(extra) = headers.get(pos) {
        return Err(Error::Schema(format!("unknown column '{extra}'")));
    }

    // Group rows by cluster id, preserving first-appearance order.
    struct Pending {
        e1c: f64,
        e2c: f64,
        a: u8,
        individuals: Vec<IndividualRecord>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, Pending> = std::collections::HashMap::new();

    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        let field = |i: usize| record.get(i).unwrap_or("");

        let id = field(0).trim().to_string();
        if id.is_empty() {
            return Err(Error::Parse { row, message: "empty cluster_id".into() });
        }
        let e1c = parse_f64(field(1), "e1c", row)?;
        let e2c = parse_f64(field(2), "e2c", row)?;
        let a = parse_binary(field(3), "a", row)?;
        let w1 = parse_f64(field(4), "w1", row)?;
        let w2 = parse_binary(field(5), "w2", row)?;
        let w3 = parse_binary(field(6), "w3", row)?;
        let delta = parse_binary(field(7), "delta", row)?;
        let y1 = parse_binary(field(8), "y1", row)?;
        let y2 = parse_binary(field(9), "y2", row)?;
        let mut next = 10;
        let l = if has_l {
            let v = parse_f64(field(next), "l", row)?;
            next += 1;
            Some(v)
        } else {
            None
        };
        let latent = if has_sim {
            let y1_star = parse_binary(field(next), "sim_y1star", row)?;
            let d0 = parse_binary(field(next + 1), "sim_delta0", row)?;
            let d1 = parse_binary(field(next + 2), "sim_delta1", row)?;
            let y20 = parse_binary(field(next + 3), "sim_y20", row)?;
            let y21 = parse_binary(field(next + 4), "sim_y21", row)?;
            Some(SimLatents {
                y1_star,
                delta_cf: [d0, d1],
                y2_cf: [y20, y21],
                y1_star_cf: None,
                l_cf: None,
            })
        } else {
            None
        };

        let rec = IndividualRecord { w1, w2, w3, delta, y1, y2, l, latent };
        rec.check().map_err(|e| match e {
            Error::Validation(msg) => Error::Validation(format!("row {row}: {msg}")),
            other => other,
        })?;

        match groups.get_mut(&id) {
            Some(p) => {
                if p.e1c != e1c || p.e2c != e2c || p.a != a {
                    return Err(Error::Validation(format!(
                        "row {row}: cluster {id} has inconsistent cluster-level values"
                    )));
                }
                p.individuals.push(rec);
            }
            None => {
                order.push(id.clone());
                groups.insert(id, Pending { e1c, e2c, a, individuals: vec![rec] });
            }
        }
    }

    let mut clusters = Vec::with_capacity(order.len());
    for id in order {
        let p = groups.remove(&id).expect("group exists");
        clusters.push(ClusterRecord::new(id, p.e1c, p.e2c, p.a, p.individuals)?);
    }
    Ok(TrialData::new(clusters))
}

/// Write trial data to a CSV file.
pub fn write_trial_csv(data: &TrialData, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_trial_writer(data, BufWriter::new(file))
}

/// Write trial data to any writer.
///
/// The `l` column is emitted iff every individual carries `l`; the `sim_`
/// columns iff every individual carries latents. Mixed presence is an error.
pub fn write_trial_writer(data: &TrialData, mut w: impl Write) -> Result<()> {
    let total: usize = data.clusters.iter().map(|c| c.n()).sum();
    let n_l: usize =
        data.clusters.iter().flat_map(|c| &c.individuals).filter(|r| r.l.is_some()).count();
    let n_sim: usize =
        data.clusters.iter().flat_map(|c| &c.individuals).filter(|r| r.latent.is_some()).count();
    if n_l != 0 && n_l != total {
        return Err(Error::Validation("mixed presence of the l covariate across rows".into()));
    }
    if n_sim != 0 && n_sim != total {
        return Err(Error::Validation("mixed presence of sim_ latents across rows".into()));
    }
    let has_l = n_l == total && total > 0;
    let has_sim = n_sim == total && total > 0;

    let mut header: Vec<&str> = BASE_COLS.to_vec();
    if has_l {
        header.push("l");
    }
    if has_sim {
        header.extend_from_slice(&SIM_COLS);
    }
    writeln!(w, "{}", header.join(","))?;

    for c in &data.clusters {
        for r in &c.individuals {
            write!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                c.id,
                fmt_f64(c.e1c),
                fmt_f64(c.e2c),
                c.a,
                fmt_f64(r.w1),
                r.w2,
                r.w3,
                r.delta,
                r.y1,
                r.y2
            )?;
            if has_l {
                write!(w, ",{}", fmt_f64(r.l.expect("checked above")))?;
            }
            if has_sim {
                let s = r.latent.as_ref().expect("checked above");
                write!(
                    w,
                    ",{},{},{},{},{}",
                    s.y1_star, s.delta_cf[0], s.delta_cf[1], s.y2_cf[0], s.y2_cf[1]
                )?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
cluster_id,e1c,e2c,a,w1,w2,w3,delta,y1,y2
c1,0.5,0.2,1,0.1,1,0,1,1,1
c1,0.5,0.2,1,0.9,0,1,1,0,0
c1,0.5,0.2,1,0.4,0,0,0,0,0
c2,-0.3,0.1,0,0.2,1,1,1,1,0
c2,-0.3,0.1,0,0.6,0,0,1,0,0
c2,-0.3,0.1,0,0.8,1,1,0,0,0
";

    #[test]
    fn parses_two_clusters_of_three() {
        let data = load_trial_reader(SMALL.as_bytes()).unwrap();
        assert_eq!(data.j(), 2);
        assert_eq!(data.clusters[0].n(), 3);
        assert_eq!(data.clusters[1].n(), 3);
        assert_eq!(data.clusters[0].id, "c1");
        assert_eq!(data.clusters[0].a, 1);
        assert_eq!(data.clusters[1].a, 0);
        assert!((data.clusters[0].w1c - (0.1 + 0.9 + 0.4) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_delta_zero_y1_one() {
        let bad = "\
cluster_id,e1c,e2c,a,w1,w2,w3,delta,y1,y2
c1,0.0,0.0,1,0.1,0,0,0,1,0
c1,0.0,0.0,1,0.2,0,0,1,0,0
";
        let err = load_trial_reader(bad.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Y1"), "message should cite the invariant: {msg}");
    }

    #[test]
    fn rejects_unknown_column() {
        let bad = "cluster_id,e1c,e2c,a,w1,w2,w3,delta,y1,y2,bogus\n";
        let err = load_trial_reader(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn rejects_missing_column() {
        let bad = "cluster_id,e1c,e2c,a,w1,w2,w3,delta,y1\n";
        let err = load_trial_reader(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("y2"));
    }

    #[test]
    fn rejects_non_binary() {
        let bad = "\
cluster_id,e1c,e2c,a,w1,w2,w3,delta,y1,y2
c1,0.0,0.0,1,0.1,0.5,0,1,0,0
";
        let err = load_trial_reader(bad.as_bytes()).unwrap_err();
        match err {
            Error::Parse { row, ref message } => {
                assert_eq!(row, 1);
                assert!(message.contains("w2"));
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn rejects_small_cluster() {
        let bad = "\
cluster_id,e1c,e2c,a,w1,w2,w3,delta,y1,y2
c1,0.0,0.0,1,0.1,0,0,1,0,0
c2,0.0,0.0,0,0.2,0,0,1,0,0
c2,0.0,0.0,0,0.3,0,0,1,0,0
";
        assert!(load_trial_reader(bad.as_bytes()).is_err());
    }

    #[test]
    fn write_then_load_round_trips() {
        let data = load_trial_reader(SMALL.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_trial_writer(&data, &mut buf).unwrap();
        let reloaded = load_trial_reader(buf.as_slice()).unwrap();
        assert_eq!(data, reloaded);
        // Canonical form is a fixed point of write.
        let mut buf2 = Vec::new();
        write_trial_writer(&reloaded, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }
}
