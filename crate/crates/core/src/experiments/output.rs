//! Results CSV and run manifest.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::spec::ExperimentSpec;
use super::{RegionHull, ResultRecord};
use crate::Result;

pub const RESULTS_FILE: &str = "results.csv";
pub const HULL_FILE: &str = "hull.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn csv_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = ["strategy", "snr_db", "alpha", "weight_u2", "block_id", "esr"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((1..=k).map(|u| format!("er_user{u}")));
    h.extend(["multicast_rate", "skipped", "iters", "wall_ms"].iter().map(|s| s.to_string()));
    h
}

/// Empty for NaN so skipped blocks leave blank cells.
fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

fn row(r: &ResultRecord) -> Vec<String> {
    let mut v = vec![
        r.strategy.name().to_string(),
        num(r.snr_db),
        num(r.alpha),
        r.weights.get(1).map_or(String::new(), |w| num(*w)),
        r.block.map_or("agg".to_string(), |b| b.to_string()),
        num(r.esr),
    ];
    v.extend(r.user_rates.iter().map(|x| num(*x)));
    v.extend([
        num(r.multicast_rate),
        r.skipped.to_string(),
        r.iters.to_string(),
        num(r.wall_ms),
    ]);
    v
}

pub fn results_csv(records: &[ResultRecord], k: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(csv_header(k)).map_err(csv_err)?;
    for r in records {
        w.write_record(row(r)).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("ascii csv"))
}

/// Vertices of every region hull, counter-clockwise from the origin.
pub fn hull_csv(hulls: &[RegionHull]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["strategy", "snr_db", "alpha", "vertex", "er_user1", "er_user2"])
        .map_err(csv_err)?;
    for h in hulls {
        for (i, (a, b)) in h.hull.iter().enumerate() {
            w.write_record([
                h.strategy.name().to_string(),
                num(h.snr_db),
                num(h.alpha),
                i.to_string(),
                num(*a),
                num(*b),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("ascii csv"))
}

fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e))
}

/// Hex SHA-256 of `blob <len>\0<bytes>`, the git object hash of the content.
pub fn git_style_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Seeds {
    pub seed: u64,
    pub blocks: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub spec: ExperimentSpec,
    pub spec_hash: String,
    pub results_hash: String,
    pub seeds: Seeds,
}

impl Manifest {
    pub fn new(spec: &ExperimentSpec, results_csv: &str) -> Result<Self> {
        let canonical = serde_json::to_vec(spec)?;
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            spec: spec.clone(),
            spec_hash: git_style_hash(&canonical),
            results_hash: git_style_hash(results_csv.as_bytes()),
            seeds: Seeds {
                seed: spec.seed,
                blocks: (0..spec.blocks as u64).collect(),
            },
        })
    }
}

/// Writes `results.csv` and `manifest.json` (and `hull.csv` when hulls are
/// given) into `dir`.
pub fn write_outputs(
    dir: &Path,
    spec: &ExperimentSpec,
    records: &[ResultRecord],
    hulls: Option<&[RegionHull]>,
) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let csv = results_csv(records, spec.num_users())?;
    fs::write(dir.join(RESULTS_FILE), &csv)?;
    if let Some(h) = hulls {
        fs::write(dir.join(HULL_FILE), hull_csv(h)?)?;
    }
    let manifest = Manifest::new(spec, &csv)?;
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::Strategy;

    #[test]
    fn git_hash_of_known_blob() {
        // `printf 'hello\n' | git hash-object --object-format=sha256 --stdin`
        assert_eq!(
            git_style_hash(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }

    #[test]
    fn columns() {
        assert_eq!(
            csv_header(3).join(","),
            "strategy,snr_db,alpha,weight_u2,block_id,esr,er_user1,er_user2,er_user3,multicast_rate,skipped,iters,wall_ms"
        );
        let r = ResultRecord {
            strategy: Strategy::OneDpcRs,
            snr_db: 20.0,
            alpha: 0.6,
            weights: vec![1.0, 0.5],
            block: None,
            esr: 3.25,
            user_rates: vec![2.0, 2.5],
            multicast_rate: 0.0,
            skipped: 1,
            blocks: 2,
            iters: 7,
            wall_ms: 0.0,
            orders: None,
        };
        let csv = results_csv(&[r], 2).unwrap();
        assert_eq!(csv.lines().nth(1).unwrap(), "1-DPCRS,20,0.6,0.5,agg,3.25,2,2.5,0,1,7,0");
    }
}
