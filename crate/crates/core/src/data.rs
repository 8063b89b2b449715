//! Edge-indexed data with explicit missing edges.
//!
//! A dataset holds one real value per unordered node pair (i, j), i < j, or a
//! missing marker. Missing edges are kept in the pair grid (the node count
//! stays what it is) but every estimator downstream sums over present pairs
//! only and normalizes by the present-pair count, so the estimand is the
//! density of the continuous component conditional on an edge being present.
//! The present/total ratio is reported alongside estimates rather than folded
//! into them.

use crate::error::{Error, Result};
use serde::Serialize;
use std::collections::HashMap;
use std::io::Read;

/// One ingested edge record; `value: None` marks an explicitly missing edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub i: String,
    pub j: String,
    pub value: Option<f64>,
}

/// Upper-triangle pair data over `n` nodes with a presence mask.
#[derive(Debug, Clone)]
pub struct DyadicDataset {
    n: usize,
    values: Vec<f64>,
    present: Vec<bool>,
    labels: Vec<String>,
}

impl DyadicDataset {
    /// Complete network from row-major upper-triangle values
    /// (pair order (0,1), (0,2), ..., (0,n-1), (1,2), ...).
    pub fn complete(n: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Input(format!("need at least 2 nodes, got {n}")));
        }
        let m = n * (n - 1) / 2;
        if values.len() != m {
            return Err(Error::Input(format!(
                "expected {m} pair values for n={n}, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite pair value {v}")));
        }
        let labels = (1..=n).map(|k| k.to_string()).collect();
        Ok(Self {
            n,
            present: vec![true; m],
            values,
            labels,
        })
    }

    /// Build from edge records. Node ids are arbitrary strings, densified to
    /// 0..n in first-seen order; pairs never mentioned stay missing.
    pub fn from_edge_list(records: &[EdgeRecord]) -> Result<Self> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut labels: Vec<String> = Vec::new();
        let mut dense: Vec<(usize, usize, Option<f64>)> = Vec::with_capacity(records.len());
        for rec in records {
            let i = *index.entry(rec.i.as_str()).or_insert_with(|| {
                labels.push(rec.i.clone());
                labels.len() - 1
            });
            let j = *index.entry(rec.j.as_str()).or_insert_with(|| {
                labels.push(rec.j.clone());
                labels.len() - 1
            });
            if i == j {
                return Err(Error::Input(format!("self loop on node {:?}", rec.i)));
            }
            if let Some(v) = rec.value {
                if !v.is_finite() {
                    return Err(Error::Input(format!(
                        "non-finite value {v} for pair ({:?}, {:?}); use an empty field or NA for missing",
                        rec.i, rec.j
                    )));
                }
            }
            dense.push((i.min(j), i.max(j), rec.value));
        }
        let n = labels.len();
        if n < 2 {
            return Err(Error::Input(format!("need at least 2 nodes, got {n}")));
        }
        let m = n * (n - 1) / 2;
        let mut values = vec![f64::NEG_INFINITY; m];
        let mut present = vec![false; m];
        let mut seen = vec![false; m];
        for (i, j, v) in dense {
            let idx = pair_index(n, i, j);
            if seen[idx] {
                return Err(Error::Input(format!(
                    "duplicate pair ({:?}, {:?})",
                    labels[i], labels[j]
                )));
            }
            seen[idx] = true;
            if let Some(v) = v {
                values[idx] = v;
                present[idx] = true;
            }
        }
        Ok(Self {
            n,
            values,
            present,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Total pair slots n(n-1)/2.
    pub fn n_pairs_total(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    pub fn n_present(&self) -> usize {
        self.present.iter().filter(|p| **p).count()
    }

    /// Share of pair slots carrying a value; the point-mass weight of the
    /// missing component is 1 minus this.
    pub fn present_share(&self) -> f64 {
        self.n_present() as f64 / self.n_pairs_total() as f64
    }

    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        let idx = pair_index(self.n, i, j);
        self.present[idx].then(|| self.values[idx])
    }

    /// Present pairs in row-major upper-triangle order.
    pub fn present_pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n).filter_map(move |j| {
                let idx = pair_index(self.n, i, j);
                self.present[idx].then(|| (i, j, self.values[idx]))
            })
        })
    }

    pub fn present_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.present_pairs().map(|(_, _, v)| v)
    }

    /// Flat storage for hot loops: (values, presence) in row-major pair order.
    pub(crate) fn raw(&self) -> (&[f64], &[bool]) {
        (&self.values, &self.present)
    }

    /// Present partners (j, W_ij) of node `i`, ascending in j.
    pub fn partners(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n).filter_map(move |j| {
            if j == i {
                return None;
            }
            let idx = pair_index(self.n, i.min(j), i.max(j));
            self.present[idx].then(|| (j, self.values[idx]))
        })
    }

    /// Validate that at least one edge is present and return the dataset with
    /// missing slots canonicalized. Estimators only ever read present slots,
    /// so the returned data is observationally identical to `self`.
    pub fn finite_subsample(&self) -> Result<Self> {
        if self.n_present() == 0 {
            return Err(Error::DegenerateInput("no present pairs".into()));
        }
        let mut out = self.clone();
        for (idx, p) in out.present.iter().enumerate() {
            if !p {
                out.values[idx] = f64::NEG_INFINITY;
            }
        }
        Ok(out)
    }

    /// Degree sequence over present edges.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for (i, j, _) in self.present_pairs() {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Node-level network summary of the presence pattern.
    pub fn summary(&self) -> NetworkSummary {
        let n = self.n;
        let edges = self.n_present();
        let density = 2.0 * edges as f64 / (n as f64 * (n as f64 - 1.0));
        let avg_degree = 2.0 * edges as f64 / n as f64;

        // Adjacency as bitset rows; triangles via popcount of row
        // intersections, each triangle hit once per edge.
        let words = n.div_ceil(64);
        let mut adj = vec![0u64; n * words];
        for (i, j, _) in self.present_pairs() {
            adj[i * words + j / 64] |= 1 << (j % 64);
            adj[j * words + i / 64] |= 1 << (i % 64);
        }
        let mut closed = 0u64; // 3 * triangle count
        for (i, j, _) in self.present_pairs() {
            let (ri, rj) = (&adj[i * words..(i + 1) * words], &adj[j * words..(j + 1) * words]);
            closed += ri
                .iter()
                .zip(rj)
                .map(|(a, b)| (a & b).count_ones() as u64)
                .sum::<u64>();
        }
        let triples: u64 = self
            .degrees()
            .iter()
            .map(|&d| (d as u64) * (d as u64).saturating_sub(1) / 2)
            .sum();
        let clustering = if triples == 0 {
            0.0
        } else {
            closed as f64 / triples as f64
        };
        NetworkSummary {
            nodes: n,
            edges,
            density,
            avg_degree,
            clustering,
        }
    }
}

/// Flat index of pair (i, j), i < j, in row-major upper-triangle order.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Presence-pattern summary of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSummary {
    pub nodes: usize,
    pub edges: usize,
    pub density: f64,
    pub avg_degree: f64,
    /// Global transitivity: closed connected triples over all connected triples.
    pub clustering: f64,
}

/// Symmetrized trade intensity for one country pair: log of the flow sum,
/// or missing when no trade moved in either direction.
pub fn trade_volume(flow_ij: f64, flow_ji: f64) -> Result<Option<f64>> {
    if !flow_ij.is_finite() || !flow_ji.is_finite() || flow_ij < 0.0 || flow_ji < 0.0 {
        return Err(Error::Input(format!(
            "flows must be finite and non-negative, got ({flow_ij}, {flow_ji})"
        )));
    }
    let total = flow_ij + flow_ji;
    if total == 0.0 {
        Ok(None)
    } else {
        Ok(Some(total.ln()))
    }
}

fn check_header(got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let ok = got.len() == want.len()
        && got
            .iter()
            .zip(want)
            .all(|(g, w)| g.trim().eq_ignore_ascii_case(w));
    if ok {
        Ok(())
    } else {
        Err(Error::Input(format!(
            "expected header {:?}, got {:?}",
            want.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )))
    }
}

fn parse_value(field: &str, line: u64) -> Result<Option<f64>> {
    let t = field.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: f64 = t
        .parse()
        .map_err(|_| Error::Input(format!("line {line}: cannot parse value {t:?}")))?;
    Ok(Some(v))
}

/// Read `i,j,w` records; empty or NA in the w column marks a missing edge.
pub fn read_edge_list_csv<R: Read>(reader: R) -> Result<Vec<EdgeRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Input(format!("cannot read header: {e}")))?
        .clone();
    check_header(&headers, &["i", "j", "w"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Input(format!("malformed CSV record: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(Error::Input(format!(
                "line {line}: expected 3 fields, got {}",
                rec.len()
            )));
        }
        out.push(EdgeRecord {
            i: rec[0].to_string(),
            j: rec[1].to_string(),
            value: parse_value(&rec[2], line)?,
        });
    }
    Ok(out)
}

/// Read `i,j,flow_ij,flow_ji` records and collapse each to a trade volume.
pub fn read_trade_csv<R: Read>(reader: R) -> Result<Vec<EdgeRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Input(format!("cannot read header: {e}")))?
        .clone();
    check_header(&headers, &["i", "j", "flow_ij", "flow_ji"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Input(format!("malformed CSV record: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(Error::Input(format!(
                "line {line}: expected 4 fields, got {}",
                rec.len()
            )));
        }
        let fij: f64 = rec[2]
            .parse()
            .map_err(|_| Error::Input(format!("line {line}: cannot parse flow {:?}", &rec[2])))?;
        let fji: f64 = rec[3]
            .parse()
            .map_err(|_| Error::Input(format!("line {line}: cannot parse flow {:?}", &rec[3])))?;
        out.push(EdgeRecord {
            i: rec[0].to_string(),
            j: rec[1].to_string(),
            value: trade_volume(fij, fji)?,
        });
    }
    Ok(out)
}
