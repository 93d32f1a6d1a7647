//! Clustering of skills from several platforms in one space, and export of
//! the projected vectors for plotting.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::EquivalenceSet;
use crate::error::{Error, Result};
use crate::space::{Alignment, EmbeddingSpace, Provenance};

/// Identifier of a skill in a combined multi-platform space.
pub fn qualify(platform: &str, skill: &str) -> String {
    format!("{platform}/{skill}")
}

/// Rewrites the pairs of `truth` with qualified identifiers.
pub fn qualify_truth(truth: &EquivalenceSet, src_platform: &str, dst_platform: &str) -> EquivalenceSet {
    EquivalenceSet {
        pairs: truth
            .pairs
            .iter()
            .map(|(s, d)| (qualify(src_platform, s), qualify(dst_platform, d)))
            .collect(),
        ..Default::default()
    }
}

/// One space holding every platform's skills under qualified identifiers.
pub fn combine_spaces(spaces: &[(String, &EmbeddingSpace)]) -> Result<EmbeddingSpace> {
    let Some((_, first)) = spaces.first() else {
        return Err(Error::Data("no spaces to combine".into()));
    };
    let dim = first.dimension();
    let mut out = EmbeddingSpace::new(
        "combined",
        dim,
        Alignment::Shared,
        Provenance::new("combined").with("platforms", spaces.len()),
    );
    for (platform, space) in spaces {
        if space.dimension() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: space.dimension(),
            });
        }
        for (id, v) in space.iter() {
            out.insert(qualify(platform, id), v.to_vec())?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub clusters: BTreeMap<String, usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after seeding, then after every Lloyd iteration.
    pub inertia_trace: Vec<f64>,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = &str> {
        self.clusters
            .iter()
            .filter(move |(_, &c)| c == cluster)
            .map(|(id, _)| id.as_str())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn assign(points: &[&[f64]], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut labels = Vec::with_capacity(points.len());
    let mut inertia = 0.0;
    for p in points {
        let (best, d) = centroids
            .iter()
            .map(|c| sq_dist(p, c))
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("k ≥ 1");
        labels.push(best);
        inertia += d;
    }
    (labels, inertia)
}

/// k-means++ seeding followed by Lloyd iterations. An emptied cluster keeps
/// its previous centroid.
pub fn kmeans(space: &EmbeddingSpace, k: usize, seed: u64, max_iter: usize) -> Result<ClusterAssignment> {
    let ids: Vec<&str> = space.ids().collect();
    let points: Vec<&[f64]> = space.iter().map(|(_, v)| v).collect();
    if k == 0 || k > points.len() {
        return Err(Error::Config(format!(
            "k-means: k = {k} needs 1 ≤ k ≤ {} points",
            points.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..points.len())];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("some point has positive distance")
        } else {
            // every point coincides with a chosen centroid
            let free: Vec<usize> = (0..points.len()).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (d, p) in nearest.iter_mut().zip(&points) {
            *d = d.min(sq_dist(p, points[next]));
        }
    }
    let mut centroids: Vec<Vec<f64>> = chosen.iter().map(|&i| points[i].to_vec()).collect();
    let (mut labels, mut inertia) = assign(&points, &centroids);
    let mut trace = vec![inertia];
    for _ in 0..max_iter {
        let dim = space.dimension();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p.iter()).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let (next, next_inertia) = assign(&points, &centroids);
        trace.push(next_inertia);
        let stable = next == labels;
        labels = next;
        inertia = next_inertia;
        if stable {
            break;
        }
    }
    Ok(ClusterAssignment {
        clusters: ids.iter().map(|s| s.to_string()).zip(labels).collect(),
        centroids,
        inertia,
        inertia_trace: trace,
    })
}

/// Per cluster, the share of members with at least one truth partner whose
/// partners include a skill of the same cluster. Pairs count in both
/// directions. `None` marks clusters without truth-bearing members.
pub fn cluster_match_score(assignment: &ClusterAssignment, truth: &EquivalenceSet) -> BTreeMap<usize, Option<f64>> {
    let mut partners: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (s, d) in &truth.pairs {
        partners.entry(s).or_default().insert(d);
        partners.entry(d).or_default().insert(s);
    }
    let mut tally: BTreeMap<usize, (usize, usize)> = (0..assignment.k()).map(|c| (c, (0, 0))).collect();
    for (skill, &cluster) in &assignment.clusters {
        let Some(ps) = partners.get(skill.as_str()) else {
            continue;
        };
        let entry = tally.entry(cluster).or_default();
        entry.1 += 1;
        if ps.iter().any(|p| assignment.clusters.get(*p) == Some(&cluster)) {
            entry.0 += 1;
        }
    }
    tally
        .into_iter()
        .map(|(c, (hit, n))| (c, (n > 0).then(|| hit as f64 / n as f64)))
        .collect()
}

/// How vector components are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportPrecision {
    /// Six significant digits, compact for plotting tools.
    #[default]
    Significant6,
    /// Shortest representation that parses back to the same value.
    RoundTrip,
}

/// `%g`-style rendering with `digits` significant digits.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let digits = digits.max(1);
    let exp = x.abs().log10().floor() as i32;
    // rounding can carry into the next power of ten
    let rounded: f64 = format!("{:.*e}", digits - 1, x).parse().expect("valid float");
    let exp = if rounded.abs() >= 10f64.powi(exp + 1) {
        exp + 1
    } else {
        exp
    };
    let s = if (-4..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{rounded:.decimals$}")
    } else {
        format!("{:.*e}", digits - 1, x)
    };
    if s.contains('.') && !s.contains('e') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else if let Some((mantissa, e)) = s.split_once('e') {
        let m = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{m}e{e}")
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRecord {
    pub platform: String,
    pub skill: String,
    pub cluster: Option<usize>,
    pub vector: Vec<f64>,
}

/// Writes `platform,skill,cluster,v0,…` rows, one per skill of every space.
/// The cluster column is empty for skills the assignment does not cover.
pub fn export_projection<W: Write>(
    spaces: &[(String, &EmbeddingSpace)],
    assignment: Option<&ClusterAssignment>,
    writer: W,
    precision: ExportPrecision,
) -> Result<usize> {
    let dim = spaces.first().map(|(_, s)| s.dimension()).unwrap_or(0);
    if let Some((_, bad)) = spaces.iter().find(|(_, s)| s.dimension() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: bad.dimension(),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["platform".to_string(), "skill".into(), "cluster".into()];
    header.extend((0..dim).map(|i| format!("v{i}")));
    w.write_record(&header)?;
    let mut rows = 0;
    for (platform, space) in spaces {
        for (id, v) in space.iter() {
            let cluster = assignment
                .and_then(|a| a.clusters.get(&qualify(platform, id)))
                .map(|c| c.to_string())
                .unwrap_or_default();
            let mut record = vec![platform.clone(), id.to_string(), cluster];
            record.extend(v.iter().map(|&x| match precision {
                ExportPrecision::Significant6 => format_significant(x, 6),
                ExportPrecision::RoundTrip => x.to_string(),
            }));
            w.write_record(&record)?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}

pub fn read_projection<R: Read>(reader: R) -> Result<Vec<ProjectionRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    for (i, name) in ["platform", "skill", "cluster"].iter().enumerate() {
        if headers.get(i) != Some(name) {
            return Err(Error::MissingColumn(name.to_string()));
        }
    }
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let line = i as u64 + 2;
        let bad = |m: String| Error::Format { line, message: m };
        let cluster = match &row[2] {
            "" => None,
            c => Some(c.parse().map_err(|e| bad(format!("cluster: {e}")))?),
        };
        let vector = row
            .iter()
            .skip(3)
            .map(|x| x.parse::<f64>().map_err(|e| bad(format!("component `{x}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        out.push(ProjectionRecord {
            platform: row[0].to_string(),
            skill: row[1].to_string(),
            cluster,
            vector,
        });
    }
    Ok(out)
}
