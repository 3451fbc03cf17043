//! Jenks natural-breaks clustering of verbs by reward, and the "next cluster
//! up" vocabulary restriction used during clustered fine-tuning.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::RewardTable;

/// Sum of squared deviations over a contiguous range of sorted values, from
/// prefix sums of centred values.
struct PrefixSsd {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl PrefixSsd {
    fn new(sorted: &[f64]) -> Self {
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        let mut s1 = Vec::with_capacity(sorted.len() + 1);
        let mut s2 = Vec::with_capacity(sorted.len() + 1);
        s1.push(0.0);
        s2.push(0.0);
        for &x in sorted {
            let c = x - mean;
            s1.push(s1.last().unwrap() + c);
            s2.push(s2.last().unwrap() + c * c);
        }
        PrefixSsd { s1, s2 }
    }

    /// SSD of `sorted[from..to]`.
    fn ssd(&self, from: usize, to: usize) -> f64 {
        let n = (to - from) as f64;
        let a = self.s1[to] - self.s1[from];
        let b = self.s2[to] - self.s2[from];
        (b - a * a / n).max(0.0)
    }
}

pub fn sort_values(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Optimal Jenks partition of `values` into `k` classes.
///
/// Returns the class start offsets into the ascending-sorted values, excluding
/// the leading 0 (so `k − 1` offsets). Classes never split equal values.
/// Among equally good partitions the one whose breaks, read from the right,
/// sit furthest left is returned.
pub fn jenks_breaks(values: &[f64], k: usize) -> Result<Vec<usize>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "jenks needs at least one value".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("jenks values must be finite".into()));
    }
    let sorted = sort_values(values);
    let distinct = 1 + sorted.windows(2).filter(|w| w[0] < w[1]).count();
    if k == 0 || k > distinct {
        return Err(Error::TooFewValues {
            requested: k,
            distinct,
        });
    }
    let n = sorted.len();
    let allowed: Vec<bool> = (0..=n)
        .map(|i| i > 0 && i < n && sorted[i - 1] < sorted[i])
        .collect();
    let ssd = PrefixSsd::new(&sorted);

    // cost[m][j]: best SSD splitting sorted[..j] into m + 1 classes.
    let mut cost = vec![vec![f64::INFINITY; n + 1]; k];
    let mut back = vec![vec![0usize; n + 1]; k];
    for (j, c) in cost[0].iter_mut().enumerate().skip(1) {
        *c = ssd.ssd(0, j);
    }
    for m in 1..k {
        for j in (m + 1)..=n {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for i in m..j {
                if !allowed[i] || !cost[m - 1][i].is_finite() {
                    continue;
                }
                let c = cost[m - 1][i] + ssd.ssd(i, j);
                if c < best {
                    best = c;
                    arg = i;
                }
            }
            cost[m][j] = best;
            back[m][j] = arg;
        }
    }
    let mut breaks = vec![0; k - 1];
    let mut end = n;
    for m in (1..k).rev() {
        end = back[m][end];
        breaks[m - 1] = end;
    }
    Ok(breaks)
}

/// Sorted values grouped into the `k` Jenks classes.
pub fn jenks_classes(values: &[f64], k: usize) -> Result<Vec<Vec<f64>>> {
    let breaks = jenks_breaks(values, k)?;
    let sorted = sort_values(values);
    let mut bounds = vec![0];
    bounds.extend(&breaks);
    bounds.push(sorted.len());
    Ok(bounds
        .windows(2)
        .map(|w| sorted[w[0]..w[1]].to_vec())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerbCluster {
    pub verbs: Vec<String>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClusterReport")]
pub struct ClusterIndex {
    pub goal: String,
    pub k: usize,
    /// Ascending by mean reward.
    pub clusters: Vec<VerbCluster>,
    /// Lower reward bound of clusters `1..k`.
    pub boundaries: Vec<f64>,
    #[serde(skip)]
    membership: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct ClusterReport {
    goal: String,
    k: usize,
    clusters: Vec<VerbCluster>,
    boundaries: Vec<f64>,
}

impl TryFrom<ClusterReport> for ClusterIndex {
    type Error = String;

    fn try_from(r: ClusterReport) -> std::result::Result<Self, String> {
        if r.k != r.clusters.len() || r.k == 0 {
            return Err(format!(
                "k = {} but {} clusters listed",
                r.k,
                r.clusters.len()
            ));
        }
        Ok(ClusterIndex::from_clusters(
            r.goal,
            r.clusters,
            r.boundaries,
        ))
    }
}

impl ClusterIndex {
    fn from_clusters(goal: String, clusters: Vec<VerbCluster>, boundaries: Vec<f64>) -> Self {
        let membership = clusters
            .iter()
            .enumerate()
            .flat_map(|(c, cl)| cl.verbs.iter().map(move |v| (v.clone(), c)))
            .collect();
        ClusterIndex {
            goal,
            k: clusters.len(),
            clusters,
            boundaries,
            membership,
        }
    }

    pub fn cluster_of(&self, verb: &str) -> Option<usize> {
        self.membership.get(verb).copied()
    }

    pub fn top(&self) -> usize {
        self.k - 1
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let index: ClusterIndex = serde_json::from_str(&text)?;
        if index.k == 0 || index.clusters.iter().any(|c| c.verbs.is_empty()) {
            return Err(Error::InvalidArgument(format!(
                "{}: cluster report has an empty cluster",
                path.display()
            )));
        }
        Ok(index)
    }
}

/// Clusters every verb with positive reward, plus the goal.
pub fn build_cluster_index(table: &RewardTable, k: usize) -> Result<ClusterIndex> {
    let mut scored: Vec<(&str, f64)> = table
        .verbs
        .iter()
        .filter(|(v, e)| e.reward > 0.0 || **v == table.goal)
        .map(|(v, e)| (v.as_str(), e.reward))
        .collect();
    if !scored.iter().any(|(v, _)| *v == table.goal) {
        scored.push((&table.goal, 1.0));
    }
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    let values: Vec<f64> = scored.iter().map(|s| s.1).collect();
    let breaks = jenks_breaks(&values, k)?;

    let mut bounds = vec![0];
    bounds.extend(&breaks);
    bounds.push(scored.len());
    let clusters: Vec<VerbCluster> = bounds
        .windows(2)
        .map(|w| {
            let members = &scored[w[0]..w[1]];
            let sum: f64 = members.iter().map(|m| m.1).sum();
            VerbCluster {
                verbs: members.iter().map(|m| m.0.to_string()).collect(),
                mean: sum / members.len() as f64,
                min: members[0].1,
                max: members[members.len() - 1].1,
            }
        })
        .collect();
    let boundaries = clusters[1..].iter().map(|c| c.min).collect();
    Ok(ClusterIndex::from_clusters(
        table.goal.clone(),
        clusters,
        boundaries,
    ))
}

/// Allowed output verbs given the input verb: the next cluster up, the top
/// cluster itself for top-cluster inputs, and cluster 0 for unclustered verbs.
pub fn restricted_vocab<'a>(index: &'a ClusterIndex, verb_in: &str) -> &'a [String] {
    let c = match index.cluster_of(verb_in) {
        Some(c) => (c + 1).min(index.top()),
        None => 0,
    };
    &index.clusters[c].verbs
}
