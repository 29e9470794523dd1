//! Load compositions and normalized 24-hour load shapes.
//!
//! The forecast transformer's shape is a membership-weighted blend of cluster
//! centroid shapes, where each centroid shape is the responsibility-weighted
//! mean of its members' peak-normalized day shapes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::Membership;
use crate::HOURS;

/// Relative slack allowed between the metered category sum and the peak.
pub const PEAK_COINCIDENCE_TOL: f64 = 0.01;
/// Clusters with less total responsibility than this are dropped.
pub const MIN_CLUSTER_MASS: f64 = 1e-9;

/// Residential, commercial and industrial fractions of the peak-hour load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadComposition {
    pub r: f64,
    pub c: f64,
    pub i: f64,
}

impl LoadComposition {
    /// Builds a composition from R and C; I is the remainder.
    pub fn new(r: f64, c: f64) -> Result<Self> {
        let i = 1.0 - r - c;
        // absorb rounding noise from the subtraction
        let i = if i < 0.0 && i > -1e-12 { 0.0 } else { i };
        for (name, v) in [("r", r), ("c", c), ("i", i)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidComposition(format!(
                    "{name} = {v} outside [0, 1] (r = {r}, c = {c})"
                )));
            }
        }
        Ok(Self { r, c, i })
    }
}

/// Per-category loads metered at the transformer's daily peak hour, MVA.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeakHourLoads {
    pub residential: Vec<f64>,
    pub commercial: Vec<f64>,
    pub industrial: Vec<f64>,
}

/// Composition of a transformer day from customer loads at its peak hour.
pub fn compute_composition(loads: &PeakHourLoads, peak_mva: f64) -> Result<LoadComposition> {
    if !(peak_mva > 0.0) || !peak_mva.is_finite() {
        return Err(Error::InvalidInput(format!("peak {peak_mva} MVA must be positive")));
    }
    let all = loads
        .residential
        .iter()
        .chain(&loads.commercial)
        .chain(&loads.industrial);
    if let Some(bad) = all.clone().find(|l| !l.is_finite() || **l < 0.0) {
        return Err(Error::InvalidInput(format!("customer load {bad} MVA is negative")));
    }
    let res: f64 = loads.residential.iter().sum();
    let com: f64 = loads.commercial.iter().sum();
    let total: f64 = all.sum();
    if (total - peak_mva).abs() > PEAK_COINCIDENCE_TOL * peak_mva {
        return Err(Error::InvalidComposition(format!(
            "customer loads sum to {total} MVA against a {peak_mva} MVA peak"
        )));
    }
    let r = res / peak_mva;
    let c = com / peak_mva;
    let scale = total / peak_mva;
    LoadComposition::new(r / scale, c / scale)
}

/// A 24-hour shape in per-unit of its own daily peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedLoadShape {
    pub values: [f64; HOURS],
}

pub fn normalize_profile(loads: &[f64; HOURS]) -> Result<NormalizedLoadShape> {
    let peak = loads.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::InvalidInput("cannot normalize a day with no load".into()));
    }
    Ok(NormalizedLoadShape {
        values: loads.map(|l| l / peak),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCentroidProfile {
    pub cluster: usize,
    pub profile: [f64; HOURS],
    pub peak: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    pub centroids: Vec<ClusterCentroidProfile>,
    /// Clusters dropped for carrying no responsibility mass.
    pub dropped: Vec<usize>,
}

/// Responsibility-weighted mean of member shapes for each of `k` clusters.
pub fn centroid_profiles(
    members: &[(NormalizedLoadShape, Membership)],
    k: usize,
) -> Result<CentroidSet> {
    if let Some((_, m)) = members.iter().find(|(_, m)| m.probabilities.len() != k) {
        return Err(Error::InvalidInput(format!(
            "membership has {} entries, expected {k}",
            m.probabilities.len()
        )));
    }
    let mut set = CentroidSet {
        centroids: Vec::with_capacity(k),
        dropped: Vec::new(),
    };
    for cluster in 0..k {
        let mass: f64 = members.iter().map(|(_, m)| m.probabilities[cluster]).sum();
        if mass < MIN_CLUSTER_MASS {
            log::debug!("cluster {cluster} has responsibility mass {mass:e}, dropped");
            set.dropped.push(cluster);
            continue;
        }
        let mut profile = [0.0; HOURS];
        for (shape, m) in members {
            let w = m.probabilities[cluster];
            for (acc, v) in profile.iter_mut().zip(shape.values) {
                *acc += w * v;
            }
        }
        for v in &mut profile {
            *v /= mass;
        }
        let peak = profile.iter().copied().fold(0.0, f64::max);
        set.centroids.push(ClusterCentroidProfile {
            cluster,
            profile,
            peak,
        });
    }
    if set.centroids.is_empty() {
        return Err(Error::DegenerateFit("every cluster has zero responsibility mass".into()));
    }
    Ok(set)
}

/// Blends peak-normalized centroid shapes by the forecast point's memberships.
///
/// Memberships of clusters missing from `centroids` are discarded and the rest
/// renormalized.
pub fn construct_load_shape(
    membership: &Membership,
    centroids: &[ClusterCentroidProfile],
) -> Result<[f64; HOURS]> {
    let k = membership.probabilities.len();
    if let Some(c) = centroids.iter().find(|c| c.cluster >= k) {
        return Err(Error::InvalidInput(format!(
            "centroid for cluster {} but only {k} memberships",
            c.cluster
        )));
    }
    let kept: f64 = centroids
        .iter()
        .map(|c| membership.probabilities[c.cluster])
        .sum();
    if !(kept > 0.0) {
        return Err(Error::DegenerateFit(
            "forecast point belongs only to dropped clusters".into(),
        ));
    }
    let mut shape = [0.0; HOURS];
    for c in centroids {
        let w = membership.probabilities[c.cluster] / kept;
        for (acc, v) in shape.iter_mut().zip(c.profile) {
            *acc += w * v / c.peak;
        }
    }
    Ok(shape)
}
