//! Group partitions of the coordinate set and coefficient vectors that carry
//! their group structure.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disjoint groups `T_0, ..., T_{t-1}` covering `{0, ..., n-1}`.
///
/// Groups are stored as sorted index lists so that groups of very different
/// sizes cost proportionally to their size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionSpec", into = "PartitionSpec")]
pub struct GroupPartition {
    n: usize,
    groups: Vec<Vec<usize>>,
}

/// Raw on-disk form, `{"n": .., "groups": [[..], ..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub n: usize,
    pub groups: Vec<Vec<usize>>,
}

impl TryFrom<PartitionSpec> for GroupPartition {
    type Error = Error;

    fn try_from(spec: PartitionSpec) -> Result<Self> {
        GroupPartition::new(spec.n, spec.groups)
    }
}

impl From<GroupPartition> for PartitionSpec {
    fn from(p: GroupPartition) -> Self {
        PartitionSpec { n: p.n, groups: p.groups }
    }
}

impl GroupPartition {
    /// Validates and builds a partition. Each group is sorted; the group
    /// order is preserved since group indices are meaningful.
    pub fn new(n: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut sorted = Vec::with_capacity(groups.len());
        for (gi, mut group) in groups.into_iter().enumerate() {
            if group.is_empty() {
                return Err(Error::InvalidPartition(format!("group {gi} is empty")));
            }
            group.sort_unstable();
            for &j in &group {
                if j >= n {
                    return Err(Error::InvalidPartition(format!(
                        "group {gi} contains coordinate {j} outside [0, {n})"
                    )));
                }
                if seen[j] {
                    return Err(Error::InvalidPartition(format!(
                        "coordinate {j} appears in more than one group"
                    )));
                }
                seen[j] = true;
            }
            sorted.push(group);
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidPartition(format!("coordinate {missing} is not covered by any group")));
        }
        Ok(GroupPartition { n, groups: sorted })
    }

    /// One group per coordinate.
    pub fn singletons(n: usize) -> Self {
        GroupPartition { n, groups: (0..n).map(|j| vec![j]).collect() }
    }

    /// Consecutive blocks of the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let mut groups = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &s in sizes {
            groups.push((start..start + s).collect());
            start += s;
        }
        GroupPartition::new(start, groups)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group(&self, i: usize) -> &[usize] {
        &self.groups[i]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Sorted coordinates covered by the given groups.
    pub fn coordinates_of(&self, selected: &[usize]) -> Vec<usize> {
        let mut coords: Vec<usize> = selected.iter().flat_map(|&i| self.groups[i].iter().copied()).collect();
        coords.sort_unstable();
        coords
    }

    /// Groups not in `selected`, in increasing order.
    pub fn complement(&self, selected: &[usize]) -> Vec<usize> {
        let mut mask = vec![false; self.groups.len()];
        for &i in selected {
            mask[i] = true;
        }
        (0..self.groups.len()).filter(|&i| !mask[i]).collect()
    }

    pub fn check_groups(&self, selected: &[usize]) -> Result<()> {
        let t = self.groups.len();
        let mut mask = vec![false; t];
        for &i in selected {
            if i >= t {
                return Err(Error::InvalidArgument(format!("group index {i} out of range for {t} groups")));
            }
            if mask[i] {
                return Err(Error::InvalidArgument(format!("group {i} listed twice")));
            }
            mask[i] = true;
        }
        Ok(())
    }

    pub fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: len });
        }
        Ok(())
    }

    /// Euclidean norm of `v` restricted to group `i`.
    pub fn group_norm(&self, v: &DVector<f64>, i: usize) -> f64 {
        self.groups[i].iter().map(|&j| v[j] * v[j]).sum::<f64>().sqrt()
    }
}

/// Per-group Euclidean norms of `g`.
pub fn group_norms(g: &DVector<f64>, p: &GroupPartition) -> Result<Vec<f64>> {
    p.check_dim(g.len())?;
    Ok((0..p.num_groups()).map(|i| p.group_norm(g, i)).collect())
}

/// A point `β` together with the partition that defines its group structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    values: DVector<f64>,
    partition: Arc<GroupPartition>,
}

impl Coefficients {
    pub fn new(values: DVector<f64>, partition: Arc<GroupPartition>) -> Result<Self> {
        partition.check_dim(values.len())?;
        Ok(Coefficients { values, partition })
    }

    pub fn zeros(partition: Arc<GroupPartition>) -> Self {
        Coefficients { values: DVector::zeros(partition.n()), partition }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn partition(&self) -> &Arc<GroupPartition> {
        &self.partition
    }

    pub fn group_norms(&self) -> Vec<f64> {
        (0..self.partition.num_groups()).map(|i| self.partition.group_norm(&self.values, i)).collect()
    }

    /// `‖β‖_group` with exact (zero-threshold) support.
    pub fn group_sparsity(&self) -> usize {
        self.group_support(0.0).len()
    }

    pub fn group_support(&self, eta: f64) -> Vec<usize> {
        group_support(self, eta)
    }

    /// The default detection threshold `1e-7 · (1 + ‖β‖₂)`.
    pub fn detection_threshold(&self) -> f64 {
        DETECTION_FACTOR * (1.0 + self.values.norm())
    }
}

pub const DETECTION_FACTOR: f64 = 1e-7;

/// Groups whose restricted norm exceeds `eta`.
pub fn group_support(beta: &Coefficients, eta: f64) -> Vec<usize> {
    let p = beta.partition();
    (0..p.num_groups()).filter(|&i| p.group_norm(&beta.values, i) > eta).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_overlap_and_gaps() {
        assert!(GroupPartition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(GroupPartition::new(3, vec![vec![0], vec![2]]).is_err());
        assert!(GroupPartition::new(3, vec![vec![0, 1, 2], vec![]]).is_err());
        assert!(GroupPartition::new(2, vec![vec![0, 5]]).is_err());
        assert!(GroupPartition::new(3, vec![vec![2, 0], vec![1]]).is_ok());
    }

    #[test]
    fn json_validates_on_load() {
        let ok: GroupPartition = serde_json::from_str(r#"{"n":4,"groups":[[0,1],[3,2]]}"#).unwrap();
        assert_eq!(ok.group(1), &[2, 3]);
        let bad: std::result::Result<GroupPartition, _> =
            serde_json::from_str(r#"{"n":4,"groups":[[0,1],[1,2,3]]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn group_norms_examples() {
        let p = GroupPartition::contiguous(&[2, 2]).unwrap();
        let g = DVector::from_vec(vec![3.0, 4.0, 0.0, 5.0]);
        assert_eq!(group_norms(&g, &p).unwrap(), vec![5.0, 5.0]);
        assert_eq!(group_norms(&DVector::zeros(4), &p).unwrap(), vec![0.0, 0.0]);
        let s = GroupPartition::singletons(3);
        let g = DVector::from_vec(vec![-1.5, 0.0, 2.0]);
        assert_eq!(group_norms(&g, &s).unwrap(), vec![1.5, 0.0, 2.0]);
        assert!(matches!(group_norms(&DVector::zeros(3), &p), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn group_support_examples() {
        let p = Arc::new(GroupPartition::contiguous(&[1, 1, 1, 2]).unwrap());
        let zero = Coefficients::zeros(p.clone());
        assert!(zero.group_support(0.0).is_empty());

        let mut v = DVector::zeros(5);
        v[4] = -0.25;
        let one = Coefficients::new(v, p).unwrap();
        assert_eq!(one.group_support(0.0), vec![3]);

        let p2 = Arc::new(GroupPartition::singletons(2));
        let tiny = Coefficients::new(DVector::from_vec(vec![1e-9, 0.5]), p2).unwrap();
        assert_eq!(tiny.group_support(1e-6), vec![1]);
    }
}
