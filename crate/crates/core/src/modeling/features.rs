use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::representation::{Representation, SymmetryAdaptedBasis};

/// Coordinates in which descriptor rows are expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisState {
    Raw,
    Adapted,
}

impl BasisState {
    pub fn as_str(self) -> &'static str {
        match self {
            BasisState::Raw => "raw",
            BasisState::Adapted => "adapted",
        }
    }
}

/// `N` local descriptors of dimension `d`, stored row-major.
///
/// `grouping`, when present, holds sample boundaries `0 = o_0 < .. < o_S = N`;
/// sample `s` owns rows `o_s..o_{s+1}`.
#[derive(Clone, Debug)]
pub struct LocalFeatureSet {
    data: Vec<f64>,
    len: usize,
    dim: usize,
    state: BasisState,
    rep: Arc<Representation>,
    grouping: Option<Vec<usize>>,
}

/// Borrowed rows of one sample (or of a whole set).
#[derive(Clone, Copy, Debug)]
pub struct FeatureView<'a> {
    data: &'a [f64],
    dim: usize,
    state: BasisState,
    rep: &'a Arc<Representation>,
}

impl LocalFeatureSet {
    pub fn new(rep: Arc<Representation>, data: Vec<f64>, state: BasisState) -> Result<Self> {
        let dim = rep.dim();
        if dim == 0 {
            return Err(Error::invalid("descriptor dimension must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: data.len() % dim,
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("local features"));
        }
        Ok(LocalFeatureSet {
            len: data.len() / dim,
            data,
            dim,
            state,
            rep,
            grouping: None,
        })
    }

    pub fn from_rows(
        rep: Arc<Representation>,
        rows: &[Vec<f64>],
        state: BasisState,
    ) -> Result<Self> {
        let dim = rep.dim();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            check_dim(dim, r.len())?;
            data.extend_from_slice(r);
        }
        Self::new(rep, data, state)
    }

    /// Attach sample boundaries; they must be strictly increasing from 0 to `N`.
    pub fn with_grouping(mut self, offsets: Vec<usize>) -> Result<Self> {
        let valid = offsets.first() == Some(&0)
            && offsets.last() == Some(&self.len)
            && offsets.windows(2).all(|w| w[0] < w[1]);
        if !valid {
            return Err(Error::invalid(
                "grouping does not partition the descriptors",
            ));
        }
        self.grouping = Some(offsets);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self) -> BasisState {
        self.state
    }

    pub fn rep(&self) -> &Arc<Representation> {
        &self.rep
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn grouping(&self) -> Option<&[usize]> {
        self.grouping.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    /// Number of samples; a set without grouping is one sample.
    pub fn num_samples(&self) -> usize {
        self.grouping.as_ref().map_or(1, |g| g.len() - 1)
    }

    pub fn sample(&self, s: usize) -> FeatureView<'_> {
        let (a, b) = match &self.grouping {
            Some(g) => (g[s], g[s + 1]),
            None => (0, self.len),
        };
        FeatureView {
            data: &self.data[a * self.dim..b * self.dim],
            dim: self.dim,
            state: self.state,
            rep: &self.rep,
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = FeatureView<'_>> {
        (0..self.num_samples()).map(move |s| self.sample(s))
    }

    pub fn view(&self) -> FeatureView<'_> {
        FeatureView {
            data: &self.data,
            dim: self.dim,
            state: self.state,
            rep: &self.rep,
        }
    }

    fn map_rows(&self, state: BasisState, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for r in self.rows() {
            data.extend(f(r));
        }
        LocalFeatureSet {
            data,
            len: self.len,
            dim: self.dim,
            state,
            rep: self.rep.clone(),
            grouping: self.grouping.clone(),
        }
    }

    /// Rows mapped by `Wᵀ`.
    pub fn to_adapted(&self, basis: &SymmetryAdaptedBasis) -> Result<Self> {
        self.expect_state(BasisState::Raw)?;
        check_dim(self.dim, basis.dim())?;
        Ok(self.map_rows(BasisState::Adapted, |r| basis.to_adapted(r)))
    }

    /// Rows mapped back by `W`.
    pub fn from_adapted(&self, basis: &SymmetryAdaptedBasis) -> Result<Self> {
        self.expect_state(BasisState::Adapted)?;
        check_dim(self.dim, basis.dim())?;
        Ok(self.map_rows(BasisState::Raw, |r| basis.from_adapted(r)))
    }

    /// Every raw row replaced by `π(g) x`.
    pub fn transformed(&self, g: usize) -> Result<Self> {
        self.expect_state(BasisState::Raw)?;
        Ok(self.map_rows(BasisState::Raw, |r| self.rep.apply(g, r)))
    }

    /// The same rows attached to another representation of equal dimension.
    pub fn with_rep(mut self, rep: Arc<Representation>) -> Result<Self> {
        check_dim(self.dim, rep.dim())?;
        self.rep = rep;
        Ok(self)
    }

    pub fn expect_state(&self, expected: BasisState) -> Result<()> {
        expect_state(self.state, expected)
    }
}

fn expect_state(found: BasisState, expected: BasisState) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::WrongBasis {
            expected: expected.as_str(),
            found: found.as_str(),
        })
    }
}

impl<'a> FeatureView<'a> {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self) -> BasisState {
        self.state
    }

    pub fn rep(&self) -> &'a Arc<Representation> {
        self.rep
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'a, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn expect_state(&self, expected: BasisState) -> Result<()> {
        expect_state(self.state, expected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::build_z2;
    use crate::representation::{permutation_representation, symmetry_adapted_basis};

    fn pixel_pair() -> (Arc<Representation>, SymmetryAdaptedBasis) {
        let (g, irreps) = build_z2();
        let rep = Arc::new(
            permutation_representation(Arc::new(g), vec![vec![0, 1], vec![1, 0]]).unwrap(),
        );
        let sab = symmetry_adapted_basis(&rep, &irreps).unwrap();
        (rep, sab)
    }

    #[test]
    fn adapted_round_trip_matches_pixel_pair_example() {
        let (rep, sab) = pixel_pair();
        let set = LocalFeatureSet::new(rep, vec![3.0, 1.0, -2.0, 5.0], BasisState::Raw).unwrap();
        let adapted = set.to_adapted(&sab).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = adapted.row(0);
        assert!((r[0].abs() - 4.0 * s).abs() < 1e-12);
        assert!((r[1].abs() - 2.0 * s).abs() < 1e-12);
        let back = adapted.from_adapted(&sab).unwrap();
        for (a, b) in back.data().iter().zip(set.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(
            adapted.to_adapted(&sab),
            Err(Error::WrongBasis { .. })
        ));
    }

    #[test]
    fn grouping_must_partition() {
        let (rep, _) = pixel_pair();
        let set = LocalFeatureSet::new(rep, vec![0.0; 8], BasisState::Raw).unwrap();
        assert!(set.clone().with_grouping(vec![0, 1, 4]).is_ok());
        assert!(set.clone().with_grouping(vec![0, 2, 2, 4]).is_err());
        assert!(set.with_grouping(vec![0, 3]).is_err());
    }

    #[test]
    fn samples_follow_grouping() {
        let (rep, _) = pixel_pair();
        let set = LocalFeatureSet::new(rep, (0..8).map(f64::from).collect(), BasisState::Raw)
            .unwrap()
            .with_grouping(vec![0, 1, 4])
            .unwrap();
        assert_eq!(set.num_samples(), 2);
        assert_eq!(set.sample(1).len(), 3);
        assert_eq!(set.sample(1).row(0), &[2.0, 3.0]);
    }
}
