//! Synthetic local descriptors with an exact permutation action.
//!
//! Square templates (z2, d4) lay `side × side` spatial cells on a centred
//! grid with `bins` orientation bins per cell; the hexagonal template (d6)
//! uses every cell of a hexagon of given radius. Descriptor index is
//! `cell * bins + bin`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupName, GroupTable, Irrep};
use crate::linalg::norm;
use crate::modeling::{BasisState, LocalFeatureSet};
use crate::representation::{average_over_group, permutation_representation, Representation};

/// Spatial cells × orientation bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorTemplate {
    pub cells: usize,
    pub bins: usize,
}

impl DescriptorTemplate {
    pub fn new(cells: usize, bins: usize) -> Self {
        DescriptorTemplate { cells, bins }
    }

    pub fn dim(&self) -> usize {
        self.cells * self.bins
    }

    /// 16 cells × 8 bins for the square groups, 7 cells × 6 bins for d6.
    pub fn default_for(group: GroupName) -> Self {
        match group {
            GroupName::D6 => DescriptorTemplate::new(7, 6),
            _ => DescriptorTemplate::new(16, 8),
        }
    }
}

impl std::str::FromStr for DescriptorTemplate {
    type Err = Error;

    /// Parses `CELLSxBINS`, e.g. `16x8`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::Config(format!("template `{s}` is not CELLSxBINS")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("template `{s}` is not CELLSxBINS")))
        };
        Ok(DescriptorTemplate::new(parse(a)?, parse(b)?))
    }
}

fn exact_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

/// Radius `R` with `1 + 3R(R + 1) = n`.
fn hex_radius(n: usize) -> Option<usize> {
    (0..=n)
        .take_while(|r| 3 * r * (r + 1) < n)
        .find(|r| 1 + 3 * r * (r + 1) == n)
}

fn square_generators(
    t: &DescriptorTemplate,
    need_rotation: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let side = exact_sqrt(t.cells).ok_or_else(|| {
        Error::Config(format!(
            "square template needs a square cell count, got {}",
            t.cells
        ))
    })?;
    let b = t.bins;
    if b == 0 || !b.is_multiple_of(if need_rotation { 4 } else { 2 }) {
        return Err(Error::Config(format!(
            "orientation bins {b} not divisible by the rotation step"
        )));
    }
    // doubled, centred coordinates: u = 2i - (side - 1)
    let coord = |i: usize| 2 * i as i64 - (side as i64 - 1);
    let index = |u: i64| ((u + side as i64 - 1) / 2) as usize;
    let cell = |u: i64, v: i64| index(u) * side + index(v);
    let mut rot = vec![0; t.dim()];
    let mut mirror = vec![0; t.dim()];
    for i in 0..side {
        for j in 0..side {
            let (u, v) = (coord(i), coord(j));
            let here = i * side + j;
            for k in 0..b {
                rot[here * b + k] = cell(-v, u) * b + (k + b / 4) % b;
                mirror[here * b + k] = cell(-u, v) * b + (b + b / 2 - k) % b;
            }
        }
    }
    Ok((rot, mirror))
}

fn hex_generators(t: &DescriptorTemplate) -> Result<(Vec<usize>, Vec<usize>)> {
    let radius = hex_radius(t.cells).ok_or_else(|| {
        Error::Config(format!(
            "hexagonal template needs 1 + 3R(R+1) cells, got {}",
            t.cells
        ))
    })?;
    let b = t.bins;
    if b == 0 || !b.is_multiple_of(6) {
        return Err(Error::Config(format!(
            "orientation bins {b} not divisible by 6"
        )));
    }
    let r = radius as i64;
    let mut cells = Vec::new();
    for x in -r..=r {
        for y in (-r).max(-x - r)..=r.min(-x + r) {
            cells.push((x, y, -x - y));
        }
    }
    let find = |c: (i64, i64, i64)| {
        cells
            .iter()
            .position(|&q| q == c)
            .expect("hexagon is closed")
    };
    let mut rot = vec![0; t.dim()];
    let mut mirror = vec![0; t.dim()];
    for (here, &(x, y, z)) in cells.iter().enumerate() {
        let rc = find((-z, -x, -y));
        let mc = find((-x, -z, -y));
        for k in 0..b {
            rot[here * b + k] = rc * b + (k + b / 6) % b;
            mirror[here * b + k] = mc * b + (b - k) % b;
        }
    }
    Ok((rot, mirror))
}

fn compose(a: &[usize], b: &[usize]) -> Vec<usize> {
    b.iter().map(|&i| a[i]).collect()
}

/// Permutation action of `group` on the template, indexed like the group
/// elements `e, r, .., m, m r, ..`.
pub fn template_action(group: GroupName, template: &DescriptorTemplate) -> Result<Vec<Vec<usize>>> {
    let d = template.dim();
    if d == 0 {
        return Err(Error::Config("template has zero dimension".into()));
    }
    let identity: Vec<usize> = (0..d).collect();
    let (rot, mirror, n) = match group {
        GroupName::Trivial => return Ok(vec![identity]),
        GroupName::Z2 => {
            let (_, m) = square_generators(template, false)?;
            return Ok(vec![identity, m]);
        }
        GroupName::D4 => {
            let (r, m) = square_generators(template, true)?;
            (r, m, 4)
        }
        GroupName::D6 => {
            let (r, m) = hex_generators(template)?;
            (r, m, 6)
        }
    };
    let mut powers = vec![identity];
    for k in 1..n {
        powers.push(compose(&rot, &powers[k - 1]));
    }
    let reflections: Vec<Vec<usize>> = powers.iter().map(|p| compose(&mirror, p)).collect();
    powers.extend(reflections);
    Ok(powers)
}

/// The validated permutation representation of a template.
pub fn template_representation(
    group: Arc<GroupTable>,
    name: GroupName,
    template: &DescriptorTemplate,
) -> Result<Representation> {
    permutation_representation(group, template_action(name, template)?)
}

fn default_test_samples() -> usize {
    10
}

fn default_pose_bias() -> f64 {
    0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDatasetSpec {
    pub group: GroupName,
    pub template: DescriptorTemplate,
    pub classes: usize,
    /// Training samples per class.
    pub samples_per_class: usize,
    #[serde(default = "default_test_samples")]
    pub test_samples_per_class: usize,
    pub descriptors_per_sample: usize,
    /// Norm of the class-specific generic component of each prototype.
    pub class_signal: f64,
    /// Norm of the class-specific posed component `π(h_c) v`.
    #[serde(default = "default_pose_bias")]
    pub pose_bias: f64,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticDatasetSpec {
    pub fn new(group: GroupName) -> Self {
        SyntheticDatasetSpec {
            group,
            template: DescriptorTemplate::default_for(group),
            classes: 4,
            samples_per_class: 20,
            test_samples_per_class: default_test_samples(),
            descriptors_per_sample: 16,
            class_signal: 1.0,
            pose_bias: 0.0,
            noise: 0.5,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.group == GroupName::Trivial {
            return Err(Error::Config("synthetic data needs z2, d4 or d6".into()));
        }
        for (name, v) in [
            ("classes", self.classes),
            ("samples_per_class", self.samples_per_class),
            ("test_samples_per_class", self.test_samples_per_class),
            ("descriptors_per_sample", self.descriptors_per_sample),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("class_signal", self.class_signal),
            ("pose_bias", self.pose_bias),
            ("noise", self.noise),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        template_action(self.group, &self.template).map(|_| ())
    }
}

/// Descriptors of one split with one label per sample.
#[derive(Clone, Debug)]
pub struct LabeledSet {
    pub features: LocalFeatureSet,
    pub labels: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub spec: SyntheticDatasetSpec,
    pub group: Arc<GroupTable>,
    pub irreps: Vec<Irrep>,
    pub rep: Arc<Representation>,
    /// Noise-free class prototypes.
    pub prototypes: Vec<Vec<f64>>,
    pub train: LabeledSet,
    pub test: LabeledSet,
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn scaled_unit(v: Vec<f64>, s: f64) -> Vec<f64> {
    let n = norm(&v);
    if n == 0.0 {
        return v;
    }
    v.into_iter().map(|x| x * s / n).collect()
}

/// Prototypes `p_c = p_0 + s u_c + b π(h_c) v` with `p_0` invariant, `u_c`
/// generic, `v` orthogonal to the invariant subspace and `h_c = c mod |G|`.
fn prototypes(
    spec: &SyntheticDatasetSpec,
    rep: &Representation,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let d = rep.dim();
    let order = rep.group().order();
    let p0 = scaled_unit(average_over_group(rep, &gaussian(rng, d)), 1.0);
    let z = gaussian(rng, d);
    let fixed = average_over_group(rep, &z);
    let v = scaled_unit(
        z.iter().zip(&fixed).map(|(a, b)| a - b).collect(),
        spec.pose_bias,
    );
    (0..spec.classes)
        .map(|c| {
            let u = scaled_unit(gaussian(rng, d), spec.class_signal);
            let posed = rep.apply(c % order, &v);
            (0..d).map(|i| p0[i] + u[i] + posed[i]).collect()
        })
        .collect()
}

fn split(
    spec: &SyntheticDatasetSpec,
    rep: &Arc<Representation>,
    protos: &[Vec<f64>],
    per_class: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LabeledSet> {
    let d = rep.dim();
    let n = spec.descriptors_per_sample;
    let mut data = Vec::with_capacity(spec.classes * per_class * n * d);
    let mut labels = Vec::with_capacity(spec.classes * per_class);
    let mut offsets = vec![0];
    for _ in 0..per_class {
        for (c, p) in protos.iter().enumerate() {
            for _ in 0..n {
                for &pi in p {
                    let e: f64 = rng.sample(StandardNormal);
                    data.push(pi + spec.noise * e);
                }
            }
            labels.push(c);
            offsets.push(offsets.last().unwrap() + n);
        }
    }
    let features =
        LocalFeatureSet::new(rep.clone(), data, BasisState::Raw)?.with_grouping(offsets)?;
    Ok(LabeledSet { features, labels })
}

/// Deterministic under `spec.seed`; samples are interleaved by class.
pub fn generate_synthetic(spec: &SyntheticDatasetSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let (table, irreps) = spec.group.build();
    let group = Arc::new(table);
    let rep = Arc::new(template_representation(
        group.clone(),
        spec.group,
        &spec.template,
    )?);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let protos = prototypes(spec, &rep, &mut rng);
    let train = split(spec, &rep, &protos, spec.samples_per_class, &mut rng)?;
    let test = split(spec, &rep, &protos, spec.test_samples_per_class, &mut rng)?;
    Ok(SyntheticDataset {
        spec: spec.clone(),
        group,
        irreps,
        rep,
        prototypes: protos,
        train,
        test,
    })
}
