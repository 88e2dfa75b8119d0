use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::embedding_store::{ClassName, EmbeddingSet, Manifest, ManifestEntry, SampleId, SceneId};
use crate::seed;
use crate::zeroshot::LabelEmbeddingSet;

/// The ten nuScenes detection classes and their default shares of the scene
/// pool. The five minority classes carry their nuScenes object shares; the
/// rest is split evenly over the majority classes.
pub const DEFAULT_CLASSES: [(&str, f64); 10] = [
    ("car", 0.17384),
    ("pedestrian", 0.17384),
    ("barrier", 0.17384),
    ("traffic_cone", 0.17384),
    ("bus", 0.17384),
    ("truck", 0.0759),
    ("trailer", 0.0213),
    ("construction_vehicle", 0.0126),
    ("motorcycle", 0.0108),
    ("bicycle", 0.0102),
];

const CAMERAS: [&str; 6] =
    ["CAM_FRONT", "CAM_FRONT_RIGHT", "CAM_BACK_RIGHT", "CAM_BACK", "CAM_BACK_LEFT", "CAM_FRONT_LEFT"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub class_names: Vec<ClassName>,
    /// Share of scenes per class, summing to one.
    pub proportions: Vec<f64>,
    pub dim: usize,
    pub n_scenes: usize,
    pub samples_per_scene: usize,
    /// Inverse noise scale: each sample is `normalize(centroid + z / concentration)`
    /// with `z` standard normal per component.
    pub concentration: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            class_names: DEFAULT_CLASSES.iter().map(|(c, _)| ClassName::new(*c).unwrap()).collect(),
            proportions: DEFAULT_CLASSES.iter().map(|(_, p)| *p).collect(),
            dim: 32,
            n_scenes: 1000,
            samples_per_scene: 1,
            concentration: 24.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidProportions(m));
        if self.class_names.is_empty() {
            return bad("no classes".into());
        }
        if self.proportions.len() != self.class_names.len() {
            return bad(format!("{} proportions for {} classes", self.proportions.len(), self.class_names.len()));
        }
        if let Some(p) = self.proportions.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return bad(format!("proportion {p} is negative or not finite"));
        }
        let sum: f64 = self.proportions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("proportions sum to {sum}"));
        }
        let mut names = self.class_names.clone();
        names.sort();
        names.dedup();
        if names.len() != self.class_names.len() {
            return Err(HarnessError::InvalidConfig("duplicate class names".into()));
        }
        if self.dim == 0 || self.n_scenes == 0 || self.samples_per_scene == 0 {
            return Err(HarnessError::InvalidConfig("dim, n_scenes and samples_per_scene must be positive".into()));
        }
        if !(self.concentration > 0.0) {
            return Err(HarnessError::InvalidConfig(format!("concentration {} must be positive", self.concentration)));
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `total` items. Equal remainders go to
/// the lower index.
pub fn largest_remainder(proportions: &[f64], total: usize) -> Vec<usize> {
    let quotas: Vec<f64> = proportions.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().take(total.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub set: EmbeddingSet,
    pub manifest: Manifest,
    /// Class centroids, usable as zero-shot label embeddings.
    pub labels: LabelEmbeddingSet,
    pub scene_counts: BTreeMap<ClassName, usize>,
}

fn unit(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Class-clustered unit embeddings with a manifest carrying true classes.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticWorld, HarnessError> {
    config.validate()?;
    let mut rng = seed::rng(config.seed);
    let d = config.dim;

    let centroids: Vec<Vec<f64>> = (0..config.num_classes())
        .map(|_| {
            let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            unit(&mut v);
            v
        })
        .collect();

    let counts = largest_remainder(&config.proportions, config.n_scenes);
    let mut scene_class: Vec<usize> = counts.iter().enumerate().flat_map(|(k, &c)| std::iter::repeat_n(k, c)).collect();
    scene_class.shuffle(&mut rng);

    let noise = if config.concentration.is_infinite() { 0.0 } else { 1.0 / config.concentration };
    let width = config.n_scenes.saturating_sub(1).to_string().len().max(4);
    let mut records = Vec::with_capacity(config.n_scenes * config.samples_per_scene);
    let mut entries = Vec::with_capacity(records.capacity());
    for (s, &k) in scene_class.iter().enumerate() {
        let scene = SceneId::new(format!("scene-{s:0width$}")).unwrap();
        for j in 0..config.samples_per_scene {
            let source = CAMERAS.get(j).map_or_else(|| format!("CAM_{j}"), |c| c.to_string());
            let id = SampleId::new(format!("{scene}/{source}")).unwrap();
            let mut v: Vec<f64> = centroids[k]
                .iter()
                .map(|&c| {
                    let z: f64 = rng.sample(StandardNormal);
                    c + z * noise
                })
                .collect();
            unit(&mut v);
            records.push((id.clone(), to_f32(&v)));
            entries.push(ManifestEntry {
                sample_id: id,
                scene_id: scene.clone(),
                source,
                true_class: Some(config.class_names[k].clone()),
            });
        }
    }

    let set = EmbeddingSet::new(d, records).map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    let labels = LabelEmbeddingSet::new(
        d,
        config.class_names.iter().cloned().zip(centroids.iter().map(|c| to_f32(c))).collect(),
    )
    .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    let scene_counts = config.class_names.iter().cloned().zip(counts).collect();
    Ok(SyntheticWorld { set, manifest: Manifest::new(entries), labels, scene_counts })
}

/// Mean cosine distance over all same-class sample pairs.
pub fn mean_within_class_distance(world: &SyntheticWorld) -> f64 {
    let mut by_class: BTreeMap<&ClassName, Vec<usize>> = BTreeMap::new();
    for (i, e) in world.manifest.entries.iter().enumerate() {
        if let Some(c) = &e.true_class {
            by_class.entry(c).or_default().push(i);
        }
    }
    let (mut sum, mut pairs) = (0.0, 0u64);
    for members in by_class.values() {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                let dot: f64 = world
                    .set
                    .vector(i)
                    .iter()
                    .zip(world.set.vector(j))
                    .map(|(&x, &y)| f64::from(x) * f64::from(y))
                    .sum();
                sum += 1.0 - dot;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        sum / pairs as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_proportions() {
        let c = SyntheticConfig::default();
        c.validate().unwrap();
        let share = |name: &str| c.proportions[c.class_names.iter().position(|x| x.as_str() == name).unwrap()];
        assert_eq!(share("truck"), 0.0759);
        assert_eq!(share("trailer"), 0.0213);
        assert_eq!(share("construction_vehicle"), 0.0126);
        assert_eq!(share("motorcycle"), 0.0108);
        assert_eq!(share("bicycle"), 0.0102);
    }

    #[test]
    fn largest_remainder_by_hand() {
        // 1000 scenes: floors 173 x5, 75, 21, 12, 10, 10 = 993; the seven
        // largest remainders are truck .9, the majority classes .84, motorcycle .8.
        let c = SyntheticConfig::default();
        let counts = largest_remainder(&c.proportions, 1000);
        assert_eq!(counts, vec![174, 174, 174, 174, 174, 76, 21, 12, 11, 10]);
        assert_eq!(largest_remainder(&[0.5, 0.5], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[1.0], 7), vec![7]);
    }

    #[test]
    fn infinite_concentration_collapses_classes() {
        let cfg = SyntheticConfig { n_scenes: 60, concentration: f64::INFINITY, ..Default::default() };
        let w = generate_synthetic(&cfg).unwrap();
        assert!(mean_within_class_distance(&w) < 1e-6);
    }

    #[test]
    fn single_class_world() {
        let cfg = SyntheticConfig {
            class_names: vec![ClassName::new("only").unwrap()],
            proportions: vec![1.0],
            n_scenes: 20,
            samples_per_scene: 2,
            ..Default::default()
        };
        let w = generate_synthetic(&cfg).unwrap();
        assert_eq!(w.set.len(), 40);
        assert!(w.manifest.entries.iter().all(|e| e.true_class.as_ref().unwrap().as_str() == "only"));
        assert_eq!(w.manifest.scenes().len(), 20);
        assert_eq!(w.manifest.entries[1].source, "CAM_FRONT_RIGHT");
    }

    #[test]
    fn scene_counts_follow_apportionment() {
        let w = generate_synthetic(&SyntheticConfig::default()).unwrap();
        let mut realized: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &w.manifest.entries {
            *realized.entry(e.true_class.as_ref().unwrap().as_str()).or_default() += 1;
        }
        for (c, n) in &w.scene_counts {
            assert_eq!(realized[c.as_str()], *n);
        }
        assert!(w.set.is_normalized(1e-6));
        assert!(mean_within_class_distance(&w) <= 0.1);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SyntheticConfig { n_scenes: 50, ..Default::default() };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.set, b.set);
        assert_eq!(a.manifest, b.manifest);
        let c = generate_synthetic(&SyntheticConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.set, c.set);
    }

    #[test]
    fn invalid_proportions() {
        let mut cfg = SyntheticConfig::default();
        cfg.proportions[0] += 0.01;
        assert!(matches!(generate_synthetic(&cfg), Err(HarnessError::InvalidProportions(_))));
        cfg.proportions.pop();
        assert!(matches!(generate_synthetic(&cfg), Err(HarnessError::InvalidProportions(_))));
        let neg = SyntheticConfig {
            class_names: vec![ClassName::new("a").unwrap(), ClassName::new("b").unwrap()],
            proportions: vec![1.5, -0.5],
            ..Default::default()
        };
        assert!(matches!(generate_synthetic(&neg), Err(HarnessError::InvalidProportions(_))));
    }
}
