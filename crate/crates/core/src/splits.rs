//! Benchmark construction: test-set segmentation, road-image selection,
//! per-super-class known/unknown partitioning and training-scenario checks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::Taxonomy;
use crate::types::{ClassId, ClassKind, ClassPartition, Dataset, ImageId};

/// Super-classes whose presence marks a road image.
pub const DEFAULT_TRIGGERS: [&str; 2] = ["vehicle", "street sign"];

/// Indoor super-classes; an image holding any of them is not a road image.
pub const INDOOR_SUPERCLASSES: [&str; 13] = [
    "home appliance",
    "plumbing fixture",
    "office supplies",
    "kitchenware",
    "furniture",
    "bathroom accessory",
    "drink",
    "food",
    "cosmetics",
    "personal care",
    "medical equipment",
    "musical instrument",
    "computer electronics",
];

pub const DEFAULT_KNOWN_FRACTION: f64 = 0.5;
pub const DEFAULT_MIN_INSTANCES: u64 = 60;

/// Test-image splits: pure in-distribution, pure out-of-distribution, all.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSet {
    pub id_images: BTreeSet<ImageId>,
    pub ood_images: BTreeSet<ImageId>,
    pub all_images: BTreeSet<ImageId>,
}

/// Places each image by the kinds of objects it holds. Images mixing known
/// and unknown objects, and images without objects, only join `all_images`.
pub fn segment_test_splits(test: &Dataset, partition: &ClassPartition) -> Result<SplitSet> {
    let mut splits = SplitSet::default();
    for (image, gts) in test.ground_truths_by_image() {
        splits.all_images.insert(image);
        let mut known = false;
        let mut unknown = false;
        for g in gts {
            match partition.kind(g.class_id) {
                Some(ClassKind::Known) => known = true,
                Some(ClassKind::Unknown) => unknown = true,
                None => {
                    return Err(Error::InvalidInput(format!(
                        "ground truth {} in image {image} has class {} outside the partition",
                        g.id, g.class_id
                    )))
                }
            }
        }
        match (known, unknown) {
            (true, false) => {
                splits.id_images.insert(image);
            }
            (false, true) => {
                splits.ood_images.insert(image);
            }
            _ => {}
        }
    }
    Ok(splits)
}

fn resolve_names(taxonomy: &Taxonomy, names: &[String], what: &str) -> Result<BTreeSet<ClassId>> {
    let mut out = BTreeSet::new();
    for n in names {
        let ids = taxonomy
            .resolve_name(n)
            .ok_or_else(|| Error::InvalidInput(format!("{what} {n:?} is not in the taxonomy")))?;
        out.extend(ids);
    }
    Ok(out)
}

/// Keeps images holding at least one trigger object and no object of an
/// excluded super-class. Trigger names may be super-class or class names;
/// exclusions are super-class names. Names the taxonomy lacks match nothing,
/// but at least one trigger must resolve.
pub fn select_road_images(
    dataset: &Dataset,
    taxonomy: &Taxonomy,
    triggers: &[String],
    excluded_superclasses: &[String],
) -> Result<BTreeSet<ImageId>> {
    let mut trigger_classes = BTreeSet::new();
    for n in triggers {
        match taxonomy.resolve_name(n) {
            Some(ids) => trigger_classes.extend(ids),
            None => log::debug!("trigger {n:?} is not in the taxonomy; ignored"),
        }
    }
    if trigger_classes.is_empty() {
        return Err(Error::InvalidInput(format!("no trigger of {triggers:?} is in the taxonomy")));
    }
    let mut excluded = BTreeSet::new();
    for n in excluded_superclasses {
        match taxonomy.superclass_id(n) {
            Some(sc) => {
                excluded.insert(sc);
            }
            None => log::debug!("excluded super-class {n:?} is not in the taxonomy; ignored"),
        }
    }

    let mut selected = BTreeSet::new();
    for (image, gts) in dataset.ground_truths_by_image() {
        let mut triggered = false;
        let mut blocked = false;
        for g in gts {
            let sc = taxonomy.superclass_of(g.class_id).ok_or_else(|| {
                Error::InvalidInput(format!("class {} of ground truth {} is not in the taxonomy", g.class_id, g.id))
            })?;
            triggered |= trigger_classes.contains(&g.class_id);
            blocked |= excluded.contains(&sc);
        }
        if triggered && !blocked {
            selected.insert(image);
        }
    }
    Ok(selected)
}

/// Splits the classes of every super-class into known and unknown.
///
/// Within a super-class of `n` counted classes, classes are ranked by
/// descending instance count (ties: lower id first). The first
/// `floor(frac * n)` of them are known if they also reach `min_instances`;
/// all others are unknown. Only classes present in `counts` take part.
pub fn partition_classes(
    counts: &BTreeMap<ClassId, u64>,
    taxonomy: &Taxonomy,
    frac: f64,
    min_instances: u64,
) -> Result<ClassPartition> {
    if !(0.0..=1.0).contains(&frac) {
        return Err(Error::InvalidInput(format!("known fraction must lie in [0, 1], got {frac}")));
    }
    let mut by_superclass: BTreeMap<usize, Vec<(ClassId, u64)>> = BTreeMap::new();
    for (&class, &count) in counts {
        let sc = taxonomy
            .superclass_of(class)
            .ok_or_else(|| Error::InvalidInput(format!("class {class} is not in the taxonomy")))?;
        by_superclass.entry(sc).or_default().push((class, count));
    }
    for (sc, name) in taxonomy.superclasses().iter().enumerate() {
        if !by_superclass.contains_key(&sc) {
            log::warn!("super-class {name:?} has no counted classes; skipped");
        }
    }

    let mut known = Vec::new();
    let mut unknown = Vec::new();
    for mut classes in by_superclass.into_values() {
        classes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let slots = (frac * classes.len() as f64).floor() as usize;
        for (rank, (class, count)) in classes.into_iter().enumerate() {
            if rank < slots && count >= min_instances {
                known.push(class);
            } else {
                unknown.push(class);
            }
        }
    }
    let partition = ClassPartition::new(known, unknown)?;
    match taxonomy.unknown_id() {
        Some(u) => partition.with_unknown_id(u),
        None => Ok(partition),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Unknown objects never appear in training images.
    Unseen,
    /// Unknown objects may appear in training images without labels.
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub image_id: ImageId,
    pub class_id: ClassId,
    pub annotation_id: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub verified: bool,
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

pub const EXHAUSTIVENESS_NOTE: &str =
    "checks rely on exhaustive training annotations; unlabeled unknown objects cannot be detected from labels";

/// Lists every unknown-class annotation in the training set. An `unseen`
/// claim holds iff the list is empty; an `unlabeled` claim always holds.
pub fn validate_scenario(train: &Dataset, partition: &ClassPartition, claimed: Scenario) -> ScenarioReport {
    let violations: Vec<Violation> = train
        .ground_truths
        .iter()
        .filter(|g| partition.is_unknown(g.class_id))
        .map(|g| Violation {
            image_id: g.image_id,
            class_id: g.class_id,
            annotation_id: g.id,
        })
        .collect();
    let mut notes = vec![EXHAUSTIVENESS_NOTE.to_string()];
    let verified = match claimed {
        Scenario::Unseen => violations.is_empty(),
        Scenario::Unlabeled => {
            notes.push("an unlabeled claim is consistent with any labeled training set".into());
            true
        }
    };
    ScenarioReport {
        scenario: claimed,
        verified,
        violations,
        notes,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperclassStatistics {
    pub objects: u64,
    pub known_classes: usize,
    pub unknown_classes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStatistics {
    pub images: usize,
    pub objects: usize,
    pub known_classes: usize,
    pub unknown_classes: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_superclass: BTreeMap<String, SuperclassStatistics>,
}

pub fn split_statistics(
    dataset: &Dataset,
    partition: &ClassPartition,
    taxonomy: Option<&Taxonomy>,
) -> SplitStatistics {
    let mut stats = SplitStatistics {
        images: dataset.images.len(),
        objects: dataset.ground_truths.len(),
        known_classes: partition.known().len(),
        unknown_classes: partition.unknown().len(),
        per_superclass: BTreeMap::new(),
    };
    if let Some(tax) = taxonomy {
        let counts = dataset.class_counts();
        for (&class, info) in tax.classes() {
            let in_partition = partition.kind(class);
            let count = counts.get(&class).copied().unwrap_or(0);
            if in_partition.is_none() && count == 0 {
                continue;
            }
            let entry = stats
                .per_superclass
                .entry(tax.superclasses()[info.superclass].clone())
                .or_default();
            entry.objects += count;
            match in_partition {
                Some(ClassKind::Known) if partition.known().contains(&class) => entry.known_classes += 1,
                Some(_) if partition.unknown().contains(&class) => entry.unknown_classes += 1,
                _ => {}
            }
        }
    }
    stats
}

/// Construction recipe for a hierarchical benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitRecipe {
    pub triggers: Vec<String>,
    pub exclusions: Vec<String>,
    pub frac: f64,
    pub min_instances: u64,
    /// Classes (or whole super-classes) removed before anything else, such
    /// as object parts.
    pub part_class_exclusions: Vec<String>,
}

impl Default for SplitRecipe {
    fn default() -> Self {
        SplitRecipe {
            triggers: DEFAULT_TRIGGERS.iter().map(|s| s.to_string()).collect(),
            exclusions: INDOOR_SUPERCLASSES.iter().map(|s| s.to_string()).collect(),
            frac: DEFAULT_KNOWN_FRACTION,
            min_instances: DEFAULT_MIN_INSTANCES,
            part_class_exclusions: Vec::new(),
        }
    }
}

/// Everything produced by [`build_benchmark`].
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub partition: ClassPartition,
    pub splits: SplitSet,
    pub statistics: SplitStatistics,
    pub dataset: Dataset,
}

/// Applies a recipe to an annotation dump: drops part classes, selects
/// road images, partitions the classes that remain and segments the
/// selection into ID / OOD / all.
pub fn build_benchmark(dump: &Dataset, taxonomy: &Taxonomy, recipe: &SplitRecipe) -> Result<Benchmark> {
    let parts = resolve_names(taxonomy, &recipe.part_class_exclusions, "part-class exclusion")?;
    let cleaned = Dataset {
        images: dump.images.clone(),
        ground_truths: dump
            .ground_truths
            .iter()
            .filter(|g| !parts.contains(&g.class_id))
            .cloned()
            .collect(),
        categories: dump.categories.clone(),
    };
    let selected = select_road_images(&cleaned, taxonomy, &recipe.triggers, &recipe.exclusions)?;
    if selected.is_empty() {
        return Err(Error::InvalidInput("no images selected".into()));
    }
    let dataset = cleaned.restrict_to(&selected);
    let partition = partition_classes(&dataset.class_counts(), taxonomy, recipe.frac, recipe.min_instances)?;
    let splits = segment_test_splits(&dataset, &partition)?;
    let statistics = split_statistics(&dataset, &partition, Some(taxonomy));
    Ok(Benchmark {
        partition,
        splits,
        statistics,
        dataset,
    })
}
