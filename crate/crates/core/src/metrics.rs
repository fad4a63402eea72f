//! Entity-level evaluation and the train/validation split.
//!
//! For a list of entities with predicted value `y` and target value `g`
//! (either may be null):
//!
//! * `mEP = matches / I_p` where `I_p` counts non-null predictions,
//! * `mER = matches / I_g` where `I_g` counts non-null targets,
//! * `mEA = matches / I` where `I` counts all entities,
//! * `mEF` is the harmonic mean of mEP and mER.
//!
//! A match is an exact string equality of two non-null values; a pair of
//! nulls never matches but still counts in `I`. Any metric whose denominator
//! is zero is reported as zero.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Page, Project, Split};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityPair {
    pub predicted: Option<String>,
    pub target: Option<String>,
}

impl EntityPair {
    pub fn new(predicted: Option<&str>, target: Option<&str>) -> Self {
        Self {
            predicted: predicted.map(str::to_string),
            target: target.map(str::to_string),
        }
    }

    fn is_match(&self) -> bool {
        matches!((&self.predicted, &self.target), (Some(p), Some(g)) if p == g)
    }
}

/// Raw counters behind the four metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct EntityCounts {
    pub matches: u64,
    pub predicted: u64,
    pub target: u64,
    pub total: u64,
}

impl EntityCounts {
    pub fn tally<'a, I: IntoIterator<Item = &'a EntityPair>>(pairs: I) -> Self {
        let mut c = Self::default();
        for p in pairs {
            c.add(p);
        }
        c
    }

    fn add(&mut self, p: &EntityPair) {
        self.total += 1;
        self.predicted += u64::from(p.predicted.is_some());
        self.target += u64::from(p.target.is_some());
        self.matches += u64::from(p.is_match());
    }

    pub fn scores<T: Scalar>(&self) -> EntityScores<T> {
        EntityScores::from_counts(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityScores<T> {
    pub mep: T,
    pub mer: T,
    pub mef: T,
    pub mea: T,
}

impl<T: Scalar> EntityScores<T> {
    pub fn from_counts(c: &EntityCounts) -> Self {
        let mep = T::ratio_or_zero(c.matches, c.predicted);
        let mer = T::ratio_or_zero(c.matches, c.target);
        let mea = T::ratio_or_zero(c.matches, c.total);
        let mef = harmonic_mean(mep.clone(), mer.clone());
        Self { mep, mer, mef, mea }
    }

    pub fn to_f64(&self) -> EntityScores<f64> {
        EntityScores {
            mep: self.mep.approx(),
            mer: self.mer.approx(),
            mef: self.mef.approx(),
            mea: self.mea.approx(),
        }
    }
}

/// `2pr / (p + r)`, zero when `p + r` is zero.
pub fn harmonic_mean<T: Scalar>(p: T, r: T) -> T {
    let sum = p.clone() + r.clone();
    if sum == T::zero() {
        return T::zero();
    }
    let two = T::one() + T::one();
    two * p * r / sum
}

/// Scores a non-empty list of entity pairs.
pub fn evaluate<T: Scalar>(pairs: &[EntityPair]) -> Result<EntityScores<T>> {
    if pairs.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    Ok(EntityCounts::tally(pairs).scores())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeRow<T> {
    #[serde(flatten)]
    pub scores: EntityScores<T>,
    /// Number of target entities of this type.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport<T> {
    /// Rows in schema order, followed by any extra labels seen in the data.
    pub per_type: Vec<(String, TypeRow<T>)>,
    pub overall: TypeRow<T>,
}

impl<T: Scalar> EvalReport<T> {
    pub fn row(&self, label: &str) -> Option<&TypeRow<T>> {
        self.per_type.iter().find(|(l, _)| l == label).map(|(_, r)| r)
    }

    /// `type,mEP,mER,mEF,mEA,support` with a trailing `Overall` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("type,mEP,mER,mEF,mEA,support\n");
        let mut line = |name: &str, row: &TypeRow<T>| {
            let s = row.scores.to_f64();
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6},{}",
                csv_field(name),
                s.mep,
                s.mer,
                s.mef,
                s.mea,
                row.support
            );
        };
        for (name, row) in &self.per_type {
            line(name, row);
        }
        line("Overall", &self.overall);
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Pairs `(predicted label, target label)` for every segment, in ground-truth
/// page and segment order. Both projects must have the same page and segment
/// ids.
pub fn label_pairs(ground: &Project, predicted: &Project) -> Result<Vec<EntityPair>> {
    let mut missing = Vec::new();
    let mut pairs = Vec::new();
    for gp in &ground.pages {
        let Some(pp) = predicted.page(&gp.page_id) else {
            missing.push(format!("page {}", gp.page_id));
            continue;
        };
        for gs in &gp.segments {
            match pp.segment(gs.id) {
                Some(ps) => pairs.push(EntityPair {
                    predicted: ps.label.clone(),
                    target: gs.label.clone(),
                }),
                None => missing.push(format!("{}/{}", gp.page_id, gs.id)),
            }
        }
        for ps in &pp.segments {
            if gp.segment(ps.id).is_none() {
                missing.push(format!("{}/{}", gp.page_id, ps.id));
            }
        }
    }
    for pp in &predicted.pages {
        if ground.page(&pp.page_id).is_none() {
            missing.push(format!("page {}", pp.page_id));
        }
    }
    if missing.is_empty() {
        Ok(pairs)
    } else {
        Err(Error::IdMismatch { missing })
    }
}

/// Per-type and overall scores of `predicted` against `ground`.
///
/// The row for type `L` evaluates each pair projected onto `L` (a value
/// other than `L` becomes null), skipping pairs where neither side is `L`.
pub fn evaluate_by_type<T: Scalar>(ground: &Project, predicted: &Project) -> Result<EvalReport<T>> {
    let pairs = label_pairs(ground, predicted)?;
    Ok(report_from_pairs(&pairs, ground.schema.names()))
}

pub fn report_from_pairs<'a, T: Scalar>(
    pairs: &[EntityPair],
    schema_labels: impl IntoIterator<Item = &'a str>,
) -> EvalReport<T> {
    let mut per_label: BTreeMap<&str, EntityCounts> = BTreeMap::new();
    for p in pairs {
        let pred = p.predicted.as_deref();
        let target = p.target.as_deref();
        let target_side = target.filter(|g| Some(*g) != pred);
        for label in [pred, target_side].into_iter().flatten() {
            let projected = EntityPair::new(pred.filter(|v| *v == label), target.filter(|v| *v == label));
            per_label.entry(label).or_default().add(&projected);
        }
    }

    let mut order: Vec<String> = schema_labels.into_iter().map(str::to_string).collect();
    for extra in per_label.keys() {
        if !order.iter().any(|l| l == extra) {
            order.push(extra.to_string());
        }
    }
    let per_type = order
        .into_iter()
        .map(|label| {
            let c = per_label.get(label.as_str()).copied().unwrap_or_default();
            let row = TypeRow {
                scores: c.scores(),
                support: c.target,
            };
            (label, row)
        })
        .collect();
    let overall = EntityCounts::tally(pairs);
    EvalReport {
        per_type,
        overall: TypeRow {
            scores: overall.scores(),
            support: overall.target,
        },
    }
}

/// Assigns TRAIN/VAL splits in the ratio `train_parts : val_parts`.
///
/// The validation share is `floor(n * val / (train + val))`, the rest is
/// training. Without shuffling the leading pages are TRAIN; with shuffling a
/// seeded permutation decides. Pages whose split changes get a new version.
pub fn split_dataset(pages: &mut [Page], ratio: (u64, u64), shuffle: bool, seed: u64) -> Result<Vec<Split>> {
    let (train, val) = ratio;
    if train == 0 || val == 0 {
        return Err(Error::InvalidArgument(format!(
            "ratio parts must be positive, got {train}:{val}"
        )));
    }
    let parts = train + val;
    let n = pages.len();
    if (n as u64) < parts {
        return Err(Error::TooFewPages { pages: n, parts });
    }
    let n_val = (n as u128 * u128::from(val) / u128::from(parts)) as usize;
    let n_train = n - n_val;

    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut assignment = vec![Split::Unassigned; n];
    for (rank, &i) in order.iter().enumerate() {
        assignment[i] = if rank < n_train { Split::Train } else { Split::Val };
    }
    for (page, split) in pages.iter_mut().zip(&assignment) {
        if page.split != *split {
            page.split = *split;
            page.bump_version();
        }
    }
    Ok(assignment)
}

/// Parses `A:B`.
pub fn parse_ratio(s: &str) -> Result<(u64, u64)> {
    let bad = || Error::InvalidArgument(format!("ratio must look like 4:1, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b == 0 {
        return Err(bad());
    }
    Ok((a, b))
}
