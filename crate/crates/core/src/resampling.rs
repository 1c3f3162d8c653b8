//! Training-set resampling for binary class imbalance.
//!
//! Per-class targets follow the strategy: classes selected for
//! oversampling grow to the majority count, classes selected for
//! undersampling shrink to the minority count. Rows are returned with the
//! kept originals first (in input order) followed by any new rows.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::matrix::{squared_euclidean, Matrix};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    RandomUnder,
    RandomOver,
    NearMiss,
    NeighborhoodCleaning,
    Smote,
    Adasyn,
}

impl ResampleMethod {
    pub fn is_undersampler(self) -> bool {
        matches!(self, Self::RandomUnder | Self::NearMiss | Self::NeighborhoodCleaning)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoteKind {
    Regular,
    Borderline,
    Tomek,
    Enn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Minority,
    NotMinority,
    Majority,
    NotMajority,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub method: ResampleMethod,
    /// Only used by SMOTE.
    pub smote_kind: SmoteKind,
    pub strategy: Strategy,
    pub n_neighbors: usize,
    /// Only used by neighborhood cleaning.
    pub cleaning_threshold: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub x: Matrix,
    pub labels: Vec<u8>,
    /// Set when the input was degenerate and returned unchanged or a
    /// fallback was used.
    pub note: Option<String>,
}

/// (majority, minority) class; ties make class 0 the majority.
fn roles(labels: &[u8]) -> (u8, u8, [usize; 2]) {
    let mut c = [0usize; 2];
    for &l in labels {
        c[l as usize] += 1;
    }
    if c[1] > c[0] {
        (1, 0, c)
    } else {
        (0, 1, c)
    }
}

/// Classes a strategy selects, as a mask indexed by class label.
fn selected(strategy: Strategy, majority: u8) -> [bool; 2] {
    let mut m = [false; 2];
    let minority = 1 - majority;
    match strategy {
        Strategy::Minority | Strategy::NotMajority => m[minority as usize] = true,
        Strategy::Majority | Strategy::NotMinority => m[majority as usize] = true,
        Strategy::All => m = [true, true],
    }
    m
}

/// Target count per class for the plan.
pub fn targets(counts: [usize; 2], strategy: Strategy, oversample: bool) -> [usize; 2] {
    let majority = if counts[1] > counts[0] { 1 } else { 0 };
    let sel = selected(strategy, majority);
    let goal = if oversample {
        counts[0].max(counts[1])
    } else {
        counts[0].min(counts[1])
    };
    let mut t = counts;
    for c in 0..2 {
        if sel[c] {
            t[c] = goal;
        }
    }
    t
}

fn identity(x: &Matrix, labels: &[u8], note: Option<String>) -> Resampled {
    Resampled {
        x: x.clone(),
        labels: labels.to_vec(),
        note,
    }
}

/// Indices of `candidates` nearest to row `i` (excluding `i`), ties by index.
fn nearest(x: &Matrix, i: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let row = x.row(i);
    let mut d: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&c| c != i)
        .map(|&c| (squared_euclidean(row, x.row(c)), c))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.into_iter().map(|(_, c)| c).collect()
}

fn class_rows(labels: &[u8], c: u8) -> Vec<usize> {
    (0..labels.len()).filter(|&i| labels[i] == c).collect()
}

fn keep_rows(x: &Matrix, labels: &[u8], keep: &[usize]) -> (Matrix, Vec<u8>) {
    (x.select_rows(keep), keep.iter().map(|&i| labels[i]).collect())
}

/// Rows whose k nearest neighbours (among all rows) mostly carry another label.
fn misclassified(x: &Matrix, labels: &[u8], k: usize) -> Vec<bool> {
    let all: Vec<usize> = (0..labels.len()).collect();
    (0..labels.len())
        .map(|i| {
            let nn = nearest(x, i, &all, k);
            let other = nn.iter().filter(|&&j| labels[j] != labels[i]).count();
            2 * other > nn.len()
        })
        .collect()
}

/// Drops `remove` rows unless that would empty a class.
fn drop_rows(x: &Matrix, labels: &[u8], remove: &[bool]) -> (Matrix, Vec<u8>) {
    let mut remove = remove.to_vec();
    for c in 0..2u8 {
        let rows = class_rows(labels, c);
        if !rows.is_empty() && rows.iter().all(|&i| remove[i]) {
            rows.iter().for_each(|&i| remove[i] = false);
        }
    }
    let keep: Vec<usize> = (0..labels.len()).filter(|&i| !remove[i]).collect();
    keep_rows(x, labels, &keep)
}

pub fn resample(x: &Matrix, labels: &[u8], plan: &ResamplePlan) -> Resampled {
    let (majority, minority, counts) = roles(labels);
    if counts[minority as usize] < 2 {
        return identity(
            x,
            labels,
            Some(format!(
                "resampling skipped: minority class has {} sample(s)",
                counts[minority as usize]
            )),
        );
    }
    let mut rng = rng_from_seed(plan.seed);
    let oversample = !plan.method.is_undersampler();
    let t = targets(counts, plan.strategy, oversample);
    match plan.method {
        ResampleMethod::RandomUnder => {
            let mut keep = Vec::new();
            for c in 0..2u8 {
                let mut rows = class_rows(labels, c);
                if t[c as usize] < rows.len() {
                    rows.shuffle(&mut rng);
                    rows.truncate(t[c as usize].max(1));
                }
                keep.extend(rows);
            }
            keep.sort_unstable();
            let (x, labels) = keep_rows(x, labels, &keep);
            Resampled { x, labels, note: None }
        }
        ResampleMethod::RandomOver => {
            let mut out = x.clone();
            let mut lab = labels.to_vec();
            for c in 0..2u8 {
                let rows = class_rows(labels, c);
                for _ in rows.len()..t[c as usize] {
                    let r = rows[rng.random_range(0..rows.len())];
                    out.push_row(x.row(r));
                    lab.push(c);
                }
            }
            Resampled {
                x: out,
                labels: lab,
                note: None,
            }
        }
        ResampleMethod::NearMiss => {
            let mut keep = Vec::new();
            for c in 0..2u8 {
                let rows = class_rows(labels, c);
                let target = t[c as usize].max(1);
                if target >= rows.len() {
                    keep.extend(rows);
                    continue;
                }
                let others = class_rows(labels, 1 - c);
                let k = 3.min(others.len());
                let score: Vec<f64> = rows
                    .iter()
                    .map(|&i| {
                        let nn = nearest(x, i, &others, k);
                        nn.iter()
                            .map(|&j| squared_euclidean(x.row(i), x.row(j)).sqrt())
                            .sum::<f64>()
                            / nn.len().max(1) as f64
                    })
                    .collect();
                let mut order: Vec<usize> = (0..rows.len()).collect();
                order.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
                keep.extend(order[..target].iter().map(|&o| rows[o]));
            }
            keep.sort_unstable();
            let (x, labels) = keep_rows(x, labels, &keep);
            Resampled { x, labels, note: None }
        }
        ResampleMethod::NeighborhoodCleaning => {
            neighborhood_cleaning(x, labels, plan, majority)
        }
        ResampleMethod::Smote | ResampleMethod::Adasyn => {
            let need = t[minority as usize].saturating_sub(counts[minority as usize]);
            let min_rows = class_rows(labels, minority);
            let k = plan.n_neighbors.clamp(1, min_rows.len() - 1);
            let mut note = None;
            let seeds: Vec<usize> = if plan.method == ResampleMethod::Adasyn {
                let all: Vec<usize> = (0..labels.len()).collect();
                let ratios: Vec<f64> = min_rows
                    .iter()
                    .map(|&i| {
                        let nn = nearest(x, i, &all, k);
                        nn.iter().filter(|&&j| labels[j] == majority).count() as f64
                            / nn.len() as f64
                    })
                    .collect();
                let alloc = adasyn_allocation(&ratios, need);
                min_rows
                    .iter()
                    .zip(alloc)
                    .flat_map(|(&r, a)| std::iter::repeat_n(r, a))
                    .collect()
            } else {
                let mut pool = min_rows.clone();
                if plan.smote_kind == SmoteKind::Borderline {
                    let danger = danger_rows(x, labels, &min_rows, k);
                    if danger.is_empty() {
                        note = Some("no borderline samples; used all minority samples".into());
                    } else {
                        pool = danger;
                    }
                }
                (0..need).map(|_| pool[rng.random_range(0..pool.len())]).collect()
            };
            let mut out = x.clone();
            let mut lab = labels.to_vec();
            for &i in &seeds {
                let nn = nearest(x, i, &min_rows, k);
                let j = nn[rng.random_range(0..nn.len())];
                let g: f64 = rng.random();
                let new: Vec<f64> = x
                    .row(i)
                    .iter()
                    .zip(x.row(j))
                    .map(|(a, b)| a + g * (b - a))
                    .collect();
                out.push_row(&new);
                lab.push(minority);
            }
            let (out, lab) = match (plan.method, plan.smote_kind) {
                (ResampleMethod::Smote, SmoteKind::Tomek) => {
                    let remove = tomek_links(&out, &lab);
                    drop_rows(&out, &lab, &remove)
                }
                (ResampleMethod::Smote, SmoteKind::Enn) => {
                    let remove = misclassified(&out, &lab, 3);
                    drop_rows(&out, &lab, &remove)
                }
                _ => (out, lab),
            };
            Resampled {
                x: out,
                labels: lab,
                note,
            }
        }
    }
}

/// Minority rows with at least half of their `k` nearest neighbours from the
/// other class.
fn danger_rows(x: &Matrix, labels: &[u8], min_rows: &[usize], k: usize) -> Vec<usize> {
    let all: Vec<usize> = (0..labels.len()).collect();
    min_rows
        .iter()
        .copied()
        .filter(|&i| {
            let nn = nearest(x, i, &all, k);
            let other = nn.iter().filter(|&&j| labels[j] != labels[i]).count();
            2 * other >= nn.len()
        })
        .collect()
}

/// Rows that belong to a Tomek link: mutual nearest neighbours of
/// different classes.
pub fn tomek_links(x: &Matrix, labels: &[u8]) -> Vec<bool> {
    let all: Vec<usize> = (0..labels.len()).collect();
    let nn: Vec<usize> = (0..labels.len())
        .map(|i| nearest(x, i, &all, 1).first().copied().unwrap_or(i))
        .collect();
    let mut link = vec![false; labels.len()];
    for i in 0..labels.len() {
        let j = nn[i];
        if j != i && nn[j] == i && labels[i] != labels[j] {
            link[i] = true;
            link[j] = true;
        }
    }
    link
}

/// Splits `total` synthetic samples proportionally to `ratios` with
/// largest-remainder rounding (ties by index). Uniform when all ratios are
/// zero.
pub fn adasyn_allocation(ratios: &[f64], total: usize) -> Vec<usize> {
    let m = ratios.len();
    if m == 0 {
        return Vec::new();
    }
    let sum: f64 = ratios.iter().sum();
    let share: Vec<f64> = if sum > 0.0 {
        ratios.iter().map(|r| r / sum * total as f64).collect()
    } else {
        vec![total as f64 / m as f64; m]
    };
    let mut alloc: Vec<usize> = share.iter().map(|s| s.floor() as usize).collect();
    let left = total - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        let fa = share[a] - share[a].floor();
        let fb = share[b] - share[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(left) {
        alloc[i] += 1;
    }
    alloc
}

/// Edited-nearest-neighbour cleaning of the selected classes, then removal
/// of selected-class neighbours around misclassified minority samples. A
/// class takes part in the second phase only if it holds more than
/// `cleaning_threshold` of all samples.
fn neighborhood_cleaning(x: &Matrix, labels: &[u8], plan: &ResamplePlan, majority: u8) -> Resampled {
    let n = labels.len();
    let minority = 1 - majority;
    let sel = selected(plan.strategy, majority);
    let k = plan.n_neighbors.clamp(1, n - 1);
    let wrong = misclassified(x, labels, k);
    let mut remove: Vec<bool> = (0..n).map(|i| sel[labels[i] as usize] && wrong[i]).collect();
    let counts = roles(labels).2;
    let cleanable: Vec<bool> = (0..2)
        .map(|c| sel[c] && counts[c] as f64 > plan.cleaning_threshold * n as f64)
        .collect();
    let all: Vec<usize> = (0..n).collect();
    for i in 0..n {
        if labels[i] == minority && wrong[i] {
            for j in nearest(x, i, &all, k) {
                if labels[j] != minority && cleanable[labels[j] as usize] {
                    remove[j] = true;
                }
            }
        }
    }
    let (x, labels) = drop_rows(x, labels, &remove);
    Resampled { x, labels, note: None }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n0: usize, n1: usize) -> (Matrix, Vec<u8>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n0 {
            rows.push(vec![i as f64 * 0.1, (i % 7) as f64]);
            labels.push(0);
        }
        for i in 0..n1 {
            rows.push(vec![3.0 + i as f64 * 0.1, (i % 5) as f64]);
            labels.push(1);
        }
        (Matrix::from_rows(&rows), labels)
    }

    fn plan(method: ResampleMethod, strategy: Strategy) -> ResamplePlan {
        ResamplePlan {
            method,
            smote_kind: SmoteKind::Regular,
            strategy,
            n_neighbors: 5,
            cleaning_threshold: 0.5,
            seed: 3,
        }
    }

    fn counts(l: &[u8]) -> [usize; 2] {
        roles(l).2
    }

    #[test]
    fn random_over_equalizes_minority() {
        let (x, y) = data(70, 30);
        let r = resample(&x, &y, &plan(ResampleMethod::RandomOver, Strategy::Minority));
        assert_eq!(counts(&r.labels), [70, 70]);
    }

    #[test]
    fn random_under_and_near_miss_shrink_majority() {
        let (x, y) = data(70, 30);
        for m in [ResampleMethod::RandomUnder, ResampleMethod::NearMiss] {
            let r = resample(&x, &y, &plan(m, Strategy::Majority));
            assert_eq!(counts(&r.labels), [30, 30]);
        }
    }

    #[test]
    fn smote_points_lie_on_minority_segments() {
        let (x, y) = data(70, 30);
        let r = resample(&x, &y, &plan(ResampleMethod::Smote, Strategy::Minority));
        assert_eq!(counts(&r.labels), [70, 70]);
        let minority: Vec<&[f64]> = (70..100).map(|i| x.row(i)).collect();
        for i in 100..r.x.nrows() {
            let p = r.x.row(i);
            let on_segment = minority.iter().any(|a| {
                minority.iter().any(|b| {
                    let d: Vec<f64> = a.iter().zip(*b).map(|(u, v)| v - u).collect();
                    let dd: f64 = d.iter().map(|v| v * v).sum();
                    if dd == 0.0 {
                        return squared_euclidean(a, p) < 1e-18;
                    }
                    let g = d.iter().zip(p.iter().zip(*a)).map(|(di, (pi, ai))| di * (pi - ai)).sum::<f64>() / dd;
                    let proj: Vec<f64> = a.iter().zip(&d).map(|(ai, di)| ai + g * di).collect();
                    (-1e-9..=1.0 + 1e-9).contains(&g) && squared_euclidean(&proj, p) < 1e-18
                })
            });
            assert!(on_segment, "row {i} off every segment");
        }
    }

    #[test]
    fn adasyn_uniform_allocation() {
        assert_eq!(adasyn_allocation(&[0.5; 4], 10), vec![3, 3, 2, 2]);
        assert_eq!(adasyn_allocation(&[0.0; 3], 4), vec![2, 1, 1]);
        assert_eq!(adasyn_allocation(&[1.0, 3.0], 8), vec![2, 6]);
    }

    #[test]
    fn degenerate_minority_is_identity() {
        let (x, y) = data(10, 1);
        let r = resample(&x, &y, &plan(ResampleMethod::Smote, Strategy::Minority));
        assert_eq!(r.labels, y);
        assert!(r.note.is_some());
    }

    #[test]
    fn tomek_links_are_mutual_cross_class_pairs() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![1.1], vec![5.0]]);
        let link = tomek_links(&x, &[0, 0, 1, 1]);
        assert_eq!(link, vec![false, true, true, false]);
    }

    #[test]
    fn cleaning_never_empties_a_class() {
        let (x, y) = data(70, 30);
        for s in [Strategy::All, Strategy::NotMinority, Strategy::Majority] {
            let mut p = plan(ResampleMethod::NeighborhoodCleaning, s);
            p.cleaning_threshold = 0.25;
            let r = resample(&x, &y, &p);
            let c = counts(&r.labels);
            assert!(c[0] > 0 && c[1] > 0);
        }
    }
}
