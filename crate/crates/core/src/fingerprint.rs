//! Metadata rules that narrow the search space before optimization.
//!
//! Image-level rules (normalization, discretization, feature dimensionality)
//! only run when imaging metadata is supplied. The resampling rule always
//! runs on the label counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest majority-class fraction still considered balanced.
pub const BALANCED_MAJORITY_FRACTION: f64 = 0.60;

#[derive(Debug, Error, PartialEq)]
pub enum FingerprintError {
    #[error("multi-slice data needs both pixel spacing and slice thickness")]
    MissingSpacing,
    #[error("spacing must be strictly positive, got {0}")]
    NonPositiveSpacing(f64),
    #[error("class counts must both be positive, got ({0}, {1})")]
    EmptyClass(usize, usize),
    #[error("cannot parse metadata: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModalityKind {
    /// No fixed unit or scale, e.g. ultrasound or T1-weighted MRI.
    Qualitative,
    /// Fixed unit, e.g. CT or quantitative MRI maps.
    Quantitative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagingMetadata {
    pub modality_kind: ModalityKind,
    #[serde(default)]
    pub mean_pixel_spacing: Option<f64>,
    #[serde(default)]
    pub mean_slice_thickness: Option<f64>,
    #[serde(default)]
    pub is_single_slice: bool,
}

impl ImagingMetadata {
    /// Parses a `key = value` metadata file.
    pub fn from_toml_str(s: &str) -> Result<Self, FingerprintError> {
        let m: Self = toml::from_str(s).map_err(|e| FingerprintError::Parse(e.to_string()))?;
        for v in [m.mean_pixel_spacing, m.mean_slice_thickness].into_iter().flatten() {
            if v <= 0.0 {
                return Err(FingerprintError::NonPositiveSpacing(v));
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinStrategy {
    FixedCount,
    FixedWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureDimensionality {
    #[serde(rename = "2D")]
    TwoD,
    #[serde(rename = "2.5D")]
    TwoAndHalfD,
    #[serde(rename = "3D")]
    ThreeD,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintReport {
    /// `None` when no imaging metadata was supplied.
    pub normalize_images: Option<bool>,
    pub bin_strategy: Option<BinStrategy>,
    pub feature_dimensionality: Option<FeatureDimensionality>,
    pub resampling_enabled: bool,
    pub rationale: Vec<String>,
}

pub fn decide_normalization(kind: ModalityKind) -> bool {
    kind == ModalityKind::Qualitative
}

pub fn decide_bin_strategy(kind: ModalityKind) -> BinStrategy {
    match kind {
        ModalityKind::Qualitative => BinStrategy::FixedCount,
        ModalityKind::Quantitative => BinStrategy::FixedWidth,
    }
}

/// 2D for single slices; 3D when slice thickness ≤ 2 × pixel spacing; else 2.5D.
pub fn decide_feature_dimensionality(
    meta: &ImagingMetadata,
) -> Result<FeatureDimensionality, FingerprintError> {
    if meta.is_single_slice {
        return Ok(FeatureDimensionality::TwoD);
    }
    let (Some(pixel), Some(thickness)) = (meta.mean_pixel_spacing, meta.mean_slice_thickness)
    else {
        return Err(FingerprintError::MissingSpacing);
    };
    for v in [pixel, thickness] {
        if v <= 0.0 || !v.is_finite() {
            return Err(FingerprintError::NonPositiveSpacing(v));
        }
    }
    Ok(if thickness <= 2.0 * pixel {
        FeatureDimensionality::ThreeD
    } else {
        FeatureDimensionality::TwoAndHalfD
    })
}

/// True when the majority class exceeds 60% of the samples.
pub fn decide_resampling(counts: [usize; 2]) -> Result<bool, FingerprintError> {
    let [a, b] = counts;
    if a == 0 || b == 0 {
        return Err(FingerprintError::EmptyClass(a, b));
    }
    let majority = a.max(b) as f64 / (a + b) as f64;
    Ok(majority > BALANCED_MAJORITY_FRACTION + 1e-12)
}

/// Runs every applicable rule and records which fired.
pub fn fingerprint(
    counts: [usize; 2],
    meta: Option<&ImagingMetadata>,
) -> Result<FingerprintReport, FingerprintError> {
    let mut rationale = Vec::new();
    let (normalize_images, bin_strategy, feature_dimensionality) = match meta {
        Some(m) => {
            let norm = decide_normalization(m.modality_kind);
            rationale.push(format!(
                "normalization {}: modality is {:?}",
                if norm { "enabled" } else { "disabled" },
                m.modality_kind
            ));
            let bins = decide_bin_strategy(m.modality_kind);
            rationale.push(format!(
                "discretization uses {:?}: modality is {:?}",
                bins, m.modality_kind
            ));
            let dim = decide_feature_dimensionality(m)?;
            rationale.push(match dim {
                FeatureDimensionality::TwoD => "2D features: single-slice data".to_string(),
                FeatureDimensionality::ThreeD => format!(
                    "3D features: slice thickness {} <= 2 x pixel spacing {}",
                    m.mean_slice_thickness.unwrap_or_default(),
                    m.mean_pixel_spacing.unwrap_or_default()
                ),
                FeatureDimensionality::TwoAndHalfD => format!(
                    "2.5D features: slice thickness {} > 2 x pixel spacing {}",
                    m.mean_slice_thickness.unwrap_or_default(),
                    m.mean_pixel_spacing.unwrap_or_default()
                ),
            });
            (Some(norm), Some(bins), Some(dim))
        }
        None => {
            rationale.push(
                "image-level rules not applicable: no imaging metadata supplied".to_string(),
            );
            (None, None, None)
        }
    };
    let resampling_enabled = decide_resampling(counts)?;
    let total = (counts[0] + counts[1]) as f64;
    rationale.push(format!(
        "resampling {}: class counts ({}, {}), majority fraction {:.3} {} {:.2}",
        if resampling_enabled { "enabled" } else { "disabled" },
        counts[0],
        counts[1],
        counts[0].max(counts[1]) as f64 / total,
        if resampling_enabled { ">" } else { "<=" },
        BALANCED_MAJORITY_FRACTION
    ));
    Ok(FingerprintReport {
        normalize_images,
        bin_strategy,
        feature_dimensionality,
        resampling_enabled,
        rationale,
    })
}
