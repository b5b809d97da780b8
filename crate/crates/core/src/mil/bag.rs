//! Case bags: per-slide patch feature matrices and bag sampling.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mask::PatchCoord;

/// Patches of one slide: a flat row-major `n x d` feature matrix plus the
/// superpixel origin of each patch.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidePatches {
    pub slide_id: String,
    feature_dim: usize,
    features: Vec<f64>,
    coords: Vec<(u32, u32)>,
}

impl SlidePatches {
    pub fn new(
        slide_id: impl Into<String>,
        feature_dim: usize,
        features: Vec<f64>,
        coords: Vec<(u32, u32)>,
    ) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "feature_dim must be >= 1"
            )));
        }
        if features.len() % feature_dim != 0 {
            return Err(Error::LengthMismatch {
                expected: coords.len() * feature_dim,
                got: features.len(),
            });
        }
        let n = features.len() / feature_dim;
        if coords.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: coords.len(),
            });
        }
        Ok(Self {
            slide_id: slide_id.into(),
            feature_dim,
            features,
            coords,
        })
    }

    pub fn n_patches(&self) -> usize {
        self.coords.len()
    }

    pub fn patch(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn coords(&self) -> &[(u32, u32)] {
        &self.coords
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }
}

/// All patches of a case, grouped by slide.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseBag {
    pub case_id: String,
    pub feature_dim: usize,
    pub slides: Vec<SlidePatches>,
}

impl CaseBag {
    pub fn new(case_id: impl Into<String>, feature_dim: usize, slides: Vec<SlidePatches>) -> Result<Self> {
        for s in &slides {
            if s.feature_dim != feature_dim {
                return Err(Error::LengthMismatch {
                    expected: feature_dim,
                    got: s.feature_dim,
                });
            }
        }
        Ok(Self {
            case_id: case_id.into(),
            feature_dim,
            slides,
        })
    }

    pub fn total_patches(&self) -> usize {
        self.slides.iter().map(|s| s.n_patches()).sum()
    }

    /// Patch by flat index across slides, in slide order.
    pub fn patch(&self, mut i: usize) -> &[f64] {
        for s in &self.slides {
            if i < s.n_patches() {
                return s.patch(i);
            }
            i -= s.n_patches();
        }
        panic!("patch index out of range");
    }

    /// Slide id owning the flat patch index.
    pub fn slide_of(&self, mut i: usize) -> &str {
        for s in &self.slides {
            if i < s.n_patches() {
                return &s.slide_id;
            }
            i -= s.n_patches();
        }
        panic!("patch index out of range");
    }

    /// Iterate all patches in flat order.
    pub fn patches(&self) -> impl Iterator<Item = &[f64]> {
        self.slides
            .iter()
            .flat_map(|s| (0..s.n_patches()).map(move |i| s.patch(i)))
    }
}

/// How training bags are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BagSampling {
    /// Uniform over all of the case's patches (default).
    #[default]
    AcrossCase,
    /// Pick a slide uniformly, then a patch uniformly within it.
    SlideUniform,
}

/// Draw `n` patches from a case.
///
/// With the default across-case mode, draws are without replacement whenever
/// the case has at least `n` patches (so `n == total` yields a permutation),
/// and with replacement otherwise. Slide-uniform mode always draws patch by
/// patch.
pub fn sample_bag<'a>(
    case: &'a CaseBag,
    n: usize,
    mode: BagSampling,
    rng: &mut impl Rng,
) -> Result<Vec<&'a [f64]>> {
    let total = case.total_patches();
    if total == 0 {
        return Err(Error::EmptyRoi);
    }
    if n == 0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "bag size must be >= 1"
        )));
    }
    let mut out = Vec::with_capacity(n);
    match mode {
        BagSampling::AcrossCase => {
            if n <= total {
                for idx in rand::seq::index::sample(rng, total, n) {
                    out.push(case.patch(idx));
                }
            } else {
                for _ in 0..n {
                    out.push(case.patch(rng.random_range(0..total)));
                }
            }
        }
        BagSampling::SlideUniform => {
            let nonempty: Vec<&SlidePatches> = case
                .slides
                .iter()
                .filter(|s| s.n_patches() > 0)
                .collect();
            for _ in 0..n {
                let s = nonempty[rng.random_range(0..nonempty.len())];
                out.push(s.patch(rng.random_range(0..s.n_patches())));
            }
        }
    }
    Ok(out)
}

/// Restrict a case to the patches whose coordinates are included for its
/// slide. `included` pairs slide ids with their admitted patch origins;
/// slides without an entry keep no patches.
pub fn gate_case(case: &CaseBag, included: &[(String, Vec<PatchCoord>)]) -> Result<CaseBag> {
    let mut slides = Vec::new();
    for s in &case.slides {
        let keep: Option<&Vec<PatchCoord>> = included
            .iter()
            .find(|(id, _)| id == &s.slide_id)
            .map(|(_, coords)| coords);
        let Some(keep) = keep else {
            continue;
        };
        let mut features = Vec::new();
        let mut coords = Vec::new();
        for i in 0..s.n_patches() {
            let (x, y) = s.coords()[i];
            if keep.contains(&PatchCoord { x, y }) {
                features.extend_from_slice(s.patch(i));
                coords.push((x, y));
            }
        }
        if !coords.is_empty() {
            slides.push(SlidePatches::new(
                s.slide_id.clone(),
                case.feature_dim,
                features,
                coords,
            )?);
        }
    }
    CaseBag::new(case.case_id.clone(), case.feature_dim, slides)
}
