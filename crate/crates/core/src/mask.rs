//! Region-of-interest masks from probability heatmaps.
//!
//! The pipeline is threshold → component denoise → disk dilation, followed by
//! half-coverage patch gating. Grids are row-major; one cell is one
//! superpixel (32 µm by default).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Physical superpixel size the heatmaps are produced at.
pub const DEFAULT_SUPERPIXEL_UM: f32 = 32.0;
/// Patch side in superpixels: a 256-pixel patch at 512 µm spans 16 cells.
pub const DEFAULT_PATCH_SIDE: usize = 16;
/// Components smaller than this are removed during denoising.
pub const DEFAULT_MIN_COMPONENT: usize = 8;

/// Continuous tumor-probability grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    pub width: usize,
    pub height: usize,
    /// Row-major probabilities in [0, 1].
    pub values: Vec<f32>,
    /// Physical superpixel size in micrometers.
    pub superpixel_um: f32,
}

impl HeatmapGrid {
    pub fn new(width: usize, height: usize, values: Vec<f32>, superpixel_um: f32) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                got: values.len(),
            });
        }
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "heatmap value {v} outside [0,1]"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            values,
            superpixel_um,
        })
    }
}

/// Binary ROI grid aligned to a heatmap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMaskGrid {
    pub width: usize,
    pub height: usize,
    /// Row-major occupancy bits.
    pub bits: Vec<bool>,
}

impl RoiMaskGrid {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                got: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    fn set(&mut self, x: usize, y: usize) {
        self.bits[y * self.width + x] = true;
    }
}

/// Mask construction parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct MaskParams {
    /// Binarization threshold, strictly inside (0, 1).
    pub threshold: f32,
    /// Dilation radius in superpixels.
    pub dilation_radius: usize,
    /// Minimum connected-component size kept by denoising.
    pub min_component: usize,
}

impl MaskParams {
    pub fn new(threshold: f32, dilation_radius: usize, min_component: usize) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold {threshold} outside (0,1)"
            )));
        }
        if min_component == 0 {
            return Err(Error::InvalidArgument(format!("min_component must be >= 1")));
        }
        Ok(Self {
            threshold,
            dilation_radius,
            min_component,
        })
    }
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            dilation_radius: 0,
            min_component: DEFAULT_MIN_COMPONENT,
        }
    }
}

/// Threshold a heatmap: a cell is set when its value is at least `t`.
pub fn binarize(h: &HeatmapGrid, t: f32) -> Result<RoiMaskGrid> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold {t} outside (0,1)"
        )));
    }
    Ok(RoiMaskGrid {
        width: h.width,
        height: h.height,
        bits: h.values.iter().map(|&v| v >= t).collect(),
    })
}

/// Remove 8-connected components smaller than `min_component`.
pub fn denoise(m: &RoiMaskGrid, min_component: usize) -> RoiMaskGrid {
    let (w, h) = (m.width, m.height);
    let mut out = m.clone();
    let mut visited = vec![false; w * h];
    let mut stack: Vec<usize> = Vec::new();
    let mut component: Vec<usize> = Vec::new();

    for start in 0..w * h {
        if !m.bits[start] || visited[start] {
            continue;
        }
        component.clear();
        stack.push(start);
        visited[start] = true;
        while let Some(idx) = stack.pop() {
            component.push(idx);
            let x = (idx % w) as isize;
            let y = (idx / w) as isize;
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let nidx = ny as usize * w + nx as usize;
                    if m.bits[nidx] && !visited[nidx] {
                        visited[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
        if component.len() < min_component {
            for &idx in &component {
                out.bits[idx] = false;
            }
        }
    }
    out
}

/// Dilate with the discrete Euclidean disk of radius `r` (cells whose center
/// distance is at most `r`); `r = 0` is the identity.
pub fn dilate(m: &RoiMaskGrid, r: usize) -> RoiMaskGrid {
    if r == 0 {
        return m.clone();
    }
    let ri = r as isize;
    let r_sq = (r * r) as isize;
    let mut offsets = Vec::new();
    for dy in -ri..=ri {
        for dx in -ri..=ri {
            if dx * dx + dy * dy <= r_sq {
                offsets.push((dx, dy));
            }
        }
    }
    let (w, h) = (m.width, m.height);
    let mut out = RoiMaskGrid::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            if !m.get(x, y) {
                continue;
            }
            for &(dx, dy) in &offsets {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize {
                    out.set(nx as usize, ny as usize);
                }
            }
        }
    }
    out
}

/// Origin of an included patch, in superpixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PatchCoord {
    pub x: u32,
    pub y: u32,
}

/// Tile the grid into non-overlapping `side x side` blocks anchored at the
/// origin and keep blocks at least half covered by the mask. Partial edge
/// blocks are not tiled.
pub fn patch_inclusion(m: &RoiMaskGrid, side: usize) -> Result<Vec<PatchCoord>> {
    if side == 0 {
        return Err(Error::InvalidArgument(format!("patch side must be >= 1")));
    }
    if m.width < side || m.height < side {
        return Err(Error::InvalidArgument(format!(
            "grid {}x{} smaller than patch side {side}",
            m.width, m.height
        )));
    }
    let needed = (side * side).div_ceil(2);
    let mut included = Vec::new();
    for by in 0..(m.height / side) {
        for bx in 0..(m.width / side) {
            let mut covered = 0usize;
            for y in by * side..(by + 1) * side {
                for x in bx * side..(bx + 1) * side {
                    if m.get(x, y) {
                        covered += 1;
                    }
                }
            }
            if covered >= needed {
                included.push(PatchCoord {
                    x: (bx * side) as u32,
                    y: (by * side) as u32,
                });
            }
        }
    }
    Ok(included)
}

/// Voxel-count segmentation metrics against a reference mask.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SegMetrics {
    pub recall: f64,
    pub precision: f64,
    pub iou: f64,
}

/// Recall, precision, and intersection-over-union of `pred` against `truth`.
pub fn seg_metrics(pred: &RoiMaskGrid, truth: &RoiMaskGrid) -> Result<SegMetrics> {
    if pred.width != truth.width || pred.height != truth.height {
        return Err(Error::LengthMismatch {
            expected: truth.bits.len(),
            got: pred.bits.len(),
        });
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fng = 0usize;
    for (p, t) in pred.bits.iter().zip(&truth.bits) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fng += 1,
            (false, false) => {}
        }
    }
    if tp + fng == 0 {
        return Err(Error::InvalidArgument(format!(
            "recall undefined: empty truth mask"
        )));
    }
    if tp + fp == 0 {
        return Err(Error::InvalidArgument(format!(
            "precision undefined: empty predicted mask"
        )));
    }
    Ok(SegMetrics {
        recall: tp as f64 / (tp + fng) as f64,
        precision: tp as f64 / (tp + fp) as f64,
        iou: tp as f64 / (tp + fp + fng) as f64,
    })
}

/// Full mask construction: binarize, then denoise, then dilate — in that
/// order, so a small component is dropped before dilation could rescue it.
pub fn build_mask(h: &HeatmapGrid, p: &MaskParams) -> Result<RoiMaskGrid> {
    let binary = binarize(h, p.threshold)?;
    let clean = denoise(&binary, p.min_component);
    Ok(dilate(&clean, p.dilation_radius))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_from(width: usize, height: usize, set: &[(usize, usize)]) -> RoiMaskGrid {
        let mut g = RoiMaskGrid::empty(width, height);
        for &(x, y) in set {
            g.set(x, y);
        }
        g
    }

    #[test]
    fn binarize_boundary_is_inclusive() {
        let h = HeatmapGrid::new(3, 1, alloc::vec![0.4, 0.5, 0.6], DEFAULT_SUPERPIXEL_UM).unwrap();
        let m = binarize(&h, 0.5).unwrap();
        assert_eq!(m.bits, alloc::vec![false, true, true]);
    }

    #[test]
    fn binarize_extremes() {
        let zeros = HeatmapGrid::new(2, 2, alloc::vec![0.0; 4], 32.0).unwrap();
        assert_eq!(binarize(&zeros, 0.3).unwrap().count_set(), 0);
        let ones = HeatmapGrid::new(2, 2, alloc::vec![1.0; 4], 32.0).unwrap();
        assert_eq!(binarize(&ones, 0.5).unwrap().count_set(), 4);
        assert!(binarize(&ones, 0.0).is_err());
        assert!(binarize(&ones, 1.0).is_err());
    }

    #[test]
    fn denoise_drops_components_below_eight() {
        // a 7-cell diagonal-ish blob (8-connected) far from a 8-cell strip
        let seven: alloc::vec::Vec<(usize, usize)> =
            [(0, 0), (1, 1), (2, 2), (3, 3), (4, 4), (5, 5), (6, 6)].into();
        let mut cells = seven.clone();
        let eight: alloc::vec::Vec<(usize, usize)> = (10..18).map(|x| (x, 30)).collect();
        cells.extend(&eight);
        let m = grid_from(40, 40, &cells);
        let d = denoise(&m, DEFAULT_MIN_COMPONENT);
        for &(x, y) in &seven {
            assert!(!d.get(x, y), "7-cell component must be removed");
        }
        for &(x, y) in &eight {
            assert!(d.get(x, y), "8-cell component must be retained");
        }
    }

    #[test]
    fn denoise_empty_is_empty() {
        let m = RoiMaskGrid::empty(5, 5);
        assert_eq!(denoise(&m, 8).count_set(), 0);
    }

    #[test]
    fn denoise_is_idempotent() {
        let m = grid_from(
            20,
            20,
            &[(1, 1), (1, 2), (2, 1), (9, 9), (10, 10), (10, 9), (9, 10), (11, 11), (12, 12), (12, 11), (11, 12)],
        );
        let once = denoise(&m, 8);
        let twice = denoise(&once, 8);
        assert_eq!(once, twice);
    }

    #[test]
    fn dilation_disk_sizes() {
        let m = grid_from(41, 41, &[(20, 20)]);
        assert_eq!(dilate(&m, 0), m);
        assert_eq!(dilate(&m, 1).count_set(), 5);
        assert_eq!(dilate(&m, 4).count_set(), 49);
    }

    #[test]
    fn dilation_is_monotone() {
        let m = grid_from(30, 30, &[(5, 5), (20, 22), (21, 22)]);
        let d = dilate(&m, 3);
        for idx in 0..m.bits.len() {
            if m.bits[idx] {
                assert!(d.bits[idx]);
            }
        }
        assert!(d.count_set() >= m.count_set());
    }

    #[test]
    fn patch_inclusion_half_coverage_boundary() {
        // one 16x16 block with exactly 128 covered cells, another with 127
        let mut cells = alloc::vec::Vec::new();
        for i in 0..128 {
            cells.push((i % 16, i / 16));
        }
        for i in 0..127 {
            cells.push((16 + i % 16, i / 16));
        }
        let m = grid_from(32, 16, &cells);
        let included = patch_inclusion(&m, 16).unwrap();
        assert_eq!(included, alloc::vec![PatchCoord { x: 0, y: 0 }]);
    }

    #[test]
    fn patch_inclusion_full_mask_counts_blocks() {
        let m = grid_from(
            35,
            19,
            &(0..35 * 19)
                .map(|i| (i % 35, i / 35))
                .collect::<alloc::vec::Vec<_>>(),
        );
        let included = patch_inclusion(&m, 16).unwrap();
        // floor(35/16) * floor(19/16) = 2 * 1
        assert_eq!(included.len(), 2);
        assert!(patch_inclusion(&RoiMaskGrid::empty(8, 8), 16).is_err());
    }

    #[test]
    fn seg_metrics_basics() {
        let truth = grid_from(10, 1, &[(0, 0), (1, 0), (2, 0), (3, 0)]);
        let same = seg_metrics(&truth, &truth).unwrap();
        assert_eq!(
            same,
            SegMetrics {
                recall: 1.0,
                precision: 1.0,
                iou: 1.0
            }
        );
        // pred covers exactly half of truth and nothing else
        let half = grid_from(10, 1, &[(0, 0), (1, 0)]);
        let m = seg_metrics(&half, &truth).unwrap();
        assert_eq!(m.recall, 0.5);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.iou, 0.5);
        // disjoint
        let other = grid_from(10, 1, &[(8, 0)]);
        let d = seg_metrics(&other, &truth).unwrap();
        assert_eq!(
            d,
            SegMetrics {
                recall: 0.0,
                precision: 0.0,
                iou: 0.0
            }
        );
        assert!(seg_metrics(&RoiMaskGrid::empty(10, 1), &truth).is_err());
        assert!(seg_metrics(&truth, &RoiMaskGrid::empty(10, 1)).is_err());
    }

    #[test]
    fn build_mask_denoises_before_dilating() {
        // 7 cells above threshold: removed by denoising even with r=16
        let mut values = alloc::vec![0.1f32; 64 * 64];
        for i in 0..7 {
            values[i] = 0.9;
        }
        let h = HeatmapGrid::new(64, 64, values, DEFAULT_SUPERPIXEL_UM).unwrap();
        let p = MaskParams::new(0.5, 16, 8).unwrap();
        assert_eq!(build_mask(&h, &p).unwrap().count_set(), 0);
        // 8 cells survive and stay put with r=0
        let mut values = alloc::vec![0.1f32; 64 * 64];
        for i in 0..8 {
            values[i] = 0.9;
        }
        let h = HeatmapGrid::new(64, 64, values, DEFAULT_SUPERPIXEL_UM).unwrap();
        let p0 = MaskParams::new(0.5, 0, 8).unwrap();
        assert_eq!(build_mask(&h, &p0).unwrap().count_set(), 8);
    }

    #[test]
    fn build_mask_empty_heatmap() {
        let h = HeatmapGrid::new(4, 4, alloc::vec![0.0; 16], 32.0).unwrap();
        let m = build_mask(&h, &MaskParams::default()).unwrap();
        assert_eq!(m.count_set(), 0);
    }
}
