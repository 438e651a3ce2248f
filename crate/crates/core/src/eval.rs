//! Edge-detection quality measures.
//!
//! * Pratt's figure of merit, which rewards detections by their distance to
//!   the nearest ground-truth pixel.
//! * Precision, recall and F from a one-to-one correspondence between
//!   detected and ground-truth pixels within a distance tolerance.
//! * Threshold sweeps summarized by the best shared threshold (ODS), the best
//!   per-image thresholds (OIS) and the recall at 50% precision (R50).

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::congruency::EdgeStrengthMap;
use crate::error::{Error, Result};
use crate::thinning::{binarize, nms, EdgeMap};

/// Usual FOM scaling constant.
pub const DEFAULT_BETA: f64 = 1.0 / 9.0;

/// Matching tolerance as a fraction of the image diagonal.
pub const TOLERANCE_DIAGONAL_FRACTION: f64 = 0.0075;

/// Distance reported for every pixel when the ground truth is empty.
pub const NO_EDGE_DISTANCE: f64 = f64::INFINITY;

pub fn default_tolerance(width: usize, height: usize) -> f64 {
    TOLERANCE_DIAGONAL_FRACTION * ((width * width + height * height) as f64).sqrt()
}

fn check_same_size(det: &EdgeMap, gt: &EdgeMap) -> Result<()> {
    if !det.same_size(gt) {
        return Err(Error::DimensionMismatch(format!(
            "detection {}x{} vs ground truth {}x{}",
            det.width(),
            det.height(),
            gt.width(),
            gt.height()
        )));
    }
    Ok(())
}

/// Exact Euclidean distance from every pixel to the nearest edge pixel.
///
/// Separable lower-envelope algorithm (Felzenszwalb and Huttenlocher) on
/// integer squared distances, so values are exact square roots of integers.
pub fn distance_transform(gt: &EdgeMap) -> Vec<f64> {
    let (w, h) = (gt.width(), gt.height());
    if gt.count() == 0 {
        return vec![NO_EDGE_DISTANCE; w * h];
    }
    // Column pass: vertical distance to the nearest edge in the same column.
    let mut col = vec![None::<i64>; w * h];
    for x in 0..w {
        let mut last = None::<usize>;
        for y in 0..h {
            if gt.get(x, y) {
                last = Some(y);
            }
            col[y * w + x] = last.map(|l| (y - l) as i64);
        }
        let mut next = None::<usize>;
        for y in (0..h).rev() {
            if gt.get(x, y) {
                next = Some(y);
            }
            if let Some(n) = next {
                let d = (n - y) as i64;
                let cur = &mut col[y * w + x];
                *cur = Some(cur.map_or(d, |c| c.min(d)));
            }
        }
    }
    // Row pass: lower envelope of parabolas rooted at columns with a finite
    // vertical distance.
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let f: Vec<(i64, i64)> = (0..w)
            .filter_map(|x| col[y * w + x].map(|d| (x as i64, d * d)))
            .collect();
        let mut hull: Vec<(i64, i64)> = Vec::with_capacity(f.len());
        let mut starts: Vec<f64> = Vec::with_capacity(f.len());
        let intersect = |(q, fq): (i64, i64), (p, fp): (i64, i64)| -> f64 {
            ((fq + q * q) - (fp + p * p)) as f64 / (2 * (q - p)) as f64
        };
        for &pt in &f {
            loop {
                match hull.last() {
                    Some(&top) => {
                        let s = intersect(pt, top);
                        if s <= *starts.last().unwrap() {
                            hull.pop();
                            starts.pop();
                        } else {
                            hull.push(pt);
                            starts.push(s);
                            break;
                        }
                    }
                    None => {
                        hull.push(pt);
                        starts.push(f64::NEG_INFINITY);
                        break;
                    }
                }
            }
        }
        if hull.is_empty() {
            row.iter_mut().for_each(|v| *v = NO_EDGE_DISTANCE);
            return;
        }
        let mut k = 0;
        for (x, o) in row.iter_mut().enumerate() {
            let xf = x as f64;
            while k + 1 < hull.len() && starts[k + 1] <= xf {
                k += 1;
            }
            let (p, fp) = hull[k];
            let dx = x as i64 - p;
            *o = ((dx * dx + fp) as f64).sqrt();
        }
    });
    out
}

/// Pratt's figure of merit. 0 when nothing was detected.
pub fn fom(det: &EdgeMap, gt: &EdgeMap, beta: f64) -> Result<f64> {
    check_same_size(det, gt)?;
    let n_gt = gt.count();
    if n_gt == 0 {
        return Err(Error::Empty("ground truth has no edge pixels".into()));
    }
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::param(
            "beta",
            format!("must be positive, got {beta}"),
        ));
    }
    let n_det = det.count();
    if n_det == 0 {
        return Ok(0.0);
    }
    let dist = distance_transform(gt);
    let sum: f64 = det
        .data()
        .iter()
        .zip(&dist)
        .filter(|(&e, _)| e)
        .map(|(_, &d)| 1.0 / (1.0 + beta * d * d))
        .sum();
    Ok(sum / n_gt.max(n_det) as f64)
}

/// Size of the greedy one-to-one correspondence within `tol_px`.
///
/// Detected pixels are visited by increasing distance to the ground truth
/// (row-major order breaks ties); each takes the nearest still-unmatched
/// ground-truth pixel within the tolerance (again row-major among equals).
pub fn match_edges(det: &EdgeMap, gt: &EdgeMap, tol_px: f64) -> Result<usize> {
    check_same_size(det, gt)?;
    if !tol_px.is_finite() || tol_px < 0.0 {
        return Err(Error::param(
            "tolerance",
            format!("must be non-negative, got {tol_px}"),
        ));
    }
    if det.count() == 0 || gt.count() == 0 {
        return Ok(0);
    }
    let (w, h) = (gt.width(), gt.height());
    let dist = distance_transform(gt);
    let mut order: Vec<usize> = det
        .data()
        .iter()
        .enumerate()
        .filter(|&(i, &e)| e && dist[i] <= tol_px)
        .map(|(i, _)| i)
        .collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));

    let tol2 = tol_px * tol_px;
    let reach = tol_px.floor() as isize;
    let mut taken = vec![false; w * h];
    let mut matched = 0;
    for i in order {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        let mut best: Option<(i64, usize)> = None;
        for dy in -reach..=reach {
            let ny = y + dy;
            if ny < 0 || ny >= h as isize {
                continue;
            }
            for dx in -reach..=reach {
                let nx = x + dx;
                if nx < 0 || nx >= w as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                let d2 = (dx * dx + dy * dy) as i64;
                if !gt.data()[j] || taken[j] || d2 as f64 > tol2 {
                    continue;
                }
                if best.is_none_or(|(bd, bj)| (d2, j) < (bd, bj)) {
                    best = Some((d2, j));
                }
            }
        }
        if let Some((_, j)) = best {
            taken[j] = true;
            matched += 1;
        }
    }
    Ok(matched)
}

/// Detection counts behind precision and recall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchCounts {
    pub n_corr: usize,
    pub n_det: usize,
    pub n_gt: usize,
}

impl MatchCounts {
    /// Precision 1 when nothing was detected; recall 1 when there is
    /// nothing to find.
    pub fn precision(&self) -> f64 {
        if self.n_det == 0 {
            1.0
        } else {
            self.n_corr as f64 / self.n_det as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.n_gt == 0 {
            1.0
        } else {
            self.n_corr as f64 / self.n_gt as f64
        }
    }

    pub fn f_measure(&self) -> f64 {
        f_measure(self.precision(), self.recall())
    }
}

impl std::ops::Add for MatchCounts {
    type Output = MatchCounts;
    fn add(self, o: MatchCounts) -> MatchCounts {
        MatchCounts {
            n_corr: self.n_corr + o.n_corr,
            n_det: self.n_det + o.n_det,
            n_gt: self.n_gt + o.n_gt,
        }
    }
}

pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn match_counts(det: &EdgeMap, gt: &EdgeMap, tol_px: f64) -> Result<MatchCounts> {
    Ok(MatchCounts {
        n_corr: match_edges(det, gt, tol_px)?,
        n_det: det.count(),
        n_gt: gt.count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

pub fn prf(det: &EdgeMap, gt: &EdgeMap, tol_px: f64) -> Result<Prf> {
    let c = match_counts(det, gt, tol_px)?;
    Ok(Prf {
        precision: c.precision(),
        recall: c.recall(),
        f: c.f_measure(),
    })
}

/// Every measure for one detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub fom: f64,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub n_gt: usize,
    pub n_det: usize,
    pub n_corr: usize,
    pub beta: f64,
    pub tolerance_px: f64,
}

pub fn evaluate(det: &EdgeMap, gt: &EdgeMap, beta: f64, tol_px: f64) -> Result<EvalReport> {
    let c = match_counts(det, gt, tol_px)?;
    Ok(EvalReport {
        fom: fom(det, gt, beta)?,
        precision: c.precision(),
        recall: c.recall(),
        f: c.f_measure(),
        n_gt: c.n_gt,
        n_det: c.n_det,
        n_corr: c.n_corr,
        beta,
        tolerance_px: tol_px,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrSample {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// Dataset-level precision/recall over a threshold sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub samples: Vec<PrSample>,
    pub f_ods: f64,
    pub ods_threshold: f64,
    pub f_ois: f64,
    pub r50: f64,
}

impl PrCurve {
    /// `threshold,precision,recall,f` rows with six decimals.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,precision,recall,f\n");
        for p in &self.samples {
            let _ = writeln!(
                s,
                "{:.6},{:.6},{:.6},{:.6}",
                p.threshold, p.precision, p.recall, p.f
            );
        }
        s
    }
}

/// `count` evenly spaced thresholds strictly inside `(0, 1)`.
pub fn threshold_grid(count: usize) -> Vec<f64> {
    (1..=count).map(|i| i as f64 / (count + 1) as f64).collect()
}

/// Highest recall with precision at least 0.5, interpolating linearly where
/// consecutive samples cross that precision. 0 if no sample reaches it.
pub fn recall_at_half_precision(samples: &[PrSample]) -> f64 {
    let mut best: f64 = 0.0;
    for s in samples.iter().filter(|s| s.precision >= 0.5) {
        best = best.max(s.recall);
    }
    for pair in samples.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if (a.precision - 0.5) * (b.precision - 0.5) < 0.0 {
            let t = (0.5 - a.precision) / (b.precision - a.precision);
            best = best.max(a.recall + t * (b.recall - a.recall));
        }
    }
    best
}

/// Per-image counts at each threshold of the sweep, after thinning.
pub fn sweep_counts(
    map: &EdgeStrengthMap,
    gt: &EdgeMap,
    thresholds: &[f64],
    tol_px: f64,
) -> Result<Vec<MatchCounts>> {
    thinned_sweep_counts(&nms(map)?, gt, thresholds, tol_px)
}

/// Per-image counts for a map that is already one pixel wide.
pub fn thinned_sweep_counts(
    thinned: &EdgeStrengthMap,
    gt: &EdgeMap,
    thresholds: &[f64],
    tol_px: f64,
) -> Result<Vec<MatchCounts>> {
    thresholds
        .iter()
        .map(|&t| {
            let det = binarize(thinned, t, t)?;
            match_counts(&det, gt, tol_px)
        })
        .collect()
}

/// Summarizes per-image sweep counts (`counts[image][threshold]`).
pub fn summarize_sweep(thresholds: &[f64], counts: &[Vec<MatchCounts>]) -> PrCurve {
    let samples: Vec<PrSample> = thresholds
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let total = counts
                .iter()
                .fold(MatchCounts::default(), |acc, per| acc + per[ti]);
            PrSample {
                threshold: t,
                precision: total.precision(),
                recall: total.recall(),
                f: total.f_measure(),
            }
        })
        .collect();
    let (mut f_ods, mut ods_threshold) = (samples[0].f, samples[0].threshold);
    for s in &samples[1..] {
        if s.f > f_ods {
            f_ods = s.f;
            ods_threshold = s.threshold;
        }
    }
    let ois_total = counts.iter().fold(MatchCounts::default(), |acc, per| {
        let mut best = per[0];
        for c in &per[1..] {
            if c.f_measure() > best.f_measure() {
                best = *c;
            }
        }
        acc + best
    });
    PrCurve {
        r50: recall_at_half_precision(&samples),
        samples,
        f_ods,
        ods_threshold,
        f_ois: ois_total.f_measure(),
    }
}

/// Threshold sweep over a corpus of strength maps.
pub fn ods_ois(
    strength_maps: &[EdgeStrengthMap],
    gts: &[EdgeMap],
    thresholds: usize,
    tol_px: f64,
) -> Result<PrCurve> {
    corpus_sweep(strength_maps, gts, thresholds, tol_px, sweep_counts)
}

/// Same sweep for maps thinned by the caller, e.g. Canny gradients.
pub fn ods_ois_thinned(
    thinned_maps: &[EdgeStrengthMap],
    gts: &[EdgeMap],
    thresholds: usize,
    tol_px: f64,
) -> Result<PrCurve> {
    corpus_sweep(thinned_maps, gts, thresholds, tol_px, thinned_sweep_counts)
}

type SweepFn = fn(&EdgeStrengthMap, &EdgeMap, &[f64], f64) -> Result<Vec<MatchCounts>>;

fn corpus_sweep(
    maps: &[EdgeStrengthMap],
    gts: &[EdgeMap],
    thresholds: usize,
    tol_px: f64,
    sweep: SweepFn,
) -> Result<PrCurve> {
    if maps.len() != gts.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} strength maps but {} ground-truth maps",
            maps.len(),
            gts.len()
        )));
    }
    if maps.is_empty() {
        return Err(Error::Empty("no images to evaluate".into()));
    }
    if thresholds < 2 {
        return Err(Error::param(
            "thresholds",
            format!("need at least 2, got {thresholds}"),
        ));
    }
    let grid = threshold_grid(thresholds);
    let counts = maps
        .par_iter()
        .zip(gts)
        .map(|(m, gt)| {
            if m.width() != gt.width() || m.height() != gt.height() {
                return Err(Error::DimensionMismatch(
                    "strength map and ground truth differ in size".into(),
                ));
            }
            sweep(m, gt, &grid, tol_px)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_sweep(&grid, &counts))
}

#[cfg(test)]
mod tests {
    use rand::{rngs::StdRng, Rng, SeedableRng};

    use super::*;

    fn map_from(w: usize, h: usize, pts: &[(usize, usize)]) -> EdgeMap {
        let mut m = EdgeMap::empty(w, h);
        for &(x, y) in pts {
            m.set(x, y, true);
        }
        m
    }

    fn random_map(w: usize, h: usize, p: f64, rng: &mut StdRng) -> EdgeMap {
        EdgeMap::new(w, h, (0..w * h).map(|_| rng.random_bool(p)).collect()).unwrap()
    }

    #[test]
    fn distance_zero_on_edges_and_sentinel_when_empty() {
        let gt = map_from(7, 5, &[(2, 1), (6, 4)]);
        let d = distance_transform(&gt);
        assert_eq!(d[7 + 2], 0.0);
        assert_eq!(d[4 * 7 + 6], 0.0);
        assert!(distance_transform(&EdgeMap::empty(4, 4))
            .iter()
            .all(|&v| v == NO_EDGE_DISTANCE));
    }

    #[test]
    fn distance_matches_brute_force() {
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..20 {
            let gt = random_map(16, 16, 0.05, &mut rng);
            if gt.count() == 0 {
                continue;
            }
            let d = distance_transform(&gt);
            let pts: Vec<_> = gt.pixels().collect();
            for y in 0..16 {
                for x in 0..16 {
                    let brute = pts
                        .iter()
                        .map(|&(px, py)| {
                            ((px as f64 - x as f64).powi(2) + (py as f64 - y as f64).powi(2)).sqrt()
                        })
                        .fold(f64::INFINITY, f64::min);
                    assert!((d[y * 16 + x] - brute).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn fom_unit_cases() {
        let gt = map_from(10, 10, &[(1, 1), (2, 2), (7, 3)]);
        assert_eq!(fom(&gt, &gt, DEFAULT_BETA).unwrap(), 1.0);
        let gt = map_from(10, 10, &[(2, 5)]);
        let det = map_from(10, 10, &[(5, 5)]);
        assert!((fom(&det, &gt, DEFAULT_BETA).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(
            fom(&EdgeMap::empty(10, 10), &gt, DEFAULT_BETA).unwrap(),
            0.0
        );
        assert!(fom(&det, &EdgeMap::empty(10, 10), DEFAULT_BETA).is_err());
        assert!(fom(&EdgeMap::empty(9, 10), &gt, DEFAULT_BETA).is_err());
    }

    #[test]
    fn fom_matches_double_loop() {
        let mut rng = StdRng::seed_from_u64(43);
        for _ in 0..10 {
            let gt = random_map(16, 16, 0.1, &mut rng);
            let det = random_map(16, 16, 0.15, &mut rng);
            if gt.count() == 0 {
                continue;
            }
            let gts: Vec<_> = gt.pixels().collect();
            let mut sum = 0.0;
            for (x, y) in det.pixels() {
                let d2 = gts
                    .iter()
                    .map(|&(gx, gy)| {
                        (gx as f64 - x as f64).powi(2) + (gy as f64 - y as f64).powi(2)
                    })
                    .fold(f64::INFINITY, f64::min);
                sum += 1.0 / (1.0 + d2 / 9.0);
            }
            let expect = sum / gt.count().max(det.count()) as f64;
            assert!((fom(&det, &gt, DEFAULT_BETA).unwrap() - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn spurious_pixel_lowers_fom() {
        let gt = map_from(12, 12, &[(3, 3), (4, 3), (5, 3)]);
        let mut det = gt.clone();
        let before = fom(&det, &gt, DEFAULT_BETA).unwrap();
        det.set(9, 9, true);
        assert!(fom(&det, &gt, DEFAULT_BETA).unwrap() < before);
    }

    #[test]
    fn matching_basics() {
        let gt = map_from(10, 10, &[(1, 1), (5, 5), (8, 2)]);
        assert_eq!(match_edges(&gt, &gt, 0.0).unwrap(), 3);
        assert_eq!(match_edges(&EdgeMap::empty(10, 10), &gt, 2.0).unwrap(), 0);
        assert!(match_edges(&gt, &gt, -1.0).is_err());
    }

    /// Largest one-to-one assignment within tolerance, by exhaustive search.
    fn max_matching(
        det: &[(usize, usize)],
        gt: &[(usize, usize)],
        tol: f64,
        used: &mut Vec<bool>,
    ) -> usize {
        let Some((&(x, y), rest)) = det.split_first() else {
            return 0;
        };
        let mut best = max_matching(rest, gt, tol, used);
        for (j, &(gx, gy)) in gt.iter().enumerate() {
            let d = ((gx as f64 - x as f64).powi(2) + (gy as f64 - y as f64).powi(2)).sqrt();
            if !used[j] && d <= tol {
                used[j] = true;
                best = best.max(1 + max_matching(rest, gt, tol, used));
                used[j] = false;
            }
        }
        best
    }

    #[test]
    fn clustered_matching_equals_exhaustive() {
        let det_pts = [(4, 4), (5, 4), (4, 5), (6, 6), (5, 6)];
        let gt_pts = [(5, 5), (4, 6), (6, 4)];
        let det = map_from(10, 10, &det_pts);
        let gt = map_from(10, 10, &gt_pts);
        let tol = 3.0;
        let greedy = match_edges(&det, &gt, tol).unwrap();
        let exhaustive = max_matching(&det_pts, &gt_pts, tol, &mut vec![false; 3]);
        assert_eq!(greedy, 3);
        assert_eq!(greedy, exhaustive);
    }

    #[test]
    fn prf_cases() {
        let gt = map_from(10, 10, &[(1, 1), (2, 2), (3, 3)]);
        let p = prf(&gt, &gt, 0.0).unwrap();
        assert_eq!((p.precision, p.recall, p.f), (1.0, 1.0, 1.0));
        let p = prf(&EdgeMap::empty(10, 10), &gt, 1.0).unwrap();
        assert_eq!((p.precision, p.recall, p.f), (1.0, 0.0, 0.0));

        // 6 ground-truth pixels, 4 detections of which 3 land on them.
        let gt = map_from(20, 20, &[(1, 1), (5, 1), (9, 1), (13, 1), (1, 10), (5, 10)]);
        let det = map_from(20, 20, &[(1, 1), (5, 1), (9, 1), (15, 15)]);
        let p = prf(&det, &gt, 1.0).unwrap();
        assert_eq!(p.precision, 0.75);
        assert_eq!(p.recall, 0.5);
        assert!((p.f - 0.6).abs() < 1e-15);
    }

    #[test]
    fn r50_interpolates_crossing() {
        let s = |p, r| PrSample {
            threshold: 0.0,
            precision: p,
            recall: r,
            f: f_measure(p, r),
        };
        assert_eq!(
            recall_at_half_precision(&[s(0.4, 0.9), s(0.6, 0.5), s(0.9, 0.2)]),
            0.7
        );
        assert_eq!(recall_at_half_precision(&[s(0.3, 0.9), s(0.4, 0.5)]), 0.0);
    }

    #[test]
    fn grid_is_strictly_inside_unit_interval() {
        let g = threshold_grid(4);
        assert_eq!(g, vec![0.2, 0.4, 0.6, 0.8]);
    }

    #[test]
    fn csv_layout() {
        let curve = PrCurve {
            samples: vec![PrSample {
                threshold: 0.5,
                precision: 1.0 / 3.0,
                recall: 0.25,
                f: 2.0 / 7.0,
            }],
            f_ods: 0.0,
            ods_threshold: 0.5,
            f_ois: 0.0,
            r50: 0.0,
        };
        assert_eq!(
            curve.to_csv(),
            "threshold,precision,recall,f\n0.500000,0.333333,0.250000,0.285714\n"
        );
    }
}
