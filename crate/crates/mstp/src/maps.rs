//! Site-grid heatmaps on a diverging colour scale.

use std::path::Path;

use image::{Rgb, RgbImage};

use mstp_core::covariance::Coord;

use crate::error::{CliError, Result};

/// Symmetric limit of the colour scale for t-values.
pub const T_LIMIT: f64 = 4.0;

const EMPTY: Rgb<u8> = Rgb([235, 235, 235]);
const MISSING: Rgb<u8> = Rgb([90, 90, 90]);
const LEGEND_PX: u32 = 8;

/// Blue below zero, white at zero, red above; `v` is clamped to `[-1, 1]`.
pub fn diverging(v: f64) -> Rgb<u8> {
    if !v.is_finite() {
        return MISSING;
    }
    let v = v.clamp(-1.0, 1.0);
    let (lo, hi) = ([33.0, 102.0, 172.0], [178.0, 24.0, 43.0]);
    let end = if v < 0.0 { lo } else { hi };
    let w = v.abs();
    let mix = |k: usize| (255.0 * (1.0 - w) + end[k] * w).round() as u8;
    Rgb([mix(0), mix(1), mix(2)])
}

/// Row and column of every site on the lattice of its distinct coordinates,
/// with north at the top.
pub fn grid_cells(sites: &[Coord]) -> (usize, usize, Vec<(usize, usize)>) {
    let distinct = |k: usize| {
        let mut v: Vec<f64> = sites.iter().map(|c| c[k]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (lons, lats) = (distinct(0), distinct(1));
    let cells = sites
        .iter()
        .map(|c| {
            let col = lons.iter().position(|&x| x == c[0]).unwrap();
            let row = lats.len() - 1 - lats.iter().position(|&y| y == c[1]).unwrap();
            (row, col)
        })
        .collect();
    (lats.len(), lons.len(), cells)
}

/// Renders one value per site, scaled by `limit`, with a legend strip along
/// the bottom.
pub fn render(sites: &[Coord], values: &[f64], limit: f64, cell_px: u32) -> RgbImage {
    let (rows, cols, cells) = grid_cells(sites);
    let cell = cell_px.max(1);
    let (w, h) = (cols as u32 * cell, rows as u32 * cell);
    let mut img = RgbImage::from_pixel(w, h + LEGEND_PX, EMPTY);
    let limit = if limit > 0.0 && limit.is_finite() { limit } else { 1.0 };
    for (&(r, c), &v) in cells.iter().zip(values) {
        let colour = diverging(v / limit);
        for y in 0..cell {
            for x in 0..cell {
                img.put_pixel(c as u32 * cell + x, r as u32 * cell + y, colour);
            }
        }
    }
    for x in 0..w {
        let colour = diverging(if w > 1 { 2.0 * x as f64 / (w - 1) as f64 - 1.0 } else { 0.0 });
        for y in 0..LEGEND_PX {
            img.put_pixel(x, h + y, colour);
        }
    }
    img
}

/// Largest finite magnitude, used as the limit for trend maps.
pub fn symmetric_limit(values: &[f64]) -> f64 {
    values.iter().filter(|v| v.is_finite()).fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CliError::Data(format!("{}: cannot write image: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colour_scale() {
        assert_eq!(diverging(0.0), Rgb([255, 255, 255]));
        assert_eq!(diverging(1.0), diverging(7.0));
        assert!(diverging(-1.0)[2] > diverging(-1.0)[0]);
        assert!(diverging(1.0)[0] > diverging(1.0)[2]);
        assert_eq!(diverging(f64::NAN), MISSING);
    }

    #[test]
    fn cells_follow_coordinates() {
        let sites = [[0.0, 0.0], [2.5, 0.0], [0.0, 2.5], [5.0, 2.5]];
        let (rows, cols, cells) = grid_cells(&sites);
        assert_eq!((rows, cols), (2, 3));
        assert_eq!(cells, vec![(1, 0), (1, 1), (0, 0), (0, 2)]);
        let img = render(&sites, &[4.0, -4.0, 0.0, f64::NAN], T_LIMIT, 2);
        assert_eq!(img.dimensions(), (6, 4 + LEGEND_PX));
        assert_eq!(*img.get_pixel(0, 2), diverging(1.0));
        assert_eq!(*img.get_pixel(2, 3), diverging(-1.0));
        assert_eq!(*img.get_pixel(2, 0), EMPTY);
        assert_eq!(*img.get_pixel(4, 0), MISSING);
    }
}
