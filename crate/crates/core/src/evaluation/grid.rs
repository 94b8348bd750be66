use super::font::{render, GLYPH_H};
use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Geometry and colors of a comparison grid.
///
/// Each row is preceded by a label strip of `label_height` pixels holding
/// the row label, and every cell is separated from its neighbours and the
/// border by `gutter` pixels. For `r` rows, at most `c` images per row, and
/// `H x W` cells the output is `(c*W + (c+1)*gutter)` wide and
/// `(r*(label_height + H) + (r+1)*gutter)` tall, always RGB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLayout {
    pub gutter: usize,
    pub label_height: usize,
    pub background: f64,
    pub ink: f64,
}

impl Default for GridLayout {
    fn default() -> Self {
        Self {
            gutter: 4,
            label_height: GLYPH_H + 4,
            background: 1.0,
            ink: 0.0,
        }
    }
}

impl GridLayout {
    pub fn size(&self, rows: usize, cols: usize, cell_h: usize, cell_w: usize) -> (usize, usize) {
        (
            rows * (self.label_height + cell_h) + (rows + 1) * self.gutter,
            cols * cell_w + (cols + 1) * self.gutter,
        )
    }

    /// Top-left corner of cell `(row, col)`.
    pub fn cell_origin(&self, row: usize, col: usize, cell_h: usize, cell_w: usize) -> (usize, usize) {
        (
            self.gutter + row * (self.label_height + cell_h + self.gutter) + self.label_height,
            self.gutter + col * (cell_w + self.gutter),
        )
    }

    /// Tiles `rows` into one RGB image. Rows may hold different numbers of
    /// images; missing cells stay background.
    pub fn render(&self, rows: &[(String, Vec<ImageTensor>)]) -> Result<ImageTensor> {
        let first = rows
            .iter()
            .flat_map(|(_, imgs)| imgs.first())
            .next()
            .ok_or_else(|| Error::param("comparison grid needs at least one image"))?;
        let (ch, cw) = (first.height(), first.width());
        for img in rows.iter().flat_map(|(_, imgs)| imgs) {
            if img.height() != ch || img.width() != cw {
                return Err(Error::param(format!(
                    "grid cells must all be {ch}x{cw}, got {}x{}",
                    img.height(),
                    img.width()
                )));
            }
        }
        let cols = rows.iter().map(|(_, imgs)| imgs.len()).max().unwrap_or(0);
        let (h, w) = self.size(rows.len(), cols, ch, cw);
        let mut data = vec![self.background; h * w * 3];
        let text_top = (self.label_height.saturating_sub(GLYPH_H)) / 2;
        for (r, (label, imgs)) in rows.iter().enumerate() {
            let (y0, x0) = self.cell_origin(r, 0, ch, cw);
            let strip_top = y0 - self.label_height;
            if self.label_height >= GLYPH_H {
                render(label, w - x0, |dx, dy| {
                    let idx = ((strip_top + text_top + dy) * w + x0 + dx) * 3;
                    data[idx..idx + 3].fill(self.ink);
                });
            }
            for (c, img) in imgs.iter().enumerate() {
                let rgb = img.to_rgb();
                let (cy, cx) = self.cell_origin(r, c, ch, cw);
                for y in 0..ch {
                    let dst = ((cy + y) * w + cx) * 3;
                    let src = y * cw * 3;
                    data[dst..dst + cw * 3].copy_from_slice(&rgb.as_slice()[src..src + cw * 3]);
                }
            }
        }
        ImageTensor::new(h, w, 3, data)
    }
}

/// Side-by-side panels with the default layout.
pub fn comparison_grid(rows: &[(String, Vec<ImageTensor>)]) -> Result<ImageTensor> {
    GridLayout::default().render(rows)
}
