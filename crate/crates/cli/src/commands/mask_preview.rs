use std::path::{Path, PathBuf};

use dualcloak::image::{load_image, save_image};
use dualcloak::masking::{combine_masks, hair_mask, overlay, parse_face, texture_mask};
use dualcloak::zoo::Zoo;

use crate::components::parser;
use crate::config::LoadedConfig;
use crate::error::CliResult;
use crate::util::{create_dir, stem};

pub const OVERLAY_ALPHA: f64 = 0.5;

pub struct MaskPreview {
    pub texture: PathBuf,
    pub hair: PathBuf,
    pub mask: PathBuf,
    pub overlay: PathBuf,
}

/// Writes `<stem>_texture.png`, `<stem>_hair.png`, `<stem>_mask.png` and
/// `<stem>_overlay.png` into `out_dir`.
pub fn cmd_mask_preview(loaded: &LoadedConfig, zoo: &Zoo, image: &Path, out_dir: &Path) -> CliResult<MaskPreview> {
    let cfg = &loaded.config.attack;
    let img = load_image(image)?;
    let id = stem(image);
    let parser = parser(zoo, loaded)?;
    let texture = texture_mask(&img, cfg.gamma, cfg.blur)?;
    let labels = parse_face(parser.as_ref(), &img, &id)?;
    let set = parser.label_set();
    let hair = hair_mask(&labels, set, set.hair)?;
    let mask = combine_masks(&texture, &hair)?;
    create_dir(out_dir)?;
    let out = MaskPreview {
        texture: out_dir.join(format!("{id}_texture.png")),
        hair: out_dir.join(format!("{id}_hair.png")),
        mask: out_dir.join(format!("{id}_mask.png")),
        overlay: out_dir.join(format!("{id}_overlay.png")),
    };
    texture.save_png(&out.texture)?;
    hair.save_png(&out.hair)?;
    mask.save_png(&out.mask)?;
    save_image(&overlay(&img, &mask, OVERLAY_ALPHA)?, &out.overlay)?;
    Ok(out)
}
