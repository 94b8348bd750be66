pub mod calibrate;
pub mod evaluate;
pub mod grid;
pub mod mask_preview;
pub mod protect;
